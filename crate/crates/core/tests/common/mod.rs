//! Helpers shared by the oracle and acceptance targets.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vao::channel::{propagate_link, FiberSpan, Link};
use vao::fft::fft;
use vao::waveform::{transmit, TxConfig};
use vao_oracles::OracleLink;

pub fn oracle_link(span: &FiberSpan, num_spans: usize) -> OracleLink {
    OracleLink {
        alpha: span.alpha,
        beta2: span.beta2,
        gamma: span.gamma,
        span_length: span.length,
        num_spans,
    }
}

pub fn random_window(n: usize, seed: u64) -> (Vec<Complex64>, Vec<Complex64>) {
    use rand::Rng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = || {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.03)
            .collect()
    };
    (draw(), draw())
}

/// `SSFM(s) - linear(s)`, rotated back to the dispersion-free frame.
pub fn extracted_perturbation(
    p_dbm: f64,
    num_spans: usize,
    nsym: usize,
) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>, f64) {
    let tx = TxConfig {
        num_channels: 1,
        num_symbols: nsym,
        samples_per_symbol: 2,
        rolloff: 0.1,
        power_per_channel: p_dbm,
        ..TxConfig::default()
    };
    let (s, _) = transmit(&tx).unwrap();
    let span = FiberSpan::ssmf(100e3);
    let linear = FiberSpan { gamma: 0.0, ..span };
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let nl = Link::uniform(num_spans, span, 5.0, false, false, 2000);
    let lin = Link::uniform(num_spans, linear, 5.0, false, false, 1);
    let a = propagate_link(&s, &nl, &mut rng).unwrap();
    let b = propagate_link(&s, &lin, &mut rng).unwrap();
    let n = s.len();
    let z = num_spans as f64 * span.length;
    let w = vao::fft::angular_frequencies(n, s.sample_rate);
    let rotate = |p: &[Complex64], q: &[Complex64]| -> Vec<Complex64> {
        let d: Vec<Complex64> = p.iter().zip(q).map(|(u, v)| u - v).collect();
        let mut spec = fft(&d);
        for (v, wk) in spec.iter_mut().zip(&w) {
            *v *= Complex64::from_polar(1.0, -span.beta2 * wk * wk * z / 2.0);
        }
        spec
    };
    (rotate(&a.x, &b.x), s.x.clone(), s.y.clone(), s.sample_rate)
}
