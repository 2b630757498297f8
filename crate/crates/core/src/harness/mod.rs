//! Experiment orchestration: seeded sweeps over launch power or distance,
//! Monte-Carlo accumulation per point, discard calibration and persistence.

mod config;
mod results;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::channel::{propagate_link, Link};
use crate::equalizers::{calibrate_discard_with, EqualizerConfig};
use crate::error::{Error, Result};
use crate::kernels::{render_kernel_surface, FrequencyGrid, KernelMode, KernelParams, KernelSurface};
use crate::metrics::{snr_data_aided, SnrAccumulator};
use crate::rxdsp::{run_chain, RxChain, Scheme};
use crate::waveform::{transmit, DualPolSignal, PolSymbols, TxConfig};

pub use config::{Axis, ExperimentConfig, LinkConfig, SchemeOverride, StopConfig, SweepConfig};
pub use results::{
    config_hash, emit_csv, parse_csv, read_csv, rows_to_csv_lines, sort_rows, to_csv_string, write_manifest, Manifest,
    Row, SweepResult, CSV_HEADER,
};

/// SplitMix64 finaliser, used to derive independent seeds from tuples.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed_u64, |acc, &p| mix(acc ^ mix(p)))
}

/// Identity of a sweep point, independent of evaluation order.
#[derive(Clone, Copy, Debug)]
struct PointKey {
    power_dbm: f64,
    num_spans: usize,
}

impl PointKey {
    fn centi_db(&self) -> u64 {
        (self.power_dbm * 100.0).round() as i64 as u64
    }

    fn label(&self, span_km: f64) -> String {
        format!("{:.4} dBm, {:.4} km", self.power_dbm, self.num_spans as f64 * span_km)
    }
}

impl ExperimentConfig {
    fn frame_seed(&self, frame: usize) -> u64 {
        self.seeds
            .get(frame)
            .copied()
            .unwrap_or_else(|| derive_seed(&[self.master_seed, frame as u64]))
    }

    fn windowed(scheme: Scheme) -> bool {
        matches!(scheme, Scheme::VsfeSingle | Scheme::VsfeRecursive | Scheme::Vao)
    }

    fn row_window(&self, scheme: Scheme) -> (usize, usize) {
        if Self::windowed(scheme) {
            let e = self.equalizer_for(scheme);
            (e.window_symbols, e.discard_per_side)
        } else {
            (0, 0)
        }
    }
}

/// One simulated frame through both link flavours a point needs.
struct Frame {
    reference: PolSymbols,
    plain: Option<DualPolSignal>,
    opc: Option<DualPolSignal>,
}

fn simulate_frame(
    cfg: &ExperimentConfig,
    key: PointKey,
    frame: usize,
    links: &(Option<Link>, Option<Link>),
) -> Result<Frame> {
    let seed = cfg.frame_seed(frame);
    let tx = TxConfig {
        power_per_channel: key.power_dbm,
        seed,
        ..cfg.tx.clone()
    };
    let (signal, symbols) = transmit(&tx)?;
    let reference = symbols.channels[tx.num_channels / 2].clone();
    let noise = |flavour: u64| {
        ChaCha20Rng::seed_from_u64(derive_seed(&[
            cfg.master_seed,
            seed,
            key.centi_db(),
            key.num_spans as u64,
            flavour,
        ]))
    };
    let plain = match &links.0 {
        Some(l) => Some(propagate_link(&signal, l, &mut noise(0))?),
        None => None,
    };
    let opc = match &links.1 {
        Some(l) => Some(propagate_link(&signal, l, &mut noise(1))?),
        None => None,
    };
    Ok(Frame { reference, plain, opc })
}

/// Runs `schemes` at one point until the stop rule or the budget is hit.
fn evaluate_point(
    cfg: &ExperimentConfig,
    key: PointKey,
    schemes: &[Scheme],
) -> (Vec<Row>, Vec<(String, String)>, bool) {
    let start = Instant::now();
    let label = key.label(cfg.link.span_length_km);
    let noiseless = !cfg.link.ase;
    let mut run: Vec<Scheme> = schemes.to_vec();
    if noiseless && !run.contains(&Scheme::Edc) {
        run.insert(0, Scheme::Edc);
    }
    let needs_plain = run.iter().any(|s| !s.uses_opc());
    let needs_opc = run.iter().any(|s| s.uses_opc());
    let links = (
        needs_plain.then(|| cfg.link.build(key.num_spans, false)),
        needs_opc.then(|| cfg.link.build(key.num_spans, true)),
    );
    let chains: Vec<(Scheme, RxChain, EqualizerConfig)> = run
        .iter()
        .map(|&s| (s, RxChain::centre(s, &cfg.tx), cfg.equalizer_for(s)))
        .collect();
    let mut acc: BTreeMap<Scheme, SnrAccumulator> = BTreeMap::new();
    let mut failed: BTreeMap<Scheme, String> = BTreeMap::new();
    let mut seeds = Vec::new();
    let mut exhausted = false;
    for frame in 0.. {
        let f = match simulate_frame(cfg, key, frame, &links) {
            Ok(f) => f,
            Err(e) => {
                for &s in &run {
                    failed.entry(s).or_insert_with(|| e.to_string());
                }
                break;
            }
        };
        seeds.push(cfg.frame_seed(frame));
        for (scheme, chain, eq) in &chains {
            if failed.contains_key(scheme) {
                continue;
            }
            let (rx, link) = if scheme.uses_opc() {
                (f.opc.as_ref(), links.1.as_ref())
            } else {
                (f.plain.as_ref(), links.0.as_ref())
            };
            let out = run_chain(rx.expect("simulated"), chain, link.expect("built"), eq)
                .and_then(|sym| acc.entry(*scheme).or_default().add(&sym, &f.reference));
            if let Err(e) = out {
                failed.insert(*scheme, e.to_string());
            }
        }
        let converged = acc.values().all(|a| {
            a.estimate()
                .map(|e| e.confidence_halfwidth <= cfg.stop.halfwidth_db)
                .unwrap_or(true)
        });
        if converged || failed.len() == run.len() {
            break;
        }
        let over_time = cfg
            .stop
            .max_wall_time_s
            .is_some_and(|t| start.elapsed().as_secs_f64() >= t);
        if frame + 1 >= cfg.stop.max_frames || over_time {
            exhausted = true;
            break;
        }
    }
    let wall = if cfg.record_wall_time {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    let edc = acc.get(&Scheme::Edc).and_then(|a| a.estimate().ok());
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &scheme in schemes {
        let est = acc
            .get(&scheme)
            .and_then(|a| a.estimate().ok())
            .filter(|_| !failed.contains_key(&scheme));
        if let Some(msg) = failed.get(&scheme) {
            failures.push((format!("{} @ {label}", scheme.name()), msg.clone()));
        }
        let (w, d) = cfg.row_window(scheme);
        rows.push(
            Row {
                scheme,
                power_dbm: key.power_dbm,
                distance_km: key.num_spans as f64 * cfg.link.span_length_km,
                window_symbols: w,
                discard: d,
                snr_db: est.map(|e| e.snr_db),
                zeta_db: match (noiseless, est, edc) {
                    (true, Some(e), Some(r)) => Some(e.snr_db - r.snr_db),
                    _ => None,
                },
                num_symbols: est.map_or(0, |e| e.num_symbols),
                wall_time_s: wall,
                seeds: seeds.clone(),
            }
            .rounded(),
        );
    }
    (rows, failures, exhausted)
}

fn same_point(a: &Row, b: &Row) -> bool {
    a.scheme == b.scheme && (a.distance_km - b.distance_km).abs() < 1e-6 && (a.power_dbm - b.power_dbm).abs() < 1e-6
}

/// Incremental persistence of completed rows.
pub struct Checkpoint {
    path: PathBuf,
    rows: Vec<Row>,
}

impl Checkpoint {
    /// Opens `path`, keeping rows already there when `resume` is set.
    pub fn open(path: &Path, resume: bool) -> Result<Self> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let rows = if resume && path.exists() {
            read_csv(path)?
        } else {
            Vec::new()
        };
        let mut text = to_csv_string(&[]);
        text.push_str(&rows_to_csv_lines(&rows));
        std::fs::write(path, text).map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn find(&self, scheme: Scheme, distance_km: f64, power_dbm: Option<f64>) -> Option<&Row> {
        self.rows.iter().find(|r| {
            r.scheme == scheme
                && (r.distance_km - distance_km).abs() < 1e-6
                && power_dbm.is_none_or(|p| (r.power_dbm - p).abs() < 1e-6)
        })
    }

    fn append(&mut self, rows: &[Row]) -> Result<()> {
        let mut f = std::fs::OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|source| Error::Io {
                path: self.path.clone(),
                source,
            })?;
        f.write_all(rows_to_csv_lines(rows).as_bytes())
            .map_err(|source| Error::Io {
                path: self.path.clone(),
                source,
            })?;
        self.rows.extend_from_slice(rows);
        Ok(())
    }
}

/// Runs the configured sweep. With a checkpoint, completed rows are appended
/// as they finish and rows already present are reused.
pub fn run_experiment_with(cfg: &ExperimentConfig, mut checkpoint: Option<&mut Checkpoint>) -> Result<SweepResult> {
    cfg.validate()?;
    let mut result = SweepResult::default();
    if cfg.schemes.is_empty() || cfg.sweep.values.is_empty() {
        return Ok(result);
    }
    match cfg.sweep.axis {
        Axis::Power => {
            let spans = cfg.link.num_spans;
            let distance = spans as f64 * cfg.link.span_length_km;
            let todo: Vec<f64> = cfg
                .sweep
                .values
                .iter()
                .copied()
                .filter(|&p| {
                    let p = (p * 1e4).round() / 1e4;
                    checkpoint
                        .as_ref()
                        .is_none_or(|c| cfg.schemes.iter().any(|&s| c.find(s, distance, Some(p)).is_none()))
                })
                .collect();
            let sink = checkpoint.as_deref_mut().map(Mutex::new);
            let fresh: Vec<_> = todo
                .par_iter()
                .map(|&p| {
                    let point = evaluate_point(
                        cfg,
                        PointKey {
                            power_dbm: p,
                            num_spans: spans,
                        },
                        &cfg.schemes,
                    );
                    let saved = sink
                        .as_ref()
                        .map_or(Ok(()), |c| c.lock().expect("checkpoint lock").append(&point.0));
                    saved.map(|_| point)
                })
                .collect::<Result<_>>()?;
            for ((rows, failures, exhausted), p) in fresh.into_iter().zip(&todo) {
                result.rows.extend(rows);
                result.failures.extend(failures);
                if exhausted {
                    result.budget_exhausted.push(
                        PointKey {
                            power_dbm: *p,
                            num_spans: spans,
                        }
                        .label(cfg.link.span_length_km),
                    );
                }
            }
            if let Some(c) = checkpoint.as_deref() {
                for r in &c.rows {
                    if !result.rows.iter().any(|x| same_point(x, r)) && cfg.schemes.contains(&r.scheme) {
                        result.rows.push(r.clone());
                    }
                }
            }
        }
        Axis::Distance => {
            let sink = checkpoint.map(Mutex::new);
            let per_scheme: Vec<Result<SchemeSweep>> = cfg
                .schemes
                .par_iter()
                .map(|&scheme| distance_sweep(cfg, scheme, sink.as_ref()))
                .collect();
            for r in per_scheme {
                let (rows, failures, exhausted) = r?;
                result.rows.extend(rows);
                result.failures.extend(failures);
                result.budget_exhausted.extend(exhausted);
            }
        }
    }
    sort_rows(&mut result.rows);
    Ok(result)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_experiment_with(cfg, None)
}

/// Rows, failures and budget-exhausted points of one scheme.
type SchemeSweep = (Vec<Row>, Vec<(String, String)>, Vec<String>);

/// Distance sweep of one scheme, each point at the scheme's optimum power
/// (or the fixed sweep power). The search walks a grid of `search_step_db`
/// from the previous point's optimum.
fn distance_sweep(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    checkpoint: Option<&Mutex<&mut Checkpoint>>,
) -> Result<SchemeSweep> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut exhausted = Vec::new();
    let mut start = cfg.sweep.search_start_dbm;
    for &km in &cfg.sweep.values {
        let spans = cfg.spans_for_distance(km)?;
        let distance = spans as f64 * cfg.link.span_length_km;
        let saved = checkpoint.and_then(|c| c.lock().expect("checkpoint lock").find(scheme, distance, None).cloned());
        if let Some(r) = saved {
            start = r.power_dbm;
            rows.push(r);
            continue;
        }
        let mut eval = |p: f64| {
            let (mut r, f, e) = evaluate_point(
                cfg,
                PointKey {
                    power_dbm: p,
                    num_spans: spans,
                },
                &[scheme],
            );
            failures.extend(f);
            if e {
                exhausted.push(
                    PointKey {
                        power_dbm: p,
                        num_spans: spans,
                    }
                    .label(cfg.link.span_length_km),
                );
            }
            r.remove(0)
        };
        let best = match cfg.sweep.power_dbm {
            Some(p) => eval(p),
            None => {
                let step = cfg.sweep.search_step_db;
                let snr = |r: &Row| r.snr_db.unwrap_or(f64::NEG_INFINITY);
                let mut best = eval(start);
                let mut evals = 1;
                for dir in [1.0, -1.0] {
                    loop {
                        if evals >= cfg.sweep.search_max_evals {
                            break;
                        }
                        let cand = eval(best.power_dbm + dir * step);
                        evals += 1;
                        if snr(&cand) > snr(&best) {
                            best = cand;
                        } else {
                            break;
                        }
                    }
                    if (best.power_dbm - start).abs() > 1e-9 {
                        break;
                    }
                }
                best
            }
        };
        if let Some(c) = checkpoint {
            c.lock().expect("checkpoint lock").append(std::slice::from_ref(&best))?;
        }
        start = best.power_dbm;
        rows.push(best);
    }
    Ok((rows, failures, exhausted))
}

/// Runs the sweep, writing `output` (CSV) and its manifest sidecar. A
/// partial-results file next to `output` allows an interrupted run to resume.
pub fn run_to_files(cfg: &ExperimentConfig, output: &Path, resume: bool) -> Result<SweepResult> {
    let partial = partial_path(output);
    let mut checkpoint = Checkpoint::open(&partial, resume)?;
    let result = run_experiment_with(cfg, Some(&mut checkpoint))?;
    emit_csv(&result, output)?;
    let manifest = Manifest {
        experiment: cfg.name.clone(),
        config_sha256: config_hash(&cfg.to_toml()),
        master_seed: cfg.master_seed,
        seeds: cfg.seeds.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        failures: result.failures.iter().map(|(k, m)| format!("{k}: {m}")).collect(),
        budget_exhausted: result.budget_exhausted.clone(),
    };
    write_manifest(&manifest, &manifest_path(output))?;
    std::fs::remove_file(&partial).map_err(|source| Error::Io { path: partial, source })?;
    Ok(result)
}

fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    output.with_file_name(name)
}

pub fn partial_path(output: &Path) -> PathBuf {
    sibling(output, ".partial")
}

pub fn manifest_path(output: &Path) -> PathBuf {
    sibling(output, ".manifest.toml")
}

/// Normalised kernel surface of the configured link.
pub fn kernel_surface_command(
    params: &KernelParams,
    grid: &FrequencyGrid,
    mode: KernelMode,
    omega_fixed: f64,
    path: &Path,
) -> Result<KernelSurface> {
    let s = render_kernel_surface(params, grid, mode, omega_fixed)?;
    std::fs::write(path, s.to_csv()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(s)
}

/// Converged per-side discard of one windowed scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscardCalibration {
    pub scheme: Scheme,
    pub window_symbols: usize,
    pub discard: usize,
    pub snr_db: f64,
}

/// Smallest discard (a multiple of `step` symbols) beyond which the chain SNR
/// moves by less than `tolerance_db`, for every windowed scheme of `cfg`, on
/// one frame at the first sweep power.
pub fn calibrate_discards(cfg: &ExperimentConfig, tolerance_db: f64, step: usize) -> Result<Vec<DiscardCalibration>> {
    cfg.validate()?;
    let power = match cfg.sweep.axis {
        Axis::Power => cfg.sweep.values.first().copied(),
        Axis::Distance => cfg.sweep.power_dbm,
    }
    .unwrap_or(cfg.sweep.search_start_dbm);
    let spans = match cfg.sweep.axis {
        Axis::Power => cfg.link.num_spans,
        Axis::Distance => cfg
            .sweep
            .values
            .first()
            .map_or(Ok(cfg.link.num_spans), |&d| cfg.spans_for_distance(d))?,
    };
    let key = PointKey {
        power_dbm: power,
        num_spans: spans,
    };
    let schemes: Vec<Scheme> = cfg
        .schemes
        .iter()
        .copied()
        .filter(|&s| ExperimentConfig::windowed(s))
        .collect();
    let links = (
        schemes
            .iter()
            .any(|s| !s.uses_opc())
            .then(|| cfg.link.build(spans, false)),
        schemes
            .iter()
            .any(|s| s.uses_opc())
            .then(|| cfg.link.build(spans, true)),
    );
    let frame = simulate_frame(cfg, key, 0, &links)?;
    schemes
        .iter()
        .map(|&scheme| {
            let (rx, link) = if scheme.uses_opc() {
                (frame.opc.as_ref(), links.1.as_ref())
            } else {
                (frame.plain.as_ref(), links.0.as_ref())
            };
            let (rx, link) = (rx.expect("simulated"), link.expect("built"));
            let base = cfg.equalizer_for(scheme);
            let chain = RxChain::centre(scheme, &cfg.tx);
            let mut seen = BTreeMap::new();
            let discard = calibrate_discard_with(
                base.window_symbols,
                |d| {
                    let eq = EqualizerConfig {
                        discard_per_side: d,
                        ..base.clone()
                    };
                    let snr = snr_data_aided(&run_chain(rx, &chain, link, &eq)?, &frame.reference)?.snr_db;
                    seen.insert(d, snr);
                    Ok(snr)
                },
                tolerance_db,
                step,
            )?;
            Ok(DiscardCalibration {
                scheme,
                window_symbols: base.window_symbols,
                discard,
                snr_db: seen[&discard],
            })
        })
        .collect()
}
