//! First-order kernel magnitude of the 10 x 100 km link with and without
//! mid-link OPC, written as CSV surfaces over (w1, w2) at w = 0.

use std::f64::consts::PI;
use vao::channel::FiberSpan;
use vao::kernels::{opc_kernel_g, phased_array, render_kernel_surface, FrequencyGrid, KernelMode, KernelParams};

fn main() -> vao::Result<()> {
    let params = KernelParams::from_span(&FiberSpan::ssmf(100e3), 10);
    let grid = FrequencyGrid::new(128, 2.0 * PI * 1.5e9)?;
    for (mode, file) in [
        (KernelMode::VsfeForward, "kernel_no_opc.csv"),
        (KernelMode::VaoForward, "kernel_opc.csv"),
    ] {
        let s = render_kernel_surface(&params, &grid, mode, 0.0)?;
        std::fs::write(file, s.to_csv()).map_err(|source| vao::Error::Io {
            path: file.into(),
            source,
        })?;
        println!("{mode:?}: peak {:.3} of the no-OPC peak -> {file}", s.peak());
    }
    let d = (2.0 * PI * 20e9).powi(2);
    println!(
        "dOmega = (2pi 20 GHz)^2: |G| = {:.1} m, |Xi(5)| = {:.2}",
        opc_kernel_g(d, &params).norm(),
        phased_array(5, d, &params).norm()
    );
    Ok(())
}
