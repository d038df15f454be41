#![allow(dead_code)]

use cogur_core::galerkin::{GeometrySpec, InitialData, Scheme, SimConfig};
use cogur_core::memory::{KernelFamily, MemoryKernel, Side};
use cogur_core::nonlinear::NonlinearitySpec;
use cogur_core::wentzell::ModelParams;
use cogur_core::Backend;

pub fn model(alpha: f64, beta: f64, omega: f64, nu: f64) -> ModelParams {
    ModelParams { alpha, beta, nu, omega }
}

pub fn exponential(lambda0: f64, delta: f64, side: Side) -> MemoryKernel {
    MemoryKernel::new(KernelFamily::Exponential { lambda0, delta }, side).unwrap()
}

/// Linear memoryless run on the unit interval.
pub fn interval_config(cells: usize, model: ModelParams, n_modes: usize, dt: f64, t_end: f64) -> SimConfig {
    SimConfig {
        geometry: GeometrySpec {
            backend: Backend::Interval,
            size: 1.0,
            refine: cells,
        },
        model,
        kernel_omega: MemoryKernel::zero(Side::Omega),
        kernel_gamma: MemoryKernel::zero(Side::Gamma),
        nonlinearity: NonlinearitySpec::linear(),
        n_modes,
        dt,
        t_end,
        scheme: Scheme::ImexEuler,
        s_max: None,
        initial: InitialData::default(),
        stride: 1,
        strong_diagnostics: false,
        force: false,
    }
}
