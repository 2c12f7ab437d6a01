//! Reference solution: fixed-step RK4 on the time-local master equation
//! `dρ/dt = −i[Ĥ(t), ρ] + Δ(t)(ĈρĈ† − ½{Ĉ†Ĉ, ρ})`.

use std::time::Instant;

use crate::config::{EngineKind, SimConfig};
use crate::error::{Error, Result};
use crate::ledger::TimeGrid;
use crate::models::{initial_state, ModelSpec};
use crate::qcore::{DensityMatrix, Operator, C64};
use crate::series::{records_at, RunOutput, RunSummary, Snapshot};

/// Eigenvalues below this abort the integration.
pub const POSITIVITY_GUARD: f64 = -1e-6;

#[derive(Clone, Copy, Debug)]
pub struct LindbladGenerator {
    pub spec: ModelSpec,
}

impl LindbladGenerator {
    pub fn new(spec: ModelSpec) -> Self {
        LindbladGenerator { spec }
    }
}

pub fn lindblad_rhs(rho: &Operator, t: f64, gen: &LindbladGenerator) -> Operator {
    let spec = &gen.spec;
    let h = spec.hamiltonian(t);
    let c = spec.jump_op();
    let unitary = h.commutator(rho).scale(C64::new(0.0, -1.0));
    let dissipator = *c * *rho * c.adjoint() - spec.jump_number().anticommutator(rho).scale_real(0.5);
    unitary + dissipator.scale_real(spec.decay_rate(t))
}

fn rk4_step(rho: &Operator, t: f64, dt: f64, gen: &LindbladGenerator) -> Operator {
    let k1 = lindblad_rhs(rho, t, gen);
    let k2 = lindblad_rhs(&(*rho + k1.scale_real(0.5 * dt)), t + 0.5 * dt, gen);
    let k3 = lindblad_rhs(&(*rho + k2.scale_real(0.5 * dt)), t + 0.5 * dt, gen);
    let k4 = lindblad_rhs(&(*rho + k3.scale_real(dt)), t + dt, gen);
    *rho + (k1 + k2.scale_real(2.0) + k3.scale_real(2.0) + k4).scale_real(dt / 6.0)
}

/// Integrates from `rho0` and returns `ρ(t_w)` for every grid index `w`.
pub fn rk4_run(gen: &LindbladGenerator, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    out.push(rho0.clone());
    integrate(gen, rho0, grid, Some(POSITIVITY_GUARD), |_, rho| {
        out.push(rho.clone());
    })?;
    Ok(out)
}

/// Like [`rk4_run`] but never aborts; returns the smallest eigenvalue seen.
///
/// The time-local equation itself need not preserve positivity once the
/// rate turns negative, so comparisons against it sometimes have to run
/// through a breach.
pub fn rk4_run_monitored(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<(Vec<DensityMatrix>, f64)> {
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    out.push(rho0.clone());
    let min_eig = integrate(gen, rho0, grid, None, |_, rho| {
        out.push(rho.clone());
    })?;
    Ok((out, min_eig))
}

fn integrate(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    guard: Option<f64>,
    mut sink: impl FnMut(usize, &DensityMatrix),
) -> Result<f64> {
    let mut lowest = rho0.min_eigenvalue()?;
    let mut rho = *rho0.op();
    for s in 0..grid.n_steps {
        let t = grid.time(s);
        let next = rk4_step(&rho, t, grid.dt, gen).hermitian_part();
        let tr = next.trace().re;
        rho = next.scale_real(1.0 / tr);
        let dm = DensityMatrix::new_unchecked(rho);
        let min_eig = dm.min_eigenvalue()?;
        lowest = lowest.min(min_eig);
        if guard.is_some_and(|g| min_eig < g) {
            return Err(Error::PositivityBreach { t: grid.time(s + 1), min_eig });
        }
        sink(s + 1, &dm);
    }
    Ok(lowest)
}

/// Runs the reference integrator over `[0, t_end]`.
pub fn run_exact(config: &SimConfig) -> Result<RunOutput> {
    run_exact_with(config, Some(POSITIVITY_GUARD))
}

/// [`run_exact`] without the positivity guard; the lowest eigenvalue seen is
/// reported in the summary.
pub fn run_exact_monitored(config: &SimConfig) -> Result<RunOutput> {
    run_exact_with(config, None)
}

fn run_exact_with(config: &SimConfig, guard: Option<f64>) -> Result<RunOutput> {
    let spec = config.model_spec();
    let gen = LindbladGenerator::new(spec);
    let psi0 = initial_state(&spec, &config.initial)?;
    let rho0 = DensityMatrix::from_pure(&psi0);
    let grid = config.grid();
    let stride = config.output_stride;

    let snap = |w: usize, rho: &DensityMatrix| {
        let t = grid.time(w);
        Snapshot { step: w, t, delta: spec.decay_rate(t), rho: rho.clone(), k_sums: Vec::new(), nodes: 0 }
    };
    let mut snapshots = vec![snap(0, &rho0)];
    let clock = Instant::now();
    let min_eig = integrate(&gen, &rho0, &grid, guard, |w, rho| {
        if records_at(w, stride, grid.n_steps) {
            snapshots.push(snap(w, rho));
        }
    })?;
    let summary = RunSummary {
        wall_time_s: clock.elapsed().as_secs_f64(),
        min_eigenvalue: Some(min_eig),
        ..RunSummary::default()
    };
    Ok(RunOutput {
        engine: EngineKind::Exact,
        model: spec.label(),
        dim: spec.dim(),
        truncation: config.truncation,
        snapshots,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model_i, build_model_ii};
    use crate::qcore::{sigma_z, StateVector};
    use crate::reservoir::{CouplingProfile, LorentzianParams, RateProfile};

    fn pure(amps: &[f64]) -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::from_real(amps).unwrap().normalize().unwrap())
    }

    #[test]
    fn dark_state_is_stationary() {
        let gen = LindbladGenerator::new(build_model_i(0.0, LorentzianParams::default()));
        let rhs = lindblad_rhs(pure(&[0.0, 1.0]).op(), 0.4, &gen);
        assert_eq!(rhs.norm(), 0.0);
    }

    #[test]
    fn excited_population_decays_at_unit_rate() {
        let gen = LindbladGenerator::new(build_model_i(0.0, RateProfile::Constant(1.0)));
        let rhs = lindblad_rhs(pure(&[1.0, 0.0]).op(), 0.0, &gen);
        assert!((rhs.get(0, 0).re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let gen = LindbladGenerator::new(build_model_ii(
            CouplingProfile::sigmoid_switchoff(0.5, 100.0, 0.6),
            LorentzianParams::default(),
        ));
        let rho = pure(&[0.3, 0.5, -0.7, 0.2]);
        for t in [0.0, 0.3, 0.6, 0.8] {
            let r = lindblad_rhs(rho.op(), t, &gen);
            assert!(r.trace().norm() < 1e-12);
            assert!(r.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn exponential_decay() {
        let gen = LindbladGenerator::new(build_model_i(0.0, RateProfile::Constant(1.0)));
        let grid = TimeGrid::new(1e-3, 1000);
        let out = rk4_run(&gen, &pure(&[1.0, 1.0]), &grid).unwrap();
        for (w, rho) in out.iter().enumerate() {
            let t = grid.time(w);
            assert!((rho.get(0, 0).re - 0.5 * (-t).exp()).abs() < 1e-8);
            assert!((rho.get(0, 1).re - 0.5 * (-0.5 * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rabi_oscillation() {
        let gen = LindbladGenerator::new(build_model_i(0.5, RateProfile::Constant(0.0)));
        let grid = TimeGrid::new(1e-3, 3000);
        let out = rk4_run(&gen, &pure(&[1.0, 0.0]), &grid).unwrap();
        for (w, rho) in out.iter().enumerate() {
            let sz = (*rho.op() * sigma_z()).trace().re;
            assert!((sz - grid.time(w).cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let gen = LindbladGenerator::new(build_model_i(0.0, RateProfile::Constant(1.0)));
        let err = |dt: f64| {
            let grid = TimeGrid::covering(dt, 2.0);
            let out = rk4_run(&gen, &pure(&[1.0, 1.0]), &grid).unwrap();
            (out.last().unwrap().get(0, 1).re - 0.5 * (-1.0f64).exp()).abs()
        };
        let (coarse, fine) = (err(0.2), err(0.1));
        assert!(coarse / fine >= 8.0, "{coarse} {fine}");
    }
}
