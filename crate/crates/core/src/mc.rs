//! Standard non-Markovian quantum jump Monte Carlo.
//!
//! Every realization carries its own pure state and random stream. While
//! `Δ ≥ 0` a realization jumps with probability `p = Δ δt ⟨Ĉ†Ĉ⟩`. While
//! `Δ < 0` a realization on trajectory `Hₙ^α` returns to its mother
//! `H_{n−1}^{α′}` with probability
//! `q = (N_mother / Σ_class N) |Δ| δt ⟨Ĉ†Ĉ⟩_mother`, taking over the mother's
//! current state. Mother states are kept in a registry of trajectory drift
//! states, one per occupied trajectory and its ancestors.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{EngineKind, SimConfig};
use crate::error::Result;
use crate::ledger::{checked_probability, collapse, ClassSum, StepSettings};
use crate::models::{initial_state, ModelSpec};
use crate::qcore::{DensityMatrix, Operator, StateVector};
use crate::series::{records_at, RunOutput, RunSummary, Snapshot};

const NO_PARENT: u32 = u32::MAX;

/// One trajectory `Hₙ^α` of the registry.
#[derive(Clone, Debug)]
pub struct TrajectoryEntry {
    pub parent: u32,
    pub level: u32,
    /// Grid index of the last jump.
    pub jump_step: u32,
    pub state: StateVector,
    /// `Nₙ^α`
    pub count: u64,
    born: u32,
}

#[derive(Clone, Debug)]
pub struct Realization {
    /// Registry index of the trajectory this realization occupies.
    pub trajectory: u32,
    pub state: StateVector,
    rng: ChaCha8Rng,
}

impl Realization {
    fn draw(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

/// Random stream of realization `index`: the seed selects the key, the
/// index selects the stream, so draws do not depend on execution order.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
pub struct EnsembleState {
    realizations: Vec<Realization>,
    registry: Vec<TrajectoryEntry>,
    current_step: u32,
}

/// Events of one Monte Carlo step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct McStepReport {
    pub positive: bool,
    pub jumps: usize,
    pub reversals: usize,
}

impl EnsembleState {
    pub fn new(psi0: &StateVector, n_r: usize, seed: u64) -> Result<Self> {
        assert!(n_r >= 1, "at least one realization is required");
        let state = psi0.normalize()?;
        let realizations = (0..n_r)
            .map(|i| Realization { trajectory: 0, state, rng: realization_rng(seed, i as u64) })
            .collect();
        let root = TrajectoryEntry { parent: NO_PARENT, level: 0, jump_step: 0, state, count: n_r as u64, born: 0 };
        Ok(EnsembleState { realizations, registry: vec![root], current_step: 0 })
    }

    pub fn n_r(&self) -> usize {
        self.realizations.len()
    }

    pub fn current_step(&self) -> u32 {
        self.current_step
    }

    pub fn realizations(&self) -> &[Realization] {
        &self.realizations
    }

    pub fn registry(&self) -> &[TrajectoryEntry] {
        &self.registry
    }

    /// Jump-time sequence of registry entry `idx`.
    pub fn alpha(&self, idx: usize) -> Vec<u32> {
        let mut alpha = Vec::new();
        let mut i = idx;
        while self.registry[i].parent != NO_PARENT {
            alpha.push(self.registry[i].jump_step);
            i = self.registry[i].parent as usize;
        }
        alpha.reverse();
        alpha
    }

    /// `Σ_α Nₙ^α` for `n = 0..levels`.
    pub fn level_counts(&self, levels: usize) -> Vec<u64> {
        let mut out = vec![0; levels];
        for e in &self.registry {
            if let Some(c) = out.get_mut(e.level as usize) {
                *c += e.count;
            }
        }
        out
    }

    pub fn occupied_trajectories(&self) -> usize {
        self.registry.iter().filter(|e| e.count > 0).count()
    }

    /// `ρ = (1/N_r) Σ_r |ψ_r⟩⟨ψ_r|`
    pub fn density(&self) -> DensityMatrix {
        let dim = self.realizations[0].state.dim();
        let mut rho = Operator::zeros(dim).expect("valid dim");
        for r in &self.realizations {
            let a = r.state.amps();
            for i in 0..dim {
                for j in 0..dim {
                    let v = rho.get(i, j) + a[i] * a[j].conj();
                    rho.set(i, j, v);
                }
            }
        }
        DensityMatrix::new_unchecked(rho.scale_real(1.0 / self.n_r() as f64))
    }

    /// Advances one step, dispatching on the sign of `Δ` at the left endpoint.
    pub fn step(&mut self, spec: &ModelSpec, settings: &StepSettings) -> Result<McStepReport> {
        let t = f64::from(self.current_step) * settings.dt;
        if spec.decay_rate(t) >= 0.0 {
            mc_positive_step(self, spec, settings)
        } else {
            mc_negative_step(self, spec, settings)
        }
    }

    fn evolve(&mut self, spec: &ModelSpec, settings: &StepSettings) -> Result<()> {
        let prop = settings.propagator(spec, self.current_step);
        let next = self.current_step + 1;
        for e in &mut self.registry {
            if e.born != next {
                e.state = prop.apply(&e.state)?;
                e.born = next;
            }
        }
        let born: Vec<bool> = self.registry.iter().map(|e| e.jump_step == next && e.level > 0).collect();
        self.realizations.par_iter_mut().try_for_each(|r| -> Result<()> {
            if !born[r.trajectory as usize] {
                r.state = prop.apply(&r.state)?;
            }
            Ok(())
        })?;
        self.current_step = next;
        Ok(())
    }

    /// Drops trajectories that are empty and have no occupied descendants.
    fn prune(&mut self) {
        let mut needed: Vec<bool> = self.registry.iter().map(|e| e.count > 0).collect();
        needed[0] = true;
        for i in (1..self.registry.len()).rev() {
            if needed[i] {
                needed[self.registry[i].parent as usize] = true;
            }
        }
        if needed.iter().all(|&n| n) {
            return;
        }
        let mut remap = vec![NO_PARENT; self.registry.len()];
        let old = std::mem::take(&mut self.registry);
        for (i, mut e) in old.into_iter().enumerate() {
            if needed[i] {
                if e.parent != NO_PARENT {
                    e.parent = remap[e.parent as usize];
                }
                remap[i] = self.registry.len() as u32;
                self.registry.push(e);
            }
        }
        for r in &mut self.realizations {
            r.trajectory = remap[r.trajectory as usize];
        }
    }
}

/// Normal-jump step: each realization jumps with probability `p`.
pub fn mc_positive_step(ens: &mut EnsembleState, spec: &ModelSpec, settings: &StepSettings) -> Result<McStepReport> {
    let step = ens.current_step;
    let ts = settings.sample_time(step);
    let delta = spec.decay_rate(ts);
    let jn = spec.jump_number();
    let dt = settings.dt;
    let jumped: Vec<bool> = ens
        .realizations
        .par_iter_mut()
        .map(|r| -> Result<bool> {
            let u = r.draw();
            let p = checked_probability(&r.state, delta, jn, dt, ts)?;
            Ok(u < p)
        })
        .collect::<Result<_>>()?;

    let birth = step + 1;
    let mut child_of: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    let mut jumps = 0;
    for (r, _) in ens.realizations.iter_mut().zip(&jumped).filter(|(_, &j)| j) {
        let parent = r.trajectory;
        let child = match child_of.get(&parent) {
            Some(&c) => c,
            None => {
                let p = &ens.registry[parent as usize];
                let entry = TrajectoryEntry {
                    parent,
                    level: p.level + 1,
                    jump_step: birth,
                    state: collapse(spec.jump_op(), &p.state)?,
                    count: 0,
                    born: birth,
                };
                ens.registry.push(entry);
                let c = (ens.registry.len() - 1) as u32;
                child_of.insert(parent, c);
                c
            }
        };
        ens.registry[parent as usize].count -= 1;
        ens.registry[child as usize].count += 1;
        r.trajectory = child;
        r.state = collapse(spec.jump_op(), &r.state)?;
        jumps += 1;
    }
    ens.evolve(spec, settings)?;
    Ok(McStepReport { positive: true, jumps, reversals: 0 })
}

/// Reversed-jump step. Decisions use the counts at the start of the step and
/// are applied together afterwards.
pub fn mc_negative_step(ens: &mut EnsembleState, spec: &ModelSpec, settings: &StepSettings) -> Result<McStepReport> {
    let step = ens.current_step;
    let ts = settings.sample_time(step);
    let delta = spec.decay_rate(ts);
    let dt = settings.dt;
    let n_reg = ens.registry.len();

    let in_window: Vec<bool> = ens
        .registry
        .iter()
        .map(|e| e.level > 0 && settings.memory.contains(e.jump_step, step, dt))
        .collect();
    // Denominators: in-window members per mother, or per level.
    let mut class_sum = vec![0u64; n_reg];
    let mut level_sum: Vec<u64> = Vec::new();
    for (e, _) in ens.registry.iter().zip(&in_window).filter(|(_, &w)| w) {
        class_sum[e.parent as usize] += e.count;
        let l = e.level as usize;
        if level_sum.len() <= l {
            level_sum.resize(l + 1, 0);
        }
        level_sum[l] += e.count;
    }
    // Reversal probability for a member of each trajectory.
    let mut q = vec![0.0; n_reg];
    for (i, e) in ens.registry.iter().enumerate() {
        if !in_window[i] {
            continue;
        }
        let mother = &ens.registry[e.parent as usize];
        let denom = match settings.class_sum {
            ClassSum::Class => class_sum[e.parent as usize],
            ClassSum::Global => level_sum[e.level as usize],
        };
        if mother.count == 0 || denom == 0 {
            continue;
        }
        let p = checked_probability(&mother.state, delta, spec.jump_number(), dt, ts)?;
        q[i] = (mother.count as f64 / denom as f64 * p.abs()).min(1.0);
    }

    let reversed: Vec<bool> = ens
        .realizations
        .par_iter_mut()
        .map(|r| {
            let u = r.draw();
            u < q[r.trajectory as usize]
        })
        .collect();
    let mut reversals = 0;
    for (r, _) in ens.realizations.iter_mut().zip(&reversed).filter(|(_, &b)| b) {
        let from = r.trajectory as usize;
        let to = ens.registry[from].parent;
        ens.registry[from].count -= 1;
        ens.registry[to as usize].count += 1;
        r.trajectory = to;
        r.state = ens.registry[to as usize].state;
        reversals += 1;
    }
    if reversals > 0 {
        ens.prune();
    }
    ens.evolve(spec, settings)?;
    Ok(McStepReport { positive: false, jumps: 0, reversals })
}

fn mc_snapshot(ens: &EnsembleState, spec: &ModelSpec, dt: f64, levels: usize) -> Snapshot {
    let w = ens.current_step() as usize;
    let t = w as f64 * dt;
    let n_r = ens.n_r() as f64;
    Snapshot {
        step: w,
        t,
        delta: spec.decay_rate(t),
        rho: ens.density(),
        k_sums: ens.level_counts(levels).into_iter().map(|c| c as f64 / n_r).collect(),
        nodes: ens.occupied_trajectories(),
    }
}

/// Runs `n_r` realizations over `[0, t_end]`. The output is a pure function
/// of `(config, n_r, seed)`.
pub fn run_ensemble(config: &SimConfig, n_r: usize, seed: u64) -> Result<RunOutput> {
    let spec = config.model_spec();
    let psi0 = initial_state(&spec, &config.initial)?;
    let grid = config.grid();
    let settings = config.step_settings();
    let levels = config.truncation + 1;

    let mut summary = RunSummary { n_r: Some(n_r), seed: Some(seed), ..RunSummary::default() };
    let clock = Instant::now();
    let mut ens = EnsembleState::new(&psi0, n_r, seed)?;
    let mut snapshots = vec![mc_snapshot(&ens, &spec, grid.dt, levels)];
    let mut recording = clock.elapsed().as_secs_f64();
    let mut seen_negative = false;
    let mut peak = 1;

    for s in 0..grid.n_steps {
        let report = ens.step(&spec, &settings)?;
        if report.positive && !seen_negative {
            summary.positive_grid_points += 1;
        } else if !report.positive && !seen_negative {
            seen_negative = true;
            summary.last_positive_step = s.checked_sub(1);
        }
        if records_at(s + 1, config.output_stride, grid.n_steps) {
            let mark = Instant::now();
            snapshots.push(mc_snapshot(&ens, &spec, grid.dt, levels));
            recording += mark.elapsed().as_secs_f64();
        }
        peak = peak.max(ens.registry().len());
    }

    summary.wall_time_s = (clock.elapsed().as_secs_f64() - recording).max(0.0);
    summary.peak_nodes = peak;
    summary.storage_estimate = spec.dim() * n_r;
    Ok(RunOutput {
        engine: EngineKind::Mc,
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
    use crate::models::build_model_i;
    use crate::reservoir::{LorentzianParams, RateProfile};

    fn up() -> StateVector {
        StateVector::basis(2, 0).unwrap()
    }

    fn down() -> StateVector {
        StateVector::basis(2, 1).unwrap()
    }

    #[test]
    fn ground_state_never_jumps() {
        let spec = build_model_i(0.0, RateProfile::Constant(50.0));
        let settings = StepSettings::new(1e-3);
        let mut ens = EnsembleState::new(&down(), 1000, 3).unwrap();
        for _ in 0..100 {
            assert_eq!(mc_positive_step(&mut ens, &spec, &settings).unwrap().jumps, 0);
        }
        assert_eq!(ens.level_counts(2), vec![1000, 0]);
    }

    #[test]
    fn jump_fraction_is_binomial() {
        // Δδt = 0.5 on the excited state.
        let spec = build_model_i(0.0, RateProfile::Constant(500.0));
        let settings = StepSettings::new(1e-3);
        let n = 1_000_000;
        let mut ens = EnsembleState::new(&up(), n, 11).unwrap();
        let jumps = mc_positive_step(&mut ens, &spec, &settings).unwrap().jumps as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((jumps - 0.5 * n as f64).abs() < 3.0 * sigma, "{jumps}");
        assert_eq!(ens.level_counts(2).iter().sum::<u64>(), n as u64);
    }

    #[test]
    fn first_step_jump_fraction() {
        let res = LorentzianParams::default();
        let spec = build_model_i(0.5, res);
        let settings = StepSettings::new(1e-3);
        // Δ(0) = 0: advance to t = 0.1 before sampling one step.
        let mut ens = EnsembleState::new(&up(), 200_000, 5).unwrap();
        for _ in 0..100 {
            ens.step(&spec, &settings).unwrap();
        }
        let before = ens.level_counts(1)[0] as f64;
        let expected: f64 = ens
            .realizations()
            .iter()
            .filter(|r| r.trajectory == 0)
            .map(|r| checked_probability(&r.state, spec.decay_rate(0.1), spec.jump_number(), 1e-3, 0.1).unwrap())
            .sum();
        let report = mc_positive_step(&mut ens, &spec, &settings).unwrap();
        let from_root = before - ens.level_counts(1)[0] as f64;
        assert!(report.jumps as f64 >= from_root);
        assert!((from_root - expected).abs() < 4.0 * expected.sqrt() + 1.0, "{from_root} vs {expected}");
    }

    #[test]
    fn no_jumps_means_pure_drift_in_negative_region() {
        let spec = build_model_i(0.5, RateProfile::Constant(-1.0));
        let settings = StepSettings::new(1e-3);
        let mut ens = EnsembleState::new(&up(), 50, 1).unwrap();
        for _ in 0..20 {
            let r = mc_negative_step(&mut ens, &spec, &settings).unwrap();
            assert_eq!(r.reversals, 0);
        }
        let prop = settings.propagator(&spec, 0);
        let mut psi = up();
        for _ in 0..20 {
            psi = prop.apply(&psi).unwrap();
        }
        for r in ens.realizations() {
            assert_eq!(r.state, psi);
        }
    }

    #[test]
    fn dark_mother_blocks_reversals() {
        // Ω = 0: the mother of a jumped realization is still |↑⟩, the
        // jumped state |↓⟩; a mother stuck in |↓⟩ gives q = 0.
        let spec = build_model_i(0.0, RateProfile::Constant(-5.0));
        let settings = StepSettings::new(1e-3);
        let mut ens = EnsembleState::new(&down(), 100, 1).unwrap();
        // move everyone to a child trajectory by hand
        ens.registry.push(TrajectoryEntry { parent: 0, level: 1, jump_step: 0, state: down(), count: 100, born: 0 });
        ens.registry[0].count = 0;
        for r in &mut ens.realizations {
            r.trajectory = 1;
        }
        for _ in 0..50 {
            assert_eq!(mc_negative_step(&mut ens, &spec, &settings).unwrap().reversals, 0);
        }
    }

    #[test]
    fn reruns_are_identical() {
        let mut cfg = crate::config::parse_config("model = \"model_i\"\nengine = \"mc\"\nmc.n_r = 300").unwrap();
        cfg.output_stride = 50;
        let a = run_ensemble(&cfg, 300, 9).unwrap();
        let b = run_ensemble(&cfg, 300, 9).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(x.rho, y.rho);
            assert_eq!(x.k_sums, y.k_sums);
        }
        let c = run_ensemble(&cfg, 300, 10).unwrap();
        assert_ne!(a.final_state(), c.final_state());
    }

    #[test]
    fn counts_are_conserved() {
        let cfg = crate::config::parse_config("model = \"model_i\"\nmc.n_r = 500").unwrap();
        let spec = cfg.model_spec();
        let settings = cfg.step_settings();
        let mut ens = EnsembleState::new(&up(), 500, 2).unwrap();
        for _ in 0..cfg.grid().n_steps {
            let before: Vec<u32> = ens.realizations().iter().map(|r| ens.registry()[r.trajectory as usize].level).collect();
            let report = ens.step(&spec, &settings).unwrap();
            let total: u64 = ens.registry().iter().map(|e| e.count).sum();
            assert_eq!(total, 500);
            for (r, &b) in ens.realizations().iter().zip(&before) {
                let now = ens.registry()[r.trajectory as usize].level;
                if report.positive {
                    assert!(now >= b);
                } else {
                    assert!(now <= b);
                }
            }
        }
    }
}
