//! Deterministic non-Markovian quantum jump engine.
//!
//! Instead of sampling realizations, the ledger tracks every quantum
//! trajectory `Hₙ^α` (the pure state reached after jumps at the grid indices
//! in `α`) together with its existence probability `Kₙ^α`, the fraction of an
//! infinite ensemble occupying it. Per time step:
//!
//! * `Δ ≥ 0`: every trajectory below the truncation level spawns a child at
//!   the current grid index carrying `K·p`, and keeps `K·(1 − p)`, where
//!   `p = Δ δt ⟨Ĉ†Ĉ⟩`. Trajectories at the truncation level only lose `K·p`,
//!   which is booked as truncation leak.
//! * `Δ < 0`: no trajectories are created. Each trajectory class (the
//!   children of one mother) returns `K_mother·|p_mother|` to its mother,
//!   shared among the members in proportion to their `K`. When the
//!   one-jump class is emptied, the whole ensemble is back on the no-jump
//!   trajectory and the ledger is frozen there until `Δ` turns positive.
//!
//! All states then advance one step under `Ĥ_eff(t)`. Because every
//! trajectory uses the same step map, trajectories born in the same step from
//! the same collapsed state share a single state slot.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{EngineKind, SimConfig};
use crate::error::{Error, Result};
use crate::models::{initial_state, ModelSpec};
use crate::qcore::{expectation, DensityMatrix, Operator, Propagator, Scheme, StateVector};
use crate::series::{records_at, RunOutput, RunSummary, Snapshot};

/// Existence probabilities below this value are pruned.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Uniform time discretization `t_w = w·δt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        assert!(dt > 0.0, "dt must be positive");
        TimeGrid { dt, n_steps }
    }

    /// Grid covering `[0, t_end]`; the last point does not exceed `t_end`.
    pub fn covering(dt: f64, t_end: f64) -> Self {
        let n = (t_end / dt + 1e-9).floor().max(0.0) as usize;
        Self::new(dt, n)
    }

    #[inline]
    pub fn time(&self, w: usize) -> f64 {
        w as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|w| self.time(w))
    }
}

/// Where inside a step the decay rate is sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSampling {
    #[default]
    Left,
    Midpoint,
}

/// Scope of the denominator in the reversed-jump share.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSum {
    /// Siblings sharing one mother.
    #[default]
    Class,
    /// Every trajectory at the same level.
    Global,
}

/// Memory time of the reversed jumps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum MemoryWindow {
    #[default]
    Infinite,
    Finite(f64),
}

impl MemoryWindow {
    /// Whether a jump booked at grid index `jump_step` can still be reversed
    /// during step `step` (which ends at grid index `step + 1`).
    #[inline]
    pub fn contains(&self, jump_step: u32, step: u32, dt: f64) -> bool {
        match *self {
            MemoryWindow::Infinite => true,
            MemoryWindow::Finite(tau) => f64::from(step + 1 - jump_step) * dt <= tau,
        }
    }
}

/// Finite memory time `τ` for reversed jumps.
pub fn finite_memory_mode(tau: f64) -> MemoryWindow {
    assert!(tau > 0.0, "memory time must be positive");
    MemoryWindow::Finite(tau)
}

/// Numerical settings shared by the trajectory engines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSettings {
    pub dt: f64,
    pub scheme: Scheme,
    pub sampling: DeltaSampling,
    pub memory: MemoryWindow,
    pub class_sum: ClassSum,
}

impl StepSettings {
    pub fn new(dt: f64) -> Self {
        StepSettings {
            dt,
            scheme: Scheme::Euler1,
            sampling: DeltaSampling::Left,
            memory: MemoryWindow::Infinite,
            class_sum: ClassSum::Class,
        }
    }

    /// Time at which `Δ(t)` and `Ĥ_s(t)` are evaluated for step `step`.
    #[inline]
    pub fn sample_time(&self, step: u32) -> f64 {
        let t = f64::from(step) * self.dt;
        match self.sampling {
            DeltaSampling::Left => t,
            DeltaSampling::Midpoint => t + 0.5 * self.dt,
        }
    }

    /// One-step map under `Ĥ_eff` at the sample time of `step`.
    pub fn propagator(&self, spec: &ModelSpec, step: u32) -> Propagator {
        let ts = self.sample_time(step);
        let h = spec.effective_hamiltonian(ts, spec.decay_rate(ts));
        Propagator::new(&h, self.dt, self.scheme)
    }
}

/// `p = Δ(t) δt ⟨ψ|Ĉ†Ĉ|ψ⟩`, signed.
pub fn jump_probability(state: &StateVector, t: f64, spec: &ModelSpec, dt: f64) -> Result<f64> {
    checked_probability(state, spec.decay_rate(t), spec.jump_number(), dt, t)
}

pub(crate) fn checked_probability(
    state: &StateVector,
    delta: f64,
    jump_number: &Operator,
    dt: f64,
    t: f64,
) -> Result<f64> {
    let p = delta * dt * expectation(jump_number, state)?.re;
    if p.abs() >= 1.0 {
        return Err(Error::StepTooLarge { t, p });
    }
    Ok(p)
}

/// Normalized collapsed state `Ĉ|ψ⟩/‖Ĉ|ψ⟩‖` with the global phase removed.
pub(crate) fn collapse(jump_op: &Operator, psi: &StateVector) -> Result<StateVector> {
    Ok(jump_op.apply(psi)?.normalize()?.canonical_phase())
}

/// One trajectory `Hₙ^α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryNode {
    /// Index of the mother in the previous level (`u32::MAX` for the root).
    pub parent: u32,
    /// Grid index of the last jump (0 for the root).
    pub jump_step: u32,
    /// State slot shared with trajectories that have the same state.
    pub slot: u32,
    /// Existence probability `Kₙ^α`.
    pub k: f64,
}

const ROOT_PARENT: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Slot {
    state: StateVector,
    /// Grid index at which `state` is current without evolution.
    born: u32,
}

/// Read-only view of a trajectory for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeView {
    pub alpha: Vec<u32>,
    pub n: usize,
    pub state: StateVector,
    pub k: f64,
}

/// The trajectory ledger truncated at `n*` jumps.
#[derive(Clone, Debug)]
pub struct Ledger {
    levels: Vec<Vec<TrajectoryNode>>,
    slots: Vec<Slot>,
    current_step: u32,
    leak: f64,
    forfeited: f64,
    frozen: bool,
}

/// What happened during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub delta: f64,
    pub positive: bool,
    pub spawned: usize,
    pub clamped: bool,
}

impl Ledger {
    /// Fresh ledger holding only the no-jump trajectory with `K = 1`.
    pub fn new(psi0: &StateVector, truncation: usize) -> Result<Self> {
        assert!(truncation >= 1, "truncation level must be at least 1");
        let state = psi0.normalize()?;
        let mut levels = vec![Vec::new(); truncation + 1];
        levels[0].push(TrajectoryNode { parent: ROOT_PARENT, jump_step: 0, slot: 0, k: 1.0 });
        Ok(Ledger {
            levels,
            slots: vec![Slot { state, born: 0 }],
            current_step: 0,
            leak: 0.0,
            forfeited: 0.0,
            frozen: false,
        })
    }

    pub fn truncation(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn current_step(&self) -> u32 {
        self.current_step
    }

    pub fn dim(&self) -> usize {
        self.slots[0].state.dim()
    }

    pub fn level(&self, n: usize) -> &[TrajectoryNode] {
        &self.levels[n]
    }

    /// `Σ_α Kₙ^α` for every level `n = 0..=n*`.
    pub fn level_sums(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.iter().fold(0.0, |acc, n| acc + n.k)).collect()
    }

    pub fn k0(&self) -> f64 {
        self.levels[0][0].k
    }

    /// Probability currently held outside the ledger because of truncation.
    pub fn truncation_leak(&self) -> f64 {
        self.leak
    }

    /// Total probability ever forfeited to truncation.
    pub fn forfeited(&self) -> f64 {
        self.forfeited
    }

    /// `Σ K + truncation leak`; equals one up to rounding.
    pub fn total_probability(&self) -> f64 {
        self.level_sums().iter().sum::<f64>() + self.leak
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn state(&self, node: &TrajectoryNode) -> &StateVector {
        &self.slots[node.slot as usize].state
    }

    /// Jump-time sequence `α` of node `idx` at level `n`.
    pub fn alpha(&self, n: usize, idx: usize) -> Vec<u32> {
        let mut alpha = Vec::with_capacity(n);
        let (mut level, mut i) = (n, idx);
        while level > 0 {
            let node = &self.levels[level][i];
            alpha.push(node.jump_step);
            i = node.parent as usize;
            level -= 1;
        }
        alpha.reverse();
        alpha
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeView> + '_ {
        self.levels.iter().enumerate().flat_map(move |(n, level)| {
            level.iter().enumerate().map(move |(i, node)| NodeView {
                alpha: self.alpha(n, i),
                n,
                state: *self.state(node),
                k: node.k,
            })
        })
    }

    /// `ρ = Σ K |ψ⟩⟨ψ|`, divided by `Σ K` when truncation removed probability.
    pub fn reconstruct_density(&self) -> DensityMatrix {
        let mut weights = vec![0.0; self.slots.len()];
        for level in &self.levels {
            for node in level {
                weights[node.slot as usize] += node.k;
            }
        }
        let dim = self.dim();
        let mut rho = Operator::zeros(dim).expect("valid dim");
        let mut total = 0.0;
        for (slot, &w) in self.slots.iter().zip(&weights) {
            if w != 0.0 {
                rho = rho + slot.state.projector().scale_real(w);
                total += w;
            }
        }
        DensityMatrix::new_unchecked(rho.scale_real(1.0 / total))
    }

    /// Advances one step, dispatching on the sign of `Δ` at the left endpoint.
    pub fn step(&mut self, spec: &ModelSpec, settings: &StepSettings) -> Result<StepReport> {
        let t = f64::from(self.current_step) * settings.dt;
        if spec.decay_rate(t) >= 0.0 {
            self.positive_step(spec, settings)
        } else {
            self.negative_step(spec, settings)
        }
    }

    fn slot_probabilities(&self, spec: &ModelSpec, settings: &StepSettings) -> Result<(f64, Vec<f64>)> {
        let ts = settings.sample_time(self.current_step);
        let delta = spec.decay_rate(ts);
        let probs = self
            .slots
            .iter()
            .map(|s| checked_probability(&s.state, delta, spec.jump_number(), settings.dt, ts))
            .collect::<Result<Vec<_>>>()?;
        Ok((delta, probs))
    }

    /// Update for a step with `Δ ≥ 0`: normal jumps spawn children.
    pub fn positive_step(&mut self, spec: &ModelSpec, settings: &StepSettings) -> Result<StepReport> {
        let (delta, probs) = self.slot_probabilities(spec, settings)?;
        self.frozen = false;
        let birth = self.current_step + 1;
        let top = self.truncation();

        // Children born this step, keyed by mother slot and by exact state.
        let mut child_slot_of: HashMap<u32, u32> = HashMap::new();
        let mut slot_by_state: HashMap<[u64; 8], u32> = HashMap::new();
        let mut newborn: Vec<Vec<TrajectoryNode>> = vec![Vec::new(); top + 1];
        let mut leak = 0.0;

        for n in 0..=top {
            for (idx, node) in self.levels[n].iter_mut().enumerate() {
                let p = probs[node.slot as usize];
                if p == 0.0 || node.k == 0.0 {
                    continue;
                }
                let gained = node.k * p;
                if n == top {
                    node.k -= gained;
                    leak += gained;
                    continue;
                }
                if gained < PRUNE_THRESHOLD {
                    continue;
                }
                let slot = match child_slot_of.get(&node.slot) {
                    Some(&s) => s,
                    None => {
                        let state = collapse(spec.jump_op(), &self.slots[node.slot as usize].state)?;
                        let s = *slot_by_state.entry(state.bit_key()).or_insert_with(|| {
                            self.slots.push(Slot { state, born: birth });
                            (self.slots.len() - 1) as u32
                        });
                        child_slot_of.insert(node.slot, s);
                        s
                    }
                };
                node.k -= gained;
                newborn[n + 1].push(TrajectoryNode {
                    parent: idx as u32,
                    jump_step: birth,
                    slot,
                    k: gained,
                });
            }
        }
        let spawned = newborn.iter().map(Vec::len).sum();
        for (level, kids) in self.levels.iter_mut().zip(newborn) {
            level.extend(kids);
        }
        self.leak += leak;
        self.forfeited += leak;
        self.finish_step(spec, settings)?;
        Ok(StepReport { delta, positive: true, spawned, clamped: false })
    }

    /// Update for a step with `Δ < 0`: reversed jumps return probability to
    /// the mother trajectories.
    pub fn negative_step(&mut self, spec: &ModelSpec, settings: &StepSettings) -> Result<StepReport> {
        let (delta, probs) = self.slot_probabilities(spec, settings)?;
        let step = self.current_step;
        let top = self.truncation();
        let mut clamped = false;

        if !self.frozen {
            let mut gains: Vec<Vec<f64>> = self.levels.iter().map(|l| vec![0.0; l.len()]).collect();
            let mut first_class_before = 0.0;
            for n in (1..=top).rev() {
                let (lower, upper) = self.levels.split_at_mut(n);
                let mothers = &lower[n - 1];
                let members = &mut upper[0];

                let mut window_sum = vec![0.0; mothers.len()];
                let mut level_window_sum = 0.0;
                for m in members.iter() {
                    if settings.memory.contains(m.jump_step, step, settings.dt) {
                        window_sum[m.parent as usize] += m.k;
                        level_window_sum += m.k;
                    }
                }
                if n == 1 {
                    first_class_before = members.iter().map(|m| m.k).sum();
                }
                // Fraction of each in-window member that moves back to its mother.
                let share: Vec<f64> = mothers
                    .iter()
                    .zip(&window_sum)
                    .map(|(mother, &s)| {
                        let denom = match settings.class_sum {
                            ClassSum::Class => s,
                            ClassSum::Global => level_window_sum,
                        };
                        let flow = mother.k * probs[mother.slot as usize].abs();
                        if denom > 0.0 {
                            (flow / denom).min(1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for m in members.iter_mut() {
                    if !settings.memory.contains(m.jump_step, step, settings.dt) {
                        continue;
                    }
                    let f = share[m.parent as usize];
                    if f == 0.0 {
                        continue;
                    }
                    let moved = if f == 1.0 { m.k } else { m.k * f };
                    m.k -= moved;
                    gains[n - 1][m.parent as usize] += moved;
                }
            }
            for (level, g) in self.levels.iter_mut().zip(&gains) {
                for (node, &dk) in level.iter_mut().zip(g) {
                    node.k += dk;
                }
            }
            let first_class_after: f64 = self.levels[1].iter().map(|m| m.k).sum();
            let emptied = first_class_before > 0.0 && first_class_after == 0.0;
            if emptied || self.k0() >= 1.0 - 1e-12 {
                self.clamp_to_root();
                clamped = true;
            }
        }
        self.finish_step(spec, settings)?;
        Ok(StepReport { delta, positive: false, spawned: 0, clamped })
    }

    /// Every realization is back on the no-jump trajectory.
    fn clamp_to_root(&mut self) {
        self.levels[0][0].k = 1.0;
        for level in self.levels.iter_mut().skip(1) {
            level.clear();
        }
        self.leak = 0.0;
        self.frozen = true;
    }

    fn finish_step(&mut self, spec: &ModelSpec, settings: &StepSettings) -> Result<()> {
        let prop = settings.propagator(spec, self.current_step);
        let next = self.current_step + 1;
        for slot in &mut self.slots {
            if slot.born != next {
                slot.state = prop.apply(&slot.state)?;
                slot.born = next;
            }
        }
        self.current_step = next;
        self.prune();
        Ok(())
    }

    /// Drops trajectories with negligible `K` that are nobody's mother, then
    /// unreferenced state slots.
    fn prune(&mut self) {
        let top = self.truncation();
        let mut keep: Vec<Vec<bool>> = self.levels.iter().map(|l| vec![false; l.len()]).collect();
        keep[0][0] = true;
        let mut any_dead = false;
        // has_live_child[i] refers to node i of the level currently processed.
        let mut has_live_child: Vec<bool> = Vec::new();
        for n in (1..=top).rev() {
            let mut mother_flags = vec![false; self.levels[n - 1].len()];
            for (i, node) in self.levels[n].iter().enumerate() {
                let live = node.k >= PRUNE_THRESHOLD
                    || (n < top && has_live_child.get(i).copied().unwrap_or(false));
                keep[n][i] = live;
                if live {
                    mother_flags[node.parent as usize] = true;
                } else {
                    any_dead = true;
                }
            }
            has_live_child = mother_flags;
        }
        if !any_dead {
            return;
        }
        // Compact top-down, remapping parent indices.
        let mut remap: Vec<u32> = vec![0];
        for n in 1..=top {
            let old = std::mem::take(&mut self.levels[n]);
            let mut new_remap = vec![u32::MAX; old.len()];
            let mut kept = Vec::with_capacity(old.len());
            for (i, mut node) in old.into_iter().enumerate() {
                if keep[n][i] {
                    node.parent = remap[node.parent as usize];
                    debug_assert!(node.parent != u32::MAX);
                    new_remap[i] = kept.len() as u32;
                    kept.push(node);
                }
            }
            self.levels[n] = kept;
            remap = new_remap;
        }
        self.compact_slots();
    }

    fn compact_slots(&mut self) {
        let mut used = vec![false; self.slots.len()];
        for level in &self.levels {
            for node in level {
                used[node.slot as usize] = true;
            }
        }
        if used.iter().all(|&u| u) {
            return;
        }
        let mut remap = vec![u32::MAX; self.slots.len()];
        let old = std::mem::take(&mut self.slots);
        for (i, slot) in old.into_iter().enumerate() {
            if used[i] {
                remap[i] = self.slots.len() as u32;
                self.slots.push(slot);
            }
        }
        for level in &mut self.levels {
            for node in level {
                node.slot = remap[node.slot as usize];
            }
        }
    }
}

fn ledger_snapshot(ledger: &Ledger, spec: &ModelSpec, dt: f64) -> Snapshot {
    let w = ledger.current_step() as usize;
    let t = w as f64 * dt;
    Snapshot {
        step: w,
        t,
        delta: spec.decay_rate(t),
        rho: ledger.reconstruct_density(),
        k_sums: ledger.level_sums(),
        nodes: ledger.node_count(),
    }
}

/// Runs the ledger engine over `[0, t_end]`.
pub fn run_ledger(config: &SimConfig) -> Result<RunOutput> {
    run_ledger_with(config, |_, _| Ok(()))
}

/// Like [`run_ledger`], calling `inspect` after every step.
pub fn run_ledger_with(
    config: &SimConfig,
    mut inspect: impl FnMut(&Ledger, &StepReport) -> Result<()>,
) -> Result<RunOutput> {
    let spec = config.model_spec();
    let psi0 = initial_state(&spec, &config.initial)?;
    let grid = config.grid();
    let settings = config.step_settings();
    let stride = config.output_stride;
    let top = config.truncation;

    let mut summary = RunSummary::default();
    let mut ledger = Ledger::new(&psi0, top)?;
    let mut snapshots = vec![ledger_snapshot(&ledger, &spec, grid.dt)];
    let mut seen_negative = false;
    let mut peak_nodes = ledger.node_count();
    let mut engine_time = 0.0;

    for s in 0..grid.n_steps {
        let clock = Instant::now();
        let report = ledger.step(&spec, &settings)?;
        engine_time += clock.elapsed().as_secs_f64();

        if report.positive && !seen_negative {
            summary.positive_grid_points += 1;
        } else if !report.positive && !seen_negative {
            seen_negative = true;
            summary.last_positive_step = s.checked_sub(1);
        }
        peak_nodes = peak_nodes.max(ledger.node_count());
        let top_sum = ledger.level_sums()[top];
        if top_sum > config.overflow_threshold {
            return Err(Error::TruncationOverflow {
                t: grid.time(s + 1),
                sum: top_sum,
                threshold: config.overflow_threshold,
            });
        }
        inspect(&ledger, &report)?;
        if records_at(s + 1, stride, grid.n_steps) {
            snapshots.push(ledger_snapshot(&ledger, &spec, grid.dt));
        }
    }

    summary.wall_time_s = engine_time;
    summary.truncation_leak = ledger.truncation_leak();
    summary.forfeited = ledger.forfeited();
    summary.peak_nodes = peak_nodes;
    summary.storage_estimate = spec.dim() * summary.positive_grid_points;
    Ok(RunOutput {
        engine: EngineKind::Ledger,
        model: spec.label(),
        dim: spec.dim(),
        truncation: top,
        snapshots,
        summary,
    })
}
