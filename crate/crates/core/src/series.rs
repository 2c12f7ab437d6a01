//! Time-series records shared by all engines, and their CSV / JSON sinks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::{EngineKind, SimConfig};
use crate::error::Result;
use crate::models::ModelLabel;
use crate::observables::{bloch_vector, concurrence};
use crate::qcore::DensityMatrix;

/// State of a run at one output time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    /// Grid index.
    pub step: usize,
    pub t: f64,
    /// `Δ(t)`
    pub delta: f64,
    pub rho: DensityMatrix,
    /// Ledger: `Σ_α Kₙ^α` per level. Monte Carlo: `Σ_α Nₙ^α / N_r`.
    /// Empty for the exact engine.
    pub k_sums: Vec<f64>,
    /// Live trajectories (ledger nodes or occupied Monte Carlo trajectories).
    pub nodes: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    /// Engine wall time in seconds, output excluded.
    pub wall_time_s: f64,
    pub truncation_leak: f64,
    pub forfeited: f64,
    pub peak_nodes: usize,
    /// Last step dispatched as positive before the first negative step.
    pub last_positive_step: Option<usize>,
    /// Grid points in the first positive-rate region.
    pub positive_grid_points: usize,
    /// `D_H × N_t` (ledger) or `D_H × N_r` (Monte Carlo) stored amplitudes.
    pub storage_estimate: usize,
    pub n_r: Option<usize>,
    pub seed: Option<u64>,
    /// Lowest density-matrix eigenvalue seen (exact engine).
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub engine: EngineKind,
    pub model: ModelLabel,
    pub dim: usize,
    pub truncation: usize,
    pub snapshots: Vec<Snapshot>,
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("runs record at least one snapshot")
    }

    pub fn final_state(&self) -> &DensityMatrix {
        &self.final_snapshot().rho
    }

    /// `Σ_α Kₙ^α` over time for level `n`.
    pub fn level_series(&self, n: usize) -> Vec<(f64, f64)> {
        self.snapshots.iter().map(|s| (s.t, s.k_sums.get(n).copied().unwrap_or(f64::NAN))).collect()
    }
}

/// Should a snapshot be taken after reaching grid index `w`?
pub(crate) fn records_at(w: usize, stride: usize, last: usize) -> bool {
    w % stride == 0 || w == last
}

#[inline]
fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub fn csv_header(model: ModelLabel, dim: usize, truncation: usize) -> String {
    let mut cols = vec!["t".to_string(), "delta".to_string()];
    cols.extend((0..=truncation).map(|n| format!("K{n}")));
    match model {
        ModelLabel::ModelI => cols.extend(["sx", "sy", "sz"].map(String::from)),
        ModelLabel::ModelIi => cols.push("concurrence".into()),
    }
    for i in 0..dim {
        for j in 0..dim {
            cols.push(format!("rho_re_{i}{j}"));
            cols.push(format!("rho_im_{i}{j}"));
        }
    }
    cols.join(",")
}

/// Renders the run as CSV with 17 significant digits per number.
pub fn to_csv(run: &RunOutput) -> Result<String> {
    let mut out = csv_header(run.model, run.dim, run.truncation);
    out.push('\n');
    for s in &run.snapshots {
        num(&mut out, s.t);
        out.push(',');
        num(&mut out, s.delta);
        for n in 0..=run.truncation {
            out.push(',');
            num(&mut out, s.k_sums.get(n).copied().unwrap_or(f64::NAN));
        }
        match run.model {
            ModelLabel::ModelI => {
                let b = bloch_vector(&s.rho)?;
                for v in [b.x, b.y, b.z] {
                    out.push(',');
                    num(&mut out, v);
                }
            }
            ModelLabel::ModelIi => {
                out.push(',');
                num(&mut out, concurrence(&s.rho)?.concurrence);
            }
        }
        for i in 0..run.dim {
            for j in 0..run.dim {
                let z = s.rho.get(i, j);
                out.push(',');
                num(&mut out, z.re);
                out.push(',');
                num(&mut out, z.im);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_csv(run: &RunOutput, path: &Path) -> Result<()> {
    fs::write(path, to_csv(run)?)?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    engine: EngineKind,
    config: &'a SimConfig,
    t_p: Option<f64>,
    t_n: Option<f64>,
    summary: &'a RunSummary,
}

/// JSON metadata describing a run.
pub fn sidecar_json(config: &SimConfig, run: &RunOutput) -> String {
    let doc = Sidecar { engine: run.engine, config, t_p: config.t_p(), t_n: config.t_n(), summary: &run.summary };
    serde_json::to_string_pretty(&doc).expect("sidecar serializes")
}

pub fn write_sidecar(config: &SimConfig, run: &RunOutput, path: &Path) -> Result<()> {
    fs::write(path, sidecar_json(config, run))?;
    Ok(())
}
