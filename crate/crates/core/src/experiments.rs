//! Built-in experiment presets and the sweep runner.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{apply_override, from_table, parse_table, EngineKind, SimConfig};
use crate::error::{Error, Result};
use crate::ledger::run_ledger;
use crate::mc::run_ensemble;
use crate::models::{InitialStateSpec, ModelLabel};
use crate::observables::{bures_metric, concurrence, trace_distance};
use crate::series::{emit_csv, write_sidecar, RunOutput};

pub const PRESETS: [&str; 5] = ["fig3_k2map", "fig4_model1", "fig5_model2", "table1_bures", "fig7_benchmark"];

const FIG3: &str = r#"
preset = "fig3_k2map"
model = "model_i"
time.t_end = "t_P"
output.stride = 1000000
"#;

const FIG4: &str = r#"
preset = "fig4_model1"
model = "model_i"
time.t_end = "t_N"
"#;

const FIG5: &str = r#"
preset = "fig5_model2"
model = "model_ii"
coupling.kind = "sigmoid_switchoff"
time.t_end = "t_N"
"#;

const TABLE1: &str = r#"
preset = "table1_bures"
model = "model_i"
time.t_end = "t_N"
output.stride = 1000000
sweep.n_r = [1000, 10000, 100000]
sweep.seeds = 1
"#;

const FIG7: &str = r#"
preset = "fig7_benchmark"
model = "model_i"
time.t_end = "t_N"
sweep.n_r = [1000, 10000, 100000]
"#;

/// The built-in document of a preset, ready for overrides.
pub fn preset_document(name: &str) -> Result<toml::Table> {
    let text = match name {
        "fig3_k2map" => FIG3,
        "fig4_model1" => FIG4,
        "fig5_model2" => FIG5,
        "table1_bures" => TABLE1,
        "fig7_benchmark" => FIG7,
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(parse_table(text)?)
}

/// Preset configuration with `key=value` overrides applied.
pub fn preset_config<'a>(name: &str, overrides: impl IntoIterator<Item = &'a str>) -> Result<SimConfig> {
    let mut doc = preset_document(name)?;
    crate::config::apply_overrides(&mut doc, overrides)?;
    Ok(from_table(doc)?)
}

/// Runs `f` on a pool capped by `NMQJ_THREADS` when that is set.
pub fn with_task_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var("NMQJ_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    match threads {
        Some(n) if n >= 1 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

/// Copy of `base` with document-level edits, revalidated.
pub fn derive_config(base: &SimConfig, edits: &[(&str, &str)]) -> Result<SimConfig> {
    let mut doc = base.to_table();
    if edits.iter().any(|(k, _)| *k == "model") {
        doc.remove("initial");
    }
    for (k, v) in edits {
        apply_override(&mut doc, k, v)?;
    }
    Ok(from_table(doc)?)
}

/// A named model setup used by the comparison presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCase {
    /// Driven spin.
    ModelI,
    /// Spin pair, constant coupling.
    ModelIiI,
    /// Spin pair, coupling switched off at `t_P`.
    ModelIiIi,
}

impl ModelCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "model_i" => Ok(ModelCase::ModelI),
            "model_ii_i" => Ok(ModelCase::ModelIiI),
            "model_ii_ii" => Ok(ModelCase::ModelIiIi),
            other => Err(Error::Config(crate::config::ConfigError::Validation(vec![format!(
                "unknown model case `{other}` (expected model_i, model_ii_i or model_ii_ii)"
            )]))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelCase::ModelI => "model_i",
            ModelCase::ModelIiI => "model_ii_i",
            ModelCase::ModelIiIi => "model_ii_ii",
        }
    }

    /// `base` switched to this case. The initial state is kept when the
    /// model does not change.
    pub fn apply(&self, base: &SimConfig) -> Result<SimConfig> {
        let (model, kind) = match self {
            ModelCase::ModelI => ("model_i", "constant"),
            ModelCase::ModelIiI => ("model_ii", "constant"),
            ModelCase::ModelIiIi => ("model_ii", "sigmoid_switchoff"),
        };
        let mut doc = base.to_table();
        if base.model.as_str() != model {
            doc.remove("initial");
        }
        let auto_switch = base.coupling.t_switch == 0.0 || Some(base.coupling.t_switch) == base.t_p();
        if let (true, Some(toml::Value::Table(c))) = (auto_switch, doc.get_mut("coupling")) {
            c.remove("t_switch");
        }
        apply_override(&mut doc, "model", model)?;
        apply_override(&mut doc, "coupling.kind", kind)?;
        Ok(from_table(doc)?)
    }
}

fn cases(config: &SimConfig) -> Result<Vec<ModelCase>> {
    config.sweep.models.iter().map(|m| ModelCase::parse(m)).collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn grid_index(t: f64, dt: f64) -> usize {
    (t / dt + 1e-9).floor() as usize
}

// fig3 ----------------------------------------------------------------------

/// `Σ_α K₂^α(t_end)` over a `θ × φ` grid of initial Bloch states.
#[derive(Clone, Debug, Serialize)]
pub struct K2Map {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// `values[i][j]` belongs to `(thetas[i], phis[j])`.
    pub values: Vec<Vec<f64>>,
}

impl K2Map {
    /// `(max, θ, φ)`
    pub fn argmax(&self) -> (f64, f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.0 {
                    best = (v, self.thetas[i], self.phis[j]);
                }
            }
        }
        best
    }
}

pub fn k2_map(config: &SimConfig) -> Result<K2Map> {
    let thetas = linspace(0.0, PI, config.sweep.theta_points);
    let phis = linspace(0.0, 2.0 * PI, config.sweep.phi_points);
    let cells: Vec<(usize, usize)> =
        (0..thetas.len()).flat_map(|i| (0..phis.len()).map(move |j| (i, j))).collect();
    let level = 2.min(config.truncation);
    let flat: Vec<f64> = with_task_pool(|| {
        cells
            .par_iter()
            .map(|&(i, j)| {
                let mut c = config.clone();
                c.model = ModelLabel::ModelI;
                c.initial = InitialStateSpec::Bloch { theta: thetas[i], phi: phis[j] };
                c.output_stride = usize::MAX;
                let run = run_ledger(&c)?;
                Ok(run.final_snapshot().k_sums[level])
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let values = flat.chunks(phis.len()).map(<[f64]>::to_vec).collect();
    Ok(K2Map { thetas, phis, values })
}

// fig4 ----------------------------------------------------------------------

/// The three initial states of the driven-spin dynamics figure.
pub fn fig4_initial_states() -> [(&'static str, InitialStateSpec); 3] {
    [
        ("up", InitialStateSpec::Bloch { theta: 0.0, phi: 0.0 }),
        ("superposition", InitialStateSpec::Bloch { theta: PI / 2.0, phi: 0.0 }),
        ("down", InitialStateSpec::Bloch { theta: PI, phi: 0.0 }),
    ]
}

pub fn fig4_runs(config: &SimConfig) -> Result<Vec<(&'static str, RunOutput)>> {
    with_task_pool(|| {
        fig4_initial_states()
            .into_par_iter()
            .map(|(name, init)| {
                let mut c = config.clone();
                c.initial = init;
                Ok((name, crate::run(&c)?))
            })
            .collect()
    })
}

// fig5 ----------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct XiPoint {
    pub case: ModelCase,
    pub xi: f64,
    /// `Σ_α K₂^α` at the grid point of `t_P`.
    pub k2_at_tp: f64,
    pub run: RunOutput,
}

/// Model II over `sweep.xi_points` values of `ξ ∈ [0, π/2]`, both couplings.
pub fn xi_sweep(config: &SimConfig) -> Result<Vec<XiPoint>> {
    let xis = linspace(0.0, PI / 2.0, config.sweep.xi_points);
    let mut jobs = Vec::new();
    for case in [ModelCase::ModelIiI, ModelCase::ModelIiIi] {
        let base = case.apply(config)?;
        for &xi in &xis {
            let mut c = base.clone();
            c.initial = InitialStateSpec::Xi { xi };
            c.output_stride = 1;
            jobs.push((case, xi, c));
        }
    }
    with_task_pool(|| {
        jobs.into_par_iter()
            .map(|(case, xi, c)| {
                let run = crate::run(&c)?;
                let tp = c.t_p().map(|t| grid_index(t, c.dt));
                let k2_at_tp = tp
                    .and_then(|w| run.snapshots.iter().find(|s| s.step == w))
                    .and_then(|s| s.k_sums.get(2).copied())
                    .unwrap_or(f64::NAN);
                Ok(XiPoint { case, xi, k2_at_tp, run })
            })
            .collect()
    })
}

// table1 / fig7 ---------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BuresRow {
    pub case: ModelCase,
    pub n_r: usize,
    pub seed: u64,
    pub bures: f64,
    pub trace_distance: f64,
    pub ledger_wall_time_s: f64,
    pub mc_wall_time_s: f64,
}

/// Final-state Bures metric between the ledger and Monte Carlo runs for
/// every case, realization count and seed.
pub fn bures_table(config: &SimConfig) -> Result<Vec<BuresRow>> {
    let mut rows = Vec::new();
    for case in cases(config)? {
        let c = case.apply(config)?;
        let ledger = run_ledger(&c)?;
        let mut jobs = Vec::new();
        for &n_r in &c.sweep.n_r {
            for k in 0..c.sweep.seeds {
                jobs.push((n_r, c.seed + k as u64));
            }
        }
        let mut part: Vec<BuresRow> = with_task_pool(|| {
            jobs.into_par_iter()
                .map(|(n_r, seed)| {
                    let mc = run_ensemble(&c, n_r, seed)?;
                    Ok(BuresRow {
                        case,
                        n_r,
                        seed,
                        bures: bures_metric(ledger.final_state(), mc.final_state())?,
                        trace_distance: trace_distance(ledger.final_state(), mc.final_state())?,
                        ledger_wall_time_s: ledger.summary.wall_time_s,
                        mc_wall_time_s: mc.summary.wall_time_s,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        rows.append(&mut part);
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub case: ModelCase,
    pub engine: EngineKind,
    pub n_r: Option<usize>,
    pub wall_time_s: f64,
    pub storage_estimate: usize,
}

#[derive(Clone, Debug)]
pub struct BenchCase {
    pub case: ModelCase,
    pub ledger: RunOutput,
    pub mc: Vec<RunOutput>,
}

/// Wall time of the ledger and of Monte Carlo at each `sweep.n_r`. Runs are
/// sequential so timings do not compete for cores.
pub fn benchmark(config: &SimConfig) -> Result<Vec<BenchCase>> {
    let mut out = Vec::new();
    for case in cases(config)? {
        let c = case.apply(config)?;
        let ledger = run_ledger(&c)?;
        let mc = c.sweep.n_r.iter().map(|&n| run_ensemble(&c, n, c.seed)).collect::<Result<Vec<_>>>()?;
        out.push(BenchCase { case, ledger, mc });
    }
    Ok(out)
}

pub fn bench_rows(cases: &[BenchCase]) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for b in cases {
        rows.push(BenchRow {
            case: b.case,
            engine: EngineKind::Ledger,
            n_r: None,
            wall_time_s: b.ledger.summary.wall_time_s,
            storage_estimate: b.ledger.summary.storage_estimate,
        });
        for m in &b.mc {
            rows.push(BenchRow {
                case: b.case,
                engine: EngineKind::Mc,
                n_r: m.summary.n_r,
                wall_time_s: m.summary.wall_time_s,
                storage_estimate: m.summary.storage_estimate,
            });
        }
    }
    rows
}

// driver ----------------------------------------------------------------------

/// Files written by an experiment, plus a JSON digest of the results.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn write(out_dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out_dir.join(name);
    fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

fn write_run(out_dir: &Path, stem: &str, config: &SimConfig, run: &RunOutput, files: &mut Vec<PathBuf>) -> Result<()> {
    let csv = out_dir.join(format!("{stem}.csv"));
    emit_csv(run, &csv)?;
    let json = out_dir.join(format!("{stem}.json"));
    write_sidecar(config, run, &json)?;
    files.push(csv);
    files.push(json);
    Ok(())
}

/// Runs the preset named in `config` (or a single run when there is none)
/// and writes its outputs into `out_dir`.
pub fn run_experiment(config: &SimConfig, out_dir: &Path) -> Result<ExperimentReport> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let name = config.preset.clone().unwrap_or_else(|| format!("{}_{}", config.engine, config.model.as_str()));
    let summary = match config.preset.as_deref() {
        None => {
            let run = crate::run(config)?;
            match &config.output_path {
                Some(path) => {
                    emit_csv(&run, path)?;
                    let json = path.with_extension("json");
                    write_sidecar(config, &run, &json)?;
                    files.push(path.clone());
                    files.push(json);
                }
                None => write_run(out_dir, &name, config, &run, &mut files)?,
            }
            serde_json::to_value(&run.summary).expect("summary serializes")
        }
        Some("fig3_k2map") => {
            let map = k2_map(config)?;
            let mut csv = String::from("theta,phi,k2\n");
            for (i, row) in map.values.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let _ = writeln!(csv, "{},{},{}", fmt(map.thetas[i]), fmt(map.phis[j]), fmt(*v));
                }
            }
            write(out_dir, "fig3_k2map.csv", &csv, &mut files)?;
            let (max, theta, phi) = map.argmax();
            serde_json::json!({ "t_end": config.t_end, "max_k2": max, "argmax_theta": theta, "argmax_phi": phi })
        }
        Some("fig4_model1") => {
            let mut digest = serde_json::Map::new();
            for (label, run) in fig4_runs(config)? {
                let mut c = config.clone();
                c.initial = fig4_initial_states().iter().find(|(l, _)| *l == label).unwrap().1;
                write_run(out_dir, &format!("fig4_model1_{label}"), &c, &run, &mut files)?;
                let k0_max_after_tp = run
                    .snapshots
                    .iter()
                    .filter(|s| config.t_p().is_some_and(|tp| s.t > tp))
                    .filter_map(|s| s.k_sums.first().copied())
                    .fold(f64::NAN, f64::max);
                digest.insert(label.into(), serde_json::json!({ "k0_max_after_t_p": k0_max_after_tp }));
            }
            serde_json::Value::Object(digest)
        }
        Some("fig5_model2") => {
            let points = xi_sweep(config)?;
            let mut k2 = String::from("case,xi,k2_at_t_p\n");
            for p in &points {
                let _ = writeln!(k2, "{},{},{}", p.case.as_str(), fmt(p.xi), fmt(p.k2_at_tp));
            }
            write(out_dir, "fig5_model2_k2.csv", &k2, &mut files)?;
            for case in [ModelCase::ModelIiI, ModelCase::ModelIiIi] {
                let runs: Vec<&XiPoint> = points.iter().filter(|p| p.case == case).collect();
                let mut csv = String::from("t");
                for p in &runs {
                    let _ = write!(csv, ",xi_{:.6}", p.xi);
                }
                csv.push('\n');
                let series: Vec<Vec<f64>> = runs
                    .iter()
                    .map(|p| p.run.snapshots.iter().map(|s| concurrence(&s.rho).map(|e| e.concurrence)).collect())
                    .collect::<Result<_>>()?;
                for (k, s) in runs[0].run.snapshots.iter().enumerate() {
                    csv.push_str(&fmt(s.t));
                    for col in &series {
                        csv.push(',');
                        csv.push_str(&fmt(col[k]));
                    }
                    csv.push('\n');
                }
                write(out_dir, &format!("fig5_model2_concurrence_{}.csv", case.as_str()), &csv, &mut files)?;
            }
            let max_k2 = points.iter().map(|p| p.k2_at_tp).fold(f64::NAN, f64::max);
            serde_json::json!({ "max_k2_at_t_p": max_k2, "points": points.len() })
        }
        Some("table1_bures") => {
            let rows = bures_table(config)?;
            let mut csv = String::from("case,n_r,seed,bures,trace_distance,ledger_wall_time_s,mc_wall_time_s\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    r.case.as_str(),
                    r.n_r,
                    r.seed,
                    fmt(r.bures),
                    fmt(r.trace_distance),
                    fmt(r.ledger_wall_time_s),
                    fmt(r.mc_wall_time_s)
                );
            }
            write(out_dir, "table1_bures.csv", &csv, &mut files)?;
            serde_json::to_value(&rows).expect("rows serialize")
        }
        Some("fig7_benchmark") => {
            let cases = benchmark(config)?;
            let rows = bench_rows(&cases);
            let mut csv = String::from("case,engine,n_r,wall_time_s,storage_estimate\n");
            for r in &rows {
                let n_r = r.n_r.map(|n| n.to_string()).unwrap_or_default();
                let _ = writeln!(csv, "{},{},{},{},{}", r.case.as_str(), r.engine, n_r, fmt(r.wall_time_s), r.storage_estimate);
            }
            write(out_dir, "fig7_timing.csv", &csv, &mut files)?;
            for b in &cases {
                let mut csv = String::from("t,ledger");
                for m in &b.mc {
                    let _ = write!(csv, ",mc_{}", m.summary.n_r.unwrap_or(0));
                }
                csv.push('\n');
                for (k, s) in b.ledger.snapshots.iter().enumerate() {
                    csv.push_str(&fmt(s.t));
                    csv.push(',');
                    csv.push_str(&fmt(s.k_sums.get(2).copied().unwrap_or(f64::NAN)));
                    for m in &b.mc {
                        csv.push(',');
                        let v = m.snapshots.get(k).and_then(|s| s.k_sums.get(2)).copied().unwrap_or(f64::NAN);
                        csv.push_str(&fmt(v));
                    }
                    csv.push('\n');
                }
                write(out_dir, &format!("fig7_k2_{}.csv", b.case.as_str()), &csv, &mut files)?;
            }
            serde_json::to_value(&rows).expect("rows serialize")
        }
        Some(other) => return Err(Error::UnknownPreset(other.to_string())),
    };
    let report = ExperimentReport { name, files, summary };
    let mut files = report.files.clone();
    write(out_dir, &format!("{}_summary.json", report.name), &serde_json::to_string_pretty(&report).expect("report serializes"), &mut files)?;
    Ok(ExperimentReport { files, ..report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_with_defaults() {
        for name in PRESETS {
            let c = preset_config(name, []).unwrap();
            assert_eq!(c.preset.as_deref(), Some(name));
        }
        assert!(matches!(preset_document("fig9"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn cases_switch_model_and_coupling() {
        let base = preset_config("table1_bures", []).unwrap();
        let c = ModelCase::ModelIiIi.apply(&base).unwrap();
        assert_eq!(c.model, ModelLabel::ModelIi);
        assert_eq!(Some(c.coupling.t_switch), c.t_p());
        assert_eq!(c.initial, InitialStateSpec::Xi { xi: 0.0 });
        let back = ModelCase::ModelI.apply(&c).unwrap();
        assert_eq!(back.model, ModelLabel::ModelI);
        assert!(ModelCase::parse("model_iii").is_err());
    }

    #[test]
    fn small_k2_map() {
        let c = preset_config("fig3_k2map", ["sweep.theta_points=3", "sweep.phi_points=2"]).unwrap();
        let map = k2_map(&c).unwrap();
        assert_eq!(map.values.len(), 3);
        assert!(map.values.iter().flatten().all(|&v| (0.0..1e-2).contains(&v)));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, PI, 41);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[40], PI);
        assert!((v[20] - PI / 2.0).abs() < 1e-15);
    }
}
