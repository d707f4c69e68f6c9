//! Config-driven experiments: seeded restarts, aggregates and output files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytics::{ratio_curve, Distribution, DistributionSpec};
use crate::asp::{asp_prepare, AspConfig};
use crate::driver::{restart_seed, run_sqd, run_sqdaa, DriverConfig, RunRecord};
use crate::error::{Error, Result};
use crate::pauli::{parse_hamiltonian, PauliHamiltonian};
use crate::resources::{
    fit_trotter_constant, iqpe_qubitization_counts, iqpe_trotter_optimize, pipeline_report, PrepModel,
    ResourceReport, TrotterErrorModel, MAJORITY_CONFIDENCE,
};
use crate::state::{load_state, model_state, StateVector};

/// Version tag written into every JSON output.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RunSqd,
    RunSqdaa,
    ModelDist,
    Resources,
    AspPrepare,
    Compare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::RunSqd => "run-sqd",
            Mode::RunSqdaa => "run-sqdaa",
            Mode::ModelDist => "model-dist",
            Mode::Resources => "resources",
            Mode::AspPrepare => "asp-prepare",
            Mode::Compare => "compare",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum StateSource {
    Model {
        #[serde(flatten)]
        distribution: Distribution,
        n: usize,
    },
    File {
        path: PathBuf,
        n: usize,
    },
    Asp(AspConfig),
}

fn default_shots_it() -> u64 {
    1000
}
fn default_pfail() -> f64 {
    0.1
}

/// Analytic curve parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    #[serde(flatten)]
    pub spec: DistributionSpec,
    pub m_min: u64,
    pub m_max: u64,
    #[serde(default = "default_shots_it")]
    pub shots_it: u64,
    #[serde(default = "default_pfail")]
    pub p_fail: f64,
}

fn default_eps_tot() -> f64 {
    1e-4
}
fn default_budget() -> f64 {
    1.6e-3
}
fn default_confidence() -> f64 {
    MAJORITY_CONFIDENCE
}
fn default_dtaus() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub prep: PrepModel,
    #[serde(default = "default_eps_tot")]
    pub eps_tot: f64,
    /// Energy error budget ΔE for iQPE.
    #[serde(default = "default_budget")]
    pub energy_budget: f64,
    /// Ground-state overlap |c_GS|²; taken from the prepared state's
    /// largest-weight exact eigenvector when absent.
    pub overlap: Option<f64>,
    /// Supplied Trotter constant; fitted on `dtaus` otherwise.
    pub c_gs: Option<f64>,
    #[serde(default = "default_dtaus")]
    pub dtaus: Vec<f64>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub zero_reflection: bool,
}

fn default_restarts() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub hamiltonian: Option<PathBuf>,
    pub state: Option<StateSource>,
    #[serde(default)]
    pub driver: DriverConfig,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    pub curve: Option<CurveConfig>,
    pub resources: Option<ResourceConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        // relative input paths resolve against the config file
        if let Some(dir) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            if let Some(h) = cfg.hamiltonian.as_mut() {
                fix(h);
            }
            if let Some(StateSource::File { path, .. }) = cfg.state.as_mut() {
                fix(path);
            }
        }
        Ok(cfg)
    }

    fn missing(&self, field: &str) -> Error {
        Error::MissingField { mode: self.mode.name().into(), field: field.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be ≥ 1".into()));
        }
        match self.mode {
            Mode::RunSqd | Mode::RunSqdaa | Mode::Compare => {
                if self.state.is_none() {
                    return Err(self.missing("state"));
                }
                self.driver.validate()?;
            }
            Mode::ModelDist => {
                if self.curve.is_none() {
                    return Err(self.missing("curve"));
                }
            }
            Mode::Resources => {
                if self.hamiltonian.is_none() {
                    return Err(self.missing("hamiltonian"));
                }
                if self.state.is_none() {
                    return Err(self.missing("state"));
                }
                if self.resources.is_none() {
                    return Err(self.missing("resources"));
                }
            }
            Mode::AspPrepare => {
                if self.hamiltonian.is_none() {
                    return Err(self.missing("hamiltonian"));
                }
                if !matches!(self.state, Some(StateSource::Asp(_))) {
                    return Err(self.missing("state (source = \"asp\")"));
                }
            }
        }
        if matches!(self.state, Some(StateSource::Asp(_))) && self.hamiltonian.is_none() {
            return Err(self.missing("hamiltonian"));
        }
        Ok(())
    }
}

/// Nearest-rank percentile of sorted data: the value at rank ⌈q·N⌉.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub median: f64,
    pub p16: f64,
    pub p84: f64,
    pub count: usize,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(Self { median: nearest_rank(&v, 0.5), p16: nearest_rank(&v, 0.16), p84: nearest_rank(&v, 0.84), count: v.len() })
    }
}

/// Per-metric statistics over restarts, keyed by metric name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub metrics: std::collections::BTreeMap<String, MetricStats>,
}

impl AggregateStats {
    pub fn from_columns(columns: &[(&str, Vec<f64>)]) -> Result<Self> {
        let mut a = Self::default();
        for (name, vals) in columns {
            a.metrics.insert((*name).into(), MetricStats::from_values(vals)?);
        }
        Ok(a)
    }
}

/// Synthetic diagonal Hamiltonian with `E_l = l`, used when a model state
/// comes without a Hamiltonian.
pub fn index_energy_hamiltonian(n: usize) -> Result<PauliHamiltonian> {
    let d: Vec<f64> = (0..1u64 << n).map(|l| l as f64).collect();
    PauliHamiltonian::from_diagonal(&d)
}

struct Inputs {
    h: PauliHamiltonian,
    state: StateVector,
    asp: Option<Value>,
}

fn read_hamiltonian(cfg: &ExperimentConfig) -> Result<Option<PauliHamiltonian>> {
    cfg.hamiltonian.as_ref().map(|p| parse_hamiltonian(&fs::read_to_string(p)?)).transpose()
}

fn inputs(cfg: &ExperimentConfig) -> Result<Inputs> {
    let h = read_hamiltonian(cfg)?;
    let source = cfg.state.as_ref().ok_or_else(|| cfg.missing("state"))?;
    let (state, asp) = match source {
        StateSource::Model { distribution, n } => (model_state(distribution, *n)?, None),
        StateSource::File { path, n } => (load_state(&fs::read_to_string(path)?, *n)?, None),
        StateSource::Asp(a) => {
            let h = h.as_ref().ok_or_else(|| cfg.missing("hamiltonian"))?;
            let out = asp_prepare(h, a)?;
            let v = serde_json::to_value(&out)?;
            (out.state.expect("asp_prepare returns its state"), Some(v))
        }
    };
    let h = match h {
        Some(h) => h,
        None => index_energy_hamiltonian(state.n())?,
    };
    if h.n() != state.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), found: state.n() });
    }
    Ok(Inputs { h, state, asp })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn header(cfg: &ExperimentConfig) -> Result<Value> {
    Ok(json!({ "schema_version": SCHEMA_VERSION, "config": serde_json::to_value(cfg)? }))
}

fn restart_runs<F>(cfg: &ExperimentConfig, inp: &Inputs, f: F) -> Result<Vec<RunRecord>>
where
    F: Fn(&PauliHamiltonian, &StateVector, &DriverConfig) -> Result<RunRecord> + Sync,
{
    pool(cfg.workers)?.install(|| {
        (0..cfg.restarts as u64)
            .into_par_iter()
            .map(|i| {
                let d = DriverConfig { seed: restart_seed(cfg.seed_base, i), ..cfg.driver.clone() };
                f(&inp.h, &inp.state, &d)
            })
            .collect()
    })
}

fn write_runs(cfg: &ExperimentConfig, dir: &Path, tag: &str, runs: &[RunRecord]) -> Result<()> {
    for (i, r) in runs.iter().enumerate() {
        r.write_trace_csv(fs::File::create(dir.join(format!("{tag}_trace_{i:04}.csv")))?)?;
        let mut doc = header(cfg)?;
        doc["record"] = serde_json::to_value(r)?;
        write_json(&dir.join(format!("{tag}_run_{i:04}.json")), &doc)?;
    }
    Ok(())
}

fn run_columns(runs: &[RunRecord]) -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("q_tot", runs.iter().map(|r| r.q_tot as f64).collect()),
        ("shots_tot", runs.iter().map(|r| r.shots_tot as f64).collect()),
        ("final_energy", runs.iter().map(|r| r.final_energy).collect()),
        ("subspace_dim", runs.iter().map(|r| r.ledger.entries.len() as f64).collect()),
    ]
}

/// One row of the compare table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub restart: usize,
    pub seed: u64,
    pub q_sqd: u128,
    pub q_sqdaa: u128,
    pub shots_sqd: u128,
    pub shots_sqdaa: u128,
    pub q_ratio: f64,
    pub shots_ratio: f64,
    pub energy_sqd: f64,
    pub energy_sqdaa: f64,
}

pub fn compare_rows(sqd: &[RunRecord], sqdaa: &[RunRecord]) -> Vec<CompareRow> {
    sqd.iter()
        .zip(sqdaa)
        .enumerate()
        .map(|(i, (a, b))| CompareRow {
            restart: i,
            seed: a.config.seed,
            q_sqd: a.q_tot,
            q_sqdaa: b.q_tot,
            shots_sqd: a.shots_tot,
            shots_sqdaa: b.shots_tot,
            q_ratio: a.q_tot as f64 / b.q_tot as f64,
            shots_ratio: a.shots_tot as f64 / b.shots_tot as f64,
            energy_sqd: a.final_energy,
            energy_sqdaa: b.final_energy,
        })
        .collect()
}

pub fn compare_aggregate(rows: &[CompareRow]) -> Result<AggregateStats> {
    AggregateStats::from_columns(&[
        ("q_ratio", rows.iter().map(|r| r.q_ratio).collect()),
        ("shots_ratio", rows.iter().map(|r| r.shots_ratio).collect()),
        ("q_sqd", rows.iter().map(|r| r.q_sqd as f64).collect()),
        ("q_sqdaa", rows.iter().map(|r| r.q_sqdaa as f64).collect()),
        ("shots_sqd", rows.iter().map(|r| r.shots_sqd as f64).collect()),
        ("shots_sqdaa", rows.iter().map(|r| r.shots_sqdaa as f64).collect()),
    ])
}

/// Read a compare CSV back and recompute its aggregate.
pub fn reaggregate_compare_csv(path: &Path) -> Result<AggregateStats> {
    let mut rd = csv::Reader::from_path(path)?;
    let rows = rd.deserialize().collect::<std::result::Result<Vec<CompareRow>, _>>()?;
    compare_aggregate(&rows)
}

/// All four pipelines for one Hamiltonian and prepared state.
pub fn resource_reports(
    h: &PauliHamiltonian,
    state: &StateVector,
    driver: &DriverConfig,
    rc: &ResourceConfig,
) -> Result<Vec<ResourceReport>> {
    let prep = rc.prep.cost(h, rc.eps_tot)?;
    let sqd = run_sqd(h, state, driver)?;
    let sqdaa = run_sqdaa(h, state, driver)?;
    let mut out = vec![
        pipeline_report("sqd", &sqd.plan, h.n(), prep, rc.zero_reflection)?,
        pipeline_report("sqdaa", &sqdaa.plan, h.n(), prep, rc.zero_reflection)?,
    ];
    let overlap = match rc.overlap {
        Some(o) => o,
        None => ground_overlap(h, state)?,
    };
    let model = match rc.c_gs {
        Some(c) => TrotterErrorModel::supplied(c),
        None => fit_trotter_constant(h, &rc.dtaus)?,
    };
    let mut tr = iqpe_trotter_optimize(h, &model, rc.energy_budget, overlap, prep, rc.confidence)?;
    tr.parameters.insert("trotter_model".into(), serde_json::to_value(&model)?);
    out.push(tr);
    out.push(iqpe_qubitization_counts(h, rc.energy_budget, overlap, prep, rc.confidence)?);
    for r in &mut out {
        r.parameters.insert("prep_model".into(), serde_json::to_value(rc.prep)?);
        r.parameters.insert("eps_tot".into(), json!(rc.eps_tot));
    }
    Ok(out)
}

/// `|⟨Ψ_GS|ψ⟩|²` against the dense ground state.
pub fn ground_overlap(h: &PauliHamiltonian, state: &StateVector) -> Result<f64> {
    let (_, gs) = crate::subspace::lowest_eigenpair(&h.dense_matrix()?)?;
    let ov: num_complex::Complex64 = gs.iter().zip(state.amplitudes()).map(|(g, a)| g.conj() * a).sum();
    Ok(ov.norm_sqr())
}

/// Execute one experiment; returns the paths written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let mut head = header(cfg)?;
    match cfg.mode {
        Mode::RunSqd | Mode::RunSqdaa => {
            let inp = inputs(cfg)?;
            let (tag, runs) = if cfg.mode == Mode::RunSqd {
                ("sqd", restart_runs(cfg, &inp, run_sqd)?)
            } else {
                ("sqdaa", restart_runs(cfg, &inp, run_sqdaa)?)
            };
            write_runs(cfg, &dir, tag, &runs)?;
            head["asp"] = inp.asp.unwrap_or(Value::Null);
            head["aggregate"] = serde_json::to_value(AggregateStats::from_columns(&run_columns(&runs))?)?;
            head["terminations"] = serde_json::to_value(runs.iter().map(|r| r.termination).collect::<Vec<_>>())?;
            let p = dir.join(format!("{tag}_aggregate.json"));
            write_json(&p, &head)?;
            written.push(p);
        }
        Mode::Compare => {
            let inp = inputs(cfg)?;
            let sqd = restart_runs(cfg, &inp, run_sqd)?;
            let sqdaa = restart_runs(cfg, &inp, run_sqdaa)?;
            write_runs(cfg, &dir, "sqd", &sqd)?;
            write_runs(cfg, &dir, "sqdaa", &sqdaa)?;
            let rows = compare_rows(&sqd, &sqdaa);
            let csv_path = dir.join("compare.csv");
            let mut wr = csv::Writer::from_path(&csv_path)?;
            for r in &rows {
                wr.serialize(r)?;
            }
            wr.flush()?;
            head["asp"] = inp.asp.unwrap_or(Value::Null);
            head["aggregate"] = serde_json::to_value(compare_aggregate(&rows)?)?;
            let p = dir.join("compare_aggregate.json");
            write_json(&p, &head)?;
            written.extend([csv_path, p]);
        }
        Mode::ModelDist => {
            let c = cfg.curve.as_ref().ok_or_else(|| cfg.missing("curve"))?;
            if c.m_min == 0 || c.m_max < c.m_min {
                return Err(Error::InvalidParameter("curve needs 1 ≤ m_min ≤ m_max".into()));
            }
            let curve = ratio_curve(&c.spec, c.m_min..=c.m_max, c.shots_it, c.p_fail)?;
            let csv_path = dir.join("model_curve.csv");
            curve.write_csv(fs::File::create(&csv_path)?)?;
            head["crossing_100"] = json!(curve.crossing(100.0));
            head["curve"] = serde_json::to_value(&curve)?;
            let p = dir.join("model_curve.json");
            write_json(&p, &head)?;
            written.extend([csv_path, p]);
        }
        Mode::Resources => {
            let inp = inputs(cfg)?;
            let rc = cfg.resources.as_ref().ok_or_else(|| cfg.missing("resources"))?;
            let d = DriverConfig { seed: cfg.seed_base, ..cfg.driver.clone() };
            head["reports"] = serde_json::to_value(resource_reports(&inp.h, &inp.state, &d, rc)?)?;
            head["asp"] = inp.asp.unwrap_or(Value::Null);
            let p = dir.join("resources.json");
            write_json(&p, &head)?;
            written.push(p);
        }
        Mode::AspPrepare => {
            let h = read_hamiltonian(cfg)?.ok_or_else(|| cfg.missing("hamiltonian"))?;
            let Some(StateSource::Asp(a)) = &cfg.state else {
                return Err(cfg.missing("state (source = \"asp\")"));
            };
            let out = asp_prepare(&h, a)?;
            let state = out.state.as_ref().expect("asp_prepare returns its state");
            let mut text = String::from("# index real imag\n");
            for (i, z) in state.amplitudes().iter().enumerate() {
                if z.norm() > 0.0 {
                    text.push_str(&format!("{i} {:.17e} {:.17e}\n", z.re, z.im));
                }
            }
            let sp = dir.join("asp_state.txt");
            fs::write(&sp, text)?;
            head["asp"] = serde_json::to_value(&out)?;
            let p = dir.join("asp.json");
            write_json(&p, &head)?;
            written.extend([sp, p]);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_convention() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.16), 16.0);
        assert_eq!(nearest_rank(&v, 0.5), 50.0);
        assert_eq!(nearest_rank(&v, 0.84), 84.0);
        assert_eq!(nearest_rank(&[3.0], 0.16), 3.0);
        let s = MetricStats::from_values(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!((s.p16, s.median, s.p84, s.count), (1.0, 3.0, 5.0, 5));
    }

    #[test]
    fn percentiles_are_ordered() {
        let v: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64).collect();
        let s = MetricStats::from_values(&v).unwrap();
        assert!(s.p16 <= s.median && s.median <= s.p84);
    }

    #[test]
    fn config_validation() {
        let err = ExperimentConfig::from_toml("mode = \"run-sqdaa\"\n").unwrap_err();
        assert!(matches!(err, Error::MissingField { .. }));
        let err = ExperimentConfig::from_toml("mode = \"model-dist\"\nrestarts = 0\n[curve]\nkind = \"exponential\"\nalpha = 1.0\nm_min = 1\nm_max = 3\n").unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        let ok = ExperimentConfig::from_toml(
            "mode = \"compare\"\nrestarts = 3\n[state]\nsource = \"model\"\nkind = \"exponential\"\nalpha = 1.0\nn = 6\n[driver]\ntarget_fidelity = 0.7\n[driver.stopping]\nrule = \"collect-top-m\"\nm = 4\n",
        )
        .unwrap();
        assert_eq!(ok.restarts, 3);
        assert_eq!(ok.driver.target_fidelity, 0.7);
    }

    #[test]
    fn model_dist_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "mode = \"model-dist\"\noutput = {:?}\n[curve]\nkind = \"exponential\"\nalpha = 1.0\nm_min = 1\nm_max = 40\n",
            dir.path().display().to_string()
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let first: Vec<Vec<u8>> = a.iter().map(|p| fs::read(p).unwrap()).collect();
        run_experiment(&cfg).unwrap();
        let second: Vec<Vec<u8>> = a.iter().map(|p| fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        let csv = String::from_utf8(first[0].clone()).unwrap();
        assert!(csv.starts_with("m,Qtot_sqd,Qtot_sqdaa,Qtot_aa,Qtot_dir,m_star,ratio\n"));
    }

    #[test]
    fn compare_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "mode = \"compare\"\nrestarts = 6\nworkers = 3\noutput = {:?}\n[state]\nsource = \"model\"\nkind = \"exponential\"\nalpha = 1.0\nn = 6\n[driver]\ntarget_fidelity = 0.7\n[driver.stopping]\nrule = \"collect-top-m\"\nm = 5\n",
            dir.path().display().to_string()
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let files = run_experiment(&cfg).unwrap();
        let agg: Value = serde_json::from_str(&fs::read_to_string(&files[1]).unwrap()).unwrap();
        let back = reaggregate_compare_csv(&files[0]).unwrap();
        assert_eq!(agg["aggregate"], serde_json::to_value(&back).unwrap());
        assert_eq!(back.metrics["q_ratio"].count, 6);
        assert!(dir.path().join("sqdaa_trace_0005.csv").exists());
    }
}
