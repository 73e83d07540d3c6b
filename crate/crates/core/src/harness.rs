//! Experiment grids over sizes, noise models, fitters, DEVT and partial
//! data, with CSV output and summary reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{gen_cluster_unitary, CircuitDoc, CircuitIR};
use crate::cut::{apply_cut, CutPoint, CutSpec, Fragment, DEFAULT_MAX_FRAGMENT_QUBITS};
use crate::error::{Error, Result};
use crate::knit::{empirical_distribution, full_distribution, mitigate_readout_uncut, trace_distance, CutGraph, OutcomeDistribution};
use crate::mitigation::devt_conditional;
use crate::noise::{NoiseConfig, NoiseSpec};
use crate::qmat::{c, CMatrix, ChoiTensor};
use crate::seed;
use crate::sim::{ideal_distribution, outcome_distribution, sample_counts, simulate_density_matrix};
use crate::tomo::{collect_fragment_data, fit, ClsOptions, ConditionalDataset, Fitter, Shots};

/// Overrides the worker count.
pub const WORKERS_ENV: &str = "TOMOCUT_WORKERS";
/// Overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "TOMOCUT_OUTPUT_DIR";

/// Label used in the fitter column for the uncut baselines.
pub const UNCUT: &str = "UNCUT";
pub const UNCUT_MITIGATED: &str = "UNCUT+MEM";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub sizes: Vec<usize>,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default)]
    pub seed: u64,
    /// Draw a fresh random circuit for every trial.
    #[serde(default = "yes")]
    pub vary_per_trial: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CutConfig {
    /// Cut the middle qubit wire around the middle layer.
    #[default]
    MiddleLayer,
    Points { points: Vec<CutPoint> },
}

impl CutConfig {
    pub fn spec(&self, n: usize, layers: usize) -> Result<CutSpec> {
        match self {
            CutConfig::MiddleLayer => CutSpec::middle_layer(n, layers),
            CutConfig::Points { points } => Ok(CutSpec::new(points.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub cut: CutConfig,
    pub noise: Vec<NoiseConfig>,
    pub shots: Shots,
    pub fitters: Vec<Fitter>,
    #[serde(default = "default_devt")]
    pub devt: Vec<bool>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Also run the uncut circuit with and without readout mitigation.
    #[serde(default = "yes")]
    pub baselines: bool,
    /// Record per-row wall time. Off by default so the CSV is reproducible.
    #[serde(default)]
    pub wall_time: bool,
    /// Write every collected dataset next to the CSV.
    #[serde(default)]
    pub cache_datasets: bool,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_csv_name")]
    pub csv_name: String,
    #[serde(default = "default_max_fragment_qubits")]
    pub max_fragment_qubits: usize,
}

fn yes() -> bool {
    true
}
fn default_layers() -> usize {
    3
}
fn default_devt() -> Vec<bool> {
    vec![false, true]
}
fn default_fractions() -> Vec<f64> {
    vec![1.0]
}
fn default_trials() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_csv_name() -> String {
    "sweep.csv".into()
}
fn default_max_fragment_qubits() -> usize {
    DEFAULT_MAX_FRAGMENT_QUBITS
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.circuit.sizes.is_empty() || self.noise.is_empty() || self.fitters.is_empty() {
            return bad("sizes, noise and fitters must be non-empty".into());
        }
        if let Some(&n) = self.circuit.sizes.iter().find(|&&n| !(2..=12).contains(&n)) {
            return bad(format!("circuit size {n} outside 2..=12"));
        }
        if self.devt.is_empty() || self.fractions.is_empty() {
            return bad("devt and fractions must be non-empty".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("fraction {f} not in (0, 1]"));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        for noise in &self.noise {
            noise.build()?;
        }
        Ok(())
    }

    /// Worker count after the environment override.
    pub fn resolved_workers(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Parse(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => Ok(self
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))),
        }
    }

    /// Output directory after the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub n: usize,
    pub fragments: usize,
    pub noise_kind: String,
    pub noise_params: String,
    pub fitter: String,
    pub devt: bool,
    pub fraction: f64,
    pub trial: usize,
    pub trace_distance: Option<f64>,
    pub pre_norm_mass: Option<f64>,
    pub wall_time_ms: Option<f64>,
    pub status: String,
}

impl Row {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// A circuit, its cut, and the derived fragments.
#[derive(Debug, Clone)]
pub struct CutCircuit {
    pub circuit: CircuitIR,
    pub cuts: CutSpec,
    pub fragments: Vec<Fragment>,
    pub graph: CutGraph,
}

impl CutCircuit {
    pub fn new(circuit: CircuitIR, cuts: CutSpec, max_fragment_qubits: usize) -> Result<Self> {
        let fragments = apply_cut(&circuit, &cuts, max_fragment_qubits)?;
        let graph = CutGraph::from_fragments(&fragments)?;
        Ok(Self {
            circuit,
            cuts,
            fragments,
            graph,
        })
    }

    pub fn to_doc(&self) -> CircuitBundle {
        CircuitBundle {
            circuit: self.circuit.to_doc(),
            cuts: self.cuts.clone(),
        }
    }
}

/// File form of a circuit together with its cut.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitBundle {
    pub circuit: CircuitDoc,
    pub cuts: CutSpec,
}

impl CircuitBundle {
    pub fn build(&self, max_fragment_qubits: usize) -> Result<CutCircuit> {
        CutCircuit::new(CircuitIR::from_doc(&self.circuit)?, self.cuts.clone(), max_fragment_qubits)
    }
}

/// File form of one fragment's fitted conditional tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDoc {
    pub fragment_id: usize,
    pub fitter: Fitter,
    pub devt: bool,
    pub k_in: usize,
    pub k_out: usize,
    /// Row-major `[re, im]` entries, one matrix per conditioning outcome.
    pub tensors: Vec<Vec<[f64; 2]>>,
}

impl FitDoc {
    pub fn new(fragment_id: usize, fitter: Fitter, devt: bool, tensors: &[ChoiTensor]) -> Self {
        let (k_in, k_out) = tensors.first().map_or((0, 0), |t| (t.num_in(), t.num_out()));
        let tensors = tensors
            .iter()
            .map(|t| {
                let m = t.matrix();
                (0..m.nrows())
                    .flat_map(|r| (0..m.ncols()).map(move |col| [m[(r, col)].re, m[(r, col)].im]))
                    .collect()
            })
            .collect();
        Self {
            fragment_id,
            fitter,
            devt,
            k_in,
            k_out,
            tensors,
        }
    }

    pub fn tensors(&self) -> Result<Vec<ChoiTensor>> {
        let d = 1usize << (self.k_in + self.k_out);
        self.tensors
            .iter()
            .map(|entries| {
                if entries.len() != d * d {
                    return Err(Error::Parse(format!("tensor with {} entries, expected {}", entries.len(), d * d)));
                }
                let m = CMatrix::from_row_iterator(d, d, entries.iter().map(|[re, im]| c(*re, *im)));
                ChoiTensor::new(self.k_in, self.k_out, m)
            })
            .collect()
    }
}

/// The grid job for one (size, noise model, trial).
#[derive(Debug, Clone, Copy)]
struct Job {
    index: usize,
    size: usize,
    noise: usize,
    trial: usize,
}

fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &size in &cfg.circuit.sizes {
        for noise in 0..cfg.noise.len() {
            for trial in 0..cfg.trials {
                out.push(Job {
                    index: out.len(),
                    size,
                    noise,
                    trial,
                });
            }
        }
    }
    out
}

/// Circuit for a given size and trial under the config's circuit seed.
pub fn trial_circuit(cfg: &CircuitConfig, n: usize, trial: usize) -> Result<CircuitIR> {
    let t = if cfg.vary_per_trial { trial as u64 } else { 0 };
    gen_cluster_unitary(n, cfg.layers, seed::derive(cfg.seed, &[n as u64, t]))
}

/// Fits every fragment and optionally truncates each to its dominant
/// eigenvector.
pub fn fit_all(
    fitter: Fitter,
    data: &[ConditionalDataset],
    noise: &NoiseSpec,
    apply_devt: bool,
) -> Result<Vec<Vec<ChoiTensor>>> {
    let readout = noise.assignment();
    data.iter()
        .map(|d| {
            let fitted = fit(fitter, d, Some(&readout), &ClsOptions::default())?.tensors;
            if apply_devt {
                Ok(devt_conditional(&fitted)?.into_iter().map(|r| r.truncated).collect())
            } else {
                Ok(fitted)
            }
        })
        .collect()
}

/// Noisy uncut run as a distribution, raw and with readout mitigation.
pub fn uncut_baseline(
    circuit: &CircuitIR,
    noise: &NoiseSpec,
    shots: Shots,
    seed: u64,
) -> Result<(OutcomeDistribution, OutcomeDistribution)> {
    let rho = simulate_density_matrix(circuit, noise)?;
    let probs = outcome_distribution(&rho, noise.readout.as_ref());
    let counts: Vec<f64> = match shots {
        Shots::Exact => probs,
        Shots::Finite(n) => sample_counts(&probs, n, &mut seed::stream(seed, &[]))
            .into_iter()
            .map(|c| c as f64)
            .collect(),
    };
    let raw = empirical_distribution(&counts)?;
    let a = vec![noise.assignment(); circuit.num_qubits()];
    Ok((raw, mitigate_readout_uncut(&counts, &a)?))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed().as_secs_f64() * 1e3)
}

fn run_job(cfg: &ExperimentConfig, job: Job, out_dir: Option<&Path>) -> Vec<Row> {
    let noise_cfg = &cfg.noise[job.noise];
    let row = |fragments: usize, fitter: &str, devt: bool, fraction: f64| Row {
        n: job.size,
        fragments,
        noise_kind: noise_cfg.kind_name().into(),
        noise_params: noise_cfg.label(),
        fitter: fitter.into(),
        devt,
        fraction,
        trial: job.trial,
        trace_distance: None,
        pre_norm_mass: None,
        wall_time_ms: None,
        status: "ok".into(),
    };
    let fail = |mut r: Row, e: &dyn std::fmt::Display| {
        r.status = format!("failed: {e}");
        r
    };
    // Stage failures are carried as messages so one failure can mark many rows.
    let finish = |mut r: Row, dist: std::result::Result<OutcomeDistribution, String>, ideal: &[f64], ms: f64| match dist
        .and_then(|d| Ok((trace_distance(&d.probabilities, ideal).map_err(|e| e.to_string())?, d.pre_norm_mass)))
    {
        Ok((td, mass)) => {
            r.trace_distance = Some(td);
            r.pre_norm_mass = Some(mass);
            r.wall_time_ms = cfg.wall_time.then_some(ms);
            r
        }
        Err(e) => fail(r, &e),
    };

    let setup = (|| -> Result<_> {
        let circuit = trial_circuit(&cfg.circuit, job.size, job.trial)?;
        let cuts = cfg.cut.spec(job.size, cfg.circuit.layers)?;
        let cut = CutCircuit::new(circuit, cuts, cfg.max_fragment_qubits)?;
        let ideal = ideal_distribution(&cut.circuit)?;
        let noise = noise_cfg.build()?;
        Ok((cut, ideal, noise))
    })();
    let (cut, ideal, noise) = match setup {
        Ok(v) => v,
        Err(e) => return vec![fail(row(0, "-", false, 1.0), &e)],
    };
    let job_seed = seed::derive(cfg.seed, &[job.index as u64]);
    let mut rows = Vec::new();

    let data = cut
        .fragments
        .iter()
        .map(|f| collect_fragment_data(f, &noise, cfg.shots, seed::derive(job_seed, &[0, f.id as u64])))
        .collect::<Result<Vec<_>>>();
    match data {
        Err(e) => {
            for &fitter in &cfg.fitters {
                for &d in &cfg.devt {
                    for &f in &cfg.fractions {
                        rows.push(fail(row(cut.fragments.len(), fitter.name(), d, f), &e));
                    }
                }
            }
        }
        Ok(data) => {
            if let Some(dir) = out_dir.filter(|_| cfg.cache_datasets) {
                for d in &data {
                    let name = format!("n{}_noise{}_trial{}_frag{}.txt", job.size, job.noise, job.trial, d.fragment_id);
                    if let Err(e) = fs::File::create(dir.join(name)).map_err(Error::from).and_then(|f| d.write_to(f)) {
                        rows.push(fail(row(cut.fragments.len(), "-", false, 1.0), &e));
                    }
                }
            }
            for (fi, &fraction) in cfg.fractions.iter().enumerate() {
                let subset = if fraction < 1.0 {
                    data.iter()
                        .map(|d| d.subsample(fraction, seed::derive(job_seed, &[1, fi as u64, d.fragment_id as u64])))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| e.to_string())
                } else {
                    Ok(data.clone())
                };
                for &fitter in &cfg.fitters {
                    let (fitted, fit_ms) = timed(|| {
                        let subset = subset.as_ref().map_err(Clone::clone)?;
                        fit_all(fitter, subset, &noise, false).map_err(|e| e.to_string())
                    });
                    for &apply_devt in &cfg.devt {
                        let r = row(cut.fragments.len(), fitter.name(), apply_devt, fraction);
                        let (dist, ms) = timed(|| {
                            let tensors = fitted.as_ref().map_err(Clone::clone)?;
                            let tensors = if apply_devt {
                                tensors
                                    .iter()
                                    .map(|set| Ok(devt_conditional(set)?.into_iter().map(|r| r.truncated).collect()))
                                    .collect::<Result<Vec<_>>>()
                                    .map_err(|e| e.to_string())?
                            } else {
                                tensors.clone()
                            };
                            full_distribution(&tensors, &cut.graph).map_err(|e| e.to_string())
                        });
                        rows.push(finish(r, dist, &ideal, fit_ms + ms));
                    }
                }
            }
        }
    }

    if cfg.baselines {
        let (result, ms) = timed(|| uncut_baseline(&cut.circuit, &noise, cfg.shots, seed::derive(job_seed, &[2])));
        match result {
            Ok((raw, mitigated)) => {
                rows.push(finish(row(1, UNCUT, false, 1.0), Ok(raw), &ideal, ms));
                rows.push(finish(row(1, UNCUT_MITIGATED, false, 1.0), Ok(mitigated), &ideal, ms));
            }
            Err(e) => {
                rows.push(fail(row(1, UNCUT, false, 1.0), &e));
                rows.push(fail(row(1, UNCUT_MITIGATED, false, 1.0), &e));
            }
        }
    }
    rows
}

/// Runs the whole grid on a bounded pool. Rows come back in job order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    run_experiment_in(cfg, None)
}

fn run_experiment_in(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Vec<Row>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.resolved_workers()?)
        .build()
        .map_err(|e| Error::Parameter(format!("worker pool: {e}")))?;
    let jobs = jobs(cfg);
    let per_job: Vec<Vec<Row>> = pool.install(|| jobs.par_iter().map(|&j| run_job(cfg, j, out_dir)).collect());
    Ok(per_job.into_iter().flatten().collect())
}

/// Runs the grid and writes the CSV into the output directory.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(PathBuf, Vec<Row>)> {
    run_sweep_in(cfg, &cfg.resolved_output_dir())
}

/// As `run_sweep`, writing into `dir` regardless of config or environment.
pub fn run_sweep_in(cfg: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, Vec<Row>)> {
    fs::create_dir_all(dir)?;
    let rows = run_experiment_in(cfg, Some(dir))?;
    let path = dir.join(&cfg.csv_name);
    write_rows(&rows, fs::File::create(&path)?)?;
    Ok((path, rows))
}

pub fn write_rows<W: Write>(rows: &[Row], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<Row>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Aggregate over trials of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub noise_kind: String,
    pub noise_params: String,
    pub fitter: String,
    pub devt: bool,
    pub fraction: f64,
    pub trials: usize,
    pub failed: usize,
    pub mean_trace_distance: Option<f64>,
    pub std_trace_distance: Option<f64>,
    pub mean_pre_norm_mass: Option<f64>,
}

/// Groups rows by grid point in first-appearance order.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    type Key = (usize, String, String, String, bool, u64);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.n,
            r.noise_kind.clone(),
            r.noise_params.clone(),
            r.fitter.clone(),
            r.devt,
            r.fraction.to_bits(),
        );
        let group = groups.entry(key.clone()).or_default();
        if group.is_empty() {
            order.push(key);
        }
        group.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let tds: Vec<f64> = group.iter().filter_map(|r| r.trace_distance.filter(|_| r.is_ok())).collect();
            let masses: Vec<f64> = group.iter().filter_map(|r| r.pre_norm_mass.filter(|_| r.is_ok())).collect();
            let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            let m = mean(&tds);
            let std = m.map(|m| (tds.iter().map(|x| (x - m).powi(2)).sum::<f64>() / tds.len() as f64).sqrt());
            let (n, noise_kind, noise_params, fitter, devt, fraction) = key;
            SummaryRow {
                n,
                noise_kind,
                noise_params,
                fitter,
                devt,
                fraction: f64::from_bits(fraction),
                trials: group.len(),
                failed: group.len() - tds.len(),
                mean_trace_distance: m,
                std_trace_distance: std,
                mean_pre_norm_mass: mean(&masses),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in summary {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Fixed-width text table for terminals.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5}"));
    let mut s = format!(
        "{:>3} {:<20} {:<34} {:<10} {:<5} {:>5} {:>6} {:>9} {:>9} {:>9}\n",
        "n", "noise", "params", "fitter", "devt", "f", "trials", "mean_td", "std_td", "mass"
    );
    for r in summary {
        s.push_str(&format!(
            "{:>3} {:<20} {:<34} {:<10} {:<5} {:>5.2} {:>6} {:>9} {:>9} {:>9}\n",
            r.n,
            r.noise_kind,
            r.noise_params,
            r.fitter,
            r.devt,
            r.fraction,
            format!("{}/{}", r.trials - r.failed, r.trials),
            opt(r.mean_trace_distance),
            opt(r.std_trace_distance),
            opt(r.mean_pre_norm_mass),
        ));
    }
    s
}
