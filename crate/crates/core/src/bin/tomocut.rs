use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tomocut::circuit::gen_cluster_unitary;
use tomocut::cut::{CutPoint, CutSpec, DEFAULT_MAX_FRAGMENT_QUBITS};
use tomocut::harness::{
    fit_all, format_summary, read_rows, run_sweep, summarize, write_summary, CircuitBundle, CutCircuit,
    ExperimentConfig, FitDoc,
};
use tomocut::knit::{full_distribution, trace_distance};
use tomocut::noise::NoiseConfig;
use tomocut::sim::ideal_distribution;
use tomocut::tomo::{collect_fragment_data, ConditionalDataset, Fitter, Shots};
use tomocut::{Error, Result};

/// Tomographic circuit cutting experiments.
///
/// `sweep` honours TOMOCUT_WORKERS and TOMOCUT_OUTPUT_DIR.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a random cluster circuit and its cut as JSON.
    Generate {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Explicit cut as QUBIT:AFTER_LAYER, repeatable. Default is the middle-layer cut.
        #[arg(long = "cut", value_parser = parse_cut)]
        cuts: Vec<CutPoint>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Simulate tomography data for every fragment.
    Collect {
        #[arg(long)]
        bundle: PathBuf,
        /// Noise config as a JSON file or inline JSON.
        #[arg(long)]
        noise: Option<String>,
        /// Shots per setting, or `exact`.
        #[arg(long, default_value = "10000")]
        shots: Shots,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "datasets")]
        out_dir: PathBuf,
    },
    /// Fit conditional tensors from one dataset.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "CLS")]
        fitter: Fitter,
        /// Readout error used by MEMCLS.
        #[arg(long, default_value_t = 0.0)]
        p_meas: f64,
        #[arg(long)]
        devt: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Contract fitted fragments into the full distribution.
    Reconstruct {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        fits: Vec<PathBuf>,
        /// Write `outcome,probability` rows here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the full grid from a config.
    Sweep {
        config: PathBuf,
    },
    /// Aggregate sweep CSVs over trials.
    Report {
        #[arg(num_args = 1.., required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn parse_cut(s: &str) -> std::result::Result<CutPoint, String> {
    let (q, l) = s.split_once(':').ok_or("expected QUBIT:AFTER_LAYER")?;
    Ok(CutPoint {
        qubit: q.trim().parse().map_err(|e| format!("{e}"))?,
        after_layer: l.trim().parse().map_err(|e| format!("{e}"))?,
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_bundle(path: &Path) -> Result<CutCircuit> {
    let bundle: CircuitBundle = serde_json::from_str(&fs::read_to_string(path)?)?;
    bundle.build(DEFAULT_MAX_FRAGMENT_QUBITS)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { n, layers, seed, cuts, out } => {
            let circuit = gen_cluster_unitary(n, layers, seed)?;
            let spec = if cuts.is_empty() {
                CutSpec::middle_layer(n, layers)?
            } else {
                CutSpec::new(cuts)
            };
            let cut = CutCircuit::new(circuit, spec, DEFAULT_MAX_FRAGMENT_QUBITS)?;
            eprintln!("{} fragments", cut.fragments.len());
            emit(&serde_json::to_string_pretty(&cut.to_doc())?, out.as_deref())
        }
        Command::Collect { bundle, noise, shots, seed, out_dir } => {
            let cut = load_bundle(&bundle)?;
            let noise: NoiseConfig = match noise {
                None => NoiseConfig::default(),
                Some(s) if s.trim_start().starts_with('{') => serde_json::from_str(&s)?,
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            };
            let spec = noise.build()?;
            fs::create_dir_all(&out_dir)?;
            for frag in &cut.fragments {
                let data = collect_fragment_data(frag, &spec, shots, tomocut::seed::derive(seed, &[frag.id as u64]))?;
                let path = out_dir.join(format!("fragment{}.txt", frag.id));
                data.write_to(fs::File::create(&path)?)?;
                eprintln!("{}", path.display());
            }
            Ok(())
        }
        Command::Fit { dataset, fitter, p_meas, devt, out } => {
            let data = ConditionalDataset::read_from(BufReader::new(fs::File::open(dataset)?))?;
            let noise = if p_meas > 0.0 {
                tomocut::noise::NoiseSpec::readout_only(p_meas)?
            } else {
                tomocut::noise::NoiseSpec::ideal()
            };
            let id = data.fragment_id;
            let tensors = fit_all(fitter, &[data], &noise, devt)?.remove(0);
            let doc = FitDoc::new(id, fitter, devt, &tensors);
            emit(&serde_json::to_string(&doc)?, out.as_deref())
        }
        Command::Reconstruct { bundle, fits, out } => {
            let cut = load_bundle(&bundle)?;
            let mut docs = fits
                .iter()
                .map(|p| Ok(serde_json::from_str::<FitDoc>(&fs::read_to_string(p)?)?))
                .collect::<Result<Vec<FitDoc>>>()?;
            docs.sort_by_key(|d| d.fragment_id);
            let ids: Vec<usize> = cut.fragments.iter().map(|f| f.id).collect();
            if docs.iter().map(|d| d.fragment_id).collect::<Vec<_>>() != ids {
                return Err(Error::Contraction(format!("need one fit per fragment {ids:?}")));
            }
            let tensors = docs.iter().map(FitDoc::tensors).collect::<Result<Vec<_>>>()?;
            let dist = full_distribution(&tensors, &cut.graph)?;
            let ideal = ideal_distribution(&cut.circuit)?;
            eprintln!("pre-normalization mass {:.6}", dist.pre_norm_mass);
            eprintln!("trace distance to ideal {:.6}", trace_distance(&dist.probabilities, &ideal)?);
            let n = cut.circuit.num_qubits();
            let mut text = String::from("outcome,probability\n");
            for (i, p) in dist.probabilities.iter().enumerate() {
                text.push_str(&format!("{i:0n$b},{p}\n"));
            }
            emit(&text, out.as_deref())
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (path, rows) = run_sweep(&cfg)?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            eprintln!("{} rows ({failed} failed) -> {}", rows.len(), path.display());
            print!("{}", format_summary(&summarize(&rows)));
            Ok(())
        }
        Command::Report { csv, out } => {
            let mut rows = Vec::new();
            for path in &csv {
                rows.extend(read_rows(fs::File::open(path)?)?);
            }
            let summary = summarize(&rows);
            print!("{}", format_summary(&summary));
            if let Some(p) = out {
                write_summary(&summary, fs::File::create(p)?)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
