use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use covsel::metrics::{confusion, f1};
use covsel_cli::config::{ExperimentConfig, TuningConfig};
use covsel_cli::io::{self, load_matrix_csv, GraphExport};
use covsel_cli::runner;
use covsel_cli::CliError;

#[derive(Parser)]
#[command(name = "covsel", version, about = "Graph selection experiments for Gaussian graphical models under latent confounding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output format for the results table.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generates a ground-truth graph spec and writes it as JSON.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Runs a config-driven experiment and writes the results table.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fits the case-study methods to an ingested data matrix.
    CaseStudy {
        /// Numeric CSV; rows are time points, columns are variables.
        #[arg(long)]
        data: PathBuf,
        /// One categorical label per variable.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Optional config supplying methods and tuning.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Scores an estimated edge list against a ground truth.
    Score {
        /// Estimated graph (graph JSON document).
        #[arg(long)]
        est: PathBuf,
        /// Truth: either a graph JSON document or a simulated spec JSON.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(dir) = out {
        cfg.output.dir = dir.display().to_string();
    }
    Ok(cfg)
}

fn with_threads<T>(threads: usize, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn cmd_simulate(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&common.config, common.seed, common.out.as_deref())?;
    let spec = runner::spec_from_config(&cfg)?;
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join("graph_spec.json");
    fs::write(&path, spec.to_json())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_run(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&common.config, common.seed, common.out.as_deref())?;
    if matches!(cfg.design, covsel_cli::config::Design::CaseStudy) {
        let paths = cfg.case_study.as_ref().expect("validated");
        let out = PathBuf::from(&cfg.output.dir);
        return cmd_case_study(
            Path::new(&paths.data),
            paths.labels.as_deref().map(Path::new),
            Some(common.config.as_path()),
            &out,
            common.threads,
        );
    }
    let records = with_threads(common.threads, || runner::run_experiment(&cfg))?;
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    // Resolved-config sidecar for provenance.
    let sidecar = dir.join("config.json");
    fs::write(&sidecar, cfg.to_json())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", sidecar.display())))?;
    let path = match common.format.as_str() {
        "json" => {
            let p = dir.join("results.json");
            fs::write(&p, io::results_to_json(&records))
                .map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display())))?;
            p
        }
        _ => {
            let p = dir.join("results.csv");
            io::write_results_csv(&records, &p)?;
            p
        }
    };
    println!("wrote {} ({} records)", path.display(), records.len());
    Ok(())
}

fn cmd_case_study(
    data: &Path,
    labels: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    threads: usize,
) -> Result<(), CliError> {
    let loaded = load_matrix_csv(data)?;
    let labels = labels.map(io::load_labels).transpose()?;
    let (methods, tuning) = match config {
        Some(p) => {
            let cfg = load_config(p, None, None)?;
            (cfg.methods.clone(), cfg.tuning.clone())
        }
        None => (
            vec![
                covsel_cli::config::MethodName::Glasso,
                covsel_cli::config::MethodName::Tglasso,
                covsel_cli::config::MethodName::Lvglasso,
            ],
            TuningConfig { mode: covsel_cli::config::TuningMode::Ebic, ..TuningConfig::default() },
        ),
    };
    let summary = with_threads(threads, || {
        runner::run_case_study(
            &loaded.data,
            loaded.column_names.as_deref(),
            labels.as_deref(),
            &methods,
            &tuning,
            out,
        )
    })?;
    println!(
        "wrote {} ({} methods, n {}, p {})",
        out.join("case_study_summary.json").display(),
        summary.methods.len(),
        summary.n,
        summary.p
    );
    Ok(())
}

fn load_truth_edges(path: &Path) -> Result<covsel::EdgeSet, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(spec) = covsel::simulate::GraphSpec::from_json(&text) {
        return Ok(spec.true_edges());
    }
    GraphExport::from_json(&text)?.edge_set()
}

fn cmd_score(est: &Path, truth: &Path, format: &str) -> Result<(), CliError> {
    let est_text = fs::read_to_string(est)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", est.display())))?;
    let est_edges = GraphExport::from_json(&est_text)?.edge_set()?;
    let truth_edges = load_truth_edges(truth)?;
    let c = confusion(&est_edges, &truth_edges).map_err(CliError::from_numeric)?;
    let score = f1(&c);
    match format {
        "json" => println!(
            "{}",
            serde_json::json!({
                "tp": c.tp, "fp": c.fp, "fn": c.fn_, "tn": c.tn, "f1": score
            })
        ),
        _ => {
            println!("tp,fp,fn,tn,f1");
            println!("{},{},{},{},{}", c.tp, c.fp, c.fn_, c.tn, score);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => cmd_simulate(common),
        Command::Run { common } => cmd_run(common),
        Command::CaseStudy { data, labels, config, out, threads } => {
            cmd_case_study(data, labels.as_deref(), config.as_deref(), out, *threads)
        }
        Command::Score { est, truth, format } => cmd_score(est, truth, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
