mod config;
mod experiment;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use graylearn::{
    bound_gl, bound_standard, checkpoint_load, checkpoint_save, evaluate, lambda_threshold,
    load_csv, save_csv, BoundInputs, Error, LossMethod, OodLabeling,
};

use config::ExperimentConfig;
use experiment::{
    aggregate_row, prepare, result_row, result_row_header, run_one, write_atomic, RunResult,
    AGGREGATE_HEADER,
};

#[derive(Parser)]
#[command(name = "gl", about = "Reproducible experiments for training on contaminated data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files and checkpoints.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's seed list, e.g. --seeds 1,2,3.
    #[arg(long)]
    seeds: Option<String>,
    /// Number of worker threads for seed-level parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured method over all seeds and evaluate each run.
    Train(RunArgs),
    /// Compare the blended, standard, complementary, and fixed-blend losses
    /// on identical contaminated data.
    Ablate(RunArgs),
    /// Sweep the contamination proportion for the blended and standard
    /// losses under both labeling schemes.
    SweepAlpha {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated contamination proportions.
        #[arg(long, default_value = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")]
        alphas: String,
    },
    /// Evaluate generalization bounds from a structured inputs file.
    Bounds {
        /// Inputs file; one evaluation per line of key=value tokens.
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Emit 20-bin reliability tables for the blended and standard losses on
    /// the same contaminated run.
    Calibrate(RunArgs),
    /// Construct the contaminated training set and export it as CSV.
    Mix(RunArgs),
    /// Evaluate a checkpoint on a CSV test set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test data CSV; must be purely in-distribution.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long, default_value_t = true)]
        has_header: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Ablate(args) => cmd_ablate(&args),
        Command::SweepAlpha { run, alphas } => cmd_sweep_alpha(&run, &alphas),
        Command::Bounds { inputs, out } => cmd_bounds(&inputs, &out),
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::Mix(args) => cmd_mix(&args),
        Command::Eval {
            checkpoint,
            data,
            label_column,
            has_header,
            out,
        } => cmd_eval(&checkpoint, &data, &label_column, has_header, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.message.fmt(f)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        self.code
    }

    fn config(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_CONFIG,
        }
    }

    fn io(e: std::io::Error) -> Self {
        CliError {
            message: e.to_string(),
            code: 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NumericAbort { .. } | Error::Numeric(_) => EXIT_NUMERIC,
            Error::Parse { .. } | Error::Usage(_) => EXIT_CONFIG,
            _ => 1,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

type CliResult = Result<(), CliError>;

/// Loaded config plus the provenance line embedded in every output CSV.
struct LoadedConfig {
    cfg: ExperimentConfig,
    stamp: String,
}

fn load_config(args: &RunArgs) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(CliError::io)?;
    let mut cfg = ExperimentConfig::parse(&text)
        .map_err(|e| CliError::config(format!("{e} (in {})", args.config.display())))?;
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds
            .split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::config("invalid --seeds list"))?;
        if cfg.seeds.is_empty() {
            return Err(CliError::config("--seeds list is empty"));
        }
    }
    if let Some(threads) = args.threads {
        // Ignore failure: the global pool can only be built once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let hash = hasher.finalize();
    let hex: String = hash.iter().take(8).map(|b| format!("{b:02x}")).collect();
    let seeds = cfg
        .seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let stamp = format!("# config_hash={hex} seeds={seeds}\n");
    Ok(LoadedConfig { cfg, stamp })
}

/// Run one (method, alpha, labeling) cell per seed, in parallel, preserving
/// seed order in the output.
fn run_cells(
    cfg: &ExperimentConfig,
    cells: &[(LossMethod, f64, OodLabeling, u64)],
) -> Result<Vec<RunResult>, CliError> {
    use rayon::prelude::*;
    cells
        .par_iter()
        .map(|&(method, alpha, labeling, seed)| {
            run_one(cfg, method, alpha, labeling, seed).map_err(CliError::from)
        })
        .collect()
}

fn cmd_train(args: &RunArgs) -> CliResult {
    let LoadedConfig { cfg, stamp } = load_config(args)?;
    let cells: Vec<_> = cfg
        .seeds
        .iter()
        .map(|&s| (cfg.train.method, cfg.mixture.alpha, cfg.mixture.labeling, s))
        .collect();
    let results = run_cells(&cfg, &cells)?;
    let mut csv = stamp;
    csv.push_str(result_row_header());
    for r in &results {
        csv.push_str(&result_row(r));
    }
    std::fs::create_dir_all(&args.out).map_err(CliError::io)?;
    write_atomic(&args.out.join("train.csv"), &csv).map_err(CliError::io)?;
    for r in &results {
        let path = args.out.join(format!("checkpoint_seed{}.glck", r.seed));
        checkpoint_save(&r.record.params, &path)?;
    }
    Ok(())
}

const ABLATION_METHODS: [LossMethod; 4] = [
    LossMethod::Gl,
    LossMethod::Standard,
    LossMethod::Nl,
    LossMethod::StandardPlusNl,
];

fn cmd_ablate(args: &RunArgs) -> CliResult {
    let LoadedConfig { cfg, stamp } = load_config(args)?;
    let mut cells = Vec::new();
    for &method in &ABLATION_METHODS {
        for &seed in &cfg.seeds {
            cells.push((method, cfg.mixture.alpha, cfg.mixture.labeling, seed));
        }
    }
    let results = run_cells(&cfg, &cells)?;
    let mut csv = stamp;
    csv.push_str(AGGREGATE_HEADER);
    for &method in &ABLATION_METHODS {
        let group: Vec<&RunResult> = results.iter().filter(|r| r.method == method).collect();
        csv.push_str(&aggregate_row(
            method,
            cfg.mixture.alpha,
            cfg.mixture.labeling,
            &group,
        ));
    }
    write_atomic(&args.out.join("ablate.csv"), &csv).map_err(CliError::io)?;
    Ok(())
}

fn cmd_sweep_alpha(args: &RunArgs, alphas: &str) -> CliResult {
    let LoadedConfig { cfg, stamp } = load_config(args)?;
    let alphas: Vec<f64> = alphas
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::config("invalid --alphas list"))?;
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(CliError::config("alphas must lie in [0,1]"));
    }
    let methods = [LossMethod::Gl, LossMethod::Standard];
    let labelings = [OodLabeling::Specific, OodLabeling::Random];
    let mut cells = Vec::new();
    for &alpha in &alphas {
        for &method in &methods {
            for &labeling in &labelings {
                for &seed in &cfg.seeds {
                    cells.push((method, alpha, labeling, seed));
                }
            }
        }
    }
    let results = run_cells(&cfg, &cells)?;
    let mut csv = stamp;
    csv.push_str(AGGREGATE_HEADER);
    for &alpha in &alphas {
        for &method in &methods {
            for &labeling in &labelings {
                let group: Vec<&RunResult> = results
                    .iter()
                    .filter(|r| r.method == method && r.alpha == alpha && r.labeling == labeling)
                    .collect();
                csv.push_str(&aggregate_row(method, alpha, labeling, &group));
            }
        }
    }
    write_atomic(&args.out.join("sweep.csv"), &csv).map_err(CliError::io)?;
    Ok(())
}

fn cmd_calibrate(args: &RunArgs) -> CliResult {
    let LoadedConfig { cfg, stamp } = load_config(args)?;
    let methods = [LossMethod::Gl, LossMethod::Standard];
    let mut cells = Vec::new();
    for &method in &methods {
        for &seed in &cfg.seeds {
            cells.push((method, cfg.mixture.alpha, cfg.mixture.labeling, seed));
        }
    }
    let results = run_cells(&cfg, &cells)?;
    let mut summary = stamp.clone();
    summary.push_str("method,seed,accuracy,ece\n");
    for &method in &methods {
        let group: Vec<&RunResult> = results.iter().filter(|r| r.method == method).collect();
        for r in &group {
            writeln!(
                summary,
                "{},{},{},{}",
                method.name(),
                r.seed,
                r.report.accuracy,
                r.report.ece
            )
            .expect("string write");
        }
        // Reliability table from the first seed's run.
        let first = group.first().expect("seed list is nonempty");
        let mut table = stamp.clone();
        table.push_str(&first.report.bins.to_csv());
        let path = args.out.join(format!("reliability_{}.csv", method.name()));
        write_atomic(&path, &table).map_err(CliError::io)?;
    }
    write_atomic(&args.out.join("calibrate.csv"), &summary).map_err(CliError::io)?;
    Ok(())
}

fn cmd_mix(args: &RunArgs) -> CliResult {
    let LoadedConfig { cfg, .. } = load_config(args)?;
    let seed = cfg.seeds[0];
    let data = prepare(&cfg, cfg.mixture.alpha, cfg.mixture.labeling, seed)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io)?;
    let tmp = args.out.join("mixed.csv.tmp");
    save_csv(&data.train, &tmp)?;
    std::fs::rename(&tmp, args.out.join("mixed.csv")).map_err(CliError::io)?;
    let tmp = args.out.join("test.csv.tmp");
    save_csv(&data.test, &tmp)?;
    std::fs::rename(&tmp, args.out.join("test.csv")).map_err(CliError::io)?;
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    data: &Path,
    label_column: &str,
    has_header: bool,
    out: &Path,
) -> CliResult {
    let params = checkpoint_load(checkpoint)?;
    let test = load_csv(data, label_column, has_header)?;
    let report = evaluate(&params, &test)?;
    let mut csv = String::from("accuracy,ece\n");
    writeln!(csv, "{},{}", report.accuracy, report.ece).expect("string write");
    write_atomic(&out.join("eval.csv"), &csv).map_err(CliError::io)?;
    write_atomic(&out.join("reliability.csv"), &report.bins.to_csv()).map_err(CliError::io)?;
    Ok(())
}

fn parse_bound_line(line: &str) -> Result<BoundInputs, String> {
    let mut inputs = BoundInputs {
        alpha: f64::NAN,
        n_id: 0,
        n_ood: 0,
        input_bound: f64::NAN,
        lipschitz: f64::NAN,
        loss_bound: f64::NAN,
        depth: 0,
        frobenius_bounds: Vec::new(),
        k: 0,
        lambda: f64::NAN,
        log_sum_exp_bound: 0.0,
        delta: f64::NAN,
        discrepancy: f64::NAN,
    };
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{token}'"))?;
        let bad = || format!("cannot parse value '{value}' for '{key}'");
        match key {
            "alpha" => inputs.alpha = value.parse().map_err(|_| bad())?,
            "n_id" => inputs.n_id = value.parse().map_err(|_| bad())?,
            "n_ood" => inputs.n_ood = value.parse().map_err(|_| bad())?,
            "B" => inputs.input_bound = value.parse().map_err(|_| bad())?,
            "L" => inputs.lipschitz = value.parse().map_err(|_| bad())?,
            "c" => inputs.loss_bound = value.parse().map_err(|_| bad())?,
            "d" => inputs.depth = value.parse().map_err(|_| bad())?,
            "M" => {
                inputs.frobenius_bounds = value
                    .split(',')
                    .map(|v| v.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?
            }
            "K" => inputs.k = value.parse().map_err(|_| bad())?,
            "lambda" => inputs.lambda = value.parse().map_err(|_| bad())?,
            "z" => inputs.log_sum_exp_bound = value.parse().map_err(|_| bad())?,
            "delta" => inputs.delta = value.parse().map_err(|_| bad())?,
            "d_h" => inputs.discrepancy = value.parse().map_err(|_| bad())?,
            other => return Err(format!("unknown key '{other}'")),
        }
    }
    inputs.validate().map_err(|e| e.to_string())?;
    Ok(inputs)
}

fn cmd_bounds(inputs_path: &Path, out: &Path) -> CliResult {
    let text = std::fs::read_to_string(inputs_path).map_err(CliError::io)?;
    let mut csv = String::from("row,bound_standard,bound_gl,lambda_threshold,tighter,error\n");
    let mut had_error = false;
    let mut row_no = 0usize;
    for line in text.lines() {
        let line = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        row_no += 1;
        match parse_bound_line(line) {
            Ok(inp) => {
                let standard = bound_standard(&inp).expect("validated");
                let weighted = bound_gl(&inp).expect("validated");
                let threshold = lambda_threshold(
                    inp.input_bound,
                    inp.depth,
                    &inp.frobenius_bounds,
                    inp.lipschitz,
                    inp.k,
                    inp.log_sum_exp_bound,
                );
                let tighter = inp.lambda <= threshold;
                writeln!(
                    csv,
                    "{row_no},{standard},{weighted},{threshold},{tighter},"
                )
                .expect("string write");
            }
            Err(msg) => {
                had_error = true;
                writeln!(csv, "{row_no},,,,,{msg}").expect("string write");
            }
        }
    }
    write_atomic(&out.join("bounds.csv"), &csv).map_err(CliError::io)?;
    if had_error {
        return Err(CliError::config("one or more bound input rows were invalid"));
    }
    Ok(())
}
