use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rebalance_core::io::{
    read_trial_csv, regress_rows, to_json, write_trial_csv, AllocationDocument, ProblemDocument, RegressionDocument,
    RegressionModel, SimulationDocument,
};
use rebalance_core::market_invariant::ipf::{ipf_with, StopRule};
use rebalance_core::simulation::{run_study, summarize_study};
use rebalance_core::{
    analytic_solve, banker_rebalance, greedy_allocate, grouped_hybrid, linear_rebalance, proportional_then_banker,
    Error, PartitionTree,
};

#[derive(Parser)]
#[command(name = "rebalance", version, about = "Internal rebalancing of pooled portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rebalance one problem document.
    Solve(SolveArgs),
    /// Run a return-path simulation study and write per-trial CSV.
    Simulate(SimulateArgs),
    /// Regress the shadow difference in a simulation CSV.
    Regress(RegressArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Process {
    Banker,
    Linear,
    Greedy,
    ProportionalBanker,
    MarketInvariant,
    Analytic,
    Hybrid,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    process: Process,
    /// Problem document with keys M, a, p.
    #[arg(long)]
    input: PathBuf,
    /// Allocation document; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// 1-based banker portfolio; overrides the document.
    #[arg(long)]
    banker_index: Option<usize>,
    /// Absolute stopping gap for the market-invariant iteration.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    allow_negative: bool,
    #[arg(long)]
    enforce_zero_pattern: bool,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct RegressArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// v, v_r or v_r_r2.
    #[arg(long, default_value = "v")]
    model: String,
    /// Result document; defaults to the input path with a .regression.json extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Simulate(args) => simulate(args),
        Command::Regress(args) => regress(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_infeasible() { 2 } else { 1 })
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let mut doc = ProblemDocument::parse(&read(&args.input)?)?;
    doc.allow_negative |= args.allow_negative;
    let problem = doc.to_problem()?;
    let banker = || doc.banker_config(args.banker_index.or(doc.banker_index));

    let output = match args.process {
        Process::Banker => AllocationDocument::new(&banker_rebalance(&problem, banker()?)?, None, None),
        Process::ProportionalBanker => {
            AllocationDocument::new(&proportional_then_banker(&problem, banker()?)?, None, None)
        }
        Process::Linear => AllocationDocument::new(&linear_rebalance(&problem, doc.allow_negative)?, None, None),
        Process::Greedy => AllocationDocument::new(&greedy_allocate(&problem, args.enforce_zero_pattern)?, None, None),
        Process::MarketInvariant => {
            let stop = match (StopRule::default_for(&problem), args.tol, args.max_iter) {
                (StopRule::Gap { q, max_iter }, tol, iters) => StopRule::Gap {
                    q: tol.unwrap_or(q),
                    max_iter: iters.unwrap_or(max_iter),
                },
                (rule, _, _) => rule,
            };
            let (result, scaling, trace) = ipf_with(&problem, stop)?;
            AllocationDocument::new(&result, Some(&scaling), Some(&trace))
        }
        Process::Analytic => {
            let (result, scaling) = analytic_solve(&problem)?;
            AllocationDocument::new(&result, Some(&scaling), None)
        }
        Process::Hybrid => {
            let (m, n) = problem.shape();
            let tree = PartitionTree::halving(m, n)?;
            AllocationDocument::new(&grouped_hybrid(&problem, &tree)?, None, None)
        }
    };
    write(args.output.as_deref(), &output.to_json()?)
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let config = SimulationDocument::parse(&read(&args.config)?)?.to_config()?;
    let report = run_study(&config)?;
    if let Some((trial, err)) = report.failures.first() {
        eprintln!(
            "{} of {} trials failed; first was trial {}",
            report.failures.len(),
            config.n_trials,
            trial + 1
        );
        return Err(err.clone());
    }
    let process = config.process.name();
    let file = fs::File::create(&args.out).map_err(|e| Error::Io(format!("{}: {e}", args.out.display())))?;
    write_trial_csv(io::BufWriter::new(file), process, &report.results)?;

    let summary = summarize_study(process, &report.results);
    eprintln!(
        "{} trials of {process}, {} resampled",
        summary.n_trials, report.resampled
    );
    for series in &summary.series {
        eprintln!(
            "  {:<22} mean {:>9.4}  sd {:>8.4}  min {:>9.4}  max {:>9.4}",
            series.name, series.mean, series.sd, series.min, series.max
        );
    }
    if let Some(fraction) = summary.negative_difference_fraction {
        eprintln!("  negative differences: {fraction:.4}");
    }
    Ok(())
}

fn regress(args: RegressArgs) -> Result<(), Error> {
    let model: RegressionModel = args.model.parse()?;
    let file = fs::File::open(&args.input).map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    let rows = read_trial_csv(io::BufReader::new(file))?;
    let fit = regress_rows(&rows, model)?;
    println!("{fit}");
    let out = args.out.unwrap_or_else(|| args.input.with_extension("regression.json"));
    write(Some(&out), &to_json(&RegressionDocument::new(&args.model, &fit))?)
}
