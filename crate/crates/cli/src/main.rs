use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use setaside_cli::artifacts::ArtifactWriter;
use setaside_cli::config::{EquilibriumSection, PipelineConfig};
use setaside_cli::csv_io::{self, Schema};
use setaside_cli::error::StageExt;
use setaside_cli::pipeline::{self, Formats};
use setaside_cli::{reports, CliError};
use setaside_core::allocation::{brute_force_allocation, check_feasibility, solve_allocation, AllocationProblem};
use setaside_core::econometrics::{Response, Weighting};
use setaside_core::equilibrium::ValueDistribution;

#[derive(Parser)]
#[command(name = "setaside", version, about = "Set-aside procurement auctions: equilibrium, allocation, simulation and regression")]
struct Cli {
    /// Master seed; overrides the config's simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts [default: the config's out_dir, else `out`].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Reject unknown CSV columns and malformed rows (default).
    #[arg(long, global = true, conflicts_with = "lax")]
    strict: bool,
    /// Keep unknown CSV columns and skip malformed rows with a warning.
    #[arg(long, global = true)]
    lax: bool,
    /// `text` adds aligned tables next to the CSVs and prints them.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Solve or verify bidding equilibria.
    Equilibrium {
        #[command(subcommand)]
        action: EquilibriumAction,
    },
    /// Determine winners of one solicitation given as JSON.
    Allocate {
        /// Solicitation, bids, vendors and capacities as JSON.
        problem: PathBuf,
        /// Use the exhaustive oracle instead of branch and bound.
        #[arg(long)]
        brute_force: bool,
        /// Report attainable quantities instead of awards.
        #[arg(long, conflicts_with = "brute_force")]
        feasibility: bool,
    },
    /// Simulate an auction campaign and write the bids file.
    Simulate {
        /// Overrides the number of auctions.
        #[arg(long)]
        auctions: Option<u32>,
    },
    /// Fit the bidder-count and price regressions to a bids file.
    Regress {
        #[command(flatten)]
        input: BidsInput,
        /// Repeatable; defaults to the config's selection.
        #[arg(long = "response", value_enum)]
        responses: Vec<ResponseArg>,
        /// Repeatable; defaults to the config's selection.
        #[arg(long = "weighting", value_enum)]
        weightings: Vec<WeightingArg>,
    },
    /// Summary table, win shares and plot data for a bids file.
    Report {
        #[command(flatten)]
        input: BidsInput,
    },
    /// Everything: equilibria, simulation, reports, regressions, manifest.
    Pipeline,
    /// Print the effective configuration as JSON, a starting point for `--config`.
    Config,
}

#[derive(Subcommand)]
enum EquilibriumAction {
    Solve(EquilibriumArgs),
    /// Solve, then check first-order conditions and best-response gaps.
    Verify(EquilibriumArgs),
}

#[derive(Args)]
struct EquilibriumArgs {
    /// Set-aside levels; repeatable [default: 0, 0.5, 1].
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    /// Lower end of uniform costs for both bidder types.
    #[arg(long, requires = "hi")]
    lo: Option<f64>,
    #[arg(long, requires = "lo")]
    hi: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    /// Largest accepted boundary mismatch of the shooting solver.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct BidsInput {
    /// Bids CSV in the layout written by `simulate`.
    #[arg(long)]
    bids: PathBuf,
    /// Monthly wholesale prices to re-join; needs --usda too.
    #[arg(long, requires = "usda")]
    wholesale: Option<PathBuf>,
    /// Annual USDA prices to re-join; needs --wholesale too.
    #[arg(long, requires = "wholesale")]
    usda: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResponseArg {
    NBidders,
    LogOffer,
    LogWin,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Quantity,
    ProductEqualized,
    Unit,
}

struct Context {
    config: PipelineConfig,
    out_dir: PathBuf,
    schema: Schema,
    formats: Formats,
    print_text: bool,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default_for(0),
        };
        if let Some(seed) = cli.seed {
            config.simulation.seed = seed;
        }
        let out_dir = cli.out_dir.clone().or_else(|| config.paths.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        let text = match cli.format {
            Some(f) => f == Format::Text,
            None => config.output.text,
        };
        Ok(Self {
            schema: if cli.lax { Schema::Lax } else { Schema::Strict },
            formats: Formats { text, plots: config.output.plots },
            print_text: cli.format == Some(Format::Text),
            out_dir,
            config,
        })
    }

    fn writer(&self) -> Result<ArtifactWriter, CliError> {
        ArtifactWriter::create(&self.out_dir)
    }

    fn show(&self, text: &str) {
        if self.print_text {
            print!("{text}");
        }
    }
}

fn equilibrium_section(ctx: &Context, args: &EquilibriumArgs) -> EquilibriumSection {
    let mut s = ctx.config.equilibrium.clone();
    if !args.alphas.is_empty() {
        s.alphas = args.alphas.clone();
    }
    if let (Some(lo), Some(hi)) = (args.lo, args.hi) {
        s.small_cost = ValueDistribution::uniform(lo, hi);
        s.large_cost = ValueDistribution::uniform(lo, hi);
    }
    if let Some(g) = args.grid_size {
        s.grid_size = g;
    }
    if let Some(t) = args.tolerance {
        s.tolerance = t;
    }
    s
}

fn validate_section(s: &EquilibriumSection) -> Result<(), CliError> {
    let mut probe = PipelineConfig::default_for(0);
    probe.equilibrium = s.clone();
    probe.validate()
}

fn run_equilibrium(ctx: &Context, action: &EquilibriumAction) -> Result<(), CliError> {
    let (args, verify) = match action {
        EquilibriumAction::Solve(a) => (a, false),
        EquilibriumAction::Verify(a) => (a, true),
    };
    let section = equilibrium_section(ctx, args);
    validate_section(&section)?;
    let solved = pipeline::solve_equilibria(&section)?;
    let mut w = ctx.writer()?;
    pipeline::write_equilibria(&mut w, &solved, ctx.formats)?;
    for (_, sol) in &solved {
        ctx.show(&reports::equilibrium_text(sol));
    }
    let mut failed = Vec::new();
    if verify {
        let checks: Vec<_> = solved.iter().map(|(m, s)| pipeline::verify(m, s)).collect();
        w.write("equilibrium_verify.csv", pipeline::verification_csv(&checks).as_bytes())?;
        for c in &checks {
            println!(
                "set-aside {:>5}: max FOC residual {:.2e}, best-response gap small {:.3}%, large {:.3}%  {}",
                reports::percent(c.alpha),
                c.max_foc_residual,
                100.0 * c.gap_small,
                100.0 * c.gap_large,
                if c.passed() { "PASS" } else { "FAIL" }
            );
            if !c.passed() {
                failed.push(reports::percent(c.alpha));
            }
        }
    }
    w.finish()?;
    if !failed.is_empty() {
        return Err(CliError::solver(format!("verification failed at set-aside {}", failed.join(", "))));
    }
    Ok(())
}

fn run_allocate(ctx: &Context, path: &Path, brute_force: bool, feasibility: bool) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let problem: AllocationProblem =
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut w = ctx.writer()?;
    if feasibility {
        let report = check_feasibility(&problem)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        w.write("feasibility.json", json.as_bytes())?;
        ctx.show(&json);
    } else {
        let result = if brute_force { brute_force_allocation(&problem)? } else { solve_allocation(&problem)? };
        let json = serde_json::to_string_pretty(&result).expect("result serializes") + "\n";
        w.write("allocation.json", json.as_bytes())?;
        let mut rows = vec![["Item", "Vendor", "Price", "Lbs"].map(String::from).to_vec()];
        for (item, a) in &result.awards {
            rows.push(vec![item.to_string(), a.vendor_id.to_string(), a.price_per_lb.to_string(), a.quantity_lbs.to_string()]);
        }
        for item in &result.unawarded {
            rows.push(vec![item.to_string(), "-".into(), "-".into(), "-".into()]);
        }
        let table = format!("{}Total cost: {:.2}\n", reports::align(&rows), result.total_cost.dollars());
        if ctx.formats.text {
            w.write("allocation.txt", table.as_bytes())?;
        }
        ctx.show(&table);
    }
    w.finish()?;
    Ok(())
}

fn run_simulate(ctx: &Context, auctions: Option<u32>) -> Result<(), CliError> {
    let mut cfg = ctx.config.simulation.clone();
    if let Some(n) = auctions {
        cfg.n_auctions = n;
    }
    let sim = pipeline::simulate(&cfg)?;
    let mut w = ctx.writer()?;
    pipeline::write_bids(&mut w, &sim)?;
    w.finish()?;
    println!("{} bids from {} auctions written to {}", sim.records.len(), cfg.n_auctions, ctx.out_dir.display());
    Ok(())
}

fn run_regress(
    ctx: &Context,
    input: &BidsInput,
    responses: &[ResponseArg],
    weightings: &[WeightingArg],
) -> Result<(), CliError> {
    let table = pipeline::load_bids(&input.bids, input.wholesale.as_deref(), input.usda.as_deref(), ctx.schema).stage("load")?;
    let mut sel = ctx.config.regressions.clone();
    if !responses.is_empty() {
        sel.responses = responses
            .iter()
            .map(|r| match r {
                ResponseArg::NBidders => Response::NBidders,
                ResponseArg::LogOffer => Response::LogOffer,
                ResponseArg::LogWin => Response::LogWin,
            })
            .collect();
    }
    if !weightings.is_empty() {
        sel.weightings = weightings
            .iter()
            .map(|w| match w {
                WeightingArg::Quantity => Weighting::Quantity,
                WeightingArg::ProductEqualized => Weighting::ProductEqualized,
                WeightingArg::Unit => Weighting::Unit,
            })
            .collect();
    }
    let fits = pipeline::run_regressions(&table.records, &sel).stage("regress")?;
    let mut w = ctx.writer()?;
    pipeline::write_regressions(&mut w, &fits, ctx.formats)?;
    w.finish()?;
    let mut printed: Vec<Response> = Vec::new();
    for f in &fits {
        if !printed.contains(&f.spec.response) {
            printed.push(f.spec.response);
            let group: Vec<_> = fits.iter().filter(|g| g.spec.response == f.spec.response).collect();
            ctx.show(&reports::fit_table_text(&group));
            ctx.show("\n");
        }
    }
    Ok(())
}

fn run_report(ctx: &Context, input: &BidsInput) -> Result<(), CliError> {
    let table = pipeline::load_bids(&input.bids, input.wholesale.as_deref(), input.usda.as_deref(), ctx.schema).stage("load")?;
    let mut w = ctx.writer()?;
    pipeline::write_reports(&mut w, &table.records, ctx.formats)?;
    if ctx.schema == Schema::Lax && !table.extra_columns.is_empty() {
        // carried-along columns stay with the bids they came from
        let io = |e: csv::Error| CliError::validation(e.to_string());
        w.write_with("bids_normalized.csv", |buf| csv_io::write_bids(buf, &table).map_err(io))?;
    }
    w.finish()?;
    ctx.show(&reports::table1_text(&setaside_core::simulation::summary_statistics(&table.records)));
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Equilibrium { action } => run_equilibrium(&ctx, action),
        Command::Allocate { problem, brute_force, feasibility } => run_allocate(&ctx, problem, *brute_force, *feasibility),
        Command::Simulate { auctions } => run_simulate(&ctx, *auctions),
        Command::Regress { input, responses, weightings } => run_regress(&ctx, input, responses, weightings),
        Command::Report { input } => run_report(&ctx, input),
        Command::Pipeline => {
            let manifest = pipeline::run_pipeline(&ctx.config, &ctx.out_dir, ctx.schema, ctx.formats)?;
            println!("{} artifacts written to {}", manifest.artifacts.len(), ctx.out_dir.display());
            Ok(())
        }
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&ctx.config).expect("config serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
