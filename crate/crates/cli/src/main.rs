use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use missom::bench::{format_summary, run_benchmark, summarize, write_rows, Algorithm, BenchmarkPlan, DataSource, MethodConfig};
use missom::{io, GridSpec, InitStrategy, Mechanism, MixtureSpec, Topology, VisitOrder};
use missom_cli::{report_json, run_evaluate, run_pipeline, EvalConfig, Lambda0, RunConfig, ScheduleArgs};

/// Self-organizing maps for data with missing values.
#[derive(Parser)]
#[command(name = "missom", version, about)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Gaussian mixture with constant within-group correlation.
    Datagen(DatagenArgs),
    /// Add Gaussian noise with sd equal to a tenth of each column mean.
    Perturb(PerturbArgs),
    /// Mask entries of a complete data file under MCAR, MAR or MNAR.
    Ampute(AmputeArgs),
    /// Train a map (and impute) with one of the available methods.
    Train(TrainArgs),
    /// Score an existing codebook and completed data file.
    Evaluate(EvaluateArgs),
    /// Run replicated experiments over rates, mechanisms and methods.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct DatagenArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = 0.5)]
    correlation: f64,
    #[arg(long, default_value_t = 5.0)]
    mean_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the group of every row.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    /// Complete data file, e.g. the 178x13 UCI wines table with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AmputeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rate: f64,
    /// mcar, mar or mnar
    #[arg(long, default_value = "mcar")]
    mechanism: Mechanism,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Amputed data, masked entries written as NA.
    #[arg(long)]
    out: PathBuf,
    /// Original values at masked positions as row,col,value (0-based).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Explicit 0/1 mask.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = 16)]
    rows: usize,
    #[arg(long, default_value_t = 14)]
    cols: usize,
    /// hex or rect
    #[arg(long, default_value = "hex")]
    topology: Topology,
}

impl GridArgs {
    fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.rows, self.cols, self.topology)?)
    }
}

#[derive(Args, Clone)]
struct ScheduleFlags {
    /// Number of epochs T.
    #[arg(long)]
    epochs: Option<usize>,
    /// Starting radius, or 'auto' for the 2/3 quantile of neuron distances.
    #[arg(long)]
    lambda0: Option<Lambda0>,
    #[arg(long)]
    lambda_end: Option<f64>,
    /// Learning step of the first epoch.
    #[arg(long)]
    rate_start: Option<f64>,
    #[arg(long)]
    rate_end: Option<f64>,
}

impl From<&ScheduleFlags> for ScheduleArgs {
    fn from(f: &ScheduleFlags) -> Self {
        ScheduleArgs {
            epochs: f.epochs,
            lambda0: f.lambda0,
            lambda_end: f.lambda_end,
            rate_start: f.rate_start,
            rate_end: f.rate_end,
        }
    }
}

#[derive(Args, Clone)]
struct MethodFlags {
    /// Outer iterations of misssom-basic.
    #[arg(long, default_value_t = 10)]
    outer_iters: usize,
    /// Donors used by knn.
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    /// Initial imputation: mean or median.
    #[arg(long, default_value = "mean")]
    init: InitStrategy,
    /// Present rows in a fresh random order every epoch (misssom only).
    #[arg(long)]
    shuffle: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// som, misssom, misssom-basic, cottrell, deletion, mean or knn
    #[arg(long, default_value = "misssom")]
    algorithm: Algorithm,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    schedule: ScheduleFlags,
    #[command(flatten)]
    method: MethodFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// True values at masked positions, enables the imputation error.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Class labels, enables the adjusted Rand index.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    completed: Option<PathBuf>,
    /// Metrics as JSON; always printed to stdout as well.
    #[arg(long)]
    report: Option<PathBuf>,
    /// U-matrix heatmap with hit counts.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long, default_value = "hex")]
    topology: Topology,
    #[arg(long)]
    completed: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Complete base table to perturb per replicate; a Gaussian mixture is
    /// generated when absent.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Rows of each generated mixture.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.2,0.4")]
    rates: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "mcar,mar,mnar")]
    mechanisms: Vec<Mechanism>,
    #[arg(long, value_delimiter = ',', default_value = "misssom,cottrell,deletion,mean,knn")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    schedule: ScheduleFlags,
    #[command(flatten)]
    method: MethodFlags,
    /// One CSV line per cell and replicate.
    #[arg(long)]
    out: PathBuf,
    /// Per-cell mean (sd) table; printed to stdout as well.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(f.flush()?)
}

fn visit(shuffle: bool) -> VisitOrder {
    if shuffle {
        VisitOrder::Shuffled
    } else {
        VisitOrder::Sequential
    }
}

fn datagen(a: DatagenArgs) -> Result<()> {
    let spec = MixtureSpec {
        n: a.n,
        p: a.p,
        groups: a.groups,
        correlation: a.correlation,
        mean_sd: a.mean_sd,
        seed: a.seed,
    };
    let (x, labels) = missom::gen_gaussian_mixture(&spec)?;
    let header: Vec<String> = (1..=a.p).map(|j| format!("x{j}")).collect();
    let mut f = create(&a.out)?;
    io::write_matrix(&mut f, &header, &x)?;
    f.flush()?;
    if let Some(path) = a.labels {
        let mut f = create(&path)?;
        io::write_labels(&mut f, &labels)?;
        f.flush()?;
    }
    Ok(())
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let (header, x) = io::read_matrix(open(&a.input)?).with_context(|| format!("reading {}", a.input.display()))?;
    let y = missom::perturb_dataset(x.view(), a.seed)?;
    let mut f = create(&a.out)?;
    io::write_matrix(&mut f, &header, &y)?;
    Ok(f.flush()?)
}

fn ampute(a: AmputeArgs) -> Result<()> {
    let (header, x) = io::read_matrix(open(&a.input)?).with_context(|| format!("reading {}", a.input.display()))?;
    let spec = missom::AmputationSpec {
        rate: a.rate,
        mechanism: a.mechanism,
        seed: a.seed,
    };
    let (data, truth) = missom::ampute(x.view(), &spec)?;
    let mut f = create(&a.out)?;
    io::write_data(&mut f, &header, &data)?;
    f.flush()?;
    if let Some(path) = a.truth {
        let mut f = create(&path)?;
        io::write_imputations(&mut f, &truth)?;
        f.flush()?;
    }
    if let Some(path) = a.mask_out {
        let mask = data.mask().mapv(|o| if o { 1.0 } else { 0.0 });
        let mut f = create(&path)?;
        io::write_matrix(&mut f, &header, &mask)?;
        f.flush()?;
    }
    log::info!("masked {} of {} entries", data.missing_count(), data.n() * data.p());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut config = RunConfig::new(a.algorithm, a.grid.grid()?, a.input);
    config.schedule = (&a.schedule).into();
    config.seed = a.seed;
    config.outer_iters = a.method.outer_iters;
    config.knn_k = a.method.knn_k;
    config.init = a.method.init;
    config.visit = visit(a.method.shuffle);
    config.mask = a.mask;
    config.truth = a.truth;
    config.labels = a.labels;
    config.codebook_out = a.codebook;
    config.completed_out = a.completed;
    config.report_out = a.report;
    config.svg_out = a.svg;
    let report = run_pipeline(&config)?;
    print!("{}", report_json(&report, config.algorithm.name(), Some(config.seed))?);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let report = run_evaluate(&EvalConfig {
        input: a.input,
        mask: a.mask,
        codebook: a.codebook,
        topology: a.topology,
        completed: a.completed,
        truth: a.truth,
        labels: a.labels,
    })?;
    let json = report_json(&report, "evaluate", None)?;
    if let Some(path) = a.report {
        write_text(&path, &json)?;
    }
    print!("{json}");
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let grid = a.grid.grid()?;
    let source = match &a.base {
        Some(path) => DataSource::Perturbed(io::read_matrix(open(path)?).with_context(|| format!("reading {}", path.display()))?.1),
        None => DataSource::Mixture(MixtureSpec {
            n: a.n,
            ..Default::default()
        }),
    };
    let plan = BenchmarkPlan {
        replicates: a.replicates,
        rates: a.rates,
        mechanisms: a.mechanisms,
        algorithms: a.algorithms,
        master_seed: a.seed,
        source,
        method: MethodConfig {
            grid,
            schedule: ScheduleArgs::from(&a.schedule).build(&grid, 0)?,
            outer_iters: a.method.outer_iters,
            knn_k: a.method.knn_k,
            init: a.method.init,
            visit: visit(a.method.shuffle),
        },
    };
    let rows = run_benchmark(&plan)?;
    let mut f = create(&a.out)?;
    write_rows(&mut f, &rows)?;
    f.flush()?;
    let text = format_summary(&summarize(&rows));
    if let Some(path) = a.summary {
        write_text(&path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn main() -> std::process::ExitCode {
    match run() {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // configured from flags only
    env_logger::Builder::new().filter_level(level).init();
    match cli.command {
        Command::Datagen(a) => datagen(a),
        Command::Perturb(a) => perturb(a),
        Command::Ampute(a) => ampute(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
    }
}
