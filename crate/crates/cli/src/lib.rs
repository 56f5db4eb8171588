//! File-based pipeline behind the `missom` command.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use missom::bench::{run_method, Algorithm, MethodConfig};
use missom::io::{self, Table};
use missom::masked::assign;
use missom::metrics::{evaluate, MetricsReport};
use missom::svg::{hit_counts, render_u_matrix};
use missom::{Codebook, GridSpec, ImputationSet, InitStrategy, Topology, TrainingSchedule, VisitOrder};

/// Starting radius: the 2/3 distance quantile, or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda0 {
    Auto,
    Value(f64),
}

impl std::str::FromStr for Lambda0 {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Lambda0::Auto);
        }
        s.parse::<f64>()
            .map(Lambda0::Value)
            .map_err(|_| format!("expected 'auto' or a number, got '{s}'"))
    }
}

/// Schedule fields as given on the command line; `None` means the default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScheduleArgs {
    pub epochs: Option<usize>,
    pub lambda0: Option<Lambda0>,
    pub lambda_end: Option<f64>,
    pub rate_start: Option<f64>,
    pub rate_end: Option<f64>,
}

impl ScheduleArgs {
    pub fn build(&self, grid: &GridSpec, seed: u64) -> Result<TrainingSchedule> {
        let mut s = TrainingSchedule::for_grid(grid, seed);
        if let Some(t) = self.epochs {
            s.epochs = t;
        }
        match self.lambda0 {
            Some(Lambda0::Auto) => {
                s.radius_start = grid
                    .auto_radius()
                    .context("--lambda0 auto needs at least two neurons")?
            }
            Some(Lambda0::Value(v)) => s.radius_start = v,
            None => {}
        }
        if let Some(v) = self.lambda_end {
            s.radius_end = v;
        }
        if let Some(v) = self.rate_start {
            s.rate_start = v;
        }
        if let Some(v) = self.rate_end {
            s.rate_end = v;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub grid: GridSpec,
    pub schedule: ScheduleArgs,
    pub seed: u64,
    pub outer_iters: usize,
    pub knn_k: usize,
    pub init: InitStrategy,
    pub visit: VisitOrder,
    pub input: PathBuf,
    pub mask: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub codebook_out: Option<PathBuf>,
    pub completed_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub svg_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, grid: GridSpec, input: PathBuf) -> Self {
        RunConfig {
            algorithm,
            grid,
            schedule: ScheduleArgs::default(),
            seed: 0,
            outer_iters: missom::misssom::DEFAULT_OUTER_ITERS,
            knn_k: 5,
            init: InitStrategy::Mean,
            visit: VisitOrder::Sequential,
            input,
            mask: None,
            truth: None,
            labels: None,
            codebook_out: None,
            completed_out: None,
            report_out: None,
            svg_out: None,
        }
    }

    /// Checks everything that can be checked before reading data.
    pub fn validate(&self) -> Result<MethodConfig> {
        for path in [Some(&self.input), self.mask.as_ref(), self.truth.as_ref(), self.labels.as_ref()]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                bail!("input file {} does not exist", path.display());
            }
        }
        if self.outer_iters == 0 {
            bail!("--outer-iters must be positive");
        }
        if self.knn_k == 0 {
            bail!("--knn-k must be positive");
        }
        Ok(MethodConfig {
            grid: self.grid,
            schedule: self.schedule.build(&self.grid, self.seed)?,
            outer_iters: self.outer_iters,
            knn_k: self.knn_k,
            init: self.init,
            visit: self.visit,
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

/// Data file plus the optional explicit mask.
pub fn load_table(input: &Path, mask: Option<&Path>) -> Result<Table> {
    let table = io::read_data(open(input)?).with_context(|| format!("reading {}", input.display()))?;
    match mask {
        Some(m) => Ok(io::apply_mask(&table, open(m)?).with_context(|| format!("reading {}", m.display()))?),
        None => Ok(table),
    }
}

fn load_labels(path: Option<&Path>, n: usize) -> Result<Option<Vec<String>>> {
    let Some(path) = path else { return Ok(None) };
    let labels = io::read_labels(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if labels.len() != n {
        bail!("{} has {} labels for {} rows", path.display(), labels.len(), n);
    }
    Ok(Some(labels))
}

fn load_truth(path: Option<&Path>) -> Result<Option<ImputationSet>> {
    path.map(|p| io::read_imputations(open(p)?).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

/// Metrics report as a JSON object with the algorithm name and seed added.
pub fn report_json(report: &MetricsReport, algorithm: &str, seed: Option<u64>) -> Result<String> {
    let mut value = serde_json::to_value(report)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("algorithm".into(), algorithm.into());
        if let Some(seed) = seed {
            map.insert("seed".into(), seed.into());
        }
    }
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub fn write_svg(path: &Path, codebook: &Codebook, table: &Table) -> Result<()> {
    let hits = hit_counts(&assign(&table.data, codebook)?, codebook.len());
    let mut f = create(path)?;
    f.write_all(render_u_matrix(codebook, Some(&hits))?.as_bytes())?;
    Ok(f.flush()?)
}

/// Loads the data, runs the configured method, writes the requested
/// artifacts and returns the metrics.
pub fn run_pipeline(config: &RunConfig) -> Result<MetricsReport> {
    let method = config.validate()?;
    let table = load_table(&config.input, config.mask.as_deref())?;
    let truth = load_truth(config.truth.as_deref())?;
    let labels = load_labels(config.labels.as_deref(), table.data.n())?;
    log::info!(
        "{} rows, {} columns, {} masked entries; running {}",
        table.data.n(),
        table.data.p(),
        table.data.missing_count(),
        config.algorithm
    );
    let out = run_method(config.algorithm, &table.data, &method, config.seed)?;
    let report = evaluate(
        &table.data,
        out.codebook.as_ref(),
        &out.imputations,
        truth.as_ref(),
        labels.as_deref(),
        out.wall_time,
    )?;
    if let (Some(path), Some(cb)) = (&config.codebook_out, &out.codebook) {
        let mut f = create(path)?;
        io::write_codebook(&mut f, &table.header, cb)?;
        f.flush()?;
    }
    if let Some(path) = &config.completed_out {
        let mut f = create(path)?;
        io::write_matrix(&mut f, &table.header, &out.completed)?;
        f.flush()?;
    }
    if let (Some(path), Some(cb)) = (&config.svg_out, &out.codebook) {
        write_svg(path, cb, &table)?;
    }
    if let Some(path) = &config.report_out {
        let mut f = create(path)?;
        f.write_all(report_json(&report, config.algorithm.name(), Some(config.seed))?.as_bytes())?;
        f.flush()?;
    }
    Ok(report)
}

/// Inputs of the `evaluate` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub input: PathBuf,
    pub mask: Option<PathBuf>,
    pub codebook: PathBuf,
    pub topology: Topology,
    pub completed: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

/// Scores an existing codebook (and optionally a completed data file, whose
/// values at masked positions are taken as the imputations).
pub fn run_evaluate(config: &EvalConfig) -> Result<MetricsReport> {
    let table = load_table(&config.input, config.mask.as_deref())?;
    let (_, codebook) = io::read_codebook(open(&config.codebook)?, config.topology)
        .with_context(|| format!("reading {}", config.codebook.display()))?;
    let truth = load_truth(config.truth.as_deref())?;
    let labels = load_labels(config.labels.as_deref(), table.data.n())?;
    let imputations = match &config.completed {
        Some(path) => {
            let (_, values) = io::read_matrix(open(path)?).with_context(|| format!("reading {}", path.display()))?;
            if values.dim() != table.data.values().dim() {
                bail!("{} does not have the shape of the data", path.display());
            }
            ImputationSet::new(
                table
                    .data
                    .missing_positions()
                    .map(|(row, col)| missom::Imputation {
                        row,
                        col,
                        value: values[[row, col]],
                    })
                    .collect(),
            )?
        }
        None => {
            if truth.as_ref().is_some_and(|t| !t.is_empty()) {
                bail!("--truth needs --completed to score imputations");
            }
            ImputationSet::default()
        }
    };
    Ok(evaluate(
        &table.data,
        Some(&codebook),
        &imputations,
        truth.as_ref(),
        labels.as_deref(),
        Duration::ZERO,
    )?)
}
