//! Command line front end: train models, run embedded selection, run the
//! Boruta-style wrapper, generate benchmark datasets and sweep grids.
//!
//! Every subcommand is deterministic given its flags; all randomness flows
//! from --seed (default 42). Exit codes: 0 success, 1 runtime failure,
//! 2 usage or configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rferns::bench::{self, BenchProblem, GridCell};
use rferns::boruta::{Budget, BorutaConfig, Decision};
use rferns::dataset::{Dataset, SchemaOverride};
use rferns::error::{Error, Result};
use rferns::importance::{
    compute_importance_with, ferns_for_scans, ImportanceOptions, ShadowBaseline,
};
use rferns::model::{train, Hyper};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "rferns",
    version,
    about = "Random ferns classifier with embedded all-relevant feature selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CSV dataset and write it as JSON.
    Train(TrainArgs),
    /// Compute attribute importances and the selected subset.
    Select(SelectArgs),
    /// Run the Boruta-style wrapper with the ferns importance provider.
    Boruta(BorutaArgs),
    /// Generate a benchmark dataset with known ground truth.
    Gen(GenArgs),
    /// Sweep a (depth, scans) grid over a generated problem.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    label: String,
    /// Optional JSON file forcing column kinds, e.g. {"col": "categorical"}.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let schema = self
            .schema
            .as_ref()
            .map(SchemaOverride::from_json_path)
            .transpose()?;
        Dataset::from_csv_path(&self.data, &self.label, schema.as_ref())
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct BudgetArgs {
    /// Ensemble size (number of ferns).
    #[arg(long)]
    ferns: Option<u32>,
    /// Target mean scans per attribute; the fern count is derived from it.
    #[arg(long)]
    scans: Option<u32>,
}

impl BudgetArgs {
    fn ferns_for(&self, n_attributes: usize, depth: u32) -> u32 {
        match (self.ferns, self.scans) {
            (Some(k), _) => k,
            (None, Some(s)) => ferns_for_scans(n_attributes, depth, s),
            (None, None) => unreachable!("clap enforces the group"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json_path(self, out: &Path) -> Option<PathBuf> {
        match self {
            Format::Json => Some(out.to_path_buf()),
            Format::Csv => None,
            Format::Both => Some(out.with_extension("json")),
        }
    }

    fn csv_path(self, out: &Path) -> Option<PathBuf> {
        match self {
            Format::Json => None,
            Format::Csv => Some(out.to_path_buf()),
            Format::Both => Some(out.with_extension("csv")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// Out-of-bag objects carry the shadow's values in the baseline term.
    Shadow,
    /// Out-of-bag objects keep their original values in the baseline term.
    Original,
}

impl From<Baseline> for ShadowBaseline {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::Shadow => ShadowBaseline::ShadowValues,
            Baseline::Original => ShadowBaseline::OriginalValues,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Fern depth D.
    #[arg(long)]
    depth: u32,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Master seed; every random draw derives from it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    depth: u32,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output report path; with --format both, .json and .csv siblings.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Baseline values for the shadow importance term.
    #[arg(long, value_enum, default_value_t = Baseline::Shadow)]
    shadow_baseline: Baseline,
}

#[derive(Args)]
struct BorutaArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    depth: u32,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Maximum wrapper iterations.
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: u32,
    /// Two-sided significance level for the hit-count test.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Disable the Bonferroni correction over tentative attributes.
    #[arg(long = "no-correction", default_value_t = false)]
    no_correction: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    problem: GenProblem,
}

#[derive(Subcommand)]
enum GenProblem {
    /// Separated Gaussian classes, optionally padded with shuffled copies.
    Gauss(GaussArgs),
    /// Noisy XOR with linear combination features and Gaussian noise padding.
    Madelon(MadelonArgs),
    /// Gaussian base made nonsense by shuffling every feature column.
    ShuffledFeatures(NoiseBaseArgs),
    /// Gaussian base made nonsense by shuffling only the labels.
    ShuffledLabels(NoiseBaseArgs),
}

#[derive(Args)]
struct GaussArgs {
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    #[arg(long, default_value_t = 4)]
    features: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Number of appended known-irrelevant shuffled columns.
    #[arg(long, default_value_t = 0)]
    shadows: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output CSV; the ground truth goes to a .relevant.json sidecar.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MadelonArgs {
    #[arg(long, default_value_t = 2000)]
    objects: usize,
    /// Number of irrelevant noise features.
    #[arg(long, default_value_t = 480)]
    w: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseBaseArgs {
    #[arg(long, default_value_t = 36)]
    per_class: usize,
    #[arg(long, default_value_t = 1000)]
    features: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchProblemKind {
    /// Gaussian classes plus shuffled-copy padding.
    GaussShadows,
    Madelon,
    ShuffledFeatures,
    ShuffledLabels,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    problem: BenchProblemKind,
    /// Comma-separated fern depths, e.g. 1,3,5,7 (a leading "D=" is allowed).
    #[arg(long, default_value = "1,3,5,7,9,10,12")]
    grid: String,
    /// Comma-separated scan targets, e.g. 100,1000.
    #[arg(long, default_value = "100,1000")]
    scans: String,
    #[arg(long, default_value_t = 10)]
    repeats: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Baseline::Shadow)]
    shadow_baseline: Baseline,
    // Problem sizing; defaults follow the desk-scale benchmark family.
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    #[arg(long, default_value_t = 4)]
    features: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Shuffled-copy padding for gauss-shadows.
    #[arg(long, default_value_t = 1000)]
    shadows: usize,
    /// Object count for madelon.
    #[arg(long, default_value_t = 2000)]
    objects: usize,
    /// Irrelevant feature count for madelon.
    #[arg(long, default_value_t = 480)]
    w: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => in_pool(args.threads, || cmd_train(&args)),
        Command::Select(args) => in_pool(args.threads, || cmd_select(&args)),
        Command::Boruta(args) => in_pool(args.threads, || cmd_boruta(&args)),
        Command::Gen(args) => cmd_gen(&args),
        Command::Bench(args) => in_pool(args.threads, || cmd_bench(&args)),
    }
}

fn in_pool<T>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let data = args.data.load()?;
    let ferns = args.budget.ferns_for(data.n_attributes(), args.depth);
    let hyper = Hyper::new(args.depth, ferns, args.seed);
    let model = train(&data, &hyper)?;
    model.save_json(&args.out)?;
    let oob = model.oob_error(&data)?;
    println!(
        "objects: {}  attributes: {}  classes: {}",
        data.n_objects(),
        data.n_attributes(),
        data.n_classes()
    );
    println!("depth: {}  ferns: {}  seed: {}", args.depth, ferns, args.seed);
    match oob {
        Some(e) => println!("oob_error: {e:.6}"),
        None => println!("oob_error: undefined (no object was ever out of bag)"),
    }
    println!("model: {}", args.out.display());
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let data = args.data.load()?;
    let ferns = args.budget.ferns_for(data.n_attributes(), args.depth);
    let hyper = Hyper::new(args.depth, ferns, args.seed);
    let options = ImportanceOptions {
        shadow_baseline: args.shadow_baseline.into(),
        ..Default::default()
    };
    let (_, report) = compute_importance_with(&data, &hyper, &options)?;
    if report.low_scan_warning {
        eprintln!(
            "warning: some attribute was scanned fewer than 10 times; \
             increase --scans or --ferns for a stable selection"
        );
    }
    if let Some(path) = args.format.json_path(&args.out) {
        std::fs::write(&path, report.to_json_string()?)?;
        println!("report (json): {}", path.display());
    }
    if let Some(path) = args.format.csv_path(&args.out) {
        let mut file = std::fs::File::create(&path)?;
        report.write_csv(&mut file)?;
        println!("report (csv): {}", path.display());
    }
    let selected: Vec<&str> = report
        .attributes
        .iter()
        .filter(|a| a.selected)
        .map(|a| a.name.as_str())
        .collect();
    println!(
        "selected {} of {} attributes (depth {}, ferns {}, seed {})",
        selected.len(),
        data.n_attributes(),
        args.depth,
        ferns,
        args.seed
    );
    if !selected.is_empty() {
        println!("selected: {}", selected.join(" "));
    }
    Ok(())
}

fn cmd_boruta(args: &BorutaArgs) -> Result<()> {
    let data = args.data.load()?;
    let budget = match (args.budget.ferns, args.budget.scans) {
        (Some(k), _) => Budget::Ferns(k),
        (None, Some(s)) => Budget::Scans(s),
        (None, None) => unreachable!("clap enforces the group"),
    };
    let cfg = BorutaConfig {
        max_iterations: args.max_iter,
        alpha: args.alpha,
        bonferroni: !args.no_correction,
        depth: args.depth,
        budget,
        seed: args.seed,
    };
    let result = rferns::boruta::boruta_run(&data, &cfg)?;
    if let Some(reason) = &result.aborted {
        eprintln!("warning: run aborted early: {reason}; statuses are partial");
    }
    if let Some(path) = args.format.json_path(&args.out) {
        std::fs::write(&path, result.to_json_string()?)?;
        println!("statuses (json): {}", path.display());
    }
    if let Some(path) = args.format.csv_path(&args.out) {
        let mut file = std::fs::File::create(&path)?;
        result.write_csv(&mut file)?;
        println!("statuses (csv): {}", path.display());
    }
    println!(
        "confirmed: {}  rejected: {}  tentative: {}  (iterations: {})",
        result.count(Decision::Confirmed),
        result.count(Decision::Rejected),
        result.count(Decision::Tentative),
        result.iterations_run
    );
    Ok(())
}

fn write_problem(p: &BenchProblem, out: &Path) -> Result<()> {
    p.dataset.write_csv_path(out)?;
    let sidecar = out.with_extension("relevant.json");
    let ground_truth = serde_json::json!({
        "problem": p.name,
        "seed": p.gen_seed,
        "relevant": p.relevant_names(),
    });
    std::fs::write(&sidecar, serde_json::to_string_pretty(&ground_truth)?)?;
    println!("data: {}", out.display());
    println!("ground truth: {}", sidecar.display());
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    match &args.problem {
        GenProblem::Gauss(g) => {
            let mut p = bench::gen_gaussian_classes(
                g.per_class,
                g.features,
                g.classes,
                g.separation,
                g.seed,
            );
            if g.shadows > 0 {
                p = bench::augment_with_shadow_features(&p, g.shadows, g.seed);
            }
            write_problem(&p, &g.out)
        }
        GenProblem::Madelon(m) => {
            let p = bench::gen_madelon(m.objects, m.w, m.seed);
            write_problem(&p, &m.out)
        }
        GenProblem::ShuffledFeatures(b) => {
            let base = bench::gen_gaussian_classes(
                b.per_class,
                b.features,
                b.classes,
                b.separation,
                b.seed,
            );
            write_problem(&bench::nonsense_by_feature_shuffle(&base, b.seed), &b.out)
        }
        GenProblem::ShuffledLabels(b) => {
            let base = bench::gen_gaussian_classes(
                b.per_class,
                b.features,
                b.classes,
                b.separation,
                b.seed,
            );
            write_problem(&bench::nonsense_by_label_shuffle(&base, b.seed), &b.out)
        }
    }
}

fn parse_u32_list(text: &str, what: &str) -> Result<Vec<u32>> {
    let text = text.trim().trim_start_matches("D=").trim_start_matches("d=");
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(part.parse::<u32>().map_err(|_| {
            Error::InvalidConfig(format!("cannot parse {what} entry '{part}'"))
        })?);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("empty {what} list")));
    }
    Ok(out)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let problem = match args.problem {
        BenchProblemKind::GaussShadows => {
            let base = bench::gen_gaussian_classes(
                args.per_class,
                args.features,
                args.classes,
                args.separation,
                args.seed,
            );
            bench::augment_with_shadow_features(&base, args.shadows, args.seed)
        }
        BenchProblemKind::Madelon => bench::gen_madelon(args.objects, args.w, args.seed),
        BenchProblemKind::ShuffledFeatures => {
            let base = bench::gen_gaussian_classes(
                args.per_class,
                args.features,
                args.classes,
                args.separation,
                args.seed,
            );
            bench::nonsense_by_feature_shuffle(&base, args.seed)
        }
        BenchProblemKind::ShuffledLabels => {
            let base = bench::gen_gaussian_classes(
                args.per_class,
                args.features,
                args.classes,
                args.separation,
                args.seed,
            );
            bench::nonsense_by_label_shuffle(&base, args.seed)
        }
    };
    let depths = parse_u32_list(&args.grid, "grid")?;
    let scans = parse_u32_list(&args.scans, "scans")?;
    let grid: Vec<GridCell> = depths
        .iter()
        .flat_map(|&depth| scans.iter().map(move |&scans| GridCell { depth, scans }))
        .collect();
    let options = ImportanceOptions {
        shadow_baseline: args.shadow_baseline.into(),
        ..Default::default()
    };
    let results = bench::run_experiment_with(&problem, &grid, args.repeats, args.seed, &options)?;
    if let Some(path) = args.format.csv_path(&args.out) {
        let mut file = std::fs::File::create(&path)?;
        bench::results_to_csv(&results, &mut file)?;
        file.flush()?;
        println!("results (csv): {}", path.display());
    }
    if let Some(path) = args.format.json_path(&args.out) {
        std::fs::write(&path, serde_json::to_string_pretty(&results)?)?;
        println!("results (json): {}", path.display());
    }
    println!(
        "{} runs on {} ({} cells x {} repeats)",
        results.len(),
        problem.name,
        grid.len(),
        args.repeats
    );
    Ok(())
}
