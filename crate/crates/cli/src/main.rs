use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chip_core::experiments::{run_experiment, ExperimentConfig, PRESETS};
use chip_core::ingest::{ingest_path, IngestOptions};
use chip_core::likelihood::{mean_test_loglik_with_assignment, poisson_baseline_with_assignment, train_assignment};
use chip_core::network::{expand_simplified, sample_network};
use chip_core::report::{fit_log, three_sig, KChoice, RealFitOptions, SplitRule};
use chip_core::spectral::{cluster_counts, eigengap_select_k};
use chip_core::{CommunityAssignment, CountMatrix, EventLog, FitConfig, MatrixKind, Mode, SimplifiedSpec};

#[derive(Parser)]
#[command(name = "chip", version, about = "Community Hawkes Independent Pairs: simulate, cluster, fit and evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an event log from the two-value model with balanced blocks.
    Simulate(SimulateArgs),
    /// Spectral clustering of an event log.
    Cluster(ClusterArgs),
    /// Fit CHIP to an event log and report parameters and intervals as JSON.
    Fit(FitArgs),
    /// Test log-likelihood per event for CHIP and the Poisson baseline.
    Eval(EvalArgs),
    /// Run a simulation study from a preset or TOML config.
    Experiment(ExperimentArgs),
    /// Normalise a raw `sender,receiver,timestamp` file.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixArg {
    Weighted,
    Binary,
}

impl From<MatrixArg> for MatrixKind {
    fn from(m: MatrixArg) -> Self {
        match m {
            MatrixArg::Weighted => MatrixKind::Weighted,
            MatrixArg::Binary => MatrixKind::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Directed,
    Undirected,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Directed => Mode::Directed,
            ModeArg::Undirected => Mode::Undirected,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum KArg {
    Fixed(usize),
    Auto,
}

fn parse_k(s: &str) -> std::result::Result<KArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KArg::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
        Ok(k) => Ok(KArg::Fixed(k)),
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long = "horizon", short = 'T')]
    horizon: f64,
    #[arg(long)]
    mu1: f64,
    #[arg(long)]
    mu2: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha2: f64,
    #[arg(long, default_value_t = 1.0)]
    beta1: f64,
    #[arg(long, default_value_t = 1.0)]
    beta2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Event log CSV.
    #[arg(long)]
    out: PathBuf,
    /// Planted 1-based block of each node, one per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

/// Input log and the options shared by commands that read one.
#[derive(Args)]
struct InputArgs {
    /// `sender,receiver,timestamp` CSV.
    input: PathBuf,
    /// Read integer node ids and times as they are, skipping normalisation.
    #[arg(long)]
    raw: bool,
    /// Keep only the largest connected component.
    #[arg(long)]
    largest_component: bool,
    #[arg(long, value_enum, default_value = "weighted")]
    matrix: MatrixArg,
    #[arg(long, value_enum, default_value = "directed")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InputArgs {
    fn load(&self) -> Result<(EventLog, Option<Vec<String>>)> {
        if self.raw {
            let log = EventLog::load_csv(&self.input, None, None)
                .with_context(|| format!("reading {}", self.input.display()))?;
            return Ok((log, None));
        }
        let ing = ingest_path(&self.input, &IngestOptions { largest_component: self.largest_component })
            .with_context(|| format!("ingesting {}", self.input.display()))?;
        Ok((ing.log, Some(ing.tokens)))
    }

    fn fit_config(&self) -> FitConfig {
        FitConfig { matrix: self.matrix.into(), mode: self.mode.into(), seed: self.seed, ..FitConfig::default() }
    }

    fn dataset(&self) -> String {
        self.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Block count, or `auto` for the eigengap rule.
    #[arg(long, value_parser = parse_k)]
    k: KArg,
    /// Largest `k` considered by `--k auto`.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Labels CSV (`node,token,block`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    /// Fraction of trailing events held out for testing.
    #[arg(long, default_value_t = 0.2, conflicts_with = "test_count")]
    test_fraction: f64,
    /// Number of trailing events held out for testing.
    #[arg(long)]
    test_count: Option<usize>,
}

impl SplitArgs {
    fn rule(&self) -> SplitRule {
        match self.test_count {
            Some(c) => SplitRule::Count(c),
            None => SplitRule::Fraction(self.test_fraction),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_k)]
    k: KArg,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[command(flatten)]
    split: SplitArgs,
    /// Simultaneous interval level.
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    /// Report JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    split: SplitArgs,
    /// JSON lines with one result per model.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset name (see `--list`).
    preset: Option<String>,
    /// TOML experiment config instead of a preset.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Replace a grid axis, e.g. `--grid n=64,128`.
    #[arg(long = "grid", value_name = "AXIS=V1,V2")]
    grid: Vec<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    matrix: Option<MatrixArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Print the preset names and exit.
    #[arg(long)]
    list: bool,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// Normalised event log CSV.
    #[arg(long)]
    out: PathBuf,
    /// Original token of each node id, one per line.
    #[arg(long)]
    tokens: Option<PathBuf>,
    #[arg(long)]
    largest_component: bool,
}

fn main() -> Result<()> {
    init_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Cluster(a) => cluster(a),
        Command::Fit(a) => fit(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
        Command::Ingest(a) => ingest(a),
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CHIP_THREADS") {
        let threads: usize = v.trim().parse().with_context(|| format!("CHIP_THREADS must be an integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = SimplifiedSpec {
        n: a.n,
        k: a.k,
        mu1: a.mu1,
        alpha1: a.alpha1,
        beta1: a.beta1,
        mu2: a.mu2,
        alpha2: a.alpha2,
        beta2: a.beta2,
        horizon: a.horizon,
    };
    let full = expand_simplified(&spec)?;
    let truth = CommunityAssignment::balanced(a.n, a.k)?;
    let sampled = sample_network(&full, &truth, a.seed)?;
    for w in &sampled.warnings {
        eprintln!("warning: {w:?}");
    }
    let log = sampled.network.to_log();
    log.save_csv(&a.out)?;
    if let Some(p) = &a.labels {
        let mut w = output(Some(p))?;
        for l in truth.one_based() {
            writeln!(w, "{l}")?;
        }
    }
    eprintln!("simulated {} events among {} nodes (seed {})", log.len(), log.n(), a.seed);
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let (log, tokens) = a.input.load()?;
    let config = a.input.fit_config();
    let counts = CountMatrix::from_log(&log, config.mode);
    let k = match a.k {
        KArg::Fixed(k) => k,
        KArg::Auto => {
            let sel = eigengap_select_k(&counts.for_kind(config.matrix), a.k_max.min(log.n()), config.spectral.svd)?;
            let values: Vec<String> = sel.singular_values.iter().map(|v| v.to_string()).collect();
            eprintln!("singular values: {}", values.join(" "));
            eprintln!("eigengap selects k = {}", sel.k);
            sel.k
        }
    };
    let labels = cluster_counts(&counts, config.matrix, k, config.seed, &config.spectral)?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "node,token,block")?;
    for (i, b) in labels.one_based().iter().enumerate() {
        let token = tokens.as_ref().map_or_else(|| i.to_string(), |t| t[i].clone());
        writeln!(w, "{i},{token},{b}")?;
    }
    eprintln!("block sizes: {:?}", labels.block_sizes());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let (log, _) = a.input.load()?;
    let options = RealFitOptions {
        dataset: a.input.dataset(),
        k: match a.k {
            KArg::Fixed(k) => KChoice::Fixed(k),
            KArg::Auto => KChoice::Auto { k_max: a.k_max },
        },
        split: a.split.rule(),
        fit: a.input.fit_config(),
        theta: a.theta,
        ..RealFitOptions::default()
    };
    let report = fit_log(&log, &options)?;
    let mut w = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    eprintln!("k = {} ({} nodes, {} events)", report.k, report.n, report.events);
    for r in &report.test_loglik {
        eprintln!("{:?} test log-likelihood per event: {}", r.model, three_sig(r.test_ll_per_event));
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let (log, _) = a.input.load()?;
    let config = a.input.fit_config();
    let split = a.split.rule().apply(&log)?;
    if a.k > log.n() {
        bail!("k = {} exceeds the {} nodes in the log", a.k, log.n());
    }
    let ta = train_assignment(&split.train, a.k, &config)?;
    let mut chip = mean_test_loglik_with_assignment(&split, ta.clone(), &config)?.result;
    let mut poisson = poisson_baseline_with_assignment(&split, ta, &config)?.result;
    chip.dataset = a.input.dataset();
    poisson.dataset = a.input.dataset();
    if let Some(p) = &a.out {
        let mut w = output(Some(p))?;
        for r in [&chip, &poisson] {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
    }
    println!("model,k,test_ll_per_event,l_train,l_test");
    for r in [&chip, &poisson] {
        let name = serde_json::to_value(r.model)?;
        println!("{},{},{},{},{}", name.as_str().unwrap_or_default(), r.k, three_sig(r.test_ll_per_event), r.l_train, r.l_test);
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    if a.list {
        for p in PRESETS {
            println!("{p}");
        }
        return Ok(());
    }
    let mut config = match (&a.preset, &a.config) {
        (Some(id), None) => ExperimentConfig::preset(id)
            .with_context(|| format!("unknown preset {id:?}; available: {}", PRESETS.join(", ")))?,
        (None, Some(path)) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        _ => bail!("give a preset name or --config"),
    };
    for g in &a.grid {
        config.apply_override(g)?;
    }
    if let Some(r) = a.replicates {
        config.replicates = r;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(m) = a.matrix {
        config.matrices = vec![m.into()];
    }
    if let Some(m) = a.mode {
        config.mode = m.into();
    }
    config.validate()?;
    if a.dump_config {
        print!("{}", config.to_toml_string()?);
        return Ok(());
    }
    let start = std::time::Instant::now();
    let out = run_experiment(&config)?;
    let paths = out.write_to(&a.out)?;
    for p in &paths {
        println!("{}", p.display());
    }
    eprintln!(
        "{}: {} grid points x {} replicates in {:.1} s",
        config.id,
        out.points.len(),
        config.replicates,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ing = ingest_path(&a.input, &IngestOptions { largest_component: a.largest_component })
        .with_context(|| format!("ingesting {}", a.input.display()))?;
    ing.log.save_csv(&a.out)?;
    if let Some(p) = &a.tokens {
        let mut w = output(Some(p))?;
        for t in &ing.tokens {
            writeln!(w, "{t}")?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&ing.summary)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_parsing() {
        assert_eq!(parse_k("auto"), Ok(KArg::Auto));
        assert_eq!(parse_k("3"), Ok(KArg::Fixed(3)));
        assert!(parse_k("0").is_err());
        assert!(parse_k("x").is_err());
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
