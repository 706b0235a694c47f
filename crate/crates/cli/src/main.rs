use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpresample::designs::DesignKind;
use fpresample::harness::{
    load_config, run_design_check, run_kernel_check, run_quantile_study, run_test_study, write_report, Format,
    Profile, ScenarioConfig, Tabular, TestKind,
};
use fpresample::infer::quantile_cis;
use fpresample::par::{with_threads, Execution};
use fpresample::resample::BootstrapConfig;
use fpresample::rng::SeedStream;
use fpresample::{Error, Sample};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fpresample", version, about = "Pseudo-population bootstrap studies for πps samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bootstrap confidence intervals for quantiles of one sample.
    QuantileCi(QuantileCiArgs),
    /// Coverage study of quantile intervals.
    SimulateQuantile(StudyArgs),
    /// Size and power of the conditional independence test.
    SimulateCondTest(StudyArgs),
    /// Size and power of the marginal independence test.
    SimulateMargTest(StudyArgs),
    /// Inclusion-probability and enumeration diagnostics of the designs.
    DesignCheck(StudyArgs),
    /// Monte Carlo covariance of the Hájek d.f. against the analytic kernel.
    KernelCheck(StudyArgs),
}

#[derive(Args)]
struct Common {
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "FPRESAMPLE_THREADS")]
    threads: Option<usize>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct StudyArgs {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// `desk` keeps the file's scale; `full` (alias `paper`) forces 1000 replicates.
    #[arg(long, default_value = "desk")]
    profile: Profile,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct QuantileCiArgs {
    /// CSV with columns `y`, `x` and `pi`.
    #[arg(long)]
    data: PathBuf,
    /// Population size; defaults to the rounded sum of `1/pi`.
    #[arg(long = "population")]
    population: Option<usize>,
    /// Probabilities of the quantiles.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75,0.9")]
    p: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// Phase-2 design.
    #[arg(long, default_value = "pareto")]
    design: DesignKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Lib(Error::Config(_) | Error::InvalidArgument(_)) => 2,
            Failure::Lib(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Io(m) => write!(f, "{m}"),
        }
    }
}

fn scenarios(args: &StudyArgs) -> Result<Vec<ScenarioConfig>, Failure> {
    let mut cfgs = load_config(&args.config, args.profile)?;
    if let Some(seed) = args.seed {
        for c in &mut cfgs {
            c.seed = seed;
        }
    }
    Ok(cfgs)
}

fn emit<T: Tabular + Serialize>(reports: &[T], common: &Common) -> Result<(), Failure> {
    match &common.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Io(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_report(reports, common.format, &mut w)?;
            w.flush().map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
        }
        None => Ok(write_report(reports, common.format, io::stdout().lock())?),
    }
}

fn run_each<T: Tabular + Serialize + Send>(
    args: &StudyArgs,
    run: impl Fn(&ScenarioConfig) -> fpresample::Result<T> + Sync,
) -> Result<(), Failure> {
    let cfgs = scenarios(args)?;
    let reports = with_threads(args.common.threads, || {
        cfgs.iter()
            .map(|c| {
                log::info!("running scenario `{}`", c.name);
                run(c)
            })
            .collect::<fpresample::Result<Vec<T>>>()
    })?;
    emit(&reports, &args.common)
}

#[derive(Serialize)]
struct IntervalRow {
    p: f64,
    alpha: f64,
    point: f64,
    lower: f64,
    upper: f64,
    length: f64,
}

#[derive(Serialize)]
#[serde(transparent)]
struct IntervalTable(Vec<IntervalRow>);

impl Tabular for IntervalTable {
    fn header(&self) -> Vec<String> {
        ["p", "alpha", "point", "lower", "upper", "length"].iter().map(|s| s.to_string()).collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| [r.p, r.alpha, r.point, r.lower, r.upper, r.length].iter().map(|v| v.to_string()).collect())
            .collect()
    }
}

fn read_sample(path: &Path) -> Result<Sample, Failure> {
    #[derive(serde::Deserialize)]
    struct Row {
        y: f64,
        x: f64,
        pi: f64,
    }
    let bad = |e: csv::Error| Failure::Lib(Error::InvalidArgument(format!("{}: {e}", path.display())));
    let mut reader = csv::Reader::from_path(path).map_err(bad)?;
    let (mut y, mut x, mut pi) = (Vec::new(), Vec::new(), Vec::new());
    for row in reader.deserialize() {
        let r: Row = row.map_err(bad)?;
        y.push(r.y);
        x.push(r.x);
        pi.push(r.pi);
    }
    Ok(Sample::new(y, x, pi)?)
}

fn quantile_ci(args: &QuantileCiArgs) -> Result<(), Failure> {
    let sample = read_sample(&args.data)?;
    let population = args
        .population
        .unwrap_or_else(|| sample.weights().iter().sum::<f64>().round() as usize)
        .max(sample.len());
    let cfg = BootstrapConfig::new(args.replicates, population).design(args.design).execution(Execution::Parallel);
    let cis = with_threads(args.common.threads, || {
        quantile_cis(&sample, &args.p, args.alpha, &cfg, &SeedStream::new(args.seed))
    })?;
    let rows = args
        .p
        .iter()
        .zip(cis)
        .map(|(&p, ci)| IntervalRow {
            p,
            alpha: args.alpha,
            point: ci.point,
            lower: ci.lower,
            upper: ci.upper,
            length: ci.length(),
        })
        .collect();
    emit(&[IntervalTable(rows)], &args.common)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let par = Execution::Parallel;
    match &cli.command {
        Command::QuantileCi(a) => quantile_ci(a),
        Command::SimulateQuantile(a) => run_each(a, |c| run_quantile_study(c, par)),
        Command::SimulateCondTest(a) => run_each(a, |c| run_test_study(c, TestKind::Conditional, par)),
        Command::SimulateMargTest(a) => run_each(a, |c| run_test_study(c, TestKind::Marginal, par)),
        Command::DesignCheck(a) => run_each(a, |c| run_design_check(c, par)),
        Command::KernelCheck(a) => run_each(a, |c| run_kernel_check(c, par)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
