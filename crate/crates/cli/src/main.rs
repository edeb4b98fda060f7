use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use huberval::io::{murphy_to_csv, read_dataset_file, read_distribution_file, to_json_string, write_output};
use huberval::scoring::ConvexSpec;
use huberval::simulation::{CompetitorSet, EnvironmentConfig, SwitchingConfig};
use huberval::verification::{dominance_on_curve, Dominance};
use huberval::{
    dm_test, expectile, huber_functional, mean_score, murphy_diagram, quantile, skill_score, switching_experiment,
    Distribution, DistributionSpec, Error, HuberParams, ScoringRule, Sidedness,
};
use log::{debug, info};
use serde_json::json;

#[derive(Parser)]
#[command(name = "huberval", version, about = "Huber functionals and robust forecast verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a Huber functional, quantile or expectile of a distribution.
    Functional(FunctionalArgs),
    /// Mean score of every forecast source in a dataset.
    Score(ScoreArgs),
    /// Murphy diagram of a dataset, with a dominance summary.
    Murphy(MurphyArgs),
    /// Test of equal predictive performance of two sources.
    DmTest(PairArgs),
    /// Whether one source dominates another for a Huber functional.
    Dominance(DominanceArgs),
    /// Monte-Carlo switching study on synthetic temperatures.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Huber,
    Quantile,
    Expectile,
    Squared,
    Absolute,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    One,
    Two,
}

#[derive(Args)]
struct Level {
    /// Probability level α.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Lower tolerance (Huber threshold below the functional).
    #[arg(long)]
    a: Option<f64>,
    /// Upper tolerance (Huber threshold above the functional).
    #[arg(long)]
    b: Option<f64>,
}

impl Level {
    fn params(&self) -> Result<HuberParams, Error> {
        match (self.a, self.b) {
            (Some(a), Some(b)) => HuberParams::new(self.alpha, a, b),
            (Some(a), None) | (None, Some(a)) => HuberParams::new(self.alpha, a, a),
            (None, None) => Err(Error::Argument("--a and/or --b are required".into())),
        }
    }
}

#[derive(Args)]
struct RuleArgs {
    #[command(flatten)]
    level: Level,
    /// Scoring family.
    #[arg(long, value_enum, default_value = "huber")]
    kind: Kind,
    /// Convex function φ of a consistent score: inline JSON or a file path.
    #[arg(long)]
    phi: Option<String>,
}

impl RuleArgs {
    fn rule(&self) -> Result<ScoringRule, Error> {
        let spec = self.phi.as_deref().map(read_phi).transpose()?;
        let alpha = self.level.alpha;
        Ok(match self.kind {
            Kind::Huber => match spec {
                Some(spec) => ScoringRule::ConsistentHuber { spec, params: self.level.params()? },
                None => ScoringRule::GeneralizedHuber { params: self.level.params()? },
            },
            Kind::Quantile => {
                ScoringRule::ConsistentQuantile { spec: spec.unwrap_or_else(ConvexSpec::quadratic), alpha }
            }
            Kind::Expectile => {
                ScoringRule::ConsistentExpectile { spec: spec.unwrap_or_else(ConvexSpec::quadratic), alpha }
            }
            Kind::Squared => ScoringRule::Squared,
            Kind::Absolute => ScoringRule::Absolute,
        })
    }
}

#[derive(Args)]
struct FunctionalArgs {
    /// Sample file (one column), piecewise-linear CDF (two columns) or a
    /// parametric distribution as inline JSON or a `.json` file.
    #[arg(long)]
    input: String,
    #[command(flatten)]
    level: Level,
    #[arg(long, value_enum, default_value = "huber")]
    kind: Kind,
    /// Root-finding tolerance; defaults to a scale-aware value.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Dataset CSV with a `y` column and one column per source.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    rule: RuleArgs,
    /// Also report skill scores relative to this source.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MurphyArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    level: Level,
    /// When given, the summary includes each curve integrated against φ.
    #[arg(long)]
    phi: Option<String>,
    /// Destination of the curve CSV.
    #[arg(long)]
    output: PathBuf,
    /// Destination of the JSON summary (stdout by default).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    input: PathBuf,
    /// First source.
    source_a: String,
    /// Second source.
    source_b: String,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, value_enum, default_value = "two")]
    sidedness: Side,
    /// Significance level used to name a preferred source.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DominanceArgs {
    #[arg(long)]
    input: PathBuf,
    source_a: String,
    source_b: String,
    #[command(flatten)]
    level: Level,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 4000)]
    reps: usize,
    #[arg(long, default_value_t = 730)]
    days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
    /// Probability that a measurement carries a spike.
    #[arg(long, default_value_t = 0.05)]
    contamination: f64,
    /// Constant added to every spike.
    #[arg(long, default_value_t = 0.0)]
    spike_floor: f64,
    /// Significance level of the one-sided test.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Destination of the JSON report (stdout by default).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Destination of the CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn read_text_or_file(arg: &str) -> Result<String, Error> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        Ok(std::fs::read_to_string(arg)?)
    }
}

fn read_phi(arg: &str) -> Result<ConvexSpec, Error> {
    Ok(serde_json::from_str(&read_text_or_file(arg)?)?)
}

fn read_distribution(arg: &str) -> Result<Distribution, Error> {
    let inline = arg.trim_start().starts_with('{');
    if inline || Path::new(arg).extension().is_some_and(|e| e == "json") {
        let spec: DistributionSpec = serde_json::from_str(&read_text_or_file(arg)?)?;
        spec.build()
    } else {
        read_distribution_file(Path::new(arg))
    }
}

fn emit(path: Option<&Path>, value: &serde_json::Value) -> Result<(), Error> {
    write_output(path, &to_json_string(value)?)
}

fn cmd_functional(args: &FunctionalArgs) -> Result<(), Error> {
    let f = read_distribution(&args.input)?;
    let tol = args.tol.unwrap_or(0.0);
    let (lo, hi) = match args.kind {
        Kind::Huber => {
            let p = args.level.params()?;
            let tol = if args.tol.is_some() { tol } else { huberval::functionals::default_tolerance(&f) };
            let r = huber_functional(&f, &p, tol)?;
            (r.lo, r.hi)
        }
        Kind::Quantile => {
            let r = quantile(&f, args.level.alpha)?;
            (r.lo, r.hi)
        }
        Kind::Expectile => {
            let tol = if args.tol.is_some() { tol } else { huberval::functionals::default_tolerance(&f) };
            let e = expectile(&f, args.level.alpha, tol)?;
            (e, e)
        }
        Kind::Squared | Kind::Absolute => {
            return Err(Error::Argument("--kind must be huber, quantile or expectile".into()));
        }
    };
    debug!("functional interval [{lo}, {hi}]");
    emit(args.output.as_deref(), &json!({ "lo": lo, "hi": hi, "midpoint": 0.5 * (lo + hi) }))
}

fn cmd_score(args: &ScoreArgs) -> Result<(), Error> {
    let d = read_dataset_file(&args.input)?;
    let rule = args.rule.rule()?;
    let mut scores = BTreeMap::new();
    let mut skills = BTreeMap::new();
    for name in d.source_names() {
        scores.insert(name.to_string(), mean_score(&d, name, &rule)?);
        if let Some(r) = &args.reference {
            skills.insert(name.to_string(), skill_score(&d, name, r, &rule)?);
        }
    }
    let mut out = json!({ "rule": rule, "n": d.len(), "mean_scores": scores });
    if args.reference.is_some() {
        out["reference"] = json!(args.reference);
        out["skill_scores"] = json!(skills);
    }
    emit(args.output.as_deref(), &out)
}

fn cmd_murphy(args: &MurphyArgs) -> Result<(), Error> {
    let d = read_dataset_file(&args.input)?;
    let p = args.level.params()?;
    let spec = args.phi.as_deref().map(read_phi).transpose()?;
    let curve = murphy_diagram(&d, &p);
    info!("Murphy grid with {} points for {} sources", curve.grid().len(), curve.sources().len());
    write_output(Some(&args.output), &murphy_to_csv(&curve))?;

    let names: Vec<&str> = d.source_names().collect();
    let mut pairs = Vec::new();
    for a in &names {
        for b in &names {
            if a != b {
                let Dominance { dominates, violations } = dominance_on_curve(&curve, a, b)?;
                pairs.push(json!({ "source_a": a, "source_b": b, "dominates": dominates, "violations": violations }));
            }
        }
    }
    let mut out = json!({
        "params": p,
        "sources": names,
        "grid_points": curve.grid().len(),
        "dominance": pairs,
    });
    if let Some(spec) = &spec {
        let mut integrals = BTreeMap::new();
        for name in &names {
            integrals.insert(name.to_string(), curve.integrate(name, spec)?);
        }
        out["integrated_scores"] = json!(integrals);
    }
    emit(args.summary.as_deref(), &out)
}

fn cmd_dm_test(args: &PairArgs) -> Result<(), Error> {
    let d = read_dataset_file(&args.input)?;
    let rule = args.rule.rule()?;
    let sidedness = match args.sidedness {
        Side::One => Sidedness::One,
        Side::Two => Sidedness::Two,
    };
    let r = dm_test(&d, &args.source_a, &args.source_b, &rule, sidedness, args.level)?;
    emit(args.output.as_deref(), &serde_json::to_value(&r)?)
}

fn cmd_dominance(args: &DominanceArgs) -> Result<(), Error> {
    let d = read_dataset_file(&args.input)?;
    let p = args.level.params()?;
    let r = huberval::dominance_check(&d, &args.source_a, &args.source_b, &p)?;
    emit(args.output.as_deref(), &serde_json::to_value(&r)?)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let cfg = SwitchingConfig {
        environment: EnvironmentConfig {
            contamination_prob: args.contamination,
            spike_floor: args.spike_floor,
            ..Default::default()
        },
        competitors: CompetitorSet::default(),
        reps: args.reps,
        days: args.days,
        level: args.level,
        seed: args.seed,
        ..Default::default()
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Numeric(e.to_string()))?;
    info!("running {} replications of {} days", cfg.reps, cfg.days);
    let report = pool.install(|| switching_experiment(&cfg))?;
    if let Some(path) = &args.csv {
        write_output(Some(path), &report.to_csv())?;
    }
    emit(args.output.as_deref(), &serde_json::to_value(&report)?)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Argument(_) | Error::InvalidParameter(_) | Error::UnknownSource(_) => 2,
        Error::DegenerateTest(_) => 3,
        Error::Io(_) | Error::Parse(_) => 4,
        Error::Numeric(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HV_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Functional(a) => cmd_functional(a),
        Command::Score(a) => cmd_score(a),
        Command::Murphy(a) => cmd_murphy(a),
        Command::DmTest(a) => cmd_dm_test(a),
        Command::Dominance(a) => cmd_dominance(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("huberval: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
