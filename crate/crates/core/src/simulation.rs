//! Synthetic robustness study: hierarchical skew-normal temperatures,
//! spiked measurements and competing point forecasters judged by a
//! one-sided predictive-performance test.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution as _, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{invalid, Error, Result};
use crate::functionals::{expectile, huber_functional, quantile, HuberParams};
use crate::io::format_float;
use crate::verification::{dm_p_value, dm_statistic, ScoringRule, Sidedness};

/// Tolerance used for the per-day functionals.
const DAY_TOL: f64 = 1e-9;

/// Generative model for one day.
///
/// `ξ ~ SN(xi_location, xi_scale, xi_shape)`, `m = max(ξ, pivot)`,
/// `ω = omega_base + B₁·m/omega_divisor` with `B₁ ~ Beta(omega_beta)`,
/// `ν = nu_span·B₂ − nu_span/2` with `B₂ ~ Beta(nu_beta_a, nu_beta_a·m/pivot)`.
/// The day's law is `SN(ξ, ω, ν)`; the measured value adds
/// `spike_floor + spike_scale·V`, `V ~ Exp(spike_rate)`, with probability
/// `contamination_prob`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvironmentConfig {
    pub xi_location: f64,
    pub xi_scale: f64,
    pub xi_shape: f64,
    pub pivot: f64,
    pub omega_base: f64,
    pub omega_beta: (f64, f64),
    pub omega_divisor: f64,
    pub nu_beta_a: f64,
    pub nu_span: f64,
    pub contamination_prob: f64,
    pub spike_scale: f64,
    pub spike_rate: f64,
    pub spike_floor: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            xi_location: 19.0,
            xi_scale: 6.0,
            xi_shape: 20.0,
            pivot: 20.0,
            omega_base: 1.4,
            omega_beta: (2.0, 5.0),
            omega_divisor: 10.0,
            nu_beta_a: 1.5,
            nu_span: 40.0,
            contamination_prob: 0.05,
            spike_scale: 5.0,
            spike_rate: 0.8,
            spike_floor: 0.0,
        }
    }
}

impl EnvironmentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("xi_scale", self.xi_scale),
            ("pivot", self.pivot),
            ("omega_base", self.omega_base),
            ("omega_beta.0", self.omega_beta.0),
            ("omega_beta.1", self.omega_beta.1),
            ("omega_divisor", self.omega_divisor),
            ("nu_beta_a", self.nu_beta_a),
            ("spike_rate", self.spike_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("xi_location", self.xi_location), ("xi_shape", self.xi_shape), ("nu_span", self.nu_span)] {
            if !v.is_finite() {
                return invalid(format!("{name} must be finite, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.contamination_prob) {
            return invalid(format!("contamination_prob must lie in [0, 1], got {}", self.contamination_prob));
        }
        if !(self.spike_scale >= 0.0 && self.spike_scale.is_finite()) {
            return invalid(format!("spike_scale must be non-negative, got {}", self.spike_scale));
        }
        if !(self.spike_floor >= 0.0 && self.spike_floor.is_finite()) {
            return invalid(format!("spike_floor must be non-negative, got {}", self.spike_floor));
        }
        Ok(())
    }
}

/// One simulated day.
#[derive(Clone, Debug)]
pub struct Day {
    pub forecast: Distribution,
    pub y: f64,
    pub y_measured: f64,
}

/// Draws the day's predictive law, the true value and the measured value.
///
/// The configuration is assumed valid (see [`EnvironmentConfig::validate`]).
pub fn sample_day<R: Rng + ?Sized>(cfg: &EnvironmentConfig, rng: &mut R) -> Day {
    let xi_law = Distribution::skew_normal(cfg.xi_location, cfg.xi_scale, cfg.xi_shape).expect("validated config");
    let xi = xi_law.sample_one(rng);
    let m = xi.max(cfg.pivot);
    let b1 = Beta::new(cfg.omega_beta.0, cfg.omega_beta.1).expect("validated config").sample(rng);
    let omega = cfg.omega_base + b1 * m / cfg.omega_divisor;
    let b2 = Beta::new(cfg.nu_beta_a, cfg.nu_beta_a * m / cfg.pivot).expect("validated config").sample(rng);
    let nu = cfg.nu_span * b2 - 0.5 * cfg.nu_span;
    let forecast = Distribution::skew_normal(xi, omega, nu).expect("positive scale");
    let y = forecast.sample_one(rng);
    let spiked = rng.random::<f64>() < cfg.contamination_prob;
    let y_measured = if spiked {
        let v: f64 = Exp::new(cfg.spike_rate).expect("validated config").sample(rng);
        y + cfg.spike_floor + cfg.spike_scale * v
    } else {
        y
    };
    Day { forecast, y, y_measured }
}

/// A point forecaster fed with the day's predictive law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Competitor {
    /// The mean, `expectile(F, 1/2)`.
    IdealMean,
    /// The mean plus centred normal noise with standard deviation `sd`.
    NoisyMean { sd: f64 },
    /// The mean shifted by `offset`.
    DebiasedMean { offset: f64 },
    /// Midpoint of the median interval.
    Median,
    /// Midpoint of the symmetric Huber functional with threshold `a`.
    HuberQ { a: f64 },
}

impl Competitor {
    pub fn name(&self) -> String {
        match self {
            Competitor::IdealMean => "IdealMean".into(),
            Competitor::NoisyMean { .. } => "NoisyMean".into(),
            Competitor::DebiasedMean { .. } => "DebiasedMean".into(),
            Competitor::Median => "Median".into(),
            Competitor::HuberQ { a } => format!("Huber{}", format_float(*a)),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Competitor::NoisyMean { sd } if !(sd >= 0.0 && sd.is_finite()) => {
                invalid(format!("noise sd must be non-negative, got {sd}"))
            }
            Competitor::DebiasedMean { offset } if !offset.is_finite() => {
                invalid(format!("offset must be finite, got {offset}"))
            }
            Competitor::HuberQ { a } if !(a > 0.0 && a.is_finite()) => {
                invalid(format!("Huber threshold must be positive, got {a}"))
            }
            _ => Ok(()),
        }
    }
}

/// Ordered list of competitors challenging the ideal mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitorSet(pub Vec<Competitor>);

impl Default for CompetitorSet {
    fn default() -> Self {
        Self(vec![
            Competitor::NoisyMean { sd: 0.5f64.sqrt() },
            Competitor::DebiasedMean { offset: 0.3 },
            Competitor::Median,
            Competitor::HuberQ { a: 1.5 },
            Competitor::HuberQ { a: 2.5 },
        ])
    }
}

impl CompetitorSet {
    /// The ideal mean followed by the default challengers.
    pub fn with_ideal() -> Self {
        let mut v = vec![Competitor::IdealMean];
        v.extend(Self::default().0);
        Self(v)
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(Competitor::name).collect()
    }
}

/// The ideal mean of `f` and each competitor's quote, in set order.
///
/// Noise for `NoisyMean` is drawn from `rng` in set order.
pub fn competitor_quotes<R: Rng + ?Sized>(
    f: &Distribution,
    set: &CompetitorSet,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let mean = expectile(f, 0.5, DAY_TOL)?;
    let quotes = set
        .0
        .iter()
        .map(|c| {
            Ok(match *c {
                Competitor::IdealMean => mean,
                Competitor::NoisyMean { sd } => {
                    let z: f64 = rng.sample(StandardNormal);
                    mean + sd * z
                }
                Competitor::DebiasedMean { offset } => mean + offset,
                Competitor::Median => quantile(f, 0.5)?.midpoint(),
                Competitor::HuberQ { a } => huber_functional(f, &HuberParams::symmetric(0.5, a)?, DAY_TOL)?.midpoint(),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((mean, quotes))
}

/// Scoring rule `2·h^{1/2}_{a,a}` with the limits `a = 0` (absolute
/// error) and `a = ∞` (squared error). Scaling does not affect the test.
pub fn switching_rule(a: f64) -> Result<ScoringRule> {
    if a == 0.0 {
        Ok(ScoringRule::Absolute)
    } else if a == f64::INFINITY {
        Ok(ScoringRule::Squared)
    } else if a > 0.0 && a.is_finite() {
        Ok(ScoringRule::ClassicalHuber { a })
    } else {
        invalid(format!("Huber threshold must lie in [0, ∞], got {a}"))
    }
}

/// Observation set used for scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observations {
    Clean,
    Contaminated,
}

impl Observations {
    pub fn as_str(self) -> &'static str {
        match self {
            Observations::Clean => "clean",
            Observations::Contaminated => "contaminated",
        }
    }
}

const OBSERVATIONS: [Observations; 2] = [Observations::Clean, Observations::Contaminated];

/// Settings of a switching experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingConfig {
    pub environment: EnvironmentConfig,
    pub competitors: CompetitorSet,
    /// Huber thresholds of the scoring rules; `0` and `∞` are allowed.
    pub thresholds: Vec<f64>,
    pub reps: usize,
    pub days: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for SwitchingConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentConfig::default(),
            competitors: CompetitorSet::default(),
            thresholds: vec![0.0, 1.5, 2.5, f64::INFINITY],
            reps: 4000,
            days: 730,
            level: 0.05,
            seed: 0,
        }
    }
}

/// Rejection frequency for one competitor, rule and observation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingCell {
    pub competitor: String,
    /// Threshold label: a number, or `inf`.
    pub a: String,
    pub observations: Observations,
    pub rejections: usize,
    /// Replications whose score differentials were all zero; these count
    /// as non-rejections.
    pub degenerate: usize,
    pub probability: f64,
    pub std_error: f64,
}

/// Outcome of [`switching_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingReport {
    pub reps: usize,
    pub days: usize,
    pub seed: u64,
    pub level: f64,
    pub environment: EnvironmentConfig,
    pub cells: Vec<SwitchingCell>,
}

/// Label for a threshold, as used in reports.
pub fn threshold_label(a: f64) -> String {
    format_float(a)
}

impl SwitchingReport {
    pub fn cell(&self, competitor: &str, a: f64, observations: Observations) -> Option<&SwitchingCell> {
        let label = threshold_label(a);
        self.cells.iter().find(|c| c.competitor == competitor && c.a == label && c.observations == observations)
    }

    pub fn probability(&self, competitor: &str, a: f64, observations: Observations) -> Option<f64> {
        self.cell(competitor, a, observations).map(|c| c.probability)
    }

    /// Table with one row per competitor and one column per
    /// (threshold, observation set) pair.
    pub fn to_csv(&self) -> String {
        let mut competitors: Vec<&str> = Vec::new();
        let mut columns: Vec<(&str, Observations)> = Vec::new();
        for c in &self.cells {
            if !competitors.contains(&c.competitor.as_str()) {
                competitors.push(&c.competitor);
            }
            if !columns.contains(&(c.a.as_str(), c.observations)) {
                columns.push((&c.a, c.observations));
            }
        }
        let mut out = String::from("competitor");
        for (a, obs) in &columns {
            out.push_str(&format!(",a={a} {}", obs.as_str()));
        }
        out.push('\n');
        for comp in competitors {
            out.push_str(comp);
            for (a, obs) in &columns {
                out.push(',');
                if let Some(cell) =
                    self.cells.iter().find(|c| c.competitor == comp && c.a == *a && c.observations == *obs)
                {
                    out.push_str(&format_float(cell.probability));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Per-replication verdicts: `rejected[k]`, `degenerate[k]` indexed by
/// (competitor, threshold, observation set) in row-major order.
struct RepOutcome {
    rejected: Vec<bool>,
    degenerate: Vec<bool>,
}

fn run_replication(cfg: &SwitchingConfig, rules: &[ScoringRule], rep: u64) -> Result<RepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep);
    let nc = cfg.competitors.0.len();
    let nr = rules.len();
    let cells = nc * nr * OBSERVATIONS.len();
    let mut diffs = vec![Vec::with_capacity(cfg.days); cells];
    for _ in 0..cfg.days {
        let day = sample_day(&cfg.environment, &mut rng);
        let (mean, quotes) = competitor_quotes(&day.forecast, &cfg.competitors, &mut rng)?;
        for (o, y) in [day.y, day.y_measured].into_iter().enumerate() {
            for (r, rule) in rules.iter().enumerate() {
                let s_ideal = rule.score(mean, y);
                for (c, &q) in quotes.iter().enumerate() {
                    // Positive differentials favour the competitor.
                    diffs[(c * nr + r) * 2 + o].push(s_ideal - rule.score(q, y));
                }
            }
        }
    }
    let mut rejected = vec![false; cells];
    let mut degenerate = vec![false; cells];
    for (k, d) in diffs.iter().enumerate() {
        match dm_statistic(d) {
            Ok(t) => rejected[k] = dm_p_value(t, Sidedness::One) < cfg.level,
            Err(Error::DegenerateTest(_)) => degenerate[k] = true,
            Err(e) => return Err(e),
        }
    }
    Ok(RepOutcome { rejected, degenerate })
}

/// Monte-Carlo estimate of the probability that a one-sided test at level
/// `cfg.level` rejects "the ideal mean is at least as good as the
/// competitor".
///
/// Replication `r` uses a ChaCha8 stream `r` keyed by `cfg.seed`, so the
/// report does not depend on the thread count. Runs on the current rayon
/// pool.
pub fn switching_experiment(cfg: &SwitchingConfig) -> Result<SwitchingReport> {
    if cfg.reps == 0 {
        return invalid("reps must be at least 1");
    }
    if cfg.days < 2 {
        return invalid(format!("days must be at least 2, got {}", cfg.days));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return invalid(format!("significance level must lie in (0, 1), got {}", cfg.level));
    }
    if cfg.competitors.0.is_empty() || cfg.thresholds.is_empty() {
        return invalid("need at least one competitor and one threshold");
    }
    cfg.environment.validate()?;
    for c in &cfg.competitors.0 {
        c.validate()?;
    }
    let rules = cfg.thresholds.iter().map(|&a| switching_rule(a)).collect::<Result<Vec<_>>>()?;

    let outcomes = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_replication(cfg, &rules, rep))
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.reps as f64;
    let nr = rules.len();
    let mut cells = Vec::new();
    for (c, comp) in cfg.competitors.0.iter().enumerate() {
        for (r, &a) in cfg.thresholds.iter().enumerate() {
            for (o, obs) in OBSERVATIONS.into_iter().enumerate() {
                let k = (c * nr + r) * 2 + o;
                let rejections = outcomes.iter().filter(|x| x.rejected[k]).count();
                let degenerate = outcomes.iter().filter(|x| x.degenerate[k]).count();
                let p = rejections as f64 / n;
                cells.push(SwitchingCell {
                    competitor: comp.name(),
                    a: threshold_label(a),
                    observations: obs,
                    rejections,
                    degenerate,
                    probability: p,
                    std_error: (p * (1.0 - p) / n).sqrt(),
                });
            }
        }
    }
    Ok(SwitchingReport {
        reps: cfg.reps,
        days: cfg.days,
        seed: cfg.seed,
        level: cfg.level,
        environment: cfg.environment.clone(),
        cells,
    })
}
