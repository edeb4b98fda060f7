//! Forecast verification: mean scores, tests of equal predictive
//! performance, Murphy diagrams, dominance and skill scores.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::HuberParams;
use crate::quad;
use crate::scoring::{
    classical_huber_loss, consistent_expectile_score, consistent_huber_score, consistent_quantile_score,
    elementary_huber_score, elementary_huber_score_left, generalized_huber_loss, ConvexSpec,
};
use crate::special::norm_sf;

/// Observations together with one or more named forecast sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDataset {
    observations: Vec<f64>,
    sources: Vec<(String, Vec<f64>)>,
}

impl ForecastDataset {
    pub fn new(observations: Vec<f64>, sources: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if observations.is_empty() {
            return invalid("dataset needs at least one observation");
        }
        if sources.is_empty() {
            return invalid("dataset needs at least one forecast source");
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return invalid("observations must be finite");
        }
        for (i, (name, values)) in sources.iter().enumerate() {
            if values.len() != observations.len() {
                return invalid(format!(
                    "source '{name}' has {} values, expected {}",
                    values.len(),
                    observations.len()
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return invalid(format!("source '{name}' has non-finite values"));
            }
            if sources[..i].iter().any(|(other, _)| other == name) {
                return invalid(format!("duplicate source name '{name}'"));
            }
        }
        Ok(Self { observations, sources })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn source_names(&self) -> impl Iterator<Item = &str> {
        self.sources.iter().map(|(n, _)| n.as_str())
    }

    pub fn source(&self, name: &str) -> Result<&[f64]> {
        self.sources
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownSource(name.to_string()))
    }
}

/// A scoring function `S(x, y)`, negatively oriented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScoringRule {
    /// `h^α_{a,b}(x - y)`
    GeneralizedHuber {
        params: HuberParams,
    },
    /// Consistent score for `H^α_{a,b}` generated by `spec`.
    ConsistentHuber {
        spec: ConvexSpec,
        params: HuberParams,
    },
    ConsistentQuantile {
        spec: ConvexSpec,
        alpha: f64,
    },
    ConsistentExpectile {
        spec: ConvexSpec,
        alpha: f64,
    },
    /// `2 h^{1/2}_{a,a}(x - y)`
    ClassicalHuber {
        a: f64,
    },
    Absolute,
    Squared,
}

impl ScoringRule {
    pub fn score(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::GeneralizedHuber { params } => generalized_huber_loss(params, x - y),
            Self::ConsistentHuber { spec, params } => consistent_huber_score(spec, params, x, y),
            Self::ConsistentQuantile { spec, alpha } => consistent_quantile_score(spec, *alpha, x, y),
            Self::ConsistentExpectile { spec, alpha } => consistent_expectile_score(spec, *alpha, x, y),
            Self::ClassicalHuber { a } => classical_huber_loss(*a, x - y),
            Self::Absolute => (x - y).abs(),
            Self::Squared => (x - y) * (x - y),
        }
    }
}

fn scores(d: &ForecastDataset, source: &str, rule: &ScoringRule) -> Result<Vec<f64>> {
    let xs = d.source(source)?;
    Ok(xs.iter().zip(&d.observations).map(|(&x, &y)| rule.score(x, y)).collect())
}

/// `(1/n) Σ S(x_i, y_i)` for one source.
pub fn mean_score(d: &ForecastDataset, source: &str, rule: &ScoringRule) -> Result<f64> {
    let s = scores(d, source, rule)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// `1 - S̄_source / S̄_reference`.
pub fn skill_score(d: &ForecastDataset, source: &str, reference: &str, rule: &ScoringRule) -> Result<f64> {
    let s = mean_score(d, source, rule)?;
    let r = mean_score(d, reference, rule)?;
    if r == 0.0 {
        return Err(Error::DegenerateTest(format!("reference '{reference}' has zero mean score")));
    }
    Ok(1.0 - s / r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Null: A performs at least as well as B. Rejected for large `t_n`.
    One,
    /// Null: equal predictive performance.
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmTestResult {
    pub t_n: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    /// Source favoured by a rejection at the requested level, if any.
    pub preferred: Option<String>,
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// `t_n = √n · mean(d) / σ̂` with `σ̂² = (1/n) Σ d_i²` (uncentred).
pub fn dm_statistic(differentials: &[f64]) -> Result<f64> {
    let n = differentials.len();
    if n < 2 {
        return invalid(format!("test needs at least two cases, got {n}"));
    }
    let nf = n as f64;
    let mean = differentials.iter().sum::<f64>() / nf;
    let second = differentials.iter().map(|d| d * d).sum::<f64>() / nf;
    if !(second > 0.0) {
        return Err(Error::DegenerateTest("score differentials are all zero".into()));
    }
    Ok(nf.sqrt() * mean / second.sqrt())
}

/// p-value of `t_n` against the standard normal law.
pub fn dm_p_value(t_n: f64, sidedness: Sidedness) -> f64 {
    match sidedness {
        Sidedness::One => norm_sf(t_n),
        Sidedness::Two => (2.0 * norm_sf(t_n.abs())).min(1.0),
    }
}

/// Test of equal predictive performance of `source_a` and `source_b`
/// under `rule`, with rejection judged at `level`.
pub fn dm_test(
    d: &ForecastDataset,
    source_a: &str,
    source_b: &str,
    rule: &ScoringRule,
    sidedness: Sidedness,
    level: f64,
) -> Result<DmTestResult> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("significance level must lie in (0, 1), got {level}"));
    }
    let sa = scores(d, source_a, rule)?;
    let sb = scores(d, source_b, rule)?;
    let diffs: Vec<f64> = sa.iter().zip(&sb).map(|(a, b)| a - b).collect();
    let t_n = dm_statistic(&diffs)?;
    let p_value = dm_p_value(t_n, sidedness);
    let preferred = if p_value < level {
        match sidedness {
            Sidedness::One => Some(source_b.to_string()),
            Sidedness::Two => Some(if t_n < 0.0 { source_a } else { source_b }.to_string()),
        }
    } else {
        None
    };
    let n = d.len();
    Ok(DmTestResult {
        t_n,
        p_value,
        sidedness,
        preferred,
        n,
        mean_a: sa.iter().sum::<f64>() / n as f64,
        mean_b: sb.iter().sum::<f64>() / n as f64,
    })
}

/// Which value of a right-continuous function of `θ` is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `lim_{t ↑ θ}`
    LeftLimit,
    At,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::LeftLimit => "left",
            Side::At => "at",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::LeftLimit),
            "at" => Ok(Side::At),
            other => Err(Error::Parse(format!("unknown side '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub theta: f64,
    pub side: Side,
}

impl GridPoint {
    pub fn at(theta: f64) -> Self {
        Self { theta, side: Side::At }
    }

    pub fn left(theta: f64) -> Self {
        Self { theta, side: Side::LeftLimit }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.theta.total_cmp(&other.theta).then(self.side.cmp(&other.side))
    }
}

/// The finite set of thresholds on which Murphy curves must be compared:
/// every forecast, observation, `y - a` and `y + b` (value at `θ`), plus the
/// left limit at every forecast value.
pub fn murphy_theta_grid(d: &ForecastDataset, p: &HuberParams) -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for &y in &d.observations {
        grid.push(GridPoint::at(y));
        grid.push(GridPoint::at(y - p.a()));
        grid.push(GridPoint::at(y + p.b()));
    }
    for (_, xs) in &d.sources {
        for &x in xs {
            grid.push(GridPoint::at(x));
            grid.push(GridPoint::left(x));
        }
    }
    grid.sort_by(GridPoint::cmp_key);
    grid.dedup_by(|a, b| a.cmp_key(b) == Ordering::Equal);
    grid
}

/// Mean elementary Huber scores per source on a threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MurphyCurve {
    params: HuberParams,
    grid: Vec<GridPoint>,
    sources: Vec<String>,
    // values[s][k] for source s at grid[k]
    values: Vec<Vec<f64>>,
}

fn mean_elementary(p: &HuberParams, g: GridPoint, xs: &[f64], ys: &[f64]) -> f64 {
    let sum: f64 = match g.side {
        Side::At => xs.iter().zip(ys).map(|(&x, &y)| elementary_huber_score(p, g.theta, x, y)).sum(),
        Side::LeftLimit => xs.iter().zip(ys).map(|(&x, &y)| elementary_huber_score_left(p, g.theta, x, y)).sum(),
    };
    sum / ys.len() as f64
}

/// Murphy diagram on the grid of [`murphy_theta_grid`].
pub fn murphy_diagram(d: &ForecastDataset, p: &HuberParams) -> MurphyCurve {
    murphy_diagram_on(d, p, murphy_theta_grid(d, p))
}

/// Murphy diagram on a caller-supplied grid (sorted internally).
pub fn murphy_diagram_on(d: &ForecastDataset, p: &HuberParams, mut grid: Vec<GridPoint>) -> MurphyCurve {
    grid.sort_by(GridPoint::cmp_key);
    grid.dedup_by(|a, b| a.cmp_key(b) == Ordering::Equal);
    let values = d
        .sources
        .iter()
        .map(|(_, xs)| grid.iter().map(|&g| mean_elementary(p, g, xs, &d.observations)).collect())
        .collect();
    MurphyCurve { params: *p, grid, sources: d.sources.iter().map(|(n, _)| n.clone()).collect(), values }
}

impl MurphyCurve {
    /// Assembles a curve from stored columns, e.g. when re-reading a CSV.
    pub fn from_parts(
        params: HuberParams,
        grid: Vec<GridPoint>,
        sources: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != sources.len() || values.iter().any(|v| v.len() != grid.len()) {
            return invalid("Murphy curve columns do not match the grid");
        }
        if grid.windows(2).any(|w| w[0].cmp_key(&w[1]) != Ordering::Less) {
            return invalid("Murphy grid must be strictly increasing");
        }
        Ok(Self { params, grid, sources, values })
    }

    pub fn params(&self) -> &HuberParams {
        &self.params
    }

    pub fn grid(&self) -> &[GridPoint] {
        &self.grid
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn values(&self, source: &str) -> Result<&[f64]> {
        let s = self.index(source)?;
        Ok(&self.values[s])
    }

    fn index(&self, source: &str) -> Result<usize> {
        self.sources.iter().position(|n| n == source).ok_or_else(|| Error::UnknownSource(source.to_string()))
    }

    // value at the left end (At) and right end of the gap starting at k; the
    // next entry is the left limit at θ_{k+1} when that is a forecast value
    fn ends(&self, s: usize, k: usize) -> (f64, f64) {
        (self.values[s][k], self.values[s][k + 1])
    }

    fn gaps(&self) -> Vec<(usize, f64, f64)> {
        // (index of the At entry starting the gap, θ_k, θ_{k+1})
        let mut out = Vec::new();
        for k in 0..self.grid.len() {
            if self.grid[k].side != Side::At {
                continue;
            }
            if let Some(next) = self.grid.get(k + 1) {
                out.push((k, self.grid[k].theta, next.theta));
            }
        }
        out
    }

    /// Value at `θ` (right-continuous), interpolating linearly between grid
    /// points. Zero outside the grid.
    pub fn value_at(&self, source: &str, theta: f64, side: Side) -> Result<f64> {
        let s = self.index(source)?;
        Ok(self.value_at_index(s, GridPoint { theta, side }))
    }

    fn value_at_index(&self, s: usize, g: GridPoint) -> f64 {
        if let Some(k) = self.grid.iter().position(|q| q.cmp_key(&g) == Ordering::Equal) {
            return self.values[s][k];
        }
        for (k, lo, hi) in self.gaps() {
            if g.theta >= lo && g.theta <= hi {
                if g.theta == hi {
                    // hi is on the grid; only a missing LeftLimit entry lands here
                    continue;
                }
                let (a, b) = self.ends(s, k);
                return a + (b - a) * (g.theta - lo) / (hi - lo);
            }
        }
        if let Some(k) = self.grid.iter().position(|q| q.theta == g.theta) {
            return self.values[s][k];
        }
        0.0
    }

    /// `∫ curve(θ) dM(θ)` for the mixing measure of `spec`. With
    /// `dM = 2 dθ` this is the mean quadratic consistent score.
    pub fn integrate(&self, source: &str, spec: &ConvexSpec) -> Result<f64> {
        let s = self.index(source)?;
        if let crate::scoring::ConvexSpecRepr::Points { locations, masses } = spec.repr() {
            return Ok(locations
                .iter()
                .zip(&masses)
                .map(|(&t, &m)| m * self.value_at_index(s, GridPoint::at(t)))
                .sum());
        }
        let knots = spec_knots(spec);
        let mut total = 0.0;
        for (k, lo, hi) in self.gaps() {
            let (a, b) = self.ends(s, k);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let line = |t: f64| a + (b - a) * (t - lo) / (hi - lo);
            let f = |t: f64| line(t) * spec.mixing_density(t).unwrap_or(0.0);
            let mut cuts: Vec<f64> = vec![lo, hi];
            cuts.extend(knots.iter().copied().filter(|&t| t > lo && t < hi));
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                total += piece_integral(spec, &f, w[0], w[1]);
            }
        }
        Ok(total)
    }
}

fn spec_knots(spec: &ConvexSpec) -> Vec<f64> {
    use crate::scoring::ConvexSpecRepr as R;
    match spec.repr() {
        R::Density { grid, .. } => grid,
        R::Extremes { lo_knee, hi_knee } => vec![lo_knee, hi_knee],
        _ => Vec::new(),
    }
}

fn piece_integral<F: Fn(f64) -> f64>(spec: &ConvexSpec, f: &F, l: f64, u: f64) -> f64 {
    if u <= l {
        return 0.0;
    }
    if let crate::scoring::ConvexSpecRepr::Exp { .. } = spec.repr() {
        let scale = (f(l).abs() + f(u).abs() + f(0.5 * (l + u)).abs()) * (u - l);
        return quad::integrate(f, l, u, 1e-14 * scale.max(1e-300));
    }
    // integrand is at most quadratic on the piece; 2-point Gauss is exact
    let (mid, half) = (0.5 * (l + u), 0.5 * (u - l));
    let node = half / 3f64.sqrt();
    (f(mid - node) + f(mid + node)) * half
}

/// Outcome of an empirical dominance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub dominates: bool,
    /// Grid points where A's mean elementary score exceeds B's.
    pub violations: Vec<GridPoint>,
}

/// Absolute tolerance on mean elementary scores in dominance checks.
pub const DOMINANCE_TOL: f64 = 1e-12;

/// Whether `source_a` empirically dominates `source_b` for `H^α_{a,b}`,
/// i.e. has no larger mean elementary score at any threshold.
pub fn dominance_check(d: &ForecastDataset, source_a: &str, source_b: &str, p: &HuberParams) -> Result<Dominance> {
    dominance_on_curve(&murphy_diagram(d, p), source_a, source_b)
}

/// Dominance verdict read off an existing curve.
pub fn dominance_on_curve(curve: &MurphyCurve, source_a: &str, source_b: &str) -> Result<Dominance> {
    let (ia, ib) = (curve.index(source_a)?, curve.index(source_b)?);
    let violations: Vec<GridPoint> = curve
        .grid
        .iter()
        .enumerate()
        .filter(|(k, _)| curve.values[ia][*k] > curve.values[ib][*k] + DOMINANCE_TOL)
        .map(|(_, g)| *g)
        .collect();
    Ok(Dominance { dominates: violations.is_empty(), violations })
}
