//! Acceptance suite. Each test writes one `[PASS]` or `[FAIL]` line straight
//! to stderr (bypassing output capture) and then asserts.

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use huberval::scoring::{classical_huber_loss, consistent_expectile_score, consistent_quantile_score, ConvexSpec};
use huberval::simulation::{Observations, SwitchingConfig};
use huberval::verification::{dm_p_value, dm_statistic};
use huberval::{
    consistent_huber_score, expectile, huber_functional, mixture_quadrature_score, murphy_diagram, quantile,
    switching_experiment, Distribution, ForecastDataset, HuberParams, Sidedness, SwitchingReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "[{tag}] {name}: {detail}");
    assert!(pass, "{name}: {detail}");
}

const STUDY_SEED: u64 = 1;
const SMOKE_SEED: u64 = 2;

struct Study {
    report: SwitchingReport,
    seconds: f64,
}

fn full_study() -> &'static Study {
    static STUDY: OnceLock<Study> = OnceLock::new();
    STUDY.get_or_init(|| {
        let start = Instant::now();
        let report =
            switching_experiment(&SwitchingConfig { reps: 4000, days: 730, seed: STUDY_SEED, ..Default::default() })
                .expect("study runs");
        Study { report, seconds: start.elapsed().as_secs_f64() }
    })
}

#[test]
fn switching_anchor_squared_error_debiased_mean() {
    let study = full_study();
    let cell = study.report.cell("DebiasedMean", f64::INFINITY, Observations::Contaminated).unwrap();
    let full_ok = (cell.probability - 0.76).abs() <= 0.03;

    let smoke = switching_experiment(&SwitchingConfig { reps: 400, days: 730, seed: SMOKE_SEED, ..Default::default() })
        .unwrap();
    let p_smoke = smoke.probability("DebiasedMean", f64::INFINITY, Observations::Contaminated).unwrap();
    let smoke_ok = (p_smoke - 0.76).abs() <= 0.08;
    let time_ok = study.seconds <= 15.0 * 60.0;

    report(
        "switching anchor 1 (squared error, contaminated, DebiasedMean)",
        full_ok && smoke_ok && time_ok,
        format!(
            "reps=4000 p={:.4} (SE {:.4}, target 0.76±0.03); reps=400 p={:.4} (target 0.76±0.08); runtime {:.0}s (limit 900s)",
            cell.probability, cell.std_error, p_smoke, study.seconds
        ),
    );
}

#[test]
fn switching_anchor_huber_scoring_huber_competitor() {
    let study = full_study();
    let cell = study.report.cell("Huber2.5", 2.5, Observations::Contaminated).unwrap();
    report(
        "switching anchor 2 (a=2.5 scoring, contaminated, Huber2.5)",
        (cell.probability - 0.16).abs() <= 0.03,
        format!("reps=4000 p={:.4} (SE {:.4}, target 0.16±0.03)", cell.probability, cell.std_error),
    );
}

#[test]
fn switching_clean_squared_error_rarely_rejects() {
    let study = full_study();
    let worst = study
        .report
        .cells
        .iter()
        .filter(|c| c.a == "inf" && c.observations == Observations::Clean)
        .map(|c| (c.competitor.clone(), c.probability))
        .fold((String::new(), -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let max_se = study.report.cells.iter().map(|c| c.std_error).fold(0.0, f64::max);
    report(
        "clean-data consistency (squared error, clean, all competitors)",
        worst.1 <= 0.15 && max_se <= 0.008,
        format!("reps=4000 max p={:.4} ({}), limit 0.15; max SE {:.4} (limit 0.008)", worst.1, worst.0, max_se),
    );
}

// Generalized Huber loss from its three-branch definition.
fn oracle_loss(alpha: f64, a: f64, b: f64, u: f64) -> f64 {
    if u > b {
        (1.0 - alpha) * b * (u - b / 2.0)
    } else if u < -a {
        -alpha * a * (u + a / 2.0)
    } else if u >= 0.0 {
        (1.0 - alpha) * 0.5 * u * u
    } else {
        alpha * 0.5 * u * u
    }
}

fn fuzz_sample(rng: &mut ChaCha8Rng, max_n: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max_n);
    let discrete = rng.random_bool(0.3);
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(-10.0..10.0);
            if discrete {
                v.round()
            } else {
                v
            }
        })
        .collect()
}

fn fuzz_params(rng: &mut ChaCha8Rng) -> HuberParams {
    HuberParams::new(rng.random_range(0.02..0.98), rng.random_range(0.05..5.0), rng.random_range(0.05..5.0)).unwrap()
}

#[test]
fn minimizer_matches_dense_grid() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    for case in 0..200 {
        let values = fuzz_sample(&mut rng, 50);
        let p = fuzz_params(&mut rng);
        let f = Distribution::empirical(&values).unwrap();
        let h = huber_functional(&f, &p, 1e-12).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = hi - lo;
        if width == 0.0 {
            if h.lo != lo || h.hi != lo {
                failures.push(format!("case {case}: point mass {lo} gave [{}, {}]", h.lo, h.hi));
            }
            continue;
        }
        let step = 1e-3 * width;
        let mean = |x: f64| values.iter().map(|&y| oracle_loss(p.alpha(), p.a(), p.b(), x - y)).sum::<f64>();
        let (mut best_x, mut best) = (f64::NAN, f64::INFINITY);
        for k in 0..=1200 {
            let x = lo - 0.1 * width + k as f64 * step;
            let v = mean(x);
            if v < best {
                best = v;
                best_x = x;
            }
        }
        if !(best_x >= h.lo - step && best_x <= h.hi + step) {
            failures.push(format!("case {case}: grid argmin {best_x} outside [{}, {}] ± {step}", h.lo, h.hi));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "minimizer-oracle equivalence (200 fuzzed empirical laws)",
        failures.is_empty() && secs <= 60.0,
        format!(
            "{} failures, runtime {secs:.2}s (limit 60s){}",
            failures.len(),
            failures.first().map(|s| format!("; first: {s}")).unwrap_or_default()
        ),
    );
}

fn fuzz_spec(rng: &mut ChaCha8Rng) -> ConvexSpec {
    match rng.random_range(0..3) {
        0 => ConvexSpec::quadratic(),
        1 => loop {
            let l: f64 = rng.random_range(-2.0..2.0);
            if l.abs() > 1e-3 {
                break ConvexSpec::exponential(l).unwrap();
            }
        },
        _ => {
            let knots = rng.random_range(2..=8);
            let mut grid = vec![rng.random_range(-6.0..0.0)];
            for _ in 1..knots {
                let last = *grid.last().unwrap();
                grid.push(last + rng.random_range(0.05..2.0));
            }
            let density: Vec<f64> = (1..knots).map(|_| rng.random_range(0.0..3.0)).collect();
            ConvexSpec::piecewise_density(&grid, &density).unwrap()
        }
    }
}

#[test]
fn mixture_representation_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = fuzz_spec(&mut rng);
        let p = fuzz_params(&mut rng);
        let (x, y) = (rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let diff = (mixture_quadrature_score(&c, &p, x, y) - consistent_huber_score(&c, &p, x, y)).abs();
        worst = worst.max(diff);
    }
    report(
        "mixture representation (1000 fuzzed scores)",
        worst <= 1e-8,
        format!("max |mixture - closed form| = {worst:.3e} (limit 1e-8)"),
    );
}

#[test]
fn limit_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut q_err, mut e_err, mut s_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..200 {
        let values = fuzz_sample(&mut rng, 40);
        let f = Distribution::empirical(&values).unwrap();
        let alpha = rng.random_range(0.02..0.98);
        let q = quantile(&f, alpha).unwrap();
        let h = huber_functional(&f, &HuberParams::symmetric(alpha, 1e-4).unwrap(), 1e-12).unwrap();
        q_err = q_err.max((h.lo - q.lo).abs()).max((h.hi - q.hi).abs());

        let (lo, hi) = f.support_range();
        let big = 1e6 * (hi - lo).max(1.0);
        let e = expectile(&f, alpha, 1e-12).unwrap();
        let h = huber_functional(&f, &HuberParams::symmetric(alpha, big).unwrap(), 1e-12).unwrap();
        e_err = e_err.max((h.midpoint() - e).abs());
    }
    for _ in 0..500 {
        let c = fuzz_spec(&mut rng);
        let alpha = rng.random_range(0.02..0.98);
        let (x, y) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let wide = consistent_huber_score(&c, &HuberParams::symmetric(alpha, 1e6).unwrap(), x, y);
        let ex = consistent_expectile_score(&c, alpha, x, y);
        let a = 1e-7;
        let narrow = consistent_huber_score(&c, &HuberParams::symmetric(alpha, a).unwrap(), x, y) / a;
        let qu = consistent_quantile_score(&c, alpha, x, y);
        s_err = s_err.max((wide - ex).abs() / ex.abs().max(1.0)).max((narrow - qu).abs() / qu.abs().max(1.0));
    }
    report(
        "limit laws (quantile, expectile, rescaled scores)",
        q_err <= 1e-3 && e_err <= 1e-6 && s_err <= 1e-4,
        format!(
            "quantile endpoints {q_err:.2e} (limit 1e-3); expectile midpoint {e_err:.2e} (limit 1e-6); scores {s_err:.2e} (limit 1e-4, relative to max(1,|S|))"
        ),
    );
}

#[test]
fn tail_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let tol = 1e-11;
    let mut worst: f64 = 0.0;
    let mut moved_total = 0;
    for _ in 0..200 {
        let values = fuzz_sample(&mut rng, 50);
        let p = fuzz_params(&mut rng);
        let h = huber_functional(&Distribution::empirical(&values).unwrap(), &p, tol).unwrap();
        let (left, right) = (h.lo - p.b(), h.hi + p.a());
        let moved: Vec<f64> = values
            .iter()
            .map(|&v| {
                if v < left {
                    v - rng.random_range(0.0..20.0)
                } else if v > right {
                    v + rng.random_range(0.0..20.0)
                } else {
                    v
                }
            })
            .collect();
        moved_total += moved.iter().zip(&values).filter(|(m, v)| m != v).count();
        let g = huber_functional(&Distribution::empirical(&moved).unwrap(), &p, tol).unwrap();
        worst = worst.max((g.lo - h.lo).abs()).max((g.hi - h.hi).abs());
    }
    report(
        "tail invariance (200 fuzzed relocations)",
        worst <= 2.0 * tol && moved_total > 0,
        format!("max endpoint change {worst:.2e} (limit {:.0e}); {moved_total} points relocated", 2.0 * tol),
    );
}

#[test]
fn murphy_score_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let mut fixtures = vec![ForecastDataset::new(
        vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![("A".into(), vec![1.0, 2.0, 0.0, 1.0, 3.0, 1.0]), ("B".into(), vec![2.0, 1.0, 1.0, 2.0, 2.0, 0.0])],
    )
    .unwrap()];
    for _ in 0..20 {
        let n = rng.random_range(2..60);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..40.0)).collect();
        let a: Vec<f64> = y.iter().map(|v| v + rng.random_range(-6.0..6.0)).collect();
        let b: Vec<f64> = y.iter().map(|v| v + rng.random_range(-2.0..9.0)).collect();
        fixtures.push(ForecastDataset::new(y, vec![("A".into(), a), ("B".into(), b)]).unwrap());
    }
    let equal_weight = ConvexSpec::quadratic();
    for d in &fixtures {
        for a in [0.5, 3.0] {
            let curve = murphy_diagram(d, &HuberParams::symmetric(0.5, a).unwrap());
            for s in ["A", "B"] {
                let area = curve.integrate(s, &equal_weight).unwrap();
                let fc = d.source(s).unwrap();
                let classical =
                    fc.iter().zip(d.observations()).map(|(x, y)| classical_huber_loss(a, x - y)).sum::<f64>()
                        / d.len() as f64;
                worst = worst.max((area - classical).abs() / classical.max(1.0));
            }
        }
    }
    report(
        "Murphy/score duality (area under dM = 2dθ vs mean classical Huber loss = 2·mean h^{1/2}_{a,a})",
        worst <= 1e-8,
        format!("max deviation {worst:.2e} over {} fixtures (limit 1e-8)", fixtures.len()),
    );
}

#[test]
fn two_point_interval() {
    let f = Distribution::empirical(&[0.0, 10.0]).unwrap();
    let p = HuberParams::new(0.5, 1.0, 1.0).unwrap();
    let h = huber_functional(&f, &p, huberval::functionals::default_tolerance(&f)).unwrap();
    // Plateau endpoints for two equally weighted atoms: [min + b, max - a].
    let (lo, hi) = (0.0 + p.b(), 10.0 - p.a());
    report(
        "two-point interval (sample {0,10}, alpha=0.5, a=b=1)",
        (h.lo - 1.0).abs() <= 1e-6 && (h.hi - 9.0).abs() <= 1e-6 && h.lo == lo && h.hi == hi,
        format!("[{}, {}] (expected [1, 9] within 1e-6)", h.lo, h.hi),
    );
}

#[test]
fn dm_test_uniform_under_equal_skill() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (reps, n) = (2000, 730);
    let mut rejections = 0;
    for _ in 0..reps {
        let diffs: Vec<f64> = (0..n)
            .map(|_| {
                let y: f64 = rng.sample(rand_distr::StandardNormal);
                let ea: f64 = rng.sample(rand_distr::StandardNormal);
                let eb: f64 = rng.sample(rand_distr::StandardNormal);
                let (xa, xb) = (y + ea, y + eb);
                (xa - y).powi(2) - (xb - y).powi(2)
            })
            .collect();
        if dm_p_value(dm_statistic(&diffs).unwrap(), Sidedness::Two) < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    report(
        "test size under equal skill (2000 replications, nominal 5%)",
        (0.035..=0.065).contains(&rate),
        format!("rejection rate {rate:.4} (limits [0.035, 0.065])"),
    );
}
