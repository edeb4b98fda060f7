//! Huber functionals and robust point-forecast verification.
//!
//! The Huber functional `H^α_{a,b}(F)` interpolates between the
//! `α`-quantile (`a, b → 0`) and the `α`-expectile (`a, b → ∞`). This crate
//! computes it for empirical, piecewise-linear and parametric laws, provides
//! its consistent scoring functions and their elementary (mixture)
//! representation, and builds on them Murphy diagrams, dominance checks and
//! tests of equal predictive performance.
//!
//! ```
//! use huberval::{huber_functional, Distribution, HuberParams};
//!
//! let f = Distribution::empirical(&[0.0, 10.0]).unwrap();
//! let p = HuberParams::new(0.5, 1.0, 1.0).unwrap();
//! let h = huber_functional(&f, &p, 1e-12).unwrap();
//! assert!((h.lo - 1.0).abs() < 1e-9 && (h.hi - 9.0).abs() < 1e-9);
//! ```

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod functionals;
pub mod io;
pub(crate) mod quad;
pub(crate) mod roots;
pub mod scoring;
pub mod simulation;
pub mod special;
pub mod verification;

pub use distributions::{Distribution, DistributionSpec};
pub use error::{Error, Result};
pub use functionals::{expectile, huber_functional, quantile, HuberParams, IntervalResult};
pub use scoring::{
    consistent_huber_score, elementary_huber_score, generalized_huber_loss, mixture_quadrature_score, ConvexSpec,
};
pub use simulation::{
    competitor_quotes, sample_day, switching_experiment, Competitor, CompetitorSet, EnvironmentConfig, SwitchingConfig,
    SwitchingReport,
};
pub use verification::{
    dm_test, dominance_check, mean_score, murphy_diagram, skill_score, DmTestResult, Dominance, ForecastDataset,
    GridPoint, MurphyCurve, ScoringRule, Side, Sidedness,
};
