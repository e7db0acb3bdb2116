//! Semiparametric estimation of asymmetric tail dependence with the
//! symmetrized Joe-Clayton copula.
//!
//! The crate is organised bottom-up:
//!
//! * [`copula`]: Joe-Clayton and symmetrized Joe-Clayton CDFs, densities and
//!   conditional distributions.
//! * [`margins`]: rank-based probability integral transform and the
//!   Kolmogorov-Smirnov uniformity test.
//! * [`volatility`]: GARCH(1,1) quasi-maximum-likelihood filter and the ARCH
//!   LM test.
//! * [`estimator`]: canonical maximum likelihood fit of the tail coefficients,
//!   Hessian and bootstrap inference, report formatting.
//! * [`sampler`]: exact sampling from the copula by conditional inversion.
//! * [`pipeline`]: recommendation/price ingestion, panel construction,
//!   the three-subsample study and synthetic fixtures.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }};
}

pub mod config;
pub mod copula;
pub mod estimator;
pub mod margins;
pub mod optim;
pub mod pipeline;
pub mod sampler;
pub mod seeds;
pub mod volatility;

pub use copula::{ReflectedTerm, ShapeParams, Sjc, TailParams, UnitPair};
pub use estimator::{FitConfig, FitReport};
pub use margins::PseudoObservations;
pub use volatility::{ArchTestResult, GarchFit, GarchParams};
