//! Canonical maximum likelihood: empirical margins first, then the copula
//! tail coefficients by maximizing the copula log-likelihood.

use std::fmt::Write as _;

use nalgebra::Matrix2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::{PreparedPair, ReflectedTerm, Sjc, TailParams, LAMBDA_FLOOR};
use crate::margins::{empirical_pit, MarginError, PseudoObservations};
use crate::optim::{logistic, logit, NelderMead};
use crate::seeds;

/// Fewest pseudo-observations accepted by [`fit_sjc`].
pub const MIN_FIT_N: usize = 50;
/// Finite-difference step for the Hessian, on the natural parameter scale.
pub const HESSIAN_STEP: f64 = 1e-4;
const START_GRID: [f64; 4] = [0.05, 0.25, 0.5, 0.75];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("{n} observations is below the minimum of {min} for a copula fit")]
    TooFewObservations { n: usize, min: usize },
    #[error("bootstrap needs at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error(transparent)]
    Margin(#[from] MarginError),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Initial `(λu, λl)` points for the multistart search.
    pub starts: Vec<(f64, f64)>,
    pub simplex: NelderMead,
    /// Tolerance of the per-start screening runs that precede the final polish.
    pub screening_tol: f64,
    pub hessian_step: f64,
    pub min_n: usize,
    pub mode: ReflectedTerm,
}

impl Default for FitConfig {
    fn default() -> Self {
        let starts = START_GRID
            .iter()
            .flat_map(|&u| START_GRID.iter().map(move |&l| (u, l)))
            .collect();
        Self {
            starts,
            simplex: NelderMead {
                max_iterations: 2000,
                x_tol: 1e-8,
                f_tol: 1e-9,
                initial_step: 0.5,
            },
            screening_tol: 1e-2,
            hessian_step: HESSIAN_STEP,
            min_n: MIN_FIT_N,
            mode: ReflectedTerm::Swapped,
        }
    }
}

/// Serializes non-finite values (the "not available" sentinel) as `null`.
mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub se_u: f64,
    pub se_l: f64,
    pub ci_u: (f64, f64),
    pub ci_l: (f64, f64),
    pub replicates: usize,
    pub dropped: usize,
}

/// One estimated row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub subsample_label: String,
    pub lambda_u_hat: f64,
    pub lambda_l_hat: f64,
    /// Standard errors from the inverse observed information. When the
    /// Hessian is not negative definite (`hessian_ok == false`) these come
    /// from each parameter's own curvature, or are NaN (`null` in JSON).
    #[serde(with = "nullable_f64")]
    pub se_u: f64,
    #[serde(with = "nullable_f64")]
    pub se_l: f64,
    #[serde(with = "nullable_f64")]
    pub t_u: f64,
    #[serde(with = "nullable_f64")]
    pub t_l: f64,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
    pub converged: bool,
    pub hessian_ok: bool,
    pub boundary_u: bool,
    pub boundary_l: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_p_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_p_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapResult>,
}

impl FitReport {
    pub fn params(&self) -> TailParams {
        TailParams::clamped(self.lambda_u_hat, self.lambda_l_hat)
    }
}

/// Copula log-likelihood of a fixed sample, prepared for repeated evaluation.
pub struct CopulaLikelihood {
    prepared: Vec<PreparedPair>,
    mode: ReflectedTerm,
}

impl CopulaLikelihood {
    pub fn new(obs: &PseudoObservations, mode: ReflectedTerm) -> Self {
        Self {
            prepared: obs.pairs().iter().map(|&p| PreparedPair::new(p)).collect(),
            mode,
        }
    }

    pub fn eval(&self, params: TailParams) -> f64 {
        let c = Sjc::with_mode(params, self.mode);
        self.prepared.iter().map(|p| c.ln_pdf_prepared(p)).sum()
    }
}

/// `Σ ln c(û_i, v̂_i | λu, λl)`.
pub fn sjc_loglik(obs: &PseudoObservations, params: TailParams) -> f64 {
    CopulaLikelihood::new(obs, ReflectedTerm::Swapped).eval(params)
}

fn to_params(theta: &[f64]) -> TailParams {
    TailParams::clamped(logistic(theta[0]), logistic(theta[1]))
}

fn at_boundary(x: f64) -> bool {
    x <= 2.0 * LAMBDA_FLOOR || x >= 1.0 - 2.0 * LAMBDA_FLOOR
}

/// Observed-information standard errors and whether the full 2x2
/// information matrix was positive definite. The stencil centre is moved
/// inside the evaluation domain when the estimate sits within one step of
/// a bound. When the matrix is not positive definite each coordinate falls
/// back to its own curvature, and a coordinate with non-negative curvature
/// gets NaN.
fn hessian_se(lik: &CopulaLikelihood, est: (f64, f64), h: f64) -> ((f64, f64), bool) {
    let inner = |x: f64| x.clamp(LAMBDA_FLOOR + h, 1.0 - LAMBDA_FLOOR - h);
    let (a, b) = (inner(est.0), inner(est.1));
    let f = |x: f64, y: f64| lik.eval(TailParams::clamped(x, y));
    let f0 = f(a, b);
    let faa = (f(a + h, b) - 2.0 * f0 + f(a - h, b)) / (h * h);
    let fbb = (f(a, b + h) - 2.0 * f0 + f(a, b - h)) / (h * h);
    let fab = (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h))
        / (4.0 * h * h);
    let info = Matrix2::new(-faa, -fab, -fab, -fbb);
    if info[(0, 0)] > 0.0 && info.determinant() > 0.0 {
        if let Some(cov) = info.try_inverse() {
            let (vu, vl) = (cov[(0, 0)], cov[(1, 1)]);
            if vu > 0.0 && vl > 0.0 && vu.is_finite() && vl.is_finite() {
                return ((vu.sqrt(), vl.sqrt()), true);
            }
        }
    }
    let marginal = |i: f64| if i > 0.0 { 1.0 / i.sqrt() } else { f64::NAN };
    ((marginal(-faa), marginal(-fbb)), false)
}

/// Multistart search: every start is run to a coarse tolerance, then the
/// best candidate is polished to the configured tolerance.
/// Returns `((λu, λl), loglik, converged)`.
fn maximize(lik: &CopulaLikelihood, config: &FitConfig) -> ((f64, f64), f64, bool) {
    let objective = |th: &[f64]| -lik.eval(to_params(th));
    let coarse = NelderMead {
        x_tol: config.screening_tol,
        f_tol: config.screening_tol,
        ..config.simplex.clone()
    };
    let best = config
        .starts
        .iter()
        .map(|&(u, l)| coarse.minimize(objective, &[logit(u), logit(l)]))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    let polish = NelderMead {
        initial_step: config.simplex.initial_step * 0.1,
        ..config.simplex.clone()
    };
    let refined = polish.minimize(objective, &best.x);
    let winner = if refined.value <= best.value { &refined } else { &best };
    let p = to_params(&winner.x);
    ((p.lambda_u(), p.lambda_l()), -winner.value, refined.converged)
}

/// Maximum likelihood fit of the tail coefficients with Hessian-based inference.
pub fn fit_sjc(obs: &PseudoObservations, config: &FitConfig) -> Result<FitReport, EstimatorError> {
    let n = obs.len();
    if n < config.min_n {
        return Err(EstimatorError::TooFewObservations {
            n,
            min: config.min_n,
        });
    }
    let lik = CopulaLikelihood::new(obs, config.mode);
    let ((lu, ll), loglik, converged) = maximize(&lik, config);
    let ((se_u, se_l), hessian_ok) = hessian_se(&lik, (lu, ll), config.hessian_step);
    Ok(FitReport {
        subsample_label: String::new(),
        lambda_u_hat: lu,
        lambda_l_hat: ll,
        se_u,
        se_l,
        t_u: lu / se_u,
        t_l: ll / se_l,
        loglik,
        aic: -2.0 * loglik + 4.0,
        n,
        converged,
        hessian_ok,
        boundary_u: at_boundary(lu),
        boundary_l: at_boundary(ll),
        ks_p_u: None,
        ks_p_v: None,
        bootstrap: None,
    })
}

/// Nonparametric bootstrap: resample pairs, re-rank each margin, refit.
///
/// Replicates are seeded by `(seed, replicate index)` and run in parallel;
/// each refit starts from the full-sample estimate and two spread points.
pub fn bootstrap_se(
    obs: &PseudoObservations,
    replicates: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<BootstrapResult, EstimatorError> {
    if replicates < 2 {
        return Err(EstimatorError::TooFewReplicates(replicates));
    }
    let full = fit_sjc(obs, config)?;
    let mut rep_config = config.clone();
    rep_config.starts = vec![
        (
            full.lambda_u_hat.clamp(0.01, 0.99),
            full.lambda_l_hat.clamp(0.01, 0.99),
        ),
        (0.05, 0.05),
        (0.5, 0.5),
    ];
    let pairs = obs.pairs();
    let n = pairs.len();
    let estimates: Vec<Option<(f64, f64)>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeds::rng(seeds::derive(seed, b));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let x: Vec<f64> = idx.iter().map(|&i| pairs[i].u).collect();
            let y: Vec<f64> = idx.iter().map(|&i| pairs[i].v).collect();
            let resampled = PseudoObservations::from_raw(&x, &y).ok()?;
            let r = fit_sjc(&resampled, &rep_config).ok()?;
            r.converged.then_some((r.lambda_u_hat, r.lambda_l_hat))
        })
        .collect();
    let kept: Vec<(f64, f64)> = estimates.iter().flatten().copied().collect();
    let dropped = replicates - kept.len();
    let us: Vec<f64> = kept.iter().map(|e| e.0).collect();
    let ls: Vec<f64> = kept.iter().map(|e| e.1).collect();
    Ok(BootstrapResult {
        se_u: std_dev(&us),
        se_l: std_dev(&ls),
        ci_u: (percentile(&us, 0.025), percentile(&us, 0.975)),
        ci_l: (percentile(&ls, 0.025), percentile(&ls, 0.975)),
        replicates: kept.len(),
        dropped,
    })
}

/// Convenience: rank two raw margins and fit.
pub fn fit_raw(x: &[f64], y: &[f64], config: &FitConfig) -> Result<FitReport, EstimatorError> {
    if x.len() < 2 {
        return Err(EstimatorError::Margin(MarginError::InsufficientSample(x.len())));
    }
    let obs = PseudoObservations::from_raw(x, y)?;
    let mut r = fit_sjc(&obs, config)?;
    r.ks_p_u = crate::margins::ks_uniform_test(&empirical_pit(x)?).ok().map(|k| k.p_value);
    r.ks_p_v = crate::margins::ks_uniform_test(&empirical_pit(y)?).ok().map(|k| k.p_value);
    Ok(r)
}

fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Linear-interpolation percentile (type 7).
fn percentile(x: &[f64], q: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

/// Row heading used in the text table.
pub fn display_label(label: &str) -> &str {
    match label {
        "full" => "Unconditional",
        "B_upgrade" => "Conditional on recommendation upgrade",
        "A_downgrade" => "Conditional on recommendation downgrade",
        other => other,
    }
}

fn fmt_ratio(t: f64) -> String {
    if t.is_finite() {
        format!("({t:.3})")
    } else {
        "(n/a)".to_string()
    }
}

/// Fixed-width table: estimates with t-ratios in parentheses beneath them,
/// bootstrap standard errors in brackets when present.
pub fn format_table(reports: &[FitReport]) -> String {
    let label_w = reports
        .iter()
        .map(|r| display_label(&r.subsample_label).len())
        .max()
        .unwrap_or(0)
        .max(13);
    let rule = "-".repeat(label_w + 36);
    let mut out = String::new();
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(
        out,
        "{:<label_w$}{:>12}{:>12}{:>12}",
        "", "lambda_u", "lambda_l", "AIC"
    );
    let _ = writeln!(out, "{rule}");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<label_w$}{:>12.3}{:>12.3}{:>12.2}",
            display_label(&r.subsample_label),
            r.lambda_u_hat,
            r.lambda_l_hat,
            r.aic
        );
        let _ = writeln!(
            out,
            "{:<label_w$}{:>12}{:>12}",
            "",
            fmt_ratio(r.t_u),
            fmt_ratio(r.t_l)
        );
        if let Some(b) = &r.bootstrap {
            let _ = writeln!(
                out,
                "{:<label_w$}{:>12}{:>12}",
                "",
                format!("[{:.3}]", b.se_u),
                format!("[{:.3}]", b.se_l)
            );
        }
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(
        out,
        "Notes: numbers in parentheses are t-ratios. AIC - Akaike's information criterion."
    );
    if reports.iter().any(|r| r.bootstrap.is_some()) {
        let _ = writeln!(out, "Numbers in brackets are bootstrap standard errors.");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{sjc_pdf, UnitPair};
    use crate::sampler::sample_sjc;

    fn tp(u: f64, l: f64) -> TailParams {
        TailParams::new(u, l).unwrap()
    }

    fn obs_from(pairs: &[UnitPair]) -> PseudoObservations {
        let x: Vec<f64> = pairs.iter().map(|p| p.u).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.v).collect();
        PseudoObservations::from_raw(&x, &y).unwrap()
    }

    #[test]
    fn single_pair_loglik() {
        let obs = PseudoObservations::from_pairs(vec![(0.5, 0.5), (0.5, 0.5)]).unwrap();
        let p = tp(0.5, 0.5);
        let one = sjc_pdf(UnitPair::new(0.5, 0.5), p).ln();
        assert_close!(sjc_loglik(&obs, p), 2.0 * one, 1e-12);
    }

    #[test]
    fn loglik_is_permutation_invariant() {
        let batch = sample_sjc(500, tp(0.3, 0.1), 3);
        let obs = obs_from(&batch.pairs);
        let mut rev = batch.pairs.clone();
        rev.reverse();
        let p = tp(0.2, 0.4);
        assert_close!(sjc_loglik(&obs, p), sjc_loglik(&obs_from(&rev), p), 1e-9);
    }

    #[test]
    fn fit_recovers_and_reports() {
        let batch = sample_sjc(3000, tp(0.3, 0.1), 11);
        let obs = obs_from(&batch.pairs);
        let r = fit_sjc(&obs, &FitConfig::default()).unwrap();
        assert!(r.converged && r.hessian_ok);
        assert!((r.lambda_u_hat - 0.3).abs() < 0.08, "{r:?}");
        assert!((r.lambda_l_hat - 0.1).abs() < 0.08, "{r:?}");
        assert_eq!(r.aic, -2.0 * r.loglik + 4.0);
        assert_eq!(r.t_u, r.lambda_u_hat / r.se_u);
        assert_eq!(r.n, 3000);
        assert_close!(r.loglik, sjc_loglik(&obs, r.params()), 1e-9);
    }

    #[test]
    fn too_few_observations() {
        let pairs: Vec<(f64, f64)> = (1..=49).map(|i| (i as f64 / 50.0, i as f64 / 50.0)).collect();
        let obs = PseudoObservations::from_pairs(pairs).unwrap();
        assert!(matches!(
            fit_sjc(&obs, &FitConfig::default()),
            Err(EstimatorError::TooFewObservations { n: 49, .. })
        ));
    }

    #[test]
    fn exchange_and_reflection() {
        let batch = sample_sjc(1500, tp(0.4, 0.15), 8);
        let x: Vec<f64> = batch.pairs.iter().map(|p| p.u).collect();
        let y: Vec<f64> = batch.pairs.iter().map(|p| p.v).collect();
        let cfg = FitConfig::default();
        let base = fit_raw(&x, &y, &cfg).unwrap();
        let swapped = fit_raw(&y, &x, &cfg).unwrap();
        assert_close!(base.lambda_u_hat, swapped.lambda_u_hat, 1e-3);
        assert_close!(base.lambda_l_hat, swapped.lambda_l_hat, 1e-3);
        let nx: Vec<f64> = x.iter().map(|v| -v).collect();
        let ny: Vec<f64> = y.iter().map(|v| -v).collect();
        let reflected = fit_raw(&nx, &ny, &cfg).unwrap();
        assert_close!(base.lambda_u_hat, reflected.lambda_l_hat, 1e-3);
        assert_close!(base.lambda_l_hat, reflected.lambda_u_hat, 1e-3);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let batch = sample_sjc(300, tp(0.3, 0.1), 4);
        let obs = obs_from(&batch.pairs);
        let cfg = FitConfig::default();
        let a = bootstrap_se(&obs, 2, 99, &cfg).unwrap();
        let b = bootstrap_se(&obs, 2, 99, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates + a.dropped, 2);
        assert!(bootstrap_se(&obs, 1, 99, &cfg).is_err());
    }

    #[test]
    fn bootstrap_survives_heavy_ties() {
        let x: Vec<f64> = (0..50).map(|i| (i % 3) as f64).collect();
        let y: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        let obs = PseudoObservations::from_raw(&x, &y).unwrap();
        let r = bootstrap_se(&obs, 5, 1, &FitConfig::default()).unwrap();
        assert_eq!(r.replicates + r.dropped, 5);
    }

    #[test]
    fn table_layout() {
        let row = |label: &str, u, tu, l, tl, aic| FitReport {
            subsample_label: label.into(),
            lambda_u_hat: u,
            lambda_l_hat: l,
            se_u: u / tu,
            se_l: l / tl,
            t_u: tu,
            t_l: tl,
            loglik: (4.0 - aic) / 2.0,
            aic,
            n: 100,
            converged: true,
            hessian_ok: true,
            boundary_u: false,
            boundary_l: false,
            ks_p_u: None,
            ks_p_v: None,
            bootstrap: None,
        };
        let t = format_table(&[row("A_downgrade", 0.158, 2.377, 0.014, 0.320, -19.9)]);
        assert!(t.contains("Conditional on recommendation downgrade"));
        assert!(t.contains("0.158"));
        assert!(t.contains("(2.377)"));
        assert!(t.contains("(0.320)"));
        assert!(t.contains("-19.90"));
        let json = serde_json::to_string(&row("full", 0.1, f64::NAN, 0.1, 1.0, 1.0)).unwrap();
        assert!(json.contains("\"t_u\":null"));
        let back: FitReport = serde_json::from_str(&json).unwrap();
        assert!(back.t_u.is_nan());
    }
}
