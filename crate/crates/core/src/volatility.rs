//! GARCH(1,1) quasi-maximum-likelihood filtering and Engle's ARCH LM test.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::optim::{logistic, logit, NelderMead};
use crate::seeds;

/// Shortest return series accepted by [`garch11_fit`].
pub const MIN_SERIES_LEN: usize = 250;
pub const DEFAULT_ARCH_LAGS: usize = 5;

/// Upper bound on `alpha + beta` during the search.
const MAX_PERSISTENCE: f64 = 1.0 - 1e-6;

/// Deterministic `(alpha, beta)` starting points.
const STARTS: [(f64, f64); 5] = [
    (0.05, 0.90),
    (0.10, 0.80),
    (0.03, 0.95),
    (0.15, 0.60),
    (0.02, 0.50),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolatilityError {
    #[error("series has {len} observations, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("series has zero variance")]
    Degenerate,
    #[error("invalid GARCH parameters: {0}")]
    InvalidParams(String),
    #[error("ARCH test needs at least one lag")]
    ZeroLags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GarchParams {
    pub fn new(mu: f64, omega: f64, alpha: f64, beta: f64) -> Result<Self, VolatilityError> {
        let p = Self {
            mu,
            omega,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), VolatilityError> {
        let ok = self.mu.is_finite()
            && self.omega > 0.0
            && self.omega.is_finite()
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta < 1.0;
        if ok {
            Ok(())
        } else {
            Err(VolatilityError::InvalidParams(format!("{self:?}")))
        }
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub loglik: f64,
    /// Standardized residuals `(r_t - mu) / sigma_t`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Log-likelihood at each multistart initial point.
    pub start_logliks: Vec<f64>,
}

/// Gaussian log-likelihood of `eps` under the variance recursion, with
/// `sigma_0^2` set to the sample variance of `eps`.
fn gaussian_loglik(eps: &[f64], omega: f64, alpha: f64, beta: f64) -> f64 {
    let n = eps.len() as f64;
    let mut var = eps.iter().map(|e| e * e).sum::<f64>() / n;
    let mut ll = 0.0;
    let mut prev_sq = 0.0;
    for (t, &e) in eps.iter().enumerate() {
        if t > 0 {
            var = omega + alpha * prev_sq + beta * var;
        }
        if !(var > 0.0) || !var.is_finite() {
            return f64::NEG_INFINITY;
        }
        ll -= var.ln() + e * e / var;
        prev_sq = e * e;
    }
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln()) + 0.5 * ll
}

fn conditional_sd(eps: &[f64], omega: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let n = eps.len() as f64;
    let mut var = eps.iter().map(|e| e * e).sum::<f64>() / n;
    let mut out = Vec::with_capacity(eps.len());
    for t in 0..eps.len() {
        if t > 0 {
            var = omega + alpha * eps[t - 1] * eps[t - 1] + beta * var;
        }
        out.push(var.sqrt());
    }
    out
}

/// Search vector: `[mu, ln omega, logit(persistence), logit(alpha share)]`.
fn decode(theta: &[f64]) -> (f64, f64, f64, f64) {
    let mu = theta[0];
    let omega = theta[1].exp();
    let persistence = MAX_PERSISTENCE * logistic(theta[2]);
    let alpha = persistence * logistic(theta[3]);
    (mu, omega, alpha, persistence - alpha)
}

fn encode(mu: f64, omega: f64, alpha: f64, beta: f64) -> [f64; 4] {
    let persistence = alpha + beta;
    [
        mu,
        omega.ln(),
        logit(persistence / MAX_PERSISTENCE),
        logit(alpha / persistence),
    ]
}

fn check_series(returns: &[f64], min: usize) -> Result<(), VolatilityError> {
    if returns.len() < min {
        return Err(VolatilityError::TooShort {
            len: returns.len(),
            min,
        });
    }
    if let Some(i) = returns.iter().position(|x| !x.is_finite()) {
        return Err(VolatilityError::NonFinite(i));
    }
    Ok(())
}

fn mean_and_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Gaussian QMLE of `r_t = mu + e_t`, `s²_t = omega + alpha e²_{t-1} + beta s²_{t-1}`.
///
/// The series is standardized before the search and the estimates mapped
/// back, so the fit is equivariant under affine rescaling of the data.
pub fn garch11_fit(returns: &[f64]) -> Result<GarchFit, VolatilityError> {
    check_series(returns, MIN_SERIES_LEN)?;
    let (mean, sd) = mean_and_sd(returns);
    if !(sd > 1e-12 * (1.0 + mean.abs())) {
        return Err(VolatilityError::Degenerate);
    }
    let z: Vec<f64> = returns.iter().map(|r| (r - mean) / sd).collect();
    let mut eps = vec![0.0; z.len()];
    let mut objective = |theta: &[f64]| {
        let (mu, omega, alpha, beta) = decode(theta);
        for (e, x) in eps.iter_mut().zip(&z) {
            *e = x - mu;
        }
        -gaussian_loglik(&eps, omega, alpha, beta)
    };

    // every start is screened at a loose tolerance, the best one polished
    let coarse = NelderMead {
        max_iterations: 4000,
        x_tol: 1e-3,
        f_tol: 1e-4,
        ..Default::default()
    };
    let mut start_logliks = Vec::with_capacity(STARTS.len());
    let mut best: Option<crate::optim::Minimum> = None;
    for &(alpha, beta) in &STARTS {
        let x0 = encode(0.0, 1.0 - alpha - beta, alpha, beta);
        start_logliks.push(-objective(&x0));
        let m = coarse.minimize(&mut objective, &x0);
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
    }
    let screened = best.expect("at least one start");
    let polish = NelderMead {
        max_iterations: 4000,
        initial_step: 0.05,
        ..Default::default()
    };
    let refined = polish.minimize(&mut objective, &screened.x);
    let best = Some(if refined.value <= screened.value { refined } else { screened });
    let best = best.expect("at least one start");
    let (mu_s, omega_s, alpha, beta) = decode(&best.x);
    let eps: Vec<f64> = z.iter().map(|x| x - mu_s).collect();
    let sd_t = conditional_sd(&eps, omega_s, alpha, beta);
    let residuals = eps.iter().zip(&sd_t).map(|(e, s)| e / s).collect();

    let log_sd = sd.ln();
    let n = returns.len() as f64;
    let scale_ll = |ll: f64| ll - n * log_sd;
    Ok(GarchFit {
        params: GarchParams {
            mu: mean + sd * mu_s,
            omega: omega_s * sd * sd,
            alpha,
            beta,
        },
        loglik: scale_ll(-best.value),
        residuals,
        converged: best.converged && best.value.is_finite(),
        start_logliks: start_logliks.into_iter().map(scale_ll).collect(),
    })
}

/// Fits every series independently, in parallel.
pub fn garch11_fit_many(series: &[Vec<f64>]) -> Vec<Result<GarchFit, VolatilityError>> {
    series.par_iter().map(|s| garch11_fit(s)).collect()
}

/// Draws `len` returns from a GARCH(1,1) with Gaussian innovations, starting
/// the variance recursion at its unconditional level.
pub fn garch11_simulate(
    params: GarchParams,
    len: usize,
    seed: u64,
) -> Result<Vec<f64>, VolatilityError> {
    params.validate()?;
    let mut rng = seeds::rng(seed);
    let mut var = params.unconditional_variance();
    let mut prev_sq = 0.0;
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        if t > 0 {
            var = params.omega + params.alpha * prev_sq + params.beta * var;
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        let e = var.sqrt() * z;
        prev_sq = e * e;
        out.push(params.mu + e);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchTestResult {
    pub statistic: f64,
    pub lags: usize,
    pub p_value: f64,
    /// Set when the auxiliary regression could not be run (zero variance).
    pub degenerate: bool,
}

impl ArchTestResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Engle's LM test: regress squared demeaned values on a constant and
/// `lags` of their own lags; `(T - lags) R²` is asymptotically χ²(lags).
pub fn arch_lm_test(series: &[f64], lags: usize) -> Result<ArchTestResult, VolatilityError> {
    if lags == 0 {
        return Err(VolatilityError::ZeroLags);
    }
    check_series(series, lags + 2)?;
    let degenerate = ArchTestResult {
        statistic: 0.0,
        lags,
        p_value: 1.0,
        degenerate: true,
    };
    let (mean, _) = mean_and_sd(series);
    let sq: Vec<f64> = series.iter().map(|x| (x - mean).powi(2)).collect();
    let rows = sq.len() - lags;
    let y = DVector::from_iterator(rows, sq[lags..].iter().copied());
    let x = DMatrix::from_fn(rows, lags + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            sq[lags + i - j]
        }
    });
    let y_mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if !(sst > 0.0) || sst < 1e-24 * y.iter().map(|v| v * v).sum::<f64>() {
        return Ok(degenerate);
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let Some(chol) = xtx.cholesky() else {
        return Ok(degenerate);
    };
    let coef = chol.solve(&xty);
    let resid = &y - &x * coef;
    let ssr = resid.norm_squared();
    let r2 = (1.0 - ssr / sst).max(0.0);
    let statistic = rows as f64 * r2;
    let chi = ChiSquared::new(lags as f64).expect("positive degrees of freedom");
    Ok(ArchTestResult {
        statistic,
        lags,
        p_value: chi.sf(statistic).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Outcome of the i.i.d. screen applied to a security's daily returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenOutcome {
    pub raw: ArchTestResult,
    /// Present when the raw series rejected and was GARCH-filtered.
    pub filtered: Option<ArchTestResult>,
    pub fit: Option<GarchFit>,
    pub passed: bool,
}

/// ARCH-test the raw series; on rejection fit a GARCH(1,1), re-test the
/// standardized residuals and pass only if they no longer reject.
pub fn iid_screen(
    returns: &[f64],
    lags: usize,
    level: f64,
) -> Result<ScreenOutcome, VolatilityError> {
    let raw = arch_lm_test(returns, lags)?;
    if !raw.rejects(level) {
        return Ok(ScreenOutcome {
            raw,
            filtered: None,
            fit: None,
            passed: true,
        });
    }
    let fit = garch11_fit(returns)?;
    let filtered = arch_lm_test(&fit.residuals, lags)?;
    let passed = !filtered.rejects(level);
    Ok(ScreenOutcome {
        raw,
        filtered: Some(filtered),
        fit: Some(fit),
        passed,
    })
}
