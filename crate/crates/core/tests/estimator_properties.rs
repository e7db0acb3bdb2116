use sjc_core::estimator::{bootstrap_se, fit_raw, fit_sjc, sjc_loglik, FitConfig};
use sjc_core::margins::PseudoObservations;
use sjc_core::sampler::{sample_independent, sample_sjc};
use sjc_core::{TailParams, UnitPair};

fn draws(n: usize, lu: f64, ll: f64, seed: u64) -> Vec<UnitPair> {
    sample_sjc(n, TailParams::new(lu, ll).unwrap(), seed).pairs
}

fn columns(pairs: &[UnitPair]) -> (Vec<f64>, Vec<f64>) {
    pairs.iter().map(|p| (p.u, p.v)).unzip()
}

#[test]
fn monotone_transforms_leave_the_fit_unchanged() {
    let (x, y) = columns(&draws(600, 0.3, 0.1, 11));
    let config = FitConfig::default();
    let base = fit_raw(&x, &y, &config).unwrap();
    let transforms: [(fn(f64) -> f64, fn(f64) -> f64); 3] = [
        (|t| t.exp(), |t| 3.0 * t - 7.0),
        (|t| t.powi(3), |t| (t / (1.0 - t)).ln()),
        (|t| -1.0 / t, |t| 1e6 * t),
    ];
    for (f, g) in transforms {
        let fx: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let gy: Vec<f64> = y.iter().map(|&t| g(t)).collect();
        let r = fit_raw(&fx, &gy, &config).unwrap();
        assert_eq!(r.lambda_u_hat, base.lambda_u_hat);
        assert_eq!(r.lambda_l_hat, base.lambda_l_hat);
        assert_eq!(r.loglik, base.loglik);
        assert_eq!(r.se_u, base.se_u);
    }
}

#[test]
fn aic_and_loglik_identities() {
    let obs = PseudoObservations::from_pairs(columns_to_pairs(&draws(500, 0.4, 0.2, 3))).unwrap();
    let r = fit_sjc(&obs, &FitConfig::default()).unwrap();
    assert_eq!(r.aic, -2.0 * r.loglik + 2.0 * 2.0);
    assert_eq!(r.loglik, sjc_loglik(&obs, r.params()));
    assert_eq!(r.t_u, r.lambda_u_hat / r.se_u);
    assert_eq!(r.n, 500);
}

fn columns_to_pairs(p: &[UnitPair]) -> Vec<(f64, f64)> {
    p.iter().map(|q| (q.u, q.v)).collect()
}

#[test]
fn transposition_and_reflection() {
    let pairs = draws(800, 0.35, 0.15, 21);
    let config = FitConfig::default();
    let fit = |pts: Vec<(f64, f64)>| fit_sjc(&PseudoObservations::from_pairs(pts).unwrap(), &config).unwrap();
    let base = fit(columns_to_pairs(&pairs));
    let t = fit(pairs.iter().map(|p| (p.v, p.u)).collect());
    assert!((t.lambda_u_hat - base.lambda_u_hat).abs() < 1e-6);
    assert!((t.lambda_l_hat - base.lambda_l_hat).abs() < 1e-6);
    let r = fit(pairs.iter().map(|p| (1.0 - p.u, 1.0 - p.v)).collect());
    assert!((r.lambda_u_hat - base.lambda_l_hat).abs() < 1e-4, "{r:?} {base:?}");
    assert!((r.lambda_l_hat - base.lambda_u_hat).abs() < 1e-4);
}

#[test]
fn fits_and_bootstrap_replay_exactly() {
    let obs = PseudoObservations::from_pairs(columns_to_pairs(&draws(300, 0.3, 0.1, 5))).unwrap();
    let config = FitConfig::default();
    assert_eq!(fit_sjc(&obs, &config).unwrap(), fit_sjc(&obs, &config).unwrap());
    let a = bootstrap_se(&obs, 6, 77, &config).unwrap();
    let b = bootstrap_se(&obs, 6, 77, &config).unwrap();
    assert_eq!(a, b);
    let c = bootstrap_se(&obs, 6, 78, &config).unwrap();
    assert_ne!(a, c);
}

#[test]
fn bootstrap_and_hessian_errors_agree() {
    let (x, y) = columns(&draws(1000, 0.3, 0.1, 8));
    let obs = PseudoObservations::from_raw(&x, &y).unwrap();
    let config = FitConfig::default();
    let r = fit_sjc(&obs, &config).unwrap();
    assert!(r.hessian_ok);
    let b = bootstrap_se(&obs, 40, 1, &config).unwrap();
    assert!(b.dropped <= 2);
    for (boot, hess) in [(b.se_u, r.se_u), (b.se_l, r.se_l)] {
        let ratio = boot / hess;
        assert!((0.6..1.6).contains(&ratio), "bootstrap {boot} hessian {hess}");
    }
    assert!(b.ci_u.0 < r.lambda_u_hat && r.lambda_u_hat < b.ci_u.1);
}

#[test]
fn independent_sample_gives_small_estimates() {
    let pairs = sample_independent(2000, 4);
    let obs = PseudoObservations::from_pairs(columns_to_pairs(&pairs)).unwrap();
    let r = fit_sjc(&obs, &FitConfig::default()).unwrap();
    assert!(r.lambda_u_hat < 0.1 && r.lambda_l_hat < 0.1, "{r:?}");
    assert!(r.t_u.is_nan() || r.t_u < 1.96);
}

#[test]
fn too_few_observations() {
    let pairs = columns_to_pairs(&draws(20, 0.3, 0.1, 1));
    let obs = PseudoObservations::from_pairs(pairs).unwrap();
    assert!(fit_sjc(&obs, &FitConfig::default()).is_err());
    assert!(bootstrap_se(&obs, 1, 0, &FitConfig::default()).is_err());
}
