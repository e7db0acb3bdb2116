//! Numeric checks shared by the property tests and the acceptance target.
#![allow(dead_code)]

use gauss_quad::GaussLegendre;
use sjc_core::copula::{sjc_cdf, sjc_pdf, UNIT_EPS};
use sjc_core::{TailParams, UnitPair};

pub const PARAM_GRID: [f64; 3] = [0.1, 0.5, 0.9];

pub fn param_grid() -> Vec<TailParams> {
    let mut out = Vec::new();
    for &u in &PARAM_GRID {
        for &l in &PARAM_GRID {
            out.push(TailParams::new(u, l).unwrap());
        }
    }
    out
}

/// `k / (n + 1)` for `k = 1..=n`.
pub fn interior_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct AxiomStats {
    /// Largest `C(u, eps)` or `C(eps, u)`.
    pub grounded: f64,
    /// Largest `|C(u, 1 - eps) - u|` or `|C(1 - eps, u) - u|`.
    pub margin: f64,
    /// Smallest rectangle volume on the 50x50 grid.
    pub min_volume: f64,
}

pub fn axiom_stats(params: TailParams) -> AxiomStats {
    let c = |u: f64, v: f64| sjc_cdf(UnitPair::new(u, v), params);
    let mut s = AxiomStats {
        min_volume: f64::INFINITY,
        ..Default::default()
    };
    for &u in &interior_grid(99) {
        s.grounded = s.grounded.max(c(u, UNIT_EPS)).max(c(UNIT_EPS, u));
        s.margin = s
            .margin
            .max((c(u, 1.0 - UNIT_EPS) - u).abs())
            .max((c(1.0 - UNIT_EPS, u) - u).abs());
    }
    let g: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
    let table: Vec<Vec<f64>> = g.iter().map(|&u| g.iter().map(|&v| c(u, v)).collect()).collect();
    for i in 0..50 {
        for j in 0..50 {
            let vol = table[i + 1][j + 1] - table[i][j + 1] - table[i + 1][j] + table[i][j];
            s.min_volume = s.min_volume.min(vol);
        }
    }
    s
}

/// Mixed central difference of the CDF, Richardson-extrapolated over
/// steps `h` and `h / 2`.
pub fn fd_density(params: TailParams, u: f64, v: f64, h: f64) -> f64 {
    let c = |a: f64, b: f64| sjc_cdf(UnitPair::new(a, b), params);
    let mixed = |h: f64| (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h) + c(u - h, v - h)) / (4.0 * h * h);
    let (d1, d2) = (mixed(h), mixed(h / 2.0));
    (4.0 * d2 - d1) / 3.0
}

/// Largest relative gap between the analytic density and the finite
/// difference over the 20x20 grid `(i + 0.5) / 20`.
pub fn density_fd_max_rel(params: TailParams) -> f64 {
    let pts: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
    let mut worst = 0.0f64;
    for &u in &pts {
        for &v in &pts {
            let exact = sjc_pdf(UnitPair::new(u, v), params);
            let fd = fd_density(params, u, v, 1e-4);
            worst = worst.max((exact - fd).abs() / exact);
        }
    }
    worst
}

/// Panel breakpoints on [0, 1], graded geometrically toward both ends.
fn graded_breaks() -> Vec<f64> {
    let mut left = vec![0.0];
    let mut x = 1e-12;
    while x < 0.05 {
        left.push(x);
        x *= 2.0;
    }
    left.extend((1..10).map(|k| k as f64 * 0.05));
    let mut all = left.clone();
    all.push(0.5);
    all.extend(left.iter().rev().map(|x| 1.0 - x));
    all
}

/// Tensor-product Gauss-Legendre integral of the density over the unit square.
pub fn density_mass(params: TailParams) -> f64 {
    let gl = GaussLegendre::new(8).unwrap();
    let breaks = graded_breaks();
    let mut total = 0.0;
    for wu in breaks.windows(2) {
        total += gl.integrate(wu[0], wu[1], |u| {
            breaks
                .windows(2)
                .map(|wv| gl.integrate(wv[0], wv[1], |v| sjc_pdf(UnitPair::new(u, v), params)))
                .sum()
        });
    }
    total
}

/// Spearman rank correlation (no ties expected).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |s: &[f64]| {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        let mut r = vec![0.0; s.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
    let var: f64 = rx.iter().map(|a| (a - m).powi(2)).sum();
    cov / var
}
