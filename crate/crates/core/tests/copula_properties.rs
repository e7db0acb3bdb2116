mod common;

use common::*;
use proptest::prelude::*;
use sjc_core::copula::{
    jc_cdf, shape_from_tail, sjc_cdf, sjc_pdf, tail_coefficient_diagnostic, ReflectedTerm, Sjc,
};
use sjc_core::{TailParams, UnitPair};

#[derive(serde::Deserialize)]
struct OracleRow {
    lambda_u: f64,
    lambda_l: f64,
    u: f64,
    v: f64,
    density: f64,
}

fn oracle_rows() -> Vec<OracleRow> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/density_fd_oracle.csv");
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn grounded_and_uniform_margins() {
    for p in param_grid() {
        let s = axiom_stats(p);
        assert!(s.grounded <= 1e-9, "{p:?} {s:?}");
        assert!(s.margin <= 1e-9, "{p:?} {s:?}");
    }
}

#[test]
fn two_increasing() {
    for p in param_grid() {
        let s = axiom_stats(p);
        assert!(s.min_volume >= -1e-12, "{p:?} {s:?}");
    }
}

#[test]
fn density_matches_high_precision_differences() {
    let rows = oracle_rows();
    assert_eq!(rows.len(), 3600);
    for r in &rows {
        let p = TailParams::new(r.lambda_u, r.lambda_l).unwrap();
        let c = sjc_pdf(UnitPair::new(r.u, r.v), p);
        assert!(
            (c - r.density).abs() <= 1e-4 * r.density,
            "{:?} ({}, {}): {c} vs {}",
            (r.lambda_u, r.lambda_l),
            r.u,
            r.v,
            r.density
        );
    }
}

#[test]
fn density_matches_cdf_differences_where_resolvable() {
    // below ~1e-3 the rectangle volume drowns in double rounding
    for p in param_grid() {
        for i in 0..20 {
            for j in 0..20 {
                let (u, v) = ((i as f64 + 0.5) / 20.0, (j as f64 + 0.5) / 20.0);
                let c = sjc_pdf(UnitPair::new(u, v), p);
                if c < 1e-3 {
                    continue;
                }
                let fd = fd_density(p, u, v, 5e-4);
                assert!((c - fd).abs() <= 1e-4 * c, "{p:?} ({u}, {v}): {c} vs {fd}");
            }
        }
    }
}

#[test]
fn density_integrates_to_one() {
    for p in param_grid() {
        let m = density_mass(p);
        assert!((m - 1.0).abs() <= 1e-3, "{p:?}: {m}");
    }
}

#[test]
fn modes_coincide_for_equal_tails() {
    let p = TailParams::new(0.4, 0.4).unwrap();
    let q = UnitPair::new(0.3, 0.8);
    let a = Sjc::with_mode(p, ReflectedTerm::Swapped).pdf(q);
    let b = Sjc::with_mode(p, ReflectedTerm::Unswapped).pdf(q);
    assert!((a - b).abs() <= 1e-14 * a);
}

#[test]
fn centre_value_with_equal_tails() {
    let p = TailParams::new(0.4, 0.4).unwrap();
    let q = UnitPair::new(0.5, 0.5);
    assert!((sjc_cdf(q, p) - jc_cdf(q, p)).abs() <= 1e-14);
}

#[test]
fn upper_corner_heavier_with_stronger_upper_tail() {
    let p = TailParams::new(0.6, 0.1).unwrap();
    assert!(sjc_pdf(UnitPair::new(0.9, 0.9), p) > sjc_pdf(UnitPair::new(0.1, 0.1), p));
}

#[test]
fn tail_diagnostic_examples() {
    let eps = [1e-2, 1e-3, 1e-4, 1e-5];
    let (up, lo) = tail_coefficient_diagnostic(&Sjc::new(TailParams::new(0.3, 0.5).unwrap()), &eps);
    assert!((lo[3] - 0.5).abs() < 0.05, "{lo:?}");
    assert!(lo.windows(2).all(|w| (w[1] - 0.5).abs() <= (w[0] - 0.5).abs()));
    assert!((up[3] - 0.3).abs() < 0.05, "{up:?}");

    let (up, lo) = tail_coefficient_diagnostic(&Sjc::new(TailParams::new(0.35, 0.35).unwrap()), &eps);
    for (a, b) in up.iter().zip(&lo) {
        assert!((a - b).abs() <= 1e-9, "{a} {b}");
    }

    let (_, lo) = tail_coefficient_diagnostic(&Sjc::new(TailParams::new(0.3, 0.001).unwrap()), &eps);
    assert!(lo[2] < 0.02, "{lo:?}");
}

#[test]
fn unswapped_mode_averages_the_tails() {
    let eps = [1e-6];
    let c = Sjc::with_mode(TailParams::new(0.6, 0.2).unwrap(), ReflectedTerm::Unswapped);
    let (up, lo) = tail_coefficient_diagnostic(&c, &eps);
    assert!((up[0] - 0.4).abs() < 0.01 && (lo[0] - 0.4).abs() < 0.01, "{up:?} {lo:?}");
}

proptest! {
    #[test]
    fn reflection_identity(u in 0.001f64..0.999, v in 0.001f64..0.999, lu in 0.01f64..0.99, ll in 0.01f64..0.99) {
        let p = TailParams::new(lu, ll).unwrap();
        let lhs = sjc_cdf(UnitPair::new(u, v), p);
        let rhs = u + v - 1.0 + sjc_cdf(UnitPair::new(1.0 - u, 1.0 - v), p.swapped());
        prop_assert!((lhs - rhs).abs() <= 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn density_reflection_and_exchange(u in 0.001f64..0.999, v in 0.001f64..0.999, lu in 0.01f64..0.99, ll in 0.01f64..0.99) {
        let p = TailParams::new(lu, ll).unwrap();
        let c = sjc_pdf(UnitPair::new(u, v), p);
        prop_assert!(c > 0.0 && c.is_finite());
        let t = sjc_pdf(UnitPair::new(v, u), p);
        let r = sjc_pdf(UnitPair::new(1.0 - u, 1.0 - v), p.swapped());
        prop_assert!((c - t).abs() <= 1e-10 * c);
        prop_assert!((c - r).abs() <= 1e-9 * c);
    }

    #[test]
    fn cdf_bounded_by_frechet(u in 0.0f64..=1.0, v in 0.0f64..=1.0, lu in 0.01f64..0.99, ll in 0.01f64..0.99) {
        let p = TailParams::new(lu, ll).unwrap();
        let q = UnitPair::new(u, v);
        let c = sjc_cdf(q, p);
        prop_assert!(c >= (q.u + q.v - 1.0).max(0.0) - 1e-12);
        prop_assert!(c <= q.u.min(q.v) + 1e-12);
        let j = jc_cdf(q, p);
        prop_assert!(j.is_finite() && j <= q.u.min(q.v) + 1e-12 && j >= -1e-15);
    }

    #[test]
    fn shape_round_trip(lu in 1e-6f64..(1.0 - 1e-6), ll in 1e-6f64..(1.0 - 1e-6)) {
        let s = shape_from_tail(TailParams::new(lu, ll).unwrap());
        prop_assert!(s.k >= 1.0 && s.r > 0.0);
        let (bu, bl) = s.to_tail();
        prop_assert!((bu - lu).abs() <= 1e-12 && (bl - ll).abs() <= 1e-12);
    }
}
