//! Joe-Clayton (BB7) and symmetrized Joe-Clayton copulas.
//!
//! All evaluation is done in the log domain: the Joe-Clayton generator
//! raises quantities close to zero to powers that can be in the hundreds
//! of thousands when a tail coefficient approaches one, so the direct
//! formula overflows long before the result itself is extreme.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit-interval inputs are clamped to `[UNIT_EPS, 1 - UNIT_EPS]`.
pub const UNIT_EPS: f64 = 1e-12;
/// Tail coefficients are clamped to `[LAMBDA_FLOOR, 1 - LAMBDA_FLOOR]` for evaluation.
pub const LAMBDA_FLOOR: f64 = 1e-6;
/// Smallest density ever returned.
pub const DENSITY_FLOOR: f64 = 1e-300;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CopulaError {
    #[error("tail coefficient {name} = {value} must lie strictly inside (0, 1)")]
    TailOutOfRange { name: &'static str, value: f64 },
}

/// Upper and lower tail-dependence coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    lambda_u: f64,
    lambda_l: f64,
}

impl TailParams {
    pub fn new(lambda_u: f64, lambda_l: f64) -> Result<Self, CopulaError> {
        let check = |name, value: f64| {
            if value > 0.0 && value < 1.0 {
                Ok(())
            } else {
                Err(CopulaError::TailOutOfRange { name, value })
            }
        };
        check("lambda_u", lambda_u)?;
        check("lambda_l", lambda_l)?;
        Ok(Self { lambda_u, lambda_l })
    }

    /// Builds parameters from any pair of reals by clamping into the
    /// evaluation domain. Used by optimizers that roam freely.
    pub fn clamped(lambda_u: f64, lambda_l: f64) -> Self {
        Self {
            lambda_u: clamp_lambda(lambda_u),
            lambda_l: clamp_lambda(lambda_l),
        }
    }

    pub fn lambda_u(&self) -> f64 {
        self.lambda_u
    }

    pub fn lambda_l(&self) -> f64 {
        self.lambda_l
    }

    /// The same pair with the roles of the two tails exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            lambda_u: self.lambda_l,
            lambda_l: self.lambda_u,
        }
    }
}

fn clamp_lambda(x: f64) -> f64 {
    if x.is_nan() {
        return LAMBDA_FLOOR;
    }
    x.clamp(LAMBDA_FLOOR, 1.0 - LAMBDA_FLOOR)
}

/// Joe-Clayton generator exponents: `k` governs the upper tail, `r` the lower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub k: f64,
    pub r: f64,
}

impl ShapeParams {
    /// Inverse of [`shape_from_tail`].
    pub fn to_tail(&self) -> (f64, f64) {
        let lambda_u = 2.0 - 2f64.powf(1.0 / self.k);
        let lambda_l = 2f64.powf(-1.0 / self.r);
        (lambda_u, lambda_l)
    }
}

/// `k = 1 / log2(2 - λu)`, `r = -1 / log2(λl)`.
pub fn shape_from_tail(params: TailParams) -> ShapeParams {
    let lu = clamp_lambda(params.lambda_u);
    let ll = clamp_lambda(params.lambda_l);
    ShapeParams {
        k: LN_2 / (2.0 - lu).ln(),
        r: -LN_2 / ll.ln(),
    }
}

/// A point of the open unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitPair {
    pub u: f64,
    pub v: f64,
}

impl UnitPair {
    /// Clamps both coordinates into `[UNIT_EPS, 1 - UNIT_EPS]`.
    pub fn new(u: f64, v: f64) -> Self {
        Self {
            u: clamp_unit(u),
            v: clamp_unit(v),
        }
    }

    pub fn reflected(&self) -> Self {
        Self::new(1.0 - self.u, 1.0 - self.v)
    }

    pub fn transposed(&self) -> Self {
        Self {
            u: self.v,
            v: self.u,
        }
    }
}

#[inline]
pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(UNIT_EPS, 1.0 - UNIT_EPS)
}

/// How the survival (reflected) Joe-Clayton term of the mixture is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectedTerm {
    /// `C_JC(1-u, 1-v | λl, λu)`: the tail coefficients of the mixture are
    /// exactly `λu` (upper) and `λl` (lower).
    #[default]
    Swapped,
    /// `C_JC(1-u, 1-v | λu, λl)`: both mixture tails equal `(λu + λl) / 2`.
    Unswapped,
}

/// Per-coordinate quantities that do not depend on the copula parameters.
#[derive(Debug, Clone, Copy)]
struct Coord {
    /// `ln(1 - x)`
    ln_comp: f64,
}

impl Coord {
    #[inline]
    fn new(x: f64) -> Self {
        Self {
            ln_comp: (-x).ln_1p(),
        }
    }
}

/// Joe-Clayton copula with cached generator exponents.
#[derive(Debug, Clone, Copy)]
pub struct JoeClayton {
    k: f64,
    r: f64,
    ln_k: f64,
}

/// Intermediate terms of the Joe-Clayton formula at one point.
struct JcTerms {
    /// `ln a_u` where `a_u = 1 - (1-u)^k`
    ln_a_u: f64,
    ln_a_v: f64,
    /// `ln x` where `x = a_u^-r + a_v^-r - 1`
    ln_x: f64,
    /// `g = x^(-1/r)`
    g: f64,
    one_minus_g: f64,
    /// `ln(1 - g)`
    ln_1mg: f64,
}

impl JoeClayton {
    pub fn new(params: TailParams) -> Self {
        let s = shape_from_tail(params);
        Self {
            k: s.k,
            r: s.r,
            ln_k: s.k.ln(),
        }
    }

    pub fn shape(&self) -> ShapeParams {
        ShapeParams {
            k: self.k,
            r: self.r,
        }
    }

    #[inline]
    fn ln_a(&self, c: Coord) -> f64 {
        // a = 1 - (1-x)^k; the compensated forms are only needed near the ends
        let e = self.k * c.ln_comp;
        if e < -LN_2 {
            let t = e.exp();
            if t < 0.01 {
                (-t).ln_1p()
            } else {
                (1.0 - t).ln()
            }
        } else if e < -0.01 {
            (1.0 - e.exp()).ln()
        } else {
            (-e.exp_m1()).ln()
        }
    }

    #[inline]
    fn terms(&self, cu: Coord, cv: Coord) -> JcTerms {
        let ln_a_u = self.ln_a(cu);
        let ln_a_v = self.ln_a(cv);
        // ln A = -r ln a >= 0
        let la = -self.r * ln_a_u;
        let lb = -self.r * ln_a_v;
        let m = la.max(lb);
        let ln_x = if m >= 30.0 {
            m + ((la - m).exp() + (lb - m).exp() - (-m).exp()).ln()
        } else if m > 0.5 {
            (la.exp() + lb.exp() - 1.0).ln()
        } else {
            (la.exp_m1() + lb.exp_m1()).ln_1p()
        };
        let ln_g = -ln_x / self.r;
        let (g, one_minus_g) = if ln_g < -0.01 {
            let g = ln_g.exp();
            (g, 1.0 - g)
        } else {
            let em = ln_g.exp_m1();
            (1.0 + em, -em)
        };
        let ln_1mg = if g < 0.01 {
            (-g).ln_1p()
        } else {
            one_minus_g.ln()
        };
        JcTerms {
            ln_a_u,
            ln_a_v,
            ln_x,
            g,
            one_minus_g,
            ln_1mg,
        }
    }

    fn cdf_coords(&self, cu: Coord, cv: Coord) -> f64 {
        let t = self.terms(cu, cv);
        let c = -(t.ln_1mg / self.k).exp_m1();
        if c.is_nan() {
            0.0
        } else {
            c.clamp(0.0, 1.0)
        }
    }

    pub fn cdf(&self, p: UnitPair) -> f64 {
        self.cdf_coords(Coord::new(p.u), Coord::new(p.v))
    }

    fn ln_pdf_coords(&self, cu: Coord, cv: Coord) -> f64 {
        let (k, r) = (self.k, self.r);
        let t = self.terms(cu, cv);
        let ln_pu = -(r + 1.0) * t.ln_a_u + (k - 1.0) * cu.ln_comp;
        let ln_pv = -(r + 1.0) * t.ln_a_v + (k - 1.0) * cv.ln_comp;
        let bracket = (1.0 + r) * t.one_minus_g + (1.0 - 1.0 / k) * t.g;
        let ln_c = self.ln_k + ln_pu + ln_pv + (1.0 / k - 2.0) * t.ln_1mg
            - (1.0 / r + 2.0) * t.ln_x
            + bracket.ln();
        floor_ln_density(ln_c)
    }

    /// Log of the mixed second partial `∂²C/∂u∂v`, floored at `ln(DENSITY_FLOOR)`.
    pub fn ln_pdf(&self, p: UnitPair) -> f64 {
        self.ln_pdf_coords(Coord::new(p.u), Coord::new(p.v))
    }

    pub fn pdf(&self, p: UnitPair) -> f64 {
        self.ln_pdf(p).exp().max(DENSITY_FLOOR)
    }

    fn du_coords(&self, cu: Coord, cv: Coord) -> f64 {
        let (k, r) = (self.k, self.r);
        let t = self.terms(cu, cv);
        let ln_pu = -(r + 1.0) * t.ln_a_u + (k - 1.0) * cu.ln_comp;
        let ln_d = (1.0 / k - 1.0) * t.ln_1mg - (1.0 / r + 1.0) * t.ln_x + ln_pu;
        let d = ln_d.exp();
        if d.is_nan() {
            0.0
        } else {
            d.clamp(0.0, 1.0)
        }
    }

    /// First partial `∂C/∂u`, the conditional distribution of `V` given `U = u`.
    pub fn du(&self, p: UnitPair) -> f64 {
        self.du_coords(Coord::new(p.u), Coord::new(p.v))
    }
}

#[inline]
fn floor_ln_density(ln_c: f64) -> f64 {
    let floor = DENSITY_FLOOR.ln();
    if ln_c.is_nan() || ln_c < floor {
        floor
    } else {
        ln_c
    }
}

/// Symmetrized Joe-Clayton copula: the equal mixture of a Joe-Clayton
/// copula and the survival copula of a second Joe-Clayton copula.
#[derive(Debug, Clone, Copy)]
pub struct Sjc {
    params: TailParams,
    direct: JoeClayton,
    reflected: JoeClayton,
    mode: ReflectedTerm,
}

impl Sjc {
    pub fn new(params: TailParams) -> Self {
        Self::with_mode(params, ReflectedTerm::Swapped)
    }

    pub fn with_mode(params: TailParams, mode: ReflectedTerm) -> Self {
        let reflected_params = match mode {
            ReflectedTerm::Swapped => params.swapped(),
            ReflectedTerm::Unswapped => params,
        };
        Self {
            params,
            direct: JoeClayton::new(params),
            reflected: JoeClayton::new(reflected_params),
            mode,
        }
    }

    pub fn params(&self) -> TailParams {
        self.params
    }

    pub fn mode(&self) -> ReflectedTerm {
        self.mode
    }

    pub fn cdf(&self, p: UnitPair) -> f64 {
        let c1 = self.direct.cdf(p);
        let c2 = self.reflected.cdf(p.reflected());
        (0.5 * (c1 + c2 + p.u + p.v - 1.0)).clamp(0.0, p.u.min(p.v))
    }

    pub fn ln_pdf(&self, p: UnitPair) -> f64 {
        self.ln_pdf_prepared(&PreparedPair::new(p))
    }

    pub fn pdf(&self, p: UnitPair) -> f64 {
        self.ln_pdf(p).exp().max(DENSITY_FLOOR)
    }

    /// `∂C/∂u`: conditional CDF of `V` given `U = u`, evaluated at `v`.
    pub fn conditional(&self, p: UnitPair) -> f64 {
        let d1 = self.direct.du(p);
        let d2 = self.reflected.du(p.reflected());
        (0.5 * (d1 - d2 + 1.0)).clamp(0.0, 1.0)
    }

    pub(crate) fn ln_pdf_prepared(&self, pp: &PreparedPair) -> f64 {
        let l1 = self.direct.ln_pdf_coords(pp.u, pp.v);
        let l2 = self.reflected.ln_pdf_coords(pp.u_refl, pp.v_refl);
        let m = l1.max(l2);
        let ln = m + ((l1 - m).exp() + (l2 - m).exp()).ln() - LN_2;
        floor_ln_density(ln)
    }
}

/// A pseudo-observation with its parameter-free logarithms precomputed,
/// so repeated likelihood evaluation only pays for the parameter-dependent part.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PreparedPair {
    u: Coord,
    v: Coord,
    u_refl: Coord,
    v_refl: Coord,
}

impl PreparedPair {
    pub(crate) fn new(p: UnitPair) -> Self {
        let q = p.reflected();
        Self {
            u: Coord::new(p.u),
            v: Coord::new(p.v),
            u_refl: Coord::new(q.u),
            v_refl: Coord::new(q.v),
        }
    }
}

pub fn jc_cdf(p: UnitPair, params: TailParams) -> f64 {
    JoeClayton::new(params).cdf(p)
}

pub fn jc_pdf(p: UnitPair, params: TailParams) -> f64 {
    JoeClayton::new(params).pdf(p)
}

pub fn sjc_cdf(p: UnitPair, params: TailParams) -> f64 {
    Sjc::new(params).cdf(p)
}

pub fn sjc_pdf(p: UnitPair, params: TailParams) -> f64 {
    Sjc::new(params).pdf(p)
}

/// Finite-`ε` versions of the tail-dependence limits:
/// `lower[i] = C(ε,ε)/ε` and `upper[i] = (1 - 2(1-ε) + C(1-ε,1-ε))/ε`.
pub fn tail_coefficient_diagnostic(
    copula: &Sjc,
    eps_grid: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    eps_grid
        .iter()
        .map(|&e| {
            let hi = 1.0 - e;
            let upper = (1.0 - 2.0 * hi + copula.cdf(UnitPair::new(hi, hi))) / e;
            let lower = copula.cdf(UnitPair::new(e, e)) / e;
            (upper, lower)
        })
        .unzip()
}
