//! Sampling from the symmetrized Joe-Clayton copula by conditional inversion.
//!
//! Draw `i` consumes a fixed window of the ChaCha keystream selected by
//! `i`, so a batch is identical however it is split across threads.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{Sjc, TailParams, UnitPair};
use crate::seeds;

/// Target accuracy of `h(v|u) = w`.
pub const INVERSION_TOL: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 60;

const CHUNK: usize = 4096;
/// Keystream words (u32) consumed per draw.
const WORDS_PER_DRAW: u128 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub pairs: Vec<UnitPair>,
    pub params: TailParams,
    pub seed: u64,
}

impl SampleBatch {
    pub fn u(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.u).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.v).collect()
    }
}

/// `h(v|u) = ∂C/∂u`.
pub fn sjc_conditional(u: f64, v: f64, params: TailParams) -> f64 {
    Sjc::new(params).conditional(UnitPair::new(u, v))
}

/// Solves `h(v|u) = w` for `v` by bisection on `[0, 1]`.
pub fn invert_conditional(copula: &Sjc, u: f64, w: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut mid = 0.5;
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let h = copula.conditional(UnitPair::new(u, mid));
        if (h - w).abs() <= INVERSION_TOL {
            break;
        }
        if h < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

#[inline]
fn open_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn draw_range(copula: &Sjc, seed: u64, start: usize, len: usize) -> Vec<UnitPair> {
    let mut rng = seeds::rng(seed);
    rng.set_word_pos(start as u128 * WORDS_PER_DRAW);
    (0..len)
        .map(|_| {
            let u = open_unit(rng.next_u64());
            let w = open_unit(rng.next_u64());
            UnitPair::new(u, invert_conditional(copula, u, w))
        })
        .collect()
}

/// `n` i.i.d. draws from `copula`.
pub fn sample(copula: &Sjc, n: usize, seed: u64) -> Vec<UnitPair> {
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    starts
        .into_par_iter()
        .flat_map_iter(|s| draw_range(copula, seed, s, CHUNK.min(n - s)))
        .collect()
}

pub fn sample_sjc(n: usize, params: TailParams, seed: u64) -> SampleBatch {
    SampleBatch {
        pairs: sample(&Sjc::new(params), n, seed),
        params,
        seed,
    }
}

/// Independent uniform pairs drawn from the same keystream layout.
pub fn sample_independent(n: usize, seed: u64) -> Vec<UnitPair> {
    let mut rng = seeds::rng(seed);
    (0..n)
        .map(|_| UnitPair::new(open_unit(rng.next_u64()), open_unit(rng.next_u64())))
        .collect()
}
