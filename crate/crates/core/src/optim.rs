//! Derivative-free Nelder-Mead simplex minimisation.
//!
//! Constrained problems are handled by the callers, which map an
//! unconstrained search vector onto their parameter domain.

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Largest coordinate distance between the best vertex and any other.
    pub x_tol: f64,
    /// Largest objective difference between the best vertex and any other.
    pub f_tol: f64,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            x_tol: 1e-8,
            f_tol: 1e-10,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    pub fn minimize<F>(&self, mut objective: F, x0: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let f = objective(x);
            if f.is_nan() {
                f64::INFINITY
            } else {
                f
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += self.initial_step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

        let mut iterations = 0;
        let mut converged = false;
        let mut order: Vec<usize> = (0..=n).collect();
        while iterations < self.max_iterations {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];

            let x_spread = simplex
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            let f_spread = values
                .iter()
                .map(|f| (f - values[best]).abs())
                .fold(0.0, f64::max);
            if x_spread <= self.x_tol && f_spread <= self.f_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for &i in order.iter().take(n) {
                for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                    *c += x / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[worst])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let reflected = along(REFLECT);
            let f_reflected = eval(&reflected);
            if f_reflected < values[best] {
                let expanded = along(EXPAND);
                let f_expanded = eval(&expanded);
                if f_expanded < f_reflected {
                    simplex[worst] = expanded;
                    values[worst] = f_expanded;
                } else {
                    simplex[worst] = reflected;
                    values[worst] = f_reflected;
                }
                continue;
            }
            if f_reflected < values[second_worst] {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
                continue;
            }
            // contraction: outside if the reflection improved on the worst point
            let (candidate, f_candidate) = if f_reflected < values[worst] {
                let c = along(CONTRACT * REFLECT);
                let f = eval(&c);
                (c, f)
            } else {
                let c = along(-CONTRACT);
                let f = eval(&c);
                (c, f)
            };
            if f_candidate < values[worst].min(f_reflected) {
                simplex[worst] = candidate;
                values[worst] = f_candidate;
                continue;
            }
            let anchor = simplex[best].clone();
            for &i in order.iter().skip(1) {
                for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                    *x = a + SHRINK * (*x - a);
                }
                values[i] = eval(&simplex[i]);
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap_or(0);
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            iterations,
            evaluations,
            converged,
        }
    }
}

/// Logistic map onto `(0, 1)`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
