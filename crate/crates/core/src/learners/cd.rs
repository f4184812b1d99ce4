//! Cyclic coordinate descent for the (weighted) lasso on a standardized design:
//!
//! minimize (1/2n) Σ wᵢ (tᵢ − b₀ − zᵢᵀβ)² + Σⱼ κⱼ |βⱼ|
//!
//! where `κⱼ` is the per-coordinate soft-threshold level (λ/n times the
//! penalty factor). The intercept is never penalized.

use super::standardize::Standardized;

pub(crate) struct CdProblem<'a> {
    pub design: &'a Standardized,
    pub target: &'a [f64],
    pub weights: Option<&'a [f64]>,
    pub thresholds: &'a [f64],
}

#[derive(Debug, Clone)]
pub(crate) struct CdState {
    pub intercept: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct CdOutcome {
    pub sweeps: usize,
    pub converged: bool,
    /// Objective value after every sweep (full or active-set).
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective_trace: Vec<f64>,
}

#[inline]
pub(crate) fn soft_threshold(z: f64, kappa: f64) -> f64 {
    if z > kappa {
        z - kappa
    } else if z < -kappa {
        z + kappa
    } else {
        0.0
    }
}

impl CdProblem<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    pub fn residuals(&self, state: &CdState) -> Vec<f64> {
        let eta = self.design.linear_predictor(state.intercept, &state.beta);
        self.target.iter().zip(eta).map(|(t, e)| t - e).collect()
    }

    pub fn objective(&self, state: &CdState, residuals: &[f64]) -> f64 {
        let n = self.design.n as f64;
        let loss: f64 = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| self.weight(i) * r * r)
            .sum::<f64>()
            / (2.0 * n);
        let penalty: f64 = state
            .beta
            .iter()
            .zip(self.thresholds)
            .map(|(b, k)| k * b.abs())
            .sum();
        loss + penalty
    }

    /// `(1/n) Σ wᵢ zᵢⱼ²` per column; zero for constant columns.
    fn curvatures(&self) -> Vec<f64> {
        let n = self.design.n as f64;
        (0..self.design.p)
            .map(|j| {
                if self.design.constant[j] {
                    return 0.0;
                }
                match self.weights {
                    None => 1.0,
                    Some(w) => {
                        self.design.col(j).iter().zip(w).map(|(z, w)| w * z * z).sum::<f64>() / n
                    }
                }
            })
            .collect()
    }

    fn update_intercept(&self, state: &mut CdState, r: &mut [f64], total_weight: f64) -> f64 {
        let shift = match self.weights {
            None => r.iter().sum::<f64>() / total_weight,
            Some(w) => r.iter().zip(w).map(|(r, w)| r * w).sum::<f64>() / total_weight,
        };
        if shift != 0.0 {
            state.intercept += shift;
            r.iter_mut().for_each(|v| *v -= shift);
        }
        shift.abs()
    }

    fn update_coordinate(&self, j: usize, a: f64, state: &mut CdState, r: &mut [f64]) -> f64 {
        let n = self.design.n as f64;
        let z = self.design.col(j);
        let grad = match self.weights {
            None => z.iter().zip(r.iter()).map(|(z, r)| z * r).sum::<f64>(),
            Some(w) => z
                .iter()
                .zip(r.iter())
                .zip(w)
                .map(|((z, r), w)| w * z * r)
                .sum::<f64>(),
        } / n;
        let old = state.beta[j];
        let new = soft_threshold(grad + a * old, self.thresholds[j]) / a;
        let delta = new - old;
        if delta != 0.0 {
            state.beta[j] = new;
            for (ri, zi) in r.iter_mut().zip(z) {
                *ri -= delta * zi;
            }
        }
        delta.abs()
    }

    /// Runs full sweeps alternating with active-set sweeps until a full sweep
    /// moves no coefficient by more than `tol` or `max_sweeps` is reached.
    pub fn solve(&self, state: &mut CdState, tol: f64, max_sweeps: usize) -> CdOutcome {
        let p = self.design.p;
        let curv = self.curvatures();
        let total_weight = match self.weights {
            None => self.design.n as f64,
            Some(w) => w.iter().sum(),
        };
        let mut r = self.residuals(state);
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut converged = false;
        let coords: Vec<usize> = (0..p).filter(|&j| curv[j] > 0.0).collect();

        while sweeps < max_sweeps {
            let mut max_change = self.update_intercept(state, &mut r, total_weight);
            for &j in &coords {
                max_change = max_change.max(self.update_coordinate(j, curv[j], state, &mut r));
            }
            sweeps += 1;
            trace.push(self.objective(state, &r));
            if max_change < tol {
                converged = true;
                break;
            }
            let active: Vec<usize> = coords.iter().copied().filter(|&j| state.beta[j] != 0.0).collect();
            while sweeps < max_sweeps {
                let mut change = self.update_intercept(state, &mut r, total_weight);
                for &j in &active {
                    change = change.max(self.update_coordinate(j, curv[j], state, &mut r));
                }
                sweeps += 1;
                trace.push(self.objective(state, &r));
                if change < tol {
                    break;
                }
            }
        }
        CdOutcome { sweeps, converged, objective_trace: trace }
    }
}
