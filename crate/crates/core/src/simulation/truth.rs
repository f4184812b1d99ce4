use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use super::dgp::generate_units;
use super::{SimulationDesign, TREATMENT_COEF};
use crate::effects::EffectKind;
use crate::learners::standard_normal;

/// Population counterfactual means and the effects built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueEffects {
    /// `E[Y(1, M(1))]`.
    pub lambda1: f64,
    /// `E[Y(0, M(0))]`.
    pub lambda0: f64,
    /// `E[Y(1, M(0))]`.
    pub psi1: f64,
    /// `E[Y(0, M(1))]`.
    pub psi0: f64,
    /// `E[Y(d, m)]` indexed `[d][m]`.
    pub psi_dm: [[f64; 2]; 2],
}

impl TrueEffects {
    pub fn get(&self, kind: EffectKind) -> f64 {
        match kind {
            EffectKind::Total => self.lambda1 - self.lambda0,
            EffectKind::DirectTreated => self.lambda1 - self.psi0,
            EffectKind::DirectControl => self.psi1 - self.lambda0,
            EffectKind::IndirectTreated => self.lambda1 - self.psi1,
            EffectKind::IndirectControl => self.psi0 - self.lambda0,
        }
    }

    /// `γ(m) = E[Y(1, m)] − E[Y(0, m)]`.
    pub fn controlled(&self, m: u8) -> f64 {
        self.psi_dm[1][m as usize] - self.psi_dm[0][m as usize]
    }

    /// `E[Y(d, M(1−d))]`.
    pub fn cross_world(&self, d: u8) -> f64 {
        if d == 1 {
            self.psi1
        } else {
            self.psi0
        }
    }

    /// `E[Y(d)]`.
    pub fn arm_mean(&self, d: u8) -> f64 {
        if d == 1 {
            self.lambda1
        } else {
            self.lambda0
        }
    }
}

/// Structural Monte Carlo: draws `n_mc` units with both potential mediators
/// and averages the potential outcomes `Y(d, M(d'))` and `Y(d, m)`.
pub fn true_effects_oracle(design: &SimulationDesign, n_mc: usize, seed: u64) -> TrueEffects {
    let units = generate_units(design, n_mc, seed);
    let n = n_mc as f64;
    let mean = |f: &dyn Fn(usize) -> f64| (0..n_mc).map(f).sum::<f64>() / n;
    let y = |i: usize, d: u8, m: u8| units.potential_outcome(design, i, d, m);
    let mp = &units.m_potential;
    TrueEffects {
        lambda1: mean(&|i| y(i, 1, mp[1][i])),
        lambda0: mean(&|i| y(i, 0, mp[0][i])),
        psi1: mean(&|i| y(i, 1, mp[0][i])),
        psi0: mean(&|i| y(i, 0, mp[1][i])),
        psi_dm: [
            [mean(&|i| y(i, 0, 0)), mean(&|i| y(i, 0, 1))],
            [mean(&|i| y(i, 1, 0)), mean(&|i| y(i, 1, 1))],
        ],
    }
}

/// Exact population values. With `Xᵀβ ~ N(0, βᵀΣβ)` independent of `V`,
/// `E[M(d)] = Φ(0.5·d / √(1 + βᵀΣβ))` and
/// `E[Y(d, M(d'))] = 0.5·d + (b_M + b_DM·d)·E[M(d')]`.
pub fn closed_form_truth(design: &SimulationDesign) -> TrueEffects {
    let scale = (1.0 + design.index_variance()).sqrt();
    let em = |d: f64| standard_normal().cdf(TREATMENT_COEF * d / scale);
    let y = |d: f64, m: f64| TREATMENT_COEF * d + design.mediator_coef * m + design.interaction * d * m;
    let (em0, em1) = (em(0.0), em(1.0));
    TrueEffects {
        lambda1: TREATMENT_COEF + (design.mediator_coef + design.interaction) * em1,
        lambda0: design.mediator_coef * em0,
        psi1: TREATMENT_COEF + (design.mediator_coef + design.interaction) * em0,
        psi0: design.mediator_coef * em1,
        psi_dm: [[y(0.0, 0.0), y(0.0, 1.0)], [y(1.0, 0.0), y(1.0, 1.0)]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_reference_values() {
        // Reference values from an independent numpy/scipy evaluation.
        let t = closed_form_truth(&SimulationDesign::default());
        let expected = [1.0211764283923797, 0.8403921427974599, 0.75, 0.27117642839237965, 0.18078428559491977];
        for (kind, e) in EffectKind::ALL.into_iter().zip(expected) {
            assert!((t.get(kind) - e).abs() < 1e-12, "{kind:?}: {}", t.get(kind));
        }
        assert_eq!(t.controlled(0), 0.5);
        assert_eq!(t.controlled(1), 1.0);
    }

    #[test]
    fn structural_monte_carlo_agrees_with_closed_form() {
        let design = SimulationDesign { p: 20, ..Default::default() };
        let mc = true_effects_oracle(&design, 200_000, 17);
        let exact = closed_form_truth(&design);
        for kind in EffectKind::ALL {
            assert!((mc.get(kind) - exact.get(kind)).abs() < 0.01, "{kind:?}");
        }
        assert!((mc.get(EffectKind::DirectTreated) + mc.get(EffectKind::IndirectControl) - mc.get(EffectKind::Total)).abs() < 1e-12);
    }
}
