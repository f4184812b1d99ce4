use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{SigmaKind, SimulationDesign, TREATMENT_COEF};
use crate::data::Dataset;

/// Fills `x` with one draw of `N(0, Σ)`. For the Toeplitz design the AR(1)
/// recursion `x₁ = z₁, xᵢ = 0.5·xᵢ₋₁ + √0.75·zᵢ` equals multiplying by the
/// Cholesky factor of `Σᵢⱼ = 0.5^|i−j|`.
pub(crate) fn draw_covariates<R: Rng>(rng: &mut R, sigma: SigmaKind, x: &mut [f64]) {
    let innovation = 0.75f64.sqrt();
    let mut prev = 0.0;
    for (i, xi) in x.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        *xi = match sigma {
            SigmaKind::Identity => z,
            SigmaKind::Toeplitz if i == 0 => z,
            SigmaKind::Toeplitz => 0.5 * prev + innovation * z,
        };
        prev = *xi;
    }
}

/// Latent draws for one unit: the index `Xᵀβ` and the three shocks.
struct Shocks {
    index: f64,
    w: f64,
    v: f64,
    u: f64,
}

fn draw_unit<R: Rng>(rng: &mut R, design: &SimulationDesign, beta: &[f64], x: &mut [f64]) -> Shocks {
    draw_covariates(rng, design.sigma, x);
    let index = x.iter().zip(beta).map(|(x, b)| x * b).sum();
    Shocks { index, w: rng.sample(StandardNormal), v: rng.sample(StandardNormal), u: rng.sample(StandardNormal) }
}

fn mediator(d: u8, index: f64, v: f64) -> u8 {
    u8::from(TREATMENT_COEF * f64::from(d) + index + v > 0.0)
}

fn outcome(design: &SimulationDesign, d: u8, m: u8, index: f64, u: f64) -> f64 {
    let (d, m) = (f64::from(d), f64::from(m));
    TREATMENT_COEF * d + design.mediator_coef * m + design.interaction * d * m + index + u
}

/// One simulated sample of `design.n` observations.
pub fn generate_dgp(design: &SimulationDesign, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = design.beta();
    let mut x = Array2::<f64>::zeros((design.n, design.p));
    let mut y = Vec::with_capacity(design.n);
    let mut d = Vec::with_capacity(design.n);
    let mut m = Vec::with_capacity(design.n);
    for mut row in x.rows_mut() {
        let s = draw_unit(&mut rng, design, &beta, row.as_slice_mut().expect("standard layout"));
        let di = u8::from(s.index + s.w > 0.0);
        let mi = mediator(di, s.index, s.v);
        y.push(outcome(design, di, mi, s.index, s.u));
        d.push(f64::from(di));
        m.push(f64::from(mi));
    }
    Dataset::new(y, d, m, x).expect("simulated data are valid")
}

/// Simulated units with their potential mediators, without the covariate
/// matrix (only the first covariate is kept).
#[derive(Debug, Clone)]
pub struct SimulatedUnits {
    pub x1: Vec<f64>,
    /// `Xᵀβ`.
    pub index: Vec<f64>,
    pub d: Vec<u8>,
    pub m: Vec<u8>,
    pub y: Vec<f64>,
    /// `M(0)` and `M(1)` from the shared shock `V`.
    pub m_potential: [Vec<u8>; 2],
    pub u: Vec<f64>,
}

impl SimulatedUnits {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `Y(d, m)` for unit `i`.
    pub fn potential_outcome(&self, design: &SimulationDesign, i: usize, d: u8, m: u8) -> f64 {
        outcome(design, d, m, self.index[i], self.u[i])
    }
}

/// `n` units drawn from the structural equations of `design`.
pub fn generate_units(design: &SimulationDesign, n: usize, seed: u64) -> SimulatedUnits {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = design.beta();
    let mut x = vec![0.0; design.p];
    let mut units = SimulatedUnits {
        x1: Vec::with_capacity(n),
        index: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        m: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        m_potential: [Vec::with_capacity(n), Vec::with_capacity(n)],
        u: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let s = draw_unit(&mut rng, design, &beta, &mut x);
        let di = u8::from(s.index + s.w > 0.0);
        let m0 = mediator(0, s.index, s.v);
        let m1 = mediator(1, s.index, s.v);
        let mi = if di == 1 { m1 } else { m0 };
        units.x1.push(x[0]);
        units.index.push(s.index);
        units.d.push(di);
        units.m.push(mi);
        units.y.push(outcome(design, di, mi, s.index, s.u));
        units.m_potential[0].push(m0);
        units.m_potential[1].push(m1);
        units.u.push(s.u);
    }
    units
}
