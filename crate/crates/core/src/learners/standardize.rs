use ndarray::ArrayView2;

/// Column-major copy of a design matrix with every column centered and
/// scaled to unit (population) variance. Constant columns are stored as zeros
/// and never enter a model.
#[derive(Debug, Clone)]
pub(crate) struct Standardized {
    pub n: usize,
    pub p: usize,
    cols: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
}

const CONSTANT_SD: f64 = 1e-10;

impl Standardized {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let (n, p) = x.dim();
        let mut cols = vec![0.0; n * p];
        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        let mut constant = vec![false; p];
        for (j, col) in x.columns().into_iter().enumerate() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            means[j] = mean;
            let dst = &mut cols[j * n..(j + 1) * n];
            if sd <= CONSTANT_SD * mean.abs().max(1.0) {
                constant[j] = true;
                continue;
            }
            scales[j] = sd;
            for (d, &v) in dst.iter_mut().zip(col.iter()) {
                *d = (v - mean) / sd;
            }
        }
        Standardized { n, p, cols, means, scales, constant }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// Maps standardized-scale coefficients back to the original scale.
    pub fn unstandardize(&self, intercept_std: f64, beta_std: &[f64]) -> (f64, Vec<f64>) {
        let mut intercept = intercept_std;
        let beta: Vec<f64> = beta_std
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                if b == 0.0 || self.constant[j] {
                    0.0
                } else {
                    let orig = b / self.scales[j];
                    intercept -= orig * self.means[j];
                    orig
                }
            })
            .collect();
        (intercept, beta)
    }

    /// `η_i = b0 + Σ_j z_ij β_j` over the nonzero coefficients.
    pub fn linear_predictor(&self, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![intercept; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (e, &z) in eta.iter_mut().zip(self.col(j)) {
                    *e += b * z;
                }
            }
        }
        eta
    }
}
