//! Observed sample `(Y, M, D, X)` and fold assignment for cross-fitting.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control = 0,
    Treated = 1,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];

    pub fn from_u8(d: u8) -> Option<Arm> {
        match d {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treated),
            _ => None,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn value(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }
}

/// Unvalidated columns as they come out of a file or a generator.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub outcome: Vec<f64>,
    pub treatment: Vec<f64>,
    pub mediator: Vec<f64>,
    pub covariates: Array2<f64>,
}

/// A validated sample. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcome: Vec<f64>,
    treatment: Vec<u8>,
    mediator: Vec<u8>,
    covariates: Array2<f64>,
}

fn binary_column(values: &[f64], column: &'static str) -> Result<Vec<u8>> {
    values
        .iter()
        .enumerate()
        .map(|(row, &v)| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::NonBinaryColumn { column, row, value: v })
            }
        })
        .collect()
}

/// Checks lengths, binary coding, finiteness and that both arms are present.
pub fn validate_dataset(raw: RawDataset) -> Result<Dataset> {
    let n = raw.outcome.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    for (what, got) in [
        ("treatment", raw.treatment.len()),
        ("mediator", raw.mediator.len()),
        ("covariate rows", raw.covariates.nrows()),
    ] {
        if got != n {
            return Err(Error::LengthMismatch { what, expected: n, got });
        }
    }
    if let Some(row) = raw.outcome.iter().position(|y| !y.is_finite()) {
        return Err(Error::NonFiniteOutcome { row });
    }
    let treatment = binary_column(&raw.treatment, "treatment")?;
    let mediator = binary_column(&raw.mediator, "mediator")?;
    for ((row, col), v) in raw.covariates.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteCovariate { row, col });
        }
    }
    let treated = treatment.iter().filter(|&&d| d == 1).count();
    if treated == 0 {
        return Err(Error::EmptyArm { arm: 1, context: String::new() });
    }
    if treated == n {
        return Err(Error::EmptyArm { arm: 0, context: String::new() });
    }
    Ok(Dataset {
        outcome: raw.outcome,
        treatment,
        mediator,
        covariates: raw.covariates.as_standard_layout().into_owned(),
    })
}

impl Dataset {
    pub fn new(
        outcome: Vec<f64>,
        treatment: Vec<f64>,
        mediator: Vec<f64>,
        covariates: Array2<f64>,
    ) -> Result<Self> {
        validate_dataset(RawDataset { outcome, treatment, mediator, covariates })
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            outcome: self.outcome.clone(),
            treatment: self.treatment.iter().map(|&d| d as f64).collect(),
            mediator: self.mediator.iter().map(|&m| m as f64).collect(),
            covariates: self.covariates.clone(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn mediator(&self) -> &[u8] {
        &self.mediator
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    /// Covariate row `i` as a contiguous slice.
    #[inline]
    pub fn x_row(&self, i: usize) -> &[f64] {
        let p = self.p();
        let flat = self.covariates.as_slice().expect("standard layout");
        &flat[i * p..(i + 1) * p]
    }

    /// Copy with the outcome replaced; treatment, mediator and covariates unchanged.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.outcome = outcome;
        validate_dataset(raw)
    }

    /// Rows `rows` of the covariate matrix with `lead` extra columns prepended.
    pub(crate) fn design(
        &self,
        rows: &[usize],
        lead: impl Fn(usize) -> Vec<f64>,
        lead_cols: usize,
    ) -> Array2<f64> {
        let p = self.p();
        let mut out = Array2::<f64>::zeros((rows.len(), lead_cols + p));
        for (&i, mut dst) in rows.iter().zip(out.axis_iter_mut(Axis(0))) {
            let head = lead(i);
            debug_assert_eq!(head.len(), lead_cols);
            for (c, v) in head.into_iter().enumerate() {
                dst[c] = v;
            }
            for (c, &v) in self.x_row(i).iter().enumerate() {
                dst[lead_cols + c] = v;
            }
        }
        out
    }

    pub(crate) fn count_arm(&self, rows: &[usize], arm: Arm) -> usize {
        rows.iter().filter(|&&i| self.treatment[i] == arm.value()).count()
    }
}

/// Assignment of each observation to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
    seed: u64,
}

/// Seeded uniform permutation of `0..n` cut into `k` contiguous blocks.
/// The first `n % k` blocks receive one extra observation.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewObservations { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut fold_of = vec![0usize; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &i in &perm[pos..pos + size] {
            fold_of[i] = fold;
        }
        pos += size;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Observations held out in `fold`, in increasing index order.
    pub fn fold(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Observations outside `fold`, in increasing index order.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}
