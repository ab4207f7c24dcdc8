use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// `exp(-gamma * ||u - v||^2)` between the rows of `a` and the rows of `b`.
pub fn rbf_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let mut d2 = 0.0;
        for c in 0..a.ncols() {
            let d = a[(i, c)] - b[(j, c)];
            d2 += d * d;
        }
        (-gamma * d2).exp()
    })
}

/// Factorized `K + reg I` over a training set, reusable across label vectors.
pub struct KernelSystem {
    train: DMatrix<f64>,
    gamma: f64,
    chol: Cholesky<f64, Dyn>,
}

impl KernelSystem {
    /// `train` holds one representation per row.
    pub fn new(train: DMatrix<f64>, reg: f64, gamma: f64) -> Result<Self> {
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(Error::BadParam(format!("classifier regularizer must be > 0, got {reg}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::BadParam(format!("RBF gamma must be > 0, got {gamma}")));
        }
        if train.nrows() == 0 {
            return Err(Error::Empty("no training videos".into()));
        }
        if !crate::linalg::all_finite(&train) {
            return Err(Error::NonFinite("training representations".into()));
        }
        let mut k = rbf_kernel(&train, &train, gamma);
        crate::linalg::add_diagonal(&mut k, reg);
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Singular("kernel system is not positive definite".into()))?;
        Ok(Self { train, gamma, chol })
    }

    /// Scorer for labels encoded +1 (positive) and -1 (negative).
    pub fn fit(&self, labels: &[bool]) -> Result<KernelScorer> {
        if labels.len() != self.train.nrows() {
            return Err(crate::error::shape("one label per training video required"));
        }
        if !labels.iter().any(|l| *l) {
            return Err(Error::NoPositives);
        }
        if labels.iter().all(|l| *l) {
            return Err(Error::BadParam("training set has no negatives".into()));
        }
        let y = DVector::from_iterator(labels.len(), labels.iter().map(|&l| if l { 1.0 } else { -1.0 }));
        Ok(KernelScorer {
            train: self.train.clone(),
            coef: self.chol.solve(&y),
            gamma: self.gamma,
        })
    }
}

/// Kernel regularized least-squares scorer `score(x) = sum_i c_i K(x, x_i)`.
#[derive(Debug, Clone)]
pub struct KernelScorer {
    train: DMatrix<f64>,
    pub coef: DVector<f64>,
    pub gamma: f64,
}

impl KernelScorer {
    /// Scores every row of `reps`.
    pub fn score(&self, reps: &DMatrix<f64>) -> Result<DVector<f64>> {
        if reps.ncols() != self.train.ncols() {
            return Err(crate::error::shape(format!(
                "representation has {} dimensions, classifier expects {}",
                reps.ncols(),
                self.train.ncols()
            )));
        }
        Ok(rbf_kernel(reps, &self.train, self.gamma) * &self.coef)
    }
}

/// Solves `(K + reg I) c = y` with `y` in {-1, +1}.
pub fn train_event_classifier(
    reps: &DMatrix<f64>,
    labels: &[bool],
    reg: f64,
    rbf_gamma: f64,
) -> Result<KernelScorer> {
    KernelSystem::new(reps.clone(), reg, rbf_gamma)?.fit(labels)
}
