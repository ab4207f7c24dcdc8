//! The joint embedding: descriptiveness and predictability losses, their
//! per-sample gradients, SGD training and prediction.
//!
//! Conventions: `Y` is the dense M x N term matrix (one column per video),
//! `S` is k x N, `A` is M x k, and feature matrices are N x D with one row per
//! video, so a projection `W` is D x k and predicts `s = W^T x`.

mod io;
mod train;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{shape, Error, Result};

pub use io::{read_model, write_model};
pub(crate) use train::{run_epochs, GradientRule, TrainingData};
pub use train::{refine_with_halving, sgd_epochs, sgd_train, svd_init, TrainState};

/// Step size as a function of the global step counter `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant,
    /// `eta / (1 + rate * t)`
    InverseDecay { rate: f64 },
}

impl StepSchedule {
    pub fn step_size(&self, eta: f64, t: u64) -> f64 {
        match *self {
            StepSchedule::Constant => eta,
            StepSchedule::InverseDecay { rate } => eta / (1.0 + rate * t as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Embedding dimensionality.
    pub k: usize,
    pub lambda_a: f64,
    pub lambda_s: f64,
    pub lambda_w: f64,
    /// Base SGD step size.
    pub eta: f64,
    /// Number of passes over the training videos.
    pub epochs: usize,
    pub seed: u64,
    pub schedule: StepSchedule,
    /// Weight of event-definition terms in the term-sensitive loss.
    pub alpha: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            k: 2048,
            lambda_a: 1e-3,
            lambda_s: 1e-3,
            lambda_w: 1e-3,
            eta: 0.01,
            epochs: 10,
            seed: 0,
            schedule: StepSchedule::Constant,
            alpha: 0.75,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::BadParam("k must be at least 1".into()));
        }
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_s", self.lambda_s),
            ("lambda_w", self.lambda_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::BadParam(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::BadParam(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::BadParam("epochs must be at least 1".into()));
        }
        if let StepSchedule::InverseDecay { rate } = self.schedule {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::BadParam(format!("decay rate must be >= 0, got {rate}")));
            }
        }
        Ok(())
    }
}

/// A visual projection W (D x k) for one named modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub modality: String,
    pub weights: DMatrix<f64>,
}

/// Trained textual projection `A` plus one visual projection per modality.
/// Single-modality models have exactly one projection.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub textual: DMatrix<f64>,
    pub projections: Vec<Projection>,
    /// Per-modality weights of the predictability loss.
    pub gammas: Vec<f64>,
    pub hyperparams: Hyperparams,
    pub vocab_fingerprint: [u8; 32],
}

impl EmbeddingModel {
    pub fn k(&self) -> usize {
        self.textual.ncols()
    }

    pub fn n_terms(&self) -> usize {
        self.textual.nrows()
    }

    pub fn n_modalities(&self) -> usize {
        self.projections.len()
    }

    /// The visual projection of a single-modality model.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.projections[0].weights
    }

    pub fn check(&self) -> Result<()> {
        if self.projections.is_empty() {
            return Err(Error::Empty("model has no projections".into()));
        }
        if self.gammas.len() != self.projections.len() {
            return Err(shape("one gamma per projection required"));
        }
        if self.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::BadParam("gammas must be finite and >= 0".into()));
        }
        let k = self.k();
        for p in &self.projections {
            if p.weights.ncols() != k {
                return Err(shape(format!("projection {} has {} columns, k = {k}", p.modality, p.weights.ncols())));
            }
            if !crate::linalg::all_finite(&p.weights) {
                return Err(Error::NonFinite(format!("projection {}", p.modality)));
            }
        }
        if !crate::linalg::all_finite(&self.textual) {
            return Err(Error::NonFinite("textual projection".into()));
        }
        Ok(())
    }

    /// Index of each projection's modality in `corpus`, matched by name.
    pub fn modality_map(&self, corpus: &Corpus) -> Result<Vec<usize>> {
        self.projections
            .iter()
            .map(|p| {
                corpus.modality_index(&p.modality).ok_or_else(|| {
                    shape(format!("corpus has no modality named {:?}", p.modality))
                })
            })
            .collect()
    }

    pub fn check_vocabulary(&self, corpus: &Corpus) -> Result<()> {
        if corpus.vocabulary().len() != self.n_terms() {
            return Err(shape(format!(
                "model has {} terms, corpus vocabulary {}",
                self.n_terms(),
                corpus.vocabulary().len()
            )));
        }
        if corpus.vocabulary().fingerprint() != self.vocab_fingerprint {
            return Err(shape("vocabulary fingerprint differs from the model's"));
        }
        Ok(())
    }
}

fn check_dims(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(shape(format!("{what}: expected {}x{}, got {}x{}", want.0, want.1, got.0, got.1)));
    }
    Ok(())
}

/// `1/2 sum_i ||y_i - A s_i||^2 + lambda_a/2 ||A||_F^2 + lambda_s/2 ||S||_F^2`.
pub fn descriptiveness_loss(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda_a: f64,
    lambda_s: f64,
) -> Result<f64> {
    let (m, k) = a.shape();
    let n = y.ncols();
    check_dims("S", s.shape(), (k, n))?;
    check_dims("Y", y.shape(), (m, n))?;
    let recon = y - a * s;
    let mut sum = 0.0;
    for v in recon.iter() {
        sum += v * v;
    }
    Ok(0.5 * sum + lambda_a * 0.5 * a.norm_squared() + lambda_s * 0.5 * s.norm_squared())
}

/// `1/2 sum_i ||s_i - W^T x_i||^2 + lambda_w/2 ||W||_F^2`, with `x` N x D.
pub fn predictability_loss(
    s: &DMatrix<f64>,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
    lambda_w: f64,
) -> Result<f64> {
    let (d, k) = w.shape();
    let n = s.ncols();
    check_dims("S", s.shape(), (k, n))?;
    check_dims("X", x.shape(), (n, d))?;
    let resid = s - (x * w).transpose();
    let mut sum = 0.0;
    for v in resid.iter() {
        sum += v * v;
    }
    Ok(0.5 * sum + lambda_w * 0.5 * w.norm_squared())
}

/// Descriptiveness plus predictability for a given `S`.
pub fn total_objective(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    hp: &Hyperparams,
) -> Result<f64> {
    Ok(descriptiveness_loss(a, s, y, hp.lambda_a, hp.lambda_s)?
        + predictability_loss(s, w, x, hp.lambda_w)?)
}

/// Gradients of the single-sample objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradients {
    pub a: DMatrix<f64>,
    /// One entry per modality.
    pub w: Vec<DMatrix<f64>>,
    pub s: DVector<f64>,
}

pub(crate) fn check_sample_shapes(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    s_t: &DVector<f64>,
    x_t: &DVector<f64>,
    y_t: &DVector<f64>,
) -> Result<()> {
    let (m, k) = a.shape();
    if w.ncols() != k {
        return Err(shape(format!("W has {} columns, k = {k}", w.ncols())));
    }
    if s_t.len() != k || y_t.len() != m || x_t.len() != w.nrows() {
        return Err(shape(format!(
            "sample shapes: |s|={} (k={k}), |y|={} (M={m}), |x|={} (D={})",
            s_t.len(),
            y_t.len(),
            x_t.len(),
            w.nrows()
        )));
    }
    Ok(())
}

pub(crate) fn require_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} contains a non-finite value")))
    }
}

pub(crate) fn plain_gradients(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    s_t: &DVector<f64>,
    x_t: &DVector<f64>,
    y_t: &DVector<f64>,
    hp: &Hyperparams,
) -> SampleGradients {
    let r = y_t - a * s_t;
    let e = s_t - w.transpose() * x_t;
    let grad_a = -(&r * s_t.transpose()) + a * hp.lambda_a;
    let grad_w = -(x_t * e.transpose()) + w * hp.lambda_w;
    let grad_s = -(a.transpose() * &r) + &e + s_t * hp.lambda_s;
    SampleGradients {
        a: grad_a,
        w: vec![grad_w],
        s: grad_s,
    }
}

/// Per-sample gradients with respect to `A`, `W` and `s_t`:
///
/// ```text
/// dA = -(y - A s) s^T + lambda_a A
/// dW = -x (s - W^T x)^T + lambda_w W
/// ds = -A^T (y - A s) + (s - W^T x) + lambda_s s
/// ```
pub fn sample_gradients(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    s_t: &DVector<f64>,
    x_t: &DVector<f64>,
    y_t: &DVector<f64>,
    hp: &Hyperparams,
) -> Result<SampleGradients> {
    check_sample_shapes(a, w, s_t, x_t, y_t)?;
    require_finite("A", a.iter().copied())?;
    require_finite("W", w.iter().copied())?;
    require_finite("s_t", s_t.iter().copied())?;
    require_finite("x_t", x_t.iter().copied())?;
    require_finite("y_t", y_t.iter().copied())?;
    Ok(plain_gradients(a, w, s_t, x_t, y_t, hp))
}

/// The single-sample objective whose gradient `sample_gradients` returns.
pub fn sample_objective(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    s_t: &DVector<f64>,
    x_t: &DVector<f64>,
    y_t: &DVector<f64>,
    hp: &Hyperparams,
) -> f64 {
    let r = y_t - a * s_t;
    let e = s_t - w.transpose() * x_t;
    let descriptive = 0.5 * r.norm_squared()
        + hp.lambda_a * 0.5 * a.norm_squared()
        + hp.lambda_s * 0.5 * s_t.norm_squared();
    descriptive + (0.5 * e.norm_squared() + hp.lambda_w * 0.5 * w.norm_squared())
}

/// `s = W^T x` for a single-modality model.
pub fn embed(model: &EmbeddingModel, x: &DVector<f64>) -> Result<DVector<f64>> {
    if model.n_modalities() != 1 {
        return Err(shape(format!(
            "embed needs a single-modality model, this one has {}",
            model.n_modalities()
        )));
    }
    let w = model.w();
    if x.len() != w.nrows() {
        return Err(shape(format!("feature vector has {} entries, D = {}", x.len(), w.nrows())));
    }
    Ok(w.transpose() * x)
}

/// `y_hat = A s`.
pub fn predict_terms(model: &EmbeddingModel, s: &DVector<f64>) -> Result<DVector<f64>> {
    if s.len() != model.k() {
        return Err(shape(format!("embedding has {} entries, k = {}", s.len(), model.k())));
    }
    Ok(&model.textual * s)
}

/// The `n` highest-scoring terms, ties broken by lower vocabulary index.
pub fn top_terms(scores: &DVector<f64>, n: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx.truncate(n);
    idx.into_iter().map(|i| (i, scores[i])).collect()
}

/// Objective on held-out videos with `S = W^T X` plugged in. For several
/// modalities `S` is the gamma-weighted mean of the per-modality predictions.
pub fn validation_objective(model: &EmbeddingModel, corpus_val: &Corpus) -> Result<f64> {
    model.check_vocabulary(corpus_val)?;
    let map = model.modality_map(corpus_val)?;
    let y = corpus_val.term_matrix().to_dense();
    let gamma_sum: f64 = model.gammas.iter().sum();
    if gamma_sum <= 0.0 {
        return Err(Error::BadParam("at least one gamma must be positive".into()));
    }
    let mut s: Option<DMatrix<f64>> = None;
    for ((p, &j), &g) in model.projections.iter().zip(&map).zip(&model.gammas) {
        let x = corpus_val.modality(j).values();
        if x.ncols() != p.weights.nrows() {
            return Err(shape(format!("modality {}: D mismatch", p.modality)));
        }
        let pred = (x * &p.weights).transpose() * g;
        s = Some(match s {
            None => pred,
            Some(acc) => acc + pred,
        });
    }
    let s = s.expect("at least one projection") / gamma_sum;
    let hp = &model.hyperparams;
    let mut total = descriptiveness_loss(&model.textual, &s, &y, hp.lambda_a, hp.lambda_s)?;
    for ((p, &j), &g) in model.projections.iter().zip(&map).zip(&model.gammas) {
        total += g * predictability_loss(&s, &p.weights, corpus_val.modality(j).values(), hp.lambda_w)?;
    }
    Ok(total)
}

/// Result of an exhaustive hyperparameter search.
#[derive(Debug, Clone)]
pub struct GridSearch {
    /// Validation objective per grid point, in grid order.
    pub scores: Vec<f64>,
    /// Index of the first grid point with the lowest score.
    pub best: usize,
    pub model: EmbeddingModel,
}

/// Trains one model per grid point on `train` and keeps the one with the
/// lowest validation objective on `val`.
pub fn grid_search(
    train: &Corpus,
    val: &Corpus,
    grid: &[Hyperparams],
    modality: usize,
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid is empty".into()));
    }
    let runs: Vec<(EmbeddingModel, f64)> = grid
        .par_iter()
        .map(|hp| {
            let model = sgd_train(train, hp, modality)?;
            let score = validation_objective(&model, val)?;
            Ok((model, score))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v < scores[best] {
            best = i;
        }
    }
    let model = runs.into_iter().nth(best).expect("non-empty").0;
    Ok(GridSearch { scores, best, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp0() -> Hyperparams {
        Hyperparams {
            k: 1,
            lambda_a: 0.0,
            lambda_s: 0.0,
            lambda_w: 0.0,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn descriptiveness_examples() {
        let y = DMatrix::from_element(1, 1, 1.0);
        let zero = DMatrix::from_element(1, 1, 0.0);
        assert_eq!(descriptiveness_loss(&zero, &zero, &y, 0.0, 0.0).unwrap(), 0.5);
        let one = DMatrix::from_element(1, 1, 1.0);
        // lambda_a = 2 with A = [[1]] and S = [[0]]: 0.5 + 2 * 0.5 * 1
        assert_eq!(descriptiveness_loss(&one, &zero, &y, 2.0, 0.0).unwrap(), 1.5);

        let a = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let s = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 0.5]);
        assert_eq!(descriptiveness_loss(&a, &s, &(&a * &s), 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn predictability_examples() {
        let s = DMatrix::from_element(1, 1, 3.0);
        let w = DMatrix::from_element(1, 1, 1.0);
        let x = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(predictability_loss(&s, &w, &x, 2.0).unwrap(), 1.5);

        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let w0 = DMatrix::zeros(3, 2);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, -1.0, 1.0, 0.0]);
        assert_eq!(predictability_loss(&s, &w0, &x, 0.0).unwrap(), 0.5 * s.norm_squared());

        let w = DMatrix::from_row_slice(3, 2, &[0.5, 1.0, -1.0, 2.0, 0.25, 0.0]);
        let exact = (&x * &w).transpose();
        assert_eq!(predictability_loss(&exact, &w, &x, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_reported() {
        let a = DMatrix::zeros(2, 1);
        let s = DMatrix::zeros(1, 3);
        let y = DMatrix::zeros(2, 2);
        assert!(matches!(descriptiveness_loss(&a, &s, &y, 0.0, 0.0), Err(Error::ShapeMismatch(_))));
        let w = DMatrix::zeros(2, 1);
        let x = DMatrix::zeros(3, 3);
        assert!(matches!(predictability_loss(&s, &w, &x, 0.0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gradient_examples() {
        let hp = hp0();
        let a = DMatrix::zeros(2, 1);
        let w = DMatrix::zeros(1, 1);
        let s = DVector::from_element(1, 1.0);
        let x = DVector::from_element(1, 0.0);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let g = sample_gradients(&a, &w, &s, &x, &y, &hp).unwrap();
        assert_eq!(g.a, DMatrix::from_row_slice(2, 1, &[-1.0, 0.0]));

        // both residuals vanish
        let a = DMatrix::<f64>::identity(2, 2);
        let w = DMatrix::<f64>::identity(2, 2);
        let s = DVector::from_vec(vec![0.3, -0.7]);
        let x = s.clone();
        let y = &a * &s;
        let g = sample_gradients(&a, &w, &s, &x, &y, &hp).unwrap();
        assert!(g.s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradients_reject_non_finite() {
        let hp = hp0();
        let a = DMatrix::from_element(1, 1, f64::NAN);
        let w = DMatrix::zeros(1, 1);
        let v = DVector::zeros(1);
        assert!(matches!(
            sample_gradients(&a, &w, &v, &v, &v, &hp),
            Err(Error::NonFinite(_))
        ));
    }

    fn model_with(a: DMatrix<f64>, w: DMatrix<f64>) -> EmbeddingModel {
        EmbeddingModel {
            textual: a,
            projections: vec![Projection {
                modality: "v".into(),
                weights: w,
            }],
            gammas: vec![1.0],
            hyperparams: hp0(),
            vocab_fingerprint: [0; 32],
        }
    }

    #[test]
    fn embed_and_predict() {
        let m = model_with(DMatrix::identity(3, 3), DMatrix::from_row_slice(2, 1, &[1.0, 2.0]));
        let s = embed(&m, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(s.as_slice(), [3.0]);
        assert!(matches!(embed(&m, &DVector::zeros(3)), Err(Error::ShapeMismatch(_))));

        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(predict_terms(&m, &e2).unwrap(), e2);
        assert_eq!(predict_terms(&m, &DVector::zeros(3)).unwrap(), DVector::zeros(3));
        assert!(matches!(predict_terms(&m, &DVector::zeros(2)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn top_terms_ties_by_index() {
        let v = DVector::from_vec(vec![0.5, 2.0, 0.5, -1.0, 2.0]);
        let top: Vec<usize> = top_terms(&v, 3).into_iter().map(|t| t.0).collect();
        assert_eq!(top, [1, 4, 0]);
        let scaled: Vec<usize> = top_terms(&(v * 3.5), 3).into_iter().map(|t| t.0).collect();
        assert_eq!(scaled, [1, 4, 0]);
    }

    #[test]
    fn step_schedules() {
        assert_eq!(StepSchedule::Constant.step_size(0.1, 99), 0.1);
        assert_eq!(StepSchedule::InverseDecay { rate: 0.5 }.step_size(0.5, 6), 0.125);
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        for bad in [
            Hyperparams { k: 0, ..Default::default() },
            Hyperparams { eta: -0.1, ..Default::default() },
            Hyperparams { epochs: 0, ..Default::default() },
            Hyperparams { lambda_s: -1.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::BadParam(_))));
        }
    }
}
