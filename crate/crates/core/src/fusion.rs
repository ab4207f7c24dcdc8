//! Multimodal training: one shared embedding predicted from every modality,
//! each with its own visual projection.

use nalgebra::{DMatrix, DVector};

use crate::corpus::Corpus;
use crate::embedding::{
    check_sample_shapes, descriptiveness_loss, predictability_loss, require_finite, run_epochs,
    EmbeddingModel, GradientRule, Hyperparams, SampleGradients, TrainState, TrainingData,
};
use crate::error::{shape, Error, Result};

/// A model with one projection per modality. Modality order is the corpus
/// declaration order and is kept in the model file.
pub type MultimodalModel = EmbeddingModel;

pub(crate) fn check_gammas(gammas: &[f64], j: usize) -> Result<()> {
    if gammas.len() != j {
        return Err(shape(format!("{} gammas for {j} modalities", gammas.len())));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        return Err(Error::BadParam(format!("gamma must be finite and >= 0, got {g}")));
    }
    Ok(())
}

/// `sum_j gamma_j * L_p(S, W^j)` over modalities (features N x D_j each).
pub fn multimodal_predictability_loss(
    s: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    features: &[&DMatrix<f64>],
    gammas: &[f64],
    lambda_w: f64,
) -> Result<f64> {
    if projections.is_empty() || projections.len() != features.len() {
        return Err(shape("one feature matrix per projection required"));
    }
    check_gammas(gammas, projections.len())?;
    let mut total: Option<f64> = None;
    for ((w, x), &g) in projections.iter().zip(features).zip(gammas) {
        let term = g * predictability_loss(s, w, x, lambda_w)?;
        total = Some(match total {
            None => term,
            Some(acc) => acc + term,
        });
    }
    Ok(total.expect("non-empty"))
}

/// Descriptiveness plus multimodal predictability for a given `S`.
pub fn fused_objective(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    features: &[&DMatrix<f64>],
    gammas: &[f64],
    hp: &Hyperparams,
) -> Result<f64> {
    Ok(descriptiveness_loss(a, s, y, hp.lambda_a, hp.lambda_s)?
        + multimodal_predictability_loss(s, projections, features, gammas, hp.lambda_w)?)
}

/// Predictability residuals `s - W^jT x^j` per modality: the weighted
/// projection gradients and the weighted residual sum that enters `ds`.
pub(crate) fn modality_terms(
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    hp: &Hyperparams,
    gammas: &[f64],
) -> (Vec<DMatrix<f64>>, DVector<f64>) {
    let mut grad_w = Vec::with_capacity(projections.len());
    let mut resid_sum: Option<DVector<f64>> = None;
    for ((w, x), &g) in projections.iter().zip(xs).zip(gammas) {
        let e = s_t - w.transpose() * x;
        grad_w.push((-(x * e.transpose()) + w * hp.lambda_w) * g);
        let term = e * g;
        resid_sum = Some(match resid_sum {
            None => term,
            Some(acc) => acc + term,
        });
    }
    (grad_w, resid_sum.expect("at least one modality"))
}

pub(crate) fn fused_gradients(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    y_t: &DVector<f64>,
    hp: &Hyperparams,
    gammas: &[f64],
) -> SampleGradients {
    let r = y_t - a * s_t;
    let (grad_w, resid_sum) = modality_terms(projections, s_t, xs, hp, gammas);
    let grad_a = -(&r * s_t.transpose()) + a * hp.lambda_a;
    let grad_s = -(a.transpose() * &r) + resid_sum + s_t * hp.lambda_s;
    SampleGradients {
        a: grad_a,
        w: grad_w,
        s: grad_s,
    }
}

pub(crate) fn check_fused_sample(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    y_t: &DVector<f64>,
    gammas: &[f64],
) -> Result<()> {
    if projections.is_empty() || projections.len() != xs.len() {
        return Err(shape("one feature vector per projection required"));
    }
    check_gammas(gammas, projections.len())?;
    for (w, x) in projections.iter().zip(xs) {
        check_sample_shapes(a, w, s_t, x, y_t)?;
        require_finite("W", w.iter().copied())?;
        require_finite("x_t", x.iter().copied())?;
    }
    require_finite("A", a.iter().copied())?;
    require_finite("s_t", s_t.iter().copied())?;
    require_finite("y_t", y_t.iter().copied())?;
    Ok(())
}

/// Per-sample gradients of the descriptiveness loss plus the gamma-weighted
/// multimodal predictability loss:
///
/// ```text
/// dW^j = gamma_j * (-x^j (s - W^jT x^j)^T + lambda_w W^j)
/// ds   = -A^T (y - A s) + sum_j gamma_j (s - W^jT x^j) + lambda_s s
/// ```
///
/// `dA` is unchanged from the single-modality case.
pub fn sample_gradients_fused(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    y_t: &DVector<f64>,
    hp: &Hyperparams,
    gammas: &[f64],
) -> Result<SampleGradients> {
    check_fused_sample(a, projections, s_t, xs, y_t, gammas)?;
    Ok(fused_gradients(a, projections, s_t, xs, y_t, hp, gammas))
}

/// The single-sample objective matching `sample_gradients_fused`.
pub fn fused_sample_objective(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    y_t: &DVector<f64>,
    hp: &Hyperparams,
    gammas: &[f64],
) -> f64 {
    let r = y_t - a * s_t;
    let mut total = 0.5 * r.norm_squared()
        + hp.lambda_a * 0.5 * a.norm_squared()
        + hp.lambda_s * 0.5 * s_t.norm_squared();
    for ((w, x), &g) in projections.iter().zip(xs).zip(gammas) {
        let e = s_t - w.transpose() * x;
        total += g * (0.5 * e.norm_squared() + hp.lambda_w * 0.5 * w.norm_squared());
    }
    total
}

fn all_modalities(corpus: &Corpus) -> Vec<usize> {
    (0..corpus.n_modalities()).collect()
}

fn model_names(corpus: &Corpus) -> Vec<String> {
    corpus.features().iter().map(|f| f.name().to_string()).collect()
}

/// Joint training over every modality of `corpus` with a shared embedding.
pub fn sgd_train_fused(corpus: &Corpus, hp: &Hyperparams, gammas: &[f64]) -> Result<MultimodalModel> {
    hp.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus has no videos".into()));
    }
    check_gammas(gammas, corpus.n_modalities())?;
    let data = TrainingData::new(corpus, &all_modalities(corpus));
    let mut state = TrainState::initialize(corpus.term_matrix(), &data.dims(), hp)?;
    run_epochs(&mut state, &data, &GradientRule::Fused { gammas }, hp, hp.epochs)?;
    Ok(state.into_model(
        model_names(corpus),
        gammas.to_vec(),
        hp,
        corpus.vocabulary().fingerprint(),
    ))
}

/// Continues multimodal SGD from an existing state.
pub fn sgd_epochs_fused(
    state: &mut TrainState,
    corpus: &Corpus,
    hp: &Hyperparams,
    gammas: &[f64],
    epochs: usize,
) -> Result<()> {
    check_gammas(gammas, corpus.n_modalities())?;
    let data = TrainingData::new(corpus, &all_modalities(corpus));
    run_epochs(state, &data, &GradientRule::Fused { gammas }, hp, epochs)
}

/// Concatenation `[W^1T x^1, ..., W^JT x^J]` in model modality order.
pub fn embed_fused(model: &MultimodalModel, xs: &[DVector<f64>]) -> Result<DVector<f64>> {
    if xs.len() != model.n_modalities() {
        return Err(shape(format!(
            "{} feature vectors for {} modalities",
            xs.len(),
            model.n_modalities()
        )));
    }
    let k = model.k();
    let mut out = DVector::zeros(k * xs.len());
    for (j, (p, x)) in model.projections.iter().zip(xs).enumerate() {
        if x.len() != p.weights.nrows() {
            return Err(shape(format!(
                "modality {}: {} features, D = {}",
                p.modality,
                x.len(),
                p.weights.nrows()
            )));
        }
        out.rows_mut(j * k, k).copy_from(&(p.weights.transpose() * x));
    }
    Ok(out)
}

/// Gamma-weighted sum of the per-modality predictions `sum_j gamma_j W^jT x^j`.
pub fn latent_sum(model: &MultimodalModel, xs: &[DVector<f64>]) -> Result<DVector<f64>> {
    if xs.len() != model.n_modalities() {
        return Err(shape("one feature vector per modality required"));
    }
    let mut acc: Option<DVector<f64>> = None;
    for ((p, x), &g) in model.projections.iter().zip(xs).zip(&model.gammas) {
        if x.len() != p.weights.nrows() {
            return Err(shape(format!("modality {}: D mismatch", p.modality)));
        }
        let term = (p.weights.transpose() * x) * g;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    Ok(acc.expect("model has projections"))
}
