use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{plain_gradients, EmbeddingModel, Hyperparams, Projection, SampleGradients};
use crate::corpus::{Corpus, TermMatrix};
use crate::error::{shape, Error, Result};
use crate::{fusion, zeroshot};

/// Rank-k truncated SVD of the term matrix, `Y ~ U_k S_k V_k^T`, split as
/// `A = U_k S_k^{1/2}` (M x k) and `S = S_k^{1/2} V_k^T` (k x N).
pub fn svd_init(y: &TermMatrix, k: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (m, n) = (y.n_terms(), y.n_videos());
    if k == 0 {
        return Err(Error::BadParam("k must be at least 1".into()));
    }
    if k > m.min(n) {
        return Err(Error::RankTooLarge {
            requested: k,
            max: m.min(n),
        });
    }
    let svd = y.to_dense().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));

    let mut a = DMatrix::zeros(m, k);
    let mut s = DMatrix::zeros(k, n);
    for (c, &i) in order.iter().take(k).enumerate() {
        let root = sigma[i].max(0.0).sqrt();
        a.set_column(c, &(u.column(i) * root));
        s.set_row(c, &(v_t.row(i) * root));
    }
    Ok((a, s))
}

/// Mutable training state: both projections, the per-video embeddings of
/// the training set, counters and the sampling generator.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub a: DMatrix<f64>,
    /// One D_j x k projection per modality.
    pub w: Vec<DMatrix<f64>>,
    /// k x N embeddings of the training videos.
    pub s: DMatrix<f64>,
    pub epoch: usize,
    pub step: u64,
    rng: ChaCha8Rng,
}

impl TrainState {
    /// SVD initialisation of `A` and `S`; each `W^j` drawn from a zero-mean
    /// Gaussian with standard deviation `1/sqrt(D_j)`, filled row by row.
    pub fn initialize(y: &TermMatrix, dims: &[usize], hp: &Hyperparams) -> Result<Self> {
        let (a, s) = svd_init(y, hp.k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let mut w = Vec::with_capacity(dims.len());
        for &d in dims {
            if d == 0 {
                return Err(Error::BadParam("feature dimensionality must be at least 1".into()));
            }
            let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt())
                .map_err(|e| Error::BadParam(e.to_string()))?;
            let mut m = DMatrix::zeros(d, hp.k);
            for r in 0..d {
                for c in 0..hp.k {
                    m[(r, c)] = normal.sample(&mut rng);
                }
            }
            w.push(m);
        }
        Ok(Self {
            a,
            w,
            s,
            epoch: 0,
            step: 0,
            rng,
        })
    }

    /// Starts from given parameters, e.g. another optimiser's solution.
    pub fn from_parts(a: DMatrix<f64>, w: Vec<DMatrix<f64>>, s: DMatrix<f64>, seed: u64) -> Result<Self> {
        let k = a.ncols();
        if s.nrows() != k || w.iter().any(|m| m.ncols() != k) {
            return Err(shape("A, S and W must share the embedding dimension"));
        }
        Ok(Self {
            a,
            w,
            s,
            epoch: 0,
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn into_model(
        self,
        modalities: Vec<String>,
        gammas: Vec<f64>,
        hp: &Hyperparams,
        vocab_fingerprint: [u8; 32],
    ) -> EmbeddingModel {
        EmbeddingModel {
            textual: self.a,
            projections: modalities
                .into_iter()
                .zip(self.w)
                .map(|(modality, weights)| Projection { modality, weights })
                .collect(),
            gammas,
            hyperparams: hp.clone(),
            vocab_fingerprint,
        }
    }
}

/// Which per-sample gradient the SGD loop applies.
pub(crate) enum GradientRule<'a> {
    Plain,
    Fused { gammas: &'a [f64] },
    TermSensitive { weights: &'a DVector<f64>, gammas: &'a [f64] },
}

pub(crate) struct TrainingData<'a> {
    y: &'a TermMatrix,
    /// Transposed features, D_j x N, so a video is a column.
    xt: Vec<DMatrix<f64>>,
}

impl<'a> TrainingData<'a> {
    pub fn new(corpus: &'a Corpus, modalities: &[usize]) -> Self {
        Self {
            y: corpus.term_matrix(),
            xt: modalities
                .iter()
                .map(|&j| corpus.modality(j).values().transpose())
                .collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.xt.iter().map(|x| x.nrows()).collect()
    }
}

/// Runs `epochs` passes; each visits every video once in a fresh permutation
/// and applies all three updates from gradients taken at the same point.
pub(crate) fn run_epochs(
    state: &mut TrainState,
    data: &TrainingData<'_>,
    rule: &GradientRule<'_>,
    hp: &Hyperparams,
    epochs: usize,
) -> Result<()> {
    let n = data.y.n_videos();
    if state.s.ncols() != n {
        return Err(shape(format!("S has {} columns, corpus has {n} videos", state.s.ncols())));
    }
    if state.w.len() != data.xt.len() {
        return Err(shape("one projection per modality required"));
    }
    for (w, x) in state.w.iter().zip(&data.xt) {
        if w.nrows() != x.nrows() {
            return Err(shape(format!("projection has {} rows, features have D = {}", w.nrows(), x.nrows())));
        }
    }
    if state.a.nrows() != data.y.n_terms() {
        return Err(shape("A row count must equal the vocabulary size"));
    }
    // A and W appear in every sample, so each step carries 1/N of their
    // regularizers and an epoch's expected step follows the full objective.
    let sample_hp = Hyperparams {
        lambda_a: hp.lambda_a / n as f64,
        lambda_w: hp.lambda_w / n as f64,
        ..hp.clone()
    };
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.sort_unstable();
        order.shuffle(&mut state.rng);
        for &t in &order {
            let y_t = data.y.column_dense(t);
            let s_t = state.s.column(t).clone_owned();
            let xs: Vec<DVector<f64>> = data.xt.iter().map(|x| x.column(t).clone_owned()).collect();
            let g: SampleGradients = match rule {
                GradientRule::Plain => plain_gradients(&state.a, &state.w[0], &s_t, &xs[0], &y_t, &sample_hp),
                GradientRule::Fused { gammas } => {
                    fusion::fused_gradients(&state.a, &state.w, &s_t, &xs, &y_t, &sample_hp, gammas)
                }
                GradientRule::TermSensitive { weights, gammas } => {
                    zeroshot::ts_gradients(&state.a, &state.w, &s_t, &xs, &y_t, weights, &sample_hp, gammas)
                }
            };
            let eta = hp.schedule.step_size(hp.eta, state.step);
            state.a.zip_apply(&g.a, |p, d| *p -= eta * d);
            for (w, gw) in state.w.iter_mut().zip(&g.w) {
                w.zip_apply(gw, |p, d| *p -= eta * d);
            }
            let mut s_new = s_t;
            s_new.axpy(-eta, &g.s, 1.0);
            let finite = crate::linalg::all_finite_vec(&s_new)
                && crate::linalg::all_finite(&state.a)
                && state.w.iter().all(crate::linalg::all_finite);
            state.s.set_column(t, &s_new);
            if !finite {
                return Err(Error::Diverged {
                    epoch: state.epoch + 1,
                    step: state.step,
                });
            }
            state.step += 1;
        }
        state.epoch += 1;
    }
    Ok(())
}

fn check_training_input(corpus: &Corpus, hp: &Hyperparams) -> Result<()> {
    hp.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus has no videos".into()));
    }
    Ok(())
}

/// Single-modality training: SVD initialisation followed by `hp.epochs`
/// passes of per-sample SGD on features `modality` of `corpus`.
pub fn sgd_train(corpus: &Corpus, hp: &Hyperparams, modality: usize) -> Result<EmbeddingModel> {
    check_training_input(corpus, hp)?;
    if modality >= corpus.n_modalities() {
        return Err(shape(format!(
            "modality {modality} out of range ({} available)",
            corpus.n_modalities()
        )));
    }
    let data = TrainingData::new(corpus, &[modality]);
    let mut state = TrainState::initialize(corpus.term_matrix(), &data.dims(), hp)?;
    run_epochs(&mut state, &data, &GradientRule::Plain, hp, hp.epochs)?;
    Ok(state.into_model(
        vec![corpus.modality(modality).name().to_string()],
        vec![1.0],
        hp,
        corpus.vocabulary().fingerprint(),
    ))
}

/// Continues single-modality SGD from an existing state.
pub fn sgd_epochs(
    state: &mut TrainState,
    corpus: &Corpus,
    modality: usize,
    hp: &Hyperparams,
    epochs: usize,
) -> Result<()> {
    if modality >= corpus.n_modalities() {
        return Err(shape(format!("modality {modality} out of range")));
    }
    let data = TrainingData::new(corpus, &[modality]);
    run_epochs(state, &data, &GradientRule::Plain, hp, epochs)
}

/// Fine-tunes `state` on every modality of `corpus` for up to `epochs`
/// passes. An epoch that raises the whole-dataset objective is undone and
/// retried with half the step size; after `max_halvings` failed retries
/// training stops. Returns the objective before the first epoch and after
/// each accepted one, so the sequence never increases.
pub fn refine_with_halving(
    state: &mut TrainState,
    corpus: &Corpus,
    hp: &Hyperparams,
    gammas: &[f64],
    epochs: usize,
    max_halvings: usize,
) -> Result<Vec<f64>> {
    hp.validate()?;
    fusion::check_gammas(gammas, corpus.n_modalities())?;
    let modalities: Vec<usize> = (0..corpus.n_modalities()).collect();
    let data = TrainingData::new(corpus, &modalities);
    let y = corpus.term_matrix().to_dense();
    let xs: Vec<&DMatrix<f64>> = corpus.features().iter().map(|f| f.values()).collect();
    let objective = |st: &TrainState| fusion::fused_objective(&st.a, &st.w, &st.s, &y, &xs, gammas, hp);
    let mut trace = vec![objective(state)?];
    let mut step_hp = hp.clone();
    'epochs: for _ in 0..epochs {
        for _ in 0..=max_halvings {
            let mut trial = state.clone();
            let accepted = match run_epochs(&mut trial, &data, &GradientRule::Fused { gammas }, &step_hp, 1) {
                Ok(()) => {
                    let obj = objective(&trial)?;
                    (obj <= *trace.last().expect("non-empty")).then_some(obj)
                }
                Err(Error::Diverged { .. }) => None,
                Err(e) => return Err(e),
            };
            match accepted {
                Some(obj) => {
                    *state = trial;
                    trace.push(obj);
                    continue 'epochs;
                }
                None => step_hp.eta *= 0.5,
            }
        }
        break;
    }
    Ok(trace)
}
