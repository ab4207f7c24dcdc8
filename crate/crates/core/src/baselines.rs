//! Comparison representations: per-term linear attribute scorers and the
//! two-step description embedding.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Corpus, FeatureMatrix};
use crate::embedding::{EmbeddingModel, Hyperparams, TrainState};
use crate::error::{format_err, shape, Error, Result};
use crate::eval::average_precision;
use crate::linalg::{add_diagonal, spd_solve};
use crate::oracle::{alternating_descriptive, closed_form_w};

const ATTRIBUTE_MAGIC: &str = "VSA1";

/// Linear scorers, one per selected term, applied to the concatenated
/// features of `modalities`. Row `r` of `weights` is `[w_r, b_r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TermAttributeModel {
    pub modalities: Vec<String>,
    pub selected_terms: Vec<usize>,
    /// m_sel x (D + 1); the last column is the bias.
    pub weights: DMatrix<f64>,
    /// Mean held-out AP of each selected term; empty for frequency selection.
    pub cv_scores: Vec<f64>,
}

impl TermAttributeModel {
    pub fn dim(&self) -> usize {
        self.selected_terms.len()
    }

    /// Attribute scores for one feature vector.
    pub fn scores(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.weights.ncols() - 1;
        if x.len() != d {
            return Err(shape(format!("{} features, scorer expects {d}", x.len())));
        }
        Ok(self.weights.columns(0, d) * x + self.weights.column(d))
    }

    /// N x m_sel attribute scores of every video.
    pub fn represent(&self, corpus: &Corpus) -> Result<DMatrix<f64>> {
        let x = feature_view(corpus, &self.modalities)?;
        let d = self.weights.ncols() - 1;
        if x.ncols() != d {
            return Err(shape(format!("{} features, scorers expect {d}", x.ncols())));
        }
        let mut out = x * self.weights.columns(0, d).transpose();
        for mut row in out.row_iter_mut() {
            row += self.weights.column(d).transpose();
        }
        Ok(out)
    }
}

fn feature_view(corpus: &Corpus, modalities: &[String]) -> Result<DMatrix<f64>> {
    let parts = modalities
        .iter()
        .map(|name| {
            corpus
                .modality_index(name)
                .map(|j| corpus.modality(j).clone())
                .ok_or_else(|| shape(format!("corpus has no modality named {name:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if parts.len() == 1 {
        return Ok(parts[0].values().clone());
    }
    Ok(FeatureMatrix::concat(&parts, "attributes")?.values().clone())
}

fn modality_names(corpus: &Corpus) -> Vec<String> {
    corpus.features().iter().map(|f| f.name().to_string()).collect()
}

/// Ridge regression with an unpenalized intercept for every column of
/// `targets` (N x T) at once. Returns T x (D + 1).
fn fit_linear(x: &DMatrix<f64>, targets: &DMatrix<f64>, reg: f64) -> Result<DMatrix<f64>> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::BadParam(format!("attribute regularizer must be > 0, got {reg}")));
    }
    let (n, d) = x.shape();
    let x_mean = x.row_mean();
    let t_mean = targets.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let mut tc = targets.clone();
    for mut row in tc.row_iter_mut() {
        row -= &t_mean;
    }
    debug_assert_eq!(xc.nrows(), n);
    let mut gram = xc.transpose() * &xc;
    add_diagonal(&mut gram, reg);
    let w = spd_solve(gram, &(xc.transpose() * tc), "attribute scorer")?;
    let bias = t_mean - x_mean * &w;
    let mut out = DMatrix::zeros(targets.ncols(), d + 1);
    out.columns_mut(0, d).copy_from(&w.transpose());
    out.set_column(d, &bias.transpose());
    Ok(out)
}

fn label_matrix(corpus: &Corpus, terms: &[usize]) -> DMatrix<f64> {
    let y = corpus.term_matrix();
    let mut out = DMatrix::zeros(corpus.len(), terms.len());
    for (c, &t) in terms.iter().enumerate() {
        for (i, present) in y.term_labels(t).into_iter().enumerate() {
            if present {
                out[(i, c)] = 1.0;
            }
        }
    }
    out
}

/// Attributes for the `m_sel` most frequent terms, which are the first
/// `m_sel` vocabulary entries.
pub fn train_term_attributes_f(corpus: &Corpus, m_sel: usize, reg: f64) -> Result<TermAttributeModel> {
    let m = corpus.vocabulary().len();
    if m_sel > m {
        return Err(Error::RankTooLarge { requested: m_sel, max: m });
    }
    if m_sel == 0 {
        return Err(Error::BadParam("m_sel must be at least 1".into()));
    }
    let modalities = modality_names(corpus);
    let x = feature_view(corpus, &modalities)?;
    let selected: Vec<usize> = (0..m_sel).collect();
    let weights = fit_linear(&x, &label_matrix(corpus, &selected), reg)?;
    Ok(TermAttributeModel {
        modalities,
        selected_terms: selected,
        weights,
        cv_scores: Vec::new(),
    })
}

/// Two-fold split of one term's videos and the held-out scores of each fold.
#[derive(Debug, Clone, PartialEq)]
pub struct TermCrossValidation {
    pub term: usize,
    /// Video indices of each fold, ascending.
    pub folds: [Vec<usize>; 2],
    /// Scores of fold `f` from the scorer trained on the other fold.
    pub held_out_scores: [Vec<f64>; 2],
    pub fold_ap: [f64; 2],
}

impl TermCrossValidation {
    pub fn mean_ap(&self) -> f64 {
        0.5 * (self.fold_ap[0] + self.fold_ap[1])
    }
}

/// Stratified two-fold cross-validation of one term's linear scorer.
/// Positives and negatives are shuffled separately (seeded per term) and
/// dealt alternately to the folds.
pub fn cross_validate_term(corpus: &Corpus, term: usize, reg: f64, seed: u64) -> Result<TermCrossValidation> {
    let labels = corpus.term_matrix().term_labels(term);
    let n_pos = labels.iter().filter(|l| **l).count();
    if n_pos < 2 {
        return Err(Error::BadParam(format!("term {term} has {n_pos} positives, need 2")));
    }
    let x = feature_view(corpus, &modality_names(corpus))?;
    cross_validate(&x, &labels, corpus.video_ids(), term, reg, seed)
}

fn cross_validate(
    x: &DMatrix<f64>,
    labels: &[bool],
    ids: &[String],
    term: usize,
    reg: f64,
    seed: u64,
) -> Result<TermCrossValidation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(term as u64);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = [Vec::new(), Vec::new()];
    for (r, &i) in pos.iter().chain(&neg).enumerate() {
        let slot = if r < pos.len() { r } else { r - pos.len() };
        folds[slot % 2].push(i);
    }
    folds[0].sort_unstable();
    folds[1].sort_unstable();

    let mut held_out_scores = [Vec::new(), Vec::new()];
    let mut fold_ap = [0.0; 2];
    for f in 0..2 {
        let (fit_rows, eval_rows) = (&folds[1 - f], &folds[f]);
        let xf = x.select_rows(fit_rows);
        let yf = DMatrix::from_iterator(fit_rows.len(), 1, fit_rows.iter().map(|&i| if labels[i] { 1.0 } else { 0.0 }));
        let wb = fit_linear(&xf, &yf, reg)?;
        let d = x.ncols();
        let scores: Vec<f64> = eval_rows
            .iter()
            .map(|&i| (x.row(i) * wb.columns(0, d).transpose())[0] + wb[(0, d)])
            .collect();
        let eval_ids: Vec<String> = eval_rows.iter().map(|&i| ids[i].clone()).collect();
        let eval_labels: Vec<bool> = eval_rows.iter().map(|&i| labels[i]).collect();
        fold_ap[f] = average_precision("", &eval_ids, &scores, &eval_labels)?.ap;
        held_out_scores[f] = scores;
    }
    Ok(TermCrossValidation {
        term,
        folds,
        held_out_scores,
        fold_ap,
    })
}

/// Attributes for the `m_sel` terms with the best mean held-out AP under
/// stratified two-fold cross-validation. Terms with fewer than two
/// positives are not candidates. Selected scorers are refit on all videos.
pub fn train_term_attributes(corpus: &Corpus, m_sel: usize, reg: f64, seed: u64) -> Result<TermAttributeModel> {
    if m_sel == 0 {
        return Err(Error::BadParam("m_sel must be at least 1".into()));
    }
    let modalities = modality_names(corpus);
    let x = feature_view(corpus, &modalities)?;
    let y = corpus.term_matrix();
    let eligible: Vec<usize> = (0..y.n_terms())
        .filter(|&t| y.term_labels(t).iter().filter(|l| **l).count() >= 2)
        .collect();
    if eligible.len() < m_sel {
        return Err(Error::TooFewEligible {
            eligible: eligible.len(),
            requested: m_sel,
        });
    }
    let mut scored: Vec<(usize, f64)> = eligible
        .par_iter()
        .map(|&t| {
            let cv = cross_validate(&x, &y.term_labels(t), corpus.video_ids(), t, reg, seed)?;
            Ok((t, cv.mean_ap()))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(m_sel);
    let selected: Vec<usize> = scored.iter().map(|s| s.0).collect();
    let weights = fit_linear(&x, &label_matrix(corpus, &selected), reg)?;
    Ok(TermAttributeModel {
        modalities,
        selected_terms: selected,
        weights,
        cv_scores: scored.iter().map(|s| s.1).collect(),
    })
}

/// Both steps of the description embedding, before packaging as a model.
#[derive(Debug, Clone)]
pub struct TwoStep {
    pub a: DMatrix<f64>,
    pub w: Vec<DMatrix<f64>>,
    pub s: DMatrix<f64>,
    /// Descriptiveness loss after each alternating sweep of step 1.
    pub trace: Vec<f64>,
}

impl TwoStep {
    /// A training state positioned at this solution, for joint fine-tuning.
    pub fn to_state(&self, seed: u64) -> Result<TrainState> {
        TrainState::from_parts(self.a.clone(), self.w.clone(), self.s.clone(), seed)
    }
}

pub const TWO_STEP_MAX_ITERS: usize = 500;
pub const TWO_STEP_TOL: f64 = 1e-8;

/// Step 1 fits the embedding to the descriptions alone; step 2 regresses
/// it from every modality with ridge regression.
pub fn description_embedding_parts(corpus: &Corpus, hp: &Hyperparams) -> Result<TwoStep> {
    hp.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus has no videos".into()));
    }
    let (a, s, trace) = alternating_descriptive(corpus.term_matrix(), hp, TWO_STEP_MAX_ITERS, TWO_STEP_TOL)?;
    let w = corpus
        .features()
        .iter()
        .map(|f| closed_form_w(f.values(), &s, hp.lambda_w))
        .collect::<Result<Vec<_>>>()?;
    Ok(TwoStep { a, w, s, trace })
}

pub fn train_description_embedding(corpus: &Corpus, hp: &Hyperparams) -> Result<EmbeddingModel> {
    let parts = description_embedding_parts(corpus, hp)?;
    let state = parts.to_state(hp.seed)?;
    Ok(state.into_model(
        modality_names(corpus),
        vec![1.0; corpus.n_modalities()],
        hp,
        corpus.vocabulary().fingerprint(),
    ))
}

/// Text header (magic, sizes, modalities, selected terms, CV scores)
/// followed by the weights as little-endian f64, row-major.
pub fn write_attribute_model(path: &Path, model: &TermAttributeModel) -> Result<()> {
    let (rows, cols) = model.weights.shape();
    let idx: Vec<String> = model.selected_terms.iter().map(|t| t.to_string()).collect();
    let cv: Vec<String> = model.cv_scores.iter().map(|s| format!("{s:?}")).collect();
    let mut buf = format!(
        "{ATTRIBUTE_MAGIC}\n{rows} {cols}\n{}\n{}\n{}\n",
        model.modalities.join("\t"),
        idx.join(" "),
        if cv.is_empty() { "-".to_string() } else { cv.join(" ") }
    )
    .into_bytes();
    for r in 0..rows {
        for c in 0..cols {
            buf.extend_from_slice(&model.weights[(r, c)].to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_attribute_model(path: &Path) -> Result<TermAttributeModel> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| format_err(format!("{}: {m}", path.display()));
    let mut lines = Vec::with_capacity(5);
    let mut pos = 0;
    while lines.len() < 5 {
        let end = bytes[pos..].iter().position(|b| *b == b'\n').ok_or_else(|| bad("truncated header"))?;
        lines.push(std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not UTF-8"))?);
        pos += end + 1;
    }
    if lines[0] != ATTRIBUTE_MAGIC {
        return Err(bad("not a term-attribute model"));
    }
    let dims: Vec<usize> = lines[1]
        .split(' ')
        .map(|v| v.parse().map_err(|_| bad("bad sizes")))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else { return Err(bad("bad sizes")) };
    let modalities: Vec<String> = lines[2].split('\t').map(str::to_string).collect();
    let selected_terms: Vec<usize> = if lines[3].is_empty() {
        Vec::new()
    } else {
        lines[3].split(' ').map(|v| v.parse().map_err(|_| bad("bad term index"))).collect::<Result<_>>()?
    };
    let cv_scores: Vec<f64> = if lines[4] == "-" {
        Vec::new()
    } else {
        lines[4].split(' ').map(|v| v.parse().map_err(|_| bad("bad score"))).collect::<Result<_>>()?
    };
    if selected_terms.len() != rows || cols == 0 {
        return Err(bad("term count does not match the weight matrix"));
    }
    let body = &bytes[pos..];
    if body.len() != rows * cols * 8 {
        return Err(bad("weight block has the wrong length"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(TermAttributeModel {
        modalities,
        selected_terms,
        weights: DMatrix::from_row_slice(rows, cols, &values),
        cv_scores,
    })
}
