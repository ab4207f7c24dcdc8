//! Zero-example recognition: term-sensitive training driven by an event's
//! textual definition, event queries, and cosine ranking of test videos.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::corpus::{Corpus, TermVocabulary};
use crate::embedding::{
    run_epochs, EmbeddingModel, GradientRule, Hyperparams, SampleGradients, TrainState,
    TrainingData,
};
use crate::error::{format_err, shape, Error, Result};
use crate::fusion::{check_fused_sample, check_gammas, latent_sum, modality_terms, MultimodalModel};
use crate::textfmt::sig9;

pub const DEFAULT_ALPHA: f64 = 0.75;

/// An event's name and free-text definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDefinition {
    pub event_id: String,
    pub title: String,
    pub definition: String,
}

impl EventDefinition {
    pub fn new(
        event_id: impl Into<String>,
        title: impl Into<String>,
        definition: impl Into<String>,
    ) -> Result<Self> {
        let e = Self {
            event_id: event_id.into(),
            title: title.into(),
            definition: definition.into(),
        };
        if e.event_id.trim().is_empty() {
            return Err(Error::BadParam("event id must not be empty".into()));
        }
        if e.title.trim().is_empty() && e.definition.trim().is_empty() {
            return Err(Error::BadParam(format!("event {} has neither title nor definition", e.event_id)));
        }
        Ok(e)
    }

    /// Title and definition, concatenated.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.title, self.definition)
    }

    /// Sorted vocabulary indices of the terms mentioned by the event.
    pub fn vocabulary_terms(&self, vocab: &TermVocabulary) -> Vec<usize> {
        vocab.encode_text(&self.text()).into_iter().map(|i| i as usize).collect()
    }
}

/// First line `<event_id>\t<title>`, remaining lines the definition.
pub fn read_event(path: &Path) -> Result<EventDefinition> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| format_err(format!("{}: empty event file", path.display())))?;
    let (id, title) = first.split_once('\t').unwrap_or((first, ""));
    let definition: Vec<&str> = lines.collect();
    EventDefinition::new(id.trim(), title, definition.join("\n"))
}

pub fn write_event(path: &Path, event: &EventDefinition) -> Result<()> {
    fs::write(path, format!("{}\t{}\n{}\n", event.event_id, event.title, event.definition))?;
    Ok(())
}

/// Reads one event file, or every regular file of a directory in name order.
pub fn read_events(path: &Path) -> Result<Vec<EventDefinition>> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()?;
        files.retain(|p| p.is_file());
        files.sort();
        files.iter().map(|p| read_event(p)).collect()
    } else {
        Ok(vec![read_event(path)?])
    }
}

/// Diagonal term weights: `alpha` for terms in the event text, `1 - alpha`
/// for the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMatrix {
    pub event_id: String,
    pub alpha: f64,
    weights: DVector<f64>,
    matched: usize,
}

impl ImportanceMatrix {
    /// Arbitrary non-negative diagonal.
    pub fn from_weights(event_id: impl Into<String>, alpha: f64, weights: DVector<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::BadWeight(format!("importance weight {w} is negative or not finite")));
        }
        Ok(Self {
            event_id: event_id.into(),
            alpha,
            weights,
            matched: 0,
        })
    }

    /// Every term weighted `w`.
    pub fn uniform(event_id: impl Into<String>, n_terms: usize, w: f64) -> Result<Self> {
        Self::from_weights(event_id, w, DVector::from_element(n_terms, w))
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Number of vocabulary terms found in the event text.
    pub fn matched_terms(&self) -> usize {
        self.matched
    }

    pub fn is_empty_query(&self) -> bool {
        self.matched == 0
    }
}

/// Builds the per-event importance diagonal. An event without any
/// vocabulary term still yields a valid (uniform `1 - alpha`) matrix;
/// callers can check [`ImportanceMatrix::is_empty_query`] to warn.
pub fn build_importance(
    event: &EventDefinition,
    vocab: &TermVocabulary,
    alpha: f64,
) -> Result<ImportanceMatrix> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    let present = event.vocabulary_terms(vocab);
    let mut weights = DVector::from_element(vocab.len(), 1.0 - alpha);
    for &j in &present {
        weights[j] = alpha;
    }
    Ok(ImportanceMatrix {
        event_id: event.event_id.clone(),
        alpha,
        weights,
        matched: present.len(),
    })
}

fn check_weights(h: &DVector<f64>) -> Result<()> {
    match h.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        Some(w) => Err(Error::BadWeight(format!("importance weight {w} is negative or not finite"))),
        None => Ok(()),
    }
}

/// `1/2 sum_i ||H^{1/2}(y_i - A s_i)||^2 + lambda_a/2 ||A||_F^2 + lambda_s/2 ||S||_F^2`
/// with `H = diag(h)`.
pub fn term_sensitive_loss(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    h: &DVector<f64>,
    lambda_a: f64,
    lambda_s: f64,
) -> Result<f64> {
    check_weights(h)?;
    let (m, k) = a.shape();
    let n = y.ncols();
    if s.shape() != (k, n) || y.nrows() != m || h.len() != m {
        return Err(shape(format!(
            "term-sensitive loss: A {m}x{k}, S {}x{}, Y {}x{n}, |h| = {}",
            s.nrows(),
            s.ncols(),
            y.nrows(),
            h.len()
        )));
    }
    let recon = y - a * s;
    let mut sum = 0.0;
    for c in 0..n {
        for r in 0..m {
            let v = recon[(r, c)];
            sum += h[r] * (v * v);
        }
    }
    Ok(0.5 * sum + lambda_a * 0.5 * a.norm_squared() + lambda_s * 0.5 * s.norm_squared())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn ts_gradients(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    y_t: &DVector<f64>,
    h: &DVector<f64>,
    hp: &Hyperparams,
    gammas: &[f64],
) -> SampleGradients {
    let r = y_t - a * s_t;
    let hr = r.component_mul(h);
    let (grad_w, resid_sum) = modality_terms(projections, s_t, xs, hp, gammas);
    let grad_a = -(&hr * s_t.transpose()) + a * hp.lambda_a;
    let grad_s = -(a.transpose() * &hr) + resid_sum + s_t * hp.lambda_s;
    SampleGradients {
        a: grad_a,
        w: grad_w,
        s: grad_s,
    }
}

/// Per-sample gradients of the term-sensitive descriptiveness loss plus the
/// multimodal predictability loss, with `H = diag(h)`:
///
/// ```text
/// dA = -H (y - A s) s^T + lambda_a A
/// ds = -A^T H (y - A s) + sum_j gamma_j (s - W^jT x^j) + lambda_s s
/// ```
#[allow(clippy::too_many_arguments)]
pub fn sample_gradients_ts(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    y_t: &DVector<f64>,
    h: &DVector<f64>,
    hp: &Hyperparams,
    gammas: &[f64],
) -> Result<SampleGradients> {
    check_fused_sample(a, projections, s_t, xs, y_t, gammas)?;
    check_weights(h)?;
    if h.len() != a.nrows() {
        return Err(shape(format!("{} importance weights for {} terms", h.len(), a.nrows())));
    }
    Ok(ts_gradients(a, projections, s_t, xs, y_t, h, hp, gammas))
}

/// The single-sample objective matching `sample_gradients_ts`.
#[allow(clippy::too_many_arguments)]
pub fn ts_sample_objective(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s_t: &DVector<f64>,
    xs: &[DVector<f64>],
    y_t: &DVector<f64>,
    h: &DVector<f64>,
    hp: &Hyperparams,
    gammas: &[f64],
) -> f64 {
    let r = y_t - a * s_t;
    let weighted: f64 = r.iter().zip(h.iter()).map(|(v, w)| w * v * v).sum();
    let mut total = 0.5 * weighted
        + hp.lambda_a * 0.5 * a.norm_squared()
        + hp.lambda_s * 0.5 * s_t.norm_squared();
    for ((w, x), &g) in projections.iter().zip(xs).zip(gammas) {
        let e = s_t - w.transpose() * x;
        total += g * (0.5 * e.norm_squared() + hp.lambda_w * 0.5 * w.norm_squared());
    }
    total
}

/// Trains over every modality of `corpus` with the term-sensitive loss for
/// the given importance diagonal.
pub fn train_term_sensitive(
    corpus: &Corpus,
    hp: &Hyperparams,
    importance: &ImportanceMatrix,
    gammas: &[f64],
) -> Result<MultimodalModel> {
    hp.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus has no videos".into()));
    }
    check_gammas(gammas, corpus.n_modalities())?;
    let h = importance.weights();
    if h.len() != corpus.vocabulary().len() {
        return Err(shape(format!(
            "{} importance weights for {} terms",
            h.len(),
            corpus.vocabulary().len()
        )));
    }
    let modalities: Vec<usize> = (0..corpus.n_modalities()).collect();
    let data = TrainingData::new(corpus, &modalities);
    let mut state = TrainState::initialize(corpus.term_matrix(), &data.dims(), hp)?;
    run_epochs(
        &mut state,
        &data,
        &GradientRule::TermSensitive { weights: h, gammas },
        hp,
        hp.epochs,
    )?;
    let names = corpus.features().iter().map(|f| f.name().to_string()).collect();
    let mut hp = hp.clone();
    hp.alpha = importance.alpha;
    Ok(state.into_model(names, gammas.to_vec(), &hp, corpus.vocabulary().fingerprint()))
}

/// One event-specific model. A single-modality corpus gives the unimodal
/// zero-example embedding, several modalities give the fused one.
pub fn train_zero(
    corpus: &Corpus,
    hp: &Hyperparams,
    event: &EventDefinition,
    gammas: &[f64],
) -> Result<(MultimodalModel, ImportanceMatrix)> {
    let importance = build_importance(event, corpus.vocabulary(), hp.alpha)?;
    let model = train_term_sensitive(corpus, hp, &importance, gammas)?;
    Ok((model, importance))
}

/// Binary vector of the vocabulary terms found in an event's text.
#[derive(Debug, Clone, PartialEq)]
pub struct EventQuery {
    pub event_id: String,
    pub terms: DVector<f64>,
}

pub fn build_event_query(event: &EventDefinition, vocab: &TermVocabulary) -> Result<EventQuery> {
    let present = event.vocabulary_terms(vocab);
    if present.is_empty() {
        return Err(Error::EmptyQuery(event.event_id.clone()));
    }
    let mut terms = DVector::zeros(vocab.len());
    for j in present {
        terms[j] = 1.0;
    }
    Ok(EventQuery {
        event_id: event.event_id.clone(),
        terms,
    })
}

/// Cosine similarity; a zero vector on either side scores 0.
pub fn cosine(query: &DVector<f64>, predicted: &DVector<f64>) -> f64 {
    let nq = query.norm();
    let np = predicted.norm();
    if nq == 0.0 || np == 0.0 {
        return 0.0;
    }
    (query.dot(predicted) / (nq * np)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedVideo {
    pub video_id: String,
    pub score: f64,
}

/// Videos by descending score, ties by ascending video id.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub event_id: String,
    pub entries: Vec<RankedVideo>,
}

impl Ranking {
    pub fn from_scores(event_id: impl Into<String>, scores: Vec<(String, f64)>) -> Self {
        let mut entries: Vec<RankedVideo> = scores
            .into_iter()
            .map(|(video_id, score)| RankedVideo { video_id, score })
            .collect();
        entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.video_id.cmp(&b.video_id)));
        Self {
            event_id: event_id.into(),
            entries,
        }
    }
}

/// Predicted term vectors of every video in `corpus`, as columns (M x N).
pub fn predict_corpus_terms(model: &EmbeddingModel, corpus: &Corpus) -> Result<DMatrix<f64>> {
    model.check_vocabulary(corpus)?;
    let map = model.modality_map(corpus)?;
    let columns: Vec<DVector<f64>> = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let xs: Vec<DVector<f64>> = map.iter().map(|&j| corpus.modality(j).row(i)).collect();
            Ok(&model.textual * latent_sum(model, &xs)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = DMatrix::zeros(model.n_terms(), corpus.len());
    for (i, c) in columns.iter().enumerate() {
        out.set_column(i, c);
    }
    Ok(out)
}

/// Scores every video by the cosine between its predicted term vector
/// `A sum_j gamma_j W^jT x^j` and the event query.
pub fn cosine_rank(model: &EmbeddingModel, query: &EventQuery, corpus: &Corpus) -> Result<Ranking> {
    if query.terms.iter().all(|v| *v == 0.0) {
        return Err(Error::EmptyQuery(query.event_id.clone()));
    }
    if query.terms.len() != model.n_terms() {
        return Err(shape("query length differs from the vocabulary size"));
    }
    let predicted = predict_corpus_terms(model, corpus)?;
    let scores: Vec<(String, f64)> = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let y_hat = predicted.column(i).clone_owned();
            (corpus.video_ids()[i].clone(), cosine(&query.terms, &y_hat))
        })
        .collect();
    Ok(Ranking::from_scores(query.event_id.clone(), scores))
}

/// Mean over `terms` of the per-term squared error between predicted and
/// true term vectors, averaged over the videos of `corpus`.
pub fn term_reconstruction_error(model: &EmbeddingModel, corpus: &Corpus, terms: &[usize]) -> Result<f64> {
    if terms.is_empty() || corpus.is_empty() {
        return Err(Error::Empty("need at least one term and one video".into()));
    }
    let predicted = predict_corpus_terms(model, corpus)?;
    let y = corpus.term_matrix();
    let mut total = 0.0;
    for &j in terms {
        let labels = y.term_labels(j);
        let mut err = 0.0;
        for (i, &present) in labels.iter().enumerate() {
            let d = predicted[(j, i)] - if present { 1.0 } else { 0.0 };
            err += d * d;
        }
        total += err / corpus.len() as f64;
    }
    Ok(total / terms.len() as f64)
}

/// `rank\tvideo_id\tscore` lines, rank from 1, scores at nine significant digits.
pub fn write_ranking(path: &Path, ranking: &Ranking) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (r, e) in ranking.entries.iter().enumerate() {
        writeln!(w, "{}\t{}\t{}", r + 1, e.video_id, sig9(e.score))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ranking(path: &Path, event_id: &str) -> Result<Ranking> {
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(format_err(format!("{}:{}: expected rank, video id, score", path.display(), n + 1)));
        }
        let score: f64 = parts[2]
            .parse()
            .map_err(|_| format_err(format!("{}:{}: bad score", path.display(), n + 1)))?;
        entries.push(RankedVideo {
            video_id: parts[1].to_string(),
            score,
        });
    }
    Ok(Ranking {
        event_id: event_id.to_string(),
        entries,
    })
}
