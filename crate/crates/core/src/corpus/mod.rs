//! Descriptions, vocabulary, binary term vectors and per-modality features.

mod io;

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{shape, Error, Result};

pub use io::{
    read_descriptions, read_features, read_term_matrix, read_vocabulary, write_descriptions,
    write_features, write_term_matrix, write_vocabulary,
};

/// Default vocabulary filter: terms seen in a single video are dropped.
pub const DEFAULT_MIN_OCCURRENCES: usize = 2;

/// One caption line: a video identifier and its free text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Description {
    pub video_id: String,
    pub text: String,
}

impl Description {
    pub fn new(video_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            video_id: video_id.into(),
            text: text.into(),
        }
    }
}

/// Lowercases and splits on every non-alphanumeric character.
///
/// The same rule is used for captions and event definitions so that both
/// land in one term space.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Ordered term list with per-term document counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermVocabulary {
    terms: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
}

impl TermVocabulary {
    pub fn new(terms: Vec<String>, counts: Vec<usize>) -> Result<Self> {
        if terms.len() != counts.len() {
            return Err(shape(format!(
                "{} terms but {} counts",
                terms.len(),
                counts.len()
            )));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if t.is_empty() || t.chars().any(|c| c.is_whitespace()) {
                return Err(Error::Format(format!("invalid term {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate term {t:?}")));
            }
        }
        Ok(Self {
            terms,
            counts,
            index,
        })
    }

    pub fn empty() -> Self {
        Self {
            terms: Vec::new(),
            counts: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// SHA-256 over the vocabulary file representation (`term\tcount\n`).
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for (t, c) in self.terms.iter().zip(&self.counts) {
            hasher.update(t.as_bytes());
            hasher.update(b"\t");
            hasher.update(c.to_string().as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().into()
    }

    /// Sorted, deduplicated vocabulary indices of the in-vocabulary tokens of `text`.
    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        let mut idx: Vec<u32> = tokenize(text)
            .iter()
            .filter_map(|t| self.get(t).map(|i| i as u32))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

/// Counts each term once per video and keeps those seen in at least
/// `min_occurrences` videos. Order: descending count, then lexicographic.
pub fn build_vocabulary(
    descriptions: &[Description],
    min_occurrences: usize,
) -> Result<TermVocabulary> {
    if descriptions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_occurrences == 0 {
        return Err(Error::BadParam("min_occurrences must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for d in descriptions {
        let unique: HashSet<String> = tokenize(&d.text).into_iter().collect();
        for t in unique {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_occurrences)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let (terms, counts) = kept.into_iter().unzip();
    TermVocabulary::new(terms, counts)
}

/// Sparse binary M x N matrix stored as one sorted index list per video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermMatrix {
    n_terms: usize,
    columns: Vec<Vec<u32>>,
}

impl TermMatrix {
    pub fn new(n_terms: usize, columns: Vec<Vec<u32>>) -> Result<Self> {
        for (i, col) in columns.iter().enumerate() {
            if col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!(
                    "term indices of video {i} are not strictly ascending"
                )));
            }
            if let Some(&last) = col.last() {
                if last as usize >= n_terms {
                    return Err(Error::Format(format!(
                        "term index {last} out of range for {n_terms} terms"
                    )));
                }
            }
        }
        Ok(Self { n_terms, columns })
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_videos(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[u32] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.columns
    }

    pub fn column_dense(&self, i: usize) -> DVector<f64> {
        let mut y = DVector::zeros(self.n_terms);
        for &j in &self.columns[i] {
            y[j as usize] = 1.0;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.n_terms, self.columns.len());
        for (i, col) in self.columns.iter().enumerate() {
            for &j in col {
                y[(j as usize, i)] = 1.0;
            }
        }
        y
    }

    /// Binary presence of term `term` in every video.
    pub fn term_labels(&self, term: usize) -> Vec<bool> {
        self.columns
            .iter()
            .map(|c| c.binary_search(&(term as u32)).is_ok())
            .collect()
    }

    pub fn select(&self, videos: &[usize]) -> Self {
        Self {
            n_terms: self.n_terms,
            columns: videos.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }
}

/// Encodes every description as a binary term vector over `vocab`.
/// Out-of-vocabulary tokens are ignored; repeated video ids are rejected.
pub fn encode_term_matrix(descriptions: &[Description], vocab: &TermVocabulary) -> Result<TermMatrix> {
    let mut seen = HashSet::with_capacity(descriptions.len());
    for d in descriptions {
        if !seen.insert(d.video_id.as_str()) {
            return Err(Error::IdMismatch(format!(
                "video id {:?} appears twice",
                d.video_id
            )));
        }
    }
    let columns = descriptions.iter().map(|d| vocab.encode_text(&d.text)).collect();
    TermMatrix::new(vocab.len(), columns)
}

/// Dense features of one modality, one row per video.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    name: String,
    values: DMatrix<f64>,
    video_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(name: impl Into<String>, values: DMatrix<f64>, video_ids: Vec<String>) -> Result<Self> {
        let name = name.into();
        if values.nrows() != video_ids.len() {
            return Err(shape(format!(
                "modality {name}: {} rows but {} video ids",
                values.nrows(),
                video_ids.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "modality {name}: entry {pos} (column-major) is not finite"
            )));
        }
        let mut seen = HashSet::with_capacity(video_ids.len());
        for id in &video_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::IdMismatch(format!(
                    "modality {name}: duplicate video id {id:?}"
                )));
            }
        }
        Ok(Self {
            name,
            values,
            video_ids,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Feature dimensionality D.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            values: self.values.select_rows(rows),
            video_ids: rows.iter().map(|&i| self.video_ids[i].clone()).collect(),
        }
    }

    /// Reorders rows to follow `ids`; a missing id is an error.
    pub fn reorder(&self, ids: &[String]) -> Result<Self> {
        let pos: HashMap<&str, usize> = self
            .video_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                pos.get(id.as_str()).copied().ok_or_else(|| {
                    Error::IdMismatch(format!("modality {}: no feature row for video {id:?}", self.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&rows))
    }

    /// Column-wise concatenation of modalities sharing one video ordering.
    pub fn concat(parts: &[FeatureMatrix], name: impl Into<String>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("no modalities to concatenate".into()))?;
        let n = first.len();
        for p in parts {
            if p.video_ids != first.video_ids {
                return Err(Error::IdMismatch(format!(
                    "modality {} is not aligned with {}",
                    p.name, first.name
                )));
            }
        }
        let d: usize = parts.iter().map(|p| p.dim()).sum();
        let mut values = DMatrix::zeros(n, d);
        let mut offset = 0;
        for p in parts {
            values.columns_mut(offset, p.dim()).copy_from(&p.values);
            offset += p.dim();
        }
        Self::new(name, values, first.video_ids.clone())
    }
}

/// Aligned videos: term vectors plus J >= 1 feature modalities.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocabulary: TermVocabulary,
    term_matrix: TermMatrix,
    features: Vec<FeatureMatrix>,
    video_ids: Vec<String>,
}

impl Corpus {
    pub fn new(
        vocabulary: TermVocabulary,
        term_matrix: TermMatrix,
        video_ids: Vec<String>,
        features: Vec<FeatureMatrix>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("a corpus needs at least one modality".into()));
        }
        if term_matrix.n_terms() != vocabulary.len() {
            return Err(shape(format!(
                "term matrix has {} rows, vocabulary has {} terms",
                term_matrix.n_terms(),
                vocabulary.len()
            )));
        }
        if term_matrix.n_videos() != video_ids.len() {
            return Err(shape(format!(
                "term matrix has {} videos, {} ids given",
                term_matrix.n_videos(),
                video_ids.len()
            )));
        }
        let mut names = HashSet::new();
        for f in &features {
            if !names.insert(f.name()) {
                return Err(Error::Format(format!("modality {} listed twice", f.name())));
            }
            if f.video_ids() != video_ids.as_slice() {
                return Err(Error::IdMismatch(format!(
                    "modality {} does not follow the corpus video order",
                    f.name()
                )));
            }
        }
        Ok(Self {
            vocabulary,
            term_matrix,
            features,
            video_ids,
        })
    }

    /// Encodes `descriptions` and aligns every modality to their order.
    pub fn assemble(
        descriptions: &[Description],
        vocabulary: TermVocabulary,
        features: Vec<FeatureMatrix>,
    ) -> Result<Self> {
        let term_matrix = encode_term_matrix(descriptions, &vocabulary)?;
        let ids: Vec<String> = descriptions.iter().map(|d| d.video_id.clone()).collect();
        let features = features
            .iter()
            .map(|f| f.reorder(&ids))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vocabulary, term_matrix, ids, features)
    }

    pub fn vocabulary(&self) -> &TermVocabulary {
        &self.vocabulary
    }

    pub fn term_matrix(&self) -> &TermMatrix {
        &self.term_matrix
    }

    pub fn features(&self) -> &[FeatureMatrix] {
        &self.features
    }

    pub fn modality(&self, j: usize) -> &FeatureMatrix {
        &self.features[j]
    }

    pub fn modality_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name() == name)
    }

    pub fn n_modalities(&self) -> usize {
        self.features.len()
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn len(&self) -> usize {
        self.video_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.video_ids.is_empty()
    }

    pub fn select(&self, videos: &[usize]) -> Self {
        Self {
            vocabulary: self.vocabulary.clone(),
            term_matrix: self.term_matrix.select(videos),
            features: self.features.iter().map(|f| f.select(videos)).collect(),
            video_ids: videos.iter().map(|&i| self.video_ids[i].clone()).collect(),
        }
    }

    /// Same videos and terms, different modality set.
    pub fn with_features(&self, features: Vec<FeatureMatrix>) -> Result<Self> {
        Self::new(
            self.vocabulary.clone(),
            self.term_matrix.clone(),
            self.video_ids.clone(),
            features,
        )
    }

    /// Single-modality view of modality `j`.
    pub fn single_modality(&self, j: usize) -> Result<Self> {
        let f = self
            .features
            .get(j)
            .ok_or_else(|| shape(format!("modality {j} out of range")))?;
        self.with_features(vec![f.clone()])
    }
}

/// Seeded shuffle, then the first `ceil(train_fraction * N)` videos go to
/// the training half. Each half keeps the original corpus order.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::TooFewVideos(n));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadParam(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut val: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((corpus.select(&train), corpus.select(&val)))
}
