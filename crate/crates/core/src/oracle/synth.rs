use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{build_vocabulary, Corpus, Description, FeatureMatrix};
use crate::error::{Error, Result};
use crate::eval::EventLabels;
use crate::zeroshot::EventDefinition;

/// Parameters of the planted-topic generator.
///
/// Every term belongs to one of `k_true` latent topics (term `j` to topic
/// `j % k_true`). Topics `0..n_events` are event topics, switched on only
/// for that event's positive videos; the remaining topics are background
/// topics, each switched on independently with probability `topic_rate`.
/// A video's description lists the terms whose topic is on, so the term
/// matrix has rank `k_true` exactly unless `term_noise` flips entries. Each
/// modality observes the latent
/// topics through a random linear map plus Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub m: usize,
    /// Feature dimensionality per modality.
    pub dims: Vec<usize>,
    pub k_true: usize,
    pub noise_sigma: f64,
    /// Term `j` is present when `(A* s*)_j` exceeds this value.
    pub term_threshold: f64,
    /// Probability that a term's presence in a description is flipped.
    pub term_noise: f64,
    pub n_events: usize,
    pub positives_per_event: usize,
    pub topic_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 500,
            m: 60,
            dims: vec![16],
            k_true: 10,
            noise_sigma: 0.05,
            term_threshold: 0.5,
            term_noise: 0.0,
            n_events: 5,
            positives_per_event: 10,
            topic_rate: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadSpec(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.dims.is_empty() {
            return bad("at least one modality is required".into());
        }
        if self.k_true == 0 {
            return bad("k_true must be at least 1".into());
        }
        let min_d = *self.dims.iter().min().expect("non-empty");
        if self.k_true > self.m.min(min_d) {
            return bad(format!(
                "k_true = {} exceeds min(M, D) = {}",
                self.k_true,
                self.m.min(min_d)
            ));
        }
        if self.n_events >= self.k_true {
            return bad(format!(
                "n_events = {} leaves no background topic (k_true = {})",
                self.n_events, self.k_true
            ));
        }
        if self.positives_per_event == 0 {
            return bad("positives_per_event must be at least 1".into());
        }
        if self.n_events * self.positives_per_event > self.n {
            return bad("more event positives than videos".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.term_threshold) {
            return bad(format!("term_threshold must lie in [0, 1), got {}", self.term_threshold));
        }
        if !(0.0..0.5).contains(&self.term_noise) {
            return bad(format!("term_noise must lie in [0, 0.5), got {}", self.term_noise));
        }
        if !(self.topic_rate > 0.0 && self.topic_rate <= 1.0) {
            return bad(format!("topic_rate must lie in (0, 1], got {}", self.topic_rate));
        }
        Ok(())
    }

    /// Modality names used by the generator: `m0`, `m1`, ...
    pub fn modality_names(&self) -> Vec<String> {
        (0..self.dims.len()).map(|j| format!("m{j}")).collect()
    }
}

/// Generated corpus plus the planted ground truth.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub corpus: Corpus,
    pub descriptions: Vec<Description>,
    pub events: Vec<EventDefinition>,
    pub labels: Vec<EventLabels>,
    /// Topic of each vocabulary term, in vocabulary order.
    pub term_topics: Vec<usize>,
    /// Binary topic activations, k_true x N.
    pub latent: DMatrix<f64>,
}

impl SynthCorpus {
    /// Vocabulary indices of the terms planted for event `e`.
    pub fn event_terms(&self, e: usize) -> Vec<usize> {
        (0..self.term_topics.len()).filter(|&j| self.term_topics[j] == e).collect()
    }

    /// Positive rate `P / N` of each event, i.e. the expected AP of a random ranking.
    pub fn chance_levels(&self) -> Vec<f64> {
        self.labels
            .iter()
            .map(|l| l.positives.len() as f64 / self.corpus.len() as f64)
            .collect()
    }
}

fn term_names(rng: &mut ChaCha8Rng, m: usize) -> Vec<String> {
    const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let mut seen = HashSet::new();
    let mut names = Vec::with_capacity(m);
    while names.len() < m {
        let mut name = String::new();
        for _ in 0..3 {
            name.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
            name.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        }
        if seen.insert(name.clone()) {
            names.push(name);
        }
    }
    names
}

/// Draws a corpus from `spec`. The output depends only on `spec`.
pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, k) = (spec.n, spec.k_true);
    let names = term_names(&mut rng, spec.m);
    let topic_of = |j: usize| j % k;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut event_of = vec![None; n];
    for e in 0..spec.n_events {
        for &i in &order[e * spec.positives_per_event..(e + 1) * spec.positives_per_event] {
            event_of[i] = Some(e);
        }
    }

    let background: Vec<usize> = (spec.n_events..k).collect();
    let mut latent = DMatrix::zeros(k, n);
    for i in 0..n {
        if let Some(e) = event_of[i] {
            latent[(e, i)] = 1.0;
        }
        let mut any = false;
        for &b in &background {
            if rng.random_bool(spec.topic_rate) {
                latent[(b, i)] = 1.0;
                any = true;
            }
        }
        if !any {
            let b = background[rng.random_range(0..background.len())];
            latent[(b, i)] = 1.0;
        }
    }
    for (slot, &b) in background.iter().enumerate() {
        if latent.row(b).iter().all(|v| *v == 0.0) {
            latent[(b, slot % n)] = 1.0;
        }
    }

    let width = (n - 1).to_string().len();
    let ids: Vec<String> = (0..n).map(|i| format!("v{i:0width$}")).collect();
    let descriptions: Vec<Description> = (0..n)
        .map(|i| {
            let clean: Vec<bool> = (0..spec.m).map(|j| latent[(topic_of(j), i)] > spec.term_threshold).collect();
            let mut present = clean.clone();
            if spec.term_noise > 0.0 {
                for p in present.iter_mut() {
                    *p ^= rng.random_bool(spec.term_noise);
                }
                if !present.contains(&true) {
                    present = clean;
                }
            }
            let words: Vec<&str> = (0..spec.m).filter(|&j| present[j]).map(|j| names[j].as_str()).collect();
            Description::new(ids[i].clone(), words.join(" "))
        })
        .collect();

    let features = spec
        .dims
        .iter()
        .zip(spec.modality_names())
        .map(|(&d, name)| {
            let mix = Normal::new(0.0, 1.0 / (k as f64).sqrt()).expect("valid normal");
            let b = DMatrix::from_fn(d, k, |_, _| mix.sample(&mut rng));
            let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid normal");
            let clean = (&b * &latent).transpose();
            let x = DMatrix::from_fn(n, d, |i, c| {
                let eps = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                // Stored at the precision of the feature file format.
                (clean[(i, c)] + eps) as f32 as f64
            });
            FeatureMatrix::new(name, x, ids.clone())
        })
        .collect::<Result<Vec<_>>>()?;

    let vocab = build_vocabulary(&descriptions, 1)?;
    let corpus = Corpus::assemble(&descriptions, vocab.clone(), features)?;
    let term_topics: Vec<usize> = vocab
        .terms()
        .iter()
        .map(|t| topic_of(names.iter().position(|x| x == t).expect("term drawn by the generator")))
        .collect();

    let mut events = Vec::with_capacity(spec.n_events);
    let mut labels = Vec::with_capacity(spec.n_events);
    for e in 0..spec.n_events {
        let id = format!("E{:02}", e + 1);
        let words: Vec<&str> = (0..spec.m).filter(|&j| topic_of(j) == e).map(|j| names[j].as_str()).collect();
        events.push(EventDefinition::new(id.clone(), format!("planted event {}", e + 1), words.join(" "))?);
        let mut positives: Vec<String> = (0..n).filter(|&i| event_of[i] == Some(e)).map(|i| ids[i].clone()).collect();
        positives.sort();
        labels.push(EventLabels { event_id: id, positives });
    }

    Ok(SynthCorpus {
        spec: spec.clone(),
        corpus,
        descriptions,
        events,
        labels,
        term_topics,
        latent,
    })
}

/// `key = value` record of the generating spec and the resulting sizes.
pub fn write_manifest(path: &Path, synth: &SynthCorpus) -> Result<()> {
    let s = &synth.spec;
    let dims: Vec<String> = s.dims.iter().map(|d| d.to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "n = {}", s.n);
    let _ = writeln!(out, "m = {}", s.m);
    let _ = writeln!(out, "dims = {}", dims.join(","));
    let _ = writeln!(out, "k_true = {}", s.k_true);
    let _ = writeln!(out, "noise_sigma = {}", crate::textfmt::sig9(s.noise_sigma));
    let _ = writeln!(out, "term_threshold = {}", crate::textfmt::sig9(s.term_threshold));
    let _ = writeln!(out, "term_noise = {}", crate::textfmt::sig9(s.term_noise));
    let _ = writeln!(out, "n_events = {}", s.n_events);
    let _ = writeln!(out, "positives_per_event = {}", s.positives_per_event);
    let _ = writeln!(out, "topic_rate = {}", crate::textfmt::sig9(s.topic_rate));
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "vocabulary_size = {}", synth.corpus.vocabulary().len());
    for (l, c) in synth.labels.iter().zip(synth.chance_levels()) {
        let _ = writeln!(out, "chance.{} = {}", l.event_id, crate::textfmt::sig9(c));
    }
    fs::write(path, out)?;
    Ok(())
}
