use nalgebra::DMatrix;
use rayon::prelude::*;

use super::kernel::KernelSystem;
use super::{average_precision, mean_average_precision, APResult, EventLabels};
use crate::baselines::{
    train_description_embedding, train_term_attributes, train_term_attributes_f, TermAttributeModel,
};
use crate::corpus::{Corpus, FeatureMatrix};
use crate::embedding::{sgd_train, EmbeddingModel, Hyperparams};
use crate::error::{Error, Result};
use crate::fusion::{embed_fused, sgd_train_fused};

/// How videos are represented before classification.
#[derive(Debug, Clone, PartialEq)]
pub enum RepresentationSpec {
    RawFeatures,
    VideoStory { hp: Hyperparams },
    /// Cross-validated term attributes.
    TermAttributes { m_sel: usize, reg: f64, seed: u64 },
    /// Most frequent term attributes.
    TermAttributesF { m_sel: usize, reg: f64 },
    DescriptionEmbedding { hp: Hyperparams },
}

/// How several modalities are combined.
///
/// `Early` concatenates features before the representation; `Late` averages
/// per-modality classifier scores; `VsEarly` learns one representation on
/// concatenated features; `VsLate` concatenates per-modality
/// representations; `VsJoint` learns one representation from all
/// modalities at once. Representations that have no joint form (raw
/// features, term attributes) fall back to early fusion under `VsJoint`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionStrategy {
    Early,
    Late,
    VsEarly,
    VsLate,
    VsJoint,
}

impl std::str::FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "early" => Self::Early,
            "late" => Self::Late,
            "vs-early" => Self::VsEarly,
            "vs-late" => Self::VsLate,
            "vs-joint" => Self::VsJoint,
            other => return Err(Error::BadParam(format!("unknown fusion strategy {other:?}"))),
        })
    }
}

impl std::fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Self::Early => "early",
            Self::Late => "late",
            Self::VsEarly => "vs-early",
            Self::VsLate => "vs-late",
            Self::VsJoint => "vs-joint",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierParams {
    pub reg: f64,
    pub rbf_gamma: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self { reg: 1.0, rbf_gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HarnessConfig {
    pub classifier: ClassifierParams,
    /// Keep only the first `n` positives (in corpus order) of each event
    /// for training; the others are left out rather than used as negatives.
    pub max_positives: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessReport {
    pub results: Vec<APResult>,
    pub map: f64,
}

enum Representer {
    Raw,
    Model(EmbeddingModel),
    Attributes(TermAttributeModel),
}

impl Representer {
    fn fit(spec: &RepresentationSpec, learn: &Corpus) -> Result<Self> {
        let joint_gammas = vec![1.0; learn.n_modalities()];
        Ok(match spec {
            RepresentationSpec::RawFeatures => Self::Raw,
            RepresentationSpec::VideoStory { hp } if learn.n_modalities() == 1 => {
                Self::Model(sgd_train(learn, hp, 0)?)
            }
            RepresentationSpec::VideoStory { hp } => Self::Model(sgd_train_fused(learn, hp, &joint_gammas)?),
            RepresentationSpec::DescriptionEmbedding { hp } => {
                Self::Model(train_description_embedding(learn, hp)?)
            }
            RepresentationSpec::TermAttributes { m_sel, reg, seed } => {
                Self::Attributes(train_term_attributes(learn, *m_sel, *reg, *seed)?)
            }
            RepresentationSpec::TermAttributesF { m_sel, reg } => {
                Self::Attributes(train_term_attributes_f(learn, *m_sel, *reg)?)
            }
        })
    }

    /// N x F representation of `corpus`.
    fn apply(&self, corpus: &Corpus) -> Result<DMatrix<f64>> {
        match self {
            Self::Raw => Ok(concat_features(corpus)?.values().clone()),
            Self::Model(model) => {
                let map = model.modality_map(corpus)?;
                let rows = (0..corpus.len())
                    .map(|i| {
                        let xs: Vec<_> = map.iter().map(|&j| corpus.modality(j).row(i)).collect();
                        embed_fused(model, &xs)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let width = model.k() * model.n_modalities();
                Ok(DMatrix::from_fn(corpus.len(), width, |i, c| rows[i][c]))
            }
            Self::Attributes(model) => model.represent(corpus),
        }
    }

    /// Whether `spec` can learn from several modalities jointly.
    fn has_joint_form(spec: &RepresentationSpec) -> bool {
        matches!(
            spec,
            RepresentationSpec::VideoStory { .. } | RepresentationSpec::DescriptionEmbedding { .. }
        )
    }
}

fn concat_features(corpus: &Corpus) -> Result<FeatureMatrix> {
    if corpus.n_modalities() == 1 {
        return Ok(corpus.modality(0).clone());
    }
    FeatureMatrix::concat(corpus.features(), "early")
}

fn early_view(corpus: &Corpus) -> Result<Corpus> {
    if corpus.n_modalities() == 1 {
        return Ok(corpus.clone());
    }
    corpus.with_features(vec![concat_features(corpus)?])
}

fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    if blocks.len() == 1 {
        return blocks[0].clone();
    }
    let n = blocks[0].nrows();
    let width: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, width);
    let mut c = 0;
    for b in blocks {
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Per-event classifier scores on the test set from one train/test
/// representation pair.
fn event_scores(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    train_ids: &[String],
    events: &[EventLabels],
    cfg: &HarnessConfig,
) -> Result<Vec<Vec<f64>>> {
    let p = cfg.classifier;
    match cfg.max_positives {
        None => {
            let system = KernelSystem::new(train.clone(), p.reg, p.rbf_gamma)?;
            events
                .par_iter()
                .map(|e| {
                    let labels: Vec<bool> = train_ids.iter().map(|v| e.is_positive(v)).collect();
                    Ok(system.fit(&labels)?.score(test)?.as_slice().to_vec())
                })
                .collect()
        }
        Some(limit) => events
            .par_iter()
            .map(|e| {
                let mut kept = 0usize;
                let rows: Vec<usize> = (0..train_ids.len())
                    .filter(|&i| {
                        if !e.is_positive(&train_ids[i]) {
                            return true;
                        }
                        kept += 1;
                        kept <= limit
                    })
                    .collect();
                let sub = train.select_rows(&rows);
                let labels: Vec<bool> = rows.iter().map(|&i| e.is_positive(&train_ids[i])).collect();
                let system = KernelSystem::new(sub, p.reg, p.rbf_gamma)?;
                Ok(system.fit(&labels)?.score(test)?.as_slice().to_vec())
            })
            .collect(),
    }
}

/// Few-example event recognition: representations are learned on `learn`,
/// one kernel classifier per event is trained on `train` using the event
/// positives found there, and AP is measured on `test`.
pub fn few_example_harness(
    learn: &Corpus,
    train: &Corpus,
    test: &Corpus,
    events: &[EventLabels],
    spec: &RepresentationSpec,
    strategy: FusionStrategy,
    cfg: &HarnessConfig,
) -> Result<HarnessReport> {
    if events.is_empty() {
        return Err(Error::Empty("no events to evaluate".into()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("train and test sets must be non-empty".into()));
    }
    let j = learn.n_modalities();
    let per_modality = |c: &Corpus, m: usize| c.single_modality(m);

    let scores: Vec<Vec<f64>> = match strategy {
        FusionStrategy::Late => {
            let parts = (0..j)
                .map(|m| {
                    let r = Representer::fit(spec, &per_modality(learn, m)?)?;
                    event_scores(
                        &r.apply(&per_modality(train, m)?)?,
                        &r.apply(&per_modality(test, m)?)?,
                        train.video_ids(),
                        events,
                        cfg,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            (0..events.len())
                .map(|e| {
                    (0..test.len())
                        .map(|i| parts.iter().map(|p| p[e][i]).sum::<f64>() / j as f64)
                        .collect()
                })
                .collect()
        }
        FusionStrategy::VsLate => {
            let mut train_blocks = Vec::with_capacity(j);
            let mut test_blocks = Vec::with_capacity(j);
            for m in 0..j {
                let r = Representer::fit(spec, &per_modality(learn, m)?)?;
                train_blocks.push(r.apply(&per_modality(train, m)?)?);
                test_blocks.push(r.apply(&per_modality(test, m)?)?);
            }
            event_scores(&hstack(&train_blocks), &hstack(&test_blocks), train.video_ids(), events, cfg)?
        }
        FusionStrategy::VsJoint if Representer::has_joint_form(spec) => {
            let r = Representer::fit(spec, learn)?;
            event_scores(&r.apply(train)?, &r.apply(test)?, train.video_ids(), events, cfg)?
        }
        FusionStrategy::Early | FusionStrategy::VsEarly | FusionStrategy::VsJoint => {
            let r = Representer::fit(spec, &early_view(learn)?)?;
            event_scores(
                &r.apply(&early_view(train)?)?,
                &r.apply(&early_view(test)?)?,
                train.video_ids(),
                events,
                cfg,
            )?
        }
    };

    let results = events
        .iter()
        .zip(&scores)
        .map(|(e, s)| {
            let labels: Vec<bool> = test.video_ids().iter().map(|v| e.is_positive(v)).collect();
            average_precision(&e.event_id, test.video_ids(), s, &labels)
        })
        .collect::<Result<Vec<_>>>()?;
    let map = mean_average_precision(&results)?;
    Ok(HarnessReport { results, map })
}
