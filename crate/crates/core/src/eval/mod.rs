//! Average precision, the kernel event classifier and the few-example
//! recognition harness.

mod harness;
mod kernel;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv};

use crate::error::{format_err, Error, Result};
use crate::textfmt::sig9;
use crate::zeroshot::Ranking;

pub use harness::{
    few_example_harness, ClassifierParams, FusionStrategy, HarnessConfig, HarnessReport,
    RepresentationSpec,
};
pub use kernel::{rbf_kernel, train_event_classifier, KernelScorer, KernelSystem};

/// Positive videos of one event. Every other video is a negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLabels {
    pub event_id: String,
    /// Sorted video ids.
    pub positives: Vec<String>,
}

impl EventLabels {
    pub fn is_positive(&self, video_id: &str) -> bool {
        self.positives.binary_search_by(|p| p.as_str().cmp(video_id)).is_ok()
    }

    /// Binary labels for `video_ids` in the given order.
    pub fn labeled_set(&self, video_ids: &[String]) -> LabeledSet {
        LabeledSet {
            video_ids: video_ids.to_vec(),
            labels: video_ids.iter().map(|v| self.is_positive(v)).collect(),
        }
    }
}

/// Videos with a binary event label each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    pub video_ids: Vec<String>,
    pub labels: Vec<bool>,
}

impl LabeledSet {
    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }
}

/// `event_id\tvideo_id` per positive; grouped by event in id order.
pub fn read_labels(path: &Path) -> Result<Vec<EventLabels>> {
    let text = fs::read_to_string(path)?;
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (event, video) = line
            .split_once('\t')
            .ok_or_else(|| format_err(format!("{}:{}: expected event id and video id", path.display(), n + 1)))?;
        groups.entry(event.to_string()).or_default().push(video.trim().to_string());
    }
    Ok(groups
        .into_iter()
        .map(|(event_id, mut positives)| {
            positives.sort();
            positives.dedup();
            EventLabels { event_id, positives }
        })
        .collect())
}

pub fn write_labels(path: &Path, labels: &[EventLabels]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        for v in &l.positives {
            let _ = writeln!(out, "{}\t{}", l.event_id, v);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct APResult {
    pub event_id: String,
    pub ap: f64,
    pub n_pos: usize,
    pub n_total: usize,
}

/// Non-interpolated average precision: the mean, over positives, of the
/// precision at each positive's rank. Videos are ranked by descending
/// score with ties broken by ascending video id.
pub fn average_precision(
    event_id: &str,
    video_ids: &[String],
    scores: &[f64],
    labels: &[bool],
) -> Result<APResult> {
    if video_ids.len() != scores.len() || scores.len() != labels.len() {
        return Err(crate::error::shape("ids, scores and labels differ in length"));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| video_ids[a].cmp(&video_ids[b]))
    });
    let precisions: Vec<(u128, u128)> = order
        .iter()
        .enumerate()
        .filter(|(_, &i)| labels[i])
        .enumerate()
        .map(|(hits, (rank, _))| (hits as u128 + 1, rank as u128 + 1))
        .collect();
    Ok(APResult {
        event_id: event_id.to_string(),
        ap: mean_of_fractions(&precisions),
        n_pos,
        n_total: scores.len(),
    })
}

/// Mean of `num/den` fractions, summed exactly while the rational fits in
/// `u128` so that small cases round once.
fn mean_of_fractions(fractions: &[(u128, u128)]) -> f64 {
    let exact = fractions.iter().try_fold(Ratio::from_integer(0u128), |acc, &(n, d)| {
        acc.checked_add(&Ratio::new(n, d))
    });
    match exact.and_then(|sum| sum.checked_div(&Ratio::from_integer(fractions.len() as u128))) {
        Some(mean) => *mean.numer() as f64 / *mean.denom() as f64,
        None => fractions.iter().map(|&(n, d)| n as f64 / d as f64).sum::<f64>() / fractions.len() as f64,
    }
}

/// AP of a stored ranking against the event's positives.
pub fn ranking_ap(ranking: &Ranking, labels: &EventLabels) -> Result<APResult> {
    let ids: Vec<String> = ranking.entries.iter().map(|e| e.video_id.clone()).collect();
    let scores: Vec<f64> = ranking.entries.iter().map(|e| e.score).collect();
    let flags: Vec<bool> = ids.iter().map(|v| labels.is_positive(v)).collect();
    average_precision(&labels.event_id, &ids, &scores, &flags)
}

pub fn mean_average_precision(results: &[APResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Empty("no per-event results to average".into()));
    }
    Ok(results.iter().map(|r| r.ap).sum::<f64>() / results.len() as f64)
}

/// `event_id\tap\tn_pos\tn_total` per event, then `mAP\t<value>`.
pub fn metrics_report(results: &[APResult]) -> Result<String> {
    let map = mean_average_precision(results)?;
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.event_id, sig9(r.ap), r.n_pos, r.n_total);
    }
    let _ = writeln!(out, "mAP\t{}", sig9(map));
    Ok(out)
}
