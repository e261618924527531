//! Frame-level AUC-ROC and average precision.
//!
//! AUC is the Mann-Whitney statistic with half credit for tied pairs. AP sums
//! `(R_k - R_{k-1}) * P_k` over descending score thresholds, where frames with
//! equal scores enter together. Datasets are pooled across videos before
//! either metric is computed.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabelSeries;
use crate::refine::ScoreSeries;

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(scores.len(), labels.len()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite score {bad}")));
    }
    Ok(())
}

/// Indices sorted by descending score, grouped into runs of equal score.
/// Each run is reported as (positives, negatives).
fn tie_blocks(scores: &[f64], labels: &[bool]) -> Vec<(u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut blocks: Vec<(u64, u64)> = Vec::new();
    let mut prev: Option<f64> = None;
    for i in order {
        // -0.0 and 0.0 compare equal here, matching `==` in the pairwise definition.
        if prev.is_none_or(|p| p.partial_cmp(&scores[i]) != Some(Ordering::Equal)) {
            blocks.push((0, 0));
        }
        let block = blocks.last_mut().unwrap();
        if labels[i] {
            block.0 += 1;
        } else {
            block.1 += 1;
        }
        prev = Some(scores[i]);
    }
    blocks
}

pub fn auc_roc_raw(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both positive and negative frames".into(),
        ));
    }
    // Twice the count of correctly ordered pairs plus tied pairs, kept integral.
    let mut doubled: u128 = 0;
    let mut neg_below = neg;
    for (p, n) in tie_blocks(scores, labels) {
        neg_below -= n;
        doubled += 2 * u128::from(p) * u128::from(neg_below) + u128::from(p) * u128::from(n);
    }
    Ok(doubled as f64 / (2.0 * pos as f64 * neg as f64))
}

pub fn average_precision_raw(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    if pos == 0 {
        return Err(Error::UndefinedMetric("AP needs at least one positive frame".into()));
    }
    let mut tp = 0u64;
    let mut seen = 0u64;
    let mut ap = 0.0;
    for (p, n) in tie_blocks(scores, labels) {
        tp += p;
        seen += p + n;
        if p > 0 {
            ap += (p as f64 / pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

fn check_series(scores: &ScoreSeries, labels: &LabelSeries) -> Result<Vec<bool>> {
    if scores.len() != labels.num_frames {
        return Err(Error::ValidationFailed {
            video_id: labels.video_id.clone(),
            summary: format!("{} scores for {} labelled frames", scores.len(), labels.num_frames),
        });
    }
    Ok(labels.expand())
}

pub fn auc_roc(scores: &ScoreSeries, labels: &LabelSeries) -> Result<f64> {
    let expanded = check_series(scores, labels)?;
    auc_roc_raw(&scores.values, &expanded)
}

pub fn average_precision(scores: &ScoreSeries, labels: &LabelSeries) -> Result<f64> {
    let expanded = check_series(scores, labels)?;
    average_precision_raw(&scores.values, &expanded)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub auc_roc: f64,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub auc_roc: f64,
    pub average_precision: f64,
    pub num_frames: usize,
    pub num_positive: usize,
    /// `None` for videos that contain a single class.
    pub per_video: BTreeMap<String, Option<VideoMetrics>>,
}

/// Pools all frames, then computes each metric once.
pub fn aggregate_dataset(per_video: &[(ScoreSeries, LabelSeries)]) -> Result<DatasetMetrics> {
    if per_video.is_empty() {
        return Err(Error::Empty("no videos to evaluate"));
    }
    let mut all_scores = Vec::new();
    let mut all_labels = Vec::new();
    let mut videos = BTreeMap::new();
    for (scores, labels) in per_video {
        let expanded = check_series(scores, labels)?;
        let single = expanded.iter().all(|&l| l) || expanded.iter().all(|&l| !l);
        let metrics = if single {
            None
        } else {
            Some(VideoMetrics {
                auc_roc: auc_roc_raw(&scores.values, &expanded)?,
                average_precision: average_precision_raw(&scores.values, &expanded)?,
            })
        };
        if videos.insert(labels.video_id.clone(), metrics).is_some() {
            return Err(Error::InvalidParameter(format!(
                "video {:?} evaluated twice",
                labels.video_id
            )));
        }
        all_scores.extend_from_slice(&scores.values);
        all_labels.extend(expanded);
    }
    Ok(DatasetMetrics {
        auc_roc: auc_roc_raw(&all_scores, &all_labels)?,
        average_precision: average_precision_raw(&all_scores, &all_labels)?,
        num_frames: all_labels.len(),
        num_positive: all_labels.iter().filter(|&&l| l).count(),
        per_video: videos,
    })
}
