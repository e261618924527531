//! Turning cleaned segment verdicts into frame-level anomaly scores.
//!
//! The chain runs, each stage optional:
//! 1. context refinement: every segment's score becomes a softmax-weighted
//!    mix of all cleaned verdicts, weighted by how well each segment's cleaned
//!    description matches this segment's vision embedding;
//! 2. Gaussian smoothing over segments (unit-sum kernel, edge replication);
//! 3. block expansion to frames;
//! 4. a centre-peaked Gaussian position weight over the frame timeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clean::CleaningResult;
use crate::error::{Error, Result};
use crate::ingest::{EmbeddingBundle, Section, VideoResponses};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Segment,
    Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub video_id: String,
    pub granularity: Granularity,
    pub values: Vec<f64>,
}

impl ScoreSeries {
    pub fn segment(video_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            video_id: video_id.into(),
            granularity: Granularity::Segment,
            values,
        }
    }

    pub fn frame(video_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            video_id: video_id.into(),
            granularity: Granularity::Frame,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Mode {
    /// `exp(-(i - c)^2 / (2 sigma2^2))`: sigma2 acts as a standard deviation.
    #[default]
    Squared,
    /// `exp(-(i - c)^2 / (2 sigma2))`: sigma2 acts as a variance.
    Literal,
}

/// Position-weight width; `Auto` resolves to `floor(F / 2)` per video.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum Sigma2 {
    #[default]
    Auto,
    Value(f64),
}

impl Sigma2 {
    pub fn resolve(self, num_frames: usize) -> f64 {
        match self {
            Sigma2::Auto => (num_frames / 2).max(1) as f64,
            Sigma2::Value(v) => v,
        }
    }
}

impl Serialize for Sigma2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma2::Auto => s.serialize_str("auto"),
            Sigma2::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Sigma2::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl FromStr for Sigma2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Sigma2::Auto);
        }
        s.parse()
            .map(Sigma2::Value)
            .map_err(|_| Error::InvalidParameter(format!("sigma2 must be \"auto\" or a number, got {s:?}")))
    }
}

impl fmt::Display for Sigma2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma2::Auto => f.write_str("auto"),
            Sigma2::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// `rho_j = sum_i y_i * w_ji`.
    #[default]
    Weighted,
    /// `rho_j = sum_i y_j * w_ji`, which reduces to `y_j` because every
    /// weight row sums to one. Kept to show that reading is a no-op.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub context_refine: bool,
    pub smoothing: bool,
    pub position_weight: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            context_refine: true,
            smoothing: true,
            position_weight: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineParams {
    pub tau: f64,
    pub kernel_radius: usize,
    pub sigma1: f64,
    pub sigma2_mode: Sigma2Mode,
    pub sigma2: Sigma2,
    pub eq3_mode: ContextMode,
    pub toggles: Toggles,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            tau: 0.05,
            kernel_radius: 9,
            sigma1: 5.0,
            sigma2_mode: Sigma2Mode::Squared,
            sigma2: Sigma2::Auto,
            eq3_mode: ContextMode::Weighted,
            toggles: Toggles::default(),
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma1 must be positive, got {}",
                self.sigma1
            )));
        }
        if self.kernel_radius < 1 {
            return Err(Error::InvalidParameter("kernel_radius must be at least 1".into()));
        }
        if let Sigma2::Value(v) = self.sigma2 {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Row-stochastic weights `w[j][i] = softmax_i(cos(v_j, desc_i) / tau)`, where
/// `desc_i` is the description embedding adopted by segment `i` during cleaning.
pub fn context_weights(cleaned: &CleaningResult, embeddings: &EmbeddingBundle, tau: f64) -> Result<Vec<Vec<f64>>> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let m = cleaned.len();
    if m == 0 {
        return Err(Error::Empty("no segments to refine"));
    }
    if embeddings.num_segments() != m {
        return Err(Error::ValidationFailed {
            video_id: embeddings.video_id().to_owned(),
            summary: format!("{m} cleaned segments, {} embedding rows", embeddings.num_segments()),
        });
    }
    let table = embeddings.vision_cosines(Section::DescriptionText);
    let weights = (0..m)
        .map(|j| {
            let row = table.row(j);
            let logits: Vec<f64> = cleaned.selected_index.iter().map(|&k| row[k] / tau).collect();
            softmax(&logits)
        })
        .collect();
    Ok(weights)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn visual_semantic_refine(
    cleaned: &CleaningResult,
    embeddings: &EmbeddingBundle,
    tau: f64,
    mode: ContextMode,
) -> Result<ScoreSeries> {
    let weights = context_weights(cleaned, embeddings, tau)?;
    let scores = &cleaned.decisions;
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = match mode {
        ContextMode::Weighted => weights
            .iter()
            .map(|row| {
                let mixed: f64 = row.iter().zip(scores).map(|(w, y)| w * y).sum();
                mixed.clamp(lo, hi)
            })
            .collect(),
        ContextMode::Literal => scores.clone(),
    };
    Ok(ScoreSeries::segment(embeddings.video_id(), values))
}

/// `exp(-p^2 / (2 sigma1^2))` for `p` in `-radius..=radius`, scaled to unit sum.
pub fn gaussian_kernel(radius: usize, sigma1: f64) -> Vec<f64> {
    let r = radius as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|p| (-((p * p) as f64) / (2.0 * sigma1 * sigma1)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|g| g / total).collect()
}

pub fn gaussian_smooth(values: &[f64], radius: usize, sigma1: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("nothing to smooth"));
    }
    if radius < 1 || sigma1.is_nan() || sigma1 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "smoothing needs radius >= 1 and sigma1 > 0, got {radius} and {sigma1}"
        )));
    }
    let kernel = gaussian_kernel(radius, sigma1);
    let last = values.len() as i64 - 1;
    let r = radius as i64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let out = (0..values.len() as i64)
        .map(|j| {
            let centre = values[j as usize];
            // Accumulating offsets from the centre keeps constants exact.
            let delta: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, &w)| w * (values[(j + k as i64 - r).clamp(0, last) as usize] - centre))
                .sum();
            (centre + delta).clamp(lo, hi)
        })
        .collect();
    Ok(out)
}

/// Assigns each segment's score to its frames; frames past the last segment
/// take the last segment's score.
pub fn expand_to_frames(values: &[f64], responses: &VideoResponses, num_frames: usize) -> Result<Vec<f64>> {
    let segs = responses.segments();
    if values.len() != segs.len() {
        return Err(Error::ValidationFailed {
            video_id: responses.video_id().to_owned(),
            summary: format!("{} scores for {} segments", values.len(), segs.len()),
        });
    }
    let covered = responses.covered_frames();
    if num_frames < covered {
        return Err(Error::InvalidParameter(format!(
            "video {:?} has {num_frames} frames but segments cover {covered}",
            responses.video_id()
        )));
    }
    let mut frames = Vec::with_capacity(num_frames);
    for (seg, &v) in segs.iter().zip(values) {
        frames.extend(std::iter::repeat_n(v, seg.len()));
    }
    let tail = *values.last().expect("segments are non-empty");
    frames.resize(num_frames, tail);
    Ok(frames)
}

/// Centre frame (1-based) used by the position weight.
pub fn centre_frame(num_frames: usize) -> usize {
    (num_frames / 2).max(1)
}

pub fn position_weights(num_frames: usize, mode: Sigma2Mode, sigma2: Sigma2) -> Result<Vec<f64>> {
    if num_frames == 0 {
        return Err(Error::Empty("no frames to weight"));
    }
    let s = sigma2.resolve(num_frames);
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {s}")));
    }
    let denom = match mode {
        Sigma2Mode::Squared => 2.0 * s * s,
        Sigma2Mode::Literal => 2.0 * s,
    };
    let c = centre_frame(num_frames) as f64;
    Ok((1..=num_frames)
        .map(|i| {
            let d = i as f64 - c;
            (-(d * d) / denom).exp()
        })
        .collect())
}

pub fn position_weight(values: &[f64], mode: Sigma2Mode, sigma2: Sigma2) -> Result<Vec<f64>> {
    let w = position_weights(values.len(), mode, sigma2)?;
    Ok(values.iter().zip(w).map(|(v, w)| v * w).collect())
}

/// Runs the enabled stages and returns frame-level scores.
pub fn refine_chain(
    cleaned: &CleaningResult,
    embeddings: &EmbeddingBundle,
    params: &RefineParams,
    responses: &VideoResponses,
    num_frames: usize,
) -> Result<ScoreSeries> {
    params.validate()?;
    let mut segment = if params.toggles.context_refine {
        visual_semantic_refine(cleaned, embeddings, params.tau, params.eq3_mode)?.values
    } else {
        cleaned.decisions.clone()
    };
    if params.toggles.smoothing {
        segment = gaussian_smooth(&segment, params.kernel_radius, params.sigma1)?;
    }
    let mut frames = expand_to_frames(&segment, responses, num_frames)?;
    if params.toggles.position_weight {
        frames = position_weight(&frames, params.sigma2_mode, params.sigma2)?;
    }
    Ok(ScoreSeries::frame(responses.video_id(), frames))
}
