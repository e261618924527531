//! Response cleaning: each segment takes over the response, among a set of
//! candidate segments, whose full-text embedding is most similar to its own
//! vision embedding.
//!
//! Local cleaning restricts candidates to `j - l ..= j + l` (clamped to the
//! video); global cleaning considers every segment. Exact ties prefer the
//! segment itself, then the nearest candidate, then the lower index.
//! Segment indices here are 0-based.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EmbeddingBundle, Matrix, Section};
use crate::parse::ParsedResponses;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningStrategy {
    None,
    Global,
    #[default]
    Lrc,
}

impl FromStr for CleaningStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "global" => Ok(Self::Global),
            "lrc" => Ok(Self::Lrc),
            other => Err(Error::InvalidParameter(format!("unknown cleaning strategy {other:?}"))),
        }
    }
}

impl fmt::Display for CleaningStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Global => "global",
            Self::Lrc => "lrc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningResult {
    /// For each segment, the 0-based segment whose response it adopted.
    pub selected_index: Vec<usize>,
    pub decisions: Vec<f64>,
    pub descriptions: Vec<String>,
}

impl CleaningResult {
    fn from_selection(parsed: &ParsedResponses, selected_index: Vec<usize>) -> Self {
        Self {
            decisions: selected_index.iter().map(|&k| parsed.decisions[k]).collect(),
            descriptions: selected_index.iter().map(|&k| parsed.descriptions[k].clone()).collect(),
            selected_index,
        }
    }

    pub fn identity(parsed: &ParsedResponses) -> Self {
        Self::from_selection(parsed, (0..parsed.decisions.len()).collect())
    }

    pub fn len(&self) -> usize {
        self.selected_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected_index.is_empty()
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(cosine_with_norms(a, b, na, nb))
}

#[inline]
pub(crate) fn cosine_with_norms(a: &[f32], b: &[f32], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Candidate window `[lo, hi]` for segment `j` of `m`, `None` meaning the whole video.
pub fn candidate_window(j: usize, m: usize, l: Option<usize>) -> (usize, usize) {
    match l {
        Some(l) => (j.saturating_sub(l), (j + l).min(m - 1)),
        None => (0, m - 1),
    }
}

/// Source segment chosen for every segment. `l = None` scans the whole video.
pub fn select_sources(vision: &Matrix, response_text: &Matrix, l: Option<usize>) -> Vec<usize> {
    let vision_norms: Vec<f64> = vision.iter_rows().map(norm).collect();
    let resp_norms: Vec<f64> = response_text.iter_rows().map(norm).collect();
    select_by(vision.rows(), l, |j, k| {
        cosine_with_norms(vision.row(j), response_text.row(k), vision_norms[j], resp_norms[k])
    })
}

fn select_by(m: usize, l: Option<usize>, sim: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    (0..m)
        .map(|j| {
            let (lo, hi) = candidate_window(j, m, l);
            let mut best = j;
            let mut best_sim = sim(j, j);
            for k in lo..=hi {
                let s = sim(j, k);
                let closer = k.abs_diff(j) < best.abs_diff(j) || (k.abs_diff(j) == best.abs_diff(j) && k < best);
                if s > best_sim || (s == best_sim && closer) {
                    best = k;
                    best_sim = s;
                }
            }
            best
        })
        .collect()
}

fn select_in_bundle(embeddings: &EmbeddingBundle, l: Option<usize>) -> Vec<usize> {
    let table = embeddings.vision_cosines(Section::ResponseText);
    select_by(embeddings.num_segments(), l, |j, k| table.get(j, k))
}

fn check_lengths(parsed: &ParsedResponses, embeddings: &EmbeddingBundle) -> Result<()> {
    let m = parsed.decisions.len();
    if m == 0 {
        return Err(Error::Empty("no segments to clean"));
    }
    if embeddings.num_segments() != m {
        return Err(Error::ValidationFailed {
            video_id: embeddings.video_id().to_owned(),
            summary: format!("{m} parsed responses, {} embedding rows", embeddings.num_segments()),
        });
    }
    Ok(())
}

pub fn clean_lrc(parsed: &ParsedResponses, embeddings: &EmbeddingBundle, l: usize) -> Result<CleaningResult> {
    check_lengths(parsed, embeddings)?;
    let selected = select_in_bundle(embeddings, Some(l));
    Ok(CleaningResult::from_selection(parsed, selected))
}

pub fn clean_global(parsed: &ParsedResponses, embeddings: &EmbeddingBundle) -> Result<CleaningResult> {
    check_lengths(parsed, embeddings)?;
    let selected = select_in_bundle(embeddings, None);
    Ok(CleaningResult::from_selection(parsed, selected))
}

pub fn clean(
    strategy: CleaningStrategy,
    l: usize,
    parsed: &ParsedResponses,
    embeddings: &EmbeddingBundle,
) -> Result<CleaningResult> {
    match strategy {
        CleaningStrategy::None => {
            check_lengths(parsed, embeddings)?;
            Ok(CleaningResult::identity(parsed))
        }
        CleaningStrategy::Global => clean_global(parsed, embeddings),
        CleaningStrategy::Lrc => clean_lrc(parsed, embeddings, l),
    }
}
