//! Splitting a raw response into a binary verdict and its description.
//!
//! A response is anomalous if it carries the phrase "Anomalous scenes" and
//! normal if it carries "Normal scenes". Matching ignores ASCII case and
//! requires a word boundary before the phrase, so "abnormal scenes" does not
//! count as a normal verdict. When both phrases appear the earlier one wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SegmentResponse;

pub const ANOMALOUS_MARKER: &str = "anomalous scenes";
pub const NORMAL_MARKER: &str = "normal scenes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Anomalous,
    Normal,
    Indeterminate,
}

impl Decision {
    pub fn as_score(self) -> Option<f64> {
        match self {
            Decision::Anomalous => Some(1.0),
            Decision::Normal => Some(0.0),
            Decision::Indeterminate => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionParse {
    pub decision: Decision,
    pub description: String,
}

/// How to resolve responses that carry neither marker.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    #[default]
    TreatNormal,
    InheritPrevious,
}

/// Resolved per-segment verdicts and descriptions of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponses {
    pub decisions: Vec<f64>,
    pub descriptions: Vec<String>,
    /// Raw parse outcome before fallback resolution.
    pub raw: Vec<Decision>,
}

fn is_separator(c: char) -> bool {
    c.is_whitespace() || matches!(c, ':' | '-' | '–' | '—' | ';' | ',' | '|')
}

fn find_marker(lower: &str, marker: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(rel) = lower[from..].find(marker) {
        let at = from + rel;
        let boundary = lower[..at].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        if boundary {
            return Some(at);
        }
        from = at + 1;
        while !lower.is_char_boundary(from) {
            from += 1;
        }
    }
    None
}

pub fn parse_decision(raw_text: &str) -> DecisionParse {
    // ASCII lowering keeps byte offsets aligned with the original text.
    let lower = raw_text.to_ascii_lowercase();
    let anomalous = find_marker(&lower, ANOMALOUS_MARKER).map(|at| (at, ANOMALOUS_MARKER.len(), Decision::Anomalous));
    let normal = find_marker(&lower, NORMAL_MARKER).map(|at| (at, NORMAL_MARKER.len(), Decision::Normal));
    let hit = match (anomalous, normal) {
        (Some(a), Some(n)) => Some(if a.0 <= n.0 { a } else { n }),
        (a, n) => a.or(n),
    };
    let Some((at, len, decision)) = hit else {
        return DecisionParse {
            decision: Decision::Indeterminate,
            description: raw_text.to_owned(),
        };
    };
    let before = raw_text[..at].trim_matches(is_separator);
    let after = raw_text[at + len..].trim_matches(is_separator);
    let description = match (before.is_empty(), after.is_empty()) {
        (true, _) => after.to_owned(),
        (false, true) => before.to_owned(),
        (false, false) => format!("{before} {after}"),
    };
    DecisionParse { decision, description }
}

pub fn parse_all(responses: &[SegmentResponse], fallback: FallbackPolicy) -> Result<ParsedResponses> {
    if responses.is_empty() {
        return Err(Error::Empty("no responses to parse"));
    }
    let parses: Vec<DecisionParse> = responses.iter().map(|r| parse_decision(&r.raw_text)).collect();
    let mut decisions = Vec::with_capacity(parses.len());
    let mut previous = 0.0;
    for p in &parses {
        let value = match (p.decision.as_score(), fallback) {
            (Some(v), _) => v,
            (None, FallbackPolicy::TreatNormal) => 0.0,
            (None, FallbackPolicy::InheritPrevious) => previous,
        };
        previous = value;
        decisions.push(value);
    }
    Ok(ParsedResponses {
        decisions,
        raw: parses.iter().map(|p| p.decision).collect(),
        descriptions: parses.into_iter().map(|p| p.description).collect(),
    })
}
