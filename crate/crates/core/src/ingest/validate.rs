use serde::Serialize;

use super::{EmbeddingBundle, LabelSeries, VideoResponses};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

/// Problems found across the inputs of one video. Nothing here is thrown;
/// callers decide what to do with a fatal report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub video_id: String,
    pub issues: Vec<Issue>,
    pub is_fatal: bool,
}

impl ValidationReport {
    pub fn new(video_id: impl Into<String>) -> Self {
        Self {
            video_id: video_id.into(),
            issues: Vec::new(),
            is_fatal: false,
        }
    }

    pub fn push(&mut self, severity: Severity, code: &'static str, message: impl Into<String>) {
        self.is_fatal |= severity == Severity::Error;
        self.issues.push(Issue {
            severity,
            code,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    pub fn summary(&self) -> String {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Error)
            .map(|i| format!("{}: {}", i.code, i.message))
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Flags segments whose length does not match the configured interval.
    pub fn check_interval(&mut self, responses: &VideoResponses, interval: usize) {
        let segs = responses.segments();
        let last = segs.len() - 1;
        for (pos, seg) in segs.iter().enumerate() {
            let bad = if pos == last {
                seg.len() > interval
            } else {
                seg.len() != interval
            };
            if bad {
                self.push(
                    Severity::Error,
                    "segment-interval",
                    format!(
                        "segment {} spans {} frames, configured interval is {interval}",
                        seg.segment_index,
                        seg.len()
                    ),
                );
            }
        }
    }
}

pub fn validate_bundle(
    responses: &VideoResponses,
    embeddings: &EmbeddingBundle,
    labels: Option<&LabelSeries>,
) -> ValidationReport {
    let mut report = ValidationReport::new(responses.video_id());
    if embeddings.video_id() != responses.video_id() {
        report.push(
            Severity::Error,
            "video-id-mismatch",
            format!(
                "embeddings belong to {:?}, responses to {:?}",
                embeddings.video_id(),
                responses.video_id()
            ),
        );
    }
    if embeddings.dim() == 0 {
        report.push(Severity::Error, "zero-dimension", "embedding dimension is zero");
    }
    if embeddings.num_segments() != responses.num_segments() {
        report.push(
            Severity::Error,
            "row-count-mismatch",
            format!(
                "row-count mismatch: {} responses, {} embedding rows",
                responses.num_segments(),
                embeddings.num_segments()
            ),
        );
    }
    if let Some(labels) = labels {
        if labels.video_id != responses.video_id() {
            report.push(
                Severity::Error,
                "video-id-mismatch",
                format!("labels belong to {:?}", labels.video_id),
            );
        }
        let covered = responses.covered_frames();
        let frames = labels.num_frames;
        if covered > frames {
            report.push(
                Severity::Error,
                "coverage-exceeds-labels",
                format!("segments cover {covered} frames, labels only {frames}"),
            );
        } else if covered < frames {
            let missing = frames - covered;
            let severity = if missing >= responses.interval() {
                Severity::Error
            } else {
                Severity::Warning
            };
            report.push(
                severity,
                "uncovered-trailing-frames",
                format!("{missing} trailing frames uncovered"),
            );
        }
    }
    report
}
