//! Segment responses in JSONL form, one object per segment.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One generated response for a fixed-interval block of frames.
///
/// Frame indices are 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentResponse {
    pub video_id: String,
    pub segment_index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub raw_text: String,
}

impl SegmentResponse {
    pub fn len(&self) -> usize {
        self.end_frame + 1 - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_frame(&self, frame: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }
}

/// All responses of one video, sorted by `segment_index` with contiguous spans
/// starting at frame 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoResponses {
    video_id: String,
    segments: Vec<SegmentResponse>,
}

impl VideoResponses {
    /// Sorts the records and checks every segment invariant.
    pub fn new(video_id: impl Into<String>, mut segments: Vec<SegmentResponse>) -> Result<Self> {
        let video_id = video_id.into();
        if segments.is_empty() {
            return Err(Error::Empty("video has no segment responses"));
        }
        segments.sort_by_key(|s| s.segment_index);
        for pair in segments.windows(2) {
            if pair[0].segment_index == pair[1].segment_index {
                return Err(Error::DuplicateSegment {
                    video_id,
                    segment_index: pair[0].segment_index,
                });
            }
        }
        for (pos, seg) in segments.iter().enumerate() {
            if seg.video_id != video_id {
                return Err(Error::InvalidSegment {
                    video_id,
                    message: format!("record carries video_id {:?}", seg.video_id),
                });
            }
            if seg.segment_index != pos + 1 {
                return Err(Error::NonContiguousSpans {
                    video_id,
                    message: format!(
                        "segment indices must run 1..=M, found {} at position {}",
                        seg.segment_index,
                        pos + 1
                    ),
                });
            }
            if seg.start_frame == 0 || seg.start_frame > seg.end_frame {
                return Err(Error::InvalidSegment {
                    video_id,
                    message: format!(
                        "segment {} has span {}..={}",
                        seg.segment_index, seg.start_frame, seg.end_frame
                    ),
                });
            }
            if seg.raw_text.trim().is_empty() {
                return Err(Error::InvalidSegment {
                    video_id,
                    message: format!("segment {} has empty raw_text", seg.segment_index),
                });
            }
            let expected_start = if pos == 0 { 1 } else { segments[pos - 1].end_frame + 1 };
            if seg.start_frame != expected_start {
                return Err(Error::NonContiguousSpans {
                    video_id,
                    message: format!(
                        "segment {} starts at frame {}, expected {}",
                        seg.segment_index, seg.start_frame, expected_start
                    ),
                });
            }
        }
        // Every segment but the last shares one length; the last may be shorter.
        let interval = segments[0].len();
        let last = segments.len() - 1;
        for seg in &segments[..last] {
            if seg.len() != interval {
                return Err(Error::InvalidSegment {
                    video_id,
                    message: format!(
                        "segment {} spans {} frames, expected {}",
                        seg.segment_index,
                        seg.len(),
                        interval
                    ),
                });
            }
        }
        if segments[last].len() > interval {
            return Err(Error::InvalidSegment {
                video_id,
                message: format!(
                    "last segment spans {} frames, longer than the interval {}",
                    segments[last].len(),
                    interval
                ),
            });
        }
        Ok(Self { video_id, segments })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn segments(&self) -> &[SegmentResponse] {
        &self.segments
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Last frame covered by any segment.
    pub fn covered_frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end_frame)
    }

    /// Length of the longest segment, i.e. the segment interval in use.
    pub fn interval(&self) -> usize {
        self.segments[0].len()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.raw_text.as_str())
    }
}

/// Clamped fixed-interval segmentation: `ceil(F / d)` spans, the last one
/// possibly shorter.
pub fn segment_spans(num_frames: usize, interval: usize) -> Vec<(usize, usize)> {
    assert!(interval >= 1, "segment interval must be positive");
    (0..num_frames.div_ceil(interval))
        .map(|j| (j * interval + 1, ((j + 1) * interval).min(num_frames)))
        .collect()
}

/// Parses JSONL text. `origin` is used only in error messages.
pub fn parse_responses(text: &str, origin: &Path) -> Result<Vec<VideoResponses>> {
    let mut grouped: BTreeMap<String, Vec<SegmentResponse>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SegmentResponse = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            path: origin.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let bucket = grouped.entry(record.video_id.clone()).or_default();
        if bucket.iter().any(|s| s.segment_index == record.segment_index) {
            return Err(Error::DuplicateSegment {
                video_id: record.video_id,
                segment_index: record.segment_index,
            });
        }
        bucket.push(record);
    }
    grouped
        .into_iter()
        .map(|(id, segs)| VideoResponses::new(id, segs))
        .collect()
}

/// Loads a responses file, grouped per video and ordered by `video_id`.
pub fn load_responses(path: impl AsRef<Path>) -> Result<Vec<VideoResponses>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_responses(&text, path)
}

pub fn write_responses<'a, W: Write>(
    mut out: W,
    videos: impl IntoIterator<Item = &'a VideoResponses>,
) -> std::io::Result<()> {
    for video in videos {
        for seg in video.segments() {
            let line = serde_json::to_string(seg).map_err(std::io::Error::other)?;
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<VideoResponses>> {
        parse_responses(text, Path::new("mem.jsonl"))
    }

    #[test]
    fn single_record_maps_fields() {
        let videos = parse(
            r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":30,"raw_text":"Normal scenes: a man walks."}"#,
        )
        .unwrap();
        assert_eq!(videos.len(), 1);
        let seg = &videos[0].segments()[0];
        assert_eq!(seg.len(), 30);
        assert_eq!(seg.raw_text, "Normal scenes: a man walks.");
    }

    #[test]
    fn short_last_segment_accepted() {
        let text = concat!(
            r#"{"video_id":"v1","segment_index":2,"start_frame":31,"end_frame":45,"raw_text":"Normal scenes: b"}"#,
            "\n",
            r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":30,"raw_text":"Normal scenes: a"}"#,
            "\n"
        );
        let videos = parse(text).unwrap();
        let segs = videos[0].segments();
        assert_eq!(segs[0].segment_index, 1);
        assert_eq!(segs[1].len(), 15);
        assert_eq!(videos[0].covered_frames(), 45);
    }

    #[test]
    fn duplicate_rejected() {
        let line = r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":30,"raw_text":"x"}"#;
        let err = parse(&format!("{line}\n{line}\n")).unwrap_err();
        assert!(matches!(err, Error::DuplicateSegment { segment_index: 1, .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = concat!(
            r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":30,"raw_text":"x"}"#,
            "\n{not json\n"
        );
        match parse(text).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_malformed() {
        let text = r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":3,"raw_text":"x","extra":1}"#;
        assert!(matches!(parse(text).unwrap_err(), Error::MalformedLine { .. }));
    }

    #[test]
    fn gap_between_spans_rejected() {
        let text = concat!(
            r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":30,"raw_text":"a"}"#,
            "\n",
            r#"{"video_id":"v1","segment_index":2,"start_frame":32,"end_frame":61,"raw_text":"b"}"#,
        );
        assert!(matches!(parse(text).unwrap_err(), Error::NonContiguousSpans { .. }));
    }

    #[test]
    fn uneven_inner_segment_rejected() {
        let text = concat!(
            r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":20,"raw_text":"a"}"#,
            "\n",
            r#"{"video_id":"v1","segment_index":2,"start_frame":21,"end_frame":50,"raw_text":"b"}"#,
        );
        assert!(matches!(parse(text).unwrap_err(), Error::InvalidSegment { .. }));
    }

    #[test]
    fn empty_text_rejected() {
        let text = r#"{"video_id":"v1","segment_index":1,"start_frame":1,"end_frame":3,"raw_text":"  "}"#;
        assert!(matches!(parse(text).unwrap_err(), Error::InvalidSegment { .. }));
    }

    #[test]
    fn clamped_segmentation() {
        assert_eq!(segment_spans(60, 30), vec![(1, 30), (31, 60)]);
        assert_eq!(segment_spans(45, 30), vec![(1, 30), (31, 45)]);
        assert_eq!(segment_spans(7, 30), vec![(1, 7)]);
        assert!(segment_spans(0, 30).is_empty());
    }
}
