//! Frame-level ground truth and the annotation formats it is read from.
//!
//! All frame indices are 1-based and ranges are inclusive. The UCF-Crime text
//! format does not carry frame counts, so those come from the caller (usually
//! the responses file); the XD-Violence list only names anomalous videos, so
//! any video with a known frame count that is absent from the list is taken as
//! entirely normal.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSeries {
    pub video_id: String,
    pub num_frames: usize,
    pub anomalous_ranges: Vec<(usize, usize)>,
}

impl LabelSeries {
    /// Sorts the ranges and checks they lie in `[1, num_frames]` without overlap.
    pub fn new(
        video_id: impl Into<String>,
        num_frames: usize,
        mut anomalous_ranges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        anomalous_ranges.sort_unstable();
        for &(s, e) in &anomalous_ranges {
            if s == 0 || s > e || e > num_frames {
                return Err(Error::InvalidRange {
                    video_id,
                    message: format!("range ({s}, {e}) outside [1, {num_frames}]"),
                });
            }
        }
        for pair in anomalous_ranges.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return Err(Error::InvalidRange {
                    video_id,
                    message: format!("ranges {:?} and {:?} overlap", pair[0], pair[1]),
                });
            }
        }
        Ok(Self {
            video_id,
            num_frames,
            anomalous_ranges,
        })
    }

    /// Per-frame labels, index 0 holding frame 1.
    pub fn expand(&self) -> Vec<bool> {
        let mut labels = vec![false; self.num_frames];
        for &(s, e) in &self.anomalous_ranges {
            labels[s - 1..e].fill(true);
        }
        labels
    }

    pub fn num_positive(&self) -> usize {
        self.anomalous_ranges.iter().map(|&(s, e)| e + 1 - s).sum()
    }

    pub fn is_anomalous(&self, frame: usize) -> bool {
        self.anomalous_ranges.iter().any(|&(s, e)| (s..=e).contains(&frame))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthFormat {
    Normalized,
    UcfCrimeTxt,
    XdViolenceTxt,
}

impl FromStr for GroundTruthFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "ucf_crime_txt" => Ok(Self::UcfCrimeTxt),
            "xd_violence_txt" => Ok(Self::XdViolenceTxt),
            other => Err(Error::UnknownFormat(other.to_owned())),
        }
    }
}

impl fmt::Display for GroundTruthFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Normalized => "normalized",
            Self::UcfCrimeTxt => "ucf_crime_txt",
            Self::XdViolenceTxt => "xd_violence_txt",
        })
    }
}

pub type FrameCounts = BTreeMap<String, usize>;

const VIDEO_EXTENSIONS: [&str; 6] = [".mp4", ".avi", ".mkv", ".webm", ".mov", ".mpg"];

/// Strips a trailing container extension, leaving dotted titles intact.
pub fn video_stem(name: &str) -> &str {
    let lower = name.to_ascii_lowercase();
    VIDEO_EXTENSIONS
        .iter()
        .find(|ext| lower.ends_with(*ext))
        .map_or(name, |ext| &name[..name.len() - ext.len()])
}

pub fn load_ground_truth(
    path: impl AsRef<Path>,
    format: GroundTruthFormat,
    frame_counts: Option<&FrameCounts>,
) -> Result<Vec<LabelSeries>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text, format, frame_counts, path)
}

/// Parses annotation text; the result is ordered by `video_id`.
pub fn parse_ground_truth(
    text: &str,
    format: GroundTruthFormat,
    frame_counts: Option<&FrameCounts>,
    origin: &Path,
) -> Result<Vec<LabelSeries>> {
    let series = match format {
        GroundTruthFormat::Normalized => parse_normalized(text, origin)?,
        GroundTruthFormat::UcfCrimeTxt => parse_ucf(text, frame_counts, origin)?,
        GroundTruthFormat::XdViolenceTxt => parse_xd(text, frame_counts, origin)?,
    };
    let mut by_id = BTreeMap::new();
    for s in series {
        if by_id.contains_key(&s.video_id) {
            return Err(Error::InvalidRange {
                video_id: s.video_id,
                message: "video annotated more than once".into(),
            });
        }
        by_id.insert(s.video_id.clone(), s);
    }
    Ok(by_id.into_values().collect())
}

fn parse_normalized(text: &str, origin: &Path) -> Result<Vec<LabelSeries>> {
    let trimmed = text.trim_start();
    let raw: Vec<LabelSeries> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| Error::MalformedLine {
            path: origin.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?
    } else {
        let mut out = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?);
        }
        out
    };
    raw.into_iter()
        .map(|s| LabelSeries::new(s.video_id, s.num_frames, s.anomalous_ranges))
        .collect()
}

fn frame_count(frame_counts: Option<&FrameCounts>, id: &str) -> Result<usize> {
    frame_counts
        .and_then(|m| m.get(id))
        .copied()
        .ok_or_else(|| Error::MissingFrameCount(id.to_owned()))
}

fn parse_int(token: &str, origin: &Path, line: usize) -> Result<i64> {
    token.parse().map_err(|_| Error::MalformedLine {
        path: origin.to_path_buf(),
        line,
        message: format!("expected an integer, found {token:?}"),
    })
}

fn pairs_to_ranges(values: &[i64], id: &str, origin: &Path, line: usize) -> Result<Vec<(usize, usize)>> {
    if !values.len().is_multiple_of(2) {
        return Err(Error::MalformedLine {
            path: origin.to_path_buf(),
            line,
            message: "frame bounds must come in start/end pairs".into(),
        });
    }
    let mut ranges = Vec::new();
    for pair in values.chunks_exact(2) {
        match (pair[0], pair[1]) {
            (-1, -1) => {}
            (s, e) if s >= 0 && e >= 0 => ranges.push((s as usize, e as usize)),
            (s, e) => {
                return Err(Error::InvalidRange {
                    video_id: id.to_owned(),
                    message: format!("range ({s}, {e}) mixes a sentinel with a frame index"),
                })
            }
        }
    }
    Ok(ranges)
}

// `<name> <class> <s1> <e1> <s2> <e2>`, with -1 marking an unused pair.
fn parse_ucf(text: &str, frame_counts: Option<&FrameCounts>, origin: &Path) -> Result<Vec<LabelSeries>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 6 {
            return Err(Error::MalformedLine {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: format!("expected 6 fields, found {}", tokens.len()),
            });
        }
        let id = video_stem(tokens[0]);
        let values = tokens[2..]
            .iter()
            .map(|t| parse_int(t, origin, idx + 1))
            .collect::<Result<Vec<_>>>()?;
        let ranges = pairs_to_ranges(&values, id, origin, idx + 1)?;
        out.push(LabelSeries::new(id, frame_count(frame_counts, id)?, ranges)?);
    }
    Ok(out)
}

// `<name> <s1> <e1> [<s2> <e2> ...]`, anomalous videos only.
fn parse_xd(text: &str, frame_counts: Option<&FrameCounts>, origin: &Path) -> Result<Vec<LabelSeries>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let id = video_stem(tokens[0]);
        let values = tokens[1..]
            .iter()
            .map(|t| parse_int(t, origin, idx + 1))
            .collect::<Result<Vec<_>>>()?;
        let ranges = pairs_to_ranges(&values, id, origin, idx + 1)?;
        out.push(LabelSeries::new(id, frame_count(frame_counts, id)?, ranges)?);
    }
    if let Some(counts) = frame_counts {
        for (id, &frames) in counts {
            if !out.iter().any(|s| &s.video_id == id) {
                out.push(LabelSeries::new(id.clone(), frames, Vec::new())?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(pairs: &[(&str, usize)]) -> FrameCounts {
        pairs.iter().map(|&(k, v)| (k.to_owned(), v)).collect()
    }

    fn parse(text: &str, format: GroundTruthFormat, fc: Option<&FrameCounts>) -> Result<Vec<LabelSeries>> {
        parse_ground_truth(text, format, fc, Path::new("gt"))
    }

    #[test]
    fn ucf_sentinels_dropped() {
        let fc = counts(&[("Abuse001_x264", 500)]);
        let gt = parse(
            "Abuse001_x264.mp4 Abuse 120 300 -1 -1\n",
            GroundTruthFormat::UcfCrimeTxt,
            Some(&fc),
        )
        .unwrap();
        assert_eq!(gt[0].video_id, "Abuse001_x264");
        assert_eq!(gt[0].num_frames, 500);
        assert_eq!(gt[0].anomalous_ranges, vec![(120, 300)]);
    }

    #[test]
    fn ucf_normal_and_two_ranges() {
        let fc = counts(&[("Normal_Videos_003_x264", 900), ("Arson011_x264", 4000)]);
        let text = "Normal_Videos_003_x264.mp4 Normal -1 -1 -1 -1\nArson011_x264.mp4 Arson 150 420 680 1267\n";
        let gt = parse(text, GroundTruthFormat::UcfCrimeTxt, Some(&fc)).unwrap();
        assert_eq!(gt[0].video_id, "Arson011_x264");
        assert_eq!(gt[0].anomalous_ranges, vec![(150, 420), (680, 1267)]);
        assert!(gt[1].anomalous_ranges.is_empty());
    }

    #[test]
    fn ucf_requires_frame_count() {
        let err = parse("A.mp4 Abuse 1 2 -1 -1", GroundTruthFormat::UcfCrimeTxt, None).unwrap_err();
        assert!(matches!(err, Error::MissingFrameCount(_)));
    }

    #[test]
    fn xd_list_fills_unlisted_videos() {
        let fc = counts(&[("Bad.Boys.1995__#01-11-55_01-12-40_label_G-B2-B6", 800), ("quiet", 100)]);
        let text = "Bad.Boys.1995__#01-11-55_01-12-40_label_G-B2-B6 1 57 225 300\n";
        let gt = parse(text, GroundTruthFormat::XdViolenceTxt, Some(&fc)).unwrap();
        assert_eq!(gt.len(), 2);
        assert_eq!(gt[0].anomalous_ranges, vec![(1, 57), (225, 300)]);
        assert_eq!(gt[1].video_id, "quiet");
        assert_eq!(gt[1].num_positive(), 0);
    }

    #[test]
    fn normalized_expansion() {
        let gt = parse(
            r#"{"video_id":"v1","num_frames":10,"anomalous_ranges":[[3,5]]}"#,
            GroundTruthFormat::Normalized,
            None,
        )
        .unwrap();
        let labels: Vec<u8> = gt[0].expand().into_iter().map(u8::from).collect();
        assert_eq!(labels, vec![0, 0, 1, 1, 1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn normalized_array_form() {
        let gt = parse(
            r#"[{"video_id":"b","num_frames":4,"anomalous_ranges":[]},{"video_id":"a","num_frames":4,"anomalous_ranges":[[4,4]]}]"#,
            GroundTruthFormat::Normalized,
            None,
        )
        .unwrap();
        assert_eq!(gt[0].video_id, "a");
        assert_eq!(gt[1].video_id, "b");
    }

    #[test]
    fn overlap_and_bounds_errors() {
        let overlap = r#"{"video_id":"v1","num_frames":10,"anomalous_ranges":[[3,5],[5,7]]}"#;
        assert!(matches!(
            parse(overlap, GroundTruthFormat::Normalized, None).unwrap_err(),
            Error::InvalidRange { .. }
        ));
        let outside = r#"{"video_id":"v1","num_frames":10,"anomalous_ranges":[[8,11]]}"#;
        assert!(matches!(
            parse(outside, GroundTruthFormat::Normalized, None).unwrap_err(),
            Error::InvalidRange { .. }
        ));
        let zero = r#"{"video_id":"v1","num_frames":10,"anomalous_ranges":[[0,2]]}"#;
        assert!(parse(zero, GroundTruthFormat::Normalized, None).is_err());
    }

    #[test]
    fn unknown_format_token() {
        assert!(matches!(
            "ucf".parse::<GroundTruthFormat>(),
            Err(Error::UnknownFormat(_))
        ));
        assert_eq!(
            "xd_violence_txt".parse::<GroundTruthFormat>().unwrap(),
            GroundTruthFormat::XdViolenceTxt
        );
    }

    #[test]
    fn stems_keep_dotted_titles() {
        assert_eq!(video_stem("Abuse001_x264.mp4"), "Abuse001_x264");
        assert_eq!(
            video_stem("A.Beautiful.Mind.2001__#00-25-20"),
            "A.Beautiful.Mind.2001__#00-25-20"
        );
    }
}
