//! Score timelines for inspection: a CSV, an SVG line plot with ground-truth
//! ranges shaded, and a JSON sidecar carrying the segment descriptions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::file_stem_for;
use crate::clean::CleaningResult;
use crate::error::{Error, Result};
use crate::ingest::{LabelSeries, VideoResponses};
use crate::refine::ScoreSeries;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SegmentNote {
    pub segment_index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub description: String,
}

impl SegmentNote {
    /// Notes carrying the description each segment ended up with after cleaning.
    pub fn from_cleaning(responses: &VideoResponses, cleaning: &CleaningResult) -> Vec<Self> {
        responses
            .segments()
            .iter()
            .zip(&cleaning.descriptions)
            .map(|(seg, desc)| Self {
                segment_index: seg.segment_index,
                start_frame: seg.start_frame,
                end_frame: seg.end_frame,
                description: desc.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct PlotFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub notes: PathBuf,
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 280.0;
const MARGIN: f64 = 40.0;

pub fn plot_csv(scores: &ScoreSeries, labels: Option<&LabelSeries>) -> String {
    let expanded = labels.map(LabelSeries::expand);
    let mut out = String::from("frame_index,score,label\n");
    for (i, v) in scores.values.iter().enumerate() {
        let label = match expanded.as_ref().and_then(|l| l.get(i)) {
            Some(&l) => u8::from(l).to_string(),
            None => String::new(),
        };
        let _ = writeln!(out, "{},{},{}", i + 1, v, label);
    }
    out
}

pub fn plot_svg(scores: &ScoreSeries, labels: Option<&LabelSeries>) -> String {
    let frames = scores.len().max(1);
    let top = scores.values.iter().copied().fold(1.0f64, f64::max);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |frame: f64| MARGIN + plot_w * (frame - 1.0) / (frames.max(2) - 1) as f64;
    let y = |score: f64| HEIGHT - MARGIN - plot_h * score / top;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(&scores.video_id));
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    if let Some(labels) = labels {
        for &(s, e) in &labels.anomalous_ranges {
            let _ = writeln!(
                svg,
                r##"<rect class="gt" data-start="{s}" data-end="{e}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#f4a6a6" fill-opacity="0.5"/>"##,
                x(s as f64),
                MARGIN,
                (x(e as f64) - x(s as f64)).max(1.0),
                plot_h
            );
        }
    }
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#333333"/>"##,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{:.2}" stroke="#333333"/>"##,
        HEIGHT - MARGIN
    );
    let points: Vec<String> = scores
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", x((i + 1) as f64), y(v)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline class="score" fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{:.2}" font-size="12">frame 1 .. {frames}</text>"#,
        HEIGHT - 12.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `<video>.csv`, `<video>.svg` and `<video>.segments.json` into `out_dir`.
pub fn emit_plot_data(
    scores: &ScoreSeries,
    labels: Option<&LabelSeries>,
    notes: &[SegmentNote],
    out_dir: &Path,
) -> Result<PlotFiles> {
    if scores.is_empty() {
        return Err(Error::Empty("score series to plot"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = file_stem_for(&scores.video_id);
    let files = PlotFiles {
        csv: out_dir.join(format!("{stem}.csv")),
        svg: out_dir.join(format!("{stem}.svg")),
        notes: out_dir.join(format!("{stem}.segments.json")),
    };
    write(&files.csv, &plot_csv(scores, labels))?;
    write(&files.svg, &plot_svg(scores, labels))?;
    write(&files.notes, &(serde_json::to_string_pretty(notes)? + "\n"))?;
    Ok(files)
}
