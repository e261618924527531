use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use super::plot::{emit_plot_data, SegmentNote};
use crate::clean::{clean, CleaningResult};
use crate::error::{Error, Result};
use crate::evaluate::{aggregate_dataset, DatasetMetrics};
use crate::ingest::{
    load_embeddings, load_ground_truth, parse_responses, validate_bundle, EmbeddingBundle, FrameCounts, LabelSeries,
    Severity, ValidationReport, VideoResponses,
};
use crate::parse::parse_all;
use crate::refine::{refine_chain, ScoreSeries};

/// Everything the pipeline needs for one video.
#[derive(Debug, Clone)]
pub struct VideoInput {
    pub responses: VideoResponses,
    pub embeddings: EmbeddingBundle,
    pub labels: Option<LabelSeries>,
}

impl VideoInput {
    pub fn video_id(&self) -> &str {
        self.responses.video_id()
    }

    pub fn num_frames(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(self.responses.covered_frames(), |l| l.num_frames)
    }
}

#[derive(Debug, Clone)]
pub struct VideoOutput {
    pub scores: ScoreSeries,
    pub cleaning: CleaningResult,
    pub report: ValidationReport,
}

pub fn validate_input(input: &VideoInput, config: &PipelineConfig) -> ValidationReport {
    let mut report = validate_bundle(&input.responses, &input.embeddings, input.labels.as_ref());
    report.check_interval(&input.responses, config.d);
    report
}

/// Parse, clean and refine one video.
pub fn process_video(input: &VideoInput, config: &PipelineConfig) -> Result<VideoOutput> {
    let report = validate_input(input, config);
    if report.is_fatal {
        return Err(Error::ValidationFailed {
            video_id: report.video_id.clone(),
            summary: report.summary(),
        });
    }
    let parsed = parse_all(input.responses.segments(), config.parse.fallback)?;
    let cleaning = clean(config.clean.strategy, config.clean.l, &parsed, &input.embeddings)?;
    let scores = refine_chain(
        &cleaning,
        &input.embeddings,
        &config.refine,
        &input.responses,
        input.num_frames(),
    )?;
    Ok(VideoOutput {
        scores,
        cleaning,
        report,
    })
}

/// Processes videos in parallel; the output order follows `inputs`.
pub fn score_videos(inputs: &[VideoInput], config: &PipelineConfig) -> Result<Vec<VideoOutput>> {
    config.validate()?;
    let work = || inputs.par_iter().map(|i| process_video(i, config)).collect();
    if config.workers == 0 {
        return work();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(work)
}

/// Pooled metrics over the videos that carry labels; `None` if none do.
pub fn evaluate_outputs(inputs: &[VideoInput], outputs: &[VideoOutput]) -> Option<Result<DatasetMetrics>> {
    let pairs: Vec<(ScoreSeries, LabelSeries)> = inputs
        .iter()
        .zip(outputs)
        .filter_map(|(i, o)| i.labels.clone().map(|l| (o.scores.clone(), l)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    Some(aggregate_dataset(&pairs))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub role: &'static str,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub videos: Vec<String>,
    pub validation: Vec<ValidationReport>,
}

/// Scores, metrics and provenance of one run.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub scores: Vec<ScoreSeries>,
    pub metrics: Option<DatasetMetrics>,
    pub config: PipelineConfig,
    pub manifest: Manifest,
}

fn digest(role: &'static str, path: &Path) -> Result<(InputDigest, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let d = InputDigest {
        role,
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((d, bytes))
}

fn embedding_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "crvb"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no .crvb files in directory"),
        ));
    }
    Ok(files)
}

/// Reads responses, embeddings and (optionally) ground truth named in the
/// config and pairs them by video.
pub fn load_inputs(config: &PipelineConfig) -> Result<(Vec<VideoInput>, Vec<InputDigest>)> {
    let paths = &config.paths;
    let responses_path = paths
        .responses
        .as_deref()
        .ok_or_else(|| Error::Config("paths.responses is not set".into()))?;
    let embeddings_path = paths
        .embeddings
        .as_deref()
        .ok_or_else(|| Error::Config("paths.embeddings is not set".into()))?;

    let mut digests = Vec::new();
    let (d, bytes) = digest("responses", responses_path)?;
    digests.push(d);
    let text = String::from_utf8(bytes).map_err(|e| Error::MalformedLine {
        path: responses_path.to_path_buf(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let videos = parse_responses(&text, responses_path)?;

    let mut bundles = BTreeMap::new();
    for file in embedding_files(embeddings_path)? {
        let (d, _) = digest("embeddings", &file)?;
        digests.push(d);
        let bundle = load_embeddings(&file)?;
        if bundles.insert(bundle.video_id().to_owned(), bundle).is_some() {
            return Err(Error::Config(format!(
                "two embedding files for one video ({})",
                file.display()
            )));
        }
    }

    let mut labels: BTreeMap<String, LabelSeries> = BTreeMap::new();
    if let Some(gt) = paths.ground_truth.as_deref() {
        let (d, _) = digest("ground_truth", gt)?;
        digests.push(d);
        let counts: FrameCounts = videos
            .iter()
            .map(|v| (v.video_id().to_owned(), v.covered_frames()))
            .collect();
        for series in load_ground_truth(gt, paths.gt_format, Some(&counts))? {
            labels.insert(series.video_id.clone(), series);
        }
    }

    let mut inputs = Vec::with_capacity(videos.len());
    for responses in videos {
        let id = responses.video_id().to_owned();
        let embeddings = bundles.remove(&id).ok_or_else(|| Error::ValidationFailed {
            video_id: id.clone(),
            summary: "no embeddings for this video".into(),
        })?;
        inputs.push(VideoInput {
            labels: labels.remove(&id),
            responses,
            embeddings,
        });
    }
    if let Some(extra) = bundles.keys().next() {
        return Err(Error::ValidationFailed {
            video_id: extra.clone(),
            summary: "embeddings present but no responses".into(),
        });
    }
    Ok((inputs, digests))
}

/// Frame scores as `frame_index,score` CSV.
pub fn scores_csv(scores: &ScoreSeries) -> String {
    let mut out = String::from("frame_index,score\n");
    for (i, v) in scores.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    out
}

/// Reads a `frame_index,score` CSV back; frames must run 1, 2, ... in order.
pub fn parse_scores_csv(text: &str, video_id: &str, origin: &Path) -> Result<ScoreSeries> {
    let bad = |line: usize, message: String| Error::MalformedLine {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header_ok = reader
        .headers()
        .is_ok_and(|h| h.get(0) == Some("frame_index") && h.get(1) == Some("score"));
    if !header_ok {
        return Err(bad(1, "expected a frame_index,score header".into()));
    }
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let frame: usize = record
            .get(0)
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| bad(line, format!("bad frame index in {record:?}")))?;
        let score = record
            .get(1)
            .and_then(|f| f.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(line, format!("bad score in {record:?}")))?;
        if frame != values.len() + 1 {
            return Err(bad(line, format!("expected frame {}, found {frame}", values.len() + 1)));
        }
        values.push(score);
    }
    if values.is_empty() {
        return Err(bad(1, "no score rows".into()));
    }
    Ok(ScoreSeries::frame(video_id, values))
}

/// Loads one score CSV, or every `.csv` in a directory, ordered by file name.
/// Each video id is its file stem.
pub fn load_scores(path: &Path) -> Result<Vec<ScoreSeries>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::Empty("no score files"));
    }
    files
        .iter()
        .map(|file| {
            let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
            let id = file
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            parse_scores_csv(&text, &id, file)
        })
        .collect()
}

pub(crate) fn file_stem_for(video_id: &str) -> String {
    video_id
        .chars()
        .map(|c| if matches!(c, '/' | '\\' | ':' | '\0') { '_' } else { c })
        .collect()
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs the configured pipeline end to end and writes the artifact to
/// `paths.out` when set:
///
/// - `scores/<video>.csv`
/// - `metrics.json` (only with ground truth)
/// - `config.toml`, the resolved configuration
/// - `manifest.json`, input digests and validation findings
///
/// Scores are written before metrics are computed, so an undefined metric
/// still leaves the scores on disk.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunArtifact> {
    config.validate()?;
    let (inputs, digests) = load_inputs(config)?;
    let outputs = score_videos(&inputs, config)?;

    let mut validation: Vec<ValidationReport> = outputs.iter().map(|o| o.report.clone()).collect();
    if config.paths.ground_truth.is_some() {
        for (input, report) in inputs.iter().zip(validation.iter_mut()) {
            if input.labels.is_none() {
                report.push(
                    Severity::Warning,
                    "missing-ground-truth",
                    "video has no ground-truth entry",
                );
            }
        }
    }
    let manifest = Manifest {
        tool: "corevad",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        inputs: digests,
        videos: inputs.iter().map(|i| i.video_id().to_owned()).collect(),
        validation,
    };
    let scores: Vec<ScoreSeries> = outputs.iter().map(|o| o.scores.clone()).collect();

    if let Some(out) = config.paths.out.as_deref() {
        for s in &scores {
            write(
                &out.join("scores").join(format!("{}.csv", file_stem_for(&s.video_id))),
                scores_csv(s),
            )?;
        }
        write(&out.join("config.toml"), config.to_toml_string())?;
        write(
            &out.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        if config.output.plots {
            let plot_dir = out.join("plots");
            for (input, output) in inputs.iter().zip(&outputs) {
                let notes = SegmentNote::from_cleaning(&input.responses, &output.cleaning);
                emit_plot_data(&output.scores, input.labels.as_ref(), &notes, &plot_dir)?;
            }
        }
    }

    let metrics = match evaluate_outputs(&inputs, &outputs) {
        None if config.paths.ground_truth.is_some() => {
            return Err(Error::Config("ground truth matched none of the videos".into()));
        }
        None => None,
        Some(m) => Some(m?),
    };
    if let (Some(out), Some(m)) = (config.paths.out.as_deref(), metrics.as_ref()) {
        write(&out.join("metrics.json"), serde_json::to_string_pretty(m)? + "\n")?;
    }

    Ok(RunArtifact {
        scores,
        metrics,
        config: config.clone(),
        manifest,
    })
}
