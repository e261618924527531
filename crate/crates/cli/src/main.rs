use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corevad_core::evaluate::aggregate_dataset;
use corevad_core::ingest::synth::DatasetSpec;
use corevad_core::ingest::{
    load_ground_truth, load_responses, write_dataset, FrameCounts, GroundTruthFormat, LabelSeries,
};
use corevad_core::pipeline::{
    emit_plot_data, load_inputs, load_scores, run_ablation, run_synthetic_ablation, SegmentNote,
};
use corevad_core::{parse_all, AblationPlan, Error, ErrorKind, PipelineConfig, Result};

#[derive(Debug, Parser)]
#[command(
    name = "corevad",
    version,
    about = "Score and evaluate video anomaly detection from segment responses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every video and write the run artifact.
    Run(RunArgs),
    /// Run an ablation plan on synthetic datasets or on the configured inputs.
    Ablate(AblateArgs),
    /// Generate a synthetic dataset in the pipeline's input formats.
    Synth(SynthArgs),
    /// Evaluate existing score CSVs against ground truth.
    Eval(EvalArgs),
    /// Write plot data (CSV, SVG, segment notes) for one score CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set refine.tau=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item:?} is not KEY=VALUE")))?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    responses: Option<PathBuf>,
    /// A `.crvb` file or a directory of them.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    gt_format: Option<GroundTruthFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write plot data under `<out>/plots`.
    #[arg(long)]
    plots: bool,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    plan: AblationPlan,
    /// Number of synthetic datasets (seeds 0..N). Without it, and with
    /// `paths.responses` configured, the plan runs on the configured inputs.
    #[arg(long)]
    seeds: Option<u64>,
    /// Synthetic dataset spec (TOML or JSON); defaults depend on the plan.
    #[arg(long)]
    synth_spec: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Dataset spec (TOML or JSON); the locally coherent default when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// A score CSV or a directory of them, one per video, named `<video>.csv`.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = GroundTruthFormat::Normalized)]
    gt_format: GroundTruthFormat,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, default_value_t = GroundTruthFormat::Normalized)]
    gt_format: GroundTruthFormat,
    /// Responses file supplying the segment descriptions.
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::UndefinedMetric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Ablate(args) => ablate(args),
        Command::Synth(args) => synth(args),
        Command::Eval(args) => eval(args),
        Command::Plot(args) => plot(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = args.config.resolve()?;
    let paths = &mut config.paths;
    paths.responses = args.responses.or(paths.responses.take());
    paths.embeddings = args.embeddings.or(paths.embeddings.take());
    paths.ground_truth = args.gt.or(paths.ground_truth.take());
    paths.out = args.out.or(paths.out.take());
    if let Some(format) = args.gt_format {
        paths.gt_format = format;
    }
    config.output.plots |= args.plots;
    config.validate()?;

    let artifact = corevad_core::run_pipeline(&config)?;
    for report in &artifact.manifest.validation {
        for issue in &report.issues {
            eprintln!(
                "{}: {:?} {}: {}",
                report.video_id, issue.severity, issue.code, issue.message
            );
        }
    }
    match &artifact.metrics {
        Some(m) => println!(
            "{} videos, {} frames: AUC-ROC {:.4}, AP {:.4}",
            artifact.scores.len(),
            m.num_frames,
            m.auc_roc,
            m.average_precision
        ),
        None => println!(
            "{} videos scored; no ground truth, metrics skipped",
            artifact.scores.len()
        ),
    }
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let on_inputs = args.seeds.is_none() && config.paths.responses.is_some();
    let output = if on_inputs {
        let (inputs, _) = load_inputs(&config)?;
        let report = run_ablation(&config, &inputs, args.plan)?;
        if args.json {
            serde_json::to_string_pretty(&report)?
        } else {
            let mut table = format!("{:<28} {:>10} {:>10}\n", args.plan, "AUC(%)", "AP(%)");
            for row in &report.rows {
                table.push_str(&format!(
                    "{:<28} {:>10.2} {:>10.2}\n",
                    row.label,
                    100.0 * row.auc_roc,
                    100.0 * row.average_precision
                ));
            }
            table
        }
    } else {
        let dataset = match &args.synth_spec {
            Some(path) => DatasetSpec::load(path)?,
            None if args.plan == AblationPlan::LSweep => DatasetSpec::scene_drift(),
            None => DatasetSpec::locally_coherent(),
        };
        let seeds: Vec<u64> = (0..args.seeds.unwrap_or(20)).collect();
        let summary = run_synthetic_ablation(&config, &dataset, args.plan, &seeds)?;
        if args.json {
            serde_json::to_string_pretty(&summary)?
        } else {
            summary.to_table()
        }
    };
    println!("{}", output.trim_end());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => DatasetSpec::load(path)?,
        None => DatasetSpec::locally_coherent(),
    };
    let fixtures = spec.generate(args.seed)?;
    let files = write_dataset(&fixtures, &args.out)?;
    println!(
        "{} videos: {}, {}, {}",
        fixtures.len(),
        files.responses.display(),
        files.embeddings.display(),
        files.ground_truth.display()
    );
    Ok(())
}

fn labels_for(gt: &Path, format: GroundTruthFormat, counts: &FrameCounts) -> Result<BTreeMap<String, LabelSeries>> {
    Ok(load_ground_truth(gt, format, Some(counts))?
        .into_iter()
        .map(|s| (s.video_id.clone(), s))
        .collect())
}

fn eval(args: EvalArgs) -> Result<()> {
    let scores = load_scores(&args.scores)?;
    let counts: FrameCounts = scores.iter().map(|s| (s.video_id.clone(), s.len())).collect();
    let mut labels = labels_for(&args.gt, args.gt_format, &counts)?;
    let mut pairs = Vec::with_capacity(scores.len());
    for series in scores {
        let label = labels.remove(&series.video_id).ok_or_else(|| Error::ValidationFailed {
            video_id: series.video_id.clone(),
            summary: "no ground-truth entry for this score file".into(),
        })?;
        pairs.push((series, label));
    }
    let metrics = aggregate_dataset(&pairs)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let mut all = load_scores(&args.scores)?;
    if all.len() != 1 {
        return Err(Error::Config("plot takes a single score CSV".into()));
    }
    let scores = all.remove(0);
    let labels = match &args.gt {
        Some(gt) => {
            let counts = FrameCounts::from([(scores.video_id.clone(), scores.len())]);
            let mut labels = labels_for(gt, args.gt_format, &counts)?;
            Some(labels.remove(&scores.video_id).ok_or_else(|| Error::ValidationFailed {
                video_id: scores.video_id.clone(),
                summary: "no ground-truth entry for this score file".into(),
            })?)
        }
        None => None,
    };
    let mut notes = Vec::new();
    if let Some(path) = &args.responses {
        if let Some(video) = load_responses(path)?
            .into_iter()
            .find(|v| v.video_id() == scores.video_id)
        {
            let parsed = parse_all(video.segments(), Default::default())?;
            notes = video
                .segments()
                .iter()
                .zip(parsed.descriptions)
                .map(|(seg, description)| SegmentNote {
                    segment_index: seg.segment_index,
                    start_frame: seg.start_frame,
                    end_frame: seg.end_frame,
                    description,
                })
                .collect();
        }
    }
    let files = emit_plot_data(&scores, labels.as_ref(), &notes, &args.out)?;
    println!(
        "{}\n{}\n{}",
        files.csv.display(),
        files.svg.display(),
        files.notes.display()
    );
    Ok(())
}
