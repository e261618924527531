//! Running the whole chain over a dataset, ablation sweeps and plot output.

pub mod ablation;
mod config;
pub mod plot;
mod run;

pub use ablation::{run_ablation, run_synthetic_ablation, AblationPlan, AblationReport, AblationRow, SweepSummary};
pub use config::{CleanConfig, OutputConfig, ParseConfig, PathsConfig, PipelineConfig};
pub use plot::{emit_plot_data, SegmentNote};
pub use run::{
    evaluate_outputs, load_inputs, load_scores, parse_scores_csv, process_video, run_pipeline, score_videos,
    scores_csv, validate_input, InputDigest, Manifest, RunArtifact, VideoInput, VideoOutput,
};
