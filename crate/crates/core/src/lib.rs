//! Training-free video anomaly scoring from segment-level vision-language
//! responses.
//!
//! Inputs are per-segment generated responses plus vision and text embeddings
//! in a shared space. The crate parses each response into a verdict and a
//! description, cleans noisy responses by local vision-text alignment, turns
//! the cleaned verdicts into frame scores with similarity-weighted context,
//! Gaussian smoothing and position weighting, and evaluates the result with
//! frame-level AUC-ROC and AP.

pub mod clean;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod parse;
pub mod pipeline;
pub mod refine;

pub use clean::{clean_global, clean_lrc, cosine_similarity, CleaningResult, CleaningStrategy};
pub use error::{Error, ErrorKind, Result};
pub use evaluate::{aggregate_dataset, auc_roc, average_precision, DatasetMetrics};
pub use ingest::{EmbeddingBundle, LabelSeries, SegmentResponse, ValidationReport, VideoResponses};
pub use parse::{parse_all, parse_decision, Decision, DecisionParse, FallbackPolicy};
pub use pipeline::{run_ablation, run_pipeline, AblationPlan, PipelineConfig, RunArtifact};
pub use refine::{refine_chain, RefineParams, ScoreSeries};
