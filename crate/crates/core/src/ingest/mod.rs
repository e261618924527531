//! Loading, validating and synthesizing pipeline inputs.

mod embeddings;
mod ground_truth;
mod responses;
pub mod synth;
mod validate;

pub use embeddings::{
    load_embeddings, write_embeddings, CosineTable, EmbeddingBundle, Matrix, Section, MAGIC, VERSION,
};
pub use ground_truth::{
    load_ground_truth, parse_ground_truth, video_stem, FrameCounts, GroundTruthFormat, LabelSeries,
};
pub use responses::{load_responses, parse_responses, segment_spans, write_responses, SegmentResponse, VideoResponses};
pub use synth::{generate_synthetic_fixture, write_dataset, DatasetSpec, SyntheticFixture, SyntheticSpec};
pub use validate::{validate_bundle, Issue, Severity, ValidationReport};
