//! Shared inputs for the criterion benchmarks.

use corevad_core::ingest::synth::DatasetSpec;
use corevad_core::pipeline::VideoInput;

/// A synthetic dataset wrapped as pipeline inputs.
pub fn synthetic_inputs(spec: &DatasetSpec, seed: u64) -> Vec<VideoInput> {
    spec.generate(seed)
        .expect("benchmark dataset spec is valid")
        .into_iter()
        .map(|fx| VideoInput {
            responses: fx.responses,
            embeddings: fx.embeddings,
            labels: Some(fx.labels),
        })
        .collect()
}
