//! Seeded synthetic videos for desk-scale experiments.
//!
//! Each segment gets a majority ground-truth label and a content direction.
//! Without scene drift every label run shares one random content direction;
//! with drift the content follows a random walk over the whole video and
//! anomalous runs add an event direction on top. Embeddings are built from
//! that content:
//!
//! - vision: content + a label concept (anomalous or normal) + noise;
//! - full response text: the response's content + the concept named by its
//!   verdict + noise;
//! - description text: the response's content + noise (no verdict).
//!
//! Two independent corruption events model generation errors. A flipped
//! response describes the scene correctly but states the wrong verdict; a
//! corrupted response replaces the content with an unrelated direction while
//! keeping the verdict.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    segment_spans, write_embeddings, write_responses, EmbeddingBundle, LabelSeries, Matrix, SegmentResponse,
    VideoResponses,
};
use crate::error::{Error, Result};

// Weights of the generative model. The label concept is a faint cue in the
// vision embedding and a strong one in verdict-bearing response text.
const VISION_LABEL_WEIGHT: f64 = 0.1;
const RESPONSE_VERDICT_WEIGHT: f64 = 0.7;
const EVENT_WEIGHT: f64 = 0.8;

const NORMAL_DESCRIPTIONS: [&str; 6] = [
    "pedestrians walk along the street",
    "cars wait at the intersection",
    "a clerk arranges goods behind the counter",
    "people queue at the entrance",
    "an empty parking lot under street lights",
    "a cyclist passes the storefront",
];

const ANOMALOUS_DESCRIPTIONS: [&str; 6] = [
    "a man assaults another person near a car",
    "two people fight in front of the shop",
    "a fire breaks out and smoke fills the room",
    "a person breaks the window and steals goods",
    "a car crashes into a pole",
    "a man threatens the clerk with a weapon",
];

const UNRELATED_DESCRIPTIONS: [&str; 3] = [
    "the view is partly blocked by an object",
    "text overlays cover most of the frame",
    "the camera image is blurred",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub video_id: String,
    pub num_frames: usize,
    /// Segment interval `d`.
    pub interval: usize,
    pub dim: usize,
    #[serde(default)]
    pub anomalous_ranges: Vec<(usize, usize)>,
    /// Probability that a response states the wrong verdict.
    pub flip_prob: f64,
    /// Probability that a response describes unrelated content.
    pub corrupt_prob: f64,
    /// Scale of isotropic embedding noise.
    pub noise_scale: f64,
    /// Per-segment random-walk step of the scene content; 0 keeps one
    /// direction per label run.
    #[serde(default)]
    pub scene_drift: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !prob_ok(self.flip_prob) || !prob_ok(self.corrupt_prob) {
            return Err(Error::InvalidParameter(format!(
                "probabilities must lie in [0, 1], got flip {} and corrupt {}",
                self.flip_prob, self.corrupt_prob
            )));
        }
        if self.noise_scale.is_nan() || self.noise_scale < 0.0 || self.scene_drift.is_nan() || self.scene_drift < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise scale and drift must be non-negative, got {} and {}",
                self.noise_scale, self.scene_drift
            )));
        }
        if self.num_frames == 0 || self.interval == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter(
                "num_frames, interval and dim must be positive".into(),
            ));
        }
        LabelSeries::new(self.video_id.clone(), self.num_frames, self.anomalous_ranges.clone())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFixture {
    pub responses: VideoResponses,
    pub embeddings: EmbeddingBundle,
    pub labels: LabelSeries,
    /// Majority ground-truth label of each segment.
    pub segment_labels: Vec<bool>,
    pub flipped: Vec<bool>,
    pub corrupted: Vec<bool>,
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x / n).collect()
}

fn combine(parts: &[(f64, &[f64])]) -> Vec<f64> {
    let dim = parts[0].1.len();
    let mut out = vec![0.0; dim];
    for (w, v) in parts {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    out
}

fn noise(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    let s = scale / (dim as f64).sqrt();
    (0..dim).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn to_f32_row(v: &[f64]) -> Vec<f32> {
    let mut row: Vec<f32> = v.iter().map(|&x| x as f32).collect();
    if row.iter().all(|&x| x == 0.0) {
        row[0] = f32::MIN_POSITIVE;
    }
    row
}

/// Majority label of each span; ties count as normal.
fn majority_labels(labels: &LabelSeries, spans: &[(usize, usize)]) -> Vec<bool> {
    let frames = labels.expand();
    spans
        .iter()
        .map(|&(s, e)| {
            let positives = frames[s - 1..e].iter().filter(|&&l| l).count();
            2 * positives > e + 1 - s
        })
        .collect()
}

/// Generates one video. Identical `(spec, seed)` pairs give identical output.
pub fn generate_synthetic_fixture(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticFixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.dim;
    let labels = LabelSeries::new(spec.video_id.clone(), spec.num_frames, spec.anomalous_ranges.clone())?;
    let spans = segment_spans(spec.num_frames, spec.interval);
    let truth = majority_labels(&labels, &spans);
    let m = spans.len();

    let anomalous_concept = unit(&mut rng, dim);
    let normal_concept = unit(&mut rng, dim);
    let concept = |anomalous: bool| if anomalous { &anomalous_concept } else { &normal_concept };

    // Label runs: maximal blocks of equal majority label.
    let mut run_of = Vec::with_capacity(m);
    let mut runs = 0usize;
    for j in 0..m {
        if j > 0 && truth[j] != truth[j - 1] {
            runs += 1;
        }
        run_of.push(runs);
    }
    let run_dirs: Vec<Vec<f64>> = (0..=runs).map(|_| unit(&mut rng, dim)).collect();
    let event_dirs: Vec<Vec<f64>> = (0..=runs).map(|_| unit(&mut rng, dim)).collect();

    let mut content = Vec::with_capacity(m);
    let mut walk = unit(&mut rng, dim);
    for j in 0..m {
        let scene = if spec.scene_drift > 0.0 {
            if j > 0 {
                let step = unit(&mut rng, dim);
                walk = normalized(combine(&[(1.0, &walk), (spec.scene_drift, &step)]));
            }
            let event_weight = if truth[j] { EVENT_WEIGHT } else { 0.0 };
            normalized(combine(&[(1.0, &walk), (event_weight, &event_dirs[run_of[j]])]))
        } else {
            run_dirs[run_of[j]].clone()
        };
        content.push(scene);
    }

    let mut vision = Vec::with_capacity(m);
    let mut response_text = Vec::with_capacity(m);
    let mut description_text = Vec::with_capacity(m);
    let mut segments = Vec::with_capacity(m);
    let mut flipped = Vec::with_capacity(m);
    let mut corrupted = Vec::with_capacity(m);

    for j in 0..m {
        let flip = rng.random::<f64>() < spec.flip_prob;
        let corrupt = rng.random::<f64>() < spec.corrupt_prob;
        let verdict = truth[j] ^ flip;

        let v = combine(&[
            (1.0, &content[j]),
            (VISION_LABEL_WEIGHT, concept(truth[j])),
            (1.0, &noise(&mut rng, dim, spec.noise_scale)),
        ]);

        let hallucination = unit(&mut rng, dim);
        let said = if corrupt { hallucination } else { content[j].clone() };
        let r = combine(&[
            (1.0, &said),
            (RESPONSE_VERDICT_WEIGHT, concept(verdict)),
            (1.0, &noise(&mut rng, dim, spec.noise_scale)),
        ]);
        let t = combine(&[(1.0, &said), (1.0, &noise(&mut rng, dim, spec.noise_scale))]);

        let pick = rng.random_range(0..NORMAL_DESCRIPTIONS.len());
        let description = if corrupt {
            UNRELATED_DESCRIPTIONS[pick % UNRELATED_DESCRIPTIONS.len()]
        } else if verdict {
            ANOMALOUS_DESCRIPTIONS[pick]
        } else {
            NORMAL_DESCRIPTIONS[pick]
        };
        let marker = if verdict { "Anomalous scenes" } else { "Normal scenes" };

        vision.push(to_f32_row(&v));
        response_text.push(to_f32_row(&r));
        description_text.push(to_f32_row(&t));
        segments.push(SegmentResponse {
            video_id: spec.video_id.clone(),
            segment_index: j + 1,
            start_frame: spans[j].0,
            end_frame: spans[j].1,
            raw_text: format!("{marker}: {description}."),
        });
        flipped.push(flip);
        corrupted.push(corrupt);
    }

    let embeddings = EmbeddingBundle::new(
        spec.video_id.clone(),
        Matrix::from_rows(&vision)?,
        Matrix::from_rows(&response_text)?,
        Matrix::from_rows(&description_text)?,
    )?;
    Ok(SyntheticFixture {
        responses: VideoResponses::new(spec.video_id.clone(), segments)?,
        embeddings,
        labels,
        segment_labels: truth,
        flipped,
        corrupted,
    })
}

/// Recipe for a set of synthetic videos with seeded random layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub num_videos: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub interval: usize,
    pub dim: usize,
    /// Fraction of videos without any anomaly.
    pub normal_video_fraction: f64,
    /// Each anomalous video gets between 1 and this many anomalous ranges.
    pub max_anomalous_ranges: usize,
    /// Bounds on a single range's length as a fraction of the video.
    pub min_range_fraction: f64,
    pub max_range_fraction: f64,
    pub flip_prob: f64,
    pub corrupt_prob: f64,
    pub noise_scale: f64,
    pub scene_drift: f64,
    /// Explicit videos; when non-empty the random layout fields are ignored.
    pub videos: Vec<SyntheticSpec>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::locally_coherent()
    }
}

impl DatasetSpec {
    /// Label runs with their own content directions.
    pub fn locally_coherent() -> Self {
        Self {
            num_videos: 12,
            min_frames: 900,
            max_frames: 2400,
            interval: 30,
            dim: 64,
            normal_video_fraction: 0.25,
            max_anomalous_ranges: 2,
            min_range_fraction: 0.08,
            max_range_fraction: 0.3,
            flip_prob: 0.2,
            corrupt_prob: 0.1,
            noise_scale: 0.45,
            scene_drift: 0.0,
            videos: Vec::new(),
        }
    }

    /// Content drifting continuously across each video, independent of labels.
    pub fn scene_drift() -> Self {
        Self {
            scene_drift: 0.1,
            ..Self::locally_coherent()
        }
    }

    /// Per-video specs drawn from `seed`.
    pub fn video_specs(&self, seed: u64) -> Result<Vec<SyntheticSpec>> {
        if !self.videos.is_empty() {
            return Ok(self.videos.clone());
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::InvalidParameter(format!(
                "frame bounds {}..={} are invalid",
                self.min_frames, self.max_frames
            )));
        }
        if !(0.0 < self.min_range_fraction
            && self.min_range_fraction <= self.max_range_fraction
            && self.max_range_fraction <= 1.0)
        {
            return Err(Error::InvalidParameter(
                "range fractions must satisfy 0 < min <= max <= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let width = (self.num_videos.max(1) as f64).log10().floor() as usize + 1;
        let mut specs = Vec::with_capacity(self.num_videos);
        for v in 0..self.num_videos {
            let frames = rng.random_range(self.min_frames..=self.max_frames);
            let mut ranges = Vec::new();
            if rng.random::<f64>() >= self.normal_video_fraction {
                let count = rng.random_range(1..=self.max_anomalous_ranges.max(1));
                // Split the video into `count` equal slots, one range per slot.
                let slot = frames / count;
                for k in 0..count {
                    let frac = rng.random_range(self.min_range_fraction..=self.max_range_fraction);
                    let len = ((frames as f64 * frac) as usize).clamp(1, slot.max(1));
                    let start = k * slot + 1 + rng.random_range(0..=slot - len);
                    ranges.push((start, start + len - 1));
                }
            }
            specs.push(SyntheticSpec {
                video_id: format!("synth_{v:0width$}"),
                num_frames: frames,
                interval: self.interval,
                dim: self.dim,
                anomalous_ranges: ranges,
                flip_prob: self.flip_prob,
                corrupt_prob: self.corrupt_prob,
                noise_scale: self.noise_scale,
                scene_drift: self.scene_drift,
            });
        }
        Ok(specs)
    }

    pub fn generate(&self, seed: u64) -> Result<Vec<SyntheticFixture>> {
        self.video_specs(seed)?
            .iter()
            .enumerate()
            .map(|(i, spec)| generate_synthetic_fixture(spec, derive_seed(seed, i as u64)))
            .collect()
    }
}

impl DatasetSpec {
    /// Reads a spec from TOML, or from JSON when the file ends in `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct DatasetFiles {
    pub responses: PathBuf,
    pub embeddings: PathBuf,
    pub ground_truth: PathBuf,
}

/// Writes fixtures in the pipeline's input formats: `responses.jsonl`,
/// `embeddings/<video>.crvb` and a normalized `ground_truth.jsonl`.
pub fn write_dataset(fixtures: &[SyntheticFixture], out_dir: &Path) -> Result<DatasetFiles> {
    let files = DatasetFiles {
        responses: out_dir.join("responses.jsonl"),
        embeddings: out_dir.join("embeddings"),
        ground_truth: out_dir.join("ground_truth.jsonl"),
    };
    fs::create_dir_all(&files.embeddings).map_err(|e| Error::io(&files.embeddings, e))?;

    let mut responses = Vec::new();
    write_responses(&mut responses, fixtures.iter().map(|f| &f.responses))
        .map_err(|e| Error::io(&files.responses, e))?;
    fs::write(&files.responses, responses).map_err(|e| Error::io(&files.responses, e))?;

    let mut labels = String::new();
    for fx in fixtures {
        labels.push_str(&serde_json::to_string(&fx.labels)?);
        labels.push('\n');
        let name = format!("{}.crvb", fx.labels.video_id.replace(['/', '\\'], "_"));
        write_embeddings(files.embeddings.join(name), &fx.embeddings)?;
    }
    fs::write(&files.ground_truth, labels).map_err(|e| Error::io(&files.ground_truth, e))?;
    Ok(files)
}

/// Mixes a base seed with a video index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_all, FallbackPolicy};

    fn spec(flip: f64) -> SyntheticSpec {
        SyntheticSpec {
            video_id: "s".into(),
            num_frames: 6000,
            interval: 30,
            dim: 32,
            anomalous_ranges: vec![(1000, 2500), (4000, 4600)],
            flip_prob: flip,
            corrupt_prob: 0.1,
            noise_scale: 0.45,
            scene_drift: 0.0,
        }
    }

    #[test]
    fn zero_flip_matches_majority_labels() {
        let fx = generate_synthetic_fixture(&spec(0.0), 3).unwrap();
        let parsed = parse_all(fx.responses.segments(), FallbackPolicy::TreatNormal).unwrap();
        let truth: Vec<f64> = fx.segment_labels.iter().map(|&l| f64::from(u8::from(l))).collect();
        assert_eq!(parsed.decisions, truth);
        assert!(fx.segment_labels.iter().any(|&l| l));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic_fixture(&spec(0.2), 11).unwrap();
        let b = generate_synthetic_fixture(&spec(0.2), 11).unwrap();
        assert_eq!(a.embeddings.to_bytes(), b.embeddings.to_bytes());
        assert_eq!(a.responses, b.responses);
        let c = generate_synthetic_fixture(&spec(0.2), 12).unwrap();
        assert_ne!(a.embeddings.to_bytes(), c.embeddings.to_bytes());
    }

    #[test]
    fn empirical_flip_rate() {
        let mut s = spec(0.3);
        s.num_frames = 200 * 30;
        let mut total = 0usize;
        for seed in 0..20 {
            let fx = generate_synthetic_fixture(&s, seed).unwrap();
            let parsed = parse_all(fx.responses.segments(), FallbackPolicy::TreatNormal).unwrap();
            assert_eq!(parsed.decisions.len(), 200);
            let flips = parsed
                .decisions
                .iter()
                .zip(&fx.segment_labels)
                .filter(|(&d, &l)| (d == 1.0) != l)
                .count();
            let rate = flips as f64 / 200.0;
            assert!((rate - 0.3).abs() <= 0.08, "seed {seed}: rate {rate}");
            total += flips;
        }
        assert!((total as f64 / 4000.0 - 0.3).abs() <= 0.02);
    }

    #[test]
    fn bad_parameters_rejected() {
        let mut s = spec(1.5);
        assert!(generate_synthetic_fixture(&s, 0).is_err());
        s.flip_prob = 0.1;
        s.noise_scale = -1.0;
        assert!(generate_synthetic_fixture(&s, 0).is_err());
        s.noise_scale = 0.1;
        s.corrupt_prob = -0.1;
        assert!(generate_synthetic_fixture(&s, 0).is_err());
    }

    #[test]
    fn neighbours_closer_than_distant_segments() {
        let fx = generate_synthetic_fixture(&spec(0.0), 5).unwrap();
        let v = fx.embeddings.vision();
        let cos = |a: usize, b: usize| crate::clean::cosine_similarity(v.row(a), v.row(b)).unwrap();
        // Segments 40 and 41 share the first anomalous run; segment 5 is normal.
        assert!(fx.segment_labels[40] && fx.segment_labels[41] && !fx.segment_labels[5]);
        assert!(cos(40, 41) > cos(40, 5) + 0.3);
    }

    #[test]
    fn dataset_layouts_are_valid_and_seeded() {
        let ds = DatasetSpec::locally_coherent();
        let a = ds.video_specs(7).unwrap();
        assert_eq!(a, ds.video_specs(7).unwrap());
        assert_ne!(a, ds.video_specs(8).unwrap());
        for s in &a {
            s.validate().unwrap();
        }
        assert!(a.iter().any(|s| !s.anomalous_ranges.is_empty()));
    }

    #[test]
    fn written_dataset_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let ds = DatasetSpec {
            num_videos: 3,
            min_frames: 200,
            max_frames: 400,
            ..DatasetSpec::locally_coherent()
        };
        let fixtures = ds.generate(4).unwrap();
        let files = write_dataset(&fixtures, dir.path()).unwrap();
        let videos = super::super::load_responses(&files.responses).unwrap();
        assert_eq!(videos.len(), 3);
        let labels =
            super::super::load_ground_truth(&files.ground_truth, super::super::GroundTruthFormat::Normalized, None)
                .unwrap();
        for (fx, l) in fixtures.iter().zip(&labels) {
            assert_eq!(&fx.labels, l);
            let bundle = super::super::load_embeddings(files.embeddings.join(format!("{}.crvb", l.video_id))).unwrap();
            assert_eq!(bundle, fx.embeddings);
        }
    }

    #[test]
    fn spec_loads_from_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("spec.toml");
        fs::write(&toml_path, "num_videos = 2\nflip_prob = 0.3\n").unwrap();
        let spec = DatasetSpec::load(&toml_path).unwrap();
        assert_eq!((spec.num_videos, spec.flip_prob, spec.interval), (2, 0.3, 30));
        let json_path = dir.path().join("spec.json");
        fs::write(&json_path, r#"{"scene_drift": 0.1}"#).unwrap();
        assert_eq!(DatasetSpec::load(&json_path).unwrap(), DatasetSpec::scene_drift());
        fs::write(&toml_path, "colour = 1").unwrap();
        assert!(DatasetSpec::load(&toml_path).is_err());
    }
}
