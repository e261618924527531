//! Ablation sweeps: one metrics row per configuration, everything but the
//! swept setting held fixed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::config::PipelineConfig;
use super::run::{evaluate_outputs, score_videos, VideoInput};
use crate::clean::CleaningStrategy;
use crate::error::{Error, Result};
use crate::ingest::synth::DatasetSpec;
use crate::refine::Toggles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationPlan {
    /// No cleaning, global cleaning, local cleaning.
    CleaningTable,
    /// Cumulative refinement stages: none, +context, +smoothing, +position.
    ComponentTable,
    /// Local cleaning for every window size, then the whole video.
    LSweep,
}

impl FromStr for AblationPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cleaning_table" => Ok(Self::CleaningTable),
            "component_table" => Ok(Self::ComponentTable),
            "l_sweep" => Ok(Self::LSweep),
            other => Err(Error::InvalidParameter(format!("unknown ablation plan {other:?}"))),
        }
    }
}

impl fmt::Display for AblationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CleaningTable => "cleaning_table",
            Self::ComponentTable => "component_table",
            Self::LSweep => "l_sweep",
        })
    }
}

/// Label used for the whole-video row of an `l` sweep.
pub const L_ALL: &str = "l=all";

pub fn l_label(l: usize) -> String {
    format!("l={l}")
}

/// The configurations of a plan, in report order. `max_segments` bounds the
/// `l` sweep.
pub fn plan_configs(base: &PipelineConfig, plan: AblationPlan, max_segments: usize) -> Vec<(String, PipelineConfig)> {
    let with = |f: &dyn Fn(&mut PipelineConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match plan {
        AblationPlan::CleaningTable => [CleaningStrategy::None, CleaningStrategy::Global, CleaningStrategy::Lrc]
            .into_iter()
            .map(|s| (s.to_string(), with(&|c| c.clean.strategy = s)))
            .collect(),
        AblationPlan::ComponentTable => {
            let rows = [
                ("none", false, false, false),
                ("context", true, false, false),
                ("context+smoothing", true, true, false),
                ("context+smoothing+position", true, true, true),
            ];
            rows.into_iter()
                .map(|(label, context_refine, smoothing, position_weight)| {
                    let toggles = Toggles {
                        context_refine,
                        smoothing,
                        position_weight,
                    };
                    (label.to_owned(), with(&|c| c.refine.toggles = toggles))
                })
                .collect()
        }
        AblationPlan::LSweep => {
            let mut rows: Vec<_> = (0..max_segments.max(1))
                .map(|l| {
                    (
                        l_label(l),
                        with(&|c| {
                            c.clean.strategy = CleaningStrategy::Lrc;
                            c.clean.l = l;
                        }),
                    )
                })
                .collect();
            rows.push((L_ALL.to_owned(), with(&|c| c.clean.strategy = CleaningStrategy::Global)));
            rows
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub auc_roc: f64,
    pub average_precision: f64,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub plan: AblationPlan,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, label: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

pub fn run_ablation(base: &PipelineConfig, inputs: &[VideoInput], plan: AblationPlan) -> Result<AblationReport> {
    let max_segments = inputs.iter().map(|i| i.responses.num_segments()).max().unwrap_or(0);
    let rows = plan_configs(base, plan, max_segments)
        .into_iter()
        .map(|(label, config)| {
            let outputs = score_videos(inputs, &config)?;
            let metrics = evaluate_outputs(inputs, &outputs)
                .ok_or_else(|| Error::UndefinedMetric("ablation inputs carry no ground truth".into()))??;
            Ok(AblationRow {
                label,
                auc_roc: metrics.auc_roc,
                average_precision: metrics.average_precision,
                config,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { plan, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub mean_auc_roc: f64,
    pub mean_average_precision: f64,
    pub auc_roc: Vec<f64>,
}

/// Means over synthetic datasets, one per seed.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub plan: AblationPlan,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<28} {:>10} {:>10}\n", self.plan, "AUC(%)", "AP(%)");
        for row in &self.rows {
            out.push_str(&format!(
                "{:<28} {:>10.2} {:>10.2}\n",
                row.label,
                100.0 * row.mean_auc_roc,
                100.0 * row.mean_average_precision
            ));
        }
        out
    }
}

/// Runs `plan` on a freshly generated dataset for every seed and averages
/// rows by label. `l` sweeps are truncated to the window sizes every seed
/// reaches, plus the whole-video row.
pub fn run_synthetic_ablation(
    base: &PipelineConfig,
    dataset: &DatasetSpec,
    plan: AblationPlan,
    seeds: &[u64],
) -> Result<SweepSummary> {
    if seeds.is_empty() {
        return Err(Error::Empty("no seeds for the sweep"));
    }
    let reports = seeds
        .par_iter()
        .map(|&seed| {
            let inputs: Vec<VideoInput> = dataset
                .generate(seed)?
                .into_iter()
                .map(|fx| VideoInput {
                    responses: fx.responses,
                    embeddings: fx.embeddings,
                    labels: Some(fx.labels),
                })
                .collect();
            let mut config = base.clone();
            config.seed = seed;
            run_ablation(&config, &inputs, plan)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut collected: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for report in &reports {
        for row in &report.rows {
            if !collected.contains_key(&row.label) {
                order.push(row.label.clone());
            }
            let entry = collected.entry(row.label.clone()).or_default();
            entry.0.push(row.auc_roc);
            entry.1.push(row.average_precision);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rows = order
        .into_iter()
        .filter_map(|label| {
            let (aucs, aps) = collected.remove(&label)?;
            (aucs.len() == reports.len()).then(|| SweepRow {
                mean_auc_roc: mean(&aucs),
                mean_average_precision: mean(&aps),
                auc_roc: aucs,
                label,
            })
        })
        .collect();
    Ok(SweepSummary {
        plan,
        seeds: seeds.to_vec(),
        rows,
    })
}
