use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::layout::{BevLayout, CotRecord, Room};
use crate::pipeline::{Pipeline, PipelineError};
use crate::render::rasterize_bev;
use crate::reward::{ratio_vector, reward_report, RatioVector, RewardReport};

use super::DatagenError;

pub const BATCH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: usize,
    pub seed: u64,
    pub cot: CotRecord,
    pub layout: BevLayout,
    pub ratios: RatioVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

/// The surviving samples for one prompt, each with its seven ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub version: u32,
    pub prompt_id: String,
    pub description: String,
    pub room: Room,
    pub samples: Vec<Sample>,
    pub failures: Vec<SampleFailure>,
}

impl SampleBatch {
    pub fn ratios(&self) -> Vec<RatioVector> {
        self.samples.iter().map(|s| s.ratios).collect()
    }

    /// Entropy weights and rewards computed from this batch alone.
    pub fn reward_report(&self) -> Result<RewardReport, DatagenError> {
        Ok(reward_report(&self.ratios())?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("batch serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DatagenError> {
        let batch: Self = serde_json::from_str(text).map_err(|e| DatagenError::Schema(e.to_string()))?;
        if batch.version != BATCH_VERSION {
            return Err(DatagenError::Schema(format!("unsupported batch version {}", batch.version)));
        }
        Ok(batch)
    }

    pub fn load(path: &Path) -> Result<Self, DatagenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DatagenError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn sample_one(
    pipeline: &Pipeline<'_>,
    description: &str,
    room: &Room,
    seed: u64,
) -> Result<(CotRecord, BevLayout, RatioVector), PipelineError> {
    let g = pipeline.generate_bev_with(description, room, None, Some(seed))?;
    let image = rasterize_bev(&g.layout, room, &pipeline.config().raster)?;
    let verdicts = pipeline
        .evaluate_layout(description, &g.layout, room, &g.cot.transcript(), image)
        .into_verdicts()?;
    let ratios = ratio_vector(&verdicts, &g.layout)?;
    Ok((g.cot, g.layout, ratios))
}

type SampleResult = Result<(CotRecord, BevLayout, RatioVector), PipelineError>;

/// Draws `t` layouts with seeds `base_seed..base_seed + t`, evaluates each
/// and records per-sample failures. Up to `parallel` samples run at once.
pub fn sample_layout_batch(
    pipeline: &Pipeline<'_>,
    prompt_id: &str,
    description: &str,
    room: &Room,
    t: usize,
    base_seed: u64,
    parallel: usize,
) -> Result<SampleBatch, DatagenError> {
    if t < 2 {
        return Err(DatagenError::TooFewSamples(t));
    }
    let results: Mutex<Vec<Option<SampleResult>>> =
        Mutex::new(vec![None; t]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..parallel.clamp(1, t) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= t {
                    break;
                }
                let r = sample_one(pipeline, description, room, base_seed + i as u64);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    for (index, r) in results.into_iter().enumerate() {
        let seed = base_seed + index as u64;
        match r.expect("every index is processed") {
            Ok((cot, layout, ratios)) => samples.push(Sample {
                index,
                seed,
                cot,
                layout,
                ratios,
            }),
            Err(e) => {
                log::warn!("sample {index} (seed {seed}) failed: {e}");
                failures.push(SampleFailure {
                    index,
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    if samples.len() < 2 {
        return Err(DatagenError::BatchCollapsed {
            survivors: samples.len(),
            requested: t,
        });
    }
    Ok(SampleBatch {
        version: BATCH_VERSION,
        prompt_id: prompt_id.to_string(),
        description: description.to_string(),
        room: *room,
        samples,
        failures,
    })
}
