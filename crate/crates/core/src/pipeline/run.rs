use std::fmt;

use crate::layout::{serialize_bev_layout, BevLayout, CotRecord, Room, Scene3D};
use crate::reward::{ratio_vector, RatioVector, VerdictMatrix};

use super::{
    assemble_scene, default_assets, run_alignment_loop, AlignmentOutcome, AssetRecord, Generation, Pipeline,
    PipelineError, SceneManifest,
};

/// A pipeline error tagged with the stage that raised it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: &'static str,
    pub error: PipelineError,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

fn at<T>(stage: &'static str, r: Result<T, PipelineError>) -> Result<T, StageError> {
    r.map_err(|error| StageError { stage, error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRun {
    pub generation: Generation,
    pub initial: Scene3D,
    pub alignment: AlignmentOutcome,
    pub assets: Vec<AssetRecord>,
    pub manifest: SceneManifest,
    /// Top-down render of the final scene.
    pub bev_png: Vec<u8>,
}

/// Text to scene: generate, lift, align, assemble. Without `assets` the
/// evaluators are told none exist and the final scene gets stand-in assets
/// at scale 1.
pub fn generate_scene(
    pipeline: &Pipeline<'_>,
    description: &str,
    room: &Room,
    assets: Option<&[AssetRecord]>,
    max_iters: usize,
) -> Result<SceneRun, StageError> {
    let generation = at("generate_bev", pipeline.generate_bev(description, room))?;
    let initial = at("lift_to_3d", pipeline.lift_to_3d(description, &generation.layout, room))?;
    let alignment = run_alignment_loop(
        pipeline,
        description,
        initial.clone(),
        generation.cot.clone(),
        assets.unwrap_or_default(),
        max_iters,
    );
    let assets = match assets {
        Some(a) => a.to_vec(),
        None => default_assets(&alignment.scene),
    };
    let manifest = at("assemble", assemble_scene(&alignment.scene, &assets))?;
    let bev_png = at("render", pipeline.scene_image(&alignment.scene).map_err(Into::into))?;
    Ok(SceneRun {
        generation,
        initial,
        alignment,
        assets,
        manifest,
        bev_png,
    })
}

/// Stand-in reasoning record for layouts that come without one.
pub fn placeholder_cot(description: &str, layout: &BevLayout) -> Result<CotRecord, PipelineError> {
    let note = "(not available)";
    let prompt = if description.trim().is_empty() { "(no description)" } else { description };
    Ok(CotRecord::new(prompt, note, note, note, serialize_bev_layout(layout))?)
}

/// Training-mode evaluation of one layout: verdicts and the seven ratios.
pub fn score_layout(
    pipeline: &Pipeline<'_>,
    description: &str,
    layout: &BevLayout,
    room: &Room,
    cot: &CotRecord,
) -> Result<(VerdictMatrix, RatioVector), PipelineError> {
    let image = crate::render::rasterize_bev(layout, room, &pipeline.config().raster)?;
    let verdicts = pipeline
        .evaluate_layout(description, layout, room, &cot.transcript(), image)
        .into_verdicts()?;
    let ratios = ratio_vector(&verdicts, layout)?;
    Ok((verdicts, ratios))
}
