//! Inference path: footprint generation, lifting to 3D, evaluation, the
//! asset-layout alignment loop and final scene assembly.
//!
//! Every stage talks to models through a single [`Oracle`]; requests carry
//! their [`ModelRole`] so one gateway can route all of them.

mod align;
mod assemble;
mod feedback;
pub mod prompts;
mod run;
mod stages;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::gateway::{DecodeParams, GatewayConfig, GatewayError, ModelRole, Oracle};
use crate::layout::{LayoutError, Scene3D};
use crate::render::{RasterConfig, RenderError};
use crate::reward::RewardError;

pub use align::{run_alignment_loop, AlignmentOutcome, AlignmentState, HistoryEntry};
pub use assemble::{assemble_scene, default_assets, AssetRecord, ManifestObject, SceneManifest, MANIFEST_VERSION};
pub use feedback::{Aspect, Feedback, ProposedValues, Suggestion};
pub use run::{generate_scene, placeholder_cot, score_layout, SceneRun, StageError};
pub use stages::{Evaluation, EvaluatorKind, Generation, Revision};

/// Attempts made by the footprint generator before giving up.
pub const GENERATION_ATTEMPTS: usize = 3;
pub const DEFAULT_MAX_ITERS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("scene description is empty")]
    EmptyDescription,
    #[error("generator output rejected after {attempts} attempts: {last}")]
    GenerationRejected { attempts: usize, last: String },
    #[error("lifting changed the footprint of object {0}")]
    FootprintMutated(usize),
    #[error("{objects} objects but {assets} assets")]
    AssetCountMismatch { objects: usize, assets: usize },
    #[error("asset {index} has a non-positive native extent")]
    NonpositiveExtent { index: usize },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Produces the image shown to the spatial evaluator for a scene.
pub type SceneImager = Arc<dyn Fn(&Scene3D) -> Result<Vec<u8>, RenderError> + Send + Sync>;

#[derive(Clone)]
pub struct PipelineConfig {
    pub decode: BTreeMap<ModelRole, DecodeParams>,
    pub raster: RasterConfig,
    pub max_iters: usize,
    pub generation_attempts: usize,
    /// Replaces the top-down rasterization as evaluator input when set.
    pub imager: Option<SceneImager>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            decode: BTreeMap::new(),
            raster: RasterConfig::default(),
            max_iters: DEFAULT_MAX_ITERS,
            generation_attempts: GENERATION_ATTEMPTS,
            imager: None,
        }
    }
}

impl std::fmt::Debug for PipelineConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineConfig")
            .field("decode", &self.decode)
            .field("raster", &self.raster)
            .field("max_iters", &self.max_iters)
            .field("generation_attempts", &self.generation_attempts)
            .field("imager", &self.imager.is_some())
            .finish()
    }
}

impl PipelineConfig {
    /// Decode parameters from each configured role.
    pub fn from_gateway(config: &GatewayConfig) -> Self {
        Self {
            decode: config.roles.iter().map(|(r, c)| (*r, c.decode())).collect(),
            ..Self::default()
        }
    }

    pub fn decode(&self, role: ModelRole) -> DecodeParams {
        self.decode.get(&role).copied().unwrap_or_default()
    }
}

/// Stage runner bound to one oracle.
pub struct Pipeline<'a> {
    oracle: &'a dyn Oracle,
    config: PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(oracle: &'a dyn Oracle, config: PipelineConfig) -> Self {
        Self { oracle, config }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn oracle(&self) -> &'a dyn Oracle {
        self.oracle
    }

    /// The image the spatial evaluator sees for `scene`.
    pub fn scene_image(&self, scene: &Scene3D) -> Result<Vec<u8>, RenderError> {
        match &self.config.imager {
            Some(imager) => imager(scene),
            None => crate::render::rasterize_scene(scene, &self.config.raster),
        }
    }
}
