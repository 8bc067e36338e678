use serde::{Deserialize, Serialize};

use crate::layout::{serialize_bev_layout, serialize_scene3d, CotRecord, Scene3D};

use super::{AssetRecord, Evaluation, Feedback, Pipeline, PipelineError, Revision};

/// One update: the feedback received and the scene it was given on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub feedback: Feedback,
    pub scene: Scene3D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentState {
    /// Updates performed so far; equals `history.len()`.
    pub iteration: usize,
    pub scene: Scene3D,
    pub cot: CotRecord,
    pub history: Vec<HistoryEntry>,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentOutcome {
    pub scene: Scene3D,
    pub cot: CotRecord,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
    pub last_evaluation: Option<Evaluation>,
    /// Set when an update failed; `scene` is then the best scene so far.
    pub aborted: Option<PipelineError>,
    pub warnings: Vec<String>,
}

impl AlignmentOutcome {
    pub fn updates(&self) -> usize {
        self.history.len()
    }
}

impl AlignmentState {
    fn new(scene: Scene3D, cot: CotRecord, max_iters: usize) -> Self {
        Self {
            iteration: 0,
            scene,
            cot,
            history: Vec::new(),
            max_iters,
        }
    }

    fn finish(
        self,
        evaluations: usize,
        last_evaluation: Option<Evaluation>,
        aborted: Option<PipelineError>,
        warnings: Vec<String>,
    ) -> AlignmentOutcome {
        AlignmentOutcome {
            scene: self.scene,
            cot: self.cot,
            history: self.history,
            evaluations,
            last_evaluation,
            aborted,
            warnings,
        }
    }
}

/// Routes suggestions to the generators: footprint changes regenerate the
/// layout, vertical ones re-run the lifter, and a regenerated layout is
/// always lifted again.
fn update(
    pipeline: &Pipeline<'_>,
    description: &str,
    state: &AlignmentState,
    feedback: &Feedback,
) -> Result<(CotRecord, Scene3D), PipelineError> {
    let room = state.scene.room;
    let footprint = feedback.footprint();
    let vertical = feedback.vertical();
    let (cot, bev) = if footprint.is_empty() {
        (state.cot.clone(), state.scene.bev())
    } else {
        let revision = Revision {
            previous_layout: serialize_bev_layout(&state.scene.bev()),
            suggestions: footprint,
        };
        let g = pipeline.generate_bev_with(description, &room, Some(&revision), None)?;
        (g.cot, g.layout)
    };
    let lift_revision = if vertical.is_empty() {
        None
    } else {
        Some(Revision {
            previous_layout: serialize_scene3d(&state.scene)?,
            suggestions: vertical,
        })
    };
    let scene = pipeline.lift_to_3d_with(description, &bev, &room, lift_revision.as_ref())?;
    Ok((cot, scene))
}

/// Evaluate, stop on empty feedback, otherwise update; at most `max_iters`
/// updates.
pub fn run_alignment_loop(
    pipeline: &Pipeline<'_>,
    description: &str,
    initial: Scene3D,
    cot: CotRecord,
    assets: &[AssetRecord],
    max_iters: usize,
) -> AlignmentOutcome {
    let mut state = AlignmentState::new(initial, cot, max_iters);
    let mut evaluations = 0;
    let mut last = None;
    let mut warnings = Vec::new();
    while state.iteration < state.max_iters {
        let image = match pipeline.scene_image(&state.scene) {
            Ok(image) => image,
            Err(e) => return state.finish(evaluations, last, Some(e.into()), warnings),
        };
        let eval = pipeline.evaluate_scene(description, &state.scene, &state.cot, image, assets);
        evaluations += 1;
        warnings.extend(eval.warnings.iter().cloned());
        for (kind, e) in &eval.errors {
            warnings.push(format!("iteration {}: {kind:?} evaluator: {e}", state.iteration));
        }
        if eval.feedback.is_empty() {
            last = Some(eval);
            break;
        }
        let feedback = eval.feedback.clone();
        last = Some(eval);
        match update(pipeline, description, &state, &feedback) {
            Ok((cot, scene)) => {
                let previous = std::mem::replace(&mut state.scene, scene);
                state.cot = cot;
                state.history.push(HistoryEntry {
                    feedback,
                    scene: previous,
                });
                state.iteration += 1;
            }
            Err(e) => {
                log::warn!("alignment update failed, keeping best scene so far: {e}");
                return state.finish(evaluations, last, Some(e), warnings);
            }
        }
    }
    state.finish(evaluations, last, None, warnings)
}
