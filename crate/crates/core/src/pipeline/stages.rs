use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{extract_json, DecodeParams, ModelRole, OracleRequest};
use crate::layout::{
    check_cot_consistency, parse_cot_value, parse_scene3d_value, BevLayout, ConsistencyFinding,
    CotRecord, Room, Scene3D,
};
use crate::reward::{parse_quant_verdicts_value, parse_spatial_verdicts_value, CriterionId, VerdictMatrix};

use super::feedback::parse_suggestions;
use super::{prompts, AssetRecord, Feedback, Pipeline, PipelineError, Suggestion};

/// Earlier output plus the suggestions it should address.
#[derive(Debug, Clone, PartialEq)]
pub struct Revision {
    pub previous_layout: String,
    pub suggestions: Vec<Suggestion>,
}

impl Revision {
    fn context(&self) -> Result<String, PipelineError> {
        Ok(format!(
            "\n{}",
            prompts::revision_context(&self.previous_layout, &self.suggestions)?
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub cot: CotRecord,
    pub layout: BevLayout,
    pub findings: Vec<ConsistencyFinding>,
    pub attempts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Spatial,
    Quant,
}

impl EvaluatorKind {
    fn order(self) -> &'static [CriterionId] {
        match self {
            EvaluatorKind::Spatial => &CriterionId::SPATIAL_ORDER,
            EvaluatorKind::Quant => &CriterionId::QUANT_ORDER,
        }
    }
}

/// Both evaluators' verdicts for one scene. A failing evaluator leaves its
/// criteria unanswered and its error in `errors`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub verdicts: VerdictMatrix,
    pub feedback: Feedback,
    pub errors: Vec<(EvaluatorKind, PipelineError)>,
    pub warnings: Vec<String>,
}

impl Evaluation {
    pub fn is_complete(&self) -> bool {
        self.errors.is_empty()
    }

    /// The verdicts, or the first evaluator error.
    pub fn into_verdicts(self) -> Result<VerdictMatrix, PipelineError> {
        match self.errors.into_iter().next() {
            Some((_, e)) => Err(e),
            None => Ok(self.verdicts),
        }
    }
}

fn parse_generation(reply: &str) -> Result<(CotRecord, BevLayout), PipelineError> {
    let value = extract_json(reply)?;
    let cot = parse_cot_value(&value)?;
    let layout = cot.layout()?;
    Ok((cot, layout))
}

fn same_footprint(a: &crate::layout::BevObject, b: &crate::layout::BevObject) -> bool {
    a.label == b.label
        && a.length == b.length
        && a.width == b.width
        && a.center_x == b.center_x
        && a.center_y == b.center_y
        && a.orientation == b.orientation
}

fn parse_lift(reply: &str, bev: &BevLayout, room: Room) -> Result<Scene3D, PipelineError> {
    let value = extract_json(reply)?;
    let scene = parse_scene3d_value(&value, room)?;
    let lifted = scene.bev();
    for i in 0..bev.len().max(lifted.len()) {
        match (bev.objects.get(i), lifted.objects.get(i)) {
            (Some(a), Some(b)) if same_footprint(a, b) => {}
            _ => return Err(PipelineError::FootprintMutated(i)),
        }
    }
    Ok(scene)
}

impl Pipeline<'_> {
    fn call(&self, role: ModelRole, prompt: String, image: Option<Vec<u8>>, decode: DecodeParams) -> Result<String, PipelineError> {
        let request = OracleRequest::new(role, prompt, image, decode)?;
        Ok(self.oracle.complete(&request)?)
    }

    pub fn generate_bev(&self, description: &str, room: &Room) -> Result<Generation, PipelineError> {
        self.generate_bev_with(description, room, None, None)
    }

    /// Footprint generation with optional revision context and seed
    /// override. Unusable replies are re-prompted with a corrective note.
    pub fn generate_bev_with(
        &self,
        description: &str,
        room: &Room,
        revision: Option<&Revision>,
        seed: Option<u64>,
    ) -> Result<Generation, PipelineError> {
        if description.trim().is_empty() {
            return Err(PipelineError::EmptyDescription);
        }
        let mut base = prompts::bev_generate(description, room)?;
        if let Some(r) = revision {
            base.push_str(&r.context()?);
        }
        let mut decode = self.config.decode(ModelRole::BevGenerator);
        if let Some(seed) = seed {
            decode.seed = seed;
        }
        let attempts = self.config.generation_attempts.max(1);
        let mut prompt = base.clone();
        let mut last = String::new();
        for attempt in 1..=attempts {
            let reply = self.call(ModelRole::BevGenerator, prompt, None, decode)?;
            match parse_generation(&reply) {
                Ok((cot, layout)) => {
                    let findings = check_cot_consistency(&cot);
                    for f in &findings {
                        log::warn!("chain-of-thought consistency: {f:?}");
                    }
                    return Ok(Generation {
                        cot,
                        layout,
                        findings,
                        attempts: attempt,
                    });
                }
                Err(e) => {
                    log::warn!("generator attempt {attempt}/{attempts} unusable: {e}");
                    last = e.to_string();
                    prompt = format!("{base}{}", prompts::corrective_note(&last));
                }
            }
        }
        Err(PipelineError::GenerationRejected { attempts, last })
    }

    pub fn lift_to_3d(&self, description: &str, bev: &BevLayout, room: &Room) -> Result<Scene3D, PipelineError> {
        self.lift_to_3d_with(description, bev, room, None)
    }

    /// Adds heights and asset prompts to `bev`. The lifted footprints must
    /// match the input exactly; one corrective re-prompt is allowed.
    pub fn lift_to_3d_with(
        &self,
        description: &str,
        bev: &BevLayout,
        room: &Room,
        revision: Option<&Revision>,
    ) -> Result<Scene3D, PipelineError> {
        if bev.is_empty() {
            return Err(crate::layout::LayoutError::EmptyLayout.into());
        }
        let mut base = prompts::lifting(description, bev, room)?;
        if let Some(r) = revision {
            base.push_str(&r.context()?);
        }
        let decode = self.config.decode(ModelRole::LayoutLifter);
        let mut prompt = base.clone();
        let mut result = Err(PipelineError::EmptyDescription);
        for attempt in 1..=2 {
            let reply = match self.call(ModelRole::LayoutLifter, prompt, None, decode) {
                Ok(reply) => reply,
                // a failed re-prompt reports the rejection that caused it
                Err(e) if attempt > 1 => {
                    log::warn!("corrective lift request failed: {e}");
                    return result;
                }
                Err(e) => return Err(e),
            };
            result = parse_lift(&reply, bev, *room);
            match &result {
                Ok(scene) => {
                    for obj in &scene.objects {
                        if let Err(e) = obj.check_vertical_bounds(room) {
                            log::warn!("{e}");
                        }
                    }
                    break;
                }
                Err(e) => {
                    log::warn!("lift attempt {attempt}/2 rejected: {e}");
                    prompt = format!("{base}{}", prompts::corrective_note(&e.to_string()));
                }
            }
        }
        result
    }

    fn run_evaluator(
        &self,
        kind: EvaluatorKind,
        prompt: String,
        image: Option<Vec<u8>>,
        layout: &BevLayout,
        with_suggestions: bool,
        warnings: &mut Vec<String>,
    ) -> Result<(VerdictMatrix, Vec<Suggestion>), PipelineError> {
        let role = match kind {
            EvaluatorKind::Spatial => ModelRole::SpatialEvaluator,
            EvaluatorKind::Quant => ModelRole::QuantEvaluator,
        };
        let reply = self.call(role, prompt, image, self.config.decode(role))?;
        let value: Value = extract_json(&reply)?;
        let mut verdicts = match kind {
            EvaluatorKind::Spatial => parse_spatial_verdicts_value(&value, layout)?,
            EvaluatorKind::Quant => parse_quant_verdicts_value(&value, layout)?,
        };
        warnings.append(&mut verdicts.warnings);
        let suggestions = if with_suggestions {
            parse_suggestions(&value, layout, &verdicts, kind.order(), warnings)
        } else {
            Vec::new()
        };
        Ok((verdicts, suggestions))
    }

    fn evaluate(
        &self,
        prompts: [String; 2],
        image: Vec<u8>,
        layout: &BevLayout,
        with_suggestions: bool,
    ) -> Evaluation {
        let [spatial_prompt, quant_prompt] = prompts;
        let mut eval = Evaluation::default();
        let mut parts = Vec::new();
        for (kind, prompt, image) in [
            (EvaluatorKind::Spatial, spatial_prompt, Some(image)),
            (EvaluatorKind::Quant, quant_prompt, None),
        ] {
            match self.run_evaluator(kind, prompt, image, layout, with_suggestions, &mut eval.warnings) {
                Ok((verdicts, mut suggestions)) => {
                    parts.push(verdicts);
                    eval.feedback.suggestions.append(&mut suggestions);
                }
                Err(e) => {
                    log::warn!("{kind:?} evaluator failed: {e}");
                    eval.errors.push((kind, e));
                }
            }
        }
        eval.verdicts = parts
            .into_iter()
            .reduce(VerdictMatrix::merge)
            .unwrap_or_default();
        eval
    }

    /// Training-time evaluation of a footprint layout: verdicts only.
    pub fn evaluate_layout(
        &self,
        description: &str,
        layout: &BevLayout,
        room: &Room,
        cot_transcript: &str,
        image: Vec<u8>,
    ) -> Evaluation {
        let prompts = (|| -> Result<[String; 2], PipelineError> {
            Ok([
                prompts::spatial_eval(description, layout, room, cot_transcript)?,
                prompts::quant_eval(description, layout, room, &prompts::layout_metadata(layout, None))?,
            ])
        })();
        match prompts {
            Ok(p) => self.evaluate(p, image, layout, false),
            Err(e) => Evaluation {
                errors: vec![(EvaluatorKind::Spatial, e)],
                ..Evaluation::default()
            },
        }
    }

    /// Alignment-mode evaluation of a lifted scene: verdicts plus
    /// per-object suggestions on criteria judged No.
    pub fn evaluate_scene(
        &self,
        description: &str,
        scene: &Scene3D,
        cot: &CotRecord,
        image: Vec<u8>,
        assets: &[AssetRecord],
    ) -> Evaluation {
        let layout = scene.bev();
        let room = scene.room;
        let prompts = (|| -> Result<[String; 2], PipelineError> {
            let spatial = format!(
                "{}\n{}",
                prompts::spatial_eval(description, &layout, &room, &cot.transcript())?,
                prompts::alignment_suffix(&CriterionId::SPATIAL_ORDER, assets)?
            );
            let quant = format!(
                "{}\n{}",
                prompts::quant_eval(description, &layout, &room, &prompts::layout_metadata(&layout, Some(scene)))?,
                prompts::alignment_suffix(&CriterionId::QUANT_ORDER, assets)?
            );
            Ok([spatial, quant])
        })();
        match prompts {
            Ok(p) => self.evaluate(p, image, &layout, true),
            Err(e) => Evaluation {
                errors: vec![(EvaluatorKind::Spatial, e)],
                ..Evaluation::default()
            },
        }
    }
}
