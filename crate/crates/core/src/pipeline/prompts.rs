//! Prompt construction for every model call the pipeline and corpus
//! builders make.

use std::collections::BTreeMap;

use crate::gateway::{render_prompt, GatewayError, TemplateId};
use crate::layout::{format_number, serialize_bev_layout, BevLayout, Room, Scene3D};
use crate::reward::CriterionId;

use super::{AssetRecord, Suggestion};

fn bind<'a>(pairs: &[(&'a str, String)]) -> BTreeMap<&'a str, String> {
    pairs.iter().cloned().collect()
}

pub fn bev_generate(description: &str, room: &Room) -> Result<String, GatewayError> {
    render_prompt(
        TemplateId::BevGenerate,
        &bind(&[
            ("max_length", room.max_length.to_string()),
            ("max_width", room.max_width.to_string()),
            ("scene_description", description.to_string()),
        ]),
    )
}

pub fn lifting(description: &str, bev: &BevLayout, room: &Room) -> Result<String, GatewayError> {
    render_prompt(
        TemplateId::Lifting,
        &bind(&[
            ("max_length", room.max_length.to_string()),
            ("max_width", room.max_width.to_string()),
            ("max_height", room.max_height.to_string()),
            ("text_description", description.to_string()),
            ("bev_layout", serialize_bev_layout(bev)),
        ]),
    )
}

pub fn spatial_eval(
    description: &str,
    bev: &BevLayout,
    room: &Room,
    cot_transcript: &str,
) -> Result<String, GatewayError> {
    render_prompt(
        TemplateId::SpatialEval,
        &bind(&[
            ("scene_description", description.to_string()),
            ("max_length", room.max_length.to_string()),
            ("max_width", room.max_width.to_string()),
            ("bev_layout", serialize_bev_layout(bev)),
            ("CoT", cot_transcript.to_string()),
        ]),
    )
}

/// Single-score judge prompt, kept for baseline comparisons.
pub fn simple_reward(
    description: &str,
    bev: &BevLayout,
    room: &Room,
    cot_transcript: &str,
) -> Result<String, GatewayError> {
    render_prompt(
        TemplateId::SimpleReward,
        &bind(&[
            ("scene_description", description.to_string()),
            ("max_length", room.max_length.to_string()),
            ("max_width", room.max_width.to_string()),
            ("bev_layout", serialize_bev_layout(bev)),
            ("CoT", cot_transcript.to_string()),
        ]),
    )
}

pub fn quant_eval(
    description: &str,
    bev: &BevLayout,
    room: &Room,
    metadata: &str,
) -> Result<String, GatewayError> {
    render_prompt(
        TemplateId::QuantEval,
        &bind(&[
            ("scene_description", description.to_string()),
            ("max_length", room.max_length.to_string()),
            ("max_width", room.max_width.to_string()),
            ("bev_layout", serialize_bev_layout(bev)),
            ("metadata", metadata.to_string()),
        ]),
    )
}

/// Per-object metadata block for the quantitative evaluator: index, label
/// and, for lifted scenes, the vertical extent.
pub fn layout_metadata(bev: &BevLayout, scene: Option<&Scene3D>) -> String {
    let mut out = String::from("metadata:");
    for (i, obj) in bev.objects.iter().enumerate() {
        out.push_str(&format!("\n{i}: {}", obj.label));
        if let Some(o) = scene.and_then(|s| s.objects.get(i)) {
            out.push_str(&format!(
                "; height: {}px; center_z: {}px",
                format_number(o.height),
                format_number(o.center_z)
            ));
        }
    }
    out
}

fn asset_block(assets: &[AssetRecord]) -> String {
    if assets.is_empty() {
        return "none".into();
    }
    assets
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let [x, y, z] = a.native_extents;
            format!(
                "{i}: {} (native extents {} x {} x {} px, front {})",
                a.asset_id,
                format_number(x),
                format_number(y),
                format_number(z),
                a.front_axis
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Suffix turning a training-time evaluator prompt into its alignment-mode
/// form, which also asks for per-object suggestions.
pub fn alignment_suffix(order: &[CriterionId], assets: &[AssetRecord]) -> Result<String, GatewayError> {
    let legend = order.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
    render_prompt(
        TemplateId::AlignmentFeedback,
        &bind(&[("criteria_legend", legend), ("asset_metadata", asset_block(assets))]),
    )
}

/// Context appended to a generator prompt when revising a layout.
pub fn revision_context(previous_layout: &str, suggestions: &[Suggestion]) -> Result<String, GatewayError> {
    let list = suggestions
        .iter()
        .map(Suggestion::describe)
        .collect::<Vec<_>>()
        .join("\n");
    render_prompt(
        TemplateId::RevisionContext,
        &bind(&[("previous_layout", previous_layout.to_string()), ("suggestions", list)]),
    )
}

/// Appended after a reply that could not be used.
pub fn corrective_note(reason: &str) -> String {
    format!(
        "\n\nYour previous reply could not be used ({reason}). Reply again with only the JSON object in the required format."
    )
}

/// The annotation prompt for a ground-truth layout. The template has no
/// layout slot, so the layout follows it.
pub fn cot_datagen(gt: &BevLayout, room: &Room) -> Result<String, GatewayError> {
    let head = render_prompt(
        TemplateId::CotDatagen,
        &bind(&[
            ("max_length", room.max_length.to_string()),
            ("max_width", room.max_width.to_string()),
        ]),
    )?;
    Ok(format!("{head}\n\nBEV layout:\n{}", serialize_bev_layout(gt)))
}

pub fn description_gen(
    num_scene_types: usize,
    coarse: usize,
    medium: usize,
    fine: usize,
) -> Result<String, GatewayError> {
    render_prompt(
        TemplateId::DescriptionGen,
        &bind(&[
            ("num_scene_types", num_scene_types.to_string()),
            ("num_coarse_per_type", coarse.to_string()),
            ("num_medium_per_type", medium.to_string()),
            ("num_fine_per_type", fine.to_string()),
        ]),
    )
}
