//! A deterministic stand-in for every model role, used to build the
//! committed replay fixtures and to drive integration tests.
//!
//! The generator knows one laundry-room scene (three variants keyed by
//! seed); the lifter assigns heights from a label table; the evaluators are
//! rule-based judges built on the geometry kernel.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use layoutforge::gateway::{
    GatewayError, HttpResponse, ModelRole, Oracle, OracleRequest, Transport, TransportFailure,
};
use layoutforge::geometry::{footprints_overlap, is_out_of_bound, Footprint};
use layoutforge::layout::{
    class_key, format_number, parse_bev_line, serialize_bev_layout, BevLayout, BevObject, Room,
};
use serde_json::{json, Value};

pub const LAUNDRY_PROMPT: &str = "A compact laundry room with a washing machine and a dryer side by side against the back wall, a laundry basket in front of them, a folding table along the right wall, and a wall shelf mounted above the washing machine.";
pub const LAUNDRY_ROOM: &str = "200x150x160";
pub const LAUNDRY_ID: &str = "laundry";

/// Core's fixture directory, also when this module is shared with the CLI tests.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn laundry_room() -> Room {
    Room::parse_dims(LAUNDRY_ROOM).unwrap()
}

fn laundry_layout(seed: u64) -> &'static str {
    match seed % 3 {
        0 => "washing machine {length: 30px; width: 30px; center_x: 40px; center_y: 16px; orientation: 0 degrees;}
dryer {length: 30px; width: 30px; center_x: 72px; center_y: 16px; orientation: 0 degrees;}
laundry basket {length: 24px; width: 18px; center_x: 56px; center_y: 60px; orientation: 0 degrees;}
folding table {length: 60px; width: 28px; center_x: 184px; center_y: 75px; orientation: 90 degrees;}
wall shelf {length: 40px; width: 12px; center_x: 40px; center_y: 7px; orientation: 0 degrees;}",
        1 => "washing machine {length: 30px; width: 30px; center_x: 40px; center_y: 16px; orientation: 0 degrees;}
dryer {length: 30px; width: 30px; center_x: 72px; center_y: 16px; orientation: 0 degrees;}
laundry basket {length: 24px; width: 18px; center_x: 40px; center_y: 30px; orientation: 0 degrees;}
folding table {length: 60px; width: 28px; center_x: 184px; center_y: 75px; orientation: 90 degrees;}
wall shelf {length: 40px; width: 12px; center_x: 40px; center_y: 7px; orientation: 0 degrees;}",
        _ => "washing machine {length: 30px; width: 30px; center_x: 40px; center_y: 16px; orientation: 0 degrees;}
dryer {length: 30px; width: 30px; center_x: 72px; center_y: 16px; orientation: 0 degrees;}
laundry basket {length: 24px; width: 18px; center_x: 56px; center_y: 60px; orientation: 0 degrees;}
folding table {length: 60px; width: 28px; center_x: 192px; center_y: 75px; orientation: 90 degrees;}
wall shelf {length: 40px; width: 12px; center_x: 40px; center_y: 7px; orientation: 0 degrees;}",
    }
}

/// Footprint lines following `BEV layout:` in a prompt.
pub fn bev_section(prompt: &str) -> BevLayout {
    let start = prompt.find("BEV layout:\n").map(|i| i + "BEV layout:\n".len()).unwrap_or(0);
    let objects = prompt[start..]
        .lines()
        .take_while(|l| l.contains('{') && l.trim_end().ends_with('}'))
        .enumerate()
        .filter_map(|(i, l)| parse_bev_line(l, i + 1).ok())
        .collect();
    BevLayout::new(objects)
}

fn after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.find(marker).map(|i| &text[i + marker.len()..])
}

fn room_from_prompt(prompt: &str) -> (u32, u32) {
    let num = |marker: &str| -> Option<u32> {
        let rest = after(prompt, marker)?;
        rest.split(|c: char| !c.is_ascii_digit()).next()?.parse().ok()
    };
    (
        num("The room is ").or_else(|| num("max_length: ")).or_else(|| num("The space is ")).unwrap_or(256),
        num("px long and ").or_else(|| num("max_width: ")).or_else(|| num("px long, ")).unwrap_or(256),
    )
}

fn fenced(explanation: &str, value: &Value) -> String {
    format!(
        "{explanation}\n\n```json\n{}\n```\n",
        serde_json::to_string_pretty(value).unwrap()
    )
}

fn count_phrase(layout: &BevLayout) -> String {
    const WORDS: [&str; 6] = ["zero", "one", "two", "three", "four", "five"];
    let parts: Vec<String> = layout
        .class_counts()
        .iter()
        .map(|(c, n)| match WORDS.get(*n) {
            Some(w) => format!("{w} {c}"),
            None => format!("{n} {c}"),
        })
        .collect();
    parts.join(", ")
}

fn cot_value(prompt: &str, layout_text: &str) -> Value {
    let layout = layoutforge::layout::parse_bev_layout(layout_text).unwrap();
    let classes: Vec<String> = layout.class_counts().into_iter().map(|(c, _)| c).collect();
    json!({
        "prompt": prompt,
        "response": {
            "Entity Extraction": format!("The scene needs {}.", count_phrase(&layout)),
            "Order Decision": format!("Place the large appliances first, then the rest: {}.", classes.join(", ")),
            "Spatial Reasoning": layout.objects.iter().map(|o| format!(
                "The {} is {}px by {}px, rotated {} degrees, centered at ({}, {}).",
                o.label, format_number(o.length), format_number(o.width), format_number(o.orientation),
                format_number(o.center_x), format_number(o.center_y))).collect::<Vec<_>>().join(" "),
            "Answer Organization": layout_text,
        }
    })
}

fn generate(prompt: &str, seed: u64) -> String {
    let description = after(prompt, "Scene description:\n")
        .map(|d| d.split("\n\n").next().unwrap_or(d).trim())
        .unwrap_or("");
    let layout = if description.to_lowercase().contains("laundry") {
        laundry_layout(seed).to_string()
    } else {
        let (l, w) = room_from_prompt(prompt);
        format!(
            "table {{length: 40px; width: 30px; center_x: {}px; center_y: {}px; orientation: 0 degrees;}}",
            l / 2,
            w / 2
        )
    };
    fenced("Here is the plan.", &cot_value(description, &layout))
}

fn height_for(label: &str) -> (f64, f64) {
    let key = class_key(label);
    let (h, z) = match key.as_str() {
        "washing machine" | "dryer" => (40.0, 20.0),
        "laundry basket" => (20.0, 10.0),
        "folding table" => (36.0, 18.0),
        "wall shelf" => (8.0, 44.0),
        _ => (30.0, 15.0),
    };
    (h, z)
}

/// `center_z` values proposed in revision context, by object index.
fn proposed_center_z(prompt: &str) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    let Some(section) = after(prompt, "Suggested revisions:\n") else {
        return out;
    };
    for line in section.lines().take_while(|l| l.starts_with("- object ")) {
        let index = line["- object ".len()..]
            .split(' ')
            .next()
            .and_then(|s| s.parse::<usize>().ok());
        let z = after(line, "center_z: ").and_then(|r| {
            r.split(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-')).next()?.parse::<f64>().ok()
        });
        if let (Some(i), Some(z)) = (index, z) {
            out.insert(i, z);
        }
    }
    out
}

fn lift(prompt: &str) -> String {
    let layout = bev_section(prompt);
    let overrides = proposed_center_z(prompt);
    let mut lines = Vec::new();
    let mut prompts = Vec::new();
    for (i, o) in layout.objects.iter().enumerate() {
        let (h, mut z) = height_for(&o.label);
        if let Some(p) = overrides.get(&i) {
            z = *p;
        }
        lines.push(format!(
            "{} {{length: {}px; width: {}px; height: {}px; center_x: {}px; center_y: {}px; center_z: {}px; orientation: {} degrees;}}",
            o.label,
            format_number(o.length),
            format_number(o.width),
            format_number(h),
            format_number(o.center_x),
            format_number(o.center_y),
            format_number(z),
            format_number(o.orientation)
        ));
        prompts.push(format!("A {} with a simple modern design.", o.label));
    }
    fenced("Lifted layout:", &json!({"3D_layout": lines, "object_prompts": prompts}))
}

fn is_stackable(label: &str) -> bool {
    let k = class_key(label);
    k.contains("shelf") || k.contains("lamp")
}

fn footprints(layout: &BevLayout) -> Vec<Footprint> {
    layout.objects.iter().map(|o| Footprint::from_bev(o).unwrap()).collect()
}

fn verdict_tokens(no: &[bool]) -> Value {
    Value::Array(no.iter().map(|n| json!(if *n { "No" } else { "Yes" })).collect())
}

fn alignment_mode(prompt: &str) -> bool {
    prompt.contains("give object-level suggestions")
}

fn spatial_judge(prompt: &str) -> String {
    let layout = bev_section(prompt);
    let (l, w) = room_from_prompt(prompt);
    let room = Room::new(l, w, 256).unwrap();
    let fps = footprints(&layout);
    let mut per_class: Vec<(String, bool)> = Vec::new();
    let mut suggestions = Vec::new();
    for (i, (o, f)) in layout.objects.iter().zip(&fps).enumerate() {
        let oob = is_out_of_bound(f, &room, 0.5);
        let key = class_key(&o.label);
        match per_class.iter_mut().find(|(k, _)| *k == key) {
            Some((_, bad)) => *bad |= oob,
            None => per_class.push((key, oob)),
        }
        if oob {
            suggestions.push(json!({
                "object_index": i, "criterion": "C2", "aspect": "position",
                "instruction": format!("Move the {} fully inside the room.", o.label)
            }));
        }
    }
    let verdicts: serde_json::Map<String, Value> = per_class
        .into_iter()
        .map(|(k, bad)| (k, verdict_tokens(&[false, bad, false])))
        .collect();
    let body = if alignment_mode(prompt) {
        json!({"verdicts": verdicts, "suggestions": suggestions})
    } else {
        Value::Object(verdicts)
    };
    fenced("Alignment, position and consistency were checked against the picture.", &body)
}

/// `index -> (height, center_z)` from the metadata block.
fn metadata_heights(prompt: &str) -> BTreeMap<usize, (f64, f64)> {
    let mut out = BTreeMap::new();
    let Some(section) = after(prompt, "metadata:\n") else {
        return out;
    };
    for line in section.lines() {
        let Some((idx, rest)) = line.split_once(": ") else { break };
        let Ok(i) = idx.parse::<usize>() else { break };
        let num = |m: &str| after(rest, m).and_then(|r| r.split("px").next()?.parse::<f64>().ok());
        if let (Some(h), Some(z)) = (num("height: "), num("center_z: ")) {
            out.insert(i, (h, z));
        }
    }
    out
}

fn quant_judge(prompt: &str) -> String {
    let layout = bev_section(prompt);
    let fps = footprints(&layout);
    let heights = metadata_heights(prompt);
    let mut bad = vec![false; layout.len()];
    let mut suggestions = Vec::new();
    for i in 0..layout.len() {
        for j in 0..layout.len() {
            if i >= j || !footprints_overlap(&fps[i], &fps[j], 1.0) {
                continue;
            }
            let (si, sj) = (is_stackable(&layout.objects[i].label), is_stackable(&layout.objects[j].label));
            if si == sj {
                bad[i] = true;
                bad[j] = true;
                continue;
            }
            let (top, base) = if si { (i, j) } else { (j, i) };
            if let (Some(&(ht, zt)), Some(&(hb, zb))) = (heights.get(&top), heights.get(&base)) {
                let clearance = (zt - ht / 2.0) - (zb + hb / 2.0);
                if clearance < 20.0 {
                    bad[top] = true;
                    suggestions.push(json!({
                        "object_index": top, "criterion": "C4", "aspect": "height",
                        "instruction": format!("Raise the {} to leave room above the {}.",
                            layout.objects[top].label, layout.objects[base].label),
                        "proposed_values": {"center_z": zb + hb / 2.0 + 20.0 + ht / 2.0}
                    }));
                }
            }
        }
    }
    let mut per_class: Vec<(String, bool)> = Vec::new();
    for (o, b) in layout.objects.iter().zip(&bad) {
        let key = class_key(&o.label);
        match per_class.iter_mut().find(|(k, _)| *k == key) {
            Some((_, acc)) => *acc |= *b,
            None => per_class.push((key, *b)),
        }
    }
    // distance, quantity, size, orientation
    let verdicts: serde_json::Map<String, Value> = per_class
        .into_iter()
        .map(|(k, b)| (k, verdict_tokens(&[b, false, false, false])))
        .collect();
    let body = if alignment_mode(prompt) {
        json!({"verdicts": verdicts, "suggestions": suggestions})
    } else {
        Value::Object(verdicts)
    };
    fenced("Distances, counts, proportions and orientations were reviewed.", &body)
}

fn describe_scenes() -> String {
    let rec = |g: &str, d: &str, l: u32, w: u32| {
        json!({"scene_type": "laundry room", "granularity": g, "description": d,
               "room_size": {"length": l, "width": w, "height": 160}})
    };
    let value = json!([
        rec("coarse", "A laundry room with a washing machine, a dryer, a laundry basket and a wall shelf.", 200, 150),
        rec("coarse", "A laundry room with two washing machines, an ironing board and a drying rack.", 220, 160),
        rec("medium", "In a laundry room, the washer and dryer stand against the back wall and a folding table runs along the right wall.", 200, 150),
        rec("medium", "A laundry room where a utility sink sits in the corner and a drying rack stands near the door.", 180, 140),
        rec("fine", "A washing machine sits against the back wall with a dryer directly to its right; a wicker basket rests 30px in front of the washer and a narrow shelf hangs above it.", 200, 150),
    ]);
    fenced("Scene descriptions:", &value)
}

fn annotate(prompt: &str) -> String {
    let mut layout = bev_section(prompt);
    // this annotator always loses one nightstand, so the builder's check has
    // something to reject
    if let Some(pos) = layout.objects.iter().rposition(|o| class_key(&o.label) == "nightstand") {
        layout.objects.remove(pos);
    }
    let summary = format!("A room with {}.", count_phrase(&layout));
    fenced("Annotation:", &cot_value(&summary, &serialize_bev_layout(&layout)))
}

/// Reply for one request.
pub fn respond(role: ModelRole, prompt: &str, seed: u64) -> String {
    match role {
        ModelRole::BevGenerator => generate(prompt, seed),
        ModelRole::LayoutLifter => lift(prompt),
        ModelRole::SpatialEvaluator => spatial_judge(prompt),
        ModelRole::QuantEvaluator => quant_judge(prompt),
        ModelRole::Descriptor => {
            if prompt.contains("generate indoor scene descriptions") {
                describe_scenes()
            } else {
                annotate(prompt)
            }
        }
    }
}

/// The script as an in-process oracle.
pub struct ScriptedModel;

impl Oracle for ScriptedModel {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        Ok(respond(request.role(), request.prompt(), request.decode().seed))
    }
}

/// The script behind the HTTP transport seam; endpoints are
/// `scripted://<role>`.
pub struct ScriptedTransport;

impl Transport for ScriptedTransport {
    fn post_json(
        &self,
        url: &str,
        _headers: &[(String, String)],
        body: &Value,
    ) -> Result<HttpResponse, TransportFailure> {
        let role: ModelRole = url
            .strip_prefix("scripted://")
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| TransportFailure(format!("unknown endpoint {url}")))?;
        let content = &body["messages"][0]["content"];
        let prompt = content
            .as_str()
            .or_else(|| content[0]["text"].as_str())
            .ok_or_else(|| TransportFailure("no prompt".into()))?;
        let seed = body["seed"].as_u64().unwrap_or(0);
        let text = respond(role, prompt, seed);
        let reply = json!({"choices": [{"message": {"role": "assistant", "content": text}}]});
        Ok(HttpResponse {
            status: 200,
            body: reply.to_string(),
        })
    }
}

/// Gateway settings pointing every role at the script.
pub fn scripted_config() -> layoutforge::gateway::GatewayConfig {
    let mut config = layoutforge::gateway::GatewayConfig::default();
    for role in [
        ModelRole::BevGenerator,
        ModelRole::LayoutLifter,
        ModelRole::SpatialEvaluator,
        ModelRole::QuantEvaluator,
        ModelRole::Descriptor,
    ] {
        config.roles.insert(
            role,
            layoutforge::gateway::RoleConfig {
                endpoint: format!("scripted://{}", role.name()),
                model: "scripted".into(),
                ..Default::default()
            },
        );
    }
    config.retry.base_delay_ms = 0;
    config
}

pub fn bev(label: &str, l: f64, w: f64, x: f64, y: f64, o: f64) -> BevObject {
    BevObject::new(label, l, w, x, y, o).unwrap()
}

/// Judges that always object: every class fails C2 and C4, with a position
/// suggestion for object 0 and a height suggestion for the last object.
pub struct Complaining;

/// Judges that accept everything.
pub struct Satisfied;

fn judge_all(prompt: &str, spatial: bool, yes: bool) -> String {
    let layout = bev_section(prompt);
    let mut verdicts = serde_json::Map::new();
    for (class, _) in layout.class_counts() {
        let v = match (spatial, yes) {
            (_, true) => verdict_tokens(&[false; 4][..if spatial { 3 } else { 4 }]),
            (true, false) => verdict_tokens(&[false, true, false]),
            (false, false) => verdict_tokens(&[true, false, false, false]),
        };
        verdicts.insert(class, v);
    }
    if !alignment_mode(prompt) {
        return Value::Object(verdicts).to_string();
    }
    let suggestions = if yes {
        json!([])
    } else if spatial {
        json!([{"object_index": 0, "criterion": "C2", "aspect": "position", "instruction": "Move it."}])
    } else {
        json!([{"object_index": layout.len() - 1, "criterion": "C4", "aspect": "height",
                "instruction": "Raise it.", "proposed_values": {"center_z": 100}}])
    };
    json!({"verdicts": verdicts, "suggestions": suggestions}).to_string()
}

impl Oracle for Complaining {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        Ok(match request.role() {
            ModelRole::SpatialEvaluator => judge_all(request.prompt(), true, false),
            ModelRole::QuantEvaluator => judge_all(request.prompt(), false, false),
            role => respond(role, request.prompt(), request.decode().seed),
        })
    }
}

impl Oracle for Satisfied {
    fn complete(&self, request: &OracleRequest) -> Result<String, GatewayError> {
        Ok(match request.role() {
            ModelRole::SpatialEvaluator => judge_all(request.prompt(), true, true),
            ModelRole::QuantEvaluator => judge_all(request.prompt(), false, true),
            role => respond(role, request.prompt(), request.decode().seed),
        })
    }
}

/// The committed cassette with the first lifted layout's folding table
/// shifted by one pixel.
pub fn mutated_cassette() -> layoutforge::gateway::Cassette {
    let original = layoutforge::gateway::Cassette::load(&fixtures_dir().join("laundry.cassette")).unwrap();
    let mut mutated = layoutforge::gateway::Cassette::new();
    let mut done = false;
    for (digest, response) in original.iter() {
        let mut response = response.to_string();
        if !done && response.contains("3D_layout") && response.contains("center_z: 44px") {
            response = response.replacen("center_x: 184px", "center_x: 183px", 1);
            done = true;
        }
        mutated.insert(*digest, response);
    }
    assert!(done, "no lift response found");
    mutated
}
