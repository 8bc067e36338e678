//! The CSS-style layout line grammar.
//!
//! ```text
//! <label> {length: Npx; width: Npx; [height: Npx;] center_x: Npx; center_y: Npx; [center_z: Npx;] orientation: N degrees;}
//! ```
//!
//! Footprint lines carry neither bracketed group, 3D lines carry both.

use serde_json::{json, Value};

use super::{
    normalize_degrees, BevLayout, BevObject, LayoutError, Room, Scene3D, SceneObject3D,
};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum LineKind {
    Bev,
    Lifted,
}

impl LineKind {
    fn keys(self) -> &'static [&'static str] {
        match self {
            LineKind::Bev => &["length", "width", "center_x", "center_y", "orientation"],
            LineKind::Lifted => &[
                "length",
                "width",
                "height",
                "center_x",
                "center_y",
                "center_z",
                "orientation",
            ],
        }
    }
}

/// Renders a number in canonical form: shortest round-trip decimal, no
/// trailing zeros, integers without a decimal point.
pub fn format_number(v: f64) -> String {
    // `{}` on f64 never uses exponent notation and drops a `.0` suffix
    format!("{}", v + 0.0)
}

struct ParsedLine {
    label: String,
    values: Vec<f64>,
}

fn malformed(line: usize, reason: impl Into<String>) -> LayoutError {
    LayoutError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

fn strip_wrapping(raw: &str) -> &str {
    let mut s = raw.trim();
    if let Some(rest) = s.strip_suffix(',') {
        s = rest.trim_end();
    }
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
        s = s[1..s.len() - 1].trim();
    }
    s
}

fn parse_number(text: &str, unit: &str, line: usize, key: &str) -> Result<f64, LayoutError> {
    let text = text.trim();
    let number = text
        .strip_suffix(unit)
        .ok_or_else(|| malformed(line, format!("`{key}` value `{text}` lacks unit `{unit}`")))?
        .trim();
    let ok_chars = !number.is_empty()
        && number
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    let value: f64 = if ok_chars {
        number.parse().ok()
    } else {
        None
    }
    .filter(|v: &f64| v.is_finite())
    .ok_or_else(|| malformed(line, format!("`{key}` has unparseable number `{number}`")))?;
    Ok(value)
}

fn parse_line(raw: &str, line: usize, kind: LineKind) -> Result<ParsedLine, LayoutError> {
    let text = strip_wrapping(raw);
    let open = text
        .find('{')
        .ok_or_else(|| malformed(line, "missing `{`"))?;
    let label = text[..open].trim();
    if label.is_empty() {
        return Err(malformed(line, "missing object label"));
    }
    if label.contains([';', '}']) {
        return Err(malformed(line, "label contains a reserved character"));
    }
    let rest = &text[open + 1..];
    let body = rest
        .trim_end()
        .strip_suffix('}')
        .ok_or_else(|| malformed(line, "missing closing `}`"))?;
    if body.contains(['{', '}']) {
        return Err(malformed(line, "nested braces"));
    }

    let keys = kind.keys();
    let mut values: Vec<Option<f64>> = vec![None; keys.len()];
    for field in body.split(';') {
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        let (key, value) = field
            .split_once(':')
            .ok_or_else(|| malformed(line, format!("field `{field}` lacks `:`")))?;
        let key = key.trim();
        let slot = keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| malformed(line, format!("unknown key `{key}`")))?;
        if values[slot].is_some() {
            return Err(malformed(line, format!("duplicate key `{key}`")));
        }
        let unit = if key == "orientation" { "degrees" } else { "px" };
        values[slot] = Some(parse_number(value, unit, line, key)?);
    }

    let mut out = Vec::with_capacity(keys.len());
    for (key, value) in keys.iter().zip(values) {
        out.push(value.ok_or_else(|| malformed(line, format!("missing field `{key}`")))?);
    }
    Ok(ParsedLine {
        label: label.to_string(),
        values: out,
    })
}

/// Parses a single footprint line. `line` is the 1-based number reported in errors.
pub fn parse_bev_line(raw: &str, line: usize) -> Result<BevObject, LayoutError> {
    let parsed = parse_line(raw, line, LineKind::Bev)?;
    let v = &parsed.values;
    BevObject::new(parsed.label, v[0], v[1], v[2], v[3], v[4])
        .map_err(|e| malformed(line, e.to_string()))
}

fn parse_lifted_line(raw: &str, line: usize) -> Result<SceneObject3D, LayoutError> {
    let parsed = parse_line(raw, line, LineKind::Lifted)?;
    let v = &parsed.values;
    let bev = BevObject::new(parsed.label, v[0], v[1], v[3], v[4], v[6])
        .map_err(|e| malformed(line, e.to_string()))?;
    SceneObject3D::from_bev(&bev, v[2], v[5]).map_err(|e| malformed(line, e.to_string()))
}

fn nonblank_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parses multi-line footprint DSL, one object per nonblank line.
pub fn parse_bev_layout(text: &str) -> Result<BevLayout, LayoutError> {
    let objects = nonblank_lines(text)
        .map(|(n, l)| parse_bev_line(l, n))
        .collect::<Result<Vec<_>, _>>()?;
    if objects.is_empty() {
        return Err(LayoutError::EmptyLayout);
    }
    Ok(BevLayout::new(objects))
}

pub fn serialize_bev_object(obj: &BevObject) -> String {
    format!(
        "{} {{length: {}px; width: {}px; center_x: {}px; center_y: {}px; orientation: {} degrees;}}",
        obj.label,
        format_number(obj.length),
        format_number(obj.width),
        format_number(obj.center_x),
        format_number(obj.center_y),
        format_number(obj.orientation),
    )
}

/// Canonical text: one line per object joined by `\n`, no trailing newline.
pub fn serialize_bev_layout(layout: &BevLayout) -> String {
    layout
        .objects
        .iter()
        .map(serialize_bev_object)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn serialize_scene3d_object(obj: &SceneObject3D) -> String {
    format!(
        "{} {{length: {}px; width: {}px; height: {}px; center_x: {}px; center_y: {}px; center_z: {}px; orientation: {} degrees;}}",
        obj.label,
        format_number(obj.length),
        format_number(obj.width),
        format_number(obj.height),
        format_number(obj.center_x),
        format_number(obj.center_y),
        format_number(obj.center_z),
        format_number(normalize_degrees(obj.orientation)),
    )
}

/// Canonical 3D layout lines. Asset prompts are not part of the line form;
/// see [`scene3d_payload`].
pub fn serialize_scene3d(scene: &Scene3D) -> Result<String, LayoutError> {
    if scene.objects.is_empty() {
        return Err(LayoutError::EmptyLayout);
    }
    Ok(scene
        .objects
        .iter()
        .map(serialize_scene3d_object)
        .collect::<Vec<_>>()
        .join("\n"))
}

/// Parses 3D layout lines without prompts.
pub fn parse_scene3d_lines(text: &str) -> Result<Vec<SceneObject3D>, LayoutError> {
    let objects = nonblank_lines(text)
        .map(|(n, l)| parse_lifted_line(l, n))
        .collect::<Result<Vec<_>, _>>()?;
    if objects.is_empty() {
        return Err(LayoutError::EmptyLayout);
    }
    Ok(objects)
}

/// The lifting-response record: `{"3D_layout": [...], "object_prompts": [...]}`.
pub fn scene3d_payload(scene: &Scene3D) -> Result<Value, LayoutError> {
    if scene.objects.is_empty() {
        return Err(LayoutError::EmptyLayout);
    }
    let lines: Vec<String> = scene.objects.iter().map(serialize_scene3d_object).collect();
    let prompts: Vec<&str> = scene
        .objects
        .iter()
        .map(|o| o.asset_prompt.as_str())
        .collect();
    Ok(json!({ "3D_layout": lines, "object_prompts": prompts }))
}

pub(crate) fn normalize_key(key: &str) -> String {
    key.trim()
        .to_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Looks up `name` in a JSON object, tolerating case and `_`/space variants.
pub(crate) fn lookup<'a>(map: &'a serde_json::Map<String, Value>, name: &str) -> Option<&'a Value> {
    let want = normalize_key(name);
    map.iter()
        .find(|(k, _)| normalize_key(k) == want)
        .map(|(_, v)| v)
}

/// Accepts either a list of line strings or one multi-line string.
pub(crate) fn lines_from_value(value: &Value, field: &str) -> Result<String, LayoutError> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Array(items) => items
            .iter()
            .map(|item| {
                item.as_str().map(str::to_string).ok_or_else(|| {
                    LayoutError::InvalidPayload(format!("`{field}` entries must be strings"))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join("\n")),
        _ => Err(LayoutError::InvalidPayload(format!(
            "`{field}` must be a string or a list of strings"
        ))),
    }
}

/// Parses a lifting response already decoded as JSON.
pub fn parse_scene3d_value(payload: &Value, room: Room) -> Result<Scene3D, LayoutError> {
    let map = payload
        .as_object()
        .ok_or_else(|| LayoutError::InvalidPayload("lifting payload must be an object".into()))?;
    let layout = lookup(map, "3D_layout").ok_or_else(|| LayoutError::MissingField("3D_layout".into()))?;
    let prompts = lookup(map, "object_prompts")
        .ok_or_else(|| LayoutError::MissingField("object_prompts".into()))?;
    let mut objects = parse_scene3d_lines(&lines_from_value(layout, "3D_layout")?)?;
    let prompts: Vec<String> = match prompts {
        Value::Array(items) => items
            .iter()
            .map(|p| {
                p.as_str().map(str::to_string).ok_or_else(|| {
                    LayoutError::InvalidPayload("object prompts must be strings".into())
                })
            })
            .collect::<Result<_, _>>()?,
        _ => {
            return Err(LayoutError::InvalidPayload(
                "`object_prompts` must be a list".into(),
            ))
        }
    };
    if prompts.len() != objects.len() {
        return Err(LayoutError::LengthMismatch {
            layout: objects.len(),
            prompts: prompts.len(),
        });
    }
    for (obj, prompt) in objects.iter_mut().zip(prompts) {
        obj.asset_prompt = prompt;
    }
    Ok(Scene3D::new(room, objects))
}

/// Parses a lifting response given as JSON text.
pub fn parse_scene3d(payload: &str, room: Room) -> Result<Scene3D, LayoutError> {
    let value: Value = serde_json::from_str(payload)
        .map_err(|e| LayoutError::InvalidPayload(format!("lifting payload is not JSON: {e}")))?;
    parse_scene3d_value(&value, room)
}
