//! Pulls the first JSON object or array out of free-form model output.

use serde_json::Value;

use super::GatewayError;

fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(nl) = after.find('\n') else { break };
        let body = &after[nl + 1..];
        let Some(end) = body.find("```") else { break };
        blocks.push(&body[..end]);
        rest = &body[end + 3..];
    }
    blocks
}

enum Scan<'a> {
    Balanced(&'a str),
    Unbalanced,
}

/// Returns the balanced structure starting at byte `start`.
fn scan_from(text: &str, start: usize) -> Scan<'_> {
    let bytes = text.as_bytes();
    let mut stack: Vec<u8> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => stack.push(b'}'),
            b'[' => stack.push(b']'),
            b'}' | b']' => {
                if stack.pop() != Some(b) {
                    return Scan::Unbalanced;
                }
                if stack.is_empty() {
                    return Scan::Balanced(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    Scan::Unbalanced
}

#[derive(Default)]
struct Outcome {
    saw_candidate: bool,
    saw_unbalanced: bool,
    last_error: Option<String>,
}

fn first_structure(text: &str, outcome: &mut Outcome) -> Option<Value> {
    for (i, c) in text.char_indices() {
        if c != '{' && c != '[' {
            continue;
        }
        outcome.saw_candidate = true;
        match scan_from(text, i) {
            Scan::Balanced(candidate) => match serde_json::from_str::<Value>(candidate) {
                Ok(v) => return Some(v),
                Err(e) => outcome.last_error = Some(e.to_string()),
            },
            Scan::Unbalanced => outcome.saw_unbalanced = true,
        }
    }
    None
}

/// First balanced JSON object or array in `response`, ignoring code fences
/// and surrounding prose.
pub fn extract_json(response: &str) -> Result<Value, GatewayError> {
    let trimmed = response.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        if v.is_object() || v.is_array() {
            return Ok(v);
        }
    }
    let mut outcome = Outcome::default();
    for block in fenced_blocks(trimmed) {
        if let Some(v) = first_structure(block, &mut outcome) {
            return Ok(v);
        }
    }
    if let Some(v) = first_structure(trimmed, &mut outcome) {
        return Ok(v);
    }
    if outcome.saw_unbalanced && outcome.last_error.is_none() {
        Err(GatewayError::UnbalancedStructure)
    } else if let Some(e) = outcome.last_error {
        Err(GatewayError::MalformedStructure(e))
    } else if outcome.saw_candidate {
        Err(GatewayError::UnbalancedStructure)
    } else {
        Err(GatewayError::NoStructureFound)
    }
}
