//! Pulling a JSON object out of a chat reply.
//!
//! Replies tend to wrap the object in Markdown fences or surround it with
//! prose. We look inside fenced blocks first, then fall back to the whole
//! text, and return the first brace-balanced region. Braces inside string
//! literals do not count.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no balanced JSON object found in text")]
pub struct ExtractFailure;

/// Upper bound on candidate `{` positions tried per region.
const MAX_STARTS: usize = 64;

pub fn extract_json(text: &str) -> Result<&str, ExtractFailure> {
    for block in fenced_blocks(text) {
        if let Some(found) = first_balanced_object(block) {
            return Ok(found);
        }
    }
    first_balanced_object(text).ok_or(ExtractFailure)
}

fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // the info string (`json`) runs to the end of the fence line
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => {
                blocks.push(body);
                break;
            }
        }
    }
    blocks
}

fn first_balanced_object(text: &str) -> Option<&str> {
    text.char_indices()
        .filter(|&(_, c)| c == '{')
        .take(MAX_STARTS)
        .find_map(|(start, _)| balanced_from(text, start))
}

fn balanced_from(text: &str, start: usize) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}
