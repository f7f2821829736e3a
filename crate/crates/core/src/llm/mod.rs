//! Prompt assembly and the chat-completion round trips that turn a user
//! sentence into an interlayer document.

mod transport;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::interlayer::{extract_json, parse_document, InterlayerDocument, ParseMode};

pub use transport::{
    request_key, ChatMessage, ChatRequest, ChatResponse, HttpSettings, HttpTransport, RecordedTransport, Role,
    ScriptedTransport, Transport, TransportError, TransportKind, Usage, API_KEY_ENV, DEFAULT_BASE_URL,
    DEFAULT_NETWORK_RETRIES, DEFAULT_TIMEOUT,
};

pub const DEFAULT_MODEL: &str = "gpt-4";
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

pub const REFINEMENT_FILE: &str = "refinement_context.txt";
pub const FORMAT_FILE: &str = "format_spec.txt";
pub const BACKGROUND_FILE: &str = "background.txt";

const BUNDLED_REFINEMENT: &str = include_str!("../../data/prompts/refinement_context.txt");
const BUNDLED_FORMAT: &str = include_str!("../../data/prompts/format_spec.txt");
const BUNDLED_BACKGROUND: &str = include_str!("../../data/prompts/background.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("failed to read prompt file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("prompt part `{0}` is empty")]
    Empty(&'static str),
}

/// The three fixed texts every request is built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub refinement_context: String,
    pub format_spec: String,
    pub background: String,
}

/// Template files end with one newline for the sake of editors; it is
/// not part of the template.
fn template(text: &str) -> String {
    text.strip_suffix('\n').unwrap_or(text).to_owned()
}

impl PromptBundle {
    pub fn new(refinement_context: &str, format_spec: &str, background: &str) -> Result<Self, PromptError> {
        for (name, part) in [
            ("refinement_context", refinement_context),
            ("format_spec", format_spec),
            ("background", background),
        ] {
            if part.trim().is_empty() {
                return Err(PromptError::Empty(name));
            }
        }
        Ok(Self {
            refinement_context: template(refinement_context),
            format_spec: template(format_spec),
            background: template(background),
        })
    }

    pub fn bundled() -> Self {
        Self::new(BUNDLED_REFINEMENT, BUNDLED_FORMAT, BUNDLED_BACKGROUND).expect("bundled prompts are nonempty")
    }

    /// Loads `refinement_context.txt`, `format_spec.txt` and
    /// `background.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| PromptError::Io { path: path.display().to_string(), source })
        };
        Self::new(&read(REFINEMENT_FILE)?, &read(FORMAT_FILE)?, &read(BACKGROUND_FILE)?)
    }

    pub fn refinement_message(&self, raw: &str) -> String {
        format!("User Input = \"{raw}\"\nContext = \n{}", self.refinement_context)
    }

    pub fn generation_message(&self, refined: &str) -> String {
        format!(
            "Refined Description: \n{refined}\nFormat:\n{}\nBackground: \n{}",
            self.format_spec, self.background
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    /// Sent with every request; also what separates otherwise identical
    /// evaluation trials in the fixture store.
    pub seed: Option<u64>,
    pub max_attempts: u32,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            model: DEFAULT_MODEL.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            seed: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl GenerationSettings {
    fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed: self.seed,
        }
    }
}

pub fn refinement_request(raw: &str, bundle: &PromptBundle, settings: &GenerationSettings) -> ChatRequest {
    settings.request(vec![ChatMessage::user(bundle.refinement_message(raw))])
}

pub fn generation_request(refined: &str, bundle: &PromptBundle, settings: &GenerationSettings) -> ChatRequest {
    settings.request(vec![ChatMessage::user(bundle.generation_message(refined))])
}

/// Follow-up sent after an unparseable reply.
pub fn correction_message(error: &str) -> String {
    format!(
        "The JSON in your previous reply could not be read ({error}). \
         Reply with the complete corrected JSON document only."
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Refinement {
    pub text: String,
    pub fallback: bool,
    pub request_key: String,
    pub error: Option<String>,
}

/// Asks the model to expand `raw`. Any transport failure yields `raw`
/// itself with `fallback` set.
pub fn refine_prompt(
    raw: &str,
    bundle: &PromptBundle,
    transport: &dyn Transport,
    settings: &GenerationSettings,
) -> Refinement {
    let req = refinement_request(raw, bundle, settings);
    let key = request_key(&req);
    match transport.complete(&req) {
        Ok(resp) => Refinement { text: resp.content, fallback: false, request_key: key, error: None },
        Err(e) => Refinement { text: raw.to_owned(), fallback: true, request_key: key, error: Some(e.to_string()) },
    }
}

/// Everything needed to reproduce or audit one generation. Contains no
/// credentials and no wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationTrace {
    pub raw_input: String,
    pub refine: bool,
    pub refined_prompt: String,
    pub refine_fallback: bool,
    pub interlayer_text: String,
    pub attempts: u32,
    pub transport: TransportKind,
    pub model: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub request_keys: Vec<String>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("no parseable interlayer after {} attempt(s): {}", .trace.attempts, .trace.errors.last().map(String::as_str).unwrap_or("no reply"))]
pub struct GenerationFailed {
    /// Every reply received, in order.
    pub responses: Vec<String>,
    pub trace: GenerationTrace,
}

/// Sends the assembled generation prompt and parses the reply, retrying
/// with the parse error appended to the conversation.
#[allow(clippy::result_large_err)]
pub fn generate_interlayer(
    refined: &str,
    bundle: &PromptBundle,
    transport: &dyn Transport,
    settings: &GenerationSettings,
) -> Result<(InterlayerDocument, GenerationTrace), GenerationFailed> {
    let mut trace = GenerationTrace {
        raw_input: refined.to_owned(),
        refine: false,
        refined_prompt: refined.to_owned(),
        refine_fallback: false,
        interlayer_text: String::new(),
        attempts: 0,
        transport: transport.kind(),
        model: settings.model.clone(),
        temperature: settings.temperature,
        seed: settings.seed,
        request_keys: Vec::new(),
        errors: Vec::new(),
    };
    let mut responses = Vec::new();
    let mut messages = vec![ChatMessage::user(bundle.generation_message(refined))];
    let max = settings.max_attempts.max(1);
    while trace.attempts < max {
        trace.attempts += 1;
        let req = settings.request(messages.clone());
        trace.request_keys.push(request_key(&req));
        let reply = match transport.complete(&req) {
            Ok(r) => r.content,
            Err(e) => {
                trace.errors.push(format!("attempt {}: {e}", trace.attempts));
                continue;
            }
        };
        responses.push(reply.clone());
        let parsed = extract_json(&reply)
            .map_err(|e| e.to_string())
            .and_then(|json| parse_document(json, ParseMode::Lenient).map_err(|e| e.to_string()));
        match parsed {
            Ok(doc) => {
                trace.interlayer_text = reply;
                return Ok((doc, trace));
            }
            Err(msg) => {
                trace.errors.push(format!("attempt {}: {msg}", trace.attempts));
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(correction_message(&msg)));
            }
        }
    }
    trace.interlayer_text = responses.last().cloned().unwrap_or_default();
    Err(GenerationFailed { responses, trace })
}

/// Refinement (optional) followed by generation, with the trace covering
/// both steps.
#[allow(clippy::result_large_err)]
pub fn run_generation(
    raw: &str,
    refine: bool,
    bundle: &PromptBundle,
    transport: &dyn Transport,
    settings: &GenerationSettings,
) -> Result<(InterlayerDocument, GenerationTrace), GenerationFailed> {
    let refinement = refine.then(|| refine_prompt(raw, bundle, transport, settings));
    let refined = refinement.as_ref().map_or(raw, |r| r.text.as_str());
    let patch = |trace: &mut GenerationTrace| {
        trace.raw_input = raw.to_owned();
        trace.refine = refine;
        if let Some(r) = &refinement {
            trace.refine_fallback = r.fallback;
            trace.request_keys.insert(0, r.request_key.clone());
            if let Some(e) = &r.error {
                trace.errors.insert(0, format!("refinement: {e}"));
            }
        }
    };
    match generate_interlayer(refined, bundle, transport, settings) {
        Ok((doc, mut trace)) => {
            patch(&mut trace);
            Ok((doc, trace))
        }
        Err(mut failed) => {
            patch(&mut failed.trace);
            Err(failed)
        }
    }
}
