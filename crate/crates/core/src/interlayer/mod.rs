//! The JSON interlayer: a building as an ordered list of named sections.
//!
//! Two layouts are accepted. The flat one keeps sections at the top level
//! and uses a `location` key; the nested one wraps sections in a single
//! building object and uses `position` plus an explicit `functional` flag.
//! Serialization always produces the nested-style keys.

mod extract;
mod parse;
mod serialize;
mod types;

pub use extract::{extract_json, ExtractFailure};
pub use parse::{parse_document, ParseFailure, ParseMode};
pub use serialize::serialize_document;
pub(crate) use serialize::to_pretty;
pub use types::{
    BlockExtent, BlockPoint, InterlayerDocument, MaterialId, Section, SectionKind, StateMap, NAMESPACE,
};
pub(crate) use types::is_canonical_token;
