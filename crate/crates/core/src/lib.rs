//! Text-to-building pipeline for Minecraft.
//!
//! A prompt is optionally expanded by a chat model, turned into a JSON
//! interlayer document, repaired against a block registry, rendered into a
//! voxel grid, checked for completeness and material satisfaction, and
//! exported as a command script, a voxel dump or live block placements.

pub mod assess;
pub mod cli;
pub mod export;
pub mod interlayer;
pub mod llm;
pub mod repair;
pub mod stub;
pub mod voxel;
