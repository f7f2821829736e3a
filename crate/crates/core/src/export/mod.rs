//! Output targets for a synthesized grid.
//!
//! All three targets walk [`VoxelGrid::iter_blocks`], so a command script,
//! a dump and an HTTP transcript of the same grid list the same blocks in
//! the same order.

mod http;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::interlayer::{BlockPoint, MaterialId, StateMap};
use crate::voxel::{Block, GridError, VoxelGrid};

pub use http::{
    normalize_endpoint, place_via_http, placement_body, HttpPlacement, PlacementBatchResult, PlacementFailure,
    DEFAULT_BATCH_SIZE, DEFAULT_ENDPOINT,
};

pub const DUMP_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("placement endpoint {endpoint} unreachable: {reason}")]
    EndpointUnreachable { endpoint: String, reason: String },
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a voxel dump: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported voxel dump version {0}")]
    Version(u64),
    #[error("block {index}: {message}")]
    Block { index: usize, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExportTarget {
    CommandScript { path: PathBuf },
    VoxelDump { path: PathBuf },
    HttpPlacement(HttpPlacement),
}

fn write_file(path: &Path, text: &str) -> Result<(), ExportError> {
    std::fs::write(path, text).map_err(|source| ExportError::Io { path: path.to_owned(), source })
}

/// One `setblock` line per block, coordinates shifted by `offset`.
pub fn command_script(grid: &VoxelGrid, offset: BlockPoint) -> String {
    let mut out = String::new();
    for (p, block) in grid.iter_blocks() {
        let q = p.offset(offset);
        writeln!(out, "setblock {} {} {} {}", q.x, q.y, q.z, block.command_form()).expect("string write");
    }
    out
}

pub fn export_command_script(grid: &VoxelGrid, offset: BlockPoint, path: &Path) -> Result<(), ExportError> {
    write_file(path, &command_script(grid, offset))
}

fn block_json(p: BlockPoint, block: &Block) -> Value {
    let mut obj = Map::new();
    obj.insert("x".into(), p.x.into());
    obj.insert("y".into(), p.y.into());
    obj.insert("z".into(), p.z.into());
    obj.insert("id".into(), block.material.namespaced().into());
    if !block.state.is_empty() {
        obj.insert("state".into(), block.state.to_json());
    }
    Value::Object(obj)
}

/// Voxel dump, version 1. One block per line so diffs stay readable.
pub fn voxel_dump(grid: &VoxelGrid) -> String {
    let compact = |v: Value| serde_json::to_string(&v).expect("json");
    let mut out = format!(
        "{{\"version\":{DUMP_VERSION},\"dims\":{},\"origin\":{},\"blocks\":[",
        compact(grid.dims().to_vec().into()),
        compact(grid.origin().coords().to_vec().into()),
    );
    let mut first = true;
    for (p, block) in grid.iter_blocks() {
        out.push_str(if first { "\n" } else { ",\n" });
        first = false;
        out.push_str(&compact(block_json(p, block)));
    }
    if !first {
        out.push('\n');
    }
    out.push_str("]}\n");
    out
}

pub fn export_voxel_dump(grid: &VoxelGrid, path: &Path) -> Result<(), ExportError> {
    write_file(path, &voxel_dump(grid))
}

#[derive(Deserialize)]
struct RawDump {
    version: u64,
    dims: [u32; 3],
    origin: [i32; 3],
    blocks: Vec<RawBlock>,
}

#[derive(Deserialize)]
struct RawBlock {
    x: i32,
    y: i32,
    z: i32,
    id: String,
    #[serde(default)]
    state: Map<String, Value>,
}

pub fn parse_voxel_dump(text: &str) -> Result<VoxelGrid, DumpError> {
    let raw: RawDump = serde_json::from_str(text)?;
    if raw.version != DUMP_VERSION {
        return Err(DumpError::Version(raw.version));
    }
    let mut grid = VoxelGrid::new(BlockPoint::from_coords(raw.origin), raw.dims)?;
    for (index, b) in raw.blocks.into_iter().enumerate() {
        let bad = |message: String| DumpError::Block { index, message };
        let material = MaterialId::new(&b.id).ok_or_else(|| bad(format!("invalid id {:?}", b.id)))?;
        let mut state = StateMap::new();
        for (k, v) in b.state {
            match v {
                Value::String(s) => state.insert(k, s),
                other => return Err(bad(format!("state `{k}` is not a string: {other}"))),
            }
        }
        grid.set(BlockPoint::new(b.x, b.y, b.z), Some(Block::with_state(material, state)))?;
    }
    Ok(grid)
}

pub fn load_voxel_dump(path: &Path) -> Result<VoxelGrid, DumpError> {
    let text = std::fs::read_to_string(path).map_err(|source| DumpError::Io { path: path.to_owned(), source })?;
    parse_voxel_dump(&text)
}
