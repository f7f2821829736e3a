//! Dense voxel grids and interlayer synthesis.
//!
//! Cells are stored as palette indices in `(y, z, x)` scan order, so the
//! natural iteration order of the backing vector is the export order.
//! Sections are placed one after another; later sections overwrite earlier
//! cells. Hollow cuboids are filled and then have their interior cleared.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::interlayer::{BlockExtent, BlockPoint, InterlayerDocument, MaterialId, Section, SectionKind, StateMap};

pub const DEFAULT_MAX_CELLS: u64 = 16_777_216;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub material: MaterialId,
    pub state: StateMap,
}

impl Block {
    pub fn new(material: MaterialId) -> Self {
        Self { material, state: StateMap::new() }
    }

    pub fn with_state(material: MaterialId, state: StateMap) -> Self {
        Self { material, state }
    }

    /// `minecraft:oak_door[facing=south,hinge=left]`
    pub fn command_form(&self) -> String {
        if self.state.is_empty() {
            self.material.namespaced()
        } else {
            format!("{}[{}]", self.material.namespaced(), self.state.bracket_body())
        }
    }

    fn palette_key(&self) -> String {
        format!("{}[{}]", self.material, self.state.bracket_body())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid of {cells} cells exceeds the limit of {limit}")]
    TooLarge { cells: u64, limit: u64 },
    #[error("point {0} lies outside the grid")]
    OutOfBounds(BlockPoint),
}

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    origin: BlockPoint,
    dims: [u32; 3],
    /// 0 is air, otherwise `palette[i - 1]`.
    cells: Vec<u32>,
    palette: Vec<Block>,
    palette_index: HashMap<String, u32>,
}

impl VoxelGrid {
    pub fn new(origin: BlockPoint, dims: [u32; 3]) -> Result<Self, GridError> {
        Self::with_limit(origin, dims, DEFAULT_MAX_CELLS)
    }

    pub fn with_limit(origin: BlockPoint, dims: [u32; 3], max_cells: u64) -> Result<Self, GridError> {
        let cells = dims.iter().map(|&d| u64::from(d)).product::<u64>();
        if cells > max_cells {
            return Err(GridError::TooLarge { cells, limit: max_cells });
        }
        // the far corner must stay representable
        for (o, d) in origin.coords().into_iter().zip(dims) {
            if i64::from(o) + i64::from(d) > i64::from(i32::MAX) + 1 {
                return Err(GridError::OutOfBounds(origin));
            }
        }
        Ok(Self {
            origin,
            dims,
            cells: vec![0; cells as usize],
            palette: Vec::new(),
            palette_index: HashMap::new(),
        })
    }

    pub fn origin(&self) -> BlockPoint {
        self.origin
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    /// Largest point inside the grid, `None` for an empty grid.
    pub fn max_point(&self) -> Option<BlockPoint> {
        if self.cells.is_empty() {
            return None;
        }
        Some(BlockPoint::new(
            self.origin.x + self.dims[0] as i32 - 1,
            self.origin.y + self.dims[1] as i32 - 1,
            self.origin.z + self.dims[2] as i32 - 1,
        ))
    }

    pub fn contains(&self, p: BlockPoint) -> bool {
        self.index(p).is_some()
    }

    fn index(&self, p: BlockPoint) -> Option<usize> {
        let rel = |axis: usize| -> Option<usize> {
            let d = i64::from(p.coords()[axis]) - i64::from(self.origin.coords()[axis]);
            (0..i64::from(self.dims[axis])).contains(&d).then_some(d as usize)
        };
        let (x, y, z) = (rel(0)?, rel(1)?, rel(2)?);
        let (sx, sz) = (self.dims[0] as usize, self.dims[2] as usize);
        Some((y * sz + z) * sx + x)
    }

    fn point_of(&self, index: usize) -> BlockPoint {
        let (sx, sz) = (self.dims[0] as usize, self.dims[2] as usize);
        let x = index % sx;
        let z = (index / sx) % sz;
        let y = index / (sx * sz);
        BlockPoint::new(
            self.origin.x + x as i32,
            self.origin.y + y as i32,
            self.origin.z + z as i32,
        )
    }

    /// The block at `p`; `None` for air and for points outside the grid.
    pub fn block_at(&self, p: BlockPoint) -> Option<&Block> {
        let slot = *self.cells.get(self.index(p)?)?;
        (slot != 0).then(|| &self.palette[slot as usize - 1])
    }

    pub fn is_solid(&self, p: BlockPoint) -> bool {
        self.index(p).is_some_and(|i| self.cells[i] != 0)
    }

    /// Sets or clears one cell. Air-like materials clear.
    pub fn set(&mut self, p: BlockPoint, block: Option<Block>) -> Result<(), GridError> {
        let i = self.index(p).ok_or(GridError::OutOfBounds(p))?;
        self.cells[i] = match block {
            Some(b) if !b.material.is_air() => self.intern(b),
            _ => 0,
        };
        Ok(())
    }

    fn intern(&mut self, block: Block) -> u32 {
        let key = block.palette_key();
        if let Some(&slot) = self.palette_index.get(&key) {
            return slot;
        }
        self.palette.push(block);
        let slot = self.palette.len() as u32;
        self.palette_index.insert(key, slot);
        slot
    }

    /// Non-air cells in ascending `(y, z, x)` order.
    pub fn iter_blocks(&self) -> impl Iterator<Item = (BlockPoint, &Block)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &slot)| slot != 0)
            .map(|(i, &slot)| (self.point_of(i), &self.palette[slot as usize - 1]))
    }

    pub fn block_count(&self) -> usize {
        self.cells.iter().filter(|&&s| s != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|&s| s == 0)
    }

    /// Places one section with its coordinates shifted by `offset`. A
    /// section that does not fit entirely inside the grid is not placed.
    pub fn place_section(&mut self, section: &Section, offset: BlockPoint) -> Result<SectionPlacement, GridError> {
        let (lo, hi) = shifted_bounds(section, offset).ok_or(GridError::OutOfBounds(offset))?;
        if !self.contains(lo) {
            return Err(GridError::OutOfBounds(lo));
        }
        if !self.contains(hi) {
            return Err(GridError::OutOfBounds(hi));
        }
        let mut stats = SectionPlacement::default();
        match &section.kind {
            SectionKind::Structural { hollow, .. } => {
                let block = Block::new(section.material.clone());
                let filled = self.fill(lo, hi, Some(block));
                if section.material.is_air() {
                    stats.carved += filled;
                } else {
                    stats.placed += filled;
                }
                if *hollow {
                    if let Some((ilo, ihi)) = interior(lo, hi) {
                        stats.carved += self.fill(ilo, ihi, None);
                    }
                }
            }
            SectionKind::Functional { state, .. } => {
                let block = Block::with_state(section.material.clone(), state.clone());
                self.set(lo, Some(block))?;
                if section.material.is_air() {
                    stats.carved += 1;
                } else {
                    stats.placed += 1;
                }
            }
        }
        Ok(stats)
    }

    fn fill(&mut self, lo: BlockPoint, hi: BlockPoint, block: Option<Block>) -> u64 {
        let slot = match block {
            Some(b) if !b.material.is_air() => self.intern(b),
            _ => 0,
        };
        let mut n = 0;
        for y in lo.y..=hi.y {
            for z in lo.z..=hi.z {
                let start = self.index(BlockPoint::new(lo.x, y, z)).expect("bounds checked");
                let len = (hi.x - lo.x + 1) as usize;
                self.cells[start..start + len].fill(slot);
                n += len as u64;
            }
        }
        n
    }
}

/// Grids are equal when they cover the same cells with the same blocks,
/// regardless of palette order.
impl PartialEq for VoxelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.origin == other.origin
            && self.dims == other.dims
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| match (a, b) {
                (0, 0) => true,
                (0, _) | (_, 0) => false,
                (a, b) => self.palette[a as usize - 1] == other.palette[b as usize - 1],
            })
    }
}

impl Eq for VoxelGrid {}

/// Carve region of a hollow cuboid: each axis shrunk by one on both sides.
/// Empty as soon as any axis is shorter than three cells.
fn interior(lo: BlockPoint, hi: BlockPoint) -> Option<(BlockPoint, BlockPoint)> {
    let ilo = BlockPoint::new(lo.x + 1, lo.y + 1, lo.z + 1);
    let ihi = BlockPoint::new(hi.x - 1, hi.y - 1, hi.z - 1);
    (ilo.x <= ihi.x && ilo.y <= ihi.y && ilo.z <= ihi.z).then_some((ilo, ihi))
}

fn shifted_bounds(section: &Section, offset: BlockPoint) -> Option<(BlockPoint, BlockPoint)> {
    let (lo, hi) = section.bounds();
    let shift = |p: BlockPoint| -> Option<BlockPoint> {
        Some(BlockPoint::new(
            p.x.checked_add(offset.x)?,
            p.y.checked_add(offset.y)?,
            p.z.checked_add(offset.z)?,
        ))
    };
    Some((shift(lo)?, shift(hi)?))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SectionPlacement {
    pub placed: u64,
    pub carved: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PlacementReport {
    pub blocks_placed: u64,
    pub blocks_carved: u64,
    pub sections_placed: usize,
    pub out_of_bounds_sections: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    pub max_cells: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { max_cells: DEFAULT_MAX_CELLS }
    }
}

pub fn synthesize(doc: &InterlayerDocument, offset: BlockPoint) -> (VoxelGrid, PlacementReport) {
    synthesize_with(doc, offset, &SynthesisOptions::default())
}

/// Renders `doc` into a grid fitted to its sections. Sections that would
/// push the grid past `max_cells`, or whose shifted coordinates overflow,
/// are skipped and listed in the report.
pub fn synthesize_with(
    doc: &InterlayerDocument,
    offset: BlockPoint,
    opts: &SynthesisOptions,
) -> (VoxelGrid, PlacementReport) {
    let mut report = PlacementReport::default();
    let mut bbox: Option<(BlockPoint, BlockPoint)> = None;
    let mut accepted = vec![false; doc.sections.len()];
    for (i, section) in doc.sections.iter().enumerate() {
        let Some((lo, hi)) = shifted_bounds(section, offset) else {
            continue;
        };
        let merged = match bbox {
            None => (lo, hi),
            Some((blo, bhi)) => (
                BlockPoint::new(blo.x.min(lo.x), blo.y.min(lo.y), blo.z.min(lo.z)),
                BlockPoint::new(bhi.x.max(hi.x), bhi.y.max(hi.y), bhi.z.max(hi.z)),
            ),
        };
        if BlockExtent::new(merged.0, merged.1).volume() <= opts.max_cells {
            bbox = Some(merged);
            accepted[i] = true;
        }
    }

    let mut grid = match bbox {
        Some((lo, hi)) => {
            let dims = BlockExtent::new(lo, hi).lengths().map(|l| l as u32);
            VoxelGrid::with_limit(lo, dims, opts.max_cells).expect("bounding box within limit")
        }
        None => VoxelGrid::with_limit(offset, [0, 0, 0], opts.max_cells).expect("empty grid"),
    };

    for (section, ok) in doc.sections.iter().zip(accepted) {
        match ok.then(|| grid.place_section(section, offset)) {
            Some(Ok(stats)) => {
                report.blocks_placed += stats.placed;
                report.blocks_carved += stats.carved;
                report.sections_placed += 1;
            }
            _ => report.out_of_bounds_sections.push(section.name.clone()),
        }
    }
    (grid, report)
}
