//! Completeness and satisfaction checks for a synthesized building.
//!
//! The assessment flood-fills the 6-connected component containing a start
//! block, collecting the materials it touches (satisfaction is checked
//! against those), then repeatedly strips blocks that are not part of a
//! corner, edge or plane. The building is complete when something
//! survives.

mod classify;
mod requirements;

use std::collections::{BTreeSet, VecDeque};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::interlayer::{BlockPoint, MaterialId};
use crate::voxel::VoxelGrid;

pub use classify::{classify_block, classify_block_with, Connection, ConnectionSet, EdgeRule, Occupancy};
pub use requirements::{
    check_satisfaction, AliasTable, IdPattern, KeywordTable, MaterialRequirementList, Requirement, TableError,
};

use classify::DenseMask;

pub const DEFAULT_MAX_PRUNE_ITERATIONS: usize = 1_000_000;

/// Below this many live points a pruning round runs on one thread.
#[cfg(feature = "parallel")]
const PARALLEL_THRESHOLD: usize = 4096;

pub const FACE_NEIGHBOURS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssessError {
    #[error("start point {0} is air")]
    StartPointIsAir(BlockPoint),
    #[error("grid contains no blocks")]
    EmptyGrid,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pruning still removing blocks after {iterations} rounds ({remaining} left)")]
pub struct IterationBoundExceeded {
    pub iterations: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssessmentConfig {
    /// Flood-fill start; defaults to the lowest `(y, z, x)` block.
    pub start_point: Option<BlockPoint>,
    pub max_prune_iterations: usize,
    pub edge_rule: EdgeRule,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        Self {
            start_point: None,
            max_prune_iterations: DEFAULT_MAX_PRUNE_ITERATIONS,
            edge_rule: EdgeRule::RunOfThree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub points: BTreeSet<BlockPoint>,
    pub materials: BTreeSet<MaterialId>,
}

/// The 6-connected set of non-air cells containing `start`, with their
/// materials. Iterative breadth-first search.
pub fn flood_fill(grid: &VoxelGrid, start: BlockPoint) -> Result<Component, AssessError> {
    if !grid.is_solid(start) {
        return Err(AssessError::StartPointIsAir(start));
    }
    let mut points = BTreeSet::new();
    let mut materials = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    points.insert(start);
    while let Some(p) = queue.pop_front() {
        if let Some(block) = grid.block_at(p) {
            if !materials.contains(&block.material) {
                materials.insert(block.material.clone());
            }
        }
        for d in FACE_NEIGHBOURS {
            let q = BlockPoint::new(p.x.wrapping_add(d[0]), p.y.wrapping_add(d[1]), p.z.wrapping_add(d[2]));
            if grid.is_solid(q) && points.insert(q) {
                queue.push_back(q);
            }
        }
    }
    Ok(Component { points, materials })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pruned {
    pub retained: BTreeSet<BlockPoint>,
    /// Classification rounds run, including the final one that removed
    /// nothing.
    pub iterations: usize,
}

/// Removes, round by round, every point whose classification is empty.
/// Each round classifies against the set as it stood at the start of the
/// round.
pub fn prune_to_main_structure(
    points: &BTreeSet<BlockPoint>,
    max_iter: usize,
    edge: EdgeRule,
) -> Result<Pruned, IterationBoundExceeded> {
    #[cfg(feature = "parallel")]
    {
        prune_parallel(points, max_iter, edge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        prune_sequential(points, max_iter, edge)
    }
}

pub fn prune_sequential(
    points: &BTreeSet<BlockPoint>,
    max_iter: usize,
    edge: EdgeRule,
) -> Result<Pruned, IterationBoundExceeded> {
    prune_with(points, max_iter, |mask, live| {
        live.iter().map(|&p| classify_block_with(mask, p, edge).is_empty()).collect()
    })
}

#[cfg(feature = "parallel")]
pub fn prune_parallel(
    points: &BTreeSet<BlockPoint>,
    max_iter: usize,
    edge: EdgeRule,
) -> Result<Pruned, IterationBoundExceeded> {
    use rayon::prelude::*;
    prune_with(points, max_iter, |mask, live| {
        if live.len() < PARALLEL_THRESHOLD {
            live.iter().map(|&p| classify_block_with(mask, p, edge).is_empty()).collect()
        } else {
            live.par_iter().map(|&p| classify_block_with(mask, p, edge).is_empty()).collect()
        }
    })
}

fn prune_with<F>(points: &BTreeSet<BlockPoint>, max_iter: usize, removals: F) -> Result<Pruned, IterationBoundExceeded>
where
    F: Fn(&DenseMask, &[BlockPoint]) -> Vec<bool>,
{
    let mut mask = DenseMask::from_points(points.iter());
    let mut live: Vec<BlockPoint> = points.iter().copied().collect();
    let mut iterations = 0;
    while !live.is_empty() {
        if iterations == max_iter {
            return Err(IterationBoundExceeded { iterations, remaining: live.len() });
        }
        iterations += 1;
        let remove = removals(&mask, &live);
        if !remove.iter().any(|&r| r) {
            break;
        }
        let mut kept = Vec::with_capacity(live.len());
        for (p, r) in live.into_iter().zip(remove) {
            if r {
                mask.set(p, false);
            } else {
                kept.push(p);
            }
        }
        live = kept;
    }
    Ok(Pruned { retained: live.into_iter().collect(), iterations })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssessmentReport {
    pub satisfaction: bool,
    pub completeness: bool,
    pub start_point: BlockPoint,
    pub requirements: MaterialRequirementList,
    pub unmet_requirements: Vec<String>,
    pub materials_found: BTreeSet<MaterialId>,
    pub visited_count: usize,
    pub prune_iterations: usize,
    pub prune_bound_exceeded: bool,
    pub main_structure_size: usize,
    #[serde(serialize_with = "points_as_triples")]
    pub main_structure: BTreeSet<BlockPoint>,
}

fn points_as_triples<S: Serializer>(points: &BTreeSet<BlockPoint>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(points.iter().map(|p| p.coords()))
}

/// Lowest non-air cell in `(y, z, x)` order.
pub fn default_start_point(grid: &VoxelGrid) -> Option<BlockPoint> {
    grid.iter_blocks().next().map(|(p, _)| p)
}

pub fn assess(
    grid: &VoxelGrid,
    reqs: &MaterialRequirementList,
    cfg: &AssessmentConfig,
) -> Result<AssessmentReport, AssessError> {
    let start = match cfg.start_point {
        Some(p) => p,
        None => default_start_point(grid).ok_or(AssessError::EmptyGrid)?,
    };
    if grid.is_empty() {
        return Err(AssessError::EmptyGrid);
    }
    let component = flood_fill(grid, start)?;
    let unmet: Vec<String> = reqs.unmet(&component.materials).iter().map(|r| r.to_string()).collect();
    let (retained, iterations, exceeded) =
        match prune_to_main_structure(&component.points, cfg.max_prune_iterations, cfg.edge_rule) {
            Ok(p) => (p.retained, p.iterations, false),
            Err(e) => (BTreeSet::new(), e.iterations, true),
        };
    Ok(AssessmentReport {
        satisfaction: unmet.is_empty(),
        completeness: !retained.is_empty(),
        start_point: start,
        requirements: reqs.clone(),
        unmet_requirements: unmet,
        materials_found: component.materials,
        visited_count: component.points.len(),
        prune_iterations: iterations,
        prune_bound_exceeded: exceeded,
        main_structure_size: retained.len(),
        main_structure: retained,
    })
}
