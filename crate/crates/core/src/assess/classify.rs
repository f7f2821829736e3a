use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::interlayer::BlockPoint;

/// Anything that can answer "is there a block at p".
pub trait Occupancy {
    fn occupied(&self, p: BlockPoint) -> bool;
}

impl Occupancy for BTreeSet<BlockPoint> {
    fn occupied(&self, p: BlockPoint) -> bool {
        self.contains(&p)
    }
}

impl Occupancy for HashSet<BlockPoint> {
    fn occupied(&self, p: BlockPoint) -> bool {
        self.contains(&p)
    }
}

/// How a block takes part in a connecting structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Connection {
    Corner,
    Edge,
    Plane,
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConnectionSet(u8);

impl ConnectionSet {
    fn bit(c: Connection) -> u8 {
        match c {
            Connection::Corner => 1,
            Connection::Edge => 2,
            Connection::Plane => 4,
        }
    }

    pub fn insert(&mut self, c: Connection) {
        self.0 |= Self::bit(c);
    }

    pub fn contains(self, c: Connection) -> bool {
        self.0 & Self::bit(c) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Connection> {
        [Connection::Corner, Connection::Edge, Connection::Plane]
            .into_iter()
            .filter(move |&c| self.contains(c))
    }
}

impl fmt::Debug for ConnectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<Connection> for ConnectionSet {
    fn from_iter<I: IntoIterator<Item = Connection>>(iter: I) -> Self {
        let mut set = ConnectionSet::default();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

/// What counts as an edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum EdgeRule {
    /// The block sits in a straight run of at least three blocks.
    #[default]
    RunOfThree,
    /// Any face neighbour makes an edge.
    RunOfTwo,
}

const AXES: [[i32; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

fn step(p: BlockPoint, axis: usize, k: i32) -> BlockPoint {
    let d = AXES[axis];
    BlockPoint::new(p.x + d[0] * k, p.y + d[1] * k, p.z + d[2] * k)
}

pub fn classify_block<S: Occupancy + ?Sized>(points: &S, b: BlockPoint) -> ConnectionSet {
    classify_block_with(points, b, EdgeRule::RunOfThree)
}

/// Classifies `b` against its 3×3×3 neighbourhood (5 cells along each axis
/// for the run-of-three edge test).
///
/// * Corner: face neighbours along all three axes.
/// * Plane: `b` completes a filled 2×2 square in some axis-aligned plane.
/// * Edge: `b` lies in a straight run of at least three blocks.
pub fn classify_block_with<S: Occupancy + ?Sized>(points: &S, b: BlockPoint, edge: EdgeRule) -> ConnectionSet {
    let at = |axis: usize, k: i32| points.occupied(step(b, axis, k));
    let mut set = ConnectionSet::default();

    let has_axis = |axis: usize| at(axis, 1) || at(axis, -1);
    if (0..3).all(has_axis) {
        set.insert(Connection::Corner);
    }

    let is_edge = (0..3).any(|u| match edge {
        EdgeRule::RunOfThree => (at(u, 1) && at(u, -1)) || (at(u, 1) && at(u, 2)) || (at(u, -1) && at(u, -2)),
        EdgeRule::RunOfTwo => at(u, 1) || at(u, -1),
    });
    if is_edge {
        set.insert(Connection::Edge);
    }

    'plane: for u in 0..3 {
        for v in (u + 1)..3 {
            for s in [1, -1] {
                for t in [1, -1] {
                    if at(u, s) && at(v, t) && points.occupied(step(step(b, u, s), v, t)) {
                        set.insert(Connection::Plane);
                        break 'plane;
                    }
                }
            }
        }
    }
    set
}

/// Occupancy bitmap over a bounding box, used by the pruning loop.
pub(crate) struct DenseMask {
    lo: BlockPoint,
    dims: [i64; 3],
    bits: Vec<bool>,
}

impl DenseMask {
    pub(crate) fn from_points<'a>(points: impl Iterator<Item = &'a BlockPoint> + Clone) -> Self {
        let mut lo = [i32::MAX; 3];
        let mut hi = [i32::MIN; 3];
        for p in points.clone() {
            for (axis, c) in p.coords().into_iter().enumerate() {
                lo[axis] = lo[axis].min(c);
                hi[axis] = hi[axis].max(c);
            }
        }
        if lo[0] > hi[0] {
            return Self { lo: BlockPoint::ORIGIN, dims: [0; 3], bits: Vec::new() };
        }
        let dims = [0, 1, 2].map(|a| i64::from(hi[a]) - i64::from(lo[a]) + 1);
        let mut mask = Self {
            lo: BlockPoint::from_coords(lo),
            dims,
            bits: vec![false; (dims[0] * dims[1] * dims[2]) as usize],
        };
        for p in points {
            mask.set(*p, true);
        }
        mask
    }

    fn index(&self, p: BlockPoint) -> Option<usize> {
        let c = p.coords();
        let l = self.lo.coords();
        let mut rel = [0i64; 3];
        for a in 0..3 {
            let d = i64::from(c[a]) - i64::from(l[a]);
            if d < 0 || d >= self.dims[a] {
                return None;
            }
            rel[a] = d;
        }
        Some(((rel[1] * self.dims[2] + rel[2]) * self.dims[0] + rel[0]) as usize)
    }

    pub(crate) fn set(&mut self, p: BlockPoint, on: bool) {
        if let Some(i) = self.index(p) {
            self.bits[i] = on;
        }
    }
}

impl Occupancy for DenseMask {
    fn occupied(&self, p: BlockPoint) -> bool {
        self.index(p).is_some_and(|i| self.bits[i])
    }
}
