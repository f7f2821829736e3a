use std::cmp::Ordering;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const NAMESPACE: &str = "minecraft:";

/// A block identifier such as `oak_planks`.
///
/// The `minecraft:` namespace is stripped on construction. Identifiers
/// coming straight out of a model response may still be non-canonical
/// (`Red Bed`); the repairer is responsible for bringing them into the
/// `[a-z0-9_]+` form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaterialId(String);

impl MaterialId {
    /// Returns `None` when nothing is left after stripping the namespace.
    pub fn new(raw: &str) -> Option<Self> {
        let bare = raw.strip_prefix(NAMESPACE).unwrap_or(raw);
        if bare.is_empty() {
            None
        } else {
            Some(Self(bare.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_canonical(&self) -> bool {
        is_canonical_token(&self.0)
    }

    /// `minecraft:<id>`, the spelling game commands expect.
    pub fn namespaced(&self) -> String {
        format!("{NAMESPACE}{}", self.0)
    }

    /// Air-like identifiers clear cells instead of occupying them.
    pub fn is_air(&self) -> bool {
        matches!(self.0.as_str(), "air" | "cave_air" | "void_air")
    }
}

impl fmt::Display for MaterialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn is_canonical_token(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Integer block coordinate; `y` is the height axis.
///
/// Points order by `(y, z, x)`, the same order grids are scanned in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BlockPoint {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl BlockPoint {
    pub const ORIGIN: BlockPoint = BlockPoint { x: 0, y: 0, z: 0 };

    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn offset(self, by: BlockPoint) -> Self {
        Self::new(self.x + by.x, self.y + by.y, self.z + by.z)
    }

    pub fn coords(self) -> [i32; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_coords(c: [i32; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }
}

impl Ord for BlockPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.z, self.x).cmp(&(other.y, other.z, other.x))
    }
}

impl PartialOrd for BlockPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BlockPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Cuboid extent as written in the interlayer. Start and end are inclusive
/// and may come in either order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockExtent {
    pub start: BlockPoint,
    pub end: BlockPoint,
}

impl BlockExtent {
    pub fn new(start: BlockPoint, end: BlockPoint) -> Self {
        Self { start, end }
    }

    pub fn min(&self) -> BlockPoint {
        BlockPoint::new(
            self.start.x.min(self.end.x),
            self.start.y.min(self.end.y),
            self.start.z.min(self.end.z),
        )
    }

    pub fn max(&self) -> BlockPoint {
        BlockPoint::new(
            self.start.x.max(self.end.x),
            self.start.y.max(self.end.y),
            self.start.z.max(self.end.z),
        )
    }

    /// Per-axis lengths, `|end - start| + 1`.
    pub fn lengths(&self) -> [u64; 3] {
        let (lo, hi) = (self.min(), self.max());
        [
            (i64::from(hi.x) - i64::from(lo.x) + 1) as u64,
            (i64::from(hi.y) - i64::from(lo.y) + 1) as u64,
            (i64::from(hi.z) - i64::from(lo.z) + 1) as u64,
        ]
    }

    pub fn volume(&self) -> u64 {
        self.lengths().iter().product()
    }
}

/// Block state properties in document order, e.g. `facing=south`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StateMap(IndexMap<String, String>);

impl StateMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a property; empty keys or values are ignored.
    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let (key, value) = (key.into(), value.into());
        if !key.is_empty() && !value.is_empty() {
            self.0.insert(key, value);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.shift_remove(key)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// `facing=south,hinge=left`
    pub fn bracket_body(&self) -> String {
        self.iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.iter()
                .map(|(k, v)| (k.to_owned(), Value::String(v.to_owned())))
                .collect(),
        )
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for StateMap {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut map = StateMap::new();
        for (k, v) in iter {
            map.insert(k, v);
        }
        map
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SectionKind {
    Structural { extent: BlockExtent, hollow: bool },
    Functional { point: BlockPoint, state: StateMap },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub kind: SectionKind,
    pub material: MaterialId,
    /// Fields the pipeline does not interpret, kept for round-tripping.
    pub extra: Map<String, Value>,
}

impl Section {
    pub fn structural(name: impl Into<String>, extent: BlockExtent, hollow: bool, material: MaterialId) -> Self {
        Self {
            name: name.into(),
            kind: SectionKind::Structural { extent, hollow },
            material,
            extra: Map::new(),
        }
    }

    pub fn functional(name: impl Into<String>, point: BlockPoint, state: StateMap, material: MaterialId) -> Self {
        Self {
            name: name.into(),
            kind: SectionKind::Functional { point, state },
            material,
            extra: Map::new(),
        }
    }

    pub fn is_functional(&self) -> bool {
        matches!(self.kind, SectionKind::Functional { .. })
    }

    pub fn state(&self) -> Option<&StateMap> {
        match &self.kind {
            SectionKind::Functional { state, .. } => Some(state),
            SectionKind::Structural { .. } => None,
        }
    }

    pub fn state_mut(&mut self) -> Option<&mut StateMap> {
        match &mut self.kind {
            SectionKind::Functional { state, .. } => Some(state),
            SectionKind::Structural { .. } => None,
        }
    }

    /// Inclusive bounds covered by this section.
    pub fn bounds(&self) -> (BlockPoint, BlockPoint) {
        match &self.kind {
            SectionKind::Structural { extent, .. } => (extent.min(), extent.max()),
            SectionKind::Functional { point, .. } => (*point, *point),
        }
    }
}

/// A building in interlayer form. Section order is placement order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterlayerDocument {
    pub building_name: Option<String>,
    pub sections: Vec<Section>,
}

impl InterlayerDocument {
    pub fn new(building_name: Option<String>, sections: Vec<Section>) -> Self {
        Self { building_name, sections }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn structural_count(&self) -> usize {
        self.sections.iter().filter(|s| !s.is_functional()).count()
    }

    pub fn functional_count(&self) -> usize {
        self.sections.iter().filter(|s| s.is_functional()).count()
    }

    /// Dotted path used in diagnostics, e.g. `wooden_house.walls`.
    pub fn section_path(&self, section: &str) -> String {
        match &self.building_name {
            Some(b) => format!("{b}.{section}"),
            None => section.to_owned(),
        }
    }
}
