//! Automatic fixes for the mistakes models make when writing interlayers.
//!
//! Each section goes through four rules in a fixed order: naming style,
//! name completion, legality, then state filtering. Every change lands in a
//! [`RepairLog`] so a user can see exactly what was rewritten.

mod registry;

use std::fmt;

use serde::Serialize;

use crate::interlayer::{InterlayerDocument, MaterialId, Section};

pub use registry::{bundled_versions, BlockRegistry, RegistryError, DEFAULT_VERSION};

/// Replacement for ids the registry does not know.
pub const FALLBACK_MATERIAL: &str = "oak_planks";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RepairRule {
    IncompleteName,
    DisallowedProperty,
    IllegalMaterial,
    WrongNamingStyle,
}

impl RepairRule {
    pub const ALL: [RepairRule; 4] = [
        RepairRule::WrongNamingStyle,
        RepairRule::IncompleteName,
        RepairRule::IllegalMaterial,
        RepairRule::DisallowedProperty,
    ];

    pub fn description(self) -> &'static str {
        match self {
            Self::IncompleteName => "bare stem completed with the default colour or wood",
            Self::DisallowedProperty => "state property that placement APIs cannot set",
            Self::IllegalMaterial => "id not present in the target version, replaced with oak_planks",
            Self::WrongNamingStyle => "id not in lowercase underscore style",
        }
    }
}

impl fmt::Display for RepairRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepairEntry {
    pub rule: RepairRule,
    pub section: String,
    /// `material` or `state.<key>`.
    pub path: String,
    pub before: String,
    /// Empty when a state entry was removed.
    pub after: String,
}

impl fmt::Display for RepairEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.after.is_empty() {
            write!(f, "[{}] {}.{}: removed {:?}", self.rule, self.section, self.path, self.before)
        } else {
            write!(
                f,
                "[{}] {}.{}: {:?} -> {:?}",
                self.rule, self.section, self.path, self.before, self.after
            )
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RepairLog {
    pub entries: Vec<RepairEntry>,
}

impl RepairLog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Applies the logged substitutions to `doc`. Replaying the log of
    /// `repair_document(d)` onto `d` yields the repaired document.
    pub fn replay(&self, doc: &InterlayerDocument) -> InterlayerDocument {
        let mut out = doc.clone();
        for entry in &self.entries {
            let Some(section) = out.sections.iter_mut().find(|s| s.name == entry.section) else {
                continue;
            };
            if entry.path == "material" {
                if let Some(m) = MaterialId::new(&entry.after) {
                    section.material = m;
                }
            } else if let Some(key) = entry.path.strip_prefix("state.") {
                if let Some(state) = section.state_mut() {
                    state.remove(key);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: RepairRule,
    pub section: String,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}.{}: {}", self.rule, self.section, self.path, self.message)
    }
}

pub fn repair_document(doc: &InterlayerDocument, registry: &BlockRegistry) -> (InterlayerDocument, RepairLog) {
    let mut log = RepairLog::default();
    let sections = doc
        .sections
        .iter()
        .map(|s| repair_section(s, registry, &mut log))
        .collect();
    (InterlayerDocument::new(doc.building_name.clone(), sections), log)
}

/// Everything `repair_document` would change, without changing it.
pub fn validate_document(doc: &InterlayerDocument, registry: &BlockRegistry) -> Vec<Violation> {
    let (_, log) = repair_document(doc, registry);
    log.entries
        .into_iter()
        .map(|e| {
            let message = match e.rule {
                RepairRule::DisallowedProperty => format!("state `{}` is not placeable", e.before),
                RepairRule::IllegalMaterial => {
                    format!("`{}` is not a block in version {}", e.before, registry.version())
                }
                RepairRule::IncompleteName => format!("`{}` is incomplete, expected e.g. `{}`", e.before, e.after),
                RepairRule::WrongNamingStyle => format!("`{}` should be written `{}`", e.before, e.after),
            };
            Violation { rule: e.rule, section: e.section, path: e.path, message }
        })
        .collect()
}

fn repair_section(section: &Section, registry: &BlockRegistry, log: &mut RepairLog) -> Section {
    let mut out = section.clone();
    let mut material = section.material.as_str().to_owned();
    let mut record = |rule, before: &str, after: &str| {
        log.entries.push(RepairEntry {
            rule,
            section: section.name.clone(),
            path: "material".into(),
            before: before.to_owned(),
            after: after.to_owned(),
        })
    };

    let styled = normalize_style(&material);
    if styled != material {
        record(RepairRule::WrongNamingStyle, &material, &styled);
        material = styled;
    }
    if let Some(full) = registry.family_default(&material) {
        record(RepairRule::IncompleteName, &material, full);
        material = full.to_owned();
    }
    if !registry.contains(&material) {
        record(RepairRule::IllegalMaterial, &material, FALLBACK_MATERIAL);
        material = FALLBACK_MATERIAL.to_owned();
    }
    out.material = MaterialId::new(&material).expect("repaired material is nonempty");

    if let Some(state) = out.state_mut() {
        let rejected: Vec<(String, String)> = state
            .iter()
            .filter(|(k, _)| !registry.allows_state(&material, k))
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect();
        for (key, value) in rejected {
            state.remove(&key);
            log.entries.push(RepairEntry {
                rule: RepairRule::DisallowedProperty,
                section: section.name.clone(),
                path: format!("state.{key}"),
                before: format!("{key}={value}"),
                after: String::new(),
            });
        }
    }
    out
}

/// Lowercase underscore style: `Red Bed` and `RedBed` both become `red_bed`,
/// `minecraft:Oak_Door` becomes `oak_door`. Characters outside `[a-z0-9_]`
/// are dropped.
pub fn normalize_style(raw: &str) -> String {
    let bare = raw.rsplit(':').next().unwrap_or(raw).trim();
    let mut out = String::with_capacity(bare.len());
    let mut prev: Option<char> = None;
    for c in bare.chars() {
        if c.is_ascii_uppercase() && prev.is_some_and(|p| p.is_ascii_lowercase() || p.is_ascii_digit()) {
            out.push('_');
        }
        match c {
            'a'..='z' | '0'..='9' | '_' => out.push(c),
            'A'..='Z' => out.push(c.to_ascii_lowercase()),
            c if c.is_whitespace() || c == '-' || c == '.' => out.push('_'),
            _ => {}
        }
        prev = Some(c);
    }
    let mut collapsed = String::with_capacity(out.len());
    for part in out.split('_').filter(|p| !p.is_empty()) {
        if !collapsed.is_empty() {
            collapsed.push('_');
        }
        collapsed.push_str(part);
    }
    collapsed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interlayer::{BlockExtent, BlockPoint, StateMap};

    fn registry() -> BlockRegistry {
        BlockRegistry::bundled(DEFAULT_VERSION).unwrap()
    }

    fn cube(name: &str, material: &str) -> Section {
        Section::structural(
            name,
            BlockExtent::new(BlockPoint::ORIGIN, BlockPoint::new(1, 1, 1)),
            false,
            MaterialId::new(material).unwrap(),
        )
    }

    fn single(name: &str, material: &str, state: &[(&str, &str)]) -> Section {
        Section::functional(
            name,
            BlockPoint::ORIGIN,
            state.iter().copied().collect::<StateMap>(),
            MaterialId::new(material).unwrap(),
        )
    }

    fn repaired_material(material: &str) -> String {
        let doc = InterlayerDocument::new(None, vec![cube("s", material)]);
        let (out, _) = repair_document(&doc, &registry());
        out.sections[0].material.as_str().to_owned()
    }

    #[test]
    fn style_normalization() {
        assert_eq!(normalize_style("Red Bed"), "red_bed");
        assert_eq!(normalize_style("RedBed"), "red_bed");
        assert_eq!(normalize_style("OAK_PLANKS"), "oak_planks");
        assert_eq!(normalize_style("minecraft:Glass Pane"), "glass_pane");
        assert_eq!(normalize_style("  stone  bricks "), "stone_bricks");
        assert_eq!(normalize_style("light-gray wool"), "light_gray_wool");
        assert_eq!(normalize_style("!!!"), "");
    }

    #[test]
    fn red_bed_style() {
        let doc = InterlayerDocument::new(None, vec![single("bed", "Red Bed", &[])]);
        let (out, log) = repair_document(&doc, &registry());
        assert_eq!(out.sections[0].material.as_str(), "red_bed");
        assert_eq!(log.len(), 1);
        assert_eq!(log.entries[0].rule, RepairRule::WrongNamingStyle);
        assert_eq!(log.entries[0].before, "Red Bed");
    }

    #[test]
    fn rewrite_table() {
        for (from, to) in [
            ("bed", "white_bed"),
            ("door", "oak_door"),
            ("planks", "oak_planks"),
            ("carpet", "white_carpet"),
            ("stairs", "oak_stairs"),
            ("glass_panes", "glass_pane"),
            ("iron_ingot", "iron_block"),
            ("minecraft:door", "oak_door"),
        ] {
            assert_eq!(repaired_material(from), to, "{from}");
        }
    }

    #[test]
    fn disallowed_states_removed() {
        let doc = InterlayerDocument::new(
            None,
            vec![
                single("bed", "white_bed", &[("facing", "west"), ("occupied", "true"), ("part", "head")]),
                single("door", "oak_door", &[("facing", "south"), ("hinge", "left"), ("open", "true")]),
                single("pot", "flower_pot", &[("hinge", "left")]),
            ],
        );
        let (out, log) = repair_document(&doc, &registry());
        assert_eq!(out.sections[0].state().unwrap().bracket_body(), "facing=west,part=head");
        assert_eq!(out.sections[1].state().unwrap().bracket_body(), "facing=south,hinge=left");
        assert!(out.sections[2].state().unwrap().is_empty());
        assert_eq!(log.len(), 3);
        assert!(log.entries.iter().all(|e| e.rule == RepairRule::DisallowedProperty));
        assert_eq!(log.entries[0].path, "state.occupied");
    }

    #[test]
    fn illegal_material_falls_back() {
        let doc = InterlayerDocument::new(None, vec![cube("s", "chocolate_block")]);
        let (out, log) = repair_document(&doc, &registry());
        assert_eq!(out.sections[0].material.as_str(), "oak_planks");
        assert_eq!(log.entries[0].rule, RepairRule::IllegalMaterial);
        assert_eq!(log.entries[0].after, "oak_planks");
    }

    #[test]
    fn style_then_completion_then_legality_in_one_pass() {
        let doc = InterlayerDocument::new(None, vec![cube("s", "Glass Panes")]);
        let (out, log) = repair_document(&doc, &registry());
        assert_eq!(out.sections[0].material.as_str(), "glass_pane");
        let rules: Vec<_> = log.entries.iter().map(|e| e.rule).collect();
        assert_eq!(rules, vec![RepairRule::WrongNamingStyle, RepairRule::IncompleteName]);

        let doc = InterlayerDocument::new(None, vec![cube("s", "???")]);
        let (out, log) = repair_document(&doc, &registry());
        assert_eq!(out.sections[0].material.as_str(), "oak_planks");
        assert_eq!(log.entries.last().unwrap().before, "");
    }

    #[test]
    fn canonical_document_unchanged() {
        let doc = InterlayerDocument::new(None, vec![cube("s", "spruce_planks")]);
        let (out, log) = repair_document(&doc, &registry());
        assert!(log.is_empty());
        assert_eq!(out, doc);
        assert!(validate_document(&doc, &registry()).is_empty());
    }

    #[test]
    fn validate_reports_style() {
        let doc = InterlayerDocument::new(None, vec![single("bed", "Red Bed", &[])]);
        let v = validate_document(&doc, &registry());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, RepairRule::WrongNamingStyle);
        assert_eq!(v[0].section, "bed");
        assert_eq!(v[0].path, "material");
        assert!(validate_document(&InterlayerDocument::default(), &registry()).is_empty());
    }

    #[test]
    fn replay_reproduces_repair() {
        let doc = InterlayerDocument::new(
            None,
            vec![single("bed", "Bed", &[("occupied", "false"), ("part", "foot")]), cube("w", "Chocolate")],
        );
        let (out, log) = repair_document(&doc, &registry());
        assert_eq!(log.replay(&doc), out);
    }
}
