use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::interlayer::is_canonical_token;

/// Bundled registries, keyed by game version.
const BUNDLED: &[(&str, &str)] = &[("1.19.2", include_str!("../../data/registry/1.19.2.txt"))];

pub const DEFAULT_VERSION: &str = "1.19.2";

/// State keys that are never placeable, whatever the registry file says.
const ALWAYS_DISALLOWED: [&str; 2] = ["occupied", "open"];

const DEFAULT_STATE_FAMILY: &str = "default";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("failed to read registry {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("registry line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown registry version `{0}` (bundled: {bundled})", bundled = bundled_versions().join(", "))]
    UnknownVersion(String),
    #[error("inconsistent registry: {0}")]
    Inconsistent(String),
}

pub fn bundled_versions() -> Vec<&'static str> {
    BUNDLED.iter().map(|(v, _)| *v).collect()
}

/// Legal block ids for one game version plus the tables the repairer
/// consults: completions for incomplete names and per-family state keys.
#[derive(Debug, Clone)]
pub struct BlockRegistry {
    version: String,
    valid_ids: HashSet<String>,
    families: BTreeMap<String, String>,
    allowed_state_keys: BTreeMap<String, BTreeSet<String>>,
    disallowed_states: BTreeSet<String>,
}

#[derive(Clone, Copy)]
enum Part {
    Ids,
    Families,
    States,
    Disallowed,
}

impl BlockRegistry {
    pub fn bundled(version: &str) -> Result<Self, RegistryError> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(v, _)| *v == version)
            .ok_or_else(|| RegistryError::UnknownVersion(version.to_owned()))?;
        Self::parse(version, text)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.to_owned(),
            source,
        })?;
        let version = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&version, &text)
    }

    /// A bundled version name or a path to a registry file.
    pub fn resolve(spec: &str) -> Result<Self, RegistryError> {
        if BUNDLED.iter().any(|(v, _)| *v == spec) {
            return Self::bundled(spec);
        }
        let path = Path::new(spec);
        if path.exists() {
            Self::load(path)
        } else if spec.contains(['/', '\\']) || spec.ends_with(".txt") {
            Err(RegistryError::Io {
                path: path.to_owned(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            })
        } else {
            Err(RegistryError::UnknownVersion(spec.to_owned()))
        }
    }

    pub fn parse(version: &str, text: &str) -> Result<Self, RegistryError> {
        let mut reg = BlockRegistry {
            version: version.to_owned(),
            valid_ids: HashSet::new(),
            families: BTreeMap::new(),
            allowed_state_keys: BTreeMap::new(),
            disallowed_states: ALWAYS_DISALLOWED.iter().map(|s| s.to_string()).collect(),
        };
        let mut part = Part::Ids;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let syntax = |message: String| RegistryError::Syntax { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                part = match header.trim() {
                    "families" => Part::Families,
                    "states" => Part::States,
                    "disallowed" => Part::Disallowed,
                    other => return Err(syntax(format!("unknown section [{other}]"))),
                };
                continue;
            }
            match part {
                Part::Ids | Part::Disallowed => {
                    let token = line.strip_prefix("minecraft:").unwrap_or(line);
                    if !is_canonical_token(token) {
                        return Err(syntax(format!("`{line}` is not a lowercase identifier")));
                    }
                    if matches!(part, Part::Ids) {
                        reg.valid_ids.insert(token.to_owned());
                    } else {
                        reg.disallowed_states.insert(token.to_owned());
                    }
                }
                Part::Families => {
                    let (stem, default) = split_assignment(line).ok_or_else(|| syntax("expected `stem = id`".into()))?;
                    reg.families.insert(stem.to_owned(), default.to_owned());
                }
                Part::States => {
                    let (family, keys) =
                        split_assignment(line).ok_or_else(|| syntax("expected `family = key,key`".into()))?;
                    let keys = keys
                        .split(',')
                        .map(str::trim)
                        .filter(|k| !k.is_empty())
                        .map(str::to_owned)
                        .collect();
                    reg.allowed_state_keys.insert(family.to_owned(), keys);
                }
            }
        }
        reg.check()?;
        Ok(reg)
    }

    fn check(&self) -> Result<(), RegistryError> {
        for (stem, default) in &self.families {
            if !self.valid_ids.contains(default) {
                return Err(RegistryError::Inconsistent(format!(
                    "family `{stem}` completes to unknown id `{default}`"
                )));
            }
            if self.valid_ids.contains(stem) {
                return Err(RegistryError::Inconsistent(format!(
                    "family stem `{stem}` is itself a valid id"
                )));
            }
        }
        for (family, keys) in &self.allowed_state_keys {
            if let Some(bad) = keys.iter().find(|k| self.disallowed_states.contains(*k)) {
                return Err(RegistryError::Inconsistent(format!(
                    "state key `{bad}` is both allowed for `{family}` and disallowed"
                )));
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, id: &str) -> bool {
        self.valid_ids.contains(id)
    }

    pub fn len(&self) -> usize {
        self.valid_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_ids.is_empty()
    }

    /// Completion for a bare stem such as `bed`.
    pub fn family_default(&self, stem: &str) -> Option<&str> {
        self.families.get(stem).map(String::as_str)
    }

    pub fn is_disallowed_state(&self, key: &str) -> bool {
        self.disallowed_states.contains(key)
    }

    /// The state family a material belongs to: the longest family name that
    /// equals the id or is a `_`-separated suffix of it (`jungle_door` is a
    /// `door`, `oak_trapdoor` a `trapdoor`).
    pub fn state_family(&self, material: &str) -> &str {
        self.allowed_state_keys
            .keys()
            .filter(|f| f.as_str() != DEFAULT_STATE_FAMILY)
            .filter(|f| {
                material == f.as_str()
                    || material
                        .strip_suffix(f.as_str())
                        .is_some_and(|head| head.ends_with('_'))
            })
            .max_by_key(|f| f.len())
            .map_or(DEFAULT_STATE_FAMILY, String::as_str)
    }

    pub fn allows_state(&self, material: &str, key: &str) -> bool {
        if self.is_disallowed_state(key) {
            return false;
        }
        self.allowed_state_keys
            .get(self.state_family(material))
            .is_some_and(|keys| keys.contains(key))
    }
}

fn split_assignment(line: &str) -> Option<(&str, &str)> {
    let (lhs, rhs) = line.split_once('=')?;
    let (lhs, rhs) = (lhs.trim(), rhs.trim());
    (!lhs.is_empty() && !rhs.is_empty()).then_some((lhs, rhs))
}
