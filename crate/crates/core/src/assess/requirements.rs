use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::interlayer::MaterialId;

const BUNDLED_ALIASES: &str = include_str!("../../data/aliases.txt");
const BUNDLED_KEYWORDS: &str = include_str!("../../data/keywords.txt");

#[derive(Debug, Error)]
pub enum TableError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `name = value[,value...]`")]
    Syntax { line: usize },
}

/// `*` glob over block ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdPattern(String);

impl IdPattern {
    pub fn new(pattern: &str) -> Self {
        Self(pattern.trim().strip_prefix("minecraft:").unwrap_or(pattern.trim()).to_owned())
    }

    pub fn matches(&self, id: &str) -> bool {
        glob_match(self.0.as_bytes(), id.as_bytes())
    }
}

fn glob_match(pat: &[u8], s: &[u8]) -> bool {
    match pat.split_first() {
        None => s.is_empty(),
        Some((b'*', rest)) => (0..=s.len()).any(|i| glob_match(rest, &s[i..])),
        Some((c, rest)) => s.first() == Some(c) && glob_match(rest, &s[1..]),
    }
}

fn parse_assignments(text: &str) -> Result<Vec<(String, Vec<String>)>, TableError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, values) = line.split_once('=').ok_or(TableError::Syntax { line: idx + 1 })?;
        let name = name.trim();
        let values: Vec<String> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
            .collect();
        if name.is_empty() || values.is_empty() {
            return Err(TableError::Syntax { line: idx + 1 });
        }
        out.push((name.to_owned(), values));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, TableError> {
    std::fs::read_to_string(path).map_err(|source| TableError::Io { path: path.display().to_string(), source })
}

/// Named material groups, e.g. `wood = *_planks,*_log`.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    groups: IndexMap<String, Vec<IdPattern>>,
}

impl AliasTable {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let groups = parse_assignments(text)?
            .into_iter()
            .map(|(name, vals)| (name, vals.iter().map(|v| IdPattern::new(v)).collect()))
            .collect();
        Ok(Self { groups })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_ALIASES).expect("bundled alias table parses")
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        Self::parse(&read(path)?)
    }

    pub fn group(&self, name: &str) -> Option<&[IdPattern]> {
        self.groups.get(name).map(Vec::as_slice)
    }

    /// A group name resolves to that group; anything else is an exact id.
    pub fn requirement(&self, token: &str) -> Option<Requirement> {
        match self.groups.get(token) {
            Some(patterns) => Some(Requirement::Group { name: token.to_owned(), patterns: patterns.clone() }),
            None => MaterialId::new(token).map(Requirement::Exact),
        }
    }
}

/// Prompt words that imply a requirement: `wooden = wood`.
#[derive(Debug, Clone, Default)]
pub struct KeywordTable {
    keywords: IndexMap<String, String>,
}

impl KeywordTable {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let keywords = parse_assignments(text)?
            .into_iter()
            .map(|(k, mut v)| (k.to_lowercase(), v.swap_remove(0)))
            .collect();
        Ok(Self { keywords })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_KEYWORDS).expect("bundled keyword table parses")
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        Self::parse(&read(path)?)
    }

    /// Requirement tokens implied by `prompt`, deduplicated, in order of
    /// first mention.
    pub fn tokens_for(&self, prompt: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for word in prompt
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .filter(|w| !w.is_empty())
        {
            if let Some(token) = self.keywords.get(&word.to_lowercase()) {
                if !out.contains(token) {
                    out.push(token.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Requirement {
    Exact(MaterialId),
    Group { name: String, patterns: Vec<IdPattern> },
}

impl Requirement {
    pub fn matches(&self, material: &MaterialId) -> bool {
        match self {
            Self::Exact(id) => id == material,
            Self::Group { patterns, .. } => patterns.iter().any(|p| p.matches(material.as_str())),
        }
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact(id) => write!(f, "{id}"),
            Self::Group { name, .. } => write!(f, "@{name}"),
        }
    }
}

impl Serialize for Requirement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The materials a prompt asks for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct MaterialRequirementList {
    pub required: Vec<Requirement>,
}

impl MaterialRequirementList {
    pub fn new(required: Vec<Requirement>) -> Self {
        Self { required }
    }

    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], aliases: &AliasTable) -> Self {
        Self::new(tokens.iter().filter_map(|t| aliases.requirement(t.as_ref().trim())).collect())
    }

    pub fn from_prompt(prompt: &str, keywords: &KeywordTable, aliases: &AliasTable) -> Self {
        Self::from_tokens(&keywords.tokens_for(prompt), aliases)
    }

    pub fn is_empty(&self) -> bool {
        self.required.is_empty()
    }

    pub fn unmet<'a>(&'a self, found: &BTreeSet<MaterialId>) -> Vec<&'a Requirement> {
        self.required
            .iter()
            .filter(|r| !found.iter().any(|m| r.matches(m)))
            .collect()
    }
}

/// True iff every requirement is matched by at least one found material.
pub fn check_satisfaction(materials: &BTreeSet<MaterialId>, reqs: &MaterialRequirementList) -> bool {
    reqs.unmet(materials).is_empty()
}
