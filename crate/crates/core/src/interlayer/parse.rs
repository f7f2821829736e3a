use serde_json::{Map, Value};
use thiserror::Error;

use super::extract::{extract_json, ExtractFailure};
use super::types::{BlockExtent, BlockPoint, InterlayerDocument, MaterialId, Section, SectionKind, StateMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// The text must be a single JSON object.
    Strict,
    /// Extract the object from surrounding prose and tolerate `#`/`//`
    /// comments and trailing commas.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("not a JSON object: {0}")]
    NotJson(String),
    #[error(transparent)]
    Extract(#[from] ExtractFailure),
    #[error("document contains no sections")]
    NoSections,
    #[error("document contains more than one building: {}", .0.join(", "))]
    MultipleBuildings(Vec<String>),
    #[error("{section}: ambiguous location ({detail})")]
    AmbiguousLocation { section: String, detail: String },
    #[error("{section}: missing material")]
    MissingMaterial { section: String },
    #[error("{section}: conflicting kind ({detail})")]
    ConflictingKind { section: String, detail: String },
}

impl ParseFailure {
    /// Path of the offending section, when the failure concerns one.
    pub fn section(&self) -> Option<&str> {
        match self {
            Self::AmbiguousLocation { section, .. }
            | Self::MissingMaterial { section }
            | Self::ConflictingKind { section, .. } => Some(section),
            _ => None,
        }
    }
}

const EXTENT_KEYS: [&str; 6] = ["start_x", "start_y", "start_z", "end_x", "end_y", "end_z"];
const POINT_KEYS: [&str; 3] = ["x", "y", "z"];

pub fn parse_document(text: &str, mode: ParseMode) -> Result<InterlayerDocument, ParseFailure> {
    let value: Value = match mode {
        ParseMode::Strict => serde_json::from_str(text).map_err(|e| ParseFailure::NotJson(e.to_string()))?,
        ParseMode::Lenient => {
            let region = extract_json(text)?;
            let cleaned = strip_trailing_commas(&strip_comments(region));
            serde_json::from_str(&cleaned).map_err(|e| ParseFailure::NotJson(e.to_string()))?
        }
    };
    let Value::Object(top) = value else {
        return Err(ParseFailure::NotJson("top-level value is not an object".into()));
    };
    document_from_object(&top, mode)
}

fn is_section_candidate(v: &Value) -> bool {
    v.as_object()
        .is_some_and(|o| o.contains_key("location") || o.contains_key("position"))
}

fn document_from_object(top: &Map<String, Value>, mode: ParseMode) -> Result<InterlayerDocument, ParseFailure> {
    if top.is_empty() {
        return Ok(InterlayerDocument::default());
    }
    if top.values().any(is_section_candidate) {
        let sections = sections_from_scope(top, None, mode)?;
        return Ok(InterlayerDocument::new(None, sections));
    }
    let buildings: Vec<(&String, &Map<String, Value>)> = top
        .iter()
        .filter_map(|(k, v)| v.as_object().map(|o| (k, o)))
        .collect();
    match buildings.as_slice() {
        [] => Err(ParseFailure::NoSections),
        [(name, scope)] => {
            if !scope.is_empty() && !scope.values().any(is_section_candidate) {
                return Err(ParseFailure::NoSections);
            }
            let sections = sections_from_scope(scope, Some(name), mode)?;
            Ok(InterlayerDocument::new(Some((*name).clone()), sections))
        }
        many => Err(ParseFailure::MultipleBuildings(
            many.iter().map(|(k, _)| (*k).clone()).collect(),
        )),
    }
}

fn sections_from_scope(
    scope: &Map<String, Value>,
    building: Option<&str>,
    mode: ParseMode,
) -> Result<Vec<Section>, ParseFailure> {
    scope
        .iter()
        .filter(|(_, v)| is_section_candidate(v))
        .map(|(name, v)| {
            let path = match building {
                Some(b) => format!("{b}.{name}"),
                None => name.clone(),
            };
            // is_section_candidate guarantees an object
            parse_section(name, &path, v.as_object().unwrap(), mode)
        })
        .collect()
}

enum Location {
    Extent(BlockExtent),
    Point(BlockPoint),
}

fn parse_section(name: &str, path: &str, obj: &Map<String, Value>, mode: ParseMode) -> Result<Section, ParseFailure> {
    let ambiguous = |detail: String| ParseFailure::AmbiguousLocation { section: path.to_owned(), detail };

    let loc_value = match (obj.get("location"), obj.get("position")) {
        (Some(_), Some(_)) => return Err(ambiguous("both `location` and `position` given".into())),
        (Some(v), None) | (None, Some(v)) => v,
        (None, None) => unreachable!("not a section candidate"),
    };
    let loc_obj = loc_value
        .as_object()
        .ok_or_else(|| ambiguous("location is not an object".into()))?;
    let location = parse_location(loc_obj, mode).map_err(ambiguous)?;

    let material = obj
        .get("material")
        .and_then(Value::as_str)
        .and_then(|m| MaterialId::new(m.trim()))
        .ok_or_else(|| ParseFailure::MissingMaterial { section: path.to_owned() })?;

    let functional_flag = obj.get("functional").and_then(|v| flag(v, mode));
    let kind_is_functional = match (&location, functional_flag) {
        (Location::Extent(_), Some(true)) => {
            return Err(ParseFailure::ConflictingKind {
                section: path.to_owned(),
                detail: "six-field extent marked functional".into(),
            })
        }
        (_, Some(f)) => f,
        (Location::Point(_), None) => true,
        (Location::Extent(_), None) => false,
    };

    let mut extra = Map::new();
    let kind = if kind_is_functional {
        let Location::Point(point) = location else { unreachable!() };
        let state = obj.get("state").and_then(Value::as_object).map(state_from_json).unwrap_or_default();
        for (k, v) in obj {
            if !matches!(k.as_str(), "location" | "position" | "material" | "functional" | "state") {
                extra.insert(k.clone(), v.clone());
            }
        }
        SectionKind::Functional { point, state }
    } else {
        let extent = match location {
            Location::Extent(e) => e,
            // functional: false on a single coordinate, a one-cell cuboid
            Location::Point(p) => BlockExtent::new(p, p),
        };
        let hollow = obj.get("hollow").and_then(|v| flag(v, mode)).unwrap_or(false);
        for (k, v) in obj {
            if !matches!(k.as_str(), "location" | "position" | "material" | "functional" | "hollow") {
                extra.insert(k.clone(), v.clone());
            }
        }
        SectionKind::Structural { extent, hollow }
    };

    Ok(Section { name: name.to_owned(), kind, material, extra })
}

fn parse_location(loc: &Map<String, Value>, mode: ParseMode) -> Result<Location, String> {
    let has_extent = EXTENT_KEYS.iter().filter(|k| loc.contains_key(**k)).count();
    let has_point = POINT_KEYS.iter().filter(|k| loc.contains_key(**k)).count();
    let get = |key: &str| -> Result<i32, String> {
        coordinate(&loc[key], mode).ok_or_else(|| format!("`{key}` is not an integer coordinate"))
    };
    match (has_extent, has_point) {
        (6, 0) => Ok(Location::Extent(BlockExtent::new(
            BlockPoint::new(get("start_x")?, get("start_y")?, get("start_z")?),
            BlockPoint::new(get("end_x")?, get("end_y")?, get("end_z")?),
        ))),
        (0, 3) => Ok(Location::Point(BlockPoint::new(get("x")?, get("y")?, get("z")?))),
        _ => Err(format!(
            "expected 6 extent fields or 3 point fields, found {has_extent} extent and {has_point} point fields"
        )),
    }
}

fn coordinate(v: &Value, mode: ParseMode) -> Option<i32> {
    let as_int = match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 1e15).map(|f| f as i64)),
        Value::String(s) if mode == ParseMode::Lenient => s.trim().parse::<i64>().ok(),
        _ => None,
    }?;
    i32::try_from(as_int).ok()
}

fn flag(v: &Value, mode: ParseMode) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) if mode == ParseMode::Lenient => match s.trim().to_ascii_lowercase().as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn state_from_json(obj: &Map<String, Value>) -> StateMap {
    obj.iter()
        .filter_map(|(k, v)| {
            let value = match v {
                Value::String(s) => s.clone(),
                Value::Bool(b) => b.to_string(),
                Value::Number(n) => n.to_string(),
                _ => return None,
            };
            Some((k.clone(), value))
        })
        .collect()
}

/// Removes `# ...` and `// ...` comments outside string literals.
fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut in_string = false;
    let mut escaped = false;
    while let Some(c) = chars.next() {
        if in_string {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        let starts_comment = c == '#' || (c == '/' && chars.peek() == Some(&'/'));
        if starts_comment {
            while chars.peek().is_some_and(|&n| n != '\n') {
                chars.next();
            }
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
    }
    out
}

/// Drops commas that directly precede `}` or `]`.
fn strip_trailing_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|n| !n.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BODY_EXAMPLE: &str = r#"{"wall":{ # structural section
    "location":{
        "start_x":0,"start_y":0,"start_z":0,
        "end_x":8,"end_y":6,"end_z":6},
    "material":"oak_planks","hollow":true },
"door":{ # functional section
    "location":{"x": 4,"y": 3,"z": 3},
    "material":"oak_door",
    "state" : {"facing":"south","hinge":"left"}},}"#;

    #[test]
    fn body_example_parses_leniently() {
        let doc = parse_document(BODY_EXAMPLE, ParseMode::Lenient).unwrap();
        assert_eq!(doc.building_name, None);
        assert_eq!(doc.sections.len(), 2);
        let wall = &doc.sections[0];
        assert_eq!(wall.name, "wall");
        assert_eq!(
            wall.kind,
            SectionKind::Structural {
                extent: BlockExtent::new(BlockPoint::new(0, 0, 0), BlockPoint::new(8, 6, 6)),
                hollow: true
            }
        );
        let door = &doc.sections[1];
        assert_eq!(door.material.as_str(), "oak_door");
        let state = door.state().unwrap();
        assert_eq!(state.bracket_body(), "facing=south,hinge=left");
        assert_eq!(door.bounds().0, BlockPoint::new(4, 3, 3));
    }

    #[test]
    fn body_example_rejected_strictly() {
        assert!(matches!(parse_document(BODY_EXAMPLE, ParseMode::Strict), Err(ParseFailure::NotJson(_))));
    }

    #[test]
    fn empty_object_is_empty_building() {
        let doc = parse_document("{}", ParseMode::Strict).unwrap();
        assert!(doc.sections.is_empty());
        assert_eq!(doc.building_name, None);
    }

    #[test]
    fn empty_named_building() {
        let doc = parse_document(r#"{"hut": {}}"#, ParseMode::Strict).unwrap();
        assert_eq!(doc.building_name.as_deref(), Some("hut"));
        assert!(doc.sections.is_empty());
    }

    #[test]
    fn no_sections() {
        assert_eq!(parse_document(r#"{"a": 1}"#, ParseMode::Strict), Err(ParseFailure::NoSections));
        assert_eq!(
            parse_document(r#"{"hut": {"walls": {"material": "stone"}}}"#, ParseMode::Strict),
            Err(ParseFailure::NoSections)
        );
    }

    #[test]
    fn two_buildings_rejected() {
        let text = r#"{"a": {"w": {"position": {"x":0,"y":0,"z":0}, "material": "stone"}},
                       "b": {"w": {"position": {"x":0,"y":0,"z":0}, "material": "stone"}}}"#;
        assert_eq!(
            parse_document(text, ParseMode::Strict),
            Err(ParseFailure::MultipleBuildings(vec!["a".into(), "b".into()]))
        );
    }

    #[test]
    fn four_coordinates_are_ambiguous() {
        let text = r#"{"h": {"w": {"position": {"x":0,"y":0,"z":0,"end_x":3}, "material": "stone"}}}"#;
        let err = parse_document(text, ParseMode::Strict).unwrap_err();
        assert!(matches!(err, ParseFailure::AmbiguousLocation { .. }));
        assert_eq!(err.section(), Some("h.w"));
    }

    #[test]
    fn both_location_spellings_is_ambiguous() {
        let text = r#"{"w": {"position": {"x":0,"y":0,"z":0}, "location": {"x":0,"y":0,"z":0}, "material": "stone"}}"#;
        assert!(matches!(
            parse_document(text, ParseMode::Strict),
            Err(ParseFailure::AmbiguousLocation { .. })
        ));
    }

    #[test]
    fn non_integer_coordinate_is_ambiguous() {
        let text = r#"{"w": {"position": {"x":0.5,"y":0,"z":0}, "material": "stone"}}"#;
        assert!(matches!(
            parse_document(text, ParseMode::Strict),
            Err(ParseFailure::AmbiguousLocation { .. })
        ));
        let integral = r#"{"w": {"position": {"x":2.0,"y":0,"z":0}, "material": "stone"}}"#;
        let doc = parse_document(integral, ParseMode::Strict).unwrap();
        assert_eq!(doc.sections[0].bounds().0.x, 2);
    }

    #[test]
    fn missing_material() {
        let text = r#"{"w": {"position": {"x":0,"y":0,"z":0}}}"#;
        assert_eq!(
            parse_document(text, ParseMode::Strict),
            Err(ParseFailure::MissingMaterial { section: "w".into() })
        );
        let text = r#"{"w": {"position": {"x":0,"y":0,"z":0}, "material": "minecraft:"}}"#;
        assert!(matches!(parse_document(text, ParseMode::Strict), Err(ParseFailure::MissingMaterial { .. })));
    }

    #[test]
    fn functional_extent_conflicts() {
        let text = r#"{"w": {"position": {"start_x":0,"start_y":0,"start_z":0,"end_x":1,"end_y":1,"end_z":1},
                        "material": "stone", "functional": true}}"#;
        assert!(matches!(parse_document(text, ParseMode::Strict), Err(ParseFailure::ConflictingKind { .. })));
    }

    #[test]
    fn explicit_non_functional_point_is_unit_cuboid() {
        let text = r#"{"w": {"position": {"x":1,"y":2,"z":3}, "material": "stone", "functional": false, "hollow": true}}"#;
        let doc = parse_document(text, ParseMode::Strict).unwrap();
        let p = BlockPoint::new(1, 2, 3);
        assert_eq!(
            doc.sections[0].kind,
            SectionKind::Structural { extent: BlockExtent::new(p, p), hollow: true }
        );
    }

    #[test]
    fn namespace_stripped_and_extras_kept() {
        let text = r#"{"lamp": {"position": {"x":1,"y":2,"z":3}, "material": "minecraft:lantern",
                      "hollow": true, "note": "by the bed"}}"#;
        let doc = parse_document(text, ParseMode::Strict).unwrap();
        let s = &doc.sections[0];
        assert_eq!(s.material.as_str(), "lantern");
        assert!(s.is_functional());
        assert_eq!(s.extra.keys().collect::<Vec<_>>(), vec!["hollow", "note"]);
    }

    #[test]
    fn state_values_stringified() {
        let text = r#"{"bed": {"position": {"x":0,"y":0,"z":0}, "material": "red_bed",
                      "state": {"occupied": false, "part": "head", "n": 3, "bad": [1]}}}"#;
        let doc = parse_document(text, ParseMode::Strict).unwrap();
        assert_eq!(doc.sections[0].state().unwrap().bracket_body(), "occupied=false,part=head,n=3");
    }

    #[test]
    fn lenient_accepts_string_numbers_and_flags() {
        let text = "Sure!\n```json\n{\"w\": {\"position\": {\"x\":\"1\",\"y\":0,\"z\":0}, // pos\n \"material\": \"stone\", \"functional\": \"true\",}}\n```";
        let doc = parse_document(text, ParseMode::Lenient).unwrap();
        assert!(doc.sections[0].is_functional());
        assert!(parse_document(text, ParseMode::Strict).is_err());
    }

    #[test]
    fn comment_markers_inside_strings_survive() {
        let text = r##"{"w": {"position": {"x":0,"y":0,"z":0}, "material": "stone", "note": "a # b // c,}"}}"##;
        let doc = parse_document(text, ParseMode::Lenient).unwrap();
        assert_eq!(doc.sections[0].extra["note"], "a # b // c,}");
    }

    #[test]
    fn top_level_array_is_not_a_document() {
        assert!(matches!(parse_document("[1]", ParseMode::Strict), Err(ParseFailure::NotJson(_))));
    }
}
