use serde::Serialize;
use serde_json::{Map, Value};

use super::types::{InterlayerDocument, Section, SectionKind};

/// Canonical text: `position`/`functional` keys, 4-space indentation,
/// trailing newline. Documents with a building name nest their sections
/// under it.
pub fn serialize_document(doc: &InterlayerDocument) -> String {
    let sections: Map<String, Value> = doc
        .sections
        .iter()
        .map(|s| (s.name.clone(), section_to_json(s)))
        .collect();
    let top = match &doc.building_name {
        Some(name) => {
            let mut top = Map::new();
            top.insert(name.clone(), Value::Object(sections));
            top
        }
        None => sections,
    };
    let mut text = to_pretty(&Value::Object(top));
    text.push('\n');
    text
}

pub(crate) fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let formatter = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn section_to_json(section: &Section) -> Value {
    let mut obj = Map::new();
    match &section.kind {
        SectionKind::Structural { extent, hollow } => {
            let mut pos = Map::new();
            pos.insert("start_x".into(), extent.start.x.into());
            pos.insert("start_y".into(), extent.start.y.into());
            pos.insert("start_z".into(), extent.start.z.into());
            pos.insert("end_x".into(), extent.end.x.into());
            pos.insert("end_y".into(), extent.end.y.into());
            pos.insert("end_z".into(), extent.end.z.into());
            obj.insert("position".into(), Value::Object(pos));
            obj.insert("material".into(), section.material.as_str().into());
            obj.insert("hollow".into(), (*hollow).into());
            obj.insert("functional".into(), false.into());
        }
        SectionKind::Functional { point, state } => {
            let mut pos = Map::new();
            pos.insert("x".into(), point.x.into());
            pos.insert("y".into(), point.y.into());
            pos.insert("z".into(), point.z.into());
            obj.insert("position".into(), Value::Object(pos));
            obj.insert("material".into(), section.material.as_str().into());
            obj.insert("functional".into(), true.into());
            if !state.is_empty() {
                obj.insert("state".into(), state.to_json());
            }
        }
    }
    for (k, v) in &section.extra {
        obj.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Value::Object(obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interlayer::{parse_document, BlockExtent, BlockPoint, MaterialId, ParseMode, StateMap};

    #[test]
    fn empty_document() {
        assert_eq!(serialize_document(&InterlayerDocument::default()), "{}\n");
    }

    #[test]
    fn two_section_canonical_text() {
        let doc = InterlayerDocument::new(
            None,
            vec![
                Section::structural(
                    "wall",
                    BlockExtent::new(BlockPoint::new(0, 0, 0), BlockPoint::new(8, 6, 6)),
                    true,
                    MaterialId::new("oak_planks").unwrap(),
                ),
                Section::functional(
                    "door",
                    BlockPoint::new(4, 3, 3),
                    [("facing", "south"), ("hinge", "left")].into_iter().collect::<StateMap>(),
                    MaterialId::new("oak_door").unwrap(),
                ),
            ],
        );
        let text = serialize_document(&doc);
        let expected = r#"{
    "wall": {
        "position": {
            "start_x": 0,
            "start_y": 0,
            "start_z": 0,
            "end_x": 8,
            "end_y": 6,
            "end_z": 6
        },
        "material": "oak_planks",
        "hollow": true,
        "functional": false
    },
    "door": {
        "position": {
            "x": 4,
            "y": 3,
            "z": 3
        },
        "material": "oak_door",
        "functional": true,
        "state": {
            "facing": "south",
            "hinge": "left"
        }
    }
}
"#;
        assert_eq!(text, expected);
        assert_eq!(parse_document(&text, ParseMode::Strict).unwrap(), doc);
    }
}
