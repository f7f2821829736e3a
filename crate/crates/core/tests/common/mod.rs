//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

pub mod recorded;

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use t2bm::interlayer::{parse_document, InterlayerDocument, ParseMode, SectionKind};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn load_doc(name: &str) -> InterlayerDocument {
    parse_document(&read_fixture(name), ParseMode::Lenient).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Compares `actual` with the stored golden file. With
/// `T2BM_UPDATE_GOLDEN=1` the file is (re)written instead.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var("T2BM_UPDATE_GOLDEN").as_deref() == Ok("1") {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("golden {}: {e} (run with T2BM_UPDATE_GOLDEN=1 to create)", path.display()));
    assert!(expected == actual, "output differs from golden {}", path.display());
}

pub type Cells = HashMap<[i32; 3], (String, Vec<(String, String)>)>;

fn air(m: &str) -> bool {
    matches!(m, "air" | "cave_air" | "void_air")
}

/// Fill every section's box cell by cell, then clear strict interiors of
/// hollow boxes. Later sections overwrite earlier ones.
pub fn naive_synthesize(doc: &InterlayerDocument) -> Cells {
    let mut cells = Cells::new();
    for s in &doc.sections {
        let m = s.material.as_str().to_owned();
        match &s.kind {
            SectionKind::Structural { extent, hollow } => {
                let (a, b) = (extent.start.coords(), extent.end.coords());
                let lo = [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])];
                let hi = [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])];
                for x in lo[0]..=hi[0] {
                    for y in lo[1]..=hi[1] {
                        for z in lo[2]..=hi[2] {
                            if air(&m) {
                                cells.remove(&[x, y, z]);
                            } else {
                                cells.insert([x, y, z], (m.clone(), Vec::new()));
                            }
                        }
                    }
                }
                if *hollow {
                    for x in lo[0]..=hi[0] {
                        for y in lo[1]..=hi[1] {
                            for z in lo[2]..=hi[2] {
                                let inside = x > lo[0] && x < hi[0] && y > lo[1] && y < hi[1] && z > lo[2] && z < hi[2];
                                if inside {
                                    cells.remove(&[x, y, z]);
                                }
                            }
                        }
                    }
                }
            }
            SectionKind::Functional { point, state } => {
                let state = state.iter().map(|(k, v)| (k.to_owned(), v.to_owned())).collect();
                if air(&m) {
                    cells.remove(&point.coords());
                } else {
                    cells.insert(point.coords(), (m, state));
                }
            }
        }
    }
    cells
}

/// Straight transliteration of the correctness assessment: flood fill from
/// p0 collecting materials, then drop points that form no corner, edge or
/// plane until the set stops changing. Returns (S, C).
pub fn oracle_assess(cells: &HashMap<[i32; 3], String>, p0: [i32; 3], required: &[&str]) -> (bool, bool) {
    let mut visited: HashSet<[i32; 3]> = HashSet::new();
    let mut materials: HashSet<String> = HashSet::new();
    let mut queue = vec![p0];
    visited.insert(p0);
    while let Some(p) = queue.pop() {
        materials.insert(cells[&p].clone());
        let [x, y, z] = p;
        for q in [[x + 1, y, z], [x - 1, y, z], [x, y + 1, z], [x, y - 1, z], [x, y, z + 1], [x, y, z - 1]] {
            if cells.contains_key(&q) && !visited.contains(&q) {
                visited.insert(q);
                queue.push(q);
            }
        }
    }
    let s = required.iter().all(|r| materials.contains(*r));

    let mut p_set = visited;
    loop {
        if p_set.is_empty() {
            break;
        }
        let keep: HashSet<[i32; 3]> = p_set.iter().copied().filter(|&b| forms_structure(&p_set, b)).collect();
        if keep.len() == p_set.len() {
            break;
        }
        p_set = keep;
    }
    (s, !p_set.is_empty())
}

fn forms_structure(set: &HashSet<[i32; 3]>, b: [i32; 3]) -> bool {
    let has = |d: [i32; 3]| set.contains(&[b[0] + d[0], b[1] + d[1], b[2] + d[2]]);
    let unit = |axis: usize, k: i32| {
        let mut d = [0; 3];
        d[axis] = k;
        d
    };
    // corner
    if (0..3).all(|a| has(unit(a, 1)) || has(unit(a, -1))) {
        return true;
    }
    // edge: some window of three consecutive cells along an axis
    for a in 0..3 {
        for start in -2..=0 {
            if (start..start + 3).all(|k| k == 0 || has(unit(a, k))) {
                return true;
            }
        }
    }
    // plane: some 2x2 square in a coordinate plane containing b
    for a in 0..3 {
        for c in 0..3 {
            if a == c {
                continue;
            }
            for s in [-1, 1] {
                for t in [-1, 1] {
                    let mut diag = unit(a, s);
                    diag[c] = t;
                    if has(unit(a, s)) && has(unit(c, t)) && has(diag) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// First filled cell scanning y, then z, then x.
pub fn lowest_cell(cells: &HashMap<[i32; 3], String>) -> Option<[i32; 3]> {
    cells.keys().copied().min_by_key(|&[x, y, z]| (y, z, x))
}
