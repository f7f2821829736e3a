//! The committed recorded-transport fixtures, rebuilt from scratch.
//!
//! Each fixture set is produced by running the real generation loop against
//! scripted replies and pairing every request it sends with the reply it
//! got, so the stored file names always match what the pipeline will ask for.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use t2bm::cli::{generation_settings, PipelineConfig};
use t2bm::llm::{request_key, run_generation, PromptBundle, ScriptedTransport};

pub const PROMPT: &str = "A wooden house with windows";

pub const REFINED: &str = "A one-room wooden house, 25 blocks long, 15 wide and 10 high, \
built from spruce planks. Glass pane windows are set into the long walls. \
Inside there is a birch table with chairs, a kitchen corner with a crafting table and a furnace, \
a chest, and a light gray bed beside a small table with a lantern. \
Doors of jungle wood open on the north and south walls.";

/// Outcome a fixture trial is built to produce under the default
/// requirements for [`PROMPT`] (the wood and glass groups).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flags {
    CompleteSatisfied,
    CompleteOnly,
    SatisfiedOnly,
    Neither,
}

impl Flags {
    pub fn c(self) -> bool {
        matches!(self, Flags::CompleteSatisfied | Flags::CompleteOnly)
    }

    pub fn s(self) -> bool {
        matches!(self, Flags::CompleteSatisfied | Flags::SatisfiedOnly)
    }
}

fn cuboid(name: &str, hi: [i32; 3], material: &str) -> String {
    format!(
        r#""{name}": {{"position": {{"start_x": 0, "start_y": 0, "start_z": 0, "end_x": {}, "end_y": {}, "end_z": {}}}, "material": "{material}", "hollow": false, "functional": false}}"#,
        hi[0], hi[1], hi[2]
    )
}

fn block(name: &str, p: [i32; 3], material: &str) -> String {
    format!(
        r#""{name}": {{"position": {{"x": {}, "y": {}, "z": {}}}, "material": "{material}", "functional": true}}"#,
        p[0], p[1], p[2]
    )
}

/// A small building whose assessment gives `flags`.
pub fn listing(flags: Flags, trial: usize) -> String {
    let body = match flags {
        // a 2x2x2 cube keeps its main structure; the glass touches it
        Flags::CompleteSatisfied => {
            format!("{},\n    {}", cuboid("body", [1, 1, 1], "oak_planks"), block("window", [2, 0, 0], "glass"))
        }
        Flags::CompleteOnly => cuboid("body", [1, 1, 1], "oak_planks"),
        // two blocks in a row prune away entirely
        Flags::SatisfiedOnly => {
            format!("{},\n    {}", cuboid("body", [0, 0, 0], "oak_planks"), block("window", [1, 0, 0], "glass_pane"))
        }
        Flags::Neither => cuboid("body", [0, 0, 0], "stone"),
    };
    let json = format!("{{\"hut_{trial}\": {{\n    {body}\n}}}}");
    if trial.is_multiple_of(3) {
        format!("Here is the building:\n```json\n{json}\n```\n")
    } else {
        json
    }
}

pub fn root() -> PathBuf {
    super::fixtures().join("recorded")
}

pub fn generate_dir() -> PathBuf {
    root().join("generate")
}

pub fn eval50_dir() -> PathBuf {
    root().join("eval50")
}

pub fn eval10_dir() -> PathBuf {
    root().join("eval10")
}

/// Flags for the 50 trials: counts follow the target marginals, order
/// shuffled with a fixed seed.
pub fn eval50_flags() -> Vec<Flags> {
    let mut v = [
        (Flags::CompleteSatisfied, 19),
        (Flags::CompleteOnly, 22),
        (Flags::SatisfiedOnly, 5),
        (Flags::Neither, 4),
    ]
    .into_iter()
    .flat_map(|(f, n)| std::iter::repeat_n(f, n))
    .collect::<Vec<_>>();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(0x0507_ab1e));
    v
}

pub fn eval10_flags() -> Vec<Flags> {
    use Flags::*;
    vec![CompleteOnly, CompleteSatisfied, CompleteOnly, Neither, CompleteOnly, CompleteOnly, CompleteSatisfied, Neither, CompleteOnly, CompleteOnly]
}

/// File name to content, for one scripted trial.
fn record(replies: Vec<String>, seed: Option<u64>, files: &mut BTreeMap<String, String>) {
    let cfg = PipelineConfig::default();
    let mut settings = generation_settings(&cfg);
    settings.seed = seed;
    let transport = ScriptedTransport::new(replies.clone());
    run_generation(PROMPT, cfg.refine, &PromptBundle::bundled(), &transport, &settings).expect("scripted trial parses");
    let requests = transport.requests();
    assert_eq!(requests.len(), replies.len());
    for (req, reply) in requests.iter().zip(replies) {
        files.insert(format!("{}.txt", request_key(req)), reply);
    }
}

fn eval_set(flags: &[Flags]) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for (i, f) in flags.iter().enumerate() {
        let mut replies = vec![REFINED.to_owned()];
        // a few trials need a second attempt
        if i % 10 == 7 {
            replies.push("I am sorry, I cannot produce the JSON right now.".to_owned());
        }
        replies.push(listing(*f, i));
        record(replies, Some(i as u64), &mut files);
    }
    files
}

/// Every committed fixture set: directory and its exact contents.
pub fn expected() -> Vec<(PathBuf, BTreeMap<String, String>)> {
    let mut generate = BTreeMap::new();
    let house = super::read_fixture("wooden_house.json");
    record(
        vec![REFINED.to_owned(), format!("Sure! Here is the interlayer for the house:\n\n```json\n{house}```\n")],
        None,
        &mut generate,
    );
    vec![(generate_dir(), generate), (eval50_dir(), eval_set(&eval50_flags())), (eval10_dir(), eval_set(&eval10_flags()))]
}

/// What is on disk, in the same shape as [`expected`].
pub fn on_disk(dir: &PathBuf) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            files.insert(name, std::fs::read_to_string(e.path()).unwrap());
        }
    }
    files
}
