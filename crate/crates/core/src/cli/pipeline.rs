use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{PipelineConfig, TargetKind};
use crate::assess::{
    assess, check_satisfaction, AliasTable, AssessError, AssessmentConfig, AssessmentReport, KeywordTable,
    MaterialRequirementList, TableError,
};
use crate::export::{
    export_command_script, export_voxel_dump, place_via_http, ExportError, HttpPlacement, PlacementBatchResult,
};
use crate::interlayer::{serialize_document, to_pretty, BlockPoint, InterlayerDocument};
use crate::llm::{
    run_generation, GenerationFailed, GenerationSettings, GenerationTrace, HttpSettings, HttpTransport,
    PromptBundle, PromptError, RecordedTransport, Transport,
};
use crate::repair::{repair_document, BlockRegistry, RegistryError, RepairLog};
use crate::voxel::{synthesize, PlacementReport, VoxelGrid};

pub const TRACE_FILE: &str = "trace.json";
pub const INTERLAYER_FILE: &str = "interlayer.json";
pub const REPAIRS_FILE: &str = "repairs.json";
pub const DUMP_FILE: &str = "building.voxels.json";
pub const SCRIPT_FILE: &str = "building.mcfunction";
pub const REPORT_FILE: &str = "report.json";
pub const PLACEMENT_FILE: &str = "placement.json";
pub const RESPONSES_FILE: &str = "responses.json";

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Data files the pipeline needs, loaded once before any request is sent.
#[derive(Debug, Clone)]
pub struct Resources {
    pub registry: BlockRegistry,
    pub aliases: AliasTable,
    pub keywords: KeywordTable,
    pub prompts: PromptBundle,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self, StartupError> {
        Ok(Self {
            registry: BlockRegistry::resolve(&cfg.registry)?,
            aliases: cfg.aliases.as_deref().map_or_else(|| Ok(AliasTable::bundled()), AliasTable::load)?,
            keywords: cfg.keywords.as_deref().map_or_else(|| Ok(KeywordTable::bundled()), KeywordTable::load)?,
            prompts: cfg.prompts.as_deref().map_or_else(|| Ok(PromptBundle::bundled()), PromptBundle::load)?,
        })
    }

    /// Explicit `require` entries win; otherwise the prompt's keywords
    /// decide.
    pub fn requirements(&self, prompt: &str, explicit: &[String]) -> MaterialRequirementList {
        if explicit.is_empty() {
            MaterialRequirementList::from_prompt(prompt, &self.keywords, &self.aliases)
        } else {
            MaterialRequirementList::from_tokens(explicit, &self.aliases)
        }
    }
}

pub fn build_transport(cfg: &PipelineConfig) -> Box<dyn Transport> {
    match &cfg.fixtures {
        Some(dir) => Box::new(RecordedTransport::new(dir.clone())),
        None => Box::new(HttpTransport::from_env(HttpSettings {
            base_url: cfg.base_url.clone(),
            parallelism: cfg.parallelism,
            ..HttpSettings::default()
        })),
    }
}

pub fn generation_settings(cfg: &PipelineConfig) -> GenerationSettings {
    GenerationSettings {
        model: cfg.model.clone(),
        temperature: cfg.temperature,
        max_tokens: cfg.max_tokens,
        seed: cfg.seed,
        max_attempts: cfg.max_attempts,
    }
}

/// Everything one pipeline run produces before anything is exported.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub trace: GenerationTrace,
    pub document: InterlayerDocument,
    pub repairs: RepairLog,
    pub grid: VoxelGrid,
    pub synthesis: PlacementReport,
    pub requirements: MaterialRequirementList,
    pub assessment: Result<AssessmentReport, AssessError>,
}

impl PipelineOutput {
    pub fn completeness(&self) -> bool {
        self.assessment.as_ref().is_ok_and(|a| a.completeness)
    }

    /// An empty building satisfies only an empty requirement list.
    pub fn satisfaction(&self) -> bool {
        match &self.assessment {
            Ok(a) => a.satisfaction,
            Err(_) => check_satisfaction(&Default::default(), &self.requirements),
        }
    }

    pub fn report(&self) -> PipelineReport<'_> {
        PipelineReport {
            completeness: self.completeness(),
            satisfaction: self.satisfaction(),
            sections: self.document.sections.len(),
            repairs: self.repairs.len(),
            synthesis: &self.synthesis,
            assessment_error: self.assessment.as_ref().err().map(ToString::to_string),
            assessment: self.assessment.as_ref().ok(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PipelineReport<'a> {
    pub completeness: bool,
    pub satisfaction: bool,
    pub sections: usize,
    pub repairs: usize,
    pub synthesis: &'a PlacementReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assessment_error: Option<String>,
    pub assessment: Option<&'a AssessmentReport>,
}

/// Generation, repair, synthesis and assessment.
pub fn run_pipeline(
    prompt: &str,
    cfg: &PipelineConfig,
    res: &Resources,
    transport: &dyn Transport,
    settings: &GenerationSettings,
) -> Result<PipelineOutput, Box<GenerationFailed>> {
    let (raw_doc, trace) = run_generation(prompt, cfg.refine, &res.prompts, transport, settings).map_err(Box::new)?;
    let (document, repairs) = repair_document(&raw_doc, &res.registry);
    let (grid, synthesis) = synthesize(&document, BlockPoint::ORIGIN);
    let requirements = res.requirements(prompt, &cfg.require);
    let assess_cfg = AssessmentConfig { start_point: cfg.start_point, ..AssessmentConfig::default() };
    let assessment = assess(&grid, &requirements, &assess_cfg);
    Ok(PipelineOutput { trace, document, repairs, grid, synthesis, requirements, assessment })
}

pub fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = to_pretty(value);
    s.push('\n');
    s
}

/// Short content hash of the trace; names the run directory.
pub fn trace_id(trace: &GenerationTrace) -> String {
    let digest = Sha256::digest(json_text(trace).as_bytes());
    hex::encode(digest)[..12].to_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), ExportError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|source| ExportError::Io { path, source })
}

/// `<root>/<stamp>-<id>`, with a numeric suffix if that already exists.
pub fn fresh_dir(root: &Path, stem: &str) -> Result<PathBuf, ExportError> {
    std::fs::create_dir_all(root).map_err(|source| ExportError::Io { path: root.to_owned(), source })?;
    let mut candidate = root.join(stem);
    let mut n = 1;
    loop {
        match std::fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                candidate = root.join(format!("{stem}-{n}"));
                n += 1;
            }
            Err(source) => return Err(ExportError::Io { path: candidate, source }),
        }
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
}

/// Writes the trace, repaired interlayer, repair log and report, then runs
/// every configured export target.
pub fn write_run(
    out: &PipelineOutput,
    cfg: &PipelineConfig,
    dir: &Path,
) -> Result<Option<PlacementBatchResult>, ExportError> {
    write(dir, TRACE_FILE, &json_text(&out.trace))?;
    write(dir, INTERLAYER_FILE, &serialize_document(&out.document))?;
    write(dir, REPAIRS_FILE, &json_text(&out.repairs))?;
    write(dir, REPORT_FILE, &json_text(&out.report()))?;
    let mut placement = None;
    for target in &cfg.targets {
        match target {
            TargetKind::Script => export_command_script(&out.grid, cfg.offset, &dir.join(SCRIPT_FILE))?,
            TargetKind::Dump => export_voxel_dump(&out.grid, &dir.join(DUMP_FILE))?,
            TargetKind::Http => {
                let result = place_via_http(&out.grid, &http_target(cfg))?;
                write(dir, PLACEMENT_FILE, &json_text(&result))?;
                placement = Some(result);
            }
        }
    }
    Ok(placement)
}

pub fn http_target(cfg: &PipelineConfig) -> HttpPlacement {
    HttpPlacement {
        endpoint: cfg.endpoint.clone(),
        offset: cfg.offset,
        batch_size: cfg.batch_size,
        gdpc_axes: cfg.gdpc_axes,
    }
}

/// Trace and raw replies of a failed generation, for diagnosis.
pub fn write_failure(failed: &GenerationFailed, dir: &Path) -> Result<(), ExportError> {
    write(dir, TRACE_FILE, &json_text(&failed.trace))?;
    write(dir, RESPONSES_FILE, &json_text(&failed.responses))
}
