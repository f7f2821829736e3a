use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::PipelineConfig;
use super::pipeline::{
    fresh_dir, generation_settings, run_pipeline, trace_id, write_failure, write_run, Resources,
};
use crate::export::ExportError;
use crate::llm::Transport;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub c: usize,
    pub s: usize,
    pub not_c_not_s: usize,
    pub c_not_s: usize,
    pub not_c_s: usize,
    pub c_s: usize,
}

impl Counts {
    pub fn add(&mut self, c: bool, s: bool) {
        self.c += usize::from(c);
        self.s += usize::from(s);
        match (c, s) {
            (false, false) => self.not_c_not_s += 1,
            (true, false) => self.c_not_s += 1,
            (false, true) => self.not_c_s += 1,
            (true, true) => self.c_s += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.not_c_not_s + self.c_not_s + self.not_c_s + self.c_s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Ratios {
    pub c: f64,
    pub s: f64,
    pub not_c_not_s: f64,
    pub c_not_s: f64,
    pub not_c_s: f64,
    pub c_s: f64,
}

impl Ratios {
    /// All zero when `denominator` is zero.
    pub fn of(counts: &Counts, denominator: usize) -> Self {
        let r = |n: usize| if denominator == 0 { 0.0 } else { n as f64 / denominator as f64 };
        Self {
            c: r(counts.c),
            s: r(counts.s),
            not_c_not_s: r(counts.not_c_not_s),
            c_not_s: r(counts.c_not_s),
            not_c_s: r(counts.not_c_s),
            c_s: r(counts.c_s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub trace_id: String,
    pub parsed: bool,
    pub attempts: u32,
    pub completeness: bool,
    pub satisfaction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub prompt: String,
    pub condition: &'static str,
    pub trials: usize,
    pub parsed_count: usize,
    pub counts: Counts,
    /// Over parsed trials; the four conjunctions sum to one.
    pub ratios: Ratios,
    /// Over all trials, counting unparsed ones as neither C nor S.
    pub ratios_all_trials: Ratios,
    pub rows: Vec<TrialRow>,
}

impl EvalReport {
    pub fn from_rows(model: &str, prompt: &str, refine: bool, rows: Vec<TrialRow>) -> Self {
        let mut counts = Counts::default();
        for row in rows.iter().filter(|r| r.parsed) {
            counts.add(row.completeness, row.satisfaction);
        }
        let parsed_count = counts.total();
        Self {
            model: model.to_owned(),
            prompt: prompt.to_owned(),
            condition: if refine { "refined" } else { "raw" },
            trials: rows.len(),
            parsed_count,
            counts,
            ratios: Ratios::of(&counts, parsed_count),
            ratios_all_trials: Ratios::of(&counts, rows.len()),
            rows,
        }
    }

    /// Markdown table in the column order C, S, ¬C∧¬S, C∧¬S, ¬C∧S, C∧S.
    pub fn table(&self) -> String {
        let r = &self.ratios;
        let mut out = String::new();
        out.push_str("| Model | Prompt | C | S | ¬C∧¬S | C∧¬S | ¬C∧S | C∧S | Parsed |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        writeln!(
            out,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {}/{} |",
            self.model, self.condition, r.c, r.s, r.not_c_not_s, r.c_not_s, r.not_c_s, r.c_s, self.parsed_count, self.trials
        )
        .expect("string write");
        out
    }
}

fn run_trial(
    trial: usize,
    prompt: &str,
    cfg: &PipelineConfig,
    res: &Resources,
    transport: &dyn Transport,
    dir: &Path,
) -> Result<TrialRow, ExportError> {
    let seed = cfg.seed.unwrap_or(0) + trial as u64;
    let mut settings = generation_settings(cfg);
    settings.seed = Some(seed);
    match run_pipeline(prompt, cfg, res, transport, &settings) {
        Ok(out) => {
            let id = trace_id(&out.trace);
            let trial_dir = fresh_dir(dir, &format!("{trial:03}-{id}"))?;
            write_run(&out, cfg, &trial_dir)?;
            Ok(TrialRow {
                trial,
                seed,
                trace_id: id,
                parsed: true,
                attempts: out.trace.attempts,
                completeness: out.completeness(),
                satisfaction: out.satisfaction(),
                error: None,
            })
        }
        Err(failed) => {
            let id = trace_id(&failed.trace);
            let trial_dir = fresh_dir(dir, &format!("{trial:03}-{id}"))?;
            write_failure(&failed, &trial_dir)?;
            Ok(TrialRow {
                trial,
                seed,
                trace_id: id,
                parsed: false,
                attempts: failed.trace.attempts,
                completeness: false,
                satisfaction: false,
                error: Some(failed.to_string()),
            })
        }
    }
}

/// Runs `trials` independent generations (seeds `seed`, `seed + 1`, ...),
/// writing each trial under `dir`. Rows come back in trial order whatever
/// order the trials finish in.
pub fn run_eval(
    prompt: &str,
    trials: usize,
    cfg: &PipelineConfig,
    res: &Resources,
    transport: &dyn Transport,
    dir: &Path,
) -> Result<EvalReport, ExportError> {
    let one = |i: usize| run_trial(i, prompt, cfg, res, transport, dir);
    let rows = run_all(trials, cfg.parallelism.min(transport.parallelism()), one)?;
    Ok(EvalReport::from_rows(&cfg.model, prompt, cfg.refine, rows))
}

#[cfg(feature = "parallel")]
fn run_all<F>(trials: usize, width: usize, one: F) -> Result<Vec<TrialRow>, ExportError>
where
    F: Fn(usize) -> Result<TrialRow, ExportError> + Sync,
{
    use rayon::prelude::*;
    let width = width.clamp(1, trials.max(1));
    match rayon::ThreadPoolBuilder::new().num_threads(width).build() {
        Ok(pool) => pool.install(|| (0..trials).into_par_iter().map(&one).collect()),
        Err(_) => (0..trials).map(one).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all<F>(trials: usize, _width: usize, one: F) -> Result<Vec<TrialRow>, ExportError>
where
    F: Fn(usize) -> Result<TrialRow, ExportError> + Sync,
{
    (0..trials).map(one).collect()
}
