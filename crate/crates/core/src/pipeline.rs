//! Staged process descriptions compiled into probabilistic timed programs.
//!
//! A pipeline is a list of stages over one clock `x`:
//!
//! * `delay` waits for a duration drawn from an interval histogram,
//! * `work` takes a single open interval and then succeeds with probability
//!   `p`, otherwise it moves to its `fail` stage,
//! * `absorb` is a labelled terminal stage.
//!
//! Locations are laid out in stage-list order. A delay with `k` bins takes
//! `1 + k` locations: a branch location choosing the bin, then one location
//! per bin.

use crate::ptp::{
    validate_ptp, AffineExpr, Assertion, ClockConstraint, Outcome, Ptp, Rel, Transition, Zone,
};
use crate::ratio::{self, serde_prob, Prob};
use crate::stats::IntervalHistogram;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

pub const CLOCK: &str = "x";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSpec(pub u32, pub u32, #[serde(with = "serde_prob")] pub Prob);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DurationSpec {
    Ref {
        #[serde(rename = "ref")]
        name: String,
    },
    Bins {
        bins: Vec<BinSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    Delay {
        id: String,
        duration: DurationSpec,
        then: String,
    },
    Work {
        id: String,
        lo: u32,
        hi: u32,
        #[serde(with = "serde_prob")]
        p: Prob,
        success: String,
        fail: String,
    },
    Absorb {
        id: String,
        label: String,
    },
}

impl Stage {
    pub fn id(&self) -> &str {
        match self {
            Stage::Delay { id, .. } | Stage::Work { id, .. } | Stage::Absorb { id, .. } => id,
        }
    }

    fn successors(&self) -> Vec<&str> {
        match self {
            Stage::Delay { then, .. } => vec![then],
            Stage::Work { success, fail, .. } => vec![success, fail],
            Stage::Absorb { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub start: String,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipelineDiagnostic {
    DuplicateStage(String),
    UnknownStage { stage: String, reference: String },
    NoTerminalStage,
    BadProbability { stage: String },
    DegenerateInterval { stage: String, lo: u32, hi: u32 },
    InvalidBins { stage: String, message: String },
}

impl fmt::Display for PipelineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineDiagnostic::DuplicateStage(id) => write!(f, "duplicate stage id {id:?}"),
            PipelineDiagnostic::UnknownStage { stage, reference } => {
                write!(f, "stage {stage:?} refers to unknown stage {reference:?}")
            }
            PipelineDiagnostic::NoTerminalStage => write!(f, "no absorb stage is reachable from start"),
            PipelineDiagnostic::BadProbability { stage } => {
                write!(f, "stage {stage:?}: success probability outside [0, 1]")
            }
            PipelineDiagnostic::DegenerateInterval { stage, lo, hi } => {
                write!(f, "stage {stage:?}: interval ({lo}, {hi}) is empty")
            }
            PipelineDiagnostic::InvalidBins { stage, message } => write!(f, "stage {stage:?}: {message}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid pipeline: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<PipelineDiagnostic>),
    #[error("unbound distribution {0:?}")]
    UnboundDistribution(String),
    #[error("compiled model is invalid: {0}")]
    Compiled(String),
}

impl PipelineSpec {
    pub fn from_json(text: &str) -> Result<PipelineSpec, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serializes")
    }

    fn stage(&self, id: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.id() == id)
    }
}

fn check_bins(stage: &str, bins: &[BinSpec], out: &mut Vec<PipelineDiagnostic>) {
    let mut bad = |message: String| out.push(PipelineDiagnostic::InvalidBins { stage: stage.into(), message });
    if bins.is_empty() {
        return bad("no bins".into());
    }
    let mut total = ratio::zero();
    for (i, BinSpec(lo, hi, p)) in bins.iter().enumerate() {
        if lo >= hi {
            bad(format!("bin ({lo}, {hi}) is empty"));
        }
        if i > 0 && bins[i - 1].1 > *lo {
            bad(format!("bin ({lo}, {hi}) overlaps its predecessor"));
        }
        if *p <= ratio::zero() || *p > ratio::one() {
            bad(format!("bin ({lo}, {hi}) has probability {} outside (0, 1]", ratio::format_prob(p)));
        }
        total += *p;
    }
    if total != ratio::one() {
        bad(format!("bin probabilities sum to {}", ratio::format_prob(&total)));
    }
}

/// Reports every violation; empty means the pipeline can be compiled once
/// its references are bound.
pub fn validate_pipeline(p: &PipelineSpec) -> Vec<PipelineDiagnostic> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for s in &p.stages {
        if !ids.insert(s.id()) {
            out.push(PipelineDiagnostic::DuplicateStage(s.id().into()));
        }
    }
    if !ids.contains(p.start.as_str()) {
        out.push(PipelineDiagnostic::UnknownStage { stage: "start".into(), reference: p.start.clone() });
    }
    for s in &p.stages {
        for r in s.successors() {
            if !ids.contains(r) {
                out.push(PipelineDiagnostic::UnknownStage { stage: s.id().into(), reference: r.into() });
            }
        }
        match s {
            Stage::Work { id, lo, hi, p, .. } => {
                if lo >= hi {
                    out.push(PipelineDiagnostic::DegenerateInterval { stage: id.clone(), lo: *lo, hi: *hi });
                }
                if *p < ratio::zero() || *p > ratio::one() {
                    out.push(PipelineDiagnostic::BadProbability { stage: id.clone() });
                }
            }
            Stage::Delay { id, duration: DurationSpec::Bins { bins }, .. } => check_bins(id, bins, &mut out),
            _ => {}
        }
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![p.start.as_str()];
    let mut terminal = false;
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        match p.stage(id) {
            Some(Stage::Absorb { .. }) => terminal = true,
            Some(s) => stack.extend(s.successors()),
            None => {}
        }
    }
    if !terminal {
        out.push(PipelineDiagnostic::NoTerminalStage);
    }
    out
}

/// Replaces every `{"ref": name}` duration by the bins of `stats[name]`.
pub fn bind_statistics(
    p: &PipelineSpec,
    stats: &BTreeMap<String, IntervalHistogram>,
) -> Result<PipelineSpec, PipelineError> {
    let mut out = p.clone();
    for s in &mut out.stages {
        if let Stage::Delay { duration, .. } = s {
            if let DurationSpec::Ref { name } = duration {
                let h = stats.get(name).ok_or_else(|| PipelineError::UnboundDistribution(name.clone()))?;
                *duration = DurationSpec::Bins {
                    bins: h.bins.iter().map(|b| BinSpec(b.lo, b.hi, b.prob)).collect(),
                };
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    /// Give branch locations the invariant `x<=0` so the bin is chosen
    /// without delay.
    pub branch_invariant: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { branch_invariant: true }
    }
}

fn upper(hi: u32) -> Zone {
    Zone::new(vec![ClockConstraint::simple(CLOCK, Rel::Lt, hi as i64)])
}

fn lower(lo: u32) -> Zone {
    Zone::new(vec![ClockConstraint::simple(CLOCK, Rel::Gt, lo as i64)])
}

fn outcome(weight: Prob, target: &str, reset: bool) -> Outcome {
    Outcome {
        weight,
        update: BTreeMap::<String, AffineExpr>::new(),
        resets: if reset { vec![CLOCK.into()] } else { vec![] },
        target: target.into(),
    }
}

fn transition(source: &str, enabling: Zone, outcomes: Vec<Outcome>) -> Transition {
    Transition { source: source.into(), guard: Assertion::True, enabling, outcomes }
}

pub fn compile_pipeline(p: &PipelineSpec) -> Result<Ptp, PipelineError> {
    compile_pipeline_with(p, CompileOptions::default())
}

/// Compiles a validated pipeline with inline durations.
pub fn compile_pipeline_with(p: &PipelineSpec, opts: CompileOptions) -> Result<Ptp, PipelineError> {
    let diags = validate_pipeline(p);
    if !diags.is_empty() {
        return Err(PipelineError::Invalid(diags));
    }
    let absorbing: HashMap<&str, bool> =
        p.stages.iter().map(|s| (s.id(), matches!(s, Stage::Absorb { .. }))).collect();
    let mut m = Ptp {
        locations: vec![],
        initial: p.start.clone(),
        clocks: vec![CLOCK.into()],
        invariant: BTreeMap::new(),
        variables: vec![],
        init: BTreeMap::new(),
        transitions: vec![],
        labels: BTreeMap::new(),
        location_variable: None,
    };
    for s in &p.stages {
        match s {
            Stage::Delay { id, duration, then } => {
                let bins = match duration {
                    DurationSpec::Bins { bins } => bins,
                    DurationSpec::Ref { name } => return Err(PipelineError::UnboundDistribution(name.clone())),
                };
                m.locations.push(id.clone());
                if opts.branch_invariant {
                    m.invariant.insert(
                        id.clone(),
                        Zone::new(vec![ClockConstraint::simple(CLOCK, Rel::Le, 0)]),
                    );
                }
                let names: Vec<String> = (1..=bins.len()).map(|k| format!("{id}.{k}")).collect();
                m.transitions.push(transition(
                    id,
                    Zone::default(),
                    bins.iter().zip(&names).map(|(b, n)| outcome(b.2, n, true)).collect(),
                ));
                for (BinSpec(lo, hi, _), n) in bins.iter().zip(names) {
                    m.locations.push(n.clone());
                    m.invariant.insert(n.clone(), upper(*hi));
                    m.transitions.push(transition(&n, lower(*lo), vec![outcome(ratio::one(), then, true)]));
                }
            }
            Stage::Work { id, lo, hi, p: ps, success, fail } => {
                m.locations.push(id.clone());
                m.invariant.insert(id.clone(), upper(*hi));
                let mut outcomes = Vec::new();
                if *ps > ratio::zero() {
                    outcomes.push(outcome(*ps, success, !absorbing[success.as_str()]));
                }
                if *ps < ratio::one() {
                    outcomes.push(outcome(ratio::one() - ps, fail, true));
                }
                m.transitions.push(transition(id, lower(*lo), outcomes));
            }
            Stage::Absorb { id, label } => {
                m.locations.push(id.clone());
                m.labels.entry(label.clone()).or_default().insert(id.clone());
                m.transitions.push(transition(id, Zone::default(), vec![outcome(ratio::one(), id, false)]));
            }
        }
    }
    let diags = validate_ptp(&m);
    if !diags.is_empty() {
        let text = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
        return Err(PipelineError::Compiled(text));
    }
    Ok(m)
}
