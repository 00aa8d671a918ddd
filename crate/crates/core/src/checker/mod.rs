//! Reachability model checking of probabilistic timed programs.
//!
//! A model is digitized at granularity `g` into a finite MDP
//! ([`digitize`]), states with probability exactly 0 or 1 are found by graph
//! analysis, and the rest are solved exactly (acyclic case) or by value
//! iteration. Open zones such as `3<x<4` hold no integer points, so `g ≥ 2`
//! is needed; finite-`g` values under-approximate `Pmax` and over-approximate
//! `Pmin`, and [`granularity_ladder`] shows the convergence.

pub mod digitize;
pub mod precompute;
mod query;
pub mod solve;

pub use digitize::{digitize, digitize_query, Action, Choice, DigitizedState, Mdp};
pub use precompute::qualitative_precompute;
pub use query::{parse_query, Opt, PctlQuery, StateProp};
pub use solve::{optimal_reachability, Solution};

use crate::ptp::{validate_ptp, Ptp, PtpDiagnostic};
use crate::ratio;
use num_rational::BigRational;
use std::fmt;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("query syntax error at line {line}, column {column}: {message}")]
    Query { line: usize, column: usize, message: String },
    #[error("invalid model: {}", join(.0))]
    InvalidModel(Vec<PtpDiagnostic>),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("unknown clock {0:?}")]
    UnknownClock(String),
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("unsupported proposition: {0}")]
    UnsupportedProposition(String),
    #[error("state space exceeds the cap of {cap} states")]
    StateCapExceeded { cap: usize },
    #[error("transition {transition} sets {variable:?} to {value}, outside its range")]
    UpdateOutOfRange { transition: usize, variable: String, value: i64 },
    #[error("arithmetic overflow while digitizing")]
    Overflow,
    #[error("value iteration did not converge within {iterations} iterations")]
    Diverged { iterations: u64 },
    #[error("{0}")]
    Granularity(String),
}

fn join(diags: &[PtpDiagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Sup-norm stopping threshold for value iteration.
    pub epsilon: f64,
    pub max_iterations: u64,
    pub state_cap: usize,
    /// Extra ticks added to every clock cap.
    pub cap_margin: u32,
    /// Skip the exact topological pass even when it applies.
    pub force_value_iteration: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            epsilon: 1e-10,
            max_iterations: 1_000_000,
            state_cap: 5_000_000,
            cap_margin: 0,
            force_value_iteration: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TopologicalExact,
    ValueIteration,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TopologicalExact => "topological-exact",
            Method::ValueIteration => "value-iteration",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub value: f64,
    pub exact: Option<BigRational>,
    pub granularity: u32,
    pub states: usize,
    pub iterations: u64,
    pub method: Method,
    pub wall_time: Duration,
}

impl CheckResult {
    /// Exact value as a decimal or `num/den`, when known.
    pub fn exact_text(&self) -> Option<String> {
        self.exact.as_ref().map(ratio::format_big)
    }
}

/// Errors that block checking; the always-disabled-outcome lint does not.
fn blocking_diagnostics(m: &Ptp) -> Vec<PtpDiagnostic> {
    validate_ptp(m)
        .into_iter()
        .filter(|d| !matches!(d, PtpDiagnostic::OutcomeAlwaysDisabled { .. }))
        .collect()
}

/// Answers `q` on `m` at granularity `g`.
pub fn check(m: &Ptp, q: &PctlQuery, g: u32, opts: &CheckOptions) -> Result<CheckResult, CheckError> {
    let started = Instant::now();
    let diags = blocking_diagnostics(m);
    if !diags.is_empty() {
        return Err(CheckError::InvalidModel(diags));
    }
    let mdp = digitize_query(m, q, g, opts)?;
    let sol = optimal_reachability(&mdp, &mdp.target, q.opt, opts)?;
    let value = sol.values[mdp.initial].clamp(0.0, 1.0);
    Ok(CheckResult {
        value,
        exact: sol.exact.map(|mut e| e.swap_remove(mdp.initial)),
        granularity: g,
        states: mdp.len(),
        iterations: sol.iterations,
        method: sol.method,
        wall_time: started.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct Ladder {
    pub results: Vec<CheckResult>,
    /// Pairs of consecutive granularities whose values move the wrong way:
    /// down for `Pmax`, up for `Pmin`.
    pub violations: Vec<(u32, u32)>,
}

impl Ladder {
    pub fn monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `gs` is strictly increasing and each entry divides the next.
pub fn validate_ladder(gs: &[u32]) -> Result<(), CheckError> {
    if gs.is_empty() {
        return Err(CheckError::Granularity("granularity list is empty".into()));
    }
    if gs[0] == 0 {
        return Err(CheckError::Granularity("granularity must be positive".into()));
    }
    for w in gs.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(CheckError::Granularity(format!(
                "granularities must be strictly increasing, each dividing the next (got {} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Runs [`check`] at each granularity and flags non-monotone steps.
pub fn granularity_ladder(
    m: &Ptp,
    q: &PctlQuery,
    gs: &[u32],
    opts: &CheckOptions,
) -> Result<Ladder, CheckError> {
    validate_ladder(gs)?;
    let results = gs.iter().map(|&g| check(m, q, g, opts)).collect::<Result<Vec<_>, _>>()?;
    let tol = 1e-9_f64.max(opts.epsilon);
    let violations = results
        .windows(2)
        .filter(|w| match q.opt {
            Opt::Max => w[1].value < w[0].value - tol,
            Opt::Min => w[1].value > w[0].value + tol,
        })
        .map(|w| (w[0].granularity, w[1].granularity))
        .collect();
    Ok(Ladder { results, violations })
}
