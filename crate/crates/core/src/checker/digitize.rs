//! Digital-clocks translation of a [`Ptp`] into a finite [`Mdp`].
//!
//! Time advances in ticks of `1/g` model units, so every constant is scaled
//! by the granularity `g`. A clock saturates at `ceiling·g + 1`, one tick past
//! the largest constant it is compared against. Bounded queries add an
//! elapsed-tick counter that is never reset and saturates at `T·g + 1`.

use super::query::StateProp;
use super::{CheckError, CheckOptions};
use crate::ptp::{clock_ceilings, AffineExpr, Assertion, CmpOp, Operand, Ptp, Rel, Zone};
use crate::ratio::Prob;
use std::collections::{HashMap, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigitizedState {
    pub location: usize,
    pub variables: Vec<i64>,
    /// Ticks per clock, saturated at the cap.
    pub clocks: Vec<u32>,
    /// Present iff the MDP was built for a bounded query.
    pub elapsed: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Tick,
    /// Index into `Ptp::transitions`.
    Transition(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: Action,
    /// Distinct successors with exact probabilities summing to one.
    pub successors: Vec<(usize, Prob)>,
}

#[derive(Debug, Clone)]
pub struct Mdp {
    pub granularity: u32,
    /// `T·g` for bounded builds.
    pub deadline_ticks: Option<u32>,
    pub states: Vec<DigitizedState>,
    pub initial: usize,
    pub choices: Vec<Vec<Choice>>,
    /// Target states; empty-everywhere when built without a proposition.
    pub target: Vec<bool>,
}

impl Mdp {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone)]
struct ScaledConstraint {
    left: usize,
    right: Option<usize>,
    rel: Rel,
    bound: i64,
}

fn zone_holds(z: &[ScaledConstraint], clocks: &[u32]) -> bool {
    z.iter().all(|c| {
        let lhs = clocks[c.left] as i64 - c.right.map_or(0, |r| clocks[r] as i64);
        c.rel.holds(lhs, c.bound)
    })
}

/// Assertion or proposition compiled against variable and location indices.
#[derive(Debug, Clone)]
pub(crate) enum Cond {
    True,
    Var { var: usize, op: CmpOp, rhs: CondOperand },
    Loc { op: CmpOp, rhs: i64 },
    InLocations(Vec<bool>),
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone)]
pub(crate) enum CondOperand {
    Const(i64),
    Var(usize),
    Loc,
}

impl Cond {
    pub(crate) fn eval(&self, location: usize, vars: &[i64]) -> bool {
        match self {
            Cond::True => true,
            Cond::Var { var, op, rhs } => {
                let r = match rhs {
                    CondOperand::Const(c) => *c,
                    CondOperand::Var(v) => vars[*v],
                    CondOperand::Loc => location as i64,
                };
                op.eval(vars[*var], r)
            }
            Cond::Loc { op, rhs } => op.eval(location as i64, *rhs),
            Cond::InLocations(set) => set[location],
            Cond::And(a) => a.iter().all(|c| c.eval(location, vars)),
            Cond::Or(a) => a.iter().any(|c| c.eval(location, vars)),
            Cond::Not(a) => !a.eval(location, vars),
        }
    }
}

fn compile_cmp(m: &Ptp, var: &str, op: CmpOp, rhs: &Operand) -> Result<Cond, CheckError> {
    let is_loc = |n: &str| m.location_variable.as_deref() == Some(n);
    let operand = |o: &Operand| -> Result<CondOperand, CheckError> {
        Ok(match o {
            Operand::Const(c) => CondOperand::Const(*c),
            Operand::Var(v) if m.variable_index(v).is_some() => {
                CondOperand::Var(m.variable_index(v).expect("checked"))
            }
            Operand::Var(v) if is_loc(v) => CondOperand::Loc,
            Operand::Var(v) => return Err(CheckError::UnknownVariable(v.clone())),
        })
    };
    if let Some(i) = m.variable_index(var) {
        return Ok(Cond::Var { var: i, op, rhs: operand(rhs)? });
    }
    if is_loc(var) {
        return match rhs {
            Operand::Const(c) => Ok(Cond::Loc { op, rhs: *c }),
            Operand::Var(_) => Err(CheckError::UnsupportedProposition(format!(
                "location variable {var} compared with a variable"
            ))),
        };
    }
    Err(CheckError::UnknownVariable(var.to_string()))
}

pub(crate) fn compile_assertion(m: &Ptp, a: &Assertion) -> Result<Cond, CheckError> {
    Ok(match a {
        Assertion::True => Cond::True,
        Assertion::Cmp { var, op, rhs } => compile_cmp(m, var, *op, rhs)?,
        Assertion::And { args } => {
            Cond::And(args.iter().map(|x| compile_assertion(m, x)).collect::<Result<_, _>>()?)
        }
        Assertion::Or { args } => {
            Cond::Or(args.iter().map(|x| compile_assertion(m, x)).collect::<Result<_, _>>()?)
        }
        Assertion::Not { arg } => Cond::Not(Box::new(compile_assertion(m, arg)?)),
    })
}

pub(crate) fn compile_prop(m: &Ptp, p: &StateProp) -> Result<Cond, CheckError> {
    Ok(match p {
        StateProp::True => Cond::True,
        StateProp::Label(l) => {
            let locs = m.labels.get(l).ok_or_else(|| CheckError::UnknownLabel(l.clone()))?;
            let mut set = vec![false; m.locations.len()];
            for name in locs {
                let i = m
                    .location_index(name)
                    .ok_or_else(|| CheckError::UnknownLabel(format!("{l} (location {name})")))?;
                set[i] = true;
            }
            Cond::InLocations(set)
        }
        StateProp::Cmp { var, op, rhs } => compile_cmp(m, var, *op, rhs)?,
        StateProp::And(a) => Cond::And(a.iter().map(|x| compile_prop(m, x)).collect::<Result<_, _>>()?),
        StateProp::Or(a) => Cond::Or(a.iter().map(|x| compile_prop(m, x)).collect::<Result<_, _>>()?),
        StateProp::Not(a) => Cond::Not(Box::new(compile_prop(m, a)?)),
    })
}

struct CompiledOutcome {
    weight: Prob,
    updates: Vec<(usize, AffineExpr)>,
    resets: Vec<usize>,
    target: usize,
}

struct CompiledTransition {
    id: usize,
    guard: Cond,
    enabling: Vec<ScaledConstraint>,
    outcomes: Vec<CompiledOutcome>,
}

struct Compiled {
    invariants: Vec<Vec<ScaledConstraint>>,
    outgoing: Vec<Vec<CompiledTransition>>,
    ranges: Vec<(i64, i64)>,
    caps: Vec<u32>,
}

fn scale_zone(m: &Ptp, z: &Zone, g: u32) -> Result<Vec<ScaledConstraint>, CheckError> {
    z.constraints
        .iter()
        .map(|c| {
            let clock = |n: &str| m.clock_index(n).ok_or_else(|| CheckError::UnknownClock(n.to_string()));
            Ok(ScaledConstraint {
                left: clock(&c.left)?,
                right: c.right.as_deref().map(clock).transpose()?,
                rel: c.rel,
                bound: c.bound.checked_mul(g as i64).ok_or(CheckError::Overflow)?,
            })
        })
        .collect()
}

fn compile(m: &Ptp, g: u32, opts: &CheckOptions) -> Result<Compiled, CheckError> {
    let ceilings = clock_ceilings(m);
    let caps = m
        .clocks
        .iter()
        .map(|c| {
            let ceiling = ceilings.get(c).copied().unwrap_or(0);
            u32::try_from(ceiling * g as i64 + 1 + opts.cap_margin as i64).map_err(|_| CheckError::Overflow)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut invariants = vec![Vec::new(); m.locations.len()];
    for (loc, z) in &m.invariant {
        let i = m.location_index(loc).ok_or_else(|| CheckError::UnknownLocation(loc.clone()))?;
        invariants[i] = scale_zone(m, z, g)?;
    }
    let mut outgoing: Vec<Vec<CompiledTransition>> = (0..m.locations.len()).map(|_| Vec::new()).collect();
    for (id, t) in m.transitions.iter().enumerate() {
        let src = m.location_index(&t.source).ok_or_else(|| CheckError::UnknownLocation(t.source.clone()))?;
        let outcomes = t
            .outcomes
            .iter()
            .map(|o| {
                Ok(CompiledOutcome {
                    weight: o.weight,
                    updates: o
                        .update
                        .iter()
                        .map(|(v, e)| {
                            m.variable_index(v)
                                .map(|i| (i, e.clone()))
                                .ok_or_else(|| CheckError::UnknownVariable(v.clone()))
                        })
                        .collect::<Result<_, CheckError>>()?,
                    resets: o
                        .resets
                        .iter()
                        .map(|r| m.clock_index(r).ok_or_else(|| CheckError::UnknownClock(r.clone())))
                        .collect::<Result<_, _>>()?,
                    target: m
                        .location_index(&o.target)
                        .ok_or_else(|| CheckError::UnknownLocation(o.target.clone()))?,
                })
            })
            .collect::<Result<Vec<_>, CheckError>>()?;
        outgoing[src].push(CompiledTransition {
            id,
            guard: compile_assertion(m, &t.guard)?,
            enabling: scale_zone(m, &t.enabling, g)?,
            outcomes,
        });
    }
    Ok(Compiled {
        invariants,
        outgoing,
        ranges: m.variables.iter().map(|v| (v.lo, v.hi)).collect(),
        caps,
    })
}

/// Digitizes `m` at granularity `g`, materializing only reachable states.
/// With `bound`, states carry an elapsed counter.
pub fn digitize(m: &Ptp, g: u32, bound: Option<u64>, opts: &CheckOptions) -> Result<Mdp, CheckError> {
    build(m, g, bound, None, opts)
}

/// Digitization for a query: target states (proposition holds and, when
/// bounded, elapsed ≤ T·g) are absorbing, and states past the deadline are
/// not expanded.
pub fn digitize_query(
    m: &Ptp,
    q: &super::PctlQuery,
    g: u32,
    opts: &CheckOptions,
) -> Result<Mdp, CheckError> {
    let prop = compile_prop(m, &q.prop)?;
    build(m, g, q.bound, Some(&prop), opts)
}

pub(crate) fn build(
    m: &Ptp,
    g: u32,
    bound: Option<u64>,
    prop: Option<&Cond>,
    opts: &CheckOptions,
) -> Result<Mdp, CheckError> {
    if g == 0 {
        return Err(CheckError::Granularity("granularity must be positive".into()));
    }
    let c = compile(m, g, opts)?;
    let deadline = bound
        .map(|t| u32::try_from(t * g as u64).map_err(|_| CheckError::Overflow))
        .transpose()?;
    let initial_loc = m.location_index(&m.initial).ok_or_else(|| CheckError::UnknownLocation(m.initial.clone()))?;
    let init = DigitizedState {
        location: initial_loc,
        variables: m.initial_valuation(),
        clocks: vec![0; m.clocks.len()],
        elapsed: deadline.map(|_| 0),
    };

    let mut index: HashMap<DigitizedState, usize> = HashMap::new();
    let mut states: Vec<DigitizedState> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |s: DigitizedState,
                      states: &mut Vec<DigitizedState>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize, CheckError> {
        if let Some(&i) = index.get(&s) {
            return Ok(i);
        }
        let i = states.len();
        if i >= opts.state_cap {
            return Err(CheckError::StateCapExceeded { cap: opts.state_cap });
        }
        index.insert(s.clone(), i);
        states.push(s);
        queue.push_back(i);
        Ok(i)
    };
    let initial = intern(init, &mut states, &mut queue)?;
    let mut choices: Vec<Vec<Choice>> = Vec::new();
    let mut target: Vec<bool> = Vec::new();

    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let is_target = prop.is_some_and(|p| {
            p.eval(s.location, &s.variables) && match (s.elapsed, deadline) {
                (Some(e), Some(d)) => e <= d,
                _ => true,
            }
        });
        let expired = matches!((s.elapsed, deadline), (Some(e), Some(d)) if e > d);
        if target.len() <= i {
            target.resize(i + 1, false);
            choices.resize_with(i + 1, Vec::new);
        }
        target[i] = is_target;
        if (is_target && prop.is_some()) || (expired && prop.is_some()) {
            continue;
        }
        let mut out = Vec::new();

        let ticked: Vec<u32> = s.clocks.iter().zip(&c.caps).map(|(v, cap)| (v + 1).min(*cap)).collect();
        if zone_holds(&c.invariants[s.location], &ticked) {
            let next = DigitizedState {
                location: s.location,
                variables: s.variables.clone(),
                clocks: ticked,
                elapsed: s.elapsed.zip(deadline).map(|(e, d)| (e + 1).min(d + 1)),
            };
            let j = intern(next, &mut states, &mut queue)?;
            out.push(Choice { action: Action::Tick, successors: vec![(j, Prob::from_integer(1))] });
        }

        'transitions: for t in &c.outgoing[s.location] {
            if !t.guard.eval(s.location, &s.variables) || !zone_holds(&t.enabling, &s.clocks) {
                continue;
            }
            let mut succ: Vec<(DigitizedState, Prob)> = Vec::with_capacity(t.outcomes.len());
            for o in &t.outcomes {
                let mut vars = s.variables.clone();
                for (v, expr) in &o.updates {
                    let lookup = |name: &str| m.variable_index(name).map(|k| s.variables[k]);
                    let value = expr.eval(&lookup).ok_or(CheckError::Overflow)?;
                    let (lo, hi) = c.ranges[*v];
                    if value < lo || value > hi {
                        return Err(CheckError::UpdateOutOfRange {
                            transition: t.id,
                            variable: m.variables[*v].name.clone(),
                            value,
                        });
                    }
                    vars[*v] = value;
                }
                let mut clocks = s.clocks.clone();
                for r in &o.resets {
                    clocks[*r] = 0;
                }
                if !zone_holds(&c.invariants[o.target], &clocks) {
                    continue 'transitions;
                }
                succ.push((
                    DigitizedState { location: o.target, variables: vars, clocks, elapsed: s.elapsed },
                    o.weight,
                ));
            }
            let mut successors: Vec<(usize, Prob)> = Vec::with_capacity(succ.len());
            for (st, p) in succ {
                let j = intern(st, &mut states, &mut queue)?;
                match successors.iter_mut().find(|(k, _)| *k == j) {
                    Some(e) => e.1 += p,
                    None => successors.push((j, p)),
                }
            }
            out.push(Choice { action: Action::Transition(t.id), successors });
        }
        choices[i] = out;
    }
    target.resize(states.len(), false);
    choices.resize_with(states.len(), Vec::new);
    Ok(Mdp { granularity: g, deadline_ticks: deadline, states, initial, choices, target })
}
