use super::zone::{zone_nonempty, zone_satisfied, ClockConstraint, Rel, Zone};
use super::{Assertion, Ptp};
use crate::ratio::{self, Prob};
use num_rational::Rational64;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One well-formedness violation, with the path of the offending element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PtpDiagnostic {
    NoLocations,
    DuplicateName { kind: &'static str, name: String },
    UnknownLocation { path: String, name: String },
    UnknownClock { path: String, name: String },
    UnknownVariable { path: String, name: String },
    EmptyRange { var: String },
    InitOutOfRange { var: String, value: i64 },
    NegativeBound { path: String },
    NoOutcomes { path: String },
    WeightOutOfRange { path: String, weight: Prob },
    WeightsSumTo { path: String, sum: Prob },
    UpdateOutOfRange { path: String, var: String, value: i64 },
    InitialInvariantViolated { location: String },
    OutcomeAlwaysDisabled { path: String },
    LocationVariableClash { name: String },
}

impl PtpDiagnostic {
    pub fn path(&self) -> String {
        match self {
            PtpDiagnostic::NoLocations => "locations".into(),
            PtpDiagnostic::DuplicateName { name, .. } => name.clone(),
            PtpDiagnostic::UnknownLocation { path, .. }
            | PtpDiagnostic::UnknownClock { path, .. }
            | PtpDiagnostic::UnknownVariable { path, .. }
            | PtpDiagnostic::NegativeBound { path }
            | PtpDiagnostic::NoOutcomes { path }
            | PtpDiagnostic::WeightOutOfRange { path, .. }
            | PtpDiagnostic::WeightsSumTo { path, .. }
            | PtpDiagnostic::UpdateOutOfRange { path, .. }
            | PtpDiagnostic::OutcomeAlwaysDisabled { path } => path.clone(),
            PtpDiagnostic::EmptyRange { var } | PtpDiagnostic::InitOutOfRange { var, .. } => {
                format!("variables.{var}")
            }
            PtpDiagnostic::InitialInvariantViolated { location } => format!("invariant.{location}"),
            PtpDiagnostic::LocationVariableClash { name } => format!("location_variable.{name}"),
        }
    }
}

impl fmt::Display for PtpDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PtpDiagnostic::NoLocations => write!(f, "model has no locations"),
            PtpDiagnostic::DuplicateName { kind, name } => write!(f, "duplicate {kind} {name:?}"),
            PtpDiagnostic::UnknownLocation { path, name } => write!(f, "{path}: unknown location {name:?}"),
            PtpDiagnostic::UnknownClock { path, name } => write!(f, "{path}: unknown clock {name:?}"),
            PtpDiagnostic::UnknownVariable { path, name } => {
                write!(f, "{path}: unknown variable {name:?}")
            }
            PtpDiagnostic::EmptyRange { var } => write!(f, "variable {var:?} has an empty range"),
            PtpDiagnostic::InitOutOfRange { var, value } => {
                write!(f, "initial value {value} of {var:?} is outside its range")
            }
            PtpDiagnostic::NegativeBound { path } => {
                write!(f, "{path}: single-clock constraint with negative bound")
            }
            PtpDiagnostic::NoOutcomes { path } => write!(f, "{path}: transition has no outcomes"),
            PtpDiagnostic::WeightOutOfRange { path, weight } => {
                write!(f, "{path}: weight {} outside (0, 1]", ratio::format_prob(weight))
            }
            PtpDiagnostic::WeightsSumTo { path, sum } => {
                write!(f, "{path}: outcome weights sum to {}", ratio::format_prob(sum))
            }
            PtpDiagnostic::UpdateOutOfRange { path, var, value } => {
                write!(f, "{path}: update sets {var:?} to {value}, outside its range")
            }
            PtpDiagnostic::InitialInvariantViolated { location } => {
                write!(f, "initial location {location:?}: zero clocks violate its invariant")
            }
            PtpDiagnostic::OutcomeAlwaysDisabled { path } => {
                write!(f, "{path}: target invariant can never hold after the resets")
            }
            PtpDiagnostic::LocationVariableClash { name } => {
                write!(f, "location variable {name:?} clashes with a declared clock or variable")
            }
        }
    }
}

/// Reports every well-formedness violation of `m`; empty means valid.
pub fn validate_ptp(m: &Ptp) -> Vec<PtpDiagnostic> {
    let mut out = Vec::new();
    if m.locations.is_empty() {
        out.push(PtpDiagnostic::NoLocations);
    }
    let mut dup = |kind: &'static str, names: &mut dyn Iterator<Item = &String>| {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n.clone()) {
                out.push(PtpDiagnostic::DuplicateName { kind, name: n.clone() });
            }
        }
    };
    dup("location", &mut m.locations.iter());
    dup("clock", &mut m.clocks.iter());
    dup("variable", &mut m.variables.iter().map(|v| &v.name));
    dup("clock/variable name", &mut m.clocks.iter().chain(m.variables.iter().map(|v| &v.name)));
    if let Some(lv) = &m.location_variable {
        if m.clock_index(lv).is_some() || m.variable_index(lv).is_some() {
            out.push(PtpDiagnostic::LocationVariableClash { name: lv.clone() });
        }
    }

    let loc_known = |n: &str| m.location_index(n).is_some();
    if !loc_known(&m.initial) {
        out.push(PtpDiagnostic::UnknownLocation { path: "initial".into(), name: m.initial.clone() });
    }
    for v in &m.variables {
        if v.lo > v.hi {
            out.push(PtpDiagnostic::EmptyRange { var: v.name.clone() });
        }
    }
    for (name, value) in &m.init {
        match m.variables.iter().find(|v| &v.name == name) {
            None => out.push(PtpDiagnostic::UnknownVariable { path: "init".into(), name: name.clone() }),
            Some(v) if *value < v.lo || *value > v.hi => {
                out.push(PtpDiagnostic::InitOutOfRange { var: name.clone(), value: *value })
            }
            _ => {}
        }
    }
    for (loc, zone) in &m.invariant {
        let path = format!("invariant.{loc}");
        if !loc_known(loc) {
            out.push(PtpDiagnostic::UnknownLocation { path: path.clone(), name: loc.clone() });
        }
        check_zone(m, zone, &path, &mut out);
    }
    for (label, locs) in &m.labels {
        for l in locs {
            if !loc_known(l) {
                out.push(PtpDiagnostic::UnknownLocation {
                    path: format!("labels.{label}"),
                    name: l.clone(),
                });
            }
        }
    }

    for (ti, t) in m.transitions.iter().enumerate() {
        let path = format!("transitions[{ti}]");
        if !loc_known(&t.source) {
            out.push(PtpDiagnostic::UnknownLocation {
                path: format!("{path}.source"),
                name: t.source.clone(),
            });
        }
        check_assertion(m, &t.guard, &format!("{path}.guard"), &mut out);
        check_zone(m, &t.enabling, &format!("{path}.enabling"), &mut out);
        if t.outcomes.is_empty() {
            out.push(PtpDiagnostic::NoOutcomes { path: path.clone() });
            continue;
        }
        let mut sum = ratio::zero();
        for (oi, o) in t.outcomes.iter().enumerate() {
            let opath = format!("{path}.outcomes[{oi}]");
            if o.weight <= ratio::zero() || o.weight > ratio::one() {
                out.push(PtpDiagnostic::WeightOutOfRange { path: opath.clone(), weight: o.weight });
            }
            sum += o.weight;
            if !loc_known(&o.target) {
                out.push(PtpDiagnostic::UnknownLocation {
                    path: format!("{opath}.target"),
                    name: o.target.clone(),
                });
            }
            for r in &o.resets {
                if m.clock_index(r).is_none() {
                    out.push(PtpDiagnostic::UnknownClock { path: format!("{opath}.resets"), name: r.clone() });
                }
            }
            for (var, expr) in &o.update {
                let upath = format!("{opath}.update.{var}");
                match m.variables.iter().find(|v| &v.name == var) {
                    None => out.push(PtpDiagnostic::UnknownVariable { path: upath.clone(), name: var.clone() }),
                    Some(decl) => {
                        if let Some(c) = expr.as_const() {
                            if c < decl.lo || c > decl.hi {
                                out.push(PtpDiagnostic::UpdateOutOfRange {
                                    path: upath.clone(),
                                    var: var.clone(),
                                    value: c,
                                });
                            }
                        }
                    }
                }
                for name in expr.variables() {
                    if m.variable_index(name).is_none() {
                        out.push(PtpDiagnostic::UnknownVariable { path: upath.clone(), name: name.clone() });
                    }
                }
            }
            if loc_known(&t.source) && loc_known(&o.target) && always_disabled(m, t, o) {
                out.push(PtpDiagnostic::OutcomeAlwaysDisabled { path: opath });
            }
        }
        if sum != ratio::one() {
            out.push(PtpDiagnostic::WeightsSumTo { path: path.clone(), sum });
        }
    }

    if loc_known(&m.initial) {
        if let Some(z) = m.invariant_of(&m.initial) {
            let zeros: BTreeMap<String, Rational64> =
                m.clocks.iter().map(|c| (c.clone(), Rational64::from_integer(0))).collect();
            let empty = !zone_nonempty(&z.and(&Zone::new(
                m.clocks.iter().map(|c| ClockConstraint::simple(c, Rel::Le, 0)).collect(),
            )));
            if empty || zone_satisfied(z, &zeros) == Ok(false) {
                out.push(PtpDiagnostic::InitialInvariantViolated { location: m.initial.clone() });
            }
        }
    }
    out
}

fn check_zone(m: &Ptp, z: &Zone, path: &str, out: &mut Vec<PtpDiagnostic>) {
    for (i, c) in z.constraints.iter().enumerate() {
        for clock in std::iter::once(&c.left).chain(c.right.as_ref()) {
            if m.clock_index(clock).is_none() {
                out.push(PtpDiagnostic::UnknownClock { path: format!("{path}[{i}]"), name: clock.clone() });
            }
        }
        if c.right.is_none() && c.bound < 0 {
            out.push(PtpDiagnostic::NegativeBound { path: format!("{path}[{i}]") });
        }
    }
}

fn check_assertion(m: &Ptp, a: &Assertion, path: &str, out: &mut Vec<PtpDiagnostic>) {
    let mut vars = Vec::new();
    a.variables(&mut vars);
    for v in vars {
        if m.variable_index(&v).is_none() {
            out.push(PtpDiagnostic::UnknownVariable { path: path.to_string(), name: v });
        }
    }
}

/// True when no valuation allowed by the source invariant and the enabling
/// condition can satisfy the target invariant once the resets are applied.
fn always_disabled(m: &Ptp, t: &super::Transition, o: &super::Outcome) -> bool {
    let Some(target_inv) = m.invariant_of(&o.target) else {
        return false;
    };
    let reset: BTreeSet<&str> = o.resets.iter().map(String::as_str).collect();
    let mut zone = t.enabling.clone();
    if let Some(src) = m.invariant_of(&t.source) {
        zone = zone.and(src);
    }
    for c in &target_inv.constraints {
        let l = reset.contains(c.left.as_str());
        let r = c.right.as_deref().map(|r| reset.contains(r));
        match (l, r) {
            (false, None) | (false, Some(false)) => zone.constraints.push(c.clone()),
            (true, None) | (true, Some(true)) => {
                if !c.rel.holds(0, c.bound) {
                    return true;
                }
            }
            // x - 0 rel b
            (false, Some(true)) => zone.constraints.push(ClockConstraint::simple(&c.left, c.rel, c.bound)),
            // 0 - y rel b  <=>  y flip(rel) -b
            (true, Some(false)) => {
                let flipped = match c.rel {
                    Rel::Lt => Rel::Gt,
                    Rel::Le => Rel::Ge,
                    Rel::Gt => Rel::Lt,
                    Rel::Ge => Rel::Le,
                };
                let right = c.right.as_deref().expect("checked");
                zone.constraints.push(ClockConstraint::simple(right, flipped, -c.bound));
            }
        }
    }
    // Unknown clocks are reported elsewhere.
    if zone.clocks().iter().any(|c| m.clock_index(c).is_none()) {
        return false;
    }
    !zone_nonempty(&zone)
}
