//! Clock constraints and zones.

use super::Ptp;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    pub fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Gt => lhs > rhs,
            Rel::Ge => lhs >= rhs,
        }
    }
}

/// `left - right rel bound`, or `left rel bound` when `right` is absent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClockConstraint {
    pub left: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
    pub rel: Rel,
    pub bound: i64,
}

impl ClockConstraint {
    pub fn simple(clock: &str, rel: Rel, bound: i64) -> Self {
        ClockConstraint { left: clock.to_string(), right: None, rel, bound }
    }

    pub fn diff(left: &str, right: &str, rel: Rel, bound: i64) -> Self {
        ClockConstraint { left: left.to_string(), right: Some(right.to_string()), rel, bound }
    }
}

/// Conjunction of clock constraints; the empty conjunction is universal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Zone {
    pub constraints: Vec<ClockConstraint>,
}

impl Zone {
    pub fn new(constraints: Vec<ClockConstraint>) -> Self {
        Zone { constraints }
    }

    pub fn is_universal(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn clocks(&self) -> BTreeSet<&str> {
        self.constraints
            .iter()
            .flat_map(|c| std::iter::once(c.left.as_str()).chain(c.right.as_deref()))
            .collect()
    }

    pub fn and(&self, other: &Zone) -> Zone {
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        Zone { constraints }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ZoneError {
    #[error("clock {0:?} has no value")]
    UnknownClock(String),
}

/// Whether the valuation satisfies every constraint.
pub fn zone_satisfied(
    z: &Zone,
    valuation: &BTreeMap<String, Rational64>,
) -> Result<bool, ZoneError> {
    let get = |c: &str| {
        valuation.get(c).copied().ok_or_else(|| ZoneError::UnknownClock(c.to_string()))
    };
    for c in &z.constraints {
        let lhs = match &c.right {
            Some(r) => get(&c.left)? - get(r)?,
            None => get(&c.left)?,
        };
        if !c.rel.holds(lhs, Rational64::from_integer(c.bound)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Upper bound on `x_i - x_j`: value plus strictness; `None` is +∞.
type Bound = Option<(i64, bool)>;

fn bound_lt(a: Bound, b: Bound) -> bool {
    match (a, b) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some((x, sx)), Some((y, sy))) => x < y || (x == y && sx && !sy),
    }
}

fn bound_add(a: Bound, b: Bound) -> Bound {
    match (a, b) {
        (Some((x, sx)), Some((y, sy))) => Some((x.saturating_add(y), sx || sy)),
        _ => None,
    }
}

/// Whether some nonnegative valuation satisfies the zone. Builds the
/// difference-bound matrix over the mentioned clocks plus a zero reference,
/// closes it with Floyd-Warshall and looks for a negative cycle.
pub fn zone_nonempty(z: &Zone) -> bool {
    let clocks: Vec<&str> = z.clocks().into_iter().collect();
    let n = clocks.len() + 1;
    let idx = |c: &str| clocks.iter().position(|k| *k == c).expect("collected") + 1;
    let mut d: Vec<Bound> = vec![None; n * n];
    for i in 0..n {
        d[i * n + i] = Some((0, false));
        // 0 - x_i <= 0
        d[i] = Some((0, false));
    }
    let tighten = |d: &mut Vec<Bound>, i: usize, j: usize, b: Bound| {
        if bound_lt(b, d[i * n + j]) {
            d[i * n + j] = b;
        }
    };
    for c in &z.constraints {
        let l = idx(&c.left);
        let r = c.right.as_deref().map(idx).unwrap_or(0);
        match c.rel {
            Rel::Lt => tighten(&mut d, l, r, Some((c.bound, true))),
            Rel::Le => tighten(&mut d, l, r, Some((c.bound, false))),
            Rel::Gt => tighten(&mut d, r, l, Some((-c.bound, true))),
            Rel::Ge => tighten(&mut d, r, l, Some((-c.bound, false))),
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = bound_add(d[i * n + k], d[k * n + j]);
                if bound_lt(via, d[i * n + j]) {
                    d[i * n + j] = via;
                }
            }
        }
    }
    (0..n).all(|i| !bound_lt(d[i * n + i], Some((0, false))))
}

/// Largest absolute constant each clock is compared against in any
/// invariant or enabling condition; 0 for clocks never compared.
pub fn clock_ceilings(m: &Ptp) -> BTreeMap<String, i64> {
    let mut out: BTreeMap<String, i64> = m.clocks.iter().map(|c| (c.clone(), 0)).collect();
    let zones = m.invariant.values().chain(m.transitions.iter().map(|t| &t.enabling));
    for z in zones {
        for c in &z.constraints {
            for clock in std::iter::once(&c.left).chain(c.right.as_ref()) {
                let e = out.entry(clock.clone()).or_insert(0);
                *e = (*e).max(c.bound.abs());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn val(pairs: &[(&str, Rational64)]) -> BTreeMap<String, Rational64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn open(lo: i64, hi: i64) -> Zone {
        Zone::new(vec![ClockConstraint::simple("x", Rel::Gt, lo), ClockConstraint::simple("x", Rel::Lt, hi)])
    }

    #[test]
    fn satisfaction() {
        assert_eq!(zone_satisfied(&open(3, 4), &val(&[("x", r(7, 2))])), Ok(true));
        assert_eq!(zone_satisfied(&open(3, 4), &val(&[("x", r(3, 1))])), Ok(false));
        let diff = Zone::new(vec![ClockConstraint::diff("x", "y", Rel::Le, 1)]);
        assert_eq!(zone_satisfied(&diff, &val(&[("x", r(5, 1)), ("y", r(4, 1))])), Ok(true));
        assert_eq!(
            zone_satisfied(&diff, &val(&[("x", r(5, 1))])),
            Err(ZoneError::UnknownClock("y".into()))
        );
    }

    #[test]
    fn emptiness() {
        assert!(!zone_nonempty(&open(3, 3)));
        assert!(zone_nonempty(&open(3, 4)));
        let cycle = Zone::new(vec![
            ClockConstraint::diff("x", "y", Rel::Le, 1),
            ClockConstraint::diff("y", "x", Rel::Le, -2),
        ]);
        assert!(!zone_nonempty(&cycle));
        assert!(zone_nonempty(&Zone::default()));
        assert!(!zone_nonempty(&Zone::new(vec![ClockConstraint::simple("x", Rel::Lt, 0)])));
        assert!(zone_nonempty(&Zone::new(vec![ClockConstraint::simple("x", Rel::Le, 0)])));
    }

    fn constraint(clocks: &'static [&'static str]) -> impl Strategy<Value = ClockConstraint> {
        let rel = prop_oneof![Just(Rel::Lt), Just(Rel::Le), Just(Rel::Gt), Just(Rel::Ge)];
        let idx = 0..clocks.len();
        (idx.clone(), proptest::option::of(idx), rel, -4i64..=6).prop_map(move |(l, r, rel, b)| {
            match r.filter(|r| *r != l) {
                Some(r) => ClockConstraint::diff(clocks[l], clocks[r], rel, b),
                None => ClockConstraint::simple(clocks[l], rel, b.abs()),
            }
        })
    }

    /// Quarter-unit grid search. Quarters give enough distinct fractional
    /// parts for two clocks; difference constraints can push a witness past
    /// one ceiling, so the range grows with the clock count.
    fn grid_nonempty(z: &Zone, clocks: &[&str]) -> bool {
        let ceiling = z.constraints.iter().map(|c| c.bound.abs()).max().unwrap_or(0) + 1;
        let steps = ceiling * clocks.len() as i64 * 4;
        let mut point = vec![0i64; clocks.len()];
        loop {
            let v = clocks.iter().zip(&point).map(|(c, p)| (c.to_string(), r(*p, 4))).collect();
            if zone_satisfied(z, &v).unwrap() {
                return true;
            }
            let mut i = 0;
            loop {
                if i == point.len() {
                    return false;
                }
                point[i] += 1;
                if point[i] <= steps {
                    break;
                }
                point[i] = 0;
                i += 1;
            }
        }
    }

    proptest! {
        #[test]
        fn single_clock_matches_grid(cs in prop::collection::vec(constraint(&["x"]), 0..4)) {
            let z = Zone::new(cs);
            prop_assert_eq!(zone_nonempty(&z), grid_nonempty(&z, &["x"]));
        }

        #[test]
        fn two_clocks_match_grid(cs in prop::collection::vec(constraint(&["x", "y"]), 0..5)) {
            let z = Zone::new(cs);
            let clocks = ["x", "y"];
            prop_assert_eq!(zone_nonempty(&z), grid_nonempty(&z, &clocks));
        }

        #[test]
        fn dropping_constraints_keeps_satisfaction(
            cs in prop::collection::vec(constraint(&["x", "y"]), 1..5),
            x in 0i64..40,
            y in 0i64..40,
            drop in 0usize..5,
        ) {
            let v = val(&[("x", r(x, 4)), ("y", r(y, 4))]);
            let full = Zone::new(cs.clone());
            let mut fewer = cs;
            fewer.remove(drop % fewer.len());
            if zone_satisfied(&full, &v).unwrap() {
                prop_assert!(zone_satisfied(&Zone::new(fewer), &v).unwrap());
            }
        }
    }
}
