//! Probabilistic timed programs: locations, clocks, bounded integer
//! variables, invariants and probabilistic transitions.
//!
//! Models are name-based (locations, clocks and variables are referenced by
//! name) so that they can be validated with precise diagnostics; the checker
//! compiles them into an indexed form.

mod validate;
pub mod zone;

pub use validate::{validate_ptp, PtpDiagnostic};
pub use zone::{clock_ceilings, zone_nonempty, zone_satisfied, ClockConstraint, Rel, Zone};

use crate::ratio::{serde_prob, Prob};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Const(i64),
    Var(String),
}

/// Boolean assertion over integer state variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum Assertion {
    #[default]
    True,
    Cmp { var: String, op: CmpOp, rhs: Operand },
    And { args: Vec<Assertion> },
    Or { args: Vec<Assertion> },
    Not { arg: Box<Assertion> },
}


impl Assertion {
    pub fn is_true(&self) -> bool {
        matches!(self, Assertion::True)
    }

    /// Evaluates with `lookup` returning the value of a variable.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<i64>) -> Option<bool> {
        Some(match self {
            Assertion::True => true,
            Assertion::Cmp { var, op, rhs } => {
                let r = match rhs {
                    Operand::Const(c) => *c,
                    Operand::Var(v) => lookup(v)?,
                };
                op.eval(lookup(var)?, r)
            }
            Assertion::And { args } => {
                for a in args {
                    if !a.eval(lookup)? {
                        return Some(false);
                    }
                }
                true
            }
            Assertion::Or { args } => {
                for a in args {
                    if a.eval(lookup)? {
                        return Some(true);
                    }
                }
                false
            }
            Assertion::Not { arg } => !arg.eval(lookup)?,
        })
    }

    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Assertion::True => {}
            Assertion::Cmp { var, rhs, .. } => {
                out.push(var.clone());
                if let Operand::Var(v) = rhs {
                    out.push(v.clone());
                }
            }
            Assertion::And { args } | Assertion::Or { args } => {
                args.iter().for_each(|a| a.variables(out))
            }
            Assertion::Not { arg } => arg.variables(out),
        }
    }
}

/// `constant + Σ coef·var`. A bare JSON integer is a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AffineExpr {
    Const(i64),
    Affine {
        #[serde(rename = "const", default)]
        constant: i64,
        #[serde(default)]
        terms: Vec<(i64, String)>,
    },
}

impl AffineExpr {
    pub fn as_const(&self) -> Option<i64> {
        match self {
            AffineExpr::Const(c) => Some(*c),
            AffineExpr::Affine { constant, terms } if terms.is_empty() => Some(*constant),
            _ => None,
        }
    }

    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<i64>) -> Option<i64> {
        match self {
            AffineExpr::Const(c) => Some(*c),
            AffineExpr::Affine { constant, terms } => {
                let mut v = *constant;
                for (k, name) in terms {
                    v = v.checked_add(k.checked_mul(lookup(name)?)?)?;
                }
                Some(v)
            }
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &String> {
        let terms: &[(i64, String)] = match self {
            AffineExpr::Const(_) => &[],
            AffineExpr::Affine { terms, .. } => terms,
        };
        terms.iter().map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(with = "serde_prob")]
    pub weight: Prob,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub update: BTreeMap<String, AffineExpr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resets: Vec<String>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub source: String,
    #[serde(default, skip_serializing_if = "Assertion::is_true")]
    pub guard: Assertion,
    #[serde(default, skip_serializing_if = "Zone::is_universal")]
    pub enabling: Zone,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

/// A probabilistic timed program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ptp {
    pub locations: Vec<String>,
    pub initial: String,
    #[serde(default)]
    pub clocks: Vec<String>,
    /// Location name to invariant; absent means universal.
    #[serde(default)]
    pub invariant: BTreeMap<String, Zone>,
    #[serde(default)]
    pub variables: Vec<VarDecl>,
    /// Initial valuation; unlisted variables start at their lower bound.
    #[serde(default)]
    pub init: BTreeMap<String, i64>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    /// Label to the set of locations carrying it.
    #[serde(default)]
    pub labels: BTreeMap<String, BTreeSet<String>>,
    /// Name under which location indices may appear in propositions, as in
    /// PRISM models that encode the location in a variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_variable: Option<String>,
}

#[derive(Debug, Error)]
pub enum PtpError {
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

impl Ptp {
    pub fn from_json(text: &str) -> Result<Ptp, PtpError> {
        serde_json::from_str(text).map_err(|e| PtpError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l == name)
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn clock_index(&self, name: &str) -> Option<usize> {
        self.clocks.iter().position(|c| c == name)
    }

    pub fn invariant_of(&self, location: &str) -> Option<&Zone> {
        self.invariant.get(location)
    }

    pub fn initial_valuation(&self) -> Vec<i64> {
        self.variables.iter().map(|v| self.init.get(&v.name).copied().unwrap_or(v.lo)).collect()
    }
}

/// Dense-time state: location, variable valuation and rational clock values.
#[derive(Debug, Clone, PartialEq)]
pub struct PtpState {
    pub location: String,
    pub variables: BTreeMap<String, i64>,
    pub clocks: BTreeMap<String, num_rational::Rational64>,
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    #[test]
    fn assertion_json_shape() {
        let a: Assertion = serde_json::from_str(
            r#"{"kind":"and","args":[{"kind":"cmp","var":"s","op":"=","rhs":4},{"kind":"not","arg":{"kind":"cmp","var":"n","op":"<","rhs":"m"}}]}"#,
        )
        .unwrap();
        let env = |v: &str| match v {
            "s" => Some(4),
            "n" => Some(2),
            "m" => Some(1),
            _ => None,
        };
        assert_eq!(a.eval(&env), Some(true));
        let mut vars = Vec::new();
        a.variables(&mut vars);
        assert_eq!(vars, vec!["s", "n", "m"]);
    }

    #[test]
    fn affine_updates() {
        let e: AffineExpr = serde_json::from_str(r#"{"const":1,"terms":[[2,"n"]]}"#).unwrap();
        assert_eq!(e.eval(&|_| Some(3)), Some(7));
        assert_eq!(e.as_const(), None);
        let c: AffineExpr = serde_json::from_str("5").unwrap();
        assert_eq!(c.as_const(), Some(5));
    }

    #[test]
    fn model_json_round_trip() {
        let text = r#"{
            "locations": ["a", "b"],
            "initial": "a",
            "clocks": ["x"],
            "invariant": {"a": [{"left": "x", "rel": "<=", "bound": 2}]},
            "variables": [{"name": "n", "lo": 0, "hi": 3}],
            "transitions": [{
                "source": "a",
                "enabling": [{"left": "x", "rel": ">", "bound": 1}],
                "outcomes": [
                    {"weight": 0.5, "target": "b", "resets": ["x"], "update": {"n": 1}},
                    {"weight": "1/2", "target": "a"}
                ]
            }],
            "labels": {"done": ["b"]}
        }"#;
        let m = Ptp::from_json(text).unwrap();
        assert_eq!(m.transitions[0].outcomes[1].weight, Prob::new(1, 2));
        assert_eq!(Ptp::from_json(&m.to_json()).unwrap(), m);
        assert!(validate_ptp(&m).is_empty());
    }
}
