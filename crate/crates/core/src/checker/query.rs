//! `Pmax=?[F<=T prop]` / `Pmin=?[F prop]` reachability queries.

use super::CheckError;
use crate::lex::{tokenize, Cursor, Tok};
use crate::ptp::{CmpOp, Operand};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opt {
    Max,
    Min,
}

/// Clock-free proposition over variables and location labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateProp {
    True,
    Label(String),
    Cmp { var: String, op: CmpOp, rhs: Operand },
    And(Vec<StateProp>),
    Or(Vec<StateProp>),
    Not(Box<StateProp>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PctlQuery {
    pub opt: Opt,
    /// Deadline in model time units.
    pub bound: Option<u64>,
    pub prop: StateProp,
}

impl fmt::Display for StateProp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateProp::True => f.write_str("true"),
            StateProp::Label(l) => write!(f, "\"{l}\""),
            StateProp::Cmp { var, op, rhs } => {
                write!(f, "{var}{}", op.symbol())?;
                match rhs {
                    Operand::Const(c) => write!(f, "{c}"),
                    Operand::Var(v) => f.write_str(v),
                }
            }
            StateProp::And(args) | StateProp::Or(args) => {
                let sep = if matches!(self, StateProp::And(_)) { " & " } else { " | " };
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            StateProp::Not(a) => write!(f, "!{a}"),
        }
    }
}

impl fmt::Display for PctlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = match self.opt {
            Opt::Max => "Pmax",
            Opt::Min => "Pmin",
        };
        match self.bound {
            Some(t) => write!(f, "{opt}=?[F<={t} {}]", self.prop),
            None => write!(f, "{opt}=?[F {}]", self.prop),
        }
    }
}

fn err(c: &Cursor, message: impl Into<String>) -> CheckError {
    let p = c.pos();
    CheckError::Query { line: p.line, column: p.column, message: message.into() }
}

pub fn parse_query(text: &str) -> Result<PctlQuery, CheckError> {
    let toks = tokenize(text).map_err(|e| CheckError::Query {
        line: e.pos.line,
        column: e.pos.column,
        message: e.message,
    })?;
    let mut c = Cursor::new(toks, text);
    let opt = match c.next() {
        Some(Tok::Ident(w)) if w == "Pmax" => Opt::Max,
        Some(Tok::Ident(w)) if w == "Pmin" => Opt::Min,
        _ => return Err(err(&c, "query must start with Pmax or Pmin")),
    };
    if !c.eat_sym("=?") {
        return Err(err(&c, format!("expected `=?`, found {}", c.describe_next())));
    }
    if !c.eat_sym("[") {
        return Err(err(&c, format!("expected `[`, found {}", c.describe_next())));
    }
    if !c.eat_ident("F") {
        return Err(err(&c, "only F and F<=T supported"));
    }
    let bound = if c.eat_sym("<=") {
        match c.next() {
            Some(Tok::Int(t)) if t >= 0 => Some(t as u64),
            _ => return Err(err(&c, "malformed time bound: expected a nonnegative integer")),
        }
    } else {
        None
    };
    let prop = parse_or(&mut c)?;
    if !c.eat_sym("]") {
        return Err(err(&c, format!("expected `]`, found {}", c.describe_next())));
    }
    if !c.at_end() {
        return Err(err(&c, format!("unexpected {} after query", c.describe_next())));
    }
    Ok(PctlQuery { opt, bound, prop })
}

fn parse_or(c: &mut Cursor) -> Result<StateProp, CheckError> {
    let mut args = vec![parse_and(c)?];
    while c.eat_sym("|") {
        args.push(parse_and(c)?);
    }
    Ok(if args.len() == 1 { args.pop().expect("one") } else { StateProp::Or(args) })
}

fn parse_and(c: &mut Cursor) -> Result<StateProp, CheckError> {
    let mut args = vec![parse_unary(c)?];
    while c.eat_sym("&") {
        args.push(parse_unary(c)?);
    }
    Ok(if args.len() == 1 { args.pop().expect("one") } else { StateProp::And(args) })
}

fn parse_unary(c: &mut Cursor) -> Result<StateProp, CheckError> {
    if c.eat_sym("!") {
        return Ok(StateProp::Not(Box::new(parse_unary(c)?)));
    }
    if c.eat_sym("(") {
        let p = parse_or(c)?;
        if !c.eat_sym(")") {
            return Err(err(c, format!("expected `)`, found {}", c.describe_next())));
        }
        return Ok(p);
    }
    match c.next() {
        Some(Tok::Str(l)) => Ok(StateProp::Label(l)),
        Some(Tok::Ident(w)) if w == "true" => Ok(StateProp::True),
        Some(Tok::Ident(w)) if w == "G" || w == "U" || w == "X" || w == "F" || w == "P" => {
            Err(err(c, "only F and F<=T supported"))
        }
        Some(Tok::Ident(var)) => {
            let op = match c.next() {
                Some(Tok::Sym("=")) => CmpOp::Eq,
                Some(Tok::Sym("!=")) => CmpOp::Ne,
                Some(Tok::Sym("<")) => CmpOp::Lt,
                Some(Tok::Sym("<=")) => CmpOp::Le,
                Some(Tok::Sym(">")) => CmpOp::Gt,
                Some(Tok::Sym(">=")) => CmpOp::Ge,
                _ => return Err(err(c, format!("expected a comparison after `{var}`"))),
            };
            let negative = c.eat_sym("-");
            let rhs = match c.next() {
                Some(Tok::Int(v)) => Operand::Const(if negative { -v } else { v }),
                Some(Tok::Ident(v)) if !negative => Operand::Var(v),
                _ => return Err(err(c, "expected an integer or variable")),
            };
            Ok(StateProp::Cmp { var, op, rhs })
        }
        _ => Err(err(c, "expected a label, comparison or parenthesized proposition")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_label_query() {
        let q = parse_query(r#"Pmax=?[F<=35 "Success"]"#).unwrap();
        assert_eq!(q, PctlQuery { opt: Opt::Max, bound: Some(35), prop: StateProp::Label("Success".into()) });
        assert_eq!(q.to_string(), r#"Pmax=?[F<=35 "Success"]"#);
    }

    #[test]
    fn unbounded_comparison_query() {
        let q = parse_query("Pmin=?[F s=5]").unwrap();
        assert_eq!(q.opt, Opt::Min);
        assert_eq!(q.bound, None);
        assert_eq!(q.prop, StateProp::Cmp { var: "s".into(), op: CmpOp::Eq, rhs: Operand::Const(5) });
    }

    #[test]
    fn rejects_other_operators() {
        assert!(parse_query(r#"P=?[G "ok"]"#).is_err());
        let e = parse_query(r#"Pmax=?[G "ok"]"#).unwrap_err();
        assert!(e.to_string().contains("only F and F<=T supported"));
        let e = parse_query(r#"Pmax=?[F "a" U "b"]"#).unwrap_err();
        assert!(e.to_string().contains("]"), "{e}");
        assert!(parse_query(r#"Pmax=?[F<=x "a"]"#).unwrap_err().to_string().contains("bound"));
        assert!(parse_query(r#"Pmax=?[F<=-1 "a"]"#).is_err());
    }

    #[test]
    fn compound_propositions() {
        let q = parse_query(r#"Pmax=?[F ("done" | n>=2) & !(m=1)]"#).unwrap();
        assert!(matches!(q.prop, StateProp::And(ref a) if a.len() == 2));
    }
}
