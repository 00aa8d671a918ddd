//! Reading and writing the `pta` subset of the PRISM modelling language.
//!
//! Exported models encode the location in an integer variable `s` whose
//! value is the location index. On import the first integer variable plays
//! that role; every value in its range becomes a location `s<k>`.

use crate::lex::{tokenize, Cursor, Pos, Tok};
use crate::ptp::{
    validate_ptp, AffineExpr, Assertion, ClockConstraint, CmpOp, Operand, Outcome, Ptp, PtpDiagnostic, Rel,
    Transition, VarDecl, Zone,
};
use crate::ratio::{self, Prob};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

pub const LOCATION_VAR: &str = "s";

#[derive(Debug, Error)]
pub enum PrismError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported construct at line {line}, column {column}: {message}")]
    Unsupported { line: usize, column: usize, message: String },
    #[error("only pta supported (found `{0}`)")]
    NotPta(String),
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<PtpDiagnostic>),
    #[error("cannot export: {0}")]
    Export(String),
}

// ---------------------------------------------------------------------------
// export

fn rel_symbol(r: Rel) -> &'static str {
    r.symbol()
}

fn render_constraint(c: &ClockConstraint) -> String {
    match &c.right {
        Some(r) => format!("{}-{}{}{}", c.left, r, rel_symbol(c.rel), c.bound),
        None => format!("{}{}{}", c.left, rel_symbol(c.rel), c.bound),
    }
}

fn render_operand(o: &Operand) -> String {
    match o {
        Operand::Const(c) => c.to_string(),
        Operand::Var(v) => v.clone(),
    }
}

/// Renders an assertion; `nested` requests parentheses around disjunctions.
fn render_assertion(a: &Assertion, nested: bool) -> String {
    match a {
        Assertion::True => "true".into(),
        Assertion::Cmp { var, op, rhs } => format!("{var}{}{}", op.symbol(), render_operand(rhs)),
        Assertion::And { args } => {
            args.iter().map(|x| render_assertion(x, true)).collect::<Vec<_>>().join(" & ")
        }
        Assertion::Or { args } => {
            let s = args.iter().map(|x| render_assertion(x, true)).collect::<Vec<_>>().join(" | ");
            if nested {
                format!("({s})")
            } else {
                s
            }
        }
        Assertion::Not { arg } => format!("!({})", render_assertion(arg, false)),
    }
}

fn conjuncts(a: &Assertion, out: &mut Vec<String>) {
    match a {
        Assertion::True => {}
        Assertion::And { args } => args.iter().for_each(|x| conjuncts(x, out)),
        other => out.push(render_assertion(other, true)),
    }
}

/// Renders `m` as a PRISM `pta` model. Output is deterministic: commands are
/// ordered by source location, then by transition index.
pub fn export_prism(m: &Ptp) -> Result<String, PrismError> {
    let reserved = |n: &str| n == LOCATION_VAR;
    if let Some(c) = m.clocks.iter().find(|c| reserved(c)) {
        return Err(PrismError::Export(format!("clock {c:?} clashes with the location variable")));
    }
    if let Some(v) = m.variables.iter().find(|v| reserved(&v.name)) {
        return Err(PrismError::Export(format!("variable {:?} clashes with the location variable", v.name)));
    }
    let loc = |name: &str| {
        m.location_index(name).ok_or_else(|| PrismError::Export(format!("unknown location {name:?}")))
    };
    let mut out = String::from("pta\nmodule M\n");
    let n = m.locations.len();
    if n == 0 {
        return Err(PrismError::Export("model has no locations".into()));
    }
    let init = loc(&m.initial)?;
    match init {
        0 => writeln!(out, "  {LOCATION_VAR} : [0..{}];", n - 1),
        i => writeln!(out, "  {LOCATION_VAR} : [0..{}] init {i};", n - 1),
    }
    .expect("write to string");
    for v in &m.variables {
        let start = m.init.get(&v.name).copied().unwrap_or(v.lo);
        if start == v.lo {
            writeln!(out, "  {} : [{}..{}];", v.name, v.lo, v.hi).expect("write to string");
        } else {
            writeln!(out, "  {} : [{}..{}] init {start};", v.name, v.lo, v.hi).expect("write to string");
        }
    }
    for c in &m.clocks {
        writeln!(out, "  {c} : clock;").expect("write to string");
    }

    let mut order: Vec<(usize, &Transition)> =
        m.transitions.iter().map(|t| Ok((loc(&t.source)?, t))).collect::<Result<_, PrismError>>()?;
    order.sort_by_key(|(l, _)| *l);
    for (src, t) in order {
        let mut parts = vec![format!("{LOCATION_VAR}={src}")];
        conjuncts(&t.guard, &mut parts);
        parts.extend(t.enabling.constraints.iter().map(render_constraint));
        let mut branches = Vec::new();
        for o in &t.outcomes {
            let mut assigns = vec![format!("({LOCATION_VAR}'={})", loc(&o.target)?)];
            for (v, e) in &o.update {
                let c = e.as_const().ok_or_else(|| {
                    PrismError::Export(format!("update of {v:?} is not a constant"))
                })?;
                assigns.push(format!("({v}'={c})"));
            }
            assigns.extend(o.resets.iter().map(|c| format!("({c}'=0)")));
            let body = assigns.join("&");
            if t.outcomes.len() == 1 && o.weight == ratio::one() {
                branches.push(body);
            } else {
                branches.push(format!("{}:{body}", ratio::format_prob(&o.weight)));
            }
        }
        writeln!(out, "  [] {} -> {};", parts.join(" & "), branches.join(" + ")).expect("write to string");
    }

    let invariants: Vec<String> = m
        .locations
        .iter()
        .enumerate()
        .filter_map(|(k, name)| {
            let z = m.invariant.get(name).filter(|z| !z.is_universal())?;
            let body = z.constraints.iter().map(render_constraint).collect::<Vec<_>>().join(" & ");
            Some(format!("({LOCATION_VAR}={k} => {body})"))
        })
        .collect();
    if !invariants.is_empty() {
        writeln!(out, "  invariant\n    {}\n  endinvariant", invariants.join(" &\n    ")).expect("write to string");
    }
    out.push_str("endmodule\n");

    for (label, locs) in &m.labels {
        let mut idx = locs.iter().map(|l| loc(l)).collect::<Result<Vec<_>, _>>()?;
        idx.sort_unstable();
        let expr = if idx.is_empty() {
            "false".to_string()
        } else {
            idx.iter().map(|k| format!("{LOCATION_VAR}={k}")).collect::<Vec<_>>().join(" | ")
        };
        writeln!(out, "label \"{label}\" = {expr};").expect("write to string");
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// import

#[derive(Debug, Clone)]
enum Term {
    Name(String),
    Diff(String, String),
    Int(i64),
}

#[derive(Debug, Clone)]
enum Expr {
    Bool(bool),
    Cmp(Term, CmpOp, Term, Pos),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    Implies(Box<Expr>, Box<Expr>, Pos),
}

struct Parser {
    c: Cursor,
}

fn syntax(pos: Pos, message: impl Into<String>) -> PrismError {
    PrismError::Syntax { line: pos.line, column: pos.column, message: message.into() }
}

fn unsupported(pos: Pos, message: impl Into<String>) -> PrismError {
    PrismError::Unsupported { line: pos.line, column: pos.column, message: message.into() }
}

const UNSUPPORTED_WORDS: &[&str] = &[
    "const", "formula", "rewards", "endrewards", "init", "endinit", "global", "system", "endsystem",
    "player", "module",
];

impl Parser {
    fn expect_sym(&mut self, sym: &str) -> Result<(), PrismError> {
        if self.c.eat_sym(sym) {
            Ok(())
        } else {
            Err(syntax(self.c.pos(), format!("expected `{sym}`, found {}", self.c.describe_next())))
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), PrismError> {
        if self.c.eat_ident(word) {
            Ok(())
        } else {
            Err(syntax(self.c.pos(), format!("expected `{word}`, found {}", self.c.describe_next())))
        }
    }

    fn ident(&mut self) -> Result<String, PrismError> {
        let pos = self.c.pos();
        match self.c.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => Err(syntax(pos, "expected an identifier")),
        }
    }

    fn int(&mut self) -> Result<i64, PrismError> {
        let pos = self.c.pos();
        let neg = self.c.eat_sym("-");
        match self.c.next() {
            Some(Tok::Int(i)) => Ok(if neg { -i } else { i }),
            _ => Err(syntax(pos, "expected an integer")),
        }
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.c.peek() {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, PrismError> {
        let lhs = self.disjunction()?;
        let pos = self.c.pos();
        if self.c.eat_sym("=>") {
            let rhs = self.disjunction()?;
            return Ok(Expr::Implies(Box::new(lhs), Box::new(rhs), pos));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Expr, PrismError> {
        let mut args = vec![self.conjunction()?];
        while self.c.eat_sym("|") {
            args.push(self.conjunction()?);
        }
        Ok(if args.len() == 1 { args.pop().expect("one") } else { Expr::Or(args) })
    }

    fn conjunction(&mut self) -> Result<Expr, PrismError> {
        let mut args = vec![self.unary()?];
        while self.c.eat_sym("&") {
            args.push(self.unary()?);
        }
        Ok(if args.len() == 1 { args.pop().expect("one") } else { Expr::And(args) })
    }

    fn unary(&mut self) -> Result<Expr, PrismError> {
        if self.c.eat_sym("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.c.eat_sym("(") {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.c.eat_ident("true") {
            return Ok(Expr::Bool(true));
        }
        if self.c.eat_ident("false") {
            return Ok(Expr::Bool(false));
        }
        let pos = self.c.pos();
        let left = self.term()?;
        let op_pos = self.c.pos();
        let op = match self.c.next() {
            Some(Tok::Sym("=")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            _ => return Err(syntax(op_pos, "expected a comparison operator")),
        };
        let right = self.term()?;
        Ok(Expr::Cmp(left, op, right, pos))
    }

    fn term(&mut self) -> Result<Term, PrismError> {
        match self.c.peek() {
            Some(Tok::Ident(_)) => {
                let a = self.ident()?;
                if matches!(self.c.peek(), Some(Tok::Sym("-"))) {
                    self.c.next();
                    let b = self.ident()?;
                    return Ok(Term::Diff(a, b));
                }
                Ok(Term::Name(a))
            }
            Some(Tok::Int(_)) | Some(Tok::Sym("-")) => Ok(Term::Int(self.int()?)),
            _ => Err(syntax(self.c.pos(), format!("expected a name or integer, found {}", self.c.describe_next()))),
        }
    }

    fn weight(&mut self) -> Result<Option<Prob>, PrismError> {
        let pos = self.c.pos();
        let text = match self.c.peek() {
            Some(Tok::Decimal(d)) => d.clone(),
            Some(Tok::Int(i)) => i.to_string(),
            _ => return Ok(None),
        };
        self.c.next();
        let text = if self.c.eat_sym("/") { format!("{text}/{}", self.int()?) } else { text };
        self.expect_sym(":")?;
        ratio::parse_prob(&text).map(Some).ok_or_else(|| syntax(pos, format!("bad probability {text}")))
    }
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        other => other,
    }
}

struct Names {
    loc_var: String,
    loc_lo: i64,
    loc_hi: i64,
    clocks: BTreeSet<String>,
    vars: BTreeSet<String>,
}

impl Names {
    fn is_clock_term(&self, t: &Term) -> bool {
        match t {
            Term::Name(n) => self.clocks.contains(n),
            Term::Diff(a, b) => self.clocks.contains(a) && self.clocks.contains(b),
            Term::Int(_) => false,
        }
    }

    fn clock_constraint(&self, l: &Term, op: CmpOp, r: &Term, pos: Pos) -> Result<ClockConstraint, PrismError> {
        let (t, op, bound) = match (l, r) {
            (t, Term::Int(b)) => (t, op, *b),
            (Term::Int(b), t) => (t, flip(op), *b),
            _ => return Err(unsupported(pos, "clocks may only be compared with integer constants")),
        };
        let rel = match op {
            CmpOp::Lt => Rel::Lt,
            CmpOp::Le => Rel::Le,
            CmpOp::Gt => Rel::Gt,
            CmpOp::Ge => Rel::Ge,
            _ => return Err(unsupported(pos, "clock constraints must use <, <=, > or >=")),
        };
        match t {
            Term::Name(c) => Ok(ClockConstraint::simple(c, rel, bound)),
            Term::Diff(a, b) => Ok(ClockConstraint::diff(a, b, rel, bound)),
            Term::Int(_) => Err(unsupported(pos, "comparison of two constants")),
        }
    }

    fn check_name(&self, n: &str, pos: Pos) -> Result<(), PrismError> {
        if self.clocks.contains(n) {
            Err(unsupported(pos, format!("clock {n} inside a variable expression")))
        } else if !self.vars.contains(n) && n != self.loc_var {
            Err(syntax(pos, format!("undeclared name {n}")))
        } else {
            Ok(())
        }
    }

    fn assertion(&self, e: &Expr) -> Result<Assertion, PrismError> {
        Ok(match e {
            Expr::Bool(true) => Assertion::True,
            Expr::Bool(false) => Assertion::Not { arg: Box::new(Assertion::True) },
            Expr::Cmp(l, op, r, pos) => {
                let (var, op, rhs) = match (l, r) {
                    (Term::Name(v), Term::Int(c)) => (v, *op, Operand::Const(*c)),
                    (Term::Int(c), Term::Name(v)) => (v, flip(*op), Operand::Const(*c)),
                    (Term::Name(v), Term::Name(w)) => {
                        self.check_name(w, *pos)?;
                        (v, *op, Operand::Var(w.clone()))
                    }
                    _ => return Err(unsupported(*pos, "unsupported comparison")),
                };
                self.check_name(var, *pos)?;
                if var == &self.loc_var || matches!(&rhs, Operand::Var(w) if w == &self.loc_var) {
                    return Err(unsupported(*pos, "location variable inside a nested expression"));
                }
                Assertion::Cmp { var: var.clone(), op, rhs }
            }
            Expr::And(a) => Assertion::And { args: a.iter().map(|x| self.assertion(x)).collect::<Result<_, _>>()? },
            Expr::Or(a) => Assertion::Or { args: a.iter().map(|x| self.assertion(x)).collect::<Result<_, _>>()? },
            Expr::Not(a) => Assertion::Not { arg: Box::new(self.assertion(a)?) },
            Expr::Implies(_, _, pos) => return Err(unsupported(*pos, "`=>` outside the invariant block")),
        })
    }

    /// Location value fixed by `s=k`, if `e` is that comparison.
    fn location_atom(&self, e: &Expr) -> Option<i64> {
        match e {
            Expr::Cmp(Term::Name(v), CmpOp::Eq, Term::Int(k), _)
            | Expr::Cmp(Term::Int(k), CmpOp::Eq, Term::Name(v), _)
                if v == &self.loc_var =>
            {
                Some(*k)
            }
            _ => None,
        }
    }

    fn location_name(&self, k: i64, pos: Pos) -> Result<String, PrismError> {
        if k < self.loc_lo || k > self.loc_hi {
            return Err(syntax(pos, format!("{}={k} is outside its range", self.loc_var)));
        }
        Ok(format!("{}{k}", self.loc_var))
    }

    /// Evaluates a label expression at location value `s`.
    fn eval_label(&self, e: &Expr, s: i64) -> Result<bool, PrismError> {
        let value = |t: &Term, pos: Pos| match t {
            Term::Int(i) => Ok(*i),
            Term::Name(n) if n == &self.loc_var => Ok(s),
            _ => Err(unsupported(pos, format!("labels may only test {}", self.loc_var))),
        };
        Ok(match e {
            Expr::Bool(b) => *b,
            Expr::Cmp(l, op, r, pos) => op.eval(value(l, *pos)?, value(r, *pos)?),
            Expr::And(a) => {
                let mut all = true;
                for x in a {
                    all &= self.eval_label(x, s)?;
                }
                all
            }
            Expr::Or(a) => {
                let mut any = false;
                for x in a {
                    any |= self.eval_label(x, s)?;
                }
                any
            }
            Expr::Not(a) => !self.eval_label(a, s)?,
            Expr::Implies(a, b, _) => !self.eval_label(a, s)? || self.eval_label(b, s)?,
        })
    }
}

fn flatten_and(e: Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::And(a) => a.into_iter().for_each(|x| flatten_and(x, out)),
        Expr::Bool(true) => {}
        other => out.push(other),
    }
}

/// Parses a PRISM `pta` model in the supported subset and validates it.
pub fn parse_prism(text: &str) -> Result<Ptp, PrismError> {
    let toks = tokenize(text).map_err(|e| syntax(e.pos, e.message))?;
    let mut p = Parser { c: Cursor::new(toks, text) };

    let pos = p.c.pos();
    match p.c.next() {
        Some(Tok::Ident(w)) if w == "pta" => {}
        Some(Tok::Ident(w)) if ["mdp", "dtmc", "ctmc", "smg", "pomdp", "popta", "nondeterministic", "probabilistic", "stochastic"].contains(&w.as_str()) => {
            return Err(PrismError::NotPta(w))
        }
        _ => return Err(syntax(pos, "expected model type `pta`")),
    }
    p.expect_word("module")?;
    p.ident()?;

    let mut loc: Option<(String, i64, i64, i64)> = None;
    let mut variables = Vec::new();
    let mut init = BTreeMap::new();
    let mut clocks = Vec::new();
    while let Some(name) = p.peek_ident().map(str::to_string) {
        if !matches!(p.c.peek_at(1), Some(Tok::Sym(":"))) {
            break;
        }
        let pos = p.c.pos();
        p.c.next();
        p.c.next();
        if p.c.eat_ident("clock") {
            clocks.push(name);
        } else if p.c.eat_sym("[") {
            let lo = p.int()?;
            p.expect_sym("..")?;
            let hi = p.int()?;
            p.expect_sym("]")?;
            let start = if p.c.eat_ident("init") { p.int()? } else { lo };
            if loc.is_none() {
                loc = Some((name, lo, hi, start));
            } else {
                if start != lo {
                    init.insert(name.clone(), start);
                }
                variables.push(VarDecl { name, lo, hi });
            }
        } else {
            return Err(unsupported(pos, format!("declaration of {name} (only integer ranges and clocks)")));
        }
        p.expect_sym(";")?;
    }
    let Some((loc_var, loc_lo, loc_hi, loc_init)) = loc else {
        return Err(syntax(p.c.pos(), "no integer variable to encode locations"));
    };
    if loc_hi < loc_lo {
        return Err(syntax(p.c.pos(), format!("{loc_var} has an empty range")));
    }
    let names = Names {
        loc_var: loc_var.clone(),
        loc_lo,
        loc_hi,
        clocks: clocks.iter().cloned().collect(),
        vars: variables.iter().map(|v| v.name.clone()).collect(),
    };

    let mut transitions = Vec::new();
    while p.c.eat_sym("[") {
        if !p.c.eat_sym("]") {
            return Err(unsupported(p.c.pos(), "synchronisation labels"));
        }
        let guard_pos = p.c.pos();
        let mut parts = Vec::new();
        flatten_and(p.expr()?, &mut parts);
        p.expect_sym("->")?;
        let mut source = None;
        let mut guard = Vec::new();
        let mut enabling = Vec::new();
        for e in parts {
            if let Some(k) = names.location_atom(&e) {
                if source.is_some() {
                    return Err(unsupported(guard_pos, format!("guard fixes {loc_var} twice")));
                }
                source = Some(names.location_name(k, guard_pos)?);
            } else if let Expr::Cmp(l, op, r, pos) = &e {
                if names.is_clock_term(l) || names.is_clock_term(r) {
                    enabling.push(names.clock_constraint(l, *op, r, *pos)?);
                } else {
                    guard.push(names.assertion(&e)?);
                }
            } else {
                guard.push(names.assertion(&e)?);
            }
        }
        let source = source
            .ok_or_else(|| unsupported(guard_pos, format!("command guard must contain {loc_var}=k")))?;

        let mut outcomes = Vec::new();
        loop {
            let weight = p.weight()?.unwrap_or_else(ratio::one);
            let mut target = source.clone();
            let mut update = BTreeMap::new();
            let mut resets = Vec::new();
            loop {
                p.expect_sym("(")?;
                let pos = p.c.pos();
                let name = p.ident()?;
                p.expect_sym("'")?;
                p.expect_sym("=")?;
                let value = p.int()?;
                p.expect_sym(")")?;
                if name == loc_var {
                    target = names.location_name(value, pos)?;
                } else if names.clocks.contains(&name) {
                    if value != 0 {
                        return Err(unsupported(pos, format!("clock {name} may only be reset to 0")));
                    }
                    resets.push(name);
                } else if names.vars.contains(&name) {
                    update.insert(name, AffineExpr::Const(value));
                } else {
                    return Err(syntax(pos, format!("undeclared name {name}")));
                }
                if !p.c.eat_sym("&") {
                    break;
                }
            }
            outcomes.push(Outcome { weight, update, resets, target });
            if !p.c.eat_sym("+") {
                break;
            }
        }
        p.expect_sym(";")?;
        let guard = match guard.len() {
            0 => Assertion::True,
            1 => guard.pop().expect("one"),
            _ => Assertion::And { args: guard },
        };
        transitions.push(Transition { source, guard, enabling: Zone::new(enabling), outcomes });
    }

    let mut invariant: BTreeMap<String, Zone> = BTreeMap::new();
    if p.c.eat_ident("invariant") {
        let mut items = Vec::new();
        flatten_and(p.expr()?, &mut items);
        for item in items {
            let Expr::Implies(cond, body, pos) = item else {
                return Err(unsupported(p.c.pos(), format!("invariant items must have the form ({loc_var}=k => zone)")));
            };
            let k = names
                .location_atom(&cond)
                .ok_or_else(|| unsupported(pos, format!("invariant condition must be {loc_var}=k")))?;
            let mut cs = Vec::new();
            flatten_and(*body, &mut cs);
            let mut zone = Vec::new();
            for c in cs {
                match &c {
                    Expr::Cmp(l, op, r, cpos) if names.is_clock_term(l) || names.is_clock_term(r) => {
                        zone.push(names.clock_constraint(l, *op, r, *cpos)?)
                    }
                    _ => return Err(unsupported(pos, "invariants may only constrain clocks")),
                }
            }
            invariant.entry(names.location_name(k, pos)?).or_default().constraints.extend(zone);
        }
        p.expect_word("endinvariant")?;
    }
    let pos = p.c.pos();
    if !p.c.eat_ident("endmodule") {
        return match p.peek_ident() {
            Some(w) if UNSUPPORTED_WORDS.contains(&w) => Err(unsupported(pos, format!("`{w}`"))),
            _ => Err(syntax(pos, format!("expected `endmodule`, found {}", p.c.describe_next()))),
        };
    }

    let mut labels = BTreeMap::new();
    while !p.c.at_end() {
        let pos = p.c.pos();
        if !p.c.eat_ident("label") {
            return match p.peek_ident() {
                Some(w) if UNSUPPORTED_WORDS.contains(&w) => Err(unsupported(pos, format!("`{w}`"))),
                _ => Err(syntax(pos, format!("expected `label`, found {}", p.c.describe_next()))),
            };
        }
        let name = match p.c.next() {
            Some(Tok::Str(s)) => s,
            _ => return Err(syntax(pos, "expected a label name in quotes")),
        };
        p.expect_sym("=")?;
        let e = p.expr()?;
        p.expect_sym(";")?;
        let mut set = BTreeSet::new();
        for k in loc_lo..=loc_hi {
            if names.eval_label(&e, k)? {
                set.insert(format!("{loc_var}{k}"));
            }
        }
        labels.insert(name, set);
    }

    let m = Ptp {
        locations: (loc_lo..=loc_hi).map(|k| format!("{loc_var}{k}")).collect(),
        initial: names.location_name(loc_init, Pos { line: 1, column: 1 })?,
        clocks,
        invariant,
        variables,
        init,
        transitions,
        labels,
        location_variable: Some(loc_var),
    };
    let diags: Vec<_> = validate_ptp(&m)
        .into_iter()
        .filter(|d| !matches!(d, PtpDiagnostic::OutcomeAlwaysDisabled { .. }))
        .collect();
    if !diags.is_empty() {
        return Err(PrismError::Invalid(diags));
    }
    Ok(m)
}
