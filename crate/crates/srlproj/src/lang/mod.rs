//! Parsers, ASTs and static fragment checkers for the three
//! mini-languages (`.rbn`, `.mln`, `.plp`).

mod parser;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::worlds::Signature;

pub use parser::parse_model;
pub(crate) use parser::derived_topo_order;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Rbn,
    Mln,
    Problog,
}

impl Dialect {
    pub fn from_extension(path: &str) -> Option<Dialect> {
        match path.rsplit('.').next() {
            Some("rbn") => Some(Dialect::Rbn),
            Some("mln") => Some(Dialect::Mln),
            Some("plp") => Some(Dialect::Problog),
            _ => None,
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dialect::Rbn => write!(f, "rbn"),
            Dialect::Mln => write!(f, "mln"),
            Dialect::Problog => write!(f, "problog"),
        }
    }
}

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

/// An atom pattern over first-order variables, e.g. `edge(X,Y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternAtom {
    pub relation: String,
    pub args: Vec<String>,
    pub loc: Loc,
}

impl PatternAtom {
    pub fn variables(&self) -> BTreeSet<&str> {
        self.args.iter().map(String::as_str).collect()
    }
}

impl fmt::Display for PatternAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.relation)
        } else {
            write!(f, "{}({})", self.relation, self.args.join(","))
        }
    }
}

/// A possibly negated atom pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternLiteral {
    pub atom: PatternAtom,
    pub negated: bool,
}

impl fmt::Display for PatternLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "!{}", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

fn display_conj(lits: &[PatternLiteral]) -> String {
    lits.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" & ")
}

// ---------------------------------------------------------------- RBN

#[derive(Debug, Clone, PartialEq)]
pub enum ProbFormula {
    Const(f64),
    Param(String),
    IfElse {
        cond: Vec<PatternLiteral>,
        then: Box<ProbFormula>,
        els: Box<ProbFormula>,
    },
    /// `noisy-or{ if <cond> : <pf> | Var }`; the else branch of the
    /// guarded formula defaults to 0.
    NoisyOr {
        cond: Vec<PatternLiteral>,
        prob: Box<ProbFormula>,
        var: String,
        loc: Loc,
    },
}

impl fmt::Display for ProbFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbFormula::Const(c) => write!(f, "{c}"),
            ProbFormula::Param(p) => write!(f, "${p}"),
            ProbFormula::IfElse { cond, then, els } => {
                write!(f, "if {} : {} else : {}", display_conj(cond), then, els)
            }
            ProbFormula::NoisyOr { cond, prob, var, .. } => {
                write!(f, "noisy-or{{ if {} : {} | {} }}", display_conj(cond), prob, var)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbnFormula {
    pub head: PatternAtom,
    pub body: ProbFormula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbnSpec {
    pub formulas: Vec<RbnFormula>,
}

impl fmt::Display for RbnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fo in &self.formulas {
            writeln!(f, "{} <- {};", fo.head, fo.body)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- MLN

#[derive(Debug, Clone, PartialEq)]
pub enum MlnFormula {
    Atom(PatternAtom),
    Not(Box<MlnFormula>),
    And(Box<MlnFormula>, Box<MlnFormula>),
    Or(Box<MlnFormula>, Box<MlnFormula>),
}

impl MlnFormula {
    pub fn atoms(&self) -> Vec<&PatternAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a PatternAtom>) {
        match self {
            MlnFormula::Atom(a) => out.push(a),
            MlnFormula::Not(x) => x.collect_atoms(out),
            MlnFormula::And(a, b) | MlnFormula::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Variables in first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        let mut vars = Vec::new();
        for atom in self.atoms() {
            for v in &atom.args {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        vars
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // precedence: ! > ^ > v
        match self {
            MlnFormula::Atom(a) => write!(f, "{a}"),
            MlnFormula::Not(x) => {
                write!(f, "!")?;
                x.fmt_prec(f, 3)
            }
            MlnFormula::And(a, b) => {
                if prec > 2 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 2)?;
                write!(f, " ^ ")?;
                b.fmt_prec(f, 2)?;
                if prec > 2 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            MlnFormula::Or(a, b) => {
                if prec > 1 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 1)?;
                write!(f, " v ")?;
                b.fmt_prec(f, 1)?;
                if prec > 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for MlnFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightExpr {
    Const(f64),
    Param(String),
}

impl fmt::Display for WeightExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightExpr::Const(c) => write!(f, "{c}"),
            WeightExpr::Param(p) => write!(f, "${p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlnSpec {
    pub formulas: Vec<(MlnFormula, WeightExpr)>,
}

impl fmt::Display for MlnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (formula, weight) in &self.formulas {
            writeln!(f, "{formula} :: {weight};")?;
        }
        Ok(())
    }
}

// ------------------------------------------------------------- ProbLog

#[derive(Debug, Clone, PartialEq)]
pub struct ProblogSpec {
    pub facts: Vec<(WeightExpr, PatternAtom)>,
    pub clauses: Vec<(PatternAtom, Vec<PatternAtom>)>,
    /// Relations declared observable via `observable rel/k.`
    pub observable: Vec<(String, usize)>,
}

impl fmt::Display for ProblogSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, atom) in &self.facts {
            writeln!(f, "{label} :: {atom}.")?;
        }
        for (head, body) in &self.clauses {
            let body: Vec<String> = body.iter().map(|a| a.to_string()).collect();
            writeln!(f, "{head} :- {}.", body.join(", "))?;
        }
        for (name, arity) in &self.observable {
            writeln!(f, "observable {name}/{arity}.")?;
        }
        Ok(())
    }
}

impl ProblogSpec {
    pub fn is_fact_relation(&self, name: &str) -> bool {
        self.facts.iter().any(|(_, a)| a.relation == name)
    }

    pub fn is_observable(&self, name: &str) -> bool {
        self.observable.iter().any(|(n, _)| n == name)
    }

    pub fn observable_names(&self) -> Vec<String> {
        self.observable.iter().map(|(n, _)| n.clone()).collect()
    }
}

// ------------------------------------------------------------ ModelSpec

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Rbn(RbnSpec),
    Mln(MlnSpec),
    Problog(ProblogSpec),
}

impl ModelSpec {
    pub fn dialect(&self) -> Dialect {
        match self {
            ModelSpec::Rbn(_) => Dialect::Rbn,
            ModelSpec::Mln(_) => Dialect::Mln,
            ModelSpec::Problog(_) => Dialect::Problog,
        }
    }

    /// Signature in order of first definition/occurrence.
    pub fn signature(&self) -> Result<Arc<Signature>> {
        let mut rels: Vec<(String, usize)> = Vec::new();
        let mut add = |name: &str, arity: usize| -> Result<()> {
            match rels.iter().find(|(n, _)| n == name) {
                Some((_, a)) if *a != arity => Err(Error::Arity(format!(
                    "relation {name} used with arities {a} and {arity}"
                ))),
                Some(_) => Ok(()),
                None => {
                    rels.push((name.to_string(), arity));
                    Ok(())
                }
            }
        };
        match self {
            ModelSpec::Rbn(spec) => {
                for f in &spec.formulas {
                    add(&f.head.relation, f.head.args.len())?;
                }
            }
            ModelSpec::Mln(spec) => {
                for (formula, _) in &spec.formulas {
                    for atom in formula.atoms() {
                        add(&atom.relation, atom.args.len())?;
                    }
                }
            }
            ModelSpec::Problog(spec) => {
                for (_, atom) in &spec.facts {
                    add(&atom.relation, atom.args.len())?;
                }
                for (head, body) in &spec.clauses {
                    add(&head.relation, head.args.len())?;
                    for atom in body {
                        add(&atom.relation, atom.args.len())?;
                    }
                }
            }
        }
        Ok(Arc::new(Signature::new(rels)?))
    }

    /// All `Param` names, in first-occurrence order.
    pub fn free_parameters(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |name: &str| {
            if !out.iter().any(|p| p == name) {
                out.push(name.to_string());
            }
        };
        match self {
            ModelSpec::Rbn(spec) => {
                fn walk(pf: &ProbFormula, push: &mut dyn FnMut(&str)) {
                    match pf {
                        ProbFormula::Const(_) => {}
                        ProbFormula::Param(p) => push(p),
                        ProbFormula::IfElse { then, els, .. } => {
                            walk(then, push);
                            walk(els, push);
                        }
                        ProbFormula::NoisyOr { prob, .. } => walk(prob, push),
                    }
                }
                for f in &spec.formulas {
                    walk(&f.body, &mut push);
                }
            }
            ModelSpec::Mln(spec) => {
                for (_, w) in &spec.formulas {
                    if let WeightExpr::Param(p) = w {
                        push(p);
                    }
                }
            }
            ModelSpec::Problog(spec) => {
                for (label, _) in &spec.facts {
                    if let WeightExpr::Param(p) = label {
                        push(p);
                    }
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        match self {
            ModelSpec::Rbn(s) => s.to_string(),
            ModelSpec::Mln(s) => s.to_string(),
            ModelSpec::Problog(s) => s.to_string(),
        }
    }
}

// ------------------------------------------------------- fragment checks

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Result of a projective-fragment static check.
#[derive(Debug, Clone, Serialize)]
pub struct FragmentReport {
    pub dialect: Dialect,
    pub pass: bool,
    pub violations: Vec<Violation>,
}

impl FragmentReport {
    fn from_violations(dialect: Dialect, violations: Vec<Violation>) -> FragmentReport {
        FragmentReport { dialect, pass: violations.is_empty(), violations }
    }
}

/// Projective iff the spec contains no combination functions.
pub fn check_rbn_projective(spec: &RbnSpec) -> FragmentReport {
    fn walk(pf: &ProbFormula, head: &PatternAtom, out: &mut Vec<Violation>) {
        match pf {
            ProbFormula::Const(_) | ProbFormula::Param(_) => {}
            ProbFormula::IfElse { then, els, .. } => {
                walk(then, head, out);
                walk(els, head, out);
            }
            ProbFormula::NoisyOr { var, loc, .. } => out.push(Violation {
                line: loc.line,
                col: loc.col,
                message: format!(
                    "formula for {head} uses the noisy-or combination function over {var}"
                ),
            }),
        }
    }
    let mut violations = Vec::new();
    for f in &spec.formulas {
        walk(&f.body, &f.head, &mut violations);
    }
    FragmentReport::from_violations(Dialect::Rbn, violations)
}

/// Projective iff within every formula all atoms have identical variable sets.
pub fn check_mln_projective(spec: &MlnSpec) -> FragmentReport {
    let mut violations = Vec::new();
    for (formula, _) in &spec.formulas {
        let atoms = formula.atoms();
        let Some(first) = atoms.first() else { continue };
        let reference = first.variables();
        for atom in &atoms[1..] {
            let vars = atom.variables();
            if vars != reference {
                violations.push(Violation {
                    line: atom.loc.line,
                    col: atom.loc.col,
                    message: format!(
                        "atom {atom} has variables {{{}}} but {first} has {{{}}}",
                        vars.iter().cloned().collect::<Vec<_>>().join(","),
                        reference.iter().cloned().collect::<Vec<_>>().join(",")
                    ),
                });
            }
        }
    }
    FragmentReport::from_violations(Dialect::Mln, violations)
}

/// Projective iff every clause's body variables are contained in its head.
pub fn check_problog_projective(spec: &ProblogSpec) -> FragmentReport {
    let mut violations = Vec::new();
    for (head, body) in &spec.clauses {
        let head_vars = head.variables();
        for atom in body {
            for v in &atom.args {
                if !head_vars.contains(v.as_str()) {
                    violations.push(Violation {
                        line: atom.loc.line,
                        col: atom.loc.col,
                        message: format!(
                            "body atom {atom} of clause for {head} uses variable {v} \
                             not contained in the head"
                        ),
                    });
                }
            }
        }
    }
    FragmentReport::from_violations(Dialect::Problog, violations)
}

pub fn check_projective(spec: &ModelSpec) -> FragmentReport {
    match spec {
        ModelSpec::Rbn(s) => check_rbn_projective(s),
        ModelSpec::Mln(s) => check_mln_projective(s),
        ModelSpec::Problog(s) => check_problog_projective(s),
    }
}
