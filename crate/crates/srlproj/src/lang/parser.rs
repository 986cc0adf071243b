//! Hand-rolled lexer and recursive-descent parsers for the three
//! dialects. Grammars (comments are `//` to end of line):
//!
//! RBN:     `rel(X,Y) <- <pf>;` with
//!          `<pf> ::= <float> | $name | if <lit-conj> : <pf> else : <pf>
//!                  | noisy-or{ if <lit-conj> : <pf> | Var }`
//! MLN:     `<formula> :: <weight>;` with `^`, `v`, `!` connectives
//! ProbLog: `<label> :: rel(X).`, `head :- b1, b2.`, `observable rel/k.`

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

use super::{
    Dialect, Loc, MlnFormula, MlnSpec, ModelSpec, PatternAtom, PatternLiteral, ProbFormula,
    ProblogSpec, RbnFormula, RbnSpec, WeightExpr,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Number(f64),
    Dollar,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Colon,
    DoubleColon,
    ColonDash,
    Arrow,
    Caret,
    Bang,
    Amp,
    Pipe,
    Slash,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Var(s) => write!(f, "variable `{s}`"),
            Tok::Number(v) => write!(f, "number {v}"),
            Tok::Dollar => write!(f, "`$`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::DoubleColon => write!(f, "`::`"),
            Tok::ColonDash => write!(f, "`:-`"),
            Tok::Arrow => write!(f, "`<-`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::Amp => write!(f, "`&`"),
            Tok::Pipe => write!(f, "`|`"),
            Tok::Slash => write!(f, "`/`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    loc: Loc,
}

fn syntax(loc: Loc, msg: impl Into<String>) -> Error {
    Error::Syntax { line: loc.line, col: loc.col, msg: msg.into() }
}

fn stratification(loc: Loc, msg: impl Into<String>) -> Error {
    Error::Stratification { line: loc.line, col: loc.col, msg: msg.into() }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    macro_rules! loc {
        () => {
            Loc { line, col }
        };
    }
    while i < chars.len() {
        let c = chars[i];
        let start = loc!();
        let advance = |i: &mut usize, col: &mut usize| {
            *i += 1;
            *col += 1;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(&mut i, &mut col),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                tokens.push(Token { tok: Tok::LParen, loc: start });
                advance(&mut i, &mut col);
            }
            ')' => {
                tokens.push(Token { tok: Tok::RParen, loc: start });
                advance(&mut i, &mut col);
            }
            '{' => {
                tokens.push(Token { tok: Tok::LBrace, loc: start });
                advance(&mut i, &mut col);
            }
            '}' => {
                tokens.push(Token { tok: Tok::RBrace, loc: start });
                advance(&mut i, &mut col);
            }
            ',' => {
                tokens.push(Token { tok: Tok::Comma, loc: start });
                advance(&mut i, &mut col);
            }
            ';' => {
                tokens.push(Token { tok: Tok::Semi, loc: start });
                advance(&mut i, &mut col);
            }
            '^' => {
                tokens.push(Token { tok: Tok::Caret, loc: start });
                advance(&mut i, &mut col);
            }
            '!' => {
                tokens.push(Token { tok: Tok::Bang, loc: start });
                advance(&mut i, &mut col);
            }
            '&' => {
                tokens.push(Token { tok: Tok::Amp, loc: start });
                advance(&mut i, &mut col);
            }
            '|' => {
                tokens.push(Token { tok: Tok::Pipe, loc: start });
                advance(&mut i, &mut col);
            }
            '$' => {
                tokens.push(Token { tok: Tok::Dollar, loc: start });
                advance(&mut i, &mut col);
            }
            '/' => {
                tokens.push(Token { tok: Tok::Slash, loc: start });
                advance(&mut i, &mut col);
            }
            ':' => {
                if chars.get(i + 1) == Some(&':') {
                    tokens.push(Token { tok: Tok::DoubleColon, loc: start });
                    i += 2;
                    col += 2;
                } else if chars.get(i + 1) == Some(&'-') {
                    tokens.push(Token { tok: Tok::ColonDash, loc: start });
                    i += 2;
                    col += 2;
                } else {
                    tokens.push(Token { tok: Tok::Colon, loc: start });
                    advance(&mut i, &mut col);
                }
            }
            '<' if chars.get(i + 1) == Some(&'-') => {
                tokens.push(Token { tok: Tok::Arrow, loc: start });
                i += 2;
                col += 2;
            }
            '.' => {
                tokens.push(Token { tok: Tok::Dot, loc: start });
                advance(&mut i, &mut col);
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let begin = i;
                if chars[i] == '-' {
                    i += 1;
                }
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    // a trailing dot is the statement terminator, not part of the number
                    if chars[i] == '.' && !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                        break;
                    }
                    i += 1;
                }
                let s: String = chars[begin..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{s}`")))?;
                col += i - begin;
                tokens.push(Token { tok: Tok::Number(v), loc: start });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let begin = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '_'
                        // hyphenated keywords like noisy-or
                        || (chars[i] == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_alphabetic())))
                {
                    i += 1;
                }
                let s: String = chars[begin..i].iter().collect();
                col += i - begin;
                let tok = if s.chars().next().unwrap().is_uppercase() {
                    Tok::Var(s)
                } else {
                    Tok::Ident(s)
                };
                tokens.push(Token { tok, loc: start });
            }
            other => return Err(syntax(start, format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn eof_loc(&self) -> Loc {
        self.tokens
            .last()
            .map(|t| t.loc)
            .unwrap_or(Loc { line: 1, col: 1 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.tokens.get(self.pos + 1).map(|t| &t.tok)
    }

    fn loc(&self) -> Loc {
        self.tokens.get(self.pos).map(|t| t.loc).unwrap_or_else(|| self.eof_loc())
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<Loc> {
        match self.next() {
            Some(t) if t.tok == tok => Ok(t.loc),
            Some(t) => Err(syntax(t.loc, format!("expected {tok}, found {}", t.tok))),
            None => Err(syntax(self.eof_loc(), format!("expected {tok}, found end of input"))),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Loc)> {
        match self.next() {
            Some(Token { tok: Tok::Ident(s), loc }) => Ok((s, loc)),
            Some(t) => Err(syntax(t.loc, format!("expected identifier, found {}", t.tok))),
            None => Err(syntax(self.eof_loc(), "expected identifier, found end of input")),
        }
    }

    fn expect_var(&mut self) -> Result<(String, Loc)> {
        match self.next() {
            Some(Token { tok: Tok::Var(s), loc }) => Ok((s, loc)),
            Some(t) => Err(syntax(
                t.loc,
                format!("expected an upper-case variable, found {}", t.tok),
            )),
            None => Err(syntax(self.eof_loc(), "expected a variable, found end of input")),
        }
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == word)
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if self.at_ident(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// `rel(X,Y)`; arguments are variables only (no domain constants).
    fn pattern_atom(&mut self) -> Result<PatternAtom> {
        let (relation, loc) = self.expect_ident()?;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.next();
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    let (v, _) = self.expect_var()?;
                    args.push(v);
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.next();
                        }
                        _ => break,
                    }
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(PatternAtom { relation, args, loc })
    }

    fn literal_conjunction(&mut self) -> Result<Vec<PatternLiteral>> {
        let mut lits = Vec::new();
        loop {
            let negated = if self.peek() == Some(&Tok::Bang) {
                self.next();
                true
            } else {
                false
            };
            let atom = self.pattern_atom()?;
            lits.push(PatternLiteral { atom, negated });
            if self.peek() == Some(&Tok::Amp) {
                self.next();
            } else {
                break;
            }
        }
        Ok(lits)
    }

    // ------------------------------------------------------------ RBN

    fn rbn_spec(&mut self) -> Result<RbnSpec> {
        let mut formulas = Vec::new();
        while self.peek().is_some() {
            let head = self.pattern_atom()?;
            self.expect(Tok::Arrow)?;
            let body = self.prob_formula()?;
            self.expect(Tok::Semi)?;
            formulas.push(RbnFormula { head, body });
        }
        Ok(RbnSpec { formulas })
    }

    fn prob_formula(&mut self) -> Result<ProbFormula> {
        let loc = self.loc();
        match self.peek() {
            Some(Tok::Number(_)) => {
                let Some(Token { tok: Tok::Number(v), loc }) = self.next() else { unreachable!() };
                if !(0.0..=1.0).contains(&v) {
                    return Err(syntax(loc, format!("probability constant {v} outside [0,1]")));
                }
                Ok(ProbFormula::Const(v))
            }
            Some(Tok::Dollar) => {
                self.next();
                let (name, _) = self.expect_ident()?;
                Ok(ProbFormula::Param(name))
            }
            Some(Tok::Ident(s)) if s == "if" => {
                self.next();
                let cond = self.literal_conjunction()?;
                self.expect(Tok::Colon)?;
                let then = Box::new(self.prob_formula()?);
                let else_loc = self.loc();
                if !self.eat_ident("else") {
                    return Err(syntax(else_loc, "expected `else` after the then-branch"));
                }
                self.expect(Tok::Colon)?;
                let els = Box::new(self.prob_formula()?);
                Ok(ProbFormula::IfElse { cond, then, els })
            }
            Some(Tok::Ident(s)) if s == "noisy-or" => {
                self.next();
                self.expect(Tok::LBrace)?;
                let if_loc = self.loc();
                if !self.eat_ident("if") {
                    return Err(syntax(if_loc, "expected `if` inside noisy-or"));
                }
                let cond = self.literal_conjunction()?;
                self.expect(Tok::Colon)?;
                let prob = Box::new(self.prob_formula()?);
                self.expect(Tok::Pipe)?;
                let (var, _) = self.expect_var()?;
                self.expect(Tok::RBrace)?;
                Ok(ProbFormula::NoisyOr { cond, prob, var, loc })
            }
            Some(other) => Err(syntax(loc, format!("expected a probability formula, found {other}"))),
            None => Err(syntax(loc, "expected a probability formula, found end of input")),
        }
    }

    // ------------------------------------------------------------ MLN

    fn mln_spec(&mut self) -> Result<MlnSpec> {
        let mut formulas = Vec::new();
        while self.peek().is_some() {
            let formula = self.mln_or()?;
            self.expect(Tok::DoubleColon)?;
            let weight = match self.next() {
                Some(Token { tok: Tok::Number(v), .. }) => WeightExpr::Const(v),
                Some(Token { tok: Tok::Dollar, .. }) => {
                    let (name, _) = self.expect_ident()?;
                    WeightExpr::Param(name)
                }
                Some(Token { tok: Tok::Ident(name), .. }) => WeightExpr::Param(name),
                Some(t) => return Err(syntax(t.loc, format!("expected a weight, found {}", t.tok))),
                None => return Err(syntax(self.eof_loc(), "expected a weight, found end of input")),
            };
            self.expect(Tok::Semi)?;
            formulas.push((formula, weight));
        }
        Ok(MlnSpec { formulas })
    }

    fn mln_or(&mut self) -> Result<MlnFormula> {
        let mut lhs = self.mln_and()?;
        while self.at_ident("v") {
            self.next();
            let rhs = self.mln_and()?;
            lhs = MlnFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mln_and(&mut self) -> Result<MlnFormula> {
        let mut lhs = self.mln_unary()?;
        while self.peek() == Some(&Tok::Caret) {
            self.next();
            let rhs = self.mln_unary()?;
            lhs = MlnFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mln_unary(&mut self) -> Result<MlnFormula> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.next();
                Ok(MlnFormula::Not(Box::new(self.mln_unary()?)))
            }
            Some(Tok::LParen) => {
                self.next();
                let inner = self.mln_or()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => Ok(MlnFormula::Atom(self.pattern_atom()?)),
        }
    }

    // -------------------------------------------------------- ProbLog

    fn problog_spec(&mut self) -> Result<ProblogSpec> {
        let mut facts = Vec::new();
        let mut clauses = Vec::new();
        let mut observable = Vec::new();
        while self.peek().is_some() {
            if self.at_ident("observable") {
                self.next();
                let (name, _) = self.expect_ident()?;
                self.expect(Tok::Slash)?;
                let arity = match self.next() {
                    Some(Token { tok: Tok::Number(v), loc }) => {
                        if v.fract() != 0.0 || v < 0.0 {
                            return Err(syntax(loc, format!("bad arity {v}")));
                        }
                        v as usize
                    }
                    Some(t) => return Err(syntax(t.loc, format!("expected arity, found {}", t.tok))),
                    None => return Err(syntax(self.eof_loc(), "expected arity")),
                };
                self.expect(Tok::Dot)?;
                observable.push((name, arity));
                continue;
            }
            // a labeled fact starts with a number, `$`, or `name ::`
            let is_fact = matches!(self.peek(), Some(Tok::Number(_)) | Some(Tok::Dollar))
                || (matches!(self.peek(), Some(Tok::Ident(_)))
                    && self.peek2() == Some(&Tok::DoubleColon));
            if is_fact {
                let label = match self.next() {
                    Some(Token { tok: Tok::Number(v), loc }) => {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(syntax(loc, format!("fact label {v} outside [0,1]")));
                        }
                        WeightExpr::Const(v)
                    }
                    Some(Token { tok: Tok::Dollar, .. }) => {
                        let (name, _) = self.expect_ident()?;
                        WeightExpr::Param(name)
                    }
                    Some(Token { tok: Tok::Ident(name), .. }) => WeightExpr::Param(name),
                    _ => unreachable!(),
                };
                self.expect(Tok::DoubleColon)?;
                let atom = self.pattern_atom()?;
                self.expect(Tok::Dot)?;
                facts.push((label, atom));
            } else {
                let head = self.pattern_atom()?;
                self.expect(Tok::ColonDash)?;
                let mut body = Vec::new();
                loop {
                    body.push(self.pattern_atom()?);
                    if self.peek() == Some(&Tok::Comma) {
                        self.next();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Dot)?;
                clauses.push((head, body));
            }
        }
        Ok(ProblogSpec { facts, clauses, observable })
    }
}

/// Parses `text` in the given dialect and validates the resulting AST.
pub fn parse_model(text: &str, dialect: Dialect) -> Result<ModelSpec> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let spec = match dialect {
        Dialect::Rbn => ModelSpec::Rbn(parser.rbn_spec()?),
        Dialect::Mln => ModelSpec::Mln(parser.mln_spec()?),
        Dialect::Problog => ModelSpec::Problog(parser.problog_spec()?),
    };
    validate(&spec)?;
    Ok(spec)
}

fn validate(spec: &ModelSpec) -> Result<()> {
    // arity consistency across all occurrences
    spec.signature()?;
    match spec {
        ModelSpec::Rbn(rbn) => validate_rbn(rbn),
        ModelSpec::Mln(_) => Ok(()),
        ModelSpec::Problog(plp) => validate_problog(plp),
    }
}

fn validate_rbn(spec: &RbnSpec) -> Result<()> {
    let mut defined: BTreeMap<&str, usize> = BTreeMap::new();
    for formula in &spec.formulas {
        let head = &formula.head;
        if defined.contains_key(head.relation.as_str()) {
            return Err(Error::InvalidModel(format!(
                "relation {} defined more than once",
                head.relation
            )));
        }
        let mut head_vars: BTreeSet<&str> = BTreeSet::new();
        for v in &head.args {
            if !head_vars.insert(v) {
                return Err(syntax(head.loc, format!("repeated head variable {v} in {head}")));
            }
        }
        check_pf(&formula.body, &defined, &head_vars)?;
        defined.insert(&head.relation, head.args.len());
    }
    Ok(())
}

fn check_pf(
    pf: &ProbFormula,
    defined: &BTreeMap<&str, usize>,
    scope: &BTreeSet<&str>,
) -> Result<()> {
    match pf {
        ProbFormula::Const(_) | ProbFormula::Param(_) => Ok(()),
        ProbFormula::IfElse { cond, then, els } => {
            check_cond(cond, defined, scope)?;
            check_pf(then, defined, scope)?;
            check_pf(els, defined, scope)
        }
        ProbFormula::NoisyOr { cond, prob, var, .. } => {
            let mut inner = scope.clone();
            inner.insert(var);
            check_cond(cond, defined, &inner)?;
            check_pf(prob, defined, &inner)
        }
    }
}

fn check_cond(
    cond: &[PatternLiteral],
    defined: &BTreeMap<&str, usize>,
    scope: &BTreeSet<&str>,
) -> Result<()> {
    for lit in cond {
        let atom = &lit.atom;
        match defined.get(atom.relation.as_str()) {
            None => {
                return Err(stratification(
                    atom.loc,
                    format!(
                        "condition references {}, which is not defined by an earlier formula",
                        atom.relation
                    ),
                ))
            }
            Some(&arity) if arity != atom.args.len() => {
                return Err(Error::Arity(format!(
                    "relation {} expects arity {arity}, got {}",
                    atom.relation,
                    atom.args.len()
                )))
            }
            Some(_) => {}
        }
        for v in &atom.args {
            if !scope.contains(v.as_str()) {
                return Err(syntax(
                    atom.loc,
                    format!("variable {v} in {atom} is not a head or bound variable"),
                ));
            }
        }
    }
    Ok(())
}

fn validate_problog(spec: &ProblogSpec) -> Result<()> {
    let mut fact_rels: BTreeSet<&str> = BTreeSet::new();
    for (_, atom) in &spec.facts {
        if !fact_rels.insert(&atom.relation) {
            return Err(Error::InvalidModel(format!(
                "relation {} appears in more than one labeled fact",
                atom.relation
            )));
        }
        let mut seen = BTreeSet::new();
        for v in &atom.args {
            if !seen.insert(v) {
                return Err(syntax(atom.loc, format!("repeated variable {v} in fact head {atom}")));
            }
        }
    }
    let mut clause_rels: BTreeSet<&str> = BTreeSet::new();
    for (head, _) in &spec.clauses {
        if fact_rels.contains(head.relation.as_str()) {
            return Err(Error::InvalidModel(format!(
                "relation {} appears both as a labeled fact and as a clause head",
                head.relation
            )));
        }
        clause_rels.insert(&head.relation);
        let mut seen = BTreeSet::new();
        for v in &head.args {
            if !seen.insert(v) {
                return Err(syntax(head.loc, format!("repeated variable {v} in clause head {head}")));
            }
        }
    }
    // body relations must be defined somewhere
    for (head, body) in &spec.clauses {
        for atom in body {
            if !fact_rels.contains(atom.relation.as_str())
                && !clause_rels.contains(atom.relation.as_str())
            {
                return Err(Error::InvalidModel(format!(
                    "clause for {head} references undefined relation {}",
                    atom.relation
                )));
            }
        }
    }
    // clause dependency graph over derived relations must be acyclic
    let derived: Vec<&str> = clause_rels.iter().copied().collect();
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (head, body) in &spec.clauses {
        for atom in body {
            if clause_rels.contains(atom.relation.as_str()) {
                edges
                    .entry(head.relation.as_str())
                    .or_default()
                    .insert(atom.relation.as_str());
            }
        }
    }
    let mut resolved: BTreeSet<&str> = BTreeSet::new();
    loop {
        let ready: Vec<&str> = derived
            .iter()
            .copied()
            .filter(|r| !resolved.contains(r))
            .filter(|r| {
                edges
                    .get(r)
                    .map(|deps| deps.iter().all(|d| resolved.contains(d)))
                    .unwrap_or(true)
            })
            .collect();
        if ready.is_empty() {
            break;
        }
        resolved.extend(ready);
    }
    if resolved.len() != derived.len() {
        let stuck: Vec<&str> = derived.iter().copied().filter(|r| !resolved.contains(r)).collect();
        let loc = spec
            .clauses
            .iter()
            .find(|(h, _)| stuck.contains(&h.relation.as_str()))
            .map(|(h, _)| h.loc)
            .unwrap_or(Loc { line: 1, col: 1 });
        return Err(stratification(
            loc,
            format!("clause dependency cycle involving {}", stuck.join(", ")),
        ));
    }
    // observable declarations must name existing relations
    for (name, arity) in &spec.observable {
        let known = spec
            .facts
            .iter()
            .map(|(_, a)| (&a.relation, a.args.len()))
            .chain(spec.clauses.iter().map(|(h, _)| (&h.relation, h.args.len())))
            .any(|(n, a)| n == name && a == *arity);
        if !known {
            return Err(Error::InvalidModel(format!(
                "observable declaration {name}/{arity} does not match any relation"
            )));
        }
    }
    Ok(())
}

/// Topological order of derived relations: each relation's clause bodies
/// reference only labeled-fact relations or earlier entries.
pub(crate) fn derived_topo_order(spec: &ProblogSpec) -> Vec<String> {
    let clause_rels: BTreeSet<&str> =
        spec.clauses.iter().map(|(h, _)| h.relation.as_str()).collect();
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (head, body) in &spec.clauses {
        let entry = deps.entry(head.relation.as_str()).or_default();
        for atom in body {
            if clause_rels.contains(atom.relation.as_str()) && atom.relation != head.relation {
                entry.insert(&atom.relation);
            }
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut placed: BTreeSet<&str> = BTreeSet::new();
    while placed.len() < clause_rels.len() {
        for &rel in &clause_rels {
            if placed.contains(rel) {
                continue;
            }
            let ready = deps
                .get(rel)
                .map(|d| d.iter().all(|x| placed.contains(x)))
                .unwrap_or(true);
            if ready {
                placed.insert(rel);
                order.push(rel.to_string());
            }
        }
    }
    order
}
