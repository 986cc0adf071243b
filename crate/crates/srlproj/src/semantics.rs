//! Exact construction of the distribution over worlds for each dialect,
//! by full grounding and enumeration, plus conditional-query answering.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lang::{
    Dialect, MlnFormula, ModelSpec, PatternLiteral, ProbFormula, ProblogSpec, WeightExpr,
};
use crate::worlds::{Distribution, Signature, World, DEFAULT_ATOM_CAP};

/// A named parameter assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamVector(pub BTreeMap<String, f64>);

impl ParamVector {
    pub fn new() -> ParamVector {
        ParamVector(BTreeMap::new())
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> ParamVector {
        ParamVector(pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect())
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }
}

/// A model whose exact distribution over `Ω^(n)` can be constructed. The
/// `CliqueEmpty` variant is the even mixture of the complete graph (with
/// self-loops) and the empty graph over the signature `{e/2}`; it is not
/// expressible in any of the dialects but is a canonical projective RRSM.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Spec(ModelSpec),
    CliqueEmpty,
}

impl Model {
    pub fn parse(text: &str, dialect: Dialect) -> Result<Model> {
        Ok(Model::Spec(crate::lang::parse_model(text, dialect)?))
    }

    pub fn signature(&self) -> Result<Arc<Signature>> {
        match self {
            Model::Spec(spec) => spec.signature(),
            Model::CliqueEmpty => Ok(Arc::new(Signature::new(vec![("e", 2)])?)),
        }
    }

    pub fn free_parameters(&self) -> Vec<String> {
        match self {
            Model::Spec(spec) => spec.free_parameters(),
            Model::CliqueEmpty => vec![],
        }
    }

    /// The exact distribution `Q^(n)_θ`. For ProbLog models with latent
    /// relations the returned distribution still ranges over the full
    /// signature; use [`problog_distribution`] directly to project.
    pub fn distribution(&self, n: usize, theta: &ParamVector, cap: u32) -> Result<Distribution> {
        match self {
            Model::Spec(ModelSpec::Rbn(spec)) => {
                rbn_distribution(spec, self.signature()?, n, theta, cap)
            }
            Model::Spec(ModelSpec::Mln(spec)) => {
                mln_distribution(spec, self.signature()?, n, theta, cap)
            }
            Model::Spec(ModelSpec::Problog(spec)) => {
                problog_distribution(spec, self.signature()?, n, theta, cap, false)
            }
            Model::CliqueEmpty => {
                let sig = self.signature()?;
                sig.check_cap(n, cap)?;
                let atoms = sig.atom_count(n);
                let mut probs = vec![0.0; 1usize << atoms];
                probs[0] = 0.5;
                probs[(1usize << atoms) - 1] = 0.5;
                Distribution::new(sig, n, probs)
            }
        }
    }
}

fn check_prob_param(name: &str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidParameter { name: name.to_string(), value })
    }
}

// ------------------------------------------------------------------ RBN

/// A probability formula grounded over a fixed head-argument assignment:
/// all conditions are lists of (atom index, required truth value).
#[derive(Debug, Clone)]
enum GroundPf {
    Const(f64),
    If {
        cond: Vec<(usize, bool)>,
        then: Box<GroundPf>,
        els: Box<GroundPf>,
    },
    /// One guarded term per binding of the bound variable.
    NoisyOr(Vec<(Vec<(usize, bool)>, GroundPf)>),
}

fn cond_holds(cond: &[(usize, bool)], bits: u64) -> bool {
    cond.iter().all(|&(atom, want)| (bits >> atom & 1 == 1) == want)
}

impl GroundPf {
    fn eval(&self, bits: u64) -> f64 {
        match self {
            GroundPf::Const(p) => *p,
            GroundPf::If { cond, then, els } => {
                if cond_holds(cond, bits) {
                    then.eval(bits)
                } else {
                    els.eval(bits)
                }
            }
            GroundPf::NoisyOr(terms) => {
                let mut none = 1.0;
                for (cond, prob) in terms {
                    if cond_holds(cond, bits) {
                        none *= 1.0 - prob.eval(bits);
                    }
                }
                1.0 - none
            }
        }
    }
}

fn ground_cond(
    cond: &[PatternLiteral],
    env: &BTreeMap<&str, usize>,
    sig: &Signature,
    n: usize,
) -> Result<Vec<(usize, bool)>> {
    cond.iter()
        .map(|lit| {
            let rel = sig
                .relation_index(&lit.atom.relation)
                .ok_or_else(|| Error::InvalidModel(format!("unknown relation {}", lit.atom.relation)))?;
            let args: Vec<usize> = lit.atom.args.iter().map(|v| env[v.as_str()]).collect();
            Ok((sig.atom_index(n, rel, &args), !lit.negated))
        })
        .collect()
}

fn ground_pf(
    pf: &ProbFormula,
    env: &BTreeMap<&str, usize>,
    sig: &Signature,
    n: usize,
    theta: &ParamVector,
) -> Result<GroundPf> {
    Ok(match pf {
        ProbFormula::Const(p) => GroundPf::Const(*p),
        ProbFormula::Param(name) => GroundPf::Const(check_prob_param(name, theta.get(name)?)?),
        ProbFormula::IfElse { cond, then, els } => GroundPf::If {
            cond: ground_cond(cond, env, sig, n)?,
            then: Box::new(ground_pf(then, env, sig, n, theta)?),
            els: Box::new(ground_pf(els, env, sig, n, theta)?),
        },
        ProbFormula::NoisyOr { cond, prob, var, .. } => {
            let mut terms = Vec::with_capacity(n);
            // the bound variable ranges over the whole domain, including
            // values equal to head arguments
            for y in 0..n {
                let mut inner = env.clone();
                inner.insert(var, y);
                terms.push((
                    ground_cond(cond, &inner, sig, n)?,
                    ground_pf(prob, &inner, sig, n, theta)?,
                ));
            }
            GroundPf::NoisyOr(terms)
        }
    })
}

/// One grounded probability formula per ground atom, in canonical atom
/// order. The declaration order of the spec is a stratification, so each
/// atom's formula only reads atoms of earlier relations.
pub(crate) fn compile_rbn(
    spec: &crate::lang::RbnSpec,
    sig: &Signature,
    n: usize,
    theta: &ParamVector,
) -> Result<Vec<GroundPfHandle>> {
    let atoms = sig.atom_count(n);
    let mut out = Vec::with_capacity(atoms);
    for formula in &spec.formulas {
        let rel = sig.relation_index(&formula.head.relation).unwrap();
        let block = n.pow(sig.relations()[rel].arity as u32);
        for local in 0..block {
            let ga = sig.atom_at(n, sig.relation_offset(rel, n) + local);
            let env: BTreeMap<&str, usize> = formula
                .head
                .args
                .iter()
                .map(String::as_str)
                .zip(ga.args.iter().copied())
                .collect();
            out.push(GroundPfHandle(ground_pf(&formula.body, &env, sig, n, theta)?));
        }
    }
    debug_assert_eq!(out.len(), atoms);
    Ok(out)
}

/// Opaque grounded-formula handle, exposing only evaluation.
#[derive(Debug, Clone)]
pub(crate) struct GroundPfHandle(GroundPf);

impl GroundPfHandle {
    /// Probability that this atom is true, given the rest of the world.
    pub(crate) fn prob_true(&self, bits: u64) -> f64 {
        self.0.eval(bits)
    }
}

/// `Q(ω) = Π_atoms p_atom(ω)` with `p` the grounded probability formula.
pub(crate) fn rbn_world_prob(compiled: &[GroundPfHandle], bits: u64) -> f64 {
    let mut q = 1.0;
    for (atom, pf) in compiled.iter().enumerate() {
        let p = pf.prob_true(bits);
        q *= if bits >> atom & 1 == 1 { p } else { 1.0 - p };
        if q == 0.0 {
            return 0.0;
        }
    }
    q
}

pub fn rbn_distribution(
    spec: &crate::lang::RbnSpec,
    sig: Arc<Signature>,
    n: usize,
    theta: &ParamVector,
    cap: u32,
) -> Result<Distribution> {
    sig.check_cap(n, cap)?;
    let compiled = compile_rbn(spec, &sig, n, theta)?;
    Distribution::from_fn(sig, n, cap, move |bits| rbn_world_prob(&compiled, bits))
}

// ------------------------------------------------------------------ MLN

#[derive(Debug, Clone)]
enum GroundBool {
    Atom(usize),
    Not(Box<GroundBool>),
    And(Box<GroundBool>, Box<GroundBool>),
    Or(Box<GroundBool>, Box<GroundBool>),
}

impl GroundBool {
    fn eval(&self, bits: u64) -> bool {
        match self {
            GroundBool::Atom(a) => bits >> a & 1 == 1,
            GroundBool::Not(x) => !x.eval(bits),
            GroundBool::And(a, b) => a.eval(bits) && b.eval(bits),
            GroundBool::Or(a, b) => a.eval(bits) || b.eval(bits),
        }
    }
}

fn ground_bool(
    formula: &MlnFormula,
    env: &BTreeMap<&str, usize>,
    sig: &Signature,
    n: usize,
) -> GroundBool {
    match formula {
        MlnFormula::Atom(atom) => {
            let rel = sig.relation_index(&atom.relation).unwrap();
            let args: Vec<usize> = atom.args.iter().map(|v| env[v.as_str()]).collect();
            GroundBool::Atom(sig.atom_index(n, rel, &args))
        }
        MlnFormula::Not(x) => GroundBool::Not(Box::new(ground_bool(x, env, sig, n))),
        MlnFormula::And(a, b) => GroundBool::And(
            Box::new(ground_bool(a, env, sig, n)),
            Box::new(ground_bool(b, env, sig, n)),
        ),
        MlnFormula::Or(a, b) => GroundBool::Or(
            Box::new(ground_bool(a, env, sig, n)),
            Box::new(ground_bool(b, env, sig, n)),
        ),
    }
}

/// All substitutions of domain elements for `vars`, repeats allowed,
/// in ascending lexicographic order.
fn substitutions(vars: &[String], n: usize) -> Vec<BTreeMap<&str, usize>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|env| {
                (0..n).map(move |val| {
                    let mut e = env.clone();
                    e.insert(v.as_str(), val);
                    e
                })
            })
            .collect();
    }
    out
}

/// `Q(ω) ∝ exp(Σ_i w_i · N_i(ω))` where `N_i` counts all substitutions
/// (repeats allowed) making formula `i` true. Normalized by log-sum-exp.
pub fn mln_distribution(
    spec: &crate::lang::MlnSpec,
    sig: Arc<Signature>,
    n: usize,
    theta: &ParamVector,
    cap: u32,
) -> Result<Distribution> {
    sig.check_cap(n, cap)?;
    let mut compiled: Vec<(f64, Vec<GroundBool>)> = Vec::new();
    for (formula, weight) in &spec.formulas {
        let w = match weight {
            WeightExpr::Const(w) => *w,
            WeightExpr::Param(name) => theta.get(name)?,
        };
        let groundings: Vec<GroundBool> = substitutions(&formula.variables(), n)
            .iter()
            .map(|env| ground_bool(formula, env, &sig, n))
            .collect();
        compiled.push((w, groundings));
    }
    let atoms = sig.atom_count(n);
    let log_weights: Vec<f64> = (0..1u64 << atoms)
        .map(|bits| {
            compiled
                .iter()
                .map(|(w, gs)| *w * gs.iter().filter(|g| g.eval(bits)).count() as f64)
                .sum()
        })
        .collect();
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let z: f64 = shifted.iter().sum();
    Distribution::new(sig, n, shifted.into_iter().map(|e| e / z).collect())
}

// -------------------------------------------------------------- ProbLog

struct GroundClause {
    head: usize,
    body: Vec<usize>,
}

/// Per-relation grounded clause lists in stratification (topological) order.
struct ProblogGrounding {
    /// (atom index, success probability) for every ground labeled fact
    fact_atoms: Vec<(usize, f64)>,
    /// grouped by derived relation, in dependency order
    strata: Vec<Vec<GroundClause>>,
}

fn ground_problog(
    spec: &ProblogSpec,
    sig: &Signature,
    n: usize,
    theta: &ParamVector,
) -> Result<ProblogGrounding> {
    let mut fact_atoms = Vec::new();
    for (label, atom) in &spec.facts {
        let p = match label {
            WeightExpr::Const(p) => *p,
            WeightExpr::Param(name) => check_prob_param(name, theta.get(name)?)?,
        };
        let rel = sig.relation_index(&atom.relation).unwrap();
        for env in substitutions(&atom.args, n) {
            // fact head variables are distinct, so every substitution
            // with repeats still names each ground atom exactly once
            let args: Vec<usize> = atom.args.iter().map(|v| env[v.as_str()]).collect();
            fact_atoms.push((sig.atom_index(n, rel, &args), p));
        }
    }
    let order = crate::lang::derived_topo_order(spec);
    let mut strata = Vec::new();
    for rel_name in &order {
        let rel = sig.relation_index(rel_name).unwrap();
        let mut clauses = Vec::new();
        for (head, body) in spec.clauses.iter().filter(|(h, _)| &h.relation == rel_name) {
            // all clause variables, head first, then fresh body variables
            let mut vars: Vec<String> = head.args.clone();
            for atom in body {
                for v in &atom.args {
                    if !vars.contains(v) {
                        vars.push(v.clone());
                    }
                }
            }
            for env in substitutions(&vars, n) {
                let head_args: Vec<usize> = head.args.iter().map(|v| env[v.as_str()]).collect();
                let body_atoms: Vec<usize> = body
                    .iter()
                    .map(|atom| {
                        let r = sig.relation_index(&atom.relation).unwrap();
                        let args: Vec<usize> = atom.args.iter().map(|v| env[v.as_str()]).collect();
                        sig.atom_index(n, r, &args)
                    })
                    .collect();
                clauses.push(GroundClause {
                    head: sig.atom_index(n, rel, &head_args),
                    body: body_atoms,
                });
            }
        }
        strata.push(clauses);
    }
    Ok(ProblogGrounding { fact_atoms, strata })
}

impl ProblogGrounding {
    /// Minimal model of a truth assignment to the labeled-fact atoms.
    fn minimal_model(&self, fact_bits: u64) -> u64 {
        let mut bits = fact_bits;
        for clauses in &self.strata {
            // within a stratum bodies never reference the stratum's own
            // relation, so a single pass reaches the fixpoint
            for clause in clauses {
                if clause.body.iter().all(|&a| bits >> a & 1 == 1) {
                    bits |= 1 << clause.head;
                }
            }
        }
        bits
    }
}

/// Encoding map from a full-signature world to its reduct over `sub`.
fn reduct_map(full: &Signature, sub: &Signature, n: usize) -> Vec<usize> {
    (0..sub.atom_count(n))
        .map(|t| {
            let ga = sub.atom_at(n, t);
            let rel = full
                .relation_index(&sub.relations()[ga.relation].name)
                .expect("sub-signature relation missing from full signature");
            full.atom_index(n, rel, &ga.args)
        })
        .collect()
}

/// Labeled ground facts are sampled independently; a world's probability
/// is the total probability of fact assignments whose minimal model
/// equals it. With `project_to_observable` the comparison marginalizes
/// relations not declared observable (no declarations = all observable).
pub fn problog_distribution(
    spec: &ProblogSpec,
    sig: Arc<Signature>,
    n: usize,
    theta: &ParamVector,
    cap: u32,
    project_to_observable: bool,
) -> Result<Distribution> {
    sig.check_cap(n, cap)?;
    let grounding = ground_problog(spec, &sig, n, theta)?;
    let out_sig = if project_to_observable && !spec.observable.is_empty() {
        Arc::new(sig.project(&spec.observable_names())?)
    } else {
        sig.clone()
    };
    let map = reduct_map(&sig, &out_sig, n);
    let mut probs = vec![0.0; 1usize << out_sig.atom_count(n)];
    let k = grounding.fact_atoms.len();
    for choice in 0..1u64 << k {
        let mut fact_bits = 0u64;
        let mut p = 1.0;
        for (j, &(atom, label)) in grounding.fact_atoms.iter().enumerate() {
            if choice >> j & 1 == 1 {
                fact_bits |= 1 << atom;
                p *= label;
            } else {
                p *= 1.0 - label;
            }
        }
        if p == 0.0 {
            continue;
        }
        let model = grounding.minimal_model(fact_bits);
        let enc = crate::worlds::permute_encoding(&map, model);
        probs[enc as usize] += p;
    }
    Distribution::new(out_sig, n, probs)
}

// ---------------------------------------------------------------- query

/// A ground literal such as `edge(0,1)` or `!red(2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundLiteral {
    pub relation: String,
    pub args: Vec<usize>,
    pub negated: bool,
}

impl GroundLiteral {
    /// Parses `rel(0,1)` or `!rel(0,1)`; also bare `rel` for arity 0.
    pub fn parse(text: &str) -> Result<GroundLiteral> {
        let text = text.trim();
        let (negated, rest) = match text.strip_prefix('!') {
            Some(rest) => (true, rest.trim()),
            None => (false, text),
        };
        let bad = |msg: &str| Error::InvalidWorld(format!("bad literal `{text}`: {msg}"));
        let (name, args) = match rest.split_once('(') {
            Some((name, tail)) => {
                let tail = tail.strip_suffix(')').ok_or_else(|| bad("unbalanced parens"))?;
                let args: Vec<usize> = if tail.trim().is_empty() {
                    vec![]
                } else {
                    tail.split(',')
                        .map(|a| a.trim().parse().map_err(|_| bad("non-integer argument")))
                        .collect::<Result<_>>()?
                };
                (name.trim(), args)
            }
            None => (rest, vec![]),
        };
        if name.is_empty() {
            return Err(bad("empty relation name"));
        }
        Ok(GroundLiteral { relation: name.to_string(), args, negated })
    }

    fn atom_index(&self, sig: &Signature, n: usize) -> Result<usize> {
        let rel = sig
            .relation_index(&self.relation)
            .ok_or_else(|| Error::InvalidWorld(format!("unknown relation {}", self.relation)))?;
        if sig.relations()[rel].arity != self.args.len() {
            return Err(Error::Arity(format!(
                "relation {} expects arity {}, got {}",
                self.relation,
                sig.relations()[rel].arity,
                self.args.len()
            )));
        }
        for &a in &self.args {
            if a >= n {
                return Err(Error::InvalidWorld(format!("element {a} outside domain [{n}]")));
            }
        }
        Ok(sig.atom_index(n, rel, &self.args))
    }

    pub fn holds_in(&self, world: &World) -> Result<bool> {
        let atom = self.atom_index(world.signature(), world.domain_size())?;
        Ok(world.get_index(atom) != self.negated)
    }
}

/// A conditional query: probability of `target` given the conjunction of
/// `evidence` literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub target: GroundLiteral,
    pub evidence: Vec<GroundLiteral>,
}

impl Query {
    /// Parses a target literal and comma-separated evidence literals
    /// (commas inside argument lists do not separate literals).
    pub fn parse(target: &str, evidence: &str) -> Result<Query> {
        let target = GroundLiteral::parse(target)?;
        let mut parts = Vec::new();
        let mut depth = 0usize;
        let mut current = String::new();
        for c in evidence.chars() {
            match c {
                '(' => {
                    depth += 1;
                    current.push(c);
                }
                ')' => {
                    depth = depth.saturating_sub(1);
                    current.push(c);
                }
                ',' if depth == 0 => parts.push(std::mem::take(&mut current)),
                _ => current.push(c),
            }
        }
        parts.push(current);
        let evidence = parts
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(GroundLiteral::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Query { target, evidence })
    }
}

/// `P(target | evidence)` under the exact distribution.
pub fn query(dist: &Distribution, q: &Query) -> Result<f64> {
    let sig = dist.signature();
    let n = dist.domain_size();
    let target = q.target.atom_index(sig, n)?;
    let evidence: Vec<(usize, bool)> = q
        .evidence
        .iter()
        .map(|lit| Ok((lit.atom_index(sig, n)?, !lit.negated)))
        .collect::<Result<_>>()?;
    let mut joint = 0.0;
    let mut margin = 0.0;
    for (enc, &p) in dist.probs().iter().enumerate() {
        let bits = enc as u64;
        if !cond_holds(&evidence, bits) {
            continue;
        }
        margin += p;
        if (bits >> target & 1 == 1) != q.target.negated {
            joint += p;
        }
    }
    if margin <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    Ok(joint / margin)
}

/// The atom-count cap, honoring the `SRLPROJ_CAP` environment override.
pub fn effective_cap(flag: Option<u32>) -> u32 {
    if let Some(cap) = flag {
        return cap;
    }
    std::env::var("SRLPROJ_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_ATOM_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_model;
    use crate::worlds::enumerate_worlds;

    fn model(text: &str, dialect: Dialect) -> ModelSpec {
        parse_model(text, dialect).unwrap()
    }

    fn dist(text: &str, dialect: Dialect, n: usize, theta: &ParamVector) -> Distribution {
        let spec = model(text, dialect);
        Model::Spec(spec).distribution(n, theta, 30).unwrap()
    }

    #[test]
    fn er_half_is_uniform() {
        let d = dist("e(X,Y) <- 0.5;", Dialect::Rbn, 2, &ParamVector::new());
        for &p in d.probs() {
            assert!((p - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_param_n1_quarter_each() {
        let theta = ParamVector::from_pairs(&[("theta", 0.5)]);
        let d = dist("red(X) <- $theta;\nedge(X,Y) <- $theta;", Dialect::Rbn, 1, &theta);
        assert_eq!(d.probs().len(), 4);
        for &p in d.probs() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_or_no_edges_forces_a_false() {
        let text = "edge(X,Y) <- 0.5;\na(X) <- noisy-or{ if edge(X,Y) : $theta | Y };";
        for theta_v in [0.1, 0.5, 0.9] {
            let theta = ParamVector::from_pairs(&[("theta", theta_v)]);
            let d = dist(text, Dialect::Rbn, 2, &theta);
            let q = Query::parse("a(0)", "!edge(0,0), !edge(0,1), !edge(1,0), !edge(1,1)").unwrap();
            assert!(query(&d, &q).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn rbn_first_stratum_marginal_matches_formula() {
        let theta = ParamVector::from_pairs(&[("t", 0.3)]);
        let d = dist("red(X) <- $t;\nedge(X,Y) <- if red(X) : 0.9 else : 0.1;", Dialect::Rbn, 2, &theta);
        let q = Query::parse("red(0)", "").unwrap();
        assert!((query(&d, &q).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn mln_zero_weights_uniform() {
        let d = dist("a(X) ^ e(X,Y) :: 0;", Dialect::Mln, 2, &ParamVector::new());
        for &p in d.probs() {
            assert!((p - 1.0 / 64.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mln_example_conditional_is_half_at_n2() {
        for w in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let theta = ParamVector::from_pairs(&[("w", w)]);
            let d = dist("a(X) ^ e(X,Y) :: $w;", Dialect::Mln, 2, &theta);
            let q = Query::parse("a(0)", "!e(0,0), !e(0,1), !e(1,0), !e(1,1)").unwrap();
            assert!((query(&d, &q).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    /// Independent oracle: enumerate worlds explicitly and recount each
    /// formula's satisfied substitutions with nested loops over tuples.
    fn mln_oracle(text: &str, n: usize, theta: &ParamVector) -> Vec<f64> {
        let ModelSpec::Mln(spec) = model(text, Dialect::Mln) else { panic!() };
        let sig = ModelSpec::Mln(spec.clone()).signature().unwrap();
        let worlds: Vec<_> = enumerate_worlds(&sig, n, 30).unwrap().collect();
        fn sat(f: &MlnFormula, w: &World, env: &BTreeMap<&str, usize>) -> bool {
            match f {
                MlnFormula::Atom(a) => {
                    let rel = w.signature().relation_index(&a.relation).unwrap();
                    let args: Vec<usize> = a.args.iter().map(|v| env[v.as_str()]).collect();
                    w.get(rel, &args)
                }
                MlnFormula::Not(x) => !sat(x, w, env),
                MlnFormula::And(a, b) => sat(a, w, env) && sat(b, w, env),
                MlnFormula::Or(a, b) => sat(a, w, env) || sat(b, w, env),
            }
        }
        let weights: Vec<f64> = worlds
            .iter()
            .map(|w| {
                let mut lw = 0.0;
                for (formula, weight) in &spec.formulas {
                    let wv = match weight {
                        WeightExpr::Const(c) => *c,
                        WeightExpr::Param(p) => theta.get(p).unwrap(),
                    };
                    for env in substitutions(&formula.variables(), n) {
                        if sat(formula, w, &env) {
                            lw += wv;
                        }
                    }
                }
                lw.exp()
            })
            .collect();
        let z: f64 = weights.iter().sum();
        weights.into_iter().map(|x| x / z).collect()
    }

    #[test]
    fn mln_engine_matches_double_entry_oracle() {
        let homophily = "edge(X,Y) ^ red(X) ^ red(Y) :: 1.2;\nedge(X,Y) ^ red(X) ^ !red(Y) :: -0.2;";
        for n in [1, 2] {
            let d = dist(homophily, Dialect::Mln, n, &ParamVector::new());
            let oracle = mln_oracle(homophily, n, &ParamVector::new());
            for (a, b) in d.probs().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn problog_red_edge_probabilities() {
        let text = "0.8 :: red(X).\nedge(X,Y) :- red(X), red(Y).";
        let d = dist(text, Dialect::Problog, 1, &ParamVector::new());
        let sig = d.signature().clone();
        // {red(0), edge(0,0)} -> 0.8; {} -> 0.2; others 0
        let mut full = World::empty(sig.clone(), 1).unwrap();
        full.set(0, &[0], true);
        full.set(1, &[0, 0], true);
        assert!((d.prob(&full) - 0.8).abs() < 1e-12);
        assert!((d.probs()[0] - 0.2).abs() < 1e-12);
        assert!((d.total() - 1.0).abs() < 1e-12);

        let d2 = dist(text, Dialect::Problog, 2, &ParamVector::new());
        let sig2 = d2.signature().clone();
        let mut all = World::empty(sig2, 2).unwrap();
        for i in 0..2 {
            all.set(0, &[i], true);
            for j in 0..2 {
                all.set(1, &[i, j], true);
            }
        }
        assert!((d2.prob(&all) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn problog_latent_rule_projection() {
        let text = "0.8 :: red(X).\n0.5 :: rule(X,Y).\n\
                    edge(X,Y) :- red(X), red(Y), rule(X,Y).\n\
                    observable red/1.\nobservable edge/2.";
        let ModelSpec::Problog(spec) = model(text, Dialect::Problog) else { panic!() };
        let sig = ModelSpec::Problog(spec.clone()).signature().unwrap();
        let d = problog_distribution(&spec, sig, 2, &ParamVector::new(), 30, true).unwrap();
        assert_eq!(d.signature().relations().len(), 2);
        let q = Query::parse("edge(0,1)", "red(0), red(1)").unwrap();
        assert!((query(&d, &q).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn query_uniform_and_block_model() {
        let sig = crate::worlds::signature_of(&[("red", 1)]);
        let uniform = Distribution::uniform(sig, 3, 30).unwrap();
        let q = Query::parse("red(0)", "").unwrap();
        assert!((query(&uniform, &q).unwrap() - 0.5).abs() < 1e-12);

        let block = "red(X) <- 0.3;\nblack(X) <- if red(X) : 0 else : 0.5;\n\
                     edge(X,Y) <- if red(X) & red(Y) : 0.7 else : if black(X) & black(Y) : 0.4 else : 0.05;";
        let d = dist(block, Dialect::Rbn, 2, &ParamVector::new());
        let q = Query::parse("edge(0,1)", "red(0), red(1)").unwrap();
        assert!((query(&d, &q).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn contradictory_evidence_is_zero_evidence() {
        let sig = crate::worlds::signature_of(&[("red", 1)]);
        let uniform = Distribution::uniform(sig, 2, 30).unwrap();
        let q = Query::parse("red(0)", "red(1), !red(1)").unwrap();
        assert!(matches!(query(&uniform, &q), Err(Error::ZeroEvidence)));
    }

    #[test]
    fn clique_empty_mixture() {
        let d = Model::CliqueEmpty.distribution(2, &ParamVector::new(), 30).unwrap();
        assert!((d.probs()[0] - 0.5).abs() < 1e-12);
        assert!((d.probs()[15] - 0.5).abs() < 1e-12);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_parameter_is_reported() {
        let err = Model::parse("red(X) <- $t;", Dialect::Rbn)
            .unwrap()
            .distribution(2, &ParamVector::new(), 30)
            .unwrap_err();
        assert!(matches!(err, Error::MissingParameter(name) if name == "t"));
    }

    #[test]
    fn distributions_sum_to_one() {
        let cases: [(&str, Dialect); 3] = [
            ("red(X) <- 0.3;\nedge(X,Y) <- if red(X) & red(Y) : 0.7 else : 0.05;", Dialect::Rbn),
            ("edge(X,Y) ^ red(X) ^ red(Y) :: 1.2;", Dialect::Mln),
            ("0.8 :: red(X).\nedge(X,Y) :- red(X), red(Y).", Dialect::Problog),
        ];
        for (text, dialect) in cases {
            for n in 1..=2 {
                let d = dist(text, dialect, n, &ParamVector::new());
                assert!((d.total() - 1.0).abs() < 1e-9, "{dialect} at n={n}");
            }
        }
    }
}
