//! Likelihood functions, expected sample log-likelihood under induced
//! subgraph sampling, deterministic maximum-likelihood optimization, and
//! checkers for estimator unbiasedness, consistency, and the
//! level-separable decomposition of the log-likelihood.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lang::{check_rbn_projective, ModelSpec, ProbFormula, RbnSpec, WeightExpr};
use crate::semantics::{compile_rbn, rbn_world_prob, Model, ParamVector};
use crate::stats::enumerate_subsamples;
use crate::worlds::{factorial, sorted_subsets, Signature, World};

/// Lower clamp for probability parameters during optimization; the upper
/// clamp is `1 − PROB_CLAMP`.
pub const PROB_CLAMP: f64 = 1e-9;
/// Weight parameters are searched over `[−WEIGHT_BOUND, WEIGHT_BOUND]`.
pub const WEIGHT_BOUND: f64 = 10.0;

/// Rewrites `world` over `sig`, matching relations by name. Needed when a
/// world file declares the same relations in a different order.
pub fn align_world(world: &World, sig: &Arc<Signature>) -> Result<World> {
    if world.signature() == sig {
        return Ok(world.clone());
    }
    let n = world.domain_size();
    let mut out = World::empty(sig.clone(), n)?;
    for atom in 0..world.atom_count() {
        if !world.get_index(atom) {
            continue;
        }
        let ga = world.signature().atom_at(n, atom);
        let name = &world.signature().relations()[ga.relation].name;
        let rel = sig
            .relation_index(name)
            .ok_or_else(|| Error::InvalidWorld(format!("relation {name} not in the model")))?;
        out.set(rel, &ga.args, true);
    }
    Ok(out)
}

/// `log Q^(m)_θ(ω)`; `−∞` when the world has probability zero.
pub fn loglik(model: &Model, world: &World, theta: &ParamVector, cap: u32) -> Result<f64> {
    let n = world.domain_size();
    match model {
        // fast path: the chain rule gives the probability of a single
        // world without tabulating the full distribution
        Model::Spec(ModelSpec::Rbn(spec)) => {
            let sig = model.signature()?;
            let aligned = align_world(world, &sig)?;
            let compiled = compile_rbn(spec, &sig, n, theta)?;
            Ok(rbn_world_prob(&compiled, aligned.encoding()).ln())
        }
        Model::Spec(ModelSpec::Problog(spec)) => {
            let full = model.signature()?;
            let project = !spec.observable.is_empty()
                && spec.observable.len() < full.relations().len();
            let dist = crate::semantics::problog_distribution(spec, full, n, theta, cap, project)?;
            let aligned = align_world(world, dist.signature())?;
            Ok(dist.prob(&aligned).ln())
        }
        _ => {
            let dist = model.distribution(n, theta, cap)?;
            let aligned = align_world(world, dist.signature())?;
            Ok(dist.prob(&aligned).ln())
        }
    }
}

/// `log Q^(n)_θ({ω' ∈ Ω^(n) : ω'↓[m] = ω})`.
pub fn marginal_loglik(
    model: &Model,
    world: &World,
    n: usize,
    theta: &ParamVector,
    cap: u32,
) -> Result<f64> {
    let m = world.domain_size();
    if m > n {
        return Err(Error::Dimension(format!("m = {m} exceeds n = {n}")));
    }
    let dist = model.distribution(n, theta, cap)?.marginalize(m)?;
    let aligned = align_world(world, dist.signature())?;
    Ok(dist.prob(&aligned).ln())
}

/// Mean log-likelihood of the substructures induced by all `C(n,m)`
/// subsets of the source world's domain.
pub fn expected_sample_loglik(
    model: &Model,
    source: &World,
    m: usize,
    theta: &ParamVector,
    cap: u32,
) -> Result<f64> {
    let samples = enumerate_subsamples(source, m)?;
    let mut total = 0.0;
    for (_, induced) in &samples {
        total += loglik(model, induced, theta, cap)?;
    }
    Ok(total / samples.len() as f64)
}

/// The objective handed to the optimizer.
#[derive(Debug, Clone)]
pub enum Objective {
    /// Eq.-style exact likelihood of one observed world.
    Exact { world: World },
    /// Marginal likelihood of a size-m world embedded in a size-n model.
    Marginal { world: World, n: usize },
    /// Expected log-likelihood over induced subsamples of a source world.
    ExpectedSubsample { source: World, m: usize },
}

impl Objective {
    pub fn eval(&self, model: &Model, theta: &ParamVector, cap: u32) -> Result<f64> {
        match self {
            Objective::Exact { world } => loglik(model, world, theta, cap),
            Objective::Marginal { world, n } => marginal_loglik(model, world, *n, theta, cap),
            Objective::ExpectedSubsample { source, m } => {
                expected_sample_loglik(model, source, *m, theta, cap)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MleResult {
    pub theta: BTreeMap<String, f64>,
    pub loglik: f64,
    /// names of parameters that ended on a clamp
    pub boundary: Vec<String>,
    pub converged: bool,
}

impl MleResult {
    pub fn theta_vector(&self) -> ParamVector {
        ParamVector(self.theta.clone())
    }
}

#[derive(Debug, Clone, Copy)]
struct ParamRange {
    lo: f64,
    hi: f64,
}

fn param_range(model: &Model) -> ParamRange {
    match model {
        Model::Spec(ModelSpec::Mln(_)) => ParamRange { lo: -WEIGHT_BOUND, hi: WEIGHT_BOUND },
        _ => ParamRange { lo: PROB_CLAMP, hi: 1.0 - PROB_CLAMP },
    }
}

/// Golden-section maximization of a unimodal slice on `[lo, hi]`.
fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    (lo + hi) / 2.0
}

const GRID_POINTS: usize = 101;

fn grid(range: ParamRange) -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| range.lo + (range.hi - range.lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

/// Deterministic maximization: coarse grid scan per coordinate followed
/// by golden-section refinement, cycled until stable.
pub fn mle(model: &Model, objective: &Objective, cap: u32) -> Result<MleResult> {
    let params = model.free_parameters();
    if params.is_empty() || params.len() > 8 {
        return Err(Error::InvalidModel(format!(
            "optimizer handles 1–8 parameters, model has {}",
            params.len()
        )));
    }
    let range = param_range(model);
    let mut theta = ParamVector::new();
    for p in &params {
        theta.set(p, (range.lo + range.hi) / 2.0);
    }
    let eval = |theta: &ParamVector| -> f64 {
        objective
            .eval(model, theta, cap)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut best = eval(&theta);
    if params.len() == 1 && !best.is_finite() {
        // a midpoint may genuinely have -inf likelihood only when the
        // world is impossible for every θ; confirm on the grid
        let any_finite = grid(range).iter().any(|&x| {
            let mut t = theta.clone();
            t.set(&params[0], x);
            eval(&t).is_finite()
        });
        if !any_finite {
            return Err(Error::NoMaximum);
        }
    }
    let mut converged = false;
    for _ in 0..50 {
        let before = best;
        for p in &params {
            let slice = |x: f64, theta: &ParamVector| {
                let mut t = theta.clone();
                t.set(p, x);
                eval(&t)
            };
            let pts = grid(range);
            let (mut bi, mut bv) = (0usize, f64::NEG_INFINITY);
            for (i, &x) in pts.iter().enumerate() {
                let v = slice(x, &theta);
                if v > bv {
                    (bi, bv) = (i, v);
                }
            }
            if !bv.is_finite() {
                return Err(Error::NoMaximum);
            }
            let lo = pts[bi.saturating_sub(1)];
            let hi = pts[(bi + 1).min(pts.len() - 1)];
            let x = golden_section(|x| slice(x, &theta), lo, hi);
            // keep whichever of the refined point and the grid optimum
            // scored higher (golden section assumes unimodality)
            let xv = slice(x, &theta);
            let (x, xv) = if xv >= bv { (x, xv) } else { (pts[bi], bv) };
            theta.set(p, x);
            best = xv;
        }
        if (best - before).abs() <= 1e-12 {
            converged = true;
            break;
        }
    }
    let boundary: Vec<String> = params
        .iter()
        .filter(|p| {
            let v = theta.0[p.as_str()];
            v - range.lo <= 1e-6 || range.hi - v <= 1e-6
        })
        .cloned()
        .collect();
    Ok(MleResult { theta: theta.0, loglik: best, boundary, converged })
}

/// All maximizers of a one-parameter objective, to grid resolution:
/// every refined local cluster whose value ties the global maximum
/// within `1e-9` contributes one representative point.
pub fn argmax_set(model: &Model, objective: &Objective, cap: u32) -> Result<Vec<f64>> {
    let params = model.free_parameters();
    let [param] = params.as_slice() else {
        return Err(Error::InvalidModel(
            "argmax sets are computed for one-parameter models only".into(),
        ));
    };
    let range = param_range(model);
    let eval = |x: f64| -> f64 {
        let theta = ParamVector::from_pairs(&[(param, x)]);
        objective
            .eval(model, &theta, cap)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let fine: Vec<f64> = (0..1001)
        .map(|i| range.lo + (range.hi - range.lo) * i as f64 / 1000.0)
        .collect();
    let values: Vec<f64> = fine.iter().map(|&x| eval(x)).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NoMaximum);
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < fine.len() {
        if values[i] >= max - 1e-9 {
            let start = i;
            while i + 1 < fine.len() && values[i + 1] >= max - 1e-9 {
                i += 1;
            }
            let lo = fine[start.saturating_sub(1)];
            let hi = fine[(i + 1).min(fine.len() - 1)];
            out.push(golden_section(eval, lo, hi));
        }
        i += 1;
    }
    Ok(out)
}

fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    let one_way = |xs: &[f64], ys: &[f64]| {
        xs.iter()
            .map(|x| ys.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Mean over all `C(n,m)` subsets of the per-subset maximum-likelihood
/// estimate, one coordinate at a time.
pub fn expected_argmax(model: &Model, source: &World, m: usize, cap: u32) -> Result<ParamVector> {
    let params = model.free_parameters();
    let samples = enumerate_subsamples(source, m)?;
    let mut sums: BTreeMap<String, f64> = params.iter().map(|p| (p.clone(), 0.0)).collect();
    for (_, induced) in &samples {
        let fit = mle(model, &Objective::Exact { world: induced.clone() }, cap)?;
        for p in &params {
            let mut v = fit.theta[p.as_str()];
            if fit.boundary.contains(p) {
                // a clamp hit stands for the true boundary optimum
                v = v.round();
            }
            *sums.get_mut(p.as_str()).unwrap() += v;
        }
    }
    let count = samples.len() as f64;
    Ok(ParamVector(sums.into_iter().map(|(k, v)| (k, v / count)).collect()))
}

/// One estimator-property check, serialized as `{"lhs":…,"rhs":…,"pass":…}`.
#[derive(Debug, Clone, Serialize)]
pub struct EqCheck {
    pub lhs: BTreeMap<String, f64>,
    pub rhs: BTreeMap<String, f64>,
    pub distance: f64,
    pub pass: bool,
}

const EQ_CHECK_TOL: f64 = 1e-4;

fn eq_check(lhs: ParamVector, rhs: ParamVector) -> EqCheck {
    let distance = lhs
        .0
        .iter()
        .map(|(k, &v)| (v - rhs.0[k.as_str()]).abs())
        .fold(0.0, f64::max);
    EqCheck { lhs: lhs.0, rhs: rhs.0, distance, pass: distance <= EQ_CHECK_TOL }
}

fn snap_boundaries(fit: &MleResult) -> ParamVector {
    let mut theta = fit.theta.clone();
    for p in &fit.boundary {
        let v = theta[p.as_str()];
        theta.insert(p.clone(), v.round());
    }
    ParamVector(theta)
}

/// Unbiasedness: does the mean subsample estimate match the full-world
/// estimate? For one-parameter models the comparison is between argmax
/// sets (Hausdorff distance); otherwise between point estimates.
pub fn check_unbiasedness(model: &Model, source: &World, m: usize, cap: u32) -> Result<EqCheck> {
    let lhs = expected_argmax(model, source, m, cap)?;
    let full = mle(model, &Objective::Exact { world: source.clone() }, cap)?;
    Ok(eq_check(lhs, snap_boundaries(&full)))
}

/// Consistency: does maximizing the expected sample log-likelihood agree
/// with maximizing the full-world log-likelihood?
pub fn check_consistency(model: &Model, source: &World, m: usize, cap: u32) -> Result<EqCheck> {
    let expected = Objective::ExpectedSubsample { source: source.clone(), m };
    let exact = Objective::Exact { world: source.clone() };
    if model.free_parameters().len() == 1 {
        let name = model.free_parameters().remove(0);
        let lhs_set = argmax_set(model, &expected, cap)?;
        let rhs_set = argmax_set(model, &exact, cap)?;
        let distance = hausdorff(&lhs_set, &rhs_set);
        let point = |set: &[f64]| {
            let mut m = BTreeMap::new();
            m.insert(name.clone(), snap_clamp(set[0]));
            m
        };
        return Ok(EqCheck {
            lhs: point(&lhs_set),
            rhs: point(&rhs_set),
            distance,
            pass: distance <= EQ_CHECK_TOL,
        });
    }
    let lhs = mle(model, &expected, cap)?;
    let rhs = mle(model, &exact, cap)?;
    Ok(eq_check(snap_boundaries(&lhs), snap_boundaries(&rhs)))
}

fn snap_clamp(v: f64) -> f64 {
    if v <= PROB_CLAMP * 2.0 {
        0.0
    } else if v >= 1.0 - PROB_CLAMP * 2.0 {
        1.0
    } else {
        v
    }
}

// ---------------------------------------------------- decomposition

/// A level-separable form of the log-likelihood of a fragment model:
/// `log Q^(m)(ω) = Σ_l c(m,l) Σ_{ω̃ ∈ Ω^(l)} C_ω̃(ω) · f_ω̃(θ)`
/// with `c(m,l) = 1` and `f_ω̃` averaging, over the `l!` orderings, the
/// log-probabilities of the ground atoms whose arguments use all of `[l]`.
#[derive(Debug, Clone)]
pub struct LogLikDecomposition {
    spec: RbnSpec,
    sig: Arc<Signature>,
    /// largest relation arity; levels run `1..=k`
    pub k: usize,
    pub m: usize,
    /// parameters declared at each level: those of formulas whose head
    /// arity equals the level
    pub declared_params: Vec<Vec<String>>,
}

impl LogLikDecomposition {
    pub fn c(&self, _m: usize, _l: usize) -> f64 {
        1.0
    }

    /// `f_ω̃(θ)` for the pattern world with the given encoding over `[l]`.
    pub fn f(&self, l: usize, encoding: u64, theta: &ParamVector) -> Result<f64> {
        let compiled = compile_rbn(&self.spec, &self.sig, l, theta)?;
        let mut total = 0.0;
        for atom in 0..self.sig.atom_count(l) {
            let ga = self.sig.atom_at(l, atom);
            let support: std::collections::BTreeSet<usize> = ga.args.iter().copied().collect();
            if support.len() != l {
                continue;
            }
            let p = compiled[atom].prob_true(encoding);
            let p = if encoding >> atom & 1 == 1 { p } else { 1.0 - p };
            total += p.ln();
        }
        Ok(total / factorial(l) as f64)
    }

    /// The level-`l` term `Σ_{ω̃} C_ω̃(ω) f_ω̃(θ)`.
    pub fn level_term(&self, world: &World, l: usize, theta: &ParamVector) -> Result<f64> {
        let stats = crate::stats::complete_counts(world, l)?;
        let mut total = 0.0;
        for enc in 0..1u64 << self.sig.atom_count(l) {
            let count = stats.get(l, enc);
            if count == 0 {
                continue;
            }
            total += count as f64 * self.f(l, enc, theta)?;
        }
        Ok(total)
    }

    /// Reassembles the full log-likelihood from the levels.
    pub fn reassemble(&self, world: &World, theta: &ParamVector) -> Result<f64> {
        let m = world.domain_size();
        let mut total = 0.0;
        for l in 1..=self.k {
            total += self.c(m, l) * self.level_term(world, l, theta)?;
        }
        Ok(total)
    }
}

/// Builds the decomposition, rejecting models outside the fragment and
/// models whose parameters occur in more than one place.
pub fn decompose_loglik(model: &Model, m: usize) -> Result<LogLikDecomposition> {
    let Model::Spec(ModelSpec::Rbn(spec)) = model else {
        return Err(Error::NotInFragment(
            "decomposition is defined for combination-function-free models".into(),
        ));
    };
    let report = check_rbn_projective(spec);
    if !report.pass {
        return Err(Error::NotInFragment(report.violations[0].message.clone()));
    }
    let sig = model.signature()?;
    let k = sig.max_arity();
    if m < k {
        return Err(Error::Dimension(format!(
            "need m ≥ largest arity {k}, got m = {m}"
        )));
    }
    // each parameter may occur exactly once in the whole spec
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    fn walk(pf: &ProbFormula, idx: usize, seen: &mut BTreeMap<String, usize>) -> Result<()> {
        match pf {
            ProbFormula::Const(_) => Ok(()),
            ProbFormula::Param(p) => match seen.insert(p.clone(), idx) {
                Some(_) => Err(Error::Separability(format!(
                    "parameter {p} occurs more than once; its level terms cannot vary independently"
                ))),
                None => Ok(()),
            },
            ProbFormula::IfElse { then, els, .. } => {
                walk(then, idx, seen)?;
                walk(els, idx, seen)
            }
            ProbFormula::NoisyOr { prob, .. } => walk(prob, idx, seen),
        }
    }
    for (idx, formula) in spec.formulas.iter().enumerate() {
        walk(&formula.body, idx, &mut seen)?;
    }
    let declared_params: Vec<Vec<String>> = (1..=k)
        .map(|l| {
            let mut params: Vec<String> = seen
                .iter()
                .filter(|(_, &idx)| spec.formulas[idx].head.args.len() == l)
                .map(|(p, _)| p.clone())
                .collect();
            params.sort();
            params
        })
        .collect();
    Ok(LogLikDecomposition { spec: spec.clone(), sig, k, m, declared_params })
}

/// Verdict of the level-splitting check behind the consistency result.
#[derive(Debug, Clone, Serialize)]
pub struct Prop6Report {
    pub consistency: EqCheck,
    /// worst per-level gap between the subset-averaged level term and
    /// the rescaled full-world level term
    pub max_level_gap: f64,
    pub pass: bool,
}

/// Checks (i) consistency of the estimator and (ii) the per-level
/// identity `E_ω[logL_l^{(m)}] = (m!(n−l)!)/((m−l)!n!)·logL_l^{(n)}`
/// at a fixed set of parameter probes.
pub fn verify_prop6(model: &Model, source: &World, m: usize, cap: u32) -> Result<Prop6Report> {
    let decomp = decompose_loglik(model, m)?;
    let n = source.domain_size();
    let source = align_world(source, &decomp.sig)?;
    let params = model.free_parameters();
    let probes: [f64; 3] = [0.15, 0.3, 0.6];
    let mut max_gap = 0.0f64;
    for (pi, &base) in probes.iter().enumerate() {
        let mut theta = ParamVector::new();
        for (i, p) in params.iter().enumerate() {
            theta.set(p, base + 0.05 * ((i + pi) % 3) as f64);
        }
        for l in 1..=decomp.k {
            let samples = enumerate_subsamples(&source, m)?;
            let mut lhs = 0.0;
            for (_, induced) in &samples {
                lhs += decomp.level_term(induced, l, &theta)?;
            }
            lhs /= samples.len() as f64;
            let scale = (factorial(m) * factorial(n - l)) as f64
                / (factorial(m - l) * factorial(n)) as f64;
            let rhs = scale * decomp.level_term(&source, l, &theta)?;
            max_gap = max_gap.max((lhs - rhs).abs());
        }
    }
    let consistency = check_consistency(model, &source, m, cap)?;
    let pass = consistency.pass && max_gap <= 1e-9;
    Ok(Prop6Report { consistency, max_level_gap: max_gap, pass })
}

// ------------------------------------------------- ProbLog learning

/// Closed-form learning for fully observable ProbLog models: each
/// labeled-fact probability is the empirical frequency of its relation's
/// true groundings. Keyed by parameter name, or by relation name for
/// facts with constant labels.
pub fn problog_complete_mle(model: &Model, world: &World) -> Result<ParamVector> {
    let Model::Spec(ModelSpec::Problog(spec)) = model else {
        return Err(Error::InvalidModel("closed-form learning needs a fact-labeled model".into()));
    };
    let sig = model.signature()?;
    if !spec.observable.is_empty() {
        let latent: Vec<&str> = sig
            .relations()
            .iter()
            .map(|r| r.name.as_str())
            .filter(|name| !spec.is_observable(name))
            .collect();
        if !latent.is_empty() {
            return Err(Error::NotFullyObservable(format!(
                "relations {} are latent, so the likelihood does not decompose over facts",
                latent.join(", ")
            )));
        }
    }
    let world = align_world(world, &sig)?;
    let n = world.domain_size();
    // the observed world must be closed under the clauses: recompute the
    // minimal model from the fact relations and compare
    let theta_any = {
        let mut t = ParamVector::new();
        for p in model.free_parameters() {
            t.set(&p, 0.5);
        }
        t
    };
    let dist =
        crate::semantics::problog_distribution(spec, sig.clone(), n, &theta_any, 63, false)?;
    if dist.prob(&world) == 0.0 {
        return Err(Error::ZeroProbabilityWorld(format!(
            "world is not a minimal model of its facts:\n{}",
            world.to_text()
        )));
    }
    let mut out = ParamVector::new();
    for (label, atom) in &spec.facts {
        let rel = sig.relation_index(&atom.relation).unwrap();
        let block = n.pow(atom.args.len() as u32);
        let freq = world.count_true(rel) as f64 / block as f64;
        let key = match label {
            WeightExpr::Param(p) => p.clone(),
            WeightExpr::Const(_) => atom.relation.clone(),
        };
        out.set(&key, freq);
    }
    Ok(out)
}

/// All `C(n,m)` subsets, exposed for reports.
pub fn subset_count(n: usize, m: usize) -> usize {
    sorted_subsets(n, m).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lang::Dialect;

    fn shared_param() -> Model {
        Model::parse(fixtures::SHARED_PARAM_RBN, Dialect::Rbn).unwrap()
    }

    fn half_red() -> World {
        World::parse_text(fixtures::HALF_RED_N4_WORLD, None).unwrap()
    }

    fn theta1(v: f64) -> ParamVector {
        ParamVector::from_pairs(&[("theta", v)])
    }

    #[test]
    fn loglik_closed_forms() {
        let model = shared_param();
        let sig = model.signature().unwrap();
        let empty2 = World::empty(sig.clone(), 2).unwrap();
        let v = loglik(&model, &empty2, &theta1(0.5), 30).unwrap();
        assert!((v - 6.0 * 0.5f64.ln()).abs() < 1e-12);

        let mut two_red = World::empty(sig, 2).unwrap();
        two_red.set(0, &[0], true);
        two_red.set(0, &[1], true);
        for t in [0.1, 0.3, 0.7] {
            let v = loglik(&model, &two_red, &theta1(t), 30).unwrap();
            assert!((v - (2.0 * t.ln() + 4.0 * (1.0 - t).ln())).abs() < 1e-12);
        }

        let er = Model::parse("e(X,Y) <- $p;", Dialect::Rbn).unwrap();
        let sig = er.signature().unwrap();
        let k2 = World::from_encoding(sig, 2, 0b1111).unwrap();
        let v = loglik(&er, &k2, &ParamVector::from_pairs(&[("p", 0.25)]), 30).unwrap();
        assert!((v - 4.0 * 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn marginal_equals_exact_for_projective_models() {
        let er = Model::parse("e(X,Y) <- 0.3;", Dialect::Rbn).unwrap();
        let sig = er.signature().unwrap();
        let t = ParamVector::new();
        for enc in 0..16u64 {
            let w = World::from_encoding(sig.clone(), 2, enc).unwrap();
            let exact = loglik(&er, &w, &t, 32).unwrap();
            for n in [2, 3, 4] {
                let marg = marginal_loglik(&er, &w, n, &t, 32).unwrap();
                assert!((marg - exact).abs() < 1e-9, "n={n} enc={enc}");
            }
        }
    }

    #[test]
    fn marginal_differs_for_homophily() {
        let model = Model::parse(fixtures::HOMOPHILY_MLN, Dialect::Mln).unwrap();
        let sig = model.signature().unwrap();
        let t = ParamVector::new();
        let mut any_gap = false;
        for enc in 0..64u64 {
            let w = World::from_encoding(sig.clone(), 2, enc).unwrap();
            let exact = loglik(&model, &w, &t, 32).unwrap();
            let marg = marginal_loglik(&model, &w, 3, &t, 32).unwrap();
            if (marg - exact).abs() > 1e-6 {
                any_gap = true;
            }
        }
        assert!(any_gap);
    }

    #[test]
    fn expected_sample_loglik_closed_form() {
        // subsets of the half-red world: 1 both-red, 4 one-red, 1 none,
        // giving the average log-likelihood lθ + 5·log(1−θ)
        let model = shared_param();
        let source = half_red();
        for i in 1..=20 {
            let t = i as f64 / 21.0;
            let got = expected_sample_loglik(&model, &source, 2, &theta1(t), 30).unwrap();
            let want = t.ln() + 5.0 * (1.0 - t).ln();
            assert!((got - want).abs() < 1e-12, "theta={t}");
        }
    }

    #[test]
    fn expected_sample_loglik_at_m_equals_n() {
        let model = shared_param();
        let source = half_red();
        let t = theta1(0.2);
        let full = loglik(&model, &source, &t, 30).unwrap();
        let avg = expected_sample_loglik(&model, &source, 4, &t, 30).unwrap();
        assert!((avg - full).abs() < 1e-12);
    }

    #[test]
    fn mle_shared_param_numbers() {
        let model = shared_param();
        let source = half_red();
        let sub = Objective::ExpectedSubsample { source: source.clone(), m: 2 };
        let fit = mle(&model, &sub, 30).unwrap();
        assert!((fit.theta["theta"] - 1.0 / 6.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.converged);

        let full = Objective::Exact { world: source.clone() };
        let fit = mle(&model, &full, 30).unwrap();
        assert!((fit.theta["theta"] - 0.1).abs() < 1e-6, "{fit:?}");

        let ea = expected_argmax(&model, &source, 2, 30).unwrap();
        assert!((ea.0["theta"] - 1.0 / 6.0).abs() < 1e-5, "{ea:?}");
    }

    #[test]
    fn mle_recovers_bernoulli_frequency() {
        let er = Model::parse("e(X,Y) <- $p;", Dialect::Rbn).unwrap();
        let sig = er.signature().unwrap();
        let w = World::from_encoding(sig, 3, 0b101100101).unwrap();
        let fit = mle(&er, &Objective::Exact { world: w }, 32).unwrap();
        assert!((fit.theta["p"] - 5.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn mle_two_param_boundary() {
        let model = Model::parse(fixtures::TWO_PARAM_RBN, Dialect::Rbn).unwrap();
        let source = half_red();
        for objective in [
            Objective::Exact { world: source.clone() },
            Objective::ExpectedSubsample { source: source.clone(), m: 2 },
        ] {
            let fit = mle(&model, &objective, 30).unwrap();
            assert!((fit.theta["theta_r"] - 0.5).abs() < 1e-6, "{fit:?}");
            assert!(fit.theta["theta_e"] <= 1e-6, "{fit:?}");
            assert_eq!(fit.boundary, vec!["theta_e".to_string()]);
        }
    }

    #[test]
    fn estimator_checks_shared_vs_two_param() {
        let source = half_red();
        let shared = shared_param();
        let eq8 = check_unbiasedness(&shared, &source, 2, 30).unwrap();
        assert!(!eq8.pass, "{eq8:?}");
        let eq9 = check_consistency(&shared, &source, 2, 30).unwrap();
        assert!(!eq9.pass, "{eq9:?}");
        assert!((eq9.lhs["theta"] - 1.0 / 6.0).abs() < 1e-4);
        assert!((eq9.rhs["theta"] - 0.1).abs() < 1e-4);

        let two = Model::parse(fixtures::TWO_PARAM_RBN, Dialect::Rbn).unwrap();
        let eq8 = check_unbiasedness(&two, &source, 2, 30).unwrap();
        assert!(eq8.pass, "{eq8:?}");
        let eq9 = check_consistency(&two, &source, 2, 30).unwrap();
        assert!(eq9.pass, "{eq9:?}");
    }

    #[test]
    fn consistency_for_er_subsamples() {
        // closed-form oracle: the Bernoulli estimate is the edge
        // frequency. Subsampling weights self-loop atoms (kept in m/n of
        // the subsets) differently from off-diagonal atoms (kept in
        // m(m−1)/(n(n−1))), so the subsample estimate matches the
        // full-world frequency exactly when the two per-group
        // frequencies coincide; this world has both at 1/2
        let er = Model::parse("e(X,Y) <- $p;", Dialect::Rbn).unwrap();
        let sig = er.signature().unwrap();
        let w = World::from_encoding(sig.clone(), 4, 0xFF).unwrap();
        assert_eq!(w.count_true(0), 8);
        let eq9 = check_consistency(&er, &w, 2, 32).unwrap();
        assert!(eq9.pass, "{eq9:?}");
        assert!((eq9.rhs["p"] - 0.5).abs() < 1e-6);

        // with mismatched group frequencies the check honestly fails:
        // the shared parameter couples the two count levels
        let skew = World::from_encoding(sig, 4, 0b1000_0100_0010_0001).unwrap();
        let eq9 = check_consistency(&er, &skew, 2, 32).unwrap();
        assert!(!eq9.pass, "{eq9:?}");
    }

    #[test]
    fn consistency_invariant_under_relabeling() {
        let model = shared_param();
        let source = half_red();
        let base = check_consistency(&model, &source, 2, 30).unwrap();
        let pi = crate::worlds::Permutation::new(vec![3, 1, 0, 2]).unwrap();
        let relabeled = source.apply_permutation(&pi);
        let other = check_consistency(&model, &relabeled, 2, 30).unwrap();
        assert_eq!(base.pass, other.pass);
        assert!((base.lhs["theta"] - other.lhs["theta"]).abs() < 1e-6);
    }

    #[test]
    fn decomposition_validates_on_all_worlds() {
        let model = Model::parse(fixtures::BLOCK_PARAM_RBN, Dialect::Rbn).unwrap();
        let decomp = decompose_loglik(&model, 2).unwrap();
        assert_eq!(decomp.k, 2);
        assert_eq!(decomp.declared_params[0], vec!["t_red".to_string()]);
        assert_eq!(
            decomp.declared_params[1],
            vec!["t_other".to_string(), "t_rr".to_string()]
        );
        let sig = model.signature().unwrap();
        let thetas = [
            ParamVector::from_pairs(&[("t_red", 0.3), ("t_rr", 0.7), ("t_other", 0.05)]),
            ParamVector::from_pairs(&[("t_red", 0.5), ("t_rr", 0.2), ("t_other", 0.6)]),
            ParamVector::from_pairs(&[("t_red", 0.9), ("t_rr", 0.4), ("t_other", 0.35)]),
            ParamVector::from_pairs(&[("t_red", 0.15), ("t_rr", 0.85), ("t_other", 0.5)]),
            ParamVector::from_pairs(&[("t_red", 0.45), ("t_rr", 0.55), ("t_other", 0.25)]),
        ];
        for theta in &thetas {
            for enc in 0..1u64 << sig.atom_count(2) {
                let w = World::from_encoding(sig.clone(), 2, enc).unwrap();
                let direct = loglik(&model, &w, theta, 30).unwrap();
                let via = decomp.reassemble(&w, theta).unwrap();
                assert!((direct - via).abs() < 1e-9, "enc={enc}");
            }
        }
    }

    #[test]
    fn decomposition_rejections() {
        let shared = shared_param();
        let err = decompose_loglik(&shared, 2).unwrap_err();
        match err {
            Error::Separability(msg) => assert!(msg.contains("theta")),
            other => panic!("expected separability error, got {other:?}"),
        }

        let noisy = Model::parse(fixtures::NOISYOR_RBN, Dialect::Rbn).unwrap();
        assert!(matches!(decompose_loglik(&noisy, 2), Err(Error::NotInFragment(_))));

        let block = Model::parse(fixtures::BLOCK_PARAM_RBN, Dialect::Rbn).unwrap();
        assert!(matches!(decompose_loglik(&block, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn prop6_holds_on_chosen_worlds() {
        let two = Model::parse(fixtures::TWO_PARAM_RBN, Dialect::Rbn).unwrap();
        let report = verify_prop6(&two, &half_red(), 2, 30).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_level_gap <= 1e-9);

        // m = n: the expectation ranges over a single subset
        let report = verify_prop6(&two, &half_red(), 4, 30).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn problog_closed_form_matches_grid_search() {
        let text = "$p :: red(X).\nedge(X,Y) :- red(X), red(Y).\nobservable red/1.\nobservable edge/2.";
        let model = Model::parse(text, Dialect::Problog).unwrap();
        let sig = model.signature().unwrap();
        let mut w = World::empty(sig, 4).unwrap();
        for i in 0..3 {
            w.set(0, &[i], true);
            for j in 0..3 {
                w.set(1, &[i, j], true);
            }
        }
        let est = problog_complete_mle(&model, &w).unwrap();
        assert!((est.0["p"] - 0.75).abs() < 1e-12);
        // oracle: 1-D optimization of the exact log-likelihood
        let fit = mle(&model, &Objective::Exact { world: w }, 63).unwrap();
        assert!((fit.theta["p"] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn problog_closed_form_boundary_and_rejections() {
        let text = "$p :: red(X).\nedge(X,Y) :- red(X), red(Y).\nobservable red/1.\nobservable edge/2.";
        let model = Model::parse(text, Dialect::Problog).unwrap();
        let sig = model.signature().unwrap();
        let mut all_red = World::empty(sig.clone(), 2).unwrap();
        for i in 0..2 {
            all_red.set(0, &[i], true);
            for j in 0..2 {
                all_red.set(1, &[i, j], true);
            }
        }
        let est = problog_complete_mle(&model, &all_red).unwrap();
        assert_eq!(est.0["p"], 1.0);

        // a red pair with a missing edge violates closure
        let mut broken = all_red.clone();
        broken.set(1, &[0, 1], false);
        assert!(matches!(
            problog_complete_mle(&model, &broken),
            Err(Error::ZeroProbabilityWorld(_))
        ));

        let latent = Model::parse(fixtures::LATENT_RULE_PLP, Dialect::Problog).unwrap();
        let empty = World::empty(Model::parse(fixtures::LATENT_RULE_PLP, Dialect::Problog)
            .unwrap()
            .signature()
            .unwrap(), 2)
        .unwrap();
        assert!(matches!(
            problog_complete_mle(&latent, &empty),
            Err(Error::NotFullyObservable(_))
        ));
    }
}
