//! Empirical exchangeability and projectivity testing by exact
//! marginalization, plus the two non-projectivity witness curves.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::lang::Dialect;
use crate::semantics::{query, Model, ParamVector, Query};
use crate::worlds::{permutation_atom_map, permute_encoding, Distribution, Permutation};

/// Deviation of one (n, m) marginalization pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairDeviation {
    pub n: usize,
    pub m: usize,
    pub deviation: f64,
}

/// Outcome of an empirical projectivity test.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectivityReport {
    pub pairs: Vec<PairDeviation>,
    pub exchangeable: bool,
    pub projective: bool,
    pub tolerance: f64,
}

impl ProjectivityReport {
    /// Largest marginalization deviation over all tested pairs.
    pub fn max_deviation(&self) -> f64 {
        self.pairs.iter().map(|p| p.deviation).fold(0.0, f64::max)
    }
}

/// Invariance of the table under every adjacent transposition (these
/// generate the full symmetric group). Returns the worst violation.
pub fn test_exchangeable(dist: &Distribution) -> (bool, f64) {
    let n = dist.domain_size();
    let sig = dist.signature();
    let mut worst = 0.0f64;
    for i in 0..n.saturating_sub(1) {
        let tau = Permutation::transposition(n, i);
        let map = permutation_atom_map(sig, n, &tau);
        for (enc, &p) in dist.probs().iter().enumerate() {
            let image = permute_encoding(&map, enc as u64);
            let diff = (p - dist.probs()[image as usize]).abs();
            worst = worst.max(diff);
        }
    }
    (worst <= 1e-12, worst)
}

/// Checks `Q^(n)↓[m] = Q^(m)` for every `1 ≤ m < n ≤ n_max`, plus
/// exchangeability of every `Q^(n)`.
pub fn test_projective(
    model: &Model,
    theta: &ParamVector,
    n_max: usize,
    tol: f64,
    cap: u32,
) -> Result<ProjectivityReport> {
    let dists: Vec<Distribution> = (1..=n_max)
        .map(|n| model.distribution(n, theta, cap))
        .collect::<Result<_>>()?;
    let mut exchangeable = true;
    for d in &dists {
        let (ok, _) = test_exchangeable(d);
        exchangeable = exchangeable && ok;
    }
    let pairs: Vec<PairDeviation> = (1..=n_max)
        .flat_map(|n| (1..n).map(move |m| (n, m)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(n, m)| {
            let marg = dists[n - 1].marginalize(m)?;
            Ok(PairDeviation { n, m, deviation: marg.max_deviation(&dists[m - 1]) })
        })
        .collect::<Result<_>>()?;
    let projective = exchangeable && pairs.iter().all(|p| p.deviation <= tol);
    Ok(ProjectivityReport { pairs, exchangeable, projective, tolerance: tol })
}

/// `Q^(n)_w(a(0) | node 0 and 1 share no e-edges)` for the one-formula
/// model `a(X) ^ e(X,Y) :: w`.
pub fn q_mln(n: usize, w: f64) -> Result<f64> {
    let model = Model::parse(crate::fixtures::EQ6_MLN, Dialect::Mln)?;
    let dist = model.distribution(n, &ParamVector::from_pairs(&[("w", w)]), 30)?;
    let q = Query::parse("a(0)", "!e(0,0), !e(0,1), !e(1,0), !e(1,1)")?;
    query(&dist, &q)
}

/// Same conditional for the noisy-or model (`edge <- 0.5; a(X) <-
/// noisy-or{ if edge(X,Y) : θ | Y }`).
pub fn q_rbn(n: usize, theta: f64) -> Result<f64> {
    let model = Model::parse(crate::fixtures::NOISYOR_RBN, Dialect::Rbn)?;
    let dist = model.distribution(n, &ParamVector::from_pairs(&[("theta", theta)]), 30)?;
    let q = Query::parse("a(0)", "!edge(0,0), !edge(0,1), !edge(1,0), !edge(1,1)")?;
    query(&dist, &q)
}

/// A one-parameter family of distributions, e.g. a model with a single
/// free parameter or a parameter that is rescaled with the domain size.
pub struct ParametricFamily {
    pub name: String,
    builder: Box<dyn Fn(usize, f64) -> Result<Distribution> + Sync>,
}

impl ParametricFamily {
    pub fn new(
        name: impl Into<String>,
        builder: impl Fn(usize, f64) -> Result<Distribution> + Sync + 'static,
    ) -> ParametricFamily {
        ParametricFamily { name: name.into(), builder: Box::new(builder) }
    }

    /// A family from a model with exactly one free parameter.
    pub fn from_model(name: impl Into<String>, model: Model, cap: u32) -> Result<ParametricFamily> {
        let params = model.free_parameters();
        let [param] = params.as_slice() else {
            return Err(crate::error::Error::InvalidModel(format!(
                "family needs exactly one free parameter, found {params:?}"
            )));
        };
        let param = param.clone();
        Ok(ParametricFamily::new(name, move |n, theta| {
            model.distribution(n, &ParamVector::from_pairs(&[(&param, theta)]), cap)
        }))
    }

    /// Sparse random graph: edge probability `θ/n` shrinks with `n`.
    pub fn sparse_er(cap: u32) -> Result<ParametricFamily> {
        let model = Model::parse(crate::fixtures::ER_RBN, Dialect::Rbn)?;
        Ok(ParametricFamily::new("sparse-er", move |n, theta| {
            model.distribution(n, &ParamVector::from_pairs(&[("p", theta / n as f64)]), cap)
        }))
    }

    pub fn distribution(&self, n: usize, theta: f64) -> Result<Distribution> {
        (self.builder)(n, theta)
    }
}

/// Grid certificate for (non-)structural projectivity: the smallest
/// `‖Q^(n)_θ↓[m] − Q^(m)_{θ'}‖∞` over the candidate grid for `θ'`.
#[derive(Debug, Clone, Serialize)]
pub struct StructuralWitness {
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub theta: f64,
    pub best_theta_prime: f64,
    pub min_deviation: f64,
    /// true when the minimum stays ≥ 10 × `tol`: no grid point recovers
    /// the marginal, certifying a counterexample on this grid
    pub counterexample: bool,
    pub tolerance: f64,
}

pub fn structural_witness(
    family: &ParametricFamily,
    n: usize,
    m: usize,
    theta: f64,
    param_grid: &[f64],
    tol: f64,
) -> Result<StructuralWitness> {
    let marg = family.distribution(n, theta)?.marginalize(m)?;
    let mut best = (f64::INFINITY, f64::NAN);
    for &cand in param_grid {
        let dev = family.distribution(m, cand)?.max_deviation(&marg);
        if dev < best.0 {
            best = (dev, cand);
        }
    }
    Ok(StructuralWitness {
        family: family.name.clone(),
        n,
        m,
        theta,
        best_theta_prime: best.1,
        min_deviation: best.0,
        counterexample: best.0 >= 10.0 * tol,
        tolerance: tol,
    })
}
