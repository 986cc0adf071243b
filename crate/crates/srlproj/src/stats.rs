//! Ordered substructure counts, complete k-count statistics, induced
//! subgraph sampling, and exact verification of the sampling identity
//! relating counts at two scales.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::semantics::{Model, ParamVector};
use crate::worlds::{
    factorial, ordered_tuples, sorted_subsets, CountKey, World,
};

/// Number of ordered tuples of distinct elements whose induced
/// substructure equals `pattern`.
pub fn ordered_count(world: &World, pattern: &World) -> Result<u64> {
    if world.signature() != pattern.signature() {
        return Err(Error::Dimension("worlds use different signatures".into()));
    }
    let n = world.domain_size();
    let k = pattern.domain_size();
    if k > n {
        return Err(Error::Dimension(format!(
            "pattern size {k} exceeds world size {n}"
        )));
    }
    let mut count = 0;
    for tuple in ordered_tuples(n, k) {
        if world.restrict(&tuple)?.encoding() == pattern.encoding() {
            count += 1;
        }
    }
    Ok(count)
}

/// Complete k-count statistics: counts for every pattern of every size
/// `1 ≤ l ≤ k`, stored sparsely by `(l, encoding)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountStatistics {
    pub k: usize,
    pub counts: CountKey,
}

impl CountStatistics {
    pub fn get(&self, l: usize, encoding: u64) -> u64 {
        self.counts.get(&(l, encoding)).copied().unwrap_or(0)
    }

    /// `{"k":2,"levels":[{"l":1,"counts":[{"world":e,"count":c},..]},..]}`
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Entry {
            world: u64,
            count: u64,
        }
        #[derive(Serialize)]
        struct Level {
            l: usize,
            counts: Vec<Entry>,
        }
        let levels: Vec<Level> = (1..=self.k)
            .map(|l| Level {
                l,
                counts: self
                    .counts
                    .iter()
                    .filter(|((ll, _), _)| *ll == l)
                    .map(|(&(_, world), &count)| Entry { world, count })
                    .collect(),
            })
            .collect();
        serde_json::json!({ "k": self.k, "levels": levels })
    }
}

pub fn complete_counts(world: &World, k: usize) -> Result<CountStatistics> {
    let n = world.domain_size();
    if k > n {
        return Err(Error::Dimension(format!("k = {k} exceeds world size {n}")));
    }
    // |Ω^(l)| explodes with binary relations; the tuples themselves
    // bound the work, but refuse clearly outsized requests
    if world.signature().atom_count(k) > 30 {
        return Err(Error::CapExceeded {
            atoms: world.signature().atom_count(k),
            n: k,
            cap: 30,
        });
    }
    let mut counts = CountKey::new();
    for l in 1..=k {
        for tuple in ordered_tuples(n, l) {
            let enc = world.restrict(&tuple)?.encoding();
            *counts.entry((l, enc)).or_insert(0) += 1;
        }
    }
    Ok(CountStatistics { k, counts })
}

/// All `C(n,m)` induced substructures of `source`, one per sorted subset,
/// each carrying uniform weight `1/C(n,m)`.
pub fn enumerate_subsamples(source: &World, m: usize) -> Result<Vec<(Vec<usize>, World)>> {
    let n = source.domain_size();
    if m == 0 || m > n {
        return Err(Error::Dimension(format!(
            "sample size {m} invalid for world size {n}"
        )));
    }
    sorted_subsets(n, m)
        .into_iter()
        .map(|subset| {
            let induced = source.restrict(&subset)?;
            Ok((subset, induced))
        })
        .collect()
}

/// Both sides of the sampling identity
/// `E_ω[((m−k)!/m!)·C_ω̃(ω)] = ((n−k)!/n!)·C_ω̃(ω')`,
/// evaluated in exact rational arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lemma1Check {
    pub lhs: Ratio<i64>,
    pub rhs: Ratio<i64>,
}

impl Lemma1Check {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lhs": { "num": *self.lhs.numer(), "den": *self.lhs.denom() },
            "rhs": { "num": *self.rhs.numer(), "den": *self.rhs.denom() },
            "equal": self.holds(),
        })
    }
}

pub fn verify_lemma1(source: &World, m: usize, pattern: &World) -> Result<Lemma1Check> {
    let n = source.domain_size();
    let k = pattern.domain_size();
    if !(k <= m && m <= n) {
        return Err(Error::Dimension(format!(
            "need k ≤ m ≤ n, got k={k}, m={m}, n={n}"
        )));
    }
    let samples = enumerate_subsamples(source, m)?;
    let weight = Ratio::new(1i64, samples.len() as i64);
    let scale_m = Ratio::new(
        factorial(m - k) as i64,
        factorial(m) as i64,
    );
    let mut lhs = Ratio::new(0, 1);
    for (_, induced) in &samples {
        let c = ordered_count(induced, pattern)? as i64;
        lhs += weight * scale_m * Ratio::from_integer(c);
    }
    let rhs = Ratio::new(
        factorial(n - k) as i64,
        factorial(n) as i64,
    ) * Ratio::from_integer(ordered_count(source, pattern)? as i64);
    Ok(Lemma1Check { lhs, rhs })
}

/// Result of checking that a distribution assigns equal probability to
/// worlds with identical complete k-count statistics.
#[derive(Debug, Clone)]
pub struct CountDeterminationReport {
    pub pass: bool,
    /// a pair of world encodings with equal counts but different
    /// probabilities, when the check fails
    pub witness: Option<(u64, u64, f64, f64)>,
}

pub fn verify_count_determination(
    model: &Model,
    theta: &ParamVector,
    n: usize,
    k: usize,
    tol: f64,
    cap: u32,
) -> Result<CountDeterminationReport> {
    let dist = model.distribution(n, theta, cap)?;
    let sig = dist.signature().clone();
    let mut by_counts: std::collections::BTreeMap<CountKey, (u64, f64)> =
        std::collections::BTreeMap::new();
    for (enc, &p) in dist.probs().iter().enumerate() {
        let world = World::from_encoding(sig.clone(), n, enc as u64)?;
        let counts = complete_counts(&world, k)?.counts;
        match by_counts.get(&counts) {
            Some(&(first_enc, first_p)) => {
                if (p - first_p).abs() > tol {
                    return Ok(CountDeterminationReport {
                        pass: false,
                        witness: Some((first_enc, enc as u64, first_p, p)),
                    });
                }
            }
            None => {
                by_counts.insert(counts, (enc as u64, p));
            }
        }
    }
    Ok(CountDeterminationReport { pass: true, witness: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Dialect;
    use crate::worlds::{falling_factorial, signature_of};
    use proptest::prelude::*;

    fn edge_world(n: usize, edges: &[(usize, usize)]) -> World {
        let sig = signature_of(&[("edge", 2)]);
        let mut w = World::empty(sig, n).unwrap();
        for &(a, b) in edges {
            w.set(0, &[a, b], true);
        }
        w
    }

    #[test]
    fn ordered_count_examples() {
        let empty3 = edge_world(3, &[]);
        let empty2 = edge_world(2, &[]);
        assert_eq!(ordered_count(&empty3, &empty2).unwrap(), 6);

        let one_edge3 = edge_world(3, &[(0, 1)]);
        let one_edge2 = edge_world(2, &[(0, 1)]);
        assert_eq!(ordered_count(&one_edge3, &one_edge2).unwrap(), 1);

        let empty1 = edge_world(1, &[]);
        assert_eq!(ordered_count(&one_edge3, &empty1).unwrap(), 3);
    }

    /// Independent oracle: loop over raw index tuples without the
    /// library's permutation helper, compare atom by atom.
    fn ordered_count_oracle(world: &World, pattern: &World) -> u64 {
        let n = world.domain_size();
        let k = pattern.domain_size();
        let mut tuples = vec![vec![]];
        for _ in 0..k {
            tuples = tuples
                .into_iter()
                .flat_map(|t: Vec<usize>| {
                    (0..n).filter_map(move |v| {
                        if t.contains(&v) {
                            None
                        } else {
                            let mut t2 = t.clone();
                            t2.push(v);
                            Some(t2)
                        }
                    })
                })
                .collect();
        }
        tuples
            .into_iter()
            .filter(|tuple| {
                (0..pattern.atom_count()).all(|atom| {
                    let ga = pattern.signature().atom_at(k, atom);
                    let src: Vec<usize> = ga.args.iter().map(|&j| tuple[j]).collect();
                    world.get(ga.relation, &src) == pattern.get_index(atom)
                })
            })
            .count() as u64
    }

    proptest! {
        #[test]
        fn ordered_count_matches_oracle(
            bits in 0u64..512,
            pat in 0u64..16,
            k in 1usize..=2,
        ) {
            let sig = signature_of(&[("edge", 2)]);
            let world = World::from_encoding(sig.clone(), 3, bits).unwrap();
            let pat_bits = if k == 1 { pat % 2 } else { pat };
            let pattern = World::from_encoding(sig, k, pat_bits).unwrap();
            prop_assert_eq!(
                ordered_count(&world, &pattern).unwrap(),
                ordered_count_oracle(&world, &pattern)
            );
        }

        #[test]
        fn level_sums_and_permutation_invariance(bits in 0u64..512) {
            let sig = signature_of(&[("edge", 2)]);
            let world = World::from_encoding(sig, 3, bits).unwrap();
            let stats = complete_counts(&world, 2).unwrap();
            for l in 1..=2 {
                let total: u64 = stats
                    .counts
                    .iter()
                    .filter(|((ll, _), _)| *ll == l)
                    .map(|(_, &c)| c)
                    .sum();
                prop_assert_eq!(total, falling_factorial(3, l));
            }
            let pi = crate::worlds::Permutation::new(vec![2, 0, 1]).unwrap();
            let relabeled = world.apply_permutation(&pi);
            prop_assert_eq!(stats, complete_counts(&relabeled, 2).unwrap());
        }

        #[test]
        fn downward_consistency(bits in 0u64..512) {
            // level-1 counts recomputed from level-2 counts match the
            // direct computation: each ordered pair contributes its first
            // element's 1-substructure, so summing pair counts grouped by
            // the first element's pattern and dividing by (n-1) works
            let sig = signature_of(&[("edge", 2)]);
            let world = World::from_encoding(sig.clone(), 3, bits).unwrap();
            let stats = complete_counts(&world, 2).unwrap();
            for enc1 in 0u64..2 {
                let mut from_pairs = 0u64;
                for enc2 in 0u64..16 {
                    let c2 = stats.get(2, enc2);
                    if c2 == 0 {
                        continue;
                    }
                    let pair = World::from_encoding(sig.clone(), 2, enc2).unwrap();
                    if pair.restrict(&[0]).unwrap().encoding() == enc1 {
                        from_pairs += c2;
                    }
                }
                prop_assert_eq!(from_pairs, stats.get(1, enc1) * 2);
            }
        }
    }

    #[test]
    fn complete_counts_homogeneous_k3() {
        let k3 = edge_world(3, &[(0,0),(0,1),(0,2),(1,0),(1,1),(1,2),(2,0),(2,1),(2,2)]);
        let stats = complete_counts(&k3, 2).unwrap();
        assert_eq!(stats.get(2, 0b1111), 6);
        assert_eq!(stats.counts.iter().filter(|((l, _), _)| *l == 2).count(), 1);
    }

    #[test]
    fn subsample_weights_half_red_world() {
        let source =
            World::parse_text(crate::fixtures::HALF_RED_N4_WORLD, None).unwrap();
        let samples = enumerate_subsamples(&source, 2).unwrap();
        assert_eq!(samples.len(), 6);
        let both_red = samples
            .iter()
            .filter(|(_, w)| w.get(0, &[0]) && w.get(0, &[1]))
            .count();
        let one_red = samples
            .iter()
            .filter(|(_, w)| w.get(0, &[0]) != w.get(0, &[1]))
            .count();
        let none_red = samples
            .iter()
            .filter(|(_, w)| !w.get(0, &[0]) && !w.get(0, &[1]))
            .count();
        assert_eq!((both_red, one_red, none_red), (1, 4, 1));
    }

    #[test]
    fn subsample_identity_and_empty() {
        let w = edge_world(3, &[(0, 1), (2, 2)]);
        let samples = enumerate_subsamples(&w, 3).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].1.encoding(), w.encoding());

        let empty = edge_world(3, &[]);
        let samples = enumerate_subsamples(&empty, 2).unwrap();
        assert_eq!(samples.len(), 3);
        assert!(samples.iter().all(|(_, w)| w.encoding() == 0));
    }

    #[test]
    fn lemma1_worked_examples() {
        // one edge over [3], sampled at m=2: subset counts 1,0,0 so
        // E = (1/3)(1/2) = 1/6 on both sides
        let source = edge_world(3, &[(0, 1)]);
        let pattern = edge_world(2, &[(0, 1)]);
        let check = verify_lemma1(&source, 2, &pattern).unwrap();
        assert!(check.holds());
        assert_eq!(check.lhs, Ratio::new(1, 6));

        let empty4 = edge_world(4, &[]);
        let empty2 = edge_world(2, &[]);
        let check = verify_lemma1(&empty4, 2, &empty2).unwrap();
        assert!(check.holds());
        assert_eq!(check.lhs, Ratio::from_integer(1));

        let k4: Vec<(usize, usize)> =
            (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        let k4 = edge_world(4, &k4);
        let all2 = edge_world(2, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        let check = verify_lemma1(&k4, 3, &all2).unwrap();
        assert!(check.holds());
        assert_eq!(check.lhs, Ratio::from_integer(1));
    }

    proptest! {
        #[test]
        fn lemma1_exact_on_random_instances(
            bits in 0u64..65536,
            pat in 0u64..16,
            m in 2usize..=4,
        ) {
            let sig = signature_of(&[("edge", 2)]);
            let source = World::from_encoding(sig.clone(), 4, bits).unwrap();
            let pattern = World::from_encoding(sig, 2, pat).unwrap();
            prop_assume!(m >= 2);
            let check = verify_lemma1(&source, m, &pattern).unwrap();
            prop_assert!(check.holds(), "lhs={} rhs={}", check.lhs, check.rhs);
        }
    }

    #[test]
    fn count_determination_er_and_block_pass() {
        let er = Model::parse("e(X,Y) <- 0.4;", Dialect::Rbn).unwrap();
        let report =
            verify_count_determination(&er, &ParamVector::new(), 3, 2, 1e-9, 30).unwrap();
        assert!(report.pass);

        let block = Model::parse(crate::fixtures::BLOCK_RBN, Dialect::Rbn).unwrap();
        let report =
            verify_count_determination(&block, &ParamVector::new(), 3, 2, 1e-9, 30).unwrap();
        assert!(report.pass, "witness: {:?}", report.witness);
    }

    #[test]
    fn count_determination_noisy_or_fails() {
        let noisy = Model::parse(crate::fixtures::NOISYOR_RBN, Dialect::Rbn).unwrap();
        let theta = ParamVector::from_pairs(&[("theta", 0.5)]);
        let report = verify_count_determination(&noisy, &theta, 3, 2, 1e-9, 30).unwrap();
        assert!(!report.pass);
        assert!(report.witness.is_some());
    }
}
