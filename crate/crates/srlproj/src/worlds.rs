//! Signatures, ground atoms, possible worlds and exact distributions.
//!
//! A world over domain `[n]` is a truth assignment to every ground atom,
//! packed into a `u64` under the canonical atom order: relations in
//! signature order, argument tuples in lexicographic order. The packed
//! value doubles as the world's integer encoding, so enumeration in
//! ascending encoding order is just `0..2^atoms`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the number of ground atoms (table size `2^atoms`).
pub const DEFAULT_ATOM_CAP: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
}

/// An ordered list of relation symbols. The list order is fixed and
/// defines the canonical atom order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Signature {
    relations: Vec<Relation>,
}

impl Signature {
    pub fn new<S: Into<String>>(relations: Vec<(S, usize)>) -> Result<Signature> {
        let relations: Vec<Relation> = relations
            .into_iter()
            .map(|(name, arity)| Relation { name: name.into(), arity })
            .collect();
        for (i, r) in relations.iter().enumerate() {
            if relations[..i].iter().any(|q| q.name == r.name) {
                return Err(Error::InvalidModel(format!("duplicate relation {}", r.name)));
            }
        }
        Ok(Signature { relations })
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|r| r.arity).max().unwrap_or(0)
    }

    pub fn has_arity_ge2(&self) -> bool {
        self.max_arity() >= 2
    }

    /// Total number of ground atoms over domain `[n]`.
    pub fn atom_count(&self, n: usize) -> usize {
        self.relations.iter().map(|r| n.pow(r.arity as u32)).sum()
    }

    /// Offset of relation `rel` in the canonical atom order.
    pub fn relation_offset(&self, rel: usize, n: usize) -> usize {
        self.relations[..rel].iter().map(|r| n.pow(r.arity as u32)).sum()
    }

    /// Canonical index of the atom `rel(args)` over domain `[n]`.
    /// Argument tuples are ordered lexicographically, first argument
    /// most significant.
    pub fn atom_index(&self, n: usize, rel: usize, args: &[usize]) -> usize {
        debug_assert_eq!(args.len(), self.relations[rel].arity);
        let mut idx = 0;
        for &a in args {
            debug_assert!(a < n);
            idx = idx * n + a;
        }
        self.relation_offset(rel, n) + idx
    }

    /// Inverse of [`atom_index`](Self::atom_index).
    pub fn atom_at(&self, n: usize, index: usize) -> GroundAtom {
        let mut rest = index;
        for (rel, r) in self.relations.iter().enumerate() {
            let block = n.pow(r.arity as u32);
            if rest < block {
                let mut args = vec![0; r.arity];
                let mut v = rest;
                for slot in args.iter_mut().rev() {
                    *slot = v % n;
                    v /= n;
                }
                return GroundAtom { relation: rel, args };
            }
            rest -= block;
        }
        panic!("atom index {index} out of range");
    }

    pub fn check_cap(&self, n: usize, cap: u32) -> Result<()> {
        let atoms = self.atom_count(n);
        if atoms > cap as usize {
            Err(Error::CapExceeded { atoms, n, cap })
        } else {
            Ok(())
        }
    }

    /// Sub-signature keeping only the listed relations, preserving order.
    pub fn project(&self, keep: &[String]) -> Result<Signature> {
        let relations: Vec<Relation> = self
            .relations
            .iter()
            .filter(|r| keep.contains(&r.name))
            .cloned()
            .collect();
        if relations.is_empty() {
            return Err(Error::InvalidModel("projection keeps no relations".into()));
        }
        Ok(Signature { relations })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAtom {
    pub relation: usize,
    pub args: Vec<usize>,
}

/// A bijection on `[n]`, stored as the image vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Permutation> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &v in &image {
            if v >= n || seen[v] {
                return Err(Error::InvalidWorld(format!("{image:?} is not a permutation")));
            }
            seen[v] = true;
        }
        Ok(Permutation(image))
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation((0..n).collect())
    }

    /// The adjacent transposition `(i, i+1)` on `[n]`.
    pub fn transposition(n: usize, i: usize) -> Permutation {
        let mut image: Vec<usize> = (0..n).collect();
        image.swap(i, i + 1);
        Permutation(image)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Permutation(inv)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation((0..self.0.len()).map(|i| self.apply(other.apply(i))).collect())
    }
}

/// A possible world: a truth assignment to all ground atoms over `[n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    sig: Arc<Signature>,
    n: usize,
    bits: u64,
}

impl World {
    pub fn empty(sig: Arc<Signature>, n: usize) -> Result<World> {
        Self::from_encoding(sig, n, 0)
    }

    pub fn from_encoding(sig: Arc<Signature>, n: usize, encoding: u64) -> Result<World> {
        if n == 0 {
            return Err(Error::Dimension("domain size must be at least 1".into()));
        }
        let atoms = sig.atom_count(n);
        if atoms > 63 {
            return Err(Error::CapExceeded { atoms, n, cap: 63 });
        }
        if encoding >> atoms != 0 {
            return Err(Error::InvalidWorld(format!(
                "encoding {encoding} out of range for {atoms} atoms"
            )));
        }
        Ok(World { sig, n, bits: encoding })
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn encoding(&self) -> u64 {
        self.bits
    }

    pub fn atom_count(&self) -> usize {
        self.sig.atom_count(self.n)
    }

    pub fn get(&self, rel: usize, args: &[usize]) -> bool {
        self.get_index(self.sig.atom_index(self.n, rel, args))
    }

    pub fn get_index(&self, atom: usize) -> bool {
        self.bits >> atom & 1 == 1
    }

    pub fn set(&mut self, rel: usize, args: &[usize], value: bool) {
        self.set_index(self.sig.atom_index(self.n, rel, args), value);
    }

    pub fn set_index(&mut self, atom: usize, value: bool) {
        if value {
            self.bits |= 1 << atom;
        } else {
            self.bits &= !(1 << atom);
        }
    }

    /// Number of true ground atoms of relation `rel`.
    pub fn count_true(&self, rel: usize) -> usize {
        let off = self.sig.relation_offset(rel, self.n);
        let block = self.n.pow(self.sig.relations()[rel].arity as u32);
        (off..off + block).filter(|&i| self.get_index(i)).count()
    }

    /// Relabels the world by `perm`: atom `r(i..)` is true in the result
    /// iff `r(perm⁻¹(i)..)` is true in the input.
    pub fn apply_permutation(&self, perm: &Permutation) -> World {
        assert_eq!(perm.len(), self.n);
        let map = permutation_atom_map(&self.sig, self.n, perm);
        let mut bits = 0u64;
        for (dst, &src) in map.iter().enumerate() {
            if self.get_index(src) {
                bits |= 1 << dst;
            }
        }
        World { sig: self.sig.clone(), n: self.n, bits }
    }

    /// The substructure induced by the index tuple: atom `r(j..)` is true
    /// in the result iff `r(indices[j]..)` is true in the input.
    pub fn restrict(&self, indices: &[usize]) -> Result<World> {
        for (i, &v) in indices.iter().enumerate() {
            if v >= self.n {
                return Err(Error::Dimension(format!("index {v} outside domain [{}]", self.n)));
            }
            if indices[..i].contains(&v) {
                return Err(Error::DuplicateIndex(v));
            }
        }
        let m = indices.len();
        let mut out = World::from_encoding(self.sig.clone(), m, 0)?;
        for atom in 0..self.sig.atom_count(m) {
            let ga = self.sig.atom_at(m, atom);
            let src: Vec<usize> = ga.args.iter().map(|&j| indices[j]).collect();
            if self.get(ga.relation, &src) {
                out.set_index(atom, true);
            }
        }
        Ok(out)
    }

    /// Text form: `domain <n>` followed by one `rel(a,b).` line per true atom.
    pub fn to_text(&self) -> String {
        let mut s = format!("domain {}\n", self.n);
        for atom in 0..self.atom_count() {
            if self.get_index(atom) {
                let ga = self.sig.atom_at(self.n, atom);
                let args: Vec<String> = ga.args.iter().map(|a| a.to_string()).collect();
                s.push_str(&format!(
                    "{}({}).\n",
                    self.sig.relations()[ga.relation].name,
                    args.join(",")
                ));
            }
        }
        s
    }

    /// Parses the text form. With `sig: None` the signature is inferred
    /// from the atoms in order of first mention; optional `relation
    /// name/k` lines may declare relations that have no true atoms.
    pub fn parse_text(text: &str, sig: Option<Arc<Signature>>) -> Result<World> {
        let mut lines = text
            .lines()
            .map(|l| l.split("//").next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let first = lines
            .next()
            .ok_or_else(|| Error::InvalidWorld("empty world file".into()))?;
        let n: usize = first
            .strip_prefix("domain")
            .map(str::trim)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::InvalidWorld("first line must be `domain <n>`".into()))?;
        let mut atoms: Vec<(String, Vec<usize>)> = Vec::new();
        let mut declared: Vec<(String, usize)> = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("relation ") {
                let rest = rest.trim().trim_end_matches('.');
                let (name, k) = rest
                    .split_once('/')
                    .ok_or_else(|| Error::InvalidWorld(format!("bad declaration `{line}`")))?;
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::InvalidWorld(format!("bad arity in `{line}`")))?;
                declared.push((name.trim().to_string(), k));
                continue;
            }
            let line = line
                .strip_suffix('.')
                .ok_or_else(|| Error::InvalidWorld(format!("atom line `{line}` must end with `.`")))?;
            let (name, args) = match line.split_once('(') {
                Some((name, rest)) => {
                    let rest = rest
                        .strip_suffix(')')
                        .ok_or_else(|| Error::InvalidWorld(format!("unbalanced parens in `{line}`")))?;
                    let args: Vec<usize> = if rest.trim().is_empty() {
                        vec![]
                    } else {
                        rest.split(',')
                            .map(|a| {
                                a.trim()
                                    .parse()
                                    .map_err(|_| Error::InvalidWorld(format!("bad argument in `{line}`")))
                            })
                            .collect::<Result<_>>()?
                    };
                    (name.trim().to_string(), args)
                }
                None => (line.trim().to_string(), vec![]),
            };
            for &a in &args {
                if a >= n {
                    return Err(Error::InvalidWorld(format!("element {a} outside domain [{n}]")));
                }
            }
            atoms.push((name, args));
        }
        let sig = match sig {
            Some(sig) => sig,
            None => {
                let mut rels: Vec<(String, usize)> = declared;
                for (name, args) in &atoms {
                    match rels.iter().find(|(r, _)| r == name) {
                        Some((_, k)) if *k != args.len() => {
                            return Err(Error::Arity(format!(
                                "relation {name} used with arities {k} and {}",
                                args.len()
                            )))
                        }
                        Some(_) => {}
                        None => rels.push((name.clone(), args.len())),
                    }
                }
                Arc::new(Signature::new(rels)?)
            }
        };
        let mut world = World::from_encoding(sig.clone(), n, 0)?;
        for (name, args) in atoms {
            let rel = sig
                .relation_index(&name)
                .ok_or_else(|| Error::InvalidWorld(format!("unknown relation {name}")))?;
            if sig.relations()[rel].arity != args.len() {
                return Err(Error::Arity(format!(
                    "relation {name} expects arity {}, got {}",
                    sig.relations()[rel].arity,
                    args.len()
                )));
            }
            world.set(rel, &args, true);
        }
        Ok(world)
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Atom index map of a permutation: entry `dst` holds the source atom
/// whose truth value lands at atom `dst` after relabeling by `perm`.
pub fn permutation_atom_map(sig: &Signature, n: usize, perm: &Permutation) -> Vec<usize> {
    let inv = perm.inverse();
    let atoms = sig.atom_count(n);
    let mut map = vec![0; atoms];
    for (dst, slot) in map.iter_mut().enumerate() {
        let ga = sig.atom_at(n, dst);
        let src_args: Vec<usize> = ga.args.iter().map(|&a| inv.apply(a)).collect();
        *slot = sig.atom_index(n, ga.relation, &src_args);
    }
    map
}

/// Gathers the bits of `bits` through an atom map, producing the encoding
/// of the relabeled world.
pub fn permute_encoding(map: &[usize], bits: u64) -> u64 {
    let mut out = 0u64;
    for (dst, &src) in map.iter().enumerate() {
        out |= (bits >> src & 1) << dst;
    }
    out
}

/// Atom map of the restriction to `[m]`: entry `t` holds the index in the
/// size-`n` world of the atom that becomes atom `t` in the size-`m` world.
pub fn restriction_atom_map(sig: &Signature, n: usize, m: usize) -> Vec<usize> {
    let atoms_m = sig.atom_count(m);
    let mut map = vec![0; atoms_m];
    for (t, slot) in map.iter_mut().enumerate() {
        let ga = sig.atom_at(m, t);
        *slot = sig.atom_index(n, ga.relation, &ga.args);
    }
    map
}

/// Yields every world over `[n]` exactly once, in ascending encoding order.
pub fn enumerate_worlds(
    sig: &Arc<Signature>,
    n: usize,
    cap: u32,
) -> Result<impl Iterator<Item = World>> {
    sig.check_cap(n, cap)?;
    if n == 0 {
        return Err(Error::Dimension("domain size must be at least 1".into()));
    }
    let atoms = sig.atom_count(n);
    let sig = sig.clone();
    Ok((0..1u64 << atoms).map(move |enc| World { sig: sig.clone(), n, bits: enc }))
}

/// An exact dense probability table over `Ω^(n)`, indexed by encoding.
#[derive(Debug, Clone)]
pub struct Distribution {
    sig: Arc<Signature>,
    n: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(sig: Arc<Signature>, n: usize, probs: Vec<f64>) -> Result<Distribution> {
        let atoms = sig.atom_count(n);
        if probs.len() != 1usize << atoms {
            return Err(Error::Dimension(format!(
                "table length {} does not match 2^{atoms}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidWorld("negative or NaN probability".into()));
        }
        Ok(Distribution { sig, n, probs })
    }

    /// Builds the table by evaluating `f` at every world, in parallel.
    /// Each entry is independent, so the result is deterministic.
    pub fn from_fn<F>(sig: Arc<Signature>, n: usize, cap: u32, f: F) -> Result<Distribution>
    where
        F: Fn(u64) -> f64 + Sync + Send,
    {
        sig.check_cap(n, cap)?;
        let atoms = sig.atom_count(n);
        let probs: Vec<f64> = (0..1u64 << atoms).into_par_iter().map(f).collect();
        Distribution::new(sig, n, probs)
    }

    pub fn uniform(sig: Arc<Signature>, n: usize, cap: u32) -> Result<Distribution> {
        sig.check_cap(n, cap)?;
        let len = 1usize << sig.atom_count(n);
        Distribution::new(sig, n, vec![1.0 / len as f64; len])
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, world: &World) -> f64 {
        assert_eq!(world.domain_size(), self.n);
        self.probs[world.encoding() as usize]
    }

    pub fn total(&self) -> f64 {
        // fixed ascending-encoding order for reproducible rounding
        self.probs.iter().sum()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidWorld(format!("distribution sums to {total}")));
        }
        Ok(())
    }

    /// Eq. (4): the marginal on the substructures induced by `[m]`.
    pub fn marginalize(&self, m: usize) -> Result<Distribution> {
        if m == 0 || m > self.n {
            return Err(Error::Dimension(format!(
                "cannot marginalize a size-{} distribution to size {m}",
                self.n
            )));
        }
        if m == self.n {
            return Ok(self.clone());
        }
        let map = restriction_atom_map(&self.sig, self.n, m);
        let mut out = vec![0.0; 1usize << self.sig.atom_count(m)];
        for (enc, &p) in self.probs.iter().enumerate() {
            let target = permute_encoding(&map, enc as u64);
            out[target as usize] += p;
        }
        Distribution::new(self.sig.clone(), m, out)
    }

    /// Max-norm distance between two tables over the same space.
    pub fn max_deviation(&self, other: &Distribution) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len());
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// JSON dump: array of `{"world": <encoding>, "p": <float>}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.probs
                .iter()
                .enumerate()
                .map(|(enc, &p)| {
                    let mut m = serde_json::Map::new();
                    m.insert("world".into(), serde_json::json!(enc));
                    m.insert("p".into(), serde_json::json!(p));
                    serde_json::Value::Object(m)
                })
                .collect(),
        )
    }
}

/// Convenience: a signature plus parsed relation layout, used by tests.
pub fn signature_of(pairs: &[(&str, usize)]) -> Arc<Signature> {
    Arc::new(Signature::new(pairs.iter().map(|&(n, a)| (n, a)).collect()).unwrap())
}

/// Deterministic map from world encodings to their restriction encodings,
/// for every ordered index tuple of length `m`. Used by sampling code.
pub fn ordered_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..n).permutations(k).collect()
}

/// All `C(n, m)` sorted subsets of `[n]` of size `m`, lexicographic.
pub fn sorted_subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..n).combinations(m).collect()
}

/// Small exact factorial, used by count statistics.
pub fn factorial(v: usize) -> u64 {
    (1..=v as u64).product()
}

/// Number of ordered tuples of `k` distinct elements from `[n]`.
pub fn falling_factorial(n: usize, k: usize) -> u64 {
    (0..k).map(|i| (n - i) as u64).product()
}

pub type CountKey = BTreeMap<(usize, u64), u64>;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn red_edge() -> Arc<Signature> {
        signature_of(&[("red", 1), ("edge", 2)])
    }

    #[test]
    fn enumerate_counts() {
        let e2 = signature_of(&[("e", 2)]);
        assert_eq!(enumerate_worlds(&e2, 1, 30).unwrap().count(), 2);
        let s = red_edge();
        assert_eq!(enumerate_worlds(&s, 2, 30).unwrap().count(), 64);
        let red = signature_of(&[("red", 1)]);
        assert_eq!(enumerate_worlds(&red, 3, 30).unwrap().count(), 8);
    }

    #[test]
    fn enumerate_cap_exceeded() {
        let s = red_edge();
        assert!(matches!(
            enumerate_worlds(&s, 3, 10).map(|i| i.count()),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn enumerate_is_ascending_and_unique() {
        let s = red_edge();
        let encs: Vec<u64> = enumerate_worlds(&s, 2, 30).unwrap().map(|w| w.encoding()).collect();
        assert_eq!(encs, (0..64).collect::<Vec<u64>>());
    }

    #[test]
    fn permutation_swap_edge() {
        let s = signature_of(&[("edge", 2)]);
        let mut w = World::empty(s.clone(), 2).unwrap();
        w.set(0, &[0, 1], true);
        let swapped = w.apply_permutation(&Permutation::new(vec![1, 0]).unwrap());
        assert!(swapped.get(0, &[1, 0]));
        assert_eq!(swapped.count_true(0), 1);
        let id = w.apply_permutation(&Permutation::identity(2));
        assert_eq!(id, w);
    }

    /// Oracle: rebuild the permuted world atom by atom.
    fn permute_oracle(w: &World, perm: &Permutation) -> World {
        let sig = w.signature().clone();
        let n = w.domain_size();
        let mut out = World::empty(sig.clone(), n).unwrap();
        for atom in 0..w.atom_count() {
            if w.get_index(atom) {
                let ga = sig.atom_at(n, atom);
                let dst: Vec<usize> = ga.args.iter().map(|&a| perm.apply(a)).collect();
                out.set(ga.relation, &dst, true);
            }
        }
        out
    }

    #[test]
    fn permutation_cycle_example() {
        // red(0), edge(0,2) over n=3 under the cycle 0→1→2→0
        let s = red_edge();
        let mut w = World::empty(s, 3).unwrap();
        w.set(0, &[0], true);
        w.set(1, &[0, 2], true);
        let cycle = Permutation::new(vec![1, 2, 0]).unwrap();
        let got = w.apply_permutation(&cycle);
        assert_eq!(got, permute_oracle(&w, &cycle));
        assert!(got.get(0, &[1]));
        assert!(got.get(1, &[1, 0]));
        assert_eq!(got.count_true(0), 1);
        assert_eq!(got.count_true(1), 1);
    }

    #[test]
    fn restrict_examples() {
        let s = signature_of(&[("edge", 2)]);
        let mut w = World::empty(s, 3).unwrap();
        w.set(0, &[0, 1], true);
        let r01 = w.restrict(&[0, 1]).unwrap();
        assert!(r01.get(0, &[0, 1]) && r01.encoding().count_ones() == 1);
        let r10 = w.restrict(&[1, 0]).unwrap();
        assert!(r10.get(0, &[1, 0]) && r10.encoding().count_ones() == 1);
        let r12 = w.restrict(&[1, 2]).unwrap();
        assert_eq!(r12.encoding(), 0);
        assert!(matches!(w.restrict(&[1, 1]), Err(Error::DuplicateIndex(1))));
    }

    #[test]
    fn marginalize_uniform_stays_uniform() {
        let s = signature_of(&[("e", 2)]);
        let d3 = Distribution::uniform(s, 3, 30).unwrap();
        let d2 = d3.marginalize(2).unwrap();
        for &p in d2.probs() {
            assert!((p - 1.0 / 16.0).abs() < 1e-12);
        }
        d2.validate(1e-9).unwrap();
    }

    #[test]
    fn marginalize_identity_at_m_equals_n() {
        let s = signature_of(&[("red", 1)]);
        let d = Distribution::uniform(s, 3, 30).unwrap();
        let same = d.marginalize(3).unwrap();
        assert_eq!(d.probs(), same.probs());
        assert!(matches!(d.marginalize(4), Err(Error::Dimension(_))));
    }

    #[test]
    fn marginalize_clique_empty_mixture() {
        // Eq. (3): half K_n, half E_n, over n=3 with self-loops.
        let s = signature_of(&[("e", 2)]);
        let atoms = s.atom_count(3);
        let mut probs = vec![0.0; 1 << atoms];
        probs[0] = 0.5;
        probs[(1usize << atoms) - 1] = 0.5;
        let d3 = Distribution::new(s.clone(), 3, probs).unwrap();
        let d2 = d3.marginalize(2).unwrap();
        assert!((d2.probs()[0] - 0.5).abs() < 1e-12);
        assert!((d2.probs()[15] - 0.5).abs() < 1e-12);
        assert!(d2.probs()[1..15].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn world_text_round_trip() {
        let s = red_edge();
        let mut w = World::empty(s.clone(), 4).unwrap();
        w.set(0, &[0], true);
        w.set(0, &[1], true);
        w.set(1, &[2, 3], true);
        let text = w.to_text();
        assert!(text.starts_with("domain 4\n"));
        let back = World::parse_text(&text, Some(s)).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn world_text_inferred_signature() {
        let w = World::parse_text("domain 2\nred(0).\nedge(0,1).\n", None).unwrap();
        assert_eq!(w.signature().relations().len(), 2);
        assert!(w.get(0, &[0]) && w.get(1, &[0, 1]));
    }

    proptest! {
        #[test]
        fn encoding_round_trip(enc in 0u64..64) {
            let s = red_edge();
            let w = World::from_encoding(s.clone(), 2, enc).unwrap();
            prop_assert_eq!(w.encoding(), enc);
            let again = World::from_encoding(s, 2, w.encoding()).unwrap();
            prop_assert_eq!(again, w);
        }

        #[test]
        fn marginalize_tower(seed in 0u64..1000) {
            // marginalize(marginalize(Q, m), m') == marginalize(Q, m')
            let s = signature_of(&[("red", 1), ("e", 2)]);
            let len = 1usize << s.atom_count(3);
            let mut weights: Vec<f64> = (0..len)
                .map(|i| ((i as u64 ^ seed).wrapping_mul(2654435761) % 1000 + 1) as f64)
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let d3 = Distribution::new(s, 3, weights).unwrap();
            let via2 = d3.marginalize(2).unwrap().marginalize(1).unwrap();
            let direct = d3.marginalize(1).unwrap();
            prop_assert!(via2.max_deviation(&direct) <= 1e-9);
        }

        #[test]
        fn permutation_group_action(enc in 0u64..4096u64, a in 0usize..2, b in 0usize..2) {
            let s = red_edge();
            let w = World::from_encoding(s, 3, enc % 4096).unwrap();
            let p = Permutation::transposition(3, a);
            let q = Permutation::transposition(3, b);
            let seq = w.apply_permutation(&p).apply_permutation(&q);
            let composed = w.apply_permutation(&q.compose(&p));
            prop_assert_eq!(seq, composed);
        }
    }

    #[test]
    fn restrict_commutes_with_permutation() {
        // restrict(permute(w, π), i) == restrict(w, π⁻¹ applied to i), n = 3
        let s = red_edge();
        let perms: Vec<Permutation> = [
            vec![0, 1, 2],
            vec![1, 0, 2],
            vec![0, 2, 1],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ]
        .into_iter()
        .map(|v| Permutation::new(v).unwrap())
        .collect();
        for enc in 0..(1u64 << s.atom_count(3)) {
            let w = World::from_encoding(s.clone(), 3, enc).unwrap();
            for perm in &perms {
                let inv = perm.inverse();
                for tuple in ordered_tuples(3, 2) {
                    let lhs = w.apply_permutation(perm).restrict(&tuple).unwrap();
                    let pre: Vec<usize> = tuple.iter().map(|&i| inv.apply(i)).collect();
                    let rhs = w.restrict(&pre).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }
}
