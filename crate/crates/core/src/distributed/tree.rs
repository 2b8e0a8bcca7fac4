//! The random decode tree: top-down percolation and bubble-up.
//!
//! The tree has one level per sender.  A node at depth `j - 1` owns
//! `c_j` children and every possible `j`-th coordinate is assigned to one
//! of them by a seeded hash, so the exponentially large tree is never
//! materialized; only pebbled nodes exist.  Each suspect tuple descends to
//! its leaf (percolation, blocked if the leaf is taken) and then competes
//! upwards: the tuples on a sibling group feed the group's online inverse
//! of the coordinate fingerprint, and the suspect that commits it is
//! copied to the parent.  The first tuple to reach the root is the
//! committed answer.

use std::collections::HashMap;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hashing::PrimeHash;
use crate::invertible::{Body, OnlineInverter};
use crate::rng::EpsilonExp;

/// Shape of the tree: per-depth child counts plus the assignment seed.
#[derive(Debug, Clone)]
pub struct TreeParams {
    pub child_counts: Vec<u64>,
    pub seed: u64,
}

impl TreeParams {
    /// Children per node at depth `j`: `ceil((ell / eps) * K_j)`.
    pub fn new(k: &[u64], eps: f64, seed: u64) -> Result<Self> {
        if k.is_empty() || k.len() > super::MAX_SENDERS {
            return Err(Error::Scale(format!("tree with {} levels", k.len())));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("eps {eps} outside (0, 1)")));
        }
        let ell = k.len() as f64;
        let child_counts = k
            .iter()
            .map(|&kj| {
                let c = (ell / eps * kj as f64).ceil();
                if c < 1.0 || c > 2f64.powi(62) {
                    Err(Error::Domain(format!("child count {c} out of range")))
                } else {
                    Ok(c as u64)
                }
            })
            .collect::<Result<Vec<u64>>>()?;
        Ok(Self { child_counts, seed })
    }

    /// Children counts fixed directly to `2^kappa_j`, the shape used when
    /// decoding codes that expose their budget exponents.
    pub fn from_budget_exponents(kappa: &[u64], seed: u64) -> Result<Self> {
        if kappa.is_empty() || kappa.len() > super::MAX_SENDERS {
            return Err(Error::Scale(format!("tree with {} levels", kappa.len())));
        }
        let child_counts = kappa
            .iter()
            .map(|&e| {
                if e >= 62 {
                    Err(Error::Domain(format!("budget exponent {e} too large")))
                } else {
                    Ok(1u64 << e)
                }
            })
            .collect::<Result<Vec<u64>>>()?;
        Ok(Self { child_counts, seed })
    }

    pub fn depth(&self) -> usize {
        self.child_counts.len()
    }

    /// The child a coordinate value is assigned to under a node.  The same
    /// `(seed, path, element)` always maps to the same index.
    pub fn child_of(&self, path: &[u64], element: &BitString) -> u64 {
        let depth = path.len();
        debug_assert!(depth < self.depth());
        let mut words: Vec<u64> = Vec::with_capacity(path.len() + 4);
        words.push(self.seed);
        words.push(depth as u64 + 1);
        words.extend_from_slice(path);
        words.push(element.len() as u64);
        let mut acc = 0u64;
        for (i, b) in element.iter().enumerate() {
            acc = (acc << 1) | b as u64;
            if i % 64 == 63 {
                words.push(acc);
                acc = 0;
            }
        }
        words.push(acc);
        let h = crate::rng::mix(&words);
        ((h as u128 * self.child_counts[depth] as u128) >> 64) as u64
    }

    /// The leaf a whole tuple percolates towards.
    pub fn leaf_of(&self, tuple: &[BitString]) -> Vec<u64> {
        debug_assert_eq!(tuple.len(), self.depth());
        let mut path = Vec::with_capacity(self.depth());
        for coord in tuple {
            let idx = self.child_of(&path, coord);
            path.push(idx);
        }
        path
    }
}

/// Outcome of the percolation step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Percolation {
    Placed(Vec<u64>),
    Blocked,
}

/// Per-coordinate fingerprint pieces the bubble-up inverters need.
#[derive(Debug, Clone)]
pub struct CoordinateFingerprint {
    pub k: u64,
    pub eps: EpsilonExp,
    pub body: Body,
    pub tag: PrimeHash,
}

/// A decode tree holding pebbles and per-group online inverters.
pub struct DecodeTree {
    params: TreeParams,
    /// One fingerprint per coordinate; absent for percolation-only use.
    fingerprints: Option<Vec<CoordinateFingerprint>>,
    pebbles: HashMap<Vec<u64>, Vec<BitString>>,
    groups: HashMap<Vec<u64>, OnlineInverter>,
    root: Option<Vec<BitString>>,
    blocked: u64,
    inserted: u64,
}

impl DecodeTree {
    pub fn new(params: TreeParams, fingerprints: Option<Vec<CoordinateFingerprint>>) -> Self {
        if let Some(fps) = &fingerprints {
            assert_eq!(fps.len(), params.depth());
        }
        Self {
            params,
            fingerprints,
            pebbles: HashMap::new(),
            groups: HashMap::new(),
            root: None,
            blocked: 0,
            inserted: 0,
        }
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    /// Percolates a tuple and, when fingerprints are present, runs its
    /// bubble-up competitions.
    pub fn insert(&mut self, tuple: &[BitString]) -> Percolation {
        assert_eq!(tuple.len(), self.params.depth());
        self.inserted += 1;
        let leaf = self.params.leaf_of(tuple);
        if self.pebbles.contains_key(&leaf) {
            self.blocked += 1;
            return Percolation::Blocked;
        }
        self.place(leaf.clone(), tuple.to_vec());
        Percolation::Placed(leaf)
    }

    /// Pebbles a node; a just-pebbled non-root node competes in its
    /// sibling group, and winning copies the tuple one level up.
    fn place(&mut self, path: Vec<u64>, tuple: Vec<BitString>) {
        let prev = self.pebbles.insert(path.clone(), tuple.clone());
        assert!(prev.is_none(), "two pebbles on one node");
        if path.is_empty() {
            // root commitment is immutable
            if self.root.is_none() {
                self.root = Some(tuple);
            }
            return;
        }
        let Some(fps) = &self.fingerprints else {
            return;
        };
        let depth = path.len();
        let parent: Vec<u64> = path[..depth - 1].to_vec();
        let coord = tuple[depth - 1].clone();
        // sibling uniqueness: the same coordinate value always maps to the
        // same child, so distinct pebbled siblings carry distinct coords
        debug_assert_eq!(path[depth - 1], self.params.child_of(&parent, &coord));
        let fp = &fps[depth - 1];
        let inverter = self
            .groups
            .entry(parent.clone())
            .or_insert_with(|| OnlineInverter::new(fp.k, fp.eps, fp.body.clone(), fp.tag));
        if inverter.push(&coord).is_some() {
            // this tuple won the competition at this depth
            if !self.pebbles.contains_key(&parent) {
                self.place(parent, tuple);
            }
        }
    }

    pub fn root_answer(&self) -> Option<&Vec<BitString>> {
        self.root.as_ref()
    }

    pub fn blocked_count(&self) -> u64 {
        self.blocked
    }

    pub fn pebble_count(&self) -> usize {
        self.pebbles.len()
    }

    /// Checks sibling uniqueness over the whole pebble map.
    pub fn assert_sibling_uniqueness(&self) {
        let mut seen: HashMap<(Vec<u64>, usize), std::collections::HashSet<&BitString>> =
            HashMap::new();
        for (path, tuple) in &self.pebbles {
            if path.is_empty() {
                continue;
            }
            let parent = path[..path.len() - 1].to_vec();
            let entry = seen.entry((parent, path.len())).or_default();
            assert!(
                entry.insert(&tuple[path.len() - 1]),
                "two siblings share a coordinate"
            );
        }
    }
}

/// How the committed answer is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// One random tree.
    Probabilistic,
    /// Plurality over independent trees; the default trial count is 15.
    Majority { trials: u32 },
}

/// Runs the multi-sender decoder over a suspect stream of tuples.
///
/// `budget_exponents[j]` is the exponent `kappa_j` carried by the `j`-th
/// code; the tree gives each node at depth `j` exactly `2^kappa_j`
/// children, matching the capacity the coordinate inverses were built for.
pub fn decode_multi(
    suspects: &[Vec<BitString>],
    fingerprints: &[CoordinateFingerprint],
    seed: u64,
    mode: DecodeMode,
) -> Result<Option<Vec<BitString>>> {
    let kappa: Vec<u64> = fingerprints.iter().map(|fp| fp.k).collect();
    let run_one = |tree_seed: u64| -> Result<Option<Vec<BitString>>> {
        let params = TreeParams::from_budget_exponents(&kappa, tree_seed)?;
        let mut tree = DecodeTree::new(params, Some(fingerprints.to_vec()));
        for tuple in suspects {
            tree.insert(tuple);
        }
        Ok(tree.root_answer().cloned())
    };
    match mode {
        DecodeMode::Probabilistic => run_one(seed),
        DecodeMode::Majority { trials } => {
            let mut counts: Vec<(Vec<BitString>, u32)> = Vec::new();
            for t in 0..trials {
                if let Some(ans) = run_one(crate::rng::mix(&[seed, t as u64]))? {
                    match counts.iter_mut().find(|(a, _)| *a == ans) {
                        Some((_, c)) => *c += 1,
                        None => counts.push((ans, 1)),
                    }
                }
            }
            Ok(counts.into_iter().max_by_key(|&(_, c)| c).map(|(a, _)| a))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invertible::fingerprint;
    use crate::rng::{Seed, SplitMix64};

    fn tuple_of(vals: &[u64], bits: usize) -> Vec<BitString> {
        vals.iter().map(|&v| BitString::from_uint(v as u128, bits).unwrap()).collect()
    }

    #[test]
    fn child_counts_example() {
        // ell = 2, K = (2, 2), eps = 1/2: 8 children at both depths
        let p = TreeParams::new(&[2, 2], 0.5, 1).unwrap();
        assert_eq!(p.child_counts, vec![8, 8]);
    }

    #[test]
    fn child_assignment_deterministic() {
        let p = TreeParams::new(&[4, 4], 0.25, 77).unwrap();
        let e = BitString::parse_binary("1011").unwrap();
        let idx = p.child_of(&[3], &e);
        for _ in 0..10 {
            assert_eq!(p.child_of(&[3], &e), idx);
        }
        // a different path or element moves the assignment in general
        let other = BitString::parse_binary("1010").unwrap();
        let _ = p.child_of(&[2], &e);
        let _ = p.child_of(&[3], &other);
    }

    #[test]
    fn child_distribution_uniform_chi_square() {
        let p = TreeParams::new(&[4], 0.25, 9).unwrap();
        let c = p.child_counts[0];
        let mut counts = vec![0u64; c as usize];
        let mut rng = SplitMix64::new(1);
        let samples = 10_000u64;
        for _ in 0..samples {
            let e = BitString::random(&mut rng, 16);
            counts[p.child_of(&[], &e) as usize] += 1;
        }
        let expected = samples as f64 / c as f64;
        let chi2: f64 =
            counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with c - 1 = 15 dof is about 37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn first_insert_never_blocked() {
        for s in 0..50u64 {
            let p = TreeParams::new(&[2, 2], 0.5, s).unwrap();
            let mut tree = DecodeTree::new(p, None);
            let t = tuple_of(&[s % 16, (s * 7) % 16], 4);
            assert!(matches!(tree.insert(&t), Percolation::Placed(_)));
        }
    }

    #[test]
    fn pair_collision_probability() {
        // two tuples differing in every coordinate land on the same leaf
        // with probability prod(1 / c_j), measured over tree seeds
        let a = tuple_of(&[3, 5], 4);
        let b = tuple_of(&[9, 12], 4);
        let mut together = 0u64;
        let trials = 1u64 << 16;
        for s in 0..trials {
            let p = TreeParams::new(&[2, 2], 0.5, s).unwrap();
            if p.leaf_of(&a) == p.leaf_of(&b) {
                together += 1;
            }
        }
        let rate = together as f64 / trials as f64;
        let expect = 1.0 / 64.0;
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((rate - expect).abs() <= 4.0 * sigma, "rate {rate} expect {expect}");
    }

    #[test]
    fn blocked_rate_within_bound_on_small_sliced_sets() {
        // S with K-small slices: percolation blocking rate <= eps * e
        let eps = 0.125f64;
        let k = [4u64, 4];
        // S = product of two 4-element coordinate sets: (4,4)-small slices
        let mut s: Vec<Vec<BitString>> = Vec::new();
        for i in 0..4u64 {
            for j in 0..4u64 {
                s.push(tuple_of(&[i * 3 + 1, j * 2], 6));
            }
        }
        let cert = super::super::small_slices_check(&s, &k).unwrap();
        assert!(cert.verified);
        let mut blocked = 0u64;
        let mut placed = 0u64;
        let trials = 2000u64;
        for t in 0..trials {
            let p = TreeParams::new(&k, eps, crate::rng::mix(&[100, t])).unwrap();
            let mut tree = DecodeTree::new(p, None);
            for tuple in &s {
                match tree.insert(tuple) {
                    Percolation::Blocked => blocked += 1,
                    Percolation::Placed(_) => placed += 1,
                }
            }
            tree.assert_sibling_uniqueness();
        }
        let total = blocked + placed;
        let rate = blocked as f64 / total as f64;
        let bound = eps * std::f64::consts::E;
        let sigma = (bound * (1.0 - bound) / total as f64).sqrt();
        assert!(rate <= bound + 2.0 * sigma, "blocking rate {rate} above {bound}");
    }

    #[test]
    fn single_sender_tree_reduces_to_invert_full() {
        // ell = 1 with no blocking: the root answer equals the plain
        // online inversion of the same stream
        let e = EpsilonExp::new(3).unwrap();
        let mut rng = SplitMix64::new(5);
        for t in 0..40u64 {
            let mut stream: Vec<BitString> = Vec::new();
            while stream.len() < 12 {
                let z = BitString::random(&mut rng, 10);
                if !stream.contains(&z) {
                    stream.push(z);
                }
            }
            let x = stream[(t % 12) as usize].clone();
            let fp = fingerprint(&x, e, 5, &Seed::from_value(t)).unwrap();
            let coord = CoordinateFingerprint { k: 5, eps: e, body: fp.body.clone(), tag: fp.tag };
            // budget exponent 5 gives 32 children; collisions possible but
            // rare, and we only compare when nothing blocked
            let params = TreeParams::from_budget_exponents(&[12], crate::rng::mix(&[7, t])).unwrap();
            let mut tree = DecodeTree::new(params, Some(vec![coord]));
            let mut any_blocked = false;
            for z in &stream {
                if tree.insert(std::slice::from_ref(z)) == Percolation::Blocked {
                    any_blocked = true;
                }
            }
            if any_blocked {
                continue;
            }
            let direct = crate::invertible::invert_full(stream.iter(), &fp);
            assert_eq!(tree.root_answer().map(|t| t[0].clone()), direct);
        }
    }

    #[test]
    fn root_commitment_stable_under_more_suspects() {
        let e = EpsilonExp::new(3).unwrap();
        let mut rng = SplitMix64::new(6);
        let x = BitString::random(&mut rng, 10);
        let fp = fingerprint(&x, e, 4, &Seed::from_value(1)).unwrap();
        let coord = CoordinateFingerprint { k: 4, eps: e, body: fp.body.clone(), tag: fp.tag };
        let params = TreeParams::from_budget_exponents(&[10], 3).unwrap();
        let mut tree = DecodeTree::new(params, Some(vec![coord]));
        tree.insert(std::slice::from_ref(&x));
        let committed = tree.root_answer().cloned();
        for _ in 0..50 {
            let z = BitString::random(&mut rng, 10);
            tree.insert(std::slice::from_ref(&z));
            assert_eq!(tree.root_answer().cloned(), committed);
        }
    }
}
