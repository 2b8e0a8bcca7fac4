//! Instance generators for the multi-sender experiments.

use std::collections::HashSet;

use crate::bits::BitString;
use crate::compressor::ToyDecompressor;
use crate::error::Result;
use crate::field::{line_point_instance, FieldElement};
use crate::hashing::ceil_log2_u128;
use crate::rng::{Seed, SplitMix64};

use super::encode_tuple_set;

/// A line-and-point family: sender A holds a line `y = ax + b`, sender B
/// an incident point `(u, v)`, both over GF(2^w).
#[derive(Debug, Clone)]
pub struct LinePointScenario {
    pub w: u32,
    pub decompressor: ToyDecompressor,
    /// The sampled `(x_A, x_B)` tuples the empty-condition table covers.
    pub tuples: Vec<Vec<BitString>>,
    /// Index of the instance drawn directly from the seed.
    pub starred: usize,
}

fn fe_bits(e: &FieldElement) -> BitString {
    BitString::from_uint(e.value() as u128, e.degree() as usize).unwrap()
}

fn line_bits(w: u32, a: &FieldElement, b: &FieldElement) -> BitString {
    let mut s = fe_bits(a);
    s.extend(&fe_bits(b));
    debug_assert_eq!(s.len(), 2 * w as usize);
    s
}

fn point_bits(w: u32, u: &FieldElement, v: &FieldElement) -> BitString {
    let mut s = fe_bits(u);
    s.extend(&fe_bits(v));
    debug_assert_eq!(s.len(), 2 * w as usize);
    s
}

/// Builds the toy decompressor of the line-point family over `extra + 1`
/// sampled incident pairs.
///
/// Programs: the joint table indexes a pair by its `3w` defining bits
/// `(a, b, u)`; given the point, the `2^w` lines through it are indexed by
/// the `w` bits of the slope; given the line, the `2^w` points on it by
/// the `w` bits of the abscissa.  So the conditional complexities are `w`
/// and the joint complexity is `3w` for every covered pair.
pub fn line_point_toy(w: u32, extra: usize, seed: &Seed) -> Result<LinePointScenario> {
    let mut d = ToyDecompressor::new();
    let mut rng = seed.rng();
    let mut triples: Vec<(FieldElement, FieldElement, FieldElement)> = Vec::new();
    let ((a0, b0), (u0, _)) = line_point_instance(w, seed)?;
    triples.push((a0, b0, u0));
    let mut seen: HashSet<(u32, u32, u32)> = HashSet::new();
    seen.insert((a0.value(), b0.value(), u0.value()));
    while triples.len() < extra + 1 {
        let a = FieldElement::new(w, rng.next_bits(w) as u32)?;
        let b = FieldElement::new(w, rng.next_bits(w) as u32)?;
        let u = FieldElement::new(w, rng.next_bits(w) as u32)?;
        if seen.insert((a.value(), b.value(), u.value())) {
            triples.push((a, b, u));
        }
    }

    let empty_cond = encode_tuple_set(&[]);
    let mut tuples = Vec::new();
    let mut lines_done: HashSet<(u32, u32)> = HashSet::new();
    let mut points_done: HashSet<(u32, u32)> = HashSet::new();
    for (a, b, u) in &triples {
        let v = a.mul(u).add(b);
        let xa = line_bits(w, a, b);
        let xb = point_bits(w, u, &v);
        // joint program: the defining 3w bits
        let mut program = fe_bits(a);
        program.extend(&fe_bits(b));
        program.extend(&fe_bits(u));
        let joint = encode_tuple_set(&[(0, &xa), (1, &xb)]);
        d.add(program, Some(empty_cond.clone()), joint);
        tuples.push(vec![xa.clone(), xb.clone()]);

        // lines through the point, indexed by slope
        if points_done.insert((u.value(), v.value())) {
            let cond = encode_tuple_set(&[(1, &xb)]);
            for slope in 0..(1u32 << w) {
                let s = FieldElement::new(w, slope)?;
                let intercept = v.add(&s.mul(u));
                let line = line_bits(w, &s, &intercept);
                let target = encode_tuple_set(&[(0, &line)]);
                d.add(fe_bits(&s), Some(cond.clone()), target);
            }
        }
        // points on the line, indexed by abscissa
        if lines_done.insert((a.value(), b.value())) {
            let cond = encode_tuple_set(&[(0, &xa)]);
            for abscissa in 0..(1u32 << w) {
                let x = FieldElement::new(w, abscissa)?;
                let y = a.mul(&x).add(b);
                let point = point_bits(w, &x, &y);
                let target = encode_tuple_set(&[(1, &point)]);
                d.add(fe_bits(&x), Some(cond.clone()), target);
            }
        }
    }
    Ok(LinePointScenario { w, decompressor: d, tuples, starred: 0 })
}

/// A random conditional toy decompressor over `ell`-tuples of
/// `coord_bits`-bit coordinates: for every subset of coordinates, the
/// tuples agreeing with a condition are indexed by fixed-length programs,
/// so all conditional complexities are small and explicit.
pub fn random_tuple_toy(
    ell: usize,
    coord_bits: usize,
    tuple_count: usize,
    rng: &mut SplitMix64,
) -> (ToyDecompressor, Vec<Vec<BitString>>) {
    let mut tuples: Vec<Vec<BitString>> = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    while tuples.len() < tuple_count {
        let raw: Vec<u64> = (0..ell).map(|_| rng.next_bits(coord_bits as u32)).collect();
        if seen.insert(raw.clone()) {
            tuples.push(
                raw.iter()
                    .map(|&v| BitString::from_uint(v as u128, coord_bits).unwrap())
                    .collect(),
            );
        }
    }
    let mut d = ToyDecompressor::new();
    // for every target subset J (as mask), group tuples by the complement
    // coordinates and index each group with fixed-length programs; the
    // grouping map is ordered so program assignment is reproducible
    for mask in 1u32..(1 << ell) {
        let mut groups: std::collections::BTreeMap<BitString, Vec<usize>> =
            std::collections::BTreeMap::new();
        for (i, tuple) in tuples.iter().enumerate() {
            let rest: Vec<(usize, &BitString)> = (0..ell)
                .filter(|j| mask >> j & 1 == 0)
                .map(|j| (j, &tuple[j]))
                .collect();
            groups.entry(encode_tuple_set(&rest)).or_default().push(i);
        }
        for (cond, members) in groups {
            // distinct targets within the group, first witness wins
            let mut targets: Vec<BitString> = Vec::new();
            for &i in &members {
                let j_pairs: Vec<(usize, &BitString)> = (0..ell)
                    .filter(|j| mask >> j & 1 == 1)
                    .map(|j| (j, &tuples[i][j]))
                    .collect();
                let t = encode_tuple_set(&j_pairs);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            let plen = ceil_log2_u128(targets.len().max(2) as u128).max(1);
            for (idx, target) in targets.into_iter().enumerate() {
                let program = BitString::from_uint(idx as u128, plen as usize).unwrap();
                d.add(program, Some(cond.clone()), target);
            }
        }
    }
    (d, tuples)
}
