//! Product inverse for two senders over sets with bounded slices.
//!
//! Given inverses `g1`, `g2` of the per-coordinate fingerprints (with the
//! query values already bound), the pair is recovered from a set `S` of
//! candidate pairs satisfying `#S <= K1 K2`, at most `K2` pairs per left
//! coordinate, and at most `K1` pairs per right coordinate.  The left
//! inverse runs twice: once on the column of the pair's right coordinate
//! and once on a balanced part, which prunes the survivor set down to at
//! most one pair per part before the right inverse picks the answer.

use std::collections::HashMap;

use crate::bits::BitString;
use crate::error::{Error, Result};

/// What the partition looked like, for assertions and reports.
#[derive(Debug, Clone)]
pub struct TwoSourceReport {
    pub part_sizes: Vec<usize>,
    pub survivor_count: usize,
}

/// Recovers a pair from `s` using bound inverses `g1`, `g2`.
pub fn two_source_invert(
    s: &[(BitString, BitString)],
    k1: usize,
    k2: usize,
    g1: impl Fn(&[BitString]) -> Option<BitString>,
    g2: impl Fn(&[BitString]) -> Option<BitString>,
) -> Result<(Option<(BitString, BitString)>, TwoSourceReport)> {
    if s.len() > k1 * k2 {
        return Err(Error::Domain(format!("|S| = {} above K1 K2 = {}", s.len(), k1 * k2)));
    }
    let mut per_left: HashMap<&BitString, Vec<usize>> = HashMap::new();
    let mut per_right: HashMap<&BitString, Vec<usize>> = HashMap::new();
    for (i, (a, b)) in s.iter().enumerate() {
        per_left.entry(a).or_default().push(i);
        per_right.entry(b).or_default().push(i);
    }
    if per_left.values().any(|v| v.len() > k2) {
        return Err(Error::Domain(format!("a left coordinate has more than K2 = {k2} pairs")));
    }
    if per_right.values().any(|v| v.len() > k1) {
        return Err(Error::Domain(format!("a right coordinate has more than K1 = {k1} pairs")));
    }

    // balanced partition into K2 parts: the pairs of each left coordinate
    // go to distinct parts of smallest current size
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); k2];
    let mut part_of: Vec<usize> = vec![0; s.len()];
    let mut left_order: Vec<&BitString> = Vec::new();
    for (a, _) in s {
        if !left_order.contains(&a) {
            left_order.push(a);
        }
    }
    for a in left_order {
        let members = &per_left[a];
        let mut order: Vec<usize> = (0..k2).collect();
        order.sort_by_key(|&p| (parts[p].len(), p));
        for (slot, &pair_idx) in members.iter().enumerate() {
            let p = order[slot];
            parts[p].push(pair_idx);
            part_of[pair_idx] = p;
        }
    }
    for part in &parts {
        assert!(part.len() <= k1, "a part exceeds K1");
        let mut lefts: Vec<&BitString> = part.iter().map(|&i| &s[i].0).collect();
        lefts.dedup();
        assert_eq!(lefts.len(), part.len(), "a part repeats a left coordinate");
    }

    // survivors: pairs whose left coordinate wins in both its column and
    // its part
    let mut survivors: Vec<usize> = Vec::new();
    for (i, (a, b)) in s.iter().enumerate() {
        let column: Vec<BitString> =
            per_right[b].iter().map(|&j| s[j].0.clone()).collect();
        if g1(&column).as_ref() != Some(a) {
            continue;
        }
        let part_proj: Vec<BitString> =
            parts[part_of[i]].iter().map(|&j| s[j].0.clone()).collect();
        if g1(&part_proj).as_ref() != Some(a) {
            continue;
        }
        survivors.push(i);
    }
    let survivor_rights: Vec<BitString> = survivors.iter().map(|&i| s[i].1.clone()).collect();
    let answer = g2(&survivor_rights).and_then(|b2| {
        survivors
            .iter()
            .find(|&&i| s[i].1 == b2)
            .map(|&i| s[i].clone())
    });
    let report = TwoSourceReport {
        part_sizes: parts.iter().map(|p| p.len()).collect(),
        survivor_count: survivors.len(),
    };
    Ok((answer, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::{prime_hash, prime_hash_invert, PrimePool};
    use crate::rng::{EpsilonExp, Seed, SplitMix64};

    fn bs_of(v: u64, n: usize) -> BitString {
        BitString::from_uint(v as u128, n).unwrap()
    }

    #[test]
    fn singleton_set_returns_the_pair() {
        let a = bs_of(5, 4);
        let b = bs_of(9, 4);
        let s = vec![(a.clone(), b.clone())];
        let e = EpsilonExp::new(2).unwrap();
        let h1 = prime_hash(&a, e, 4, &Seed::from_value(1)).unwrap();
        let h2 = prime_hash(&b, e, 4, &Seed::from_value(2)).unwrap();
        let (got, report) = two_source_invert(
            &s,
            4,
            4,
            |list| prime_hash_invert(list, &h1).cloned(),
            |list| prime_hash_invert(list, &h2).cloned(),
        )
        .unwrap();
        assert_eq!(got, Some((a, b)));
        assert_eq!(report.survivor_count, 1);
    }

    #[test]
    fn slice_preconditions_enforced() {
        let e = |v| bs_of(v, 3);
        // three pairs sharing one left coordinate exceed K2 = 2
        let s = vec![(e(1), e(1)), (e(1), e(2)), (e(1), e(3))];
        let r = two_source_invert(&s, 4, 2, |_| None, |_| None);
        assert!(r.is_err());
    }

    #[test]
    fn partition_is_balanced_and_left_unique() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..50 {
            let (k1, k2) = (4usize, 3usize);
            let mut s: Vec<(BitString, BitString)> = Vec::new();
            // random set respecting the slice bounds
            'outer: for a in 0..6u64 {
                for b in 0..6u64 {
                    if rng.next_f64() < 0.4 {
                        let cand = (bs_of(a, 4), bs_of(b, 4));
                        let same_left = s.iter().filter(|(x, _)| *x == cand.0).count();
                        let same_right = s.iter().filter(|(_, y)| *y == cand.1).count();
                        if same_left < k2 && same_right < k1 && s.len() < k1 * k2 {
                            s.push(cand);
                        }
                        if s.len() == k1 * k2 {
                            break 'outer;
                        }
                    }
                }
            }
            let (_, report) = two_source_invert(&s, k1, k2, |_| None, |_| None).unwrap();
            assert!(report.part_sizes.iter().all(|&sz| sz <= k1));
            assert_eq!(report.part_sizes.iter().sum::<usize>(), s.len());
        }
    }

    #[test]
    fn failure_rate_bounded_by_three_eps_exact() {
        // exact enumeration over both prime pools at n = 4: the failure
        // fraction for each pair is at most 3 eps
        let e = EpsilonExp::new(1).unwrap();
        let n = 4usize;
        let (k1, k2) = (3usize, 3usize);
        let s_param = crate::hashing::pool_size_param(k1 as u128, n as u64, e);
        let pool = PrimePool::build(s_param).unwrap();
        let primes = pool.primes().unwrap().to_vec();

        let mut rng = SplitMix64::new(4);
        for _ in 0..6 {
            // a random slice-bounded set containing a designated pair
            let mut s: Vec<(BitString, BitString)> = Vec::new();
            while s.len() < 7 {
                let cand = (bs_of(rng.next_below(16), n), bs_of(rng.next_below(16), n));
                let same_left = s.iter().filter(|(x, _)| *x == cand.0).count();
                let same_right = s.iter().filter(|(_, y)| *y == cand.1).count();
                if !s.contains(&cand) && same_left < k2 && same_right < k1 {
                    s.push(cand);
                }
            }
            let x = s[3].clone();
            let mut fails = 0u64;
            let total = (primes.len() * primes.len()) as u64;
            for &p1 in &primes {
                for &p2 in &primes {
                    let h1 = crate::hashing::PrimeHash { p: p1, residue: x.0.mod_u64(p1) };
                    let h2 = crate::hashing::PrimeHash { p: p2, residue: x.1.mod_u64(p2) };
                    let (got, _) = two_source_invert(
                        &s,
                        k1,
                        k2,
                        |list| prime_hash_invert(list, &h1).cloned(),
                        |list| prime_hash_invert(list, &h2).cloned(),
                    )
                    .unwrap();
                    if got.as_ref() != Some(&x) {
                        fails += 1;
                    }
                }
            }
            // fails / total <= 3 eps, compared exactly
            assert!(
                fails as u128 * e.denominator() <= 3 * total as u128,
                "failure fraction {} / {} above 3 eps",
                fails,
                total
            );
        }
    }
}
