//! Streaming list inversion of condenser fingerprints.
//!
//! For a table `f` and a query symbol `y`, the pruning function `G(S, y)`
//! keeps the first `a * D` stream appearances of suspects `z` with
//! `f(z, d) = y` for some seed `d`.  A suspect whose seed-fraction of
//! missed buckets exceeds `2 eps` is deficient; the reanalyze function `R`
//! collects deficient suspects, and the cascade feeds them to the next
//! level.  With a certified condenser each level rejects at most half of
//! its input, so a fixed number of levels suffices and the whole structure
//! stays append-only (hence monotone) under stream extension.

use std::collections::HashMap;
use std::sync::Arc;

use crate::bits::BitString;
use crate::condensers::CondenserTable;
use crate::rng::EpsilonExp;

#[derive(Debug, Clone)]
pub struct PruneParams {
    pub table: Arc<CondenserTable>,
    /// Bucket capacity factor `a`; buckets hold `a * D` appearances.
    pub accept_factor: u64,
    pub eps: EpsilonExp,
    /// Number of cascade levels; an element rejected by the last level
    /// trips the depth assertion (a broken certificate).
    pub depth: usize,
}

impl PruneParams {
    /// Depth for a conductor certified up to sets of size `m`:
    /// `ceil(log2(2m))` levels empty the rejection chain.
    pub fn conductor_depth(m: u64) -> usize {
        (ceil_log2(2 * m.max(1) as u128)) as usize
    }
}

fn ceil_log2(v: u128) -> u32 {
    crate::hashing::ceil_log2_u128(v)
}

#[derive(Debug, Default)]
struct Level {
    /// Per symbol: accepted elements with their global arrival index.
    buckets: HashMap<u128, Vec<(BitString, u64)>>,
    /// Deficient elements in arrival order; the stream of the next level.
    rejected: Vec<BitString>,
    arrived: usize,
}

/// One push outcome: which symbols accepted the element, per level.
#[derive(Debug, Clone, Default)]
pub struct PushReport {
    /// `(level, symbol)` pairs whose bucket accepted the element.
    pub joined: Vec<(usize, u128)>,
    /// Levels that marked the element deficient.
    pub rejected_at: Vec<usize>,
}

/// The cascade of pruning levels for a single table.
#[derive(Debug)]
pub struct PruneCascade {
    params: PruneParams,
    levels: Vec<Level>,
    pushes: u64,
}

impl PruneCascade {
    pub fn new(params: PruneParams) -> Self {
        let mut levels = Vec::with_capacity(params.depth);
        for _ in 0..params.depth {
            levels.push(Level::default());
        }
        Self { params, levels, pushes: 0 }
    }

    pub fn params(&self) -> &PruneParams {
        &self.params
    }

    /// Feeds one suspect through the cascade.  Panics if an element is
    /// rejected by the last level, which a certified conductor rules out.
    pub fn push(&mut self, z: &BitString) -> PushReport {
        let mut report = PushReport::default();
        let seq = self.pushes;
        self.pushes += 1;
        let table = self.params.table.clone();
        let cap = (self.params.accept_factor * table.degree()) as usize;
        let denom = self.params.eps.denominator();
        let mut level_idx = 0usize;
        loop {
            assert!(
                level_idx < self.levels.len(),
                "pruning depth {} exceeded; the condenser certificate does not hold",
                self.levels.len()
            );
            let level = &mut self.levels[level_idx];
            level.arrived += 1;
            // distinct symbols of z with their seed multiplicities
            let mut image: Vec<(u128, u64)> = Vec::new();
            for d in 0..table.degree() {
                let y = table.eval_bits(z, d);
                match image.iter_mut().find(|(v, _)| *v == y) {
                    Some((_, c)) => *c += 1,
                    None => image.push((y, 1)),
                }
            }
            let mut missed: u64 = 0;
            for (y, count) in &image {
                let bucket = level.buckets.entry(*y).or_default();
                if bucket.len() < cap {
                    bucket.push((z.clone(), seq));
                    report.joined.push((level_idx, *y));
                } else {
                    missed += count;
                }
            }
            // deficient iff missed / D > 2 eps, compared exactly
            let deficient = missed as u128 * denom > 2 * table.degree() as u128;
            if deficient {
                report.rejected_at.push(level_idx);
                level.rejected.push(z.clone());
                level_idx += 1;
            } else {
                return report;
            }
        }
    }

    /// `G'(S, y)`: candidates over all levels, level-major, arrival order
    /// within a bucket.
    pub fn candidates(&self, y: u128) -> Vec<&BitString> {
        let mut out = Vec::new();
        for level in &self.levels {
            if let Some(bucket) = level.buckets.get(&y) {
                out.extend(bucket.iter().map(|(z, _)| z));
            }
        }
        out
    }

    /// Candidates with the arrival index at which each became one; the
    /// committed answer of an online inverse is the earliest arrival that
    /// matches its tag.
    pub fn candidates_with_seq(&self, y: u128) -> Vec<(&BitString, u64)> {
        let mut out = Vec::new();
        for level in &self.levels {
            if let Some(bucket) = level.buckets.get(&y) {
                out.extend(bucket.iter().map(|(z, s)| (z, *s)));
            }
        }
        out
    }

    /// Rejection list of level 0, i.e. `R(S)` of the plain single-level
    /// reading of the structure.
    pub fn rejected_first_level(&self) -> &[BitString] {
        &self.levels[0].rejected
    }

    pub fn level_arrivals(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.arrived).collect()
    }

    /// The deepest level that received any element, plus one.
    pub fn used_depth(&self) -> usize {
        self.levels.iter().rposition(|l| l.arrived > 0).map_or(0, |i| i + 1)
    }
}

/// `G(S, y)` as a plain function: the first `a * D` appearances (stream
/// order) of suspects matching `y` under some seed.
pub fn list_invert_g(
    table: &Arc<CondenserTable>,
    stream: &[BitString],
    y: u128,
    accept_factor: u64,
) -> Vec<BitString> {
    let mut cascade = PruneCascade::new(PruneParams {
        table: table.clone(),
        accept_factor,
        eps: EpsilonExp::new(1).unwrap(),
        depth: PruneParams::conductor_depth(stream.len().max(1) as u64),
    });
    for z in stream {
        cascade.push(z);
    }
    cascade
        .levels
        .first()
        .and_then(|l| l.buckets.get(&y))
        .map(|b| b.iter().map(|(z, _)| z.clone()).collect())
        .unwrap_or_default()
}

/// `R(S)`: suspects whose exact miss fraction over seeds exceeds `2 eps`.
pub fn rejects_r(
    table: &Arc<CondenserTable>,
    stream: &[BitString],
    accept_factor: u64,
    eps: EpsilonExp,
) -> Vec<BitString> {
    let mut cascade = PruneCascade::new(PruneParams {
        table: table.clone(),
        accept_factor,
        eps,
        depth: PruneParams::conductor_depth(stream.len().max(1) as u64) + 1,
    });
    for z in stream {
        cascade.push(z);
    }
    cascade.levels[0].rejected.clone()
}

/// Full recursive pruning for a conductor: candidates across all levels.
/// `m_bound` is the certified set-size bound; the recursion depth is
/// `ceil(log2(2 m_bound))` and the output has at most `D` elements per
/// level.
pub fn prune_gprime(
    table: &Arc<CondenserTable>,
    stream: &[BitString],
    y: u128,
    eps: EpsilonExp,
    m_bound: u64,
) -> Vec<BitString> {
    let mut cascade = PruneCascade::new(PruneParams {
        table: table.clone(),
        accept_factor: 1,
        eps,
        depth: PruneParams::conductor_depth(m_bound),
    });
    for z in stream {
        cascade.push(z);
    }
    cascade.candidates(y).into_iter().cloned().collect()
}

#[derive(Debug, Default)]
struct PartLevel {
    parts: Vec<Level>,
    arrived: usize,
}

/// Partitioned cascade: each level splits its stream round-robin into `b`
/// parts of bounded size and prunes each part independently; deficient
/// elements of all parts flow to the next level.  Rejections emerging from
/// the last level are the reanalyze output.
#[derive(Debug)]
pub struct PartitionedCascade {
    table: Arc<CondenserTable>,
    accept_factor: u64,
    parts: u64,
    eps: EpsilonExp,
    levels: Vec<PartLevel>,
    final_rejects: Vec<BitString>,
    pushes: u64,
}

impl PartitionedCascade {
    /// `a` is the bucket factor, `b` the part count; the level count is
    /// `ceil(log2(2b))`, after which at most half a part-size remains.
    pub fn new(table: Arc<CondenserTable>, accept_factor: u64, parts: u64, eps: EpsilonExp) -> Self {
        let depth = ceil_log2(2 * parts.max(1) as u128) as usize;
        let mut levels = Vec::with_capacity(depth);
        for _ in 0..depth {
            let mut pl = PartLevel::default();
            for _ in 0..parts {
                pl.parts.push(Level::default());
            }
            levels.push(pl);
        }
        Self { table, accept_factor, parts, eps, levels, final_rejects: Vec::new(), pushes: 0 }
    }

    pub fn push(&mut self, z: &BitString) -> PushReport {
        let mut report = PushReport::default();
        self.pushes += 1;
        let cap = (self.accept_factor * self.table.degree()) as usize;
        let denom = self.eps.denominator();
        let mut level_idx = 0usize;
        loop {
            if level_idx == self.levels.len() {
                self.final_rejects.push(z.clone());
                return report;
            }
            let level = &mut self.levels[level_idx];
            let part = &mut level.parts[level.arrived % self.parts as usize];
            level.arrived += 1;
            part.arrived += 1;
            let mut image: Vec<(u128, u64)> = Vec::new();
            for d in 0..self.table.degree() {
                let y = self.table.eval_bits(z, d);
                match image.iter_mut().find(|(v, _)| *v == y) {
                    Some((_, c)) => *c += 1,
                    None => image.push((y, 1)),
                }
            }
            let mut missed: u64 = 0;
            for (y, count) in &image {
                let bucket = part.buckets.entry(*y).or_default();
                if bucket.len() < cap {
                    bucket.push((z.clone(), self.pushes));
                    report.joined.push((level_idx, *y));
                } else {
                    missed += count;
                }
            }
            if missed as u128 * denom > 2 * self.table.degree() as u128 {
                report.rejected_at.push(level_idx);
                part.rejected.push(z.clone());
                level_idx += 1;
            } else {
                return report;
            }
        }
    }

    /// Selected candidates for `y` over all levels and parts.
    pub fn candidates(&self, y: u128) -> Vec<&BitString> {
        let mut out = Vec::new();
        for level in &self.levels {
            for part in &level.parts {
                if let Some(bucket) = part.buckets.get(&y) {
                    out.extend(bucket.iter().map(|(z, _)| z));
                }
            }
        }
        out
    }

    /// Elements rejected past the last level.
    pub fn final_rejects(&self) -> &[BitString] {
        &self.final_rejects
    }

    pub fn rounds_used(&self) -> usize {
        self.levels.iter().rposition(|l| l.arrived > 0).map_or(0, |i| i + 1)
            + usize::from(!self.final_rejects.is_empty())
    }
}

/// Runs the partitioned pruner over a finished stream and returns
/// `(selected candidates for y, rejected elements)`.
pub fn pruning_large(
    table: &Arc<CondenserTable>,
    stream: &[BitString],
    y: u128,
    accept_factor: u64,
    parts: u64,
    eps: EpsilonExp,
) -> (Vec<BitString>, Vec<BitString>) {
    let mut cascade = PartitionedCascade::new(table.clone(), accept_factor, parts, eps);
    for z in stream {
        cascade.push(z);
    }
    let selected = cascade.candidates(y).into_iter().cloned().collect();
    (selected, cascade.final_rejects.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condensers::{random_condenser, verify_conductor, VerifyMode};
    use crate::rng::Seed;

    fn strings_of(n: usize, values: &[u64]) -> Vec<BitString> {
        values.iter().map(|&v| BitString::from_uint(v as u128, n).unwrap()).collect()
    }

    fn certified_table(n: u32, k: u64, e: EpsilonExp, seed: u64) -> Arc<CondenserTable> {
        let t = random_condenser(n, k, e, &Seed::from_value(seed));
        let cert = verify_conductor(&t, k, e.eps(), VerifyMode::Exhaustive).unwrap();
        assert!(cert.verified);
        Arc::new(t)
    }

    #[test]
    fn g_empty_and_identity() {
        let ident = Arc::new(CondenserTable::identity(4));
        assert!(list_invert_g(&ident, &[], 3, 1).is_empty());
        let s = strings_of(4, &[1, 3, 7]);
        assert_eq!(list_invert_g(&ident, &s, 3, 1), strings_of(4, &[3]));
        assert!(list_invert_g(&ident, &s, 5, 1).is_empty());
    }

    #[test]
    fn rejects_identity_empty_constant_negative() {
        let ident = Arc::new(CondenserTable::identity(4));
        let s = strings_of(4, &[0, 1, 2, 3]);
        assert!(rejects_r(&ident, &s, 1, EpsilonExp::new(2).unwrap()).is_empty());

        // constant table: everything funnels into one bucket of capacity
        // a * D = 1, so all but the first element miss every seed
        let constant = Arc::new(CondenserTable::dense(4, 1, 2, vec![0; 16]).unwrap());
        let r = rejects_r(&constant, &s, 1, EpsilonExp::new(2).unwrap());
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn exact_miss_fraction_and_rejection_bound_exhaustive() {
        // every subset S of {0,1}^4 with |S| <= 4: for x outside R(S) the
        // exact seed fraction missing the bucket is <= 2 eps, and
        // |R(S)| <= |S| / 2
        let e = EpsilonExp::new(1).unwrap();
        let table = certified_table(4, 4, e, 40);
        let all: Vec<u64> = (0..16).collect();
        let mut sets: Vec<Vec<u64>> = Vec::new();
        for size in 1..=4usize {
            subsets_of(&all, size, &mut sets);
        }
        for set in &sets {
            let s = strings_of(4, set);
            let rejected = rejects_r(&table, &s, 1, e);
            assert!(
                rejected.len() <= s.len() / 2,
                "|R| = {} for |S| = {}",
                rejected.len(),
                s.len()
            );
            // per-element exact miss fraction, recomputed independently
            let mut cascade = PruneCascade::new(PruneParams {
                table: table.clone(),
                accept_factor: 1,
                eps: e,
                depth: 6,
            });
            let mut reports = Vec::new();
            for z in &s {
                reports.push(cascade.push(z));
            }
            for (z, report) in s.iter().zip(&reports) {
                if report.rejected_at.contains(&0) {
                    continue;
                }
                let mut missed = 0u64;
                for d in 0..table.degree() {
                    let y = table.eval_bits(z, d);
                    let in_bucket = cascade.levels[0]
                        .buckets
                        .get(&y)
                        .map(|b| b.iter().any(|(e, _)| e == z))
                        .unwrap_or(false);
                    if !in_bucket {
                        missed += 1;
                    }
                }
                // missed / D <= 2 eps exactly
                assert!(
                    missed as u128 * e.denominator() <= 2 * table.degree() as u128,
                    "miss fraction above 2 eps for {z}"
                );
            }
        }
    }

    fn subsets_of(items: &[u64], size: usize, out: &mut Vec<Vec<u64>>) {
        fn rec(items: &[u64], size: usize, start: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            if cur.len() == size {
                out.push(cur.clone());
                return;
            }
            for i in start..items.len() {
                cur.push(items[i]);
                rec(items, size, i + 1, cur, out);
                cur.pop();
            }
        }
        rec(items, size, 0, &mut Vec::new(), out);
    }

    #[test]
    fn gprime_bounds_exhaustive() {
        // depth <= log2(2M) and output length <= D * log2(2M), checked on
        // every subset at n = 4, M = 4
        let e = EpsilonExp::new(1).unwrap();
        let table = certified_table(4, 4, e, 41);
        let m_bound = 4u64;
        let depth_bound = PruneParams::conductor_depth(m_bound);
        assert_eq!(depth_bound, 3);
        let all: Vec<u64> = (0..16).collect();
        let mut sets = Vec::new();
        for size in 1..=4usize {
            subsets_of(&all, size, &mut sets);
        }
        for set in &sets {
            let s = strings_of(4, set);
            let mut cascade = PruneCascade::new(PruneParams {
                table: table.clone(),
                accept_factor: 1,
                eps: e,
                depth: depth_bound,
            });
            for z in &s {
                cascade.push(z);
            }
            assert!(cascade.used_depth() <= depth_bound);
            for y in 0..table.range() {
                let cands = cascade.candidates(y);
                assert!(cands.len() as u64 <= table.degree() * depth_bound as u64);
            }
        }
    }

    #[test]
    fn gprime_exact_recovery_probability() {
        // Pr over seeds [x in G'(S, f(x, .))] >= 1 - 2 eps for every x in
        // S, by exact seed enumeration
        let e = EpsilonExp::new(1).unwrap();
        let table = certified_table(4, 4, e, 42);
        let s = strings_of(4, &[2, 5, 11, 14]);
        let mut cascade = PruneCascade::new(PruneParams {
            table: table.clone(),
            accept_factor: 1,
            eps: e,
            depth: 3,
        });
        for z in &s {
            cascade.push(z);
        }
        for x in &s {
            let mut missed = 0u64;
            for d in 0..table.degree() {
                let y = table.eval_bits(x, d);
                if !cascade.candidates(y).contains(&x) {
                    missed += 1;
                }
            }
            assert!(
                missed as u128 * e.denominator() <= 2 * table.degree() as u128,
                "recovery failure above 2 eps"
            );
        }
    }

    #[test]
    fn empty_stream_gives_empty_everything() {
        let e = EpsilonExp::new(1).unwrap();
        let table = certified_table(4, 4, e, 43);
        let cascade = PruneCascade::new(PruneParams {
            table,
            accept_factor: 1,
            eps: e,
            depth: 3,
        });
        assert!(cascade.candidates(0).is_empty());
        assert!(cascade.rejected_first_level().is_empty());
    }

    #[test]
    fn pruning_large_b1_reduces_to_single_level() {
        let e = EpsilonExp::new(1).unwrap();
        let table = certified_table(4, 4, e, 44);
        let s = strings_of(4, &[1, 4, 9, 13]);
        for y in 0..8u128 {
            let (sel, rej) = pruning_large(&table, &s, y, 1, 1, e);
            let g = list_invert_g(&table, &s, y, 1);
            // with b = 1 and one part, level-0 selections equal G; the
            // cascade may push rejects one level deeper
            assert!(g.iter().all(|z| sel.contains(z)));
            let r = rejects_r(&table, &s, 1, e);
            for z in &rej {
                assert!(r.contains(z));
            }
        }
    }

    #[test]
    fn pruning_large_bounds_exhaustive() {
        // n = 4, M = 4, b = 2: recursion rounds <= log2(2b) = 2, selected
        // <= a b D log(2b), rejected <= M / 2, on every S of size <= bM
        let e = EpsilonExp::new(1).unwrap();
        let table = certified_table(4, 4, e, 45);
        let (a, b, m) = (1u64, 2u64, 4u64);
        let all: Vec<u64> = (0..16).collect();
        let mut sets = Vec::new();
        for size in 1..=(b * m) as usize {
            subsets_of(&all, size, &mut sets);
        }
        let round_bound = ceil_log2(2 * b as u128) as usize;
        for set in sets.iter().step_by(7) {
            let s = strings_of(4, set);
            let mut cascade = PartitionedCascade::new(table.clone(), a, b, e);
            for z in &s {
                cascade.push(z);
            }
            assert!(cascade.rounds_used() <= round_bound + 1);
            assert!(cascade.final_rejects().len() as u64 <= m / 2);
            for y in 0..table.range() {
                let sel = cascade.candidates(y);
                assert!(
                    sel.len() as u128
                        <= (a * b * table.degree()) as u128 * round_bound as u128,
                    "selected {} too large",
                    sel.len()
                );
            }
        }
    }

    #[test]
    fn monotone_under_extension() {
        // candidates and rejections only grow as the stream extends, and
        // presence never flips
        let e = EpsilonExp::new(1).unwrap();
        let table = certified_table(4, 4, e, 46);
        let s = strings_of(4, &[3, 14, 7, 0, 9, 12, 5, 1]);
        let mut cascade = PruneCascade::new(PruneParams {
            table: table.clone(),
            accept_factor: 1,
            eps: e,
            depth: 5,
        });
        let mut snapshots: Vec<std::collections::HashMap<u128, Vec<BitString>>> = Vec::new();
        for z in &s {
            cascade.push(z);
            let mut snap = std::collections::HashMap::new();
            for y in 0..table.range() {
                snap.insert(y, cascade.candidates(y).into_iter().cloned().collect::<Vec<_>>());
            }
            snapshots.push(snap);
        }
        for w in snapshots.windows(2) {
            for (y, earlier) in &w[0] {
                let later = &w[1][y];
                for z in earlier {
                    assert!(later.contains(z), "candidate vanished under extension");
                }
            }
        }
    }
}
