//! The alternative fingerprint pipeline: a chain of condensing steps with
//! geometrically shrinking budgets, ending in plain prime hashing.
//!
//! At suspect budget `2^k`, one step concatenates a condenser symbol for
//! `kappa = ceil(k/3)` (a table condensing sets of size `2^(2 kappa)` down
//! to `(1/2^kappa)`-excess) and recurses at `k' = 2 kappa + b`, where `2^b`
//! bounds the per-step candidate blow-up.  Once `k < 100 b` the chain
//! bottoms out in a prime hash.  Each step costs `2 eps` of error and the
//! base `eps`, so a chain of depth `d` is declared at `(2d + 1) eps`.

use std::sync::Arc;

use crate::bits::BitString;
use crate::condensers::CondenserTable;
use crate::error::{Error, Result};
use crate::hashing::{ceil_log2_u128, PrimeHash};
use crate::rng::{EpsilonExp, Seed};

/// Budget multiplier below which the chain switches to prime hashing.
pub const BASE_CASE_FACTOR: u64 = 100;

/// One condensing step of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSpec {
    /// Suspect budget exponent entering this step.
    pub k: u64,
    /// Condenser output budget `kappa = ceil(k/3)`.
    pub kappa: u64,
}

/// The full parameter schedule of the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursionSchedule {
    pub b: u64,
    pub levels: Vec<LevelSpec>,
    /// Budget exponent of the prime-hash base case.
    pub base_k: u64,
}

/// Computes the schedule for suspect budget `2^k` with blow-up bound `b`.
pub fn recursion_schedule(k: u64, b: u64) -> Result<RecursionSchedule> {
    if b == 0 {
        return Err(Error::Domain("blow-up exponent b must be positive".into()));
    }
    let mut levels = Vec::new();
    let mut cur = k;
    while cur >= BASE_CASE_FACTOR * b {
        let kappa = cur.div_ceil(3);
        levels.push(LevelSpec { k: cur, kappa });
        cur = 2 * kappa + b;
        debug_assert!(levels.len() < 4096, "schedule failed to shrink");
    }
    Ok(RecursionSchedule { b, levels, base_k: cur })
}

impl RecursionSchedule {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Declared error multiplier: `2` per condensing step plus `1` for the
    /// base, all at the per-level epsilon.
    pub fn error_multiplier(&self) -> u64 {
        2 * self.depth() as u64 + 1
    }

    /// Declared output length `k + b * d` plus the base hash.
    pub fn symbol_bits(&self) -> u64 {
        self.levels.iter().map(|l| l.kappa).sum()
    }
}

/// A schedule bound to concrete condenser tables for a fixed input length.
#[derive(Debug, Clone)]
pub struct RecursionPipeline {
    pub n: u64,
    pub schedule: RecursionSchedule,
    /// One table per level: a `(2^(2 kappa) -> 2^kappa, eps)`-condenser.
    pub tables: Vec<Arc<CondenserTable>>,
    pub level_eps: EpsilonExp,
    /// Prime-pool parameter of the base hash.
    pub pool_s: u32,
}

/// Builds the pipeline for `n`-bit inputs with per-level condensers from
/// `make_table(kappa) -> table`, or the identity shortcut when `k >= n`.
///
/// Passing an explicit schedule lets tests exercise the chain at sizes
/// where the standard schedule would bottom out immediately.
pub fn build_recursion_pipeline(
    n: u64,
    schedule: RecursionSchedule,
    level_eps: EpsilonExp,
    make_table: impl Fn(u64) -> Arc<CondenserTable>,
) -> Result<RecursionPipeline> {
    if schedule.base_k > 120 {
        return Err(Error::Scale(format!("base budget 2^{} beyond desk scale", schedule.base_k)));
    }
    let mut tables = Vec::with_capacity(schedule.levels.len());
    for level in &schedule.levels {
        let t = make_table(level.kappa);
        if t.range() != 1u128 << level.kappa {
            return Err(Error::Dimension(format!(
                "level table range {} is not 2^{}",
                t.range(),
                level.kappa
            )));
        }
        tables.push(t);
    }
    let pool_s = ceil_log2_u128((1u128 << schedule.base_k).max(1) * n.max(1) as u128)
        + level_eps.exponent();
    Ok(RecursionPipeline { n, schedule, tables, level_eps, pool_s })
}

/// The chained fingerprint: one symbol per condensing level plus the base
/// prime tag; the identity body short-circuits everything when `k >= n`.
#[derive(Debug, Clone)]
pub struct RecursionFingerprint {
    pub identity_body: Option<BitString>,
    pub symbols: Vec<u128>,
    pub tag: Option<PrimeHash>,
}

/// Evaluates the chain on `x`.
pub fn recursion_fingerprint(
    x: &BitString,
    pipeline: &RecursionPipeline,
    seed: &Seed,
) -> Result<RecursionFingerprint> {
    let first_k = pipeline.schedule.levels.first().map_or(pipeline.schedule.base_k, |l| l.k);
    if first_k >= x.len() as u64 {
        return Ok(RecursionFingerprint { identity_body: Some(x.clone()), symbols: vec![], tag: None });
    }
    let mut rng = seed.rng();
    let mut symbols = Vec::with_capacity(pipeline.tables.len());
    for table in &pipeline.tables {
        let d = rng.next_below(table.degree());
        symbols.push(table.eval_bits(x, d));
    }
    let pool = crate::hashing::pool_cached(pipeline.pool_s)?;
    let p = pool.sample(&mut rng);
    let tag = PrimeHash { p, residue: x.mod_u64(p) };
    Ok(RecursionFingerprint { identity_body: None, symbols, tag: Some(tag) })
}

/// Online inverse of the chained fingerprint.
///
/// Level `i` runs the partitioned pruner for its table with
/// `a = b = 2^kappa_i`; candidates for the level symbol and final rejects
/// both flow to the next level, and the base commits on the first suspect
/// matching the prime tag.
#[derive(Debug)]
pub struct RecursionInverter {
    fp: RecursionFingerprint,
    cascades: Vec<super::prune::PartitionedCascade>,
    forwarded: Vec<std::collections::HashSet<BitString>>,
    committed: Option<BitString>,
}

impl RecursionInverter {
    pub fn new(pipeline: &RecursionPipeline, fp: RecursionFingerprint) -> Self {
        let mut cascades = Vec::new();
        let mut forwarded = Vec::new();
        if fp.identity_body.is_none() {
            for (level, table) in pipeline.schedule.levels.iter().zip(&pipeline.tables) {
                let factor = 1u64 << level.kappa.min(20);
                cascades.push(super::prune::PartitionedCascade::new(
                    table.clone(),
                    factor,
                    factor,
                    pipeline.level_eps,
                ));
                forwarded.push(std::collections::HashSet::new());
            }
        }
        Self { fp, cascades, forwarded, committed: None }
    }

    pub fn committed(&self) -> Option<&BitString> {
        self.committed.as_ref()
    }

    pub fn push(&mut self, z: &BitString) {
        if self.committed.is_some() {
            return;
        }
        if let Some(body) = &self.fp.identity_body {
            if z == body {
                self.committed = Some(z.clone());
            }
            return;
        }
        self.feed_level(0, z);
    }

    fn feed_level(&mut self, level: usize, z: &BitString) {
        if self.committed.is_some() {
            return;
        }
        if level == self.cascades.len() {
            // base case: first tag match commits
            if let Some(tag) = &self.fp.tag {
                if tag.matches(z) {
                    self.committed = Some(z.clone());
                }
            }
            return;
        }
        let report = self.cascades[level].push(z);
        let symbol = self.fp.symbols[level];
        let survives = report.joined.iter().any(|&(_, y)| y == symbol)
            || self.cascades[level]
                .final_rejects()
                .last()
                .is_some_and(|r| r == z);
        if survives && self.forwarded[level].insert(z.clone()) {
            self.feed_level(level + 1, z);
        }
    }

    pub fn invert_full<'a, I>(mut self, stream: I) -> Option<BitString>
    where
        I: IntoIterator<Item = &'a BitString>,
    {
        for z in stream {
            self.push(z);
        }
        self.committed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condensers::{verify_condenser, VerifyMode};
    use crate::rng::SplitMix64;

    #[test]
    fn schedule_arithmetic() {
        // k = 300, b = 3: kappa = 100, next budget 203, which is already
        // below 100 b and becomes the prime-hash base
        let s = recursion_schedule(300, 3).unwrap();
        assert_eq!(s.levels[0], LevelSpec { k: 300, kappa: 100 });
        assert_eq!(s.base_k, 203);
        assert!(s.base_k < BASE_CASE_FACTOR * 3);
        // a deeper chain: k = 3000, b = 1
        let s = recursion_schedule(3000, 1).unwrap();
        assert!(s.depth() >= 2);
        for w in s.levels.windows(2) {
            assert_eq!(w[1].k, 2 * w[0].kappa + 1);
        }
        assert!(s.base_k < BASE_CASE_FACTOR);
    }

    #[test]
    fn recursive_budget_shrinks_geometrically() {
        // next k is at most (5/6) k whenever k >= 100 b
        for b in 1..=6u64 {
            let mut k = BASE_CASE_FACTOR * b;
            while k < 4000 {
                let next = 2 * k.div_ceil(3) + b;
                assert!(
                    6 * next <= 5 * k,
                    "k' = {next} above (5/6) * {k} at b = {b}"
                );
                k += 97;
            }
        }
    }

    #[test]
    fn schedule_depth_logarithmic() {
        for b in 1..=4u64 {
            for k in [100 * b, 500, 2000, 50_000] {
                if k < BASE_CASE_FACTOR * b {
                    continue;
                }
                let s = recursion_schedule(k, b).unwrap();
                let log_bound = 6.0 * (k as f64).log2();
                assert!((s.depth() as f64) <= log_bound);
                assert_eq!(s.error_multiplier(), 2 * s.depth() as u64 + 1);
            }
        }
    }

    #[test]
    fn identity_shortcut_when_budget_covers_input() {
        let sched = recursion_schedule(40, 1).unwrap();
        assert!(sched.levels.is_empty());
        let pipeline = build_recursion_pipeline(8, sched, EpsilonExp::new(2).unwrap(), |_| {
            unreachable!("no levels")
        })
        .unwrap();
        let mut rng = SplitMix64::new(1);
        let x = BitString::random(&mut rng, 8);
        let fp = recursion_fingerprint(&x, &pipeline, &Seed::from_value(9)).unwrap();
        assert_eq!(fp.identity_body, Some(x.clone()));
        let inv = RecursionInverter::new(&pipeline, fp);
        assert_eq!(inv.invert_full([x.clone()].iter()), Some(x));
    }

    #[test]
    fn base_case_is_prime_hashing() {
        // standard schedule at desk scale has no condensing levels
        let sched = recursion_schedule(12, 4).unwrap();
        assert!(sched.levels.is_empty());
        assert_eq!(sched.base_k, 12);
        let pipeline =
            build_recursion_pipeline(20, sched, EpsilonExp::new(3).unwrap(), |_| unreachable!())
                .unwrap();
        let mut rng = SplitMix64::new(2);
        let x = BitString::random(&mut rng, 20);
        let fp = recursion_fingerprint(&x, &pipeline, &Seed::from_value(10)).unwrap();
        assert!(fp.identity_body.is_none());
        assert!(fp.symbols.is_empty());
        assert!(fp.tag.is_some());
    }

    /// A condenser table for sets of size `2^(2 kappa)` with range
    /// `2^kappa`, found by seeded search and certified by brute force.
    fn certified_level_table(n: u64, kappa: u64, eps: EpsilonExp) -> Arc<CondenserTable> {
        let degree = 3 * n * eps.denominator() as u64;
        for attempt in 0..200u64 {
            let t = CondenserTable::seeded(
                n as u32,
                degree,
                1u128 << kappa,
                crate::rng::mix(&[0xba5e, n, kappa, attempt]),
            );
            let cert =
                verify_condenser(&t, 1 << (2 * kappa), 1 << kappa, eps.eps(), VerifyMode::Auto)
                    .unwrap();
            if cert.verified {
                return Arc::new(t);
            }
        }
        panic!("no base condenser found at n = {n}, kappa = {kappa}");
    }

    #[test]
    fn forced_chain_inverts_on_small_instances() {
        // hand-built schedule with one condensing level at n = 10, so the
        // chain machinery actually runs at testable scale
        let e = EpsilonExp::new(2).unwrap();
        let n = 10u64;
        let schedule =
            RecursionSchedule { b: 1, levels: vec![LevelSpec { k: 6, kappa: 2 }], base_k: 5 };
        let pipeline =
            build_recursion_pipeline(n, schedule, e, |kappa| certified_level_table(n, kappa, e))
                .unwrap();
        let mut rng = SplitMix64::new(3);
        let trials = 600;
        let mut fails = 0u32;
        for t in 0..trials {
            let mut stream: Vec<BitString> = Vec::new();
            while stream.len() < 30 {
                let z = BitString::random(&mut rng, n as usize);
                if !stream.contains(&z) {
                    stream.push(z);
                }
            }
            let x = stream[(t as usize) % stream.len()].clone();
            let fp = recursion_fingerprint(&x, &pipeline, &Seed::from_value(600 + t)).unwrap();
            let inv = RecursionInverter::new(&pipeline, fp);
            if inv.invert_full(stream.iter()).as_ref() != Some(&x) {
                fails += 1;
            }
        }
        // declared error: (2 * 1 + 1) eps
        let declared = 3.0 * e.eps();
        let rate = fails as f64 / trials as f64;
        assert!(rate <= declared, "failure rate {rate} above declared {declared}");
    }
}
