//! Excess, condenser/conductor tables, and their brute-force verification.
//!
//! A table `f : [2^n] x [D] -> [Y]` is a `(K -> K', eps)`-condenser when
//! for every `K`-element subset `S` of the inputs, the `(1/K')`-excess of
//! `f(U_S, U_D)` is at most `eps`.  A `(K, eps)`-conductor satisfies this
//! with `K' = K''` for every `K'' <= K` simultaneously.  Verification
//! enumerates subsets exhaustively inside a hard scale guard and samples
//! them above it; a certificate records which mode produced its verdict.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{EpsilonExp, Seed, SplitMix64};

/// Probability tolerance used in excess comparisons.
pub const PROB_TOL: f64 = 1e-9;

/// A finite distribution over outcomes `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Domain("negative or NaN probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        Self { probs: counts.iter().map(|&c| c as f64 / total as f64).collect() }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn statistical_distance(&self, other: &Distribution) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// `sum_y max(0, P(y) - gamma)`: the probability mass above the cap.
pub fn excess(p: &Distribution, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma {gamma} outside [0, 1]")));
    }
    Ok(p.probs.iter().map(|&q| (q - gamma).max(0.0)).sum())
}

#[derive(Debug, Clone)]
enum Backing {
    Dense(Vec<u32>),
    Seeded { seed: u64 },
    Identity,
    /// Ignores the input and outputs the seed index.
    UniformRange,
}

/// A two-argument function `f : [2^n] x [D] -> [Y]`, total by construction.
///
/// Small tables are stored densely; larger ones derive entries on demand
/// from a seed so evaluation never materializes `2^n` rows.
#[derive(Debug, Clone)]
pub struct CondenserTable {
    n: u32,
    degree: u64,
    range: u128,
    backing: Backing,
}

impl CondenserTable {
    pub fn dense(n: u32, degree: u64, range: u128, entries: Vec<u32>) -> Result<Self> {
        if n > 30 {
            return Err(Error::Scale(format!("dense table at n = {n}")));
        }
        if entries.len() as u128 != (1u128 << n) * degree as u128 {
            return Err(Error::Dimension(format!(
                "table has {} entries, expected {}",
                entries.len(),
                (1u128 << n) * degree as u128
            )));
        }
        if entries.iter().any(|&y| y as u128 >= range) {
            return Err(Error::Domain("table entry outside the output range".into()));
        }
        Ok(Self { n, degree, range, backing: Backing::Dense(entries) })
    }

    pub fn seeded(n: u32, degree: u64, range: u128, seed: u64) -> Self {
        Self { n, degree, range, backing: Backing::Seeded { seed } }
    }

    pub fn identity(n: u32) -> Self {
        Self { n, degree: 1, range: 1u128 << n.min(127), backing: Backing::Identity }
    }

    pub fn uniform_range(n: u32, degree: u64, range: u128) -> Self {
        debug_assert!(degree as u128 <= range);
        Self { n, degree, range, backing: Backing::UniformRange }
    }

    pub fn input_bits(&self) -> u32 {
        self.n
    }

    pub fn degree(&self) -> u64 {
        self.degree
    }

    pub fn range(&self) -> u128 {
        self.range
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.backing, Backing::Identity)
    }

    /// `f(x, d)`.
    pub fn eval(&self, x: u128, d: u64) -> u128 {
        debug_assert!(self.n >= 127 || x < (1u128 << self.n));
        debug_assert!(d < self.degree);
        match &self.backing {
            Backing::Dense(t) => t[(x as usize) * self.degree as usize + d as usize] as u128,
            Backing::Seeded { seed } => {
                let h = crate::rng::mix(&[*seed, (x >> 64) as u64, x as u64, d]);
                ((h as u128).wrapping_mul(self.range) >> 64) % self.range
            }
            Backing::Identity => x,
            Backing::UniformRange => d as u128,
        }
    }

    /// `f(x, d)` for a bitstring input, usable beyond 127-bit lengths for
    /// seeded backings.  Agrees with `eval` on the integer value whenever
    /// that value exists.
    pub fn eval_bits(&self, x: &crate::bits::BitString, d: u64) -> u128 {
        match &self.backing {
            Backing::Seeded { seed } => {
                if x.len() <= 127 {
                    self.eval(x.to_uint().expect("length checked"), d)
                } else {
                    let mut words: Vec<u64> = vec![*seed];
                    let mut acc = 0u64;
                    for (i, b) in x.iter().enumerate() {
                        acc = (acc << 1) | b as u64;
                        if i % 64 == 63 {
                            words.push(acc);
                            acc = 0;
                        }
                    }
                    words.push(acc);
                    words.push(d);
                    let h = crate::rng::mix(&words);
                    ((h as u128).wrapping_mul(self.range) >> 64) % self.range
                }
            }
            Backing::UniformRange => d as u128,
            _ => self.eval(x.to_uint().expect("dense and identity tables need short inputs"), d),
        }
    }

    /// Distinct outputs of `x` over the whole seed space, with seed counts.
    pub fn image_counts(&self, x: u128) -> Vec<(u128, u64)> {
        let mut out: Vec<(u128, u64)> = Vec::new();
        for d in 0..self.degree {
            let y = self.eval(x, d);
            match out.iter_mut().find(|(v, _)| *v == y) {
                Some((_, c)) => *c += 1,
                None => out.push((y, 1)),
            }
        }
        out
    }

    /// Textual form: `CND1 n D Y` then `D * 2^n` integers, x-major.
    pub fn to_text(&self) -> Result<String> {
        if self.n > 16 {
            return Err(Error::Scale(format!("serializing table at n = {}", self.n)));
        }
        let mut s = format!("CND1 {} {} {}\n", self.n, self.degree, self.range);
        for x in 0..(1u128 << self.n) {
            let row: Vec<String> = (0..self.degree).map(|d| self.eval(x, d).to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some("CND1") => {}
            other => return Err(Error::Parse(format!("bad table magic {other:?}"))),
        }
        let mut next_int = |what: &str| -> Result<u128> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse(format!("missing or bad {what}")))
        };
        let n = next_int("n")? as u32;
        let degree = next_int("D")? as u64;
        let range = next_int("Y")?;
        if n > 16 {
            return Err(Error::Parse(format!("table header n = {n} too large")));
        }
        let count = (1u128 << n) * degree as u128;
        let mut entries = Vec::with_capacity(count as usize);
        let mut next_entry = tokens;
        for _ in 0..count {
            let t = next_entry
                .next()
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(|| Error::Parse("missing or bad table entry".into()))?;
            entries.push(t);
        }
        if next_entry.next().is_some() {
            return Err(Error::Parse("trailing tokens after table".into()));
        }
        CondenserTable::dense(n, degree, range, entries)
    }
}

/// How a verification verdict was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    /// Exhaustive when the guard allows it, sampled otherwise.
    Auto,
    Exhaustive,
    Sampled { trials: u64, seed: u64 },
}

/// Verification certificate for a condenser or conductor claim.
#[derive(Debug, Clone)]
pub struct CondenserCert {
    pub k: u64,
    pub k_prime: u64,
    pub eps: f64,
    pub verified: bool,
    /// True when every subset was enumerated; false for sampled verdicts.
    pub exact: bool,
    pub trials: u64,
    pub worst_excess: f64,
    pub worst_set: Option<Vec<u128>>,
}

const EXHAUSTIVE_SET_LIMIT: u128 = 2_000_000;

fn binomial(n: u128, k: u128) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
        if acc > EXHAUSTIVE_SET_LIMIT.saturating_mul(1000) {
            return None;
        }
    }
    Some(acc)
}

fn exhaustive_allowed(n: u32, k: u64) -> bool {
    if k as u128 > 1u128 << n.min(127) {
        return false;
    }
    if !((1u128 << n.min(127)) <= 24 || k <= 3) {
        return false;
    }
    matches!(binomial(1u128 << n, k as u128), Some(c) if c <= EXHAUSTIVE_SET_LIMIT)
}

/// Excess of `f(U_S, U_D)` at cap `1/k_prime`.  The summation order is
/// fixed so verdicts are bitwise reproducible across processes.
pub fn set_excess(f: &CondenserTable, set: &[u128], k_prime: u64) -> f64 {
    let mut counts: HashMap<u128, u64> = HashMap::new();
    for &x in set {
        for d in 0..f.degree() {
            *counts.entry(f.eval(x, d)).or_insert(0) += 1;
        }
    }
    let mut tallies: Vec<(u128, u64)> = counts.into_iter().collect();
    tallies.sort_unstable();
    let total = (set.len() as u64 * f.degree()) as f64;
    let gamma = 1.0 / k_prime as f64;
    tallies.iter().map(|&(_, c)| (c as f64 / total - gamma).max(0.0)).sum()
}

fn for_each_subset(n_items: u128, k: usize, mut visit: impl FnMut(&[u128])) {
    if k == 0 || (k as u128) > n_items {
        return;
    }
    let mut idx: Vec<u128> = (0..k as u128).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n_items - (k - i) as u128 {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Checks the `(k -> k_prime, eps)`-condenser property of `f`.
pub fn verify_condenser(
    f: &CondenserTable,
    k: u64,
    k_prime: u64,
    eps: f64,
    mode: VerifyMode,
) -> Result<CondenserCert> {
    if k as u128 > 1u128 << f.input_bits().min(127) {
        return Err(Error::Domain(format!("set size {k} exceeds the input space")));
    }
    if k == 0 || k_prime == 0 {
        return Err(Error::Domain("set sizes must be positive".into()));
    }
    let exhaustive = match mode {
        VerifyMode::Exhaustive => {
            if !exhaustive_allowed(f.input_bits(), k) {
                return Err(Error::Scale(format!(
                    "exhaustive verification over C(2^{}, {k}) subsets",
                    f.input_bits()
                )));
            }
            true
        }
        VerifyMode::Auto => exhaustive_allowed(f.input_bits(), k),
        VerifyMode::Sampled { .. } => false,
    };
    let mut worst_excess = 0.0f64;
    let mut worst_set = None;
    let mut trials = 0u64;
    if exhaustive {
        for_each_subset(1u128 << f.input_bits(), k as usize, |set| {
            trials += 1;
            let ex = set_excess(f, set, k_prime);
            if ex > worst_excess {
                worst_excess = ex;
                worst_set = Some(set.to_vec());
            }
        });
    } else {
        let (n_trials, sample_seed) = match mode {
            VerifyMode::Sampled { trials, seed } => (trials, seed),
            _ => (2000, 0x5eed),
        };
        let mut rng = SplitMix64::new(sample_seed);
        for _ in 0..n_trials {
            trials += 1;
            let mut set = Vec::with_capacity(k as usize);
            while set.len() < k as usize {
                let x = if f.input_bits() >= 64 {
                    (((rng.next_u64() as u128) << 64) | rng.next_u64() as u128)
                        % (1u128 << f.input_bits().min(127))
                } else {
                    rng.next_below(1u64 << f.input_bits()) as u128
                };
                if !set.contains(&x) {
                    set.push(x);
                }
            }
            let ex = set_excess(f, &set, k_prime);
            if ex > worst_excess {
                worst_excess = ex;
                worst_set = Some(set);
            }
        }
    }
    let verified = worst_excess <= eps + PROB_TOL;
    Ok(CondenserCert {
        k,
        k_prime,
        eps,
        verified,
        exact: exhaustive,
        trials,
        worst_excess,
        worst_set: if verified { None } else { worst_set },
    })
}

/// Checks the `(k, eps)`-conductor property: condenser at every size up to `k`.
pub fn verify_conductor(
    f: &CondenserTable,
    k: u64,
    eps: f64,
    mode: VerifyMode,
) -> Result<CondenserCert> {
    let mut agg = CondenserCert {
        k,
        k_prime: k,
        eps,
        verified: true,
        exact: true,
        trials: 0,
        worst_excess: 0.0,
        worst_set: None,
    };
    let max_size = (k as u128).min(1u128 << f.input_bits().min(127)) as u64;
    for size in 1..=max_size {
        let cert = verify_condenser(f, size, size, eps, mode)?;
        agg.trials += cert.trials;
        agg.exact &= cert.exact;
        if cert.worst_excess > agg.worst_excess {
            agg.worst_excess = cert.worst_excess;
        }
        if !cert.verified {
            agg.verified = false;
            if agg.worst_set.is_none() {
                agg.worst_set = cert.worst_set;
            }
        }
    }
    Ok(agg)
}

/// A seeded random conductor `[2^n] -> [4 * k_max]` of degree
/// `ceil(3n / eps)`, with the two degenerate branches for small parameters:
/// the identity when the range would cover the whole input space, and a
/// uniform output ignoring the input when `k_max <= 1/eps`.
///
/// At exhaustively verifiable scale the construction re-seeds until the
/// conductor certificate passes; the failure event has probability
/// strictly below one, so this terminates.
pub fn random_condenser(n: u32, k_max: u64, eps: EpsilonExp, seed: &Seed) -> CondenserTable {
    if n < 127 && 4u128 * k_max as u128 > 1u128 << n {
        return CondenserTable::identity(n);
    }
    if k_max as u128 <= eps.denominator() {
        let degree = 1u64 << eps.exponent().min(40);
        let range = (4u128 * k_max as u128).max(degree as u128);
        return CondenserTable::uniform_range(n, degree, range);
    }
    let degree = 3 * n as u64 * eps.denominator() as u64;
    let range = 4u128 * k_max as u128;
    let mut attempt = 0u64;
    loop {
        let table =
            CondenserTable::seeded(n, degree, range, crate::rng::mix(&[seed.value, attempt]));
        if !exhaustive_allowed(n, k_max) {
            return table;
        }
        match verify_conductor(&table, k_max, eps.eps(), VerifyMode::Exhaustive) {
            Ok(cert) if cert.verified => return table,
            _ => attempt += 1,
        }
    }
}

/// Random bits consumed per evaluation of a degree-`degree` table.
pub fn randomness_bits(degree: u64) -> u32 {
    crate::hashing::ceil_log2_u128(degree as u128)
}

/// Searches for a `(2^k, eps)`-conductor of minimal degree at tiny scale
/// (`2^n <= 16`, `D <= 8`, `Y <= 16`) by randomized restarts, returning
/// the first table found at the smallest degree.
pub fn search_conductor(n: u32, k: u32, eps: f64, seed: &Seed) -> Result<CondenserTable> {
    if 1u128 << n > 16 {
        return Err(Error::Scale(format!("conductor search at n = {n}")));
    }
    let kk = 1u64 << k;
    let restarts = 400u64;
    for degree in 1..=8u64 {
        for range_bits in 1..=4u32 {
            let range = 1u128 << range_bits;
            for r in 0..restarts {
                let table = CondenserTable::seeded(
                    n,
                    degree,
                    range,
                    crate::rng::mix(&[seed.value, degree, range as u64, r]),
                );
                if verify_conductor(&table, kk, eps, VerifyMode::Exhaustive)?.verified {
                    return Ok(table);
                }
            }
        }
        if degree == 1 {
            let ident = CondenserTable::identity(n);
            if verify_conductor(&ident, kk, eps, VerifyMode::Exhaustive)?.verified {
                return Ok(ident);
            }
        }
    }
    Err(Error::NotFound(format!(
        "no (2^{k}, {eps})-conductor with D <= 8, Y <= 16 at n = {n}"
    )))
}

/// Product table `x -> (S(x), T(x))` on seed pairs.
///
/// `s` must be a condenser onto its full range for sets of size `k_prime`
/// and `t` a conductor; the product is then a conductor with the summed
/// error.  Requires `#Y_2 >= k_prime`.
pub fn compose_condensers(
    s: &CondenserTable,
    t: &CondenserTable,
    k_prime: u64,
) -> Result<CondenserTable> {
    if s.input_bits() != t.input_bits() {
        return Err(Error::Dimension("factor tables have different input sizes".into()));
    }
    if t.range() < k_prime as u128 {
        return Err(Error::Domain(format!(
            "second factor range {} below k' = {k_prime}",
            t.range()
        )));
    }
    let n = s.input_bits();
    if n > 16 {
        return Err(Error::Scale(format!("dense composition at n = {n}")));
    }
    let degree = s
        .degree()
        .checked_mul(t.degree())
        .ok_or_else(|| Error::Scale("composed degree overflows".into()))?;
    let range = s.range() * t.range();
    if range > u32::MAX as u128 || degree > 1 << 24 {
        return Err(Error::Scale("composed table too large to materialize".into()));
    }
    let mut entries = Vec::with_capacity(((1u128 << n) * degree as u128) as usize);
    for x in 0..(1u128 << n) {
        for d1 in 0..s.degree() {
            let y1 = s.eval(x, d1);
            for d2 in 0..t.degree() {
                let y2 = t.eval(x, d2);
                entries.push((y1 * t.range() + y2) as u32);
            }
        }
    }
    CondenserTable::dense(n, degree, range, entries)
}

/// Caps a distribution at `1/k` and redistributes the trimmed mass over
/// other outcomes while keeping them capped; the witness construction for
/// closeness to a min-entropy source.
pub fn trim_to_cap(p: &Distribution, k: u64) -> Result<Distribution> {
    if p.len() < k as usize {
        return Err(Error::Domain(format!("support {} smaller than k = {k}", p.len())));
    }
    let cap = 1.0 / k as f64;
    let mut probs: Vec<f64> = p.probs().to_vec();
    let mut spare: f64 = 0.0;
    for q in probs.iter_mut() {
        if *q > cap {
            spare += *q - cap;
            *q = cap;
        }
    }
    let mut i = 0;
    while spare > 1e-15 && i < probs.len() {
        let room = cap - probs[i];
        let add = room.min(spare);
        probs[i] += add;
        spare -= add;
        i += 1;
    }
    if spare > PROB_TOL {
        return Err(Error::Domain("could not redistribute trimmed mass".into()));
    }
    Distribution::new(probs)
}

/// True iff the `(1/k)`-excess of `p` is at most `eps`, which is the
/// condition for `p` to be within statistical distance `eps` of a source
/// of min-entropy `log2 k` (the trim construction is the witness).
pub fn minentropy_close_check(p: &Distribution, k: u64, eps: f64) -> Result<bool> {
    if p.len() < k as usize {
        return Err(Error::Domain(format!(
            "support {} smaller than k = {k}; only the forward direction holds",
            p.len()
        )));
    }
    Ok(excess(p, 1.0 / k as f64)? <= eps + PROB_TOL)
}

type TableCache = std::sync::Mutex<HashMap<(u32, u64, u32), Arc<CondenserTable>>>;

/// Process-wide cache of canonical pipeline conductors keyed by
/// `(input bits, k, epsilon exponent)`.
pub fn table_cache() -> &'static TableCache {
    static CACHE: std::sync::OnceLock<TableCache> = std::sync::OnceLock::new();
    CACHE.get_or_init(|| std::sync::Mutex::new(HashMap::new()))
}
