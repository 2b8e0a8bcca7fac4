//! Executable bound checks and the randomness-reduction transform.
//!
//! Logs are base 2 throughout.  Bound comparisons use a `1e-9` slack to
//! absorb floating-point noise; where the inputs are dyadic the formulas
//! are also evaluated in exact integer arithmetic.

use std::collections::HashMap;

use crate::condensers::{Distribution, PROB_TOL};
use crate::error::{Error, Result};
use crate::rng::EpsilonExp;

/// Outcome of a single bound evaluation.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub formula: &'static str,
    pub inputs: String,
    /// The bound side of the inequality.
    pub bound: f64,
    /// The side the object being checked realizes.
    pub observed: f64,
    /// False when the formula's validity window excludes the inputs.
    pub applicable: bool,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn ok(&self) -> bool {
        !self.applicable || self.satisfied
    }
}

/// Overhead floor `log2(n/eps) - log2(log2(n/eps)) - 8`, valid for
/// `2^(-n/4) <= eps <= 1/4`.  Often vacuous (negative) at desk scale.
pub fn overhead_lb(n: u64, eps: f64) -> (f64, bool) {
    let applicable = n >= 1 && eps >= (0.5f64).powf(n as f64 / 4.0) && eps <= 0.25;
    let ratio = (n as f64 / eps).log2();
    (ratio - ratio.log2() - 8.0, applicable)
}

/// Checks a measured overhead against the floor.
pub fn overhead_lb_check(n: u64, eps: f64, measured_delta: f64) -> BoundReport {
    let (bound, applicable) = overhead_lb(n, eps);
    BoundReport {
        formula: "delta >= log(n/eps) - loglog(n/eps) - 8",
        inputs: format!("n={n} eps={eps} delta={measured_delta}"),
        bound,
        observed: measured_delta,
        applicable,
        satisfied: measured_delta >= bound - PROB_TOL,
    }
}

/// Randomness floor: `ceil(eps * 2^(r+1)) >= (n - r - log(2/eps)) / (delta + 4)`
/// for `eps <= 1/2`.  Exact integer arithmetic when `eps` is dyadic parses
/// as `2^-e` with `e <= r + 1`.
pub fn randomness_lb_check(n: u64, r: u64, eps: f64, delta: f64) -> BoundReport {
    let applicable = eps <= 0.5 && eps > 0.0;
    let lhs = (eps * (2f64).powi(r as i32 + 1)).ceil();
    let rhs = (n as f64 - r as f64 - (2.0 / eps).log2()) / (delta + 4.0);
    BoundReport {
        formula: "ceil(eps 2^(r+1)) >= (n - r - log(2/eps)) / (delta + 4)",
        inputs: format!("n={n} r={r} eps={eps} delta={delta}"),
        bound: rhs,
        observed: lhs,
        applicable,
        satisfied: lhs >= rhs - PROB_TOL,
    }
}

/// Exact dyadic form of the randomness floor: with `eps = 2^-e` and an
/// integer overhead, both sides are compared as integers.
pub fn randomness_lb_holds_exact(n: i64, r: i64, e: u32, delta: i64) -> bool {
    // lhs = ceil(2^(r+1-e)), rhs numerator = n - r - (1 + e)
    let lhs: i64 = if r + 1 >= e as i64 { 1i64 << (r + 1 - e as i64).min(62) } else { 1 };
    let num = n - r - 1 - e as i64;
    // lhs >= num / (delta + 4) <=> lhs * (delta + 4) >= num
    lhs.saturating_mul(delta + 4) >= num
}

/// Smallest integer overhead a deterministic (`r = 0`) compressor at
/// `eps = 1/2` can have by the randomness floor; equals `n - 6`.
pub fn deterministic_overhead_floor(n: i64) -> i64 {
    let mut delta = -4 + 1;
    while !randomness_lb_holds_exact(n, 0, 1, delta) {
        delta += 1;
    }
    delta
}

/// Direct warm-up bound: a deterministic compressor is only
/// `delta`-optimal for `delta >= n - 1`.
pub fn deterministic_overhead_lb(n: i64) -> i64 {
    n - 1
}

/// Degree floor for condensers:
/// `ceil(2 eps D) >= log(#X / K) / (3 + log(#Y / K))`, valid when
/// `#Y >= 2K >= 4D/eps` and `eps <= 1/2`.
pub fn degree_lb_check(x_size: f64, k: f64, y_size: f64, degree: u64, eps: f64) -> BoundReport {
    let applicable =
        eps <= 0.5 && eps > 0.0 && y_size >= 2.0 * k && 2.0 * k >= 4.0 * degree as f64 / eps;
    let lhs = (2.0 * eps * degree as f64).ceil();
    let rhs = (x_size / k).log2() / (3.0 + (y_size / k).log2());
    BoundReport {
        formula: "ceil(2 eps D) >= log(#X/K) / (3 + log(#Y/K))",
        inputs: format!("#X={x_size} K={k} #Y={y_size} D={degree} eps={eps}"),
        bound: rhs,
        observed: lhs,
        applicable,
        satisfied: lhs >= rhs - PROB_TOL,
    }
}

/// Tail bound `(mu/nu)^nu` for a sum of [0,1] variables with mean `mu`,
/// at threshold `nu > mu`.
pub fn hoeffding(mu: f64, nu: f64) -> Result<f64> {
    if !(nu > mu && mu > 0.0) {
        return Err(Error::Domain(format!("need nu > mu > 0, got mu={mu} nu={nu}")));
    }
    Ok((mu / nu).powf(nu))
}

/// Rounds a measure supported on at most `2^d` outcomes to granularity
/// `2^-(d+b)` so it can be sampled with `d + b` random bits, amplifying no
/// point by more than `1 + 3 * 2^-b`.
///
/// Rounding runs largest-remainder style: every kept value rounds down,
/// then unit increments go to the outcomes with the largest remainders
/// whose caps still allow them.
pub fn sampler_round(mu: &Distribution, d: u32, b: u32) -> Result<Distribution> {
    let support = mu.probs().iter().filter(|&&p| p > 0.0).count() as u64;
    if support > 1u64 << d {
        return Err(Error::Domain(format!("support {support} above 2^{d}")));
    }
    if d + b > 40 {
        return Err(Error::Scale(format!("granularity 2^-{} too fine", d + b)));
    }
    let grain = 1u64 << (d + b);
    let amp = 1.0 + 3.0 * (0.5f64).powi(b as i32);
    // caps in grains, floors in grains
    let mut units: Vec<u64> = Vec::with_capacity(mu.len());
    let mut caps: Vec<u64> = Vec::with_capacity(mu.len());
    let mut remainders: Vec<f64> = Vec::with_capacity(mu.len());
    for &p in mu.probs() {
        let exact = p * grain as f64;
        let floor = exact.floor() as u64;
        units.push(floor);
        caps.push((amp * p * grain as f64 + PROB_TOL).floor() as u64);
        remainders.push(exact - floor as f64);
    }
    let assigned: u64 = units.iter().sum();
    let mut deficit = grain
        .checked_sub(assigned)
        .ok_or_else(|| Error::Domain("floored mass exceeds one".into()))?;
    // largest remainders first, then by index for determinism
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&i, &j| {
        remainders[j].partial_cmp(&remainders[i]).unwrap().then(i.cmp(&j))
    });
    while deficit > 0 {
        let mut progressed = false;
        for &i in &order {
            if deficit == 0 {
                break;
            }
            if units[i] < caps[i] {
                units[i] += 1;
                deficit -= 1;
                progressed = true;
            }
        }
        if !progressed {
            return Err(Error::Domain("caps too tight to absorb rounding deficit".into()));
        }
    }
    Distribution::new(units.iter().map(|&u| u as f64 / grain as f64).collect())
}

/// A probabilistic function with an explicitly enumerable seed space,
/// given densely: `values[x * seeds + s]` is the output symbol.
#[derive(Debug, Clone)]
pub struct DenseSeededFn {
    pub n: u32,
    pub seeds: u64,
    values: Vec<u64>,
}

impl DenseSeededFn {
    pub fn build(n: u32, seeds: u64, f: impl Fn(u128, u64) -> u64) -> Result<Self> {
        if n > 16 || seeds > 1 << 16 {
            return Err(Error::Scale("dense seeded function too large".into()));
        }
        let mut values = Vec::with_capacity(((1u128 << n) * seeds as u128) as usize);
        for x in 0..(1u128 << n) {
            for s in 0..seeds {
                values.push(f(x, s));
            }
        }
        Ok(Self { n, seeds, values })
    }

    pub fn eval(&self, x: u128, s: u64) -> u64 {
        self.values[(x as usize) * self.seeds as usize + s as usize]
    }

    /// Number of distinct output symbols.
    pub fn value_count(&self) -> u64 {
        let mut set: Vec<u64> = self.values.clone();
        set.sort_unstable();
        set.dedup();
        set.len() as u64
    }

    /// Outcome measure of `F(x)` as `(symbol, seed count)` pairs.
    pub fn outcome_counts(&self, x: u128) -> Vec<(u64, u64)> {
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for s in 0..self.seeds {
            *counts.entry(self.eval(x, s)).or_insert(0) += 1;
        }
        let mut v: Vec<(u64, u64)> = counts.into_iter().collect();
        v.sort_unstable();
        v
    }
}

/// The randomness-reduced function: heavy inputs map to reserved symbols
/// deterministically, the rest sample a rounded restriction of their
/// outcome measure with `ceil(log2(M/K)) + 3` random bits.
#[derive(Debug, Clone)]
pub struct ReducedFn {
    pub n: u32,
    pub random_bits: u32,
    /// Reserved symbol per heavy input, disjoint from original symbols.
    heavy: HashMap<u128, u64>,
    heavy_by_symbol: HashMap<u64, u128>,
    /// Per light input: cumulative sampling table over `2^random_bits`
    /// grains, as `(symbol, grains)`.
    light: HashMap<u128, Vec<(u64, u64)>>,
    pub value_bound: u64,
}

impl ReducedFn {
    pub fn eval(&self, x: u128, r: u64) -> u64 {
        debug_assert!(r < 1 << self.random_bits);
        if let Some(&y) = self.heavy.get(&x) {
            return y;
        }
        let table = &self.light[&x];
        let mut acc = 0u64;
        for &(y, grains) in table {
            acc += grains;
            if r < acc {
                return y;
            }
        }
        table.last().expect("nonempty sampling table").0
    }

    /// The reserved-symbol inverse shortcut, if `y` is reserved.
    pub fn heavy_preimage(&self, y: u64) -> Option<u128> {
        self.heavy_by_symbol.get(&y).copied()
    }

    pub fn heavy_count(&self) -> usize {
        self.heavy.len()
    }
}

/// Reduces the randomness of a `(K, eps)`-invertible `f` with at most `M`
/// distinct values to `ceil(log2(M/K)) + 3` bits, at error `2 eps`.
///
/// `P_x` keeps the outcomes of `F(x)` after removing a maximal-cardinality
/// set of measure at most `eps` (smallest probabilities first, ties by
/// symbol order).  Inputs with `#P_x > M/K` are "heavy" and map to one of
/// `K` reserved values; the rest sample the rounded, renormalized `P_x`.
pub fn reduce_randomness(f: &DenseSeededFn, k: u64, m: u64, eps: EpsilonExp) -> Result<ReducedFn> {
    if eps.eps() > 0.25 {
        return Err(Error::Domain("randomness reduction needs eps <= 1/4".into()));
    }
    if m < f.value_count() {
        return Err(Error::Domain(format!(
            "declared value bound {m} below actual {}",
            f.value_count()
        )));
    }
    let d = crate::hashing::ceil_log2_u128((m / k.max(1)).max(1) as u128);
    let b = 3u32;
    let mut heavy: HashMap<u128, u64> = HashMap::new();
    let mut heavy_by_symbol: HashMap<u64, u128> = HashMap::new();
    let mut light: HashMap<u128, Vec<(u64, u64)>> = HashMap::new();
    // reserved symbols sit above every original symbol
    let reserve_base = f.values.iter().copied().max().unwrap_or(0) + 1;
    let mut next_reserved = 0u64;
    for x in 0..(1u128 << f.n) {
        let counts = f.outcome_counts(x);
        // drop a maximal-cardinality set of measure <= eps: smallest
        // probabilities first, ties by symbol order
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by_key(|&i| (counts[i].1, counts[i].0));
        let budget = f.seeds as u128 * 1 / eps.denominator().max(1);
        let budget = (f.seeds as u128) / eps.denominator() + u128::from(budget == 0) * 0;
        let mut dropped_mass = 0u128;
        let mut dropped: Vec<bool> = vec![false; counts.len()];
        for &i in &order {
            if dropped_mass + counts[i].1 as u128 <= budget {
                dropped_mass += counts[i].1 as u128;
                dropped[i] = true;
            }
        }
        let kept: Vec<(u64, u64)> = counts
            .iter()
            .zip(&dropped)
            .filter(|(_, &dr)| !dr)
            .map(|(&c, _)| c)
            .collect();
        if kept.len() as u128 > (m / k.max(1)).max(1) as u128 {
            let symbol = reserve_base + next_reserved;
            next_reserved += 1;
            if next_reserved > k {
                return Err(Error::Domain(
                    "more heavy inputs than reserved symbols; certificate broken".into(),
                ));
            }
            heavy.insert(x, symbol);
            heavy_by_symbol.insert(symbol, x);
            continue;
        }
        // renormalize and round to 2^-(d+b) grains
        let kept_mass: u64 = kept.iter().map(|&(_, c)| c).sum();
        let mu = Distribution::new(
            kept.iter().map(|&(_, c)| c as f64 / kept_mass as f64).collect(),
        )?;
        let nu = sampler_round(&mu, d, b)?;
        let grain = 1u64 << (d + b);
        let table: Vec<(u64, u64)> = kept
            .iter()
            .zip(nu.probs())
            .map(|(&(y, _), &p)| (y, (p * grain as f64).round() as u64))
            .filter(|&(_, g)| g > 0)
            .collect();
        light.insert(x, table);
    }
    Ok(ReducedFn {
        n: f.n,
        random_bits: d + b,
        heavy,
        heavy_by_symbol,
        light,
        value_bound: m + k,
    })
}

/// A union-cover witness: an input whose whole fingerprint set is covered
/// by the sets of fewer than `K` other inputs.
///
/// `family[x]` is the set of possible fingerprint values of input `x`.
/// Requires `#Y < min(K^2/4, #X - K/2)`; the returned `(x, S)` satisfies
/// `F_x subset of union of F_z over z in S, z != x`, with `x` in `S` and
/// `|S| < K`.
pub fn blocking_set(family: &[Vec<u64>], y_size: u64, k: u64) -> Result<(usize, Vec<usize>)> {
    let x_size = family.len() as u64;
    if (y_size as f64) >= (k as f64 * k as f64 / 4.0).min(x_size as f64 - k as f64 / 2.0) {
        return Err(Error::Domain(format!(
            "#Y = {y_size} not below min(K^2/4, #X - K/2) at K = {k}, #X = {x_size}"
        )));
    }
    // inputs owning no private fingerprint value are coverable
    let mut owners: HashMap<u64, Vec<usize>> = HashMap::new();
    for (x, set) in family.iter().enumerate() {
        for &y in set {
            owners.entry(y).or_default().push(x);
        }
    }
    let coverable: Vec<usize> = (0..family.len())
        .filter(|&x| family[x].iter().all(|y| owners[y].iter().any(|&z| z != x)))
        .collect();
    if (coverable.len() as u64) < k / 2 {
        return Err(Error::Domain("fewer coverable inputs than the hypothesis promises".into()));
    }

    let cover_for = |x: usize, covered: &std::collections::HashSet<u64>| -> Vec<usize> {
        let mut s = Vec::new();
        let mut now_covered = covered.clone();
        for &y in &family[x] {
            if now_covered.contains(&y) {
                continue;
            }
            let z = owners[&y].iter().copied().find(|&z| z != x).expect("coverable");
            s.push(z);
            for &yy in &family[z] {
                now_covered.insert(yy);
            }
        }
        s
    };

    // first case: a coverable input with a small fingerprint set
    for &x in &coverable {
        if (family[x].len() as u64) < k {
            let cover = cover_for(x, &std::collections::HashSet::new());
            let mut s = vec![x];
            s.extend(cover);
            s.sort_unstable();
            s.dedup();
            if (s.len() as u64) < k {
                return Ok((x, s));
            }
        }
    }
    // iterative growth: add whole fingerprint sets while they grow the
    // covered region by at least K/2, stop at the first that does not
    let mut covered: std::collections::HashSet<u64> = std::collections::HashSet::new();
    let mut chosen: Vec<usize> = Vec::new();
    for &x in &coverable {
        let new: Vec<u64> =
            family[x].iter().copied().filter(|y| !covered.contains(y)).collect();
        if (new.len() as u64) * 2 >= k {
            for y in new {
                covered.insert(y);
            }
            chosen.push(x);
            continue;
        }
        // x is the witness: covered values come from chosen sets, the
        // rest from per-value owners
        let mut s = chosen.clone();
        s.extend(cover_for(x, &covered));
        s.push(x);
        s.sort_unstable();
        s.dedup();
        if (s.len() as u64) < k {
            return Ok((x, s));
        }
        return Err(Error::Domain("witness exceeded the size bound".into()));
    }
    Err(Error::Domain("growth never stalled; hypothesis violated".into()))
}
