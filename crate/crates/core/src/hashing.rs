//! The two classical fingerprint families: subset-parity fingerprints
//! (shared randomness) and prime-modulus hashing, plus prime pools and the
//! first-match list inverse of the prime hash.
//!
//! Bitstrings are interpreted as integers MSB-first.  A pool with size
//! parameter `s` holds every prime of bit size at most
//! `s + ceil(log2 s) + 1`; that bound guarantees at least `2^s` primes.
//! Pools are materialized by sieve while the bound is small and sampled by
//! rejection above it, which draws from exactly the same set.

use crate::bits::{gf2_matvec, BitString};
use crate::error::{Error, Result};
use crate::rng::{EpsilonExp, Seed, SplitMix64};

/// Deterministic Miller-Rabin, valid for all `u64` inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let s = d.trailing_zeros();
    d >>= s;
    // known-sufficient witness tiers by input size
    let witnesses: &[u64] = if n < 3_215_031_751 {
        &[2, 3, 5, 7]
    } else if n < 3_474_749_660_383 {
        &[2, 3, 5, 7, 11, 13]
    } else if n < 341_550_071_728_321 {
        &[2, 3, 5, 7, 11, 13, 17]
    } else {
        &[2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
    };
    'witness: for &a in witnesses {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    acc
}

pub fn ceil_log2_u128(v: u128) -> u32 {
    debug_assert!(v > 0);
    if v == 1 {
        0
    } else {
        128 - (v - 1).leading_zeros()
    }
}

/// Known prime counts below powers of two, `PI_POW2[i] = pi(2^i)`.
const PI_POW2: [u64; 33] = [
    0, 1, 2, 4, 6, 11, 18, 31, 54, 97, 172, 309, 564, 1028, 1900, 3512, 6542, 12251, 23000, 43390,
    82025, 155611, 295947, 564163, 1077871, 2063689, 3957809, 7603553, 14630843, 28192750,
    54400028, 105097565, 203280221,
];

/// Lower bound on the number of primes below `2^bits`: the table value
/// where available, else `2^bits / ln(2^bits)`, valid from 17 upwards.
fn prime_count_floor(bits: u32) -> u64 {
    if (bits as usize) < PI_POW2.len() {
        PI_POW2[bits as usize]
    } else {
        ((2f64.powi(bits as i32)) / (bits as f64 * std::f64::consts::LN_2)).floor() as u64
    }
}

/// Largest pool bound we materialize by sieve.
pub const SIEVE_LIMIT_BITS: u32 = 22;

/// Every prime of bit size at most `s + ceil(log2 s) + 1`.
#[derive(Debug, Clone)]
pub struct PrimePool {
    s: u32,
    max_bits: u32,
    primes: Option<Vec<u64>>,
}

impl PrimePool {
    pub fn build(s: u32) -> Result<Self> {
        if s == 0 {
            return Err(Error::Domain("pool size parameter must be >= 1".into()));
        }
        let max_bits = s + ceil_log2_u128(s as u128) + 1;
        if max_bits > 40 {
            return Err(Error::Scale(format!(
                "prime pool bound 2^{max_bits} beyond the desk-scale limit"
            )));
        }
        let primes = if max_bits <= SIEVE_LIMIT_BITS {
            let list = sieve_below(1u64 << max_bits);
            if (list.len() as u128) < 1u128 << s {
                return Err(Error::Domain(format!(
                    "pool for s = {s} has only {} primes, needs 2^{s}",
                    list.len()
                )));
            }
            Some(list)
        } else {
            // the pool is sampled by rejection instead of materialized;
            // its size is asserted from the table, or from the proven
            // floor pi(x) > x / ln(x) beyond the table
            if prime_count_floor(max_bits) < 1u64 << s.min(63) {
                return Err(Error::Domain(format!("pool for s = {s} too small")));
            }
            None
        };
        Ok(Self { s, max_bits, primes })
    }

    pub fn size_param(&self) -> u32 {
        self.s
    }

    pub fn max_bits(&self) -> u32 {
        self.max_bits
    }

    /// Exact prime count when materialized, else a proven lower bound.
    pub fn count(&self) -> u64 {
        match &self.primes {
            Some(p) => p.len() as u64,
            None => prime_count_floor(self.max_bits),
        }
    }

    /// The full pool, available only at sieved scale.
    pub fn primes(&self) -> Result<&[u64]> {
        self.primes
            .as_deref()
            .ok_or_else(|| Error::Scale(format!("pool with bound 2^{} is not materialized", self.max_bits)))
    }

    /// Uniform sample from the pool.
    pub fn sample(&self, rng: &mut SplitMix64) -> u64 {
        match &self.primes {
            Some(p) => p[rng.next_below(p.len() as u64) as usize],
            None => loop {
                let c = rng.next_bits(self.max_bits);
                if is_prime_u64(c) {
                    return c;
                }
            },
        }
    }
}

type PoolCache = std::sync::Mutex<std::collections::HashMap<u32, std::sync::Arc<PrimePool>>>;

/// Process-wide pool cache; sieving is the expensive part of `build`.
pub fn pool_cached(s: u32) -> Result<std::sync::Arc<PrimePool>> {
    static CACHE: std::sync::OnceLock<PoolCache> = std::sync::OnceLock::new();
    let cache = CACHE.get_or_init(|| std::sync::Mutex::new(std::collections::HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&s) {
        return Ok(p.clone());
    }
    let pool = std::sync::Arc::new(PrimePool::build(s)?);
    cache.lock().unwrap().insert(s, pool.clone());
    Ok(pool)
}

fn sieve_below(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit];
    let mut out = Vec::new();
    for i in 2..limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j < limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Pool size parameter for telling one string apart from `k` others of
/// length `n` with error `eps`: `s = ceil(log2(k * n / eps))`.
pub fn pool_size_param(k: u128, n: u64, eps: EpsilonExp) -> u32 {
    ceil_log2_u128(k.max(1) * n.max(1) as u128) + eps.exponent()
}

/// A prime-modulus fingerprint `(p, x mod p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeHash {
    pub p: u64,
    pub residue: u64,
}

impl PrimeHash {
    pub fn matches(&self, x: &BitString) -> bool {
        x.mod_u64(self.p) == self.residue
    }
}

/// Uniform prime from the pool sized for `(eps, k, n)`.
pub fn sample_prime(eps: EpsilonExp, k: u128, n: u64, seed: &Seed) -> Result<u64> {
    let pool = pool_cached(pool_size_param(k, n, eps))?;
    Ok(pool.sample(&mut seed.rng()))
}

/// Fingerprint of `x` that survives `k` adversarial collisions with
/// probability `1 - eps`.
pub fn prime_hash(x: &BitString, eps: EpsilonExp, k: u128, seed: &Seed) -> Result<PrimeHash> {
    let p = sample_prime(eps, k, x.len().max(1) as u64, seed)?;
    Ok(PrimeHash { p, residue: x.mod_u64(p) })
}

/// First element of `s` (arrival order) whose residue matches.
pub fn prime_hash_invert<'a, I>(s: I, h: &PrimeHash) -> Option<&'a BitString>
where
    I: IntoIterator<Item = &'a BitString>,
{
    s.into_iter().find(|z| h.matches(z))
}

/// Output bit length of a hash drawn from the pool for `(eps, k, n)`:
/// both the prime and the residue fit in `max_bits` bits.
pub fn prime_hash_max_bits(eps: EpsilonExp, k: u128, n: u64) -> Result<u32> {
    let s = pool_size_param(k, n, eps);
    Ok(s + ceil_log2_u128(s as u128) + 1)
}

/// Subset-parity fingerprint: `m` disjoint random `|x|`-bit rows from the
/// seed, output bit `i` is `<row_i, x> mod 2`.  Shared-randomness model:
/// the inverse must expand the same seed.
pub fn subset_parity(x: &BitString, seed: &Seed, m: usize) -> Result<BitString> {
    let rows = expand_parity_rows(seed, m, x.len());
    gf2_matvec(&rows, x)
}

/// The row matrix `subset_parity` derives from a seed.
pub fn expand_parity_rows(seed: &Seed, m: usize, n: usize) -> Vec<BitString> {
    let mut rng = seed.rng();
    (0..m).map(|_| BitString::random(&mut rng, n)).collect()
}

/// First `z` in `s` whose subset parities under `rows` equal `y`.
pub fn subset_parity_invert<'a>(
    s: &'a [BitString],
    rows: &[BitString],
    y: &BitString,
) -> Option<&'a BitString> {
    s.iter().find(|z| gf2_matvec(rows, z).ok().as_ref() == Some(y))
}
