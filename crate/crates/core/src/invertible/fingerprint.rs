//! The end-to-end fingerprint `x -> (F(x), H(x))`: a conductor symbol plus
//! a prime tag sized for the pruned candidate list.
//!
//! Both sides of a transfer derive the conductor for a given input length
//! deterministically from `(n, k, e)` and a fixed salt, so only the symbol
//! and the tag travel.  The per-evaluation randomness is the seed index of
//! the conductor and the prime choice.
//!
//! Wire layout of a fingerprint (inside a code payload): one branch bit
//! (1 = identity body), then the body, the prime, and the residue, each
//! prefixed with the Elias gamma code of its bit length plus one.

use std::sync::Arc;

use crate::bits::{gamma_decode, gamma_encode, gamma_len, BitString};
use crate::condensers::{random_condenser, table_cache, CondenserTable};
use crate::error::{Error, Result};
use crate::hashing::{ceil_log2_u128, PrimeHash};
use crate::rng::{EpsilonExp, Seed};

/// Salt from which canonical pipeline conductors are derived.
pub const CONDUCTOR_SALT: u64 = 0x7a61_6354_4c43_0001;

/// Which construction the pipeline uses at `(n, k, e)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineBranch {
    /// `4 * 2^k` would cover the whole input space: the body is `x` itself.
    Identity,
    /// `2^k <= 1/eps`: the body is a uniform symbol ignoring the input.
    UniformRange,
    /// The seeded random conductor into `[4 * 2^k]`.
    Main,
}

/// Derived shape of the fingerprint pipeline at one input length.
#[derive(Debug, Clone)]
pub struct Layout {
    pub n: u64,
    pub k: u64,
    pub e: EpsilonExp,
    pub branch: PipelineBranch,
    pub degree: u64,
    /// Bits of the on-wire body field.
    pub body_width: u32,
    /// Candidate-list capacity the tag must isolate within:
    /// `s = D * ceil(log2(2 * 2^k))`.
    pub tag_capacity: u128,
    pub pool_s: u32,
    pub pool_max_bits: u32,
    /// Pruning cascade depth `ceil(log2(2 * 2^k))`.
    pub depth: usize,
}

impl Layout {
    /// Random bits one fingerprint evaluation consumes: the conductor seed
    /// index plus the prime choice.
    pub fn randomness_bits(&self) -> u32 {
        ceil_log2_u128(self.degree as u128) + self.pool_max_bits
    }
}

/// Computes the pipeline shape for inputs of length `n` at `(k, e)`.
pub fn pipeline_layout(n: u64, k: u64, e: EpsilonExp) -> Result<Layout> {
    if k > 1 << 20 {
        return Err(Error::Domain(format!("k = {k} beyond any sensible target")));
    }
    let branch = if k + 2 > n {
        PipelineBranch::Identity
    } else if k <= e.exponent() as u64 {
        PipelineBranch::UniformRange
    } else {
        PipelineBranch::Main
    };
    let (degree, body_width) = match branch {
        PipelineBranch::Identity => (1u64, n as u32),
        PipelineBranch::UniformRange => {
            let d_bits = e.exponent();
            (1u64 << d_bits, (k as u32 + 2).max(d_bits))
        }
        PipelineBranch::Main => {
            let degree = 3u64
                .checked_mul(n)
                .and_then(|v| v.checked_mul(e.denominator() as u64))
                .ok_or_else(|| Error::Scale("conductor degree overflows".into()))?;
            (degree, k as u32 + 2)
        }
    };
    // candidate capacity: depth levels of D elements each
    let depth = ceil_log2_u128(2u128 << k.min(126)) as usize;
    let tag_capacity = (degree as u128) * depth as u128;
    let pool_s = ceil_log2_u128(tag_capacity.max(1) * n.max(1) as u128) + e.exponent();
    let pool_max_bits = pool_s + ceil_log2_u128(pool_s as u128) + 1;
    Ok(Layout { n, k, e, branch, degree, body_width, tag_capacity, pool_s, pool_max_bits, depth })
}

/// The canonical conductor both endpoints derive for `(n, k, e)`.
///
/// Seeded from the fixed salt; at exhaustively verifiable scale the
/// construction inside `random_condenser` re-seeds until its certificate
/// passes, deterministically, so both sides agree on the final table.
pub fn canonical_conductor(n: u64, k: u64, e: EpsilonExp) -> Arc<CondenserTable> {
    if let Some(t) = table_cache().lock().unwrap().get(&(n as u32, k, e.exponent())) {
        return t.clone();
    }
    let k_max = if k >= 63 { u64::MAX } else { 1u64 << k };
    let seed = Seed::from_value(crate::rng::mix(&[CONDUCTOR_SALT, n, k, e.exponent() as u64]));
    let table = Arc::new(random_condenser(n.min(u32::MAX as u64) as u32, k_max, e, &seed));
    table_cache().lock().unwrap().insert((n as u32, k, e.exponent()), table.clone());
    table
}

/// Fingerprint body: the raw input on the identity branch, a conductor
/// symbol otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Identity(BitString),
    Symbol(u128),
}

/// A complete fingerprint: body plus prime tag, with its layout.
#[derive(Debug, Clone)]
pub struct Fingerprint {
    pub layout: Layout,
    pub body: Body,
    pub tag: PrimeHash,
}

/// Fingerprints `x` with suspect budget `2^k` and error budget
/// `3 * 2^-e` end to end (body pruning contributes `2 eps`, the tag `eps`).
pub fn fingerprint(x: &BitString, e: EpsilonExp, k: u64, seed: &Seed) -> Result<Fingerprint> {
    let layout = pipeline_layout(x.len() as u64, k, e)?;
    let mut rng = seed.rng();
    let body = match layout.branch {
        PipelineBranch::Identity => Body::Identity(x.clone()),
        _ => {
            let table = canonical_conductor(layout.n, k, e);
            let d = rng.next_below(layout.degree);
            Body::Symbol(table.eval_bits(x, d))
        }
    };
    let pool = crate::hashing::pool_cached(layout.pool_s)?;
    let p = pool.sample(&mut rng);
    let tag = PrimeHash { p, residue: x.mod_u64(p) };
    Ok(Fingerprint { layout, body, tag })
}

impl Fingerprint {
    /// Serializes body and tag; the layout is re-derived by the receiver.
    pub fn wire_bits(&self) -> Result<BitString> {
        let mut out = BitString::new();
        let body_bits = match &self.body {
            Body::Identity(x) => {
                out.push(1);
                x.clone()
            }
            Body::Symbol(v) => {
                out.push(0);
                BitString::from_uint(*v, self.layout.body_width as usize)?
            }
        };
        out.extend(&gamma_encode(body_bits.len() as u64 + 1)?);
        out.extend(&body_bits);
        let p_bits = 64 - self.tag.p.leading_zeros() as usize;
        out.extend(&gamma_encode(p_bits as u64 + 1)?);
        out.extend(&BitString::from_uint(self.tag.p as u128, p_bits)?);
        out.extend(&gamma_encode(p_bits as u64 + 1)?);
        out.extend(&BitString::from_uint(self.tag.residue as u128, p_bits)?);
        Ok(out)
    }
}

/// Parses a fingerprint payload into `(body, tag)`.
pub fn parse_wire(bits: &BitString) -> Result<(Body, PrimeHash)> {
    if bits.is_empty() {
        return Err(Error::Parse("empty fingerprint payload".into()));
    }
    let identity = bits.get(0) == 1;
    let mut pos = 1usize;
    let body_len = gamma_decode(bits, &mut pos)? as usize - 1;
    if pos + body_len > bits.len() {
        return Err(Error::Parse("truncated fingerprint body".into()));
    }
    let body_bits = bits.slice(pos, pos + body_len);
    pos += body_len;
    let body = if identity {
        Body::Identity(body_bits)
    } else {
        Body::Symbol(body_bits.to_uint().map_err(|_| Error::Parse("oversized symbol".into()))?)
    };
    let p_len = gamma_decode(bits, &mut pos)? as usize - 1;
    if pos + p_len > bits.len() {
        return Err(Error::Parse("truncated fingerprint prime".into()));
    }
    let p = bits.slice(pos, pos + p_len).to_uint().map_err(|_| Error::Parse("oversized prime".into()))? as u64;
    pos += p_len;
    let r_len = gamma_decode(bits, &mut pos)? as usize - 1;
    if pos + r_len > bits.len() {
        return Err(Error::Parse("truncated fingerprint residue".into()));
    }
    let residue =
        bits.slice(pos, pos + r_len).to_uint().map_err(|_| Error::Parse("oversized residue".into()))? as u64;
    pos += r_len;
    if pos != bits.len() {
        return Err(Error::Parse("trailing bits after fingerprint".into()));
    }
    if p < 2 {
        return Err(Error::Parse("tag prime below 2".into()));
    }
    Ok((body, PrimeHash { p, residue }))
}

/// Largest possible wire length of a fingerprint at `(n, k, e)`; the
/// actual length only varies with the sampled prime, downward.
pub fn max_wire_len(n: u64, k: u64, e: EpsilonExp) -> Result<usize> {
    let layout = pipeline_layout(n, k, e)?;
    let body_len = match layout.branch {
        PipelineBranch::Identity => n as usize,
        _ => layout.body_width as usize,
    };
    let b = layout.pool_max_bits as usize;
    Ok(1 + gamma_len(body_len as u64 + 1) + body_len + 2 * (gamma_len(b as u64 + 1) + b))
}

/// True iff the integer value of `z` equals `v`, for strings of any length.
fn bits_equal_value(z: &BitString, v: u128) -> bool {
    match z.to_uint() {
        Ok(zv) => zv == v,
        Err(_) => {
            // longer than 127 bits: all leading bits must be zero
            let extra = z.len() - 127;
            (0..extra).all(|i| z.get(i) == 0) && z.slice(extra, z.len()).to_uint().unwrap() == v
        }
    }
}

/// Online inverse of the fingerprint pipeline over a suspect stream.
///
/// Suspects of different lengths run through their own canonical pruning
/// cascades.  The answer commits at the first suspect that both enters the
/// candidate list for the body symbol and matches the prime tag, and never
/// changes afterwards.
#[derive(Debug)]
pub struct OnlineInverter {
    k: u64,
    e: EpsilonExp,
    body: Body,
    tag: PrimeHash,
    cascades: std::collections::HashMap<u64, super::prune::PruneCascade>,
    committed: Option<BitString>,
}

impl OnlineInverter {
    pub fn new(k: u64, e: EpsilonExp, body: Body, tag: PrimeHash) -> Self {
        Self { k, e, body, tag, cascades: std::collections::HashMap::new(), committed: None }
    }

    pub fn from_fingerprint(fp: &Fingerprint) -> Self {
        Self::new(fp.layout.k, fp.layout.e, fp.body.clone(), fp.tag)
    }

    pub fn committed(&self) -> Option<&BitString> {
        self.committed.as_ref()
    }

    /// Feeds one suspect; returns the newly committed answer, if this
    /// suspect triggered the commitment.
    pub fn push(&mut self, z: &BitString) -> Option<BitString> {
        if self.committed.is_some() {
            return None;
        }
        match &self.body {
            Body::Identity(x) => {
                if z == x && self.tag.matches(z) {
                    self.committed = Some(z.clone());
                    return self.committed.clone();
                }
                None
            }
            Body::Symbol(sym) => {
                let sym = *sym;
                let n = z.len() as u64;
                let layout = match pipeline_layout(n, self.k, self.e) {
                    Ok(l) => l,
                    Err(_) => return None,
                };
                if layout.branch == PipelineBranch::Identity {
                    // short suspect: its identity symbol is its own value
                    if bits_equal_value(z, sym) && self.tag.matches(z) {
                        self.committed = Some(z.clone());
                        return self.committed.clone();
                    }
                    return None;
                }
                let k = self.k;
                let e = self.e;
                let cascade = self.cascades.entry(n).or_insert_with(|| {
                    super::prune::PruneCascade::new(super::prune::PruneParams {
                        table: canonical_conductor(n, k, e),
                        accept_factor: 1,
                        eps: e,
                        depth: layout.depth,
                    })
                });
                let report = cascade.push(z);
                if report.joined.iter().any(|&(_, y)| y == sym) && self.tag.matches(z) {
                    self.committed = Some(z.clone());
                    return self.committed.clone();
                }
                None
            }
        }
    }

    /// Runs the whole stream and returns the committed answer.
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

/// One-shot inversion over a finished stream.
pub fn invert_full<'a, I>(stream: I, fp: &Fingerprint) -> Option<BitString>
where
    I: IntoIterator<Item = &'a BitString>,
{
    OnlineInverter::from_fingerprint(fp).invert_full(stream)
}
