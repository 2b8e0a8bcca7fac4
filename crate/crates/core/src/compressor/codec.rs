//! Exact-length compression and online decompression.
//!
//! A code of target length `m` packs `(e, k, fingerprint)` where `k` is
//! chosen maximal such that the worst-case fingerprint still fits; the
//! decoder unpacks the headers, re-derives the pipeline, streams the
//! suspects with complexity below `k`, and inverts.  The fingerprint runs
//! at epsilon scaled down by `2^2` so its end-to-end error `3 * eps/4`
//! stays inside the declared budget.

use crate::bits::{gamma_len, pack_code, unpack_code, BitString, Code};
use crate::error::{Error, Result};
use crate::hashing::PrimeHash;
use crate::invertible::{
    fingerprint, max_wire_len, parse_wire, Body, OnlineInverter,
};
use crate::rng::{EpsilonExp, Seed};

use super::toy::ToyView;

/// The fingerprint pipeline runs at `eps / 2^PIPELINE_E_SHIFT`.
pub const PIPELINE_E_SHIFT: u32 = 2;

/// Recorded constant `c` of this pipeline: total fingerprint length stays
/// below `k + c * log2(k) * log2(n/eps)` over the supported grid.
pub const PIPELINE_OVERHEAD_CONSTANT: f64 = 14.0;

/// What `compress` chose and measured.
#[derive(Debug, Clone)]
pub struct CompressReport {
    pub k: u64,
    /// Overhead `m - k + 1`: decompression succeeds for inputs of
    /// complexity up to `m - delta`.
    pub delta: u64,
    pub layout: crate::invertible::Layout,
}

/// Smallest target that still admits budget `k` for `n`-bit inputs.
pub fn min_target_for(e: EpsilonExp, k: u64, n: u64) -> Result<u64> {
    let e_pipe = e.shifted(PIPELINE_E_SHIFT)?;
    Ok(gamma_len(e.exponent() as u64) as u64
        + gamma_len(k + 1) as u64
        + max_wire_len(n, k, e_pipe)? as u64
        + 1)
}

/// Maximal `k` whose packed triple fits in exactly `m` bits, or an error
/// when even `k = 0` does not fit.
pub fn choose_k(e: EpsilonExp, m: u64, n: u64) -> Result<u64> {
    let mut k = m;
    loop {
        if min_target_for(e, k, n)? <= m {
            return Ok(k);
        }
        if k == 0 {
            return Err(Error::CapacityExceeded(format!(
                "target m = {m} cannot hold any fingerprint of an {n}-bit input"
            )));
        }
        k -= 1;
    }
}

/// Overhead at the tightest target admitting `k`; the measured
/// `m - k + 1` stays within the plateau above this value.  Negative on
/// the identity plateau, where the budget outgrows the target.
pub fn overhead_closed_form(e: EpsilonExp, k: u64, n: u64) -> Result<i64> {
    Ok(min_target_for(e, k, n)? as i64 - k as i64 + 1)
}

/// Compresses `x` to exactly `m` bits.
pub fn compress(x: &BitString, e: EpsilonExp, m: u64, seed: &Seed) -> Result<(Code, CompressReport)> {
    let n = x.len() as u64;
    let k = choose_k(e, m, n)?;
    let e_pipe = e.shifted(PIPELINE_E_SHIFT)?;
    let fp = fingerprint(x, e_pipe, k, seed)?;
    let payload = fp.wire_bits()?;
    let code = pack_code(e, k, &payload, m as usize)?;
    Ok((code, CompressReport { k, delta: m - k + 1, layout: fp.layout }))
}

/// Parsed decoder inputs: headers plus fingerprint.
pub fn parse_code(code: &Code) -> Result<(EpsilonExp, u64, Body, PrimeHash)> {
    let (e, k, payload) = unpack_code(code)?;
    let (body, tag) = parse_wire(&payload)?;
    Ok((e, k, body, tag))
}

/// Online decompression relative to the view `d`.
///
/// Streams the suspects `{ x : C_D(x) < k }` in witness order into the
/// monotone inverter; the identity branch is plain header stripping.
/// `Ok(None)` means the target was below the input's complexity plus the
/// overhead, or the epsilon-probability failure event happened.
pub fn decompress_online(d: &ToyView<'_>, code: &Code) -> Result<Option<BitString>> {
    let (e, k, body, tag) = parse_code(code)?;
    let e_pipe = e.shifted(PIPELINE_E_SHIFT)?;
    if let Body::Identity(x) = &body {
        return Ok(tag.matches(x).then(|| x.clone()));
    }
    let mut inverter = OnlineInverter::new(k, e_pipe, body, tag);
    for z in d.enumerate_suspects(k, None) {
        if let Some(answer) = inverter.push(&z) {
            return Ok(Some(answer));
        }
    }
    Ok(inverter.committed().cloned())
}
