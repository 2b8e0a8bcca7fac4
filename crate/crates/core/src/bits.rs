//! Bit-level primitives: bitstrings, self-delimiting integer headers, and
//! exact-length code packing.
//!
//! Conventions fixed here and relied on everywhere else:
//! - bitstrings are ordered MSB-first; interpreting one as an integer reads
//!   the most significant bit first,
//! - the order on bitstrings is length-lexicographic (shorter strings come
//!   first, ties broken by the bits),
//! - the hex token for a bitstring is `<len>:<hex>` so lengths that are not
//!   multiples of four survive a round trip.

use crate::error::{Error, Result};
use crate::rng::{EpsilonExp, SplitMix64};

/// An arbitrary-length sequence of bits.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self { bits: Vec::new() }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits: bits.to_vec() }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse_binary(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => return Err(Error::Parse(format!("invalid bit character {c:?}"))),
            }
        }
        Ok(Self { bits })
    }

    /// The `width`-bit MSB-first representation of `value`.
    pub fn from_uint(value: u128, width: usize) -> Result<Self> {
        if width > 128 {
            return Err(Error::Domain(format!("width {width} > 128")));
        }
        if width < 128 && value >> width != 0 {
            return Err(Error::Domain(format!("{value} does not fit in {width} bits")));
        }
        let mut bits = Vec::with_capacity(width);
        for i in (0..width).rev() {
            bits.push(((value >> i) & 1) as u8);
        }
        Ok(Self { bits })
    }

    /// The integer value of the string, MSB-first.  Fails above 127 bits.
    pub fn to_uint(&self) -> Result<u128> {
        if self.len() > 127 {
            return Err(Error::Domain(format!(
                "bitstring of length {} too long for integer interpretation",
                self.len()
            )));
        }
        let mut v: u128 = 0;
        for &b in &self.bits {
            v = (v << 1) | b as u128;
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.bits.push(bit);
    }

    pub fn extend(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString { bits: self.bits[start..end].to_vec() }
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    /// The integer value of the string modulo `p`, streaming MSB-first in
    /// 64-bit chunks, so it works for lengths beyond the 127-bit integer
    /// interpretation.
    pub fn mod_u64(&self, p: u64) -> u64 {
        debug_assert!(p > 0);
        let mut r: u64 = 0;
        let mut acc: u64 = 0;
        let mut nbits = 0u32;
        for &b in &self.bits {
            acc = (acc << 1) | b as u64;
            nbits += 1;
            if nbits == 64 {
                r = ((((r as u128) << 64) | acc as u128) % p as u128) as u64;
                acc = 0;
                nbits = 0;
            }
        }
        if nbits > 0 {
            r = ((((r as u128) << nbits) | acc as u128) % p as u128) as u64;
        }
        r
    }

    /// A uniformly random string of `n` bits.
    pub fn random(rng: &mut SplitMix64, n: usize) -> Self {
        let mut bits = Vec::with_capacity(n);
        for _ in 0..n {
            bits.push(rng.next_bit());
        }
        Self { bits }
    }

    /// `<len>:<hex>` token, MSB-first, last nibble zero-padded on the right.
    pub fn to_hex_token(&self) -> String {
        let mut s = format!("{}:", self.len());
        let mut nibble = 0u8;
        for (i, &b) in self.bits.iter().enumerate() {
            nibble = (nibble << 1) | b;
            if i % 4 == 3 {
                s.push(char::from_digit(nibble as u32, 16).unwrap());
                nibble = 0;
            }
        }
        let rem = self.len() % 4;
        if rem != 0 {
            nibble <<= 4 - rem;
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        s
    }

    pub fn from_hex_token(token: &str) -> Result<Self> {
        let (len_s, hex) = token
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("hex token {token:?} missing ':'")))?;
        let len: usize = len_s
            .parse()
            .map_err(|_| Error::Parse(format!("bad length in hex token {token:?}")))?;
        if hex.len() != len.div_ceil(4) {
            return Err(Error::Parse(format!(
                "hex token {token:?}: expected {} hex digits",
                len.div_ceil(4)
            )));
        }
        let mut bits = Vec::with_capacity(len);
        for c in hex.chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit {c:?}")))? as u8;
            for i in (0..4).rev() {
                bits.push((v >> i) & 1);
            }
        }
        bits.truncate(len);
        Ok(Self { bits })
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "b\"{self}\"")
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Length-lexicographic order: all shorter strings precede longer ones.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| self.bits.cmp(&other.bits))
    }
}

/// Elias gamma code of `v >= 1`: `floor(log2 v)` zeros then `v` in binary.
pub fn gamma_encode(v: u64) -> Result<BitString> {
    if v == 0 {
        return Err(Error::Domain("gamma code undefined for 0".into()));
    }
    let width = 64 - v.leading_zeros() as usize;
    let mut out = BitString::zeros(width - 1);
    out.extend(&BitString::from_uint(v as u128, width)?);
    Ok(out)
}

/// Encoded length of `gamma_encode(v)` without building it.
pub fn gamma_len(v: u64) -> usize {
    debug_assert!(v > 0);
    2 * (64 - v.leading_zeros() as usize) - 1
}

/// Decodes one gamma code starting at `*pos`, advancing `*pos` past it.
pub fn gamma_decode(bits: &BitString, pos: &mut usize) -> Result<u64> {
    let mut zeros = 0usize;
    while *pos + zeros < bits.len() && bits.get(*pos + zeros) == 0 {
        zeros += 1;
    }
    let width = zeros + 1;
    if *pos + zeros + width > bits.len() {
        return Err(Error::Parse("truncated gamma code".into()));
    }
    let mut v: u64 = 0;
    for i in 0..width {
        v = (v << 1) | bits.get(*pos + zeros + i) as u64;
    }
    *pos += zeros + width;
    Ok(v)
}

/// GF(2) matrix-vector product; bit `i` of the result is `<rows[i], x> mod 2`.
pub fn gf2_matvec(rows: &[BitString], x: &BitString) -> Result<BitString> {
    let mut out = BitString::new();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != x.len() {
            return Err(Error::Dimension(format!(
                "row {i} has length {} but vector has length {}",
                row.len(),
                x.len()
            )));
        }
        let mut acc = 0u8;
        for (a, b) in row.iter().zip(x.iter()) {
            acc ^= a & b;
        }
        out.push(acc);
    }
    Ok(out)
}

/// A compressed code of exactly `m` bits.
///
/// Layout: `gamma(e) ++ gamma(k+1) ++ payload ++ 1 ++ 0^j`, padded so the
/// total is exactly `m`.  Stripping trailing zeros and the final `1` is a
/// bijection back onto headered payloads.
#[derive(Clone, PartialEq, Eq)]
pub struct Code {
    bits: BitString,
}

impl Code {
    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Serializes as the `TLC1` byte format: a text header line `TLC1 <m>`
    /// followed by the bits packed big-endian, zero-padded to a byte.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = format!("TLC1 {}\n", self.len()).into_bytes();
        let mut byte = 0u8;
        for (i, b) in self.bits.iter().enumerate() {
            byte = (byte << 1) | b;
            if i % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        let rem = self.len() % 8;
        if rem != 0 {
            out.push(byte << (8 - rem));
        }
        out
    }

    pub fn from_file_bytes(data: &[u8]) -> Result<Self> {
        let nl = data
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse("missing code header line".into()))?;
        let header = std::str::from_utf8(&data[..nl])
            .map_err(|_| Error::Parse("code header is not utf-8".into()))?;
        let m: usize = header
            .strip_prefix("TLC1 ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad code header {header:?}")))?;
        let body = &data[nl + 1..];
        if body.len() != m.div_ceil(8) {
            return Err(Error::Parse(format!(
                "code body has {} bytes, expected {}",
                body.len(),
                m.div_ceil(8)
            )));
        }
        let mut bits = Vec::with_capacity(m);
        for i in 0..m {
            bits.push((body[i / 8] >> (7 - i % 8)) & 1);
        }
        Ok(Code { bits: BitString::from_bits(&bits) })
    }
}

impl std::fmt::Debug for Code {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Code({})", self.bits)
    }
}

/// Packs `(e, k, payload)` into exactly `m` bits.
pub fn pack_code(e: EpsilonExp, k: u64, payload: &BitString, m: usize) -> Result<Code> {
    let header_len = gamma_len(e.exponent() as u64) + gamma_len(k + 1);
    let used = header_len + payload.len() + 1;
    if used > m {
        return Err(Error::CapacityExceeded(format!(
            "header + payload + terminator is {used} bits, target is {m}"
        )));
    }
    let mut bits = gamma_encode(e.exponent() as u64)?;
    bits.extend(&gamma_encode(k + 1)?);
    bits.extend(payload);
    bits.push(1);
    while bits.len() < m {
        bits.push(0);
    }
    debug_assert_eq!(bits.len(), m);
    Ok(Code { bits })
}

/// Recovers `(e, k, payload)` from a packed code.
pub fn unpack_code(code: &Code) -> Result<(EpsilonExp, u64, BitString)> {
    let bits = &code.bits;
    let mut pos = 0usize;
    let e = gamma_decode(bits, &mut pos)?;
    let k_plus_1 = gamma_decode(bits, &mut pos)?;
    if k_plus_1 == 0 {
        return Err(Error::Parse("zero k header".into()));
    }
    let mut end = bits.len();
    while end > pos && bits.get(end - 1) == 0 {
        end -= 1;
    }
    if end == pos || bits.get(end - 1) != 1 {
        return Err(Error::Parse("missing payload terminator".into()));
    }
    let payload = bits.slice(pos, end - 1);
    let e = EpsilonExp::new(u32::try_from(e).map_err(|_| Error::Parse("huge epsilon exponent".into()))?)
        .map_err(|_| Error::Parse("invalid epsilon exponent".into()))?;
    Ok((e, k_plus_1 - 1, payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_base_cases() {
        assert_eq!(gamma_encode(1).unwrap().to_string(), "1");
        assert_eq!(gamma_encode(2).unwrap().to_string(), "010");
        assert_eq!(gamma_encode(4).unwrap().to_string(), "00100");
        assert!(gamma_encode(0).is_err());
    }

    #[test]
    fn gamma_prefix_free_exhaustive() {
        // No code of v <= 2^12 is a prefix of another.
        let codes: Vec<String> =
            (1u64..=1 << 12).map(|v| gamma_encode(v).unwrap().to_string()).collect();
        for (i, a) in codes.iter().enumerate() {
            // A shorter gamma code shares a prefix only if equal; lengths
            // differ exactly when the leading-zero counts differ.
            for b in codes.iter().skip(i + 1) {
                assert!(!b.starts_with(a.as_str()));
            }
        }
    }

    #[test]
    fn gamma_len_matches() {
        for v in 1..5000u64 {
            assert_eq!(gamma_len(v), gamma_encode(v).unwrap().len());
        }
    }

    proptest! {
        #[test]
        fn gamma_roundtrip_with_tail(v in 1u64..1_000_000, tail in proptest::collection::vec(0u8..2, 0..40)) {
            let mut bits = gamma_encode(v).unwrap();
            bits.extend(&BitString::from_bits(&tail));
            let mut pos = 0;
            prop_assert_eq!(gamma_decode(&bits, &mut pos).unwrap(), v);
            prop_assert_eq!(bits.slice(pos, bits.len()), BitString::from_bits(&tail));
        }

        #[test]
        fn hex_token_roundtrip(bits in proptest::collection::vec(0u8..2, 0..70)) {
            let b = BitString::from_bits(&bits);
            prop_assert_eq!(BitString::from_hex_token(&b.to_hex_token()).unwrap(), b);
        }

        #[test]
        fn uint_roundtrip(v in 0u128..u64::MAX as u128, extra in 0usize..30, p in 2u64..1_000_000) {
            let width = 64 + extra;
            let b = BitString::from_uint(v, width).unwrap();
            prop_assert_eq!(b.len(), width);
            prop_assert_eq!(b.to_uint().unwrap(), v);
            prop_assert_eq!(b.mod_u64(p) as u128, v % p as u128);
        }
    }

    #[test]
    fn pack_layout_example() {
        let e = EpsilonExp::new(1).unwrap();
        let payload = BitString::parse_binary("0").unwrap();
        let code = pack_code(e, 1, &payload, 8).unwrap();
        assert_eq!(code.bits().to_string(), "10100100");
        let (e2, k2, p2) = unpack_code(&code).unwrap();
        assert_eq!(e2.exponent(), 1);
        assert_eq!(k2, 1);
        assert_eq!(p2, payload);
    }

    #[test]
    fn pack_capacity_error() {
        let e = EpsilonExp::new(1).unwrap();
        let payload = BitString::zeros(8);
        assert!(matches!(
            pack_code(e, 1, &payload, 8),
            Err(Error::CapacityExceeded(_))
        ));
    }

    #[test]
    fn pack_roundtrip_random() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..500 {
            let e = EpsilonExp::new(1 + (rng.next_below(8)) as u32).unwrap();
            let k = rng.next_below(1000);
            let payload_len = rng.next_below(40) as usize;
            let payload = BitString::random(&mut rng, payload_len);
            let need = gamma_len(e.exponent() as u64) + gamma_len(k + 1) + payload.len() + 1;
            let m = need + rng.next_below(20) as usize;
            let code = pack_code(e, k, &payload, m).unwrap();
            assert_eq!(code.len(), m);
            let (e2, k2, p2) = unpack_code(&code).unwrap();
            assert_eq!((e2, k2, p2), (e, k, payload));
        }
    }

    #[test]
    fn matvec_examples() {
        let row = BitString::parse_binary("1100").unwrap();
        let x = BitString::parse_binary("1010").unwrap();
        assert_eq!(gf2_matvec(&[row], &x).unwrap().to_string(), "1");

        let n = 6;
        let ident: Vec<BitString> = (0..n)
            .map(|i| {
                let mut r = BitString::zeros(n);
                r.bits[i] = 1;
                r
            })
            .collect();
        let mut rng = SplitMix64::new(3);
        let v = BitString::random(&mut rng, n);
        assert_eq!(gf2_matvec(&ident, &v).unwrap(), v);

        let zero = BitString::zeros(n);
        let rows: Vec<BitString> = (0..4).map(|_| BitString::random(&mut rng, n)).collect();
        assert_eq!(gf2_matvec(&rows, &zero).unwrap(), BitString::zeros(4));

        let short = BitString::zeros(3);
        assert!(gf2_matvec(&rows, &short).is_err());
    }

    #[test]
    fn code_file_roundtrip() {
        let e = EpsilonExp::new(2).unwrap();
        let payload = BitString::parse_binary("11011").unwrap();
        let code = pack_code(e, 5, &payload, 21).unwrap();
        let bytes = code.to_file_bytes();
        assert_eq!(bytes.len(), "TLC1 21\n".len() + 21usize.div_ceil(8));
        let back = Code::from_file_bytes(&bytes).unwrap();
        assert_eq!(back, code);
    }

    #[test]
    fn length_lex_order() {
        let a = BitString::parse_binary("11").unwrap();
        let b = BitString::parse_binary("000").unwrap();
        assert!(a < b);
        let c = BitString::parse_binary("001").unwrap();
        assert!(b < c);
    }
}
