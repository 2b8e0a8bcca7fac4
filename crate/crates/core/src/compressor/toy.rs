//! Finite table decompressors and complexity relative to them.
//!
//! A toy decompressor is an explicitly tabulated partial map from programs
//! (optionally paired with a condition string) to outputs.  It stands in
//! for arbitrary decompressors at desk scale: the complexity of `x` is the
//! length of its shortest program, and the suspect set below a budget `k`
//! is the set of outputs reachable by programs shorter than `k` bits.
//!
//! Text format, one entry per line:
//!
//! ```text
//! P <program> -> <output>
//! P <program> <condition> -> <output>
//! ```
//!
//! where each field is a `<len>:<hex>` bitstring token.

use std::collections::{BTreeMap, HashSet};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Program length of the shortest description, or unreachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Complexity {
    Finite(u64),
    Infinite,
}

impl Complexity {
    pub fn is_below(&self, k: u64) -> bool {
        matches!(self, Complexity::Finite(c) if *c < k)
    }

    pub fn finite(&self) -> Option<u64> {
        match self {
            Complexity::Finite(c) => Some(*c),
            Complexity::Infinite => None,
        }
    }
}

/// A finite decompressor table; conditional and unconditional entries
/// share one store, keyed by the optional condition.
#[derive(Debug, Clone, Default)]
pub struct ToyDecompressor {
    tables: BTreeMap<Option<BitString>, BTreeMap<BitString, BitString>>,
}

impl ToyDecompressor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `D(program [, condition]) = output`.  Re-inserting a program
    /// under the same condition overwrites.
    pub fn add(&mut self, program: BitString, condition: Option<BitString>, output: BitString) {
        self.tables.entry(condition).or_default().insert(program, output);
    }

    pub fn entry_count(&self) -> usize {
        self.tables.values().map(|t| t.len()).sum()
    }

    /// The unconditional view.
    pub fn plain(&self) -> ToyView<'_> {
        ToyView { d: self, condition: None }
    }

    /// The view conditioned on `z`, i.e. the decompressor `p -> D(p, z)`.
    pub fn given(&self, z: &BitString) -> ToyView<'_> {
        ToyView { d: self, condition: Some(z.clone()) }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (cond, table) in &self.tables {
            for (program, output) in table {
                match cond {
                    None => out.push_str(&format!(
                        "P {} -> {}\n",
                        program.to_hex_token(),
                        output.to_hex_token()
                    )),
                    Some(c) => out.push_str(&format!(
                        "P {} {} -> {}\n",
                        program.to_hex_token(),
                        c.to_hex_token(),
                        output.to_hex_token()
                    )),
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut d = ToyDecompressor::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            if tokens.first() != Some(&"P") {
                return Err(bad("expected 'P'"));
            }
            match tokens.len() {
                4 => {
                    if tokens[2] != "->" {
                        return Err(bad("expected '->'"));
                    }
                    d.add(
                        BitString::from_hex_token(tokens[1])?,
                        None,
                        BitString::from_hex_token(tokens[3])?,
                    );
                }
                5 => {
                    if tokens[3] != "->" {
                        return Err(bad("expected '->'"));
                    }
                    d.add(
                        BitString::from_hex_token(tokens[1])?,
                        Some(BitString::from_hex_token(tokens[2])?),
                        BitString::from_hex_token(tokens[4])?,
                    );
                }
                _ => return Err(bad("expected 4 or 5 tokens")),
            }
        }
        Ok(d)
    }
}

/// A decompressor with a fixed (possibly absent) condition.
#[derive(Debug, Clone)]
pub struct ToyView<'a> {
    d: &'a ToyDecompressor,
    condition: Option<BitString>,
}

impl ToyView<'_> {
    fn table(&self) -> Option<&BTreeMap<BitString, BitString>> {
        self.d.tables.get(&self.condition)
    }

    /// `min { |p| : D(p) = x }` under this view.
    pub fn complexity(&self, x: &BitString) -> Complexity {
        // programs iterate in length-lexicographic order, so the first
        // witness is minimal
        if let Some(table) = self.table() {
            for (program, output) in table {
                if output == x {
                    return Complexity::Finite(program.len() as u64);
                }
            }
        }
        Complexity::Infinite
    }

    /// Streams distinct outputs with complexity strictly below `k`, in
    /// order of their shortest witnessing program (length, then bits),
    /// optionally restricted to outputs of length `n`.
    pub fn enumerate_suspects(&self, k: u64, n: Option<usize>) -> Vec<BitString> {
        let mut seen: HashSet<BitString> = HashSet::new();
        let mut out = Vec::new();
        if let Some(table) = self.table() {
            for (program, output) in table {
                if program.len() as u64 >= k {
                    continue;
                }
                if let Some(n) = n {
                    if output.len() != n {
                        continue;
                    }
                }
                if seen.insert(output.clone()) {
                    out.push(output.clone());
                }
            }
        }
        out
    }
}

impl<'a> ToyView<'a> {
    pub fn decompressor(&self) -> &'a ToyDecompressor {
        self.d
    }

    pub fn condition(&self) -> Option<&BitString> {
        self.condition.as_ref()
    }
}

/// A random toy decompressor: distinct programs of lengths up to
/// `max_program_len` mapping onto `output_len`-bit outputs, possibly many
/// to one.
pub fn random_toy(
    program_count: usize,
    max_program_len: usize,
    output_len: usize,
    rng: &mut SplitMix64,
) -> ToyDecompressor {
    let mut d = ToyDecompressor::new();
    let mut programs: HashSet<BitString> = HashSet::new();
    while programs.len() < program_count {
        let len = 1 + rng.next_below(max_program_len as u64) as usize;
        let p = BitString::random(rng, len);
        if programs.insert(p.clone()) {
            let out = BitString::random(rng, output_len);
            d.add(p, None, out);
        }
    }
    d
}

/// A probabilistic decompressor with enumerable randomness: each program
/// maps to one output per assignment of `r_bits` random bits.
#[derive(Debug, Clone, Default)]
pub struct ProbToyDecompressor {
    pub r_bits: u32,
    tables: BTreeMap<Option<BitString>, BTreeMap<BitString, Vec<BitString>>>,
}

impl ProbToyDecompressor {
    pub fn new(r_bits: u32) -> Self {
        assert!(r_bits <= 16, "randomness space must stay enumerable");
        Self { r_bits, tables: BTreeMap::new() }
    }

    /// `outputs[r]` is the value on random string `r`; must have length
    /// `2^r_bits`.
    pub fn add(&mut self, program: BitString, condition: Option<BitString>, outputs: Vec<BitString>) {
        assert_eq!(outputs.len(), 1usize << self.r_bits);
        self.tables.entry(condition).or_default().insert(program, outputs);
    }

    pub fn outcomes(&self, program: &BitString, condition: Option<&BitString>) -> Option<&[BitString]> {
        self.tables
            .get(&condition.cloned())
            .and_then(|t| t.get(program))
            .map(|v| v.as_slice())
    }

    /// Exact probability that this decompressor outputs something
    /// different from `z` on `program`.
    pub fn miss_probability(&self, program: &BitString, condition: Option<&BitString>, z: &BitString) -> f64 {
        match self.outcomes(program, condition) {
            Some(outs) => {
                let misses = outs.iter().filter(|o| *o != z).count();
                misses as f64 / outs.len() as f64
            }
            None => 1.0,
        }
    }
}

/// Derandomizes by strict majority: `D_maj(p)` is the unique value taken
/// on more than half the random strings, undefined otherwise.
pub fn majority_decompressor(d: &ProbToyDecompressor) -> ToyDecompressor {
    let mut out = ToyDecompressor::new();
    for (cond, table) in &d.tables {
        for (program, outputs) in table {
            let mut counts: BTreeMap<&BitString, usize> = BTreeMap::new();
            for o in outputs {
                *counts.entry(o).or_insert(0) += 1;
            }
            if let Some((value, count)) = counts.into_iter().max_by_key(|&(_, c)| c) {
                if 2 * count > outputs.len() {
                    out.add(program.clone(), cond.clone(), value.clone());
                }
            }
        }
    }
    out
}
