//! Exact-length compressors over toy decompressors: complexity, suspect
//! enumeration, compression, online decompression, and the majority
//! derandomization of probabilistic decompressors.

mod codec;
mod toy;

pub use codec::{
    choose_k, compress, decompress_online, min_target_for, overhead_closed_form, parse_code,
    CompressReport, PIPELINE_E_SHIFT, PIPELINE_OVERHEAD_CONSTANT,
};
pub use toy::{
    majority_decompressor, random_toy, Complexity, ProbToyDecompressor, ToyDecompressor, ToyView,
};
