//! Online list-invertible functions built from condensers and conductors.
//!
//! The pipeline: a conductor symbol acts as a light fingerprint that a
//! streaming pruner inverts to a short candidate list, and a prime-modulus
//! tag isolates the original string inside that list.  All state machines
//! here are push-based and commit monotonically: once an answer is
//! committed for a query it never changes as more suspects arrive.

mod fingerprint;
mod prune;
mod recursion;

pub use fingerprint::{
    canonical_conductor, fingerprint, invert_full, max_wire_len, parse_wire, pipeline_layout,
    Body, Fingerprint, Layout, OnlineInverter, PipelineBranch,
};
pub use prune::{
    list_invert_g, prune_gprime, pruning_large, rejects_r, PartitionedCascade, PruneCascade,
    PruneParams,
};
pub use recursion::{
    build_recursion_pipeline, recursion_fingerprint, recursion_schedule, LevelSpec,
    RecursionFingerprint, RecursionInverter, RecursionPipeline, RecursionSchedule,
    BASE_CASE_FACTOR,
};

/// An append-only suspect list.  Thin wrapper that inverters and tests
/// share so stream order is explicit.
#[derive(Debug, Clone, Default)]
pub struct SuspectStream {
    items: Vec<crate::bits::BitString>,
}

impl SuspectStream {
    pub fn new() -> Self {
        Self { items: Vec::new() }
    }

    pub fn from_slice(items: &[crate::bits::BitString]) -> Self {
        Self { items: items.to_vec() }
    }

    pub fn push(&mut self, item: crate::bits::BitString) {
        self.items.push(item);
    }

    pub fn items(&self) -> &[crate::bits::BitString] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
