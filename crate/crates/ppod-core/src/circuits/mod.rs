//! Circuit builders for the secure kNN pipeline: adders, subtractors,
//! comparators, MAX chains, the Batcher sorting network, the PRP-driven
//! shuffle, Randomise/Derandomise, and the query OR-reduction.

mod builder;
mod modules;
mod perm;
mod sort;

pub use builder::Builder;
pub use modules::{
    build_a2y, build_adder, build_comparator, build_compare_threshold, build_derandomise,
    build_max, build_or_reduce, build_query, build_randomise, build_subtractor, build_y2a,
};
pub use perm::{
    apply_network, derive_permutation, waksman_control_bits, waksman_switch_count, PermutationSpec,
};
pub use sort::{batcher_pairs, build_sort_shuffle, plain_sort_shuffle_select, SortShuffleSpec};

/// Width of the Randomise/Derandomise flag words and of point ids.
pub const FLAG_BITS: usize = 32;
pub const ID_BITS: usize = 32;

/// Sentinel id carried by sort padding; never a valid point id.
pub const SENTINEL_ID: u64 = (1 << ID_BITS) - 1;
