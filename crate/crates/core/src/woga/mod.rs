//! Hybrid whale/genetic search over VM allocations.
//!
//! Each generation moves every member toward the current best (or a random
//! member) through the probability encoding, repairs it with
//! first-fit-decreasing, recombines and mutates the results, and keeps the
//! top X of parents plus offspring by dominance rank and crowding.

mod encoding;
mod operators;
mod optimizer;

pub use encoding::{
    control_parameter, decode, decode_shares, encode, server_similarity, whale_step,
    WhaleCoefficients, WhaleVector,
};
pub use operators::{crossover, crossover_at, ffd_repair, grouped_ffd, mutate, swap_servers};
pub use optimizer::{
    optimize, optimize_with, GenerationStats, OptimizeOutcome, ParetoFront, Solution, Variant,
    WogaParams,
};
