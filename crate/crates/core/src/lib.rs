//! Multi-objective virtual machine placement.
//!
//! Allocations are scored on utilization, co-residency of different
//! tenants, communication spread and power, and searched with a hybrid of
//! whale-style encircling updates and genetic recombination under
//! non-dominated selection. The crate is `no_std` and only needs `alloc`;
//! file formats and the command line live in the `smvmp` crate.

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod migration;
pub mod model;
pub mod objectives;
pub mod pareto;
pub mod woga;
pub mod workload;

pub use baselines::{best_fit, first_fit, random_fit, run_strategy, Strategy, StrategyOutcome};
pub use error::{Error, Result};
pub use migration::{migration_cost, run_dynamic, select_destination, DynamicParams, EpochReport, MigrationCost, MigrationEvent};
pub use model::{feasible, random_allocation, Allocation, Datacenter, Resource, Resources, ServerSpec, VmSpec};
pub use objectives::{evaluate, ObjectiveVector};
pub use pareto::{dominates, non_dominated_sort, RankedPopulation};
pub use woga::{optimize, optimize_with, ParetoFront, Solution, Variant, WogaParams};
pub use workload::{generate_scenario, synthetic_trace, Catalog, ScenarioShape, Trace, TraceEvent, TraceRecord};
