//! Joint cache placement, bandwidth/power allocation and trajectory design for
//! a caching UAV that relays satellite backhaul to ground users.
//!
//! The optimizer alternates between three convexified blocks (see
//! [`subproblems`]) under the driver in [`bcd`]; [`harness`] runs parameter
//! sweeps, brute-force oracles and CSV export on top of it.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bcd;
pub mod channel;
pub mod harness;
pub mod par;
pub mod scenario;
pub mod state;
pub mod subproblems;

pub use bcd::{run_bcd, run_scheme, Scheme, Solution, SolveOptions, SolveStatus};
pub use harness::{run_sweep, ResultRow, SweepParameter, SweepSpec};
pub use channel::{min_throughput, user_throughput, ChannelError, RateContext};
pub use par::Exec;
pub use scenario::{generate_scenario, load_scenario, parse_scenario, Scenario, ScenarioError};
pub use state::{Allocation, CacheVector, Iterate, Trajectory};
