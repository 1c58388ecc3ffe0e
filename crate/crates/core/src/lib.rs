//! Planning engine for rural wireless backhaul over TV white-space channels.
//!
//! The crate models a grid of cell towers, a handful of which have fiber
//! uplinks, and decides how the remaining towers should relay their traffic
//! to the fiber sites over a shared set of TV-band channels. Channel reuse
//! is limited by an interference threshold at co-channel receivers, transmit
//! power is shared across a tower's active channels, and link rates follow
//! the Shannon capacity of the ITU line-of-sight propagation model with
//! single-obstruction knife-edge diffraction.
//!
//! The optimization maximizes the minimum per-tower injected rate through a
//! mixed-integer program: binary link-channel activations, continuous powers
//! and rates, piecewise-linear outer approximation of the capacity curve,
//! and flow conservation toward the fiber sites. The solver stack (LP
//! relaxations, branch and bound, target-rate bisection) is self-contained.

pub mod lp;
pub mod milp;
pub mod model;
pub mod plan;
pub mod propagation;
pub mod repair;
pub mod scenario;
pub mod traffic;

pub use model::{Network, ScenarioConfig, Tower};
pub use plan::{Plan, PlanLink};
pub use scenario::{run_scenario, ScenarioOutcome};
