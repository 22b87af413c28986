//! Density classification dynamics on rings, tori and regular trees.
//!
//! Deterministic cellular automata, probabilistic cellular automata and
//! asynchronous interacting particle systems share one [`rules::Rule`]
//! catalogue and one [`engine`]. The [`analysis`] module holds the
//! cluster, particle and tree-recursion tools, and [`experiments`] builds
//! seeded Monte Carlo reports on top of them.

pub mod configuration;
pub mod experiments;
pub mod engine;
pub mod analysis;
pub mod rules;
pub mod seeding;
pub mod stats;
pub mod topology;

pub use configuration::{Configuration, DensityStats, Symbol, Uniformity};
pub use rules::{Mode, Rule};
pub use topology::{BoundaryPolicy, CellId, Offset, Topology, TreeFamily};
