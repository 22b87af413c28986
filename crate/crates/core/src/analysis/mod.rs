//! Proof devices turned into code: cluster labelling on the triangular
//! lattice, the particle recoding of the traffic rule, and the majority
//! recursion on trees.

pub mod annihilation;
pub mod clusters;
pub mod tree_law;

pub use annihilation::{annihilation_track, particle_step, recode_psi, ParticleTrack, Route};
pub use clusters::{
    check_no_merge_split, eroder_time, label_clusters, label_window, random_cluster, v_point, AnalysisError, Cluster, ErodeRule,
    EroderOutcome, MergeSplitReport, Rect,
};
pub use tree_law::{h, h_iterate, tree_root_law, RootLaw};
