//! Small-system checks of the channel algebra: doubled-space operators,
//! symbolic Pauli strings and dense toric-code states.

pub mod dense;
pub mod lattice;
pub mod ops;
pub mod pauli;
pub mod states;

pub use lattice::{Dir, TorusLattice};
pub use ops::{
    build_edge_channel, compose_check, emd_kraus_check, emd_string_checks, partial_transpose_check,
    y_kraus_channel, CheckReport, DoubledOperator,
};
pub use pauli::{emd_conjugate, Letter, PauliString};
pub use states::{convex_decomposition, phase_flip_purity, ConvexDecomposition};
