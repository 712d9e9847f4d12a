//! Complex linear algebra and quantum-state primitives on small spaces.
//!
//! Ordering convention: in every bipartite object qubit `u` is the major
//! (left) factor. Time-bin `e`/`l` and polarization `H`/`V` map to the
//! computational `0`/`1`.

mod matrix;
pub mod random;
mod state;

pub use matrix::{
    c, permute_qubits, partial_transpose, r, reassemble, tensor, tensor_all, trace_norm,
    transpose_computational, ComplexMatrix, Subsystem, C64, I, ONE, ZERO,
};
pub use state::{
    default_labels, fidelity_pure, labels, partial_trace, DensityMatrix, PureState,
    COMPUTATIONAL_BASIS, HERMITIAN_TOL, HYBRID_BASIS, NORM_TOL, POLARIZATION_BASIS,
    POLARIZATION_QUBIT, POSITIVITY_TOL, QUBIT_BASIS, TIME_BIN_BASIS, TRACE_TOL,
};
