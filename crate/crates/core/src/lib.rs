//! Simulation and certification toolkit for a wavelength-multiplexed,
//! time-bin encoded, fully connected quantum network.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`]: small dense complex linear algebra and validated quantum states.
//! * [`states`]: the tunable time-bin family, hybrid states and noise channels.
//! * [`source`]: Poissonian model of the multiplexed pair source (PGR, CAR).
//! * [`network`]: users, DWDM channel pairs and link allocation.
//! * [`measure`]: interferometric conversion, projective analysis, the
//!   time-shift attack and the hybrid Bell-state measurement.
//! * [`certify`]: the conventional witness, the MDI witness and its bound.
//! * [`oracle`]: convex-optimisation ground truth (trace-distance
//!   entanglement) and maximum-likelihood tomography.

pub mod certify;
pub mod error;
pub mod measure;
pub mod network;
pub mod optim;
pub mod oracle;
pub mod qcore;
pub mod reference;
pub mod source;
pub mod states;

pub use error::{Error, Result};
