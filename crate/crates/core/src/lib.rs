//! Update maps for a smeared real scalar field on 1+1 Minkowski space.
//!
//! The crate evaluates closed-form quantum operations on Weyl-generator
//! jets, audits them for superluminal signalling, samples Gaussian
//! measurements of the vacuum and solves the classical Klein-Gordon
//! equation on a lattice.

pub mod algebra;
pub mod classical;
pub mod causality;
pub mod error;
pub mod geometry;
pub mod maps;
pub mod protocol;
pub mod quad;
pub mod sampler;
pub mod smearing;
pub mod special;

pub use algebra::{Algebra, GaussianState, OperatorPoly, WeylJet};
pub use error::{Error, Result};
pub use maps::{Composition, MapKind, UpdateMap};
pub use geometry::{Point, Rect, RegionSet};
pub use smearing::{BumpSpec, LabelId, PairingTable, SampledFunction, SmearingFunction};
pub use causality::Verdict;
pub use protocol::{check_protocol, parse_protocol, run_protocol, Prepared, ProtocolSpec};
