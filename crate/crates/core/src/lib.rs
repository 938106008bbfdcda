//! Bitangent planes of surface jets and their applications.
//!
//! Pairs of surface patches are given as Taylor jets in a common frame: the
//! shared tangent plane is `z = 0`, the patch `M` sits at the origin and the
//! patch `N` at `(0, 1, 0)`, so the base tie line is the second axis.

pub mod bitangent;
pub mod classifier;
pub mod jets;
pub mod jet_json;
pub mod export;
pub mod normal_forms;
pub mod thermo;
pub mod tolerance;

pub use bitangent::{BinodalCurve, ContactPair, TraceOptions, TraceOutcome};
pub use classifier::{CaseLabel, CaseReport};
pub use jets::{Direction2, FamilyJet, Poly2, SurfaceJet};
pub use normal_forms::NormalFormSpec;
pub use tolerance::Tolerance;
