//! Fibred rotation numbers, Arnold tongues and mode-locking certificates for
//! quasiperiodically forced circle homeomorphisms `f(theta, x) = (theta + omega, x + phi(theta, x))`.

pub mod certify;
pub mod cli;
pub mod curves;
pub mod error;
pub mod field;
pub mod io;
pub mod locking;
pub mod parallel;
pub mod partition;
pub mod pipeline;
pub mod rational;
pub mod render;
pub mod rotation;
pub mod staircase;
pub mod system;
pub mod tongue;
pub mod triangulation;
pub mod zeroset;

pub use error::{Error, Result};
pub use field::{ClosedForm, Surgery, SurgeryTarget, ThetaProfile, TranslationField};
pub use rational::{BaseRotation, Rational};
pub use rotation::RotnumEstimate;
pub use system::QpfSystem;
pub use tongue::{RationalizationResult, TongueBoundary};
pub use triangulation::{PwaField, Triangulation};
