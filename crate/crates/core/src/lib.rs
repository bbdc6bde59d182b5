//! Spin-1 pentagram contextuality: state algebra, pentagram geometry, the
//! hidden-variable (marginal problem) decision with exact certificates,
//! violating-pentagram search and biphoton coincidence planning.

pub mod biphoton;
pub mod error;
pub mod geom;
pub mod hv;
pub mod report;
pub mod repro;
pub mod search;
pub mod spin;

pub use error::{Error, Result};
pub use geom::{ChainParams, Pentagram};
pub use hv::{
    AnyModel, Certifier, ContextStructure, HvCertificate, JointDistribution, MarginalModel, Mode,
    RayClass, RayFunction, Verdict,
};
pub use search::{SearchConfig, SearchResult};
pub use spin::{CanonicalForm, Direction, Rotation, SpinState, TwoQubitSymmetricState};
