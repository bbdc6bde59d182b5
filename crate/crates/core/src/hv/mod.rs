//! Hidden-variable (marginal problem) engine.

pub mod certify;
pub mod cone;
pub mod model;
pub mod scalar;
pub mod simplex;
pub mod structure;

pub use certify::{lp_feasible, Certifier, HvCertificate, Mode, Verdict};
pub use cone::{enumerate_extremal_rays, is_extremal, ray_expectation, RayClass, RayFunction};
pub use model::{marginals_from_state, rationalize, AnyModel, JointDistribution, MarginalModel};
pub use scalar::Scalar;
pub use structure::ContextStructure;
