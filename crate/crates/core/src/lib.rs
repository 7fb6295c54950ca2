//! Numerical laboratory for stationary axisymmetric relativistic
//! Vlasov–Maxwell equilibria.
//!
//! The equilibrium potentials `(φ, A_φ)` live on the meridian `(r, z)`
//! cross-section of an axisymmetric domain and satisfy
//!
//! ```text
//!   −Δφ          = ∫ (μ⁺(e⁺, p⁺) − μ⁻(e⁻, p⁻)) dv
//!   (−Δ + 1/r²)A = ∫ v̂_φ (μ⁺(e⁺, p⁺) − μ⁻(e⁻, p⁻)) dv
//! ```
//!
//! with `e± = ⟨v⟩ ± φ`, `p± = r(v_φ ± A_φ)` and homogeneous Dirichlet data.
//! The crate provides the grid, the two elliptic inverses, velocity moments,
//! Newton/Picard solvers with continuation in the family parameter `K`,
//! a particle pusher for checking the trajectory invariants, and bracketed
//! spectral-stability diagnostics.

pub mod distribution;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod moments;
pub mod quadrature;
pub mod solver;
pub mod stability;
pub mod trajectories;

pub use distribution::{Amplitude, BaseMu, FamilyKind, FamilySpec, InstabilityParams, MuFunction};
pub use elliptic::{EllipticOperator, OperatorKind};
pub use error::{Error, Result};
pub use geometry::{MeridianDomain, MeridianGrid, NodeKind};
pub use moments::{MomentFields, MomentQuadrature};
pub use solver::{
    BranchEntry, ContinuationSchedule, EquilibriumBranch, EquilibriumSolver, FieldPair, Method,
    SolverOptions, StopReason,
};
pub use stability::{StabilityReport, TestFunction, Verdict};
pub use trajectories::{ParticleState, Species};
