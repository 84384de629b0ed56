//! Curve shortening flow of closed curves in ℝ³, parabolic rescaling about
//! the first singularity, and diagnostics for the Gaussian-weighted
//! monotonicity identity
//!
//! ```text
//! d/dτ ∫ e^{-|v|²/4}|v′| dx = -¼∫|v·γ|² e^{-|v|²/4}|v′| dx - ∫|∂τv·ν|² e^{-|v|²/4}|v′| dx
//! ```
//!
//! satisfied by solutions of the rescaled flow ∂τv = ½v + v′×(v″×v′)/|v′|⁴.
//!
//! Modules, bottom up:
//! - [`geometry`]: sampled closed curves, spectral derivatives, curvature, Frenet frames
//! - [`flow`]: explicit RK4 integration of the physical and rescaled flows
//! - [`rescale`]: blow-up time estimation and the physical ↔ rescaled change of variables
//! - [`functionals`]: weighted length, dissipation integrals, identity residuals
//! - [`zelenjak`]: pointwise checks of the weight F(ξ,η) = |η|e^{-|ξ|²/4}
//! - [`scenarios`]: named initial curves and closed-form oracles
//! - [`experiment`]: the estimate → rescale → monitor pipeline

pub mod error;
pub mod experiment;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod rescale;
pub mod scenarios;
pub mod vec3;
pub mod zelenjak;

pub use error::{Error, Result};
pub use geometry::DiscreteCurve;
pub use vec3::Vec3;

/// Version of this crate, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
