//! Sticky-reflected interacting particle diffusions on a bounded domain.
//!
//! Particles diffuse in the interior of a domain `Ω` (an interval or a ball),
//! stick to the boundary `Γ` for a positive amount of time, optionally diffuse
//! along it, and interact through a pair potential. The crate provides
//!
//! * [`geometry`]: normals, tangential projections, curvature and surface
//!   derivatives for the supported domains,
//! * [`densities`]: interior/boundary densities, the interaction factor and the
//!   drift/diffusion coefficients `b`, `A`,
//! * [`generator`]: the Wentzell generator `Lf = ½Tr(A∇²f) + (b,∇f)` and
//!   martingale diagnostics,
//! * [`simulator`]: a sticky-layer Euler scheme, a time-change scheme and
//!   Girsanov reweighting,
//! * [`oracle1d`]: an independent reference for the one-dimensional process,
//! * [`io`]: run configuration, CSV/JSON artifacts and the `run` driver,
//! * [`verify`]: the acceptance checks, also exposed by the CLI.

pub mod densities;
pub mod ensemble;
pub mod error;
pub mod generator;
pub mod geometry;
pub mod io;
pub mod oracle1d;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod verify;

pub use densities::{DensityField, DensitySuite, PairPotential};
pub use error::{Error, Result};
pub use generator::Observable;
pub use geometry::DomainGeometry;
pub use simulator::{ParticleSystemState, SimConfig, Trajectory};
