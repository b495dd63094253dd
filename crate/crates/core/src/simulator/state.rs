use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainGeometry, BOUNDARY_TOL};

/// Positions of `N` particles in `Ω̄` plus their boundary flags.
///
/// A flagged particle is in sticky mode. `escape[i]` is the inward push
/// (a length) it still has to receive before it leaves the sticky layer; it
/// is zero for interior particles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystemState {
    dim: usize,
    positions: Vec<f64>,
    on_boundary: Vec<bool>,
    escape: Vec<f64>,
    pub time: f64,
}

impl ParticleSystemState {
    /// Builds a state with explicit flags; flagged particles start with an
    /// escape budget of `layer_width`.
    pub fn new(
        dim: usize,
        positions: Vec<f64>,
        on_boundary: Vec<bool>,
        layer_width: f64,
    ) -> Result<Self> {
        if dim == 0 || positions.len() % dim != 0 || positions.len() / dim != on_boundary.len() {
            return Err(Error::InvalidInput(format!(
                "{} coordinates and {} flags do not describe particles in dimension {dim}",
                positions.len(),
                on_boundary.len()
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial positions".into()));
        }
        let escape = on_boundary
            .iter()
            .map(|&b| if b { layer_width } else { 0.0 })
            .collect();
        Ok(Self {
            dim,
            positions,
            on_boundary,
            escape,
            time: 0.0,
        })
    }

    /// Flags every particle lying on `Γ` (within the boundary tolerance).
    pub fn from_positions(g: &DomainGeometry, positions: Vec<f64>, layer_width: f64) -> Result<Self> {
        let d = g.dimension();
        if positions.len() % d != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates are not a multiple of the dimension {d}",
                positions.len()
            )));
        }
        let flags: Vec<bool> = positions.chunks(d).map(|x| g.is_on_boundary(x)).collect();
        for x in positions.chunks(d) {
            if g.signed_distance(x) > BOUNDARY_TOL {
                return Err(Error::InvalidInput(format!(
                    "initial position {x:?} lies outside the domain"
                )));
            }
        }
        Self::new(d, positions, flags, layer_width)
    }

    pub fn n(&self) -> usize {
        self.on_boundary.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn position_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// All coordinates, particle-major.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn on_boundary(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.on_boundary
    }

    pub fn escape(&self, i: usize) -> f64 {
        self.escape[i]
    }

    pub(crate) fn set_mode(&mut self, i: usize, on_boundary: bool, escape: f64) {
        self.on_boundary[i] = on_boundary;
        self.escape[i] = if on_boundary { escape } else { 0.0 };
    }

    /// Smallest pairwise distance, `∞` for a single particle.
    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                best = best.min(crate::geometry::dist(self.position(i), self.position(j)));
            }
        }
        best
    }

    /// Checks the state invariants: positions in `Ω̄`, flagged particles
    /// within the sticky layer, and on `Γ` itself when `on_gamma` is set.
    pub fn validate(&self, g: &DomainGeometry, layer_width: f64, on_gamma: bool) -> Result<()> {
        for i in 0..self.n() {
            let x = self.position(i);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("position of particle {i}")));
            }
            let sd = g.signed_distance(x);
            if sd > BOUNDARY_TOL {
                return Err(Error::InvalidInput(format!(
                    "particle {i} left the domain (signed distance {sd:e})"
                )));
            }
            if self.on_boundary[i] {
                let bound = if on_gamma { BOUNDARY_TOL } else { layer_width + BOUNDARY_TOL };
                if -sd > bound {
                    return Err(Error::InvalidInput(format!(
                        "particle {i} is flagged on the boundary at depth {:e}",
                        -sd
                    )));
                }
            }
        }
        Ok(())
    }
}
