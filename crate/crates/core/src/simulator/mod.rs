//! Time stepping for the N-particle sticky system.
//!
//! Two engines are provided. [`Scheme::RegularizedEuler`] replaces the
//! boundary indicator by a sticky layer of width `ε`: a particle that comes
//! within `ε` of `Γ` enters sticky mode and carries an escape budget, a
//! length that the inward drift `½(α/β)` has to use up before the particle
//! is released at depth `ε`. Overshoot beyond `Γ` is added to the budget.
//! With `δ = 1` the particle lives exactly on `Γ` while sticky and diffuses
//! along it. [`Scheme::TimeChange`] builds the one-particle process from a
//! reflected diffusion and the inverse of `A_t = t + (β/α) l_t`.

mod girsanov;
mod regularized;
mod state;
mod time_change;

use serde::{Deserialize, Serialize};

use crate::densities::DensitySuite;
use crate::error::{Error, Result};
use crate::geometry::{DomainGeometry, DomainKind};
use crate::rng::{LayoutStream, NoiseStream};

pub use girsanov::{exponential_martingale, girsanov_weight};
pub use regularized::step_regularized;
pub use state::ParticleSystemState;
pub use time_change::time_change_reflected;

use regularized::RegularizedStepper;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RegularizedEuler,
    TimeChange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GirsanovMode {
    Off,
    /// Simulate with `φ ≡ 1` and carry the density `Z_T` of the
    /// interacting law.
    Reweight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLayout {
    /// Deterministic lattice around the center of the domain.
    Grid,
    /// Independent uniform points in `Ω`, redrawn until no pair is closer
    /// than the interaction length.
    UniformInterior,
    /// Particle-major coordinates.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub geometry: DomainGeometry,
    pub suite: DensitySuite,
    pub scheme: Scheme,
    pub dt: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub seed: u64,
    pub stride: usize,
    pub girsanov: GirsanovMode,
    pub initial: InitialLayout,
    pub freeze_escape_drift: bool,
}

impl SimConfig {
    /// Regularized scheme, grid start, `dt = 1e-3`, `ε = 1e-2`, stride 10.
    pub fn new(geometry: DomainGeometry, suite: DensitySuite, horizon: f64, seed: u64) -> Self {
        Self {
            geometry,
            suite,
            scheme: Scheme::RegularizedEuler,
            dt: 1e-3,
            epsilon: 1e-2,
            horizon,
            seed,
            stride: 10,
            girsanov: GirsanovMode::Off,
            initial: InitialLayout::Grid,
            freeze_escape_drift: false,
        }
    }

    pub fn n(&self) -> usize {
        self.suite.n()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return bad(format!("horizon must be nonnegative, got {}", self.horizon));
        }
        if self.horizon > 0.0 && self.dt >= self.horizon {
            return bad(format!("dt = {} must be smaller than the horizon {}", self.dt, self.horizon));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if self.scheme == Scheme::RegularizedEuler {
            if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
                return bad(format!("epsilon must be positive, got {}", self.epsilon));
            }
            if self.epsilon >= self.geometry.diameter() / 4.0 {
                return bad(format!(
                    "epsilon = {} is too wide for a domain of diameter {}",
                    self.epsilon,
                    self.geometry.diameter()
                ));
            }
        }
        if self.suite.delta() == 1 && !self.geometry.is_ball() {
            return bad("tangential diffusion (delta = 1) needs a ball of dimension at least 2".into());
        }
        if let InitialLayout::Explicit(p) = &self.initial {
            if p.len() != self.n() * self.geometry.dimension() {
                return bad(format!(
                    "{} initial coordinates given, expected {}",
                    p.len(),
                    self.n() * self.geometry.dimension()
                ));
            }
        }
        Ok(())
    }

    /// Number of fine steps; the last one is shortened to land on `T`.
    pub fn n_steps(&self) -> u64 {
        if self.horizon <= 0.0 {
            0
        } else {
            (self.horizon / self.dt - 1e-9).ceil().max(1.0) as u64
        }
    }

    /// Sticky-layer width used for state bookkeeping.
    pub(crate) fn layer_width(&self) -> f64 {
        match self.scheme {
            Scheme::RegularizedEuler => self.epsilon,
            Scheme::TimeChange => 0.0,
        }
    }

    fn step_length(&self, k: u64) -> f64 {
        let t = k as f64 * self.dt;
        self.dt.min(self.horizon - t)
    }

    fn is_sample_step(&self, k: u64, n_steps: u64) -> bool {
        k % self.stride as u64 == 0 || k == n_steps
    }
}

/// Left-point states and Brownian increments of every fine step.
#[derive(Clone, Debug, Serialize)]
pub struct NoiseRecord {
    pub dim: usize,
    /// Step lengths.
    pub steps: Vec<f64>,
    /// `N·d` increments per step, step-major.
    pub increments: Vec<f64>,
    /// `N·d` positions per step at the left end of the step.
    pub positions: Vec<f64>,
    /// `N` flags per step at the left end of the step.
    pub flags: Vec<bool>,
}

impl NoiseRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ParticleSystemState>,
    /// Time each particle spent in sticky mode (fine-grid accumulation).
    pub boundary_time: Vec<f64>,
    /// Boundary local time `l_T` of the time-changed process.
    pub local_time: Option<f64>,
    pub noise: Option<NoiseRecord>,
    pub weight: Option<f64>,
    pub min_pair_distance: f64,
    pub horizon: f64,
}

impl Trajectory {
    /// Fraction of `[0, T]` spent on the boundary, per particle.
    pub fn boundary_fraction(&self) -> Vec<f64> {
        if self.horizon <= 0.0 {
            return vec![0.0; self.boundary_time.len()];
        }
        self.boundary_time.iter().map(|b| b / self.horizon).collect()
    }

    pub fn final_state(&self) -> &ParticleSystemState {
        self.states.last().expect("a trajectory holds at least its initial state")
    }
}

/// Initial state for path `path` of an ensemble.
pub fn initial_state(cfg: &SimConfig, path: u64) -> Result<ParticleSystemState> {
    let g = &cfg.geometry;
    let d = g.dimension();
    let n = cfg.n();
    let positions = match &cfg.initial {
        InitialLayout::Explicit(p) => p.clone(),
        InitialLayout::Grid => grid_layout(g, n),
        InitialLayout::UniformInterior => uniform_layout(cfg, path)?,
    };
    if positions.len() != n * d {
        return Err(Error::InvalidInput("initial layout has the wrong size".into()));
    }
    ParticleSystemState::from_positions(g, positions, cfg.layer_width())
}

fn grid_layout(g: &DomainGeometry, n: usize) -> Vec<f64> {
    match g.kind() {
        DomainKind::Interval { a, b } => (0..n)
            .map(|k| a + (b - a) * (k + 1) as f64 / (n + 1) as f64)
            .collect(),
        DomainKind::Ball { center, radius } => {
            let d = center.len();
            let mut m = 1usize;
            while m.pow(d as u32) < n {
                m += 1;
            }
            let half = 0.5 * radius / (d as f64).sqrt();
            let mut out = Vec::with_capacity(n * d);
            for idx in 0..n {
                let mut rest = idx;
                for c in center.iter() {
                    let j = rest % m;
                    rest /= m;
                    let u = (2 * j + 1) as f64 / m as f64 - 1.0;
                    out.push(c + half * u);
                }
            }
            out
        }
    }
}

fn uniform_layout(cfg: &SimConfig, path: u64) -> Result<Vec<f64>> {
    let g = &cfg.geometry;
    let d = g.dimension();
    let n = cfg.n();
    let spacing = match cfg.suite.pair() {
        Some(p) => match p.kind {
            crate::densities::PairKind::LennardJones { c, .. } => c,
            _ => 0.0,
        },
        None => 0.0,
    };
    let margin = cfg.layer_width();
    let mut rng = LayoutStream::new(cfg.seed, path);
    let (lo, hi): (Vec<f64>, Vec<f64>) = match g.kind() {
        DomainKind::Interval { a, b } => (vec![*a], vec![*b]),
        DomainKind::Ball { center, radius } => (
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        ),
    };
    for _ in 0..10_000 {
        let mut pos = Vec::with_capacity(n * d);
        while pos.len() < n * d {
            let x: Vec<f64> = (0..d).map(|k| rng.uniform(lo[k], hi[k])).collect();
            if g.signed_distance(&x) < -margin {
                pos.extend(x);
            }
        }
        let ok = (0..n).all(|i| {
            (i + 1..n).all(|j| {
                crate::geometry::dist(&pos[i * d..(i + 1) * d], &pos[j * d..(j + 1) * d]) >= spacing
            })
        });
        if ok {
            return Ok(pos);
        }
    }
    Err(Error::InvalidInput(format!(
        "could not place {n} particles at mutual distance {spacing}"
    )))
}

/// Simulates path number `path` of the ensemble described by `cfg`.
pub fn simulate(cfg: &SimConfig, path: u64) -> Result<Trajectory> {
    cfg.validate()?;
    match cfg.scheme {
        Scheme::RegularizedEuler => simulate_regularized(cfg, path),
        Scheme::TimeChange => time_change_reflected(cfg, path),
    }
}

fn simulate_regularized(cfg: &SimConfig, path: u64) -> Result<Trajectory> {
    let g = &cfg.geometry;
    let d = g.dimension();
    let n = cfg.n();
    let mut state = initial_state(cfg, path)?;
    let n_steps = cfg.n_steps();
    let reweight = cfg.girsanov == GirsanovMode::Reweight;
    let track_pairs = n > 1;

    let mut streams: Vec<NoiseStream> = (0..n)
        .map(|i| NoiseStream::new(cfg.seed, path, i as u64, d))
        .collect();
    let mut stepper = RegularizedStepper::new(cfg, !reweight);
    let mut xi = vec![0.0; n * d];
    let mut boundary_time = vec![0.0; n];
    let mut min_pair = state.min_pair_distance();

    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    let mut record = reweight.then(|| NoiseRecord {
        dim: d,
        steps: Vec::with_capacity(n_steps as usize),
        increments: Vec::with_capacity(n_steps as usize * n * d),
        positions: Vec::with_capacity(n_steps as usize * n * d),
        flags: Vec::with_capacity(n_steps as usize * n),
    });

    for k in 0..n_steps {
        let h = cfg.step_length(k);
        for (i, s) in streams.iter_mut().enumerate() {
            s.fill_step(k, &mut xi[i * d..(i + 1) * d]);
        }
        for (i, bt) in boundary_time.iter_mut().enumerate() {
            if state.on_boundary(i) {
                *bt += h;
            }
        }
        if let Some(r) = record.as_mut() {
            let sq = h.sqrt();
            r.steps.push(h);
            r.increments.extend(xi.iter().map(|z| sq * z));
            r.positions.extend_from_slice(state.positions());
            r.flags.extend_from_slice(state.flags());
        }
        let t = state.time;
        stepper
            .step(&mut state, &xi, h)
            .map_err(|e| Error::StepFailed {
                time: t,
                source: Box::new(e),
            })?;
        state.time = (k + 1) as f64 * cfg.dt;
        if k + 1 == n_steps {
            state.time = cfg.horizon;
        }
        debug_assert!(state
            .validate(g, cfg.epsilon + h, cfg.suite.delta() == 1)
            .is_ok());
        if track_pairs {
            min_pair = min_pair.min(state.min_pair_distance());
        }
        if cfg.is_sample_step(k + 1, n_steps) {
            times.push(state.time);
            states.push(state.clone());
        }
    }

    let mut traj = Trajectory {
        times,
        states,
        boundary_time,
        local_time: None,
        noise: record,
        weight: None,
        min_pair_distance: min_pair,
        horizon: cfg.horizon,
    };
    if reweight {
        traj.weight = Some(girsanov_weight(&traj, &cfg.suite, g)?);
    }
    Ok(traj)
}
