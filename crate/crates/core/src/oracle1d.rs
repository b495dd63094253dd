//! Brute-force reference for the one-particle sticky process on an interval.
//!
//! An unconstrained Gaussian walk `S` is folded onto `[a, b]`, which gives
//! reflecting Brownian motion without discretization error. Each crossing
//! of a level `m = a + k(b − a)` by `S` between two fine steps contributes
//! the Tanaka correction `2|S_{k+1} − m|` to the local time of `S` at `m`;
//! the boundary local time of the folded path is twice the sum over the
//! levels mapped to that endpoint. The sticky process is the time change by
//! `A_t = t + (β/α) l_t`.

use serde::Serialize;

use crate::ensemble::map_paths;
use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::rng::SequentialNormals;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleConfig {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Independent replicas of length `horizon`, pooled.
    pub replicas: u64,
    /// Start point; the midpoint when `None`.
    pub start: Option<f64>,
}

impl OracleConfig {
    pub fn new(a: f64, b: f64, alpha: f64, beta: f64, horizon: f64, seed: u64) -> Self {
        Self {
            a,
            b,
            alpha,
            beta,
            dt: 1e-4,
            horizon,
            seed,
            replicas: 1,
            start: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.a < self.b
            && self.alpha > 0.0
            && self.beta >= 0.0
            && self.dt > 0.0
            && self.horizon > 0.0
            && self.replicas > 0
            && [self.a, self.b, self.alpha, self.beta, self.dt, self.horizon]
                .iter()
                .all(|v| v.is_finite());
        let start_ok = self.start.is_none_or(|s| s >= self.a && s <= self.b);
        if ok && start_ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid oracle configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OccupationStats {
    pub boundary_fraction: f64,
    pub left_fraction: f64,
    pub right_fraction: f64,
    /// Mean length of an uninterrupted stay at an endpoint.
    pub mean_escape_time: f64,
    /// Boundary fraction of each replica.
    pub replica_fractions: Vec<f64>,
    pub total_time: f64,
}

#[derive(Default)]
struct Tally {
    left: f64,
    right: f64,
    visits: u64,
    total: f64,
}

fn replica(cfg: &OracleConfig, r: u64) -> Tally {
    let len = cfg.b - cfg.a;
    let ratio = cfg.beta / cfg.alpha;
    let sq = cfg.dt.sqrt();
    let mut rng = SequentialNormals::new(cfg.seed, r);
    let mut s = cfg.start.unwrap_or(0.5 * (cfg.a + cfg.b));
    let mut clock = 0.0;
    let mut t = Tally::default();
    let mut in_visit = false;
    while clock < cfg.horizon {
        let next = s + sq * rng.next();
        clock += cfg.dt;
        // levels strictly between s and next, or landed on
        let (lo, hi) = if next > s { (s, next) } else { (next, s) };
        let k_lo = ((lo - cfg.a) / len).floor() as i64 + 1;
        let k_hi = ((hi - cfg.a) / len).floor() as i64;
        let mut crossed = false;
        for k in k_lo..=k_hi {
            let m = cfg.a + k as f64 * len;
            let dl = 4.0 * (next - m).abs();
            let stay = (ratio * dl).min((cfg.horizon - clock).max(0.0));
            if k.rem_euclid(2) == 0 {
                t.left += stay;
            } else {
                t.right += stay;
            }
            clock += ratio * dl;
            if stay > 0.0 && !in_visit {
                t.visits += 1;
            }
            crossed = true;
        }
        in_visit = crossed;
        s = next;
    }
    t.total = cfg.horizon;
    t
}

/// Long-run occupation statistics of the sticky process started at
/// `cfg.start`, pooled over `cfg.replicas` independent replicas.
pub fn sticky_interval_trajectory(cfg: &OracleConfig) -> Result<OccupationStats> {
    cfg.validate()?;
    let tallies = map_paths(cfg.replicas, |r| Ok(replica(cfg, r)))?;
    let total: f64 = tallies.iter().map(|t| t.total).sum();
    let left: f64 = tallies.iter().map(|t| t.left).sum();
    let right: f64 = tallies.iter().map(|t| t.right).sum();
    let visits: u64 = tallies.iter().map(|t| t.visits).sum();
    Ok(OccupationStats {
        boundary_fraction: (left + right) / total,
        left_fraction: left / total,
        right_fraction: right / total,
        mean_escape_time: if visits > 0 {
            (left + right) / visits as f64
        } else {
            0.0
        },
        replica_fractions: tallies.iter().map(|t| (t.left + t.right) / t.total).collect(),
        total_time: total,
    })
}

/// `β σ(Γ) / (α λ(Ω) + β σ(Γ))` for constant densities.
pub fn boundary_fraction_analytic(g: &DomainGeometry, alpha: f64, beta: f64) -> f64 {
    let (vol, surf) = g.measures();
    beta * surf / (alpha * vol + beta * surf)
}
