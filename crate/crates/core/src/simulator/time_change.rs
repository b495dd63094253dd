//! One-particle sticky process as a time change of a reflected diffusion.
//!
//! `Y` solves `dY = dB + ½∇ln α(Y) dt + ½ dL` with mirror reflection at `Γ`;
//! `l` is its boundary local time, normalized so that the reflection
//! displacement is `½ dl`, and estimated per step as four times the
//! overshoot. `X_t = Y_{τ_t}` with `τ` the inverse of
//! `A_t = t + ∫ (β/α)(Y_s) dl_s`. On each fine step the X-clock first runs
//! through the interior segment (length `dt`, linear interpolation of `Y`)
//! and then holds the particle at the reflection point for `(β/α)Δl`.

use crate::error::{Error, Result};
use crate::geometry::{DomainGeometry, DomainKind};
use crate::rng::NoiseStream;

use super::{initial_state, ParticleSystemState, SimConfig, Trajectory};

/// Reflection of an Euler proposal: returns the reflected point, the
/// boundary point hit (if any) and the total overshoot.
pub(crate) fn reflect(g: &DomainGeometry, y: &mut [f64], hit: &mut [f64]) -> Result<f64> {
    match g.kind() {
        DomainKind::Interval { a, b } => {
            let len = b - a;
            let mut over = 0.0;
            // folding; more than one fold per step only for absurd dt
            for _ in 0..64 {
                if y[0] > *b {
                    over += y[0] - b;
                    y[0] = 2.0 * b - y[0];
                    hit[0] = *b;
                } else if y[0] < *a {
                    over += a - y[0];
                    y[0] = 2.0 * a - y[0];
                    hit[0] = *a;
                } else {
                    return Ok(over);
                }
            }
            Err(Error::NonFinite(format!(
                "reflection did not converge on an interval of length {len}"
            )))
        }
        DomainKind::Ball { center, radius } => {
            let r = crate::geometry::dist(y, center);
            if !r.is_finite() {
                return Err(Error::NonFinite("reflected position".into()));
            }
            if r <= *radius {
                return Ok(0.0);
            }
            let over = r - radius;
            let target = (radius - over).max(0.0);
            for k in 0..y.len() {
                let u = (y[k] - center[k]) / r;
                hit[k] = center[k] + radius * u;
                y[k] = center[k] + target * u;
            }
            Ok(over)
        }
    }
}

/// Simulates the one-particle sticky process (`δ = 0`) by time change.
pub fn time_change_reflected(cfg: &SimConfig, path: u64) -> Result<Trajectory> {
    if cfg.n() != 1 {
        return Err(Error::NotApplicable(format!(
            "the time change construction is for one particle, got {}",
            cfg.n()
        )));
    }
    if cfg.suite.delta() != 0 {
        return Err(Error::NotApplicable(
            "the time change construction has no tangential diffusion (delta = 0)".into(),
        ));
    }
    let g = &cfg.geometry;
    let d = g.dimension();
    let s = &cfg.suite;
    let start = initial_state(cfg, path)?;
    let horizon = cfg.horizon;
    let out_dt = cfg.stride as f64 * cfg.dt;
    let n_out = if horizon > 0.0 {
        (horizon / out_dt - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    let out_time = |j: usize| if j >= n_out { horizon } else { j as f64 * out_dt };

    let mut times = vec![0.0];
    let mut states = vec![start.clone()];
    let mut next_out = 1usize;
    let emit = |t: f64, x: &[f64], on_gamma: bool, times: &mut Vec<f64>, states: &mut Vec<ParticleSystemState>| -> Result<()> {
        let mut st = ParticleSystemState::new(d, x.to_vec(), vec![on_gamma], 0.0)?;
        st.time = t;
        times.push(t);
        states.push(st);
        Ok(())
    };

    let mut noise = NoiseStream::new(cfg.seed, path, 0, d);
    let mut xi = vec![0.0; d];
    let mut y = start.positions().to_vec();
    let mut prop = vec![0.0; d];
    let mut hit = vec![0.0; d];
    let mut drift = vec![0.0; d];
    let mut clock = 0.0; // X-time, i.e. A
    let mut boundary_time = 0.0;
    let mut local_time = 0.0;
    let mut step: u64 = 0;
    let sq = cfg.dt.sqrt();

    while next_out <= n_out {
        noise.fill_step(step, &mut xi);
        step += 1;
        drift.copy_from_slice(&s.alpha_log_grad(0, &y)?);
        for k in 0..d {
            prop[k] = y[k] + 0.5 * drift[k] * cfg.dt + sq * xi[k];
        }
        let over = reflect(g, &mut prop, &mut hit)?;

        // interior segment [clock, clock + dt]
        let seg_end = clock + cfg.dt;
        while next_out <= n_out && out_time(next_out) <= seg_end {
            let t = out_time(next_out);
            let w = (t - clock) / cfg.dt;
            let x: Vec<f64> = (0..d).map(|k| y[k] + w * (prop[k] - y[k])).collect();
            emit(t, &x, false, &mut times, &mut states)?;
            next_out += 1;
        }
        clock = seg_end;
        y.copy_from_slice(&prop);
        if over > 0.0 {
            let dl = 4.0 * over;
            let sojourn = s.beta(0).value(&hit) / s.alpha(0).value(&hit) * dl;
            let end = clock + sojourn;
            while next_out <= n_out && out_time(next_out) < end {
                let t = out_time(next_out);
                emit(t, &hit, true, &mut times, &mut states)?;
                next_out += 1;
            }
            let used = (end.min(horizon) - clock).max(0.0);
            boundary_time += used;
            if sojourn > 0.0 {
                local_time += dl * used / sojourn;
            }
            clock = end;
        }
        if clock >= horizon && next_out > n_out {
            break;
        }
    }

    Ok(Trajectory {
        times,
        states,
        boundary_time: vec![boundary_time],
        local_time: Some(local_time),
        noise: None,
        weight: None,
        min_pair_distance: f64::INFINITY,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::DensitySuite;
    use crate::simulator::{simulate, Scheme};

    fn cfg(beta: f64, horizon: f64) -> SimConfig {
        let mut c = SimConfig::new(
            DomainGeometry::interval(0.0, 1.0).unwrap(),
            DensitySuite::constant(1, 1.0, beta, 0).unwrap(),
            horizon,
            2,
        );
        c.scheme = Scheme::TimeChange;
        c
    }

    #[test]
    fn refuses_several_particles_or_tangential_diffusion() {
        let mut c = cfg(1.0, 1.0);
        c.suite = DensitySuite::uniform(2, 0).unwrap();
        assert!(matches!(simulate(&c, 0), Err(Error::NotApplicable(_))));
        let mut c = cfg(1.0, 1.0);
        c.geometry = DomainGeometry::centered_ball(2, 1.0).unwrap();
        c.suite = DensitySuite::uniform(1, 1).unwrap();
        assert!(matches!(simulate(&c, 0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn vanishing_beta_is_the_identity_time_change() {
        let t = simulate(&cfg(1e-12, 20.0), 0).unwrap();
        assert!(t.boundary_time[0] < 1e-6);
        assert_eq!(t.states.len(), 2001);
    }

    #[test]
    fn occupation_equals_beta_times_local_time() {
        for beta in [0.5, 2.0] {
            let t = simulate(&cfg(beta, 50.0), 1).unwrap();
            let ratio = t.boundary_time[0] / t.local_time.unwrap();
            assert!((ratio - beta).abs() < 1e-9 * beta, "{ratio}");
        }
    }

    #[test]
    fn output_grid_is_uniform_and_inside() {
        let c = cfg(1.0, 3.0);
        let t = simulate(&c, 0).unwrap();
        assert_eq!(t.times.len(), 301);
        for (k, w) in t.times.windows(2).enumerate() {
            assert!(w[1] > w[0], "{k}");
        }
        for s in &t.states {
            assert!(c.geometry.signed_distance(s.position(0)) <= 1e-12);
            if s.on_boundary(0) {
                assert!(c.geometry.is_on_boundary(s.position(0)));
            }
        }
    }

    #[test]
    fn reflect_ball_overshoot() {
        let g = DomainGeometry::centered_ball(2, 1.0).unwrap();
        let mut y = [1.1, 0.0];
        let mut hit = [0.0; 2];
        let o = reflect(&g, &mut y, &mut hit).unwrap();
        assert!((o - 0.1).abs() < 1e-15);
        assert!((y[0] - 0.9).abs() < 1e-15);
        assert_eq!(hit, [1.0, 0.0]);
    }
}
