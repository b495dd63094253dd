use crate::densities::DriftWork;
use crate::error::{Error, Result};

use super::{ParticleSystemState, Scheme, SimConfig};

/// One step of the sticky-layer scheme with explicit standard normals `xi`
/// (`N·d` values, particle-major) and step length `cfg.dt`.
pub fn step_regularized(
    state: &ParticleSystemState,
    cfg: &SimConfig,
    xi: &[f64],
) -> Result<ParticleSystemState> {
    if cfg.scheme != Scheme::RegularizedEuler {
        return Err(Error::NotApplicable(
            "step_regularized needs the regularized scheme".into(),
        ));
    }
    if xi.len() != state.positions().len() {
        return Err(Error::InvalidInput(format!(
            "{} normals supplied for {} coordinates",
            xi.len(),
            state.positions().len()
        )));
    }
    let mut next = state.clone();
    RegularizedStepper::new(cfg, true).step(&mut next, xi, cfg.dt)?;
    next.time = state.time + cfg.dt;
    Ok(next)
}

pub(crate) struct RegularizedStepper<'a> {
    cfg: &'a SimConfig,
    include_pair: bool,
    work: DriftWork,
    drift: Vec<f64>,
    normal: Vec<f64>,
    anchor: Vec<f64>,
    next: Vec<f64>,
    next_flags: Vec<bool>,
    next_escape: Vec<f64>,
}

impl<'a> RegularizedStepper<'a> {
    pub(crate) fn new(cfg: &'a SimConfig, include_pair: bool) -> Self {
        let d = cfg.geometry.dimension();
        let n = cfg.n();
        Self {
            cfg,
            include_pair,
            work: DriftWork::new(d),
            drift: vec![0.0; d],
            normal: vec![0.0; d],
            anchor: vec![0.0; d],
            next: vec![0.0; n * d],
            next_flags: vec![false; n],
            next_escape: vec![0.0; n],
        }
    }

    /// Advances every particle by `h`; all drifts are evaluated at the old
    /// configuration.
    pub(crate) fn step(&mut self, state: &mut ParticleSystemState, xi: &[f64], h: f64) -> Result<()> {
        let n = state.n();
        let d = state.dim();
        for i in 0..n {
            self.advance(state, i, &xi[i * d..(i + 1) * d], h)?;
        }
        for i in 0..n {
            state
                .position_mut(i)
                .copy_from_slice(&self.next[i * d..(i + 1) * d]);
            state.set_mode(i, self.next_flags[i], self.next_escape[i]);
        }
        Ok(())
    }

    fn advance(&mut self, state: &ParticleSystemState, i: usize, xi: &[f64], h: f64) -> Result<()> {
        let cfg = self.cfg;
        let g = &cfg.geometry;
        let eps = cfg.epsilon;
        let d = state.dim();
        let sticky = state.on_boundary(i);
        let x = state.position(i);
        let sq = h.sqrt();
        let out = i * d..(i + 1) * d;

        let tangential = cfg.suite.delta() == 1;
        if !sticky || tangential {
            cfg.suite.drift_block_into(
                g,
                state.positions(),
                sticky,
                i,
                self.include_pair,
                &mut self.work,
                &mut self.drift,
            )?;
        }

        if !sticky {
            let y = &mut self.next[out.clone()];
            for k in 0..d {
                y[k] = x[k] + self.drift[k] * h + sq * xi[k];
            }
            check_finite(y, i)?;
            let sd = g.signed_distance(y);
            if -sd > eps {
                self.next_flags[i] = false;
                self.next_escape[i] = 0.0;
                return Ok(());
            }
            // Entered the layer; overshoot beyond Γ counts toward the budget.
            if sd > 0.0 || tangential {
                g.closest_boundary_point_into(y, &mut self.anchor)?;
                y.copy_from_slice(&self.anchor);
            }
            self.next_flags[i] = true;
            self.next_escape[i] = eps + sd;
            return Ok(());
        }

        g.closest_boundary_point_into(x, &mut self.anchor)?;
        let push = if cfg.freeze_escape_drift {
            0.0
        } else {
            0.5 * cfg.suite.stickiness_ratio(i, &self.anchor)? * h
        };
        let budget = state.escape(i) - push;

        if tangential {
            g.normal_field_into(x, &mut self.normal)?;
            let xn: f64 = xi.iter().zip(&self.normal).map(|(a, b)| a * b).sum();
            let w = &mut self.next[out.clone()];
            for k in 0..d {
                w[k] = x[k] + self.drift[k] * h + sq * (xi[k] - xn * self.normal[k]);
            }
            check_finite(w, i)?;
            g.closest_boundary_point_into(w, &mut self.anchor)?;
            w.copy_from_slice(&self.anchor);
        } else {
            self.next[out.clone()].copy_from_slice(&self.anchor);
        }

        let y = &mut self.next[out];
        // With tangential diffusion the particle stays on Γ until released.
        let depth = if tangential && budget >= 0.0 {
            0.0
        } else {
            (eps - budget).max(0.0)
        };
        if depth > 0.0 {
            g.normal_field_into(y, &mut self.normal)?;
            for k in 0..d {
                y[k] -= depth * self.normal[k];
            }
        }
        if budget < 0.0 {
            self.next_flags[i] = false;
            self.next_escape[i] = 0.0;
        } else {
            self.next_flags[i] = true;
            self.next_escape[i] = budget;
        }
        Ok(())
    }
}

fn check_finite(v: &[f64], i: usize) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("position of particle {i}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::DensitySuite;
    use crate::geometry::DomainGeometry;
    use approx::assert_abs_diff_eq;

    fn cfg(delta: u8) -> SimConfig {
        SimConfig::new(
            DomainGeometry::centered_ball(2, 1.0).unwrap(),
            DensitySuite::uniform(1, delta).unwrap(),
            1.0,
            0,
        )
    }

    fn start(c: &SimConfig, p: Vec<f64>) -> ParticleSystemState {
        ParticleSystemState::from_positions(&c.geometry, p, c.epsilon).unwrap()
    }

    #[test]
    fn zero_noise_interior_step_with_constant_densities_is_identity() {
        let c = cfg(0);
        let x = start(&c, vec![0.3, -0.2]);
        let y = step_regularized(&x, &c, &[0.0, 0.0]).unwrap();
        assert_eq!(y.positions(), x.positions());
        assert!(!y.on_boundary(0));
    }

    #[test]
    fn sticky_particle_is_pushed_inward_by_half_the_ratio() {
        let c = cfg(0);
        let x = start(&c, vec![1.0, 0.0]);
        let y = step_regularized(&x, &c, &[3.0, -1.0]).unwrap();
        assert_abs_diff_eq!(y.position(0)[0], 0.9995, epsilon = 1e-15);
        assert_abs_diff_eq!(y.position(0)[1], 0.0, epsilon = 1e-15);
        assert!(y.on_boundary(0));
    }

    #[test]
    fn sticky_particle_leaves_the_layer_after_its_budget() {
        let c = cfg(0);
        let mut x = start(&c, vec![1.0, 0.0]);
        let mut steps = 0;
        while x.on_boundary(0) {
            x = step_regularized(&x, &c, &[0.0, 0.0]).unwrap();
            steps += 1;
        }
        // budget ε = 0.01 spent at 5e-4 per step
        assert!((20..=21).contains(&steps), "{steps}");
        assert!(1.0 - x.position(0)[0] > c.epsilon);
    }

    #[test]
    fn overshoot_is_snapped_and_added_to_the_budget() {
        let c = cfg(0);
        let x = start(&c, vec![0.995, 0.0]);
        let xi = [0.02 / c.dt.sqrt(), 0.0];
        let y = step_regularized(&x, &c, &xi).unwrap();
        assert!(y.on_boundary(0));
        assert_abs_diff_eq!(y.position(0)[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.escape(0), c.epsilon + 0.015, epsilon = 1e-12);
    }

    #[test]
    fn tangential_step_without_noise_stays_on_the_circle() {
        let c = cfg(1);
        let x = start(&c, vec![0.6, 0.8]);
        let y = step_regularized(&x, &c, &[0.0, 0.0]).unwrap();
        assert!(c.geometry.signed_distance(y.position(0)).abs() <= 1e-12);
        assert!(y.on_boundary(0));
        let y = step_regularized(&x, &c, &[1.3, -0.4]).unwrap();
        assert!(c.geometry.signed_distance(y.position(0)).abs() <= 1e-12);
    }

    #[test]
    fn wrong_noise_length_is_rejected() {
        let c = cfg(0);
        let x = start(&c, vec![0.0, 0.0]);
        assert!(step_regularized(&x, &c, &[0.0]).is_err());
    }
}
