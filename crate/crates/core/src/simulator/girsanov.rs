use crate::densities::DensitySuite;
use crate::error::{Error, Result};
use crate::geometry::{dot, DomainGeometry};

use super::Trajectory;

/// `exp(Σ_k u_k·ΔB_k − ½ Σ_k |u_k|² h_k)` for left-point integrands `u_k`
/// and increments `ΔB_k` over steps of length `h_k`.
pub fn exponential_martingale(integrands: &[Vec<f64>], increments: &[Vec<f64>], steps: &[f64]) -> Result<f64> {
    if integrands.len() != increments.len() || integrands.len() != steps.len() {
        return Err(Error::InvalidInput(format!(
            "{} integrands, {} increments and {} step lengths",
            integrands.len(),
            increments.len(),
            steps.len()
        )));
    }
    let mut log = 0.0;
    for ((u, db), h) in integrands.iter().zip(increments).zip(steps) {
        log += dot(u, db) - 0.5 * dot(u, u) * h;
    }
    let z = log.exp();
    if !z.is_finite() {
        return Err(Error::NonFinite("Girsanov weight".into()));
    }
    Ok(z)
}

/// Density of the interacting law with respect to the `φ ≡ 1` law on the
/// recorded noise.
///
/// The drift difference is `½∇_i ln φ` for interior particles,
/// `½δP∇_i ln φ` for sticky ones; it is integrated against the same noise
/// that drove the particle.
pub fn girsanov_weight(traj: &Trajectory, s: &DensitySuite, g: &DomainGeometry) -> Result<f64> {
    let rec = traj.noise.as_ref().ok_or(Error::MissingIncrements)?;
    if s.pair().is_none() {
        return Ok(1.0);
    }
    let d = rec.dim;
    let n = s.n();
    let nd = n * d;
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; 2 * d];
    let mut normal = vec![0.0; d];
    let mut log = 0.0;
    for (k, &h) in rec.steps.iter().enumerate() {
        let pos = &rec.positions[k * nd..(k + 1) * nd];
        let db = &rec.increments[k * nd..(k + 1) * nd];
        for i in 0..n {
            let sticky = rec.flags[k * n + i];
            if sticky && s.delta() == 0 {
                continue;
            }
            s.phi_log_grad_into(i, pos, d, &mut grad, &mut scratch)?;
            grad.iter_mut().for_each(|v| *v *= 0.5);
            if sticky {
                g.normal_field_into(&pos[i * d..(i + 1) * d], &mut normal)?;
                let c = dot(&grad, &normal);
                for (v, nk) in grad.iter_mut().zip(&normal) {
                    *v -= c * nk;
                }
            }
            log += dot(&grad, &db[i * d..(i + 1) * d]) - 0.5 * dot(&grad, &grad) * h;
        }
    }
    let z = log.exp();
    if !z.is_finite() {
        return Err(Error::NonFinite("Girsanov weight".into()));
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::PairPotential;
    use crate::simulator::{simulate, GirsanovMode, SimConfig};

    #[test]
    fn constant_integrand_gives_closed_form() {
        let v = vec![0.3, -0.7];
        let incs = vec![vec![0.1, 0.2], vec![-0.05, 0.4], vec![0.3, -0.1]];
        let steps = vec![0.01; 3];
        let z = exponential_martingale(&vec![v.clone(); 3], &incs, &steps).unwrap();
        let b_t = [0.35, 0.5];
        let expected = (dot(&v, &b_t) - 0.5 * dot(&v, &v) * 0.03).exp();
        assert!((z - expected).abs() < 1e-14 * expected);
        assert!(exponential_martingale(&[v], &incs, &steps).is_err());
    }

    fn reweighted(pair: Option<PairPotential>) -> SimConfig {
        let mut suite = DensitySuite::uniform(2, 0).unwrap();
        if let Some(p) = pair {
            suite = suite.with_pair(p);
        }
        let mut cfg = SimConfig::new(DomainGeometry::centered_ball(2, 1.0).unwrap(), suite, 0.1, 1);
        cfg.girsanov = GirsanovMode::Reweight;
        cfg
    }

    #[test]
    fn trivial_interaction_has_unit_weight() {
        let t = simulate(&reweighted(None), 0).unwrap();
        assert_eq!(t.weight, Some(1.0));
    }

    #[test]
    fn missing_increments_are_reported() {
        let mut cfg = reweighted(Some(PairPotential::gaussian(1.0, 0.3).unwrap()));
        cfg.girsanov = GirsanovMode::Off;
        let t = simulate(&cfg, 0).unwrap();
        assert!(matches!(
            girsanov_weight(&t, &cfg.suite, &cfg.geometry),
            Err(Error::MissingIncrements)
        ));
    }

    #[test]
    fn weight_is_positive_and_nontrivial_with_interaction() {
        let cfg = reweighted(Some(PairPotential::gaussian(2.0, 0.3).unwrap()));
        let t = simulate(&cfg, 0).unwrap();
        let z = t.weight.unwrap();
        assert!(z > 0.0 && z != 1.0);
        assert_eq!(t.noise.as_ref().unwrap().len(), 100);
    }
}
