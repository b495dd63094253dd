//! The generator `Lf = ½Tr(A∇²f) + (b,∇f)` on `C²` observables, the
//! Wentzell boundary residual and the Monte Carlo martingale residual.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::densities::DensitySuite;
use crate::error::{Error, Result};
use crate::geometry::{dot, DomainGeometry};
use crate::simulator::{ParticleSystemState, Trajectory};
use crate::stats::mean_stderr;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync>;

/// A function of the full configuration with analytic first and second
/// derivatives. All closures take the particle-major coordinate vector.
#[derive(Clone)]
pub struct Observable {
    name: String,
    value: ValueFn,
    gradient: GradFn,
    hessian: HessFn,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observable({})", self.name)
    }
}

impl Observable {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hessian: impl Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(
            format!("const:{c}"),
            move |_| c,
            |_, g| g.fill(0.0),
            |_, h| h.fill(0.0),
        )
    }

    /// Looks up a catalog observable for `n` particles in dimension `d`.
    ///
    /// * `coord:i:k`: the `k`-th coordinate of particle `i`,
    /// * `radius2:i`: `|xⁱ|²`,
    /// * `pairdist2:i:j`: `|xⁱ − xʲ|²`,
    ///
    /// with 1-based indices.
    pub fn from_name(name: &str, n: usize, d: usize) -> Result<Self> {
        let parts: Vec<&str> = name.split(':').collect();
        let index = |s: &str, max: usize| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 && v <= max => Ok(v - 1),
                _ => Err(Error::InvalidInput(format!(
                    "index `{s}` in observable `{name}` must lie in 1..={max}"
                ))),
            }
        };
        match parts.as_slice() {
            ["coord", i, k] => {
                let idx = index(i, n)? * d + index(k, d)?;
                Ok(Self::new(
                    name,
                    move |x| x[idx],
                    move |_, g| {
                        g.fill(0.0);
                        g[idx] = 1.0;
                    },
                    |_, h| h.fill(0.0),
                ))
            }
            ["radius2", i] => {
                let i = index(i, n)?;
                let r = i * d..(i + 1) * d;
                let (r1, r2) = (r.clone(), r.clone());
                Ok(Self::new(
                    name,
                    move |x| x[r.clone()].iter().map(|v| v * v).sum(),
                    move |x, g| {
                        g.fill(0.0);
                        for k in r1.clone() {
                            g[k] = 2.0 * x[k];
                        }
                    },
                    move |_, h| {
                        h.fill(0.0);
                        for k in r2.clone() {
                            h[(k, k)] = 2.0;
                        }
                    },
                ))
            }
            ["pairdist2", i, j] => {
                let (i, j) = (index(i, n)?, index(j, n)?);
                if i == j {
                    return Err(Error::InvalidInput(format!(
                        "observable `{name}` needs two distinct particles"
                    )));
                }
                Ok(Self::new(
                    name,
                    move |x| (0..d).map(|k| (x[i * d + k] - x[j * d + k]).powi(2)).sum(),
                    move |x, g| {
                        g.fill(0.0);
                        for k in 0..d {
                            let z = x[i * d + k] - x[j * d + k];
                            g[i * d + k] = 2.0 * z;
                            g[j * d + k] = -2.0 * z;
                        }
                    },
                    move |_, h| {
                        h.fill(0.0);
                        for k in 0..d {
                            h[(i * d + k, i * d + k)] = 2.0;
                            h[(j * d + k, j * d + k)] = 2.0;
                            h[(i * d + k, j * d + k)] = -2.0;
                            h[(j * d + k, i * d + k)] = -2.0;
                        }
                    },
                ))
            }
            _ => Err(Error::InvalidInput(format!(
                "unknown observable `{name}` (expected coord:i:k, radius2:i or pairdist2:i:j)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: &ParticleSystemState) -> f64 {
        (self.value)(x.positions())
    }

    pub fn gradient(&self, x: &ParticleSystemState) -> Vec<f64> {
        let mut g = vec![0.0; x.positions().len()];
        (self.gradient)(x.positions(), &mut g);
        g
    }

    pub fn hessian(&self, x: &ParticleSystemState) -> DMatrix<f64> {
        let nd = x.positions().len();
        let mut h = DMatrix::zeros(nd, nd);
        (self.hessian)(x.positions(), &mut h);
        h
    }
}

/// `Lf(x) = ½Tr(A∇²f) + (b,∇f)`.
pub fn apply_generator(
    f: &Observable,
    x: &ParticleSystemState,
    s: &DensitySuite,
    g: &DomainGeometry,
) -> Result<f64> {
    let a = s.assemble_diffusion(g, x)?;
    let b = s.assemble_drift(g, x)?;
    let h = f.hessian(x);
    let grad = f.gradient(x);
    Ok(0.5 * (a * h).trace() + dot(&b, &grad))
}

/// `Lf` assembled term by term from the one-particle operators:
/// `½(Δ_i f + (∇α_i/α_i + ∇_i ln φ, ∇_i f))` for interior particles and
/// `−½(α_i/β_i)(n,∇_i f) + (δ/2)(Δ_{Γ,i} f + (∇_Γβ_i/β_i + ∇_{Γ,i} ln φ, ∇_{Γ,i} f))`
/// for boundary particles.
pub fn apply_generator_expanded(
    f: &Observable,
    x: &ParticleSystemState,
    s: &DensitySuite,
    g: &DomainGeometry,
) -> Result<f64> {
    let d = x.dim();
    let grad = f.gradient(x);
    let hess = f.hessian(x);
    let mut total = 0.0;
    for i in 0..x.n() {
        let xi = x.position(i);
        let r = i * d..(i + 1) * d;
        let gi = &grad[r.clone()];
        let hi = hess.view((i * d, i * d), (d, d)).clone_owned();
        let phi = s.phi_log_grad(i, x)?;
        if !x.on_boundary(i) {
            let la = s.alpha_log_grad(i, xi)?;
            total += 0.5 * (hi.trace() + dot(&la, gi)) + 0.5 * dot(&phi, gi);
            continue;
        }
        let n = g.normal_field(xi)?;
        total -= 0.5 * s.stickiness_ratio(i, xi)? * dot(&n, gi);
        if s.delta() == 1 {
            let lap = g.surface_laplacian(xi, gi, &hi)?;
            let lb = s.beta_log_surface_grad(i, xi, g)?;
            let pphi = g.surface_gradient(xi, &phi)?;
            let gg = g.surface_gradient(xi, gi)?;
            total += 0.5 * (lap + dot(&lb, &gg) + dot(&pphi, &gg));
        }
    }
    Ok(total)
}

/// Left-hand side of the Wentzell condition for particle `i` on `Γ`
/// (`δ = 0`): `Δ_i f + (∇_i ϱ/ϱ, ∇_i f) + (α_i/β_i)(n, ∇_i f)` with
/// `∇_i ϱ/ϱ = ∇α_i/α_i + ∇_i ln φ`.
pub fn wentzell_residual(
    f: &Observable,
    x: &ParticleSystemState,
    s: &DensitySuite,
    g: &DomainGeometry,
    i: usize,
) -> Result<f64> {
    if s.delta() == 1 {
        return Err(Error::NotApplicable(
            "the Wentzell condition is only stated without tangential diffusion (delta = 0)".into(),
        ));
    }
    let d = x.dim();
    let xi = x.position(i);
    if !g.is_on_boundary(xi) {
        return Err(Error::NotOnBoundary {
            distance: g.signed_distance(xi),
        });
    }
    let grad = f.gradient(x);
    let gi = &grad[i * d..(i + 1) * d];
    let hess = f.hessian(x);
    let lap = hess.view((i * d, i * d), (d, d)).trace();
    let mut log_rho = s.alpha_log_grad(i, xi)?;
    for (a, p) in log_rho.iter_mut().zip(s.phi_log_grad(i, x)?) {
        *a += p;
    }
    let n = g.normal_field(xi)?;
    Ok(lap + dot(&log_rho, gi) + s.stickiness_ratio(i, xi)? * dot(&n, gi))
}

/// `f(X_t) − f(X_0) − ∫₀ᵗ Lf(X_s) ds` along one stored path, with the
/// trapezoid rule on the stored grid up to the last sample at or before `t`.
pub fn martingale_increment(
    traj: &Trajectory,
    f: &Observable,
    s: &DensitySuite,
    g: &DomainGeometry,
    t: f64,
) -> Result<f64> {
    let last = traj
        .times
        .iter()
        .rposition(|&u| u <= t + 1e-12)
        .ok_or(Error::EmptyEnsemble)?;
    if last == 0 {
        return Ok(0.0);
    }
    let mut integral = 0.0;
    let mut prev = apply_generator(f, &traj.states[0], s, g)?;
    for k in 1..=last {
        let cur = apply_generator(f, &traj.states[k], s, g)?;
        integral += 0.5 * (prev + cur) * (traj.times[k] - traj.times[k - 1]);
        prev = cur;
    }
    Ok(f.value(&traj.states[last]) - f.value(&traj.states[0]) - integral)
}

/// Ensemble mean and standard error of [`martingale_increment`].
pub fn martingale_residual(
    paths: &[Trajectory],
    f: &Observable,
    s: &DensitySuite,
    g: &DomainGeometry,
    t: f64,
) -> Result<(f64, f64)> {
    if paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let incs = paths
        .iter()
        .map(|p| martingale_increment(p, f, s, g, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_stderr(&incs))
}
