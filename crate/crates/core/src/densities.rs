//! Interior densities `α_i`, boundary densities `β_i`, the interaction
//! factor `φ` of a pair potential `ζ`, and the coefficients `b`, `A` of the
//! generator.
//!
//! The invariant measure is `μ = φ ∏_i (α_i λ + β_i σ)`. The interaction
//! factor is `φ(x) = exp(−Σ_{i<j} ζ(xⁱ − xʲ))`, one term per unordered
//! pair, which makes `∇_i ln φ = −Σ_{j≠i} ∇ζ(xⁱ − xʲ)`; for Lennard-Jones
//! that is `Σ_{j≠i} f(|xⁱ−xʲ|)(xⁱ−xʲ)` with
//! `f(r) = 24ε/c² (2(c/r)¹⁴ − (c/r)⁸)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{dist, dot, projection_from_normal, DomainGeometry};
use crate::simulator::ParticleSystemState;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A strictly positive density on `Ω̄` (or on `Γ`), given either as a
/// constant or as a smooth function with its gradient.
#[derive(Clone)]
pub enum DensityField {
    Constant(f64),
    Smooth {
        label: String,
        value: ValueFn,
        gradient: GradFn,
    },
}

impl fmt::Debug for DensityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityField::Constant(c) => write!(f, "Constant({c})"),
            DensityField::Smooth { label, .. } => write!(f, "Smooth({label})"),
        }
    }
}

impl DensityField {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "constant density must be positive, got {c}"
            )));
        }
        Ok(DensityField::Constant(c))
    }

    pub fn smooth(
        label: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        DensityField::Smooth {
            label: label.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    /// `exp(−|x − center|² / width²)`.
    pub fn gaussian(center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gaussian width must be positive, got {width}"
            )));
        }
        let inv = 1.0 / (width * width);
        let c1 = center.clone();
        Ok(Self::smooth(
            format!("gaussian(width={width})"),
            move |x| (-inv * dist(x, &center).powi(2)).exp(),
            move |x, out| {
                let v = (-inv * dist(x, &c1).powi(2)).exp();
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(&c1) {
                    *o = -2.0 * inv * (xi - ci) * v;
                }
            },
        ))
    }

    /// `c · ρ`.
    pub fn scaled(self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("density scale must be positive, got {c}")));
        }
        Ok(match self {
            DensityField::Constant(v) => DensityField::Constant(v * c),
            DensityField::Smooth { label, value, gradient } => DensityField::Smooth {
                label: format!("{c} * {label}"),
                value: Arc::new(move |x| c * value(x)),
                gradient: Arc::new(move |x, out| {
                    gradient(x, out);
                    out.iter_mut().for_each(|o| *o *= c);
                }),
            },
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            DensityField::Constant(c) => *c,
            DensityField::Smooth { value, .. } => value(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DensityField::Constant(_))
    }

    /// Writes `∇ρ/ρ` into `out` and returns `ρ(x)`.
    fn log_grad_into(&self, particle: usize, x: &[f64], out: &mut [f64]) -> Result<f64> {
        match self {
            DensityField::Constant(c) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                Ok(*c)
            }
            DensityField::Smooth { value, gradient, .. } => {
                let v = value(x);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::ZeroDensity { particle, value: v });
                }
                gradient(x, out);
                for o in out.iter_mut() {
                    *o /= v;
                    if !o.is_finite() {
                        return Err(Error::NonFinite("density gradient".into()));
                    }
                }
                Ok(v)
            }
        }
    }
}

#[derive(Clone)]
pub enum PairKind {
    LennardJones { epsilon: f64, c: f64 },
    SmoothBounded {
        label: String,
        value: ValueFn,
        gradient: GradFn,
    },
}

impl fmt::Debug for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairKind::LennardJones { epsilon, c } => {
                write!(f, "LennardJones {{ epsilon: {epsilon}, c: {c} }}")
            }
            PairKind::SmoothBounded { label, .. } => write!(f, "SmoothBounded({label})"),
        }
    }
}

/// Symmetric pair potential `ζ(z) = ζ(−z)`.
///
/// For Lennard-Jones, separations below `r_min` are treated as leaving the
/// admissible configuration space: evaluation fails with
/// [`Error::BelowCutoff`] unless `clamp_at_cutoff` is set, in which case the
/// force coefficient is frozen at its value at `r_min`.
#[derive(Clone, Debug)]
pub struct PairPotential {
    pub kind: PairKind,
    pub r_min: f64,
    pub clamp_at_cutoff: bool,
}

impl PairPotential {
    /// Lennard-Jones with the default cutoff floor `r_min = 0.05 c`.
    pub fn lennard_jones(epsilon: f64, c: f64) -> Result<Self> {
        Self::lennard_jones_with_cutoff(epsilon, c, 0.05 * c)
    }

    pub fn lennard_jones_with_cutoff(epsilon: f64, c: f64, r_min: f64) -> Result<Self> {
        if !(epsilon > 0.0 && c > 0.0 && r_min > 0.0) || !(epsilon * c * r_min).is_finite() {
            return Err(Error::InvalidInput(format!(
                "Lennard-Jones needs positive epsilon, c and r_min (got {epsilon}, {c}, {r_min})"
            )));
        }
        Ok(Self {
            kind: PairKind::LennardJones { epsilon, c },
            r_min,
            clamp_at_cutoff: false,
        })
    }

    pub fn smooth_bounded(
        label: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: PairKind::SmoothBounded {
                label: label.into(),
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            },
            r_min: 0.0,
            clamp_at_cutoff: false,
        }
    }

    /// Soft repulsive bump `ζ(z) = strength · exp(−|z|² / (2 width²))`.
    pub fn gaussian(strength: f64, width: f64) -> Result<Self> {
        if !(strength.is_finite() && width.is_finite() && width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gaussian pair potential needs finite strength and positive width (got {strength}, {width})"
            )));
        }
        let inv = 1.0 / (2.0 * width * width);
        Ok(Self::smooth_bounded(
            format!("gaussian(strength={strength}, width={width})"),
            move |z| strength * (-inv * dot(z, z)).exp(),
            move |z, out| {
                let v = strength * (-inv * dot(z, z)).exp();
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = -2.0 * inv * zi * v;
                }
            },
        ))
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp_at_cutoff = clamp;
        self
    }

    pub fn is_lennard_jones(&self) -> bool {
        matches!(self.kind, PairKind::LennardJones { .. })
    }

    fn check_cutoff(&self, r: f64, pair: Option<(usize, usize)>) -> Result<f64> {
        if r < self.r_min {
            if self.clamp_at_cutoff {
                return Ok(self.r_min);
            }
            return Err(Error::BelowCutoff {
                pair,
                distance: r,
                r_min: self.r_min,
            });
        }
        Ok(r)
    }

    /// `f(r) = 24ε/c² (2(c/r)¹⁴ − (c/r)⁸)`, so that the pair contributes
    /// `f(r)(xⁱ − xʲ)` to `∇_i ln φ`.
    pub fn lj_force_coefficient(&self, r: f64) -> Result<f64> {
        self.lj_force_at(r, None)
    }

    fn lj_force_at(&self, r: f64, pair: Option<(usize, usize)>) -> Result<f64> {
        let PairKind::LennardJones { epsilon, c } = self.kind else {
            return Err(Error::NotApplicable(
                "force coefficient is defined for Lennard-Jones only".into(),
            ));
        };
        let r = self.check_cutoff(r, pair)?;
        let s2 = (c / r) * (c / r);
        let s8 = s2 * s2 * s2 * s2;
        let s14 = s8 * s2 * s2 * s2;
        Ok(24.0 * epsilon / (c * c) * (2.0 * s14 - s8))
    }

    /// `ζ(z)`.
    pub fn value(&self, z: &[f64]) -> Result<f64> {
        self.value_at(z, None)
    }

    fn value_at(&self, z: &[f64], pair: Option<(usize, usize)>) -> Result<f64> {
        match &self.kind {
            PairKind::LennardJones { epsilon, c } => {
                let r = self.check_cutoff(dot(z, z).sqrt(), pair)?;
                let s6 = (c / r).powi(6);
                Ok(4.0 * epsilon * (s6 * s6 - s6))
            }
            PairKind::SmoothBounded { value, .. } => Ok(value(z)),
        }
    }

    /// Adds `−∇ζ(z)` to `out`.
    fn add_neg_gradient(&self, z: &[f64], pair: (usize, usize), out: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        match &self.kind {
            PairKind::LennardJones { .. } => {
                let f = self.lj_force_at(dot(z, z).sqrt(), Some(pair))?;
                for (o, zi) in out.iter_mut().zip(z) {
                    *o += f * zi;
                }
            }
            PairKind::SmoothBounded { gradient, .. } => {
                gradient(z, scratch);
                for (o, g) in out.iter_mut().zip(scratch.iter()) {
                    *o -= g;
                }
            }
        }
        Ok(())
    }
}

/// Per-particle densities, the optional pair potential and the tangential
/// diffusion switch `δ ∈ {0, 1}`.
#[derive(Clone, Debug)]
pub struct DensitySuite {
    alpha: Vec<DensityField>,
    beta: Vec<DensityField>,
    pair: Option<PairPotential>,
    delta: u8,
}

impl DensitySuite {
    pub fn new(
        alpha: Vec<DensityField>,
        beta: Vec<DensityField>,
        pair: Option<PairPotential>,
        delta: u8,
    ) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::InvalidInput(format!(
                "need one alpha and one beta per particle (got {} and {})",
                alpha.len(),
                beta.len()
            )));
        }
        if delta > 1 {
            return Err(Error::InvalidInput(format!("delta must be 0 or 1, got {delta}")));
        }
        Ok(Self {
            alpha,
            beta,
            pair,
            delta,
        })
    }

    /// `α_i ≡ alpha`, `β_i ≡ beta` for all `n` particles, no interaction.
    pub fn constant(n: usize, alpha: f64, beta: f64, delta: u8) -> Result<Self> {
        let a = DensityField::constant(alpha)?;
        let b = DensityField::constant(beta)?;
        Self::new(vec![a; n], vec![b; n], None, delta)
    }

    pub fn uniform(n: usize, delta: u8) -> Result<Self> {
        Self::constant(n, 1.0, 1.0, delta)
    }

    pub fn with_pair(mut self, pair: PairPotential) -> Self {
        self.pair = Some(pair);
        self
    }

    /// Same densities with `φ ≡ 1`.
    pub fn without_pair(&self) -> Self {
        Self {
            pair: None,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn delta(&self) -> u8 {
        self.delta
    }

    pub fn pair(&self) -> Option<&PairPotential> {
        self.pair.as_ref()
    }

    pub fn alpha(&self, i: usize) -> &DensityField {
        &self.alpha[i]
    }

    pub fn beta(&self, i: usize) -> &DensityField {
        &self.beta[i]
    }

    /// `∇α_i(x) / α_i(x)`.
    pub fn alpha_log_grad(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.alpha[i].log_grad_into(i, x, &mut out)?;
        Ok(out)
    }

    /// `P(x)∇β_i(x) / β_i(x)` at a boundary point; requires `δ = 1`.
    pub fn beta_log_surface_grad(&self, i: usize, x: &[f64], g: &DomainGeometry) -> Result<Vec<f64>> {
        if self.delta == 0 {
            return Err(Error::NotApplicable(
                "boundary density gradients enter only with tangential diffusion (delta = 1)".into(),
            ));
        }
        let mut grad = vec![0.0; x.len()];
        self.beta[i].log_grad_into(i, x, &mut grad)?;
        g.surface_gradient(x, &grad)
    }

    /// `α_i(x) / β_i(x)`, the strength of the inward push off `Γ`.
    pub fn stickiness_ratio(&self, i: usize, x: &[f64]) -> Result<f64> {
        let b = self.beta[i].value(x);
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::ZeroDensity { particle: i, value: b });
        }
        let a = self.alpha[i].value(x);
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::ZeroDensity { particle: i, value: a });
        }
        Ok(a / b)
    }

    /// `∇_i ln φ(x)`; the zero vector without a pair potential.
    pub fn phi_log_grad(&self, i: usize, x: &ParticleSystemState) -> Result<Vec<f64>> {
        let d = x.dim();
        let mut out = vec![0.0; d];
        let mut scratch = vec![0.0; 2 * d];
        self.phi_log_grad_into(i, x.positions(), d, &mut out, &mut scratch)?;
        Ok(out)
    }

    pub(crate) fn phi_log_grad_into(
        &self,
        i: usize,
        positions: &[f64],
        d: usize,
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        let Some(pair) = &self.pair else {
            return Ok(());
        };
        let n = positions.len() / d;
        let xi = &positions[i * d..(i + 1) * d];
        let (z, grad) = scratch.split_at_mut(d);
        for j in (0..n).filter(|&j| j != i) {
            let xj = &positions[j * d..(j + 1) * d];
            for k in 0..d {
                z[k] = xi[k] - xj[k];
            }
            pair.add_neg_gradient(z, (i, j), out, grad)?;
        }
        Ok(())
    }

    /// `φ(x) = exp(−Σ_{i<j} ζ(xⁱ − xʲ))`.
    pub fn phi_value(&self, x: &ParticleSystemState) -> Result<f64> {
        let Some(pair) = &self.pair else {
            return Ok(1.0);
        };
        let d = x.dim();
        let mut z = vec![0.0; d];
        let mut energy = 0.0;
        for i in 0..x.n() {
            for j in i + 1..x.n() {
                for k in 0..d {
                    z[k] = x.position(i)[k] - x.position(j)[k];
                }
                energy += pair.value_at(&z, Some((i, j)))?;
            }
        }
        let phi = (-energy).exp();
        if !phi.is_finite() {
            return Err(Error::NonFinite("interaction factor".into()));
        }
        Ok(phi)
    }

    /// The drift block `b_i` for particle `i`.
    ///
    /// Interior: `½(∇α_i/α_i + ∇_i ln φ)`. Boundary:
    /// `½(−(α_i/β_i) n + δ P∇β_i/β_i + δ P∇_i ln φ) − (δ/2) κ n`, where the
    /// last term is the Itô correction of the tangential noise `P ∘ dB`.
    /// With `include_pair = false` the interaction is dropped (`φ ≡ 1`).
    pub(crate) fn drift_block_into(
        &self,
        g: &DomainGeometry,
        positions: &[f64],
        on_boundary: bool,
        i: usize,
        include_pair: bool,
        work: &mut DriftWork,
        out: &mut [f64],
    ) -> Result<()> {
        let d = g.dimension();
        let xi = &positions[i * d..(i + 1) * d];
        if include_pair {
            self.phi_log_grad_into(i, positions, d, &mut work.phi, &mut work.scratch)?;
        } else {
            work.phi.iter_mut().for_each(|v| *v = 0.0);
        }
        if !on_boundary {
            self.alpha[i].log_grad_into(i, xi, out)?;
            for (o, p) in out.iter_mut().zip(&work.phi) {
                *o = 0.5 * (*o + p);
            }
            return Ok(());
        }
        g.normal_field_into(xi, &mut work.normal)?;
        let ratio = self.stickiness_ratio(i, xi)?;
        for (o, n) in out.iter_mut().zip(&work.normal) {
            *o = -0.5 * ratio * n;
        }
        if self.delta == 1 {
            self.beta[i].log_grad_into(i, xi, &mut work.beta)?;
            let kappa = g.curvature_field(xi)?;
            for k in 0..d {
                work.beta[k] += work.phi[k];
            }
            let s = dot(&work.normal, &work.beta);
            for k in 0..d {
                let n = work.normal[k];
                out[k] += 0.5 * (work.beta[k] - s * n) - 0.5 * kappa * n;
            }
        }
        Ok(())
    }

    /// Concatenated drift `b = (b_1, …, b_N)` at a classified state.
    pub fn assemble_drift(&self, g: &DomainGeometry, x: &ParticleSystemState) -> Result<Vec<f64>> {
        self.assemble_drift_with(g, x, true)
    }

    pub(crate) fn assemble_drift_with(
        &self,
        g: &DomainGeometry,
        x: &ParticleSystemState,
        include_pair: bool,
    ) -> Result<Vec<f64>> {
        let d = x.dim();
        let mut b = vec![0.0; x.n() * d];
        let mut work = DriftWork::new(d);
        for i in 0..x.n() {
            self.drift_block_into(
                g,
                x.positions(),
                x.on_boundary(i),
                i,
                include_pair,
                &mut work,
                &mut b[i * d..(i + 1) * d],
            )?;
        }
        Ok(b)
    }

    /// Block-diagonal `A`: identity for interior particles, `δ P(xⁱ)` for
    /// boundary particles.
    pub fn assemble_diffusion(&self, g: &DomainGeometry, x: &ParticleSystemState) -> Result<DMatrix<f64>> {
        let d = x.dim();
        let nd = x.n() * d;
        let mut a = DMatrix::<f64>::zeros(nd, nd);
        for i in 0..x.n() {
            let block = if !x.on_boundary(i) {
                DMatrix::identity(d, d)
            } else if self.delta == 1 {
                projection_from_normal(&g.normal_field(x.position(i))?)
            } else {
                DMatrix::zeros(d, d)
            };
            a.view_mut((i * d, i * d), (d, d)).copy_from(&block);
        }
        Ok(a)
    }
}

/// Scratch buffers for drift evaluation.
#[derive(Clone, Debug)]
pub(crate) struct DriftWork {
    phi: Vec<f64>,
    beta: Vec<f64>,
    normal: Vec<f64>,
    scratch: Vec<f64>,
}

impl DriftWork {
    pub(crate) fn new(d: usize) -> Self {
        Self {
            phi: vec![0.0; d],
            beta: vec![0.0; d],
            normal: vec![0.0; d],
            scratch: vec![0.0; 2 * d],
        }
    }
}
