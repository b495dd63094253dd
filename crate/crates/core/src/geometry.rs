//! Bounded domains and the boundary geometry the dynamics need.
//!
//! Two domain kinds are supported: an interval `(a, b)` in one dimension and
//! a Euclidean ball in `d ≥ 2` dimensions. Both give closed-form outward
//! normals, tangential projections `P = E − n nᵗ`, mean curvature and
//! measures.
//!
//! Sign conventions: `n` is the *outward* unit normal and the mean curvature
//! is `κ = div_Γ n`, so a sphere of radius `R` in `ℝ^d` has `κ = (d−1)/R > 0`
//! and the Itô correction of tangential Brownian motion is `−½κn`.
//!
//! Off the boundary the normal is extended radially (ball) or by the nearer
//! endpoint (interval); the `*_field` methods evaluate that extension.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for "is on the boundary" decisions, in length units.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Interval { a: f64, b: f64 },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    kind: DomainKind,
    dim: usize,
}

impl DomainGeometry {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!(
                "interval requires finite a < b, got ({a}, {b})"
            )));
        }
        Ok(Self {
            kind: DomainKind::Interval { a, b },
            dim: 1,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::InvalidInput(
                "ball geometry requires dimension >= 2; use an interval in 1-d".into(),
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("ball center must be finite".into()));
        }
        let dim = center.len();
        Ok(Self {
            kind: DomainKind::Ball { center, radius },
            dim,
        })
    }

    /// Ball of the given radius centered at the origin of `ℝ^dim`.
    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.kind, DomainKind::Ball { .. })
    }

    /// Negative inside, zero on `Γ`, positive outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            DomainKind::Interval { a, b } => (a - x[0]).max(x[0] - b),
            DomainKind::Ball { center, radius } => dist(x, center) - radius,
        }
    }

    pub fn is_on_boundary(&self, x: &[f64]) -> bool {
        self.signed_distance(x).abs() <= BOUNDARY_TOL
    }

    fn require_boundary(&self, x: &[f64]) -> Result<()> {
        let distance = self.signed_distance(x);
        if distance.abs() > BOUNDARY_TOL {
            return Err(Error::NotOnBoundary { distance });
        }
        Ok(())
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_boundary(x)?;
        self.normal_field(x)
    }

    /// Extension of the outward normal to a neighbourhood of `Γ`.
    pub fn normal_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut n = vec![0.0; self.dim];
        self.normal_field_into(x, &mut n)?;
        Ok(n)
    }

    pub(crate) fn normal_field_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            DomainKind::Interval { a, b } => {
                out[0] = if x[0] - a <= b - x[0] { -1.0 } else { 1.0 };
            }
            DomainKind::Ball { center, .. } => {
                let r = dist(x, center);
                if !(r > 0.0) {
                    return Err(Error::DegeneratePoint(
                        "normal direction is undefined at the ball center".into(),
                    ));
                }
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = (xi - ci) / r;
                }
            }
        }
        Ok(())
    }

    /// Tangential projection `P(x) = E − n(x)n(x)ᵗ` at a boundary point.
    pub fn projection_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.require_boundary(x)?;
        self.projection_field(x)
    }

    /// `E − n nᵗ` with the extended normal field, defined off `Γ` too.
    pub fn projection_field(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.normal_field(x)?;
        Ok(projection_from_normal(&n))
    }

    /// Mean curvature `κ = div_Γ n`; `(d−1)/R` on a sphere.
    pub fn mean_curvature(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            DomainKind::Interval { .. } => Err(Error::UnsupportedGeometry {
                op: "mean_curvature",
                geometry: "interval",
            }),
            DomainKind::Ball { radius, .. } => {
                self.require_boundary(x)?;
                Ok((self.dim as f64 - 1.0) / radius)
            }
        }
    }

    /// Curvature of the level set through `x` of the extended normal field.
    /// Equals [`mean_curvature`](Self::mean_curvature) on `Γ`.
    pub(crate) fn curvature_field(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            DomainKind::Interval { .. } => Err(Error::UnsupportedGeometry {
                op: "mean_curvature",
                geometry: "interval",
            }),
            DomainKind::Ball { center, .. } => {
                let r = dist(x, center);
                if !(r > 0.0) {
                    return Err(Error::DegeneratePoint("curvature at the ball center".into()));
                }
                Ok((self.dim as f64 - 1.0) / r)
            }
        }
    }

    /// `∇_Γ f = P ∇f` at a boundary point.
    pub fn surface_gradient(&self, x: &[f64], grad_f: &[f64]) -> Result<Vec<f64>> {
        self.require_boundary(x)?;
        let n = self.normal_field(x)?;
        Ok(project_tangent(&n, grad_f))
    }

    /// Laplace–Beltrami `Δ_Γ f = Tr(P ∇(P ∇f))` from the gradient and Hessian
    /// of `f` at a boundary point.
    ///
    /// The Jacobian of `P∇f` is assembled with the analytic derivative of the
    /// radially extended projection field,
    /// `∂_k P_jl = −(P_jk n_l + n_j P_lk)/r`.
    pub fn surface_laplacian(
        &self,
        x: &[f64],
        grad_f: &[f64],
        hess_f: &DMatrix<f64>,
    ) -> Result<f64> {
        let center = match &self.kind {
            DomainKind::Interval { .. } => {
                return Err(Error::UnsupportedGeometry {
                    op: "surface_laplacian",
                    geometry: "interval",
                })
            }
            DomainKind::Ball { center, .. } => center,
        };
        self.require_boundary(x)?;
        let d = self.dim;
        let n = self.normal_field(x)?;
        let p = projection_from_normal(&n);
        let r = dist(x, center);

        // jac[(j, k)] = ∂_k (P ∇f)_j
        let mut jac = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    let dp = -(p[(j, k)] * n[l] + n[j] * p[(l, k)]) / r;
                    acc += dp * grad_f[l] + p[(j, l)] * hess_f[(l, k)];
                }
                jac[(j, k)] = acc;
            }
        }
        Ok((&p * &jac).trace())
    }

    /// Nearest point of `Γ`. For the interval a midpoint tie resolves to `a`.
    pub fn closest_boundary_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.closest_boundary_point_into(x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn closest_boundary_point_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            DomainKind::Interval { a, b } => {
                out[0] = if x[0] - a <= b - x[0] { *a } else { *b };
            }
            DomainKind::Ball { center, radius } => {
                let r = dist(x, center);
                if !(r > 0.0) {
                    return Err(Error::DegeneratePoint(
                        "the ball center has no unique closest boundary point".into(),
                    ));
                }
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = ci + radius * (xi - ci) / r;
                }
            }
        }
        Ok(())
    }

    /// Lebesgue volume of `Ω` and surface measure of `Γ`. The two endpoints
    /// of an interval carry unit point masses.
    pub fn measures(&self) -> (f64, f64) {
        match &self.kind {
            DomainKind::Interval { a, b } => (b - a, 2.0),
            DomainKind::Ball { radius, .. } => {
                let d = self.dim as f64;
                let unit = std::f64::consts::PI.powf(d / 2.0)
                    / statrs::function::gamma::gamma(d / 2.0 + 1.0);
                let volume = unit * radius.powi(self.dim as i32);
                (volume, d * volume / radius)
            }
        }
    }

    /// Length scale used for layouts and sanity checks.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::Interval { a, b } => b - a,
            DomainKind::Ball { radius, .. } => 2.0 * radius,
        }
    }
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn projection_from_normal(n: &[f64]) -> DMatrix<f64> {
    let d = n.len();
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - n[i] * n[j])
}

/// `v − (n·v) n`.
pub(crate) fn project_tangent(n: &[f64], v: &[f64]) -> Vec<f64> {
    let s = dot(n, v);
    v.iter().zip(n).map(|(vi, ni)| vi - s * ni).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit_ball(d: usize) -> DomainGeometry {
        DomainGeometry::centered_ball(d, 1.0).unwrap()
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(DomainGeometry::interval(1.0, 1.0).is_err());
        assert!(DomainGeometry::ball(vec![0.0, 0.0], 0.0).is_err());
        assert!(DomainGeometry::ball(vec![0.0], 1.0).is_err());
    }

    #[test]
    fn signed_distance_examples() {
        assert_eq!(unit_ball(2).signed_distance(&[0.0, 0.0]), -1.0);
        assert_eq!(unit_ball(2).signed_distance(&[1.0, 0.0]), 0.0);
        let iv = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert_eq!(iv.signed_distance(&[0.25]), -0.25);
        assert_eq!(iv.signed_distance(&[1.5]), 0.5);
    }

    #[test]
    fn outward_normal_examples() {
        assert_eq!(unit_ball(2).outward_normal(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        let iv = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert_eq!(iv.outward_normal(&[0.0]).unwrap(), vec![-1.0]);
        assert_eq!(iv.outward_normal(&[1.0]).unwrap(), vec![1.0]);
        let b2 = DomainGeometry::centered_ball(3, 2.0).unwrap();
        assert_eq!(b2.outward_normal(&[2.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            unit_ball(2).outward_normal(&[0.5, 0.0]),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let p = unit_ball(2).projection_matrix(&[1.0, 0.0]).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        let p3 = unit_ball(3).projection_matrix(&[0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(p3.trace(), 2.0, epsilon = 1e-15);
        let x = [0.6, 0.8];
        let n = unit_ball(2).outward_normal(&x).unwrap();
        let pn = unit_ball(2).projection_matrix(&x).unwrap() * nalgebra::DVector::from_vec(n);
        assert!(pn.norm() < 1e-15);
    }

    #[test]
    fn curvature_values_and_errors() {
        assert_eq!(unit_ball(2).mean_curvature(&[1.0, 0.0]).unwrap(), 1.0);
        let b = DomainGeometry::centered_ball(3, 2.0).unwrap();
        assert_eq!(b.mean_curvature(&[0.0, 2.0, 0.0]).unwrap(), 1.0);
        let iv = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            iv.mean_curvature(&[0.0]),
            Err(Error::UnsupportedGeometry { .. })
        ));
    }

    /// Central differences of the radial normal field: `Tr(P ∇n)`.
    fn fd_div_normal(g: &DomainGeometry, x: &[f64], h: f64) -> f64 {
        let d = x.len();
        let p = g.projection_matrix(x).unwrap();
        let mut jac = DMatrix::<f64>::zeros(d, d);
        for k in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let np = g.normal_field(&xp).unwrap();
            let nm = g.normal_field(&xm).unwrap();
            for j in 0..d {
                jac[(j, k)] = (np[j] - nm[j]) / (2.0 * h);
            }
        }
        (p * jac).trace()
    }

    #[test]
    fn curvature_matches_finite_difference_divergence() {
        let g = unit_ball(3);
        let s = (1.0f64 / 3.0).sqrt();
        for x in [[1.0, 0.0, 0.0], [s, s, s], [0.0, -0.6, 0.8]] {
            let fd = fd_div_normal(&g, &x, 1e-5);
            assert_abs_diff_eq!(fd, g.mean_curvature(&x).unwrap(), epsilon = 1e-4);
        }
        let g2 = unit_ball(2);
        let x = [0.6, -0.8];
        assert_abs_diff_eq!(fd_div_normal(&g2, &x, 1e-5), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn surface_gradient_examples() {
        let g = unit_ball(2);
        assert_eq!(g.surface_gradient(&[1.0, 0.0], &[3.0, 4.0]).unwrap(), vec![0.0, 4.0]);
        let x = [0.6, 0.8];
        let normal_part = g.surface_gradient(&x, &[1.2, 1.6]).unwrap();
        assert!(normal_part.iter().all(|v| v.abs() < 1e-15));
        let tangent = [-0.8, 0.6];
        let out = g.surface_gradient(&x, &tangent).unwrap();
        assert_abs_diff_eq!(out[0], tangent[0], epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], tangent[1], epsilon = 1e-15);
    }

    #[test]
    fn surface_laplacian_of_constant_is_zero() {
        let g = unit_ball(3);
        let h = DMatrix::zeros(3, 3);
        let v = g.surface_laplacian(&[0.0, 1.0, 0.0], &[0.0; 3], &h).unwrap();
        assert_eq!(v, 0.0);
        let iv = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert!(iv
            .surface_laplacian(&[0.0], &[1.0], &DMatrix::zeros(1, 1))
            .is_err());
    }

    #[test]
    fn surface_laplacian_of_linear_function_matches_circle_parametrization() {
        // f(x) = x_k restricted to the unit circle is cos θ or sin θ; the
        // Laplace–Beltrami operator is d²/dθ² in arc length.
        let g = unit_ball(2);
        let h = 1e-4;
        for (k, theta) in [(0usize, 0.0f64), (1, 0.0), (0, 1.1), (1, -2.3)] {
            let f = |t: f64| if k == 0 { t.cos() } else { t.sin() };
            let fd = (f(theta + h) - 2.0 * f(theta) + f(theta - h)) / (h * h);
            let x = [theta.cos(), theta.sin()];
            let mut grad = [0.0, 0.0];
            grad[k] = 1.0;
            let v = g.surface_laplacian(&x, &grad, &DMatrix::zeros(2, 2)).unwrap();
            assert_abs_diff_eq!(v, fd, epsilon = 1e-6);
        }
    }

    /// Laplace–Beltrami on the unit 2-sphere in spherical coordinates,
    /// `(1/sinθ)∂θ(sinθ ∂θ u) + (1/sin²θ)∂φφ u`, by central differences.
    fn spherical_laplacian_fd(f: &dyn Fn(&[f64]) -> f64, theta: f64, phi: f64, h: f64) -> f64 {
        let u = |t: f64, p: f64| f(&[t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]);
        let s = |t: f64| t.sin();
        let d_theta = (s(theta + h / 2.0) * (u(theta + h, phi) - u(theta, phi))
            - s(theta - h / 2.0) * (u(theta, phi) - u(theta - h, phi)))
            / (h * h * s(theta));
        let d_phi = (u(theta, phi + h) - 2.0 * u(theta, phi) + u(theta, phi - h))
            / (h * h * s(theta).powi(2));
        d_theta + d_phi
    }

    #[test]
    fn surface_laplacian_matches_spherical_coordinates() {
        let g = unit_ball(3);
        // |x|² is constant on the sphere.
        let radius2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        // A non-trivial quadratic: x1 x2 + x3² + 0.5 x1.
        let quad = |x: &[f64]| x[0] * x[1] + x[2] * x[2] + 0.5 * x[0];
        let quad_grad = |x: &[f64]| vec![x[1] + 0.5, x[0], 2.0 * x[2]];
        let quad_hess = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        for (theta, phi) in [(0.7, 0.3), (1.2, -2.0), (2.5, 1.0)] {
            let x = [
                f64::sin(theta) * f64::cos(phi),
                f64::sin(theta) * f64::sin(phi),
                f64::cos(theta),
            ];
            let r2 = g
                .surface_laplacian(&x, &[2.0 * x[0], 2.0 * x[1], 2.0 * x[2]], &(DMatrix::identity(3, 3) * 2.0))
                .unwrap();
            assert_abs_diff_eq!(r2, spherical_laplacian_fd(&radius2, theta, phi, 1e-4), epsilon = 1e-4);
            let q = g.surface_laplacian(&x, &quad_grad(&x), &quad_hess).unwrap();
            assert_abs_diff_eq!(q, spherical_laplacian_fd(&quad, theta, phi, 1e-4), epsilon = 1e-4);
        }
    }

    #[test]
    fn closest_boundary_point_examples() {
        let g = unit_ball(2);
        assert_eq!(g.closest_boundary_point(&[0.5, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(g.closest_boundary_point(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(
            g.closest_boundary_point(&[0.0, 0.0]),
            Err(Error::DegeneratePoint(_))
        ));
        let iv = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert_eq!(iv.closest_boundary_point(&[0.3]).unwrap(), vec![0.0]);
        assert_eq!(iv.closest_boundary_point(&[0.8]).unwrap(), vec![1.0]);
    }

    #[test]
    fn measures_closed_forms() {
        let (v, s) = unit_ball(2).measures();
        assert_abs_diff_eq!(v, PI, epsilon = 1e-14);
        assert_abs_diff_eq!(s, 2.0 * PI, epsilon = 1e-14);
        assert_eq!(DomainGeometry::interval(0.0, 1.0).unwrap().measures(), (1.0, 2.0));
        let (v, s) = DomainGeometry::centered_ball(3, 2.0).unwrap().measures();
        assert_abs_diff_eq!(v, 32.0 * PI / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 16.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn signed_distance_gradient_is_the_normal() {
        let g = DomainGeometry::ball(vec![0.3, -0.2, 0.1], 1.5).unwrap();
        let h = 1e-6;
        let x = g.closest_boundary_point(&[1.0, 1.0, -0.4]).unwrap();
        let n = g.outward_normal(&x).unwrap();
        for k in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (g.signed_distance(&xp) - g.signed_distance(&xm)) / (2.0 * h);
            assert_abs_diff_eq!(fd, n[k], epsilon = 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn direction(d: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-1.0f64..1.0, d)
                .prop_filter("non-degenerate", |v| v.iter().map(|a| a * a).sum::<f64>() > 1e-3)
        }

        proptest! {
            #[test]
            fn projection_identities(dir in (2usize..=4).prop_flat_map(direction), radius in 0.1f64..5.0) {
                let d = dir.len();
                let center: Vec<f64> = (0..d).map(|i| 0.1 * i as f64).collect();
                let g = DomainGeometry::ball(center.clone(), radius).unwrap();
                let probe: Vec<f64> = center.iter().zip(&dir).map(|(c, v)| c + v).collect();
                let x = g.closest_boundary_point(&probe).unwrap();
                prop_assert!(g.signed_distance(&x).abs() <= 1e-12 * radius.max(1.0));
                let p = g.projection_matrix(&x).unwrap();
                let n = nalgebra::DVector::from_vec(g.outward_normal(&x).unwrap());
                prop_assert!((&p - p.transpose()).abs().max() <= 1e-12);
                prop_assert!((&p * &p - &p).abs().max() <= 1e-12);
                prop_assert!((&p * &n).abs().max() <= 1e-12);
                prop_assert!((p.trace() - (d as f64 - 1.0)).abs() <= 1e-12);
                let again = g.closest_boundary_point(&x).unwrap();
                prop_assert!(dist(&again, &x) <= 1e-12 * radius.max(1.0));
            }

            #[test]
            fn surface_gradient_is_tangent(dir in direction(3), grad in proptest::collection::vec(-10.0f64..10.0, 3)) {
                let g = unit_ball(3);
                let x = g.closest_boundary_point(&dir).unwrap();
                let n = g.outward_normal(&x).unwrap();
                let sg = g.surface_gradient(&x, &grad).unwrap();
                prop_assert!(dot(&sg, &n).abs() <= 1e-12);
            }
        }
    }
}
