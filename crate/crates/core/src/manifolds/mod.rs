//! Embedded submanifolds of a matrix space with the Frobenius metric.
//!
//! Every ambient element is a `DMatrix<f64>`: vectors are n×1, frames n×p,
//! projector-form Grassmann points n×n. A manifold supplies its tangent
//! projection and the derivative of that projection field,
//! `dproj(x, u, a) = D_u[y ↦ Proj_{T_y}](a)`. That single derivative gives
//! both the second fundamental form (`a` tangent, result normal) and the
//! Weingarten map (`a` normal, result tangent) used by the generic Hessian:
//!
//! ```text
//! Hess f(x)[v] = Proj(∇²f(x)[v]) + dproj(x, v, ∇f(x) − Proj(∇f(x)))
//! ```
//!
//! This is the Hessian of the canonical extension Ḡ(y) = Proj_{T_y}(∇f(y)).
//! Instances also expose an independent closed form of II for cross-checks.

mod fixed_rank;
mod flat;
mod grassmann;
mod level_set;
mod sphere;
mod stiefel;

pub use fixed_rank::FixedRank;
pub use flat::Flat;
pub use grassmann::{exp_frame, Grassmann};
pub use level_set::{LevelSet, LevelSetSpec};
pub use sphere::Sphere;
pub use stiefel::Stiefel;

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::numeric::{self, tol};
use crate::objectives::Objective;

/// Retraction families. Each manifold supports a subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetractionKind {
    /// QR-type: normalization on the sphere, Q-factor on Stiefel, Q-factor of
    /// the frame on Grassmann, truncated SVD on fixed rank.
    Qr,
    /// Geodesic: great circles on the sphere, SVD cos/sin on Grassmann.
    Exponential,
    /// Nearest-point projection (level sets).
    Projection,
}

/// Auxiliary factorization cached alongside the ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Aux {
    None,
    /// Orthonormal basis of range(P) for projector-form points.
    Frame(DMatrix<f64>),
    /// Thin SVD factors X = U diag(s) Vᵀ.
    Svd { u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64> },
}

/// A point on some manifold, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    ambient: DMatrix<f64>,
    aux: Aux,
}

impl Point {
    pub(crate) fn new(ambient: DMatrix<f64>, aux: Aux) -> Self {
        Point { ambient, aux }
    }

    pub fn ambient(&self) -> &DMatrix<f64> {
        &self.ambient
    }

    pub fn aux(&self) -> &Aux {
        &self.aux
    }

    /// Cached orthonormal frame, if any.
    pub fn frame(&self) -> Option<&DMatrix<f64>> {
        match &self.aux {
            Aux::Frame(y) => Some(y),
            Aux::Svd { u, .. } => Some(u),
            Aux::None => None,
        }
    }
}

/// Embedded submanifold with the induced Frobenius metric.
pub trait Manifold: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Shape of the ambient matrix space.
    fn ambient_shape(&self) -> (usize, usize);

    fn ambient_dim(&self) -> usize {
        let (r, c) = self.ambient_shape();
        r * c
    }

    /// Intrinsic dimension d.
    fn dim(&self) -> usize;

    /// Builds a point from ambient coordinates, computing any cached factors.
    /// Fails with `InfeasiblePoint` beyond [`tol::FEASIBILITY`].
    fn point(&self, ambient: DMatrix<f64>) -> Result<Point>;

    fn feasibility_residual(&self, x: &Point) -> f64;

    /// Proj_{T_x M}(a). `x` is assumed feasible.
    fn project(&self, x: &Point, a: &DMatrix<f64>) -> DMatrix<f64>;

    /// Directional derivative of the projection field along tangent `u`, applied to `a`.
    fn dproj(&self, x: &Point, u: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64>;

    /// Closed form of II_x(u, v) for tangent u, v.
    fn ii_closed(&self, x: &Point, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64>;

    fn default_retraction(&self) -> RetractionKind;

    fn retract_unchecked(&self, x: &Point, v: &DMatrix<f64>, kind: RetractionKind) -> Result<Point>;

    /// Frobenius-orthonormal basis of T_x M (exactly `dim()` elements).
    fn tangent_basis(&self, x: &Point) -> Result<Vec<DMatrix<f64>>> {
        generic_tangent_basis(self, x)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Result<Point>;

    fn random_tangent(&self, x: &Point, rng: &mut dyn RngCore) -> DMatrix<f64> {
        let (r, c) = self.ambient_shape();
        self.project(x, &crate::random::gaussian(rng, r, c))
    }

    fn check_feasible(&self, x: &Point) -> Result<()> {
        let r = self.feasibility_residual(x);
        if r.is_finite() && r <= tol::FEASIBILITY {
            Ok(())
        } else {
            Err(Error::InfeasiblePoint(r))
        }
    }
}

/// Tangency residual ‖Proj(v) − v‖ / (1 + ‖v‖).
pub fn tangency_residual<M: Manifold + ?Sized>(m: &M, x: &Point, v: &DMatrix<f64>) -> f64 {
    (m.project(x, v) - v).norm() / (1.0 + v.norm())
}

pub(crate) fn check_tangent<M: Manifold + ?Sized>(m: &M, x: &Point, v: &DMatrix<f64>) -> Result<()> {
    if v.shape() != m.ambient_shape() {
        return Err(Error::invalid(format!("expected ambient shape {:?}, got {:?}", m.ambient_shape(), v.shape())));
    }
    let r = tangency_residual(m, x, v);
    if r <= tol::TANGENCY_INPUT {
        Ok(())
    } else {
        Err(Error::NotTangent(r))
    }
}

fn check_shape<M: Manifold + ?Sized>(m: &M, a: &DMatrix<f64>) -> Result<()> {
    if a.shape() != m.ambient_shape() {
        return Err(Error::invalid(format!("expected ambient shape {:?}, got {:?}", m.ambient_shape(), a.shape())));
    }
    Ok(())
}

/// Orthogonal projection onto T_x M.
pub fn tangent_project<M: Manifold + ?Sized>(m: &M, x: &Point, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.check_feasible(x)?;
    check_shape(m, a)?;
    Ok(m.project(x, a))
}

/// II_x(u, v) in closed form; `u`, `v` must be tangent.
pub fn second_fundamental_form<M: Manifold + ?Sized>(
    m: &M,
    x: &Point,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    m.check_feasible(x)?;
    check_tangent(m, x, u)?;
    check_tangent(m, x, v)?;
    Ok(m.ii_closed(x, u, v))
}

/// Weingarten map: the tangent vector D_u Proj(w) for normal `w`.
pub fn weingarten<M: Manifold + ?Sized>(m: &M, x: &Point, u: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    m.dproj(x, u, w)
}

pub fn retract<M: Manifold + ?Sized>(m: &M, x: &Point, v: &DMatrix<f64>, kind: RetractionKind) -> Result<Point> {
    m.check_feasible(x)?;
    check_tangent(m, x, v)?;
    m.retract_unchecked(x, v, kind)
}

/// grad_M f(x) = Proj(∇f(x)).
pub fn riemannian_gradient<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, x: &Point) -> DMatrix<f64> {
    m.project(x, &obj.egrad(x.ambient()))
}

/// Riemannian Hessian-vector product; prefers the objective's closed form.
pub fn riemannian_hessian_vec<M: Manifold + ?Sized>(
    m: &M,
    obj: &dyn Objective,
    x: &Point,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if let Some(h) = obj.rhess_override(x, v) {
        return Ok(h);
    }
    riemannian_hessian_vec_generic(m, obj, x, v)
}

/// Generic route: Proj(∇²f[v]) + Weingarten(v, normal part of ∇f).
pub fn riemannian_hessian_vec_generic<M: Manifold + ?Sized>(
    m: &M,
    obj: &dyn Objective,
    x: &Point,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let eh = obj.ehess_vec(x.ambient(), v).ok_or(Error::MissingCapability("Euclidean Hessian-vector product"))?;
    let g = obj.egrad(x.ambient());
    let gn = &g - m.project(x, &g);
    Ok(m.project(x, &eh) + m.dproj(x, v, &gn))
}

/// Matrix of the projection operator on vec(ambient). Dense: N×N.
pub fn projector_matrix<M: Manifold + ?Sized>(m: &M, x: &Point) -> Result<DMatrix<f64>> {
    let (r, c) = m.ambient_shape();
    let n = r * c;
    if n > tol::DENSE_AMBIENT_MAX {
        return Err(Error::invalid(format!("ambient dimension {n} too large to materialize")));
    }
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DMatrix::zeros(r, c);
        e[j] = 1.0;
        let pj = m.project(x, &e);
        out.set_column(j, &numeric::vec(&pj));
    }
    Ok(numeric::sym(&out))
}

/// Fallback tangent basis from the eigenvectors of the dense projector.
pub fn generic_tangent_basis<M: Manifold + ?Sized>(m: &M, x: &Point) -> Result<Vec<DMatrix<f64>>> {
    let (r, c) = m.ambient_shape();
    let p = projector_matrix(m, x)?;
    let (vals, vecs) = numeric::sym_eig_dense(&p)?;
    let mut out = Vec::with_capacity(m.dim());
    for j in (0..vals.len()).rev() {
        if vals[j] > 0.5 {
            out.push(numeric::unvec(vecs.matrix().column(j).as_slice(), r, c));
        }
    }
    if out.len() != m.dim() {
        return Err(Error::invalid(format!("tangent space has dimension {} instead of {}", out.len(), m.dim())));
    }
    Ok(out)
}

/// Dense d×d matrix of the Riemannian Hessian in the given orthonormal basis, symmetrized.
pub fn hessian_in_basis<M: Manifold + ?Sized>(
    m: &M,
    obj: &dyn Objective,
    x: &Point,
    basis: &[DMatrix<f64>],
) -> Result<DMatrix<f64>> {
    let d = basis.len();
    let images: Vec<DMatrix<f64>> = basis.iter().map(|b| riemannian_hessian_vec(m, obj, x, b)).collect::<Result<_>>()?;
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            h[(i, j)] = basis[i].dot(&images[j]);
        }
    }
    Ok(numeric::sym(&h))
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Second-order central difference of the projection field along the retraction curve.
    pub fn fd_dproj<M: Manifold + ?Sized>(m: &M, x: &Point, u: &DMatrix<f64>, a: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
        let kind = m.default_retraction();
        let xp = m.retract_unchecked(x, &(u * h), kind).unwrap();
        let xm = m.retract_unchecked(x, &(u * -h), kind).unwrap();
        (m.project(&xp, a) - m.project(&xm, a)) / (2.0 * h)
    }
}
