//! Grassmann manifold Gr_p(ℝⁿ) in projector form.
//!
//! A point is a rank-p orthogonal projector P, stored together with an
//! orthonormal frame Y (P = YYᵀ) so that products with P cost O(n²p).
//! Tangent vectors are symmetric Γ with ΓP + PΓ = Γ; the projection is
//! Proj_P(A) = [P,[P,sym A]].

use nalgebra::DMatrix;
use rand::RngCore;

use super::{Aux, Manifold, Point, RetractionKind};
use crate::error::{Error, Result};
use crate::numeric::{self, sym, tol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grassmann {
    pub n: usize,
    pub p: usize,
}

impl Grassmann {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p >= n {
            return Err(Error::invalid(format!("Grassmann needs 1 <= p < n, got n={n}, p={p}")));
        }
        Ok(Grassmann { n, p })
    }

    /// Point P = YYᵀ from an orthonormal n×p frame.
    pub fn point_from_frame(&self, y: DMatrix<f64>) -> Result<Point> {
        if y.shape() != (self.n, self.p) {
            return Err(Error::invalid("Grassmann frame must be n×p"));
        }
        let r = numeric::orthonormality_residual(&y);
        if r > tol::FEASIBILITY {
            return Err(Error::InfeasiblePoint(r));
        }
        Ok(frame_point(y))
    }

    /// Horizontal lift ΓY of a tangent vector to the cached frame.
    pub fn lift(&self, x: &Point, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        gamma * frame_of(x)
    }
}

fn frame_point(y: DMatrix<f64>) -> Point {
    let p = sym(&(&y * y.transpose()));
    Point::new(p, Aux::Frame(y))
}

fn frame_of(x: &Point) -> &DMatrix<f64> {
    x.frame().expect("Grassmann points always carry a frame")
}

/// Geodesic of the Grassmannian of col-spaces, in frame form.
///
/// `v` is orthonormal n×k; `lift` is a horizontal n×k direction (vᵀ·lift = 0).
/// Returns VU cos(Σ)Uᵀ + Q sin(Σ)Uᵀ + V(I − UUᵀ) with lift = QΣUᵀ,
/// re-orthonormalized.
pub fn exp_frame(v: &DMatrix<f64>, lift: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = numeric::thin_svd(lift)?;
    if svd.rank() == 0 {
        return Ok(v.clone());
    }
    let k = v.ncols();
    let cos = DMatrix::from_diagonal(&svd.sigma.map(f64::cos));
    let sin = DMatrix::from_diagonal(&svd.sigma.map(f64::sin));
    let ut = svd.u.transpose();
    let inner = &svd.u * cos * &ut + DMatrix::<f64>::identity(k, k) - &svd.u * &ut;
    let out = v * inner + &svd.q * sin * ut;
    numeric::thin_qr(&out)
        .map(numeric::Frame::into_inner)
        .map_err(|_| Error::RetractionDomain("frame exponential lost rank".into()))
}

impl Manifold for Grassmann {
    fn name(&self) -> &'static str {
        "grassmann"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    fn dim(&self) -> usize {
        self.p * (self.n - self.p)
    }

    fn point(&self, ambient: DMatrix<f64>) -> Result<Point> {
        if ambient.shape() != (self.n, self.n) {
            return Err(Error::invalid("Grassmann point must be n×n"));
        }
        let y = numeric::top_eigenvectors(&ambient, self.p)?.into_inner();
        let x = Point::new(ambient, Aux::Frame(y));
        self.check_feasible(&x)?;
        Ok(x)
    }

    fn feasibility_residual(&self, x: &Point) -> f64 {
        let p = x.ambient();
        let mut r = (p - p.transpose()).norm() + (p * p - p).norm() + (p.trace() - self.p as f64).abs();
        if let Some(y) = x.frame() {
            r += (y * y.transpose() - p).norm();
        }
        r
    }

    fn project(&self, x: &Point, a: &DMatrix<f64>) -> DMatrix<f64> {
        let y = frame_of(x);
        let s = sym(a);
        let yts = y.transpose() * &s;
        let ps = y * &yts;
        let psp = y * (&yts * y) * y.transpose();
        &ps + ps.transpose() - psp * 2.0
    }

    fn dproj(&self, x: &Point, u: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let p = x.ambient();
        let s = sym(a);
        let us = u * &s;
        let us_p = &us * p;
        &us + us.transpose() - (&us_p + us_p.transpose()) * 2.0
    }

    fn ii_closed(&self, x: &Point, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        numeric::comm(u, &numeric::comm(x.ambient(), v))
    }

    fn default_retraction(&self) -> RetractionKind {
        RetractionKind::Exponential
    }

    fn retract_unchecked(&self, x: &Point, v: &DMatrix<f64>, kind: RetractionKind) -> Result<Point> {
        let y = frame_of(x);
        let lift = v * y;
        let y_new = match kind {
            RetractionKind::Exponential => exp_frame(y, &lift)?,
            RetractionKind::Qr => numeric::thin_qr(&(y + lift))
                .map_err(|_| Error::RetractionDomain("Grassmann step collapses the frame".into()))?
                .into_inner(),
            RetractionKind::Projection => return Err(Error::MissingCapability("Grassmann projection retraction")),
        };
        Ok(frame_point(y_new))
    }

    fn tangent_basis(&self, x: &Point) -> Result<Vec<DMatrix<f64>>> {
        let y = frame_of(x);
        let yp = numeric::orth_complement(y);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.p {
            for a in 0..(self.n - self.p) {
                let m = y.column(i) * yp.column(a).transpose() * s;
                out.push(&m + m.transpose());
            }
        }
        Ok(out)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Result<Point> {
        let q = numeric::thin_qr(&crate::random::gaussian(rng, self.n, self.p))?;
        Ok(frame_point(q.into_inner()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{retract, tangent_project};

    fn e1e1() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
    }

    fn s12() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn tangent_example_is_fixed() {
        let g = Grassmann::new(2, 1).unwrap();
        let x = g.point(e1e1()).unwrap();
        assert!((tangent_project(&g, &x, &s12()).unwrap() - s12()).norm() < 1e-15);
    }

    #[test]
    fn ii_example() {
        let g = Grassmann::new(2, 1).unwrap();
        let x = g.point(e1e1()).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 2.0]);
        assert!((g.ii_closed(&x, &s12(), &s12()) - &want).norm() < 1e-15);
        assert!((g.dproj(&x, &s12(), &s12()) - &want).norm() < 1e-15);
        let fd = crate::manifolds::testing::fd_dproj(&g, &x, &s12(), &s12(), 1e-5);
        assert!((fd - &want).norm() < 1e-6);
    }

    #[test]
    fn quarter_turn_exponential() {
        let g = Grassmann::new(2, 1).unwrap();
        let x = g.point(e1e1()).unwrap();
        let y = retract(&g, &x, &(s12() * std::f64::consts::FRAC_PI_2), RetractionKind::Exponential).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!((y.ambient() - want).norm() < 1e-15);
    }

    #[test]
    fn exp_frame_handles_rank_deficient_lift() {
        let v = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let lift = DMatrix::from_column_slice(3, 2, &[0.0, 0.0, 0.3, 0.0, 0.0, 0.0]);
        let w = exp_frame(&v, &lift).unwrap();
        assert!(numeric::orthonormality_residual(&w) < 1e-14);
        assert!((w.column(1) - v.column(1)).norm() < 1e-14);
        assert!((w[(0, 0)] - 0.3f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn basis_count_and_tangency() {
        let g = Grassmann::new(5, 2).unwrap();
        let x = g.random_point(&mut crate::random::stream(2, 0)).unwrap();
        let b = g.tangent_basis(&x).unwrap();
        assert_eq!(b.len(), 6);
        for bi in &b {
            assert!((g.project(&x, bi) - bi).norm() < 1e-13);
            assert!((bi.norm() - 1.0).abs() < 1e-13);
        }
    }
}
