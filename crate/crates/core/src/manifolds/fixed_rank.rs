//! Fixed-rank matrices {X ∈ ℝ^{m×n} : rank X = r}.
//!
//! Points cache their thin SVD X = UΣVᵀ. Provided for the geometry layer
//! (projection, II, Weingarten); the retraction is a rank-r truncated SVD.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{Aux, Manifold, Point, RetractionKind};
use crate::error::{Error, Result};
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedRank {
    pub m: usize,
    pub n: usize,
    pub r: usize,
}

struct Parts<'a> {
    u: &'a DMatrix<f64>,
    s: &'a DVector<f64>,
    v: &'a DMatrix<f64>,
}

fn parts(x: &Point) -> Parts<'_> {
    match x.aux() {
        Aux::Svd { u, s, v } => Parts { u, s, v },
        _ => panic!("fixed-rank points always carry SVD factors"),
    }
}

impl FixedRank {
    pub fn new(m: usize, n: usize, r: usize) -> Result<Self> {
        if r == 0 || r > m.min(n) {
            return Err(Error::invalid(format!("fixed rank needs 1 <= r <= min(m, n), got r={r}")));
        }
        Ok(FixedRank { m, n, r })
    }

    fn factored_point(&self, a: DMatrix<f64>) -> Result<Point> {
        let svd = numeric::thin_svd(&a)?;
        if svd.rank() < self.r {
            return Err(Error::RetractionDomain(format!("rank dropped to {}", svd.rank())));
        }
        let u = svd.q.columns(0, self.r).into_owned();
        let v = svd.u.columns(0, self.r).into_owned();
        let s = svd.sigma.rows(0, self.r).into_owned();
        let x = &u * DMatrix::from_diagonal(&s) * v.transpose();
        Ok(Point::new(x, Aux::Svd { u, s, v }))
    }

    /// X⁺ = VΣ⁻¹Uᵀ.
    fn pinv(&self, x: &Point) -> DMatrix<f64> {
        let Parts { u, s, v } = parts(x);
        v * DMatrix::from_diagonal(&s.map(|t| 1.0 / t)) * u.transpose()
    }
}

impl Manifold for FixedRank {
    fn name(&self) -> &'static str {
        "fixed-rank"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn dim(&self) -> usize {
        (self.m + self.n - self.r) * self.r
    }

    fn point(&self, ambient: DMatrix<f64>) -> Result<Point> {
        if ambient.shape() != (self.m, self.n) {
            return Err(Error::invalid("fixed-rank point has the wrong shape"));
        }
        let svd = numeric::thin_svd(&ambient)?;
        if svd.rank() != self.r {
            return Err(Error::InfeasiblePoint((svd.rank() as f64 - self.r as f64).abs()));
        }
        let x = self.factored_point(ambient)?;
        Ok(x)
    }

    fn feasibility_residual(&self, x: &Point) -> f64 {
        let rank = numeric::thin_svd(x.ambient()).map(|s| s.rank()).unwrap_or(0);
        let Parts { u, s, v } = parts(x);
        let recon = (u * DMatrix::from_diagonal(s) * v.transpose() - x.ambient()).norm();
        (rank as f64 - self.r as f64).abs() + recon
    }

    fn project(&self, x: &Point, a: &DMatrix<f64>) -> DMatrix<f64> {
        let Parts { u, v, .. } = parts(x);
        let ua = a - u * (u.transpose() * a);
        let uav = &ua - (&ua * v) * v.transpose();
        a - uav
    }

    fn dproj(&self, x: &Point, psi: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let Parts { u, v, .. } = parts(x);
        let xp = self.pinv(x);
        let perp_u = |m: &DMatrix<f64>| m - u * (u.transpose() * m);
        let perp_v_right = |m: &DMatrix<f64>| m - (m * v) * v.transpose();
        // D P_U[Ψ] = (I−P_U)ΨX⁺ + X⁺ᵀΨᵀ(I−P_U); D P_V[Ψ] = (I−P_V)ΨᵀX⁺ᵀ + X⁺Ψ(I−P_V).
        let a1 = perp_u(&(psi * &xp));
        let dpu = &a1 + a1.transpose();
        let b1 = perp_v_right(&(&xp * psi));
        let dpv = &b1 + b1.transpose();
        dpu * perp_v_right(a) + perp_u(a) * dpv
    }

    fn ii_closed(&self, x: &Point, psi: &DMatrix<f64>, phi: &DMatrix<f64>) -> DMatrix<f64> {
        let Parts { u, s, v } = parts(x);
        let core = v * DMatrix::from_diagonal(&s.map(|t| 1.0 / t)) * u.transpose();
        let mid = psi * &core * phi + phi * &core * psi;
        let left = &mid - u * (u.transpose() * &mid);
        &left - (&left * v) * v.transpose()
    }

    fn default_retraction(&self) -> RetractionKind {
        RetractionKind::Projection
    }

    fn retract_unchecked(&self, x: &Point, v: &DMatrix<f64>, _kind: RetractionKind) -> Result<Point> {
        self.factored_point(x.ambient() + v)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Result<Point> {
        let u = numeric::thin_qr(&crate::random::gaussian(rng, self.m, self.r))?.into_inner();
        let v = numeric::thin_qr(&crate::random::gaussian(rng, self.n, self.r))?.into_inner();
        let s = DVector::from_fn(self.r, |_, _| 1.0 + crate::random::uniform(rng));
        self.factored_point(u * DMatrix::from_diagonal(&s) * v.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ii_matches_dproj_and_is_normal() {
        let f = FixedRank::new(5, 4, 2).unwrap();
        let mut rng = crate::random::stream(9, 0);
        let x = f.random_point(&mut rng).unwrap();
        let u = f.random_tangent(&x, &mut rng);
        let w = f.random_tangent(&x, &mut rng);
        let ii = f.ii_closed(&x, &u, &w);
        assert!((f.dproj(&x, &u, &w) - &ii).norm() < 1e-12 * (1.0 + ii.norm()));
        assert!(f.project(&x, &ii).norm() < 1e-12);
        assert_eq!(f.tangent_basis(&x).unwrap().len(), f.dim());
    }

    #[test]
    fn rank_is_checked() {
        let f = FixedRank::new(3, 3, 2).unwrap();
        assert!(f.point(DMatrix::identity(3, 3)).is_err());
    }
}
