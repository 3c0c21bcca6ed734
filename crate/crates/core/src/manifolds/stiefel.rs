//! Stiefel manifold St_p(ℝⁿ) = {X ∈ ℝ^{n×p} : XᵀX = I_p}.

use nalgebra::DMatrix;
use rand::RngCore;

use super::{Aux, Manifold, Point, RetractionKind};
use crate::error::{Error, Result};
use crate::numeric::{self, sym};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stiefel {
    pub n: usize,
    pub p: usize,
}

impl Stiefel {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::invalid(format!("Stiefel needs 1 <= p <= n, got n={n}, p={p}")));
        }
        Ok(Stiefel { n, p })
    }
}

impl Manifold for Stiefel {
    fn name(&self) -> &'static str {
        "stiefel"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn dim(&self) -> usize {
        self.n * self.p - self.p * (self.p + 1) / 2
    }

    fn point(&self, ambient: DMatrix<f64>) -> Result<Point> {
        if ambient.shape() != (self.n, self.p) {
            return Err(Error::invalid("Stiefel point must be n×p"));
        }
        let x = Point::new(ambient, Aux::None);
        self.check_feasible(&x)?;
        Ok(x)
    }

    fn feasibility_residual(&self, x: &Point) -> f64 {
        numeric::orthonormality_residual(x.ambient())
    }

    fn project(&self, x: &Point, a: &DMatrix<f64>) -> DMatrix<f64> {
        let x = x.ambient();
        a - x * sym(&(x.transpose() * a))
    }

    fn dproj(&self, x: &Point, u: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let x = x.ambient();
        -(u * sym(&(x.transpose() * a)) + x * sym(&(u.transpose() * a)))
    }

    fn ii_closed(&self, x: &Point, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        let utv = u.transpose() * v;
        x.ambient() * ((&utv + utv.transpose()) * -0.5)
    }

    fn default_retraction(&self) -> RetractionKind {
        RetractionKind::Qr
    }

    fn retract_unchecked(&self, x: &Point, v: &DMatrix<f64>, kind: RetractionKind) -> Result<Point> {
        match kind {
            RetractionKind::Qr => {
                let q = numeric::thin_qr(&(x.ambient() + v))
                    .map_err(|_| Error::RetractionDomain("Stiefel step collapses the frame".into()))?;
                Ok(Point::new(q.into_inner(), Aux::None))
            }
            _ => Err(Error::MissingCapability("Stiefel supports the QR retraction only")),
        }
    }

    fn tangent_basis(&self, x: &Point) -> Result<Vec<DMatrix<f64>>> {
        let (n, p) = (self.n, self.p);
        let xa = x.ambient();
        let xp = numeric::orth_complement(xa);
        let mut out = Vec::with_capacity(self.dim());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..p {
            for j in (i + 1)..p {
                let mut om = DMatrix::zeros(p, p);
                om[(i, j)] = s;
                om[(j, i)] = -s;
                out.push(xa * om);
            }
        }
        for a in 0..(n - p) {
            for b in 0..p {
                let mut m = DMatrix::zeros(n, p);
                m.set_column(b, &xp.column(a));
                out.push(m);
            }
        }
        Ok(out)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Result<Point> {
        let q = numeric::thin_qr(&crate::random::gaussian(rng, self.n, self.p))?;
        Ok(Point::new(q.into_inner(), Aux::None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::tangent_project;

    #[test]
    fn normal_column_projects_to_zero() {
        let m = Stiefel::new(2, 1).unwrap();
        let x = m.point(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let r = tangent_project(&m, &x, &DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(r, DMatrix::zeros(2, 1));
    }

    #[test]
    fn basis_count_and_orthonormality() {
        let m = Stiefel::new(5, 3).unwrap();
        let x = m.random_point(&mut crate::random::stream(3, 0)).unwrap();
        let b = m.tangent_basis(&x).unwrap();
        assert_eq!(b.len(), m.dim());
        for (i, bi) in b.iter().enumerate() {
            assert!((m.project(&x, bi) - bi).norm() < 1e-13);
            for (j, bj) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((bi.dot(bj) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn exponential_is_unsupported() {
        let m = Stiefel::new(3, 1).unwrap();
        let x = m.random_point(&mut crate::random::stream(0, 0)).unwrap();
        assert!(m.retract_unchecked(&x, &DMatrix::zeros(3, 1), RetractionKind::Exponential).is_err());
    }
}
