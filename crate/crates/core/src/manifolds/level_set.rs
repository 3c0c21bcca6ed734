//! Regular level sets M = {x ∈ ℝⁿ : c(x) = 0}, c: ℝⁿ → ℝ^q.
//!
//! With J = ∇c(x) (q×n) and G = (JJᵀ)⁻¹:
//! Proj = I − JᵀGJ and II(u, v) = −JᵀG (Hess c[u]) v.
//! The retraction is a damped Newton projection along the normal space at
//! the base point: find λ with c(x + v + Jᵀλ) = 0.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{Aux, Manifold, Point, RetractionKind};
use crate::error::{Error, Result};
use crate::numeric::tol;

pub type ConstraintFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
/// (x, u) ↦ q×n matrix whose i-th row is (Hess cᵢ(x) u)ᵀ.
pub type HessActionFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Constraint callbacks. Must be safe to call concurrently.
#[derive(Clone)]
pub struct LevelSetSpec {
    pub q: usize,
    pub c: ConstraintFn,
    pub jac: JacobianFn,
    pub hess_action: HessActionFn,
}

impl fmt::Debug for LevelSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetSpec").field("q", &self.q).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct LevelSet {
    pub n: usize,
    spec: LevelSetSpec,
}

fn col(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

fn mat(v: DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_column_slice(n, 1, v.as_slice())
}

impl LevelSet {
    pub fn new(n: usize, spec: LevelSetSpec) -> Result<Self> {
        if spec.q == 0 || spec.q >= n {
            return Err(Error::invalid(format!("level set needs 1 <= q < n, got q={}, n={n}", spec.q)));
        }
        Ok(LevelSet { n, spec })
    }

    /// Unit sphere as the level set ½(‖x‖² − 1) = 0.
    pub fn sphere(n: usize) -> Result<Self> {
        let spec = LevelSetSpec {
            q: 1,
            c: Arc::new(|x: &DVector<f64>| DVector::from_element(1, 0.5 * (x.norm_squared() - 1.0))),
            jac: Arc::new(|x: &DVector<f64>| DMatrix::from_row_slice(1, x.len(), x.as_slice())),
            hess_action: Arc::new(|_x: &DVector<f64>, u: &DVector<f64>| DMatrix::from_row_slice(1, u.len(), u.as_slice())),
        };
        LevelSet::new(n, spec)
    }

    pub fn spec(&self) -> &LevelSetSpec {
        &self.spec
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.spec.jac)(x)
    }

    /// Fails with `RegularityViolation` when ∇c drops row rank.
    pub fn check_regular(&self, x: &DVector<f64>) -> Result<()> {
        let j = self.jacobian(x);
        let s = j.singular_values();
        let smax = s.max();
        let smin = s.min();
        if !(smax > 0.0) || smin <= tol::LEVEL_SET_REGULARITY * smax {
            return Err(Error::RegularityViolation);
        }
        Ok(())
    }

    fn gram_inverse(j: &DMatrix<f64>) -> DMatrix<f64> {
        let g = j * j.transpose();
        match g.clone().cholesky() {
            Some(ch) => ch.inverse(),
            None => g.pseudo_inverse(1e-14).unwrap_or_else(|_| DMatrix::zeros(j.nrows(), j.nrows())),
        }
    }

    fn newton_project(&self, y: &DVector<f64>, normals: &DMatrix<f64>) -> Result<DVector<f64>> {
        let c = &self.spec.c;
        let target = tol::LEVEL_SET_NEWTON * y.norm().max(1.0);
        let mut lambda = DVector::zeros(self.spec.q);
        let mut z = y.clone();
        let mut res = c(&z);
        for _ in 0..tol::LEVEL_SET_MAX_ITERS {
            if res.norm() <= target {
                return Ok(z);
            }
            let jz = self.jacobian(&z) * normals.transpose();
            let step = jz.lu().solve(&(-&res)).ok_or(Error::RegularityViolation)?;
            let mut t = 1.0;
            loop {
                let cand_l = &lambda + &step * t;
                let cand_z = y + normals.transpose() * &cand_l;
                let cand_r = c(&cand_z);
                if cand_r.norm() < res.norm() || t < 1e-6 {
                    lambda = cand_l;
                    z = cand_z;
                    res = cand_r;
                    break;
                }
                t *= 0.5;
            }
        }
        if res.norm() <= target {
            Ok(z)
        } else {
            Err(Error::RetractionDomain(format!("Newton projection stalled at residual {:.3e}", res.norm())))
        }
    }
}

impl Manifold for LevelSet {
    fn name(&self) -> &'static str {
        "level-set"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.n, 1)
    }

    fn dim(&self) -> usize {
        self.n - self.spec.q
    }

    fn point(&self, ambient: DMatrix<f64>) -> Result<Point> {
        if ambient.shape() != (self.n, 1) {
            return Err(Error::invalid("level-set point must be n×1"));
        }
        let x = Point::new(ambient, Aux::None);
        self.check_feasible(&x)?;
        self.check_regular(&col(x.ambient()))?;
        Ok(x)
    }

    fn feasibility_residual(&self, x: &Point) -> f64 {
        (self.spec.c)(&col(x.ambient())).norm()
    }

    fn project(&self, x: &Point, a: &DMatrix<f64>) -> DMatrix<f64> {
        let j = self.jacobian(&col(x.ambient()));
        let g = Self::gram_inverse(&j);
        let av = col(a);
        mat(&av - j.transpose() * (g * (&j * &av)))
    }

    fn dproj(&self, x: &Point, u: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let xv = col(x.ambient());
        let j = self.jacobian(&xv);
        let g = Self::gram_inverse(&j);
        let dj = (self.spec.hess_action)(&xv, &col(u));
        let av = col(a);
        let gja = &g * (&j * &av);
        let ddg = &dj * j.transpose() + &j * dj.transpose();
        let out = -(dj.transpose() * &gja) - j.transpose() * (&g * (&dj * &av)) + j.transpose() * (&g * (ddg * &gja));
        mat(out)
    }

    fn ii_closed(&self, x: &Point, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        let xv = col(x.ambient());
        let j = self.jacobian(&xv);
        let g = Self::gram_inverse(&j);
        let dj = (self.spec.hess_action)(&xv, &col(u));
        mat(-(j.transpose() * (g * (dj * col(v)))))
    }

    fn default_retraction(&self) -> RetractionKind {
        RetractionKind::Projection
    }

    fn retract_unchecked(&self, x: &Point, v: &DMatrix<f64>, _kind: RetractionKind) -> Result<Point> {
        let xv = col(x.ambient());
        self.check_regular(&xv)?;
        let normals = self.jacobian(&xv);
        let z = self.newton_project(&(&xv + col(v)), &normals)?;
        Ok(Point::new(mat(z), Aux::None))
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Result<Point> {
        let mut y = col(&crate::random::gaussian(rng, self.n, 1));
        for _ in 0..100 {
            let r = (self.spec.c)(&y);
            if r.norm() <= tol::LEVEL_SET_NEWTON {
                break;
            }
            let j = self.jacobian(&y);
            y -= j.transpose() * (Self::gram_inverse(&j) * r);
        }
        self.point(mat(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::Sphere;

    #[test]
    fn level_set_sphere_matches_sphere_geometry() {
        let ls = LevelSet::sphere(4).unwrap();
        let s = Sphere::new(4).unwrap();
        let mut rng = crate::random::stream(5, 0);
        let x = ls.random_point(&mut rng).unwrap();
        let u = ls.random_tangent(&x, &mut rng);
        let v = ls.random_tangent(&x, &mut rng);
        assert!((ls.project(&x, &u) - s.project(&x, &u)).norm() < 1e-12);
        assert!((ls.ii_closed(&x, &u, &v) - s.ii_closed(&x, &u, &v)).norm() < 1e-12);
        assert!((ls.dproj(&x, &u, &v) - s.dproj(&x, &u, &v)).norm() < 1e-12);
        let w = x.ambient() * 0.7;
        assert!((ls.dproj(&x, &u, &w) - s.dproj(&x, &u, &w)).norm() < 1e-12);
        let y = ls.retract_unchecked(&x, &(u * 0.1), RetractionKind::Projection).unwrap();
        assert!(ls.feasibility_residual(&y) < 1e-12);
    }

    #[test]
    fn regularity_violation_is_reported() {
        let ls = LevelSet::sphere(3).unwrap();
        assert_eq!(ls.check_regular(&DVector::zeros(3)), Err(Error::RegularityViolation));
    }
}
