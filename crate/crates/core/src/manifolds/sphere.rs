//! Unit sphere S^{n−1} ⊂ ℝⁿ, points stored as n×1 columns.

use nalgebra::DMatrix;
use rand::RngCore;

use super::{Aux, Manifold, Point, RetractionKind};
use crate::error::{Error, Result};
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sphere {
    pub n: usize,
}

impl Sphere {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("sphere needs n >= 2"));
        }
        Ok(Sphere { n })
    }
}

impl Manifold for Sphere {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.n, 1)
    }

    fn dim(&self) -> usize {
        self.n - 1
    }

    fn point(&self, ambient: DMatrix<f64>) -> Result<Point> {
        if ambient.shape() != (self.n, 1) {
            return Err(Error::invalid("sphere point must be n×1"));
        }
        let p = Point::new(ambient, Aux::None);
        self.check_feasible(&p)?;
        Ok(p)
    }

    fn feasibility_residual(&self, x: &Point) -> f64 {
        (x.ambient().norm() - 1.0).abs()
    }

    fn project(&self, x: &Point, a: &DMatrix<f64>) -> DMatrix<f64> {
        let x = x.ambient();
        a - x * x.dot(a)
    }

    fn dproj(&self, x: &Point, u: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let x = x.ambient();
        -(u * x.dot(a) + x * u.dot(a))
    }

    fn ii_closed(&self, x: &Point, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        x.ambient() * -u.dot(v)
    }

    fn default_retraction(&self) -> RetractionKind {
        RetractionKind::Qr
    }

    fn retract_unchecked(&self, x: &Point, v: &DMatrix<f64>, kind: RetractionKind) -> Result<Point> {
        let xa = x.ambient();
        let out = match kind {
            RetractionKind::Qr | RetractionKind::Projection => {
                let y = xa + v;
                let ny = y.norm();
                if !(ny > 0.0 && ny.is_finite()) {
                    return Err(Error::RetractionDomain("sphere step reaches the origin".into()));
                }
                y / ny
            }
            RetractionKind::Exponential => {
                let t = v.norm();
                if t == 0.0 {
                    xa.clone()
                } else {
                    let y = xa * t.cos() + v * (t.sin() / t);
                    let ny = y.norm();
                    y / ny
                }
            }
        };
        Ok(Point::new(out, Aux::None))
    }

    fn tangent_basis(&self, x: &Point) -> Result<Vec<DMatrix<f64>>> {
        let c = numeric::orth_complement(x.ambient());
        Ok(c.column_iter().map(|col| col.into_owned()).map(|v| DMatrix::from_column_slice(self.n, 1, v.as_slice())).collect())
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Result<Point> {
        let g = crate::random::gaussian(rng, self.n, 1);
        let ng = g.norm();
        Ok(Point::new(g / ng, Aux::None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{retract, second_fundamental_form, tangent_project};

    fn e(n: usize, i: usize) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(n, 1);
        v[i] = 1.0;
        v
    }

    #[test]
    fn normal_direction_projects_to_zero() {
        let s = Sphere::new(3).unwrap();
        let x = s.point(e(3, 0)).unwrap();
        assert_eq!(tangent_project(&s, &x, &e(3, 0)).unwrap(), DMatrix::zeros(3, 1));
    }

    #[test]
    fn ii_of_unit_tangent_is_minus_x() {
        let s = Sphere::new(3).unwrap();
        let x = s.point(e(3, 0)).unwrap();
        let ii = second_fundamental_form(&s, &x, &e(3, 1), &e(3, 1)).unwrap();
        assert_eq!(ii, -e(3, 0));
        assert_eq!(s.dproj(&x, &e(3, 1), &e(3, 1)), -e(3, 0));
    }

    #[test]
    fn half_great_circle() {
        let s = Sphere::new(3).unwrap();
        let x = s.point(e(3, 0)).unwrap();
        let y = retract(&s, &x, &(e(3, 1) * std::f64::consts::PI), RetractionKind::Exponential).unwrap();
        assert!((y.ambient() + e(3, 0)).norm() < 1e-15);
        let z = retract(&s, &x, &DMatrix::zeros(3, 1), RetractionKind::Qr).unwrap();
        assert_eq!(z.ambient(), x.ambient());
    }

    #[test]
    fn non_tangent_is_rejected() {
        let s = Sphere::new(3).unwrap();
        let x = s.point(e(3, 0)).unwrap();
        assert!(matches!(second_fundamental_form(&s, &x, &e(3, 0), &e(3, 1)), Err(Error::NotTangent(_))));
        let bad = Point::new(e(3, 0) * 2.0, Aux::None);
        assert!(matches!(tangent_project(&s, &bad, &e(3, 1)), Err(Error::InfeasiblePoint(_))));
    }

    #[test]
    fn basis_is_orthonormal_complement() {
        let s = Sphere::new(4).unwrap();
        let x = s.random_point(&mut crate::random::stream(1, 0)).unwrap();
        let b = s.tangent_basis(&x).unwrap();
        assert_eq!(b.len(), 3);
        for (i, bi) in b.iter().enumerate() {
            assert!(bi.dot(x.ambient()).abs() < 1e-14);
            for (j, bj) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((bi.dot(bj) - want).abs() < 1e-14);
            }
        }
    }
}
