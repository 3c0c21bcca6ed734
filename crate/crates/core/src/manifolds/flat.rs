//! Euclidean space ℝ^{r×c}: identity projection, vanishing II.

use nalgebra::DMatrix;
use rand::RngCore;

use super::{Aux, Manifold, Point, RetractionKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flat {
    pub rows: usize,
    pub cols: usize,
}

impl Flat {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("flat space needs positive shape"));
        }
        Ok(Flat { rows, cols })
    }
}

impl Manifold for Flat {
    fn name(&self) -> &'static str {
        "flat"
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn point(&self, ambient: DMatrix<f64>) -> Result<Point> {
        if ambient.shape() != (self.rows, self.cols) {
            return Err(Error::invalid("flat point has the wrong shape"));
        }
        Ok(Point::new(ambient, Aux::None))
    }

    fn feasibility_residual(&self, x: &Point) -> f64 {
        if x.ambient().iter().all(|v| v.is_finite()) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn project(&self, _x: &Point, a: &DMatrix<f64>) -> DMatrix<f64> {
        a.clone()
    }

    fn dproj(&self, _x: &Point, _u: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::zeros(a.nrows(), a.ncols())
    }

    fn ii_closed(&self, _x: &Point, u: &DMatrix<f64>, _v: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::zeros(u.nrows(), u.ncols())
    }

    fn default_retraction(&self) -> RetractionKind {
        RetractionKind::Exponential
    }

    fn retract_unchecked(&self, x: &Point, v: &DMatrix<f64>, _kind: RetractionKind) -> Result<Point> {
        Ok(Point::new(x.ambient() + v, Aux::None))
    }

    fn tangent_basis(&self, _x: &Point) -> Result<Vec<DMatrix<f64>>> {
        Ok((0..self.dim())
            .map(|j| {
                let mut e = DMatrix::zeros(self.rows, self.cols);
                e[j] = 1.0;
                e
            })
            .collect())
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Result<Point> {
        Ok(Point::new(crate::random::gaussian(rng, self.rows, self.cols), Aux::None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ii_vanishes() {
        let f = Flat::new(3, 1).unwrap();
        let mut rng = crate::random::stream(0, 0);
        let x = f.random_point(&mut rng).unwrap();
        let u = f.random_tangent(&x, &mut rng);
        assert_eq!(f.ii_closed(&x, &u, &u), DMatrix::zeros(3, 1));
        assert_eq!(f.tangent_basis(&x).unwrap().len(), 3);
    }
}
