//! Linear eigenvalue problems with a prescribed spectrum.
//!
//! A = UΣUᵀ with U the Q-factor of a seeded Gaussian and σᵢ = ξ^{i−n}.
//! Two formulations: f_Gr(P) = s·Tr(PA) on the Grassmannian and
//! f_St(X) = ½Tr(XᵀAX) on the Stiefel manifold. The Grassmann scale `s`
//! is explicit; the default ½ makes f_Gr(XXᵀ) = f_St(X).

use nalgebra::DMatrix;

use super::Objective;
use crate::error::{Error, Result};
use crate::manifolds::Point;
use crate::numeric::{self, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LepSpec {
    pub n: usize,
    pub p: usize,
    pub xi: f64,
    pub seed: u64,
    /// Ascending spectrum σᵢ = ξ^{i−n}.
    pub sigma: Vec<f64>,
    /// Orthogonal eigenvector matrix; column i pairs with σᵢ.
    pub u: DMatrix<f64>,
    pub a: SymMatrix,
}

pub fn make_lep(n: usize, p: usize, xi: f64, seed: u64) -> Result<LepSpec> {
    if p == 0 || p >= n {
        return Err(Error::invalid(format!("need n > p >= 1, got n={n}, p={p}")));
    }
    if !(xi > 1.0) || !xi.is_finite() {
        return Err(Error::invalid(format!("need xi > 1, got {xi}")));
    }
    let mut rng = crate::random::stream(seed, 0);
    let u = numeric::thin_qr(&crate::random::gaussian(&mut rng, n, n))?.into_inner();
    let sigma: Vec<f64> = (1..=n).map(|i| xi.powi(i as i32 - n as i32)).collect();
    let sig = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&sigma));
    let a = SymMatrix::new(&u * sig * u.transpose())?;
    Ok(LepSpec { n, p, xi, seed, sigma, u, a })
}

impl LepSpec {
    /// Projector onto the eigenvectors of the 1-based configuration `config`.
    pub fn config_frame(&self, config: &[usize]) -> Result<DMatrix<f64>> {
        let mut y = DMatrix::zeros(self.n, config.len());
        for (j, &c) in config.iter().enumerate() {
            if c == 0 || c > self.n {
                return Err(Error::invalid(format!("configuration index {c} out of 1..={}", self.n)));
            }
            y.set_column(j, &self.u.column(c - 1));
        }
        Ok(y)
    }

    /// ½ Σ_{i ∈ config} σᵢ.
    pub fn config_value(&self, config: &[usize]) -> f64 {
        0.5 * config.iter().map(|&c| self.sigma[c - 1]).sum::<f64>()
    }
}

/// s·Tr(PA) on Gr_p(ℝⁿ) in projector form.
#[derive(Debug, Clone)]
pub struct LepGrassmann {
    a: DMatrix<f64>,
    scale: f64,
    closed_form: bool,
}

impl LepGrassmann {
    pub fn new(a: &SymMatrix, scale: f64) -> Self {
        LepGrassmann { a: a.matrix().clone(), scale, closed_form: true }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Disables the closed-form Riemannian Hessian (forces the generic route).
    pub fn without_closed_form(mut self) -> Self {
        self.closed_form = false;
        self
    }

    /// s·[P,[Γ,A]], evaluated with the cached frame.
    pub fn closed_form_hessian(&self, x: &Point, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        let c = gamma * &self.a;
        let b = &c - c.transpose();
        let pb = match x.frame() {
            Some(y) => y * (y.transpose() * &b),
            None => x.ambient() * &b,
        };
        (&pb + pb.transpose()) * self.scale
    }
}

pub fn lep_grassmann_objective(spec: &LepSpec) -> LepGrassmann {
    LepGrassmann::new(&spec.a, 0.5)
}

impl Objective for LepGrassmann {
    fn value(&self, p: &DMatrix<f64>) -> f64 {
        self.scale * p.dot(&self.a)
    }

    fn egrad(&self, _p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * self.scale
    }

    fn ehess_vec(&self, p: &DMatrix<f64>, _v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(p.nrows(), p.ncols()))
    }

    fn rhess_override(&self, x: &Point, v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.closed_form.then(|| self.closed_form_hessian(x, v))
    }
}

/// ½Tr(XᵀAX) on St_p(ℝⁿ).
#[derive(Debug, Clone)]
pub struct LepStiefel {
    a: DMatrix<f64>,
}

pub fn lep_stiefel_objective(spec: &LepSpec) -> LepStiefel {
    LepStiefel { a: spec.a.matrix().clone() }
}

impl LepStiefel {
    pub fn new(a: &SymMatrix) -> Self {
        LepStiefel { a: a.matrix().clone() }
    }
}

impl Objective for LepStiefel {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x))
    }

    fn egrad(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * x
    }

    fn ehess_vec(&self, _x: &DMatrix<f64>, v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        Some(&self.a * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{Grassmann, Manifold};

    #[test]
    fn spectrum_is_prescribed() {
        let spec = make_lep(10, 2, 1.01, 0).unwrap();
        let (vals, _) = numeric::sym_eig(&spec.a).unwrap();
        for (i, v) in vals.iter().enumerate() {
            assert!((v - 1.01f64.powi(i as i32 - 9)).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_validated() {
        assert_eq!(make_lep(6, 2, 1.1, 4).unwrap().a, make_lep(6, 2, 1.1, 4).unwrap().a);
        assert!(make_lep(3, 3, 1.1, 0).is_err());
        assert!(make_lep(4, 1, 1.0, 0).is_err());
        let small = make_lep(5, 1, 1.1, 0).unwrap();
        let large = make_lep(5, 1, 2.0, 0).unwrap();
        assert!(large.sigma[4] / large.sigma[3] > small.sigma[4] / small.sigma[3]);
    }

    #[test]
    fn diagonal_value_and_critical_point() {
        let a = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let f = LepGrassmann::new(&a, 0.5);
        let g = Grassmann::new(2, 1).unwrap();
        let x = g.point(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(f.value(x.ambient()), 1.0);
        let grad = crate::manifolds::riemannian_gradient(&g, &f, &x);
        assert!(grad.norm() < 1e-15);
    }

    #[test]
    fn stiefel_value_is_gauge_invariant() {
        let spec = make_lep(6, 3, 1.2, 1).unwrap();
        let f = lep_stiefel_objective(&spec);
        let mut rng = crate::random::stream(11, 0);
        let x = numeric::thin_qr(&crate::random::gaussian(&mut rng, 6, 3)).unwrap().into_inner();
        let q = numeric::thin_qr(&crate::random::gaussian(&mut rng, 3, 3)).unwrap().into_inner();
        assert!((f.value(&x) - f.value(&(&x * q))).abs() < 1e-13);
        let bottom = spec.config_frame(&[1, 2, 3]).unwrap();
        assert!((f.value(&bottom) - spec.config_value(&[1, 2, 3])).abs() < 1e-13);
    }
}
