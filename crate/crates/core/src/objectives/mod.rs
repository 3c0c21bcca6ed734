//! Smooth objectives on an ambient matrix space.
//!
//! An objective supplies value, Euclidean gradient, optionally a Euclidean
//! Hessian-vector product, and optionally a closed-form Riemannian Hessian
//! that bypasses the generic Weingarten assembly.

mod fcidump;
mod lep;
mod rhf;

pub use fcidump::{parse_fcidump, parse_fcidump_str, write_fcidump, write_fcidump_string, FcidumpData};
pub use lep::{lep_grassmann_objective, lep_stiefel_objective, make_lep, LepGrassmann, LepSpec, LepStiefel};
pub use rhf::{coulomb_exchange, rhf_objective, RhfObjective, RhfReference};

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::manifolds::Point;

pub trait Objective: Send + Sync {
    fn value(&self, x: &DMatrix<f64>) -> f64;

    fn egrad(&self, x: &DMatrix<f64>) -> DMatrix<f64>;

    /// ∇²f(x)[v]; `None` when the objective has no Hessian action.
    fn ehess_vec(&self, _x: &DMatrix<f64>, _v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Closed-form Riemannian Hessian at a manifold point, if known.
    fn rhess_override(&self, _x: &Point, _v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

pub type ValueFn = Arc<dyn Fn(&DMatrix<f64>) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync>;
pub type HessFn = Arc<dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64> + Send + Sync>;

/// Objective assembled from closures.
#[derive(Clone)]
pub struct CallbackObjective {
    pub value: ValueFn,
    pub egrad: GradFn,
    pub ehess_vec: Option<HessFn>,
}

impl Objective for CallbackObjective {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        (self.value)(x)
    }

    fn egrad(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        (self.egrad)(x)
    }

    fn ehess_vec(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.ehess_vec.as_ref().map(|h| h(x, v))
    }
}

/// f(x) = ½⟨x, Ax⟩ on column vectors.
pub fn quadratic(a: DMatrix<f64>) -> CallbackObjective {
    let a = Arc::new(crate::numeric::sym(&a));
    let (a1, a2, a3) = (a.clone(), a.clone(), a);
    CallbackObjective {
        value: Arc::new(move |x| 0.5 * x.dot(&(&*a1 * x))),
        egrad: Arc::new(move |x| &*a2 * x),
        ehess_vec: Some(Arc::new(move |_x, v| &*a3 * v)),
    }
}
