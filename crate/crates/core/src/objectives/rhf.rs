//! Closed-shell restricted Hartree–Fock energy on Gr_{N_o}(ℝ^{N_b}).
//!
//! E(γ) = 2Tr(hγ) + Tr((2J(γ) − K(γ))γ), with
//! J(γ)_pq = Σ g_pqrs γ_sr and K(γ)_pq = Σ g_psrq γ_sr.
//! Orbitals are assumed orthonormal (MO-basis integrals).
//! `value` is electronic; [`RhfObjective::total_energy`] adds e_core.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FcidumpData, Objective};
use crate::error::{Error, Result};
use crate::manifolds::Point;
use crate::numeric::{self, comm, SymMatrix};

/// J(γ) and K(γ) by direct summation.
pub fn coulomb_exchange(data: &FcidumpData, gamma: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let n = data.norb;
    if gamma.dim() != n {
        return Err(Error::invalid(format!("density is {}x{}, expected {n}x{n}", gamma.dim(), gamma.dim())));
    }
    let g = gamma.matrix();
    let mut j = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let (mut sj, mut sk) = (0.0, 0.0);
            for r in 0..n {
                for s in 0..n {
                    sj += data.g(p, q, r, s) * g[(s, r)];
                    sk += data.g(p, s, r, q) * g[(s, r)];
                }
            }
            j[(p, q)] = sj;
            k[(p, q)] = sk;
        }
    }
    Ok((SymMatrix::new(j)?, SymMatrix::new(k)?))
}

/// Reference energies shipped alongside a fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhfReference {
    pub molecule: String,
    pub basis: String,
    pub bond_length_bohr: f64,
    pub norb: usize,
    pub nelec: usize,
    pub nuclear_repulsion: f64,
    pub rhf_total_energy: f64,
    pub fci_ground_energy: f64,
    #[serde(default)]
    pub orbital_energies: Vec<f64>,
}

impl RhfReference {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[derive(Debug, Clone)]
pub struct RhfObjective {
    data: FcidumpData,
    n_occ: usize,
    /// ERIs reshaped so that vec(J(γ)) = jmat·vec(γᵀ), likewise for K.
    jmat: DMatrix<f64>,
    kmat: DMatrix<f64>,
    closed_form: bool,
}

pub fn rhf_objective(data: FcidumpData) -> Result<RhfObjective> {
    RhfObjective::new(data)
}

impl RhfObjective {
    pub fn new(data: FcidumpData) -> Result<Self> {
        if !data.nelec.is_multiple_of(2) {
            return Err(Error::ClosedShellViolation(data.nelec));
        }
        let n = data.norb;
        let n_occ = data.nelec / 2;
        if n_occ == 0 || n_occ >= n {
            return Err(Error::invalid(format!("need 0 < N_o < N_b, got N_o={n_occ}, N_b={n}")));
        }
        let n2 = n * n;
        let jmat = DMatrix::from_column_slice(n2, n2, &data.eri);
        let mut kmat = DMatrix::zeros(n2, n2);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        kmat[(p + n * q, r + n * s)] = data.g(p, s, r, q);
                    }
                }
            }
        }
        Ok(RhfObjective { data, n_occ, jmat, kmat, closed_form: true })
    }

    pub fn data(&self) -> &FcidumpData {
        &self.data
    }

    pub fn n_occ(&self) -> usize {
        self.n_occ
    }

    pub fn norb(&self) -> usize {
        self.data.norb
    }

    pub fn without_closed_form(mut self) -> Self {
        self.closed_form = false;
        self
    }

    fn apply(&self, m: &DMatrix<f64>, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.data.norb;
        let v = numeric::vec(&gamma.transpose());
        numeric::unvec((m * v).as_slice(), n, n)
    }

    pub fn coulomb(&self, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply(&self.jmat, gamma)
    }

    pub fn exchange(&self, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply(&self.kmat, gamma)
    }

    /// F = h + 2J(γ) − K(γ).
    pub fn fock(&self, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        self.data.h.matrix() + self.coulomb(gamma) * 2.0 - self.exchange(gamma)
    }

    pub fn total_energy(&self, gamma: &DMatrix<f64>) -> f64 {
        self.value(gamma) + self.data.e_core
    }

    /// Aufbau density of the lowest N_o eigenvectors of h.
    pub fn core_guess(&self) -> Result<DMatrix<f64>> {
        let (_, vecs) = numeric::sym_eig(&self.data.h)?;
        Ok(vecs.matrix().columns(0, self.n_occ).into_owned())
    }

    /// Proj_γ(DḠ[Δ]) with Ḡ(γ) = [γ,[γ,2F(γ)]]:
    /// DḠ[Δ] = [Δ,[γ,2F]] + [γ,[Δ,2F]] + [γ,[γ,Δ_F]], Δ_F = 2(2J(Δ) − K(Δ)).
    pub fn closed_form_hessian(&self, gamma: &DMatrix<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
        let f2 = self.fock(gamma) * 2.0;
        let df = (self.coulomb(delta) * 2.0 - self.exchange(delta)) * 2.0;
        let dg = comm(delta, &comm(gamma, &f2)) + comm(gamma, &comm(delta, &f2)) + comm(gamma, &comm(gamma, &df));
        comm(gamma, &comm(gamma, &numeric::sym(&dg)))
    }
}

impl Objective for RhfObjective {
    fn value(&self, gamma: &DMatrix<f64>) -> f64 {
        let two_jk = self.coulomb(gamma) * 2.0 - self.exchange(gamma);
        2.0 * self.data.h.matrix().dot(gamma) + two_jk.dot(gamma)
    }

    fn egrad(&self, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        self.fock(gamma) * 2.0
    }

    fn ehess_vec(&self, _gamma: &DMatrix<f64>, delta: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        Some((self.coulomb(delta) * 2.0 - self.exchange(delta)) * 2.0)
    }

    fn rhess_override(&self, x: &Point, v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.closed_form.then(|| self.closed_form_hessian(x.ambient(), v))
    }
}
