//! Discretized constrained saddle dynamics over Gr_k(TM).
//!
//! One iteration from (x, P), P = VVᵀ, g = grad f(x), H the Riemannian Hessian:
//!
//! ```text
//! d_x = −(g − 2Pg)                      reflected gradient
//! d_P = −[P,[P,H]]                      plane rotation toward the lowest k-plane
//! (x, P) ← Retr(η_x·d_x, η_P·d_P)
//! ```
//!
//! The projector variant tracks P (any frame V is a gauge choice); the
//! representative variant tracks V with d_V = −(I − VVᵀ)HV. Both feed the
//! retraction with the horizontal lift d_P·V = −(I − VVᵀ)HV.
//!
//! Residuals follow a fixed protocol: r⁽⁰⁾ = ∞, r⁽¹⁾ = 1, then ‖d⁽ᵗ⁾‖/‖d⁽⁰⁾‖.
//! The loop continues while t < maxit and max(r_x, r_P) > tol, so it cannot
//! stop before t = 1 even at an exact saddle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::{self, BundleState, PlaneRoute, PlaneUpdate};
use crate::error::{Error, Result};
use crate::manifolds::{self, Manifold, Point, RetractionKind};
use crate::numeric::{self, tol};
use crate::objectives::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetractionMode {
    /// Retraction over the Grassmann bundle.
    Bundle,
    /// Position by a manifold retraction, plane re-projected onto the new tangent space.
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Projector,
    Representative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: usize,
    pub eta_x: f64,
    pub eta_p: f64,
    /// `None` iterates until the tolerance is met.
    pub maxit: Option<usize>,
    pub tol: f64,
    pub retraction: RetractionMode,
    pub variant: Variant,
    /// Seed of the initial state, carried with the run; the iteration itself is deterministic.
    pub rng_seed: u64,
    /// Position retraction for [`RetractionMode::Simple`]; defaults to the manifold's.
    pub x_retraction: Option<RetractionKind>,
    /// Projector variant only: assemble d_P from the Hessian materialized on a tangent basis.
    pub dense_operator: bool,
    pub compute_spectrum: bool,
    /// Verify the bundle invariants after every accepted step.
    pub check_invariants: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            k: 1,
            eta_x: 1.0,
            eta_p: 1.0,
            maxit: Some(10_000),
            tol: 1e-8,
            retraction: RetractionMode::Bundle,
            variant: Variant::Projector,
            rng_seed: 0,
            x_retraction: None,
            dense_operator: false,
            compute_spectrum: true,
            check_invariants: false,
        }
    }
}

impl SolverConfig {
    /// Same step size for position and plane.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta_x = eta;
        self.eta_p = eta;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.eta_x > 0.0 && self.eta_x.is_finite() && self.eta_p > 0.0 && self.eta_p.is_finite()) {
            return Err(Error::invalid(format!("step sizes must be positive, got ({}, {})", self.eta_x, self.eta_p)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.k > d {
            return Err(Error::invalid(format!("index {} exceeds manifold dimension {d}", self.k)));
        }
        Ok(())
    }
}

/// Terminal index classification from an ascending spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumClass {
    /// Eigenvalues below −tol_spec.
    pub index: usize,
    /// Eigenvalues in (−tol_spec, tol_spec), not counted in `index`.
    pub degenerate: usize,
    pub tol_spec: f64,
}

pub fn classify_spectrum(spectrum: &[f64]) -> SpectrumClass {
    let scale = spectrum.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let tol_spec = tol::SPECTRUM * scale;
    let index = spectrum.iter().filter(|&&l| l < -tol_spec).count();
    let degenerate = spectrum.iter().filter(|&&l| l.abs() < tol_spec).count();
    SpectrumClass { index, degenerate, tol_spec }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub terminal: BundleState,
    pub iterations: usize,
    pub r_x_history: Vec<f64>,
    pub r_p_history: Vec<f64>,
    pub converged: bool,
    /// Ascending Hessian eigenvalues at the terminal point, if requested.
    pub terminal_spectrum: Option<Vec<f64>>,
    pub classification: Option<SpectrumClass>,
    pub terminal_value: f64,
    /// ‖grad f‖ at the terminal point.
    pub grad_norm: f64,
    /// Why the run stopped early, if it did.
    pub diagnostic: Option<String>,
}

impl RunRecord {
    pub fn classified_index(&self) -> Option<usize> {
        self.classification.map(|c| c.index)
    }

    /// max(r_x, r_P) after the last iteration.
    pub fn final_residual(&self) -> f64 {
        residual_max(&self.r_x_history, &self.r_p_history).last().copied().unwrap_or(f64::INFINITY)
    }
}

fn residual_max(rx: &[f64], rp: &[f64]) -> Vec<f64> {
    rx.iter().zip(rp).map(|(a, b)| a.max(*b)).collect()
}

/// R_{x,P}(u) = u − 2Pu.
pub fn reflect<M: Manifold + ?Sized>(m: &M, s: &BundleState, u: &DMatrix<f64>) -> DMatrix<f64> {
    if s.k() == 0 {
        return u.clone();
    }
    let (r, c) = m.ambient_shape();
    let v = s.frame();
    let coef = v.transpose() * numeric::vec(u);
    u - numeric::unvec((v * coef).as_slice(), r, c) * 2.0
}

/// d_x = −R_{x,P}(grad f(x)).
pub fn x_direction<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, s: &BundleState) -> DMatrix<f64> {
    let g = manifolds::riemannian_gradient(m, obj, &s.x);
    -reflect(m, s, &g)
}

/// Plane direction in lifted form.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneDirection {
    /// d_P·V (N×k), horizontal: Vᵀ·lift = 0.
    pub lift: DMatrix<f64>,
    /// ‖d_P‖_F for the projector variant, ‖d_V‖_F for the representative one.
    pub norm: f64,
}

/// Hessian images of the frame columns, stacked as N×k.
fn hessian_on_frame<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, s: &BundleState) -> Result<DMatrix<f64>> {
    let mut w = DMatrix::zeros(s.frame().nrows(), s.k());
    for (j, v) in s.plane_vectors(m).iter().enumerate() {
        w.set_column(j, &numeric::vec(&manifolds::riemannian_hessian_vec(m, obj, &s.x, v)?));
    }
    Ok(w)
}

/// Plane direction from k Hessian-vector products: lift = −(I − VVᵀ)HV.
pub fn plane_direction<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, s: &BundleState, variant: Variant) -> Result<PlaneDirection> {
    let n = s.frame().nrows();
    // A plane spanning all of T_x M is fixed; round-off must not feed the residual.
    if s.k() == 0 || s.k() == m.dim() {
        return Ok(PlaneDirection { lift: DMatrix::zeros(n, s.k()), norm: 0.0 });
    }
    let v = s.frame();
    let w = hessian_on_frame(m, obj, s)?;
    let r = &w - v * (v.transpose() * &w);
    let norm = match variant {
        Variant::Projector => std::f64::consts::SQRT_2 * r.norm(),
        Variant::Representative => r.norm(),
    };
    Ok(PlaneDirection { lift: -r, norm })
}

/// Compressed Hessian T·H·T on the vectorized ambient space, from a tangent basis.
pub fn compressed_hessian<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, x: &Point) -> Result<DMatrix<f64>> {
    if m.ambient_dim() > tol::DENSE_AMBIENT_MAX {
        return Err(Error::invalid("ambient dimension too large for a dense Hessian operator"));
    }
    let basis = m.tangent_basis(x)?;
    let hd = manifolds::hessian_in_basis(m, obj, x, &basis)?;
    let mut b = DMatrix::zeros(m.ambient_dim(), basis.len());
    for (j, e) in basis.iter().enumerate() {
        b.set_column(j, &numeric::vec(e));
    }
    Ok(numeric::sym(&(&b * hd * b.transpose())))
}

/// d_P = −[P,[P,H]] as a dense symmetric N×N matrix, H materialized on a tangent basis.
pub fn p_direction<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, s: &BundleState) -> Result<DMatrix<f64>> {
    let h = compressed_hessian(m, obj, &s.x)?;
    let p = s.projector()?.into_inner();
    let ph = &p * &h;
    let php = &ph * &p;
    Ok(-(&ph + ph.transpose() - php * 2.0))
}

/// d_P = −(RVᵀ + VRᵀ) with R = (I − VVᵀ)HV, using only k Hessian-vector products.
pub fn p_direction_frame<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, s: &BundleState) -> Result<DMatrix<f64>> {
    let d = plane_direction(m, obj, s, Variant::Projector)?;
    let rv = &d.lift * s.frame().transpose();
    Ok(&rv + rv.transpose())
}

/// Result of one accepted iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: BundleState,
    pub dx_norm: f64,
    pub dp_norm: f64,
}

/// One iteration of the dynamics.
pub fn step<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, s: &BundleState, cfg: &SolverConfig) -> Result<StepOutcome> {
    let dx = x_direction(m, obj, s);
    let plane = if cfg.dense_operator && cfg.variant == Variant::Projector && s.k() > 0 {
        let dp = p_direction(m, obj, s)?;
        PlaneDirection { lift: &dp * s.frame(), norm: dp.norm() }
    } else {
        plane_direction(m, obj, s, cfg.variant)?
    };
    let default = m.default_retraction();
    let (kind, update, route) = match (cfg.retraction, cfg.variant) {
        (RetractionMode::Bundle, Variant::Projector) => (default, PlaneUpdate::Exponential, PlaneRoute::Projector),
        (RetractionMode::Bundle, Variant::Representative) => (default, PlaneUpdate::Exponential, PlaneRoute::Representative),
        (RetractionMode::Simple, Variant::Projector) => {
            (cfg.x_retraction.unwrap_or(default), PlaneUpdate::Exponential, PlaneRoute::Projector)
        }
        (RetractionMode::Simple, Variant::Representative) => {
            (cfg.x_retraction.unwrap_or(default), PlaneUpdate::Additive, PlaneRoute::Representative)
        }
    };
    let state = bundle::transport_retract(m, s, &dx, &plane.lift, cfg.eta_x, cfg.eta_p, kind, update, route)?;
    Ok(StepOutcome { state, dx_norm: dx.norm(), dp_norm: plane.norm })
}

fn ratio(n: f64, n0: f64) -> f64 {
    if n0 > 0.0 {
        n / n0
    } else if n == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Runs the dynamics from `s0`.
pub fn solve<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, s0: &BundleState, cfg: &SolverConfig) -> Result<RunRecord> {
    cfg.validate(m.dim())?;
    if s0.k() != cfg.k {
        return Err(Error::invalid(format!("initial plane has rank {}, configuration asks for {}", s0.k(), cfg.k)));
    }
    s0.check(m)?;
    let maxit = cfg.maxit.unwrap_or(usize::MAX);
    let mut s = s0.clone();
    let mut rx = vec![f64::INFINITY];
    let mut rp = vec![f64::INFINITY];
    let mut norms0 = (0.0, 0.0);
    let mut t = 0usize;
    let mut diagnostic = None;
    while t < maxit && rx[t].max(rp[t]) > cfg.tol {
        let out = match step(m, obj, &s, cfg) {
            Ok(o) => o,
            Err(Error::RetractionDomain(msg)) => {
                diagnostic = Some(format!("retraction failed at iteration {t}: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        if !(out.dx_norm.is_finite() && out.dp_norm.is_finite() && numeric::is_finite(out.state.x.ambient())) {
            return Err(Error::Diverged(t));
        }
        if t == 0 {
            norms0 = (out.dx_norm, out.dp_norm);
            rx.push(1.0);
            rp.push(1.0);
        } else {
            rx.push(ratio(out.dx_norm, norms0.0));
            rp.push(ratio(out.dp_norm, norms0.1));
        }
        s = out.state;
        t += 1;
        if cfg.check_invariants {
            s.check(m)?;
        }
    }
    let converged = diagnostic.is_none() && rx[t].max(rp[t]) <= cfg.tol;
    let (terminal_spectrum, classification) = if cfg.compute_spectrum {
        let spec = terminal_spectrum(m, obj, &s.x)?;
        let class = classify_spectrum(&spec);
        (Some(spec), Some(class))
    } else {
        (None, None)
    };
    let grad_norm = manifolds::riemannian_gradient(m, obj, &s.x).norm();
    Ok(RunRecord {
        terminal_value: obj.value(s.x.ambient()),
        terminal: s,
        iterations: t,
        r_x_history: rx,
        r_p_history: rp,
        converged,
        terminal_spectrum,
        classification,
        grad_norm,
        diagnostic,
    })
}

/// Ascending eigenvalues of the Riemannian Hessian at x.
pub fn terminal_spectrum<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, x: &Point) -> Result<Vec<f64>> {
    let basis = m.tangent_basis(x)?;
    let h = manifolds::hessian_in_basis(m, obj, x, &basis)?;
    let (vals, _) = numeric::sym_eig_dense(&h)?;
    Ok(vals.iter().copied().collect())
}

/// State at `x` whose plane spans the k lowest Hessian eigendirections.
pub fn lowest_plane<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, x: &Point, k: usize) -> Result<BundleState> {
    if k > m.dim() {
        return Err(Error::invalid(format!("k = {k} exceeds the manifold dimension {}", m.dim())));
    }
    let basis = m.tangent_basis(x)?;
    let h = manifolds::hessian_in_basis(m, obj, x, &basis)?;
    let (_, vecs) = numeric::sym_eig_dense(&h)?;
    let tangents: Vec<DMatrix<f64>> = (0..k)
        .map(|j| {
            let c = vecs.matrix().column(j);
            basis.iter().zip(c.iter()).fold(DMatrix::zeros(basis[0].nrows(), basis[0].ncols()), |acc, (b, w)| acc + b * *w)
        })
        .collect();
    BundleState::from_tangents(m, x.clone(), &tangents)
}

/// Predicted contraction factors and step sizes at a nondegenerate index-k saddle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub q1: f64,
    /// Zero when there is no plane to track (k = 0 or k = d).
    pub q2: f64,
    pub eta_x_star: f64,
    pub eta_p_star: Option<f64>,
    pub kappa_x: f64,
    pub kappa_p: Option<f64>,
    pub lambda_min_abs: f64,
    pub lambda_max_abs: f64,
    /// λ_{k+1} − λ_k.
    pub gap: Option<f64>,
    /// λ_d − λ_1.
    pub spread: f64,
    pub observed_rate: Option<f64>,
}

impl RateReport {
    pub fn predicted(&self) -> f64 {
        self.q1.max(self.q2)
    }
}

pub fn rate_report(spectrum: &[f64], k: usize, eta_x: f64, eta_p: f64) -> Result<RateReport> {
    let d = spectrum.len();
    if d == 0 || k > d {
        return Err(Error::invalid(format!("need 0 <= k <= d with d > 0, got k={k}, d={d}")));
    }
    if spectrum.iter().any(|l| !l.is_finite()) || spectrum.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("spectrum must be finite and ascending"));
    }
    let below = k == 0 || spectrum[k - 1] < 0.0;
    let above = k == d || spectrum[k] > 0.0;
    if !(below && above) {
        return Err(Error::Degenerate(format!("spectrum is not a nondegenerate index-{k} spectrum")));
    }
    let lmin = spectrum.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()));
    let lmax = spectrum.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let q1 = (1.0 - eta_x * lmin).abs().max((1.0 - eta_x * lmax).abs());
    let spread = spectrum[d - 1] - spectrum[0];
    let (gap, q2, eta_p_star, kappa_p) = if k == 0 || k == d {
        (None, 0.0, None, None)
    } else {
        let gap = spectrum[k] - spectrum[k - 1];
        let q2 = (1.0 - eta_p * gap).abs().max((1.0 - eta_p * spread).abs());
        (Some(gap), q2, Some(2.0 / (gap + spread)), Some(spread / gap))
    };
    Ok(RateReport {
        q1,
        q2,
        eta_x_star: 2.0 / (lmin + lmax),
        eta_p_star,
        kappa_x: lmax / lmin,
        kappa_p,
        lambda_min_abs: lmin,
        lambda_max_abs: lmax,
        gap,
        spread,
        observed_rate: None,
    })
}

/// Geometric factor exp(b) of the least-squares fit log r_t ≈ a + b·t.
pub fn fit_rate(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 residuals, got {}", residuals.len())));
    }
    if residuals.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InsufficientData("residuals must be finite and positive".into()));
    }
    let n = residuals.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ym = residuals.iter().map(|r| r.ln()).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, r) in residuals.iter().enumerate() {
        let dt = t as f64 - tm;
        num += dt * (r.ln() - ym);
        den += dt * dt;
    }
    Ok((num / den).exp())
}

/// Per-iteration factor of max(r_x, r_P) over the last `window` iterations.
pub fn measure_rate(record: &RunRecord, window: usize) -> Result<f64> {
    // Index 0 holds the sentinel.
    let hist = residual_max(&record.r_x_history, &record.r_p_history);
    let iters = hist.len().saturating_sub(1);
    if window < 2 || iters < window + 5 {
        return Err(Error::InsufficientData(format!("{iters} iterations, need at least {}", window.max(2) + 5)));
    }
    fit_rate(&hist[hist.len() - window..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{Grassmann, Sphere};
    use crate::objectives::{make_lep, quadratic, LepGrassmann};

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn sphere_setup() -> (Sphere, crate::objectives::CallbackObjective) {
        (Sphere::new(3).unwrap(), quadratic(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[1.0, 2.0, 4.0]))))
    }

    #[test]
    fn reflection_cases() {
        let (m, f) = sphere_setup();
        let x = m.point(col(&[0.6, 0.8, 0.0])).unwrap();
        let g = manifolds::riemannian_gradient(&m, &f, &x);
        let along = BundleState::from_tangents(&m, x.clone(), std::slice::from_ref(&g)).unwrap();
        assert!((x_direction(&m, &f, &along) - &g).norm() < 1e-14);
        let across = BundleState::from_frame(&m, x.clone(), col(&[0.0, 0.0, 1.0])).unwrap();
        assert!((x_direction(&m, &f, &across) + &g).norm() < 1e-14);
        let u = col(&[-0.8, 0.6, 0.3]);
        let ru = reflect(&m, &along, &u);
        assert!((reflect(&m, &along, &ru) - &u).norm() < 1e-14);
        assert!((ru.norm() - u.norm()).abs() < 1e-14);
    }

    #[test]
    fn critical_point_gives_zero_direction() {
        let (m, f) = sphere_setup();
        let x = m.point(col(&[0.0, 1.0, 0.0])).unwrap();
        let s = BundleState::from_frame(&m, x, col(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(x_direction(&m, &f, &s).norm(), 0.0);
        // e1 is an eigenvector of the Hessian, so the plane is invariant.
        assert!(p_direction(&m, &f, &s).unwrap().norm() < 1e-14);
        assert!(p_direction_frame(&m, &f, &s).unwrap().norm() < 1e-14);
    }

    #[test]
    fn full_plane_has_zero_plane_direction() {
        let (m, f) = sphere_setup();
        let x = m.point(col(&[0.6, 0.8, 0.0])).unwrap();
        let frame = numeric::orth_complement(x.ambient());
        let s = BundleState::from_frame(&m, x, frame).unwrap();
        assert!(p_direction(&m, &f, &s).unwrap().norm() < 1e-13);
    }

    #[test]
    fn frame_and_dense_plane_directions_agree_on_lep() {
        let spec = make_lep(6, 2, 1.2, 3).unwrap();
        let f = LepGrassmann::new(&spec.a, 0.5);
        let g = Grassmann::new(6, 2).unwrap();
        let mut rng = crate::random::stream(5, 0);
        let x = g.random_point(&mut rng).unwrap();
        let t1 = g.random_tangent(&x, &mut rng);
        let t2 = g.random_tangent(&x, &mut rng);
        let s = BundleState::from_tangents(&g, x, &[t1, t2]).unwrap();
        let dense = p_direction(&g, &f, &s).unwrap();
        let frame = p_direction_frame(&g, &f, &s).unwrap();
        assert!((&dense - &frame).norm() < 1e-10 * (1.0 + dense.norm()));
        let p = s.projector().unwrap().into_inner();
        assert!((&dense * &p + &p * &dense - &dense).norm() < 1e-9);
    }

    #[test]
    fn sphere_index_one_saddle_is_found() {
        let (m, f) = sphere_setup();
        let x = m.point(col(&[0.5, 0.7, 0.3]).normalize()).unwrap();
        let v = m.project(&x, &col(&[0.2, -0.3, 1.0]));
        let s = BundleState::from_tangents(&m, x, &[v]).unwrap();
        let cfg = SolverConfig { maxit: Some(5000), tol: 1e-10, ..SolverConfig::default() }.with_eta(0.2);
        let rec = solve(&m, &f, &s, &cfg).unwrap();
        assert!(rec.converged);
        assert!((rec.terminal.x.ambient()[1].abs() - 1.0).abs() < 1e-8);
        assert_eq!(rec.classified_index(), Some(1));
        assert!((rec.terminal_value - 1.0).abs() < 1e-10);
        assert_eq!(rec.r_x_history[0], f64::INFINITY);
        assert_eq!(rec.r_x_history[1], 1.0);
    }

    #[test]
    fn exact_saddle_is_a_fixed_point() {
        let (m, f) = sphere_setup();
        let x = m.point(col(&[0.0, 1.0, 0.0])).unwrap();
        let s = BundleState::from_frame(&m, x, col(&[1.0, 0.0, 0.0])).unwrap();
        let cfg = SolverConfig::default().with_eta(0.2);
        let out = step(&m, &f, &s, &cfg).unwrap();
        assert!((out.state.x.ambient() - s.x.ambient()).norm() < 1e-10);
        assert!(out.state.plane_distance(&s) < 1e-10);
        let rec = solve(&m, &f, &s, &cfg).unwrap();
        assert!(rec.converged);
        assert_eq!(rec.iterations, 2);
    }

    #[test]
    fn gradient_descent_when_k_is_zero() {
        let (m, f) = sphere_setup();
        let x = m.point(col(&[0.5, 0.7, 0.3]).normalize()).unwrap();
        let s = BundleState::from_frame(&m, x, DMatrix::zeros(3, 0)).unwrap();
        let cfg = SolverConfig { k: 0, tol: 1e-10, ..SolverConfig::default() }.with_eta(0.2);
        let rec = solve(&m, &f, &s, &cfg).unwrap();
        assert!(rec.converged);
        assert_eq!(rec.classified_index(), Some(0));
        assert!((rec.terminal_value - 0.5).abs() < 1e-10);
    }

    #[test]
    fn config_validation() {
        let (m, f) = sphere_setup();
        let x = m.point(col(&[1.0, 0.0, 0.0])).unwrap();
        let s = BundleState::from_frame(&m, x, col(&[0.0, 1.0, 0.0])).unwrap();
        assert!(solve(&m, &f, &s, &SolverConfig::default().with_eta(0.0)).is_err());
        assert!(solve(&m, &f, &s, &SolverConfig { tol: 0.0, ..SolverConfig::default() }).is_err());
        assert!(solve(&m, &f, &s, &SolverConfig { k: 3, ..SolverConfig::default() }).is_err());
        assert!(solve(&m, &f, &s, &SolverConfig { k: 2, ..SolverConfig::default() }).is_err());
    }

    #[test]
    fn rate_report_symmetric_spectrum() {
        let r = rate_report(&[-1.0, 1.0], 1, 1.0, 1.0).unwrap();
        assert_eq!(r.eta_x_star, 1.0);
        assert_eq!(r.q1, 0.0);
        assert_eq!(r.kappa_x, 1.0);
        assert!(matches!(rate_report(&[-1.0, 0.0, 1.0], 1, 1.0, 1.0), Err(Error::Degenerate(_))));
        assert!(matches!(rate_report(&[1.0, 2.0], 1, 1.0, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rate_fit_on_geometric_sequence() {
        let seq: Vec<f64> = (0..40).map(|t| 3.0 * 0.9f64.powi(t)).collect();
        assert!((fit_rate(&seq).unwrap() - 0.9).abs() < 1e-9);
        let grow: Vec<f64> = (0..40).map(|t| 1.1f64.powi(t)).collect();
        assert!(fit_rate(&grow).unwrap() > 1.0);
    }

    #[test]
    fn measure_rate_needs_enough_iterations() {
        let (m, _) = sphere_setup();
        let x = m.point(col(&[1.0, 0.0, 0.0])).unwrap();
        let mut rec = RunRecord {
            terminal: BundleState::from_frame(&m, x, col(&[0.0, 1.0, 0.0])).unwrap(),
            iterations: 3,
            r_x_history: vec![f64::INFINITY, 1.0, 0.5, 0.25],
            r_p_history: vec![f64::INFINITY, 1.0, 0.5, 0.25],
            converged: true,
            terminal_spectrum: None,
            classification: None,
            terminal_value: 0.0,
            grad_norm: 0.0,
            diagnostic: None,
        };
        assert!(matches!(measure_rate(&rec, 10), Err(Error::InsufficientData(_))));
        rec.r_x_history = std::iter::once(f64::INFINITY).chain((0..30).map(|t| 0.8f64.powi(t))).collect();
        rec.r_p_history = rec.r_x_history.iter().map(|r| r * 0.5).collect();
        assert!((measure_rate(&rec, 20).unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn classification_counts_degenerate_modes_separately() {
        let c = classify_spectrum(&[-2.0, -1e-9, 0.0, 1.0, 3.0]);
        assert_eq!((c.index, c.degenerate), (1, 2));
    }
}
