//! Randomized property suites over the geometry, bundle, solver and oracle layers.
//!
//! Each suite draws its inputs from seeded streams and reports the worst
//! observed value per property against a fixed bound. The CLI `check`
//! subcommand and the test suites both run these.

use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::RngCore;
use serde::Serialize;

use crate::bundle::{self, BundleDirection, BundleState, PlaneRoute};
use crate::error::Result;
use crate::harness::{self, Experiment, ExperimentConfig, RhfFixture};
use crate::manifolds::{self, FixedRank, Flat, Grassmann, Manifold, Point, RetractionKind, Sphere, Stiefel};
use crate::numeric::{self, Frame, SymMatrix};
use crate::objectives::{make_lep, CallbackObjective, LepGrassmann, Objective};
use crate::oracle;
use crate::random;
use crate::saddle::{self, RetractionMode, SolverConfig, Variant};

/// Stream id for check inputs, disjoint from campaign initialization.
const CHECK_STREAM: u64 = 0x636b;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

impl Bound {
    fn holds(self, v: f64) -> bool {
        match self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
        }
    }

    fn merge(self, worst: f64, v: f64) -> f64 {
        if worst.is_nan() || v.is_nan() {
            return f64::NAN;
        }
        match self {
            Bound::AtMost(_) => worst.max(v),
            Bound::AtLeast(_) => worst.min(v),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(b) => write!(f, "<= {b:e}"),
            Bound::AtLeast(b) => write!(f, ">= {b}"),
        }
    }
}

/// Worst observed value of one property over all trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: String,
    pub name: String,
    pub trials: usize,
    pub observed: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: worst {:.3e} ({}) over {} trials",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.observed,
            self.bound,
            self.trials
        )
    }
}

/// Accumulates worst values per property.
#[derive(Debug)]
pub struct Checks {
    suite: String,
    items: Vec<CheckOutcome>,
}

impl Checks {
    pub fn new(suite: impl Into<String>) -> Self {
        Checks { suite: suite.into(), items: Vec::new() }
    }

    /// Records one trial; an infinite order counts as exact.
    pub fn record(&mut self, name: &str, value: f64, bound: Bound) {
        if let Some(item) = self.items.iter_mut().find(|i| i.name == name) {
            item.observed = bound.merge(item.observed, value);
            item.trials += 1;
        } else {
            self.items.push(CheckOutcome { suite: self.suite.clone(), name: name.to_string(), trials: 1, observed: value, bound, pass: false });
        }
    }

    pub fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.record(name, value, Bound::AtMost(bound));
    }

    pub fn at_least(&mut self, name: &str, value: f64, bound: f64) {
        self.record(name, value, Bound::AtLeast(bound));
    }

    pub fn finish(mut self) -> Vec<CheckOutcome> {
        for item in &mut self.items {
            item.pass = item.bound.holds(item.observed);
        }
        self.items
    }
}

fn unit(a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.norm();
    a / n
}

/// Observed order of a defect e(h) ~ C·h^q from two step sizes. Exact maps give +∞.
pub fn observed_order(e1: f64, h1: f64, e2: f64, h2: f64) -> f64 {
    if e1 <= 1e-13 && e2 <= 1e-13 {
        f64::INFINITY
    } else {
        (e1 / e2).ln() / (h1 / h2).ln()
    }
}

/// Least-squares slope of log e against log h.
fn fitted_order(hs: &[f64], es: &[f64]) -> f64 {
    if es.iter().all(|&e| e <= 1e-13) {
        return f64::INFINITY;
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// f(X) = ½ vec(X)ᵀ A vec(X) + ⟨B, X⟩ with Gaussian A (symmetric) and B.
pub fn random_quadratic(rows: usize, cols: usize, seed: u64) -> CallbackObjective {
    use std::sync::Arc;
    let mut rng = random::stream(seed, CHECK_STREAM + 1);
    let a = Arc::new(random::gaussian_sym(&mut rng, rows * cols));
    let b = Arc::new(random::gaussian(&mut rng, rows, cols));
    let (a1, a2, a3, b1) = (a.clone(), a.clone(), a, b.clone());
    CallbackObjective {
        value: Arc::new(move |x| {
            let v = numeric::vec(x);
            0.5 * v.dot(&(&*a1 * &v)) + b1.dot(x)
        }),
        egrad: Arc::new(move |x| numeric::unvec((&*a2 * numeric::vec(x)).as_slice(), rows, cols) + &*b),
        ehess_vec: Some(Arc::new(move |_x, v| numeric::unvec((&*a3 * numeric::vec(v)).as_slice(), rows, cols))),
    }
}

/// Random bundle tangent of unit Sasaki norm, as a combination of the orthonormal basis.
fn random_bundle_direction<M: Manifold + ?Sized>(m: &M, s: &BundleState, rng: &mut dyn RngCore) -> Result<BundleDirection> {
    let basis = bundle::tangent_basis(m, s)?;
    let coeffs = unit(random::gaussian(rng, basis.len(), 1));
    let (r, c) = m.ambient_shape();
    let n = r * c;
    let mut delta = DMatrix::zeros(r, c);
    let mut big = DMatrix::zeros(n, n);
    for (w, b) in coeffs.iter().zip(&basis) {
        delta += &b.delta * *w;
        big += &b.big_delta * *w;
    }
    Ok(BundleDirection { base: s.clone(), delta, big_delta: big })
}

fn random_state<M: Manifold + ?Sized>(m: &M, k: usize, rng: &mut dyn RngCore) -> Result<BundleState> {
    let x = m.random_point(rng)?;
    let tangents: Vec<DMatrix<f64>> = (0..k).map(|_| m.random_tangent(&x, rng)).collect();
    BundleState::from_tangents(m, x, &tangents)
}

/// Projection and second fundamental form properties at one random point.
fn projection_properties<M: Manifold + ?Sized>(m: &M, x: &Point, rng: &mut dyn RngCore, out: &mut Checks) {
    let (r, c) = m.ambient_shape();
    let name = m.name();
    let a = random::gaussian(rng, r, c);
    let pa = m.project(x, &a);
    out.at_most(&format!("{name}: projection idempotency"), (m.project(x, &pa) - &pa).norm() / a.norm(), 1e-12);

    let u = unit(m.random_tangent(x, rng));
    let v = unit(m.random_tangent(x, rng));
    let ii = m.ii_closed(x, &u, &v);
    out.at_most(&format!("{name}: II normality"), m.project(x, &ii).norm() / (1.0 + ii.norm()), 1e-9);
    // Central difference of the projection field along the retraction curve.
    let h = 1e-5;
    let kind = m.default_retraction();
    let fd = match (m.retract_unchecked(x, &(&u * h), kind), m.retract_unchecked(x, &(&u * -h), kind)) {
        (Ok(xp), Ok(xm)) => (m.project(&xp, &v) - m.project(&xm, &v)) / (2.0 * h),
        _ => DMatrix::from_element(r, c, f64::NAN),
    };
    let scale = ii.norm().max(1.0);
    out.at_most(&format!("{name}: II finite difference"), (&fd - &ii).norm() / scale, 1e-4);
    out.at_most(&format!("{name}: II closed form vs projection derivative"), (m.dproj(x, &u, &v) - &ii).norm() / scale, 1e-9);
}

/// Re-represents a point by another frame of the same subspace.
type PointGauge<'a> = &'a dyn Fn(&Point, &mut dyn RngCore) -> Point;

/// Full geometry properties for manifolds that carry the solver.
fn manifold_properties<M: Manifold + ?Sized>(
    m: &M,
    kinds: &[RetractionKind],
    seed: u64,
    rotate_point: Option<PointGauge>,
    out: &mut Checks,
) -> Result<()> {
    let name = m.name();
    let mut rng = random::stream(seed, CHECK_STREAM);
    let k = 2.min(m.dim());
    let x = m.random_point(&mut rng)?;
    projection_properties(m, &x, &mut rng, out);
    let (r, c) = m.ambient_shape();

    let v = unit(m.random_tangent(&x, &mut rng));
    for &kind in kinds {
        let defect = |h: f64| match m.retract_unchecked(&x, &(&v * h), kind) {
            Ok(y) => (y.ambient() - x.ambient() - &v * h).norm(),
            Err(_) => f64::NAN,
        };
        out.at_least(&format!("{name}: retraction defect order ({kind:?})"), observed_order(defect(1e-3), 1e-3, defect(5e-4), 5e-4), 1.9);
    }

    let obj = random_quadratic(r, c, seed);
    let g = manifolds::riemannian_gradient(m, &obj, &x);
    let f0 = obj.value(x.ambient());
    let ts = [1e-3, 1e-4, 1e-5];
    let es: Vec<f64> = ts
        .iter()
        .map(|&t| match m.retract_unchecked(&x, &(&v * t), m.default_retraction()) {
            Ok(y) => (obj.value(y.ambient()) - f0 - t * g.dot(&v)).abs(),
            Err(_) => f64::NAN,
        })
        .collect();
    out.at_least(&format!("{name}: gradient Taylor order"), fitted_order(&ts, &es), 1.9);

    let u1 = unit(m.random_tangent(&x, &mut rng));
    let u2 = unit(m.random_tangent(&x, &mut rng));
    let h1 = manifolds::riemannian_hessian_vec(m, &obj, &x, &u1)?;
    let h2 = manifolds::riemannian_hessian_vec(m, &obj, &x, &u2)?;
    out.at_most(&format!("{name}: Hessian symmetry"), (u1.dot(&h2) - h1.dot(&u2)).abs(), 1e-8);

    let tangents: Vec<DMatrix<f64>> = (0..k).map(|_| m.random_tangent(&x, &mut rng)).collect();
    let s = BundleState::from_tangents(m, x.clone(), &tangents)?;
    let basis = bundle::tangent_basis(m, &s)?;
    out.at_most(
        &format!("{name}: bundle basis count defect"),
        (basis.len() as f64 - (m.dim() + k * (m.dim() - k)) as f64).abs(),
        0.0,
    );
    let mut worst: f64 = 0.0;
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate().skip(i) {
            let g = bundle::sasaki_inner(m, &s, bi, bj)?;
            worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    out.at_most(&format!("{name}: Sasaki orthonormality of the bundle basis"), worst, 1e-8);

    let dir = random_bundle_direction(m, &s, &mut rng)?;
    let p0 = s.frame() * s.frame().transpose();
    let mut ends = Vec::new();
    for route in [PlaneRoute::Projector, PlaneRoute::Representative] {
        let defect = |h: f64| match bundle::bundle_retract(m, &s, &dir, h, route) {
            Ok(t) => {
                let dx = t.x.ambient() - x.ambient() - &dir.delta * h;
                let dp = t.frame() * t.frame().transpose() - &p0 - &dir.big_delta * h;
                (dx.norm_squared() + dp.norm_squared()).sqrt()
            }
            Err(_) => f64::NAN,
        };
        out.at_least(&format!("{name}: bundle retraction defect order ({route:?})"), observed_order(defect(1e-3), 1e-3, defect(5e-4), 5e-4), 1.9);
        let zero = bundle::bundle_retract(m, &s, &dir, 0.0, route)?;
        out.at_most(
            &format!("{name}: zero-step bundle retraction ({route:?})"),
            (zero.x.ambient() - x.ambient()).norm().max(zero.plane_distance(&s)),
            1e-12,
        );
        ends.push(bundle::bundle_retract(m, &s, &dir, 0.1, route)?);
    }
    out.at_most(
        &format!("{name}: projector vs representative bundle retraction"),
        (ends[0].x.ambient() - ends[1].x.ambient()).norm().max(ends[0].plane_distance(&ends[1])),
        1e-8,
    );

    // Same plane through a rotated frame (and, where offered, a rotated point representation).
    let q = numeric::thin_qr(&random::gaussian(&mut rng, k, k))?.into_inner();
    let x_alt = match rotate_point {
        Some(rotate) => rotate(&x, &mut rng),
        None => x.clone(),
    };
    let s_alt = BundleState::from_frame(m, x_alt, s.frame() * &q)?;
    let u = unit(m.random_tangent(&x, &mut rng));
    let p = Frame::new(s.frame().clone())?.projector();
    let p_alt = Frame::new(s_alt.frame().clone())?.projector();
    let e1 = bundle::extended_ii(m, &s.x, &u, &p)?;
    let e2 = bundle::extended_ii(m, &s_alt.x, &u, &p_alt)?;
    let mut gauge = (e1 - e2).norm();
    let d_alt = BundleDirection { base: s_alt.clone(), ..dir.clone() };
    let n1 = bundle::sasaki_inner(m, &s, &dir, &dir)?;
    let n2 = bundle::sasaki_inner(m, &s_alt, &d_alt, &d_alt)?;
    gauge = gauge.max((n1 - n2).abs());
    for retraction in [RetractionMode::Bundle, RetractionMode::Simple] {
        for variant in [Variant::Projector, Variant::Representative] {
            let cfg = SolverConfig { k, eta_x: 0.3, eta_p: 0.3, retraction, variant, ..SolverConfig::default() };
            let a = saddle::step(m, &obj, &s, &cfg)?.state;
            let b = saddle::step(m, &obj, &s_alt, &cfg)?.state;
            gauge = gauge.max((a.x.ambient() - b.x.ambient()).norm()).max(a.plane_distance(&b));
        }
    }
    out.at_most(&format!("{name}: frame-gauge invariance"), gauge, 1e-10);
    Ok(())
}

/// Projection, II, retraction, bundle and Hessian properties on sphere, Stiefel,
/// Grassmann and flat spaces, plus projection and II on fixed-rank matrices.
pub fn geometry(trials: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Checks::new("geometry");
    let sphere = Sphere::new(5)?;
    let stiefel = Stiefel::new(4, 2)?;
    let grassmann = Grassmann::new(5, 2)?;
    let flat = Flat::new(3, 2)?;
    let fixed = FixedRank::new(4, 3, 2)?;
    let rotate = |x: &Point, rng: &mut dyn RngCore| {
        let y = x.frame().expect("Grassmann points carry a frame");
        let q = numeric::thin_qr(&random::gaussian(rng, y.ncols(), y.ncols())).expect("Gaussian square matrices are invertible");
        grassmann.point_from_frame(y * q.matrix()).expect("rotated frames stay orthonormal")
    };
    for seed in 0..trials {
        manifold_properties(&sphere, &[RetractionKind::Qr, RetractionKind::Exponential], seed, None, &mut out)?;
        manifold_properties(&stiefel, &[RetractionKind::Qr], seed, None, &mut out)?;
        manifold_properties(&grassmann, &[RetractionKind::Qr, RetractionKind::Exponential], seed, Some(&rotate), &mut out)?;
        manifold_properties(&flat, &[RetractionKind::Exponential], seed, None, &mut out)?;
        let mut rng = random::stream(seed, CHECK_STREAM);
        let x = fixed.random_point(&mut rng)?;
        projection_properties(&fixed, &x, &mut rng, &mut out);
    }
    Ok(out.finish())
}

/// Eigen, QR and SVD kernel properties.
pub fn numeric_kernels(trials: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Checks::new("numeric");
    for seed in 0..trials {
        let mut rng = random::stream(seed, CHECK_STREAM + 2);
        let n = 1 + (seed as usize * 37) % 128;
        let m = random::gaussian_sym(&mut rng, n);
        let (vals, vecs) = numeric::sym_eig(&SymMatrix::new(m.clone())?)?;
        let v = vecs.matrix();
        let recon = v * DMatrix::from_diagonal(&vals) * v.transpose();
        out.at_most("sym_eig reconstruction (relative)", (recon - &m).norm() / m.norm(), 1e-9);

        let rows = 2 + (seed as usize) % 9;
        let k = 1 + (seed as usize / 9) % rows;
        let a = random::gaussian(&mut rng, rows, k);
        let mix = random::gaussian(&mut rng, k, k);
        let q1 = numeric::thin_qr(&a)?.into_inner();
        let q2 = numeric::thin_qr(&(&a * mix))?.into_inner();
        out.at_most("thin_qr projector invariance", (&q1 * q1.transpose() - &q2 * q2.transpose()).norm(), 1e-10);

        // Rank-deficient inputs exercise the truncation.
        let rank = 1 + (seed as usize) % k;
        let b = random::gaussian(&mut rng, rows, rank) * random::gaussian(&mut rng, rank, k + 1);
        let svd = numeric::thin_svd(&b)?;
        let r = svd.rank();
        let ortho = (svd.q.transpose() * &svd.q - DMatrix::identity(r, r))
            .norm()
            .max((svd.u.transpose() * &svd.u - DMatrix::identity(r, r)).norm());
        out.at_most("thin_svd orthogonality", ortho, 1e-12);
        let recon = &svd.q * DMatrix::from_diagonal(&svd.sigma) * svd.u.transpose();
        out.at_most("thin_svd reconstruction (relative)", (recon - &b).norm() / b.norm(), 1e-12);
        out.at_most("thin_svd rank defect", (r as f64 - rank as f64).abs(), 0.0);
    }
    Ok(out.finish())
}

/// Objective properties: J/K self-adjointness on the given fixtures and LEP Hessian routes.
pub fn objectives(trials: u64, fixtures: &[PathBuf]) -> Result<Vec<CheckOutcome>> {
    let mut out = Checks::new("objectives");
    for path in fixtures {
        let fx = RhfFixture::load(path)?;
        let n = fx.objective.norb();
        for seed in 0..trials {
            let mut rng = random::stream(seed, CHECK_STREAM + 3);
            let a = random::gaussian_sym(&mut rng, n);
            let b = random::gaussian_sym(&mut rng, n);
            let scale = a.norm() * b.norm();
            let j = (fx.objective.coulomb(&a).dot(&b) - a.dot(&fx.objective.coulomb(&b))).abs() / scale;
            let k = (fx.objective.exchange(&a).dot(&b) - a.dot(&fx.objective.exchange(&b))).abs() / scale;
            out.at_most("J and K self-adjointness", j.max(k), 1e-10);
        }
    }
    let spec = make_lep(10, 2, 1.01, 0)?;
    let g = Grassmann::new(10, 2)?;
    let f = LepGrassmann::new(&spec.a, 0.5);
    for seed in 0..trials {
        let mut rng = random::stream(seed, CHECK_STREAM + 4);
        let x = g.random_point(&mut rng)?;
        let v = unit(g.random_tangent(&x, &mut rng));
        let generic = manifolds::riemannian_hessian_vec_generic(&g, &f, &x, &v)?;
        out.at_most("LEP closed-form vs generic Hessian", (f.closed_form_hessian(&x, &v) - generic).norm(), 1e-8);
    }
    let (vals, _) = numeric::sym_eig(&spec.a)?;
    let worst = vals.iter().zip(&spec.sigma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.at_most("LEP spectrum by construction", worst, 1e-12);
    Ok(out.finish())
}

/// Solver properties: reflection, tangency of d_P, feasibility along runs,
/// fixed points, gauge invariance of whole runs, first-order descent.
pub fn dynamics(trials: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Checks::new("dynamics");
    let sphere = Sphere::new(5)?;
    let stiefel = Stiefel::new(4, 2)?;
    let grassmann = Grassmann::new(5, 2)?;
    for seed in 0..trials {
        dynamics_on(&sphere, seed, &mut out)?;
        dynamics_on(&stiefel, seed, &mut out)?;
        dynamics_on(&grassmann, seed, &mut out)?;
    }

    // One step on the large instance keeps the state feasible.
    let spec = make_lep(64, 8, 1.01, 0)?;
    let g = Grassmann::new(64, 8)?;
    let f = LepGrassmann::new(&spec.a, 0.5);
    for seed in 0..trials.min(5) {
        let s = harness::init_random(&g, 1, seed)?;
        let cfg = SolverConfig { k: 1, ..SolverConfig::default() }.with_eta(4.0);
        let next = saddle::step(&g, &f, &s, &cfg)?.state;
        let (fx, ortho, range) = next.feasibility_residuals(&g);
        out.at_most("one step on Gr(64, 8) stays feasible", fx.max(ortho).max(range), 1e-10);
    }
    Ok(out.finish())
}

fn dynamics_on<M: Manifold + ?Sized>(m: &M, seed: u64, out: &mut Checks) -> Result<()> {
    let name = m.name();
    let mut rng = random::stream(seed, CHECK_STREAM + 5);
    let k = 2.min(m.dim() - 1);
    let s = random_state(m, k, &mut rng)?;
    let (r, c) = m.ambient_shape();
    let obj = random_quadratic(r, c, seed ^ 0x5eed);

    let u = m.random_tangent(&s.x, &mut rng);
    let w = m.random_tangent(&s.x, &mut rng);
    let ru = saddle::reflect(m, &s, &u);
    let rw = saddle::reflect(m, &s, &w);
    out.at_most(&format!("{name}: reflection is an involution"), (saddle::reflect(m, &s, &ru) - &u).norm() / u.norm(), 1e-12);
    out.at_most(&format!("{name}: reflection is an isometry"), (ru.dot(&rw) - u.dot(&w)).abs() / (u.norm() * w.norm()), 1e-12);

    // Runs in every mode: feasibility and d_P tangency at each iterate.
    for retraction in [RetractionMode::Bundle, RetractionMode::Simple] {
        for variant in [Variant::Projector, Variant::Representative] {
            let cfg = SolverConfig { k, eta_x: 0.1, eta_p: 0.1, retraction, variant, ..SolverConfig::default() };
            let mut t = s.clone();
            for _ in 0..10 {
                let dp = saddle::p_direction(m, &obj, &t)?;
                let p = t.frame() * t.frame().transpose();
                let double = &p * (&p * &dp - &dp * &p) - (&p * &dp - &dp * &p) * &p;
                out.at_most(&format!("{name}: d_P tangency"), (double - &dp).norm() / (1.0 + dp.norm()), 1e-9);
                t = saddle::step(m, &obj, &t, &cfg)?.state;
                let (fx, ortho, range) = t.feasibility_residuals(m);
                out.at_most(&format!("{name}: feasibility along runs"), fx.max(ortho).max(range), 1e-9);
            }
        }
    }

    // Projector iterates from V and VQ coincide.
    let q = numeric::thin_qr(&random::gaussian(&mut rng, k, k))?.into_inner();
    let mut a = s.clone();
    let mut b = BundleState::from_frame(m, s.x.clone(), s.frame() * q)?;
    let cfg = SolverConfig { k, eta_x: 0.1, eta_p: 0.1, variant: Variant::Projector, retraction: RetractionMode::Bundle, ..SolverConfig::default() };
    let mut gap: f64 = 0.0;
    for _ in 0..10 {
        a = saddle::step(m, &obj, &a, &cfg)?.state;
        b = saddle::step(m, &obj, &b, &cfg)?.state;
        gap = gap.max((a.x.ambient() - b.x.ambient()).norm()).max(a.plane_distance(&b));
    }
    out.at_most(&format!("{name}: gauge invariance of projector runs"), gap, 1e-10);

    // Gradient orthogonal to the plane: the step descends to first order.
    let grad = manifolds::riemannian_gradient(m, &obj, &s.x);
    let gv = numeric::vec(&grad);
    let raw: Vec<DMatrix<f64>> = (0..k)
        .map(|_| {
            let t = numeric::vec(&m.random_tangent(&s.x, &mut rng));
            let t = &t - &gv * (gv.dot(&t) / gv.norm_squared());
            numeric::unvec(t.as_slice(), r, c)
        })
        .collect();
    let s_perp = BundleState::from_tangents(m, s.x.clone(), &raw)?;
    let cfg = SolverConfig { k, ..SolverConfig::default() }.with_eta(1e-4);
    let next = saddle::step(m, &obj, &s_perp, &cfg)?.state;
    let decrease = obj.value(s.x.ambient()) - obj.value(next.x.ambient());
    // Relative to the first-order prediction η‖grad‖².
    out.at_least(&format!("{name}: first-order descent with grad orthogonal to the plane"), decrease / (1e-4 * grad.norm_squared()), 0.5);
    Ok(())
}

/// Catalog structure and fixed points on the n=10, p=2 instance.
pub fn catalog() -> Result<Vec<CheckOutcome>> {
    let mut out = Checks::new("catalog");
    let spec = make_lep(10, 2, 1.01, 0)?;
    let cat = oracle::enumerate_catalog(&spec)?;
    let d = 2 * 8;
    let expected = [1usize, 1, 2, 2, 3, 3, 4, 4, 5, 4, 4, 3, 3, 2, 2, 1, 1];
    let mut defect = 0usize;
    for (m, &want) in expected.iter().enumerate() {
        defect += cat.by_index(m).count().abs_diff(want);
    }
    out.at_most("per-index entry counts", defect as f64, 0.0);
    let min = cat.entries.iter().min_by(|a, b| a.value.total_cmp(&b.value)).expect("nonempty catalog");
    let max = cat.entries.iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("nonempty catalog");
    out.at_most("minimizer has index 0", min.index as f64, 0.0);
    out.at_least("maximizer has index p(n-p)", max.index as f64, d as f64);

    let g = Grassmann::new(10, 2)?;
    let f = LepGrassmann::new(&spec.a, 0.5);
    for e in &cat.entries {
        let x = g.point_from_frame(e.frame.clone())?;
        let s = saddle::lowest_plane(&g, &f, &x, e.index)?;
        out.at_most("x_direction vanishes at catalog points", saddle::x_direction(&g, &f, &s).norm(), 1e-10);
        out.at_most("p_direction vanishes at catalog points", saddle::p_direction(&g, &f, &s)?.norm(), 1e-10);
        let cfg = SolverConfig { k: e.index, ..SolverConfig::default() }.with_eta(25.0);
        let next = saddle::step(&g, &f, &s, &cfg)?.state;
        out.at_most("one step from a catalog point", (next.x.ambient() - s.x.ambient()).norm().max(next.plane_distance(&s)), 1e-10);
        let spectrum = saddle::terminal_spectrum(&g, &f, &x)?;
        out.at_most("classified index matches the count", (saddle::classify_spectrum(&spectrum).index as f64 - e.index as f64).abs(), 0.0);
    }
    Ok(out.finish())
}

/// Campaign determinism across worker counts and aggregate consistency.
pub fn campaigns() -> Result<Vec<CheckOutcome>> {
    let mut out = Checks::new("campaigns");
    let base = ExperimentConfig {
        experiment: Experiment::LepAllIndex,
        ks: vec![0, 1, 2],
        seeds: 6,
        eta_x: 25.0,
        eta_p: 25.0,
        ..ExperimentConfig::default()
    };
    let one = harness::run_campaign(&ExperimentConfig { threads: Some(1), ..base.clone() })?;
    let two = harness::run_campaign(&ExperimentConfig { threads: Some(2), ..base })?;
    out.at_most("rows differ across worker counts", if one.rows == two.rows { 0.0 } else { 1.0 }, 0.0);
    out.at_most("aggregates differ from recomputation", if harness::aggregate(&one.rows) == one.aggregates { 0.0 } else { 1.0 }, 0.0);
    Ok(out.finish())
}

/// Every suite. `fixtures` feeds the RHF checks.
pub fn run_all(trials: u64, fixtures: &[PathBuf]) -> Result<Vec<CheckOutcome>> {
    let mut all = numeric_kernels(trials)?;
    all.extend(geometry(trials)?);
    all.extend(objectives(trials.min(100), fixtures)?);
    all.extend(dynamics(trials.min(100))?);
    all.extend(catalog()?);
    all.extend(campaigns()?);
    Ok(all)
}
