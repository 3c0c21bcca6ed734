//! The Grassmann bundle Gr_k(TM) = {(x, P) : P a rank-k projector onto a k-plane of T_x M}.
//!
//! A state stores the plane through an orthonormal frame V (N×k, columns are
//! vectorized tangent vectors, N the ambient dimension); P = VVᵀ is formed on
//! demand for N ≤ [`tol::DENSE_AMBIENT_MAX`]. Bundle tangents (δ, Δ) carry a
//! dense symmetric N×N Δ and are therefore restricted to small ambient spaces;
//! the solver works with horizontal lifts ΔV instead.
//!
//! Tangency: Δ = Δ_x + ÎI_x(δ, P) with Δ_x = T Δ T, T = Proj_{T_x M}.
//! Sasaki metric: ⟨(δ,Δ),(δ̃,Δ̃)⟩ = ⟨δ,δ̃⟩ + ⟨Δ_x,Δ̃_x⟩.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifolds::exp_frame;
use crate::manifolds::{self, Manifold, Point, RetractionKind};
use crate::numeric::{self, tol, Frame, Projector};

#[derive(Debug, Clone, PartialEq)]
pub struct BundleState {
    pub x: Point,
    frame: DMatrix<f64>,
}

impl BundleState {
    /// State from an orthonormal N×k frame whose columns are tangent at x.
    pub fn from_frame<M: Manifold + ?Sized>(m: &M, x: Point, frame: DMatrix<f64>) -> Result<Self> {
        if frame.nrows() != m.ambient_dim() {
            return Err(Error::invalid(format!("frame has {} rows, ambient dimension is {}", frame.nrows(), m.ambient_dim())));
        }
        if frame.ncols() > m.dim() {
            return Err(Error::invalid(format!("plane rank {} exceeds manifold dimension {}", frame.ncols(), m.dim())));
        }
        let s = BundleState { x, frame };
        s.check(m)?;
        Ok(s)
    }

    /// State from a projector on the vectorized ambient space.
    pub fn from_projector<M: Manifold + ?Sized>(m: &M, x: Point, p: &Projector) -> Result<Self> {
        let v = p.frame()?.into_inner();
        Self::from_frame(m, x, v)
    }

    /// State with the plane spanned by the given tangent vectors (orthonormalized).
    pub fn from_tangents<M: Manifold + ?Sized>(m: &M, x: Point, tangents: &[DMatrix<f64>]) -> Result<Self> {
        let n = m.ambient_dim();
        let mut raw = DMatrix::zeros(n, tangents.len());
        for (j, t) in tangents.iter().enumerate() {
            raw.set_column(j, &numeric::vec(&m.project(&x, t)));
        }
        let frame = numeric::thin_qr(&raw)?.into_inner();
        Self::from_frame(m, x, frame)
    }

    pub(crate) fn new_unchecked(x: Point, frame: DMatrix<f64>) -> Self {
        BundleState { x, frame }
    }

    pub fn k(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    /// i-th frame column reshaped to the ambient shape.
    pub fn plane_vector<M: Manifold + ?Sized>(&self, m: &M, i: usize) -> DMatrix<f64> {
        let (r, c) = m.ambient_shape();
        numeric::unvec(self.frame.column(i).as_slice(), r, c)
    }

    pub fn plane_vectors<M: Manifold + ?Sized>(&self, m: &M) -> Vec<DMatrix<f64>> {
        (0..self.k()).map(|i| self.plane_vector(m, i)).collect()
    }

    /// P = VVᵀ (N×N).
    pub fn projector(&self) -> Result<Projector> {
        if self.frame.nrows() > tol::DENSE_AMBIENT_MAX {
            return Err(Error::invalid("ambient dimension too large to materialize the plane projector"));
        }
        Ok(Frame::new_unchecked(self.frame.clone()).projector())
    }

    /// Feasibility: x on M, frame orthonormal, every column tangent at x.
    pub fn feasibility_residuals<M: Manifold + ?Sized>(&self, m: &M) -> (f64, f64, f64) {
        let fx = m.feasibility_residual(&self.x);
        let ortho = numeric::orthonormality_residual(&self.frame);
        let mut range = 0.0f64;
        for v in self.plane_vectors(m) {
            range = range.max((m.project(&self.x, &v) - &v).norm());
        }
        (fx, ortho, range)
    }

    pub fn check<M: Manifold + ?Sized>(&self, m: &M) -> Result<()> {
        let (fx, ortho, range) = self.feasibility_residuals(m);
        if !(fx <= tol::FEASIBILITY) {
            return Err(Error::InfeasiblePoint(fx));
        }
        if !(ortho <= tol::BUNDLE_FRAME) {
            return Err(Error::invalid(format!("plane frame not orthonormal (residual {ortho:.3e})")));
        }
        if !(range <= tol::BUNDLE_RANGE) {
            return Err(Error::NotTangent(range));
        }
        Ok(())
    }

    /// Frobenius distance between the plane projectors of two states, without forming them.
    pub fn plane_distance(&self, other: &BundleState) -> f64 {
        projector_distance(&self.frame, &other.frame)
    }
}

/// ‖VVᵀ − WWᵀ‖_F for orthonormal V, W, as √(‖(I−VVᵀ)W‖² + ‖(I−WWᵀ)V‖²).
/// The equivalent √(k_V + k_W − 2‖VᵀW‖²) cancels down to about 1e-8.
pub fn projector_distance(v: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let rw = w - v * (v.transpose() * w);
    let rv = v - w * (w.transpose() * v);
    (rw.norm_squared() + rv.norm_squared()).sqrt()
}

/// A tangent (δ, Δ) to the bundle at `base`; Δ is symmetric N×N.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleDirection {
    pub base: BundleState,
    pub delta: DMatrix<f64>,
    pub big_delta: DMatrix<f64>,
}

fn dense_ambient<M: Manifold + ?Sized>(m: &M) -> Result<usize> {
    let n = m.ambient_dim();
    if n > tol::DENSE_AMBIENT_MAX {
        return Err(Error::invalid(format!("ambient dimension {n} too large for dense bundle operators")));
    }
    Ok(n)
}

/// ÎI_x(u, P) = Σ II(u, u_ℓ)u_ℓᵀ + Σ u_ℓ II(u, u_ℓ)ᵀ over an orthonormal basis of range(P).
pub fn extended_ii<M: Manifold + ?Sized>(m: &M, x: &Point, u: &DMatrix<f64>, p: &Projector) -> Result<DMatrix<f64>> {
    let n = dense_ambient(m)?;
    if p.n() != n {
        return Err(Error::invalid(format!("projector acts on dimension {}, ambient is {n}", p.n())));
    }
    if p.rank() > m.dim() {
        return Err(Error::invalid(format!("rank {} exceeds manifold dimension {}", p.rank(), m.dim())));
    }
    let frame = p.frame()?;
    Ok(extended_ii_frame(m, x, u, frame.matrix()))
}

pub(crate) fn extended_ii_frame<M: Manifold + ?Sized>(m: &M, x: &Point, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.ambient_shape();
    let n = r * c;
    let mut acc = DMatrix::zeros(n, n);
    for l in 0..v.ncols() {
        let ul = numeric::unvec(v.column(l).as_slice(), r, c);
        let ii = numeric::vec(&m.dproj(x, u, &ul));
        acc += &ii * v.column(l).transpose();
    }
    &acc + acc.transpose()
}

/// Dense tangent projector T on the vectorized ambient space.
pub fn tangent_projector<M: Manifold + ?Sized>(m: &M, x: &Point) -> Result<DMatrix<f64>> {
    manifolds::projector_matrix(m, x)
}

/// Δ_x = T Δ T.
pub fn projected_delta<M: Manifold + ?Sized>(m: &M, x: &Point, big: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = tangent_projector(m, x)?;
    Ok(&t * big * &t)
}

impl BundleDirection {
    /// The unique bundle tangent with position part δ and vertical part Δ_x (symmetric, in T_P Gr_k(T_x M)).
    pub fn from_parts<M: Manifold + ?Sized>(m: &M, base: &BundleState, delta: DMatrix<f64>, delta_x: &DMatrix<f64>) -> Result<Self> {
        dense_ambient(m)?;
        let big = numeric::sym(delta_x) + extended_ii_frame(m, &base.x, &delta, base.frame());
        Ok(BundleDirection { base: base.clone(), delta, big_delta: big })
    }

    /// ‖Δ − (Δ_x + ÎI(δ, P))‖_F.
    pub fn tangency_residual<M: Manifold + ?Sized>(&self, m: &M) -> Result<f64> {
        let dx = projected_delta(m, &self.base.x, &self.big_delta)?;
        let ii = extended_ii_frame(m, &self.base.x, &self.delta, self.base.frame());
        Ok((&self.big_delta - dx - ii).norm())
    }
}

/// Sasaki-type inner product of two bundle tangents at the same state.
pub fn sasaki_inner<M: Manifold + ?Sized>(m: &M, s: &BundleState, d1: &BundleDirection, d2: &BundleDirection) -> Result<f64> {
    if d1.base != *s || d2.base != *s {
        return Err(Error::BaseMismatch);
    }
    let t = tangent_projector(m, &s.x)?;
    let a = &t * &d1.big_delta * &t;
    let b = &t * &d2.big_delta * &t;
    Ok(d1.delta.dot(&d2.delta) + a.dot(&b))
}

/// Horizontal lift (δ, ΔV) of a bundle tangent.
pub fn horizontal_lift(s: &BundleState, d: &BundleDirection) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if s.k() == 0 && d.big_delta.nrows() != s.frame().nrows() {
        return Err(Error::MissingFrame);
    }
    if d.base != *s {
        return Err(Error::BaseMismatch);
    }
    Ok((d.delta.clone(), &d.big_delta * s.frame()))
}

/// Sasaki-orthonormal basis of T_{(x,P)} Gr_k(TM): d + k(d − k) directions.
pub fn tangent_basis<M: Manifold + ?Sized>(m: &M, s: &BundleState) -> Result<Vec<BundleDirection>> {
    let n = dense_ambient(m)?;
    let k = s.k();
    let frame = s.frame();
    // Adapted basis of T_x M: the plane frame first, then its complement.
    let mut cols: Vec<DVector<f64>> = (0..k).map(|j| frame.column(j).into_owned()).collect();
    cols.extend(m.tangent_basis(&s.x)?.iter().map(numeric::vec));
    let adapted = numeric::orthonormalize_columns(&cols, 1e-8);
    let d = m.dim();
    if adapted.len() != d {
        return Err(Error::invalid(format!("adapted basis has {} vectors, expected {d}", adapted.len())));
    }
    let (r, c) = m.ambient_shape();
    let mut out = Vec::with_capacity(d + k * (d - k));
    for vq in &adapted {
        let delta = numeric::unvec(vq.as_slice(), r, c);
        let big = extended_ii_frame(m, &s.x, &delta, frame);
        out.push(BundleDirection { base: s.clone(), delta, big_delta: big });
    }
    let sq = std::f64::consts::FRAC_1_SQRT_2;
    for vi in adapted.iter().take(k) {
        for vj in adapted.iter().skip(k) {
            let outer = vi * vj.transpose() * sq;
            out.push(BundleDirection { base: s.clone(), delta: DMatrix::zeros(r, c), big_delta: &outer + outer.transpose() });
        }
    }
    debug_assert_eq!(out.len(), d + k * (d - k));
    let _ = n;
    Ok(out)
}

/// How a retraction realizes the new plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneRoute {
    /// Projector form: exponential in the fixed tangent space, compression by the
    /// new tangent projector, truncation to the nearest rank-k projector.
    Projector,
    /// Stiefel representative: frame cos/sin update, tangent projection, QR.
    Representative,
}

/// Orthonormal frame of the nearest rank-k projector to BBᵀ, via the k×k Gram matrix.
fn nearest_projector_frame(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = b.ncols();
    if k == 0 {
        return Ok(b.clone());
    }
    let gram = b.transpose() * b;
    let (vals, vecs) = numeric::sym_eig_dense(&gram)?;
    if !(vals[0] > 1e-12 * vals[k - 1].max(1.0)) {
        return Err(Error::RetractionDomain("transported plane lost rank".into()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&vals.map(|l| 1.0 / l.sqrt()));
    let f = b * vecs.matrix() * inv_sqrt;
    // Re-orthonormalize against round-off while keeping the span.
    Ok(numeric::thin_qr(&f).map_err(|_| Error::RetractionDomain("transported plane lost rank".into()))?.into_inner())
}

/// Projects frame columns onto T_x M.
fn project_columns<M: Manifold + ?Sized>(m: &M, x: &Point, v: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.ambient_shape();
    let mut out = DMatrix::zeros(v.nrows(), v.ncols());
    for j in 0..v.ncols() {
        let col = numeric::unvec(v.column(j).as_slice(), r, c);
        out.set_column(j, &numeric::vec(&m.project(x, &col)));
    }
    out
}

fn qr_frame(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    numeric::thin_qr(b)
        .map(Frame::into_inner)
        .map_err(|_| Error::RetractionDomain("transported frame lost rank".into()))
}

/// How the candidate plane is advanced before transport to the new tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneUpdate {
    /// Grassmann exponential in the fixed tangent space.
    Exponential,
    /// Additive frame update V + ηΓ.
    Additive,
}

/// Moves x by `step_x·d_x` and the plane by `step_p` along its horizontal lift,
/// then transports the plane to T_{x⁺}M.
#[allow(clippy::too_many_arguments)]
pub fn transport_retract<M: Manifold + ?Sized>(
    m: &M,
    s: &BundleState,
    d_x: &DMatrix<f64>,
    lift: &DMatrix<f64>,
    step_x: f64,
    step_p: f64,
    kind: RetractionKind,
    update: PlaneUpdate,
    route: PlaneRoute,
) -> Result<BundleState> {
    let x_new = m.retract_unchecked(&s.x, &(d_x * step_x), kind)?;
    if s.k() == 0 {
        return Ok(BundleState::new_unchecked(x_new, s.frame.clone()));
    }
    let step_lift = lift * step_p;
    let candidate = match update {
        PlaneUpdate::Exponential => exp_frame(&s.frame, &step_lift)?,
        PlaneUpdate::Additive => &s.frame + step_lift,
    };
    let b = project_columns(m, &x_new, &candidate);
    let frame = match route {
        PlaneRoute::Projector => nearest_projector_frame(&b)?,
        PlaneRoute::Representative => qr_frame(&b)?,
    };
    Ok(BundleState::new_unchecked(x_new, frame))
}

/// Retraction over Gr_k(TM) applied to `step·D`.
///
/// The projector route works on dense N×N operators: it re-derives a frame
/// from P by eigendecomposition, applies the fixed-tangent-space exponential
/// to Δ_x, compresses by the new tangent projector and truncates spectrally.
/// The representative route uses the stored frame, the cos/sin formula,
/// column projection and QR.
pub fn bundle_retract<M: Manifold + ?Sized>(m: &M, s: &BundleState, d: &BundleDirection, step: f64, route: PlaneRoute) -> Result<BundleState> {
    if d.base != *s {
        return Err(Error::BaseMismatch);
    }
    let kind = m.default_retraction();
    if step == 0.0 {
        return Ok(s.clone());
    }
    let k = s.k();
    let t = tangent_projector(m, &s.x)?;
    let delta_x = &t * &d.big_delta * &t;
    match route {
        PlaneRoute::Representative => {
            let lift = &delta_x * &s.frame;
            transport_retract(m, s, &d.delta, &lift, step, step, kind, PlaneUpdate::Exponential, PlaneRoute::Representative)
        }
        PlaneRoute::Projector => {
            let x_new = m.retract_unchecked(&s.x, &(&d.delta * step), kind)?;
            if k == 0 {
                return Ok(BundleState::new_unchecked(x_new, s.frame.clone()));
            }
            let p = s.projector()?;
            let v = p.frame()?.into_inner();
            let ve = exp_frame(&v, &(&delta_x * &v * step))?;
            let pe = &ve * ve.transpose();
            let t_new = tangent_projector(m, &x_new)?;
            let compressed = numeric::sym(&(&t_new * pe * &t_new));
            let (vals, vecs) = numeric::sym_eig_dense(&compressed)?;
            let nn = vals.len();
            if !(vals[nn - k] > 0.5) {
                return Err(Error::RetractionDomain("compressed plane is rank deficient".into()));
            }
            let frame = vecs.matrix().columns(nn - k, k).into_owned();
            Ok(BundleState::new_unchecked(x_new, frame))
        }
    }
}

/// Simple retraction: position by `kind`, plane advanced then projected onto
/// the new tangent space and truncated to the nearest rank-k projector.
/// `d_p` is a symmetric N×N direction in T_P Gr_k(T_x M).
#[allow(clippy::too_many_arguments)]
pub fn simple_transport_retract<M: Manifold + ?Sized>(
    m: &M,
    s: &BundleState,
    d_x: &DMatrix<f64>,
    d_p: &DMatrix<f64>,
    step_x: f64,
    step_p: f64,
    kind: RetractionKind,
    update: PlaneUpdate,
) -> Result<BundleState> {
    let lift = d_p * &s.frame;
    transport_retract(m, s, d_x, &lift, step_x, step_p, kind, update, PlaneRoute::Projector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{Flat, Sphere};

    fn e(n: usize, i: usize) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(n, 1);
        v[i] = 1.0;
        v
    }

    fn sphere_state() -> (Sphere, BundleState) {
        let m = Sphere::new(3).unwrap();
        let x = m.point(e(3, 0)).unwrap();
        let s = BundleState::from_frame(&m, x, e(3, 1)).unwrap();
        (m, s)
    }

    #[test]
    fn extended_ii_sphere_example() {
        let (m, s) = sphere_state();
        let p = s.projector().unwrap();
        let got = extended_ii(&m, &s.x, &e(3, 1), &p).unwrap();
        let want = -(e(3, 0) * e(3, 1).transpose() + e(3, 1) * e(3, 0).transpose());
        assert!((got - want).norm() < 1e-15);
        assert_eq!(extended_ii(&m, &s.x, &DMatrix::zeros(3, 1), &p).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn sasaki_norm_of_horizontal_direction() {
        let (m, s) = sphere_state();
        let d = BundleDirection::from_parts(&m, &s, e(3, 1), &DMatrix::zeros(3, 3)).unwrap();
        assert!((sasaki_inner(&m, &s, &d, &d).unwrap() - 1.0).abs() < 1e-15);
        let zero = BundleDirection::from_parts(&m, &s, DMatrix::zeros(3, 1), &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(sasaki_inner(&m, &s, &zero, &zero).unwrap(), 0.0);
        let other = BundleState::from_frame(&m, s.x.clone(), e(3, 2)).unwrap();
        assert_eq!(sasaki_inner(&m, &other, &d, &d), Err(Error::BaseMismatch));
    }

    #[test]
    fn basis_counts() {
        let f = Flat::new(2, 1).unwrap();
        let x = f.point(DMatrix::zeros(2, 1)).unwrap();
        let s = BundleState::from_frame(&f, x, e(2, 0)).unwrap();
        assert_eq!(tangent_basis(&f, &s).unwrap().len(), 3);
        let (m, s) = sphere_state();
        assert_eq!(tangent_basis(&m, &s).unwrap().len(), 3);
    }

    #[test]
    fn zero_step_is_identity() {
        let (m, s) = sphere_state();
        let d = BundleDirection::from_parts(&m, &s, e(3, 2), &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(bundle_retract(&m, &s, &d, 0.0, PlaneRoute::Projector).unwrap(), s);
        let r = simple_transport_retract(&m, &s, &e(3, 2), &DMatrix::zeros(3, 3), 0.0, 0.0, RetractionKind::Qr, PlaneUpdate::Exponential).unwrap();
        assert!(r.plane_distance(&s) < 1e-15);
        assert_eq!(r.x, s.x);
    }

    #[test]
    fn flat_plane_follows_grassmann_geodesic() {
        let f = Flat::new(2, 1).unwrap();
        let x = f.point(DMatrix::zeros(2, 1)).unwrap();
        let s = BundleState::from_frame(&f, x, e(2, 0)).unwrap();
        let dx = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = BundleDirection::from_parts(&f, &s, DMatrix::zeros(2, 1), &dx).unwrap();
        let t = 0.3;
        for route in [PlaneRoute::Projector, PlaneRoute::Representative] {
            let r = bundle_retract(&f, &s, &d, t, route).unwrap();
            let want = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
            assert!(projector_distance(r.frame(), &want) < 1e-14);
        }
    }
}
