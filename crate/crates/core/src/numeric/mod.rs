//! Dense linear-algebra contracts shared by the rest of the crate.
//!
//! Factorizations are delegated to `nalgebra`; this module fixes the
//! conventions on top of it: ascending eigenvalues, nonnegative `R` diagonal
//! in QR, descending singular values with a relative rank cut-off.
//! All functions are pure.

pub mod tol;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense symmetric matrix. Symmetry is exact: construction stores (M + Mᵀ)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!("symmetric matrix must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(SymMatrix(sym(&m)))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// n×k matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame(DMatrix<f64>);

impl Frame {
    /// Validates ‖QᵀQ − I‖_F against [`tol::FRAME_ORTHONORMAL`].
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        let r = orthonormality_residual(&q);
        if r > tol::FRAME_ORTHONORMAL * (1.0 + q.ncols() as f64).sqrt() {
            return Err(Error::invalid(format!("frame columns not orthonormal (residual {r:.3e})")));
        }
        Ok(Frame(q))
    }

    pub(crate) fn new_unchecked(q: DMatrix<f64>) -> Self {
        Frame(q)
    }

    pub fn empty(n: usize) -> Self {
        Frame(DMatrix::zeros(n, 0))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// VVᵀ.
    pub fn projector(&self) -> Projector {
        Projector { matrix: sym(&(&self.0 * self.0.transpose())), rank: self.k() }
    }
}

impl AsRef<DMatrix<f64>> for Frame {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Rank-k orthogonal projector.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<f64>,
    rank: usize,
}

impl Projector {
    /// Symmetrizes, then validates idempotency and trace against [`tol::PROJECTOR`].
    pub fn new(m: DMatrix<f64>, rank: usize) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("projector must be square"));
        }
        let m = sym(&m);
        let idem = (&m * &m - &m).norm();
        let tr = (m.trace() - rank as f64).abs();
        if idem > tol::PROJECTOR || tr > tol::PROJECTOR {
            return Err(Error::invalid(format!(
                "not a rank-{rank} projector (idempotency {idem:.3e}, trace defect {tr:.3e})"
            )));
        }
        Ok(Projector { matrix: m, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Orthonormal basis of the range (top-k eigenvectors).
    pub fn frame(&self) -> Result<Frame> {
        top_eigenvectors(&self.matrix, self.rank)
    }
}

/// (M + Mᵀ)/2.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// (M − Mᵀ)/2.
pub fn skew(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Frobenius inner product.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// ‖QᵀQ − I‖_F.
pub fn orthonormality_residual(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(k, k)).norm()
}

/// Column-major flattening; the inverse of [`unvec`].
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v)
}

/// Eigenvalues ascending with matching orthonormal eigenvectors.
pub fn sym_eig(m: &SymMatrix) -> Result<(DVector<f64>, Frame)> {
    sym_eig_dense(m.matrix())
}

pub(crate) fn sym_eig_dense(m: &DMatrix<f64>) -> Result<(DVector<f64>, Frame)> {
    if !is_finite(m) {
        return Err(Error::invalid("non-finite entries in eigenproblem"));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), Frame::empty(0)));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, Frame::new_unchecked(vectors)))
}

/// Orthonormal eigenvectors of the k largest eigenvalues (descending order).
pub fn top_eigenvectors(m: &DMatrix<f64>, k: usize) -> Result<Frame> {
    let n = m.nrows();
    if k > n {
        return Err(Error::invalid(format!("cannot take {k} eigenvectors of a {n}x{n} matrix")));
    }
    let (_, vecs) = sym_eig_dense(&sym(m))?;
    let mut out = DMatrix::zeros(n, k);
    for j in 0..k {
        out.set_column(j, &vecs.matrix().column(n - 1 - j));
    }
    Ok(Frame::new_unchecked(out))
}

/// Thin QR with nonnegative `R` diagonal; returns the orthonormal factor.
pub fn thin_qr(m: &DMatrix<f64>) -> Result<Frame> {
    thin_qr_with_r(m).map(|(q, _)| q)
}

/// Thin QR returning both factors under the sign convention diag(R) ≥ 0.
pub fn thin_qr_with_r(m: &DMatrix<f64>) -> Result<(Frame, DMatrix<f64>)> {
    let (n, k) = m.shape();
    if k > n {
        return Err(Error::invalid(format!("thin QR needs k <= n, got {n}x{k}")));
    }
    if !is_finite(m) {
        return Err(Error::invalid("non-finite entries in QR input"));
    }
    if k == 0 {
        return Ok((Frame::empty(n), DMatrix::zeros(0, 0)));
    }
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::RankDeficient);
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..k {
        if r[(j, j)].abs() <= tol::QR_RANK * scale {
            return Err(Error::RankDeficient);
        }
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Ok((Frame::new_unchecked(q), r))
}

/// Thin SVD `m = Q diag(σ) Uᵀ` truncated to numerical rank.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// n×r, orthonormal.
    pub q: DMatrix<f64>,
    /// r singular values, descending, all above the rank cut-off.
    pub sigma: DVector<f64>,
    /// k×r, orthonormal.
    pub u: DMatrix<f64>,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Thin SVD with rank threshold [`tol::SVD_RANK`]·σ_max.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    let (n, k) = m.shape();
    if !is_finite(m) {
        return Err(Error::invalid("non-finite entries in SVD input"));
    }
    let empty = || ThinSvd { q: DMatrix::zeros(n, 0), sigma: DVector::zeros(0), u: DMatrix::zeros(k, 0) };
    if n == 0 || k == 0 || m.iter().all(|&v| v == 0.0) {
        return Ok(empty());
    }
    // nalgebra's bidiagonal SVD loses accuracy when a singular value is near zero; faer's does not.
    let f = faer::Mat::<f64>::from_fn(n, k, |i, j| m[(i, j)]);
    let svd = f.thin_svd().map_err(|e| Error::invalid(format!("SVD failed to converge: {e:?}")))?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let s = DVector::from_fn(fs.nrows(), |i, _| fs[i]);
    let left = DMatrix::from_fn(n, s.len(), |i, j| fu[(i, j)]);
    let vt = DMatrix::from_fn(s.len(), k, |i, j| fv[(j, i)]);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let smax = s[order[0]];
    let keep: Vec<usize> = order.into_iter().filter(|&i| s[i] > tol::SVD_RANK * smax).collect();
    if keep.is_empty() {
        return Ok(empty());
    }
    let r = keep.len();
    let mut q = DMatrix::zeros(n, r);
    let mut u = DMatrix::zeros(k, r);
    let mut sigma = DVector::zeros(r);
    for (j, &i) in keep.iter().enumerate() {
        q.set_column(j, &left.column(i));
        u.set_column(j, &vt.row(i).transpose());
        sigma[j] = s[i];
    }
    Ok(ThinSvd { q, sigma, u })
}

/// AB − BA.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::invalid(format!("commutator of {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(comm(a, b))
}

/// Unchecked commutator for internal hot paths.
pub(crate) fn comm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Orthonormal basis of col(Q)^⊥ for an orthonormal Q (n×k → n×(n−k)).
pub fn orth_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = q.shape();
    if k == n {
        return DMatrix::zeros(n, 0);
    }
    let mut aug = DMatrix::zeros(n, k + n);
    aug.view_mut((0, 0), (n, k)).copy_from(q);
    aug.view_mut((0, k), (n, n)).fill_with_identity();
    // Householder QR of [Q | I] is full rank; its first k columns span col(Q).
    let full = aug.qr().q();
    full.columns(k, n - k).into_owned()
}

/// Gram-Schmidt with re-orthogonalization over column vectors, dropping
/// columns whose remainder falls below `rel_tol` times their original norm.
pub fn orthonormalize_columns(cols: &[DVector<f64>], rel_tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in cols {
        let norm0 = c.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = c.clone();
        for _ in 0..2 {
            for b in &basis {
                let coef = b.dot(&v);
                v.axpy(-coef, b, 1.0);
            }
        }
        let nv = v.norm();
        if nv > rel_tol * norm0 {
            basis.push(v / nv);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(d))
    }

    #[test]
    fn sym_eig_diagonal_orders_ascending() {
        let (vals, vecs) = sym_eig(&SymMatrix::new(diag(&[2.0, 1.0])).unwrap()).unwrap();
        assert_eq!(vals.as_slice(), &[1.0, 2.0]);
        assert!((vecs.matrix()[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((vecs.matrix()[(0, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sym_eig_identity() {
        let (vals, vecs) = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(orthonormality_residual(vecs.matrix()) < 1e-14);
    }

    #[test]
    fn sym_eig_rejects_nan() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(sym_eig_dense(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn qr_normalizes_single_column() {
        let q = thin_qr(&DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(q.matrix().as_slice(), &[1.0, 0.0, 0.0]);
        let q = thin_qr(&DMatrix::from_column_slice(3, 1, &[3.0, 3.0, 0.0])).unwrap();
        let s = 0.5f64.sqrt();
        assert!((q.matrix() - DMatrix::from_column_slice(3, 1, &[s, s, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn qr_sign_convention_and_rank_check() {
        let m = DMatrix::from_column_slice(3, 2, &[-1.0, 0.0, 0.0, 0.0, -2.0, 0.0]);
        let (q, r) = thin_qr_with_r(&m).unwrap();
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
        assert!((q.matrix() * &r - &m).norm() < 1e-14);
        let bad = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        assert_eq!(thin_qr(&bad), Err(Error::RankDeficient));
    }

    #[test]
    fn svd_trivial_cases() {
        let z = thin_svd(&DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(z.rank(), 0);
        let d = thin_svd(&diag(&[3.0, 2.0])).unwrap();
        assert_eq!(d.sigma.as_slice(), &[3.0, 2.0]);
        let u = DVector::from_column_slice(&[1.0, 2.0, 2.0]);
        let v = DVector::from_column_slice(&[0.0, 3.0, 4.0]);
        let r1 = thin_svd(&(&u * v.transpose())).unwrap();
        assert_eq!(r1.rank(), 1);
        assert!((r1.sigma[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn commutator_examples() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(commutator(&DMatrix::identity(2, 2), &b).unwrap(), DMatrix::zeros(2, 2));
        let c = commutator(&diag(&[1.0, 2.0]), &b).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let p = diag(&[1.0, 0.0]);
        let pp = commutator(&p, &commutator(&p, &b).unwrap()).unwrap();
        assert_eq!(pp, b);
        assert!(commutator(&p, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn complement_spans_the_rest() {
        let q = thin_qr(&DMatrix::from_fn(5, 2, |i, j| ((i * 3 + j * 7) % 5) as f64 + 0.5)).unwrap();
        let c = orth_complement(q.matrix());
        assert_eq!(c.shape(), (5, 3));
        assert!((q.matrix().transpose() * &c).norm() < 1e-13);
        assert!(orthonormality_residual(&c) < 1e-13);
    }

    #[test]
    fn projector_validation() {
        assert!(Projector::new(diag(&[1.0, 0.0]), 1).is_ok());
        assert!(Projector::new(diag(&[1.0, 0.5]), 1).is_err());
        assert!(Projector::new(diag(&[1.0, 0.0]), 2).is_err());
    }
}
