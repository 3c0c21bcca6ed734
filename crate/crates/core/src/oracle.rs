//! Independent ground truth.
//!
//! For f(P) = s·Tr(PA) with A = U diag(σ) Uᵀ on Gr_p(ℝⁿ) the critical points are
//! the spans of p eigenvectors. A configuration c ⊂ {1..n} has Hessian
//! eigenvalues proportional to σ_a − σ_i (i ∈ c, a ∉ c), so its index is
//! #{(i, a) : σ_a < σ_i}. Finite differences validate gradient and Hessian
//! assemblies along retraction curves.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::projector_distance;
use crate::error::{Error, Result};
use crate::manifolds::{self, Manifold, Point};
use crate::numeric::{tol, Frame, Projector};
use crate::objectives::{LepSpec, Objective};

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    /// Ascending 1-based eigenvector indices.
    pub config: Vec<usize>,
    /// ½·Σ σ_c.
    pub value: f64,
    pub index: usize,
    pub frame: DMatrix<f64>,
    pub projector: Projector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointCatalog {
    pub n: usize,
    pub p: usize,
    pub xi: f64,
    pub entries: Vec<CatalogEntry>,
}

/// #{(i, a) : i ∈ config, a ∉ config, σ_a < σ_i}.
pub fn config_index(sigma: &[f64], config: &[usize]) -> usize {
    let mut count = 0;
    for &i in config {
        for a in 1..=sigma.len() {
            if !config.contains(&a) && sigma[a - 1] < sigma[i - 1] {
                count += 1;
            }
        }
    }
    count
}

/// One catalog entry without enumerating the rest.
pub fn catalog_entry(spec: &LepSpec, config: &[usize]) -> Result<CatalogEntry> {
    if config.len() != spec.p || config.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("configuration {config:?} is not an ascending {}-subset", spec.p)));
    }
    let frame = spec.config_frame(config)?;
    let projector = Frame::new_unchecked(frame.clone()).projector();
    Ok(CatalogEntry {
        config: config.to_vec(),
        value: spec.config_value(config),
        index: config_index(&spec.sigma, config),
        frame,
        projector,
    })
}

fn next_subset(c: &mut [usize], n: usize) -> bool {
    let p = c.len();
    for i in (0..p).rev() {
        if c[i] < n - (p - 1 - i) {
            c[i] += 1;
            for j in i + 1..p {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Number of p-subsets of n elements, saturating.
pub fn binomial(n: usize, p: usize) -> usize {
    let p = p.min(n - p.min(n));
    (0..p).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Upper bound on catalog sizes that [`enumerate_catalog`] accepts.
pub const MAX_CATALOG_ENTRIES: usize = 1 << 20;

/// Every critical point of the linear eigenvalue problem, in lexicographic order of configurations.
pub fn enumerate_catalog(spec: &LepSpec) -> Result<CriticalPointCatalog> {
    let (n, p) = (spec.n, spec.p);
    let count = binomial(n, p);
    if count > MAX_CATALOG_ENTRIES {
        return Err(Error::invalid(format!("catalog would have {count} entries")));
    }
    let mut entries = Vec::with_capacity(count);
    let mut c: Vec<usize> = (1..=p).collect();
    loop {
        entries.push(catalog_entry(spec, &c)?);
        if !next_subset(&mut c, n) {
            break;
        }
    }
    let mut values: Vec<f64> = entries.iter().map(|e| e.value).collect();
    values.sort_by(f64::total_cmp);
    if values.windows(2).any(|w| w[1] - w[0] <= tol::CATALOG_SUMS) {
        return Err(Error::DegenerateSums);
    }
    Ok(CriticalPointCatalog { n, p, xi: spec.xi, entries })
}

impl CriticalPointCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_index(&self, index: usize) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(move |e| e.index == index)
    }

    pub fn find(&self, config: &[usize]) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.config == config)
    }

    /// Smallest ‖P_a − P_b‖_F over distinct entries.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.entries.iter().enumerate() {
            for b in &self.entries[i + 1..] {
                best = best.min(projector_distance(&a.frame, &b.frame));
            }
        }
        best
    }

    pub fn to_json(&self) -> CatalogJson {
        CatalogJson {
            n: self.n,
            p: self.p,
            xi: self.xi,
            entries: self
                .entries
                .iter()
                .map(|e| CatalogJsonEntry { config: e.config.clone(), value: e.value, index: e.index })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogJsonEntry {
    pub config: Vec<usize>,
    pub value: f64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogJson {
    pub n: usize,
    pub p: usize,
    pub xi: f64,
    pub entries: Vec<CatalogJsonEntry>,
}

/// Default projector tolerance for matching terminals.
pub const DEFAULT_MATCH_TOL: f64 = tol::CATALOG_MATCH;

/// The unique entry within `tol` of the subspace spanned by the orthonormal n×p `frame`.
pub fn match_frame<'a>(entries: impl IntoIterator<Item = &'a CatalogEntry>, frame: &DMatrix<f64>, tol: f64) -> Result<Option<&'a CatalogEntry>> {
    let hits: Vec<&CatalogEntry> = entries.into_iter().filter(|e| projector_distance(&e.frame, frame) <= tol).collect();
    match hits.len() {
        0 => Ok(None),
        1 => Ok(Some(hits[0])),
        k => Err(Error::AmbiguousMatch(k)),
    }
}

/// The unique entry with ‖P − P_entry‖_F ≤ tol.
pub fn match_terminal<'a>(catalog: &'a CriticalPointCatalog, p: &DMatrix<f64>, tol: f64) -> Result<Option<&'a CatalogEntry>> {
    if p.shape() != (catalog.n, catalog.n) {
        return Err(Error::invalid(format!("terminal projector must be {}x{}", catalog.n, catalog.n)));
    }
    let hits: Vec<&CatalogEntry> = catalog.entries.iter().filter(|e| (p - e.projector.matrix()).norm() <= tol).collect();
    match hits.len() {
        0 => Ok(None),
        1 => Ok(Some(hits[0])),
        k => Err(Error::AmbiguousMatch(k)),
    }
}

fn check_step(h: f64) -> Result<()> {
    if (1e-8..=1e-3).contains(&h) {
        Ok(())
    } else {
        Err(Error::invalid(format!("finite-difference step {h} outside [1e-8, 1e-3]")))
    }
}

/// Projected central-difference gradient: Proj_x of the coordinatewise difference quotients of f.
/// Truncation error O(h²).
pub fn fd_gradient<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, x: &Point, h: f64) -> Result<DMatrix<f64>> {
    check_step(h)?;
    let a = x.ambient();
    let mut g = DMatrix::zeros(a.nrows(), a.ncols());
    let mut probe = a.clone();
    for j in 0..a.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let fp = obj.value(&probe);
        probe[j] = orig - h;
        let fm = obj.value(&probe);
        probe[j] = orig;
        g[j] = (fp - fm) / (2.0 * h);
    }
    Ok(m.project(x, &g))
}

/// Central difference of f along the retraction curve t ↦ R_x(t·v).
pub fn fd_directional<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, x: &Point, v: &DMatrix<f64>, h: f64) -> Result<f64> {
    check_step(h)?;
    let kind = m.default_retraction();
    let xp = m.retract_unchecked(x, &(v * h), kind)?;
    let xm = m.retract_unchecked(x, &(v * -h), kind)?;
    Ok((obj.value(xp.ambient()) - obj.value(xm.ambient())) / (2.0 * h))
}

/// Proj_x of the central difference of the Riemannian gradient field along t ↦ R_x(t·v).
pub fn fd_hessian_vec<M: Manifold + ?Sized>(m: &M, obj: &dyn Objective, x: &Point, v: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    check_step(h)?;
    let kind = m.default_retraction();
    let xp = m.retract_unchecked(x, &(v * h), kind)?;
    let xm = m.retract_unchecked(x, &(v * -h), kind)?;
    let gp = manifolds::riemannian_gradient(m, obj, &xp);
    let gm = manifolds::riemannian_gradient(m, obj, &xm);
    Ok(m.project(x, &((gp - gm) / (2.0 * h))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::BundleState;
    use crate::manifolds::{Flat, Grassmann};
    use crate::objectives::{make_lep, quadratic, LepGrassmann};
    use crate::saddle;

    fn tiny_spec() -> LepSpec {
        let mut spec = make_lep(3, 1, 2.0, 0).unwrap();
        spec.sigma = vec![1.0, 2.0, 4.0];
        spec
    }

    #[test]
    fn three_by_one_catalog() {
        let cat = enumerate_catalog(&tiny_spec()).unwrap();
        let got: Vec<(Vec<usize>, usize)> = cat.entries.iter().map(|e| (e.config.clone(), e.index)).collect();
        assert_eq!(got, vec![(vec![1], 0), (vec![2], 1), (vec![3], 2)]);
    }

    #[test]
    fn equal_sums_are_rejected() {
        let mut spec = make_lep(4, 2, 2.0, 0).unwrap();
        spec.sigma = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(enumerate_catalog(&spec), Err(Error::DegenerateSums));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 2), 45);
        assert_eq!(binomial(64, 8), 4_426_165_368);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn matching() {
        let spec = make_lep(10, 2, 1.01, 0).unwrap();
        let cat = enumerate_catalog(&spec).unwrap();
        let gm = cat.find(&[1, 2]).unwrap();
        let hit = match_terminal(&cat, gm.projector.matrix(), DEFAULT_MATCH_TOL).unwrap().unwrap();
        assert_eq!(hit.config, vec![1, 2]);
        assert_eq!(hit.index, 0);
        // Distinct rank-2 projectors are at most 2 apart, so tolerance 3 matches everything.
        assert!(matches!(match_terminal(&cat, gm.projector.matrix(), 3.0), Err(Error::AmbiguousMatch(_))));
        let g = Grassmann::new(10, 2).unwrap();
        let x = g.random_point(&mut crate::random::stream(1, 0)).unwrap();
        assert!(match_terminal(&cat, x.ambient(), DEFAULT_MATCH_TOL).unwrap().is_none());
    }

    #[test]
    fn catalog_points_are_fixed_points() {
        let spec = make_lep(6, 2, 1.3, 2).unwrap();
        let cat = enumerate_catalog(&spec).unwrap();
        let f = LepGrassmann::new(&spec.a, 0.5);
        let g = Grassmann::new(6, 2).unwrap();
        for e in &cat.entries {
            let x = g.point_from_frame(e.frame.clone()).unwrap();
            let basis = g.tangent_basis(&x).unwrap();
            let s = BundleState::from_tangents(&g, x, &basis[..1]).unwrap();
            assert!(saddle::x_direction(&g, &f, &s).norm() < 1e-10);
            // Plane spanned by the eigen-direction with the most negative Hessian eigenvalue.
            let spec_vals = saddle::terminal_spectrum(&g, &f, &s.x).unwrap();
            assert_eq!(saddle::classify_spectrum(&spec_vals).index, e.index);
        }
    }

    #[test]
    fn finite_differences_on_flat_quadratic_are_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let f = quadratic(a.clone());
        let m = Flat::new(2, 1).unwrap();
        let x = m.point(DMatrix::from_column_slice(2, 1, &[0.3, -0.7])).unwrap();
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.5]);
        for h in [1e-3, 1e-5] {
            assert!((fd_gradient(&m, &f, &x, h).unwrap() - &a * x.ambient()).norm() < 1e-9);
            assert!((fd_hessian_vec(&m, &f, &x, &v, h).unwrap() - &a * &v).norm() < 1e-9);
        }
        assert!(fd_gradient(&m, &f, &x, 1e-2).is_err());
    }

    #[test]
    fn lep_hessian_matches_finite_differences() {
        let spec = make_lep(6, 2, 1.2, 4).unwrap();
        let f = LepGrassmann::new(&spec.a, 0.5);
        let g = Grassmann::new(6, 2).unwrap();
        let mut rng = crate::random::stream(9, 0);
        for _ in 0..5 {
            let x = g.random_point(&mut rng).unwrap();
            let v = g.random_tangent(&x, &mut rng);
            let exact = f.closed_form_hessian(&x, &v);
            let fd = fd_hessian_vec(&g, &f, &x, &v, 1e-5).unwrap();
            assert!((&fd - &exact).norm() <= 1e-5 * exact.norm().max(1e-12));
            let grad = manifolds::riemannian_gradient(&g, &f, &x);
            assert!((fd_gradient(&g, &f, &x, 1e-5).unwrap() - &grad).norm() < 1e-8);
        }
    }
}
