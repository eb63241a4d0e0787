//! Problem abstractions consumed by every solver module: dense vectors,
//! linear maps, the smooth part of the objective, and the two oracle handles
//! (linear minimization over the polytope, proximal map of `h*`).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Dense real vector. Entries are finite by construction; arithmetic keeps
/// that invariant (checked in debug builds).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        for (index, &value) in entries.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NotFinite { index, value });
            }
        }
        Ok(Self(entries))
    }

    /// Constructor for values already known to be finite (debug-checked).
    pub fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()), "non-finite entry");
        Self(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot dimension mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// self += alpha * other
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseVector) {
        assert_eq!(self.len(), other.len(), "add_scaled dimension mismatch");
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += alpha * b;
        }
        debug_assert!(self.0.iter().all(|v| v.is_finite()));
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.0.iter_mut() {
            *a *= alpha;
        }
        debug_assert!(self.0.iter().all(|v| v.is_finite()));
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    pub fn add(&self, other: &DenseVector) -> DenseVector {
        let mut out = self.clone();
        out.add_scaled(1.0, other);
        out
    }

    pub fn scaled(&self, alpha: f64) -> DenseVector {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn dist(&self, other: &DenseVector) -> f64 {
        self.sub(other).norm()
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Checked inner product; errors on dimension mismatch naming both lengths.
pub fn inner_product(a: &DenseVector, b: &DenseVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.dot(b))
}

/// Bounded linear operator `K` with its adjoint and an upper bound on the
/// operator norm.
pub trait LinearMap: Send + Sync {
    fn apply(&self, x: &DenseVector) -> DenseVector;
    fn adjoint_apply(&self, y: &DenseVector) -> DenseVector;
    /// Upper bound on the operator norm ||K||.
    fn norm_bound(&self) -> f64;
    fn domain_dim(&self) -> usize;
    fn codomain_dim(&self) -> usize;
}

/// Dense matrix as a linear map. The norm bound is a power-iteration
/// estimate inflated by the declared 1.01 safety factor.
pub struct MatrixMap {
    m: DenseMatrix,
    norm_bound: f64,
}

impl MatrixMap {
    pub fn new(m: DenseMatrix) -> Self {
        let mut map = Self { m, norm_bound: 0.0 };
        // power iteration returns a lower estimate; 1.01 turns it into a
        // usable upper bound for step-size rules (documented contract)
        map.norm_bound = 1.01 * estimate_operator_norm(&map, 200);
        map
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }
}

impl LinearMap for MatrixMap {
    fn apply(&self, x: &DenseVector) -> DenseVector {
        self.m.matvec_dense(x)
    }

    fn adjoint_apply(&self, y: &DenseVector) -> DenseVector {
        self.m.matvec_transpose_dense(y)
    }

    fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    fn domain_dim(&self) -> usize {
        self.m.cols()
    }

    fn codomain_dim(&self) -> usize {
        self.m.rows()
    }
}

pub struct IdentityMap {
    pub dim: usize,
}

impl LinearMap for IdentityMap {
    fn apply(&self, x: &DenseVector) -> DenseVector {
        x.clone()
    }
    fn adjoint_apply(&self, y: &DenseVector) -> DenseVector {
        y.clone()
    }
    fn norm_bound(&self) -> f64 {
        1.0
    }
    fn domain_dim(&self) -> usize {
        self.dim
    }
    fn codomain_dim(&self) -> usize {
        self.dim
    }
}

pub struct ZeroMap {
    pub domain: usize,
    pub codomain: usize,
}

impl LinearMap for ZeroMap {
    fn apply(&self, x: &DenseVector) -> DenseVector {
        assert_eq!(x.len(), self.domain);
        DenseVector::zeros(self.codomain)
    }
    fn adjoint_apply(&self, y: &DenseVector) -> DenseVector {
        assert_eq!(y.len(), self.codomain);
        DenseVector::zeros(self.domain)
    }
    fn norm_bound(&self) -> f64 {
        0.0
    }
    fn domain_dim(&self) -> usize {
        self.domain
    }
    fn codomain_dim(&self) -> usize {
        self.codomain
    }
}

/// Power iteration on `K*K`: converges to ||K|| from below. Callers needing
/// a strict upper bound multiply by a safety factor (1.01 by convention
/// in this crate).
pub fn estimate_operator_norm(map: &dyn LinearMap, iters: usize) -> f64 {
    assert!(iters >= 1);
    let n = map.domain_dim();
    if n == 0 {
        return 0.0;
    }
    // deterministic pseudo-random start so repeated runs agree bit-for-bit
    let mut state: u64 = 0x9e3779b97f4a7c15;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) + 0.5
        })
        .collect();
    let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut v = DenseVector::from_raw(v);
    let mut lambda = 0.0_f64;
    for _ in 0..iters {
        let w = map.adjoint_apply(&map.apply(&v));
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        lambda = v.dot(&w); // Rayleigh quotient for K*K, <= lambda_max
        v = w.scaled(1.0 / wn);
    }
    lambda.max(0.0).sqrt()
}

/// The smooth convex part `f` of the primal objective.
pub enum SmoothPart {
    /// f(x) = <c, x>
    Linear { c: DenseVector },
    /// f(x) = (alpha/2) ||x - center||^2
    IsoQuadratic { alpha: f64, center: DenseVector },
    /// f(x) = 1/2 <Qx, x> + <lin, x> with Q symmetric PSD
    Quadratic {
        q: DenseMatrix,
        lin: DenseVector,
        lipschitz: f64,
    },
    /// general smooth convex function given by closures
    General {
        value: Arc<dyn Fn(&DenseVector) -> f64 + Send + Sync>,
        gradient: Arc<dyn Fn(&DenseVector) -> DenseVector + Send + Sync>,
        lipschitz: f64,
    },
}

/// Tag for the three recognised function classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothKind {
    Linear,
    Quadratic,
    General,
}

impl SmoothPart {
    pub fn quadratic(q: DenseMatrix, lin: DenseVector) -> Self {
        let map = MatrixMap::new(q.clone());
        let lipschitz = map.norm_bound();
        SmoothPart::Quadratic { q, lin, lipschitz }
    }

    pub fn kind(&self) -> SmoothKind {
        match self {
            SmoothPart::Linear { .. } => SmoothKind::Linear,
            SmoothPart::IsoQuadratic { .. } | SmoothPart::Quadratic { .. } => SmoothKind::Quadratic,
            SmoothPart::General { .. } => SmoothKind::General,
        }
    }

    pub fn value(&self, x: &DenseVector) -> f64 {
        match self {
            SmoothPart::Linear { c } => c.dot(x),
            SmoothPart::IsoQuadratic { alpha, center } => 0.5 * alpha * x.sub(center).norm_sq(),
            SmoothPart::Quadratic { q, lin, .. } => {
                0.5 * q.matvec_dense(x).dot(x) + lin.dot(x)
            }
            SmoothPart::General { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &DenseVector) -> DenseVector {
        match self {
            SmoothPart::Linear { c } => c.clone(),
            SmoothPart::IsoQuadratic { alpha, center } => x.sub(center).scaled(*alpha),
            SmoothPart::Quadratic { q, lin, .. } => q.matvec_dense(x).add(lin),
            SmoothPart::General { gradient, .. } => gradient(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            SmoothPart::Linear { .. } => 0.0,
            SmoothPart::IsoQuadratic { alpha, .. } => *alpha,
            SmoothPart::Quadratic { lipschitz, .. } => *lipschitz,
            SmoothPart::General { lipschitz, .. } => *lipschitz,
        }
    }

    /// Exact second derivative of `t -> f(x + t d)` when available
    /// (independent of `x` for the quadratic kinds).
    pub fn curvature_form(&self, d: &DenseVector) -> Option<f64> {
        match self {
            SmoothPart::Linear { .. } => Some(0.0),
            SmoothPart::IsoQuadratic { alpha, .. } => Some(alpha * d.norm_sq()),
            SmoothPart::Quadratic { q, .. } => Some(q.matvec_dense(d).dot(d)),
            SmoothPart::General { .. } => None,
        }
    }
}

/// Identity key for an atom; equal ids imply equal points (the key is a
/// canonical content hash, e.g. the labeling tuple for MRF atoms).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub u64);

/// Fixed-key FNV-1a over words; used for content ids so that runs are
/// reproducible across processes (the std hasher is seeded per process).
pub fn content_id(words: impl IntoIterator<Item = u64>) -> AtomId {
    let mut h: u64 = 0xcbf29ce484222325;
    for w in words {
        for byte in w.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    AtomId(h)
}

/// Optional payload attached to an atom by the polytope that produced it.
#[derive(Clone, Debug)]
pub enum AtomAux {
    /// one label per chain position, concatenated over chains
    Labeling(Vec<u32>),
}

/// A vertex of the polytope `P`.
#[derive(Clone, Debug)]
pub struct Atom {
    pub id: AtomId,
    pub point: DenseVector,
    pub aux: Option<AtomAux>,
}

impl Atom {
    pub fn new(id: AtomId, point: DenseVector) -> Self {
        Self {
            id,
            point,
            aux: None,
        }
    }
}

/// Linear minimization oracle over a polytope: the only access to `P`.
pub trait LinearMinimizer: Send + Sync {
    /// A vertex minimizing `<direction, x>` over `P`; ties broken by
    /// smallest canonical atom id.
    fn minimize(&self, direction: &DenseVector) -> Atom;

    /// Upper bound on the Euclidean diameter of `P`.
    fn diameter_bound(&self) -> f64;

    fn dim(&self) -> usize;

    /// Exact `argmin_{x in P} 1/2||x - z||^2` when the polytope supports it.
    fn quadratic_prox(&self, _z: &DenseVector) -> Option<DenseVector> {
        None
    }

    /// Membership test used by the test suites.
    fn contains(&self, x: &DenseVector, tol: f64) -> bool;
}

/// Counting wrapper around a [`LinearMinimizer`]: every `minimize` call
/// increments a counter readable by the harness (the cost unit of all
/// reported budgets is lmo calls). Handles are cheap to clone and share;
/// the default usage contract is sequential calls unless the concrete
/// polytope documents otherwise.
#[derive(Clone)]
pub struct LmoHandle {
    inner: Arc<dyn LinearMinimizer>,
    calls: Arc<AtomicU64>,
}

impl LmoHandle {
    pub fn new(inner: Arc<dyn LinearMinimizer>) -> Self {
        Self {
            inner,
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn minimize(&self, direction: &DenseVector) -> Atom {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.minimize(direction)
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn diameter_bound(&self) -> f64 {
        self.inner.diameter_bound()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Not counted: this is a projection shortcut, not an lmo call.
    pub fn quadratic_prox(&self, z: &DenseVector) -> Option<DenseVector> {
        self.inner.quadratic_prox(z)
    }

    pub fn contains(&self, x: &DenseVector, tol: f64) -> bool {
        self.inner.contains(x, tol)
    }
}

/// Proximal map handle for `h*`: the only access to the dual function.
pub trait ProxFn: Send + Sync {
    /// `argmin_y h*(y) + ||y - z||^2 / (2 tau)`
    fn prox(&self, tau: f64, z: &DenseVector) -> DenseVector;

    /// `h*(y)`, possibly `+inf` outside the domain.
    fn value(&self, y: &DenseVector) -> f64;

    fn dim(&self) -> usize;

    fn domain_diameter(&self) -> Option<f64> {
        None
    }

    /// `<P w, w>` for the linear part `P` of the prox map when
    /// `prox_{tau h*}` is affine; `None` otherwise. This is what makes the
    /// smoothed primal exactly quadratic along directions.
    fn prox_linear_quadform(&self, _tau: f64, _w: &DenseVector) -> Option<f64> {
        None
    }

    /// Conjugate `h(z) = sup_y <z,y> - h*(y)` in closed form when available.
    fn conjugate_value(&self, _z: &DenseVector) -> Option<f64> {
        None
    }
}

/// h*(y) = 0 for all y (prox is the identity).
pub struct ZeroFn {
    pub dim: usize,
}

impl ProxFn for ZeroFn {
    fn prox(&self, _tau: f64, z: &DenseVector) -> DenseVector {
        z.clone()
    }
    fn value(&self, _y: &DenseVector) -> f64 {
        0.0
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn prox_linear_quadform(&self, _tau: f64, w: &DenseVector) -> Option<f64> {
        Some(w.norm_sq())
    }
}

/// h*(y) = indicator of a single point (prox is constant).
pub struct PointIndicator {
    pub point: DenseVector,
}

impl PointIndicator {
    pub fn origin(dim: usize) -> Self {
        Self {
            point: DenseVector::zeros(dim),
        }
    }
}

impl ProxFn for PointIndicator {
    fn prox(&self, _tau: f64, _z: &DenseVector) -> DenseVector {
        self.point.clone()
    }
    fn value(&self, y: &DenseVector) -> f64 {
        let tol = 1e-10 * (1.0 + self.point.norm());
        if y.dist(&self.point) <= tol {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn dim(&self) -> usize {
        self.point.len()
    }
    fn domain_diameter(&self) -> Option<f64> {
        Some(0.0)
    }
    fn prox_linear_quadform(&self, _tau: f64, _w: &DenseVector) -> Option<f64> {
        Some(0.0)
    }
    fn conjugate_value(&self, z: &DenseVector) -> Option<f64> {
        Some(z.dot(&self.point))
    }
}

/// h*(y) = <b, y> (prox shifts by -tau b). This realises the linearly
/// constrained form `min f_P(x) s.t. Ax = b` as a saddle problem.
pub struct LinearFn {
    pub b: DenseVector,
}

impl ProxFn for LinearFn {
    fn prox(&self, tau: f64, z: &DenseVector) -> DenseVector {
        let mut out = z.clone();
        out.add_scaled(-tau, &self.b);
        out
    }
    fn value(&self, y: &DenseVector) -> f64 {
        self.b.dot(y)
    }
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn prox_linear_quadform(&self, _tau: f64, w: &DenseVector) -> Option<f64> {
        Some(w.norm_sq())
    }
}

/// h*(y) = ½||y||², its own conjugate; prox shrinks by 1/(1+tau).
pub struct HalfSquaredNorm {
    pub dim: usize,
}

impl ProxFn for HalfSquaredNorm {
    fn prox(&self, tau: f64, z: &DenseVector) -> DenseVector {
        z.scaled(1.0 / (1.0 + tau))
    }
    fn value(&self, y: &DenseVector) -> f64 {
        0.5 * y.norm_sq()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn prox_linear_quadform(&self, tau: f64, w: &DenseVector) -> Option<f64> {
        Some(w.norm_sq() / (1.0 + tau))
    }
    fn conjugate_value(&self, z: &DenseVector) -> Option<f64> {
        Some(0.5 * z.norm_sq())
    }
}

/// Structure identifying a problem as `min f_P(x) s.t. Ax = b` (the map `A`
/// is the problem's `K`).
pub struct AxbStructure {
    pub b: DenseVector,
}

/// Bundle of everything a solver needs: the coupling `K`, the smooth part
/// `f`, the polytope's lmo and the dual prox.
pub struct SaddleProblem {
    pub k: Arc<dyn LinearMap>,
    pub f: Arc<SmoothPart>,
    pub lmo: LmoHandle,
    pub h_star: Arc<dyn ProxFn>,
    pub axb: Option<AxbStructure>,
}

impl SaddleProblem {
    /// L(x, y) = <Kx, y> + f(x) - h*(y); requires h*(y) finite.
    pub fn lagrangian(&self, x: &DenseVector, y: &DenseVector) -> Result<f64> {
        let h = self.h_star.value(y);
        if !h.is_finite() {
            return Err(Error::OutsideDomain);
        }
        Ok(self.k.apply(x).dot(y) + self.f.value(x) - h)
    }
}

/// The probability simplex: vertices are the unit basis vectors, ids are
/// the coordinate indices, and the exact quadratic prox is the
/// sort-and-threshold projection.
pub struct SimplexPolytope {
    pub dim: usize,
}

impl LinearMinimizer for SimplexPolytope {
    fn minimize(&self, direction: &DenseVector) -> Atom {
        assert_eq!(direction.len(), self.dim);
        let mut best = 0usize;
        let mut best_val = f64::INFINITY;
        for i in 0..self.dim {
            if direction[i] < best_val {
                best_val = direction[i];
                best = i;
            }
        }
        Atom::new(AtomId(best as u64), DenseVector::unit(self.dim, best))
    }

    fn diameter_bound(&self) -> f64 {
        if self.dim >= 2 {
            std::f64::consts::SQRT_2
        } else {
            0.0
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn quadratic_prox(&self, z: &DenseVector) -> Option<DenseVector> {
        crate::fw::project_simplex(z).ok()
    }

    fn contains(&self, x: &DenseVector, tol: f64) -> bool {
        let sum: f64 = x.as_slice().iter().sum();
        (sum - 1.0).abs() <= tol && x.as_slice().iter().all(|&v| v >= -tol)
    }
}

/// Polytope given by an explicit vertex list; lmo by scan. Intended for
/// tests and tiny instances.
pub struct VertexListPolytope {
    vertices: Vec<DenseVector>,
    diameter: f64,
}

impl VertexListPolytope {
    pub fn new(vertices: Vec<DenseVector>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyVector("VertexListPolytope"));
        }
        let mut diameter = 0.0_f64;
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                diameter = diameter.max(vertices[i].dist(&vertices[j]));
            }
        }
        Ok(Self { vertices, diameter })
    }

    pub fn vertices(&self) -> &[DenseVector] {
        &self.vertices
    }
}

impl LinearMinimizer for VertexListPolytope {
    fn minimize(&self, direction: &DenseVector) -> Atom {
        let mut best = 0usize;
        let mut best_val = f64::INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let val = direction.dot(v);
            if val < best_val {
                best_val = val;
                best = i;
            }
        }
        Atom::new(AtomId(best as u64), self.vertices[best].clone())
    }

    fn diameter_bound(&self) -> f64 {
        self.diameter
    }

    fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    fn contains(&self, x: &DenseVector, tol: f64) -> bool {
        // projected-gradient distance test in weight space; adequate for the
        // handful of vertices this type is used with
        let m = self.vertices.len();
        let mut w = vec![1.0 / m as f64; m];
        let step = 1.0 / (m as f64 * self.diameter.max(1.0).powi(2)).max(1.0);
        for _ in 0..20_000 {
            let mut p = DenseVector::zeros(x.len());
            for (wi, v) in w.iter().zip(self.vertices.iter()) {
                p.add_scaled(*wi, v);
            }
            let r = p.sub(x);
            if r.norm() <= tol {
                return true;
            }
            let grad: Vec<f64> = self.vertices.iter().map(|v| v.dot(&r)).collect();
            for (wi, g) in w.iter_mut().zip(grad.iter()) {
                *wi -= step * g;
            }
            w = crate::fw::project_simplex_slice(&w);
        }
        let mut p = DenseVector::zeros(x.len());
        for (wi, v) in w.iter().zip(self.vertices.iter()) {
            p.add_scaled(*wi, v);
        }
        p.dist(x) <= tol
    }
}
