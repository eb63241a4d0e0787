//! The smoothed primal objective `F(x) = f(x) + h_{γ,ȳ}(Kx)` obtained by
//! quadratically regularizing the dual around `ȳ`, plus affine-constraint
//! closed forms and Moreau-envelope utilities.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fw::SmoothObjective;
use crate::linalg::{Cholesky, DenseMatrix};
use crate::problem::{DenseVector, LinearMap, ProxFn, SaddleProblem, SmoothPart};

/// Affine set `S = {y : Cy = d}` with `C` of full row rank; the Gram
/// factorization of `CC*` is computed once at construction.
pub struct AffineConstraintSet {
    c: DenseMatrix,
    d: DenseVector,
    chol: Cholesky,
}

impl AffineConstraintSet {
    pub fn new(c: DenseMatrix, d: DenseVector) -> Result<Self> {
        if c.rows() != d.len() {
            return Err(Error::DimensionMismatch {
                left: c.rows(),
                right: d.len(),
            });
        }
        if c.rows() == 0 || c.cols() == 0 {
            return Err(Error::EmptyVector("AffineConstraintSet"));
        }
        let chol = Cholesky::new(&c.gram_rows())?;
        Ok(Self { c, d, chol })
    }

    /// True when the Gram factorization needed diagonal jitter.
    pub fn jittered(&self) -> bool {
        self.chol.jittered
    }

    pub fn dim(&self) -> usize {
        self.c.cols()
    }

    pub fn rows(&self) -> usize {
        self.c.rows()
    }

    pub fn rhs(&self) -> &DenseVector {
        &self.d
    }

    /// Euclidean projection `z + C*(CC*)^{-1}(d - Cz)`.
    pub fn project(&self, z: &DenseVector) -> DenseVector {
        let mut r = self.d.clone();
        r.add_scaled(-1.0, &self.c.matvec_dense(z));
        let w = self.chol.solve(r.as_slice());
        let mut out = z.clone();
        out.add_scaled(1.0, &self.c.matvec_transpose_dense(&DenseVector::from_raw(w)));
        out
    }

    /// Orthogonal projection of `w` onto the row space of `C`.
    pub fn row_space_proj(&self, w: &DenseVector) -> DenseVector {
        let cw = self.c.matvec_dense(w);
        let sol = self.chol.solve(cw.as_slice());
        self.c.matvec_transpose_dense(&DenseVector::from_raw(sol))
    }

    /// Minimum-norm point of `S`: `C*(CC*)^{-1} d`.
    pub fn min_norm_point(&self) -> DenseVector {
        let sol = self.chol.solve(self.d.as_slice());
        self.c.matvec_transpose_dense(&DenseVector::from_raw(sol))
    }

    pub fn residual(&self, y: &DenseVector) -> f64 {
        self.c.matvec_dense(y).sub(&self.d).norm()
    }
}

/// Euclidean projection onto `{y : Cy = d}`.
pub fn project_affine(set: &AffineConstraintSet, z: &DenseVector) -> DenseVector {
    set.project(z)
}

/// `h*(y) = δ_S(y)` for an affine set: the prox is the projection.
pub struct AffineSetIndicator {
    pub set: Arc<AffineConstraintSet>,
}

impl ProxFn for AffineSetIndicator {
    fn prox(&self, _tau: f64, z: &DenseVector) -> DenseVector {
        self.set.project(z)
    }

    fn value(&self, y: &DenseVector) -> f64 {
        let tol = 1e-8 * (1.0 + self.set.rhs().norm());
        if self.set.residual(y) <= tol {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn prox_linear_quadform(&self, _tau: f64, w: &DenseVector) -> Option<f64> {
        // linear part of the projection is I - P_row
        let p = w.sub(&self.set.row_space_proj(w));
        Some(p.dot(w))
    }

    fn conjugate_value(&self, z: &DenseVector) -> Option<f64> {
        // support function of the affine set: finite only on the row space
        let tol = 1e-8 * (1.0 + z.norm());
        if z.sub(&self.set.row_space_proj(z)).norm() <= tol {
            Some(z.dot(&self.set.min_norm_point()))
        } else {
            Some(f64::INFINITY)
        }
    }
}

/// Support function `σ_S` of an affine set; the conjugate partner of
/// [`AffineSetIndicator`], with its own closed-form prox
/// `prox_{μσ}(x) = P_row(x - μ y0)`.
pub struct SupportOfAffine {
    pub set: Arc<AffineConstraintSet>,
}

impl ProxFn for SupportOfAffine {
    fn prox(&self, tau: f64, z: &DenseVector) -> DenseVector {
        let mut shifted = z.clone();
        shifted.add_scaled(-tau, &self.set.min_norm_point());
        self.set.row_space_proj(&shifted)
    }

    fn value(&self, z: &DenseVector) -> f64 {
        let tol = 1e-8 * (1.0 + z.norm());
        if z.sub(&self.set.row_space_proj(z)).norm() <= tol {
            z.dot(&self.set.min_norm_point())
        } else {
            f64::INFINITY
        }
    }

    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn prox_linear_quadform(&self, _tau: f64, w: &DenseVector) -> Option<f64> {
        let p = self.set.row_space_proj(w);
        Some(p.dot(w))
    }

    fn conjugate_value(&self, y: &DenseVector) -> Option<f64> {
        let tol = 1e-8 * (1.0 + self.set.rhs().norm());
        if self.set.residual(y) <= tol {
            Some(0.0)
        } else {
            Some(f64::INFINITY)
        }
    }
}

/// Moreau envelope `m_h^μ(z) = h(p) + ||z - p||²/(2μ)` with `p` the prox of
/// `z`; one prox call.
pub fn moreau_envelope(h: &dyn ProxFn, mu: f64, z: &DenseVector) -> Result<f64> {
    if mu <= 0.0 {
        return Err(Error::InvalidParam(format!("mu must be positive, got {mu}")));
    }
    let p = h.prox(mu, z);
    let hv = h.value(&p);
    if !hv.is_finite() {
        return Err(Error::OutsideDomain);
    }
    Ok(hv + z.sub(&p).norm_sq() / (2.0 * mu))
}

/// Residual `||z - prox_{μh}(z) - μ prox_{h*/μ}(z/μ)||` of the Moreau
/// identity for a claimed conjugate pair; a test utility.
pub fn moreau_identity_check(
    h: &dyn ProxFn,
    h_star: &dyn ProxFn,
    mu: f64,
    z: &DenseVector,
) -> f64 {
    assert!(mu > 0.0);
    let p = h.prox(mu, z);
    let q = h_star.prox(1.0 / mu, &z.scaled(1.0 / mu));
    let mut r = z.clone();
    r.add_scaled(-1.0, &p);
    r.add_scaled(-mu, &q);
    r.norm()
}

/// The smoothed primal `F_{γ,ȳ}(x) = f(x) + h_{γ,ȳ}(Kx)` with
/// `h_{γ,ȳ}(Kx) = (γ/2)||Kx||² + <Kx,ȳ> - m_{h*}^γ(ȳ + γKx)` and gradient
/// `∇f(x) + K* prox_{γh*}(ȳ + γKx)`. The gradient is Lipschitz with
/// constant exactly `L_f + γ L_K²`.
pub struct SmoothedPrimal {
    pub gamma: f64,
    pub y_bar: DenseVector,
    pub k: Arc<dyn LinearMap>,
    pub f: Arc<SmoothPart>,
    pub h_star: Arc<dyn ProxFn>,
    lipschitz: f64,
}

impl SmoothedPrimal {
    pub fn new(
        gamma: f64,
        y_bar: DenseVector,
        k: Arc<dyn LinearMap>,
        f: Arc<SmoothPart>,
        h_star: Arc<dyn ProxFn>,
    ) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if k.codomain_dim() != y_bar.len() {
            return Err(Error::DimensionMismatch {
                left: k.codomain_dim(),
                right: y_bar.len(),
            });
        }
        let lipschitz = f.lipschitz() + gamma * k.norm_bound() * k.norm_bound();
        Ok(Self {
            gamma,
            y_bar,
            k,
            f,
            h_star,
            lipschitz,
        })
    }

    pub fn from_problem(prob: &SaddleProblem, gamma: f64, y_bar: DenseVector) -> Result<Self> {
        Self::new(
            gamma,
            y_bar,
            prob.k.clone(),
            prob.f.clone(),
            prob.h_star.clone(),
        )
    }

    fn envelope_arg(&self, kx: &DenseVector) -> DenseVector {
        let mut z = self.y_bar.clone();
        z.add_scaled(self.gamma, kx);
        z
    }

    pub fn coupling_value(&self, kx: &DenseVector) -> f64 {
        let z = self.envelope_arg(kx);
        let m = moreau_envelope(self.h_star.as_ref(), self.gamma, &z)
            .expect("prox landed outside dom h*");
        0.5 * self.gamma * kx.norm_sq() + kx.dot(&self.y_bar) - m
    }
}

/// Value of the smoothed primal at `x`.
pub fn smoothed_value(sp: &SmoothedPrimal, x: &DenseVector) -> f64 {
    let kx = sp.k.apply(x);
    sp.f.value(x) + sp.coupling_value(&kx)
}

/// Gradient of the smoothed primal at `x`.
pub fn smoothed_gradient(sp: &SmoothedPrimal, x: &DenseVector) -> DenseVector {
    let kx = sp.k.apply(x);
    let z = sp.envelope_arg(&kx);
    let p = sp.h_star.prox(sp.gamma, &z);
    let mut g = sp.f.gradient(x);
    g.add_scaled(1.0, &sp.k.adjoint_apply(&p));
    g
}

impl SmoothObjective for SmoothedPrimal {
    fn value(&self, x: &DenseVector) -> f64 {
        smoothed_value(self, x)
    }

    fn gradient(&self, x: &DenseVector) -> DenseVector {
        smoothed_gradient(self, x)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn curvature_along(&self, _x: &DenseVector, d: &DenseVector) -> Option<f64> {
        // second derivative along d: f-part plus γ <P(Kd), Kd> with P the
        // linear part of the prox; exact whenever both pieces are available
        let f_curv = self.f.curvature_form(d)?;
        let kd = self.k.apply(d);
        let quad = self.h_star.prox_linear_quadform(self.gamma, &kd)?;
        Some(f_curv + self.gamma * quad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{IdentityMap, MatrixMap, PointIndicator, ZeroFn};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rvec(r: &mut ChaCha8Rng, n: usize) -> DenseVector {
        DenseVector::from_raw((0..n).map(|_| r.gen_range(-1.0..1.0)).collect())
    }

    fn random_affine(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Arc<AffineConstraintSet> {
        loop {
            let c = DenseMatrix::from_rows(
                (0..rows)
                    .map(|_| (0..cols).map(|_| r.gen_range(-1.0..1.0)).collect())
                    .collect(),
            )
            .unwrap();
            let d = rvec(r, rows);
            if let Ok(set) = AffineConstraintSet::new(c, d) {
                return Arc::new(set);
            }
        }
    }

    #[test]
    fn project_affine_hand_cases() {
        // C = [1 1], d = 0, z = (1,3) -> (-1, 1)
        let set = AffineConstraintSet::new(
            DenseMatrix::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
            DenseVector::zeros(1),
        )
        .unwrap();
        let p = project_affine(&set, &DenseVector::from_raw(vec![1.0, 3.0]));
        assert!((p[0] + 1.0).abs() < 1e-12);
        assert!((p[1] - 1.0).abs() < 1e-12);
        // feasible point unchanged
        let z = DenseVector::from_raw(vec![2.0, -2.0]);
        assert!(set.project(&z).dist(&z) < 1e-12);
        // C = I fully determined
        let set2 = AffineConstraintSet::new(
            DenseMatrix::identity(2),
            DenseVector::from_raw(vec![0.3, -0.7]),
        )
        .unwrap();
        let p2 = set2.project(&DenseVector::from_raw(vec![9.0, 9.0]));
        assert!((p2[0] - 0.3).abs() < 1e-12 && (p2[1] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn projection_invariants_random() {
        let mut r = rng(1);
        for _ in 0..50 {
            let cols = r.gen_range(2..7);
            let rows = r.gen_range(1..cols);
            let set = random_affine(&mut r, rows, cols);
            let z = rvec(&mut r, cols);
            let p = set.project(&z);
            assert!(set.residual(&p) <= 1e-10 * (1.0 + set.rhs().norm()));
            // idempotent
            assert!(set.project(&p).dist(&p) <= 1e-12);
            // nonexpansive
            let z2 = rvec(&mut r, cols);
            let p2 = set.project(&z2);
            assert!(p.dist(&p2) <= z.dist(&z2) + 1e-12);
        }
    }

    #[test]
    fn rank_deficient_rejected() {
        let c = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let err = AffineConstraintSet::new(c, DenseVector::zeros(2));
        assert!(matches!(err, Err(Error::RankDeficient { .. })));
    }

    fn sp_with(
        gamma: f64,
        y_bar: DenseVector,
        k: Arc<dyn LinearMap>,
        f: SmoothPart,
        h: Arc<dyn ProxFn>,
    ) -> SmoothedPrimal {
        SmoothedPrimal::new(gamma, y_bar, k, Arc::new(f), h).unwrap()
    }

    #[test]
    fn value_with_point_indicator_reduces_to_f_minus_shift() {
        // h* = δ_{0}: the coupling collapses to -||ȳ||²/(2γ) for every x
        let mut r = rng(2);
        let gamma = 0.7;
        let y_bar = rvec(&mut r, 3);
        let f = SmoothPart::Linear { c: rvec(&mut r, 3) };
        let sp = sp_with(
            gamma,
            y_bar.clone(),
            Arc::new(IdentityMap { dim: 3 }),
            f,
            Arc::new(PointIndicator::origin(3)),
        );
        for _ in 0..10 {
            let x = rvec(&mut r, 3);
            let expect = sp.f.value(&x) - y_bar.norm_sq() / (2.0 * gamma);
            assert!((smoothed_value(&sp, &x) - expect).abs() < 1e-12);
            // gradient = ∇f (prox ≡ 0)
            let g = smoothed_gradient(&sp, &x);
            assert!(g.dist(&sp.f.gradient(&x)) < 1e-12);
        }
    }

    #[test]
    fn value_with_zero_fn_is_explicit_quadratic() {
        let mut r = rng(3);
        let gamma = 1.3;
        let y_bar = rvec(&mut r, 2);
        let sp = sp_with(
            gamma,
            y_bar.clone(),
            Arc::new(IdentityMap { dim: 2 }),
            SmoothPart::Linear {
                c: DenseVector::zeros(2),
            },
            Arc::new(ZeroFn { dim: 2 }),
        );
        for _ in 0..10 {
            let x = rvec(&mut r, 2);
            let expect = 0.5 * gamma * x.norm_sq() + x.dot(&y_bar);
            assert!((smoothed_value(&sp, &x) - expect).abs() < 1e-12);
            let mut g_expect = y_bar.clone();
            g_expect.add_scaled(gamma, &x);
            assert!(smoothed_gradient(&sp, &x).dist(&g_expect) < 1e-12);
        }
    }

    #[test]
    fn value_affine_hand_case() {
        // γ=1, ȳ=0, K=I, S = {y: y1+y2=0}, x=(1,1): value = f(x)
        let set = Arc::new(
            AffineConstraintSet::new(
                DenseMatrix::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
                DenseVector::zeros(1),
            )
            .unwrap(),
        );
        let sp = sp_with(
            1.0,
            DenseVector::zeros(2),
            Arc::new(IdentityMap { dim: 2 }),
            SmoothPart::Linear {
                c: DenseVector::zeros(2),
            },
            Arc::new(AffineSetIndicator { set }),
        );
        let x = DenseVector::from_raw(vec![1.0, 1.0]);
        assert!(smoothed_value(&sp, &x).abs() < 1e-12);
    }

    fn random_affine_instance(
        r: &mut ChaCha8Rng,
    ) -> (SmoothedPrimal, Arc<AffineConstraintSet>, usize) {
        let xdim = r.gen_range(2..5);
        let ydim = r.gen_range(2..5);
        let rows = r.gen_range(1..ydim);
        let set = random_affine(r, rows, ydim);
        let k = DenseMatrix::from_rows(
            (0..ydim)
                .map(|_| (0..xdim).map(|_| r.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap();
        let gamma = r.gen_range(0.2..2.0);
        let y_bar = rvec(r, ydim);
        let sp = sp_with(
            gamma,
            y_bar,
            Arc::new(MatrixMap::new(k)),
            SmoothPart::Linear { c: rvec(r, xdim) },
            Arc::new(AffineSetIndicator { set: set.clone() }),
        );
        (sp, set, xdim)
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_affine_instances() {
        let mut r = rng(4);
        for _ in 0..100 {
            let (sp, _, xdim) = random_affine_instance(&mut r);
            let x = rvec(&mut r, xdim);
            let g = smoothed_gradient(&sp, &x);
            let h = 1e-5 * (1.0 + x.norm());
            for i in 0..xdim {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (smoothed_value(&sp, &xp) - smoothed_value(&sp, &xm)) / (2.0 * h);
                let scale = g[i].abs().max(1.0);
                assert!(
                    (g[i] - fd).abs() / scale <= 1e-6,
                    "grad {} vs fd {fd}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn value_matches_explicit_affine_quadratic() {
        // independent evaluation of the closed-form quadratic for δ_S
        let mut r = rng(5);
        for _ in 0..50 {
            let (sp, set, xdim) = random_affine_instance(&mut r);
            let x = rvec(&mut r, xdim);
            let kx = sp.k.apply(&x);
            let z = {
                let mut z = sp.y_bar.clone();
                z.add_scaled(sp.gamma, &kx);
                z
            };
            // (γ/2)||Kx||² + <Kx,ȳ> - (1/2γ)||C*(CC*)^{-1}(d - Cz)||²
            let resid = set.project(&z).sub(&z);
            let explicit = 0.5 * sp.gamma * kx.norm_sq() + kx.dot(&sp.y_bar)
                - resid.norm_sq() / (2.0 * sp.gamma)
                + sp.f.value(&x);
            let got = smoothed_value(&sp, &x);
            let scale = explicit.abs().max(1.0);
            assert!((got - explicit).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn objective_wrapper_delegates_exactly() {
        let mut r = rng(10);
        let (sp, _, xdim) = random_affine_instance(&mut r);
        let obj: &dyn SmoothObjective = &sp;
        for _ in 0..10 {
            let x = rvec(&mut r, xdim);
            assert_eq!(obj.value(&x), smoothed_value(&sp, &x));
            assert_eq!(
                obj.gradient(&x).as_slice(),
                smoothed_gradient(&sp, &x).as_slice()
            );
        }
        assert_eq!(
            obj.lipschitz(),
            sp.f.lipschitz() + sp.gamma * sp.k.norm_bound() * sp.k.norm_bound()
        );
    }

    #[test]
    fn curvature_along_equals_second_difference() {
        let mut r = rng(6);
        for _ in 0..50 {
            let (sp, _, xdim) = random_affine_instance(&mut r);
            let x = rvec(&mut r, xdim);
            let d = rvec(&mut r, xdim);
            let curv = sp.curvature_along(&x, &d).expect("quadratic case");
            let xp = x.add(&d);
            let xm = x.sub(&d);
            let second_diff =
                smoothed_value(&sp, &xp) + smoothed_value(&sp, &xm) - 2.0 * smoothed_value(&sp, &x);
            let scale = curv.abs().max(1.0);
            assert!((curv - second_diff).abs() / scale < 1e-7);
        }
    }

    #[test]
    fn lipschitz_field_is_exact_formula() {
        let mut r = rng(7);
        let (sp, _, _) = random_affine_instance(&mut r);
        let expect = sp.f.lipschitz() + sp.gamma * sp.k.norm_bound() * sp.k.norm_bound();
        assert_eq!(sp.lipschitz(), expect);
    }

    #[test]
    fn moreau_envelope_cases() {
        // h = 0 -> envelope 0
        let z = DenseVector::from_raw(vec![3.0, 4.0]);
        let zero = ZeroFn { dim: 2 };
        assert_eq!(moreau_envelope(&zero, 1.0, &z).unwrap(), 0.0);
        // h = δ_{0}, μ=1, z=(3,4) -> ||z||²/2 = 12.5
        let point = PointIndicator::origin(2);
        assert!((moreau_envelope(&point, 1.0, &z).unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn moreau_decomposition_self_conjugate_quadratic() {
        // (1/2μ)||x||² = m_f^μ(x) + m_{f*}^{1/μ}(x/μ) with f = ½||·||²
        let f = crate::problem::HalfSquaredNorm { dim: 2 };
        let x = DenseVector::from_raw(vec![1.0, 0.0]);
        let m1 = moreau_envelope(&f, 1.0, &x).unwrap();
        let m2 = moreau_envelope(&f, 1.0, &x).unwrap();
        assert!((m1 - 0.25).abs() < 1e-12);
        assert!((m1 + m2 - 0.5 * x.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn moreau_decomposition_affine_pair() {
        let mut r = rng(8);
        for _ in 0..50 {
            let cols = r.gen_range(2..6);
            let rows = r.gen_range(1..cols);
            let set = random_affine(&mut r, rows, cols);
            let ind = AffineSetIndicator { set: set.clone() };
            let sup = SupportOfAffine { set: set.clone() };
            let x = rvec(&mut r, cols);
            let mu = r.gen_range(0.2..3.0);
            let m1 = moreau_envelope(&ind, mu, &x).unwrap();
            let m2 = moreau_envelope(&sup, 1.0 / mu, &x.scaled(1.0 / mu)).unwrap();
            let lhs = x.norm_sq() / (2.0 * mu);
            assert!(
                (lhs - (m1 + m2)).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "decomposition residual {}",
                (lhs - (m1 + m2)).abs()
            );
        }
    }

    #[test]
    fn moreau_identity_cases() {
        // f = ½||·||², μ=1, z=(2,0): exact split (1,0) + (1,0)
        let f = crate::problem::HalfSquaredNorm { dim: 2 };
        let z = DenseVector::from_raw(vec![2.0, 0.0]);
        assert!(moreau_identity_check(&f, &f, 1.0, &z) < 1e-12);
        // (δ_{0}, 0) pair
        let ind = PointIndicator::origin(2);
        let zero = ZeroFn { dim: 2 };
        assert!(moreau_identity_check(&ind, &zero, 0.7, &z) < 1e-12);
        // random affine pairs
        let mut r = rng(9);
        for _ in 0..50 {
            let cols = r.gen_range(2..6);
            let rows = r.gen_range(1..cols);
            let set = random_affine(&mut r, rows, cols);
            let ind = AffineSetIndicator { set: set.clone() };
            let sup = SupportOfAffine { set };
            let z = rvec(&mut r, cols);
            let mu = r.gen_range(0.2..3.0);
            assert!(moreau_identity_check(&ind, &sup, mu, &z) <= 1e-10);
        }
    }
}
