//! The bilinear plant `x⁺ = A x + B u + Σ_j x_j D_j u`, its frozen-state
//! (time-varying) and lifted (time-invariant) views, and the quadratic cost.
//!
//! The learner never reads the plant matrices: it only sees a
//! [`SystemOracle`]. Everything that needs `A`, `B` or `D` directly (the
//! model-based baseline, diagnostics, tests) goes through the methods here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Black-box access to a plant: given `(x, u)`, return the next state.
pub trait SystemOracle {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn step(&mut self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Plant matrices of a discrete-time bilinear system.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    d: Vec<DMatrix<f64>>,
}

impl BilinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, d: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(
                "state and input dimensions must be positive".into(),
            ));
        }
        if a.ncols() != n {
            return Err(Error::dims(
                "A",
                format!("{n}x{n}"),
                format!("{}x{}", n, a.ncols()),
            ));
        }
        if b.nrows() != n {
            return Err(Error::dims(
                "B",
                format!("{n}x{m}"),
                format!("{}x{}", b.nrows(), m),
            ));
        }
        if d.len() != n {
            return Err(Error::dims("D", format!("{n} matrices"), d.len()));
        }
        for dj in &d {
            if dj.shape() != (n, m) {
                return Err(Error::dims(
                    "D_j",
                    format!("{n}x{m}"),
                    format!("{:?}", dj.shape()),
                ));
            }
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(d.iter().flat_map(|dj| dj.iter()));
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "plant matrices must be finite".into(),
            ));
        }
        Ok(Self { a, b, d })
    }

    /// A linear plant (all `D_j = 0`).
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let (n, m) = b.shape();
        Self::new(a, b, vec![DMatrix::zeros(n, m); n])
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `D_1, …, D_n`.
    pub fn d(&self) -> &[DMatrix<f64>] {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Lifted dimension `n + m + nm`.
    pub fn lifted_dim(&self) -> usize {
        lifted_dim(self.n(), self.m())
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::dims("state", self.n(), x.len()));
        }
        Ok(())
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.m() {
            return Err(Error::dims("input", self.m(), u.len()));
        }
        Ok(())
    }

    /// `B + Σ_j x_j D_j`, the effective input matrix at state `x`.
    pub fn input_matrix_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        let mut bx = self.b.clone();
        for (xj, dj) in x.iter().zip(&self.d) {
            bx += dj * *xj;
        }
        Ok(bx)
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(x)?;
        self.check_input(u)?;
        let mut next = &self.a * x + &self.b * u;
        for (xj, dj) in x.iter().zip(&self.d) {
            next += (dj * u) * *xj;
        }
        Ok(next)
    }

    /// Frozen-state system matrix `G(x) = [A | B + Σ_j x_j D_j]`.
    pub fn ltv_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let bx = self.input_matrix_at(x)?;
        let (n, m) = (self.n(), self.m());
        let mut g = DMatrix::zeros(n, n + m);
        g.view_mut((0, 0), (n, n)).copy_from(&self.a);
        g.view_mut((0, n), (n, m)).copy_from(&bx);
        Ok(g)
    }

    /// Lifted system matrix `H = [A B D_1 … D_n]`, so that `x⁺ = H ξ`.
    pub fn lti_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut h = DMatrix::zeros(n, self.lifted_dim());
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, m)).copy_from(&self.b);
        for (j, dj) in self.d.iter().enumerate() {
            h.view_mut((0, n + m + j * m), (n, m)).copy_from(dj);
        }
        h
    }

    /// `ρ(A + (B + Σ_j x_j D_j) K)`, the frozen closed-loop spectral radius.
    pub fn closed_loop_spectral_radius(&self, x: &DVector<f64>, k: &DMatrix<f64>) -> Result<f64> {
        if k.shape() != (self.m(), self.n()) {
            return Err(Error::dims(
                "gain",
                format!("{}x{}", self.m(), self.n()),
                format!("{:?}", k.shape()),
            ));
        }
        let closed = &self.a + self.input_matrix_at(x)? * k;
        linalg::spectral_radius(&closed)
    }

    /// PBH detectability of `(A − B Λ_mm⁻¹ Λ_nmᵀ, Λ_nn − Λ_nm Λ_mm⁻¹ Λ_nmᵀ)`.
    pub fn detectability_check(&self, cost: &CostSpec) -> Result<bool> {
        let (n, m) = (self.n(), self.m());
        if cost.n() != n || cost.m() != m {
            return Err(Error::dims("cost", n + m, cost.dim()));
        }
        let lmm = cost.lambda_mm();
        let lnm = cost.lambda_nm();
        let chol = lmm
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("Λ_mm is singular".into()))?;
        let lmm_inv_lnm_t = chol.solve(&lnm.transpose());
        let a_tilde = &self.a - &self.b * &lmm_inv_lnm_t;
        let schur = cost.lambda_nn() - &lnm * &lmm_inv_lnm_t;

        for lambda in a_tilde.complex_eigenvalues().iter() {
            if lambda.norm() < 1.0 {
                continue;
            }
            // Real embedding of the complex matrix [Ã − λI; C]: rank doubles.
            let mut re = DMatrix::zeros(2 * n, n);
            let mut im = DMatrix::zeros(2 * n, n);
            re.view_mut((0, 0), (n, n)).copy_from(&a_tilde);
            for i in 0..n {
                re[(i, i)] -= lambda.re;
                im[(i, i)] = -lambda.im;
            }
            re.view_mut((n, 0), (n, n)).copy_from(&schur);
            let mut emb = DMatrix::zeros(4 * n, 2 * n);
            emb.view_mut((0, 0), (2 * n, n)).copy_from(&re);
            emb.view_mut((0, n), (2 * n, n)).copy_from(&(-&im));
            emb.view_mut((2 * n, 0), (2 * n, n)).copy_from(&im);
            emb.view_mut((2 * n, n), (2 * n, n)).copy_from(&re);
            let scale = 1.0 + a_tilde.norm() + schur.norm();
            let sv = emb.singular_values();
            let rank = sv.iter().filter(|&&s| s > 1e-10 * scale).count();
            if rank < 2 * n {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl SystemOracle for BilinearSystem {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn input_dim(&self) -> usize {
        self.m()
    }

    fn step(&mut self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        BilinearSystem::step(self, x, u)
    }
}

pub fn lifted_dim(n: usize, m: usize) -> usize {
    n + m + n * m
}

/// `z = [x; u]`.
pub fn stack_state_input(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut z = DVector::zeros(x.len() + u.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), u.len()).copy_from(u);
    z
}

/// `ξ = [x; u; x⊗u]` with the lifted block ordered `(x_1 u; …; x_n u)`.
pub fn lift(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let (n, m) = (x.len(), u.len());
    let mut xi = DVector::zeros(lifted_dim(n, m));
    xi.rows_mut(0, n).copy_from(x);
    xi.rows_mut(n, m).copy_from(u);
    xi.rows_mut(n + m, n * m).copy_from(&kronecker_block(x, u));
    xi
}

/// `x⊗u` ordered `(x_1 u; …; x_n u)`.
pub fn kronecker_block(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    x.kronecker(u)
}

/// Selector `L(x) = [I_n 0; 0 I_m; 0 x⊗I_m]` with `L(x) z = ξ`.
pub fn lift_selector(x: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut l = DMatrix::zeros(lifted_dim(n, m), n + m);
    l.view_mut((0, 0), (n + m, n + m)).fill_with_identity();
    for (j, xj) in x.iter().enumerate() {
        for i in 0..m {
            l[(n + m + j * m + i, n + i)] = *xj;
        }
    }
    l
}

/// One plant transition `(x, u, x⁺)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSample {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub x_next: DVector<f64>,
}

impl LiftedSample {
    pub fn new(x: DVector<f64>, u: DVector<f64>, x_next: DVector<f64>) -> Result<Self> {
        if x_next.len() != x.len() {
            return Err(Error::dims("sample x_next", x.len(), x_next.len()));
        }
        Ok(Self { x, u, x_next })
    }

    pub fn z(&self) -> DVector<f64> {
        stack_state_input(&self.x, &self.u)
    }

    pub fn xi(&self) -> DVector<f64> {
        lift(&self.x, &self.u)
    }
}

/// Quadratic penalty `Λ` on `z = [x; u]` and discount factor `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    lambda: DMatrix<f64>,
    gamma: f64,
    n: usize,
}

impl CostSpec {
    /// `lambda` is symmetrized; `n` is the state dimension.
    pub fn new(lambda: DMatrix<f64>, gamma: f64, n: usize) -> Result<Self> {
        let dim = lambda.nrows();
        if lambda.ncols() != dim {
            return Err(Error::InvalidArgument("Λ must be square".into()));
        }
        if n == 0 || n >= dim {
            return Err(Error::InvalidArgument(format!(
                "state dimension {n} incompatible with Λ of size {dim}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "γ must lie in (0, 1), got {gamma}"
            )));
        }
        if !lambda.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("Λ must be finite".into()));
        }
        let lambda = linalg::symmetrize(&lambda);
        let (min_eig, max_eig) = linalg::sym_eig_extremes(&lambda);
        if min_eig < -1e-12 * max_eig.abs().max(1.0) {
            return Err(Error::InvalidArgument(
                "Λ must be positive semi-definite".into(),
            ));
        }
        let m = dim - n;
        let lmm = lambda.view((n, n), (m, m)).clone_owned();
        if linalg::sym_eig_extremes(&lmm).0 <= 0.0 {
            return Err(Error::InvalidArgument(
                "Λ_mm must be positive definite".into(),
            ));
        }
        Ok(Self { lambda, gamma, n })
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.lambda.nrows() - self.n
    }

    pub fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn lambda_nn(&self) -> DMatrix<f64> {
        self.lambda.view((0, 0), (self.n, self.n)).clone_owned()
    }

    pub fn lambda_nm(&self) -> DMatrix<f64> {
        self.lambda
            .view((0, self.n), (self.n, self.m()))
            .clone_owned()
    }

    pub fn lambda_mm(&self) -> DMatrix<f64> {
        let m = self.m();
        self.lambda.view((self.n, self.n), (m, m)).clone_owned()
    }

    /// `zᵀ Λ z` with `z = [x; u]`.
    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        if x.len() != self.n || u.len() != self.m() {
            return Err(Error::dims(
                "stage cost",
                format!("({}, {})", self.n, self.m()),
                format!("({}, {})", x.len(), u.len()),
            ));
        }
        let z = stack_state_input(x, u);
        Ok(z.dot(&(&self.lambda * &z)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use proptest::prelude::*;

    fn scalar() -> BilinearSystem {
        BilinearSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![DMatrix::from_element(1, 1, 0.5)],
        )
        .unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn step_examples() {
        let hyd = examples::hydraulic().system;
        let next = hyd
            .step(&v(&[1.0, 1.0, 1.0]), &v(&[0.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(next, v(&[0.99997, -0.99997, 0.99997]));
        assert_eq!(
            hyd.step(&DVector::zeros(3), &DVector::zeros(3)).unwrap(),
            DVector::zeros(3)
        );
        assert_eq!(scalar().step(&v(&[2.0]), &v(&[1.0])).unwrap(), v(&[4.0]));
    }

    #[test]
    fn step_rejects_bad_dims() {
        let err = scalar().step(&v(&[1.0, 2.0]), &v(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(scalar().ltv_matrix(&v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn construction_validates_shapes() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::zeros(2, 1);
        assert!(BilinearSystem::new(a.clone(), b.clone(), vec![DMatrix::zeros(2, 1)]).is_err());
        assert!(BilinearSystem::new(a.clone(), b.clone(), vec![DMatrix::zeros(2, 2); 2]).is_err());
        assert!(BilinearSystem::new(a, b, vec![DMatrix::zeros(2, 1); 2]).is_ok());
    }

    #[test]
    fn ltv_examples() {
        let hyd = examples::hydraulic().system;
        let g0 = hyd.ltv_matrix(&DVector::zeros(3)).unwrap();
        let mut ab = DMatrix::zeros(3, 6);
        ab.view_mut((0, 0), (3, 3))
            .copy_from(&DMatrix::from_diagonal(&v(&[0.99997, -0.99997, 0.99997])));
        ab.view_mut((0, 3), (3, 3))
            .copy_from(&DMatrix::from_diagonal(&v(&[200.0, 6.0, 10.0])));
        assert_eq!(g0, ab);
        assert_eq!(
            scalar().ltv_matrix(&v(&[2.0])).unwrap(),
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0])
        );
    }

    #[test]
    fn selector_examples() {
        assert_eq!(
            lift_selector(&v(&[3.0]), 1),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 3.0])
        );
        let l0 = lift_selector(&DVector::zeros(2), 3);
        let mut expected = DMatrix::zeros(11, 5);
        expected.view_mut((0, 0), (5, 5)).fill_with_identity();
        assert_eq!(l0, expected);
    }

    #[test]
    fn lti_examples() {
        assert_eq!(
            scalar().lti_matrix(),
            DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.5])
        );
        let lin = BilinearSystem::linear(
            DMatrix::from_element(2, 2, 0.3),
            DMatrix::from_element(2, 1, 2.0),
        )
        .unwrap();
        let h = lin.lti_matrix();
        assert_eq!(h.columns(3, 2), DMatrix::<f64>::zeros(2, 2));
        assert_eq!(h.columns(0, 2), DMatrix::from_element(2, 2, 0.3));
    }

    #[test]
    fn kronecker_ordering() {
        let xi = lift(&v(&[2.0, 3.0]), &v(&[5.0, 7.0]));
        assert_eq!(xi, v(&[2.0, 3.0, 5.0, 7.0, 10.0, 14.0, 15.0, 21.0]));
    }

    #[test]
    fn stage_cost_examples() {
        let eye = CostSpec::new(DMatrix::identity(3, 3), 0.9, 2).unwrap();
        assert_eq!(eye.stage_cost(&v(&[1.0, 0.0]), &v(&[1.0])).unwrap(), 2.0);
        assert_eq!(
            eye.stage_cost(&DVector::zeros(2), &DVector::zeros(1))
                .unwrap(),
            0.0
        );
        let nuclear = CostSpec::new(DMatrix::from_diagonal(&v(&[1.0, 0.0, 0.1])), 0.9, 2).unwrap();
        let c = nuclear.stage_cost(&v(&[2.0, 5.0]), &v(&[3.0])).unwrap();
        assert!((c - 4.9).abs() < 1e-12);
    }

    #[test]
    fn cost_validation() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert!(CostSpec::new(eye.clone(), 1.0, 1).is_err());
        assert!(CostSpec::new(eye.clone(), 0.0, 1).is_err());
        assert!(CostSpec::new(DMatrix::from_diagonal(&v(&[1.0, 0.0])), 0.5, 1).is_err());
        assert!(CostSpec::new(DMatrix::from_diagonal(&v(&[-1.0, 1.0])), 0.5, 1).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        let c = CostSpec::new(asym, 0.5, 1).unwrap();
        assert_eq!(c.lambda()[(0, 1)], 0.1);
        assert_eq!(c.lambda()[(1, 0)], 0.1);
    }

    #[test]
    fn spectral_radius_examples() {
        let sys = BilinearSystem::linear(
            DMatrix::from_diagonal(&v(&[0.5, 0.2])),
            DMatrix::from_element(2, 1, 1.0),
        )
        .unwrap();
        let rho = sys
            .closed_loop_spectral_radius(&v(&[1.0, 1.0]), &DMatrix::zeros(1, 2))
            .unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
        let rho = scalar()
            .closed_loop_spectral_radius(&v(&[2.0]), &DMatrix::from_element(1, 1, -0.5))
            .unwrap();
        assert!(rho.abs() < 1e-12);
    }

    #[test]
    fn detectability_examples() {
        let stable = BilinearSystem::linear(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let eye = CostSpec::new(DMatrix::identity(2, 2), 0.9, 1).unwrap();
        assert!(stable.detectability_check(&eye).unwrap());

        let unstable =
            BilinearSystem::linear(DMatrix::from_element(1, 1, 2.0), DMatrix::zeros(1, 1)).unwrap();
        let blind = CostSpec::new(DMatrix::from_diagonal(&v(&[0.0, 1.0])), 0.9, 1).unwrap();
        assert!(!unstable.detectability_check(&blind).unwrap());
        assert!(unstable.detectability_check(&eye).unwrap());

        let hyd = examples::hydraulic();
        assert!(hyd.system.detectability_check(&hyd.cost).unwrap());
    }

    fn arb_system() -> impl Strategy<Value = (BilinearSystem, DVector<f64>, DVector<f64>)> {
        (1usize..=4, 1usize..=3).prop_flat_map(|(n, m)| {
            let mat = |r: usize, c: usize| prop::collection::vec(-1.0f64..1.0, r * c);
            (
                mat(n, n),
                mat(n, m),
                prop::collection::vec(mat(n, m), n),
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-1.0f64..1.0, m),
            )
                .prop_map(move |(a, b, d, x, u)| {
                    let sys = BilinearSystem::new(
                        DMatrix::from_vec(n, n, a),
                        DMatrix::from_vec(n, m, b),
                        d.into_iter()
                            .map(|dj| DMatrix::from_vec(n, m, dj))
                            .collect(),
                    )
                    .unwrap();
                    (sys, DVector::from_vec(x), DVector::from_vec(u))
                })
        })
    }

    proptest! {
        #[test]
        fn representations_agree((sys, x, u) in arb_system()) {
            let direct = sys.step(&x, &u).unwrap();
            let z = stack_state_input(&x, &u);
            let ltv = sys.ltv_matrix(&x).unwrap() * &z;
            let lti = sys.lti_matrix() * lift(&x, &u);
            let scale = 1.0 + direct.norm();
            prop_assert!((&ltv - &direct).norm() <= 1e-12 * scale);
            prop_assert!((&lti - &direct).norm() <= 1e-12 * scale);
            prop_assert_eq!(lift_selector(&x, u.len()) * &z, lift(&x, &u));
            let hl = sys.lti_matrix() * lift_selector(&x, u.len());
            prop_assert!((hl - sys.ltv_matrix(&x).unwrap()).norm() <= 1e-12);
        }

        #[test]
        fn step_is_bilinear((sys, x, u) in arb_system(), alpha in -2.0f64..2.0) {
            let u2 = u.map(|v| 0.5 - v);
            let x2 = x.map(|v| v * v - 0.3);
            let lhs = sys.step(&x, &(&u * alpha + &u2)).unwrap() - sys.step(&x, &DVector::zeros(u.len())).unwrap();
            let rhs = (sys.step(&x, &u).unwrap() - sys.step(&x, &DVector::zeros(u.len())).unwrap()) * alpha
                + sys.step(&x, &u2).unwrap() - sys.step(&x, &DVector::zeros(u.len())).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + alpha.abs()) * 10.0);
            let lhs = sys.step(&(&x * alpha + &x2), &u).unwrap() - sys.step(&DVector::zeros(x.len()), &u).unwrap();
            let rhs = (sys.step(&x, &u).unwrap() - sys.step(&DVector::zeros(x.len()), &u).unwrap()) * alpha
                + sys.step(&x2, &u).unwrap() - sys.step(&DVector::zeros(x.len()), &u).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + alpha.abs()) * 10.0);
        }

        #[test]
        fn stage_cost_nonnegative((sys, x, u) in arb_system(), seed in prop::collection::vec(-1.0f64..1.0, 49)) {
            let dim = sys.n() + sys.m();
            let f = DMatrix::from_fn(dim, dim, |i, j| seed[(i * 7 + j) % 49]);
            let mut lambda = &f * f.transpose();
            for i in sys.n()..dim {
                lambda[(i, i)] += 0.1;
            }
            let cost = CostSpec::new(lambda, 0.9, sys.n()).unwrap();
            prop_assert!(cost.stage_cost(&x, &u).unwrap() >= -1e-12);
        }
    }
}
