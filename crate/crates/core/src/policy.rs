//! Frozen-state policy iteration over the Q-function costate `P`.
//!
//! At a fixed state the closed-loop map `U = [I; K] G(x)` is time invariant,
//! and alternating
//!
//! ```text
//! K ← −P_mm⁻¹ P_nmᵀ            (improvement)
//! P ← Λ + γ Uᵀ(K) P U(K)       (evaluation)
//! ```
//!
//! from `P = Λ` converges to the discounted LQ solution of that frozen
//! problem. `U` comes from a [`ClosedLoopProvider`], which is either the
//! data-only reconstruction or the known plant.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrices;
use crate::error::{Error, Result};
use crate::linalg;
use crate::system::{BilinearSystem, CostSpec};

/// Tolerance on the smallest eigenvalue of `sym(S P)` in the transversality check.
pub const TRANSVERSALITY_TOLERANCE: f64 = 1e-9;

/// Symmetric `(n+m) × (n+m)` costate with its block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateMatrix {
    p: DMatrix<f64>,
    n: usize,
}

impl CostateMatrix {
    /// Symmetrizes `p`.
    pub fn new(p: DMatrix<f64>, n: usize) -> Result<Self> {
        if p.nrows() != p.ncols() || n == 0 || n >= p.nrows() {
            return Err(Error::InvalidArgument(format!(
                "costate must be square with state dimension {n} < size, got {:?}",
                p.shape()
            )));
        }
        Ok(Self {
            p: linalg::symmetrize(&p),
            n,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.p.nrows() - self.n
    }

    pub fn p_nn(&self) -> DMatrix<f64> {
        self.p.view((0, 0), (self.n, self.n)).clone_owned()
    }

    pub fn p_nm(&self) -> DMatrix<f64> {
        self.p.view((0, self.n), (self.n, self.m())).clone_owned()
    }

    pub fn p_mm(&self) -> DMatrix<f64> {
        let m = self.m();
        self.p.view((self.n, self.n), (m, m)).clone_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    #[serde(default = "IterationConfig::default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "IterationConfig::default_max_iterations")]
    pub max_iterations: usize,
}

impl IterationConfig {
    fn default_epsilon() -> f64 {
        1e-10
    }

    fn default_max_iterations() -> usize {
        10_000
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            epsilon: Self::default_epsilon(),
            max_iterations: Self::default_max_iterations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub gain: DMatrix<f64>,
    pub p_star: CostateMatrix,
    pub iterations: usize,
    /// `‖P(T) − P(T−1)‖_F` at the last sweep.
    pub final_residual: f64,
    pub converged: bool,
}

/// Maps a gain `K` to the frozen closed-loop matrix `U(K)`.
pub trait ClosedLoopProvider {
    fn closed_loop(&self, gain: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

impl<F> ClosedLoopProvider for F
where
    F: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    fn closed_loop(&self, gain: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self(gain)
    }
}

/// `U(K) = [I; K] G` for a fixed `n × (n+m)` transition matrix `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenTransition {
    g: DMatrix<f64>,
}

impl FrozenTransition {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if g.ncols() <= g.nrows() {
            return Err(Error::InvalidArgument(format!(
                "transition must be n x (n+m), got {:?}",
                g.shape()
            )));
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite frozen transition".into()));
        }
        Ok(Self { g })
    }

    /// `G(x)` from the known plant.
    pub fn model_based(sys: &BilinearSystem, x: &DVector<f64>) -> Result<Self> {
        Self::new(sys.ltv_matrix(x)?)
    }

    /// `G(x)` rebuilt from frozen data matrices alone.
    pub fn model_free(data: &DataMatrices, x: &DVector<f64>) -> Result<Self> {
        Self::new(data.reconstruct_transition(x)?)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn m(&self) -> usize {
        self.g.ncols() - self.g.nrows()
    }

    /// State block `A_f`.
    pub fn state_block(&self) -> DMatrix<f64> {
        self.g.columns(0, self.n()).clone_owned()
    }

    /// Input block `B_f = B + Σ_j x_j D_j`.
    pub fn input_block(&self) -> DMatrix<f64> {
        self.g.columns(self.n(), self.m()).clone_owned()
    }

    /// `ρ(A_f + B_f K)`.
    pub fn closed_loop_spectral_radius(&self, gain: &DMatrix<f64>) -> Result<f64> {
        linalg::spectral_radius(&(self.state_block() + self.input_block() * gain))
    }
}

impl ClosedLoopProvider for FrozenTransition {
    fn closed_loop(&self, gain: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if gain.shape() != (self.m(), self.n()) {
            return Err(Error::dims(
                "gain",
                format!("{}x{}", self.m(), self.n()),
                format!("{:?}", gain.shape()),
            ));
        }
        Ok(linalg::identity_over(gain) * &self.g)
    }
}

/// `K = −P_mm⁻¹ P_nmᵀ`.
pub fn improve_gain(p: &CostateMatrix) -> Result<DMatrix<f64>> {
    let chol = p
        .p_mm()
        .cholesky()
        .ok_or(Error::SecondOrderConditionViolated)?;
    let k = -chol.solve(&p.p_nm().transpose());
    if k.iter().all(|v| v.is_finite()) {
        Ok(k)
    } else {
        Err(Error::Numerical("non-finite gain".into()))
    }
}

/// `Λ + γ Uᵀ P U`, symmetrized.
pub fn evaluate_step(
    p: &CostateMatrix,
    u: &DMatrix<f64>,
    cost: &CostSpec,
) -> Result<CostateMatrix> {
    let dim = p.matrix().nrows();
    if u.shape() != (dim, dim) || cost.dim() != dim {
        return Err(Error::dims(
            "closed-loop map",
            format!("{dim}x{dim}"),
            format!("{:?}", u.shape()),
        ));
    }
    let next = cost.lambda() + (u.transpose() * p.matrix() * u) * cost.gamma();
    CostateMatrix::new(next, p.n())
}

/// Policy iteration from `P = Λ`.
pub fn solve_frozen<P: ClosedLoopProvider + ?Sized>(
    provider: &P,
    cost: &CostSpec,
    iteration: &IterationConfig,
) -> Result<SolveReport> {
    let start = CostateMatrix::new(cost.lambda().clone(), cost.n())?;
    solve_frozen_from(provider, cost, iteration, start)
}

/// Policy iteration from an arbitrary symmetric starting costate.
pub fn solve_frozen_from<P: ClosedLoopProvider + ?Sized>(
    provider: &P,
    cost: &CostSpec,
    iteration: &IterationConfig,
    start: CostateMatrix,
) -> Result<SolveReport> {
    iteration.validate()?;
    let mut p = start;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < iteration.max_iterations {
        iterations += 1;
        let k = improve_gain(&p)?;
        let u = provider.closed_loop(&k)?;
        let next = evaluate_step(&p, &u, cost)?;
        residual = (next.matrix() - p.matrix()).norm();
        if !residual.is_finite() {
            return Err(Error::Numerical(format!(
                "costate diverged after {iterations} iterations"
            )));
        }
        p = next;
        if residual <= iteration.epsilon {
            converged = true;
            break;
        }
    }
    let gain = improve_gain(&p)?;
    Ok(SolveReport {
        gain,
        p_star: p,
        iterations,
        final_residual: residual,
        converged,
    })
}

/// Largest gain deviation over `starts` solves begun from `Λ + E Eᵀ` with
/// random `E`; a numerical probe of fixed-point uniqueness.
pub fn multi_start_spread<P: ClosedLoopProvider + ?Sized>(
    provider: &P,
    cost: &CostSpec,
    iteration: &IterationConfig,
    starts: usize,
    seed: u64,
) -> Result<f64> {
    let base = solve_frozen(provider, cost, iteration)?;
    let dim = cost.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spread: f64 = 0.0;
    for _ in 0..starts {
        let e = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let start = CostateMatrix::new(cost.lambda() + &e * e.transpose(), cost.n())?;
        let report = solve_frozen_from(provider, cost, iteration, start)?;
        spread = spread.max((report.gain - &base.gain).norm());
    }
    Ok(spread)
}

/// Discounted cross-weighted Riccati value iteration from `M = 0`.
///
/// Solves `M = Λ_nn + γAᵀMA − S R⁻¹ Sᵀ` with `R = Λ_mm + γBᵀMB` and
/// `S = Λ_nm + γAᵀMB`, and returns `(K, M)` with `K = −R⁻¹Sᵀ`. Stops when
/// `‖ΔM‖_F ≤ tol · max(1, ‖M‖_F)`.
pub fn oracle_riccati(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    cost: &CostSpec,
    tol: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    const MAX_SWEEPS: usize = 1_000_000;
    const OVERFLOW_GUARD: f64 = 1e100;
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || cost.n() != n || cost.m() != b.ncols() {
        return Err(Error::dims(
            "frozen pair",
            format!("n={}, m={}", cost.n(), cost.m()),
            format!("A {:?}, B {:?}", a.shape(), b.shape()),
        ));
    }
    let gamma = cost.gamma();
    let (l_nn, l_nm, l_mm) = (cost.lambda_nn(), cost.lambda_nm(), cost.lambda_mm());
    let gain_parts = |m: &DMatrix<f64>| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let r = &l_mm + (b.transpose() * m * b) * gamma;
        let s = &l_nm + (a.transpose() * m * b) * gamma;
        let chol = r.cholesky().ok_or(Error::SecondOrderConditionViolated)?;
        Ok((chol.solve(&s.transpose()), s))
    };
    let mut m = DMatrix::zeros(n, n);
    for _ in 0..MAX_SWEEPS {
        let (r_inv_st, s) = gain_parts(&m)?;
        let next = linalg::symmetrize(&(&l_nn + (a.transpose() * &m * a) * gamma - s * r_inv_st));
        let norm = next.norm();
        if !norm.is_finite() || norm > OVERFLOW_GUARD {
            return Err(Error::NotStabilizable);
        }
        let delta = (&next - &m).norm();
        m = next;
        if delta <= tol * norm.max(1.0) {
            let (r_inv_st, _) = gain_parts(&m)?;
            return Ok((-r_inv_st, m));
        }
    }
    Err(Error::NotStabilizable)
}

/// `Tr(Λ S) + γ Tr(Pᵀ U S_prev Uᵀ)` with `S = U S_prev Uᵀ`.
pub fn hamiltonian_value(
    p: &CostateMatrix,
    s_prev: &DMatrix<f64>,
    u: &DMatrix<f64>,
    cost: &CostSpec,
) -> f64 {
    let s = u * s_prev * u.transpose();
    hamiltonian_at_state(p, &s, s_prev, u, cost)
}

/// Hamiltonian with the current state matrix `S` held as an independent
/// argument, as in the stationarity condition with respect to the gain.
pub fn hamiltonian_at_state(
    p: &CostateMatrix,
    s: &DMatrix<f64>,
    s_prev: &DMatrix<f64>,
    u: &DMatrix<f64>,
    cost: &CostSpec,
) -> f64 {
    let propagated = u * s_prev * u.transpose();
    (cost.lambda() * s).trace() + cost.gamma() * (p.matrix().transpose() * propagated).trace()
}

/// Smallest eigenvalue of `sym(S P)` is at least `−TRANSVERSALITY_TOLERANCE`.
pub fn transversality_check(p: &CostateMatrix, s: &DMatrix<f64>) -> bool {
    if s.shape() != p.matrix().shape() {
        return false;
    }
    let sp = s * p.matrix();
    linalg::sym_eig_extremes(&linalg::symmetrize(&sp)).0 >= -TRANSVERSALITY_TOLERANCE
}
