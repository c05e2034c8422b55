//! Gram-form data matrices from a single trajectory and the model-free
//! reconstruction of the frozen-state closed-loop map.
//!
//! With `X = Σ ξξᵀ`, `Z = Σ x⁺ξᵀ`, `V = Σ zξᵀ` and `W = VVᵀ`, noiseless data
//! satisfy `Z = H X`. Solving `X Y = L(x) V` then gives
//! `Z Y Vᵀ W⁻¹ = H L(x) = G(x)`.
//!
//! The product is evaluated as `(Z X⁻¹) L(x) (V Vᵀ W⁻¹)` and the last factor
//! is the identity once `W` is invertible, so reconstruction reduces to
//! `H L(x)` with `H` identified once at freeze. Multiplying through `Y` and
//! `W⁻¹` explicitly loses up to two orders of accuracy on ill-conditioned
//! data.
//!
//! A second pair of sums weighted by `1/‖ξ‖²` is kept alongside. Noiseless
//! data satisfy `Z̃ = H X̃` just the same, and on a fast-growing trajectory,
//! where the late samples swamp the early ones in `X`, the equilibrated `X̃`
//! can be orders of magnitude better conditioned. `H` is solved from
//! whichever of the two is better conditioned.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::excitation::{PE_TOLERANCE, RANK_TOLERANCE};
use crate::linalg;
use crate::system::{lift_selector, lifted_dim, LiftedSample};

#[derive(Debug, Clone)]
struct Factorization {
    /// Jacobi scaling `d` with `diag(d) X diag(d)` factorized.
    scale: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// Data-identified `H`.
    lifted: DMatrix<f64>,
    w_invertible: bool,
}

/// Accumulated data matrices; the learner's entire knowledge of the plant.
#[derive(Debug, Clone)]
pub struct DataMatrices {
    n: usize,
    m: usize,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    v: DMatrix<f64>,
    x_weighted: DMatrix<f64>,
    z_weighted: DMatrix<f64>,
    w: Option<DMatrix<f64>>,
    sample_count: usize,
    condition_x: Option<f64>,
    min_eigenvalue: Option<f64>,
    factor: Option<Factorization>,
}

impl DataMatrices {
    pub fn new(n: usize, m: usize) -> Self {
        let big_n = lifted_dim(n, m);
        Self {
            n,
            m,
            x: DMatrix::zeros(big_n, big_n),
            z: DMatrix::zeros(n, big_n),
            v: DMatrix::zeros(n + m, big_n),
            x_weighted: DMatrix::zeros(big_n, big_n),
            z_weighted: DMatrix::zeros(n, big_n),
            w: None,
            sample_count: 0,
            condition_x: None,
            min_eigenvalue: None,
            factor: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lifted_dim(&self) -> usize {
        lifted_dim(self.n, self.m)
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn is_frozen(&self) -> bool {
        self.factor.is_some()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn w(&self) -> Option<&DMatrix<f64>> {
        self.w.as_ref()
    }

    /// Condition number of the equilibrated `X`; set on freeze.
    pub fn condition_x(&self) -> Option<f64> {
        self.condition_x
    }

    /// Smallest eigenvalue of the equilibrated `X`; set on freeze.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.min_eigenvalue
    }

    pub fn accumulate(&mut self, sample: &LiftedSample) -> Result<()> {
        if self.is_frozen() {
            return Err(Error::Frozen);
        }
        if sample.x.len() != self.n || sample.u.len() != self.m {
            return Err(Error::dims(
                "sample",
                format!("(n={}, m={})", self.n, self.m),
                format!("(n={}, m={})", sample.x.len(), sample.u.len()),
            ));
        }
        let xi = sample.xi();
        let xi_t = xi.transpose();
        self.x += &xi * &xi_t;
        self.z += &sample.x_next * &xi_t;
        self.v += sample.z() * &xi_t;
        let norm_sq = xi.norm_squared();
        if norm_sq > 0.0 {
            let xi_w = xi_t / norm_sq;
            self.x_weighted += &xi * &xi_w;
            self.z_weighted += &sample.x_next * &xi_w;
        }
        self.sample_count += 1;
        Ok(())
    }

    /// Stops accumulation and factorizes `X`. Idempotent.
    pub fn freeze(&mut self) -> Result<()> {
        if self.is_frozen() {
            return Ok(());
        }
        let big_n = self.lifted_dim();
        if self.sample_count < big_n {
            return Err(Error::InvalidArgument(format!(
                "freeze needs at least {big_n} samples, have {}",
                self.sample_count
            )));
        }
        let min_eig = linalg::normalized_min_eigenvalue(&self.x);
        if min_eig.is_nan() || min_eig <= PE_TOLERANCE {
            return Err(Error::NotPersistentlyExciting {
                min_eigenvalue: min_eig,
            });
        }
        let (scale, scaled) = linalg::equilibrate(&self.x);
        let (lo, hi) = linalg::sym_eig_extremes(&scaled);
        let condition = hi / lo;
        let chol = scaled.cholesky().ok_or_else(|| {
            Error::Numerical(format!(
                "Cholesky factorization of X failed (condition {condition:e})"
            ))
        })?;

        let w = linalg::symmetrize(&(&self.v * self.v.transpose()));
        let w_invertible = equilibrated_full_rank(&w);
        let lifted = self
            .weighted_lifted(condition)
            .unwrap_or_else(|| scaled_solve(&scale, &chol, &self.z.transpose()).transpose());

        self.w = Some(w);
        self.condition_x = Some(condition);
        self.min_eigenvalue = Some(lo);
        self.factor = Some(Factorization {
            scale,
            chol,
            lifted,
            w_invertible,
        });
        Ok(())
    }

    /// `Z̃ X̃⁻¹`, or `None` unless the equilibrated `X̃` is better conditioned
    /// than `X` (at `condition_x`) and factorizes.
    fn weighted_lifted(&self, condition_x: f64) -> Option<DMatrix<f64>> {
        let (scale, scaled) = linalg::equilibrate(&linalg::symmetrize(&self.x_weighted));
        let (lo, hi) = linalg::sym_eig_extremes(&scaled);
        if !(lo > 0.0 && hi / lo < condition_x) {
            return None;
        }
        let chol = scaled.cholesky()?;
        let h = scaled_solve(&scale, &chol, &self.z_weighted.transpose()).transpose();
        h.iter().all(|v| v.is_finite()).then_some(h)
    }

    fn factor(&self) -> Result<&Factorization> {
        self.factor.as_ref().ok_or(Error::NotFrozen)
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::dims("state", self.n, x.len()));
        }
        Ok(())
    }

    /// `Y(x)` solving `X Y = L(x) V`.
    pub fn solve_y(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        let f = self.factor()?;
        let y = scaled_solve(&f.scale, &f.chol, &(lift_selector(x, self.m) * &self.v));
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(Error::Numerical(format!(
                "non-finite solution of X Y = L(x) V (condition {:e})",
                self.condition_x.unwrap_or(f64::NAN)
            )))
        }
    }

    /// `‖X Y − L(x) V‖_F / (1 + ‖L(x) V‖_F)` for a candidate `Y`.
    pub fn solve_y_residual(&self, x: &DVector<f64>, y: &DMatrix<f64>) -> f64 {
        let rhs = lift_selector(x, self.m) * &self.v;
        (&self.x * y - &rhs).norm() / (1.0 + rhs.norm())
    }

    /// `Z X⁻¹`; set on freeze.
    pub fn lifted_estimate(&self) -> Result<&DMatrix<f64>> {
        Ok(&self.factor()?.lifted)
    }

    /// Data-only estimate of `G(x)`: `Z Y(x) Vᵀ W⁻¹`, an `n × (n+m)` matrix.
    pub fn reconstruct_transition(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        let f = self.factor()?;
        if !f.w_invertible {
            return Err(Error::DegenerateData);
        }
        let g = &f.lifted * lift_selector(x, self.m);
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::Numerical("non-finite reconstruction".into()))
        }
    }

    /// `U_x(K) = [I_n; K] Z Y(x) Vᵀ W⁺`.
    pub fn reconstruct_closed_loop(
        &self,
        x: &DVector<f64>,
        k: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        if k.shape() != (self.m, self.n) {
            return Err(Error::dims(
                "gain",
                format!("{}x{}", self.m, self.n),
                format!("{:?}", k.shape()),
            ));
        }
        Ok(linalg::identity_over(k) * self.reconstruct_transition(x)?)
    }

    /// Row-major text dump: a header line with `n, m, N, sample_count`,
    /// then each matrix as a named block of comma-separated rows.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# n={} m={} N={} sample_count={} frozen={}",
            self.n,
            self.m,
            self.lifted_dim(),
            self.sample_count,
            self.is_frozen()
        )?;
        let mut block = |name: &str, mat: &DMatrix<f64>| -> Result<()> {
            writeln!(out, "{name},{},{}", mat.nrows(), mat.ncols())?;
            for row in mat.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
            Ok(())
        };
        block("X", &self.x)?;
        block("Z", &self.z)?;
        block("V", &self.v)?;
        if let Some(w) = &self.w {
            block("W", w)?;
        }
        Ok(())
    }
}

/// Pseudoinverse of a symmetric PSD matrix through its Jacobi-equilibrated
/// form; `None` when it is rank deficient at [`RANK_TOLERANCE`].
/// `diag(d) (diag(d) X diag(d))⁻¹ diag(d) rhs = X⁻¹ rhs`.
fn scaled_solve(
    scale: &DVector<f64>,
    chol: &Cholesky<f64, Dyn>,
    rhs: &DMatrix<f64>,
) -> DMatrix<f64> {
    let scaled = DMatrix::from_fn(rhs.nrows(), rhs.ncols(), |i, j| scale[i] * rhs[(i, j)]);
    let sol = chol.solve(&scaled);
    DMatrix::from_fn(sol.nrows(), sol.ncols(), |i, j| scale[i] * sol[(i, j)])
}

fn equilibrated_full_rank(w: &DMatrix<f64>) -> bool {
    let (scale, scaled) = linalg::equilibrate(w);
    scale.iter().all(|&s| s > 0.0 && s.is_finite())
        && linalg::numerical_rank(&scaled, RANK_TOLERANCE) == w.nrows()
}
