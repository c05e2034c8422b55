//! The online loop.
//!
//! `run_online` sees the plant only through [`SystemOracle`]: it measures
//! `x(t)`, chooses `u(t)`, and receives `x(t+1)`. Every model quantity it
//! uses is rebuilt from the data matrices.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrices;
use crate::error::{Error, Result};
use crate::excitation::{count_well_excited, weakest_direction, SignalSource};
use crate::linalg;
use crate::policy::{self, FrozenTransition, SolveReport};
use crate::system::{lift, stack_state_input, BilinearSystem, LiftedSample, SystemOracle};

use super::config::LearnerSettings;

/// Redraws allowed per exploration step when the new lifted sample does not
/// raise the rank of the collected data.
pub const MAX_EXPLORATION_RETRIES: usize = 32;

/// The run stops once `‖x(t)‖` falls below this.
pub const STOP_NORM: f64 = 1e-12;

/// A draw is redrawn while the smallest singular value of the row-normalized
/// lifted samples, itself included, stays at or below this. Well above the
/// freeze-time PE threshold, so the frozen `X` is also well conditioned.
pub const EXPLORATION_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Exploration,
    Learning,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Exploration => "exploration",
            Phase::Learning => "learning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub phase: Phase,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub stage_cost: f64,
    /// `Σ_{τ ≤ t} γ^τ r(τ)`.
    pub discounted_cost: f64,
    /// Exploration redraws spent at this step.
    pub retries: usize,
    /// Applied gain in row-major order; absent during exploration.
    pub gain: Option<Vec<f64>>,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub converged: Option<bool>,
    /// `ρ` of the frozen closed loop seen by the provider that chose the gain.
    pub spectral_radius: Option<f64>,
    pub transversality: Option<bool>,
}

impl StepRecord {
    pub fn gain_matrix(&self, m: usize, n: usize) -> Option<DMatrix<f64>> {
        self.gain.as_ref().map(|k| DMatrix::from_row_slice(m, n, k))
    }

    pub fn state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub n: usize,
    pub m: usize,
    /// Exploration steps taken; zero for the model-based baseline.
    pub exploration_steps: usize,
    pub condition_x: Option<f64>,
    pub min_eigenvalue_x: Option<f64>,
    pub total_discounted_cost: f64,
    pub final_state_norm: f64,
    pub steps: usize,
    pub terminated_early: bool,
    pub nonconverged_steps: usize,
    pub exploration_retries: usize,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    /// Data matrices in their final (frozen) state; model-free runs only.
    pub data: Option<DataMatrices>,
}

/// Cost bookkeeping shared by both loops.
struct Meter {
    gamma: f64,
    weight: f64,
    total: f64,
}

impl Meter {
    fn new(gamma: f64) -> Self {
        Self {
            gamma,
            weight: 1.0,
            total: 0.0,
        }
    }

    fn charge(&mut self, stage: f64) -> f64 {
        self.total += self.weight * stage;
        self.weight *= self.gamma;
        self.total
    }
}

fn check_dims<O: SystemOracle + ?Sized>(oracle: &O, settings: &LearnerSettings) -> Result<()> {
    let (n, m) = (oracle.state_dim(), oracle.input_dim());
    if settings.n() != n || settings.m() != m {
        return Err(Error::dims(
            "plant vs. cost",
            format!("n={}, m={}", settings.n(), settings.m()),
            format!("n={n}, m={m}"),
        ));
    }
    if settings.initial_state.len() != n {
        return Err(Error::dims(
            "initial state",
            n,
            settings.initial_state.len(),
        ));
    }
    if settings.signal.channels != m {
        return Err(Error::dims("signal channels", m, settings.signal.channels));
    }
    Ok(())
}

/// Outcome of the exploration phase.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub data: DataMatrices,
    pub inputs: Vec<DVector<f64>>,
    pub records: Vec<StepRecord>,
    /// `x(N)`.
    pub state: DVector<f64>,
    pub independent: usize,
    pub retries: usize,
    pub cost_so_far: f64,
}

/// Applies the exploration signal for `N` steps and accumulates the data,
/// redrawing an input while its lifted sample would leave the weakest
/// direction at or below [`EXPLORATION_FLOOR`].
///
/// After [`MAX_EXPLORATION_RETRIES`] redraws the best-scoring draw is kept
/// and the freeze-time PE check has the final word.
pub fn explore<O: SystemOracle + ?Sized>(
    oracle: &mut O,
    settings: &LearnerSettings,
) -> Result<Exploration> {
    check_dims(oracle, settings)?;
    let (n, m) = (settings.n(), settings.m());
    let big_n = settings.exploration_steps();
    let mut source = SignalSource::new(&settings.signal)?;
    let mut data = DataMatrices::new(n, m);
    let mut meter = Meter::new(settings.cost.gamma());
    let mut lifted: Vec<DVector<f64>> = Vec::with_capacity(big_n);
    let mut inputs = Vec::with_capacity(big_n);
    let mut records = Vec::with_capacity(big_n);
    let mut total_retries = 0;
    let mut x = settings.initial_state.clone();

    for t in 0..big_n {
        let mut u = source.next_input();
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut retries = 0;
        loop {
            lifted.push(lift(&x, &u));
            let score = weakest_direction(&lifted)?;
            lifted.pop();
            if score > EXPLORATION_FLOOR {
                break;
            }
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, u.clone()));
            }
            if retries == MAX_EXPLORATION_RETRIES {
                // Fall back to the strongest draw; the PE check at freeze decides.
                u = best.expect("at least one draw scored").1;
                break;
            }
            retries += 1;
            u = source.next_input();
        }
        lifted.push(lift(&x, &u));
        total_retries += retries;

        let stage = settings.cost.stage_cost(&x, &u)?;
        let x_next = oracle.step(&x, &u)?;
        if !x_next.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "plant state became non-finite at t = {t}"
            )));
        }
        data.accumulate(&LiftedSample::new(x.clone(), u.clone(), x_next.clone())?)?;
        records.push(StepRecord {
            t,
            phase: Phase::Exploration,
            x: x.iter().copied().collect(),
            u: u.iter().copied().collect(),
            stage_cost: stage,
            discounted_cost: meter.charge(stage),
            retries,
            gain: None,
            iterations: 0,
            residual: None,
            converged: None,
            spectral_radius: None,
            transversality: None,
        });
        inputs.push(u);
        x = x_next;
    }
    Ok(Exploration {
        data,
        inputs,
        records,
        state: x,
        independent: count_well_excited(&lifted)?,
        retries: total_retries,
        cost_so_far: meter.total,
    })
}

/// Per-step outcome of a frozen solve, before the plant is advanced.
struct Decision {
    u: DVector<f64>,
    report: SolveReport,
    spectral_radius: f64,
    transversality: bool,
}

fn decide(
    provider: &FrozenTransition,
    x: &DVector<f64>,
    settings: &LearnerSettings,
) -> Result<Decision> {
    let report = policy::solve_frozen(provider, &settings.cost, &settings.iteration)?;
    if !report.converged && !settings.best_effort_on_nonconvergence {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            residual: report.final_residual,
        });
    }
    let u = &report.gain * x;
    let spectral_radius = provider.closed_loop_spectral_radius(&report.gain)?;
    let z = stack_state_input(x, &u);
    let transversality = policy::transversality_check(&report.p_star, &(&z * z.transpose()));
    Ok(Decision {
        u,
        report,
        spectral_radius,
        transversality,
    })
}

/// Control loop after exploration (or from `t = 0` for the baseline).
struct Controller<'a> {
    settings: &'a LearnerSettings,
    meter: Meter,
    records: Vec<StepRecord>,
    nonconverged: usize,
    terminated_early: bool,
}

impl<'a> Controller<'a> {
    fn step<O: SystemOracle + ?Sized>(
        &mut self,
        t: usize,
        x: &DVector<f64>,
        provider: &FrozenTransition,
        oracle: &mut O,
    ) -> Result<Option<DVector<f64>>> {
        let d = decide(provider, x, self.settings)?;
        if !d.report.converged {
            self.nonconverged += 1;
        }
        let stage = self.settings.cost.stage_cost(x, &d.u)?;
        self.records.push(StepRecord {
            t,
            phase: Phase::Learning,
            x: x.iter().copied().collect(),
            u: d.u.iter().copied().collect(),
            stage_cost: stage,
            discounted_cost: self.meter.charge(stage),
            retries: 0,
            gain: Some(d.report.gain.transpose().iter().copied().collect()),
            iterations: d.report.iterations,
            residual: Some(d.report.final_residual),
            converged: Some(d.report.converged),
            spectral_radius: Some(d.spectral_radius),
            transversality: Some(d.transversality),
        });
        if t == self.settings.horizon || x.norm() < STOP_NORM {
            self.terminated_early = t < self.settings.horizon;
            return Ok(None);
        }
        let x_next = oracle.step(x, &d.u)?;
        if !x_next.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "plant state became non-finite at t = {}",
                t + 1
            )));
        }
        Ok(Some(x_next))
    }
}

/// Algorithm-level online run: explore for `N` steps, freeze the data, then
/// apply the data-driven frozen-state optimal gain at every step up to the
/// horizon.
pub fn run_online<O: SystemOracle + ?Sized>(
    oracle: &mut O,
    settings: &LearnerSettings,
) -> Result<RunLog> {
    let started = Instant::now();
    let exploration = explore(oracle, settings)?;
    let big_n = settings.exploration_steps();
    let mut accumulator = exploration.data.clone();
    let mut data = exploration.data;
    data.freeze()?;
    let condition_x = data.condition_x();
    let min_eigenvalue_x = data.min_eigenvalue();

    let mut ctl = Controller {
        settings,
        meter: Meter {
            gamma: settings.cost.gamma(),
            weight: settings.cost.gamma().powi(big_n as i32),
            total: exploration.cost_so_far,
        },
        records: exploration.records,
        nonconverged: 0,
        terminated_early: false,
    };
    let mut x = exploration.state;
    for t in big_n..=settings.horizon {
        let provider = FrozenTransition::model_free(&data, &x)?;
        let Some(x_next) = ctl.step(t, &x, &provider, oracle)? else {
            break;
        };
        if settings.continue_accumulation {
            let u = DVector::from_column_slice(&ctl.records.last().expect("record just pushed").u);
            accumulator.accumulate(&LiftedSample::new(x.clone(), u, x_next.clone())?)?;
            data = accumulator.clone();
            data.freeze()?;
        }
        x = x_next;
    }

    let summary = RunSummary {
        mode: "model_free".into(),
        n: settings.n(),
        m: settings.m(),
        exploration_steps: big_n,
        condition_x,
        min_eigenvalue_x,
        total_discounted_cost: ctl.meter.total,
        final_state_norm: final_norm(&ctl.records),
        steps: ctl.records.len(),
        terminated_early: ctl.terminated_early,
        nonconverged_steps: ctl.nonconverged,
        exploration_retries: exploration.retries,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunLog {
        records: ctl.records,
        summary,
        data: Some(data),
    })
}

/// Baseline with the known plant: the same frozen-state iteration from
/// `t = 0`, without exploration.
pub fn run_model_based(system: &BilinearSystem, settings: &LearnerSettings) -> Result<RunLog> {
    let started = Instant::now();
    let mut plant = system.clone();
    check_dims(&plant, settings)?;
    let mut ctl = Controller {
        settings,
        meter: Meter::new(settings.cost.gamma()),
        records: Vec::new(),
        nonconverged: 0,
        terminated_early: false,
    };
    let mut x = settings.initial_state.clone();
    for t in 0..=settings.horizon {
        let provider = FrozenTransition::model_based(system, &x)?;
        let Some(x_next) = ctl.step(t, &x, &provider, &mut plant)? else {
            break;
        };
        x = x_next;
    }
    let summary = RunSummary {
        mode: "model_based".into(),
        n: settings.n(),
        m: settings.m(),
        exploration_steps: 0,
        condition_x: None,
        min_eigenvalue_x: None,
        total_discounted_cost: ctl.meter.total,
        final_state_norm: final_norm(&ctl.records),
        steps: ctl.records.len(),
        terminated_early: ctl.terminated_early,
        nonconverged_steps: ctl.nonconverged,
        exploration_retries: 0,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunLog {
        records: ctl.records,
        summary,
        data: None,
    })
}

fn final_norm(records: &[StepRecord]) -> f64 {
    records
        .last()
        .map_or(0.0, |r| r.x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Result of an exploration dry run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeReport {
    pub exploration_steps: usize,
    pub independent_samples: usize,
    pub retries: usize,
    /// `λ_min(X)` of the raw data Gram matrix.
    pub min_eigenvalue_x: f64,
    /// `λ_min` of the Jacobi-equilibrated `X`, the quantity tested against the tolerance.
    pub normalized_min_eigenvalue_x: f64,
    pub condition_x: f64,
    pub persistently_exciting: bool,
    /// Largest order for which the applied input sequence is sufficiently rich.
    pub richness_order: usize,
}

pub fn check_pe<O: SystemOracle + ?Sized>(
    oracle: &mut O,
    settings: &LearnerSettings,
) -> Result<PeReport> {
    let exploration = explore(oracle, settings)?;
    let x = exploration.data.x();
    let min_raw = linalg::sym_eig_extremes(x).0;
    let normalized = linalg::normalized_min_eigenvalue(x);
    let condition = if x.diagonal().iter().all(|&d| d > 0.0) {
        let (lo, hi) = linalg::sym_eig_extremes(&linalg::equilibrate(x).1);
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    let mut frozen = exploration.data.clone();
    let persistently_exciting = frozen.freeze().is_ok();
    Ok(PeReport {
        exploration_steps: settings.exploration_steps(),
        independent_samples: exploration.independent,
        retries: exploration.retries,
        min_eigenvalue_x: min_raw,
        normalized_min_eigenvalue_x: normalized,
        condition_x: condition,
        persistently_exciting,
        richness_order: crate::excitation::richness_order(&exploration.inputs)?,
    })
}

/// Gains at one state from the data, the model, and the Riccati oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub state: DVector<f64>,
    pub model_free: Result<SolveReport>,
    pub model_based: SolveReport,
    pub riccati_gain: DMatrix<f64>,
    pub condition_x: Option<f64>,
}

impl OracleReport {
    pub fn model_free_vs_model_based(&self) -> Option<f64> {
        self.model_free
            .as_ref()
            .ok()
            .map(|mf| linalg::relative_error(&mf.gain, &self.model_based.gain))
    }

    pub fn model_based_vs_riccati(&self) -> f64 {
        linalg::relative_error(&self.model_based.gain, &self.riccati_gain)
    }
}

/// Riccati tolerance used by the oracle comparison.
pub const ORACLE_TOLERANCE: f64 = 1e-14;

/// Explores the plant from the configured initial state, then solves the
/// frozen problem at `state` with all three methods.
pub fn oracle_report(
    system: &BilinearSystem,
    settings: &LearnerSettings,
    state: &DVector<f64>,
) -> Result<OracleReport> {
    if state.len() != system.n() {
        return Err(Error::dims("state", system.n(), state.len()));
    }
    let model_based_provider = FrozenTransition::model_based(system, state)?;
    let model_based =
        policy::solve_frozen(&model_based_provider, &settings.cost, &settings.iteration)?;
    let (riccati_gain, _) = policy::oracle_riccati(
        &model_based_provider.state_block(),
        &model_based_provider.input_block(),
        &settings.cost,
        ORACLE_TOLERANCE,
    )?;
    let mut plant = system.clone();
    let mut data = explore(&mut plant, settings)?.data;
    let model_free = data
        .freeze()
        .and_then(|_| FrozenTransition::model_free(&data, state))
        .and_then(|p| policy::solve_frozen(&p, &settings.cost, &settings.iteration));
    Ok(OracleReport {
        state: state.clone(),
        model_free,
        model_based,
        riccati_gain,
        condition_x: data.condition_x(),
    })
}
