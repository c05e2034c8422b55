//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs with `harness = false` so the report is printed
//! uncaptured and in order.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bilq_core::excitation::{
    count_independent, gram, is_pe, is_sufficiently_rich, SignalKind, SignalSource, SignalSpec,
    RANK_TOLERANCE,
};
use bilq_core::linalg;
use bilq_core::policy::{self, FrozenTransition, IterationConfig};
use bilq_core::runtime::{self, example_registry, Experiment, LearnerSettings};
use bilq_core::system::{kronecker_block, lift, stack_state_input};
use bilq_core::{BilinearSystem, CostSpec, Error};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn uniform_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_plant(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> BilinearSystem {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let a = uniform_matrix(rng, n, n);
    let b = uniform_matrix(rng, n, m);
    let d = (0..n).map(|_| uniform_matrix(rng, n, m)).collect();
    BilinearSystem::new(a, b, d).unwrap()
}

fn rel(diff: f64, reference: f64) -> f64 {
    diff / reference.max(f64::MIN_POSITIVE)
}

fn hydraulic(seed: u64) -> Experiment {
    let (_, mut cfg) = example_registry("hydraulic").unwrap();
    cfg.seed = Some(seed);
    cfg.resolve().unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_lift, mut worst_step) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let sys = random_plant(&mut rng, 4, 3);
        let x = uniform_vector(&mut rng, sys.n());
        let u = uniform_vector(&mut rng, sys.m());
        let via_lti = sys.lti_matrix() * lift(&x, &u);
        let via_ltv = sys.ltv_matrix(&x).unwrap() * stack_state_input(&x, &u);
        let stepped = sys.step(&x, &u).unwrap();
        worst_lift = worst_lift.max(rel((&via_lti - &via_ltv).norm(), via_ltv.norm()));
        worst_step = worst_step.max(rel((&via_ltv - &stepped).norm(), stepped.norm()));
    }
    outcome(
        worst_lift <= 1e-12 && worst_step <= 1e-12,
        format!("max rel |H xi - G z| = {worst_lift:.2e}, max rel |G z - step| = {worst_step:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut excluded, mut worst) = (0usize, 0.0f64);
    for plant in 0..200u64 {
        let sys = random_plant(&mut rng, 3, 2);
        let (n, m) = (sys.n(), sys.m());
        let cost = CostSpec::new(DMatrix::identity(n + m, n + m), 0.9, n).unwrap();
        let settings = LearnerSettings {
            cost,
            signal: SignalSpec::prbs(1.0, m, plant),
            iteration: IterationConfig::default(),
            horizon: sys.lifted_dim() + 1,
            initial_state: uniform_vector(&mut rng, n),
            continue_accumulation: false,
            best_effort_on_nonconvergence: false,
        };
        let mut data = runtime::explore(&mut sys.clone(), &settings).unwrap().data;
        match data.freeze() {
            Ok(()) => {}
            Err(Error::NotPersistentlyExciting { .. }) => {
                excluded += 1;
                continue;
            }
            Err(e) => return outcome(false, format!("plant {plant}: {e}")),
        }
        for _ in 0..5 {
            let x = uniform_vector(&mut rng, n);
            let k = uniform_matrix(&mut rng, m, n);
            let g = sys.ltv_matrix(&x).unwrap();
            let u = match data.reconstruct_closed_loop(&x, &k) {
                Ok(u) => u,
                Err(e) => return outcome(false, format!("plant {plant}: {e}")),
            };
            let exact = linalg::identity_over(&k) * &g;
            worst = worst.max((u - exact).norm() / (1.0 + g.norm()));
        }
    }
    let rate = excluded as f64 / 200.0;
    outcome(
        worst <= 1e-8 && rate < 0.05,
        format!("max |U_x(K) - [I;K]G| / (1+|G|) = {worst:.2e}, excluded {excluded}/200"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut instances, mut draws, mut worst) = (0usize, 0usize, 0.0f64);
    while instances < 100 {
        draws += 1;
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=2);
        let a = uniform_matrix(&mut rng, n, n);
        let b = uniform_matrix(&mut rng, n, m);
        let f = uniform_matrix(&mut rng, n + m, n + m);
        let lambda = &f * f.transpose() + DMatrix::identity(n + m, n + m) * 0.1;
        let cost = CostSpec::new(lambda, 0.9, n).unwrap();
        let Ok((k_oracle, _)) = policy::oracle_riccati(&a, &b, &cost, 1e-14) else {
            continue;
        };
        let mut g = DMatrix::zeros(n, n + m);
        g.view_mut((0, 0), (n, n)).copy_from(&a);
        g.view_mut((0, n), (n, m)).copy_from(&b);
        let report = policy::solve_frozen(
            &FrozenTransition::new(g).unwrap(),
            &cost,
            &IterationConfig::default(),
        );
        match report {
            Ok(r) if r.converged => {
                worst = worst.max(rel((&r.gain - &k_oracle).norm(), k_oracle.norm()));
                instances += 1;
            }
            Ok(r) => {
                return outcome(
                    false,
                    format!("no convergence: residual {:e}", r.final_residual),
                )
            }
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let scalar_cost = CostSpec::new(DMatrix::identity(2, 2), 0.9, 1).unwrap();
    let scalar = FrozenTransition::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
    let k = policy::solve_frozen(&scalar, &scalar_cost, &IterationConfig::default())
        .unwrap()
        .gain[(0, 0)];
    outcome(
        worst <= 1e-6 && (k + 0.58836).abs() <= 1e-4,
        format!(
            "max rel gain error {worst:.2e} over 100 instances ({draws} draws), scalar K = {k:.6}"
        ),
    )
}

fn model_based_gain(
    sys: &BilinearSystem,
    settings: &LearnerSettings,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let provider = FrozenTransition::model_based(sys, x).unwrap();
    policy::solve_frozen(&provider, &settings.cost, &settings.iteration)
        .unwrap()
        .gain
}

fn criterion_4() -> Outcome {
    let (mut worst, mut compared, mut gated) = (0.0f64, 0usize, 0usize);
    for seed in 0..10 {
        let exp = hydraulic(seed);
        let log = match runtime::run_online(&mut exp.system.clone(), &exp.settings) {
            Ok(log) => log,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        if log.summary.condition_x.is_none_or(|c| c > 1e8) {
            gated += 1;
            continue;
        }
        for r in log.records.iter().filter(|r| r.t >= 15) {
            let k_mf = r.gain_matrix(3, 3).unwrap();
            let k_mb = model_based_gain(&exp.system, &exp.settings, &r.state());
            worst = worst.max(rel((&k_mf - &k_mb).norm(), k_mb.norm()));
            compared += 1;
        }
    }
    outcome(
        worst <= 1e-6 && compared > 0,
        format!("max rel gain gap {worst:.2e} over {compared} steps of 10 seeds ({gated} seeds above condition 1e8)"),
    )
}

fn criterion_5() -> Outcome {
    let exp = hydraulic(0);
    let log = match runtime::run_online(&mut exp.system.clone(), &exp.settings) {
        Ok(log) => log,
        Err(e) => return outcome(false, e.to_string()),
    };
    let x_n = log.records[15].state().norm();
    let decayed_at = log
        .records
        .iter()
        .find(|r| r.t >= 15 && r.state().norm() <= 1e-3 * x_n)
        .map(|r| r.t);
    let worst = log
        .records
        .iter()
        .filter_map(|r| r.spectral_radius)
        .map(|rho| 0.9 * rho * rho)
        .fold(0.0, f64::max);
    outcome(
        decayed_at.is_some_and(|t| t <= 2000) && worst < 1.0,
        format!(
            "|x(N)| = {x_n:.3e}, |x| <= 1e-3 |x(N)| at t = {decayed_at:?}, max gamma rho^2 = {worst:.3e}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..10 {
        let exp = hydraulic(seed);
        match runtime::compare(&exp) {
            Ok((mf, mb)) => {
                let (a, b) = (
                    mf.summary.total_discounted_cost,
                    mb.summary.total_discounted_cost,
                );
                ok &= b <= a;
                lines.push(format!("{b:.3e}<={a:.3e}"));
            }
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        }
    }
    outcome(
        ok,
        format!("model-based <= model-free per seed: {}", lines.join(" ")),
    )
}

fn synthetic_pe_properties() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // PE ⇔ full rank ⇔ positive definite Gram.
    for trial in 0..200 {
        let d = rng.gen_range(2..=6);
        let k = d + rng.gen_range(0..3);
        let mut samples: Vec<_> = (0..k).map(|_| uniform_vector(&mut rng, d)).collect();
        if trial % 3 == 0 {
            for v in samples.iter_mut() {
                v[d - 1] = v[0] + 0.25 * v[1];
            }
        }
        let (pe, _) = is_pe(&samples, k).map_err(|e| e.to_string())?;
        let full = count_independent(&samples).map_err(|e| e.to_string())? == d;
        let g = gram(&samples);
        let definite = linalg::sym_eig_extremes(&g).0 > RANK_TOLERANCE * g.trace();
        if pe != full || pe != definite {
            return Err(format!("equivalence broken at trial {trial}"));
        }
    }
    // Sufficient richness of PRBS.
    for p in [1usize, 3, 6] {
        let rich = (0..100u64)
            .filter(|&seed| {
                let seq = SignalSource::new(&SignalSpec::prbs(1.0, 1, seed))
                    .unwrap()
                    .take_inputs(10 * p);
                is_sufficiently_rich(&seq, p, 9 * p + 1).unwrap()
            })
            .count();
        if rich < 95 {
            return Err(format!("PRBS richness of order {p}: {rich}/100"));
        }
    }
    // Full x-, u- and x⊗u-ranks give a full lifted rank.
    for _ in 0..200 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=2);
        let big_n = n + m + n * m;
        let xs: Vec<_> = (0..big_n).map(|_| uniform_vector(&mut rng, n)).collect();
        let us: Vec<_> = (0..big_n).map(|_| uniform_vector(&mut rng, m)).collect();
        let ys: Vec<_> = xs
            .iter()
            .zip(&us)
            .map(|(x, u)| kronecker_block(x, u))
            .collect();
        let rank = |s: &[DVector<f64>]| count_independent(s).unwrap();
        if rank(&xs) == n && rank(&us) == m && rank(&ys) == n * m {
            let xis: Vec<_> = xs.iter().zip(&us).map(|(x, u)| lift(x, u)).collect();
            if rank(&xis) != big_n {
                return Err("lifted rank not full despite full component ranks".into());
            }
        }
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in [
        SignalKind::Prbs,
        SignalKind::Gbn,
        SignalKind::SumOfSinusoids,
        SignalKind::FilteredWhiteNoise,
    ] {
        let mut pe = 0;
        for seed in 0..100 {
            let (_, mut cfg) = example_registry("hydraulic").unwrap();
            cfg.seed = Some(seed);
            cfg.signal.kind = kind;
            let exp = cfg.resolve().unwrap();
            if runtime::check_pe(&mut exp.system.clone(), &exp.settings)
                .is_ok_and(|r| r.persistently_exciting)
            {
                pe += 1;
            }
        }
        ok &= pe >= 95;
        parts.push(format!("{kind:?} {pe}/100"));
    }
    let synthetic = synthetic_pe_properties();
    ok &= synthetic.is_ok();
    parts.push(match synthetic {
        Ok(()) => "synthetic PE/richness/rank properties hold".into(),
        Err(e) => format!("synthetic: {e}"),
    });
    outcome(ok, parts.join(", "))
}

fn bilq(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bilq"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove(runtime::OUT_DIR_ENV)
        .output()
        .expect("failed to launch bilq")
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = bilq(&["compare", "--example", "hydraulic", "--seed", "5"], out);
        if !res.status.success() {
            return outcome(false, String::from_utf8_lossy(&res.stderr).into_owned());
        }
    }
    let same = ["modelfree.csv", "modelbased.csv", "costs.csv"]
        .iter()
        .all(|f| fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap());
    outcome(
        same,
        "modelfree.csv, modelbased.csv and costs.csv compared byte for byte",
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let res = bilq(
        &["run", "--example", "nuclear", "--mode", "model_free"],
        dir.path(),
    );
    let code = res.status.code();
    if code != Some(0) {
        return outcome(
            false,
            format!(
                "exit code {code:?}: {}",
                String::from_utf8_lossy(&res.stderr).trim()
            ),
        );
    }
    let text = fs::read_to_string(dir.path().join("modelfree.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    let exploration = rows.iter().filter(|r| r.contains(",exploration,")).count();
    let flagged = rows
        .iter()
        .filter(|r| r.contains(",learning,"))
        .all(|r| r.contains(",true,") || r.contains(",false,"));
    outcome(
        exploration == 5 && flagged,
        format!(
            "{exploration} exploration rows, convergence flags on every learning row: {flagged}"
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 9] = [
        (
            "1 representation consistency",
            criterion_1,
            Some(Duration::from_secs(1)),
        ),
        (
            "2 reconstruction identity",
            criterion_2,
            Some(Duration::from_secs(10)),
        ),
        (
            "3 oracle equivalence",
            criterion_3,
            Some(Duration::from_secs(10)),
        ),
        (
            "4 model-free = model-based gains",
            criterion_4,
            Some(Duration::from_secs(30)),
        ),
        (
            "5 stabilization",
            criterion_5,
            Some(Duration::from_secs(60)),
        ),
        ("6 cost dominance", criterion_6, None),
        ("7 PE generator suite", criterion_7, None),
        ("8 reproducibility", criterion_8, None),
        ("9 nuclear pipeline", criterion_9, None),
    ];
    let mut failures = 0;
    for (name, run, limit) in criteria {
        let started = Instant::now();
        let out = run();
        let elapsed = started.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let passed = out.passed && in_time;
        if !passed {
            failures += 1;
        }
        let budget = limit
            .map(|l| format!(" of {:.0} s", l.as_secs_f64()))
            .unwrap_or_default();
        println!(
            "criterion {name}: {} ({:.2} s{budget}) {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
