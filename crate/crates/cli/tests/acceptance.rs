//! Acceptance criteria, one line of output each. Run with
//! `cargo test -p chainbell-cli --test acceptance`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use chainbell::analysis::{admissible_envelope, check_extension, ExtensionClaim};
use chainbell::chainedbell::{
    chain_terms, closed_form_i, closed_form_i_at_pi, equipartition_settings, prob_equal,
    ChainedConfig, ChainedSettings, InterferometerParams,
};
use chainbell::models::{
    LocalStrategy, OutcomeModel, QuantumModel, SignalingToyModel, SuarezScaraniModel,
};
use chainbell::montecarlo::{
    estimate_i, fit_visibility, nonsignaling_test, phase_grid, run_trials, scan_phase, RunConfig,
    SettingChoice,
};
use chainbell::spacetime::{classify_timing, ApparatusGeometry, Boost, Event, TimingClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn settings(n: usize, v: f64) -> ChainedSettings {
    let cfg = ChainedConfig::new(n, PI, v).unwrap();
    equipartition_settings(&cfg, &InterferometerParams::default()).unwrap()
}

fn extension_example() -> Outcome {
    let start = Instant::now();
    let claim = ExtensionClaim::new(0.25, 0.999, PI, 500).map_err(|e| e.to_string())?;
    let v = check_extension(&claim).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let exit = Command::new(env!("CARGO_BIN_EXE_chainbell"))
        .args([
            "check-extension",
            "--d",
            "0.25",
            "--visibility",
            "0.999",
            "--n-max",
            "500",
        ])
        .output()
        .map_err(|e| e.to_string())?
        .status
        .code();
    ensure(
        v.n_star == 35
            && (v.i_min - 0.0702).abs() <= 5e-4
            && (v.bound - 0.105).abs() <= 1e-3
            && v.contradictory
            && elapsed < 1.0
            && exit == Some(3),
        format!(
            "N*={} I_min={:.6} bound={:.6} contradictory={} in {:.3}s, exit {:?}",
            v.n_star, v.i_min, v.bound, v.contradictory, elapsed, exit
        ),
    )
}

/// Compensated summation, so a 2000-term sum stays within a few ulps.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Sums the chain term by term from the setting angles and compares every
/// route with `N(1 − V cos(π/2N))`.
fn closed_form_identity() -> Outcome {
    let mut worst = 0.0f64;
    for v in [0.0, 0.5, 0.97, 0.999, 1.0] {
        for n in 2..=1000 {
            let half_step = PI / (2.0 * n as f64);
            let x = |j: usize| -2.0 * j as f64 * half_step;
            let y = |k: usize| (2 * k + 1) as f64 * half_step;
            let direct = neumaier_sum(chain_terms(n).iter().enumerate().map(|(i, t)| {
                let p = prob_equal(x(t.alice) + y(t.bob), v).unwrap();
                if i == 0 {
                    p
                } else {
                    1.0 - p
                }
            }));
            let closed = n as f64 * (1.0 - v * half_step.cos());
            let general = closed_form_i(&ChainedConfig::new(n, PI, v).unwrap()).value;
            worst = worst
                .max((direct - closed).abs())
                .max((general - closed).abs())
                .max((closed_form_i_at_pi(n, v) - closed).abs());
        }
    }
    ensure(
        worst <= 1e-12,
        format!("max deviation {worst:.3e} over N in 2..=1000"),
    )
}

fn chsh_limit() -> Outcome {
    let i2 = closed_form_i_at_pi(2, 1.0);
    let chsh_err = (i2 - (2.0 - 2f64.sqrt())).abs();
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if closed_form_i_at_pi(2, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = 0.5 * (lo + hi);
    ensure(
        chsh_err <= 1e-12 && (threshold - FRAC_1_SQRT_2).abs() <= 1e-9,
        format!("I(2,π,1) off by {chsh_err:.1e}, threshold V = {threshold:.12}"),
    )
}

fn quantum_estimates() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for v in [0.9, 1.0] {
        let q = QuantumModel::new(v).unwrap();
        for n in [2, 3, 5] {
            let s = settings(n, v);
            let trials = 1_000_000 * 2 * n as u64;
            let counts = run_trials(
                &q,
                &s,
                TimingClass::AfterAfter,
                &RunConfig::new(trials, 100 + n as u64, SettingChoice::ChainPairs),
            )
            .map_err(|e| e.to_string())?;
            let r = estimate_i(&counts, s.config()).map_err(|e| e.to_string())?;
            let exact = closed_form_i(s.config()).value;
            let z = (r.value - exact) / r.std_error;
            ok &= z.abs() < 4.0;
            lines.push(format!("N={n} V={v}: z={z:+.2}"));
        }
    }
    ensure(ok, lines.join(", "))
}

fn visibility_fit() -> Outcome {
    let q = QuantumModel::new(0.97).unwrap();
    let scan = scan_phase(
        &q,
        &phase_grid(16),
        TimingClass::AfterAfter,
        100_000,
        7,
        None,
    )
    .map_err(|e| e.to_string())?;
    let fit = fit_visibility(&scan).map_err(|e| e.to_string())?;
    ensure(
        (fit.value - 0.97).abs() <= 0.01,
        format!("V_hat = {:.5} ± {:.5}", fit.value, fit.std_error),
    )
}

fn before_before_contrast() -> Outcome {
    let ss = SuarezScaraniModel::new(1.0, LocalStrategy::Product).unwrap();
    let s = settings(2, 1.0);
    let run = RunConfig::new(4_000_000, 11, SettingChoice::ChainPairs);
    let aa = estimate_i(
        &run_trials(&ss, &s, TimingClass::AfterAfter, &run).map_err(|e| e.to_string())?,
        s.config(),
    )
    .map_err(|e| e.to_string())?;
    let bb = estimate_i(
        &run_trials(&ss, &s, TimingClass::BeforeBefore, &run).map_err(|e| e.to_string())?,
        s.config(),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        aa.value + 4.0 * aa.std_error < 1.0 && bb.value - 4.0 * bb.std_error >= 1.0,
        format!(
            "AfterAfter {:.4} ± {:.4}, BeforeBefore {:.4} ± {:.4}",
            aa.value, aa.std_error, bb.value, bb.std_error
        ),
    )
}

/// Brute-force reference: boost through the rapidity and compare times.
fn oracle_class(a: (f64, f64), b: (f64, f64), beta_a: f64, beta_b: f64) -> TimingClass {
    let t = |(t, x): (f64, f64), beta: f64| {
        let eta = beta.atanh();
        eta.cosh() * t - eta.sinh() * x
    };
    let alice_before = t(a, beta_a) < t(b, beta_a);
    let bob_before = t(b, beta_b) < t(a, beta_b);
    match (alice_before, bob_before) {
        (true, true) => TimingClass::BeforeBefore,
        (false, false) => TimingClass::AfterAfter,
        (true, false) => TimingClass::AliceBeforeOnly,
        (false, true) => TimingClass::BobBeforeOnly,
    }
}

fn random_geometries() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut mismatches = Vec::new();
    let mut seen = [false; 4];
    for _ in 0..50 {
        let ta: f64 = rng.random_range(-10.0..10.0);
        let xa: f64 = rng.random_range(-10.0..10.0);
        let dx: f64 = rng.random_range(1.0..20.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let dt: f64 = dx.abs() * rng.random_range(-0.95..0.95);
        let (ba, bb): (f64, f64) = (rng.random_range(-0.95..0.95), rng.random_range(-0.95..0.95));
        let g = ApparatusGeometry::new(
            Event::new(ta, xa).unwrap(),
            Event::new(ta + dt, xa + dx).unwrap(),
            Boost::new(ba).unwrap(),
            Boost::new(bb).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let got = classify_timing(&g).map_err(|e| e.to_string())?;
        let want = oracle_class((ta, xa), (ta + dt, xa + dx), ba, bb);
        seen[TimingClass::ALL.iter().position(|c| *c == got).unwrap()] = true;
        if got != want {
            mismatches.push(format!("{got} vs {want}"));
        }
    }
    let covered = seen.iter().filter(|s| **s).count();
    ensure(
        mismatches.is_empty(),
        format!(
            "50 geometries, {} mismatches, {covered}/4 classes seen {mismatches:?}",
            mismatches.len()
        ),
    )
}

fn nonsignaling() -> Outcome {
    let s = settings(2, 1.0);
    let run = RunConfig::new(440_000, 3, SettingChoice::RandomUniform);
    let mut lines = Vec::new();
    let mut ok = true;
    let honest: Vec<(&str, Box<dyn OutcomeModel>, TimingClass)> = vec![
        (
            "quantum",
            Box::new(QuantumModel::new(1.0).unwrap()),
            TimingClass::AfterAfter,
        ),
        (
            "ss BeforeBefore",
            Box::new(SuarezScaraniModel::new(1.0, LocalStrategy::Product).unwrap()),
            TimingClass::BeforeBefore,
        ),
        (
            "ss AfterAfter",
            Box::new(SuarezScaraniModel::new(1.0, LocalStrategy::Product).unwrap()),
            TimingClass::AfterAfter,
        ),
    ];
    for (label, model, timing) in &honest {
        let counts = run_trials(model.as_ref(), &s, *timing, &run).map_err(|e| e.to_string())?;
        let min_cell = counts.iter().map(|(_, c)| c.total()).min().unwrap();
        let r = nonsignaling_test(&counts, 4.0).map_err(|e| e.to_string())?;
        ok &= r.passed() && min_cell >= 100_000;
        lines.push(format!("{label} max|z|={:.2}", r.max_abs_z()));
    }
    let toy = SignalingToyModel::new(0.25).unwrap();
    let counts = run_trials(&toy, &s, TimingClass::AfterAfter, &run).map_err(|e| e.to_string())?;
    let r = nonsignaling_test(&counts, 4.0).map_err(|e| e.to_string())?;
    ok &= !r.passed() && r.max_abs_z() > 10.0;
    lines.push(format!("toy max|z|={:.1}", r.max_abs_z()));
    ensure(ok, lines.join(", "))
}

fn worker_independence() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"model": "quantum", "visibility": 0.95, "n": 3, "setting_choice": "random-uniform"}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.path().join(format!("w{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_chainbell"))
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "42",
                "--trials",
                "300000",
            ])
            .args([
                "--workers",
                workers,
                "--out-dir",
                out.to_str().unwrap(),
                "simulate",
            ])
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if !status.success() {
            return Err(format!("simulate with {workers} workers exited {status}"));
        }
        let counts = fs::read(out.join("counts.csv")).map_err(|e| e.to_string())?;
        let ineq = fs::read(out.join("inequality.csv")).map_err(|e| e.to_string())?;
        files.push((counts, ineq));
    }
    ensure(
        files[0] == files[1],
        "counts.csv and inequality.csv identical for 1 and 4 workers".into(),
    )
}

fn extension_grid() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for v in [0.99, 0.999, 0.9999] {
        let envelope = admissible_envelope(v, PI, 2..=1000).map_err(|e| e.to_string())?;
        let floor = envelope
            .iter()
            .map(|&(_, b)| b)
            .fold(f64::INFINITY, f64::min);
        for d in [0.05, 0.1, 0.25] {
            let binds = floor < d;
            let verdict =
                check_extension(&ExtensionClaim::new(d, v, PI, 1000).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
            ok &= verdict.contradictory == binds;
            if binds {
                lines.push(format!("V={v} D={d}"));
            }
        }
    }
    ensure(
        ok,
        format!(
            "contradictory exactly where the envelope binds: {}",
            lines.join("; ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("extension check at V=0.999, D=0.25", extension_example),
        ("closed form at Θ=π", closed_form_identity),
        ("CHSH value and 1/√2 threshold", chsh_limit),
        ("quantum Monte Carlo vs closed form", quantum_estimates),
        ("visibility fit at V=0.97", visibility_fit),
        (
            "frame-dependent model: violation only without BeforeBefore",
            before_before_contrast,
        ),
        ("timing classes vs Lorentz oracle", random_geometries),
        ("non-signaling test", nonsignaling),
        ("worker-count independence", worker_independence),
        ("extension verdict grid", extension_grid),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] criterion {}: {name} ({detail}) [{:.1}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
