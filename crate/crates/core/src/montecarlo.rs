//! Trial engine and estimators.
//!
//! Trials are split into fixed-size chunks that run on a rayon pool. Each
//! trial reads its hidden variables from [`CounterRng`] by index, and chunk
//! results are merged by integer addition, so a run's counts depend only on
//! `(model, settings, timing, trials, seed)` and never on the worker count.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::chainedbell::{
    chain_terms, ChainedConfig, ChainedSettings, InequalityReport, TermKind, TermValue,
};
use crate::error::{invalid, Error, Result};
use crate::models::{HiddenState, JointOutcome, Outcome, OutcomeModel, TrialInput};
use crate::rng::{uniform_index, CounterRng, Slot};
use crate::spacetime::TimingClass;

const CHUNK: u64 = 1 << 15;

/// Fewest trials a setting pair needs before it may enter `Î(N)`.
pub const MIN_TRIALS_PER_TERM: u64 = 100;

/// Fewest trials per cell for the non-signaling comparison.
pub const MIN_TRIALS_PER_CELL: u64 = 10_000;

/// Fewest trials for a marginal distance estimate.
pub const MIN_TRIALS_FOR_DISTANCE: u64 = 1_000;

pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

/// Joint outcome counts for one setting pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl PairCounts {
    pub fn record(&mut self, o: JointOutcome) {
        match (o.a, o.b) {
            (Outcome::Plus, Outcome::Plus) => self.pp += 1,
            (Outcome::Plus, Outcome::Minus) => self.pm += 1,
            (Outcome::Minus, Outcome::Plus) => self.mp += 1,
            (Outcome::Minus, Outcome::Minus) => self.mm += 1,
        }
    }

    pub fn add(&mut self, other: &PairCounts) {
        self.pp += other.pp;
        self.pm += other.pm;
        self.mp += other.mp;
        self.mm += other.mm;
    }

    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    pub fn equal(&self) -> u64 {
        self.pp + self.mm
    }

    pub fn differ(&self) -> u64 {
        self.pm + self.mp
    }

    pub fn alice_plus(&self) -> u64 {
        self.pp + self.pm
    }

    pub fn bob_plus(&self) -> u64 {
        self.pp + self.mp
    }
}

/// Counts for every `(alice setting, bob setting)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    n: usize,
    cells: Vec<PairCounts>,
}

impl CountsTable {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cells: vec![PairCounts::default(); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, alice: usize, bob: usize) -> &PairCounts {
        &self.cells[alice * self.n + bob]
    }

    pub fn get_mut(&mut self, alice: usize, bob: usize) -> &mut PairCounts {
        &mut self.cells[alice * self.n + bob]
    }

    pub fn merge(&mut self, other: &CountsTable) {
        assert_eq!(self.n, other.n, "merging tables of different size");
        for (c, o) in self.cells.iter_mut().zip(&other.cells) {
            c.add(o);
        }
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(PairCounts::total).sum()
    }

    /// `((alice, bob), counts)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &PairCounts)> {
        let n = self.n;
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, c)| ((i / n, i % n), c))
    }

    /// Sum over all pairs.
    pub fn pooled(&self) -> PairCounts {
        let mut all = PairCounts::default();
        for c in &self.cells {
            all.add(c);
        }
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettingChoice {
    /// Each trial picks both settings independently and uniformly.
    RandomUniform,
    /// Every trial uses the same pair.
    FixedPair { alice: usize, bob: usize },
    /// `trials` trials on each of the `2N` pairs entering `I(N)`.
    ChainPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub trials: u64,
    pub seed: u64,
    pub choice: SettingChoice,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn new(trials: u64, seed: u64, choice: SettingChoice) -> Self {
        Self {
            trials,
            seed,
            choice,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(0) => Err(invalid("workers", "must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| invalid("workers", e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

fn chunks(trials: u64) -> impl ParallelIterator<Item = std::ops::Range<u64>> {
    let count = trials.div_ceil(CHUNK);
    (0..count)
        .into_par_iter()
        .map(move |c| c * CHUNK..((c + 1) * CHUNK).min(trials))
}

/// Runs `trials` trials of one fixed input template on stream `stream`.
fn run_fixed(
    model: &dyn OutcomeModel,
    template: TrialInput,
    trials: u64,
    seed: u64,
    stream: u64,
) -> PairCounts {
    chunks(trials)
        .map(|range| {
            let mut rng = CounterRng::new(seed, stream);
            let mut counts = PairCounts::default();
            for t in range {
                let input = TrialInput {
                    hidden: HiddenState::from_draws(&rng.draws(t)),
                    ..template
                };
                counts.record(model.sample(&input));
            }
            counts
        })
        .reduce(PairCounts::default, |mut a, b| {
            a.add(&b);
            a
        })
}

fn pair_input(
    settings: &ChainedSettings,
    alice: usize,
    bob: usize,
    timing: TimingClass,
) -> TrialInput {
    TrialInput {
        phi: settings.pair_phase(alice, bob),
        alice_phase: settings.alice_phases[alice],
        bob_phase: settings.bob_phases[bob],
        setting_ids: (alice, bob),
        timing,
        hidden: HiddenState {
            u: 0.0,
            v: 0.0,
            alpha: 0.0,
            beta_nl: 0.0,
            lambda: 0.0,
        },
    }
}

/// Stream reserved for a fixed setting pair; stream 0 belongs to
/// random-uniform runs.
fn pair_stream(n: usize, alice: usize, bob: usize) -> u64 {
    1 + (alice * n + bob) as u64
}

/// Runs an experiment and returns the counts of every sampled pair.
///
/// Fixed pairs draw from their own stream, so a `ChainPairs` run equals the
/// merge of the corresponding `FixedPair` runs.
pub fn run_trials(
    model: &dyn OutcomeModel,
    settings: &ChainedSettings,
    timing: TimingClass,
    run: &RunConfig,
) -> Result<CountsTable> {
    if run.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let n = settings.n();
    let seed = run.seed;
    let trials = run.trials;
    in_pool(run.workers, || match run.choice {
        SettingChoice::FixedPair { alice, bob } => {
            if alice >= n || bob >= n {
                return Err(invalid(
                    "setting_choice",
                    format!("pair ({alice}, {bob}) outside 0..{n}"),
                ));
            }
            let mut table = CountsTable::new(n);
            let template = pair_input(settings, alice, bob, timing);
            *table.get_mut(alice, bob) =
                run_fixed(model, template, trials, seed, pair_stream(n, alice, bob));
            Ok(table)
        }
        SettingChoice::ChainPairs => {
            let mut table = CountsTable::new(n);
            for term in chain_terms(n) {
                let template = pair_input(settings, term.alice, term.bob, timing);
                let stream = pair_stream(n, term.alice, term.bob);
                *table.get_mut(term.alice, term.bob) =
                    run_fixed(model, template, trials, seed, stream);
            }
            Ok(table)
        }
        SettingChoice::RandomUniform => {
            let inputs: Vec<TrialInput> = (0..n * n)
                .map(|i| pair_input(settings, i / n, i % n, timing))
                .collect();
            Ok(chunks(trials)
                .map(|range| {
                    let mut rng = CounterRng::new(seed, 0);
                    let mut table = CountsTable::new(n);
                    for t in range {
                        let draws = rng.draws(t);
                        let alice = uniform_index(draws.get(Slot::AliceSetting), n);
                        let bob = uniform_index(draws.get(Slot::BobSetting), n);
                        let input = TrialInput {
                            hidden: HiddenState::from_draws(&draws),
                            ..inputs[alice * n + bob]
                        };
                        table.get_mut(alice, bob).record(model.sample(&input));
                    }
                    table
                })
                .reduce(
                    || CountsTable::new(n),
                    |mut a, b| {
                        a.merge(&b);
                        a
                    },
                ))
        }
    })?
}

/// Runs `trials` trials at a bare phase `phi` (Alice contributes 0, Bob
/// contributes `phi`).
pub fn run_phase_point(
    model: &dyn OutcomeModel,
    phi: f64,
    timing: TimingClass,
    trials: u64,
    seed: u64,
    stream: u64,
    workers: Option<usize>,
) -> Result<PairCounts> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let template = TrialInput {
        phi: crate::chainedbell::wrap_phase(phi),
        alice_phase: 0.0,
        bob_phase: phi,
        setting_ids: (0, 0),
        timing,
        hidden: HiddenState {
            u: 0.0,
            v: 0.0,
            alpha: 0.0,
            beta_nl: 0.0,
            lambda: 0.0,
        },
    };
    in_pool(workers, || run_fixed(model, template, trials, seed, stream))
}

/// A value with its standard error and the sample size behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
}

impl EstimateWithError {
    /// Sample proportion with its normal-approximation binomial error.
    pub fn proportion(successes: u64, n: u64) -> Self {
        if n == 0 {
            return Self {
                value: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let p = successes as f64 / n as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }
}

impl fmt::Display for EstimateWithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6} ± {:.6} (n = {})",
            self.value, self.std_error, self.n
        )
    }
}

/// Plugs the empirical conditional proportions into `I(N)`; term errors
/// are combined in quadrature.
pub fn estimate_i(counts: &CountsTable, cfg: &ChainedConfig) -> Result<InequalityReport> {
    if counts.n() != cfg.n() {
        return Err(invalid(
            "N",
            format!(
                "counts table has {} settings per side, config has {}",
                counts.n(),
                cfg.n()
            ),
        ));
    }
    let mut value = 0.0;
    let mut variance = 0.0;
    let mut terms = Vec::with_capacity(2 * cfg.n());
    for term in chain_terms(cfg.n()) {
        let cell = counts.get(term.alice, term.bob);
        let trials = cell.total();
        if trials < MIN_TRIALS_PER_TERM {
            return Err(Error::InsufficientData(format!(
                "setting pair (alice {}, bob {}) has {} trials, need at least {}",
                term.alice, term.bob, trials, MIN_TRIALS_PER_TERM
            )));
        }
        let (hits, phase) = match term.kind {
            TermKind::Extreme => (cell.equal(), cfg.extreme_phase()),
            TermKind::Adjacent => (cell.differ(), cfg.step()),
        };
        let est = EstimateWithError::proportion(hits, trials);
        value += est.value;
        variance += est.std_error * est.std_error;
        terms.push(TermValue {
            term,
            phase,
            probability: est.value,
            std_error: est.std_error,
            trials,
        });
    }
    Ok(InequalityReport {
        n: cfg.n(),
        theta: cfg.theta(),
        visibility: cfg.visibility(),
        value,
        std_error: variance.sqrt(),
        terms,
    })
}

/// Visibility after mixing in a fraction `accidental` of uncorrelated
/// coincidences: `V_eff = (1 − accidental)·V`.
pub fn effective_visibility(visibility: f64, accidental: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(invalid(
            "visibility",
            format!("must lie in [0, 1], got {visibility}"),
        ));
    }
    if !(0.0..=1.0).contains(&accidental) {
        return Err(invalid(
            "accidental_fraction",
            format!("must lie in [0, 1], got {accidental}"),
        ));
    }
    Ok((1.0 - accidental) * visibility)
}

/// One point of a phase scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub phi: f64,
    pub p_equal: f64,
    pub n: u64,
}

impl ScanPoint {
    pub fn from_counts(phi: f64, counts: &PairCounts) -> Self {
        Self {
            phi,
            p_equal: counts.equal() as f64 / counts.total() as f64,
            n: counts.total(),
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.p_equal * (1.0 - self.p_equal) / self.n as f64).sqrt()
    }
}

/// Simulates `P(a=b)` at each phase; point `i` uses stream `i`.
pub fn scan_phase(
    model: &dyn OutcomeModel,
    phases: &[f64],
    timing: TimingClass,
    trials_per_point: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<ScanPoint>> {
    phases
        .iter()
        .enumerate()
        .map(|(i, &phi)| {
            let c = run_phase_point(
                model,
                phi,
                timing,
                trials_per_point,
                seed,
                i as u64,
                workers,
            )?;
            Ok(ScanPoint::from_counts(phi, &c))
        })
        .collect()
}

/// `count` equally spaced phases over `[0, 2π)`.
pub fn phase_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| TAU * i as f64 / count as f64).collect()
}

pub const MIN_SCAN_POINTS: usize = 8;

/// Fits `P(a=b) − ½ = (V/2)·cos φ` by weighted least squares through the
/// origin and returns `V̂` with its standard error.
pub fn fit_visibility(scan: &[ScanPoint]) -> Result<EstimateWithError> {
    if scan.len() < MIN_SCAN_POINTS {
        return Err(Error::DegenerateScan(format!(
            "{} phase points, need at least {MIN_SCAN_POINTS}",
            scan.len()
        )));
    }
    if let Some(p) = scan.iter().find(|p| p.n == 0) {
        return Err(Error::DegenerateScan(format!(
            "point at phi = {} has no trials",
            p.phi
        )));
    }
    let cosines: Vec<f64> = scan.iter().map(|p| p.phi.cos()).collect();
    let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
    let spread = cosines.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / cosines.len() as f64;
    if spread < 1e-12 {
        return Err(Error::DegenerateScan(
            "all points share the same cos(phi)".into(),
        ));
    }
    let mut wrapped: Vec<f64> = scan
        .iter()
        .map(|p| crate::chainedbell::wrap_phase(p.phi))
        .collect();
    wrapped.sort_by(f64::total_cmp);
    let widest_gap = wrapped
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(TAU - wrapped[wrapped.len() - 1] + wrapped[0], f64::max);
    if widest_gap > FRAC_PI_2 + 1e-12 {
        return Err(Error::DegenerateScan(format!(
            "points leave a gap of {widest_gap:.3} rad, the scan must cover a full period"
        )));
    }

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut total = 0;
    for (p, c) in scan.iter().zip(&cosines) {
        let n = p.n as f64;
        // Variance floor of a quarter count keeps p̂ ∈ {0, 1} finite.
        let var = (p.p_equal * (1.0 - p.p_equal)).max(0.25 / n) / n;
        let w = 1.0 / var;
        sxx += w * c * c;
        sxy += w * c * (p.p_equal - 0.5);
        total += p.n;
    }
    let slope = sxy / sxx;
    Ok(EstimateWithError {
        value: 2.0 * slope,
        std_error: 2.0 / sxx.sqrt(),
        n: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Alice,
    Bob,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Alice => "alice",
            Side::Bob => "bob",
        })
    }
}

/// Two-proportion z-test of one party's `P(+1)` under two remote settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub side: Side,
    pub local: usize,
    pub remote: (usize, usize),
    pub p: (f64, f64),
    pub n: (u64, u64),
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonSignalingReport {
    pub z_threshold: f64,
    pub comparisons: Vec<Comparison>,
}

impl NonSignalingReport {
    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn failures(&self) -> impl Iterator<Item = &Comparison> {
        self.comparisons
            .iter()
            .filter(move |c| c.z.abs() > self.z_threshold)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.comparisons
            .iter()
            .map(|c| c.z.abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for NonSignalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "non-signaling test, |z| threshold {}", self.z_threshold)?;
        for c in &self.comparisons {
            writeln!(
                f,
                "{} setting {}: remote {} vs {}: p+ = {:.6} (n={}) vs {:.6} (n={}), z = {:.4}{}",
                c.side,
                c.local,
                c.remote.0,
                c.remote.1,
                c.p.0,
                c.n.0,
                c.p.1,
                c.n.1,
                c.z,
                if c.z.abs() > self.z_threshold {
                    "  FAIL"
                } else {
                    ""
                }
            )?;
        }
        writeln!(
            f,
            "result: {} (max |z| = {:.4})",
            if self.passed() { "pass" } else { "fail" },
            self.max_abs_z()
        )
    }
}

fn two_proportion_z(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        // Pooled proportion of 0 or 1 means both samples agree exactly.
        0.0
    } else {
        (p1 - p2) / se
    }
}

/// Checks that each party's marginal does not depend on the remote setting.
/// Only populated cells take part.
pub fn nonsignaling_test(counts: &CountsTable, z_threshold: f64) -> Result<NonSignalingReport> {
    let n = counts.n();
    let mut comparisons = Vec::new();
    for side in [Side::Alice, Side::Bob] {
        for local in 0..n {
            let cells: Vec<(usize, u64, u64)> = (0..n)
                .filter_map(|remote| {
                    let c = match side {
                        Side::Alice => counts.get(local, remote),
                        Side::Bob => counts.get(remote, local),
                    };
                    let plus = match side {
                        Side::Alice => c.alice_plus(),
                        Side::Bob => c.bob_plus(),
                    };
                    (c.total() > 0).then_some((remote, plus, c.total()))
                })
                .collect();
            if let Some(&(remote, _, total)) = cells.iter().find(|c| c.2 < MIN_TRIALS_PER_CELL) {
                return Err(Error::InsufficientData(format!(
                    "{side} setting {local} with remote setting {remote} has {total} trials, need at least {MIN_TRIALS_PER_CELL}"
                )));
            }
            if cells.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "{side} setting {local} was measured against {} remote setting(s), need at least 2",
                    cells.len()
                )));
            }
            for (i, &(r1, x1, n1)) in cells.iter().enumerate() {
                for &(r2, x2, n2) in &cells[i + 1..] {
                    comparisons.push(Comparison {
                        side,
                        local,
                        remote: (r1, r2),
                        p: (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64),
                        n: (n1, n2),
                        z: two_proportion_z(x1, n1, x2, n2),
                    });
                }
            }
        }
    }
    Ok(NonSignalingReport {
        z_threshold,
        comparisons,
    })
}

/// Total-variation distance of one party's pooled marginal from uniform,
/// `|P̂(+1) − ½|`.
pub fn estimate_distance(counts: &CountsTable, side: Side) -> Result<EstimateWithError> {
    let pooled = counts.pooled();
    let n = pooled.total();
    if n < MIN_TRIALS_FOR_DISTANCE {
        return Err(Error::InsufficientData(format!(
            "{n} trials, need at least {MIN_TRIALS_FOR_DISTANCE} for a distance estimate"
        )));
    }
    let plus = match side {
        Side::Alice => pooled.alice_plus(),
        Side::Bob => pooled.bob_plus(),
    };
    let p = EstimateWithError::proportion(plus, n);
    Ok(EstimateWithError {
        value: (p.value - 0.5).abs(),
        ..p
    })
}

/// Total-variation distance of the pooled joint outcome distribution from
/// the uniform distribution on `{±1}²`.
pub fn joint_distance(counts: &CountsTable) -> f64 {
    let pooled = counts.pooled();
    let n = pooled.total() as f64;
    0.5 * [pooled.pp, pooled.pm, pooled.mp, pooled.mm]
        .iter()
        .map(|&c| (c as f64 / n - 0.25).abs())
        .sum::<f64>()
}

/// Header `phi,p_equal,std_err,n`.
pub fn write_scan_csv<W: Write>(out: &mut W, scan: &[ScanPoint]) -> io::Result<()> {
    writeln!(out, "phi,p_equal,std_err,n")?;
    for p in scan {
        writeln!(
            out,
            "{:.12},{:.12},{:.12},{}",
            p.phi,
            p.p_equal,
            p.std_error(),
            p.n
        )?;
    }
    Ok(())
}

/// Header `N,I_hat,std_err`.
pub fn write_inequality_csv<W: Write>(out: &mut W, reports: &[InequalityReport]) -> io::Result<()> {
    writeln!(out, "N,I_hat,std_err")?;
    for r in reports {
        writeln!(out, "{},{:.12},{:.12}", r.n, r.value, r.std_error)?;
    }
    Ok(())
}

/// One row per populated setting pair.
pub fn write_counts_csv<W: Write>(
    out: &mut W,
    counts: &CountsTable,
    settings: &ChainedSettings,
) -> io::Result<()> {
    writeln!(out, "alice,bob,phi,n_pp,n_pm,n_mp,n_mm,total")?;
    for ((a, b), c) in counts.iter().filter(|(_, c)| c.total() > 0) {
        writeln!(
            out,
            "{},{},{:.12},{},{},{},{},{}",
            a,
            b,
            settings.pair_phase(a, b),
            c.pp,
            c.pm,
            c.mp,
            c.mm,
            c.total()
        )?;
    }
    Ok(())
}
