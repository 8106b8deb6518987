//! Interferometer phases, equipartitioned chained settings and the exact
//! chained-Bell quantity `I(N, Θ)`.
//!
//! Setting labels follow the chain `l_0, l_1, …, l_{2N−1}`: even labels are
//! Alice's long arms (`l_{2j}` is Alice setting `j`), odd labels are Bob's
//! (`l_{2k+1}` is Bob setting `k`). `I(N)` sums `P(a=b)` on the extreme
//! pair `(l_0, l_{2N−1})` and `P(a≠b)` on the `2N−1` adjacent pairs.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use crate::error::{invalid, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Largest `N` the minimiser will scan.
pub const MAX_SCAN_N: usize = 1_000_000;

/// Default upper end of the `N` scan.
pub const DEFAULT_N_MAX: usize = 1000;

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Angular frequencies and short-arm lengths of the two interferometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerParams {
    omega_a: f64,
    omega_b: f64,
    short_a: f64,
    short_b: f64,
}

impl InterferometerParams {
    pub fn new(omega_a: f64, omega_b: f64, short_a: f64, short_b: f64) -> Result<Self> {
        for (name, w) in [("omega_a", omega_a), ("omega_b", omega_b)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(name, format!("must be positive, got {w}")));
            }
        }
        for (name, s) in [("s_a", short_a), ("s_b", short_b)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(invalid(name, format!("must be non-negative, got {s}")));
            }
        }
        Ok(Self {
            omega_a,
            omega_b,
            short_a,
            short_b,
        })
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b
    }

    pub fn short_a(&self) -> f64 {
        self.short_a
    }

    pub fn short_b(&self) -> f64 {
        self.short_b
    }

    /// Alice's phase contribution `ω_A (l_A − s_A) / c`, unreduced.
    pub fn alice_contribution(&self, long_arm: f64) -> f64 {
        self.omega_a * (long_arm - self.short_a) / SPEED_OF_LIGHT
    }

    pub fn bob_contribution(&self, long_arm: f64) -> f64 {
        self.omega_b * (long_arm - self.short_b) / SPEED_OF_LIGHT
    }

    /// Long-arm length that realises Alice's contribution `x ∈ [0, 2π)`.
    pub fn alice_arm_for(&self, x: f64) -> f64 {
        self.short_a + SPEED_OF_LIGHT * x / self.omega_a
    }

    pub fn bob_arm_for(&self, y: f64) -> f64 {
        self.short_b + SPEED_OF_LIGHT * y / self.omega_b
    }
}

impl Default for InterferometerParams {
    /// 810 nm photons on both sides, 10 cm short arms.
    fn default() -> Self {
        let omega = TAU * SPEED_OF_LIGHT / 810e-9;
        Self {
            omega_a: omega,
            omega_b: omega,
            short_a: 0.1,
            short_b: 0.1,
        }
    }
}

/// `Φ = ω_A(l_A − s_A)/c + ω_B(l_B − s_B)/c`, reduced into `[0, 2π)`.
pub fn phase(long_a: f64, long_b: f64, p: &InterferometerParams) -> f64 {
    wrap_phase(p.alice_contribution(long_a) + p.bob_contribution(long_b))
}

fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(
            "visibility",
            format!("must lie in [0, 1], got {v}"),
        ))
    }
}

/// `P(a = b | Φ) = ½(1 + V cos Φ)`.
pub fn prob_equal(phi: f64, visibility: f64) -> Result<f64> {
    check_visibility(visibility)?;
    Ok(0.5 * (1.0 + visibility * phi.cos()))
}

/// `P(a ≠ b | Φ) = ½(1 − V cos Φ)`.
pub fn prob_differ(phi: f64, visibility: f64) -> Result<f64> {
    check_visibility(visibility)?;
    Ok(0.5 * (1.0 - visibility * phi.cos()))
}

/// Number of settings per side, the total phase `Θ` and the visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainedConfig {
    n: usize,
    theta: f64,
    visibility: f64,
}

impl ChainedConfig {
    pub fn new(n: usize, theta: f64, visibility: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(
                "N",
                format!("need at least 2 settings per side, got {n}"),
            ));
        }
        if !theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        check_visibility(visibility)?;
        Ok(Self {
            n,
            theta,
            visibility,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// Phase step between adjacent settings, `Θ/2N`.
    pub fn step(&self) -> f64 {
        self.theta / (2 * self.n) as f64
    }

    /// Phase of the extreme pair, `(2N−1)Θ/2N`.
    pub fn extreme_phase(&self) -> f64 {
        (2 * self.n - 1) as f64 * self.step()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermKind {
    /// `(l_0, l_{2N−1})`, contributes `P(a = b)`.
    Extreme,
    /// `(l_i, l_{i+1})`, contributes `P(a ≠ b)`.
    Adjacent,
}

/// One term of `I(N)`: a setting pair and which probability it contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainTerm {
    pub alice: usize,
    pub bob: usize,
    pub kind: TermKind,
}

/// The `2N` terms of `I(N)`: the extreme pair first, then the adjacent
/// pairs in chain order `(l_0,l_1), (l_1,l_2), …, (l_{2N−2},l_{2N−1})`.
pub fn chain_terms(n: usize) -> Vec<ChainTerm> {
    let mut terms = Vec::with_capacity(2 * n);
    terms.push(ChainTerm {
        alice: 0,
        bob: n - 1,
        kind: TermKind::Extreme,
    });
    for i in 0..2 * n - 1 {
        let (alice, bob) = if i % 2 == 0 {
            (i / 2, i / 2)
        } else {
            (i.div_ceil(2), (i - 1) / 2)
        };
        terms.push(ChainTerm {
            alice,
            bob,
            kind: TermKind::Adjacent,
        });
    }
    terms
}

/// Equipartitioned settings for both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainedSettings {
    config: ChainedConfig,
    params: InterferometerParams,
    pub alice_phases: Vec<f64>,
    pub bob_phases: Vec<f64>,
    pub alice_long_arms: Vec<f64>,
    pub bob_long_arms: Vec<f64>,
}

impl ChainedSettings {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn config(&self) -> &ChainedConfig {
        &self.config
    }

    pub fn params(&self) -> &InterferometerParams {
        &self.params
    }

    /// Phase realised by Alice setting `alice` and Bob setting `bob`,
    /// computed from the arm lengths.
    pub fn pair_phase(&self, alice: usize, bob: usize) -> f64 {
        phase(
            self.alice_long_arms[alice],
            self.bob_long_arms[bob],
            &self.params,
        )
    }

    /// Largest deviation of any chain pair's `cos Φ` from its target.
    pub fn max_cosine_error(&self) -> f64 {
        let step_cos = self.config.step().cos();
        let extreme_cos = self.config.extreme_phase().cos();
        chain_terms(self.n())
            .into_iter()
            .map(|t| {
                let target = match t.kind {
                    TermKind::Extreme => extreme_cos,
                    TermKind::Adjacent => step_cos,
                };
                (self.pair_phase(t.alice, t.bob).cos() - target).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Builds settings with Alice phases `x_j = −2jΘ/2N` and Bob phases
/// `y_k = (2k+1)Θ/2N`, both reduced mod 2π.
///
/// With a phase *sum* an equal-step chain cannot keep every adjacent sum at
/// `+Θ/2N`; the pairs `(x_{j+1}, y_j)` land on `−Θ/2N` instead, which has the
/// same cosine and hence the same outcome statistics.
pub fn equipartition_settings(
    cfg: &ChainedConfig,
    params: &InterferometerParams,
) -> Result<ChainedSettings> {
    if !(cfg.theta > 0.0 && cfg.theta <= PI) {
        return Err(invalid(
            "theta",
            format!("equipartition needs 0 < theta <= pi, got {}", cfg.theta),
        ));
    }
    let step = cfg.step();
    let alice_phases: Vec<f64> = (0..cfg.n)
        .map(|j| wrap_phase(-2.0 * j as f64 * step))
        .collect();
    let bob_phases: Vec<f64> = (0..cfg.n)
        .map(|k| wrap_phase((2 * k + 1) as f64 * step))
        .collect();
    let alice_long_arms = alice_phases
        .iter()
        .map(|&x| params.alice_arm_for(x))
        .collect();
    let bob_long_arms = bob_phases.iter().map(|&y| params.bob_arm_for(y)).collect();
    Ok(ChainedSettings {
        config: *cfg,
        params: *params,
        alice_phases,
        bob_phases,
        alice_long_arms,
        bob_long_arms,
    })
}

/// A single term's contribution to an [`InequalityReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValue {
    pub term: ChainTerm,
    pub phase: f64,
    /// `P(a=b)` for the extreme term, `P(a≠b)` for adjacent ones.
    pub probability: f64,
    pub std_error: f64,
    /// Trials behind the estimate; zero for exact values.
    pub trials: u64,
}

/// `I(N, Θ)` together with its per-term breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub n: usize,
    pub theta: f64,
    pub visibility: f64,
    pub value: f64,
    pub std_error: f64,
    pub terms: Vec<TermValue>,
}

impl InequalityReport {
    /// `I(N) < 1` cannot be produced by local influences.
    pub fn is_violation(&self) -> bool {
        self.value < 1.0
    }
}

/// `I(N, Θ) = ½(1 + V cos(Θ − Θ/2N)) + ((2N−1)/2)(1 − V cos(Θ/2N))`.
pub fn closed_form_i(cfg: &ChainedConfig) -> InequalityReport {
    let n = cfg.n;
    let v = cfg.visibility;
    let step = cfg.step();
    let value = 0.5 * (1.0 + v * (cfg.theta - step).cos())
        + (2 * n - 1) as f64 / 2.0 * (1.0 - v * step.cos());
    let terms = chain_terms(n)
        .into_iter()
        .map(|term| {
            let (phase, probability) = match term.kind {
                TermKind::Extreme => {
                    let phi = cfg.extreme_phase();
                    (phi, 0.5 * (1.0 + v * phi.cos()))
                }
                TermKind::Adjacent => (step, 0.5 * (1.0 - v * step.cos())),
            };
            TermValue {
                term,
                phase,
                probability,
                std_error: 0.0,
                trials: 0,
            }
        })
        .collect();
    InequalityReport {
        n,
        theta: cfg.theta,
        visibility: v,
        value,
        std_error: 0.0,
        terms,
    }
}

/// `I(N, π) = N(1 − V cos(π/2N))`.
pub fn closed_form_i_at_pi(n: usize, visibility: f64) -> f64 {
    n as f64 * (1.0 - visibility * (PI / (2 * n) as f64).cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgMin {
    pub n_star: usize,
    pub i_min: f64,
    /// The minimum sits at the end of the scanned range, so no interior
    /// minimum was found.
    pub at_boundary: bool,
}

/// Exhaustive scan of `I(N, Θ)` over `N = 2..=n_max`; ties go to the
/// smaller `N`.
pub fn minimize_i_over_n(visibility: f64, theta: f64, n_max: usize) -> Result<ArgMin> {
    if !(2..=MAX_SCAN_N).contains(&n_max) {
        return Err(invalid(
            "n_max",
            format!("must lie in [2, {MAX_SCAN_N}], got {n_max}"),
        ));
    }
    let mut best = ArgMin {
        n_star: 0,
        i_min: f64::INFINITY,
        at_boundary: false,
    };
    for n in 2..=n_max {
        let value = closed_form_i(&ChainedConfig::new(n, theta, visibility)?).value;
        if value < best.i_min {
            best.n_star = n;
            best.i_min = value;
        }
    }
    best.at_boundary = best.n_star == n_max;
    Ok(best)
}

/// Writes the curve `N, I(N,pi)` for `N = 2..=n_max` as CSV.
pub fn write_figure3_csv<W: Write>(out: &mut W, visibility: f64, n_max: usize) -> io::Result<()> {
    writeln!(out, "N,I(N,pi)")?;
    for n in 2..=n_max {
        writeln!(out, "{},{:.12}", n, closed_form_i_at_pi(n, visibility))?;
    }
    Ok(())
}
