//! Outcome models. Every sampler is a pure function of its [`TrialInput`];
//! all randomness arrives through the [`HiddenState`] carried by the input.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::rng::{CounterRng, Slot, TrialDraws};
use crate::spacetime::TimingClass;

/// Detector outcome, `+1` or `−1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    /// `+1` when `u ≥ ½`, `−1` otherwise.
    pub fn from_uniform(u: f64) -> Self {
        if u >= 0.5 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    /// Sign of `x`, with zero mapped to `+1`.
    pub fn sign_of(x: f64) -> Self {
        if x >= 0.0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointOutcome {
    pub a: Outcome,
    pub b: Outcome,
}

impl JointOutcome {
    pub fn new(a: Outcome, b: Outcome) -> Self {
        Self { a, b }
    }

    pub fn is_equal(&self) -> bool {
        self.a == self.b
    }
}

/// Hidden variables for one trial, each in `[0, 1)`.
///
/// `u` and `v` are the local variables of Alice and Bob; `alpha` and
/// `beta_nl` feed the nonlocal branches; `lambda` is the classical shared
/// variable used by the shared-randomness local strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenState {
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
    pub beta_nl: f64,
    pub lambda: f64,
}

impl HiddenState {
    pub fn from_draws(d: &TrialDraws) -> Self {
        Self {
            u: d.get(Slot::U),
            v: d.get(Slot::V),
            alpha: d.get(Slot::Alpha),
            beta_nl: d.get(Slot::BetaNl),
            lambda: d.get(Slot::Lambda),
        }
    }

    /// Hidden state of trial `trial` in stream `stream` under `seed`.
    pub fn derive(seed: u64, stream: u64, trial: u64) -> Self {
        Self::from_draws(&CounterRng::new(seed, stream).draws(trial))
    }
}

/// Everything a sampler may look at for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialInput {
    /// Total phase `Φ ∈ [0, 2π)` of the chosen setting pair.
    pub phi: f64,
    /// Alice's local phase contribution.
    pub alice_phase: f64,
    /// Bob's local phase contribution.
    pub bob_phase: f64,
    pub setting_ids: (usize, usize),
    pub timing: TimingClass,
    pub hidden: HiddenState,
}

/// Contract shared by all outcome models.
pub trait OutcomeModel: Send + Sync {
    fn name(&self) -> &str;

    /// Whether the output may depend on [`TrialInput::timing`].
    fn timing_sensitive(&self) -> bool;

    fn sample(&self, input: &TrialInput) -> JointOutcome;
}

fn check_visibility(v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(invalid(
            "visibility",
            format!("must lie in [0, 1], got {v}"),
        ))
    }
}

/// Draws `(a, b)` from `P(a=b|Φ) = ½(1 + V cos Φ)` with uniform marginals:
/// `a` from `u`, then agreement decided by `alpha`.
fn interference_pair(phi: f64, visibility: f64, u: f64, alpha: f64) -> JointOutcome {
    let a = Outcome::from_uniform(u);
    JointOutcome::new(a, respond(a, phi, visibility, alpha))
}

/// Outcome of the party answering second, drawn from the conditional
/// `P(same | Φ) = ½(1 + V cos Φ)` given the first party's outcome.
fn respond(first: Outcome, phi: f64, visibility: f64, w: f64) -> Outcome {
    if w < 0.5 * (1.0 + visibility * phi.cos()) {
        first
    } else {
        first.flip()
    }
}

/// Timing-independent interference correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumModel {
    visibility: f64,
}

impl QuantumModel {
    pub fn new(visibility: f64) -> Result<Self> {
        Ok(Self {
            visibility: check_visibility(visibility)?,
        })
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }
}

impl OutcomeModel for QuantumModel {
    fn name(&self) -> &str {
        "quantum"
    }

    fn timing_sensitive(&self) -> bool {
        false
    }

    fn sample(&self, input: &TrialInput) -> JointOutcome {
        let h = &input.hidden;
        interference_pair(input.phi, self.visibility, h.u, h.alpha)
    }
}

/// How a party that is "before" in its own frame picks its outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalStrategy {
    /// Independent uniform signs from `u` and `v`; ignores the setting.
    #[default]
    Product,
    /// Classical shared variable `λ = 2π·lambda`: `a = sign cos(x + λ)`,
    /// `b = sign cos(y − λ)` with `x`, `y` the local phase contributions.
    SharedRandomness,
}

impl FromStr for LocalStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(LocalStrategy::Product),
            "shared_randomness" | "shared-randomness" => Ok(LocalStrategy::SharedRandomness),
            other => Err(invalid(
                "local_strategy",
                format!("expected `product` or `shared_randomness`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for LocalStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocalStrategy::Product => "product",
            LocalStrategy::SharedRandomness => "shared_randomness",
        })
    }
}

/// Frame-dependent model: a party that selects first in its own
/// beam-splitter frame answers from local variables only; a party that
/// selects second (or simultaneously) answers nonlocally so that the pair
/// reproduces the interference statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuarezScaraniModel {
    visibility: f64,
    strategy: LocalStrategy,
}

impl SuarezScaraniModel {
    pub fn new(visibility: f64, strategy: LocalStrategy) -> Result<Self> {
        Ok(Self {
            visibility: check_visibility(visibility)?,
            strategy,
        })
    }

    pub fn strategy(&self) -> LocalStrategy {
        self.strategy
    }

    fn local_alice(&self, input: &TrialInput) -> Outcome {
        match self.strategy {
            LocalStrategy::Product => Outcome::from_uniform(input.hidden.u),
            LocalStrategy::SharedRandomness => {
                Outcome::sign_of((input.alice_phase + TAU * input.hidden.lambda).cos())
            }
        }
    }

    fn local_bob(&self, input: &TrialInput) -> Outcome {
        match self.strategy {
            LocalStrategy::Product => Outcome::from_uniform(input.hidden.v),
            // y − λ rather than y + λ: the outcomes then agree with
            // probability 1 − d(x + y)/π, a function of the phase sum.
            LocalStrategy::SharedRandomness => {
                Outcome::sign_of((input.bob_phase - TAU * input.hidden.lambda).cos())
            }
        }
    }
}

impl OutcomeModel for SuarezScaraniModel {
    fn name(&self) -> &str {
        "suarez-scarani"
    }

    fn timing_sensitive(&self) -> bool {
        true
    }

    fn sample(&self, input: &TrialInput) -> JointOutcome {
        let h = &input.hidden;
        let v = self.visibility;
        match input.timing {
            TimingClass::BeforeBefore => {
                JointOutcome::new(self.local_alice(input), self.local_bob(input))
            }
            TimingClass::AliceBeforeOnly => {
                let a = self.local_alice(input);
                JointOutcome::new(a, respond(a, input.phi, v, h.beta_nl))
            }
            TimingClass::BobBeforeOnly => {
                let b = self.local_bob(input);
                JointOutcome::new(respond(b, input.phi, v, h.alpha), b)
            }
            TimingClass::AfterAfter => interference_pair(input.phi, v, h.u, h.alpha),
        }
    }
}

/// `a = sign(u − ½)`, `b = sign(v − ½)`: uniform, independent, and blind
/// to settings and timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocalDeterministicModel;

impl OutcomeModel for LocalDeterministicModel {
    fn name(&self) -> &str {
        "local"
    }

    fn timing_sensitive(&self) -> bool {
        false
    }

    fn sample(&self, input: &TrialInput) -> JointOutcome {
        JointOutcome::new(
            Outcome::from_uniform(input.hidden.u),
            Outcome::from_uniform(input.hidden.v),
        )
    }
}

/// Positive control for the non-signaling test: Alice's marginal is
/// `P(a=+1) = ½ + δ cos(y)` where `y` is Bob's phase contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalingToyModel {
    delta: f64,
}

impl SignalingToyModel {
    pub const MAX_DELTA: f64 = 0.25;

    pub fn new(delta: f64) -> Result<Self> {
        if (0.0..=Self::MAX_DELTA).contains(&delta) {
            Ok(Self { delta })
        } else {
            Err(invalid(
                "delta",
                format!("must lie in [0, 0.25], got {delta}"),
            ))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn alice_plus_probability(&self, remote_phase: f64) -> f64 {
        0.5 + self.delta * remote_phase.cos()
    }
}

impl OutcomeModel for SignalingToyModel {
    fn name(&self) -> &str {
        "signaling-toy"
    }

    fn timing_sensitive(&self) -> bool {
        false
    }

    fn sample(&self, input: &TrialInput) -> JointOutcome {
        let p_plus = self.alice_plus_probability(input.bob_phase);
        let a = if input.hidden.u < p_plus {
            Outcome::Plus
        } else {
            Outcome::Minus
        };
        JointOutcome::new(a, Outcome::from_uniform(input.hidden.v))
    }
}
