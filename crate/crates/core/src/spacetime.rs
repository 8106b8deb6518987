//! Events, inertial frames and the before/after classification of the two
//! measurement events.
//!
//! Everything here works in 1+1 dimensions with `c = 1`: times are seconds
//! and positions are light-seconds.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Two frame times closer than this are treated as simultaneous.
pub const TIME_TIE_TOLERANCE: f64 = 1e-12;

/// Squared intervals with magnitude at or below this are lightlike.
pub const INTERVAL_TOLERANCE: f64 = 1e-12;

/// A point in 1+1-dimensional spacetime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: f64,
}

impl Event {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(invalid("t", format!("must be finite, got {t}")));
        }
        if !x.is_finite() {
            return Err(invalid("x", format!("must be finite, got {x}")));
        }
        Ok(Self { t, x })
    }
}

/// Velocity of an inertial frame relative to the lab, as a fraction of `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boost(f64);

impl Boost {
    pub const REST: Boost = Boost(0.0);

    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta.abs() < 1.0 {
            Ok(Self(beta))
        } else {
            Err(Error::InvalidBoost(beta))
        }
    }

    pub fn beta(self) -> f64 {
        self.0
    }

    pub fn gamma(self) -> f64 {
        1.0 / (1.0 - self.0 * self.0).sqrt()
    }
}

/// Time coordinate of `e` in the frame moving with velocity `b`:
/// `γ(t − βx)`.
pub fn time_in_frame(e: Event, b: Boost) -> f64 {
    b.gamma() * (e.t - b.beta() * e.x)
}

/// Full coordinates of `e` in the frame moving with velocity `b`.
pub fn transform(e: Event, b: Boost) -> Event {
    let g = b.gamma();
    Event {
        t: g * (e.t - b.beta() * e.x),
        x: g * (e.x - b.beta() * e.t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalClass {
    Spacelike,
    Timelike,
    Lightlike,
}

/// Classifies the separation of two events by the sign of `Δt² − Δx²`.
pub fn interval_class(e1: Event, e2: Event) -> IntervalClass {
    let dt = e2.t - e1.t;
    let dx = e2.x - e1.x;
    let s2 = dt * dt - dx * dx;
    if s2.abs() <= INTERVAL_TOLERANCE {
        IntervalClass::Lightlike
    } else if s2 < 0.0 {
        IntervalClass::Spacelike
    } else {
        IntervalClass::Timelike
    }
}

/// The two measurement events and the rest frames of the two output
/// beam-splitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApparatusGeometry {
    alice_event: Event,
    bob_event: Event,
    alice_frame: Boost,
    bob_frame: Boost,
}

impl ApparatusGeometry {
    /// Fails unless the two events are spacelike separated.
    pub fn new(
        alice_event: Event,
        bob_event: Event,
        alice_frame: Boost,
        bob_frame: Boost,
    ) -> Result<Self> {
        match interval_class(alice_event, bob_event) {
            IntervalClass::Spacelike => Ok(Self {
                alice_event,
                bob_event,
                alice_frame,
                bob_frame,
            }),
            other => Err(Error::NotSpacelike(other)),
        }
    }

    pub fn alice_event(&self) -> Event {
        self.alice_event
    }

    pub fn bob_event(&self) -> Event {
        self.bob_event
    }

    pub fn alice_frame(&self) -> Boost {
        self.alice_frame
    }

    pub fn bob_frame(&self) -> Boost {
        self.bob_frame
    }

    /// Frame times of both events in both beam-splitter frames.
    pub fn frame_times(&self) -> FrameTimes {
        FrameTimes {
            alice_frame: (
                time_in_frame(self.alice_event, self.alice_frame),
                time_in_frame(self.bob_event, self.alice_frame),
            ),
            bob_frame: (
                time_in_frame(self.alice_event, self.bob_frame),
                time_in_frame(self.bob_event, self.bob_frame),
            ),
        }
    }
}

/// `(t_alice, t_bob)` pairs as seen from each beam-splitter frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTimes {
    pub alice_frame: (f64, f64),
    pub bob_frame: (f64, f64),
}

impl FrameTimes {
    /// True when either frame sees the two events as simultaneous.
    pub fn has_tie(&self) -> bool {
        let (a1, b1) = self.alice_frame;
        let (a2, b2) = self.bob_frame;
        (a1 - b1).abs() <= TIME_TIE_TOLERANCE || (a2 - b2).abs() <= TIME_TIE_TOLERANCE
    }
}

/// Which branch each party executes: a party is "before" when, in its own
/// beam-splitter frame, its outcome is selected strictly before the other's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimingClass {
    BeforeBefore,
    AfterAfter,
    AliceBeforeOnly,
    BobBeforeOnly,
}

impl TimingClass {
    pub const ALL: [TimingClass; 4] = [
        TimingClass::BeforeBefore,
        TimingClass::AfterAfter,
        TimingClass::AliceBeforeOnly,
        TimingClass::BobBeforeOnly,
    ];

    pub fn from_flags(alice_is_before: bool, bob_is_before: bool) -> Self {
        match (alice_is_before, bob_is_before) {
            (true, true) => TimingClass::BeforeBefore,
            (false, false) => TimingClass::AfterAfter,
            (true, false) => TimingClass::AliceBeforeOnly,
            (false, true) => TimingClass::BobBeforeOnly,
        }
    }

    pub fn alice_is_before(self) -> bool {
        matches!(
            self,
            TimingClass::BeforeBefore | TimingClass::AliceBeforeOnly
        )
    }

    pub fn bob_is_before(self) -> bool {
        matches!(self, TimingClass::BeforeBefore | TimingClass::BobBeforeOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimingClass::BeforeBefore => "BeforeBefore",
            TimingClass::AfterAfter => "AfterAfter",
            TimingClass::AliceBeforeOnly => "AliceBeforeOnly",
            TimingClass::BobBeforeOnly => "BobBeforeOnly",
        }
    }
}

impl fmt::Display for TimingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TimingClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "beforebefore" => Ok(TimingClass::BeforeBefore),
            "afterafter" => Ok(TimingClass::AfterAfter),
            "alicebeforeonly" => Ok(TimingClass::AliceBeforeOnly),
            "bobbeforeonly" => Ok(TimingClass::BobBeforeOnly),
            _ => Err(invalid("timing", format!("unknown timing class `{s}`"))),
        }
    }
}

/// Classifies the geometry. Ties within [`TIME_TIE_TOLERANCE`] count as
/// "not before", i.e. they select the nonlocal branch.
pub fn classify_timing(g: &ApparatusGeometry) -> Result<TimingClass> {
    if let c @ (IntervalClass::Timelike | IntervalClass::Lightlike) =
        interval_class(g.alice_event, g.bob_event)
    {
        return Err(Error::NotSpacelike(c));
    }
    let times = g.frame_times();
    let (ta, tb) = times.alice_frame;
    let alice_is_before = ta < tb - TIME_TIE_TOLERANCE;
    let (ta, tb) = times.bob_frame;
    let bob_is_before = tb < ta - TIME_TIE_TOLERANCE;
    Ok(TimingClass::from_flags(alice_is_before, bob_is_before))
}
