//! The non-signaling distance bound `D ≤ 3I(N)/2` and the verdict it
//! implies for extensions that claim an `N`-independent distance `D`.

use std::fmt;
use std::io::{self, Write};
use std::ops::RangeInclusive;

use crate::chainedbell::{closed_form_i, minimize_i_over_n, ChainedConfig, InequalityReport};
use crate::error::{invalid, Result};

/// Largest variational distance between two distributions on `{±1}`.
pub const MAX_DISTANCE: f64 = 0.5;

/// Multiple of the standard error the empirical verdict demands.
pub const EMPIRICAL_SIGMAS: f64 = 4.0;

/// `3·I/2`, the largest distance from uniform a non-signaling extension
/// can have given chained-Bell value `I`.
pub fn cr_bound(i_value: f64) -> Result<f64> {
    if !i_value.is_finite() || i_value < 0.0 {
        return Err(invalid("I", format!("must be non-negative, got {i_value}")));
    }
    Ok(1.5 * i_value)
}

/// A covariant extension's claimed distance together with the experimental
/// conditions it has to survive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionClaim {
    claimed_d: f64,
    visibility: f64,
    theta: f64,
    n_max: usize,
}

impl ExtensionClaim {
    pub fn new(claimed_d: f64, visibility: f64, theta: f64, n_max: usize) -> Result<Self> {
        if !(0.0..=MAX_DISTANCE).contains(&claimed_d) {
            return Err(invalid(
                "D",
                format!("must lie in [0, 0.5], got {claimed_d}"),
            ));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(invalid(
                "visibility",
                format!("must lie in [0, 1], got {visibility}"),
            ));
        }
        if !theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        Ok(Self {
            claimed_d,
            visibility,
            theta,
            n_max,
        })
    }

    pub fn claimed_d(&self) -> f64 {
        self.claimed_d
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub claimed_d: f64,
    pub visibility: f64,
    pub n_star: usize,
    pub i_min: f64,
    pub bound: f64,
    pub contradictory: bool,
    /// `claimed_d − bound`; positive exactly when contradictory.
    pub margin: f64,
}

impl Verdict {
    pub const CSV_HEADER: &'static str = "claimed_D,V,N_star,I_min,bound,contradictory";

    pub fn write_csv_row<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "{},{},{},{:.12},{:.12},{}",
            self.claimed_d,
            self.visibility,
            self.n_star,
            self.i_min,
            self.bound,
            self.contradictory
        )
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.contradictory {
            writeln!(
                f,
                "CONTRADICTORY: bound {:.3} < claimed {}",
                self.bound, self.claimed_d
            )?;
        } else {
            writeln!(
                f,
                "consistent: claimed {} <= bound {:.3}",
                self.claimed_d, self.bound
            )?;
        }
        writeln!(f, "N* = {}", self.n_star)?;
        writeln!(f, "I_min = {:.6}", self.i_min)?;
        writeln!(f, "bound = {:.6}", self.bound)?;
        write!(f, "margin = {:.6}", self.margin)
    }
}

/// Finds the smallest `I(N, Θ)` over `N ≤ n_max` and compares the claimed
/// distance with `3·I_min/2`.
pub fn check_extension(claim: &ExtensionClaim) -> Result<Verdict> {
    let best = minimize_i_over_n(claim.visibility, claim.theta, claim.n_max)?;
    let bound = cr_bound(best.i_min)?;
    Ok(Verdict {
        claimed_d: claim.claimed_d,
        visibility: claim.visibility,
        n_star: best.n_star,
        i_min: best.i_min,
        bound,
        contradictory: claim.claimed_d > bound,
        margin: claim.claimed_d - bound,
    })
}

/// Verdict against a measured `Î` rather than the exact value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalVerdict {
    pub claimed_d: f64,
    pub bound: f64,
    pub bound_std_error: f64,
    /// Set only when the claim exceeds the bound by
    /// [`EMPIRICAL_SIGMAS`] standard errors.
    pub contradictory: bool,
}

pub fn check_extension_empirical(
    claimed_d: f64,
    measured: &InequalityReport,
) -> Result<EmpiricalVerdict> {
    if !(0.0..=MAX_DISTANCE).contains(&claimed_d) {
        return Err(invalid(
            "D",
            format!("must lie in [0, 0.5], got {claimed_d}"),
        ));
    }
    let bound = cr_bound(measured.value)?;
    let bound_std_error = 1.5 * measured.std_error;
    Ok(EmpiricalVerdict {
        claimed_d,
        bound,
        bound_std_error,
        contradictory: claimed_d > bound + EMPIRICAL_SIGMAS * bound_std_error,
    })
}

/// `(N, 3·I(N, Θ)/2)` for each `N` in the range: the ceiling an
/// `N`-dependent distance has to stay under.
pub fn admissible_envelope(
    visibility: f64,
    theta: f64,
    n_range: RangeInclusive<usize>,
) -> Result<Vec<(usize, f64)>> {
    if *n_range.start() < 2 || n_range.is_empty() {
        return Err(invalid(
            "N",
            format!("range must be non-empty and start at 2 or above, got {n_range:?}"),
        ));
    }
    n_range
        .map(|n| {
            let i = closed_form_i(&ChainedConfig::new(n, theta, visibility)?).value;
            Ok((n, cr_bound(i)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainedbell::closed_form_i_at_pi;
    use std::f64::consts::PI;

    fn verdict(d: f64, v: f64) -> Verdict {
        check_extension(&ExtensionClaim::new(d, v, PI, 500).unwrap()).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert!((cr_bound(0.07).unwrap() - 0.105).abs() < 1e-15);
        assert_eq!(cr_bound(0.0).unwrap(), 0.0);
        assert_eq!(cr_bound(1.0).unwrap(), 1.5);
        assert!(cr_bound(-0.1).is_err());
        assert!(cr_bound(f64::NAN).is_err());
    }

    #[test]
    fn worked_example_is_contradictory() {
        let v = verdict(0.25, 0.999);
        assert_eq!(v.n_star, 35);
        assert!((v.i_min - 0.0702).abs() < 5e-4);
        assert!((v.bound - 0.105).abs() < 1e-3);
        assert!(v.contradictory);
        assert!(v.margin > 0.0);
        assert!(v
            .to_string()
            .starts_with("CONTRADICTORY: bound 0.105 < claimed 0.25"));
    }

    #[test]
    fn small_claims_are_consistent() {
        let v = verdict(0.10, 0.999);
        assert!(!v.contradictory);
        assert!(v.margin < 0.0);
        assert!(v.to_string().starts_with("consistent"));
        for vis in [0.0, 0.5, 0.999, 1.0] {
            assert!(!verdict(0.0, vis).contradictory);
        }
    }

    #[test]
    fn claim_validation() {
        assert!(ExtensionClaim::new(0.6, 0.9, PI, 100).is_err());
        assert!(ExtensionClaim::new(-0.1, 0.9, PI, 100).is_err());
        assert!(ExtensionClaim::new(0.1, 1.1, PI, 100).is_err());
        let claim = ExtensionClaim::new(0.1, 0.9, PI, 1).unwrap();
        assert!(check_extension(&claim).is_err());
    }

    #[test]
    fn verdict_monotone_in_claimed_distance() {
        for vis in [0.9, 0.99, 0.999, 0.9999] {
            let mut seen_contradiction = false;
            for k in 0..=50 {
                let d = 0.01 * k as f64;
                let c = verdict(d, vis).contradictory;
                assert!(
                    !(seen_contradiction && !c),
                    "non-monotone at V={vis}, D={d}"
                );
                seen_contradiction |= c;
            }
        }
    }

    #[test]
    fn envelope_examples() {
        let env = admissible_envelope(1.0, PI, 2..=2).unwrap();
        assert!((env[0].1 - 1.5 * (2.0 - 2f64.sqrt())).abs() < 1e-12);
        let env = admissible_envelope(0.999, PI, 35..=35).unwrap();
        assert!((env[0].1 - 0.105).abs() < 1e-3);
        for (n, d) in admissible_envelope(0.0, PI, 2..=40).unwrap() {
            assert!((d - 1.5 * n as f64).abs() < 1e-12);
        }
        for (n, d) in admissible_envelope(0.97, PI, 2..=300).unwrap() {
            assert_eq!(
                d,
                1.5 * closed_form_i(&ChainedConfig::new(n, PI, 0.97).unwrap()).value
            );
            assert!((d - 1.5 * closed_form_i_at_pi(n, 0.97)).abs() < 1e-12);
        }
        assert!(admissible_envelope(0.9, PI, 1..=5).is_err());
    }

    #[test]
    fn empirical_mode_needs_clear_margin() {
        let mut report = closed_form_i(&ChainedConfig::new(35, PI, 0.999).unwrap());
        report.std_error = 0.01;
        // bound ≈ 0.105 with σ = 0.015: 0.15 is within 4σ, 0.25 is not.
        assert!(
            !check_extension_empirical(0.15, &report)
                .unwrap()
                .contradictory
        );
        assert!(
            check_extension_empirical(0.25, &report)
                .unwrap()
                .contradictory
        );
        assert!(check_extension_empirical(0.7, &report).is_err());
    }

    #[test]
    fn csv_row() {
        let mut buf = Vec::new();
        verdict(0.25, 0.999).write_csv_row(&mut buf).unwrap();
        let row = String::from_utf8(buf).unwrap();
        assert!(row.starts_with("0.25,0.999,35,0.0702074283"));
        assert!(row.trim_end().ends_with(",true"));
    }
}
