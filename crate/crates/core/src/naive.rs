//! Closed-form correction of the classifier's positive-prediction rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominators smaller than this are treated as exactly zero.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;
/// Denominators smaller than this are reported as near-degenerate.
pub const WARN_DENOMINATOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeFlag {
    InRange,
    /// `pi_f < 1 - theta`
    Negative,
    /// `pi_f > eta`
    AboveOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveEstimate {
    /// Not clamped; may fall outside [0, 1].
    pub pi_naive: f64,
    pub pi_f: f64,
    pub eta: f64,
    pub theta: f64,
    pub range: RangeFlag,
    pub near_degenerate: bool,
}

impl NaiveEstimate {
    pub fn out_of_range(&self) -> bool {
        self.range != RangeFlag::InRange
    }
}

/// Fraction of positive (deceptive) predictions.
pub fn positive_rate(predictions: &[bool]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::invalid("positive rate of an empty prediction list"));
    }
    let pos = predictions.iter().filter(|&&p| p).count();
    Ok(pos as f64 / predictions.len() as f64)
}

/// `(pi_f - (1 - theta)) / (eta - (1 - theta))`.
pub fn naive_estimate(pi_f: f64, eta: f64, theta: f64) -> Result<NaiveEstimate> {
    for (name, v) in [("pi_f", pi_f), ("eta", eta), ("theta", theta)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "{name} must lie in [0, 1], got {v}"
            )));
        }
    }
    let false_positive_rate = 1.0 - theta;
    let denom = eta - false_positive_rate;
    if denom.abs() < DEGENERATE_DENOMINATOR {
        return Err(Error::UninformativeClassifier);
    }
    let pi_naive = (pi_f - false_positive_rate) / denom;
    let range = if pi_naive < 0.0 {
        RangeFlag::Negative
    } else if pi_naive > 1.0 {
        RangeFlag::AboveOne
    } else {
        RangeFlag::InRange
    };
    Ok(NaiveEstimate {
        pi_naive,
        pi_f,
        eta,
        theta,
        range,
        near_degenerate: denom.abs() < WARN_DENOMINATOR,
    })
}

/// Expected positive rate under true prevalence `pi`:
/// `eta * pi + (1 - theta) * (1 - pi)`.
pub fn expected_positive_rate(pi: f64, eta: f64, theta: f64) -> f64 {
    eta * pi + (1.0 - theta) * (1.0 - pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_rates() {
        assert_eq!(positive_rate(&[true, false, false, true]).unwrap(), 0.5);
        assert_eq!(positive_rate(&[false; 3]).unwrap(), 0.0);
        assert_eq!(positive_rate(&[true; 3]).unwrap(), 1.0);
        assert!(positive_rate(&[]).is_err());
    }

    #[test]
    fn oracle_classifier_is_identity() {
        let e = naive_estimate(0.3, 1.0, 1.0).unwrap();
        assert_eq!(e.pi_naive, 0.3);
        assert!(!e.out_of_range());
    }

    #[test]
    fn worked_examples() {
        let e = naive_estimate(0.15, 0.903, 0.890).unwrap();
        assert!((e.pi_naive - 0.04 / 0.793).abs() < 1e-12);
        assert!((e.pi_naive - 0.05044).abs() < 1e-5);

        let e = naive_estimate(0.05, 0.903, 0.890).unwrap();
        assert!((e.pi_naive - (-0.06 / 0.793)).abs() < 1e-12);
        assert!((e.pi_naive + 0.0757).abs() < 1e-4);
        assert_eq!(e.range, RangeFlag::Negative);
    }

    #[test]
    fn above_one_flagged() {
        let e = naive_estimate(0.95, 0.9, 0.9).unwrap();
        assert_eq!(e.range, RangeFlag::AboveOne);
    }

    #[test]
    fn uninformative_is_error() {
        assert!(matches!(
            naive_estimate(0.4, 0.3, 0.7),
            Err(Error::UninformativeClassifier)
        ));
        assert!(matches!(
            naive_estimate(0.4, 0.5, 0.5),
            Err(Error::UninformativeClassifier)
        ));
        let e = naive_estimate(0.4, 0.5 + 5e-7, 0.5).unwrap();
        assert!(e.near_degenerate);
    }

    #[test]
    fn strictly_increasing_in_pi_f() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&p| naive_estimate(p, 0.8, 0.7).unwrap().pi_naive)
            .collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }
}
