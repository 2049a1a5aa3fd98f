//! Classifier sensitivity/specificity estimation and the Beta pseudo-count
//! priors derived from the raw confusion counts.
//!
//! Sensitivity comes from leave-one-hotel-out predictions on the
//! gold-deceptive training reviews. Specificity comes from a model trained on
//! the whole training set, applied to a development sample that is assumed to
//! be entirely truthful.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayes::BetaPair;
use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::textmodel::{self, LinearModel, TrainOptions};

pub const DEV_ASSUMED_TRUTHFUL: &str =
    "development reviews are unlabeled and assumed truthful; specificity may be underestimated";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn_dev: u64,
    pub fp_dev: u64,
}

/// `beta = <fn + 1, tp + 1>`, `gamma = <fp_dev + 1, tn_dev + 1>`.
///
/// Index 0 of `beta` carries the classifier-output-0 (false negative) mass and
/// index 1 the output-1 (true positive) mass; for `gamma`, index 0 is output 1
/// (false positive) and index 1 output 0 (true negative).
pub fn hyperparams(counts: &ConfusionCounts) -> (BetaPair, BetaPair) {
    let beta = BetaPair::new(counts.fn_ as f64 + 1.0, counts.tp as f64 + 1.0);
    let gamma = BetaPair::new(counts.fp_dev as f64 + 1.0, counts.tn_dev as f64 + 1.0);
    (beta, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub eta: f64,
    pub theta: f64,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub beta: BetaPair,
    pub gamma: BetaPair,
    #[serde(default)]
    pub assumptions: Vec<String>,
}

impl CalibrationResult {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self> {
        let eta = ratio(counts.tp, counts.fn_).ok_or_else(|| {
            Error::invalid("sensitivity undefined: no gold-deceptive reviews were classified")
        })?;
        let theta = ratio(counts.tn_dev, counts.fp_dev)
            .ok_or_else(|| Error::invalid("specificity undefined: empty development set"))?;
        let (beta, gamma) = hyperparams(&counts);
        Ok(CalibrationResult {
            eta,
            theta,
            counts,
            beta,
            gamma,
            assumptions: vec![DEV_ASSUMED_TRUTHFUL.to_string()],
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cal: CalibrationResult = serde_json::from_str(&s)?;
        if !(0.0..=1.0).contains(&cal.eta) || !(0.0..=1.0).contains(&cal.theta) {
            return Err(Error::invalid("eta and theta must lie in [0, 1]"));
        }
        Ok(cal)
    }
}

fn ratio(hit: u64, miss: u64) -> Option<f64> {
    let d = hit + miss;
    (d > 0).then(|| hit as f64 / d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub eta: f64,
    pub tp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Specificity {
    pub theta: f64,
    pub tn_dev: u64,
    pub fp_dev: u64,
}

/// Recall on gold-deceptive reviews; predictions on truthful reviews are
/// ignored.
pub fn sensitivity_from_predictions(gold: &[Label], predicted: &[Label]) -> Result<Sensitivity> {
    if gold.len() != predicted.len() {
        return Err(Error::invalid("gold and predicted label counts differ"));
    }
    let (tp, fn_) = gold
        .iter()
        .zip(predicted)
        .filter(|(g, _)| g.is_deceptive())
        .fold((0u64, 0u64), |(tp, fn_), (_, p)| {
            if p.is_deceptive() {
                (tp + 1, fn_)
            } else {
                (tp, fn_ + 1)
            }
        });
    let eta = ratio(tp, fn_).ok_or_else(|| Error::invalid("no gold-deceptive reviews"))?;
    Ok(Sensitivity { eta, tp, fn_ })
}

/// Every prediction is scored against an assumed truthful label.
pub fn specificity_from_predictions(predicted: &[Label]) -> Result<Specificity> {
    let fp_dev = predicted.iter().filter(|p| p.is_deceptive()).count() as u64;
    let tn_dev = predicted.len() as u64 - fp_dev;
    let theta = ratio(tn_dev, fp_dev).ok_or_else(|| Error::invalid("empty development set"))?;
    Ok(Specificity {
        theta,
        tn_dev,
        fp_dev,
    })
}

/// Leave-one-hotel-out sensitivity of a classifier trained with cost `c`.
pub fn estimate_sensitivity(train: &Corpus, c: f64) -> Result<Sensitivity> {
    estimate_sensitivity_with(train, c, &TrainOptions::default())
}

pub fn estimate_sensitivity_with(
    train: &Corpus,
    c: f64,
    opts: &TrainOptions,
) -> Result<Sensitivity> {
    let gold = train.labels()?;
    if !gold.iter().any(|l| l.is_deceptive()) {
        return Err(Error::invalid("training corpus has no deceptive reviews"));
    }
    let groups = train.group_by_hotel();
    let predicted =
        textmodel::cross_val_predict_by_group_observed(train, &groups, c, opts, |_| {})?;
    sensitivity_from_predictions(&gold, &predicted)
}

pub fn estimate_specificity(model: &LinearModel, dev: &Corpus) -> Result<Specificity> {
    if dev.is_empty() {
        return Err(Error::invalid("empty development set"));
    }
    specificity_from_predictions(&model.predict_corpus(dev))
}

/// Full procedure: grouped CV for sensitivity, `model` (trained on all of
/// `train`) on `dev` for specificity, then the pseudo-count priors.
pub fn calibrate(
    train: &Corpus,
    dev: &Corpus,
    model: &LinearModel,
    opts: &TrainOptions,
) -> Result<CalibrationResult> {
    let sens = estimate_sensitivity_with(train, model.cost_c, opts)?;
    let spec = estimate_specificity(model, dev)?;
    CalibrationResult::from_counts(ConfusionCounts {
        tp: sens.tp,
        fn_: sens.fn_,
        tn_dev: spec.tn_dev,
        fp_dev: spec.fp_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Deceptive as D, Truthful as T};

    #[test]
    fn constant_classifiers() {
        let gold = [D, D, T, D];
        let s = sensitivity_from_predictions(&gold, &[D; 4]).unwrap();
        assert_eq!((s.eta, s.tp, s.fn_), (1.0, 3, 0));
        let s = sensitivity_from_predictions(&gold, &[T; 4]).unwrap();
        assert_eq!((s.eta, s.tp, s.fn_), (0.0, 0, 3));
        assert!(sensitivity_from_predictions(&[T, T], &[D, D]).is_err());

        assert_eq!(specificity_from_predictions(&[T; 7]).unwrap().theta, 1.0);
        assert_eq!(specificity_from_predictions(&[D]).unwrap().theta, 0.0);
        assert!(specificity_from_predictions(&[]).is_err());
    }

    #[test]
    fn realistic_scale_arithmetic() {
        let mut gold = vec![D; 400];
        gold.extend([T; 10]);
        let mut pred = vec![D; 361];
        pred.extend([T; 39]);
        pred.extend([D; 10]);
        let s = sensitivity_from_predictions(&gold, &pred).unwrap();
        assert_eq!((s.tp, s.fn_), (361, 39));
        assert!((s.eta - 0.9025).abs() < 1e-15);

        let mut dev = vec![T; 356];
        dev.extend([D; 44]);
        let sp = specificity_from_predictions(&dev).unwrap();
        assert_eq!((sp.tn_dev, sp.fp_dev), (356, 44));
        assert!((sp.theta - 0.89).abs() < 1e-15);
    }

    #[test]
    fn pseudo_counts() {
        let (b, g) = hyperparams(&ConfusionCounts {
            tp: 36,
            fn_: 4,
            tn_dev: 36,
            fp_dev: 4,
        });
        assert_eq!(b.0, [5.0, 37.0]);
        assert_eq!(g.0, [5.0, 37.0]);
        let (b, g) = hyperparams(&ConfusionCounts {
            tp: 0,
            fn_: 0,
            tn_dev: 0,
            fp_dev: 0,
        });
        assert_eq!((b.0, g.0), ([1.0, 1.0], [1.0, 1.0]));
    }

    #[test]
    fn prior_means_are_smoothed_rates() {
        for (tp, fn_, tn, fp) in [(361, 39, 356, 44), (0, 5, 3, 0), (7, 0, 0, 9)] {
            let counts = ConfusionCounts {
                tp,
                fn_,
                tn_dev: tn,
                fp_dev: fp,
            };
            let (b, g) = hyperparams(&counts);
            let smoothed_sens = (tp as f64 + 1.0) / ((tp + fn_) as f64 + 2.0);
            let smoothed_spec = (tn as f64 + 1.0) / ((tn + fp) as f64 + 2.0);
            assert!((b.mean1() - smoothed_sens).abs() < 1e-15);
            assert!((g.mean1() - smoothed_spec).abs() < 1e-15);
        }
    }

    #[test]
    fn json_layout() {
        let cal = CalibrationResult::from_counts(ConfusionCounts {
            tp: 36,
            fn_: 4,
            tn_dev: 30,
            fp_dev: 10,
        })
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&cal.to_json().unwrap()).unwrap();
        for key in [
            "eta",
            "theta",
            "tp",
            "fn",
            "tn_dev",
            "fp_dev",
            "beta",
            "gamma",
            "assumptions",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["beta"], serde_json::json!([5.0, 37.0]));
        assert_eq!(v["gamma"], serde_json::json!([11.0, 31.0]));
        assert_eq!(v["theta"], serde_json::json!(0.75));
        let back: CalibrationResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, cal);
    }

    #[test]
    fn empty_counts_rejected() {
        let err = CalibrationResult::from_counts(ConfusionCounts {
            tp: 1,
            fn_: 0,
            tn_dev: 0,
            fp_dev: 0,
        });
        assert!(err.is_err());
    }
}
