//! Estimating the prevalence of deceptive opinion spam from an imperfect
//! text classifier.
//!
//! The pipeline: train a linear classifier on gold-labelled reviews
//! ([`textmodel`]), measure its error rates ([`calibration`]), then correct
//! its positive rate on unlabelled reviews either in closed form ([`naive`])
//! or with a collapsed Gibbs sampler over latent labels ([`bayes`]).

pub mod bayes;
pub mod calibration;
pub mod corpus;
pub mod error;
pub mod naive;
pub mod plot;
pub mod study;
pub mod synthetic;
pub mod textmodel;

pub use bayes::{BetaPair, GibbsConfig, PosteriorSummary, Priors};
pub use calibration::{CalibrationResult, ConfusionCounts};
pub use corpus::{Corpus, Label, Review};
pub use error::{Error, Result};
pub use naive::{naive_estimate, NaiveEstimate};
pub use textmodel::{LinearModel, TrainOptions};
