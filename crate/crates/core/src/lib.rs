//! Caloric expenditure estimation from skeleton motion, heart rate and
//! activity compendiums, with soft-label supervision targets and an
//! evaluation harness for known and unseen activity types.
//!
//! Module map:
//! - [`pose`]: skeleton sequences, body-region models, region centroids
//! - [`kinetics`]: region kinetic energy and hourly kcal conversion
//! - [`heartrate`]: Keytel heart-rate regression
//! - [`annotate`]: category and sample annotations
//! - [`softlabel`]: Gaussian soft labels, KL loss, decoding
//! - [`evalkit`]: MAE / Spearman / NLL, baselines, splits
//! - [`predictor`]: sliding windows, fusion, skeleton forward predictor
//! - [`cli`]: command implementations behind the `burnkit` binary

pub mod annotate;
pub mod cli;
pub mod evalkit;
pub mod heartrate;
pub mod kinetics;
pub mod pose;
pub mod predictor;
pub mod softlabel;
