//! Body-movement energy from region centroid motion and its hourly kcal form.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::pose::{region_centroids, BodyModel, PoseError, RegionTrajectory, SkeletonSequence, NUM_REGIONS};

/// Small calories per joule.
pub const CAL_PER_JOULE: f64 = 0.239;

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

/// How summed movement energy becomes kcal per hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConversionMode {
    /// Mean power over the clip times one hour: `E · λ/(F−1) · 3600 · cal/J / 1000`.
    #[default]
    Dimensional,
    /// The literal factor `E · cal/J · F · λ · 3600 / 1000`. Not dimensionally
    /// consistent; kept to reproduce published annotation magnitudes.
    PaperLiteral,
}

impl ConversionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConversionMode::Dimensional => "dimensional",
            ConversionMode::PaperLiteral => "paper-literal",
        }
    }
}

impl fmt::Display for ConversionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConversionMode {
    type Err = KineticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dimensional" => Ok(ConversionMode::Dimensional),
            "paper-literal" | "paper_literal" => Ok(ConversionMode::PaperLiteral),
            other => Err(KineticsError::InvalidParameter(format!("unknown conversion mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionConfig {
    pub mode: ConversionMode,
    pub cal_per_joule: f64,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        Self { mode: ConversionMode::Dimensional, cal_per_joule: CAL_PER_JOULE }
    }
}

impl ConversionConfig {
    pub fn with_mode(mode: ConversionMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEstimate {
    pub sample_id: String,
    pub activity: String,
    /// Summed kinetic energy over all frame transitions, in joules.
    pub raw_energy: f64,
    /// `(F − 1) / λ`.
    pub duration_s: f64,
    pub hourly_kcal: f64,
    pub mode: ConversionMode,
}

/// Summed kinetic energy of all regions over the `F − 1` frame transitions:
/// `Σ_t Σ_r ω_r λ² · ½ M_r (Δx² + Δy² + Δz²)`.
///
/// Per-transition energies are added in ascending order, so the total does not
/// depend on the order of the frames and a reversed clip gives the same bits.
pub fn body_energy(traj: &RegionTrajectory, model: &BodyModel) -> f64 {
    let lambda_sq = traj.fps() * traj.fps();
    let masses = model.masses();
    let weights = model.weights();
    let mut terms: Vec<f64> = (1..traj.frame_count())
        .map(|t| {
            (0..NUM_REGIONS)
                .map(|r| {
                    let d2: f64 = traj.displacement(t, r).iter().map(|d| d * d).sum();
                    weights[r] * lambda_sq * (0.5 * masses[r] * d2).abs()
                })
                .sum::<f64>()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

pub fn hourly_kcal(
    raw_energy: f64,
    frames: usize,
    fps: f64,
    config: &ConversionConfig,
) -> Result<f64, KineticsError> {
    if frames < 2 {
        return Err(KineticsError::InvalidParameter(format!("frame count must be >= 2, got {frames}")));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(KineticsError::InvalidParameter(format!("fps must be > 0, got {fps}")));
    }
    if !(raw_energy.is_finite() && raw_energy >= 0.0) {
        return Err(KineticsError::InvalidParameter(format!("raw energy must be >= 0, got {raw_energy}")));
    }
    if !(config.cal_per_joule.is_finite() && config.cal_per_joule > 0.0) {
        return Err(KineticsError::InvalidParameter("cal_per_joule must be > 0".into()));
    }
    let kcal = match config.mode {
        ConversionMode::Dimensional => {
            let duration_s = (frames - 1) as f64 / fps;
            raw_energy / duration_s * SECONDS_PER_HOUR * config.cal_per_joule / 1000.0
        }
        ConversionMode::PaperLiteral => {
            raw_energy * config.cal_per_joule * frames as f64 * fps * SECONDS_PER_HOUR / 1000.0
        }
    };
    Ok(kcal)
}

pub fn sequence_hourly_kcal(
    seq: &SkeletonSequence,
    model: &BodyModel,
    config: &ConversionConfig,
) -> Result<EnergyEstimate, KineticsError> {
    let traj = region_centroids(seq, model)?;
    let raw_energy = body_energy(&traj, model);
    let frames = seq.frame_count();
    Ok(EnergyEstimate {
        sample_id: seq.sample_id().to_string(),
        activity: seq.activity().to_string(),
        raw_energy,
        duration_s: (frames - 1) as f64 / seq.fps(),
        hourly_kcal: hourly_kcal(raw_energy, frames, seq.fps(), config)?,
        mode: config.mode,
    })
}

pub const ENERGY_REPORT_HEADER: &str = "sample_id,activity,raw_energy_j,duration_s,hourly_kcal,mode";

/// Energy report as columnar text, one row per estimate in input order.
pub fn energy_report(estimates: &[EnergyEstimate]) -> String {
    let mut out = String::from(ENERGY_REPORT_HEADER);
    out.push('\n');
    for e in estimates {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.sample_id, e.activity, e.raw_energy, e.duration_s, e.hourly_kcal, e.mode
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{synth_sequence, SynthParams};

    // joint 0 alone in region 0 with M = 1 kg and ω = 1; the other regions are static.
    fn constant_velocity_case() -> (SkeletonSequence, BodyModel) {
        let model = BodyModel::from_joint_map(&[0, 1, 2, 3, 4, 5, 6, 7])
            .unwrap()
            .with_masses([1.0; NUM_REGIONS])
            .unwrap()
            .with_weights([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
            .unwrap();
        let frames = (0..31).map(|t| vec![[t as f64 / 30.0, 0.0, 0.0]]).collect();
        (SkeletonSequence::new("cv", "a", 30.0, frames).unwrap(), model)
    }

    #[test]
    fn static_trajectory_has_zero_energy() {
        let seq = SkeletonSequence::new("s", "a", 30.0, vec![vec![[0.3, 0.1, 1.0]; 25]; 8]).unwrap();
        let est = sequence_hourly_kcal(&seq, &BodyModel::ntu25(), &ConversionConfig::default()).unwrap();
        assert_eq!(est.raw_energy, 0.0);
        assert_eq!(est.hourly_kcal, 0.0);
    }

    #[test]
    fn constant_velocity_is_fifteen_joules() {
        let (seq, model) = constant_velocity_case();
        let est = sequence_hourly_kcal(&seq, &model, &ConversionConfig::default()).unwrap();
        assert!((est.raw_energy - 15.0).abs() < 1e-9);
        assert!((est.duration_s - 1.0).abs() < 1e-12);
        assert!((est.hourly_kcal - 12.906).abs() < 1e-9);
    }

    #[test]
    fn conversion_modes() {
        let dim = ConversionConfig::default();
        let lit = ConversionConfig::with_mode(ConversionMode::PaperLiteral);
        assert_eq!(hourly_kcal(0.0, 31, 30.0, &dim).unwrap(), 0.0);
        assert_eq!(hourly_kcal(0.0, 31, 30.0, &lit).unwrap(), 0.0);
        assert!((hourly_kcal(15.0, 31, 30.0, &dim).unwrap() - 12.906).abs() < 1e-9);
        let literal = hourly_kcal(15.0, 31, 30.0, &lit).unwrap();
        assert!((literal - 12_002.58).abs() / 12_002.58 < 1e-12);
    }

    #[test]
    fn hourly_rejects_bad_parameters() {
        let c = ConversionConfig::default();
        assert!(hourly_kcal(1.0, 1, 30.0, &c).is_err());
        assert!(hourly_kcal(1.0, 10, 0.0, &c).is_err());
        assert!(hourly_kcal(-1.0, 10, 30.0, &c).is_err());
    }

    #[test]
    fn doubling_weights_doubles_energy() {
        let seq = synth_sequence(&SynthParams { amplitude: 0.2, freq: 1.0, fps: 30.0, frames: 40, joints: 17, seed: 3 }).unwrap();
        let model = BodyModel::coco17();
        let doubled = model.with_weights(model.weights().map(|w| 2.0 * w)).unwrap();
        let e1 = body_energy(&region_centroids(&seq, &model).unwrap(), &model);
        let e2 = body_energy(&region_centroids(&seq, &doubled).unwrap(), &doubled);
        assert!((e2 - 2.0 * e1).abs() <= 1e-12 * e2);
    }

    #[test]
    fn reversed_clip_has_identical_energy_bits() {
        let seq = synth_sequence(&SynthParams { amplitude: 0.3, freq: 1.7, fps: 25.0, frames: 73, joints: 25, seed: 8 }).unwrap();
        let model = BodyModel::ntu25();
        let e = body_energy(&region_centroids(&seq, &model).unwrap(), &model);
        let r = body_energy(&region_centroids(&seq.reversed(), &model).unwrap(), &model);
        assert_eq!(e.to_bits(), r.to_bits());
    }

    #[test]
    fn larger_amplitude_is_strictly_more_energetic() {
        let base = SynthParams { amplitude: 0.1, freq: 1.0, fps: 30.0, frames: 60, joints: 25, seed: 11 };
        let hi = SynthParams { amplitude: 0.2, ..base.clone() };
        let model = BodyModel::ntu25();
        let c = ConversionConfig::default();
        let lo = sequence_hourly_kcal(&synth_sequence(&base).unwrap(), &model, &c).unwrap();
        let hi = sequence_hourly_kcal(&synth_sequence(&hi).unwrap(), &model, &c).unwrap();
        assert!(hi.hourly_kcal > lo.hourly_kcal);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("paper-literal".parse::<ConversionMode>().unwrap(), ConversionMode::PaperLiteral);
        assert_eq!("dimensional".parse::<ConversionMode>().unwrap(), ConversionMode::Dimensional);
        assert!("kcal".parse::<ConversionMode>().is_err());
    }

    #[test]
    fn report_has_header_and_rows() {
        let (seq, model) = constant_velocity_case();
        let est = sequence_hourly_kcal(&seq, &model, &ConversionConfig::default()).unwrap();
        let text = energy_report(&[est]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(ENERGY_REPORT_HEADER));
        assert!(lines.next().unwrap().starts_with("cv,a,15"));
    }
}
