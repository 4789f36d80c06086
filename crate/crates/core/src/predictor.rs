//! Predictor interface, overlapping sliding windows and average fusion.

use std::ops::Range;

use thiserror::Error;

use crate::evalkit::AverageBaseline;
use crate::kinetics::{sequence_hourly_kcal, ConversionConfig, KineticsError};
use crate::pose::{BodyModel, PoseError, SkeletonSequence};
use crate::softlabel::{CalorieDistribution, SoftLabelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("window outputs are not all of the same kind and shape")]
    HeterogeneousOutputs,
    #[error("no window outputs to fuse")]
    NoOutputs,
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    SoftLabel(#[from] SoftLabelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub window_len: usize,
    pub overlap: usize,
}

impl WindowSpec {
    pub fn new(window_len: usize, overlap: usize) -> Result<Self, PredictError> {
        let spec = Self { window_len, overlap };
        spec.validate()?;
        Ok(spec)
    }

    /// 16-frame clips overlapping by 6.
    pub fn short_clip() -> Self {
        Self { window_len: 16, overlap: 6 }
    }

    /// 32-frame clips overlapping by 16.
    pub fn long_clip() -> Self {
        Self { window_len: 32, overlap: 16 }
    }

    pub fn stride(&self) -> usize {
        self.window_len - self.overlap
    }

    fn validate(&self) -> Result<(), PredictError> {
        if self.window_len < 2 || self.overlap >= self.window_len {
            return Err(PredictError::InvalidSpec(format!(
                "need window_len >= 2 and overlap < window_len, got {} / {}",
                self.window_len, self.overlap
            )));
        }
        Ok(())
    }
}

/// Frame ranges of the windows over a clip of `frames` frames.
///
/// Windows start at `0, stride, 2·stride, …` while they fit. If the last fitted
/// window stops short of the end, one more window is anchored to end at
/// `frames`. A clip shorter than the window is a single window.
pub fn window_ranges(frames: usize, spec: &WindowSpec) -> Result<Vec<Range<usize>>, PredictError> {
    spec.validate()?;
    if frames < 2 {
        return Err(PredictError::InvalidSpec(format!("need at least 2 frames, got {frames}")));
    }
    if frames <= spec.window_len {
        return Ok(std::iter::once(0..frames).collect());
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + spec.window_len <= frames {
        out.push(start..start + spec.window_len);
        start += spec.stride();
    }
    if out.last().is_some_and(|r| r.end < frames) {
        out.push(frames - spec.window_len..frames);
    }
    Ok(out)
}

pub fn sliding_windows(seq: &SkeletonSequence, spec: &WindowSpec) -> Result<Vec<SkeletonSequence>, PredictError> {
    window_ranges(seq.frame_count(), spec)?
        .into_iter()
        .map(|r| seq.slice_frames(r.start, r.end).map_err(PredictError::from))
        .collect()
}

/// What a predictor emits for one window.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutput {
    Scalar(f64),
    Distribution(CalorieDistribution),
}

/// Averages window outputs in window order.
///
/// Distributions are averaged bin-wise and renormalized; scalars are averaged.
/// The mean is accumulated as offsets from the first output, so fusing
/// identical outputs returns them unchanged. Mixed kinds or differing bin
/// counts fail with `HeterogeneousOutputs`.
pub fn fuse_average(outputs: &[WindowOutput]) -> Result<WindowOutput, PredictError> {
    let first = outputs.first().ok_or(PredictError::NoOutputs)?;
    let k = outputs.len() as f64;
    match first {
        WindowOutput::Scalar(v0) => {
            let mut offset = 0.0;
            for o in outputs {
                match o {
                    WindowOutput::Scalar(v) => offset += v - v0,
                    WindowOutput::Distribution(_) => return Err(PredictError::HeterogeneousOutputs),
                }
            }
            Ok(WindowOutput::Scalar(v0 + offset / k))
        }
        WindowOutput::Distribution(d0) => {
            let mut offset = vec![0.0; d0.len()];
            for o in outputs {
                match o {
                    WindowOutput::Distribution(d) if d.len() == offset.len() => {
                        for ((a, p), p0) in offset.iter_mut().zip(d.probs()).zip(d0.probs()) {
                            *a += p - p0;
                        }
                    }
                    _ => return Err(PredictError::HeterogeneousOutputs),
                }
            }
            Ok(WindowOutput::Distribution(CalorieDistribution::from_weights(
                offset.iter().zip(d0.probs()).map(|(a, p0)| (p0 + a / k).max(0.0)).collect(),
            )?))
        }
    }
}

/// Anything that maps a skeleton clip to a calorie estimate.
pub trait CaloriePredictor {
    fn predict(&self, clip: &SkeletonSequence) -> Result<WindowOutput, PredictError>;
}

/// Runs `predictor` on every window of `seq` and fuses by averaging.
pub fn predict_windowed<P: CaloriePredictor + ?Sized>(
    predictor: &P,
    seq: &SkeletonSequence,
    spec: &WindowSpec,
) -> Result<WindowOutput, PredictError> {
    let outputs = sliding_windows(seq, spec)?
        .iter()
        .map(|w| predictor.predict(w))
        .collect::<Result<Vec<_>, _>>()?;
    fuse_average(&outputs)
}

/// Non-learned predictor: the movement-energy estimate itself.
#[derive(Debug, Clone)]
pub struct SkeletonForwardPredictor {
    pub model: BodyModel,
    pub conversion: ConversionConfig,
}

impl CaloriePredictor for SkeletonForwardPredictor {
    fn predict(&self, clip: &SkeletonSequence) -> Result<WindowOutput, PredictError> {
        skeleton_forward_predictor(clip, &self.model, &self.conversion).map(WindowOutput::Scalar)
    }
}

/// Hourly kcal of the whole sequence from its movement energy.
pub fn skeleton_forward_predictor(
    seq: &SkeletonSequence,
    model: &BodyModel,
    conv: &ConversionConfig,
) -> Result<f64, PredictError> {
    Ok(sequence_hourly_kcal(seq, model, conv)?.hourly_kcal)
}

impl CaloriePredictor for AverageBaseline {
    fn predict(&self, _clip: &SkeletonSequence) -> Result<WindowOutput, PredictError> {
        Ok(WindowOutput::Scalar(self.mean))
    }
}

pub const SCALAR_PREDICTION_HEADER: &str = "sample_id,kcal_per_hour";
pub const DISTRIBUTION_PREDICTION_HEADER: &str = "sample_id,bin,prob";
