//! Discretized calorie targets: Gaussian soft labels over 1-kcal bins, KL
//! supervision, and scalar decoding.

use thiserror::Error;

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Allowed deviation of a distribution's total mass from 1.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoftLabelError {
    #[error("label {label} outside [0, {max}]")]
    OutOfRangeLabel { label: f64, max: f64 },
    #[error("distribution shapes differ: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("invalid codec: {0}")]
    InvalidCodec(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftLabelCodec {
    pub n_bins: usize,
    /// kcal per bin.
    pub resolution: f64,
    /// Gaussian standard deviation in kcal.
    pub sigma: f64,
}

impl SoftLabelCodec {
    pub fn new(n_bins: usize, resolution: f64, sigma: f64) -> Result<Self, SoftLabelError> {
        if n_bins < 2 {
            return Err(SoftLabelError::InvalidCodec(format!("need at least 2 bins, got {n_bins}")));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(SoftLabelError::InvalidCodec(format!("resolution must be > 0, got {resolution}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(SoftLabelError::InvalidCodec(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { n_bins, resolution, sigma })
    }

    /// 1000 bins of 1 kcal, σ = 5.
    pub fn diverse() -> Self {
        Self { n_bins: 1000, resolution: 1.0, sigma: 5.0 }
    }

    /// 500 bins of 1 kcal, σ = 5.
    pub fn adl() -> Self {
        Self { n_bins: 500, resolution: 1.0, sigma: 5.0 }
    }

    pub fn with_sigma(self, sigma: f64) -> Result<Self, SoftLabelError> {
        Self::new(self.n_bins, self.resolution, sigma)
    }

    pub fn max_label(&self) -> f64 {
        self.n_bins as f64 * self.resolution
    }

    pub fn bin_value(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    /// Nearest bin to `label`; the upper edge `n_bins·resolution` maps to the last bin.
    pub fn bin_of(&self, label: f64) -> Result<usize, SoftLabelError> {
        self.check_label(label)?;
        Ok(((label / self.resolution).round() as usize).min(self.n_bins - 1))
    }

    fn check_label(&self, label: f64) -> Result<(), SoftLabelError> {
        if !(label.is_finite() && label >= 0.0 && label <= self.max_label()) {
            return Err(SoftLabelError::OutOfRangeLabel { label, max: self.max_label() });
        }
        Ok(())
    }
}

/// A normalized distribution over calorie bins.
#[derive(Debug, Clone, PartialEq)]
pub struct CalorieDistribution {
    probs: Vec<f64>,
}

impl CalorieDistribution {
    /// Accepts `probs` as-is if it is a valid distribution (finite,
    /// non-negative, total mass within [`NORM_TOLERANCE`] of 1).
    pub fn new(probs: Vec<f64>) -> Result<Self, SoftLabelError> {
        if probs.is_empty() {
            return Err(SoftLabelError::InvalidDistribution("no bins".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SoftLabelError::InvalidDistribution("entries must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(SoftLabelError::InvalidDistribution(format!("mass {total} is not 1")));
        }
        Ok(Self { probs })
    }

    /// Rescales non-negative weights to unit mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, SoftLabelError> {
        if weights.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SoftLabelError::InvalidDistribution("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(SoftLabelError::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self { probs: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn delta(n_bins: usize, bin: usize) -> Result<Self, SoftLabelError> {
        if bin >= n_bins {
            return Err(SoftLabelError::InvalidDistribution(format!("bin {bin} >= {n_bins}")));
        }
        let mut probs = vec![0.0; n_bins];
        probs[bin] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(n_bins: usize) -> Result<Self, SoftLabelError> {
        if n_bins == 0 {
            return Err(SoftLabelError::InvalidDistribution("no bins".into()));
        }
        Ok(Self { probs: vec![1.0 / n_bins as f64; n_bins] })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
    }
}

/// Gaussian soft label centred on `label`, renormalized over the bins.
pub fn encode(label: f64, codec: &SoftLabelCodec) -> Result<CalorieDistribution, SoftLabelError> {
    codec.check_label(label)?;
    let denom = 2.0 * codec.sigma * codec.sigma;
    let exponents: Vec<f64> = (0..codec.n_bins)
        .map(|n| {
            let d = codec.bin_value(n) - label;
            -d * d / denom
        })
        .collect();
    // Shift by the largest exponent so the nearest bin evaluates to exp(0).
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CalorieDistribution::from_weights(exponents.into_iter().map(|x| (x - top).exp()).collect())
}

/// `KL(l_s ‖ y) = Σ l_s[n] (ln l_s[n] − ln y[n])`, both sides floored at
/// [`PROB_FLOOR`] inside the logarithm. Bins with `l_s[n] = 0` contribute nothing.
pub fn kl_loss(y: &CalorieDistribution, l_s: &CalorieDistribution) -> Result<f64, SoftLabelError> {
    if y.len() != l_s.len() {
        return Err(SoftLabelError::ShapeMismatch(y.len(), l_s.len()));
    }
    let total: f64 = l_s
        .probs
        .iter()
        .zip(&y.probs)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &p)| t * (t.max(PROB_FLOOR).ln() - p.max(PROB_FLOOR).ln()))
        .sum();
    // Gibbs' inequality; only rounding can push the sum below zero.
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    #[default]
    Expectation,
    Argmax,
}

pub fn decode(dist: &CalorieDistribution, codec: &SoftLabelCodec) -> f64 {
    decode_with(dist, codec, DecodeMode::Expectation)
}

pub fn decode_with(dist: &CalorieDistribution, codec: &SoftLabelCodec, mode: DecodeMode) -> f64 {
    match mode {
        DecodeMode::Expectation => dist
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| p * codec.bin_value(n))
            .sum(),
        DecodeMode::Argmax => codec.bin_value(dist.argmax()),
    }
}

pub const DUMP_HEADER: &str = "bin,prob";

/// Debug dump of one distribution as `bin,prob` rows.
pub fn dump(dist: &CalorieDistribution) -> String {
    let mut out = String::from(DUMP_HEADER);
    out.push('\n');
    for (n, p) in dist.probs.iter().enumerate() {
        out.push_str(&format!("{n},{p}\n"));
    }
    out
}
