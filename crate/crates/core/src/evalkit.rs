//! Metrics (MAE, Spearman ×100, NLL), reference baselines, and the
//! known/new activity split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::softlabel::{CalorieDistribution, SoftLabelCodec, SoftLabelError, PROB_FLOOR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions vs {1} ground truths")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    SoftLabel(#[from] SoftLabelError),
    #[error("invalid range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("held-out activity {0:?} has no samples")]
    UnknownHeldoutActivity(String),
    #[error("sample {0:?} has an empty activity label")]
    EmptyActivity(String),
    #[error("sample {0:?} appears more than once")]
    DuplicateSample(String),
    #[error("invalid split ratio {0}:{1}")]
    InvalidRatio(u32, u32),
    #[error("line {line}: malformed manifest: {reason}")]
    MalformedManifest { line: usize, reason: String },
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

fn check_pair(preds: &[f64], gts: &[f64]) -> Result<(), EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::LengthMismatch(preds.len(), gts.len()));
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        if !p.is_finite() || !g.is_finite() {
            return Err(EvalError::NonFinite(i));
        }
    }
    Ok(())
}

/// Mean absolute error in kcal/hour.
pub fn mae(preds: &[f64], gts: &[f64]) -> Result<f64, EvalError> {
    check_pair(preds, gts)?;
    Ok(preds.iter().zip(gts).map(|(p, g)| (p - g).abs()).sum::<f64>() / preds.len() as f64)
}

/// Spearman correlation in percent, or `Undefined` when either side is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spc {
    Value(f64),
    Undefined,
}

impl Spc {
    pub fn value(self) -> Option<f64> {
        match self {
            Spc::Value(v) => Some(v),
            Spc::Undefined => None,
        }
    }
}

impl fmt::Display for Spc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spc::Value(v) => write!(f, "{v:.4}"),
            Spc::Undefined => f.write_str("NA"),
        }
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks, times 100.
pub fn spearman_pct(preds: &[f64], gts: &[f64]) -> Result<Spc, EvalError> {
    check_pair(preds, gts)?;
    if preds.len() < 2 {
        return Err(EvalError::TooFewSamples(preds.len()));
    }
    let rp = average_ranks(preds);
    let rg = average_ranks(gts);
    let mean = (preds.len() as f64 + 1.0) / 2.0;
    let (mut cov, mut vp, mut vg) = (0.0, 0.0, 0.0);
    for (a, b) in rp.iter().zip(&rg) {
        let (da, db) = (a - mean, b - mean);
        cov += da * db;
        vp += da * da;
        vg += db * db;
    }
    if vp == 0.0 || vg == 0.0 {
        return Ok(Spc::Undefined);
    }
    Ok(Spc::Value(100.0 * (cov / (vp.sqrt() * vg.sqrt())).clamp(-1.0, 1.0)))
}

/// Mean negative log-probability of each ground truth's bin.
pub fn nll(dists: &[CalorieDistribution], gts: &[f64], codec: &SoftLabelCodec) -> Result<f64, EvalError> {
    if dists.len() != gts.len() {
        return Err(EvalError::LengthMismatch(dists.len(), gts.len()));
    }
    if dists.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut total = 0.0;
    for (d, &g) in dists.iter().zip(gts) {
        if d.len() != codec.n_bins {
            return Err(SoftLabelError::ShapeMismatch(d.len(), codec.n_bins).into());
        }
        let bin = codec.bin_of(g)?;
        total -= d.probs()[bin].max(PROB_FLOOR).ln();
    }
    Ok(total / dists.len() as f64)
}

/// Predicts the training-set mean for every input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageBaseline {
    pub mean: f64,
}

impl AverageBaseline {
    pub fn predict(&self) -> f64 {
        self.mean
    }
}

pub fn baseline_average(train_gts: &[f64]) -> Result<AverageBaseline, EvalError> {
    if train_gts.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(i) = train_gts.iter().position(|g| !g.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    Ok(AverageBaseline { mean: train_gts.iter().sum::<f64>() / train_gts.len() as f64 })
}

/// Uniform draws on `[lo, hi]` from a ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct RandomBaseline {
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
}

impl RandomBaseline {
    pub fn predict(&mut self) -> f64 {
        self.rng.gen_range(self.lo..=self.hi)
    }

    pub fn predictions(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.predict()).collect()
    }
}

pub fn baseline_random(seed: u64, lo: f64, hi: f64) -> Result<RandomBaseline, EvalError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(EvalError::InvalidRange { lo, hi });
    }
    Ok(RandomBaseline { rng: ChaCha8Rng::seed_from_u64(seed), lo, hi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub split_name: String,
    pub n_samples: usize,
    pub mae: f64,
    pub spc: Spc,
    /// Only defined for distributional predictions.
    pub nll: Option<f64>,
}

pub const REPORT_HEADER: &str = "split,n,mae,spc,nll";

impl EvalReport {
    pub fn from_scalars(split_name: impl Into<String>, preds: &[f64], gts: &[f64]) -> Result<Self, EvalError> {
        let mae = mae(preds, gts)?;
        let spc = if preds.len() >= 2 { spearman_pct(preds, gts)? } else { Spc::Undefined };
        Ok(Self { split_name: split_name.into(), n_samples: preds.len(), mae, spc, nll: None })
    }

    pub fn row(&self) -> String {
        let nll = self.nll.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
        format!("{},{},{:.4},{},{}", self.split_name, self.n_samples, self.mae, self.spc, nll)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SplitKind {
    Train,
    TestKnown,
    TestNew,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::TestKnown => "test_known",
            SplitKind::TestNew => "test_new",
        }
    }
}

impl std::str::FromStr for SplitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitKind::Train),
            "test_known" => Ok(SplitKind::TestKnown),
            "test_new" => Ok(SplitKind::TestNew),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Train / known-activity test / new-activity test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub train: BTreeSet<String>,
    pub test_known: BTreeSet<String>,
    pub test_new: BTreeSet<String>,
    pub heldout_activities: BTreeSet<String>,
    pub seed: u64,
    pub ratio: (u32, u32),
    // (sample_id, split) in input order
    assignments: Vec<(String, SplitKind)>,
}

impl SplitManifest {
    pub fn assignments(&self) -> &[(String, SplitKind)] {
        &self.assignments
    }

    pub fn split_of(&self, sample_id: &str) -> Option<SplitKind> {
        if self.train.contains(sample_id) {
            Some(SplitKind::Train)
        } else if self.test_known.contains(sample_id) {
            Some(SplitKind::TestKnown)
        } else if self.test_new.contains(sample_id) {
            Some(SplitKind::TestNew)
        } else {
            None
        }
    }

    pub fn ids(&self, kind: SplitKind) -> &BTreeSet<String> {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::TestKnown => &self.test_known,
            SplitKind::TestNew => &self.test_new,
        }
    }

    /// Manifest text: a `#` header carrying seed, ratio and held-out
    /// activities, then `sample_id,split` rows in input order.
    pub fn to_text(&self) -> String {
        let heldout: Vec<&str> = self.heldout_activities.iter().map(String::as_str).collect();
        let mut s = format!(
            "# seed={} ratio={}:{} heldout={}\nsample_id,split\n",
            self.seed,
            self.ratio.0,
            self.ratio.1,
            heldout.join(",")
        );
        for (id, kind) in &self.assignments {
            s.push_str(&format!("{id},{}\n", kind.as_str()));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let bad = |line: usize, reason: String| EvalError::MalformedManifest { line, reason };
        let mut seed = None;
        let mut ratio = None;
        let mut heldout = BTreeSet::new();
        let mut saw_header = false;
        let mut manifest = SplitManifest {
            train: BTreeSet::new(),
            test_known: BTreeSet::new(),
            test_new: BTreeSet::new(),
            heldout_activities: BTreeSet::new(),
            seed: 0,
            ratio: (7, 3),
            assignments: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            if let Some(comment) = row.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    match field.split_once('=') {
                        Some(("seed", v)) => seed = Some(v.parse::<u64>().map_err(|e| bad(line, e.to_string()))?),
                        Some(("ratio", v)) => ratio = Some(parse_ratio(v).map_err(|e| bad(line, e.to_string()))?),
                        Some(("heldout", v)) => {
                            heldout = v.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect()
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if row != "sample_id,split" {
                    return Err(bad(line, "expected header sample_id,split".into()));
                }
                saw_header = true;
                continue;
            }
            let (id, split) = row.split_once(',').ok_or_else(|| bad(line, "expected 2 columns".into()))?;
            let kind: SplitKind = split.trim().parse().map_err(|e| bad(line, e))?;
            let id = id.trim().to_string();
            if manifest.split_of(&id).is_some() {
                return Err(EvalError::DuplicateSample(id));
            }
            match kind {
                SplitKind::Train => manifest.train.insert(id.clone()),
                SplitKind::TestKnown => manifest.test_known.insert(id.clone()),
                SplitKind::TestNew => manifest.test_new.insert(id.clone()),
            };
            manifest.assignments.push((id, kind));
        }
        manifest.seed = seed.ok_or_else(|| bad(1, "missing seed in header comment".into()))?;
        manifest.ratio = ratio.unwrap_or((7, 3));
        manifest.heldout_activities = heldout;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }
}

/// Parses `a:b`, e.g. `7:3`.
pub fn parse_ratio(s: &str) -> Result<(u32, u32), EvalError> {
    let (a, b) = s.split_once(':').ok_or(EvalError::InvalidRatio(0, 0))?;
    let a: u32 = a.trim().parse().map_err(|_| EvalError::InvalidRatio(0, 0))?;
    let b: u32 = b.trim().parse().map_err(|_| EvalError::InvalidRatio(a, 0))?;
    if a == 0 || a.checked_add(b).is_none() {
        return Err(EvalError::InvalidRatio(a, b));
    }
    Ok((a, b))
}

/// Number of training samples out of `n` for ratio `a:b`, rounded half up.
pub fn train_count(n: usize, ratio: (u32, u32)) -> usize {
    let (a, b) = (ratio.0 as u128, ratio.1 as u128);
    ((n as u128 * a * 2 + (a + b)) / (2 * (a + b))) as usize
}

/// Fisher–Yates from the last index down, drawing `j = next_u64() % (i + 1)`.
pub fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Builds the split for `samples` (`(sample_id, activity)` pairs).
///
/// Every sample of a held-out activity goes to `test_new`. The remaining
/// activities are visited in lexicographic order; each one's samples (in input
/// order) are shuffled with [`shuffle`] using a single `ChaCha8Rng` seeded by
/// `seed_from_u64(seed)`, and the first [`train_count`] go to `train`, the rest
/// to `test_known`.
pub fn build_splits(
    samples: &[(String, String)],
    heldout: &BTreeSet<String>,
    seed: u64,
    ratio: (u32, u32),
) -> Result<SplitManifest, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if ratio.0 == 0 {
        return Err(EvalError::InvalidRatio(ratio.0, ratio.1));
    }
    let mut by_activity: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (id, activity) in samples {
        if activity.is_empty() {
            return Err(EvalError::EmptyActivity(id.clone()));
        }
        if !seen.insert(id.as_str()) {
            return Err(EvalError::DuplicateSample(id.clone()));
        }
        by_activity.entry(activity).or_default().push(id);
    }
    if let Some(missing) = heldout.iter().find(|a| !by_activity.contains_key(a.as_str())) {
        return Err(EvalError::UnknownHeldoutActivity(missing.clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kind_of: BTreeMap<&str, SplitKind> = BTreeMap::new();
    for (activity, mut ids) in by_activity {
        if heldout.contains(activity) {
            kind_of.extend(ids.into_iter().map(|id| (id, SplitKind::TestNew)));
            continue;
        }
        shuffle(&mut ids, &mut rng);
        let n_train = train_count(ids.len(), ratio);
        for (k, id) in ids.into_iter().enumerate() {
            kind_of.insert(id, if k < n_train { SplitKind::Train } else { SplitKind::TestKnown });
        }
    }

    let mut manifest = SplitManifest {
        train: BTreeSet::new(),
        test_known: BTreeSet::new(),
        test_new: BTreeSet::new(),
        heldout_activities: heldout.clone(),
        seed,
        ratio,
        assignments: Vec::with_capacity(samples.len()),
    };
    for (id, _) in samples {
        let kind = kind_of[id.as_str()];
        match kind {
            SplitKind::Train => manifest.train.insert(id.clone()),
            SplitKind::TestKnown => manifest.test_known.insert(id.clone()),
            SplitKind::TestNew => manifest.test_new.insert(id.clone()),
        };
        manifest.assignments.push((id.clone(), kind));
    }
    Ok(manifest)
}
