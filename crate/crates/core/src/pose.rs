//! Skeleton sequences, body-region models and region centroid trajectories.
//!
//! A [`SkeletonSequence`] is the raw motion signal: `F` frames of `J` joints in
//! metres, sampled at `fps`. A [`BodyModel`] groups joints into
//! [`NUM_REGIONS`] body regions and carries a mass and a weighting factor per
//! region. [`region_centroids`] reduces a sequence to one centroid per region
//! per frame, which is what the kinetic energy model consumes.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of body regions in every [`BodyModel`].
pub const NUM_REGIONS: usize = 8;

/// A joint position `[x, y, z]` in metres.
pub type Point3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: frame {frame} has {found} joints, expected {expected}")]
    InconsistentJointCount {
        line: usize,
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-finite coordinate at frame {frame}, joint {joint}")]
    NonFiniteCoordinate {
        line: usize,
        frame: usize,
        joint: usize,
    },
    #[error("joint {0} is not mapped to any body region")]
    UnmappedJoint(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid body model: {0}")]
    InvalidBodyModel(String),
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Per-frame 3D joint positions of one sample.
///
/// Immutable after construction; [`SkeletonSequence::new`] enforces
/// `F >= 2`, a constant joint count `J >= 1`, finite coordinates and `fps > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    sample_id: String,
    activity: String,
    fps: f64,
    frames: Vec<Vec<Point3>>,
}

impl SkeletonSequence {
    pub fn new(
        sample_id: impl Into<String>,
        activity: impl Into<String>,
        fps: f64,
        frames: Vec<Vec<Point3>>,
    ) -> Result<Self, PoseError> {
        validate_frames(0, fps, &frames)?;
        Ok(Self {
            sample_id: sample_id.into(),
            activity: activity.into(),
            fps,
            frames,
        })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn activity(&self) -> &str {
        &self.activity
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[Vec<Point3>] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn joint_count(&self) -> usize {
        self.frames[0].len()
    }

    /// Returns a copy carrying a different sample id and activity label.
    pub fn relabel(&self, sample_id: impl Into<String>, activity: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            activity: activity.into(),
            fps: self.fps,
            frames: self.frames.clone(),
        }
    }

    /// Copy of frames `[start, end)`. Fails if the slice has fewer than two frames.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Self, PoseError> {
        if start >= end || end > self.frames.len() {
            return Err(PoseError::InvalidParameter(format!(
                "frame range {start}..{end} outside 0..{}",
                self.frames.len()
            )));
        }
        Self::new(
            self.sample_id.clone(),
            self.activity.clone(),
            self.fps,
            self.frames[start..end].to_vec(),
        )
    }

    /// Applies `f` to every joint position.
    pub fn map_points(&self, f: impl Fn(Point3) -> Point3) -> Result<Self, PoseError> {
        let frames = self
            .frames
            .iter()
            .map(|frame| frame.iter().map(|&p| f(p)).collect())
            .collect();
        Self::new(self.sample_id.clone(), self.activity.clone(), self.fps, frames)
    }

    /// Same sequence with frame order reversed.
    pub fn reversed(&self) -> Self {
        let mut frames = self.frames.clone();
        frames.reverse();
        Self {
            sample_id: self.sample_id.clone(),
            activity: self.activity.clone(),
            fps: self.fps,
            frames,
        }
    }
}

fn validate_frames(line: usize, fps: f64, frames: &[Vec<Point3>]) -> Result<(), PoseError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(PoseError::InvalidParameter(format!("fps must be > 0, got {fps}")));
    }
    if frames.len() < 2 {
        return Err(PoseError::InvalidParameter(format!(
            "need at least 2 frames, got {}",
            frames.len()
        )));
    }
    let expected = frames[0].len();
    if expected == 0 {
        return Err(PoseError::InvalidParameter("frames must contain at least one joint".into()));
    }
    for (f, frame) in frames.iter().enumerate() {
        if frame.len() != expected {
            return Err(PoseError::InconsistentJointCount {
                line,
                frame: f,
                expected,
                found: frame.len(),
            });
        }
        for (j, p) in frame.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(PoseError::NonFiniteCoordinate { line, frame: f, joint: j });
            }
        }
    }
    Ok(())
}

/// On-disk shape of one skeleton record (one JSON object per line).
#[derive(Debug, Serialize, Deserialize)]
pub struct SkeletonRecord {
    pub sample_id: String,
    pub activity: String,
    pub fps: f64,
    pub joints: Vec<Vec<[Option<f64>; 3]>>,
}

impl From<&SkeletonSequence> for SkeletonRecord {
    fn from(seq: &SkeletonSequence) -> Self {
        SkeletonRecord {
            sample_id: seq.sample_id.clone(),
            activity: seq.activity.clone(),
            fps: seq.fps,
            joints: seq
                .frames
                .iter()
                .map(|frame| frame.iter().map(|p| p.map(Some)).collect())
                .collect(),
        }
    }
}

/// Serializes a sequence as a single skeleton record line (no trailing newline).
pub fn to_record_line(seq: &SkeletonSequence) -> String {
    serde_json::to_string(&SkeletonRecord::from(seq)).expect("skeleton record serializes")
}

/// Parses one skeleton record. `line` is 1-based and only used in errors.
pub fn parse_record(text: &str, line: usize) -> Result<SkeletonSequence, PoseError> {
    let cleaned = replace_nonfinite_tokens(text);
    let rec: SkeletonRecord = serde_json::from_str(&cleaned).map_err(|e| PoseError::MalformedRecord {
        line,
        reason: e.to_string(),
    })?;
    let mut frames = Vec::with_capacity(rec.joints.len());
    for (f, frame) in rec.joints.iter().enumerate() {
        let mut out = Vec::with_capacity(frame.len());
        for (j, joint) in frame.iter().enumerate() {
            let mut p = [0.0; 3];
            for (k, c) in joint.iter().enumerate() {
                match c {
                    Some(v) => p[k] = *v,
                    None => return Err(PoseError::NonFiniteCoordinate { line, frame: f, joint: j }),
                }
            }
            out.push(p);
        }
        frames.push(out);
    }
    validate_frames(line, rec.fps, &frames)?;
    Ok(SkeletonSequence {
        sample_id: rec.sample_id,
        activity: rec.activity,
        fps: rec.fps,
        frames,
    })
}

// Bare `NaN` / `Infinity` / `-Infinity` tokens (as written by e.g. Python's json
// module) become `null` so the record still parses and the coordinate is
// reported as non-finite instead of as a syntax error.
fn replace_nonfinite_tokens(text: &str) -> Cow<'_, str> {
    const TOKENS: [&str; 3] = ["-Infinity", "Infinity", "NaN"];
    if !text.contains("NaN") && !text.contains("Infinity") {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
        } else if let Some(tok) = TOKENS.iter().find(|t| rest.starts_with(*t)) {
            out.push_str("null");
            rest = &rest[tok.len()..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    Cow::Owned(out)
}

/// Reads every skeleton record of a file, preserving file order.
/// Blank lines are skipped.
pub fn parse_skeleton_file(path: impl AsRef<Path>) -> Result<Vec<SkeletonSequence>, PoseError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| PoseError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PoseError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

/// Joint-to-region assignment plus per-region mass (kg) and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    region_of: BTreeMap<usize, usize>,
    masses: [f64; NUM_REGIONS],
    weights: [f64; NUM_REGIONS],
}

/// Region order used by the bundled joint maps.
pub const REGION_NAMES: [&str; NUM_REGIONS] = [
    "head",
    "torso",
    "left_arm",
    "right_arm",
    "left_leg",
    "right_leg",
    "hands",
    "feet",
];

/// Reference body mass for the default anthropometric masses.
pub const DEFAULT_BODY_MASS_KG: f64 = 68.0;

// Dempster segment fractions of total body mass, merged into the eight regions:
// head+neck, trunk, upper arm+forearm (each side), thigh+shank (each side),
// both hands, both feet.
const DEMPSTER_FRACTIONS: [f64; NUM_REGIONS] = [
    0.081,
    0.497,
    0.028 + 0.016,
    0.028 + 0.016,
    0.100 + 0.0465,
    0.100 + 0.0465,
    2.0 * 0.006,
    2.0 * 0.0145,
];

/// NTU RGB+D 25-joint layout (0-based) to region index.
pub const NTU25_REGIONS: [usize; 25] = [
    1, // spine base
    1, // spine mid
    0, // neck
    0, // head
    1, // left shoulder
    2, // left elbow
    2, // left wrist
    6, // left hand
    1, // right shoulder
    3, // right elbow
    3, // right wrist
    6, // right hand
    1, // left hip
    4, // left knee
    4, // left ankle
    7, // left foot
    1, // right hip
    5, // right knee
    5, // right ankle
    7, // right foot
    1, // spine shoulder
    6, // left hand tip
    6, // left thumb
    6, // right hand tip
    6, // right thumb
];

/// COCO 17-keypoint layout to region index. Wrists stand in for hands and
/// ankles for feet.
pub const COCO17_REGIONS: [usize; 17] = [
    0, 0, 0, 0, 0, // nose, eyes, ears
    1, 1, // shoulders
    2, 3, // elbows
    6, 6, // wrists
    1, 1, // hips
    4, 5, // knees
    7, 7, // ankles
];

impl BodyModel {
    pub fn new(
        region_of: BTreeMap<usize, usize>,
        masses: [f64; NUM_REGIONS],
        weights: [f64; NUM_REGIONS],
    ) -> Result<Self, PoseError> {
        let mut members = [0usize; NUM_REGIONS];
        for (&joint, &region) in &region_of {
            if region >= NUM_REGIONS {
                return Err(PoseError::InvalidBodyModel(format!(
                    "joint {joint} maps to region {region}, expected < {NUM_REGIONS}"
                )));
            }
            members[region] += 1;
        }
        if let Some(r) = members.iter().position(|&n| n == 0) {
            return Err(PoseError::InvalidBodyModel(format!("region {r} has no joints")));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(PoseError::InvalidBodyModel("region masses must be finite and > 0".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(PoseError::InvalidBodyModel("region weights must be finite and >= 0".into()));
        }
        Ok(Self { region_of, masses, weights })
    }

    /// Builds a model from a dense joint→region table with the default
    /// anthropometric masses and unit weights.
    pub fn from_joint_map(map: &[usize]) -> Result<Self, PoseError> {
        Self::new(
            map.iter().copied().enumerate().collect(),
            default_masses(DEFAULT_BODY_MASS_KG),
            [1.0; NUM_REGIONS],
        )
    }

    pub fn ntu25() -> Self {
        Self::from_joint_map(&NTU25_REGIONS).expect("bundled NTU map is valid")
    }

    pub fn coco17() -> Self {
        Self::from_joint_map(&COCO17_REGIONS).expect("bundled COCO map is valid")
    }

    /// Default model for a joint count: NTU-25 or COCO-17.
    pub fn default_for_joints(joints: usize) -> Result<Self, PoseError> {
        match joints {
            25 => Ok(Self::ntu25()),
            17 => Ok(Self::coco17()),
            n => Err(PoseError::InvalidBodyModel(format!(
                "no default body model for {n} joints; supply a body model file"
            ))),
        }
    }

    pub fn region_of(&self, joint: usize) -> Option<usize> {
        self.region_of.get(&joint).copied()
    }

    pub fn joint_map(&self) -> &BTreeMap<usize, usize> {
        &self.region_of
    }

    pub fn masses(&self) -> &[f64; NUM_REGIONS] {
        &self.masses
    }

    pub fn weights(&self) -> &[f64; NUM_REGIONS] {
        &self.weights
    }

    pub fn with_weights(&self, weights: [f64; NUM_REGIONS]) -> Result<Self, PoseError> {
        Self::new(self.region_of.clone(), self.masses, weights)
    }

    pub fn with_masses(&self, masses: [f64; NUM_REGIONS]) -> Result<Self, PoseError> {
        Self::new(self.region_of.clone(), masses, self.weights)
    }

    /// Parses the two-section body model text format:
    ///
    /// ```text
    /// joint_index,region_index
    /// 0,1
    /// ...
    /// region_index,mass_kg,weight
    /// 0,5.508,1.0
    /// ...
    /// ```
    pub fn parse(text: &str) -> Result<Self, PoseError> {
        #[derive(PartialEq)]
        enum Section {
            Start,
            Joints,
            Regions,
        }
        let malformed = |line: usize, reason: String| PoseError::MalformedRecord { line, reason };
        let mut section = Section::Start;
        let mut region_of = BTreeMap::new();
        let mut masses = [f64::NAN; NUM_REGIONS];
        let mut weights = [f64::NAN; NUM_REGIONS];
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            let cols: Vec<&str> = row.split(',').map(str::trim).collect();
            if cols == ["joint_index", "region_index"] {
                if section != Section::Start {
                    return Err(malformed(line, "joint section must come first".into()));
                }
                section = Section::Joints;
                continue;
            }
            if cols == ["region_index", "mass_kg", "weight"] {
                if section != Section::Joints {
                    return Err(malformed(line, "region section must follow the joint section".into()));
                }
                section = Section::Regions;
                continue;
            }
            let num = |s: &str| -> Result<f64, PoseError> {
                s.parse::<f64>().map_err(|e| malformed(line, format!("bad number {s:?}: {e}")))
            };
            let idx = |s: &str| -> Result<usize, PoseError> {
                s.parse::<usize>().map_err(|e| malformed(line, format!("bad index {s:?}: {e}")))
            };
            match section {
                Section::Start => return Err(malformed(line, "missing joint_index,region_index header".into())),
                Section::Joints => {
                    if cols.len() != 2 {
                        return Err(malformed(line, format!("expected 2 columns, got {}", cols.len())));
                    }
                    let joint = idx(cols[0])?;
                    if region_of.insert(joint, idx(cols[1])?).is_some() {
                        return Err(malformed(line, format!("joint {joint} listed twice")));
                    }
                }
                Section::Regions => {
                    if cols.len() != 3 {
                        return Err(malformed(line, format!("expected 3 columns, got {}", cols.len())));
                    }
                    let r = idx(cols[0])?;
                    if r >= NUM_REGIONS {
                        return Err(malformed(line, format!("region {r} out of range")));
                    }
                    if !masses[r].is_nan() {
                        return Err(malformed(line, format!("region {r} listed twice")));
                    }
                    masses[r] = num(cols[1])?;
                    weights[r] = num(cols[2])?;
                }
            }
        }
        if let Some(r) = masses.iter().position(|m| m.is_nan()) {
            return Err(PoseError::InvalidBodyModel(format!("region {r} has no mass/weight row")));
        }
        Self::new(region_of, masses, weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoseError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PoseError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("joint_index,region_index\n");
        for (j, r) in &self.region_of {
            s.push_str(&format!("{j},{r}\n"));
        }
        s.push_str("region_index,mass_kg,weight\n");
        for r in 0..NUM_REGIONS {
            s.push_str(&format!("{r},{},{}\n", self.masses[r], self.weights[r]));
        }
        s
    }
}

/// Anthropometric region masses for a given total body mass.
pub fn default_masses(total_kg: f64) -> [f64; NUM_REGIONS] {
    DEMPSTER_FRACTIONS.map(|f| f * total_kg)
}

/// Region centroids per frame.
///
/// Stores per-region coordinate sums and member counts; centroids and
/// displacements are derived from them. Displacements are taken as differences
/// of sums before dividing, so translating exactly representable coordinates
/// by an exactly representable offset leaves them bit-identical. Regions with
/// no member joint have `occupied()[r] == false` and a centroid fixed at the
/// origin, so they contribute no motion.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTrajectory {
    sample_id: String,
    fps: f64,
    sums: Vec<[Point3; NUM_REGIONS]>,
    counts: [usize; NUM_REGIONS],
}

impl RegionTrajectory {
    /// Builds a trajectory directly from centroids; every region is treated
    /// as a single point, and `occupied` regions must be flagged explicitly.
    pub fn from_centroids(
        sample_id: impl Into<String>,
        fps: f64,
        centroids: Vec<[Point3; NUM_REGIONS]>,
        occupied: [bool; NUM_REGIONS],
    ) -> Result<Self, PoseError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(PoseError::InvalidParameter(format!("fps must be > 0, got {fps}")));
        }
        let sums = centroids
            .into_iter()
            .map(|mut c| {
                for r in 0..NUM_REGIONS {
                    if !occupied[r] {
                        c[r] = [0.0; 3];
                    }
                }
                c
            })
            .collect();
        Ok(Self { sample_id: sample_id.into(), fps, sums, counts: occupied.map(usize::from) })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frame_count(&self) -> usize {
        self.sums.len()
    }

    pub fn occupied(&self) -> [bool; NUM_REGIONS] {
        self.counts.map(|n| n > 0)
    }

    pub fn centroid(&self, t: usize, r: usize) -> Point3 {
        match self.counts[r] {
            0 => [0.0; 3],
            n => self.sums[t][r].map(|s| s / n as f64),
        }
    }

    pub fn centroids(&self) -> Vec<[Point3; NUM_REGIONS]> {
        (0..self.frame_count())
            .map(|t| std::array::from_fn(|r| self.centroid(t, r)))
            .collect()
    }

    /// Centroid displacement of region `r` from frame `t - 1` to frame `t`.
    pub fn displacement(&self, t: usize, r: usize) -> Point3 {
        match self.counts[r] {
            0 => [0.0; 3],
            n => std::array::from_fn(|k| (self.sums[t][r][k] - self.sums[t - 1][r][k]) / n as f64),
        }
    }
}

pub fn region_centroids(seq: &SkeletonSequence, model: &BodyModel) -> Result<RegionTrajectory, PoseError> {
    let regions: Vec<usize> = (0..seq.joint_count())
        .map(|j| model.region_of(j).ok_or(PoseError::UnmappedJoint(j)))
        .collect::<Result<_, _>>()?;
    let mut counts = [0usize; NUM_REGIONS];
    for &r in &regions {
        counts[r] += 1;
    }
    let sums = seq
        .frames
        .iter()
        .map(|frame| {
            let mut sums = [[0.0; 3]; NUM_REGIONS];
            for (p, &r) in frame.iter().zip(&regions) {
                for k in 0..3 {
                    sums[r][k] += p[k];
                }
            }
            sums
        })
        .collect();
    Ok(RegionTrajectory { sample_id: seq.sample_id.clone(), fps: seq.fps, sums, counts })
}

/// Parameters of the deterministic sinusoidal test-data generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Oscillation amplitude in metres.
    pub amplitude: f64,
    /// Oscillation frequency in Hz.
    pub freq: f64,
    pub fps: f64,
    pub frames: usize,
    pub joints: usize,
    pub seed: u64,
}

/// Generates `base_j + amplitude * sin(2π·freq·t/fps) * dir_j` for every joint.
///
/// Base positions are drawn uniformly from a 2 m box and each joint gets a
/// unit direction, all from a ChaCha8 stream seeded with `seed`. The draws do
/// not depend on `amplitude`, so two calls that differ only in amplitude move
/// along identical paths.
pub fn synth_sequence(params: &SynthParams) -> Result<SkeletonSequence, PoseError> {
    let SynthParams { amplitude, freq, fps, frames, joints, seed } = *params;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(PoseError::InvalidParameter(format!("fps must be > 0, got {fps}")));
    }
    if frames < 2 {
        return Err(PoseError::InvalidParameter(format!("frames must be >= 2, got {frames}")));
    }
    if joints == 0 {
        return Err(PoseError::InvalidParameter("joints must be >= 1".into()));
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) || !freq.is_finite() {
        return Err(PoseError::InvalidParameter(format!(
            "amplitude must be finite and >= 0 and freq finite, got {amplitude}, {freq}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout: Vec<(Point3, Point3)> = (0..joints)
        .map(|_| {
            let base = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0)];
            (base, random_unit(&mut rng))
        })
        .collect();
    let data = (0..frames)
        .map(|t| {
            let s = amplitude * (2.0 * std::f64::consts::PI * freq * t as f64 / fps).sin();
            layout
                .iter()
                .map(|(b, d)| [b[0] + s * d[0], b[1] + s * d[1], b[2] + s * d[2]])
                .collect()
        })
        .collect();
    SkeletonSequence::new(format!("synth-{seed}"), "synth", fps, data)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Point3 {
    loop {
        let v: Point3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_frame_line() -> &'static str {
        r#"{"sample_id":"s1","activity":"walk","fps":30,"joints":[[[0,0,0],[1,1,1]],[[0,0,1],[1,1,2]]]}"#
    }

    #[test]
    fn parses_minimal_record() {
        let seq = parse_record(two_frame_line(), 1).unwrap();
        assert_eq!(seq.frame_count(), 2);
        assert_eq!(seq.joint_count(), 2);
        assert_eq!(seq.fps(), 30.0);
        assert_eq!(seq.activity(), "walk");
    }

    #[test]
    fn nan_coordinate_is_rejected() {
        let line = r#"{"sample_id":"s1","activity":"walk","fps":30,"joints":[[[0,0,NaN]],[[0,0,1]]]}"#;
        assert_eq!(
            parse_record(line, 4),
            Err(PoseError::NonFiniteCoordinate { line: 4, frame: 0, joint: 0 })
        );
        let line = r#"{"sample_id":"s1","activity":"walk","fps":30,"joints":[[[0,0,0]],[[0,-Infinity,1]]]}"#;
        assert!(matches!(parse_record(line, 1), Err(PoseError::NonFiniteCoordinate { frame: 1, .. })));
    }

    #[test]
    fn nan_inside_strings_is_left_alone() {
        let line = r#"{"sample_id":"NaN","activity":"Infinity run","fps":30,"joints":[[[0,0,0]],[[0,0,1]]]}"#;
        let seq = parse_record(line, 1).unwrap();
        assert_eq!(seq.sample_id(), "NaN");
        assert_eq!(seq.activity(), "Infinity run");
    }

    #[test]
    fn short_frame_is_inconsistent() {
        let line = r#"{"sample_id":"s","activity":"a","fps":30,"joints":[[[0,0,0],[1,0,0]],[[0,0,0],[1,0,0]],[[0,0,0],[1,0,0]],[[0,0,0]]]}"#;
        assert_eq!(
            parse_record(line, 2),
            Err(PoseError::InconsistentJointCount { line: 2, frame: 3, expected: 2, found: 1 })
        );
    }

    #[test]
    fn malformed_json_reports_line() {
        assert!(matches!(parse_record("{not json", 7), Err(PoseError::MalformedRecord { line: 7, .. })));
        let two_coords = r#"{"sample_id":"s","activity":"a","fps":30,"joints":[[[0,0]],[[0,0]]]}"#;
        assert!(matches!(parse_record(two_coords, 1), Err(PoseError::MalformedRecord { .. })));
    }

    #[test]
    fn single_frame_and_zero_fps_rejected() {
        let one = r#"{"sample_id":"s","activity":"a","fps":30,"joints":[[[0,0,0]]]}"#;
        assert!(matches!(parse_record(one, 1), Err(PoseError::InvalidParameter(_))));
        let zero = r#"{"sample_id":"s","activity":"a","fps":0,"joints":[[[0,0,0]],[[0,0,0]]]}"#;
        assert!(matches!(parse_record(zero, 1), Err(PoseError::InvalidParameter(_))));
    }

    #[test]
    fn record_line_round_trips() {
        let seq = synth_sequence(&SynthParams {
            amplitude: 0.1,
            freq: 1.3,
            fps: 25.0,
            frames: 5,
            joints: 3,
            seed: 9,
        })
        .unwrap();
        assert_eq!(parse_record(&to_record_line(&seq), 1).unwrap(), seq);
    }

    fn one_region_model() -> BodyModel {
        // joint 0 in region 0, joints 1..8 fill the remaining regions
        BodyModel::from_joint_map(&[0, 1, 2, 3, 4, 5, 6, 7]).unwrap()
    }

    #[test]
    fn single_joint_centroid_is_the_joint() {
        let seq = SkeletonSequence::new("s", "a", 30.0, vec![vec![[1.0, 2.0, 3.0]]; 4]).unwrap();
        let traj = region_centroids(&seq, &one_region_model()).unwrap();
        assert!(traj.centroids().iter().all(|c| c[0] == [1.0, 2.0, 3.0]));
        assert_eq!(traj.occupied(), [true, false, false, false, false, false, false, false]);
    }

    #[test]
    fn two_joint_centroid_is_midpoint() {
        let model = BodyModel::from_joint_map(&[0, 0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        let frame = vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let seq = SkeletonSequence::new("s", "a", 30.0, vec![frame.clone(), frame]).unwrap();
        let traj = region_centroids(&seq, &model).unwrap();
        assert_eq!(traj.centroid(0, 0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn ntu_centroids_match_bruteforce_mean() {
        let seq = synth_sequence(&SynthParams {
            amplitude: 0.3,
            freq: 0.7,
            fps: 30.0,
            frames: 12,
            joints: 25,
            seed: 123,
        })
        .unwrap();
        let model = BodyModel::ntu25();
        let traj = region_centroids(&seq, &model).unwrap();
        for (t, frame) in seq.frames().iter().enumerate() {
            for r in 0..NUM_REGIONS {
                let members: Vec<&Point3> = NTU25_REGIONS
                    .iter()
                    .enumerate()
                    .filter(|(_, &reg)| reg == r)
                    .map(|(j, _)| &frame[j])
                    .collect();
                for k in 0..3 {
                    let mean = members.iter().map(|p| p[k]).sum::<f64>() / members.len() as f64;
                    assert!((traj.centroid(t, r)[k] - mean).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unmapped_joint_is_reported() {
        let seq = SkeletonSequence::new("s", "a", 30.0, vec![vec![[0.0; 3]; 18]; 2]).unwrap();
        assert_eq!(region_centroids(&seq, &BodyModel::coco17()), Err(PoseError::UnmappedJoint(17)));
    }

    #[test]
    fn trajectory_from_centroids() {
        let mut occupied = [false; NUM_REGIONS];
        occupied[2] = true;
        let c0 = [[9.0; 3]; NUM_REGIONS];
        let mut c1 = c0;
        c1[2] = [10.0, 9.0, 7.0];
        let traj = RegionTrajectory::from_centroids("t", 30.0, vec![c0, c1], occupied).unwrap();
        assert_eq!(traj.displacement(1, 2), [1.0, 0.0, -2.0]);
        assert_eq!(traj.centroid(1, 0), [0.0; 3]);
        assert_eq!(traj.displacement(1, 0), [0.0; 3]);
        assert!(RegionTrajectory::from_centroids("t", 0.0, vec![c0, c1], occupied).is_err());
    }

    #[test]
    fn displacement_is_difference_of_centroids() {
        let seq = synth_sequence(&SynthParams { amplitude: 0.3, freq: 2.0, fps: 30.0, frames: 12, joints: 25, seed: 5 }).unwrap();
        let traj = region_centroids(&seq, &BodyModel::ntu25()).unwrap();
        for t in 1..traj.frame_count() {
            for r in 0..NUM_REGIONS {
                for k in 0..3 {
                    let d = traj.centroid(t, r)[k] - traj.centroid(t - 1, r)[k];
                    assert!((traj.displacement(t, r)[k] - d).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn default_masses_sum_to_body_mass() {
        let total: f64 = default_masses(DEFAULT_BODY_MASS_KG).iter().sum();
        assert!((total - DEFAULT_BODY_MASS_KG).abs() < 1e-9);
    }

    #[test]
    fn body_model_text_round_trips() {
        let model = BodyModel::coco17().with_weights([1.0, 0.5, 2.0, 2.0, 1.5, 1.5, 0.0, 1.0]).unwrap();
        assert_eq!(BodyModel::parse(&model.to_text()).unwrap(), model);
    }

    #[test]
    fn body_model_rejects_empty_region_and_bad_mass() {
        let text = "joint_index,region_index\n0,0\nregion_index,mass_kg,weight\n0,1,1\n1,1,1\n2,1,1\n3,1,1\n4,1,1\n5,1,1\n6,1,1\n7,1,1\n";
        assert!(matches!(BodyModel::parse(text), Err(PoseError::InvalidBodyModel(_))));
        let mut masses = default_masses(68.0);
        masses[3] = 0.0;
        assert!(BodyModel::ntu25().with_masses(masses).is_err());
    }

    #[test]
    fn synth_zero_amplitude_is_static_and_seed_deterministic() {
        let p = SynthParams { amplitude: 0.0, freq: 2.0, fps: 30.0, frames: 10, joints: 25, seed: 5 };
        let seq = synth_sequence(&p).unwrap();
        assert!(seq.frames().windows(2).all(|w| w[0] == w[1]));
        let q = SynthParams { amplitude: 0.15, ..p.clone() };
        assert_eq!(synth_sequence(&q).unwrap(), synth_sequence(&q).unwrap());
        assert!(synth_sequence(&SynthParams { frames: 1, ..p.clone() }).is_err());
        assert!(synth_sequence(&SynthParams { fps: 0.0, ..p }).is_err());
    }
}
