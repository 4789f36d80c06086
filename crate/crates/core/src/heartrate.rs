//! Keytel heart-rate regression for energy expenditure.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

pub const KG_PER_LB: f64 = 0.453_592_37;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeartRateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = HeartRateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            other => Err(HeartRateError::InvalidParameter(format!("unknown sex {other:?}"))),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "male",
            Sex::Female => "female",
        })
    }
}

/// Unit of the `weight` value handed to the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightUnit {
    #[default]
    Kg,
    Lb,
}

impl FromStr for WeightUnit {
    type Err = HeartRateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kg" => Ok(WeightUnit::Kg),
            "lb" => Ok(WeightUnit::Lb),
            other => Err(HeartRateError::InvalidParameter(format!("unknown weight unit {other:?}"))),
        }
    }
}

pub fn lb_to_kg(lb: f64) -> f64 {
    lb * KG_PER_LB
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectProfile {
    pub sex: Sex,
    /// Body weight in kg.
    pub weight: f64,
    /// Age in years.
    pub age: f64,
}

impl SubjectProfile {
    pub fn new(sex: Sex, weight_kg: f64, age: f64) -> Result<Self, HeartRateError> {
        if !(weight_kg.is_finite() && weight_kg > 0.0) {
            return Err(HeartRateError::InvalidParameter(format!("weight must be > 0, got {weight_kg}")));
        }
        if !(age.is_finite() && age > 0.0) {
            return Err(HeartRateError::InvalidParameter(format!("age must be > 0, got {age}")));
        }
        Ok(Self { sex, weight: weight_kg, age })
    }

    pub fn from_lb(sex: Sex, weight_lb: f64, age: f64) -> Result<Self, HeartRateError> {
        Self::new(sex, lb_to_kg(weight_lb), age)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeartRateRecord {
    /// Beats per minute.
    pub hr: f64,
    /// Duration in hours.
    pub duration_h: f64,
}

impl HeartRateRecord {
    pub fn new(hr: f64, duration_h: f64) -> Result<Self, HeartRateError> {
        if !(hr.is_finite() && hr > 0.0) {
            return Err(HeartRateError::InvalidParameter(format!("heart rate must be > 0, got {hr}")));
        }
        if !(duration_h.is_finite() && duration_h >= 0.0) {
            return Err(HeartRateError::InvalidParameter(format!("duration must be >= 0, got {duration_h}")));
        }
        Ok(Self { hr, duration_h })
    }
}

/// `(intercept, hr, weight, age)` coefficients in kJ/min.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeytelCoefficients {
    pub male: [f64; 4],
    pub female: [f64; 4],
    pub kj_to_kcal_divisor: f64,
}

impl Default for KeytelCoefficients {
    fn default() -> Self {
        Self {
            male: [-55.0969, 0.6309, 0.1988, 0.2017],
            female: [-20.4022, 0.4472, -0.1263, 0.074],
            kj_to_kcal_divisor: 4.184,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeytelEstimate {
    pub kcal: f64,
    /// Set when the regression went negative, which happens for heart rates
    /// too low for the model.
    pub implausible: bool,
}

/// Energy expended over `record.duration_h` hours; with one hour this is kcal/hour.
pub fn keytel_kcal(
    profile: &SubjectProfile,
    record: &HeartRateRecord,
    coeffs: &KeytelCoefficients,
) -> Result<KeytelEstimate, HeartRateError> {
    // Re-check: the structs have public fields.
    SubjectProfile::new(profile.sex, profile.weight, profile.age)?;
    HeartRateRecord::new(record.hr, record.duration_h)?;
    if !(coeffs.kj_to_kcal_divisor.is_finite() && coeffs.kj_to_kcal_divisor > 0.0) {
        return Err(HeartRateError::InvalidParameter("kJ→kcal divisor must be > 0".into()));
    }
    let [c0, c_hr, c_w, c_a] = match profile.sex {
        Sex::Male => coeffs.male,
        Sex::Female => coeffs.female,
    };
    let kj_per_min = c0 + c_hr * record.hr + c_w * profile.weight + c_a * profile.age;
    let kcal = 60.0 * record.duration_h * kj_per_min / coeffs.kj_to_kcal_divisor;
    Ok(KeytelEstimate { kcal, implausible: kj_per_min < 0.0 })
}

/// One row of the heart-rate study file.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub subject_id: String,
    pub profile: SubjectProfile,
    pub activity: String,
    pub record: HeartRateRecord,
}

#[derive(Debug, Deserialize)]
struct RawStudyRow {
    subject_id: String,
    sex: String,
    weight: f64,
    age: f64,
    activity: String,
    hr_bpm: f64,
    duration_h: f64,
}

pub const STUDY_HEADER: [&str; 7] = ["subject_id", "sex", "weight", "age", "activity", "hr_bpm", "duration_h"];

/// Parses `subject_id,sex,weight,age,activity,hr_bpm,duration_h` rows.
pub fn parse_study<R: std::io::Read>(reader: R, unit: WeightUnit) -> Result<Vec<StudyRow>, HeartRateError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| HeartRateError::MalformedRow { line: 1, reason: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != STUDY_HEADER {
        return Err(HeartRateError::MalformedRow {
            line: 1,
            reason: format!("expected header {}", STUDY_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<RawStudyRow>().enumerate() {
        let line = i + 2;
        let bad = |reason: String| HeartRateError::MalformedRow { line, reason };
        let raw = rec.map_err(|e| bad(e.to_string()))?;
        let sex: Sex = raw.sex.parse().map_err(|e: HeartRateError| bad(e.to_string()))?;
        let weight = match unit {
            WeightUnit::Kg => raw.weight,
            WeightUnit::Lb => lb_to_kg(raw.weight),
        };
        let profile = SubjectProfile::new(sex, weight, raw.age).map_err(|e| bad(e.to_string()))?;
        let record = HeartRateRecord::new(raw.hr_bpm, raw.duration_h).map_err(|e| bad(e.to_string()))?;
        rows.push(StudyRow { subject_id: raw.subject_id, profile, activity: raw.activity, record });
    }
    Ok(rows)
}

pub fn load_study(path: impl AsRef<Path>, unit: WeightUnit) -> Result<Vec<StudyRow>, HeartRateError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HeartRateError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_study(file, unit)
}

/// Per-activity kcal/hour: total predicted kcal over total recorded hours.
/// Activities whose rows sum to zero hours are left out.
pub fn activity_hourly_kcal(
    rows: &[StudyRow],
    coeffs: &KeytelCoefficients,
) -> Result<BTreeMap<String, f64>, HeartRateError> {
    let mut acc: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for row in rows {
        let est = keytel_kcal(&row.profile, &row.record, coeffs)?;
        let e = acc.entry(row.activity.clone()).or_default();
        e.0 += est.kcal;
        e.1 += row.record.duration_h;
    }
    Ok(acc
        .into_iter()
        .filter(|(_, (_, hours))| *hours > 0.0)
        .map(|(a, (kcal, hours))| (a, kcal / hours))
        .collect())
}
