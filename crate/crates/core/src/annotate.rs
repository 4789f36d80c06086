//! Category-level and sample-level caloric annotations.
//!
//! A category label is the mean of whichever sources exist for the activity
//! (compendium value, heart-rate study, mean skeleton estimate). Sample labels
//! then shift the category label inside a band whose width grows with the
//! category label, placing each sample by where its movement intensity falls
//! between the least and most intense sample of the category.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Body weight the compendium values refer to.
pub const COMPENDIUM_REFERENCE_WEIGHT_LB: f64 = 150.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotateError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: activity {activity:?} listed twice")]
    DuplicateActivity { line: usize, activity: String },
    #[error("line {line}: activity {activity:?} has non-positive value {value}")]
    NonPositiveValue { line: usize, activity: String, value: f64 },
    #[error("no caloric source available for activity {0:?}")]
    NoSourceAvailable(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("category label {l_cat} exceeds the limit {l_max}")]
    CategoryExceedsLimit { l_cat: f64, l_max: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid energy for sample {0:?}")]
    InvalidEnergy(String),
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompendiumTable {
    entries: BTreeMap<String, f64>,
    pub reference_weight_lb: f64,
}

impl CompendiumTable {
    pub fn from_entries<I, S>(entries: I) -> Result<Self, AnnotateError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (i, (name, value)) in entries.into_iter().enumerate() {
            insert_entry(&mut map, i + 1, name.into(), value)?;
        }
        Ok(Self { entries: map, reference_weight_lb: COMPENDIUM_REFERENCE_WEIGHT_LB })
    }

    pub fn get(&self, activity: &str) -> Option<f64> {
        self.entries.get(activity).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

fn insert_entry(map: &mut BTreeMap<String, f64>, line: usize, activity: String, value: f64) -> Result<(), AnnotateError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(AnnotateError::NonPositiveValue { line, activity, value });
    }
    if map.contains_key(&activity) {
        return Err(AnnotateError::DuplicateActivity { line, activity });
    }
    map.insert(activity, value);
    Ok(())
}

#[derive(Deserialize)]
struct CompendiumRow {
    activity: String,
    kcal_per_hour: f64,
}

/// Reads `activity,kcal_per_hour` rows. A header row is optional.
pub fn parse_compendium<R: std::io::Read>(reader: R) -> Result<CompendiumTable, AnnotateError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut map = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| AnnotateError::MalformedRow { line, reason: e.to_string() })?;
        if line == 1 && rec.iter().collect::<Vec<_>>() == ["activity", "kcal_per_hour"] {
            continue;
        }
        let row: CompendiumRow = rec
            .deserialize(None)
            .map_err(|e| AnnotateError::MalformedRow { line, reason: e.to_string() })?;
        insert_entry(&mut map, line, row.activity, row.kcal_per_hour)?;
    }
    Ok(CompendiumTable { entries: map, reference_weight_lb: COMPENDIUM_REFERENCE_WEIGHT_LB })
}

pub fn load_compendium(path: impl AsRef<Path>) -> Result<CompendiumTable, AnnotateError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| AnnotateError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_compendium(file)
}

/// Which sources went into a category label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceSet {
    pub compendium: bool,
    pub heart_rate: bool,
    pub skeleton: bool,
}

impl SourceSet {
    pub fn is_empty(&self) -> bool {
        !(self.compendium || self.heart_rate || self.skeleton)
    }
}

/// Serialized as names joined by `+`, e.g. `compendium+skeleton`.
impl fmt::Display for SourceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.compendium, "compendium"),
            (self.heart_rate, "heart_rate"),
            (self.skeleton, "skeleton"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        f.write_str(&names.join("+"))
    }
}

impl std::str::FromStr for SourceSet {
    type Err = AnnotateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = SourceSet::default();
        for part in s.split('+') {
            match part {
                "compendium" => set.compendium = true,
                "heart_rate" => set.heart_rate = true,
                "skeleton" => set.skeleton = true,
                other => {
                    return Err(AnnotateError::MalformedRow { line: 0, reason: format!("unknown source {other:?}") })
                }
            }
        }
        Ok(set)
    }
}

/// The per-activity estimates available for averaging, all in kcal/hour.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CategorySources {
    pub compendium: Option<f64>,
    pub heart_rate: Option<f64>,
    pub skeleton_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryAnnotation {
    pub activity: String,
    pub l_cat: f64,
    pub sources: SourceSet,
}

pub fn category_annotation(activity: &str, available: &CategorySources) -> Result<CategoryAnnotation, AnnotateError> {
    let present: Vec<f64> = [available.compendium, available.heart_rate, available.skeleton_mean]
        .into_iter()
        .flatten()
        .collect();
    if present.is_empty() {
        return Err(AnnotateError::NoSourceAvailable(activity.to_string()));
    }
    let l_cat = present.iter().sum::<f64>() / present.len() as f64;
    if !(l_cat.is_finite() && l_cat > 0.0) {
        return Err(AnnotateError::NonPositiveValue { line: 0, activity: activity.to_string(), value: l_cat });
    }
    Ok(CategoryAnnotation {
        activity: activity.to_string(),
        l_cat,
        sources: SourceSet {
            compendium: available.compendium.is_some(),
            heart_rate: available.heart_rate.is_some(),
            skeleton: available.skeleton_mean.is_some(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationConfig {
    /// Fluctuation band width for a category at `l_max`, kcal/hour.
    pub f_max: f64,
    /// Upper limit of any category label, kcal/hour.
    pub l_max: f64,
}

impl AnnotationConfig {
    pub fn new(f_max: f64, l_max: f64) -> Result<Self, AnnotateError> {
        let cfg = Self { f_max, l_max };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Wide-range activity sets (labels up to 1000 kcal/h).
    pub fn diverse() -> Self {
        Self { f_max: 100.0, l_max: 1000.0 }
    }

    /// Daily-living activity sets (labels up to 500 kcal/h).
    pub fn adl() -> Self {
        Self { f_max: 100.0, l_max: 500.0 }
    }

    fn validate(&self) -> Result<(), AnnotateError> {
        if !(self.f_max.is_finite() && self.l_max.is_finite() && self.f_max > 0.0 && self.f_max <= self.l_max) {
            return Err(AnnotateError::InvalidConfig(format!(
                "need 0 < f_max <= l_max, got f_max={} l_max={}",
                self.f_max, self.l_max
            )));
        }
        Ok(())
    }

    /// Band width `f_cat = (l_cat / l_max) · f_max` for a category.
    pub fn category_fluctuation(&self, l_cat: f64) -> f64 {
        l_cat / self.l_max * self.f_max
    }
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self::diverse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleAnnotation {
    pub sample_id: String,
    pub activity: String,
    pub l_sample: f64,
    pub fluctuation: f64,
    /// Movement intensity used for placement within the band.
    pub energy: f64,
}

/// Spreads the category label `l_cat` over a batch of samples of one activity.
///
/// With `f_cat = (l_cat/l_max)·f_max`, each sample gets
/// `f_s = (E_s − E_min)/(E_max − E_min)·f_cat − ½·f_cat` and `l_s = l_cat + f_s`.
/// A batch whose energies are all equal gets `f_s = 0`. Output order follows input.
pub fn sample_annotations(
    activity: &str,
    l_cat: f64,
    energies: &[(String, f64)],
    config: &AnnotationConfig,
) -> Result<Vec<SampleAnnotation>, AnnotateError> {
    config.validate()?;
    if energies.is_empty() {
        return Err(AnnotateError::EmptyBatch);
    }
    if l_cat > config.l_max {
        return Err(AnnotateError::CategoryExceedsLimit { l_cat, l_max: config.l_max });
    }
    if let Some((id, _)) = energies.iter().find(|(_, e)| !e.is_finite()) {
        return Err(AnnotateError::InvalidEnergy(id.clone()));
    }
    let f_cat = config.category_fluctuation(l_cat);
    let e_min = energies.iter().map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
    let e_max = energies.iter().map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max);
    let span = e_max - e_min;
    Ok(energies
        .iter()
        .map(|(id, e)| {
            let fluctuation = if span > 0.0 { (e - e_min) / span * f_cat - 0.5 * f_cat } else { 0.0 };
            SampleAnnotation {
                sample_id: id.clone(),
                activity: activity.to_string(),
                l_sample: l_cat + fluctuation,
                fluctuation,
                energy: *e,
            }
        })
        .collect())
}

pub const ANNOTATION_HEADER: &str = "sample_id,activity,kcal_per_hour,fluctuation,source_mask";

/// One annotation file row. Values are rounded to one decimal here and nowhere else.
pub fn annotation_row(sample: &SampleAnnotation, sources: SourceSet) -> String {
    format!(
        "{},{},{:.1},{:.1},{}",
        sample.sample_id, sample.activity, sample.l_sample, sample.fluctuation, sources
    )
}

/// A row read back from an annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub sample_id: String,
    pub activity: String,
    pub kcal_per_hour: f64,
    pub fluctuation: f64,
    pub sources: SourceSet,
}

#[derive(Deserialize)]
struct RawAnnotation {
    sample_id: String,
    activity: String,
    kcal_per_hour: f64,
    fluctuation: f64,
    source_mask: String,
}

pub fn parse_annotations<R: std::io::Read>(reader: R) -> Result<Vec<AnnotationRecord>, AnnotateError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| AnnotateError::MalformedRow { line: 1, reason: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != ANNOTATION_HEADER {
        return Err(AnnotateError::MalformedRow { line: 1, reason: format!("expected header {ANNOTATION_HEADER}") });
    }
    rdr.deserialize::<RawAnnotation>()
        .enumerate()
        .map(|(i, rec)| {
            let line = i + 2;
            let raw = rec.map_err(|e| AnnotateError::MalformedRow { line, reason: e.to_string() })?;
            let sources = raw.source_mask.parse().map_err(|_| AnnotateError::MalformedRow {
                line,
                reason: format!("bad source mask {:?}", raw.source_mask),
            })?;
            Ok(AnnotationRecord {
                sample_id: raw.sample_id,
                activity: raw.activity,
                kcal_per_hour: raw.kcal_per_hour,
                fluctuation: raw.fluctuation,
                sources,
            })
        })
        .collect()
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, AnnotateError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| AnnotateError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_annotations(file)
}
