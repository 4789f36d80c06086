//! Command-line surface: synth → annotate → split → predict → eval, plus stats.
//!
//! Every command writes its output file atomically (temp file in the target
//! directory, then rename) and returns the text it prints on stdout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::annotate::{
    annotation_row, category_annotation, load_annotations, load_compendium, sample_annotations, AnnotationConfig,
    AnnotationRecord, CategorySources, ANNOTATION_HEADER,
};
use crate::evalkit::{
    baseline_average, baseline_random, build_splits, nll, parse_ratio, EvalReport, SplitKind, SplitManifest,
    REPORT_HEADER,
};
use crate::heartrate::{activity_hourly_kcal, load_study, KeytelCoefficients, WeightUnit};
use crate::kinetics::{energy_report, sequence_hourly_kcal, ConversionConfig, ConversionMode, EnergyEstimate};
use crate::pose::{parse_skeleton_file, synth_sequence, to_record_line, BodyModel, SkeletonSequence, SynthParams};
use crate::predictor::{
    predict_windowed, skeleton_forward_predictor, SkeletonForwardPredictor, WindowOutput, WindowSpec,
    DISTRIBUTION_PREDICTION_HEADER, SCALAR_PREDICTION_HEADER,
};
use crate::softlabel::{decode, CalorieDistribution, SoftLabelCodec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "burnkit", version, about = "Caloric expenditure annotation and evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic skeleton corpus with graded motion intensity.
    Synth(SynthArgs),
    /// Produce category- and sample-level kcal/hour annotations.
    Annotate(AnnotateArgs),
    /// Build the train / test_known / test_new manifest.
    Split(SplitArgs),
    /// Run the skeleton forward predictor over a skeleton file.
    Predict(PredictArgs),
    /// Score predictions against annotations on the manifest's test splits.
    Eval(EvalArgs),
    /// Min / max / mean of an annotation file, overall and per activity.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub activities: usize,
    /// Samples per activity.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 25)]
    pub joints: usize,
    /// Motion amplitude (m) of the calmest activity.
    #[arg(long, default_value_t = 0.10)]
    pub amp_min: f64,
    /// Motion amplitude (m) of the most intense activity.
    #[arg(long, default_value_t = 0.36)]
    pub amp_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub freq: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub skeletons: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub compendium: Option<PathBuf>,
    #[arg(long)]
    pub body_model: Option<PathBuf>,
    #[arg(long)]
    pub hr_study: Option<PathBuf>,
    /// Unit of the `weight` column in the heart-rate study.
    #[arg(long, default_value = "kg", value_parser = ["kg", "lb"])]
    pub hr_weight_unit: String,
    #[arg(long, default_value_t = 100.0)]
    pub f_max: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub l_max: f64,
    #[arg(long, default_value = "dimensional", value_parser = ["dimensional", "paper-literal"])]
    pub mode: String,
    /// Also write the per-sample movement energy report here.
    #[arg(long)]
    pub energy_report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated held-out activities.
    #[arg(long, default_value = "")]
    pub heldout: String,
    #[arg(long, default_value = "7:3")]
    pub ratio: String,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub skeletons: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub body_model: Option<PathBuf>,
    #[arg(long, default_value = "dimensional", value_parser = ["dimensional", "paper-literal"])]
    pub mode: String,
    /// Evaluate on sliding windows of this many frames and average.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 6)]
    pub overlap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Add average and random baseline rows.
    #[arg(long)]
    pub baselines: bool,
    /// Add one row per split and activity.
    #[arg(long)]
    pub per_activity: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub bins: usize,
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Annotate(a) => cmd_annotate(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Stats(a) => cmd_stats(&a),
    }
}

/// Writes `contents` to a temp file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Internal(format!("cannot create temp file in {}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.flush())
        .map_err(|e| CliError::Internal(format!("write failed: {e}")))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        // tempfile creates 0600 files; outputs are ordinary data files.
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644))
            .map_err(|e| CliError::Internal(format!("cannot set permissions: {e}")))?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::Internal(format!("cannot move output to {}: {e}", path.display())))?;
    Ok(())
}

fn parse_mode(s: &str) -> Result<ConversionConfig, CliError> {
    Ok(ConversionConfig::with_mode(s.parse::<ConversionMode>().map_err(input)?))
}

fn load_body_model(path: Option<&Path>, seqs: &[SkeletonSequence]) -> Result<BodyModel, CliError> {
    match path {
        Some(p) => BodyModel::load(p).map_err(input),
        None => BodyModel::default_for_joints(seqs.first().map_or(25, |s| s.joint_count())).map_err(input),
    }
}

fn load_skeletons(path: &Path) -> Result<Vec<SkeletonSequence>, CliError> {
    let seqs = parse_skeleton_file(path).map_err(input)?;
    if seqs.is_empty() {
        return Err(CliError::Input(format!("{}: no skeleton records", path.display())));
    }
    Ok(seqs)
}

/// Amplitude of activity `k` of `n`, linear between the two tiers.
pub fn tier_amplitude(k: usize, n: usize, amp_min: f64, amp_max: f64) -> f64 {
    if n <= 1 {
        amp_min
    } else {
        amp_min + (amp_max - amp_min) * k as f64 / (n - 1) as f64
    }
}

pub fn synth_activity_name(k: usize) -> String {
    format!("act{k:02}")
}

/// Synthetic corpus: activity `k` oscillates at its tier amplitude, and each
/// sample scales amplitude and frequency by factors in [0.8, 1.2] drawn from a
/// ChaCha8 stream seeded with `seed`.
pub fn synth_corpus(a: &SynthArgs) -> Result<Vec<SkeletonSequence>, CliError> {
    if a.activities == 0 || a.samples == 0 {
        return Err(CliError::Input("activities and samples must be >= 1".into()));
    }
    if !(a.amp_min >= 0.0 && a.amp_max >= a.amp_min) {
        return Err(CliError::Input(format!("need 0 <= amp-min <= amp-max, got {} / {}", a.amp_min, a.amp_max)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut out = Vec::with_capacity(a.activities * a.samples);
    for k in 0..a.activities {
        let tier = tier_amplitude(k, a.activities, a.amp_min, a.amp_max);
        let activity = synth_activity_name(k);
        for i in 0..a.samples {
            let params = SynthParams {
                amplitude: tier * rng.gen_range(0.8..1.2),
                freq: a.freq * rng.gen_range(0.8..1.2),
                fps: a.fps,
                frames: a.frames,
                joints: a.joints,
                seed: rng.gen(),
            };
            let seq = synth_sequence(&params).map_err(input)?;
            out.push(seq.relabel(format!("{activity}-s{i:03}"), activity.clone()));
        }
    }
    Ok(out)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<String, CliError> {
    let corpus = synth_corpus(a)?;
    let mut text = String::new();
    for seq in &corpus {
        text.push_str(&to_record_line(seq));
        text.push('\n');
    }
    write_atomic(&a.out, &text)?;
    Ok(format!("wrote {} sequences across {} activities\n", corpus.len(), a.activities))
}

/// Per-activity summary of generated sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorySummary {
    pub activity: String,
    pub n: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// In-memory result of the annotation pipeline.
#[derive(Debug, Clone)]
pub struct AnnotationRun {
    pub estimates: Vec<EnergyEstimate>,
    /// Rows in skeleton-file order.
    pub rows: Vec<String>,
    pub samples: Vec<crate::annotate::SampleAnnotation>,
    pub categories: Vec<crate::annotate::CategoryAnnotation>,
    pub summary: Vec<CategorySummary>,
}

/// Category label sources per activity:
/// heart-rate data present → mean of heart rate, skeleton mean and compendium (if any);
/// otherwise compendium alone if present; otherwise the skeleton mean alone.
pub fn annotate_sequences(
    seqs: &[SkeletonSequence],
    model: &BodyModel,
    conv: &ConversionConfig,
    compendium: Option<&crate::annotate::CompendiumTable>,
    heart_rate: &BTreeMap<String, f64>,
    config: &AnnotationConfig,
) -> Result<AnnotationRun, CliError> {
    let estimates = seqs
        .iter()
        .map(|s| sequence_hourly_kcal(s, model, conv))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;

    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, e) in estimates.iter().enumerate() {
        let g = groups.entry(e.activity.as_str()).or_insert_with(|| {
            order.push(e.activity.as_str());
            Vec::new()
        });
        g.push(i);
    }

    let mut by_index: Vec<Option<(crate::annotate::SampleAnnotation, crate::annotate::SourceSet)>> =
        vec![None; estimates.len()];
    let mut categories = Vec::new();
    let mut summary = Vec::new();
    for activity in order {
        let idx = &groups[activity];
        let skeleton_mean = idx.iter().map(|&i| estimates[i].hourly_kcal).sum::<f64>() / idx.len() as f64;
        let comp = compendium.and_then(|c| c.get(activity));
        let sources = match heart_rate.get(activity) {
            Some(&hr) => CategorySources { compendium: comp, heart_rate: Some(hr), skeleton_mean: Some(skeleton_mean) },
            None if comp.is_some() => CategorySources { compendium: comp, ..Default::default() },
            None => CategorySources { skeleton_mean: Some(skeleton_mean), ..Default::default() },
        };
        let cat = category_annotation(activity, &sources).map_err(input)?;
        let energies: Vec<(String, f64)> =
            idx.iter().map(|&i| (estimates[i].sample_id.clone(), estimates[i].hourly_kcal)).collect();
        let samples = sample_annotations(activity, cat.l_cat, &energies, config)
            .map_err(|e| CliError::Input(format!("activity {activity:?}: {e}")))?;
        let labels: Vec<f64> = samples.iter().map(|s| s.l_sample).collect();
        summary.push(CategorySummary {
            activity: activity.to_string(),
            n: labels.len(),
            min: labels.iter().copied().fold(f64::INFINITY, f64::min),
            mean: labels.iter().sum::<f64>() / labels.len() as f64,
            max: labels.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        for (&i, s) in idx.iter().zip(samples) {
            by_index[i] = Some((s, cat.sources));
        }
        categories.push(cat);
    }
    let (samples, rows): (Vec<_>, Vec<_>) = by_index
        .into_iter()
        .map(|o| {
            let (s, src) = o.expect("every sample belongs to a group");
            let row = annotation_row(&s, src);
            (s, row)
        })
        .unzip();
    Ok(AnnotationRun { estimates, rows, samples, categories, summary })
}

pub fn cmd_annotate(a: &AnnotateArgs) -> Result<String, CliError> {
    let seqs = load_skeletons(&a.skeletons)?;
    let model = load_body_model(a.body_model.as_deref(), &seqs)?;
    let conv = parse_mode(&a.mode)?;
    let config = AnnotationConfig::new(a.f_max, a.l_max).map_err(input)?;
    let compendium = a.compendium.as_deref().map(load_compendium).transpose().map_err(input)?;
    let heart_rate = match &a.hr_study {
        Some(p) => {
            let unit: WeightUnit = a.hr_weight_unit.parse().map_err(input)?;
            let rows = load_study(p, unit).map_err(input)?;
            activity_hourly_kcal(&rows, &KeytelCoefficients::default()).map_err(input)?
        }
        None => BTreeMap::new(),
    };
    let run = annotate_sequences(&seqs, &model, &conv, compendium.as_ref(), &heart_rate, &config)?;

    let mut text = String::from(ANNOTATION_HEADER);
    text.push('\n');
    for row in &run.rows {
        text.push_str(row);
        text.push('\n');
    }
    if let Some(p) = &a.energy_report {
        write_atomic(p, &energy_report(&run.estimates))?;
    }
    write_atomic(&a.out, &text)?;

    let mut out = String::new();
    for (c, s) in run.categories.iter().zip(&run.summary) {
        out.push_str(&format!(
            "{}: n={} l_cat={:.1} sources={} min={:.1} mean={:.1} max={:.1}\n",
            s.activity, s.n, c.l_cat, c.sources, s.min, s.mean, s.max
        ));
    }
    Ok(out)
}

fn parse_heldout(s: &str) -> BTreeSet<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

pub fn cmd_split(a: &SplitArgs) -> Result<String, CliError> {
    let records = load_annotations(&a.annotations).map_err(input)?;
    let samples: Vec<(String, String)> = records.iter().map(|r| (r.sample_id.clone(), r.activity.clone())).collect();
    let ratio = parse_ratio(&a.ratio).map_err(input)?;
    let manifest = build_splits(&samples, &parse_heldout(&a.heldout), a.seed, ratio).map_err(input)?;
    write_atomic(&a.out, &manifest.to_text())?;
    Ok(format!(
        "train={} test_known={} test_new={}\n",
        manifest.train.len(),
        manifest.test_known.len(),
        manifest.test_new.len()
    ))
}

pub fn cmd_predict(a: &PredictArgs) -> Result<String, CliError> {
    let seqs = load_skeletons(&a.skeletons)?;
    let model = load_body_model(a.body_model.as_deref(), &seqs)?;
    let conv = parse_mode(&a.mode)?;
    let spec = a.window.map(|w| WindowSpec::new(w, a.overlap)).transpose().map_err(input)?;
    let predictor = SkeletonForwardPredictor { model, conversion: conv };
    let mut text = format!("{SCALAR_PREDICTION_HEADER}\n");
    for seq in &seqs {
        let kcal = match &spec {
            None => skeleton_forward_predictor(seq, &predictor.model, &conv).map_err(input)?,
            Some(spec) => match predict_windowed(&predictor, seq, spec).map_err(input)? {
                WindowOutput::Scalar(v) => v,
                WindowOutput::Distribution(_) => unreachable!("skeleton predictor emits scalars"),
            },
        };
        text.push_str(&format!("{},{}\n", seq.sample_id(), kcal));
    }
    write_atomic(&a.out, &text)?;
    Ok(format!("wrote {} predictions\n", seqs.len()))
}

/// Parsed prediction file.
#[derive(Debug, Clone)]
pub enum Predictions {
    Scalar(HashMap<String, f64>),
    Distribution(HashMap<String, CalorieDistribution>),
}

pub fn parse_predictions(text: &str, n_bins: usize) -> Result<Predictions, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    let bad = |line: usize, reason: &str| CliError::Input(format!("predictions line {}: {reason}", line + 1));
    if header == SCALAR_PREDICTION_HEADER {
        let mut map = HashMap::new();
        for (i, l) in lines {
            let (id, v) = l.split_once(',').ok_or_else(|| bad(i, "expected 2 columns"))?;
            let v: f64 = v.trim().parse().map_err(|_| bad(i, "bad number"))?;
            if map.insert(id.trim().to_string(), v).is_some() {
                return Err(bad(i, "duplicate sample id"));
            }
        }
        Ok(Predictions::Scalar(map))
    } else if header == DISTRIBUTION_PREDICTION_HEADER {
        let mut raw: HashMap<String, Vec<f64>> = HashMap::new();
        for (i, l) in lines {
            let cols: Vec<&str> = l.split(',').map(str::trim).collect();
            let [id, bin, p] = cols[..] else { return Err(bad(i, "expected 3 columns")) };
            let bin: usize = bin.parse().map_err(|_| bad(i, "bad bin"))?;
            let p: f64 = p.parse().map_err(|_| bad(i, "bad probability"))?;
            if bin >= n_bins {
                return Err(bad(i, "bin outside codec range"));
            }
            raw.entry(id.to_string()).or_insert_with(|| vec![0.0; n_bins])[bin] = p;
        }
        let mut map = HashMap::new();
        for (id, probs) in raw {
            let d = CalorieDistribution::new(probs).map_err(|e| CliError::Input(format!("sample {id}: {e}")))?;
            map.insert(id, d);
        }
        Ok(Predictions::Distribution(map))
    } else {
        Err(CliError::Input(format!(
            "unrecognized prediction header {header:?}; expected {SCALAR_PREDICTION_HEADER} or {DISTRIBUTION_PREDICTION_HEADER}"
        )))
    }
}

/// Distribution prediction file text for `(sample_id, distribution)` pairs.
pub fn distribution_predictions_text(items: &[(String, CalorieDistribution)]) -> String {
    let mut s = format!("{DISTRIBUTION_PREDICTION_HEADER}\n");
    for (id, d) in items {
        for (bin, p) in d.probs().iter().enumerate() {
            s.push_str(&format!("{id},{bin},{p}\n"));
        }
    }
    s
}

/// Scores predictions on the manifest's test splits.
///
/// Rows: `<split>` for each non-empty test split, `<split>:average` and
/// `<split>:random` with baselines, and `<split>/<activity>` per activity.
pub fn evaluate(
    annotations: &[AnnotationRecord],
    predictions: &Predictions,
    manifest: &SplitManifest,
    codec: &SoftLabelCodec,
    baselines: bool,
    per_activity: bool,
    seed: u64,
) -> Result<Vec<EvalReport>, CliError> {
    let gt: HashMap<&str, &AnnotationRecord> = annotations.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let has_pred = |id: &str| match predictions {
        Predictions::Scalar(m) => m.contains_key(id),
        Predictions::Distribution(m) => m.contains_key(id),
    };
    let test_ids: Vec<&str> = manifest
        .assignments()
        .iter()
        .filter(|(_, k)| *k != SplitKind::Train)
        .map(|(id, _)| id.as_str())
        .collect();
    if let Some(id) = manifest.assignments().iter().map(|(id, _)| id.as_str()).find(|id| !gt.contains_key(id)) {
        return Err(CliError::Input(format!("manifest sample {id:?} has no annotation")));
    }
    let missing: Vec<&str> = test_ids.iter().copied().filter(|id| !has_pred(id)).collect();
    if !missing.is_empty() {
        return Err(CliError::Input(format!("missing predictions for: {}", missing.join(","))));
    }

    let train_gts: Vec<f64> = manifest
        .assignments()
        .iter()
        .filter(|(_, k)| *k == SplitKind::Train)
        .map(|(id, _)| gt[id.as_str()].kcal_per_hour)
        .collect();
    let average = if baselines { Some(baseline_average(&train_gts).map_err(input)?) } else { None };
    let mut random = if baselines {
        Some(baseline_random(seed, 0.0, codec.max_label()).map_err(input)?)
    } else {
        None
    };

    let score = |name: String, ids: &[&str]| -> Result<EvalReport, CliError> {
        let gts: Vec<f64> = ids.iter().map(|id| gt[id].kcal_per_hour).collect();
        match predictions {
            Predictions::Scalar(m) => {
                let preds: Vec<f64> = ids.iter().map(|id| m[*id]).collect();
                EvalReport::from_scalars(name, &preds, &gts).map_err(input)
            }
            Predictions::Distribution(m) => {
                let dists: Vec<CalorieDistribution> = ids.iter().map(|id| m[*id].clone()).collect();
                let preds: Vec<f64> = dists.iter().map(|d| decode(d, codec)).collect();
                let mut r = EvalReport::from_scalars(name, &preds, &gts).map_err(input)?;
                r.nll = Some(nll(&dists, &gts, codec).map_err(input)?);
                Ok(r)
            }
        }
    };

    let mut reports = Vec::new();
    for kind in [SplitKind::TestKnown, SplitKind::TestNew] {
        let ids: Vec<&str> = manifest
            .assignments()
            .iter()
            .filter(|(_, k)| *k == kind)
            .map(|(id, _)| id.as_str())
            .collect();
        if ids.is_empty() {
            continue;
        }
        reports.push(score(kind.as_str().to_string(), &ids)?);
        let gts: Vec<f64> = ids.iter().map(|id| gt[id].kcal_per_hour).collect();
        if let Some(avg) = &average {
            let preds = vec![avg.predict(); ids.len()];
            reports.push(EvalReport::from_scalars(format!("{}:average", kind.as_str()), &preds, &gts).map_err(input)?);
        }
        if let Some(rnd) = random.as_mut() {
            let preds = rnd.predictions(ids.len());
            reports.push(EvalReport::from_scalars(format!("{}:random", kind.as_str()), &preds, &gts).map_err(input)?);
        }
        if per_activity {
            let mut order: Vec<&str> = Vec::new();
            let mut groups: HashMap<&str, Vec<&str>> = HashMap::new();
            for id in &ids {
                let act = gt[id].activity.as_str();
                groups
                    .entry(act)
                    .or_insert_with(|| {
                        order.push(act);
                        Vec::new()
                    })
                    .push(id);
            }
            for act in order {
                reports.push(score(format!("{}/{act}", kind.as_str()), &groups[act])?);
            }
        }
    }
    Ok(reports)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let annotations = load_annotations(&a.annotations).map_err(input)?;
    let manifest = SplitManifest::load(&a.manifest).map_err(input)?;
    let codec = SoftLabelCodec::new(a.bins, 1.0, a.sigma).map_err(input)?;
    let text = std::fs::read_to_string(&a.predictions)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.predictions.display())))?;
    let predictions = parse_predictions(&text, codec.n_bins)?;
    let reports = evaluate(&annotations, &predictions, &manifest, &codec, a.baselines, a.per_activity, a.seed)?;
    let mut out = format!("{REPORT_HEADER}\n");
    for r in &reports {
        out.push_str(&r.row());
        out.push('\n');
    }
    write_atomic(&a.out, &out)?;
    Ok(out)
}

/// `scope,n,min,max,mean` rows: `all` first, then each activity in file order.
pub fn annotation_stats(records: &[AnnotationRecord]) -> Result<Vec<CategorySummary>, CliError> {
    if records.is_empty() {
        return Err(CliError::Input("annotation file has no rows".into()));
    }
    let summarize = |scope: &str, vals: &[f64]| CategorySummary {
        activity: scope.to_string(),
        n: vals.len(),
        min: vals.iter().copied().fold(f64::INFINITY, f64::min),
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: vals.iter().sum::<f64>() / vals.len() as f64,
    };
    let all: Vec<f64> = records.iter().map(|r| r.kcal_per_hour).collect();
    let mut out = vec![summarize("all", &all)];
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<f64>> = HashMap::new();
    for r in records {
        groups
            .entry(r.activity.as_str())
            .or_insert_with(|| {
                order.push(r.activity.as_str());
                Vec::new()
            })
            .push(r.kcal_per_hour);
    }
    out.extend(order.into_iter().map(|a| summarize(a, &groups[a])));
    Ok(out)
}

pub fn cmd_stats(a: &StatsArgs) -> Result<String, CliError> {
    let records = load_annotations(&a.annotations).map_err(input)?;
    let stats = annotation_stats(&records)?;
    let mut out = String::from("scope,n,min,max,mean\n");
    for s in &stats {
        out.push_str(&format!("{},{},{:.1},{:.1},{:.1}\n", s.activity, s.n, s.min, s.max, s.mean));
    }
    if let Some(p) = &a.out {
        write_atomic(p, &out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_amplitudes_are_linear() {
        assert_eq!(tier_amplitude(0, 12, 0.02, 0.13), 0.02);
        assert!((tier_amplitude(11, 12, 0.02, 0.13) - 0.13).abs() < 1e-15);
        assert_eq!(tier_amplitude(0, 1, 0.05, 0.2), 0.05);
    }

    #[test]
    fn heldout_parsing_trims() {
        let h = parse_heldout(" a, b ,,c");
        assert_eq!(h.into_iter().collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert!(parse_heldout("").is_empty());
    }

    #[test]
    fn prediction_file_formats() {
        let Predictions::Scalar(m) = parse_predictions("sample_id,kcal_per_hour\na,1.5\nb,2\n", 10).unwrap() else {
            panic!()
        };
        assert_eq!(m["a"], 1.5);
        let d = CalorieDistribution::delta(4, 2).unwrap();
        let text = distribution_predictions_text(&[("x".into(), d.clone())]);
        let Predictions::Distribution(m) = parse_predictions(&text, 4).unwrap() else { panic!() };
        assert_eq!(m["x"], d);
        assert!(parse_predictions("id,value\n", 4).is_err());
        assert!(parse_predictions(&text, 2).is_err());
    }

    #[test]
    fn stats_of_single_row() {
        let r = AnnotationRecord {
            sample_id: "s".into(),
            activity: "a".into(),
            kcal_per_hour: 300.0,
            fluctuation: 0.0,
            sources: Default::default(),
        };
        let s = annotation_stats(&[r]).unwrap();
        assert_eq!((s[0].min, s[0].max, s[0].mean), (300.0, 300.0, 300.0));
        assert!(annotation_stats(&[]).is_err());
    }
}
