//! Experiment driver: train/test splits, metrics, methods and repeated
//! evaluation.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{
    fit_hybrid, fit_sectioned, predict, predict_sectioned, rfid_midpoint, HybridModel,
    SectionPartition, SectionedModel, SectioningMode,
};
use crate::io::load_fingerprints;
use crate::model::{Axis, FingerprintDataset, FingerprintRecord, Position};
use crate::penalty::PowerPenalty;
use crate::sim::{generate_corridor_dataset, observe_rfid_section, stream_rng, CorridorConfig};
use crate::solver::SolverConfig;

/// Base stream id for the per-repetition split generators. Simulator
/// streams use the low 63 bits, so these never collide.
pub const SPLIT_STREAM_BASE: u64 = 1 << 63;

/// Number of training records for `m` records at `fraction`.
pub fn train_size(m: usize, fraction: f64) -> usize {
    ((fraction * m as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Random partition into a training set of `⌈fraction·M⌉` records and a
/// test set with the rest. Both keep the original record order.
pub fn split_train_test<R: RngCore>(
    dataset: &FingerprintDataset,
    fraction: f64,
    rng: &mut R,
) -> Result<(FingerprintDataset, FingerprintDataset)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} not in (0, 1]")));
    }
    let m = dataset.len();
    let k = train_size(m, fraction);
    if k == 0 {
        return Err(Error::invalid("training set would be empty"));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let (train, test) = idx.split_at_mut(k);
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(train), dataset.subset(test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mse,
    Mae,
}

impl Metric {
    /// Mean of the squared or absolute errors.
    pub fn aggregate(self, errors: &[f64]) -> f64 {
        let sum: f64 = match self {
            Metric::Mse => errors.iter().map(|e| e * e).sum(),
            Metric::Mae => errors.iter().map(|e| e.abs()).sum(),
        };
        sum / errors.len() as f64
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Mse => "mse",
            Metric::Mae => "mae",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Metric::Mse),
            "mae" => Ok(Metric::Mae),
            _ => Err(Error::invalid(format!("unknown metric {s:?}"))),
        }
    }
}

/// A localization method under test.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Method {
    /// One hybrid model for the whole corridor.
    Global,
    /// Section read off the global estimate, then a per-section model.
    TwoLevel,
    /// Section observed from RFID tags, then a per-section model.
    RfidOracle,
    /// Section observed from RFID tags, position is its midpoint.
    RfidMidpoint,
    /// A single technology's own estimate.
    Individual(String),
    /// Every technology individually.
    AllIndividual,
}

impl Method {
    pub fn uses_sections(&self) -> bool {
        matches!(self, Method::TwoLevel | Method::RfidOracle | Method::RfidMidpoint)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Global => f.write_str("global"),
            Method::TwoLevel => f.write_str("two_level"),
            Method::RfidOracle => f.write_str("rfid_oracle"),
            Method::RfidMidpoint => f.write_str("rfid_midpoint"),
            Method::Individual(t) => write!(f, "individual:{t}"),
            Method::AllIndividual => f.write_str("individual"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Method::Global),
            "two_level" => Ok(Method::TwoLevel),
            "rfid_oracle" => Ok(Method::RfidOracle),
            "rfid_midpoint" => Ok(Method::RfidMidpoint),
            "individual" => Ok(Method::AllIndividual),
            _ => match s.strip_prefix("individual:") {
                Some(t) if !t.is_empty() => Ok(Method::Individual(t.to_string())),
                _ => Err(Error::invalid(format!("unknown method {s:?}"))),
            },
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A fitted method, ready to localize records.
#[derive(Debug, Clone)]
pub enum Predictor {
    Hybrid(HybridModel),
    Sectioned(SectionedModel),
    Midpoint(SectionPartition),
    Individual(usize),
}

impl Predictor {
    /// Position estimate for a record. RFID-based predictors read the
    /// section from the record's true position.
    pub fn predict(&self, record: &FingerprintRecord) -> Result<Position> {
        match self {
            Predictor::Hybrid(m) => predict(m, &record.estimates),
            Predictor::Sectioned(m) => {
                let s = match m.mode {
                    SectioningMode::RfidOracle => Some(observe_rfid_section(&m.partition, &record.true_position)?),
                    SectioningMode::TwoLevel => None,
                };
                predict_sectioned(m, &record.estimates, s)
            }
            Predictor::Midpoint(p) => rfid_midpoint(p, observe_rfid_section(p, &record.true_position)?),
            Predictor::Individual(i) => record
                .estimates
                .get(*i)
                .copied()
                .ok_or_else(|| Error::invalid(format!("no technology {i}"))),
        }
    }

    /// Flags raised while fitting.
    pub fn flags(&self) -> Vec<String> {
        match self {
            Predictor::Hybrid(m) => m.flags.clone(),
            Predictor::Sectioned(m) => {
                let mut f = m.global.flags.clone();
                f.extend(m.flags.iter().cloned());
                f
            }
            _ => Vec::new(),
        }
    }

    /// Fitted x-axis weights, where the method has any.
    pub fn alpha_x(&self) -> Vec<Vec<f64>> {
        match self {
            Predictor::Hybrid(m) => vec![m.weights.x.as_slice().to_vec()],
            Predictor::Sectioned(m) => m.sections.iter().map(|s| s.model.weights.x.as_slice().to_vec()).collect(),
            _ => Vec::new(),
        }
    }
}

/// Metric of `predictor` on `test`, using the x coordinate only.
pub fn evaluate(predictor: &Predictor, test: &FingerprintDataset, metric: Metric) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    let errors = test
        .records()
        .iter()
        .map(|r| Ok(predictor.predict(r)?.x - r.true_position.x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(metric.aggregate(&errors))
}

/// Fits `method` with `sections` equal sections over `[0, length]` on the
/// x axis. `Method::AllIndividual` must be expanded by the caller.
pub fn fit_method(
    method: &Method,
    sections: usize,
    length: f64,
    train: &FingerprintDataset,
    penalty: PowerPenalty,
    cfg: &SolverConfig,
) -> Result<Predictor> {
    let partition = || SectionPartition::uniform(Axis::X, length, sections);
    match method {
        Method::Global => Ok(Predictor::Hybrid(fit_hybrid(train, penalty, cfg)?)),
        Method::TwoLevel => Ok(Predictor::Sectioned(fit_sectioned(
            train,
            &partition()?,
            penalty,
            cfg,
            SectioningMode::TwoLevel,
        )?)),
        Method::RfidOracle => Ok(Predictor::Sectioned(fit_sectioned(
            train,
            &partition()?,
            penalty,
            cfg,
            SectioningMode::RfidOracle,
        )?)),
        Method::RfidMidpoint => Ok(Predictor::Midpoint(partition()?)),
        Method::Individual(name) => train
            .technologies()
            .iter()
            .position(|t| t == name)
            .map(Predictor::Individual)
            .ok_or_else(|| Error::invalid(format!("unknown technology {name:?}"))),
        Method::AllIndividual => Err(Error::invalid("expand `individual` before fitting")),
    }
}

/// Where an experiment gets its fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// A fingerprint CSV, relative paths resolved against the config file.
    File(PathBuf),
    /// A simulated corridor. Its seed is replaced by the experiment seed.
    Simulate(CorridorConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(s) => vec![*s],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_penalty() -> PowerPenalty {
    PowerPenalty::mse()
}

fn default_sections() -> OneOrMany {
    OneOrMany::One(1)
}

fn default_methods() -> Vec<Method> {
    vec![Method::Global, Method::AllIndividual]
}

fn default_fraction() -> f64 {
    0.7
}

fn default_repetitions() -> usize {
    1000
}

fn default_metric() -> Metric {
    Metric::Mse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_penalty", with = "penalty_str")]
    pub penalty: PowerPenalty,
    /// Section counts to sweep for the sectioned methods.
    #[serde(default = "default_sections")]
    pub sections: OneOrMany,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_fraction")]
    pub split_fraction: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default)]
    pub seed: u64,
    /// Extra rows restricted to test points with true x at most each value.
    #[serde(default)]
    pub distance_ranges: Vec<f64>,
    /// Corridor length for sectioning. Defaults to the simulator length,
    /// or the largest true x of a file dataset.
    #[serde(default)]
    pub corridor_length: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<u64>,
}

mod penalty_str {
    use super::PowerPenalty;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &PowerPenalty, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(p)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PowerPenalty, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        ExperimentConfig {
            dataset,
            penalty: default_penalty(),
            sections: default_sections(),
            methods: default_methods(),
            split_fraction: default_fraction(),
            repetitions: default_repetitions(),
            metric: default_metric(),
            seed: 0,
            distance_ranges: Vec::new(),
            corridor_length: None,
            max_iter: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction <= 1.0) {
            return Err(Error::invalid("split_fraction must be in (0, 1]"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        let s = self.sections.to_vec();
        if s.is_empty() || s.contains(&0) {
            return Err(Error::invalid("section counts must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods configured"));
        }
        if self.distance_ranges.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::invalid("distance ranges must be positive"));
        }
        if let Some(l) = self.corridor_length {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid("corridor_length must be positive"));
            }
        }
        Ok(())
    }

    /// Parses a config. Relative file paths are taken relative to `base`.
    pub fn from_json(s: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(s)?;
        if let (DatasetSource::File(p), Some(base)) = (&mut cfg.dataset, base) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&s, path.parent())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iter: self.max_iter,
            ..SolverConfig::default()
        }
    }
}

/// Fingerprints and corridor length for an experiment.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(FingerprintDataset, f64)> {
    let (ds, natural) = match &cfg.dataset {
        DatasetSource::File(p) => {
            let ds = load_fingerprints(p)?;
            let max_x = ds.records().iter().map(|r| r.true_position.x).fold(0.0, f64::max);
            (ds, max_x)
        }
        DatasetSource::Simulate(c) => {
            let c = CorridorConfig { seed: cfg.seed, ..c.clone() };
            (generate_corridor_dataset(&c)?, c.length)
        }
    };
    let length = cfg.corridor_length.unwrap_or(natural);
    if !(length > 0.0) {
        return Err(Error::invalid("corridor length must be positive"));
    }
    Ok((ds, length))
}

/// One `(method, sections)` combination of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arm {
    pub method: Method,
    pub sections: usize,
}

impl Arm {
    pub fn label(&self) -> String {
        self.method.to_string()
    }
}

/// Expands the configured methods and section counts. Methods that ignore
/// sectioning appear once with one section.
pub fn arms(cfg: &ExperimentConfig, technologies: &[String]) -> Vec<Arm> {
    let sections = cfg.sections.to_vec();
    let mut out: Vec<Arm> = Vec::new();
    let mut push = |a: Arm| {
        if !out.contains(&a) {
            out.push(a);
        }
    };
    for m in &cfg.methods {
        match m {
            Method::AllIndividual => {
                for t in technologies {
                    push(Arm { method: Method::Individual(t.clone()), sections: 1 });
                }
            }
            m if m.uses_sections() => {
                for &s in &sections {
                    push(Arm { method: m.clone(), sections: s });
                }
            }
            m => push(Arm { method: m.clone(), sections: 1 }),
        }
    }
    out
}

/// Metric values of one repetition, indexed `[arm][range]` where range 0
/// is the full test set and range `r + 1` is `distance_ranges[r]`.
/// Missing entries had no test points in range.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionResult {
    pub values: Vec<Vec<Option<f64>>>,
    pub flags: Vec<Vec<String>>,
    pub alpha_x: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub sections: usize,
    pub metric: String,
    pub value: f64,
    pub flags: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub arms: Vec<Arm>,
    pub rows: Vec<ReportRow>,
    /// `per_repetition[rep].values[arm][range]`.
    pub per_repetition: Vec<RepetitionResult>,
    pub distance_ranges: Vec<f64>,
    pub metric: Metric,
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Per-repetition values as `rep,method,sections,range,value`.
    pub fn write_repetitions_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wtr.write_record(["rep", "method", "sections", "range", "value"])?;
        for (rep, r) in self.per_repetition.iter().enumerate() {
            for (a, arm) in self.arms.iter().enumerate() {
                for (k, v) in r.values[a].iter().enumerate() {
                    if let Some(v) = v {
                        let range = if k == 0 { "all".to_string() } else { format!("x<={}", self.distance_ranges[k - 1]) };
                        wtr.write_record([rep.to_string(), arm.label(), arm.sections.to_string(), range, v.to_string()])?;
                    }
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Mean full-range value of an arm.
    pub fn mean(&self, method: &Method, sections: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method.to_string() && r.sections == sections && !r.flags.contains("x<="))
            .map(|r| r.value)
    }

    /// Full-range values of an arm, one per repetition.
    pub fn values(&self, method: &Method, sections: usize) -> Option<Vec<f64>> {
        let a = self.arms.iter().position(|a| &a.method == method && a.sections == sections)?;
        Some(self.per_repetition.iter().filter_map(|r| r.values[a][0]).collect())
    }
}

fn run_repetition(
    cfg: &ExperimentConfig,
    dataset: &FingerprintDataset,
    length: f64,
    arms: &[Arm],
    rep: usize,
) -> Result<RepetitionResult> {
    let mut rng = stream_rng(cfg.seed, SPLIT_STREAM_BASE | rep as u64);
    let (train, test) = split_train_test(dataset, cfg.split_fraction, &mut rng)?;
    let eval_set = if test.is_empty() { &train } else { &test };
    let ranged: Vec<FingerprintDataset> = cfg
        .distance_ranges
        .iter()
        .map(|&r| eval_set.filter(|rec| rec.true_position.x <= r))
        .collect();
    let solver = cfg.solver_config();
    let mut values = Vec::with_capacity(arms.len());
    let mut flags = Vec::with_capacity(arms.len());
    let mut alpha_x = Vec::with_capacity(arms.len());
    for arm in arms {
        let pred = fit_method(&arm.method, arm.sections, length, &train, cfg.penalty, &solver)?;
        let mut v = vec![Some(evaluate(&pred, eval_set, cfg.metric)?)];
        for sub in &ranged {
            v.push(if sub.is_empty() { None } else { Some(evaluate(&pred, sub, cfg.metric)?) });
        }
        values.push(v);
        flags.push(pred.flags());
        alpha_x.push(pred.alpha_x());
    }
    Ok(RepetitionResult { values, flags, alpha_x })
}

fn format_alpha(alpha: &[Vec<f64>]) -> String {
    alpha
        .iter()
        .map(|a| a.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("|")
}

/// Runs every repetition and aggregates the mean metric per arm and range.
/// Repetitions run in parallel; the result does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let (dataset, length) = load_dataset(cfg)?;
    let arms = arms(cfg, dataset.technologies());
    // With the whole dataset used for training every repetition is identical.
    let reps = if cfg.split_fraction >= 1.0 { 1 } else { cfg.repetitions };
    let per_repetition = (0..reps)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, &dataset, length, &arms, rep))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (a, arm) in arms.iter().enumerate() {
        let mut arm_flags: Vec<String> = Vec::new();
        for r in &per_repetition {
            for f in &r.flags[a] {
                if !arm_flags.contains(f) {
                    arm_flags.push(f.clone());
                }
            }
        }
        if reps < cfg.repetitions {
            arm_flags.push("train=test".to_string());
        }
        let last = per_repetition.last().expect("at least one repetition");
        if !last.alpha_x[a].is_empty() {
            arm_flags.push(format!("alpha_x={}", format_alpha(&last.alpha_x[a])));
        }
        for k in 0..=cfg.distance_ranges.len() {
            let vals: Vec<f64> = per_repetition.iter().filter_map(|r| r.values[a][k]).collect();
            if vals.is_empty() {
                continue;
            }
            let mut flags = Vec::new();
            if k > 0 {
                flags.push(format!("x<={}", cfg.distance_ranges[k - 1]));
            }
            if vals.len() < per_repetition.len() {
                flags.push(format!("reps={}", vals.len()));
            }
            if k == 0 {
                flags.extend(arm_flags.iter().cloned());
            }
            rows.push(ReportRow {
                method: arm.label(),
                sections: arm.sections,
                metric: cfg.metric.to_string(),
                value: vals.iter().sum::<f64>() / vals.len() as f64,
                flags: flags.join(";"),
            });
        }
    }
    Ok(EvalReport {
        arms,
        rows,
        per_repetition,
        distance_ranges: cfg.distance_ranges.clone(),
        metric: cfg.metric,
    })
}
