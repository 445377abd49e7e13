//! Evaluation protocols: mixed-speed classification, leave-one-speed-out
//! compositions and the loss-weight sweep.
//!
//! Every ride is z-scored per signal, cut into six bands (one per vehicle)
//! and each band zero-padded to the longest band of the dataset. Rides are the unit of
//! splitting, so the six bands of a ride always land on the same side.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::despawn::{decode, encode_valid, DespawnModel, NormalizationInfo, DEFAULT_BIAS};
use crate::error::{Error, Result};
use crate::features::{extract_features, wpt_features, FeatureVector, MethodTag, StftPlan};
use crate::signal::{
    mean_std, pad_to_length, split_into_bands, zscore, ClassLabel, PairedRecord, Signal, SPEEDS_KMH,
};
use crate::svm::{evaluate, Classifier, Evaluation};
use crate::training::{train, EarlyStop, GuidanceTarget, L1Scaling, LossKind, LossWeights, TrainConfig, TrainOutcome, TrainingSample};
use crate::wavelet::{db4_kernel, fdwt_forward_valid};

pub const N_BANDS: usize = 6;
pub const DEFAULT_REPETITIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// All speeds in training and test, rides split 3:1.
    Task1,
    /// Train on 20/40/60 km/h, test on 80 km/h.
    Loso80,
    /// Test on 20 km/h.
    C1,
    /// Test on 40 km/h.
    C2,
    /// Test on 60 km/h.
    C3,
    /// Every task above, for each loss-weight ratio.
    WeightSweep,
}

impl Task {
    /// Tasks that define a single split, in report order.
    pub const SPLITS: [Task; 5] = [Task::Task1, Task::Loso80, Task::C1, Task::C2, Task::C3];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Task1 => "task1",
            Task::Loso80 => "loso80",
            Task::C1 => "c1",
            Task::C2 => "c2",
            Task::C3 => "c3",
            Task::WeightSweep => "sweep",
        }
    }

    /// Held-out speed of a leave-one-speed-out task.
    pub fn test_speed(self) -> Option<u32> {
        match self {
            Task::Loso80 => Some(80),
            Task::C1 => Some(20),
            Task::C2 => Some(40),
            Task::C3 => Some(60),
            Task::Task1 | Task::WeightSweep => None,
        }
    }

    /// `train speeds → test speeds` for report headers.
    pub fn describe(self) -> String {
        match self.test_speed() {
            Some(t) => {
                let train: Vec<String> = SPEEDS_KMH.iter().filter(|&&s| s != t).map(|s| s.to_string()).collect();
                format!("{} -> {t} km/h", train.join(","))
            }
            None => "20,40,60,80 -> 20,40,60,80 km/h".into(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "task1" => Ok(Task::Task1),
            "loso80" | "loso_80" => Ok(Task::Loso80),
            "c1" => Ok(Task::C1),
            "c2" => Ok(Task::C2),
            "c3" => Ok(Task::C3),
            "sweep" | "weight_sweep" => Ok(Task::WeightSweep),
            other => Err(Error::InvalidConfig(format!("unknown plan {other:?}"))),
        }
    }
}

/// The seven reconstruction:guidance ratios of the sweep.
pub fn sweep_ratios() -> Vec<LossWeights> {
    [(1.0, 0.0), (1.0, 0.1), (1.0, 0.5), (1.0, 1.0), (1.0, 2.0), (1.0, 10.0), (0.0, 1.0)]
        .iter()
        .map(|&(r, g)| LossWeights { w_recon: r, w_guide: g })
        .collect()
}

/// Optimisation settings for the learnable methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub scaling: L1Scaling,
    pub early_stop: Option<EarlyStop>,
    pub initial_bias: f64,
}

impl TrainSettings {
    /// Reduced budget used for desk-scale runs.
    pub fn desk() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            scaling: L1Scaling::Mean,
            early_stop: Some(EarlyStop::default()),
            initial_bias: DEFAULT_BIAS,
        }
    }

    pub fn config(&self, kind: LossKind, weights: LossWeights, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(kind, weights);
        cfg.loss.scaling = self.scaling;
        cfg.epochs = self.epochs;
        cfg.learning_rate = self.learning_rate;
        cfg.early_stop = self.early_stop;
        cfg.seed = seed;
        cfg
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub task: Task,
    pub methods: Vec<MethodTag>,
    /// Guided-loss weights for single tasks; the sweep uses `weight_ratios`.
    pub weights: LossWeights,
    pub weight_ratios: Vec<LossWeights>,
    pub repetitions: usize,
    pub seed: u64,
    pub train: TrainSettings,
    /// Upper bound on worker threads for independent cells.
    pub threads: usize,
}

impl ExperimentPlan {
    pub fn new(task: Task, seed: u64) -> Self {
        let methods = if task == Task::WeightSweep {
            vec![MethodTag::AgAsdf]
        } else {
            MethodTag::ALL.to_vec()
        };
        Self {
            task,
            methods,
            weights: LossWeights::equal(),
            weight_ratios: sweep_ratios(),
            repetitions: DEFAULT_REPETITIONS,
            seed,
            train: TrainSettings::desk(),
            threads: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedBand {
    /// Z-scored acoustic band, zero-padded to the dataset pad length.
    pub acoustic: Vec<f64>,
    pub valid_len: usize,
    pub target: GuidanceTarget,
}

#[derive(Debug, Clone)]
pub struct PreparedRide {
    pub ride_id: String,
    pub class_label: ClassLabel,
    pub speed_kmh: u32,
    pub bands: Vec<PreparedBand>,
}

#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub rides: Vec<PreparedRide>,
    pub pad_length: usize,
    pub depth: usize,
    pub sample_rate_hz: f64,
    raw_stats: Vec<(f64, f64)>,
}

/// Largest depth whose coarsest layer still holds one full-length sample:
/// `floor(log2(pad_length))`.
pub fn depth_for_length(pad_length: usize) -> usize {
    (usize::BITS - 1 - pad_length.leading_zeros()) as usize
}

pub fn prepare(records: &[PairedRecord]) -> Result<PreparedDataset> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rate = records[0].acoustic.sample_rate_hz();
    let mut split = Vec::with_capacity(records.len());
    for r in records {
        if r.acoustic.sample_rate_hz() != rate {
            return Err(Error::InvalidConfig("records disagree on sample rate".into()));
        }
        // Each whole signal is z-scored before splitting, so bands keep their
        // relative loudness within a ride.
        let za = Signal::new(zscore(r.acoustic.samples()), rate, r.acoustic.source_kind())?;
        let zg = Signal::new(zscore(r.acceleration.samples()), rate, r.acceleration.source_kind())?;
        split.push((split_into_bands(&za, N_BANDS)?, split_into_bands(&zg, N_BANDS)?));
    }
    let pad_length = split
        .iter()
        .flat_map(|(a, _)| a.iter().map(|b| b.len()))
        .max()
        .unwrap();
    if pad_length < 2 {
        return Err(Error::TooShort { len: pad_length, required: 2 });
    }
    let depth = depth_for_length(pad_length);
    let mut rides = Vec::with_capacity(records.len());
    let mut raw_stats = Vec::with_capacity(records.len());
    for (r, (ac, acc)) in records.iter().zip(split) {
        let mut bands = Vec::with_capacity(N_BANDS);
        let ride_stats = mean_std(r.acoustic.samples());
        for (a, g) in ac.iter().zip(&acc) {
            let (padded, valid_len) = pad_to_length(a, pad_length)?;
            let mut zg = g.samples().to_vec();
            zg.resize(pad_length, 0.0);
            let target = GuidanceTarget::from_acceleration(&zg, valid_len, depth)?;
            bands.push(PreparedBand {
                acoustic: padded.into_samples(),
                valid_len,
                target,
            });
        }
        raw_stats.push(ride_stats);
        rides.push(PreparedRide {
            ride_id: r.ride_id.clone(),
            class_label: r.class_label,
            speed_kmh: r.speed_kmh,
            bands,
        });
    }
    Ok(PreparedDataset {
        rides,
        pad_length,
        depth,
        sample_rate_hz: rate,
        raw_stats,
    })
}

impl PreparedDataset {
    pub fn training_samples(&self, rides: &[usize], guided: bool) -> Vec<TrainingSample> {
        rides
            .iter()
            .flat_map(|&i| self.rides[i].bands.iter())
            .map(|b| TrainingSample {
                acoustic: b.acoustic.clone(),
                valid_len: b.valid_len,
                target: guided.then(|| b.target.clone()),
            })
            .collect()
    }

    fn normalization(&self, rides: &[usize]) -> NormalizationInfo {
        let n = rides.len().max(1) as f64;
        NormalizationInfo {
            method: "per_signal_zscore".into(),
            n_bands: N_BANDS,
            pad_length: self.pad_length,
            sample_rate_hz: self.sample_rate_hz,
            train_mean: rides.iter().map(|&i| self.raw_stats[i].0).sum::<f64>() / n,
            train_std: rides.iter().map(|&i| self.raw_stats[i].1).sum::<f64>() / n,
        }
    }

    /// Trains a learnable model on the bands of `rides`.
    pub fn train_model(
        &self,
        rides: &[usize],
        kind: LossKind,
        weights: LossWeights,
        settings: &TrainSettings,
        seed: u64,
    ) -> Result<TrainOutcome> {
        let samples = self.training_samples(rides, kind == LossKind::Agasdf);
        let init = DespawnModel::db4(self.depth, settings.initial_bias)?;
        let mut out = train(&init, &samples, &settings.config(kind, weights, seed))?;
        out.model.normalization = Some(self.normalization(rides));
        Ok(out)
    }

    /// Feature vectors of every band of `rides`; `model` is required for the
    /// learnable methods.
    pub fn features(&self, method: MethodTag, rides: &[usize], model: Option<&DespawnModel>) -> Result<Vec<Vec<f64>>> {
        let stft = (method == MethodTag::Stft).then(StftPlan::new);
        let db4 = [db4_kernel()];
        let mut out = Vec::with_capacity(rides.len() * N_BANDS);
        for &i in rides {
            for b in &self.rides[i].bands {
                let v = match method {
                    MethodTag::AgAsdf | MethodTag::Despawn => {
                        let m = model.ok_or_else(|| {
                            Error::InvalidConfig(format!("{method} features need a trained model"))
                        })?;
                        let p = encode_valid(&b.acoustic, b.valid_len, m)?;
                        let r = decode(&p, m)?;
                        extract_features(&p, Some((&b.acoustic[..b.valid_len], &r[..b.valid_len])))?
                    }
                    MethodTag::Fdwt => {
                        extract_features(&fdwt_forward_valid(&b.acoustic, b.valid_len, &db4, self.depth)?, None)?
                    }
                    MethodTag::Wpt => wpt_features(&b.acoustic, b.valid_len, &db4[0])?,
                    MethodTag::Stft => stft.as_ref().unwrap().band_features(&b.acoustic[..b.valid_len])?,
                };
                out.push(v);
            }
        }
        Ok(out)
    }

    /// [`Self::features`] with each band's ride metadata attached.
    pub fn feature_vectors(
        &self,
        method: MethodTag,
        rides: &[usize],
        model: Option<&DespawnModel>,
    ) -> Result<Vec<FeatureVector>> {
        let values = self.features(method, rides, model)?;
        let meta = rides.iter().flat_map(|&i| std::iter::repeat_n(&self.rides[i], N_BANDS));
        Ok(values
            .into_iter()
            .zip(meta)
            .map(|(values, r)| FeatureVector {
                values,
                method,
                label: r.class_label,
                speed_kmh: r.speed_kmh,
                ride_id: r.ride_id.clone(),
            })
            .collect())
    }

    fn labels(&self, rides: &[usize]) -> Vec<usize> {
        rides
            .iter()
            .flat_map(|&i| std::iter::repeat_n(self.rides[i].class_label.index(), self.rides[i].bands.len()))
            .collect()
    }

    fn groups(&self, rides: &[usize]) -> Vec<String> {
        rides
            .iter()
            .flat_map(|&i| std::iter::repeat_n(self.rides[i].ride_id.clone(), self.rides[i].bands.len()))
            .collect()
    }
}

/// Ride indices of the training and test sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Builds the split of a task. Task 1 holds out a quarter of the rides of
/// every class; each (class, speed) cell of six rides gives one or two test
/// rides, rotated so every speed gets four or five test rides overall.
pub fn split_rides(data: &PreparedDataset, task: Task, seed: u64) -> Result<Split> {
    let mut cells: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
    for (i, r) in data.rides.iter().enumerate() {
        cells.entry((r.class_label.index(), r.speed_kmh)).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    match task {
        Task::Task1 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for ((class, speed), mut rides) in cells {
                rides.sort_by(|a, b| data.rides[*a].ride_id.cmp(&data.rides[*b].ride_id));
                rides.shuffle(&mut rng);
                let s = SPEEDS_KMH.iter().position(|&v| v == speed).unwrap_or(0);
                let quota = rides.len() / 4 + usize::from((s + class) % 4 < 2 && rides.len() % 4 != 0);
                test.extend_from_slice(&rides[..quota]);
                train.extend_from_slice(&rides[quota..]);
            }
        }
        Task::WeightSweep => {
            return Err(Error::InvalidConfig("the sweep has no single split".into()));
        }
        _ => {
            let held = task.test_speed().unwrap();
            for ((_, speed), rides) in cells {
                if speed == held {
                    test.extend(rides);
                } else {
                    train.extend(rides);
                }
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "plan {task} does not match the dataset's speeds"
        )));
    }
    Ok(Split { train, test })
}

/// One fitted-and-evaluated method run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub task: Task,
    pub method: MethodTag,
    pub weights: Option<LossWeights>,
    pub repetition: usize,
    pub evaluation: Evaluation,
    pub final_loss: Option<f64>,
    pub epochs_run: usize,
}

/// Runs one (method, weights, repetition) cell on a split.
pub fn run_cell(
    data: &PreparedDataset,
    split: &Split,
    task: Task,
    method: MethodTag,
    weights: LossWeights,
    repetition: usize,
    plan: &ExperimentPlan,
) -> Result<CellResult> {
    let (model, trace) = if method.is_learnable() {
        let kind = if method == MethodTag::AgAsdf {
            LossKind::Agasdf
        } else {
            LossKind::Despawn
        };
        let shuffle_seed = plan.seed.wrapping_add(1 + repetition as u64);
        let out = data.train_model(&split.train, kind, weights, &plan.train, shuffle_seed)?;
        (Some(out.model), out.trace)
    } else {
        (None, Vec::new())
    };
    let train_x = data.features(method, &split.train, model.as_ref())?;
    let test_x = data.features(method, &split.test, model.as_ref())?;
    let clf = Classifier::fit(&train_x, &data.labels(&split.train), &data.groups(&split.train), plan.seed)?;
    let evaluation = evaluate(&clf.predict_all(&test_x), &data.labels(&split.test), ClassLabel::ALL.len());
    Ok(CellResult {
        task,
        method,
        weights: method.is_learnable().then_some(weights),
        repetition,
        evaluation,
        final_loss: trace.last().map(|e| e.mean_loss),
        epochs_run: trace.len(),
    })
}

/// Runs jobs on up to `threads` workers; results keep job order.
fn run_parallel<J: Sync, R: Send>(jobs: &[J], threads: usize, f: impl Fn(&J) -> Result<R> + Sync) -> Result<Vec<R>> {
    if threads <= 1 || jobs.len() <= 1 {
        return jobs.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<R>>>> = jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                *slots[i].lock().unwrap() = Some(f(&jobs[i]));
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
}

/// Mean and population standard deviation.
fn mean_and_std(v: &[f64]) -> (f64, f64) {
    let (m, s) = mean_std(v);
    (m, if v.len() > 1 { s } else { 0.0 })
}

/// `95.4 ± 1.1` for repeated runs, `87.9` for a single one.
pub fn format_mean_std(mean: f64, std: f64, reps: usize) -> String {
    if reps > 1 {
        format!("{mean:.1} ± {std:.1}")
    } else {
        format!("{mean:.1}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodTag,
    pub repetitions: usize,
    /// Mean and std of per-class recall; `None` for classes absent from the test set.
    pub per_class: Vec<Option<(f64, f64)>>,
    pub average: (f64, f64),
}

fn summarize(method: MethodTag, cells: &[&CellResult]) -> MethodSummary {
    let n_classes = ClassLabel::ALL.len();
    let per_class = (0..n_classes)
        .map(|c| {
            let v: Vec<f64> = cells.iter().filter_map(|r| r.evaluation.per_class[c]).collect();
            (!v.is_empty()).then(|| mean_and_std(&v))
        })
        .collect();
    let avgs: Vec<f64> = cells.iter().map(|r| r.evaluation.average).collect();
    MethodSummary {
        method,
        repetitions: cells.len(),
        per_class,
        average: mean_and_std(&avgs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub n_train_rides: usize,
    pub n_test_rides: usize,
    pub summaries: Vec<MethodSummary>,
    pub cells: Vec<CellResult>,
}

impl TaskReport {
    pub fn summary(&self, method: MethodTag) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,method,repetitions,class,mean,std\n");
        for s in &self.summaries {
            let rows = ClassLabel::ALL
                .iter()
                .map(|c| (c.as_str().to_string(), s.per_class[c.index()]))
                .chain(std::iter::once(("average".to_string(), Some(s.average))));
            for (name, v) in rows {
                match v {
                    Some((m, sd)) => out.push_str(&format!("{},{},{},{name},{m},{sd}\n", self.task, s.method, s.repetitions)),
                    None => out.push_str(&format!("{},{},{},{name},NA,NA\n", self.task, s.method, s.repetitions)),
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut header = vec!["Condition".to_string()];
        header.extend(self.summaries.iter().map(|s| s.method.to_string()));
        let mut rows = vec![header];
        for c in ClassLabel::ALL {
            let mut row = vec![c.to_string()];
            for s in &self.summaries {
                row.push(match s.per_class[c.index()] {
                    Some((m, sd)) => format_mean_std(m, sd, s.repetitions),
                    None => "N/A".into(),
                });
            }
            rows.push(row);
        }
        let mut avg = vec!["Average".to_string()];
        avg.extend(self.summaries.iter().map(|s| format!("{:.1}", s.average.0)));
        rows.push(avg);
        format!(
            "{} ({}; {} train / {} test rides), accuracy %\n{}",
            self.task,
            self.task.describe(),
            self.n_train_rides,
            self.n_test_rides,
            align(&rows)
        )
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Runs every method of the plan on one task.
pub fn run_task(data: &PreparedDataset, plan: &ExperimentPlan) -> Result<TaskReport> {
    let split = split_rides(data, plan.task, plan.seed)?;
    let mut jobs = Vec::new();
    for &m in &plan.methods {
        let reps = if m.is_learnable() { plan.repetitions.max(1) } else { 1 };
        for rep in 0..reps {
            jobs.push((m, rep));
        }
    }
    let cells = run_parallel(&jobs, plan.threads, |&(m, rep)| {
        run_cell(data, &split, plan.task, m, plan.weights, rep, plan)
    })?;
    let summaries = plan
        .methods
        .iter()
        .map(|&m| summarize(m, &cells.iter().filter(|c| c.method == m).collect::<Vec<_>>()))
        .collect();
    Ok(TaskReport {
        task: plan.task,
        n_train_rides: split.train.len(),
        n_test_rides: split.test.len(),
        summaries,
        cells,
    })
}

/// Task rows × ratio columns of average accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub tasks: Vec<Task>,
    pub ratios: Vec<LossWeights>,
    /// `[task][ratio]` → (mean, std, repetitions).
    pub matrix: Vec<Vec<(f64, f64, usize)>>,
    pub cells: Vec<CellResult>,
}

impl SweepReport {
    /// Mean over tasks of each ratio column.
    pub fn column_averages(&self) -> Vec<f64> {
        (0..self.ratios.len())
            .map(|j| self.matrix.iter().map(|row| row[j].0).sum::<f64>() / self.matrix.len() as f64)
            .collect()
    }

    pub fn cell(&self, task: Task, ratio: LossWeights) -> Option<(f64, f64, usize)> {
        let i = self.tasks.iter().position(|&t| t == task)?;
        let j = self.ratios.iter().position(|&r| r == ratio)?;
        Some(self.matrix[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,ratio,repetitions,mean,std\n");
        for (i, t) in self.tasks.iter().enumerate() {
            for (j, r) in self.ratios.iter().enumerate() {
                let (m, s, n) = self.matrix[i][j];
                out.push_str(&format!("{t},{},{n},{m},{s}\n", r.label()));
            }
        }
        for (j, r) in self.ratios.iter().enumerate() {
            out.push_str(&format!("average,{},,{},\n", r.label(), self.column_averages()[j]));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut header = vec!["Train -> test".to_string()];
        header.extend(self.ratios.iter().map(LossWeights::label));
        let mut rows = vec![header];
        for (i, t) in self.tasks.iter().enumerate() {
            let mut row = vec![t.describe()];
            row.extend(self.matrix[i].iter().map(|&(m, s, n)| format_mean_std(m, s, n)));
            rows.push(row);
        }
        let mut avg = vec!["Average".to_string()];
        avg.extend(self.column_averages().iter().map(|a| format!("{a:.1}")));
        rows.push(avg);
        format!("Average accuracy % by reconstruction:guidance weight\n{}", align(&rows))
    }
}

/// AG-ASDF accuracy for every task and weight ratio.
pub fn run_weight_sweep(data: &PreparedDataset, plan: &ExperimentPlan, tasks: &[Task]) -> Result<SweepReport> {
    let splits: Vec<Split> = tasks.iter().map(|&t| split_rides(data, t, plan.seed)).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for ti in 0..tasks.len() {
        for &w in &plan.weight_ratios {
            for rep in 0..plan.repetitions.max(1) {
                jobs.push((ti, w, rep));
            }
        }
    }
    let cells = run_parallel(&jobs, plan.threads, |&(ti, w, rep)| {
        run_cell(data, &splits[ti], tasks[ti], MethodTag::AgAsdf, w, rep, plan)
    })?;
    let matrix = tasks
        .iter()
        .map(|&t| {
            plan.weight_ratios
                .iter()
                .map(|&w| {
                    let v: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.task == t && c.weights == Some(w))
                        .map(|c| c.evaluation.average)
                        .collect();
                    let (m, s) = mean_and_std(&v);
                    (m, s, v.len())
                })
                .collect()
        })
        .collect();
    Ok(SweepReport {
        tasks: tasks.to_vec(),
        ratios: plan.weight_ratios.clone(),
        matrix,
        cells,
    })
}
