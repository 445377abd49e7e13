//! Signal values, paired recordings, dataset manifests and the small
//! preprocessing steps every other module relies on.
//!
//! Raw signal files are headerless little-endian `f32` streams; the sample
//! rate lives in the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as zero by [`zscore_normalize`].
pub const STD_FLOOR: f64 = 1e-12;

/// Magnitudes below this are clamped before taking the logarithm.
pub const DB_FLOOR: f64 = 1e-12;

/// Train speeds of the measurement campaign, in km/h.
pub const SPEEDS_KMH: [u32; 4] = [20, 40, 60, 80];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Acoustic,
    Acceleration,
    Synthetic,
}

/// A uniformly sampled, finite, non-empty real time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    source_kind: SourceKind,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, source_kind: SourceKind) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite sample at index {i}")));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_kind,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn source_kind(&self) -> SourceKind {
        self.source_kind
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Same metadata, new samples. Callers guarantee the samples are valid.
    fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert!(!samples.is_empty());
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            source_kind: self.source_kind,
        }
    }
}

/// Track support condition; index order is the class order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    NoDegradation,
    Intermediate,
    Severe,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [
        ClassLabel::NoDegradation,
        ClassLabel::Intermediate,
        ClassLabel::Severe,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::NoDegradation => "no_degradation",
            ClassLabel::Intermediate => "intermediate",
            ClassLabel::Severe => "severe",
        }
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown class label {s:?}")))
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Simultaneous acoustic and acceleration recordings of one train pass.
#[derive(Debug, Clone)]
pub struct PairedRecord {
    pub acoustic: Signal,
    pub acceleration: Signal,
    pub class_label: ClassLabel,
    pub speed_kmh: u32,
    pub ride_id: String,
}

impl PairedRecord {
    /// Builds a record, aligning the two channels by truncation.
    pub fn new(
        acoustic: Signal,
        acceleration: Signal,
        class_label: ClassLabel,
        speed_kmh: u32,
        ride_id: impl Into<String>,
    ) -> Result<Self> {
        let (acoustic, acceleration) = pair_align(&acoustic, &acceleration)?;
        Ok(Self {
            acoustic,
            acceleration,
            class_label,
            speed_kmh,
            ride_id: ride_id.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub ride_id: String,
    pub class_label: ClassLabel,
    pub speed_kmh: u32,
    pub acoustic_path: String,
    pub acceleration_path: String,
}

/// On-disk listing of paired recordings. Paths are relative to the
/// manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub records: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Self = serde_json::from_str(&text)?;
        manifest.check_consistency()?;
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks rate, speeds and that every ride id maps to one label/speed.
    pub fn check_consistency(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Manifest(format!(
                "invalid sample rate {}",
                self.sample_rate_hz
            )));
        }
        let mut seen: std::collections::HashMap<&str, (ClassLabel, u32)> = Default::default();
        for entry in &self.records {
            if !SPEEDS_KMH.contains(&entry.speed_kmh) {
                return Err(Error::Manifest(format!(
                    "ride {}: unsupported speed {} km/h",
                    entry.ride_id, entry.speed_kmh
                )));
            }
            let key = (entry.class_label, entry.speed_kmh);
            if let Some(prev) = seen.insert(&entry.ride_id, key) {
                if prev != key {
                    return Err(Error::Manifest(format!(
                        "ride {} has inconsistent label/speed",
                        entry.ride_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads every referenced file. `base` is the manifest's directory.
    pub fn load_records(&self, base: &Path) -> Result<Vec<PairedRecord>> {
        self.records
            .iter()
            .map(|entry| {
                let acoustic = read_f32_signal(
                    &resolve(base, &entry.acoustic_path),
                    self.sample_rate_hz,
                    SourceKind::Acoustic,
                )?;
                let acceleration = read_f32_signal(
                    &resolve(base, &entry.acceleration_path),
                    self.sample_rate_hz,
                    SourceKind::Acceleration,
                )?;
                PairedRecord::new(
                    acoustic,
                    acceleration,
                    entry.class_label,
                    entry.speed_kmh,
                    entry.ride_id.clone(),
                )
            })
            .collect()
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads a manifest and all of its recordings.
pub fn load_dataset(manifest_path: &Path) -> Result<(DatasetManifest, Vec<PairedRecord>)> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let records = manifest.load_records(base)?;
    Ok((manifest, records))
}

pub fn read_f32_file(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::InvalidSignal(format!(
            "{}: size {} is not a multiple of 4",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub fn read_f32_signal(path: &Path, sample_rate_hz: f64, kind: SourceKind) -> Result<Signal> {
    let samples = read_f32_file(path)?;
    Signal::new(samples, sample_rate_hz, kind).map_err(|e| match e {
        Error::InvalidSignal(msg) => Error::InvalidSignal(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes samples as little-endian `f32`. Values are rounded to single precision.
pub fn write_f32_file(path: &Path, samples: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 4);
    for &x in samples {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Truncates both channels to the shorter length. No resampling.
pub fn pair_align(acoustic: &Signal, acceleration: &Signal) -> Result<(Signal, Signal)> {
    if acoustic.sample_rate_hz != acceleration.sample_rate_hz {
        return Err(Error::SampleRateMismatch {
            acoustic: acoustic.sample_rate_hz,
            acceleration: acceleration.sample_rate_hz,
        });
    }
    let n = acoustic.len().min(acceleration.len());
    Ok((
        acoustic.with_samples(acoustic.samples[..n].to_vec()),
        acceleration.with_samples(acceleration.samples[..n].to_vec()),
    ))
}

/// Population mean and standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scores a sample slice with the population standard deviation; a
/// (near-)constant input maps to all zeros.
pub fn zscore(x: &[f64]) -> Vec<f64> {
    let (mean, std) = mean_std(x);
    if std < STD_FLOOR {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

pub fn zscore_normalize(s: &Signal) -> Signal {
    s.with_samples(zscore(&s.samples))
}

/// Band lengths for [`split_into_bands`]: the first `len % n` bands get one
/// extra sample.
pub fn band_lengths(len: usize, n_bands: usize) -> Vec<usize> {
    let base = len / n_bands;
    let extra = len % n_bands;
    (0..n_bands).map(|i| base + usize::from(i < extra)).collect()
}

/// Contiguous, non-overlapping bands covering the whole signal.
pub fn split_into_bands(s: &Signal, n_bands: usize) -> Result<Vec<Signal>> {
    if n_bands == 0 {
        return Err(Error::InvalidConfig("n_bands must be at least 1".into()));
    }
    if s.len() < n_bands {
        return Err(Error::TooShort {
            len: s.len(),
            required: n_bands,
        });
    }
    let mut start = 0;
    Ok(band_lengths(s.len(), n_bands)
        .into_iter()
        .map(|len| {
            let band = s.with_samples(s.samples[start..start + len].to_vec());
            start += len;
            band
        })
        .collect())
}

/// Appends zeros up to `target`; returns the padded samples and the
/// original length.
pub fn pad_to_length(s: &Signal, target: usize) -> Result<(Signal, usize)> {
    let valid = s.len();
    if valid > target {
        return Err(Error::LengthExceedsTarget { len: valid, target });
    }
    let mut samples = s.samples.clone();
    samples.resize(target, 0.0);
    Ok((s.with_samples(samples), valid))
}

/// `20·log10(max(x, 1e-12))`.
pub fn to_decibels(x: f64) -> f64 {
    20.0 * x.max(DB_FLOOR).log10()
}
