//! Seeded generator of paired acoustic/acceleration train passes.
//!
//! A pass is a train of six vehicles with four axles each. Every axle
//! contributes a short load pulse (narrower at higher speed) which excites
//! the track's modal kernel: three damped sinusoids whose frequencies
//! depend on the track class. The acceleration channel is that response
//! plus a little sensor noise; the acoustic channel is a band-shaped copy
//! buried in broadband noise and two interference tones whose power does
//! not depend on speed, so slow passes have the worst SNR.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    write_f32_file, ClassLabel, DatasetManifest, ManifestEntry, PairedRecord, Signal, SourceKind, SPEEDS_KMH,
};

pub const SAMPLE_RATE_HZ: f64 = 20_000.0;
pub const N_VEHICLES: usize = 6;
pub const AXLES_PER_VEHICLE: usize = 4;
pub const PASSES_PER_SPEED: usize = 6;
pub const MAX_MODAL_HZ: f64 = 2_000.0;
pub const MIN_CLASS_SEPARATION_HZ: f64 = 50.0;
/// Speed at which the clean signal has unit power.
pub const REFERENCE_SPEED_KMH: f64 = 80.0;
pub const ACCELERATION_SNR_DB: f64 = 30.0;
/// Per-pass desk-scale duration.
pub const DESK_DURATION_S: f64 = 2.0;
/// Interference tone frequencies of the acoustic channel.
pub const TONE_HZ: [f64; 2] = [1_100.0, 2_900.0];
/// Range of the white-noise share of acoustic noise power; tones take the rest.
pub const WHITE_SHARE: (f64, f64) = (0.1, 0.3);
/// Mean wheel load relative to the unit-variance roughness forcing.
const QUASI_STATIC_LOAD: f64 = 0.1;

/// Average measured pass durations in seconds, indexed `[speed][class]`.
pub const TABLE_DURATIONS_S: [[f64; 3]; 4] = [
    [21.84, 22.34, 22.04],
    [11.41, 11.47, 11.43],
    [7.94, 7.85, 7.90],
    [6.11, 6.12, 6.20],
];

fn speed_index(speed_kmh: u32) -> Result<usize> {
    SPEEDS_KMH
        .iter()
        .position(|&s| s == speed_kmh)
        .ok_or_else(|| Error::InvalidConfig(format!("unsupported speed {speed_kmh} km/h")))
}

pub fn table_duration_s(class: ClassLabel, speed_kmh: u32) -> Result<f64> {
    Ok(TABLE_DURATIONS_S[speed_index(speed_kmh)?][class.index()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackClassParams {
    pub class: ClassLabel,
    pub modal_frequencies_hz: Vec<f64>,
    pub modal_dampings: Vec<f64>,
    pub modal_amplitudes: Vec<f64>,
}

impl TrackClassParams {
    /// Default modal parameters; degradation softens the support layer so
    /// resonances move down and ring longer.
    pub fn default_for(class: ClassLabel) -> Self {
        let (f, z) = match class {
            ClassLabel::NoDegradation => ([310.0, 780.0, 1450.0], [0.06, 0.05, 0.04]),
            ClassLabel::Intermediate => ([250.0, 700.0, 1380.0], [0.05, 0.045, 0.035]),
            ClassLabel::Severe => ([160.0, 520.0, 1150.0], [0.04, 0.035, 0.03]),
        };
        Self {
            class,
            modal_frequencies_hz: f.to_vec(),
            modal_dampings: z.to_vec(),
            modal_amplitudes: vec![1.0, 0.8, 0.6],
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let n = self.modal_frequencies_hz.len();
        if n == 0 || self.modal_dampings.len() != n || self.modal_amplitudes.len() != n {
            return Err(Error::InvalidConfig("modal parameter lists must be non-empty and equal length".into()));
        }
        for &f in &self.modal_frequencies_hz {
            if !(f > 0.0 && f < MAX_MODAL_HZ && f < sample_rate_hz / 2.0) {
                return Err(Error::InvalidConfig(format!("modal frequency {f} Hz out of range")));
            }
        }
        if self.modal_dampings.iter().any(|&z| !(z > 0.0 && z < 1.0)) {
            return Err(Error::InvalidConfig("damping ratios must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Largest per-mode frequency difference to another class.
    pub fn max_separation_hz(&self, other: &Self) -> f64 {
        self.modal_frequencies_hz
            .iter()
            .zip(&other.modal_frequencies_hz)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Impulse response truncated once every mode has decayed by 80 dB.
    pub fn modal_kernel(&self, sample_rate_hz: f64) -> Vec<f64> {
        let slowest = self
            .modal_frequencies_hz
            .iter()
            .zip(&self.modal_dampings)
            .map(|(f, z)| 2.0 * PI * f * z)
            .fold(f64::INFINITY, f64::min);
        let len = ((1e4f64.ln() / slowest) * sample_rate_hz).ceil() as usize;
        (0..len)
            .map(|i| {
                let t = i as f64 / sample_rate_hz;
                self.modal_frequencies_hz
                    .iter()
                    .zip(&self.modal_dampings)
                    .zip(&self.modal_amplitudes)
                    .map(|((f, z), a)| a * (-2.0 * PI * f * z * t).exp() * (2.0 * PI * f * t).sin())
                    .sum()
            })
            .collect()
    }
}

pub fn default_classes() -> Vec<TrackClassParams> {
    ClassLabel::ALL.iter().map(|&c| TrackClassParams::default_for(c)).collect()
}

/// Checks that every pair of classes differs by at least 50 Hz in some mode.
pub fn check_class_separation(classes: &[TrackClassParams]) -> Result<()> {
    for (i, a) in classes.iter().enumerate() {
        for b in &classes[i + 1..] {
            if a.max_separation_hz(b) < MIN_CLASS_SEPARATION_HZ {
                return Err(Error::InvalidConfig(format!(
                    "classes {} and {} are closer than {MIN_CLASS_SEPARATION_HZ} Hz",
                    a.class, b.class
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationProfile {
    /// 2 s per pass, for fast end-to-end runs.
    #[default]
    Desk,
    /// Measured average durations per speed and class.
    Full,
}

impl std::str::FromStr for DurationProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(DurationProfile::Desk),
            "full" => Ok(DurationProfile::Full),
            other => Err(Error::InvalidConfig(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassConfig {
    pub speed_kmh: u32,
    pub duration_s: f64,
    pub n_vehicles: usize,
    pub axles_per_vehicle: usize,
    pub sample_rate_hz: f64,
    pub acoustic_snr_db: f64,
    pub seed: u64,
    /// Random stream within `seed`; distinct per (class, speed, pass).
    pub stream: u64,
}

impl PassConfig {
    pub fn new(speed_kmh: u32, duration_s: f64, seed: u64) -> Self {
        Self {
            speed_kmh,
            duration_s,
            n_vehicles: N_VEHICLES,
            axles_per_vehicle: AXLES_PER_VEHICLE,
            sample_rate_hz: SAMPLE_RATE_HZ,
            acoustic_snr_db: 0.0,
            seed,
            stream: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        speed_index(self.speed_kmh)?;
        if !(self.duration_s > 0.0 && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig("duration and sample rate must be positive".into()));
        }
        if self.n_vehicles == 0 || self.axles_per_vehicle == 0 {
            return Err(Error::InvalidConfig("need at least one vehicle and axle".into()));
        }
        if !self.acoustic_snr_db.is_finite() {
            return Err(Error::InvalidConfig("SNR must be finite".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn scale_to_power(x: &mut [f64], target: f64) {
    let p = power(x);
    if p > 0.0 {
        let k = (target / p).sqrt();
        x.iter_mut().for_each(|v| *v *= k);
    }
}

/// Axle positions within one vehicle as fractions of its slot: two
/// bogies of two wheelsets each.
const AXLE_FRACTIONS: [f64; 4] = [0.08, 0.22, 0.78, 0.92];

fn axle_times(cfg: &PassConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let slot = cfg.duration_s / cfg.n_vehicles as f64;
    let mut times = Vec::with_capacity(cfg.n_vehicles * cfg.axles_per_vehicle);
    for v in 0..cfg.n_vehicles {
        for a in 0..cfg.axles_per_vehicle {
            let frac = if cfg.axles_per_vehicle == AXLE_FRACTIONS.len() {
                AXLE_FRACTIONS[a]
            } else {
                (a as f64 + 0.5) / cfg.axles_per_vehicle as f64
            };
            let jitter = rng.random_range(-0.01..0.01);
            times.push((v as f64 + frac + jitter) * slot);
        }
    }
    times
}

/// Clean structural response at the sensor, scaled to power `(v/80)²`.
fn clean_response(cls: &TrackClassParams, cfg: &PassConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = cfg.n_samples();
    let fs = cfg.sample_rate_hz;
    // Contact time of a wheel over ~0.2 m of rail; shorter at speed.
    let sigma_s = 0.2 / (cfg.speed_kmh as f64 / 3.6) / 4.0;
    let mut excitation = vec![0.0; n];
    let half = (4.0 * sigma_s * fs).ceil() as isize;
    for t in axle_times(cfg, rng) {
        let amp = 1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal);
        let centre = (t * fs).round() as isize;
        for k in -half..=half {
            let i = centre + k;
            if i >= 0 && (i as usize) < n {
                let dt = k as f64 / fs;
                let env = (-0.5 * (dt / sigma_s).powi(2)).exp();
                // Quasi-static load plus rail roughness, the broadband part
                // that actually rings the track modes.
                excitation[i as usize] +=
                    amp * env * (QUASI_STATIC_LOAD + rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
    let kernel = cls.modal_kernel(fs);
    let mut out = vec![0.0; n];
    for (i, &e) in excitation.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for (k, &h) in kernel.iter().enumerate().take(n - i) {
            out[i + k] += e * h;
        }
    }
    let v = cfg.speed_kmh as f64 / REFERENCE_SPEED_KMH;
    scale_to_power(&mut out, v * v);
    out
}

/// Acoustic noise with power exactly `10^(−snr/10)`: white noise plus two
/// tones, mixed with per-pass random proportions and phases.
fn acoustic_noise(cfg: &PassConfig, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fs = cfg.sample_rate_hz;
    let white_share = rng.random_range(WHITE_SHARE.0..WHITE_SHARE.1);
    let tone_split = rng.random_range(0.3..0.7);
    let shares = [
        white_share,
        (1.0 - white_share) * tone_split,
        (1.0 - white_share) * (1.0 - tone_split),
    ];
    let mut white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    scale_to_power(&mut white, shares[0]);
    let mut out = white;
    for (k, &f) in TONE_HZ.iter().enumerate() {
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = (2.0 * shares[k + 1]).sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            *o += amp * (2.0 * PI * f * i as f64 / fs + phase).sin();
        }
    }
    scale_to_power(&mut out, 10f64.powf(-cfg.acoustic_snr_db / 10.0));
    out
}

/// Microphone colouring: mild smoothing of the structural response.
fn band_shape(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let prev = if i > 0 { x[i - 1] } else { 0.0 };
            let next = if i + 1 < n { x[i + 1] } else { 0.0 };
            0.25 * prev + 0.5 * x[i] + 0.25 * next
        })
        .collect()
}

/// The three channels of a generated pass, before wrapping into signals.
#[derive(Debug, Clone)]
pub struct PassChannels {
    pub clean: Vec<f64>,
    pub acceleration: Vec<f64>,
    pub acoustic_clean: Vec<f64>,
    pub acoustic_noise: Vec<f64>,
}

impl PassChannels {
    pub fn acoustic(&self) -> Vec<f64> {
        self.acoustic_clean
            .iter()
            .zip(&self.acoustic_noise)
            .map(|(a, b)| a + b)
            .collect()
    }
}

pub fn generate_channels(cls: &TrackClassParams, cfg: &PassConfig) -> Result<PassChannels> {
    cls.validate(cfg.sample_rate_hz)?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);
    let clean = clean_response(cls, cfg, &mut rng);
    let n = clean.len();
    let clean_power = power(&clean);
    let mut sensor: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    scale_to_power(&mut sensor, clean_power * 10f64.powf(-ACCELERATION_SNR_DB / 10.0));
    let acceleration = clean.iter().zip(&sensor).map(|(a, b)| a + b).collect();
    let mut acoustic_clean = band_shape(&clean);
    scale_to_power(&mut acoustic_clean, clean_power);
    let acoustic_noise = acoustic_noise(cfg, n, &mut rng);
    Ok(PassChannels {
        clean,
        acceleration,
        acoustic_clean,
        acoustic_noise,
    })
}

pub fn generate_pass(cls: &TrackClassParams, cfg: &PassConfig, ride_id: &str) -> Result<PairedRecord> {
    let ch = generate_channels(cls, cfg)?;
    // Stored as f32 on disk; round here so in-memory and on-disk data agree.
    let to_f32 = |v: Vec<f64>| v.into_iter().map(|x| x as f32 as f64).collect::<Vec<_>>();
    let acoustic = Signal::new(to_f32(ch.acoustic()), cfg.sample_rate_hz, SourceKind::Acoustic)?;
    let acceleration = Signal::new(to_f32(ch.acceleration), cfg.sample_rate_hz, SourceKind::Acceleration)?;
    PairedRecord::new(acoustic, acceleration, cls.class, cfg.speed_kmh, ride_id.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub acoustic_snr_db: f64,
    pub profile: DurationProfile,
    pub classes: Vec<TrackClassParams>,
}

impl SynthConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            acoustic_snr_db: 0.0,
            profile: DurationProfile::Desk,
            classes: default_classes(),
        }
    }

    /// Pass configurations for every (class, speed, pass), in dataset order.
    pub fn passes(&self) -> Result<Vec<(usize, PassConfig, String)>> {
        check_class_separation(&self.classes)?;
        let mut out = Vec::new();
        for (ci, cls) in self.classes.iter().enumerate() {
            for &speed in &SPEEDS_KMH {
                for pass in 0..PASSES_PER_SPEED {
                    let stream = ((cls.class.index() as u64) << 32) | ((speed as u64) << 8) | pass as u64;
                    let mut jitter = ChaCha8Rng::seed_from_u64(self.seed);
                    jitter.set_stream(stream | 1 << 63);
                    let base = match self.profile {
                        DurationProfile::Desk => DESK_DURATION_S,
                        DurationProfile::Full => table_duration_s(cls.class, speed)?,
                    };
                    let duration = base * (1.0 + jitter.random_range(-0.02..0.02));
                    let mut cfg = PassConfig::new(speed, duration, self.seed);
                    cfg.acoustic_snr_db = self.acoustic_snr_db;
                    cfg.stream = stream;
                    let ride = format!("{}_{}kmh_p{}", cls.class.as_str(), speed, pass + 1);
                    out.push((ci, cfg, ride));
                }
            }
        }
        Ok(out)
    }
}

/// In-memory dataset, same content as [`generate_dataset`] writes.
pub fn generate_records(cfg: &SynthConfig) -> Result<Vec<PairedRecord>> {
    cfg.passes()?
        .into_iter()
        .map(|(ci, pc, ride)| generate_pass(&cfg.classes[ci], &pc, &ride))
        .collect()
}

/// Writes every pass as little-endian f32 files plus `manifest.json`.
pub fn generate_dataset(out_dir: &Path, cfg: &SynthConfig) -> Result<DatasetManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::new();
    for (ci, pc, ride) in cfg.passes()? {
        let rec = generate_pass(&cfg.classes[ci], &pc, &ride)?;
        let acoustic_path = format!("{ride}_acoustic.f32");
        let acceleration_path = format!("{ride}_acceleration.f32");
        write_f32_file(&out_dir.join(&acoustic_path), rec.acoustic.samples())?;
        write_f32_file(&out_dir.join(&acceleration_path), rec.acceleration.samples())?;
        entries.push(ManifestEntry {
            ride_id: ride,
            class_label: rec.class_label,
            speed_kmh: rec.speed_kmh,
            acoustic_path,
            acceleration_path,
        });
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        sample_rate_hz: SAMPLE_RATE_HZ,
        records: entries,
    };
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
