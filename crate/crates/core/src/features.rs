//! Classification features: decibel max/mean of transform coefficients per
//! band, optional reconstruction residuals, the STFT band baseline and
//! per-column standardization.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{to_decibels, ClassLabel, STD_FLOOR};
use crate::training::guidance_features;
use crate::wavelet::{wpt_bands_valid, CoefficientPyramid, Kernel};

pub const STFT_WINDOW: usize = 1024;
pub const STFT_HOP: usize = 512;
pub const STFT_BANDS: usize = 16;
/// WPT depth giving 16 leaves.
pub const WPT_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "AG_ASDF")]
    AgAsdf,
    #[serde(rename = "DESPAWN")]
    Despawn,
    #[serde(rename = "FDWT")]
    Fdwt,
    #[serde(rename = "WPT")]
    Wpt,
    #[serde(rename = "STFT")]
    Stft,
}

impl MethodTag {
    pub const ALL: [MethodTag; 5] = [
        MethodTag::AgAsdf,
        MethodTag::Despawn,
        MethodTag::Fdwt,
        MethodTag::Wpt,
        MethodTag::Stft,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::AgAsdf => "AG_ASDF",
            MethodTag::Despawn => "DESPAWN",
            MethodTag::Fdwt => "FDWT",
            MethodTag::Wpt => "WPT",
            MethodTag::Stft => "STFT",
        }
    }

    /// Methods whose transform is trained.
    pub fn is_learnable(self) -> bool {
        matches!(self, MethodTag::AgAsdf | MethodTag::Despawn)
    }

    /// Feature length for a wavelet pyramid of the given depth.
    pub fn feature_len(self, depth: usize) -> usize {
        match self {
            MethodTag::AgAsdf | MethodTag::Despawn => 2 * (depth + 1) + 2,
            MethodTag::Fdwt => 2 * (depth + 1),
            MethodTag::Wpt | MethodTag::Stft => 2 * STFT_BANDS,
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace('-', "_");
        MethodTag::ALL
            .into_iter()
            .find(|m| m.as_str() == norm || (norm == "AGASDF" && *m == MethodTag::AgAsdf))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub method: MethodTag,
    pub label: ClassLabel,
    pub speed_kmh: u32,
    pub ride_id: String,
}

/// `(dB max|c|, dB mean|c|)` for every valid band of the pyramid, detail
/// layers first. With `residual = Some((s, ŝ))` the linear-unit
/// `(max|s−ŝ|, mean|s−ŝ|)` is appended.
pub fn extract_features(p: &CoefficientPyramid, residual: Option<(&[f64], &[f64])>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * (p.depth() + 1) + 2);
    for band in p.valid_bands() {
        let (max, mean) = guidance_features(band, band.len())?;
        out.push(to_decibels(max));
        out.push(to_decibels(mean));
    }
    if let Some((s, s_hat)) = residual {
        if s.len() != s_hat.len() {
            return Err(Error::InvalidConfig(format!(
                "residual lengths differ: {} vs {}",
                s.len(),
                s_hat.len()
            )));
        }
        let diff: Vec<f64> = s.iter().zip(s_hat).map(|(a, b)| a - b).collect();
        let (max, mean) = guidance_features(&diff, diff.len())?;
        out.push(max);
        out.push(mean);
    }
    Ok(out)
}

/// dB max/mean of each of the 16 frequency-ordered WPT leaves.
pub fn wpt_features(samples: &[f64], valid_len: usize, kernel: &Kernel) -> Result<Vec<f64>> {
    let (leaves, valid) = wpt_bands_valid(samples, valid_len, kernel, WPT_DEPTH)?;
    let mut out = Vec::with_capacity(2 * leaves.len());
    for leaf in &leaves {
        let (max, mean) = guidance_features(leaf, valid)?;
        out.push(to_decibels(max));
        out.push(to_decibels(mean));
    }
    Ok(out)
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// First bin of each STFT band; the last band ends at `STFT_WINDOW / 2`.
pub fn stft_band_edges() -> Vec<usize> {
    let bins = STFT_WINDOW / 2 + 1;
    (0..=STFT_BANDS).map(|b| b * bins / STFT_BANDS).collect()
}

/// Magnitude spectrogram, frames × `STFT_WINDOW/2 + 1` bins, no centering.
pub struct Spectrogram {
    pub frames: Vec<Vec<f64>>,
}

pub struct StftPlan {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl StftPlan {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft: planner.plan_fft_forward(STFT_WINDOW),
            window: hann(STFT_WINDOW),
        }
    }

    pub fn spectrogram(&self, s: &[f64]) -> Result<Spectrogram> {
        if s.len() < STFT_WINDOW {
            return Err(Error::TooShort {
                len: s.len(),
                required: STFT_WINDOW,
            });
        }
        let n_frames = 1 + (s.len() - STFT_WINDOW) / STFT_HOP;
        let mut buf = vec![Complex::new(0.0, 0.0); STFT_WINDOW];
        let mut frames = Vec::with_capacity(n_frames);
        for f in 0..n_frames {
            let seg = &s[f * STFT_HOP..f * STFT_HOP + STFT_WINDOW];
            for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex::new(x * w, 0.0);
            }
            self.fft.process(&mut buf);
            frames.push(buf[..=STFT_WINDOW / 2].iter().map(|c| c.norm()).collect());
        }
        Ok(Spectrogram { frames })
    }

    /// dB max and dB mean of |X| over each band × all frames.
    pub fn band_features(&self, s: &[f64]) -> Result<Vec<f64>> {
        let spec = self.spectrogram(s)?;
        let edges = stft_band_edges();
        let mut out = Vec::with_capacity(2 * STFT_BANDS);
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut max = 0.0f64;
            let mut sum = 0.0;
            for frame in &spec.frames {
                for &m in &frame[lo..hi] {
                    max = max.max(m);
                    sum += m;
                }
            }
            let count = (spec.frames.len() * (hi - lo)) as f64;
            out.push(to_decibels(max));
            out.push(to_decibels(sum / count));
        }
        Ok(out)
    }
}

impl Default for StftPlan {
    fn default() -> Self {
        Self::new()
    }
}

/// STFT band features of an unpadded signal.
pub fn stft_band_features(s: &[f64]) -> Result<Vec<f64>> {
    StftPlan::new().band_features(s)
}

/// Per-column z-score statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let dim = first.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidConfig("ragged feature matrix".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    /// Constant training columns map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s > STD_FLOOR { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// Fits on `train` and transforms both sets with the training statistics.
pub fn standardize(train: &[Vec<f64>], apply_to: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Standardizer)> {
    let st = Standardizer::fit(train)?;
    Ok((st.apply_all(train), st.apply_all(apply_to), st))
}

/// CSV with header `method,ride_id,speed,label,f0..fN`.
pub fn features_csv(rows: &[FeatureVector]) -> String {
    let dim = rows.first().map_or(0, |r| r.values.len());
    let mut out = String::from("method,ride_id,speed,label");
    for i in 0..dim {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}", r.method, r.ride_id, r.speed_kmh, r.label.as_str()));
        for v in &r.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`features_csv`].
pub fn parse_features_csv(text: &str) -> Result<Vec<FeatureVector>> {
    let bad = |line: usize, what: &str| Error::InvalidConfig(format!("feature csv line {line}: {what}"));
    let mut lines = text.lines().enumerate();
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))?.1;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..4] != ["method", "ride_id", "speed", "label"] {
        return Err(bad(1, "unexpected header"));
    }
    let dim = cols.len() - 4;
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != dim + 4 {
            return Err(bad(i + 1, "wrong number of fields"));
        }
        let values = f[4..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad(i + 1, "bad number")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureVector {
            values,
            method: f[0].parse()?,
            label: f[3].parse()?,
            speed_kmh: f[2].parse().map_err(|_| bad(i + 1, "bad speed"))?,
            ride_id: f[1].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{db4_kernel, fdwt_forward};
    use proptest::prelude::*;

    #[test]
    fn decibel_layer_example() {
        let p = CoefficientPyramid {
            details: vec![vec![1.0, -10.0]],
            approximation: vec![0.0, 0.0],
            input_lengths: vec![4],
            valid_lengths: vec![2, 2],
        };
        let f = extract_features(&p, None).unwrap();
        assert!((f[0] - 20.0).abs() < 1e-12);
        assert!((f[1] - 20.0 * 5.5f64.log10()).abs() < 1e-12);
        assert!((f[1] - 14.807).abs() < 1e-3);
    }

    #[test]
    fn feature_lengths() {
        let x: Vec<f64> = (0..1 << 17).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let p = fdwt_forward(&x, &[db4_kernel()], 16).unwrap();
        assert_eq!(extract_features(&p, Some((&x, &x))).unwrap().len(), 36);
        assert_eq!(extract_features(&p, None).unwrap().len(), 34);
        assert_eq!(MethodTag::AgAsdf.feature_len(16), 36);
        assert_eq!(MethodTag::Fdwt.feature_len(16), 34);
        assert_eq!(wpt_features(&x[..4096], 4096, &db4_kernel()).unwrap().len(), 32);
        assert_eq!(stft_band_features(&x[..4096]).unwrap().len(), 32);
    }

    #[test]
    fn perfect_reconstruction_zero_residual() {
        let x: Vec<f64> = (0..256).map(|i| (i as f64 * 0.3).cos()).collect();
        let p = fdwt_forward(&x, &[db4_kernel()], 4).unwrap();
        let r = crate::wavelet::fdwt_inverse(&p, &[db4_kernel()]).unwrap();
        let f = extract_features(&p, Some((&x, &r))).unwrap();
        let n = f.len();
        assert!(f[n - 2] < 1e-12 && f[n - 1] < 1e-12, "{:?}", &f[n - 2..]);
    }

    #[test]
    fn extraction_is_bitwise_deterministic() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 13) as f64).sin()).collect();
        let p = fdwt_forward(&x, &[db4_kernel()], 5).unwrap();
        let a = extract_features(&p, None).unwrap();
        let b = extract_features(&p.clone(), None).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn stft_tone_lands_in_second_band() {
        let fs = 20_000.0;
        assert!((fs / STFT_WINDOW as f64 - 19.53).abs() < 0.01);
        let x: Vec<f64> = (0..20_000)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / fs).sin())
            .collect();
        let f = stft_band_features(&x).unwrap();
        let maxes: Vec<f64> = f.iter().step_by(2).copied().collect();
        let best = (0..16).max_by(|&a, &b| maxes[a].total_cmp(&maxes[b])).unwrap();
        assert_eq!(best, 1);
        assert!(matches!(stft_band_features(&x[..1000]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn band_edges_cover_all_bins() {
        let e = stft_band_edges();
        assert_eq!(e.len(), 17);
        assert_eq!((e[0], e[16]), (0, 513));
        assert!(e.windows(2).all(|w| w[1] - w[0] >= 32));
    }

    #[test]
    fn standardizer_contract() {
        let train = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let test = vec![vec![7.0, 9.0]];
        let (tr, te, st) = standardize(&train, &test).unwrap();
        assert_eq!(st.mean, vec![3.0, 5.0]);
        for row in &tr {
            assert_eq!(row[1], 0.0);
        }
        let m: f64 = tr.iter().map(|r| r[0]).sum::<f64>() / 3.0;
        let v: f64 = tr.iter().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        // Test rows reuse training statistics.
        assert!((te[0][0] - 4.0 / (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(te[0][1], 0.0);
        assert!(matches!(Standardizer::fit(&[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn csv_header() {
        let rows = vec![FeatureVector {
            values: vec![1.5, -2.0],
            method: MethodTag::Wpt,
            label: ClassLabel::Severe,
            speed_kmh: 40,
            ride_id: "r1".into(),
        }];
        let csv = features_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("method,ride_id,speed,label,f0,f1"));
        assert_eq!(lines.next(), Some("WPT,r1,40,severe,1.5,-2"));
        assert_eq!(parse_features_csv(&csv).unwrap(), rows);
        assert!(parse_features_csv("method,ride_id,speed,label,f0\nWPT,r1,40,severe\n").is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodTag::ALL {
            assert_eq!(m.as_str().parse::<MethodTag>().unwrap(), m);
        }
        assert_eq!("ag-asdf".parse::<MethodTag>().unwrap(), MethodTag::AgAsdf);
    }

    proptest! {
        #[test]
        fn standardized_train_columns_are_unit(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 2..20)) {
            let st = Standardizer::fit(&rows).unwrap();
            let z = st.apply_all(&rows);
            for c in 0..3 {
                let n = z.len() as f64;
                let m: f64 = z.iter().map(|r| r[c]).sum::<f64>() / n;
                prop_assert!(m.abs() < 1e-9);
                if st.std[c] > 1e-6 {
                    let v: f64 = z.iter().map(|r| r[c] * r[c]).sum::<f64>() / n;
                    prop_assert!((v - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
