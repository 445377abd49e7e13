//! Learnable wavelet encoder/decoder.
//!
//! Each layer owns one low-pass kernel; its high-pass is the alternating
//! flip of that kernel and the decoder reuses both. Every detail layer and
//! the final approximation pass through a learnable hard-threshold gate.
//! Intermediate approximations are not gated, and the decoder has no gates.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::{self, db4_kernel, CoefficientPyramid, Kernel};

/// Sharpness of the threshold gate.
pub const DEFAULT_ALPHA: f64 = 10.0;

/// Initial value of both threshold biases.
pub const DEFAULT_BIAS: f64 = 0.5;

/// Sigmoid arguments are clamped to ±this before exponentiation.
pub const EXP_CLAMP: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardThresholdParams {
    pub b_plus: f64,
    pub b_minus: f64,
    pub alpha: f64,
}

impl HardThresholdParams {
    pub fn new(b_plus: f64, b_minus: f64, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        if !(b_plus.is_finite() && b_minus.is_finite()) {
            return Err(Error::InvalidConfig("threshold biases must be finite".into()));
        }
        Ok(Self {
            b_plus,
            b_minus,
            alpha,
        })
    }

    pub fn symmetric(bias: f64) -> Self {
        Self {
            b_plus: bias,
            b_minus: bias,
            alpha: DEFAULT_ALPHA,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z.clamp(-EXP_CLAMP, EXP_CLAMP)).exp())
}

/// Gate value and the partials needed by the backward pass.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdEval {
    pub value: f64,
    /// d value / d x
    pub d_x: f64,
    pub d_b_plus: f64,
    pub d_b_minus: f64,
}

/// `x · [1/(1+exp(α(x+b₋))) + 1/(1+exp(−α(x−b₊)))]`.
///
/// The first term is evaluated as `1 − σ(α(x+b₋))`, so zero biases give
/// the identity bit-for-bit. Negative inputs use the mirror identity
/// `HT(x; b₊, b₋) = −HT(−x; b₋, b₊)`, which makes the gate exactly odd when
/// `b₊ = b₋`.
pub fn hard_threshold(x: f64, p: &HardThresholdParams) -> f64 {
    hard_threshold_eval(x, p).value
}

pub fn hard_threshold_eval(x: f64, p: &HardThresholdParams) -> ThresholdEval {
    if x < 0.0 {
        let m = gate_eval(-x, p.b_minus, p.b_plus, p.alpha);
        ThresholdEval {
            value: -m.value,
            d_x: m.d_x,
            d_b_plus: -m.d_b_minus,
            d_b_minus: -m.d_b_plus,
        }
    } else {
        gate_eval(x, p.b_plus, p.b_minus, p.alpha)
    }
}

fn gate_eval(x: f64, b_plus: f64, b_minus: f64, alpha: f64) -> ThresholdEval {
    let lower = sigmoid(alpha * (x + b_minus));
    let upper = sigmoid(alpha * (x - b_plus));
    let gate = (1.0 - lower) + upper;
    let dl = alpha * lower * (1.0 - lower);
    let du = alpha * upper * (1.0 - upper);
    ThresholdEval {
        value: x * gate,
        d_x: gate + x * (du - dl),
        d_b_plus: -x * du,
        d_b_minus: -x * dl,
    }
}

/// Optional record of how inputs were preprocessed before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationInfo {
    /// Always `"per_signal_zscore"` for models produced by this crate.
    pub method: String,
    pub n_bands: usize,
    pub pad_length: usize,
    pub sample_rate_hz: f64,
    /// Mean/std of the raw training acoustic signals, averaged over rides.
    pub train_mean: f64,
    pub train_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DespawnModel {
    kernels: Vec<Kernel>,
    /// One per detail layer, then one for the final approximation.
    thresholds: Vec<HardThresholdParams>,
    pub normalization: Option<NormalizationInfo>,
}

impl DespawnModel {
    pub fn new(kernels: Vec<Kernel>, thresholds: Vec<HardThresholdParams>) -> Result<Self> {
        let depth = kernels.len();
        if depth == 0 {
            return Err(Error::InvalidConfig("model depth must be at least 1".into()));
        }
        if thresholds.len() != depth + 1 {
            return Err(Error::DepthMismatch {
                expected: depth + 1,
                found: thresholds.len(),
            });
        }
        Ok(Self {
            kernels,
            thresholds,
            normalization: None,
        })
    }

    /// db4 kernels at every layer and symmetric biases.
    pub fn db4(depth: usize, bias: f64) -> Result<Self> {
        Self::new(
            vec![db4_kernel(); depth],
            vec![HardThresholdParams::symmetric(bias); depth + 1],
        )
    }

    pub fn depth(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn thresholds(&self) -> &[HardThresholdParams] {
        &self.thresholds
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels[0].len()
    }

    pub fn num_params(&self) -> usize {
        self.kernels.iter().map(Kernel::len).sum::<usize>() + 2 * self.thresholds.len()
    }

    /// Flat parameter vector: all kernel taps layer by layer, then
    /// `(b₊, b₋)` per gate.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for k in &self.kernels {
            out.extend_from_slice(k.taps());
        }
        for t in &self.thresholds {
            out.push(t.b_plus);
            out.push(t.b_minus);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for k in &mut self.kernels {
            for t in k.taps_mut() {
                *t = it.next().unwrap();
            }
        }
        for t in &mut self.thresholds {
            t.b_plus = it.next().unwrap();
            t.b_minus = it.next().unwrap();
        }
        Ok(())
    }

    /// Human-readable name of flat parameter `i`.
    pub fn param_name(&self, i: usize) -> String {
        let k = self.kernel_len();
        let taps = self.depth() * k;
        if i < taps {
            format!("kernel[{}][{}]", i / k + 1, i % k)
        } else {
            let j = i - taps;
            let gate = j / 2;
            let band = if gate == self.depth() {
                "approx".to_string()
            } else {
                format!("detail{}", gate + 1)
            };
            let side = if j.is_multiple_of(2) { "b_plus" } else { "b_minus" };
            format!("{side}[{band}]")
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            depth: self.depth(),
            alpha: self.thresholds[0].alpha,
            kernels: self.kernels.iter().map(|k| k.taps().to_vec()).collect(),
            thresholds: self
                .thresholds
                .iter()
                .map(|t| ThresholdPair {
                    b_plus: t.b_plus,
                    b_minus: t.b_minus,
                })
                .collect(),
            normalization: self.normalization.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.kernels.len() != file.depth {
            return Err(Error::DepthMismatch {
                expected: file.depth,
                found: file.kernels.len(),
            });
        }
        let kernels = file
            .kernels
            .into_iter()
            .map(Kernel::new)
            .collect::<Result<Vec<_>>>()?;
        let thresholds = file
            .thresholds
            .iter()
            .map(|t| HardThresholdParams::new(t.b_plus, t.b_minus, file.alpha))
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self::new(kernels, thresholds)?;
        model.normalization = file.normalization;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ThresholdPair {
    b_plus: f64,
    b_minus: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    depth: usize,
    alpha: f64,
    kernels: Vec<Vec<f64>>,
    thresholds: Vec<ThresholdPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<NormalizationInfo>,
}

pub fn encode(samples: &[f64], model: &DespawnModel) -> Result<CoefficientPyramid> {
    encode_valid(samples, samples.len(), model)
}

/// Encoder for a zero-padded input whose first `valid_len` samples are data.
pub fn encode_valid(samples: &[f64], valid_len: usize, model: &DespawnModel) -> Result<CoefficientPyramid> {
    let mut p = wavelet::fdwt_forward_valid(samples, valid_len, model.kernels(), model.depth())?;
    for (d, t) in p.details.iter_mut().zip(&model.thresholds) {
        d.iter_mut().for_each(|v| *v = hard_threshold(*v, t));
    }
    let t = &model.thresholds[model.depth()];
    p.approximation
        .iter_mut()
        .for_each(|v| *v = hard_threshold(*v, t));
    Ok(p)
}

pub fn decode(p: &CoefficientPyramid, model: &DespawnModel) -> Result<Vec<f64>> {
    if p.depth() != model.depth() {
        return Err(Error::DepthMismatch {
            expected: model.depth(),
            found: p.depth(),
        });
    }
    wavelet::fdwt_inverse(p, model.kernels())
}
