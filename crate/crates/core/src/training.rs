//! Losses, reverse-mode gradients, Adam and the training drivers.
//!
//! Two objectives share one backward pass:
//!
//! - `Despawn`: `w_r·Σ|s−ŝ| + w_g·(Σ_l Σ|dˡ| + Σ|aᴸ|)`
//! - `Agasdf`: `w_r·Σ|s−ŝ| + w_g·Σ_bands Σ_m |feaᵐ(acoustic) − feaᵐ(target)|`
//!   with `fea¹ = max|·|`, `fea² = mean|·|` and the target computed from
//!   the acceleration signal's fixed db4 FDWT.
//!
//! Subgradient conventions: `sign(0) = 0`; the gradient of `max|·|` goes to
//! the first index attaining the maximum.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::despawn::{hard_threshold_eval, DespawnModel};
use crate::error::{Error, Result};
use crate::wavelet::{
    db4_kernel, downsample_correlate, fdwt_forward_valid, pad_even, qmf_taps,
    upsample_accumulate, CoefficientPyramid,
};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
pub const DEFAULT_EPOCHS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Reconstruction plus ℓ1 sparsity of the gated coefficients.
    Despawn,
    /// Reconstruction plus feature matching against acceleration targets.
    Agasdf,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "despawn" => Ok(LossKind::Despawn),
            "agasdf" | "ag-asdf" | "ag_asdf" => Ok(LossKind::Agasdf),
            other => Err(Error::InvalidConfig(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// How each ℓ1 term is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Scaling {
    /// Plain sums.
    #[default]
    Sum,
    /// Each ℓ1 norm divided by the number of terms it sums.
    Mean,
}

/// Weights of the reconstruction and regularization/guidance terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_recon: f64,
    pub w_guide: f64,
}

impl LossWeights {
    pub fn new(w_recon: f64, w_guide: f64) -> Result<Self> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(w_recon) || !ok(w_guide) {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be finite and non-negative, got {w_recon}:{w_guide}"
            )));
        }
        if w_recon == 0.0 && w_guide == 0.0 {
            return Err(Error::InvalidConfig("loss weights cannot both be zero".into()));
        }
        Ok(Self { w_recon, w_guide })
    }

    pub fn equal() -> Self {
        Self {
            w_recon: 1.0,
            w_guide: 1.0,
        }
    }

    /// `R:G` notation, e.g. `1:0.5`.
    pub fn label(&self) -> String {
        format!("{}:{}", self.w_recon, self.w_guide)
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::equal()
    }
}

impl FromStr for LossWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (r, g) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("weights must look like R:G, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad weight {v:?}")))
        };
        Self::new(parse(r)?, parse(g)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    pub weights: LossWeights,
    pub scaling: L1Scaling,
}

impl LossConfig {
    pub fn new(kind: LossKind, weights: LossWeights) -> Self {
        Self {
            kind,
            weights,
            scaling: L1Scaling::Sum,
        }
    }
}

/// `(max|c|, mean|c|)` over the first `valid_len` coefficients.
pub fn guidance_features(c: &[f64], valid_len: usize) -> Result<(f64, f64)> {
    let v = valid_len.min(c.len());
    if v == 0 {
        return Err(Error::EmptyValidRegion);
    }
    let region = &c[..v];
    let max = region.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mean = region.iter().map(|x| x.abs()).sum::<f64>() / v as f64;
    Ok((max, mean))
}

/// Per-band `(max|·|, mean|·|)` of the acceleration signal's fixed FDWT:
/// detail layers first, then the final approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceTarget {
    pub bands: Vec<(f64, f64)>,
}

impl GuidanceTarget {
    pub fn from_pyramid(p: &CoefficientPyramid) -> Result<Self> {
        let bands = p
            .valid_bands()
            .map(|c| guidance_features(c, c.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bands })
    }

    /// Target from an acceleration signal (zero-padded after `valid_len`).
    pub fn from_acceleration(samples: &[f64], valid_len: usize, depth: usize) -> Result<Self> {
        Self::from_pyramid(&fdwt_forward_valid(samples, valid_len, &[db4_kernel()], depth)?)
    }

    pub fn depth(&self) -> usize {
        self.bands.len().saturating_sub(1)
    }

    pub fn values(&self) -> Vec<f64> {
        self.bands.iter().flat_map(|&(a, b)| [a, b]).collect()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l1_diff(s: &[f64], s_hat: &[f64]) -> f64 {
    s.iter().zip(s_hat).map(|(a, b)| (a - b).abs()).sum()
}

/// Sparse-regularized loss with plain ℓ1 sums over valid coefficients.
pub fn loss_despawn(s: &[f64], s_hat: &[f64], p: &CoefficientPyramid, gamma: f64) -> Result<f64> {
    if s.len() != s_hat.len() {
        return Err(Error::InvalidConfig(format!(
            "signal lengths differ: {} vs {}",
            s.len(),
            s_hat.len()
        )));
    }
    let reg: f64 = p.valid_bands().flatten().map(|v| v.abs()).sum();
    Ok(l1_diff(s, s_hat) + gamma * reg)
}

/// Guidance loss with plain sums.
pub fn loss_agasdf(
    s: &[f64],
    s_hat: &[f64],
    p: &CoefficientPyramid,
    t: &GuidanceTarget,
    w: LossWeights,
) -> Result<f64> {
    if s.len() != s_hat.len() {
        return Err(Error::InvalidConfig(format!(
            "signal lengths differ: {} vs {}",
            s.len(),
            s_hat.len()
        )));
    }
    Ok(w.w_recon * l1_diff(s, s_hat) + w.w_guide * guidance_mismatch(p, t)?)
}

/// `Σ_bands Σ_m |feaᵐ(p) − feaᵐ(target)|`.
pub fn guidance_mismatch(p: &CoefficientPyramid, t: &GuidanceTarget) -> Result<f64> {
    if p.depth() != t.depth() {
        return Err(Error::DepthMismatch {
            expected: t.depth(),
            found: p.depth(),
        });
    }
    let mut total = 0.0;
    for (c, &(tmax, tmean)) in p.valid_bands().zip(&t.bands) {
        let (max, mean) = guidance_features(c, c.len())?;
        total += (max - tmax).abs() + (mean - tmean).abs();
    }
    Ok(total)
}

/// One training example: a zero-padded acoustic band and, for the guided
/// objective, its acceleration target.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub acoustic: Vec<f64>,
    pub valid_len: usize,
    pub target: Option<GuidanceTarget>,
}

impl TrainingSample {
    pub fn unguided(acoustic: Vec<f64>) -> Self {
        let valid_len = acoustic.len();
        Self {
            acoustic,
            valid_len,
            target: None,
        }
    }
}

/// Loss split into its two terms. `total = w_r·recon + w_g·regularizer`
/// after scaling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub regularizer: f64,
    pub total: f64,
}

/// Everything the backward pass needs from the forward pass.
struct Tape {
    /// Even-padded input of each analysis layer.
    layer_inputs: Vec<Vec<f64>>,
    input_lengths: Vec<usize>,
    raw_details: Vec<Vec<f64>>,
    raw_approx: Vec<f64>,
    gated: CoefficientPyramid,
    /// Approximation entering each synthesis layer (index l-1 for layer l).
    decoder_approx: Vec<Vec<f64>>,
    recon: Vec<f64>,
}

struct Filters {
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
}

impl Filters {
    fn of(model: &DespawnModel) -> Self {
        let lo: Vec<Vec<f64>> = model.kernels().iter().map(|k| k.taps().to_vec()).collect();
        let hi = lo.iter().map(|h| qmf_taps(h)).collect();
        Self { lo, hi }
    }
}

fn forward(model: &DespawnModel, filters: &Filters, x: &[f64], valid_len: usize) -> Tape {
    let depth = model.depth();
    let mut layer_inputs = Vec::with_capacity(depth);
    let mut input_lengths = Vec::with_capacity(depth);
    let mut raw_details = Vec::with_capacity(depth);
    let mut current = x.to_vec();
    for l in 0..depth {
        input_lengths.push(current.len());
        let p = pad_even(&current);
        let half = p.len() / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        downsample_correlate(&p, &filters.lo[l], &mut a);
        downsample_correlate(&p, &filters.hi[l], &mut d);
        layer_inputs.push(p);
        raw_details.push(d);
        current = a;
    }
    let raw_approx = current;
    let th = model.thresholds();
    let details: Vec<Vec<f64>> = raw_details
        .iter()
        .zip(th)
        .map(|(d, t)| d.iter().map(|&v| hard_threshold_eval(v, t).value).collect())
        .collect();
    let approximation: Vec<f64> = raw_approx
        .iter()
        .map(|&v| hard_threshold_eval(v, &th[depth]).value)
        .collect();
    let mut valid_lengths = crate::wavelet::dyadic_valid_lengths(valid_len, depth);
    valid_lengths.push(valid_lengths[depth - 1]);
    let gated = CoefficientPyramid {
        details,
        approximation,
        input_lengths: input_lengths.clone(),
        valid_lengths,
    };

    let mut decoder_approx = vec![Vec::new(); depth];
    let mut y = gated.approximation.clone();
    for l in (0..depth).rev() {
        let mut q = vec![0.0; 2 * y.len()];
        upsample_accumulate(&y, &filters.lo[l], &mut q);
        upsample_accumulate(&gated.details[l], &filters.hi[l], &mut q);
        q.truncate(input_lengths[l]);
        decoder_approx[l] = std::mem::replace(&mut y, q);
    }
    Tape {
        layer_inputs,
        input_lengths,
        raw_details,
        raw_approx,
        gated,
        decoder_approx,
        recon: y,
    }
}

/// Loss terms and their gradients with respect to `ŝ` and the gated pyramid.
struct LossGrad {
    breakdown: LossBreakdown,
    d_recon: Vec<f64>,
    d_details: Vec<Vec<f64>>,
    d_approx: Vec<f64>,
}

fn loss_with_seed(tape: &Tape, sample: &TrainingSample, cfg: &LossConfig) -> Result<LossGrad> {
    let p = &tape.gated;
    let depth = p.depth();
    let w = cfg.weights;
    let valid = sample.valid_len;
    let s = &sample.acoustic[..valid];
    let s_hat = &tape.recon[..valid];

    let recon_scale = match cfg.scaling {
        L1Scaling::Sum => 1.0,
        L1Scaling::Mean => 1.0 / valid as f64,
    };
    let recon = l1_diff(s, s_hat) * recon_scale;
    let mut d_recon = vec![0.0; tape.recon.len()];
    for i in 0..valid {
        d_recon[i] = w.w_recon * recon_scale * sign(s_hat[i] - s[i]);
    }

    let mut d_details: Vec<Vec<f64>> = p.details.iter().map(|d| vec![0.0; d.len()]).collect();
    let mut d_approx = vec![0.0; p.approximation.len()];

    let regularizer = match cfg.kind {
        LossKind::Despawn => {
            let count: usize = p.valid_lengths.iter().sum();
            let scale = match cfg.scaling {
                L1Scaling::Sum => 1.0,
                L1Scaling::Mean => 1.0 / count as f64,
            };
            let mut reg = 0.0;
            for b in 0..=depth {
                let (coeffs, grads) = if b < depth {
                    (&p.details[b], &mut d_details[b])
                } else {
                    (&p.approximation, &mut d_approx)
                };
                for k in 0..p.valid_lengths[b] {
                    reg += coeffs[k].abs();
                    grads[k] += w.w_guide * scale * sign(coeffs[k]);
                }
            }
            reg * scale
        }
        LossKind::Agasdf => {
            let target = sample.target.as_ref().ok_or_else(|| {
                Error::InvalidConfig("guided loss needs an acceleration target".into())
            })?;
            if target.depth() != depth {
                return Err(Error::DepthMismatch {
                    expected: depth,
                    found: target.depth(),
                });
            }
            let scale = match cfg.scaling {
                L1Scaling::Sum => 1.0,
                L1Scaling::Mean => 1.0 / (2 * (depth + 1)) as f64,
            };
            let mut mismatch = 0.0;
            for b in 0..=depth {
                let (coeffs, grads) = if b < depth {
                    (&p.details[b], &mut d_details[b])
                } else {
                    (&p.approximation, &mut d_approx)
                };
                let v = p.valid_lengths[b];
                let (tmax, tmean) = target.bands[b];
                let region = &coeffs[..v];
                let mut arg = 0;
                let mut max = region[0].abs();
                for (k, c) in region.iter().enumerate().skip(1) {
                    if c.abs() > max {
                        max = c.abs();
                        arg = k;
                    }
                }
                let mean = region.iter().map(|c| c.abs()).sum::<f64>() / v as f64;
                mismatch += (max - tmax).abs() + (mean - tmean).abs();
                let g_max = w.w_guide * scale * sign(max - tmax);
                let g_mean = w.w_guide * scale * sign(mean - tmean) / v as f64;
                grads[arg] += g_max * sign(region[arg]);
                for k in 0..v {
                    grads[k] += g_mean * sign(region[k]);
                }
            }
            mismatch * scale
        }
    };

    Ok(LossGrad {
        breakdown: LossBreakdown {
            recon,
            regularizer,
            total: w.w_recon * recon + w.w_guide * regularizer,
        },
        d_recon,
        d_details,
        d_approx,
    })
}

/// Gradient of a strided correlation (or its transpose) with respect to the
/// filter taps: `out[n] += Σ_k y[k]·g[(2k + n) mod m]`.
fn accumulate_tap_grad(y: &[f64], g: &[f64], out: &mut [f64]) {
    let m = g.len();
    let taps = out.len();
    for (k, &yv) in y.iter().enumerate() {
        if yv == 0.0 {
            continue;
        }
        let start = 2 * k;
        if start + taps <= m {
            for (o, gv) in out.iter_mut().zip(&g[start..start + taps]) {
                *o += yv * gv;
            }
        } else {
            for (n, o) in out.iter_mut().enumerate() {
                *o += yv * g[(start + n) % m];
            }
        }
    }
}

fn backward(model: &DespawnModel, filters: &Filters, tape: &Tape, seed: LossGrad) -> Vec<f64> {
    let depth = model.depth();
    let taps = model.kernel_len();
    let th = model.thresholds();
    let mut g_lo = vec![vec![0.0; taps]; depth];
    let mut g_hi = vec![vec![0.0; taps]; depth];
    let mut g_bias = vec![(0.0, 0.0); depth + 1];

    let LossGrad {
        d_recon,
        mut d_details,
        d_approx,
        ..
    } = seed;

    // Decoder, from ŝ back to the gated pyramid.
    let mut g_y = d_recon;
    for l in 0..depth {
        let m = 2 * tape.gated.details[l].len();
        g_y.resize(m, 0.0);
        let half = m / 2;
        let mut g_next = vec![0.0; half];
        let mut g_d = vec![0.0; half];
        downsample_correlate(&g_y, &filters.lo[l], &mut g_next);
        downsample_correlate(&g_y, &filters.hi[l], &mut g_d);
        accumulate_tap_grad(&tape.decoder_approx[l], &g_y, &mut g_lo[l]);
        accumulate_tap_grad(&tape.gated.details[l], &g_y, &mut g_hi[l]);
        for (a, b) in d_details[l].iter_mut().zip(&g_d) {
            *a += b;
        }
        g_y = g_next;
    }
    let mut g_gated_approx = g_y;
    for (a, b) in g_gated_approx.iter_mut().zip(&d_approx) {
        *a += b;
    }

    // Gates.
    let mut gate_back = |raw: &[f64], upstream: &[f64], gate: usize| -> Vec<f64> {
        let mut out = vec![0.0; raw.len()];
        for k in 0..raw.len() {
            let e = hard_threshold_eval(raw[k], &th[gate]);
            out[k] = upstream[k] * e.d_x;
            g_bias[gate].0 += upstream[k] * e.d_b_plus;
            g_bias[gate].1 += upstream[k] * e.d_b_minus;
        }
        out
    };
    let g_raw_details: Vec<Vec<f64>> = (0..depth)
        .map(|l| gate_back(&tape.raw_details[l], &d_details[l], l))
        .collect();
    let mut g_a = gate_back(&tape.raw_approx, &g_gated_approx, depth);

    // Encoder.
    for l in (0..depth).rev() {
        let p = &tape.layer_inputs[l];
        accumulate_tap_grad(&g_a, p, &mut g_lo[l]);
        accumulate_tap_grad(&g_raw_details[l], p, &mut g_hi[l]);
        if l > 0 {
            let mut g_p = vec![0.0; p.len()];
            upsample_accumulate(&g_a, &filters.lo[l], &mut g_p);
            upsample_accumulate(&g_raw_details[l], &filters.hi[l], &mut g_p);
            g_p.truncate(tape.input_lengths[l]);
            g_a = g_p;
        }
    }

    // Fold the high-pass gradient onto the shared kernel: g[n] = (−1)^n h[K−1−n].
    let mut flat = Vec::with_capacity(model.num_params());
    for l in 0..depth {
        let mut g = g_lo[l].clone();
        for n in 0..taps {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            g[taps - 1 - n] += s * g_hi[l][n];
        }
        flat.extend(g);
    }
    for (bp, bm) in g_bias {
        flat.push(bp);
        flat.push(bm);
    }
    flat
}

/// Loss, gated pyramid and reconstruction for one sample.
pub fn evaluate_loss(
    model: &DespawnModel,
    sample: &TrainingSample,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let filters = Filters::of(model);
    let tape = forward(model, &filters, &sample.acoustic, sample.valid_len);
    Ok(loss_with_seed(&tape, sample, cfg)?.breakdown)
}

/// Loss and analytic gradient with respect to [`DespawnModel::params`].
pub fn loss_and_gradient(
    model: &DespawnModel,
    sample: &TrainingSample,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Vec<f64>)> {
    check_sample(model, sample)?;
    let filters = Filters::of(model);
    let tape = forward(model, &filters, &sample.acoustic, sample.valid_len);
    let seed = loss_with_seed(&tape, sample, cfg)?;
    let breakdown = seed.breakdown;
    let grads = backward(model, &filters, &tape, seed);
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            parameter: model.param_name(i),
        });
    }
    Ok((breakdown, grads))
}

fn check_sample(model: &DespawnModel, sample: &TrainingSample) -> Result<()> {
    if sample.acoustic.is_empty() || sample.valid_len == 0 || sample.valid_len > sample.acoustic.len() {
        return Err(Error::InvalidConfig(format!(
            "sample valid length {} outside 1..={}",
            sample.valid_len,
            sample.acoustic.len()
        )));
    }
    if let Some(t) = &sample.target {
        if t.depth() != model.depth() {
            return Err(Error::DepthMismatch {
                expected: model.depth(),
                found: t.depth(),
            });
        }
    }
    Ok(())
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::InvalidConfig(format!(
                "adam shape mismatch: {} params, {} grads, state {}",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / c1;
            let v_hat = self.second_moment[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_rel_improvement: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            patience: 20,
            min_rel_improvement: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_stop: Option<EarlyStop>,
}

impl TrainConfig {
    pub fn new(kind: LossKind, weights: LossWeights) -> Self {
        Self {
            loss: LossConfig::new(kind, weights),
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
            early_stop: Some(EarlyStop::default()),
        }
    }
}

/// Mean per-sample losses over one epoch, measured before each update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_recon: f64,
    pub mean_regularizer: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DespawnModel,
    pub trace: Vec<EpochStats>,
}

impl TrainOutcome {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,mean_recon,mean_regularizer\n");
        for e in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.mean_loss, e.mean_recon, e.mean_regularizer
            ));
        }
        out
    }
}

/// Stochastic training, one Adam step per sample, samples visited in a
/// seeded shuffled order each epoch.
pub fn train(init: &DespawnModel, samples: &[TrainingSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in samples {
        check_sample(init, s)?;
        if cfg.loss.kind == LossKind::Agasdf && s.target.is_none() {
            return Err(Error::InvalidConfig(
                "guided training needs an acceleration target for every sample".into(),
            ));
        }
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("learning rate must be positive".into()));
    }
    let mut model = init.clone();
    let mut params = model.params();
    let mut adam = AdamState::new(params.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        for &i in &order {
            let (lb, grads) = loss_and_gradient(&model, &samples[i], &cfg.loss)?;
            if !lb.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            sum.total += lb.total;
            sum.recon += lb.recon;
            sum.regularizer += lb.regularizer;
            adam.step(&mut params, &grads)?;
            model.set_params(&params)?;
        }
        let n = samples.len() as f64;
        let stats = EpochStats {
            epoch,
            mean_loss: sum.total / n,
            mean_recon: sum.recon / n,
            mean_regularizer: sum.regularizer / n,
        };
        trace.push(stats);
        if let Some(es) = cfg.early_stop {
            if best.is_finite() && (best - stats.mean_loss) < es.min_rel_improvement * best.abs() {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(stats.mean_loss);
            if stale >= es.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome { model, trace })
}

/// Result of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub worst_rel_error: f64,
    pub worst_param: String,
    pub n_params: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Denominator floor of the relative error, so parameters whose true
/// gradient is ~0 are judged on absolute error instead of on noise.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Central-difference gradient of the loss with respect to every parameter.
pub fn numeric_gradient(
    model: &DespawnModel,
    sample: &TrainingSample,
    cfg: &LossConfig,
    step: f64,
) -> Result<Vec<f64>> {
    let base = model.params();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + step;
        probe.set_params(&p)?;
        let plus = evaluate_loss(&probe, sample, cfg)?.total;
        p[i] = base[i] - step;
        probe.set_params(&p)?;
        let minus = evaluate_loss(&probe, sample, cfg)?.total;
        p[i] = base[i];
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Compares supplied analytic gradients against central differences.
pub fn compare_gradients(
    model: &DespawnModel,
    sample: &TrainingSample,
    cfg: &LossConfig,
    analytic: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let numeric = numeric_gradient(model, sample, cfg, step)?;
    let mut worst = 0.0;
    let mut worst_i = 0;
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(a, n);
        if e > worst || e.is_nan() {
            worst = e;
            worst_i = i;
        }
    }
    Ok(GradCheckReport {
        worst_rel_error: worst,
        worst_param: model.param_name(worst_i),
        n_params: analytic.len(),
        tolerance,
        passed: worst <= tolerance,
    })
}

pub fn gradient_check(
    model: &DespawnModel,
    sample: &TrainingSample,
    cfg: &LossConfig,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = loss_and_gradient(model, sample, cfg)?;
    compare_gradients(model, sample, cfg, &analytic, step, tolerance)
}

/// Distance of the current point from the nearest non-differentiable
/// point of the loss (ℓ1 zero crossings, argmax switches).
pub fn kink_margin(model: &DespawnModel, sample: &TrainingSample, cfg: &LossConfig) -> f64 {
    let filters = Filters::of(model);
    let tape = forward(model, &filters, &sample.acoustic, sample.valid_len);
    let v = sample.valid_len;
    let mut margin = sample.acoustic[..v]
        .iter()
        .zip(&tape.recon[..v])
        .map(|(a, b)| (a - b).abs())
        .fold(f64::INFINITY, f64::min);
    let p = &tape.gated;
    let raw: Vec<&[f64]> = tape
        .raw_details
        .iter()
        .map(Vec::as_slice)
        .chain(std::iter::once(tape.raw_approx.as_slice()))
        .collect();
    for (b, gated) in p.valid_bands().enumerate() {
        let r = &raw[b][..gated.len()];
        margin = margin.min(r.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())));
        if cfg.kind == LossKind::Agasdf {
            let mut mags: Vec<f64> = gated.iter().map(|x| x.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            if mags.len() > 1 {
                margin = margin.min(mags[0] - mags[1]);
            }
            if let Some(t) = &sample.target {
                let (max, mean) = guidance_features(gated, gated.len()).unwrap_or((0.0, 0.0));
                margin = margin.min((max - t.bands[b].0).abs());
                margin = margin.min((mean - t.bands[b].1).abs());
            }
        }
    }
    margin
}

/// Random paired instance for gradient checking: Gaussian acoustic and
/// acceleration signals of length `n`, db4 model with default biases.
/// Inputs are nudged by 1e-3 noise until every kink is at least
/// `min_margin` away.
pub fn random_gradcheck_instance(
    seed: u64,
    n: usize,
    depth: usize,
    cfgs: &[LossConfig],
    min_margin: f64,
) -> Result<(DespawnModel, TrainingSample)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = DespawnModel::db4(depth, crate::despawn::DEFAULT_BIAS)?;
    let mut acoustic: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let accel: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let target = GuidanceTarget::from_acceleration(&accel, n, depth)?;
    for _ in 0..1000 {
        let sample = TrainingSample {
            acoustic: acoustic.clone(),
            valid_len: n,
            target: Some(target.clone()),
        };
        if cfgs.iter().all(|c| kink_margin(&model, &sample, c) >= min_margin) {
            return Ok((model, sample));
        }
        for x in &mut acoustic {
            *x += rng.random_range(-1e-3..1e-3);
        }
    }
    Err(Error::InvalidConfig(format!(
        "could not find a kink-free instance for seed {seed}"
    )))
}

/// The loss configurations exercised by [`run_gradcheck`].
pub fn gradcheck_configs() -> Vec<LossConfig> {
    let mut out = Vec::new();
    for kind in [LossKind::Despawn, LossKind::Agasdf] {
        for scaling in [L1Scaling::Sum, L1Scaling::Mean] {
            out.push(LossConfig {
                kind,
                weights: LossWeights::equal(),
                scaling,
            });
        }
    }
    out
}

/// Finite-difference check of every parameter for both objectives and
/// both scalings on one seeded random instance. Returns the worst report.
pub fn run_gradcheck(seed: u64, n: usize, depth: usize, step: f64, tolerance: f64) -> Result<GradCheckReport> {
    let cfgs = gradcheck_configs();
    let (model, sample) = random_gradcheck_instance(seed, n, depth, &cfgs, 1e-4)?;
    let mut worst: Option<GradCheckReport> = None;
    for cfg in &cfgs {
        let r = gradient_check(&model, &sample, cfg, step, tolerance)?;
        if worst.as_ref().is_none_or(|w| r.worst_rel_error > w.worst_rel_error) {
            worst = Some(r);
        }
    }
    Ok(worst.expect("at least one configuration"))
}
