//! Fixed (non-learnable) orthogonal wavelet machinery.
//!
//! All filtering is circular. A layer whose input has odd length gets one
//! trailing zero before filtering; the pre-pad length is kept in the
//! pyramid so the synthesis cascade can drop it again.
//!
//! Analysis uses the correlation form
//! `a[k] = Σ_n h[n]·x[(2k + n) mod m]`, and synthesis is its transpose
//! (`x[(2k + n) mod m] += h[n]·a[k] + g[n]·d[k]`), which for an orthonormal
//! kernel is also its inverse.

use crate::error::{Error, Result};

/// Orthonormal Daubechies low-pass with four vanishing moments (8 taps).
pub const DB4_TAPS: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_6,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_86,
    -0.187_034_811_719_093_1,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Analysis low-pass taps. Always even length.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || !taps.len().is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "kernel length must be even and non-zero, got {}",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("kernel taps must be finite".into()));
        }
        Ok(Self { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [f64] {
        &mut self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

pub fn db4_kernel() -> Kernel {
    Kernel {
        taps: DB4_TAPS.to_vec(),
    }
}

/// Alternating flip: `g[n] = (-1)^n · h[K-1-n]`.
pub fn qmf_highpass(h: &Kernel) -> Kernel {
    Kernel {
        taps: qmf_taps(&h.taps),
    }
}

pub(crate) fn qmf_taps(h: &[f64]) -> Vec<f64> {
    let k = h.len();
    (0..k)
        .map(|n| {
            let v = h[k - 1 - n];
            if n % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// `out[k] = Σ_n f[n]·x[(2k + n) mod m]` for `k < m/2`, `m = x.len()` even.
pub fn downsample_correlate(x: &[f64], f: &[f64], out: &mut [f64]) {
    let m = x.len();
    debug_assert!(m.is_multiple_of(2) && out.len() == m / 2);
    let taps = f.len();
    for (k, o) in out.iter_mut().enumerate() {
        let start = 2 * k;
        *o = if start + taps <= m {
            x[start..start + taps]
                .iter()
                .zip(f)
                .map(|(xv, fv)| xv * fv)
                .sum()
        } else {
            f.iter()
                .enumerate()
                .map(|(n, fv)| fv * x[(start + n) % m])
                .sum()
        };
    }
}

/// Transpose of [`downsample_correlate`]: `x[(2k + n) mod m] += f[n]·y[k]`.
pub fn upsample_accumulate(y: &[f64], f: &[f64], x: &mut [f64]) {
    let m = x.len();
    debug_assert!(m == 2 * y.len());
    let taps = f.len();
    for (k, &yv) in y.iter().enumerate() {
        let start = 2 * k;
        if start + taps <= m {
            for (xv, fv) in x[start..start + taps].iter_mut().zip(f) {
                *xv += fv * yv;
            }
        } else {
            for (n, fv) in f.iter().enumerate() {
                x[(start + n) % m] += fv * yv;
            }
        }
    }
}

/// Even-length working copy of a layer input.
pub(crate) fn pad_even(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    if v.len() % 2 == 1 {
        v.push(0.0);
    }
    v
}

/// One analysis layer: returns `(approximation, detail)`.
pub fn analysis_step(x: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = pad_even(x);
    let half = p.len() / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    downsample_correlate(&p, lo, &mut a);
    downsample_correlate(&p, hi, &mut d);
    (a, d)
}

/// One synthesis layer, trimmed to `out_len` (the layer's pre-pad input length).
pub fn synthesis_step(a: &[f64], d: &[f64], lo: &[f64], hi: &[f64], out_len: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), d.len());
    let mut x = vec![0.0; 2 * a.len()];
    upsample_accumulate(a, lo, &mut x);
    upsample_accumulate(d, hi, &mut x);
    x.truncate(out_len);
    x
}

/// Detail coefficients `d¹..dᴸ`, the final approximation `aᴸ`, and the
/// length bookkeeping needed to invert or to ignore padding.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPyramid {
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    /// Length of each layer's input before odd-length padding (layer 1 first).
    pub input_lengths: Vec<usize>,
    /// Coefficients not produced purely by zero padding: one entry per
    /// detail layer followed by one for the approximation.
    pub valid_lengths: Vec<usize>,
}

impl CoefficientPyramid {
    pub fn depth(&self) -> usize {
        self.details.len()
    }

    /// Detail layers followed by the approximation, each cut to its valid length.
    pub fn valid_bands(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.details
            .iter()
            .chain(std::iter::once(&self.approximation))
            .zip(&self.valid_lengths)
            .map(|(c, &v)| &c[..v])
    }

    /// Sum of squares of every coefficient.
    pub fn energy(&self) -> f64 {
        self.details
            .iter()
            .chain(std::iter::once(&self.approximation))
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum()
    }

    pub fn map_coefficients(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            details: self
                .details
                .iter()
                .map(|d| d.iter().map(|&v| f(v)).collect())
                .collect(),
            approximation: self.approximation.iter().map(|&v| f(v)).collect(),
            input_lengths: self.input_lengths.clone(),
            valid_lengths: self.valid_lengths.clone(),
        }
    }
}

/// Per-layer low/high-pass pair resolved from either one shared kernel or
/// one kernel per layer.
pub(crate) fn layer_filters(kernels: &[Kernel], depth: usize) -> Result<Vec<(&[f64], Vec<f64>)>> {
    match kernels.len() {
        1 => {
            let hi = qmf_taps(kernels[0].taps());
            Ok((0..depth)
                .map(|_| (kernels[0].taps(), hi.clone()))
                .collect())
        }
        n if n == depth => Ok(kernels
            .iter()
            .map(|k| (k.taps(), qmf_taps(k.taps())))
            .collect()),
        n => Err(Error::DepthMismatch {
            expected: depth,
            found: n,
        }),
    }
}

/// Valid coefficient counts after each of `depth` halvings of `valid`.
pub fn dyadic_valid_lengths(valid: usize, depth: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(depth);
    let mut v = valid;
    for _ in 0..depth {
        v = v.div_ceil(2);
        out.push(v);
    }
    out
}

pub fn fdwt_forward(samples: &[f64], kernels: &[Kernel], depth: usize) -> Result<CoefficientPyramid> {
    fdwt_forward_valid(samples, samples.len(), kernels, depth)
}

/// Forward cascade where only the first `valid_len` input samples are data
/// and the rest is zero padding.
pub fn fdwt_forward_valid(
    samples: &[f64],
    valid_len: usize,
    kernels: &[Kernel],
    depth: usize,
) -> Result<CoefficientPyramid> {
    if depth == 0 {
        return Err(Error::InvalidConfig("depth must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidSignal("no samples".into()));
    }
    if valid_len == 0 || valid_len > samples.len() {
        return Err(Error::InvalidConfig(format!(
            "valid length {valid_len} outside 1..={}",
            samples.len()
        )));
    }
    let filters = layer_filters(kernels, depth)?;
    let mut details = Vec::with_capacity(depth);
    let mut input_lengths = Vec::with_capacity(depth);
    let mut current = samples.to_vec();
    for (lo, hi) in &filters {
        input_lengths.push(current.len());
        let (a, d) = analysis_step(&current, lo, hi);
        details.push(d);
        current = a;
    }
    let mut valid_lengths = dyadic_valid_lengths(valid_len, depth);
    valid_lengths.push(*valid_lengths.last().unwrap());
    Ok(CoefficientPyramid {
        details,
        approximation: current,
        input_lengths,
        valid_lengths,
    })
}

pub fn fdwt_inverse(p: &CoefficientPyramid, kernels: &[Kernel]) -> Result<Vec<f64>> {
    let depth = p.depth();
    if depth == 0 || p.input_lengths.len() != depth {
        return Err(Error::DepthMismatch {
            expected: depth,
            found: p.input_lengths.len(),
        });
    }
    let filters = layer_filters(kernels, depth)?;
    let mut current = p.approximation.clone();
    for l in (0..depth).rev() {
        let (lo, hi) = &filters[l];
        if p.details[l].len() != current.len() {
            return Err(Error::InvalidConfig(format!(
                "layer {} detail length {} does not match approximation length {}",
                l + 1,
                p.details[l].len(),
                current.len()
            )));
        }
        current = synthesis_step(&current, &p.details[l], lo, hi, p.input_lengths[l]);
    }
    Ok(current)
}

/// Full wavelet-packet tree of the given depth; leaves are returned in
/// increasing frequency order.
pub fn wpt_bands(samples: &[f64], kernel: &Kernel, depth: usize) -> Result<Vec<Vec<f64>>> {
    Ok(wpt_bands_valid(samples, samples.len(), kernel, depth)?.0)
}

/// As [`wpt_bands`], also returning the valid coefficient count per leaf.
pub fn wpt_bands_valid(
    samples: &[f64],
    valid_len: usize,
    kernel: &Kernel,
    depth: usize,
) -> Result<(Vec<Vec<f64>>, usize)> {
    if depth == 0 {
        return Err(Error::InvalidConfig("depth must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidSignal("no samples".into()));
    }
    let lo = kernel.taps();
    let hi = qmf_taps(lo);
    // Natural (filter-path) order: bit 1 at a level means the high-pass branch.
    let mut nodes = vec![samples.to_vec()];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for node in &nodes {
            let (a, d) = analysis_step(node, lo, &hi);
            next.push(a);
            next.push(d);
        }
        nodes = next;
    }
    // The high-pass branch mirrors the spectrum, so frequency rank f sits at
    // natural position gray(f).
    let ordered = (0..nodes.len())
        .map(|f| nodes[f ^ (f >> 1)].clone())
        .collect();
    let valid = *dyadic_valid_lengths(valid_len.max(1), depth).last().unwrap();
    Ok((ordered, valid))
}
