//! Multiclass RBF support vector machine: one-vs-one binary machines solved
//! by SMO with second-order working-set selection, ride-grouped stratified
//! cross-validation and per-class recall evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Standardizer;

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_GAMMA_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const DEFAULT_FOLDS: usize = 5;
pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tolerance: KKT_TOLERANCE,
            max_iter: 100_000,
        }
    }
}

/// Solution of `min ½αᵀQα − Σα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0`, with
/// `Q_ij = y_i y_j K_ij`. The decision function is `Σ α_i y_i K(x_i, x) − rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
}

fn is_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn is_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

/// Largest violation `max_{I_up} −y·G − min_{I_low} −y·G`; zero at an exact
/// optimum.
pub fn kkt_gap(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if is_up(alpha[t], y[t], c) {
            up = up.max(v);
        }
        if is_low(alpha[t], y[t], c) {
            low = low.min(v);
        }
    }
    if up.is_finite() && low.is_finite() {
        (up - low).max(0.0)
    } else {
        0.0
    }
}

/// Gradient `Qα − 1` of the dual objective.
pub fn dual_gradient(gram: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let s: f64 = (0..y.len()).map(|j| y[i] * y[j] * gram[i][j] * alpha[j]).sum();
            s - 1.0
        })
        .collect()
}

pub fn dual_objective(gram: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i][j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// SMO on a precomputed Gram matrix with labels `y ∈ {−1, +1}`.
pub fn smo_solve(gram: &[Vec<f64>], y: &[f64], c: f64, tolerance: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * gram[i][j];
    let mut iterations = 0;
    while iterations < max_iter {
        // Working set: maximal violating i, then j by second-order gain.
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if is_up(alpha[t], y[t], c) && -y[t] * g[t] > g_max {
                g_max = -y[t] * g[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        let mut best_gain = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t], c) {
                continue;
            }
            let v = -y[t] * g[t];
            g_min = g_min.min(v);
            if i != usize::MAX && v < g_max {
                let b = g_max - v;
                let a = gram[i][i] + gram[t][t] - 2.0 * gram[i][t];
                let a = if a > 0.0 { a } else { TAU };
                let gain = -(b * b) / a;
                if gain < best_gain {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < tolerance {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = gram[i][i] + gram[j][j] - 2.0 * gram[i][j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = gram[i][i] + gram[j][j] - 2.0 * gram[i][j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, gt) in g.iter_mut().enumerate() {
            *gt += q(t, i) * di + q(t, j) * dj;
        }
    }

    // rho: average over free vectors, else midpoint of the feasible range.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0;
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = 0.5 * alpha.iter().zip(&g).map(|(a, gi)| a * (gi - 1.0)).sum::<f64>();
    SmoSolution {
        alpha,
        rho,
        objective,
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    /// Class voted for by a positive decision value.
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub kkt_gap: f64,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f64], gamma: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(s, x, gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub n_classes: usize,
    pub c: f64,
    pub gamma: f64,
    pub machines: Vec<BinaryMachine>,
}

impl SvmModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for m in &self.machines {
            if m.decision(x, self.gamma) > 0.0 {
                votes[m.positive] += 1;
            } else {
                votes[m.negative] += 1;
            }
        }
        // First maximum wins, so ties go to the lowest class index.
        let mut best = 0;
        for (k, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = k;
            }
        }
        best
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Vec<usize> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

fn gram_matrix(xs: &[&Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in 0..i {
            let v = rbf(xs[i], xs[j], gamma);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// One-vs-one training over classes `0..n_classes`, where `n_classes` is
/// one more than the largest label present.
pub fn svm_train(x: &[Vec<f64>], labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::EmptyDataset);
    }
    if !(params.c > 0.0 && params.gamma > 0.0) {
        return Err(Error::InvalidConfig("C and gamma must be positive".into()));
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    let present: Vec<usize> = (0..n_classes).filter(|c| labels.contains(c)).collect();
    if present.len() < 2 {
        return Err(Error::SingleClass);
    }
    let mut machines = Vec::new();
    for (a, &pos) in present.iter().enumerate() {
        for &neg in &present[a + 1..] {
            let idx: Vec<usize> = (0..x.len())
                .filter(|&i| labels[i] == pos || labels[i] == neg)
                .collect();
            let xs: Vec<&Vec<f64>> = idx.iter().map(|&i| &x[i]).collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if labels[i] == pos { 1.0 } else { -1.0 })
                .collect();
            let gram = gram_matrix(&xs, params.gamma);
            let sol = smo_solve(&gram, &y, params.c, params.tolerance, params.max_iter);
            let grad = dual_gradient(&gram, &y, &sol.alpha);
            let gap = kkt_gap(&sol.alpha, &grad, &y, params.c);
            let mut support = Vec::new();
            let mut coef = Vec::new();
            for (k, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    support.push(xs[k].clone());
                    coef.push(a * y[k]);
                }
            }
            machines.push(BinaryMachine {
                positive: pos,
                negative: neg,
                support,
                coef,
                bias: -sol.rho,
                iterations: sol.iterations,
                kkt_gap: gap,
            });
        }
    }
    Ok(SvmModel {
        n_classes,
        c: params.c,
        gamma: params.gamma,
        machines,
    })
}

/// Fold index per sample. Groups (rides) never straddle folds; within each
/// class the groups are shuffled with `seed` and dealt round-robin, the
/// dealing continuing across classes so fold sizes stay balanced.
pub fn grouped_stratified_folds(labels: &[usize], groups: &[String], k: usize, seed: u64) -> Result<Vec<usize>> {
    if labels.len() != groups.len() {
        return Err(Error::InvalidConfig("labels and groups differ in length".into()));
    }
    if k < 2 {
        return Err(Error::InvalidConfig("need at least two folds".into()));
    }
    let mut unique: Vec<&String> = groups.iter().collect();
    unique.sort();
    unique.dedup();
    if unique.len() < k {
        return Err(Error::TooFewGroups {
            groups: unique.len(),
            folds: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut fold_of_group = std::collections::HashMap::new();
    let mut next = 0;
    for class in 0..n_classes {
        let mut gs: Vec<&String> = unique
            .iter()
            .copied()
            .filter(|g| {
                groups
                    .iter()
                    .zip(labels)
                    .any(|(gg, &l)| gg == *g && l == class)
            })
            .filter(|g| !fold_of_group.contains_key(*g))
            .collect();
        gs.shuffle(&mut rng);
        for g in gs {
            fold_of_group.insert(g.clone(), next % k);
            next += 1;
        }
    }
    Ok(groups.iter().map(|g| fold_of_group[g]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
    /// `(C, γ, mean validation accuracy)` for every grid point.
    pub grid: Vec<(f64, f64, f64)>,
}

/// Grid search by k-fold grouped, stratified cross-validation. Each fold is
/// standardized with its own training statistics. Ties go to the smallest
/// C, then the smallest γ.
pub fn cross_validate(
    x: &[Vec<f64>],
    labels: &[usize],
    groups: &[String],
    c_grid: &[f64],
    gamma_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    let folds = grouped_stratified_folds(labels, groups, k, seed)?;
    let mut splits = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<usize> = (0..x.len()).filter(|&i| folds[i] != f).collect();
        let val: Vec<usize> = (0..x.len()).filter(|&i| folds[i] == f).collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let st = Standardizer::fit(&tx)?;
        let tx = st.apply_all(&tx);
        let ty: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let vx: Vec<Vec<f64>> = val.iter().map(|&i| st.apply(&x[i])).collect();
        let vy: Vec<usize> = val.iter().map(|&i| labels[i]).collect();
        splits.push((tx, ty, vx, vy));
    }

    let mut cs = c_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    let mut gs = gamma_grid.to_vec();
    gs.sort_by(f64::total_cmp);
    let mut grid = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;
    for &c in &cs {
        for &gamma in &gs {
            let mut acc = 0.0;
            for (tx, ty, vx, vy) in &splits {
                let model = svm_train(tx, ty, &SvmParams::new(c, gamma))?;
                let hits = vx
                    .iter()
                    .zip(vy)
                    .filter(|(v, &y)| model.predict(v) == y)
                    .count();
                acc += hits as f64 / vy.len().max(1) as f64;
            }
            acc /= k as f64;
            grid.push((c, gamma, acc));
            if best.is_none_or(|b| acc > b.2) {
                best = Some((c, gamma, acc));
            }
        }
    }
    let (c, gamma, accuracy) = best.unwrap();
    Ok(CvResult {
        c,
        gamma,
        accuracy,
        grid,
    })
}

/// Standardizer plus SVM fitted with cross-validated hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub standardizer: Standardizer,
    pub svm: SvmModel,
    pub cv_accuracy: f64,
}

impl Classifier {
    pub fn fit(x: &[Vec<f64>], labels: &[usize], groups: &[String], seed: u64) -> Result<Self> {
        let cv = cross_validate(
            x,
            labels,
            groups,
            &DEFAULT_C_GRID,
            &DEFAULT_GAMMA_GRID,
            DEFAULT_FOLDS,
            seed,
        )?;
        let standardizer = Standardizer::fit(x)?;
        let svm = svm_train(&standardizer.apply_all(x), labels, &SvmParams::new(cv.c, cv.gamma))?;
        Ok(Self {
            standardizer,
            svm,
            cv_accuracy: cv.accuracy,
        })
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.svm.predict(&self.standardizer.apply(x))
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Vec<usize> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// Per-class recall in percent (`None` when the class has no test samples)
/// and their unweighted mean over present classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_class: Vec<Option<f64>>,
    pub average: f64,
}

pub fn evaluate(predicted: &[usize], truth: &[usize], n_classes: usize) -> Evaluation {
    let mut hits = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        totals[t] += 1;
        if p == t {
            hits[t] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..n_classes)
        .map(|c| (totals[c] > 0).then(|| 100.0 * hits[c] as f64 / totals[c] as f64))
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let average = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Evaluation { per_class, average }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn clusters(seed: u64, n: usize, sep: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..2 * n {
            let c = i % 2;
            let off = if c == 0 { -sep } else { sep };
            x.push(vec![
                off + 0.3 * rng.sample::<f64, _>(StandardNormal),
                off + 0.3 * rng.sample::<f64, _>(StandardNormal),
            ]);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn rbf_self_similarity() {
        assert_eq!(rbf(&[1.0, -3.0], &[1.0, -3.0], 0.7), 1.0);
        assert!((rbf(&[0.0], &[2.0], 0.5) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn separable_clusters_are_learned() {
        let (x, y) = clusters(1, 30, 2.0);
        let m = svm_train(&x, &y, &SvmParams::new(1.0, 1.0)).unwrap();
        assert_eq!(m.predict_all(&x), y);
        for mach in &m.machines {
            assert!(mach.kkt_gap < KKT_TOLERANCE);
            assert!(mach.coef.iter().all(|c| c.abs() <= 1.0 + 1e-12));
            assert!(mach.coef.iter().sum::<f64>().abs() < 1e-8);
        }
    }

    #[test]
    fn three_classes_build_three_machines() {
        let x = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.1], vec![10.0], vec![10.1]];
        let y = vec![0, 0, 1, 1, 2, 2];
        let m = svm_train(&x, &y, &SvmParams::new(10.0, 1.0)).unwrap();
        assert_eq!(m.machines.len(), 3);
        assert_eq!(m.predict_all(&x), y);
        assert!(matches!(
            svm_train(&x, &[1; 6], &SvmParams::new(1.0, 1.0)),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn vote_ties_go_to_lowest_class() {
        // Each class wins exactly one duel.
        let machine = |positive, negative, bias| BinaryMachine {
            positive,
            negative,
            support: vec![],
            coef: vec![],
            bias,
            iterations: 0,
            kkt_gap: 0.0,
        };
        let m = SvmModel {
            n_classes: 3,
            c: 1.0,
            gamma: 1.0,
            machines: vec![machine(0, 1, 1.0), machine(0, 2, -1.0), machine(1, 2, 1.0)],
        };
        assert_eq!(m.predict(&[0.0]), 0);
    }

    #[test]
    fn folds_keep_groups_together() {
        let groups: Vec<String> = (0..60).map(|i| format!("r{}", i / 6)).collect();
        let labels: Vec<usize> = (0..60).map(|i| (i / 6) % 3).collect();
        let f = grouped_stratified_folds(&labels, &groups, 5, 3).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                if groups[i] == groups[j] {
                    assert_eq!(f[i], f[j]);
                }
            }
        }
        let sizes: Vec<usize> = (0..5).map(|k| f.iter().filter(|&&x| x == k).count()).collect();
        assert!(sizes.iter().all(|&s| s == 12));
        assert_eq!(f, grouped_stratified_folds(&labels, &groups, 5, 3).unwrap());
        assert!(matches!(
            grouped_stratified_folds(&labels[..24], &groups[..24], 5, 0),
            Err(Error::TooFewGroups { groups: 4, folds: 5 })
        ));
    }

    #[test]
    fn cv_tie_rule_and_singleton_grid() {
        let (x, y) = clusters(2, 20, 3.0);
        let groups: Vec<String> = (0..x.len()).map(|i| format!("g{i}")).collect();
        let r = cross_validate(&x, &y, &groups, &[7.0], &[0.3], 5, 1).unwrap();
        assert_eq!((r.c, r.gamma), (7.0, 0.3));
        // Trivially separable: every grid point is perfect, so the tie rule decides.
        let r = cross_validate(&x, &y, &groups, &DEFAULT_C_GRID, &DEFAULT_GAMMA_GRID, 5, 1).unwrap();
        assert!(r.grid.iter().all(|g| g.2 == 1.0));
        assert_eq!((r.c, r.gamma), (0.1, 0.001));
        let again = cross_validate(&x, &y, &groups, &DEFAULT_C_GRID, &DEFAULT_GAMMA_GRID, 5, 1).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn evaluation_examples() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        let e = evaluate(&truth, &truth, 3);
        assert_eq!(e.per_class, vec![Some(100.0); 3]);
        assert_eq!(e.average, 100.0);
        let e = evaluate(&[2; 6], &truth, 3);
        assert_eq!(e.per_class, vec![Some(0.0), Some(0.0), Some(100.0)]);
        assert!((e.average - 33.333).abs() < 1e-2);
        let e = evaluate(&[0, 1], &[0, 0], 3);
        assert_eq!(e.per_class, vec![Some(50.0), None, None]);
        assert_eq!(e.average, 50.0);
    }

    #[test]
    fn shift_absorbed_by_standardization() {
        let (x, y) = clusters(5, 15, 1.0);
        let groups: Vec<String> = (0..x.len()).map(|i| format!("g{}", i / 2)).collect();
        let shifted: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v + 1000.0).collect()).collect();
        let a = Classifier::fit(&x, &y, &groups, 4).unwrap();
        let b = Classifier::fit(&shifted, &y, &groups, 4).unwrap();
        let probe: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1 - 1.0, 0.5 - i as f64 * 0.05]).collect();
        let probe_shifted: Vec<Vec<f64>> =
            probe.iter().map(|r| r.iter().map(|v| v + 1000.0).collect()).collect();
        assert_eq!(a.predict_all(&probe), b.predict_all(&probe_shifted));
    }
}
