use agasdf::despawn::{decode, encode, hard_threshold, DespawnModel, HardThresholdParams};
use agasdf::signal::{mean_std, pad_to_length, zscore_normalize, Signal, SourceKind};
use agasdf::svm::{dual_gradient, kkt_gap, rbf, smo_solve, KKT_TOLERANCE};
use agasdf::training::{
    evaluate_loss, run_gradcheck, GuidanceTarget, L1Scaling, LossConfig, LossKind, LossWeights, TrainingSample,
};
use agasdf::wavelet::{db4_kernel, fdwt_forward, fdwt_inverse, Kernel};
use proptest::prelude::*;

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

/// Dyadic length `2^m` with a depth `L ≤ m`.
fn dyadic() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (3u32..10).prop_flat_map(|m| (signal(1 << m), 1..=m as usize))
}

/// Orthonormal low-pass filter of length `2·angles.len()` from a
/// paraunitary lattice of plane rotations.
fn lattice_kernel(angles: &[f64]) -> Kernel {
    let (c, s) = (angles[0].cos(), angles[0].sin());
    // Polyphase rows as polynomials in z⁻¹.
    let mut rows = [[vec![c], vec![s]], [vec![-s], vec![c]]];
    for &t in &angles[1..] {
        for p in rows[1].iter_mut() {
            p.insert(0, 0.0);
        }
        for p in rows[0].iter_mut() {
            p.push(0.0);
        }
        let (c, s) = (t.cos(), t.sin());
        let mix = |a: &[f64], b: &[f64], x: f64, y: f64| a.iter().zip(b).map(|(a, b)| x * a + y * b).collect::<Vec<_>>();
        let r0 = [mix(&rows[0][0], &rows[1][0], c, s), mix(&rows[0][1], &rows[1][1], c, s)];
        let r1 = [mix(&rows[0][0], &rows[1][0], -s, c), mix(&rows[0][1], &rows[1][1], -s, c)];
        rows = [r0, r1];
    }
    let mut taps = Vec::new();
    for n in 0..rows[0][0].len() {
        taps.push(rows[0][0][n]);
        taps.push(rows[0][1][n]);
    }
    Kernel::new(taps).unwrap()
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pad_then_truncate_is_identity(x in prop::collection::vec(-1e3f64..1e3, 1..300), extra in 0usize..100) {
        let s = Signal::new(x.clone(), 100.0, SourceKind::Acoustic).unwrap();
        let (p, valid) = pad_to_length(&s, x.len() + extra).unwrap();
        prop_assert_eq!(valid, x.len());
        prop_assert_eq!(&p.samples()[..valid], &x[..]);
    }

    #[test]
    fn zscore_has_zero_mean_unit_std(x in prop::collection::vec(-1e3f64..1e3, 2..500)) {
        let (_, sd) = mean_std(&x);
        prop_assume!(sd > 1e-3);
        let z = zscore_normalize(&Signal::new(x, 1.0, SourceKind::Acceleration).unwrap());
        let (m, s) = mean_std(z.samples());
        prop_assert!(m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10, "{m} {s}");
    }

    #[test]
    fn fdwt_reconstructs_and_conserves_energy((s, depth) in dyadic()) {
        let k = vec![db4_kernel(); depth];
        let p = fdwt_forward(&s, &k, depth).unwrap();
        let r = fdwt_inverse(&p, &k).unwrap();
        let err = s.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8, "reconstruction error {err}");
        let es = energy(&s);
        prop_assert!((p.energy() - es).abs() / es < 1e-10);
    }

    #[test]
    fn fdwt_is_linear((s1, depth) in dyadic(), a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let s2: Vec<f64> = s1.iter().enumerate().map(|(i, v)| ((i as u64 * 31 + seed) % 17) as f64 - 8.0 + 0.5 * v).collect();
        let k = vec![db4_kernel(); depth];
        let mix: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
        let p = fdwt_forward(&mix, &k, depth).unwrap();
        let p1 = fdwt_forward(&s1, &k, depth).unwrap();
        let p2 = fdwt_forward(&s2, &k, depth).unwrap();
        let bands = |q: &agasdf::wavelet::CoefficientPyramid| q.valid_bands().flat_map(|b| b.to_vec()).collect::<Vec<_>>();
        for ((c, c1), c2) in bands(&p).iter().zip(bands(&p1)).zip(bands(&p2)) {
            prop_assert!((c - (a * c1 + b * c2)).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_by_dyadic_block_rotates_approximation((s, depth) in dyadic()) {
        let k = vec![db4_kernel(); depth];
        let mut delayed = s.clone();
        delayed.rotate_right(1 << depth);
        let a = fdwt_forward(&s, &k, depth).unwrap().approximation;
        let mut expect = a.clone();
        expect.rotate_right(1);
        let got = fdwt_forward(&delayed, &k, depth).unwrap().approximation;
        for (x, y) in got.iter().zip(&expect) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_bias_path_is_lossless_for_any_orthonormal_kernels(
        (s, depth) in dyadic(),
        angles in (1usize..5).prop_flat_map(|stages| prop::collection::vec(prop::collection::vec(-3.2f64..3.2, stages), 9)),
    ) {
        let kernels: Vec<Kernel> = (0..depth).map(|l| lattice_kernel(&angles[l])).collect();
        let model = DespawnModel::new(kernels, vec![HardThresholdParams::symmetric(0.0); depth + 1]).unwrap();
        let p = encode(&s, &model).unwrap();
        let r = decode(&p, &model).unwrap();
        let err = s.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8, "reconstruction error {err}");
        let es = energy(&s);
        prop_assert!((p.energy() - es).abs() / es < 1e-10);
    }

    #[test]
    fn threshold_is_odd_for_equal_biases(x in -50.0f64..50.0, b in 0.0f64..5.0, alpha in 0.5f64..50.0) {
        let p = HardThresholdParams::new(b, b, alpha).unwrap();
        prop_assert_eq!(hard_threshold(-x, &p), -hard_threshold(x, &p));
    }

    #[test]
    fn larger_threshold_never_adds_mass(d in prop::collection::vec(-4.0f64..4.0, 1..200), b in 0.0f64..3.0, step in 0.0f64..2.0) {
        let mass = |b: f64| d.iter().map(|&x| hard_threshold(x, &HardThresholdParams::symmetric(b)).abs()).sum::<f64>();
        prop_assert!(mass(b + step) <= mass(b) + 1e-12);
    }

    #[test]
    fn losses_are_non_negative(
        (s, depth) in dyadic(),
        bias in -1.0f64..2.0,
        targets in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 10),
        w in (0.0f64..3.0, 0.0f64..3.0),
    ) {
        prop_assume!(w.0 + w.1 > 0.0);
        let model = DespawnModel::db4(depth, bias).unwrap();
        let target = GuidanceTarget { bands: targets[..=depth.min(9)].to_vec() };
        prop_assume!(target.bands.len() == depth + 1);
        let sample = TrainingSample { acoustic: s.clone(), valid_len: s.len(), target: Some(target) };
        for kind in [LossKind::Despawn, LossKind::Agasdf] {
            for scaling in [L1Scaling::Sum, L1Scaling::Mean] {
                let cfg = LossConfig { kind, weights: LossWeights::new(w.0, w.1).unwrap(), scaling };
                let l = evaluate_loss(&model, &sample, &cfg).unwrap();
                prop_assert!(l.recon >= 0.0 && l.regularizer >= 0.0 && l.total >= 0.0);
            }
        }
    }

    #[test]
    fn guidance_scales_with_amplitude((s, depth) in dyadic(), c in 0.1f64..10.0, accel_seed in 0u64..100) {
        let g: Vec<f64> = s.iter().enumerate().map(|(i, v)| v * 0.3 + ((i as u64 * 7 + accel_seed) % 5) as f64 - 2.0).collect();
        let model = DespawnModel::db4(depth, 0.0).unwrap();
        let cfg = LossConfig { kind: LossKind::Agasdf, weights: LossWeights::new(0.0, 1.0).unwrap(), scaling: L1Scaling::Sum };
        let guide = |amp: f64| {
            let a: Vec<f64> = s.iter().map(|v| amp * v).collect();
            let t: Vec<f64> = g.iter().map(|v| amp * v).collect();
            let target = GuidanceTarget::from_acceleration(&t, t.len(), depth).unwrap();
            let sample = TrainingSample { acoustic: a.clone(), valid_len: a.len(), target: Some(target) };
            evaluate_loss(&model, &sample, &cfg).unwrap().regularizer
        };
        let (base, scaled) = (guide(1.0), guide(c));
        prop_assert!((scaled - c * base).abs() <= 1e-9 * (1.0 + scaled.abs()), "{scaled} vs {}", c * base);
    }

    #[test]
    fn smo_meets_kkt_tolerance(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4..30),
        c in prop::sample::select(vec![0.1, 1.0, 10.0, 100.0]),
        gamma in prop::sample::select(vec![0.01, 0.1, 1.0]),
    ) {
        let x: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
        let y: Vec<f64> = pts.iter().enumerate().map(|(i, &(a, b))| if a + 0.5 * b + 0.3 * (i % 3) as f64 > 0.0 { 1.0 } else { -1.0 }).collect();
        prop_assume!(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0));
        let k: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| rbf(a, b, gamma)).collect()).collect();
        let sol = smo_solve(&k, &y, c, KKT_TOLERANCE, 100_000);
        prop_assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(eq.abs() < 1e-9);
        prop_assert!(kkt_gap(&sol.alpha, &dual_gradient(&k, &y, &sol.alpha), &y, c) <= KKT_TOLERANCE);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gradients_match_finite_differences(seed in 100u64..100_000) {
        let r = run_gradcheck(seed, 64, 3, 1e-5, 1e-4).unwrap();
        prop_assert!(r.passed, "seed {seed}: {} at {}", r.worst_rel_error, r.worst_param);
    }
}

#[test]
fn lattice_kernels_are_orthonormal() {
    let k = lattice_kernel(&[0.3, -1.1, 2.0]);
    let h = k.taps();
    assert_eq!(h.len(), 6);
    for shift in (0..h.len()).step_by(2) {
        let dot: f64 = (0..h.len() - shift).map(|n| h[n] * h[n + shift]).sum();
        let expect = if shift == 0 { 1.0 } else { 0.0 };
        assert!((dot - expect).abs() < 1e-12, "shift {shift}: {dot}");
    }
}
