use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scorefuse::metrics::{bootstrap_significance, compute_auc, compute_eer, det_curve, relative_reduction};

type Q = Ratio<i64>;

fn q_to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Exact EER by enumerating thresholds one at a time with rational rates.
fn brute_force_eer(scores: &[f64], bona: &[bool]) -> Q {
    let nb = bona.iter().filter(|&&b| b).count() as i64;
    let ns = bona.len() as i64 - nb;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let rates: Vec<(Q, Q)> = thresholds
        .iter()
        .map(|&t| {
            let fa = scores.iter().zip(bona).filter(|(&s, &b)| !b && s >= t).count() as i64;
            let fr = scores.iter().zip(bona).filter(|(&s, &b)| b && s < t).count() as i64;
            (Q::new(fa, ns), Q::new(fr, nb))
        })
        .collect();
    for k in 0..rates.len() {
        let (far, frr) = rates[k];
        if far == frr {
            return far;
        }
        if far < frr {
            let (far0, frr0) = rates[k - 1];
            let d0 = far0 - frr0;
            let d1 = far - frr;
            let alpha = d0 / (d0 - d1);
            return far0 + alpha * (far - far0);
        }
    }
    unreachable!()
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> (Vec<f64>, Vec<bool>) {
    loop {
        let bona: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if bona.iter().any(|&b| b) && bona.iter().any(|&b| !b) {
            let scores = bona
                .iter()
                .map(|&b| {
                    let shift = if b { 2 } else { 0 };
                    (rng.random_range(0..levels) + shift) as f64 / levels as f64
                })
                .collect();
            return (scores, bona);
        }
    }
}

#[test]
fn eer_equals_rational_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..200 {
        let n = rng.random_range(2..=20);
        // few levels -> many ties
        let levels = if case % 2 == 0 { 4 } else { 1000 };
        let (s, b) = random_instance(&mut rng, n, levels);
        let want = q_to_f64(brute_force_eer(&s, &b));
        let got = compute_eer(&s, &b).unwrap().eer;
        assert_eq!(got.to_bits(), want.to_bits(), "case {case}: {s:?} {b:?}");
    }
}

#[test]
fn eer_matches_dense_threshold_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let bona: Vec<bool> = (0..2000).map(|_| rng.random::<f64>() < 0.3).collect();
        let scores: Vec<f64> = bona
            .iter()
            .map(|&b| rng.random::<f64>() + if b { 0.4 } else { 0.0 })
            .collect();
        let (nb, ns) = (
            bona.iter().filter(|&&b| b).count() as f64,
            bona.iter().filter(|&&b| !b).count() as f64,
        );
        let (lo, hi) = (0.0, 1.4);
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=100_000 {
            let t = lo + (hi - lo) * k as f64 / 100_000.0;
            let far = scores.iter().zip(&bona).filter(|(&s, &b)| !b && s >= t).count() as f64 / ns;
            let frr = scores.iter().zip(&bona).filter(|(&s, &b)| b && s < t).count() as f64 / nb;
            if (far - frr).abs() < best.0 {
                best = ((far - frr).abs(), 0.5 * (far + frr));
            }
            if far < frr - 0.05 {
                break;
            }
        }
        let eer = compute_eer(&scores, &bona).unwrap().eer;
        assert!((eer - best.1).abs() <= 5e-3, "{eer} vs sweep {}", best.1);
    }
}

fn pair_count_auc(scores: &[f64], bona: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0i64, 0i64);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if bona[i] && !bona[j] {
                pairs += 1;
                twice += if si > sj { 2 } else if si == sj { 1 } else { 0 };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

#[test]
fn auc_equals_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let n = rng.random_range(2..=60);
        let (s, b) = random_instance(&mut rng, n, if case % 2 == 0 { 3 } else { 500 });
        assert_eq!(compute_auc(&s, &b).unwrap(), pair_count_auc(&s, &b), "case {case}");
    }
}

#[test]
fn perfect_and_inverted_systems() {
    let s = [0.1, 0.2, 0.8, 0.9];
    let b = [false, false, true, true];
    assert_eq!(compute_eer(&s, &b).unwrap().eer, 0.0);
    assert_eq!(compute_auc(&s, &b).unwrap(), 1.0);
    let inv = [true, true, false, false];
    assert_eq!(compute_eer(&s, &inv).unwrap().eer, 1.0);
    assert_eq!(compute_auc(&s, &inv).unwrap(), 0.0);
    // all tied: chance level
    assert_eq!(compute_eer(&[0.5; 4], &b).unwrap().eer, 0.5);
    assert_eq!(compute_auc(&[0.5; 4], &b).unwrap(), 0.5);
}

#[test]
fn det_curve_is_monotone_and_spans_unit_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (s, b) = random_instance(&mut rng, 300, 50);
    let det = det_curve(&s, &b).unwrap();
    assert_eq!((det[0].far, det[0].frr), (1.0, 0.0));
    let last = det.last().unwrap();
    assert_eq!((last.far, last.frr), (0.0, 1.0));
    for w in det.windows(2) {
        assert!(w[0].threshold < w[1].threshold);
        assert!(w[1].far <= w[0].far && w[1].frr >= w[0].frr);
    }
}

#[test]
fn metric_input_errors() {
    assert!(compute_eer(&[0.1, 0.2], &[true, true]).is_err());
    assert!(compute_eer(&[0.1], &[true, false]).is_err());
    assert!(compute_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    assert!(relative_reduction(0.1, 0.0).is_err());
}

#[test]
fn bootstrap_is_deterministic_and_discriminates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bona: Vec<bool> = (0..500).map(|_| rng.random::<bool>()).collect();
    let good: Vec<f64> = bona.iter().map(|&b| rng.random::<f64>() + if b { 1.0 } else { 0.0 }).collect();
    let noise: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let a = bootstrap_significance(&good, &noise, &bona, 200, 9, 0.01).unwrap();
    let b = bootstrap_significance(&good, &noise, &bona, 200, 9, 0.01).unwrap();
    assert_eq!(a, b);
    assert!(a.significant && a.p_value < 0.01);
    let same = bootstrap_significance(&good, &good, &bona, 200, 9, 0.01).unwrap();
    assert_eq!(same.p_value, 1.0);
    assert!(bootstrap_significance(&good, &noise[..10], &bona, 10, 0, 0.01).is_err());
}

proptest! {
    #[test]
    fn metrics_invariant_under_monotone_transform(
        raw in prop::collection::vec((0u32..64, any::<bool>()), 2..80)
    ) {
        let bona: Vec<bool> = raw.iter().map(|r| r.1).collect();
        prop_assume!(bona.iter().any(|&b| b) && bona.iter().any(|&b| !b));
        let s: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 64.0).collect();
        // exact in f64 and strictly increasing on the grid
        let t: Vec<f64> = s.iter().map(|x| 3.0 * x + 1.0).collect();
        prop_assert_eq!(compute_eer(&s, &bona).unwrap().eer, compute_eer(&t, &bona).unwrap().eer);
        prop_assert_eq!(compute_auc(&s, &bona).unwrap(), compute_auc(&t, &bona).unwrap());
    }

    #[test]
    fn eer_lies_between_zero_and_one_and_auc_complements(
        raw in prop::collection::vec((0u32..16, any::<bool>()), 2..60)
    ) {
        let bona: Vec<bool> = raw.iter().map(|r| r.1).collect();
        prop_assume!(bona.iter().any(|&b| b) && bona.iter().any(|&b| !b));
        let s: Vec<f64> = raw.iter().map(|r| r.0 as f64).collect();
        let e = compute_eer(&s, &bona).unwrap().eer;
        prop_assert!((0.0..=1.0).contains(&e));
        let flipped: Vec<bool> = bona.iter().map(|b| !b).collect();
        let sum = compute_auc(&s, &bona).unwrap() + compute_auc(&s, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }
}
