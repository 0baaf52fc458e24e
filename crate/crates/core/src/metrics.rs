//! Evaluation: equal error rate, ROC AUC, paired bootstrap significance and
//! relative EER reduction.
//!
//! Scores follow the "higher means more likely bona fide" convention. At a
//! threshold `t` a record is accepted as bona fide when `score >= t`, so
//!
//! * FAR(t) = fraction of spoof records with `score >= t`
//! * FRR(t) = fraction of bona fide records with `score < t`

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub eer: f64,
    pub eer_threshold: f64,
    pub auc: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub p_value: f64,
    pub n_bootstrap: usize,
    pub eer_a: f64,
    pub eer_b: f64,
    pub significant_at: f64,
    pub significant: bool,
    /// Resamples discarded because they contained a single class.
    pub redraws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

fn check_inputs(scores: &[f64], is_bonafide: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != is_bonafide.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            is_bonafide.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score #{i} = {}", scores[i])));
    }
    let n_bona = is_bonafide.iter().filter(|&&b| b).count();
    let n_spoof = is_bonafide.len() - n_bona;
    if n_bona == 0 || n_spoof == 0 {
        return Err(Error::SingleClass(format!(
            "need both classes, got {n_bona} bona fide and {n_spoof} spoof"
        )));
    }
    Ok((n_bona, n_spoof))
}

/// Operating points at every distinct score, ascending, followed by `+inf`.
/// Counts are `(threshold, spoof accepted, bona fide rejected)`.
fn operating_points(scores: &[f64], is_bonafide: &[bool]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_spoof = is_bonafide.iter().filter(|&&b| !b).count() as u64;

    let mut points = Vec::new();
    let (mut spoof_below, mut bona_below) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        points.push((t, n_spoof - spoof_below, bona_below));
        while i < order.len() && scores[order[i]] == t {
            if is_bonafide[order[i]] {
                bona_below += 1;
            } else {
                spoof_below += 1;
            }
            i += 1;
        }
    }
    points.push((f64::INFINITY, 0, bona_below));
    points
}

/// Equal error rate by linear interpolation between the two adjacent ROC
/// operating points where FAR - FRR changes sign.
///
/// The rate is computed from integer counts and rounded once, so it is the
/// correctly rounded value of the exact rational crossing.
pub fn compute_eer(scores: &[f64], is_bonafide: &[bool]) -> Result<Eer> {
    let (n_bona, n_spoof) = check_inputs(scores, is_bonafide)?;
    let (nb, ns) = (n_bona as i128, n_spoof as i128);
    let points = operating_points(scores, is_bonafide);
    // sign of FAR - FRR scaled by n_bona * n_spoof
    let diff = |&(_, a, b): &(f64, u64, u64)| a as i128 * nb - b as i128 * ns;

    let k = points
        .iter()
        .position(|p| diff(p) <= 0)
        .expect("the +inf point always has FAR < FRR");
    let (t1, a1, b1) = points[k];
    let d1 = diff(&points[k]);
    if d1 == 0 {
        return Ok(Eer {
            eer: a1 as f64 / n_spoof as f64,
            threshold: t1,
        });
    }
    // k > 0 because the lowest threshold has FAR = 1, FRR = 0.
    let (t0, a0, b0) = points[k - 1];
    let d0 = diff(&points[k - 1]);
    let (a0, a1, b0, b1) = (a0 as i128, a1 as i128, b0 as i128, b1 as i128);
    let num = a0 * b1 - a1 * b0;
    let den = (a0 - a1) * nb + (b1 - b0) * ns;
    let eer = ratio_to_f64(num, den);
    let threshold = if t1.is_finite() {
        let alpha = d0 as f64 / (d0 - d1) as f64;
        t0 + alpha * (t1 - t0)
    } else {
        t0
    };
    Ok(Eer { eer, threshold })
}

/// Correctly rounded `num / den` for the magnitudes seen here.
fn ratio_to_f64(num: i128, den: i128) -> f64 {
    const EXACT: i128 = 1 << 53;
    if num.abs() <= EXACT && den.abs() <= EXACT {
        num as f64 / den as f64
    } else {
        // reduce first; beyond 2^53 a final ulp of error is possible
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i128;
        (num / g) as f64 / (den / g) as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Probability that a random bona fide record outscores a random spoof
/// record, ties counting one half.
pub fn compute_auc(scores: &[f64], is_bonafide: &[bool]) -> Result<f64> {
    let (n_bona, n_spoof) = check_inputs(scores, is_bonafide)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the Mann-Whitney U statistic, as an integer
    let mut twice_u: u128 = 0;
    let mut spoof_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let (mut bona_here, mut spoof_here) = (0u128, 0u128);
        while i < order.len() && scores[order[i]] == t {
            if is_bonafide[order[i]] {
                bona_here += 1;
            } else {
                spoof_here += 1;
            }
            i += 1;
        }
        twice_u += 2 * bona_here * spoof_below + bona_here * spoof_here;
        spoof_below += spoof_here;
    }
    let den = 2 * n_bona as u128 * n_spoof as u128;
    Ok(ratio_to_f64(twice_u as i128, den as i128))
}

/// FAR/FRR at every distinct score (and `+inf`), ascending threshold.
pub fn det_curve(scores: &[f64], is_bonafide: &[bool]) -> Result<Vec<DetPoint>> {
    let (n_bona, n_spoof) = check_inputs(scores, is_bonafide)?;
    Ok(operating_points(scores, is_bonafide)
        .into_iter()
        .map(|(threshold, a, b)| DetPoint {
            threshold,
            far: a as f64 / n_spoof as f64,
            frr: b as f64 / n_bona as f64,
        })
        .collect())
}

pub fn write_det_csv<W: Write>(points: &[DetPoint], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "far", "frr"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.far.to_string(), p.frr.to_string()])?;
    }
    w.flush()
}

pub fn evaluate(scores: &[f64], is_bonafide: &[bool]) -> Result<EvalReport> {
    let eer = compute_eer(scores, is_bonafide)?;
    let auc = compute_auc(scores, is_bonafide)?;
    let n_bonafide = is_bonafide.iter().filter(|&&b| b).count();
    Ok(EvalReport {
        eer: eer.eer,
        eer_threshold: eer.threshold,
        auc,
        n_bonafide,
        n_spoof: is_bonafide.len() - n_bonafide,
    })
}

/// Labelled subset of `(scores, ds)`: records labelled `unknown` are dropped.
pub fn labelled(scores: &[f64], ds: &Dataset) -> (Vec<f64>, Vec<bool>) {
    scores
        .iter()
        .zip(ds)
        .filter(|(_, r)| r.label != Label::Unknown)
        .map(|(&s, r)| (s, r.label == Label::Bonafide))
        .unzip()
}

pub fn evaluate_dataset(scores: &[f64], ds: &Dataset) -> Result<EvalReport> {
    if scores.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} records",
            scores.len(),
            ds.len()
        )));
    }
    let (s, l) = labelled(scores, ds);
    evaluate(&s, &l)
}

/// One-sided paired bootstrap: is system A's EER lower than system B's?
///
/// Each replicate resamples record indices with replacement (replicate `r`
/// draws from ChaCha stream `r` of `seed`, so the result does not depend on
/// scheduling) and computes `EER_b - EER_a`. The p-value is the fraction of
/// replicates where that difference is `<= 0`.
pub fn bootstrap_significance(
    scores_a: &[f64],
    scores_b: &[f64],
    is_bonafide: &[bool],
    n_bootstrap: usize,
    seed: u64,
    alpha: f64,
) -> Result<SignificanceResult> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "system A has {} scores, system B {}",
            scores_a.len(),
            scores_b.len()
        )));
    }
    if n_bootstrap == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one replicate".into()));
    }
    let eer_a = compute_eer(scores_a, is_bonafide)?.eer;
    let eer_b = compute_eer(scores_b, is_bonafide)?.eer;
    let n = scores_a.len();
    let max_redraws = 10 * n_bootstrap;

    let replicates: Vec<Result<(f64, usize)>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut idx = vec![0usize; n];
            let mut redraws = 0;
            loop {
                idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
                let labels: Vec<bool> = idx.iter().map(|&i| is_bonafide[i]).collect();
                if labels.iter().any(|&b| b) && labels.iter().any(|&b| !b) {
                    let sa: Vec<f64> = idx.iter().map(|&i| scores_a[i]).collect();
                    let sb: Vec<f64> = idx.iter().map(|&i| scores_b[i]).collect();
                    let delta = compute_eer(&sb, &labels)?.eer - compute_eer(&sa, &labels)?.eer;
                    return Ok((delta, redraws));
                }
                redraws += 1;
                if redraws > max_redraws {
                    return Err(Error::SingleClass(format!(
                        "bootstrap replicate {r} kept drawing a single class"
                    )));
                }
            }
        })
        .collect();

    let mut not_better = 0usize;
    let mut redraws = 0usize;
    for rep in replicates {
        let (delta, extra) = rep?;
        redraws += extra;
        if delta <= 0.0 {
            not_better += 1;
        }
    }
    if redraws > max_redraws {
        return Err(Error::SingleClass(format!(
            "bootstrap needed {redraws} redraws for {n_bootstrap} replicates"
        )));
    }
    let p_value = not_better as f64 / n_bootstrap as f64;
    Ok(SignificanceResult {
        p_value,
        n_bootstrap,
        eer_a,
        eer_b,
        significant_at: alpha,
        significant: p_value < alpha,
        redraws,
    })
}

/// `(eer_ref - eer_new) / eer_ref`.
pub fn relative_reduction(eer_new: f64, eer_ref: f64) -> Result<f64> {
    if !(eer_ref > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "reference EER must be positive, got {eer_ref}"
        )));
    }
    Ok((eer_ref - eer_new) / eer_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted_separation() {
        let scores = [0.1, 0.2, 0.7, 0.9];
        let labels = [false, false, true, true];
        let e = compute_eer(&scores, &labels).unwrap();
        assert_eq!(e.eer, 0.0);
        let flipped: Vec<bool> = labels.iter().map(|b| !b).collect();
        assert_eq!(compute_eer(&scores, &flipped).unwrap().eer, 1.0);
        assert_eq!(compute_auc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(compute_auc(&scores, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn interpolated_crossing() {
        // thresholds 1,2,3,4,inf: (FAR,FRR) = (1,0) (1/2,0) (1/2,1/2) ...
        // crossing lands exactly on t=3 with EER 1/2
        let scores = [1.0, 2.0, 3.0, 4.0];
        let labels = [false, true, false, true];
        let e = compute_eer(&scores, &labels).unwrap();
        assert_eq!(e.eer, 0.5);
        assert_eq!(e.threshold, 3.0);

        // three spoof, one bona fide between them: (1,0) (2/3,0) (1/3,0) (1/3,1) (0,1)
        // segment (1/3,0)->(1/3,1) crosses x=y at 1/3
        let scores = [1.0, 2.0, 3.0, 4.0];
        let labels = [false, false, true, false];
        let e = compute_eer(&scores, &labels).unwrap();
        assert_eq!(e.eer, 1.0 / 3.0);
        assert!((e.threshold - (3.0 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn all_equal_scores() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, false, true];
        assert_eq!(compute_auc(&scores, &labels).unwrap(), 0.5);
        assert_eq!(compute_eer(&scores, &labels).unwrap().eer, 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(compute_eer(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass(_))));
        assert!(matches!(compute_auc(&[0.1, 0.2], &[false, false]), Err(Error::SingleClass(_))));
    }

    #[test]
    fn nan_rejected() {
        assert!(compute_eer(&[0.1, f64::NAN], &[true, false]).is_err());
    }

    #[test]
    fn relative_reduction_examples() {
        let r = relative_reduction(0.1351, 0.1564).unwrap();
        assert!((r - 0.1362).abs() < 5e-4);
        assert_eq!(relative_reduction(0.2, 0.2).unwrap(), 0.0);
        assert_eq!(relative_reduction(0.0, 0.3).unwrap(), 1.0);
        assert!(relative_reduction(0.1, 0.0).is_err());
    }

    #[test]
    fn det_curve_endpoints() {
        let pts = det_curve(&[0.1, 0.9], &[false, true]).unwrap();
        assert_eq!(pts.first().map(|p| (p.far, p.frr)), Some((1.0, 0.0)));
        assert_eq!(pts.last().map(|p| (p.far, p.frr)), Some((0.0, 1.0)));
    }

    #[test]
    fn bootstrap_identical_systems() {
        let scores: Vec<f64> = (0..200).map(|i| ((i * 7919) % 200) as f64 / 200.0).collect();
        let labels: Vec<bool> = (0..200).map(|i| i % 3 == 0).collect();
        let r = bootstrap_significance(&scores, &scores, &labels, 200, 1, 0.01).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..100).map(|i| (i as f64 * 0.11).cos()).collect();
        let labels: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let r1 = bootstrap_significance(&a, &b, &labels, 100, 9, 0.01).unwrap();
        let r2 = bootstrap_significance(&a, &b, &labels, 100, 9, 0.01).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn bootstrap_single_class_aborts() {
        // one bona fide among many spoofs: most resamples miss it
        let n = 2000;
        let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut labels = vec![false; n];
        labels[0] = true;
        let r = bootstrap_significance(&scores, &scores, &labels, 50, 3, 0.01);
        // P(miss) ~ e^-1 per draw, so redraws stay well under 10*B
        let r = r.unwrap();
        assert!(r.redraws > 0);
    }
}
