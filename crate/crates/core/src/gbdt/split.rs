use super::bins::BinMapper;
use super::GbdtConfig;

/// Best split found for a node: samples with `bin <= bin_threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub bin_threshold: usize,
    /// Raw-value threshold: `x <= threshold` goes left.
    pub threshold: f64,
    pub gain: f64,
}

/// Second-order split gain.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - (gl + gr) * (gl + gr) / (hl + hr + lambda)
}

/// Histogram scan over every feature and bin boundary of the node.
///
/// Both children must keep `min_data_in_leaf` samples. Ties resolve to the
/// lowest feature, then the lowest threshold. Returns `None` when no split
/// has positive gain.
pub fn find_best_split(
    samples: &[usize],
    grad: &[f64],
    hess: &[f64],
    binned: &[Vec<u16>],
    mapper: &BinMapper,
    config: &GbdtConfig,
) -> Option<SplitCandidate> {
    let min_leaf = config.min_data_in_leaf.max(1);
    if samples.len() < 2 * min_leaf {
        return None;
    }
    let lambda = config.lambda_l2;
    let g_total: f64 = samples.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = samples.iter().map(|&i| hess[i]).sum();
    let n_total = samples.len();

    let mut best: Option<SplitCandidate> = None;
    for (f, col) in binned.iter().enumerate() {
        let n_bins = mapper.n_bins(f);
        if n_bins < 2 {
            continue;
        }
        let mut g_hist = vec![0.0; n_bins];
        let mut h_hist = vec![0.0; n_bins];
        let mut c_hist = vec![0usize; n_bins];
        for &i in samples {
            let b = col[i] as usize;
            g_hist[b] += grad[i];
            h_hist[b] += hess[i];
            c_hist[b] += 1;
        }
        let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
        for b in 0..n_bins - 1 {
            gl += g_hist[b];
            hl += h_hist[b];
            cl += c_hist[b];
            let cr = n_total - cl;
            if cl < min_leaf || cr < min_leaf {
                continue;
            }
            let (gr, hr) = (g_total - gl, h_total - hl);
            if hl + lambda <= 0.0 || hr + lambda <= 0.0 {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, lambda);
            if gain > 0.0 && best.is_none_or(|s| gain > s.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    bin_threshold: b,
                    threshold: mapper.boundaries[f][b],
                    gain,
                });
            }
        }
    }
    best
}
