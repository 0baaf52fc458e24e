use serde::{Deserialize, Serialize};

/// Per-feature histogram bin boundaries.
///
/// A value `v` of feature `f` falls in bin `k` = number of boundaries strictly
/// below `v`, so `v <= boundaries[f][k]` is exactly `bin(v) <= k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub boundaries: Vec<Vec<f64>>,
}

impl BinMapper {
    /// Equal-count (quantile) boundaries with at most `max_bin` bins per feature.
    /// Cut points sit midway between adjacent distinct sorted values.
    pub fn build(rows: &[Vec<f64>], max_bin: usize) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        let boundaries = (0..n_features)
            .map(|f| {
                let mut col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
                col.sort_by(f64::total_cmp);
                feature_boundaries(&col, max_bin)
            })
            .collect();
        BinMapper { boundaries }
    }

    pub fn n_features(&self) -> usize {
        self.boundaries.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.boundaries[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, value: f64) -> usize {
        self.boundaries[feature].partition_point(|&b| b < value)
    }

    /// Column-major bin indices.
    pub fn bin_rows(&self, rows: &[Vec<f64>]) -> Vec<Vec<u16>> {
        (0..self.n_features())
            .map(|f| rows.iter().map(|r| self.bin(f, r[f]) as u16).collect())
            .collect()
    }
}

fn feature_boundaries(sorted: &[f64], max_bin: usize) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= 1 {
        return Vec::new();
    }
    if distinct.len() <= max_bin {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(max_bin - 1);
    for k in 1..max_bin {
        let idx = k * n / max_bin;
        if idx == 0 || idx >= n || sorted[idx - 1] == sorted[idx] {
            continue;
        }
        let cut = midpoint(sorted[idx - 1], sorted[idx]);
        if cuts.last().is_none_or(|&last| cut > last) {
            cuts.push(cut);
        }
    }
    cuts
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // a < m must hold so that `a` stays left of the cut
    if m > a { m } else { b }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(col: &[f64]) -> Vec<Vec<f64>> {
        col.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn constant_feature_single_bin() {
        let m = BinMapper::build(&rows(&[2.0; 10]), 25);
        assert!(m.boundaries[0].is_empty());
        assert_eq!(m.bin(0, 2.0), 0);
        assert_eq!(m.bin(0, -100.0), 0);
    }

    #[test]
    fn quantile_cuts_on_1_to_100() {
        let vals: Vec<f64> = (1..=100).map(f64::from).collect();
        let m = BinMapper::build(&rows(&vals), 4);
        assert_eq!(m.boundaries[0], vec![25.5, 50.5, 75.5]);
        let mut counts = [0usize; 4];
        for v in &vals {
            counts[m.bin(0, *v)] += 1;
        }
        assert_eq!(counts, [25; 4]);
    }

    #[test]
    fn few_distinct_values_get_own_bins() {
        let m = BinMapper::build(&rows(&[0.0, 1.0, 1.0, 0.0, 2.0]), 25);
        assert_eq!(m.boundaries[0], vec![0.5, 1.5]);
    }

    #[test]
    fn permutation_invariant() {
        let vals: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.13).collect();
        let mut rev = vals.clone();
        rev.reverse();
        assert_eq!(BinMapper::build(&rows(&vals), 25), BinMapper::build(&rows(&rev), 25));
    }

    #[test]
    fn boundaries_strictly_increasing_with_heavy_ties() {
        let mut vals = vec![0.0; 80];
        vals.extend((0..20).map(|i| i as f64));
        let m = BinMapper::build(&rows(&vals), 10);
        assert!(m.boundaries[0].windows(2).all(|w| w[0] < w[1]));
        assert!(m.n_bins(0) <= 10);
    }
}
