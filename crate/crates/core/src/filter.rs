//! MOS quantization, MOS-band data filtering and class-balance reporting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, ScoreRecord};
use crate::error::{Error, Result};

pub const MOS_GRID_LO: f64 = 1.0;
pub const MOS_GRID_HI: f64 = 5.0;
pub const DEFAULT_MOS_STEP: f64 = 0.125;

/// Rounds `x` to the nearest point of the grid `{1, 1 + step, ..., 5}`.
/// Exact midpoints round up.
pub fn quantize_mos(x: f64, step: f64) -> Result<f64> {
    if !(MOS_GRID_LO..=MOS_GRID_HI).contains(&x) {
        return Err(Error::InvalidConfig(format!(
            "MOS {x} outside quantization range [1, 5]"
        )));
    }
    let intervals = (MOS_GRID_HI - MOS_GRID_LO) / step;
    if !(step > 0.0) || (intervals - intervals.round()).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "step {step} does not divide [1, 5] into whole intervals"
        )));
    }
    let k = ((x - MOS_GRID_LO) / step + 0.5).floor().min(intervals.round());
    Ok(MOS_GRID_LO + k * step)
}

/// Which MOS value a record is filtered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MosKey {
    /// `mos_fused` when present, otherwise MOS component 0.
    #[default]
    Auto,
    Fused,
    Component(usize),
}

impl MosKey {
    pub fn resolve(self, r: &ScoreRecord) -> Result<f64> {
        let missing = |what: String| Error::record(&r.utt_id, what);
        match self {
            MosKey::Fused => r
                .mos_fused
                .ok_or_else(|| missing("mos_fused is absent".into())),
            MosKey::Component(k) => r
                .mos
                .get(k)
                .copied()
                .ok_or_else(|| missing(format!("mos component {k} does not exist"))),
            MosKey::Auto => match r.mos_fused {
                Some(z) => Ok(z),
                None => MosKey::Component(0).resolve(r),
            },
        }
    }
}

impl std::str::FromStr for MosKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(MosKey::Auto),
            "fused" => Ok(MosKey::Fused),
            other => other
                .parse::<usize>()
                .map(MosKey::Component)
                .map_err(|_| format!("MOS key must be 'auto', 'fused' or a component index, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub lo: f64,
    pub hi: f64,
    pub inclusive: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            lo: 3.0,
            hi: 4.0,
            inclusive: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64| (0.0..=5.0).contains(&v);
        if !(in_range(self.lo) && in_range(self.hi) && self.lo < self.hi) {
            return Err(Error::InvalidConfig(format!(
                "filter band [{}, {}] must satisfy 0 <= lo < hi <= 5",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn contains(&self, z: f64) -> bool {
        if self.inclusive {
            self.lo <= z && z <= self.hi
        } else {
            self.lo < z && z < self.hi
        }
    }
}

/// Keeps the records whose keyed MOS lies inside the band. Order is preserved.
pub fn filter_by_mos(ds: &Dataset, key: MosKey, cfg: &FilterConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut keep = Vec::with_capacity(ds.len());
    for r in ds {
        keep.push(cfg.contains(key.resolve(r)?));
    }
    let mut flags = keep.into_iter();
    Ok(ds.subset(|_| flags.next().unwrap_or(false)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub total: usize,
    pub n_bonafide: usize,
    pub n_spoof: usize,
    pub n_unknown: usize,
    /// spoof / bonafide; `None` when there is no bona fide record.
    pub ratio: Option<f64>,
}

pub fn balance_report(ds: &Dataset) -> BalanceReport {
    let count = |l: Label| ds.iter().filter(|r| r.label == l).count();
    let n_bonafide = count(Label::Bonafide);
    let n_spoof = count(Label::Spoof);
    let n_unknown = count(Label::Unknown);
    BalanceReport {
        total: ds.len(),
        n_bonafide,
        n_spoof,
        n_unknown,
        ratio: (n_bonafide > 0).then(|| n_spoof as f64 / n_bonafide as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosHistogram {
    pub bin_width: f64,
    /// `bins + 1` edges starting at 0; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub bonafide: Vec<usize>,
    pub spoof: Vec<usize>,
    pub unknown: Vec<usize>,
}

impl MosHistogram {
    pub fn bins(&self) -> usize {
        self.bonafide.len()
    }

    pub fn counts(&self, label: Label) -> &[usize] {
        match label {
            Label::Bonafide => &self.bonafide,
            Label::Spoof => &self.spoof,
            Label::Unknown => &self.unknown,
        }
    }

    /// Two-column `bin_start,count` CSV for one label.
    pub fn write_csv<W: Write>(&self, label: Label, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_start", "count"])?;
        for (edge, count) in self.edges.iter().zip(self.counts(label)) {
            w.write_record([edge.to_string(), count.to_string()])?;
        }
        w.flush()
    }
}

pub fn mos_histogram(ds: &Dataset, key: MosKey, bin_width: f64) -> Result<MosHistogram> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::InvalidConfig(format!("bin width must be positive, got {bin_width}")));
    }
    let bins = (5.0 / bin_width - 1e-9).ceil().max(1.0) as usize;
    let mut hist = MosHistogram {
        bin_width,
        edges: (0..=bins).map(|k| k as f64 * bin_width).collect(),
        bonafide: vec![0; bins],
        spoof: vec![0; bins],
        unknown: vec![0; bins],
    };
    for r in ds {
        let z = key.resolve(r)?;
        let idx = ((z / bin_width).floor() as usize).min(bins - 1);
        match r.label {
            Label::Bonafide => hist.bonafide[idx] += 1,
            Label::Spoof => hist.spoof[idx] += 1,
            Label::Unknown => hist.unknown[idx] += 1,
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn rec(id: usize, label: Label, z: f64) -> ScoreRecord {
        ScoreRecord {
            utt_id: format!("u{id}"),
            label,
            split: Split::Train,
            fad: vec![0.5],
            mos: vec![z],
            mos_fused: Some(z),
        }
    }

    fn ds(zs: &[f64]) -> Dataset {
        Dataset::new(
            zs.iter()
                .enumerate()
                .map(|(i, &z)| rec(i, if i % 2 == 0 { Label::Spoof } else { Label::Bonafide }, z))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_mos(1.0, 0.125).unwrap(), 1.0);
        assert_eq!(quantize_mos(5.0, 0.125).unwrap(), 5.0);
        assert_eq!(quantize_mos(3.07, 0.125).unwrap(), 3.125);
        assert_eq!(quantize_mos(3.0625, 0.125).unwrap(), 3.125);
        assert_eq!(quantize_mos(3.05, 0.125).unwrap(), 3.0);
    }

    #[test]
    fn quantize_rejects_out_of_range_and_bad_step() {
        assert!(quantize_mos(0.99, 0.125).is_err());
        assert!(quantize_mos(5.01, 0.125).is_err());
        assert!(quantize_mos(3.0, 0.3).is_err());
    }

    #[test]
    fn grid_has_33_points() {
        let mut pts: Vec<f64> = (0..=4000)
            .map(|i| quantize_mos(1.0 + i as f64 * 0.001, DEFAULT_MOS_STEP).unwrap())
            .collect();
        pts.dedup();
        assert_eq!(pts.len(), 33);
    }

    #[test]
    fn inclusive_band_boundaries() {
        let d = ds(&[2.4, 3.0, 3.5, 4.0, 4.3]);
        let f = filter_by_mos(&d, MosKey::Fused, &FilterConfig::default()).unwrap();
        let zs: Vec<f64> = f.iter().map(|r| r.mos_fused.unwrap()).collect();
        assert_eq!(zs, [3.0, 3.5, 4.0]);

        let strict = FilterConfig {
            inclusive: false,
            ..FilterConfig::default()
        };
        let f = filter_by_mos(&d, MosKey::Fused, &strict).unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn full_band_is_identity() {
        let d = ds(&[0.0, 1.3, 5.0]);
        let cfg = FilterConfig {
            lo: 0.0,
            hi: 5.0,
            inclusive: true,
        };
        assert_eq!(filter_by_mos(&d, MosKey::Auto, &cfg).unwrap(), d);
    }

    #[test]
    fn unresolvable_key_names_record() {
        let mut r = rec(7, Label::Spoof, 3.2);
        r.mos_fused = None;
        let d = Dataset::new(vec![r]).unwrap();
        let err = filter_by_mos(&d, MosKey::Fused, &FilterConfig::default()).unwrap_err();
        assert!(err.to_string().contains("u7"));
        let err = filter_by_mos(&d, MosKey::Component(3), &FilterConfig::default()).unwrap_err();
        assert!(err.to_string().contains("u7"));
        // auto falls back to component 0
        assert_eq!(filter_by_mos(&d, MosKey::Auto, &FilterConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn invalid_band_rejected() {
        let cfg = FilterConfig {
            lo: 4.0,
            hi: 3.0,
            inclusive: true,
        };
        assert!(filter_by_mos(&ds(&[3.5]), MosKey::Fused, &cfg).is_err());
    }

    #[test]
    fn balance_report_table_counts() {
        let mut records: Vec<ScoreRecord> = (0..2_580).map(|i| rec(i, Label::Bonafide, 4.0)).collect();
        records.extend((2_580..25_380).map(|i| rec(i, Label::Spoof, 2.0)));
        let rep = balance_report(&Dataset::new(records).unwrap());
        assert_eq!(rep.total, 25_380);
        assert_eq!(rep.n_spoof, 22_800);
        assert!((rep.ratio.unwrap() - 8.837).abs() < 1e-3);
    }

    #[test]
    fn balance_report_edge_cases() {
        let rep = balance_report(&Dataset::empty(1, 1));
        assert_eq!((rep.total, rep.n_bonafide, rep.n_spoof), (0, 0, 0));
        assert_eq!(rep.ratio, None);

        let d = Dataset::new(vec![rec(0, Label::Bonafide, 3.0), rec(1, Label::Bonafide, 4.0)]).unwrap();
        assert_eq!(balance_report(&d).ratio, Some(0.0));
    }

    #[test]
    fn histogram_single_record() {
        let d = Dataset::new(vec![rec(0, Label::Bonafide, 3.2)]).unwrap();
        let h = mos_histogram(&d, MosKey::Fused, 0.5).unwrap();
        assert_eq!(h.bins(), 10);
        assert_eq!(h.edges[6], 3.0);
        assert_eq!(h.bonafide[6], 1);
        assert_eq!(h.bonafide.iter().sum::<usize>(), 1);
        assert_eq!(h.spoof.iter().sum::<usize>(), 0);
    }

    #[test]
    fn histogram_top_edge_in_last_bin() {
        let h = mos_histogram(&ds(&[5.0, 0.0]), MosKey::Fused, 0.5).unwrap();
        assert_eq!(h.spoof[9], 1);
        assert_eq!(h.bonafide[0], 1);
    }

    #[test]
    fn histogram_csv() {
        let h = mos_histogram(&ds(&[3.2]), MosKey::Fused, 2.5).unwrap();
        let mut buf = Vec::new();
        h.write_csv(Label::Spoof, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bin_start,count\n0,0\n2.5,1\n");
    }
}
