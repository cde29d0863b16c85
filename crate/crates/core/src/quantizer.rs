//! Equal-population quantization of normalized feature parameters.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::features::{Feature, NormFeatures};
use crate::genre::FeatureCombo;
use crate::stats;
use crate::{Error, Result};

pub const PERCENTILE_CONVENTION: &str =
    "linear interpolation between closest order statistics; value equal to a cut point falls in the lower bin";

/// Cut points for every feature of one combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub combo: FeatureCombo,
    pub q: usize,
    /// `q - 1` strictly increasing cut points per feature, in combo order.
    pub boundaries: Vec<Vec<f64>>,
    pub convention: String,
}

/// One bin index per feature of a combination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeaturePattern {
    pub bins: Vec<u8>,
}

impl FeaturePattern {
    pub fn new(bins: Vec<u8>) -> Self {
        Self { bins }
    }

    /// Mixed-radix code; the first feature is most significant, so code order
    /// equals lexicographic bin order.
    pub fn code(&self, q: usize) -> usize {
        self.bins.iter().fold(0, |acc, &b| acc * q + b as usize)
    }

    pub fn from_code(mut code: usize, len: usize, q: usize) -> Self {
        let mut bins = vec![0u8; len];
        for slot in bins.iter_mut().rev() {
            *slot = (code % q) as u8;
            code /= q;
        }
        Self { bins }
    }

    /// `L`/`M`/`H` when `q = 3`, `L`/`H` when `q = 2`, 1-based bin numbers otherwise.
    pub fn level_names(&self, q: usize) -> Vec<String> {
        self.bins.iter().map(|&b| level_name(b, q)).collect()
    }

    pub fn describe(&self, combo: &FeatureCombo, q: usize) -> String {
        let parts: Vec<String> = combo
            .features
            .iter()
            .zip(&self.bins)
            .map(|(f, &b)| format!("{}={}", f.name(), level_name(b, q)))
            .collect();
        parts.join(" & ")
    }
}

pub fn level_name(bin: u8, q: usize) -> String {
    match (q, bin) {
        (2, 0) => "L".into(),
        (2, 1) => "H".into(),
        (3, 0) => "L".into(),
        (3, 1) => "M".into(),
        (3, 2) => "H".into(),
        _ => format!("{}", bin as usize + 1),
    }
}

/// Total number of patterns for `len` features at `q` levels.
pub fn pattern_count(len: usize, q: usize) -> usize {
    (0..len).fold(1, |acc, _| acc * q)
}

impl fmt::Display for FeaturePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.bins.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Cut points at the `100 k / q` percentiles, `k = 1 .. q - 1`.
pub fn fit_cut_points(values: &[f64], q: usize, feature: Feature) -> Result<Vec<f64>> {
    if q < 2 {
        return Err(Error::Invalid(format!("Q must be at least 2, got {q}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantizer input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = sorted.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!sorted.is_empty());
    if distinct < q {
        return Err(Error::DegenerateFeature {
            feature: feature.name(),
            reason: format!("{distinct} distinct values for {q} intervals"),
        });
    }
    let cuts: Vec<f64> =
        (1..q).map(|k| stats::percentile_sorted(&sorted, 100.0 * k as f64 / q as f64)).collect();
    if cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::DegenerateFeature {
            feature: feature.name(),
            reason: "tied cut points".into(),
        });
    }
    Ok(cuts)
}

pub fn fit_quantizer(features: &[NormFeatures], combo: &FeatureCombo, q: usize) -> Result<QuantizerSpec> {
    fit_quantizer_iter(features.iter(), combo, q)
}

pub(crate) fn fit_quantizer_iter<'a>(
    features: impl Iterator<Item = &'a NormFeatures> + Clone,
    combo: &FeatureCombo,
    q: usize,
) -> Result<QuantizerSpec> {
    let mut boundaries = Vec::with_capacity(combo.features.len());
    for &f in &combo.features {
        let values: Vec<f64> = features.clone().map(|x| x.get(f)).collect();
        boundaries.push(fit_cut_points(&values, q, f)?);
    }
    Ok(QuantizerSpec { combo: combo.clone(), q, boundaries, convention: PERCENTILE_CONVENTION.into() })
}

/// Bin of `value`: the number of cut points strictly below it.
pub fn bin_of(value: f64, cuts: &[f64]) -> u8 {
    cuts.partition_point(|&c| c < value) as u8
}

pub fn quantize(f: &NormFeatures, spec: &QuantizerSpec) -> FeaturePattern {
    FeaturePattern {
        bins: spec.combo.features.iter().zip(&spec.boundaries).map(|(&feat, cuts)| bin_of(f.get(feat), cuts)).collect(),
    }
}

impl QuantizerSpec {
    /// Pattern code of one utterance, without allocating.
    pub fn code_of(&self, f: &NormFeatures) -> usize {
        self.combo
            .features
            .iter()
            .zip(&self.boundaries)
            .fold(0, |acc, (&feat, cuts)| acc * self.q + bin_of(f.get(feat), cuts) as usize)
    }

    pub fn pattern_count(&self) -> usize {
        pattern_count(self.combo.features.len(), self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genre::enumerate_combos;

    fn one_feature(values: &[f64]) -> Vec<NormFeatures> {
        values
            .iter()
            .map(|&v| {
                let mut a = [1.0; 8];
                a[Feature::Duration.index()] = v;
                NormFeatures::from_array(a)
            })
            .collect()
    }

    fn d_combo() -> FeatureCombo {
        enumerate_combos().into_iter().find(|c| c.features == [Feature::Duration]).unwrap()
    }

    #[test]
    fn nine_points_in_thirds() {
        let values: Vec<f64> = (1..=9).map(f64::from).collect();
        let spec = fit_quantizer(&one_feature(&values), &d_combo(), 3).unwrap();
        let cuts = &spec.boundaries[0];
        assert!((cuts[0] - 11.0 / 3.0).abs() < 1e-12);
        assert!((cuts[1] - 19.0 / 3.0).abs() < 1e-12);
        let bins: Vec<u8> = values.iter().map(|&v| bin_of(v, cuts)).collect();
        assert_eq!(bins, vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn two_levels_split_at_median() {
        let values = [4.0, 1.0, 9.0, 2.5, 7.0, 3.0];
        let spec = fit_quantizer(&one_feature(&values), &d_combo(), 2).unwrap();
        assert_eq!(spec.boundaries[0], vec![stats::median(&values).unwrap()]);
    }

    #[test]
    fn ties_fall_in_lower_bin() {
        assert_eq!(bin_of(0.62, &[0.62, 1.2]), 0);
        assert_eq!(bin_of(1.2, &[0.62, 1.2]), 1);
        assert_eq!(bin_of(1.2000001, &[0.62, 1.2]), 2);
        assert_eq!(bin_of(-5.0, &[0.62, 1.2]), 0);
    }

    #[test]
    fn constructed_spec_lookup() {
        let combo = enumerate_combos()
            .into_iter()
            .find(|c| c.features == [Feature::Duration, Feature::SpeechRate])
            .unwrap();
        let spec = QuantizerSpec {
            combo,
            q: 3,
            boundaries: vec![vec![0.62, 1.2], vec![0.9, 1.2]],
            convention: PERCENTILE_CONVENTION.into(),
        };
        let mut a = [1.0; 8];
        a[0] = 0.5;
        a[1] = 1.5;
        let p = quantize(&NormFeatures::from_array(a), &spec);
        assert_eq!(p.level_names(3), vec!["L", "H"]);
        assert_eq!(p.describe(&spec.combo, 3), "d=L & sr=H");
        assert_eq!(spec.pattern_count(), 9);
        assert_eq!(spec.code_of(&NormFeatures::from_array(a)), p.code(3));
    }

    #[test]
    fn degenerate_feature() {
        let err = fit_quantizer(&one_feature(&[1.0, 1.0, 2.0, 2.0]), &d_combo(), 3);
        assert!(matches!(err, Err(Error::DegenerateFeature { feature: "d", .. })));
    }

    #[test]
    fn pattern_code_round_trip() {
        for code in 0..81 {
            let p = FeaturePattern::from_code(code, 4, 3);
            assert_eq!(p.code(3), code);
        }
        assert!(FeaturePattern::new(vec![0, 2]) < FeaturePattern::new(vec![1, 0]));
    }
}
