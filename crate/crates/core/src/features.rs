//! Utterance-level prosodic parameters and per-session speaker normalization.
//!
//! Eight parameters describe an utterance: duration `d`, speech rate `sr`
//! (characters per second), and mean / standard deviation / interquartile range
//! of pitch and of intensity. Pitch statistics use voiced frames only.
//! Normalization divides each parameter by its session-level counterpart
//! computed over all of the therapist's speech in that session.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, Utterance};
use crate::stats::{self, Summary};
use crate::{Error, Result};

/// Tag recorded with every feature dump.
pub const NORMALIZATION_CONVENTION: &str =
    "d/mean(d); sr/(sum chars/sum duration); pitch stats over voiced frames pooled per session; population std";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    #[serde(rename = "d")]
    Duration,
    #[serde(rename = "sr")]
    SpeechRate,
    #[serde(rename = "p_mu")]
    PitchMean,
    #[serde(rename = "p_std")]
    PitchStd,
    #[serde(rename = "p_iqr")]
    PitchIqr,
    #[serde(rename = "i_mu")]
    IntensityMean,
    #[serde(rename = "i_std")]
    IntensityStd,
    #[serde(rename = "i_iqr")]
    IntensityIqr,
}

impl Feature {
    pub const ALL: [Feature; 8] = [
        Feature::Duration,
        Feature::SpeechRate,
        Feature::PitchMean,
        Feature::PitchStd,
        Feature::PitchIqr,
        Feature::IntensityMean,
        Feature::IntensityStd,
        Feature::IntensityIqr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Duration => "d",
            Feature::SpeechRate => "sr",
            Feature::PitchMean => "p_mu",
            Feature::PitchStd => "p_std",
            Feature::PitchIqr => "p_iqr",
            Feature::IntensityMean => "i_mu",
            Feature::IntensityStd => "i_std",
            Feature::IntensityIqr => "i_iqr",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The eight parameters in [`Feature::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureValues(pub [f64; 8]);

impl FeatureValues {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    pub fn set(&mut self, f: Feature, v: f64) {
        self.0[f.index()] = v;
    }
}

/// Un-normalized parameters: seconds, characters per second, Hz, intensity units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures(pub FeatureValues);

/// Dimensionless ratios to the session profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormFeatures(pub FeatureValues);

impl RawFeatures {
    pub fn get(&self, f: Feature) -> f64 {
        self.0.get(f)
    }
}

impl NormFeatures {
    pub fn get(&self, f: Feature) -> f64 {
        self.0.get(f)
    }

    pub fn from_array(values: [f64; 8]) -> Self {
        NormFeatures(FeatureValues(values))
    }
}

/// Session-level normalizers, same layout as the utterance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionProfile {
    pub session_id: String,
    pub values: FeatureValues,
}

impl SessionProfile {
    pub fn get(&self, f: Feature) -> f64 {
        self.values.get(f)
    }
}

pub fn extract_raw_features(u: &Utterance) -> Result<RawFeatures> {
    if !(u.duration_s > 0.0) {
        return Err(Error::Invalid(alloc::format!("utterance {} has zero duration", u.utterance_id)));
    }
    let mut voiced: Vec<f64> = u.pitch.voiced().collect();
    if voiced.len() < 2 {
        return Err(Error::TooFewVoicedFrames { found: voiced.len(), needed: 2 });
    }
    if u.intensity.values.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: u.intensity.values.len() });
    }
    let mut intensity = u.intensity.values.clone();
    let p = stats::summarize_in_place(&mut voiced)?;
    let i = stats::summarize_in_place(&mut intensity)?;
    Ok(RawFeatures(assemble(u.duration_s, f64::from(u.char_count) / u.duration_s, p, i)))
}

fn assemble(d: f64, sr: f64, p: Summary, i: Summary) -> FeatureValues {
    FeatureValues([d, sr, p.mean, p.std, p.iqr, i.mean, i.std, i.iqr])
}

/// Pooled normalizers over every frame of every utterance in one session.
pub fn session_profile(utterances: &[&Utterance]) -> Result<SessionProfile> {
    let first = utterances.first().ok_or(Error::Empty("session"))?;
    let mut voiced = Vec::new();
    let mut intensity = Vec::new();
    let (mut dur, mut chars) = (0.0, 0.0);
    for u in utterances {
        voiced.extend(u.pitch.voiced());
        intensity.extend_from_slice(&u.intensity.values);
        dur += u.duration_s;
        chars += f64::from(u.char_count);
    }
    if voiced.len() < 2 {
        return Err(Error::TooFewVoicedFrames { found: voiced.len(), needed: 2 });
    }
    if intensity.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: intensity.len() });
    }
    let p = stats::summarize_in_place(&mut voiced)?;
    let i = stats::summarize_in_place(&mut intensity)?;
    let d_mean = dur / utterances.len() as f64;
    let sr = if dur > 0.0 { chars / dur } else { 0.0 };
    Ok(SessionProfile { session_id: first.session_id.clone(), values: assemble(d_mean, sr, p, i) })
}

pub fn normalize(raw: &RawFeatures, profile: &SessionProfile) -> Result<NormFeatures> {
    let mut out = [0.0; 8];
    for f in Feature::ALL {
        let denom = profile.get(f);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::ZeroNormalizer { feature: f.name(), session: profile.session_id.clone() });
        }
        out[f.index()] = raw.get(f) / denom;
    }
    Ok(NormFeatures::from_array(out))
}

/// A session that survived ingestion and labelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSession {
    pub session_id: String,
    pub therapist_id: String,
    pub rating: f64,
    pub label: Label,
    /// Analysis-set utterances; the denominator of every per-session ratio.
    pub utterance_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedUtterance {
    pub utterance_id: String,
    /// Index into [`FeatureTable::sessions`].
    pub session: usize,
    pub raw: RawFeatures,
    pub features: NormFeatures,
}

/// Normalized features of every analysis utterance, grouped by session.
///
/// Utterances with fewer than the configured number of voiced frames are
/// dropped before the session profile is computed, so that every feature
/// combination sees one population. Sessions left without utterances are
/// dropped as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub sessions: Vec<AnalysisSession>,
    pub utterances: Vec<AnalyzedUtterance>,
    pub excluded_unvoiced: usize,
    pub dropped_sessions: Vec<String>,
}

impl FeatureTable {
    /// Builds the analysis set. With `include_excluded = false` only sessions
    /// labelled high or low take part.
    pub fn from_corpus(corpus: &Corpus, include_excluded: bool) -> Result<FeatureTable> {
        let min_voiced = corpus.config.min_voiced_frames.max(2);
        let mut table = FeatureTable {
            sessions: Vec::new(),
            utterances: Vec::new(),
            excluded_unvoiced: 0,
            dropped_sessions: Vec::new(),
        };
        for s in &corpus.sessions {
            if s.label == Label::Excluded && !include_excluded {
                continue;
            }
            let kept: Vec<&Utterance> = s.utterances.iter().filter(|u| u.is_analyzable(min_voiced)).collect();
            table.excluded_unvoiced += s.utterances.len() - kept.len();
            if kept.is_empty() {
                table.dropped_sessions.push(s.session_id.clone());
                continue;
            }
            let profile = session_profile(&kept)?;
            let idx = table.sessions.len();
            for u in &kept {
                let raw = extract_raw_features(u)?;
                let features = normalize(&raw, &profile)?;
                table.utterances.push(AnalyzedUtterance {
                    utterance_id: u.utterance_id.clone(),
                    session: idx,
                    raw,
                    features,
                });
            }
            table.sessions.push(AnalysisSession {
                session_id: s.session_id.clone(),
                therapist_id: s.therapist_id.clone(),
                rating: s.empathy_rating,
                label: s.label,
                utterance_count: kept.len(),
            });
        }
        if table.utterances.is_empty() {
            return Err(Error::NoAnalyzableUtterances);
        }
        Ok(table)
    }

    pub fn ratings(&self) -> Vec<f64> {
        self.sessions.iter().map(|s| s.rating).collect()
    }

    pub fn features(&self) -> impl Iterator<Item = &NormFeatures> + Clone + '_ {
        self.utterances.iter().map(|u| &u.features)
    }

    /// A table restricted to the given sessions (in the given order).
    /// Normalization is per session, so feature values carry over unchanged.
    pub fn subset(&self, sessions: &[usize]) -> FeatureTable {
        let mut remap = alloc::vec![usize::MAX; self.sessions.len()];
        for (new, &old) in sessions.iter().enumerate() {
            remap[old] = new;
        }
        let mut utterances = Vec::new();
        for &old in sessions {
            for u in self.utterances.iter().filter(|u| u.session == old) {
                utterances.push(AnalyzedUtterance { session: remap[old], ..u.clone() });
            }
        }
        FeatureTable {
            sessions: sessions.iter().map(|&i| self.sessions[i].clone()).collect(),
            utterances,
            excluded_unvoiced: 0,
            dropped_sessions: Vec::new(),
        }
    }

    /// Replaces every rating (and the label that follows from it).
    pub fn with_ratings(&self, ratings: &[f64], labels: &[Label]) -> FeatureTable {
        let mut t = self.clone();
        for ((s, &r), &l) in t.sessions.iter_mut().zip(ratings).zip(labels) {
            s.rating = r;
            s.label = l;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::utt;
    use alloc::vec;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn speech_rate_from_table_means() {
        let mut u = utt("s", "u", 3.62, vec![150.0; 362]);
        u.char_count = 17;
        let raw = extract_raw_features(&u).unwrap();
        assert!((raw.get(Feature::SpeechRate) - 4.696).abs() < 5e-4);
        assert_eq!(raw.get(Feature::Duration), 3.62);
    }

    #[test]
    fn constant_pitch_has_zero_spread() {
        let raw = extract_raw_features(&utt("s", "u", 1.0, vec![200.0; 100])).unwrap();
        assert_eq!(raw.get(Feature::PitchMean), 200.0);
        assert_eq!(raw.get(Feature::PitchStd), 0.0);
        assert_eq!(raw.get(Feature::PitchIqr), 0.0);
    }

    #[test]
    fn pitch_stats_skip_unvoiced_frames() {
        let raw = extract_raw_features(&utt("s", "u", 0.6, vec![100.0, 0.0, 200.0, 300.0, 0.0, 400.0])).unwrap();
        assert_eq!(raw.get(Feature::PitchMean), 250.0);
        assert_eq!(raw.get(Feature::PitchIqr), 150.0);
    }

    #[test]
    fn too_few_voiced_frames() {
        let err = extract_raw_features(&utt("s", "u", 0.5, vec![0.0, 0.0, 120.0, 0.0, 0.0]));
        assert_eq!(err, Err(Error::TooFewVoicedFrames { found: 1, needed: 2 }));
    }

    #[test]
    fn session_profile_pools_frames() {
        let a = utt("s", "a", 2.0, vec![100.0, 200.0]);
        let b = utt("s", "b", 4.0, vec![300.0, 400.0]);
        let p = session_profile(&[&a, &b]).unwrap();
        assert_eq!(p.get(Feature::PitchMean), 250.0);
        assert_eq!(p.get(Feature::Duration), 3.0);
        assert_eq!(p.get(Feature::SpeechRate), 20.0 / 6.0);
    }

    #[test]
    fn single_utterance_session_normalizes_to_one() {
        let mut u = utt("s", "u", 1.5, vec![110.0, 0.0, 180.0, 240.0, 90.0, 0.0, 130.0]);
        u.intensity.values = vec![50.0, 61.0, 70.0, 48.0, 55.0, 66.0, 59.0];
        let raw = extract_raw_features(&u).unwrap();
        let profile = session_profile(&[&u]).unwrap();
        assert_eq!(profile.get(Feature::PitchStd), raw.get(Feature::PitchStd));
        let n = normalize(&raw, &profile).unwrap();
        for f in Feature::ALL {
            assert!(close(n.get(f), 1.0), "{f}: {}", n.get(f));
        }
    }

    #[test]
    fn normalize_divides() {
        let mut raw = FeatureValues([1.8, 4.0, 200.0, 12.0, 20.0, 60.0, 5.0, 6.0]);
        let profile = SessionProfile {
            session_id: "s".into(),
            values: FeatureValues([3.6, 4.0, 200.0, 24.0, 20.0, 60.0, 5.0, 6.0]),
        };
        let n = normalize(&RawFeatures(raw), &profile).unwrap();
        assert_eq!(n.get(Feature::PitchStd), 0.5);
        assert_eq!(n.get(Feature::Duration), 0.5);

        raw.set(Feature::PitchStd, 3.0);
        let mut zero = profile.clone();
        zero.values.set(Feature::PitchIqr, 0.0);
        assert!(matches!(normalize(&RawFeatures(raw), &zero), Err(Error::ZeroNormalizer { feature: "p_iqr", .. })));
    }
}
