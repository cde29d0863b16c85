//! Sessions, utterances and ratings.
//!
//! [`Corpus::build`] takes already-parsed records (the file readers live in the
//! companion crate) and applies the ingestion rules: client speech is ignored,
//! utterances shorter than the minimum duration are dropped and counted, and
//! each session is labelled from its empathy rating.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_HOP_S: f64 = 0.01;
pub const RATING_MIN: f64 = 9.0;
pub const RATING_MAX: f64 = 63.0;

/// Frame-level samples at a fixed hop. Pitch values `> 0` are voiced frames,
/// `0` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrack {
    pub hop_s: f64,
    pub values: Vec<f64>,
}

impl FrameTrack {
    pub fn new(hop_s: f64, values: Vec<f64>) -> Self {
        Self { hop_s, values }
    }

    pub fn span_s(&self) -> f64 {
        self.hop_s * self.values.len() as f64
    }

    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| *v > 0.0)
    }

    pub fn voiced_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Therapist,
    Client,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub utterance_id: String,
    pub session_id: String,
    pub speaker: Speaker,
    pub duration_s: f64,
    pub char_count: u32,
    pub pitch: FrameTrack,
    pub intensity: FrameTrack,
}

impl Utterance {
    /// Enough frames for every prosodic statistic.
    pub fn is_analyzable(&self, min_voiced: usize) -> bool {
        self.char_count >= 1 && self.pitch.voiced_count() >= min_voiced && self.intensity.values.len() >= 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    High,
    Low,
    Excluded,
}

/// One row of the session table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub therapist_id: String,
    pub empathy_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub therapist_id: String,
    /// Therapist utterances only.
    pub utterances: Vec<Utterance>,
    pub empathy_rating: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestionConfig {
    pub min_duration_s: f64,
    /// Ratings at or above this are labelled high.
    pub high_cutoff: f64,
    /// Ratings at or below this are labelled low.
    pub low_cutoff: f64,
    /// Utterances with fewer voiced pitch frames leave the analysis set.
    pub min_voiced_frames: usize,
}

impl Default for IngestionConfig {
    fn default() -> Self {
        Self { min_duration_s: 0.5, high_cutoff: 42.0, low_cutoff: 36.0, min_voiced_frames: 2 }
    }
}

impl IngestionConfig {
    pub fn label(&self, rating: f64) -> Label {
        if rating >= self.high_cutoff {
            Label::High
        } else if rating <= self.low_cutoff {
            Label::Low
        } else {
            Label::Excluded
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.low_cutoff < self.high_cutoff) {
            return Err(Error::Invalid(format!(
                "low cutoff {} must be below high cutoff {}",
                self.low_cutoff, self.high_cutoff
            )));
        }
        if !(self.min_duration_s >= 0.0) {
            return Err(Error::Invalid(format!("minimum duration {} is negative", self.min_duration_s)));
        }
        Ok(())
    }
}

/// Counts of records removed during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: usize,
    pub dropped_short: usize,
    pub dropped_client: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub sessions: Vec<SessionRecord>,
    pub provenance: String,
    pub ingest: IngestStats,
    pub config: IngestionConfig,
}

impl Corpus {
    /// Validates and assembles a corpus. Sessions keep the order of `sessions`;
    /// utterances keep their input order within a session.
    pub fn build(
        utterances: Vec<Utterance>,
        sessions: Vec<SessionInfo>,
        config: &IngestionConfig,
        provenance: impl Into<String>,
    ) -> Result<Corpus> {
        config.check()?;
        if utterances.is_empty() {
            return Err(Error::NoAnalyzableUtterances);
        }
        let mut index = BTreeMap::new();
        let mut records = Vec::with_capacity(sessions.len());
        for (i, s) in sessions.into_iter().enumerate() {
            if !(RATING_MIN..=RATING_MAX).contains(&s.empathy_rating) {
                return Err(Error::Invalid(format!(
                    "session {} rating {} outside [{RATING_MIN}, {RATING_MAX}]",
                    s.session_id, s.empathy_rating
                )));
            }
            if index.insert(s.session_id.clone(), i).is_some() {
                return Err(Error::DuplicateSession(s.session_id));
            }
            records.push(SessionRecord {
                label: config.label(s.empathy_rating),
                session_id: s.session_id,
                therapist_id: s.therapist_id,
                utterances: Vec::new(),
                empathy_rating: s.empathy_rating,
            });
        }

        let mut stats = IngestStats { records: utterances.len(), ..IngestStats::default() };
        let mut seen = BTreeSet::new();
        for u in utterances {
            validate_utterance(&u)?;
            let Some(&slot) = index.get(&u.session_id) else {
                return Err(Error::DanglingSession { utterance: u.utterance_id, session: u.session_id });
            };
            if !seen.insert((u.session_id.clone(), u.utterance_id.clone())) {
                return Err(Error::Invalid(format!(
                    "duplicate utterance {} in session {}",
                    u.utterance_id, u.session_id
                )));
            }
            if u.speaker == Speaker::Client {
                stats.dropped_client += 1;
                continue;
            }
            if u.duration_s < config.min_duration_s {
                stats.dropped_short += 1;
                continue;
            }
            records[slot].utterances.push(u);
        }
        Ok(Corpus { sessions: records, provenance: provenance.into(), ingest: stats, config: config.clone() })
    }

    pub fn utterance_count(&self) -> usize {
        self.sessions.iter().map(|s| s.utterances.len()).sum()
    }

    pub fn label_counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for s in &self.sessions {
            match s.label {
                Label::High => c.high += 1,
                Label::Low => c.low += 1,
                Label::Excluded => c.excluded += 1,
            }
        }
        c
    }
}

fn validate_utterance(u: &Utterance) -> Result<()> {
    for track in [&u.pitch, &u.intensity] {
        if !(track.hop_s > 0.0) || !track.hop_s.is_finite() {
            return Err(Error::NonPositiveHop { utterance: u.utterance_id.clone(), hop: track.hop_s });
        }
        if track.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame track"));
        }
    }
    if !u.duration_s.is_finite() || u.duration_s < 0.0 {
        return Err(Error::Invalid(format!("utterance {} has duration {}", u.utterance_id, u.duration_s)));
    }
    if u.pitch.values.iter().any(|v| *v < 0.0) {
        return Err(Error::Invalid(format!("utterance {} has negative pitch frames", u.utterance_id)));
    }
    if u.intensity.values.iter().any(|v| *v < 0.0) {
        return Err(Error::Invalid(format!("utterance {} has negative intensity frames", u.utterance_id)));
    }
    for (name, track) in [("pitch", &u.pitch), ("intensity", &u.intensity)] {
        if (track.span_s() - u.duration_s).abs() > track.hop_s + 1e-9 {
            return Err(Error::Invalid(format!(
                "utterance {}: {name} track spans {:.3} s but duration is {:.3} s",
                u.utterance_id,
                track.span_s(),
                u.duration_s
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub high: usize,
    pub low: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub label: Label,
    pub utterances: usize,
    pub mean_duration_s: f64,
    pub mean_chars: f64,
    /// Fraction of pitch frames that are voiced.
    pub voiced_coverage: f64,
    pub flagged_unvoiced: usize,
    pub pitch_analyzable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sessions: Vec<SessionSummary>,
    pub session_count: usize,
    pub utterance_count: usize,
    pub mean_utterances_per_session: f64,
    pub mean_duration_s: f64,
    pub mean_chars_per_utterance: f64,
    pub mean_rating: f64,
    pub labels: LabelCounts,
    pub ingest: IngestStats,
    /// `session_id/utterance_id` of utterances with too few voiced frames.
    pub flagged_utterances: Vec<String>,
}

/// Report-only summary of a corpus.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let min_voiced = corpus.config.min_voiced_frames;
    let mut sessions = Vec::with_capacity(corpus.sessions.len());
    let mut flagged_utterances = Vec::new();
    let (mut total_dur, mut total_chars) = (0.0, 0.0);
    for s in &corpus.sessions {
        let n = s.utterances.len();
        let (mut dur, mut chars, mut voiced, mut frames, mut flagged) = (0.0, 0.0, 0usize, 0usize, 0usize);
        for u in &s.utterances {
            dur += u.duration_s;
            chars += f64::from(u.char_count);
            voiced += u.pitch.voiced_count();
            frames += u.pitch.values.len();
            if !u.is_analyzable(min_voiced) {
                flagged += 1;
                flagged_utterances.push(format!("{}/{}", s.session_id, u.utterance_id));
            }
        }
        total_dur += dur;
        total_chars += chars;
        sessions.push(SessionSummary {
            session_id: s.session_id.clone(),
            label: s.label,
            utterances: n,
            mean_duration_s: if n > 0 { dur / n as f64 } else { 0.0 },
            mean_chars: if n > 0 { chars / n as f64 } else { 0.0 },
            voiced_coverage: if frames > 0 { voiced as f64 / frames as f64 } else { 0.0 },
            flagged_unvoiced: flagged,
            pitch_analyzable: n - flagged,
        });
    }
    let n_sessions = corpus.sessions.len();
    let n_utts = corpus.utterance_count();
    let ratings: Vec<f64> = corpus.sessions.iter().map(|s| s.empathy_rating).collect();
    ValidationReport {
        sessions,
        session_count: n_sessions,
        utterance_count: n_utts,
        mean_utterances_per_session: if n_sessions > 0 { n_utts as f64 / n_sessions as f64 } else { 0.0 },
        mean_duration_s: if n_utts > 0 { total_dur / n_utts as f64 } else { 0.0 },
        mean_chars_per_utterance: if n_utts > 0 { total_chars / n_utts as f64 } else { 0.0 },
        mean_rating: crate::stats::mean(&ratings).unwrap_or(0.0),
        labels: corpus.label_counts(),
        ingest: corpus.ingest.clone(),
        flagged_utterances,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    pub(crate) fn utt(session: &str, id: &str, duration_s: f64, pitch: Vec<f64>) -> Utterance {
        let hop = duration_s / pitch.len() as f64;
        Utterance {
            utterance_id: id.to_string(),
            session_id: session.to_string(),
            speaker: Speaker::Therapist,
            duration_s,
            char_count: 10,
            intensity: FrameTrack::new(hop, vec![60.0; pitch.len()]),
            pitch: FrameTrack::new(hop, pitch),
        }
    }

    fn info(id: &str, rating: f64) -> SessionInfo {
        SessionInfo { session_id: id.to_string(), therapist_id: "t1".to_string(), empathy_rating: rating }
    }

    #[test]
    fn short_utterances_are_dropped_and_counted() {
        let c = Corpus::build(
            vec![utt("s1", "u1", 0.4, vec![100.0; 40])],
            vec![info("s1", 45.0)],
            &IngestionConfig::default(),
            "",
        )
        .unwrap();
        assert_eq!(c.utterance_count(), 0);
        assert_eq!(c.ingest.dropped_short, 1);
    }

    #[test]
    fn empty_utterance_list_is_an_error() {
        let err = Corpus::build(vec![], vec![info("s1", 45.0)], &IngestionConfig::default(), "");
        assert_eq!(err, Err(Error::NoAnalyzableUtterances));
    }

    #[test]
    fn dangling_session_and_bad_hop() {
        let err = Corpus::build(
            vec![utt("nope", "u1", 1.0, vec![100.0; 100])],
            vec![info("s1", 45.0)],
            &IngestionConfig::default(),
            "",
        );
        assert!(matches!(err, Err(Error::DanglingSession { .. })));

        let mut u = utt("s1", "u1", 1.0, vec![100.0; 100]);
        u.pitch.hop_s = 0.0;
        let err = Corpus::build(vec![u], vec![info("s1", 45.0)], &IngestionConfig::default(), "");
        assert!(matches!(err, Err(Error::NonPositiveHop { .. })));
    }

    #[test]
    fn labels_partition_ratings() {
        let cfg = IngestionConfig::default();
        assert_eq!(cfg.label(42.0), Label::High);
        assert_eq!(cfg.label(56.5), Label::High);
        assert_eq!(cfg.label(36.0), Label::Low);
        assert_eq!(cfg.label(39.0), Label::Excluded);
        assert_eq!(cfg.label(41.999), Label::Excluded);
    }

    #[test]
    fn client_speech_is_ignored() {
        let mut u = utt("s1", "c1", 1.0, vec![100.0; 100]);
        u.speaker = Speaker::Client;
        let c = Corpus::build(
            vec![u, utt("s1", "u1", 1.0, vec![100.0; 100])],
            vec![info("s1", 30.0)],
            &IngestionConfig::default(),
            "",
        )
        .unwrap();
        assert_eq!(c.utterance_count(), 1);
        assert_eq!(c.ingest.dropped_client, 1);
        assert_eq!(c.sessions[0].label, Label::Low);
    }

    #[test]
    fn validation_flags_unvoiced_utterances() {
        let mut utts: Vec<Utterance> =
            (0..200).map(|i| utt("s1", &format!("u{i}"), 1.0, vec![150.0; 100])).collect();
        for u in utts.iter_mut().take(3) {
            u.pitch.values = vec![0.0; 100];
        }
        utts[3].pitch.values = vec![0.0; 100];
        utts[3].pitch.values[10] = 120.0;
        let c = Corpus::build(utts, vec![info("s1", 50.0)], &IngestionConfig::default(), "").unwrap();
        let report = validate_corpus(&c);
        assert_eq!(report.sessions[0].utterances, 200);
        assert_eq!(report.sessions[0].flagged_unvoiced, 4);
        assert_eq!(report.sessions[0].pitch_analyzable, 196);
        assert_eq!(report.flagged_utterances[0], "s1/u0");
    }

    #[test]
    fn validation_means() {
        let utts = vec![
            utt("a", "1", 2.0, vec![100.0; 200]),
            utt("a", "2", 4.0, vec![100.0; 400]),
            utt("b", "1", 3.0, vec![100.0; 300]),
        ];
        let c = Corpus::build(utts, vec![info("a", 50.0), info("b", 20.0)], &IngestionConfig::default(), "")
            .unwrap();
        let r = validate_corpus(&c);
        assert_eq!(r.mean_utterances_per_session, 1.5);
        assert_eq!(r.mean_duration_s, 3.0);
        assert_eq!(r.sessions[0].mean_duration_s, 3.0);
        assert_eq!(r.labels, LabelCounts { high: 1, low: 1, excluded: 0 });
    }
}
