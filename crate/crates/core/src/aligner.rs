//! Symbolic alignment of a recognizer hypothesis against a reference
//! transcript, used to time-stamp speaker turns in long recordings and to cut
//! them into pause-delimited utterances.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyllableSeq {
    pub symbols: Vec<String>,
    /// `(start_s, end_s)` per symbol; present on hypotheses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<(f64, f64)>>,
}

impl SyllableSeq {
    pub fn new(symbols: Vec<String>) -> Self {
        Self { symbols, times: None }
    }

    pub fn timed(symbols: Vec<String>, times: Vec<(f64, f64)>) -> Result<Self> {
        if symbols.len() != times.len() {
            return Err(Error::LengthMismatch { left: symbols.len(), right: times.len() });
        }
        let mut prev_end = f64::NEG_INFINITY;
        for &(s, e) in &times {
            if !(s.is_finite() && e.is_finite()) || e < s || s < prev_end {
                return Err(Error::Invalid(format!("syllable times must be ordered and non-overlapping at ({s}, {e})")));
            }
            prev_end = e;
        }
        Ok(Self { symbols, times: Some(times) })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// One step of an edit script; indices point into the reference (`r`) and
/// hypothesis (`h`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EditOp {
    Match { r: usize, h: usize },
    Sub { r: usize, h: usize },
    /// Reference symbol missing from the hypothesis.
    Del { r: usize },
    /// Hypothesis symbol absent from the reference.
    Ins { h: usize },
}

impl EditOp {
    pub fn cost(self) -> usize {
        usize::from(!matches!(self, EditOp::Match { .. }))
    }

    /// Reference and hypothesis indices of an aligned pair.
    pub fn pair(self) -> Option<(usize, usize)> {
        match self {
            EditOp::Match { r, h } | EditOp::Sub { r, h } => Some((r, h)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    pub distance: usize,
}

/// Global alignment under unit costs. On equal cost the traceback prefers
/// match, then substitution, then deletion, then insertion.
pub fn align_sequences(reference: &SyllableSeq, hypothesis: &SyllableSeq) -> Result<Alignment> {
    if reference.is_empty() || hypothesis.is_empty() {
        return Err(Error::Empty("alignment input"));
    }
    Ok(align_tokens(&reference.symbols, &hypothesis.symbols))
}

pub fn align_tokens<T: PartialEq>(a: &[T], b: &[T]) -> Alignment {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut cost = vec![0u32; (n + 1) * w];
    for j in 0..=m {
        cost[j] = j as u32;
    }
    for i in 1..=n {
        cost[i * w] = i as u32;
        for j in 1..=m {
            let diag = cost[(i - 1) * w + j - 1] + u32::from(a[i - 1] != b[j - 1]);
            let up = cost[(i - 1) * w + j] + 1;
            let left = cost[i * w + j - 1] + 1;
            cost[i * w + j] = diag.min(up).min(left);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 {
            let same = a[i - 1] == b[j - 1];
            let diag = cost[(i - 1) * w + j - 1];
            if same && diag == here {
                ops.push(EditOp::Match { r: i - 1, h: j - 1 });
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && diag + 1 == here {
                ops.push(EditOp::Sub { r: i - 1, h: j - 1 });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * w + j] + 1 == here {
            ops.push(EditOp::Del { r: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Ins { h: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops, distance: cost[n * w + m] as usize }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentAnchor {
    /// Half-open reference index range.
    pub ref_span: (usize, usize),
    pub hyp_span: (usize, usize),
    pub length: usize,
}

/// Maximal runs of consecutive matches at least `a_min` long, in order.
pub fn select_anchors(ops: &[EditOp], a_min: usize) -> Vec<AlignmentAnchor> {
    let mut out = Vec::new();
    let mut run: Option<(usize, usize, usize)> = None;
    let close = |run: &mut Option<(usize, usize, usize)>, out: &mut Vec<AlignmentAnchor>| {
        if let Some((r, h, len)) = run.take() {
            if len >= a_min.max(1) {
                out.push(AlignmentAnchor { ref_span: (r, r + len), hyp_span: (h, h + len), length: len });
            }
        }
    };
    for &op in ops {
        match (op, run.as_mut()) {
            (EditOp::Match { .. }, Some((_, _, len))) => *len += 1,
            (EditOp::Match { r, h }, None) => run = Some((r, h, 1)),
            _ => close(&mut run, &mut out),
        }
    }
    close(&mut run, &mut out);
    out
}

/// Where an anchor cuts the transcript and the recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionPoint {
    /// First reference index of the right-hand part.
    pub ref_index: usize,
    pub hyp_index: usize,
    /// Temporal centre of the anchor.
    pub time_s: f64,
}

pub fn partition_points(anchors: &[AlignmentAnchor], hypothesis: &SyllableSeq) -> Result<Vec<PartitionPoint>> {
    let times = hypothesis.times.as_ref().ok_or(Error::Invalid("hypothesis has no syllable times".into()))?;
    Ok(anchors
        .iter()
        .map(|a| {
            let half = a.length / 2;
            PartitionPoint {
                ref_index: a.ref_span.0 + half,
                hyp_index: a.hyp_span.0 + half,
                time_s: 0.5 * (times[a.hyp_span.0].0 + times[a.hyp_span.1 - 1].1),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTurn {
    pub speaker: String,
    pub syllables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceTranscript {
    pub turns: Vec<ReferenceTurn>,
}

impl ReferenceTranscript {
    /// The flattened syllable sequence and each turn's half-open index range.
    pub fn flatten(&self) -> (SyllableSeq, Vec<(usize, usize)>) {
        let mut symbols = Vec::new();
        let mut bounds = Vec::with_capacity(self.turns.len());
        for t in &self.turns {
            let start = symbols.len();
            symbols.extend(t.syllables.iter().cloned());
            bounds.push((start, symbols.len()));
        }
        (SyllableSeq::new(symbols), bounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSpan {
    pub turn: usize,
    pub speaker: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Half-open range of hypothesis syllables covered by the turn.
    pub hyp_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedTurn {
    pub turn: usize,
    pub speaker: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TurnLocation {
    pub spans: Vec<TurnSpan>,
    pub omitted: Vec<OmittedTurn>,
}

/// Maps each turn's first and last aligned reference syllable (match or
/// substitution) to hypothesis times. Boundary syllables without a partner
/// snap inward to the nearest aligned syllable of the same turn; turns with
/// none are omitted and reported.
pub fn locate_turns(
    reference: &ReferenceTranscript,
    hypothesis: &SyllableSeq,
    alignment: &Alignment,
) -> Result<TurnLocation> {
    let times = hypothesis.times.as_ref().ok_or(Error::Invalid("hypothesis has no syllable times".into()))?;
    let (flat, bounds) = reference.flatten();
    let mut partner = vec![None; flat.len()];
    for op in &alignment.ops {
        if let Some((r, h)) = op.pair() {
            if r >= partner.len() || h >= times.len() {
                return Err(Error::Invalid("edit script does not fit the sequences".into()));
            }
            partner[r] = Some(h);
        }
    }
    let mut out = TurnLocation::default();
    for (turn, (&(s, e), t)) in bounds.iter().zip(&reference.turns).enumerate() {
        let first = (s..e).find_map(|r| partner[r]);
        let last = (s..e).rev().find_map(|r| partner[r]);
        match (first, last) {
            (Some(a), Some(b)) if times[b].1 > times[a].0 => out.spans.push(TurnSpan {
                turn,
                speaker: t.speaker.clone(),
                start_s: times[a].0,
                end_s: times[b].1,
                hyp_span: (a, b + 1),
            }),
            (Some(_), Some(_)) => out.omitted.push(OmittedTurn {
                turn,
                speaker: t.speaker.clone(),
                reason: "aligned syllables span no time".into(),
            }),
            _ => out.omitted.push(OmittedTurn {
                turn,
                speaker: t.speaker.clone(),
                reason: "no aligned syllables".into(),
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtteranceSpan {
    pub start_s: f64,
    pub end_s: f64,
}

impl UtteranceSpan {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub a_min: usize,
    pub min_pause_s: f64,
    pub min_utterance_s: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { a_min: 5, min_pause_s: 0.5, min_utterance_s: 0.5 }
    }
}

/// Splits ordered syllable times wherever the silence between neighbours is
/// at least `min_pause_s`, then drops pieces shorter than `min_utterance_s`.
pub fn segment_turns(times: &[(f64, f64)], config: &AlignConfig) -> Vec<UtteranceSpan> {
    let mut out = Vec::new();
    let Some(&(first, _)) = times.first() else {
        return out;
    };
    let mut start = first;
    let mut end = times[0].1;
    let push = |s: f64, e: f64, out: &mut Vec<UtteranceSpan>| {
        if e - s >= config.min_utterance_s {
            out.push(UtteranceSpan { start_s: s, end_s: e });
        }
    };
    for &(s, e) in &times[1..] {
        if s - end >= config.min_pause_s {
            push(start, end, &mut out);
            start = s;
        }
        end = end.max(e);
    }
    push(start, end, &mut out);
    out
}

/// Sub-turn utterances of one located turn.
pub fn segment_turn(turn: &TurnSpan, hypothesis: &SyllableSeq, config: &AlignConfig) -> Vec<UtteranceSpan> {
    match &hypothesis.times {
        Some(times) => segment_turns(&times[turn.hyp_span.0..turn.hyp_span.1], config),
        None => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSegments {
    pub turn: usize,
    pub speaker: String,
    pub utterances: Vec<UtteranceSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub config: AlignConfig,
    pub distance: usize,
    pub anchors: Vec<AlignmentAnchor>,
    pub partitions: Vec<PartitionPoint>,
    pub turns: Vec<TurnSpan>,
    pub omitted: Vec<OmittedTurn>,
    pub segments: Vec<TurnSegments>,
}

/// Alignment, anchors, partition points, turn spans and sub-turn utterances
/// in one pass.
pub fn align_transcript(
    reference: &ReferenceTranscript,
    hypothesis: &SyllableSeq,
    config: &AlignConfig,
) -> Result<AlignReport> {
    let (flat, _) = reference.flatten();
    let alignment = align_sequences(&flat, hypothesis)?;
    let anchors = select_anchors(&alignment.ops, config.a_min);
    let partitions = partition_points(&anchors, hypothesis)?;
    let located = locate_turns(reference, hypothesis, &alignment)?;
    let segments = located
        .spans
        .iter()
        .map(|t| TurnSegments { turn: t.turn, speaker: t.speaker.clone(), utterances: segment_turn(t, hypothesis, config) })
        .collect();
    Ok(AlignReport {
        config: config.clone(),
        distance: alignment.distance,
        anchors,
        partitions,
        turns: located.spans,
        omitted: located.omitted,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> SyllableSeq {
        SyllableSeq::new(s.split_whitespace().map(String::from).collect())
    }

    #[test]
    fn identity_is_all_matches() {
        let a = seq("a b c d");
        let al = align_sequences(&a, &a).unwrap();
        assert_eq!(al.distance, 0);
        assert!(al.ops.iter().all(|o| matches!(o, EditOp::Match { .. })));
    }

    #[test]
    fn single_substitution() {
        let al = align_sequences(&seq("a b c d"), &seq("a b x d")).unwrap();
        assert_eq!(al.distance, 1);
        assert_eq!(al.ops[2], EditOp::Sub { r: 2, h: 2 });
    }

    #[test]
    fn deletion_preferred_over_insertion() {
        let al = align_tokens(&['a', 'b'], &['c']);
        assert_eq!(al.distance, 2);
        assert_eq!(al.ops, vec![EditOp::Del { r: 0 }, EditOp::Sub { r: 1, h: 0 }]);
        assert!(align_sequences(&seq("a"), &SyllableSeq::default()).is_err());
    }

    #[test]
    fn anchors_from_runs() {
        let mut ops = Vec::new();
        let (mut r, mut h) = (0, 0);
        for len in [3, 7, 12] {
            for _ in 0..len {
                ops.push(EditOp::Match { r, h });
                r += 1;
                h += 1;
            }
            ops.push(EditOp::Sub { r, h });
            r += 1;
            h += 1;
        }
        let lens: Vec<usize> = select_anchors(&ops, 5).iter().map(|a| a.length).collect();
        assert_eq!(lens, vec![7, 12]);
        let subs: Vec<EditOp> = (0..4).map(|i| EditOp::Sub { r: i, h: i }).collect();
        assert!(select_anchors(&subs, 5).is_empty());
    }

    #[test]
    fn segmentation_thresholds() {
        let times = [(0.0, 0.5), (0.8, 1.2), (2.0, 2.6), (2.7, 3.0)];
        let segs = segment_turns(&times, &AlignConfig::default());
        assert_eq!(segs, vec![UtteranceSpan { start_s: 0.0, end_s: 1.2 }, UtteranceSpan { start_s: 2.0, end_s: 3.0 }]);
        let short = segment_turns(&[(0.0, 1.0), (1.6, 2.0)], &AlignConfig::default());
        assert_eq!(short, vec![UtteranceSpan { start_s: 0.0, end_s: 1.0 }]);
    }

    #[test]
    fn deleted_turn_is_omitted() {
        let reference = ReferenceTranscript {
            turns: vec![
                ReferenceTurn { speaker: "therapist".into(), syllables: vec!["a".into(), "b".into()] },
                ReferenceTurn { speaker: "client".into(), syllables: vec!["c".into()] },
            ],
        };
        let hyp = SyllableSeq::timed(vec!["a".into(), "b".into()], vec![(0.0, 0.2), (0.2, 0.4)]).unwrap();
        let (flat, _) = reference.flatten();
        let al = align_sequences(&flat, &hyp).unwrap();
        let loc = locate_turns(&reference, &hyp, &al).unwrap();
        assert_eq!(loc.spans.len(), 1);
        assert_eq!(loc.spans[0].end_s, 0.4);
        assert_eq!(loc.omitted[0].turn, 1);
    }
}
