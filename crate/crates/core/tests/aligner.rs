use proptest::prelude::*;
use uttgenre_core::aligner::{
    align_tokens, align_transcript, select_anchors, segment_turns, AlignConfig, EditOp, UtteranceSpan,
};
use uttgenre_core::synth::{generate_transcripts, TranscriptSpec};

// Textbook full-matrix distance, no traceback.
fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, y) in b.iter().enumerate() {
            cur.push((prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn ops_cost(ops: &[EditOp]) -> usize {
    ops.iter().map(|o| o.cost()).sum()
}

proptest! {
    #[test]
    fn distance_matches_oracle(a in prop::collection::vec(0u8..4, 0..25), b in prop::collection::vec(0u8..4, 0..25)) {
        let al = align_tokens(&a, &b);
        prop_assert_eq!(al.distance, levenshtein(&a, &b));
        prop_assert_eq!(ops_cost(&al.ops), al.distance);
    }

    #[test]
    fn edit_script_covers_both_sequences(a in prop::collection::vec(0u8..4, 0..25), b in prop::collection::vec(0u8..4, 0..25)) {
        let al = align_tokens(&a, &b);
        let mut r = 0;
        let mut h = 0;
        for op in &al.ops {
            match *op {
                EditOp::Match { r: i, h: j } => {
                    prop_assert_eq!((i, j), (r, h));
                    prop_assert_eq!(a[i], b[j]);
                    r += 1;
                    h += 1;
                }
                EditOp::Sub { r: i, h: j } => {
                    prop_assert_eq!((i, j), (r, h));
                    prop_assert_ne!(a[i], b[j]);
                    r += 1;
                    h += 1;
                }
                EditOp::Del { r: i } => {
                    prop_assert_eq!(i, r);
                    r += 1;
                }
                EditOp::Ins { h: j } => {
                    prop_assert_eq!(j, h);
                    h += 1;
                }
            }
        }
        prop_assert_eq!((r, h), (a.len(), b.len()));
    }
}

#[test]
fn short_runs_are_not_anchors() {
    let mut ops = Vec::new();
    let mut i = 0;
    for run in [3, 7, 12] {
        for _ in 0..run {
            ops.push(EditOp::Match { r: i, h: i });
            i += 1;
        }
        ops.push(EditOp::Sub { r: i, h: i });
        i += 1;
    }
    let anchors = select_anchors(&ops, 5);
    let lengths: Vec<usize> = anchors.iter().map(|a| a.length).collect();
    assert_eq!(lengths, [7, 12]);
    assert_eq!(anchors[0].ref_span, (4, 11));
    assert_eq!(anchors[1].hyp_span, (12, 24));
}

#[test]
fn pauses_split_and_fragments_drop() {
    let cfg = AlignConfig::default();
    let times = [(0.0, 0.2), (0.2, 0.4), (0.7, 0.9), (0.9, 1.1), (1.9, 2.1), (2.1, 2.3)];
    let spans = segment_turns(&times, &cfg);
    assert_eq!(spans, vec![UtteranceSpan { start_s: 0.0, end_s: 1.1 }]);
    let times = [(0.0, 0.3), (0.3, 0.6), (1.4, 1.8)];
    assert_eq!(segment_turns(&times, &cfg), vec![UtteranceSpan { start_s: 0.0, end_s: 0.6 }]);
}

#[test]
fn clean_hypothesis_gives_exact_turns() {
    let spec = TranscriptSpec { error_rate: 0.0, ..TranscriptSpec::default() };
    let sample = generate_transcripts(&spec, 11).unwrap();
    assert_eq!(sample.injected_errors(), 0);
    let report = align_transcript(&sample.reference, &sample.hypothesis, &AlignConfig::default()).unwrap();
    assert_eq!(report.distance, 0);
    assert!(report.omitted.is_empty());
    assert_eq!(report.turns.len(), sample.truth.len());
    for ((t, s), truth) in report.turns.iter().zip(&report.segments).zip(&sample.truth) {
        assert!((t.start_s - truth.start_s).abs() < 1e-9);
        assert!((t.end_s - truth.end_s).abs() < 1e-9);
        assert_eq!(s.utterances.len(), truth.utterances.len());
    }
}

#[test]
fn noisy_hypothesis_keeps_boundaries_close() {
    let sample = generate_transcripts(&TranscriptSpec::default(), 3).unwrap();
    let report = align_transcript(&sample.reference, &sample.hypothesis, &AlignConfig::default()).unwrap();
    assert!(report.distance <= sample.injected_errors());
    let mut worst: f64 = 0.0;
    for t in &report.turns {
        let truth = &sample.truth[t.turn];
        worst = worst.max((t.start_s - truth.start_s).abs()).max((t.end_s - truth.end_s).abs());
    }
    assert!(worst <= 2.0 * spec_syllable(), "boundary error {worst}");
}

fn spec_syllable() -> f64 {
    TranscriptSpec::default().syllable_s
}
