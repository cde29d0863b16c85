//! Corpus, transcript and artifact file formats.
//!
//! Utterances are JSON Lines, sessions a CSV table, reference transcripts a
//! JSON document and hypotheses JSON Lines of timed tokens. Parse errors carry
//! the file name and line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use uttgenre_core::aligner::{ReferenceTranscript, SyllableSeq};
use uttgenre_core::corpus::{Corpus, FrameTrack, IngestionConfig, SessionInfo, Speaker, Utterance};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct UtteranceRow {
    session_id: String,
    utterance_id: String,
    speaker: Speaker,
    duration_s: f64,
    char_count: u32,
    hop_s: f64,
    pitch: Vec<f64>,
    intensity: Vec<f64>,
}

impl From<UtteranceRow> for Utterance {
    fn from(r: UtteranceRow) -> Self {
        Utterance {
            utterance_id: r.utterance_id,
            session_id: r.session_id,
            speaker: r.speaker,
            duration_s: r.duration_s,
            char_count: r.char_count,
            pitch: FrameTrack::new(r.hop_s, r.pitch),
            intensity: FrameTrack::new(r.hop_s, r.intensity),
        }
    }
}

#[derive(Serialize)]
struct UtteranceRowRef<'a> {
    session_id: &'a str,
    utterance_id: &'a str,
    speaker: Speaker,
    duration_s: f64,
    char_count: u32,
    hop_s: f64,
    pitch: &'a [f64],
    intensity: &'a [f64],
}

#[derive(Debug, Serialize, Deserialize)]
struct HypothesisRow {
    token: String,
    start_s: f64,
    end_s: f64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn display_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Reads JSON Lines, skipping blank and `#` lines, reporting 1-based line numbers.
fn parse_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(reader: R, name: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { path: name.into(), line: i + 1, message: e.to_string() })?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { path: name.into(), line: i + 1, message: e.to_string() })?;
        out.push(row);
    }
    Ok(out)
}

pub fn parse_utterances<R: BufRead>(reader: R, name: &str) -> Result<Vec<Utterance>> {
    let rows: Vec<UtteranceRow> = parse_jsonl(reader, name)?;
    Ok(rows.into_iter().map(Utterance::from).collect())
}

pub fn read_utterances(path: &Path) -> Result<Vec<Utterance>> {
    parse_utterances(BufReader::new(open(path)?), &display_name(path))
}

pub fn write_utterances<W: Write>(mut w: W, utterances: &[Utterance], header_comment: Option<&str>) -> Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}").map_err(|e| Error::io("<utterances>", e))?;
    }
    for u in utterances {
        let row = UtteranceRowRef {
            session_id: &u.session_id,
            utterance_id: &u.utterance_id,
            speaker: u.speaker,
            duration_s: u.duration_s,
            char_count: u.char_count,
            hop_s: u.pitch.hop_s,
            pitch: &u.pitch.values,
            intensity: &u.intensity.values,
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n").map_err(|e| Error::io("<utterances>", e))?;
    }
    Ok(())
}

pub fn parse_sessions<R: Read>(reader: R, name: &str) -> Result<Vec<SessionInfo>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<SessionInfo>() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { path: name.into(), line, message: e.to_string() }
        })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_sessions(path: &Path) -> Result<Vec<SessionInfo>> {
    parse_sessions(open(path)?, &display_name(path))
}

pub fn write_sessions<W: Write>(mut w: W, sessions: &[SessionInfo], header_comment: Option<&str>) -> Result<()> {
    if let Some(c) = header_comment {
        writeln!(w, "# {c}").map_err(|e| Error::io("<sessions>", e))?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    for s in sessions {
        wtr.serialize(s)?;
    }
    wtr.flush().map_err(|e| Error::io("<sessions>", e))?;
    Ok(())
}

/// Loads and validates a corpus. Provenance records the file names only, so
/// the corpus does not depend on where the files live.
pub fn load_corpus(utterances: &Path, sessions: &Path, config: &IngestionConfig) -> Result<Corpus> {
    let utts = read_utterances(utterances)?;
    let sess = read_sessions(sessions)?;
    let provenance = format!("{} + {}", display_name(utterances), display_name(sessions));
    Ok(Corpus::build(utts, sess, config, provenance)?)
}

pub fn save_corpus(corpus: &Corpus, utterances: &Path, sessions: &Path, header_comment: Option<&str>) -> Result<()> {
    let utts: Vec<Utterance> = corpus.sessions.iter().flat_map(|s| s.utterances.iter().cloned()).collect();
    let info: Vec<SessionInfo> = corpus
        .sessions
        .iter()
        .map(|s| SessionInfo {
            session_id: s.session_id.clone(),
            therapist_id: s.therapist_id.clone(),
            empathy_rating: s.empathy_rating,
        })
        .collect();
    let mut w = create(utterances)?;
    write_utterances(&mut w, &utts, header_comment)?;
    w.flush().map_err(|e| Error::io(utterances, e))?;
    write_sessions(create(sessions)?, &info, header_comment)
}

pub fn read_reference(path: &Path) -> Result<ReferenceTranscript> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: display_name(path),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn parse_hypothesis<R: BufRead>(reader: R, name: &str) -> Result<SyllableSeq> {
    let rows: Vec<HypothesisRow> = parse_jsonl(reader, name)?;
    let (symbols, times) = rows.into_iter().map(|r| (r.token, (r.start_s, r.end_s))).unzip();
    Ok(SyllableSeq::timed(symbols, times)?)
}

pub fn read_hypothesis(path: &Path) -> Result<SyllableSeq> {
    parse_hypothesis(BufReader::new(open(path)?), &display_name(path))
}

pub fn write_hypothesis<W: Write>(mut w: W, hyp: &SyllableSeq) -> Result<()> {
    let times = hyp.times.as_deref().unwrap_or(&[]);
    for (tok, &(start_s, end_s)) in hyp.symbols.iter().zip(times) {
        serde_json::to_writer(&mut w, &HypothesisRow { token: tok.clone(), start_s, end_s })?;
        w.write_all(b"\n").map_err(|e| Error::io("<hypothesis>", e))?;
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_jsonl_hypothesis(path: &Path, hyp: &SyllableSeq) -> Result<()> {
    let mut w = create(path)?;
    write_hypothesis(&mut w, hyp)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// CSV led by `#` comment lines (one per line of `header_comment`) carrying
/// the config hash and seed.
pub fn write_csv<S: Serialize>(path: &Path, header_comment: &str, rows: impl IntoIterator<Item = S>) -> Result<()> {
    let mut w = create(path)?;
    for line in header_comment.lines() {
        let line = line.strip_prefix("# ").unwrap_or(line);
        writeln!(w, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// CSV with a leading comment line and an explicit header, for rows whose
/// width is only known at run time.
pub fn write_matrix_csv(path: &Path, header_comment: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# {header_comment}").map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(r)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_line_is_reported() {
        let text = "{\"session_id\":\"S1\",\"utterance_id\":\"U1\",\"speaker\":\"therapist\",\"duration_s\":1.0,\
                    \"char_count\":3,\"hop_s\":0.01,\"pitch\":[100.0],\"intensity\":[1.0]}\n\n{oops}\n";
        match parse_utterances(text.as_bytes(), "u.jsonl") {
            Err(Error::Parse { path, line, .. }) => {
                assert_eq!(path, "u.jsonl");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn session_rows() {
        let text = "# header\nsession_id,therapist_id,empathy_rating\nS1,T1,44.5\nS2, T2 ,30\n";
        let s = parse_sessions(text.as_bytes(), "s.csv").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].therapist_id, "T2");
        assert_eq!(s[1].empathy_rating, 30.0);
        let bad = "session_id,therapist_id,empathy_rating\nS1,T1,44.5\nS2,T2,high\n";
        assert!(matches!(parse_sessions(bad.as_bytes(), "s.csv"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn utterance_round_trip() {
        let u = Utterance {
            utterance_id: "S1-U1".into(),
            session_id: "S1".into(),
            speaker: Speaker::Therapist,
            duration_s: 0.75,
            char_count: 4,
            pitch: FrameTrack::new(0.01, vec![0.0, 120.5, 130.25]),
            intensity: FrameTrack::new(0.01, vec![60.0, 61.0, 62.0]),
        };
        let mut buf = Vec::new();
        write_utterances(&mut buf, std::slice::from_ref(&u), Some("made by a test")).unwrap();
        let back = parse_utterances(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, vec![u]);
    }

    #[test]
    fn hypothesis_round_trip() {
        let h = SyllableSeq::timed(vec!["ka".into(), "ri".into()], vec![(0.0, 0.2), (0.2, 0.4)]).unwrap();
        let mut buf = Vec::new();
        write_hypothesis(&mut buf, &h).unwrap();
        assert_eq!(parse_hypothesis(buf.as_slice(), "mem").unwrap(), h);
    }
}
