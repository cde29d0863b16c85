//! The `uttgenre` command line. Summaries go to the given writer so the
//! commands can also be driven in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uttgenre_core::aligner::align_transcript;
use uttgenre_core::corpus::{validate_corpus, Corpus};
use uttgenre_core::features::NORMALIZATION_CONVENTION;
use uttgenre_core::synth::{generate, generate_transcripts, PlantSpec, TranscriptSpec};

use crate::config::{parse_cv_mode, parse_folds_by, PipelineConfig, RunSettings};
use crate::exec::RayonExecutor;
use crate::pipeline::{self, Artifact};
use crate::{io, Error, Result};

#[derive(Parser)]
#[command(name = "uttgenre", version, about = "Mine prosodic utterance genres that track empathy ratings")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Opts {
    /// Key-value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Quantization levels per feature.
    #[arg(long, global = true)]
    q: Option<usize>,
    /// Largest cluster count of the K sweep.
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    rf_min: Option<f64>,
    #[arg(long, global = true)]
    rg_min: Option<f64>,
    #[arg(long, global = true)]
    pv_max: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["faithful", "nested"])]
    cv_mode: Option<String>,
    #[arg(long, global = true, value_parser = ["session", "therapist"])]
    folds_by: Option<String>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// k-means restarts per trial.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Minimum matched run kept as an alignment anchor.
    #[arg(long, global = true)]
    a_min: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to every core. Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CorpusFiles {
    /// Utterances, JSON Lines.
    #[arg(long)]
    utterances: PathBuf,
    /// Sessions, CSV with session_id,therapist_id,empathy_rating.
    #[arg(long)]
    sessions: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Standard,
    Null,
    Separable,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and summarize it.
    Ingest(CorpusFiles),
    /// Write normalized features per utterance.
    Features(CorpusFiles),
    /// Mine salient utterance genres.
    Mine(CorpusFiles),
    /// Cross-validate the genre method and the pattern baseline.
    Classify(CorpusFiles),
    /// Repeat mining and classification for Q = 2..5.
    SweepQ(CorpusFiles),
    /// Locate speaker turns of a reference transcript in a timed hypothesis.
    Align {
        /// Reference transcript JSON.
        #[arg(long)]
        reference: PathBuf,
        /// Hypothesis tokens, JSON Lines of {token, start_s, end_s}.
        #[arg(long)]
        hypothesis: PathBuf,
    },
    /// Generate a synthetic corpus with planted genres.
    Simulate {
        #[arg(long, value_enum, default_value = "standard")]
        preset: Preset,
        /// Plant spec JSON replacing the preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Also write a synthetic reference transcript and hypothesis.
        #[arg(long)]
        transcripts: bool,
    },
}

fn resolve(opts: &Opts) -> Result<(PipelineConfig, RunSettings)> {
    let mut cfg = PipelineConfig::default();
    let mut run = RunSettings::default();
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        cfg.apply_file_text(&text, &mut run)?;
    }
    macro_rules! flag {
        ($field:ident) => {
            if let Some(v) = opts.$field {
                cfg.$field = v;
            }
        };
    }
    flag!(q);
    flag!(n_max);
    flag!(rf_min);
    flag!(rg_min);
    flag!(pv_max);
    flag!(seed);
    flag!(folds);
    flag!(restarts);
    flag!(a_min);
    if let Some(m) = &opts.cv_mode {
        cfg.cv_mode = parse_cv_mode(m)?;
    }
    if let Some(f) = &opts.folds_by {
        cfg.folds_by = parse_folds_by(f)?;
    }
    if opts.out_dir.is_some() {
        run.out_dir = opts.out_dir.clone();
    }
    if opts.jobs.is_some() {
        run.jobs = opts.jobs;
    }
    cfg.validate()?;
    Ok((cfg, run))
}

fn load(files: &CorpusFiles, cfg: &PipelineConfig) -> Result<Corpus> {
    io::load_corpus(&files.utterances, &files.sessions, &cfg.ingestion())
}

// A closed stdout (for example `| head`) is not worth failing over.
macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        let _ = writeln!($out, $($arg)*);
    };
}

fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let (cfg, settings) = resolve(&cli.opts)?;
    let out_dir = settings.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io { path: out_dir.clone(), source: e })?;
    let exec = RayonExecutor::new(settings.jobs);
    let header = pipeline::header_comment(&cfg);

    match cli.command {
        Command::Ingest(files) => {
            let corpus = load(&files, &cfg)?;
            let report = validate_corpus(&corpus);
            let path = out_path(&out_dir, "validation.json");
            io::write_json(&path, &Artifact::new("validation", &cfg, corpus.provenance.clone(), &report))?;
            say!(
                out,
                "{} sessions ({} high, {} low, {} excluded), {} utterances, {} dropped short, {} flagged unvoiced",
                report.session_count,
                report.labels.high,
                report.labels.low,
                report.labels.excluded,
                report.utterance_count,
                report.ingest.dropped_short,
                report.flagged_utterances.len()
            );
            say!(out, "wrote {}", path.display());
        }
        Command::Features(files) => {
            let corpus = load(&files, &cfg)?;
            let table = pipeline::feature_table(&corpus)?;
            let path = out_path(&out_dir, "features.csv");
            let comment = format!("{header}\nnormalization: {NORMALIZATION_CONVENTION}");
            io::write_csv(&path, &comment, pipeline::feature_rows(&table))?;
            say!(out, "{} utterances in {} sessions", table.utterances.len(), table.sessions.len());
            say!(out, "wrote {}", path.display());
        }
        Command::Mine(files) => {
            let corpus = load(&files, &cfg)?;
            let table = pipeline::feature_table(&corpus)?;
            let outcome = pipeline::mine(&table, &cfg, &exec)?;
            let report = pipeline::genre_report(&outcome);
            let path = out_path(&out_dir, "genres.json");
            io::write_json(&path, &Artifact::new("genres", &cfg, corpus.provenance.clone(), &report))?;
            if report.genres.is_empty() {
                eprintln!("warning: no salient genres at the current thresholds");
            }
            say!(out, "{} trials, {} salient genres", report.trials, report.genres.len());
            for g in &report.genres {
                say!(
                    out,
                    "  {:<24} rho {:>7.3}  p {:.2e}  mean ratio {:.3}",
                    g.pattern,
                    g.rho.unwrap_or(f64::NAN),
                    g.p_value.unwrap_or(f64::NAN),
                    g.mean_contribution
                );
            }
            say!(out, "wrote {}", path.display());
        }
        Command::Classify(files) => {
            let corpus = load(&files, &cfg)?;
            let table = pipeline::feature_table(&corpus)?;
            let c = pipeline::classify(&table, &cfg, &exec)?;
            let path = out_path(&out_dir, "cv.json");
            io::write_json(&path, &Artifact::new("cv", &cfg, corpus.provenance.clone(), &c.report))?;
            for (name, m) in [("genre_features.csv", &c.genre_matrix), ("pattern_features.csv", &c.pattern_matrix)] {
                io::write_matrix_csv(&out_path(&out_dir, name), &header, &m.csv_header(), &m.csv_rows())?;
            }
            for r in [&c.report.genre, &c.report.baseline] {
                say!(
                    out,
                    "{:<16} mean accuracy {:.3}  folds {:?}",
                    format!("{:?}", r.method),
                    r.mean_accuracy,
                    r.fold_accuracies.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
                );
            }
            say!(out, "wrote {}", path.display());
        }
        Command::SweepQ(files) => {
            let corpus = load(&files, &cfg)?;
            let table = pipeline::feature_table(&corpus)?;
            let rows = pipeline::sweep_q(&table, &cfg, &exec)?;
            let path = out_path(&out_dir, "sweep_q.csv");
            io::write_csv(&path, &header, &rows)?;
            for r in &rows {
                say!(
                    out,
                    "Q={} {:<16} dim {:>5.1}  accuracy {:.3}",
                    r.q,
                    format!("{:?}", r.method),
                    r.mean_dimension,
                    r.mean_accuracy
                );
            }
            say!(out, "wrote {}", path.display());
        }
        Command::Align { reference, hypothesis } => {
            let reference_t = io::read_reference(&reference)?;
            let hyp = io::read_hypothesis(&hypothesis)?;
            let report = align_transcript(&reference_t, &hyp, &cfg.align())?;
            let input = format!(
                "{} + {}",
                reference.file_name().unwrap_or_default().to_string_lossy(),
                hypothesis.file_name().unwrap_or_default().to_string_lossy()
            );
            let path = out_path(&out_dir, "turns.json");
            io::write_json(&path, &Artifact::new("turns", &cfg, input, &report))?;
            say!(
                out,
                "distance {}, {} anchors, {} turns located, {} omitted",
                report.distance,
                report.anchors.len(),
                report.turns.len(),
                report.omitted.len()
            );
            say!(out, "wrote {}", path.display());
        }
        Command::Simulate { preset, spec, transcripts } => {
            let plant = match &spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    serde_json::from_str(&text)?
                }
                None => match preset {
                    Preset::Standard => PlantSpec::standard(),
                    Preset::Null => PlantSpec::null(),
                    Preset::Separable => PlantSpec::separable(),
                },
            };
            let (corpus, truth) = generate(&plant, cfg.seed)?;
            let utts = out_path(&out_dir, "utterances.jsonl");
            let sessions = out_path(&out_dir, "sessions.csv");
            io::save_corpus(&corpus, &utts, &sessions, Some(&header))?;
            io::write_json(
                &out_path(&out_dir, "truth.json"),
                &Artifact::new("truth", &cfg, corpus.provenance.clone(), (&plant, &truth)),
            )?;
            say!(out, "{} sessions, {} utterances", corpus.sessions.len(), corpus.utterance_count());
            if transcripts {
                let sample = generate_transcripts(&TranscriptSpec::default(), cfg.seed)?;
                io::write_json(&out_path(&out_dir, "reference.json"), &sample.reference)?;
                io::write_jsonl_hypothesis(&out_path(&out_dir, "hypothesis.jsonl"), &sample.hypothesis)?;
                io::write_json(
                    &out_path(&out_dir, "transcript_truth.json"),
                    &Artifact::new("transcript-truth", &cfg, "synthetic", &sample.truth),
                )?;
                say!(out, "{} reference turns, {} injected errors", sample.reference.turns.len(), sample.injected_errors());
            }
            say!(out, "wrote {}", out_dir.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs one command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli, out)
}

pub fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match run(Cli::parse(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
