//! Pipeline stages behind the command line, returning serializable artifacts.

use serde::Serialize;
use uttgenre_core::classifier::{
    cross_validate, cross_validate_mined, mine_prominent_patterns, pattern_features, session_features, CvMode,
    CvReport, Method, PatternSet, SessionFeatureVector,
};
use uttgenre_core::corpus::{Corpus, Label};
use uttgenre_core::features::{Feature, FeatureTable, NORMALIZATION_CONVENTION};
use uttgenre_core::genre::{
    mine_with, GenreSource, MiningOutcome, SalientGenre, SalientGenreSet, SkippedCombo, Thresholds,
    TrialExecutor, ValueRange,
};
use uttgenre_core::quantizer::{QuantizerSpec, PERCENTILE_CONVENTION};
use uttgenre_core::stats::CorrelationResult;

use crate::config::PipelineConfig;
use crate::error::Result;

pub const TOOL: &str = "uttgenre";

/// Wrapper written around every JSON artifact.
#[derive(Debug, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub config: &'a PipelineConfig,
    pub conventions: Conventions,
    pub input: String,
    pub result: T,
}

impl<'a, T: Serialize> Artifact<'a, T> {
    pub fn new(kind: &'static str, config: &'a PipelineConfig, input: impl Into<String>, result: T) -> Self {
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            kind,
            config_hash: config.hash(),
            seed: config.seed,
            config,
            conventions: Conventions::default(),
            input: input.into(),
            result,
        }
    }
}

/// Fixed conventions that are not configurable but shape every number.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub normalization: &'static str,
    pub percentile: &'static str,
    pub p_value: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            normalization: NORMALIZATION_CONVENTION,
            percentile: PERCENTILE_CONVENTION,
            p_value: "two-tailed, Student t with n - 2 degrees of freedom",
        }
    }
}

/// The comment line placed at the top of CSV and JSON Lines artifacts.
pub fn header_comment(config: &PipelineConfig) -> String {
    format!("{TOOL} {} config_hash={} seed={}", env!("CARGO_PKG_VERSION"), config.hash(), config.seed)
}

pub fn feature_table(corpus: &Corpus) -> Result<FeatureTable> {
    Ok(FeatureTable::from_corpus(corpus, false)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureRow<'a> {
    pub session_id: &'a str,
    pub utterance_id: &'a str,
    pub label: Label,
    pub rating: f64,
    pub d: f64,
    pub sr: f64,
    pub p_mu: f64,
    pub p_std: f64,
    pub p_iqr: f64,
    pub i_mu: f64,
    pub i_std: f64,
    pub i_iqr: f64,
}

/// One row per analyzed utterance, in table order.
pub fn feature_rows(table: &FeatureTable) -> Vec<FeatureRow<'_>> {
    table
        .utterances
        .iter()
        .map(|u| {
            let s = &table.sessions[u.session];
            let v = |f: Feature| u.features.get(f);
            FeatureRow {
                session_id: &s.session_id,
                utterance_id: &u.utterance_id,
                label: s.label,
                rating: s.rating,
                d: v(Feature::Duration),
                sr: v(Feature::SpeechRate),
                p_mu: v(Feature::PitchMean),
                p_std: v(Feature::PitchStd),
                p_iqr: v(Feature::PitchIqr),
                i_mu: v(Feature::IntensityMean),
                i_std: v(Feature::IntensityStd),
                i_iqr: v(Feature::IntensityIqr),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GenreEntry {
    pub combo: String,
    pub combo_index: usize,
    pub features: Vec<Feature>,
    pub pattern: String,
    pub pattern_bins: Vec<u8>,
    pub source_trials: Vec<GenreSource>,
    /// Mean dominant-pattern share over the merged clusters.
    pub occurrence_ratio: f64,
    pub mean_contribution: f64,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    /// Per feature, the hull of the merged clusters' ranges.
    pub value_range: Vec<ValueRange>,
    /// Per feature, the medians of the merged clusters' bounds.
    pub aggregated_range: Vec<ValueRange>,
    pub clusters: Vec<ClusterEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterEntry {
    pub k: usize,
    pub cluster: usize,
    pub cluster_size: usize,
    pub occurrence_ratio: f64,
    pub mean_contribution: f64,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub value_range: Vec<ValueRange>,
}

fn split(c: Option<CorrelationResult>) -> (Option<f64>, Option<f64>) {
    (c.map(|c| c.rho), c.map(|c| c.p_value))
}

impl GenreEntry {
    pub fn from_genre(g: &SalientGenre) -> Self {
        let dims = g.combo.features.len();
        let value_range = (0..dims)
            .map(|j| ValueRange {
                min: g.clusters.iter().map(|c| c.value_range[j].min).fold(f64::INFINITY, f64::min),
                max: g.clusters.iter().map(|c| c.value_range[j].max).fold(f64::NEG_INFINITY, f64::max),
            })
            .collect();
        let occ = if g.clusters.is_empty() {
            0.0
        } else {
            g.clusters.iter().map(|c| c.occurrence_ratio).sum::<f64>() / g.clusters.len() as f64
        };
        let (rho, p_value) = split(g.correlation);
        GenreEntry {
            combo: g.combo.name(),
            combo_index: g.combo_index,
            features: g.combo.features.clone(),
            pattern: g.describe(),
            pattern_bins: g.pattern.bins.clone(),
            source_trials: g.clusters.iter().map(|c| c.source).collect(),
            occurrence_ratio: occ,
            mean_contribution: g.mean_contribution,
            rho,
            p_value,
            value_range,
            aggregated_range: g.aggregated_range.clone(),
            clusters: g
                .clusters
                .iter()
                .map(|c| {
                    let (rho, p_value) = split(c.correlation);
                    ClusterEntry {
                        k: c.source.k,
                        cluster: c.source.cluster,
                        cluster_size: c.cluster_size,
                        occurrence_ratio: c.occurrence_ratio,
                        mean_contribution: c.mean_contribution,
                        rho,
                        p_value,
                        value_range: c.value_range.clone(),
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenreReport {
    pub thresholds: Thresholds,
    pub trials: usize,
    pub candidate_count: usize,
    /// Sorted by p-value ascending; genres without a p-value last.
    pub genres: Vec<GenreEntry>,
    pub skipped: Vec<SkippedCombo>,
    pub quantizers: Vec<QuantizerSpec>,
}

pub fn genre_report(outcome: &MiningOutcome) -> GenreReport {
    let mut genres: Vec<GenreEntry> = outcome.salient.genres.iter().map(GenreEntry::from_genre).collect();
    genres.sort_by(|a, b| {
        let pa = a.p_value.unwrap_or(f64::INFINITY);
        let pb = b.p_value.unwrap_or(f64::INFINITY);
        pa.total_cmp(&pb)
            .then(a.combo_index.cmp(&b.combo_index))
            .then_with(|| a.pattern_bins.cmp(&b.pattern_bins))
    });
    GenreReport {
        thresholds: outcome.salient.thresholds.clone(),
        trials: outcome.trials,
        candidate_count: outcome.candidates.len(),
        genres,
        skipped: outcome.skipped.clone(),
        quantizers: outcome.quantizers.clone(),
    }
}

pub fn mine<E: TrialExecutor>(table: &FeatureTable, config: &PipelineConfig, exec: &E) -> Result<MiningOutcome> {
    Ok(mine_with(table, &config.mining(), exec)?)
}

/// A session-by-feature matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<SessionFeatureVector>,
}

impl FeatureMatrix {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["session_id".to_string(), "label".to_string()];
        h.extend(self.columns.iter().cloned());
        h
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let label = match r.label {
                    Label::High => "high",
                    Label::Low => "low",
                    Label::Excluded => "excluded",
                };
                let mut row = vec![r.session_id.clone(), label.to_string()];
                row.extend(r.values.iter().map(|v| v.to_string()));
                row
            })
            .collect()
    }
}

fn genre_matrix(table: &FeatureTable, genres: &SalientGenreSet) -> Result<FeatureMatrix> {
    let columns: Vec<String> = genres.genres.iter().map(|g| g.describe()).collect();
    let rows = if genres.genres.is_empty() {
        table
            .sessions
            .iter()
            .map(|s| SessionFeatureVector { session_id: s.session_id.clone(), values: Vec::new(), label: s.label })
            .collect()
    } else {
        session_features(table, genres)?
    };
    Ok(FeatureMatrix { columns, rows })
}

fn pattern_matrix(table: &FeatureTable, set: &PatternSet) -> FeatureMatrix {
    FeatureMatrix {
        columns: set.patterns.iter().map(|p| p.describe(set.q)).collect(),
        rows: pattern_features(table, set),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub genre: CvReport,
    pub baseline: CvReport,
    /// Test sessions of each fold.
    pub folds: Vec<Vec<String>>,
    /// Genres mined on every session (the features of faithful mode).
    pub genres: Vec<String>,
    /// Prominent patterns mined on every session.
    pub patterns: Vec<String>,
}

pub struct Classified {
    pub report: ClassifyReport,
    pub genre_matrix: FeatureMatrix,
    pub pattern_matrix: FeatureMatrix,
}

/// Cross-validates both methods. Whole-corpus genres and patterns are mined
/// once for the exported matrices; faithful mode reuses them for every fold.
pub fn classify<E: TrialExecutor>(table: &FeatureTable, config: &PipelineConfig, exec: &E) -> Result<Classified> {
    let cv = config.cv();
    let mined = mine(table, config, exec)?;
    let patterns = mine_prominent_patterns(table, config.q, config.pv_max)?;
    let outcome = match config.cv_mode {
        CvMode::Faithful => cross_validate_mined(table, &mined.salient, &patterns, &cv)?,
        CvMode::Nested => cross_validate(table, &cv, exec)?,
    };
    let folds = outcome
        .folds
        .iter()
        .map(|f| f.iter().map(|&i| table.sessions[i].session_id.clone()).collect())
        .collect();
    Ok(Classified {
        report: ClassifyReport {
            genre: outcome.genre,
            baseline: outcome.baseline,
            folds,
            genres: mined.salient.genres.iter().map(|g| g.describe()).collect(),
            patterns: patterns.patterns.iter().map(|p| p.describe(patterns.q)).collect(),
        },
        genre_matrix: genre_matrix(table, &mined.salient)?,
        pattern_matrix: pattern_matrix(table, &patterns),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub q: usize,
    pub method: Method,
    /// Empty when the dimension differs between folds.
    pub dimension: Option<usize>,
    pub mean_dimension: f64,
    pub mean_accuracy: f64,
    pub mode: CvMode,
}

fn sweep_row(q: usize, r: &CvReport) -> SweepRow {
    let n = r.fold_dimensions.len().max(1) as f64;
    SweepRow {
        q,
        method: r.method,
        dimension: r.dimension(),
        mean_dimension: r.fold_dimensions.iter().sum::<usize>() as f64 / n,
        mean_accuracy: r.mean_accuracy,
        mode: r.mode,
    }
}

pub const SWEEP_Q: [usize; 4] = [2, 3, 4, 5];

/// Mining and classification at each Q, genre then baseline per Q.
pub fn sweep_q<E: TrialExecutor>(table: &FeatureTable, config: &PipelineConfig, exec: &E) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(SWEEP_Q.len() * 2);
    for q in SWEEP_Q {
        let cfg = PipelineConfig { q, ..config.clone() };
        let c = classify(table, &cfg, exec)?;
        rows.push(sweep_row(q, &c.report.genre));
        rows.push(sweep_row(q, &c.report.baseline));
    }
    Ok(rows)
}
