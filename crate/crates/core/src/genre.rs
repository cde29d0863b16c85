//! Utterance-genre mining.
//!
//! For every feature combination the corpus is clustered for a sweep of `K`.
//! Each cluster is summarised by its dominant quantized pattern (its genre);
//! the genre's per-session contribution ratio is correlated with the empathy
//! ratings, and genres passing three salience conditions are kept. Genres of
//! different clusters sharing a (combination, pattern) key are merged into one
//! value range by taking medians of the per-cluster bounds.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::features::{Feature, FeatureTable, NormFeatures};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::quantizer::{fit_quantizer_iter, FeaturePattern, QuantizerSpec};
use crate::rng::derive_seed;
use crate::stats::{self, pearson, CorrelationResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComboGroup {
    /// Subsets of `{d, sr, p_mu, i_mu}`.
    Means,
    /// Subsets of the indivisible pairs `(p_std, p_iqr)` and `(i_std, i_iqr)`.
    Variation,
}

/// An ordered set of feature parameters clustered together.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureCombo {
    pub group: ComboGroup,
    pub features: Vec<Feature>,
}

impl FeatureCombo {
    pub fn name(&self) -> String {
        let names: Vec<&str> = self.features.iter().map(|f| f.name()).collect();
        names.join("+")
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

impl fmt::Display for FeatureCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

const MEAN_FEATURES: [Feature; 4] =
    [Feature::Duration, Feature::SpeechRate, Feature::PitchMean, Feature::IntensityMean];
const VARIATION_PAIRS: [[Feature; 2]; 2] =
    [[Feature::PitchStd, Feature::PitchIqr], [Feature::IntensityStd, Feature::IntensityIqr]];

/// All 15 non-empty subsets of the mean features followed by the 3 variation
/// combinations, in canonical order (by size, then lexicographically).
pub fn enumerate_combos() -> Vec<FeatureCombo> {
    let mut out = Vec::with_capacity(18);
    for size in 1..=MEAN_FEATURES.len() {
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        subsets_of_size(MEAN_FEATURES.len(), size, 0, &mut Vec::new(), &mut subsets);
        for s in subsets {
            out.push(FeatureCombo { group: ComboGroup::Means, features: s.iter().map(|&i| MEAN_FEATURES[i]).collect() });
        }
    }
    for pairs in [&VARIATION_PAIRS[..1], &VARIATION_PAIRS[1..], &VARIATION_PAIRS[..]] {
        out.push(FeatureCombo { group: ComboGroup::Variation, features: pairs.iter().flatten().copied().collect() });
    }
    out
}

fn subsets_of_size(n: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets_of_size(n, size, i + 1, cur, out);
        cur.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

/// Which clustering trial produced a genre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GenreSource {
    pub combo_index: usize,
    pub k: usize,
    pub cluster: usize,
    pub seed: u64,
}

/// The genre of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceGenre {
    pub combo: FeatureCombo,
    pub q: usize,
    pub pattern: FeaturePattern,
    pub source: GenreSource,
    pub cluster_size: usize,
    pub pattern_count: usize,
    /// Share of the cluster carrying the dominant pattern.
    pub occurrence_ratio: f64,
    /// Per analysis session (table order): carriers in this cluster over the
    /// session's utterance count.
    pub contribution: Vec<f64>,
    pub mean_contribution: f64,
    /// `None` when the contributions (or ratings) are constant.
    pub correlation: Option<CorrelationResult>,
    /// Per combo feature, range over the pattern-carrying members.
    pub value_range: Vec<ValueRange>,
}

impl UtteranceGenre {
    pub fn key(&self) -> (usize, usize) {
        (self.source.combo_index, self.pattern.code(self.q))
    }
}

/// Dominant pattern of a cluster and the range of its carriers. Ties go to the
/// lexicographically smallest pattern.
pub fn derive_genre(members: &[NormFeatures], spec: &QuantizerSpec) -> Result<UtteranceGenre> {
    if members.is_empty() {
        return Err(Error::Empty("cluster"));
    }
    let codes: Vec<usize> = members.iter().map(|f| spec.code_of(f)).collect();
    let (code, count) = dominant(&codes, spec.pattern_count());
    let carriers = members.iter().zip(&codes).filter(|(_, &c)| c == code).map(|(f, _)| f);
    let value_range = ranges(carriers, &spec.combo.features);
    Ok(UtteranceGenre {
        combo: spec.combo.clone(),
        q: spec.q,
        pattern: FeaturePattern::from_code(code, spec.combo.dim(), spec.q),
        source: GenreSource { combo_index: usize::MAX, k: 0, cluster: 0, seed: 0 },
        cluster_size: members.len(),
        pattern_count: count,
        occurrence_ratio: count as f64 / members.len() as f64,
        contribution: Vec::new(),
        mean_contribution: 0.0,
        correlation: None,
        value_range,
    })
}

fn dominant(codes: &[usize], n_patterns: usize) -> (usize, usize) {
    let mut counts = vec![0usize; n_patterns];
    for &c in codes {
        counts[c] += 1;
    }
    let mut best = (0, 0);
    for (code, &c) in counts.iter().enumerate() {
        if c > best.1 {
            best = (code, c);
        }
    }
    best
}

fn ranges<'a>(carriers: impl Iterator<Item = &'a NormFeatures>, features: &[Feature]) -> Vec<ValueRange> {
    let mut out = vec![ValueRange { min: f64::INFINITY, max: f64::NEG_INFINITY }; features.len()];
    for f in carriers {
        for (r, &feat) in out.iter_mut().zip(features) {
            let v = f.get(feat);
            r.min = r.min.min(v);
            r.max = r.max.max(v);
        }
    }
    out
}

/// Contribution ratio of a genre per session: members of the cluster (table
/// utterance indices) carrying the genre pattern, over the session's
/// utterance count. Sessions without such members get 0.
pub fn contribution_ratios(
    table: &FeatureTable,
    cluster_members: &[usize],
    genre: &UtteranceGenre,
    spec: &QuantizerSpec,
) -> Vec<f64> {
    let code = genre.pattern.code(spec.q);
    let mut counts = vec![0usize; table.sessions.len()];
    for &i in cluster_members {
        let u = &table.utterances[i];
        if spec.code_of(&u.features) == code {
            counts[u.session] += 1;
        }
    }
    ratios(table, &counts)
}

fn ratios(table: &FeatureTable, counts: &[usize]) -> Vec<f64> {
    counts.iter().zip(&table.sessions).map(|(&c, s)| c as f64 / s.utterance_count as f64).collect()
}

/// Correlation of per-session values against the ratings; `None` if undefined.
pub fn rating_correlation(values: &[f64], ratings: &[f64]) -> Option<CorrelationResult> {
    pearson(values, ratings).ok()
}

/// Salience thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest K of the sweep (`N`).
    pub n_max: usize,
    /// Minimum occurrence ratio of the dominant pattern in its cluster.
    pub rf_min: f64,
    /// Minimum mean contribution ratio over sessions.
    pub rg_min: f64,
    /// Maximum correlation p-value.
    pub pv_max: f64,
    pub q: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { n_max: 20, rf_min: 0.5, rg_min: 0.05, pv_max: 0.05, q: 3 }
    }
}

impl Thresholds {
    /// Conditions (i)-(iii), all strict.
    pub fn is_salient(&self, g: &UtteranceGenre) -> bool {
        g.occurrence_ratio > self.rf_min
            && g.mean_contribution > self.rg_min
            && g.correlation.is_some_and(|c| c.p_value < self.pv_max)
    }
}

/// Per-cluster statistics kept for a merged genre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStat {
    pub source: GenreSource,
    pub cluster_size: usize,
    pub occurrence_ratio: f64,
    pub mean_contribution: f64,
    pub correlation: Option<CorrelationResult>,
    pub value_range: Vec<ValueRange>,
}

/// A salient (combination, pattern) key after merging its clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientGenre {
    pub combo: FeatureCombo,
    pub combo_index: usize,
    pub q: usize,
    pub pattern: FeaturePattern,
    pub clusters: Vec<ClusterStat>,
    /// Per feature: median of cluster minima, median of cluster maxima.
    pub aggregated_range: Vec<ValueRange>,
    /// Per session: utterances inside the aggregated range over the session total.
    pub contribution: Vec<f64>,
    pub mean_contribution: f64,
    pub correlation: Option<CorrelationResult>,
}

impl SalientGenre {
    pub fn describe(&self) -> String {
        self.pattern.describe(&self.combo, self.q)
    }

    /// Inclusive range test on every feature of the combination.
    pub fn contains(&self, f: &NormFeatures) -> bool {
        self.combo.features.iter().zip(&self.aggregated_range).all(|(&feat, r)| r.contains(f.get(feat)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientGenreSet {
    /// Canonical order: combination index, then pattern.
    pub genres: Vec<SalientGenre>,
    pub thresholds: Thresholds,
}

/// Screens `genres` with conditions (i)-(iii), merges survivors by
/// (combination, pattern) and recomputes each merged genre's contributions
/// and correlation from its aggregated range.
pub fn select_salient(genres: &[UtteranceGenre], thresholds: &Thresholds, table: &FeatureTable) -> SalientGenreSet {
    let mut groups: BTreeMap<(usize, usize), Vec<&UtteranceGenre>> = BTreeMap::new();
    for g in genres.iter().filter(|g| thresholds.is_salient(g)) {
        groups.entry(g.key()).or_default().push(g);
    }
    let ratings = table.ratings();
    let mut out = Vec::with_capacity(groups.len());
    for ((combo_index, _), mut members) in groups {
        members.sort_by_key(|g| g.source);
        let first = members[0];
        let dim = first.combo.dim();
        let aggregated_range: Vec<ValueRange> = (0..dim)
            .map(|d| {
                let mins: Vec<f64> = members.iter().map(|g| g.value_range[d].min).collect();
                let maxs: Vec<f64> = members.iter().map(|g| g.value_range[d].max).collect();
                ValueRange {
                    min: stats::median(&mins).expect("non-empty group"),
                    max: stats::median(&maxs).expect("non-empty group"),
                }
            })
            .collect();
        let mut merged = SalientGenre {
            combo: first.combo.clone(),
            combo_index,
            q: first.q,
            pattern: first.pattern.clone(),
            clusters: members
                .iter()
                .map(|g| ClusterStat {
                    source: g.source,
                    cluster_size: g.cluster_size,
                    occurrence_ratio: g.occurrence_ratio,
                    mean_contribution: g.mean_contribution,
                    correlation: g.correlation,
                    value_range: g.value_range.clone(),
                })
                .collect(),
            aggregated_range,
            contribution: Vec::new(),
            mean_contribution: 0.0,
            correlation: None,
        };
        merged.contribution = range_contributions(table, &merged);
        merged.mean_contribution = stats::mean(&merged.contribution).unwrap_or(0.0);
        merged.correlation = rating_correlation(&merged.contribution, &ratings);
        out.push(merged);
    }
    SalientGenreSet { genres: out, thresholds: thresholds.clone() }
}

/// Per-session share of utterances inside a merged genre's value range.
pub fn range_contributions(table: &FeatureTable, genre: &SalientGenre) -> Vec<f64> {
    let mut counts = vec![0usize; table.sessions.len()];
    for u in &table.utterances {
        if genre.contains(&u.features) {
            counts[u.session] += 1;
        }
    }
    ratios(table, &counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub thresholds: Thresholds,
    /// Smallest K of the sweep.
    pub k_min: usize,
    pub seed: u64,
    pub kmeans: KMeansConfig,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            k_min: 2,
            seed: 0,
            kmeans: KMeansConfig { record_history: false, ..KMeansConfig::default() },
        }
    }
}

impl MiningConfig {
    pub fn trial_count(&self) -> usize {
        let ks = (self.thresholds.n_max + 1).saturating_sub(self.k_min);
        enumerate_combos().len() * ks
    }
}

/// Runs independent trials; implementations may run them in parallel but must
/// return results in input order.
pub trait TrialExecutor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync;
}

/// Runs trials one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialExecutor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        items.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCombo {
    pub combo: FeatureCombo,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningOutcome {
    pub salient: SalientGenreSet,
    /// Every cluster genre of every trial, in trial order.
    pub candidates: Vec<UtteranceGenre>,
    pub quantizers: Vec<QuantizerSpec>,
    pub skipped: Vec<SkippedCombo>,
    pub trials: usize,
}

struct ComboData {
    index: usize,
    spec: QuantizerSpec,
    points: Vec<f64>,
    codes: Vec<usize>,
}

struct Trial<'a> {
    combo: &'a ComboData,
    k: usize,
}

pub fn mine(table: &FeatureTable, config: &MiningConfig) -> Result<MiningOutcome> {
    mine_with(table, config, &Sequential)
}

/// The full sweep: every combination, `K = k_min ..= N`, one genre per cluster,
/// then screening and merging in canonical trial order.
pub fn mine_with<E: TrialExecutor>(table: &FeatureTable, config: &MiningConfig, exec: &E) -> Result<MiningOutcome> {
    let th = &config.thresholds;
    if th.q < 2 {
        return Err(Error::Invalid(alloc::format!("Q must be at least 2, got {}", th.q)));
    }
    if table.utterances.is_empty() {
        return Err(Error::NoAnalyzableUtterances);
    }
    let mut combos = Vec::new();
    let mut skipped = Vec::new();
    for (index, combo) in enumerate_combos().into_iter().enumerate() {
        match fit_quantizer_iter(table.features(), &combo, th.q) {
            Ok(spec) => {
                let dim = combo.dim();
                let mut points = Vec::with_capacity(table.utterances.len() * dim);
                for f in table.features() {
                    points.extend(combo.features.iter().map(|&feat| f.get(feat)));
                }
                let codes = table.features().map(|f| spec.code_of(f)).collect();
                combos.push(ComboData { index, spec, points, codes });
            }
            Err(e) => skipped.push(SkippedCombo { combo, reason: alloc::format!("{e}") }),
        }
    }

    let n = table.utterances.len();
    let trials: Vec<Trial<'_>> = combos
        .iter()
        .flat_map(|c| (config.k_min.max(1)..=th.n_max.min(n)).map(move |k| Trial { combo: c, k }))
        .collect();
    let ratings = table.ratings();
    let results = exec.map(&trials, |t| run_trial(table, &ratings, t, config));
    let mut candidates = Vec::new();
    for r in results {
        candidates.extend(r?);
    }
    let salient = select_salient(&candidates, th, table);
    Ok(MiningOutcome {
        salient,
        candidates,
        quantizers: combos.iter().map(|c| c.spec.clone()).collect(),
        skipped,
        trials: trials.len(),
    })
}

fn run_trial(table: &FeatureTable, ratings: &[f64], t: &Trial<'_>, config: &MiningConfig) -> Result<Vec<UtteranceGenre>> {
    let data = t.combo;
    let spec = &data.spec;
    let seed = derive_seed(config.seed, &[data.index as u64, t.k as u64]);
    let clustering = kmeans(&data.points, spec.combo.dim(), t.k, seed, &config.kmeans)?;
    let n_patterns = spec.pattern_count();
    let n_sessions = table.sessions.len();
    let mut out = Vec::with_capacity(t.k);
    for (cluster, members) in clustering.members().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let member_codes: Vec<usize> = members.iter().map(|&i| data.codes[i]).collect();
        let (code, count) = dominant(&member_codes, n_patterns);
        let mut session_counts = vec![0usize; n_sessions];
        let carriers = members.iter().zip(&member_codes).filter(|(_, &c)| c == code).map(|(&i, _)| i);
        for i in carriers.clone() {
            session_counts[table.utterances[i].session] += 1;
        }
        let value_range = ranges(carriers.map(|i| &table.utterances[i].features), &spec.combo.features);
        let contribution = ratios(table, &session_counts);
        let mean_contribution = stats::mean(&contribution).unwrap_or(0.0);
        let correlation = rating_correlation(&contribution, ratings);
        out.push(UtteranceGenre {
            combo: spec.combo.clone(),
            q: spec.q,
            pattern: FeaturePattern::from_code(code, spec.combo.dim(), spec.q),
            source: GenreSource { combo_index: data.index, k: t.k, cluster, seed },
            cluster_size: members.len(),
            pattern_count: count,
            occurrence_ratio: count as f64 / members.len() as f64,
            contribution,
            mean_contribution,
            correlation,
            value_range,
        });
    }
    Ok(out)
}
