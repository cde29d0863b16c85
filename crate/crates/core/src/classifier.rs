//! Session-level empathy classification.
//!
//! Sessions are described either by the contribution ratios of the salient
//! genres or, for the baseline, by the occurrence ratios of individually
//! correlated feature patterns. A linear SVM separates high from low sessions
//! and is scored by k-fold cross-validation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::features::FeatureTable;
use crate::genre::{
    enumerate_combos, mine_with, range_contributions, rating_correlation, FeatureCombo, MiningConfig,
    SalientGenreSet, TrialExecutor,
};
use crate::quantizer::{fit_quantizer_iter, FeaturePattern, QuantizerSpec};
use crate::rng::{derive_seed, seeded};
use crate::stats::{self, CorrelationResult};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFeatureVector {
    pub session_id: String,
    pub values: Vec<f64>,
    pub label: Label,
}

/// One value per salient genre: the share of the session's utterances inside
/// the genre's aggregated value range.
pub fn session_features(table: &FeatureTable, genres: &SalientGenreSet) -> Result<Vec<SessionFeatureVector>> {
    if genres.genres.is_empty() {
        return Err(Error::NoGenres);
    }
    let columns: Vec<Vec<f64>> = genres.genres.iter().map(|g| range_contributions(table, g)).collect();
    Ok(assemble(table, &columns))
}

fn assemble(table: &FeatureTable, columns: &[Vec<f64>]) -> Vec<SessionFeatureVector> {
    table
        .sessions
        .iter()
        .enumerate()
        .map(|(i, s)| SessionFeatureVector {
            session_id: s.session_id.clone(),
            values: columns.iter().map(|c| c[i]).collect(),
            label: s.label,
        })
        .collect()
}

/// A feature pattern whose per-session occurrence ratio correlates with the ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternFeature {
    pub combo_index: usize,
    pub combo: FeatureCombo,
    pub pattern: FeaturePattern,
    pub mean_occurrence: f64,
    pub correlation: CorrelationResult,
}

impl PatternFeature {
    pub fn describe(&self, q: usize) -> String {
        self.pattern.describe(&self.combo, q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub q: usize,
    pub pv_max: f64,
    /// Ordered by combination index, then pattern code.
    pub patterns: Vec<PatternFeature>,
    /// Quantizers of every combination that could be fitted, by combination index.
    pub quantizers: BTreeMap<usize, QuantizerSpec>,
}

/// Per-session occurrence ratios of every pattern of one quantizer, indexed by
/// pattern code, then session.
fn occurrence_table(table: &FeatureTable, spec: &QuantizerSpec) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0usize; table.sessions.len()]; spec.pattern_count()];
    for u in &table.utterances {
        counts[spec.code_of(&u.features)][u.session] += 1;
    }
    counts
        .into_iter()
        .map(|row| row.iter().zip(&table.sessions).map(|(&c, s)| c as f64 / s.utterance_count as f64).collect())
        .collect()
}

/// Baseline features: every pattern of every combination whose session-wise
/// occurrence ratio has Pearson `p < pv_max` against the ratings. Patterns
/// with a constant ratio have no defined correlation and are left out.
pub fn mine_prominent_patterns(table: &FeatureTable, q: usize, pv_max: f64) -> Result<PatternSet> {
    if q < 2 {
        return Err(Error::Invalid(format!("Q must be at least 2, got {q}")));
    }
    let ratings = table.ratings();
    let mut quantizers = BTreeMap::new();
    let mut patterns = Vec::new();
    for (index, combo) in enumerate_combos().into_iter().enumerate() {
        let Ok(spec) = fit_quantizer_iter(table.features(), &combo, q) else {
            continue;
        };
        for (code, ratios) in occurrence_table(table, &spec).into_iter().enumerate() {
            let Some(correlation) = rating_correlation(&ratios, &ratings) else {
                continue;
            };
            if correlation.p_value < pv_max {
                patterns.push(PatternFeature {
                    combo_index: index,
                    combo: combo.clone(),
                    pattern: FeaturePattern::from_code(code, combo.dim(), q),
                    mean_occurrence: stats::mean(&ratios).unwrap_or(0.0),
                    correlation,
                });
            }
        }
        quantizers.insert(index, spec);
    }
    Ok(PatternSet { q, pv_max, patterns, quantizers })
}

/// Baseline session vectors using the quantizers stored in `set`.
pub fn pattern_features(table: &FeatureTable, set: &PatternSet) -> Vec<SessionFeatureVector> {
    let mut cache: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    let mut columns = Vec::with_capacity(set.patterns.len());
    for p in &set.patterns {
        let occ = cache.entry(p.combo_index).or_insert_with(|| occurrence_table(table, &set.quantizers[&p.combo_index]));
        columns.push(occ[p.pattern.code(set.q)].clone());
    }
    assemble(table, &columns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub standardize: bool,
    pub max_epochs: usize,
    /// Stop when the projected-gradient spread of an epoch falls below this.
    pub tol: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, standardize: true, max_epochs: 2000, tol: 1e-6 }
    }
}

/// `f(x) = w . ((x - mean) / std) + b`, positive for high empathy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub epochs: usize,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.weights)
            .zip(self.means.iter().zip(&self.stds))
            .map(|((&v, &w), (&m, &s))| w * (v - m) / s)
            .sum::<f64>()
            + self.bias
    }

    /// Ties go to high.
    pub fn predict(&self, x: &[f64]) -> Label {
        if self.decision(x) >= 0.0 {
            Label::High
        } else {
            Label::Low
        }
    }
}

fn sign(label: Label) -> Result<f64> {
    match label {
        Label::High => Ok(1.0),
        Label::Low => Ok(-1.0),
        Label::Excluded => Err(Error::Invalid("excluded session passed to the classifier".into())),
    }
}

/// L1-loss linear SVM solved by dual coordinate descent in a fixed cyclic
/// order. The bias is the weight of a constant unit feature, so it is
/// regularized along with the other weights.
pub fn train_svm(x: &[Vec<f64>], y: &[Label], config: &SvmConfig) -> Result<LinearModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let ys: Vec<f64> = y.iter().map(|&l| sign(l)).collect::<Result<_>>()?;
    let pos = ys.iter().filter(|&&s| s > 0.0).count();
    if pos == 0 || pos == ys.len() {
        return Err(Error::SingleClass);
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Invalid("ragged feature matrix".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classifier features"));
    }
    let (means, stds) = if config.standardize {
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        stats::column_moments(&flat, dim)
    } else {
        (vec![0.0; dim], vec![1.0; dim])
    };
    // Rows with a trailing 1 for the bias.
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let mut z: Vec<f64> = r.iter().zip(means.iter().zip(&stds)).map(|(&v, (&m, &s))| (v - m) / s).collect();
            z.push(1.0);
            z
        })
        .collect();
    let qii: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let c = config.c;
    let mut alpha = vec![0.0; rows.len()];
    let mut w = vec![0.0; dim + 1];
    let mut epochs = 0;
    while epochs < config.max_epochs {
        epochs += 1;
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..rows.len() {
            let r = &rows[i];
            let g = ys[i] * dot(&w, r) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * ys[i];
                for (wj, &rj) in w.iter_mut().zip(r) {
                    *wj += step * rj;
                }
            }
        }
        if pg_max - pg_min < config.tol {
            break;
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    Ok(LinearModel { weights: w, bias, means, stds, epochs })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvMode {
    /// Genres and baseline patterns mined once on every session.
    Faithful,
    /// Mining repeated on each training fold.
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldsBy {
    Session,
    Therapist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Genre,
    PatternBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub mode: CvMode,
    pub folds_by: FoldsBy,
    pub seed: u64,
    pub mining: MiningConfig,
    pub svm: SvmConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            mode: CvMode::Faithful,
            folds_by: FoldsBy::Session,
            seed: 0,
            mining: MiningConfig::default(),
            svm: SvmConfig::default(),
        }
    }
}

/// Confusion counts with high as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_high: usize,
    pub false_high: usize,
    pub true_low: usize,
    pub false_low: usize,
}

impl Confusion {
    fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::High, Label::High) => self.true_high += 1,
            (Label::Low, Label::High) => self.false_high += 1,
            (Label::Low, Label::Low) => self.true_low += 1,
            _ => self.false_low += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: Method,
    pub mode: CvMode,
    pub folds_by: FoldsBy,
    pub seed: u64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Feature dimension used in each fold.
    pub fold_dimensions: Vec<usize>,
    pub confusion: Confusion,
    /// Folds whose feature set was empty and fell back to the training majority.
    pub majority_fallbacks: usize,
}

impl CvReport {
    /// Dimension shared by every fold, if any (always the case in faithful mode).
    pub fn dimension(&self) -> Option<usize> {
        let first = *self.fold_dimensions.first()?;
        self.fold_dimensions.iter().all(|&d| d == first).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub genre: CvReport,
    pub baseline: CvReport,
    /// Test-fold session indices.
    pub folds: Vec<Vec<usize>>,
}

/// Stratified folds: each class is shuffled and dealt round-robin, the deal
/// continuing across classes so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for (tag, class) in [Label::High, Label::Low].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut seeded(derive_seed(seed, &[tag as u64])));
        for i in idx {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// Folds that keep every therapist's sessions together: groups are shuffled,
/// then placed largest first into the currently smallest fold.
pub fn grouped_folds(groups: &[&str], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g).or_default().push(i);
    }
    let mut members: Vec<Vec<usize>> = by_group.into_values().collect();
    members.shuffle(&mut seeded(seed));
    // stable sort keeps the shuffled order among equal sizes
    members.sort_by_key(|m| core::cmp::Reverse(m.len()));
    let mut out = vec![Vec::new(); folds];
    for m in members {
        let target = (0..folds).min_by_key(|&f| (out[f].len(), f)).unwrap_or(0);
        out[target].extend(m);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

fn build_folds(table: &FeatureTable, config: &CvConfig) -> Result<Vec<Vec<usize>>> {
    if config.folds < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {}", config.folds)));
    }
    let labels: Vec<Label> = table.sessions.iter().map(|s| s.label).collect();
    for class in [Label::High, Label::Low] {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < config.folds {
            return Err(Error::TooFewSessions(format!("{n} {class:?} sessions for {} folds", config.folds)));
        }
    }
    if labels.contains(&Label::Excluded) {
        return Err(Error::Invalid("excluded sessions cannot be cross-validated".into()));
    }
    let seed = derive_seed(config.seed, &[0xF01D]);
    Ok(match config.folds_by {
        FoldsBy::Session => stratified_folds(&labels, config.folds, seed),
        FoldsBy::Therapist => {
            let groups: Vec<&str> = table.sessions.iter().map(|s| s.therapist_id.as_str()).collect();
            grouped_folds(&groups, config.folds, seed)
        }
    })
}

struct FoldScore {
    correct: usize,
    total: usize,
    dimension: usize,
    fallback: bool,
    confusion: Confusion,
}

/// Trains on `train` rows and scores `test` rows; an empty feature set or a
/// single-class training fold predicts the training majority (high on ties).
fn score_fold(
    train: &[SessionFeatureVector],
    test: &[SessionFeatureVector],
    dimension: usize,
    svm: &SvmConfig,
) -> Result<FoldScore> {
    let xs: Vec<Vec<f64>> = train.iter().map(|v| v.values.clone()).collect();
    let ys: Vec<Label> = train.iter().map(|v| v.label).collect();
    let highs = ys.iter().filter(|&&l| l == Label::High).count();
    let majority = if 2 * highs >= ys.len() { Label::High } else { Label::Low };
    let model = if dimension == 0 || highs == 0 || highs == ys.len() { None } else { Some(train_svm(&xs, &ys, svm)?) };
    let mut confusion = Confusion::default();
    let mut correct = 0;
    for v in test {
        let predicted = model.as_ref().map_or(majority, |m| m.predict(&v.values));
        confusion.record(v.label, predicted);
        correct += usize::from(predicted == v.label);
    }
    Ok(FoldScore { correct, total: test.len(), dimension, fallback: model.is_none(), confusion })
}

fn pick(vectors: &[SessionFeatureVector], idx: &[usize]) -> Vec<SessionFeatureVector> {
    idx.iter().map(|&i| vectors[i].clone()).collect()
}

fn genre_vectors(table: &FeatureTable, genres: &SalientGenreSet) -> Vec<SessionFeatureVector> {
    let columns: Vec<Vec<f64>> = genres.genres.iter().map(|g| range_contributions(table, g)).collect();
    assemble(table, &columns)
}

fn report(method: Method, config: &CvConfig, scores: Vec<FoldScore>) -> CvReport {
    let fold_accuracies: Vec<f64> = scores.iter().map(|s| s.correct as f64 / s.total.max(1) as f64).collect();
    let mut confusion = Confusion::default();
    for s in &scores {
        confusion.true_high += s.confusion.true_high;
        confusion.false_high += s.confusion.false_high;
        confusion.true_low += s.confusion.true_low;
        confusion.false_low += s.confusion.false_low;
    }
    CvReport {
        method,
        mode: config.mode,
        folds_by: config.folds_by,
        seed: config.seed,
        mean_accuracy: stats::mean(&fold_accuracies).unwrap_or(0.0),
        fold_accuracies,
        fold_dimensions: scores.iter().map(|s| s.dimension).collect(),
        confusion,
        majority_fallbacks: scores.iter().filter(|s| s.fallback).count(),
    }
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    for &i in test {
        in_test[i] = true;
    }
    (0..n).filter(|&i| !in_test[i]).collect()
}

/// Faithful-mode cross-validation with genres and baseline patterns already
/// mined on every session of `table`.
pub fn cross_validate_mined(
    table: &FeatureTable,
    genres: &SalientGenreSet,
    patterns: &PatternSet,
    config: &CvConfig,
) -> Result<CvOutcome> {
    let folds = build_folds(table, config)?;
    let gv = genre_vectors(table, genres);
    let pv = pattern_features(table, patterns);
    let n = table.sessions.len();
    let mut genre_scores = Vec::with_capacity(folds.len());
    let mut base_scores = Vec::with_capacity(folds.len());
    for test in &folds {
        let train = complement(n, test);
        genre_scores.push(score_fold(&pick(&gv, &train), &pick(&gv, test), genres.genres.len(), &config.svm)?);
        base_scores.push(score_fold(&pick(&pv, &train), &pick(&pv, test), patterns.patterns.len(), &config.svm)?);
    }
    let config = CvConfig { mode: CvMode::Faithful, ..config.clone() };
    Ok(CvOutcome {
        genre: report(Method::Genre, &config, genre_scores),
        baseline: report(Method::PatternBaseline, &config, base_scores),
        folds,
    })
}

/// Cross-validates both the genre method and the pattern baseline in the
/// configured mode.
pub fn cross_validate<E: TrialExecutor>(table: &FeatureTable, config: &CvConfig, exec: &E) -> Result<CvOutcome> {
    let q = config.mining.thresholds.q;
    let pv_max = config.mining.thresholds.pv_max;
    if config.mode == CvMode::Faithful {
        build_folds(table, config)?;
        let mined = mine_with(table, &config.mining, exec)?;
        let patterns = mine_prominent_patterns(table, q, pv_max)?;
        return cross_validate_mined(table, &mined.salient, &patterns, config);
    }
    let folds = build_folds(table, config)?;
    let n = table.sessions.len();
    let mut genre_scores = Vec::with_capacity(folds.len());
    let mut base_scores = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        let train_idx = complement(n, test);
        let train = table.subset(&train_idx);
        let held_out = table.subset(test);
        let mining = MiningConfig { seed: derive_seed(config.mining.seed, &[f as u64]), ..config.mining.clone() };
        let mined = mine_with(&train, &mining, exec)?;
        let genres = &mined.salient;
        genre_scores.push(score_fold(
            &genre_vectors(&train, genres),
            &genre_vectors(&held_out, genres),
            genres.genres.len(),
            &config.svm,
        )?);
        let patterns = mine_prominent_patterns(&train, q, pv_max)?;
        base_scores.push(score_fold(
            &pattern_features(&train, &patterns),
            &pattern_features(&held_out, &patterns),
            patterns.patterns.len(),
            &config.svm,
        )?);
    }
    Ok(CvOutcome {
        genre: report(Method::Genre, config, genre_scores),
        baseline: report(Method::PatternBaseline, config, base_scores),
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.05;
            x.push(vec![2.0 + t, 1.0 - t]);
            y.push(Label::High);
            x.push(vec![-2.0 - t, -1.0 + t]);
            y.push(Label::Low);
        }
        (x, y)
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = blobs();
        let m = train_svm(&x, &y, &SvmConfig::default()).unwrap();
        assert!(x.iter().zip(&y).all(|(r, &l)| m.predict(r) == l));
    }

    #[test]
    fn identical_rows_predict_majority() {
        let x = vec![vec![0.3, 0.3]; 7];
        let y = [Label::Low, Label::Low, Label::Low, Label::Low, Label::High, Label::High, Label::High];
        let m = train_svm(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(m.predict(&[0.3, 0.3]), Label::Low);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(train_svm(&x, &[Label::High, Label::High], &SvmConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn stratified_partition() {
        let labels: Vec<Label> = (0..118).map(|i| if i < 61 { Label::High } else { Label::Low }).collect();
        let folds = stratified_folds(&labels, 5, 3);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..118).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.len() == 23 || f.len() == 24);
            let highs = f.iter().filter(|&&i| labels[i] == Label::High).count();
            assert!((12..=13).contains(&highs));
        }
    }

    #[test]
    fn grouped_partition_keeps_therapists_together() {
        let groups: Vec<String> = (0..40).map(|i| format!("t{}", i % 13)).collect();
        let refs: Vec<&str> = groups.iter().map(String::as_str).collect();
        let folds = grouped_folds(&refs, 5, 1);
        for f in &folds {
            for other in &folds {
                if core::ptr::eq(f, other) {
                    continue;
                }
                assert!(f.iter().all(|&i| other.iter().all(|&j| refs[i] != refs[j])));
            }
        }
        assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), 40);
    }
}
