//! Seeded synthetic corpora with planted utterance genres, and synthetic
//! transcript/hypothesis pairs for the aligner.
//!
//! A plant fixes one mean feature (`d`, `p_mu` or `i_mu`) of a share of each
//! session's utterances to a band of normalized values. The share is drawn
//! per session with a target correlation to the rating. Frame tracks are
//! built so that the normalized value of every planted utterance is exact.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aligner::{ReferenceTranscript, ReferenceTurn, SyllableSeq, UtteranceSpan};
use crate::corpus::{Corpus, FrameTrack, IngestionConfig, Label, SessionInfo, Speaker, Utterance, DEFAULT_HOP_S};
use crate::features::Feature;
use crate::genre::enumerate_combos;
use crate::quantizer::FeaturePattern;
use crate::rng::{derive_seed, normal, seeded, standard_normal, uniform, StdRng};
use crate::stats::{self, pearson};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    High,
}

/// What the planted share is correlated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// The standardized rating.
    Rating,
    /// `+1` for high sessions, `-1` for low ones.
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    /// One of `d`, `p_mu`, `i_mu`.
    pub feature: Feature,
    pub level: Level,
    /// Normalized values of planted utterances are uniform in `center ± half_width`.
    pub center: f64,
    pub half_width: f64,
    pub rho_true: f64,
    /// Mean share of planted utterances per session.
    pub base_contribution: f64,
    /// Standard deviation of the share across sessions.
    pub spread: f64,
    pub coupling: Coupling,
}

impl Plant {
    /// Combination index and pattern of this plant at `q` levels.
    pub fn key(&self, q: usize) -> (usize, FeaturePattern) {
        let index = enumerate_combos()
            .iter()
            .position(|c| c.features == [self.feature])
            .expect("single mean feature combination");
        let bin = match self.level {
            Level::Low => 0,
            Level::High => (q - 1) as u8,
        };
        (index, FeaturePattern::new(vec![bin]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingModel {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub high_sessions: usize,
    pub low_sessions: usize,
    pub high_rating: RatingModel,
    pub low_rating: RatingModel,
    pub therapists: usize,
    pub utterances_mean: f64,
    pub utterances_sd: f64,
    pub min_utterances: usize,
    /// Mean of the (lognormal) utterance duration.
    pub duration_mean_s: f64,
    pub duration_log_sd: f64,
    pub chars_per_s: f64,
    pub chars_per_s_sd: f64,
    pub hop_s: f64,
    /// Relative spread of the background mean features around the session level.
    pub background_sd: f64,
    /// Per-session multiplier of `background_sd`, uniform in `1 ± background_sd_jitter`.
    pub background_sd_jitter: f64,
    pub voiced_min: f64,
    pub voiced_max: f64,
    pub plants: Vec<Plant>,
}

impl PlantSpec {
    /// 118 sessions at the scale of the reference corpus with one genre, low
    /// `i_mu`, planted at `rho_true = -0.4`.
    ///
    /// Planted utterances pull the session normalizer, which moves every
    /// background value by an amount that follows the share. The spread is
    /// kept tiny so that drift stays below sampling noise; the correlation
    /// of the share with the rating does not depend on its scale.
    pub fn standard() -> Self {
        Self {
            high_sessions: 61,
            low_sessions: 57,
            high_rating: RatingModel { mean: 46.34, sd: 3.58, min: 42.0, max: 56.5 },
            low_rating: RatingModel { mean: 30.40, sd: 4.79, min: 18.0, max: 36.0 },
            therapists: 39,
            utterances_mean: 211.0,
            utterances_sd: 40.0,
            min_utterances: 40,
            duration_mean_s: 3.62,
            duration_log_sd: 0.6,
            chars_per_s: 4.7,
            chars_per_s_sd: 0.6,
            hop_s: DEFAULT_HOP_S,
            background_sd: 0.06,
            background_sd_jitter: 0.0,
            voiced_min: 0.6,
            voiced_max: 0.9,
            plants: vec![Plant {
                feature: Feature::IntensityMean,
                level: Level::Low,
                center: 0.65,
                half_width: 0.003,
                rho_true: -0.4,
                base_contribution: 0.11,
                spread: 0.001,
                coupling: Coupling::Rating,
            }],
        }
    }

    /// The standard spec with the planted share independent of the rating.
    pub fn null() -> Self {
        let mut s = Self::standard();
        for p in &mut s.plants {
            p.rho_true = 0.0;
        }
        s
    }

    /// The planted share is a deterministic function of the label.
    pub fn separable() -> Self {
        let mut s = Self::standard();
        for p in &mut s.plants {
            p.rho_true = -1.0;
            p.spread = 0.03;
            p.coupling = Coupling::Label;
        }
        s
    }

    pub fn sessions(&self) -> usize {
        self.high_sessions + self.low_sessions
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        if self.sessions() == 0 {
            return bad("no sessions".into());
        }
        if self.therapists == 0 {
            return bad("no therapists".into());
        }
        if !(self.hop_s > 0.0) {
            return bad(format!("hop {} is not positive", self.hop_s));
        }
        if !(0.0..1.0).contains(&self.background_sd_jitter) || !(self.background_sd >= 0.0) {
            return bad("background spread must be non-negative with jitter in [0, 1)".into());
        }
        if !(0.0 < self.voiced_min && self.voiced_min <= self.voiced_max && self.voiced_max <= 1.0) {
            return bad("voiced fraction must lie in (0, 1]".into());
        }
        for r in [&self.high_rating, &self.low_rating] {
            if !(crate::corpus::RATING_MIN <= r.min && r.min <= r.max && r.max <= crate::corpus::RATING_MAX) {
                return bad(format!("rating range [{}, {}] outside the scale", r.min, r.max));
            }
        }
        let mut features = Vec::new();
        let mut total_share = 0.0;
        for p in &self.plants {
            if !matches!(p.feature, Feature::Duration | Feature::PitchMean | Feature::IntensityMean) {
                return bad(format!("cannot plant {}", p.feature));
            }
            if features.contains(&p.feature) {
                return bad(format!("{} planted twice", p.feature));
            }
            features.push(p.feature);
            if !(-1.0..=1.0).contains(&p.rho_true) {
                return bad(format!("rho_true {} outside [-1, 1]", p.rho_true));
            }
            if p.coupling == Coupling::Rating && p.rho_true.abs() >= 1.0 {
                return bad("rating-coupled rho_true must lie in (-1, 1)".into());
            }
            if !(p.center - p.half_width > 0.0 && p.half_width >= 0.0) {
                return bad(format!("planted band {} ± {} is not positive", p.center, p.half_width));
            }
            let (lo, hi) = (p.base_contribution - 3.0 * p.spread, p.base_contribution + 3.0 * p.spread);
            if lo < 0.0 || hi > 1.0 || p.spread < 0.0 {
                return bad(format!("share {} ± 3 x {} escapes [0, 1]", p.base_contribution, p.spread));
            }
            total_share += hi;
        }
        if total_share > 1.0 {
            return bad("planted shares can exceed a whole session".into());
        }
        Ok(())
    }
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantTruth {
    pub plant: Plant,
    pub combo_index: usize,
    /// Planted utterances per session.
    pub counts: Vec<usize>,
    /// `counts / utterances` per session.
    pub ratios: Vec<f64>,
    /// Correlation of `ratios` with the ratings.
    pub achieved_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub session_ids: Vec<String>,
    pub ratings: Vec<f64>,
    pub labels: Vec<Label>,
    pub utterances: Vec<usize>,
    pub plants: Vec<PlantTruth>,
}

/// Sorted symmetric sample of `n` values with population mean `mu`, standard
/// deviation `sd` and interquartile range `iqr` (linear interpolation).
///
/// Both neighbours of each quartile rank sit at `mu ∓ iqr/2`, the inner
/// values at `mu`, and the tails at `mu ∓ (iqr/2 + e)` with `e` solved from
/// the variance.
pub fn exact_sample(n: usize, mu: f64, sd: f64, iqr: f64) -> Result<Vec<f64>> {
    if n < 5 {
        return Err(Error::InfeasibleSpec(format!("{n} frames cannot carry exact quartiles")));
    }
    let h = 0.5 * iqr;
    let r25 = 0.25 * (n - 1) as f64;
    let lo = libm::floor(r25) as usize;
    let hi = libm::ceil(r25) as usize;
    let quartile_slots = hi - lo + 1;
    let budget = n as f64 * sd * sd - 2.0 * quartile_slots as f64 * h * h;
    let tail = libm::sqrt(budget / (2.0 * lo as f64));
    if !(budget >= 0.0) || !(tail >= h) {
        return Err(Error::InfeasibleSpec(format!("sd {sd} too small for iqr {iqr} over {n} frames")));
    }
    let mut y = vec![0.0; n];
    for i in 0..lo {
        y[i] = -tail;
        y[n - 1 - i] = tail;
    }
    for i in lo..=hi {
        y[i] = -h;
        y[n - 1 - i] = h;
    }
    Ok(y.into_iter().map(|v| mu + v).collect())
}

struct Draft {
    duration: f64,
    chars: u32,
    frames: usize,
    voiced: usize,
    /// Target raw `p_mu`, `i_mu` before plant adjustment (relative units).
    rel_pitch: f64,
    rel_intensity: f64,
    pitch_cv: f64,
    pitch_iqr_ratio: f64,
    int_cv: f64,
    int_iqr_ratio: f64,
    /// Index into `spec.plants`, if planted.
    plant: Option<usize>,
    target: f64,
}

fn draw_rating(rng: &mut StdRng, m: &RatingModel) -> f64 {
    normal(rng, m.mean, m.sd).clamp(m.min, m.max)
}

fn lognormal_duration(rng: &mut StdRng, spec: &PlantSpec) -> f64 {
    let s = spec.duration_log_sd;
    let mu = libm::log(spec.duration_mean_s) - 0.5 * s * s;
    loop {
        let d = libm::exp(mu + s * standard_normal(rng));
        if d >= 0.5 {
            return d;
        }
    }
}

/// Session shares `base + spread * (rho z + sqrt(1 - rho^2) e)`, clamped to `[0, 1]`.
fn draw_shares(rng: &mut StdRng, plant: &Plant, z: &[f64]) -> Vec<f64> {
    let rho = plant.rho_true;
    let rest = libm::sqrt((1.0 - rho * rho).max(0.0));
    z.iter()
        .map(|&zi| {
            let e = standard_normal(rng);
            (plant.base_contribution + plant.spread * (rho * zi + rest * e)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Generates a corpus of therapist utterances and its ground truth.
pub fn generate(spec: &PlantSpec, seed: u64) -> Result<(Corpus, GroundTruth)> {
    spec.check()?;
    let n_sessions = spec.sessions();
    let mut rng = seeded(derive_seed(seed, &[0x5E55]));

    let mut labels: Vec<Label> =
        (0..n_sessions).map(|i| if i < spec.high_sessions { Label::High } else { Label::Low }).collect();
    labels.shuffle(&mut rng);
    let ratings: Vec<f64> = labels
        .iter()
        .map(|l| match l {
            Label::High => draw_rating(&mut rng, &spec.high_rating),
            _ => draw_rating(&mut rng, &spec.low_rating),
        })
        .collect();
    let mut therapist_of: Vec<usize> = (0..n_sessions).map(|i| i % spec.therapists).collect();
    therapist_of.shuffle(&mut rng);
    let therapist_pitch: Vec<f64> = (0..spec.therapists).map(|_| uniform(&mut rng, 110.0, 240.0)).collect();
    let therapist_intensity: Vec<f64> = (0..spec.therapists).map(|_| uniform(&mut rng, 45.0, 75.0)).collect();

    let z: Vec<f64> = {
        let m = stats::mean(&ratings).unwrap_or(0.0);
        let sd = stats::std_dev(&ratings).filter(|s| *s > 0.0).unwrap_or(1.0);
        ratings.iter().map(|r| (r - m) / sd).collect()
    };
    let shares: Vec<Vec<f64>> = spec
        .plants
        .iter()
        .map(|p| match p.coupling {
            Coupling::Rating => draw_shares(&mut rng, p, &z),
            Coupling::Label => {
                let zl: Vec<f64> = labels.iter().map(|&l| if l == Label::High { 1.0 } else { -1.0 }).collect();
                draw_shares(&mut rng, p, &zl)
            }
        })
        .collect();

    let mut utterances = Vec::new();
    let mut sessions = Vec::with_capacity(n_sessions);
    let mut counts = vec![Vec::with_capacity(n_sessions); spec.plants.len()];
    let mut sizes = Vec::with_capacity(n_sessions);
    let mut session_ids = Vec::with_capacity(n_sessions);
    for s in 0..n_sessions {
        let sid = format!("S{:03}", s + 1);
        let tid = format!("T{:02}", therapist_of[s] + 1);
        let mut srng = seeded(derive_seed(seed, &[0x5E55, s as u64]));
        let n0 = libm::round(normal(&mut srng, spec.utterances_mean, spec.utterances_sd)).max(spec.min_utterances as f64)
            as usize;
        let plant_counts: Vec<usize> =
            shares.iter().map(|sh| libm::round(sh[s] * n0 as f64) as usize).collect();
        // Resize the session so the planted ratio matches the drawn share instead of carrying rounding noise.
        let share_sum: f64 = shares.iter().map(|sh| sh[s]).sum();
        let planted: usize = plant_counts.iter().sum();
        let n = if share_sum > 0.0 && planted > 0 {
            (libm::round(planted as f64 / share_sum) as usize).max(spec.min_utterances).max(planted)
        } else {
            n0
        };
        if plant_counts.iter().sum::<usize>() > n {
            return Err(Error::InfeasibleSpec(format!("session {sid} has more planted than total utterances")));
        }
        let built = build_session(
            spec,
            &mut srng,
            &sid,
            n,
            &plant_counts,
            therapist_pitch[therapist_of[s]],
            therapist_intensity[therapist_of[s]],
        )?;
        utterances.extend(built);
        for (k, &c) in plant_counts.iter().enumerate() {
            counts[k].push(c);
        }
        sizes.push(n);
        sessions.push(SessionInfo { session_id: sid.clone(), therapist_id: tid, empathy_rating: ratings[s] });
        session_ids.push(sid);
    }

    let corpus = Corpus::build(utterances, sessions, &IngestionConfig::default(), format!("synthetic seed={seed}"))?;
    let plants = spec
        .plants
        .iter()
        .zip(counts)
        .map(|(p, c)| {
            let ratios: Vec<f64> = c.iter().zip(&sizes).map(|(&k, &n)| k as f64 / n as f64).collect();
            PlantTruth {
                plant: p.clone(),
                combo_index: p.key(2).0,
                achieved_rho: pearson(&ratios, &ratings).ok().map(|r| r.rho),
                counts: c,
                ratios,
            }
        })
        .collect();
    let truth = GroundTruth { seed, session_ids, ratings, labels: corpus.sessions.iter().map(|s| s.label).collect(), utterances: sizes, plants };
    Ok((corpus, truth))
}

fn build_session(
    spec: &PlantSpec,
    rng: &mut StdRng,
    sid: &str,
    n: usize,
    plant_counts: &[usize],
    pitch_level: f64,
    intensity_level: f64,
) -> Result<Vec<Utterance>> {
    let mut assignment: Vec<Option<usize>> = Vec::with_capacity(n);
    for (k, &c) in plant_counts.iter().enumerate() {
        assignment.extend(core::iter::repeat_n(Some(k), c));
    }
    assignment.resize(n, None);
    assignment.shuffle(rng);

    let bg = spec.background_sd * uniform(rng, 1.0 - spec.background_sd_jitter, 1.0 + spec.background_sd_jitter);
    let mut drafts: Vec<Draft> = assignment
        .into_iter()
        .map(|plant| {
            let duration = lognormal_duration(rng, spec);
            let target = plant.map_or(0.0, |k| {
                let p = &spec.plants[k];
                uniform(rng, p.center - p.half_width, p.center + p.half_width)
            });
            Draft {
                duration,
                chars: 0,
                frames: 0,
                voiced: 0,
                rel_pitch: normal(rng, 1.0, bg).max(0.5),
                rel_intensity: normal(rng, 1.0, bg).max(0.5),
                pitch_cv: uniform(rng, 0.08, 0.2),
                pitch_iqr_ratio: uniform(rng, 1.0, 1.6),
                int_cv: uniform(rng, 0.1, 0.25),
                int_iqr_ratio: uniform(rng, 1.0, 1.6),
                plant,
                target,
            }
        })
        .collect();

    let planted_for = |f: Feature| spec.plants.iter().position(|p| p.feature == f);

    // Durations first: they fix the frame counts every pooled statistic is weighted by.
    if let Some(k) = planted_for(Feature::Duration) {
        let bg_sum: f64 = drafts.iter().filter(|d| d.plant != Some(k)).map(|d| d.duration).sum();
        let t_sum: f64 = drafts.iter().filter(|d| d.plant == Some(k)).map(|d| d.target).sum();
        let denom = n as f64 - t_sum;
        if !(denom > 0.0) || bg_sum <= 0.0 {
            return Err(Error::InfeasibleSpec(format!("duration plant leaves no background in {sid}")));
        }
        let level = bg_sum / denom;
        for d in drafts.iter_mut().filter(|d| d.plant == Some(k)) {
            d.duration = d.target * level;
        }
    }
    for d in &mut drafts {
        d.frames = (libm::round(d.duration / spec.hop_s) as usize).max(5);
        d.voiced = (libm::round(d.frames as f64 * uniform(rng, spec.voiced_min, spec.voiced_max)) as usize)
            .clamp(5, d.frames);
        let rate = normal(rng, spec.chars_per_s, spec.chars_per_s_sd).max(1.0);
        d.chars = (libm::round(rate * d.duration) as u32).max(1);
    }

    let mut pitch_mu: Vec<f64> = drafts.iter().map(|d| pitch_level * d.rel_pitch).collect();
    let mut int_mu: Vec<f64> = drafts.iter().map(|d| intensity_level * d.rel_intensity).collect();
    for (feature, mus, weight) in [
        (Feature::PitchMean, &mut pitch_mu, (|d: &Draft| d.voiced) as fn(&Draft) -> usize),
        (Feature::IntensityMean, &mut int_mu, |d: &Draft| d.frames),
    ] {
        let Some(k) = planted_for(feature) else { continue };
        let total: f64 = drafts.iter().map(|d| weight(d) as f64).sum();
        let mut bg_sum = 0.0;
        let mut t_sum = 0.0;
        for (d, &m) in drafts.iter().zip(mus.iter()) {
            if d.plant == Some(k) {
                t_sum += weight(d) as f64 * d.target;
            } else {
                bg_sum += weight(d) as f64 * m;
            }
        }
        let denom = total - t_sum;
        if !(denom > 0.0) || bg_sum <= 0.0 {
            return Err(Error::InfeasibleSpec(format!("{feature} plant leaves no background in {sid}")));
        }
        let level = bg_sum / denom;
        for (d, m) in drafts.iter().zip(mus.iter_mut()) {
            if d.plant == Some(k) {
                *m = d.target * level;
            }
        }
    }

    let mut out = Vec::with_capacity(n);
    for (i, d) in drafts.iter().enumerate() {
        let p_sd = pitch_mu[i] * d.pitch_cv;
        let mut voiced = exact_sample(d.voiced, pitch_mu[i], p_sd, p_sd * d.pitch_iqr_ratio)?;
        voiced.extend(core::iter::repeat_n(0.0, d.frames - d.voiced));
        voiced.shuffle(rng);
        let i_sd = int_mu[i] * d.int_cv;
        let mut intensity = exact_sample(d.frames, int_mu[i], i_sd, i_sd * d.int_iqr_ratio)?;
        intensity.shuffle(rng);
        if voiced.iter().any(|v| *v < 0.0) || intensity.iter().any(|v| *v < 0.0) {
            return Err(Error::InfeasibleSpec(format!("negative frame values in {sid}")));
        }
        out.push(Utterance {
            utterance_id: format!("{sid}-U{:04}", i + 1),
            session_id: sid.into(),
            speaker: Speaker::Therapist,
            duration_s: d.frames as f64 * spec.hop_s,
            char_count: d.chars,
            pitch: FrameTrack::new(spec.hop_s, voiced),
            intensity: FrameTrack::new(spec.hop_s, intensity),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSpec {
    pub n_turns: usize,
    pub vocab: usize,
    pub min_turn_syllables: usize,
    pub max_turn_syllables: usize,
    /// Probability that a reference syllable is corrupted.
    pub error_rate: f64,
    /// Relative weights of substitution, insertion and deletion errors.
    pub error_mix: [f64; 3],
    pub syllable_s: f64,
    pub turn_pause_s: f64,
    pub intra_pause_s: f64,
    /// Chance of a pause after each syllable inside a turn.
    pub intra_pause_prob: f64,
    /// Syllables each side of a planted pause must keep.
    pub min_piece_syllables: usize,
}

impl Default for TranscriptSpec {
    fn default() -> Self {
        Self {
            n_turns: 40,
            vocab: 400,
            min_turn_syllables: 10,
            max_turn_syllables: 40,
            error_rate: 0.1,
            error_mix: [1.0, 0.0, 0.0],
            syllable_s: 0.2,
            turn_pause_s: 1.0,
            intra_pause_s: 0.8,
            intra_pause_prob: 0.05,
            min_piece_syllables: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTurn {
    pub turn: usize,
    pub speaker: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Planned pause-delimited pieces of the turn.
    pub utterances: Vec<UtteranceSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSample {
    pub reference: ReferenceTranscript,
    pub hypothesis: SyllableSeq,
    pub truth: Vec<TruthTurn>,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl TranscriptSample {
    pub fn injected_errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Alternating therapist/client turns over a `s0 .. s{vocab-1}` vocabulary,
/// timed at a constant syllable rate, and a hypothesis corrupted at
/// `error_rate`.
pub fn generate_transcripts(spec: &TranscriptSpec, seed: u64) -> Result<TranscriptSample> {
    if !(0.0..1.0).contains(&spec.error_rate) {
        return Err(Error::Invalid(format!("error rate {} outside [0, 1)", spec.error_rate)));
    }
    if spec.vocab < 2 || spec.min_turn_syllables == 0 || spec.min_turn_syllables > spec.max_turn_syllables {
        return Err(Error::Invalid("transcript spec needs a vocabulary of 2 and non-empty turns".into()));
    }
    let mix_total: f64 = spec.error_mix.iter().sum();
    if !(mix_total > 0.0) || spec.error_mix.iter().any(|w| *w < 0.0) {
        return Err(Error::Invalid("error mix weights must be non-negative and not all zero".into()));
    }
    let mut rng = seeded(derive_seed(seed, &[0x7EC7]));
    let token = |i: usize| format!("s{i}");
    let mut reference = ReferenceTranscript::default();
    let mut ref_times = Vec::new();
    let mut truth = Vec::with_capacity(spec.n_turns);
    let mut t = 0.0;
    for turn in 0..spec.n_turns {
        if turn > 0 {
            t += spec.turn_pause_s;
        }
        let speaker = if turn % 2 == 0 { "therapist" } else { "client" };
        let len = rng.random_range(spec.min_turn_syllables..=spec.max_turn_syllables);
        let mut syllables = Vec::with_capacity(len);
        let start = t;
        let mut piece_start = t;
        let mut piece_len = 0;
        let mut pieces = Vec::new();
        for k in 0..len {
            syllables.push(token(rng.random_range(0..spec.vocab)));
            ref_times.push((t, t + spec.syllable_s));
            t += spec.syllable_s;
            piece_len += 1;
            let left = len - k - 1;
            if left >= spec.min_piece_syllables
                && piece_len >= spec.min_piece_syllables
                && rng.random::<f64>() < spec.intra_pause_prob
            {
                pieces.push(UtteranceSpan { start_s: piece_start, end_s: t });
                t += spec.intra_pause_s;
                piece_start = t;
                piece_len = 0;
            }
        }
        pieces.push(UtteranceSpan { start_s: piece_start, end_s: t });
        truth.push(TruthTurn { turn, speaker: speaker.into(), start_s: start, end_s: t, utterances: pieces });
        reference.turns.push(ReferenceTurn { speaker: speaker.into(), syllables });
    }

    let (flat, _) = reference.flatten();
    let mut symbols = Vec::with_capacity(flat.len());
    let mut times = Vec::with_capacity(flat.len());
    let (mut subs, mut ins, mut dels) = (0, 0, 0);
    for (sym, &(s, e)) in flat.symbols.iter().zip(&ref_times) {
        if rng.random::<f64>() >= spec.error_rate {
            symbols.push(sym.clone());
            times.push((s, e));
            continue;
        }
        let pick = rng.random::<f64>() * mix_total;
        if pick < spec.error_mix[0] {
            let mut other = token(rng.random_range(0..spec.vocab));
            while &other == sym {
                other = token(rng.random_range(0..spec.vocab));
            }
            symbols.push(other);
            times.push((s, e));
            subs += 1;
        } else if pick < spec.error_mix[0] + spec.error_mix[1] {
            let mid = 0.5 * (s + e);
            symbols.push(sym.clone());
            times.push((s, mid));
            symbols.push(token(rng.random_range(0..spec.vocab)));
            times.push((mid, e));
            ins += 1;
        } else {
            dels += 1;
        }
    }
    let hypothesis = SyllableSeq::timed(symbols, times)?;
    Ok(TranscriptSample { reference, hypothesis, truth, substitutions: subs, insertions: ins, deletions: dels })
}
