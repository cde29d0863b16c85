//! Pipeline configuration: defaults, a `key = value` file, then flags.

use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use uttgenre_core::aligner::AlignConfig;
use uttgenre_core::classifier::{CvConfig, CvMode, FoldsBy, SvmConfig};
use uttgenre_core::corpus::IngestionConfig;
use uttgenre_core::genre::{MiningConfig, Thresholds};
use uttgenre_core::kmeans::KMeansConfig;

use crate::error::{Error, Result};

/// Every setting that can change an artifact. Output location and thread
/// count are kept outside so they never reach the hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub q: usize,
    pub n_max: usize,
    pub rf_min: f64,
    pub rg_min: f64,
    pub pv_max: f64,
    pub seed: u64,
    pub cv_mode: CvMode,
    pub folds_by: FoldsBy,
    pub folds: usize,
    pub high_cutoff: f64,
    pub low_cutoff: f64,
    pub min_duration_s: f64,
    pub a_min: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub svm_c: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let th = Thresholds::default();
        let ingest = IngestionConfig::default();
        let km = KMeansConfig::default();
        Self {
            q: th.q,
            n_max: th.n_max,
            rf_min: th.rf_min,
            rg_min: th.rg_min,
            pv_max: th.pv_max,
            seed: 0,
            cv_mode: CvMode::Faithful,
            folds_by: FoldsBy::Session,
            folds: 5,
            high_cutoff: ingest.high_cutoff,
            low_cutoff: ingest.low_cutoff,
            min_duration_s: ingest.min_duration_s,
            a_min: AlignConfig::default().a_min,
            restarts: km.restarts,
            max_iter: km.max_iter,
            svm_c: SvmConfig::default().c,
        }
    }
}

/// Keys accepted in a config file but not part of [`PipelineConfig`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSettings {
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

pub fn parse_cv_mode(value: &str) -> Result<CvMode> {
    match value {
        "faithful" => Ok(CvMode::Faithful),
        "nested" => Ok(CvMode::Nested),
        _ => Err(Error::Config(format!("cv_mode must be faithful or nested, got {value:?}"))),
    }
}

pub fn parse_folds_by(value: &str) -> Result<FoldsBy> {
    match value {
        "session" => Ok(FoldsBy::Session),
        "therapist" => Ok(FoldsBy::Therapist),
        _ => Err(Error::Config(format!("folds_by must be session or therapist, got {value:?}"))),
    }
}

impl PipelineConfig {
    /// Sets one key; `-` and `_` are interchangeable in names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.replace('-', "_").as_str() {
            "q" => self.q = parse(key, value)?,
            "n_max" | "n" => self.n_max = parse(key, value)?,
            "rf_min" => self.rf_min = parse(key, value)?,
            "rg_min" => self.rg_min = parse(key, value)?,
            "pv_max" => self.pv_max = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "cv_mode" => self.cv_mode = parse_cv_mode(value)?,
            "folds_by" => self.folds_by = parse_folds_by(value)?,
            "folds" => self.folds = parse(key, value)?,
            "high_cutoff" => self.high_cutoff = parse(key, value)?,
            "low_cutoff" => self.low_cutoff = parse(key, value)?,
            "min_duration_s" => self.min_duration_s = parse(key, value)?,
            "a_min" => self.a_min = parse(key, value)?,
            "restarts" => self.restarts = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "svm_c" | "c" => self.svm_c = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file. Lines are `key = value`; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str, run: &mut RunSettings) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            let result = match k.replace('-', "_").as_str() {
                "out_dir" => {
                    run.out_dir = Some(PathBuf::from(v));
                    Ok(())
                }
                "jobs" => parse(k, v).map(|j| run.jobs = Some(j)),
                _ => self.set(k, v),
            };
            result.map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.q < 2 {
            return bad(format!("q = {} must be at least 2", self.q));
        }
        if self.n_max < 2 {
            return bad(format!("n_max = {} must be at least 2", self.n_max));
        }
        for (name, v) in [("rf_min", self.rf_min), ("rg_min", self.rg_min)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        if !(self.pv_max > 0.0 && self.pv_max <= 1.0) {
            return bad(format!("pv_max = {} must lie in (0, 1]", self.pv_max));
        }
        if !(self.low_cutoff < self.high_cutoff) {
            return bad(format!("low_cutoff {} must be below high_cutoff {}", self.low_cutoff, self.high_cutoff));
        }
        if !(self.min_duration_s >= 0.0) {
            return bad(format!("min_duration_s = {} is negative", self.min_duration_s));
        }
        if self.folds < 2 {
            return bad(format!("folds = {} must be at least 2", self.folds));
        }
        if self.a_min == 0 || self.restarts == 0 || self.max_iter == 0 {
            return bad("a_min, restarts and max_iter must be positive".into());
        }
        if !(self.svm_c > 0.0) {
            return bad(format!("svm_c = {} must be positive", self.svm_c));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds { n_max: self.n_max, rf_min: self.rf_min, rg_min: self.rg_min, pv_max: self.pv_max, q: self.q }
    }

    pub fn mining(&self) -> MiningConfig {
        let base = MiningConfig::default();
        MiningConfig {
            thresholds: self.thresholds(),
            seed: self.seed,
            kmeans: KMeansConfig { restarts: self.restarts, max_iter: self.max_iter, ..base.kmeans },
            ..base
        }
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            mode: self.cv_mode,
            folds_by: self.folds_by,
            seed: self.seed,
            mining: self.mining(),
            svm: SvmConfig { c: self.svm_c, ..SvmConfig::default() },
        }
    }

    pub fn ingestion(&self) -> IngestionConfig {
        IngestionConfig {
            min_duration_s: self.min_duration_s,
            high_cutoff: self.high_cutoff,
            low_cutoff: self.low_cutoff,
            ..IngestionConfig::default()
        }
    }

    pub fn align(&self) -> AlignConfig {
        AlignConfig { a_min: self.a_min, ..AlignConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_core() {
        let c = PipelineConfig::default();
        assert_eq!((c.q, c.n_max, c.rf_min, c.rg_min, c.pv_max), (3, 20, 0.5, 0.05, 0.05));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn file_then_override() {
        let mut c = PipelineConfig::default();
        let mut run = RunSettings::default();
        c.apply_file_text("# comment\nq = 4\nrf-min=0.6 # trailing\n\ncv_mode = nested\nout_dir = out\njobs = 2\n", &mut run)
            .unwrap();
        assert_eq!((c.q, c.rf_min, c.cv_mode), (4, 0.6, CvMode::Nested));
        assert_eq!(run, RunSettings { out_dir: Some("out".into()), jobs: Some(2) });
        c.set("q", "5").unwrap();
        assert_eq!(c.q, 5);
    }

    #[test]
    fn bad_lines_and_conflicts() {
        let mut c = PipelineConfig::default();
        let mut run = RunSettings::default();
        assert!(matches!(c.apply_file_text("q 3", &mut run), Err(Error::Config(m)) if m.starts_with("line 1")));
        assert!(c.apply_file_text("colour = red", &mut run).is_err());
        assert!(c.apply_file_text("q = three", &mut run).is_err());
        c.low_cutoff = 50.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_settings() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
