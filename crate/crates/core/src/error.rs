use alloc::string::String;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("constant input: correlation is undefined")]
    ConstantInput,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("utterance {utterance} refers to unknown session {session}")]
    DanglingSession { utterance: String, session: String },
    #[error("duplicate session id {0}")]
    DuplicateSession(String),
    #[error("non-positive frame hop {hop} in utterance {utterance}")]
    NonPositiveHop { utterance: String, hop: f64 },
    #[error("no analyzable utterances")]
    NoAnalyzableUtterances,
    #[error("too few voiced frames: {found} (need {needed})")]
    TooFewVoicedFrames { found: usize, needed: usize },
    #[error("zero normalizer for {feature} in session {session}")]
    ZeroNormalizer { feature: &'static str, session: String },
    #[error("degenerate feature {feature}: {reason}")]
    DegenerateFeature { feature: &'static str, reason: String },
    #[error("K = {k} is invalid for {n} points")]
    InvalidClusterCount { k: usize, n: usize },
    #[error("training data holds a single class")]
    SingleClass,
    #[error("too few sessions: {0}")]
    TooFewSessions(String),
    #[error("no salient genres to build session features from")]
    NoGenres,
    #[error("infeasible plant spec: {0}")]
    InfeasibleSpec(String),
}

pub type Result<T> = core::result::Result<T, Error>;
