//! Scoring, synthetic data and experiment orchestration.

mod experiment;
mod ingest;
mod metrics;
mod spec;
pub mod synth;

pub use experiment::{
    alter_messages, alter_segments, detector_settings, header_rule, load_corpus, make_embedder,
    run_experiment, AlteredRun, AlteredStream, LabeledCorpus, ObjectiveReport, Report, SweepPoint,
};
pub use ingest::label_by_identifiers;
pub use metrics::{compute_metrics, label_verdicts, LabeledVerdict, Metrics};
pub use spec::{DataSource, EmbeddingSource, ExperimentKind, ExperimentSpec, KEYS};
