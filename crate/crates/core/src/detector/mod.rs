//! Windowing, training, calibration and per-event verdicts.

mod decide;
mod io;
mod train;
mod window;

pub use decide::{
    calibrate_regression_threshold, classify_probs, detect_classification, detect_regression,
    detect_stream, nearest_rank, rank_of, regress_verdict, resolve_target, window_errors,
    DecisionParams, Label, Reason, Resolution, StreamEvent, Verdict,
};
pub use io::{read_labels, read_verdicts, render_verdicts, write_labels, write_verdicts};
pub use train::{fit, train, ClassMap, DetectorModel, TrainConfig};
pub use window::{make_windows, EventWindow, WindowConfig};
