//! Rate functions, recurrence events and the convergence diagnostics.

pub mod counterexample;
pub mod events;
pub mod experiment;
pub mod rate;
pub mod series;

pub use counterexample::{cond2_check, counterexample_rate, ConstructedRate, GFunction};
pub use events::{detect_events, detect_subsequence_events, EventStatus, RecurrenceEvent};
pub use experiment::{expected_event_count, run_experiment, ExperimentSummary, Window};
pub use rate::{psi_minus, psi_plus, RateFunction, RateKind};
pub use series::{convergence_series, SeriesReport, Verdict};
