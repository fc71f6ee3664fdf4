//! Episode orchestration, batch evaluation and scoring.

pub mod batch;
pub mod metrics;
pub mod records;
pub mod runner;

pub use batch::{run_batch, run_job, AdvisorFactory, BatchJob};
pub use metrics::{aggregate, spl, Aggregate, EpisodeResult, FailureCategory, TerminationReason};
pub use records::{read_records, write_records, EpisodeRecord, ReplayTrace};
pub use runner::{
    run_episode, Components, Episode, EpisodeEvent, EpisodeOutput, EpisodeSpec, LocalGoal, PlanReason, TraceStep,
};
