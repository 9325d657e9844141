//! Experiment harness: run configurations, single episodes, the ablation
//! ladder, aggregate reports and map renders.

mod ablation;
mod config;
mod episode;
mod render;

pub use ablation::{
    aggregate, ladder, run_ablation, run_jobs, write_records_csv, write_report_json, Ablation,
    AggregateReport, ClassAggregate, ConfigAggregate, Job, LARGE_SCENE_AREA,
};
pub use config::{config_hash, CostMode, DepthMode, Enhancements, RunConfig};
pub use episode::{run_episode, simulate, EndReason, EpisodeOutcome, RunRecord, TraceEvent};
pub use render::{render_map, render_ppm};
