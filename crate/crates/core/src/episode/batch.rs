//! Many episodes on a worker pool, results in input order.

use std::sync::Arc;

use rayon::prelude::*;

use super::records::EpisodeRecord;
use super::runner::{invalid_result, run_episode, Components, EpisodeOutput, EpisodeSpec};
use crate::advisor::Advisor;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::perception::Detector;
use crate::world::Scene;

#[derive(Clone, Debug)]
pub struct BatchJob {
    pub scene: Arc<Scene>,
    pub goal: String,
    pub seed: u64,
}

/// Builds the advisor for one job; `None` selects the frontier heuristic.
pub type AdvisorFactory<'a> = dyn Fn(&BatchJob) -> Result<Option<Box<dyn Advisor>>> + Sync + 'a;

/// Sample a start for the job and run it. Goals unreachable from every
/// traversable cell give an invalid record.
pub fn run_job(
    job: &BatchJob,
    config: &Config,
    detector: &dyn Detector,
    advisor: Option<&dyn Advisor>,
) -> Result<(EpisodeSpec, EpisodeOutput)> {
    let spec = match EpisodeSpec::sample(&job.scene, &job.goal, job.seed, config) {
        Ok(s) => s,
        Err(Error::NoPath { .. }) => {
            let spec = EpisodeSpec {
                scene: job.scene.name().to_string(),
                goal_category: job.goal.clone(),
                start: crate::geometry::Pose::new(0.0, 0.0, 0.0),
                success_radius: config.success_radius,
                max_steps: config.max_steps,
                seed: job.seed,
            };
            let output = EpisodeOutput {
                result: invalid_result(),
                trace: Vec::new(),
                events: Vec::new(),
                final_map: crate::mapping::OccupancyGrid::empty(config.resolution),
                last_path: Vec::new(),
                trajectory: Vec::new(),
            };
            return Ok((spec, output));
        }
        Err(e) => return Err(e),
    };
    let output = run_episode(&job.scene, &spec, config, Components { detector, advisor })?;
    Ok((spec, output))
}

/// Run every job with `parallelism` workers. Output order matches `jobs`.
pub fn run_batch(
    jobs: &[BatchJob],
    config: &Config,
    parallelism: usize,
    detector: &dyn Detector,
    advisors: &AdvisorFactory<'_>,
) -> Result<Vec<EpisodeRecord>> {
    if parallelism == 0 {
        return Err(Error::param("parallelism", "must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let advisor = advisors(job)?;
                let (spec, output) = run_job(job, config, detector, advisor.as_deref())?;
                Ok(EpisodeRecord::new(&spec, &output))
            })
            .collect()
    })
}
