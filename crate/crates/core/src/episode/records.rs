//! On-disk formats: JSON-lines episode records and replay traces.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::EpisodeResult;
use super::runner::{EpisodeOutput, EpisodeSpec, TraceStep};
use crate::error::Result;
use crate::geometry::Pose;
use crate::mapping::{MapSnapshot, OccupancyGrid};

/// One line of a results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scene: String,
    pub goal: String,
    pub seed: u64,
    pub spec_hash: String,
    #[serde(flatten)]
    pub result: EpisodeResult,
    pub trace: Vec<TraceStep>,
}

impl EpisodeRecord {
    pub fn new(spec: &EpisodeSpec, output: &EpisodeOutput) -> Self {
        Self {
            scene: spec.scene.clone(),
            goal: spec.goal_category.clone(),
            seed: spec.seed,
            spec_hash: spec.hash(),
            result: output.result.clone(),
            trace: output.trace.clone(),
        }
    }
}

pub fn write_records(out: &mut impl Write, records: &[EpisodeRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(input: impl BufRead) -> Result<Vec<EpisodeRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Everything needed to redraw an episode's final top-down view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayTrace {
    pub map: MapSnapshot,
    pub trajectory: Vec<Pose>,
    pub path: Vec<(f64, f64)>,
    pub block_size: usize,
}

impl ReplayTrace {
    pub fn new(output: &EpisodeOutput, block_size: usize) -> Self {
        Self {
            map: output.final_map.to_snapshot(),
            trajectory: output.trajectory.clone(),
            path: output.last_path.clone(),
            block_size,
        }
    }

    pub fn grid(&self) -> Result<OccupancyGrid> {
        OccupancyGrid::from_snapshot(&self.map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
