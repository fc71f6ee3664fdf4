//! Object-goal navigation on procedurally generated indoor scenes.
//!
//! The crate bundles a small ground-truth simulator ([`world`]), the agent's
//! top-down mapping ([`mapping`]), goal detection and projection
//! ([`perception`]), block-based exploration guided by an advisor
//! ([`global`], [`advisor`]), A* planning ([`planner`]) and the episode loop
//! with its metrics ([`episode`]).

pub mod advisor;
pub mod config;
pub mod episode;
pub mod error;
pub mod geometry;
pub mod global;
pub mod mapping;
pub mod morphology;
pub mod perception;
pub mod planner;
pub mod raster;
pub mod world;

pub use config::Config;
pub use error::{Error, Result};
pub use geometry::{Cell, CellRect, OctileCost, Pose};
pub use mapping::{CellState, OccupancyGrid};
pub use world::{Action, Scene};
