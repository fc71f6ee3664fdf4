//! Single-episode orchestration: sense, map, detect, arbitrate the
//! destination, plan, act, terminate.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{spl, EpisodeResult, FailureCategory, TerminationReason};
use crate::advisor::Advisor;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{signed_angle, Cell, CellRect, Pose, FORWARD_STEP, TURNS_PER_REVOLUTION, TURN_ANGLE};
use crate::global::{build_blocks, choose_block, render_context_image, update_reason, NavState, UpdateReason, VisitedMemory};
use crate::mapping::{integrate_depth, CellState, HeightClip, OccupancyGrid};
use crate::perception::{
    dilate_goal_with, project_goal, refine_mask_with, Detector, GoalRegion, GoalSource, Observation,
};
use crate::planner::{astar, follow_step_lookahead, inflate_obstacles, needs_replan, steer, Costmap, PathPlan};
use crate::world::{geodesic_shortest_length, render, step_action, Action, CameraIntrinsics, Scene, NEIGHBORS};

/// Failed presence checks at one instance before it is rejected.
pub const MAX_VERIFY_FAILURES: usize = 12;
/// Consecutive failed plans to a local goal before it is rejected.
pub const MAX_LOCAL_PLAN_FAILURES: usize = 3;
/// Collisions at or above this count classify a step-limit failure as map quality.
pub const MAP_QUALITY_COLLISIONS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    /// Scene name.
    pub scene: String,
    pub goal_category: String,
    pub start: Pose,
    pub success_radius: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl EpisodeSpec {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialization is infallible");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    /// Seeded start pose on a traversable cell from which some goal instance
    /// is reachable, preferring cells outside the success radius. Headings
    /// are multiples of the turn angle.
    pub fn sample(scene: &Scene, goal_category: &str, seed: u64, config: &Config) -> Result<Self> {
        let goals: Vec<_> = scene.objects_of(goal_category).collect();
        if goals.is_empty() {
            return Err(Error::UnknownCategory(goal_category.to_string()));
        }
        let res = scene.resolution();
        let near_goal = |c: Cell| {
            let (x, y) = c.center(res);
            goals.iter().any(|g| g.distance_to(x, y, res) <= config.success_radius)
        };
        let reachable = reachable_cells(scene, config.robot_radius, near_goal);
        if reachable.is_empty() {
            return Err(Error::NoPath { start: Cell::new(0, 0) });
        }
        let outside: Vec<Cell> = reachable.iter().copied().filter(|&c| !near_goal(c)).collect();
        let pool = if outside.is_empty() { &reachable } else { &outside };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = pool[rng.gen_range(0..pool.len())];
        let k = rng.gen_range(0..TURNS_PER_REVOLUTION);
        let (x, y) = cell.center(res);
        Ok(Self {
            scene: scene.name().to_string(),
            goal_category: goal_category.to_string(),
            start: Pose::new(x, y, k as f64 * TURN_ANGLE),
            success_radius: config.success_radius,
            max_steps: config.max_steps,
            seed,
        })
    }

    pub fn validate(&self, scene: &Scene, robot_radius: f64) -> Result<()> {
        if scene.objects_of(&self.goal_category).next().is_none() {
            return Err(Error::UnknownCategory(self.goal_category.clone()));
        }
        if !scene.pose_is_valid(&self.start, robot_radius) {
            return Err(Error::param("start", "pose is outside the scene or in collision"));
        }
        if !(self.success_radius > 0.0) {
            return Err(Error::param("success_radius", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be positive"));
        }
        Ok(())
    }
}

/// Traversable cells connected (8-neighborhood, no corner cutting) to a
/// traversable seed cell, in row-major order.
fn reachable_cells(scene: &Scene, robot_radius: f64, seed: impl Fn(Cell) -> bool) -> Vec<Cell> {
    let (w, h) = (scene.width(), scene.height());
    let free = scene.traversable_mask(robot_radius);
    let ok = |c: Cell| scene.in_bounds(c) && free[c.row as usize * w + c.col as usize];
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let cell = Cell::new(r, c);
            if ok(cell) && seed(cell) {
                seen[r as usize * w + c as usize] = true;
                queue.push_back(cell);
            }
        }
    }
    while let Some(cell) = queue.pop_front() {
        for (dr, dc) in NEIGHBORS {
            let n = cell.offset(dr, dc);
            if !ok(n) || seen[n.row as usize * w + n.col as usize] {
                continue;
            }
            if dr != 0 && dc != 0 && !(ok(cell.offset(dr, 0)) && ok(cell.offset(0, dc))) {
                continue;
            }
            seen[n.row as usize * w + n.col as usize] = true;
            queue.push_back(n);
        }
    }
    (0..w * h).filter(|&i| seen[i]).map(|i| Cell::new((i / w) as i64, (i % w) as i64)).collect()
}

/// Detector and advisor used by an episode. Without an advisor the
/// frontier heuristic picks blocks and presence checks trust the detector.
#[derive(Clone, Copy)]
pub struct Components<'a> {
    pub detector: &'a dyn Detector,
    pub advisor: Option<&'a dyn Advisor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanReason {
    New,
    TargetChanged,
    Blocked,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EpisodeEvent {
    Detection {
        step: usize,
        instance_id: Option<u32>,
        cells: usize,
    },
    DestinationUpdate {
        step: usize,
        reason: UpdateReason,
        block: u32,
        destination: Cell,
        advisor_calls: usize,
        fallback: bool,
    },
    Plan {
        step: usize,
        reason: PlanReason,
        source: GoalSource,
        found: bool,
    },
    VerifyFailed {
        step: usize,
    },
    GoalRejected {
        step: usize,
        instance_id: Option<u32>,
    },
    Collision {
        step: usize,
        marked: Vec<Cell>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Pose at which the action was taken.
    pub pose: Pose,
    pub action: Action,
    /// Source of the active destination, absent during the initial scan.
    pub source: Option<GoalSource>,
    pub collided: bool,
}

/// A detected goal held as the active destination.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalGoal {
    pub instance_id: Option<u32>,
    /// Projected cells before dilation.
    pub original: GoalRegion,
    /// Planning target.
    pub dilated: GoalRegion,
    pub plan_failures: usize,
    pub verify_failures: usize,
}

#[derive(Clone, Debug)]
pub struct EpisodeOutput {
    pub result: EpisodeResult,
    pub trace: Vec<TraceStep>,
    pub events: Vec<EpisodeEvent>,
    pub final_map: OccupancyGrid,
    pub last_path: Vec<(f64, f64)>,
    pub trajectory: Vec<Pose>,
}

/// Step-level episode state. [`run_episode`] drives it to completion;
/// tests may step it manually and edit the map between steps.
pub struct Episode<'a> {
    scene: &'a Scene,
    spec: EpisodeSpec,
    config: Config,
    components: Components<'a>,
    intr: CameraIntrinsics,
    clip: HeightClip,
    inflation: usize,
    shortest: f64,

    pose: Pose,
    step: usize,
    map: OccupancyGrid,
    memory: VisitedMemory,
    nav: NavState,
    scan_remaining: usize,
    local: Option<LocalGoal>,
    global: Option<GoalRegion>,
    plan: Option<PathPlan>,
    committed_heading: Option<f64>,
    rejected: Vec<Option<u32>>,

    traveled_steps: usize,
    collisions: usize,
    ever_detected: bool,
    last_local_plan_failed: bool,
    trace: Vec<TraceStep>,
    events: Vec<EpisodeEvent>,
    trajectory: Vec<Pose>,
    last_path: Vec<(f64, f64)>,
    done: Option<TerminationReason>,
}

impl<'a> Episode<'a> {
    /// Validate the spec and compute the oracle shortest length. An
    /// unreachable goal yields `Error::NoPath`.
    pub fn new(scene: &'a Scene, spec: EpisodeSpec, config: &Config, components: Components<'a>) -> Result<Self> {
        config.validate()?;
        spec.validate(scene, config.robot_radius)?;
        if (scene.resolution() - config.resolution).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "scene resolution {} differs from configured resolution {}",
                scene.resolution(),
                config.resolution
            )));
        }
        let shortest = scene
            .objects_of(&spec.goal_category)
            .filter_map(|g| {
                geodesic_shortest_length(scene, &spec.start, g, spec.success_radius, config.robot_radius).ok()
            })
            .fold(f64::INFINITY, f64::min);
        if !shortest.is_finite() {
            return Err(Error::NoPath { start: spec.start.cell(scene.resolution()) });
        }
        let nav = NavState {
            steps_since_destination: 0,
            endurance_limit: config.endurance_limit,
            short_term_goal: None,
            last_plan_failed: false,
            reach_threshold: config.reach_threshold,
        };
        Ok(Self {
            scene,
            pose: spec.start,
            trajectory: vec![spec.start],
            spec,
            intr: config.intrinsics(),
            clip: config.height_clip(),
            inflation: config.inflation_cells(),
            shortest,
            step: 0,
            map: OccupancyGrid::empty(config.resolution),
            memory: VisitedMemory::new(config.vicinity_radius),
            nav,
            scan_remaining: config.initial_scan_turns,
            config: config.clone(),
            components,
            local: None,
            global: None,
            plan: None,
            committed_heading: None,
            rejected: Vec::new(),
            traveled_steps: 0,
            collisions: 0,
            ever_detected: false,
            last_local_plan_failed: false,
            trace: Vec::new(),
            events: Vec::new(),
            last_path: Vec::new(),
            done: None,
        })
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn map(&self) -> &OccupancyGrid {
        &self.map
    }

    /// Direct map access, e.g. to inject obstacles the sensor has not seen.
    pub fn map_mut(&mut self) -> &mut OccupancyGrid {
        &mut self.map
    }

    pub fn plan(&self) -> Option<&PathPlan> {
        self.plan.as_ref()
    }

    pub fn local_goal(&self) -> Option<&LocalGoal> {
        self.local.as_ref()
    }

    pub fn global_goal(&self) -> Option<&GoalRegion> {
        self.global.as_ref()
    }

    pub fn nav_state(&self) -> &NavState {
        &self.nav
    }

    pub fn events(&self) -> &[EpisodeEvent] {
        &self.events
    }

    pub fn trace(&self) -> &[TraceStep] {
        &self.trace
    }

    pub fn shortest_length(&self) -> f64 {
        self.shortest
    }

    pub fn collisions(&self) -> usize {
        self.collisions
    }

    pub fn termination(&self) -> Option<TerminationReason> {
        self.done
    }

    pub fn active_source(&self) -> Option<GoalSource> {
        if self.local.is_some() {
            Some(GoalSource::Local)
        } else if self.global.is_some() {
            Some(GoalSource::Global)
        } else {
            None
        }
    }

    /// Advance one action. Returns the termination reason once the episode
    /// has ended; further calls are no-ops.
    pub fn step(&mut self) -> Result<Option<TerminationReason>> {
        if self.done.is_some() {
            return Ok(self.done);
        }
        if self.step >= self.spec.max_steps {
            self.done = Some(TerminationReason::StepLimit);
            return Ok(self.done);
        }
        let (depth, sem) = render(self.scene, &self.pose, &self.intr);
        integrate_depth(&mut self.map, &depth, &self.intr, &self.pose, self.clip)?;

        let obs = Observation {
            scene: self.scene,
            pose: &self.pose,
            intrinsics: &self.intr,
            depth: &depth,
            semantic: &sem,
        };
        let detection = self
            .components
            .detector
            .detect(&obs, &self.spec.goal_category)
            .filter(|d| !self.rejected.contains(&d.instance_id));
        let detected_now = detection.is_some();
        if let Some(det) = detection {
            let refined = refine_mask_with(&det, self.config.erosion_kernel, self.config.erosion_iterations);
            if let Ok(region) = project_goal(&refined, &depth, &self.intr, &self.pose, &self.map) {
                self.ever_detected = true;
                self.scan_remaining = 0;
                let (region, plan_failures, verify_failures) = match &self.local {
                    Some(l) if l.instance_id == det.instance_id => {
                        let mut cells = l.original.cells.clone();
                        cells.extend_from_slice(&region.cells);
                        (GoalRegion::new(cells, GoalSource::Local), l.plan_failures, l.verify_failures)
                    }
                    _ => (region, 0, 0),
                };
                let dilated =
                    dilate_goal_with(&region, &self.map, self.config.dilation_kernel, self.config.dilation_iterations);
                self.events.push(EpisodeEvent::Detection {
                    step: self.step,
                    instance_id: det.instance_id,
                    cells: region.cells.len(),
                });
                self.local = Some(LocalGoal {
                    instance_id: det.instance_id,
                    original: region,
                    dilated,
                    plan_failures,
                    verify_failures,
                });
            }
        }

        let action = match self.decide(detected_now, &sem)? {
            Some(a) => a,
            None => return Ok(self.done),
        };
        self.act(action);
        Ok(None)
    }

    /// Choose the next action; `None` once the agent has stopped at a goal.
    fn decide(&mut self, detected_now: bool, sem: &crate::world::SemanticImage) -> Result<Option<Action>> {
        let res = self.map.resolution();
        let mut unverified = false;
        if let Some(local) = &mut self.local {
            if local.original.distance_to(self.pose.x, self.pose.y, res) <= self.spec.success_radius {
                let verified = match self.components.advisor {
                    Some(a) => a.verify(&sem.to_ppm(), &self.spec.goal_category).unwrap_or_else(|e| {
                        log::warn!("presence check failed ({e}); trusting the detector");
                        detected_now
                    }),
                    None => detected_now,
                };
                if verified {
                    self.trace.push(TraceStep {
                        step: self.step,
                        pose: self.pose,
                        action: Action::Stop,
                        source: Some(GoalSource::Local),
                        collided: false,
                    });
                    self.step += 1;
                    self.done = Some(TerminationReason::GoalReached);
                    return Ok(None);
                }
                self.events.push(EpisodeEvent::VerifyFailed { step: self.step });
                unverified = true;
            }
        }

        if self.local.is_none() && self.scan_remaining > 0 {
            self.scan_remaining -= 1;
            return Ok(Some(Action::TurnLeft));
        }

        if self.local.is_none() {
            let reason = if self.global.is_none() {
                Some(UpdateReason::Initial)
            } else {
                update_reason(&self.nav, &self.pose, res)
            };
            if let Some(reason) = reason {
                self.update_destination(reason)?;
            }
            self.nav.steps_since_destination += 1;
        }

        let costmap = inflate_obstacles(&self.map, self.inflation);
        let (target, source) = match (&self.local, &self.global) {
            (Some(l), _) => {
                let open: Vec<Cell> = l.dilated.cells.iter().copied().filter(|&c| costmap.is_traversable(c)).collect();
                let region = if open.is_empty() { l.dilated.clone() } else { GoalRegion::new(open, GoalSource::Local) };
                (region, GoalSource::Local)
            }
            (None, Some(g)) => (g.clone(), GoalSource::Global),
            (None, None) => return Ok(Some(Action::TurnLeft)),
        };
        if let Some(reason) = self.replan_reason(&target, &costmap) {
            self.replan(&costmap, target, source, reason);
        }
        if let Some(target) = self.committed_heading.take() {
            if self.pose.theta() != target {
                self.committed_heading = Some(target);
                return Ok(Some(turn_toward(&self.pose, target)));
            }
            if self.sweep_is_clear(&self.pose) {
                return Ok(Some(Action::Forward));
            }
        }
        let Some(plan) = &mut self.plan else {
            return Ok(Some(Action::TurnLeft));
        };
        match follow_step_lookahead(&self.pose, plan, FORWARD_STEP) {
            Action::Stop => {
                self.plan = None;
                if unverified {
                    return Ok(Some(self.face_unverified_goal()));
                }
                Ok(Some(Action::TurnLeft))
            }
            Action::Forward if !self.sweep_is_clear(&self.pose) => Ok(Some(self.detour())),
            a => Ok(Some(a)),
        }
    }

    /// At the end of the path to a goal the presence check rejected: turn
    /// toward it, and give the instance up after a full turn of failures.
    fn face_unverified_goal(&mut self) -> Action {
        let res = self.map.resolution();
        let Some(local) = &mut self.local else { return Action::TurnLeft };
        local.verify_failures += 1;
        if local.verify_failures >= MAX_VERIFY_FAILURES {
            self.reject_local();
            return Action::TurnLeft;
        }
        let (x, y) = nearest_cell(&local.original, &self.pose, res).center(res);
        match steer(&self.pose, x, y) {
            Action::Forward => Action::TurnLeft,
            a => a,
        }
    }

    /// The forward move from `pose` touches no mapped obstacle.
    fn sweep_is_clear(&self, pose: &Pose) -> bool {
        let res = self.map.resolution();
        let r = self.config.robot_radius + 0.005;
        let th = pose.theta();
        let (dx, dy) = (th.cos(), th.sin());
        let n = (FORWARD_STEP / 0.01).round() as usize;
        (0..=n).all(|i| {
            let s = i as f64 * FORWARD_STEP / n as f64;
            let (x, y) = (pose.x + s * dx, pose.y + s * dy);
            let lo = Cell::containing(x - r, y - r, res);
            let hi = Cell::containing(x + r, y + r, res);
            (lo.row..=hi.row).all(|row| {
                (lo.col..=hi.col).all(|col| {
                    let c = Cell::new(row, col);
                    self.map.get(c) != CellState::Obstacle || c.distance_to_point(x, y, res) >= r
                })
            })
        })
    }

    /// Heading whose clear forward move ends closest to a point one metre
    /// down the path; turn toward it and keep it until the move is made.
    fn detour(&mut self) -> Action {
        let Some(plan) = &self.plan else { return Action::TurnLeft };
        let remaining = plan.remaining();
        let Some(&first) = remaining.first() else { return Action::TurnLeft };
        let (cx, cy) = remaining
            .iter()
            .take_while(|&&(x, y)| self.pose.distance_to(x, y) <= 2.0 * FORWARD_STEP)
            .last()
            .copied()
            .unwrap_or(first);
        let here = self.pose.distance_to(cx, cy);
        let mut best: Option<(f64, usize, Pose)> = None;
        let mut cand = self.pose;
        for k in 0..TURNS_PER_REVOLUTION as usize {
            let rotation = k.min(TURNS_PER_REVOLUTION as usize - k);
            if self.sweep_is_clear(&cand) {
                let d = cand.translated(FORWARD_STEP).distance_to(cx, cy);
                if d < here && best.map_or(true, |(bd, br, _)| (d, rotation) < (bd, br)) {
                    best = Some((d, rotation, cand));
                }
            }
            cand = cand.turned(true);
        }
        match best {
            Some((_, _, p)) => {
                self.committed_heading = Some(p.theta());
                turn_toward(&self.pose, p.theta())
            }
            None => Action::TurnLeft,
        }
    }

    fn reject_local(&mut self) {
        if let Some(l) = self.local.take() {
            self.events.push(EpisodeEvent::GoalRejected { step: self.step, instance_id: l.instance_id });
            self.rejected.push(l.instance_id);
        }
        self.plan = None;
    }

    fn update_destination(&mut self, reason: UpdateReason) -> Result<()> {
        let blocks = build_blocks(&self.map, self.config.block_size);
        let context = render_context_image(&self.map, &blocks, &self.pose, &self.trajectory);
        let choice = choose_block(
            self.components.advisor,
            &self.spec.goal_category,
            &context,
            &mut self.memory,
            &blocks,
            &self.map,
            &self.pose,
        )?;
        let (dx, dy) = choice.destination.center(self.map.resolution());
        if self.pose.distance_to(dx, dy) <= self.config.reach_threshold && !self.rejected.is_empty() {
            // Nowhere new to go: give rejected instances another chance.
            self.rejected.clear();
        }
        let region = GoalRegion::new(vec![choice.destination], GoalSource::Global);
        self.events.push(EpisodeEvent::DestinationUpdate {
            step: self.step,
            reason,
            block: choice.block,
            destination: choice.destination,
            advisor_calls: choice.queries.len(),
            fallback: choice.used_fallback,
        });
        self.nav.steps_since_destination = 0;
        self.nav.last_plan_failed = false;
        self.nav.short_term_goal = Some(region.clone());
        self.global = Some(region);
        self.plan = None;
        Ok(())
    }

    fn replan_reason(&self, target: &GoalRegion, costmap: &Costmap) -> Option<PlanReason> {
        let Some(plan) = self.plan.as_ref() else {
            return Some(PlanReason::New);
        };
        if plan.target != *target {
            Some(PlanReason::TargetChanged)
        } else if plan.remaining_cells().iter().any(|&c| costmap.is_blocked(c)) {
            Some(PlanReason::Blocked)
        } else if needs_replan(plan, self.step, costmap) {
            Some(PlanReason::Periodic)
        } else {
            None
        }
    }

    fn replan(&mut self, costmap: &Costmap, target: GoalRegion, source: GoalSource, reason: PlanReason) {
        let found = match astar(costmap, self.pose.cell(costmap.resolution()), &target, self.step) {
            Ok(Some(plan)) => {
                self.last_path = plan.waypoints.clone();
                match source {
                    GoalSource::Global => {
                        self.nav.short_term_goal = Some(GoalRegion::new(vec![plan.destination()], GoalSource::Global));
                    }
                    GoalSource::Local => {
                        self.last_local_plan_failed = false;
                        if let Some(l) = &mut self.local {
                            l.plan_failures = 0;
                        }
                    }
                }
                self.plan = Some(plan);
                true
            }
            Ok(None) | Err(_) => {
                self.plan = None;
                match source {
                    GoalSource::Global => self.nav.last_plan_failed = true,
                    GoalSource::Local => {
                        self.last_local_plan_failed = true;
                        let give_up = self.local.as_mut().map_or(false, |l| {
                            l.plan_failures += 1;
                            l.plan_failures >= MAX_LOCAL_PLAN_FAILURES
                        });
                        if give_up {
                            self.reject_local();
                        }
                    }
                }
                false
            }
        };
        self.events.push(EpisodeEvent::Plan { step: self.step, reason, source, found });
    }

    fn act(&mut self, action: Action) {
        let out = step_action(self.scene, &self.pose, action, self.config.robot_radius);
        let collided = action == Action::Forward && out.collided;
        if collided {
            self.collisions += 1;
            let touched = self.bump_cells();
            for &c in &touched {
                self.map.expand_to_cover(CellRect::new(c.row, c.col, 1, 1));
                self.map.raise(c, CellState::Obstacle);
            }
            self.plan = None;
            self.committed_heading = None;
            self.events.push(EpisodeEvent::Collision { step: self.step, marked: touched });
        } else if action == Action::Forward {
            self.traveled_steps += 1;
        }
        self.trace.push(TraceStep { step: self.step, pose: self.pose, action, source: self.active_source(), collided });
        self.pose = out.pose;
        self.trajectory.push(self.pose);
        self.step += 1;
    }

    /// Occupied cells touched by the robot disc at the first contact point
    /// of a blocked forward move.
    fn bump_cells(&self) -> Vec<Cell> {
        let res = self.scene.resolution();
        let r = self.config.robot_radius + 0.005;
        let th = self.pose.theta();
        let (dx, dy) = (th.cos(), th.sin());
        let n = (FORWARD_STEP / 0.01).round() as usize;
        let Some(s) = (0..=n)
            .map(|i| i as f64 * FORWARD_STEP / n as f64)
            .find(|&s| self.scene.disc_collides(self.pose.x + s * dx, self.pose.y + s * dy, r))
        else {
            return Vec::new();
        };
        let (x, y) = (self.pose.x + s * dx, self.pose.y + s * dy);
        let lo = Cell::containing(x - r, y - r, res);
        let hi = Cell::containing(x + r, y + r, res);
        let mut out = Vec::new();
        for row in lo.row..=hi.row {
            for col in lo.col..=hi.col {
                let c = Cell::new(row, col);
                if !self.scene.occupant(c).is_free() && c.distance_to_point(x, y, res) < r {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Score the episode against ground truth.
    pub fn finish(self) -> EpisodeOutput {
        let reason = self.done.unwrap_or(TerminationReason::StepLimit);
        let res = self.scene.resolution();
        let at_goal = self
            .scene
            .objects_of(&self.spec.goal_category)
            .any(|g| g.distance_to(self.pose.x, self.pose.y, res) <= self.spec.success_radius);
        let success = reason == TerminationReason::GoalReached && at_goal;
        let failure_category = if success {
            None
        } else if reason == TerminationReason::GoalReached {
            Some(FailureCategory::Detection)
        } else if !self.ever_detected {
            Some(FailureCategory::NotFound)
        } else if self.last_local_plan_failed {
            Some(FailureCategory::TargetSurrounded)
        } else if self.collisions >= MAP_QUALITY_COLLISIONS {
            Some(FailureCategory::MapQuality)
        } else {
            Some(FailureCategory::PathPlanning)
        };
        let traveled = self.traveled_steps as f64 * FORWARD_STEP;
        EpisodeOutput {
            result: EpisodeResult {
                success,
                steps: self.step,
                traveled_length: traveled,
                shortest_length: Some(self.shortest),
                spl: spl(success, self.shortest, traveled),
                termination_reason: reason,
                failure_category,
            },
            trace: self.trace,
            events: self.events,
            final_map: self.map,
            last_path: self.last_path,
            trajectory: self.trajectory,
        }
    }
}

fn turn_toward(pose: &Pose, theta: f64) -> Action {
    if signed_angle(pose.theta(), theta) > 0.0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}

fn nearest_cell(region: &GoalRegion, pose: &Pose, res: f64) -> Cell {
    let here = pose.cell(res);
    *region.cells.iter().min_by_key(|c| (c.squared_distance(&here), **c)).expect("goal regions are non-empty")
}

/// Result for an episode whose goal cannot be reached from the start.
pub fn invalid_result() -> EpisodeResult {
    EpisodeResult {
        success: false,
        steps: 0,
        traveled_length: 0.0,
        shortest_length: None,
        spl: 0.0,
        termination_reason: TerminationReason::Invalid,
        failure_category: None,
    }
}

/// Run an episode to completion. An unreachable goal produces an invalid
/// result rather than an error.
pub fn run_episode(scene: &Scene, spec: &EpisodeSpec, config: &Config, components: Components<'_>) -> Result<EpisodeOutput> {
    let mut ep = match Episode::new(scene, spec.clone(), config, components) {
        Ok(ep) => ep,
        Err(Error::NoPath { .. }) => {
            return Ok(EpisodeOutput {
                result: invalid_result(),
                trace: Vec::new(),
                events: Vec::new(),
                final_map: OccupancyGrid::empty(config.resolution),
                last_path: Vec::new(),
                trajectory: vec![spec.start],
            })
        }
        Err(e) => return Err(e),
    };
    while ep.step()?.is_none() {}
    Ok(ep.finish())
}
