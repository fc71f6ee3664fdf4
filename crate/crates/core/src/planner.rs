//! A* planning over the inflated occupancy map and the discrete waypoint
//! follower.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{signed_angle, Cell, CellRect, OctileCost, Pose};
use crate::mapping::{CellState, OccupancyGrid};
use crate::morphology::{dilate, BinaryMask};
use crate::perception::GoalRegion;
use crate::world::{Action, NEIGHBORS};

/// Steps after which a plan is recomputed from scratch.
pub const REPLAN_INTERVAL: usize = 10;
/// Waypoints closer than this to the robot count as reached.
pub const WAYPOINT_RADIUS: f64 = 0.25;
/// Heading error above which the follower turns instead of moving.
pub const TURN_THRESHOLD: f64 = 15.0 * std::f64::consts::PI / 180.0;

/// Traversability over a rectangle of cells; everything outside is blocked.
#[derive(Clone, Debug, PartialEq)]
pub struct Costmap {
    bounds: CellRect,
    resolution: f64,
    blocked: Vec<bool>,
}

impl Costmap {
    pub fn from_fn(bounds: CellRect, resolution: f64, blocked: impl Fn(Cell) -> bool) -> Self {
        let blocked = bounds.cells().map(blocked).collect();
        Self { bounds, resolution, blocked }
    }

    pub fn bounds(&self) -> CellRect {
        self.bounds
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    fn index(&self, cell: Cell) -> usize {
        ((cell.row - self.bounds.row0) * self.bounds.cols + (cell.col - self.bounds.col0)) as usize
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        !self.bounds.contains(cell) || self.blocked[self.index(cell)]
    }

    pub fn is_traversable(&self, cell: Cell) -> bool {
        !self.is_blocked(cell)
    }

    pub fn traversable_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| !b).count()
    }

    /// Legal moves out of `cell`: 8-connected, no cutting past blocked corners.
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = (Cell, OctileCost)> + '_ {
        NEIGHBORS.iter().filter_map(move |&(dr, dc)| {
            let n = cell.offset(dr, dc);
            if self.is_blocked(n) {
                return None;
            }
            if dr != 0 && dc != 0 {
                if self.is_blocked(cell.offset(dr, 0)) || self.is_blocked(cell.offset(0, dc)) {
                    return None;
                }
                Some((n, OctileCost::DIAGONAL))
            } else {
                Some((n, OctileCost::STRAIGHT))
            }
        })
    }
}

/// Number of cells needed to cover `radius` meters.
pub fn inflation_radius_cells(radius: f64, resolution: f64) -> usize {
    ((radius / resolution) - 1e-9).ceil().max(0.0) as usize
}

/// Block every cell within Chebyshev distance `radius_cells` of an Obstacle.
/// Unknown cells stay traversable.
pub fn inflate_obstacles(grid: &OccupancyGrid, radius_cells: usize) -> Costmap {
    let b = grid.bounds();
    let mask = BinaryMask::from_fn(grid.width(), grid.height(), |x, y| {
        grid.get(Cell::new(b.row0 + y as i64, b.col0 + x as i64)) == CellState::Obstacle
    });
    let grown = if radius_cells == 0 { mask } else { dilate(&mask, 2 * radius_cells + 1, 1) };
    Costmap { bounds: b, resolution: grid.resolution(), blocked: grown.data }
}

/// Traversable cell nearest to `cell` (Euclidean, ties row-major).
pub fn nearest_free(costmap: &Costmap, cell: Cell) -> Result<Cell> {
    if costmap.is_traversable(cell) {
        return Ok(cell);
    }
    let b = costmap.bounds();
    if b.is_empty() || costmap.traversable_count() == 0 {
        return Err(Error::Planning("costmap has no traversable cell".into()));
    }
    // Chebyshev distance from `cell` to the farthest corner of the bounds.
    let reach = [b.row0 - cell.row, cell.row - (b.row0 + b.rows - 1), b.col0 - cell.col, cell.col - (b.col0 + b.cols - 1)]
        .iter()
        .map(|d| d.abs())
        .max()
        .unwrap()
        + b.rows.max(b.cols);
    let mut best: Option<(i64, Cell)> = None;
    for r in 1..=reach {
        if let Some((d2, _)) = best {
            if r * r > d2 {
                break;
            }
        }
        for dr in -r..=r {
            let step = if dr.abs() == r { 1 } else { 2 * r };
            let mut dc = -r;
            while dc <= r {
                let c = cell.offset(dr, dc);
                if costmap.is_traversable(c) {
                    let key = (dr * dr + dc * dc, c);
                    if best.map_or(true, |b| key < b) {
                        best = Some(key);
                    }
                }
                dc += step;
            }
        }
    }
    best.map(|(_, c)| c).ok_or_else(|| Error::Planning("costmap has no traversable cell".into()))
}

/// Optimal 8-connected path between two traversable cells; `None` when
/// disconnected. Ties in the open list break on f, then h, then row-major.
pub fn astar_cells(costmap: &Costmap, start: Cell, goal: Cell) -> Option<(Vec<Cell>, OctileCost)> {
    if costmap.is_blocked(start) || costmap.is_blocked(goal) {
        return None;
    }
    search(costmap, start, |c| c == goal, |c| OctileCost::between(c, goal))
}

/// Dijkstra from `start` to whichever traversable cell of `goals` is cheapest.
pub fn dijkstra_to_any(costmap: &Costmap, start: Cell, goals: &[Cell]) -> Option<(Vec<Cell>, OctileCost)> {
    if costmap.is_blocked(start) {
        return None;
    }
    let mut is_goal = vec![false; costmap.blocked.len()];
    for &g in goals {
        if costmap.is_traversable(g) {
            is_goal[costmap.index(g)] = true;
        }
    }
    search(costmap, start, |c| is_goal[costmap.index(c)], |_| OctileCost::ZERO)
}

fn search(
    costmap: &Costmap,
    start: Cell,
    is_goal: impl Fn(Cell) -> bool,
    heuristic: impl Fn(Cell) -> OctileCost,
) -> Option<(Vec<Cell>, OctileCost)> {
    let n = costmap.blocked.len();
    let mut g: Vec<Option<OctileCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let si = costmap.index(start);
    g[si] = Some(OctileCost::ZERO);
    let h0 = heuristic(start);
    open.push(Reverse((h0, h0, start)));
    while let Some(Reverse((_, _, cell))) = open.pop() {
        let ci = costmap.index(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        let gc = g[ci].expect("opened cell has a cost");
        if is_goal(cell) {
            let mut path = vec![cell];
            let mut i = ci;
            while parent[i] != usize::MAX {
                i = parent[i];
                let b = costmap.bounds;
                path.push(Cell::new(b.row0 + i as i64 / b.cols, b.col0 + i as i64 % b.cols));
            }
            path.reverse();
            return Some((path, gc));
        }
        for (nb, step) in costmap.neighbors(cell) {
            let ni = costmap.index(nb);
            if closed[ni] {
                continue;
            }
            let ng = gc + step;
            if g[ni].map_or(true, |old| ng < old) {
                g[ni] = Some(ng);
                parent[ni] = ci;
                let h = heuristic(nb);
                open.push(Reverse((ng + h, h, nb)));
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    pub cells: Vec<Cell>,
    /// Cell centers in world meters.
    pub waypoints: Vec<(f64, f64)>,
    pub cost: OctileCost,
    pub created_at_step: usize,
    pub target: GoalRegion,
    /// Index of the first waypoint not yet consumed.
    pub next: usize,
}

impl PathPlan {
    pub fn remaining(&self) -> &[(f64, f64)] {
        &self.waypoints[self.next.min(self.waypoints.len())..]
    }

    pub fn remaining_cells(&self) -> &[Cell] {
        &self.cells[self.next.min(self.cells.len())..]
    }

    pub fn destination(&self) -> Cell {
        *self.cells.last().expect("plans are never empty")
    }

    pub fn is_finished(&self) -> bool {
        self.next >= self.waypoints.len()
    }
}

/// Plan from `start` to the region cell closest to it. Blocked start or
/// destination cells are first moved to the nearest traversable cell. When
/// that cell is cut off, fall back to the cheapest reachable region cell.
pub fn astar(costmap: &Costmap, start: Cell, target: &GoalRegion, step: usize) -> Result<Option<PathPlan>> {
    let Some(&closest) = target.cells.iter().min_by_key(|c| (c.squared_distance(&start), **c)) else {
        return Err(Error::Planning("empty goal region".into()));
    };
    let from = nearest_free(costmap, start)?;
    let to = nearest_free(costmap, closest)?;
    let found = astar_cells(costmap, from, to).or_else(|| {
        let mut goals = target.cells.clone();
        goals.push(to);
        dijkstra_to_any(costmap, from, &goals)
    });
    Ok(found.map(|(cells, cost)| {
        let res = costmap.resolution();
        PathPlan {
            waypoints: cells.iter().map(|c| c.center(res)).collect(),
            cells,
            cost,
            created_at_step: step,
            target: target.clone(),
            next: 0,
        }
    }))
}

/// Replan every [`REPLAN_INTERVAL`] steps or when a remaining waypoint has
/// become blocked.
pub fn needs_replan(plan: &PathPlan, current_step: usize, costmap: &Costmap) -> bool {
    current_step.saturating_sub(plan.created_at_step) >= REPLAN_INTERVAL
        || plan.remaining_cells().iter().any(|&c| costmap.is_blocked(c))
}

/// Consume reached waypoints, then steer toward the next one.
pub fn follow_step(pose: &Pose, plan: &mut PathPlan) -> Action {
    let remaining = plan.remaining();
    if let Some(last_close) = remaining.iter().rposition(|&(x, y)| pose.distance_to(x, y) <= WAYPOINT_RADIUS) {
        plan.next += last_close + 1;
    }
    let Some(&(x, y)) = plan.remaining().first() else {
        return Action::Stop;
    };
    steer(pose, x, y)
}

/// Like [`follow_step`], but steer toward the furthest waypoint of the
/// leading run that lies within `lookahead` meters, so a full forward step
/// follows the path direction instead of a neighbor cell.
pub fn follow_step_lookahead(pose: &Pose, plan: &mut PathPlan, lookahead: f64) -> Action {
    let remaining = plan.remaining();
    if let Some(last_close) = remaining.iter().rposition(|&(x, y)| pose.distance_to(x, y) <= WAYPOINT_RADIUS) {
        plan.next += last_close + 1;
    }
    let remaining = plan.remaining();
    let Some(&first) = remaining.first() else {
        return Action::Stop;
    };
    let (x, y) = remaining
        .iter()
        .take_while(|&&(x, y)| pose.distance_to(x, y) <= lookahead)
        .last()
        .copied()
        .unwrap_or(first);
    steer(pose, x, y)
}

/// Action that turns toward, or moves to, the point `(x, y)`.
pub fn steer(pose: &Pose, x: f64, y: f64) -> Action {
    let alpha = signed_angle(pose.theta(), (y - pose.y).atan2(x - pose.x));
    if alpha > TURN_THRESHOLD {
        Action::TurnLeft
    } else if alpha < -TURN_THRESHOLD {
        Action::TurnRight
    } else {
        Action::Forward
    }
}
