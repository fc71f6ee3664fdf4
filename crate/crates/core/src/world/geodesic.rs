use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::scene::{ObjectInstance, Scene};
use crate::error::{Error, Result};
use crate::geometry::{Cell, OctileCost, Pose};

/// 8-neighborhood offsets; diagonal moves may not cut blocked corners.
pub(crate) const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Shortest obstacle-respecting path length (meters) from `start` to any
/// cell within `success_radius` of the goal footprint, on the ground-truth
/// grid inflated by the robot radius.
pub fn geodesic_shortest_length(
    scene: &Scene,
    start: &Pose,
    goal: &ObjectInstance,
    success_radius: f64,
    robot_radius: f64,
) -> Result<f64> {
    let res = scene.resolution();
    if goal.distance_to(start.x, start.y, res) <= success_radius {
        return Ok(0.0);
    }
    let (w, h) = (scene.width(), scene.height());
    let free = scene.traversable_mask(robot_radius);
    let idx = |c: Cell| c.row as usize * w + c.col as usize;
    let ok = |c: Cell| scene.in_bounds(c) && free[idx(c)];
    let is_target = |c: Cell| {
        let (x, y) = c.center(res);
        goal.distance_to(x, y, res) <= success_radius
    };

    let start_cell = start.cell(res);
    if !scene.in_bounds(start_cell) {
        return Err(Error::NoPath { start: start_cell });
    }
    let mut dist = vec![None::<OctileCost>; w * h];
    let mut heap = BinaryHeap::new();
    dist[idx(start_cell)] = Some(OctileCost::ZERO);
    heap.push(Reverse((OctileCost::ZERO, start_cell)));
    while let Some(Reverse((d, cell))) = heap.pop() {
        if dist[idx(cell)] != Some(d) {
            continue;
        }
        if cell != start_cell && is_target(cell) {
            return Ok(d.meters(res));
        }
        for (dr, dc) in NEIGHBORS {
            let n = cell.offset(dr, dc);
            if !ok(n) {
                continue;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal && !(ok(cell.offset(dr, 0)) && ok(cell.offset(0, dc))) {
                continue;
            }
            let nd = d + if diagonal { OctileCost::DIAGONAL } else { OctileCost::STRAIGHT };
            if dist[idx(n)].map_or(true, |old| nd < old) {
                dist[idx(n)] = Some(nd);
                heap.push(Reverse((nd, n)));
            }
        }
    }
    Err(Error::NoPath { start: start_cell })
}
