//! Top-down occupancy mapping from egocentric depth.
//!
//! Depth pixels are back-projected into a world-frame point set, the points
//! inside a height band become obstacle cells, and the part of every ray that
//! travels inside the band carves free space. Local patches merge into the
//! global map with obstacle-sticky priority.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, CellRect, Pose};
use crate::world::{CameraIntrinsics, DepthImage};

/// Global grids grow in chunks of this many cells, anchored at the world origin.
pub const CHUNK: i64 = 64;

/// Free carving stops this far short of a surface return.
const SURFACE_NUDGE: f64 = 1e-4;
/// Distance to a grid line below which a return counts as lying on it.
const LINE_SNAP: f64 = 1e-6;

/// Ordered so that merging is a per-cell maximum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    #[default]
    Unknown = 0,
    Free = 1,
    Obstacle = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    bounds: CellRect,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    /// A grid with no cells at all; it grows on the first merge.
    pub fn empty(resolution: f64) -> Self {
        Self { resolution, bounds: CellRect::new(0, 0, 0, 0), cells: Vec::new() }
    }

    /// All-Unknown grid covering `bounds`.
    pub fn with_bounds(resolution: f64, bounds: CellRect) -> Self {
        let n = (bounds.rows.max(0) * bounds.cols.max(0)) as usize;
        Self { resolution, bounds, cells: vec![CellState::Unknown; n] }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn bounds(&self) -> CellRect {
        self.bounds
    }

    pub fn width(&self) -> usize {
        self.bounds.cols.max(0) as usize
    }

    pub fn height(&self) -> usize {
        self.bounds.rows.max(0) as usize
    }

    /// World coordinates of the corner of cell (0, 0) of this grid.
    pub fn origin(&self) -> (f64, f64) {
        (self.bounds.col0 as f64 * self.resolution, self.bounds.row0 as f64 * self.resolution)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.bounds.contains(cell)
    }

    fn index(&self, cell: Cell) -> usize {
        ((cell.row - self.bounds.row0) * self.bounds.cols + (cell.col - self.bounds.col0)) as usize
    }

    /// State of a cell; anything outside the grid is Unknown.
    pub fn get(&self, cell: Cell) -> CellState {
        if self.contains(cell) {
            self.cells[self.index(cell)]
        } else {
            CellState::Unknown
        }
    }

    /// Overwrite a cell inside the grid. Panics outside the bounds.
    pub fn set(&mut self, cell: Cell, state: CellState) {
        assert!(self.contains(cell), "cell {cell} outside grid bounds");
        let i = self.index(cell);
        self.cells[i] = state;
    }

    /// Raise a cell to at least `state` (merge priority). Ignores cells
    /// outside the grid.
    pub fn raise(&mut self, cell: Cell, state: CellState) {
        if self.contains(cell) {
            let i = self.index(cell);
            if state > self.cells[i] {
                self.cells[i] = state;
            }
        }
    }

    /// Copy restricted to the bounding box of the observed cells.
    pub fn cropped(&self) -> OccupancyGrid {
        let Some(b) = CellRect::bounding(self.observed().map(|(c, _)| c).collect::<Vec<_>>().iter()) else {
            return OccupancyGrid::empty(self.resolution);
        };
        let mut out = OccupancyGrid::with_bounds(self.resolution, b);
        for (c, s) in self.observed() {
            let i = out.index(c);
            out.cells[i] = s;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, CellState)> + '_ {
        self.bounds.cells().zip(self.cells.iter().copied())
    }

    /// Observed (non-Unknown) cells.
    pub fn observed(&self) -> impl Iterator<Item = (Cell, CellState)> + '_ {
        self.iter().filter(|(_, s)| *s != CellState::Unknown)
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&s| s == state).count()
    }

    pub fn is_unexplored(&self) -> bool {
        self.cells.iter().all(|&s| s == CellState::Unknown)
    }

    /// Grow (never shrink) so that `rect` is covered; the new bounds are
    /// aligned to [`CHUNK`]-cell multiples of the world origin.
    pub fn expand_to_cover(&mut self, rect: CellRect) {
        if rect.is_empty() {
            return;
        }
        let want = self.bounds.union(&rect);
        if want == self.bounds && !self.bounds.is_empty() {
            return;
        }
        let r0 = want.row0.div_euclid(CHUNK) * CHUNK;
        let c0 = want.col0.div_euclid(CHUNK) * CHUNK;
        let r1 = (want.row0 + want.rows + CHUNK - 1).div_euclid(CHUNK) * CHUNK;
        let c1 = (want.col0 + want.cols + CHUNK - 1).div_euclid(CHUNK) * CHUNK;
        let aligned = CellRect::new(r0, c0, r1 - r0, c1 - c0).union(&self.bounds);
        if aligned == self.bounds {
            return;
        }
        let mut grown = OccupancyGrid::with_bounds(self.resolution, aligned);
        for (cell, state) in self.iter() {
            let i = grown.index(cell);
            grown.cells[i] = state;
        }
        *self = grown;
    }

    /// Merge a patch in place: per-cell max of Unknown < Free < Obstacle.
    pub fn merge(&mut self, patch: &OccupancyGrid) -> Result<()> {
        if (self.resolution - patch.resolution).abs() > 1e-12 * self.resolution.max(patch.resolution) {
            return Err(Error::Config(format!(
                "resolution mismatch: map {} vs patch {}",
                self.resolution, patch.resolution
            )));
        }
        if let Some(observed) = CellRect::bounding(patch.observed().map(|(c, _)| c).collect::<Vec<_>>().iter()) {
            self.expand_to_cover(observed);
        }
        for (cell, state) in patch.observed() {
            let i = self.index(cell);
            if state > self.cells[i] {
                self.cells[i] = state;
            }
        }
        Ok(())
    }

    /// Binary PGM (P5): Unknown 128, Free 255, Obstacle 0. Row 0 of the image
    /// is the lowest grid row.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width(), self.height()).into_bytes();
        out.extend(self.cells.iter().map(|s| match s {
            CellState::Unknown => 128u8,
            CellState::Free => 255,
            CellState::Obstacle => 0,
        }));
        out
    }

    /// Row-major run-length encoding: `[state, count]` pairs over the bounds.
    pub fn to_snapshot(&self) -> MapSnapshot {
        let mut runs: Vec<(u8, u32)> = Vec::new();
        for &s in &self.cells {
            match runs.last_mut() {
                Some((v, n)) if *v == s as u8 => *n += 1,
                _ => runs.push((s as u8, 1)),
            }
        }
        MapSnapshot { resolution: self.resolution, bounds: self.bounds, runs }
    }

    pub fn from_snapshot(snap: &MapSnapshot) -> Result<Self> {
        let mut grid = OccupancyGrid::with_bounds(snap.resolution, snap.bounds);
        let mut i = 0usize;
        for &(v, n) in &snap.runs {
            let state = match v {
                0 => CellState::Unknown,
                1 => CellState::Free,
                2 => CellState::Obstacle,
                other => return Err(Error::Config(format!("invalid cell state {other} in map snapshot"))),
            };
            let end = i + n as usize;
            if end > grid.cells.len() {
                return Err(Error::Config("map snapshot has too many cells".into()));
            }
            grid.cells[i..end].fill(state);
            i = end;
        }
        if i != grid.cells.len() {
            return Err(Error::Config("map snapshot has too few cells".into()));
        }
        Ok(grid)
    }
}

/// Serializable form of an occupancy grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub resolution: f64,
    pub bounds: CellRect,
    pub runs: Vec<(u8, u32)>,
}

/// Merge `patch` into a copy of `global`.
pub fn merge_patch(global: &OccupancyGrid, patch: &OccupancyGrid) -> Result<OccupancyGrid> {
    let mut g = global.clone();
    g.merge(patch)?;
    Ok(g)
}

/// World-frame returns of one depth frame plus the sensor origin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    /// Sensor position `(x, y, z)`.
    pub origin: [f64; 3],
    /// Surface returns.
    pub points: Vec<[f64; 3]>,
    /// End points, at maximum range, of rays that returned nothing.
    pub misses: Vec<[f64; 3]>,
}

impl PointSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Back-project every valid depth pixel into the world frame.
pub fn depth_to_points(depth: &DepthImage, intr: &CameraIntrinsics, pose: &Pose) -> Result<PointSet> {
    if depth.width != intr.width || depth.height != intr.height {
        return Err(Error::Config(format!(
            "depth image is {}x{} but intrinsics expect {}x{}",
            depth.width, depth.height, intr.width, intr.height
        )));
    }
    let origin = [pose.x, pose.y, intr.mount_height];
    let theta = pose.theta();
    let mut set = PointSet { origin, points: Vec::with_capacity(depth.data.len()), misses: Vec::new() };
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v) as f64;
            let dir = intr.ray_direction(u as f64, v as f64, theta);
            if d > 0.0 && d < intr.max_range {
                let p = [origin[0] + d * dir[0], origin[1] + d * dir[1], origin[2] + d * dir[2]];
                if p.iter().all(|c| c.is_finite()) && p[2] >= -1e-9 {
                    set.points.push([p[0], p[1], p[2].max(0.0)]);
                }
            } else if d == 0.0 {
                let r = intr.max_range;
                set.misses.push([origin[0] + r * dir[0], origin[1] + r * dir[1], origin[2] + r * dir[2]]);
            }
        }
    }
    Ok(set)
}

/// Height band `[z_min, z_max]` that counts as obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightClip {
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for HeightClip {
    fn default() -> Self {
        Self { z_min: 0.2, z_max: 1.2 }
    }
}

/// Voxelize a point set into a local top-down patch.
///
/// Returns inside the height band mark their cell Obstacle. Each ray (to a
/// return, or to maximum range for a miss) marks Free the cells it crosses
/// while inside the band, excluding the return cell itself.
pub fn points_to_local_patch(points: &PointSet, clip: HeightClip, resolution: f64) -> Result<OccupancyGrid> {
    check_patch_params(clip, resolution)?;
    let o = points.origin;
    let mut obstacles: Vec<Cell> = Vec::new();
    // (from, to, include_end)
    let mut carves: Vec<(Cell, Cell, bool)> = Vec::with_capacity(points.points.len() + points.misses.len());

    let mut add_ray = |p: &[f64; 3], is_return: bool| {
        let Some((s_lo, s_hi)) = band_interval(o[2], p[2], clip) else { return };
        let at = |s: f64| Cell::containing(o[0] + s * (p[0] - o[0]), o[1] + s * (p[1] - o[1]), resolution);
        let include_end = !(is_return && s_hi >= 1.0);
        let end = if is_return && s_hi >= 1.0 { hit_cell(&o, p, resolution) } else { at(s_hi) };
        carves.push((at(s_lo), end, include_end));
    };
    for p in &points.points {
        add_ray(p, true);
        if p[2] >= clip.z_min && p[2] <= clip.z_max {
            obstacles.push(hit_cell(&o, p, resolution));
        }
    }
    for p in &points.misses {
        add_ray(p, false);
    }
    carves.sort_unstable();
    carves.dedup();

    let ends = carves.iter().flat_map(|(a, b, _)| [a, b]).chain(obstacles.iter());
    let Some(bounds) = CellRect::bounding(ends) else {
        return Ok(OccupancyGrid::empty(resolution));
    };
    let mut canvas = OccupancyGrid::with_bounds(resolution, bounds);
    for &(a, b, include_end) in &carves {
        bresenham(a, b, |c| {
            if include_end || c != b {
                canvas.raise(c, CellState::Free);
            }
        });
    }
    for c in obstacles {
        canvas.raise(c, CellState::Obstacle);
    }
    Ok(canvas.cropped())
}

fn check_patch_params(clip: HeightClip, resolution: f64) -> Result<()> {
    if !(clip.z_min < clip.z_max) {
        return Err(Error::param("height_clip", "z_min must be below z_max"));
    }
    if !(resolution > 0.0) {
        return Err(Error::param("resolution", "must be positive"));
    }
    Ok(())
}

/// Fraction interval `[s_lo, s_hi]` of the segment from height `z0` to `z1`
/// that lies inside the band, if any.
fn band_interval(z0: f64, z1: f64, clip: HeightClip) -> Option<(f64, f64)> {
    let dz = z1 - z0;
    let (lo, hi) = if dz.abs() < 1e-12 {
        if z0 >= clip.z_min && z0 <= clip.z_max {
            (0.0, 1.0)
        } else {
            return None;
        }
    } else {
        let a = (clip.z_min - z0) / dz;
        let b = (clip.z_max - z0) / dz;
        (a.min(b).max(0.0), a.max(b).min(1.0))
    };
    (lo <= hi).then_some((lo, hi))
}

/// Local patch straight from a depth frame.
///
/// Equivalent in intent to [`depth_to_points`] followed by
/// [`points_to_local_patch`], but exploits that all pixels of an image column
/// share one horizontal direction: the in-band ray intervals of a column are
/// merged and each merged interval is carved once with an exact grid walk.
pub fn depth_to_local_patch(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    pose: &Pose,
    clip: HeightClip,
    resolution: f64,
) -> Result<OccupancyGrid> {
    check_patch_params(clip, resolution)?;
    if depth.width != intr.width || depth.height != intr.height {
        return Err(Error::Config(format!(
            "depth image is {}x{} but intrinsics expect {}x{}",
            depth.width, depth.height, intr.width, intr.height
        )));
    }
    let o = [pose.x, pose.y, intr.mount_height];
    let center = Cell::containing(o[0], o[1], resolution);
    let reach = (intr.max_range / resolution).ceil() as i64 + 2;
    let mut canvas =
        OccupancyGrid::with_bounds(resolution, CellRect::new(center.row - reach, center.col - reach, 2 * reach + 1, 2 * reach + 1));
    let theta = pose.theta();
    let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(depth.height);
    for u in 0..depth.width {
        intervals.clear();
        let mut hdir = [0.0; 2];
        for v in 0..depth.height {
            let dir = intr.ray_direction(u as f64, v as f64, theta);
            let horiz = dir[0].hypot(dir[1]);
            if horiz < 1e-12 {
                continue;
            }
            hdir = [dir[0] / horiz, dir[1] / horiz];
            let d = depth.get(u, v) as f64;
            let (range, is_return) = if d > 0.0 && d < intr.max_range {
                (d, true)
            } else if d == 0.0 {
                (intr.max_range, false)
            } else {
                continue;
            };
            let p = [o[0] + range * dir[0], o[1] + range * dir[1], o[2] + range * dir[2]];
            if is_return && p[2] >= clip.z_min && p[2] <= clip.z_max {
                canvas.raise(hit_cell(&o, &p, resolution), CellState::Obstacle);
            }
            if let Some((s_lo, s_hi)) = band_interval(o[2], p[2], clip) {
                let len = range * horiz;
                let end = if is_return && s_hi >= 1.0 { len * s_hi - SURFACE_NUDGE } else { len * s_hi };
                if end >= len * s_lo {
                    intervals.push((len * s_lo, end));
                }
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Option<(f64, f64)> = None;
        for &(lo, hi) in intervals.iter() {
            match merged {
                Some((mlo, mhi)) if lo <= mhi + resolution * 0.5 => merged = Some((mlo, mhi.max(hi))),
                Some(m) => {
                    walk_cells(&o, hdir, m, resolution, |c| canvas.raise(c, CellState::Free));
                    merged = Some((lo, hi));
                }
                None => merged = Some((lo, hi)),
            }
        }
        if let Some(m) = merged {
            walk_cells(&o, hdir, m, resolution, |c| canvas.raise(c, CellState::Free));
        }
    }
    Ok(canvas.cropped())
}

/// Every cell crossed by the horizontal segment from `origin + lo * dir` to
/// `origin + hi * dir` (exact grid traversal).
fn walk_cells(origin: &[f64; 3], dir: [f64; 2], (lo, hi): (f64, f64), resolution: f64, mut visit: impl FnMut(Cell)) {
    let (x0, y0) = (origin[0] + lo * dir[0], origin[1] + lo * dir[1]);
    let mut cell = Cell::containing(x0, y0, resolution);
    let end = Cell::containing(origin[0] + hi * dir[0], origin[1] + hi * dir[1], resolution);
    let step_c = if dir[0] > 0.0 { 1 } else { -1 };
    let step_r = if dir[1] > 0.0 { 1 } else { -1 };
    let next_boundary = |idx: i64, step: i64| if step > 0 { (idx + 1) as f64 * resolution } else { idx as f64 * resolution };
    let mut t_max_x = if dir[0].abs() < 1e-12 { f64::INFINITY } else { (next_boundary(cell.col, step_c) - x0) / dir[0] };
    let mut t_max_y = if dir[1].abs() < 1e-12 { f64::INFINITY } else { (next_boundary(cell.row, step_r) - y0) / dir[1] };
    let t_dx = if dir[0].abs() < 1e-12 { f64::INFINITY } else { resolution / dir[0].abs() };
    let t_dy = if dir[1].abs() < 1e-12 { f64::INFINITY } else { resolution / dir[1].abs() };
    let span = hi - lo;
    visit(cell);
    while cell != end {
        if t_max_x < t_max_y {
            if t_max_x > span {
                break;
            }
            cell.col += step_c;
            t_max_x += t_dx;
        } else {
            if t_max_y > span {
                break;
            }
            cell.row += step_r;
            t_max_y += t_dy;
        }
        visit(cell);
    }
}

/// Cell of a surface return. A coordinate within float noise of a grid line
/// is taken to lie on it, and the cell on the far side along the ray is
/// chosen; other coordinates are floored.
pub(crate) fn hit_cell(origin: &[f64; 3], p: &[f64; 3], resolution: f64) -> Cell {
    let index = |v: f64, d: f64| {
        let k = (v / resolution).round();
        if (v - k * resolution).abs() < LINE_SNAP && d != 0.0 {
            if d > 0.0 {
                k as i64
            } else {
                k as i64 - 1
            }
        } else {
            (v / resolution).floor() as i64
        }
    };
    Cell::new(index(p[1], p[1] - origin[1]), index(p[0], p[0] - origin[0]))
}

/// Integer Bresenham line from `a` to `b`, both ends included.
pub fn bresenham(a: Cell, b: Cell, mut visit: impl FnMut(Cell)) {
    let (mut x, mut y) = (a.col, a.row);
    let dx = (b.col - a.col).abs();
    let dy = -(b.row - a.row).abs();
    let sx = if a.col < b.col { 1 } else { -1 };
    let sy = if a.row < b.row { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        visit(Cell::new(y, x));
        if x == b.col && y == b.row {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Project one frame and merge it into `map`.
pub fn integrate_depth(
    map: &mut OccupancyGrid,
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    pose: &Pose,
    clip: HeightClip,
) -> Result<()> {
    let patch = depth_to_local_patch(depth, intr, pose, clip, map.resolution())?;
    map.merge(&patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::from_fov(79.0, 64, 48, 5.0, 0.8).unwrap()
    }

    #[test]
    fn zero_depth_gives_no_points() {
        let d = DepthImage::new(64, 48);
        let ps = depth_to_points(&d, &intr(), &Pose::new(0.0, 0.0, 0.0)).unwrap();
        assert!(ps.points.is_empty());
        assert_eq!(ps.misses.len(), 64 * 48);
    }

    #[test]
    fn principal_pixel_projects_on_axis() {
        let intr = intr();
        let mut d = DepthImage::new(64, 48);
        d.data[24 * 64 + 32] = 2.0;
        let ps = depth_to_points(&d, &intr, &Pose::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(ps.points.len(), 1);
        let p = ps.points[0];
        assert!((p[0] - 2.0).abs() < 1e-12 && p[1].abs() < 1e-12 && (p[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let d = DepthImage::new(10, 10);
        assert!(depth_to_points(&d, &intr(), &Pose::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn low_point_is_not_obstacle_but_ray_is_free() {
        let ps = PointSet { origin: [0.0, 0.0, 0.8], points: vec![[1.0, 0.0, 0.1]], misses: vec![] };
        let patch = points_to_local_patch(&ps, HeightClip::default(), 0.05).unwrap();
        assert_eq!(patch.count(CellState::Obstacle), 0);
        assert_eq!(patch.get(Cell::new(0, 0)), CellState::Free);
        assert_eq!(patch.get(Cell::new(0, 10)), CellState::Free);
        // Band is left at z = 0.2, s = 6/7 of the ray -> x ~ 0.857.
        assert_eq!(patch.get(Cell::new(0, 19)), CellState::Unknown);
    }

    #[test]
    fn in_band_point_marks_obstacle() {
        let ps = PointSet { origin: [0.0, 0.0, 0.8], points: vec![[1.0, 0.0, 0.8]], misses: vec![] };
        let patch = points_to_local_patch(&ps, HeightClip::default(), 0.05).unwrap();
        assert_eq!(patch.get(Cell::new(0, 20)), CellState::Obstacle);
        assert_eq!(patch.get(Cell::new(0, 19)), CellState::Free);
        assert_eq!(patch.count(CellState::Obstacle), 1);
    }

    #[test]
    fn bad_clip_rejected() {
        let clip = HeightClip { z_min: 1.0, z_max: 0.5 };
        assert!(points_to_local_patch(&PointSet::default(), clip, 0.05).is_err());
    }

    #[test]
    fn identity_merge_and_priority() {
        let mut patch = OccupancyGrid::with_bounds(0.05, CellRect::new(3, -2, 4, 5));
        patch.set(Cell::new(3, -2), CellState::Free);
        patch.set(Cell::new(4, 0), CellState::Obstacle);
        let g = merge_patch(&OccupancyGrid::empty(0.05), &patch).unwrap();
        let a: Vec<_> = g.observed().collect();
        let b: Vec<_> = patch.observed().collect();
        assert_eq!(a, b);
        assert_eq!(g.bounds().row0 % CHUNK, 0);
        assert_eq!(g.bounds().col0, -CHUNK);

        let mut p2 = OccupancyGrid::with_bounds(0.05, CellRect::new(3, -2, 1, 1));
        p2.set(Cell::new(3, -2), CellState::Obstacle);
        let g2 = merge_patch(&g, &p2).unwrap();
        assert_eq!(g2.get(Cell::new(3, -2)), CellState::Obstacle);
        let mut p3 = p2.clone();
        p3.set(Cell::new(3, -2), CellState::Free);
        assert_eq!(merge_patch(&g2, &p3).unwrap().get(Cell::new(3, -2)), CellState::Obstacle);
    }

    #[test]
    fn resolution_mismatch() {
        let g = OccupancyGrid::empty(0.05);
        let p = OccupancyGrid::with_bounds(0.1, CellRect::new(0, 0, 1, 1));
        assert!(matches!(merge_patch(&g, &p), Err(Error::Config(_))));
    }

    #[test]
    fn snapshot_roundtrip_and_pgm() {
        let mut g = OccupancyGrid::with_bounds(0.05, CellRect::new(0, 0, 2, 3));
        g.set(Cell::new(0, 1), CellState::Free);
        g.set(Cell::new(1, 2), CellState::Obstacle);
        assert_eq!(OccupancyGrid::from_snapshot(&g.to_snapshot()).unwrap(), g);
        let pgm = g.to_pgm();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[128, 255, 128, 128, 128, 0]);
    }

    fn arb_patch() -> impl Strategy<Value = OccupancyGrid> {
        (-100i64..100, -100i64..100, 1i64..12, 1i64..12, prop::collection::vec(0u8..3, 144)).prop_map(
            |(r0, c0, rows, cols, states)| {
                let mut g = OccupancyGrid::with_bounds(0.05, CellRect::new(r0, c0, rows, cols));
                let cells: Vec<Cell> = g.bounds().cells().collect();
                for (cell, s) in cells.into_iter().zip(states) {
                    g.set(cell, [CellState::Unknown, CellState::Free, CellState::Obstacle][s as usize]);
                }
                g
            },
        )
    }

    proptest! {
        #[test]
        fn merge_is_monotone_and_idempotent(patches in prop::collection::vec(arb_patch(), 1..5)) {
            let mut g = OccupancyGrid::empty(0.05);
            for p in &patches {
                let before: Vec<(Cell, CellState)> = g.observed().collect();
                let old_bounds = g.bounds();
                g.merge(p).unwrap();
                prop_assert_eq!(g.bounds().union(&old_bounds), g.bounds());
                for (c, s) in before {
                    prop_assert!(g.get(c) >= s);
                }
                let again = merge_patch(&g, p).unwrap();
                prop_assert_eq!(&again, &g);
            }
        }
    }
}
