//! Goal detection in the egocentric view, mask refinement, and projection of
//! the refined mask onto the top-down map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, CellRect, Pose};
use crate::mapping::{hit_cell, OccupancyGrid};
use crate::morphology::{dilate, erode, BinaryMask};
use crate::world::{render_isolated, CameraIntrinsics, DepthImage, Scene, SemanticImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub min_visible_fraction: f64,
    pub max_det_range: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { min_visible_fraction: 0.15, max_det_range: 4.0 }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_visible_fraction > 0.0 && self.min_visible_fraction <= 1.0) {
            return Err(Error::param("min_visible_fraction", "must be in (0, 1]"));
        }
        if !(self.max_det_range > 0.0) {
            return Err(Error::param("max_det_range", "must be positive"));
        }
        Ok(())
    }
}

/// Pixel rectangle, inclusive of `x0, y0` and exclusive of `x1, y1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// Bounding rectangle of the set pixels, `None` for an empty mask.
    pub fn of_mask(mask: &BinaryMask) -> Option<PixelRect> {
        let mut it = mask.iter_set();
        let (x, y) = it.next()?;
        let mut r = PixelRect { x0: x, y0: y, x1: x + 1, y1: y + 1 };
        for (x, y) in it {
            r.x0 = r.x0.min(x);
            r.y0 = r.y0.min(y);
            r.x1 = r.x1.max(x + 1);
            r.y1 = r.y1.max(y + 1);
        }
        Some(r)
    }
}

/// A detection in image coordinates. The mask has the full image size and is
/// zero outside `bbox`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub bbox: PixelRect,
    pub mask: BinaryMask,
    pub instance_id: Option<u32>,
    pub confidence: f64,
}

impl DetectionResult {
    /// Build from a mask; `None` if the mask is empty.
    pub fn from_mask(mask: BinaryMask, instance_id: Option<u32>, confidence: f64) -> Option<Self> {
        let bbox = PixelRect::of_mask(&mask)?;
        Some(Self { bbox, mask, instance_id, confidence })
    }

    /// JSON exchanged with external detectors: bbox, mask as run lengths over
    /// the bbox (row-major, alternating runs starting with unset), confidence.
    pub fn to_wire(&self) -> WireDetection {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for y in self.bbox.y0..self.bbox.y1 {
            for x in self.bbox.x0..self.bbox.x1 {
                if self.mask.get(x, y) != current {
                    counts.push(run);
                    current = !current;
                    run = 0;
                }
                run += 1;
            }
        }
        counts.push(run);
        WireDetection {
            bbox: [self.bbox.x0, self.bbox.y0, self.bbox.width(), self.bbox.height()],
            mask: counts,
            confidence: self.confidence,
        }
    }

    /// Rebuild from the wire form for an image of the given size.
    pub fn from_wire(wire: &WireDetection, width: usize, height: usize) -> Result<Self> {
        let [x0, y0, w, h] = wire.bbox;
        if w == 0 || h == 0 || x0 + w > width || y0 + h > height {
            return Err(Error::param("bbox", "outside the image"));
        }
        if wire.mask.iter().map(|&c| c as usize).sum::<usize>() != w * h {
            return Err(Error::param("mask", "run lengths do not cover the bbox"));
        }
        let mut mask = BinaryMask::new(width, height);
        let mut i = 0usize;
        for (k, &c) in wire.mask.iter().enumerate() {
            if k % 2 == 1 {
                for j in i..i + c as usize {
                    mask.set(x0 + j % w, y0 + j / w, true);
                }
            }
            i += c as usize;
        }
        let mut det = Self::from_mask(mask, None, wire.confidence.clamp(0.0, 1.0))
            .ok_or_else(|| Error::param("mask", "empty"))?;
        det.bbox = PixelRect { x0, y0, x1: x0 + w, y1: y0 + h };
        Ok(det)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    /// `[x, y, width, height]`
    pub bbox: [usize; 4],
    pub mask: Vec<u32>,
    pub confidence: f64,
}

/// One egocentric frame plus the context a detector may use.
#[derive(Clone, Copy)]
pub struct Observation<'a> {
    pub scene: &'a Scene,
    pub pose: &'a Pose,
    pub intrinsics: &'a CameraIntrinsics,
    pub depth: &'a DepthImage,
    pub semantic: &'a SemanticImage,
}

pub trait Detector: Send + Sync {
    fn detect(&self, obs: &Observation<'_>, goal_category: &str) -> Option<DetectionResult>;
}

/// Detector backed by the semantic image. Categories listed in `confusions`
/// as `(goal, other)` make instances of `other` count as the goal too.
#[derive(Clone, Debug, Default)]
pub struct OracleDetector {
    pub params: DetectorParams,
    pub confusions: Vec<(String, String)>,
}

impl OracleDetector {
    pub fn new(params: DetectorParams) -> Self {
        Self { params, confusions: Vec::new() }
    }
}

impl Detector for OracleDetector {
    fn detect(&self, obs: &Observation<'_>, goal_category: &str) -> Option<DetectionResult> {
        let extra: Vec<&str> =
            self.confusions.iter().filter(|(g, _)| g == goal_category).map(|(_, o)| o.as_str()).collect();
        detect_matching(obs, &self.params, |cat| cat == goal_category || extra.contains(&cat))
    }
}

/// Never detects anything.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullDetector;

impl Detector for NullDetector {
    fn detect(&self, _obs: &Observation<'_>, _goal_category: &str) -> Option<DetectionResult> {
        None
    }
}

/// Oracle detection of `goal_category` from a semantic/depth frame pair.
pub fn detect_goal(
    semantic: &SemanticImage,
    depth: &DepthImage,
    goal_category: &str,
    scene: &Scene,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    params: &DetectorParams,
) -> Option<DetectionResult> {
    let obs = Observation { scene, pose, intrinsics, depth, semantic };
    detect_matching(&obs, params, |cat| cat == goal_category)
}

fn detect_matching(
    obs: &Observation<'_>,
    params: &DetectorParams,
    is_goal: impl Fn(&str) -> bool,
) -> Option<DetectionResult> {
    let mut best: Option<(f32, u32, usize)> = None;
    for obj in obs.scene.objects().iter().filter(|o| is_goal(&o.category)) {
        let id = obj.id as i32;
        let mut visible = 0usize;
        let mut nearest = f32::INFINITY;
        for (i, &l) in obs.semantic.data.iter().enumerate() {
            if l == id {
                visible += 1;
                let d = obs.depth.data[i];
                if d > 0.0 && d < nearest {
                    nearest = d;
                }
            }
        }
        if visible == 0 || nearest as f64 > params.max_det_range {
            continue;
        }
        if best.is_some_and(|(d, bid, _)| (d, bid) <= (nearest, obj.id)) {
            continue;
        }
        let full = render_isolated(obs.scene, obs.pose, obs.intrinsics, obj.id)
            .data
            .iter()
            .filter(|&&l| l == id)
            .count()
            .max(visible);
        if (visible as f64) < params.min_visible_fraction * full as f64 {
            continue;
        }
        best = Some((nearest, obj.id, full));
    }
    let (_, id, full) = best?;
    let (w, h) = (obs.semantic.width, obs.semantic.height);
    let mask = BinaryMask { width: w, height: h, data: obs.semantic.data.iter().map(|&l| l == id as i32).collect() };
    let confidence = (mask.count() as f64 / full as f64).min(1.0);
    DetectionResult::from_mask(mask, Some(id), confidence)
}

/// Erode the mask with a 3×3 square once; keep the original if that empties it.
pub fn refine_mask(det: &DetectionResult) -> DetectionResult {
    refine_mask_with(det, 3, 1)
}

pub fn refine_mask_with(det: &DetectionResult, kernel: usize, iterations: usize) -> DetectionResult {
    let eroded = erode(&det.mask, kernel, iterations);
    if eroded.is_empty() {
        return det.clone();
    }
    DetectionResult::from_mask(eroded, det.instance_id, det.confidence).expect("non-empty mask")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    Local,
    Global,
}

/// Set of map cells serving as a navigation target. Cells are kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub cells: Vec<Cell>,
    pub source: GoalSource,
}

impl GoalRegion {
    pub fn new(mut cells: Vec<Cell>, source: GoalSource) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self { cells, source }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    /// Distance from a world point to the nearest cell center.
    pub fn distance_to(&self, x: f64, y: f64, resolution: f64) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let (cx, cy) = c.center(resolution);
                (cx - x).hypot(cy - y)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Back-project the mask pixels that carry a valid depth and collect the
/// cells they land in. Cells outside the grid are dropped.
pub fn project_goal(
    det: &DetectionResult,
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    pose: &Pose,
    grid: &OccupancyGrid,
) -> Result<GoalRegion> {
    let origin = [pose.x, pose.y, intr.mount_height];
    let theta = pose.theta();
    let mut cells = Vec::new();
    for (u, v) in det.mask.iter_set() {
        let d = depth.get(u, v) as f64;
        if !(d > 0.0 && d < intr.max_range) {
            continue;
        }
        let dir = intr.ray_direction(u as f64, v as f64, theta);
        let p = [origin[0] + d * dir[0], origin[1] + d * dir[1], origin[2] + d * dir[2]];
        let cell = hit_cell(&origin, &p, grid.resolution());
        if grid.contains(cell) {
            cells.push(cell);
        }
    }
    if cells.is_empty() {
        return Err(Error::Projection);
    }
    Ok(GoalRegion::new(cells, GoalSource::Local))
}

/// Square dilation (`kernel`×`kernel`, repeated `iterations` times) of the
/// region, clipped to the grid bounds.
pub fn dilate_goal_with(region: &GoalRegion, grid: &OccupancyGrid, kernel: usize, iterations: usize) -> GoalRegion {
    let b = grid.bounds();
    let inside: Vec<Cell> = region.cells.iter().copied().filter(|&c| b.contains(c)).collect();
    if inside.is_empty() {
        return region.clone();
    }
    let mut mask = BinaryMask::new(b.cols as usize, b.rows as usize);
    for c in &inside {
        mask.set((c.col - b.col0) as usize, (c.row - b.row0) as usize, true);
    }
    let grown = dilate(&mask, kernel, iterations);
    let cells = grown.iter_set().map(|(x, y)| Cell::new(b.row0 + y as i64, b.col0 + x as i64)).collect();
    GoalRegion::new(cells, region.source)
}

/// Dilation with a 5×5 kernel applied three times.
pub fn dilate_goal(region: &GoalRegion, grid: &OccupancyGrid) -> GoalRegion {
    dilate_goal_with(region, grid, 5, 3)
}

/// Bounding rectangle of a region, if any.
pub fn region_bounds(region: &GoalRegion) -> Option<CellRect> {
    CellRect::bounding(region.cells.iter())
}
