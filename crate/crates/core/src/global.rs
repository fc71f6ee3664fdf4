//! Block partition of the explored map, the advisor context image, block
//! selection with visited-memory exclusion, and the destination-update flag.

use serde::{Deserialize, Serialize};

use crate::advisor::{summarize_answer, Advisor, AdvisorAnswer, AdvisorQuery};
use crate::error::{Error, Result};
use crate::geometry::{Cell, CellRect, Pose};
use crate::mapping::{CellState, OccupancyGrid, CHUNK};
use crate::perception::GoalRegion;
use crate::raster::{text_width, Rgb, RgbImage, GLYPH_HEIGHT};

/// Upper bound on advisor calls per block choice.
pub const MAX_ADVISOR_CALLS: usize = 4;

pub const UNKNOWN_COLOR: Rgb = [128, 128, 128];
pub const FREE_COLOR: Rgb = [255, 255, 255];
pub const OBSTACLE_COLOR: Rgb = [0, 0, 0];
pub const BLOCK_LINE_COLOR: Rgb = [40, 90, 220];
pub const LABEL_COLOR: Rgb = [200, 0, 0];
pub const TRAJECTORY_COLOR: Rgb = [0, 160, 0];
pub const PATH_COLOR: Rgb = [255, 140, 0];
pub const POSE_COLOR: Rgb = [220, 0, 160];
/// Pixel scale of block numerals.
pub const LABEL_SCALE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: u32,
    pub rect: CellRect,
}

impl Block {
    /// Cell at the middle of the block rectangle.
    pub fn center_cell(&self) -> Cell {
        Cell::new(self.rect.row0 + self.rect.rows / 2, self.rect.col0 + self.rect.cols / 2)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub block_size: usize,
    pub blocks: Vec<Block>,
}

impl BlockGrid {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.id).collect()
    }

    pub fn get(&self, id: u32) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn block_of(&self, cell: Cell) -> Option<u32> {
        self.blocks.iter().find(|b| b.rect.contains(cell)).map(|b| b.id)
    }
}

/// Tile the grid from its origin; blocks holding at least one observed cell
/// get ids 1, 2, ... in row-major order. Edge tiles are clipped to the grid.
pub fn build_blocks(grid: &OccupancyGrid, block_size: usize) -> BlockGrid {
    assert!(block_size > 0, "block size must be positive");
    let b = grid.bounds();
    let s = block_size as i64;
    let mut blocks = Vec::new();
    let mut r = b.row0;
    while r < b.row0 + b.rows {
        let mut c = b.col0;
        while c < b.col0 + b.cols {
            let rect = CellRect::new(r, c, s, s).intersect(&b);
            if rect.cells().any(|cell| grid.get(cell) != CellState::Unknown) {
                blocks.push(Block { id: blocks.len() as u32 + 1, rect });
            }
            c += s;
        }
        r += s;
    }
    BlockGrid { block_size, blocks }
}

/// World-frame points the agent has been sent to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitedMemory {
    pub points: Vec<(f64, f64)>,
    pub vicinity_radius: f64,
}

impl VisitedMemory {
    pub fn new(vicinity_radius: f64) -> Self {
        Self { points: Vec::new(), vicinity_radius }
    }

    pub fn is_near(&self, x: f64, y: f64) -> bool {
        self.points.iter().any(|&(px, py)| (px - x).hypot(py - y) < self.vicinity_radius)
    }

    pub fn record(&mut self, x: f64, y: f64) {
        self.points.push((x, y));
    }
}

/// Inputs of the destination-update flag.
#[derive(Clone, Debug, PartialEq)]
pub struct NavState {
    pub steps_since_destination: usize,
    pub endurance_limit: usize,
    pub short_term_goal: Option<GoalRegion>,
    pub last_plan_failed: bool,
    /// Distance at which the short-term goal counts as reached, meters.
    pub reach_threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateReason {
    Initial,
    GoalReached,
    Endurance,
    PlanFailed,
}

/// The first of the three update conditions that holds, if any.
pub fn update_reason(state: &NavState, pose: &Pose, resolution: f64) -> Option<UpdateReason> {
    if let Some(goal) = &state.short_term_goal {
        if goal.distance_to(pose.x, pose.y, resolution) <= state.reach_threshold {
            return Some(UpdateReason::GoalReached);
        }
    }
    if state.steps_since_destination > state.endurance_limit {
        return Some(UpdateReason::Endurance);
    }
    if state.last_plan_failed {
        return Some(UpdateReason::PlanFailed);
    }
    None
}

pub fn should_update_destination(state: &NavState, pose: &Pose, resolution: f64) -> bool {
    update_reason(state, pose, resolution).is_some()
}

/// Free cells 4-adjacent to an Unknown cell; cells beyond the grid are Unknown.
pub fn frontier_cells(grid: &OccupancyGrid) -> Vec<Cell> {
    grid.iter()
        .filter(|&(c, s)| {
            s == CellState::Free
                && [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .any(|&(dr, dc)| grid.get(c.offset(dr, dc)) == CellState::Unknown)
        })
        .map(|(c, _)| c)
        .collect()
}

/// Lowest id not excluded, or the lowest id if every block is excluded.
fn lowest_allowed(blocks: &BlockGrid, excluded: &[u32]) -> Option<u32> {
    blocks.ids().into_iter().find(|id| !excluded.contains(id)).or_else(|| blocks.ids().first().copied())
}

/// Heuristic advisor: the block holding the frontier cell nearest the robot.
pub fn frontier_advisor(query: &AdvisorQuery, blocks: &BlockGrid, grid: &OccupancyGrid, pose: &Pose) -> AdvisorAnswer {
    let robot = pose.cell(grid.resolution());
    let best = frontier_cells(grid)
        .into_iter()
        .filter_map(|c| {
            let id = blocks.block_of(c)?;
            (!query.excluded_ids.contains(&id)).then_some((c.squared_distance(&robot), id))
        })
        .min();
    let id = best.map(|(_, id)| id).or_else(|| lowest_allowed(blocks, &query.excluded_ids));
    AdvisorAnswer::new(id.map(|i| i.to_string()).unwrap_or_default())
}

/// Free cell of the block nearest its center; failing that, the Free cell
/// nearest the center anywhere; failing that, the center itself.
pub fn block_destination(grid: &OccupancyGrid, block: &Block) -> Cell {
    let center = block.center_cell();
    let nearest = |cells: &mut dyn Iterator<Item = Cell>| {
        cells.filter(|&c| grid.get(c) == CellState::Free).min_by_key(|c| (c.squared_distance(&center), *c))
    };
    nearest(&mut block.rect.cells())
        .or_else(|| nearest(&mut grid.bounds().cells()))
        .unwrap_or(center)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockChoice {
    pub block: u32,
    pub destination: Cell,
    /// Queries sent, in order (including ones answered by the fallback).
    pub queries: Vec<AdvisorQuery>,
    pub answers: Vec<AdvisorAnswer>,
    /// Set once the advisor failed and the frontier heuristic took over.
    pub used_fallback: bool,
}

/// Ask the advisor (or the frontier heuristic when `advisor` is `None`) for a
/// block, excluding answers near visited destinations, and record the chosen
/// destination in `memory`.
#[allow(clippy::too_many_arguments)]
pub fn choose_block(
    advisor: Option<&dyn Advisor>,
    goal: &str,
    context_image: &[u8],
    memory: &mut VisitedMemory,
    blocks: &BlockGrid,
    grid: &OccupancyGrid,
    pose: &Pose,
) -> Result<BlockChoice> {
    if blocks.is_empty() {
        return Err(Error::Planning("no labeled blocks to choose from".into()));
    }
    let res = grid.resolution();
    let valid = blocks.ids();
    let visited = |memory: &VisitedMemory, block: &Block| {
        let (cx, cy) = block.rect.center_point(res);
        let (dx, dy) = block_destination(grid, block).center(res);
        memory.is_near(cx, cy) || memory.is_near(dx, dy)
    };
    let mut excluded: Vec<u32> = Vec::new();
    let mut queries = Vec::new();
    let mut answers = Vec::new();
    let mut used_fallback = advisor.is_none();
    let mut chosen = None;
    for _ in 0..MAX_ADVISOR_CALLS {
        let query = AdvisorQuery {
            context_image: context_image.to_vec(),
            goal_category: goal.to_string(),
            excluded_ids: excluded.clone(),
            valid_ids: valid.clone(),
        };
        let answer = match advisor.filter(|_| !used_fallback) {
            Some(a) => a.query(&query).unwrap_or_else(|e| {
                log::warn!("advisor failed ({e}); using the frontier heuristic");
                used_fallback = true;
                frontier_advisor(&query, blocks, grid, pose)
            }),
            None => frontier_advisor(&query, blocks, grid, pose),
        };
        let id = if valid.len() == 1 { Some(valid[0]) } else { summarize_answer(&answer, &valid, &excluded) };
        queries.push(query);
        answers.push(answer);
        let Some(id) = id else { continue };
        if valid.len() > 1 && visited(memory, blocks.get(id).expect("valid id")) {
            excluded.push(id);
            continue;
        }
        chosen = Some(id);
        break;
    }
    let block = chosen.unwrap_or_else(|| {
        blocks
            .blocks
            .iter()
            .find(|b| !excluded.contains(&b.id) && !visited(memory, b))
            .map(|b| b.id)
            .or_else(|| lowest_allowed(blocks, &excluded))
            .expect("blocks are non-empty")
    });
    let destination = block_destination(grid, blocks.get(block).expect("chosen id is valid"));
    let (x, y) = destination.center(res);
    memory.record(x, y);
    Ok(BlockChoice { block, destination, queries, answers, used_fallback })
}

/// Everything drawn on a top-down rendering.
#[derive(Clone, Copy, Debug, Default)]
pub struct MapOverlay<'a> {
    pub blocks: Option<&'a BlockGrid>,
    pub pose: Option<&'a Pose>,
    pub trajectory: &'a [Pose],
    pub path: &'a [(f64, f64)],
}

/// Top-down raster, one pixel per cell; image row `k` is grid row `row0 + k`.
/// An empty grid renders as a gray chunk at the world origin.
pub fn render_map(grid: &OccupancyGrid, overlay: &MapOverlay<'_>) -> RgbImage {
    let b = if grid.bounds().is_empty() { CellRect::new(0, 0, CHUNK, CHUNK) } else { grid.bounds() };
    let res = grid.resolution();
    let mut img = RgbImage::new(b.cols as usize, b.rows as usize, UNKNOWN_COLOR);
    for (cell, state) in grid.observed() {
        let color = if state == CellState::Free { FREE_COLOR } else { OBSTACLE_COLOR };
        img.put((cell.col - b.col0) as usize, (cell.row - b.row0) as usize, color);
    }
    let to_px = |x: f64, y: f64| (x / res - b.col0 as f64, y / res - b.row0 as f64);
    let round = |(x, y): (f64, f64)| (x.floor() as i64, y.floor() as i64);

    if let Some(blocks) = overlay.blocks {
        for block in &blocks.blocks {
            let r = block.rect;
            let (x0, y0) = (r.col0 - b.col0, r.row0 - b.row0);
            let (x1, y1) = (x0 + r.cols - 1, y0 + r.rows - 1);
            img.draw_line((x0, y0), (x1, y0), BLOCK_LINE_COLOR);
            img.draw_line((x0, y1), (x1, y1), BLOCK_LINE_COLOR);
            img.draw_line((x0, y0), (x0, y1), BLOCK_LINE_COLOR);
            img.draw_line((x1, y0), (x1, y1), BLOCK_LINE_COLOR);
        }
    }
    for pair in overlay.trajectory.windows(2) {
        img.draw_line(round(to_px(pair[0].x, pair[0].y)), round(to_px(pair[1].x, pair[1].y)), TRAJECTORY_COLOR);
    }
    for pair in overlay.path.windows(2) {
        img.draw_line(round(to_px(pair[0].0, pair[0].1)), round(to_px(pair[1].0, pair[1].1)), PATH_COLOR);
    }
    if let Some(blocks) = overlay.blocks {
        for block in &blocks.blocks {
            let (x, y) = label_origin(block, &b);
            let text = block.id.to_string();
            let w = text_width(&text, LABEL_SCALE) as i64;
            let h = (GLYPH_HEIGHT * LABEL_SCALE) as i64;
            img.fill_rect(x - 1, y - 1, w + 2, h + 2, FREE_COLOR);
            img.draw_text(x, y, &text, LABEL_SCALE, LABEL_COLOR);
        }
    }
    if let Some(p) = overlay.pose {
        let (x, y) = to_px(p.x, p.y);
        img.draw_arrow(x, y, p.theta(), 8.0, POSE_COLOR);
    }
    img
}

/// Top-left pixel of a block's numeral, centered on the block.
pub fn label_origin(block: &Block, image_bounds: &CellRect) -> (i64, i64) {
    let text = block.id.to_string();
    let w = text_width(&text, LABEL_SCALE) as i64;
    let h = (GLYPH_HEIGHT * LABEL_SCALE) as i64;
    let cx = block.rect.col0 - image_bounds.col0 + block.rect.cols / 2;
    let cy = block.rect.row0 - image_bounds.row0 + block.rect.rows / 2;
    (cx - w / 2, cy - h / 2)
}

/// PPM context image for the advisor: map, blocks with ids, trajectory, pose.
pub fn render_context_image(grid: &OccupancyGrid, blocks: &BlockGrid, pose: &Pose, trajectory: &[Pose]) -> Vec<u8> {
    render_map(grid, &MapOverlay { blocks: Some(blocks), pose: Some(pose), trajectory, path: &[] }).to_ppm()
}
