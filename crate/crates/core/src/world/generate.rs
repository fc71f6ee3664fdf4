//! Procedural multi-room floorplans: recursive splitting of the interior into
//! rectangular rooms joined by door gaps, then object placement with wall
//! clearance and a reachability check.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{ObjectInstance, Scene, DEFAULT_WALL_HEIGHT};
use crate::error::{Error, Result};
use crate::geometry::{Cell, CellRect};

/// Smallest room side produced by a split, in cells.
const MIN_ROOM_SIDE: i64 = 24;
/// Door gap width, in cells.
const DOOR_WIDTH: i64 = 20;
const MAX_PLACEMENT_ATTEMPTS: usize = 400;
/// Robot radius used for the generator's reachability check.
const GEN_ROBOT_RADIUS: f64 = 0.18;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams {
    pub rooms: usize,
    pub width: usize,
    pub height: usize,
    pub objects: Vec<String>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_wall_height")]
    pub wall_height: f64,
}

fn default_resolution() -> f64 {
    0.05
}

fn default_wall_height() -> f64 {
    DEFAULT_WALL_HEIGHT
}

impl SceneParams {
    pub fn new(rooms: usize, width: usize, height: usize, objects: &[&str]) -> Self {
        Self {
            rooms,
            width,
            height,
            objects: objects.iter().map(|s| s.to_string()).collect(),
            resolution: default_resolution(),
            wall_height: default_wall_height(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rooms < 1 {
            return Err(Error::param("rooms", "at least one room is required"));
        }
        if self.width < 16 {
            return Err(Error::param("width", format!("must be >= 16 cells, got {}", self.width)));
        }
        if self.height < 16 {
            return Err(Error::param("height", format!("must be >= 16 cells, got {}", self.height)));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::param("resolution", "must be positive"));
        }
        if !(self.wall_height > 1.2) {
            return Err(Error::param("wall_height", "must exceed 1.2 m"));
        }
        if let Some(bad) = self.objects.iter().find(|c| c.trim().is_empty()) {
            return Err(Error::param("objects", format!("empty category name {bad:?}")));
        }
        Ok(())
    }
}

/// Footprint (rows, cols) in cells and top height in meters for a category.
pub fn object_template(category: &str) -> (i64, i64, f64) {
    match category {
        "bed" => (8, 12, 0.5),
        "plant" => (4, 4, 0.9),
        "toilet" => (5, 6, 0.45),
        "chair" => (6, 6, 0.9),
        "sofa" => (7, 14, 0.8),
        "tv" | "tv_monitor" => (3, 10, 1.1),
        "table" => (8, 8, 0.75),
        "lamp" => (3, 3, 1.0),
        "nightstand" => (5, 5, 0.55),
        _ => (6, 6, 0.6),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    /// Interior (free) rectangle of every room.
    pub rooms: Vec<CellRect>,
    /// Door gaps cut into interior walls.
    pub doors: Vec<CellRect>,
}

impl Layout {
    pub fn room_centers(&self) -> Vec<Cell> {
        self.rooms
            .iter()
            .map(|r| Cell::new(r.row0 + r.rows / 2, r.col0 + r.cols / 2))
            .collect()
    }
}

/// Deterministic scene for fixed `(seed, params)`.
pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<Scene> {
    generate_scene_with_layout(seed, params).map(|(s, _)| s)
}

pub fn generate_scene_with_layout(seed: u64, params: &SceneParams) -> Result<(Scene, Layout)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width, params.height);
    let mut walls = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                walls[r * w + c] = params.wall_height;
            }
        }
    }
    let layout = split_rooms(&mut rng, params, &mut walls)?;
    let name = format!("scene_s{seed}_r{}_{w}x{h}", params.rooms);

    let mut objects: Vec<ObjectInstance> = Vec::new();
    for (i, category) in params.objects.iter().enumerate() {
        let obj = place_object(&mut rng, params, &walls, &layout, &objects, category, i as u32 + 1)?;
        objects.push(obj);
    }
    let scene = Scene::new(name, params.resolution, w, h, walls, objects)?;
    Ok((scene, layout))
}

fn split_rooms(rng: &mut ChaCha8Rng, params: &SceneParams, walls: &mut [f64]) -> Result<Layout> {
    let w = params.width;
    let mut rooms = vec![CellRect::new(1, 1, params.height as i64 - 2, w as i64 - 2)];
    let mut doors: Vec<CellRect> = Vec::new();
    while rooms.len() < params.rooms {
        let (ri, room) = rooms
            .iter()
            .copied()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| (a.rows * a.cols).cmp(&(b.rows * b.cols)).then(ib.cmp(ia)))
            .expect("at least one room");
        // A horizontal wall (a row) splits tall rooms; a vertical one splits wide rooms.
        let horizontal = room.rows > room.cols;
        let (lo, hi) = if horizontal { (room.row0, room.row0 + room.rows) } else { (room.col0, room.col0 + room.cols) };
        let (span_lo, span_hi) = if horizontal { (room.col0, room.col0 + room.cols) } else { (room.row0, room.row0 + room.rows) };
        let candidates: Vec<i64> = (lo + MIN_ROOM_SIDE..hi - MIN_ROOM_SIDE)
            .filter(|&s| {
                // Keep the new wall's ends clear of doors in the walls it meets.
                doors.iter().all(|d| {
                    let end_a = if horizontal { Cell::new(s, span_lo - 1) } else { Cell::new(span_lo - 1, s) };
                    let end_b = if horizontal { Cell::new(s, span_hi) } else { Cell::new(span_hi, s) };
                    let grown = CellRect::new(d.row0 - 3, d.col0 - 3, d.rows + 6, d.cols + 6);
                    !grown.contains(end_a) && !grown.contains(end_b)
                })
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::param(
                "rooms",
                format!("{} rooms do not fit in {}x{} cells", params.rooms, params.width, params.height),
            ));
        }
        let s = candidates[rng.gen_range(0..candidates.len())];
        let span = span_hi - span_lo;
        let door_w = DOOR_WIDTH.min(span - 4).max(1);
        let door_at = rng.gen_range(span_lo + 2..=span_hi - 2 - door_w);
        for t in span_lo..span_hi {
            if t >= door_at && t < door_at + door_w {
                continue;
            }
            let (r, c) = if horizontal { (s, t) } else { (t, s) };
            walls[r as usize * w + c as usize] = params.wall_height;
        }
        doors.push(if horizontal {
            CellRect::new(s, door_at, 1, door_w)
        } else {
            CellRect::new(door_at, s, door_w, 1)
        });
        let (a, b) = if horizontal {
            (
                CellRect::new(room.row0, room.col0, s - room.row0, room.cols),
                CellRect::new(s + 1, room.col0, room.row0 + room.rows - s - 1, room.cols),
            )
        } else {
            (
                CellRect::new(room.row0, room.col0, room.rows, s - room.col0),
                CellRect::new(room.row0, s + 1, room.rows, room.col0 + room.cols - s - 1),
            )
        };
        rooms[ri] = a;
        rooms.push(b);
    }
    Ok(Layout { rooms, doors })
}

fn place_object(
    rng: &mut ChaCha8Rng,
    params: &SceneParams,
    walls: &[f64],
    layout: &Layout,
    placed: &[ObjectInstance],
    category: &str,
    id: u32,
) -> Result<ObjectInstance> {
    let w = params.width as i64;
    let (rows, cols, top) = object_template(category);
    let occupied = |c: Cell| {
        walls[(c.row * w + c.col) as usize] > 0.0 || placed.iter().any(|o| o.footprint.contains(&c))
    };
    let keep_out: Vec<CellRect> = layout
        .doors
        .iter()
        .map(|d| CellRect::new(d.row0 - 8, d.col0 - 8, d.rows + 16, d.cols + 16))
        .chain(
            layout
                .rooms
                .iter()
                .zip(layout.room_centers())
                .filter(|(r, _)| r.rows >= MIN_ROOM_SIDE && r.cols >= MIN_ROOM_SIDE)
                .map(|(_, c)| CellRect::new(c.row - 5, c.col - 5, 11, 11)),
        )
        .collect();

    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let room = layout.rooms[rng.gen_range(0..layout.rooms.len())];
        let (fr, fc) = if rng.gen_bool(0.5) { (rows, cols) } else { (cols, rows) };
        // One free cell of clearance to every wall.
        let r_hi = room.row0 + room.rows - 1 - fr;
        let c_hi = room.col0 + room.cols - 1 - fc;
        if r_hi < room.row0 + 1 || c_hi < room.col0 + 1 {
            continue;
        }
        let r0 = rng.gen_range(room.row0 + 1..=r_hi);
        let c0 = rng.gen_range(room.col0 + 1..=c_hi);
        let rect = CellRect::new(r0, c0, fr, fc);
        let ring = CellRect::new(r0 - 1, c0 - 1, fr + 2, fc + 2);
        if ring.cells().any(occupied) {
            continue;
        }
        if keep_out.iter().any(|k| !k.intersect(&rect).is_empty()) {
            continue;
        }
        let candidate = ObjectInstance {
            id,
            category: category.to_string(),
            footprint: rect.cells().collect(),
            top_height: top,
        };
        if reachable_after(params, walls, layout, placed, &candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::Placement { category: category.to_string(), attempts: MAX_PLACEMENT_ATTEMPTS })
}

/// Room centers stay mutually connected and the new object keeps an
/// approach cell within 0.5 m. Skipped when no room center admits the robot.
fn reachable_after(
    params: &SceneParams,
    walls: &[f64],
    layout: &Layout,
    placed: &[ObjectInstance],
    candidate: &ObjectInstance,
) -> bool {
    let mut objs = placed.to_vec();
    objs.push(candidate.clone());
    let Ok(scene) = Scene::new("probe", params.resolution, params.width, params.height, walls.to_vec(), objs.clone())
    else {
        return false;
    };
    let (w, h) = (params.width as i64, params.height as i64);
    let free = scene.traversable_mask(GEN_ROBOT_RADIUS);
    let ok = |c: Cell| c.row >= 0 && c.col >= 0 && c.row < h && c.col < w && free[(c.row * w + c.col) as usize];
    let centers: Vec<Cell> = layout.room_centers().into_iter().filter(|&c| ok(c)).collect();
    let Some(&seed) = centers.first() else {
        return true;
    };
    let mut seen = vec![false; (w * h) as usize];
    let mut queue = VecDeque::from([seed]);
    seen[(seed.row * w + seed.col) as usize] = true;
    while let Some(c) = queue.pop_front() {
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let n = c.offset(dr, dc);
            if ok(n) && !seen[(n.row * w + n.col) as usize] {
                seen[(n.row * w + n.col) as usize] = true;
                queue.push_back(n);
            }
        }
    }
    let reached = |c: Cell| seen[(c.row * w + c.col) as usize];
    if !centers.iter().all(|&c| reached(c)) {
        return false;
    }
    objs.iter().all(|o| {
        (0..h).any(|r| {
            (0..w).any(|c| {
                let cell = Cell::new(r, c);
                if !reached(cell) {
                    return false;
                }
                let (x, y) = cell.center(params.resolution);
                o.distance_to(x, y, params.resolution) <= 0.5
            })
        })
    })
}
