use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, Pose, FORWARD_STEP};

/// Default wall height for generated scenes, in meters.
pub const DEFAULT_WALL_HEIGHT: f64 = 2.5;

/// What occupies a ground-truth cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Occupant {
    Free,
    Wall { height: f64 },
    Object { id: u32, height: f64 },
}

impl Occupant {
    pub fn height(&self) -> f64 {
        match *self {
            Occupant::Free => 0.0,
            Occupant::Wall { height } | Occupant::Object { height, .. } => height,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Occupant::Free)
    }

    /// Semantic label: 0 background, -1 wall, object id otherwise.
    pub fn label(&self) -> i32 {
        match *self {
            Occupant::Free => 0,
            Occupant::Wall { .. } => -1,
            Occupant::Object { id, .. } => id as i32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectInstance {
    pub id: u32,
    pub category: String,
    pub footprint: Vec<Cell>,
    pub top_height: f64,
}

impl ObjectInstance {
    /// Distance from a world point to the nearest footprint cell.
    pub fn distance_to(&self, x: f64, y: f64, resolution: f64) -> f64 {
        self.footprint
            .iter()
            .map(|c| c.distance_to_point(x, y, resolution))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Immutable ground-truth 2.5D world.
///
/// Cell `(row, col)` of the scene is world cell `(row, col)`: the scene's
/// lower-left corner sits at the world origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    name: String,
    resolution: f64,
    width: usize,
    height: usize,
    walls: Vec<f64>,
    objects: Vec<ObjectInstance>,
    occupancy: Vec<Occupant>,
}

impl Scene {
    /// Build a scene from wall heights (row-major, 0 = free) and objects,
    /// checking every structural invariant.
    pub fn new(
        name: impl Into<String>,
        resolution: f64,
        width: usize,
        height: usize,
        walls: Vec<f64>,
        objects: Vec<ObjectInstance>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if !(resolution > 0.0 && resolution.is_finite()) {
            return bad(format!("resolution must be positive, got {resolution}"));
        }
        if width < 3 || height < 3 {
            return bad(format!("scene must be at least 3x3 cells, got {width}x{height}"));
        }
        if walls.len() != width * height {
            return bad(format!("expected {} cells, got {}", width * height, walls.len()));
        }
        if let Some(h) = walls.iter().find(|h| !(h.is_finite() && **h >= 0.0)) {
            return bad(format!("wall heights must be finite and non-negative, got {h}"));
        }
        for r in 0..height {
            for c in 0..width {
                let boundary = r == 0 || c == 0 || r == height - 1 || c == width - 1;
                if boundary && walls[r * width + c] <= 0.0 {
                    return bad(format!("boundary cell ({r}, {c}) is not a wall"));
                }
            }
        }
        let mut occupancy: Vec<Occupant> = walls
            .iter()
            .map(|&h| if h > 0.0 { Occupant::Wall { height: h } } else { Occupant::Free })
            .collect();
        let mut ids = HashSet::new();
        for obj in &objects {
            if obj.id == 0 || obj.id > i32::MAX as u32 {
                return bad(format!("object id {} out of range", obj.id));
            }
            if !ids.insert(obj.id) {
                return bad(format!("duplicate object id {}", obj.id));
            }
            if obj.footprint.is_empty() {
                return bad(format!("object {} has an empty footprint", obj.id));
            }
            if !(obj.top_height > 0.0 && obj.top_height.is_finite()) {
                return bad(format!("object {} has invalid height", obj.id));
            }
            for cell in &obj.footprint {
                if cell.row < 0 || cell.col < 0 || cell.row >= height as i64 || cell.col >= width as i64 {
                    return bad(format!("object {} cell {cell} out of bounds", obj.id));
                }
                let idx = cell.row as usize * width + cell.col as usize;
                match occupancy[idx] {
                    Occupant::Free => {}
                    Occupant::Wall { .. } => return bad(format!("object {} overlaps wall at {cell}", obj.id)),
                    Occupant::Object { id, .. } => {
                        return bad(format!("objects {} and {id} overlap at {cell}", obj.id))
                    }
                }
                occupancy[idx] = Occupant::Object { id: obj.id, height: obj.top_height };
            }
            if !is_four_connected(&obj.footprint) {
                return bad(format!("object {} footprint is not 4-connected", obj.id));
            }
        }
        Ok(Self {
            name: name.into(),
            resolution,
            width,
            height,
            walls,
            objects,
            occupancy,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn object(&self, id: u32) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn objects_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        self.objects.iter().filter(move |o| o.category == category)
    }

    /// Sorted, deduplicated object categories.
    pub fn categories(&self) -> Vec<String> {
        self.objects
            .iter()
            .map(|o| o.category.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row >= 0 && cell.col >= 0 && cell.row < self.height as i64 && cell.col < self.width as i64
    }

    /// Occupant of a cell; cells outside the scene read as walls.
    pub fn occupant(&self, cell: Cell) -> Occupant {
        if self.in_bounds(cell) {
            self.occupancy[cell.row as usize * self.width + cell.col as usize]
        } else {
            Occupant::Wall { height: DEFAULT_WALL_HEIGHT }
        }
    }

    pub fn wall_height(&self, cell: Cell) -> f64 {
        if self.in_bounds(cell) {
            self.walls[cell.row as usize * self.width + cell.col as usize]
        } else {
            0.0
        }
    }

    /// True when a disc of `radius` centered at `(x, y)` overlaps any
    /// wall or object cell (or leaves the scene).
    pub fn disc_collides(&self, x: f64, y: f64, radius: f64) -> bool {
        let res = self.resolution;
        let r0 = ((y - radius) / res).floor() as i64;
        let r1 = ((y + radius) / res).floor() as i64;
        let c0 = ((x - radius) / res).floor() as i64;
        let c1 = ((x + radius) / res).floor() as i64;
        for row in r0..=r1 {
            for col in c0..=c1 {
                let cell = Cell::new(row, col);
                if !self.occupant(cell).is_free() && cell.distance_to_point(x, y, res) < radius {
                    return true;
                }
            }
        }
        false
    }

    /// Pose validity: inside the scene and the robot disc touches no occupied cell.
    pub fn pose_is_valid(&self, pose: &Pose, robot_radius: f64) -> bool {
        self.in_bounds(pose.cell(self.resolution)) && !self.disc_collides(pose.x, pose.y, robot_radius)
    }

    /// Ground-truth traversability per cell: the robot disc centered on the
    /// cell center is collision free.
    pub fn traversable_mask(&self, robot_radius: f64) -> Vec<bool> {
        let res = self.resolution;
        let mut out = vec![false; self.width * self.height];
        for r in 0..self.height {
            for c in 0..self.width {
                let cell = Cell::new(r as i64, c as i64);
                if self.occupant(cell).is_free() {
                    let (x, y) = cell.center(res);
                    out[r * self.width + c] = !self.disc_collides(x, y, robot_radius);
                }
            }
        }
        out
    }

    /// Serialize to the documented JSON scene format.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SceneFile::from(self)).expect("scene serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn is_four_connected(cells: &[Cell]) -> bool {
    let set: HashSet<Cell> = cells.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([cells[0]]);
    seen.insert(cells[0]);
    while let Some(c) = queue.pop_front() {
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let n = c.offset(dr, dc);
            if set.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Outcome of one simulated action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub pose: Pose,
    pub collided: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

/// Sample spacing for swept-disc collision checks, in meters.
const SWEEP_STEP: f64 = 0.01;

/// Apply one atomic action. A forward move whose swept disc would touch a
/// wall or object leaves the pose unchanged and reports a collision.
pub fn step_action(scene: &Scene, pose: &Pose, action: Action, robot_radius: f64) -> StepOutcome {
    match action {
        Action::TurnLeft => StepOutcome { pose: pose.turned(true), collided: false },
        Action::TurnRight => StepOutcome { pose: pose.turned(false), collided: false },
        Action::Stop => StepOutcome { pose: *pose, collided: false },
        Action::Forward => {
            let n = (FORWARD_STEP / SWEEP_STEP).ceil() as usize;
            let spacing = FORWARD_STEP / n as f64;
            // Discs of radius r + spacing/2 at the samples cover the swept region.
            let check_radius = robot_radius + spacing / 2.0;
            let th = pose.theta();
            let (dx, dy) = (th.cos(), th.sin());
            for i in 0..=n {
                let s = i as f64 * spacing;
                if scene.disc_collides(pose.x + s * dx, pose.y + s * dy, check_radius) {
                    return StepOutcome { pose: *pose, collided: true };
                }
            }
            StepOutcome { pose: pose.translated(FORWARD_STEP), collided: false }
        }
    }
}

// JSON file format

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    resolution: f64,
    width: usize,
    height: usize,
    /// Per row: `[value, run_length]` pairs.
    cells: Vec<Vec<(f64, usize)>>,
    objects: Vec<ObjectFile>,
    name: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    id: u32,
    category: String,
    cells: Vec<[i64; 2]>,
    top_height: f64,
}

impl From<&Scene> for SceneFile {
    fn from(s: &Scene) -> Self {
        let cells = s
            .walls
            .chunks(s.width)
            .map(|row| {
                let mut runs: Vec<(f64, usize)> = Vec::new();
                for &v in row {
                    match runs.last_mut() {
                        Some((last, n)) if last.to_bits() == v.to_bits() => *n += 1,
                        _ => runs.push((v, 1)),
                    }
                }
                runs
            })
            .collect();
        SceneFile {
            resolution: s.resolution,
            width: s.width,
            height: s.height,
            cells,
            objects: s
                .objects
                .iter()
                .map(|o| ObjectFile {
                    id: o.id,
                    category: o.category.clone(),
                    cells: o.footprint.iter().map(|c| [c.row, c.col]).collect(),
                    top_height: o.top_height,
                })
                .collect(),
            name: s.name.clone(),
        }
    }
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Self> {
        if f.cells.len() != f.height {
            return Err(Error::InvalidScene(format!("expected {} rows, got {}", f.height, f.cells.len())));
        }
        let mut walls = Vec::with_capacity(f.width * f.height);
        for (r, row) in f.cells.iter().enumerate() {
            let before = walls.len();
            for &(v, n) in row {
                walls.extend(std::iter::repeat(v).take(n));
            }
            if walls.len() - before != f.width {
                return Err(Error::InvalidScene(format!("row {r} decodes to {} cells", walls.len() - before)));
            }
        }
        let objects = f
            .objects
            .into_iter()
            .map(|o| ObjectInstance {
                id: o.id,
                category: o.category,
                footprint: o.cells.into_iter().map(|[r, c]| Cell::new(r, c)).collect(),
                top_height: o.top_height,
            })
            .collect();
        Scene::new(f.name, f.resolution, f.width, f.height, walls, objects)
    }
}

#[cfg(test)]
pub(crate) mod test_scenes {
    use super::*;

    /// A rectangular room with boundary walls and no interior structure.
    pub fn empty_room(width: usize, height: usize) -> (Vec<f64>, usize, usize) {
        let mut walls = vec![0.0; width * height];
        for r in 0..height {
            for c in 0..width {
                if r == 0 || c == 0 || r == height - 1 || c == width - 1 {
                    walls[r * width + c] = DEFAULT_WALL_HEIGHT;
                }
            }
        }
        (walls, width, height)
    }
}
