//! Shared geometric primitives: world-anchored grid cells, robot poses and
//! exact octile path costs.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Rotation applied by a single turn action (30 degrees).
pub const TURN_ANGLE: f64 = PI / 6.0;
/// Translation applied by a single forward action, in meters.
pub const FORWARD_STEP: f64 = 0.5;
/// Number of turn actions in a full revolution.
pub const TURNS_PER_REVOLUTION: u8 = 12;

/// A grid cell in world-anchored integer coordinates.
///
/// Cell `(row, col)` covers `x in [col * res, (col + 1) * res)` and
/// `y in [row * res, (row + 1) * res)`. The derived ordering is row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: i64,
    pub col: i64,
}

impl Cell {
    pub const fn new(row: i64, col: i64) -> Self {
        Self { row, col }
    }

    /// Cell containing the world point `(x, y)`.
    pub fn containing(x: f64, y: f64, resolution: f64) -> Self {
        Self {
            row: (y / resolution).floor() as i64,
            col: (x / resolution).floor() as i64,
        }
    }

    pub fn center(&self, resolution: f64) -> (f64, f64) {
        (
            (self.col as f64 + 0.5) * resolution,
            (self.row as f64 + 0.5) * resolution,
        )
    }

    pub fn offset(&self, drow: i64, dcol: i64) -> Self {
        Self::new(self.row + drow, self.col + dcol)
    }

    pub fn squared_distance(&self, other: &Cell) -> i64 {
        let dr = self.row - other.row;
        let dc = self.col - other.col;
        dr * dr + dc * dc
    }

    pub fn chebyshev(&self, other: &Cell) -> i64 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }

    /// Euclidean distance from a world point to the closed square of this cell.
    pub fn distance_to_point(&self, x: f64, y: f64, resolution: f64) -> f64 {
        let x0 = self.col as f64 * resolution;
        let y0 = self.row as f64 * resolution;
        let dx = (x0 - x).max(0.0).max(x - (x0 + resolution));
        let dy = (y0 - y).max(0.0).max(y - (y0 + resolution));
        dx.hypot(dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Inclusive-exclusive rectangle of cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellRect {
    pub row0: i64,
    pub col0: i64,
    pub rows: i64,
    pub cols: i64,
}

impl CellRect {
    pub const fn new(row0: i64, col0: i64, rows: i64, cols: i64) -> Self {
        Self { row0, col0, rows, cols }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row >= self.row0
            && cell.row < self.row0 + self.rows
            && cell.col >= self.col0
            && cell.col < self.col0 + self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows <= 0 || self.cols <= 0
    }

    /// Geometric center in world coordinates.
    pub fn center_point(&self, resolution: f64) -> (f64, f64) {
        (
            (self.col0 as f64 + self.cols as f64 / 2.0) * resolution,
            (self.row0 as f64 + self.rows as f64 / 2.0) * resolution,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.row0..self.row0 + self.rows)
            .flat_map(move |r| (self.col0..self.col0 + self.cols).map(move |c| Cell::new(r, c)))
    }

    /// Smallest rectangle covering both.
    pub fn union(&self, other: &CellRect) -> CellRect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let r0 = self.row0.min(other.row0);
        let c0 = self.col0.min(other.col0);
        let r1 = (self.row0 + self.rows).max(other.row0 + other.rows);
        let c1 = (self.col0 + self.cols).max(other.col0 + other.cols);
        CellRect::new(r0, c0, r1 - r0, c1 - c0)
    }

    pub fn intersect(&self, other: &CellRect) -> CellRect {
        let r0 = self.row0.max(other.row0);
        let c0 = self.col0.max(other.col0);
        let r1 = (self.row0 + self.rows).min(other.row0 + other.rows);
        let c1 = (self.col0 + self.cols).min(other.col0 + other.cols);
        CellRect::new(r0, c0, (r1 - r0).max(0), (c1 - c0).max(0))
    }

    /// Bounding rectangle of a set of cells; `None` when empty.
    pub fn bounding<'a>(cells: impl IntoIterator<Item = &'a Cell>) -> Option<CellRect> {
        let mut it = cells.into_iter();
        let first = it.next()?;
        let (mut r0, mut r1, mut c0, mut c1) = (first.row, first.row, first.col, first.col);
        for c in it {
            r0 = r0.min(c.row);
            r1 = r1.max(c.row);
            c0 = c0.min(c.col);
            c1 = c1.max(c.col);
        }
        Some(CellRect::new(r0, c0, r1 - r0 + 1, c1 - c0 + 1))
    }
}

/// Normalize an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed smallest rotation from `from` to `to`, in `(-π, π]`, counterclockwise positive.
pub fn signed_angle(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Robot pose in the world frame.
///
/// The heading is stored as a residual in `[0, π/6)` plus a count of whole
/// 30° turns, so turn actions are exact and twelve turns restore the
/// original heading bit-for-bit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    residual: f64,
    turns: u8,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        let theta = normalize_angle(theta);
        let mut turns = (theta / TURN_ANGLE).floor() as i64;
        let mut residual = theta - turns as f64 * TURN_ANGLE;
        if residual < 0.0 {
            turns -= 1;
            residual += TURN_ANGLE;
        }
        if residual >= TURN_ANGLE {
            turns += 1;
            residual -= TURN_ANGLE;
        }
        let turns = turns.rem_euclid(TURNS_PER_REVOLUTION as i64) as u8;
        Self { x, y, residual, turns }
    }

    /// Heading in radians, counterclockwise from +x, in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        self.residual + self.turns as f64 * TURN_ANGLE
    }

    pub fn turned(&self, left: bool) -> Self {
        let n = TURNS_PER_REVOLUTION;
        let turns = if left { (self.turns + 1) % n } else { (self.turns + n - 1) % n };
        Self { turns, ..*self }
    }

    pub fn translated(&self, distance: f64) -> Self {
        let th = self.theta();
        Self {
            x: self.x + distance * th.cos(),
            y: self.y + distance * th.sin(),
            ..*self
        }
    }

    pub fn cell(&self, resolution: f64) -> Cell {
        Cell::containing(self.x, self.y, resolution)
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    x: f64,
    y: f64,
    theta: f64,
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRepr { x: self.x, y: self.y, theta: self.theta() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(d)?;
        Ok(Pose::new(r.x, r.y, r.theta))
    }
}

/// Exact cost of an 8-connected grid path: `straight + diagonal * √2` cell lengths.
///
/// Comparison is exact (no floating point), so two searches that find
/// equally short paths report identical costs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OctileCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCost {
    pub const ZERO: OctileCost = OctileCost { straight: 0, diagonal: 0 };
    pub const STRAIGHT: OctileCost = OctileCost { straight: 1, diagonal: 0 };
    pub const DIAGONAL: OctileCost = OctileCost { straight: 0, diagonal: 1 };

    /// Octile distance between two cells (admissible and consistent).
    pub fn between(a: Cell, b: Cell) -> Self {
        let dr = (a.row - b.row).unsigned_abs();
        let dc = (a.col - b.col).unsigned_abs();
        let diag = dr.min(dc);
        let straight = dr.max(dc) - diag;
        Self { straight: straight as u32, diagonal: diag as u32 }
    }

    /// Length in cell units.
    pub fn cells(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn meters(&self, resolution: f64) -> f64 {
        self.cells() * resolution
    }
}

impl std::ops::Add for OctileCost {
    type Output = OctileCost;
    fn add(self, o: OctileCost) -> OctileCost {
        OctileCost {
            straight: self.straight + o.straight,
            diagonal: self.diagonal + o.diagonal,
        }
    }
}

impl Ord for OctileCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of (a1 - a2) + (b1 - b2)·√2
        let d = self.straight as i128 - other.straight as i128;
        let e = other.diagonal as i128 - self.diagonal as i128;
        // compare d with e·√2
        match (d >= 0, e >= 0) {
            (true, false) => {
                if d == 0 && e == 0 {
                    Ordering::Equal
                } else {
                    Ordering::Greater
                }
            }
            (false, true) => Ordering::Less,
            (true, true) => (d * d).cmp(&(2 * e * e)),
            (false, false) => (2 * e * e).cmp(&(d * d)),
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
