//! Pinhole depth and semantic sensors, rendered by casting one 2D grid
//! traversal per image column and resolving each pixel's elevation against
//! the occupied cells found along it.

use serde::{Deserialize, Serialize};

use super::scene::{Occupant, Scene};
use crate::error::{Error, Result};
use crate::geometry::{Cell, Pose};

/// Pinhole camera model. Pixel `(u, v)` looks along camera-frame direction
/// `((u - cx) / fx, (v - cy) / fy, 1)` with x right, y down, z forward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub max_range: f64,
    pub mount_height: f64,
}

impl CameraIntrinsics {
    /// Square-pixel camera with the principal point at the image center.
    pub fn from_fov(hfov_deg: f64, width: usize, height: usize, max_range: f64, mount_height: f64) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(Error::param("hfov_deg", "must lie in (0, 180)"));
        }
        let fx = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        let intr = Self {
            fx,
            fy: fx,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            max_range,
            mount_height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::param("fx/fy", "focal lengths must be positive"));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64 && self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::param("cx/cy", "principal point must lie inside the image"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::param("max_range", "must be positive"));
        }
        if !(self.mount_height > 0.0) {
            return Err(Error::param("mount_height", "must be positive"));
        }
        Ok(())
    }

    /// Unit ray direction of pixel `(u, v)` in the world frame for heading `theta`.
    pub fn ray_direction(&self, u: f64, v: f64, theta: f64) -> [f64; 3] {
        let a = (u - self.cx) / self.fx;
        let b = (v - self.cy) / self.fy;
        let (c, s) = (theta.cos(), theta.sin());
        // forward (c, s, 0), right (s, -c, 0), down (0, 0, -1)
        let d = [c + a * s, s - a * c, -b];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        [d[0] / n, d[1] / n, d[2] / n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// Euclidean range along each pixel ray in meters; 0 means no return.
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticImage {
    pub width: usize,
    pub height: usize,
    /// 0 background, -1 wall, otherwise the object id.
    pub data: Vec<i32>,
}

impl SemanticImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> i32 {
        self.data[v * self.width + u]
    }

    /// Binary PPM with a stable pseudo-color per label, for external detectors
    /// and verifiers that expect image bytes.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut img = crate::raster::RgbImage::new(self.width, self.height, [0, 0, 0]);
        for (i, &l) in self.data.iter().enumerate() {
            let color = match l {
                0 => [200, 200, 200],
                -1 => [90, 90, 90],
                id => {
                    let h = (id as u32).wrapping_mul(2654435761);
                    [(h >> 24) as u8 | 0x40, (h >> 16) as u8 | 0x40, (h >> 8) as u8 | 0x40]
                }
            };
            img.put(i % self.width, i / self.width, color);
        }
        img.to_ppm()
    }
}

/// Occupied cell crossed by a column ray.
#[derive(Clone, Copy, Debug)]
struct Segment {
    t_in: f64,
    t_out: f64,
    height: f64,
    label: i32,
}

/// Render depth and semantic images in one pass; every pixel of both images
/// derives from the same ray hit.
pub fn render(scene: &Scene, pose: &Pose, intr: &CameraIntrinsics) -> (DepthImage, SemanticImage) {
    render_filtered(scene, pose, intr, |o| o)
}

pub fn render_depth(scene: &Scene, pose: &Pose, intr: &CameraIntrinsics) -> DepthImage {
    render(scene, pose, intr).0
}

pub fn render_semantic(scene: &Scene, pose: &Pose, intr: &CameraIntrinsics) -> SemanticImage {
    render(scene, pose, intr).1
}

/// Render with only one object present (everything else removed); used to
/// estimate how many pixels an instance would cover without occlusion.
pub fn render_isolated(scene: &Scene, pose: &Pose, intr: &CameraIntrinsics, object_id: u32) -> SemanticImage {
    render_filtered(scene, pose, intr, |o| match o {
        Occupant::Object { id, .. } if id == object_id => o,
        _ => Occupant::Free,
    })
    .1
}

fn render_filtered(
    scene: &Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
    filter: impl Fn(Occupant) -> Occupant,
) -> (DepthImage, SemanticImage) {
    let (w, h) = (intr.width, intr.height);
    let mut depth = DepthImage::new(w, h);
    let mut sem = SemanticImage::new(w, h);
    let theta = pose.theta();
    let (c, s) = (theta.cos(), theta.sin());
    let mount = intr.mount_height;
    let top_slope = intr.cy / intr.fy;
    let mut segs: Vec<Segment> = Vec::with_capacity(64);

    for u in 0..w {
        let a = (u as f64 - intr.cx) / intr.fx;
        let hx = c + a * s;
        let hy = s - a * c;
        let n_h = (hx * hx + hy * hy).sqrt();
        let (dx, dy) = (hx / n_h, hy / n_h);
        // Highest elevation any ray of this column reaches at horizontal distance t.
        let k_up = top_slope / n_h;
        segs.clear();
        column_segments(scene, pose.x, pose.y, dx, dy, intr.max_range, &filter, |seg| {
            segs.push(seg);
            seg.height < mount + seg.t_in * k_up
        });

        for v in 0..h {
            let b = (v as f64 - intr.cy) / intr.fy;
            let k = b / n_h;
            let t_floor = if k > 0.0 { mount / k } else { f64::INFINITY };
            let mut hit: Option<(f64, i32)> = None;
            for seg in &segs {
                if seg.t_in > t_floor {
                    break;
                }
                let z_in = mount - k * seg.t_in;
                if z_in <= seg.height {
                    hit = Some((seg.t_in, seg.label));
                    break;
                }
                if k > 0.0 && mount - k * seg.t_out <= seg.height {
                    hit = Some(((mount - seg.height) / k, seg.label));
                    break;
                }
            }
            if let Some((t, label)) = hit {
                let range = t * (n_h * n_h + b * b).sqrt() / n_h;
                if range > 0.0 && range <= intr.max_range {
                    depth.data[v * w + u] = range as f32;
                    sem.data[v * w + u] = label;
                }
            }
        }
    }
    (depth, sem)
}

/// Walk the grid from `(x, y)` along unit direction `(dx, dy)` up to
/// horizontal distance `t_max`, reporting occupied cells in order. The
/// callback returns `false` to stop the walk.
fn column_segments(
    scene: &Scene,
    x: f64,
    y: f64,
    dx: f64,
    dy: f64,
    t_max: f64,
    filter: &impl Fn(Occupant) -> Occupant,
    mut visit: impl FnMut(Segment) -> bool,
) {
    let res = scene.resolution();
    let mut cell = Cell::containing(x, y, res);
    let step_c: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dy > 0.0 { 1 } else { -1 };
    let next_boundary = |idx: i64, step: i64| (if step > 0 { idx + 1 } else { idx }) as f64 * res;
    let mut t_max_x = if dx != 0.0 { (next_boundary(cell.col, step_c) - x) / dx } else { f64::INFINITY };
    let mut t_max_y = if dy != 0.0 { (next_boundary(cell.row, step_r) - y) / dy } else { f64::INFINITY };
    let t_dx = if dx != 0.0 { res / dx.abs() } else { f64::INFINITY };
    let t_dy = if dy != 0.0 { res / dy.abs() } else { f64::INFINITY };
    let mut t_in = 0.0;
    loop {
        let t_out = t_max_x.min(t_max_y);
        let occ = filter(scene.occupant(cell));
        if !occ.is_free() && t_in > 0.0 {
            let keep_going = visit(Segment { t_in, t_out, height: occ.height(), label: occ.label() });
            if !keep_going {
                return;
            }
        }
        if !scene.in_bounds(cell) || t_out > t_max {
            return;
        }
        t_in = t_out;
        if t_max_x < t_max_y {
            cell.col += step_c;
            t_max_x += t_dx;
        } else {
            cell.row += step_r;
            t_max_y += t_dy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::scene::test_scenes::empty_room;
    use crate::world::scene::{ObjectInstance, DEFAULT_WALL_HEIGHT};

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::from_fov(79.0, 640, 480, 5.0, 0.8).unwrap()
    }

    #[test]
    fn corridor_longer_than_range_has_no_return() {
        // 8 m long corridor, robot at its west end looking east.
        let (walls, w, h) = empty_room(170, 30);
        let scene = Scene::new("corridor", 0.05, w, h, walls, vec![]).unwrap();
        let (d, s) = render(&scene, &Pose::new(0.3, 0.75, 0.0), &intr());
        assert_eq!(d.get(320, 240), 0.0);
        assert_eq!(s.get(320, 240), 0);
    }

    #[test]
    fn flat_wall_principal_and_off_axis_pixels() {
        // East wall inner face at x = 79 * 0.05 = 3.95.
        let (walls, w, h) = empty_room(80, 120);
        let scene = Scene::new("wall", 0.05, w, h, walls, vec![]).unwrap();
        let pose = Pose::new(3.95 - 2.0, 3.0, 0.0);
        let intr = intr();
        let (d, s) = render(&scene, &pose, &intr);
        assert!((d.get(320, 240) as f64 - 2.0).abs() < 1e-5);
        assert_eq!(s.get(320, 240), -1);

        // Pixel 10° to the right lands at a fractional column; evaluate the
        // continuous ray directly against the rendered neighbors.
        let u = intr.cx + intr.fx * 10f64.to_radians().tan();
        let expected = 2.0 / 10f64.to_radians().cos();
        assert!((expected - 2.0307).abs() < 1e-3);
        let u0 = u.floor() as usize;
        let d0 = d.get(u0, 240) as f64;
        let d1 = d.get(u0 + 1, 240) as f64;
        let lerp = d0 + (d1 - d0) * (u - u0 as f64);
        assert!((lerp - expected).abs() < 1e-4, "{lerp} vs {expected}");
    }

    #[test]
    fn sensor_consistency_and_range_bounds() {
        let (walls, w, h) = empty_room(64, 64);
        let obj = ObjectInstance {
            id: 4,
            category: "bed".into(),
            footprint: (30..36).flat_map(|r| (40..46).map(move |c| Cell::new(r, c))).collect(),
            top_height: 0.5,
        };
        let scene = Scene::new("s", 0.05, w, h, walls, vec![obj]).unwrap();
        let intr = intr();
        let (d, s) = render(&scene, &Pose::new(1.0, 1.6, 0.1), &intr);
        let mut saw_object = false;
        for (dv, sv) in d.data.iter().zip(&s.data) {
            assert!(*dv >= 0.0 && (*dv as f64) <= intr.max_range);
            assert_eq!(*sv != 0, *dv > 0.0);
            saw_object |= *sv == 4;
        }
        assert!(saw_object);
    }

    #[test]
    fn rays_pass_over_low_objects() {
        let (walls, w, h) = empty_room(80, 40);
        let obj = ObjectInstance {
            id: 1,
            category: "rug".into(),
            footprint: (15..25).map(|r| Cell::new(r, 50)).collect(),
            top_height: 0.3,
        };
        let scene = Scene::new("s", 0.05, w, h, walls, vec![obj]).unwrap();
        let (d, s) = render(&scene, &Pose::new(1.0, 1.0, 0.0), &intr());
        // Horizontal ray at 0.8 m clears the 0.3 m object and reaches the far wall.
        assert_eq!(s.get(320, 240), -1);
        assert!((d.get(320, 240) as f64 - (3.95 - 1.0)).abs() < 1e-5);
        // Some lower pixel in the same column hits the object.
        assert!((241..480).any(|v| s.get(320, v) == 1));
        let _ = DEFAULT_WALL_HEIGHT;
    }

    #[test]
    fn isolated_render_ignores_occluders() {
        let (mut walls, w, h) = empty_room(80, 40);
        // Interior wall between robot and object.
        for r in 10..30 {
            walls[r * w + 30] = DEFAULT_WALL_HEIGHT;
        }
        let obj = ObjectInstance {
            id: 2,
            category: "plant".into(),
            footprint: vec![Cell::new(20, 50), Cell::new(20, 51)],
            top_height: 0.9,
        };
        let scene = Scene::new("s", 0.05, w, h, walls, vec![obj]).unwrap();
        let pose = Pose::new(1.0, 1.0, 0.0);
        let normal = render_semantic(&scene, &pose, &intr());
        let isolated = render_isolated(&scene, &pose, &intr(), 2);
        assert_eq!(normal.data.iter().filter(|&&l| l == 2).count(), 0);
        assert!(isolated.data.iter().filter(|&&l| l == 2).count() > 0);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::from_fov(0.0, 640, 480, 5.0, 0.8).is_err());
        let mut i = intr();
        i.cx = 700.0;
        assert!(i.validate().is_err());
    }
}
