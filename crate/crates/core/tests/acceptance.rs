//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use objnav_core::advisor::{Advisor, AdvisorEndpoint, HttpAdvisor, MockScript, MockServer, ScriptedAdvisor};
use objnav_core::episode::{
    aggregate, run_batch, run_episode, spl, write_records, BatchJob, Components, Episode, EpisodeEvent, EpisodeSpec,
    PlanReason,
};
use objnav_core::global::{block_destination, build_blocks, choose_block, UpdateReason, VisitedMemory};
use objnav_core::mapping::{depth_to_points, integrate_depth, points_to_local_patch};
use objnav_core::morphology::{dilate, erode, BinaryMask};
use objnav_core::perception::{dilate_goal, project_goal, refine_mask, Detector, GoalSource, NullDetector, Observation, OracleDetector};
use objnav_core::planner::{astar, astar_cells, inflate_obstacles, Costmap};
use objnav_core::world::{generate_scene, render, ObjectInstance, Occupant, SceneParams, DEFAULT_WALL_HEIGHT};
use objnav_core::{Cell, CellRect, CellState, Config, OccupancyGrid, Pose, Scene};

/// Pinned mean SPL of the exploration-completeness batch.
const EXPLORATION_SPL: f64 = 0.6111;
const EXPLORATION_SPL_TOL: f64 = 0.02;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("astar-optimality", astar_optimality),
        ("morphology-oracles", morphology_oracles),
        ("projection-roundtrip", projection_roundtrip),
        ("goal-refinement", goal_refinement),
        ("exploration-completeness", exploration_completeness),
        ("priority-state-machine", priority_state_machine),
        ("spl-arithmetic", spl_arithmetic),
        ("determinism", determinism),
        ("advisor-protocol", advisor_protocol),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {:<26} {} [{:.1}s] {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1. A* against Dijkstra

/// Plain Dijkstra over the same move rules, with costs as (straight, diagonal)
/// counts ordered by their real length.
fn dijkstra_oracle(blocked: &[bool], w: i64, h: i64, s: (i64, i64), g: (i64, i64)) -> Option<(u32, u32)> {
    let free = |r: i64, c: i64| r >= 0 && c >= 0 && r < h && c < w && !blocked[(r * w + c) as usize];
    let len = |(a, b): (u32, u32)| a as f64 + b as f64 * std::f64::consts::SQRT_2;
    let mut best: Vec<Option<(u32, u32)>> = vec![None; (w * h) as usize];
    let mut heap = BinaryHeap::new();
    best[(s.0 * w + s.1) as usize] = Some((0, 0));
    heap.push(Reverse((0u64, 0u32, 0u32, s.0, s.1)));
    while let Some(Reverse((key, a, b, r, c))) = heap.pop() {
        if best[(r * w + c) as usize] != Some((a, b)) || f64::from_bits(key) != len((a, b)) {
            continue;
        }
        if (r, c) == g {
            return Some((a, b));
        }
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                if (dr, dc) == (0, 0) || !free(r + dr, c + dc) {
                    continue;
                }
                let diag = dr != 0 && dc != 0;
                if diag && !(free(r + dr, c) && free(r, c + dc)) {
                    continue;
                }
                let next = if diag { (a, b + 1) } else { (a + 1, b) };
                let i = ((r + dr) * w + c + dc) as usize;
                if best[i].map_or(true, |old| len(next) < len(old)) {
                    best[i] = Some(next);
                    heap.push(Reverse((len(next).to_bits(), next.0, next.1, r + dr, c + dc)));
                }
            }
        }
    }
    None
}

fn astar_optimality() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (w, h) = (64i64, 64i64);
    let (mut solvable, mut mismatches) = (0, 0);
    for _ in 0..100 {
        let density = rng.gen_range(0.2..0.35);
        let blocked: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        let cm = Costmap::from_fn(CellRect::new(0, 0, h, w), 0.05, |c| blocked[(c.row * w + c.col) as usize]);
        let pick = |rng: &mut ChaCha8Rng| loop {
            let (r, c) = (rng.gen_range(0..h), rng.gen_range(0..w));
            if !blocked[(r * w + c) as usize] {
                return (r, c);
            }
        };
        let (s, g) = (pick(&mut rng), pick(&mut rng));
        let oracle = dijkstra_oracle(&blocked, w, h, s, g);
        let got = astar_cells(&cm, Cell::new(s.0, s.1), Cell::new(g.0, g.1));
        match (oracle, got) {
            (None, None) => {}
            (Some(o), Some((path, cost))) => {
                solvable += 1;
                let legal = path.first() == Some(&Cell::new(s.0, s.1))
                    && path.last() == Some(&Cell::new(g.0, g.1))
                    && path.windows(2).all(|p| cm.neighbors(p[0]).any(|(n, _)| n == p[1]));
                if (cost.straight, cost.diagonal) != o || !legal {
                    mismatches += 1;
                }
            }
            _ => mismatches += 1,
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && solvable > 0 && secs < 10.0,
        format!("{solvable} solvable of 100, {mismatches} mismatches, {secs:.2}s (limit 10s)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Morphology

fn brute_step(m: &BinaryMask, r: i64, dilation: bool) -> BinaryMask {
    let (w, h) = (m.width as i64, m.height as i64);
    BinaryMask::from_fn(m.width, m.height, |x, y| {
        let mut any = false;
        let mut all = true;
        for dy in -r..=r {
            for dx in -r..=r {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                let v = nx >= 0 && ny >= 0 && nx < w && ny < h && m.get(nx as usize, ny as usize);
                any |= v;
                all &= v;
            }
        }
        if dilation {
            any
        } else {
            all
        }
    })
}

fn brute(m: &BinaryMask, kernel: usize, iterations: usize, dilation: bool) -> BinaryMask {
    (0..iterations).fold(m.clone(), |acc, _| brute_step(&acc, kernel as i64 / 2, dilation))
}

fn morphology_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..200 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let density = rng.gen_range(0.05..0.95);
        let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        let m = BinaryMask::from_fn(w, h, |x, y| bits[y * w + x]);
        if erode(&m, 3, 1) != brute(&m, 3, 1, false) {
            mismatches += 1;
        }
        if dilate(&m, 5, 3) != brute(&m, 5, 3, true) {
            mismatches += 1;
        }
    }
    let mut single = BinaryMask::new(31, 31);
    single.set(15, 15, true);
    let d = dilate(&single, 5, 3);
    let square = d.count() == 169 && d.iter_set().all(|(x, y)| (9..=21).contains(&x) && (9..=21).contains(&y));
    outcome(
        mismatches == 0 && square,
        format!("200 masks, {mismatches} mismatches; single cell dilates to {} cells (13x13 = 169)", d.count()),
    )
}

// ---------------------------------------------------------------------------
// 3. Projection

fn room_walls(w: usize, h: usize) -> Vec<f64> {
    let mut walls = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                walls[r * w + c] = DEFAULT_WALL_HEIGHT;
            }
        }
    }
    walls
}

/// Random pose whose robot disc is clear of everything in the scene.
fn clear_pose(scene: &Scene, rng: &mut ChaCha8Rng, radius: f64) -> Pose {
    let res = scene.resolution();
    loop {
        let x = rng.gen_range(0.0..scene.width() as f64 * res);
        let y = rng.gen_range(0.0..scene.height() as f64 * res);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        if !scene.disc_collides(x, y, radius) {
            return Pose::new(x, y, theta);
        }
    }
}

fn in_band(scene: &Scene, cell: Cell, z_min: f64) -> bool {
    match scene.occupant(cell) {
        Occupant::Free => false,
        o => o.height() > z_min,
    }
}

fn projection_roundtrip() -> Outcome {
    let cfg = Config::default();
    let intr = cfg.intrinsics();
    let clip = cfg.height_clip();
    let res = cfg.resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut marked, mut stray) = (0usize, 0usize);
    for i in 0..50 {
        let (w, h) = (rng.gen_range(40..100), rng.gen_range(40..100));
        let mut walls = room_walls(w, h);
        // One interior wall segment.
        let len = rng.gen_range(5..25usize);
        let vertical = rng.gen_bool(0.5);
        let (r0, c0) = (rng.gen_range(2..h - 2), rng.gen_range(2..w - 2));
        for k in 0..len {
            let (r, c) = if vertical { (r0 + k, c0) } else { (r0, c0 + k) };
            if r < h - 1 && c < w - 1 {
                walls[r * w + c] = DEFAULT_WALL_HEIGHT;
            }
        }
        let scene = Scene::new(format!("proj-{i}"), res, w, h, walls, Vec::new()).unwrap();
        let pose = clear_pose(&scene, &mut rng, cfg.robot_radius);
        let (depth, _) = render(&scene, &pose, &intr);
        let points = depth_to_points(&depth, &intr, &pose).unwrap();
        let patch = points_to_local_patch(&points, clip, res).unwrap();
        for (cell, state) in patch.observed() {
            if state != CellState::Obstacle {
                continue;
            }
            marked += 1;
            let near_wall = CellRect::new(cell.row - 1, cell.col - 1, 3, 3)
                .cells()
                .any(|c| scene.in_bounds(c) && in_band(&scene, c, clip.z_min));
            if !near_wall {
                stray += 1;
            }
        }
    }

    // Full in-place scans of furnished rooms.
    let mut worst_iou = f64::INFINITY;
    for i in 0..10 {
        let (w, h) = (rng.gen_range(40..90), rng.gen_range(40..90));
        let (r, c) = (rng.gen_range(3..h as i64 - 7), rng.gen_range(3..w as i64 - 7));
        let footprint: Vec<Cell> = CellRect::new(r, c, 3, 3).cells().collect();
        let object = ObjectInstance { id: 1, category: "box".into(), footprint, top_height: 0.6 };
        let scene = Scene::new(format!("scan-{i}"), res, w, h, room_walls(w, h), vec![object]).unwrap();
        let mut pose = clear_pose(&scene, &mut rng, cfg.robot_radius);
        let mut map = OccupancyGrid::empty(res);
        for _ in 0..12 {
            let (depth, _) = render(&scene, &pose, &intr);
            integrate_depth(&mut map, &depth, &intr, &pose, clip).unwrap();
            pose = pose.turned(true);
        }
        let within = |cell: Cell| {
            let (x, y) = cell.center(res);
            pose.distance_to(x, y) <= intr.max_range
        };
        let truth: Vec<Cell> = CellRect::new(0, 0, h as i64, w as i64)
            .cells()
            .filter(|&c| in_band(&scene, c, clip.z_min) && within(c))
            .collect();
        let mapped: Vec<Cell> =
            map.observed().filter(|&(c, s)| s == CellState::Obstacle && within(c)).map(|(c, _)| c).collect();
        let inter = mapped.iter().filter(|c| truth.contains(c)).count();
        let union = truth.len() + mapped.len() - inter;
        worst_iou = worst_iou.min(inter as f64 / union as f64);
    }
    outcome(
        stray == 0 && marked > 0 && worst_iou >= 0.95,
        format!("50 frames, {marked} obstacle cells, {stray} farther than 1 cell from a wall; worst scan IoU {worst_iou:.3} (>= 0.95)"),
    )
}

// ---------------------------------------------------------------------------
// 4. Goal refinement

/// A lamp on a nightstand whose rim encloses the lamp cell; the robot stands
/// in the open part of the room, facing the lamp.
fn lamp_scene(rng: &mut ChaCha8Rng) -> (Scene, Pose, Cell) {
    let (w, h) = (60usize, 60usize);
    let lamp = Cell::new(rng.gen_range(12..48), rng.gen_range(12..48));
    let rim: Vec<Cell> = CellRect::new(lamp.row - 4, lamp.col - 4, 9, 9)
        .cells()
        .filter(|c| (3..=4).contains(&c.chebyshev(&lamp)))
        .collect();
    let objects = vec![
        ObjectInstance { id: 1, category: "nightstand".into(), footprint: rim, top_height: 0.55 },
        ObjectInstance { id: 2, category: "lamp".into(), footprint: vec![lamp], top_height: 1.0 },
    ];
    let scene = Scene::new("lamp", 0.05, w, h, room_walls(w, h), objects).unwrap();
    let (lx, ly) = lamp.center(0.05);
    let pose = loop {
        let d = rng.gen_range(1.0..1.8);
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let (x, y) = (lx + d * a.cos(), ly + d * a.sin());
        if x > 0.3 && y > 0.3 && x < 2.7 && y < 2.7 && !scene.disc_collides(x, y, 0.18) {
            break Pose::new(x, y, (ly - y).atan2(lx - x));
        }
    };
    (scene, pose, lamp)
}

fn goal_refinement() -> Outcome {
    let cfg = Config::default();
    let intr = cfg.intrinsics();
    let det = OracleDetector::new(cfg.detector_params());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut good = 0;
    let mut notes = Vec::new();
    for v in 0..10 {
        let (scene, start, lamp) = lamp_scene(&mut rng);
        let mut map = OccupancyGrid::empty(cfg.resolution);
        let mut pose = start;
        for _ in 0..12 {
            let (depth, _) = render(&scene, &pose, &intr);
            integrate_depth(&mut map, &depth, &intr, &pose, cfg.height_clip()).unwrap();
            pose = pose.turned(true);
        }
        let (depth, semantic) = render(&scene, &start, &intr);
        let obs = Observation { scene: &scene, pose: &start, intrinsics: &intr, depth: &depth, semantic: &semantic };
        let Some(hit) = det.detect(&obs, "lamp") else {
            notes.push(format!("v{v}: lamp not detected"));
            continue;
        };
        let raw = project_goal(&refine_mask(&hit), &depth, &intr, &start, &map).unwrap();
        let dilated = dilate_goal(&raw, &map);
        // Cell-level reachability: no robot-size inflation.
        let cm = inflate_obstacles(&map, 0);
        let from = start.cell(cfg.resolution);
        let raw_plan = astar(&cm, from, &raw, 0).unwrap();
        let dilated_plan = astar(&cm, from, &dilated, 0).unwrap();
        let enclosed = raw.cells.iter().all(|c| c.chebyshev(&lamp) <= 2);
        if enclosed && raw_plan.is_none() && dilated_plan.is_some() {
            good += 1;
        } else {
            notes.push(format!(
                "v{v}: enclosed={enclosed} raw_found={} dilated_found={}",
                raw_plan.is_some(),
                dilated_plan.is_some()
            ));
        }
    }
    outcome(good >= 9, format!("{good}/10 variants fail raw and succeed dilated (need 9) {}", notes.join("; ")))
}

// ---------------------------------------------------------------------------
// 5. Exploration completeness

fn exploration_scene(seed: u64) -> Scene {
    generate_scene(seed, &SceneParams::new(2, 64, 64, &["bed", "chair", "plant"])).unwrap()
}

fn exploration_completeness() -> Outcome {
    let t = Instant::now();
    let cfg = Config::default();
    let det = OracleDetector::new(cfg.detector_params());
    let jobs: Vec<BatchJob> =
        (1..=20).map(|seed| BatchJob { scene: Arc::new(exploration_scene(seed)), goal: "plant".into(), seed }).collect();
    let records = run_batch(&jobs, &cfg, 1, &det, &|_| Ok(None)).unwrap();
    let results: Vec<_> = records.iter().map(|r| r.result.clone()).collect();
    let agg = aggregate(&results).unwrap();
    let max_steps = results.iter().map(|r| r.steps).max().unwrap_or(0);
    let secs = t.elapsed().as_secs_f64();
    let pass = agg.sr == 1.0
        && agg.invalid == 0
        && max_steps <= 500
        && (agg.spl - EXPLORATION_SPL).abs() <= EXPLORATION_SPL_TOL
        && secs < 120.0;
    outcome(
        pass,
        format!(
            "SR {:.2} over {} episodes, mean SPL {:.4} (pinned {EXPLORATION_SPL} +/- {EXPLORATION_SPL_TOL}), longest {max_steps} steps, {secs:.1}s (limit 120s)",
            agg.sr, agg.valid, agg.spl
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Priority and destination state machine

fn local_overrides_global() -> Result<usize, String> {
    let cfg = Config::default();
    let det = OracleDetector::new(cfg.detector_params());
    let mut checked = 0;
    for seed in 1..=20 {
        let scene = exploration_scene(seed);
        let spec = EpisodeSpec::sample(&scene, "plant", seed, &cfg).unwrap();
        let mut ep = Episode::new(&scene, spec, &cfg, Components { detector: &det, advisor: None }).unwrap();
        let mut seen_global = false;
        while ep.termination().is_none() {
            let before = ep.trace().len();
            ep.step().unwrap();
            let detected = ep.events().iter().any(|e| matches!(e, EpisodeEvent::Detection { step, .. } if *step == before));
            if detected && seen_global {
                let switched = ep.trace().get(before).map(|t| t.source) == Some(Some(GoalSource::Local));
                if !switched {
                    return Err(format!("seed {seed}: still global after detection at step {before}"));
                }
                checked += 1;
                break;
            }
            seen_global |= ep.trace().get(before).map(|t| t.source) == Some(Some(GoalSource::Global));
        }
    }
    if checked == 0 {
        return Err("no episode detected its goal while a global destination was active".into());
    }
    Ok(checked)
}

/// Steps an exploring episode (no detections) until a destination update for
/// `reason` issues fresh advisor queries. `inject` may edit the episode after
/// every step and returns true once it has done so.
fn update_triggers_query(
    cfg: &Config,
    reason: UpdateReason,
    mut inject: impl FnMut(&mut Episode<'_>) -> bool,
) -> Result<usize, String> {
    let scene = exploration_scene(3);
    let spec = EpisodeSpec::sample(&scene, "plant", 3, cfg).unwrap();
    let advisor = ScriptedAdvisor::new(["1", "2", "3", "4", "5", "6", "7", "8", "9"]);
    let mut ep =
        Episode::new(&scene, spec, cfg, Components { detector: &NullDetector, advisor: Some(&advisor) }).unwrap();
    let mut injected = false;
    while ep.termination().is_none() {
        let queries = advisor.queries().len();
        let step = ep.trace().len();
        ep.step().unwrap();
        let fired = ep.events().iter().any(|e| {
            matches!(e, EpisodeEvent::DestinationUpdate { step: s, reason: r, .. } if *s == step && *r == reason)
        });
        if fired {
            let added = advisor.queries().len() - queries;
            return if added > 0 { Ok(step) } else { Err(format!("{reason:?} update at step {step} sent no query")) };
        }
        if !injected {
            injected = inject(&mut ep);
        }
    }
    Err(format!("no {reason:?} update within the episode"))
}

/// After a fresh global destination far from the robot, surround it with an
/// obstacle ring so the next plan to it fails.
fn wall_off_destination(ep: &mut Episode<'_>) -> bool {
    let res = ep.map().resolution();
    let Some(dest) = ep.global_goal().map(|g| g.cells[0]) else { return false };
    if ep.nav_state().steps_since_destination != 1 || ep.pose().cell(res).chebyshev(&dest) < 20 {
        return false;
    }
    let rect = CellRect::new(dest.row - 8, dest.col - 8, 17, 17);
    let map = ep.map_mut();
    map.expand_to_cover(rect);
    for c in rect.cells().filter(|c| c.chebyshev(&dest) == 8) {
        map.raise(c, CellState::Obstacle);
    }
    true
}

fn blocked_path_replans() -> Result<usize, String> {
    let cfg = Config::default();
    let scene = exploration_scene(5);
    let spec = EpisodeSpec::sample(&scene, "plant", 5, &cfg).unwrap();
    let mut ep = Episode::new(&scene, spec, &cfg, Components { detector: &NullDetector, advisor: None }).unwrap();
    while ep.termination().is_none() {
        let step = ep.trace().len();
        ep.step().unwrap();
        let fresh = ep.events().iter().any(|e| {
            matches!(e, EpisodeEvent::Plan { step: s, source: GoalSource::Global, found: true, reason }
                if *s == step && matches!(reason, PlanReason::New | PlanReason::TargetChanged))
        });
        let Some(plan) = ep.plan().filter(|p| fresh && p.remaining_cells().len() > 30) else { continue };
        let cell = plan.remaining_cells()[15];
        ep.map_mut().raise(cell, CellState::Obstacle);
        for _ in 0..10 {
            if ep.termination().is_some() {
                break;
            }
            ep.step().unwrap();
            let replanned = ep.events().iter().any(|e| {
                matches!(e, EpisodeEvent::Plan { step: s, reason: PlanReason::Blocked, .. } if *s > step)
            });
            if replanned {
                return Ok(ep.trace().len() - 1 - step);
            }
        }
        return Err(format!("obstacle merged after step {step} did not trigger a blocked replan within 10 steps"));
    }
    Err("no global plan long enough to block".into())
}

fn priority_state_machine() -> Outcome {
    let base = Config::default();
    let endurance = Config { endurance_limit: 15, ..Config::default() };
    let checks: Vec<(&str, Result<usize, String>)> = vec![
        ("local-priority", local_overrides_global()),
        ("goal-reached", update_triggers_query(&base, UpdateReason::GoalReached, |_| true)),
        ("endurance", update_triggers_query(&endurance, UpdateReason::Endurance, |_| true)),
        ("plan-failed", update_triggers_query(&base, UpdateReason::PlanFailed, wall_off_destination)),
        ("blocked-replan", blocked_path_replans()),
    ];
    let pass = checks.iter().all(|(_, r)| r.is_ok());
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, r)| match r {
            Ok(v) => format!("{name}: ok ({v})"),
            Err(e) => format!("{name}: {e}"),
        })
        .collect();
    outcome(pass, detail.join("; "))
}

// ---------------------------------------------------------------------------
// 7. SPL arithmetic

fn spl_arithmetic() -> Outcome {
    let vectors = [
        ((true, 4.0, 5.0), 0.8),
        ((false, 4.0, 5.0), 0.0),
        ((true, 4.0, 3.0), 1.0),
        ((true, 4.0, 4.0), 1.0),
        ((true, 0.0, 0.0), 1.0),
    ];
    let units_ok = vectors.iter().all(|&((s, l, p), want)| spl(s, l, p) == want);

    let cfg = Config { max_steps: 150, ..Config::default() };
    let det = OracleDetector::new(cfg.detector_params());
    let jobs: Vec<BatchJob> = (1..=6)
        .map(|seed| BatchJob {
            scene: Arc::new(exploration_scene(seed)),
            goal: ["bed", "chair", "plant"][seed as usize % 3].into(),
            seed,
        })
        .collect();
    let serial = run_batch(&jobs, &cfg, 1, &det, &|_| Ok(None)).unwrap();
    let parallel = run_batch(&jobs, &cfg, 3, &det, &|_| Ok(None)).unwrap();
    let results: Vec<_> = serial.iter().map(|r| r.result.clone()).collect();
    let mut reversed = results.clone();
    reversed.reverse();
    let par_results: Vec<_> = parallel.iter().map(|r| r.result.clone()).collect();
    let a = aggregate(&results).unwrap();
    let invariant = serial == parallel && a == aggregate(&reversed).unwrap() && a == aggregate(&par_results).unwrap();
    outcome(
        units_ok && invariant,
        format!("unit vectors ok: {units_ok}; aggregate identical across order and 1/3 workers: {invariant} (SR {:.2}, SPL {:.4})", a.sr, a.spl),
    )
}

// ---------------------------------------------------------------------------
// 8. Determinism

fn determinism() -> Outcome {
    let server = MockServer::start(MockScript::from_texts(["2"])).unwrap();
    let url = server.url();
    let cfg = Config { max_steps: 120, ..Config::default() };
    let det = OracleDetector::new(cfg.detector_params());
    let jobs: Vec<BatchJob> = (1..=4)
        .map(|seed| BatchJob {
            scene: Arc::new(exploration_scene(seed)),
            goal: if seed % 2 == 0 { "bed".into() } else { "chair".into() },
            seed,
        })
        .collect();
    let factory = |_: &BatchJob| -> objnav_core::Result<Option<Box<dyn Advisor>>> {
        Ok(Some(Box::new(HttpAdvisor::new(cfg.endpoint(&url)))))
    };
    let run = || {
        let records = run_batch(&jobs, &cfg, 2, &det, &factory).unwrap();
        let mut out = Vec::new();
        write_records(&mut out, &records).unwrap();
        out
    };
    let (a, b) = (run(), run());
    let queried = server.requests().iter().any(|r| !r.is_verify());
    outcome(
        a == b && !a.is_empty() && queried,
        format!("{} bytes per run, identical: {}, mock advisor queried: {queried}", a.len(), a == b),
    )
}

// ---------------------------------------------------------------------------
// 9. Advisor protocol

fn open_grid() -> OccupancyGrid {
    let mut grid = OccupancyGrid::with_bounds(0.05, CellRect::new(0, 0, 96, 144));
    for c in CellRect::new(0, 0, 96, 144).cells() {
        grid.set(c, CellState::Free);
    }
    grid
}

fn advisor_protocol() -> Outcome {
    let mut problems = Vec::new();
    let grid = open_grid();
    let blocks = build_blocks(&grid, 48);
    let pose = Pose::new(0.1, 0.1, 0.0);
    let visit = |memory: &mut VisitedMemory, id: u32| {
        let (x, y) = block_destination(&grid, blocks.get(id).unwrap()).center(grid.resolution());
        memory.record(x, y);
    };

    // Exclusion retry.
    let server = MockServer::start(MockScript::from_texts(["Block 3", "Block 5"])).unwrap();
    let advisor = HttpAdvisor::new(AdvisorEndpoint::new(server.url()));
    let mut memory = VisitedMemory::new(1.0);
    visit(&mut memory, 3);
    let choice = choose_block(Some(&advisor), "bed", b"P6", &mut memory, &blocks, &grid, &pose).unwrap();
    let reqs = server.requests();
    if choice.block != 5 {
        problems.push(format!("chose block {} instead of 5", choice.block));
    }
    if reqs.len() < 2 || reqs[0].prompt.contains("Don't answer") || !reqs[1].prompt.contains("Don't answer number [3]") {
        problems.push(format!("second prompt lacks the exclusion: {:?}", reqs.iter().map(|r| &r.prompt).collect::<Vec<_>>()));
    } else if reqs[1].excluded_ids != [3] {
        problems.push(format!("excluded ids {:?}", reqs[1].excluded_ids));
    }
    drop(server);

    // An advisor that keeps naming visited blocks never gets its way.
    for stubborn in 1..=blocks.len() as u32 {
        let server = MockServer::start(MockScript::from_texts([stubborn.to_string()])).unwrap();
        let advisor = HttpAdvisor::new(AdvisorEndpoint::new(server.url()));
        let mut memory = VisitedMemory::new(1.0);
        visit(&mut memory, stubborn);
        let choice = choose_block(Some(&advisor), "bed", b"P6", &mut memory, &blocks, &grid, &pose).unwrap();
        if choice.block == stubborn {
            problems.push(format!("returned excluded block {stubborn}"));
        }
        for r in server.requests().iter().skip(1) {
            if !r.excluded_ids.contains(&stubborn) {
                problems.push(format!("retry for {stubborn} did not exclude it"));
            }
        }
    }

    // Unreachable service: the episode completes on the frontier heuristic.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let endpoint = AdvisorEndpoint { base_url: format!("http://127.0.0.1:{port}"), timeout: 0.5, max_retries: 0 };
    let advisor = HttpAdvisor::new(endpoint);
    let cfg = Config { max_steps: 100, ..Config::default() };
    let scene = exploration_scene(1);
    let spec = EpisodeSpec::sample(&scene, "plant", 1, &cfg).unwrap();
    let t = Instant::now();
    match run_episode(&scene, &spec, &cfg, Components { detector: &NullDetector, advisor: Some(&advisor) }) {
        Ok(out) => {
            let fell_back =
                out.events.iter().any(|e| matches!(e, EpisodeEvent::DestinationUpdate { fallback: true, .. }));
            if !fell_back || !out.result.is_valid() {
                problems.push("offline advisor did not fall back".into());
            }
        }
        Err(e) => problems.push(format!("episode aborted: {e}")),
    }
    if t.elapsed() > Duration::from_secs(60) {
        problems.push("offline fallback took over a minute".into());
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("exclusion prompt sent, no excluded id returned over {} blocks, offline fallback ok", blocks.len())
        } else {
            problems.join("; ")
        },
    )
}
