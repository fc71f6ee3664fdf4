use std::io::BufReader;

use objnav_core::episode::{read_records, run_episode, write_records, Components, EpisodeRecord, EpisodeSpec, ReplayTrace};
use objnav_core::perception::OracleDetector;
use objnav_core::world::{generate_scene, SceneParams};
use objnav_core::Config;

fn output() -> (EpisodeSpec, objnav_core::episode::EpisodeOutput) {
    let cfg = Config::default();
    let scene = generate_scene(4, &SceneParams::new(2, 64, 64, &["bed", "chair", "plant"])).unwrap();
    let spec = EpisodeSpec::sample(&scene, "chair", 4, &cfg).unwrap();
    let det = OracleDetector::new(cfg.detector_params());
    let out = run_episode(&scene, &spec, &cfg, Components { detector: &det, advisor: None }).unwrap();
    (spec, out)
}

#[test]
fn jsonl_records_roundtrip() {
    let (spec, out) = output();
    let rec = EpisodeRecord::new(&spec, &out);
    assert_eq!(rec.spec_hash, spec.hash());
    assert_eq!(rec.trace.len(), out.result.steps);
    let mut bytes = Vec::new();
    write_records(&mut bytes, &[rec.clone(), rec.clone()]).unwrap();
    assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 2);
    let back = read_records(BufReader::new(&bytes[..])).unwrap();
    assert_eq!(back, vec![rec.clone(), rec]);
}

#[test]
fn replay_trace_roundtrip() {
    let (_, out) = output();
    let trace = ReplayTrace::new(&out, 48);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.json");
    trace.save(&path).unwrap();
    let back = ReplayTrace::load(&path).unwrap();
    assert_eq!(back, trace);
    assert_eq!(back.grid().unwrap(), out.final_map);
}

#[test]
fn traveled_length_counts_forward_moves() {
    let (_, out) = output();
    let forwards = out
        .trace
        .iter()
        .filter(|t| t.action == objnav_core::Action::Forward && !t.collided)
        .count();
    assert_eq!(out.result.traveled_length, 0.5 * forwards as f64);
}
