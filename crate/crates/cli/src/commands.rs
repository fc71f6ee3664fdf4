use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use objnav_core::advisor::{Advisor, HttpAdvisor, MockScript, MockServer, ScriptedAdvisor};
use objnav_core::episode::{
    aggregate, run_batch, run_job, write_records, Aggregate, BatchJob, EpisodeRecord, ReplayTrace,
};
use objnav_core::global::{build_blocks, render_map, MapOverlay};
use objnav_core::perception::OracleDetector;
use objnav_core::world::{generate_scene, SceneParams};
use objnav_core::{Config, Error, Scene};

use crate::{BatchArgs, CommonArgs, GenScenesArgs, MockAdvisorArgs, RenderArgs, RunArgs};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::InvalidParam { .. } => EXIT_CONFIG,
            Error::Io(_) => EXIT_IO,
            Error::InvalidScene(_)
            | Error::Json(_)
            | Error::NoPath { .. }
            | Error::UnknownCategory(_)
            | Error::Placement { .. }
            | Error::NoValidEpisodes => EXIT_INVALID,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn load_scene(path: &Path) -> Result<Scene, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Scene::from_json(&text).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

pub fn gen_scenes(args: &GenScenesArgs) -> CmdResult {
    let params = match &args.params {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_failure(p, e))?;
            serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", p.display())))?
        }
        None => SceneParams {
            objects: args.objects.clone(),
            ..SceneParams::new(args.rooms, args.width, args.height, &[])
        },
    };
    params.validate()?;
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    for seed in args.seed..args.seed + args.count {
        let scene = generate_scene(seed, &params)?;
        let path = args.out.join(format!("scene_{seed:04}.json"));
        write_file(&path, scene.to_json().as_bytes())?;
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_config(common: &CommonArgs) -> Result<Config, Failure> {
    let mut cfg = Config::load(common.config.as_deref())?;
    if let Some(n) = common.max_steps {
        cfg.max_steps = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Which advisor each episode gets.
#[derive(Clone, Debug)]
enum AdvisorSpec {
    Heuristic,
    Url(String),
    Script(MockScript),
}

impl AdvisorSpec {
    fn parse(flag: Option<&str>, cfg: &Config) -> Result<Self, Failure> {
        let spec = match flag {
            None => return Ok(cfg.advisor_url.clone().map_or(Self::Heuristic, Self::Url)),
            Some(s) => s.trim(),
        };
        if spec == "heuristic" {
            Ok(Self::Heuristic)
        } else if let Some(path) = spec.strip_prefix("script:") {
            let script = MockScript::load(Path::new(path)).map_err(|e| match e {
                Error::Io(e) => io_failure(Path::new(path), e),
                e => Failure::new(EXIT_CONFIG, format!("{path}: {e}")),
            })?;
            Ok(Self::Script(script))
        } else if spec.starts_with("http://") || spec.starts_with("https://") {
            Ok(Self::Url(spec.to_string()))
        } else {
            Err(Failure::new(
                EXIT_CONFIG,
                format!("--advisor must be `heuristic`, an http(s) URL or `script:<file>`, got {spec:?}"),
            ))
        }
    }

    fn build(&self, cfg: &Config) -> Option<Box<dyn Advisor>> {
        match self {
            Self::Heuristic => None,
            Self::Url(url) => {
                let mut a = HttpAdvisor::new(cfg.endpoint(url));
                a.prompts = cfg.prompts();
                Some(Box::new(a))
            }
            Self::Script(s) => {
                let texts = s.answers.iter().map(|r| r.text.clone());
                Some(Box::new(ScriptedAdvisor::new(texts).with_verify_answer(s.verify_answer.clone())))
            }
        }
    }
}

fn default_goal(scene: &Scene) -> Result<String, Failure> {
    scene
        .categories()
        .into_iter()
        .next()
        .ok_or_else(|| Failure::new(EXIT_INVALID, format!("scene {} has no objects", scene.name())))
}

pub fn run(args: &RunArgs) -> CmdResult {
    let cfg = load_config(&args.common)?;
    let advisor = AdvisorSpec::parse(args.common.advisor.as_deref(), &cfg)?;
    let scene = Arc::new(load_scene(&args.scene)?);
    let goal = match &args.goal {
        Some(g) => g.clone(),
        None => default_goal(&scene)?,
    };
    let job = BatchJob { scene, goal, seed: args.seed };
    let detector = OracleDetector::new(cfg.detector_params());
    let advisor = advisor.build(&cfg);
    let (spec, output) = run_job(&job, &cfg, &detector, advisor.as_deref())?;
    println!("{}", serde_json::to_string(&output.result).expect("results serialize"));
    if let Some(path) = &args.out {
        let mut line = Vec::new();
        write_records(&mut line, &[EpisodeRecord::new(&spec, &output)])?;
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_failure(path, e))?;
        f.write_all(&line).map_err(|e| io_failure(path, e))?;
    }
    if let Some(path) = &args.trace {
        ReplayTrace::new(&output, cfg.block_size).save(path).map_err(|e| io_failure(path, e))?;
    }
    if output.result.is_valid() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: no start pose in {} can reach `{}`", spec.scene, spec.goal_category);
        Ok(ExitCode::from(EXIT_INVALID))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalEntry {
    /// Scene name or file stem.
    scene: String,
    goal: String,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct BatchReport {
    episodes: usize,
    #[serde(flatten)]
    aggregate: Aggregate,
}

fn scene_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_failure(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::new(EXIT_IO, format!("{}: no scene files", dir.display())));
    }
    Ok(files)
}

pub fn batch(args: &BatchArgs) -> CmdResult {
    let cfg = load_config(&args.common)?;
    let advisor = AdvisorSpec::parse(args.common.advisor.as_deref(), &cfg)?;
    let mut scenes = Vec::new();
    for path in scene_files(&args.scene)? {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        scenes.push((stem, Arc::new(load_scene(&path)?)));
    }
    let jobs: Vec<BatchJob> = match &args.goals {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let entries: Vec<GoalEntry> = serde_json::from_str(&text)
                .map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
            let mut jobs = Vec::with_capacity(entries.len());
            for e in entries {
                let scene = scenes
                    .iter()
                    .find(|(stem, s)| *stem == e.scene || s.name() == e.scene)
                    .map(|(_, s)| Arc::clone(s))
                    .ok_or_else(|| Failure::new(EXIT_CONFIG, format!("goals file names unknown scene {:?}", e.scene)))?;
                jobs.push(BatchJob { scene, goal: e.goal, seed: e.seed });
            }
            jobs
        }
        None => scenes
            .iter()
            .map(|(_, s)| Ok(BatchJob { scene: Arc::clone(s), goal: default_goal(s)?, seed: args.seed }))
            .collect::<Result<_, Failure>>()?,
    };
    let detector = OracleDetector::new(cfg.detector_params());
    let records = run_batch(&jobs, &cfg, args.parallelism, &detector, &|_| Ok(advisor.build(&cfg)))?;
    let mut out = Vec::new();
    write_records(&mut out, &records)?;
    write_file(&args.out, &out)?;
    let results: Vec<_> = records.iter().map(|r| r.result.clone()).collect();
    let report = BatchReport { episodes: records.len(), aggregate: aggregate(&results)? };
    println!("{}", serde_json::to_string(&report).expect("reports serialize"));
    Ok(ExitCode::SUCCESS)
}

pub fn render(args: &RenderArgs) -> CmdResult {
    let bytes = fs::read(&args.trace).map_err(|e| io_failure(&args.trace, e))?;
    let trace: ReplayTrace = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", args.trace.display())))?;
    let grid = trace.grid()?;
    let image = if args.out.extension().is_some_and(|x| x == "pgm") {
        grid.to_pgm()
    } else {
        let blocks = (!args.no_blocks && trace.block_size > 0).then(|| build_blocks(&grid, trace.block_size));
        let overlay = MapOverlay {
            blocks: blocks.as_ref(),
            pose: trace.trajectory.last(),
            trajectory: &trace.trajectory,
            path: &trace.path,
        };
        render_map(&grid, &overlay).to_ppm()
    };
    write_file(&args.out, &image)?;
    Ok(ExitCode::SUCCESS)
}

pub fn mock_advisor(args: &MockAdvisorArgs) -> CmdResult {
    let script = MockScript::load(&args.script).map_err(|e| match e {
        Error::Io(e) => io_failure(&args.script, e),
        e => Failure::new(EXIT_CONFIG, format!("{}: {e}", args.script.display())),
    })?;
    let server = MockServer::bind(&args.bind, script).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.bind)))?;
    println!("{}", server.url());
    server.wait();
    Ok(ExitCode::SUCCESS)
}
