//! Benchmark orchestration: procedural apartment scenes, episode suites,
//! SR/SPL metrics, ablation switches, and deterministic reports.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::geometry::{Point, Rect};
use crate::policy::run_episode;
use crate::reasoner::{
    HeuristicReasoner, Reasoner, RemoteConfig, RemoteReasoner, ScriptedReasoner,
    UniformRandomReasoner,
};
use crate::topmap::shortest_path_to_disk;
use crate::worldsim::{PlacedObject, Pose, Scene, World};

/// The benchmark's six target categories.
pub const TARGET_CATEGORIES: [&str; 6] = ["bed", "sofa", "chair", "toilet", "tv_monitor", "plant"];

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Low-level actions spent, including the final stop.
    pub steps: u32,
    /// Meters actually traversed (p).
    pub path_length: f64,
    /// Ground-truth shortest path to the success disk, meters (l); zero when
    /// the target is unreachable.
    pub shortest_length: f64,
    pub target: String,
    pub seed: u64,
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("metrics need at least one episode result")]
    Empty,
}

/// Success rate as a percentage.
pub fn compute_sr(results: &[EpisodeResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = results.iter().filter(|r| r.success).count();
    Ok(100.0 * hits as f64 / results.len() as f64)
}

/// Success weighted by path length, as a percentage:
/// `(100/N) · Σ S_i · l_i / max(p_i, l_i)`. Failures contribute zero; a
/// successful episode that required no motion counts as a full point.
pub fn compute_spl(results: &[EpisodeResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = results
        .iter()
        .map(|r| {
            if !r.success {
                return 0.0;
            }
            let denom = r.path_length.max(r.shortest_length);
            if denom <= 0.0 {
                1.0
            } else {
                r.shortest_length / denom
            }
        })
        .sum();
    Ok(100.0 * sum / results.len() as f64)
}

/// Room/object counts for the procedural generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Rooms in the apartment strip, 1..=5.
    pub rooms: u32,
    /// Placed objects per room, counting the room's guaranteed targets.
    pub objects_per_room: u32,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            rooms: 3,
            objects_per_room: 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("infeasible scene spec: {0}")]
    Infeasible(String),
    #[error("scene generation failed after {0} attempts")]
    Exhausted(u32),
}

const WALL_THICKNESS: f64 = 0.1;
const DOOR_WIDTH: f64 = 0.9;
const OBJECT_CLEARANCE: f64 = 0.3;
const DOOR_CLEARANCE: f64 = 0.55;
const START_TARGET_MIN_DIST: f64 = 2.0;
const GEN_ATTEMPTS: u32 = 64;

/// Room archetypes: name, categories that must be placed, optional extras.
const ROOM_TABLE: [(&str, &[&str], &[&str]); 6] = [
    ("bedroom", &["bed"], &["chair", "lamp", "cabinet"]),
    ("living", &["sofa", "tv_monitor"], &["table", "plant", "lamp"]),
    ("bathroom", &["toilet"], &["sink", "cabinet"]),
    ("office", &["chair", "plant"], &["table", "lamp"]),
    ("kitchen", &["chair"], &["refrigerator", "cabinet", "sink", "table"]),
    ("den", &["tv_monitor", "plant"], &["sofa", "table"]),
];

/// Obstacle footprint (width, depth) per category, meters.
fn footprint_size(category: &str) -> (f64, f64) {
    match category {
        "bed" => (0.9, 1.2),
        "sofa" => (1.0, 0.5),
        "chair" => (0.4, 0.4),
        "toilet" => (0.4, 0.5),
        "tv_monitor" => (0.6, 0.2),
        "plant" => (0.3, 0.3),
        "table" => (0.7, 0.7),
        "lamp" => (0.2, 0.2),
        "cabinet" => (0.8, 0.3),
        "sink" => (0.45, 0.35),
        "refrigerator" => (0.6, 0.6),
        _ => (0.4, 0.4),
    }
}

fn inflate(r: &Rect, m: f64) -> Rect {
    Rect::new(r.x - m, r.y - m, r.w + 2.0 * m, r.h + 2.0 * m)
}

/// Derive an independent stream seed; distinct labels give independent
/// deterministic streams from one suite seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut x = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn lattice(cells: i64) -> f64 {
    cells as f64 * 0.05
}

struct RoomLayout {
    interior: Rect,
    kind: usize,
}

/// Deterministic procedural apartment: a strip of rectangular rooms joined
/// by door gaps, objects placed from a room-type table, every placed target
/// verified reachable from the start pose. The same seed always produces
/// the same scene.
pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Result<Scene, GenError> {
    if spec.rooms == 0 || spec.rooms > 5 {
        return Err(GenError::Infeasible(format!(
            "rooms must be 1..=5, got {}",
            spec.rooms
        )));
    }
    if spec.objects_per_room > 8 {
        return Err(GenError::Infeasible(format!(
            "objects_per_room must be <= 8, got {}",
            spec.objects_per_room
        )));
    }
    for attempt in 0..GEN_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xA11C_E000 + attempt as u64));
        if let Some(scene) = try_generate(&mut rng, seed, spec) {
            return Ok(scene);
        }
    }
    Err(GenError::Exhausted(GEN_ATTEMPTS))
}

fn try_generate(rng: &mut ChaCha8Rng, seed: u64, spec: &SceneSpec) -> Option<Scene> {
    let rooms = spec.rooms as usize;
    // Interior height shared by the strip, widths per room; everything on
    // the 0.05 m lattice so walls align with grid cells.
    let h_cells: i64 = rng.random_range(72..=96);
    let h = lattice(h_cells);
    let widths: Vec<f64> = (0..rooms)
        .map(|_| lattice(rng.random_range(70..=100)))
        .collect();

    let mut walls = Vec::new();
    let mut door_rects = Vec::new();
    let mut layouts = Vec::new();
    let type_rotation = (seed % ROOM_TABLE.len() as u64) as usize;

    let mut x = WALL_THICKNESS;
    for (k, w) in widths.iter().enumerate() {
        layouts.push(RoomLayout {
            interior: Rect::new(x, WALL_THICKNESS, *w, h),
            kind: (type_rotation + k) % ROOM_TABLE.len(),
        });
        x += w;
        if k + 1 < rooms {
            // Separating wall with one door gap.
            let gy_cells = rng.random_range(8..=(h_cells - 18 - 6));
            let gy = WALL_THICKNESS + lattice(gy_cells);
            let wall_x = x;
            let bottom_h = gy - WALL_THICKNESS;
            if bottom_h > 1e-9 {
                walls.push(Rect::new(wall_x, WALL_THICKNESS, WALL_THICKNESS, bottom_h));
            }
            let top_y = gy + DOOR_WIDTH;
            let top_h = (WALL_THICKNESS + h) - top_y;
            if top_h > 1e-9 {
                walls.push(Rect::new(wall_x, top_y, WALL_THICKNESS, top_h));
            }
            door_rects.push(Rect::new(wall_x, gy, WALL_THICKNESS, DOOR_WIDTH));
            x += WALL_THICKNESS;
        }
    }
    let width_total = x + WALL_THICKNESS;
    let height_total = h + 2.0 * WALL_THICKNESS;
    // Outer shell.
    walls.push(Rect::new(0.0, 0.0, width_total, WALL_THICKNESS));
    walls.push(Rect::new(0.0, height_total - WALL_THICKNESS, width_total, WALL_THICKNESS));
    walls.push(Rect::new(0.0, 0.0, WALL_THICKNESS, height_total));
    walls.push(Rect::new(width_total - WALL_THICKNESS, 0.0, WALL_THICKNESS, height_total));

    // Objects: guaranteed targets first, extras best-effort.
    let mut objects: Vec<PlacedObject> = Vec::new();
    for layout in &layouts {
        let (_, musts, extras) = ROOM_TABLE[layout.kind];
        for category in musts {
            let placed = place_object(rng, category, &layout.interior, &objects, &door_rects, 200)?;
            objects.push(placed);
        }
        let n_extra = (spec.objects_per_room as usize).saturating_sub(musts.len());
        for i in 0..n_extra {
            let category = extras[i % extras.len()];
            if let Some(placed) =
                place_object(rng, category, &layout.interior, &objects, &door_rects, 60)
            {
                objects.push(placed);
            }
        }
    }

    // Start pose in the first room, clear of furniture and away from
    // every target instance.
    let start = place_start(rng, &layouts[0].interior, &objects)?;

    let mut targets: Vec<String> = objects
        .iter()
        .filter(|o| TARGET_CATEGORIES.contains(&o.category.as_str()))
        .map(|o| o.category.clone())
        .collect();
    targets.sort();
    targets.dedup();
    if targets.is_empty() {
        return None;
    }

    let scene = Scene {
        bounds: Rect::new(0.0, 0.0, width_total, height_total),
        walls,
        objects,
        start,
        targets,
    };

    // Verify every target instance is reachable from the start.
    let truth = scene.rasterize(0.05);
    if !truth.navigable_at(start.position) {
        return None;
    }
    for obj in &scene.objects {
        if !TARGET_CATEGORIES.contains(&obj.category.as_str()) {
            continue;
        }
        if shortest_path_to_disk(&truth, start.position, &[obj.position], 1.0).is_err() {
            return None;
        }
    }
    Some(scene)
}

fn place_object(
    rng: &mut ChaCha8Rng,
    category: &str,
    room: &Rect,
    placed: &[PlacedObject],
    doors: &[Rect],
    attempts: u32,
) -> Option<PlacedObject> {
    let (fw, fh) = footprint_size(category);
    let margin = WALL_THICKNESS;
    let min_x = ((room.x + margin) / 0.05).ceil() as i64;
    let max_x = ((room.max_x() - margin - fw) / 0.05).floor() as i64;
    let min_y = ((room.y + margin) / 0.05).ceil() as i64;
    let max_y = ((room.max_y() - margin - fh) / 0.05).floor() as i64;
    if min_x > max_x || min_y > max_y {
        return None;
    }
    for _ in 0..attempts {
        let fx = lattice(rng.random_range(min_x..=max_x));
        let fy = lattice(rng.random_range(min_y..=max_y));
        let footprint = Rect::new(fx, fy, fw, fh);
        let padded = inflate(&footprint, OBJECT_CLEARANCE);
        let blocked = placed.iter().any(|o| padded.overlaps(&o.footprint))
            || doors
                .iter()
                .any(|d| inflate(d, DOOR_CLEARANCE).overlaps(&footprint));
        if blocked {
            continue;
        }
        return Some(PlacedObject {
            category: category.to_string(),
            position: footprint.center(),
            footprint,
        });
    }
    None
}

fn place_start(rng: &mut ChaCha8Rng, room: &Rect, objects: &[PlacedObject]) -> Option<Pose> {
    let margin = 0.3;
    let min_x = ((room.x + margin) / 0.05).ceil() as i64;
    let max_x = ((room.max_x() - margin) / 0.05).floor() as i64;
    let min_y = ((room.y + margin) / 0.05).ceil() as i64;
    let max_y = ((room.max_y() - margin) / 0.05).floor() as i64;
    if min_x > max_x || min_y > max_y {
        return None;
    }
    for _ in 0..400 {
        let p = Point::new(
            lattice(rng.random_range(min_x..=max_x)) + 0.025,
            lattice(rng.random_range(min_y..=max_y)) + 0.025,
        );
        let too_close_to_furniture = objects
            .iter()
            .any(|o| inflate(&o.footprint, OBJECT_CLEARANCE).contains(p));
        let too_close_to_target = objects.iter().any(|o| {
            TARGET_CATEGORIES.contains(&o.category.as_str())
                && o.position.distance(p) < START_TARGET_MIN_DIST
        });
        if too_close_to_furniture || too_close_to_target {
            continue;
        }
        let heading = rng.random_range(0..12) as f64 * 30f64.to_radians();
        return Some(Pose::new(p.x, p.y, heading));
    }
    None
}

/// One episode of a suite: which scene, which target, which seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub scene: usize,
    pub target: String,
    pub seed: u64,
}

/// A benchmark suite: generated scenes plus the episode schedule over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub scenes: Vec<Scene>,
    pub episodes: Vec<EpisodeSpec>,
}

/// Suite shape: how many scenes and episodes, from which master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub scenes: u32,
    pub episodes: u32,
    pub seed: u64,
    pub scene_spec: SceneSpec,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            scenes: 10,
            episodes: 100,
            seed: 7,
            scene_spec: SceneSpec::default(),
        }
    }
}

/// Generate the scenes and schedule episodes round-robin across scenes and
/// their available targets.
pub fn build_suite(cfg: &SuiteConfig) -> Result<Suite, GenError> {
    if cfg.scenes == 0 || cfg.episodes == 0 {
        return Err(GenError::Infeasible(
            "a suite needs at least one scene and one episode".into(),
        ));
    }
    let scenes: Vec<Scene> = (0..cfg.scenes)
        .map(|k| generate_scene(derive_seed(cfg.seed, k as u64), &cfg.scene_spec))
        .collect::<Result<_, _>>()?;
    let episodes = (0..cfg.episodes as usize)
        .map(|k| {
            let scene = k % scenes.len();
            let round = k / scenes.len();
            let targets = &scenes[scene].targets;
            EpisodeSpec {
                scene,
                target: targets[round % targets.len()].clone(),
                seed: derive_seed(cfg.seed, 0x0E50_0000 + k as u64),
            }
        })
        .collect();
    Ok(Suite { scenes, episodes })
}

/// Which reasoner drives the decisions; built fresh per episode so parallel
/// runs stay deterministic.
#[derive(Debug, Clone, PartialEq)]
pub enum ReasonerKind {
    Heuristic,
    /// Omniscient: answers from the ground-truth scene.
    Scripted,
    /// Uniformly random valid answers.
    UniformRandom,
    Remote(String),
}

impl ReasonerKind {
    pub fn label(&self) -> String {
        match self {
            ReasonerKind::Heuristic => "heuristic".into(),
            ReasonerKind::Scripted => "scripted".into(),
            ReasonerKind::UniformRandom => "random".into(),
            ReasonerKind::Remote(url) => format!("remote:{url}"),
        }
    }

    pub fn build(&self, scene: &Scene, seed: u64) -> Box<dyn Reasoner> {
        match self {
            ReasonerKind::Heuristic => Box::new(HeuristicReasoner),
            ReasonerKind::Scripted => Box::new(ScriptedReasoner::new(scene.clone())),
            ReasonerKind::UniformRandom => Box::new(UniformRandomReasoner::new(seed)),
            ReasonerKind::Remote(url) => {
                Box::new(RemoteReasoner::new(RemoteConfig::new(url.clone())))
            }
        }
    }
}

/// Benchmark run parameters.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub pipeline: PipelineConfig,
    pub reasoner: ReasonerKind,
    /// Run episodes one by one instead of in parallel; the report bytes are
    /// identical either way.
    pub serial: bool,
    /// When set, each episode dumps its per-cycle artifacts under
    /// `<root>/episode_NNN/`.
    pub debug_root: Option<PathBuf>,
}

impl BenchmarkConfig {
    pub fn new(reasoner: ReasonerKind) -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            reasoner,
            serial: false,
            debug_root: None,
        }
    }
}

/// One row of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub scene: usize,
    #[serde(flatten)]
    pub result: EpisodeResult,
}

/// Aggregated benchmark outcome. Serialized reports are byte-stable for a
/// fixed suite and configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub reasoner: String,
    /// SHA-256 over the canonical serialization of the run configuration.
    pub fingerprint: String,
    pub sr: f64,
    pub spl: f64,
    pub episodes: Vec<EpisodeRow>,
}

fn fingerprint(suite: &Suite, cfg: &BenchmarkConfig) -> String {
    let descriptor = json!({
        "pipeline": cfg.pipeline,
        "reasoner": cfg.reasoner.label(),
        "episodes": suite.episodes,
    });
    let bytes = serde_json::to_vec(&descriptor).unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    digest.iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

/// Run every episode of the suite (parallel unless `serial`), aggregate
/// SR/SPL, and assemble the report. A panicking episode is caught and
/// recorded as a failure at the step limit.
pub fn run_benchmark(suite: &Suite, cfg: &BenchmarkConfig) -> BenchmarkReport {
    let worlds: Vec<World> = suite
        .scenes
        .iter()
        .map(|s| {
            World::new(
                s.clone(),
                cfg.pipeline.agent.clone(),
                cfg.pipeline.grid.meters_per_cell,
            )
        })
        .collect();

    let run_one = |i: usize| -> EpisodeRow {
        let ep = &suite.episodes[i];
        let debug_dir = cfg
            .debug_root
            .as_ref()
            .map(|root| root.join(format!("episode_{i:03}")));
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            let reasoner = cfg.reasoner.build(&suite.scenes[ep.scene], ep.seed);
            run_episode(
                &worlds[ep.scene],
                &ep.target,
                ep.seed,
                reasoner.as_ref(),
                &cfg.pipeline,
                debug_dir.as_deref(),
            )
        }));
        let result = outcome.unwrap_or_else(|_| EpisodeResult {
            success: false,
            steps: cfg.pipeline.policy.step_limit,
            path_length: 0.0,
            shortest_length: 0.0,
            target: ep.target.clone(),
            seed: ep.seed,
        });
        EpisodeRow {
            episode: i,
            scene: ep.scene,
            result,
        }
    };

    let indices: Vec<usize> = (0..suite.episodes.len()).collect();
    let rows: Vec<EpisodeRow> = if cfg.serial {
        indices.into_iter().map(run_one).collect()
    } else {
        indices.into_par_iter().map(run_one).collect()
    };

    let results: Vec<EpisodeResult> = rows.iter().map(|r| r.result.clone()).collect();
    BenchmarkReport {
        reasoner: cfg.reasoner.label(),
        fingerprint: fingerprint(suite, cfg),
        sr: compute_sr(&results).unwrap_or(0.0),
        spl: compute_spl(&results).unwrap_or(0.0),
        episodes: rows,
    }
}

impl BenchmarkReport {
    /// Machine-readable report document.
    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).unwrap_or_default();
        bytes.push(b'\n');
        bytes
    }

    /// Human-readable fixed-width table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "reasoner    : {}", self.reasoner);
        let _ = writeln!(out, "fingerprint : {}", self.fingerprint);
        let _ = writeln!(out, "episodes    : {}", self.episodes.len());
        let _ = writeln!(out, "SR          : {:.2}%", self.sr);
        let _ = writeln!(out, "SPL         : {:.2}%", self.spl);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>4} {:>6} {:<11} {:>20} {:>3} {:>6} {:>9} {:>9}",
            "ep", "scene", "target", "seed", "ok", "steps", "path_m", "short_m"
        );
        for row in &self.episodes {
            let r = &row.result;
            let _ = writeln!(
                out,
                "{:>4} {:>6} {:<11} {:>20} {:>3} {:>6} {:>9.3} {:>9.3}",
                row.episode,
                row.scene,
                r.target,
                r.seed,
                if r.success { "yes" } else { "no" },
                r.steps,
                r.path_length,
                r.shortest_length,
            );
        }
        out
    }
}
