//! Command-line interface: benchmark runs, single episodes, scene-suite
//! generation, and offline prompt-map rendering.

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use topnav::avpg;
use topnav::config::{FusionMode, PipelineConfig};
use topnav::harness::{
    build_suite, derive_seed, generate_scene, run_benchmark, BenchmarkConfig, ReasonerKind,
    SceneSpec, SuiteConfig,
};
use topnav::policy::run_episode;
use topnav::reasoner::ENDPOINT_ENV_VAR;
use topnav::topmap::OccupancyGrid;
use topnav::worldsim::{load_scene, serialize_scene, Pose, Scene, World};

#[derive(Parser)]
#[command(
    name = "topnav",
    version,
    about = "Deterministic object-goal navigation benchmark on top-view visual-prompt maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark suite and write JSON + text reports.
    Run(RunArgs),
    /// Run a single episode and print its result.
    Episode(EpisodeArgs),
    /// Generate a suite of scene files.
    Genscenes(GenScenesArgs),
    /// Render a visual-prompt map from a saved grid snapshot.
    Render(RenderArgs),
}

/// Pipeline configuration: an optional JSON file plus flag overrides.
#[derive(Args)]
struct PipelineFlags {
    /// Pipeline configuration file (JSON); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Disable dynamic map scaling.
    #[arg(long)]
    no_dms: bool,
    /// Disable potential-target prediction; marker scores alone pick the goal.
    #[arg(long)]
    no_ptd: bool,
    /// Value fusion mode: gaussian | max.
    #[arg(long)]
    fusion: Option<String>,
    /// Drop a render layer (repeatable): history | obstacle | textboxes | coordinate.
    #[arg(long = "render-ablation", value_name = "LAYER")]
    render_ablation: Vec<String>,
    /// Weight of the predicted-target Gaussian.
    #[arg(long)]
    beta: Option<f64>,
}

impl PipelineFlags {
    fn build(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        if self.no_dms {
            cfg.use_dms = false;
        }
        if self.no_ptd {
            cfg.use_ptd = false;
        }
        if let Some(fusion) = &self.fusion {
            cfg.fusion_mode = FusionMode::from_str(fusion).map_err(anyhow::Error::msg)?;
        }
        if let Some(beta) = self.beta {
            cfg.fusion.beta = beta;
        }
        for layer in &self.render_ablation {
            match layer.as_str() {
                "history" => cfg.render.layers.history = false,
                "obstacle" => cfg.render.layers.obstacle = false,
                "textboxes" => cfg.render.layers.textboxes = false,
                "coordinate" => cfg.render.layers.coordinate = false,
                other => bail!("unknown render layer '{other}' (history|obstacle|textboxes|coordinate)"),
            }
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ReasonerFlags {
    /// Decision backend: heuristic | scripted | random | remote.
    #[arg(long, default_value = "heuristic")]
    reasoner: String,
    /// Remote reasoner endpoint; defaults to $TOPV_REASONER_URL.
    #[arg(long)]
    endpoint: Option<String>,
}

impl ReasonerFlags {
    fn kind(&self) -> Result<ReasonerKind> {
        Ok(match self.reasoner.as_str() {
            "heuristic" => ReasonerKind::Heuristic,
            "scripted" => ReasonerKind::Scripted,
            "random" => ReasonerKind::UniformRandom,
            "remote" => {
                let url = self
                    .endpoint
                    .clone()
                    .or_else(|| std::env::var(ENDPOINT_ENV_VAR).ok())
                    .with_context(|| {
                        format!("remote reasoner needs --endpoint or ${ENDPOINT_ENV_VAR}")
                    })?;
                ReasonerKind::Remote(url)
            }
            other => bail!("unknown reasoner '{other}' (heuristic|scripted|random|remote)"),
        })
    }
}

#[derive(Args)]
struct SuiteFlags {
    /// Scenes in the generated suite.
    #[arg(long, default_value_t = 10)]
    scenes: u32,
    /// Episodes scheduled across the scenes.
    #[arg(long, default_value_t = 100)]
    episodes: u32,
    /// Master seed for scene generation and episode scheduling.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Rooms per generated scene (1..=5).
    #[arg(long, default_value_t = 3)]
    rooms: u32,
    /// Objects per room, counting the room's guaranteed targets.
    #[arg(long, default_value_t = 4)]
    objects_per_room: u32,
}

impl SuiteFlags {
    fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            scenes: self.scenes,
            episodes: self.episodes,
            seed: self.seed,
            scene_spec: SceneSpec {
                rooms: self.rooms,
                objects_per_room: self.objects_per_room,
            },
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[command(flatten)]
    reasoner: ReasonerFlags,
    #[command(flatten)]
    suite: SuiteFlags,
    /// Run episodes sequentially instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Dump per-cycle artifacts for every episode under this directory.
    #[arg(long, value_name = "DIR")]
    debug_dump: Option<PathBuf>,
    /// Report path; the text table is written next to it with a .txt extension.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EpisodeArgs {
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[command(flatten)]
    reasoner: ReasonerFlags,
    /// Scene file (JSON); omitted, a scene is generated from --seed.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Episode seed (also the generated scene's seed).
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Rooms per generated scene when no --scene is given.
    #[arg(long, default_value_t = 3)]
    rooms: u32,
    /// Objects per room when no --scene is given.
    #[arg(long, default_value_t = 4)]
    objects_per_room: u32,
    /// Target category; defaults to the scene's first declared target.
    #[arg(long)]
    target: Option<String>,
    /// Dump per-cycle artifacts into this directory.
    #[arg(long, value_name = "DIR")]
    debug_dump: Option<PathBuf>,
}

#[derive(Args)]
struct GenScenesArgs {
    /// How many scenes to generate.
    #[arg(long, default_value_t = 10)]
    count: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    rooms: u32,
    #[arg(long, default_value_t = 4)]
    objects_per_room: u32,
    /// Output directory for scene_NNN.json files and the manifest.
    #[arg(long, default_value = "scenes")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Grid snapshot image (PNG) written by the mapper.
    #[arg(long)]
    snapshot: PathBuf,
    /// Snapshot sidecar; defaults to the snapshot path with a .json extension.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Output image path; a .json sidecar is written next to it.
    #[arg(long, default_value = "prompt_map.png")]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Episode(args) => episode(args),
        Command::Genscenes(args) => genscenes(args),
        Command::Render(args) => render(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let pipeline = args.pipeline.build()?;
    let suite = build_suite(&args.suite.suite_config())?;
    let cfg = BenchmarkConfig {
        pipeline,
        reasoner: args.reasoner.kind()?,
        serial: args.serial,
        debug_root: args.debug_dump,
    };
    let report = run_benchmark(&suite, &cfg);
    fs::write(&args.out, report.to_json())
        .with_context(|| format!("writing {}", args.out.display()))?;
    let table_path = args.out.with_extension("txt");
    fs::write(&table_path, report.to_table())
        .with_context(|| format!("writing {}", table_path.display()))?;
    print!("{}", report.to_table());
    println!("report: {}", args.out.display());
    Ok(())
}

fn load_or_generate(
    scene_path: &Option<PathBuf>,
    seed: u64,
    rooms: u32,
    objects_per_room: u32,
) -> Result<Scene> {
    match scene_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading scene {}", path.display()))?;
            Ok(load_scene(&text)?)
        }
        None => Ok(generate_scene(
            seed,
            &SceneSpec {
                rooms,
                objects_per_room,
            },
        )?),
    }
}

fn episode(args: EpisodeArgs) -> Result<()> {
    let pipeline = args.pipeline.build()?;
    let scene = load_or_generate(&args.scene, args.seed, args.rooms, args.objects_per_room)?;
    let target = match args.target {
        Some(t) => t,
        None => scene
            .targets
            .first()
            .context("the scene declares no targets; pass --target")?
            .clone(),
    };
    if !scene.targets.contains(&target) {
        bail!(
            "target '{}' not declared by the scene (available: {})",
            target,
            scene.targets.join(", ")
        );
    }
    let kind = args.reasoner.kind()?;
    let world = World::new(scene, pipeline.agent.clone(), pipeline.grid.meters_per_cell);
    let reasoner = kind.build(&world.scene, args.seed);
    let result = run_episode(
        &world,
        &target,
        args.seed,
        reasoner.as_ref(),
        &pipeline,
        args.debug_dump.as_deref(),
    );
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn genscenes(args: GenScenesArgs) -> Result<()> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let spec = SceneSpec {
        rooms: args.rooms,
        objects_per_room: args.objects_per_room,
    };
    let mut manifest = Vec::new();
    for k in 0..args.count {
        let scene_seed = derive_seed(args.seed, k as u64);
        let scene = generate_scene(scene_seed, &spec)?;
        let file = format!("scene_{k:03}.json");
        fs::write(args.out.join(&file), serialize_scene(&scene))?;
        manifest.push(serde_json::json!({
            "file": file,
            "seed": scene_seed,
            "targets": scene.targets,
        }));
        println!("{file}: targets {}", scene.targets.join(", "));
    }
    let manifest_doc = serde_json::json!({
        "seed": args.seed,
        "spec": spec,
        "scenes": manifest,
    });
    fs::write(
        args.out.join("suite.json"),
        serde_json::to_vec_pretty(&manifest_doc)?,
    )?;
    println!("manifest: {}", args.out.join("suite.json").display());
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let pipeline = args.pipeline.build()?;
    let meta_path = args
        .meta
        .clone()
        .unwrap_or_else(|| args.snapshot.with_extension("json"));
    let grid = OccupancyGrid::load_snapshot(&args.snapshot, &meta_path)
        .with_context(|| format!("loading snapshot {}", args.snapshot.display()))?;

    // Pose: the trajectory's last cell; the snapshot stores no heading, so
    // the agent is drawn facing east.
    let pose = grid
        .trajectory
        .last()
        .map(|&c| {
            let p = grid.frame.cell_center(c);
            Pose::new(p.x, p.y, 0.0)
        })
        .unwrap_or_else(|| {
            let p = grid.frame.world_rect().center();
            Pose::new(p.x, p.y, 0.0)
        });

    let frontiers = grid.detect_frontiers();
    let mut points: Vec<_> = grid.object_log.iter().map(|o| o.position).collect();
    points.extend(frontiers.iter().map(|f| f.midpoint));
    let markers = avpg::merge_areas(
        &avpg::cluster_key_areas(&points, &pipeline.cluster),
        &pipeline.cluster,
    );
    let pm = avpg::render_prompt_map(
        &grid,
        &markers,
        &pose,
        &frontiers,
        grid.frame.world_rect(),
        pipeline.render.pixels_per_meter,
        &pipeline.render,
    );
    fs::write(&args.out, pm.png_bytes())
        .with_context(|| format!("writing {}", args.out.display()))?;
    let sidecar = args.out.with_extension("json");
    fs::write(&sidecar, serde_json::to_vec_pretty(&pm.meta)?)?;
    println!("{} ({}x{} px), sidecar {}", args.out.display(), pm.image.width(), pm.image.height(), sidecar.display());
    Ok(())
}
