//! Local policy: path planning over the agent's own occupancy map, low-level
//! action emission, and the episode loop that ties sensing, mapping, visual
//! prompting, reasoning, and motion together.

use std::collections::{BinaryHeap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde_json::json;

use crate::avpg::{self, PromptMap};
use crate::config::{FusionMode, PipelineConfig, PolicyConfig};
use crate::dms;
use crate::geometry::{angle_diff, Cell, GridFrame, Point};
use crate::harness::EpisodeResult;
use crate::ptd::{self, MarkerScores, TargetEstimate, ValueMap};
use crate::reasoner::{QueryRole, Reasoner, ReasonerAnswer, ReasonerQuery};
use crate::topmap::{shortest_path_to_disk, CellState, OccupancyGrid, NEIGHBORS_8};
use crate::worldsim::{Action, Observation, Pose, World};

/// What a plan is for: reaching an exploration goal or closing in on a
/// detected target instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Explore,
    Approach,
}

impl PlanMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanMode::Explore => "explore",
            PlanMode::Approach => "approach",
        }
    }
}

/// An 8-connected waypoint path over known-Free cells toward a goal point.
#[derive(Debug, Clone)]
pub struct Plan {
    /// Remaining waypoints, front first; consecutive cells are 8-adjacent.
    pub waypoints: VecDeque<Cell>,
    /// The point the plan drives toward, meters.
    pub goal: Point,
    pub mode: PlanMode,
    frame: GridFrame,
}

impl Plan {
    /// Drop leading waypoints the agent has already reached.
    pub fn advance(&mut self, pose: &Pose, radius_m: f64) {
        while let Some(&c) = self.waypoints.front() {
            if pose.position.distance(self.frame.cell_center(c)) <= radius_m {
                self.waypoints.pop_front();
            } else {
                break;
            }
        }
    }

    /// Center of the waypoint currently steered toward.
    pub fn current_waypoint(&self) -> Option<Point> {
        self.waypoints.front().map(|&c| self.frame.cell_center(c))
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

/// Open-list entry; `BinaryHeap` is a max-heap, so order by descending
/// priority with a cell-index tie-break to keep expansion deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenEntry {
    f: f64,
    index: usize,
    cell: Cell,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Octile distance in cell units: the cost of the best unobstructed
/// 8-connected path, hence an admissible and consistent heuristic.
fn octile(a: Cell, b: Cell) -> f64 {
    let dc = (a.col - b.col).abs() as f64;
    let dr = (a.row - b.row).abs() as f64;
    let diag = dc.min(dr);
    (dc - dr).abs() + std::f64::consts::SQRT_2 * diag
}

/// Clearance kept between planned paths and known obstacles, in cells. A
/// forward step is five cells long and may deviate from the path by the
/// waypoint pop radius plus the heading tolerance, so a path hugging an
/// obstacle would sweep the agent into it during execution.
const PLAN_CLEARANCE_CELLS: i32 = 3;

/// Per-index traversability used by the planner: a cell is plannable when
/// it is known Free and no known obstacle lies within the clearance margin.
/// Cells near `start` are exempt from the margin (but still must be Free):
/// the agent may already stand tighter to an obstacle than the margin
/// allows and has to be able to walk out.
pub fn plannable_cells(grid: &OccupancyGrid, start: Cell) -> Vec<bool> {
    let frame = &grid.frame;
    let n = frame.n_cells();
    let m = PLAN_CLEARANCE_CELLS;
    let mut clear = vec![true; n];
    for i in 0..n {
        let c = frame.cell_at_index(i);
        if grid.state(c) != CellState::Obstacle {
            continue;
        }
        for dr in -m..=m {
            for dc in -m..=m {
                let nb = Cell::new(c.col + dc, c.row + dr);
                if frame.contains_cell(nb) {
                    clear[frame.index(nb)] = false;
                }
            }
        }
    }
    if frame.contains_cell(start) && !clear[frame.index(start)] {
        for dr in -m..=m {
            for dc in -m..=m {
                let nb = Cell::new(start.col + dc, start.row + dr);
                if frame.contains_cell(nb) {
                    clear[frame.index(nb)] = true;
                }
            }
        }
    }
    for (i, c) in clear.iter_mut().enumerate() {
        if *c && !grid.is_free(frame.cell_at_index(i)) {
            *c = false;
        }
    }
    clear
}

/// Optimal 8-connected path over plannable cells from `from` to `to` (see
/// [`plannable_cells`]: known Free with a clearance margin from known
/// obstacles). A diagonal move is allowed only when both cells it squeezes
/// between are Free, so that the swept motion of the agent stays in free
/// space. When `to` is unreachable the plan ends at the reachable cell
/// nearest to it; when nothing beyond the start is reachable the plan is
/// empty.
pub fn plan_path(grid: &OccupancyGrid, from: Point, to: Point) -> Plan {
    let frame = grid.frame;
    let mut plan = Plan {
        waypoints: VecDeque::new(),
        goal: to,
        mode: PlanMode::Explore,
        frame,
    };
    let start = frame.world_to_cell(from);
    if !grid.is_free(start) {
        return plan;
    }
    let goal = frame.world_to_cell(to);
    if start == goal {
        plan.waypoints.push_back(start);
        return plan;
    }
    let plannable = plannable_cells(grid, start);

    let n = frame.n_cells();
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let si = frame.index(start);
    g[si] = 0.0;
    open.push(OpenEntry {
        f: octile(start, goal),
        index: si,
        cell: start,
    });

    let mut reached = false;
    while let Some(entry) = open.pop() {
        let ci = frame.index(entry.cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if entry.cell == goal {
            reached = true;
            break;
        }
        for (dc, dr) in NEIGHBORS_8 {
            let next = Cell::new(entry.cell.col + dc, entry.cell.row + dr);
            if !frame.contains_cell(next) || !plannable[frame.index(next)] {
                continue;
            }
            let diagonal = dc != 0 && dr != 0;
            if diagonal {
                let side_a = Cell::new(entry.cell.col + dc, entry.cell.row);
                let side_b = Cell::new(entry.cell.col, entry.cell.row + dr);
                if !grid.is_free(side_a) || !grid.is_free(side_b) {
                    continue;
                }
            }
            let step = if diagonal {
                std::f64::consts::SQRT_2
            } else {
                1.0
            };
            let ni = frame.index(next);
            let ng = g[ci] + step;
            if ng < g[ni] - 1e-12 {
                g[ni] = ng;
                parent[ni] = ci as u32;
                open.push(OpenEntry {
                    f: ng + octile(next, goal),
                    index: ni,
                    cell: next,
                });
            }
        }
    }

    let end_index = if reached {
        frame.index(goal)
    } else {
        // Nearest settled cell to the requested goal; ties break on cell
        // index so replans are reproducible.
        let mut best: Option<(f64, usize)> = None;
        for (i, was_closed) in closed.iter().enumerate() {
            if !was_closed {
                continue;
            }
            let d = frame.cell_center(frame.cell_at_index(i)).distance(to);
            if best.map(|(bd, _)| d < bd).unwrap_or(true) {
                best = Some((d, i));
            }
        }
        match best {
            Some((_, i)) if i != si => i,
            _ => return plan, // nothing reachable beyond the start
        }
    };

    let mut cells = Vec::new();
    let mut cursor = end_index;
    loop {
        cells.push(frame.cell_at_index(cursor));
        if cursor == si {
            break;
        }
        cursor = parent[cursor] as usize;
    }
    cells.reverse();
    plan.waypoints = cells.into();
    plan
}

/// The next low-level action toward the front waypoint: waypoints within
/// `waypoint_radius_m` are popped first, then the agent drives forward when
/// its heading is within the tolerance of the bearing to the waypoint and
/// turns toward it otherwise (an exact 180° error turns left). An exhausted
/// plan yields `Stop`, which the episode loop treats as "goal reached,
/// replan".
pub fn next_action(plan: &mut Plan, pose: &Pose, cfg: &PolicyConfig) -> Action {
    plan.advance(pose, cfg.waypoint_radius_m);
    let Some(wp) = plan.current_waypoint() else {
        return Action::Stop;
    };
    let err = angle_diff(pose.heading, pose.position.bearing_to(wp));
    if err.abs() <= cfg.heading_tolerance_deg.to_radians() + 1e-9 {
        Action::MoveForward
    } else if err > 0.0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}

/// Pass-through reasoner that can additionally keep a transcript of every
/// query/answer pair for the debug dump.
struct Recording<'a> {
    inner: &'a dyn Reasoner,
    enabled: bool,
    log: Mutex<Vec<serde_json::Value>>,
}

impl<'a> Recording<'a> {
    fn new(inner: &'a dyn Reasoner, enabled: bool) -> Self {
        Self {
            inner,
            enabled,
            log: Mutex::new(Vec::new()),
        }
    }

    fn drain(&self) -> Vec<serde_json::Value> {
        self.log.lock().map(|mut l| l.drain(..).collect()).unwrap_or_default()
    }
}

fn answer_json(answer: &ReasonerAnswer) -> serde_json::Value {
    match answer {
        ReasonerAnswer::Region(None) => json!({ "region": null }),
        ReasonerAnswer::Region(Some(p)) => json!({ "region": [p.x, p.y] }),
        ReasonerAnswer::Target(p) => json!({ "target": [p.x, p.y] }),
        ReasonerAnswer::Scores(s) => json!({ "scores": s.scores }),
    }
}

impl Reasoner for Recording<'_> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn query(&self, q: &ReasonerQuery) -> ReasonerAnswer {
        let answer = self.inner.query(q);
        if self.enabled {
            if let Ok(mut log) = self.log.lock() {
                log.push(json!({
                    "role": q.role.as_str(),
                    "target": q.target_category,
                    "answer": answer_json(&answer),
                }));
            }
        }
        answer
    }
}

fn png_bytes_of(img: &image::RgbImage) -> Vec<u8> {
    let mut bytes = Vec::new();
    let mut cursor = std::io::Cursor::new(&mut bytes);
    let _ = img.write_to(&mut cursor, image::ImageFormat::Png);
    bytes
}

#[allow(clippy::too_many_arguments)]
fn dump_cycle(
    dir: &Path,
    cycle: usize,
    pm: &PromptMap,
    vmap: Option<&ValueMap>,
    pose: &Pose,
    goal: Point,
    mode: PlanMode,
    scores: Option<&Vec<f64>>,
    estimate: Option<Point>,
    recording: &Recording,
) {
    let cdir = dir.join(format!("cycle_{cycle:03}"));
    if fs::create_dir_all(&cdir).is_err() {
        return;
    }
    let _ = fs::write(cdir.join("prompt_map.png"), pm.png_bytes());
    if let Ok(meta) = serde_json::to_vec_pretty(&pm.meta) {
        let _ = fs::write(cdir.join("prompt_map.json"), meta);
    }
    if let Some(v) = vmap {
        let _ = fs::write(cdir.join("value_map.png"), png_bytes_of(&v.to_heatmap()));
    }
    let decision = json!({
        "cycle": cycle,
        "pose": [pose.position.x, pose.position.y, pose.heading.to_degrees()],
        "mode": mode.as_str(),
        "moving_location": [goal.x, goal.y],
        "marker_scores": scores,
        "target_estimate": estimate.map(|p| [p.x, p.y]),
    });
    if let Ok(bytes) = serde_json::to_vec_pretty(&decision) {
        let _ = fs::write(cdir.join("decision.json"), bytes);
    }
    if let Ok(bytes) = serde_json::to_vec_pretty(&recording.drain()) {
        let _ = fs::write(cdir.join("transcript.json"), bytes);
    }
}

/// Moving locations the agent has already reached are uninteresting within
/// this radius: with an unchanged map a deterministic reasoner would pick
/// the same spot forever, so the loop banks reached goals and falls back to
/// fresh frontiers instead.
const GOAL_MEMORY_RADIUS_M: f64 = 0.45;

/// Nearest logged instance of the target category, if any has been seen.
fn nearest_logged(grid: &OccupancyGrid, target: &str, pose: &Pose) -> Option<Point> {
    grid.object_log
        .iter()
        .filter(|o| o.category == target)
        .min_by(|a, b| {
            a.position
                .distance(pose.position)
                .total_cmp(&b.position.distance(pose.position))
                .then(a.first_seen.cmp(&b.first_seen))
        })
        .map(|o| o.position)
}

/// Run one full episode: the agent starts at the scene's start pose and
/// must stop within the success radius of a visible instance of `target`.
///
/// Each high-level cycle observes, integrates, builds the visual-prompt
/// map, optionally zooms it, selects a moving location through the
/// reasoner, plans a path, and executes low-level actions until the goal
/// is reached, the plan degrades, or the replan budget elapses. Detecting
/// the target switches the loop into approach mode; the episode ends when
/// the agent stops next to a visible instance or the step limit forces a
/// stop. Reasoner and planning failures degrade to fallbacks and never
/// abort the episode.
///
/// With `debug_dir` set, every cycle dumps the prompt map (PNG and
/// sidecar), the fused value map, the chosen moving location, and the
/// reasoner transcript into `cycle_NNN/` subdirectories; the episode's
/// final occupancy grid is exported alongside them as a reloadable
/// snapshot (`grid.png` plus `grid.json`).
pub fn run_episode(
    world: &World,
    target: &str,
    seed: u64,
    reasoner: &dyn Reasoner,
    cfg: &PipelineConfig,
    debug_dir: Option<&Path>,
) -> EpisodeResult {
    let start = world.scene.start;
    let success_r = cfg.policy.success_radius_m;
    let limit = cfg.policy.step_limit;
    let tol = cfg.policy.heading_tolerance_deg.to_radians();

    // Ground-truth shortest path to the success disk of any instance, for
    // SPL; unreachable targets record zero and can only fail.
    let instance_positions: Vec<Point> = world
        .scene
        .instances_of(target)
        .into_iter()
        .map(|i| world.scene.objects[i].position)
        .collect();
    let shortest = shortest_path_to_disk(&world.truth, start.position, &instance_positions, success_r)
        .unwrap_or(0.0);

    let recording = Recording::new(reasoner, debug_dir.is_some());
    let reasoner: &dyn Reasoner = &recording;
    if let Some(dir) = debug_dir {
        let _ = fs::create_dir_all(dir);
    }

    let mut pose = start;
    let mut grid = OccupancyGrid::new(&cfg.grid, start.position);
    let mut steps: u32 = 0;
    let mut path_length = 0.0_f64;

    let mut obs = world.observe(&pose, &grid.frame);
    grid.integrate(&obs, &pose);

    let in_reach = |obs: &Observation, pose: &Pose| {
        obs.visible_objects
            .iter()
            .any(|(c, p)| c == target && p.distance(pose.position) <= success_r)
    };
    let finish = |pose: &Pose, steps: u32, path_length: f64, grid: &OccupancyGrid| {
        if let Some(dir) = debug_dir {
            let _ = grid.save_snapshot(&dir.join("grid.png"), &dir.join("grid.json"));
        }
        EpisodeResult {
            success: world.is_success(pose, target, success_r),
            steps,
            path_length,
            shortest_length: shortest,
            target: target.to_string(),
            seed,
        }
    };

    // The target may be in reach straight from the spawn.
    if in_reach(&obs, &pose) && steps < limit {
        return finish(&pose, steps + 1, path_length, &grid);
    }

    // One full in-place rotation seeds the map before the first decision;
    // cut short as soon as the target is spotted.
    if cfg.policy.initial_scan {
        let turns = (std::f64::consts::TAU / world.agent.turn_increment_rad()).round() as u32;
        for _ in 0..turns {
            if steps >= limit || grid.object_log.iter().any(|o| o.category == target) {
                break;
            }
            pose = world.step(&pose, Action::TurnLeft);
            steps += 1;
            obs = world.observe(&pose, &grid.frame);
            grid.integrate(&obs, &pose);
            if in_reach(&obs, &pose) && steps < limit {
                return finish(&pose, steps + 1, path_length, &grid);
            }
        }
    }

    let full_rect = grid.frame.world_rect();
    let mut reached_goals: Vec<Point> = Vec::new();
    let mut cycle: usize = 0;
    while steps < limit {
        let steps_at_cycle = steps;

        // ---- High-level decision ----
        let frontiers = grid.detect_frontiers();
        let mut points: Vec<Point> = grid.object_log.iter().map(|o| o.position).collect();
        points.extend(frontiers.iter().map(|f| f.midpoint));
        let markers = avpg::merge_areas(&avpg::cluster_key_areas(&points, &cfg.cluster), &cfg.cluster);
        let mut pm = avpg::render_prompt_map(
            &grid,
            &markers,
            &pose,
            &frontiers,
            full_rect,
            cfg.render.pixels_per_meter,
            &cfg.render,
        );
        if cfg.use_dms {
            pm = dms::apply_dms(&grid, &pm, &pose, &frontiers, reasoner, target, cfg);
        }

        // A goal is stale when the agent is already there or has been there:
        // with an unchanged map the reasoner would keep choosing it.
        let stale = |p: Point, pose: &Pose, reached: &[Point]| {
            p.distance(pose.position) <= cfg.policy.waypoint_radius_m
                || reached.iter().any(|g| g.distance(p) <= GOAL_MEMORY_RADIUS_M)
        };
        let fresh_frontier = |pose: &Pose, reached: &[Point]| {
            frontiers
                .iter()
                .map(|f| f.midpoint)
                .filter(|m| !stale(*m, pose, reached))
                .min_by(|a, b| {
                    a.distance(pose.position)
                        .total_cmp(&b.distance(pose.position))
                        .then(a.x.total_cmp(&b.x))
                        .then(a.y.total_cmp(&b.y))
                })
        };

        let mut vmap: Option<ValueMap> = None;
        let mut scores_dump: Option<Vec<f64>> = None;
        let mut estimate_dump: Option<Point> = None;
        let (mut goal, mut mode) = if let Some(tp) = nearest_logged(&grid, target, &pose) {
            (tp, PlanMode::Approach)
        } else {
            let chosen = if pm.markers.is_empty() && !cfg.use_ptd {
                None
            } else {
                let raw = match reasoner.query(&ReasonerQuery {
                    role: QueryRole::ScoreMarkers,
                    prompt_map: &pm,
                    target_category: target,
                }) {
                    ReasonerAnswer::Scores(s) => s.scores,
                    _ => Vec::new(),
                };
                let mut padded = raw;
                padded.resize(pm.markers.len(), 0.5);
                let scores = MarkerScores::clamped(padded);
                scores_dump = Some(scores.scores.clone());
                if cfg.use_ptd {
                    let estimate = match reasoner.query(&ReasonerQuery {
                        role: QueryRole::PredictTarget,
                        prompt_map: &pm,
                        target_category: target,
                    }) {
                        ReasonerAnswer::Target(p) => TargetEstimate::clamped(p, &full_rect),
                        _ => TargetEstimate::clamped(pose.position, &full_rect),
                    };
                    estimate_dump = Some(estimate.position);
                    match cfg.fusion_mode {
                        FusionMode::Gaussian => {
                            let v = ptd::fuse(
                                &pm.markers,
                                &scores,
                                Some(&estimate),
                                &grid.frame,
                                &cfg.fusion,
                            );
                            let picked = ptd::select_moving_location(&v, &grid).ok();
                            vmap = Some(v);
                            picked
                        }
                        FusionMode::Max => ptd::select_moving_location_max(
                            &pm.markers,
                            &scores,
                            Some(&estimate),
                            cfg.fusion.beta,
                            &grid,
                        )
                        .ok(),
                    }
                } else {
                    // Marker-score-only ablation: the best-scored marker,
                    // snapped to free space; ties go to the lower id.
                    pm.markers
                        .iter()
                        .zip(&scores.scores)
                        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.id.cmp(&a.0.id)))
                        .and_then(|(m, _)| ptd::snap_to_free(m.centroid, &grid))
                }
            };
            // Drop goals the agent has already exhausted, then fall back to
            // the nearest fresh frontier midpoint.
            let candidate = chosen.filter(|p| !stale(*p, &pose, &reached_goals));
            (
                candidate
                    .or_else(|| fresh_frontier(&pose, &reached_goals))
                    .unwrap_or(pose.position),
                PlanMode::Explore,
            )
        };

        let mut plan = plan_path(&grid, pose.position, goal);
        plan.mode = mode;
        if mode == PlanMode::Approach && pose.position.distance(goal) > success_r {
            // No headway possible toward the detected target right now
            // (everything known near it is already covered); explore for a
            // route instead of camping at the map's edge.
            let no_progress = plan
                .waypoints
                .back()
                .map(|&c| {
                    grid.frame.cell_center(c).distance(pose.position)
                        <= cfg.policy.waypoint_radius_m
                })
                .unwrap_or(true);
            if no_progress {
                if let Some(f) = fresh_frontier(&pose, &reached_goals) {
                    goal = f;
                    mode = PlanMode::Explore;
                    plan = plan_path(&grid, pose.position, goal);
                    plan.mode = mode;
                }
            }
        }

        if let Some(dir) = debug_dir {
            dump_cycle(
                dir,
                cycle,
                &pm,
                vmap.as_ref(),
                &pose,
                goal,
                mode,
                scores_dump.as_ref(),
                estimate_dump,
                &recording,
            );
        }

        // ---- Execute toward the moving location ----
        let mut executed: u32 = 0;
        while steps < limit && executed < cfg.policy.replan_every {
            if in_reach(&obs, &pose) {
                return finish(&pose, steps + 1, path_length, &grid);
            }
            plan.advance(&pose, cfg.policy.waypoint_radius_m);
            if plan.is_empty() {
                if mode == PlanMode::Approach && pose.position.distance(goal) <= success_r {
                    // The path is exhausted next to the target; rotate to
                    // bring it into view, since stopping requires seeing it.
                    let err = angle_diff(pose.heading, pose.position.bearing_to(goal));
                    if err.abs() > tol + 1e-9 {
                        let action = if err > 0.0 {
                            Action::TurnLeft
                        } else {
                            Action::TurnRight
                        };
                        pose = world.step(&pose, action);
                        steps += 1;
                        executed += 1;
                        obs = world.observe(&pose, &grid.frame);
                        grid.integrate(&obs, &pose);
                        continue;
                    }
                }
                break;
            }
            let action = next_action(&mut plan, &pose, &cfg.policy);
            if action == Action::Stop {
                break;
            }
            let next = world.step(&pose, action);
            if action == Action::MoveForward && next.position == pose.position {
                // Bumped into something the map called free: remember the
                // landing cell as an obstacle and try a different heading.
                let landing = Point::new(
                    pose.position.x + world.agent.forward_step_m * pose.heading.cos(),
                    pose.position.y + world.agent.forward_step_m * pose.heading.sin(),
                );
                let blocked = grid.frame.world_to_cell(landing);
                if blocked != grid.frame.world_to_cell(pose.position) {
                    grid.mark_obstacle(blocked);
                }
                pose = world.step(&pose, Action::TurnLeft);
                steps += 1;
                obs = world.observe(&pose, &grid.frame);
                grid.integrate(&obs, &pose);
                break;
            }
            path_length += next.position.distance(pose.position);
            pose = next;
            steps += 1;
            executed += 1;
            obs = world.observe(&pose, &grid.frame);
            grid.integrate(&obs, &pose);
            if mode == PlanMode::Explore && grid.object_log.iter().any(|o| o.category == target) {
                break; // switch to approach on the next cycle
            }
            if pose.position.distance(goal) <= cfg.policy.waypoint_radius_m {
                break; // moving location reached, replan
            }
        }

        if mode == PlanMode::Explore
            && (plan.is_empty() || pose.position.distance(goal) <= cfg.policy.waypoint_radius_m)
        {
            // Either the goal was reached or it is unreachable through known
            // space; bank it so the next decision moves on.
            reached_goals.push(goal);
        }

        if steps == steps_at_cycle && steps < limit {
            // The cycle produced no motion; rotate so the next decision
            // sees a different observation instead of spinning in place.
            pose = world.step(&pose, Action::TurnLeft);
            steps += 1;
            obs = world.observe(&pose, &grid.frame);
            grid.integrate(&obs, &pose);
        }
        cycle += 1;
    }

    // Step limit reached: forced stop where the agent stands.
    finish(&pose, steps, path_length, &grid)
}
