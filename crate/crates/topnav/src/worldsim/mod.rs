//! Synthetic indoor scenes, agent kinematics for the discrete action set,
//! and the egocentric observation model standing in for RGB-D perception.

mod schema;

pub use schema::{load_scene, serialize_scene, SceneError};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::AgentConfig;
use crate::geometry::{angle_diff, normalize_angle, Cell, GridFrame, Point, Rect};

/// An object instance placed in a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub category: String,
    /// Reference point of the instance; success distance and visibility are
    /// measured against it.
    pub position: Point,
    /// Axis-aligned obstacle footprint.
    pub footprint: Rect,
}

/// Agent pose. `heading` is in `[0, 2π)`, `tilt` is camera pitch and has no
/// effect on the 2-D observation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
    pub tilt: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point::new(x, y),
            heading: normalize_angle(heading),
            tilt: 0.0,
        }
    }
}

/// The discrete low-level action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    LookUp,
    LookDown,
    Stop,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::MoveForward,
        Action::TurnLeft,
        Action::TurnRight,
        Action::LookUp,
        Action::LookDown,
        Action::Stop,
    ];
}

/// A static indoor scene: rectangular bounds, axis-aligned walls, placed
/// objects, a start pose and the target categories it supports.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bounds: Rect,
    pub walls: Vec<Rect>,
    pub objects: Vec<PlacedObject>,
    pub start: Pose,
    pub targets: Vec<String>,
}

impl Scene {
    /// True when `p` is inside the bounds and not inside any wall or object
    /// footprint.
    pub fn is_navigable(&self, p: Point) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        if self.walls.iter().any(|w| w.contains_open(p)) {
            return false;
        }
        !self.objects.iter().any(|o| o.footprint.contains_open(p))
    }

    /// Indices of instances of `category`.
    pub fn instances_of(&self, category: &str) -> Vec<usize> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.category == category)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rasterize ground-truth navigability at the given resolution. A cell
    /// is blocked when any wall or footprint overlaps it with positive
    /// area, or when the cell pokes out of the scene bounds.
    pub fn rasterize(&self, meters_per_cell: f64) -> GroundTruth {
        let frame = GridFrame::covering(self.bounds, meters_per_cell);
        let mut navigable = vec![false; frame.n_cells()];
        for (idx, nav) in navigable.iter_mut().enumerate() {
            let cell = frame.cell_at_index(idx);
            let r = frame.cell_rect(cell);
            let inside = r.x >= self.bounds.x - 1e-9
                && r.y >= self.bounds.y - 1e-9
                && r.max_x() <= self.bounds.max_x() + 1e-9
                && r.max_y() <= self.bounds.max_y() + 1e-9;
            if !inside {
                continue;
            }
            let blocked = self.walls.iter().any(|w| w.overlaps(&r))
                || self.objects.iter().any(|o| o.footprint.overlaps(&r));
            *nav = !blocked;
        }
        GroundTruth { frame, navigable }
    }
}

/// Ground-truth navigability raster of a scene, aligned to the scene's
/// minimum corner.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub frame: GridFrame,
    navigable: Vec<bool>,
}

impl GroundTruth {
    pub fn navigable_cell(&self, c: Cell) -> bool {
        self.frame.contains_cell(c) && self.navigable[self.frame.index(c)]
    }

    pub fn navigable_at(&self, p: Point) -> bool {
        self.navigable_cell(self.frame.world_to_cell(p))
    }

    pub fn navigable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.frame.n_cells())
            .filter(|&i| self.navigable[i])
            .map(|i| self.frame.cell_at_index(i))
    }
}

/// What one sensing step reports, already projected into a grid frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub free_cells: BTreeSet<Cell>,
    pub obstacle_cells: BTreeSet<Cell>,
    pub visible_objects: Vec<(String, Point)>,
}

/// A scene bundled with its rasterization and the agent kinematics, exposing
/// the simulator operations. Immutable after construction and safely
/// shareable across concurrent episodes.
#[derive(Debug, Clone)]
pub struct World {
    pub scene: Scene,
    pub truth: GroundTruth,
    pub agent: AgentConfig,
}

impl World {
    pub fn new(scene: Scene, agent: AgentConfig, meters_per_cell: f64) -> Self {
        let truth = scene.rasterize(meters_per_cell);
        Self {
            scene,
            truth,
            agent,
        }
    }

    /// Apply one low-level action. Collisions are silent no-ops; the pose is
    /// returned unchanged when the forward sweep crosses any non-navigable
    /// cell.
    pub fn step(&self, pose: &Pose, action: Action) -> Pose {
        let mut next = *pose;
        match action {
            Action::MoveForward => {
                let dest = Point::new(
                    pose.position.x + self.agent.forward_step_m * pose.heading.cos(),
                    pose.position.y + self.agent.forward_step_m * pose.heading.sin(),
                );
                if self.sweep_navigable(pose.position, dest) {
                    next.position = dest;
                }
            }
            Action::TurnLeft => {
                next.heading = normalize_angle(pose.heading + self.agent.turn_increment_rad());
            }
            Action::TurnRight => {
                next.heading = normalize_angle(pose.heading - self.agent.turn_increment_rad());
            }
            Action::LookUp => {
                next.tilt = (pose.tilt + self.agent.turn_increment_rad())
                    .clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
            }
            Action::LookDown => {
                next.tilt = (pose.tilt - self.agent.turn_increment_rad())
                    .clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
            }
            Action::Stop => {}
        }
        next
    }

    /// Every cell touched by the segment must be navigable for the move to
    /// go through; this also rules out hopping thin walls in one step.
    fn sweep_navigable(&self, from: Point, to: Point) -> bool {
        if !self.truth.navigable_at(to) {
            return false;
        }
        for cell in traverse_cells(&self.truth.frame, from, to) {
            if !self.truth.navigable_cell(cell) {
                return false;
            }
        }
        true
    }

    /// Cast rays across the horizontal field of view and classify the cells
    /// of `frame` they traverse. Objects are visible when within range and
    /// FOV and the straight ray to their position is unobstructed.
    pub fn observe(&self, pose: &Pose, frame: &GridFrame) -> Observation {
        let mut free = BTreeSet::new();
        let mut obstacles = BTreeSet::new();

        let own = frame.world_to_cell(pose.position);
        if frame.contains_cell(own) {
            free.insert(own);
        }

        // Angular step such that adjacent rays are at most one cell apart at
        // max range.
        let step = frame.meters_per_cell / self.agent.max_range_m;
        let half_fov = self.agent.fov_rad() / 2.0;
        let n_rays = (self.agent.fov_rad() / step).ceil() as usize + 1;
        for k in 0..n_rays {
            let theta =
                pose.heading - half_fov + self.agent.fov_rad() * k as f64 / (n_rays - 1) as f64;
            self.cast_ray(pose.position, theta, frame, &mut free, &mut obstacles);
        }
        // A cell can be grazed as free by one ray and hit as an obstacle by
        // another; the obstacle reading wins.
        for c in &obstacles {
            free.remove(c);
        }

        let visible_objects = self
            .scene
            .objects
            .iter()
            .enumerate()
            .filter(|(i, _)| self.object_visible(pose, *i))
            .map(|(_, o)| (o.category.clone(), o.position))
            .collect();

        Observation {
            free_cells: free,
            obstacle_cells: obstacles,
            visible_objects,
        }
    }

    fn cast_ray(
        &self,
        from: Point,
        theta: f64,
        frame: &GridFrame,
        free: &mut BTreeSet<Cell>,
        obstacles: &mut BTreeSet<Cell>,
    ) {
        let to = Point::new(
            from.x + self.agent.max_range_m * theta.cos(),
            from.y + self.agent.max_range_m * theta.sin(),
        );
        for cell in traverse_cells(frame, from, to) {
            if !frame.contains_cell(cell) {
                return;
            }
            // `frame` is the caller's mapping frame, not the ground-truth
            // raster; translate through world coordinates.
            if self.truth.navigable_at(frame.cell_center(cell)) {
                free.insert(cell);
            } else {
                obstacles.insert(cell);
                return;
            }
        }
    }

    /// Line-of-sight test for object `idx`: within range, within FOV, and
    /// the segment to the object's position crosses no wall and no other
    /// object's footprint.
    pub fn object_visible(&self, pose: &Pose, idx: usize) -> bool {
        let obj = &self.scene.objects[idx];
        let dist = pose.position.distance(obj.position);
        if dist > self.agent.max_range_m {
            return false;
        }
        if dist > 1e-12 {
            let bearing = pose.position.bearing_to(obj.position);
            if angle_diff(pose.heading, bearing).abs() > self.agent.fov_rad() / 2.0 + 1e-12 {
                return false;
            }
        }
        self.segment_clear(pose.position, obj.position, Some(idx))
    }

    /// True when the segment hits no wall and no object footprint other
    /// than `ignore`.
    pub fn segment_clear(&self, a: Point, b: Point, ignore: Option<usize>) -> bool {
        if self.scene.walls.iter().any(|w| w.intersects_segment(a, b)) {
            return false;
        }
        !self
            .scene
            .objects
            .iter()
            .enumerate()
            .any(|(i, o)| Some(i) != ignore && o.footprint.intersects_segment(a, b))
    }

    /// Success rule: some instance of `target` lies within the success
    /// radius and that instance is currently visible.
    pub fn is_success(&self, pose: &Pose, target: &str, success_radius_m: f64) -> bool {
        self.scene.instances_of(target).into_iter().any(|i| {
            pose.position.distance(self.scene.objects[i].position) <= success_radius_m
                && self.object_visible(pose, i)
        })
    }
}

/// Amanatides-Woo traversal: every cell of `frame` the segment passes
/// through, in order, starting with the cell containing `from`. Cells are
/// reported even when outside the frame so callers can clip as they wish.
pub fn traverse_cells(frame: &GridFrame, from: Point, to: Point) -> Vec<Cell> {
    let res = frame.meters_per_cell;
    let mut cell = frame.world_to_cell(from);
    let end = frame.world_to_cell(to);
    let mut cells = vec![cell];
    if cell == end {
        return cells;
    }

    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let step_col: i32 = if dx > 0.0 { 1 } else { -1 };
    let step_row: i32 = if dy > 0.0 { 1 } else { -1 };

    // Parametric distance to the first vertical / horizontal cell border.
    let next_border_x = frame.origin.x + (cell.col + i32::max(step_col, 0)) as f64 * res;
    let next_border_y = frame.origin.y + (cell.row + i32::max(step_row, 0)) as f64 * res;
    let mut t_max_x = if dx.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (next_border_x - from.x) / dx
    };
    let mut t_max_y = if dy.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (next_border_y - from.y) / dy
    };
    let t_delta_x = if dx.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (res / dx).abs()
    };
    let t_delta_y = if dy.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (res / dy).abs()
    };

    // A crossing at the far endpoint itself (within rounding) does not pull
    // in the next cell: a segment ending exactly on a border stays in the
    // cell it came from.
    let t_end = 1.0 - 1e-12;
    let max_iters = frame.width as usize + frame.height as usize + 2;
    for _ in 0..max_iters {
        if t_max_x < t_max_y {
            if t_max_x > t_end {
                break;
            }
            cell.col += step_col;
            t_max_x += t_delta_x;
        } else {
            if t_max_y > t_end {
                break;
            }
            cell.row += step_row;
            t_max_y += t_delta_y;
        }
        cells.push(cell);
        if cell == end {
            break;
        }
    }
    cells
}
