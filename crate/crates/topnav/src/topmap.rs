//! Incremental top-view occupancy map built from observations, frontier
//! extraction, and uniform-cost shortest paths over a navigability raster.

use std::collections::BinaryHeap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::GridConfig;
use crate::geometry::{Cell, GridFrame, Point};
use crate::worldsim::{GroundTruth, Observation, Pose};

/// Radius within which repeated detections of the same category collapse to
/// one log entry.
pub const OBJECT_DEDUP_RADIUS_M: f64 = 0.25;

/// Frontier components smaller than this are treated as sensor noise.
pub const MIN_FRONTIER_CELLS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Unknown,
    Free,
    Obstacle,
}

/// An object detection accumulated on the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub category: String,
    pub position: Point,
    /// Map step index at which the object was first logged.
    pub first_seen: u64,
}

/// A connected boundary between explored-free and unexplored space.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub cells: Vec<Cell>,
    /// Center of the member cell nearest the component centroid.
    pub midpoint: Point,
}

/// The agent's map of the world: three-state occupancy plus the object log
/// and the traversed trajectory. One grid per episode, never shared
/// mutably.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub frame: GridFrame,
    cells: Vec<CellState>,
    pub object_log: Vec<DetectedObject>,
    pub trajectory: Vec<Cell>,
    pub step_index: u64,
}

impl OccupancyGrid {
    /// A fresh all-unknown grid whose center cell sits on `center_on`,
    /// origin snapped to the resolution lattice so grid cells align with
    /// ground-truth cells.
    pub fn new(cfg: &GridConfig, center_on: Point) -> Self {
        let res = cfg.meters_per_cell;
        let raw_x = center_on.x - cfg.width as f64 / 2.0 * res;
        let raw_y = center_on.y - cfg.height as f64 / 2.0 * res;
        let origin = Point::new((raw_x / res).floor() * res, (raw_y / res).floor() * res);
        let frame = GridFrame::new(cfg.width, cfg.height, res, origin);
        Self {
            cells: vec![CellState::Unknown; frame.n_cells()],
            frame,
            object_log: Vec::new(),
            trajectory: Vec::new(),
            step_index: 0,
        }
    }

    pub fn state(&self, c: Cell) -> CellState {
        if self.frame.contains_cell(c) {
            self.cells[self.frame.index(c)]
        } else {
            CellState::Unknown
        }
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.state(c) == CellState::Free
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&s| s == state).count()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    /// Fold one observation into the map. Obstacle wins conflicts against
    /// free across time; the pose's cell joins the trajectory; visible
    /// objects are logged with positional de-duplication.
    pub fn integrate(&mut self, obs: &Observation, pose: &Pose) {
        for &c in &obs.free_cells {
            if self.frame.contains_cell(c) {
                let idx = self.frame.index(c);
                if self.cells[idx] != CellState::Obstacle {
                    self.cells[idx] = CellState::Free;
                }
            }
        }
        for &c in &obs.obstacle_cells {
            if self.frame.contains_cell(c) {
                let idx = self.frame.index(c);
                self.cells[idx] = CellState::Obstacle;
            }
        }

        for (category, position) in &obs.visible_objects {
            let duplicate = self.object_log.iter().any(|o| {
                o.category == *category && o.position.distance(*position) <= OBJECT_DEDUP_RADIUS_M
            });
            if !duplicate {
                self.object_log.push(DetectedObject {
                    category: category.clone(),
                    position: *position,
                    first_seen: self.step_index,
                });
            }
        }

        let here = self.frame.world_to_cell(pose.position);
        if self.frame.contains_cell(here) {
            // The agent stands here, so the cell is traversable regardless
            // of what grazing rays reported.
            let idx = self.frame.index(here);
            self.cells[idx] = CellState::Free;
            if self.trajectory.last() != Some(&here) {
                self.trajectory.push(here);
            }
        }
        self.step_index += 1;
    }

    /// Record a bump: the agent was refused entry toward `c`, so the cell
    /// is treated as an obstacle no matter how rays classified it.
    pub fn mark_obstacle(&mut self, c: Cell) {
        if self.frame.contains_cell(c) {
            let idx = self.frame.index(c);
            self.cells[idx] = CellState::Obstacle;
        }
    }

    /// True for free cells 4-adjacent to at least one unknown cell. Cells
    /// beyond the map edge are not explorable and do not count as unknown.
    pub fn is_frontier_cell(&self, c: Cell) -> bool {
        if self.state(c) != CellState::Free {
            return false;
        }
        [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dc, dr)| {
            let n = Cell::new(c.col + dc, c.row + dr);
            self.frame.contains_cell(n) && self.state(n) == CellState::Unknown
        })
    }

    /// Frontier cells grouped into 8-connected components. Components
    /// smaller than [`MIN_FRONTIER_CELLS`] are discarded. Output order is
    /// deterministic (row-major by first-discovered cell).
    pub fn detect_frontiers(&self) -> Vec<Frontier> {
        let w = self.frame.width as i32;
        let h = self.frame.height as i32;
        let mut visited = vec![false; self.frame.n_cells()];
        let mut frontiers = Vec::new();

        for row in 0..h {
            for col in 0..w {
                let seed = Cell::new(col, row);
                let idx = self.frame.index(seed);
                if visited[idx] || !self.is_frontier_cell(seed) {
                    continue;
                }
                // Flood the 8-connected component.
                let mut component = Vec::new();
                let mut queue = std::collections::VecDeque::from([seed]);
                visited[idx] = true;
                while let Some(c) = queue.pop_front() {
                    component.push(c);
                    for dr in -1..=1 {
                        for dc in -1..=1 {
                            if dr == 0 && dc == 0 {
                                continue;
                            }
                            let n = Cell::new(c.col + dc, c.row + dr);
                            if !self.frame.contains_cell(n) {
                                continue;
                            }
                            let nidx = self.frame.index(n);
                            if !visited[nidx] && self.is_frontier_cell(n) {
                                visited[nidx] = true;
                                queue.push_back(n);
                            }
                        }
                    }
                }
                if component.len() < MIN_FRONTIER_CELLS {
                    continue;
                }
                component.sort();
                frontiers.push(Frontier {
                    midpoint: self.component_midpoint(&component),
                    cells: component,
                });
            }
        }
        frontiers
    }

    /// Center of the member cell closest to the component's centroid, ties
    /// broken by lowest (row, col).
    fn component_midpoint(&self, cells: &[Cell]) -> Point {
        let n = cells.len() as f64;
        let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), &c| {
            let p = self.frame.cell_center(c);
            (sx + p.x, sy + p.y)
        });
        let centroid = Point::new(sx / n, sy / n);
        let best = cells
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = self.frame.cell_center(a).distance(centroid);
                let db = self.frame.cell_center(b).distance(centroid);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            })
            .expect("component is non-empty");
        self.frame.cell_center(best)
    }
}

/// Anything that can answer "is this cell traversable" over a grid frame.
pub trait Navigability {
    fn nav_frame(&self) -> &GridFrame;
    fn traversable(&self, c: Cell) -> bool;
}

impl Navigability for GroundTruth {
    fn nav_frame(&self) -> &GridFrame {
        &self.frame
    }

    fn traversable(&self, c: Cell) -> bool {
        self.navigable_cell(c)
    }
}

/// The agent's own map: only known-free cells are traversable.
impl Navigability for OccupancyGrid {
    fn nav_frame(&self) -> &GridFrame {
        &self.frame
    }

    fn traversable(&self, c: Cell) -> bool {
        self.is_free(c)
    }
}

/// Exact 8-connected path cost: `straight + diagonal * sqrt(2)` cell
/// steps. Kept as integers so costs compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PathCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub fn meters(&self, meters_per_cell: f64) -> f64 {
        (self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2)
            * meters_per_cell
    }

    fn as_f64(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }
}

pub const NEIGHBORS_8: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("endpoint is not traversable")]
    EndpointBlocked,
    #[error("no path exists between the endpoints")]
    Unreachable,
}

struct QueueEntry {
    priority: f64,
    cost: PathCost,
    cell: Cell,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority && self.cell == other.cell
    }
}
impl Eq for QueueEntry {}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on priority; ties resolved by lowest (row, col) so the
        // expansion order is deterministic.
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Uniform-cost search from `from` until `goal` is settled. Returns the
/// exact cost. Used for ground-truth path lengths (the SPL denominator).
pub fn dijkstra_cost(nav: &impl Navigability, from: Cell, goal: Cell) -> Result<PathCost, PathError> {
    multi_goal_cost(nav, from, &[goal])
}

/// Uniform-cost search to the nearest of several goal cells.
pub fn multi_goal_cost(
    nav: &impl Navigability,
    from: Cell,
    goals: &[Cell],
) -> Result<PathCost, PathError> {
    if !nav.traversable(from) || goals.iter().any(|&g| !nav.traversable(g)) {
        return Err(PathError::EndpointBlocked);
    }
    let frame = nav.nav_frame();
    let mut goal_mask = vec![false; frame.n_cells()];
    for &g in goals {
        goal_mask[frame.index(g)] = true;
    }
    if goal_mask[frame.index(from)] {
        return Ok(PathCost::default());
    }

    let mut best: Vec<f64> = vec![f64::INFINITY; frame.n_cells()];
    let mut heap = BinaryHeap::new();
    best[frame.index(from)] = 0.0;
    heap.push(QueueEntry {
        priority: 0.0,
        cost: PathCost::default(),
        cell: from,
    });

    while let Some(QueueEntry { priority, cost, cell }) = heap.pop() {
        let idx = frame.index(cell);
        if priority > best[idx] {
            continue;
        }
        if goal_mask[idx] {
            return Ok(cost);
        }
        for (dc, dr) in NEIGHBORS_8 {
            let n = Cell::new(cell.col + dc, cell.row + dr);
            if !frame.contains_cell(n) || !nav.traversable(n) {
                continue;
            }
            let diagonal = dc != 0 && dr != 0;
            let ncost = PathCost {
                straight: cost.straight + u32::from(!diagonal),
                diagonal: cost.diagonal + u32::from(diagonal),
            };
            let nprio = ncost.as_f64();
            let nidx = frame.index(n);
            if nprio < best[nidx] - 1e-12 {
                best[nidx] = nprio;
                heap.push(QueueEntry {
                    priority: nprio,
                    cost: ncost,
                    cell: n,
                });
            }
        }
    }
    Err(PathError::Unreachable)
}

/// Length in meters of an optimal 8-connected grid path between two world
/// points over `nav`, or an error when an endpoint is blocked or the
/// points are disconnected.
pub fn shortest_path_length(
    nav: &impl Navigability,
    from: Point,
    to: Point,
) -> Result<f64, PathError> {
    let frame = nav.nav_frame();
    let cost = dijkstra_cost(nav, frame.world_to_cell(from), frame.world_to_cell(to))?;
    Ok(cost.meters(frame.meters_per_cell))
}

/// Shortest path from `from` to any traversable cell whose center lies
/// within `radius` of one of `targets`.
pub fn shortest_path_to_disk(
    nav: &impl Navigability,
    from: Point,
    targets: &[Point],
    radius: f64,
) -> Result<f64, PathError> {
    let frame = nav.nav_frame();
    let mut goals = Vec::new();
    for &t in targets {
        let lo = frame.world_to_cell(Point::new(t.x - radius, t.y - radius));
        let hi = frame.world_to_cell(Point::new(t.x + radius, t.y + radius));
        for row in lo.row..=hi.row {
            for col in lo.col..=hi.col {
                let c = Cell::new(col, row);
                if frame.contains_cell(c)
                    && nav.traversable(c)
                    && frame.cell_center(c).distance(t) <= radius
                {
                    goals.push(c);
                }
            }
        }
    }
    if goals.is_empty() {
        return Err(PathError::Unreachable);
    }
    goals.sort();
    goals.dedup();
    let cost = multi_goal_cost(nav, frame.world_to_cell(from), &goals)?;
    Ok(cost.meters(frame.meters_per_cell))
}

/// Sidecar metadata stored alongside a grid snapshot image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSnapshotMeta {
    pub width: u32,
    pub height: u32,
    pub meters_per_cell: f64,
    pub origin: [f64; 2],
    pub step_index: u64,
    pub object_log: Vec<DetectedObject>,
    pub trajectory: Vec<Cell>,
}

impl OccupancyGrid {
    /// Export the grid as a grayscale image (0 obstacle, 128 unknown, 255
    /// free) plus a sidecar metadata document.
    pub fn save_snapshot(&self, image_path: &Path, meta_path: &Path) -> io::Result<()> {
        let mut img = image::GrayImage::new(self.frame.width, self.frame.height);
        for (idx, state) in self.cells.iter().enumerate() {
            let c = self.frame.cell_at_index(idx);
            let v = match state {
                CellState::Obstacle => 0u8,
                CellState::Unknown => 128,
                CellState::Free => 255,
            };
            // Row 0 of the image is the top; grid row 0 is the minimum y.
            img.put_pixel(
                c.col as u32,
                self.frame.height - 1 - c.row as u32,
                image::Luma([v]),
            );
        }
        img.save(image_path)
            .map_err(|e| io::Error::other(e.to_string()))?;
        let meta = GridSnapshotMeta {
            width: self.frame.width,
            height: self.frame.height,
            meters_per_cell: self.frame.meters_per_cell,
            origin: [self.frame.origin.x, self.frame.origin.y],
            step_index: self.step_index,
            object_log: self.object_log.clone(),
            trajectory: self.trajectory.clone(),
        };
        std::fs::write(meta_path, serde_json::to_string_pretty(&meta)?)
    }

    /// Rebuild a grid from a snapshot written by [`save_snapshot`].
    pub fn load_snapshot(image_path: &Path, meta_path: &Path) -> io::Result<Self> {
        let meta: GridSnapshotMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        let img = image::open(image_path)
            .map_err(|e| io::Error::other(e.to_string()))?
            .into_luma8();
        if img.width() != meta.width || img.height() != meta.height {
            return Err(io::Error::other("snapshot image does not match metadata dimensions"));
        }
        let frame = GridFrame::new(
            meta.width,
            meta.height,
            meta.meters_per_cell,
            Point::new(meta.origin[0], meta.origin[1]),
        );
        let mut cells = vec![CellState::Unknown; frame.n_cells()];
        for (idx, cell) in cells.iter_mut().enumerate() {
            let c = frame.cell_at_index(idx);
            let v = img.get_pixel(c.col as u32, frame.height - 1 - c.row as u32)[0];
            *cell = match v {
                0 => CellState::Obstacle,
                255 => CellState::Free,
                _ => CellState::Unknown,
            };
        }
        Ok(Self {
            frame,
            cells,
            object_log: meta.object_log,
            trajectory: meta.trajectory,
            step_index: meta.step_index,
        })
    }
}
