//! Shared planar geometry: points, axis-aligned rectangles, grid cells and
//! the world-to-grid transform used by every map-like structure.

use serde::{Deserialize, Serialize};

/// A point (or vector) in world coordinates, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` to `other` in radians, in `[0, 2π)`.
    pub fn bearing_to(&self, other: Point) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle: minimum corner plus extent, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn max_x(&self) -> f64 {
        self.x + self.w
    }

    pub fn max_y(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Closed containment test (boundary counts as inside).
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x <= self.max_x() && p.y >= self.y && p.y <= self.max_y()
    }

    /// Open containment test (boundary does not count).
    pub fn contains_open(&self, p: Point) -> bool {
        p.x > self.x && p.x < self.max_x() && p.y > self.y && p.y < self.max_y()
    }

    /// True when the two rectangles overlap with positive area.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.max_x()
            && other.x < self.max_x()
            && self.y < other.max_y()
            && other.y < self.max_y()
    }

    /// Clamp a point into the rectangle.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.x, self.max_x()),
            p.y.clamp(self.y, self.max_y()),
        )
    }

    /// Slab test: does the segment `a -> b` pass through the rectangle's
    /// interior? Grazing the boundary exactly counts as a hit.
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let d = Point::new(b.x - a.x, b.y - a.y);
        let mut t_min = 0.0f64;
        let mut t_max = 1.0f64;
        for (start, delta, lo, hi) in [
            (a.x, d.x, self.x, self.max_x()),
            (a.y, d.y, self.y, self.max_y()),
        ] {
            if delta.abs() < 1e-15 {
                if start < lo || start > hi {
                    return false;
                }
            } else {
                let t1 = (lo - start) / delta;
                let t2 = (hi - start) / delta;
                let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                t_min = t_min.max(t1);
                t_max = t_max.min(t2);
                if t_min > t_max {
                    return false;
                }
            }
        }
        true
    }
}

/// Discrete grid cell. `col` indexes x, `row` indexes y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }
}

// Tie-breaking rules throughout the crate are "lowest (row, col)".
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// World-to-grid transform shared by the occupancy map, ground-truth
/// rasterization and value maps. `origin` is the world coordinate of the
/// minimum corner of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub width: u32,
    pub height: u32,
    pub meters_per_cell: f64,
    pub origin: Point,
}

impl GridFrame {
    pub fn new(width: u32, height: u32, meters_per_cell: f64, origin: Point) -> Self {
        Self {
            width,
            height,
            meters_per_cell,
            origin,
        }
    }

    /// Frame covering `rect`, origin at the rectangle's minimum corner.
    pub fn covering(rect: Rect, meters_per_cell: f64) -> Self {
        let width = (rect.w / meters_per_cell).ceil() as u32;
        let height = (rect.h / meters_per_cell).ceil() as u32;
        Self::new(
            width,
            height,
            meters_per_cell,
            Point::new(rect.x, rect.y),
        )
    }

    pub fn world_to_cell(&self, p: Point) -> Cell {
        Cell::new(
            ((p.x - self.origin.x) / self.meters_per_cell).floor() as i32,
            ((p.y - self.origin.y) / self.meters_per_cell).floor() as i32,
        )
    }

    pub fn cell_center(&self, c: Cell) -> Point {
        Point::new(
            self.origin.x + (c.col as f64 + 0.5) * self.meters_per_cell,
            self.origin.y + (c.row as f64 + 0.5) * self.meters_per_cell,
        )
    }

    /// World rectangle of a single cell.
    pub fn cell_rect(&self, c: Cell) -> Rect {
        Rect::new(
            self.origin.x + c.col as f64 * self.meters_per_cell,
            self.origin.y + c.row as f64 * self.meters_per_cell,
            self.meters_per_cell,
            self.meters_per_cell,
        )
    }

    pub fn contains_cell(&self, c: Cell) -> bool {
        c.col >= 0 && c.row >= 0 && (c.col as u32) < self.width && (c.row as u32) < self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        c.row as usize * self.width as usize + c.col as usize
    }

    pub fn cell_at_index(&self, idx: usize) -> Cell {
        Cell::new(
            (idx % self.width as usize) as i32,
            (idx / self.width as usize) as i32,
        )
    }

    pub fn n_cells(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// World rectangle covered by the whole frame.
    pub fn world_rect(&self) -> Rect {
        Rect::new(
            self.origin.x,
            self.origin.y,
            self.width as f64 * self.meters_per_cell,
            self.height as f64 * self.meters_per_cell,
        )
    }
}

/// Wrap an angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = a % two_pi;
    if r < 0.0 {
        r + two_pi
    } else {
        r
    }
}

/// Signed smallest rotation taking `from` to `to`, in `(-π, π]`.
/// Positive means counter-clockwise (a left turn).
pub fn angle_diff(from: f64, to: f64) -> f64 {
    let mut d = normalize_angle(to - from);
    if d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    d
}
