//! Adaptive visual prompt generation: key-area clustering and merging,
//! text-box layout, and deterministic rasterization of the top-view map
//! with markers, trajectory, coordinate grid, and legend.

use std::collections::BTreeSet;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::config::RenderConfig;
use crate::geometry::{Point, Rect};
use crate::topmap::{CellState, DetectedObject, Frontier, OccupancyGrid};
use crate::worldsim::Pose;

/// Density-clustering parameters for key-area detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// Neighborhood radius, meters.
    pub epsilon: f64,
    /// Minimum neighborhood size (the point itself counts) for a point to
    /// be dense.
    pub min_pts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.3,
            min_pts: 2,
        }
    }
}

/// A key area: a dense cluster of object positions and frontier midpoints,
/// represented by its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyAreaMarker {
    /// 1-based ordinal, assigned in canonical (centroid-sorted) order.
    pub id: usize,
    pub centroid: Point,
    pub members: Vec<Point>,
}

fn point_order(a: &Point, b: &Point) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

fn members_mean(members: &[Point]) -> Point {
    let n = members.len() as f64;
    let (sx, sy) = members
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// Sort members and markers into a canonical order and assign ids, so the
/// output is a pure function of the point *set*.
fn canonicalize(markers: &mut [KeyAreaMarker]) {
    for m in markers.iter_mut() {
        m.members.sort_by(point_order);
        m.centroid = members_mean(&m.members);
    }
    markers.sort_by(|a, b| {
        point_order(&a.centroid, &b.centroid)
            .then(a.members.len().cmp(&b.members.len()))
    });
    for (k, m) in markers.iter_mut().enumerate() {
        m.id = k + 1;
    }
}

/// Density-based clustering of object positions and frontier midpoints.
/// A point whose epsilon-neighborhood (itself included) holds at least
/// `min_pts` points is dense; maximal sets of mutually reachable dense
/// points form areas; non-dense points within epsilon of a dense point
/// join the nearest dense point's area; the rest are outliers and are
/// dropped. The result does not depend on input order.
pub fn cluster_key_areas(points: &[Point], cfg: &ClusterConfig) -> Vec<KeyAreaMarker> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if points[i].distance(points[j]) <= cfg.epsilon {
                neighbors[i].push(j);
            }
        }
    }
    let dense: Vec<bool> = neighbors.iter().map(|ns| ns.len() >= cfg.min_pts).collect();

    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut areas: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if !dense[seed] || assign[seed].is_some() {
            continue;
        }
        let aid = areas.len();
        let mut stack = vec![seed];
        assign[seed] = Some(aid);
        let mut area = Vec::new();
        while let Some(p) = stack.pop() {
            area.push(p);
            for &q in &neighbors[p] {
                if dense[q] && assign[q].is_none() {
                    assign[q] = Some(aid);
                    stack.push(q);
                }
            }
        }
        areas.push(area);
    }

    // Non-dense points join the nearest dense point's area; nearest is
    // tie-broken on coordinates so permutations of the input cannot flip
    // the choice.
    for i in 0..n {
        if assign[i].is_some() {
            continue;
        }
        let mut best: Option<(f64, Point, usize)> = None;
        for &q in &neighbors[i] {
            if !dense[q] {
                continue;
            }
            let cand = (points[i].distance(points[q]), points[q], assign[q].unwrap());
            let better = match &best {
                None => true,
                Some(b) => {
                    cand.0
                        .total_cmp(&b.0)
                        .then_with(|| point_order(&cand.1, &b.1))
                        .is_lt()
                }
            };
            if better {
                best = Some(cand);
            }
        }
        if let Some((_, _, aid)) = best {
            areas[aid].push(i);
        }
    }

    let mut markers: Vec<KeyAreaMarker> = areas
        .into_iter()
        .map(|idxs| KeyAreaMarker {
            id: 0,
            centroid: Point::new(0.0, 0.0),
            members: idxs.into_iter().map(|i| points[i]).collect(),
        })
        .collect();
    canonicalize(&mut markers);
    markers
}

/// Fixed-point merging: any group of areas whose centroids chain together
/// within epsilon collapses into one area (member sets union, centroid
/// recomputed), and the process repeats on the new centroids until no two
/// lie within epsilon. Areas are processed in ascending id order.
pub fn merge_areas(markers: &[KeyAreaMarker], cfg: &ClusterConfig) -> Vec<KeyAreaMarker> {
    let mut areas = markers.to_vec();
    canonicalize(&mut areas);
    loop {
        let n = areas.len();
        // Transitive closure over the "centroids within epsilon" relation.
        let mut group: Vec<usize> = (0..n).collect();
        fn root(group: &mut [usize], mut i: usize) -> usize {
            while group[i] != i {
                group[i] = group[group[i]];
                i = group[i];
            }
            i
        }
        let mut any = false;
        for i in 0..n {
            for j in (i + 1)..n {
                if areas[i].centroid.distance(areas[j].centroid) <= cfg.epsilon {
                    let (ri, rj) = (root(&mut group, i), root(&mut group, j));
                    if ri != rj {
                        group[rj.max(ri)] = rj.min(ri);
                        any = true;
                    }
                }
            }
        }
        if !any {
            break;
        }
        let mut merged: Vec<KeyAreaMarker> = Vec::new();
        let mut slot_of_root = std::collections::BTreeMap::new();
        for (i, area) in areas.iter().enumerate() {
            let r = root(&mut group, i);
            let slot = *slot_of_root.entry(r).or_insert_with(|| {
                merged.push(KeyAreaMarker {
                    id: 0,
                    centroid: Point::new(0.0, 0.0),
                    members: Vec::new(),
                });
                merged.len() - 1
            });
            merged[slot].members.extend(area.members.iter().copied());
        }
        canonicalize(&mut merged);
        areas = merged;
    }
    canonicalize(&mut areas);
    areas
}

/// Glyph-row height of a rendered label box, pixels.
pub const TEXTBOX_HEIGHT_PX: f64 = 12.0;
/// Horizontal advance per label character, pixels.
pub const TEXTBOX_PX_PER_CHAR: f64 = 7.0;
/// Total horizontal padding added to a label box, pixels.
pub const TEXTBOX_PADDING_PX: f64 = 4.0;

/// A category label drawn on the map. The rectangle is in pixel
/// coordinates of the rendered image; its bottom-left corner sits on the
/// labeled object's pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBox {
    pub label: String,
    /// Labeled object position, world meters.
    pub anchor_world: Point,
    /// Labeled object position, pixels.
    pub anchor: Point,
    /// Box rectangle, pixels.
    pub rect: Rect,
}

impl TextBox {
    /// Center of the box rectangle, pixels.
    pub fn center(&self) -> Point {
        Point::new(self.rect.x + self.rect.w / 2.0, self.rect.y + self.rect.h / 2.0)
    }
}

/// Pixel dimensions of the label box for `label`.
pub fn text_box_size(label: &str) -> (f64, f64) {
    (
        TEXTBOX_PX_PER_CHAR * label.chars().count() as f64 + TEXTBOX_PADDING_PX,
        TEXTBOX_HEIGHT_PX,
    )
}

/// Intersection-over-union of two axis-aligned rectangles.
pub fn rect_iou(a: &Rect, b: &Rect) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.w * a.h + b.w * b.h - inter;
    inter / union
}

/// Affine, invertible world-meter to image-pixel mapping. Pixel y grows
/// downward while world y grows upward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapTransform {
    /// World point at the image's bottom-left corner.
    pub world_min: Point,
    pub pixels_per_meter: f64,
    pub height_px: u32,
}

impl MapTransform {
    pub fn world_to_pixel(&self, p: Point) -> Point {
        Point::new(
            (p.x - self.world_min.x) * self.pixels_per_meter,
            self.height_px as f64 - (p.y - self.world_min.y) * self.pixels_per_meter,
        )
    }

    pub fn pixel_to_world(&self, px: Point) -> Point {
        Point::new(
            self.world_min.x + px.x / self.pixels_per_meter,
            self.world_min.y + (self.height_px as f64 - px.y) / self.pixels_per_meter,
        )
    }
}

/// One box per object, fixed glyph metrics, bottom-left corner on the
/// object pixel. Boxes are never repositioned to dodge each other — their
/// overlap is exactly the occlusion signal the scaling stage consumes.
pub fn layout_text_boxes(objects: &[DetectedObject], transform: &MapTransform) -> Vec<TextBox> {
    objects
        .iter()
        .map(|o| {
            let anchor = transform.world_to_pixel(o.position);
            let (w, h) = text_box_size(&o.category);
            TextBox {
                label: o.category.clone(),
                anchor_world: o.position,
                anchor,
                rect: Rect::new(anchor.x, anchor.y - h, w, h),
            }
        })
        .collect()
}

/// A frontier reduced to what the prompt consumers need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSummary {
    pub midpoint: Point,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub label: String,
    pub color: [u8; 3],
}

/// Machine-readable sidecar for a rendered prompt map; deterministic
/// reasoners consume this instead of the raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMapMeta {
    /// Rendered world window: min x, min y, width, height (meters).
    pub crop_window: [f64; 4],
    pub pixels_per_meter: f64,
    pub image_size: [u32; 2],
    /// Human-readable description of the labeled coordinate frame.
    pub coordinate_frame: String,
    /// Agent x, y (meters) and heading (degrees).
    pub pose: [f64; 3],
    pub markers: Vec<MarkerMeta>,
    pub textboxes: Vec<TextBoxMeta>,
    pub frontiers: Vec<FrontierMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerMeta {
    pub id: usize,
    pub centroid: [f64; 2],
    pub members: Vec<[f64; 2]>,
    /// Categories of the object detections among the members, sorted and
    /// de-duplicated. Frontier members contribute none.
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBoxMeta {
    pub label: String,
    pub world: [f64; 2],
    /// x, y, width, height in image pixels.
    pub rect_px: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierMeta {
    pub midpoint: [f64; 2],
    pub cells: usize,
}

/// Description embedded in every sidecar so remote models know how to read
/// the coordinate labels.
pub const COORDINATE_FRAME_NOTE: &str =
    "meters; x increases rightward, y increases upward; the grid-line labels on the image show these values";

/// A rendered top-view visual prompt plus everything needed to interpret
/// it: the world window, the pixel transform, and the drawn annotations.
#[derive(Debug, Clone)]
pub struct PromptMap {
    pub image: RgbImage,
    pub crop_window: Rect,
    pub pixels_per_meter: f64,
    pub transform: MapTransform,
    pub markers: Vec<KeyAreaMarker>,
    pub textboxes: Vec<TextBox>,
    pub frontiers: Vec<FrontierSummary>,
    pub pose: Pose,
    pub legend: Vec<LegendEntry>,
    pub meta: PromptMapMeta,
}

impl PromptMap {
    /// Encode the raster as PNG bytes. Encoding is deterministic.
    pub fn png_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.image
            .write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png)
            .expect("in-memory PNG encoding cannot fail");
        buf
    }

    /// Largest pairwise IoU among the drawn text boxes; 0 with fewer than
    /// two boxes.
    pub fn max_textbox_iou(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.textboxes.len() {
            for j in (i + 1)..self.textboxes.len() {
                max = max.max(rect_iou(&self.textboxes[i].rect, &self.textboxes[j].rect));
            }
        }
        max
    }
}

pub const COLOR_FREE: [u8; 3] = [232, 232, 232];
pub const COLOR_UNKNOWN: [u8; 3] = [150, 150, 150];
pub const COLOR_OBSTACLE: [u8; 3] = [42, 42, 42];
pub const COLOR_GRIDLINE: [u8; 3] = [140, 152, 170];
pub const COLOR_COORD_LABEL: [u8; 3] = [40, 60, 160];
pub const COLOR_TRAJECTORY: [u8; 3] = [66, 135, 245];
pub const COLOR_AGENT: [u8; 3] = [214, 48, 49];
pub const COLOR_MARKER: [u8; 3] = [255, 140, 26];
pub const COLOR_MARKER_LABEL: [u8; 3] = [110, 50, 0];
pub const COLOR_TEXTBOX_FILL: [u8; 3] = [255, 249, 196];
pub const COLOR_TEXTBOX_BORDER: [u8; 3] = [66, 66, 66];
pub const COLOR_TEXT: [u8; 3] = [10, 10, 10];

/// Rasterize the occupancy grid with all annotation layers into a
/// [`PromptMap`]. Pure: identical inputs produce byte-identical rasters.
/// The requested window is cut down symmetrically around its center if it
/// would exceed the raster size limit at the requested scale.
pub fn render_prompt_map(
    grid: &OccupancyGrid,
    markers: &[KeyAreaMarker],
    pose: &Pose,
    frontiers: &[Frontier],
    crop_request: Rect,
    pixels_per_meter: f64,
    cfg: &RenderConfig,
) -> PromptMap {
    let limit_m = cfg.raster_limit_px as f64 / pixels_per_meter;
    let mut crop = crop_request;
    if crop.w > limit_m {
        crop.x += (crop.w - limit_m) / 2.0;
        crop.w = limit_m;
    }
    if crop.h > limit_m {
        crop.y += (crop.h - limit_m) / 2.0;
        crop.h = limit_m;
    }
    let width_px = ((crop.w * pixels_per_meter).round() as u32).max(1);
    let height_px = ((crop.h * pixels_per_meter).round() as u32).max(1);
    let crop = Rect::new(
        crop.x,
        crop.y,
        width_px as f64 / pixels_per_meter,
        height_px as f64 / pixels_per_meter,
    );
    let transform = MapTransform {
        world_min: Point::new(crop.x, crop.y),
        pixels_per_meter,
        height_px,
    };
    let layers = &cfg.layers;

    // Base occupancy shading via per-axis pixel-to-cell lookup tables.
    let col_of_px: Vec<i64> = (0..width_px)
        .map(|c| {
            let wx = crop.x + (c as f64 + 0.5) / pixels_per_meter;
            ((wx - grid.frame.origin.x) / grid.frame.meters_per_cell).floor() as i64
        })
        .collect();
    let row_of_px: Vec<i64> = (0..height_px)
        .map(|r| {
            let wy = crop.y + (height_px as f64 - r as f64 - 0.5) / pixels_per_meter;
            ((wy - grid.frame.origin.y) / grid.frame.meters_per_cell).floor() as i64
        })
        .collect();
    let mut image = RgbImage::new(width_px, height_px);
    for r in 0..height_px {
        for c in 0..width_px {
            let (gc, gr) = (col_of_px[c as usize], row_of_px[r as usize]);
            let state = if gc < 0
                || gr < 0
                || gc >= grid.frame.width as i64
                || gr >= grid.frame.height as i64
            {
                CellState::Unknown
            } else {
                grid.state(crate::geometry::Cell::new(gc as i32, gr as i32))
            };
            let color = match state {
                CellState::Free => COLOR_FREE,
                CellState::Unknown => COLOR_UNKNOWN,
                CellState::Obstacle => {
                    if layers.obstacle {
                        COLOR_OBSTACLE
                    } else {
                        COLOR_UNKNOWN
                    }
                }
            };
            image.put_pixel(c, r, Rgb(color));
        }
    }

    if layers.coordinate {
        draw_coordinate_grid(&mut image, &crop, &transform);
    }

    if layers.history && !grid.trajectory.is_empty() {
        let pts: Vec<Point> = grid
            .trajectory
            .iter()
            .map(|&c| transform.world_to_pixel(grid.frame.cell_center(c)))
            .collect();
        for pair in pts.windows(2) {
            draw_line(&mut image, pair[0], pair[1], COLOR_TRAJECTORY);
        }
        if let [only] = pts.as_slice() {
            draw_disc(&mut image, *only, 1.5, COLOR_TRAJECTORY);
        }
    }

    let textboxes = if layers.textboxes {
        let in_window: Vec<DetectedObject> = grid
            .object_log
            .iter()
            .filter(|o| crop.contains(o.position))
            .cloned()
            .collect();
        layout_text_boxes(&in_window, &transform)
    } else {
        Vec::new()
    };
    for tb in &textboxes {
        draw_text_box(&mut image, tb);
    }

    for m in markers {
        let px = transform.world_to_pixel(m.centroid);
        draw_disc(&mut image, px, 4.0, COLOR_MARKER);
        draw_text(
            &mut image,
            (px.x + 5.0).round() as i32,
            (px.y - 11.0).round() as i32,
            &format!("m{}", m.id),
            COLOR_MARKER_LABEL,
        );
    }

    let agent_px = transform.world_to_pixel(pose.position);
    draw_disc(&mut image, agent_px, 4.0, COLOR_AGENT);
    let tip = Point::new(
        agent_px.x + 9.0 * pose.heading.cos(),
        agent_px.y - 9.0 * pose.heading.sin(),
    );
    draw_line(&mut image, agent_px, tip, COLOR_AGENT);

    let mut legend = vec![
        LegendEntry { label: "free".into(), color: COLOR_FREE },
        LegendEntry { label: "unknown".into(), color: COLOR_UNKNOWN },
    ];
    if layers.obstacle {
        legend.push(LegendEntry { label: "obstacle".into(), color: COLOR_OBSTACLE });
    }
    if layers.history {
        legend.push(LegendEntry { label: "trajectory".into(), color: COLOR_TRAJECTORY });
    }
    legend.push(LegendEntry { label: "agent".into(), color: COLOR_AGENT });
    legend.push(LegendEntry { label: "key area".into(), color: COLOR_MARKER });
    if layers.textboxes {
        legend.push(LegendEntry { label: "object label".into(), color: COLOR_TEXTBOX_FILL });
    }
    draw_legend(&mut image, &legend);

    let frontier_summaries: Vec<FrontierSummary> = frontiers
        .iter()
        .map(|f| FrontierSummary { midpoint: f.midpoint, cells: f.cells.len() })
        .collect();

    let meta = PromptMapMeta {
        crop_window: [crop.x, crop.y, crop.w, crop.h],
        pixels_per_meter,
        image_size: [width_px, height_px],
        coordinate_frame: COORDINATE_FRAME_NOTE.to_string(),
        pose: [pose.position.x, pose.position.y, pose.heading.to_degrees()],
        markers: markers
            .iter()
            .map(|m| MarkerMeta {
                id: m.id,
                centroid: [m.centroid.x, m.centroid.y],
                members: m.members.iter().map(|p| [p.x, p.y]).collect(),
                categories: marker_categories(m, &grid.object_log),
            })
            .collect(),
        textboxes: textboxes
            .iter()
            .map(|tb| TextBoxMeta {
                label: tb.label.clone(),
                world: [tb.anchor_world.x, tb.anchor_world.y],
                rect_px: [tb.rect.x, tb.rect.y, tb.rect.w, tb.rect.h],
            })
            .collect(),
        frontiers: frontier_summaries
            .iter()
            .map(|f| FrontierMeta { midpoint: [f.midpoint.x, f.midpoint.y], cells: f.cells })
            .collect(),
    };

    PromptMap {
        image,
        crop_window: crop,
        pixels_per_meter,
        transform,
        markers: markers.to_vec(),
        textboxes,
        frontiers: frontier_summaries,
        pose: *pose,
        legend,
        meta,
    }
}

/// Categories of the object detections that are members of `marker`,
/// matched by position against the detection log.
pub fn marker_categories(marker: &KeyAreaMarker, objects: &[DetectedObject]) -> Vec<String> {
    let mut cats = BTreeSet::new();
    for member in &marker.members {
        for o in objects {
            if o.position.distance(*member) < 1e-9 {
                cats.insert(o.category.clone());
            }
        }
    }
    cats.into_iter().collect()
}

fn put_px(img: &mut RgbImage, x: i32, y: i32, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(color));
    }
}

fn draw_line(img: &mut RgbImage, a: Point, b: Point, color: [u8; 3]) {
    let (mut x0, mut y0) = (a.x.round() as i32, a.y.round() as i32);
    let (x1, y1) = (b.x.round() as i32, b.y.round() as i32);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put_px(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn draw_disc(img: &mut RgbImage, center: Point, radius: f64, color: [u8; 3]) {
    let r = radius.ceil() as i32;
    let (cx, cy) = (center.x.round() as i32, center.y.round() as i32);
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx * dx + dy * dy) as f64 <= radius * radius {
                put_px(img, cx + dx, cy + dy, color);
            }
        }
    }
}

fn draw_text_box(img: &mut RgbImage, tb: &TextBox) {
    let x0 = tb.rect.x.round() as i32;
    let y0 = tb.rect.y.round() as i32;
    let w = tb.rect.w.round() as i32;
    let h = tb.rect.h.round() as i32;
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            let border = y == y0 || y == y0 + h - 1 || x == x0 || x == x0 + w - 1;
            put_px(
                img,
                x,
                y,
                if border { COLOR_TEXTBOX_BORDER } else { COLOR_TEXTBOX_FILL },
            );
        }
    }
    draw_text(img, x0 + 2, y0 + 3, &tb.label, COLOR_TEXT);
}

fn draw_coordinate_grid(img: &mut RgbImage, crop: &Rect, transform: &MapTransform) {
    let (w, h) = (img.width() as i32, img.height() as i32);
    let spacing_px = transform.pixels_per_meter;
    // Thin labels out when meter ticks sit closer than a label's width.
    let label_stride = (24.0 / spacing_px).ceil().max(1.0) as i64;

    let x_lo = crop.x.ceil() as i64;
    let x_hi = (crop.x + crop.w).floor() as i64;
    for tick in x_lo..=x_hi {
        let px = ((tick as f64 - crop.x) * spacing_px).round() as i32;
        if px < 0 || px >= w {
            continue;
        }
        for y in 0..h {
            put_px(img, px, y, COLOR_GRIDLINE);
        }
        if tick.rem_euclid(label_stride) == 0 {
            draw_text(img, px + 2, h - 9, &tick.to_string(), COLOR_COORD_LABEL);
        }
    }
    let y_lo = crop.y.ceil() as i64;
    let y_hi = (crop.y + crop.h).floor() as i64;
    for tick in y_lo..=y_hi {
        let py = (img.height() as f64 - (tick as f64 - crop.y) * spacing_px).round() as i32;
        if py < 0 || py >= h {
            continue;
        }
        for x in 0..w {
            put_px(img, x, py, COLOR_GRIDLINE);
        }
        if tick.rem_euclid(label_stride) == 0 {
            draw_text(img, 2, py - 8, &tick.to_string(), COLOR_COORD_LABEL);
        }
    }
}

fn draw_legend(img: &mut RgbImage, legend: &[LegendEntry]) {
    for (i, entry) in legend.iter().enumerate() {
        let y = 3 + i as i32 * 10;
        for dy in 0..8 {
            for dx in 0..8 {
                put_px(img, 3 + dx, y + dy, entry.color);
            }
        }
        draw_text(img, 14, y, &entry.label, COLOR_TEXT);
    }
}

/// Draw `text` with the built-in 5x7 glyph set, top-left corner at (x, y).
pub fn draw_text(img: &mut RgbImage, x: i32, y: i32, text: &str, color: [u8; 3]) {
    for (i, ch) in text.chars().enumerate() {
        let rows = font::glyph(ch);
        let gx = x + i as i32 * (font::WIDTH as i32 + 2);
        for (gy, row) in rows.iter().enumerate() {
            for bit in 0..font::WIDTH {
                if row & (1 << (font::WIDTH - 1 - bit)) != 0 {
                    put_px(img, gx + bit as i32, y + gy as i32, color);
                }
            }
        }
    }
}

/// Minimal 5x7 bitmap font: letters (single-case), digits, and the
/// punctuation used by labels and coordinate ticks.
mod font {
    pub const WIDTH: usize = 5;

    pub fn glyph(c: char) -> [u8; 7] {
        match c.to_ascii_uppercase() {
            'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
            'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
            'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
            'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
            'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
            'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
            'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
            'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
            'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
            'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
            'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
            'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
            'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
            'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
            'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
            'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
            'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
            'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
            'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
            'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
            'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
            'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
            'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
            'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
            'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
            'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
            '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
            '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
            '2' => [0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F],
            '3' => [0x0E, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0E],
            '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
            '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
            '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
            '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
            '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
            '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
            '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
            '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
            ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
            '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
            '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
            ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
            ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
            '/' => [0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10],
            '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
            '+' => [0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00],
            ' ' => [0x00; 7],
            _ => [0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F],
        }
    }
}
