//! Potential-target-driven goal selection: unit-peak Gaussian components
//! over key-area markers and the predicted target location are fused into
//! a value map whose navigable argmax becomes the moving location.

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avpg::KeyAreaMarker;
use crate::geometry::{Cell, GridFrame, Point, Rect};
use crate::topmap::OccupancyGrid;

/// How the spread of each Gaussian component is derived from the "decay to
/// 0.1 at the farthest other center" rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// The component falls to `decay_level` *of its peak* at the farthest
    /// other center. Always solvable.
    FractionOfPeak,
    /// The component falls to the absolute value `decay_level` at the
    /// farthest other center; unsolvable peaks fall back to the floor.
    Absolute,
}

/// Fusion weights and spread parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Peak of the predicted-target component.
    pub beta: f64,
    /// Value (or fraction of peak) the component decays to at the farthest
    /// other center.
    pub decay_level: f64,
    /// Spread used when a component has no other centers to calibrate
    /// against, meters.
    pub sigma_floor: f64,
    pub decay_mode: DecayMode,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            decay_level: 0.1,
            sigma_floor: 1.0,
            decay_mode: DecayMode::FractionOfPeak,
        }
    }
}

/// Where the target is predicted to be, possibly in unexplored space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub position: Point,
}

impl TargetEstimate {
    /// Clamp a prediction into the map's world rectangle.
    pub fn clamped(position: Point, bounds: &Rect) -> Self {
        Self {
            position: bounds.clamp(position),
        }
    }
}

/// Marker probability scores, aligned with marker order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerScores {
    pub scores: Vec<f64>,
}

impl MarkerScores {
    /// Clamp every score into [0, 1].
    pub fn clamped(scores: Vec<f64>) -> Self {
        Self {
            scores: scores.into_iter().map(|s| s.clamp(0.0, 1.0)).collect(),
        }
    }
}

/// One isotropic Gaussian `peak * exp(-|x - center|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub center: Point,
    pub sigma: f64,
    pub peak: f64,
}

impl GaussianComponent {
    pub fn value_at(&self, p: Point) -> f64 {
        let d2 = (p.x - self.center.x).powi(2) + (p.y - self.center.y).powi(2);
        self.peak * (-d2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// The fused value surface, evaluated at every cell center of the
/// occupancy grid's frame, together with the components that produced it.
#[derive(Debug, Clone)]
pub struct ValueMap {
    pub frame: GridFrame,
    pub values: Vec<f64>,
    pub components: Vec<GaussianComponent>,
}

impl ValueMap {
    pub fn value(&self, c: Cell) -> f64 {
        self.values[self.frame.index(c)]
    }

    /// Render the surface as a blue-to-yellow heat map in the same
    /// orientation as the prompt map (row 0 on top).
    pub fn to_heatmap(&self) -> RgbImage {
        let max = self.values.iter().copied().fold(0.0f64, f64::max);
        let mut img = RgbImage::new(self.frame.width, self.frame.height);
        for idx in 0..self.values.len() {
            let c = self.frame.cell_at_index(idx);
            let t = if max > 0.0 { self.values[idx] / max } else { 0.0 };
            img.put_pixel(
                c.col as u32,
                self.frame.height - 1 - c.row as u32,
                Rgb(heat_color(t)),
            );
        }
        img
    }
}

fn heat_color(t: f64) -> [u8; 3] {
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round().clamp(0.0, 255.0) as u8;
    if t < 0.5 {
        let s = t * 2.0;
        [lerp(40.0, 33.0, s), lerp(8.0, 145.0, s), lerp(86.0, 140.0, s)]
    } else {
        let s = (t - 0.5) * 2.0;
        [lerp(33.0, 253.0, s), lerp(145.0, 231.0, s), lerp(140.0, 37.0, s)]
    }
}

/// Spread for a component centered at `center`, calibrated so the
/// component decays to the configured level at the farthest of `others`.
/// With no other centers (or all coincident), the floor applies.
pub fn sigma_for(center: Point, others: &[Point], cfg: &FusionConfig) -> f64 {
    sigma_for_peak(center, others, 1.0, cfg)
}

/// As [`sigma_for`], for a component with the given peak; the distinction
/// matters only in absolute decay mode.
pub fn sigma_for_peak(center: Point, others: &[Point], peak: f64, cfg: &FusionConfig) -> f64 {
    let d = others
        .iter()
        .map(|p| center.distance(*p))
        .fold(0.0f64, f64::max);
    if d <= 0.0 {
        return cfg.sigma_floor;
    }
    let ratio = match cfg.decay_mode {
        DecayMode::FractionOfPeak => 1.0 / cfg.decay_level,
        DecayMode::Absolute => {
            if peak <= cfg.decay_level {
                return cfg.sigma_floor;
            }
            peak / cfg.decay_level
        }
    };
    d / (2.0 * ratio.ln()).sqrt()
}

/// Build the Gaussian components for the given markers, scores, and
/// optional target estimate. Each component's spread is calibrated
/// against all *other* centers.
pub fn build_components(
    markers: &[KeyAreaMarker],
    scores: &MarkerScores,
    target: Option<&TargetEstimate>,
    cfg: &FusionConfig,
) -> Vec<GaussianComponent> {
    assert_eq!(
        markers.len(),
        scores.scores.len(),
        "scores must align with markers"
    );
    let mut centers: Vec<Point> = markers.iter().map(|m| m.centroid).collect();
    if let Some(t) = target {
        centers.push(t.position);
    }
    let others_of = |k: usize| -> Vec<Point> {
        centers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, p)| *p)
            .collect()
    };
    let mut components = Vec::new();
    for (i, m) in markers.iter().enumerate() {
        let peak = scores.scores[i].clamp(0.0, 1.0);
        components.push(GaussianComponent {
            center: m.centroid,
            sigma: sigma_for_peak(m.centroid, &others_of(i), peak, cfg),
            peak,
        });
    }
    if let Some(t) = target {
        components.push(GaussianComponent {
            center: t.position,
            sigma: sigma_for_peak(t.position, &others_of(markers.len()), cfg.beta, cfg),
            peak: cfg.beta,
        });
    }
    components
}

/// Evaluate the fused surface P(x) = sum of component values over every
/// cell center of `frame`. Row evaluation is parallel; the per-cell sums
/// do not depend on thread scheduling.
pub fn fuse(
    markers: &[KeyAreaMarker],
    scores: &MarkerScores,
    target: Option<&TargetEstimate>,
    frame: &GridFrame,
    cfg: &FusionConfig,
) -> ValueMap {
    let components = build_components(markers, scores, target, cfg);
    let width = frame.width as usize;
    let mut values = vec![0.0f64; frame.n_cells()];

    for comp in &components {
        // The isotropic Gaussian separates per axis, so precompute the
        // column and row factors once.
        let inv = 1.0 / (2.0 * comp.sigma * comp.sigma);
        let col_f: Vec<f64> = (0..frame.width as i32)
            .map(|c| {
                let x = frame.cell_center(Cell::new(c, 0)).x;
                (-(x - comp.center.x).powi(2) * inv).exp()
            })
            .collect();
        let row_f: Vec<f64> = (0..frame.height as i32)
            .map(|r| {
                let y = frame.cell_center(Cell::new(0, r)).y;
                (-(y - comp.center.y).powi(2) * inv).exp()
            })
            .collect();
        values
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(row, chunk)| {
                let ry = comp.peak * row_f[row];
                for (col, v) in chunk.iter_mut().enumerate() {
                    *v += ry * col_f[col];
                }
            });
    }

    ValueMap {
        frame: *frame,
        values,
        components,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("the map has no known-free cell to move to")]
    NoFreeCells,
    #[error("no candidate points to select among")]
    NoCandidates,
}

/// The highest-valued known-free cell's center; ties go to the lowest
/// (row, col).
pub fn select_moving_location(
    vmap: &ValueMap,
    grid: &OccupancyGrid,
) -> Result<Point, SelectError> {
    assert_eq!(vmap.frame, grid.frame, "value map must share the grid frame");
    let mut best: Option<(f64, Cell)> = None;
    for idx in 0..vmap.values.len() {
        let c = vmap.frame.cell_at_index(idx);
        if !grid.is_free(c) {
            continue;
        }
        let v = vmap.values[idx];
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, c));
        }
    }
    best.map(|(_, c)| vmap.frame.cell_center(c))
        .ok_or(SelectError::NoFreeCells)
}

/// Fusion-free ablation: among the candidate points (markers at their
/// scores, the target at beta), take the highest-peaked one and snap it to
/// the nearest known-free cell. Ties go to the lowest marker id, with the
/// target ranked after all markers.
pub fn select_moving_location_max(
    markers: &[KeyAreaMarker],
    scores: &MarkerScores,
    target: Option<&TargetEstimate>,
    beta: f64,
    grid: &OccupancyGrid,
) -> Result<Point, SelectError> {
    assert_eq!(markers.len(), scores.scores.len());
    let mut candidates: Vec<(f64, usize, Point)> = markers
        .iter()
        .zip(&scores.scores)
        .map(|(m, &s)| (s.clamp(0.0, 1.0), m.id, m.centroid))
        .collect();
    if let Some(t) = target {
        candidates.push((beta, usize::MAX, t.position));
    }
    let (_, _, point) = candidates
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .ok_or(SelectError::NoCandidates)?;
    snap_to_free(point, grid).ok_or(SelectError::NoFreeCells)
}

/// Center of the known-free cell nearest to `p`; ties go to the lowest
/// (row, col).
pub fn snap_to_free(p: Point, grid: &OccupancyGrid) -> Option<Point> {
    let mut best: Option<(f64, Cell)> = None;
    for idx in 0..grid.frame.n_cells() {
        let c = grid.frame.cell_at_index(idx);
        if !grid.is_free(c) {
            continue;
        }
        let d = grid.frame.cell_center(c).distance(p);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| grid.frame.cell_center(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridConfig;
    use crate::worldsim::{Observation, Pose};
    use rand::{Rng, SeedableRng};

    fn cfg() -> FusionConfig {
        FusionConfig::default()
    }

    fn marker(id: usize, x: f64, y: f64) -> KeyAreaMarker {
        KeyAreaMarker {
            id,
            centroid: Point::new(x, y),
            members: vec![Point::new(x, y)],
        }
    }

    fn frame_12m() -> GridFrame {
        GridFrame::new(120, 120, 0.1, Point::new(0.0, 0.0))
    }

    #[test]
    fn sigma_floor_applies_without_other_centers() {
        assert_eq!(sigma_for(Point::new(0.0, 0.0), &[], &cfg()), 1.0);
        assert_eq!(
            sigma_for(Point::new(2.0, 2.0), &[Point::new(2.0, 2.0)], &cfg()),
            1.0
        );
    }

    #[test]
    fn sigma_closed_form_matches_the_decay_equation() {
        let d = (2.0 * 10.0f64.ln()).sqrt();
        let sigma = sigma_for(Point::new(0.0, 0.0), &[Point::new(d, 0.0)], &cfg());
        assert!((sigma - 1.0).abs() < 1e-12);
        // At the farthest center the component is at decay_level of peak.
        let comp = GaussianComponent {
            center: Point::new(0.0, 0.0),
            sigma,
            peak: 1.0,
        };
        assert!((comp.value_at(Point::new(d, 0.0)) - 0.1).abs() < 1e-12);

        let doubled = sigma_for(Point::new(0.0, 0.0), &[Point::new(2.0 * d, 0.0)], &cfg());
        assert!((doubled - 2.0 * sigma).abs() < 1e-12);
    }

    #[test]
    fn absolute_decay_mode_falls_back_when_unsolvable() {
        let abs_cfg = FusionConfig {
            decay_mode: DecayMode::Absolute,
            ..cfg()
        };
        let others = [Point::new(3.0, 0.0)];
        let low = sigma_for_peak(Point::new(0.0, 0.0), &others, 0.05, &abs_cfg);
        assert_eq!(low, abs_cfg.sigma_floor);
        let high = sigma_for_peak(Point::new(0.0, 0.0), &others, 1.0, &abs_cfg);
        let expect = 3.0 / (2.0 * (1.0f64 / 0.1).ln()).sqrt();
        assert!((high - expect).abs() < 1e-12);
    }

    #[test]
    fn single_unit_marker_peaks_at_its_own_cell() {
        let frame = frame_12m();
        let at = frame.cell_center(Cell::new(60, 60));
        let m = marker(1, at.x, at.y);
        let vmap = fuse(
            std::slice::from_ref(&m),
            &MarkerScores { scores: vec![1.0] },
            None,
            &frame,
            &cfg(),
        );
        let (best_idx, best) = vmap
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(frame.cell_center(frame.cell_at_index(best_idx)), m.centroid);
        assert!((best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_peak_wins_argmax() {
        let frame = frame_12m();
        let vmap = fuse(
            &[marker(1, 1.05, 1.05), marker(2, 10.05, 1.05)],
            &MarkerScores { scores: vec![0.2, 0.9] },
            None,
            &frame,
            &cfg(),
        );
        let best = vmap
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let at = frame.cell_center(frame.cell_at_index(best));
        assert!(at.distance(Point::new(10.05, 1.05)) < 0.2);
    }

    #[test]
    fn fusion_is_additive_across_component_subsets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let frame = GridFrame::new(60, 60, 0.1, Point::new(0.0, 0.0));
        for _ in 0..5 {
            let markers: Vec<KeyAreaMarker> = (0..4)
                .map(|i| marker(i + 1, rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)))
                .collect();
            let scores: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            // sigma_for depends on the full center set, so calibrate the
            // components jointly and compare summed evaluation instead of
            // re-fusing disjoint marker subsets.
            let joint = fuse(
                &markers,
                &MarkerScores { scores: scores.clone() },
                None,
                &frame,
                &cfg(),
            );
            let mut summed = vec![0.0f64; frame.n_cells()];
            for comp in &joint.components {
                for (idx, s) in summed.iter_mut().enumerate() {
                    let c = frame.cell_center(frame.cell_at_index(idx));
                    *s += comp.value_at(c);
                }
            }
            for (a, b) in joint.values.iter().zip(&summed) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn common_scaling_of_peaks_preserves_the_argmax_cell() {
        let frame = GridFrame::new(80, 80, 0.1, Point::new(0.0, 0.0));
        let markers = vec![marker(1, 2.0, 2.0), marker(2, 6.0, 5.0)];
        let target = TargetEstimate {
            position: Point::new(4.0, 7.0),
        };
        let argmax = |scale: f64| {
            let scores = MarkerScores {
                scores: vec![0.3 * scale, 0.8 * scale],
            };
            let cfg = FusionConfig {
                beta: 0.5 * scale,
                ..cfg()
            };
            fuse(&markers, &scores, Some(&target), &frame, &cfg)
                .values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0
        };
        assert_eq!(argmax(1.0), argmax(0.5));
    }

    fn grid_with_free(cells: &[(i32, i32)]) -> OccupancyGrid {
        let mut grid = OccupancyGrid::new(
            &GridConfig {
                width: 60,
                height: 60,
                meters_per_cell: 0.1,
            },
            Point::new(3.0, 3.0),
        );
        let obs = Observation {
            free_cells: cells.iter().map(|&(c, r)| Cell::new(c, r)).collect(),
            obstacle_cells: Default::default(),
            visible_objects: Vec::new(),
        };
        let pose_cell = cells[0];
        let p = grid.frame.cell_center(Cell::new(pose_cell.0, pose_cell.1));
        grid.integrate(&obs, &Pose::new(p.x, p.y, 0.0));
        grid
    }

    #[test]
    fn selection_is_restricted_to_known_free_cells() {
        let grid = grid_with_free(&[(5, 5)]);
        let vmap = fuse(
            &[marker(1, grid.frame.cell_center(Cell::new(50, 50)).x, 5.0)],
            &MarkerScores { scores: vec![1.0] },
            None,
            &grid.frame,
            &cfg(),
        );
        let only_free = grid.frame.cell_center(Cell::new(5, 5));
        assert_eq!(select_moving_location(&vmap, &grid).unwrap(), only_free);
    }

    #[test]
    fn selection_matches_masked_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let cells: Vec<(i32, i32)> = (0..rng.random_range(1..80))
                .map(|_| (rng.random_range(0..60), rng.random_range(0..60)))
                .collect();
            let grid = grid_with_free(&cells);
            let markers = vec![
                marker(1, rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)),
                marker(2, rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)),
            ];
            let vmap = fuse(
                &markers,
                &MarkerScores {
                    scores: vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
                },
                None,
                &grid.frame,
                &cfg(),
            );
            let got = select_moving_location(&vmap, &grid).unwrap();
            let mut expect: Option<(f64, Cell)> = None;
            for idx in 0..vmap.values.len() {
                let c = vmap.frame.cell_at_index(idx);
                if grid.is_free(c) && expect.is_none_or(|(v, _)| vmap.values[idx] > v) {
                    expect = Some((vmap.values[idx], c));
                }
            }
            assert_eq!(got, grid.frame.cell_center(expect.unwrap().1));
        }
    }

    #[test]
    fn max_mode_picks_the_highest_peak() {
        let grid = grid_with_free(&[(5, 5), (50, 50), (30, 58)]);
        let markers = vec![marker(1, 0.55, 0.55), marker(2, 5.05, 5.05)];
        let target = TargetEstimate {
            position: Point::new(3.05, 5.85),
        };
        // All marker scores below beta: the target location wins.
        let got = select_moving_location_max(
            &markers,
            &MarkerScores { scores: vec![0.3, 0.4] },
            Some(&target),
            0.5,
            &grid,
        )
        .unwrap();
        assert_eq!(got, grid.frame.cell_center(Cell::new(30, 58)));
        // A marker outscores beta: that marker wins.
        let got = select_moving_location_max(
            &markers,
            &MarkerScores { scores: vec![0.3, 0.9] },
            Some(&target),
            0.5,
            &grid,
        )
        .unwrap();
        assert_eq!(got, grid.frame.cell_center(Cell::new(50, 50)));
    }

    #[test]
    fn heatmap_is_deterministic_and_sized_to_the_frame() {
        let frame = GridFrame::new(40, 30, 0.1, Point::new(0.0, 0.0));
        let vmap = fuse(
            &[marker(1, 2.0, 1.5)],
            &MarkerScores { scores: vec![0.8] },
            None,
            &frame,
            &cfg(),
        );
        let (a, b) = (vmap.to_heatmap(), vmap.to_heatmap());
        assert_eq!(a.dimensions(), (40, 30));
        assert_eq!(a.as_raw(), b.as_raw());
    }
}
