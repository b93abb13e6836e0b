//! Dynamic map scaling: ask the reasoner for a region of interest, derive
//! a scaling factor from how badly the text boxes in that region occlude
//! each other, and re-render the window at the larger scale.

use serde::{Deserialize, Serialize};

use crate::avpg::{self, PromptMap, TextBox};
use crate::config::PipelineConfig;
use crate::geometry::{Point, Rect};
use crate::reasoner::{QueryRole, Reasoner, ReasonerAnswer, ReasonerQuery};
use crate::topmap::{Frontier, OccupancyGrid};
use crate::worldsim::Pose;

/// A world-space sub-window: the maximal edge-aligned rectangle centered
/// on the chosen point, so each half-extent equals the distance from the
/// center to the nearer map edge on that axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropWindow {
    pub center: Point,
    pub half_extent: (f64, f64),
}

impl CropWindow {
    /// Build the maximal window for `center` inside `bounds`. The center
    /// is clamped into the bounds first.
    pub fn maximal(center: Point, bounds: &Rect) -> Self {
        let center = bounds.clamp(center);
        let hx = (center.x - bounds.x).min(bounds.x + bounds.w - center.x);
        let hy = (center.y - bounds.y).min(bounds.y + bounds.h - center.y);
        Self {
            center,
            half_extent: (hx, hy),
        }
    }

    pub fn rect(&self) -> Rect {
        Rect::new(
            self.center.x - self.half_extent.0,
            self.center.y - self.half_extent.1,
            2.0 * self.half_extent.0,
            2.0 * self.half_extent.1,
        )
    }
}

/// Per-box occlusion factors and the final clamped scaling factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    /// One factor per text box, aligned with the input order; infinite for
    /// complete overlap.
    pub per_object_factors: Vec<f64>,
    /// max over the factors, clamped into [1, max_scale].
    pub f_scale: f64,
}

/// Index of the point in `points` nearest to `points[i]`, excluding `i`
/// itself; ties go to the lowest index. `None` when there is no other
/// point.
pub fn nearest_object(i: usize, points: &[Point]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (j, p) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = points[i].distance(*p);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    best.map(|(_, j)| j)
}

/// Occlusion-derived scaling. Each box is compared against the box whose
/// center is nearest to its own; the factor 1/(1 - IoU) is exactly the
/// separation growth that pulls two fixed-size boxes apart, and complete
/// overlap maps to infinity before clamping.
pub fn scaling_factor(textboxes: &[TextBox], max_scale: f64) -> ScalingResult {
    if textboxes.len() < 2 {
        return ScalingResult {
            per_object_factors: vec![1.0; textboxes.len()],
            f_scale: 1.0,
        };
    }
    let centers: Vec<Point> = textboxes.iter().map(|tb| tb.center()).collect();
    let per_object_factors: Vec<f64> = (0..textboxes.len())
        .map(|i| {
            let j = nearest_object(i, &centers).expect("len >= 2 guarantees a neighbor");
            let iou = avpg::rect_iou(&textboxes[i].rect, &textboxes[j].rect);
            if iou >= 1.0 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - iou)
            }
        })
        .collect();
    let raw = per_object_factors
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    ScalingResult {
        per_object_factors,
        f_scale: raw.clamp(1.0, max_scale),
    }
}

/// Ask the reasoner whether a sub-region deserves a closer look; on a
/// decline the input map is returned unchanged, otherwise the maximal
/// window around the chosen center is re-rendered at the occlusion-derived
/// scale (the raster limit cuts off whatever no longer fits).
pub fn apply_dms(
    grid: &OccupancyGrid,
    prompt_map: &PromptMap,
    pose: &Pose,
    frontiers: &[Frontier],
    reasoner: &dyn Reasoner,
    target_category: &str,
    cfg: &PipelineConfig,
) -> PromptMap {
    let query = ReasonerQuery {
        role: QueryRole::SelectRegion,
        prompt_map,
        target_category,
    };
    let center = match reasoner.query(&query) {
        ReasonerAnswer::Region(Some(center)) => center,
        _ => return prompt_map.clone(),
    };
    let bounds = grid.frame.world_rect();
    let window = CropWindow::maximal(center, &bounds);
    let inside: Vec<TextBox> = prompt_map
        .textboxes
        .iter()
        .filter(|tb| window.rect().contains(tb.anchor_world))
        .cloned()
        .collect();
    let scaling = scaling_factor(&inside, cfg.dms.max_scale);
    avpg::render_prompt_map(
        grid,
        &prompt_map.markers,
        pose,
        frontiers,
        window.rect(),
        prompt_map.pixels_per_meter * scaling.f_scale,
        &cfg.render,
    )
}
