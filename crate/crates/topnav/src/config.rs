//! Pipeline configuration. Every constant the simulator or the decision
//! pipeline depends on lives here so that runs are reproducible from a
//! single serialized document.

use serde::{Deserialize, Serialize};

use crate::avpg::ClusterConfig;
use crate::ptd::FusionConfig;

/// Agent kinematics and sensing: discrete steps and turns with a fixed
/// field of view, matching common embodied-navigation conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Meters advanced by one `move_forward`.
    pub forward_step_m: f64,
    /// Degrees rotated by one `turn_left` / `turn_right`.
    pub turn_increment_deg: f64,
    /// Horizontal field of view, degrees.
    pub fov_deg: f64,
    /// Maximum sensing range, meters.
    pub max_range_m: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            forward_step_m: 0.25,
            turn_increment_deg: 30.0,
            fov_deg: 90.0,
            max_range_m: 5.0,
        }
    }
}

impl AgentConfig {
    pub fn turn_increment_rad(&self) -> f64 {
        self.turn_increment_deg.to_radians()
    }

    pub fn fov_rad(&self) -> f64 {
        self.fov_deg.to_radians()
    }
}

/// Occupancy grid dimensions. 1000 x 1000 cells at 0.05 m/cell covers a
/// 50 m square, large enough for any generated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub width: u32,
    pub height: u32,
    pub meters_per_cell: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 1000,
            height: 1000,
            meters_per_cell: 0.05,
        }
    }
}

/// Prompt-map rendering scale and layer toggles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Base render scale. 20 px/m puts the full 50 m map in 1000 px.
    pub pixels_per_meter: f64,
    /// Raster size cap, pixels. Zoomed renders are cut off at this limit.
    pub raster_limit_px: u32,
    pub layers: RenderLayers,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            pixels_per_meter: 20.0,
            raster_limit_px: 1000,
            layers: RenderLayers::default(),
        }
    }
}

/// Which visual-prompt layers are drawn. Each flag removes exactly one
/// layer, for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderLayers {
    /// Traversed-trajectory polyline.
    pub history: bool,
    /// Obstacle cells drawn distinctly from unknown space.
    pub obstacle: bool,
    /// Object text boxes.
    pub textboxes: bool,
    /// Coordinate grid lines and meter labels.
    pub coordinate: bool,
}

impl Default for RenderLayers {
    fn default() -> Self {
        Self {
            history: true,
            obstacle: true,
            textboxes: true,
            coordinate: true,
        }
    }
}

/// Dynamic map scaling limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmsConfig {
    /// Upper bound on the scaling factor.
    pub max_scale: f64,
}

impl Default for DmsConfig {
    fn default() -> Self {
        Self { max_scale: 5.0 }
    }
}

/// Local-policy tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Heading error below which the agent drives forward instead of
    /// turning; half the turn increment is the smallest achievable
    /// alignment.
    pub heading_tolerance_deg: f64,
    /// Waypoints are popped when within this distance, meters.
    pub waypoint_radius_m: f64,
    /// Replan after this many low-level actions even if the plan is not
    /// exhausted.
    pub replan_every: u32,
    /// Forced stop after this many low-level actions.
    pub step_limit: u32,
    /// Success distance threshold, meters.
    pub success_radius_m: f64,
    /// Perform a full in-place rotation at episode start to seed the map.
    pub initial_scan: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            heading_tolerance_deg: 15.0,
            waypoint_radius_m: 0.2,
            replan_every: 25,
            step_limit: 500,
            success_radius_m: 1.0,
            initial_scan: true,
        }
    }
}

/// How the moving location is derived from marker scores and the predicted
/// target location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Fused Gaussian value map; argmax over known-free cells.
    Gaussian,
    /// No fusion: the highest-peaked candidate point wins.
    Max,
}

impl std::str::FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(FusionMode::Gaussian),
            "max" => Ok(FusionMode::Max),
            other => Err(format!("unknown fusion mode '{other}' (gaussian|max)")),
        }
    }
}

/// Everything a single episode needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub agent: AgentConfig,
    pub grid: GridConfig,
    pub render: RenderConfig,
    pub cluster: ClusterConfig,
    pub dms: DmsConfig,
    pub fusion: FusionConfig,
    pub policy: PolicyConfig,
    /// Enable dynamic map scaling between AVPG and PTD.
    pub use_dms: bool,
    /// Enable potential-target prediction; when off, the goal is the
    /// best-scored marker.
    pub use_ptd: bool,
    pub fusion_mode: FusionMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            grid: GridConfig::default(),
            render: RenderConfig::default(),
            cluster: ClusterConfig::default(),
            dms: DmsConfig::default(),
            fusion: FusionConfig::default(),
            policy: PolicyConfig::default(),
            use_dms: true,
            use_ptd: true,
            fusion_mode: FusionMode::Gaussian,
        }
    }
}
