//! Deterministic 2-D object-goal navigation simulator and spatial reasoning
//! engine.
//!
//! An agent is dropped into a synthetic indoor scene and must find an
//! instance of a named object category using discrete low-level actions.
//! Decision making runs on an allocentric top-view map:
//!
//! * [`worldsim`] — scenes, agent kinematics, and the egocentric
//!   observation model.
//! * [`topmap`] — the incremental occupancy map, frontier extraction, and
//!   ground-truth shortest paths.
//! * [`avpg`] — key-area clustering and the visual-prompt map renderer
//!   (text boxes, markers, trajectory, coordinate grid).
//! * [`dms`] — dynamic map scaling: sub-region selection and a layout-aware
//!   zoom factor derived from text-box occlusion.
//! * [`ptd`] — potential-target-driven goal selection: fused Gaussian value
//!   maps over markers and a predicted target location.
//! * [`reasoner`] — the pluggable decision contract (deterministic oracles
//!   and a remote multimodal-model client).
//! * [`policy`] — grid path planning, action emission, and the episode loop.
//! * [`harness`] — procedural scene generation, benchmark suites, and
//!   SR/SPL metrics.
//!
//! Everything is deterministic given a seed: two runs of the same suite
//! produce byte-identical reports and debug dumps.

pub mod avpg;
pub mod config;
pub mod dms;
pub mod geometry;
pub mod harness;
pub mod policy;
pub mod ptd;
pub mod reasoner;
pub mod topmap;
pub mod worldsim;

pub use config::PipelineConfig;
