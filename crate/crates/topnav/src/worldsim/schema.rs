//! Scene document schema. Lengths are meters, angles are degrees in the
//! file and radians in memory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Rect};
use crate::worldsim::{PlacedObject, Pose, Scene};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene document does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scene validation failed at {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneDoc {
    bounds: [f64; 2],
    #[serde(default)]
    walls: Vec<WallDoc>,
    #[serde(default)]
    objects: Vec<ObjectDoc>,
    start: StartDoc,
    #[serde(default)]
    targets: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WallDoc {
    rect: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
struct ObjectDoc {
    category: String,
    position: [f64; 2],
    footprint: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
struct StartDoc {
    /// `[x, y, heading_degrees]`
    pose: [f64; 3],
}

fn rect_from(field: &str, v: [f64; 4]) -> Result<Rect, SceneError> {
    let r = Rect::new(v[0], v[1], v[2], v[3]);
    if !(r.w > 0.0 && r.h > 0.0) {
        return Err(invalid(field, "rectangle must have positive extent"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "rectangle coordinates must be finite"));
    }
    Ok(r)
}

/// Parse and validate a scene document.
pub fn load_scene(document: &str) -> Result<Scene, SceneError> {
    let doc: SceneDoc = serde_json::from_str(document)?;

    if !(doc.bounds[0] > 0.0 && doc.bounds[1] > 0.0) {
        return Err(invalid("bounds", "bounds must be positive"));
    }
    let bounds = Rect::new(0.0, 0.0, doc.bounds[0], doc.bounds[1]);

    let mut walls = Vec::with_capacity(doc.walls.len());
    for (i, w) in doc.walls.iter().enumerate() {
        let field = format!("walls[{i}].rect");
        let r = rect_from(&field, w.rect)?;
        if r.x < bounds.x || r.y < bounds.y || r.max_x() > bounds.max_x() + 1e-9
            || r.max_y() > bounds.max_y() + 1e-9
        {
            return Err(invalid(field, "wall extends outside bounds"));
        }
        walls.push(r);
    }

    let mut objects = Vec::with_capacity(doc.objects.len());
    for (i, o) in doc.objects.iter().enumerate() {
        if o.category.is_empty() {
            return Err(invalid(format!("objects[{i}].category"), "category must be non-empty"));
        }
        let position = Point::new(o.position[0], o.position[1]);
        if !position.is_finite() {
            return Err(invalid(format!("objects[{i}].position"), "position must be finite"));
        }
        if !bounds.contains(position) {
            return Err(invalid(
                format!("objects[{i}].position"),
                format!(
                    "object at ({}, {}) lies outside bounds {}x{}",
                    position.x, position.y, bounds.w, bounds.h
                ),
            ));
        }
        let footprint = rect_from(&format!("objects[{i}].footprint"), o.footprint)?;
        if !footprint.contains(position) {
            return Err(invalid(
                format!("objects[{i}].footprint"),
                "footprint must contain the object position",
            ));
        }
        objects.push(PlacedObject {
            category: o.category.clone(),
            position,
            footprint,
        });
    }

    let start = Pose::new(
        doc.start.pose[0],
        doc.start.pose[1],
        doc.start.pose[2].to_radians(),
    );
    if !bounds.contains(start.position) {
        return Err(invalid("start.pose", "start pose lies outside bounds"));
    }

    let scene = Scene {
        bounds,
        walls,
        objects,
        start,
        targets: doc.targets,
    };
    if !scene.is_navigable(scene.start.position) {
        return Err(invalid("start.pose", "start pose is not navigable"));
    }
    // At least one navigable cell must exist; the start pose guarantees it
    // at any resolution coarser than the clearance around the start, so
    // check a representative rasterization.
    if scene.rasterize(0.05).navigable_cells().next().is_none() {
        return Err(invalid("bounds", "scene has no navigable cell at 0.05 m resolution"));
    }
    Ok(scene)
}

/// Serialize a scene back to the document format, degrees in the heading.
pub fn serialize_scene(scene: &Scene) -> String {
    let doc = SceneDoc {
        bounds: [scene.bounds.w, scene.bounds.h],
        walls: scene
            .walls
            .iter()
            .map(|r| WallDoc {
                rect: [r.x, r.y, r.w, r.h],
            })
            .collect(),
        objects: scene
            .objects
            .iter()
            .map(|o| ObjectDoc {
                category: o.category.clone(),
                position: [o.position.x, o.position.y],
                footprint: [
                    o.footprint.x,
                    o.footprint.y,
                    o.footprint.w,
                    o.footprint.h,
                ],
            })
            .collect(),
        start: StartDoc {
            pose: [
                scene.start.position.x,
                scene.start.position.y,
                scene.start.heading.to_degrees(),
            ],
        },
        targets: scene.targets.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("scene document serialization cannot fail")
}
