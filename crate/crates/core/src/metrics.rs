//! Out-of-bound and collision rates over a lifted scene. Both count objects,
//! not pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{boxes_collide_3d, is_out_of_bound, Box3D, GeometryError};
use crate::layout::Scene3D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("scene has no objects")]
    EmptyScene,
    #[error("object {index}: {source}")]
    Geometry {
        index: usize,
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub object_count: usize,
    pub out_of_bound_rate: f64,
    pub collision_rate: f64,
    pub offenders_oob: Vec<usize>,
    pub offenders_collision: Vec<usize>,
    pub epsilon: f64,
    pub tolerance: f64,
}

fn boxes(scene: &Scene3D) -> Result<Vec<Box3D>, MetricsError> {
    if scene.objects.is_empty() {
        return Err(MetricsError::EmptyScene);
    }
    scene
        .objects
        .iter()
        .enumerate()
        .map(|(index, o)| Box3D::from_object(o).map_err(|source| MetricsError::Geometry { index, source }))
        .collect()
}

fn rate(offenders: usize, n: usize) -> f64 {
    offenders as f64 / n as f64
}

pub fn out_of_bound_rate(scene: &Scene3D, tolerance: f64) -> Result<(f64, Vec<usize>), MetricsError> {
    let boxes = boxes(scene)?;
    let tol = tolerance.max(0.0);
    let ceiling = f64::from(scene.room.max_height) + tol;
    let offenders: Vec<usize> = boxes
        .iter()
        .enumerate()
        .filter(|(_, b)| {
            is_out_of_bound(&b.footprint, &scene.room, tol) || b.z_lo < -tol || b.z_hi > ceiling
        })
        .map(|(i, _)| i)
        .collect();
    Ok((rate(offenders.len(), boxes.len()), offenders))
}

pub fn collision_rate(scene: &Scene3D, epsilon: f64) -> Result<(f64, Vec<usize>), MetricsError> {
    let boxes = boxes(scene)?;
    let n = boxes.len();
    let mut hit = vec![false; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if boxes_collide_3d(&boxes[i], &boxes[j], epsilon) {
                hit[i] = true;
                hit[j] = true;
            }
        }
    }
    let offenders: Vec<usize> = (0..n).filter(|&i| hit[i]).collect();
    Ok((rate(offenders.len(), n), offenders))
}

pub fn evaluate(scene: &Scene3D, epsilon: f64, tolerance: f64) -> Result<MetricsReport, MetricsError> {
    let (oob, offenders_oob) = out_of_bound_rate(scene, tolerance)?;
    let (col, offenders_collision) = collision_rate(scene, epsilon)?;
    Ok(MetricsReport {
        object_count: scene.objects.len(),
        out_of_bound_rate: oob,
        collision_rate: col,
        offenders_oob,
        offenders_collision,
        epsilon,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Room, SceneObject3D};

    fn obj(label: &str, x: f64, y: f64, l: f64, w: f64, z: f64, h: f64) -> SceneObject3D {
        SceneObject3D {
            label: label.into(),
            length: l,
            width: w,
            height: h,
            center_x: x,
            center_y: y,
            center_z: z,
            orientation: 0.0,
            asset_prompt: String::new(),
        }
    }

    fn room() -> Room {
        Room::new(256, 171, 160).unwrap()
    }

    #[test]
    fn empty_scene() {
        let scene = Scene3D::new(room(), vec![]);
        assert_eq!(out_of_bound_rate(&scene, 0.5), Err(MetricsError::EmptyScene));
        assert_eq!(collision_rate(&scene, 1.0), Err(MetricsError::EmptyScene));
    }

    #[test]
    fn quarter_out_of_bound() {
        let scene = Scene3D::new(
            room(),
            vec![
                obj("a", 2.0, 50.0, 10.0, 10.0, 10.0, 20.0), // corner at x = -3
                obj("b", 60.0, 50.0, 10.0, 10.0, 10.0, 20.0),
                obj("c", 100.0, 50.0, 10.0, 10.0, 10.0, 20.0),
                obj("d", 140.0, 50.0, 10.0, 10.0, 10.0, 20.0),
            ],
        );
        assert_eq!(out_of_bound_rate(&scene, 0.0).unwrap(), (0.25, vec![0]));
    }

    #[test]
    fn ceiling_violation() {
        let scene = Scene3D::new(room(), vec![obj("shelf", 100.0, 50.0, 10.0, 10.0, 141.0, 40.0)]);
        // z_hi = 161 > 160.5
        assert_eq!(out_of_bound_rate(&scene, 0.5).unwrap(), (1.0, vec![0]));
        let ok = Scene3D::new(room(), vec![obj("shelf", 100.0, 50.0, 10.0, 10.0, 140.4, 40.0)]);
        assert_eq!(out_of_bound_rate(&ok, 0.5).unwrap().0, 0.0);
    }

    #[test]
    fn two_of_three_collide() {
        let scene = Scene3D::new(
            room(),
            vec![
                obj("a", 50.0, 50.0, 20.0, 20.0, 10.0, 20.0),
                obj("b", 60.0, 55.0, 20.0, 20.0, 10.0, 20.0),
                obj("c", 200.0, 100.0, 20.0, 20.0, 10.0, 20.0),
            ],
        );
        let (r, off) = collision_rate(&scene, 1.0).unwrap();
        assert_eq!(r, 2.0 / 3.0);
        assert_eq!(off, vec![0, 1]);
    }

    #[test]
    fn stacked_lamp_does_not_collide() {
        let scene = Scene3D::new(
            room(),
            vec![
                obj("table", 50.0, 50.0, 40.0, 40.0, 20.0, 40.0),
                obj("lamp", 50.0, 50.0, 10.0, 10.0, 50.0, 20.0),
            ],
        );
        assert_eq!(collision_rate(&scene, 1.0).unwrap(), (0.0, vec![]));
    }

    #[test]
    fn chain_collisions() {
        // A overlaps B, B overlaps C, A and C disjoint
        let scene = Scene3D::new(
            room(),
            vec![
                obj("a", 50.0, 50.0, 20.0, 20.0, 10.0, 20.0),
                obj("b", 65.0, 50.0, 20.0, 20.0, 10.0, 20.0),
                obj("c", 80.0, 50.0, 20.0, 20.0, 10.0, 20.0),
            ],
        );
        assert_eq!(collision_rate(&scene, 1.0).unwrap(), (1.0, vec![0, 1, 2]));
    }
}
