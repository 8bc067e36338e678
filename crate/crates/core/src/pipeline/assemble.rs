use serde::{Deserialize, Serialize};

use crate::layout::{Room, Scene3D};

use super::PipelineError;

pub const MANIFEST_VERSION: u32 = 1;

/// A generated asset. `native_extents` are the mesh's axis-aligned bounds
/// along its own x (length), y (width) and z (height) axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub asset_id: String,
    pub source_prompt: String,
    pub native_extents: [f64; 3],
    /// Direction the asset faces at yaw 0, e.g. `+y`.
    pub front_axis: String,
}

impl AssetRecord {
    pub fn validate(&self, index: usize) -> Result<(), PipelineError> {
        if self.native_extents.iter().all(|e| e.is_finite() && *e > 0.0) {
            Ok(())
        } else {
            Err(PipelineError::NonpositiveExtent { index })
        }
    }
}

/// Stand-in assets whose native extents equal the target extents.
pub fn default_assets(scene: &Scene3D) -> Vec<AssetRecord> {
    scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| AssetRecord {
            asset_id: format!("asset-{i:03}"),
            source_prompt: o.asset_prompt.clone(),
            native_extents: [o.length, o.width, o.height],
            front_axis: "+y".into(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub asset_id: String,
    pub label: String,
    pub asset_prompt: String,
    pub scale: [f64; 3],
    pub translation: [f64; 3],
    pub yaw_degrees: f64,
}

/// Placement of every asset in the room, for downstream renderers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub version: u32,
    pub room: Room,
    pub objects: Vec<ManifestObject>,
}

impl SceneManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Scales each asset to its slot (componentwise, non-uniform) and places it
/// at the slot's center with the slot's yaw.
pub fn assemble_scene(scene: &Scene3D, assets: &[AssetRecord]) -> Result<SceneManifest, PipelineError> {
    if scene.len() != assets.len() {
        return Err(PipelineError::AssetCountMismatch {
            objects: scene.len(),
            assets: assets.len(),
        });
    }
    let mut objects = Vec::with_capacity(scene.len());
    for (i, (o, a)) in scene.objects.iter().zip(assets).enumerate() {
        a.validate(i)?;
        let target = [o.length, o.width, o.height];
        let mut scale = [0.0; 3];
        for k in 0..3 {
            scale[k] = target[k] / a.native_extents[k];
        }
        objects.push(ManifestObject {
            asset_id: a.asset_id.clone(),
            label: o.label.clone(),
            asset_prompt: o.asset_prompt.clone(),
            scale,
            translation: [o.center_x, o.center_y, o.center_z],
            yaw_degrees: o.orientation,
        });
    }
    Ok(SceneManifest {
        version: MANIFEST_VERSION,
        room: scene.room,
        objects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{BevObject, SceneObject3D};

    fn bed_scene() -> Scene3D {
        let bev = BevObject::new("bed", 88.0, 40.0, 120.0, 60.0, 0.0).unwrap();
        let mut o = SceneObject3D::from_bev(&bev, 36.0, 18.0).unwrap();
        o.asset_prompt = "A bed.".into();
        Scene3D::new(Room::new(256, 256, 160).unwrap(), vec![o])
    }

    fn asset(ext: [f64; 3]) -> AssetRecord {
        AssetRecord {
            asset_id: "a".into(),
            source_prompt: String::new(),
            native_extents: ext,
            front_axis: "+y".into(),
        }
    }

    #[test]
    fn componentwise_scale() {
        let m = assemble_scene(&bed_scene(), &[asset([2.0, 1.0, 1.0])]).unwrap();
        assert_eq!(m.objects[0].scale, [44.0, 40.0, 36.0]);
        assert_eq!(m.objects[0].translation, [120.0, 60.0, 18.0]);
        let scene = bed_scene();
        let m = assemble_scene(&scene, &default_assets(&scene)).unwrap();
        assert_eq!(m.objects[0].scale, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            assemble_scene(&bed_scene(), &[]),
            Err(PipelineError::AssetCountMismatch { objects: 1, assets: 0 })
        );
        assert_eq!(
            assemble_scene(&bed_scene(), &[asset([1.0, 0.0, 1.0])]),
            Err(PipelineError::NonpositiveExtent { index: 0 })
        );
    }
}
