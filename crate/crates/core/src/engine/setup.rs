use std::collections::BTreeMap;

use crate::deform::{SkeletonParams, SurfaceParams};
use crate::geometry::{decimate, liver_mesh, TriMesh, Vec3};
use crate::haptics::{Backend, ObjectSpec, DEFAULT_DAMPING};
use crate::pathology::{make_preset, Condition, LiverPreset};
use crate::scenegraph::{HapticMaterial, MeshRef, Scene, SceneNode};

use super::EngineError;

/// Name of the bundled liver asset.
pub const LIVER_ASSET: &str = "liver.off";
/// Triangle budget of the haptic liver.
pub const LIVER_TARGET_TRIANGLES: usize = 3200;

/// A scene with its resolved mesh assets and simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSetup {
    pub scene: Scene,
    /// Mesh assets by reference name.
    pub meshes: BTreeMap<String, TriMesh>,
    pub surface: SurfaceParams,
    pub skeleton: SkeletonParams,
    pub preset: LiverPreset,
    pub backend: Backend,
    /// m/s²
    pub gravity: Vec3,
}

impl SceneSetup {
    /// The default scene: one liver at the origin, normal preset.
    pub fn default_liver() -> SceneSetup {
        SceneSetup::with_mesh(liver_mesh(), Some(LIVER_TARGET_TRIANGLES))
    }

    /// A single palpable object using `mesh` as the liver asset.
    pub fn with_mesh(mesh: TriMesh, target_triangles: Option<usize>) -> SceneSetup {
        let liver = SceneNode::new("liver")
            .with_geometry(MeshRef {
                asset: LIVER_ASSET.to_string(),
                target_triangles,
            })
            .with_haptic_material(HapticMaterial {
                damping: DEFAULT_DAMPING,
            })
            .with_visual_material("liver");
        let scene = Scene::new(SceneNode::new("world"))
            .with_child("world", liver)
            .expect("fresh scene accepts a child");
        SceneSetup {
            scene,
            meshes: BTreeMap::from([(LIVER_ASSET.to_string(), mesh)]),
            surface: SurfaceParams::default(),
            skeleton: SkeletonParams::default(),
            preset: make_preset(Condition::Normal, 0),
            backend: Backend::Surface,
            gravity: Vec3::ZERO,
        }
    }

    /// Resolves the single palpable node into an object description.
    pub fn object_spec(&self) -> Result<ObjectSpec, EngineError> {
        let palpable = self.scene.palpable_nodes();
        if palpable.len() != 1 {
            return Err(EngineError::Scene(format!(
                "expected exactly one palpable node, found {}",
                palpable.len()
            )));
        }
        let node = palpable[0];
        let geometry = node.geometry.as_ref().expect("palpable nodes carry geometry");
        let material = node.haptic_material.expect("palpable nodes carry a material");
        let mesh = self
            .meshes
            .get(&geometry.asset)
            .ok_or_else(|| EngineError::Scene(format!("mesh asset {:?} is not loaded", geometry.asset)))?;
        let mesh = match geometry.target_triangles {
            Some(target) if mesh.triangle_count() > target => decimate(mesh, target)?,
            _ => mesh.clone(),
        };
        let transform = self
            .scene
            .world_transform(&node.id)
            .map_err(|e| EngineError::Scene(e.to_string()))?;
        Ok(ObjectSpec {
            mesh,
            transform,
            preset: self.preset.clone(),
            surface: self.surface,
            skeleton: self.skeleton,
            damping: material.damping,
            gravity: self.gravity,
        })
    }
}
