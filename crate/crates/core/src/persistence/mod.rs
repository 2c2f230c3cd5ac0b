//! Scene documents (canonical XML) and force-trace / calibration files.

mod read;
mod write;

pub use read::{load_scene, load_scene_file, read_trace_csv, TraceRow};
pub use write::{save_scene, save_scene_file, save_setup};

pub use crate::engine::{trace_to_csv, write_trace_csv, TRACE_HEADER};
pub use crate::pathology::Calibration;

use std::path::PathBuf;

use thiserror::Error;

use crate::deform::{SkeletonParams, SurfaceParams};
use crate::engine::SceneSetup;
use crate::geometry::{GeometryError, Vec3};
use crate::haptics::Backend;
use crate::pathology::LiverPreset;
use crate::scenegraph::Scene;

/// Document format version written by this build.
pub const FORMAT_VERSION: u32 = 1;
pub const ROOT_ELEMENT: &str = "palpsim-scene";
/// The XML schema describing scene documents.
pub const SCENE_SCHEMA: &str = include_str!("../../assets/palpsim-scene.xsd");

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("malformed document near <{element}>: {message}")]
    Parse { element: String, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported document version {0:?} (this build reads version {FORMAT_VERSION})")]
    UnknownVersion(String),
    #[error("mesh asset {asset:?} could not be loaded from {}: {source}", path.display())]
    MissingAsset {
        asset: String,
        path: PathBuf,
        #[source]
        source: GeometryError,
    },
    #[error("invalid asset reference {0:?}: must be a relative path inside the document directory")]
    AssetReference(String),
    #[error("cannot serialize: {0}")]
    Unserializable(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
}

/// Everything a scene document holds; mesh assets stay referenced by path.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDocument {
    pub scene: Scene,
    pub surface: SurfaceParams,
    pub skeleton: SkeletonParams,
    pub preset: LiverPreset,
    pub backend: Backend,
    pub gravity: Vec3,
}

impl SceneDocument {
    pub fn from_setup(setup: &SceneSetup) -> SceneDocument {
        SceneDocument {
            scene: setup.scene.clone(),
            surface: setup.surface,
            skeleton: setup.skeleton,
            preset: setup.preset.clone(),
            backend: setup.backend,
            gravity: setup.gravity,
        }
    }
}

/// Asset references are relative paths that stay inside the document's
/// directory.
pub fn check_asset_reference(asset: &str) -> Result<(), PersistenceError> {
    let p = std::path::Path::new(asset);
    let ok = !asset.is_empty()
        && !asset.chars().any(char::is_control)
        && p.is_relative()
        && p.components().all(|c| matches!(c, std::path::Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(PersistenceError::AssetReference(asset.to_string()))
    }
}
