//! Triangle meshes and the geometric queries the simulator needs.

mod decimate;
mod io;
mod mesh;
mod query;
mod sampling;
mod shapes;
mod vec3;

pub use decimate::{decimate, MIN_TRIANGLES};
pub use io::{load_mesh, load_mesh_file, parse_obj, parse_off, write_obj, write_off, MeshFormat};
pub use mesh::{compute_vertex_normals, Aabb, MeshReport, TriMesh, DEGENERATE_AREA};
pub use query::{closest_point_on_mesh, closest_point_on_triangle, ClosestPoint, MeshIndex};
pub use sampling::{farthest_point_indices, farthest_point_sample, sample_candidates, seed_candidate};
pub use shapes::{flat_grid, icosphere, liver_mesh, tetrahedron, LiverShape};
pub use vec3::Vec3;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face has {arity} vertices, only triangles are supported")]
    NonTriangularFace { line: usize, arity: usize },
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("target of {target} triangles is below the closed-surface minimum of {minimum}")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error("decimation stalled at {reached} triangles (target {target})")]
    DecimationStalled { reached: usize, target: usize },
    #[error("requested {requested} samples but only {available} candidates exist")]
    TooManySamples { requested: usize, available: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
