use crate::geometry::{TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceParams {
    /// Gaussian falloff radius ρ of the visual dimple (m).
    pub falloff_radius: f64,
    /// Largest visual displacement (m).
    pub max_indent: f64,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        SurfaceParams {
            falloff_radius: 0.02,
            max_indent: 0.03,
        }
    }
}

/// Dual-geometry surface model: forces come from the untouched rest mesh,
/// the visual copy shows the dimple.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    rest: TriMesh,
    visual: Vec<Vec3>,
    pub params: SurfaceParams,
}

impl SurfaceModel {
    pub fn new(rest: TriMesh, params: SurfaceParams) -> Self {
        let visual = rest.vertices().to_vec();
        SurfaceModel { rest, visual, params }
    }

    pub fn rest(&self) -> &TriMesh {
        &self.rest
    }

    pub fn visual_vertices(&self) -> &[Vec3] {
        &self.visual
    }

    /// Visual geometry as a mesh (normals recomputed).
    pub fn visual(&self) -> TriMesh {
        self.rest.with_vertices(self.visual.clone())
    }

    pub fn reset(&mut self) {
        self.visual.copy_from_slice(self.rest.vertices());
    }

    /// Recomputes the visual geometry for a dimple of depth `depth` at
    /// `contact` pressed along `-normal`. Depends only on the rest shape, so
    /// repeated calls with equal arguments give equal results.
    pub fn indent(&mut self, contact: Vec3, normal: Vec3, depth: f64) {
        if depth <= 0.0 {
            self.reset();
            return;
        }
        let inv_two_rho2 = 1.0 / (2.0 * self.params.falloff_radius * self.params.falloff_radius);
        let max = self.params.max_indent;
        for (v, &p) in self.visual.iter_mut().zip(self.rest.vertices()) {
            let mag = (depth * (-(p - contact).norm_squared() * inv_two_rho2).exp()).min(max);
            *v = p - normal * mag;
        }
    }
}

/// Pure form of [`SurfaceModel::indent`].
pub fn indent_surface(model: &SurfaceModel, contact: Vec3, normal: Vec3, depth: f64) -> SurfaceModel {
    let mut m = model.clone();
    m.indent(contact, normal, depth);
    m
}
