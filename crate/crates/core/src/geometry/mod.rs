//! Domains the solvers run on: polytopal meshes, connectomes, and the
//! Braak atlas that labels their regions.

mod atlas;
mod connectome;
mod generate;
mod mesh;
mod mesh_io;

pub use atlas::{stage_of_name, BraakAtlas, BraakStage, CANONICAL_STAGE_NAMES};
pub use connectome::{Connectome, Edge, Node};
pub use generate::{generate_structured_mesh, Labeling};
pub use mesh::{
    BoundaryFace, BoundingBox, Element, ElementSpec, FacePiece, InternalFace, PolytopalMesh,
    Simplex,
};
pub use mesh_io::{load_mesh, parse_mesh, write_mesh};

use crate::error::{Error, Result};

/// Coordinates in mm; the third component is zero for planar meshes.
pub type Point = [f64; 3];

pub type RegionId = u32;

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot3(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm3(a: Point) -> f64 {
    dot3(a, a).sqrt()
}

/// Anisotropic diffusion `D = d_ext I + d_axn a (x) a` with `a` the per-element
/// axonal direction. Diffusivities in mm^2/year.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionModel {
    d_ext: f64,
    d_axn: f64,
}

impl DiffusionModel {
    pub fn new(d_ext: f64, d_axn: f64) -> Result<Self> {
        if !(d_ext > 0.0) || !d_ext.is_finite() {
            return Err(Error::param("d_ext", format!("must be > 0, got {d_ext}")));
        }
        if !(d_axn >= 0.0) || !d_axn.is_finite() {
            return Err(Error::param("d_axn", format!("must be >= 0, got {d_axn}")));
        }
        Ok(Self { d_ext, d_axn })
    }

    /// Reaction-only dynamics, `D = 0`.
    pub fn none() -> Self {
        Self {
            d_ext: 0.0,
            d_axn: 0.0,
        }
    }

    pub fn d_ext(&self) -> f64 {
        self.d_ext
    }

    pub fn d_axn(&self) -> f64 {
        self.d_axn
    }

    pub fn tensor(&self, axon: Point) -> [[f64; 3]; 3] {
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = self.d_axn * axon[i] * axon[j];
            }
            d[i][i] += self.d_ext;
        }
        d
    }

    /// Spectral norm of `D`, i.e. its largest eigenvalue `d_ext + d_axn |a|^2`.
    pub fn max_eigenvalue(&self, axon: Point) -> f64 {
        self.d_ext + self.d_axn * dot3(axon, axon)
    }
}

impl Default for DiffusionModel {
    fn default() -> Self {
        Self {
            d_ext: 8.0,
            d_axn: 80.0,
        }
    }
}
