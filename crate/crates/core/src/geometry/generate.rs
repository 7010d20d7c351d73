use super::mesh::{ElementSpec, PolytopalMesh};
use super::{Point, RegionId};
use crate::error::{Error, Result};

/// Rule assigning a region label to each generated element.
#[derive(Clone, Debug, PartialEq)]
pub enum Labeling {
    /// Every element gets the same id.
    Uniform(RegionId),
    /// `count` equal-width bands along `axis`, labelled `first_id, first_id + 1, ...`
    /// by element centroid. Ordered bands stand in for sequentially invaded regions.
    Slabs {
        axis: usize,
        count: u32,
        first_id: RegionId,
    },
}

impl Labeling {
    pub fn slabs(count: u32) -> Self {
        Labeling::Slabs {
            axis: 0,
            count,
            first_id: 1,
        }
    }

    fn label(&self, centroid: Point, extent: f64) -> RegionId {
        match *self {
            Labeling::Uniform(id) => id,
            Labeling::Slabs {
                axis,
                count,
                first_id,
            } => {
                let band = (centroid[axis] / extent * count as f64).floor();
                first_id + (band.max(0.0) as u32).min(count - 1)
            }
        }
    }
}

/// Kuhn subdivision of the unit cube into 6 tetrahedra sharing the main diagonal.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Simplicial mesh of `[0, extent]^d`: `2 n^2` triangles or `6 n^3` tetrahedra.
/// All elements share the axonal direction `axon`.
pub fn generate_structured_mesh(
    dim: usize,
    n: usize,
    extent: f64,
    labeling: &Labeling,
    axon: Point,
) -> Result<PolytopalMesh> {
    if n < 1 {
        return Err(Error::param("n", "need at least one cell per axis"));
    }
    if !(extent > 0.0) {
        return Err(Error::param("extent", format!("must be > 0, got {extent}")));
    }
    if let Labeling::Slabs { axis, count, .. } = labeling {
        if *axis >= dim || *count == 0 {
            return Err(Error::param(
                "labeling",
                "slab axis out of range or zero slabs",
            ));
        }
    }
    let h = extent / n as f64;
    let coord = |i: usize| if i == n { extent } else { i as f64 * h };
    let mut vertices = Vec::new();
    let mut specs = Vec::new();
    match dim {
        2 => {
            let id = |i: usize, j: usize| j * (n + 1) + i;
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([coord(i), coord(j), 0.0]);
                }
            }
            for j in 0..n {
                for i in 0..n {
                    let c = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
                    for tri in [[c[0], c[1], c[2]], [c[0], c[2], c[3]]] {
                        specs.push(spec(&vertices, tri.to_vec(), labeling, extent, axon, 3));
                    }
                }
            }
        }
        3 => {
            let id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
            for k in 0..=n {
                for j in 0..=n {
                    for i in 0..=n {
                        vertices.push([coord(i), coord(j), coord(k)]);
                    }
                }
            }
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        // Corner c has bits (x, y, z) = (c & 1, c >> 1 & 1, c >> 2 & 1).
                        let corner =
                            |c: usize| id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                        for tet in KUHN {
                            let ids = tet.iter().map(|&c| corner(c)).collect();
                            specs.push(spec(&vertices, ids, labeling, extent, axon, 4));
                        }
                    }
                }
            }
        }
        _ => return Err(Error::param("dim", format!("must be 2 or 3, got {dim}"))),
    }
    PolytopalMesh::new(dim, vertices, specs)
}

fn spec(
    vertices: &[Point],
    ids: Vec<usize>,
    labeling: &Labeling,
    extent: f64,
    axon: Point,
    k: usize,
) -> ElementSpec {
    let mut c = [0.0; 3];
    for &v in &ids {
        for a in 0..3 {
            c[a] += vertices[v][a] / k as f64;
        }
    }
    ElementSpec {
        region: labeling.label(c, extent),
        vertices: ids,
        axon,
        sub_tessellation: None,
    }
}
