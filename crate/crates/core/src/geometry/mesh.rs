use std::collections::HashMap;

use super::{cross, dot3, norm3, sub, Point, RegionId};
use crate::error::{Error, Result};

/// A simplex of the sub-tessellation (or a face piece): `dim + 1` vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    pub vertices: Vec<Point>,
}

impl Simplex {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    /// Measure of the simplex in its own dimension (length, area or volume).
    pub fn measure(&self) -> f64 {
        simplex_measure(&self.vertices)
    }
}

pub(crate) fn simplex_measure(v: &[Point]) -> f64 {
    match v.len() {
        1 => 1.0,
        2 => norm3(sub(v[1], v[0])),
        3 => 0.5 * norm3(cross(sub(v[1], v[0]), sub(v[2], v[0]))),
        4 => dot3(sub(v[1], v[0]), cross(sub(v[2], v[0]), sub(v[3], v[0]))).abs() / 6.0,
        n => panic!("simplex with {n} vertices"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    fn of<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in points {
            for c in 0..3 {
                min[c] = min[c].min(p[c]);
                max[c] = max[c].max(p[c]);
            }
        }
        Self { min, max }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        (0..3).all(|c| p[c] >= self.min[c] - tol && p[c] <= self.max[c] + tol)
    }

    pub fn center(&self) -> Point {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn half_widths(&self) -> Point {
        [
            0.5 * (self.max[0] - self.min[0]),
            0.5 * (self.max[1] - self.min[1]),
            0.5 * (self.max[2] - self.min[2]),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub vertices: Vec<usize>,
    pub bbox: BoundingBox,
    pub sub_tessellation: Vec<Simplex>,
    /// Largest vertex-to-vertex distance, mm.
    pub diameter: f64,
    /// Unit axonal direction.
    pub axon: Point,
    pub region: RegionId,
    pub measure: f64,
    /// Whether the sub-tessellation was given explicitly (polytopal element).
    pub explicit_sub_tessellation: bool,
}

impl Element {
    pub fn centroid(&self) -> Point {
        let mut c = [0.0; 3];
        for s in &self.sub_tessellation {
            let m = s.measure();
            let k = s.vertices.len() as f64;
            for v in &s.vertices {
                for i in 0..3 {
                    c[i] += m * v[i] / k;
                }
            }
        }
        c.map(|x| x / self.measure)
    }
}

/// Planar piece of a face with its unit normal.
#[derive(Clone, Debug, PartialEq)]
pub struct FacePiece {
    pub vertices: Vec<Point>,
    pub normal: Point,
    pub measure: f64,
}

/// Face between `left` and `right`; normals point out of `left`.
#[derive(Clone, Debug, PartialEq)]
pub struct InternalFace {
    pub left: usize,
    pub right: usize,
    pub pieces: Vec<FacePiece>,
}

/// Face on the domain boundary; normals point out of the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub element: usize,
    pub pieces: Vec<FacePiece>,
}

/// Input description of one element before topology reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementSpec {
    pub vertices: Vec<usize>,
    pub region: RegionId,
    pub axon: Point,
    /// `None` means the element is itself a simplex.
    pub sub_tessellation: Option<Vec<Vec<Point>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolytopalMesh {
    dim: usize,
    vertices: Vec<Point>,
    elements: Vec<Element>,
    internal_faces: Vec<InternalFace>,
    boundary_faces: Vec<BoundaryFace>,
}

type FacetKey = Vec<[u64; 3]>;

fn point_key(p: &Point) -> [u64; 3] {
    // -0.0 and 0.0 must coincide.
    p.map(|x| if x == 0.0 { 0u64 } else { x.to_bits() })
}

fn facet_normal(facet: &[Point], opposite: Point) -> Point {
    let n = match facet.len() {
        2 => {
            let t = sub(facet[1], facet[0]);
            [t[1], -t[0], 0.0]
        }
        3 => cross(sub(facet[1], facet[0]), sub(facet[2], facet[0])),
        k => panic!("facet with {k} vertices"),
    };
    let len = norm3(n);
    let mut n = n.map(|x| x / len);
    if dot3(n, sub(opposite, facet[0])) > 0.0 {
        n = n.map(|x| -x);
    }
    n
}

fn parallel(a: Point, b: Point) -> bool {
    dot3(a, b) > 1.0 - 1e-12
}

impl PolytopalMesh {
    /// Builds the mesh and reconstructs face connectivity from the element
    /// sub-tessellations: a facet seen once is on the boundary, twice within one
    /// element is interior to it, once in each of two elements is an internal face.
    pub fn new(dim: usize, vertices: Vec<Point>, specs: Vec<ElementSpec>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::param("dim", format!("must be 2 or 3, got {dim}")));
        }
        if dim == 2 && vertices.iter().any(|v| v[2] != 0.0) {
            return Err(Error::Geometry(
                "planar mesh with non-zero z coordinate".into(),
            ));
        }
        let mut elements = Vec::with_capacity(specs.len());
        for (e, spec) in specs.into_iter().enumerate() {
            elements.push(build_element(e, dim, &vertices, spec)?);
        }

        struct Occurrence {
            element: usize,
            opposite: Point,
        }
        let mut facets: HashMap<FacetKey, (Vec<Point>, Vec<Occurrence>)> = HashMap::new();
        let mut order: Vec<FacetKey> = Vec::new();
        for (e, el) in elements.iter().enumerate() {
            for s in &el.sub_tessellation {
                for skip in 0..s.vertices.len() {
                    let facet: Vec<Point> = s
                        .vertices
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != skip)
                        .map(|(_, p)| *p)
                        .collect();
                    let mut key: FacetKey = facet.iter().map(point_key).collect();
                    key.sort_unstable();
                    let entry = facets.entry(key.clone()).or_insert_with(|| {
                        order.push(key);
                        (facet, Vec::new())
                    });
                    entry.1.push(Occurrence {
                        element: e,
                        opposite: s.vertices[skip],
                    });
                }
            }
        }

        let mut internal_faces: Vec<InternalFace> = Vec::new();
        let mut boundary_faces: Vec<BoundaryFace> = Vec::new();
        let mut internal_index: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut boundary_index: HashMap<usize, Vec<usize>> = HashMap::new();
        for key in &order {
            let (facet, occ) = &facets[key];
            match occ.len() {
                1 => {
                    let o = &occ[0];
                    let piece = FacePiece {
                        normal: facet_normal(facet, o.opposite),
                        measure: simplex_measure(facet),
                        vertices: facet.clone(),
                    };
                    let slots = boundary_index.entry(o.element).or_default();
                    match slots
                        .iter()
                        .find(|&&f| parallel(boundary_faces[f].pieces[0].normal, piece.normal))
                    {
                        Some(&f) => boundary_faces[f].pieces.push(piece),
                        None => {
                            slots.push(boundary_faces.len());
                            boundary_faces.push(BoundaryFace {
                                element: o.element,
                                pieces: vec![piece],
                            });
                        }
                    }
                }
                2 if occ[0].element == occ[1].element => {}
                2 => {
                    let (l, r) = if occ[0].element < occ[1].element {
                        (&occ[0], &occ[1])
                    } else {
                        (&occ[1], &occ[0])
                    };
                    let piece = FacePiece {
                        normal: facet_normal(facet, l.opposite),
                        measure: simplex_measure(facet),
                        vertices: facet.clone(),
                    };
                    let slots = internal_index.entry((l.element, r.element)).or_default();
                    match slots
                        .iter()
                        .find(|&&f| parallel(internal_faces[f].pieces[0].normal, piece.normal))
                    {
                        Some(&f) => internal_faces[f].pieces.push(piece),
                        None => {
                            slots.push(internal_faces.len());
                            internal_faces.push(InternalFace {
                                left: l.element,
                                right: r.element,
                                pieces: vec![piece],
                            });
                        }
                    }
                }
                n => {
                    let owners: Vec<String> = occ.iter().map(|o| o.element.to_string()).collect();
                    return Err(Error::Topology(format!(
                        "face shared {n} times (elements {})",
                        owners.join(", ")
                    )));
                }
            }
        }

        Ok(Self {
            dim,
            vertices,
            elements,
            internal_faces,
            boundary_faces,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn internal_faces(&self) -> &[InternalFace] {
        &self.internal_faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    /// |Omega| from the element sub-tessellations.
    pub fn measure(&self) -> f64 {
        self.elements
            .iter()
            .flat_map(|e| e.sub_tessellation.iter())
            .map(Simplex::measure)
            .sum()
    }

    /// Sorted distinct region labels.
    pub fn region_ids(&self) -> Vec<RegionId> {
        let mut ids: Vec<RegionId> = self.elements.iter().map(|e| e.region).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Sum of element measures per region label.
    pub fn region_measures(&self) -> std::collections::BTreeMap<RegionId, f64> {
        let mut out = std::collections::BTreeMap::new();
        for e in &self.elements {
            *out.entry(e.region).or_insert(0.0) += e.measure;
        }
        out
    }
}

fn build_element(
    index: usize,
    dim: usize,
    vertices: &[Point],
    spec: ElementSpec,
) -> Result<Element> {
    let ElementSpec {
        vertices: ids,
        region,
        axon,
        sub_tessellation,
    } = spec;
    for &v in &ids {
        if v >= vertices.len() {
            return Err(Error::Geometry(format!(
                "element {index} references vertex {v} of {}",
                vertices.len()
            )));
        }
    }
    let coords: Vec<Point> = ids.iter().map(|&v| vertices[v]).collect();
    let explicit = sub_tessellation.is_some();
    let simplices: Vec<Simplex> = match sub_tessellation {
        Some(s) => s.into_iter().map(Simplex::new).collect(),
        None => {
            if ids.len() != dim + 1 {
                return Err(Error::Geometry(format!(
                    "element {index} has {} vertices and no sub-tessellation",
                    ids.len()
                )));
            }
            vec![Simplex::new(coords.clone())]
        }
    };
    if simplices.is_empty() {
        return Err(Error::Geometry(format!(
            "element {index} has an empty sub-tessellation"
        )));
    }
    let bbox = BoundingBox::of(coords.iter());
    let scale = (0..3)
        .map(|c| bbox.max[c] - bbox.min[c])
        .fold(0.0f64, f64::max);
    let mut measure = 0.0;
    for s in &simplices {
        if s.vertices.len() != dim + 1 {
            return Err(Error::Geometry(format!(
                "element {index}: sub-simplex with {} vertices in {dim}D",
                s.vertices.len()
            )));
        }
        if let Some(p) = s
            .vertices
            .iter()
            .find(|p| !bbox.contains(**p, 1e-12 * scale.max(1.0)))
        {
            return Err(Error::Geometry(format!(
                "element {index}: sub-tessellation point {p:?} outside the element"
            )));
        }
        let m = s.measure();
        if !(m > 0.0) {
            return Err(Error::Geometry(format!(
                "element {index}: degenerate sub-simplex"
            )));
        }
        measure += m;
    }
    let mut diameter: f64 = 0.0;
    let pts: Vec<Point> = coords
        .iter()
        .copied()
        .chain(simplices.iter().flat_map(|s| s.vertices.iter().copied()))
        .collect();
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            diameter = diameter.max(norm3(sub(*a, *b)));
        }
    }
    if !(diameter > 0.0) {
        return Err(Error::Geometry(format!(
            "element {index} has zero diameter"
        )));
    }
    let len = norm3(axon);
    if (len - 1.0).abs() > 1e-12 {
        if (0.9..=1.1).contains(&len) {
            log::warn!("element {index}: axonal direction has norm {len}, normalizing");
        } else {
            return Err(Error::Geometry(format!(
                "element {index}: axonal direction norm {len} outside [0.9, 1.1]"
            )));
        }
    }
    let axon = axon.map(|x| x / len);
    Ok(Element {
        vertices: ids,
        bbox,
        sub_tessellation: simplices,
        diameter,
        axon,
        region,
        measure,
        explicit_sub_tessellation: explicit,
    })
}
