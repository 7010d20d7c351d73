use rayon::prelude::*;

use super::penalty::{face_penalty, PenaltySide};
use super::space::DgSpace;
use crate::error::{Error, Result};
use crate::geometry::{dot3, DiffusionModel, Point, PolytopalMesh};
use crate::quadrature::ReferenceRule;
use crate::sparse::{CsrMatrix, TripletBuilder};

fn mat_vec(d: &[[f64; 3]; 3], v: Point) -> Point {
    [
        d[0][0] * v[0] + d[0][1] * v[1] + d[0][2] * v[2],
        d[1][0] * v[0] + d[1][1] * v[1] + d[1][2] * v[2],
        d[2][0] * v[0] + d[2][1] * v[1] + d[2][2] * v[2],
    ]
}

/// Assembled interior-penalty DG operators for one mesh, diffusion model and
/// reaction rate: mass `M`, stiffness `A`, linear reaction `M_alpha = alpha M`.
#[derive(Clone, Debug)]
pub struct DgSystem<'m> {
    mesh: &'m PolytopalMesh,
    space: DgSpace,
    model: DiffusionModel,
    alpha: f64,
    eta0: f64,
    penalties: Vec<f64>,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    reaction: CsrMatrix,
}

struct FaceBlocks {
    left: usize,
    right: usize,
    /// Row-major `nb x nb` blocks indexed `[test side][trial side]`, sides 0 = left, 1 = right.
    blocks: [[Vec<f64>; 2]; 2],
}

impl<'m> DgSystem<'m> {
    /// Assembles `M`, `A` and `M_alpha`. `A` holds the volume diffusion term and
    /// the symmetric interior-penalty terms on internal faces; homogeneous
    /// Neumann conditions contribute nothing on boundary faces.
    pub fn assemble(
        mesh: &'m PolytopalMesh,
        space: DgSpace,
        model: DiffusionModel,
        alpha: f64,
        eta0: f64,
    ) -> Result<Self> {
        if space.num_elements() != mesh.elements().len() || space.dim() != mesh.dim() {
            return Err(Error::DimensionMismatch {
                expected: mesh.elements().len(),
                actual: space.num_elements(),
            });
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::param("alpha", format!("must be >= 0, got {alpha}")));
        }
        if !(eta0 > 0.0) {
            return Err(Error::param("eta0", format!("must be > 0, got {eta0}")));
        }
        let nb = space.local_dim();
        let n = space.ndofs();
        let elements = mesh.elements();

        let volume: Vec<(Vec<f64>, Vec<f64>)> = (0..elements.len())
            .into_par_iter()
            .map(|e| {
                let b = space.element(e);
                let d = model.tensor(elements[e].axon);
                let mut m = vec![0.0; nb * nb];
                let mut a = vec![0.0; nb * nb];
                for (q, w) in b.weights.iter().enumerate() {
                    let vals = &b.values[q * nb..(q + 1) * nb];
                    let grads = &b.grads[q * nb..(q + 1) * nb];
                    let dgrads: Vec<Point> = grads.iter().map(|g| mat_vec(&d, *g)).collect();
                    for i in 0..nb {
                        for j in 0..nb {
                            m[i * nb + j] += w * vals[i] * vals[j];
                            a[i * nb + j] += w * dot3(dgrads[j], grads[i]);
                        }
                    }
                }
                (m, a)
            })
            .collect();

        let face_rule = ReferenceRule::simplex(mesh.dim() - 1, space.quad_degree());
        let faces = mesh.internal_faces();
        let penalties = faces
            .iter()
            .map(|f| {
                let side = |e: usize| PenaltySide {
                    diameter: elements[e].diameter,
                    diffusivity: model.max_eigenvalue(elements[e].axon),
                };
                face_penalty(space.degree(), eta0, alpha, side(f.left), side(f.right))
            })
            .collect::<Result<Vec<f64>>>()?;

        let face_blocks: Vec<FaceBlocks> = faces
            .par_iter()
            .zip(penalties.par_iter())
            .map(|(f, &eta)| {
                let owners = [f.left, f.right];
                let sign = [1.0, -1.0];
                let tensors = [
                    model.tensor(elements[f.left].axon),
                    model.tensor(elements[f.right].axon),
                ];
                let mut blocks: [[Vec<f64>; 2]; 2] = Default::default();
                for row in blocks.iter_mut() {
                    for b in row.iter_mut() {
                        *b = vec![0.0; nb * nb];
                    }
                }
                for piece in &f.pieces {
                    let n = piece.normal;
                    for (x, w) in face_rule.map(&piece.vertices, piece.measure) {
                        let mut vals = [Vec::new(), Vec::new()];
                        let mut flux = [Vec::new(), Vec::new()];
                        for s in 0..2 {
                            let (v, g) = space.eval_with_grad(owners[s], x);
                            flux[s] = g
                                .iter()
                                .map(|gi| dot3(mat_vec(&tensors[s], *gi), n))
                                .collect();
                            vals[s] = v;
                        }
                        for tb in 0..2 {
                            for tr in 0..2 {
                                let blk = &mut blocks[tb][tr];
                                let s = sign[tb] * sign[tr];
                                for i in 0..nb {
                                    let vi = vals[tb][i];
                                    let fi = flux[tb][i];
                                    for j in 0..nb {
                                        let uj = vals[tr][j];
                                        let fj = flux[tr][j];
                                        blk[i * nb + j] += w
                                            * (eta * s * uj * vi
                                                - 0.5 * fj * sign[tb] * vi
                                                - 0.5 * fi * sign[tr] * uj);
                                    }
                                }
                            }
                        }
                    }
                }
                FaceBlocks {
                    left: f.left,
                    right: f.right,
                    blocks,
                }
            })
            .collect();

        let mut mb = TripletBuilder::with_capacity(n, n, elements.len() * nb * nb);
        let mut ab =
            TripletBuilder::with_capacity(n, n, (elements.len() + 4 * faces.len()) * nb * nb);
        for (e, (m, a)) in volume.iter().enumerate() {
            mb.push_block(space.dofs(e), space.dofs(e), m);
            ab.push_block(space.dofs(e), space.dofs(e), a);
        }
        for fb in &face_blocks {
            let owners = [fb.left, fb.right];
            for tb in 0..2 {
                for tr in 0..2 {
                    ab.push_block(
                        space.dofs(owners[tb]),
                        space.dofs(owners[tr]),
                        &fb.blocks[tb][tr],
                    );
                }
            }
        }
        let mass = mb.build();
        let stiffness = ab.build();
        let reaction = mass.scaled(alpha);
        Ok(Self {
            mesh,
            space,
            model,
            alpha,
            eta0,
            penalties,
            mass,
            stiffness,
            reaction,
        })
    }

    pub fn mesh(&self) -> &'m PolytopalMesh {
        self.mesh
    }

    pub fn space(&self) -> &DgSpace {
        &self.space
    }

    pub fn model(&self) -> DiffusionModel {
        self.model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    /// Penalty per internal face, in the order of `mesh.internal_faces()`.
    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn linear_reaction(&self) -> &CsrMatrix {
        &self.reaction
    }

    pub fn ndofs(&self) -> usize {
        self.space.ndofs()
    }

    /// `[M~_alpha(C)]_ij = (alpha c_h phi_j, phi_i)`; block diagonal and linear in `C`.
    pub fn nonlinear_reaction(&self, coeffs: &[f64]) -> Result<CsrMatrix> {
        let n = self.ndofs();
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: coeffs.len(),
            });
        }
        let nb = self.space.local_dim();
        let alpha = self.alpha;
        let blocks: Vec<Vec<f64>> = (0..self.space.num_elements())
            .into_par_iter()
            .map(|e| {
                let b = self.space.element(e);
                let c = &coeffs[e * nb..(e + 1) * nb];
                let mut blk = vec![0.0; nb * nb];
                for (q, w) in b.weights.iter().enumerate() {
                    let vals = &b.values[q * nb..(q + 1) * nb];
                    let ch: f64 = c.iter().zip(vals).map(|(ci, vi)| ci * vi).sum();
                    let s = w * alpha * ch;
                    for i in 0..nb {
                        for j in 0..nb {
                            blk[i * nb + j] += s * vals[i] * vals[j];
                        }
                    }
                }
                blk
            })
            .collect();
        let mut tb = TripletBuilder::with_capacity(n, n, blocks.len() * nb * nb);
        for (e, blk) in blocks.iter().enumerate() {
            tb.push_block(self.space.dofs(e), self.space.dofs(e), blk);
        }
        Ok(tb.build())
    }

    /// Coefficients of the constant function `value`.
    pub fn constant(&self, value: f64) -> Vec<f64> {
        self.space.project_piecewise_constant(|_| value)
    }
}
