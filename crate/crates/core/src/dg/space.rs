use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, PolytopalMesh};
use crate::quadrature::ReferenceRule;

/// Number of monomials of total degree `<= degree` in `dim` variables, `C(degree + dim, dim)`.
pub fn basis_dimension(dim: usize, degree: usize) -> usize {
    (1..=dim).fold(1, |acc, k| acc * (degree + k) / k)
}

/// Exponents of the monomials of total degree `<= degree`, graded so the
/// constant comes first.
fn monomial_exponents(dim: usize, degree: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        match dim {
            2 => {
                for a in (0..=total).rev() {
                    out.push([a, total - a, 0]);
                }
            }
            3 => {
                for a in (0..=total).rev() {
                    for b in (0..=(total - a)).rev() {
                        out.push([a, b, total - a - b]);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Basis data of one element: the orthonormalized monomials plus values and
/// gradients cached at the element's volume quadrature points.
#[derive(Clone, Debug)]
pub struct ElementBasis {
    center: Point,
    inv_half: Point,
    /// Row-major `nb x nb`: `phi_i = sum_j coeffs[i][j] m_j`.
    coeffs: Vec<f64>,
    pub(crate) points: Vec<Point>,
    pub(crate) weights: Vec<f64>,
    /// Row-major `nq x nb`.
    pub(crate) values: Vec<f64>,
    pub(crate) grads: Vec<Point>,
}

/// Discontinuous piecewise-polynomial space of degree `degree` on a polytopal
/// mesh. Each element carries monomials scaled to its bounding box,
/// orthonormalized in `L2(K)`, so every element mass block is the identity.
#[derive(Clone, Debug)]
pub struct DgSpace {
    dim: usize,
    degree: usize,
    quad_degree: usize,
    exponents: Vec<[u32; 3]>,
    elements: Vec<ElementBasis>,
}

impl DgSpace {
    /// Space with the default quadrature exactness `3 * degree`, enough to
    /// integrate the nonlinear reaction term exactly.
    pub fn new(mesh: &PolytopalMesh, degree: usize) -> Result<Self> {
        Self::with_quadrature(mesh, degree, 3 * degree)
    }

    pub fn with_quadrature(
        mesh: &PolytopalMesh,
        degree: usize,
        quad_degree: usize,
    ) -> Result<Self> {
        if degree < 1 {
            return Err(Error::param("ell", "polynomial degree must be >= 1"));
        }
        if quad_degree < 2 * degree {
            return Err(Error::param(
                "quad_degree",
                format!(
                    "quadrature exactness {quad_degree} < 2 * ell = {}",
                    2 * degree
                ),
            ));
        }
        let dim = mesh.dim();
        let exponents = monomial_exponents(dim, degree);
        let rule = ReferenceRule::simplex(dim, quad_degree);
        let elements = mesh
            .elements()
            .par_iter()
            .enumerate()
            .map(|(e, el)| {
                let center = el.bbox.center();
                let half = el.bbox.half_widths();
                let mut inv_half = [0.0; 3];
                for c in 0..dim {
                    if !(half[c] > 0.0) {
                        return Err(Error::Geometry(format!(
                            "element {e} is flat along axis {c}"
                        )));
                    }
                    inv_half[c] = 1.0 / half[c];
                }
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for s in &el.sub_tessellation {
                    for (p, w) in rule.map(&s.vertices, s.measure()) {
                        points.push(p);
                        weights.push(w);
                    }
                }
                let mut basis = ElementBasis {
                    center,
                    inv_half,
                    coeffs: identity(exponents.len()),
                    points,
                    weights,
                    values: Vec::new(),
                    grads: Vec::new(),
                };
                // Two Cholesky-based Gram-Schmidt passes.
                for _ in 0..2 {
                    orthonormalize(&mut basis, &exponents, dim).map_err(|_| {
                        Error::Geometry(format!("element {e}: singular monomial Gram matrix"))
                    })?;
                }
                cache_values(&mut basis, &exponents, dim);
                Ok(basis)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            degree,
            quad_degree,
            exponents,
            elements,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn quad_degree(&self) -> usize {
        self.quad_degree
    }

    /// Basis functions per element.
    pub fn local_dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Total number of degrees of freedom N.
    pub fn ndofs(&self) -> usize {
        self.elements.len() * self.local_dim()
    }

    /// Global dof range of element `e`.
    pub fn dofs(&self, e: usize) -> std::ops::Range<usize> {
        let nb = self.local_dim();
        e * nb..(e + 1) * nb
    }

    pub(crate) fn element(&self, e: usize) -> &ElementBasis {
        &self.elements[e]
    }

    /// Values of the basis of element `e` at physical point `x`.
    pub fn eval(&self, e: usize, x: Point) -> Vec<f64> {
        let b = &self.elements[e];
        let m = monomials(b, &self.exponents, x, self.dim);
        apply(&b.coeffs, &m, self.local_dim())
    }

    /// Values and gradients of the basis of element `e` at `x`.
    pub fn eval_with_grad(&self, e: usize, x: Point) -> (Vec<f64>, Vec<Point>) {
        let b = &self.elements[e];
        let nb = self.local_dim();
        let (m, dm) = monomials_with_grad(b, &self.exponents, x, self.dim);
        let vals = apply(&b.coeffs, &m, nb);
        let mut grads = vec![[0.0; 3]; nb];
        for i in 0..nb {
            for j in 0..=i {
                let c = b.coeffs[i * nb + j];
                for k in 0..3 {
                    grads[i][k] += c * dm[j][k];
                }
            }
        }
        (vals, grads)
    }

    /// `c_h(x)` for `x` in element `e`.
    pub fn evaluate(&self, coeffs: &[f64], e: usize, x: Point) -> f64 {
        let vals = self.eval(e, x);
        vals.iter()
            .zip(&coeffs[self.dofs(e)])
            .map(|(v, c)| v * c)
            .sum()
    }

    /// `L2` projection of `f` element by element. The basis is orthonormal, so
    /// the coefficients are the moments `(f, phi_i)_K`.
    pub fn project(&self, f: impl Fn(Point) -> f64 + Sync) -> Vec<f64> {
        let nb = self.local_dim();
        let mut out = vec![0.0; self.ndofs()];
        out.par_chunks_mut(nb)
            .zip(self.elements.par_iter())
            .for_each(|(chunk, b)| {
                for (q, (p, w)) in b.points.iter().zip(&b.weights).enumerate() {
                    let fv = f(*p) * w;
                    for i in 0..nb {
                        chunk[i] += fv * b.values[q * nb + i];
                    }
                }
            });
        out
    }

    /// Projection of a per-element constant.
    pub fn project_piecewise_constant(&self, value: impl Fn(usize) -> f64) -> Vec<f64> {
        let nb = self.local_dim();
        let integrals = self.integrals();
        let mut out = vec![0.0; self.ndofs()];
        for e in 0..self.num_elements() {
            let v = value(e);
            for i in 0..nb {
                out[e * nb + i] = v * integrals[e * nb + i];
            }
        }
        out
    }

    /// `int_K phi_i` for every global basis function.
    pub fn integrals(&self) -> Vec<f64> {
        let nb = self.local_dim();
        let mut out = vec![0.0; self.ndofs()];
        for (e, b) in self.elements.iter().enumerate() {
            for (q, w) in b.weights.iter().enumerate() {
                for i in 0..nb {
                    out[e * nb + i] += w * b.values[q * nb + i];
                }
            }
        }
        out
    }

    /// `|| c_h - f ||_{L2(Omega)}` by element quadrature.
    pub fn l2_error(&self, coeffs: &[f64], f: impl Fn(Point) -> f64 + Sync) -> f64 {
        let nb = self.local_dim();
        self.elements
            .par_iter()
            .enumerate()
            .map(|(e, b)| {
                let c = &coeffs[e * nb..(e + 1) * nb];
                b.points
                    .iter()
                    .zip(&b.weights)
                    .enumerate()
                    .map(|(q, (p, w))| {
                        let ch: f64 = (0..nb).map(|i| c[i] * b.values[q * nb + i]).sum();
                        let d = ch - f(*p);
                        w * d * d
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn apply(coeffs: &[f64], m: &[f64], nb: usize) -> Vec<f64> {
    (0..nb)
        .map(|i| (0..=i).map(|j| coeffs[i * nb + j] * m[j]).sum())
        .collect()
}

fn monomials(b: &ElementBasis, exps: &[[u32; 3]], x: Point, dim: usize) -> Vec<f64> {
    let mut xi = [0.0; 3];
    for c in 0..dim {
        xi[c] = (x[c] - b.center[c]) * b.inv_half[c];
    }
    exps.iter()
        .map(|e| (0..dim).map(|c| xi[c].powi(e[c] as i32)).product())
        .collect()
}

fn monomials_with_grad(
    b: &ElementBasis,
    exps: &[[u32; 3]],
    x: Point,
    dim: usize,
) -> (Vec<f64>, Vec<Point>) {
    let mut xi = [0.0; 3];
    for c in 0..dim {
        xi[c] = (x[c] - b.center[c]) * b.inv_half[c];
    }
    let mut vals = Vec::with_capacity(exps.len());
    let mut grads = Vec::with_capacity(exps.len());
    for e in exps {
        let pows: Vec<f64> = (0..dim).map(|c| xi[c].powi(e[c] as i32)).collect();
        vals.push(pows.iter().product());
        let mut g = [0.0; 3];
        for c in 0..dim {
            if e[c] == 0 {
                continue;
            }
            let mut d = e[c] as f64 * xi[c].powi(e[c] as i32 - 1) * b.inv_half[c];
            for k in 0..dim {
                if k != c {
                    d *= pows[k];
                }
            }
            g[c] = d;
        }
        grads.push(g);
    }
    (vals, grads)
}

/// Replaces `coeffs` by `L^{-1} coeffs` where `L L^T` is the Gram matrix of the
/// current basis; the result is orthonormal in `L2(K)`.
fn orthonormalize(
    b: &mut ElementBasis,
    exps: &[[u32; 3]],
    dim: usize,
) -> std::result::Result<(), ()> {
    let nb = exps.len();
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    for (p, w) in b.points.iter().zip(&b.weights) {
        let m = monomials(b, exps, *p, dim);
        let phi = apply(&b.coeffs, &m, nb);
        for i in 0..nb {
            for j in 0..=i {
                gram[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    for i in 0..nb {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    let chol = gram.cholesky().ok_or(())?;
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(nb, nb))
        .ok_or(())?;
    let old = DMatrix::from_row_slice(nb, nb, &b.coeffs);
    let new = linv * old;
    for i in 0..nb {
        for j in 0..nb {
            b.coeffs[i * nb + j] = if j <= i { new[(i, j)] } else { 0.0 };
        }
    }
    Ok(())
}

fn cache_values(b: &mut ElementBasis, exps: &[[u32; 3]], dim: usize) {
    let nb = exps.len();
    let mut values = Vec::with_capacity(b.points.len() * nb);
    let mut grads = Vec::with_capacity(b.points.len() * nb);
    for p in &b.points {
        let (m, dm) = monomials_with_grad(b, exps, *p, dim);
        for i in 0..nb {
            let mut v = 0.0;
            let mut g = [0.0; 3];
            for j in 0..=i {
                let c = b.coeffs[i * nb + j];
                v += c * m[j];
                for k in 0..3 {
                    g[k] += c * dm[j][k];
                }
            }
            values.push(v);
            grads.push(g);
        }
    }
    b.values = values;
    b.grads = grads;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_structured_mesh, Labeling};

    const X: Point = [1.0, 0.0, 0.0];

    #[test]
    fn basis_dimension_matches_binomial() {
        assert_eq!(basis_dimension(2, 2), 6);
        assert_eq!(basis_dimension(3, 1), 4);
        assert_eq!(basis_dimension(3, 2), 10);
        assert_eq!(basis_dimension(2, 3), 10);
        for d in 2..=3 {
            for l in 1..=4 {
                assert_eq!(monomial_exponents(d, l).len(), basis_dimension(d, l));
            }
        }
    }

    #[test]
    fn dof_counts() {
        let m2 = generate_structured_mesh(2, 1, 1.0, &Labeling::Uniform(1), X).unwrap();
        assert_eq!(DgSpace::new(&m2, 2).unwrap().ndofs(), 12);
        let m3 = generate_structured_mesh(3, 2, 1.0, &Labeling::Uniform(1), X).unwrap();
        assert_eq!(DgSpace::new(&m3, 2).unwrap().ndofs(), 480);
        let tet = crate::geometry::PolytopalMesh::new(
            3,
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![crate::geometry::ElementSpec {
                vertices: vec![0, 1, 2, 3],
                region: 1,
                axon: X,
                sub_tessellation: None,
            }],
        )
        .unwrap();
        assert_eq!(DgSpace::new(&tet, 1).unwrap().ndofs(), 4);
    }

    #[test]
    fn element_mass_blocks_are_identity() {
        let m = generate_structured_mesh(3, 1, 2.0, &Labeling::Uniform(1), X).unwrap();
        let space = DgSpace::new(&m, 3).unwrap();
        let nb = space.local_dim();
        for e in 0..space.num_elements() {
            let b = space.element(e);
            for i in 0..nb {
                for j in 0..nb {
                    let mij: f64 = b
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * b.values[q * nb + i] * b.values[q * nb + j])
                        .sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((mij - expect).abs() < 1e-10, "e={e} ({i},{j}) = {mij}");
                }
            }
        }
    }

    #[test]
    fn cached_gradients_match_pointwise_evaluation() {
        let m = generate_structured_mesh(2, 2, 3.0, &Labeling::Uniform(1), X).unwrap();
        let space = DgSpace::new(&m, 2).unwrap();
        let nb = space.local_dim();
        let b = space.element(3);
        let (v, g) = space.eval_with_grad(3, b.points[2]);
        for i in 0..nb {
            assert!((v[i] - b.values[2 * nb + i]).abs() < 1e-12);
            for k in 0..3 {
                assert!((g[i][k] - b.grads[2 * nb + i][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let m = generate_structured_mesh(2, 3, 1.0, &Labeling::Uniform(1), X).unwrap();
        let space = DgSpace::new(&m, 2).unwrap();
        let f = |p: Point| 1.0 + 2.0 * p[0] - p[0] * p[1] + 0.5 * p[1] * p[1];
        let c = space.project(f);
        assert!(space.l2_error(&c, f) < 1e-13);
        assert!((space.evaluate(&c, 4, [0.4, 0.5, 0.0]) - f([0.4, 0.5, 0.0])).abs() < 1e-12);
    }

    #[test]
    fn rejects_low_quadrature() {
        let m = generate_structured_mesh(2, 1, 1.0, &Labeling::Uniform(1), X).unwrap();
        assert!(DgSpace::with_quadrature(&m, 2, 3).is_err());
        assert!(DgSpace::new(&m, 0).is_err());
    }
}
