//! Gauss rules on intervals and collapsed (Duffy) rules on simplices.

use crate::geometry::Point;

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Quadrature on a reference simplex: barycentric-free local coordinates
/// `xi` in the unit simplex `{xi_k >= 0, sum xi_k <= 1}` and weights summing
/// to the reference measure `1 / dim!`.
#[derive(Clone, Debug)]
pub struct ReferenceRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl ReferenceRule {
    /// Rule exact for polynomials of total degree `degree` on the unit simplex of
    /// dimension `dim` (0 = point, 1 = segment, 2 = triangle, 3 = tetrahedron).
    pub fn simplex(dim: usize, degree: usize) -> Self {
        match dim {
            0 => Self {
                dim,
                points: vec![[0.0; 3]],
                weights: vec![1.0],
            },
            1 => {
                let n = degree / 2 + 1;
                let (x, w) = gauss_legendre_unit(n);
                Self {
                    dim,
                    points: x.iter().map(|&u| [u, 0.0, 0.0]).collect(),
                    weights: w,
                }
            }
            2 => {
                // Jacobian (1 - u) adds one degree in u.
                let n = (degree + 2).div_ceil(2);
                let (x, w) = gauss_legendre_unit(n);
                let mut points = Vec::with_capacity(n * n);
                let mut weights = Vec::with_capacity(n * n);
                for (u, wu) in x.iter().zip(&w) {
                    for (v, wv) in x.iter().zip(&w) {
                        points.push([*u, v * (1.0 - u), 0.0]);
                        weights.push(wu * wv * (1.0 - u));
                    }
                }
                Self {
                    dim,
                    points,
                    weights,
                }
            }
            3 => {
                let n = (degree + 3).div_ceil(2);
                let (x, w) = gauss_legendre_unit(n);
                let mut points = Vec::with_capacity(n * n * n);
                let mut weights = Vec::with_capacity(n * n * n);
                for (u, wu) in x.iter().zip(&w) {
                    for (v, wv) in x.iter().zip(&w) {
                        for (s, ws) in x.iter().zip(&w) {
                            let y = v * (1.0 - u);
                            let z = s * (1.0 - u) * (1.0 - v);
                            points.push([*u, y, z]);
                            weights.push(wu * wv * ws * (1.0 - u) * (1.0 - u) * (1.0 - v));
                        }
                    }
                }
                Self {
                    dim,
                    points,
                    weights,
                }
            }
            _ => panic!("unsupported simplex dimension {dim}"),
        }
    }

    /// Maps the rule onto a physical simplex given by `dim + 1` vertices.
    /// `measure` is the physical measure of the simplex.
    pub fn map(&self, vertices: &[Point], measure: f64) -> Vec<(Point, f64)> {
        debug_assert_eq!(vertices.len(), self.dim + 1);
        let ref_measure = 1.0 / factorial(self.dim);
        let scale = measure / ref_measure;
        let v0 = vertices[0];
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| {
                let mut p = v0;
                for (k, xk) in xi.iter().take(self.dim).enumerate() {
                    let vk = vertices[k + 1];
                    for c in 0..3 {
                        p[c] += xk * (vk[c] - v0[c]);
                    }
                }
                (p, w * scale)
            })
            .collect()
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b z^c over the unit simplex of dimension 3:
    /// a! b! c! / (a + b + c + 3)!.
    fn monomial_integral(dim: usize, exps: [usize; 3]) -> f64 {
        let num: f64 = exps.iter().take(dim).map(|&e| factorial(e)).product();
        let total: usize = exps.iter().take(dim).sum();
        num / factorial(total + dim)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..8 {
            let (x, w) = gauss_legendre_unit(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn simplex_rules_are_exact_to_requested_degree() {
        for dim in 1..=3 {
            for degree in 0..=7 {
                let rule = ReferenceRule::simplex(dim, degree);
                for a in 0..=degree {
                    for b in 0..=(degree - a) {
                        for c in 0..=(degree - a - b) {
                            let exps =
                                [a, if dim > 1 { b } else { 0 }, if dim > 2 { c } else { 0 }];
                            let q: f64 = rule
                                .points
                                .iter()
                                .zip(&rule.weights)
                                .map(|(p, w)| {
                                    w * p[0].powi(exps[0] as i32)
                                        * p[1].powi(exps[1] as i32)
                                        * p[2].powi(exps[2] as i32)
                                })
                                .sum();
                            let exact = monomial_integral(dim, exps);
                            assert!(
                                (q - exact).abs() < 1e-14,
                                "dim={dim} degree={degree} exps={exps:?}: {q} vs {exact}"
                            );
                        }
                    }
                }
            }
        }
    }
}
