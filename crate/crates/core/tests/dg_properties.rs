use std::sync::Arc;

use fkneuro_core::dg::{DgSpace, DgSystem, SemiImplicitEuler};
use fkneuro_core::geometry::{
    generate_structured_mesh, DiffusionModel, ElementSpec, Labeling, PolytopalMesh,
};
use fkneuro_core::linsolve::{PcgLaggedLu, SolverOptions};
use fkneuro_core::scheme::RegionAverager;
use fkneuro_core::sparse::CsrMatrix;
use fkneuro_core::staging::crossing_time;

const AXON: [f64; 3] = [0.6, 0.8, 0.0];

fn logistic(c0: f64, alpha: f64, t: f64) -> f64 {
    let e = (alpha * t).exp();
    c0 * e / (1.0 - c0 + c0 * e)
}

/// Deterministic pseudo-random offset in [-1, 1].
fn wiggle(i: usize, k: usize) -> f64 {
    ((i * 7919 + k * 104729) as f64 * 0.618_034).sin()
}

/// Structured mesh with interior vertices moved by up to `amount * h`.
fn jittered(dim: usize, n: usize, amount: f64) -> PolytopalMesh {
    let axon = if dim == 3 { [0.48, 0.6, 0.64] } else { AXON };
    let base = generate_structured_mesh(dim, n, 1.0, &Labeling::Uniform(1), axon).unwrap();
    let h = 1.0 / n as f64;
    let vertices: Vec<[f64; 3]> = base
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut p = *v;
            for k in 0..dim {
                if v[k] > 0.0 && v[k] < 1.0 {
                    p[k] += amount * h * wiggle(i, k);
                }
            }
            p
        })
        .collect();
    let specs = base
        .elements()
        .iter()
        .map(|e| ElementSpec {
            vertices: e.vertices.clone(),
            region: e.region,
            axon: e.axon,
            sub_tessellation: None,
        })
        .collect();
    PolytopalMesh::new(dim, vertices, specs).unwrap()
}

/// Square split into `n x n` quadrilateral elements, each given by its two triangles.
fn quad_mesh(n: usize) -> PolytopalMesh {
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h, 0.0]);
        }
    }
    let mut specs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let c = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
            let p = c.map(|v| vertices[v]);
            specs.push(ElementSpec {
                vertices: c.to_vec(),
                region: 1,
                axon: AXON,
                sub_tessellation: Some(vec![vec![p[0], p[1], p[2]], vec![p[0], p[2], p[3]]]),
            });
        }
    }
    PolytopalMesh::new(2, vertices, specs).unwrap()
}

fn assemble(mesh: &PolytopalMesh, degree: usize, alpha: f64) -> DgSystem<'_> {
    let space = DgSpace::new(mesh, degree).unwrap();
    DgSystem::assemble(mesh, space, DiffusionModel::default(), alpha, 10.0).unwrap()
}

fn rel_asymmetry(m: &CsrMatrix) -> f64 {
    m.asymmetry() / m.max_abs()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_structure(sys: &DgSystem<'_>) {
    assert!(rel_asymmetry(sys.mass()) <= 1e-12);
    assert!(rel_asymmetry(sys.stiffness()) <= 1e-12);
    let ones = sys.constant(1.0);
    let a1 = sys.stiffness().mul_vec(&ones);
    assert!(
        norm(&a1) <= 1e-10 * sys.stiffness().norm(),
        "|A 1| = {}",
        norm(&a1)
    );
}

#[test]
fn matrices_are_symmetric_with_constant_kernel_on_jittered_meshes() {
    for (dim, n, degree) in [(2, 5, 1), (2, 4, 2), (3, 2, 1), (3, 2, 2)] {
        let mesh = jittered(dim, n, 0.2);
        check_structure(&assemble(&mesh, degree, 0.61));
    }
}

#[test]
fn polytopal_elements_keep_the_structure() {
    let mesh = quad_mesh(4);
    assert!(mesh.elements().iter().all(|e| e.explicit_sub_tessellation));
    let sys = assemble(&mesh, 2, 0.61);
    check_structure(&sys);
    assert!((mesh.measure() - 1.0).abs() < 1e-12);
}

#[test]
fn nonlinear_reaction_is_linear_and_reduces_to_linear_reaction() {
    let mesh = jittered(2, 3, 0.2);
    let sys = assemble(&mesh, 2, 0.61);
    let diff = |a: &CsrMatrix, b: &CsrMatrix| {
        CsrMatrix::linear_combination(&[(1.0, a), (-1.0, b)])
            .unwrap()
            .max_abs()
    };
    let one = sys.nonlinear_reaction(&sys.constant(1.0)).unwrap();
    assert!(diff(&one, sys.linear_reaction()) <= 1e-10);
    let half = sys.nonlinear_reaction(&sys.constant(0.5)).unwrap();
    assert!(diff(&half, &sys.linear_reaction().scaled(0.5)) <= 1e-10);
    let c1 = sys.space().project(|x| x[0] * x[1]);
    let c2 = sys.space().project(|x| 1.0 - x[0]);
    let mix: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let lhs = sys.nonlinear_reaction(&mix).unwrap();
    let rhs = CsrMatrix::linear_combination(&[
        (2.0, &sys.nonlinear_reaction(&c1).unwrap()),
        (-0.5, &sys.nonlinear_reaction(&c2).unwrap()),
    ])
    .unwrap();
    assert!(diff(&lhs, &rhs) <= 1e-12 * rhs.max_abs());
    assert!(rel_asymmetry(&lhs) <= 1e-12);
    assert_eq!(
        sys.nonlinear_reaction(&sys.constant(0.0))
            .unwrap()
            .max_abs(),
        0.0
    );
}

fn mean_curve(
    mesh: &PolytopalMesh,
    alpha: f64,
    dt: f64,
    t_final: f64,
    c0: f64,
) -> (Vec<f64>, Vec<f64>) {
    let sys = assemble(mesh, 1, alpha);
    let averager = RegionAverager::for_space(mesh, sys.space());
    let stepper = SemiImplicitEuler::new(
        &sys,
        dt,
        Arc::new(PcgLaggedLu::default()),
        SolverOptions::default(),
    )
    .unwrap();
    let traj = stepper.run(sys.constant(c0), t_final, "dg").unwrap();
    let means = traj
        .states
        .iter()
        .map(|s| averager.global_average(s).unwrap())
        .collect();
    (traj.times, means)
}

#[test]
fn uniform_logistic_converges_at_first_order() {
    let mesh = jittered(2, 2, 0.1);
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| {
            let (t, m) = mean_curve(&mesh, 0.61, dt, 40.0, 0.1);
            t.iter()
                .zip(&m)
                .map(|(t, c)| (c - logistic(0.1, 0.61, *t)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((0.9..=1.1).contains(&order), "errors {errs:?}");
    }
}

#[test]
fn zero_initial_condition_stays_zero() {
    let mesh = jittered(2, 3, 0.2);
    let (_, m) = mean_curve(&mesh, 0.61, 0.05, 5.0, 0.0);
    assert!(m.iter().all(|c| *c == 0.0));
}

#[test]
fn larger_conversion_rate_reaches_half_sooner() {
    let mesh = jittered(2, 2, 0.1);
    let (t, slow) = mean_curve(&mesh, 0.08, 0.05, 40.0, 0.1);
    let (_, fast) = mean_curve(&mesh, 8.54, 0.05, 40.0, 0.1);
    let t_slow = crossing_time(&t, &slow, 0.5).unwrap();
    let t_fast = crossing_time(&t, &fast, 0.5).unwrap();
    assert!(t_fast < t_slow, "{t_fast} vs {t_slow}");
}
