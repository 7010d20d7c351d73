use std::collections::BTreeSet;

use fkneuro_core::geometry::{BraakAtlas, Connectome, Edge, Node};
use fkneuro_core::graph::CnExtrapolated;
use fkneuro_core::linsolve::SolverRegistry;
use fkneuro_core::scheme::{Domain, GraphCn, RunSetup, Seed, SpreadingScheme};
use fkneuro_core::sparse::CsrMatrix;
use fkneuro_core::staging::{braak_activation_order, crossing_time, stage_curves, OrderVerdict};
use proptest::prelude::*;

fn logistic(c0: f64, alpha: f64, t: f64) -> f64 {
    let e = (alpha * t).exp();
    c0 * e / (1.0 - c0 + c0 * e)
}

fn random_graph(m: usize, extra: &[(usize, usize, f64)]) -> Connectome {
    let nodes = (0..m)
        .map(|i| Node {
            region: i as u32 + 1,
            position: [i as f64, 0.0, 0.0],
            volume: 1.0 + i as f64 * 0.1,
        })
        .collect();
    let mut edges: Vec<Edge> = (1..m)
        .map(|i| Edge {
            i: i - 1,
            j: i,
            tracts: 1.0 + i as f64,
            length: 1.5,
        })
        .collect();
    for &(i, j, w) in extra {
        let (i, j) = (i % m, j % m);
        if i != j
            && !edges
                .iter()
                .any(|e| (e.i, e.j) == (i, j) || (e.i, e.j) == (j, i))
        {
            edges.push(Edge {
                i,
                j,
                tracts: w,
                length: 1.0,
            });
        }
    }
    Connectome::new(nodes, edges, 1.0).unwrap()
}

fn max_logistic_error(dt: f64, alpha: f64) -> f64 {
    let conn = Connectome::chain(4, 10.0, 1.0, 3.0, 1, &[], 1.0).unwrap();
    let stepper = CnExtrapolated::new(conn.laplacian(), alpha, dt).unwrap();
    let traj = stepper.run(vec![0.1; 4], 40.0, "graph-cn").unwrap();
    traj.times
        .iter()
        .zip(&traj.states)
        .flat_map(|(t, s)| s.iter().map(move |c| (c - logistic(0.1, alpha, *t)).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn uniform_state_follows_logistic_at_second_order() {
    for alpha in [0.61, 0.70] {
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| max_logistic_error(dt, alpha))
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (1.8..=2.2).contains(&order),
                "alpha {alpha}: errors {errs:?}"
            );
        }
    }
}

#[test]
fn diffusion_only_conserves_mass_over_800_steps() {
    let conn = random_graph(12, &[(0, 7, 2.0), (3, 11, 0.5), (2, 9, 4.0)]);
    let stepper = CnExtrapolated::new(conn.laplacian(), 0.0, 0.05).unwrap();
    let initial: Vec<f64> = (0..12)
        .map(|i| if i % 3 == 0 { 0.9 } else { 0.05 })
        .collect();
    let traj = stepper.run(initial, 40.0, "graph-cn").unwrap();
    assert_eq!(traj.steps(), 800);
    for w in traj.states.windows(2) {
        let (a, b): (f64, f64) = (w[0].iter().sum(), w[1].iter().sum());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn equilibria_are_fixed_points_on_a_connected_graph() {
    let conn = random_graph(7, &[(1, 5, 1.0)]);
    let stepper = CnExtrapolated::new(conn.laplacian(), 0.7, 0.05).unwrap();
    for v in [0.0, 1.0] {
        let (next, _) = stepper.step(&[v; 7], &[v; 7]).unwrap();
        assert!(next.iter().all(|c| (c - v).abs() <= 1e-12), "{next:?}");
    }
}

#[test]
fn chain_activation_increases_with_hop_distance() {
    let conn = Connectome::chain(5, 40.0, 1.0, 1.0, 1, &[], 2.2).unwrap();
    let stepper = CnExtrapolated::new(conn.laplacian(), 0.7, 0.05).unwrap();
    let mut initial = vec![0.0; 5];
    initial[0] = 0.1;
    let traj = stepper.run(initial, 40.0, "graph-cn").unwrap();
    let times: Vec<f64> = (0..5)
        .map(|j| {
            let c: Vec<f64> = traj.states.iter().map(|s| s[j]).collect();
            crossing_time(&traj.times, &c, 0.5).expect("node activates")
        })
        .collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]), "{times:?}");
}

fn slab_staging(shortcuts: &[(usize, usize)]) -> OrderVerdict {
    let conn = Connectome::chain(5, 40.0, 1.0, 1.0, 1, shortcuts, 2.2).unwrap();
    let atlas = BraakAtlas::ordered_slabs([1, 2, 3, 4, 5]);
    let setup = RunSetup {
        alpha: 0.7,
        t_final: 40.0,
        seed: Seed::Regions {
            ids: BTreeSet::from([1]),
            value: 0.1,
        },
        ..RunSetup::default()
    };
    let sim = GraphCn::default()
        .simulate(Domain::Graph(&conn), &setup, &SolverRegistry::default())
        .unwrap();
    let curves = stage_curves(&sim.trajectory, &sim.averager, &atlas).unwrap();
    braak_activation_order(&sim.trajectory.times, &curves, 0.5)
        .unwrap()
        .verdict
}

#[test]
fn slab_seeding_activates_in_anatomical_order() {
    assert_eq!(slab_staging(&[]), OrderVerdict::Anatomical);
}

#[test]
fn shortcut_to_last_stage_violates_order() {
    // A direct II-VI tract lets VI overtake IV and V.
    assert_eq!(slab_staging(&[(0, 4)]), OrderVerdict::Violated);
}

fn permuted(conn: &Connectome, perm: &[usize]) -> Connectome {
    let mut nodes = conn.nodes().to_vec();
    for (old, &new) in perm.iter().enumerate() {
        nodes[new] = conn.nodes()[old].clone();
    }
    let edges = conn
        .edges()
        .iter()
        .map(|e| Edge {
            i: perm[e.i],
            j: perm[e.j],
            ..e.clone()
        })
        .collect();
    Connectome::new(nodes, edges, conn.scale()).unwrap()
}

fn quad_form(l: &CsrMatrix, x: &[f64]) -> f64 {
    l.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dynamics_are_equivariant_under_node_relabeling(
        extra in prop::collection::vec((0usize..8, 0usize..8, 0.1f64..5.0), 0..6),
        seed in prop::collection::vec(0.0f64..1.0, 8),
        perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let conn = random_graph(8, &extra);
        let other = permuted(&conn, &perm);
        let mut seed_p = vec![0.0; 8];
        for (old, &new) in perm.iter().enumerate() {
            seed_p[new] = seed[old];
        }
        let a = CnExtrapolated::new(conn.laplacian(), 0.7, 0.05).unwrap().run(seed, 2.0, "a").unwrap();
        let b = CnExtrapolated::new(other.laplacian(), 0.7, 0.05).unwrap().run(seed_p, 2.0, "b").unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            for (old, &new) in perm.iter().enumerate() {
                prop_assert!((sa[old] - sb[new]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_is_symmetric_psd_with_constant_kernel(
        extra in prop::collection::vec((0usize..10, 0usize..10, 0.1f64..5.0), 0..10),
        x in prop::collection::vec(-1.0f64..1.0, 10),
        c in prop::collection::vec(0.0f64..1.0, 10),
    ) {
        let conn = random_graph(10, &extra);
        let l = conn.laplacian();
        prop_assert!(l.asymmetry() <= 1e-12 * l.max_abs());
        prop_assert!(quad_form(l, &x) >= -1e-12);
        prop_assert!(l.mul_vec(&[1.0; 10]).iter().all(|v| v.abs() <= 1e-12));
        let stepper = CnExtrapolated::new(l, 0.7, 0.05).unwrap();
        let sys = stepper.system_matrix(&c, &x).unwrap();
        prop_assert!(sys.asymmetry() <= 1e-12 * sys.max_abs());
    }
}
