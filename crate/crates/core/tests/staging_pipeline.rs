use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fkneuro_core::geometry::{generate_structured_mesh, BraakAtlas, BraakStage, Labeling};
use fkneuro_core::linsolve::SolverRegistry;
use fkneuro_core::scheme::{DgSemiImplicitEuler, Domain, RunSetup, Seed, SpreadingScheme};
use fkneuro_core::staging::{
    braak_activation_order, classify_phase, map_suvr_tau, parse_clinical_csv,
    reconstruct_macrostages, stage_curves, stage_means_by_region, OrderVerdict, Phase,
    SuvrMapParams,
};

fn logistic(c0: f64, alpha: f64, t: f64) -> f64 {
    let e = (alpha * t).exp();
    c0 * e / (1.0 - c0 + c0 * e)
}

#[test]
fn logistic_curve_crossing_matches_closed_form() {
    let times: Vec<f64> = (0..=800).map(|k| k as f64 * 0.05).collect();
    let curve: Vec<f64> = times.iter().map(|t| logistic(0.1, 0.7, *t)).collect();
    let curves: BTreeMap<BraakStage, Vec<f64>> =
        [(BraakStage::III, curve.clone()), (BraakStage::V, curve)]
            .into_iter()
            .collect();
    let tl = reconstruct_macrostages(&times, &curves, 0.5).unwrap();
    assert!((tl.t1 - 9f64.ln() / 0.7).abs() < 1e-3, "{}", tl.t1);
    assert!(tl.warnings.is_empty());
}

#[test]
fn flat_curves_put_both_boundaries_at_final_time() {
    let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
    let curves: BTreeMap<BraakStage, Vec<f64>> = BraakStage::ALL
        .iter()
        .map(|s| (*s, vec![0.0; 11]))
        .collect();
    let tl = reconstruct_macrostages(&times, &curves, 0.5).unwrap();
    assert_eq!((tl.t1, tl.t2), (10.0, 10.0));
    assert_eq!(tl.warnings.len(), 2);
}

#[test]
fn slab_mesh_stages_in_order_for_both_thresholds() {
    let mesh =
        generate_structured_mesh(2, 10, 200.0, &Labeling::slabs(5), [1.0, 0.0, 0.0]).unwrap();
    let atlas = BraakAtlas::ordered_slabs([1, 2, 3, 4, 5]);
    let setup = RunSetup {
        alpha: 0.7,
        degree: 1,
        t_final: 40.0,
        seed: Seed::Regions {
            ids: BTreeSet::from([1]),
            value: 0.1,
        },
        ..RunSetup::default()
    };
    let sim = DgSemiImplicitEuler
        .simulate(Domain::Mesh(&mesh), &setup, &SolverRegistry::default())
        .unwrap();
    let curves = stage_curves(&sim.trajectory, &sim.averager, &atlas).unwrap();
    let times = &sim.trajectory.times;
    let early = reconstruct_macrostages(times, &curves, 0.4).unwrap();
    let late = reconstruct_macrostages(times, &curves, 0.5).unwrap();
    for c_crit in [0.4, 0.5] {
        let order = braak_activation_order(times, &curves, c_crit).unwrap();
        assert_eq!(
            order.verdict,
            OrderVerdict::Anatomical,
            "c_crit {c_crit}: {order:?}"
        );
    }
    assert!(early.t1 < late.t1 && early.t2 < late.t2);
    assert!(early.t1 < early.t2);
}

#[test]
fn clinical_table_classifies_and_maps() {
    let text = "\
protein,braak_stage,region,mean_suvr,sd_suvr
tau,II,entorhinal,1.30,0.1
tau,III,entorhinal,1.60,0.1
tau,IV,entorhinal,2.30,0.1
tau,II,precuneus,0.70,0.1
tau,III,precuneus,1.00,0.1
tau,IV,precuneus,1.35,0.1
tau,V,precuneus,1.45,0.1
abeta,II,precuneus,1.9,0.2
";
    let rows = parse_clinical_csv(text, Path::new("clinical.csv")).unwrap();
    let means = stage_means_by_region(&rows, "tau");
    let p = SuvrMapParams::tau();
    let ento = classify_phase(&means["entorhinal"], 1.4, true, &p).unwrap();
    assert_eq!(
        ento.phases.iter().map(|(_, ph)| *ph).collect::<Vec<_>>(),
        [Phase::Active, Phase::Active, Phase::Saturation]
    );
    // Crosses 1.4 at stage V; stage IV is within epsilon, so onset is IV.
    let prec = classify_phase(&means["precuneus"], 1.4, false, &p).unwrap();
    assert_eq!(
        prec.phases.iter().map(|(_, ph)| *ph).collect::<Vec<_>>(),
        [Phase::Stationary, Phase::Lag, Phase::Active, Phase::Active]
    );
    let (stage, phase) = prec.phases[1];
    assert_eq!(stage, BraakStage::III);
    assert!((map_suvr_tau(1.0, phase, &p) - 0.25 * 0.25 / 1.45).abs() < 1e-12);
}
