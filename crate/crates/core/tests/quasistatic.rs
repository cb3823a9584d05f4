mod common;

use cpflow::dissipation::DissipationSpec;
use cpflow::material::MaterialModel;
use cpflow::quasistatic::{
    quasistatic_solve, BoxMesh, QuasiLoad, QuasiOptions, QuasiState, QuasiSystem, Scaling,
};
use nalgebra::DVector;

use common::ElasticCube;

#[test]
fn infinite_yield_reproduces_hyperelasticity() {
    let model = MaterialModel {
        yield_radius: 1e6,
        ..Default::default()
    };
    let spec = DissipationSpec::log_bound(model.yield_radius);
    let mesh = BoxMesh::unit_cube([1, 1, 1]).unwrap();
    let load = QuasiLoad::default();
    let traj = quasistatic_solve(
        &mesh,
        &model,
        &spec,
        &load,
        2,
        Scaling::Physical,
        &QuasiOptions::default(),
    )
    .unwrap();
    assert_eq!(traj.total_dissipation(), 0.0);
    assert!(traj
        .states
        .iter()
        .all(|s| s.w.iter().all(|w| w.norm() == 0.0)));
    let cube = ElasticCube::new(1, model.elastic.a, model.elastic.b, load.traction);
    let mut x = DVector::zeros(cube.unknowns);
    for i in 1..=2 {
        x = cube.solve(&x, load.amplitude(traj.times[i]).unwrap());
        for a in 0..mesh.node_count() {
            let oracle = cube.at_mesh_node(&x, &mesh, a);
            for (d, expected) in oracle.iter().enumerate() {
                assert!((traj.states[i].v[3 * a + d] - expected).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn energy_grows_along_a_stretching_family() {
    let model = MaterialModel::default();
    let mesh = BoxMesh::unit_cube([2, 1, 1]).unwrap();
    let load = QuasiLoad::default();
    let sys = QuasiSystem::new(
        &mesh,
        &model,
        DissipationSpec::log_bound(0.2),
        &load,
        Scaling::Physical,
    )
    .unwrap();
    let mut previous = f64::NEG_INFINITY;
    for s in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let mut state = QuasiState::zero(&mesh);
        for a in 0..mesh.node_count() {
            state.v[3 * a] = s * mesh.node_coords(a)[0];
        }
        let e = sys.energy(&state, 1.0).unwrap();
        // Quadratic growth in the stretch dominates the linear load term.
        assert!(e > previous && e >= 0.1 * s * s - 10.0, "s = {s}: {e}");
        previous = e;
    }
}

#[test]
fn every_step_satisfies_the_discrete_inequality() {
    let model = MaterialModel::default();
    let spec = DissipationSpec::log_bound(model.yield_radius);
    let mesh = BoxMesh::unit_cube([1, 1, 1]).unwrap();
    let traj = quasistatic_solve(
        &mesh,
        &model,
        &spec,
        &QuasiLoad::default(),
        8,
        Scaling::Physical,
        &QuasiOptions::default(),
    )
    .unwrap();
    assert!(traj.total_dissipation() > 0.0);
    assert!(traj.step_inequality_violation() <= 0.0);
    assert!(traj.monotone_violation <= 0.0);
}
