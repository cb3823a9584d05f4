mod common;

use cpflow::dissipation::{distance_log, point_bound, DissipationSpec};
use cpflow::lab::rescaled_distance;
use cpflow::linearized::{inclusion_residual, return_map, LinearModel};
use cpflow::material::{total_density, MaterialModel};
use cpflow::projection::project;
use cpflow::tensor3::{DevSym3, SymTensor3, Tensor3, Tensor4MinorSym, UnitDetSpd};
use proptest::prelude::*;

use common::{dev_to_mat, to_mat, LinearStep};

fn dev(max: f64) -> impl Strategy<Value = DevSym3> {
    prop::array::uniform5(-1.0f64..1.0)
        .prop_filter("nonzero", |a| a.iter().any(|x| x.abs() > 1e-3))
        .prop_flat_map(move |a| {
            (Just(a), 0.0..max).prop_map(|(a, r)| {
                let d = DevSym3(a);
                d * (r / d.norm())
            })
        })
}

fn sym(max: f64) -> impl Strategy<Value = SymTensor3> {
    prop::array::uniform6(-max..max).prop_map(SymTensor3)
}

/// Rotation from an axis-angle triple.
fn rotation() -> impl Strategy<Value = Tensor3> {
    prop::array::uniform3(-3.0f64..3.0).prop_map(|w| {
        let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt().max(1e-12);
        let k = w.map(|x| x / theta);
        let skew = Tensor3([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]]);
        Tensor3::identity() + skew * theta.sin() + skew.matmul(&skew) * (1.0 - theta.cos())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exp_of_deviator_has_unit_determinant(l in dev(5.0)) {
        prop_assert!((UnitDetSpd::from_log(&l).as_sym().det() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn log_inverts_exp(l in dev(5.0)) {
        let c = UnitDetSpd::from_log(&l);
        prop_assert!((c.log() - l).norm() <= 1e-10);
        let back = UnitDetSpd::from_log(&c.log());
        prop_assert!((*back.as_sym() - *c.as_sym()).norm() <= 1e-10);
    }

    #[test]
    fn fourth_order_tensors_see_only_the_symmetric_part(a in prop::array::uniform9(-1.0f64..1.0)) {
        let m = Tensor3([[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]]);
        let tensor = Tensor4MinorSym::isotropic(0.7, 1.3);
        let once = tensor.apply(&m.sym());
        let twice = tensor.apply(&m.transpose().sym());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn log_distance_is_a_metric(a in dev(3.0), b in dev(3.0), c in dev(3.0), r in 0.01f64..2.0) {
        let spec = DissipationSpec::log_bound(r);
        let (ab, bc, ac) = (distance_log(&a, &b, &spec), distance_log(&b, &c, &spec), distance_log(&a, &c, &spec));
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert_eq!(ab, distance_log(&b, &a, &spec));
        let (ca, cb) = (UnitDetSpd::from_log(&a), UnitDetSpd::from_log(&b));
        prop_assert!(ab <= point_bound(&ca, &cb, r) + 1e-10);
        if ab == 0.0 {
            prop_assert!((*ca.as_sym() - *cb.as_sym()).norm() <= 1e-9);
        }
    }

    #[test]
    fn rescaled_distance_does_not_depend_on_eps(a in dev(1.0), b in dev(1.0), r in 0.01f64..1.0) {
        let spec = DissipationSpec::log_bound(r);
        prop_assert_eq!(rescaled_distance(&a, &b, &spec), 0.5 * r * (b - a).norm());
    }

    #[test]
    fn density_is_frame_indifferent(c in dev(0.8), cp in dev(0.8), q in rotation()) {
        let m = MaterialModel::default();
        let c = *UnitDetSpd::from_log(&c).as_sym() * 1.1;
        let cp = UnitDetSpd::from_log(&cp);
        let turn = |s: &SymTensor3| q.transpose().matmul(&s.to_tensor()).matmul(&q).sym();
        let base = total_density(&c, &cp, &m).unwrap();
        let turned = total_density(&turn(&c), &UnitDetSpd::new(turn(cp.as_sym())).unwrap(), &m).unwrap();
        prop_assert!((base - turned).abs() <= 1e-10 * (1.0 + base.abs()));
    }

    #[test]
    fn return_map_is_the_unique_minimizer(
        e in sym(0.2),
        z_prev in dev(0.1),
        shear in 0.2f64..1.2,
        lame in 0.0f64..1.0,
        hardening in 0.1f64..1.1,
        rho in 0.01f64..0.2,
    ) {
        let lm = LinearModel::isotropic(shear, lame, hardening, rho);
        let z = return_map(&z_prev, &e, &lm);
        prop_assert!(z.to_sym().trace().abs() <= 1e-12);
        prop_assert!(inclusion_residual(&z_prev, &z, &e, &lm) <= 1e-9);
        let step = LinearStep { e: to_mat(&e), z_prev: dev_to_mat(&z_prev), shear, lame, hardening, rho };
        prop_assert!((dev_to_mat(&z) - step.brute_force()).norm() <= 1e-8);
    }

    #[test]
    fn projection_is_an_idempotent_contraction(a in dev(2.0), b in dev(2.0)) {
        let radius = 2.0;
        let (ca, cb) = (UnitDetSpd::from_log(&a), UnitDetSpd::from_log(&b));
        let (pa, pb) = (project(&ca, radius).unwrap(), project(&cb, radius).unwrap());
        prop_assert!(pa.norm() <= radius + 1e-8);
        prop_assert!((*pa.as_sym() - *pb.as_sym()).norm() <= (*ca.as_sym() - *cb.as_sym()).norm() + 1e-8);
        let again = project(&pa, radius).unwrap();
        prop_assert!((*again.as_sym() - *pa.as_sym()).norm() <= 1e-8);
        if ca.norm() <= radius {
            prop_assert_eq!(pa, ca);
        }
    }
}
