use approx::assert_relative_eq;
use proptest::prelude::*;
use wke_core::collision::{eval_operator, OperatorKind};
use wke_core::fields::{weighted_norm, GridField, GridSpec, SpectralField, WeightRegime};
use wke_core::geometry::{
    bobylev_inverse, bobylev_jacobian, bobylev_map, collision_outputs, geometric_bounds, involution, Sign, UnitVector,
};
use wke_core::math::{exp, Vec3};
use wke_core::quadrature::{Backend, NodeSet, TensorRule};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = UnitVector> {
    vec3(1.0).prop_filter_map("near zero", |v| (v.norm() > 1e-3).then(|| UnitVector::from_nonzero(v).unwrap()))
}

proptest! {
    #[test]
    fn collisions_conserve_momentum_and_energy(k in vec3(50.0), k1 in vec3(50.0), s in unit()) {
        let c = collision_outputs(k, k1, s);
        let scale = 1.0 + c.energy;
        prop_assert!(c.momentum_defect().max_abs() <= 1e-12 * scale.sqrt());
        prop_assert!(c.energy_defect().abs() <= 1e-12 * scale);
        prop_assert!((c.r_plus() - (k - c.kstar)).max_abs() <= 1e-12 * scale.sqrt());
        prop_assert!((c.r_minus() - (k - c.k1star)).max_abs() <= 1e-12 * scale.sqrt());
    }

    #[test]
    fn involution_squares_to_identity(k in vec3(20.0), k1 in vec3(20.0), s in unit()) {
        prop_assume!((k - k1).norm() > 1e-6);
        let (a, b, eta) = involution(k, k1, s).unwrap();
        prop_assume!((a - b).norm() > 1e-6);
        let (k2, k12, s2) = involution(a, b, eta).unwrap();
        let scale = 1.0 + k.norm() + k1.norm();
        prop_assert!((k2 - k).max_abs() <= 1e-12 * scale);
        prop_assert!((k12 - k1).max_abs() <= 1e-12 * scale);
        prop_assert!((s2.get() - s.get()).max_abs() <= 1e-9 * scale / (k - k1).norm());
    }

    #[test]
    fn bobylev_inverse_undoes_the_map(y in vec3(10.0), s in unit(), plus in any::<bool>()) {
        let eps = if plus { Sign::Plus } else { Sign::Minus };
        let nu = bobylev_map(y, s, eps);
        let c = eps.value() * nu.dot(s.get()) / nu.norm();
        prop_assume!(c > 1e-3);
        let back = bobylev_inverse(nu, s, eps).unwrap();
        prop_assert!((back - y).max_abs() <= 1e-9 * (1.0 + y.norm()) / c);
        let j = bobylev_jacobian(nu, s).unwrap();
        prop_assert!(j >= 4.0);
    }

    #[test]
    fn geometric_bounds_hold(k in vec3(30.0), k1 in vec3(30.0), s in unit()) {
        let r = geometric_bounds(k, k1, s);
        prop_assert!(r.all_hold(), "{:?}", r);
    }

    #[test]
    fn weighted_norm_is_homogeneous(a in 0.1..3.0f64, s in 0.5..2.0f64, c in -4.0..4.0f64) {
        let regime = WeightRegime::new(2.0, 0.25).unwrap();
        let spec = GridSpec::new(8, 6.0).unwrap();
        let f = SpectralField::gaussian(a, s).unwrap();
        let n1 = weighted_norm(&f, &regime, &spec);
        let n2 = weighted_norm(&f.scaled(c), &regime, &spec);
        prop_assert!((n2 - c.abs() * n1).abs() <= 1e-12 * n2.max(1e-300));
    }

    #[test]
    fn trilinear_interpolation_is_exact_on_affine_data(
        a in vec3(1.0), b in -1.0..1.0f64, k in vec3(5.5),
    ) {
        let spec = GridSpec::new(12, 6.0).unwrap();
        let values = spec.nodes().map(|p| a.dot(p) + b).collect();
        let g = GridField::from_values(spec, values).unwrap();
        prop_assert!((g.eval(k) - (a.dot(k) + b)).abs() <= 1e-12 * (1.0 + a.norm() * 6.0));
    }
}

fn small_nodes() -> NodeSet {
    NodeSet::build(&Backend::Tensor(TensorRule::uniform(4, (3, 6), (3, 6), 6.0).unwrap())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn collision_operator_is_cubic(lambda in -3.0..3.0f64, k in vec3(2.0), c in vec3(0.5)) {
        let nodes = small_nodes();
        let f = SpectralField::analytic("shifted", move |q| exp(-(q - c).norm_sq()));
        let base = eval_operator(OperatorKind::C, &[&f], k, &nodes).unwrap().value;
        let scaled = eval_operator(OperatorKind::C, &[&f.scaled(lambda)], k, &nodes).unwrap().value;
        let gain = eval_operator(OperatorKind::Qplus, &[&f], k, &nodes).unwrap().value;
        prop_assert!((scaled - lambda.powi(3) * base).abs() <= 1e-12 * lambda.abs().powi(3) * gain.max(1e-300));
    }

    #[test]
    fn gain_loss_and_frequency_are_nonnegative(k in vec3(3.0), a in 0.2..2.0f64, s in 0.5..1.5f64) {
        let nodes = small_nodes();
        let f = SpectralField::gaussian(a, s).unwrap();
        for kind in [OperatorKind::Qplus, OperatorKind::Qminus] {
            prop_assert!(eval_operator(kind, &[&f], k, &nodes).unwrap().value >= 0.0);
        }
        prop_assert!(eval_operator(OperatorKind::Rfreq, &[&f, &f], k, &nodes).unwrap().value >= 0.0);
    }
}

#[test]
fn rayleigh_jeans_is_annihilated_by_a_coarse_rule() {
    let nodes = small_nodes();
    for mu in [0.1, 1.0, 10.0] {
        let f = SpectralField::rayleigh_jeans(mu).unwrap();
        for k in [Vec3::ZERO, Vec3::new(0.5, -1.0, 2.0)] {
            let c = eval_operator(OperatorKind::C, &[&f], k, &nodes).unwrap().value;
            let q = eval_operator(OperatorKind::Qplus, &[&f], k, &nodes).unwrap().value;
            assert_relative_eq!(c / q, 0.0, epsilon = 1e-12);
        }
    }
}
