//! Property tests for the structural invariants.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use proptest::prelude::*;

use diffmat::bounds::{
    auto_delta, complex_power_bounds, exponent_identity, gaussian_sandwich, lu_factors, probability_bounds,
    taylor_bounds_check,
};
use diffmat::charfn::{apply_moment, apply_sqrt, apply_sqrt_inverse, quad_form, CharFn, SqrtBlock, Theta};
use diffmat::exact::{count_brute, exact_return_probability};
use diffmat::lattice::{decompose_lattice, enumerate_lambda0, expand_lattice, LatticeCoeffs};
use diffmat::sum::{pairwise_sum, par_pairwise_sum};
use diffmat::walk::{z_map, Column};
use diffmat::{make_params, Budget, Params};

fn geometry() -> impl Strategy<Value = Params> {
    prop_oneof![Just((2u32, 3usize)), Just((2, 4)), Just((3, 3)), Just((3, 4)), Just((4, 3)), Just((5, 3))]
        .prop_map(|(g, k)| Params::geometry(g, k).unwrap())
}

fn with_theta(scale: f64) -> impl Strategy<Value = (Params, Theta)> {
    geometry().prop_flat_map(move |p| {
        (Just(p), prop::collection::vec(-scale..scale, p.d).prop_map(Theta))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn z_is_translation_invariant(p in geometry(), seed in any::<u64>(), c in 0u32..5) {
        let n = seed % (p.g as u64).pow(p.k as u32);
        let x = Column::from_rank(&p, n);
        prop_assert_eq!(z_map(&p, &x), z_map(&p, &x.translate(p.g, c % p.g)));
    }

    #[test]
    fn increments_have_one_hot_per_pair(p in geometry(), seed in any::<u64>()) {
        let x = Column::from_rank(&p, seed % (p.g as u64).pow(p.k as u32));
        let v = z_map(&p, &x).v;
        for block in v.chunks(p.block_len()) {
            let hot = block.iter().filter(|&&c| c == p.g as i64 - 1).count();
            let cold = block.iter().filter(|&&c| c == -1).count();
            prop_assert!(hot <= 1 && hot + cold == block.len());
        }
    }

    #[test]
    fn phi_is_bounded_conjugate_symmetric_and_quasi_periodic((p, th) in with_theta(4.0), axis in 0usize..40) {
        let cf = CharFn::new(&p, &Budget::default()).unwrap();
        let v = cf.eval(&th);
        prop_assert!(v.norm() <= 1.0 + 1e-12);
        prop_assert!((cf.eval(&th.neg()) - v.conj()).norm() < 1e-12);
        let mut shifted = th.clone();
        shifted.0[axis % p.d] += 2.0 * PI;
        // Z carries -1/g on every coordinate, so a 2π shift multiplies Φ by e^{-2πi/g}
        let phase = Complex64::from_polar(1.0, -2.0 * PI / p.g as f64);
        prop_assert!((cf.eval(&shifted) - v * phase).norm() < 1e-12);
    }

    #[test]
    fn phi_multiplicative_on_lattice((p, th) in with_theta(PI)) {
        let b = Budget::default();
        let cf = CharFn::new(&p, &b).unwrap();
        for eta in enumerate_lambda0(&p, &b).unwrap() {
            let lhs = cf.eval(&eta.add(&th));
            prop_assert!((lhs - cf.eval(&eta) * cf.eval(&th)).norm() < 1e-12);
            prop_assert!((cf.eval(&eta).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_moment_is_quadratic_form((p, th) in with_theta(2.0)) {
        let cf = CharFn::new(&p, &Budget::default()).unwrap();
        let q = quad_form(&p, &th);
        prop_assert!(q >= -1e-15);
        prop_assert!((cf.second_moment(&th) - q).abs() < 1e-12 * (1.0 + q));
        let mth = apply_moment(&p, &th);
        let dot: f64 = th.0.iter().zip(&mth.0).map(|(a, b)| a * b).sum();
        prop_assert!((dot - q).abs() < 1e-12 * (1.0 + q));
    }

    #[test]
    fn sqrt_round_trip_and_box_witness((p, th) in with_theta(1.0)) {
        let back = apply_sqrt_inverse(&p, &apply_sqrt(&p, &th));
        let err = back.0.iter().zip(&th.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10);
        let q = SqrtBlock::new(p.g);
        prop_assert!(apply_sqrt(&p, &th).max_abs() <= q.norm_inf() * th.max_abs() + 1e-15);
        // Qθ·Qθ = θᵀMθ
        let y = apply_sqrt(&p, &th);
        let yy: f64 = y.0.iter().map(|v| v * v).sum();
        prop_assert!((yy - quad_form(&p, &th)).abs() < 1e-12);
    }

    #[test]
    fn lattice_coefficients_round_trip(p in geometry(), r in any::<u64>()) {
        let b = Budget::default();
        let n = (p.g as u64).pow(p.lattice_rank() as u32);
        let c = LatticeCoeffs::from_rank(&p, r % n);
        let th = expand_lattice(&p, &c).unwrap();
        prop_assert_eq!(decompose_lattice(&p, &th, &b).unwrap(), c);
    }

    #[test]
    fn pairwise_sum_is_schedule_independent(n in 0usize..100_000, salt in any::<u32>()) {
        let f = |i: usize| ((i as f64 + salt as f64) * 0.618).sin();
        let a: f64 = pairwise_sum(0, n, &f);
        let b: f64 = par_pairwise_sum(0, n, &f);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn taylor_defects_nonpositive(a in 0.0f64..30.0, b in -30.0f64..30.0, j in 1u32..=3) {
        let (x, y) = taylor_bounds_check(a, b, j).unwrap();
        prop_assert!(x <= 1e-15 && y <= 1e-15, "{x} {y}");
    }

    #[test]
    fn complex_power_contains_direct_power(re in 0.05f64..1.5, frac in -0.999f64..0.999, t in 2u32..60) {
        let tt = t as f64;
        let beta = frac * (2.0 / (tt * (tt - 1.0))).sqrt();
        let z = Complex64::new(re, re * beta);
        let b = complex_power_bounds(z, t).unwrap();
        let direct = z.powu(t).re;
        let scale = z.norm().powi(t as i32);
        prop_assert!(b.lower <= direct + 1e-13 * scale && direct <= b.upper + 1e-13 * scale);
        prop_assert!(b.lower <= b.upper);
    }

    #[test]
    fn gaussian_sandwich_orders(rho in 1e-4f64..30.0) {
        let s = gaussian_sandwich(rho).unwrap();
        prop_assert!(s.lower <= s.mid + 1e-15 && s.mid <= s.upper + 1e-15);
        prop_assert!(s.upper <= (2.0 * PI).sqrt() + 1e-15);
    }

    #[test]
    fn exponent_identity_holds(g in 2u32..20, k in 3usize..=12) {
        let (l, r) = exponent_identity(g, k);
        prop_assert_eq!(l, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lower_never_exceeds_upper(
        gk in prop_oneof![Just((2u32, 3usize)), Just((3, 3)), Just((2, 4)), Just((3, 4))],
        lambda in 1u64..200,
        frac in 0.01f64..1.0,
    ) {
        let p = make_params(gk.0, gk.1, lambda).unwrap();
        let delta = auto_delta(&p) * frac;
        let r = probability_bounds(&p, delta).unwrap();
        prop_assert!(r.rigorous);
        let lu = lu_factors(&p, delta).unwrap();
        prop_assert!(lu.l <= lu.u);
        prop_assert!(r.lower <= r.upper);
    }

    #[test]
    fn bounds_contain_exact_probability(
        case in prop_oneof![Just((2u32, 3usize, 2u64)), Just((2, 3, 4)), Just((2, 3, 6)), Just((3, 3, 1)), Just((2, 3, 1)), Just((2, 4, 2))],
        frac in 0.01f64..1.0,
    ) {
        let p = make_params(case.0, case.1, case.2).unwrap();
        let c = count_brute(&p, &Budget::default()).unwrap();
        let exact = exact_return_probability(&p, &c).to_f64().unwrap();
        let r = probability_bounds(&p, auto_delta(&p) * frac).unwrap();
        prop_assert!(r.rigorous && r.lower <= exact && exact <= r.upper);
    }
}
