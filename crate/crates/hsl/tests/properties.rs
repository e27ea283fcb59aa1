use hsl::arith::{dickman_rho, MultiplicativeFunction, RamanujanTable};
use hsl::field::{make_field, primes_up_to, FieldDescriptor, FieldElement, FieldSpec};
use hsl::par;
use hsl::regions::{cover_with_boxes, HyperbolicRegion};
use hsl::shifted::{positive_box, sum_over_box, sum_over_hyperbolic, sum_over_hyperbolic_brute, ShiftedSumQuery, SumRegion};
use hsl::sieve::{
    build_sieve_system, data_in_box, inclusion_check, montgomery_check, odd_primes_up_to, partition_check, spacing, CharacterFamily,
    DEFAULT_POINT_BUDGET,
};
use hsl::special::{bessel_k, hyp2f1, log_gamma, Order};
use hsl::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn rational() -> &'static FieldDescriptor {
    static F: OnceLock<FieldDescriptor> = OnceLock::new();
    F.get_or_init(|| make_field(&FieldSpec::Rational, None).unwrap())
}

fn sqrt5() -> &'static FieldDescriptor {
    static F: OnceLock<FieldDescriptor> = OnceLock::new();
    F.get_or_init(|| make_field(&FieldSpec::Quadratic(5), None).unwrap())
}

fn field(quadratic: bool) -> &'static FieldDescriptor {
    if quadratic {
        sqrt5()
    } else {
        rational()
    }
}

fn shift(f: &FieldDescriptor, a: i64, b: i64) -> FieldElement {
    if f.degree() == 1 {
        f.element(a, 0)
    } else {
        f.element(a, b)
    }
}

fn tau_table() -> &'static RamanujanTable {
    static T: OnceLock<RamanujanTable> = OnceLock::new();
    T.get_or_init(|| RamanujanTable::new(20_000))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cover_boxes_contain_the_region(t1 in 1.0f64..1e3, t2 in 1.0f64..1e3, u in 1.0f64..1e3, seeds in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 64)) {
        let r = HyperbolicRegion::new(vec![t1, t2], u).unwrap();
        let boxes = cover_with_boxes(&r);
        prop_assert!(boxes.len() <= r.cover_count_bound());
        for b in &boxes {
            prop_assert!((b.volume() - r.x()).abs() <= 1e-12 * r.x());
        }
        // log-uniform points of the bounding box, kept when inside the region
        let bb = r.bounding_box();
        for (s1, s2) in seeds {
            let x: Vec<f64> = bb.sides.iter().zip([s1, s2]).map(|(iv, s)| (iv.lo.ln() + s * (iv.hi.ln() - iv.lo.ln())).exp()).collect();
            if r.contains(&x) {
                prop_assert!(boxes.iter().any(|b| b.contains(&x)), "{:?} uncovered", x);
            }
        }
    }

    #[test]
    fn hyperbolic_sum_matches_brute_force(quadratic: bool, a in 1i64..6, b in -2i64..3, x in 4.0f64..400.0, u in 1.0f64..12.0) {
        let f = field(quadratic);
        let l = shift(f, a, b);
        prop_assume!(!l.is_zero());
        let t = x.powf(1.0 / f.degree() as f64);
        let region = HyperbolicRegion::new(vec![t; f.degree()], u).unwrap();
        let q = ShiftedSumQuery::new(f, f.ring(), l, SumRegion::Hyperbolic(region), MultiplicativeFunction::divisor()).unwrap();
        let fast = sum_over_hyperbolic(&q).unwrap();
        let slow = sum_over_hyperbolic_brute(&q).unwrap();
        prop_assert_eq!(fast.terms, slow.terms);
        prop_assert!((fast.value - slow.value).abs() <= 1e-9 * slow.value.abs().max(1.0));
    }

    #[test]
    fn box_sums_grow_with_the_box(quadratic: bool, a in 1i64..5, side in 2.0f64..20.0, grow in 1.0f64..2.0) {
        let f = field(quadratic);
        let l = shift(f, a, 0);
        let d = f.degree();
        let small = ShiftedSumQuery::new(f, f.ring(), l.clone(), SumRegion::Box(positive_box(&vec![side; d])), MultiplicativeFunction::divisor()).unwrap();
        let large = ShiftedSumQuery::new(f, f.ring(), l, SumRegion::Box(positive_box(&vec![side * grow; d])), MultiplicativeFunction::divisor()).unwrap();
        prop_assert!(sum_over_box(&small).unwrap().value <= sum_over_box(&large).unwrap().value);
    }

    #[test]
    fn box_sums_are_unit_invariant(a in 1i64..6, b in -3i64..4, s1 in 3.0f64..15.0, s2 in 3.0f64..15.0, k in -2i64..3) {
        let f = sqrt5();
        let l = f.element(a, b);
        prop_assume!(l.is_totally_positive());
        // irrational-looking sides keep lattice points off the boundary
        let sides = [s1 + 0.0137, s2 + 0.0291];
        let eta = f.eps_plus.clone().unwrap().pow(k).unwrap();
        let e = eta.embedding().to_vec();
        let b0 = positive_box(&sides);
        let b1 = b0.scaled(&e);
        let lambda = MultiplicativeFunction::divisor();
        let q0 = ShiftedSumQuery::new(f, f.ring(), l.clone(), SumRegion::Box(b0), lambda.clone()).unwrap();
        let q1 = ShiftedSumQuery::new(f, f.ring(), eta.mul(&l), SumRegion::Box(b1), lambda).unwrap();
        let (v0, v1) = (sum_over_box(&q0).unwrap(), sum_over_box(&q1).unwrap());
        prop_assert_eq!(v0.terms, v1.terms);
        prop_assert!((v0.value - v1.value).abs() <= 1e-9 * v0.value.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translate_lands_in_both_ideals(quadratic: bool, a in 1i64..6, b in -2i64..3, z in 2.0f64..12.0) {
        let f = field(quadratic);
        let l = shift(f, a, b);
        prop_assume!(l.is_totally_positive());
        let zeta = f.ring();
        let side = if quadratic { 12.0 } else { 150.0 };
        let bx = positive_box(&vec![side; f.degree()]);
        for (d, _) in data_in_box(f, &zeta, &l, z, &bx, 1e5).unwrap() {
            let s = build_sieve_system(f, &zeta, &l, &d, z).unwrap();
            let ac = d.a.mul(&d.c).to_ideal(f.ctx).mul(&zeta);
            let bc = d.b.mul(&d.c).to_ideal(f.ctx).mul(&zeta);
            prop_assert!(bc.contains(&s.translate));
            prop_assert!(ac.contains(&s.translate.add(&l)));
            // each Ω_𝔭 has one class when 𝔭 divides the shift part, two otherwise
            for p in &s.primes {
                prop_assert!(p.omega.len() == 1 || p.omega.len() == 2);
            }
        }
    }

    #[test]
    fn partition_and_inclusion_hold(quadratic: bool, a in 1i64..6, z in 2.0f64..20.0, x in 10.0f64..300.0) {
        let f = field(quadratic);
        let l = shift(f, a, 0);
        let zeta = f.ring();
        let d = f.degree();
        let bx = positive_box(&vec![x.powf(1.0 / d as f64); d]);
        let lambda = MultiplicativeFunction::divisor();
        let part = partition_check(f, &zeta, &l, z, &bx, &lambda).unwrap();
        prop_assert!(part.ok, "{:?}", part);
        for (datum, count) in data_in_box(f, &zeta, &l, z, &bx, 1e5).unwrap() {
            let s = build_sieve_system(f, &zeta, &l, &datum, z).unwrap();
            let inc = inclusion_check(f, &zeta, &l, &datum, z, &s, &bx, DEFAULT_POINT_BUDGET).unwrap();
            prop_assert_eq!(inc.violations, 0);
            prop_assert_eq!(inc.class_count, count);
            prop_assert!(inc.class_count <= inc.sifted_count);
        }
    }

    #[test]
    fn character_spacing_meets_the_guarantee(quadratic: bool, z in 3.0f64..30.0, q in 1.0f64..50.0) {
        let f = field(quadratic);
        let x = f.ring();
        let primes = odd_primes_up_to(f, z);
        let fam = CharacterFamily::new(f, &x, &primes, q).unwrap();
        prop_assume!(fam.len() >= 2);
        let sp = spacing(f, &fam).unwrap();
        prop_assert!(sp.ok && sp.delta >= sp.guaranteed, "{:?}", sp);
    }

    #[test]
    fn montgomery_inequality_holds(quadratic: bool, mask in 0u8..8, coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40)) {
        let f = field(quadratic);
        let x = f.ring();
        let primes = odd_primes_up_to(f, 8.0);
        // one residue class per chosen prime, taken as the classes of 0
        let chosen: Vec<_> = primes.iter().enumerate().filter(|(i, _)| mask >> (i % 8) & 1 == 1).map(|(_, p)| (p.clone(), vec![0u64])).collect();
        let a: Vec<(FieldElement, Complex64)> = coeffs
            .iter()
            .enumerate()
            .map(|(i, &(re, im))| (shift(f, 1 + i as i64, (i % 3) as i64), Complex64::new(re, im)))
            .filter(|(e, _)| chosen.iter().all(|(p, _)| !p.ideal.contains(e)))
            .collect();
        prop_assume!(!a.is_empty());
        let m = montgomery_check(&x, &chosen, &a).unwrap();
        prop_assert!(m.holds, "{:?}", m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_gamma_recurrence(re in 0.1f64..30.0, im in -30.0f64..30.0) {
        let z = Complex64::new(re, im);
        let d = log_gamma(z + 1.0).unwrap() - log_gamma(z).unwrap() - z.ln();
        // equal up to a multiple of 2πi
        let k = (d.im / std::f64::consts::TAU).round();
        prop_assert!(d.re.abs() < 1e-10 && (d.im - k * std::f64::consts::TAU).abs() < 1e-10, "{}", d);
    }

    #[test]
    fn hyp2f1_is_symmetric_in_the_upper_parameters(a in 0.1f64..3.0, b in 0.1f64..3.0, c in 0.5f64..6.0, z in -20.0f64..0.9) {
        let (a, b, c) = (Complex64::new(a, 0.0), Complex64::new(b, 0.3), Complex64::new(c, 0.0));
        let x = hyp2f1(a, b, c, z).unwrap().value;
        let y = hyp2f1(b, a, c, z).unwrap().value;
        prop_assert!((x - y).norm() <= 1e-9 * x.norm().max(1.0));
    }

    #[test]
    fn bessel_k_decreases_in_x(r in 0.0f64..5.0, x in 0.1f64..30.0, dx in 0.01f64..2.0) {
        let a = bessel_k(Order::Imaginary(r), x).unwrap().value;
        let b = bessel_k(Order::Imaginary(r), x + dx).unwrap().value;
        // K_{ir} is monotone once x exceeds the order
        prop_assume!(x > r);
        prop_assert!(b <= a);
    }

    #[test]
    fn dickman_is_nonincreasing(u in 0.0f64..10.0, du in 0.0f64..1.0) {
        prop_assert!(dickman_rho(u + du) <= dickman_rho(u) + 1e-15);
        prop_assert!(dickman_rho(u) > 0.0);
    }

    #[test]
    fn tree_sum_ignores_worker_count(xs in prop::collection::vec(-1e6f64..1e6, 0..3000)) {
        let one = par::with_workers(1, || par::sum_by(&xs, |&x| x * 1.5));
        let four = par::with_workers(4, || par::sum_by(&xs, |&x| x * 1.5));
        prop_assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn ramanujan_is_multiplicative_and_bounded(i in 0usize..200, j in 0usize..200) {
        let t = tau_table();
        let ps = primes_up_to(140);
        let (m, n) = ((i as u64 % 140) + 1, (j as u64 % 140) + 1);
        if num_integer::gcd(m, n) == 1 {
            prop_assert_eq!(t.tau(m * n).unwrap(), t.tau(m).unwrap() * t.tau(n).unwrap());
        }
        let p = ps[i % ps.len()];
        prop_assert!(t.lambda(p).unwrap().abs() <= 2.0);
        let (tp, tp2) = (t.tau(p).unwrap(), t.tau(p * p).unwrap());
        prop_assert_eq!(tp * tp - tp2, (p as i128).pow(11));
    }
}
