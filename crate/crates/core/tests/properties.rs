//! Randomised properties of the exact ring, the expression layer and the
//! symbolic checks. Seeds are fixed so every run sees the same cases.

use flatstruct::catalog::catalog_get;
use flatstruct::exprio::{parse_expr, parse_pvf, serialize_pvf};
use flatstruct::flatcore::{build_saito_matrices, check_extended_wdvv, PotentialVF};
use flatstruct::linalg::c;
use flatstruct::logvf::{discriminant, is_logarithmic};
use flatstruct::ring::{rat, Rational, RingElem};
use num_complex::Complex64;
use proptest::prelude::*;

mod common;
use common::*;

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn product_rule(f in terms(), g in terms(), which in 0usize..2, var in 0usize..3) {
        let ring = &rings()[which];
        let (f, g) = (build(ring, &f), build(ring, &g));
        let lhs = f.mul(&g).partial(var);
        let rhs = f.partial(var).mul(&g).add(&f.mul(&g.partial(var)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn mixed_partials_commute(f in terms(), which in 0usize..2, i in 0usize..3, j in 0usize..3) {
        let ring = &rings()[which];
        let f = build(ring, &f);
        prop_assert_eq!(f.partial(i).partial(j), f.partial(j).partial(i));
    }

    #[test]
    fn parse_serialize_identity(f in terms(), which in 0usize..2) {
        let ring = &rings()[which];
        let f = build(ring, &f);
        let text = f.to_expr_string();
        let back = parse_expr(ring, &text).unwrap();
        prop_assert!(back.structurally_eq(&f), "{} -> {}", text, back);
    }

    #[test]
    fn eval_is_a_homomorphism(f in terms(), g in terms(), which in 0usize..2, p in point()) {
        let ring = &rings()[which];
        let (f, g) = (build(ring, &f), build(ring, &g));
        let t = [c(p[0], p[1]), c(p[2], 0.3), c(p[3], -0.2)];
        let z = match ring.extension() {
            Some(_) => match ring.solve_z(&t, c(0.4, 0.4), 1e-9) {
                Ok(z) => z,
                Err(_) => return Ok(()),
            },
            None => Complex64::default(),
        };
        let (a, b) = (f.eval(&t, z), g.eval(&t, z));
        prop_assert!(close(f.add(&g).eval(&t, z), a + b));
        prop_assert!(close(f.mul(&g).eval(&t, z), a * b));
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn euler_on_homogeneous(f in terms(), which in 0usize..2) {
        let ring = &rings()[which];
        let parts: Vec<RingElem> = f.iter().map(|t| build(ring, std::slice::from_ref(t))).filter(|m| !m.is_zero()).collect();
        let Some(w) = parts.first().and_then(|m| m.weight()) else { return Ok(()) };
        let f = parts.iter().filter(|m| m.weight() == Some(w.clone())).fold(ring.zero(), |acc, m| acc.add(m));
        prop_assert!(f.is_homogeneous(&w));
        prop_assert_eq!(f.euler_apply(), f.scale(&w));
    }

    #[test]
    fn reduction_is_idempotent(f in terms()) {
        let ring = quartic_ring();
        let f = build(&ring, &f);
        prop_assert_eq!(&ring.reduce(f.numerator().clone()), f.numerator());
    }

    #[test]
    fn document_round_trip(f in terms(), g in terms()) {
        let ring = klein_ring();
        let pvf = PotentialVF::new("random", ring.clone(), vec![build(&ring, &f), build(&ring, &g), ring.var(2)]);
        let text = serialize_pvf(&pvf).to_json();
        prop_assert!(parse_pvf(&text).unwrap().structurally_eq(&pvf));
    }
}

fn nonzero_rational() -> impl Strategy<Value = Rational> {
    (prop_oneof![-5i64..=-1, 1i64..=5], 1i64..=4).prop_map(|(a, b)| rat(a, b))
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn rescaling_maps_solutions_to_solutions(c1 in nonzero_rational(), c2 in nonzero_rational()) {
        let klein = catalog_get("LT8").unwrap().potential().unwrap();
        let scaled = klein.rescaled(&[c1, c2, rat(1, 1)]).unwrap();
        prop_assert!(check_extended_wdvv(&scaled).is_solution());
    }

    #[test]
    fn tn_free_fields_are_not_logarithmic(f in terms(), g in terms(), h in terms()) {
        let klein = catalog_get("LT8").unwrap().potential().unwrap();
        let ring = klein.ring().clone();
        let d = discriminant(&build_saito_matrices(&klein)).unwrap();
        // drop t3 from every monomial
        let strip = |ts: &[Term]| -> Vec<Term> { ts.iter().map(|&(a, b, e, z)| (a, b, [e[0], e[1], 0], z)).collect() };
        let v: Vec<RingElem> = [f, g, h].iter().map(|t| build(&ring, &strip(t))).collect();
        prop_assume!(v.iter().any(|x| !x.is_zero()));
        prop_assert!(!is_logarithmic(&v, &d));
    }
}
