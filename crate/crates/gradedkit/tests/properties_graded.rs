//! Property tests for the graded algebra engine: canonicalization,
//! weight bookkeeping, square-zero soundness, and the graded Jacobi identity
//! for derivation commutators.

use gradedkit::exact::{q, Poly, Ring};
use gradedkit::graded::{
    check_square_zero, derivation_commutator, Derivation, GCAElement, GenTable, Generator,
    GeneratorKind,
};
use proptest::prelude::*;

fn table() -> GenTable {
    let r = Ring::new(vec!["x", "y"]);
    let gen = |name: &str, degree: i32| Generator {
        name: name.into(),
        degree,
        form_degree: 0,
        weight: 1,
        kind: GeneratorKind::DualBundle,
    };
    GenTable::new(&r, vec![gen("u", 1), gen("v", 1), gen("w", 2)]).unwrap()
}

fn arb_poly() -> impl Strategy<Value = Poly> {
    let monomial = (0u32..=2, 0u32..=2, -3i64..=3);
    prop::collection::vec(monomial, 0..3).prop_map(|monos| {
        let r = Ring::new(vec!["x", "y"]);
        let mut acc = r.zero();
        for (a, b, k) in monos {
            acc = acc.add(&r.var(0).pow(a).mul(&r.var(1).pow(b)).scale(&q(k)));
        }
        acc
    })
}

/// Random element: polynomial combination of generator words.
fn arb_elem() -> impl Strategy<Value = GCAElement> {
    let word = prop::collection::vec(0u16..3, 0..3);
    prop::collection::vec((word, arb_poly()), 0..4).prop_map(|terms| {
        let t = table();
        let mut acc = t.zero();
        for (w, c) in terms {
            acc.add_term(&w, &c);
        }
        acc
    })
}

/// Random homogeneous element of the given internal degree (generators only,
/// no form symbols here).
fn arb_homog(degree: i32) -> impl Strategy<Value = GCAElement> {
    arb_elem().prop_map(move |e| {
        let mut acc = e.table().zero();
        for ((d, f, w), comp) in e.components() {
            if d == degree && f == 0 {
                let _ = w;
                acc = acc.add(&comp);
            }
        }
        acc
    })
}

/// Random element homogeneous in both internal degree and weight.
fn arb_homog_w(degree: i32, weight: u32) -> impl Strategy<Value = GCAElement> {
    arb_elem().prop_map(move |e| {
        let mut acc = e.table().zero();
        for ((d, f, w), comp) in e.components() {
            if d == degree && f == 0 && w == weight {
                acc = acc.add(&comp);
            }
        }
        acc
    })
}

/// Random derivation of pure weight shift +1 (used for the weight test).
fn arb_weight_pure_derivation() -> impl Strategy<Value = Derivation> {
    (
        prop::collection::vec(arb_homog_w(2, 2), 2),
        arb_homog_w(3, 2),
        prop::collection::vec(arb_homog_w(1, 1), 2),
    )
        .prop_map(|(uv, w, base)| {
            let t = table();
            let mut d = Derivation::new(&t, 1, 0);
            d.set_value("u", uv[0].clone()).unwrap();
            d.set_value("v", uv[1].clone()).unwrap();
            d.set_value("w", w).unwrap();
            d.set_base("x", base[0].clone()).unwrap();
            d.set_base("y", base[1].clone()).unwrap();
            d
        })
}

/// Random odd derivation of internal degree +1 with polynomial-degree ≤ 2
/// generator values and base action.
fn arb_derivation() -> impl Strategy<Value = Derivation> {
    (
        prop::collection::vec(arb_homog(2), 2),
        arb_homog(3),
        prop::collection::vec(arb_homog(1), 2),
    )
        .prop_map(|(uv, w, base)| {
            let t = table();
            let mut d = Derivation::new(&t, 1, 0);
            d.set_value("u", uv[0].clone()).unwrap();
            d.set_value("v", uv[1].clone()).unwrap();
            d.set_value("w", w).unwrap();
            d.set_base("x", base[0].clone()).unwrap();
            d.set_base("y", base[1].clone()).unwrap();
            d
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graded_commutativity(a in arb_elem(), b in arb_elem()) {
        // Split into homogeneous pieces and check a·b = (−1)^{|a||b|} b·a.
        for (ka, ca) in a.components() {
            for (kb, cb) in b.components() {
                let ab = ca.mul(&cb);
                let ba = cb.mul(&ca);
                let flip = (ka.0 + ka.1 as i32) % 2 != 0 && (kb.0 + kb.1 as i32) % 2 != 0;
                if flip {
                    prop_assert_eq!(ab, ba.neg());
                } else {
                    prop_assert_eq!(ab, ba);
                }
            }
        }
    }

    #[test]
    fn associativity(a in arb_elem(), b in arb_elem(), c in arb_elem()) {
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
    }

    #[test]
    fn leibniz_rule(d in arb_derivation(), a in arb_elem(), b in arb_elem()) {
        let lhs = d.apply(&a.mul(&b));
        // D(ab) = D(a)b + (−1)^{|D||a|} a D(b), per homogeneous piece of a.
        let mut rhs = d.apply(&a).mul(&b);
        for (ka, ca) in a.components() {
            let mut t = ca.mul(&d.apply(&b));
            if d.is_odd() && (ka.0 + ka.1 as i32) % 2 != 0 {
                t = t.neg();
            }
            rhs = rhs.add(&t);
        }
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn derivation_weight_shift(d in arb_weight_pure_derivation(), a in arb_elem()) {
        // Every generator value has weight 2 = 1 + 1 and the base action
        // weight 1 = 0 + 1, so D shifts weight by exactly +1.
        for ((_, _, w_in), comp) in a.components() {
            for ((_, _, w_out), piece) in d.apply(&comp).components() {
                if !piece.is_zero() {
                    prop_assert_eq!(w_out, w_in + 1);
                }
            }
        }
    }

    #[test]
    fn square_zero_implies_nilpotent_on_elements(d in arb_derivation(), a in arb_elem()) {
        if check_square_zero(&d).unwrap().passed() {
            prop_assert!(d.apply(&d.apply(&a)).is_zero());
        }
    }

    #[test]
    fn graded_jacobi_for_commutators(
        d1 in arb_derivation(),
        d2 in arb_derivation(),
        d3 in arb_derivation(),
        a in arb_elem(),
    ) {
        // All three are odd, so the graded Jacobi identity reads
        // [D1,[D2,D3]] = [[D1,D2],D3] − [D2,[D1,D3]].
        let lhs = derivation_commutator(&d1, &derivation_commutator(&d2, &d3));
        let r1 = derivation_commutator(&derivation_commutator(&d1, &d2), &d3);
        let r2 = derivation_commutator(&d2, &derivation_commutator(&d1, &d3));
        let lv = lhs.apply(&a);
        let rv = r1.apply(&a).sub(&r2.apply(&a));
        prop_assert_eq!(lv, rv);
    }
}
