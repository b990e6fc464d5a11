use heightgap::freeword::Word;
use heightgap::heights::{exact_product_set, height_element, height_matrix, normalized_height_bracket, MatrixOverK};
use heightgap::input::parse_input;
use heightgap::numfield::{FieldElement, NumberField};
use num_rational::BigRational;
use proptest::prelude::*;

fn fields() -> Vec<NumberField> {
    [vec![0, 1], vec![1, 0, 1], vec![-2, 0, 1], vec![-2, 0, 0, 1], vec![1, 1, 1, 1, 1]]
        .iter()
        .map(|c| NumberField::from_ints(c).unwrap())
        .collect()
}

fn arb_element() -> impl Strategy<Value = FieldElement> {
    (0usize..5, prop::collection::vec((-25i64..25, 1i64..20), 4)).prop_filter_map("nonzero", |(i, c)| {
        let k = fields().swap_remove(i);
        let coeffs = c[..k.degree()]
            .iter()
            .map(|&(n, d)| BigRational::new(n.into(), d.into()))
            .collect();
        let x = k.element(coeffs).unwrap();
        (!x.is_zero()).then_some(x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_formula_exact(x in arb_element()) {
        let r = x.field().product_formula_check(&x).unwrap();
        prop_assert!(r.exact_defect_is_zero);
        prop_assert!(r.numeric_defect.unwrap().abs() < 1e-8);
    }

    #[test]
    fn height_inverse_and_powers(x in arb_element(), n in 1i64..4) {
        let h = height_element(&x).unwrap();
        let hi = height_element(&x.inverse().unwrap()).unwrap();
        prop_assert!((h - hi).abs() < 1e-9, "{} vs {}", h, hi);
        let hn = height_element(&x.pow(n).unwrap()).unwrap();
        prop_assert!((hn - n as f64 * h).abs() < 1e-8 * (1.0 + hn));
    }

    #[test]
    fn height_of_product_subadditive(x in arb_element(), y in arb_element()) {
        prop_assume!(x.field() == y.field());
        let hxy = height_element(&(&x * &y)).unwrap();
        prop_assert!(hxy <= height_element(&x).unwrap() + height_element(&y).unwrap() + 1e-9);
    }

    /// Integral members stay integral under products, so no prime outside
    /// the denominators of the inputs can contribute to the bracket.
    #[test]
    fn integral_sets_have_no_finite_places(e in prop::collection::vec(-3i64..4, 8)) {
        let k = NumberField::from_ints(&[-2, 0, 1]).unwrap();
        let r2 = k.generator();
        let m = |v: &[i64]| {
            MatrixOverK::new(&k, 2, v.iter().enumerate().map(|(i, &a)| {
                let a = k.from_int(a);
                if i == 1 { &a * &r2 } else { a }
            }).collect()).unwrap()
        };
        let f = vec![m(&e[..4]), m(&e[4..])];
        for p in exact_product_set(&f, 3, 1 << 10).unwrap() {
            prop_assert!(p.denominator_primes().unwrap().is_empty());
            prop_assert_eq!(height_matrix(&p, 53).unwrap().nonarch_sum, 0.0);
        }
    }
}

#[test]
fn bracket_never_inverts_on_input_document() {
    let doc = r#"{
      "schema": 1,
      "field": [-2, 0, 1],
      "d": 2,
      "matrices": [
        {"name": "A", "entries": [["1/2", [0, 1]], [0, 2]]},
        {"name": "B", "entries": [[1, 0], [[1, 1], 1]]}
      ]
    }"#;
    let spec = parse_input(doc).unwrap();
    let f = spec.matrix_set();
    let b = normalized_height_bracket(&f, 5, 1 << 12, 53).unwrap();
    assert!(b.estimate.lower <= b.estimate.upper + 1e-9);
    let h = heightgap::heights::height_set(&f, 53).unwrap();
    assert!(h + 1e-9 >= b.estimate.upper);
    // the 2-adic place sees the eigenvalue 1/2 of A
    assert!(b.rows[0].lower > 0.0);
}

#[test]
fn word_round_trip_through_text() {
    for text in ["xyXY", "xxYxY", "1", "yXyyx"] {
        let w = Word::parse(text, 2).unwrap();
        assert_eq!(Word::parse(&w.to_string(), 2).unwrap(), w);
    }
}
