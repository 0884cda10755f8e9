use proptest::prelude::*;

use geoweb_core::expr::{parse, parse_univariate, Expr};
use geoweb_core::field::{ScalarField, WebFunction};
use geoweb_core::webcheck::{flex, flex_terms};

/// Expression text over `x1..x3` built from a small grammar; radicands and
/// denominators stay positive on `[0.5, 1.5]^3`.
fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (1..=3usize).prop_map(|k| format!("x{k}")),
        (-5..=5i32).prop_map(|c| format!("({c})")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}+{b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}-{b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}*{b})")),
            (inner.clone(), 1..=3u32).prop_map(|(a, e)| format!("({a})^{e}")),
            inner.clone().prop_map(|a| format!("sqrt(2+({a})^2)")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a})/(1+({b})^2)")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5..1.5f64, 3)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flex_vanishes_on_diagonal_and_is_symmetric(text in expression(), p in point()) {
        let f = parse(&text, 3).unwrap();
        for i in 0..3 {
            prop_assert_eq!(flex(&f, i, i, &p).unwrap(), 0.0);
            for j in 0..3 {
                prop_assert_eq!(flex(&f, i, j, &p).unwrap(), flex(&f, j, i, &p).unwrap());
            }
        }
    }

    #[test]
    fn display_round_trips(text in expression(), p in point()) {
        let f = parse(&text, 3).unwrap();
        let again = parse(&f.to_string(), 3).unwrap();
        let (a, b) = (f.eval_at(&p).unwrap(), again.eval_at(&p).unwrap());
        prop_assert!(close(a, b, 1e-12), "{} -> {}: {} vs {}", text, f, a, b);
    }

    #[test]
    fn gradient_matches_central_differences(text in expression(), p in point()) {
        let f = parse(&text, 3).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let d = f.diff_x(k).eval_at(&p).unwrap();
            let mut up = p.clone();
            let mut down = p.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (f.eval_at(&up).unwrap() - f.eval_at(&down).unwrap()) / (2.0 * h);
            let scale = f.eval_at(&p).unwrap().abs().max(1.0);
            prop_assert!((d - fd).abs() <= 1e-5 * scale.max(d.abs()), "{}: d/dx{} = {} vs {}", text, k + 1, d, fd);
        }
    }

    #[test]
    fn expansion_preserves_values(text in expression(), p in point()) {
        let f = parse(&text, 3).unwrap();
        if f.has_sqrt() || text.contains('/') {
            return Ok(());
        }
        let poly = f.expand_to_poly().unwrap();
        prop_assert!(close(poly.eval(&p, 0.0), f.eval_at(&p).unwrap(), 1e-10));
    }

    #[test]
    fn expansion_is_a_ring_homomorphism(a in expression(), b in expression()) {
        let (ea, eb) = (parse(&a, 3).unwrap(), parse(&b, 3).unwrap());
        if ea.has_sqrt() || eb.has_sqrt() || a.contains('/') || b.contains('/') {
            return Ok(());
        }
        let (pa, pb) = (ea.expand_to_poly().unwrap(), eb.expand_to_poly().unwrap());
        let sum = (&ea + &eb).expand_to_poly().unwrap();
        let product = (&ea * &eb).expand_to_poly().unwrap();
        prop_assert_eq!(sum, &pa + &pb);
        prop_assert_eq!(product, &pa * &pb);
    }

    #[test]
    fn flex_transforms_by_cube_of_derivative(text in expression(), p in point(), which in 0..3usize) {
        let f = parse(&text, 3).unwrap();
        let (phi, dphi) = [("t^2", "2*t"), ("t^3+t", "3*t^2+1"), ("2*t-7", "2")][which];
        let phi = parse_univariate(phi).unwrap();
        let dphi = parse_univariate(dphi).unwrap();
        let composed = WebFunction::new(phi.compose(&f), 3);
        let base = WebFunction::new(f.clone(), 3);
        let fv = f.eval_at(&p).unwrap();
        let k = dphi.eval_at(&[fv]).unwrap().powi(3);
        let (jc, jb) = (composed.jet(&p).unwrap(), base.jet(&p).unwrap());
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let (lhs, s1) = flex_terms(&jc, i, j);
            let (rhs, s2) = flex_terms(&jb, i, j);
            let scale = s1.max(s2 * k.abs()).max(1.0);
            prop_assert!((lhs - k * rhs).abs() <= 1e-9 * scale, "{}: {} vs {}", text, lhs, k * rhs);
        }
    }
}

#[test]
fn affine_functions_have_zero_flex() {
    let f: Expr = parse("3*x1 - 2*x2 + x3/4 + 5", 3).unwrap();
    for p in [[0.1, 0.2, 0.3], [-4.0, 2.0, 9.0]] {
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(flex(&f, i, j, &p).unwrap(), 0.0);
        }
    }
}
