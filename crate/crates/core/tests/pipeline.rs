use geoweb_core::envelope::{envelope_of, family_from_web_function, verify_tangency, TangencyOptions};
use geoweb_core::euler::{EulerSpec, SolvedField};
use geoweb_core::expr::{parse, parse_univariate};
use geoweb_core::report::CheckOptions;
use geoweb_core::sampling::SamplePlan;
use geoweb_core::webcheck::hyperplanarity_check;

#[test]
fn solved_field_is_hyperplanar_and_its_family_is_tangent_to_the_envelope() {
    // f = x3 + f^2 x1 + f x2 has level sets C^2 x1 + C x2 + x3 - C = 0.
    let spec = EulerSpec::new(
        parse_univariate("t").unwrap(),
        vec![parse_univariate("t^2").unwrap(), parse_univariate("t").unwrap()],
        3,
    )
    .unwrap();
    let field = SolvedField::new(spec, 0.0);
    let plan = SamplePlan::new(vec![(0.05, 0.15); 3]).with_grid(5).with_random_points(20);
    let summary = hyperplanarity_check(&field, &plan, &CheckOptions::with_tolerance(1e-8));
    assert!(summary.pass, "{summary:?}");

    // The printed root of the same quadratic (other sign convention).
    let printed = parse("(1-x2-sqrt((x2-1)^2-4*x1*x3))/(2*x1)", 3).unwrap();
    for (p, s) in field.cached() {
        let want = printed.eval_at(&p).unwrap();
        assert!((s.value - want).abs() <= 1e-12 * want.abs().max(1.0), "{p:?}: {} vs {want}", s.value);
    }

    let family = family_from_web_function(&printed).unwrap();
    let env = envelope_of(&family).unwrap();
    let want = parse("x2^2 - 2*x2 + 1 - 4*x1*x3", 3).unwrap().expand_to_poly().unwrap();
    assert_eq!(env.normalized(), want.normalized());
    let report = verify_tangency(&family, &env, 3, 20, &TangencyOptions::default()).unwrap();
    assert!(report.pass, "{report:?}");
}
