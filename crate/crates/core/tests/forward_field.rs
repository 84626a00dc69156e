use mirm_core::forward::{
    density_equivalence, ferm_mc, Coefficient, CoefficientSpec, PathBundle, PathClaimSpec, StrategyFamily,
};

fn spec() -> CoefficientSpec {
    CoefficientSpec::constant(1.0, 0.2, 0.2, 16, 0.0625)
}

#[test]
fn spec_file_accepts_per_step_coefficients() {
    let text = r#"{"gamma": 2.0, "lambda": [0.1, 0.2, 0.3, 0.4], "sigma": 0.25, "n_steps": 4, "dt": 0.25}"#;
    let s = CoefficientSpec::from_json(text).unwrap();
    assert_eq!(s.lambda, Coefficient::PerStep(vec![0.1, 0.2, 0.3, 0.4]));
    assert!(s.is_plain());
    let short = r#"{"gamma": 2.0, "lambda": [0.1], "sigma": 0.25, "n_steps": 4, "dt": 0.25}"#;
    assert!(CoefficientSpec::from_json(short).and_then(|s| s.validate()).is_err());
}

#[test]
fn claim_kinds_parse() {
    for text in [
        r#"{"kind": "constant", "value": 1.5}"#,
        r#"{"kind": "capped_call", "maturity": 0.5, "strike": 1.0, "cap": 0.3}"#,
        r#"{"kind": "factor_digital", "maturity": 0.25, "level": 0.0}"#,
        r#"{"kind": "mixed", "maturity": 0.75, "a": 1.0, "b": -0.5}"#,
    ] {
        PathClaimSpec::from_json(text).unwrap().build().unwrap();
    }
    assert!(PathClaimSpec::from_json(r#"{"kind": "swaption"}"#).is_err());
}

#[test]
fn bundle_is_independent_of_thread_scheduling() {
    let a = PathBundle::simulate(&spec(), 500, 3).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| PathBundle::simulate(&spec(), 500, 3).unwrap());
    for i in [0, 17, 499] {
        assert_eq!(a.path(i).s, b.path(i).s);
        assert_eq!(a.path(i).y, b.path(i).y);
    }
}

#[test]
fn larger_risk_aversion_raises_risk_of_a_risky_claim() {
    let claim = PathClaimSpec::CappedCall { maturity: 0.5, strike: 1.0, cap: 0.5 }.build().unwrap();
    let fam = StrategyFamily::default();
    let lo = ferm_mc(&spec(), &claim, 0.5, &fam, 20_000, 1).unwrap();
    let mut hi_spec = spec();
    hi_spec.gamma = 4.0;
    let hi = ferm_mc(&hi_spec, &claim, 0.5, &fam, 20_000, 1).unwrap();
    assert!(hi.value > lo.value + 3.0 * lo.std_error.hypot(hi.std_error), "{lo:?} {hi:?}");
}

#[test]
fn density_weighting_needs_no_discount_drift() {
    let mut s = spec();
    s.delta = Coefficient::Scalar(0.1);
    let claim = PathClaimSpec::FactorDigital { maturity: 0.5, level: 0.0 }.build().unwrap();
    assert!(density_equivalence(&s, &claim, 0.5, &StrategyFamily::default(), 1000, 1).is_err());
}
