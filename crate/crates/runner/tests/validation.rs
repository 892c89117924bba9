use rfzo_runner::config::{example_configs, has_errors};
use rfzo_runner::{validate_config, ExperimentConfig, Severity};

fn parse(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn example_configs_validate_cleanly() {
    for (name, _, cfg) in example_configs() {
        assert!(validate_config(&cfg).is_empty(), "{name}: {:?}", validate_config(&cfg));
    }
}

#[test]
fn short_horizon_under_the_lipschitz_schedule_warns() {
    let cfg = parse(
        r#"{"problem": {"kind": "drifting_quadratic", "dim": 3, "drift_rate": 0.01},
            "estimators": ["residual"],
            "schedule": {"kind": "theorem", "theorem": "convex_lipschitz", "radius": 2.0, "q": 1.0},
            "horizon": 1, "trials": 1}"#,
    );
    let d = validate_config(&cfg);
    assert!(!has_errors(&d));
    assert!(d
        .iter()
        .any(|d| d.severity == Severity::Warning && d.field == "horizon" && d.message.contains("minimum horizon")));
}

#[test]
fn sphere_variant_without_radii_is_an_error() {
    let cfg = parse(
        r#"{"problem": {"kind": "drifting_quadratic", "dim": 3, "drift_rate": 0.01},
            "estimators": ["residual_sphere"],
            "schedule": {"kind": "explicit", "eta": 0.01, "delta": 0.1},
            "horizon": 10, "trials": 1}"#,
    );
    assert!(has_errors(&validate_config(&cfg)));
}

#[test]
fn sphere_variant_with_too_small_shrink_is_an_error() {
    let cfg = parse(
        r#"{"problem": {"kind": "drifting_quadratic", "dim": 3, "drift_rate": 0.01},
            "set": {"kind": "ball", "center": [0, 0, 0], "radius": 1.0, "inner_radius": 1.0, "outer_radius": 1.0},
            "estimators": ["residual_sphere"],
            "schedule": {"kind": "explicit", "eta": 0.01, "delta": 0.1, "xi": 0.01},
            "horizon": 10, "trials": 1}"#,
    );
    assert!(has_errors(&validate_config(&cfg)));
}

#[test]
fn structural_problems_are_errors() {
    let cfg = parse(
        r#"{"problem": {"kind": "drifting_quadratic", "dim": 3, "drift_rate": 0.01},
            "estimators": [],
            "schedule": {"kind": "explicit", "eta": 0.01, "delta": 0.1},
            "x0": [1.0, 2.0],
            "horizon": 0, "trials": 0}"#,
    );
    let d = validate_config(&cfg);
    for field in ["trials", "horizon", "estimators", "x0"] {
        assert!(
            d.iter()
                .any(|d| d.severity == Severity::Error && d.field.starts_with(field)),
            "{field}: {d:?}"
        );
    }
}

#[test]
fn unknown_fields_and_seed_overrides_are_rejected() {
    assert!(ExperimentConfig::from_json(
        r#"{"problem": {"kind": "constant", "dim": 1, "value": 0.0}, "estimators": ["residual"],
            "schedule": {"kind": "explicit", "eta": 0.1, "delta": 0.1}, "horizon": 1, "trials": 1, "extra": 1}"#
    )
    .is_err());
    let cfg = parse(
        r#"{"problem": {"kind": "lqr", "overrides": {"seed": 4}}, "estimators": ["residual"],
            "schedule": {"kind": "explicit", "eta": 0.1, "delta": 0.1}, "horizon": 1, "trials": 1}"#,
    );
    assert!(has_errors(&validate_config(&cfg)));
    let cfg = parse(
        r#"{"problem": {"kind": "lqr", "overrides": {"n_x": 2, "n_u": 1}}, "estimators": ["residual"],
            "schedule": {"kind": "explicit", "eta": 0.1, "delta": 0.1}, "horizon": 1, "trials": 1}"#,
    );
    assert!(validate_config(&cfg).is_empty());
}
