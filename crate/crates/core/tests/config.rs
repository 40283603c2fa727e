use comanip_core::config::MatrixSpec;
use comanip_core::{scenarios, Error, ScenarioConfig};
use proptest::prelude::*;

proptest! {
    #[test]
    fn canned_configs_round_trip(idx in 0..scenarios::NAMES.len(), seed in any::<u64>(), lambda in 0.1..10.0f64) {
        let mut cfg = scenarios::by_name(scenarios::NAMES[idx], seed).unwrap();
        cfg.gains.lambda = lambda;
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}

#[test]
fn negative_step_names_the_field() {
    let mut cfg = scenarios::se3_nominal(0);
    cfg.step = -1e-2;
    match cfg.build() {
        Err(Error::Config { field, .. }) => assert_eq!(field, "step"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn wrong_gain_shape_names_the_field() {
    let mut cfg = scenarios::se3_nominal(0);
    cfg.gains.k_d = MatrixSpec::Diagonal(vec![1.0; 5]);
    let err = cfg.build().unwrap_err();
    assert!(err.to_string().contains("gains.k_d"), "{err}");
}

#[test]
fn unknown_keys_are_rejected_with_location() {
    let text = scenarios::se3_nominal(0).to_toml().replacen("duration", "duraton", 1);
    let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
    assert!(err.contains("duraton") && err.contains("line"), "{err}");
}
