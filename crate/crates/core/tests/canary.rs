use comanip_core::checks::Battery;
use comanip_core::metrics::growth_ratios;
use comanip_core::regressors::{regressor_geometric, GeomRegressor};
use comanip_core::{run, scenarios, Pose, Wrench};

fn flipped_geometric(f: &Wrench, q: &Pose) -> GeomRegressor {
    -regressor_geometric(f, q)
}

fn transposed_geometric(f: &Wrench, q: &Pose) -> GeomRegressor {
    let mut y = regressor_geometric(f, q);
    let block = y.fixed_view::<3, 3>(3, 0).transpose();
    y.fixed_view_mut::<3, 3>(3, 0).copy_from(&block);
    y
}

#[test]
fn battery_passes_as_shipped() {
    for v in Battery::default().run() {
        assert!(v.passed, "{v}");
    }
}

#[test]
fn geometric_check_catches_a_sign_flip() {
    let battery = Battery {
        geometric: flipped_geometric,
        ..Battery::default()
    };
    assert!(!battery.geometric_regressor().passed);
}

#[test]
fn geometric_check_catches_a_transposed_block() {
    let battery = Battery {
        geometric: transposed_geometric,
        ..Battery::default()
    };
    assert!(!battery.geometric_regressor().passed);
}

#[test]
fn nominal_signals_stay_bounded() {
    for seed in 0..3 {
        let rec = run(&scenarios::se3_nominal(seed).build().unwrap()).unwrap();
        let (s, o, r) = growth_ratios(&rec);
        assert!(s < 10.0 && o < 10.0 && r < 10.0, "seed {seed}: {s} {o} {r}");
    }
}
