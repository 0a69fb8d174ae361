use loadcnn::cost::{co2_emissions, energy_consumption, CostParams, CostReport};
use loadcnn::metrics::{mae, nrmse, rmse};
use proptest::prelude::*;

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..200).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..5.0, n),
            prop::collection::vec(0.0f64..5.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rmse_dominates_mae((a, p) in pairs()) {
        let (r, m) = (rmse(&a, &p).unwrap(), mae(&a, &p).unwrap());
        prop_assert!(r >= m - 1e-12);
        prop_assert!(m >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn zero_iff_equal((a, p) in pairs()) {
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(mae(&a, &a).unwrap(), 0.0);
        if a != p {
            prop_assert!(rmse(&a, &p).unwrap() > 0.0);
            prop_assert!(mae(&a, &p).unwrap() > 0.0);
        }
    }

    #[test]
    fn nrmse_is_scale_invariant((a, p) in pairs(), c in 0.01f64..100.0) {
        prop_assume!(a.iter().cloned().fold(f64::MIN, f64::max) > a.iter().cloned().fold(f64::MAX, f64::min));
        let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
        let sp: Vec<f64> = p.iter().map(|v| v * c).collect();
        let (x, y) = (nrmse(&a, &p).unwrap(), nrmse(&sa, &sp).unwrap());
        prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
    }

    #[test]
    fn mae_is_translation_invariant((a, p) in pairs(), c in -10.0f64..10.0) {
        let ta: Vec<f64> = a.iter().map(|v| v + c).collect();
        let tp: Vec<f64> = p.iter().map(|v| v + c).collect();
        prop_assert!((mae(&a, &p).unwrap() - mae(&ta, &tp).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn energy_is_linear_in_each_input(
        power in 1.0f64..500.0, hours in 0.01f64..200.0, pue in 1.0f64..3.0, trials in 1u64..5000,
    ) {
        let base = CostParams { power_watts: power, training_hours: hours, pue, trials };
        let e = energy_consumption(&base).unwrap();
        let doubled = [
            CostParams { power_watts: 2.0 * power, ..base.clone() },
            CostParams { training_hours: 2.0 * hours, ..base.clone() },
            CostParams { pue: 2.0 * pue, ..base.clone() },
            CostParams { trials: 2 * trials, ..base.clone() },
        ];
        for d in doubled {
            let e2 = energy_consumption(&d).unwrap();
            prop_assert!((e2 - 2.0 * e).abs() <= 1e-9 * e);
        }
        let r = CostReport::compute(base).unwrap();
        prop_assert!((r.co2e_lbs / r.ec_kwh - 0.954).abs() <= 1e-15);
        prop_assert_eq!(r.co2e_lbs, co2_emissions(r.ec_kwh).unwrap());
    }
}

#[test]
fn single_trial_is_a_thousandth() {
    let full = CostReport::compute(CostParams::new(80.2228, 2.85)).unwrap();
    let mut one = CostParams::new(80.2228, 2.85);
    one.trials = 1;
    let one = CostReport::compute(one).unwrap();
    assert!((one.ec_kwh * 1000.0 - full.ec_kwh).abs() < 1e-9);
    assert!((one.co2e_lbs * 1000.0 - full.co2e_lbs).abs() < 1e-9);
}
