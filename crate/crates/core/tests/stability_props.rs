use heglab::stability::{
    DEFAULT_SIMULTANEOUS_WIN_PROB, GameClass, StabilityParams, ThresholdResult, classify_game,
    defector_payoff, is_stable, min_stable_pdoom, payoff_matrix, pwd_from_lead, pwd_threshold,
};
use proptest::prelude::*;

fn params(u_w: f64, p: f64, pwd: f64) -> StabilityParams {
    StabilityParams::new(u_w, p, pwd).unwrap()
}

proptest! {
    #[test]
    fn defector_payoff_is_the_product(u_w in 0.01f64..10.0, p in 0.0f64..=1.0, pwd in 0.0f64..=1.0) {
        let got = defector_payoff(&params(u_w, p, pwd));
        prop_assert!((got - u_w * (1.0 - p) * pwd).abs() <= 1e-12 * u_w.max(1.0));
    }

    #[test]
    fn threshold_separates_stable_from_unstable(u_w in 1.01f64..10.0, p in 0.0f64..0.99) {
        match pwd_threshold(u_w, p).unwrap() {
            ThresholdResult::Bounded(t) => {
                prop_assert!(t > 0.0 && t < 1.0);
                prop_assert!(is_stable(&params(u_w, p, t - 1e-9)));
                if t + 1e-9 <= 1.0 {
                    prop_assert!(!is_stable(&params(u_w, p, t + 1e-9)));
                }
            }
            ThresholdResult::Unconditional => {
                prop_assert!(u_w * (1.0 - p) <= 1.0 + 1e-12);
                prop_assert!(is_stable(&params(u_w, p, 1.0 - 1e-9)));
            }
        }
    }

    #[test]
    fn threshold_and_min_pdoom_invert(u_w in 1.01f64..10.0, p in 0.0f64..0.99) {
        if let ThresholdResult::Bounded(t) = pwd_threshold(u_w, p).unwrap() {
            let back = min_stable_pdoom(u_w, t).unwrap();
            prop_assert!((back - p).abs() <= 1e-9, "{back} vs {p}");
        }
    }

    #[test]
    fn stability_is_monotone(
        u_w in 0.1f64..5.0, du in 0.0f64..2.0,
        p in 0.0f64..=1.0, dp in 0.0f64..0.5,
        pwd in 0.0f64..=1.0, dw in 0.0f64..0.5,
    ) {
        let base = is_stable(&params(u_w, p, pwd));
        // more at stake, less doom, or a likelier win can only destabilize
        if !base {
            prop_assert!(!is_stable(&params(u_w + du, p, pwd)));
            prop_assert!(!is_stable(&params(u_w, (p - dp).max(0.0), pwd)));
            prop_assert!(!is_stable(&params(u_w, p, (pwd + dw).min(1.0))));
        } else {
            prop_assert!(is_stable(&params(u_w, (p + dp).min(1.0), pwd)));
            prop_assert!(is_stable(&params(u_w, p, (pwd - dw).max(0.0))));
        }
    }

    #[test]
    fn stag_hunt_iff_stable(u_w in 0.1f64..5.0, p in 0.0f64..0.999, pwd in 0.5f64..=1.0) {
        let s = params(u_w, p, pwd);
        // the weak equilibrium test and the strict stability test only
        // disagree exactly on the boundary
        prop_assume!((defector_payoff(&s) - 1.0).abs() > 1e-12);
        let class = classify_game(&payoff_matrix(&s, DEFAULT_SIMULTANEOUS_WIN_PROB).unwrap());
        prop_assert_eq!(class == GameClass::StagHunt, is_stable(&s));
        if !is_stable(&s) {
            prop_assert_eq!(class, GameClass::DefectionDominant);
        }
    }

    #[test]
    fn lead_mapping_is_monotone(race in 1u64..10_000, a in 0.0f64..=1.0, b in 0.0f64..=1.0, k in 0.1f64..20.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = pwd_from_lead((lo * race as f64) as u64, race, k).unwrap();
        let y = pwd_from_lead((hi * race as f64) as u64, race, k).unwrap();
        prop_assert!((0.5..=1.0).contains(&x));
        prop_assert!(x <= y);
    }
}

#[test]
fn lead_mapping_endpoints() {
    assert_eq!(pwd_from_lead(0, 100, 4.0).unwrap(), 0.5);
    assert!((pwd_from_lead(100, 100, 4.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(pwd_from_lead(101, 100, 4.0).is_err());
}

#[test]
fn out_of_range_inputs_are_rejected() {
    assert!(StabilityParams::new(1.5, 1.1, 0.5).is_err());
    assert!(StabilityParams::new(1.5, 0.1, -0.1).is_err());
    assert!(StabilityParams::new(f64::NAN, 0.1, 0.5).is_err());
    assert!(pwd_threshold(0.0, 0.1).is_err());
    assert!(min_stable_pdoom(2.0, 0.0).is_err());
}
