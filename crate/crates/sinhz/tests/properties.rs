use num_complex::Complex64;
use proptest::prelude::*;
use sinhz::contours::build_z_contour;
use sinhz::levy::{esscher, phi_eval, EsscherShift, KoBoLParams, LevyModel, NtsParams};
use sinhz::oracles::{oracle_zinv_series_ln, SeriesFamily};
use sinhz::payoffs::{payoff_pointwise, PayoffTransform};
use sinhz::pricing::{price, PricingRequest};
use sinhz::wh::{wh_minus, wh_plus, WHContext};
use sinhz::zinv::{invert_auto, BoundKind, TransformEvaluator};

fn kobol() -> LevyModel {
    LevyModel::kobol(KoBoLParams::symmetric_order(0.1, 0.5, -8.0, 8.0)).unwrap()
}

fn nig() -> LevyModel {
    LevyModel::nts(NtsParams { delta_s: 0.5, alpha_s: 2.0, beta_s: 0.5, nu_s: 1.0, mu: 0.0 }).unwrap()
}

fn european(payoff: PayoffTransform, n: usize, q0: f64, x: f64) -> f64 {
    price(&PricingRequest::new(kobol(), payoff, n, q0, x, 1e-11)).unwrap().price
}

proptest! {
    #[test]
    fn strip_coordinate_inverts_the_contour(
        r_minus in 0.3f64..0.9,
        gap in 0.02f64..0.09,
        d in 0.1f64..0.6,
        t in -4.0f64..4.0,
        s in -0.95f64..0.95,
    ) {
        let c = build_z_contour(r_minus, r_minus + gap, -d, d).unwrap();
        let q = c.point(Complex64::new(t, s * d));
        prop_assert!((c.strip_coordinate(q) - s * d).abs() < 1e-9);
    }

    #[test]
    fn tilted_payoff_is_the_damped_payoff(
        strike in 0.5f64..2.0,
        theta in -0.4f64..0.4,
        x in -2.0f64..2.0,
    ) {
        let put = PayoffTransform::put(strike, -0.5).unwrap();
        let t = put.tilted(theta).unwrap();
        let expect = (-theta * x).exp() * payoff_pointwise(&put, x);
        prop_assert!((payoff_pointwise(&t, x) - expect).abs() < 1e-12 * (1.0 + expect));
    }

    #[test]
    fn esscher_shift_is_a_ratio_of_characteristic_functions(
        theta in -0.6f64..0.6,
        re in -20.0f64..20.0,
        im in -0.3f64..0.3,
    ) {
        let m = nig();
        let xi = Complex64::new(re, im);
        let shifted = esscher(&m, EsscherShift { beta: theta }).unwrap();
        let i_theta = Complex64::new(0.0, theta);
        let expect = phi_eval(&m, xi - i_theta).unwrap() / phi_eval(&m, -i_theta).unwrap();
        prop_assert!((phi_eval(&shifted, xi).unwrap() - expect).norm() < 1e-12);
        let back = esscher(&shifted, EsscherShift { beta: -theta }).unwrap();
        prop_assert!((phi_eval(&back, xi).unwrap() - phi_eval(&m, xi).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn geometric_coefficients_are_recovered(ratio in 0.2f64..0.9, n in 8usize..600) {
        let v = TransformEvaluator::new(|q| 1.0 / (1.0 - q), 0.0, 1.0, 0.0, BoundKind::PoleAtOne)
            .unwrap()
            .with_scaling(1.0 / ratio, 0.0);
        let s = invert_auto(&v, n, 1e-13).unwrap();
        let (l, _) = oracle_zinv_series_ln(SeriesFamily::Geometric { ratio }, n);
        prop_assert!((s.mantissa * (s.log_scale - l).exp() - 1.0).norm() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn wiener_hopf_factors_multiply_to_the_symbol(
        r in 0.05f64..0.9,
        arg in -1.0f64..1.0,
        re in -60.0f64..60.0,
    ) {
        let m = kobol();
        let q = Complex64::from_polar(r, arg);
        let ctx = WHContext::new(&m, q, -0.3, 0.4, 1e-12).unwrap();
        let xi = Complex64::new(re, 0.05);
        let lhs = wh_plus(&ctx, xi).unwrap() * wh_minus(&ctx, xi).unwrap();
        let rhs = (1.0 - q) / (1.0 - q * phi_eval(&m, xi).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn discounting_is_the_factor_q0_to_the_n(
        q0 in 0.9f64..1.0,
        n in 3usize..40,
        x in -0.3f64..0.3,
    ) {
        let put = PayoffTransform::put(1.0, -0.5).unwrap();
        let p1 = european(put.clone(), n, 1.0, x);
        let pq = european(put, n, q0, x);
        prop_assert!((pq - q0.powi(n as i32) * p1).abs() <= 1e-12 * p1.abs());
    }

    #[test]
    fn call_minus_put_is_the_forward(n in 3usize..40, x in -0.3f64..0.3, strike in 0.8f64..1.25) {
        let call = european(PayoffTransform::call(strike, 1.5).unwrap(), n, 1.0, x);
        let put = european(PayoffTransform::put(strike, -0.5).unwrap(), n, 1.0, x);
        let growth = phi_eval(&kobol(), Complex64::new(0.0, -1.0)).unwrap().re;
        let forward = x.exp() * growth.powi(n as i32) - strike;
        prop_assert!((call - put - forward).abs() < 1e-9, "{} vs {forward}", call - put);
    }

    #[test]
    fn digitals_up_and_down_sum_to_one(n in 3usize..40, x in -0.3f64..0.3, level in -0.2f64..0.2) {
        let up = european(PayoffTransform::digital_up(level, 0.5).unwrap(), n, 1.0, x);
        let down = european(PayoffTransform::digital_down(level, -0.5).unwrap(), n, 1.0, x);
        prop_assert!((up + down - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&up));
    }
}
