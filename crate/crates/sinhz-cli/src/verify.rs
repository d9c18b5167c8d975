use std::f64::consts::PI;

use num_complex::Complex64;
use sinhz::contours::ZContourShape;
use sinhz::levelcurves::{build_extended_curve, trace_trajectory};
use sinhz::levy::{phi_eval, KoBoLParams, LevyModel, NtsParams};
use sinhz::oracles::{
    oracle_barrier_induction, oracle_european_direct, oracle_hardy_numeric, oracle_zinv_series_ln, SeriesFamily,
};
use sinhz::payoffs::PayoffTransform;
use sinhz::pricing::{price_barrier, price_european_nonsymmetric, price_european_symmetric, PricingRequest};
use sinhz::wh::{wh_minus, wh_plus, WHContext};
use sinhz::zinv::{auto_m, choose_sinh_params, gain_factor, invert_sinh_scaled, BoundKind, TransformEvaluator};

use crate::output::{csv_table, num};
use crate::CliError;

pub const SUITES: [&str; 7] = ["gain", "hardy", "wh-identity", "zinv", "european", "barrier", "levelcurves"];
pub const VERIFY_HEADER: [&str; 5] = ["suite", "check", "value", "limit", "status"];

struct Check {
    suite: &'static str,
    name: String,
    value: f64,
    limit: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value <= self.limit
    }
}

type Out = Vec<Check>;

fn push(out: &mut Out, suite: &'static str, name: impl Into<String>, value: sinhz::Result<f64>, limit: f64) {
    // an engine error counts as a failed check
    let value = value.unwrap_or(f64::NAN);
    out.push(Check { suite, name: name.into(), value, limit });
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn kobol() -> LevyModel {
    LevyModel::kobol(KoBoLParams::symmetric_order(0.1, 0.5, -8.0, 8.0)).unwrap()
}

fn nig(delta_s: f64) -> LevyModel {
    LevyModel::nts(NtsParams { delta_s, alpha_s: 2.0, beta_s: 0.5, nu_s: 1.0, mu: 0.0 }).unwrap()
}

/// Runs one suite (or `all`) and renders the report as CSV.
pub fn run(suite: &str) -> Result<String, CliError> {
    let selected: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => {
            return Err(CliError::Config(format!(
                "unknown suite '{other}' (expected one of {}, all)",
                SUITES.join(", ")
            )))
        }
    };
    let mut out = Vec::new();
    for s in selected {
        match s {
            "gain" => gain(&mut out),
            "hardy" => hardy(&mut out),
            "wh-identity" => wh_identity(&mut out),
            "zinv" => zinv(&mut out),
            "european" => european(&mut out),
            "barrier" => barrier(&mut out),
            "levelcurves" => levelcurves(&mut out),
            _ => unreachable!(),
        }
    }
    let rows: Vec<Vec<String>> = out
        .iter()
        .map(|c| {
            let status = if c.passed() { "pass" } else { "fail" };
            vec![c.suite.to_string(), c.name.clone(), num(c.value), num(c.limit), status.to_string()]
        })
        .collect();
    Ok(csv_table(&VERIFY_HEADER, &rows))
}

fn gain(out: &mut Out) {
    for (n, expect, tol) in [(1260, 13.7, 0.5), (3780, 32.0, 1.0), (7560, 57.0, 1.0)] {
        let k = gain_factor(1e-15, n, 23.0).map(|k| (k - expect).abs());
        push(out, "gain", format!("K(n={n}, M=23) - {expect}"), k, tol);
    }
}

/// `∫|1 − re^{iφ}|^{−1}dφ = 4K(k)/(1 + r)` with `k = 2√r/(1 + r)`, through the
/// AGM of `1` and the complementary modulus `(1 − r)/(1 + r)`.
fn hardy_closed_form(r: f64) -> f64 {
    let (mut a, mut b) = (1.0, (1.0 - r) / (1.0 + r));
    for _ in 0..40 {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    4.0 * (PI / (2.0 * a)) / (1.0 + r)
}

fn hardy(out: &mut Out) {
    push(out, "hardy", "H(0) - 2π", oracle_hardy_numeric(0.0).map(|h| (h - 2.0 * PI).abs()), 1e-12);
    let radii = [0.0, 0.5, 0.9, 0.99, 0.999_999];
    let hs: sinhz::Result<Vec<f64>> = radii.iter().map(|&r| oracle_hardy_numeric(r)).collect();
    let decreases = hs.map(|h| h.windows(2).filter(|w| w[1] < w[0]).count() as f64);
    push(out, "hardy", "decreasing steps on [0, 1)", decreases, 0.0);
    for r in [0.5, 0.99, 0.999_999] {
        let e = oracle_hardy_numeric(r).map(|h| rel(h, hardy_closed_form(r)));
        push(out, "hardy", format!("H({r}) vs elliptic closed form"), e, 1e-9);
    }
    let r = 1.0 - 1e-6;
    let e = oracle_hardy_numeric(r).map(|h| rel(h, 2.0 * (8.0 / (1.0 - r)).ln()));
    push(out, "hardy", "H(1-1e-6) vs 2 ln(8/(1-r))", e, 1e-3);
}

fn wh_identity(out: &mut Out) {
    let qs = [
        Complex64::new(0.1, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.9, 0.0),
        Complex64::new(0.3, 0.3),
    ];
    for (name, m, lo, hi, c) in [("kobol", kobol(), -0.3, 0.4, 0.05), ("nig", nig(1.0), 0.2, 0.8, 0.5)] {
        let worst = (|| {
            let mut worst = 0.0f64;
            for q in qs {
                let ctx = WHContext::new(&m, q, lo, hi, 1e-12)?;
                for k in 0..41 {
                    let xi = Complex64::new(-10.0 + 0.5 * k as f64, c);
                    let lhs = wh_plus(&ctx, xi)? * wh_minus(&ctx, xi)?;
                    let rhs = (1.0 - q) / (1.0 - q * phi_eval(&m, xi)?);
                    worst = worst.max((lhs - rhs).norm());
                }
            }
            Ok(worst)
        })();
        push(out, "wh-identity", format!("{name}: max |φ⁺φ⁻ - (1-q)/(1-qΦ)|"), worst, 1e-9);
    }
}

fn zinv(out: &mut Out) {
    let eps = 1e-13;
    for n in [10usize, 100, 1260, 3780] {
        let families = [
            ("geometric 1/2", SeriesFamily::Geometric { ratio: 0.5 }),
            ("pole at one", SeriesFamily::PoleAtOne),
            ("two poles", SeriesFamily::TwoPoles { ratio: 1.0 / 3.0 }),
            ("entire", SeriesFamily::Exponential { rate: n as f64 }),
        ];
        for (name, fam) in families {
            let e = zinv_rel_error(fam, n, eps);
            push(out, "zinv", format!("{name}, n={n}"), e, 1e-12);
        }
    }
}

/// Relative error of the auto-planned sinh inversion for a curated family.
pub fn zinv_rel_error(fam: SeriesFamily, n: usize, eps: f64) -> sinhz::Result<f64> {
    let v = match fam {
        SeriesFamily::Geometric { ratio } => {
            TransformEvaluator::new(|q| 1.0 / (1.0 - q), 0.0, 1.0, 0.0, BoundKind::PoleAtOne)?
                .with_scaling(1.0 / ratio, 0.0)
        }
        SeriesFamily::PoleAtOne => TransformEvaluator::new(|q| 1.0 / (1.0 - q), 0.0, 1.0, 0.0, BoundKind::PoleAtOne)?,
        SeriesFamily::TwoPoles { ratio } => TransformEvaluator::new(
            move |q| fam.eval(q),
            0.0,
            1.0 / (1.0 - ratio),
            0.0,
            BoundKind::PoleAtOne,
        )?,
        SeriesFamily::Exponential { .. } => {
            TransformEvaluator::new(move |q| fam.eval(q), 0.0, 1.0, 0.0, BoundKind::Generic)?
                .with_shape(ZContourShape::LeftLeaning)
        }
    };
    let plan = choose_sinh_params(&v, eps, n, auto_m(eps))?;
    let s = invert_sinh_scaled(&v, n, &plan)?;
    let (l, sign) = oracle_zinv_series_ln(fam, n);
    Ok((s.mantissa * (s.log_scale - l).exp() * sign - 1.0).norm())
}

fn european(out: &mut Out) {
    let put = PayoffTransform::put(1.0, -0.5).unwrap();
    let dig = PayoffTransform::digital_up(0.05, 0.5).unwrap();
    for (name, pay) in [("put", &put), ("digital", &dig)] {
        let req = PricingRequest::new(kobol(), pay.clone(), 12, 1.0, 0.0, 1e-10);
        let e = price_european_symmetric(&req)
            .and_then(|r| Ok(rel(r.price, oracle_european_direct(&kobol(), pay, 12, 1.0, 0.0, 1e-14)?)));
        push(out, "european", format!("symmetric kobol {name}, n=12"), e, 1e-8);
    }
    let m = nig(0.02);
    let req = PricingRequest::new(m.clone(), put.clone(), 12, 1.0, 0.0, 1e-10);
    let e = price_european_nonsymmetric(&req)
        .and_then(|r| Ok(rel(r.price, oracle_european_direct(&m, &put, 12, 1.0, 0.0, 1e-14)?)));
    push(out, "european", "level-curve nig put, n=12", e, 1e-6);
}

fn barrier(out: &mut Out) {
    let dig = PayoffTransform::digital_up(0.05, 0.5).unwrap();
    let req = PricingRequest::new(kobol(), dig.clone(), 8, 1.0, 0.0, 1e-8);
    let e = price_barrier(&req.clone().with_barrier(0.3)).and_then(|r| {
        let o = oracle_barrier_induction(&kobol(), &dig, 8, 1.0, &[0.0], 0.3, 1e-5)?;
        Ok(rel(r.price, o.values[0]))
    });
    push(out, "barrier", "kobol digital h=0.3, n=8 vs induction", e, 1e-4);
    let e = price_barrier(&req.clone().with_barrier(60.0))
        .and_then(|r| Ok(rel(r.price, price_european_symmetric(&req)?.price)));
    push(out, "barrier", "h=60 vs european", e, 1e-6);
}

fn levelcurves(out: &mut Out) {
    let q = LevyModel::quadratic(1.0, 0.0).unwrap();
    let e = trace_trajectory(&q, Complex64::new(0.5, 0.3), 0.3, 50.0, 1e-12)
        .map(|pts| pts.iter().map(|p| (p.y - 0.15 / p.x).abs()).fold(0.0, f64::max));
    push(out, "levelcurves", "quadratic: max |y - δ/(2ax)|", e, 1e-10);
    let e = build_extended_curve(&kobol(), 0.05, 0.0, 1e3)
        .map(|c| c.max_traced_residual());
    push(out, "levelcurves", "kobol: max |Im ψ - δ|", e, 1e-9);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_hardy_limits() {
        assert!((hardy_closed_form(0.0) - 2.0 * PI).abs() < 1e-14);
        assert!((hardy_closed_form(0.5) - oracle_hardy_numeric(0.5).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(run("nope"), Err(CliError::Config(_))));
    }
}
