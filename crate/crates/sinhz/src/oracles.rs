//! Brute-force reference values.
//!
//! Everything here is slow and deliberately naive, and shares no quadrature
//! code with the engines it checks.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::payoffs::{payoff_pointwise, PayoffTransform};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `∫_{−π}^{π} |1 − r e^{iφ}|^{−1} dφ` by composite Simpson on panels graded
/// towards the peak at `φ = 0`.
pub fn oracle_hardy_numeric(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::param(format!("radius {r} not in [0, 1)")));
    }
    let f = |phi: f64| {
        let s = (0.5 * phi).sin();
        1.0 / ((1.0 - r) * (1.0 - r) + 4.0 * r * s * s).sqrt()
    };
    let mut edges = vec![0.0];
    let mut e = (1.0 - r).max(1e-12);
    while e < PI {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(PI);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 200;
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
        }
        total += s * h / 3.0;
    }
    Ok(2.0 * total)
}

/// Transforms with closed-form coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeriesFamily {
    /// `1/(1 − ρq)`.
    Geometric { ratio: f64 },
    /// `e^{λ(q − 1)}`; with `λ = n` the coefficient `Vₙ` is of order `n^{-1/2}`.
    Exponential { rate: f64 },
    /// `1/(1 − q)`.
    PoleAtOne,
    /// `1/((1 − q)(1 − ρq))`.
    TwoPoles { ratio: f64 },
}

impl SeriesFamily {
    pub fn eval(&self, q: Complex64) -> Complex64 {
        match *self {
            SeriesFamily::Geometric { ratio } => 1.0 / (1.0 - ratio * q),
            SeriesFamily::Exponential { rate } => (rate * (q - 1.0)).exp(),
            SeriesFamily::PoleAtOne => 1.0 / (1.0 - q),
            SeriesFamily::TwoPoles { ratio } => 1.0 / ((1.0 - q) * (1.0 - ratio * q)),
        }
    }
}

/// `ln |Vₙ|` and the sign of `Vₙ`, so that tiny coefficients stay representable.
pub fn oracle_zinv_series_ln(f: SeriesFamily, n: usize) -> (f64, f64) {
    match f {
        SeriesFamily::Geometric { ratio } => {
            let sign = if ratio < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            (n as f64 * ratio.abs().ln(), sign)
        }
        SeriesFamily::Exponential { rate } => {
            let (m, e) = exponential_coefficient(rate, n);
            (m.abs().ln() + e as f64 * std::f64::consts::LN_2, m.signum())
        }
        SeriesFamily::PoleAtOne => (0.0, 1.0),
        SeriesFamily::TwoPoles { ratio } => {
            // Cauchy product of the two geometric series
            let mut s = 0.0;
            let mut p = 1.0;
            for _ in 0..=n {
                s += p;
                p *= ratio;
            }
            (s.abs().ln(), s.signum())
        }
    }
}

/// `λⁿe^{−λ}/n!` as `m·2^e`: the factorial as a product rescaled by exact
/// powers of two, and `e^{−λ} = 2^{−j}e^{−r}` with `ln 2` split in two.
fn exponential_coefficient(rate: f64, n: usize) -> (f64, i64) {
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    let mut m = 1.0f64;
    let mut e = 0i64;
    let renorm = |m: &mut f64, e: &mut i64| {
        let k = m.abs().log2().floor() as i64;
        *m *= 2f64.powi(-k as i32);
        *e += k;
    };
    for k in 1..=n {
        m *= rate / k as f64;
        if !(1e-100..=1e100).contains(&m.abs()) {
            renorm(&mut m, &mut e);
        }
    }
    let j = (rate / std::f64::consts::LN_2).round();
    let r = (rate - j * LN2_HI) - j * LN2_LO;
    m *= (-r).exp();
    renorm(&mut m, &mut e);
    (m, e - j as i64)
}

pub fn oracle_zinv_series(f: SeriesFamily, n: usize) -> Complex64 {
    let (l, s) = oracle_zinv_series_ln(f, n);
    Complex64::new(s * l.exp(), 0.0)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let s = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss-Kronrod on `[a, b]` to absolute tolerance `tol`.
fn adaptive(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    let mut stack = vec![(a, b, tol)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut evals = 0usize;
    while let Some((lo, hi, t)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        evals += 1;
        if err <= t || (hi - lo) < 1e-12 * (1.0 + lo.abs()) {
            total += v;
        } else if evals > 200_000 {
            return Err(Error::numerical("oracle quadrature did not converge"));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t));
            stack.push((mid, hi, 0.5 * t));
        }
    }
    Ok(total)
}

/// `∫_0^∞ f` as adaptive panels `[0,1], [1,2], [2,4], …` until a panel is negligible.
fn half_line(f: &dyn Fn(f64) -> Complex64, tol: f64) -> Result<Complex64> {
    let mut total = adaptive(f, 0.0, 1.0, tol / 4.0)?;
    let (mut a, mut b) = (1.0, 2.0);
    let mut small = 0;
    while b < 1e9 {
        let part = adaptive(f, a, b, tol / 8.0)?;
        total += part;
        small = if part.norm() < tol * 1e-3 { small + 1 } else { 0 };
        if small >= 3 {
            return Ok(total);
        }
        a = b;
        b *= 2.0;
    }
    Err(Error::numerical("oracle integrand does not decay"))
}

/// `q₀ⁿ/(2π) ∫_{Im ξ = −β} e^{ixξ} Φ(ξ)ⁿ Ĝ(ξ) dξ` on the flat line.
pub fn oracle_european_direct(
    model: &LevyModel,
    payoff: &PayoffTransform,
    n: usize,
    q0: f64,
    x: f64,
    tol: f64,
) -> Result<f64> {
    if payoff.is_zero() {
        return Ok(0.0);
    }
    let line = -payoff.beta();
    let (lo, hi) = model.strip();
    if n > 0 && !(line > lo && line < hi) {
        return Err(Error::param("the payoff line lies outside the model strip"));
    }
    let disc = q0.powi(n as i32);
    let mut total = 0.0;
    for comp in payoff.components() {
        let y = x - comp.a;
        let v = if n == 0 {
            rotated_inverse(comp, line, y, tol)?
        } else {
            let f = |t: f64| {
                let xi = Complex64::new(t, line);
                let psi = model.psi_unchecked(xi);
                (I * y * xi - n as f64 * psi).exp() * comp.g0(xi)
            };
            2.0 * half_line(&f, tol * PI)?.re
        };
        total += v / (2.0 * PI);
    }
    Ok(disc * total)
}

// n = 0: both half-lines rotated by ±π/4 into the half-plane where e^{iyξ} decays.
fn rotated_inverse(comp: &crate::payoffs::PayoffComponent, line: f64, y: f64, tol: f64) -> Result<f64> {
    let theta = if y >= 0.0 { PI / 4.0 } else { -PI / 4.0 };
    let (er, el) = (Complex64::from_polar(1.0, theta), -Complex64::from_polar(1.0, -theta));
    let z0 = Complex64::new(0.0, line);
    let between = |ang: f64, lim: f64| ang > lim.min(0.0) - 1e-12 && ang < lim.max(0.0) + 1e-12;
    for t in &comp.poles {
        let d = t.p - z0;
        if between(d.arg(), theta) || between((-d).arg(), -theta) {
            return Err(Error::unsupported("payoff pole inside the rotation sector"));
        }
    }
    let f = |s: f64| {
        let a = z0 + s * er;
        let b = z0 + s * el;
        (I * y * a).exp() * comp.g0(a) * er - (I * y * b).exp() * comp.g0(b) * el
    };
    Ok(half_line(&f, tol * PI)?.re)
}

/// Grid values of an up-and-out claim with the estimated discretization error.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierGrid {
    pub values: Vec<f64>,
    pub error_estimate: f64,
}

/// Backward induction `V_{k+1} = q₀ 1_{(−∞,h)} P V_k` on a uniform grid, with
/// `P` applied through the exact integrals of the one-period law against
/// piecewise-linear hats, then Richardson extrapolation over two grids.
pub fn oracle_barrier_induction(
    model: &LevyModel,
    payoff: &PayoffTransform,
    n: usize,
    q0: f64,
    x_grid: &[f64],
    h: f64,
    tol: f64,
) -> Result<BarrierGrid> {
    if n > 32 {
        return Err(Error::param("barrier oracle is limited to n ≤ 32"));
    }
    let (_, var) = model.mean_variance();
    let sigma = var.sqrt();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::numerical("one-period variance is not finite"));
    }
    let a = payoff.a();
    let mut d = sigma / 10.0;
    if a < h {
        d = (h - a) / ((h - a) / d).ceil();
    }
    let mut coarse = induction(model, payoff, n, q0, x_grid, h, d, sigma)?;
    let mut last_err = f64::INFINITY;
    for _ in 0..4 {
        d *= 0.5;
        let fine = induction(model, payoff, n, q0, x_grid, h, d, sigma)?;
        let err = coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| (f - c).abs() / 3.0)
            .fold(0.0, f64::max);
        let extrap: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
        if err <= tol {
            return Ok(BarrierGrid { values: extrap, error_estimate: err });
        }
        last_err = err;
        coarse = fine;
    }
    Err(Error::numerical(format!(
        "barrier oracle grid too coarse: Richardson estimate {last_err:e} > {tol:e}"
    )))
}

fn support_radius(model: &LevyModel, sigma: f64) -> f64 {
    let (lo, hi) = model.strip();
    let rate = (-lo).min(hi);
    if rate.is_finite() {
        10.0 * sigma + 30.0 / rate
    } else {
        12.0 * sigma
    }
}

/// `w(k) = ∫ p(y) hat((y − kd)/d) dy` for `|k| ≤ K`, by Parseval.
fn hat_weights(model: &LevyModel, d: f64, big_k: usize) -> Vec<f64> {
    let y_max = (big_k as f64 + 1.0) * d;
    let step = 2.0 * PI / (4.0 * y_max);
    let mut nodes = Vec::new();
    let mut xi: f64 = 0.0;
    loop {
        let z = Complex64::new(xi, 0.0);
        let phi = (-model.psi_unchecked(z)).exp();
        let s = if xi == 0.0 { 1.0 } else { (0.5 * d * xi).sin() / (0.5 * d * xi) };
        let v = phi * d * s * s;
        nodes.push((xi, v));
        if xi > 10.0 && v.norm() * xi < 1e-17 {
            break;
        }
        xi += step;
        if nodes.len() > 5_000_000 {
            break;
        }
    }
    let mut w = vec![0.0; 2 * big_k + 1];
    for (idx, wk) in w.iter_mut().enumerate() {
        let k = idx as f64 - big_k as f64;
        let mut s = 0.0;
        for (j, &(xi, v)) in nodes.iter().enumerate() {
            let term = (v * Complex64::from_polar(1.0, -k * d * xi)).re;
            s += if j == 0 { 0.5 * term } else { term };
        }
        *wk = s * step / PI;
    }
    w
}

#[allow(clippy::too_many_arguments)]
fn induction(
    model: &LevyModel,
    payoff: &PayoffTransform,
    n: usize,
    q0: f64,
    x_grid: &[f64],
    h: f64,
    d: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    let depth = 40.0 * sigma + 10.0 * sigma * (n as f64).sqrt();
    let lowest = x_grid.iter().copied().fold(h, f64::min);
    let j_max = ((h - lowest + depth) / d).ceil() as usize + 4;
    let big_k = (support_radius(model, sigma) / d).ceil() as usize;
    let w = hat_weights(model, d, big_k);
    let node = |j: usize| h - j as f64 * d;
    let a = payoff.a();
    // node values, averaging across the payoff jump and the barrier
    let mut v: Vec<f64> = (0..=j_max)
        .map(|j| {
            let x = node(j);
            if j == 0 {
                return 0.5 * payoff_pointwise(payoff, x - 1e-12 * (1.0 + x.abs()));
            }
            if (x - a).abs() < 1e-9 * d {
                let e = 1e-9 * (1.0 + x.abs());
                return 0.5 * (payoff_pointwise(payoff, x - e) + payoff_pointwise(payoff, x + e));
            }
            payoff_pointwise(payoff, x)
        })
        .collect();
    let kk = big_k as i64;
    for _ in 0..n {
        let mut next = vec![0.0; j_max + 1];
        for (i, out) in next.iter_mut().enumerate() {
            let ii = i as i64;
            let mut s = 0.0;
            let mut mass = 0.0;
            for j in (ii - kk)..=(ii + kk).min(j_max as i64) {
                let wk = w[(ii - j + kk) as usize];
                mass += wk;
                if j >= 0 {
                    s += wk * v[j as usize];
                }
            }
            s += (1.0 - mass) * v[j_max];
            *out = q0 * s;
        }
        next[0] *= 0.5;
        v = next;
    }
    Ok(x_grid
        .iter()
        .map(|&x| {
            if x >= h {
                return 0.0;
            }
            // four-point Lagrange interpolation
            let pos = (h - x) / d;
            let j0 = (pos.floor() as usize).clamp(1, j_max - 2) - 1;
            let mut s = 0.0;
            for a in 0..4 {
                let mut l = 1.0;
                for b in 0..4 {
                    if a != b {
                        l *= (pos - (j0 + b) as f64) / ((j0 + a) as f64 - (j0 + b) as f64);
                    }
                }
                s += l * v[j0 + a];
            }
            s
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{KoBoLParams, NtsParams};

    fn kobol() -> LevyModel {
        LevyModel::kobol(KoBoLParams::symmetric_order(0.1, 0.5, -8.0, 8.0)).unwrap()
    }

    #[test]
    fn hardy_values() {
        assert!((oracle_hardy_numeric(0.0).unwrap() - 2.0 * PI).abs() < 1e-12);
        let mut last = 0.0;
        for r in [0.1, 0.5, 0.9, 0.99] {
            let v = oracle_hardy_numeric(r).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(oracle_hardy_numeric(1.0).is_err());
    }

    #[test]
    fn series_values() {
        assert!((oracle_zinv_series(SeriesFamily::Geometric { ratio: 0.5 }, 3).re - 0.125).abs() < 1e-15);
        assert!((oracle_zinv_series(SeriesFamily::Exponential { rate: 1.0 }, 5).re - (-1f64).exp() / 120.0).abs() < 1e-15);
        let v = oracle_zinv_series(SeriesFamily::TwoPoles { ratio: 1.0 / 3.0 }, 50).re;
        assert!((v - (3.0 - 3f64.powi(-50)) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_coefficient_matches_stirling() {
        for n in [100usize, 1260, 3780] {
            let nf = n as f64;
            let series = 1.0 + 1.0 / (12.0 * nf) + 1.0 / (288.0 * nf * nf) - 139.0 / (51840.0 * nf.powi(3))
                - 571.0 / (2_488_320.0 * nf.powi(4));
            let expect = 1.0 / ((2.0 * PI * nf).sqrt() * series);
            let got = oracle_zinv_series(SeriesFamily::Exponential { rate: nf }, n).re;
            assert!((got / expect - 1.0).abs() < 1e-13, "n={n}: {got} vs {expect}");
        }
    }

    #[test]
    fn european_n0_is_payoff() {
        let m = kobol();
        let put = PayoffTransform::put(1.0, -0.5).unwrap();
        for x in [-0.7, -0.1, 0.3] {
            let v = oracle_european_direct(&m, &put, 0, 1.0, x, 1e-10).unwrap();
            assert!((v - payoff_pointwise(&put, x)).abs() < 1e-7, "x={x}: {v}");
        }
        let dig = PayoffTransform::digital_down(0.0, -0.5).unwrap();
        let v = oracle_european_direct(&m, &dig, 0, 1.0, -0.4, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-7);
        assert_eq!(oracle_european_direct(&m, &PayoffTransform::zero(), 3, 1.0, 0.0, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn european_gaussian_digital() {
        // quadratic exponent: increments N(0, 2an)
        let m = LevyModel::quadratic(0.02, 0.0).unwrap();
        let dig = PayoffTransform::digital_down(0.1, -0.5).unwrap();
        let n = 5;
        let v = oracle_european_direct(&m, &dig, n, 1.0, 0.0, 1e-12).unwrap();
        let s = (2.0 * 0.02 * n as f64).sqrt();
        let z: f64 = 0.1 / s;
        let exact = 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
        assert!((v - exact).abs() < 1e-10, "{v} {exact}");
    }

    #[test]
    fn barrier_far_away_is_european() {
        let m = LevyModel::nts(NtsParams { delta_s: 0.1, alpha_s: 5.0, beta_s: 0.0, nu_s: 1.0, mu: 0.0 }).unwrap();
        let dig = PayoffTransform::digital_down(0.1, -0.5).unwrap();
        let g = oracle_barrier_induction(&m, &dig, 4, 1.0, &[0.0], 3.0, 1e-5).unwrap();
        let e = oracle_european_direct(&m, &dig, 4, 1.0, 0.0, 1e-12).unwrap();
        assert!((g.values[0] - e).abs() < 1e-5, "{} {}", g.values[0], e);
        let z = oracle_barrier_induction(&m, &dig, 0, 1.0, &[0.0, 3.5], 3.0, 1e-6).unwrap();
        assert!((z.values[0] - 1.0).abs() < 1e-9 && z.values[1] == 0.0);
    }
}
