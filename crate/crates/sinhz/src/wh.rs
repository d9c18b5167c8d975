//! Wiener-Hopf factors of a random walk killed at a geometric time.
//!
//! `φ⁺_q(ξ)φ⁻_q(ξ) = (1 − q)/(1 − qΦ(ξ))`, with `φ⁺` analytic above a line
//! `Im η = ω₋` and `φ⁻` below a line `Im η = ω₊`. Both are exponentials of
//! Cauchy-type integrals of `ln(1 − qΦ(η))` over these lines; the constant
//! `ln(1 − q)` part integrates in closed form and leaves a factor `1 − q`
//! depending on which side of the line the origin lies.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::levy::LevyModel;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const LEVELS: usize = 9;
const COARSE_STEP: f64 = 0.4;
const Y_MAX: f64 = 40.0;

/// `η = iω + b sinh y` sampled at `y = kζ` on the finest level.
#[derive(Clone, Debug)]
struct WhLine {
    omega: f64,
    nodes: Vec<Complex64>,
    /// `ζ · dη/dy`, finest level.
    weights: Vec<f64>,
    /// Continuous branch of `ln(1 − qΦ(η))` at the nodes.
    logs: Vec<Complex64>,
    /// `ζ · dη/dy · ln(1 − qΦ(η))/η`, finest level.
    terms: Vec<Complex64>,
}

impl WhLine {
    fn build(model: &LevyModel, q: Complex64, omega: f64) -> Result<Self> {
        let (lo, hi) = model.strip();
        if !(omega > lo && omega < hi) {
            return Err(Error::domain(format!("line Im η = {omega} outside the model strip ({lo}, {hi})")));
        }
        if omega == 0.0 {
            return Err(Error::param("the factor lines must avoid η = 0"));
        }
        let b = 1.0;
        let stride = 1usize << (LEVELS - 1);
        let zeta = COARSE_STEP / stride as f64;
        let eta = |y: f64| I * omega + b * y.sinh();
        // truncate where the integrand is negligible on both wings
        let mut y_end = 1.0;
        while y_end < Y_MAX {
            let small = [y_end, -y_end].iter().all(|&y| {
                let e = eta(y);
                let phi = (-model.psi_unchecked(e)).exp();
                (q * phi).norm() * b * y.cosh() / e.norm_sqr() < 1e-18
            });
            if small {
                break;
            }
            y_end += 1.0;
        }
        let half = ((y_end / COARSE_STEP).ceil() as usize) * stride;
        let count = 2 * half + 1;
        let mut nodes = Vec::with_capacity(count);
        let mut logs = Vec::with_capacity(count);
        for k in 0..count {
            let y = (k as f64 - half as f64) * zeta;
            let e = eta(y);
            nodes.push(e);
            let w = 1.0 - q * (-model.psi_unchecked(e)).exp();
            if w.norm() < 1e-14 {
                return Err(Error::numerical(format!("1 − qΦ vanishes near η = {e}")));
            }
            logs.push(w.ln());
        }
        unwrap_from_ends(&mut logs)?;
        let weights: Vec<f64> = (0..count)
            .map(|k| zeta * b * ((k as f64 - half as f64) * zeta).cosh())
            .collect();
        let terms = (0..count).map(|k| weights[k] * logs[k] / nodes[k]).collect();
        Ok(WhLine { omega, nodes, weights, logs, terms })
    }

    /// `ln(1 − qΦ(ξ))` on the branch of the nearest node.
    fn log_at(&self, model: &LevyModel, q: Complex64, xi: Complex64) -> Result<Complex64> {
        let w = 1.0 - q * (-model.psi_unchecked(xi)).exp();
        if w.norm() < 1e-14 {
            return Err(Error::numerical(format!("1 − qΦ vanishes near ξ = {xi}")));
        }
        let k = self.nodes.partition_point(|e| e.re < xi.re).min(self.nodes.len() - 1);
        let mut l = w.ln();
        l.im += 2.0 * PI * ((self.logs[k].im - l.im) / (2.0 * PI)).round();
        Ok(l)
    }

    /// `sum` with the pole at `η = ξ` removed: `L(ξ)K(η)⁴` with
    /// `K = (ξ − p)/(η − p)` has the same residue there, a known line
    /// integral and a pole `p` across the line, far from both.
    fn sum_subtracted(&self, xi: Complex64, level: usize, l_xi: Complex64) -> Complex64 {
        let above = xi.im > self.omega;
        let depth = 1f64.max(0.5 * xi.norm());
        let p = Complex64::new(xi.re, if above { self.omega - depth } else { self.omega + depth });
        let stride = 1usize << (LEVELS - 1 - level);
        let mut s = Complex64::new(0.0, 0.0);
        let mut k = 0;
        while k < self.nodes.len() {
            let e = self.nodes[k];
            let kern = ((xi - p) / (e - p)).powi(4);
            s += (self.terms[k] * xi - l_xi * self.weights[k] * kern) / (xi - e);
            k += stride;
        }
        let exact = if above { -2.0 * PI * I * l_xi } else { 2.0 * PI * I * l_xi };
        s * stride as f64 + exact
    }

    fn sum_subtracted_adaptive(&self, xi: Complex64, tol: f64, l_xi: Complex64) -> Result<(Complex64, usize)> {
        let mut prev = self.sum_subtracted(xi, 1, l_xi);
        for level in 2..LEVELS {
            let cur = self.sum_subtracted(xi, level, l_xi);
            if (cur - prev).norm() <= tol * cur.norm().max(1.0) {
                return Ok((cur, level));
            }
            prev = cur;
        }
        Err(Error::numerical(format!("factor quadrature did not converge at ξ = {xi}")))
    }

    /// `Σ terms_k ξ/(ξ − η_k)` on refinement level `level` (0 = coarsest).
    fn sum(&self, xi: Complex64, level: usize) -> Complex64 {
        let stride = 1usize << (LEVELS - 1 - level);
        let mut s = Complex64::new(0.0, 0.0);
        let mut k = 0;
        while k < self.nodes.len() {
            s += self.terms[k] / (xi - self.nodes[k]);
            k += stride;
        }
        s * xi * stride as f64
    }

    /// Adaptive: the first level agreeing with its predecessor to `tol`.
    fn sum_adaptive(&self, xi: Complex64, tol: f64) -> Result<(Complex64, usize)> {
        let mut prev = self.sum(xi, 1);
        for level in 2..LEVELS {
            let cur = self.sum(xi, level);
            if (cur - prev).norm() <= tol * cur.norm().max(1.0) {
                return Ok((cur, level));
            }
            prev = cur;
        }
        Err(Error::numerical(format!("factor quadrature did not converge at ξ = {xi}")))
    }
}

// Continuous branch of ln(1 − qΦ): anchored at 0 on both wings, where Φ → 0.
fn unwrap_from_ends(logs: &mut [Complex64]) -> Result<()> {
    let n = logs.len();
    let mid = n / 2;
    let fix = |prev: f64, cur: f64| cur + 2.0 * PI * ((prev - cur) / (2.0 * PI)).round();
    let mut left = logs[..=mid].to_vec();
    for k in 1..left.len() {
        left[k].im = fix(left[k - 1].im, left[k].im);
        if (left[k].im - left[k - 1].im).abs() > PI / 2.0 {
            return Err(Error::numerical("phase jump in ln(1 − qΦ) between adjacent nodes"));
        }
    }
    let mut right = logs[mid..].to_vec();
    for k in (0..right.len() - 1).rev() {
        right[k].im = fix(right[k + 1].im, right[k].im);
        if (right[k].im - right[k + 1].im).abs() > PI / 2.0 {
            return Err(Error::numerical("phase jump in ln(1 − qΦ) between adjacent nodes"));
        }
    }
    if (left[mid].im - right[0].im).abs() > 1e-9 {
        return Err(Error::domain("1 − qΦ winds around the origin along the line"));
    }
    logs[..=mid].copy_from_slice(&left);
    logs[mid..].copy_from_slice(&right);
    Ok(())
}

/// Factor data for one `q`: the minus line carries `φ⁺`, the plus line `φ⁻`.
#[derive(Clone, Debug)]
pub struct WHContext {
    pub q: Complex64,
    minus: WhLine,
    plus: WhLine,
    tol: f64,
    fixed_level: Option<usize>,
    phi: LevyModel,
}

impl WHContext {
    pub fn new(model: &LevyModel, q: Complex64, omega_minus: f64, omega_plus: f64, tol: f64) -> Result<Self> {
        let minus = WhLine::build(model, q, omega_minus)?;
        let plus = if omega_plus == omega_minus {
            minus.clone()
        } else {
            WhLine::build(model, q, omega_plus)?
        };
        Ok(WHContext { q, minus, plus, tol, fixed_level: None, phi: model.clone() })
    }

    /// Evaluate every factor on one refinement level instead of adaptively.
    pub fn with_fixed_level(mut self, level: usize) -> Self {
        self.fixed_level = Some(level.min(LEVELS - 1));
        self
    }

    /// Level the adaptive rule settles on at `ξ` (on the line that applies).
    pub fn converged_level(&self, xi: Complex64) -> Result<usize> {
        let line = if xi.im > self.minus.omega { &self.minus } else { &self.plus };
        Ok(line.sum_adaptive(xi, self.tol)?.1)
    }

    fn line_sum(&self, line: &WhLine, xi: Complex64) -> Result<Complex64> {
        match self.fixed_level {
            Some(l) => Ok(line.sum(xi, l)),
            None => match line.sum_adaptive(xi, self.tol) {
                Ok((s, _)) => Ok(s),
                // ξ close to the line relative to the local node spacing
                Err(_) => {
                    let l_xi = line.log_at(&self.phi, self.q, xi)?;
                    Ok(line.sum_subtracted_adaptive(xi, self.tol, l_xi)?.0)
                }
            },
        }
    }

    pub fn omega_minus(&self) -> f64 {
        self.minus.omega
    }

    pub fn omega_plus(&self) -> f64 {
        self.plus.omega
    }

    pub fn model(&self) -> &LevyModel {
        &self.phi
    }
}

pub fn wh_plus(ctx: &WHContext, xi: Complex64) -> Result<Complex64> {
    if !(xi.im > ctx.minus.omega) {
        return Err(Error::domain(format!("ξ = {xi} is not above the line Im η = {}", ctx.minus.omega)));
    }
    let s = ctx.line_sum(&ctx.minus, xi)?;
    let pre = if ctx.minus.omega > 0.0 { 1.0 - ctx.q } else { Complex64::new(1.0, 0.0) };
    Ok(pre * (s / (2.0 * PI * I)).exp())
}

pub fn wh_minus(ctx: &WHContext, xi: Complex64) -> Result<Complex64> {
    if !(xi.im < ctx.plus.omega) {
        return Err(Error::domain(format!("ξ = {xi} is not below the line Im η = {}", ctx.plus.omega)));
    }
    let s = ctx.line_sum(&ctx.plus, xi)?;
    let pre = if ctx.plus.omega < 0.0 { 1.0 - ctx.q } else { Complex64::new(1.0, 0.0) };
    Ok(pre * (-s / (2.0 * PI * I)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// `φ^±_q = (1 − q)/((1 − qΦ) φ^∓_q)`, extending a factor past its own line.
pub fn wh_continue(ctx: &WHContext, xi: Complex64, which: Side) -> Result<Complex64> {
    let w = 1.0 - ctx.q * (-ctx.phi.psi_unchecked(xi)).exp();
    if w.norm() < 1e-12 {
        return Err(Error::numerical(format!("1 − qΦ(ξ) vanishes at ξ = {xi}")));
    }
    let other = match which {
        Side::Plus => wh_minus(ctx, xi)?,
        Side::Minus => wh_plus(ctx, xi)?,
    };
    Ok((1.0 - ctx.q) / (w * other))
}

/// Both factors on the line through `ξ` by principal values.
pub fn wh_vp_line(model: &LevyModel, q: f64, xi: Complex64) -> Result<(Complex64, Complex64)> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::param("principal-value factors need q in [0, 1)"));
    }
    let c = xi.im;
    if c == 0.0 {
        return Err(Error::param("the line must avoid η = 0"));
    }
    let lt = |e: Complex64| -(1.0 - q * (-model.psi_unchecked(e)).exp()).ln();
    let l0 = lt(xi);
    // subtract the odd part L̃(ξ)e^{−s²}/s, whose principal value is zero
    let g = |s: f64| {
        let e = xi + s;
        lt(e) * xi / (e * s) - l0 * (-s * s).exp() / s
    };
    let h = 0.004;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut k = 0i64;
    loop {
        let mut done = true;
        for u in [(k as f64 + 0.5) * h, -(k as f64 + 0.5) * h] {
            let s = u.sinh();
            let t = g(s) * u.cosh() * h;
            acc += t;
            if t.norm() > 1e-20 {
                done = false;
            }
        }
        k += 1;
        if (done && k > 100) || k as f64 * h > 14.0 {
            break;
        }
    }
    let vp = acc / (2.0 * PI * I);
    let (ep, em) = if c > 0.0 { (1.0 - q, 1.0) } else { (1.0, 1.0 - q) };
    Ok((ep * (0.5 * l0 + vp).exp(), em * (0.5 * l0 - vp).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{KoBoLParams, NtsParams};

    fn kobol() -> LevyModel {
        LevyModel::kobol(KoBoLParams::symmetric_order(0.1, 0.5, -8.0, 8.0)).unwrap()
    }

    fn nig() -> LevyModel {
        LevyModel::nts(NtsParams { delta_s: 1.0, alpha_s: 2.0, beta_s: 0.5, nu_s: 1.0, mu: 0.0 }).unwrap()
    }

    fn ratio(m: &LevyModel, q: Complex64, xi: Complex64) -> Complex64 {
        (1.0 - q) / (1.0 - q * (-m.psi_unchecked(xi)).exp())
    }

    #[test]
    fn trivial_values() {
        let m = kobol();
        let ctx = WHContext::new(&m, Complex64::new(0.5, 0.0), -0.4, 0.4, 1e-12).unwrap();
        assert!((wh_plus(&ctx, Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
        assert!((wh_minus(&ctx, Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
        let zero = WHContext::new(&m, Complex64::new(0.0, 0.0), -0.4, 0.4, 1e-12).unwrap();
        let xi = Complex64::new(1.3, 0.1);
        assert!((wh_plus(&zero, xi).unwrap() - 1.0).norm() < 1e-15);
        assert!(wh_plus(&ctx, Complex64::new(1.0, -0.5)).is_err());
        assert!(wh_minus(&ctx, Complex64::new(1.0, 0.5)).is_err());
    }

    #[test]
    fn identity_reference_point() {
        let m = kobol();
        let q = Complex64::new(0.5, 0.0);
        let ctx = WHContext::new(&m, q, -0.4, 0.4, 1e-12).unwrap();
        let xi = Complex64::new(1.0, -0.2);
        let prod = wh_plus(&ctx, xi).unwrap() * wh_minus(&ctx, xi).unwrap();
        assert!((prod - ratio(&m, q, xi)).norm() < 1e-10);
    }

    #[test]
    fn subtracted_sum_matches_plain_sum() {
        let m = kobol();
        let q = Complex64::new(0.6, 0.1);
        let line = WhLine::build(&m, q, -0.3).unwrap();
        for xi in [Complex64::new(3.0, 0.05), Complex64::new(-8.0, 0.3), Complex64::new(0.5, -0.1)] {
            let plain = line.sum_adaptive(xi, 1e-13).unwrap().0;
            let l = line.log_at(&m, q, xi).unwrap();
            let sub = line.sum_subtracted_adaptive(xi, 1e-13, l).unwrap().0;
            assert!((plain - sub).norm() < 1e-11, "ξ = {xi}: {plain} vs {sub}");
        }
        let below = WhLine::build(&m, q, 0.4).unwrap();
        let xi = Complex64::new(2.0, 0.05);
        let l = below.log_at(&m, q, xi).unwrap();
        let sub = below.sum_subtracted_adaptive(xi, 1e-13, l).unwrap().0;
        assert!((below.sum_adaptive(xi, 1e-13).unwrap().0 - sub).norm() < 1e-11);
    }

    #[test]
    fn identity_grid_both_models() {
        for (m, lo, hi, c) in [(kobol(), -0.3, 0.4, 0.05), (nig(), 0.2, 0.8, 0.5)] {
            for q in [
                Complex64::new(0.1, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.9, 0.0),
                Complex64::new(0.3, 0.3),
            ] {
                let ctx = WHContext::new(&m, q, lo, hi, 1e-12).unwrap();
                for k in 0..41 {
                    let xi = Complex64::new(-10.0 + 0.5 * k as f64, c);
                    let prod = wh_plus(&ctx, xi).unwrap() * wh_minus(&ctx, xi).unwrap();
                    assert!((prod - ratio(&m, q, xi)).norm() < 1e-9, "q={q} ξ={xi}");
                }
            }
        }
    }

    #[test]
    fn contour_independence_and_continuation() {
        let m = kobol();
        let q = Complex64::new(0.7, 0.1);
        let a = WHContext::new(&m, q, -0.5, 0.6, 1e-12).unwrap();
        let b = WHContext::new(&m, q, -0.2, 0.3, 1e-12).unwrap();
        for xi in [Complex64::new(0.3, 0.7), Complex64::new(-2.0, 1.5), Complex64::new(7.0, 0.0)] {
            let d = (wh_plus(&a, xi).unwrap() - wh_plus(&b, xi).unwrap()).norm();
            assert!(d < 1e-9, "ξ={xi}: {d}");
        }
        // overlap strip: continuation agrees with the direct value
        for xi in [Complex64::new(0.5, 0.1), Complex64::new(-3.0, -0.1)] {
            let direct = wh_plus(&a, xi).unwrap();
            let cont = wh_continue(&a, xi, Side::Plus).unwrap();
            assert!((direct - cont).norm() < 1e-9 * direct.norm());
        }
        let below = Complex64::new(1.0, -1.0);
        let phi_m = wh_minus(&a, below).unwrap();
        let cont = wh_continue(&a, below, Side::Plus).unwrap();
        assert!((cont * phi_m - ratio(&m, q, below)).norm() < 1e-12);
    }

    #[test]
    fn symmetric_model_reflection() {
        let m = kobol();
        let q = Complex64::new(0.6, 0.0);
        let ctx = WHContext::new(&m, q, -0.4, 0.4, 1e-12).unwrap();
        for x in [0.2, 1.0, 4.0] {
            let xi = Complex64::new(x, -0.1);
            let a = wh_minus(&ctx, xi).unwrap();
            let b = wh_plus(&ctx, -xi).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn principal_value_matches_limits() {
        let m = kobol();
        let q = 0.5;
        let ctx = WHContext::new(&m, Complex64::new(q, 0.0), 0.2, 0.6, 1e-12).unwrap();
        for x in [-2.0, 0.3, 1.5] {
            let xi = Complex64::new(x, 0.4);
            let (p, mm) = wh_vp_line(&m, q, xi).unwrap();
            assert!((p - wh_plus(&ctx, xi).unwrap()).norm() < 1e-6 * p.norm(), "x={x}");
            assert!((mm - wh_minus(&ctx, xi).unwrap()).norm() < 1e-6 * mm.norm());
            assert!((p * mm - ratio(&m, Complex64::new(q, 0.0), xi)).norm() < 1e-8);
        }
        let (p, mm) = wh_vp_line(&m, 0.0, Complex64::new(1.0, -0.3)).unwrap();
        assert!((p - 1.0).norm() < 1e-15 && (mm - 1.0).norm() < 1e-15);
    }
}
