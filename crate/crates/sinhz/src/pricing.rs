//! Prices as coefficients of Z-transforms in the number of monitoring dates.
//!
//! European claims: `Σ_{n≥1} qⁿ Vₙ = q I(q)` with
//! `I(q) = (1/2π)∫ e^{i(x−a)ξ} Φ(ξ) Ĝ₀(ξ)/(1 − qΦ(ξ)) dξ`.
//! Once the ξ-integral is discretized, `I` is a finite sum of simple poles in
//! `q`, and its coefficients are recovered by the Z-inversion engines.
//! Up-and-out claims subtract a second transform built from Wiener-Hopf
//! factors (see [`price_barrier`]).

use num_complex::Complex64;
use std::f64::consts::PI;
use std::str::FromStr;

use crate::contours::{SinhXiContour, SinhZContour, NodeSet};
use crate::error::{Error, Result};
use crate::levelcurves::{build_curve_within, flatten_curve, ExtendedCurve};
use crate::levy::{asymptotic_params, p_delta_from, symmetrizing_shift, symmetry_check, EsscherShift, LevyModel};
use crate::payoffs::{payoff_pointwise, PayoffComponent, PayoffTransform};
use crate::quad::gauss_legendre;
use crate::oracles::oracle_barrier_induction;
use crate::wh::{wh_continue, wh_minus, wh_plus, Side, WHContext};
use crate::zinv::{
    auto_m, choose_sinh_params, choose_trap_params, invert_sinh, invert_trapezoid, BoundKind, TransformEvaluator,
    N_MIN_SINH,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const MAX_DOUBLINGS: usize = 6;
/// Wing angles of the upward ξ-contour family; the downward family mirrors them.
const ANGLE_LOW: f64 = 0.02;
const ANGLE_HIGH: f64 = 0.7;
const K_D: f64 = 0.85;
const GL_ORDER: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PricingMode {
    Symmetric,
    Nonsymmetric,
    Auto,
}

impl FromStr for PricingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(PricingMode::Symmetric),
            "nonsymmetric" => Ok(PricingMode::Nonsymmetric),
            "auto" => Ok(PricingMode::Auto),
            other => Err(Error::param(format!("unknown pricing mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PricingRequest {
    pub model: LevyModel,
    pub payoff: PayoffTransform,
    /// Number of monitoring dates.
    pub n: usize,
    /// Per-period discount factor.
    pub q0: f64,
    /// Log-spot.
    pub x: f64,
    /// Up-and-out barrier in log-price.
    pub barrier: Option<f64>,
    pub eps: f64,
    pub mode: PricingMode,
}

impl PricingRequest {
    pub fn new(model: LevyModel, payoff: PayoffTransform, n: usize, q0: f64, x: f64, eps: f64) -> Self {
        PricingRequest { model, payoff, n, q0, x, barrier: None, eps, mode: PricingMode::Auto }
    }

    pub fn with_barrier(mut self, h: f64) -> Self {
        self.barrier = Some(h);
        self
    }

    pub fn with_mode(mut self, mode: PricingMode) -> Self {
        self.mode = mode;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.q0 > 0.0 && self.q0 <= 1.0) {
            return Err(Error::param(format!("discount factor q0 = {} not in (0, 1]", self.q0)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!("tolerance {} not in (0, 1)", self.eps)));
        }
        if !self.x.is_finite() {
            return Err(Error::param("log-spot must be finite"));
        }
        Ok(())
    }
}

/// Which engine produced a price.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PricingPath {
    /// Zero payoff, `n = 0` or a knocked-out barrier.
    Direct,
    /// Sinh-deformed ξ-contours.
    Sinh,
    /// Level curve `L(δ, u)`.
    LevelCurve,
    /// Level curve with flat wings.
    FlattenedCurve,
    /// Wiener-Hopf transform for the knock-out part.
    Barrier,
    /// Backward induction, used below the deformed-contour minimum of dates.
    BarrierInduction,
}

impl std::fmt::Display for PricingPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PricingPath::Direct => "direct",
            PricingPath::Sinh => "sinh",
            PricingPath::LevelCurve => "level_curve",
            PricingPath::FlattenedCurve => "flattened_curve",
            PricingPath::Barrier => "barrier",
            PricingPath::BarrierInduction => "barrier_induction",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceResult {
    pub price: f64,
    pub path: PricingPath,
    /// Terms of the outer Z-inversion sum.
    pub outer_nodes: usize,
    /// ξ-nodes of the inner integrals.
    pub inner_nodes: usize,
    /// Error bound the plan was built for, or the measured one where the
    /// engine reports it.
    pub error_estimate: f64,
}

impl PriceResult {
    fn direct(price: f64) -> Self {
        PriceResult { price, path: PricingPath::Direct, outer_nodes: 0, inner_nodes: 0, error_estimate: 0.0 }
    }
}

/// `Σ_k A_k/(1 − qΦ_k)`: a discretized inner integral.
#[derive(Clone, Debug, Default)]
pub(crate) struct PoleSum {
    pub a: Vec<Complex64>,
    pub phi: Vec<Complex64>,
}

impl PoleSum {
    fn eval(&self, q: Complex64) -> Complex64 {
        self.a.iter().zip(&self.phi).map(|(a, p)| a / (1.0 - q * p)).sum()
    }

    /// `[qⁿ] q·Σ A_k/(1 − qΦ_k) = Σ A_k Φ_k^{n−1}`.
    fn coefficient(&self, n: usize) -> Complex64 {
        self.a.iter().zip(&self.phi).map(|(a, p)| a * p.powu(n as u32 - 1)).sum()
    }

    fn extend(&mut self, other: PoleSum) {
        self.a.extend(other.a);
        self.phi.extend(other.phi);
    }
}

/// Shape of a ξ-integration contour.
#[derive(Clone, Debug)]
pub enum XiContour {
    /// `Im ξ = im`, sampled through `ξ = i·im + sinh y`.
    Line { im: f64 },
    /// Sinh-deformed contour; its `ζ` is the coarsest step.
    Sinh(SinhXiContour),
    Curve(ExtendedCurve),
}

/// Discretization of one ξ-integral: contour, truncation and payload data.
#[derive(Clone, Debug)]
pub struct InnerIntegralPlan {
    pub xi_contour: XiContour,
    /// Truncation `|y| ≤ span` (line, sinh) or `|t| ≤ span` (curve).
    pub span: f64,
    base_step: f64,
    breaks: Vec<f64>,
    model: LevyModel,
    component: PayoffComponent,
    x: f64,
    eps: f64,
}

/// A value with the difference to the previous refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerValue {
    pub value: Complex64,
    pub error_estimate: f64,
}

impl InnerIntegralPlan {
    pub fn new(
        model: &LevyModel,
        component: &PayoffComponent,
        x: f64,
        xi_contour: XiContour,
        eps: f64,
    ) -> Result<Self> {
        let base_step = match &xi_contour {
            XiContour::Line { .. } => 0.1,
            XiContour::Sinh(c) => c.zeta,
            XiContour::Curve(_) => 0.0,
        };
        let mut plan = InnerIntegralPlan {
            xi_contour,
            span: 0.0,
            base_step,
            breaks: Vec::new(),
            model: model.clone(),
            component: component.clone(),
            x,
            eps,
        };
        plan.span = plan.truncation()?;
        if let XiContour::Curve(c) = &plan.xi_contour {
            plan.breaks = curve_breaks(c, plan.span);
        }
        Ok(plan)
    }

    fn point(&self, s: f64) -> (Complex64, Complex64) {
        match &self.xi_contour {
            XiContour::Line { im } => (Complex64::new(s.sinh(), *im), Complex64::new(s.cosh(), 0.0)),
            XiContour::Sinh(c) => {
                let y = Complex64::new(s, 0.0);
                (c.point(y), c.deriv(y))
            }
            XiContour::Curve(c) => c.eval(s),
        }
    }

    /// `|dξ| |e^{i(x−a)ξ} Φ Ĝ₀|/2π` at parameter `s`.
    fn envelope(&self, s: f64) -> f64 {
        let (xi, d) = self.point(s);
        let phi = (-self.model.psi_unchecked(xi)).exp();
        let e = (I * (self.x - self.component.a) * xi).exp();
        (d * e * phi * self.component.g0(xi)).norm() / (2.0 * PI)
    }

    fn truncation(&self) -> Result<f64> {
        let tol = 1e-3 * self.eps;
        let big = |s: f64| {
            let v = self.envelope(s).max(self.envelope(-s));
            !(v < tol)
        };
        match &self.xi_contour {
            XiContour::Line { .. } | XiContour::Sinh(_) => {
                let mut last = 0.0;
                let mut s = 0.1;
                while s <= 40.0 {
                    if big(s) {
                        last = s;
                    }
                    s += 0.1;
                }
                if last >= 39.9 {
                    return Err(Error::numerical("inner integrand does not decay along the contour"));
                }
                Ok(last + 0.5)
            }
            XiContour::Curve(c) => {
                let end = if c.flatten_at.is_some() { f64::INFINITY } else { c.x_end() };
                let mut last = c.x_start();
                let mut s = 0.05;
                while s < 1e8 {
                    if s > end {
                        if big(end) {
                            return Err(Error::numerical("level curve is shorter than the truncation"));
                        }
                        break;
                    }
                    if big(s) {
                        last = s;
                    } else if s > 4.0 * last.max(1.0) {
                        break;
                    }
                    s *= 1.05;
                }
                Ok((1.2 * last).min(end))
            }
        }
    }

    /// Nodes and weights on refinement level `level`.
    fn nodes(&self, level: usize) -> NodeSet {
        let split = 1usize << level;
        match &self.xi_contour {
            XiContour::Line { .. } => {
                let h = self.base_step / split as f64;
                let n = (self.span / h).ceil() as i64;
                let mut ns = NodeSet::with_capacity(2 * n as usize + 1);
                for j in -n..=n {
                    let (p, d) = self.point(j as f64 * h);
                    ns.push(p, h * d);
                }
                ns
            }
            XiContour::Sinh(c) => {
                let zeta = self.base_step / split as f64;
                let c = SinhXiContour { zeta, n: (self.span / zeta).ceil() as usize, ..*c };
                c.nodes()
            }
            XiContour::Curve(c) => {
                let (gx, gw) = gauss_legendre(GL_ORDER);
                let mut right = NodeSet::default();
                for w in self.breaks.windows(2) {
                    let h = (w[1] - w[0]) / split as f64;
                    for k in 0..split {
                        let lo = w[0] + k as f64 * h;
                        for (x, wt) in gx.iter().zip(&gw) {
                            let t = lo + 0.5 * h * (x + 1.0);
                            let (p, d) = c.eval(t);
                            right.push(p, 0.5 * h * wt * d);
                        }
                    }
                }
                let mut ns = NodeSet::with_capacity(2 * right.len());
                for (p, w) in right.points.iter().zip(&right.weights).rev() {
                    ns.push(Complex64::new(-p.re, p.im), w.conj());
                }
                for (p, w) in right.points.iter().zip(&right.weights) {
                    ns.push(*p, *w);
                }
                ns
            }
        }
    }

    fn pole_sum(&self, ns: &NodeSet) -> Result<PoleSum> {
        let mut out = PoleSum::default();
        let shift = self.x - self.component.a;
        for (xi, w) in ns.points.iter().zip(&ns.weights) {
            if !(xi.re.is_finite() && xi.im.is_finite() && w.re.is_finite() && w.im.is_finite()) {
                return Err(Error::numerical(format!("contour evaluation failed near ξ = {xi}")));
            }
            let phi = (-self.model.psi_unchecked(*xi)).exp();
            let a = w * (I * shift * xi).exp() * phi * self.component.g0(*xi) / (2.0 * PI);
            if !(a.re.is_finite() && a.im.is_finite() && phi.re.is_finite()) {
                return Err(Error::numerical(format!("inner integrand overflows at ξ = {xi}")));
            }
            if a != Complex64::new(0.0, 0.0) {
                out.a.push(a);
                out.phi.push(phi);
            }
        }
        Ok(out)
    }

    /// Double the nodes until the `n`-th coefficient settles.
    fn discretize(&self, n: usize) -> Result<PoleSum> {
        let mut prev: Option<Complex64> = None;
        for level in 0..=MAX_DOUBLINGS {
            let ps = self.pole_sum(&self.nodes(level))?;
            let c = ps.coefficient(n);
            if let Some(p) = prev {
                if (c - p).norm() <= 0.01 * self.eps * c.norm().max(1.0) {
                    return Ok(ps);
                }
            }
            prev = Some(c);
        }
        Err(Error::numerical(format!(
            "inner quadrature did not settle after {MAX_DOUBLINGS} doublings"
        )))
    }
}

fn curve_breaks(c: &ExtendedCurve, span: f64) -> Vec<f64> {
    let xs = c.x_start().min(span);
    let mut b: Vec<f64> = (0..=4).map(|k| xs * k as f64 / 4.0).collect();
    let mut t = xs;
    while t < span {
        t = (1.5 * t).min(span);
        b.push(t);
    }
    if let Some(x_star) = c.flatten_at {
        if x_star > xs && x_star < span {
            b.push(x_star);
            b.sort_by(|p, q| p.partial_cmp(q).unwrap());
            b.dedup();
        }
    }
    b
}

/// `I(q)` by node doubling on `plan`.
pub fn inner_integral(plan: &InnerIntegralPlan, q: Complex64) -> Result<InnerValue> {
    let mut prev: Option<Complex64> = None;
    for level in 0..=MAX_DOUBLINGS {
        let ps = plan.pole_sum(&plan.nodes(level))?;
        let v = ps.eval(q);
        if let Some(p) = prev {
            let err = (v - p).norm();
            if err <= 0.1 * plan.eps * v.norm().max(1.0) {
                return Ok(InnerValue { value: v, error_estimate: err });
            }
        }
        prev = Some(v);
    }
    Err(Error::numerical(format!(
        "inner integral did not converge after {MAX_DOUBLINGS} doublings"
    )))
}

fn sinh_half_width() -> f64 {
    0.5 * (ANGLE_HIGH - ANGLE_LOW)
}

/// Sinh contour whose strip image crosses `iℝ` inside `[c_lo, c_hi]`, with
/// wings going up (`up`) or down.
pub(crate) fn sinh_contour_between(c_lo: f64, c_hi: f64, up: bool, eps: f64) -> SinhXiContour {
    let d = sinh_half_width();
    let (lo_ang, hi_ang) = if up { (ANGLE_LOW, ANGLE_HIGH) } else { (-ANGLE_HIGH, -ANGLE_LOW) };
    let omega = 0.5 * (lo_ang + hi_ang);
    let b = (c_hi - c_lo) / (hi_ang.sin() - lo_ang.sin());
    let omega1 = c_lo - b * lo_ang.sin();
    let zeta = 2.0 * PI * d / ((1.0 / eps).ln() + 10.0);
    SinhXiContour { omega1, b, omega, zeta, n: 0 }
}

/// Component of `{v : Φ(iv) √r₊ < 1}` inside both strips that contains, or
/// lies nearest to, `target`.
pub(crate) fn feasible_interval(
    model: &LevyModel,
    payoff_strip: (f64, f64),
    r_plus: f64,
    target: f64,
) -> Result<(f64, f64)> {
    let (mlo, mhi) = model.strip();
    let lo = mlo.max(payoff_strip.0).max(-50.0);
    let hi = mhi.min(payoff_strip.1).min(50.0);
    if !(lo < hi) {
        return Err(Error::param("payoff strip and model strip do not overlap"));
    }
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let ok = |v: f64| (-model.psi_unchecked(Complex64::new(0.0, v))).exp().re * r_plus.sqrt() < 1.0;
    let mut comps: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    for k in 1..steps {
        let v = lo + k as f64 * h;
        match (ok(v), open) {
            (true, None) => open = Some(v),
            (false, Some(a)) => {
                comps.push((a, v - h));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        comps.push((a, hi - h));
    }
    let dist = |c: &(f64, f64)| if target < c.0 { c.0 - target } else if target > c.1 { target - c.1 } else { 0.0 };
    let best = comps
        .into_iter()
        .filter(|c| c.1 > c.0)
        .min_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap())
        .ok_or_else(|| Error::domain("no line with |qΦ| < 1 inside the payoff and model strips"))?;
    let u = 0.5 * (best.0 + best.1);
    Ok((best.0.max(u - 5.0), best.1.min(u + 5.0)))
}

fn relevant(phi: Complex64, n: usize, e: f64) -> bool {
    let l = phi.norm();
    l > 0.0 && (n as f64) * (-l.ln()) <= e + 10.0
}

/// Largest `|arg Φ|` among the values that can matter for the `n`-th coefficient.
fn sector_angle(phis: &[Complex64], n: usize, e: f64) -> f64 {
    phis.iter()
        .filter(|p| relevant(**p, n, e))
        .map(|p| p.arg().abs())
        .fold(0.0, f64::max)
}

/// Check that every relevant singularity `1/Φ` lies to the right of the
/// Z-contour strip (or outside the annulus for the circle).
fn check_singularities(phis: &[Complex64], n: usize, e: f64, contour: Option<&SinhZContour>, r_plus: f64) -> Result<()> {
    for p in phis.iter().filter(|p| relevant(**p, n, e)) {
        let q = 1.0 / p;
        let bad = match contour {
            Some(c) => c.strip_coordinate(q) >= -c.d_l,
            None => q.norm() <= r_plus,
        };
        if bad {
            return Err(Error::domain(format!(
                "singularity q = {q:.6} of the transform lies inside the Z-contour region"
            )));
        }
    }
    Ok(())
}

/// Outer radius of the Z-inversion annulus for `n` and `M`.
fn outer_radius(n: usize, m: f64) -> f64 {
    (-0.1 * m / n as f64).exp()
}

/// `[qⁿ] q·P(q)` for a pole sum, validated against its singularities.
/// Returns the coefficient and the number of outer terms.
fn invert_pole_sum(ps: &PoleSum, n: usize, eps: f64) -> Result<(f64, usize)> {
    let m = auto_m(eps);
    let e_plan = 0.1 * eps;
    let e = -e_plan.ln();
    let c_v = ps.a.iter().map(|a| a.norm()).sum::<f64>().max(1e-300);
    let eval = |q: Complex64| q * ps.eval(q);
    if n < N_MIN_SINH {
        let plan = choose_trap_params(e_plan, n, m)?;
        let r_plus = plan.r * plan.rho;
        check_singularities(&ps.phi, n, e, None, r_plus)?;
        let v = TransformEvaluator::new(eval, 0.0, c_v, 0.0, BoundKind::PoleAtOne)?;
        let val = invert_trapezoid(&v, n, &plan)?;
        return Ok((val.re, plan.n_terms));
    }
    let gamma = sector_angle(&ps.phi, n, e);
    if !(gamma < 1.2) {
        let worst = ps.phi.iter().filter(|p| relevant(**p, n, e)).max_by(|a, b| a.arg().abs().partial_cmp(&b.arg().abs()).unwrap());
        return Err(Error::domain(format!("Φ along the ξ-contour spans the sector |arg| ≤ {gamma:.3} (Φ = {worst:?})")));
    }
    let singular: Vec<Complex64> = ps.phi.iter().filter(|p| relevant(**p, n, e)).map(|p| 1.0 / p).collect();
    let v = TransformEvaluator::new(eval, 0.0, c_v, gamma, BoundKind::PoleAtOne)?.with_singularities(singular);
    let plan = choose_sinh_params(&v, e_plan, n, m)?;
    check_singularities(&ps.phi, n, e, Some(&plan.contour), 0.0)?;
    let val = invert_sinh(&v, n, &plan)?;
    Ok((val.re, plan.contour.n_l + 1))
}

fn trivial(req: &PricingRequest) -> Option<f64> {
    if req.payoff.is_zero() {
        return Some(0.0);
    }
    if req.n == 0 {
        return Some(payoff_pointwise(&req.payoff, req.x));
    }
    None
}

fn passes_symmetry(model: &LevyModel) -> bool {
    match symmetrizing_shift(model) {
        Some(b) => symmetry_check(model, EsscherShift { beta: b }, 1e-10),
        None => false,
    }
}

/// Inner plan for one component on a sinh contour.
fn sinh_plan(req: &PricingRequest, comp: &PayoffComponent, r_plus: f64) -> Result<InnerIntegralPlan> {
    let (f_lo, f_hi) = feasible_interval(&req.model, req.payoff_strip(), r_plus, -req.payoff.beta())?;
    let u = 0.5 * (f_lo + f_hi);
    let c_lo = u - K_D * (u - f_lo);
    let c_hi = u + K_D * (f_hi - u);
    let up = req.x - comp.a > 0.0;
    let c = sinh_contour_between(c_lo, c_hi, up, req.eps);
    InnerIntegralPlan::new(&req.model, comp, req.x, XiContour::Sinh(c), req.eps)
}

impl PricingRequest {
    fn payoff_strip(&self) -> (f64, f64) {
        crate::payoffs::regularity_strip(&self.payoff)
    }
}

fn price_with_plans(req: &PricingRequest, plans: &[InnerIntegralPlan], path: PricingPath) -> Result<PriceResult> {
    let mut total = PoleSum::default();
    for p in plans {
        total.extend(p.discretize(req.n)?);
    }
    let inner_nodes = total.a.len();
    let (v, outer) = invert_pole_sum(&total, req.n, req.eps)?;
    Ok(PriceResult { price: req.q0.powi(req.n as i32) * v, path, outer_nodes: outer, inner_nodes, error_estimate: req.eps })
}

fn european_sinh(req: &PricingRequest) -> Result<PriceResult> {
    let r_plus = outer_radius(req.n, auto_m(req.eps));
    let plans = req
        .payoff
        .components()
        .iter()
        .map(|c| sinh_plan(req, c, r_plus))
        .collect::<Result<Vec<_>>>()?;
    price_with_plans(req, &plans, PricingPath::Sinh)
}

/// European price for a model that is symmetric after an Esscher shift.
pub fn price_european_symmetric(req: &PricingRequest) -> Result<PriceResult> {
    req.check()?;
    if let Some(p) = trivial(req) {
        return Ok(PriceResult::direct(p));
    }
    if req.n <= 2 {
        return Err(Error::param("the symmetric engine needs n > 2"));
    }
    if !passes_symmetry(&req.model) {
        return Err(Error::param("model is not symmetric after any Esscher shift"));
    }
    european_sinh(req)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CurveCase {
    Plain,
    Flattened,
}

/// European price on level-curve contours.
pub fn price_european_nonsymmetric(req: &PricingRequest) -> Result<PriceResult> {
    req.check()?;
    if let Some(p) = trivial(req) {
        return Ok(PriceResult::direct(p));
    }
    if req.n <= 1 {
        return Err(Error::param("the level-curve engine needs n > 1"));
    }
    let asy = asymptotic_params(&req.model)?;
    let case = if asy.nu0 > 0.5 * (asy.nu_bar + 1.0) {
        CurveCase::Plain
    } else if asy.nu0 > 0.0 && asy.nu0 < 1.0 {
        CurveCase::Flattened
    } else {
        return Err(Error::unsupported(format!(
            "no level-curve construction for ν₀ = {}, ν̄ = {}",
            asy.nu0, asy.nu_bar
        )));
    };
    let r_plus = outer_radius(req.n, auto_m(req.eps));
    let (f_lo, f_hi) = feasible_interval(&req.model, req.payoff_strip(), r_plus, -req.payoff.beta())?;
    let u = 0.5 * (f_lo + f_hi);
    let band = (f_lo + 0.05 * (f_hi - f_lo), f_hi - 0.05 * (f_hi - f_lo));
    let mut plans = Vec::new();
    let mut flattened = false;
    for comp in req.payoff.components() {
        let s = req.x - comp.a;
        let mut last_err = Error::numerical("no admissible level curve");
        let mut found = None;
        let mut mag = crate::levelcurves::DEFAULT_DELTA;
        let decay_len = asy_decay_len(req, comp, u);
        for _ in 0..6 {
            let delta = if p_delta_from(&asy, mag)? * s >= 0.0 { mag } else { -mag };
            match curve_plan(req, comp, decay_len, delta, u, band, case) {
                Ok((plan, flat)) => {
                    found = Some(plan);
                    flattened |= flat;
                    break;
                }
                Err(e) => last_err = e,
            }
            mag *= 0.5;
        }
        if found.is_none() && case == CurveCase::Flattened {
            // a curve flattened at its start is the line through iu
            if let Ok(plan) = InnerIntegralPlan::new(&req.model, comp, req.x, XiContour::Line { im: u }, req.eps) {
                found = Some(plan);
                flattened = true;
            }
        }
        plans.push(found.ok_or(last_err)?);
    }
    let path = if flattened { PricingPath::FlattenedCurve } else { PricingPath::LevelCurve };
    price_with_plans(req, &plans, path)
}

/// Abscissa beyond which the integrand on the line `Im ξ = u` is negligible.
fn asy_decay_len(req: &PricingRequest, comp: &PayoffComponent, u: f64) -> f64 {
    let tol = 1e-3 * req.eps;
    let mut t: f64 = 1.0;
    while t < 1e7 {
        let xi = Complex64::new(t, u);
        let v = ((-req.model.psi_unchecked(xi)).exp() * comp.g0(xi)).norm();
        if v < tol {
            break;
        }
        t *= 1.5;
    }
    t
}

fn curve_plan(
    req: &PricingRequest,
    comp: &PayoffComponent,
    decay_len: f64,
    delta: f64,
    u: f64,
    band: (f64, f64),
    case: CurveCase,
) -> Result<(InnerIntegralPlan, bool)> {
    let mut x_max = (4.0 * decay_len).max(50.0);
    loop {
        let curve = build_curve_within(&req.model, delta, u, x_max, band)?;
        let stopped = curve.x_end() < x_max * (1.0 - 1e-12);
        let (curve, flat) = if stopped {
            if case != CurveCase::Flattened {
                return Err(Error::domain("level curve leaves the admissible band"));
            }
            (flatten_curve(&curve, 0.98 * curve.x_end())?, true)
        } else {
            (curve, false)
        };
        match InnerIntegralPlan::new(&req.model, comp, req.x, XiContour::Curve(curve.clone()), req.eps) {
            Ok(plan) => {
                let gamma = 2.0 * curve.max_abs_im_psi();
                if gamma > 1.2 {
                    return Err(Error::domain(format!("|Im ψ| reaches {gamma:.3} along the curve")));
                }
                return Ok((plan, flat));
            }
            Err(e) if !flat && x_max < 1e7 => {
                let _ = e;
                x_max *= 8.0;
            }
            Err(e) => return Err(e),
        }
    }
}

/// European price; `mode` picks the contour family.
pub fn price_european(req: &PricingRequest) -> Result<PriceResult> {
    match req.mode {
        PricingMode::Symmetric => price_european_symmetric(req),
        PricingMode::Nonsymmetric => price_european_nonsymmetric(req),
        PricingMode::Auto => {
            req.check()?;
            if let Some(p) = trivial(req) {
                return Ok(PriceResult::direct(p));
            }
            if passes_symmetry(&req.model) || req.n <= 1 {
                european_sinh(req)
            } else {
                price_european_nonsymmetric(req).or_else(|_| european_sinh(req))
            }
        }
    }
}


/// Accuracy the knock-out transform can be evaluated to.
const BARRIER_INNER_FLOOR: f64 = 1e-12;
/// Loosest accuracy asked of the induction engine for few dates.
const INDUCTION_TOL: f64 = 1e-5;
/// Largest tolerated residual of the Wiener-Hopf identity at spot checks.
const WH_CHECK_TOL: f64 = 1e-6;
/// Refinements of the barrier ξ/η step before giving up.
const BARRIER_REFINE: usize = 3;

/// The Z-inversion amplifies errors in the transform by up to `e^{1.9M}`,
/// so `M` is capped by what the inner quadratures deliver.
fn barrier_m(eps: f64) -> f64 {
    (0.5 * (eps / (10.0 * BARRIER_INNER_FLOOR)).ln()).clamp(1.0, 10.0)
}

/// ξ- and η-contour data for the knock-out transform `K(q)`.
struct BarrierPlan {
    model: LevyModel,
    xi: Vec<Complex64>,
    /// `w e^{i(h−a)ξ} Ĝ(ξ)/2π` summed over the payoff components.
    xi_pre: Vec<Complex64>,
    eta: Vec<Complex64>,
    /// `w e^{i(x−h)η} Φ(η)/2π`.
    eta_pre: Vec<Complex64>,
    phi_eta: Vec<Complex64>,
    line: f64,
    wh_tol: f64,
}

impl BarrierPlan {
    fn build(req: &PricingRequest, h: f64, xi_c: &SinhXiContour, eta_c: &SinhXiContour, line: f64, tol: f64) -> Self {
        let mut xi = Vec::with_capacity(2 * xi_c.n + 1);
        let mut xi_pre = Vec::with_capacity(2 * xi_c.n + 1);
        let ns = xi_c.nodes();
        for (p, w) in ns.points.iter().zip(&ns.weights) {
            let g: Complex64 = req
                .payoff
                .components()
                .iter()
                .map(|c| (I * (h - c.a) * p).exp() * c.g0(*p))
                .sum();
            xi.push(*p);
            xi_pre.push(w * g / (2.0 * PI));
        }
        let ns = eta_c.nodes();
        let mut eta = Vec::with_capacity(ns.len());
        let mut eta_pre = Vec::with_capacity(ns.len());
        let mut phi_eta = Vec::with_capacity(ns.len());
        for (p, w) in ns.points.iter().zip(&ns.weights) {
            let phi = (-req.model.psi_unchecked(*p)).exp();
            eta.push(*p);
            eta_pre.push(w * (I * (req.x - h) * p).exp() * phi / (2.0 * PI));
            phi_eta.push(phi);
        }
        BarrierPlan { model: req.model.clone(), xi, xi_pre, eta, eta_pre, phi_eta, line, wh_tol: tol }
    }

    /// `K(q)`, whose `n`-th coefficient is the knock-out correction.
    fn k(&self, q: Complex64) -> Result<Complex64> {
        let ctx = WHContext::new(&self.model, q, self.line, self.line, self.wh_tol)?;
        let mut g = Vec::with_capacity(self.xi.len());
        for (x, pre) in self.xi.iter().zip(&self.xi_pre) {
            g.push(pre * wh_continue(&ctx, *x, Side::Minus)?);
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for ((e, pre), phi) in self.eta.iter().zip(&self.eta_pre).zip(&self.phi_eta) {
            let j: Complex64 = self.xi.iter().zip(&g).map(|(x, gk)| gk / (e - x)).sum::<Complex64>() / I;
            let den = (1.0 - q * phi) * wh_minus(&ctx, *e)?;
            sum += pre * j / den;
        }
        Ok(sum)
    }

    fn phis(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.xi.iter().map(|x| (-self.model.psi_unchecked(*x)).exp()).collect();
        out.extend_from_slice(&self.phi_eta);
        for k in -400..=400 {
            let eta = Complex64::new((k as f64 * 0.025).sinh(), self.line);
            out.push((-self.model.psi_unchecked(eta)).exp());
        }
        out
    }
}

/// `φ⁺φ⁻(1 − qΦ)/(1 − q) = 1` on the factor line, from lines `±g` away.
fn wh_spot_check(model: &LevyModel, q: Complex64, line: f64, g: f64) -> Result<()> {
    let ctx = WHContext::new(model, q, line - g, line + g, 1e-3 * WH_CHECK_TOL)?;
    for t in [-3.0, -0.5, 0.0, 0.7, 4.0] {
        let xi = Complex64::new(t, line);
        let phi = (-model.psi_unchecked(xi)).exp();
        let r = wh_plus(&ctx, xi)? * wh_minus(&ctx, xi)? * (1.0 - q * phi) / (1.0 - q) - 1.0;
        if !(r.norm() <= WH_CHECK_TOL) {
            return Err(Error::numerical(format!(
                "Wiener-Hopf identity residual {:.3e} at ξ = {xi}",
                r.norm()
            )));
        }
    }
    Ok(())
}

/// Parameter span of a sinh contour outside which `env` stays below `tol`.
fn sinh_span(c: &SinhXiContour, env: impl Fn(Complex64, Complex64) -> f64, tol: f64) -> Result<f64> {
    let big = |s: f64| {
        [s, -s].iter().any(|t| {
            let y = Complex64::new(*t, 0.0);
            !(env(c.point(y), c.deriv(y)) < tol)
        })
    };
    let mut last = 0.0;
    let mut s = 0.05;
    while s <= 40.0 {
        if big(s) {
            last = s;
        }
        s += 0.05;
    }
    if last >= 39.9 {
        return Err(Error::numerical("barrier integrand does not decay along the contour"));
    }
    Ok(last + 0.5)
}

fn with_span(mut c: SinhXiContour, span: f64) -> SinhXiContour {
    c.n = (span / c.zeta).ceil() as usize;
    c
}

/// Up-and-out price: the European price minus the knock-out correction,
/// whose transform is built from Wiener-Hopf factors on one flat line.
pub fn price_barrier(req: &PricingRequest) -> Result<PriceResult> {
    req.check()?;
    let h = req.barrier.ok_or_else(|| Error::param("price_barrier needs a barrier"))?;
    if !h.is_finite() {
        return Err(Error::param("barrier must be finite"));
    }
    if req.x >= h || req.payoff.is_zero() {
        return Ok(PriceResult::direct(0.0));
    }
    if req.n == 0 {
        return Ok(PriceResult::direct(payoff_pointwise(&req.payoff, req.x)));
    }
    if req.payoff.components().iter().any(|c| c.a >= h) {
        return Err(Error::unsupported("every payoff kink must lie below the barrier"));
    }
    if req.n < N_MIN_SINH {
        let tol = req.eps.max(INDUCTION_TOL);
        let g = oracle_barrier_induction(&req.model, &req.payoff, req.n, req.q0, &[req.x], h, tol)?;
        return Ok(PriceResult {
            price: g.values[0],
            path: PricingPath::BarrierInduction,
            outer_nodes: 0,
            inner_nodes: 0,
            error_estimate: g.error_estimate,
        });
    }
    let mut eu_req = req.clone();
    eu_req.barrier = None;
    let eu = price_european(&eu_req)?;

    let m = barrier_m(req.eps);
    let inner = (0.1 * req.eps * (-2.0 * m).exp()).max(BARRIER_INNER_FLOOR);
    let n = req.n;
    let r_plus = outer_radius(n, m);
    let (f_lo, f_hi) = feasible_interval(&req.model, req.payoff_strip(), r_plus, -req.payoff.beta())?;
    let u = 0.5 * (f_lo + f_hi);
    let g = 0.1 * (f_hi - u).min(u - f_lo);
    let line = if u.abs() < g { u + 0.5 * g.copysign(u) } else { u };
    let mut xi_c = sinh_contour_between(line + g, u + K_D * (f_hi - u), true, inner);
    let mut eta_c = sinh_contour_between(u - K_D * (u - f_lo), line - g, false, inner);
    let env_tol = 1e-3 * inner;
    let a_min = req.payoff.components().iter().map(|c| c.a).fold(f64::INFINITY, f64::min);
    let xi_env = |p: Complex64, d: Complex64| {
        let g: f64 = req.payoff.components().iter().map(|c| c.g0(p).norm()).sum();
        (d * (I * (h - a_min) * p).exp()).norm() * g * (1.0 + p.norm())
    };
    let eta_env = |p: Complex64, d: Complex64| {
        (d * (I * (req.x - h) * p).exp() * (-req.model.psi_unchecked(p)).exp()).norm()
    };
    let xi_span = sinh_span(&xi_c, xi_env, env_tol)?;
    let eta_span = sinh_span(&eta_c, eta_env, env_tol)?;
    let wh_tol = inner;
    let q_test = Complex64::new(0.5, 0.0);
    let mut plan = BarrierPlan::build(req, h, &with_span(xi_c.clone(), xi_span), &with_span(eta_c.clone(), eta_span), line, wh_tol);
    let mut k_prev = plan.k(q_test)?;
    let mut converged = false;
    for _ in 0..BARRIER_REFINE {
        xi_c.zeta *= 0.5;
        eta_c.zeta *= 0.5;
        let finer = BarrierPlan::build(req, h, &with_span(xi_c.clone(), xi_span), &with_span(eta_c.clone(), eta_span), line, wh_tol);
        let k_new = finer.k(q_test)?;
        let diff = (k_new - k_prev).norm();
        plan = finer;
        if diff <= 10.0 * inner * k_new.norm().max(1.0) {
            converged = true;
            break;
        }
        k_prev = k_new;
    }
    if !converged {
        return Err(Error::numerical("knock-out transform did not converge under step refinement"));
    }
    wh_spot_check(&req.model, q_test, line, g)?;

    let e = -(0.1 * req.eps).ln();
    let phis = plan.phis();
    let failure = std::sync::Mutex::new(None::<Error>);
    let eval = |q: Complex64| match plan.k(q) {
        Ok(k) => q * k,
        Err(err) => {
            failure.lock().unwrap().get_or_insert(err);
            Complex64::new(f64::NAN, f64::NAN)
        }
    };
    let c_v = (0..32)
        .map(|j| {
            let q = Complex64::from_polar(r_plus, 2.0 * PI * (j as f64 + 0.5) / 32.0);
            ((1.0 - q) * eval(q)).norm()
        })
        .fold(0.0, f64::max)
        .max(1e-300);
    if !c_v.is_finite() {
        return Err(failure.into_inner().unwrap().unwrap_or_else(|| Error::numerical("knock-out transform is not finite")));
    }
    let inner_nodes = plan.xi.len() + plan.eta.len();
    let (v1, outer) = {
        let gamma = sector_angle(&phis, n, e);
        if !(gamma < 1.2) {
            return Err(Error::domain(format!("Φ along the barrier contours spans the sector |arg| ≤ {gamma:.3}")));
        }
        let singular: Vec<Complex64> = phis.iter().filter(|p| relevant(**p, n, e)).map(|p| 1.0 / p).collect();
        let v = TransformEvaluator::new(eval, 0.0, c_v, gamma, BoundKind::PoleAtOne)?
            .without_hardy_measurement()
            .with_singularities(singular);
        let sp = choose_sinh_params(&v, 0.1 * req.eps, n, m)?;
        (invert_sinh(&v, n, &sp)?, sp.contour.n_l + 1)
    };
    if let Some(err) = failure.into_inner().unwrap() {
        return Err(err);
    }
    let price = eu.price - req.q0.powi(n as i32) * v1.re;
    Ok(PriceResult { price, path: PricingPath::Barrier, outer_nodes: outer, inner_nodes, error_estimate: req.eps + eu.error_estimate })
}

/// European or barrier price, depending on whether a barrier is set.
pub fn price(req: &PricingRequest) -> Result<PriceResult> {
    if req.barrier.is_some() {
        price_barrier(req)
    } else {
        price_european(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{KoBoLParams, NtsParams};
    use crate::oracles::{oracle_barrier_induction, oracle_european_direct};

    fn kobol() -> LevyModel {
        LevyModel::kobol(KoBoLParams::symmetric_order(0.1, 0.5, -8.0, 8.0)).unwrap()
    }

    fn nig() -> LevyModel {
        LevyModel::nts(NtsParams { delta_s: 0.02, alpha_s: 2.0, beta_s: 0.5, nu_s: 1.0, mu: 0.0 }).unwrap()
    }

    fn put() -> PayoffTransform {
        PayoffTransform::put(1.0, -0.5).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn trivial_requests() {
        let zero = PayoffTransform::custom(Vec::new(), (0.0, 1.0), -0.5).unwrap();
        let r = price_european(&PricingRequest::new(kobol(), zero, 12, 1.0, 0.0, 1e-10)).unwrap();
        assert_eq!((r.price, r.path), (0.0, PricingPath::Direct));
        let r = price_european(&PricingRequest::new(kobol(), put(), 0, 1.0, -0.2, 1e-10)).unwrap();
        assert!((r.price - (1.0 - (-0.2f64).exp())).abs() < 1e-15);
        let knocked = PricingRequest::new(kobol(), put(), 12, 1.0, 0.4, 1e-10).with_barrier(0.3);
        assert_eq!(price_barrier(&knocked).unwrap().price, 0.0);
    }

    #[test]
    fn rejects_bad_requests() {
        let bad_q0 = PricingRequest::new(kobol(), put(), 12, 1.5, 0.0, 1e-10);
        assert!(price_european(&bad_q0).is_err());
        let bad_eps = PricingRequest::new(kobol(), put(), 12, 1.0, 0.0, 0.0);
        assert!(price_european(&bad_eps).is_err());
        let lopsided = LevyModel::kobol(KoBoLParams { c_plus: 0.2, ..KoBoLParams::symmetric_order(0.1, 0.5, -8.0, 8.0) }).unwrap();
        let skew = PricingRequest::new(lopsided, put(), 12, 1.0, 0.0, 1e-10).with_mode(PricingMode::Symmetric);
        assert!(price_european(&skew).is_err());
        let no_barrier = PricingRequest::new(kobol(), put(), 12, 1.0, 0.0, 1e-10);
        assert!(price_barrier(&no_barrier).is_err());
    }

    #[test]
    fn discounting_scales_by_q0_to_the_n() {
        let base = PricingRequest::new(kobol(), put(), 12, 1.0, 0.05, 1e-10);
        let p1 = price_european(&base).unwrap().price;
        let mut d = base.clone();
        d.q0 = 0.99;
        let p2 = price_european(&d).unwrap().price;
        assert!(rel(p2, 0.99f64.powi(12) * p1) < 1e-12);
    }

    #[test]
    fn inner_integral_at_zero_is_one_period_price() {
        let comp = put().components()[0].clone();
        let c = sinh_contour_between(0.2, 0.8, true, 1e-12);
        let plan = InnerIntegralPlan::new(&kobol(), &comp, 0.1, XiContour::Sinh(c), 1e-12).unwrap();
        let v = inner_integral(&plan, Complex64::new(0.0, 0.0)).unwrap();
        let o = oracle_european_direct(&kobol(), &put(), 1, 1.0, 0.1, 1e-14).unwrap();
        assert!((v.value.re - o).abs() < 1e-11, "{} vs {o}", v.value);
        assert!(v.value.im.abs() < 1e-11);
    }

    #[test]
    fn symmetric_engine_matches_oracle() {
        let dig = PayoffTransform::digital_up(0.05, 0.5).unwrap();
        for x in [-0.1, 0.1] {
            let req = PricingRequest::new(kobol(), dig.clone(), 12, 1.0, x, 1e-10).with_mode(PricingMode::Symmetric);
            let r = price_european(&req).unwrap();
            let o = oracle_european_direct(&kobol(), &dig, 12, 1.0, x, 1e-14).unwrap();
            assert_eq!(r.path, PricingPath::Sinh);
            assert!(rel(r.price, o) < 1e-9, "x = {x}: {} vs {o}", r.price);
        }
    }

    #[test]
    fn curve_engine_agrees_with_symmetric_engine() {
        for x in [-0.1, 0.0, 0.1] {
            let req = PricingRequest::new(kobol(), put(), 12, 1.0, x, 1e-10);
            let a = price_european(&req.clone().with_mode(PricingMode::Symmetric)).unwrap().price;
            let b = price_european(&req.with_mode(PricingMode::Nonsymmetric)).unwrap().price;
            assert!(rel(a, b) < 1e-9, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn contour_independence_for_skewed_model() {
        let req = PricingRequest::new(nig(), put(), 12, 1.0, 0.0, 1e-10);
        let curve = price_european_nonsymmetric(&req).unwrap();
        let sinh = european_sinh(&req).unwrap();
        assert_eq!(curve.path, PricingPath::LevelCurve);
        assert!(rel(curve.price, sinh.price) < 1e-9, "{} vs {}", curve.price, sinh.price);
    }

    #[test]
    fn far_barrier_is_european_and_near_barrier_is_cheaper() {
        let dig = PayoffTransform::digital_up(0.05, 0.5).unwrap();
        let req = PricingRequest::new(kobol(), dig.clone(), 8, 1.0, 0.0, 1e-8).with_mode(PricingMode::Symmetric);
        let eu = price_european(&req).unwrap().price;
        let far = price_barrier(&req.clone().with_barrier(60.0)).unwrap();
        assert_eq!(far.path, PricingPath::Barrier);
        assert!(rel(far.price, eu) < 1e-8, "{} vs {eu}", far.price);
        let near = price_barrier(&req.with_barrier(0.3)).unwrap().price;
        assert!(near > 0.0 && near < eu);
        let o = oracle_barrier_induction(&kobol(), &dig, 8, 1.0, &[0.0], 0.3, 1e-5).unwrap();
        assert!(rel(near, o.values[0]) < 1e-5, "{near} vs {:?}", o);
    }

    #[test]
    fn few_dates_barrier_uses_induction() {
        let dig = PayoffTransform::digital_up(0.05, 0.5).unwrap();
        let req = PricingRequest::new(kobol(), dig.clone(), 3, 1.0, 0.0, 1e-8).with_barrier(0.3);
        let r = price_barrier(&req).unwrap();
        assert_eq!(r.path, PricingPath::BarrierInduction);
        let o = oracle_barrier_induction(&kobol(), &dig, 3, 1.0, &[0.0], 0.3, 1e-5).unwrap();
        assert!(rel(r.price, o.values[0]) < 1e-4, "{} vs {:?}", r.price, o);
    }
}
