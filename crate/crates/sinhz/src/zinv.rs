//! Inverse Z-transform engines.
//!
//! `Vₙ = (1/2πi)∮ q^{−n−1} Ṽ(q) dq` is evaluated either by the trapezoid
//! rule on a circle `|q| = r` or by the trapezoid rule in `y` after the
//! substitution `q = σ + i b sinh(iω + y)`.
//!
//! Transforms whose coefficients under- or overflow are handled by a radius
//! and a log normalisation: the evaluator supplies `W(q)` with
//! `Ṽ(Rq) = e^L W(q)`, and results come back as a [`ScaledValue`].

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::contours::{
    arclength_inside_unit_disc, build_z_contour, shape_angles, validate_z_contour, SinhZContour,
    ZContourShape,
};
use crate::dd::{Cdd, Dd};
use crate::error::{Error, Result};
use crate::quad::{pairwise_sum, pairwise_sum_real};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this `n` the sinh contour gains nothing and the circle is used.
pub const N_MIN_SINH: usize = 8;
/// Default bound on the log size of the terms, `r^{−n} = e^M`.
pub const DEFAULT_M: f64 = 23.0;
pub const DEFAULT_K_D: f64 = 0.85;
/// Floor substituted for `γ = 0` in the angle formulas.
pub const GAMMA_FLOOR: f64 = 1e-3;
const MAX_ADJUST: usize = 8;

/// Which a priori bound the transform satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// `|Ṽ(q)| ≤ C(1 + |q|)^a`.
    Generic,
    /// `|Ṽ(q)| ≤ C|1 − q|^{−1}|q|^a`.
    PoleAtOne,
}

type Eval<'a> = Box<dyn Fn(Complex64) -> Complex64 + Send + Sync + 'a>;

pub struct TransformEvaluator<'a> {
    eval: Eval<'a>,
    pub a_v: f64,
    pub c_v: f64,
    /// Half-angle of the sector around `[1, ∞)` that may hold singularities.
    pub gamma: f64,
    pub bound_kind: BoundKind,
    pub real_coefficients: bool,
    pub radius: f64,
    pub log_norm: f64,
    pub shape: ZContourShape,
    pub k_d: f64,
    /// Measure the Hardy norm on the strip boundaries when planning.
    pub measure_hardy: bool,
    /// Known singularities. When set, the contour only has to keep these to
    /// its right instead of avoiding the whole sector.
    pub singularities: Option<Vec<Complex64>>,
}

impl std::fmt::Debug for TransformEvaluator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformEvaluator")
            .field("a_v", &self.a_v)
            .field("c_v", &self.c_v)
            .field("gamma", &self.gamma)
            .field("bound_kind", &self.bound_kind)
            .field("radius", &self.radius)
            .field("log_norm", &self.log_norm)
            .field("shape", &self.shape)
            .finish()
    }
}

impl<'a> TransformEvaluator<'a> {
    pub fn new(
        eval: impl Fn(Complex64) -> Complex64 + Send + Sync + 'a,
        a_v: f64,
        c_v: f64,
        gamma: f64,
        bound_kind: BoundKind,
    ) -> Result<Self> {
        if !(0.0..PI / 2.0).contains(&gamma) {
            return Err(Error::param(format!("sector half-angle γ = {gamma} not in [0, π/2)")));
        }
        if !(c_v > 0.0 && c_v.is_finite()) {
            return Err(Error::param(format!("growth constant C = {c_v} must be positive")));
        }
        Ok(TransformEvaluator {
            eval: Box::new(eval),
            a_v,
            c_v,
            gamma,
            bound_kind,
            real_coefficients: true,
            radius: 1.0,
            log_norm: 0.0,
            shape: ZContourShape::default(),
            k_d: DEFAULT_K_D,
            measure_hardy: true,
            singularities: None,
        })
    }

    /// Declare that `eval` returns `W(q) = e^{−L} Ṽ(Rq)`.
    pub fn with_scaling(mut self, radius: f64, log_norm: f64) -> Self {
        self.radius = radius;
        self.log_norm = log_norm;
        self
    }

    pub fn with_shape(mut self, shape: ZContourShape) -> Self {
        self.shape = shape;
        self
    }

    /// Plan from the a priori bound alone, for transforms too costly to
    /// sample densely.
    pub fn without_hardy_measurement(mut self) -> Self {
        self.measure_hardy = false;
        self
    }

    pub fn with_singularities(mut self, qs: Vec<Complex64>) -> Self {
        self.singularities = Some(qs);
        self
    }

    pub fn complex_coefficients(mut self) -> Self {
        self.real_coefficients = false;
        self
    }

    #[inline]
    pub fn eval(&self, q: Complex64) -> Complex64 {
        (self.eval)(q)
    }

    fn scaled(&self, mantissa: Complex64, n: usize) -> ScaledValue {
        ScaledValue {
            mantissa,
            log_scale: self.log_norm - n as f64 * self.radius.ln(),
        }
    }
}

/// `mantissa · e^{log_scale}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledValue {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledValue {
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    /// `ln |value|`, finite even when the value itself underflows.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapPlan {
    pub r: f64,
    pub n_terms: usize,
    pub m: f64,
    pub m1: f64,
    pub rho: f64,
    /// `(n/M)(E + 2M)`.
    pub n_approx: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinhPlan {
    /// Contour with its grid `(ζ, N₀)`.
    pub contour: SinhZContour,
    /// `ln H` used for the step.
    pub ln_hardy_estimate: f64,
    /// `ln H` measured on the strip boundaries.
    pub ln_hardy_measured: f64,
    /// `(E + 2M) ln(n/M)/(k_d π²/4)`.
    pub predicted_terms: usize,
    pub m: f64,
    pub eps: f64,
}

/// `∫_{−π}^{π} |1 − r e^{iφ}|^{−1} dφ` through the arithmetic-geometric mean.
pub(crate) fn hardy_circle(r: f64) -> f64 {
    let (mut a, mut b) = (1.0, (1.0 - r) / (1.0 + r));
    for _ in 0..60 {
        let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
        a = an;
        b = bn;
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
    }
    2.0 * PI / ((1.0 + r) * a)
}

fn check_eps(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("tolerance ε = {eps} not in (0, 1)")));
    }
    Ok(-eps.ln())
}

pub fn choose_trap_params(eps: f64, n: usize, m: f64) -> Result<TrapPlan> {
    let e = check_eps(eps)?;
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if !(m > 0.0) {
        return Err(Error::param(format!("M = {m} must be positive")));
    }
    let nf = n as f64;
    let m1 = 0.9 * m;
    let r = (-m / nf).exp();
    let rho = (m1 / nf).exp();
    let (r_minus, r_plus) = (r / rho, r * rho);
    let hardy = (m + m1 + hardy_circle(r_minus).ln()).exp() + (m - m1 + hardy_circle(r_plus).ln()).exp();
    let n_exact = (e + hardy.ln()) / rho.ln();
    Ok(TrapPlan {
        r,
        n_terms: n_exact.ceil().max(2.0) as usize,
        m,
        m1,
        rho,
        n_approx: nf / m * (e + 2.0 * m),
    })
}

fn trap_terms(v: &TransformEvaluator, n: usize, r: f64, big_n: usize) -> Result<Vec<Complex64>> {
    let log_rn = -(n as f64) * r.ln();
    if !(log_rn < 700.0) {
        return Err(Error::param(format!("r^(-n) = e^{log_rn} overflows; choose a smaller M")));
    }
    let rn = log_rn.exp();
    Ok((0..big_n)
        .into_par_iter()
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / big_n as f64);
            // z^{−n} from the exact residue of kn mod N
            let kn = ((k as u128 * n as u128) % big_n as u128) as f64;
            let zn = Complex64::from_polar(1.0, -2.0 * PI * kn / big_n as f64);
            rn * zn * v.eval(z * r)
        })
        .collect())
}

pub fn invert_trapezoid_scaled(v: &TransformEvaluator, n: usize, plan: &TrapPlan) -> Result<ScaledValue> {
    if !(plan.r > 0.0 && plan.r < 1.0) || plan.n_terms == 0 {
        return Err(Error::param("trapezoid plan needs r in (0, 1) and N ≥ 1"));
    }
    let terms = trap_terms(v, n, plan.r, plan.n_terms)?;
    let s = pairwise_sum(&terms) / plan.n_terms as f64;
    Ok(v.scaled(s, n))
}

pub fn invert_trapezoid(v: &TransformEvaluator, n: usize, plan: &TrapPlan) -> Result<Complex64> {
    Ok(invert_trapezoid_scaled(v, n, plan)?.value())
}

/// `ρ^{−N}/(1 − ρ^{−N}) ‖h‖` with the Hardy norm measured on `|z| = ρ^{±1}`.
pub fn trapezoid_error_bound(v: &TransformEvaluator, n: usize, plan: &TrapPlan) -> f64 {
    let pts = (8 * plan.n_terms).max(4096);
    let mut norm = 0.0;
    for rad in [plan.r / plan.rho, plan.r * plan.rho] {
        let vals: Vec<f64> = (0..pts)
            .map(|k| {
                let q = Complex64::from_polar(rad, 2.0 * PI * k as f64 / pts as f64);
                (-(n as f64) * rad.ln()).exp() * v.eval(q).norm()
            })
            .collect();
        norm += pairwise_sum_real(&vals) / pts as f64;
    }
    let t = plan.rho.powf(-(plan.n_terms as f64));
    t / (1.0 - t) * norm * v.scaled(Complex64::new(1.0, 0.0), n).log_scale.exp()
}

/// `(n/M)/ln(n/M)`.
pub fn gain_factor(_eps: f64, n: usize, m: f64) -> Result<f64> {
    let x = n as f64 / m;
    if !(x > std::f64::consts::E) {
        return Err(Error::param(format!("gain factor needs n/M > e, got {x}")));
    }
    Ok(x / x.ln())
}

/// Kind of operator behind a resolvent `(I − qP)^{−1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResolventKind {
    /// Non-negative self-adjoint `P`.
    SelfAdjoint,
    /// Normal `P` with spectrum outside the sector `|arg λ| < γ`, bounded on
    /// `|arg q| > γ′`.
    NormalSector { gamma_prime: f64 },
}

pub fn resolvent_bound(q: Complex64, norm_p: f64, gamma: f64, kind: ResolventKind) -> Result<f64> {
    match kind {
        ResolventKind::SelfAdjoint => {
            if q.norm() * norm_p >= 1.0 {
                return Err(Error::domain(format!("q = {q} outside the disc |q| < 1/‖P‖")));
            }
            Ok(4.0 / (1.0 - q * norm_p).norm())
        }
        ResolventKind::NormalSector { gamma_prime } => {
            if !(gamma_prime > gamma && gamma_prime < PI / 2.0) {
                return Err(Error::param("need γ < γ′ < π/2"));
            }
            if q.norm() == 0.0 || q.arg().abs() <= gamma_prime {
                return Err(Error::domain(format!("q = {q} outside the cone |arg q| > γ′")));
            }
            Ok(1.0 / (gamma_prime - gamma).sin())
        }
    }
}

#[inline]
fn sinh_term(v: &TransformEvaluator, c: &SinhZContour, n: usize, y: Complex64) -> Complex64 {
    let q = c.point(y);
    // principal log is continuous: the contour never meets (−∞, 0]
    let pw = (-(n as f64 + 1.0) * q.ln()).exp();
    let val = v.eval(q);
    if val == Complex64::new(0.0, 0.0) || pw == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    c.b_l / (2.0 * PI) * pw * val * (I * c.omega_l + y).cosh()
}

/// `ln ∫ |f(t ± id)| dt` over both strip boundaries.
fn measured_ln_hardy(v: &TransformEvaluator, c: &SinhZContour, n: usize, span: f64) -> f64 {
    let h = 0.004;
    let steps = (2.0 * span / h).ceil() as usize;
    let d = c.d_l * (1.0 - 1e-9);
    let mut logs: Vec<f64> = Vec::with_capacity(2 * (steps + 1));
    for s in [-d, d] {
        for k in 0..=steps {
            let y = Complex64::new(-span + k as f64 * h, s);
            let q = c.point(y);
            let val = v.eval(q).norm();
            if val == 0.0 || !val.is_finite() {
                if !val.is_finite() {
                    logs.push(f64::INFINITY);
                }
                continue;
            }
            let l = -(n as f64 + 1.0) * q.norm().ln() + val.ln() + (c.b_l / (2.0 * PI)).ln()
                + (I * c.omega_l + y).cosh().norm().ln()
                + h.ln();
            logs.push(l);
        }
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    let s: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    top + s.ln()
}

/// `ln(ε/(100·ε_mach))` clamped to `[1, 23]`: the largest term size at which
/// roundoff stays below `ε`.
pub fn auto_m(eps: f64) -> f64 {
    (eps / (100.0 * f64::EPSILON)).ln().clamp(1.0, DEFAULT_M)
}

pub fn choose_sinh_params(v: &TransformEvaluator, eps: f64, n: usize, m: f64) -> Result<SinhPlan> {
    let e = check_eps(eps)?;
    if n == 0 || !(m > 0.0) {
        return Err(Error::param("sinh plan needs n ≥ 1 and M > 0"));
    }
    let nf = n as f64;
    let m1 = 0.9 * m;
    let r_minus = (-(m + m1) / nf).exp();
    let r_plus = (-(m - m1) / nf).exp();
    let gamma = v.gamma.max(GAMMA_FLOOR);
    let ln_c = v.c_v.ln();
    let ln_h_est = match v.bound_kind {
        BoundKind::PoleAtOne => 2.0 * m + nf.ln() + ln_c,
        BoundKind::Generic => 2.0 * m + ln_c,
    };
    let (mut omega, mut d) = shape_angles(v.shape, gamma, v.k_d);
    let mut failure = String::new();
    for _ in 0..MAX_ADJUST {
        match try_contour(v, n, r_minus, r_plus, omega, d, gamma, e, ln_h_est) {
            Ok((c, ln_h_meas)) => {
                let zeta = c.zeta_l;
                let n0 = c.n_l;
                let predicted = ((e + 2.0 * m) * (nf / m).ln() / (v.k_d * PI * PI / 4.0)).ceil();
                let contour = extend_truncation(v, n, c.with_grid(zeta, n0), eps);
                return Ok(SinhPlan {
                    contour,
                    ln_hardy_estimate: ln_h_est,
                    ln_hardy_measured: ln_h_meas,
                    predicted_terms: predicted.max(0.0) as usize,
                    m,
                    eps,
                });
            }
            Err(msg) => failure = msg,
        }
        let d_new = 0.8 * d;
        omega = if v.shape == ZContourShape::Balanced { -d_new } else { omega + 0.5 * (d - d_new) };
        d = d_new;
    }
    Err(Error::numerical(format!(
        "no admissible Z-contour after {MAX_ADJUST} adjustments: {failure}"
    )))
}

#[allow(clippy::too_many_arguments)]
fn try_contour(
    v: &TransformEvaluator,
    n: usize,
    r_minus: f64,
    r_plus: f64,
    omega: f64,
    d: f64,
    gamma: f64,
    e: f64,
    ln_h_est: f64,
) -> std::result::Result<(SinhZContour, f64), String> {
    let c = build_z_contour(r_minus, r_plus, omega, d).map_err(|e| e.to_string())?;
    let zeta = 2.0 * PI * d / (e + ln_h_est);
    let lambda0 = arclength_inside_unit_disc(&c);
    let lambda = (v.c_v / (-e).exp()).ln() / (n as f64 - v.a_v).max(1.0) - (c.b_l / (4.0 * PI)).ln() + lambda0;
    let n0 = (lambda.max(zeta) / zeta).ceil() as usize;
    let c = c.with_grid(zeta, n0);
    match &v.singularities {
        Some(qs) => {
            if let Some(q) = qs.iter().find(|q| c.strip_coordinate(**q) >= -c.d_l) {
                return Err(format!("singularity {q:.6} lies inside the strip image"));
            }
        }
        None => {
            let report = validate_z_contour(&c, gamma);
            if !report.in_region {
                return Err(format!("strip image leaves the analyticity region at {:?}", report.violation));
            }
        }
    }
    if !v.measure_hardy {
        return Ok((c, f64::NAN));
    }
    let ln_h = measured_ln_hardy(v, &c, n, c.lambda + 3.0);
    if !(ln_h <= ln_h_est + 3.0) {
        return Err(format!("measured ln H = {ln_h:.2} exceeds the estimate {ln_h_est:.2} by more than 3"));
    }
    Ok((c, ln_h))
}

// Lengthen the truncation until the last kept term is below ε/10.
fn extend_truncation(v: &TransformEvaluator, n: usize, mut c: SinhZContour, eps: f64) -> SinhZContour {
    let cap = 4 * c.n_l.max(8);
    while c.n_l < cap {
        let y = c.n_l as f64 * c.zeta_l;
        let t = (sinh_term(v, &c, n, Complex64::new(y, 0.0)).norm()
            + sinh_term(v, &c, n, Complex64::new(-y, 0.0)).norm())
            * c.zeta_l;
        if t <= 0.1 * eps || !t.is_finite() {
            break;
        }
        let n_new = c.n_l + c.n_l / 4 + 1;
        c = c.with_grid(c.zeta_l, n_new);
    }
    c
}

pub fn invert_sinh_scaled(v: &TransformEvaluator, n: usize, plan: &SinhPlan) -> Result<ScaledValue> {
    if !(n as f64 > v.a_v) {
        return Err(Error::param(format!(
            "n = {n} must exceed the growth exponent {} for the contour deformation",
            v.a_v
        )));
    }
    let c = &plan.contour;
    let n0 = c.n_l as i64;
    let s = if v.real_coefficients {
        let terms: Vec<Complex64> = (0..=n0)
            .into_par_iter()
            .map(|j| {
                let f = sinh_term(v, c, n, Complex64::new(j as f64 * c.zeta_l, 0.0));
                if j == 0 { 0.5 * f } else { f }
            })
            .collect();
        Complex64::new(2.0 * c.zeta_l * pairwise_sum(&terms).re, 0.0)
    } else {
        let terms: Vec<Complex64> = (-n0..=n0)
            .into_par_iter()
            .map(|j| sinh_term(v, c, n, Complex64::new(j as f64 * c.zeta_l, 0.0)))
            .collect();
        c.zeta_l * pairwise_sum(&terms)
    };
    Ok(v.scaled(s, n))
}

pub fn invert_sinh(v: &TransformEvaluator, n: usize, plan: &SinhPlan) -> Result<Complex64> {
    Ok(invert_sinh_scaled(v, n, plan)?.value())
}

/// Circle for `n < 8`, sinh contour otherwise; `M` from [`auto_m`].
pub fn invert_auto(v: &TransformEvaluator, n: usize, eps: f64) -> Result<ScaledValue> {
    let m = auto_m(eps);
    if n < N_MIN_SINH {
        let plan = choose_trap_params(0.1 * eps, n.max(1), m)?;
        invert_trapezoid_scaled(v, n, &plan)
    } else {
        let plan = choose_sinh_params(v, 0.1 * eps, n, m)?;
        invert_sinh_scaled(v, n, &plan)
    }
}

/// Node counts measured in double-double arithmetic, free of the roundoff
/// that terms of size `e^M` cause in `f64`.
pub mod measure {
    use super::*;

    fn dd_cis(num: u128, den: u128) -> Cdd {
        // e^{2πi·num/den}
        let ang = Dd::PI.mul_f64(2.0) * (Dd::new(num as f64) / Dd::new(den as f64));
        let (s, c) = ang.sin_cos();
        Cdd::new(c, s)
    }

    fn dd_abs(z: Cdd) -> f64 {
        z.norm_sqr().to_f64().sqrt()
    }

    /// Trapezoid sum on `|q| = e^{−M/n}` with `N` nodes, in double-double.
    pub fn trapezoid_sum_dd(f: &(dyn Fn(Cdd) -> Cdd + Sync), n: usize, m: f64, big_n: usize) -> Cdd {
        let r = (Dd::new(-m) / Dd::new(n as f64)).exp();
        let rn = Dd::new(m).exp();
        let terms: Vec<Cdd> = (0..big_n)
            .into_par_iter()
            .map(|k| {
                let z = dd_cis(k as u128, big_n as u128);
                let kn = (k as u128 * n as u128) % big_n as u128;
                let zn = dd_cis(big_n as u128 - kn, big_n as u128);
                f(z.scale(r)) * zn.scale(rn)
            })
            .collect();
        let mut s = Cdd::default();
        for t in terms {
            s = s + t;
        }
        s.scale(Dd::ONE / Dd::new(big_n as f64))
    }

    /// Smallest `N` whose trapezoid error is at most `eps` (error assumed
    /// monotone in `N`, as it is for `1/(1 − q)`).
    pub fn min_trapezoid_nodes(
        f: &(dyn Fn(Cdd) -> Cdd + Sync),
        exact: Dd,
        n: usize,
        m: f64,
        eps: f64,
        n_max: usize,
    ) -> Option<usize> {
        let err = |nn: usize| dd_abs(trapezoid_sum_dd(f, n, m, nn) - Cdd::real(exact));
        if !(err(n_max) <= eps) {
            return None;
        }
        let (mut lo, mut hi) = (1usize, n_max);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if err(mid) <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Term at the node `y = jζ`, formed exactly in double-double.
    pub fn dd_sinh_term(f: &(dyn Fn(Cdd) -> Cdd + Sync), c: &SinhZContour, n: usize, j: i64) -> Cdd {
        let yd = Dd::new(j as f64) * Dd::new(c.zeta_l);
        let ey = yd.exp();
        let emy = Dd::ONE / ey;
        let sh = (ey - emy).mul_f64(0.5);
        let ch = (ey + emy).mul_f64(0.5);
        let (so, co) = Dd::new(c.omega_l).sin_cos();
        let b = Dd::new(c.b_l);
        let q = Cdd::new(Dd::new(c.sigma_l) - b * ch * so, b * sh * co);
        let cosh_w = Cdd::new(ch * co, sh * so);
        let pref = b / Dd::PI.mul_f64(2.0);
        (q.recip().powi(n as i32 + 1) * f(q) * cosh_w).scale(pref)
    }

    /// `|S(N₀) − exact|` for every one-sided truncation `N₀ ≤ j_max` of the
    /// symmetric half-sum.
    pub fn sinh_truncation_errors(
        f: &(dyn Fn(Cdd) -> Cdd + Sync),
        exact: Dd,
        n: usize,
        c: &SinhZContour,
        j_max: usize,
    ) -> Vec<f64> {
        let terms: Vec<Cdd> = (0..=j_max)
            .into_par_iter()
            .map(|j| dd_sinh_term(f, c, n, j as i64))
            .collect();
        let zeta = Dd::new(c.zeta_l);
        let mut s = terms[0].re.mul_f64(0.5);
        let mut errs = Vec::with_capacity(j_max + 1);
        errs.push(((s * zeta).mul_f64(2.0) - exact).abs().to_f64());
        for t in &terms[1..] {
            s = s + t.re;
            errs.push(((s * zeta).mul_f64(2.0) - exact).abs().to_f64());
        }
        errs
    }

    /// Smallest one-sided truncation `N₀` at the plan's step for which the
    /// symmetric half-sum stays within `eps` of `exact`; `None` when even
    /// the longest sum misses.
    pub fn min_sinh_terms(
        f: &(dyn Fn(Cdd) -> Cdd + Sync),
        exact: Dd,
        n: usize,
        c: &SinhZContour,
        eps: f64,
        j_max: usize,
    ) -> Option<usize> {
        let errs = sinh_truncation_errors(f, exact, n, c, j_max);
        if !(*errs.last()? <= eps) {
            return None;
        }
        let mut k = errs.len() - 1;
        while k > 0 && errs[k - 1] <= eps {
            k -= 1;
        }
        Some(k)
    }

    /// `1/(1 − q)` in double-double.
    pub fn pole_at_one(q: Cdd) -> Cdd {
        (Cdd::real(Dd::ONE) - q).recip()
    }

    /// Predicted and measured node counts of both engines for `1/(1 − q)`,
    /// whose coefficients are all 1. Sinh counts are `2N₀ + 1` nodes; the
    /// errors are those of each engine's own plan, in double-double.
    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct BenchmarkRow {
        pub n: usize,
        pub m: f64,
        pub eps: f64,
        pub n_trap_predicted: f64,
        pub n_trap_measured: Option<usize>,
        pub n_sinh_predicted: f64,
        pub n_sinh_measured: Option<usize>,
        pub k_predicted: f64,
        pub k_measured: Option<f64>,
        pub err_trap: f64,
        pub err_sinh: f64,
    }

    pub fn benchmark_row(n: usize, m: f64, eps: f64) -> Result<BenchmarkRow> {
        let f: &(dyn Fn(Cdd) -> Cdd + Sync) = &pole_at_one;
        let trap = choose_trap_params(eps, n, m)?;
        let v = TransformEvaluator::new(|q| 1.0 / (1.0 - q), 0.0, 1.0, 0.0, BoundKind::PoleAtOne)?;
        let sinh = choose_sinh_params(&v, eps, n, m)?;
        let n_max = 4 * (trap.n_approx.ceil() as usize).max(trap.n_terms);
        let n_trap_measured = min_trapezoid_nodes(f, Dd::ONE, n, m, eps, n_max);
        let j_max = 4 * sinh.contour.n_l.max(sinh.predicted_terms);
        let errs = sinh_truncation_errors(f, Dd::ONE, n, &sinh.contour, j_max);
        let n_sinh_measured = if errs.last().is_some_and(|e| *e <= eps) {
            let mut k = errs.len() - 1;
            while k > 0 && errs[k - 1] <= eps {
                k -= 1;
            }
            Some(2 * k + 1)
        } else {
            None
        };
        let k_measured = match (n_trap_measured, n_sinh_measured) {
            (Some(a), Some(b)) => Some(a as f64 / b as f64),
            _ => None,
        };
        let err_trap = dd_abs(trapezoid_sum_dd(f, n, m, trap.n_terms) - Cdd::real(Dd::ONE));
        let err_sinh = errs[sinh.contour.n_l.min(j_max)];
        Ok(BenchmarkRow {
            n,
            m,
            eps,
            n_trap_predicted: trap.n_approx,
            n_trap_measured,
            n_sinh_predicted: (2 * sinh.predicted_terms + 1) as f64,
            n_sinh_measured,
            k_predicted: gain_factor(eps, n, m)?,
            k_measured,
            err_trap,
            err_sinh,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pole_at_one<'a>() -> TransformEvaluator<'a> {
        TransformEvaluator::new(|q| 1.0 / (1.0 - q), 0.0, 1.0, 0.0, BoundKind::PoleAtOne).unwrap()
    }

    #[test]
    fn trapezoid_geometric_and_entire() {
        let v = TransformEvaluator::new(|q| 1.0 / (1.0 - q / 2.0), 0.0, 1.0, 0.0, BoundKind::Generic).unwrap();
        let plan = TrapPlan { r: 0.5, n_terms: 64, m: 1.0, m1: 0.9, rho: 1.5, n_approx: 0.0 };
        let x = invert_trapezoid(&v, 3, &plan).unwrap();
        assert!((x.re - 0.125).abs() < 1e-12 && x.im.abs() < 1e-12);

        let v = TransformEvaluator::new(|q| q.exp(), 0.0, 1.0, 0.0, BoundKind::Generic).unwrap();
        let plan = TrapPlan { r: 0.9, ..plan };
        let x = invert_trapezoid(&v, 5, &plan).unwrap();
        assert!((x.re - 1.0 / 120.0).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_pole_at_one_any_n() {
        let v = pole_at_one();
        for n in [0usize, 1, 7, 40] {
            let plan = choose_trap_params(1e-13, n.max(1), 5.0).unwrap();
            let x = invert_trapezoid(&v, n, &plan).unwrap();
            assert!((x.re - 1.0).abs() < 1e-11, "n={n} {x}");
            assert!(x.im.abs() <= plan.n_terms as f64 * f64::EPSILON * 5f64.exp() * 10.0);
        }
    }

    #[test]
    fn trapezoid_plan_numbers() {
        let p = choose_trap_params(1e-15, 1260, 23.0).unwrap();
        assert!((p.n_approx - 4412.0).abs() < 2.0, "{}", p.n_approx);
        assert!((p.r - (-23.0f64 / 1260.0).exp()).abs() < 1e-15);
        assert!(p.r * p.rho < 1.0);
        let q = choose_trap_params(1e-15, 1260, 40.0).unwrap();
        assert!(q.n_approx < p.n_approx);
        let small = choose_trap_params(1e-15, 1, 1.0).unwrap();
        assert!(small.n_terms >= 2 && small.n_terms < 200, "{}", small.n_terms);
    }

    #[test]
    fn hardy_circle_matches_quadrature() {
        for r in [0.0, 0.3, 0.9, 0.999] {
            let pts = 200_000;
            let s: f64 = (0..pts)
                .map(|k| {
                    let phi = 2.0 * PI * (k as f64 + 0.5) / pts as f64;
                    1.0 / (1.0 - Complex64::from_polar(r, phi)).norm()
                })
                .sum::<f64>()
                * 2.0
                * PI
                / pts as f64;
            assert!((hardy_circle(r) - s).abs() < 1e-6 * s, "r={r}");
        }
    }

    #[test]
    fn error_bound_dominates_actual_error() {
        let v = pole_at_one();
        let n = 100;
        let rho: f64 = 1.05;
        let r: f64 = 0.9;
        let mut last = f64::INFINITY;
        for big_n in [20usize, 40, 80, 160] {
            let plan = TrapPlan { r, n_terms: big_n, m: 0.0, m1: 0.0, rho, n_approx: 0.0 };
            let bound = trapezoid_error_bound(&v, n, &plan);
            let err = (invert_trapezoid(&v, n, &plan).unwrap().re - 1.0).abs();
            assert!(bound >= err, "N={big_n}: {bound} < {err}");
            assert!(bound < last);
            last = bound;
        }
        let near = TrapPlan { r, n_terms: 40, m: 0.0, m1: 0.0, rho: 1.0 + 1e-9, n_approx: 0.0 };
        assert!(trapezoid_error_bound(&v, n, &near) > 1e6);
    }

    #[test]
    fn sinh_plan_reference_numbers() {
        let v = pole_at_one();
        let p = choose_sinh_params(&v, 1e-15, 1260, 23.0).unwrap();
        assert!((p.contour.zeta_l - 0.02392).abs() < 1e-4, "{}", p.contour.zeta_l);
        assert!((p.contour.left_vertex() - 0.96591).abs() < 1e-5);
        assert!((p.contour.right_vertex() - 0.99818).abs() < 1e-5);
        assert!((p.predicted_terms as f64 - 154.0).abs() <= 2.0, "{}", p.predicted_terms);
    }

    #[test]
    fn sinh_pole_at_one() {
        let v = pole_at_one();
        for n in [10usize, 100, 1260] {
            let x = invert_auto(&v, n, 1e-12).unwrap().value();
            assert!((x.re - 1.0).abs() < 1e-12, "n={n}: {x}");
        }
    }

    #[test]
    fn sinh_geometric_underflow() {
        // 1/(1 − q/2) with R = 2 becomes 1/(1 − q)
        let v = pole_at_one().with_scaling(2.0, 0.0);
        let s = invert_auto(&v, 1000, 1e-12).unwrap();
        let expect = -1000.0 * 2f64.ln();
        assert!((s.mantissa.re - 1.0).abs() < 1e-10);
        assert_eq!(s.log_scale, expect);
        assert!((s.value().re / 2f64.powi(-1000) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sinh_partial_fractions() {
        let v = TransformEvaluator::new(
            |q| 1.0 / ((1.0 - q) * (1.0 - q / 3.0)),
            0.0,
            1.5,
            0.0,
            BoundKind::PoleAtOne,
        )
        .unwrap();
        let x = invert_auto(&v, 50, 1e-12).unwrap().value();
        let exact = (3.0 - 3f64.powi(-50)) / 2.0;
        assert!((x.re - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn engines_agree() {
        let v = TransformEvaluator::new(
            |q| 1.0 / ((1.0 - q) * (1.0 - q / 3.0)),
            0.0,
            1.5,
            0.0,
            BoundKind::PoleAtOne,
        )
        .unwrap();
        for n in [8usize, 20, 50] {
            let t = invert_trapezoid(&v, n, &choose_trap_params(1e-13, n, 5.0).unwrap()).unwrap();
            let s = invert_sinh(&v, n, &choose_sinh_params(&v, 1e-13, n, 5.0).unwrap()).unwrap();
            assert!((t - s).norm() < 1e-11, "n={n}");
        }
    }

    #[test]
    fn sinh_rejects_small_n() {
        let v = TransformEvaluator::new(|q| 1.0 / (1.0 - q), 12.0, 1.0, 0.0, BoundKind::PoleAtOne).unwrap();
        let plan = choose_sinh_params(&pole_at_one(), 1e-10, 10, 3.0).unwrap();
        assert!(invert_sinh(&v, 10, &plan).is_err());
    }

    #[test]
    fn gain_factors() {
        assert!((gain_factor(1e-15, 1260, 23.0).unwrap() - 13.7).abs() < 0.1);
        assert!((gain_factor(1e-15, 3780, 23.0).unwrap() - 32.2).abs() < 0.1);
        assert!((gain_factor(1e-15, 7560, 23.0).unwrap() - 56.7).abs() < 0.1);
        assert!(gain_factor(1e-15, 50, 23.0).is_err());
    }

    #[test]
    fn resolvent_bounds() {
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(resolvent_bound(z, 1.0, 0.0, ResolventKind::SelfAdjoint).unwrap(), 4.0);
        let q = Complex64::from_polar(2.0, PI - 0.5);
        let b = resolvent_bound(q, 1.0, 0.1, ResolventKind::NormalSector { gamma_prime: 0.4 }).unwrap();
        assert!((b - 1.0 / 0.3f64.sin()).abs() < 1e-15);
        assert!(resolvent_bound(Complex64::new(1.5, 0.0), 1.0, 0.0, ResolventKind::SelfAdjoint).is_err());
    }

    #[test]
    fn invalid_evaluators() {
        assert!(TransformEvaluator::new(|q| q, 0.0, 1.0, 1.7, BoundKind::Generic).is_err());
        assert!(TransformEvaluator::new(|q| q, 0.0, 0.0, 0.1, BoundKind::Generic).is_err());
    }
}
