//! Level sets `Im ψ(ξ) = δ` in the right half-plane and the symmetric
//! contours built from them.
//!
//! A curve is a graph `ξ(t) = t + i y(t)` over the whole real line: a
//! traced wing for `t ≥ x_s`, a cubic blend on `[0, x_s]` that leaves `iu`
//! horizontally, and the mirror image `(x, y) ↦ (−x, y)` for `t < 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy::LevyModel;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_DELTA_STAR: f64 = 0.1;
const STEP_FACTOR: f64 = 0.02;
const MAX_HALVINGS: usize = 30;

/// One point of a traced wing: `x + i y` with `dy/dx = slope`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub x: f64,
    pub y: f64,
    pub slope: f64,
}

fn level_residual(m: &LevyModel, x: f64, y: f64, delta: f64) -> (f64, Complex64) {
    let xi = Complex64::new(x, y);
    (m.psi_unchecked(xi).im - delta, m.psi_prime_unchecked(xi))
}

fn slope_at(dpsi: Complex64) -> f64 {
    -dpsi.im / dpsi.re
}

fn inside(m: &LevyModel, y: f64) -> bool {
    let (lo, hi) = m.strip();
    y > lo && y < hi
}

/// Solve `Im ψ(x + iy) = δ` for `y` near `guess`.
fn correct(m: &LevyModel, x: f64, guess: f64, width: f64, delta: f64) -> Option<f64> {
    let mut y = guess;
    for _ in 0..40 {
        if !inside(m, y) {
            break;
        }
        let (g, d) = level_residual(m, x, y, delta);
        // ∂_y Im ψ(x + iy) = Re ψ'
        let step = g / d.re;
        if !step.is_finite() || step.abs() > width {
            break;
        }
        y -= step;
        // Im ψ carries roundoff of order ε·|ξ ψ'|
        let noise = 16.0 * f64::EPSILON * (1.0 + x.hypot(y) * d.norm());
        if step.abs() <= 1e-15 * (1.0 + y.abs()) || g.abs() <= noise {
            return Some(y);
        }
    }
    // bisection on a bracket around the guess
    let g = |y: f64| level_residual(m, x, y, delta).0;
    let (mut a, mut b) = (guess - width, guess + width);
    if !inside(m, a) || !inside(m, b) {
        return None;
    }
    let (mut ga, gb) = (g(a), g(b));
    if !(ga * gb <= 0.0) {
        return None;
    }
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        let gc = g(c);
        if gc * ga <= 0.0 {
            b = c;
        } else {
            a = c;
            ga = gc;
        }
        if b - a <= 1e-15 * (1.0 + c.abs()) {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// Why a trace stopped early.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum TraceStop {
    Reached,
    LeftStrip,
}

pub(crate) fn trace_until(
    m: &LevyModel,
    start: TracePoint,
    delta: f64,
    x_max: f64,
    y_limit: (f64, f64),
) -> Result<(Vec<TracePoint>, TraceStop)> {
    let mut pts = vec![start];
    let mut cur = start;
    while cur.x < x_max {
        let mut h = (STEP_FACTOR * (1.0 + cur.x)).min(x_max - cur.x);
        let mut next = None;
        for _ in 0..MAX_HALVINGS {
            let x = cur.x + h;
            let guess = cur.y + cur.slope * h;
            let width = (h * (1.0 + cur.slope.abs())).max(1e-12);
            if let Some(y) = correct(m, x, guess, width, delta) {
                if y <= y_limit.0 || y >= y_limit.1 {
                    return Ok((pts, TraceStop::LeftStrip));
                }
                let (_, d) = level_residual(m, x, y, delta);
                let slope = slope_at(d);
                if slope.is_finite() {
                    next = Some(TracePoint { x, y, slope });
                    break;
                }
            }
            h *= 0.5;
        }
        match next {
            Some(p) => {
                pts.push(p);
                cur = p;
            }
            None => {
                return Err(Error::numerical(format!(
                    "level-curve trace failed after x = {}, y = {} (degenerate field near a zero of ψ')",
                    cur.x, cur.y
                )))
            }
        }
    }
    Ok((pts, TraceStop::Reached))
}

/// Follow the level set through `start` to `Re ξ = x_max`.
pub fn trace_trajectory(m: &LevyModel, start: Complex64, delta: f64, x_max: f64, tol: f64) -> Result<Vec<TracePoint>> {
    if !(start.re > 0.0) {
        return Err(Error::param("trajectory start must have Re ξ > 0"));
    }
    if !inside(m, start.im) {
        return Err(Error::domain("trajectory start lies outside the model strip"));
    }
    let (g, d) = level_residual(m, start.re, start.im, delta);
    if !(g.abs() <= tol) {
        return Err(Error::param(format!("Im ψ(start) misses the level by {g:e}")));
    }
    let first = TracePoint { x: start.re, y: start.im, slope: slope_at(d) };
    let (pts, stop) = trace_until(m, first, delta, x_max, m.strip())?;
    if stop == TraceStop::LeftStrip {
        let last = pts.last().unwrap();
        return Err(Error::domain(format!(
            "trajectory leaves the strip after x = {}, y = {}",
            last.x, last.y
        )));
    }
    Ok(pts)
}

/// Cubic Hermite on `[x0, x1]`: value and derivative at `x`.
fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1;
    let dv = ((6.0 * s2 - 6.0 * s) * y0 + (-6.0 * s2 + 6.0 * s) * y1) / h
        + (3.0 * s2 - 4.0 * s + 1.0) * d0
        + (3.0 * s2 - 2.0 * s) * d1;
    (v, dv)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveSegment {
    /// Interpolant from `iu` to the first traced point; off the level set.
    Connector,
    Traced,
    Flat,
}

impl CurveSegment {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveSegment::Connector => "connector",
            CurveSegment::Traced => "traced",
            CurveSegment::Flat => "flat",
        }
    }
}

/// `L(δ, u)`, optionally flattened beyond `±x*`.
#[derive(Clone, Debug)]
pub struct ExtendedCurve {
    pub delta: f64,
    pub u: f64,
    /// `(t, ξ(t))` in increasing `t`.
    pub samples: Vec<(f64, Complex64)>,
    pub flatten_at: Option<f64>,
    pub d_curve: f64,
    model: LevyModel,
    wing: Vec<TracePoint>,
    flat_y: f64,
}

impl ExtendedCurve {
    pub fn x_start(&self) -> f64 {
        self.wing[0].x
    }

    /// Last traced abscissa.
    pub fn x_end(&self) -> f64 {
        self.wing.last().unwrap().x
    }

    /// `(y(x), y'(x))` for `x ≥ 0`, unflattened.
    fn graph(&self, x: f64) -> (f64, f64) {
        let s = &self.wing[0];
        if x <= s.x {
            return hermite(0.0, s.x, self.u, s.y, 0.0, s.slope, x);
        }
        let k = self.wing.partition_point(|p| p.x <= x);
        let (guess, width) = if k >= self.wing.len() {
            let p = self.wing.last().unwrap();
            (p.y + p.slope * (x - p.x), (x - p.x) * (1.0 + p.slope.abs()) + 1e-9)
        } else {
            let (a, b) = (&self.wing[k - 1], &self.wing[k]);
            let (g, _) = hermite(a.x, b.x, a.y, b.y, a.slope, b.slope, x);
            (g, (b.x - a.x) * (1.0 + a.slope.abs().max(b.slope.abs())))
        };
        match correct(&self.model, x, guess, width, self.delta) {
            Some(y) => {
                let (_, d) = level_residual(&self.model, x, y, self.delta);
                (y, slope_at(d))
            }
            None => (guess, f64::NAN),
        }
    }

    /// `ξ(t)` and `ξ'(t)`.
    pub fn eval(&self, t: f64) -> (Complex64, Complex64) {
        let x = t.abs();
        let (y, dy) = match self.flatten_at {
            Some(xs) if x >= xs => (self.flat_y, 0.0),
            _ => self.graph(x),
        };
        (Complex64::new(t, y), Complex64::new(1.0, t.signum() * dy))
    }

    pub fn point(&self, t: f64) -> Complex64 {
        self.eval(t).0
    }

    pub fn deriv(&self, t: f64) -> Complex64 {
        self.eval(t).1
    }

    /// Largest `|Im ψ|` over the samples and a sweep of flat wings.
    pub fn max_abs_im_psi(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &(_, xi) in &self.samples {
            worst = worst.max(self.model.psi_unchecked(xi).im.abs());
        }
        worst
    }

    /// Which piece of the curve carries the parameter `t`.
    pub fn segment(&self, t: f64) -> CurveSegment {
        let x = t.abs();
        match self.flatten_at {
            Some(xs) if x >= xs => CurveSegment::Flat,
            _ if x < self.x_start() => CurveSegment::Connector,
            _ => CurveSegment::Traced,
        }
    }

    /// Largest `|Im ψ − sgn(t)δ|` over the samples on the traced level set.
    pub fn max_traced_residual(&self) -> f64 {
        self.csv_rows()
            .iter()
            .filter(|r| self.segment(r[0]) == CurveSegment::Traced)
            .fold(0.0, |w, r| w.max(r[3].abs()))
    }

    /// Rows `(t, Re ξ, Im ξ, Im ψ(ξ) − sgn(t)δ)` for plotting.
    pub fn csv_rows(&self) -> Vec<[f64; 4]> {
        self.samples
            .iter()
            .map(|&(t, xi)| {
                let r = self.model.psi_unchecked(xi).im - t.signum() * self.delta;
                [t, xi.re, xi.im, r]
            })
            .collect()
    }
}

fn connector_samples(u: f64, s: &TracePoint, count: usize) -> Vec<(f64, Complex64)> {
    (0..count)
        .map(|k| {
            let x = s.x * k as f64 / count as f64;
            let (y, _) = hermite(0.0, s.x, u, s.y, 0.0, s.slope, x);
            (x, Complex64::new(x, y))
        })
        .collect()
}

fn mirrored(right: &[(f64, Complex64)]) -> Vec<(f64, Complex64)> {
    let mut out: Vec<(f64, Complex64)> = right
        .iter()
        .rev()
        .filter(|p| p.0 > 0.0)
        .map(|&(t, xi)| (-t, Complex64::new(-xi.re, xi.im)))
        .collect();
    out.extend_from_slice(right);
    out
}

/// Root of `Im ψ(x + iy) = δ` in `y` closest to `u`, by scanning the strip.
fn level_root_near(m: &LevyModel, x: f64, delta: f64, u: f64) -> Option<f64> {
    let (lo, hi) = m.strip();
    let a = lo.max(u - 50.0) + 1e-9;
    let b = hi.min(u + 50.0) - 1e-9;
    let n = 2000;
    let h = (b - a) / n as f64;
    let g = |y: f64| level_residual(m, x, y, delta).0;
    let mut best: Option<f64> = None;
    let mut prev = g(a);
    for k in 1..=n {
        let y1 = a + h * k as f64;
        let cur = g(y1);
        if prev.is_finite() && cur.is_finite() && prev * cur <= 0.0 {
            if let Some(r) = correct(m, x, y1 - 0.5 * h, 0.5 * h, delta) {
                if best.map_or(true, |b| (r - u).abs() < (b - u).abs()) {
                    best = Some(r);
                }
            }
        }
        prev = cur;
    }
    best
}

/// Zeros of `ψ'` on the imaginary axis inside the strip.
fn psi_prime_axis_zeros(m: &LevyModel) -> Vec<f64> {
    let (lo, hi) = m.strip();
    let a = lo.max(-50.0) + 1e-6;
    let b = hi.min(50.0) - 1e-6;
    let n = 4000;
    let h = (b - a) / n as f64;
    let f = |y: f64| m.psi_prime_unchecked(Complex64::new(0.0, y)).im;
    let mut out = Vec::new();
    let mut prev = f(a);
    for k in 1..=n {
        let y = a + h * k as f64;
        let cur = f(y);
        if prev * cur <= 0.0 {
            let (mut l, mut r) = (y - h, y);
            for _ in 0..60 {
                let c = 0.5 * (l + r);
                if f(l) * f(c) <= 0.0 {
                    r = c;
                } else {
                    l = c;
                }
            }
            out.push(0.5 * (l + r));
        }
        prev = cur;
    }
    out
}

fn find_start(m: &LevyModel, delta: f64, u: f64, x_max: f64, limit: (f64, f64)) -> Result<TracePoint> {
    let mut x_s = 0.05;
    loop {
        if x_s > 0.5 * x_max {
            return Err(Error::numerical(format!("no start for the level curve δ = {delta} near iu = {u}i")));
        }
        if let Some(y) = level_root_near(m, x_s, delta, u) {
            if (y - u).abs() <= 2.0 * x_s && y > limit.0 && y < limit.1 {
                let (_, d) = level_residual(m, x_s, y, delta);
                return Ok(TracePoint { x: x_s, y, slope: slope_at(d) });
            }
        }
        x_s *= 2.0;
    }
}

fn start_and_connector(
    m: &LevyModel,
    delta: f64,
    u: f64,
    x_max: f64,
    limit: (f64, f64),
) -> Result<(TracePoint, Vec<(f64, Complex64)>)> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::param("level δ must be non-zero"));
    }
    if !inside(m, u) {
        return Err(Error::domain(format!("iu = {u}i lies outside the model strip")));
    }
    let start = find_start(m, delta, u, x_max, limit)?;
    let conn = connector_samples(u, &start, 64);
    if conn.iter().any(|p| !(p.1.im > limit.0 && p.1.im < limit.1)) {
        return Err(Error::domain("connector would cross a cut"));
    }
    Ok((start, conn))
}

pub fn build_extended_curve(m: &LevyModel, delta: f64, u: f64, x_max: f64) -> Result<ExtendedCurve> {
    let (start, conn) = start_and_connector(m, delta, u, x_max, m.strip())?;
    let (wing, stop) = trace_until(m, start, delta, x_max, m.strip())?;
    if stop == TraceStop::LeftStrip {
        let last = wing.last().unwrap();
        return Err(Error::domain(format!(
            "level curve leaves the strip after x = {}, y = {}",
            last.x, last.y
        )));
    }
    Ok(assemble(m, delta, u, conn, wing))
}

fn assemble(m: &LevyModel, delta: f64, u: f64, conn: Vec<(f64, Complex64)>, wing: Vec<TracePoint>) -> ExtendedCurve {
    let mut right = conn;
    right.extend(wing.iter().map(|p| (p.x, Complex64::new(p.x, p.y))));
    let mut c = ExtendedCurve {
        delta,
        u,
        samples: mirrored(&right),
        flatten_at: None,
        d_curve: 0.0,
        model: m.clone(),
        flat_y: f64::NAN,
        wing,
    };
    c.d_curve = strip_width_estimate(&c);
    c
}

/// Trace as far as `x_max` or until the curve leaves the band
/// `limit.0 < Im ξ < limit.1`, whichever is first.
pub(crate) fn build_curve_within(
    m: &LevyModel,
    delta: f64,
    u: f64,
    x_max: f64,
    limit: (f64, f64),
) -> Result<ExtendedCurve> {
    let (lo, hi) = m.strip();
    let limit = (limit.0.max(lo), limit.1.min(hi));
    let (start, conn) = start_and_connector(m, delta, u, x_max, limit)?;
    let (wing, _) = trace_until(m, start, delta, x_max, limit)?;
    Ok(assemble(m, delta, u, conn, wing))
}

/// Hold `Im ξ` at `y(±x*)` beyond `±x*`.
pub fn flatten_curve(c: &ExtendedCurve, x_star: f64) -> Result<ExtendedCurve> {
    flatten_curve_with(c, x_star, DEFAULT_DELTA_STAR)
}

pub fn flatten_curve_with(c: &ExtendedCurve, x_star: f64, delta_star: f64) -> Result<ExtendedCurve> {
    if !(x_star > 0.0) {
        return Err(Error::param("x* must be positive"));
    }
    if x_star >= c.x_end() {
        return Ok(c.clone());
    }
    let (y_star, _) = c.graph(x_star);
    let m = &c.model;
    let mut worst: f64 = 0.0;
    let x_far = (1e3 * x_star).max(1e6);
    let n = 400;
    for k in 0..=n {
        let x = x_star * (x_far / x_star).powf(k as f64 / n as f64);
        for s in [x, -x] {
            worst = worst.max(m.psi_unchecked(Complex64::new(s, y_star)).im.abs());
        }
    }
    if !(worst < delta_star) {
        return Err(Error::domain(format!(
            "flat wings at x* = {x_star} reach |Im ψ| = {worst:.6} ≥ δ* = {delta_star}"
        )));
    }
    let mut out = c.clone();
    out.flatten_at = Some(x_star);
    out.flat_y = y_star;
    let right: Vec<(f64, Complex64)> = c
        .samples
        .iter()
        .filter(|p| p.0 >= 0.0 && p.0 < x_star)
        .copied()
        .chain((0..=40).map(|k| {
            let x = x_star * 4f64.powf(k as f64 / 4.0);
            (x, Complex64::new(x, y_star))
        }))
        .collect();
    out.samples = mirrored(&right);
    out.d_curve = strip_width_estimate(&out).min(c.d_curve);
    Ok(out)
}

/// Lower estimate of the analyticity half-width of `t ↦ ξ(t)`.
pub fn strip_width_estimate(c: &ExtendedCurve) -> f64 {
    let (lo, hi) = c.model.strip();
    let zeros = psi_prime_axis_zeros(&c.model);
    let mut best = f64::INFINITY;
    for &(t, xi) in &c.samples {
        let mut d = f64::INFINITY;
        if hi.is_finite() {
            d = d.min(if xi.im >= hi { xi.re.abs() } else { (xi - Complex64::new(0.0, hi)).norm() });
        }
        if lo.is_finite() {
            d = d.min(if xi.im <= lo { xi.re.abs() } else { (xi - Complex64::new(0.0, lo)).norm() });
        }
        for &z in &zeros {
            d = d.min((xi - Complex64::new(0.0, z)).norm());
        }
        best = best.min(d / c.deriv(t).norm());
    }
    0.8 * best
}

/// Two curves with `lower` strictly below `upper`.
#[derive(Clone, Debug)]
pub struct CurvePair {
    pub lower: ExtendedCurve,
    pub upper: ExtendedCurve,
    /// Smallest sampled vertical gap.
    pub min_gap: f64,
}

impl CurvePair {
    pub fn new(lower: ExtendedCurve, upper: ExtendedCurve) -> Result<Self> {
        let t_max = lower.x_end().min(upper.x_end());
        let mut min_gap = f64::INFINITY;
        for k in 0..=2000 {
            let t = t_max * k as f64 / 2000.0;
            let gap = upper.point(t).im - lower.point(t).im;
            min_gap = min_gap.min(gap);
        }
        if !(min_gap > 0.0) {
            return Err(Error::domain(format!("curves intersect (gap {min_gap:e})")));
        }
        Ok(CurvePair { lower, upper, min_gap })
    }
}
