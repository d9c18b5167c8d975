//! Fourier transforms of payoffs.
//!
//! Convention: `Ĝ(ξ) = ∫ e^{−ixξ} G(x) dx`, written as `e^{−iaξ} Ĝ₀(ξ)`.
//! Every supported `Ĝ₀` is a finite sum of pole terms `c/(ξ − p)^k`, which
//! gives closed forms for the transform, its continuation off the strip of
//! convergence, and the payoff itself (by residues).
//!
//! The damping parameter `β` places the inversion line at `Im ξ = −β`, so a
//! put needs `β < 0` and a call needs `β > 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayoffKind {
    Put,
    Call,
    /// `1_{[a, ∞)}(x)`.
    DigitalUp,
    /// `1_{(−∞, a)}(x)`.
    DigitalDown,
    Custom,
}

impl std::str::FromStr for PayoffKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "put" => Ok(PayoffKind::Put),
            "call" => Ok(PayoffKind::Call),
            "digital_up" => Ok(PayoffKind::DigitalUp),
            "digital_down" => Ok(PayoffKind::DigitalDown),
            "custom" => Ok(PayoffKind::Custom),
            other => Err(Error::param(format!("unknown payoff kind '{other}'"))),
        }
    }
}

/// `c/(ξ − p)^order`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleTerm {
    pub c: Complex64,
    pub p: Complex64,
    pub order: u32,
}

/// `e^{−iaξ} Σ c/(ξ − p)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffComponent {
    pub a: f64,
    pub poles: Vec<PoleTerm>,
}

impl PayoffComponent {
    /// `Ĝ₀` of this component, without the `e^{−iaξ}` factor.
    pub fn g0(&self, xi: Complex64) -> Complex64 {
        self.poles
            .iter()
            .map(|t| t.c / (xi - t.p).powu(t.order))
            .sum()
    }

    /// Distance from `ξ` to the nearest pole.
    pub fn pole_distance(&self, xi: Complex64) -> f64 {
        self.poles
            .iter()
            .map(|t| (xi - t.p).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PayoffTransform {
    kind: PayoffKind,
    a: f64,
    beta: f64,
    strip: (f64, f64),
    components: Vec<PayoffComponent>,
}

impl PayoffTransform {
    pub fn put(strike: f64, beta: f64) -> Result<Self> {
        let a = log_strike(strike)?;
        let k = Complex64::new(strike, 0.0);
        let comp = PayoffComponent {
            a,
            poles: vec![
                PoleTerm { c: I * k, p: Complex64::new(0.0, 0.0), order: 1 },
                PoleTerm { c: -I * k, p: -I, order: 1 },
            ],
        };
        Self::checked(PayoffKind::Put, a, beta, (0.0, f64::INFINITY), vec![comp])
    }

    pub fn call(strike: f64, beta: f64) -> Result<Self> {
        let mut p = Self::put(strike, -0.5)?;
        p.kind = PayoffKind::Call;
        p.strip = (f64::NEG_INFINITY, -1.0);
        p.beta = beta;
        p.check_beta()?;
        Ok(p)
    }

    pub fn digital_up(level: f64, beta: f64) -> Result<Self> {
        let comp = PayoffComponent {
            a: level,
            poles: vec![PoleTerm { c: -I, p: Complex64::new(0.0, 0.0), order: 1 }],
        };
        Self::checked(PayoffKind::DigitalUp, level, beta, (f64::NEG_INFINITY, 0.0), vec![comp])
    }

    pub fn digital_down(level: f64, beta: f64) -> Result<Self> {
        let comp = PayoffComponent {
            a: level,
            poles: vec![PoleTerm { c: I, p: Complex64::new(0.0, 0.0), order: 1 }],
        };
        Self::checked(PayoffKind::DigitalDown, level, beta, (0.0, f64::INFINITY), vec![comp])
    }

    /// A payoff given by its pole data. The declared strip must contain
    /// `−β` and be free of poles.
    pub fn custom(components: Vec<PayoffComponent>, strip: (f64, f64), beta: f64) -> Result<Self> {
        if !(strip.0 < strip.1) {
            return Err(Error::param("custom payoff strip must be non-empty"));
        }
        for c in &components {
            if !c.a.is_finite() {
                return Err(Error::param("custom payoff shift must be finite"));
            }
            for t in &c.poles {
                if t.order == 0 {
                    return Err(Error::param("pole order must be at least 1"));
                }
                if t.p.im > strip.0 && t.p.im < strip.1 {
                    return Err(Error::param(format!(
                        "pole at {} lies inside the declared strip ({}, {})",
                        t.p, strip.0, strip.1
                    )));
                }
            }
        }
        let a = components.first().map_or(0.0, |c| c.a);
        let out = Self::checked(PayoffKind::Custom, a, beta, strip, components)?;
        // real payoffs satisfy Ĝ(−conj ξ) = conj Ĝ(ξ)
        let line = -beta;
        for x in [0.3, 1.7, 9.0] {
            let xi = Complex64::new(x, line);
            let lhs = ghat_eval(&out, -xi.conj())?;
            let rhs = ghat_eval(&out, xi)?.conj();
            if (lhs - rhs).norm() > 1e-12 * (1.0 + rhs.norm()) {
                return Err(Error::param("custom payoff is not real-valued"));
            }
        }
        Ok(out)
    }

    /// `G ≡ 0`.
    pub fn zero() -> Self {
        PayoffTransform {
            kind: PayoffKind::Custom,
            a: 0.0,
            beta: 0.0,
            strip: (f64::NEG_INFINITY, f64::INFINITY),
            components: Vec::new(),
        }
    }

    fn checked(
        kind: PayoffKind,
        a: f64,
        beta: f64,
        strip: (f64, f64),
        components: Vec<PayoffComponent>,
    ) -> Result<Self> {
        let p = PayoffTransform { kind, a, beta, strip, components };
        p.check_beta()?;
        Ok(p)
    }

    fn check_beta(&self) -> Result<()> {
        let (lo, hi) = self.strip;
        if !(-self.beta > lo && -self.beta < hi) {
            return Err(Error::param(format!(
                "β = {} puts the line Im ξ = {} outside the payoff strip ({lo}, {hi}); admissible β ∈ ({}, {})",
                self.beta, -self.beta, -hi, -lo
            )));
        }
        Ok(())
    }

    /// Same payoff with another damping parameter.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let mut p = self.clone();
        p.beta = beta;
        p.check_beta()?;
        Ok(p)
    }

    /// The transform of `e^{−θx}G(x)`: `Ĝ(ξ − iθ)`, on the strip and line
    /// moved up by `θ`.
    pub fn tilted(&self, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::param("tilt must be finite"));
        }
        let shift = Complex64::new(0.0, theta);
        let components = self
            .components
            .iter()
            .map(|c| PayoffComponent {
                a: c.a,
                poles: c
                    .poles
                    .iter()
                    .map(|t| PoleTerm { c: t.c * (-c.a * theta).exp(), p: t.p + shift, order: t.order })
                    .collect(),
            })
            .collect();
        let strip = (self.strip.0 + theta, self.strip.1 + theta);
        Self::checked(PayoffKind::Custom, self.a, self.beta - theta, strip, components)
    }

    /// `k·G`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut p = self.clone();
        for c in &mut p.components {
            for t in &mut c.poles {
                t.c *= k;
            }
        }
        p
    }

    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn components(&self) -> &[PayoffComponent] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.poles.iter().all(|t| t.c == Complex64::new(0.0, 0.0)))
    }
}

fn log_strike(strike: f64) -> Result<f64> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::param(format!("strike must be positive, got {strike}")));
    }
    Ok(strike.ln())
}

/// `Ĝ(ξ)`, continued meromorphically off the strip.
pub fn ghat_eval(p: &PayoffTransform, xi: Complex64) -> Result<Complex64> {
    let mut s = Complex64::new(0.0, 0.0);
    for c in &p.components {
        if c.pole_distance(xi) < 1e-300 {
            return Err(Error::domain(format!("ξ = {xi} is a pole of the payoff transform")));
        }
        s += (-I * c.a * xi).exp() * c.g0(xi);
    }
    Ok(s)
}

/// Strip `(μ′₋, μ′₊)` in `Im ξ` where the defining integral converges.
pub fn regularity_strip(p: &PayoffTransform) -> (f64, f64) {
    p.strip
}

/// `sup |ξ Ĝ₀(ξ)|` over `|ξ| ≥ 1` on the rays `arg ξ ∈ {±γ, π ± γ}`, sampled.
pub fn decay_constant(p: &PayoffTransform, gamma: f64) -> f64 {
    let mut c: f64 = 0.0;
    for comp in &p.components {
        for ang in [gamma, -gamma, std::f64::consts::PI - gamma, std::f64::consts::PI + gamma] {
            for k in 0..=80 {
                let r = 10f64.powf(k as f64 * 0.05);
                let xi = Complex64::from_polar(r, ang);
                if comp.pole_distance(xi) > 1e-8 {
                    c = c.max((xi * comp.g0(xi)).norm());
                }
            }
        }
    }
    c
}

/// `G(x)` from the closed form of each standard payoff.
pub fn payoff_pointwise(p: &PayoffTransform, x: f64) -> f64 {
    match p.kind {
        PayoffKind::Put | PayoffKind::Call => {
            let k = p.components[0].poles[0].c.im;
            let v = if p.kind == PayoffKind::Put {
                k - k * (x - p.a).exp()
            } else {
                k * (x - p.a).exp() - k
            };
            v.max(0.0)
        }
        PayoffKind::DigitalUp | PayoffKind::DigitalDown => {
            let amp = p.components[0].poles[0].c.norm();
            let up = x >= p.a;
            if up == (p.kind == PayoffKind::DigitalUp) {
                amp
            } else {
                0.0
            }
        }
        PayoffKind::Custom => payoff_from_residues(p, x),
    }
}

/// `G(x) = (1/2π)∫_{Im ξ=−β} e^{ixξ} Ĝ(ξ) dξ`, closed by residues. At a jump
/// the mean of both one-sided limits is returned.
pub fn payoff_from_residues(p: &PayoffTransform, x: f64) -> f64 {
    let line = -p.beta;
    let mut total = Complex64::new(0.0, 0.0);
    for c in &p.components {
        let y = x - c.a;
        let up = residue_sum(c, y, |im| im > line);
        let down = residue_sum(c, y, |im| im < line);
        total += if y > 0.0 {
            I * up
        } else if y < 0.0 {
            -I * down
        } else {
            0.5 * (I * up - I * down)
        };
    }
    total.re
}

fn residue_sum(c: &PayoffComponent, y: f64, keep: impl Fn(f64) -> bool) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for t in c.poles.iter().filter(|t| keep(t.p.im)) {
        let k = t.order as i32;
        let fact: f64 = (1..k).map(|j| j as f64).product();
        s += t.c * (I * y).powi(k - 1) * (I * y * t.p).exp() / fact;
    }
    s
}
