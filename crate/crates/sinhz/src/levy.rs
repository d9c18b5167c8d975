//! Characteristic exponents of the supported increment models.
//!
//! Convention: `Φ(ξ) = E[e^{iξX}] = e^{−ψ(ξ)}`. Every model is analytic in
//! the plane with the cuts `i(−∞, μ₋] ∪ i[μ₊, +∞)` removed.

use num_complex::Complex64;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KoBoLParams {
    pub c_plus: f64,
    pub c_minus: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub mu: f64,
}

impl KoBoLParams {
    /// Equal intensities and orders on both sides.
    pub fn symmetric_order(c: f64, nu: f64, lambda_minus: f64, lambda_plus: f64) -> Self {
        KoBoLParams {
            c_plus: c,
            c_minus: c,
            nu_plus: nu,
            nu_minus: nu,
            lambda_minus,
            lambda_plus,
            mu: 0.0,
        }
    }
}

/// Normal tempered stable family; `ν = 1` is NIG.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NtsParams {
    pub delta_s: f64,
    pub alpha_s: f64,
    pub beta_s: f64,
    pub nu_s: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    KoBoL(KoBoLParams),
    Nts(NtsParams),
    /// `ψ(ξ) = −iμξ + aξ²`, i.e. a normal increment with variance `2a`.
    Quadratic { a: f64, mu: f64 },
    /// `Φ = a₀Φ₀ + (1 − a₀)Φ₁`.
    Mixture {
        a0: f64,
        first: Box<LevyModel>,
        second: Box<LevyModel>,
    },
}

/// A one-period increment model, possibly after an Esscher shift.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyModel {
    kind: ModelKind,
    /// Accumulated Esscher parameter `β`: `ψ_β(ξ) = ψ(ξ − iβ) − ψ(−iβ)`.
    beta: f64,
    psi_at_shift: Complex64,
    strip: (f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EsscherShift {
    pub beta: f64,
}

/// Large-`ξ` expansion `ψ(ξ) + iμξ = Σ d_j ξ^{ν_j} + O(|ξ|^{ν_N})` in
/// `Re ξ > 0`, with derived classification data.
#[derive(Clone, Debug, PartialEq)]
pub struct Asymptotics {
    pub mu: f64,
    /// `(d_j, ν_j)` with strictly decreasing exponents.
    pub terms: Vec<(Complex64, f64)>,
    /// Exponent `ν_N` of the first omitted term.
    pub remainder_exponent: f64,
    pub nu0: f64,
    pub d0: f64,
    /// Index of the first term with non-real coefficient, `terms.len()` if none.
    pub j0: usize,
    pub nu_bar: f64,
}

impl Asymptotics {
    /// `ν_{j₀}`, which is `ν_N` when every retained coefficient is real.
    pub fn nu_j0(&self) -> f64 {
        self.terms.get(self.j0).map_or(self.remainder_exponent, |t| t.1)
    }

    pub fn d_j0(&self) -> Complex64 {
        self.terms.get(self.j0).map_or(Complex64::new(0.0, 0.0), |t| t.0)
    }

    /// Partial sum `Σ d_j ξ^{ν_j} − iμξ`.
    pub fn eval(&self, xi: Complex64) -> Complex64 {
        let mut s = -I * self.mu * xi;
        for &(d, nu) in &self.terms {
            s += d * xi.powf(nu);
        }
        s
    }
}

const EXPONENT_CUTOFF: f64 = -2.0;
const ZERO_TOL: f64 = 1e-12;

fn binom(a: f64, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c *= (a - j as f64) / (j as f64 + 1.0);
    }
    c
}

/// Add `coef·(ξ − s)^ν` expanded around `ξ = ∞` to `out`.
fn push_shifted_power(out: &mut Vec<(Complex64, f64)>, coef: Complex64, nu: f64, s: Complex64) {
    let mut m = 0;
    while nu - m as f64 > EXPONENT_CUTOFF - 1e-9 {
        let c = coef * binom(nu, m) * (-s).powu(m as u32);
        out.push((c, nu - m as f64));
        m += 1;
        if nu.fract() == 0.0 && nu >= 0.0 && m as f64 > nu {
            break;
        }
    }
}

fn normalize_series(mut raw: Vec<(Complex64, f64)>) -> Vec<(Complex64, f64)> {
    raw.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let mut out: Vec<(Complex64, f64)> = Vec::new();
    for (c, e) in raw {
        match out.last_mut() {
            Some(last) if (last.1 - e).abs() < ZERO_TOL => last.0 += c,
            _ => out.push((c, if e.abs() < ZERO_TOL { 0.0 } else { e })),
        }
    }
    let scale = out.iter().map(|t| t.0.norm()).fold(0.0, f64::max);
    for t in &mut out {
        if t.0.im.abs() <= 1e-13 * scale {
            t.0.im = 0.0;
        }
    }
    out.retain(|t| t.0.norm() > 1e-15 * scale);
    out
}

impl LevyModel {
    pub fn kobol(p: KoBoLParams) -> Result<Self> {
        if !(p.c_plus > 0.0 && p.c_minus > 0.0) {
            return Err(Error::param("KoBoL intensities must be positive"));
        }
        for nu in [p.nu_plus, p.nu_minus] {
            if !(nu > 0.0 && nu < 2.0) {
                return Err(Error::param(format!("KoBoL order {nu} outside (0, 2)")));
            }
            if (nu - 1.0).abs() < 1e-12 {
                return Err(Error::unsupported(
                    "KoBoL with order 1 has a logarithmic exponent and is not supported",
                ));
            }
        }
        if !(p.lambda_minus < 0.0 && p.lambda_plus > 0.0) {
            return Err(Error::param("KoBoL needs lambda_minus < 0 < lambda_plus"));
        }
        Ok(Self::raw(ModelKind::KoBoL(p), (p.lambda_minus, p.lambda_plus)))
    }

    pub fn nts(p: NtsParams) -> Result<Self> {
        if !(p.delta_s > 0.0 && p.alpha_s > 0.0) {
            return Err(Error::param("NTS needs delta_s > 0 and alpha_s > 0"));
        }
        if !(p.beta_s.abs() < p.alpha_s) {
            return Err(Error::param("NTS needs |beta_s| < alpha_s"));
        }
        if !(p.nu_s > 0.0 && p.nu_s < 2.0) {
            return Err(Error::param(format!("NTS order {} outside (0, 2)", p.nu_s)));
        }
        Ok(Self::raw(
            ModelKind::Nts(p),
            (p.beta_s - p.alpha_s, p.beta_s + p.alpha_s),
        ))
    }

    pub fn gaussian(sigma: f64, mu: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::param("Gaussian model needs sigma > 0"));
        }
        Self::quadratic(0.5 * sigma * sigma, mu)
    }

    /// `ψ(ξ) = −iμξ + aξ²`.
    pub fn quadratic(a: f64, mu: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::param("quadratic exponent needs a positive coefficient"));
        }
        Ok(Self::raw(
            ModelKind::Quadratic { a, mu },
            (f64::NEG_INFINITY, f64::INFINITY),
        ))
    }

    /// Variance Gamma has a logarithmic exponent; always rejected.
    pub fn variance_gamma() -> Result<Self> {
        Err(Error::unsupported(
            "Variance Gamma has a logarithmic exponent and is not supported",
        ))
    }

    pub fn mixture(a0: f64, first: LevyModel, second: LevyModel) -> Result<Self> {
        if !(a0 > 0.0 && a0 < 1.0) {
            return Err(Error::param("mixture weight a0 must lie in (0, 1)"));
        }
        let strip = (
            first.strip.0.max(second.strip.0),
            first.strip.1.min(second.strip.1),
        );
        if !(strip.0 < 0.0 && strip.1 > 0.0) {
            return Err(Error::param("mixture components have no common strip around 0"));
        }
        Ok(Self::raw(
            ModelKind::Mixture {
                a0,
                first: Box::new(first),
                second: Box::new(second),
            },
            strip,
        ))
    }

    fn raw(kind: ModelKind, strip: (f64, f64)) -> Self {
        LevyModel {
            kind,
            beta: 0.0,
            psi_at_shift: Complex64::new(0.0, 0.0),
            strip,
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// `(μ₋, μ₊)`: `Φ` is analytic for `μ₋ < Im ξ < μ₊`.
    pub fn strip(&self) -> (f64, f64) {
        self.strip
    }

    /// Esscher parameter already applied to this model.
    pub fn esscher_beta(&self) -> f64 {
        self.beta
    }

    pub fn drift(&self) -> f64 {
        match &self.kind {
            ModelKind::KoBoL(p) => p.mu,
            ModelKind::Nts(p) => p.mu,
            ModelKind::Quadratic { mu, .. } => *mu,
            ModelKind::Mixture { .. } => 0.0,
        }
    }

    fn on_cut(&self, xi: Complex64) -> bool {
        let scale = 1.0 + xi.im.abs();
        xi.re.abs() <= 1e-300 * scale && (xi.im <= self.strip.0 || xi.im >= self.strip.1)
    }

    /// Exponent of the unshifted model.
    fn psi_base(&self, xi: Complex64) -> Complex64 {
        match &self.kind {
            ModelKind::KoBoL(p) => {
                let a = -p.lambda_minus - I * xi;
                let b = p.lambda_plus + I * xi;
                -I * p.mu * xi
                    + p.c_plus * gamma(-p.nu_plus) * ((-p.lambda_minus).powf(p.nu_plus) - a.powf(p.nu_plus))
                    + p.c_minus * gamma(-p.nu_minus) * (p.lambda_plus.powf(p.nu_minus) - b.powf(p.nu_minus))
            }
            ModelKind::Nts(p) => {
                let s = 0.5 * p.nu_s;
                let a = p.alpha_s - p.beta_s - I * xi;
                let b = p.alpha_s + p.beta_s + I * xi;
                let base = (p.alpha_s * p.alpha_s - p.beta_s * p.beta_s).powf(s);
                -I * p.mu * xi + p.delta_s * (a.powf(s) * b.powf(s) - base)
            }
            ModelKind::Quadratic { a, mu } => -I * mu * xi + a * xi * xi,
            ModelKind::Mixture { a0, first, second } => {
                let p0 = first.psi_unchecked(xi);
                let p1 = second.psi_unchecked(xi);
                // −ln(a₀e^{−ψ₀} + a₁e^{−ψ₁}) written to avoid overflow
                if p0.re <= p1.re {
                    p0 - (a0 + (1.0 - a0) * (p0 - p1).exp()).ln()
                } else {
                    p1 - ((1.0 - a0) + a0 * (p1 - p0).exp()).ln()
                }
            }
        }
    }

    fn psi_base_prime(&self, xi: Complex64) -> Complex64 {
        match &self.kind {
            ModelKind::KoBoL(p) => {
                let a = -p.lambda_minus - I * xi;
                let b = p.lambda_plus + I * xi;
                -I * p.mu
                    + I * p.c_plus * gamma(-p.nu_plus) * p.nu_plus * a.powf(p.nu_plus - 1.0)
                    - I * p.c_minus * gamma(-p.nu_minus) * p.nu_minus * b.powf(p.nu_minus - 1.0)
            }
            ModelKind::Nts(p) => {
                let s = 0.5 * p.nu_s;
                let a = p.alpha_s - p.beta_s - I * xi;
                let b = p.alpha_s + p.beta_s + I * xi;
                -I * p.mu + p.delta_s * I * s * a.powf(s) * b.powf(s) * (1.0 / b - 1.0 / a)
            }
            ModelKind::Quadratic { a, mu } => -I * mu + 2.0 * a * xi,
            ModelKind::Mixture { a0, first, second } => {
                let p0 = first.psi_unchecked(xi);
                let p1 = second.psi_unchecked(xi);
                let d0 = first.psi_prime_unchecked(xi);
                let d1 = second.psi_prime_unchecked(xi);
                // weights a_k Φ_k / Φ, normalised against the larger component
                let (w0, w1) = if p0.re <= p1.re {
                    let e = (1.0 - a0) * (p0 - p1).exp();
                    (a0 / (a0 + e), e / (a0 + e))
                } else {
                    let e = a0 * (p1 - p0).exp();
                    (e / (e + 1.0 - a0), (1.0 - a0) / (e + 1.0 - a0))
                };
                w0 * d0 + w1 * d1
            }
        }
    }

    pub(crate) fn psi_unchecked(&self, xi: Complex64) -> Complex64 {
        self.psi_base(xi - I * self.beta) - self.psi_at_shift
    }

    pub(crate) fn psi_prime_unchecked(&self, xi: Complex64) -> Complex64 {
        self.psi_base_prime(xi - I * self.beta)
    }

    /// `ψ''` by a central difference of the analytic first derivative.
    pub fn psi_second(&self, xi: Complex64) -> Complex64 {
        let h = 1e-4 * (1.0 + xi.norm());
        (self.psi_prime_unchecked(xi + h) - self.psi_prime_unchecked(xi - h)) / (2.0 * h)
    }

    /// Mean and variance of the increment.
    pub fn mean_variance(&self) -> (f64, f64) {
        let z = Complex64::new(0.0, 0.0);
        // Φ'(0) = iE[X] and Φ = e^{−ψ}
        let mean = (I * self.psi_prime_unchecked(z)).re;
        let var = self.psi_second(z).re;
        (mean, var)
    }

    fn expansion_base(&self) -> Result<(f64, Vec<(Complex64, f64)>)> {
        let mut raw = Vec::new();
        let mu = match &self.kind {
            ModelKind::KoBoL(p) => {
                // (−λ₋ − iξ) = (−i)(ξ − iλ₋), (λ₊ + iξ) = i(ξ − iλ₊) for Re ξ > 0
                let cp = -p.c_plus * gamma(-p.nu_plus) * (-I * PI * p.nu_plus / 2.0).exp();
                push_shifted_power(&mut raw, cp, p.nu_plus, I * p.lambda_minus);
                let cm = -p.c_minus * gamma(-p.nu_minus) * (I * PI * p.nu_minus / 2.0).exp();
                push_shifted_power(&mut raw, cm, p.nu_minus, I * p.lambda_plus);
                let c0 = p.c_plus * gamma(-p.nu_plus) * (-p.lambda_minus).powf(p.nu_plus)
                    + p.c_minus * gamma(-p.nu_minus) * p.lambda_plus.powf(p.nu_minus);
                raw.push((Complex64::new(c0, 0.0), 0.0));
                p.mu
            }
            ModelKind::Nts(p) => {
                // α² − (β + iξ)² = (ξ − iβ)² (1 + α²(ξ − iβ)^{−2})
                let s = p.nu_s / 2.0;
                let mut k = 0;
                while p.nu_s - 2.0 * k as f64 > EXPONENT_CUTOFF - 1e-9 {
                    let c = p.delta_s * binom(s, k) * p.alpha_s.powi(2 * k as i32);
                    push_shifted_power(&mut raw, Complex64::new(c, 0.0), p.nu_s - 2.0 * k as f64, I * p.beta_s);
                    k += 1;
                }
                let c0 = -p.delta_s * (p.alpha_s * p.alpha_s - p.beta_s * p.beta_s).powf(s);
                raw.push((Complex64::new(c0, 0.0), 0.0));
                p.mu
            }
            ModelKind::Quadratic { a, mu } => {
                raw.push((Complex64::new(*a, 0.0), 2.0));
                *mu
            }
            ModelKind::Mixture { a0, first, second } => {
                // the component with the slower decay of Φ dominates
                let probe = Complex64::new(1e4, 0.0);
                let (dom, w) = if first.psi_unchecked(probe).re <= second.psi_unchecked(probe).re {
                    (first, *a0)
                } else {
                    (second, 1.0 - a0)
                };
                let a = dom.expansion()?;
                raw.extend(a.0.iter().copied());
                raw.push((Complex64::new(-w.ln(), 0.0), 0.0));
                a.1
            }
        };
        Ok((mu, raw))
    }

    /// Expansion of this (possibly shifted) model: `(terms, μ)`.
    fn expansion(&self) -> Result<(Vec<(Complex64, f64)>, f64)> {
        let (mu, base) = self.expansion_base()?;
        let mut raw = Vec::new();
        // ψ(ξ − iβ): re-expand every power, the drift gives −μβ
        for (c, nu) in base {
            push_shifted_power(&mut raw, c, nu, I * self.beta);
        }
        raw.push((-self.psi_at_shift - mu * self.beta, 0.0));
        Ok((normalize_series(raw), mu))
    }
}

fn strip_check(m: &LevyModel, xi: Complex64) -> Result<()> {
    if m.on_cut(xi) {
        return Err(Error::domain(format!("ξ = {xi} lies on a branch cut")));
    }
    Ok(())
}

pub fn psi_eval(m: &LevyModel, xi: Complex64) -> Result<Complex64> {
    strip_check(m, xi)?;
    Ok(m.psi_unchecked(xi))
}

pub fn psi_prime_eval(m: &LevyModel, xi: Complex64) -> Result<Complex64> {
    strip_check(m, xi)?;
    Ok(m.psi_prime_unchecked(xi))
}

pub fn phi_eval(m: &LevyModel, xi: Complex64) -> Result<Complex64> {
    Ok((-psi_eval(m, xi)?).exp())
}

/// Expansion coefficients and the `(ν₀, j₀, ν̄)` classification.
pub fn asymptotic_params(m: &LevyModel) -> Result<Asymptotics> {
    let (terms, mu) = m.expansion()?;
    let (d0c, nu0) = *terms.first().ok_or_else(|| Error::numerical("empty expansion"))?;
    if d0c.im.abs() > 1e-12 * d0c.norm() || d0c.re <= 0.0 {
        return Err(Error::param(format!(
            "leading coefficient {d0c} is not real positive (essentially asymmetric model)"
        )));
    }
    if !(nu0 > 0.0 && nu0 <= 2.0) {
        return Err(Error::param(format!("leading order {nu0} outside (0, 2]")));
    }
    if nu0 < 1.0 && mu != 0.0 {
        return Err(Error::param(
            "a drift is not allowed when the leading order is below 1",
        ));
    }
    let j0 = terms
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, t)| t.0.im != 0.0)
        .map_or(terms.len(), |(j, _)| j);
    let mut a = Asymptotics {
        mu,
        remainder_exponent: terms.last().map_or(0.0, |t| t.1.min(0.0)) - 1.0,
        terms,
        nu0,
        d0: d0c.re,
        j0,
        nu_bar: 0.0,
    };
    if a.j0 == a.terms.len() {
        a.remainder_exponent = a.remainder_exponent.min(-1.0);
    }
    let nj = a.nu_j0();
    a.nu_bar = if mu == 0.0 && nj <= 0.0 {
        0.0
    } else if mu != 0.0 && nj < 1.0 {
        1.0
    } else if nj > 1.0 || (nj > 0.0 && nj < 1.0 && mu == 0.0) {
        nj
    } else {
        return Err(Error::unsupported(format!(
            "ambiguous asymptotic class: first complex coefficient at order {nj} with drift {mu}"
        )));
    };
    Ok(a)
}

/// Esscher transform `Φ_β(ξ) = Φ(ξ − iβ)/Φ(−iβ)`.
pub fn esscher(m: &LevyModel, s: EsscherShift) -> Result<LevyModel> {
    let (lo, hi) = m.strip;
    if !(s.beta > -hi && s.beta < -lo) {
        return Err(Error::param(format!(
            "Esscher parameter {} outside ({}, {})",
            s.beta, -hi, -lo
        )));
    }
    let beta = m.beta + s.beta;
    let mut out = m.clone();
    out.beta = beta;
    out.psi_at_shift = Complex64::new(0.0, 0.0);
    out.psi_at_shift = out.psi_base(Complex64::new(0.0, -beta));
    out.strip = (lo + s.beta, hi + s.beta);
    if (beta).abs() < 1e-300 {
        out.psi_at_shift = Complex64::new(0.0, 0.0);
    }
    Ok(out)
}

/// The Esscher parameter that makes `Φ_β` even, when the family has one.
pub fn symmetrizing_shift(m: &LevyModel) -> Option<f64> {
    let raw = match &m.kind {
        ModelKind::KoBoL(p) => {
            if p.mu != 0.0 || p.c_plus != p.c_minus || p.nu_plus != p.nu_minus {
                return None;
            }
            -(p.lambda_plus + p.lambda_minus) / 2.0
        }
        ModelKind::Nts(p) => {
            if p.mu != 0.0 {
                return None;
            }
            -p.beta_s
        }
        ModelKind::Quadratic { mu, .. } => {
            if *mu != 0.0 {
                return None;
            }
            0.0
        }
        ModelKind::Mixture { first, second, .. } => {
            let a = symmetrizing_shift(first)? + first.beta;
            let b = symmetrizing_shift(second)? + second.beta;
            if (a - b).abs() > 1e-14 {
                return None;
            }
            a
        }
    };
    Some(raw - m.beta)
}

/// Sample `Φ(ξ − iβ)` on a real grid and test evenness and nonnegativity.
pub fn symmetry_check(m: &LevyModel, s: EsscherShift, tol: f64) -> bool {
    let (lo, hi) = m.strip;
    if !(-s.beta > lo && -s.beta < hi) {
        return false;
    }
    let shift = Complex64::new(0.0, -s.beta);
    let mut worst: f64 = 0.0;
    for k in 0..=400 {
        let x = -40.0 + 0.2 * k as f64;
        let xi = Complex64::new(x, 0.0);
        let a = (-m.psi_unchecked(xi + shift)).exp();
        let b = (-m.psi_unchecked(-xi + shift)).exp();
        worst = worst.max((a - b).norm()).max(a.im.abs()).max((-a.re).max(0.0));
    }
    worst <= tol
}

/// Leading coefficient of the asymptotics of a level curve `Im ψ = δ`,
/// `y(x) ≈ p(δ) x^{ν̄+1−ν₀}`.
pub fn p_delta(m: &LevyModel, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::param("level δ must be non-zero"));
    }
    let a = asymptotic_params(m)?;
    p_delta_from(&a, delta)
}

pub fn p_delta_from(a: &Asymptotics, delta: f64) -> Result<f64> {
    let nj = a.nu_j0();
    let scale = a.d0 * a.nu0;
    let im = a.d_j0().im;
    if a.mu == 0.0 {
        if nj < 0.0 {
            Ok(delta / scale)
        } else if nj == 0.0 {
            Ok((delta - im) / scale)
        } else if nj < 1.0 || nj > 1.0 {
            Ok(-im / scale)
        } else {
            Err(Error::unsupported("ambiguous case: first complex coefficient at order 1"))
        }
    } else if nj > 1.0 {
        Ok(-im / scale)
    } else if nj < 1.0 {
        Ok(a.mu / scale)
    } else {
        Err(Error::unsupported("ambiguous case: drift and complex coefficient at order 1"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_kobol() -> LevyModel {
        LevyModel::kobol(KoBoLParams::symmetric_order(1.0, 0.5, -1.0, 1.0)).unwrap()
    }

    fn nig(beta_s: f64) -> LevyModel {
        LevyModel::nts(NtsParams {
            delta_s: 1.0,
            alpha_s: 2.0,
            beta_s,
            nu_s: 1.0,
            mu: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn psi_vanishes_at_origin() {
        for m in [unit_kobol(), nig(0.5), LevyModel::gaussian(0.3, 0.1).unwrap()] {
            assert!(psi_eval(&m, c(0.0, 0.0)).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn kobol_closed_form_value() {
        let expect = -2.0 * PI.sqrt() * (2.0 - 2.0 * 2f64.powf(0.25) * (PI / 8.0).cos());
        let v = psi_eval(&unit_kobol(), c(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, expect, max_relative = 1e-13);
        assert_relative_eq!(v.re, 0.69965, max_relative = 1e-4);
        assert!(v.im.abs() < 1e-14);
        let f = phi_eval(&unit_kobol(), c(1.0, 0.0)).unwrap();
        assert_relative_eq!(f.re, 0.49672, max_relative = 1e-4);
    }

    #[test]
    fn nig_closed_form_value() {
        let v = psi_eval(&nig(0.0), c(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 5f64.sqrt() - 2.0, max_relative = 1e-14);
    }

    #[test]
    fn cuts_are_rejected() {
        let m = unit_kobol();
        assert!(psi_eval(&m, c(0.0, 1.5)).is_err());
        assert!(psi_eval(&m, c(0.0, -1.0)).is_err());
        assert!(psi_eval(&m, c(0.0, 0.5)).is_ok());
        assert!(psi_eval(&m, c(1e-3, 1.5)).is_ok());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let h = 1e-6;
        for m in [
            unit_kobol(),
            nig(0.5),
            LevyModel::kobol(KoBoLParams {
                c_plus: 0.3,
                c_minus: 0.7,
                nu_plus: 1.3,
                nu_minus: 0.6,
                lambda_minus: -3.0,
                lambda_plus: 2.0,
                mu: 0.1,
            })
            .unwrap(),
            LevyModel::mixture(0.4, unit_kobol(), nig(0.5)).unwrap(),
        ] {
            for xi in [c(0.7, 0.1), c(-2.0, -0.3), c(5.0, 0.4)] {
                let fd = (m.psi_unchecked(xi + h) - m.psi_unchecked(xi - h)) / (2.0 * h);
                let an = psi_prime_eval(&m, xi).unwrap();
                assert!((fd - an).norm() < 1e-7 * (1.0 + an.norm()), "{m:?} {xi}");
            }
        }
    }

    #[test]
    fn leading_coefficients() {
        let a = asymptotic_params(&unit_kobol()).unwrap();
        assert_relative_eq!(a.nu0, 0.5);
        assert_relative_eq!(a.d0, 5.0133, max_relative = 1e-4);
        assert_relative_eq!(a.d0, -2.0 * gamma(-0.5) * (PI / 4.0).cos(), max_relative = 1e-14);

        let q = LevyModel::quadratic(1.0, 0.0).unwrap();
        let a = asymptotic_params(&q).unwrap();
        assert_eq!((a.nu0, a.d0, a.nu_bar), (2.0, 1.0, 0.0));
        assert_eq!(a.j0, a.terms.len());

        let a = asymptotic_params(&nig(0.5)).unwrap();
        assert_eq!(a.nu0, 1.0);
        assert_relative_eq!(a.d0, 1.0, max_relative = 1e-14);
        // constant term −(iβ + √(α² − β²))
        assert_eq!(a.j0, 1);
        assert_eq!(a.terms[1].1, 0.0);
        assert_relative_eq!(a.terms[1].0.re, -(3.75f64).sqrt(), max_relative = 1e-13);
        assert_relative_eq!(a.terms[1].0.im, -0.5, max_relative = 1e-13);
        assert_eq!(a.nu_bar, 0.0);
    }

    #[test]
    fn expansion_matches_exponent_far_out() {
        let models = [
            unit_kobol(),
            nig(0.5),
            LevyModel::kobol(KoBoLParams::symmetric_order(0.2, 1.4, -6.0, 3.0)).unwrap(),
            esscher(&nig(0.5), EsscherShift { beta: 0.3 }).unwrap(),
        ];
        for m in models {
            let a = asymptotic_params(&m).unwrap();
            let mut worst: f64 = 0.0;
            for t in [1e2, 1e3, 1e4, 1e5] {
                let xi = Complex64::from_polar(t, PI / 8.0);
                let r = m.psi_unchecked(xi) - a.eval(xi);
                worst = worst.max(r.norm() * t.powf(-a.remainder_exponent.max(-1.5)));
            }
            assert!(worst < 1e3, "{m:?}: {worst}");
        }
    }

    #[test]
    fn nig_symmetrizing_shift_is_minus_beta() {
        let m = nig(0.5);
        assert_eq!(symmetrizing_shift(&m), Some(-0.5));
        assert!(!symmetry_check(&m, EsscherShift { beta: 0.0 }, 1e-12));
        assert!(symmetry_check(&m, EsscherShift { beta: -0.5 }, 1e-12));
        let s = esscher(&m, EsscherShift { beta: -0.5 }).unwrap();
        for x in [0.3, 1.0, 7.0] {
            let a = phi_eval(&s, c(x, 0.0)).unwrap();
            let b = phi_eval(&s, c(-x, 0.0)).unwrap();
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn kobol_symmetrizing_shift_found_by_scan() {
        let m = LevyModel::kobol(KoBoLParams::symmetric_order(1.0, 0.5, -1.0, 2.0)).unwrap();
        let residual = |beta: f64| {
            (0..50)
                .map(|k| {
                    let xi = c(0.2 * k as f64, 0.0);
                    let s = Complex64::new(0.0, -beta);
                    (m.psi_unchecked(xi + s) - m.psi_unchecked(-xi + s)).norm()
                })
                .fold(0.0, f64::max)
        };
        let best = (-99..99)
            .map(|k| 0.01 * k as f64)
            .min_by(|a, b| residual(*a).partial_cmp(&residual(*b)).unwrap())
            .unwrap();
        assert_relative_eq!(best, -0.5, epsilon = 1e-12);
        assert_eq!(symmetrizing_shift(&m), Some(-0.5));
    }

    #[test]
    fn esscher_identity_and_round_trip() {
        let m = nig(0.5);
        assert_eq!(esscher(&m, EsscherShift { beta: 0.0 }).unwrap(), m);
        let there = esscher(&m, EsscherShift { beta: 0.7 }).unwrap();
        let back = esscher(&there, EsscherShift { beta: -0.7 }).unwrap();
        for xi in [c(0.3, 0.1), c(-4.0, 0.2), c(12.0, -0.5)] {
            assert!((m.psi_unchecked(xi) - back.psi_unchecked(xi)).norm() < 1e-12);
        }
        assert!(esscher(&m, EsscherShift { beta: 3.0 }).is_err());
    }

    #[test]
    fn p_delta_cases() {
        let q = LevyModel::quadratic(1.0, 0.0).unwrap();
        assert_relative_eq!(p_delta(&q, 0.3).unwrap(), 0.15, max_relative = 1e-14);
        assert!(p_delta(&q, 0.0).is_err());

        // drift with order below 1 in the first complex coefficient
        let m = LevyModel::kobol(KoBoLParams {
            mu: 0.2,
            ..KoBoLParams::symmetric_order(1.0, 1.5, -2.0, 3.0)
        })
        .unwrap();
        let a = asymptotic_params(&m).unwrap();
        assert!(a.nu_j0() < 1.0);
        assert_relative_eq!(p_delta(&m, 0.1).unwrap(), 0.2 / (a.d0 * a.nu0), max_relative = 1e-14);

        let drifting = LevyModel::kobol(KoBoLParams {
            mu: 0.01,
            ..KoBoLParams::symmetric_order(1.0, 0.5, -8.0, 8.0)
        })
        .unwrap();
        assert!(p_delta(&drifting, 0.05).is_err());
    }

    #[test]
    fn mixture_and_rejections() {
        let m = LevyModel::mixture(0.3, unit_kobol(), LevyModel::gaussian(1.0, 0.0).unwrap()).unwrap();
        let a = asymptotic_params(&m).unwrap();
        assert_eq!(a.nu0, 0.5);
        let f = phi_eval(&m, c(1.0, 0.0)).unwrap();
        let expect = 0.3 * phi_eval(&unit_kobol(), c(1.0, 0.0)).unwrap() + 0.7 * (-0.5f64).exp();
        assert!((f - expect).norm() < 1e-15);
        assert!(LevyModel::variance_gamma().is_err());
        assert!(LevyModel::kobol(KoBoLParams::symmetric_order(1.0, 1.0, -1.0, 1.0)).is_err());
    }

    #[test]
    fn mean_and_variance_of_gaussian() {
        let (m, v) = LevyModel::gaussian(0.3, 0.1).unwrap().mean_variance();
        assert_relative_eq!(m, 0.1, max_relative = 1e-12);
        assert_relative_eq!(v, 0.09, max_relative = 1e-8);
    }
}
