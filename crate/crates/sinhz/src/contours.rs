//! Sinh-deformed contours in the `q`-plane (Z-inversion) and in the dual
//! `ξ`-plane (Fourier inversion), plus the node sets built on them.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Contour `q = σ + i b sinh(iω + y)`, `y ∈ ℝ`, with the analyticity strip
/// `|Im y| < d` and the trapezoid grid `y_j = j ζ`, `|j| ≤ N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinhZContour {
    pub sigma_l: f64,
    pub b_l: f64,
    pub omega_l: f64,
    pub d_l: f64,
    pub zeta_l: f64,
    pub n_l: usize,
    pub lambda: f64,
}

/// Contour `ξ = iω₁ + b sinh(iω + y)` with a trapezoid grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinhXiContour {
    pub omega1: f64,
    pub b: f64,
    pub omega: f64,
    pub zeta: f64,
    pub n: usize,
}

/// Annulus `r₋ < |q| < r₊` inside the unit disc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusSpec {
    pub r_minus: f64,
    pub r_plus: f64,
}

impl AnnulusSpec {
    pub fn new(r_minus: f64, r_plus: f64) -> Result<Self> {
        if !(r_minus > 0.0 && r_minus < r_plus && r_plus < 1.0) {
            return Err(Error::param(format!(
                "annulus needs 0 < r- < r+ < 1, got ({r_minus}, {r_plus})"
            )));
        }
        Ok(AnnulusSpec { r_minus, r_plus })
    }

    /// Geometric centre radius.
    pub fn r(&self) -> f64 {
        (self.r_minus * self.r_plus).sqrt()
    }

    /// Ratio `ρ` with `r₋ = r/ρ`, `r₊ = rρ`.
    pub fn rho(&self) -> f64 {
        (self.r_plus / self.r_minus).sqrt()
    }
}

/// How the asymptotes of the Z-contour are oriented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ZContourShape {
    /// `ω = −d`: the left strip boundary is the vertical line `Re q = r₋`
    /// and the contour opens to the right of it. Usable for any `n`.
    #[default]
    Balanced,
    /// `ω = γ/4 + π/8`: the contour leans into the left half-plane. Only
    /// admissible while `b` is not small, i.e. for moderate `n`.
    LeftLeaning,
    /// `ω = γ/2 − π/8`, `d = k_d(3π/8 − γ/2)`.
    RightLeaning,
}

impl std::str::FromStr for ZContourShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "left_leaning" => Ok(Self::LeftLeaning),
            "right_leaning" => Ok(Self::RightLeaning),
            _ => Err(Error::param(format!("unknown contour shape '{s}'"))),
        }
    }
}

/// `(ω, d)` for a shape, sector half-angle `γ` and safety factor `k_d`.
pub fn shape_angles(shape: ZContourShape, gamma: f64, k_d: f64) -> (f64, f64) {
    match shape {
        ZContourShape::Balanced => {
            let d = k_d * (PI / 8.0 - gamma / 4.0);
            (-d, d)
        }
        ZContourShape::LeftLeaning => (gamma / 4.0 + PI / 8.0, k_d * (PI / 8.0 - gamma / 4.0)),
        ZContourShape::RightLeaning => (gamma / 2.0 - PI / 8.0, k_d * (3.0 * PI / 8.0 - gamma / 2.0)),
    }
}

impl SinhZContour {
    pub fn with_grid(mut self, zeta: f64, n: usize) -> Self {
        self.zeta_l = zeta;
        self.n_l = n;
        self.lambda = n as f64 * zeta;
        self
    }

    /// Vertex of the left strip boundary (`y = i d`).
    pub fn left_vertex(&self) -> f64 {
        self.sigma_l - self.b_l * (self.omega_l + self.d_l).sin()
    }

    /// Vertex of the right strip boundary (`y = −i d`).
    pub fn right_vertex(&self) -> f64 {
        self.sigma_l - self.b_l * (self.omega_l - self.d_l).sin()
    }

    /// `Im y` of the preimage of `q`: negative beyond `−d` means right of the strip.
    pub fn strip_coordinate(&self, q: Complex64) -> f64 {
        ((q - self.sigma_l) / (I * self.b_l)).asinh().im - self.omega_l
    }

    /// `χ(y)` without the strip check.
    #[inline]
    pub fn point(&self, y: Complex64) -> Complex64 {
        self.sigma_l + I * self.b_l * (I * self.omega_l + y).sinh()
    }

    /// `χ'(y)`.
    #[inline]
    pub fn deriv(&self, y: Complex64) -> Complex64 {
        I * self.b_l * (I * self.omega_l + y).cosh()
    }
}

pub fn chi_z_eval(c: &SinhZContour, y: Complex64) -> Result<Complex64> {
    if y.im.abs() > c.d_l * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "|Im y| = {} exceeds strip half-width {}",
            y.im.abs(),
            c.d_l
        )));
    }
    Ok(c.point(y))
}

impl SinhXiContour {
    #[inline]
    pub fn point(&self, y: Complex64) -> Complex64 {
        I * self.omega1 + self.b * (I * self.omega + y).sinh()
    }

    #[inline]
    pub fn deriv(&self, y: Complex64) -> Complex64 {
        self.b * (I * self.omega + y).cosh()
    }

    /// Trapezoid nodes for `∫ f(ξ) dξ` along the contour.
    pub fn nodes(&self) -> NodeSet {
        let n = self.n as i64;
        let mut ns = NodeSet::with_capacity(2 * self.n + 1);
        for j in -n..=n {
            let y = Complex64::new(j as f64 * self.zeta, 0.0);
            ns.push(self.point(y), self.zeta * self.deriv(y));
        }
        ns
    }
}

pub fn chi_xi_eval(c: &SinhXiContour, y: Complex64) -> Result<Complex64> {
    if !(c.omega.abs() < FRAC_PI_2) {
        return Err(Error::domain(format!("ω = {} outside (−π/2, π/2)", c.omega)));
    }
    Ok(c.point(y))
}

/// Build the Z-contour through `r₋` (left boundary vertex) and `r₊` (right
/// boundary vertex) for the given asymptote angle `ω` and strip `d`.
pub fn build_z_contour(r_minus: f64, r_plus: f64, omega_l: f64, d_l: f64) -> Result<SinhZContour> {
    if !(r_minus > 0.0 && r_minus < r_plus && r_plus < 1.0) {
        return Err(Error::param(format!(
            "radii must satisfy 0 < r- < r+ < 1, got ({r_minus}, {r_plus})"
        )));
    }
    if !(d_l > 0.0 && omega_l - d_l > -FRAC_PI_2 && omega_l + d_l < FRAC_PI_2) {
        return Err(Error::param(format!(
            "ω ± d must lie in (−π/2, π/2), got ω = {omega_l}, d = {d_l}"
        )));
    }
    let (so, co) = omega_l.sin_cos();
    let (sd, cd) = d_l.sin_cos();
    let denom = 2.0 * co * sd;
    let sigma = ((r_plus - r_minus) * so * cd + (r_plus + r_minus) * co * sd) / denom;
    let b = (r_plus - r_minus) / denom;
    let c = SinhZContour {
        sigma_l: sigma,
        b_l: b,
        omega_l,
        d_l,
        zeta_l: d_l / 8.0,
        n_l: 0,
        lambda: 0.0,
    };
    let tol = 1e-13;
    if (c.right_vertex() - r_plus).abs() > tol * r_plus || (c.left_vertex() - r_minus).abs() > tol * r_minus {
        return Err(Error::numerical("contour does not reproduce the prescribed radii"));
    }
    if sigma - b * so <= 0.0 {
        return Err(Error::param("contour crosses the real axis at a non-positive point"));
    }
    Ok(c)
}

/// Outcome of [`validate_z_contour`].
#[derive(Clone, Debug, PartialEq)]
pub struct ZContourReport {
    /// Strip image lies in `D(0,1) ∪ {|arg q| > γ}` at every sample.
    pub in_region: bool,
    /// First sample found outside the region, if any.
    pub violation: Option<Complex64>,
    /// `min |q|` over the left strip boundary.
    pub left_distance: f64,
    /// Vertex of the left boundary, the value the distance should attain.
    pub r_minus: f64,
    pub distance_matches: bool,
}

impl ZContourReport {
    pub fn passed(&self) -> bool {
        self.in_region && self.distance_matches
    }
}

fn in_region(q: Complex64, gamma: f64) -> bool {
    q.norm() < 1.0 || q.arg().abs() > gamma
}

/// Dense-sampling check of the strip image and of the left-boundary distance.
pub fn validate_z_contour(c: &SinhZContour, gamma: f64) -> ZContourReport {
    const SAMPLES: usize = 2001;
    let span = c.lambda.max(c.d_l) + 2.0;
    let mut violation = None;
    let mut left_min = f64::INFINITY;
    let mut t_min = 0.0;
    for k in 0..SAMPLES {
        let t = -span + 2.0 * span * k as f64 / (SAMPLES - 1) as f64;
        for s in [-c.d_l, 0.0, c.d_l] {
            let q = c.point(Complex64::new(t, s));
            if violation.is_none() && !in_region(q, gamma) {
                violation = Some(q);
            }
            if s == c.d_l && q.norm() < left_min {
                left_min = q.norm();
                t_min = t;
            }
        }
    }
    // asymptotic directions of both boundaries and of the contour itself
    for s in [-c.d_l, 0.0, c.d_l] {
        let angle = FRAC_PI_2 + c.omega_l + s;
        if violation.is_none() && angle.abs() <= gamma {
            violation = Some(Complex64::from_polar(f64::INFINITY, angle));
        }
    }
    // refine the minimum by golden-section search around the best sample
    let h = 2.0 * span / (SAMPLES - 1) as f64;
    let f = |t: f64| c.point(Complex64::new(t, c.d_l)).norm();
    let (mut a, mut b) = (t_min - h, t_min + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    left_min = left_min.min(f(0.5 * (a + b)));
    let r_minus = c.left_vertex();
    ZContourReport {
        in_region: violation.is_none(),
        violation,
        left_distance: left_min,
        r_minus,
        distance_matches: (left_min - r_minus).abs() <= 1e-10 * r_minus.abs().max(1e-300),
    }
}

/// Length of the part of the contour inside the unit disc.
pub fn arclength_inside_unit_disc(c: &SinhZContour) -> f64 {
    // |χ'| grows like e^{|y|}; beyond |y| = 60 nothing is left inside
    let steps = 24_000;
    let span = 60.0;
    let h = 2.0 * span / steps as f64;
    let mut len = 0.0;
    for k in 0..steps {
        let y = Complex64::new(-span + (k as f64 + 0.5) * h, 0.0);
        if c.point(y).norm() < 1.0 {
            len += c.deriv(y).norm() * h;
        }
    }
    len
}

/// Quadrature nodes `ξ_k` with complex weights `w_k ≈ dξ` for integrals
/// `∫ f(ξ) dξ` along an oriented contour.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeSet {
    pub points: Vec<Complex64>,
    pub weights: Vec<Complex64>,
}

impl NodeSet {
    pub fn with_capacity(n: usize) -> Self {
        NodeSet {
            points: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, p: Complex64, w: Complex64) {
        self.points.push(p);
        self.weights.push(w);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Horizontal line `Im ξ = im` through a sinh substitution
    /// `ξ = x₀ + i im + b sinh(y)` that clusters nodes around `x₀`.
    pub fn line(im: f64, x0: f64, b: f64, zeta: f64, n: usize) -> Self {
        let n = n as i64;
        let mut ns = NodeSet::with_capacity(2 * n as usize + 1);
        for j in -n..=n {
            let y = j as f64 * zeta;
            ns.push(
                Complex64::new(x0 + b * y.sinh(), im),
                Complex64::new(zeta * b * y.cosh(), 0.0),
            );
        }
        ns
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_radii() -> (f64, f64) {
        let (m, n) = (23.0, 1260.0);
        let m1 = 0.9 * m;
        ((-(m + m1) / n as f64).exp(), (-(m - m1) / n as f64).exp())
    }

    #[test]
    fn chi_z_trivial_values() {
        let c = SinhZContour {
            sigma_l: 1.0,
            b_l: 1.0,
            omega_l: 0.0,
            d_l: 0.5,
            zeta_l: 0.1,
            n_l: 0,
            lambda: 0.0,
        };
        assert_eq!(chi_z_eval(&c, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
        let c2 = SinhZContour { omega_l: PI / 8.0, ..c };
        let v = chi_z_eval(&c2, Complex64::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 1.0 - (PI / 8.0).sin(), epsilon = 1e-15);
        assert!(v.im.abs() < 1e-16);
        assert!(chi_z_eval(&c, Complex64::new(0.0, 0.6)).is_err());
    }

    #[test]
    fn chi_z_at_two_matches_closed_form() {
        // σ + i b (sinh y cos ω + i cosh y sin ω) = (σ − b cosh 2 sin ω) + i b sinh 2 cos ω
        let c = SinhZContour {
            sigma_l: 0.9908,
            b_l: 0.05327,
            omega_l: PI / 8.0,
            d_l: 0.3,
            zeta_l: 0.1,
            n_l: 0,
            lambda: 0.0,
        };
        let v = chi_z_eval(&c, Complex64::new(2.0, 0.0)).unwrap();
        // reference values from a 50-digit evaluation
        assert_relative_eq!(v.re, 0.914_105_585_015_190_0, max_relative = 1e-14);
        assert_relative_eq!(v.im, 0.178_496_162_365_009_2, max_relative = 1e-14);
    }

    #[test]
    fn chi_xi_trivial_values() {
        let c = SinhXiContour { omega1: -0.5, b: 1.0, omega: 0.0, zeta: 0.1, n: 0 };
        assert_eq!(chi_xi_eval(&c, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, -0.5));
        let c = SinhXiContour { omega1: 0.0, b: 2.0, omega: PI / 6.0, zeta: 0.1, n: 0 };
        let v = chi_xi_eval(&c, Complex64::new(0.0, 0.0)).unwrap();
        assert!(v.re.abs() < 1e-15);
        assert_relative_eq!(v.im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn chi_xi_off_axis_matches_closed_form() {
        // iω₁ + b (sinh y cos ω + i cosh y sin ω)
        let c = SinhXiContour { omega1: -0.5, b: 1.0, omega: -PI / 6.0, zeta: 0.1, n: 0 };
        let v = chi_xi_eval(&c, Complex64::new(1.2, 0.0)).unwrap();
        // 50-digit reference
        assert_relative_eq!(v.re, 1.307_231_879_817_832_9, max_relative = 1e-14);
        assert_relative_eq!(v.im, -1.405_327_783_662_187_4, max_relative = 1e-14);
    }

    #[test]
    fn build_rejects_degenerate_radii() {
        assert!(build_z_contour(0.9, 0.9, 0.3, 0.3).is_err());
        assert!(build_z_contour(0.95, 0.9, 0.3, 0.3).is_err());
        assert!(build_z_contour(0.5, 0.9, 1.2, 0.5).is_err());
    }

    #[test]
    fn build_reproduces_reference_example() {
        let (rm, rp) = paper_radii();
        assert_relative_eq!(rm, 0.96591, max_relative = 1e-5);
        assert_relative_eq!(rp, 0.99818, max_relative = 1e-5);
        let c = build_z_contour(rm, rp, PI / 8.0, 0.33379).unwrap();
        assert_relative_eq!(c.b_l, 0.05327, max_relative = 1e-3);
        assert_relative_eq!(c.right_vertex(), rp, max_relative = 1e-14);
        assert_relative_eq!(c.left_vertex(), rm, max_relative = 1e-14);
    }

    #[test]
    fn balanced_shape_validates_and_left_leaning_does_not_for_large_n() {
        let (rm, rp) = paper_radii();
        let (w, d) = shape_angles(ZContourShape::Balanced, 0.01, 0.85);
        let c = build_z_contour(rm, rp, w, d).unwrap().with_grid(0.02, 200);
        let rep = validate_z_contour(&c, 0.01);
        assert!(rep.passed(), "{rep:?}");
        assert_relative_eq!(rep.left_distance, rm, max_relative = 1e-10);

        // the strip image stays in the admissible region, but its left
        // boundary comes far closer to the origin than r-
        let c = build_z_contour(rm, rp, PI / 8.0, 0.33379).unwrap().with_grid(0.02, 200);
        let rep = validate_z_contour(&c, 0.05);
        assert!(rep.in_region);
        assert!(!rep.distance_matches);
        assert!(rep.left_distance < 0.76, "{}", rep.left_distance);
    }

    #[test]
    fn wide_strip_near_unit_circle_fails() {
        let c = build_z_contour(0.99, 0.999, 0.5, 0.4).unwrap().with_grid(0.02, 100);
        assert!(!validate_z_contour(&c, 0.05).passed());
    }

    #[test]
    fn tiny_b_passes() {
        let c = build_z_contour(0.9, 0.900001, -0.3, 0.3).unwrap();
        assert!(validate_z_contour(&c, 0.05).passed());
    }

    #[test]
    fn annulus_accessors() {
        let a = AnnulusSpec::new(0.8, 0.9).unwrap();
        assert_relative_eq!(a.r() / a.rho(), 0.8, max_relative = 1e-15);
        assert_relative_eq!(a.r() * a.rho(), 0.9, max_relative = 1e-15);
        assert!(AnnulusSpec::new(0.9, 0.8).is_err());
    }

    #[test]
    fn line_nodes_integrate_gaussian() {
        let ns = NodeSet::line(0.0, 0.0, 1.0, 0.1, 60);
        let s: Complex64 = ns
            .points
            .iter()
            .zip(&ns.weights)
            .map(|(x, w)| w * (-x * x).exp())
            .sum();
        assert_relative_eq!(s.re, PI.sqrt(), max_relative = 1e-13);
    }
}
