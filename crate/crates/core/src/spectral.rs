//! The special functions `cₙ`, `κₙ`, `ψₙ` and the unnormalized base
//! eigenfunctions `φ̃ₙ` evaluated against an atomic boundary measure.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::conformal::AtomicBoundaryMeasure;
use crate::moebius::{iwasawa, Decomposition};
use crate::quad::{integrate, QuadError};
use crate::{BoundaryPoint, GroupElement, PlanePoint};

pub const MAX_ORDER: i32 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("kappa has a pole at delta = 1/2 and is only used for delta in (1/2, 1); got {0}")]
    PoleError(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    DeltaOutOfRange(f64),
    #[error("|n| must be at most {MAX_ORDER}, got {0}")]
    OrderOutOfRange(i32),
    #[error("bad interval [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("quadrature did not converge: partial value {value:?}, error estimate {error}")]
    Quadrature { value: Complex64, error: f64 },
}

impl From<QuadError<2>> for SpectralError {
    fn from(e: QuadError<2>) -> Self {
        SpectralError::Quadrature { value: Complex64::new(e.value[0], e.value[1]), error: e.error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    delta: f64,
    n: i32,
}

impl SpectralParams {
    pub fn new(delta: f64, n: i32) -> Result<Self, SpectralError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(SpectralError::DeltaOutOfRange(delta));
        }
        if n.abs() > MAX_ORDER {
            return Err(SpectralError::OrderOutOfRange(n));
        }
        Ok(Self { delta, n })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> i32 {
        self.n
    }
}

/// `cₙ(δ) = √(Γ(1−δ)Γ(|n|+δ)) / √(Γ(δ)Γ(|n|+1−δ))`.
pub fn c_n(p: &SpectralParams) -> Result<f64, SpectralError> {
    let d = p.delta;
    let m = p.n.unsigned_abs() as f64;
    if p.n == 0 {
        return Ok(1.0);
    }
    if d >= 1.0 {
        return Err(SpectralError::DeltaOutOfRange(d));
    }
    let ln_sq = ln_gamma(1.0 - d) + ln_gamma(m + d) - ln_gamma(d) - ln_gamma(m + 1.0 - d);
    Ok((0.5 * ln_sq).exp())
}

/// `ln |Γ(x)|` for any non-integer `x`, through reflection when `x < 1/2`.
fn ln_abs_gamma(x: f64) -> f64 {
    if x >= 0.5 {
        ln_gamma(x)
    } else {
        PI.ln() - (PI * x).sin().abs().ln() - ln_gamma(1.0 - x)
    }
}

/// Sign of `Γ(x)` for non-integer `x`.
fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if (x.floor() as i64) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `κₙ(δ) = 4^{1−δ} π (−1)ⁿ Γ(2δ−1) / (Γ(δ+n) Γ(δ−n))`.
pub fn kappa_n(p: &SpectralParams) -> Result<f64, SpectralError> {
    let d = p.delta;
    if d <= 0.5 {
        return Err(SpectralError::PoleError(d));
    }
    let n = p.n as f64;
    let parity = if p.n % 2 == 0 { 1.0 } else { -1.0 };
    if d == 1.0 {
        // 1/Γ(1−n) vanishes for n ≥ 1 and 1/Γ(1+n) for n ≤ −1.
        return Ok(if p.n == 0 { PI } else { 0.0 });
    }
    let ln = (1.0 - d) * 4f64.ln() + PI.ln() + ln_gamma(2.0 * d - 1.0) - ln_abs_gamma(d + n) - ln_abs_gamma(d - n);
    Ok(parity * gamma_sign(d + n) * gamma_sign(d - n) * ln.exp())
}

/// `(cₙ, κₙ)`.
pub fn constants(p: &SpectralParams) -> Result<(f64, f64), SpectralError> {
    Ok((c_n(p)?, kappa_n(p)?))
}

/// `((x − iy)/(x + iy))ⁿ` for `x + iy ≠ 0`, by repeated multiplication of
/// the unimodular base.
fn phase_power(x: f64, y: f64, n: i32) -> Complex64 {
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let r2 = x * x + y * y;
    // (x − iy)/(x + iy) = (x − iy)²/(x² + y²)
    let base = Complex64::new((x * x - y * y) / r2, -2.0 * x * y / r2);
    let base = if n < 0 { base.conj() } else { base };
    let mut acc = base;
    for _ in 1..n.unsigned_abs() {
        acc *= base;
    }
    acc
}

/// `ψₙ(t) = (1/(t²+1))^δ ((t−i)/(t+i))ⁿ`.
pub fn psi(p: &SpectralParams, t: f64) -> Complex64 {
    let m = (1.0 + t * t).powf(-p.delta);
    phase_power(t, 1.0, p.n) * m
}

/// Adaptive quadrature of `ψₙ` over `[a, b]`. The interval is cut at
/// `0, ±1, ±10, ±100, …` so each piece sees a slowly varying integrand.
pub fn psi_integral(p: &SpectralParams, a: f64, b: f64, tol: f64) -> Result<Complex64, SpectralError> {
    if !(a < b) || !tol.is_finite() || tol <= 0.0 {
        return Err(SpectralError::BadInterval(a, b));
    }
    let mut cuts = vec![a];
    let mut mark = 1.0;
    let mut marks = vec![0.0];
    while mark < a.abs().max(b.abs()) {
        marks.push(mark);
        marks.push(-mark);
        mark *= 10.0;
    }
    marks.sort_by(f64::total_cmp);
    cuts.extend(marks.into_iter().filter(|&m| m > a && m < b));
    cuts.push(b);
    let pieces = (cuts.len() - 1) as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let q = integrate(
            |t| {
                let v = psi(p, t);
                [v.re, v.im]
            },
            w[0],
            w[1],
            tol / pieces,
            4,
            20_000,
        )?;
        total += Complex64::new(q.value[0], q.value[1]);
    }
    Ok(total)
}

/// `∫_{|t| > R} ψₙ` from the expansion
/// `Re ψₙ(t) = |t|^{−2δ} (1 − (δ + 2n²)/t² + O(t⁻⁴))`; the odd imaginary
/// part cancels between the two tails.
pub fn psi_tail(p: &SpectralParams, r: f64) -> f64 {
    let d = p.delta;
    let n2 = (p.n as f64).powi(2);
    2.0 * (r.powf(1.0 - 2.0 * d) / (2.0 * d - 1.0) - (d + 2.0 * n2) * r.powf(-1.0 - 2.0 * d) / (2.0 * d + 1.0))
}

/// `∫_{−R}^{R} ψₙ` plus the tail correction: a quadrature route to `κₙ`.
pub fn kappa_by_quadrature(p: &SpectralParams, r: f64, tol: f64) -> Result<f64, SpectralError> {
    if p.delta <= 0.5 {
        return Err(SpectralError::PoleError(p.delta));
    }
    Ok(psi_integral(p, -r, r, tol)?.re + psi_tail(p, r))
}

/// `φ̃ₙ(h)` together with the number of atoms at `∞` that had to be skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub value: Complex64,
    pub skipped: usize,
}

/// `φ̃ₙ(n_x a_y k_θ) = e^{2inθ} cₙ Σ_j w_j ((u_j²+1)y/((x−u_j)²+y²))^δ ((x−u_j−iy)/(x−u_j+iy))ⁿ`.
pub fn phi_tilde(p: &SpectralParams, h: &GroupElement, nu: &AtomicBoundaryMeasure) -> Result<PhiValue, SpectralError> {
    let nak = iwasawa(h, Decomposition::Nak);
    let c = c_n(p)?;
    let (sum, skipped) = phi_sum(p.delta, p.n, nak.x, nak.y, nu);
    let phase = Complex64::from_polar(1.0, 2.0 * p.n as f64 * nak.theta);
    Ok(PhiValue { value: phase * sum * c, skipped })
}

/// `φ̃₀` at a point of the plane (it does not depend on θ).
pub fn phi0_at(delta: f64, z: &PlanePoint, nu: &AtomicBoundaryMeasure) -> f64 {
    phi_sum(delta, 0, z.x(), z.y(), nu).0.re
}

fn phi_sum(delta: f64, n: i32, x: f64, y: f64, nu: &AtomicBoundaryMeasure) -> (Complex64, usize) {
    let mut skipped = 0;
    if n == 0 {
        let mut s = 0.0;
        for &(u, w) in nu.atoms() {
            match u {
                BoundaryPoint::Finite(u) => {
                    let dx = x - u;
                    s += w * ((u * u + 1.0) * y / (dx * dx + y * y)).powf(delta);
                }
                BoundaryPoint::Infinity => skipped += 1,
            }
        }
        return (Complex64::new(s, 0.0), skipped);
    }
    let mut s = Complex64::new(0.0, 0.0);
    for &(u, w) in nu.atoms() {
        match u {
            BoundaryPoint::Finite(u) => {
                let dx = x - u;
                let m = w * ((u * u + 1.0) * y / (dx * dx + y * y)).powf(delta);
                s += phase_power(dx, y, n) * m;
            }
            BoundaryPoint::Infinity => skipped += 1,
        }
    }
    (s, skipped)
}

/// Five-point Laplacian of `φ̃₀` at `z`: returns
/// `(−y²(∂ₓ² + ∂ᵧ²)φ̃₀, δ(1−δ)φ̃₀)`.
pub fn laplace_check(nu: &AtomicBoundaryMeasure, z: &PlanePoint, step: f64) -> (f64, f64) {
    let d = nu.delta();
    let f = |x: f64, y: f64| phi_sum(d, 0, x, y, nu).0.re;
    let (x, y) = (z.x(), z.y());
    let c = f(x, y);
    let lap = (f(x + step, y) + f(x - step, y) + f(x, y + step) + f(x, y - step) - 4.0 * c) / (step * step);
    (-y * y * lap, d * (1.0 - d) * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::ps_density;
    use crate::fuchsian::{examples, FuchsianGroup};
    use approx::assert_relative_eq;
    use statrs::function::gamma::gamma;

    fn sp(d: f64, n: i32) -> SpectralParams {
        SpectralParams::new(d, n).unwrap()
    }

    #[test]
    fn c_examples() {
        assert_eq!(c_n(&sp(0.75, 0)).unwrap(), 1.0);
        assert_relative_eq!(c_n(&sp(0.75, 1)).unwrap(), 3f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(c_n(&sp(0.75, -1)).unwrap(), 3f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn kappa_zero_at_three_quarters() {
        let closed = 2f64.sqrt() * PI * PI.sqrt() / gamma(0.75).powi(2);
        assert_relative_eq!(kappa_n(&sp(0.75, 0)).unwrap(), closed, max_relative = 1e-13);
        // frozen from an independent mpmath quadrature of ∫(1+t²)^{-3/4}
        assert_relative_eq!(closed, 5.244115108584239, max_relative = 1e-14);
        let q = kappa_by_quadrature(&sp(0.75, 0), 1e4, 1e-10).unwrap();
        assert_relative_eq!(q, closed, max_relative = 1e-8);
    }

    #[test]
    fn kappa_limits_and_poles() {
        assert_relative_eq!(kappa_n(&sp(1.0 - 1e-9, 0)).unwrap(), PI, max_relative = 1e-7);
        assert_eq!(kappa_n(&sp(1.0, 0)).unwrap(), PI);
        assert!(matches!(kappa_n(&sp(0.5, 0)), Err(SpectralError::PoleError(_))));
        assert!(matches!(kappa_n(&sp(0.3, 2)), Err(SpectralError::PoleError(_))));
        assert!(SpectralParams::new(0.7, 65).is_err());
        assert!(SpectralParams::new(0.0, 1).is_err());
    }

    #[test]
    fn kappa_c_identity() {
        for &d in &[0.55, 0.6, 0.75, 0.9] {
            let k0 = kappa_n(&sp(d, 0)).unwrap();
            for n in -20..=20 {
                let p = sp(d, n);
                let (c, k) = constants(&p).unwrap();
                assert_relative_eq!(k * c * c, k0, max_relative = 1e-10);
                assert!(k.abs() <= k0 * (1.0 + 1e-12));
                assert!(k > 0.0);
            }
        }
    }

    #[test]
    fn kappa_one_by_elementary_integrals() {
        // Re ψ₁ = (t²−1)(1+t²)^{−1−δ}, and ∫(1+t²)^{−a} = √π Γ(a−½)/Γ(a).
        let d = 0.75;
        let i = |a: f64| PI.sqrt() * gamma(a - 0.5) / gamma(a);
        assert_relative_eq!(kappa_n(&sp(d, 1)).unwrap(), i(d) - 2.0 * i(d + 1.0), max_relative = 1e-12);
    }

    #[test]
    fn c_monotone_in_order() {
        for &d in &[0.55, 0.75, 0.9] {
            let mut prev = 1.0;
            for n in 0..40 {
                let c = c_n(&sp(d, n)).unwrap();
                assert!(c >= prev - 1e-15);
                prev = c;
            }
        }
    }

    #[test]
    fn psi_pointwise() {
        assert_eq!(psi(&sp(0.75, 0), 0.0), Complex64::new(1.0, 0.0));
        for &t in &[0.3, 2.0, 17.0] {
            let a = psi(&sp(0.75, 5), t).norm();
            let b = psi(&sp(0.75, 0), t).re;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_bound() {
        let p = sp(0.75, 0);
        let k0 = kappa_n(&p).unwrap();
        let mut vals = Vec::new();
        for &r in &[10.0, 100.0, 1000.0] {
            let v = psi_integral(&p, -r, r, 1e-10).unwrap().re;
            vals.push((k0 - v) * f64::powf(r, 2.0 * 0.75 - 1.0));
        }
        for v in &vals {
            assert!(*v > 0.0 && *v < 5.0, "{vals:?}");
        }
    }

    #[test]
    fn truncation_exponent() {
        for &d in &[0.6, 0.75] {
            let p = sp(d, 1);
            let k = kappa_n(&p).unwrap();
            let pts: Vec<(f64, f64)> = (0..7)
                .map(|j| {
                    let r = 10f64 * 10f64.powf(j as f64 / 2.0);
                    let v = psi_integral(&p, -r, r, 1e-11).unwrap().re;
                    (r.ln(), (k - v).abs().ln())
                })
                .collect();
            let (slope, _, _) = crate::fuchsian::linear_fit(&pts);
            assert!((slope - (1.0 - 2.0 * d)).abs() < 0.1, "{slope}");
        }
    }

    #[test]
    fn bad_interval() {
        assert!(psi_integral(&sp(0.7, 0), 1.0, 1.0, 1e-8).is_err());
    }

    fn wide_measure() -> (FuchsianGroup, AtomicBoundaryMeasure) {
        let g = FuchsianGroup::build_with_depth(examples::wide(), 8).unwrap();
        let nu = ps_density(&g, 7, 0.0).unwrap();
        (g, nu)
    }

    #[test]
    fn phi_k_type_and_positivity() {
        let (_, nu) = wide_measure();
        let h = GroupElement::n(0.3) * GroupElement::a(0.7);
        for n in 0..4 {
            let p = sp(nu.delta(), n);
            let base = phi_tilde(&p, &h, &nu).unwrap().value;
            let theta = 0.4;
            let rotated = phi_tilde(&p, &(h * GroupElement::k(theta)), &nu).unwrap().value;
            let expect = Complex64::from_polar(1.0, 2.0 * n as f64 * theta) * base;
            assert!((rotated - expect).norm() < 1e-12 * base.norm().max(1e-300));
        }
        let p0 = sp(nu.delta(), 0);
        let v = phi_tilde(&p0, &h, &nu).unwrap().value;
        assert!(v.re > 0.0 && v.im == 0.0);
    }

    #[test]
    fn phi_bounded_by_phi0() {
        let (_, nu) = wide_measure();
        let mut worst: f64 = 0.0;
        for j in 0..100 {
            let x = -3.0 + 6.0 * (j as f64 * 0.618_033_988_75).fract();
            let y = 0.05 + 3.0 * (j as f64 * 0.414_213_562).fract();
            let h = GroupElement::n(x) * GroupElement::a(y) * GroupElement::k(j as f64 * 0.1);
            let v0 = phi_tilde(&sp(nu.delta(), 0), &h, &nu).unwrap().value.re;
            for n in 1..=5 {
                let vn = phi_tilde(&sp(nu.delta(), n), &h, &nu).unwrap().value.norm();
                worst = worst.max(vn / v0);
            }
        }
        // |φ̃ₙ| ≤ cₙ φ̃₀ pointwise since the phases are unimodular
        assert!(worst <= c_n(&sp(nu.delta(), 5)).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn infinite_atoms_are_counted() {
        let nu = AtomicBoundaryMeasure::from_atoms(
            vec![(BoundaryPoint::Finite(0.0), 0.5), (BoundaryPoint::Infinity, 0.5)],
            PlanePoint::i(),
            0.7,
            0,
        )
        .unwrap();
        let v = phi_tilde(&sp(0.7, 0), &GroupElement::identity(), &nu).unwrap();
        assert_eq!(v.skipped, 1);
        assert_relative_eq!(v.value.re, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn laplacian_eigenfunction() {
        let (_, nu) = wide_measure();
        for &(x, y) in &[(0.0, 1.0), (0.3, 0.4), (-2.0, 2.5)] {
            let z = PlanePoint::new(x, y).unwrap();
            let (lhs, rhs) = laplace_check(&nu, &z, 1e-3 * y);
            assert!(((lhs - rhs) / rhs).abs() < 1e-3);
            let d1 = (lhs - rhs).abs();
            let (l2, r2) = laplace_check(&nu, &z, 2e-2 * y);
            let (l3, r3) = laplace_check(&nu, &z, 1e-2 * y);
            let ratio = (l2 - r2).abs() / (l3 - r3).abs();
            assert!(ratio > 3.5 && ratio < 4.5, "{ratio} {d1}");
        }
    }

    #[test]
    fn lebesgue_stand_in_is_harmonic() {
        let m = 4000;
        let atoms: Vec<(BoundaryPoint, f64)> = (0..m)
            .map(|j| {
                let th = PI * (j as f64 + 0.5) / m as f64;
                (BoundaryPoint::Finite(-1.0 / th.tan()), 1.0 / m as f64)
            })
            .collect();
        let nu = AtomicBoundaryMeasure::from_atoms(atoms, PlanePoint::i(), 1.0, 0).unwrap();
        let (lhs, rhs) = laplace_check(&nu, &PlanePoint::new(0.2, 1.3).unwrap(), 1e-3);
        assert_eq!(rhs, 0.0);
        assert!(lhs.abs() < 1e-5);
    }
}
