//! PSL(2,R) arithmetic and the geometry of the upper half-plane.
//!
//! Everything here is generic over [`Real`] so the kernel can run in `f32`
//! for quick scans, although the rest of the crate uses `f64`.

use std::ops::Mul;

use thiserror::Error;

use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point is not in the upper half-plane (y = {0})")]
    NotInUpperHalfPlane(f64),
    #[error("matrix is not unimodular (det = {0})")]
    NotUnimodular(f64),
    #[error("element lies outside the open Bruhat cell (d = {0})")]
    NotInCell(f64),
    #[error("viewer inside ball: dist = {dist}, radius = {radius}")]
    ViewerInsideBall { dist: f64, radius: f64 },
    #[error("visual endpoints coincide")]
    DegenerateEndpoints,
}

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable")
}

#[inline]
fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn det_tolerance<T: Real>() -> T {
    lit::<T>(1e-12).max(T::epsilon() * lit(100.0))
}

/// An element of PSL(2,R), stored as the representative whose first nonzero
/// entry is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement<T> {
    a: T,
    b: T,
    c: T,
    d: T,
}

/// Selector for [`group_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithKind {
    Product,
    InverseOfFirst,
}

impl<T: Real> GroupElement<T> {
    /// Builds `±(a b; c d)`. The determinant must be 1 up to rounding; the
    /// stored matrix is rescaled so it is 1 to machine precision.
    pub fn new(a: T, b: T, c: T, d: T) -> Result<Self, GeometryError> {
        let det = a * d - b * c;
        let scale = T::one() + (a * d).abs() + (b * c).abs();
        if !det.is_finite() || (det - T::one()).abs() > det_tolerance::<T>() * scale {
            return Err(GeometryError::NotUnimodular(as_f64(det)));
        }
        Ok(Self::rescaled(a, b, c, d, det))
    }

    /// Builds the element represented by any real matrix of positive
    /// determinant, dividing by the square root of the determinant.
    pub fn from_positive_det(a: T, b: T, c: T, d: T) -> Result<Self, GeometryError> {
        let det = a * d - b * c;
        if !(det > T::zero()) || !det.is_finite() {
            return Err(GeometryError::NotUnimodular(as_f64(det)));
        }
        Ok(Self::rescaled(a, b, c, d, det))
    }

    fn rescaled(a: T, b: T, c: T, d: T, det: T) -> Self {
        let s = det.sqrt().recip();
        Self::canonical(a * s, b * s, c * s, d * s)
    }

    fn canonical(a: T, b: T, c: T, d: T) -> Self {
        let lead = [a, b, c, d].into_iter().find(|v| *v != T::zero());
        match lead {
            Some(v) if v < T::zero() => Self { a: -a, b: -b, c: -c, d: -d },
            _ => Self { a, b, c, d },
        }
    }

    pub fn identity() -> Self {
        Self::canonical(T::one(), T::zero(), T::zero(), T::one())
    }

    /// `n_x = (1 x; 0 1)`.
    pub fn n(x: T) -> Self {
        Self::canonical(T::one(), x, T::zero(), T::one())
    }

    /// `n*_u = (1 0; u 1)`.
    pub fn n_star(u: T) -> Self {
        Self::canonical(T::one(), T::zero(), u, T::one())
    }

    /// `a_y = diag(√y, 1/√y)`.
    ///
    /// # Panics
    /// If `y` is not strictly positive.
    pub fn a(y: T) -> Self {
        assert!(y > T::zero(), "a_y requires y > 0");
        let s = y.sqrt();
        Self::canonical(s, T::zero(), T::zero(), s.recip())
    }

    /// `k_θ = (cos θ  sin θ; −sin θ  cos θ)`.
    pub fn k(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::canonical(c, s, -s, c)
    }

    pub fn a_entry(&self) -> T {
        self.a
    }
    pub fn b_entry(&self) -> T {
        self.b
    }
    pub fn c_entry(&self) -> T {
        self.c
    }
    pub fn d_entry(&self) -> T {
        self.d
    }

    pub fn entries(&self) -> [T; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> T {
        (self.a + self.d).abs()
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.d, -self.b, -self.c, self.a)
    }

    pub fn max_entry(&self) -> T {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Largest entrywise difference between the two representatives.
    pub fn distance_to(&self, other: &Self) -> T {
        let e = self.entries();
        let o = other.entries();
        e.iter().zip(o.iter()).fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
    }

    /// `g·z` for a point of the upper half-plane.
    pub fn act_plane(&self, z: &PlanePoint<T>) -> PlanePoint<T> {
        let (x, y) = (z.x, z.y);
        let cx_d = self.c * x + self.d;
        let cy = self.c * y;
        let den = cx_d * cx_d + cy * cy;
        let re = ((self.a * x + self.b) * cx_d + self.a * self.c * y * y) / den;
        PlanePoint { x: re, y: y / den }
    }

    /// `g·u` on the boundary circle.
    pub fn act_boundary(&self, u: &BoundaryPoint<T>) -> BoundaryPoint<T> {
        match *u {
            BoundaryPoint::Infinity => {
                if self.c == T::zero() {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite(self.a / self.c)
                }
            }
            BoundaryPoint::Finite(v) => {
                let den = self.c * v + self.d;
                if den == T::zero() {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite((self.a * v + self.b) / den)
                }
            }
        }
    }
}

impl<T: Real> Mul for GroupElement<T> {
    type Output = GroupElement<T>;

    fn mul(self, h: Self) -> Self {
        let a = self.a * h.a + self.b * h.c;
        let b = self.a * h.b + self.b * h.d;
        let c = self.c * h.a + self.d * h.c;
        let d = self.c * h.b + self.d * h.d;
        let det = a * d - b * c;
        // With large entries ad − bc cancels catastrophically; the factors
        // are already unimodular, so only rescale while det is trustworthy.
        let conditioned = (a * d).abs() + (b * c).abs() < lit(1e4);
        if det > T::zero() && det.is_finite() && conditioned {
            Self::rescaled(a, b, c, d, det)
        } else {
            Self::canonical(a, b, c, d)
        }
    }
}

impl<T: Real> Mul for &GroupElement<T> {
    type Output = GroupElement<T>;

    fn mul(self, h: Self) -> GroupElement<T> {
        *self * *h
    }
}

pub fn group_arith<T: Real>(g: &GroupElement<T>, h: &GroupElement<T>, kind: ArithKind) -> GroupElement<T> {
    match kind {
        ArithKind::Product => g * h,
        ArithKind::InverseOfFirst => g.inverse(),
    }
}

/// The point `x + iy` with `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint<T> {
    x: T,
    y: T,
}

impl<T: Real> PlanePoint<T> {
    pub fn new(x: T, y: T) -> Result<Self, GeometryError> {
        if !(y > T::zero()) || !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NotInUpperHalfPlane(as_f64(y)));
        }
        Ok(Self { x, y })
    }

    pub fn i() -> Self {
        Self { x: T::zero(), y: T::one() }
    }

    pub fn x(&self) -> T {
        self.x
    }

    pub fn y(&self) -> T {
        self.y
    }
}

/// A point of `R ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPoint<T> {
    Finite(T),
    Infinity,
}

impl<T: Real> BoundaryPoint<T> {
    pub fn is_infinite(&self) -> bool {
        matches!(self, BoundaryPoint::Infinity)
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            BoundaryPoint::Finite(u) => Some(u),
            BoundaryPoint::Infinity => None,
        }
    }

    /// Chordal closeness on the circle; `tol` is compared against
    /// `|u − v| / max(1, |u|, |v|)` for finite points.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        match (*self, *other) {
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => true,
            (BoundaryPoint::Finite(u), BoundaryPoint::Finite(v)) => {
                (u - v).abs() <= tol * T::one().max(u.abs()).max(v.abs())
            }
            (BoundaryPoint::Finite(u), BoundaryPoint::Infinity)
            | (BoundaryPoint::Infinity, BoundaryPoint::Finite(u)) => u.abs().recip() <= tol,
        }
    }
}

/// Hyperbolic distance, via `sinh(d/2) = |z − w| / (2 √(Im z Im w))`.
pub fn hyp_dist<T: Real>(z: &PlanePoint<T>, w: &PlanePoint<T>) -> T {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    let chord = (dx * dx + dy * dy).sqrt();
    let two = lit::<T>(2.0);
    two * (chord / (two * (z.y * w.y).sqrt())).asinh()
}

/// `β_u(w, z)`, the signed horocyclic distance from `w` to `z` seen from `u`.
pub fn busemann<T: Real>(u: &BoundaryPoint<T>, w: &PlanePoint<T>, z: &PlanePoint<T>) -> T {
    match *u {
        BoundaryPoint::Infinity => (z.y / w.y).ln(),
        BoundaryPoint::Finite(u) => {
            let pw = (w.x - u) * (w.x - u) + w.y * w.y;
            let pz = (z.x - u) * (z.x - u) + z.y * z.y;
            ((pw * z.y) / (pz * w.y)).ln()
        }
    }
}

/// `([g]^+, [g]^-) = (g·∞, g·0)`.
pub fn visual_points<T: Real>(g: &GroupElement<T>) -> (BoundaryPoint<T>, BoundaryPoint<T>) {
    (
        g.act_boundary(&BoundaryPoint::Infinity),
        g.act_boundary(&BoundaryPoint::Finite(T::zero())),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decomposition {
    /// `g = n_x a_y k_θ`
    Nak,
    /// `g = k_θ a_y n_x`
    Kan,
}

/// Iwasawa coordinates with `θ ∈ [0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iwasawa<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

fn wrap_pi<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let mut t = theta % pi;
    if t < T::zero() {
        t = t + pi;
    }
    if t >= pi {
        t = t - pi;
    }
    t
}

pub fn iwasawa<T: Real>(g: &GroupElement<T>, order: Decomposition) -> Iwasawa<T> {
    match order {
        Decomposition::Nak => {
            let (a, b, c, d) = (g.a, g.b, g.c, g.d);
            let r2 = c * c + d * d;
            Iwasawa {
                x: (a * c + b * d) / r2,
                y: r2.recip(),
                theta: wrap_pi((-c).atan2(d)),
            }
        }
        Decomposition::Kan => {
            let p = iwasawa(&g.inverse(), Decomposition::Nak);
            Iwasawa { x: -p.x, y: p.y.recip(), theta: wrap_pi(-p.theta) }
        }
    }
}

pub fn iwasawa_compose<T: Real>(p: &Iwasawa<T>, order: Decomposition) -> GroupElement<T> {
    let n = GroupElement::n(p.x);
    let a = GroupElement::a(p.y);
    let k = GroupElement::k(p.theta);
    match order {
        Decomposition::Nak => n * a * k,
        Decomposition::Kan => k * a * n,
    }
}

/// Coordinates of `g = n_x a_y n*_u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bruhat<T> {
    pub x: T,
    pub y: T,
    pub u: T,
}

pub fn bruhat_nau<T: Real>(g: &GroupElement<T>) -> Result<Bruhat<T>, GeometryError> {
    let d = g.d;
    if d.abs() <= lit::<T>(1e-12) * g.max_entry() {
        return Err(GeometryError::NotInCell(as_f64(d)));
    }
    Ok(Bruhat { x: g.b / d, y: (d * d).recip(), u: g.c / d })
}

pub fn bruhat_compose<T: Real>(p: &Bruhat<T>) -> GroupElement<T> {
    GroupElement::n(p.x) * GroupElement::a(p.y) * GroupElement::n_star(p.u)
}

/// `([g]^+, [g]^-, β_{[g]^+}(i, g·i))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfCoordinates<T> {
    pub u_plus: BoundaryPoint<T>,
    pub u_minus: BoundaryPoint<T>,
    pub s: T,
}

pub fn hopf<T: Real>(g: &GroupElement<T>) -> HopfCoordinates<T> {
    let (u_plus, u_minus) = visual_points(g);
    let s = busemann(&u_plus, &PlanePoint::i(), &g.act_plane(&PlanePoint::i()));
    HopfCoordinates { u_plus, u_minus, s }
}

/// Some element with `g·∞ = plus` and `g·0 = minus`.
fn frame_through<T: Real>(
    plus: &BoundaryPoint<T>,
    minus: &BoundaryPoint<T>,
) -> Result<GroupElement<T>, GeometryError> {
    let one = T::one();
    let zero = T::zero();
    match (*plus, *minus) {
        (BoundaryPoint::Infinity, BoundaryPoint::Finite(v)) => Ok(GroupElement::n(v)),
        (BoundaryPoint::Finite(p), BoundaryPoint::Infinity) => GroupElement::new(p, -one, one, zero),
        (BoundaryPoint::Finite(p), BoundaryPoint::Finite(v)) if p != v => {
            let sg = if p > v { one } else { -one };
            GroupElement::from_positive_det(p, v * sg, one, sg)
        }
        _ => Err(GeometryError::DegenerateEndpoints),
    }
}

pub fn hopf_inverse<T: Real>(h: &HopfCoordinates<T>) -> Result<GroupElement<T>, GeometryError> {
    let g0 = frame_through(&h.u_plus, &h.u_minus)?;
    let s0 = busemann(&h.u_plus, &PlanePoint::i(), &g0.act_plane(&PlanePoint::i()));
    Ok(g0 * GroupElement::a((h.s - s0).exp()))
}

/// A finite union of closed arcs of `R ∪ {∞}`: sorted disjoint intervals of
/// `R` (ends may be infinite) plus a flag for the point `∞`.
///
/// Open and closed ends are not distinguished.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryArc<T> {
    intervals: Vec<(T, T)>,
    infinity: bool,
}

impl<T: Real> BoundaryArc<T> {
    pub fn new(mut intervals: Vec<(T, T)>, infinity: bool) -> Self {
        intervals.retain(|(lo, hi)| lo <= hi);
        intervals.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("interval ends are not NaN"));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Self { intervals: merged, infinity }
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new(), infinity: false }
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn contains_infinity(&self) -> bool {
        self.infinity
    }

    pub fn contains(&self, p: &BoundaryPoint<T>) -> bool {
        match *p {
            BoundaryPoint::Infinity => self.infinity,
            BoundaryPoint::Finite(u) => self.contains_real(u),
        }
    }

    pub fn contains_real(&self, u: T) -> bool {
        let idx = self.intervals.partition_point(|iv| iv.1 < u);
        idx < self.intervals.len() && self.intervals[idx].0 <= u
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::new(all, self.infinity || other.infinity)
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut start = T::neg_infinity();
        for &(lo, hi) in &self.intervals {
            if lo > start {
                out.push((start, lo));
            }
            start = hi;
        }
        if start < T::infinity() {
            out.push((start, T::infinity()));
        }
        Self { intervals: out, infinity: !self.infinity }
    }

    /// The arc of the circle with ends `p`, `q` that contains `inside`.
    pub fn between(p: &BoundaryPoint<T>, q: &BoundaryPoint<T>, inside: &BoundaryPoint<T>) -> Self {
        let inf = T::infinity();
        match (*p, *q) {
            (BoundaryPoint::Finite(p), BoundaryPoint::Finite(q)) => {
                let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
                match *inside {
                    BoundaryPoint::Finite(e) if lo < e && e < hi => Self::new(vec![(lo, hi)], false),
                    _ => Self::new(vec![(-inf, lo), (hi, inf)], true),
                }
            }
            (BoundaryPoint::Finite(v), BoundaryPoint::Infinity)
            | (BoundaryPoint::Infinity, BoundaryPoint::Finite(v)) => match *inside {
                BoundaryPoint::Finite(e) if e < v => Self::new(vec![(-inf, v)], true),
                _ => Self::new(vec![(v, inf)], true),
            },
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => Self::new(Vec::new(), true),
        }
    }
}

fn boundary_from_angle<T: Real>(alpha: T) -> BoundaryPoint<T> {
    let (s, c) = (alpha / lit(2.0)).sin_cos();
    if s == T::zero() {
        BoundaryPoint::Infinity
    } else {
        BoundaryPoint::Finite(-c / s)
    }
}

/// The shadow `O_z(w, r)`: boundary points `u` such that the geodesic ray
/// from `z` to `u` meets the open ball `B_r(w)`.
pub fn shadow_interval<T: Real>(
    z: &PlanePoint<T>,
    w: &PlanePoint<T>,
    r: T,
) -> Result<BoundaryArc<T>, GeometryError> {
    let dist = hyp_dist(z, w);
    if dist <= r {
        return Err(GeometryError::ViewerInsideBall { dist: as_f64(dist), radius: as_f64(r) });
    }
    // Move the viewer to i; in the disk model the shadow is then the arc of
    // half-width φ₀ around the direction of w, with sin φ₀ = sinh r / sinh d.
    let h = GroupElement::a(z.y.recip()) * GroupElement::n(-z.x);
    let wp = h.act_plane(w);
    let (x, y) = (wp.x, wp.y);
    let center = (-(x + x)).atan2(x * x + y * y - T::one());
    let half = (r.sinh() / dist.sinh()).asin();
    let back = h.inverse();
    let p = back.act_boundary(&boundary_from_angle(center - half));
    let q = back.act_boundary(&boundary_from_angle(center + half));
    let e = back.act_boundary(&boundary_from_angle(center));
    Ok(BoundaryArc::between(&p, &q, &e))
}
