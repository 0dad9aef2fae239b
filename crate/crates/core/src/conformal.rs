//! Atomic approximations of the Patterson–Sullivan density, the induced
//! measures on horocycle orbits, and window masses.

use thiserror::Error;

use crate::fuchsian::{displacement, FuchsianError, FuchsianGroup};
use crate::moebius::{busemann, hyp_dist};
use crate::{BoundaryArc, BoundaryPoint, GroupElement, PlanePoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("atom weights must be positive and finite (atom {0})")]
    BadWeight(usize),
    #[error("measure must be based at i")]
    NotAtBaseI,
    #[error("annulus window needs 0 < eps <= 1/2 and T >= 2 (eps = {eps}, T = {t})")]
    AnnulusDomain { eps: f64, t: f64 },
    #[error("window radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("depth {depth} is below the minimum {min}")]
    InvalidDepth { depth: usize, min: usize },
    #[error(transparent)]
    Group(#[from] FuchsianError),
}

/// Finitely many weighted points on `∂∞ℍ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicBoundaryMeasure {
    atoms: Vec<(BoundaryPoint, f64)>,
    basepoint: PlanePoint,
    delta: f64,
    depth: usize,
}

impl AtomicBoundaryMeasure {
    pub fn from_atoms(
        atoms: Vec<(BoundaryPoint, f64)>,
        basepoint: PlanePoint,
        delta: f64,
        depth: usize,
    ) -> Result<Self, ConformalError> {
        if let Some(j) = atoms.iter().position(|a| !(a.1 > 0.0 && a.1.is_finite())) {
            return Err(ConformalError::BadWeight(j));
        }
        Ok(Self { atoms, basepoint, delta, depth })
    }

    pub fn atoms(&self) -> &[(BoundaryPoint, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn basepoint(&self) -> PlanePoint {
        self.basepoint
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn arc_mass(&self, arc: &BoundaryArc) -> f64 {
        self.atoms.iter().filter(|a| arc.contains(&a.0)).map(|a| a.1).sum()
    }

    /// `∫ f dν`.
    pub fn integrate<F: Fn(&BoundaryPoint) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|(u, w)| w * f(u)).sum()
    }

    fn is_at_i(&self) -> bool {
        self.basepoint == PlanePoint::i()
    }

    /// `γ_*ν`: atoms moved by `γ`, basepoint moved along.
    pub fn push_forward(&self, g: &GroupElement) -> Self {
        Self {
            atoms: self.atoms.iter().map(|(u, w)| (g.act_boundary(u), *w)).collect(),
            basepoint: g.act_plane(&self.basepoint),
            delta: self.delta,
            depth: self.depth,
        }
    }
}

/// Atoms at the cylinder points of length `depth` with weights
/// `e^{−(δ+s)·d(w·i, i)}`, normalized to mass 1.
pub fn ps_density(group: &FuchsianGroup, depth: usize, s_offset: f64) -> Result<AtomicBoundaryMeasure, ConformalError> {
    if depth < 2 {
        return Err(ConformalError::InvalidDepth { depth, min: 2 });
    }
    let s = group.delta() + s_offset;
    let raw = group.words_of_length(depth, |w, m| {
        let xi = group.attracting_point(*w.last().expect("depth >= 2"));
        (m.act_boundary(&xi), displacement(m))
    })?;
    // Weights are tiny at depth 12; factor out the smallest displacement.
    let d0 = raw.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mut atoms: Vec<(BoundaryPoint, f64)> = raw.into_iter().map(|(u, d)| (u, (-s * (d - d0)).exp())).collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    for a in &mut atoms {
        a.1 /= total;
    }
    AtomicBoundaryMeasure::from_atoms(atoms, PlanePoint::i(), group.delta(), depth)
}

/// Normalized partial sum of the Poincaré series at exponent `s` over all
/// words of length at most `max_len`, with each orbit point `γ·i` recorded
/// at its foot `Re(γ·i)` on the boundary line.
pub fn poincare_partial_measure(
    group: &FuchsianGroup,
    max_len: usize,
    s: f64,
) -> Result<AtomicBoundaryMeasure, ConformalError> {
    let mut atoms = Vec::new();
    for w in group.enumerate_words(max_len)? {
        let p = w.matrix.act_plane(&PlanePoint::i());
        atoms.push((BoundaryPoint::Finite(p.x()), (-s * w.displacement).exp()));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    for a in &mut atoms {
        a.1 /= total;
    }
    AtomicBoundaryMeasure::from_atoms(atoms, PlanePoint::i(), group.delta(), max_len)
}

/// `ν_z = e^{−δ β_u(z, i)} ν_i`.
pub fn rn_reweight(nu: &AtomicBoundaryMeasure, z: &PlanePoint) -> Result<AtomicBoundaryMeasure, ConformalError> {
    if !nu.is_at_i() {
        return Err(ConformalError::NotAtBaseI);
    }
    let i = PlanePoint::i();
    let atoms = nu.atoms.iter().map(|(u, w)| (*u, w * (-nu.delta * busemann(u, z, &i)).exp())).collect();
    Ok(AtomicBoundaryMeasure { atoms, basepoint: *z, delta: nu.delta, depth: nu.depth })
}

/// `𝒫_Γ(w)`: orbit sum `Σ e^{−δ d(i, γw)}` over the shell `|γ| = depth`,
/// divided by the same sum for `d(w, γw)`.
pub fn scaling_p(group: &FuchsianGroup, w: &PlanePoint, depth: usize) -> Result<f64, ConformalError> {
    if depth < 4 {
        return Err(ConformalError::InvalidDepth { depth, min: 4 });
    }
    let d = group.delta();
    let i = PlanePoint::i();
    let terms = group.words_of_length(depth, |_, m| {
        let gw = m.act_plane(w);
        ((-d * hyp_dist(&i, &gw)).exp(), (-d * hyp_dist(w, &gw)).exp())
    })?;
    let num: f64 = terms.iter().map(|t| t.0).sum();
    let den: f64 = terms.iter().map(|t| t.1).sum();
    Ok(num / den)
}

/// Atoms `(t, weight)` on a horocycle orbit `ΓgN`, sorted by `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorocycleMeasure {
    t: Vec<f64>,
    weight: Vec<f64>,
    /// `prefix[k]` is the mass of the first `k` atoms.
    prefix: Vec<f64>,
    frame: GroupElement,
    depth: usize,
    skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Ball,
    Tail,
    Annulus(f64),
}

impl HorocycleMeasure {
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>, frame: GroupElement, depth: usize) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let t: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let weight: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let mut prefix = Vec::with_capacity(weight.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for w in &weight {
            acc += w;
            prefix.push(acc);
        }
        Self { t, weight, prefix, frame, depth, skipped: 0 }
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn frame(&self) -> GroupElement {
        self.frame
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Atoms dropped because they sat at `g·∞`.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn total_mass(&self) -> f64 {
        *self.prefix.last().expect("prefix has a leading zero")
    }

    /// Mass of `{a ≤ t ≤ b}`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        let lo = self.t.partition_point(|&t| t < a);
        let hi = self.t.partition_point(|&t| t <= b);
        self.prefix[hi] - self.prefix[lo]
    }

    /// `Σ_j w_j φ(t_j)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        self.t.iter().zip(&self.weight).map(|(t, w)| w * phi(*t)).sum()
    }
}

/// `μ^PS` on `ΓgN`: `t_j = g⁻¹·v_j` with weight `w_j e^{δ β_{v_j}(i, g·(i + t_j))}`.
pub fn ps_on_horocycle(nu: &AtomicBoundaryMeasure, g: &GroupElement) -> Result<HorocycleMeasure, ConformalError> {
    if !nu.is_at_i() {
        return Err(ConformalError::NotAtBaseI);
    }
    let ginv = g.inverse();
    let i = PlanePoint::i();
    let mut skipped = 0;
    let mut atoms = Vec::with_capacity(nu.len());
    for (v, w) in nu.atoms() {
        match ginv.act_boundary(v) {
            BoundaryPoint::Finite(t) => {
                let p = (*g * GroupElement::n(t)).act_plane(&i);
                atoms.push((t, w * (nu.delta * busemann(v, &i, &p)).exp()));
            }
            BoundaryPoint::Infinity => skipped += 1,
        }
    }
    let mut m = HorocycleMeasure::from_atoms(atoms, *g, nu.depth);
    m.skipped = skipped;
    Ok(m)
}

/// Mass of `B_T`, of its complement, or of the annulus
/// `(1−ε)T ≤ |t| ≤ (1+ε)T`.
pub fn ball_mass(mu: &HorocycleMeasure, t: f64, window: Window) -> Result<f64, ConformalError> {
    if !(t > 0.0) {
        return Err(ConformalError::BadRadius(t));
    }
    match window {
        Window::Ball => Ok(mu.mass_between(-t, t)),
        Window::Tail => {
            let lo = mu.t.partition_point(|&s| s < -t);
            let hi = mu.t.partition_point(|&s| s <= t);
            Ok(mu.prefix[lo] + (mu.total_mass() - mu.prefix[hi]))
        }
        Window::Annulus(eps) => {
            if !(eps > 0.0 && eps <= 0.5) || t < 2.0 {
                return Err(ConformalError::AnnulusDomain { eps, t });
            }
            let (a, b) = ((1.0 - eps) * t, (1.0 + eps) * t);
            Ok(mu.mass_between(a, b) + mu.mass_between(-b, -a))
        }
    }
}

/// `ν(k·{|u| ≥ e^t})` where `k ∈ K` sends `∞` to `η`.
pub fn s_set_mass(eta: &BoundaryPoint, t: f64, nu: &AtomicBoundaryMeasure) -> f64 {
    nu.arc_mass(&s_set(eta, t))
}

/// The arc `k·({|u| ≥ e^t} ∪ {∞})` with `k·∞ = η`.
pub fn s_set(eta: &BoundaryPoint, t: f64) -> BoundaryArc {
    // k_θ·∞ = −cot θ
    let theta = match *eta {
        BoundaryPoint::Infinity => 0.0,
        BoundaryPoint::Finite(u) => (-1.0f64).atan2(u).rem_euclid(std::f64::consts::PI),
    };
    let k = GroupElement::k(theta);
    let s = t.exp();
    let p = k.act_boundary(&BoundaryPoint::Finite(s));
    let q = k.act_boundary(&BoundaryPoint::Finite(-s));
    BoundaryArc::between(&p, &q, eta)
}

/// `dm_i(u)/du = 1/(1 + u²)`.
pub fn lebesgue_density(u: f64) -> f64 {
    1.0 / (1.0 + u * u)
}
