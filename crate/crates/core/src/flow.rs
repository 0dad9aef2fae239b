//! Test functions on `Γ\G` and the integrals the theorems are about:
//! long horocycle segments, translates of short ones, and the Burger-Roblin
//! measures `m^BR` and `m^BR*`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::conformal::AtomicBoundaryMeasure;
use crate::fuchsian::{FuchsianError, FuchsianGroup, Region};
use crate::moebius::{bruhat_nau, busemann, hopf, hopf_inverse, iwasawa, Decomposition};
use crate::quad::{integrate_rect_panels, integrate_scalar, Quad, QuadError};
use crate::{BoundaryPoint, GroupElement, HopfCoordinates, Iwasawa, PlanePoint};

/// Smallest `|d|` allowed in the Bruhat chart of a support probe.
pub const CHART_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid bump: {0}")]
    InvalidBump(String),
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("quadrature budget exhausted: partial value {value}, error estimate {error}")]
    Budget { value: f64, error: f64 },
    #[error("support leaves the Bruhat cell (|d| = {0})")]
    ChartViolation(f64),
    #[error("measure must be based at i")]
    NotAtBaseI,
    #[error(transparent)]
    Group(#[from] FuchsianError),
}

impl From<QuadError<1>> for FlowError {
    fn from(e: QuadError<1>) -> Self {
        FlowError::Budget { value: e.value[0], error: e.error }
    }
}

/// Adaptive Gauss-Kronrod (7/15) with bisection. `max_panels` is the
/// refinement budget on top of the initial panels sized to the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, max_panels: usize) -> Result<Self, FlowError> {
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(FlowError::InvalidSpec(format!("abs_tol must be positive, got {abs_tol}")));
        }
        if max_panels == 0 {
            return Err(FlowError::InvalidSpec("max_panels must be positive".into()));
        }
        Ok(Self { abs_tol, max_panels })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-8, max_panels: 200_000 }
    }
}

/// A compactly supported function on `G` whose support lies in one
/// fundamental domain, so that its automorphization is a single term.
pub trait TestFunction: Sync {
    fn value(&self, h: &GroupElement) -> f64;
    /// An `m × m × m` grid over the closed support.
    fn support_grid(&self, m: usize) -> Vec<GroupElement>;
    /// Lower bound for the time a unit-speed curve spends crossing the
    /// support; quadrature panels are sized from it.
    fn feature_size(&self) -> f64;

    fn probes(&self) -> Vec<GroupElement> {
        self.support_grid(3)
    }
}

/// `amplitude · Π (1 − s²)^order` in normalized `NAK` offsets `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpFunction {
    pub center: Iwasawa,
    pub radii: (f64, f64, f64),
    pub order: u32,
    pub amplitude: f64,
}

fn wrap_half_pi(t: f64) -> f64 {
    (t + 0.5 * PI).rem_euclid(PI) - 0.5 * PI
}

impl BumpFunction {
    /// Checks shape parameters only; [`BumpFunction::validate`] checks the
    /// fundamental-domain condition against a group.
    pub fn new(center: Iwasawa, radii: (f64, f64, f64), order: u32, amplitude: f64) -> Result<Self, FlowError> {
        let (rx, ry, rt) = radii;
        let bad = |m: String| Err(FlowError::InvalidBump(m));
        if !(rx > 0.0 && ry > 0.0 && rt > 0.0) {
            return bad(format!("radii must be positive, got {radii:?}"));
        }
        if !(center.y > ry) {
            return bad(format!("y radius {ry} reaches the boundary from height {}", center.y));
        }
        if rt >= 0.5 * PI {
            return bad(format!("theta radius {rt} must be below pi/2"));
        }
        if order < 2 {
            return bad(format!("order must be at least 2, got {order}"));
        }
        if !amplitude.is_finite() {
            return bad("amplitude must be finite".into());
        }
        let center = Iwasawa { theta: center.theta.rem_euclid(PI), ..center };
        Ok(Self { center, radii, order, amplitude })
    }

    pub fn center_element(&self) -> GroupElement {
        crate::moebius::iwasawa_compose(&self.center, Decomposition::Nak)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { amplitude: self.amplitude * factor, ..*self }
    }

    /// The support rectangle in the plane must miss every closed pairing
    /// region, and every probe must reduce to itself.
    pub fn validate(&self, group: &FuchsianGroup) -> Result<(), FlowError> {
        let (rx, ry, _) = self.radii;
        let (x0, x1) = (self.center.x - rx, self.center.x + rx);
        let y0 = self.center.y - ry;
        for l in 0..group.letter_count() as u8 {
            let hit = match *group.region(l) {
                Region::Disk { center, radius } => {
                    let dx = (center - x1).max(x0 - center).max(0.0);
                    let dy = y0;
                    dx * dx + dy * dy <= radius * radius
                }
                Region::Left(c) => x0 <= c,
                Region::Right(c) => x1 >= c,
            };
            if hit {
                return Err(FlowError::InvalidBump(format!("support meets the pairing region of letter {l}")));
            }
        }
        for p in self.probes() {
            let (_, w) = group.reduce_element(&p)?;
            if !w.is_empty() {
                return Err(FlowError::InvalidBump("a support probe reduces to another fundamental domain".into()));
            }
        }
        Ok(())
    }
}

impl TestFunction for BumpFunction {
    fn value(&self, h: &GroupElement) -> f64 {
        let p = iwasawa(h, Decomposition::Nak);
        let (rx, ry, rt) = self.radii;
        let s = [
            (p.x - self.center.x) / rx,
            (p.y - self.center.y) / ry,
            wrap_half_pi(p.theta - self.center.theta) / rt,
        ];
        if s.iter().any(|v| v.abs() >= 1.0) {
            return 0.0;
        }
        s.iter().fold(self.amplitude, |acc, v| acc * (1.0 - v * v).powi(self.order as i32))
    }

    fn support_grid(&self, m: usize) -> Vec<GroupElement> {
        let m = m.max(2);
        let (rx, ry, rt) = self.radii;
        let node = |k: usize| -1.0 + 2.0 * k as f64 / (m - 1) as f64;
        let mut out = Vec::with_capacity(m * m * m);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = Iwasawa {
                        x: self.center.x + rx * node(i),
                        y: self.center.y + ry * node(j),
                        theta: self.center.theta + rt * node(k),
                    };
                    out.push(crate::moebius::iwasawa_compose(&p, Decomposition::Nak));
                }
            }
        }
        out
    }

    fn feature_size(&self) -> f64 {
        let (rx, ry, rt) = self.radii;
        let y = self.center.y + ry;
        (rx / y).min(ry / y).min(rt)
    }
}

/// `h ↦ f(h·n_{−s})`: the test function moved by `n_s` on the right.
#[derive(Debug, Clone, Copy)]
pub struct RightShifted<'a, F: TestFunction> {
    pub inner: &'a F,
    pub s: f64,
}

impl<F: TestFunction> TestFunction for RightShifted<'_, F> {
    fn value(&self, h: &GroupElement) -> f64 {
        self.inner.value(&(*h * GroupElement::n(-self.s)))
    }

    fn support_grid(&self, m: usize) -> Vec<GroupElement> {
        self.inner.support_grid(m).into_iter().map(|g| g * GroupElement::n(self.s)).collect()
    }

    fn feature_size(&self) -> f64 {
        self.inner.feature_size() / (1.0 + self.s.abs())
    }
}

/// `h ↦ f(h·n*_{−s})`: the test function moved by `n*_s` on the right.
#[derive(Debug, Clone, Copy)]
pub struct RightShiftedStar<'a, F: TestFunction> {
    pub inner: &'a F,
    pub s: f64,
}

impl<F: TestFunction> TestFunction for RightShiftedStar<'_, F> {
    fn value(&self, h: &GroupElement) -> f64 {
        self.inner.value(&(*h * GroupElement::n_star(-self.s)))
    }

    fn support_grid(&self, m: usize) -> Vec<GroupElement> {
        self.inner.support_grid(m).into_iter().map(|g| g * GroupElement::n_star(self.s)).collect()
    }

    fn feature_size(&self) -> f64 {
        self.inner.feature_size() / (1.0 + self.s.abs())
    }
}

/// `f` as a function on `Γ\G`: reduce `h` into the fundamental domain and
/// evaluate there. A frame that cannot be reduced lies beyond any compact
/// support and evaluates to zero.
pub fn eval_automorphic<F: TestFunction>(group: &FuchsianGroup, f: &F, h: &GroupElement) -> f64 {
    match group.reduce_element(h) {
        Ok((r, _)) => f.value(&r),
        Err(_) => 0.0,
    }
}

fn line_integral<G: FnMut(f64) -> f64>(
    g: G,
    (a, b): (f64, f64),
    width: f64,
    q: &QuadratureSpec,
) -> Result<Quad<1>, FlowError> {
    let initial = (((b - a) / width).ceil() as usize).max(1);
    Ok(integrate_scalar(g, a, b, q.abs_tol, initial, initial + q.max_panels)?)
}

/// `∫_a^b f(Γ g n_t) dt`.
pub fn horocycle_integral_between<F: TestFunction>(
    group: &FuchsianGroup,
    f: &F,
    g: &GroupElement,
    (a, b): (f64, f64),
    q: &QuadratureSpec,
) -> Result<Quad<1>, FlowError> {
    line_integral(|t| eval_automorphic(group, f, &(*g * GroupElement::n(t))), (a, b), 0.5 * f.feature_size(), q)
}

/// `∫_{−T}^{T} f(Γ g n_t) dt`.
pub fn horocycle_integral<F: TestFunction>(
    group: &FuchsianGroup,
    f: &F,
    g: &GroupElement,
    t: f64,
    q: &QuadratureSpec,
) -> Result<Quad<1>, FlowError> {
    if !(t > 0.0) {
        return Err(FlowError::InvalidSpec(format!("T must be positive, got {t}")));
    }
    horocycle_integral_between(group, f, g, (-t, t), q)
}

/// Smooth weight `(1 − ((t − center)/half_width)²)^order` on its support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub center: f64,
    pub half_width: f64,
    pub order: u32,
}

impl Weight {
    pub fn value(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - s * s).powi(self.order as i32)
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// `∫ f(Γ g n_t a_y) φ(t) dt` over the support of `φ`. The curve moves at
/// speed `1/y`, so panels shrink with `y`.
pub fn translate_integral<F: TestFunction, P: Fn(f64) -> f64>(
    group: &FuchsianGroup,
    f: &F,
    g: &GroupElement,
    y: f64,
    phi: P,
    support: (f64, f64),
    q: &QuadratureSpec,
) -> Result<Quad<1>, FlowError> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(FlowError::InvalidSpec(format!("y must lie in (0, 1], got {y}")));
    }
    let ay = GroupElement::a(y);
    line_integral(
        |t| {
            let w = phi(t);
            if w == 0.0 {
                0.0
            } else {
                w * eval_automorphic(group, f, &(*g * GroupElement::n(t) * ay))
            }
        },
        support,
        0.5 * f.feature_size() * y,
        q,
    )
}

/// Angle `θ ∈ [0, π)` with `k_θ·∞ = u`.
fn boundary_angle(u: &BoundaryPoint) -> f64 {
    match *u {
        BoundaryPoint::Infinity => 0.0,
        BoundaryPoint::Finite(v) => (-1.0f64).atan2(v).rem_euclid(PI),
    }
}

/// Range of a scalar over probe points, padded on both sides.
fn padded_range(vals: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let w = (hi - lo).max(1e-9);
    (lo - pad * w, hi + pad * w)
}

/// Range of angles around `reference`, unwrapped into a window of width π.
fn angle_range(angles: impl Iterator<Item = f64>, reference: f64, pad: f64) -> (f64, f64) {
    let (lo, hi) = padded_range(angles.map(|a| reference + wrap_half_pi(a - reference)), pad);
    (lo, hi)
}

fn angle_in(a: f64, (lo, hi): (f64, f64)) -> Option<f64> {
    let mid = 0.5 * (lo + hi);
    let v = mid + wrap_half_pi(a - mid);
    (v >= lo && v <= hi).then_some(v)
}

/// Atoms are pooled into this many equal cells across the coordinate range
/// and each cell is replaced by its mass-weighted centroid. The per-atom
/// integral is smooth in the coordinate, so the centroid rule is exact for
/// its linear part and the error is `O(F''·h²)` with `h` the cell width.
pub const ATOM_BINS: usize = 4096;

fn coarse_grain(atoms: Vec<(f64, f64)>, (lo, hi): (f64, f64), bins: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / bins as f64;
    let mut cells = vec![(0.0f64, 0.0f64); bins];
    for (c, w) in atoms {
        let k = (((c - lo) / width) as usize).min(bins - 1);
        cells[k].0 += w * c;
        cells[k].1 += w;
    }
    cells.into_iter().filter(|c| c.1 > 0.0).map(|(m, w)| (m / w, w)).collect()
}

const GRID: usize = 7;
const PAD: f64 = 0.25;
const INITIAL_2D: (usize, usize) = (4, 4);

/// Weighted sum of per-atom rectangle integrals. The tolerance is shared
/// evenly by mass, so `Σ w_j · err_j ≤ abs_tol`.
fn atom_sum<I>(
    atoms: &[(f64, f64)],
    xr: (f64, f64),
    yr: (f64, f64),
    q: &QuadratureSpec,
    integrand: I,
) -> Result<Quad<1>, FlowError>
where
    I: Fn(f64, f64, f64) -> f64 + Sync,
{
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    if mass == 0.0 {
        return Ok(Quad { value: [0.0], error: 0.0, panels: 0 });
    }
    let tol = q.abs_tol / mass;
    let budget = q.max_panels.max(INITIAL_2D.0 * INITIAL_2D.1);
    // Collected in atom order, so the sum does not depend on scheduling.
    let parts: Vec<Result<Quad<1>, QuadError<1>>> = atoms
        .par_iter()
        .map(|&(c, _)| integrate_rect_panels(|x, y| integrand(c, x, y), xr, yr, tol, INITIAL_2D, budget))
        .collect();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0;
    for (&(_, w), r) in atoms.iter().zip(parts) {
        let r = r?;
        value += w * r.value[0];
        error += w * r.error;
        panels += r.panels;
    }
    Ok(Quad { value: [value], error, panels })
}

fn check_base(nu: &AtomicBoundaryMeasure) -> Result<(), FlowError> {
    let b = nu.basepoint();
    if (b.x()).abs() > 1e-12 || (b.y() - 1.0).abs() > 1e-12 {
        return Err(FlowError::NotAtBaseI);
    }
    Ok(())
}

/// `m̃^BR(f) = ∫ f(k a_y n_x) y^{δ−1} dx dy dν(k·∞)`: one rectangle integral
/// in `(x, y)` per atom whose direction meets the support.
pub fn br_measure<F: TestFunction>(f: &F, nu: &AtomicBoundaryMeasure, q: &QuadratureSpec) -> Result<Quad<1>, FlowError> {
    br_binned(f, nu, q, ATOM_BINS)
}

fn br_binned<F: TestFunction>(f: &F, nu: &AtomicBoundaryMeasure, q: &QuadratureSpec, bins: usize) -> Result<Quad<1>, FlowError> {
    check_base(nu)?;
    let d = nu.delta();
    let grid = f.support_grid(GRID);
    let kan: Vec<Iwasawa> = grid.iter().map(|h| iwasawa(h, Decomposition::Kan)).collect();
    let reference = kan[kan.len() / 2].theta;
    let trange = angle_range(kan.iter().map(|p| p.theta), reference, PAD);
    let xr = padded_range(kan.iter().map(|p| p.x), PAD);
    let yr = padded_range(kan.iter().map(|p| p.y), PAD);
    let yr = (yr.0.max(0.5 * kan.iter().map(|p| p.y).fold(f64::INFINITY, f64::min)), yr.1);
    let atoms: Vec<(f64, f64)> =
        nu.atoms().iter().filter_map(|(u, w)| angle_in(boundary_angle(u), trange).map(|t| (t, *w))).collect();
    let atoms = coarse_grain(atoms, trange, bins);
    atom_sum(&atoms, xr, yr, q, |theta, x, y| {
        let h = GroupElement::k(theta) * GroupElement::a(y) * GroupElement::n(x);
        let v = f.value(&h);
        if v == 0.0 {
            0.0
        } else {
            v * y.powf(d - 1.0)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarMode {
    Hopf,
    Nau,
}

/// `m̃^BR*(f)`, either in Hopf coordinates (atom `[h]⁻`, Lebesgue `[h]⁺`,
/// flow time) or in the Bruhat chart `g·N A U` based at `g = chart`.
pub fn br_star_measure<F: TestFunction>(
    f: &F,
    nu: &AtomicBoundaryMeasure,
    mode: StarMode,
    chart: &GroupElement,
    q: &QuadratureSpec,
) -> Result<Quad<1>, FlowError> {
    check_base(nu)?;
    match mode {
        StarMode::Hopf => br_star_hopf(f, nu, q),
        StarMode::Nau => br_star_nau(f, nu, chart, q),
    }
}

/// Integrates `f(h) e^{δ s} e^{r}` with `r = β_{h⁺}(i, h·i)`,
/// `s = β_{h⁻}(i, h·i)`. `[h]⁺` is parametrized by the angle `α` with
/// `k_α·∞ = [h]⁺`, for which `dm_i = dα`.
fn br_star_hopf<F: TestFunction>(f: &F, nu: &AtomicBoundaryMeasure, q: &QuadratureSpec) -> Result<Quad<1>, FlowError> {
    let d = nu.delta();
    let grid = f.support_grid(GRID);
    let coords: Vec<HopfCoordinates> = grid.iter().map(hopf).collect();
    let plus: Vec<f64> = coords.iter().map(|c| boundary_angle(&c.u_plus)).collect();
    let minus: Vec<f64> = coords.iter().map(|c| boundary_angle(&c.u_minus)).collect();
    let mid = grid.len() / 2;
    let ar = angle_range(plus.iter().copied(), plus[mid], PAD);
    let mr = angle_range(minus.iter().copied(), minus[mid], PAD);
    let rr = padded_range(coords.iter().map(|c| c.s), PAD);
    let atoms: Vec<(f64, f64)> =
        nu.atoms().iter().filter_map(|(u, w)| angle_in(boundary_angle(u), mr).map(|t| (t, *w))).collect();
    let atoms = coarse_grain(atoms, mr, ATOM_BINS);
    let i = PlanePoint::i();
    atom_sum(&atoms, ar, rr, q, |angle, alpha, r| {
        let um = GroupElement::k(angle).act_boundary(&BoundaryPoint::Infinity);
        let up = GroupElement::k(alpha).act_boundary(&BoundaryPoint::Infinity);
        let Ok(h) = hopf_inverse(&HopfCoordinates { u_plus: up, u_minus: um, s: r }) else {
            return 0.0;
        };
        let v = f.value(&h);
        if v == 0.0 {
            return 0.0;
        }
        let s = busemann(&um, &i, &h.act_plane(&i));
        v * (d * s + r).exp()
    })
}

/// For each atom `v` with `x = g⁻¹·v`: `∫ f(g n_x a_y n*_u)
/// e^{δ β_v(i, g n_x·i)} y^{−1−δ} du dy`. Along `a_y` the flow time is
/// `s = const − log y`, so `ds = dy/y`, and `[h]⁺ = g n_x a_y·(1/u)`
/// contributes `du`.
fn br_star_nau<F: TestFunction>(
    f: &F,
    nu: &AtomicBoundaryMeasure,
    g: &GroupElement,
    q: &QuadratureSpec,
) -> Result<Quad<1>, FlowError> {
    let d = nu.delta();
    let ginv = g.inverse();
    let mut charts = Vec::new();
    for h in f.support_grid(GRID) {
        let local = ginv * h;
        let [_, _, _, dd] = local.entries();
        if dd.abs() < CHART_MARGIN {
            return Err(FlowError::ChartViolation(dd.abs()));
        }
        charts.push(bruhat_nau(&local).map_err(|_| FlowError::ChartViolation(dd.abs()))?);
    }
    let xr = padded_range(charts.iter().map(|c| c.x), PAD);
    let yr = padded_range(charts.iter().map(|c| c.y), PAD);
    let yr = (yr.0.max(0.5 * charts.iter().map(|c| c.y).fold(f64::INFINITY, f64::min)), yr.1);
    let ur = padded_range(charts.iter().map(|c| c.u), PAD);
    let i = PlanePoint::i();
    let atoms: Vec<(f64, f64)> = nu
        .atoms()
        .iter()
        .filter_map(|(v, w)| match ginv.act_boundary(v) {
            BoundaryPoint::Finite(x) if x >= xr.0 && x <= xr.1 => {
                let gx = *g * GroupElement::n(x);
                Some((x, w * (d * busemann(v, &i, &gx.act_plane(&i))).exp()))
            }
            _ => None,
        })
        .collect();
    let atoms = coarse_grain(atoms, xr, ATOM_BINS);
    atom_sum(&atoms, yr, ur, q, |x, y, u| {
        let h = *g * GroupElement::n(x) * GroupElement::a(y) * GroupElement::n_star(u);
        let v = f.value(&h);
        if v == 0.0 {
            0.0
        } else {
            v * y.powf(-1.0 - d)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::ps_density;
    use crate::fuchsian::examples;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn wide() -> &'static FuchsianGroup {
        static G: OnceLock<FuchsianGroup> = OnceLock::new();
        G.get_or_init(|| FuchsianGroup::build(examples::wide()).unwrap())
    }

    fn nu() -> &'static AtomicBoundaryMeasure {
        static N: OnceLock<AtomicBoundaryMeasure> = OnceLock::new();
        N.get_or_init(|| ps_density(wide(), 6, 0.0).unwrap())
    }

    fn bump(x: f64, y: f64, theta: f64) -> BumpFunction {
        BumpFunction::new(Iwasawa { x, y, theta }, (0.15, 0.2, 0.4), 4, 1.0).unwrap()
    }

    fn q(tol: f64) -> QuadratureSpec {
        QuadratureSpec::new(tol, 200_000).unwrap()
    }

    fn random_frame(rng: &mut ChaCha8Rng) -> GroupElement {
        let p = Iwasawa { x: rng.gen_range(-0.3..0.3), y: rng.gen_range(0.6..2.0), theta: rng.gen_range(0.0..PI) };
        crate::moebius::iwasawa_compose(&p, Decomposition::Nak)
    }

    #[test]
    fn bump_shape() {
        let f = bump(0.0, 1.0, 0.3);
        assert_eq!(f.value(&f.center_element()), 1.0);
        let far = crate::moebius::iwasawa_compose(&Iwasawa { x: 0.2, y: 1.0, theta: 0.3 }, Decomposition::Nak);
        assert_eq!(f.value(&far), 0.0);
        let near = Iwasawa { x: 0.05, y: 1.1, theta: 0.3 + PI - 0.1 };
        let v = f.value(&crate::moebius::iwasawa_compose(&near, Decomposition::Nak));
        assert!(v > 0.0 && v < 1.0);
        let g = f.scaled(2.5);
        assert_eq!(g.value(&f.center_element()), 2.5);
        for (r, order) in [((0.0, 0.1, 0.1), 4), ((0.1, 0.1, 2.0), 4), ((0.1, 0.1, 0.1), 1)] {
            assert!(BumpFunction::new(Iwasawa { x: 0.0, y: 1.0, theta: 0.0 }, r, order, 1.0).is_err());
        }
        assert!(BumpFunction::new(Iwasawa { x: 0.0, y: 0.1, theta: 0.0 }, (0.1, 0.2, 0.1), 4, 1.0).is_err());
    }

    #[test]
    fn validation() {
        bump(0.0, 1.0, 0.3).validate(wide()).unwrap();
        // Straddles the pairing disk centered at 0.47.
        let bad = BumpFunction::new(Iwasawa { x: 0.45, y: 0.5, theta: 0.0 }, (0.1, 0.1, 0.3), 4, 1.0).unwrap();
        assert!(matches!(bad.validate(wide()), Err(FlowError::InvalidBump(_))));
    }

    #[test]
    fn automorphic_invariance() {
        let f = bump(0.0, 1.0, 0.3);
        let gammas: Vec<GroupElement> = wide().enumerate_words(3).unwrap().map(|w| w.matrix).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..200 {
            let h = f.center_element() * GroupElement::n(rng.gen_range(-0.1..0.1)) * GroupElement::k(rng.gen_range(-0.3..0.3));
            let v = eval_automorphic(wide(), &f, &h);
            hits += (v > 0.0) as usize;
            for gamma in &gammas {
                assert!((eval_automorphic(wide(), &f, &(*gamma * h)) - v).abs() < 1e-12);
            }
        }
        assert!(hits > 50);
    }

    #[test]
    fn matches_brute_force_orbit_sum() {
        let f = bump(0.0, 1.0, 0.3);
        let gammas: Vec<GroupElement> = wide().enumerate_words(6).unwrap().map(|w| w.matrix).collect();
        let shifts: Vec<GroupElement> = wide().enumerate_words(3).unwrap().map(|w| w.matrix).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let h = random_frame(&mut rng);
            let h = shifts[rng.gen_range(0..shifts.len())] * h;
            let brute: f64 = gammas.iter().map(|g| f.value(&(*g * h))).sum();
            assert!((eval_automorphic(wide(), &f, &h) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn horocycle_integrals() {
        let f = BumpFunction::new(Iwasawa { x: 0.0, y: 2.5, theta: 0.0 }, (0.95, 1.95, 0.75), 4, 1.0).unwrap();
        let g = wide().radial_frame(&wide().word(&[0]).unwrap(), 0.0).unwrap();
        let tol = 1e-8;
        let zero = f.scaled(0.0);
        assert_eq!(horocycle_integral(wide(), &zero, &g, 50.0, &q(tol)).unwrap().value[0], 0.0);
        let whole = horocycle_integral(wide(), &f, &g, 50.0, &q(tol)).unwrap().value[0];
        let left = horocycle_integral_between(wide(), &f, &g, (-50.0, 3.0), &q(tol / 2.0)).unwrap().value[0];
        let right = horocycle_integral_between(wide(), &f, &g, (3.0, 50.0), &q(tol / 2.0)).unwrap().value[0];
        assert!(whole > 0.0);
        assert!((left + right - whole).abs() < 2.0 * tol);
        let fine = horocycle_integral(wide(), &f, &g, 50.0, &q(tol / 2.0)).unwrap().value[0];
        assert!((fine - whole).abs() < 2.0 * tol);
        let gamma = wide().word(&[2, 1]).unwrap().matrix;
        let moved = horocycle_integral(wide(), &f, &(gamma * g), 50.0, &q(tol)).unwrap().value[0];
        assert!((moved - whole).abs() < 2.0 * tol);
        assert!(horocycle_integral(wide(), &f, &g, 0.0, &q(tol)).is_err());
    }

    #[test]
    fn translate_integrals() {
        let f = bump(0.0, 1.0, 0.3);
        let g = wide().radial_frame(&wide().word(&[0]).unwrap(), 0.0).unwrap();
        let w = Weight { center: 0.0, half_width: 1.0, order: 4 };
        let tol = 1e-9;
        let a = translate_integral(wide(), &f, &g, 0.05, |t| w.value(t), w.support(), &q(tol)).unwrap().value[0];
        let b = translate_integral(wide(), &f, &g, 0.05, |t| 3.0 * w.value(t), w.support(), &q(tol)).unwrap().value[0];
        assert!(a >= 0.0);
        assert!((b - 3.0 * a).abs() < 4.0 * tol);
        // A weight supported away from t = 0 only sees that stretch.
        let off = Weight { center: 5.0, half_width: 0.5, order: 4 };
        let c = translate_integral(wide(), &f, &g, 0.05, |t| off.value(t), (-1.0, 1.0), &q(tol)).unwrap().value[0];
        assert_eq!(c, 0.0);
        assert!(translate_integral(wide(), &f, &g, 2.0, |t| w.value(t), w.support(), &q(tol)).is_err());
    }

    #[test]
    fn br_measure_properties() {
        let tol = 1e-7;
        let f = bump(0.0, 1.0, 0.3);
        assert_eq!(br_measure(&f.scaled(0.0), nu(), &q(tol)).unwrap().value[0], 0.0);
        let base = br_measure(&f, nu(), &q(tol)).unwrap().value[0];
        assert!(base > 0.0);
        for s in [-0.4, 0.7] {
            let shifted = br_measure(&RightShifted { inner: &f, s }, nu(), &q(tol)).unwrap().value[0];
            assert!((shifted - base).abs() < 2.0 * tol, "{s}: {shifted} {base}");
        }
        let double = br_measure(&f.scaled(2.0), nu(), &q(tol)).unwrap().value[0];
        assert!((double - 2.0 * base).abs() < 2.0 * tol);
    }

    #[test]
    fn binning_matches_atom_by_atom() {
        let q = q(1e-9);
        for f in [bump(0.0, 1.0, 0.3), BumpFunction::new(Iwasawa { x: 0.0, y: 2.5, theta: 0.0 }, (0.95, 1.95, 0.75), 4, 1.0).unwrap()] {
            let binned = br_binned(&f, nu(), &q, ATOM_BINS).unwrap().value[0];
            let exact = br_binned(&f, nu(), &q, 1 << 24).unwrap().value[0];
            assert!((binned - exact).abs() < 1e-7, "{binned} {exact}");
        }
    }

    #[test]
    fn br_star_properties() {
        let tol = 1e-7;
        let f = bump(0.1, 1.3, 1.2);
        let c = f.center_element();
        for mode in [StarMode::Hopf, StarMode::Nau] {
            assert_eq!(br_star_measure(&f.scaled(0.0), nu(), mode, &c, &q(tol)).unwrap().value[0], 0.0);
        }
        let hopf = br_star_measure(&f, nu(), StarMode::Hopf, &c, &q(tol)).unwrap().value[0];
        let nau = br_star_measure(&f, nu(), StarMode::Nau, &c, &q(tol)).unwrap().value[0];
        assert!(hopf > 0.0);
        assert!((hopf / nau - 1.0).abs() < 1e-3, "{hopf} {nau}");
        let moved = br_star_measure(&RightShiftedStar { inner: &f, s: 0.3 }, nu(), StarMode::Hopf, &c, &q(tol)).unwrap();
        assert!((moved.value[0] - hopf).abs() < 2.0 * tol + 1e-3 * hopf);
        let w = GroupElement::new(0.0, -1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            br_star_measure(&f, nu(), StarMode::Nau, &(c * w), &q(tol)),
            Err(FlowError::ChartViolation(_))
        ));
    }
}
