//! Schottky groups built from circle pairings.
//!
//! Letters are numbered `2j` for the generator of pair `j` and `2j + 1` for
//! its inverse. The generator of a pair maps the exterior of the source disk
//! onto the interior of the target disk.

use rayon::prelude::*;
use thiserror::Error;

use crate::moebius::{hopf_inverse, hyp_dist, GeometryError};
use crate::{BoundaryPoint, GroupElement, HopfCoordinates, PlanePoint};

/// Absolute tolerance for disk contact and pairing checks.
pub const TANGENCY_TOL: f64 = 1e-9;
/// Default cap on the number of enumerated words.
pub const DEFAULT_WORD_CAP: u64 = 5_000_000;
/// Default word length for the cached critical exponent.
pub const DEFAULT_DELTA_DEPTH: usize = 10;
/// Step guard for [`FuchsianGroup::reduce_point`].
pub const REDUCE_STEP_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuchsianError {
    #[error("pairing disks overlap: {0}")]
    OverlappingDisks(String),
    #[error("bad pairing: {0}")]
    BadPairing(String),
    #[error("reduction did not terminate after {0} steps")]
    NonTermination(usize),
    #[error("word budget exceeded: {count} words requested, cap is {cap}")]
    Budget { count: u128, cap: u64 },
    #[error("critical exponent estimate did not settle: delta {delta}, spread {spread}")]
    Diverged { delta: f64, spread: f64 },
    #[error("depth {depth} is below the minimum {min}")]
    InvalidDepth { depth: usize, min: usize },
    #[error("word is parabolic or elliptic (|trace| = {0})")]
    ParabolicWord(f64),
    #[error("letter sequence is not a freely reduced word")]
    NotReduced,
    #[error("cusped group has delta estimate {0}, expected > 1/2")]
    CuspDeltaTooSmall(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One pairing. For a parabolic pair the two `center` values are the edges
/// of the half-planes `Re z < source` and `Re z > target`; radii are unused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPair {
    pub source: (f64, f64),
    pub target: (f64, f64),
    pub parabolic: bool,
}

impl DiskPair {
    pub fn hyperbolic(c: f64, r: f64, c2: f64, r2: f64) -> Self {
        Self { source: (c, r), target: (c2, r2), parabolic: false }
    }

    pub fn parabolic(left: f64, right: f64) -> Self {
        Self { source: (left, 0.0), target: (right, 0.0), parabolic: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedDisks {
    pub pairs: Vec<DiskPair>,
}

impl PairedDisks {
    pub fn new(pairs: Vec<DiskPair>) -> Self {
        Self { pairs }
    }

    pub fn rank(&self) -> usize {
        self.pairs.len()
    }
}

/// Region that the image of a letter lands in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Disk { center: f64, radius: f64 },
    Left(f64),
    Right(f64),
}

impl Region {
    pub fn contains(&self, z: &PlanePoint) -> bool {
        match *self {
            Region::Disk { center, radius } => {
                let dx = z.x() - center;
                dx * dx + z.y() * z.y() < radius * radius
            }
            Region::Left(c) => z.x() < c,
            Region::Right(c) => z.x() > c,
        }
    }

    pub fn contains_boundary(&self, u: &BoundaryPoint) -> bool {
        match (*self, *u) {
            (Region::Disk { center, radius }, BoundaryPoint::Finite(v)) => (v - center).abs() < radius,
            (Region::Left(c), BoundaryPoint::Finite(v)) => v < c,
            (Region::Right(c), BoundaryPoint::Finite(v)) => v > c,
            (Region::Disk { .. }, BoundaryPoint::Infinity) => false,
            (_, BoundaryPoint::Infinity) => true,
        }
    }
}

/// A freely reduced word with its matrix and displacement `d(w·i, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub letters: Vec<u8>,
    pub matrix: GroupElement,
    pub displacement: f64,
}

impl Word {
    pub fn identity() -> Self {
        Self { letters: Vec::new(), matrix: GroupElement::identity(), displacement: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

pub fn displacement(g: &GroupElement) -> f64 {
    hyp_dist(&PlanePoint::i(), &g.act_plane(&PlanePoint::i()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMethod {
    Bowen,
    Poincare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub spread: f64,
}

#[derive(Debug, Clone)]
pub struct FuchsianGroup {
    disks: PairedDisks,
    generators: Vec<GroupElement>,
    letters: Vec<GroupElement>,
    regions: Vec<Region>,
    attracting: Vec<BoundaryPoint>,
    has_cusp: bool,
    delta: f64,
    delta_spread: f64,
    delta_depth: usize,
    word_cap: u64,
}

/// Anti-Möbius matrix of the inversion in the circle `|z − o| = ρ`.
fn inversion(o: f64, rho: f64) -> [f64; 4] {
    [o, rho * rho - o * o, 1.0, -o]
}

fn mat_mul(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    [
        p[0] * q[0] + p[1] * q[2],
        p[0] * q[1] + p[1] * q[3],
        p[2] * q[0] + p[3] * q[2],
        p[2] * q[1] + p[3] * q[3],
    ]
}

/// Inversion in the target circle after the inversion exchanging the two
/// circles (a reflection when the radii agree).
fn pairing_generator(pair: &DiskPair) -> Result<GroupElement, FuchsianError> {
    if pair.parabolic {
        return Ok(GroupElement::n(pair.target.0 - pair.source.0));
    }
    let (c1, r1) = pair.source;
    let (c2, r2) = pair.target;
    let swap = if (r1 - r2).abs() <= 1e-15 * r1.max(r2) {
        [-1.0, c1 + c2, 0.0, 1.0]
    } else {
        let o = (c1 * r2 - c2 * r1) / (r2 - r1);
        let power = (c1 - o) * (c1 - o) - r1 * r1;
        inversion(o, (power * r2 / r1).sqrt())
    };
    let m = mat_mul(inversion(c2, r2), swap);
    Ok(GroupElement::from_positive_det(m[0], m[1], m[2], m[3])?)
}

/// Attracting and repelling fixed points of a hyperbolic element.
pub fn fixed_points(g: &GroupElement) -> Result<(BoundaryPoint, BoundaryPoint), FuchsianError> {
    let [a, b, c, d] = g.entries();
    let tr = (a + d).abs();
    if tr <= 2.0 + 1e-9 {
        return Err(FuchsianError::ParabolicWord(tr));
    }
    let disc = ((a + d) * (a + d) - 4.0).sqrt();
    if c == 0.0 {
        let u = BoundaryPoint::Finite(b / (d - a));
        return Ok(if d.abs() > 1.0 { (u, BoundaryPoint::Infinity) } else { (BoundaryPoint::Infinity, u) });
    }
    let dm = d - a;
    let q = -0.5 * (dm + dm.signum() * disc);
    let (u1, u2) = if q == 0.0 { ((a - d) / (2.0 * c), (a - d) / (2.0 * c)) } else { (q / c, -b / q) };
    let contraction = |u: f64| (c * u + d).abs();
    if contraction(u1) > contraction(u2) {
        Ok((BoundaryPoint::Finite(u1), BoundaryPoint::Finite(u2)))
    } else {
        Ok((BoundaryPoint::Finite(u2), BoundaryPoint::Finite(u1)))
    }
}

fn word_count(rank: usize, max_len: usize) -> u128 {
    let k2 = 2 * rank as u128;
    let mut total: u128 = 1;
    let mut level: u128 = k2;
    for _ in 0..max_len {
        total = total.saturating_add(level);
        level = level.saturating_mul(k2.saturating_sub(1).max(1));
    }
    total
}

fn validate(disks: &PairedDisks) -> Result<bool, FuchsianError> {
    let tol = TANGENCY_TOL;
    let mut strip: Option<(f64, f64)> = None;
    let mut circles = Vec::new();
    for (j, p) in disks.pairs.iter().enumerate() {
        if p.parabolic {
            if strip.is_some() {
                return Err(FuchsianError::BadPairing("only one parabolic pair is supported".into()));
            }
            let (l, r) = (p.source.0, p.target.0);
            if l >= r {
                return Err(FuchsianError::OverlappingDisks(format!("half-planes of pair {j} overlap")));
            }
            if ((r - l) - 1.0).abs() > tol {
                return Err(FuchsianError::BadPairing(format!("parabolic pair {j} must translate by 1")));
            }
            strip = Some((l, r));
        } else {
            for (c, r) in [p.source, p.target] {
                if !(r > 0.0) || !c.is_finite() || !r.is_finite() {
                    return Err(FuchsianError::BadPairing(format!("pair {j} has an invalid disk")));
                }
                circles.push((c - r, c + r, j));
            }
        }
    }
    if disks.pairs.is_empty() {
        return Err(FuchsianError::BadPairing("no pairs".into()));
    }
    circles.sort_by(|p, q| p.0.total_cmp(&q.0));
    for w in circles.windows(2) {
        if w[1].0 - w[0].1 < tol {
            return Err(FuchsianError::OverlappingDisks(format!(
                "[{}, {}] meets [{}, {}]",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    if let Some((l, r)) = strip {
        for &(lo, hi, _) in &circles {
            if lo - l < tol || r - hi < tol {
                return Err(FuchsianError::OverlappingDisks(format!("[{lo}, {hi}] meets a cusp half-plane")));
            }
        }
    }
    for &(lo, hi, j) in &circles {
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        if c * c + 1.0 <= r * r + tol {
            return Err(FuchsianError::BadPairing(format!("base point i lies in a disk of pair {j}")));
        }
    }
    Ok(strip.is_some())
}

impl FuchsianGroup {
    /// Builds and validates the group, estimating δ at the default depth.
    pub fn build(disks: PairedDisks) -> Result<Self, FuchsianError> {
        Self::build_with_depth(disks, DEFAULT_DELTA_DEPTH)
    }

    pub fn build_with_depth(disks: PairedDisks, delta_depth: usize) -> Result<Self, FuchsianError> {
        let has_cusp = validate(&disks)?;
        let generators = disks.pairs.iter().map(pairing_generator).collect::<Result<Vec<_>, _>>()?;
        let mut letters = Vec::with_capacity(2 * generators.len());
        let mut regions = Vec::with_capacity(2 * generators.len());
        for (p, g) in disks.pairs.iter().zip(&generators) {
            letters.push(*g);
            letters.push(g.inverse());
            if p.parabolic {
                regions.push(Region::Right(p.target.0));
                regions.push(Region::Left(p.source.0));
            } else {
                regions.push(Region::Disk { center: p.target.0, radius: p.target.1 });
                regions.push(Region::Disk { center: p.source.0, radius: p.source.1 });
            }
        }
        for (j, p) in disks.pairs.iter().enumerate() {
            if !p.parabolic {
                check_pairing(&generators[j], p, j)?;
            }
        }
        let attracting = letters
            .iter()
            .map(|g| match fixed_points(g) {
                Ok((attr, _)) => attr,
                Err(_) => BoundaryPoint::Infinity,
            })
            .collect();
        let mut group = Self {
            disks,
            generators,
            letters,
            regions,
            attracting,
            has_cusp,
            delta: f64::NAN,
            delta_spread: f64::NAN,
            delta_depth,
            word_cap: DEFAULT_WORD_CAP,
        };
        if group.rank() >= 2 {
            let est = group.estimate_delta(delta_depth, DeltaMethod::Bowen)?;
            group.delta = est.delta;
            group.delta_spread = est.spread;
            if has_cusp && group.delta <= 0.5 {
                return Err(FuchsianError::CuspDeltaTooSmall(group.delta));
            }
        } else {
            let est = group.estimate_delta(delta_depth.max(4), DeltaMethod::Poincare)?;
            group.delta = est.delta;
            group.delta_spread = est.spread;
        }
        Ok(group)
    }

    pub fn with_word_cap(mut self, cap: u64) -> Self {
        self.word_cap = cap;
        self
    }

    pub fn disks(&self) -> &PairedDisks {
        &self.disks
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn letter(&self, l: u8) -> &GroupElement {
        &self.letters[l as usize]
    }

    pub fn letter_count(&self) -> usize {
        self.letters.len()
    }

    /// Region containing the image of anything outside the inverse letter's
    /// region, i.e. the disk a word starting with `l` sends `i` into.
    pub fn region(&self, l: u8) -> &Region {
        &self.regions[l as usize]
    }

    pub fn attracting_point(&self, l: u8) -> BoundaryPoint {
        self.attracting[l as usize]
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn has_cusp(&self) -> bool {
        self.has_cusp
    }

    pub fn is_elementary(&self) -> bool {
        self.rank() < 2
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delta_spread(&self) -> f64 {
        self.delta_spread
    }

    pub fn delta_depth(&self) -> usize {
        self.delta_depth
    }

    pub fn word_cap(&self) -> u64 {
        self.word_cap
    }

    /// Strip `[left, right]` for the cusped group.
    pub fn cusp_strip(&self) -> Option<(f64, f64)> {
        self.disks.pairs.iter().find(|p| p.parabolic).map(|p| (p.source.0, p.target.0))
    }

    /// The letter index pair of the parabolic generator.
    pub fn parabolic_letter(&self) -> Option<u8> {
        self.disks.pairs.iter().position(|p| p.parabolic).map(|j| 2 * j as u8)
    }

    pub fn word(&self, letters: &[u8]) -> Result<Word, FuchsianError> {
        let mut m = GroupElement::identity();
        for (i, &l) in letters.iter().enumerate() {
            if l as usize >= self.letters.len() || (i > 0 && letters[i - 1] == l ^ 1) {
                return Err(FuchsianError::NotReduced);
            }
            m = m * self.letters[l as usize];
        }
        Ok(Word { letters: letters.to_vec(), matrix: m, displacement: displacement(&m) })
    }

    pub fn count_words(&self, max_len: usize) -> u128 {
        word_count(self.rank(), max_len)
    }

    fn check_budget(&self, max_len: usize) -> Result<(), FuchsianError> {
        let count = self.count_words(max_len);
        if count > self.word_cap as u128 {
            return Err(FuchsianError::Budget { count, cap: self.word_cap });
        }
        Ok(())
    }

    /// Every freely reduced word of length at most `max_len`, depth first.
    pub fn enumerate_words(&self, max_len: usize) -> Result<WordIter<'_>, FuchsianError> {
        self.check_budget(max_len)?;
        Ok(WordIter::new(self, max_len))
    }

    /// Calls `f` on every reduced word of length exactly `len` whose first
    /// letters are `prefix`, in lexicographic order of letters.
    pub fn for_each_word_with_prefix<F: FnMut(&[u8], &GroupElement)>(&self, prefix: &[u8], len: usize, mut f: F) {
        let k2 = self.letters.len() as u8;
        let mut letters = prefix.to_vec();
        let mut mats = Vec::with_capacity(len + 1);
        let mut m = GroupElement::identity();
        mats.push(m);
        for &l in prefix {
            m = m * self.letters[l as usize];
            mats.push(m);
        }
        if prefix.len() >= len {
            if prefix.len() == len {
                f(&letters, &m);
            }
            return;
        }
        // Odometer over the remaining positions.
        let start = prefix.len();
        let first_allowed = |prev: Option<u8>, from: u8| -> Option<u8> {
            (from..k2).find(|&l| prev.map_or(true, |p| l != p ^ 1))
        };
        let mut pos = start;
        let mut next_from = 0u8;
        loop {
            let prev = if pos == 0 { None } else { Some(letters[pos - 1]) };
            match first_allowed(prev, next_from) {
                Some(l) => {
                    letters.truncate(pos);
                    letters.push(l);
                    mats.truncate(pos + 1);
                    let m = mats[pos] * self.letters[l as usize];
                    mats.push(m);
                    if pos + 1 == len {
                        f(&letters, &m);
                        next_from = l + 1;
                    } else {
                        pos += 1;
                        next_from = 0;
                    }
                }
                None => {
                    if pos == start {
                        return;
                    }
                    pos -= 1;
                    next_from = letters[pos] + 1;
                }
            }
        }
    }

    /// All words of length exactly `len` as `(letters, matrix)`, in the same
    /// order as [`Self::for_each_word_with_prefix`] with an empty prefix.
    /// Work is split over the first two letters and run in parallel.
    pub fn words_of_length<T: Send, F>(&self, len: usize, f: F) -> Result<Vec<T>, FuchsianError>
    where
        F: Fn(&[u8], &GroupElement) -> T + Sync,
    {
        self.check_budget(len)?;
        let split = len.min(2);
        let mut prefixes = Vec::new();
        self.for_each_word_with_prefix(&[], split, |w, _| prefixes.push(w.to_vec()));
        let chunks: Vec<Vec<T>> = prefixes
            .par_iter()
            .map(|p| {
                let mut out = Vec::new();
                self.for_each_word_with_prefix(p, len, |w, m| out.push(f(w, m)));
                out
            })
            .collect();
        Ok(chunks.into_iter().flatten().collect())
    }

    /// Folds `p` into the closed fundamental domain. Returns the reduced
    /// point and the word `w` with `w·reduced = p`.
    pub fn reduce_point(&self, p: &PlanePoint) -> Result<(PlanePoint, Word), FuchsianError> {
        let mut z = *p;
        let mut letters = Vec::new();
        let strip = self.cusp_strip();
        let par = self.parabolic_letter();
        for _ in 0..REDUCE_STEP_LIMIT {
            if let (Some((l, r)), Some(pl)) = (strip, par) {
                if z.x() > r || z.x() < l {
                    let k = ((z.x() - l) / (r - l)).floor();
                    let k = if z.x() - k * (r - l) > r { k + 1.0 } else { k };
                    let (letter, count) = if k > 0.0 { (pl, k) } else { (pl ^ 1, -k) };
                    letters.extend(std::iter::repeat(letter).take(count as usize));
                    z = PlanePoint::new(z.x() - k * (r - l), z.y())?;
                    continue;
                }
            }
            let hit = self
                .regions
                .iter()
                .position(|reg| matches!(reg, Region::Disk { .. }) && reg.contains(&z));
            match hit {
                Some(l) => {
                    z = self.letters[l ^ 1].act_plane(&z);
                    letters.push(l as u8);
                }
                None => {
                    let word = self.word(&letters)?;
                    return Ok((z, word));
                }
            }
        }
        Err(FuchsianError::NonTermination(REDUCE_STEP_LIMIT))
    }

    /// Reduces a frame: returns `(w⁻¹h, w)` with `(w⁻¹h)·i` in the closed
    /// fundamental domain.
    pub fn reduce_element(&self, h: &GroupElement) -> Result<(GroupElement, Word), FuchsianError> {
        let (_, w) = self.reduce_point(&h.act_plane(&PlanePoint::i()))?;
        Ok((w.matrix.inverse() * *h, w))
    }

    /// Critical exponent estimate from words of length `depth`.
    pub fn estimate_delta(&self, depth: usize, method: DeltaMethod) -> Result<DeltaEstimate, FuchsianError> {
        if depth < 4 {
            return Err(FuchsianError::InvalidDepth { depth, min: 4 });
        }
        self.check_budget(depth)?;
        let (now, before) = match method {
            DeltaMethod::Bowen => {
                let d_l = self.words_of_length(depth, |_, m| displacement(m))?;
                let d_prev = self.words_of_length(depth - 1, |_, m| displacement(m))?;
                (bowen_root(&d_l), bowen_root(&d_prev))
            }
            DeltaMethod::Poincare => (self.poincare_slope(depth)?, self.poincare_slope(depth - 1)?),
        };
        let spread = (now - before).abs();
        if spread > 0.05 {
            return Err(FuchsianError::Diverged { delta: now, spread });
        }
        Ok(DeltaEstimate { delta: now, spread })
    }

    /// Slope of `log N(R)` against `R`, over radii where every orbit point
    /// within `R` has word length at most `depth`.
    fn poincare_slope(&self, depth: usize) -> Result<f64, FuchsianError> {
        let mut disp: Vec<f64> = Vec::new();
        for l in 0..=depth {
            disp.extend(self.words_of_length(l, |_, m| displacement(m))?);
        }
        let r_max = self
            .words_of_length(depth + 1, |_, m| displacement(m))?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        disp.sort_by(f64::total_cmp);
        let pts: Vec<(f64, f64)> = (0..=20)
            .map(|k| {
                let r = r_max * (0.5 + 0.5 * k as f64 / 20.0);
                let n = disp.partition_point(|&d| d <= r) as f64;
                (r, n.ln())
            })
            .collect();
        Ok(linear_fit(&pts).0)
    }

    /// One sample per cylinder of length `depth`: `w·ξ` with ξ the attracting
    /// fixed point of the last letter of `w`.
    pub fn sample_limit_set(&self, depth: usize) -> Result<Vec<BoundaryPoint>, FuchsianError> {
        if depth < 1 {
            return Err(FuchsianError::InvalidDepth { depth, min: 1 });
        }
        self.words_of_length(depth, |w, m| m.act_boundary(&self.attracting[*w.last().unwrap() as usize]))
    }

    /// A frame whose forward and backward endpoints are the attracting and
    /// repelling fixed points of `w`, at position `t` along the axis.
    pub fn radial_frame(&self, w: &Word, t: f64) -> Result<GroupElement, FuchsianError> {
        let (attr, rep) = fixed_points(&w.matrix)?;
        Ok(hopf_inverse(&HopfCoordinates { u_plus: attr, u_minus: rep, s: t })?)
    }
}

fn check_pairing(g: &GroupElement, p: &DiskPair, j: usize) -> Result<(), FuchsianError> {
    let (c1, r1) = p.source;
    let (c2, r2) = p.target;
    let bad = |what: &str| FuchsianError::BadPairing(format!("pair {j}: {what}"));
    for k in 0..16 {
        let phi = std::f64::consts::PI * (k as f64 + 0.5) / 16.0;
        let q = PlanePoint::new(c1 + r1 * phi.cos(), r1 * phi.sin())?;
        let img = g.act_plane(&q);
        let dist = ((img.x() - c2).powi(2) + img.y().powi(2)).sqrt();
        if (dist - r2).abs() > TANGENCY_TOL * r2.max(1.0) {
            return Err(bad("source circle is not mapped onto the target circle"));
        }
    }
    match g.act_boundary(&BoundaryPoint::Infinity) {
        BoundaryPoint::Finite(v) if (v - c2).abs() < r2 => Ok(()),
        _ => Err(bad("exterior of the source disk is not mapped into the target disk")),
    }
}

/// Root of `Σ e^{−s d} = 1` by bisection in `s`.
fn bowen_root(disp: &[f64]) -> f64 {
    let log_sum = |s: f64| {
        let m = disp.iter().map(|d| -s * d).fold(f64::NEG_INFINITY, f64::max);
        m + disp.iter().map(|d| (-s * d - m).exp()).sum::<f64>().ln()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while log_sum(hi) > 0.0 && hi < 64.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_sum(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Unweighted least squares `y = slope·x + intercept`; returns
/// `(slope, intercept, rms residual)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>();
    (slope, intercept, (rss / n).sqrt())
}

/// Depth-first stream of reduced words; each step costs one matrix product.
pub struct WordIter<'a> {
    group: &'a FuchsianGroup,
    max_len: usize,
    stack: Vec<(u8, GroupElement)>,
    started: bool,
}

impl<'a> WordIter<'a> {
    fn new(group: &'a FuchsianGroup, max_len: usize) -> Self {
        Self { group, max_len, stack: Vec::with_capacity(max_len), started: false }
    }

    fn current(&self) -> Word {
        let letters: Vec<u8> = self.stack.iter().map(|s| s.0).collect();
        let matrix = self.stack.last().map_or_else(GroupElement::identity, |s| s.1);
        Word { letters, matrix, displacement: displacement(&matrix) }
    }

    fn push_from(&mut self, from: u8) -> bool {
        let k2 = self.group.letters.len() as u8;
        let prev = self.stack.last().map(|s| s.0);
        if let Some(l) = (from..k2).find(|&l| prev.map_or(true, |p| l != p ^ 1)) {
            let base = self.stack.last().map_or_else(GroupElement::identity, |s| s.1);
            self.stack.push((l, base * self.group.letters[l as usize]));
            true
        } else {
            false
        }
    }
}

impl Iterator for WordIter<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if !self.started {
            self.started = true;
            return Some(self.current());
        }
        if self.stack.len() < self.max_len && self.push_from(0) {
            return Some(self.current());
        }
        while let Some((l, _)) = self.stack.pop() {
            if self.push_from(l + 1) {
                return Some(self.current());
            }
        }
        None
    }
}

/// Example groups used throughout the tests and the command line.
pub mod examples {
    use super::*;

    /// Disks at ±1.5 and ±4.5, radius 1/2. δ ≈ 0.257.
    pub fn symmetric() -> PairedDisks {
        PairedDisks::new(vec![DiskPair::hyperbolic(-1.5, 0.5, 1.5, 0.5), DiskPair::hyperbolic(-4.5, 0.5, 4.5, 0.5)])
    }

    /// Near-tangent disks covering most of the circle. δ ≈ 0.69.
    pub fn wide() -> PairedDisks {
        PairedDisks::new(vec![DiskPair::hyperbolic(-9.5, 8.4, 0.47, 0.41), DiskPair::hyperbolic(-0.47, 0.41, 9.5, 8.4)])
    }

    /// Disks at ±1.5 and ±4.5, radius 0.9. δ ≈ 0.36.
    pub fn thin() -> PairedDisks {
        PairedDisks::new(vec![DiskPair::hyperbolic(-1.5, 0.9, 1.5, 0.9), DiskPair::hyperbolic(-4.5, 0.9, 4.5, 0.9)])
    }

    /// `z ↦ z + 1` pairing the half-planes at ±1/2, plus disks at ±1/4 of
    /// radius 1/5. δ ≈ 0.78.
    pub fn cusped() -> PairedDisks {
        PairedDisks::new(vec![DiskPair::parabolic(-0.5, 0.5), DiskPair::hyperbolic(-0.25, 0.2, 0.25, 0.2)])
    }
}
