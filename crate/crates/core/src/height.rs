//! The invariant height: how deep a point sits inside a cusp.

use thiserror::Error;

use crate::fuchsian::{FuchsianError, FuchsianGroup};
use crate::moebius::{iwasawa, Decomposition};
use crate::{BoundaryPoint, GroupElement, PlanePoint};

/// Default word-length budget for the truncated supremum.
pub const DEFAULT_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeightError {
    #[error("group has no cusp")]
    NoCusp,
    #[error(transparent)]
    Group(#[from] FuchsianError),
}

/// Parabolic fixed points `γ·∞` together with a normalizer `h = γ⁻¹`
/// sending each of them back to `∞`.
#[derive(Debug, Clone)]
pub struct CuspData {
    entries: Vec<(BoundaryPoint, GroupElement)>,
    depth: usize,
}

impl CuspData {
    pub fn entries(&self) -> &[(BoundaryPoint, GroupElement)] {
        &self.entries
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `max(1, max_η Im(h_η·z))`.
    pub fn height(&self, z: &PlanePoint) -> f64 {
        self.entries.iter().map(|(_, h)| im_image(h, z)).fold(1.0, f64::max)
    }

    /// Height of a frame, read off its `NAK` position `x + iy`.
    pub fn frame_height(&self, g: &GroupElement) -> f64 {
        let p = iwasawa(g, Decomposition::Nak);
        self.height(&PlanePoint::new(p.x, p.y).expect("iwasawa height is positive"))
    }

    /// Indices of entries whose open horoball `{Im(h·z) > 1}` contains `z`.
    pub fn horoballs_containing(&self, z: &PlanePoint) -> Vec<usize> {
        (0..self.entries.len()).filter(|&k| im_image(&self.entries[k].1, z) > 1.0).collect()
    }
}

fn im_image(h: &GroupElement, z: &PlanePoint) -> f64 {
    let [_, _, c, d] = h.entries();
    let re = c * z.x() + d;
    let im = c * z.y();
    z.y() / (re * re + im * im)
}

/// Entries `(γ·∞, γ⁻¹)` for reduced words `|γ| ≤ depth`, one per boundary
/// point; the shortest word wins.
pub fn cusp_orbit(group: &FuchsianGroup, depth: usize) -> Result<CuspData, HeightError> {
    if !group.has_cusp() {
        return Err(HeightError::NoCusp);
    }
    let mut raw: Vec<(BoundaryPoint, usize, GroupElement)> = group
        .enumerate_words(depth)?
        .map(|w| (w.matrix.act_boundary(&BoundaryPoint::Infinity), w.len(), w.matrix.inverse()))
        .collect();
    let key = |p: &BoundaryPoint| p.finite().unwrap_or(f64::INFINITY);
    raw.sort_by(|a, b| key(&a.0).total_cmp(&key(&b.0)).then(a.1.cmp(&b.1)));
    let mut entries: Vec<(BoundaryPoint, GroupElement)> = Vec::new();
    for (p, _, h) in raw {
        match entries.last() {
            Some((q, _)) if q.approx_eq(&p, 1e-12) => {}
            _ => entries.push((p, h)),
        }
    }
    // Put the base cusp first.
    if let Some(k) = entries.iter().position(|e| e.0.is_infinite()) {
        let base = entries.remove(k);
        entries.insert(0, base);
    }
    Ok(CuspData { entries, depth })
}

/// `𝒴_Γ(z)` truncated at word length `depth`; exactly 1 without cusps.
pub fn invariant_height(group: &FuchsianGroup, z: &PlanePoint, depth: usize) -> Result<f64, HeightError> {
    match cusp_orbit(group, depth) {
        Ok(data) => Ok(data.height(z)),
        Err(HeightError::NoCusp) => Ok(1.0),
        Err(e) => Err(e),
    }
}
