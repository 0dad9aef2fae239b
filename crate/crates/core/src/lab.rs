//! Experiment harness: configuration files, the four experiment runs, and
//! CSV/JSON output.
//!
//! Configuration is line based, `key = value`, with `#` comments. Group keys
//! (`example`, `pair`, `parabolic`, `depth_delta`) describe the circle
//! pairing; the remaining keys describe the experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conformal::{ball_mass, ps_density, ps_on_horocycle, s_set_mass, ConformalError, Window};
use crate::flow::{
    br_measure, horocycle_integral_between, translate_integral, BumpFunction, FlowError, QuadratureSpec, Weight,
};
use crate::fuchsian::{examples, linear_fit, DiskPair, FuchsianError, FuchsianGroup, PairedDisks};
use crate::quad::integrate;
use crate::spectral::{constants, phi_tilde, SpectralError, SpectralParams};
use crate::{GroupElement, Iwasawa};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numeric budget exhausted: {0}")]
    Budget(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl LabError {
    /// Process exit code: 2 for configuration and usage problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Io(_) => 2,
            LabError::Budget(_) | LabError::Numeric(_) => 3,
        }
    }
}

impl From<FuchsianError> for LabError {
    fn from(e: FuchsianError) -> Self {
        match e {
            FuchsianError::OverlappingDisks(_)
            | FuchsianError::BadPairing(_)
            | FuchsianError::NotReduced
            | FuchsianError::InvalidDepth { .. }
            | FuchsianError::Geometry(_) => LabError::Config(e.to_string()),
            FuchsianError::Budget { .. } => LabError::Budget(e.to_string()),
            _ => LabError::Numeric(e.to_string()),
        }
    }
}

impl From<ConformalError> for LabError {
    fn from(e: ConformalError) -> Self {
        match e {
            ConformalError::Group(g) => g.into(),
            ConformalError::InvalidDepth { .. } => LabError::Config(e.to_string()),
            _ => LabError::Numeric(e.to_string()),
        }
    }
}

impl From<FlowError> for LabError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Budget { .. } => LabError::Budget(e.to_string()),
            FlowError::InvalidBump(_) | FlowError::InvalidSpec(_) | FlowError::ChartViolation(_) => {
                LabError::Config(e.to_string())
            }
            FlowError::Group(g) => g.into(),
            FlowError::NotAtBaseI => LabError::Numeric(e.to_string()),
        }
    }
}

impl From<SpectralError> for LabError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Quadrature { .. } => LabError::Budget(e.to_string()),
            _ => LabError::Numeric(e.to_string()),
        }
    }
}

/// `(line number, key, value)` in file order.
pub type Entry = (usize, String, String);

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, LabError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(LabError::Config(format!("line {}: expected `key = value`, got `{line}`", k + 1)));
        };
        out.push((k + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<String, LabError> {
    std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("cannot read config {}: {e}", path.display())))
}

fn numbers<T: std::str::FromStr>(line: usize, key: &str, value: &str, count: Option<usize>) -> Result<Vec<T>, LabError> {
    let parsed: Result<Vec<T>, _> = value.split_whitespace().map(str::parse).collect();
    let v = parsed.map_err(|_| LabError::Config(format!("line {line}: cannot parse `{key} = {value}`")))?;
    if let Some(c) = count {
        if v.len() != c {
            return Err(LabError::Config(format!("line {line}: `{key}` takes {c} values, got {}", v.len())));
        }
    }
    Ok(v)
}

fn single<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, LabError> {
    Ok(numbers::<T>(line, key, value, Some(1))?.remove(0))
}

/// A circle pairing together with the depth used for `δ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupConfig {
    pub pairs: Vec<DiskPair>,
    pub depth_delta: usize,
}

pub const GROUP_KEYS: [&str; 4] = ["example", "pair", "parabolic", "depth_delta"];

/// Disks at `±0.5` of radius `0.49` and at `±51.01` of radius `50`, paired
/// across the origin: thin funnels, δ ≈ 0.87.
pub fn fat() -> PairedDisks {
    PairedDisks::new(vec![DiskPair::hyperbolic(-51.01, 50.0, 0.5, 0.49), DiskPair::hyperbolic(-0.5, 0.49, 51.01, 50.0)])
}

pub fn named_example(name: &str) -> Option<PairedDisks> {
    match name {
        "symmetric" => Some(examples::symmetric()),
        "wide" => Some(examples::wide()),
        "thin" => Some(examples::thin()),
        "cusped" => Some(examples::cusped()),
        "fat" => Some(fat()),
        _ => None,
    }
}

impl GroupConfig {
    pub fn example(name: &str) -> Self {
        Self { pairs: named_example(name).expect("known example").pairs, depth_delta: 10 }
    }

    /// Applies the group keys among `entries`; other keys are ignored. The
    /// first pairing key replaces the current pairs.
    pub fn apply(&mut self, entries: &[Entry]) -> Result<(), LabError> {
        let mut replaced = false;
        for (line, key, value) in entries {
            let mut fresh = |cfg: &mut Self| {
                if !replaced {
                    cfg.pairs.clear();
                    replaced = true;
                }
            };
            match key.as_str() {
                "example" => {
                    let p = named_example(value)
                        .ok_or_else(|| LabError::Config(format!("line {line}: unknown example `{value}`")))?;
                    fresh(self);
                    self.pairs.extend(p.pairs);
                }
                "pair" => {
                    let v = numbers::<f64>(*line, key, value, Some(4))?;
                    fresh(self);
                    self.pairs.push(DiskPair::hyperbolic(v[0], v[1], v[2], v[3]));
                }
                "parabolic" => {
                    let v = numbers::<f64>(*line, key, value, Some(2))?;
                    fresh(self);
                    self.pairs.push(DiskPair::parabolic(v[0], v[1]));
                }
                "depth_delta" => self.depth_delta = single(*line, key, value)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        let entries = parse_entries(text)?;
        let mut cfg = Self { pairs: Vec::new(), depth_delta: 10 };
        cfg.apply(&entries)?;
        if cfg.pairs.is_empty() {
            return Err(LabError::Config("no `pair`, `parabolic` or `example` line".into()));
        }
        Ok(cfg)
    }

    /// Canonical text: one line per pairing, numbers in shortest
    /// round-trip form.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for p in &self.pairs {
            if p.parabolic {
                let _ = writeln!(s, "parabolic = {:?} {:?}", p.source.0, p.target.0);
            } else {
                let _ = writeln!(s, "pair = {:?} {:?} {:?} {:?}", p.source.0, p.source.1, p.target.0, p.target.1);
            }
        }
        let _ = writeln!(s, "depth_delta = {}", self.depth_delta);
        s
    }

    /// SHA-256 of the canonical text.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn build(&self) -> Result<FuchsianGroup, LabError> {
        Ok(FuchsianGroup::build_with_depth(PairedDisks::new(self.pairs.clone()), self.depth_delta)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Phi,
    Thm1,
    Translate,
    Measures,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Phi => "phi",
            ExperimentKind::Thm1 => "thm1",
            ExperimentKind::Translate => "translate",
            ExperimentKind::Measures => "measures",
        }
    }

    pub fn header(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Phi => &["T", "average", "target", "abs_err"],
            ExperimentKind::Thm1 => &["T", "L1", "L2", "ratio", "br_ratio", "rel_err"],
            ExperimentKind::Translate => &["y", "value", "prefactor"],
            ExperimentKind::Measures => &["block", "x", "value"],
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        match s {
            "phi" => Ok(ExperimentKind::Phi),
            "thm1" => Ok(ExperimentKind::Thm1),
            "translate" => Ok(ExperimentKind::Translate),
            "measures" => Ok(ExperimentKind::Measures),
            _ => Err(LabError::Config(format!("unknown experiment `{s}` (phi | thm1 | translate | measures)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub group: GroupConfig,
    pub kind: ExperimentKind,
    pub grid: Vec<f64>,
    pub depth: usize,
    pub tol: f64,
    pub max_panels: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub n: i32,
    pub bumps: Vec<BumpFunction>,
    pub frame_word: Vec<u8>,
    pub frame_t: f64,
    pub weight: Weight,
}

/// `start · ratio^k` for `k < count`.
pub fn geometric(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

fn bump(x: f64, y: f64, theta: f64, r: (f64, f64, f64)) -> BumpFunction {
    BumpFunction::new(Iwasawa { x, y, theta }, r, 4, 1.0).expect("default bump")
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let half_pi = 0.5 * std::f64::consts::PI;
        let base = Self {
            group: GroupConfig::example("wide"),
            kind,
            grid: geometric(1000.0 / 128.0, 2.0, 8),
            depth: 10,
            tol: 1e-6,
            max_panels: 1_000_000,
            seed: 0,
            out: None,
            n: 0,
            bumps: vec![bump(-0.5, 2.5, half_pi, (0.45, 1.95, 1.5)), bump(0.5, 2.5, half_pi, (0.45, 1.95, 1.5))],
            frame_word: vec![0],
            frame_t: 0.0,
            weight: Weight { center: 0.0, half_width: 1.0, order: 4 },
        };
        match kind {
            ExperimentKind::Phi => base,
            ExperimentKind::Thm1 => Self { group: GroupConfig::example("fat"), depth: 12, ..base },
            ExperimentKind::Translate => Self {
                group: GroupConfig::example("thin"),
                grid: geometric(2f64.powi(-10), 2.0, 10),
                bumps: vec![BumpFunction::new(Iwasawa { x: 0.0, y: 2.6, theta: half_pi }, (1.4, 1.6, 1.5), 2, 1.0).expect("default bump")],
                ..base
            },
            ExperimentKind::Measures => Self {
                group: GroupConfig::example("symmetric"),
                grid: geometric(10.0, 10f64.powf(0.25), 13),
                depth: 12,
                ..base
            },
        }
    }

    /// Defaults for `kind` overridden by the text of a config file. A
    /// conflicting `experiment` key is an error.
    pub fn parse(text: &str, kind: Option<ExperimentKind>) -> Result<Self, LabError> {
        let entries = parse_entries(text)?;
        let from_file = entries.iter().find(|e| e.1 == "experiment").map(|e| e.2.parse::<ExperimentKind>()).transpose()?;
        let kind = match (kind, from_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(LabError::Config(format!("config says experiment = {}, command asks for {}", b.name(), a.name())))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(LabError::Config("no experiment kind given".into())),
        };
        let mut cfg = Self::defaults(kind);
        cfg.group.apply(&entries)?;
        let mut bumps_replaced = false;
        for (line, key, value) in &entries {
            match key.as_str() {
                k if GROUP_KEYS.contains(&k) || k == "experiment" => {}
                "grid" => cfg.grid = numbers(*line, key, value, None)?,
                "grid_geometric" => {
                    let v = numbers::<f64>(*line, key, value, Some(3))?;
                    if v[2] < 1.0 || v[2].fract() != 0.0 {
                        return Err(LabError::Config(format!("line {line}: grid_geometric count must be a positive integer")));
                    }
                    cfg.grid = geometric(v[0], v[1], v[2] as usize);
                }
                "depth" => cfg.depth = single(*line, key, value)?,
                "tol" => cfg.tol = single(*line, key, value)?,
                "max_panels" => cfg.max_panels = single(*line, key, value)?,
                "seed" => cfg.seed = single(*line, key, value)?,
                "out" => cfg.out = Some(PathBuf::from(value)),
                "n" => cfg.n = single(*line, key, value)?,
                "bump" => {
                    let v = numbers::<f64>(*line, key, value, Some(8))?;
                    if v[6] < 0.0 || v[6].fract() != 0.0 {
                        return Err(LabError::Config(format!("line {line}: bump order must be a non-negative integer")));
                    }
                    let b = BumpFunction::new(Iwasawa { x: v[0], y: v[1], theta: v[2] }, (v[3], v[4], v[5]), v[6] as u32, v[7])
                        .map_err(|e| LabError::Config(format!("line {line}: {e}")))?;
                    if !bumps_replaced {
                        cfg.bumps.clear();
                        bumps_replaced = true;
                    }
                    cfg.bumps.push(b);
                }
                "frame_word" => cfg.frame_word = numbers(*line, key, value, None)?,
                "frame_t" => cfg.frame_t = single(*line, key, value)?,
                "weight" => {
                    let v = numbers::<f64>(*line, key, value, Some(3))?;
                    if !(v[1] > 0.0) || v[2] < 0.0 || v[2].fract() != 0.0 {
                        return Err(LabError::Config(format!("line {line}: weight needs half_width > 0 and integer order")));
                    }
                    cfg.weight = Weight { center: v[0], half_width: v[1], order: v[2] as u32 };
                }
                _ => return Err(LabError::Config(format!("line {line}: unknown key `{key}`"))),
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if self.grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad(format!("grid values must be positive: {:?}", self.grid));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("grid must be strictly increasing: {:?}", self.grid));
        }
        if self.kind == ExperimentKind::Translate && self.grid.iter().any(|y| *y > 1.0) {
            return bad("translate grid values must lie in (0, 1]".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_panels == 0 {
            return bad("max_panels must be positive".into());
        }
        if self.frame_word.is_empty() {
            return bad("frame_word must name a hyperbolic word".into());
        }
        match self.kind {
            ExperimentKind::Thm1 if self.bumps.len() < 2 => bad("thm1 needs two bumps".into()),
            ExperimentKind::Translate if self.bumps.is_empty() => bad("translate needs a bump".into()),
            _ => Ok(()),
        }
    }

    /// Every key with its value, in a fixed order; parsing the result gives
    /// back an identical config.
    pub fn canonical(&self) -> String {
        let mut s = format!("experiment = {}\n", self.kind.name());
        s.push_str(&self.group.canonical());
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "grid = {}", list(&self.grid));
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "max_panels = {}", self.max_panels);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n = {}", self.n);
        for b in &self.bumps {
            let c = b.center;
            let (rx, ry, rt) = b.radii;
            let _ = writeln!(s, "bump = {:?} {:?} {:?} {:?} {:?} {:?} {} {:?}", c.x, c.y, c.theta, rx, ry, rt, b.order, b.amplitude);
        }
        let w = self.frame_word.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "frame_word = {w}");
        let _ = writeln!(s, "frame_t = {:?}", self.frame_t);
        let _ = writeln!(s, "weight = {:?} {:?} {}", self.weight.center, self.weight.half_width, self.weight.order);
        if let Some(p) = &self.out {
            let _ = writeln!(s, "out = {}", p.display());
        }
        s
    }

    fn quad(&self) -> QuadratureSpec {
        QuadratureSpec { abs_tol: self.tol, max_panels: self.max_panels }
    }
}

/// Rows of one experiment plus its summary. Numbers are stored in shortest
/// round-trip form so that a re-read CSV reproduces them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: ExperimentKind,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub delta: f64,
    pub depth: usize,
}

fn num(v: f64) -> String {
    format!("{v}")
}

impl Table {
    fn new(kind: ExperimentKind, delta: f64, depth: usize) -> Self {
        Self { kind, rows: Vec::new(), summary: Vec::new(), notes: Vec::new(), delta, depth }
    }

    fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row.into_iter().map(num).collect());
    }

    fn set(&mut self, key: &str, v: f64) {
        self.summary.push((key.to_string(), num(v)));
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.0 == key).and_then(|s| s.1.parse().ok())
    }

    /// Numeric column `name` (rows whose cell does not parse are skipped).
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(k) = self.kind.header().iter().position(|h| *h == name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r[k].parse().ok()).collect()
    }
}

/// Least squares slope of `log y` against `log x`, with its rms residual.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let (slope, _, rms) = linear_fit(&pts);
    Some((slope, rms))
}

fn radial(group: &FuchsianGroup, cfg: &ExperimentConfig) -> Result<GroupElement, LabError> {
    let w = group.word(&cfg.frame_word).map_err(|e| LabError::Config(format!("frame_word: {e}")))?;
    group.radial_frame(&w, cfg.frame_t).map_err(|e| LabError::Config(format!("frame_word: {e}")))
}

/// Segments `[0, T₁], [T₁, T₂], …` and their mirror images; the integral
/// over `[−T_k, T_k]` is the sum of the first `k` of each.
fn segments(grid: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * grid.len());
    let mut prev = 0.0;
    for &t in grid {
        out.push((prev, t));
        out.push((-t, -prev));
        prev = t;
    }
    out
}

/// Cumulative sums of per-segment results; `None` once a segment failed.
fn cumulative<T: Copy + std::ops::Add<Output = T>>(parts: &[Option<T>], zero: T) -> Vec<Option<T>> {
    let mut acc = Some(zero);
    parts
        .chunks(2)
        .map(|c| {
            acc = match (acc, c[0], c[1]) {
                (Some(a), Some(p), Some(q)) => Some(a + p + q),
                _ => None,
            };
            acc
        })
        .collect()
}

/// Horocycle average of `φ̃ₙ` against `μ^PS(B_T)`, compared with `cₙκₙ`.
pub fn run_phi(cfg: &ExperimentConfig) -> Result<Table, LabError> {
    let group = cfg.group.build()?;
    let delta = group.delta();
    let nu = ps_density(&group, cfg.depth, 0.0)?;
    let g = radial(&group, cfg)?;
    let mu = ps_on_horocycle(&nu, &g)?;
    let p = SpectralParams::new(delta, cfg.n).map_err(|e| LabError::Config(e.to_string()))?;
    let (c, k) = constants(&p)?;
    let target = c * k;
    let tmax = *cfg.grid.last().expect("grid checked");
    let segs = segments(&cfg.grid);
    let parts: Vec<Result<Complex64, LabError>> = segs
        .par_iter()
        .map(|&(a, b)| {
            let initial = ((b - a).ceil() as usize).max(1);
            let tol = cfg.tol * (b - a) / (2.0 * tmax);
            let r = integrate(
                |t| match phi_tilde(&p, &(g * GroupElement::n(t)), &nu) {
                    Ok(v) => [v.value.re, v.value.im],
                    Err(_) => [f64::NAN, f64::NAN],
                },
                a,
                b,
                tol,
                initial,
                initial + cfg.max_panels,
            )
            .map_err(|e| LabError::Budget(format!("phi integral on [{a}, {b}]: error estimate {}", e.error)))?;
            if r.value.iter().any(|v| !v.is_finite()) {
                return Err(LabError::Numeric(format!("phi integral on [{a}, {b}] is not finite")));
            }
            Ok(Complex64::new(r.value[0], r.value[1]))
        })
        .collect();
    let mut table = Table::new(ExperimentKind::Phi, delta, cfg.depth);
    for (s, r) in segs.iter().zip(&parts) {
        if let Err(e) = r {
            table.notes.push(format!("segment [{}, {}] failed: {e}", s.0, s.1));
        }
    }
    let opts: Vec<Option<Complex64>> = parts.iter().map(|r| r.as_ref().ok().copied()).collect();
    let sums = cumulative(&opts, Complex64::new(0.0, 0.0));
    for (&t, s) in cfg.grid.iter().zip(&sums) {
        let Some(s) = s else {
            table.notes.push(format!("row T = {t} dropped after a failed segment"));
            continue;
        };
        let m = ball_mass(&mu, t, Window::Ball)?;
        if m <= 0.0 {
            table.notes.push(format!("row T = {t} dropped: no PS mass in the ball"));
            continue;
        }
        let avg = s / m;
        table.push(vec![t, avg.re, target, (avg - target).norm()]);
    }
    if table.rows.is_empty() {
        return Err(LabError::Budget(format!("every phi row failed; first note: {}", table.notes.first().map_or("none", |n| n.as_str()))));
    }
    if let Some((slope, res)) = loglog_fit(&table.column("T"), &table.column("abs_err")) {
        table.set("slope", slope);
        table.set("residual", res);
    }
    table.set("expected_slope", 0.5 - delta);
    let last = table.column("abs_err").last().copied().unwrap_or(f64::NAN);
    table.set("final_rel_err", last / target.abs());
    table.set("skipped_atoms", mu.skipped() as f64);
    Ok(table)
}

fn tail_average(v: &[f64]) -> f64 {
    let k = v.len().min(3);
    v[v.len() - k..].iter().sum::<f64>() / k as f64
}

/// Normalized horocycle averages of two bumps and their ratio against the
/// ratio of Burger-Roblin masses.
pub fn run_thm1(cfg: &ExperimentConfig) -> Result<Table, LabError> {
    let group = cfg.group.build()?;
    let delta = group.delta();
    let (f1, f2) = (&cfg.bumps[0], &cfg.bumps[1]);
    for (k, f) in [f1, f2].iter().enumerate() {
        f.validate(&group).map_err(|e| LabError::Config(format!("bump {}: {e}", k + 1)))?;
    }
    let nu = ps_density(&group, cfg.depth, 0.0)?;
    let g = radial(&group, cfg)?;
    let mu = ps_on_horocycle(&nu, &g)?;
    let q = cfg.quad();
    let br_q = q;
    let brs: Vec<Result<f64, LabError>> =
        [f1, f2].par_iter().map(|f| Ok(br_measure(*f, &nu, &br_q)?.value[0])).collect();
    let (b1, b2) = (brs[0].as_ref().map_err(clone_err)?, brs[1].as_ref().map_err(clone_err)?);
    if !(*b2 > 0.0) {
        return Err(LabError::Numeric("second bump has zero Burger-Roblin mass".into()));
    }
    let br_ratio = b1 / b2;
    let segs = segments(&cfg.grid);
    let jobs: Vec<(usize, (f64, f64))> = (0..2).flat_map(|k| segs.iter().map(move |s| (k, *s))).collect();
    let tmax = *cfg.grid.last().expect("grid checked");
    let parts: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(k, (a, b))| {
            let f = if k == 0 { f1 } else { f2 };
            let qs = QuadratureSpec { abs_tol: cfg.tol * (b - a) / (2.0 * tmax), ..q };
            horocycle_integral_between(&group, f, &g, (a, b), &qs).ok().map(|r| r.value[0])
        })
        .collect();
    let (p1, p2) = parts.split_at(segs.len());
    let (s1, s2) = (cumulative(p1, 0.0), cumulative(p2, 0.0));
    let mut table = Table::new(ExperimentKind::Thm1, delta, cfg.depth);
    for (k, &t) in cfg.grid.iter().enumerate() {
        let (Some(i1), Some(i2)) = (s1[k], s2[k]) else {
            table.notes.push(format!("row T = {t} dropped after a failed segment"));
            continue;
        };
        let m = ball_mass(&mu, t, Window::Ball)?;
        if m <= 0.0 || i2 <= 0.0 {
            table.notes.push(format!("row T = {t} dropped: empty ball or zero second integral"));
            continue;
        }
        let ratio = i1 / i2;
        table.push(vec![t, i1 / m, i2 / m, ratio, br_ratio, (ratio / br_ratio - 1.0).abs()]);
    }
    if table.rows.is_empty() {
        return Err(LabError::Budget(format!("every thm1 row failed; first note: {}", table.notes.first().map_or("none", |n| n.as_str()))));
    }
    let (l1, l2) = (tail_average(&table.column("L1")), tail_average(&table.column("L2")));
    table.set("br1", *b1);
    table.set("br2", *b2);
    table.set("limit_L1", l1);
    table.set("limit_L2", l2);
    table.set("limit_ratio", l1 / l2);
    table.set("br_ratio", br_ratio);
    table.set("limit_rel_err", (l1 / l2 / br_ratio - 1.0).abs());
    if let Some((slope, res)) = loglog_fit(&table.column("T"), &table.column("rel_err")) {
        table.set("slope", slope);
        table.set("residual", res);
    }
    table.set("expected_slope", 0.5 - delta);
    Ok(table)
}

fn clone_err(e: &LabError) -> LabError {
    match e {
        LabError::Config(s) => LabError::Config(s.clone()),
        LabError::Io(s) => LabError::Io(s.clone()),
        LabError::Budget(s) => LabError::Budget(s.clone()),
        LabError::Numeric(s) => LabError::Numeric(s.clone()),
    }
}

/// `∫ f(Γ g n_t a_y) φ(t) dt` over the `y` grid, with the prefactor
/// diagnostic `value / (y^{1−δ} m^BR(f) μ^PS(φ))`.
pub fn run_translate(cfg: &ExperimentConfig) -> Result<Table, LabError> {
    let group = cfg.group.build()?;
    let delta = group.delta();
    let f = &cfg.bumps[0];
    f.validate(&group).map_err(|e| LabError::Config(format!("bump 1: {e}")))?;
    let nu = ps_density(&group, cfg.depth, 0.0)?;
    let g = radial(&group, cfg)?;
    let mu = ps_on_horocycle(&nu, &g)?;
    let w = cfg.weight;
    let mu_phi = mu.integrate(|t| w.value(t));
    let q = cfg.quad();
    let br = br_measure(f, &nu, &q)?.value[0];
    let rows: Vec<Result<f64, LabError>> = cfg
        .grid
        .par_iter()
        .map(|&y| Ok(translate_integral(&group, f, &g, y, |t| w.value(t), w.support(), &q)?.value[0]))
        .collect();
    let mut table = Table::new(ExperimentKind::Translate, delta, cfg.depth);
    for (&y, r) in cfg.grid.iter().zip(rows) {
        match r {
            Ok(v) => table.push(vec![y, v, v / (y.powf(1.0 - delta) * br * mu_phi)]),
            Err(e) => table.notes.push(format!("row y = {y} failed: {e}")),
        }
    }
    if table.rows.is_empty() {
        return Err(LabError::Budget(format!("every translate row failed; first note: {}", table.notes.first().map_or("none", |n| n.as_str()))));
    }
    if let Some((slope, res)) = loglog_fit(&table.column("y"), &table.column("value")) {
        table.set("slope", slope);
        table.set("residual", res);
    }
    table.set("expected_slope", 1.0 - delta);
    let pre = table.column("prefactor");
    let mean = pre.iter().sum::<f64>() / pre.len() as f64;
    let spread = (pre.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - pre.iter().cloned().fold(f64::INFINITY, f64::min)) / mean;
    table.set("br", br);
    table.set("mu_phi", mu_phi);
    table.set("prefactor_spread", spread);
    Ok(table)
}

/// Ball masses, tails, shadows and annuli for the horocycle measure.
pub fn run_measures(cfg: &ExperimentConfig) -> Result<Table, LabError> {
    let group = cfg.group.build()?;
    let delta = group.delta();
    let nu = ps_density(&group, cfg.depth, 0.0)?;
    let g = radial(&group, cfg)?;
    let mu = ps_on_horocycle(&nu, &g)?;
    let mut table = Table::new(ExperimentKind::Measures, delta, cfg.depth);
    let row = |block: &str, x: f64, v: f64| vec![block.to_string(), num(x), num(v)];
    let mut balls = Vec::new();
    let mut worst_partition: f64 = 0.0;
    for &t in &cfg.grid {
        let b = ball_mass(&mu, t, Window::Ball)?;
        let tail = ball_mass(&mu, t, Window::Tail)?;
        worst_partition = worst_partition.max((b + tail - mu.total_mass()).abs());
        balls.push(b);
        table.rows.push(row("ball", t, b));
    }
    for &t in &cfg.grid {
        table.rows.push(row("tail", t, ball_mass(&mu, t, Window::Tail)? * t.powf(delta)));
    }
    let eta = group.attracting_point(cfg.frame_word[0]);
    let mut shadows = Vec::new();
    for k in 0..=16 {
        let t = 0.5 * k as f64;
        let v = s_set_mass(&eta, t, &nu) * (delta * t).exp();
        shadows.push(v);
        table.rows.push(row("shadow", t, v));
    }
    let tmax = *cfg.grid.last().expect("grid checked");
    if tmax >= 2.0 {
        for k in 1..=5 {
            let eps = 0.5f64.powi(k);
            table.rows.push(row("annulus", eps, ball_mass(&mu, tmax, Window::Annulus(eps))?));
        }
    }
    if let Some((slope, res)) = loglog_fit(&cfg.grid, &balls) {
        table.set("ball_slope", slope);
        table.set("residual", res);
    }
    let hi = shadows.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = shadows.iter().cloned().fold(f64::INFINITY, f64::min);
    table.set("shadow_range", hi / lo);
    table.set("partition_max_dev", worst_partition);
    table.set("total_mass", mu.total_mass());
    Ok(table)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Table, LabError> {
    match cfg.kind {
        ExperimentKind::Phi => run_phi(cfg),
        ExperimentKind::Thm1 => run_thm1(cfg),
        ExperimentKind::Translate => run_translate(cfg),
        ExperimentKind::Measures => run_measures(cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(LabError::Config(format!("unknown format `{s}` (csv | json)"))),
        }
    }
}

fn timestamp() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Metadata shared by every output: `(key, value)` pairs in a fixed order.
pub fn metadata(cfg: &ExperimentConfig, table: &Table) -> Vec<(String, String)> {
    let mut m = vec![
        ("experiment".to_string(), cfg.kind.name().to_string()),
        ("fingerprint".to_string(), cfg.group.fingerprint()),
        ("delta".to_string(), num(table.delta)),
        ("depth".to_string(), table.depth.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("version".to_string(), VERSION.to_string()),
        ("timestamp".to_string(), timestamp().to_string()),
    ];
    m.extend(table.summary.iter().cloned());
    m
}

/// CSV text: `#` metadata lines (including the echoed config), then the
/// header and rows.
pub fn to_csv(cfg: &ExperimentConfig, table: &Table) -> Result<String, LabError> {
    let mut s = String::new();
    for (k, v) in metadata(cfg, table) {
        let _ = writeln!(s, "# {k}: {v}");
    }
    for line in cfg.canonical().lines() {
        let _ = writeln!(s, "# config: {line}");
    }
    for n in &table.notes {
        let _ = writeln!(s, "# note: {n}");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.kind.header()).map_err(|e| LabError::Io(e.to_string()))?;
    for r in &table.rows {
        w.write_record(r).map_err(|e| LabError::Io(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
    s.push_str(&String::from_utf8(body).map_err(|e| LabError::Io(e.to_string()))?);
    Ok(s)
}

pub fn to_json(cfg: &ExperimentConfig, table: &Table) -> String {
    let meta: BTreeMap<String, String> = metadata(cfg, table).into_iter().collect();
    let v = serde_json::json!({
        "metadata": meta,
        "config": cfg.canonical(),
        "notes": table.notes,
        "header": table.kind.header(),
        "rows": table.rows,
    });
    serde_json::to_string_pretty(&v).expect("json value serializes")
}

/// Lines of a CSV text that are not `#` metadata.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

/// Parses `# key: value` metadata lines.
pub fn csv_metadata(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn write_output(path: &Path, text: &str) -> Result<(), LabError> {
    std::fs::write(path, text).map_err(|e| LabError::Io(format!("cannot write {}: {e}", path.display())))
}

/// `point,weight` rows of `ν_i` plus a JSON summary.
pub fn ps_measure_csv(group_cfg: &GroupConfig, depth: usize, seed: u64) -> Result<(String, String), LabError> {
    let group = group_cfg.build()?;
    let nu = ps_density(&group, depth, 0.0)?;
    let mut s = String::new();
    let _ = writeln!(s, "# fingerprint: {}", group_cfg.fingerprint());
    let _ = writeln!(s, "# delta: {}", num(group.delta()));
    let _ = writeln!(s, "# depth: {depth}");
    let _ = writeln!(s, "# seed: {seed}");
    let _ = writeln!(s, "# version: {VERSION}");
    let _ = writeln!(s, "# timestamp: {}", timestamp());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["point", "weight"]).map_err(|e| LabError::Io(e.to_string()))?;
    for (u, wt) in nu.atoms() {
        let p = u.finite().map_or_else(|| "inf".to_string(), num);
        w.write_record([p, num(*wt)]).map_err(|e| LabError::Io(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
    s.push_str(&String::from_utf8(body).map_err(|e| LabError::Io(e.to_string()))?);
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "total_mass": nu.total_mass(),
        "depth": depth,
        "delta": group.delta(),
        "atoms": nu.len(),
        "fingerprint": group_cfg.fingerprint(),
    }))
    .expect("json value serializes");
    Ok((s, json))
}

/// Caps the global rayon pool at `HOROLAB_THREADS` when it is set.
pub fn init_threads() -> Result<(), LabError> {
    if let Ok(v) = std::env::var("HOROLAB_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| LabError::Config(format!("HOROLAB_THREADS must be an integer, got `{v}`")))?;
        if n > 0 {
            // A second call finds the pool already built; that is fine.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    Ok(())
}

/// The cheap plumbing checks behind `horolab selftest`.
pub fn selftest() -> Vec<(&'static str, bool)> {
    use crate::moebius::{hyp_dist, iwasawa, iwasawa_compose, Decomposition};
    use crate::PlanePoint;
    let mut out = Vec::new();
    let g = GroupElement::n(0.3) * GroupElement::a(2.0) * GroupElement::k(0.7);
    let back = iwasawa_compose(&iwasawa(&g, Decomposition::Nak), Decomposition::Nak);
    out.push(("iwasawa round trip", back.distance_to(&g) < 1e-12));
    let z = PlanePoint::new(0.2, 0.5).expect("valid point");
    out.push(("distance is isometry invariant", (hyp_dist(&g.act_plane(&z), &g.act_plane(&PlanePoint::i())) - hyp_dist(&z, &PlanePoint::i())).abs() < 1e-12));
    let k0 = SpectralParams::new(0.75, 0).and_then(|p| constants(&p)).map(|c| c.1);
    out.push(("kappa_0(3/4)", k0.map_or(false, |k| (k - 5.244115108584239).abs() < 1e-12)));
    let b = bump(0.0, 1.0, 1.0, (0.1, 0.1, 0.1));
    out.push(("bump peak", crate::flow::TestFunction::value(&b, &b.center_element()) == 1.0));
    let cfg = ExperimentConfig::defaults(ExperimentKind::Phi);
    out.push(("config echo round trip", ExperimentConfig::parse(&cfg.canonical(), None).map_or(false, |c| c == cfg)));
    let wide = GroupConfig::example("wide").build();
    out.push(("wide group builds", wide.as_ref().map_or(false, |g| (g.delta() - 0.69).abs() < 0.05)));
    out.push(("geometric grid", geometric(1.0, 2.0, 4) == vec![1.0, 2.0, 4.0, 8.0]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        for kind in [ExperimentKind::Phi, ExperimentKind::Thm1, ExperimentKind::Translate, ExperimentKind::Measures] {
            let cfg = ExperimentConfig::defaults(kind);
            let again = ExperimentConfig::parse(&cfg.canonical(), None).unwrap();
            assert_eq!(again, cfg);
            assert_eq!(again.canonical(), cfg.canonical());
        }
        let text = "experiment = thm1\npair = -1.5 0.5 1.5 0.5 # comment\npair = -4.5 0.5 4.5 0.5\ngrid = 1 2 4\n\
                    bump = 0.1 1.1 0.3 0.05 0.1 0.2 4 2.5\nbump = 0.1 2 0.3 0.05 0.1 0.2 4 1\nout = r.csv\ntol = 1e-9\n";
        let cfg = ExperimentConfig::parse(text, None).unwrap();
        assert_eq!(cfg.group.pairs.len(), 2);
        assert_eq!(cfg.bumps.len(), 2);
        assert_eq!(cfg.bumps[0].amplitude, 2.5);
        assert_eq!(cfg.tol, 1e-9);
        assert_eq!(ExperimentConfig::parse(&cfg.canonical(), None).unwrap(), cfg);
    }

    #[test]
    fn config_errors() {
        let cases = [
            "experiment = phi\ngrid = 2 1\n",
            "experiment = phi\ngrid = 1 -2\n",
            "experiment = phi\nbogus = 1\n",
            "experiment = phi\npair = 1 2 3\n",
            "experiment = nope\n",
            "experiment = phi\nthis line has no equals sign\n",
            "experiment = thm1\nbump = 0 1 0 0.1 0.1 0.1 4 1\n",
            "experiment = translate\ngrid = 0.5 2\n",
        ];
        for c in cases {
            let e = ExperimentConfig::parse(c, None).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{c}: {e}");
        }
        assert!(ExperimentConfig::parse("experiment = phi\n", Some(ExperimentKind::Thm1)).is_err());
        assert!(ExperimentConfig::parse("depth = 3\n", None).is_err());
    }

    #[test]
    fn fingerprint_tracks_the_group_only() {
        let a = ExperimentConfig::defaults(ExperimentKind::Phi);
        let mut b = a.clone();
        b.seed = 99;
        b.grid = vec![1.0, 2.0];
        assert_eq!(a.group.fingerprint(), b.group.fingerprint());
        b.group.depth_delta = 9;
        assert_ne!(a.group.fingerprint(), b.group.fingerprint());
        assert_eq!(a.group.fingerprint().len(), 64);
        let from_text = GroupConfig::parse(&GroupConfig::example("wide").canonical()).unwrap();
        assert_eq!(from_text, GroupConfig::example("wide"));
        assert_eq!(GroupConfig::parse("example = wide\n").unwrap().fingerprint(), a.group.fingerprint());
    }

    #[test]
    fn fit_recovers_power_law() {
        let x: Vec<f64> = geometric(1.0, 2.0, 10);
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t.powf(-0.37)).collect();
        let (s, r) = loglog_fit(&x, &y).unwrap();
        assert!((s + 0.37).abs() < 1e-12 && r < 1e-12);
        assert!(loglog_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn segment_bookkeeping() {
        let segs = segments(&[1.0, 3.0]);
        assert_eq!(segs, vec![(0.0, 1.0), (-1.0, 0.0), (1.0, 3.0), (-3.0, -1.0)]);
        let sums = cumulative(&[Some(1.0), Some(2.0), Some(3.0), None], 0.0);
        assert_eq!(sums, vec![Some(3.0), None]);
    }

    #[test]
    fn measures_rows_and_partition() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Measures);
        cfg.depth = 6;
        cfg.grid = geometric(10.0, 10.0, 3);
        let t = run_measures(&cfg).unwrap();
        assert!(t.summary_value("partition_max_dev").unwrap() < 1e-12);
        let blocks: Vec<&str> = t.rows.iter().map(|r| r[0].as_str()).collect();
        for b in ["ball", "tail", "shadow", "annulus"] {
            assert!(blocks.contains(&b), "{b}");
        }
        let csv = to_csv(&cfg, &t).unwrap();
        assert!(csv_body(&csv).starts_with("block,x,value\n"));
        let meta = csv_metadata(&csv);
        assert!(meta.iter().any(|(k, _)| k == "fingerprint"));
    }

    #[test]
    fn thm1_identical_bumps_give_ratio_one() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Thm1);
        cfg.depth = 5;
        cfg.tol = 1e-4;
        cfg.grid = vec![4.0, 8.0, 16.0];
        cfg.bumps[1] = cfg.bumps[0];
        let t = run_thm1(&cfg).unwrap();
        for r in t.column("ratio") {
            assert_eq!(r, 1.0);
        }
        cfg.bumps[1] = cfg.bumps[0].scaled(1.0 / 3.0);
        let t = run_thm1(&cfg).unwrap();
        for r in t.column("ratio") {
            assert!((r - 3.0).abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn selftest_passes() {
        for (name, ok) in selftest() {
            assert!(ok, "{name}");
        }
    }
}
