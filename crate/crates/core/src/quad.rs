//! Adaptive Gauss-Kronrod quadrature.
//!
//! Global bisection: the panel with the largest error estimate is split until
//! the summed estimate drops below the tolerance or the panel budget runs
//! out. The order of operations depends only on the inputs, so results are
//! reproducible bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("quadrature budget exhausted: partial value {value:?}, error estimate {error}")]
pub struct QuadError<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub panels: usize,
}

#[derive(Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
pub fn gk15<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let fc = f(c);
    for j in 0..N {
        k[j] = WGK[7] * fc[j];
        g[j] = WG[3] * fc[j];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for j in 0..N {
            let s = f1[j] + f2[j];
            k[j] += WGK[i] * s;
            if i % 2 == 1 {
                g[j] += WG[i / 2] * s;
            }
        }
    }
    let mut err = 0.0f64;
    for j in 0..N {
        k[j] *= h;
        g[j] *= h;
        err = err.max((k[j] - g[j]).abs());
    }
    (k, err)
}

/// Integrates a vector-valued function over `[a, b]`, starting from
/// `initial` equal panels. The error is the max-norm of the summed
/// Kronrod-Gauss differences.
pub fn integrate<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    initial: usize,
    max_panels: usize,
) -> Result<Quad<N>, QuadError<N>> {
    if a == b {
        return Ok(Quad { value: [0.0; N], error: 0.0, panels: 0 });
    }
    let initial = initial.max(1);
    let mut heap = BinaryHeap::with_capacity(initial * 2);
    let width = (b - a) / initial as f64;
    for i in 0..initial {
        let lo = a + width * i as f64;
        let hi = if i + 1 == initial { b } else { a + width * (i + 1) as f64 };
        let (value, error) = gk15(&mut f, lo, hi);
        heap.push(Panel { a: lo, b: hi, value, error });
    }
    let total_error = |h: &BinaryHeap<Panel<N>>| h.iter().map(|p| p.error).sum::<f64>();
    let mut err = total_error(&heap);
    while err > abs_tol {
        if heap.len() >= max_panels.max(initial) {
            let (value, error) = summarize(heap);
            return Err(QuadError { value, error });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            let (value, error) = summarize(heap);
            return Err(QuadError { value, error });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        err = err - worst.error + e1 + e2;
        if err <= abs_tol {
            err = total_error(&heap);
        }
    }
    let panels = heap.len();
    let (value, error) = summarize(heap);
    Ok(Quad { value, error, panels })
}

/// Sums panels in order of position so the result does not depend on how
/// the heap happened to be arranged.
fn summarize<const N: usize>(heap: BinaryHeap<Panel<N>>) -> ([f64; N], f64) {
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = [0.0; N];
    let mut error = 0.0;
    for p in &panels {
        for j in 0..N {
            value[j] += p.value[j];
        }
        error += p.error;
    }
    (value, error)
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    initial: usize,
    max_panels: usize,
) -> Result<Quad<1>, QuadError<1>> {
    integrate(|x| [f(x)], a, b, abs_tol, initial, max_panels)
}

/// Iterated integral over a rectangle: adaptive in `x`, and for every outer
/// node an adaptive inner integral in `y`. An inner budget failure keeps its
/// partial value; the outer error estimate then understates the true error.
pub fn integrate_rect<F: FnMut(f64, f64) -> f64>(
    f: F,
    xr: (f64, f64),
    yr: (f64, f64),
    abs_tol: f64,
    max_panels: usize,
) -> Result<Quad<1>, QuadError<1>> {
    integrate_rect_panels(f, xr, yr, abs_tol, (1, 1), max_panels)
}

/// [`integrate_rect`] starting from `initial.0` outer and `initial.1` inner
/// panels, for integrands whose support is a small part of the rectangle.
pub fn integrate_rect_panels<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    abs_tol: f64,
    (nx, ny): (usize, usize),
    max_panels: usize,
) -> Result<Quad<1>, QuadError<1>> {
    let inner_tol = 0.25 * abs_tol / (bx - ax).abs().max(f64::MIN_POSITIVE);
    integrate_scalar(
        |x| match integrate_scalar(|y| f(x, y), ay, by, inner_tol, ny, max_panels) {
            Ok(q) => q.value[0],
            Err(e) => e.value[0],
        },
        ax,
        bx,
        0.5 * abs_tol,
        nx,
        max_panels,
    )
}
