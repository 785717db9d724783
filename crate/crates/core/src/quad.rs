//! Adaptive Gauss-Kronrod quadrature.
//!
//! [`integrate`] is a global-subdivision (QAG-style) integrator on a finite
//! interval using the 7/15-point Gauss-Kronrod pair. [`integrate_radial`]
//! covers `(0, inf)` with decade panels around a characteristic scale: the
//! panels shrinking towards the origin act as a logarithmic substitution,
//! which keeps integrable power singularities cheap and exposes
//! non-integrable ones through the ratio of consecutive panel integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    /// Integral of `|f|`, used to set absolute tolerances downstream.
    pub abs_value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let raw = ((kronrod - gauss) * half).abs();
    // QUADPACK-style error rescaling, floored at roundoff level.
    let error = if raw > 0.0 {
        let scaled = (200.0 * raw / (abs_k * half.abs()).max(f64::MIN_POSITIVE)).powf(1.5);
        (abs_k * half.abs() * scaled.min(1.0)).max(50.0 * f64::EPSILON * abs_k * half.abs())
    } else {
        50.0 * f64::EPSILON * abs_k * half.abs()
    };
    Segment {
        a,
        b,
        value,
        error,
        abs_value: abs_k * half.abs(),
    }
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol * |I|)`
/// or `max_segments` subdivisions have been made.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            abs_error: 0.0,
            abs_value: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let first = gk15(&f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    let mut converged = error <= abs_tol.max(rel_tol * value.abs());
    while !converged && heap.len() < max_segments {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        converged = error <= abs_tol.max(rel_tol * value.abs());
    }
    // re-sum to shed accumulated cancellation from the running updates
    let mut value = 0.0;
    let mut error = 0.0;
    let mut abs_value = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
        abs_value += s.abs_value;
    }
    QuadResult {
        value,
        abs_error: error,
        abs_value,
        converged: converged || error <= abs_tol.max(rel_tol * value.abs()),
        evaluations,
    }
}

/// Options for [`integrate_radial`].
#[derive(Debug, Clone)]
pub struct RadialOptions {
    /// Characteristic length of the integrand; decades are laid out around it.
    pub scale: f64,
    pub rel_tol: f64,
    /// Inner decades examined below `scale` before extrapolating the rest.
    pub inner_decades: usize,
    /// Outer decades examined above `scale`.
    pub outer_decades: usize,
    /// Points where the integrand is not smooth (panel edges are forced there).
    pub breakpoints: Vec<f64>,
    /// Ratio above which consecutive inner panels are deemed non-convergent.
    pub divergence_ratio: f64,
    /// Number of consecutive ratios that must exceed `divergence_ratio`.
    pub divergence_window: usize,
    pub max_segments: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            rel_tol: 1e-12,
            inner_decades: 14,
            outer_decades: 4,
            breakpoints: Vec::new(),
            divergence_ratio: 0.9,
            divergence_window: 4,
            max_segments: 400,
        }
    }
}

impl RadialOptions {
    pub fn with_scale(scale: f64) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialIntegral {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
    /// Set when the inner panel integrals fail the ratio test, i.e. the
    /// integral is (numerically) divergent at the origin.
    pub diverges_at_origin: bool,
    /// Estimated contribution of `(0, r_innermost)`, already included in `value`.
    pub origin_tail: f64,
    pub inner_ratios: Vec<f64>,
}

fn split_at_breakpoints(a: f64, b: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for c in cuts {
        out.push((lo, c));
        lo = c;
    }
    out.push((lo, b));
    out
}

/// Integrates `f` over `(0, inf)`.
///
/// The integrand is expected to behave like a power of `r` near the origin
/// and to decay at least exponentially beyond a few hundred `scale`s.
pub fn integrate_radial<F: Fn(f64) -> f64>(f: F, opts: &RadialOptions) -> RadialIntegral {
    let s = opts.scale;
    let mut panels: Vec<(f64, f64)> = Vec::new();
    // panel 0 is [s/10, s]; inner panels follow in decreasing order
    for j in 0..opts.inner_decades {
        let hi = s * 10f64.powi(-(j as i32));
        panels.push((hi / 10.0, hi));
    }
    let n_inner = panels.len();
    for j in 0..opts.outer_decades {
        let lo = s * 10f64.powi(j as i32);
        panels.push((lo, lo * 10.0));
    }

    // coarse pass for the L1 magnitude that sets absolute tolerances
    let mut l1 = 0.0;
    for &(a, b) in &panels {
        for (lo, hi) in split_at_breakpoints(a, b, &opts.breakpoints) {
            l1 += gk15(&f, lo, hi).abs_value;
        }
    }
    let abs_tol = (opts.rel_tol * l1 / panels.len() as f64).max(f64::MIN_POSITIVE);

    let mut converged = true;
    let mut error = 0.0;
    let mut panel_values = Vec::with_capacity(panels.len());
    for &(a, b) in &panels {
        let mut v = 0.0;
        for (lo, hi) in split_at_breakpoints(a, b, &opts.breakpoints) {
            let r = integrate(&f, lo, hi, abs_tol, opts.rel_tol, opts.max_segments);
            v += r.value;
            error += r.abs_error;
            converged &= r.converged;
        }
        panel_values.push(v);
    }

    // ratio test on the inner decades, ordered outward -> inward
    let inner = &panel_values[..n_inner];
    let mut ratios = Vec::with_capacity(n_inner.saturating_sub(1));
    for w in inner.windows(2) {
        let (outer, innerv) = (w[0].abs(), w[1].abs());
        ratios.push(if outer > 0.0 {
            innerv / outer
        } else if innerv > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
    }
    let window = opts.divergence_window.min(ratios.len());
    let tail_ratios = &ratios[ratios.len() - window..];
    let innermost = inner.last().copied().unwrap_or(0.0);
    let negligible = innermost.abs() <= 1e-3 * abs_tol;
    let diverges =
        !negligible && window > 0 && tail_ratios.iter().all(|&q| q >= opts.divergence_ratio);

    // geometric extrapolation of the remaining decades down to 0
    let origin_tail = if diverges || negligible {
        0.0
    } else {
        let rho = tail_ratios.last().copied().unwrap_or(0.0);
        if rho < 1.0 {
            innermost * rho / (1.0 - rho)
        } else {
            0.0
        }
    };

    let total: f64 = panel_values.iter().sum::<f64>() + origin_tail;
    RadialIntegral {
        value: total,
        abs_error: error + 1e-3 * origin_tail.abs(),
        converged: converged && !diverges,
        diverges_at_origin: diverges,
        origin_tail,
        inner_ratios: ratios,
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Result of [`integrate_vector`].
#[derive(Debug, Clone)]
pub struct VectorIntegral {
    pub values: Vec<f64>,
    /// Largest change of any component under the last refinement.
    pub abs_error: f64,
    pub converged: bool,
}

/// Integrates a vector-valued `f` over consecutive panels `edges[i]..edges[i+1]`
/// with a fixed Gauss-Legendre rule, halving every panel until two successive
/// passes agree to `rel_tol` of the largest component. `f(x, out)` must
/// overwrite `out` (length `dim`).
pub fn integrate_vector<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    edges: &[f64],
    rel_tol: f64,
    max_refinements: usize,
) -> VectorIntegral {
    const ORDER: usize = 20;
    let (gx, gw) = gauss_legendre(ORDER);
    let mut buf = vec![0.0; dim];
    let mut pass = |edges: &[f64]| {
        let mut acc = vec![0.0; dim];
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in gx.iter().zip(&gw) {
                f(mid + half * x, &mut buf);
                for (s, v) in acc.iter_mut().zip(&buf) {
                    *s += w * half * v;
                }
            }
        }
        acc
    };
    let mut edges = edges.to_vec();
    let mut prev = pass(&edges);
    let mut abs_error = f64::INFINITY;
    for _ in 0..max_refinements {
        let mut finer = Vec::with_capacity(2 * edges.len());
        for e in edges.windows(2) {
            finer.push(e[0]);
            finer.push(0.5 * (e[0] + e[1]));
        }
        finer.push(*edges.last().unwrap());
        edges = finer;
        let next = pass(&edges);
        abs_error = prev
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prev = next;
        if abs_error <= rel_tol * scale {
            return VectorIntegral {
                values: prev,
                abs_error,
                converged: true,
            };
        }
    }
    VectorIntegral {
        values: prev,
        abs_error,
        converged: false,
    }
}
