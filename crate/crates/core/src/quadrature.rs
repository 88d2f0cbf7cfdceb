//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued
//! integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<f64>,
    /// Sum over panels of the max-norm Kronrod/Gauss difference.
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 200_000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F>(f: &F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Panel
where
    F: Fn(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    f(c, buf);
    for d in 0..dim {
        kron[d] = WGK[7] * buf[d];
        gauss[d] = WG[3] * buf[d];
    }
    for j in 0..7 {
        let x = h * XGK[j];
        for &point in &[c - x, c + x] {
            f(point, buf);
            for d in 0..dim {
                kron[d] += WGK[j] * buf[d];
                if j % 2 == 1 {
                    gauss[d] += WG[j / 2] * buf[d];
                }
            }
        }
    }
    let mut err = 0.0_f64;
    for d in 0..dim {
        kron[d] *= h;
        gauss[d] *= h;
        err = err.max((kron[d] - gauss[d]).abs());
    }
    Panel {
        a,
        b,
        value: kron,
        error: err,
    }
}

/// Integrates `f: R -> R^dim` over the partition given by `nodes` (sorted,
/// at least two entries). Panels are bisected in order of decreasing error
/// until the summed error meets `max(abs_tol, rel_tol * |I|_max)` or the
/// panel budget runs out; the result reports which happened.
pub fn integrate<F>(f: F, dim: usize, nodes: &[f64], opts: QuadOptions) -> QuadResult
where
    F: Fn(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    let mut heap = BinaryHeap::new();
    for w in nodes.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&f, w[0], w[1], dim, &mut buf));
        }
    }
    let total = |heap: &BinaryHeap<Panel>| {
        let mut v = vec![0.0; dim];
        let mut e = 0.0;
        for p in heap.iter() {
            for d in 0..dim {
                v[d] += p.value[d];
            }
            e += p.error;
        }
        (v, e)
    };
    let (mut value, mut error) = total(&heap);
    let mut since_resum = 0;
    loop {
        let scale = value.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if error <= target || heap.is_empty() {
            break;
        }
        if heap.len() >= opts.max_panels {
            let panels = heap.len();
            let (value, error) = total(&heap);
            return QuadResult {
                value,
                error,
                panels,
                converged: false,
            };
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot bisect further in floating point
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            error = total(&heap).1;
            continue;
        }
        let left = gk15(&f, worst.a, mid, dim, &mut buf);
        let right = gk15(&f, mid, worst.b, dim, &mut buf);
        for d in 0..dim {
            value[d] += left.value[d] + right.value[d] - worst.value[d];
        }
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        since_resum += 1;
        if since_resum == 256 {
            // refresh running sums to keep cancellation from accumulating
            (value, error) = total(&heap);
            since_resum = 0;
        }
    }
    let (value, error) = total(&heap);
    QuadResult {
        value,
        error,
        panels: heap.len(),
        converged: true,
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(f: F, nodes: &[f64], opts: QuadOptions) -> (f64, f64, bool)
where
    F: Fn(f64) -> f64,
{
    let r = integrate(|x, out: &mut [f64]| out[0] = f(x), 1, nodes, opts);
    (r.value[0], r.error, r.converged)
}

/// Partition of `[a, b]` into equal panels no wider than `width`, merged
/// with the interior `breakpoints`.
pub fn partition(a: f64, b: f64, width: f64, breakpoints: &[f64]) -> Vec<f64> {
    let count = ((b - a) / width).ceil().max(1.0) as usize;
    let mut nodes: Vec<f64> = (0..=count)
        .map(|i| a + (b - a) * i as f64 / count as f64)
        .collect();
    nodes.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    nodes.sort_by(|x, y| x.total_cmp(y));
    nodes.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + x.abs()));
    *nodes.last_mut().unwrap() = b;
    nodes
}

/// Abscissae of the 15-point Kronrod rule on `[-1, 1]`, excluding the centre.
pub fn kronrod_nodes() -> [f64; 7] {
    [XGK[0], XGK[1], XGK[2], XGK[3], XGK[4], XGK[5], XGK[6]]
}

/// Kronrod value and Kronrod/Gauss difference from samples ordered as
/// `[centre, c - h x_0, c + h x_0, c - h x_1, ...]` on a panel of half width `h`.
pub fn kronrod_gauss_pair(samples: &[f64], h: f64) -> (f64, f64) {
    let mut kron = WGK[7] * samples[0];
    let mut gauss = WG[3] * samples[0];
    for j in 0..7 {
        let pair = samples[1 + 2 * j] + samples[2 + 2 * j];
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Panel-local adaptive integration for wide vector integrands where a
/// global panel heap would be too large. Each initial panel is bisected
/// until its Kronrod/Gauss difference drops below `tol` times its share of
/// the total length; `max_depth` bounds the recursion.
pub fn integrate_local<F>(f: F, dim: usize, nodes: &[f64], tol: f64, max_depth: u32) -> QuadResult
where
    F: Fn(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    let mut panels = 0;
    let mut converged = true;
    let length = nodes.last().unwrap() - nodes.first().unwrap();
    let mut stack: Vec<(f64, f64, u32)> = Vec::new();
    for w in nodes.windows(2).rev() {
        if w[1] > w[0] {
            stack.push((w[0], w[1], 0));
        }
    }
    while let Some((a, b, depth)) = stack.pop() {
        let p = gk15(&f, a, b, dim, &mut buf);
        let budget = tol * (b - a) / length;
        if p.error > budget && depth < max_depth {
            let mid = 0.5 * (a + b);
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
            continue;
        }
        if p.error > budget {
            converged = false;
        }
        for d in 0..dim {
            value[d] += p.value[d];
        }
        error += p.error;
        panels += 1;
    }
    QuadResult {
        value,
        error,
        panels,
        converged,
    }
}
