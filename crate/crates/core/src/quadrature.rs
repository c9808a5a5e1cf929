//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subintervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subintervals: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subintervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
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

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// ∫ f over [breaks[0], breaks[last]] with the given interior breakpoints.
///
/// Breakpoints must be finite and nondecreasing; zero-width pieces are skipped.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Err(Error::InvalidArgument("quadrature needs at least two breakpoints".into()));
    }
    if breaks.iter().any(|x| !x.is_finite()) || breaks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(format!(
            "quadrature breakpoints must be finite and sorted: {breaks:?}"
        )));
    }
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let s = kronrod(&f, w[0], w[1]);
            total += s.value;
            err += s.error;
            heap.push(s);
        }
    }
    loop {
        let requested = opts.abs_tol.max(opts.rel_tol * total.abs());
        if !total.is_finite() {
            return Err(Error::Quadrature {
                achieved: f64::INFINITY,
                requested,
            });
        }
        if err <= requested {
            return Ok(QuadResult {
                value: total,
                error: err,
                subintervals: heap.len(),
            });
        }
        if heap.len() >= opts.max_subintervals {
            return Err(Error::Quadrature {
                achieved: err,
                requested,
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => unreachable!("error positive with no segments"),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at machine resolution; nothing left to refine
            return Err(Error::Quadrature {
                achieved: err,
                requested,
            });
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        // keep the running error from drifting below the true sum through cancellation
        if heap.len() % 1024 == 0 {
            err = heap.iter().map(|s| s.error).sum::<f64>() + left.error + right.error;
        }
        heap.push(left);
        heap.push(right);
    }
}
