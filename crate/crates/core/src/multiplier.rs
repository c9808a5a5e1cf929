//! Per-frequency eigenvalues and Fourier-multiplier kernels of the linear flow.
//!
//! For each radial frequency r = |ξ| the Fourier transform satisfies
//! `w' = A w + (0, ĝ)` with `w = (û, û_t)` and
//! `A = [[0, 1], [−c, −b]]`, `b = r^{2θ}/(1 + r^{2δ})`, `c = r^{2α}/(1 + r^{2δ})`.
//! Kernels are evaluated through φ₁ so the real/complex root transition
//! needs no case split.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::phi::{exp_times_phi1, phi1_divided_difference, phi_divided_difference};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Damping and stiffness coefficients of one radial mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub r: f64,
    /// |ξ|^{2θ}/(1 + |ξ|^{2δ})
    pub b: f64,
    /// |ξ|^{2α}/(1 + |ξ|^{2δ})
    pub c: f64,
    /// 1 − 4|ξ|^{2(α−2θ)}(1 + |ξ|^{2δ})
    pub disc: f64,
}

impl ModeCoefficients {
    pub fn new(params: &ModelParams, r: f64) -> Self {
        let w = params.inertia(r);
        let b = r.powf(2.0 * params.theta) / w;
        let c = r.powf(2.0 * params.alpha) / w;
        let disc = 1.0 - 4.0 * r.powf(2.0 * (params.alpha - 2.0 * params.theta)) * w;
        Self { r, b, c, disc }
    }
}

/// λ± for radial frequency `r`.
///
/// λ₊ is the root with the larger real part; complex-conjugate roots put
/// the positive imaginary part on λ₊. For r = 0 with θ > 0 both roots vanish.
pub fn eigenvalues(params: &ModelParams, r: f64) -> (Complex64, Complex64) {
    eigenvalues_of(&ModeCoefficients::new(params, r), params)
}

fn eigenvalues_of(mode: &ModeCoefficients, params: &ModelParams) -> (Complex64, Complex64) {
    let ModeCoefficients { r, b, c, disc } = *mode;
    if b == 0.0 && c == 0.0 {
        return (ZERO, ZERO);
    }
    if disc >= 0.0 {
        let root = disc.sqrt();
        let minus = -0.5 * b * (1.0 + root);
        // λ₊ = b(√d − 1)/2 rewritten without cancellation: −2 r^{2(α−θ)}/(1 + √d)
        let plus = if params.theta == 0.0 && r == 0.0 {
            0.0
        } else {
            -2.0 * r.powf(2.0 * (params.alpha - params.theta)) / (1.0 + root)
        };
        let plus = if plus.is_finite() { plus } else { c / minus };
        (Complex64::new(plus, 0.0), Complex64::new(minus, 0.0))
    } else {
        let re = -0.5 * b;
        let im = 0.5 * b * (-disc).sqrt();
        let im = if im.is_finite() {
            im
        } else {
            (c - 0.25 * b * b).max(0.0).sqrt()
        };
        (Complex64::new(re, im), Complex64::new(re, -im))
    }
}

/// Kernel values at one (t, |ξ|).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub t: f64,
    pub r: f64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// K̂₀ = (λ₊e^{tλ₋} − λ₋e^{tλ₊})/(λ₊ − λ₋)
    pub k0: Complex64,
    /// K̂₁ = (e^{tλ₊} − e^{tλ₋})/(λ₊ − λ₋)
    pub k1: Complex64,
    /// Ê₁ = K̂₁/(1 + |ξ|^{2δ})
    pub e1: Complex64,
    pub dt_k0: Complex64,
    pub dt_k1: Complex64,
}

/// Which propagator kernel a norm or prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Kernel {
    K0,
    K1,
    E1,
}

impl KernelSample {
    /// ∂_t^j of the chosen kernel, j ∈ {0, 1}.
    pub fn value(&self, kernel: Kernel, j: u8, inertia: f64) -> Complex64 {
        match (kernel, j) {
            (Kernel::K0, 0) => self.k0,
            (Kernel::K0, _) => self.dt_k0,
            (Kernel::K1, 0) => self.k1,
            (Kernel::K1, _) => self.dt_k1,
            (Kernel::E1, 0) => self.e1,
            (Kernel::E1, _) => self.dt_k1 / inertia,
        }
    }

    /// Largest imaginary residue relative to the sample magnitude.
    ///
    /// Magnitudes below 1e−300 are measured against 1e−300. Heavily damped
    /// samples underflow, and products with λ then carry absolute errors of
    /// |λ|t subnormal ulps, which no relative bound can absorb.
    pub fn imaginary_residue(&self) -> f64 {
        let vals = [self.k0, self.k1, self.e1, self.dt_k0, self.dt_k1];
        let mag = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let im = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        im / mag.max(1e-300)
    }
}

/// K̂₀, K̂₁, Ê₁ and their time derivatives; `t` must be nonnegative.
pub fn kernels(params: &ModelParams, t: f64, r: f64) -> Result<KernelSample> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("radial frequency must be >= 0, got {r}")));
    }
    Ok(kernels_unchecked(params, t, r))
}

pub(crate) fn kernels_unchecked(params: &ModelParams, t: f64, r: f64) -> KernelSample {
    let mode = ModeCoefficients::new(params, r);
    let (lp, lm) = eigenvalues_of(&mode, params);
    kernels_from_roots(t, r, &mode, lp, lm, params.inertia(r))
}

fn kernels_from_roots(
    t: f64,
    r: f64,
    mode: &ModeCoefficients,
    lp: Complex64,
    lm: Complex64,
    inertia: f64,
) -> KernelSample {
    let tc = Complex64::new(t, 0.0);
    // K̂₁ = t e^{tλ₋} φ₁(tΔ), Δ = λ₊ − λ₋
    let base = (tc * lm).exp();
    let k1 = tc * exp_times_phi1(tc * lm, tc * (lp - lm));
    let k0 = base - lm * k1;
    let dt_k1 = base + lp * k1;
    let dt_k0 = -mode.c * k1;
    KernelSample {
        t,
        r,
        lambda_plus: lp,
        lambda_minus: lm,
        k0,
        k1,
        e1: k1 / inertia,
        dt_k0,
        dt_k1,
    }
}

/// Exact one-step flow of a single mode with frozen or linearly varying forcing.
///
/// `w(h) = M w(0) + duhamel · ĝ₀ + correction · (ĝ₁ − ĝ₀)` where ĝ varies
/// linearly from ĝ₀ to ĝ₁ over the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPropagator {
    /// e^{hA} = [[K̂₀, K̂₁], [−cK̂₁, ∂tK̂₁]] at t = h.
    pub matrix: [[Complex64; 2]; 2],
    /// (∫₀^h K̂₁, K̂₁(h)); first entry is h²φ₁[hλ₊, hλ₋].
    pub duhamel: [Complex64; 2],
    /// (1/h)∫₀^h (h − s) e^{sA} e₂ ds = (h²φ₂[hλ₊, hλ₋], h φ₁[hλ₊, hλ₋]).
    pub correction: [Complex64; 2],
}

impl StepPropagator {
    /// Real parts, for modes of a real field (kernels are real-valued).
    pub fn to_real(&self) -> RealStepPropagator {
        RealStepPropagator {
            matrix: [
                [self.matrix[0][0].re, self.matrix[0][1].re],
                [self.matrix[1][0].re, self.matrix[1][1].re],
            ],
            duhamel: [self.duhamel[0].re, self.duhamel[1].re],
            correction: [self.correction[0].re, self.correction[1].re],
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }
}

/// Real-valued copy of [`StepPropagator`] used by the torus solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealStepPropagator {
    pub matrix: [[f64; 2]; 2],
    pub duhamel: [f64; 2],
    pub correction: [f64; 2],
}

/// e^{hA} together with the Duhamel columns for step size `h > 0`.
pub fn propagator_step_matrix(params: &ModelParams, h: f64, r: f64) -> Result<StepPropagator> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step size must be > 0, got {h}")));
    }
    let sample = kernels(params, h, r)?;
    let mode = ModeCoefficients::new(params, r);
    let hc = Complex64::new(h, 0.0);
    let zp = hc * sample.lambda_plus;
    let zm = hc * sample.lambda_minus;
    let j1 = hc * hc * phi1_divided_difference(zp, zm);
    let p = hc * hc * phi_divided_difference(2, zp, zm);
    let q = j1 / hc;
    Ok(StepPropagator {
        matrix: [
            [sample.k0, sample.k1],
            [-mode.c * sample.k1, sample.dt_k1],
        ],
        duhamel: [j1, sample.k1],
        correction: [p, q],
    })
}

/// Radius where the discriminant changes sign, if any.
///
/// `4 r^{2(α−2θ)}(1 + r^{2δ})` is nondecreasing in r, so the root is unique
/// when it exists; it does not exist when α = 2θ (complex roots down to ξ = 0).
pub fn discriminant_zero_radius(params: &ModelParams) -> Option<f64> {
    let d = |r: f64| ModeCoefficients::new(params, r).disc;
    if params.alpha - 2.0 * params.theta <= 0.0 && params.delta == 0.0 {
        return None;
    }
    if d(0.0) <= 0.0 {
        return None;
    }
    // bracket in log r
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while d(lo.exp()) <= 0.0 {
        lo -= 2.0;
        if lo < -700.0 {
            return None;
        }
    }
    while d(hi.exp()) > 0.0 {
        hi += 2.0;
        if hi > 700.0 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}
