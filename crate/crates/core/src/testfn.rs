//! Compactly supported cutoffs for the nonexistence functional
//! I_R = ∫∫ |u_t|^p φ_R ψ_R dx dt.
//!
//! φ = η^k on [0, ∞) and ψ = ζ(|x|²)^k with η, ζ smooth steps built from
//! e^{−1/y}. Derivatives are exact through Taylor jets; radial Laplacians use
//! ΔF(ρ) = 4ρF″ + 2nF′ with ρ = |x|².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::torus::{ExperimentRecord, TorusSolver, Verdict};

const GRID_POINTS: usize = 20_000;
/// ψ values below this are skipped in the boundedness maxima (the ratios vanish there).
const NEGLIGIBLE: f64 = 1e-250;

/// e^{−1/y} for y > 0 as a jet in the expansion variable of `y`.
fn flat(y: &Jet) -> Jet {
    if y.value() <= 0.0 {
        return Jet::constant(0.0, y.order());
    }
    (-&y.recip()).exp()
}

/// Smooth step: 0 for y ≤ 0, 1 for y ≥ 1.
fn step(y: &Jet) -> Jet {
    let k = y.order();
    if y.value() <= 0.0 {
        return Jet::constant(0.0, k);
    }
    if y.value() >= 1.0 {
        return Jet::constant(1.0, k);
    }
    let a = flat(y);
    let one_minus = &Jet::constant(1.0, k) - y;
    let b = flat(&one_minus);
    let denom = (&a + &b).recip();
    // write the upper half as 1 − b/(a+b) so rounding cannot break monotonicity
    if y.value() > 0.5 {
        &Jet::constant(1.0, k) - &(&b * &denom)
    } else {
        &a * &denom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionPair {
    pub n: usize,
    pub p: f64,
    pub p_prime: f64,
    /// Exponent k in φ = η^k, ψ = ζ^k.
    pub power: u32,
    pub delta: u32,
    pub theta: u32,
    pub alpha: u32,
    /// max φ^{−p′/p}|φ′|^{p′}
    pub phi_bound: f64,
    /// max ψ^{−p′/p}(|Δ^δψ|^{p′} + |Δ^θψ|^{p′} + |Δ^αψ|^{p′})
    pub psi_bound: f64,
}

fn as_natural(name: &str, v: f64, positive: bool) -> Result<u32> {
    let ok = v.is_finite() && v >= 0.0 && v.fract() == 0.0 && (!positive || v > 0.0) && v < 64.0;
    if ok {
        Ok(v as u32)
    } else {
        Err(Error::NonIntegerExponent(format!("{name} = {v}")))
    }
}

/// Builds φ, ψ with k = ⌈2p′⌉ and evaluates the boundedness maxima on a dense grid.
pub fn build_test_functions(n: usize, p: f64, delta: f64, theta: f64, alpha: f64) -> Result<TestFunctionPair> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be > 1, got {p}")));
    }
    let delta = as_natural("delta", delta, false)?;
    let theta = as_natural("theta", theta, false)?;
    let alpha = as_natural("alpha", alpha, true)?;
    let p_prime = p / (p - 1.0);
    let power = (2.0 * p_prime).ceil() as u32;
    let mut pair = TestFunctionPair {
        n,
        p,
        p_prime,
        power,
        delta,
        theta,
        alpha,
        phi_bound: 0.0,
        psi_bound: 0.0,
    };
    let e = p_prime / p;
    let mut phi_bound: f64 = 0.0;
    let mut psi_bound: f64 = 0.0;
    for i in 1..GRID_POINTS {
        let s = i as f64 / GRID_POINTS as f64;
        let t = 0.5 + 0.5 * s;
        let (f, df) = pair.phi_with_derivative(t);
        if f > NEGLIGIBLE {
            phi_bound = phi_bound.max(f.powf(-e) * df.abs().powf(p_prime));
        }
        let r = 0.5 + 0.5 * s;
        let psi = pair.psi(r);
        if psi > NEGLIGIBLE {
            let sum: f64 = [delta, theta, alpha]
                .iter()
                .map(|&k| pair.neg_laplacian_power(k, r).abs().powf(p_prime))
                .sum();
            psi_bound = psi_bound.max(psi.powf(-e) * sum);
        }
    }
    pair.phi_bound = phi_bound;
    pair.psi_bound = psi_bound;
    Ok(pair)
}

impl TestFunctionPair {
    fn phi_jet(&self, t: f64, order: usize) -> Jet {
        // η(t) = step(2(1 − t))
        let y = Jet::variable(t, order).scale(-2.0);
        let y = &y + &Jet::constant(2.0, order);
        step(&y).powi(self.power)
    }

    /// Temporal cutoff: 1 on [0, 1/2], 0 on [1, ∞).
    pub fn phi(&self, t: f64) -> f64 {
        self.phi_jet(t, 0).value()
    }

    pub fn phi_with_derivative(&self, t: f64) -> (f64, f64) {
        let j = self.phi_jet(t, 1);
        (j.value(), j.derivative(1))
    }

    /// Φ(τ) = ∫_τ^1 φ(s) ds.
    pub fn big_phi(&self, tau: f64) -> f64 {
        if tau >= 1.0 {
            return 0.0;
        }
        let flat_part = (0.5 - tau).max(0.0);
        let lo = tau.max(0.5);
        // Gauss–Legendre would do; composite Simpson on the smooth tail is plenty
        let m = 400;
        let h = (1.0 - lo) / m as f64;
        let mut acc = self.phi(lo) + self.phi(1.0);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.phi(lo + i as f64 * h);
        }
        flat_part + acc * h / 3.0
    }

    fn zeta_jet(&self, rho: f64, order: usize) -> Jet {
        // ζ(ρ) = step((1 − ρ)/(3/4)): 1 for ρ ≤ 1/4, 0 for ρ ≥ 1
        let y = Jet::variable(rho, order).scale(-4.0 / 3.0);
        let y = &y + &Jet::constant(4.0 / 3.0, order);
        step(&y).powi(self.power)
    }

    /// Spatial cutoff at |x| = r: 1 on B_{1/2}, 0 outside B₁.
    pub fn psi(&self, r: f64) -> f64 {
        self.zeta_jet(r * r, 0).value()
    }

    /// (−Δ)^k ψ at |x| = r.
    pub fn neg_laplacian_power(&self, k: u32, r: f64) -> f64 {
        let rho = r * r;
        if k == 0 {
            return self.psi(r);
        }
        if rho <= 0.25 || rho >= 1.0 {
            return 0.0;
        }
        let mut f = self.zeta_jet(rho, 2 * k as usize).0;
        let nf = self.n as f64;
        for _ in 0..k {
            // (LF)_i = 4(ρ₀ e_i + e_{i−1}) + 2n d_i with d, e the F′, F″ coefficients
            let len = f.len() - 2;
            let d = |i: usize| (i + 1) as f64 * f[i + 1];
            let e = |i: usize| ((i + 1) * (i + 2)) as f64 * f[i + 2];
            let next: Vec<f64> = (0..len)
                .map(|i| {
                    let prev = if i > 0 { e(i - 1) } else { 0.0 };
                    4.0 * (rho * e(i) + prev) + 2.0 * nf * d(i)
                })
                .collect();
            f = next;
        }
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * f[0]
    }

    /// C = p′ (max_φ + max_ψ).
    pub fn constant(&self) -> f64 {
        self.p_prime * (self.phi_bound + self.psi_bound)
    }
}

/// Terms of I_R/p′ ≤ C·bound_term − data_term at one radius R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityTriple {
    pub radius: f64,
    pub kappa: f64,
    /// ∫∫ |u_t|^p φ_R ψ_R dx dt
    pub i_r: f64,
    /// R^{−κp′ + n + κ}
    pub bound_term: f64,
    /// ∫ ψ_R (I + (−Δ)^δ) u₁ dx
    pub data_term: f64,
    pub constant: f64,
}

impl InequalityTriple {
    /// C·bound_term − data_term; a negative value with I_R ≥ 0 is the contradiction.
    pub fn margin(&self) -> f64 {
        self.constant * self.bound_term - self.data_term
    }

    pub fn contradiction(&self) -> bool {
        self.margin() < 0.0 && self.i_r >= 0.0
    }
}

/// Evaluates the triple on a stored torus run with snapshots of u_t.
///
/// φ_R(t) = φ(R^{−κ}t) and ψ_R(x) = ψ(x/R) with κ = min(2θ, α). The record
/// must cover [0, R^κ] in time and B_R inside the box.
pub fn testfn_functional(pair: &TestFunctionPair, record: &ExperimentRecord, radius: f64) -> Result<InequalityTriple> {
    let cfg = &record.config;
    let params = cfg.params;
    let p = match cfg.forcing {
        crate::torus::Forcing::Power { p } => p,
        crate::torus::Forcing::Off => {
            return Err(Error::InvalidArgument("the diagnostic needs a run with forcing |u_t|^p".into()))
        }
    };
    if pair.n != params.n
        || (pair.p - p).abs() > 1e-12
        || pair.delta as f64 != params.delta
        || pair.theta as f64 != params.theta
        || pair.alpha as f64 != params.alpha
    {
        return Err(Error::InvalidArgument("test functions were built for different exponents".into()));
    }
    if !(radius >= 1.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("R must be >= 1, got {radius}")));
    }
    let kappa = (2.0 * params.theta).min(params.alpha);
    let t_max = radius.powf(kappa);
    let coverage = |detail: String| Error::InsufficientCoverage {
        required_time: t_max,
        radius,
        detail,
    };
    if radius > 0.5 * cfg.grid.length {
        return Err(coverage(format!("box half-width is {}", 0.5 * cfg.grid.length)));
    }
    let last = record.snapshots.last().map(|s| s.t).unwrap_or(0.0);
    if last < t_max {
        let why = match record.verdict {
            Verdict::BlowUpAt { t } => format!("solution blew up at t = {t}"),
            _ => format!("snapshots end at t = {last}"),
        };
        return Err(coverage(why));
    }

    let grid = cfg.grid;
    let dv = grid.cell_volume();
    let psi_r: Vec<f64> = grid.point_radii().iter().map(|&x| pair.psi(x / radius)).collect();

    // trapezoid in time; φ_R vanishes from t = R^κ on
    let slice = |ut: &[f64], t: f64| -> f64 {
        let phi = pair.phi(t / t_max);
        if phi == 0.0 {
            return 0.0;
        }
        phi * ut.iter().zip(&psi_r).map(|(v, w)| v.abs().powf(p) * w).sum::<f64>() * dv
    };
    let mut i_r = 0.0;
    for w in record.snapshots.windows(2) {
        if w[0].t >= t_max {
            break;
        }
        i_r += 0.5 * (w[1].t - w[0].t) * (slice(&w[0].ut, w[0].t) + slice(&w[1].ut, w[1].t));
    }

    let solver = TorusSolver::new(grid, params, cfg.forcing)?;
    let lifted: Vec<_> = record
        .initial
        .v_hat
        .iter()
        .zip(solver.radii())
        .map(|(c, &r)| c * params.inertia(r))
        .collect();
    let data = solver.to_physical(&lifted);
    let data_term = data.iter().zip(&psi_r).map(|(f, w)| f * w).sum::<f64>() * dv;

    Ok(InequalityTriple {
        radius,
        kappa,
        i_r,
        bound_term: radius.powf(-kappa * pair.p_prime + params.n as f64 + kappa),
        data_term,
        constant: pair.constant(),
    })
}
