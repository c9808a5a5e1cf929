//! Closed-form decay exponents, critical exponent, the threshold m₀ and
//! admissibility of (m, p, q) for the semilinear problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiplier::Kernel;
use crate::params::ModelParams;
use crate::quadrature::{integrate, QuadOptions};

/// Tolerance under which the case selector σ counts as zero.
pub const SIGMA_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFactor {
    None,
    Log,
    LogInverseHandledElsewhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    K0CaseI,
    K1CaseIi,
    K1CaseIiLogException,
    K1CaseIii,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::K0CaseI => "K0_case_i",
            CaseLabel::K1CaseIi => "K1_case_ii",
            CaseLabel::K1CaseIiLogException => "K1_case_ii_log_exception",
            CaseLabel::K1CaseIii => "K1_case_iii",
        }
    }
}

/// Decay of the high-frequency remainder g(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GDecay {
    /// e^{−ct} for some unquantified c > 0 (δ ≤ θ).
    Exponential,
    /// (1+t)^{power}, power = n/(2(δ−θ))(1/2 − 1/q) − 1/(2β).
    Power { power: f64, beta: f64 },
}

/// Asymptotic rate of ‖∂_x^{γ₂} ∂_t^j K(t)∗ψ‖_{L^q}: (1+t)^{power}, possibly times ln(e+t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPrediction {
    pub power: f64,
    pub log_factor: LogFactor,
    pub case_label: CaseLabel,
    /// H^s order required of ψ for the high-frequency remainder.
    pub sobolev_requirement: f64,
    pub g_decay: GDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeQuery {
    pub params: ModelParams,
    pub eta: f64,
    /// Target Lebesgue index; `f64::INFINITY` allowed.
    pub q: f64,
    pub gamma2: f64,
    pub j: u8,
    pub kernel: Kernel,
    /// Only used when δ > θ; `None` selects the default.
    pub beta: Option<f64>,
}

impl RegimeQuery {
    pub fn new(params: ModelParams, eta: f64, q: f64, gamma2: f64, j: u8, kernel: Kernel) -> Self {
        Self {
            params,
            eta,
            q,
            gamma2,
            j,
            kernel,
            beta: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    /// n(1/η − 1/q) + |γ₂|.
    pub fn spatial_order(&self) -> f64 {
        self.params.n as f64 * (1.0 / self.eta - inv(self.q)) + self.gamma2
    }

    /// σ = n(1/η − 1/q) + |γ₂| − 2θ.
    pub fn selector(&self) -> f64 {
        self.spatial_order() - 2.0 * self.params.theta
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(1.0..=2.0).contains(&self.eta) {
            return Err(Error::InvalidArgument(format!(
                "eta must lie in [1, 2], got {}",
                self.eta
            )));
        }
        if !(self.q >= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "q must lie in [2, inf] for the linear decay estimates, got {}",
                self.q
            )));
        }
        if !(self.gamma2 >= 0.0) || !self.gamma2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma2 must be finite and >= 0, got {}",
                self.gamma2
            )));
        }
        if self.j > 1 {
            return Err(Error::InvalidArgument(format!("j must be 0 or 1, got {}", self.j)));
        }
        if let Some(beta) = self.beta {
            let ceiling = beta_ceiling(&self.params, self.q);
            if !(beta > 0.0 && beta < ceiling) {
                return Err(Error::InvalidArgument(format!(
                    "beta must lie in (0, {ceiling}), got {beta}"
                )));
            }
        }
        Ok(())
    }
}

fn inv(q: f64) -> f64 {
    if q.is_infinite() {
        0.0
    } else {
        1.0 / q
    }
}

/// Supremum (δ−θ)/n · 2q/(q−2)₊ of admissible β; infinite at q = 2 or δ ≤ θ.
pub fn beta_ceiling(params: &ModelParams, q: f64) -> f64 {
    let gap = params.delta - params.theta;
    if gap <= 0.0 || q <= 2.0 {
        return f64::INFINITY;
    }
    let ratio = if q.is_infinite() { 2.0 } else { 2.0 * q / (q - 2.0) };
    gap / params.n as f64 * ratio
}

/// Low-frequency power and case label.
fn low_frequency(query: &RegimeQuery) -> Result<(f64, LogFactor, CaseLabel)> {
    let p = &query.params;
    let j = query.j as f64;
    let order = query.spatial_order();
    let sigma = query.selector();
    if query.kernel == Kernel::K0 {
        let power = -order / (2.0 * (p.alpha - p.theta)) - j;
        return Ok((power, LogFactor::None, CaseLabel::K0CaseI));
    }
    if sigma.abs() <= SIGMA_ZERO_TOL {
        if query.j == 0 && query.eta == 1.0 {
            return Ok((0.0, LogFactor::Log, CaseLabel::K1CaseIiLogException));
        }
        return Err(Error::BoundaryCase {
            j: query.j,
            eta: query.eta,
        });
    }
    if sigma > 0.0 {
        let power = -sigma / (2.0 * (p.alpha - p.theta)) - j;
        Ok((power, LogFactor::None, CaseLabel::K1CaseIi))
    } else {
        if p.theta == 0.0 {
            return Err(Error::InvalidArgument(
                "theta = 0 has no rate for kernels K1/E1 with negative selector".into(),
            ));
        }
        let power = 1.0 - j - order / (2.0 * p.theta);
        Ok((power, LogFactor::None, CaseLabel::K1CaseIii))
    }
}

/// β balancing g(t) against the low-frequency power.
///
/// For a decaying low-frequency rate P the remainder is made to decay at the same
/// rate; otherwise g(t) is set to decay like (1+t)^{−1/2}.
pub fn default_beta(params: &ModelParams, q: f64, low_power: f64) -> f64 {
    let gap = params.delta - params.theta;
    let base = params.n as f64 / (2.0 * gap) * (0.5 - inv(q));
    let half_inv_beta = if low_power < 0.0 { base - low_power } else { base + 0.5 };
    1.0 / (2.0 * half_inv_beta)
}

pub fn predict(query: &RegimeQuery) -> Result<DecayPrediction> {
    query.validate()?;
    let p = &query.params;
    let (power, log_factor, case_label) = low_frequency(query)?;

    let (g_decay, extra) = if p.delta > p.theta {
        let beta = query.beta.unwrap_or_else(|| default_beta(p, query.q, power));
        let gap = p.delta - p.theta;
        let g_power = p.n as f64 / (2.0 * gap) * (0.5 - inv(query.q)) - 1.0 / (2.0 * beta);
        (
            GDecay::Power {
                power: g_power,
                beta,
            },
            gap / beta,
        )
    } else {
        (GDecay::Exponential, 0.0)
    };

    let s0 = query.gamma2 + extra;
    let r0 = s0 + p.delta - p.alpha;
    let r1 = query.gamma2 + extra;
    let s1 = r1 + p.alpha - p.delta;
    let (s, r) = if query.j == 0 { (s0, r0) } else { (s1, r1) };
    let requirement = match query.kernel {
        Kernel::K0 => s,
        Kernel::K1 => r,
        Kernel::E1 => r - 2.0 * p.delta,
    };

    Ok(DecayPrediction {
        power,
        log_factor,
        case_label,
        sobolev_requirement: requirement.max(0.0),
        g_decay,
    })
}

/// Data regularities (r₀, r₁) demanded of u₁ in the global existence argument:
/// r₀ from ‖|D|^α K₁∗ψ‖_{L²} with η = m, r₁ from ‖∂_t K₁∗ψ‖_{L^q} with η = m.
pub fn regularity_closure(params: &ModelParams, m: f64, q: f64) -> Result<(f64, f64)> {
    let q0 = RegimeQuery::new(*params, m, 2.0, params.alpha, 0, Kernel::K1);
    let q1 = RegimeQuery::new(*params, m, q, 0.0, 1, Kernel::K1);
    Ok((
        predict(&q0)?.sobolev_requirement,
        predict(&q1)?.sobolev_requirement,
    ))
}

/// p_c = 1 + 2mθ/n.
pub fn critical_exponent(n: usize, theta: f64, m: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if theta == 0.0 {
        return Err(Error::InvalidArgument(
            "theta = 0: no critical exponent, every p > 1 is admissible".into(),
        ));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be > 0, got {theta}")));
    }
    if !(m > 1.0 && m <= 2.0) {
        return Err(Error::InvalidArgument(format!("m must lie in (1, 2], got {m}")));
    }
    Ok(1.0 + 2.0 * m * theta / n as f64)
}

/// n(2−m) ≤ 2mθ·min(m, √(2(2−m))).
pub fn m_zero_feasible(n: usize, theta: f64, m: f64) -> bool {
    let n = n as f64;
    let lhs = n * (2.0 - m);
    let rhs = 2.0 * m * theta * m.min((2.0 * (2.0 - m)).max(0.0).sqrt());
    lhs <= rhs
}

/// Smallest m ∈ [1, 2] satisfying the feasibility condition.
pub fn m_zero(n: usize, theta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("theta must be > 0, got {theta}")));
    }
    if m_zero_feasible(n, theta, 1.0) {
        return Ok(1.0);
    }
    // the indicator is monotone; confirm on a dense grid before bisecting
    let mut seen = false;
    for i in 0..=4000 {
        let feasible = m_zero_feasible(n, theta, 1.0 + i as f64 / 4000.0);
        if seen && !feasible {
            return Err(Error::InvalidArgument(format!(
                "m0 feasibility not monotone for n = {n}, theta = {theta}"
            )));
        }
        seen |= feasible;
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if m_zero_feasible(n, theta, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // each branch of the min is a quadratic in m; snap to its root
    let nf = n as f64;
    let switch = 5f64.sqrt() - 1.0;
    let exact = if hi <= switch {
        (-nf + (nf * nf + 16.0 * theta * nf).sqrt()) / (4.0 * theta)
    } else {
        let n2 = nf * nf;
        (-n2 + (n2 * n2 + 64.0 * theta * theta * n2).sqrt()) / (16.0 * theta * theta)
    };
    if (exact - hi).abs() <= 2e-10 && m_zero_feasible(n, theta, exact) {
        Ok(exact)
    } else {
        Ok(hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityVerdict {
    SupercriticalGe,
    CriticalGe,
    SubcriticalBlowup,
    OutOfScope,
}

impl AdmissibilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdmissibilityVerdict::SupercriticalGe => "supercritical_GE",
            AdmissibilityVerdict::CriticalGe => "critical_GE",
            AdmissibilityVerdict::SubcriticalBlowup => "subcritical_blowup",
            AdmissibilityVerdict::OutOfScope => "out_of_scope",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub verdict: AdmissibilityVerdict,
    pub reasons: Vec<String>,
}

/// nm / (2(n − 2mθ)₊), infinite when n ≤ 2mθ.
pub fn q_half_ceiling(n: usize, theta: f64, m: f64) -> f64 {
    let denom = n as f64 - 2.0 * m * theta;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        n as f64 * m / (2.0 * denom)
    }
}

/// Classifies (m, p, q) into the global-existence / nonexistence ranges.
///
/// `q` may be `None` when only the nonexistence range is of interest.
pub fn admissibility(params: &ModelParams, m: f64, p: f64, q: Option<f64>) -> Admissibility {
    let out = |reason: String| Admissibility {
        verdict: AdmissibilityVerdict::OutOfScope,
        reasons: vec![reason],
    };
    if let Err(e) = params.validate() {
        return out(e.to_string());
    }
    if !(p > 1.0) {
        return out(format!("p must be > 1, got {p}"));
    }
    if !(m > 1.0 && m <= 2.0) {
        return out(format!("m must lie in (1, 2], got {m}"));
    }
    let n = params.n as f64;

    if params.theta == 0.0 {
        return match q {
            _ if params.delta <= 0.0 => out("theta = 0 needs delta > 0".into()),
            _ if n >= 4.0 * params.delta => out(format!("theta = 0 needs n < 4 delta, got n = {n}")),
            None => out("theta = 0 needs q >= 2p, q not given".into()),
            Some(q) if q < 2.0 * p => out(format!("theta = 0 needs q >= 2p, got q = {q}")),
            Some(_) => Admissibility {
                verdict: AdmissibilityVerdict::SupercriticalGe,
                reasons: vec!["theta = 0, n < 4 delta, q >= 2p: every p > 1 is supercritical".into()],
            },
        };
    }

    let kappa = (2.0 * params.theta).min(params.alpha);
    let pc = 1.0 + 2.0 * m * params.theta / n;
    let blowup_bound = 1.0 + kappa * m / n;
    if p < blowup_bound {
        return Admissibility {
            verdict: AdmissibilityVerdict::SubcriticalBlowup,
            reasons: vec![format!("p = {p} < 1 + min(2 theta, alpha) m / n = {blowup_bound}")],
        };
    }

    let m0 = match m_zero(params.n, params.theta) {
        Ok(v) => v,
        Err(e) => return out(e.to_string()),
    };
    let mut reasons = Vec::new();
    if m <= m0 {
        reasons.push(format!("m = {m} must exceed m0 = {m0}"));
    }
    let Some(q) = q else {
        reasons.push("q not given".into());
        return Admissibility {
            verdict: AdmissibilityVerdict::OutOfScope,
            reasons,
        };
    };
    let ceiling = q_half_ceiling(params.n, params.theta, m);
    let half_q = 0.5 * q;
    if p > half_q {
        reasons.push(format!("need p <= q/2, got p = {p}, q/2 = {half_q}"));
    }
    let critical = (p - pc).abs() <= 1e-12 * pc;
    if critical {
        if half_q >= ceiling {
            reasons.push(format!("critical case needs q/2 < {ceiling}, got {half_q}"));
        }
    } else if half_q > ceiling {
        reasons.push(format!("need q/2 <= {ceiling}, got {half_q}"));
    }
    if !reasons.is_empty() {
        return Admissibility {
            verdict: AdmissibilityVerdict::OutOfScope,
            reasons,
        };
    }
    if critical {
        Admissibility {
            verdict: AdmissibilityVerdict::CriticalGe,
            reasons: vec![format!("p = p_c = {pc}, q/2 = {half_q} < {ceiling}")],
        }
    } else {
        Admissibility {
            verdict: AdmissibilityVerdict::SupercriticalGe,
            reasons: vec![format!("p_c = {pc} < p = {p} <= q/2 = {half_q} <= {ceiling}, m > m0 = {m0}")],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaSample {
    pub t: f64,
    pub integral: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub kappa: f64,
    pub mu: f64,
    pub log_variant: bool,
    pub samples: Vec<LemmaSample>,
    pub max_ratio: f64,
    pub bounded: bool,
}

/// Ratios of ∫₀^t (1+t−s)^{−κ}(1+s)^{−μ} ds to (1+t)^{−κ}, or to (1+t)^{−κ} ln(e+t) when μ = 1.
pub fn duhamel_bound_check(kappa: f64, mu: f64, t_grid: &[f64]) -> Result<LemmaCheck> {
    if !(kappa <= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("kappa must be <= 1, got {kappa}")));
    }
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be >= 1, got {mu}")));
    }
    if t_grid.len() < 3 || t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("t_grid needs at least three positive times".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t_grid must be increasing".into()));
    }
    let log_variant = mu == 1.0;
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        max_subintervals: 50_000,
    };
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let f = |s: f64| (1.0 + t - s).powf(-kappa) * (1.0 + s).powf(-mu);
        let integral = integrate(f, &[0.0, 0.5 * t, t], &opts)?.value;
        let mut scale = (1.0 + t).powf(-kappa);
        if log_variant {
            scale *= (std::f64::consts::E + t).ln();
        }
        samples.push(LemmaSample {
            t,
            integral,
            ratio: integral / scale,
        });
    }
    let ratios: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
    let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(LemmaCheck {
        kappa,
        mu,
        log_variant,
        bounded: ratios_settle(t_grid, &ratios),
        samples,
        max_ratio,
    })
}

/// Heuristic boundedness verdict on the tail of a ratio sequence.
///
/// When the grid spans two decades below its last time T, the rise over
/// [T/10, T] must be nonpositive or at most half the rise over [T/100, T/10];
/// logarithmic growth rises by the same amount every decade and fails. On
/// shorter grids the last three samples are compared the same way.
pub fn ratios_settle(times: &[f64], ratios: &[f64]) -> bool {
    if ratios.len() < 3 || times.len() != ratios.len() || ratios.iter().any(|r| !r.is_finite()) {
        return false;
    }
    let k = ratios.len();
    let last_t = times[k - 1];
    // sample nearest to `t` in log scale, if within a quarter decade
    let near = |t: f64| -> Option<usize> {
        let (i, d) = times
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (s / t).log10().abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        (d <= 0.25).then_some(i)
    };
    let (a, b) = match (near(last_t / 100.0), near(last_t / 10.0)) {
        (Some(a), Some(b)) if a < b && b < k - 1 => (a, b),
        _ => (k - 3, k - 2),
    };
    let last = ratios[k - 1] - ratios[b];
    let prev = ratios[b] - ratios[a];
    last <= 0.0 || last <= 0.5 * prev
}
