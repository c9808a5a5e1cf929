//! Radial Plancherel norms of the linear propagators.
//!
//! N(t)² = ω_{n−1} ∫₀^∞ |r^{γ₂} ∂_t^j K̂(t, r) ψ̂(r)|² r^{n−1} dr, evaluated in the
//! variable x = ln r. No (2π)^{−n} factor is applied.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiplier::{discriminant_zero_radius, kernels, Kernel};
use crate::params::ModelParams;
use crate::quadrature::{integrate, QuadOptions};
use crate::rates::{predict, RegimeQuery};

/// Margin ε in the algebraic profile (1 + r²)^{−(s + n/2 + ε)/2}.
pub const ALGEBRAIC_MARGIN: f64 = 0.01;

const SCAN_LO: f64 = -50.0;
const SCAN_HI: f64 = 50.0;
const SCAN_STEP: f64 = 0.25;
const SCAN_CAP: f64 = 300.0;
const TAIL_RATIO: f64 = 1e-17;

/// Radial Fourier profile ψ̂(|ξ|).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrequencyProfile {
    /// exp(−(w r)²/2)
    Gaussian { width: f64 },
    /// (1 + r²)^{−(s + n/2 + ε)/2}
    AlgebraicTail { s: f64 },
    /// r^{−(s + n/2)} for r ≥ cutoff, zero below
    HighPass { s: f64, cutoff: f64 },
}

impl FrequencyProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FrequencyProfile::Gaussian { width } => width > 0.0 && width.is_finite(),
            FrequencyProfile::AlgebraicTail { s } => s >= 0.0 && s.is_finite(),
            FrequencyProfile::HighPass { s, cutoff } => {
                s >= 0.0 && s.is_finite() && cutoff > 0.0 && cutoff.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid profile {self:?}")))
        }
    }

    pub fn eval(&self, n: usize, r: f64) -> f64 {
        let half_n = 0.5 * n as f64;
        match *self {
            FrequencyProfile::Gaussian { width } => (-0.5 * (width * r).powi(2)).exp(),
            FrequencyProfile::AlgebraicTail { s } => {
                (1.0 + r * r).powf(-0.5 * (s + half_n + ALGEBRAIC_MARGIN))
            }
            FrequencyProfile::HighPass { s, cutoff } => {
                if r >= cutoff {
                    r.powf(-(s + half_n))
                } else {
                    0.0
                }
            }
        }
    }

    fn lower_edge(&self) -> Option<f64> {
        match *self {
            FrequencyProfile::HighPass { cutoff, .. } => Some(cutoff),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOptions {
    pub rel_tol: f64,
    /// Multiplies the structural split radii (disc zero and t^{−1/(2θ)}).
    pub split_scale: f64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            split_scale: 1.0,
        }
    }
}

/// ω_{n−1} ∫₀^∞ f(r) r^{n−1} dr for a nonnegative radial density `f`.
///
/// `lower_edge` marks a jump of `f` (support starts there), `splits` are extra
/// radii where the integrand changes character.
pub fn radial_integral<F: Fn(f64) -> f64 + Sync>(
    params: &ModelParams,
    f: F,
    lower_edge: Option<f64>,
    splits: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    let n = params.n as i32;
    let g = |x: f64| {
        let r = x.exp();
        let v = f(r) * r.powi(n);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let x_floor = lower_edge.map(f64::ln).unwrap_or(f64::NEG_INFINITY);

    let mut xs = Vec::new();
    let mut x = SCAN_LO.max(x_floor);
    while x <= SCAN_HI {
        xs.push(x);
        x += SCAN_STEP;
    }
    let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(0.0);
    }
    let thresh = TAIL_RATIO * peak;
    let first = vals.iter().position(|&v| v > thresh).unwrap_or(0);
    let last = vals.iter().rposition(|&v| v > thresh).unwrap_or(vals.len() - 1);
    let mut lo = if first == 0 { xs[0] } else { xs[first - 1] };
    let mut hi = if last + 1 < xs.len() { xs[last + 1] } else { xs[last] };
    while lo > x_floor && g(lo) > thresh {
        lo -= 1.0;
        if lo < -SCAN_CAP {
            return Err(Error::Quadrature {
                achieved: g(lo) / peak,
                requested: TAIL_RATIO,
            });
        }
    }
    lo = lo.max(x_floor);
    while g(hi) > thresh {
        hi += 1.0;
        if hi > SCAN_CAP {
            return Err(Error::Quadrature {
                achieved: g(hi) / peak,
                requested: TAIL_RATIO,
            });
        }
    }

    let mut breaks = vec![lo, hi];
    for &r in splits {
        if r > 0.0 && r.is_finite() {
            let x = r.ln();
            if x > lo && x < hi {
                breaks.push(x);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol,
        max_subintervals: 200_000,
    };
    let res = integrate(g, &breaks, &opts)?;
    Ok(params.sphere_area() * res.value)
}

fn structural_splits(params: &ModelParams, t: f64, scale: f64) -> Vec<f64> {
    let mut s = vec![1.0];
    if let Some(r0) = discriminant_zero_radius(params) {
        s.push(r0 * scale);
    }
    if params.theta > 0.0 && t > 0.0 {
        s.push(t.powf(-1.0 / (2.0 * params.theta)) * scale);
    }
    s
}

/// ‖ |ξ|^{γ₂} ∂_t^j K̂(t) ψ̂ ‖_{L²(ℝⁿ)} by radial quadrature.
pub fn l2_norm_radial(
    params: &ModelParams,
    kernel: Kernel,
    j: u8,
    gamma2: f64,
    t: f64,
    profile: &FrequencyProfile,
) -> Result<f64> {
    l2_norm_radial_with(params, kernel, j, gamma2, t, profile, &RadialOptions::default())
}

pub fn l2_norm_radial_with(
    params: &ModelParams,
    kernel: Kernel,
    j: u8,
    gamma2: f64,
    t: f64,
    profile: &FrequencyProfile,
    opts: &RadialOptions,
) -> Result<f64> {
    params.validate()?;
    profile.validate()?;
    if j > 1 {
        return Err(Error::InvalidArgument(format!("j must be 0 or 1, got {j}")));
    }
    if !(gamma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma2 must be >= 0, got {gamma2}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    let n = params.n;
    let density = |r: f64| {
        let psi = profile.eval(n, r);
        if psi == 0.0 {
            return 0.0;
        }
        let s = match kernels(params, t, r) {
            Ok(s) => s,
            Err(_) => return f64::NAN,
        };
        let v = s.value(kernel, j, params.inertia(r)).re * r.powf(gamma2) * psi;
        v * v
    };
    let splits = structural_splits(params, t, opts.split_scale);
    let n2 = radial_integral(params, density, profile.lower_edge(), &splits, opts.rel_tol)?;
    Ok(n2.max(0.0).sqrt())
}

/// Box [−L/2, L/2)ⁿ with N modes per dimension (lattice for norm sums).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub n: usize,
    pub length: f64,
    pub modes: usize,
}

impl Lattice {
    /// |ξ_k| for every retained mode (Nyquist excluded).
    pub fn radii(&self) -> Vec<f64> {
        let dk = 2.0 * std::f64::consts::PI / self.length;
        let half = self.modes as i64 / 2;
        let ks: Vec<f64> = (-half + 1..half).map(|k| k as f64 * dk).collect();
        match self.n {
            1 => ks.iter().map(|k| k.abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(ks.len() * ks.len());
                for a in &ks {
                    for b in &ks {
                        out.push((a * a + b * b).sqrt());
                    }
                }
                out
            }
        }
    }
}

/// Torus counterpart of [`l2_norm_radial`] for data with coefficients ψ̂(|ξ_k|)/Lⁿ:
/// (L^{−n} Σ_k |ξ_k|^{2γ₂} |∂_t^j K̂ ψ̂|²)^{1/2}.
pub fn l2_norm_lattice(
    params: &ModelParams,
    kernel: Kernel,
    j: u8,
    gamma2: f64,
    t: f64,
    profile: &FrequencyProfile,
    lattice: &Lattice,
) -> Result<f64> {
    if lattice.n != params.n || !(1..=2).contains(&lattice.n) {
        return Err(Error::InvalidArgument("lattice dimension must match n and be 1 or 2".into()));
    }
    let mut acc = 0.0;
    for r in lattice.radii() {
        let s = kernels(params, t, r)?;
        let v = s.value(kernel, j, params.inertia(r)).re * r.powf(gamma2) * profile.eval(params.n, r);
        acc += v * v;
    }
    Ok((acc / lattice.length.powi(params.n as i32)).sqrt())
}

/// Geometric grid from t0 to t1 with `per_decade` intervals per decade.
pub fn geometric_grid(t0: f64, t1: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t1 / t0).log10();
    let steps = (decades * per_decade as f64).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| t0 * (t1 / t0).powf(i as f64 / steps as f64))
        .collect()
}

/// Least-squares line through (ln(1+t), ln N); returns (slope, intercept, max residual).
pub fn log_log_fit(times: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::InvalidArgument("fit needs at least two matching points".into()));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("fit needs positive finite values".into()));
    }
    let xs: Vec<f64> = times.iter().map(|t| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok((slope, intercept, resid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub predicted_power: Option<f64>,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub max_residual: f64,
}

impl DecayCurve {
    /// Columns t, N, predicted_power.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "N", "predicted_power"])?;
        let pred = self.predicted_power.map(|p| p.to_string()).unwrap_or_default();
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string(), pred.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples N(t) on `times` and fits the slope over the last two decades.
#[allow(clippy::too_many_arguments)]
pub fn fit_decay(
    params: &ModelParams,
    kernel: Kernel,
    j: u8,
    gamma2: f64,
    profile: &FrequencyProfile,
    eta_model: f64,
    times: &[f64],
) -> Result<DecayCurve> {
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(Error::InvalidArgument("times must be positive and increasing".into()));
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let per_decade = (times.len() - 1) as f64 / (t1 / t0).log10();
    if per_decade < 20.0 - 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "time grid needs >= 20 points per decade, got {per_decade:.1}"
        )));
    }
    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| l2_norm_radial(params, kernel, j, gamma2, t, profile))
        .collect::<Result<_>>()?;
    let window_start = t1 / 100.0;
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= window_start * (1.0 - 1e-12)).collect();
    let wt: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let wv: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    let (slope, intercept, resid) = log_log_fit(&wt, &wv)?;
    let predicted_power = predict(&RegimeQuery::new(*params, eta_model, 2.0, gamma2, j, kernel))
        .ok()
        .map(|p| p.power);
    Ok(DecayCurve {
        times: times.to_vec(),
        values,
        predicted_power,
        fitted_slope: slope,
        intercept,
        fit_window: (wt[0], t1),
        max_residual: resid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// D(t) = ‖|D|^θ u_t‖².
    pub dissipation: Vec<f64>,
}

/// E(t) = ½‖u_t‖² + ½‖|D|^δ u_t‖² + ½‖|D|^α u‖² and D(t) for the linear flow
/// from radial data (û₀, û₁) = (ψ̂₀, ψ̂₁); `None` means zero data.
pub fn energy_curve(
    params: &ModelParams,
    u0: Option<&FrequencyProfile>,
    u1: Option<&FrequencyProfile>,
    times: &[f64],
) -> Result<EnergyCurve> {
    params.validate()?;
    for p in [u0, u1].into_iter().flatten() {
        p.validate()?;
    }
    let n = params.n;
    let eval = |t: f64| -> Result<(f64, f64)> {
        let parts = |r: f64| -> Option<(f64, f64)> {
            let a = u0.map(|p| p.eval(n, r)).unwrap_or(0.0);
            let b = u1.map(|p| p.eval(n, r)).unwrap_or(0.0);
            if a == 0.0 && b == 0.0 {
                return Some((0.0, 0.0));
            }
            let s = kernels(params, t, r).ok()?;
            let u = s.k0.re * a + s.k1.re * b;
            let ut = s.dt_k0.re * a + s.dt_k1.re * b;
            Some((u, ut))
        };
        let splits = structural_splits(params, t, 1.0);
        // the support starts at a jump only if every nonzero datum has one
        let present: Vec<&FrequencyProfile> = [u0, u1].into_iter().flatten().collect();
        let edge = present
            .iter()
            .map(|p| p.lower_edge())
            .collect::<Option<Vec<f64>>>()
            .and_then(|v| v.into_iter().reduce(f64::min));
        let e = radial_integral(
            params,
            |r| match parts(r) {
                Some((u, ut)) => {
                    0.5 * (params.inertia(r) * ut * ut + r.powf(2.0 * params.alpha) * u * u)
                }
                None => f64::NAN,
            },
            edge,
            &splits,
            1e-11,
        )?;
        let d = radial_integral(
            params,
            |r| match parts(r) {
                Some((_, ut)) => r.powf(2.0 * params.theta) * ut * ut,
                None => f64::NAN,
            },
            edge,
            &splits,
            1e-11,
        )?;
        Ok((e, d))
    };
    let pairs: Vec<(f64, f64)> = times.par_iter().map(|&t| eval(t)).collect::<Result<_>>()?;
    Ok(EnergyCurve {
        times: times.to_vec(),
        energy: pairs.iter().map(|p| p.0).collect(),
        dissipation: pairs.iter().map(|p| p.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_norm_at_time_zero() {
        let p = ModelParams::new(1, 2.0, 1.0, 1.0).unwrap();
        let g = FrequencyProfile::Gaussian { width: 1.0 };
        // 2 ∫₀^∞ e^{−r²} dr = √π
        let v = l2_norm_radial(&p, Kernel::K0, 0, 0.0, 0.0, &g).unwrap();
        assert!((v * v - std::f64::consts::PI.sqrt()).abs() < 1e-9);
        assert_eq!(l2_norm_radial(&p, Kernel::K1, 0, 0.0, 0.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn high_pass_closed_form() {
        // K̂₀(0) = 1: ω₁ ∫_c^∞ r^{−(2s+2)} r dr = 2π c^{−2s}/(2s), n = 2
        let p = ModelParams::new(2, 2.0, 0.5, 1.0).unwrap();
        let hp = FrequencyProfile::HighPass { s: 0.75, cutoff: 2.0 };
        let v = l2_norm_radial(&p, Kernel::K0, 0, 0.0, 0.0, &hp).unwrap();
        let exact = 2.0 * std::f64::consts::PI * 2f64.powf(-1.5) / 1.5;
        assert!((v * v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn fit_recovers_power_law() {
        let t = geometric_grid(1.0, 1e4, 20);
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (1.0 + t).powf(-0.7)).collect();
        let (s, i, r) = log_log_fit(&t, &v).unwrap();
        assert!((s + 0.7).abs() < 1e-12);
        assert!((i - 3f64.ln()).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn grid_density_enforced() {
        let p = ModelParams::new(1, 2.0, 1.0, 1.0).unwrap();
        let g = FrequencyProfile::Gaussian { width: 1.0 };
        let coarse = geometric_grid(1.0, 1e2, 5);
        assert!(fit_decay(&p, Kernel::K0, 0, 0.0, &g, 1.0, &coarse).is_err());
    }

    #[test]
    fn lattice_radii_exclude_nyquist() {
        let l = Lattice { n: 1, length: 10.0, modes: 8 };
        assert_eq!(l.radii().len(), 7);
        let l = Lattice { n: 2, length: 10.0, modes: 8 };
        assert_eq!(l.radii().len(), 49);
    }
}
