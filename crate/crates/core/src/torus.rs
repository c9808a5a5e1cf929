//! Pseudospectral solver on the periodic box [−L/2, L/2)ⁿ, n ∈ {1, 2}.
//!
//! Coefficients follow u(x) = Σ_k û_k e^{iξ_k·x} with û = FFT(u)/Nⁿ, so
//! ‖u‖²_{L²} = Lⁿ Σ_k |û_k|². The Nyquist row is held at zero. The linear
//! part is advanced exactly per mode; the forcing |u_t|^p enters through
//! exponential time differencing.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiplier::{propagator_step_matrix, RealStepPropagator};
use crate::params::ModelParams;
use crate::verifier::FrequencyProfile;

/// Blow-up is declared once sup|u_t| exceeds this multiple of its initial value.
pub const BLOW_UP_FACTOR: f64 = 1e6;
/// Step-size refresh period (in steps) of the nonlinear safety rule.
pub const REFRESH_EVERY: usize = 16;
const MAX_HALVINGS: u32 = 60;
const PAR_MIN_LEN: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub n: usize,
    pub length: f64,
    /// Modes per dimension.
    pub modes: usize,
}

impl TorusGrid {
    pub fn new(n: usize, length: f64, modes: usize) -> Result<Self> {
        let g = Self { n, length, modes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) {
            return Err(Error::InvalidArgument(format!("torus dimension must be 1 or 2, got {}", self.n)));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::InvalidArgument(format!("box length must be > 0, got {}", self.length)));
        }
        if self.modes < 4 || !self.modes.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "modes per dimension must be a power of two >= 4, got {}",
                self.modes
            )));
        }
        Ok(())
    }

    /// Number of lattice points Nⁿ.
    pub fn len(&self) -> usize {
        self.modes.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lowest nonzero frequency 2π/L.
    pub fn r_min(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Resolved band edge πN/L.
    pub fn r_max(&self) -> f64 {
        std::f64::consts::PI * self.modes as f64 / self.length
    }

    /// r_min^{−2θ}: past this time the spectral gap dominates the decay.
    ///
    /// For θ = 0 the slow low-frequency mode relaxes like e^{−r^{2α}t}, so
    /// r_min^{−2α} is used instead.
    pub fn horizon(&self, params: &ModelParams) -> f64 {
        let order = if params.theta > 0.0 { params.theta } else { params.alpha };
        self.r_min().powf(-2.0 * order)
    }

    /// Latest end time for decay measurements, a quarter of the horizon.
    pub fn recommended_end(&self, params: &ModelParams) -> f64 {
        0.25 * self.horizon(params)
    }

    pub fn cell_volume(&self) -> f64 {
        (self.length / self.modes as f64).powi(self.n as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.n as i32)
    }

    /// Signed wavenumbers per dimension in FFT order; the Nyquist slot carries −N/2.
    fn wavenumbers(&self) -> Vec<i64> {
        let n = self.modes as i64;
        (0..n).map(|i| if i < n / 2 { i } else { i - n }).collect()
    }

    /// |ξ_k| for every lattice index in FFT order (row-major, last index fastest).
    pub fn radii(&self) -> Vec<f64> {
        let dk = self.r_min();
        let ks = self.wavenumbers();
        match self.n {
            1 => ks.iter().map(|&k| (k as f64 * dk).abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for &a in &ks {
                    for &b in &ks {
                        out.push(dk * ((a * a + b * b) as f64).sqrt());
                    }
                }
                out
            }
        }
    }

    /// True for indices on a Nyquist row (excluded from every field).
    pub fn nyquist_mask(&self) -> Vec<bool> {
        let h = self.modes / 2;
        match self.n {
            1 => (0..self.modes).map(|i| i == h).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for a in 0..self.modes {
                    for b in 0..self.modes {
                        out.push(a == h || b == h);
                    }
                }
                out
            }
        }
    }

    /// Grid point coordinates folded into [−L/2, L/2).
    pub fn points(&self) -> Vec<[f64; 2]> {
        let dx = self.length / self.modes as f64;
        let fold: Vec<f64> = self.wavenumbers().iter().map(|&j| j as f64 * dx).collect();
        match self.n {
            1 => fold.iter().map(|&x| [x, 0.0]).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for &a in &fold {
                    for &b in &fold {
                        out.push([a, b]);
                    }
                }
                out
            }
        }
    }

    /// |x| at every grid point (minimal image).
    pub fn point_radii(&self) -> Vec<f64> {
        self.points().iter().map(|p| p[0].hypot(p[1])).collect()
    }
}

/// Solution pair (û, v̂) with v = u_t.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    pub t: f64,
}

impl SpectralState {
    pub fn zeros(len: usize) -> Self {
        Self {
            u_hat: vec![Complex64::new(0.0, 0.0); len],
            v_hat: vec![Complex64::new(0.0, 0.0); len],
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u_hat.iter().chain(&self.v_hat).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Forcing {
    Off,
    /// |u_t|^p
    Power { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stepping {
    Etd1,
    #[default]
    Etd2,
}

/// Measured norms of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2_u: f64,
    pub l2_ut: f64,
    pub lq_u: f64,
    pub lq_ut: f64,
    pub linf_ut: f64,
    /// ‖|D|^α u‖_{L²}
    pub h_alpha_u: f64,
    /// Spatial mean of u_t.
    pub mean_ut: f64,
}

struct Plans {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(planner: &mut FftPlanner<f64>, size: usize) -> Self {
        Self {
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }
}

fn transform(buf: &mut [Complex64], dim: usize, size: usize, fft: &Arc<dyn Fft<f64>>) {
    fft.process(buf);
    if dim == 2 {
        let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
        transpose(buf, &mut t, size);
        fft.process(&mut t);
        transpose(&t, buf, size);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], size: usize) {
    for i in 0..size {
        for j in 0..size {
            dst[j * size + i] = src[i * size + j];
        }
    }
}

/// Per-mode solver for one grid, parameter set and forcing.
pub struct TorusSolver {
    grid: TorusGrid,
    params: ModelParams,
    forcing: Forcing,
    radii: Vec<f64>,
    inertia: Vec<f64>,
    nyquist: Vec<bool>,
    /// Coarse index → index on the 2× grid (None on Nyquist rows).
    pad_map: Vec<Option<usize>>,
    /// Coarse index of −k.
    neg_index: Vec<usize>,
    coarse: Plans,
    fine: Plans,
    cache: HashMap<u64, Arc<Vec<RealStepPropagator>>>,
}

impl TorusSolver {
    pub fn new(grid: TorusGrid, params: ModelParams, forcing: Forcing) -> Result<Self> {
        grid.validate()?;
        params.validate()?;
        if grid.n != params.n {
            return Err(Error::InvalidArgument(format!(
                "grid dimension {} does not match n = {}",
                grid.n, params.n
            )));
        }
        if let Forcing::Power { p } = forcing {
            if !(p > 1.0) || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("forcing exponent must be > 1, got {p}")));
            }
        }
        let radii = grid.radii();
        let inertia = radii.iter().map(|&r| params.inertia(r)).collect();
        let nyquist = grid.nyquist_mask();
        let n = grid.modes;
        let m = 2 * n;
        let ks = grid.wavenumbers();
        let fine_idx = |k: i64| k.rem_euclid(m as i64) as usize;
        let neg = |i: usize| (n - i) % n;
        let (pad_map, neg_index) = match grid.n {
            1 => (
                (0..n).map(|i| (i != n / 2).then(|| fine_idx(ks[i]))).collect(),
                (0..n).map(neg).collect(),
            ),
            _ => {
                let mut pm = Vec::with_capacity(n * n);
                let mut ni = Vec::with_capacity(n * n);
                for a in 0..n {
                    for b in 0..n {
                        let skip = a == n / 2 || b == n / 2;
                        pm.push((!skip).then(|| fine_idx(ks[a]) * m + fine_idx(ks[b])));
                        ni.push(neg(a) * n + neg(b));
                    }
                }
                (pm, ni)
            }
        };
        let mut planner = FftPlanner::new();
        Ok(Self {
            grid,
            params,
            forcing,
            radii,
            inertia,
            nyquist,
            pad_map,
            neg_index,
            coarse: Plans::new(&mut planner, n),
            fine: Plans::new(&mut planner, m),
            cache: HashMap::new(),
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn forcing(&self) -> Forcing {
        self.forcing
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Data with coefficients û_k = ε ψ̂(|ξ_k|)/Lⁿ, the periodization of the
    /// whole-space field whose transform is ψ̂.
    pub fn state_from_profiles(
        &self,
        u0: Option<&FrequencyProfile>,
        u1: Option<&FrequencyProfile>,
        amplitude: f64,
    ) -> Result<SpectralState> {
        for p in [u0, u1].into_iter().flatten() {
            p.validate()?;
        }
        let scale = amplitude / self.grid.volume();
        let coeffs = |prof: Option<&FrequencyProfile>| -> Vec<Complex64> {
            self.radii
                .iter()
                .zip(&self.nyquist)
                .map(|(&r, &nyq)| match prof {
                    Some(p) if !nyq => Complex64::new(scale * p.eval(self.grid.n, r), 0.0),
                    _ => Complex64::new(0.0, 0.0),
                })
                .collect()
        };
        Ok(SpectralState {
            u_hat: coeffs(u0),
            v_hat: coeffs(u1),
            t: 0.0,
        })
    }

    /// Data from grid values; Nyquist content is discarded.
    pub fn state_from_fields(&self, u0: &[f64], u1: &[f64]) -> Result<SpectralState> {
        if u0.len() != self.grid.len() || u1.len() != self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "fields must have {} grid values",
                self.grid.len()
            )));
        }
        Ok(SpectralState {
            u_hat: self.to_spectral(u0),
            v_hat: self.to_spectral(u1),
            t: 0.0,
        })
    }

    /// û = FFT(u)/Nⁿ with the Nyquist row removed.
    pub fn to_spectral(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        transform(&mut buf, self.grid.n, self.coarse.size, &self.coarse.fwd);
        let norm = 1.0 / self.grid.len() as f64;
        for (z, &nyq) in buf.iter_mut().zip(&self.nyquist) {
            *z = if nyq { Complex64::new(0.0, 0.0) } else { *z * norm };
        }
        buf
    }

    /// Grid values of a coefficient array.
    pub fn to_physical(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        transform(&mut buf, self.grid.n, self.coarse.size, &self.coarse.inv);
        buf.iter().map(|z| z.re).collect()
    }

    /// Values on the 2× oversampled grid.
    pub fn to_physical_fine(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fine.size.pow(self.grid.n as u32)];
        for (c, slot) in coeffs.iter().zip(&self.pad_map) {
            if let Some(i) = slot {
                buf[*i] = *c;
            }
        }
        transform(&mut buf, self.grid.n, self.fine.size, &self.fine.inv);
        buf.iter().map(|z| z.re).collect()
    }

    /// Multiplies each mode by |ξ_k|^a (the zero mode is kept only for a = 0).
    pub fn apply_fractional_symbol(&self, coeffs: &[Complex64], a: f64) -> Result<Vec<Complex64>> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidArgument(format!("symbol order must be >= 0, got {a}")));
        }
        if a == 0.0 {
            return Ok(coeffs.to_vec());
        }
        Ok(coeffs
            .iter()
            .zip(&self.radii)
            .map(|(c, &r)| if r == 0.0 { Complex64::new(0.0, 0.0) } else { c * r.powf(a) })
            .collect())
    }

    /// ĝ = 𝔉[|v|^p]/(1 + |ξ|^{2δ}) and sup|v| on the oversampled grid.
    fn forcing_hat(&self, v_hat: &[Complex64], p: f64) -> (Vec<Complex64>, f64) {
        let v = self.to_physical_fine(v_hat);
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut buf: Vec<Complex64> = v
            .iter()
            .map(|x| {
                let a = x.abs();
                // integer powers keep the forcing polynomial in v
                let w = if p.fract() == 0.0 && p < 64.0 { a.powi(p as i32) } else { a.powf(p) };
                Complex64::new(w, 0.0)
            })
            .collect();
        transform(&mut buf, self.grid.n, self.fine.size, &self.fine.fwd);
        let norm = 1.0 / buf.len() as f64;
        let mut g: Vec<Complex64> = self
            .pad_map
            .iter()
            .map(|slot| slot.map(|i| buf[i] * norm).unwrap_or_default())
            .collect();
        let sym: Vec<Complex64> = (0..g.len())
            .map(|i| 0.5 * (g[i] + g[self.neg_index[i]].conj()))
            .collect();
        for ((gi, si), w) in g.iter_mut().zip(sym).zip(&self.inertia) {
            *gi = si / w;
        }
        (g, sup)
    }

    /// Per-mode propagators for step size `h`, cached by the bit pattern of h.
    pub fn propagators(&mut self, h: f64) -> Result<Arc<Vec<RealStepPropagator>>> {
        if let Some(p) = self.cache.get(&h.to_bits()) {
            return Ok(p.clone());
        }
        let params = self.params;
        let props: Vec<RealStepPropagator> = self
            .radii
            .par_iter()
            .with_min_len(256)
            .map(|&r| propagator_step_matrix(&params, h, r).map(|s| s.to_real()))
            .collect::<Result<_>>()?;
        let props = Arc::new(props);
        if self.cache.len() > 64 {
            self.cache.clear();
        }
        self.cache.insert(h.to_bits(), props.clone());
        Ok(props)
    }

    /// Advances `state` by `h`; returns sup|u_t| at the start of the step
    /// (zero when the forcing is off).
    pub fn step(&mut self, state: &mut SpectralState, h: f64, stepping: Stepping) -> Result<f64> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be > 0, got {h}")));
        }
        if !state.is_finite() {
            return Err(Error::BlowUpDetected { t: state.t });
        }
        let props = self.propagators(h)?;
        let (g0, sup) = match self.forcing {
            Forcing::Off => (None, 0.0),
            Forcing::Power { p } => {
                let (g, s) = self.forcing_hat(&state.v_hat, p);
                (Some(g), s)
            }
        };
        advance(&mut state.u_hat, &mut state.v_hat, &props, g0.as_deref(), |p| p.duhamel);
        if let (Stepping::Etd2, Forcing::Power { p }, Some(g0)) = (stepping, self.forcing, &g0) {
            let (g1, _) = self.forcing_hat(&state.v_hat, p);
            let diff: Vec<Complex64> = g1.iter().zip(g0).map(|(a, b)| a - b).collect();
            add_column(&mut state.u_hat, &mut state.v_hat, &props, &diff, |p| p.correction);
        }
        state.t += h;
        if !state.is_finite() {
            return Err(Error::BlowUpDetected { t: state.t });
        }
        Ok(sup)
    }

    /// (Σ |f|^κ dV)^{1/κ} on the oversampled grid; κ = ∞ gives the grid max.
    pub fn lebesgue_norm(&self, coeffs: &[Complex64], kappa: f64) -> Result<f64> {
        if !(kappa >= 1.0) {
            return Err(Error::InvalidArgument(format!("Lebesgue index must be >= 1, got {kappa}")));
        }
        let f = self.to_physical_fine(coeffs);
        if kappa.is_infinite() {
            return Ok(f.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
        let dv = (self.grid.length / self.fine.size as f64).powi(self.grid.n as i32);
        let s: f64 = f.iter().map(|x| x.abs().powf(kappa)).sum();
        Ok((s * dv).powf(1.0 / kappa))
    }

    /// ‖|D|^s u‖_{L²} by Parseval.
    pub fn sobolev_seminorm(&self, coeffs: &[Complex64], s: f64) -> f64 {
        let sum: f64 = coeffs
            .iter()
            .zip(&self.radii)
            .map(|(c, &r)| {
                let w = if s == 0.0 { 1.0 } else { r.powf(s) };
                w * w * c.norm_sqr()
            })
            .sum();
        (self.grid.volume() * sum).sqrt()
    }

    pub fn norms(&self, state: &SpectralState, q: f64) -> Result<Norms> {
        Ok(Norms {
            l2_u: self.sobolev_seminorm(&state.u_hat, 0.0),
            l2_ut: self.sobolev_seminorm(&state.v_hat, 0.0),
            lq_u: self.lebesgue_norm(&state.u_hat, q)?,
            lq_ut: self.lebesgue_norm(&state.v_hat, q)?,
            linf_ut: self.lebesgue_norm(&state.v_hat, f64::INFINITY)?,
            h_alpha_u: self.sobolev_seminorm(&state.u_hat, self.params.alpha),
            mean_ut: state.v_hat[0].re,
        })
    }

    /// E = ½‖u_t‖² + ½‖|D|^δ u_t‖² + ½‖|D|^α u‖² and D = ‖|D|^θ u_t‖².
    pub fn energy(&self, state: &SpectralState) -> (f64, f64) {
        let (mut e, mut d) = (0.0, 0.0);
        for ((u, v), (&r, &w)) in state
            .u_hat
            .iter()
            .zip(&state.v_hat)
            .zip(self.radii.iter().zip(&self.inertia))
        {
            let ra = if r == 0.0 { 0.0 } else { r.powf(2.0 * self.params.alpha) };
            let rt = if self.params.theta == 0.0 { 1.0 } else { r.powf(2.0 * self.params.theta) };
            e += 0.5 * (w * v.norm_sqr() + ra * u.norm_sqr());
            d += rt * v.norm_sqr();
        }
        let vol = self.grid.volume();
        (e * vol, d * vol)
    }
}

fn advance(
    u: &mut [Complex64],
    v: &mut [Complex64],
    props: &[RealStepPropagator],
    forcing: Option<&[Complex64]>,
    column: impl Fn(&RealStepPropagator) -> [f64; 2] + Sync,
) {
    let body = |(i, (ui, vi)): (usize, (&mut Complex64, &mut Complex64))| {
        let m = &props[i].matrix;
        let (a, b) = (*ui, *vi);
        let mut nu = a * m[0][0] + b * m[0][1];
        let mut nv = a * m[1][0] + b * m[1][1];
        if let Some(g) = forcing {
            let c = column(&props[i]);
            nu += g[i] * c[0];
            nv += g[i] * c[1];
        }
        *ui = nu;
        *vi = nv;
    };
    if u.len() >= PAR_MIN_LEN {
        u.par_iter_mut().zip(v.par_iter_mut()).enumerate().for_each(body);
    } else {
        u.iter_mut().zip(v.iter_mut()).enumerate().for_each(body);
    }
}

fn add_column(
    u: &mut [Complex64],
    v: &mut [Complex64],
    props: &[RealStepPropagator],
    g: &[Complex64],
    column: impl Fn(&RealStepPropagator) -> [f64; 2],
) {
    for (i, (ui, vi)) in u.iter_mut().zip(v.iter_mut()).enumerate() {
        let c = column(&props[i]);
        *ui += g[i] * c[0];
        *vi += g[i] * c[1];
    }
}

/// Weighted sup-in-time norm terms; `None` marks terms absent for θ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormMonitor {
    pub params: ModelParams,
    pub m: f64,
    pub q: f64,
}

impl NormMonitor {
    pub fn new(params: ModelParams, m: f64, q: f64) -> Result<Self> {
        params.validate()?;
        if !(1.0..=2.0).contains(&m) {
            return Err(Error::InvalidArgument(format!("m must lie in [1, 2], got {m}")));
        }
        if !(q >= 2.0) {
            return Err(Error::InvalidArgument(format!("q must be >= 2, got {q}")));
        }
        Ok(Self { params, m, q })
    }

    pub fn terms(&self, t: f64, norms: &Norms) -> [Option<f64>; 5] {
        let p = &self.params;
        let w = 1.0 + t;
        if p.theta == 0.0 {
            return [
                Some(norms.l2_u),
                Some(w.sqrt() * norms.h_alpha_u),
                None,
                Some(w * norms.l2_ut),
                None,
            ];
        }
        let a = p.n as f64 / (2.0 * p.theta);
        let s2 = 1.0 / self.m - 0.5;
        let sq = 1.0 / self.m - 1.0 / self.q;
        let log_weight = if p.alpha > 2.0 * p.theta {
            1.0 / (std::f64::consts::E + t).ln()
        } else {
            1.0
        };
        let e2 = (p.n as f64 * s2 + p.alpha - 2.0 * p.theta) / (2.0 * (p.alpha - p.theta));
        [
            Some(w.powf(-1.0 + a * s2) * norms.l2_u),
            Some(w.powf(e2) * log_weight * norms.h_alpha_u),
            Some(w.powf(-1.0 + a * sq) * norms.lq_u),
            Some(w.powf(a * s2) * norms.l2_ut),
            Some(w.powf(a * sq) * norms.lq_ut),
        ]
    }
}

/// One semilinear or linear run on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: TorusGrid,
    pub forcing: Forcing,
    /// Data integrability index of the monitor weights.
    pub m: f64,
    pub q: f64,
    pub u0: Option<FrequencyProfile>,
    pub u1: Option<FrequencyProfile>,
    /// ε in (u₀, u₁) = ε·(profiles).
    pub amplitude: f64,
    pub t_end: f64,
    pub output_every: f64,
    /// Upper bound on the step; the safety rule may halve it further.
    pub h_max: f64,
    #[serde(default)]
    pub stepping: Stepping,
    /// Store u_t on the grid at every output time.
    #[serde(default)]
    pub snapshots: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        NormMonitor::new(self.params, self.m, self.q)?;
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")))
            }
        };
        pos("t_end", self.t_end)?;
        pos("output_every", self.output_every)?;
        pos("h_max", self.h_max)?;
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument("amplitude must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Verdict {
    /// Every monitor term stayed below twice its value at t = 1.
    BoundedZNorm,
    BlowUpAt { t: f64 },
    /// Reached t_end without the bounded-monitor property.
    HorizonReached,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::BoundedZNorm => write!(f, "bounded_Z_norm"),
            Verdict::BlowUpAt { t } => write!(f, "blow_up_at({t})"),
            Verdict::HorizonReached => write!(f, "horizon_reached"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub norms: Norms,
    pub z: [Option<f64>; 5],
}

/// u_t on the grid at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub ut: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub config: RunConfig,
    pub horizon: f64,
    pub rows: Vec<RecordRow>,
    pub verdict: Verdict,
    pub snapshots: Vec<Snapshot>,
    pub initial: SpectralState,
    pub steps: usize,
}

impl ExperimentRecord {
    /// Per term: max over t ≥ 1 divided by the value at the output time nearest 1.
    pub fn z_growth(&self) -> [Option<f64>; 5] {
        let mut out = [None; 5];
        let Some(base) = self
            .rows
            .iter()
            .min_by(|a, b| (a.t - 1.0).abs().total_cmp(&(b.t - 1.0).abs()))
        else {
            return out;
        };
        for (i, slot) in out.iter_mut().enumerate() {
            let Some(b) = base.z[i] else { continue };
            let max = self
                .rows
                .iter()
                .filter(|r| r.t >= base.t)
                .filter_map(|r| r.z[i])
                .fold(0.0f64, f64::max);
            *slot = Some(if b > 0.0 { max / b } else if max == 0.0 { 1.0 } else { f64::INFINITY });
        }
        out
    }

    /// Columns t, E, L2_u, L2_ut, Lq_ut, Halpha_u, Z_term_1..5, verdict; the
    /// verdict is filled on the last row only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t", "E", "L2_u", "L2_ut", "Lq_ut", "Halpha_u", "Z_term_1", "Z_term_2", "Z_term_3",
            "Z_term_4", "Z_term_5", "verdict",
        ])?;
        let last = self.rows.len().saturating_sub(1);
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![
                r.t.to_string(),
                r.energy.to_string(),
                r.norms.l2_u.to_string(),
                r.norms.l2_ut.to_string(),
                r.norms.lq_ut.to_string(),
                r.norms.h_alpha_u.to_string(),
            ];
            rec.extend(r.z.iter().map(|z| z.map(|v| v.to_string()).unwrap_or_default()));
            rec.push(if i == last { self.verdict.to_string() } else { String::new() });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates to `t_end` or blow-up, recording monitors at every output time.
///
/// Steps are H/2^k with H = min(output_every, h_max) aligned to the outputs;
/// k is the least level meeting h ≤ h_max·min(1, sup|u_t|^{1−p}), refreshed
/// every [`REFRESH_EVERY`] steps.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let mut solver = TorusSolver::new(config.grid, config.params, config.forcing)?;
    let monitor = NormMonitor::new(config.params, config.m, config.q)?;
    let mut state = solver.state_from_profiles(config.u0.as_ref(), config.u1.as_ref(), config.amplitude)?;
    let initial = state.clone();

    let record_row = |solver: &TorusSolver, state: &SpectralState| -> Result<RecordRow> {
        let norms = solver.norms(state, config.q)?;
        let (energy, dissipation) = solver.energy(state);
        Ok(RecordRow {
            t: state.t,
            energy,
            dissipation,
            norms,
            z: monitor.terms(state.t, &norms),
        })
    };
    let mut rows = vec![record_row(&solver, &state)?];
    let mut snapshots = Vec::new();
    if config.snapshots {
        snapshots.push(Snapshot { t: 0.0, ut: solver.to_physical(&state.v_hat) });
    }
    let sup0 = rows[0].norms.linf_ut;
    // the last interval may be shorter so the run ends exactly at t_end
    let outputs = (config.t_end / config.output_every - 1e-9).ceil().max(1.0) as usize;
    let safety = |sup: f64| match config.forcing {
        Forcing::Power { p } if sup > 0.0 => config.h_max * sup.powf(1.0 - p).min(1.0),
        _ => f64::INFINITY,
    };

    let mut steps = 0usize;
    let mut blow_up = None;
    'outer: for k in 1..=outputs {
        let target = (k as f64 * config.output_every).min(config.t_end);
        let interval = target - state.t;
        let base_sub = (interval / config.h_max - 1e-9).ceil().max(1.0) as u64;
        let base_h = interval / base_sub as f64;
        let mut level = 0u32;
        let mut sup = solver.lebesgue_norm(&state.v_hat, f64::INFINITY)?;
        while base_h / 2f64.powi(level as i32) > safety(sup) {
            level += 1;
        }
        let mut remaining = base_sub << level;
        let mut since_refresh = 0;
        while remaining > 0 {
            if level > MAX_HALVINGS {
                blow_up = Some(state.t);
                break 'outer;
            }
            let h = base_h / 2f64.powi(level as i32);
            match solver.step(&mut state, h, config.stepping) {
                Ok(s) => sup = s,
                Err(Error::BlowUpDetected { t }) => {
                    blow_up = Some(t);
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            steps += 1;
            remaining -= 1;
            since_refresh += 1;
            if matches!(config.forcing, Forcing::Power { .. }) && sup0 > 0.0 && sup > BLOW_UP_FACTOR * sup0 {
                blow_up = Some(state.t);
                break 'outer;
            }
            if since_refresh == REFRESH_EVERY && remaining > 0 {
                since_refresh = 0;
                sup = solver.lebesgue_norm(&state.v_hat, f64::INFINITY)?;
                while base_h / 2f64.powi(level as i32) > safety(sup) && level <= MAX_HALVINGS {
                    level += 1;
                    remaining *= 2;
                }
            }
        }
        state.t = target;
        let row = record_row(&solver, &state)?;
        if matches!(config.forcing, Forcing::Power { .. }) && sup0 > 0.0 && row.norms.linf_ut > BLOW_UP_FACTOR * sup0 {
            rows.push(row);
            blow_up = Some(state.t);
            break;
        }
        rows.push(row);
        if config.snapshots {
            snapshots.push(Snapshot { t: state.t, ut: solver.to_physical(&state.v_hat) });
        }
    }

    let mut record = ExperimentRecord {
        config: config.clone(),
        horizon: config.grid.horizon(&config.params),
        rows,
        verdict: Verdict::HorizonReached,
        snapshots,
        initial,
        steps,
    };
    record.verdict = match blow_up {
        Some(t) => Verdict::BlowUpAt { t },
        None => {
            let bounded = record.z_growth().iter().flatten().all(|&g| g <= 2.0);
            if bounded {
                Verdict::BoundedZNorm
            } else {
                Verdict::HorizonReached
            }
        }
    };
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(n: usize) -> TorusSolver {
        let p = ModelParams::new(n, 2.0, 1.0, 1.0).unwrap();
        TorusSolver::new(TorusGrid::new(n, 20.0, 32).unwrap(), p, Forcing::Power { p: 2.0 }).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = TorusGrid::new(1, 10.0, 8).unwrap();
        assert_eq!(g.radii()[1], g.r_min());
        assert!(g.nyquist_mask()[4]);
        let pts = g.points();
        assert_eq!(pts[5][0], -3.75);
        assert!(TorusGrid::new(3, 1.0, 8).is_err());
        assert!(TorusGrid::new(1, 1.0, 12).is_err());
    }

    #[test]
    fn spectral_round_trip() {
        for n in [1, 2] {
            let s = solver(n);
            let pts = s.grid().point_radii();
            let f: Vec<f64> = pts.iter().map(|r| (-r * r / 4.0).exp()).collect();
            let back = s.to_physical(&s.to_spectral(&f));
            for (a, b) in f.iter().zip(&back) {
                // the Nyquist content of this Gaussian is ~e^{−25}
                assert!((a - b).abs() < 1e-10, "n={n} {a} {b}");
            }
        }
    }

    #[test]
    fn constant_forcing_mode() {
        // v ≡ 1 ⇒ |v|² ≡ 1 ⇒ ĝ = δ_{k0}
        let s = solver(1);
        let mut v = vec![Complex64::new(0.0, 0.0); 32];
        v[0] = Complex64::new(1.0, 0.0);
        let (g, sup) = s.forcing_hat(&v, 2.0);
        assert!((sup - 1.0).abs() < 1e-14);
        assert!((g[0].re - 1.0).abs() < 1e-14);
        assert!(g[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn verdict_strings() {
        assert_eq!(Verdict::BoundedZNorm.to_string(), "bounded_Z_norm");
        assert_eq!(Verdict::BlowUpAt { t: 2.5 }.to_string(), "blow_up_at(2.5)");
    }
}
