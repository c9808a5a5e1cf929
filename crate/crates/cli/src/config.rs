//! Experiment configuration files (TOML, `schema = 1`) and their resolution
//! into concrete plans.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use strucdamp_core::verifier::geometric_grid;
use strucdamp_core::{
    Forcing, FrequencyProfile, Kernel, ModelParams, RegimeQuery, RunConfig, Stepping, TorusGrid,
};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LinearVerify,
    SemilinearRun,
    RateTable,
    TestfnDiagnostic,
    LemmaCheck,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::LinearVerify => "linear_verify",
            Mode::SemilinearRun => "semilinear_run",
            Mode::RateTable => "rate_table",
            Mode::TestfnDiagnostic => "testfn_diagnostic",
            Mode::LemmaCheck => "lemma_check",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub length: Option<f64>,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub u0: Option<FrequencyProfile>,
    pub u1: Option<FrequencyProfile>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub t_end: Option<f64>,
    pub output_every: Option<f64>,
    pub h_max: Option<f64>,
    pub stepping: Option<Stepping>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSection {
    pub kernel: Option<Kernel>,
    pub j: Option<u8>,
    pub gamma2: Option<f64>,
    pub profile: Option<FrequencyProfile>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub per_decade: Option<usize>,
    /// Allowed |fitted − predicted| slope difference.
    pub tolerance: Option<f64>,
}

/// Parameter grid of a rate table; an empty list falls back to the model value
/// (or the default for kernel, j, eta, q, gamma2).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel: Vec<Kernel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub j: Vec<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma2: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestfnSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSection {
    pub kappa: Option<f64>,
    pub mu: Option<f64>,
    pub t_max: Option<f64>,
    pub per_decade: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub mode: Mode,
    pub name: Option<String>,
    /// Expected verdict; the run exits with status 2 when it differs.
    pub expect: Option<String>,
    pub m: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub data: DataSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub schedule: ScheduleSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub linear: LinearSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub rates: RatesSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub testfn: TestfnSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub lemma: LemmaSection,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            schema: SCHEMA,
            mode,
            name: None,
            expect: None,
            m: None,
            p: None,
            q: None,
            model: ModelSection::default(),
            grid: GridSection::default(),
            data: DataSection::default(),
            schedule: ScheduleSection::default(),
            linear: LinearSection::default(),
            rates: RatesSection::default(),
            testfn: TestfnSection::default(),
            lemma: LemmaSection::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        if cfg.schema != SCHEMA {
            bail!("{}: unsupported schema = {} (expected {SCHEMA})", path.display(), cfg.schema);
        }
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.mode.as_str().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unserializable config: {e}>"))
    }

    pub fn model(&self) -> Result<ModelParams> {
        let m = &self.model;
        let field = |name: &str, v: Option<f64>| v.ok_or_else(|| anyhow!("missing field model.{name}"));
        let n = m.n.ok_or_else(|| anyhow!("missing field model.n"))?;
        Ok(ModelParams::new(
            n,
            field("alpha", m.alpha)?,
            field("theta", m.theta)?,
            field("delta", m.delta)?,
        )?)
    }

    fn require(&self, name: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| anyhow!("mode {} needs field `{name}`", self.mode.as_str()))
    }

    pub fn resolve(&self) -> Result<Plan> {
        for q in self.q.iter().chain(&self.rates.q) {
            check_q(*q)?;
        }
        match self.mode {
            Mode::LinearVerify => self.resolve_linear(),
            Mode::SemilinearRun => Ok(Plan::Semilinear(self.run_config(None)?)),
            Mode::TestfnDiagnostic => self.resolve_testfn(),
            Mode::RateTable => self.resolve_rates(),
            Mode::LemmaCheck => self.resolve_lemma(),
        }
    }

    fn resolve_linear(&self) -> Result<Plan> {
        let params = self.model()?;
        let l = &self.linear;
        let kernel = l.kernel.ok_or_else(|| anyhow!("mode linear_verify needs field `linear.kernel`"))?;
        let j = l.j.ok_or_else(|| anyhow!("mode linear_verify needs field `linear.j`"))?;
        let t_min = l.t_min.unwrap_or(1e2);
        let t_max = l.t_max.unwrap_or(1e4);
        if !(t_min > 0.0 && t_max > t_min) {
            bail!("need 0 < linear.t_min < linear.t_max, got {t_min}, {t_max}");
        }
        Ok(Plan::Linear {
            params,
            kernel,
            j,
            gamma2: l.gamma2.unwrap_or(0.0),
            profile: l.profile.unwrap_or(FrequencyProfile::Gaussian { width: 1.0 }),
            times: geometric_grid(t_min, t_max, l.per_decade.unwrap_or(20)),
            tolerance: l.tolerance.unwrap_or(0.05),
        })
    }

    fn resolve_testfn(&self) -> Result<Plan> {
        let radii = self.testfn.radii.clone();
        if radii.is_empty() {
            bail!("mode testfn_diagnostic needs field `testfn.radii`");
        }
        let params = self.model()?;
        let kappa = (2.0 * params.theta).min(params.alpha);
        let reach = radii.iter().map(|r| r.powf(kappa)).fold(0.0, f64::max);
        let mut run = self.run_config(Some(reach))?;
        run.snapshots = true;
        Ok(Plan::Testfn { run, radii })
    }

    /// Torus run from the model, grid, data and schedule sections. `default_end`
    /// replaces the horizon-based default of `schedule.t_end`.
    fn run_config(&self, default_end: Option<f64>) -> Result<RunConfig> {
        let params = self.model()?;
        let m = self.require("m", self.m)?;
        let p = self.require("p", self.p)?;
        let q = self.require("q", self.q)?;
        let length = self.require("grid.length", self.grid.length)?;
        let modes = self
            .grid
            .modes
            .ok_or_else(|| anyhow!("mode {} needs field `grid.modes`", self.mode.as_str()))?;
        let grid = TorusGrid::new(params.n, length, modes)?;
        if self.data.u0.is_none() && self.data.u1.is_none() {
            bail!("mode {} needs `data.u0` or `data.u1`", self.mode.as_str());
        }
        let s = &self.schedule;
        let t_end = s
            .t_end
            .or(default_end)
            .unwrap_or_else(|| grid.recommended_end(&params));
        let config = RunConfig {
            params,
            grid,
            forcing: Forcing::Power { p },
            m,
            q,
            u0: self.data.u0,
            u1: self.data.u1,
            amplitude: self.require("data.amplitude", self.data.amplitude)?,
            t_end,
            output_every: s.output_every.unwrap_or(t_end / 200.0),
            h_max: s.h_max.unwrap_or(0.1),
            stepping: s.stepping.unwrap_or_default(),
            snapshots: false,
        };
        config.validate()?;
        Ok(config)
    }

    fn resolve_rates(&self) -> Result<Plan> {
        let r = &self.rates;
        let m = &self.model;
        let or_model = |list: &[f64], v: Option<f64>, name: &str| -> Result<Vec<f64>> {
            if !list.is_empty() {
                Ok(list.to_vec())
            } else {
                v.map(|x| vec![x])
                    .ok_or_else(|| anyhow!("rate_table needs `rates.{name}` or `model.{name}`"))
            }
        };
        let ns = if r.n.is_empty() {
            vec![m.n.ok_or_else(|| anyhow!("rate_table needs `rates.n` or `model.n`"))?]
        } else {
            r.n.clone()
        };
        let alphas = or_model(&r.alpha, m.alpha, "alpha")?;
        let thetas = or_model(&r.theta, m.theta, "theta")?;
        let deltas = or_model(&r.delta, m.delta, "delta")?;
        let kernels = if r.kernel.is_empty() { vec![Kernel::K0, Kernel::K1] } else { r.kernel.clone() };
        let js = if r.j.is_empty() { vec![0, 1] } else { r.j.clone() };
        let etas = if r.eta.is_empty() { vec![1.0] } else { r.eta.clone() };
        let qs = if r.q.is_empty() { vec![self.q.unwrap_or(2.0)] } else { r.q.clone() };
        let gammas = if r.gamma2.is_empty() { vec![0.0] } else { r.gamma2.clone() };

        let mut rows = Vec::new();
        for &n in &ns {
            for &alpha in &alphas {
                for &theta in &thetas {
                    for &delta in &deltas {
                        let params = ModelParams { n, alpha, theta, delta };
                        for &kernel in &kernels {
                            for &j in &js {
                                for &eta in &etas {
                                    for &q in &qs {
                                        for &gamma2 in &gammas {
                                            rows.push(RegimeQuery::new(params, eta, q, gamma2, j, kernel));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Plan::Rates(rows))
    }

    fn resolve_lemma(&self) -> Result<Plan> {
        let l = &self.lemma;
        let kappa = l.kappa.ok_or_else(|| anyhow!("mode lemma_check needs field `lemma.kappa`"))?;
        let mu = l.mu.ok_or_else(|| anyhow!("mode lemma_check needs field `lemma.mu`"))?;
        let t_max = l.t_max.unwrap_or(1e4);
        if t_max.is_nan() || t_max <= 1.0 {
            bail!("lemma.t_max must exceed 1, got {t_max}");
        }
        Ok(Plan::Lemma {
            kappa,
            mu,
            times: geometric_grid(1.0, t_max, l.per_decade.unwrap_or(10)),
        })
    }
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

pub fn check_q(q: f64) -> Result<()> {
    if q >= 2.0 {
        Ok(())
    } else {
        bail!("q = {q} is out of range: q must lie in [2, ∞], the range of the L^q decay estimates behind global existence")
    }
}

#[derive(Debug, Clone)]
pub enum Plan {
    Linear {
        params: ModelParams,
        kernel: Kernel,
        j: u8,
        gamma2: f64,
        profile: FrequencyProfile,
        times: Vec<f64>,
        tolerance: f64,
    },
    Semilinear(RunConfig),
    Rates(Vec<RegimeQuery>),
    Testfn {
        run: RunConfig,
        radii: Vec<f64>,
    },
    Lemma {
        kappa: f64,
        mu: f64,
        times: Vec<f64>,
    },
}
