// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod jet;
pub mod multiplier;
pub mod params;
pub mod phi;
pub mod quadrature;
pub mod rates;
pub mod testfn;
pub mod torus;
pub mod verifier;

pub use error::{Error, Result};
pub use multiplier::{
    eigenvalues, kernels, propagator_step_matrix, Kernel, KernelSample, ModeCoefficients,
    StepPropagator,
};
pub use params::{ModelParams, Regime};
pub use testfn::{build_test_functions, testfn_functional, InequalityTriple, TestFunctionPair};
pub use rates::{
    admissibility, critical_exponent, duhamel_bound_check, m_zero, predict, Admissibility,
    AdmissibilityVerdict, CaseLabel, DecayPrediction, GDecay, LogFactor, RegimeQuery,
};
pub use verifier::{
    energy_curve, fit_decay, l2_norm_radial, DecayCurve, EnergyCurve, FrequencyProfile,
};
pub use torus::{run_experiment, ExperimentRecord, Forcing, NormMonitor, RunConfig, SpectralState, Stepping, TorusGrid, TorusSolver, Verdict};
