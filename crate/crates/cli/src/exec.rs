//! Runs one resolved plan and renders its CSV body.

use anyhow::Result;
use strucdamp_core::{
    build_test_functions, duhamel_bound_check, fit_decay, predict, run_experiment, testfn_functional,
    DecayPrediction, Error, Forcing, GDecay, LogFactor, RegimeQuery, Verdict,
};

use crate::config::Plan;

pub struct Outcome {
    /// Short verdict compared against `expect`.
    pub verdict: String,
    pub detail: String,
    pub body: Vec<u8>,
}

pub fn execute(plan: &Plan) -> Result<Outcome> {
    match plan {
        Plan::Linear {
            params,
            kernel,
            j,
            gamma2,
            profile,
            times,
            tolerance,
        } => {
            let curve = fit_decay(params, *kernel, *j, *gamma2, profile, 1.0, times)?;
            let mut body = Vec::new();
            curve.write_csv(&mut body)?;
            let (verdict, detail) = match curve.predicted_power {
                Some(pred) => {
                    let err = (curve.fitted_slope - pred).abs();
                    let v = if err <= *tolerance { "match" } else { "mismatch" };
                    (v, format!("slope {:.4} vs predicted {pred:.4}", curve.fitted_slope))
                }
                None => ("no_prediction", format!("slope {:.4}", curve.fitted_slope)),
            };
            Ok(Outcome {
                verdict: verdict.into(),
                detail,
                body,
            })
        }
        Plan::Semilinear(run) => {
            let record = run_experiment(run)?;
            let mut body = Vec::new();
            record.write_csv(&mut body)?;
            let last_t = record.rows.last().map(|r| r.t).unwrap_or(0.0);
            Ok(Outcome {
                verdict: verdict_kind(&record.verdict).into(),
                detail: format!("{} after {} steps, last output t = {last_t}", record.verdict, record.steps),
                body,
            })
        }
        Plan::Rates(queries) => rate_table(queries),
        Plan::Testfn { run, radii } => {
            let Forcing::Power { p } = run.forcing else {
                unreachable!("testfn plans always carry a power nonlinearity")
            };
            let pr = &run.params;
            let pair = build_test_functions(pr.n, p, pr.delta, pr.theta, pr.alpha)?;
            let record = run_experiment(run)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["R", "kappa", "I_R", "bound_term", "data_term", "constant", "margin", "contradiction", "note"])?;
            let mut any = false;
            for &r in radii {
                match testfn_functional(&pair, &record, r) {
                    Ok(tri) => {
                        any |= tri.contradiction();
                        w.write_record([
                            r.to_string(),
                            tri.kappa.to_string(),
                            tri.i_r.to_string(),
                            tri.bound_term.to_string(),
                            tri.data_term.to_string(),
                            tri.constant.to_string(),
                            tri.margin().to_string(),
                            tri.contradiction().to_string(),
                            String::new(),
                        ])?;
                    }
                    Err(e @ Error::InsufficientCoverage { .. }) => {
                        let mut row = vec![r.to_string()];
                        row.extend(std::iter::repeat_n(String::new(), 7));
                        row.push(e.to_string());
                        w.write_record(row)?;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(Outcome {
                verdict: if any { "contradiction" } else { "no_contradiction" }.into(),
                detail: format!("C = {:.4e}, run {}", pair.constant(), record.verdict),
                body: w.into_inner()?,
            })
        }
        Plan::Lemma { kappa, mu, times } => {
            let check = duhamel_bound_check(*kappa, *mu, times)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["t", "integral", "ratio"])?;
            for s in &check.samples {
                w.write_record([s.t.to_string(), s.integral.to_string(), s.ratio.to_string()])?;
            }
            Ok(Outcome {
                verdict: if check.bounded { "bounded" } else { "unbounded" }.into(),
                detail: format!("max ratio {:.4}", check.max_ratio),
                body: w.into_inner()?,
            })
        }
    }
}

/// Verdict without the blow-up time, for comparison against `expect`.
pub fn verdict_kind(v: &Verdict) -> &'static str {
    match v {
        Verdict::BoundedZNorm => "bounded_Z_norm",
        Verdict::BlowUpAt { .. } => "blow_up",
        Verdict::HorizonReached => "horizon_reached",
    }
}

pub const RATE_COLUMNS: [&str; 16] = [
    "n",
    "alpha",
    "theta",
    "delta",
    "kernel",
    "j",
    "eta",
    "q",
    "gamma2",
    "power",
    "log_factor",
    "case_label",
    "sobolev_requirement",
    "g_power",
    "g_beta",
    "error",
];

fn log_factor_str(l: LogFactor) -> &'static str {
    match l {
        LogFactor::None => "none",
        LogFactor::Log => "log",
        LogFactor::LogInverseHandledElsewhere => "log_inverse",
    }
}

fn rate_row(q: &RegimeQuery, pred: Option<&DecayPrediction>, error: &str) -> Vec<String> {
    let p = &q.params;
    let mut row = vec![
        p.n.to_string(),
        p.alpha.to_string(),
        p.theta.to_string(),
        p.delta.to_string(),
        format!("{:?}", q.kernel),
        q.j.to_string(),
        q.eta.to_string(),
        q.q.to_string(),
        q.gamma2.to_string(),
    ];
    match pred {
        Some(d) => {
            let (gp, gb) = match d.g_decay {
                GDecay::Exponential => (String::new(), String::new()),
                GDecay::Power { power, beta } => (power.to_string(), beta.to_string()),
            };
            row.extend([
                d.power.to_string(),
                log_factor_str(d.log_factor).to_string(),
                d.case_label.as_str().to_string(),
                d.sobolev_requirement.to_string(),
                gp,
                gb,
            ]);
        }
        None => row.extend(std::iter::repeat_n(String::new(), 6)),
    }
    row.push(error.to_string());
    row
}

fn rate_table(queries: &[RegimeQuery]) -> Result<Outcome> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATE_COLUMNS)?;
    let mut rejected = 0;
    for q in queries {
        match predict(q) {
            Ok(d) => w.write_record(rate_row(q, Some(&d), ""))?,
            Err(e) => {
                rejected += 1;
                w.write_record(rate_row(q, None, &e.to_string()))?;
            }
        }
    }
    let ok = queries.len() - rejected;
    Ok(Outcome {
        verdict: if ok > 0 { "ok" } else { "empty" }.into(),
        detail: format!("{ok} predictions, {rejected} rejected"),
        body: w.into_inner()?,
    })
}
