mod config;
mod exec;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use strucdamp_core::{admissibility, Kernel, Stepping};

use config::{ExperimentConfig, Mode};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "strucdamp", version, about = "Run decay, blow-up and rate experiments for structurally damped waves")]
struct Cli {
    /// Output directory for experiment CSVs and summary.csv.
    #[arg(long, global = true, env = "STRUCDAMP_OUT")]
    out: Option<PathBuf>,

    /// Experiments run concurrently (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run config files, each in the mode it names.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        set: Overrides,
    },
    /// Fit a linear decay slope by radial quadrature and compare with the rate table.
    VerifyLinear {
        configs: Vec<PathBuf>,
        #[command(flatten)]
        set: Overrides,
    },
    /// Tabulate predicted decay rates over a parameter grid.
    Rates {
        configs: Vec<PathBuf>,
        #[command(flatten)]
        set: Overrides,
    },
    /// Evaluate the test-function inequality on a stored torus run.
    Testfn {
        configs: Vec<PathBuf>,
        #[command(flatten)]
        set: Overrides,
    },
    /// Check boundedness of the Duhamel convolution ratio.
    Lemma {
        configs: Vec<PathBuf>,
        #[command(flatten)]
        set: Overrides,
    },
}

/// Flags that replace the corresponding config fields.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    expect: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Target index; `inf` allowed.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    output_every: Option<f64>,
    #[arg(long)]
    h_max: Option<f64>,
    #[arg(long, value_parser = parse_stepping)]
    stepping: Option<Stepping>,
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<Kernel>,
    #[arg(long)]
    j: Option<u8>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// Comma-separated radii for the test-function diagnostic.
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
}

fn parse_stepping(s: &str) -> std::result::Result<Stepping, String> {
    match s.to_ascii_lowercase().as_str() {
        "etd1" => Ok(Stepping::Etd1),
        "etd2" => Ok(Stepping::Etd2),
        _ => Err(format!("unknown stepping `{s}` (etd1, etd2)")),
    }
}

fn parse_kernel(s: &str) -> std::result::Result<Kernel, String> {
    match s.to_ascii_uppercase().as_str() {
        "K0" => Ok(Kernel::K0),
        "K1" => Ok(Kernel::K1),
        "E1" => Ok(Kernel::E1),
        _ => Err(format!("unknown kernel `{s}` (K0, K1, E1)")),
    }
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set(&mut cfg.name, &self.name);
        set(&mut cfg.expect, &self.expect);
        set(&mut cfg.model.n, &self.n);
        set(&mut cfg.model.alpha, &self.alpha);
        set(&mut cfg.model.theta, &self.theta);
        set(&mut cfg.model.delta, &self.delta);
        set(&mut cfg.m, &self.m);
        set(&mut cfg.p, &self.p);
        set(&mut cfg.q, &self.q);
        set(&mut cfg.grid.length, &self.length);
        set(&mut cfg.grid.modes, &self.modes);
        set(&mut cfg.data.amplitude, &self.amplitude);
        set(&mut cfg.schedule.t_end, &self.t_end);
        set(&mut cfg.schedule.output_every, &self.output_every);
        set(&mut cfg.schedule.h_max, &self.h_max);
        set(&mut cfg.schedule.stepping, &self.stepping);
        set(&mut cfg.linear.kernel, &self.kernel);
        set(&mut cfg.linear.j, &self.j);
        set(&mut cfg.linear.gamma2, &self.gamma2);
        set(&mut cfg.lemma.kappa, &self.kappa);
        set(&mut cfg.lemma.mu, &self.mu);
        set(&mut cfg.lemma.t_max, &self.t_max);
        if !self.radii.is_empty() {
            cfg.testfn.radii.clone_from(&self.radii);
        }
    }
}

struct Row {
    name: String,
    mode: Mode,
    verdict: String,
    expected: Option<String>,
    status: &'static str,
    detail: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match real_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main(cli: Cli) -> Result<ExitCode> {
    let out = cli
        .out
        .ok_or_else(|| anyhow!("--out <DIR> is required (or set STRUCDAMP_OUT)"))?;
    let (configs, set, forced) = match cli.command {
        Command::Run { configs, set } => (configs, set, None),
        Command::VerifyLinear { configs, set } => (configs, set, Some(Mode::LinearVerify)),
        Command::Rates { configs, set } => (configs, set, Some(Mode::RateTable)),
        Command::Testfn { configs, set } => (configs, set, Some(Mode::TestfnDiagnostic)),
        Command::Lemma { configs, set } => (configs, set, Some(Mode::LemmaCheck)),
    };

    let mut experiments = Vec::new();
    if configs.is_empty() {
        let mode = forced.expect("`run` requires config files");
        let mut cfg = ExperimentConfig::new(mode);
        set.apply(&mut cfg);
        experiments.push(cfg);
    }
    for path in &configs {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(mode) = forced {
            cfg.mode = mode;
        }
        set.apply(&mut cfg);
        experiments.push(cfg);
    }
    let mut names: Vec<String> = experiments.iter().map(|c| c.display_name()).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("two experiments are named `{}`; set distinct `name` fields", w[0]);
    }
    // resolve everything before running anything, so config errors fail fast
    let plans = experiments
        .iter()
        .map(|c| c.resolve().with_context(|| format!("experiment `{}`", c.display_name())))
        .collect::<Result<Vec<_>>>()?;

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build()?;
    let results: Vec<Result<Row>> = pool.install(|| {
        experiments
            .par_iter()
            .zip(plans.par_iter())
            .map(|(cfg, plan)| run_one(&out, cfg, plan))
            .collect()
    });

    let mut rows = Vec::new();
    let mut failed = false;
    for (cfg, r) in experiments.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failed = true;
                eprintln!("error: experiment `{}`: {e:#}", cfg.display_name());
                rows.push(Row {
                    name: cfg.display_name(),
                    mode: cfg.mode,
                    verdict: "error".into(),
                    expected: cfg.expect.clone(),
                    status: "error",
                    detail: format!("{e:#}"),
                });
            }
        }
    }
    write_summary(&out, &rows)?;
    for r in &rows {
        println!("{}: {} ({}) {}", r.name, r.verdict, r.status, r.detail);
    }
    Ok(if failed {
        ExitCode::from(1)
    } else if rows.iter().any(|r| r.status == "mismatch") {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn admissibility_line(cfg: &ExperimentConfig) -> String {
    match (cfg.model(), cfg.m, cfg.p) {
        (Ok(params), Some(m), Some(p)) => {
            let a = admissibility(&params, m, p, cfg.q);
            format!("{} ({})", a.verdict.as_str(), a.reasons.join("; "))
        }
        _ => "n/a (needs model, m and p)".into(),
    }
}

fn run_one(out: &Path, cfg: &ExperimentConfig, plan: &config::Plan) -> Result<Row> {
    let outcome = exec::execute(plan)?;
    let name = cfg.display_name();
    let path = out.join(format!("{name}.csv"));
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(file, "# strucdamp {VERSION}")?;
    writeln!(file, "# mode: {}", cfg.mode.as_str())?;
    writeln!(file, "# admissibility: {}", admissibility_line(cfg))?;
    writeln!(file, "# verdict: {}", outcome.verdict)?;
    writeln!(file, "# config:")?;
    for line in cfg.to_toml().lines() {
        writeln!(file, "#   {line}")?;
    }
    file.write_all(&outcome.body)?;
    file.flush()?;
    let status = match &cfg.expect {
        None => "none",
        Some(e) if *e == outcome.verdict => "match",
        Some(_) => "mismatch",
    };
    Ok(Row {
        name,
        mode: cfg.mode,
        verdict: outcome.verdict,
        expected: cfg.expect.clone(),
        status,
        detail: outcome.detail,
    })
}

fn write_summary(out: &Path, rows: &[Row]) -> Result<()> {
    let path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["name", "mode", "verdict", "expected", "status", "detail"])?;
    for r in rows {
        w.write_record([
            r.name.as_str(),
            r.mode.as_str(),
            r.verdict.as_str(),
            r.expected.as_deref().unwrap_or(""),
            r.status,
            r.detail.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
