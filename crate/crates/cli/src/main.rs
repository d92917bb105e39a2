use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pendula_core::harness::{self, Config, SolveReport};
use pendula_core::kink::SolveMode;
use pendula_core::lattice::telemetry_csv;
use pendula_core::KernelConfig;

/// Traveling kinks of weakly coupled pendulum lattices.
#[derive(Parser)]
#[command(name = "pendula", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one kink.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Write the profile u as `z,value`.
        #[arg(long)]
        profile_csv: Option<PathBuf>,
    },
    /// Kink, eigenpair and residual over a list of ε, with slope fits.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Grid refinement study at one ε.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        m_list: Option<Vec<usize>>,
    },
    /// Reduction diagnostics: λ₁, ||G||, ||v*||, d, gap.
    LsDiagnostics {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the pendulum lattice from a solved kink.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// A report written by `solve`; its settings replace the config's.
        #[arg(long)]
        from_kink: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Sites run from −N to N.
        #[arg(long)]
        sites: Option<i64>,
        #[arg(long)]
        offset: Option<f64>,
        #[arg(long)]
        record_every: Option<usize>,
        /// Write `t,front_position,total_energy`.
        #[arg(long)]
        telemetry: Option<PathBuf>,
    },
    /// Check the hypotheses on the model and kernel.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    NearestNeighbor,
    Exponential,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Projected,
    Symmetric,
}

#[derive(Args)]
struct Common {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    tail_tol: Option<f64>,
    /// a_0,a_1,… for the custom kernel.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefficients: Option<Vec<f64>>,
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    step_tolerance: Option<f64>,
    #[arg(long)]
    ball_radius: Option<f64>,
    #[arg(long)]
    continuation: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Config::from_json(&text)?
            }
            None => Config::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut Config) -> Result<()> {
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        self.apply_kernel(&mut cfg.kernel)?;
        if let Some(l) = self.half_width {
            cfg.grid.half_width = l;
        }
        if let Some(m) = self.m {
            cfg.grid.m = m;
        }
        if let Some(mode) = self.mode {
            cfg.solver.mode = match mode {
                ModeArg::Projected => SolveMode::Projected,
                ModeArg::Symmetric => SolveMode::Symmetric,
            };
        }
        if let Some(n) = self.max_iterations {
            cfg.solver.max_iterations = n;
        }
        if let Some(t) = self.step_tolerance {
            cfg.solver.step_tolerance = t;
        }
        if let Some(r) = self.ball_radius {
            cfg.solver.ball_radius = Some(r);
        }
        if self.continuation {
            cfg.solver.continuation = true;
        }
        Ok(())
    }

    fn apply_kernel(&self, kernel: &mut KernelConfig) -> Result<()> {
        let kind = match self.kernel {
            Some(k) => k,
            None => {
                // parameter flags alone tweak a kernel of the same kind
                match kernel {
                    KernelConfig::Exponential { decay, k_max, tail_tol } => {
                        *decay = self.decay.unwrap_or(*decay);
                        *k_max = self.k_max.unwrap_or(*k_max);
                        *tail_tol = self.tail_tol.unwrap_or(*tail_tol);
                    }
                    KernelConfig::Custom { coefficients } => {
                        if let Some(c) = &self.coefficients {
                            *coefficients = c.clone();
                        }
                    }
                    KernelConfig::NearestNeighbor => {}
                }
                return Ok(());
            }
        };
        *kernel = match kind {
            KernelKind::NearestNeighbor => KernelConfig::NearestNeighbor,
            KernelKind::Exponential => KernelConfig::Exponential {
                decay: self.decay.context("--kernel exponential needs --decay")?,
                k_max: self.k_max.context("--kernel exponential needs --k-max")?,
                tail_tol: self.tail_tol.unwrap_or(1.0),
            },
            KernelKind::Custom => KernelConfig::Custom {
                coefficients: self.coefficients.clone().context("--kernel custom needs --coefficients")?,
            },
        };
        Ok(())
    }
}

fn write(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { common, epsilon, profile_csv } => {
            let mut cfg = common.config()?;
            if let Some(e) = epsilon {
                cfg.epsilons = vec![e];
            }
            let (report, kink) = harness::solve(&cfg.problem()?, &cfg.solver, cfg.first_epsilon()?)?;
            if let Some(p) = profile_csv {
                write(Some(&p), &kink.u.to_csv())?;
            }
            write(common.out.as_deref(), &harness::to_json(&report)?)?;
        }
        Command::Sweep { common, epsilons, csv } => {
            let mut cfg = common.config()?;
            if let Some(e) = epsilons {
                cfg.epsilons = e;
            }
            let report = harness::sweep(&cfg.problem()?, &cfg.solver, &cfg.epsilons)?;
            if let Some(p) = csv {
                write(Some(&p), &report.csv())?;
            }
            write(common.out.as_deref(), &harness::to_json(&report)?)?;
        }
        Command::Refine { common, epsilon, m_list } => {
            let mut cfg = common.config()?;
            if let Some(e) = epsilon {
                cfg.epsilons = vec![e];
            }
            if let Some(m) = m_list {
                cfg.m_list = m;
            }
            let report = harness::refine_study(&cfg.problem()?, &cfg.solver, cfg.first_epsilon()?, &cfg.m_list)?;
            write(common.out.as_deref(), &harness::to_json(&report)?)?;
        }
        Command::LsDiagnostics { common, epsilons, csv } => {
            let mut cfg = common.config()?;
            if let Some(e) = epsilons {
                cfg.epsilons = e;
            }
            let report = harness::ls_diagnostics(&cfg.problem()?, &cfg.epsilons)?;
            if let Some(p) = csv {
                write(Some(&p), &report.csv())?;
            }
            write(common.out.as_deref(), &harness::to_json(&report)?)?;
        }
        Command::Simulate {
            common,
            from_kink,
            epsilon,
            c,
            t_end,
            dt,
            sites,
            offset,
            record_every,
            telemetry,
        } => {
            let mut cfg = common.config()?;
            let mut expected: Option<SolveReport> = None;
            if let Some(p) = from_kink {
                let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                let r: SolveReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                if r.header.schema_version != harness::SCHEMA_VERSION {
                    bail!("{} has schema version {}, expected {}", p.display(), r.header.schema_version, harness::SCHEMA_VERSION);
                }
                cfg.model = r.header.model.clone();
                cfg.kernel = r.header.kernel.clone();
                cfg.grid = r.header.grid.clone();
                cfg.solver = r.solver.clone();
                cfg.epsilons = vec![r.kink.epsilon];
                expected = Some(r);
            }
            if let Some(e) = epsilon {
                if expected.is_some() {
                    bail!("--epsilon conflicts with --from-kink");
                }
                cfg.epsilons = vec![e];
            }
            let sim = &mut cfg.sim;
            sim.c = c.unwrap_or(sim.c);
            sim.t_end = t_end.unwrap_or(sim.t_end);
            sim.dt = dt.unwrap_or(sim.dt);
            sim.sites = sites.or(sim.sites);
            sim.offset = offset.unwrap_or(sim.offset);
            sim.record_every = record_every.unwrap_or(sim.record_every);

            let problem = cfg.problem()?;
            let (solved, kink) = harness::solve(&problem, &cfg.solver, cfg.first_epsilon()?)?;
            if let Some(r) = expected {
                // the kink is rebuilt from the report's settings; it must be the same one
                if r.kink != solved.kink {
                    bail!("re-solving the kink did not reproduce the report (b = {:e} vs {:e})", solved.kink.b, r.kink.b);
                }
            }
            let (report, rows) = harness::simulate(&problem, &kink, &cfg.sim)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(p) = telemetry {
                write(Some(&p), &telemetry_csv(&rows))?;
            }
            write(common.out.as_deref(), &harness::to_json(&report)?)?;
        }
        Command::Validate { common } => {
            let cfg = common.config()?;
            let report = harness::validate(&cfg.problem()?)?;
            write(common.out.as_deref(), &harness::to_json(&report)?)?;
            if !report.passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
