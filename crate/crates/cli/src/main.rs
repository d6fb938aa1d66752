use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use levy_cli::acceptance;
use levy_cli::config::{DensityOracle, DensityScenario, ExperimentConfig, LatticeConfig, Scenario};
use levy_cli::output::{write_json, write_table, Table};
use levy_cli::run::{collect_configs, run_experiment};
use levy_core::density::Multiplier;
use levy_core::simulate::StableScheme;
use levy_core::symbol::TripleConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Lévy-type generator experiments: heat kernels, resolvents, perturbation
/// series, kernel approximation and Monte Carlo, driven by JSON configs.
#[derive(Parser)]
#[command(name = "levy", version)]
struct Cli {
    /// Worker threads for the data-parallel kernels (0 = all cores).
    #[arg(long, global = true, env = "LEVY_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heat kernels by lattice inversion (configs, or one scenario from flags).
    Density(DensityArgs),
    /// Hölder moduli of the resolvent and the resolvent equation.
    Resolvent(RunArgs),
    /// Contraction constants and the perturbation series.
    Neumann(RunArgs),
    /// Mollification and truncation errors of the jump kernel.
    Mollify(RunArgs),
    /// Monte Carlo estimates, Neumann comparison and Dynkin checks.
    Simulate(SimulateArgs),
    /// Runs every scenario of every config, whatever its kind.
    Verify(RunArgs),
    /// The built-in acceptance suite.
    Accept(AcceptArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config files or directories of `*.json` configs.
    configs: Vec<PathBuf>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    alpha: Option<f64>,
    /// Spectral atoms as JSON, e.g. `[{"dir":[1],"w":1},{"dir":[-1],"w":1}]`.
    #[arg(long)]
    atoms: Option<String>,
    /// Diffusion matrix as JSON rows.
    #[arg(long)]
    a: Option<String>,
    /// Drift as a JSON array.
    #[arg(long)]
    b: Option<String>,
    /// Finite jump atoms as JSON.
    #[arg(long)]
    extra: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Points per axis.
    #[arg(long = "N", default_value_t = 1 << 14)]
    n: usize,
    /// Half extent of the lattice.
    #[arg(long = "L", default_value_t = 64.0)]
    l: f64,
    /// Apply |∂|^δ before inverting.
    #[arg(long)]
    delta: Option<f64>,
    /// Report L^r norms (repeatable).
    #[arg(long)]
    r: Vec<f64>,
    /// Rows are written for |x| ≤ window.
    #[arg(long, default_value_t = 10.0)]
    window: f64,
    /// Compare with the closed-form Cauchy density.
    #[arg(long)]
    cauchy_oracle: bool,
    #[arg(long, default_value = "density")]
    name: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Small-jump threshold: switches to the compound Poisson scheme.
    #[arg(long)]
    eps: Option<f64>,
    /// Add the Gaussian correction for jumps below `eps`.
    #[arg(long, requires = "eps")]
    gaussian_correction: bool,
    #[arg(long)]
    delta_cut: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Horizon of the source.
    #[arg(long = "T")]
    horizon: Option<f64>,
}

#[derive(Args)]
struct AcceptArgs {
    /// Criterion ids to run (default: all).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    /// Directory for acceptance.json and acceptance.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Density(args) => density(args),
        Command::Resolvent(args) => run_kind(args, Some("resolvent"), Ok),
        Command::Neumann(args) => run_kind(args, Some("neumann"), Ok),
        Command::Mollify(args) => run_kind(args, Some("mollify"), Ok),
        Command::Simulate(args) => {
            let overrides = SimulateOverrides::from(&args);
            run_kind(args.run, Some("simulate"), |c| overrides.apply(c))
        }
        Command::Verify(args) => run_kind(args, None, Ok),
        Command::Accept(args) => accept(args),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(n: usize) -> Result<()> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_: usize) -> Result<()> {
    Ok(())
}

fn run_kind(
    args: RunArgs,
    kind: Option<&str>,
    adjust: impl Fn(ExperimentConfig) -> Result<ExperimentConfig>,
) -> Result<bool> {
    if args.configs.is_empty() {
        bail!("no config given");
    }
    let configs = collect_configs(&args.configs)?;
    let several = configs.len() > 1;
    let mut all_passed = true;
    for (path, cfg) in configs {
        if let Some(kind) = kind {
            if let Some(other) = cfg.scenarios.iter().find(|s| s.kind() != kind) {
                bail!(
                    "{}: scenario `{}` is of kind `{}`; use `{}` or `verify`",
                    path.display(),
                    other.name(),
                    other.kind(),
                    other.kind()
                );
            }
        }
        let cfg = adjust(cfg)?;
        cfg.validate()
            .with_context(|| format!("validating {}", path.display()))?;
        let out = output_dir(&args.out, &cfg, several);
        all_passed &= report(&cfg, &out)?;
    }
    Ok(all_passed)
}

fn output_dir(flag: &Option<PathBuf>, cfg: &ExperimentConfig, several: bool) -> PathBuf {
    match (flag, &cfg.output_dir) {
        (Some(base), _) if several => base.join(&cfg.name),
        (Some(base), _) => base.clone(),
        (None, Some(dir)) => dir.clone(),
        (None, None) => Path::new("out").join(&cfg.name),
    }
}

fn report(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let reports = run_experiment(cfg, out)?;
    for r in &reports {
        println!(
            "{} {:<9} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.kind,
            r.name
        );
        for c in r.failed_checks() {
            eprintln!(
                "  check {}: {} {} {} failed",
                c.name, c.value, c.relation, c.bound
            );
        }
        if let Some(d) = r.results.get("diagnostic") {
            eprintln!("  {}", d.as_str().unwrap_or_default());
        }
        if let Some(e) = &r.error {
            eprintln!("  error: {e}");
        }
    }
    if !reports.is_empty() {
        println!("outputs in {}", out.display());
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn parse_json<T: serde::de::DeserializeOwned>(
    flag: &str,
    text: &Option<String>,
) -> Result<Option<T>> {
    text.as_deref()
        .map(|t| serde_json::from_str(t).with_context(|| format!("--{flag}: invalid JSON")))
        .transpose()
}

fn density(args: DensityArgs) -> Result<bool> {
    if !args.run.configs.is_empty() {
        if args.alpha.is_some() || args.atoms.is_some() {
            bail!("give either configs or --alpha/--atoms, not both");
        }
        return run_kind(args.run, Some("density"), Ok);
    }
    let (Some(alpha), Some(atoms)) = (args.alpha, &args.atoms) else {
        bail!("give a config, or --alpha and --atoms");
    };
    let triple = TripleConfig {
        alpha,
        atoms: serde_json::from_str(atoms).context("--atoms: invalid JSON")?,
        a: parse_json("a", &args.a)?,
        b: parse_json("b", &args.b)?,
        extra: parse_json("extra", &args.extra)?.unwrap_or_default(),
    };
    let scenario = DensityScenario {
        name: args.name.clone(),
        triple,
        t: args.t,
        lattice: LatticeConfig {
            n: args.n,
            half_extent: args.l,
        },
        multiplier: args
            .delta
            .map_or(Multiplier::Identity, Multiplier::Fractional),
        window: args.window,
        boundary_tol: None,
        fixed_extent: false,
        oracle: args.cauchy_oracle.then_some(DensityOracle::Cauchy),
        tolerance: 1e-6,
        lr_norms: args.r.clone(),
    };
    let cfg = ExperimentConfig {
        name: args.name,
        output_dir: None,
        scenarios: vec![Scenario::Density(scenario)],
    };
    cfg.validate()?;
    let out = output_dir(&args.run.out, &cfg, false);
    report(&cfg, &out)
}

struct SimulateOverrides {
    paths: Option<usize>,
    dt: Option<f64>,
    scheme: Option<StableScheme>,
    delta_cut: Option<f64>,
    seed: Option<u64>,
    lambda: Option<f64>,
    horizon: Option<f64>,
}

impl SimulateOverrides {
    fn from(a: &SimulateArgs) -> Self {
        Self {
            paths: a.paths,
            dt: a.dt,
            scheme: a.eps.map(|eps| StableScheme::CompoundPoisson {
                eps,
                gaussian_correction: a.gaussian_correction,
            }),
            delta_cut: a.delta_cut,
            seed: a.seed,
            lambda: a.lambda,
            horizon: a.horizon,
        }
    }

    fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        for s in &mut cfg.scenarios {
            let Scenario::Simulate(s) = s else { continue };
            s.paths = self.paths.unwrap_or(s.paths);
            s.dt = self.dt.unwrap_or(s.dt);
            s.scheme = self.scheme.unwrap_or(s.scheme);
            s.seed = self.seed.unwrap_or(s.seed);
            s.lambda = self.lambda.unwrap_or(s.lambda);
            s.source.horizon = self.horizon.unwrap_or(s.source.horizon);
            if let Some(d) = self.delta_cut {
                let Some(k) = s.kernel.as_mut() else {
                    bail!("--delta-cut: scenario `{}` has no kernel", s.name)
                };
                k.delta_cut = Some(d);
            }
        }
        Ok(cfg)
    }
}

fn accept(args: AcceptArgs) -> Result<bool> {
    let verdicts = acceptance::run(&args.only);
    for v in &verdicts {
        println!("{}", v.line());
    }
    let passed = verdicts.iter().all(|v| v.passed);
    println!(
        "{}/{} criteria passed",
        verdicts.iter().filter(|v| v.passed).count(),
        verdicts.len()
    );
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join("acceptance.json"), &verdicts)?;
        let mut t = Table::new(&["id", "passed", "seconds"]);
        for v in &verdicts {
            t.push(vec![v.id as f64, v.passed as u8 as f64, v.seconds]);
        }
        write_table(&dir.join("acceptance.csv"), &t, &[])?;
    }
    Ok(passed)
}
