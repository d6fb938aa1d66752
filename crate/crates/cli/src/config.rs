//! JSON experiment configuration. Every scenario is checked against its
//! guards before any work is done; violations name the offending field.

use anyhow::{bail, ensure, Context, Result};
use levy_core::approx::{mollify_kernel, truncate_kernel, TestFunction};
use levy_core::density::Multiplier;
use levy_core::flagship;
use levy_core::kernel::JumpKernelModel;
use levy_core::lattice::Grid;
use levy_core::resolvent::{Extension, SpaceTimeFunction};
use levy_core::simulate::StableScheme;
use levy_core::symbol::{Exponent, LevyTriple, TripleConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Relative paths are resolved against the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(dir) = &cfg.output_dir {
            if dir.is_relative() {
                cfg.output_dir = Some(path.parent().unwrap_or(Path::new(".")).join(dir));
            }
        }
        cfg.validate()
            .with_context(|| format!("validating {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            ensure!(
                names.insert(s.name().to_string()),
                "scenarios[{i}].name: duplicate name `{}`",
                s.name()
            );
            s.validate()
                .with_context(|| format!("scenarios[{i}] (`{}`)", s.name()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Density(DensityScenario),
    Resolvent(ResolventScenario),
    Neumann(NeumannScenario),
    Mollify(MollifyScenario),
    Simulate(SimulateScenario),
}

impl Scenario {
    pub fn name(&self) -> &str {
        match self {
            Self::Density(s) => &s.name,
            Self::Resolvent(s) => &s.name,
            Self::Neumann(s) => &s.name,
            Self::Mollify(s) => &s.name,
            Self::Simulate(s) => &s.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Density(_) => "density",
            Self::Resolvent(_) => "resolvent",
            Self::Neumann(_) => "neumann",
            Self::Mollify(_) => "mollify",
            Self::Simulate(_) => "simulate",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Density(s) => s.validate(),
            Self::Resolvent(s) => s.validate(),
            Self::Neumann(s) => s.validate(),
            Self::Mollify(s) => s.validate(),
            Self::Simulate(s) => s.validate(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    ensure!(
        v > 0.0 && v.is_finite(),
        "{field}: must be positive and finite, got {v}"
    );
    Ok(())
}

fn triple(field: &str, t: &TripleConfig) -> Result<LevyTriple> {
    t.build()
        .with_context(|| format!("{field}: invalid triple"))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n: usize,
    pub half_extent: f64,
}

impl LatticeConfig {
    pub fn grid(&self, dim: usize) -> Result<Grid> {
        Grid::new(dim, self.n, self.half_extent).context("lattice")
    }
}

/// `g(t, x) = e(t) (c + Σ a cos(v·x + φ + ω t))` on `[0, horizon]`, zero
/// afterwards, with `v = harmonic × (lattice frequency step)` so that `g` is
/// exactly representable and `e(t) = sin(π t / horizon)` when enveloped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub horizon: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<ModeConfig>,
    #[serde(default = "default_true")]
    pub envelope: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub amplitude: f64,
    pub harmonic: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub omega: f64,
}

fn default_nodes() -> usize {
    40
}

fn default_true() -> bool {
    true
}

impl SourceConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        positive("source.horizon", self.horizon)?;
        ensure!(self.nodes >= 1, "source.nodes: need at least one interval");
        for (i, m) in self.modes.iter().enumerate() {
            ensure!(
                m.harmonic.len() == dim,
                "source.modes[{i}].harmonic: expected {dim} entries"
            );
        }
        Ok(())
    }

    pub fn build(&self, grid: Grid) -> Result<SpaceTimeFunction> {
        let step = grid.freq_step();
        let times: Vec<f64> = (0..=self.nodes)
            .map(|j| self.horizon * j as f64 / self.nodes as f64)
            .collect();
        let horizon = self.horizon;
        let envelope = self.envelope;
        let modes = self.modes.clone();
        let constant = self.constant;
        Ok(SpaceTimeFunction::from_fn(
            grid,
            times,
            Extension::Zero,
            move |t, x| {
                let e = if envelope {
                    (std::f64::consts::PI * t / horizon).sin()
                } else {
                    1.0
                };
                let waves: f64 = modes
                    .iter()
                    .map(|m| {
                        let phase: f64 = m
                            .harmonic
                            .iter()
                            .zip(x)
                            .map(|(h, xi)| *h as f64 * step * xi)
                            .sum();
                        m.amplitude * (phase + m.phase + m.omega * t).cos()
                    })
                    .sum();
                e * (constant + waves)
            },
        )?)
    }
}

/// A kernel preset or explicit model, optionally mollified (`mollify_n`)
/// and truncated (`delta_cut`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub preset: Option<KernelPreset>,
    #[serde(default)]
    pub model: Option<JumpKernelModel>,
    #[serde(default)]
    pub mollify_n: Option<f64>,
    #[serde(default)]
    pub delta_cut: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelPreset {
    Flagship,
}

impl KernelConfig {
    /// The kernel before mollification and truncation.
    pub fn base(&self) -> Result<JumpKernelModel> {
        let model = match (&self.preset, &self.model) {
            (Some(KernelPreset::Flagship), None) => flagship::kernel(),
            (None, Some(m)) => {
                m.validate().context("kernel.model")?;
                m.clone()
            }
            _ => bail!("kernel: give exactly one of `preset` and `model`"),
        };
        Ok(model)
    }

    /// The kernel after the requested mollification and truncation.
    pub fn build(&self) -> Result<JumpKernelModel> {
        let mut m = self.base()?;
        if let Some(n) = self.mollify_n {
            positive("kernel.mollify_n", n)?;
            m = mollify_kernel(&m, n).context("kernel.mollify_n")?;
        }
        if let Some(d) = self.delta_cut {
            m = truncate_kernel(&m, d).context("kernel.delta_cut")?;
        }
        Ok(m)
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        self.build()?.check_against(alpha).context("kernel")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityOracle {
    /// Symmetric `α = 1` in d = 1: a Cauchy law whose scale is read off `Re ψ(1)`.
    Cauchy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityScenario {
    pub name: String,
    pub triple: TripleConfig,
    pub t: f64,
    pub lattice: LatticeConfig,
    #[serde(default = "identity")]
    pub multiplier: Multiplier,
    /// Rows are written for nodes with `|x|_∞ ≤ window`.
    pub window: f64,
    #[serde(default)]
    pub boundary_tol: Option<f64>,
    /// Keep the requested extent instead of padding until the boundary guard passes.
    #[serde(default)]
    pub fixed_extent: bool,
    #[serde(default)]
    pub oracle: Option<DensityOracle>,
    #[serde(default = "default_density_tol")]
    pub tolerance: f64,
    /// `L^r` norms of the inverted field to report.
    #[serde(default)]
    pub lr_norms: Vec<f64>,
}

fn identity() -> Multiplier {
    Multiplier::Identity
}

fn default_density_tol() -> f64 {
    1e-6
}

impl DensityScenario {
    pub fn validate(&self) -> Result<()> {
        let t = triple("triple", &self.triple)?;
        positive("t", self.t)?;
        positive("window", self.window)?;
        self.lattice.grid(t.dim())?;
        for (i, &r) in self.lr_norms.iter().enumerate() {
            ensure!(r >= 1.0, "lr_norms[{i}]: exponent must be at least 1");
        }
        self.multiplier.validate(t.dim()).context("multiplier")?;
        if let Some(DensityOracle::Cauchy) = self.oracle {
            let w = &self.triple.atoms;
            ensure!(
                self.triple.alpha == 1.0 && t.dim() == 1 && w.len() == 2 && w[0].weight == w[1].weight
                    && w[0].direction[0] == -w[1].direction[0],
                "oracle: the Cauchy oracle needs alpha = 1 with equal weights on +1 and -1 in d = 1"
            );
            ensure!(
                self.multiplier == Multiplier::Identity,
                "oracle: the Cauchy oracle is for the plain density"
            );
        }
        Ok(())
    }
}

/// Hölder moduli of `R_λ` against their Gamma ceilings, and optionally the
/// resolvent equation for a source `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventScenario {
    pub name: String,
    pub triple: TripleConfig,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// Lattice for measuring `c₄ = ‖|∂|^δ p₁‖₁`.
    #[serde(default = "default_norm_lattice")]
    pub norm_lattice: LatticeConfig,
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    #[serde(default)]
    pub source: Option<SourceConfig>,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    /// Step of the finite-difference time derivative in the residual.
    #[serde(default = "default_residual_dt")]
    pub residual_dt: f64,
}

fn default_norm_lattice() -> LatticeConfig {
    LatticeConfig {
        n: 1 << 14,
        half_extent: 256.0,
    }
}

fn default_residual_tol() -> f64 {
    1e-4
}

fn default_residual_dt() -> f64 {
    1e-3
}

impl ResolventScenario {
    pub fn validate(&self) -> Result<()> {
        let t = triple("triple", &self.triple)?;
        ensure!(
            !self.lambdas.is_empty(),
            "lambdas: at least one value required"
        );
        for (i, &l) in self.lambdas.iter().enumerate() {
            positive(&format!("lambdas[{i}]"), l)?;
        }
        for (i, &d) in self.deltas.iter().enumerate() {
            ensure!(
                d > 0.0 && d < 1.0 && d < t.stable().alpha(),
                "deltas[{i}]: must lie in (0, min(1, alpha))"
            );
        }
        ensure!(
            self.deltas.is_empty() || t.self_similar(),
            "deltas: moduli are measured for pure stable triples"
        );
        self.norm_lattice.grid(t.dim()).context("norm_lattice")?;
        match (&self.lattice, &self.source) {
            (Some(l), Some(s)) => {
                l.grid(t.dim())?;
                s.validate(t.dim())?;
            }
            (None, None) => {}
            _ => bail!("lattice, source: give both or neither"),
        }
        positive("residual_tol", self.residual_tol)?;
        positive("residual_dt", self.residual_dt)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaChoice {
    /// `λ = factor · λ₀` with `λ₀` located on the grid `2^lo .. 2^hi`.
    Auto {
        factor: f64,
        log2_lo: i32,
        log2_hi: i32,
    },
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannScenario {
    pub name: String,
    pub triple: TripleConfig,
    pub kernel: KernelConfig,
    pub lattice: LatticeConfig,
    pub lambda: LambdaChoice,
    pub source: SourceConfig,
    #[serde(default = "default_series_tol")]
    pub series_tol: f64,
}

fn default_series_tol() -> f64 {
    1e-10
}

impl NeumannScenario {
    pub fn validate(&self) -> Result<()> {
        let t = triple("triple", &self.triple)?;
        ensure!(
            t.self_similar(),
            "triple: the contraction constants are measured for pure stable parts"
        );
        self.kernel.validate(t.stable().alpha())?;
        self.lattice.grid(t.dim())?;
        match self.lambda {
            LambdaChoice::Auto {
                factor,
                log2_lo,
                log2_hi,
            } => {
                ensure!(factor >= 1.0, "lambda.factor: must be at least 1");
                ensure!(log2_lo < log2_hi, "lambda.log2_lo: must be below log2_hi");
            }
            LambdaChoice::Fixed { value } => positive("lambda.value", value)?,
        }
        positive("series_tol", self.series_tol)?;
        self.source.validate(t.dim())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyScenario {
    pub name: String,
    pub alpha: f64,
    pub kernel: KernelConfig,
    pub lattice: LatticeConfig,
    pub test_function: TestFunction,
    #[serde(default)]
    pub ns: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// Required upper bound on the fitted log-log slope in `n`.
    #[serde(default)]
    pub max_slope: Option<f64>,
}

impl MollifyScenario {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate(self.alpha)?;
        ensure!(
            self.kernel.mollify_n.is_none() && self.kernel.delta_cut.is_none(),
            "kernel: give the unmodified kernel"
        );
        let dim = self.kernel.base()?.dim;
        ensure!(
            self.test_function.dim() == dim,
            "test_function: dimension differs from the kernel"
        );
        self.lattice.grid(dim)?;
        for (i, &n) in self.ns.iter().enumerate() {
            positive(&format!("ns[{i}]"), n)?;
        }
        for (i, &d) in self.deltas.iter().enumerate() {
            ensure!(d > 0.0 && d < 1.0, "deltas[{i}]: must lie in (0, 1)");
        }
        ensure!(
            self.max_slope.is_none() || self.ns.len() >= 2,
            "max_slope: needs at least two values in ns"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateScenario {
    pub name: String,
    pub triple: TripleConfig,
    /// State-dependent kernel; must carry `delta_cut`.
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    pub dt: f64,
    #[serde(default = "exact")]
    pub scheme: StableScheme,
    pub seed: u64,
    pub paths: usize,
    pub start: Vec<f64>,
    pub lambda: f64,
    pub source: SourceConfig,
    /// Lattice for the Neumann comparison and the Dynkin generator images.
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    #[serde(default)]
    pub compare_neumann: bool,
    #[serde(default)]
    pub dynkin: Vec<TestFunction>,
    /// Number of full paths written to `<name>_paths.csv`.
    #[serde(default)]
    pub record_paths: usize,
}

fn exact() -> StableScheme {
    StableScheme::Exact
}

impl SimulateScenario {
    pub fn validate(&self) -> Result<()> {
        let t = triple("triple", &self.triple)?;
        positive("dt", self.dt)?;
        positive("lambda", self.lambda)?;
        ensure!(self.paths >= 2, "paths: need at least two");
        ensure!(
            self.start.len() == t.dim(),
            "start: expected {} coordinates",
            t.dim()
        );
        self.source.validate(t.dim())?;
        let steps = self.source.horizon / self.dt;
        ensure!(
            (steps - steps.round()).abs() < 1e-9 * steps.max(1.0),
            "dt: must divide source.horizon"
        );
        ensure!(
            ((steps / 2.0) - (steps / 2.0).round()).abs() < 1e-9 * steps.max(1.0),
            "dt: source.horizon must be an even number of steps (the bias estimate uses 2 dt)"
        );
        if let Some(k) = &self.kernel {
            ensure!(
                k.delta_cut.is_some(),
                "kernel.delta_cut: the sampler needs a truncated kernel"
            );
            k.validate(t.stable().alpha())?;
        }
        if self.compare_neumann || !self.dynkin.is_empty() {
            let lattice = self
                .lattice
                .context("lattice: required for compare_neumann and dynkin")?;
            lattice.grid(t.dim())?;
            ensure!(
                t.self_similar() || !self.compare_neumann,
                "triple: the Neumann comparison needs a pure stable part"
            );
        }
        for (i, f) in self.dynkin.iter().enumerate() {
            ensure!(
                f.dim() == t.dim(),
                "dynkin[{i}]: dimension differs from the triple"
            );
        }
        Ok(())
    }
}
