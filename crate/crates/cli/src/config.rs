use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tlasdi::autodiff::Activation;
use tlasdi::eval::{Axis, ParameterGrid, PdeKind, PdeProblem};
use tlasdi::fom::{DifferenceScheme, EntropyExchange, GasGeneration, InitBox, PdeGrid};
use tlasdi::integrate::{IntegratorSpec, Scheme};
use tlasdi::train::{BatchPlan, JacobianVariant, LossOptions, LossWeights, LrSchedule, TrainSpec};
use tlasdi::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Gas,
    Burgers,
    Heat,
    Import,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TlasdiGfinn,
    Spnn,
    VanillaFnn,
}

/// One experiment. Every section has defaults except the model blocks.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gas: GasSection,
    #[serde(default)]
    pub pde: PdeSection,
    #[serde(default)]
    pub import: Option<ImportSection>,
    pub autoencoder: AeSection,
    pub dynamics: DynamicsSection,
    pub loss: LossSection,
    pub train: TrainSection,
    #[serde(default)]
    pub predict: PredictSection,
    #[serde(default)]
    pub greedy: Option<GreedySection>,
    #[serde(default)]
    pub ablation: AblationSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasSection {
    pub count: usize,
    /// Training window `[0, t_train]`; the rest up to `t_end` is the extrapolation window.
    pub t_train: f64,
    pub t_end: f64,
    pub dt: f64,
    /// `mirrored` or `energy-conserving`.
    pub exchange: String,
    pub init_lower: [f64; 4],
    pub init_upper: [f64; 4],
}

impl Default for GasSection {
    fn default() -> Self {
        let b = InitBox::default();
        GasSection {
            count: 100,
            t_train: 7.84,
            t_end: 8.0,
            dt: 0.02,
            exchange: "mirrored".into(),
            init_lower: b.lower,
            init_upper: b.upper,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSection {
    pub fom_nx: usize,
    pub fom_nt: usize,
    pub nx: usize,
    pub nt: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub t_end: f64,
    pub amplitude: [f64; 2],
    pub width: [f64; 2],
    pub counts: [usize; 2],
    /// Fixed training parameters when greedy sampling is off; empty means the grid corners.
    pub train_points: Vec<[f64; 2]>,
}

impl Default for PdeSection {
    fn default() -> Self {
        PdeSection {
            fom_nx: 1001,
            fom_nt: 1000,
            nx: 201,
            nt: 200,
            x_min: -3.0,
            x_max: 3.0,
            t_end: 2.0,
            amplitude: [0.7, 0.8],
            width: [0.9, 1.0],
            counts: [21, 21],
            train_points: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportSection {
    /// Binary dataset or CSV; resolved against the config file's directory.
    pub path: PathBuf,
    /// End of the training window; later snapshots form the extrapolation window.
    pub t_train: Option<f64>,
    #[serde(default = "default_scheme")]
    pub derivatives: String,
}

fn default_scheme() -> String {
    "central".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeSection {
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub activation: String,
    #[serde(default)]
    pub hyper: bool,
    #[serde(default = "default_hyper_hidden")]
    pub hyper_hidden: Vec<usize>,
    #[serde(default = "default_tanh")]
    pub hyper_activation: String,
}

fn default_hyper_hidden() -> Vec<usize> {
    vec![20, 20]
}

fn default_tanh() -> String {
    "tanh".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub hidden: Vec<usize>,
    pub activation: String,
    /// GFINN basis size.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub shared_basis: bool,
}

fn default_k() -> usize {
    4
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub int: f64,
    pub rec: f64,
    #[serde(default)]
    pub jac: f64,
    #[serde(default)]
    pub model: f64,
    #[serde(default)]
    pub deg: f64,
    #[serde(default)]
    pub reg: f64,
    /// `auto`, `derivative` or `frobenius`.
    #[serde(default = "default_auto")]
    pub jacobian: String,
}

fn default_auto() -> String {
    "auto".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: usize,
    /// Number of mini-batches per epoch; 0 trains on the full batch.
    #[serde(default)]
    pub batches: usize,
    pub lr: f64,
    #[serde(default)]
    pub lr_decay: f64,
    #[serde(default = "default_period")]
    pub lr_period: usize,
    /// Lower bound on the rate as a fraction of `lr`.
    #[serde(default = "default_floor")]
    pub lr_floor_fraction: f64,
    #[serde(default = "default_period")]
    pub checkpoint_every: usize,
    /// One-step scheme in the integration loss.
    #[serde(default = "default_rk23")]
    pub scheme: String,
    #[serde(default = "default_one")]
    pub substeps: usize,
}

fn default_period() -> usize {
    1000
}

fn default_floor() -> f64 {
    0.1
}

fn default_rk23() -> String {
    "rk23".into()
}

fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub scheme: String,
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection { scheme: "rk4".into(), dt: 1e-3, rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedySection {
    pub target: usize,
    pub period: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSection {
    pub seeds: Vec<u64>,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection { seeds: (0..5).collect() }
    }
}

fn activation(s: &str) -> Result<Activation> {
    s.parse()
}

fn scheme(s: &str) -> Result<Scheme> {
    s.parse()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Reads, resolves relative paths against the file's directory and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(imp) = &mut cfg.import {
            if imp.path.is_relative() {
                imp.path = path.parent().unwrap_or(Path::new(".")).join(&imp.path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every knob that can be checked without computing anything.
    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        self.train_spec(self.seed)?.validate()?;
        self.predict_spec()?.validate()?;
        activation(&self.autoencoder.activation)?;
        activation(&self.autoencoder.hyper_activation)?;
        activation(&self.dynamics.activation)?;
        if self.autoencoder.latent == 0 {
            return Err(Error::Config("latent dimension must be positive".into()));
        }
        if self.dynamics.k == 0 {
            return Err(Error::Config("GFINN basis size must be positive".into()));
        }
        if self.model == ModelKind::VanillaFnn && (self.loss.deg > 0.0) {
            return Err(Error::Config("degeneracy loss needs thermodynamic dynamics".into()));
        }
        match self.problem {
            ProblemKind::Gas => {
                self.gas_generation()?;
                let g = &self.gas;
                if !(g.t_train > 0.0 && g.t_train < g.t_end) {
                    return Err(Error::Config("gas t_train must lie inside (0, t_end)".into()));
                }
            }
            ProblemKind::Burgers | ProblemKind::Heat => {
                self.pde_problem()?;
                let grid = self.parameter_grid()?;
                if let Some(gr) = &self.greedy {
                    if gr.target > grid.len() || gr.target < 4 {
                        return Err(Error::Config(format!("greedy target {} must lie in 4..={}", gr.target, grid.len())));
                    }
                }
            }
            ProblemKind::Import => {
                let imp = self.import.as_ref().ok_or_else(|| Error::Config("import problem needs an [import] section".into()))?;
                if !imp.path.exists() {
                    return Err(Error::Config(format!("dataset {} does not exist", imp.path.display())));
                }
                imp.derivatives.parse::<DifferenceScheme>()?;
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        let l = &self.loss;
        LossWeights { int: l.int, rec: l.rec, jac: l.jac, model: l.model, deg: l.deg, reg: l.reg }
    }

    pub fn train_spec(&self, seed: u64) -> Result<TrainSpec> {
        let t = &self.train;
        let jacobian: JacobianVariant = self.loss.jacobian.parse()?;
        Ok(TrainSpec {
            iterations: t.iterations,
            batch: if t.batches == 0 { BatchPlan::Full } else { BatchPlan::Count(t.batches) },
            lr: LrSchedule { initial: t.lr, decay: t.lr_decay, period: t.lr_period, floor: t.lr * t.lr_floor_fraction },
            loss: LossOptions { jacobian, scheme: scheme(&t.scheme)?, substeps: t.substeps, probe_seed: seed, ..LossOptions::default() },
            checkpoint_every: t.checkpoint_every,
            seed,
        })
    }

    pub fn predict_spec(&self) -> Result<IntegratorSpec> {
        let p = &self.predict;
        let s = scheme(&p.scheme)?;
        let mut spec = if s.is_adaptive() { IntegratorSpec::adaptive(s, p.rtol, p.atol) } else { IntegratorSpec::rk4(p.dt) };
        spec.dt = p.dt;
        Ok(spec)
    }

    pub fn ae_activation(&self) -> Result<Activation> {
        activation(&self.autoencoder.activation)
    }

    pub fn hyper_activation(&self) -> Result<Activation> {
        activation(&self.autoencoder.hyper_activation)
    }

    pub fn dynamics_activation(&self) -> Result<Activation> {
        activation(&self.dynamics.activation)
    }

    pub fn gas_generation(&self) -> Result<GasGeneration> {
        let g = &self.gas;
        let exchange: EntropyExchange = g.exchange.parse()?;
        let init = InitBox { lower: g.init_lower, upper: g.init_upper };
        init.validate()?;
        if g.count == 0 || !(g.dt > 0.0) || !(g.t_end > 0.0) {
            return Err(Error::Config("gas generation needs count > 0, dt > 0 and t_end > 0".into()));
        }
        Ok(GasGeneration { count: g.count, init, t_end: g.t_end, dt: g.dt, exchange, ..GasGeneration::default() })
    }

    pub fn pde_problem(&self) -> Result<PdeProblem> {
        let p = &self.pde;
        let kind = match self.problem {
            ProblemKind::Burgers => PdeKind::Burgers,
            ProblemKind::Heat => PdeKind::Heat,
            _ => return Err(Error::Config("not a PDE problem".into())),
        };
        let fom = PdeGrid { nx: p.fom_nx, nt: p.fom_nt, x_min: p.x_min, x_max: p.x_max, t_end: p.t_end };
        let grid = PdeGrid { nx: p.nx, nt: p.nt, ..fom };
        PdeProblem::new(kind, fom, grid)
    }

    pub fn parameter_grid(&self) -> Result<ParameterGrid> {
        let p = &self.pde;
        ParameterGrid::new(vec![
            Axis::new(p.amplitude[0], p.amplitude[1], p.counts[0]),
            Axis::new(p.width[0], p.width[1], p.counts[1]),
        ])
    }
}
