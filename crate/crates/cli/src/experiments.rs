//! Experiment drivers shared by the command-line front end and the acceptance suite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tlasdi::autodiff::Matrix;
use tlasdi::dynamics::{Dynamics, FnnDynamics, GfinnDynamics, NetShape, SpnnDynamics};
use tlasdi::eval::{
    entropy_report, extrap_error, greedy_sample, max_rel_error, mean_std, residual_indicator, rom_predict, EntropyReport, GreedySchedule,
    ParameterGrid, PdeProblem,
};
use tlasdi::fom::{dataset_read, dataset_read_csv, fd_derivatives, gas_generate, DifferenceScheme, SnapshotSet};
use tlasdi::integrate::IntegratorSpec;
use tlasdi::nn::{Architecture, Autoencoder, HyperAutoencoder, Mlp, ParamBox};
use tlasdi::train::{AeModel, LatentModel, LossWeights, TrainHistory, Trainer};
use tlasdi::{Error, Result};

use crate::config::{ModelKind, ProblemKind, RunConfig};

/// Model initialization and data generation draw from separate streams of the same seed.
fn model_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

pub fn build_model(cfg: &RunConfig, full_dim: usize, mu_box: Option<ParamBox>, seed: u64) -> Result<LatentModel> {
    let mut rng = model_rng(seed);
    let a = &cfg.autoencoder;
    let n = a.latent;
    let mut enc = vec![full_dim];
    enc.extend(&a.hidden);
    enc.push(n);
    let dec: Vec<usize> = enc.iter().rev().copied().collect();
    let act = cfg.ae_activation()?;
    let (ea, da) = (Architecture::uniform(enc, act)?, Architecture::uniform(dec, act)?);
    let ae = if a.hyper {
        let bx = mu_box.ok_or_else(|| Error::Config("hyper-autoencoder needs a parameter box".into()))?;
        AeModel::Hyper(HyperAutoencoder::random(ea, da, &a.hyper_hidden, cfg.hyper_activation()?, bx, &mut rng)?)
    } else {
        AeModel::Plain(Autoencoder::new(Mlp::random(ea, &mut rng), Mlp::random(da, &mut rng))?)
    };
    let shape = NetShape::new(cfg.dynamics.hidden.clone(), cfg.dynamics_activation()?);
    let dynamics = match cfg.model {
        ModelKind::TlasdiGfinn => Dynamics::Gfinn(GfinnDynamics::random(n, cfg.dynamics.k, &shape, cfg.dynamics.shared_basis, &mut rng)?),
        ModelKind::Spnn => Dynamics::Spnn(SpnnDynamics::random(n, &shape, &mut rng)?),
        ModelKind::VanillaFnn => Dynamics::Fnn(FnnDynamics::random(n, &shape, &mut rng)?),
    };
    LatentModel::new(ae, dynamics)
}

/// Training window with derivatives plus the extrapolation window starting at its last snapshot.
#[derive(Clone, Debug)]
pub struct Extrapolation {
    pub train: SnapshotSet,
    pub window: SnapshotSet,
}

/// Splits at the snapshot closest to `t_train`. Derivatives present in `full` are kept,
/// otherwise they are differenced over the training window only.
pub fn split_window(full: &SnapshotSet, t_train: f64, scheme: DifferenceScheme) -> Result<Extrapolation> {
    let k = full
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_train).abs().total_cmp(&(b.1 - t_train).abs()))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::Config("empty dataset".into()))?;
    if k + 1 >= full.len() || k < 2 {
        return Err(Error::Config(format!("training window ending at t = {t_train} leaves no extrapolation window")));
    }
    let mut train = full.slice_time(0..k + 1)?;
    if train.derivatives.is_none() {
        train = fd_derivatives(&train, scheme)?;
    }
    Ok(Extrapolation { train, window: full.slice_time(k..full.len())? })
}

/// Predicts from the first window snapshot and compares the remaining ones: `(e^ℓ2, e^max%)`.
pub fn extrapolation_error(model: &LatentModel, window: &SnapshotSet, spec: &IntegratorSpec) -> Result<(f64, f64)> {
    let p = rom_predict(model, &window.mu, window.state(0), &window.times, spec)?;
    let rows = |m: &Matrix| Matrix::from_rows(&(1..m.rows()).map(|k| m.row(k).to_vec()).collect::<Vec<_>>());
    let (truth, pred) = (rows(&window.states)?, rows(&p.states)?);
    Ok((extrap_error(&truth, &pred)?, max_rel_error(&truth, &pred)?))
}

/// Full dataset of a gas or import problem.
pub fn trajectory_dataset(cfg: &RunConfig, seed: u64) -> Result<SnapshotSet> {
    match cfg.problem {
        ProblemKind::Gas => gas_generate(&cfg.gas_generation()?, &mut data_rng(seed)),
        ProblemKind::Import => {
            let imp = cfg.import.as_ref().ok_or_else(|| Error::Config("missing [import] section".into()))?;
            let csv = imp.path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            if csv {
                dataset_read_csv(&imp.path)
            } else {
                dataset_read(&imp.path)
            }
        }
        _ => Err(Error::Config("trajectory dataset needs the gas or import problem".into())),
    }
}

pub fn extrapolation_split(cfg: &RunConfig, full: &SnapshotSet) -> Result<Extrapolation> {
    match cfg.problem {
        ProblemKind::Gas => split_window(full, cfg.gas.t_train, DifferenceScheme::Central),
        ProblemKind::Import => {
            let imp = cfg.import.as_ref().ok_or_else(|| Error::Config("missing [import] section".into()))?;
            let t = imp.t_train.unwrap_or_else(|| full.times[full.len() * 9 / 10]);
            split_window(full, t, imp.derivatives.parse()?)
        }
        _ => Err(Error::Config("extrapolation needs the gas or import problem".into())),
    }
}

#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub seed: u64,
    pub model: LatentModel,
    pub history: TrainHistory,
    pub rel_l2: f64,
    pub max_rel_percent: f64,
}

/// Trains on the training window with `weights` and scores the extrapolation window.
pub fn run_extrapolation(cfg: &RunConfig, weights: LossWeights, data: &Extrapolation, seed: u64) -> Result<TrainedRun> {
    let mut model = build_model(cfg, data.train.dim(), None, seed)?;
    let spec = cfg.train_spec(seed)?;
    let mut trainer = Trainer::new(&model, weights, spec.clone())?;
    trainer.run(&mut model, std::slice::from_ref(&data.train), spec.iterations, &mut |_| Ok(()))?;
    let (rel_l2, max_rel_percent) = extrapolation_error(&model, &data.window, &cfg.predict_spec()?)?;
    Ok(TrainedRun { seed, model, history: trainer.history, rel_l2, max_rel_percent })
}

/// The four loss configurations of the ablation, built from the configured weights.
pub fn ablation_variants(w: LossWeights) -> [(&'static str, LossWeights); 4] {
    [
        ("standard", LossWeights { jac: 0.0, model: 0.0, ..w }),
        ("jacobian", LossWeights { model: 0.0, ..w }),
        ("model", LossWeights { jac: 0.0, ..w }),
        ("full", w),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub seed: u64,
    pub rel_l2: f64,
}

/// Every variant on every seed; a seed's data are shared by all variants.
pub fn run_ablation(cfg: &RunConfig, seeds: &[u64], variants: &[(&'static str, LossWeights)]) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let data = extrapolation_split(cfg, &trajectory_dataset(cfg, seed)?)?;
        for &(variant, w) in variants {
            let r = run_extrapolation(cfg, w, &data, seed)?;
            log::info!("ablation {variant} seed {seed}: e = {:.4e}", r.rel_l2);
            rows.push(AblationRow { variant, seed, rel_l2: r.rel_l2 });
        }
    }
    Ok(rows)
}

/// `(variant, mean, std)` in first-seen variant order.
pub fn summarize_ablation(rows: &[AblationRow]) -> Vec<(&'static str, f64, f64)> {
    let mut names: Vec<&'static str> = Vec::new();
    for r in rows {
        if !names.contains(&r.variant) {
            names.push(r.variant);
        }
    }
    names
        .into_iter()
        .map(|n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.variant == n).map(|r| r.rel_l2).collect();
            let (m, s) = mean_std(&v);
            (n, m, s)
        })
        .collect()
}

/// Full-order solutions at every grid point, on the learning grid.
#[derive(Clone, Debug)]
pub struct PdeTruth {
    pub problem: PdeProblem,
    pub grid: ParameterGrid,
    pub solutions: Vec<SnapshotSet>,
}

pub fn pde_truth(cfg: &RunConfig) -> Result<PdeTruth> {
    let problem = cfg.pde_problem()?;
    let grid = cfg.parameter_grid()?;
    let solutions = grid
        .points()
        .par_iter()
        .map(|mu| problem.solve(mu).map_err(|e| Error::Solver(format!("full-order solve at mu = {mu:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(PdeTruth { problem, grid, solutions })
}

impl PdeTruth {
    fn index_of(&self, mu: &[f64]) -> Result<usize> {
        (0..self.grid.len())
            .find(|&i| self.grid.point(i).iter().zip(mu).all(|(a, b)| (a - b).abs() <= 1e-12))
            .ok_or_else(|| Error::Config(format!("mu = {mu:?} is not a grid point")))
    }
}

#[derive(Clone, Debug)]
pub struct PdeRun {
    pub seed: u64,
    pub model: LatentModel,
    /// Grid with the final training marks.
    pub grid: ParameterGrid,
    /// Training points in the order they were added.
    pub selected: Vec<usize>,
    pub history: TrainHistory,
    /// `e^max%` at every grid point.
    pub max_errors: Vec<f64>,
    /// Learned entropy over the test points; thermodynamic models only.
    pub entropy: Option<EntropyReport>,
}

impl PdeRun {
    pub fn worst_error(&self) -> f64 {
        self.max_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn boundary_fraction(&self) -> f64 {
        let added: Vec<usize> = self.selected.iter().copied().filter(|i| !self.grid.corners().contains(i)).collect();
        if added.is_empty() {
            return f64::NAN;
        }
        added.iter().filter(|&&i| self.grid.is_boundary(i)).count() as f64 / added.len() as f64
    }
}

/// Trains a parametric model (greedy sampling when configured) and evaluates it on the grid.
pub fn run_pde(cfg: &RunConfig, truth: &PdeTruth, seed: u64) -> Result<PdeRun> {
    let p = &cfg.pde;
    let mu_box = ParamBox::new(vec![p.amplitude[0], p.width[0]], vec![p.amplitude[1], p.width[1]])?;
    let mut model = build_model(cfg, truth.problem.grid.nx, Some(mu_box), seed)?;
    let spec = cfg.train_spec(seed)?;
    let predict = cfg.predict_spec()?;
    let mut trainer = Trainer::new(&model, cfg.weights(), spec.clone())?;
    let mut grid = truth.grid.clone();
    let (selected, data) = match &cfg.greedy {
        Some(g) => {
            let problem = truth.problem;
            let mut fom = |mu: &[f64]| Ok(truth.solutions[truth.index_of(mu)?].clone());
            let indicator = |m: &LatentModel, mu: &[f64]| residual_indicator(m, mu, &problem, &predict);
            let out = greedy_sample(&mut model, &mut trainer, &mut grid, GreedySchedule { target: g.target, period: g.period }, &mut fom, &indicator)?;
            (out.selected, out.data)
        }
        None => {
            let idx = if p.train_points.is_empty() {
                grid.corners()
            } else {
                p.train_points.iter().map(|mu| truth.index_of(mu)).collect::<Result<Vec<_>>>()?
            };
            for &i in &idx {
                grid.mark_training(i)?;
            }
            let data = idx.iter().map(|&i| truth.solutions[i].clone()).collect();
            (idx, data)
        }
    };
    let remaining = spec.iterations.saturating_sub(trainer.iteration());
    trainer.run(&mut model, &data, remaining, &mut |_| Ok(()))?;

    let times = truth.problem.grid.times();
    let max_errors = truth
        .solutions
        .par_iter()
        .map(|s| {
            let pred = rom_predict(&model, &s.mu, s.state(0), &times, &predict)?;
            max_rel_error(&s.states, &pred.states)
        })
        .collect::<Result<Vec<_>>>()?;
    let entropy = if model.dynamics.is_thermodynamic() {
        let cases: Vec<(Vec<f64>, Vec<f64>)> =
            grid.test_indices().iter().map(|&i| (truth.solutions[i].mu.clone(), truth.solutions[i].state(0).to_vec())).collect();
        Some(entropy_report(&model, &cases, &times, &predict)?)
    } else {
        None
    };
    Ok(PdeRun { seed, model, grid, selected, history: trainer.history, max_errors, entropy })
}
