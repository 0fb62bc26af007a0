//! Subcommand bodies. Each writes its artifacts into an output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tlasdi::autodiff::Matrix;
use tlasdi::eval::{error_components, linear_rom_case, random_symmetric, rom_predict, write_heatmap_csv, ErrorReport};
use tlasdi::fom::{dataset_write, dataset_write_csv, SnapshotSet};
use tlasdi::nn::Checkpoint;
use tlasdi::train::{LatentModel, Trainer};
use tlasdi::{Error, Result};

use crate::config::{ProblemKind, RunConfig};
use crate::experiments::{
    ablation_variants, build_model, extrapolation_error, extrapolation_split, pde_truth, run_ablation, run_pde,
    summarize_ablation, trajectory_dataset,
};

/// Reported gas ablation values at full scale: `(variant, mean, std)`.
const REFERENCE_ABLATION: [(&str, f64, f64); 2] = [("standard", 1.79e-2, 6.05e-3), ("jacobian", 5.52e-3, 7.54e-4)];

pub const CHECKPOINT_FILE: &str = "model.ckpt";

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn csv_writer(path: PathBuf) -> Result<fs::File> {
    Ok(fs::File::create(path)?)
}

fn save_model(model: &LatentModel, training: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut ck = Checkpoint::new();
    model.save(&mut ck);
    if !training.is_empty() {
        ck.put_array("training.mu", &Matrix::from_rows(training)?);
    }
    ck.save(path)
}

fn load_model(path: &Path) -> Result<(LatentModel, Vec<Vec<f64>>)> {
    let ck = Checkpoint::load(path)?;
    let model = LatentModel::load(&ck)?;
    let training = if ck.contains("training.mu") {
        let m = ck.array("training.mu")?;
        (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
    } else {
        Vec::new()
    };
    Ok((model, training))
}

fn check_dim(model: &LatentModel, dim: usize) -> Result<()> {
    if model.full_dim() != dim {
        return Err(Error::Dimension {
            context: "checkpoint vs problem",
            expected: dim.to_string(),
            got: model.full_dim().to_string(),
        });
    }
    Ok(())
}

fn mu_tag(mu: &[f64]) -> String {
    mu.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("_")
}

/// Writes the problem's snapshot data: one dataset for gas or import, one per training
/// parameter (corners when none are listed) for the PDE problems.
pub fn cmd_generate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    let mut emit = |name: String, set: &SnapshotSet| -> Result<()> {
        let bin = out.join(format!("{name}.tlsd"));
        dataset_write(set, &bin)?;
        dataset_write_csv(set, out.join(format!("{name}.csv")))?;
        written.push(bin);
        Ok(())
    };
    match cfg.problem {
        ProblemKind::Gas | ProblemKind::Import => {
            let set = trajectory_dataset(cfg, seed)?;
            emit(format!("{}_seed{seed}", if cfg.problem == ProblemKind::Gas { "gas" } else { "import" }), &set)?;
        }
        ProblemKind::Burgers | ProblemKind::Heat => {
            let problem = cfg.pde_problem()?;
            let grid = cfg.parameter_grid()?;
            let points: Vec<Vec<f64>> = if cfg.pde.train_points.is_empty() {
                grid.corners().into_iter().map(|i| grid.point(i)).collect()
            } else {
                cfg.pde.train_points.iter().map(|p| p.to_vec()).collect()
            };
            for mu in points {
                let set = problem.solve(&mu).map_err(|e| Error::Solver(format!("mu = {mu:?}: {e}")))?;
                emit(format!("{}_{}", problem.kind, mu_tag(&mu)), &set)?;
            }
        }
    }
    Ok(written)
}

/// Trains one model. A checkpoint is written at every checkpoint interval and at the end;
/// zero iterations write only the initialized checkpoint.
pub fn cmd_train(cfg: &RunConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let ck_path = out.join(CHECKPOINT_FILE);
    match cfg.problem {
        ProblemKind::Gas | ProblemKind::Import => {
            let data = extrapolation_split(cfg, &trajectory_dataset(cfg, seed)?)?;
            let mut model = build_model(cfg, data.train.dim(), None, seed)?;
            save_model(&model, &[], &ck_path)?;
            if cfg.train.iterations == 0 {
                return Ok(ck_path);
            }
            let spec = cfg.train_spec(seed)?;
            let mut trainer = Trainer::new(&model, cfg.weights(), spec.clone())?;
            let res = trainer.run(&mut model, std::slice::from_ref(&data.train), spec.iterations, &mut |ev| {
                log::info!("iteration {} loss {:.4e}", ev.iteration, ev.row.loss.total);
                save_model(ev.model, &[], &ck_path)
            });
            trainer.history.write_csv(out.join("history.csv"))?;
            res?;
        }
        ProblemKind::Burgers | ProblemKind::Heat => {
            if cfg.train.iterations == 0 {
                let p = &cfg.pde;
                let bx = tlasdi::nn::ParamBox::new(vec![p.amplitude[0], p.width[0]], vec![p.amplitude[1], p.width[1]])?;
                let model = build_model(cfg, p.nx, Some(bx), seed)?;
                save_model(&model, &[], &ck_path)?;
                return Ok(ck_path);
            }
            let truth = pde_truth(cfg)?;
            let run = run_pde(cfg, &truth, seed)?;
            let training: Vec<Vec<f64>> = run.selected.iter().map(|&i| run.grid.point(i)).collect();
            save_model(&run.model, &training, &ck_path)?;
            run.history.write_csv(out.join("history.csv"))?;
            let mut w = csv_writer(out.join("selected.csv"))?;
            writeln!(w, "order,index,mu_0,mu_1")?;
            for (k, (&i, mu)) in run.selected.iter().zip(&training).enumerate() {
                writeln!(w, "{k},{i},{},{}", mu[0], mu[1])?;
            }
            write_heatmap_csv(out.join("heatmap.csv"), &run.grid, &run.max_errors, "max_rel_error_percent")?;
            if let Some(e) = &run.entropy {
                e.write_csv(out.join("entropy.csv"))?;
            }
        }
    }
    Ok(ck_path)
}

fn write_error_bound(report: &ErrorReport, path: PathBuf) -> Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "t,measured,eps_int,eps_rec,eps_jac,eps_mod,bound")?;
    let bound = report.bound();
    for k in 0..report.times.len() {
        let opt = |v: &Option<Vec<f64>>| v.as_ref().map(|v| format!("{:e}", v[k])).unwrap_or_default();
        writeln!(
            w,
            "{},{:e},{:e},{:e},{},{},{:e}",
            report.times[k],
            report.measured[k],
            report.eps_int[k],
            report.eps_rec[k],
            opt(&report.eps_jac),
            opt(&report.eps_mod),
            bound[k]
        )?;
    }
    Ok(())
}

/// Metrics of a trained checkpoint: extrapolation error and prediction for gas or import,
/// heatmap and entropy report for the PDE problems. Returns the headline metric
/// (`e^ℓ2` or worst `e^max%`).
pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path, seed: u64, out: &Path) -> Result<f64> {
    ensure_dir(out)?;
    let (model, training) = load_model(checkpoint)?;
    let predict = cfg.predict_spec()?;
    match cfg.problem {
        ProblemKind::Gas | ProblemKind::Import => {
            let data = extrapolation_split(cfg, &trajectory_dataset(cfg, seed)?)?;
            check_dim(&model, data.train.dim())?;
            let (l2, max) = extrapolation_error(&model, &data.window, &predict)?;
            let mut w = csv_writer(out.join("extrapolation.csv"))?;
            writeln!(w, "seed,rel_l2,max_rel_percent")?;
            writeln!(w, "{seed},{l2:e},{max:e}")?;
            let p = rom_predict(&model, &data.window.mu, data.window.state(0), &data.window.times, &predict)?;
            let mut w = csv_writer(out.join("prediction.csv"))?;
            let dim = data.window.dim();
            let names: Vec<String> = (0..dim).map(|i| format!("true_{i},pred_{i}")).collect();
            writeln!(w, "t,{}", names.join(","))?;
            for k in 0..data.window.len() {
                let vals: Vec<String> = (0..dim).map(|i| format!("{:e},{:e}", data.window.state(k)[i], p.states.row(k)[i])).collect();
                writeln!(w, "{},{}", data.window.times[k], vals.join(","))?;
            }
            write_error_bound(&error_components(&model, &data.train, &predict)?, out.join("error_bound.csv"))?;
            Ok(l2)
        }
        ProblemKind::Burgers | ProblemKind::Heat => {
            check_dim(&model, cfg.pde.nx)?;
            let truth = pde_truth(cfg)?;
            let mut grid = truth.grid.clone();
            for mu in &training {
                if let Some(i) = (0..grid.len()).find(|&i| grid.point(i).iter().zip(mu).all(|(a, b)| (a - b).abs() <= 1e-12)) {
                    grid.mark_training(i)?;
                }
            }
            let times = truth.problem.grid.times();
            let mut errors = Vec::with_capacity(grid.len());
            for s in &truth.solutions {
                let pred = rom_predict(&model, &s.mu, s.state(0), &times, &predict)?;
                errors.push(tlasdi::eval::max_rel_error(&s.states, &pred.states)?);
            }
            write_heatmap_csv(out.join("heatmap.csv"), &grid, &errors, "max_rel_error_percent")?;
            if model.dynamics.is_thermodynamic() {
                let cases: Vec<(Vec<f64>, Vec<f64>)> =
                    grid.test_indices().iter().map(|&i| (truth.solutions[i].mu.clone(), truth.solutions[i].state(0).to_vec())).collect();
                tlasdi::eval::entropy_report(&model, &cases, &times, &predict)?.write_csv(out.join("entropy.csv"))?;
            }
            Ok(errors.iter().copied().fold(0.0, f64::max))
        }
    }
}

/// Runs the four loss configurations on every seed and writes per-run rows plus a
/// mean±std table that carries the reported full-scale values alongside.
pub fn cmd_ablate(cfg: &RunConfig, seeds: &[u64], out: &Path) -> Result<Vec<(&'static str, f64, f64)>> {
    ensure_dir(out)?;
    let rows = run_ablation(cfg, seeds, &ablation_variants(cfg.weights()))?;
    let mut w = csv_writer(out.join("ablation_runs.csv"))?;
    writeln!(w, "variant,seed,rel_l2")?;
    for r in &rows {
        writeln!(w, "{},{},{:e}", r.variant, r.seed, r.rel_l2)?;
    }
    let summary = summarize_ablation(&rows);
    let mut w = csv_writer(out.join("ablation.csv"))?;
    writeln!(w, "variant,mean,std,reported_mean,reported_std")?;
    for (v, m, s) in &summary {
        let (rm, rs) = REFERENCE_ABLATION
            .iter()
            .find(|r| r.0 == *v)
            .map(|r| (format!("{:e}", r.1), format!("{:e}", r.2)))
            .unwrap_or_default();
        writeln!(w, "{v},{m:e},{s:e},{rm},{rs}")?;
    }
    Ok(summary)
}

/// Error-bound components along a training trajectory of a trained checkpoint.
pub fn cmd_diagnose(cfg: &RunConfig, checkpoint: &Path, seed: u64, out: &Path) -> Result<ErrorReport> {
    ensure_dir(out)?;
    let (model, training) = load_model(checkpoint)?;
    let predict = cfg.predict_spec()?;
    let truth = match cfg.problem {
        ProblemKind::Gas | ProblemKind::Import => extrapolation_split(cfg, &trajectory_dataset(cfg, seed)?)?.train,
        ProblemKind::Burgers | ProblemKind::Heat => {
            let problem = cfg.pde_problem()?;
            let mu = match training.first() {
                Some(mu) => mu.clone(),
                None => cfg.parameter_grid()?.point(0),
            };
            problem.solve(&mu)?
        }
    };
    check_dim(&model, truth.dim())?;
    let report = error_components(&model, &truth, &predict)?;
    write_error_bound(&report, out.join("error_bound.csv"))?;
    Ok(report)
}

/// Linear-system check on `systems` random symmetric `dim × dim` matrices with an
/// `n`-dimensional spectral reduction. Returns the largest identity residual and the
/// largest empirical constant.
pub fn cmd_linear_check(seed: u64, systems: usize, dim: usize, n: usize, out: &Path) -> Result<(f64, f64)> {
    ensure_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv_writer(out.join("linear.csv"))?;
    writeln!(w, "system,t,measured,bound")?;
    let mut summary = csv_writer(out.join("linear_summary.csv"))?;
    writeln!(summary, "system,identity_residual,constant")?;
    let (mut worst_id, mut worst_c) = (0.0f64, 0.0f64);
    for s in 0..systems {
        let m = random_symmetric(dim, &mut rng);
        let x0: Vec<f64> = (0..dim).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let case = linear_rom_case(&m, n, &x0, 1.0, 200)?;
        for k in 0..case.times.len() {
            writeln!(w, "{s},{},{:e},{:e}", case.times[k], case.measured[k], case.bound[k])?;
        }
        let (id, c) = (case.identities.max(), case.constant());
        writeln!(summary, "{s},{id:e},{c:e}")?;
        worst_id = worst_id.max(id);
        worst_c = worst_c.max(c);
    }
    Ok((worst_id, worst_c))
}
