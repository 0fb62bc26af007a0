//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! `ACCEPTANCE_ONLY=1,2,5` restricts the run to the listed criteria.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlasdi::autodiff::{central_difference, gradient_discrepancy, jacobian, jvp, Activation, Matrix, Tape, Var};
use tlasdi::dynamics::{thermo_trace, Dynamics, GfinnDynamics, NetShape};
use tlasdi::eval::{linear_rom_case, mean_std, random_symmetric};
use tlasdi::fom::{
    burgers_solve_from, fd_derivatives, gas_rhs, heat_solve, unique_points, BurgersParams, DifferenceScheme, EntropyExchange,
    GasState, HeatParams, PdeGrid, SnapshotSet,
};
use tlasdi::integrate::{integrate, IntegratorSpec};
use tlasdi::nn::{Architecture, Autoencoder, Mlp, Parametric};
use tlasdi::train::{loss_and_gradient, AeModel, Batch, LatentModel, LossOptions, LossWeights};
use tlasdi_cli::config::RunConfig;
use tlasdi_cli::experiments::{extrapolation_split, pde_truth, run_extrapolation, run_pde, trajectory_dataset, PdeRun};

// tolerances
const STRUCT_SKEW: f64 = 1e-14;
const STRUCT_DEGEN: f64 = 1e-12;
const STRUCT_EIG: f64 = -1e-12;
const STRUCT_SECS: f64 = 10.0;
const LAW_TOL: f64 = 1e-12;
const DRIFT_ORDER: f64 = 3.5;
const LAW_SECS: f64 = 30.0;
const GRAD_REL: f64 = 1e-4;
const JVP_TOL: f64 = 1e-12;
const GRAD_SECS: f64 = 60.0;
const CONST_IC_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-13;
const FD_ORDER: (f64, f64) = (1.9, 2.1);
const ORACLE_REL: f64 = 1e-13;
const IDENTITY_TOL: f64 = 1e-10;
const RATIO_CHANGE: f64 = 0.2;
/// measured and bound coincide at t = 0; allow rounding there
const ENVELOPE_SLACK: f64 = 1e-12;
const LINEAR_SECS: f64 = 30.0;
const GAS_MEAN: f64 = 5e-2;
const GAS_WINS: usize = 4;
const GAS_SECS: f64 = 30.0 * 60.0;
const ABLATION_SECS: f64 = 60.0 * 60.0;
const BURGERS_WORST: f64 = 10.0;
const BURGERS_POINTS: usize = 8;
const BURGERS_SECS: f64 = 60.0 * 60.0;
const ENTROPY_SEEDS: usize = 3;
const ENTROPY_WINDOW: f64 = 0.1;

struct Outcome {
    pass: bool,
    detail: String,
    /// Every number the criterion computed, for the determinism check.
    values: Vec<f64>,
}

fn config(name: &str) -> RunConfig {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "configs", name].iter().collect();
    RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn min_eigenvalue(m: &Matrix) -> f64 {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice()).symmetric_eigen().eigenvalues.min()
}

fn random_gfinn(rng: &mut ChaCha8Rng) -> GfinnDynamics {
    let n = rng.random_range(2..=6);
    let k = rng.random_range(1..=4);
    let act = [Activation::Tanh, Activation::Sine][rng.random_range(0..2)];
    let shared = rng.random_bool(0.5);
    GfinnDynamics::random(n, k, &NetShape::new(vec![10, 10], act), shared, rng).unwrap()
}

fn structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut skew, mut ls, mut me, mut eig) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let mut values = Vec::new();
    for _ in 0..100 {
        let g = random_gfinn(&mut rng);
        let n = g.latent_dim();
        for _ in 0..100 {
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let l = g.poisson_matrix(&z).unwrap();
            let m = g.friction_matrix(&z).unwrap();
            let a = l.add(&l.transpose()).unwrap().max_abs();
            let b = max_abs(&l.matvec(&g.grad_entropy(&z).unwrap()).unwrap());
            let c = max_abs(&m.matvec(&g.grad_energy(&z).unwrap()).unwrap());
            let e = min_eigenvalue(&m);
            values.extend([a, b, c]);
            values.extend(l.as_slice());
            values.extend(m.as_slice());
            skew = skew.max(a);
            ls = ls.max(b);
            me = me.max(c);
            eig = eig.min(e);
        }
    }
    Outcome {
        pass: skew <= STRUCT_SKEW && ls <= STRUCT_DEGEN && me <= STRUCT_DEGEN && eig >= STRUCT_EIG,
        detail: format!("max|L+Lᵀ| {skew:.2e}, ‖L∇S‖∞ {ls:.2e}, ‖M∇E‖∞ {me:.2e}, min eig(M) {eig:.2e}"),
        values,
    }
}

fn energy_drift(d: &Dynamics, z0: &[f64], dt: f64) -> f64 {
    let tr = integrate(|_, z| d.rhs(z), z0, 0.0, 4.0, &IntegratorSpec::rk4(dt)).unwrap();
    let Dynamics::Gfinn(g) = d else { unreachable!() };
    let e0 = g.energy_net().forward(z0).unwrap()[0];
    let e1 = g.energy_net().forward(tr.last()).unwrap()[0];
    (e1 - e0).abs()
}

fn laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut de, mut ds) = (0.0f64, f64::INFINITY);
    let mut values = Vec::new();
    for _ in 0..20 {
        let g = random_gfinn(&mut rng);
        let z0: Vec<f64> = (0..g.latent_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = Dynamics::Gfinn(g);
        let tr = integrate(|_, z| d.rhs(z), &z0, 0.0, 2.0, &IntegratorSpec::rk4(0.01)).unwrap();
        let states = Matrix::from_rows(&tr.states).unwrap();
        let t = thermo_trace(&d, &states).unwrap();
        de = de.max(max_abs(&t.energy_rate));
        ds = ds.min(t.entropy_rate.iter().copied().fold(f64::INFINITY, f64::min));
        values.extend(&t.energy_rate);
        values.extend(&t.entropy_rate);
    }
    // a fast flow keeps the drift well above rounding
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut g = GfinnDynamics::random(3, 3, &NetShape::new(vec![10, 10], Activation::Tanh), false, &mut rng).unwrap();
    let z0 = [0.4, -0.3, 0.8];
    let speed = tlasdi::autodiff::norm2(&Dynamics::Gfinn(g.clone()).rhs(&z0).unwrap());
    let [_, _, u, _] = g.networks_mut();
    let last = u.architecture().num_layers();
    u.layer_mut(last).0.iter_mut().for_each(|p| *p *= 2.0 / speed);
    let d = Dynamics::Gfinn(g);
    let (e1, e2) = (energy_drift(&d, &z0, 0.2), energy_drift(&d, &z0, 0.1));
    let order = (e1 / e2).log2();
    values.extend([e1, e2]);
    Outcome {
        pass: de <= LAW_TOL && ds >= -LAW_TOL && order >= DRIFT_ORDER,
        detail: format!("max|∇E·F| {de:.2e}, min ∇S·F {ds:.2e}, rk4 drift {e1:.2e} → {e2:.2e} (order {order:.2})"),
        values,
    }
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let enc = Architecture::uniform(vec![6, 5, 2], Activation::Tanh).unwrap();
    let dec = Architecture::uniform(vec![2, 5, 6], Activation::Tanh).unwrap();
    let ae = Autoencoder::new(Mlp::random(enc, &mut rng), Mlp::random(dec.clone(), &mut rng)).unwrap();
    let g = GfinnDynamics::random(2, 2, &NetShape::new(vec![6], Activation::Tanh), false, &mut rng).unwrap();
    let model = LatentModel::new(AeModel::Plain(ae), Dynamics::Gfinn(g)).unwrap();
    let nt = 5;
    let times: Vec<f64> = (0..nt).map(|k| 0.1 * k as f64).collect();
    let x: Vec<f64> = (0..nt * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dx: Vec<f64> = (0..nt * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let data = [SnapshotSet::new(vec![], times, Matrix::from_vec(nt, 6, x).unwrap())
        .unwrap()
        .with_derivatives(Matrix::from_vec(nt, 6, dx).unwrap())
        .unwrap()];
    let w = LossWeights { int: 1.0, rec: 0.5, jac: 0.3, model: 0.2, deg: 0.0, reg: 0.0 };
    let opts = LossOptions::default();
    let batch = Batch::full(&data);
    let (_, grad) = loss_and_gradient(&model, &data, &batch, &w, &opts).unwrap();
    let theta = model.flat_params();
    let f = |p: &[f64]| {
        let mut m = model.clone();
        m.read_params(p)?;
        Ok(loss_and_gradient(&m, &data, &batch, &w, &opts)?.0.total)
    };
    let fd = central_difference(f, &theta, 1e-6).unwrap();
    let rel = gradient_discrepancy(&grad, &fd).max_rel_error;

    let net = Mlp::random(dec, &mut rng);
    let map = |t: &mut Tape, z: Var| net.bind(t)?.forward(t, z);
    let z = [0.3, -0.7];
    let jac = jacobian(&map, &z).unwrap();
    let mut jvp_err = 0.0f64;
    let mut values = grad.clone();
    for _ in 0..10 {
        let v: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, jv) = jvp(&map, &z, &v).unwrap();
        let dense = jac.matvec(&v).unwrap();
        jvp_err = jvp_err.max(max_abs(&tlasdi::autodiff::sub_vec(&jv, &dense)));
        values.extend(jv);
    }
    Outcome {
        pass: rel <= GRAD_REL && jvp_err <= JVP_TOL,
        detail: format!("loss gradient vs FD max rel {rel:.2e} ({} params), jvp vs Jacobian {jvp_err:.2e}", theta.len()),
        values,
    }
}

fn oracle_rows() -> Vec<Vec<f64>> {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "tests", "fixtures", "gas_rhs_oracle.csv"].iter().collect();
    let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    text.lines().skip(1).map(|l| l.split(',').map(|s| s.trim().parse().unwrap()).collect()).collect()
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(g, w)| if *w == 0.0 { if *g == 0.0 { 0.0 } else { f64::INFINITY } } else { ((g - w) / w).abs() })
        .fold(0.0, f64::max)
}

fn solvers() -> Outcome {
    let mut values = Vec::new();
    let grid = PdeGrid { nx: 201, nt: 100, ..PdeGrid::default() };
    let mut const_err = 0.0f64;
    for c in [0.0, 0.8, -0.5, 1.7] {
        let s = burgers_solve_from(&vec![c; grid.nx - 1], &BurgersParams::new(0.0, 1.0).with_grid(grid)).unwrap();
        const_err = const_err.max(s.states.as_slice().iter().fold(0.0, |a, v| a.max((v - c).abs())));
    }
    values.push(const_err);

    let heat = heat_solve(&HeatParams::new(0.75, 1.0)).unwrap();
    let mass: Vec<f64> = (0..heat.len()).map(|k| unique_points(heat.state(k)).iter().sum()).collect();
    let mass_err = mass.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max) / mass[0].abs();
    values.extend(&mass);

    let fd_err = |dt: f64| {
        let nt = (2.0 / dt).round() as usize + 1;
        let times: Vec<f64> = (0..nt).map(|k| k as f64 * dt).collect();
        let rows: Vec<Vec<f64>> = times.iter().map(|t| vec![t.sin(), (2.0 * t).cos()]).collect();
        let s = SnapshotSet::new(vec![], times, Matrix::from_rows(&rows).unwrap()).unwrap();
        let d = fd_derivatives(&s, DifferenceScheme::Central).unwrap();
        (1..nt - 1)
            .map(|k| {
                let t = d.times[k];
                let e = d.derivative(k).unwrap();
                (e[0] - t.cos()).abs().max((e[1] + 2.0 * (2.0 * t).sin()).abs())
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (fd_err(0.02), fd_err(0.01));
    let order = (e1 / e2).log2();
    values.extend([e1, e2]);

    let rows = oracle_rows();
    let mut oracle = 0.0f64;
    for r in &rows {
        let s = GasState::new(r[0], r[1], r[2], r[3]);
        let m = gas_rhs(&s, EntropyExchange::Mirrored).unwrap();
        let c = gas_rhs(&s, EntropyExchange::EnergyConserving).unwrap();
        oracle = oracle.max(rel_err(&m, &r[4..8])).max(rel_err(&c, &[r[4], r[5], r[6], r[8]]));
        values.extend(m);
        values.extend(c);
    }
    Outcome {
        pass: const_err <= CONST_IC_TOL
            && mass_err <= MASS_TOL
            && (FD_ORDER.0..=FD_ORDER.1).contains(&order)
            && oracle <= ORACLE_REL
            && rows.len() == 1000,
        detail: format!(
            "Burgers constant IC {const_err:.1e}, heat mass drift/step {mass_err:.1e}, FD order {order:.3}, gas oracle rel {oracle:.1e} ({} states)",
            rows.len()
        ),
        values,
    }
}

fn linear() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut ident, mut constant, mut change) = (0.0f64, 0.0f64, 0.0f64);
    let mut values = Vec::new();
    for _ in 0..10 {
        let m = random_symmetric(10, &mut rng);
        let x0: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coarse = linear_rom_case(&m, 3, &x0, 1.0, 50).unwrap();
        let fine = linear_rom_case(&m, 3, &x0, 1.0, 100).unwrap();
        ident = ident.max(coarse.identities.max()).max(fine.identities.max());
        constant = constant.max(coarse.constant()).max(fine.constant());
        let rf = fine.ratio();
        for (k, r) in coarse.ratio().iter().enumerate() {
            if let (Some(a), Some(b)) = (r, rf[2 * k]) {
                change = change.max((a / b - 1.0).abs());
            }
        }
        values.extend(&coarse.measured);
        values.extend(&coarse.bound);
        values.push(coarse.report.constant());
    }
    Outcome {
        pass: ident <= IDENTITY_TOL && constant <= 1.0 + ENVELOPE_SLACK && change <= RATIO_CHANGE,
        detail: format!("identities {ident:.2e}, max measured/bound 1 + {:.1e}, ratio change under halving {:.2}%", constant - 1.0, 100.0 * change),
        values,
    }
}

struct GasRuns {
    tlasdi: Vec<f64>,
    fnn: Vec<f64>,
}

fn gas_runs(with_fnn: bool) -> GasRuns {
    let cfg = config("gas-desk.toml");
    let fnn_cfg = config("gas-desk-fnn.toml");
    let mut runs = GasRuns { tlasdi: vec![], fnn: vec![] };
    for &seed in &cfg.ablation.seeds {
        let data = extrapolation_split(&cfg, &trajectory_dataset(&cfg, seed).unwrap()).unwrap();
        let a = run_extrapolation(&cfg, cfg.weights(), &data, seed).map(|r| r.rel_l2).unwrap_or(f64::INFINITY);
        runs.tlasdi.push(a);
        if with_fnn {
            let b = run_extrapolation(&fnn_cfg, fnn_cfg.weights(), &data, seed).map(|r| r.rel_l2).unwrap_or(f64::INFINITY);
            runs.fnn.push(b);
            eprintln!("  gas seed {seed}: tLaSDI {a:.3e}, vanilla FNN {b:.3e}");
        } else {
            eprintln!("  gas seed {seed}: tLaSDI {a:.3e}");
        }
    }
    runs
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ")
}

fn gas(runs: &GasRuns, secs: f64) -> Outcome {
    let (mt, st) = mean_std(&runs.tlasdi);
    let (mf, _) = mean_std(&runs.fnn);
    let wins = runs.tlasdi.iter().zip(&runs.fnn).filter(|(a, b)| a <= b).count();
    Outcome {
        pass: mt <= GAS_MEAN && wins >= GAS_WINS && secs <= GAS_SECS,
        detail: format!(
            "tLaSDI e_l2 {mt:.3e} ± {st:.2e} [{}], vanilla FNN mean {mf:.3e} [{}], tLaSDI ≤ FNN in {wins}/{}",
            fmt_list(&runs.tlasdi),
            fmt_list(&runs.fnn),
            runs.tlasdi.len()
        ),
        values: vec![],
    }
}

fn ablation(full: &[f64]) -> Outcome {
    let cfg = config("gas-desk.toml");
    let w = cfg.weights();
    let standard_w = LossWeights { jac: 0.0, model: 0.0, ..w };
    let standard: Vec<f64> = cfg
        .ablation
        .seeds
        .iter()
        .map(|&seed| {
            let data = extrapolation_split(&cfg, &trajectory_dataset(&cfg, seed).unwrap()).unwrap();
            let e = run_extrapolation(&cfg, standard_w, &data, seed).map(|r| r.rel_l2).unwrap_or(f64::INFINITY);
            eprintln!("  ablation seed {seed}: standard {e:.3e}");
            e
        })
        .collect();
    let (ms, ss) = mean_std(&standard);
    let (mf, sf) = mean_std(full);
    Outcome {
        pass: mf < ms,
        detail: format!("standard {ms:.3e} ± {ss:.2e} [{}], full {mf:.3e} ± {sf:.2e} [{}]", fmt_list(&standard), fmt_list(full)),
        values: vec![],
    }
}

fn pde_runs(name: &str) -> Vec<PdeRun> {
    let cfg = config(name);
    let truth = pde_truth(&cfg).unwrap();
    cfg.ablation
        .seeds
        .iter()
        .filter_map(|&seed| match run_pde(&cfg, &truth, seed) {
            Ok(r) => {
                let (early, late) = r.entropy.as_ref().map_or((f64::NAN, f64::NAN), |e| e.early_late_rates(ENTROPY_WINDOW));
                eprintln!(
                    "  {name} seed {seed}: worst e_max {:.2}%, {} training points, boundary share {:.2}, dS/dt early {early:.3e} late {late:.3e}",
                    r.worst_error(),
                    r.selected.len(),
                    r.boundary_fraction()
                );
                Some(r)
            }
            Err(e) => {
                eprintln!("  {name} seed {seed}: failed: {e}");
                None
            }
        })
        .collect()
}

fn burgers(runs: &[PdeRun], secs: f64) -> Outcome {
    let worst: Vec<f64> = runs.iter().map(|r| r.worst_error()).collect();
    let primary = runs.iter().find(|r| r.seed == 0);
    let (w0, pts) = primary.map_or((f64::INFINITY, 0), |r| (r.worst_error(), r.selected.len()));
    Outcome {
        pass: w0 <= BURGERS_WORST && pts == BURGERS_POINTS && secs <= BURGERS_SECS,
        detail: format!("seed 0 worst e_max {w0:.2}% with {pts} greedy points; all seeds [{}]", worst.iter().map(|w| format!("{w:.2}%")).collect::<Vec<_>>().join(" ")),
        values: vec![],
    }
}

fn entropy(burgers: &[PdeRun], heat: &[PdeRun]) -> Outcome {
    let rates = |runs: &[PdeRun]| -> Vec<(f64, f64)> {
        runs.iter().filter_map(|r| r.entropy.as_ref().map(|e| e.early_late_rates(ENTROPY_WINDOW))).collect()
    };
    let (b, h) = (rates(burgers), rates(heat));
    let b_ok = b.iter().filter(|(e, l)| l > e).count();
    let h_ok = h.iter().filter(|(e, l)| l < e).count();
    let show = |v: &[(f64, f64)]| v.iter().map(|(e, l)| format!("{e:.2e}→{l:.2e}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: b_ok >= ENTROPY_SEEDS && h_ok >= ENTROPY_SEEDS,
        detail: format!(
            "Burgers late > early in {b_ok}/{} [{}]; heat late < early in {h_ok}/{} [{}]",
            b.len(),
            show(&b),
            h.len(),
            show(&h)
        ),
        values: vec![],
    }
}

fn report(id: u8, name: &str, o: &Outcome, secs: f64) -> bool {
    println!("[{}] criterion {id:>2} {name}: {} ({secs:.1} s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, f64) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let only: Option<Vec<u8>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |id: u8| only.as_ref().is_none_or(|v| v.contains(&id));
    let mut ok = true;

    type Quick = (u8, &'static str, fn() -> Outcome, f64);
    let quick: [Quick; 5] = [
        (1, "structural exactness", structure, STRUCT_SECS),
        (2, "thermodynamic laws", laws, LAW_SECS),
        (3, "gradient correctness", gradients, GRAD_SECS),
        (4, "solver correctness", solvers, f64::INFINITY),
        (5, "linear-case error bound", linear, LINEAR_SECS),
    ];
    let mut first = Vec::new();
    for (id, name, f, limit) in quick {
        if !want(id) {
            continue;
        }
        let (mut o, secs) = timed(f);
        if secs > limit {
            o.pass = false;
            o.detail.push_str(&format!("; over the {limit} s budget"));
        }
        ok &= report(id, name, &o, secs);
        first.push((id, f, o.values));
    }

    let mut gas_full = None;
    if want(6) {
        let t = Instant::now();
        let runs = gas_runs(true);
        let secs = t.elapsed().as_secs_f64();
        ok &= report(6, "desk-scale gas extrapolation", &gas(&runs, secs), secs);
        gas_full = Some(runs.tlasdi);
    }
    if want(7) {
        let t = Instant::now();
        let full = gas_full.unwrap_or_else(|| gas_runs(false).tlasdi);
        let mut o = ablation(&full);
        let secs = t.elapsed().as_secs_f64();
        if secs > ABLATION_SECS {
            o.pass = false;
            o.detail.push_str("; over budget");
        }
        ok &= report(7, "loss-ablation direction", &o, secs);
    }
    if want(8) || want(9) {
        let t = Instant::now();
        let b = pde_runs("burgers-desk.toml");
        let secs = t.elapsed().as_secs_f64();
        if want(8) {
            ok &= report(8, "desk-scale Burgers greedy", &burgers(&b, secs), secs);
        }
        if want(9) {
            let t = Instant::now();
            let h = pde_runs("heat-desk.toml");
            let heat_secs = t.elapsed().as_secs_f64();
            ok &= report(9, "entropy-rate direction", &entropy(&b, &h), secs + heat_secs);
        }
    }
    if want(10) {
        let t = Instant::now();
        let mut mismatched = Vec::new();
        let mut compared = 0usize;
        for (id, f, values) in &first {
            let again = f().values;
            compared += values.len();
            let same = values.len() == again.len() && values.iter().zip(&again).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                mismatched.push(*id);
            }
        }
        let o = Outcome {
            pass: !first.is_empty() && mismatched.is_empty(),
            detail: if first.is_empty() {
                "criteria 1-5 were not run".into()
            } else {
                format!("{compared} values from criteria {:?} compared bitwise, mismatches in {mismatched:?}", first.iter().map(|f| f.0).collect::<Vec<_>>())
            },
            values: vec![],
        };
        ok &= report(10, "determinism", &o, t.elapsed().as_secs_f64());
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
