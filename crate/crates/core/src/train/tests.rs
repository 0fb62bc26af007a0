use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{central_difference, gradient_discrepancy, jacobian, Activation, Matrix, Tape, Var};
use crate::dynamics::{Dynamics, FnnDynamics, GfinnDynamics, NetShape, SpnnDynamics};
use crate::fom::SnapshotSet;
use crate::integrate::Scheme;
use crate::nn::{Architecture, Autoencoder, Checkpoint, HyperAutoencoder, Mlp, ParamBox, Parametric};

fn linear_net(a: &Matrix) -> Mlp {
    let arch = Architecture::uniform(vec![a.cols(), a.rows()], Activation::Identity).unwrap();
    let mut params = a.as_slice().to_vec();
    params.extend(vec![0.0; a.rows()]);
    Mlp::new(arch, params).unwrap()
}

fn identity_ae(n: usize) -> Autoencoder {
    let i = Matrix::identity(n);
    Autoencoder::full_rank(linear_net(&i), linear_net(&i)).unwrap()
}

fn random_ae(full: usize, latent: usize, rng: &mut ChaCha8Rng) -> Autoencoder {
    let e = Architecture::uniform(vec![full, 5, latent], Activation::Tanh).unwrap();
    let d = Architecture::uniform(vec![latent, 5, full], Activation::Tanh).unwrap();
    Autoencoder::new(Mlp::random(e, rng), Mlp::random(d, rng)).unwrap()
}

fn random_set(nt: usize, n: usize, with_derivs: bool, rng: &mut ChaCha8Rng) -> SnapshotSet {
    let times: Vec<f64> = (0..nt).map(|k| 0.1 * k as f64).collect();
    let data: Vec<f64> = (0..nt * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = SnapshotSet::new(vec![], times, Matrix::from_vec(nt, n, data).unwrap()).unwrap();
    if with_derivs {
        let d: Vec<f64> = (0..nt * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        s.with_derivatives(Matrix::from_vec(nt, n, d).unwrap()).unwrap()
    } else {
        s
    }
}

fn gfinn_model(full: usize, latent: usize, k: usize, seed: u64) -> LatentModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ae = random_ae(full, latent, &mut rng);
    let g = GfinnDynamics::random(latent, k, &NetShape::new(vec![6], Activation::Tanh), false, &mut rng).unwrap();
    LatentModel::new(AeModel::Plain(ae), Dynamics::Gfinn(g)).unwrap()
}

fn zero_dynamics_model(ae: Autoencoder) -> LatentModel {
    let n = ae.latent_dim();
    let net = Mlp::zeros(Architecture::uniform(vec![n, 4, n], Activation::Tanh).unwrap());
    LatentModel::new(AeModel::Plain(ae), Dynamics::Fnn(FnnDynamics::new(net).unwrap())).unwrap()
}

fn opts() -> LossOptions {
    LossOptions::default()
}

#[test]
fn int_loss_zero_for_static_data_and_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = zero_dynamics_model(random_ae(4, 2, &mut rng));
    let s = SnapshotSet::new(vec![], vec![0.0, 0.1, 0.2], Matrix::filled(3, 4, 0.3)).unwrap();
    let data = [s];
    assert_eq!(loss_int(&m, &data, &Batch::full(&data), &opts()).unwrap(), 0.0);
}

#[test]
fn int_loss_ignores_decoder() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut m = gfinn_model(5, 2, 2, 3);
    let data = [random_set(6, 5, false, &mut rng)];
    let b = Batch::full(&data);
    let before = loss_int(&m, &data, &b, &opts()).unwrap();
    if let AeModel::Plain(ae) = &mut m.ae {
        ae.decoder_mut().params_mut().iter_mut().for_each(|p| *p += rng.random_range(-1.0..1.0));
    }
    assert_eq!(loss_int(&m, &data, &b, &opts()).unwrap(), before);
}

#[test]
fn int_loss_matches_hand_rk4() {
    // identity autoencoder, ż = Az, one step of size h
    let a = Matrix::from_rows(&[vec![-0.5, 1.0], vec![-1.0, -0.2]]).unwrap();
    let m = LatentModel::new(AeModel::Plain(identity_ae(2)), Dynamics::Fnn(FnnDynamics::new(linear_net(&a)).unwrap())).unwrap();
    let (x0, x1, h) = ([0.3, -0.7], [0.25, -0.55], 0.1);
    let s = SnapshotSet::new(vec![], vec![0.0, h], Matrix::from_rows(&[x0.to_vec(), x1.to_vec()]).unwrap()).unwrap();
    let data = [s];
    let f = |z: &[f64]| a.matvec(z).unwrap();
    let add = |z: &[f64], k: &[f64], c: f64| vec![z[0] + c * k[0], z[1] + c * k[1]];
    let k1 = f(&x0);
    let k2 = f(&add(&x0, &k1, h / 2.0));
    let k3 = f(&add(&x0, &k2, h / 2.0));
    let k4 = f(&add(&x0, &k3, h));
    let step: Vec<f64> = (0..2).map(|i| x0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    let want = (x1[0] - step[0]).powi(2) + (x1[1] - step[1]).powi(2);
    let got = loss_int(&m, &data, &Batch::full(&data), &opts()).unwrap();
    assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
}

#[test]
fn rec_loss_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = [random_set(5, 3, false, &mut rng)];
    let b = Batch::full(&data);
    let id = zero_dynamics_model(identity_ae(3));
    assert_eq!(loss_rec(&id, &data, &b, &opts()).unwrap(), 0.0);

    let mut ae = random_ae(3, 2, &mut rng);
    let m = zero_dynamics_model(ae.clone());
    let want: f64 = (0..5)
        .map(|k| {
            let x = data[0].state(k);
            let r = ae.reconstruct(x).unwrap();
            x.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum();
    let got = loss_rec(&m, &data, &b, &opts()).unwrap();
    assert!((got - want).abs() <= 1e-12 * want);

    ae.decoder_mut().params_mut().iter_mut().for_each(|p| *p = 0.0);
    let m = zero_dynamics_model(ae);
    let norm: f64 = data[0].states.squared_norm();
    assert!((loss_rec(&m, &data, &b, &opts()).unwrap() - norm).abs() <= 1e-12 * norm);
}

fn fd_jacobian(net: &Mlp, x: &[f64]) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..net.output_dim())
        .map(|i| central_difference(|p| Ok(net.forward(p)?[i]), x, 1e-6).unwrap())
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

#[test]
fn jac_and_mod_match_explicit_jacobians() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ae = random_ae(4, 2, &mut rng);
    let a = Matrix::from_rows(&[vec![0.3, -1.0], vec![0.8, -0.1]]).unwrap();
    let m = LatentModel::new(AeModel::Plain(ae.clone()), Dynamics::Fnn(FnnDynamics::new(linear_net(&a)).unwrap())).unwrap();
    let data = [random_set(4, 4, true, &mut rng)];
    let b = Batch::full(&data);
    let (mut jac, mut md) = (0.0, 0.0);
    for k in 0..4 {
        let x = data[0].state(k);
        let xd = data[0].derivative(k).unwrap();
        let z = ae.encode(x).unwrap();
        let je = fd_jacobian(ae.encoder(), x);
        let jd = fd_jacobian(ae.decoder(), &z);
        let jex = je.matvec(xd).unwrap();
        let jx = jd.matvec(&jex).unwrap();
        jac += xd.iter().zip(&jx).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        let f = a.matvec(&z).unwrap();
        let jdf = jd.matvec(&f).unwrap();
        md += jex.iter().zip(&f).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        md += xd.iter().zip(&jdf).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    }
    let got_jac = loss_jac(&m, &data, &b, &opts()).unwrap();
    let got_mod = loss_mod(&m, &data, &b, &opts()).unwrap();
    assert!((got_jac - jac).abs() <= 1e-6 * jac, "{got_jac} vs {jac}");
    assert!((got_mod - md).abs() <= 1e-6 * md, "{got_mod} vs {md}");
    // the autodiff Jacobian agrees with the explicit one as well
    let enc = ae.encoder().clone();
    let map = move |t: &mut Tape, x: Var| enc.bind(t)?.forward(t, x);
    let exact = jacobian(&map, data[0].state(0)).unwrap();
    let fd = fd_jacobian(ae.encoder(), data[0].state(0));
    assert!(exact.sub(&fd).unwrap().max_abs() < 1e-8);
}

#[test]
fn jac_and_mod_vanish_for_identity_and_still_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.5], vec![0.0, -0.5, -0.1]]).unwrap();
    let mut s = random_set(5, 3, false, &mut rng);
    let d: Vec<Vec<f64>> = (0..5).map(|k| a.matvec(s.state(k)).unwrap()).collect();
    s = s.with_derivatives(Matrix::from_rows(&d).unwrap()).unwrap();
    let data = [s];
    let b = Batch::full(&data);
    let m = LatentModel::new(AeModel::Plain(identity_ae(3)), Dynamics::Fnn(FnnDynamics::new(linear_net(&a)).unwrap())).unwrap();
    assert!(loss_jac(&m, &data, &b, &opts()).unwrap() < 1e-28);
    assert!(loss_mod(&m, &data, &b, &opts()).unwrap() < 1e-28);
    let fro = LossOptions { jacobian: JacobianVariant::Frobenius, ..opts() };
    assert!(loss_jac(&m, &data, &b, &fro).unwrap() < 1e-28);

    let still = [random_set(5, 3, false, &mut rng).with_derivatives(Matrix::zeros(5, 3)).unwrap()];
    let m = zero_dynamics_model(random_ae(3, 2, &mut rng));
    let b = Batch::full(&still);
    assert_eq!(loss_jac(&m, &still, &b, &opts()).unwrap(), 0.0);
    assert_eq!(loss_mod(&m, &still, &b, &opts()).unwrap(), 0.0);
}

#[test]
fn frobenius_exact_and_probed_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = zero_dynamics_model(random_ae(6, 2, &mut rng));
    let data = [random_set(3, 6, false, &mut rng)];
    let b = Batch::full(&data);
    let exact = loss_jac(&m, &data, &b, &opts()).unwrap();
    let probed = LossOptions { exact_frobenius_max: 0, hutchinson_probes: 4000, ..opts() };
    let est = loss_jac(&m, &data, &b, &probed).unwrap();
    assert!((est - exact).abs() < 0.05 * exact, "{est} vs {exact}");
    // explicit ‖I − J‖_F² at one snapshot
    let ae = match &m.ae {
        AeModel::Plain(a) => a,
        _ => unreachable!(),
    };
    let mut want = 0.0;
    for k in 0..3 {
        let x = data[0].state(k);
        let j = fd_jacobian(ae.decoder(), &ae.encode(x).unwrap()).matmul(&fd_jacobian(ae.encoder(), x)).unwrap();
        want += Matrix::identity(6).sub(&j).unwrap().squared_norm();
    }
    assert!((exact - want).abs() < 1e-6 * want);
    let strict = LossOptions { jacobian: JacobianVariant::Derivative, ..opts() };
    assert!(matches!(loss_jac(&m, &data, &b, &strict), Err(crate::Error::MissingDerivatives(_))));
    assert!(loss_mod(&m, &data, &b, &opts()).is_err());
}

#[test]
fn degeneracy_penalty_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = [random_set(5, 4, false, &mut rng)];
    let b = Batch::full(&data);
    let g = gfinn_model(4, 2, 2, 9);
    assert!(loss_deg(&g, &data, &b, &opts()).is_err());
    assert!(degeneracy_penalty(&g, &data, &b, &opts()).unwrap() <= 1e-24);

    let mut positive = 0;
    for seed in 0..5 {
        let mut r = ChaCha8Rng::seed_from_u64(100 + seed);
        let ae = random_ae(4, 2, &mut r);
        let s = SpnnDynamics::random(2, &NetShape::new(vec![5], Activation::Tanh), &mut r).unwrap();
        let m = LatentModel::new(AeModel::Plain(ae.clone()), Dynamics::Spnn(s.clone())).unwrap();
        if loss_deg(&m, &data, &b, &opts()).unwrap() > 0.0 {
            positive += 1;
        }
        let mut z = Dynamics::Spnn(s);
        let zeros = vec![0.0; z.num_params()];
        z.read_params(&zeros).unwrap();
        let m = LatentModel::new(AeModel::Plain(ae), z).unwrap();
        assert_eq!(loss_deg(&m, &data, &b, &opts()).unwrap(), 0.0);
    }
    assert_eq!(positive, 5);
}

#[test]
fn weighted_total() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let m = gfinn_model(4, 2, 2, 11);
    let data = [random_set(5, 4, true, &mut rng)];
    let b = Batch::full(&data);
    let zero = LossWeights::default();
    let all = Active { int: true, rec: true, jac: true, model: true, deg: false, reg: true };
    assert_eq!(evaluate_losses(&m, &data, &b, &zero, &all, &opts()).unwrap().total, 0.0);
    let parts = evaluate_losses(&m, &data, &b, &zero, &all, &opts()).unwrap();
    let single = [
        (LossWeights { int: 1.0, ..zero }, parts.int),
        (LossWeights { rec: 1.0, ..zero }, parts.rec),
        (LossWeights { jac: 1.0, ..zero }, parts.jac),
        (LossWeights { model: 1.0, ..zero }, parts.model),
        (LossWeights { reg: 1.0, ..zero }, parts.reg),
    ];
    for (w, want) in single {
        let (v, _) = loss_and_gradient(&m, &data, &b, &w, &opts()).unwrap();
        assert!(want > 0.0 && (v.total - want).abs() <= 1e-14 * want);
    }
    assert!((parts.reg - dynamics_norm_squared(&m)).abs() < 1e-12 * parts.reg);
    let w = LossWeights { int: 1.0, rec: 0.1, jac: 0.01, model: 1e-3, deg: 0.0, reg: 1e-4 };
    let (v, _) = loss_and_gradient(&m, &data, &b, &w, &opts()).unwrap();
    let want = parts.int + 0.1 * parts.rec + 0.01 * parts.jac + 1e-3 * parts.model + 1e-4 * parts.reg;
    assert!((v.total - want).abs() < 1e-12 * want);
    // the degeneracy term is structurally zero for GFINN
    let (vd, _) = loss_and_gradient(&m, &data, &b, &LossWeights { deg: 1.0, ..w }, &opts()).unwrap();
    assert!((vd.total - v.total).abs() <= 1e-20, "{}", vd.total - v.total);
    assert!(LossWeights { jac: -1.0, ..w }.validate().is_err());
}

fn fd_check_total(m: &LatentModel, data: &[SnapshotSet], w: &LossWeights, o: &LossOptions) -> f64 {
    let b = Batch::full(data);
    let (_, g) = loss_and_gradient(m, data, &b, w, o).unwrap();
    let theta = m.flat_params();
    let f = |p: &[f64]| {
        let mut mm = m.clone();
        mm.read_params(p).unwrap();
        Ok(loss_and_gradient(&mm, data, &b, w, o)?.0.total)
    };
    let fd = central_difference(f, &theta, 1e-6).unwrap();
    gradient_discrepancy(&g, &fd).max_rel_error
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = gfinn_model(6, 2, 2, 13);
    let data = [random_set(4, 6, true, &mut rng)];
    let w = LossWeights { int: 1.0, rec: 0.5, jac: 0.3, model: 0.2, deg: 0.0, reg: 0.01 };
    for scheme in [Scheme::Rk4, Scheme::Rk23] {
        let o = LossOptions { scheme, ..opts() };
        let err = fd_check_total(&m, &data, &w, &o);
        assert!(err <= 1e-4, "{scheme}: {err}");
    }
}

#[test]
fn hyper_model_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let enc = Architecture::uniform(vec![5, 3, 2], Activation::Tanh).unwrap();
    let dec = Architecture::uniform(vec![2, 3, 5], Activation::Tanh).unwrap();
    let bx = ParamBox::new(vec![0.7, 0.9], vec![0.8, 1.0]).unwrap();
    let h = HyperAutoencoder::random(enc, dec, &[4], Activation::Tanh, bx, &mut rng).unwrap();
    let g = GfinnDynamics::random(2, 2, &NetShape::new(vec![4], Activation::Tanh), false, &mut rng).unwrap();
    let m = LatentModel::new(AeModel::Hyper(h), Dynamics::Gfinn(g)).unwrap();
    let mut a = random_set(3, 5, true, &mut rng);
    a.mu = vec![0.72, 0.95];
    let mut b = random_set(3, 5, true, &mut rng);
    b.mu = vec![0.8, 0.9];
    let w = LossWeights { int: 1.0, rec: 0.5, jac: 0.3, model: 0.2, deg: 0.0, reg: 0.0 };
    let err = fd_check_total(&m, &[a, b], &w, &opts());
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn spnn_gradient_with_degeneracy_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let ae = random_ae(4, 2, &mut rng);
    let s = SpnnDynamics::random(2, &NetShape::new(vec![4], Activation::Tanh), &mut rng).unwrap();
    let m = LatentModel::new(AeModel::Plain(ae), Dynamics::Spnn(s)).unwrap();
    let data = [random_set(3, 4, true, &mut rng)];
    let w = LossWeights { int: 1.0, rec: 1.0, jac: 0.0, model: 0.1, deg: 0.5, reg: 0.0 };
    let err = fd_check_total(&m, &data, &w, &opts());
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn zero_iterations_and_reproducibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let data = [random_set(8, 4, true, &mut rng)];
    let start = gfinn_model(4, 2, 2, 17);
    let w = LossWeights { int: 1.0, rec: 0.1, jac: 0.01, model: 1e-3, deg: 0.0, reg: 0.0 };
    let mut m = start.clone();
    let spec = TrainSpec { iterations: 0, ..TrainSpec::default() };
    let h = train(&mut m, &data, &w, &spec).unwrap();
    assert!(h.rows.is_empty());
    assert_eq!(m, start);

    let spec = TrainSpec {
        iterations: 30,
        batch: BatchPlan::Count(3),
        lr: LrSchedule { initial: 1e-2, decay: 0.1, period: 10, floor: 1e-3 },
        checkpoint_every: 10,
        seed: 5,
        ..TrainSpec::default()
    };
    let mut a = start.clone();
    let mut b = start.clone();
    let ha = train(&mut a, &data, &w, &spec).unwrap();
    let hb = train(&mut b, &data, &w, &spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha.rows.len(), 3);
    let strip = |h: &TrainHistory| h.rows.iter().map(|r| (r.iteration, r.loss, r.lr)).collect::<Vec<_>>();
    assert_eq!(strip(&ha), strip(&hb));
    assert_ne!(a, start);
}

#[test]
fn full_batch_training_reduces_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let data = [random_set(10, 4, true, &mut rng)];
    let mut m = gfinn_model(4, 2, 2, 19);
    let w = LossWeights { int: 1.0, rec: 1.0, jac: 0.1, model: 0.01, deg: 0.0, reg: 0.0 };
    let b = Batch::full(&data);
    let before = loss_and_gradient(&m, &data, &b, &w, &opts()).unwrap().0.total;
    let spec = TrainSpec { iterations: 200, lr: LrSchedule::constant(1e-2), checkpoint_every: 50, ..TrainSpec::default() };
    let h = train(&mut m, &data, &w, &spec).unwrap();
    let after = loss_and_gradient(&m, &data, &b, &w, &opts()).unwrap().0.total;
    assert!(after < 0.7 * before, "{before} -> {after}");
    let dir = tempfile::tempdir().unwrap();
    h.write_csv(dir.path().join("h.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(text.starts_with("iteration,wall_seconds,loss_total,loss_int,loss_rec,loss_jac,loss_mod,loss_deg,lr"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn non_finite_loss_restores_last_checkpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let data = [random_set(6, 4, false, &mut rng)];
    let mut m = gfinn_model(4, 2, 2, 21);
    let w = LossWeights { int: 1.0, rec: 1.0, ..LossWeights::default() };
    let spec = TrainSpec { iterations: 100, lr: LrSchedule::constant(1e-3), checkpoint_every: 5, ..TrainSpec::default() };
    let mut t = Trainer::new(&m, w, spec).unwrap();
    t.run(&mut m, &data, 5, &mut |_| Ok(())).unwrap();
    let good = m.clone();
    let mut bad = data.clone();
    bad[0].states.set(0, 0, f64::NAN);
    let e = t.run(&mut m, &bad, 3, &mut |_| Ok(())).unwrap_err();
    assert!(matches!(e, crate::Error::NonFiniteLoss { iteration: 5 }));
    assert_eq!(m, good);
}

#[test]
fn model_checkpoint_round_trip() {
    let plain = gfinn_model(5, 2, 3, 22);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let enc = Architecture::uniform(vec![5, 3, 2], Activation::Tanh).unwrap();
    let dec = Architecture::uniform(vec![2, 3, 5], Activation::Tanh).unwrap();
    let bx = ParamBox::new(vec![0.7, 0.9], vec![0.8, 1.0]).unwrap();
    let h = HyperAutoencoder::random(enc, dec, &[4], Activation::Tanh, bx, &mut rng).unwrap();
    let s = SpnnDynamics::random(2, &NetShape::new(vec![4], Activation::Tanh), &mut rng).unwrap();
    let hyper = LatentModel::new(AeModel::Hyper(h), Dynamics::Spnn(s)).unwrap();
    for m in [plain, hyper] {
        let mut ck = Checkpoint::new();
        m.save(&mut ck);
        let back = LatentModel::load(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut p = m.clone();
        p.read_params(&back.flat_params()).unwrap();
        assert_eq!(p, m);
    }
}
