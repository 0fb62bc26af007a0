use rand::Rng;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::integrate::{integrate_at, IntegratorSpec, Scheme};

use super::snapshot::SnapshotSet;

const TWO_THIRDS: f64 = 2.0 / 3.0;

/// How `Ṡ₂` is formed from the heat-exchange term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EntropyExchange {
    /// `Ṡ₂ = −(10/T₁)(1/T₁ − 1/T₂)`, the mirror image of `Ṡ₁`.
    #[default]
    Mirrored,
    /// `Ṡ₂ = −(10/T₂)(1/T₁ − 1/T₂)`, which keeps `E₁ + E₂ + p²/2` constant.
    EnergyConserving,
}

impl std::str::FromStr for EntropyExchange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mirrored" => Ok(EntropyExchange::Mirrored),
            "energy-conserving" | "conserving" => Ok(EntropyExchange::EnergyConserving),
            other => Err(Error::Config(format!("unknown entropy exchange '{other}'"))),
        }
    }
}

/// Wall position and momentum plus the entropies of the two containers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasState {
    pub q: f64,
    pub p: f64,
    pub s1: f64,
    pub s2: f64,
}

impl GasState {
    pub fn new(q: f64, p: f64, s1: f64, s2: f64) -> Self {
        GasState { q, p, s1, s2 }
    }

    pub fn from_slice(z: &[f64]) -> Result<Self> {
        match z {
            [q, p, s1, s2] => Ok(GasState::new(*q, *p, *s1, *s2)),
            _ => Err(Error::dim("gas state", 4, z.len())),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q, self.p, self.s1, self.s2]
    }

    fn check(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 2.0) {
            return Err(Error::Domain(format!("wall position q = {} outside (0, 2)", self.q)));
        }
        Ok(())
    }

    /// Internal energies `(E₁, E₂)`.
    pub fn energies(&self) -> Result<(f64, f64)> {
        self.check()?;
        let e1 = (TWO_THIRDS * self.s1).exp() / self.q.powf(TWO_THIRDS);
        let e2 = (TWO_THIRDS * self.s2).exp() / (2.0 - self.q).powf(TWO_THIRDS);
        Ok((e1, e2))
    }

    /// Temperatures `T_j = ∂E_j/∂S_j = (2/3)E_j`.
    pub fn temperatures(&self) -> Result<(f64, f64)> {
        let (e1, e2) = self.energies()?;
        Ok((TWO_THIRDS * e1, TWO_THIRDS * e2))
    }

    /// `E₁ + E₂ + p²/2`.
    pub fn total_energy(&self) -> Result<f64> {
        let (e1, e2) = self.energies()?;
        Ok(e1 + e2 + 0.5 * self.p * self.p)
    }

    pub fn total_entropy(&self) -> f64 {
        self.s1 + self.s2
    }
}

/// `(q̇, ṗ, Ṡ₁, Ṡ₂)` of the two-container system.
pub fn gas_rhs(state: &GasState, exchange: EntropyExchange) -> Result<[f64; 4]> {
    let (e1, e2) = state.energies()?;
    let q = state.q;
    let (t1, t2) = (TWO_THIRDS * e1, TWO_THIRDS * e2);
    let heat = 1.0 / t1 - 1.0 / t2;
    let ds1 = 10.0 / t1 * heat;
    let ds2 = match exchange {
        EntropyExchange::Mirrored => -ds1,
        EntropyExchange::EnergyConserving => -10.0 / t2 * heat,
    };
    Ok([state.p, TWO_THIRDS * (e1 / q - e2 / (2.0 - q)), ds1, ds2])
}

/// Box of initial conditions `[q] × [p] × [S₁] × [S₂]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitBox {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl Default for InitBox {
    fn default() -> Self {
        InitBox {
            lower: [0.2, -1.0, 1.0, 1.0],
            upper: [1.8, 1.0, 3.0, 3.0],
        }
    }
}

impl InitBox {
    pub fn validate(&self) -> Result<()> {
        for j in 0..4 {
            if !(self.lower[j] <= self.upper[j]) || !self.lower[j].is_finite() || !self.upper[j].is_finite() {
                return Err(Error::Config(format!("initial box bound {j} is empty")));
            }
        }
        if self.lower[0] <= 0.0 || self.upper[0] >= 2.0 {
            return Err(Error::Config("initial wall positions must lie inside (0, 2)".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GasState {
        let mut z = [0.0; 4];
        for j in 0..4 {
            z[j] = if self.lower[j] == self.upper[j] {
                self.lower[j]
            } else {
                rng.random_range(self.lower[j]..self.upper[j])
            };
        }
        GasState::new(z[0], z[1], z[2], z[3])
    }
}

/// Settings for [`gas_generate`].
#[derive(Clone, Debug, PartialEq)]
pub struct GasGeneration {
    pub count: usize,
    pub init: InitBox,
    pub t_end: f64,
    pub dt: f64,
    pub integrator: IntegratorSpec,
    pub exchange: EntropyExchange,
    pub max_resamples: usize,
}

impl Default for GasGeneration {
    fn default() -> Self {
        GasGeneration {
            count: 100,
            init: InitBox::default(),
            t_end: 8.0,
            dt: 0.02,
            integrator: IntegratorSpec::adaptive(Scheme::Rkf45, 1e-10, 1e-12),
            exchange: EntropyExchange::default(),
            max_resamples: 1000,
        }
    }
}

/// Uniform grid `0, Δt, …` reaching `t_end` (rounded to the nearest whole step).
pub fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(Error::Config(format!("time grid needs positive span and step, got {t_end} and {dt}")));
    }
    let steps = (t_end / dt).round() as usize;
    if ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!("step {dt} does not divide span {t_end}")));
    }
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

/// Integrates one trajectory from `z0` and returns its states on `times`.
pub fn gas_trajectory(z0: &GasState, times: &[f64], spec: &IntegratorSpec, exchange: EntropyExchange) -> Result<Vec<[f64; 4]>> {
    let f = |_t: f64, z: &[f64]| gas_rhs(&GasState::from_slice(z)?, exchange).map(|d| d.to_vec());
    let tr = integrate_at(f, &z0.to_array(), times, spec)?;
    tr.states
        .iter()
        .map(|s| {
            let g = GasState::from_slice(s)?;
            g.check()?;
            Ok(g.to_array())
        })
        .collect()
}

/// Samples `count` initial conditions and stacks the trajectories as `[q, p, S₁, S₂]` blocks.
/// Initial conditions whose integration fails are redrawn.
pub fn gas_generate<R: Rng + ?Sized>(cfg: &GasGeneration, rng: &mut R) -> Result<SnapshotSet> {
    cfg.init.validate()?;
    cfg.integrator.validate()?;
    if cfg.count == 0 {
        return Err(Error::Config("gas generation needs count >= 1".into()));
    }
    let times = time_grid(cfg.t_end, cfg.dt)?;
    let mut trajectories = Vec::with_capacity(cfg.count);
    let mut resamples = 0;
    while trajectories.len() < cfg.count {
        let z0 = cfg.init.sample(rng);
        match gas_trajectory(&z0, &times, &cfg.integrator, cfg.exchange) {
            Ok(tr) => trajectories.push(tr),
            Err(e) => {
                resamples += 1;
                log::warn!("resampling gas initial condition {z0:?}: {e}");
                if resamples > cfg.max_resamples {
                    return Err(Error::Solver(format!("gas generation gave up after {resamples} resamples: {e}")));
                }
            }
        }
    }
    Ok(stack_trajectories(&trajectories, times))
}

/// Concatenates per-trajectory `[q, p, S₁, S₂]` series into one full state.
pub fn stack_trajectories(trajectories: &[Vec<[f64; 4]>], times: Vec<f64>) -> SnapshotSet {
    let c = trajectories.len();
    let nt = times.len();
    let mut states = Matrix::zeros(nt, 4 * c);
    for (i, tr) in trajectories.iter().enumerate() {
        for (k, z) in tr.iter().enumerate() {
            for (j, v) in z.iter().enumerate() {
                states.set(k, j * c + i, *v);
            }
        }
    }
    SnapshotSet {
        mu: vec![],
        times,
        states,
        derivatives: None,
        grid: None,
    }
}

/// Splits a stacked full state back into per-trajectory gas states.
pub fn unstack_state(x: &[f64]) -> Result<Vec<GasState>> {
    if x.len() % 4 != 0 {
        return Err(Error::dim("stacked gas state", "multiple of 4", x.len()));
    }
    let c = x.len() / 4;
    Ok((0..c).map(|i| GasState::new(x[i], x[c + i], x[2 * c + i], x[3 * c + i])).collect())
}
