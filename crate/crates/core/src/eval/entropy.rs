use std::io::Write;
use std::path::Path;

use crate::dynamics::thermo_trace;
use crate::error::{Error, Result};
use crate::integrate::IntegratorSpec;
use crate::train::LatentModel;

use super::metrics::mean_std;
use super::predict::rom_predict;

/// Entropy and entropy rate along the predicted latent trajectory of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropySeries {
    pub mu: Vec<f64>,
    pub entropy: Vec<f64>,
    pub entropy_rate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub times: Vec<f64>,
    pub series: Vec<EntropySeries>,
}

/// Mean and standard deviation across parameters at each time.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyAggregate {
    pub entropy_mean: Vec<f64>,
    pub entropy_std: Vec<f64>,
    pub rate_mean: Vec<f64>,
    pub rate_std: Vec<f64>,
}

impl EntropyReport {
    pub fn aggregate(&self) -> EntropyAggregate {
        let mut agg = EntropyAggregate { entropy_mean: vec![], entropy_std: vec![], rate_mean: vec![], rate_std: vec![] };
        for k in 0..self.times.len() {
            let (m, s) = mean_std(&self.series.iter().map(|e| e.entropy[k]).collect::<Vec<_>>());
            agg.entropy_mean.push(m);
            agg.entropy_std.push(s);
            let (m, s) = mean_std(&self.series.iter().map(|e| e.entropy_rate[k]).collect::<Vec<_>>());
            agg.rate_mean.push(m);
            agg.rate_std.push(s);
        }
        agg
    }

    /// Mean entropy rate over all parameters within the first and the last `fraction` of the
    /// time samples.
    pub fn early_late_rates(&self, fraction: f64) -> (f64, f64) {
        let k = self.times.len();
        let w = ((k as f64 * fraction).round() as usize).clamp(1, k);
        let mean = |r: std::ops::Range<usize>| {
            let v: Vec<f64> = self.series.iter().flat_map(|e| e.entropy_rate[r.clone()].iter().copied()).collect();
            mean_std(&v).0
        };
        (mean(0..w), mean(k - w..k))
    }

    /// Rows `mu_0, .., t, S, dSdt`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let p = self.series.first().map_or(0, |s| s.mu.len());
        let names: Vec<String> = (0..p).map(|d| format!("mu_{d},")).collect();
        writeln!(w, "{}t,S,dSdt", names.concat())?;
        for s in &self.series {
            let mu: String = s.mu.iter().map(|v| format!("{v},")).collect();
            for (k, t) in self.times.iter().enumerate() {
                writeln!(w, "{mu}{t},{},{}", s.entropy[k], s.entropy_rate[k])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Rolls the model out from each `(μ, x₀)` over `times` and evaluates the learned entropy.
pub fn entropy_report(model: &LatentModel, cases: &[(Vec<f64>, Vec<f64>)], times: &[f64], spec: &IntegratorSpec) -> Result<EntropyReport> {
    if !model.dynamics.is_thermodynamic() {
        return Err(Error::Config("entropy report needs GFINN or SPNN dynamics".into()));
    }
    let series = cases
        .iter()
        .map(|(mu, x0)| {
            let pred = rom_predict(model, mu, x0, times, spec)?;
            let tr = thermo_trace(&model.dynamics, &pred.latent)?;
            Ok(EntropySeries { mu: mu.clone(), entropy: tr.entropy, entropy_rate: tr.entropy_rate })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyReport { times: times.to_vec(), series })
}
