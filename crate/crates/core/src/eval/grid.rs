use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Evenly spaced values on `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, count: usize) -> Self {
        Axis { lower, upper, count }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.lower + (self.upper - self.lower) * i as f64 / (self.count - 1) as f64
    }
}

/// Tensor grid of parameters, flattened with the first axis varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterGrid {
    axes: Vec<Axis>,
    training: Vec<bool>,
}

impl ParameterGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Config("parameter grid needs at least one axis".into()));
        }
        for a in &axes {
            if a.count < 2 || !(a.upper > a.lower) {
                return Err(Error::Config(format!("bad grid axis {a:?}: need count >= 2 and upper > lower")));
            }
        }
        let len = axes.iter().map(|a| a.count).product();
        Ok(ParameterGrid { axes, training: vec![false; len] })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.training.len()
    }

    pub fn is_empty(&self) -> bool {
        self.training.is_empty()
    }

    fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (d, a) in self.axes.iter().enumerate().rev() {
            idx[d] = i % a.count;
            i /= a.count;
        }
        idx
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.count + i)
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.multi_index(i).iter().zip(&self.axes).map(|(&k, a)| a.value(k)).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat indices of the `2^d` corners, in flat order.
    pub fn corners(&self) -> Vec<usize> {
        let d = self.axes.len();
        let mut out: Vec<usize> = (0..1usize << d)
            .map(|mask| {
                let idx: Vec<usize> = (0..d).map(|k| if mask >> (d - 1 - k) & 1 == 1 { self.axes[k].count - 1 } else { 0 }).collect();
                self.flat_index(&idx)
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Whether the point lies on the boundary of the box.
    pub fn is_boundary(&self, i: usize) -> bool {
        self.multi_index(i).iter().zip(&self.axes).any(|(&k, a)| k == 0 || k + 1 == a.count)
    }

    pub fn mark_training(&mut self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::Config(format!("grid index {i} out of range {}", self.len())));
        }
        self.training[i] = true;
        Ok(())
    }

    pub fn is_training(&self, i: usize) -> bool {
        self.training[i]
    }

    pub fn training_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.training[i]).collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.training[i]).collect()
    }
}

/// Writes `mu_0, .., metric, is_training` rows, one per grid point.
pub fn write_heatmap_csv(path: impl AsRef<Path>, grid: &ParameterGrid, metric: &[f64], metric_name: &str) -> Result<()> {
    if metric.len() != grid.len() {
        return Err(Error::dim("heatmap values", grid.len(), metric.len()));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let names: Vec<String> = (0..grid.axes().len()).map(|d| format!("mu_{d}")).collect();
    writeln!(w, "{},{metric_name},is_training", names.join(","))?;
    for (i, v) in metric.iter().enumerate() {
        let p: Vec<String> = grid.point(i).iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{v},{}", p.join(","), grid.is_training(i) as u8)?;
    }
    w.flush()?;
    Ok(())
}
