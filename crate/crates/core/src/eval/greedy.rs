use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::SnapshotSet;
use crate::train::{LatentModel, Trainer};

use super::grid::ParameterGrid;

/// `target` training points, selected after every `period` training iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedySchedule {
    pub target: usize,
    pub period: usize,
}

/// One selection round.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRound {
    pub iteration: usize,
    pub selected: usize,
    /// `(grid index, score)` for every scored point.
    pub scores: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    /// Grid indices in the order they joined the training set.
    pub selected: Vec<usize>,
    pub data: Vec<SnapshotSet>,
    pub rounds: Vec<SelectionRound>,
}

impl GreedyOutcome {
    pub fn indicator_calls(&self) -> usize {
        self.rounds.iter().map(|r| r.scores.len()).sum()
    }
}

/// Highest score, lowest index on ties. NaN scores lose.
fn argmax(scores: &[(usize, f64)]) -> Option<usize> {
    scores
        .iter()
        .filter(|(_, s)| !s.is_nan())
        .fold(None, |best: Option<(usize, f64)>, &(i, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

/// Starts from the grid corners and alternates `schedule.period` training iterations with
/// adding the non-training point of largest `indicator` score, until `schedule.target`
/// points are in the training set. `fom` produces the data of a newly selected point.
/// Training beyond the last selection is left to the caller.
pub fn greedy_sample(
    model: &mut LatentModel,
    trainer: &mut Trainer,
    grid: &mut ParameterGrid,
    schedule: GreedySchedule,
    fom: &mut dyn FnMut(&[f64]) -> Result<SnapshotSet>,
    indicator: &(dyn Fn(&LatentModel, &[f64]) -> Result<f64> + Sync),
) -> Result<GreedyOutcome> {
    let corners = grid.corners();
    if schedule.target < corners.len() {
        return Err(Error::Config(format!("greedy target {} is below the {} corners", schedule.target, corners.len())));
    }
    if schedule.target > grid.len() {
        return Err(Error::GridExhausted);
    }
    if schedule.period == 0 && schedule.target > corners.len() {
        return Err(Error::Config("greedy period must be positive".into()));
    }
    let mut out = GreedyOutcome { selected: Vec::new(), data: Vec::new(), rounds: Vec::new() };
    for &c in &corners {
        grid.mark_training(c)?;
        out.data.push(fom(&grid.point(c))?);
        out.selected.push(c);
    }
    while out.selected.len() < schedule.target {
        trainer.reset_batches();
        trainer.run(model, &out.data, schedule.period, &mut |_| Ok(()))?;
        let candidates = grid.test_indices();
        if candidates.is_empty() {
            return Err(Error::GridExhausted);
        }
        let m: &LatentModel = model;
        let g: &ParameterGrid = grid;
        let scores = candidates
            .par_iter()
            .map(|&i| Ok((i, indicator(m, &g.point(i))?)))
            .collect::<Result<Vec<_>>>()?;
        let pick = argmax(&scores).ok_or_else(|| Error::Domain("every indicator score is NaN".into()))?;
        grid.mark_training(pick)?;
        out.data.push(fom(&grid.point(pick))?);
        out.selected.push(pick);
        out.rounds.push(SelectionRound { iteration: trainer.iteration(), selected: pick, scores });
    }
    trainer.reset_batches();
    Ok(out)
}
