use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fom::SnapshotSet;

/// Snapshot indices `k` drawn from one training trajectory. Pairs `(k, k+1)` feed the
/// integration loss; the other terms use `x^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchItem {
    pub set: usize,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

impl Batch {
    /// Every snapshot of every trajectory.
    pub fn full(data: &[SnapshotSet]) -> Batch {
        Batch {
            items: data
                .iter()
                .enumerate()
                .map(|(set, s)| BatchItem { set, indices: (0..s.len()).collect() })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.iter().map(|i| i.indices.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Full batch, or a fixed number of shuffled mini-batches per pass over the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchPlan {
    Full,
    Count(usize),
}

impl BatchPlan {
    pub fn validate(&self) -> Result<()> {
        match self {
            BatchPlan::Count(0) => Err(Error::Config("batch count must be positive".into())),
            _ => Ok(()),
        }
    }

    /// The batches of one pass over `data`.
    pub fn epoch<R: Rng + ?Sized>(&self, data: &[SnapshotSet], rng: &mut R) -> Vec<Batch> {
        match *self {
            BatchPlan::Full | BatchPlan::Count(1) => vec![Batch::full(data)],
            BatchPlan::Count(count) => {
                let mut all: Vec<(usize, usize)> =
                    data.iter().enumerate().flat_map(|(s, d)| (0..d.len()).map(move |k| (s, k))).collect();
                all.shuffle(rng);
                let count = count.min(all.len()).max(1);
                let per = all.len().div_ceil(count);
                all.chunks(per)
                    .map(|chunk| {
                        let mut picked = chunk.to_vec();
                        picked.sort_unstable();
                        let mut items: Vec<BatchItem> = Vec::new();
                        for (s, k) in picked {
                            match items.last_mut() {
                                Some(it) if it.set == s => it.indices.push(k),
                                _ => items.push(BatchItem { set: s, indices: vec![k] }),
                            }
                        }
                        Batch { items }
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::Matrix;

    fn data() -> Vec<SnapshotSet> {
        (0..3)
            .map(|i| {
                let nt = 5 + i;
                SnapshotSet::new(vec![i as f64], (0..nt).map(|k| k as f64).collect(), Matrix::zeros(nt, 2)).unwrap()
            })
            .collect()
    }

    #[test]
    fn minibatches_partition_the_data() {
        let d = data();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batches = BatchPlan::Count(4).epoch(&d, &mut rng);
        assert_eq!(batches.len(), 4);
        let mut seen: Vec<(usize, usize)> =
            batches.iter().flat_map(|b| b.items.iter().flat_map(|it| it.indices.iter().map(move |&k| (it.set, k)))).collect();
        seen.sort_unstable();
        let full = Batch::full(&d);
        assert_eq!(seen.len(), full.len());
        seen.dedup();
        assert_eq!(seen.len(), 18);
        assert_eq!(BatchPlan::Full.epoch(&d, &mut rng), vec![full]);
    }
}
