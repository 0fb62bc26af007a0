use std::sync::Arc;

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Which part of a model a parameter segment belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Encoder,
    Decoder,
    Dynamics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub name: String,
    pub group: ParamGroup,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered list of named matrix-shaped slots inside a flat parameter array.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamLayout {
    segments: Vec<Segment>,
    total: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, group: ParamGroup, rows: usize, cols: usize) -> usize {
        let offset = self.total;
        self.segments.push(Segment {
            name: name.into(),
            group,
            rows,
            cols,
            offset,
        });
        self.total += rows * cols;
        self.segments.len() - 1
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn group_mask(&self, group: ParamGroup) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        for s in self.segments.iter().filter(|s| s.group == group) {
            mask[s.range()].iter_mut().for_each(|m| *m = true);
        }
        mask
    }
}

/// Flat trainable parameters with a stable layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: Arc<ParamLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total() {
            return Err(Error::dim("ParamVector", layout.total(), values.len()));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let values = vec![0.0; layout.total()];
        Self { layout, values }
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, idx: usize) -> Matrix {
        let s = &self.layout.segments()[idx];
        Matrix::from_vec(s.rows, s.cols, self.values[s.range()].to_vec())
            .expect("segment shape matches layout")
    }

    /// Records every segment as a leaf; returned handles follow layout order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        (0..self.layout.segments().len())
            .map(|i| tape.leaf(self.segment(i)))
            .collect()
    }

    /// Flattens per-segment gradient nodes back into layout order.
    pub fn collect_gradient(&self, tape: &Tape, grads: &[Var]) -> Result<Vec<f64>> {
        let segs = self.layout.segments();
        if grads.len() != segs.len() {
            return Err(Error::dim("collect_gradient", segs.len(), grads.len()));
        }
        let mut out = vec![0.0; self.values.len()];
        for (s, g) in segs.iter().zip(grads) {
            let m = tape.value(*g);
            if m.shape() != (s.rows, s.cols) {
                return Err(Error::dim(
                    "collect_gradient segment",
                    format!("{}x{}", s.rows, s.cols),
                    format!("{:?}", m.shape()),
                ));
            }
            out[s.range()].copy_from_slice(m.as_slice());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_lengths_sum_to_total() {
        let mut l = ParamLayout::new();
        l.push("w", ParamGroup::Encoder, 3, 2);
        l.push("b", ParamGroup::Encoder, 1, 3);
        l.push("k", ParamGroup::Dynamics, 2, 2);
        assert_eq!(l.total(), 6 + 3 + 4);
        assert_eq!(l.segments()[2].offset, 9);
        let mask = l.group_mask(ParamGroup::Dynamics);
        assert_eq!(mask.iter().filter(|m| **m).count(), 4);
        assert!(ParamVector::new(Arc::new(l), vec![0.0; 3]).is_err());
    }
}
