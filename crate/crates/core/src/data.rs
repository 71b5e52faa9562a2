//! Labelled data in feature space.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class label. Serialized as the integers 1 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    One,
    Two,
}

impl Label {
    pub fn flip(self) -> Label {
        match self {
            Label::One => Label::Two,
            Label::Two => Label::One,
        }
    }

    /// 0 for class 1, 1 for class 2.
    pub fn index(self) -> usize {
        match self {
            Label::One => 0,
            Label::Two => 1,
        }
    }

    pub fn as_u8(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Label::One),
            2 => Ok(Label::Two),
            other => Err(format!("label must be 1 or 2, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// `n` labelled points in `p` dimensions. Row `i` of `x` is the `i`th point.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<Label>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<Label>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let row = pos % x.nrows().max(1);
            return Err(Error::Data(format!("non-finite feature in row {row}")));
        }
        Ok(Dataset { x, y })
    }

    /// Builds a dataset from row slices. Panics if rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<Label>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == p), "ragged rows");
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Dataset::new(x, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[Label] {
        &self.y
    }

    pub fn label(&self, i: usize) -> Label {
        self.y[i]
    }

    /// Copy of row `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Counts of class 1 and class 2.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&l| l == Label::One).count();
        [ones, self.y.len() - ones]
    }

    /// Empirical class proportions.
    pub fn priors(&self) -> [f64; 2] {
        let [n1, n2] = self.class_counts();
        let n = self.n() as f64;
        [n1 as f64 / n, n2 as f64 / n]
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let x = self.x.select_rows(idx);
        let y = idx.iter().map(|&i| self.y[i]).collect();
        Dataset { x, y }
    }

    /// Every point except `skip`.
    pub fn without(&self, skip: usize) -> Dataset {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| i != skip).collect();
        self.subset(&idx)
    }

    pub fn with_labels(&self, y: Vec<Label>) -> Result<Dataset> {
        Dataset::new(self.x.clone(), y)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Vec<Label>) {
        (self.x, self.y)
    }
}
