//! k-nearest-neighbour majority vote.
//!
//! Neighbours are ordered by Euclidean distance. Points at exactly the same
//! distance are ordered by a pseudo-random key hashed from the tie seed, the
//! query and the stored point itself (coordinates and label). The key depends
//! on point identity rather than storage position, so reordering the training
//! set never changes a prediction, and a leave-one-out refit breaks ties the
//! same way as the full model.

use serde::{Deserialize, Serialize};

use super::Classify;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    d: usize,
    /// Row-major `n × d`.
    points: Vec<f64>,
    labels: Vec<Label>,
    k: usize,
    tie_seed: u64,
}

/// `max(3, round(√n))`, capped at `n`.
pub fn default_k(n: usize) -> usize {
    let k = ((n as f64).sqrt().round() as usize).max(3);
    k.min(n.max(1))
}

pub fn fit_knn(data: &Dataset, k: usize, tie_seed: u64) -> Result<KnnModel> {
    if data.n() == 0 {
        return Err(Error::TooFewPoints {
            needed: 1,
            found: 0,
        });
    }
    if k == 0 || k > data.n() {
        return Err(Error::Config(format!(
            "k = {k} must lie in 1..={}",
            data.n()
        )));
    }
    Ok(KnnModel {
        d: data.p(),
        points: row_major(data),
        labels: data.y().to_vec(),
        k,
        tie_seed,
    })
}

pub(crate) fn row_major(data: &Dataset) -> Vec<f64> {
    let x = data.x();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            out.push(x[(i, j)]);
        }
    }
    out
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..a.len() {
        let t = a[j] - b[j];
        s += t * t;
    }
    s
}

fn hash_coords(mut h: u64, v: &[f64]) -> u64 {
    for x in v {
        // +0.0 and -0.0 are the same point.
        let bits = if *x == 0.0 { 0 } else { x.to_bits() };
        h = seed::child(h, bits);
    }
    h
}

/// Ordering key among equidistant neighbours of `query`.
pub(crate) fn tie_key(tie_seed: u64, query: &[f64], point: &[f64], label: Label) -> u64 {
    let h = hash_coords(seed::child(tie_seed, seed::tag::TIES), query);
    let h = hash_coords(h, point);
    seed::child(h, label.as_u8() as u64)
}

/// Number of class-1 labels among the `k` nearest candidates.
///
/// `dist[i]` is the distance of candidate `i`; candidates with `dist = NaN`
/// are treated as excluded. `key(i)` is only called for candidates tied at the
/// k-th distance.
pub(crate) fn class_one_votes(
    dist: &[f64],
    labels: &[Label],
    k: usize,
    mut key: impl FnMut(usize) -> u64,
) -> usize {
    let mut order: Vec<usize> = (0..dist.len()).filter(|&i| !dist[i].is_nan()).collect();
    debug_assert!(k >= 1 && k <= order.len());
    let (_, kth, _) = order.select_nth_unstable_by(k - 1, |&a, &b| dist[a].total_cmp(&dist[b]));
    let cut = dist[*kth];
    let mut ones = 0;
    let mut taken = 0;
    let mut tied = Vec::new();
    for &i in &order {
        if dist[i] < cut {
            taken += 1;
            if labels[i] == Label::One {
                ones += 1;
            }
        } else if dist[i] == cut {
            tied.push(i);
        }
    }
    let need = k - taken;
    if tied.len() > need {
        let mut keyed: Vec<(u64, Label, usize)> =
            tied.iter().map(|&i| (key(i), labels[i], i)).collect();
        // Identical keys only arise for identical points with identical
        // labels, which are interchangeable.
        keyed.sort_unstable_by_key(|&(k, l, _)| (k, l));
        tied = keyed.into_iter().take(need).map(|(_, _, i)| i).collect();
    }
    ones += tied
        .iter()
        .take(need)
        .filter(|&&i| labels[i] == Label::One)
        .count();
    ones
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn tie_seed(&self) -> u64 {
        self.tie_seed
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    fn class_one_votes(&self, z: &[f64]) -> usize {
        let dist: Vec<f64> = (0..self.n()).map(|i| sq_dist(self.point(i), z)).collect();
        class_one_votes(&dist, &self.labels, self.k, |i| {
            tie_key(self.tie_seed, z, self.point(i), self.labels[i])
        })
    }

    /// Fraction of the `k` nearest stored points with label 1.
    pub fn score(&self, z: &[f64]) -> f64 {
        self.class_one_votes(z) as f64 / self.k as f64
    }
}

impl Classify for KnnModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&self, z: &[f64]) -> Label {
        // S ≥ 1/2
        if 2 * self.class_one_votes(z) >= self.k {
            Label::One
        } else {
            Label::Two
        }
    }
}

/// Leave-one-out predictions for every training point: the vote of the `k`
/// nearest among the other `n - 1` points.
pub(crate) fn loo_predictions(data: &Dataset, k: usize, tie_seed: u64) -> Vec<Result<Label>> {
    let n = data.n();
    let d = data.p();
    if k == 0 || k > n.saturating_sub(1) {
        return (0..n)
            .map(|_| {
                Err(Error::TooFewPoints {
                    needed: k + 1,
                    found: n,
                })
            })
            .collect();
    }
    let pts = row_major(data);
    let at = |i: usize| &pts[i * d..(i + 1) * d];
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = sq_dist(at(j), at(i));
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let labels = data.y();
    let mut row = vec![0.0; n];
    (0..n)
        .map(|i| {
            row.copy_from_slice(&dist[i * n..(i + 1) * n]);
            row[i] = f64::NAN;
            let q = at(i);
            let ones = class_one_votes(&row, labels, k, |j| tie_key(tie_seed, q, at(j), labels[j]));
            Ok(if 2 * ones >= k { Label::One } else { Label::Two })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![11.0]],
            vec![Label::One, Label::One, Label::Two, Label::Two, Label::Two],
        )
        .unwrap()
    }

    #[test]
    fn k1_returns_stored_label() {
        let m = fit_knn(&line(), 1, 0).unwrap();
        assert_eq!(m.predict(&[2.0]), Label::Two);
        assert_eq!(m.predict(&[1.0]), Label::One);
    }

    #[test]
    fn k_equals_n_is_majority() {
        let m = fit_knn(&line(), 5, 0).unwrap();
        for z in [-100.0, 0.0, 5.0, 100.0] {
            assert_eq!(m.predict(&[z]), Label::Two);
            assert_eq!(m.score(&[z]), 0.4);
        }
    }

    #[test]
    fn matches_brute_force_sort() {
        let data = line();
        let m = fit_knn(&data, 3, 0).unwrap();
        for z in [4.0, 6.0, 6.5, 7.0, 1.4] {
            let mut idx: Vec<usize> = (0..5).collect();
            idx.sort_by(|&a, &b| {
                let da = (data.x()[(a, 0)] - z).abs();
                let db = (data.x()[(b, 0)] - z).abs();
                da.partial_cmp(&db).unwrap()
            });
            let ones = idx[..3].iter().filter(|&&i| data.label(i) == Label::One).count();
            let expected = if 2 * ones >= 3 { Label::One } else { Label::Two };
            assert_eq!(m.predict(&[z]), expected, "z = {z}");
        }
    }

    #[test]
    fn ties_are_reproducible_and_split_both_ways() {
        // The query sits exactly between one point of each class; k = 1.
        let data = Dataset::from_rows(&[vec![-1.0], vec![1.0]], vec![Label::One, Label::Two]).unwrap();
        let mut seen = [false; 2];
        for s in 0..64 {
            let m = fit_knn(&data, 1, s).unwrap();
            let a = m.predict(&[0.0]);
            assert_eq!(a, m.predict(&[0.0]));
            seen[a.index()] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn invalid_k() {
        assert!(fit_knn(&line(), 0, 0).is_err());
        assert!(fit_knn(&line(), 6, 0).is_err());
    }

    #[test]
    fn default_k_rule() {
        assert_eq!(default_k(4), 3);
        assert_eq!(default_k(100), 10);
        assert_eq!(default_k(200), 14);
        assert_eq!(default_k(2), 2);
    }
}
