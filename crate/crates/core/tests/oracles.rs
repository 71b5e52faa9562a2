//! Fast estimators against slow, obviously-correct recomputations.

use rand::Rng;
use rpens::base::{BaseKind, Classify};
use rpens::ensemble::{select_block_winner, Estimator, Selector};
use rpens::estimate::{self, LooFailure};
use rpens::projection::Projection;
use rpens::{seed, Dataset, Label};

/// Random two-class data. With `grid`, coordinates are small integers so
/// that many distances tie.
fn instance(s: u64, n: usize, d: usize, min_per_class: usize, grid: bool) -> Dataset {
    let mut r = seed::rng(s);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i < min_per_class {
            Label::One
        } else if i < 2 * min_per_class {
            Label::Two
        } else if r.random::<bool>() {
            Label::One
        } else {
            Label::Two
        };
        let shift = if label == Label::One { 0.0 } else { 1.0 };
        let row: Vec<f64> = (0..d)
            .map(|_| {
                if grid {
                    r.random_range(0..4) as f64
                } else {
                    shift + r.sample::<f64, _>(rand_distr::StandardNormal)
                }
            })
            .collect();
        rows.push(row);
        y.push(label);
    }
    Dataset::from_rows(&rows, y).unwrap()
}

#[test]
fn loo_matches_refitting_for_all_bases() {
    let mut checked = 0;
    for s in 0..50u64 {
        let mut r = seed::rng(1000 + s);
        let n = r.random_range(14..=30);
        let d = r.random_range(1..=3);
        let k = r.random_range(1..=7);
        let tie = r.random::<u64>();
        let cont = instance(s, n, d, d + 3, false);
        let ties = instance(s, n, d, 1, true);
        for (base, data) in [
            (BaseKind::Lda, &cont),
            (BaseKind::Qda, &cont),
            (BaseKind::Knn { k }, &ties),
            (BaseKind::Knn { k }, &cont),
        ] {
            let fast = estimate::leave_one_out_base(data, base, tie, LooFailure::Abort).unwrap();
            let slow = estimate::leave_one_out(data, |t| base.fit(t, tie)).unwrap();
            assert_eq!(fast.predictions, slow.predictions, "instance {s}, {base:?}");
            assert_eq!(fast.estimate, slow.estimate);
            checked += 1;
        }
    }
    assert_eq!(checked, 200);
}

#[test]
fn resubstitution_matches_recount() {
    for s in 0..50u64 {
        let data = instance(s, 25, 2, 4, false);
        for base in [BaseKind::Lda, BaseKind::Qda, BaseKind::Knn { k: 3 }] {
            let model = base.fit(&data, s).unwrap();
            let a = estimate::resubstitution_base(&data, &model);
            let recount = (0..data.n())
                .filter(|&i| model.predict(&data.point(i)) != data.label(i))
                .count();
            assert_eq!(a.estimate.errors, recount);
            assert_eq!(a.estimate.m, data.n());
        }
    }
}

fn exhaustive_argmin(errors: &[usize]) -> usize {
    let best = *errors.iter().min().unwrap();
    errors.iter().position(|&e| e == best).unwrap()
}

#[test]
fn block_winner_is_first_minimiser() {
    let data = instance(7, 40, 6, 5, false);
    let mut r = seed::rng(3);
    let a = Projection::sample_haar(6, 2, &mut r).unwrap();
    let b = Projection::sample_haar(6, 2, &mut r).unwrap();
    let c = Projection::sample_haar(6, 2, &mut r).unwrap();
    // Repeated projections tie exactly; the first copy must win.
    let blocks = [
        vec![a.clone(), a.clone(), a.clone()],
        vec![b.clone(), a.clone(), b.clone(), a.clone()],
        vec![c.clone(), b.clone(), a.clone(), c.clone(), b.clone(), a.clone()],
    ];
    for base in [BaseKind::Lda, BaseKind::Qda, BaseKind::Knn { k: 5 }] {
        for est in [
            Estimator::Resubstitution,
            Estimator::LeaveOneOut,
            Estimator::SampleSplit { holdout: 0.5 },
        ] {
            for block in &blocks {
                let out = select_block_winner(&data, block, base, est, 11).unwrap();
                let errors: Vec<usize> = out.errors.iter().map(|e| e.unwrap()).collect();
                assert_eq!(out.winner, exhaustive_argmin(&errors), "{base:?} {est:?}");
                assert_eq!(out.candidate.estimate.errors, errors[out.winner]);
            }
        }
    }
}

#[test]
fn block_winner_agrees_with_independent_assessment() {
    let data = instance(8, 30, 5, 5, false);
    let mut r = seed::rng(4);
    let block: Vec<Projection> = (0..12)
        .map(|_| Projection::sample_haar(5, 2, &mut r).unwrap())
        .collect();
    let base = BaseKind::Qda;
    let out = select_block_winner(&data, &block, base, Estimator::LeaveOneOut, 0).unwrap();
    let errors: Vec<usize> = block
        .iter()
        .map(|a| {
            let z = a.apply_dataset(&data).unwrap();
            estimate::leave_one_out(&z, |t| base.fit(t, 0)).unwrap().estimate.errors
        })
        .collect();
    assert_eq!(out.winner, exhaustive_argmin(&errors));
}

#[test]
fn failed_candidates_never_win() {
    // Class 2 has two points: QDA in d = 2 cannot be fitted on any projection.
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 % 7.0, 1.0]).collect();
    let mut y = vec![Label::One; 10];
    y[0] = Label::Two;
    y[1] = Label::Two;
    let data = Dataset::from_rows(&rows, y).unwrap();
    let block = vec![Projection::sample_haar(3, 2, &mut seed::rng(1)).unwrap()];
    let sel = Selector::new(&data, BaseKind::Qda, Estimator::Resubstitution, 0).unwrap();
    assert!(sel.select(&block, &[0], 9).is_err());
}
