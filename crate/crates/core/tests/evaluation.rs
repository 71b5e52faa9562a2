use rand::Rng;
use rpens::base::{fit_knn, BaseKind, Classify};
use rpens::datagen::ModelSpec;
use rpens::ensemble::{AlphaRule, EnsembleConfig, Estimator};
use rpens::evaluation::{
    comparator_knn_cv, draw_repetition, run, theorem1_rate_diagnostic, theorem2_bound_diagnostic,
    DataSource, ExperimentResult, ExperimentSpec, Method, MethodSpec, Summary,
};
use rpens::{seed, Dataset, Label};

fn small_ensemble(base: BaseKind) -> EnsembleConfig {
    let mut cfg = EnsembleConfig::new(2, base);
    cfg.b1 = 6;
    cfg.b2 = 4;
    cfg
}

fn experiment(methods: Vec<Method>, reps: usize) -> ExperimentSpec {
    ExperimentSpec {
        source: DataSource::Model(ModelSpec::model2(6, 0.5).unwrap()),
        n_train: 40,
        n_test: 200,
        repetitions: reps,
        methods,
        seed: 5,
    }
}

#[test]
fn constant_method_scores_the_other_class_fraction() {
    let spec = experiment(vec![Method::new("one", MethodSpec::Constant { label: Label::One })], 3);
    let result = run(&spec).unwrap();
    for rep in 0..3 {
        let (_, test) = draw_repetition(&spec, rep).unwrap();
        let class_2 = test.class_counts()[1] as f64 / test.n() as f64;
        assert_eq!(result.errors[0][rep], Some(class_2));
    }
}

#[test]
fn methods_do_not_see_each_other() {
    let methods = vec![
        Method::new("a", MethodSpec::Ensemble(small_ensemble(BaseKind::Lda))),
        Method::new("b", MethodSpec::Ensemble(small_ensemble(BaseKind::Lda))),
        Method::new("knn", MethodSpec::Knn { k: None }),
        Method::new("qda", MethodSpec::Qda),
    ];
    let result = run(&experiment(methods.clone(), 4)).unwrap();
    assert_eq!(result.method_errors("a"), result.method_errors("b"));

    let mut shuffled = methods;
    shuffled.reverse();
    let other = run(&experiment(shuffled, 4)).unwrap();
    for id in ["a", "b", "knn", "qda"] {
        assert_eq!(result.method_errors(id), other.method_errors(id), "{id}");
    }
    assert!(result.errors.iter().flatten().flatten().all(|e| (0.0..=1.0).contains(e)));
}

#[test]
fn unprojected_comparators_report_unavailable() {
    // n = 40, p = 50: LDA needs n > p + 2 and QDA min(n1, n2) > p + 1.
    let mut spec = experiment(
        vec![
            Method::new("lda", MethodSpec::Lda),
            Method::new("qda", MethodSpec::Qda),
            Method::new("rp", MethodSpec::Ensemble(small_ensemble(BaseKind::Lda))),
        ],
        2,
    );
    spec.source = DataSource::Model(ModelSpec::model1(50, 0.5).unwrap());
    let result = run(&spec).unwrap();
    assert_eq!(result.method_errors("lda").unwrap(), &[None, None]);
    assert_eq!(result.method_errors("qda").unwrap(), &[None, None]);
    assert!(result.method_errors("rp").unwrap().iter().all(Option::is_some));
    let cells: Vec<String> = result.summaries().iter().map(Summary::cell).collect();
    assert_eq!(cells[0], "N/A");
}

#[test]
fn summary_is_recomputable_from_records() {
    let methods = vec![
        Method::new("rp", MethodSpec::Ensemble(small_ensemble(BaseKind::Qda))),
        Method::new("knn3", MethodSpec::Knn { k: Some(3) }),
    ];
    let result = run(&experiment(methods, 5)).unwrap();
    let mut buf = Vec::new();
    result.write_records(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(&buf[..]);
    let mut by_method: Vec<(String, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let e: f64 = rec[2].parse().unwrap();
        match by_method.iter_mut().find(|(m, _)| m == &rec[0]) {
            Some((_, v)) => v.push(e),
            None => by_method.push((rec[0].to_string(), vec![e])),
        }
    }
    for (s, (m, errs)) in result.summaries().iter().zip(&by_method) {
        assert_eq!(&s.method, m);
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((s.mean - 100.0 * mean).abs() < 1e-9);
        assert!((s.se - 100.0 * sd / n.sqrt()).abs() < 1e-9);
    }
}

#[test]
fn one_repetition_has_zero_standard_error() {
    let result = run(&experiment(vec![Method::new("knn", MethodSpec::Knn { k: Some(5) })], 1)).unwrap();
    let s = &result.summaries()[0];
    assert_eq!(s.se, 0.0);
    assert_eq!(s.mean, 100.0 * result.errors[0][0].unwrap());
}

#[test]
fn table_source_splits_without_overlap() {
    let mut r = seed::rng(1);
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, r.random::<f64>()]).collect();
    let y = (0..30).map(|i| if i % 3 == 0 { Label::One } else { Label::Two }).collect();
    let data = Dataset::from_rows(&rows, y).unwrap();
    let spec = ExperimentSpec {
        source: DataSource::Table(data),
        n_train: 20,
        n_test: 0,
        repetitions: 2,
        methods: vec![Method::new("c", MethodSpec::Constant { label: Label::Two })],
        seed: 9,
    };
    let (train, test) = draw_repetition(&spec, 0).unwrap();
    assert_eq!((train.n(), test.n()), (20, 10));
    let mut ids: Vec<f64> = train.x().column(0).iter().chain(test.x().column(0).iter()).copied().collect();
    ids.sort_by(f64::total_cmp);
    assert_eq!(ids, (0..30).map(|i| i as f64).collect::<Vec<_>>());
    assert_ne!(draw_repetition(&spec, 1).unwrap().0, train);
}

#[test]
fn invalid_experiments_are_rejected() {
    let dup = vec![
        Method::new("x", MethodSpec::Lda),
        Method::new("x", MethodSpec::Qda),
    ];
    assert!(run(&experiment(dup, 1)).is_err());
    assert!(run(&experiment(vec![Method::new("x", MethodSpec::Lda)], 0)).is_err());
}

fn brute_force_k(train: &Dataset, tie: u64) -> usize {
    let top = 25.min(train.n() - 1);
    let mut best = (usize::MAX, 0);
    for k in (1..=top).step_by(2) {
        let errors = (0..train.n())
            .filter(|&i| {
                let m = fit_knn(&train.without(i), k, tie).unwrap();
                m.predict(&train.point(i)) != train.label(i)
            })
            .count();
        if errors < best.0 {
            best = (errors, k);
        }
    }
    best.1
}

#[test]
fn knn_cv_matches_brute_force() {
    for s in 0..20u64 {
        let mut r = seed::rng(s);
        let n = r.random_range(3..40);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
        let y = (0..n).map(|_| if r.random::<bool>() { Label::One } else { Label::Two }).collect();
        let data = Dataset::from_rows(&rows, y).unwrap();
        assert_eq!(comparator_knn_cv(&data, 7).unwrap(), brute_force_k(&data, 7), "seed {s}");
    }
}

#[test]
fn knn_cv_picks_one_for_tight_clusters() {
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|i| vec![if i < 10 { 0.0 } else { 100.0 } + i as f64 * 1e-3])
        .collect();
    let y = (0..20).map(|i| if i < 10 { Label::One } else { Label::Two }).collect();
    assert_eq!(comparator_knn_cv(&Dataset::from_rows(&rows, y).unwrap(), 0).unwrap(), 1);
}

fn fixed(base: BaseKind, alpha: f64) -> EnsembleConfig {
    let mut cfg = EnsembleConfig::new(2, base);
    cfg.b2 = 5;
    cfg.alpha = AlphaRule::Fixed { value: alpha };
    cfg.seed = 3;
    cfg
}

#[test]
fn constant_members_give_no_rate_signal() {
    let spec = ModelSpec::model1(5, 0.5).unwrap();
    let train = spec.sample(31, &mut seed::rng(1)).into_dataset();
    let test = spec.sample(200, &mut seed::rng(2)).with_truth(&spec);
    // k = n: every member predicts the training majority everywhere.
    let mut cfg = fixed(BaseKind::Knn { k: 31 }, 0.4);
    cfg.estimator = Estimator::Resubstitution;
    let d = theorem1_rate_diagnostic(&train, &test, &cfg, &[1, 2, 4, 8], 3).unwrap();
    assert_eq!(d.b1_max, 32);
    assert!(d.gaps.iter().all(|g| *g == 0.0), "{d:?} {:?}", train.class_counts());
    assert!(d.insufficient_signal());
    assert_eq!(d.max_gap_in_se(), 0.0);
}

#[test]
fn rate_diagnostic_validates_its_input() {
    let spec = ModelSpec::model1(5, 0.5).unwrap();
    let train = spec.sample(40, &mut seed::rng(1)).into_dataset();
    let test = spec.sample(50, &mut seed::rng(2));
    let cfg = fixed(BaseKind::Lda, 0.4);
    assert!(theorem1_rate_diagnostic(&train, &test, &cfg, &[1, 2, 4], 3).is_err());
    assert!(theorem1_rate_diagnostic(&train, &test, &cfg, &[1, 4, 2, 8], 3).is_err());
    let data_driven = EnsembleConfig { alpha: AlphaRule::DataDriven, ..cfg };
    assert!(theorem1_rate_diagnostic(&train, &test, &data_driven, &[1, 2, 4, 8], 3).is_err());
}

#[test]
fn bound_holds_trivially_for_extreme_alpha() {
    let spec = ModelSpec::model2(5, 0.5).unwrap();
    let mut cfg = fixed(BaseKind::Lda, 1e-6);
    cfg.b1 = 10;
    let d = theorem2_bound_diagnostic(&spec, &cfg, 60, 2000).unwrap();
    assert!(d.holds);
    assert!(d.rhs.mean > 1e3 * d.lhs.mean.max(1e-3));
}

#[test]
fn bound_holds_at_one_half() {
    let spec = ModelSpec::model1(10, 0.5).unwrap();
    let mut cfg = fixed(BaseKind::Lda, 0.5);
    cfg.b1 = 30;
    let d = theorem2_bound_diagnostic(&spec, &cfg, 100, 5000).unwrap();
    assert!(d.holds, "{d:?}");
    assert!(d.lhs.mean >= 0.0 && d.bayes_risk.mean > 0.0);
}

#[test]
fn empty_result_summaries() {
    let r = ExperimentResult {
        methods: vec!["m".into()],
        errors: vec![vec![None]],
    };
    assert_eq!(r.summaries()[0].reps, 0);
}
