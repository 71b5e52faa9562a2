use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rpens::datagen::ModelSpec;
use rpens::ensemble::{select_d, EnsembleModel, MODEL_FORMAT};
use rpens::evaluation::{
    run, theorem1_rate_diagnostic, theorem2_bound_diagnostic, DataSource, ExperimentSpec, Method,
    MethodSpec,
};
use rpens::{io as data_io, seed, Error, Result};

use crate::args::{
    BayesRiskArgs, BoundArgs, Comparator, FitArgs, PredictArgs, RateArgs, SelectDArgs, SimulateArgs,
};
use crate::output::Audit;

/// Points on the threshold grid for the Ĝ curves.
const CURVE_POINTS: usize = 200;

fn flush<W: Write>(mut w: W) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn csv_on<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn float(v: f64) -> String {
    format!("{v:?}")
}

pub fn simulate(a: &SimulateArgs, audit: &Audit) -> Result<()> {
    let source = match (&a.data, a.model) {
        (Some(path), _) => DataSource::Table(data_io::read_dataset_file(path)?),
        (None, Some(id)) => DataSource::Model(ModelSpec::new(id, a.p, a.pi1, a.rotation_seed)?),
        (None, None) => unreachable!("clap requires --model or --data"),
    };
    let p = match &source {
        DataSource::Model(m) => m.p(),
        DataSource::Table(d) => d.p(),
    };
    let cfg = a.ensemble.config(a.d, a.n, 0);
    cfg.validate(p)?;
    let base = format!("{:?}", a.ensemble.base).to_lowercase();
    let mut methods = vec![Method::new(format!("rp-{base}{}", a.d), MethodSpec::Ensemble(cfg))];
    for c in &a.compare {
        let (id, spec) = match c {
            Comparator::Lda => ("lda", MethodSpec::Lda),
            Comparator::Qda => ("qda", MethodSpec::Qda),
            Comparator::Knn => ("knn", MethodSpec::Knn { k: None }),
        };
        if !methods.iter().any(|m| m.id == id) {
            methods.push(Method::new(id, spec));
        }
    }
    let spec = ExperimentSpec {
        source,
        n_train: a.n,
        n_test: a.n_test,
        repetitions: a.reps,
        methods,
        seed: a.seed,
    };
    let result = run(&spec)?;

    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let mut w = audit.create(&dir.join("records.csv"), Some(a.seed))?;
        result.write_records(&mut w)?;
        flush(w)?;
        let mut w = audit.create(&dir.join("summary.csv"), Some(a.seed))?;
        result.write_summary(&mut w)?;
        flush(w)?;
    }

    let summaries = result.summaries();
    let width = summaries.iter().map(|s| s.method.len()).max().unwrap_or(6).max(6);
    let mut out = io::stdout().lock();
    writeln!(out, "{:<width$}  {:>14}  reps", "method", "rate_{se}")?;
    for s in &summaries {
        writeln!(out, "{:<width$}  {:>14}  {}", s.method, s.cell(), s.reps)?;
    }
    Ok(())
}

pub fn fit(a: &FitArgs, audit: &Audit) -> Result<()> {
    let train = data_io::read_dataset_file(&a.train)?;
    let cfg = a.ensemble.config(a.d, train.n(), a.seed);
    let model = EnsembleModel::fit(&train, &cfg)?;
    let mut w = BufWriter::new(File::create(&a.model_out)?);
    model.save(&mut w)?;
    flush(w)?;

    if let Some(dir) = &a.plots {
        fs::create_dir_all(dir)?;
        write_plots(&model, dir, audit, a.seed)?;
    }
    let winners = model.winner_estimates();
    let mean = winners.iter().map(|e| e.value()).sum::<f64>() / winners.len() as f64;
    println!(
        "fitted {} members on n = {}, p = {}; alpha_hat = {}; mean selected error estimate = {:.4}",
        model.b1(),
        train.n(),
        train.p(),
        model.alpha_hat(),
        mean
    );
    Ok(())
}

fn write_plots(model: &EnsembleModel, dir: &Path, audit: &Audit, s: u64) -> Result<()> {
    let [p1, p2] = model.priors();
    let mut w = audit.create(&dir.join("g_curves.csv"), Some(s))?;
    {
        let mut c = csv_on(&mut w);
        c.write_record(["t", "g1", "g2", "objective"])?;
        for (t, g1, g2) in model.in_sample_votes().g_curves(CURVE_POINTS) {
            c.write_record([float(t), float(g1), float(g2), float(p1 * g1 + p2 * (1.0 - g2))])?;
        }
        c.flush()?;
    }
    flush(w)?;

    let mut est: Vec<f64> = model.winner_estimates().iter().map(|e| e.value()).collect();
    est.sort_by(f64::total_cmp);
    let n = est.len() as f64;
    let mut w = audit.create(&dir.join("winner_ecdf.csv"), Some(s))?;
    {
        let mut c = csv_on(&mut w);
        c.write_record(["estimate", "ecdf"])?;
        for (i, e) in est.iter().enumerate() {
            // Only the last of a run of equal values carries the step.
            if est.get(i + 1) != Some(e) {
                c.write_record([float(*e), float((i + 1) as f64 / n)])?;
            }
        }
        c.flush()?;
    }
    flush(w)
}

pub fn predict(a: &PredictArgs, audit: &Audit) -> Result<()> {
    let model = EnsembleModel::load(io::BufReader::new(File::open(&a.model)?))
        .map_err(|e| match e {
            Error::Json(j) => Error::Format(format!("{} is not a {MODEL_FORMAT} file: {j}", a.model.display())),
            e => e,
        })?;
    let data = data_io::read_dataset_file(&a.data)?;
    if data.p() != model.p() {
        return Err(Error::Shape { expected: model.p(), found: data.p() });
    }
    let votes = model.votes_batch(data.x())?;
    let labels: Vec<_> = votes.iter().map(|v| model.decide(*v)).collect();

    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = sink;
    audit.write_header(&mut sink, Some(model.config().seed))?;
    {
        let mut c = csv_on(&mut sink);
        c.write_record(["row", "label", "vote"])?;
        for (i, (l, v)) in labels.iter().zip(&votes).enumerate() {
            c.write_record([(i + 1).to_string(), l.to_string(), float(v.value())])?;
        }
        c.flush()?;
    }
    flush(sink)?;
    if a.out.is_some() {
        let wrong = labels.iter().zip(data.y()).filter(|(p, t)| p != t).count();
        println!(
            "{} rows; disagreement with the label column: {:.4}",
            data.n(),
            wrong as f64 / data.n() as f64
        );
    }
    Ok(())
}

pub fn select_dimension(a: &SelectDArgs, audit: &Audit) -> Result<()> {
    let train = data_io::read_dataset_file(&a.train)?;
    let cfg = a.ensemble.config(a.candidates[0], train.n(), a.seed);
    let choice = select_d(&train, &a.candidates, &cfg)?;
    for (d, score) in &choice.scores {
        println!("d = {d}: mean selected error estimate {score:.4}");
    }
    println!("chosen d = {}", choice.chosen);
    if let Some(path) = &a.out {
        let mut w = audit.create(path, Some(a.seed))?;
        {
            let mut c = csv_on(&mut w);
            c.write_record(["d", "score", "chosen"])?;
            for (d, score) in &choice.scores {
                c.write_record([d.to_string(), float(*score), (*d == choice.chosen).to_string()])?;
            }
            c.flush()?;
        }
        flush(w)?;
    }
    Ok(())
}

pub fn rate(a: &RateArgs, audit: &Audit) -> Result<()> {
    let spec = a.model.spec()?;
    let train = spec.sample(a.n, &mut seed::rng(seed::child(a.seed, 0))).into_dataset();
    let test = spec
        .sample(a.n_test, &mut seed::rng(seed::child(a.seed, 1)))
        .with_truth(&spec);
    let cfg = a.ensemble.config(a.d, a.n, seed::child(a.seed, 2));
    let diag = theorem1_rate_diagnostic(&train, &test, &cfg, &a.grid, a.replicates)?;

    println!("B1_max = {}, replicates = {}", diag.b1_max, diag.replicates);
    println!("{:>6}  {:>12}  {:>12}", "B1", "gap", "se");
    for ((b, g), s) in diag.b1_grid.iter().zip(&diag.gaps).zip(&diag.gap_se) {
        println!("{b:>6}  {g:>12.6}  {s:>12.6}");
    }
    match diag.slope {
        Some(s) => println!("log-log slope = {s:.3}"),
        None => println!("insufficient signal: fewer than three positive gaps"),
    }
    if let Some(path) = &a.out {
        let mut w = audit.create(path, Some(a.seed))?;
        {
            let mut c = csv_on(&mut w);
            c.write_record(["B1", "gap", "se"])?;
            for ((b, g), s) in diag.b1_grid.iter().zip(&diag.gaps).zip(&diag.gap_se) {
                c.write_record([b.to_string(), float(*g), float(*s)])?;
            }
            c.flush()?;
        }
        flush(w)?;
    }
    Ok(())
}

pub fn bound(a: &BoundArgs) -> Result<()> {
    let spec = a.model.spec()?;
    let cfg = a.ensemble.config(a.d, a.n, a.seed);
    let d = theorem2_bound_diagnostic(&spec, &cfg, a.n, a.mc_n)?;
    println!("alpha = {}", d.alpha);
    println!("ensemble excess risk    = {:.5} ± {:.5}", d.lhs.mean, d.lhs.se);
    println!("single-projection bound = {:.5} ± {:.5}", d.rhs.mean, d.rhs.se);
    println!("Bayes risk              = {:.5} ± {:.5}", d.bayes_risk.mean, d.bayes_risk.se);
    println!("bound {}", if d.holds { "holds" } else { "violated" });
    Ok(())
}

pub fn bayes_risk(a: &BayesRiskArgs) -> Result<()> {
    let spec = a.model.spec()?;
    let est = spec.bayes_risk(a.mc_n, &mut seed::rng(a.seed))?;
    println!("{:.2} ± {:.2} (x100, {} draws)", 100.0 * est.mean, 100.0 * est.se, est.n);
    Ok(())
}
