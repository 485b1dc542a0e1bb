use std::fs;
use std::path::Path;

use dmap_core::classify::{Classifier, Predictions};
use dmap_core::data::{generate_phantoms, load_dataset, save_dataset, standardize, Dataset, PhantomConfig, Shape};
use dmap_core::ensemble::{
    build_fold_plan, cross_validate, diagnosis_table, read_votes_csv, two_model_confusion, write_diagnosis_csv,
    write_metrics_csv, write_votes_csv, CrossValReport, DiagnosisRow,
};
use dmap_core::manifold::{fit, FittedEmbedder, Method};
use dmap_core::nystrom::TrainedSpace;
use dmap_core::spectral::write_embedding_csv;
use dmap_core::Error;
use nalgebra::DMatrix;

use crate::config::{parse_method, resolve_test, ConfigFile, RunConfig};
use crate::{CliError, CrossvalArgs, DiagnoseArgs, PredictArgs, SynthArgs, TrainArgs, TwoModelArgs};

const SPACE_FILE: &str = "space.bin";
const CLASSIFIER_FILE: &str = "classifier.json";

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let shape: Shape = args.shape.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(CliError::Usage(format!("--noise must be non-negative, got {}", args.noise)));
    }
    let ds = generate_phantoms(&PhantomConfig {
        n_per_class: args.n,
        shape,
        noise_sigma: args.noise,
        seed: args.seed,
    })?;
    let manifest = save_dataset(&ds, &args.out)?;
    println!("wrote {} samples to {}", ds.len(), manifest.display());
    Ok(())
}

fn print_report(report: &CrossValReport) {
    let s = &report.summary;
    println!(
        "{} + {} (k = {}): validation accuracy {:.4} ± {:.4}, training accuracy {:.4}",
        s.method, s.classifier, s.dimension, s.validation_accuracy.mean, s.validation_accuracy.std, s.train_accuracy.mean
    );
    if let Some(m) = &s.test_after_voting {
        println!("  test after voting: accuracy {:.4} on {} subjects", m.accuracy, m.confusion.total());
    }
}

pub fn crossval(args: &CrossvalArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(args.model.config.as_deref())?;
    let config = RunConfig::resolve(&args.model, &file)?;
    let test = resolve_test(args.test_count, args.test_fraction, args.test_ids.as_deref(), &file)?;
    let compare = match args.compare.as_deref().or(file.compare.as_deref()) {
        Some("none") => None,
        Some(m) => Some(parse_method(m)?),
        None if config.spec.method == Method::Lle => Some(Method::Dm),
        None => Some(Method::Lle),
    }
    .filter(|&m| m != config.spec.method);

    let raw = load_dataset(&args.data)?;
    raw.labels()?;
    let ds = raw.standardized()?;
    let plan = build_fold_plan(&ds, &test, config.seed)?;
    let primary = cross_validate(&ds, &plan, &config.spec, config.classifier, config.threshold)?;
    print_report(&primary);
    let secondary = compare
        .map(|m| {
            let report = cross_validate(&ds, &plan, &config.spec.with_method(m), config.classifier, config.threshold)?;
            print_report(&report);
            Ok::<_, CliError>(report)
        })
        .transpose()?;
    let embedder = fit(&config.spec, &ds.subset(&plan.pool()))?;

    let out = &args.out;
    fs::create_dir_all(out)?;
    let mut reports = vec![&primary];
    reports.extend(secondary.as_ref());
    write_metrics_csv(&out.join("metrics.csv"), &reports)?;
    write_votes_csv(&out.join("votes.csv"), &primary.votes)?;
    write_diagnosis_csv(&out.join("diagnosis.csv"), &diagnosis_table(&primary.votes))?;
    let pool_ids: Vec<&str> = plan.pool().iter().map(|&i| ds.samples()[i].id.as_str()).collect();
    write_embedding_csv(&out.join("embedding.csv"), &pool_ids, embedder.coords())?;
    let mut summaries = vec![&primary.summary];
    if let Some(b) = &secondary {
        let method = b.spec.method;
        write_votes_csv(&out.join(format!("votes_{method}.csv")), &b.votes)?;
        let table = two_model_confusion(
            config.spec.method.name(),
            &primary.votes,
            method.name(),
            &b.votes,
        )?;
        fs::write(out.join("two_model.json"), table.to_json()?)?;
        summaries.push(&b.summary);
    }
    let summary = serde_json::to_string_pretty(&summaries).map_err(Error::from)?;
    fs::write(out.join("summary.json"), summary)?;
    Ok(())
}

fn write_predictions(path: &Path, ids: &[&str], pred: &Predictions) -> Result<(), CliError> {
    let mut text = String::from("id,label,score\n");
    for ((id, label), score) in ids.iter().zip(&pred.labels).zip(&pred.scores) {
        text.push_str(&format!("{id},{label},{score}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(args.model.config.as_deref())?;
    let config = RunConfig::resolve(&args.model, &file)?;
    if config.spec.method != Method::Dm {
        return Err(CliError::Usage(
            "train supports only --method dm; other methods cannot be persisted".into(),
        ));
    }
    let raw = load_dataset(&args.data)?;
    let labels = raw.labels()?;
    let ds = raw.standardized()?;
    let FittedEmbedder::Diffusion(space) = fit(&config.spec, &ds)? else {
        unreachable!("dm always yields a diffusion space")
    };
    let coords = &space.coords().coords;
    let model = Classifier::fit(config.classifier, coords, &labels)?;
    let pred = model.predict(coords)?;

    fs::create_dir_all(&args.out)?;
    space.save(&args.out.join(SPACE_FILE))?;
    fs::write(args.out.join(CLASSIFIER_FILE), model.to_json()?)?;
    write_predictions(&args.out.join("train_predictions.csv"), &ds.ids(), &pred)?;
    println!(
        "trained on {} samples, k = {}, in-sample accuracy {:.4}",
        ds.len(),
        space.k(),
        pred.labels.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
    );
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let space = TrainedSpace::load(&args.model.join(SPACE_FILE))?;
    let model_json = fs::read_to_string(args.model.join(CLASSIFIER_FILE))?;
    let model = Classifier::from_json(&model_json)?;
    let ds: Dataset = load_dataset(&args.data)?;
    let mut coords = DMatrix::zeros(ds.len(), space.k());
    for (i, sample) in ds.samples().iter().enumerate() {
        let (z, _) = standardize(sample)?;
        let ext = space.extend(&z)?;
        coords.row_mut(i).copy_from_slice(&ext.coords);
    }
    let pred = model.predict(&coords)?;
    fs::create_dir_all(&args.out)?;
    write_predictions(&args.out.join("predictions.csv"), &ds.ids(), &pred)?;
    println!("classified {} samples", ds.len());
    Ok(())
}

fn check_threshold(t: f64) -> Result<(), CliError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--threshold must lie in (0, 1), got {t}")))
    }
}

pub fn two_model(args: &TwoModelArgs) -> Result<(), CliError> {
    check_threshold(args.threshold)?;
    let a = read_votes_csv(&args.a, args.threshold)?;
    let b = read_votes_csv(&args.b, args.threshold)?;
    let table = two_model_confusion(&args.name_a, &a, &args.name_b, &b)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("two_model.json"), table.to_json()?)?;
    for (label, t) in [(0, &table.true_label_0), (1, &table.true_label_1)] {
        println!(
            "true {label}: both 0 = {}, {} only = {}, {} only = {}, both 1 = {}",
            t[0][0].count, args.name_a, t[1][0].count, args.name_b, t[0][1].count, t[1][1].count
        );
    }
    Ok(())
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    check_threshold(args.threshold)?;
    let records = read_votes_csv(&args.votes, args.threshold)?;
    let rows: Vec<DiagnosisRow> = diagnosis_table(&records);
    fs::create_dir_all(&args.out)?;
    write_diagnosis_csv(&args.out.join("diagnosis.csv"), &rows)?;
    println!("{} abnormal subjects called normal", rows.len());
    for r in &rows {
        let age = r.age.map(|a| a.to_string()).unwrap_or_else(|| "-".into());
        println!("  {}  age {}  p = {:.2}", r.id, age, r.proportion);
    }
    Ok(())
}
