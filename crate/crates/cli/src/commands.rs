use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use r2dpca::classifier::{predict_all, Gallery, Prediction};
use r2dpca::dataset::{save_manifest, synth_generate};
use r2dpca::hypersearch::{exhaustive, search, SearchGrid, SearchResult};
use r2dpca::projector::{read_model, write_model, ProjectionModel};
use r2dpca::{Error, PNorm};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::experiment::{accuracies, derive_seed, fit, load_dataset, mean_accuracy, split, Split};

pub const MODEL_FILE: &str = "model.bin";
pub const FIT_REPORT_FILE: &str = "fit_report.csv";
pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const ACCURACY_REPEATS_FILE: &str = "accuracy_repeats.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const SEARCH_PATH_FILE: &str = "search_path.csv";
pub const SEARCH_BEST_FILE: &str = "search_best.csv";
pub const COMPARE_FILE: &str = "compare.csv";

fn fmt_acc(a: f64) -> String {
    format!("{a:.4}")
}

fn output_dir(cfg: &Config) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).map_err(|source| CliError::Io {
        path: cfg.out.clone(),
        source,
    })?;
    Ok(&cfg.out)
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        let path = dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|source| CliError::Csv {
            path: path.clone(),
            source,
        })?;
        let mut t = Table { path, writer };
        t.row(header)?;
        Ok(t)
    }

    fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> Result<()> {
        self.writer.write_record(fields).map_err(|source| CliError::Csv {
            path: self.path.clone(),
            source,
        })
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|source| CliError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.path)
    }
}

pub fn cmd_synth(cfg: &Config) -> Result<()> {
    let ds = synth_generate(&cfg.synth, derive_seed(cfg.seed, "synth", 0))?;
    let manifest = save_manifest(&ds, output_dir(cfg)?)?;
    println!(
        "wrote {} images in {} classes to {}",
        ds.len(),
        ds.num_classes(),
        manifest.display()
    );
    Ok(())
}

pub fn cmd_fit(cfg: &Config) -> Result<()> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let sp = split(&ds, cfg, 0)?;
    let start = Instant::now();
    let model = fit(cfg, &sp.train, 0)?;
    let secs = start.elapsed().as_secs_f64();

    let dir = output_dir(cfg)?;
    let model_path = dir.join(MODEL_FILE);
    write_model(&model, &model_path)?;
    let mut report = Table::create(
        dir,
        FIT_REPORT_FILE,
        &["axis", "iterations", "converged", "degenerate", "objective", "wall_seconds"],
    )?;
    for (t, (status, d)) in model.axes.iter().zip(&model.objective).enumerate() {
        report.row(&[
            (t + 1).to_string(),
            status.iterations.to_string(),
            status.converged.to_string(),
            status.degenerate.to_string(),
            d.to_string(),
            format!("{secs:.6}"),
        ])?;
    }
    report.finish()?;
    if model.any_unconverged() {
        eprintln!("warning: some axes stopped at max_iter = {}", cfg.max_iter);
    }
    println!(
        "{} fitted {} axes on {} samples in {secs:.3} s; model written to {}",
        cfg.method,
        model.rank(),
        sp.train.len(),
        model_path.display()
    );
    Ok(())
}

fn check_ranks(ranks: &[usize], available: usize) -> Result<()> {
    if let Some(&bad) = ranks.iter().find(|&&r| r == 0 || r > available) {
        return Err(Error::InvalidParameter(format!(
            "cannot evaluate r = {bad} with a {available}-axis model"
        ))
        .into());
    }
    Ok(())
}

fn predictions(model: &ProjectionModel, sp: &Split) -> Result<Vec<Prediction>> {
    let gallery = Gallery::build(&sp.train, model)?;
    Ok(predict_all(&gallery, &sp.test, model)?)
}

pub fn cmd_eval(cfg: &Config, model_path: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let given = model_path.map(read_model).transpose()?;
    let rank = given.as_ref().map_or(cfg.r, |m| m.rank());
    let ranks = cfg.eval_r.clone().unwrap_or_else(|| (1..=rank).collect());
    check_ranks(&ranks, rank)?;

    // a saved model was trained on the first split, so only that split is scored
    let repeats = if given.is_some() { 1 } else { cfg.repeats };
    if given.is_some() && cfg.repeats > 1 {
        eprintln!("warning: evaluating a saved model on the first split only");
    }
    let runs: Vec<(Vec<f64>, Option<(Split, Vec<Prediction>)>)> = (0..repeats)
        .into_par_iter()
        .map(|k| -> Result<_> {
            let sp = split(&ds, cfg, k)?;
            let model = match &given {
                Some(m) => m.clone(),
                None => fit(cfg, &sp.train, k)?,
            };
            let accs = accuracies(&model, &sp, &ranks)?;
            let preds = if k == 0 {
                let p = predictions(&model, &sp)?;
                Some((sp, p))
            } else {
                None
            };
            Ok((accs, preds))
        })
        .collect::<Result<_>>()?;

    let dir = output_dir(cfg)?;
    let mut per_repeat = Table::create(dir, ACCURACY_REPEATS_FILE, &["repeat", "r", "accuracy"])?;
    for (k, (accs, _)) in runs.iter().enumerate() {
        for (r, a) in ranks.iter().zip(accs) {
            per_repeat.row(&[k.to_string(), r.to_string(), a.to_string()])?;
        }
    }
    per_repeat.finish()?;

    let mut summary = Table::create(dir, ACCURACY_FILE, &["r", "accuracy"])?;
    for (i, r) in ranks.iter().enumerate() {
        let mean = runs.iter().map(|(a, _)| a[i]).sum::<f64>() / runs.len() as f64;
        summary.row(&[r.to_string(), fmt_acc(mean)])?;
        println!("r = {r}: accuracy {}", fmt_acc(mean));
    }
    summary.finish()?;

    let (sp, preds) = runs[0].1.as_ref().expect("first repeat keeps predictions");
    let names = ds.class_names();
    let mut table = Table::create(
        dir,
        PREDICTIONS_FILE,
        &["test_index", "true_label", "predicted_label", "distance"],
    )?;
    for ((idx, &truth), p) in sp.test_indices.iter().zip(sp.test.labels()).zip(preds) {
        table.row(&[
            idx.to_string(),
            names[truth].clone(),
            names[p.label].clone(),
            p.distance.to_string(),
        ])?;
    }
    table.finish()?;
    Ok(())
}

fn write_search(dir: &Path, res: &SearchResult, mode: &str) -> Result<()> {
    let mut path = Table::create(dir, SEARCH_PATH_FILE, &["step", "kind", "s", "p", "accuracy"])?;
    for e in &res.path {
        path.row(&[
            e.step.to_string(),
            e.kind.to_string(),
            e.s.to_string(),
            e.p.to_string(),
            fmt_acc(e.accuracy),
        ])?;
    }
    path.finish()?;
    let mut best = Table::create(dir, SEARCH_BEST_FILE, &["mode", "s", "p", "accuracy", "evaluations"])?;
    best.row(&[
        mode.to_string(),
        res.best_s.to_string(),
        res.best_p.to_string(),
        fmt_acc(res.best_accuracy),
        res.evaluations.to_string(),
    ])?;
    best.finish()?;
    Ok(())
}

pub fn cmd_search(cfg: &Config, exhaustive_scan: bool) -> Result<()> {
    cfg.validate()?;
    if !cfg.method.takes_norms() {
        return Err(CliError::config(format!(
            "search needs a method with free s and p (g2dpca or r2dpca), not {}",
            cfg.method
        )));
    }
    let grid = SearchGrid::new(cfg.s_grid.clone(), cfg.p_grid.clone(), cfg.delta)?;
    let ds = load_dataset(cfg)?;
    // one fixed split keeps accuracy a pure function of (s, p)
    let sp = split(&ds, cfg, 0)?;
    let evaluator = |s: f64, p: f64| -> r2dpca::Result<f64> {
        let c = Config {
            s,
            p: PNorm::Finite(p),
            ..cfg.clone()
        };
        let model = fit(&c, &sp.train, 0)?;
        Ok(accuracies(&model, &sp, &[c.r])?[0])
    };
    let (res, mode) = if exhaustive_scan {
        (exhaustive(&grid, evaluator)?, "exhaustive")
    } else {
        let start = cfg.start.unwrap_or((grid.s_values()[0], grid.p_values()[0]));
        (search(&grid, evaluator, start)?, "search")
    };
    write_search(output_dir(cfg)?, &res, mode)?;
    println!(
        "best s = {}, p = {}: accuracy {} after {} evaluations",
        res.best_s,
        res.best_p,
        fmt_acc(res.best_accuracy),
        res.evaluations
    );
    Ok(())
}

pub fn cmd_compare(cfg: &Config) -> Result<()> {
    if cfg.methods.is_empty() {
        return Err(CliError::config("compare needs a `methods` list"));
    }
    let ds = load_dataset(cfg)?;
    let dir = output_dir(cfg)?;
    let mut table = Table::create(dir, COMPARE_FILE, &["method", "parameters", "accuracy", "status"])?;
    for entry in &cfg.methods {
        let (params, outcome) = match cfg.for_entry(entry) {
            Ok(c) => (
                entry.method.describe(&c),
                mean_accuracy(&c, &ds).map_err(CliError::from),
            ),
            Err(e) => (String::new(), Err(e)),
        };
        let (acc, status) = match outcome {
            Ok(a) => (fmt_acc(a), "ok".to_string()),
            Err(e) => (String::new(), e.to_string()),
        };
        println!("{:<12} {:<40} {acc} {status}", entry.method.to_string(), params);
        table.row(&[entry.method.to_string(), params, acc, status])?;
    }
    table.finish()?;
    Ok(())
}
