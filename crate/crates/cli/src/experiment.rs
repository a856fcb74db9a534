//! Dataset selection, seeding and method dispatch shared by the commands.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use r2dpca::classifier::{accuracy, Gallery};
use r2dpca::dataset::{
    compute_centering, load_manifest, split_indices, synth_generate, LabeledDataset,
};
use r2dpca::projector::{
    g2dpca_fit, r2dpca_fit, relaxed_2dpca_eig, twodpca_eig, twodpca_l1s_fit, FitConfig,
    ProjectionModel,
};
use r2dpca::relaxation::relaxation_vector;
use r2dpca::{PNorm, Result as LibResult};

use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TwoDpca,
    TwoDpcaEig,
    TwoDpcaL1,
    TwoDpcaL1s,
    G2dpca,
    R2dpca,
    R2dpcaEig,
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "2dpca" => Method::TwoDpca,
            "2dpca-eig" => Method::TwoDpcaEig,
            "2dpca-l1" => Method::TwoDpcaL1,
            "2dpca-l1s" => Method::TwoDpcaL1s,
            "g2dpca" => Method::G2dpca,
            "r2dpca" => Method::R2dpca,
            "r2dpca-eig" => Method::R2dpcaEig,
            other => return Err(CliError::config(format!("unknown method {other:?}"))),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TwoDpca => "2dpca",
            Method::TwoDpcaEig => "2dpca-eig",
            Method::TwoDpcaL1 => "2dpca-l1",
            Method::TwoDpcaL1s => "2dpca-l1s",
            Method::G2dpca => "g2dpca",
            Method::R2dpca => "r2dpca",
            Method::R2dpcaEig => "r2dpca-eig",
        })
    }
}

impl Method {
    /// Whether `s` and `p` are free parameters of the method.
    pub fn takes_norms(self) -> bool {
        matches!(self, Method::G2dpca | Method::R2dpca)
    }

    /// The parameters this method actually uses, for reports.
    pub fn describe(self, cfg: &Config) -> String {
        match self {
            Method::TwoDpca | Method::TwoDpcaEig => format!("r={}", cfg.r),
            Method::TwoDpcaL1 => format!("s=1 p=2 r={}", cfg.r),
            Method::TwoDpcaL1s => format!("lambda={} r={}", cfg.lambda, cfg.r),
            Method::G2dpca => format!("s={} p={} r={}", cfg.s, cfg.p, cfg.r),
            Method::R2dpca => format!(
                "s={} p={} gamma={} r={} relax={}",
                cfg.s, cfg.p, cfg.gamma, cfg.r, cfg.relax_fn
            ),
            Method::R2dpcaEig => format!("gamma={} r={} relax={}", cfg.gamma, cfg.r, cfg.relax_fn),
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one purpose and repeat, derived from the root seed.
pub fn derive_seed(root: u64, tag: &str, index: u64) -> u64 {
    let tag_hash = tag
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3));
    splitmix(splitmix(root ^ tag_hash) ^ index)
}

pub fn load_dataset(cfg: &Config) -> LibResult<LabeledDataset> {
    match &cfg.manifest {
        Some(path) => load_manifest(path),
        None => synth_generate(&cfg.synth, derive_seed(cfg.seed, "synth", 0)),
    }
}

/// Train and test halves of one repeat, with their dataset indices.
pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub test_indices: Vec<usize>,
}

pub fn split(ds: &LabeledDataset, cfg: &Config, repeat: usize) -> LibResult<Split> {
    let (train_idx, test_idx) =
        split_indices(ds, cfg.train_per_class, derive_seed(cfg.seed, "split", repeat as u64))?;
    Ok(Split {
        train: ds.subset(&train_idx)?,
        test: ds.subset(&test_idx)?,
        test_indices: test_idx,
    })
}

fn fit_config(cfg: &Config, repeat: usize) -> FitConfig {
    FitConfig {
        s: cfg.s,
        p: cfg.p,
        gamma: cfg.gamma,
        r: cfg.r,
        tol: cfg.tol,
        step_tol: cfg.step_tol,
        max_iter: cfg.max_iter,
        lambda_sparsity: cfg.lambda,
        init: cfg.init,
        seed: derive_seed(cfg.seed, "init", repeat as u64),
    }
}

pub fn fit(cfg: &Config, train: &LabeledDataset, repeat: usize) -> LibResult<ProjectionModel> {
    let fc = fit_config(cfg, repeat);
    let relax = || relaxation_vector(train, &compute_centering(train), cfg.relax_fn);
    let model = match cfg.method {
        Method::TwoDpca => g2dpca_fit(
            train,
            &FitConfig {
                s: 2.0,
                p: PNorm::Finite(2.0),
                ..fc
            },
        )?,
        Method::TwoDpcaEig => twodpca_eig(train, cfg.r)?,
        Method::TwoDpcaL1 => g2dpca_fit(
            train,
            &FitConfig {
                s: 1.0,
                p: PNorm::Finite(2.0),
                ..fc
            },
        )?,
        Method::TwoDpcaL1s => twodpca_l1s_fit(train, &fc)?,
        Method::G2dpca => g2dpca_fit(train, &fc)?,
        Method::R2dpca => r2dpca_fit(train, &relax()?, &fc)?,
        Method::R2dpcaEig => relaxed_2dpca_eig(train, &relax()?, cfg.gamma, cfg.r)?,
    };
    Ok(model)
}

/// Accuracy of `model` truncated to each rank in `ranks`.
pub fn accuracies(model: &ProjectionModel, split: &Split, ranks: &[usize]) -> LibResult<Vec<f64>> {
    ranks
        .iter()
        .map(|&r| {
            let m = model.truncated(r)?;
            let gallery = Gallery::build(&split.train, &m)?;
            accuracy(&gallery, &split.test, &m)
        })
        .collect()
}

/// Per-repeat accuracy at each rank, fitting a fresh model per repeat.
pub fn repeat_accuracies(cfg: &Config, ds: &LabeledDataset, ranks: &[usize]) -> LibResult<Vec<Vec<f64>>> {
    (0..cfg.repeats)
        .into_par_iter()
        .map(|k| {
            let sp = split(ds, cfg, k)?;
            let model = fit(cfg, &sp.train, k)?;
            accuracies(&model, &sp, ranks)
        })
        .collect()
}

/// Mean over repeats of the accuracy at the configured rank.
pub fn mean_accuracy(cfg: &Config, ds: &LabeledDataset) -> LibResult<f64> {
    let per_repeat = repeat_accuracies(cfg, ds, &[cfg.r])?;
    Ok(per_repeat.iter().map(|a| a[0]).sum::<f64>() / per_repeat.len() as f64)
}
