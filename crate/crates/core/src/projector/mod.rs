//! Projection-axis learning.
//!
//! Every iterative variant (2DPCA, 2DPCA-L1, G2DPCA, R2DPCA) runs through
//! one solver that maximizes a weighted sum of `‖X̂_i w‖_s^s` under
//! `‖w‖_p = 1`, one axis at a time, deflating the centered samples by all
//! accepted axes before the next. The sparse L1 variant swaps the Lp step
//! for a shrinkage step. The `s = p = 2` case is also available in closed
//! form through a symmetric eigendecomposition.

mod io;

pub use io::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{center, compute_centering, Centering, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::{abs_pow, lp_norm, sign, sym_eig, Matrix, PNorm};
use crate::par;
use crate::relaxation::{relaxation_vector, RelaxFn, RelaxationVector};

/// Starting vector for each axis. Always normalized to unit Lp norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// All-ones vector.
    Ones,
    /// First standard basis vector.
    UnitE1,
    /// Uniform entries in [-1, 1] drawn from the configured seed.
    SeededRandom,
}

impl Init {
    pub(crate) fn code(self) -> u8 {
        match self {
            Init::Ones => 0,
            Init::UnitE1 => 1,
            Init::SeededRandom => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Init::Ones),
            1 => Some(Init::UnitE1),
            2 => Some(Init::SeededRandom),
            _ => None,
        }
    }
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ones" => Ok(Init::Ones),
            "unit-e1" | "e1" => Ok(Init::UnitE1),
            "random" | "seeded-random" => Ok(Init::SeededRandom),
            other => Err(Error::InvalidParameter(format!("unknown init {other:?}"))),
        }
    }
}

impl std::fmt::Display for Init {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Init::Ones => "ones",
            Init::UnitE1 => "unit-e1",
            Init::SeededRandom => "seeded-random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Objective exponent, `s >= 1`.
    pub s: f64,
    /// Constraint norm.
    pub p: PNorm,
    /// Mix between the unsupervised and the label-weighted scatter, in [0, 1].
    pub gamma: f64,
    /// Number of axes.
    pub r: usize,
    /// Bound on the relative objective change between iterates.
    pub tol: f64,
    /// Bound on `max_i |w_i^{k+1} − w_i^k|`, checked together with `tol`.
    /// Infinite by default, so only the objective change decides.
    pub step_tol: f64,
    pub max_iter: usize,
    /// Shrinkage strength of the sparse L1 variant.
    pub lambda_sparsity: f64,
    pub init: Init,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            s: 2.0,
            p: PNorm::Finite(2.0),
            gamma: 0.0,
            r: 3,
            tol: 1e-10,
            step_tol: f64::INFINITY,
            max_iter: 1000,
            lambda_sparsity: 0.0,
            init: Init::Ones,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, width: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.s >= 1.0 && self.s.is_finite()) {
            return bad(format!("s = {} must be a finite value >= 1", self.s));
        }
        self.p.validate()?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} must lie in [0, 1]", self.gamma));
        }
        if self.r == 0 || self.r > width {
            return bad(format!("r = {} must lie in [1, {width}]", self.r));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be > 0", self.tol));
        }
        if !(self.step_tol > 0.0) {
            return bad(format!("step_tol = {} must be > 0", self.step_tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        if !(self.lambda_sparsity >= 0.0 && self.lambda_sparsity.is_finite()) {
            return bad(format!("lambda = {} must be >= 0", self.lambda_sparsity));
        }
        Ok(())
    }
}

/// Outcome of the iteration for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisStatus {
    pub iterations: usize,
    pub converged: bool,
    /// The ascent direction vanished, so the axis was kept where it stood.
    pub degenerate: bool,
}

/// Learned basis `W` (w × r) with per-axis objective values `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub basis: Matrix,
    pub objective: Vec<f64>,
    pub centering: Centering,
    pub relax: RelaxationVector,
    pub config: FitConfig,
    pub axes: Vec<AxisStatus>,
}

impl ProjectionModel {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn height(&self) -> usize {
        self.centering.global_mean.rows()
    }

    pub fn width(&self) -> usize {
        self.centering.global_mean.cols()
    }

    pub fn axis(&self, t: usize) -> Vec<f64> {
        self.basis.column(t)
    }

    /// The model restricted to its first `r` axes.
    pub fn truncated(&self, r: usize) -> Result<ProjectionModel> {
        if r == 0 || r > self.rank() {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {r} of {} axes",
                self.rank()
            )));
        }
        let cols: Vec<Vec<f64>> = (0..r).map(|t| self.axis(t)).collect();
        Ok(ProjectionModel {
            basis: Matrix::from_columns(&cols)?,
            objective: self.objective[..r].to_vec(),
            centering: self.centering.clone(),
            relax: self.relax.clone(),
            config: FitConfig { r, ..self.config },
            axes: self.axes[..r].to_vec(),
        })
    }

    pub fn any_unconverged(&self) -> bool {
        self.axes.iter().any(|a| !a.converged)
    }
}

/// Objective sequence `f_0, f_1, …` of each axis.
pub type FitTrace = Vec<Vec<f64>>;

/// `X_i (I − W Wᵀ)` for every sample, with `W` given by its columns.
pub fn deflate(samples: &[Matrix], axes: &[Vec<f64>]) -> Result<Vec<Matrix>> {
    if axes.is_empty() {
        return Ok(samples.to_vec());
    }
    if let Some(x) = samples.iter().find(|x| axes.iter().any(|a| a.len() != x.cols())) {
        return Err(Error::Dimension(format!(
            "samples have {} columns, axes have length {}",
            x.cols(),
            axes[0].len()
        )));
    }
    Ok(par::map(samples, |x| {
        let mut out = x.clone();
        let w = x.cols();
        for i in 0..x.rows() {
            let row = x.row(i);
            let coeffs: Vec<f64> = axes.iter().map(|a| crate::linalg::dot(row, a)).collect();
            for (a, c) in axes.iter().zip(&coeffs) {
                for j in 0..w {
                    out[(i, j)] -= c * a[j];
                }
            }
        }
        out
    }))
}

/// Per-sample objective weights.
///
/// Sample `i` of class `j` enters the criterion with weight
/// `γ + (1 − γ) · n · v_j / n_j`. At `s = 2` the criterion is then
/// `n · wᵀ(γ G + (1 − γ) G̃) w`, and without label structure (`m = 1` or all
/// singleton classes) every weight is 1.
pub fn sample_weights(ds: &LabeledDataset, relax: &RelaxationVector, gamma: f64) -> Vec<f64> {
    let n = ds.len() as f64;
    ds.labels()
        .iter()
        .map(|&j| gamma + (1.0 - gamma) * (n * relax.per_sample(j)))
        .collect()
}

/// Relaxed criterion `J(w) = Σ_i ω_i ‖X̂_i w‖_s^s` on mean-deviation samples.
pub fn objective(
    centered: &LabeledDataset,
    relax: &RelaxationVector,
    gamma: f64,
    s: f64,
    w: &[f64],
) -> Result<f64> {
    check_relax(centered, relax)?;
    if w.len() != centered.width() {
        return Err(Error::Dimension(format!(
            "axis of length {} for width {}",
            w.len(),
            centered.width()
        )));
    }
    let weights = sample_weights(centered, relax, gamma);
    Ok(weighted_objective(centered.samples(), &weights, s, w))
}

fn weighted_objective(samples: &[Matrix], weights: &[f64], s: f64, w: &[f64]) -> f64 {
    let parts = par::map_range(samples.len(), |i| {
        weights[i] * samples[i].mul_vec(w).iter().map(|&y| abs_pow(y, s)).sum::<f64>()
    });
    parts.iter().sum()
}

/// Objective value and ascent direction `Σ ω_i X̂_iᵀ(|X̂_i w|^{s−1} ∘ sign(X̂_i w))`.
fn evaluate(samples: &[Matrix], weights: &[f64], s: f64, w: &[f64]) -> (f64, Vec<f64>) {
    let parts = par::map_range(samples.len(), |i| {
        let x = &samples[i];
        let y = x.mul_vec(w);
        let value: f64 = y.iter().map(|&t| abs_pow(t, s)).sum();
        let phi: Vec<f64> = y.iter().map(|&t| abs_pow(t, s - 1.0) * sign(t)).collect();
        let grad: Vec<f64> = x.tr_mul_vec(&phi).into_iter().map(|g| weights[i] * g).collect();
        (weights[i] * value, grad)
    });
    let value = parts.iter().map(|(v, _)| v).sum();
    let mut grad = vec![0.0; w.len()];
    for (_, g) in &parts {
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    (value, grad)
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Lp(PNorm),
    Shrinkage { lambda: f64 },
}

fn normalize(u: Vec<f64>, p: PNorm) -> Option<Vec<f64>> {
    let norm = lp_norm(&u, p).ok()?;
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    Some(u.into_iter().map(|x| x / norm).collect())
}

/// Next iterate from the ascent direction `v` and current `w`. `None` when
/// the step has no direction to move in.
fn step(rule: Step, v: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    match rule {
        Step::Lp(PNorm::Infinity) => {
            let u: Vec<f64> = v.iter().map(|&x| sign(x)).collect();
            u.iter().any(|&x| x != 0.0).then_some(u)
        }
        Step::Lp(PNorm::Finite(p)) if p == 1.0 => {
            let mut best = 0;
            for (i, x) in v.iter().enumerate() {
                if x.abs() > v[best].abs() {
                    best = i;
                }
            }
            if v[best] == 0.0 {
                return None;
            }
            let mut u = vec![0.0; v.len()];
            u[best] = sign(v[best]);
            Some(u)
        }
        Step::Lp(PNorm::Finite(p)) if p < 1.0 => {
            let u = w.iter().zip(v).map(|(&wi, &vi)| abs_pow(wi, 2.0 - p) * vi).collect();
            normalize(u, PNorm::Finite(p))
        }
        Step::Lp(PNorm::Finite(p)) => {
            let q = p / (p - 1.0);
            let u = v.iter().map(|&x| abs_pow(x, q - 1.0) * sign(x)).collect();
            normalize(u, PNorm::Finite(p))
        }
        Step::Shrinkage { lambda } => {
            let u = w
                .iter()
                .zip(v)
                .map(|(&wi, &vi)| {
                    let denom = lambda + wi.abs();
                    // λ = 0 and w_i = 0: the shrink factor tends to 1
                    let factor = if denom == 0.0 { 1.0 } else { wi.abs() / denom };
                    vi * factor
                })
                .collect();
            normalize(u, PNorm::Finite(2.0))
        }
    }
}

fn initial_vector(init: Init, width: usize, p: PNorm, seed: u64, axis: usize) -> Vec<f64> {
    let raw = match init {
        Init::Ones => vec![1.0; width],
        Init::UnitE1 => {
            let mut e = vec![0.0; width];
            e[0] = 1.0;
            e
        }
        Init::SeededRandom => {
            let stream = seed ^ (axis as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let mut u: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
            if u.iter().all(|&x| x == 0.0) {
                u[0] = 1.0;
            }
            u
        }
    };
    normalize(raw, p).expect("initial vector is nonzero")
}

struct AxisResult {
    axis: Vec<f64>,
    value: f64,
    status: AxisStatus,
    history: Vec<f64>,
}

fn fit_axis(samples: &[Matrix], weights: &[f64], cfg: &FitConfig, rule: Step, t: usize) -> AxisResult {
    let width = samples[0].cols();
    let norm = match rule {
        Step::Lp(p) => p,
        Step::Shrinkage { .. } => PNorm::Finite(2.0),
    };

    let mut w = initial_vector(cfg.init, width, norm, cfg.seed, t);
    let (mut f, mut v) = evaluate(samples, weights, cfg.s, &w);
    if v.iter().all(|&x| x == 0.0) && cfg.init != Init::SeededRandom {
        let w_rand = initial_vector(Init::SeededRandom, width, norm, cfg.seed, t);
        let (f_rand, v_rand) = evaluate(samples, weights, cfg.s, &w_rand);
        if v_rand.iter().any(|&x| x != 0.0) {
            (w, f, v) = (w_rand, f_rand, v_rand);
        }
    }

    let mut history = vec![f];
    let mut status = AxisStatus {
        iterations: 0,
        converged: false,
        degenerate: false,
    };
    while status.iterations < cfg.max_iter {
        let Some(next) = step(rule, &v, &w) else {
            status.degenerate = true;
            break;
        };
        let (f_next, v_next) = evaluate(samples, weights, cfg.s, &next);
        let change = (f_next - f).abs();
        let delta = if f.abs() < 1e-300 { change } else { change / f.abs() };
        let moved = w.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w = next;
        f = f_next;
        v = v_next;
        status.iterations += 1;
        history.push(f);
        if delta <= cfg.tol && moved <= cfg.step_tol {
            status.converged = true;
            break;
        }
    }
    AxisResult {
        axis: w,
        value: f,
        status,
        history,
    }
}

fn check_relax(ds: &LabeledDataset, relax: &RelaxationVector) -> Result<()> {
    if relax.class_counts() != ds.class_counts().as_slice() {
        return Err(Error::Dimension(format!(
            "relaxation vector covers class sizes {:?}, dataset has {:?}",
            relax.class_counts(),
            ds.class_counts()
        )));
    }
    Ok(())
}

fn fit_iterative(
    train: &LabeledDataset,
    relax: &RelaxationVector,
    cfg: &FitConfig,
    rule: Step,
) -> Result<(ProjectionModel, FitTrace)> {
    cfg.validate(train.width())?;
    check_relax(train, relax)?;
    let centering = compute_centering(train);
    let centered = center(train, &centering)?;
    let weights = sample_weights(&centered, relax, cfg.gamma);

    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(cfg.r);
    let mut values = Vec::with_capacity(cfg.r);
    let mut statuses = Vec::with_capacity(cfg.r);
    let mut trace = Vec::with_capacity(cfg.r);
    let mut current = centered.samples().to_vec();
    for t in 0..cfg.r {
        let res = fit_axis(&current, &weights, cfg, rule, t);
        axes.push(res.axis);
        values.push(res.value);
        statuses.push(res.status);
        trace.push(res.history);
        if t + 1 < cfg.r {
            current = deflate(centered.samples(), &axes)?;
        }
    }

    let model = ProjectionModel {
        basis: Matrix::from_columns(&axes)?,
        objective: values,
        centering,
        relax: relax.clone(),
        config: *cfg,
        axes: statuses,
    };
    Ok((model, trace))
}

/// Relaxed 2DPCA by alternating ascent under an Lp constraint.
pub fn r2dpca_fit(train: &LabeledDataset, relax: &RelaxationVector, cfg: &FitConfig) -> Result<ProjectionModel> {
    r2dpca_fit_traced(train, relax, cfg).map(|(m, _)| m)
}

/// As [`r2dpca_fit`], also returning the per-axis objective sequences.
pub fn r2dpca_fit_traced(
    train: &LabeledDataset,
    relax: &RelaxationVector,
    cfg: &FitConfig,
) -> Result<(ProjectionModel, FitTrace)> {
    fit_iterative(train, relax, cfg, Step::Lp(cfg.p))
}

fn default_relaxation(train: &LabeledDataset) -> Result<RelaxationVector> {
    relaxation_vector(train, &compute_centering(train), RelaxFn::default())
}

/// G2DPCA: the unsupervised case `γ = 1`. The stored relaxation vector uses
/// the default relaxation function and does not influence the fit.
pub fn g2dpca_fit(train: &LabeledDataset, cfg: &FitConfig) -> Result<ProjectionModel> {
    g2dpca_fit_traced(train, cfg).map(|(m, _)| m)
}

pub fn g2dpca_fit_traced(train: &LabeledDataset, cfg: &FitConfig) -> Result<(ProjectionModel, FitTrace)> {
    let relax = default_relaxation(train)?;
    r2dpca_fit_traced(train, &relax, &FitConfig { gamma: 1.0, ..*cfg })
}

/// 2DPCA-L1 with elementwise shrinkage `u_i = v_i |w_i| / (λ + |w_i|)` under
/// a unit L2 constraint. Uses `s = 1`, `p = 2`, `γ = 1` regardless of `cfg`.
pub fn twodpca_l1s_fit(train: &LabeledDataset, cfg: &FitConfig) -> Result<ProjectionModel> {
    twodpca_l1s_fit_traced(train, cfg).map(|(m, _)| m)
}

pub fn twodpca_l1s_fit_traced(train: &LabeledDataset, cfg: &FitConfig) -> Result<(ProjectionModel, FitTrace)> {
    let cfg = FitConfig {
        s: 1.0,
        p: PNorm::Finite(2.0),
        gamma: 1.0,
        ..*cfg
    };
    let relax = default_relaxation(train)?;
    fit_iterative(
        train,
        &relax,
        &cfg,
        Step::Shrinkage {
            lambda: cfg.lambda_sparsity,
        },
    )
}

/// One shrinkage update, normalized to unit L2 norm.
pub fn l1s_update(v: &[f64], w: &[f64], lambda: f64) -> Option<Vec<f64>> {
    step(Step::Shrinkage { lambda }, v, w)
}

/// One Lp update of the unified solver.
pub fn lp_update(v: &[f64], w: &[f64], p: PNorm) -> Option<Vec<f64>> {
    step(Step::Lp(p), v, w)
}

/// `G = (1/n) Σ X̂_iᵀ X̂_i` and `G̃ = Σ_j (v_j/n_j) Σ_i X̂_iᵀ X̂_i` over the
/// class-`j` samples, both on global-mean deviations.
pub fn scatter_matrices(train: &LabeledDataset, relax: &RelaxationVector) -> Result<(Matrix, Matrix)> {
    check_relax(train, relax)?;
    let centering = compute_centering(train);
    let centered = center(train, &centering)?;
    let w = train.width();
    let n = train.len() as f64;
    let mut g = Matrix::zeros(w, w);
    let mut g_relaxed = Matrix::zeros(w, w);
    for (x, &j) in centered.samples().iter().zip(centered.labels()) {
        x.add_scaled_gram_to(1.0, &mut g);
        x.add_scaled_gram_to(relax.per_sample(j), &mut g_relaxed);
    }
    g.as_mut_slice().iter_mut().for_each(|x| *x /= n);
    Ok((g, g_relaxed))
}

/// Closed-form `s = p = 2` route: top-`r` eigenpairs of `γ G + (1 − γ) G̃`.
pub fn relaxed_2dpca_eig(
    train: &LabeledDataset,
    relax: &RelaxationVector,
    gamma: f64,
    r: usize,
) -> Result<ProjectionModel> {
    let cfg = FitConfig {
        s: 2.0,
        p: PNorm::Finite(2.0),
        gamma,
        r,
        ..FitConfig::default()
    };
    cfg.validate(train.width())?;
    let (g, g_relaxed) = scatter_matrices(train, relax)?;
    let mixed = g.scale(gamma).add(&g_relaxed.scale(1.0 - gamma))?;
    let (basis, values) = sym_eig(&mixed, r)?;
    Ok(ProjectionModel {
        basis,
        objective: values.iter().map(|&d| d.max(0.0)).collect(),
        centering: compute_centering(train),
        relax: relax.clone(),
        config: cfg,
        axes: vec![
            AxisStatus {
                iterations: 0,
                converged: true,
                degenerate: false
            };
            r
        ],
    })
}

/// Classic 2DPCA by eigendecomposition of the total scatter.
pub fn twodpca_eig(train: &LabeledDataset, r: usize) -> Result<ProjectionModel> {
    relaxed_2dpca_eig(train, &default_relaxation(train)?, 1.0, r)
}
