//! Within-class covariances and the per-class relaxation weights derived
//! from their principal variances.

use std::fmt;
use std::str::FromStr;

use crate::dataset::{Centering, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Matrix};
use crate::par;

/// Map from a class's principal within-class variance to its unnormalized
/// weight. Must be positive on [0, ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelaxFn {
    /// `f(x) = x + ε`
    IdentityPlusEpsilon(f64),
    /// `f(x) = exp(x)`
    Exponential,
    /// `f(x) = c`
    Constant(f64),
}

impl Default for RelaxFn {
    fn default() -> Self {
        RelaxFn::IdentityPlusEpsilon(1e-12)
    }
}

impl RelaxFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            RelaxFn::IdentityPlusEpsilon(eps) => x + eps,
            RelaxFn::Exponential => x.exp(),
            RelaxFn::Constant(c) => c,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            RelaxFn::IdentityPlusEpsilon(eps) if !(eps >= 0.0 && eps.is_finite()) => Err(
                Error::InvalidParameter(format!("relaxation epsilon {eps} must be >= 0")),
            ),
            RelaxFn::Constant(c) if !(c > 0.0 && c.is_finite()) => Err(Error::InvalidParameter(
                format!("relaxation constant {c} must be > 0"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RelaxFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelaxFn::IdentityPlusEpsilon(eps) => write!(f, "identity:{eps:e}"),
            RelaxFn::Exponential => write!(f, "exp"),
            RelaxFn::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

/// Parses `identity[:eps]`, `exp` or `constant[:c]`.
impl FromStr for RelaxFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.trim().split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let parse = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad relaxation argument {a:?}")))
        };
        let f = match (name, arg) {
            ("identity", None) => RelaxFn::default(),
            ("identity", Some(a)) => RelaxFn::IdentityPlusEpsilon(parse(a)?),
            ("exp", None) => RelaxFn::Exponential,
            ("constant", None) => RelaxFn::Constant(1.0),
            ("constant", Some(a)) => RelaxFn::Constant(parse(a)?),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown relaxation function {s:?}"
                )))
            }
        };
        f.validate()?;
        Ok(f)
    }
}

/// Per-class weights `v_j`, nonnegative and summing to one, with the class
/// sizes they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationVector {
    weights: Vec<f64>,
    class_counts: Vec<usize>,
}

impl RelaxationVector {
    pub fn new(weights: Vec<f64>, class_counts: Vec<usize>) -> Result<Self> {
        if weights.is_empty() || weights.len() != class_counts.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} classes",
                weights.len(),
                class_counts.len()
            )));
        }
        if weights.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("relaxation weights must be finite and >= 0".into()));
        }
        if class_counts.contains(&0) {
            return Err(Error::InvalidInput("empty class in relaxation vector".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("relaxation weights sum to {sum}")));
        }
        Ok(RelaxationVector {
            weights,
            class_counts,
        })
    }

    /// Uniform weights `1/m`.
    pub fn uniform(class_counts: Vec<usize>) -> Result<Self> {
        let m = class_counts.len();
        RelaxationVector::new(vec![1.0 / m as f64; m], class_counts)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    /// Weight of one sample of class `j`: `v_j / n_j`.
    pub fn per_sample(&self, j: usize) -> f64 {
        self.weights[j] / self.class_counts[j] as f64
    }
}

/// `C_j = (1/n_j) Σ_i (X_i − M_j)ᵀ (X_i − M_j)` over the samples of class `j`.
pub fn within_class_cov(ds: &LabeledDataset, c: &Centering, j: usize) -> Result<Matrix> {
    if j >= ds.num_classes() || j >= c.class_means.len() {
        return Err(Error::InvalidParameter(format!(
            "class index {j} out of range for {} classes",
            ds.num_classes()
        )));
    }
    let mean = &c.class_means[j];
    let members = ds.class_indices(j);
    let mut cov = Matrix::zeros(ds.width(), ds.width());
    for &i in &members {
        let dev = ds.samples()[i].sub(mean)?;
        dev.add_scaled_gram_to(1.0, &mut cov);
    }
    let n = members.len() as f64;
    cov.as_mut_slice().iter_mut().for_each(|x| *x /= n);
    Ok(cov)
}

/// Largest eigenvalue of each within-class covariance, clamped at zero.
pub fn class_principal_variances(ds: &LabeledDataset, c: &Centering) -> Result<Vec<f64>> {
    par::map_range(ds.num_classes(), |j| {
        let cov = within_class_cov(ds, c, j)?;
        let (_, d) = sym_eig(&cov, 1)?;
        Ok(d[0].max(0.0))
    })
    .into_iter()
    .collect()
}

/// `v_j = f(λ_max(C_j)) / Σ_i f(λ_max(C_i))`, or exactly `1/m` when every
/// class has zero within-class variance.
pub fn relaxation_vector(ds: &LabeledDataset, c: &Centering, f: RelaxFn) -> Result<RelaxationVector> {
    f.validate()?;
    let lambdas = class_principal_variances(ds, c)?;
    let counts = ds.class_counts();
    if lambdas.iter().all(|&l| l == 0.0) {
        return RelaxationVector::uniform(counts);
    }
    let raw: Vec<f64> = lambdas.iter().map(|&l| f.eval(l)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "relaxation factors sum to {total}"
        )));
    }
    RelaxationVector::new(raw.iter().map(|r| r / total).collect(), counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::compute_centering;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ds_from(rows: &[(&[f64], usize)], h: usize, w: usize, m: usize) -> LabeledDataset {
        LabeledDataset::new(
            rows.iter().map(|(d, _)| Matrix::new(h, w, d.to_vec()).unwrap()).collect(),
            rows.iter().map(|&(_, l)| l).collect(),
            (0..m).map(|j| format!("c{j}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cov_single_sample_is_zero() {
        let ds = ds_from(&[(&[1.0, 2.0, 3.0, 4.0], 0)], 2, 2, 1);
        let c = compute_centering(&ds);
        assert_eq!(within_class_cov(&ds, &c, 0).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn cov_two_samples() {
        // deviations are ±[1, 0]
        let ds = ds_from(&[(&[0.0, 0.0], 0), (&[2.0, 0.0], 0)], 1, 2, 1);
        let c = compute_centering(&ds);
        let cov = within_class_cov(&ds, &c, 0).unwrap();
        assert_eq!(cov, Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap());
    }

    #[test]
    fn cov_duplicates_unchanged() {
        let ds = ds_from(&[(&[0.0, 1.0], 0), (&[2.0, 5.0], 0)], 1, 2, 1);
        let dup = ds_from(
            &[(&[0.0, 1.0], 0), (&[2.0, 5.0], 0), (&[0.0, 1.0], 0), (&[2.0, 5.0], 0)],
            1,
            2,
            1,
        );
        let a = within_class_cov(&ds, &compute_centering(&ds), 0).unwrap();
        let b = within_class_cov(&dup, &compute_centering(&dup), 0).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-14);
        assert!(within_class_cov(&ds, &compute_centering(&ds), 1).is_err());
    }

    #[test]
    fn singleton_classes_are_uniform() {
        let ds = ds_from(&[(&[0.0, 1.0], 0), (&[3.0, 5.0], 1), (&[7.0, 2.0], 2)], 1, 2, 3);
        let v = relaxation_vector(&ds, &compute_centering(&ds), RelaxFn::default()).unwrap();
        assert_eq!(v.weights(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn direct_ratio() {
        // class 0: deviations ±[√3, 0] → λ = 3; class 1: ±[1, 0] → λ = 1
        let r3 = 3f64.sqrt();
        let ds = ds_from(
            &[(&[-r3, 0.0], 0), (&[r3, 0.0], 0), (&[-1.0, 0.0], 1), (&[1.0, 0.0], 1)],
            1,
            2,
            2,
        );
        let v = relaxation_vector(&ds, &compute_centering(&ds), RelaxFn::IdentityPlusEpsilon(0.0)).unwrap();
        assert_abs_diff_eq!(v.weights()[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(v.weights()[1], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(v.per_sample(0), 0.375, epsilon = 1e-14);
    }

    #[test]
    fn near_degenerate_class() {
        // λ_max 1 and 0 with ε = 1e-8: v = (1 + ε, ε) / (1 + 2ε)
        let ds = ds_from(&[(&[0.0, 0.0], 0), (&[2.0, 0.0], 0), (&[4.0, 4.0], 1)], 1, 2, 2);
        let eps = 1e-8;
        let v = relaxation_vector(&ds, &compute_centering(&ds), RelaxFn::IdentityPlusEpsilon(eps)).unwrap();
        assert_abs_diff_eq!(v.weights()[0], (1.0 + eps) / (1.0 + 2.0 * eps), epsilon = 1e-15);
        assert_abs_diff_eq!(v.weights()[1], eps / (1.0 + 2.0 * eps), epsilon = 1e-15);
    }

    #[test]
    fn relax_fn_parsing() {
        assert_eq!("identity".parse::<RelaxFn>().unwrap(), RelaxFn::IdentityPlusEpsilon(1e-12));
        assert_eq!("identity:0.5".parse::<RelaxFn>().unwrap(), RelaxFn::IdentityPlusEpsilon(0.5));
        assert_eq!("exp".parse::<RelaxFn>().unwrap(), RelaxFn::Exponential);
        assert_eq!("constant:2".parse::<RelaxFn>().unwrap(), RelaxFn::Constant(2.0));
        assert!("constant:0".parse::<RelaxFn>().is_err());
        assert!("sigmoid".parse::<RelaxFn>().is_err());
        for f in [RelaxFn::default(), RelaxFn::Exponential, RelaxFn::Constant(3.0)] {
            assert_eq!(f.to_string().parse::<RelaxFn>().unwrap(), f);
        }
    }

    fn random_dataset() -> impl Strategy<Value = LabeledDataset> {
        (1usize..5, 1usize..4).prop_flat_map(|(m, per)| {
            prop::collection::vec(-2.0f64..2.0, m * per * 6).prop_map(move |vals| {
                let samples = vals.chunks(6).map(|c| Matrix::new(2, 3, c.to_vec()).unwrap()).collect();
                let labels = (0..m * per).map(|i| i / per).collect();
                LabeledDataset::new(samples, labels, (0..m).map(|j| j.to_string()).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn weights_form_a_distribution(ds in random_dataset(), which in 0usize..3) {
            let f = [RelaxFn::default(), RelaxFn::Exponential, RelaxFn::Constant(2.0)][which];
            let v = relaxation_vector(&ds, &compute_centering(&ds), f).unwrap();
            prop_assert!((v.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(v.weights().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn class_permutation_permutes_weights(ds in random_dataset()) {
            let m = ds.num_classes();
            let perm: Vec<usize> = (0..m).rev().collect();
            let labels = ds.labels().iter().map(|&l| perm[l]).collect();
            let permuted = ds.relabeled(labels).unwrap();
            let v = relaxation_vector(&ds, &compute_centering(&ds), RelaxFn::default()).unwrap();
            let w = relaxation_vector(&permuted, &compute_centering(&permuted), RelaxFn::default()).unwrap();
            for j in 0..m {
                prop_assert!((v.weights()[j] - w.weights()[perm[j]]).abs() <= 1e-12);
            }
        }

        #[test]
        fn scale_invariant_under_identity(ds in random_dataset(), alpha in 0.1f64..10.0) {
            let scaled = ds.map_samples(|x| x.scale(alpha)).unwrap();
            let f = RelaxFn::IdentityPlusEpsilon(0.0);
            let c = compute_centering(&ds);
            if class_principal_variances(&ds, &c).unwrap().iter().any(|&l| l > 1e-6) {
                let v = relaxation_vector(&ds, &c, f).unwrap();
                let w = relaxation_vector(&scaled, &compute_centering(&scaled), f).unwrap();
                for (a, b) in v.weights().iter().zip(w.weights()) {
                    prop_assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }
}
