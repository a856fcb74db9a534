//! Relaxed two-dimensional PCA.
//!
//! Learns projection axes for image matrices by maximizing a label-weighted
//! Lp-norm scatter criterion, classifies by nearest neighbor under a
//! column-weighted distance between feature images, and searches the
//! `(s, p)` norm grid for the best recognition rate.
//!
//! ```
//! use r2dpca::dataset::{compute_centering, split_per_class, synth_generate, SynthSpec};
//! use r2dpca::projector::{r2dpca_fit, FitConfig};
//! use r2dpca::relaxation::{relaxation_vector, RelaxFn};
//! use r2dpca::classifier::{accuracy, Gallery};
//!
//! let spec = SynthSpec { classes: 3, per_class: 8, height: 6, width: 5, noise_sigma: 0.05 };
//! let data = synth_generate(&spec, 7).unwrap();
//! let (train, test) = split_per_class(&data, 4, 11).unwrap();
//! let relax = relaxation_vector(&train, &compute_centering(&train), RelaxFn::default()).unwrap();
//! let model = r2dpca_fit(&train, &relax, &FitConfig { r: 2, ..FitConfig::default() }).unwrap();
//! let gallery = Gallery::build(&train, &model).unwrap();
//! let acc = accuracy(&gallery, &test, &model).unwrap();
//! assert!((0.0..=1.0).contains(&acc));
//! ```

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod hypersearch;
pub mod linalg;
pub mod par;
pub mod projector;
pub mod relaxation;

pub use error::{Error, Result};
pub use linalg::{Matrix, PNorm};
