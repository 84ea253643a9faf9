//! Two-stage synthesis of privacy-preserving tabular data.
//!
//! Stage one replaces the input matrix with a statistics-retaining synthetic
//! sample (per-column KDE marginals, Latin hypercube strata and a Gaussian
//! copula carrying the original correlation), pairs every original record with
//! its nearest unused synthetic row and blends the two with a hybrid weight
//! `alpha`. Stage two fits kernel ridge regression on the original data and
//! uses it to regenerate noise-free responses at the blended inputs.
//!
//! The [`audit`] module measures what was given up: location-based interval
//! disclosure (LID) for privacy, total variation and moment deltas for
//! fidelity. [`experiments`] holds the simulation scenarios and the
//! end-to-end [`experiments::run_pipeline`].
//!
//! ```no_run
//! use synthforge::{Dataset, Matrix, SynthesisPlan, HybridConfig};
//! use synthforge::experiments::run_pipeline;
//!
//! # fn main() -> synthforge::Result<()> {
//! let inputs = Matrix::from_rows(&[vec![0.1, 0.4], vec![0.7, 0.2], vec![0.5, 0.9]])?;
//! let data = Dataset::new(inputs, Some(vec![1.0, 0.3, 0.8]))?;
//! let plan = SynthesisPlan { hybrid: HybridConfig::Alpha(0.5), ..SynthesisPlan::default() };
//! let out = run_pipeline(&data, &plan)?;
//! println!("LID = {:.2}%", out.privacy.lid_percent);
//! # Ok(())
//! # }
//! ```

pub mod audit;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod hybrid;
pub mod lhs;
pub mod linalg;
pub mod marginals;
pub mod normal;
pub mod plan;
pub mod quadrature;
pub mod regression;
pub mod rng;

pub use dataset::{Dataset, Matrix};
pub use error::{Error, Result};
pub use hybrid::HybridConfig;
pub use lhs::Stage1Sampler;
pub use plan::{Scaling, SynthesisPlan};
pub use regression::{CvGrid, Kernel};
