//! Sparse dictionary learning with information-maximizing compression.
//!
//! The pipeline learns an over-complete dictionary with K-SVD, models the
//! atoms as a Gaussian process whose covariance comes from their sparse
//! coefficients, and compresses the dictionary greedily (ME, MMI-1, MMI-2),
//! by class-distribution merging (MMI-3) or by k-means. Compressed
//! dictionaries feed sequence recognition (DTW or code histograms with
//! k-NN), and the same greedy machinery summarizes a sequence by picking
//! diverse, representative frames.
//!
//! Data-parallel inner loops (per-signal coding, per-candidate scoring,
//! pairwise distances) run on rayon when the `parallel` feature is enabled
//! and fall back to plain iterators otherwise. Results never depend on the
//! schedule.

pub mod error;
pub mod gp;
pub mod io;
pub mod labeldist;
pub mod numcore;
pub mod par;
pub mod pursuit;
pub mod recognize;
pub mod select;
pub mod summarize;
pub mod synth;

pub use error::{Error, Result};
pub use gp::{KernelMatrix, KernelParams};
pub use labeldist::{Aggregation, ClassDistribution};
pub use numcore::{FeatureDataset, Flattened, Matrix, Sequence};
pub use pursuit::{Dictionary, SparseCodeTable};
pub use select::{Evaluation, SelectionTrace};
