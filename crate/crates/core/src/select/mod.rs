//! Dictionary compression: greedy entropy (ME) and mutual-information
//! (MMI-1, MMI-2) selection over the atom kernel, class-distribution merging
//! (MMI-3), and the k-means baseline.

mod greedy;
mod kmeans;
mod mmi3;

pub use greedy::{estimate_lambda, select_me, select_mmi1, select_mmi2};
pub use kmeans::select_kmeans;
pub use mmi3::{atom_priors, merge_loss, select_mmi3, Merge, Mmi3Output, PriorMode};

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Me,
    Mmi1,
    Mmi2,
    Mmi3,
    Kmeans,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Me => "me",
            Method::Mmi1 => "mmi1",
            Method::Mmi2 => "mmi2",
            Method::Mmi3 => "mmi3",
            Method::Kmeans => "kmeans",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "me" => Method::Me,
            "mmi1" => Method::Mmi1,
            "mmi2" => Method::Mmi2,
            "mmi3" => Method::Mmi3,
            "kmeans" => Method::Kmeans,
            other => return Err(Error::invalid(format!("unknown method {other:?}"))),
        })
    }
}

/// How greedy steps evaluate conditional variances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Evaluation {
    /// Restrict every conditioning set to the candidate's support component
    /// and treat sub-threshold covariances as zero.
    #[default]
    Sparse,
    /// Use the full kernel.
    Dense,
}

/// Ordered atoms picked by a selection run and what each step scored.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionTrace {
    pub method: Method,
    pub atoms: Vec<usize>,
    /// Value of the maximized step objective.
    pub objective: Vec<f64>,
    /// `H(d* | D*)` at each step (greedy methods only).
    pub diversity: Vec<f64>,
    /// `-H(d* | D-bar*)` at each step (MMI-1/MMI-2 only).
    pub coverage: Vec<f64>,
    pub lambda: Option<f64>,
    pub seconds: Vec<f64>,
}

impl SelectionTrace {
    pub(crate) fn new(method: Method) -> Self {
        Self {
            method,
            atoms: Vec::new(),
            objective: Vec::new(),
            diversity: Vec::new(),
            coverage: Vec::new(),
            lambda: None,
            seconds: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}
