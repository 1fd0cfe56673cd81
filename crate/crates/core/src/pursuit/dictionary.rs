use crate::error::{Error, Result};
use crate::labeldist::ClassDistribution;
use crate::numcore::{l2_normalize_columns, Matrix};

pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// A dictionary of unit-norm atoms stored as the columns of an `n x K` matrix,
/// optionally carrying `P(L | atom)` and an atom prior.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    atoms: Matrix,
    by_atom: Vec<f64>,
    class_dist: Option<Vec<ClassDistribution>>,
    atom_prior: Option<Vec<f64>>,
}

impl Dictionary {
    /// Wraps `atoms`, rejecting any column whose norm is not 1.
    pub fn new(atoms: Matrix) -> Result<Self> {
        let by_atom = atoms.transpose().as_slice().to_vec();
        let n = atoms.rows();
        for (k, a) in by_atom.chunks(n).enumerate() {
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::NotNormalized { atom: k, norm });
            }
        }
        Ok(Self {
            atoms,
            by_atom,
            class_dist: None,
            atom_prior: None,
        })
    }

    /// Normalizes every column first; zero columns are an error.
    pub fn normalized(atoms: &Matrix) -> Result<Self> {
        let n = l2_normalize_columns(atoms);
        if let Some(&k) = n.zero_columns.first() {
            return Err(Error::NotNormalized { atom: k, norm: 0.0 });
        }
        Self::new(n.matrix)
    }

    pub fn from_atoms(atoms: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_columns(atoms)?)
    }

    pub fn with_class_dist(mut self, dists: Vec<ClassDistribution>) -> Result<Self> {
        if dists.len() != self.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} class distributions for {} atoms",
                dists.len(),
                self.size()
            )));
        }
        if dists.windows(2).any(|w| w[0].classes() != w[1].classes()) {
            return Err(Error::invalid("class distributions disagree on the class count"));
        }
        self.class_dist = Some(dists);
        Ok(self)
    }

    pub fn with_atom_prior(mut self, prior: Vec<f64>) -> Result<Self> {
        if prior.len() != self.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} prior weights for {} atoms",
                prior.len(),
                self.size()
            )));
        }
        let sum: f64 = prior.iter().sum();
        if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "atom prior must be non-negative and sum to 1 (sum {sum})"
            )));
        }
        self.atom_prior = Some(prior);
        Ok(self)
    }

    /// Feature dimension `n`.
    pub fn dim(&self) -> usize {
        self.atoms.rows()
    }

    /// Number of atoms `K`.
    pub fn size(&self) -> usize {
        self.atoms.cols()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        let n = self.dim();
        &self.by_atom[k * n..(k + 1) * n]
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn atom_vectors(&self) -> Vec<Vec<f64>> {
        self.by_atom.chunks(self.dim()).map(<[f64]>::to_vec).collect()
    }

    pub fn class_dist(&self) -> Option<&[ClassDistribution]> {
        self.class_dist.as_deref()
    }

    pub fn atom_prior(&self) -> Option<&[f64]> {
        self.atom_prior.as_deref()
    }

    /// Dictionary made of the atoms at `indices`, in that order. Class
    /// distributions follow their atoms; the prior is dropped.
    pub fn subset(&self, indices: &[usize]) -> Result<Dictionary> {
        let cols: Vec<Vec<f64>> = indices.iter().map(|&k| self.atom(k).to_vec()).collect();
        let d = Dictionary::from_atoms(&cols)?;
        match &self.class_dist {
            Some(cd) => d.with_class_dist(indices.iter().map(|&k| cd[k].clone()).collect()),
            None => Ok(d),
        }
    }
}
