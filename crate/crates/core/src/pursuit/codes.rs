use crate::error::{Error, Result};

/// Sparse coefficients `X`: for each signal, the `(atom, coefficient)` pairs
/// of its decomposition, sorted by atom.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCodeTable {
    atoms: usize,
    sparsity: usize,
    signals: Vec<Vec<(usize, f64)>>,
}

impl SparseCodeTable {
    pub fn new(atoms: usize, sparsity: usize, mut signals: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (j, s) in signals.iter_mut().enumerate() {
            if s.len() > sparsity {
                return Err(Error::invalid(format!(
                    "signal {j} uses {} atoms, sparsity bound is {sparsity}",
                    s.len()
                )));
            }
            s.sort_by_key(|&(k, _)| k);
            if let Some(&(k, _)) = s.iter().find(|(k, _)| *k >= atoms) {
                return Err(Error::invalid(format!("signal {j} references atom {k} of {atoms}")));
            }
            if s.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid(format!("signal {j} repeats an atom")));
            }
            if s.iter().any(|(_, x)| !x.is_finite()) {
                return Err(Error::invalid(format!("signal {j} has a non-finite coefficient")));
            }
        }
        Ok(Self {
            atoms,
            sparsity,
            signals,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atoms
    }

    pub fn signal_count(&self) -> usize {
        self.signals.len()
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn signal(&self, j: usize) -> &[(usize, f64)] {
        &self.signals[j]
    }

    pub fn signals(&self) -> &[Vec<(usize, f64)>] {
        &self.signals
    }

    /// Dense code vector of signal `j` (length `K`).
    pub fn dense_signal(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.atoms];
        for &(k, x) in &self.signals[j] {
            v[k] = x;
        }
        v
    }

    /// Per-atom observation rows: for atom `i`, the `(signal, coefficient)`
    /// pairs where it is used.
    pub fn atom_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.atoms];
        for (j, s) in self.signals.iter().enumerate() {
            for &(k, x) in s {
                rows[k].push((j, x));
            }
        }
        rows
    }

    /// Total `|x|` carried by each atom.
    pub fn atom_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.atoms];
        for s in &self.signals {
            for &(k, x) in s {
                mass[k] += x.abs();
            }
        }
        mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_sorted_and_validated() {
        let t = SparseCodeTable::new(3, 2, vec![vec![(2, 1.0), (0, -1.0)], vec![]]).unwrap();
        assert_eq!(t.signal(0), &[(0, -1.0), (2, 1.0)]);
        assert_eq!(t.dense_signal(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(t.atom_rows()[2], vec![(0, 1.0)]);
        assert_eq!(t.atom_mass(), vec![1.0, 0.0, 1.0]);

        assert!(SparseCodeTable::new(3, 1, vec![vec![(0, 1.0), (1, 1.0)]]).is_err());
        assert!(SparseCodeTable::new(3, 2, vec![vec![(3, 1.0)]]).is_err());
        assert!(SparseCodeTable::new(3, 2, vec![vec![(1, 1.0), (1, 2.0)]]).is_err());
    }
}
