//! Sparse coding over a fixed dictionary (orthogonal matching pursuit) and
//! K-SVD training of the initial over-complete dictionary.

mod codes;
mod dictionary;
mod ksvd;
mod omp;

pub use codes::SparseCodeTable;
pub use dictionary::{Dictionary, UNIT_NORM_TOLERANCE};
pub use ksvd::{ksvd_train, KsvdConfig, KsvdModel};
pub use omp::{omp_encode, omp_signal};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// `||Y - D X||_F / sqrt(n N)`.
pub fn reconstruction_rmse(dict: &Dictionary, codes: &SparseCodeTable, y: &Matrix) -> Result<f64> {
    if y.rows() != dict.dim() || y.cols() != codes.signal_count() || codes.atom_count() != dict.size() {
        return Err(Error::DimensionMismatch(format!(
            "signals {}x{}, dictionary {}x{}, codes {}x{}",
            y.rows(),
            y.cols(),
            dict.dim(),
            dict.size(),
            codes.atom_count(),
            codes.signal_count()
        )));
    }
    let mut total = 0.0;
    for j in 0..y.cols() {
        let mut r = y.column(j);
        for &(k, x) in codes.signal(j) {
            for (ri, di) in r.iter_mut().zip(dict.atom(k)) {
                *ri -= x * di;
            }
        }
        total += r.iter().map(|v| v * v).sum::<f64>();
    }
    Ok((total / (y.rows() * y.cols()) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_hand_cases() {
        let y = Matrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        let d = Dictionary::new(Matrix::new(2, 1, vec![0.0, 1.0]).unwrap()).unwrap();
        let empty = SparseCodeTable::new(1, 1, vec![vec![]]).unwrap();
        let r = reconstruction_rmse(&d, &empty, &y).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-15);

        let d = Dictionary::new(Matrix::new(2, 1, vec![1.0, 0.0]).unwrap()).unwrap();
        let exact = SparseCodeTable::new(1, 1, vec![vec![(0, 1.0)]]).unwrap();
        assert_eq!(reconstruction_rmse(&d, &exact, &y).unwrap(), 0.0);
    }

    #[test]
    fn rmse_of_empty_codes_is_signal_energy() {
        let y = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = Dictionary::new(Matrix::new(2, 1, vec![1.0, 0.0]).unwrap()).unwrap();
        let empty = SparseCodeTable::new(1, 1, vec![vec![], vec![]]).unwrap();
        let r = reconstruction_rmse(&d, &empty, &y).unwrap();
        assert!((r - y.frobenius() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rmse_shape_mismatch() {
        let y = Matrix::new(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let d = Dictionary::new(Matrix::new(2, 1, vec![1.0, 0.0]).unwrap()).unwrap();
        let codes = SparseCodeTable::new(1, 1, vec![vec![]]).unwrap();
        assert!(reconstruction_rmse(&d, &codes, &y).is_err());
    }
}
