use super::{Dictionary, SparseCodeTable};
use crate::error::{Error, Result};
use crate::numcore::{dot, linalg, Matrix};
use crate::par;

/// Residual norm below which pursuit stops.
const RESIDUAL_FLOOR: f64 = 1e-10;
/// Squared pivot below which a candidate atom is treated as linearly
/// dependent on the current support and skipped.
const PIVOT_FLOOR: f64 = 1e-12;

/// Encodes every column of `y` with at most `sparsity` atoms.
pub fn omp_encode(dict: &Dictionary, y: &Matrix, sparsity: usize) -> Result<SparseCodeTable> {
    check_args(dict, y.rows(), sparsity)?;
    let columns = y.columns();
    let codes = par::map_slice(&columns, |s| omp_signal(dict, s, sparsity));
    SparseCodeTable::new(dict.size(), sparsity, codes)
}

fn check_args(dict: &Dictionary, rows: usize, sparsity: usize) -> Result<()> {
    if rows != dict.dim() {
        return Err(Error::DimensionMismatch(format!(
            "signals have dimension {rows}, dictionary atoms {}",
            dict.dim()
        )));
    }
    if sparsity == 0 || sparsity > dict.size() || sparsity > dict.dim() {
        return Err(Error::invalid(format!(
            "sparsity {sparsity} must be in 1..=min(K={}, n={})",
            dict.size(),
            dict.dim()
        )));
    }
    Ok(())
}

/// Orthogonal matching pursuit for one signal.
///
/// Each step adds the atom most correlated with the residual (lowest index on
/// ties) and re-solves least squares on the whole support, so the residual
/// stays orthogonal to every selected atom. Returns pairs sorted by atom.
pub fn omp_signal(dict: &Dictionary, signal: &[f64], sparsity: usize) -> Vec<(usize, f64)> {
    let k_atoms = dict.size();
    let mut residual = signal.to_vec();
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut blocked = vec![false; k_atoms];
    // Cholesky factor of the support Gram matrix, grown one row per step.
    let mut chol: Vec<f64> = Vec::new();
    let mut coefs: Vec<f64> = Vec::new();
    let rhs_all: Vec<f64> = (0..k_atoms).map(|k| dot(dict.atom(k), signal)).collect();

    while support.len() < sparsity && dot(&residual, &residual).sqrt() >= RESIDUAL_FLOOR {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..k_atoms {
            if blocked[k] {
                continue;
            }
            let c = dot(dict.atom(k), &residual).abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((k, c));
            }
        }
        let Some((k, c)) = best else { break };
        if c == 0.0 {
            break;
        }
        blocked[k] = true;

        let m = support.len();
        let g: Vec<f64> = support.iter().map(|&s| dot(dict.atom(s), dict.atom(k))).collect();
        let w = linalg::solve_lower(&chol, m, &g);
        let pivot = dot(dict.atom(k), dict.atom(k)) - dot(&w, &w);
        if pivot <= PIVOT_FLOOR {
            continue;
        }
        let mut grown = vec![0.0; (m + 1) * (m + 1)];
        for i in 0..m {
            grown[i * (m + 1)..i * (m + 1) + m].copy_from_slice(&chol[i * m..(i + 1) * m]);
        }
        grown[m * (m + 1)..m * (m + 1) + m].copy_from_slice(&w);
        grown[m * (m + 1) + m] = pivot.sqrt();
        chol = grown;
        support.push(k);

        let rhs: Vec<f64> = support.iter().map(|&s| rhs_all[s]).collect();
        coefs = linalg::cholesky_solve(&chol, support.len(), &rhs);
        residual.copy_from_slice(signal);
        for (&s, &x) in support.iter().zip(&coefs) {
            for (r, d) in residual.iter_mut().zip(dict.atom(s)) {
                *r -= x * d;
            }
        }
    }

    let mut out: Vec<(usize, f64)> = support.into_iter().zip(coefs).collect();
    out.sort_by_key(|&(k, _)| k);
    out
}
