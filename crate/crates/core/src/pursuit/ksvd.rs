use rand::Rng;

use super::{omp_signal, Dictionary, SparseCodeTable};
use crate::error::{Error, Result};
use crate::numcore::{dot, Matrix};
use crate::par;

const POWER_MAX_STEPS: usize = 200;
const POWER_REL_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct KsvdConfig {
    /// Dictionary size `K`.
    pub atoms: usize,
    /// Sparsity bound `T`.
    pub sparsity: usize,
    /// Maximum number of coding/update rounds.
    pub iters: usize,
    /// Stop once an iteration improves the RMSE by less than this.
    pub min_improvement: f64,
}

impl KsvdConfig {
    pub fn new(atoms: usize, sparsity: usize) -> Self {
        Self {
            atoms,
            sparsity,
            iters: 20,
            min_improvement: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KsvdModel {
    pub dictionary: Dictionary,
    pub codes: SparseCodeTable,
    /// RMSE `||Y - DX||_F / sqrt(nN)` after each iteration.
    pub error_history: Vec<f64>,
}

/// Learns a `K`-atom dictionary for the columns of `y` by alternating
/// orthogonal matching pursuit with per-atom rank-1 updates.
///
/// Each atom update replaces the atom and its coefficients with the dominant
/// singular pair of the residual restricted to the signals that use it. The
/// singular pair is found by power iteration started from the current atom,
/// which never lowers the captured energy, so an update can only reduce the
/// error. An iteration that nevertheless ends with a higher error than the
/// previous one (re-coding is greedy, so it can do worse) is redone with every
/// signal keeping the better of its new and previous codes. This makes the
/// error history non-increasing.
pub fn ksvd_train<R: Rng + ?Sized>(y: &Matrix, cfg: &KsvdConfig, rng: &mut R) -> Result<KsvdModel> {
    let (n, signals) = (y.rows(), y.cols());
    if cfg.iters == 0 {
        return Err(Error::invalid("K-SVD needs at least one iteration"));
    }
    if cfg.atoms == 0 || cfg.atoms > signals {
        return Err(Error::OverComplete {
            atoms: cfg.atoms,
            signals,
        });
    }
    if cfg.sparsity == 0 || cfg.sparsity > cfg.atoms || cfg.sparsity > n {
        return Err(Error::invalid(format!(
            "sparsity {} must be in 1..=min(K={}, n={n})",
            cfg.sparsity, cfg.atoms
        )));
    }
    let columns = y.columns();
    let usable: Vec<usize> = (0..signals).filter(|&j| dot(&columns[j], &columns[j]) > 0.0).collect();
    if cfg.atoms > usable.len() {
        return Err(Error::OverComplete {
            atoms: cfg.atoms,
            signals: usable.len(),
        });
    }
    let mut atoms: Vec<Vec<f64>> = rand::seq::index::sample(rng, usable.len(), cfg.atoms)
        .into_iter()
        .map(|i| unit(&columns[usable[i]]))
        .collect();

    let mut codes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); signals];
    let mut residuals: Vec<Vec<f64>> = columns.clone();
    let mut history = Vec::with_capacity(cfg.iters);

    for iter in 0..cfg.iters {
        let dict = Dictionary::from_atoms(&atoms)?;
        let fresh = par::map_slice(&columns, |s| {
            let code = omp_signal(&dict, s, cfg.sparsity);
            let r = residual_of(&dict, s, &code);
            (code, r)
        });
        let mut state = State {
            atoms: atoms.clone(),
            codes: codes.clone(),
            residuals: residuals.clone(),
        };
        state.recode(&fresh, false);
        state.update(&columns);
        let mut sq = state.error();
        // Plain K-SVD is used whenever its iteration does not raise the
        // error. Otherwise the iteration is redone with each signal keeping
        // the better of its new and previous codes, which cannot raise it.
        if iter > 0 && sq > residuals.iter().map(|r| dot(r, r)).sum::<f64>() {
            state = State {
                atoms,
                codes,
                residuals,
            };
            state.recode(&fresh, true);
            state.update(&columns);
            sq = state.error();
        }
        State {
            atoms,
            codes,
            residuals,
        } = state;

        let rmse = (sq / (n * signals) as f64).sqrt();
        let improvement = history.last().map(|prev: &f64| prev - rmse);
        history.push(rmse);
        if improvement.is_some_and(|d| d < cfg.min_improvement) {
            break;
        }
    }

    for code in &mut codes {
        code.retain(|&(_, x)| x != 0.0);
    }
    Ok(KsvdModel {
        dictionary: Dictionary::from_atoms(&atoms)?,
        codes: SparseCodeTable::new(cfg.atoms, cfg.sparsity, codes)?,
        error_history: history,
    })
}

/// A signal's new code and the residual it leaves.
type Coded = (Vec<(usize, f64)>, Vec<f64>);

struct State {
    atoms: Vec<Vec<f64>>,
    codes: Vec<Vec<(usize, f64)>>,
    residuals: Vec<Vec<f64>>,
}

impl State {
    fn recode(&mut self, fresh: &[Coded], keep_better: bool) {
        for (j, (code, r)) in fresh.iter().enumerate() {
            if !keep_better || dot(r, r) <= dot(&self.residuals[j], &self.residuals[j]) {
                self.codes[j] = code.clone();
                self.residuals[j] = r.clone();
            }
        }
    }

    /// Refits every used atom; unused atoms restart from the worst-fit signals.
    fn update(&mut self, columns: &[Vec<f64>]) {
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.atoms.len()];
        for (j, code) in self.codes.iter().enumerate() {
            for (slot, &(k, _)) in code.iter().enumerate() {
                users[k].push((j, slot));
            }
        }
        let mut replaced = vec![false; columns.len()];
        for (k, users) in users.iter().enumerate() {
            if users.is_empty() {
                if let Some(j) = worst_signal(&self.residuals, &replaced) {
                    replaced[j] = true;
                    self.atoms[k] = unit(&columns[j]);
                }
                continue;
            }
            update_atom(&mut self.atoms[k], users, &mut self.codes, &mut self.residuals);
        }
    }

    fn error(&self) -> f64 {
        self.residuals.iter().map(|r| dot(r, r)).sum()
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = dot(v, v).sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn residual_of(dict: &Dictionary, signal: &[f64], code: &[(usize, f64)]) -> Vec<f64> {
    let mut r = signal.to_vec();
    for &(k, x) in code {
        for (ri, di) in r.iter_mut().zip(dict.atom(k)) {
            *ri -= x * di;
        }
    }
    r
}

/// Signal with the largest residual not yet used for a replacement.
fn worst_signal(residuals: &[Vec<f64>], taken: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, r) in residuals.iter().enumerate() {
        let e = dot(r, r);
        if taken[j] || e <= 0.0 {
            continue;
        }
        if best.is_none_or(|(_, b)| e > b) {
            best = Some((j, e));
        }
    }
    best.map(|(j, _)| j)
}

/// Rank-1 refit of atom `k` on the signals that use it.
fn update_atom(
    atom: &mut Vec<f64>,
    users: &[(usize, usize)],
    codes: &mut [Vec<(usize, f64)>],
    residuals: &mut [Vec<f64>],
) {
    // E: residual with atom k's own contribution added back, one column per user.
    let e: Vec<Vec<f64>> = users
        .iter()
        .map(|&(j, slot)| {
            let x = codes[j][slot].1;
            residuals[j].iter().zip(atom.iter()).map(|(r, d)| r + x * d).collect()
        })
        .collect();

    let project = |u: &[f64]| -> Vec<f64> { e.iter().map(|col| dot(col, u)).collect() };
    let mut u = atom.clone();
    let mut v = project(&u);
    let mut energy = dot(&v, &v);
    for _ in 0..POWER_MAX_STEPS {
        let mut w = vec![0.0; u.len()];
        for (col, &vj) in e.iter().zip(&v) {
            for (wi, ci) in w.iter_mut().zip(col) {
                *wi += vj * ci;
            }
        }
        let wn = dot(&w, &w).sqrt();
        if wn == 0.0 {
            break;
        }
        let u_next: Vec<f64> = w.iter().map(|x| x / wn).collect();
        let v_next = project(&u_next);
        let next_energy = dot(&v_next, &v_next);
        if next_energy < energy {
            break;
        }
        let gain = next_energy - energy;
        u = u_next;
        v = v_next;
        energy = next_energy;
        if gain <= POWER_REL_TOL * energy {
            break;
        }
    }

    for ((&(j, slot), col), &vj) in users.iter().zip(&e).zip(&v) {
        codes[j][slot].1 = vj;
        for ((r, c), ui) in residuals[j].iter_mut().zip(col).zip(&u) {
            *r = c - vj * ui;
        }
    }
    *atom = u;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng_from_seed;
    use crate::pursuit::reconstruction_rmse;
    use crate::synth;

    #[test]
    fn orthonormal_atoms_are_a_fixed_point() {
        let basis: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let cols: Vec<Vec<f64>> = (0..20)
            .map(|j| basis[j % 4].iter().map(|v| v * (1.0 + j as f64)).collect())
            .collect();
        let y = Matrix::from_columns(&cols).unwrap();
        let model = ksvd_train(&y, &KsvdConfig::new(4, 1), &mut rng_from_seed(1)).unwrap();
        assert!(*model.error_history.last().unwrap() < 1e-8);
    }

    #[test]
    fn history_is_monotone_and_matches_reconstruction() {
        let mut rng = rng_from_seed(11);
        let data = synth::sparse_signals(16, 120, 24, 3, 0.01, &mut rng);
        let mut cfg = KsvdConfig::new(24, 3);
        cfg.iters = 10;
        cfg.min_improvement = 0.0;
        let model = ksvd_train(&data.signals, &cfg, &mut rng).unwrap();
        assert_eq!(model.error_history.len(), 10);
        for w in model.error_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{w:?}");
        }
        let direct = reconstruction_rmse(&model.dictionary, &model.codes, &data.signals).unwrap();
        assert!((direct - model.error_history.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_dictionary() {
        let data = synth::sparse_signals(8, 60, 12, 2, 0.0, &mut rng_from_seed(5));
        let cfg = KsvdConfig::new(12, 2);
        let a = ksvd_train(&data.signals, &cfg, &mut rng_from_seed(9)).unwrap();
        let b = ksvd_train(&data.signals, &cfg, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a.dictionary, b.dictionary);
        assert_eq!(a.error_history, b.error_history);
    }

    #[test]
    fn too_many_atoms() {
        let y = Matrix::new(2, 3, vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let r = ksvd_train(&y, &KsvdConfig::new(4, 1), &mut rng_from_seed(0));
        assert!(matches!(r, Err(Error::OverComplete { .. })));
        let r = ksvd_train(
            &y,
            &KsvdConfig {
                iters: 0,
                ..KsvdConfig::new(2, 1)
            },
            &mut rng_from_seed(0),
        );
        assert!(r.is_err());
    }
}
