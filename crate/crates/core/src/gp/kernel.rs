use super::{entropy_from_variance, VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::numcore::{linalg, Matrix};
use crate::pursuit::SparseCodeTable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    /// Entries with `|K(i,j)| < threshold` are dropped from the sparse index.
    pub threshold: f64,
    /// Added to every diagonal entry.
    pub jitter: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            threshold: 1e-6,
            jitter: 1e-8,
        }
    }
}

/// Symmetric covariance over atoms, stored full, with a thresholded sparse
/// index and the connected components of that index.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    size: usize,
    values: Vec<f64>,
    params: KernelParams,
    neighbors: Vec<Vec<usize>>,
    component_of: Vec<usize>,
    components: Vec<Vec<usize>>,
}

impl KernelMatrix {
    /// Builds a kernel from a full `size x size` row-major matrix. The matrix
    /// must be symmetric with a non-negative diagonal; jitter is added here.
    pub fn from_dense(mut values: Vec<f64>, size: usize, params: KernelParams) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {size}x{size} kernel",
                values.len()
            )));
        }
        if !(params.threshold >= 0.0 && params.jitter >= 0.0) {
            return Err(Error::invalid("threshold and jitter must be non-negative"));
        }
        for i in 0..size {
            if !(values[i * size + i] >= 0.0) {
                return Err(Error::invalid(format!("kernel diagonal {i} is negative")));
            }
            for j in 0..i {
                let (a, b) = (values[i * size + j], values[j * size + i]);
                if a != b || !a.is_finite() {
                    return Err(Error::invalid(format!("kernel entry ({i},{j}) is not symmetric")));
                }
            }
            values[i * size + i] += params.jitter;
        }
        let neighbors: Vec<Vec<usize>> = (0..size)
            .map(|i| {
                (0..size)
                    .filter(|&j| j == i || values[i * size + j].abs() >= params.threshold)
                    .collect()
            })
            .collect();
        let (component_of, components) = connected_components(&neighbors);
        Ok(Self {
            size,
            values,
            params,
            neighbors,
            component_of,
            components,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Entry as seen by sparse evaluation: sub-threshold off-diagonals read as 0.
    pub fn sparse_get(&self, i: usize, j: usize) -> f64 {
        let v = self.get(i, j);
        if i == j || v.abs() >= self.params.threshold {
            v
        } else {
            0.0
        }
    }

    /// Full row-major matrix including jitter.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Atoms whose covariance with `target` clears the threshold (the target
    /// itself included).
    pub fn sparse_support_neighbors(&self, target: usize) -> &[usize] {
        &self.neighbors[target]
    }

    /// The connected component of `target` in the thresholded neighbor graph.
    /// Conditioning on atoms outside it is a no-op once sub-threshold entries
    /// are zeroed.
    pub fn support_component(&self, target: usize) -> &[usize] {
        &self.components[self.component_of[target]]
    }

    pub fn component_id(&self, atom: usize) -> usize {
        self.component_of[atom]
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Fraction of off-diagonal entries below the threshold.
    pub fn sparsity(&self) -> f64 {
        if self.size < 2 {
            return 0.0;
        }
        let kept: usize = self.neighbors.iter().map(|n| n.len() - 1).sum();
        1.0 - kept as f64 / (self.size * (self.size - 1)) as f64
    }

    /// `V(target | cond)` from the dense kernel, via Cholesky of the
    /// conditioning block, clamped below at [`VARIANCE_FLOOR`].
    pub fn conditional_variance(&self, target: usize, cond: &[usize]) -> Result<f64> {
        self.check_query(target, cond)?;
        schur(|i, j| self.get(i, j), target, cond)
    }

    /// `V(target | cond)` using only the target's support component with
    /// sub-threshold entries treated as zero.
    pub fn conditional_variance_sparse(&self, target: usize, cond: &[usize]) -> Result<f64> {
        self.check_query(target, cond)?;
        let comp = self.component_of[target];
        let local: Vec<usize> = cond.iter().copied().filter(|&c| self.component_of[c] == comp).collect();
        schur(|i, j| self.sparse_get(i, j), target, &local)
    }

    /// `H(target | cond) = 0.5 ln(2 pi e V(target | cond))`.
    pub fn conditional_entropy(&self, target: usize, cond: &[usize]) -> Result<f64> {
        self.conditional_variance(target, cond).map(entropy_from_variance)
    }

    /// Mutual information `I(S; V \ S)` between a set of atoms and the rest.
    pub fn set_mutual_information(&self, set: &[usize]) -> Result<f64> {
        let mut in_set = vec![false; self.size];
        for &s in set {
            in_set[s] = true;
        }
        let rest: Vec<usize> = (0..self.size).filter(|&i| !in_set[i]).collect();
        let all: Vec<usize> = (0..self.size).collect();
        let logdet = |idx: &[usize]| -> Result<f64> {
            if idx.is_empty() {
                return Ok(0.0);
            }
            let sub = linalg::principal_submatrix(&self.values, self.size, idx);
            let l = linalg::cholesky(&sub, idx.len()).ok_or(Error::NotPositiveDefinite)?;
            Ok(linalg::cholesky_log_det(&l, idx.len()))
        };
        Ok(0.5 * (logdet(set)? + logdet(&rest)? - logdet(&all)?))
    }

    /// Entries at or above the threshold as `(i, j, value)`, row-major.
    pub fn dump(&self) -> Vec<(usize, usize, f64)> {
        (0..self.size)
            .flat_map(|i| self.neighbors[i].iter().map(move |&j| (i, j)))
            .map(|(i, j)| (i, j, self.get(i, j)))
            .collect()
    }

    fn check_query(&self, target: usize, cond: &[usize]) -> Result<()> {
        if target >= self.size || cond.iter().any(|&c| c >= self.size) {
            return Err(Error::invalid("atom index outside the kernel"));
        }
        if cond.contains(&target) {
            return Err(Error::invalid(format!("target {target} is in the conditioning set")));
        }
        Ok(())
    }
}

fn schur(get: impl Fn(usize, usize) -> f64, target: usize, cond: &[usize]) -> Result<f64> {
    let prior = get(target, target);
    if cond.is_empty() {
        return Ok(prior.max(VARIANCE_FLOOR));
    }
    let m = cond.len();
    let mut block = vec![0.0; m * m];
    for (r, &i) in cond.iter().enumerate() {
        for (c, &j) in cond.iter().enumerate() {
            block[r * m + c] = get(i, j);
        }
    }
    let l = linalg::cholesky(&block, m).ok_or(Error::NotPositiveDefinite)?;
    let cross: Vec<f64> = cond.iter().map(|&c| get(target, c)).collect();
    let z = linalg::solve_lower(&l, m, &cross);
    let explained: f64 = z.iter().map(|v| v * v).sum();
    Ok((prior - explained).max(VARIANCE_FLOOR))
}

fn connected_components(neighbors: &[Vec<usize>]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = neighbors.len();
    let mut component_of = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if component_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component_of[start] = id;
        let mut head = 0;
        while head < members.len() {
            let v = members[head];
            head += 1;
            for &w in &neighbors[v] {
                if component_of[w] == usize::MAX {
                    component_of[w] = id;
                    members.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    (component_of, components)
}

/// Population covariance (1/N, mean removed) of the atoms' coefficient rows.
pub fn kernel_from_codes(codes: &SparseCodeTable, params: KernelParams) -> Result<KernelMatrix> {
    let n = codes.signal_count();
    if n < 2 {
        return Err(Error::CovarianceUndefined(n));
    }
    let k = codes.atom_count();
    let mut mean = vec![0.0; k];
    let mut second = vec![0.0; k * k];
    for s in codes.signals() {
        for (a, &(i, xi)) in s.iter().enumerate() {
            mean[i] += xi;
            for &(j, xj) in &s[..=a] {
                second[i * k + j] += xi * xj;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for m in &mut mean {
        *m *= inv_n;
    }
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            // Codes are sorted by atom, so pairs accumulate at (larger, smaller).
            let v = second[i * k + j] * inv_n - mean[i] * mean[j];
            values[i * k + j] = v;
            values[j * k + i] = v;
        }
        values[i * k + i] = values[i * k + i].max(0.0);
    }
    KernelMatrix::from_dense(values, k, params)
}

/// Gram matrix `d_i^T d_j` of the columns of `frames`.
pub fn kernel_linear(frames: &Matrix, params: KernelParams) -> Result<KernelMatrix> {
    let cols = frames.columns();
    let f = cols.len();
    let mut values = vec![0.0; f * f];
    for i in 0..f {
        for j in 0..=i {
            let v = crate::numcore::dot(&cols[i], &cols[j]);
            values[i * f + j] = v;
            values[j * f + i] = v;
        }
    }
    KernelMatrix::from_dense(values, f, params)
}
