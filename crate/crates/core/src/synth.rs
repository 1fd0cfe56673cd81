//! Seeded synthetic data: sparse signals over a random dictionary, labeled
//! attribute mixtures, action-like sequences, planted frame clusters and
//! random kernels. Used by tests, benchmarks and the `gen` subcommand.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::gp::{KernelMatrix, KernelParams};
use crate::numcore::linalg;
use crate::numcore::{dot, norm, FeatureDataset, Matrix, Sequence};
use crate::pursuit::{Dictionary, SparseCodeTable};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

fn unit_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v = gaussian_vec(n, rng);
        let l = norm(&v);
        if l > 1e-9 {
            return v.iter().map(|x| x / l).collect();
        }
    }
}

/// `n x k` dictionary with i.i.d. Gaussian atoms, normalized.
pub fn random_dictionary<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Dictionary {
    let atoms: Vec<Vec<f64>> = (0..k).map(|_| unit_vec(n, rng)).collect();
    Dictionary::from_atoms(&atoms).expect("generated atoms are unit norm")
}

/// Signals built from a known dictionary and known sparse codes.
#[derive(Clone, Debug)]
pub struct SparseSignals {
    pub dictionary: Dictionary,
    pub codes: SparseCodeTable,
    /// `n x count`, noise included.
    pub signals: Matrix,
}

/// `count` signals, each a standard-normal combination of `sparsity`
/// distinct atoms of a random `n x atoms` dictionary, plus Gaussian noise of
/// deviation `noise`.
pub fn sparse_signals<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    atoms: usize,
    sparsity: usize,
    noise: f64,
    rng: &mut R,
) -> SparseSignals {
    let dictionary = random_dictionary(n, atoms, rng);
    let mut columns = Vec::with_capacity(count);
    let mut supports = Vec::with_capacity(count);
    for _ in 0..count {
        let code: Vec<(usize, f64)> = sample(rng, atoms, sparsity)
            .into_iter()
            .map(|a| (a, gaussian(rng)))
            .collect();
        columns.push(synthesize(&dictionary, &code, noise, rng));
        supports.push(code);
    }
    SparseSignals {
        codes: SparseCodeTable::new(atoms, sparsity, supports).expect("valid generated codes"),
        signals: Matrix::from_columns(&columns).expect("non-empty signal set"),
        dictionary,
    }
}

/// `D x` plus noise.
pub fn synthesize<R: Rng + ?Sized>(dict: &Dictionary, code: &[(usize, f64)], noise: f64, rng: &mut R) -> Vec<f64> {
    let mut y = vec![0.0; dict.dim()];
    for &(a, c) in code {
        y.iter_mut().zip(dict.atom(a)).for_each(|(v, d)| *v += c * d);
    }
    if noise > 0.0 {
        y.iter_mut().for_each(|v| *v += noise * gaussian(rng));
    }
    y
}

/// Exact recovery condition for greedy pursuit on `support`:
/// `max_{j not in S} ||pinv(D_S) d_j||_1 < 1`. When it holds, OMP picks only
/// support atoms on any noiseless signal supported there.
pub fn exact_recovery_holds(dict: &Dictionary, support: &[usize]) -> bool {
    let s = support.len();
    let mut gram = vec![0.0; s * s];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            gram[r * s + c] = dot(dict.atom(i), dict.atom(j));
        }
    }
    let Some(l) = linalg::cholesky(&gram, s) else {
        return false;
    };
    (0..dict.size()).filter(|j| !support.contains(j)).all(|j| {
        let rhs: Vec<f64> = support.iter().map(|&i| dot(dict.atom(i), dict.atom(j))).collect();
        let w = linalg::cholesky_solve(&l, s, &rhs);
        w.iter().map(|v| v.abs()).sum::<f64>() < 1.0
    })
}

/// Parameters of the labeled attribute mixture.
#[derive(Clone, Copy, Debug)]
pub struct MixtureParams {
    pub classes: usize,
    pub dim: usize,
    /// Generator atoms owned by each class.
    pub class_atoms: usize,
    /// Generator atoms every class may use.
    pub shared_atoms: usize,
    /// Signals per class.
    pub per_class: usize,
    /// Class atoms combined per signal.
    pub active: usize,
    /// Probability that a signal also uses one shared atom.
    pub shared_rate: f64,
    pub noise: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            classes: 4,
            dim: 16,
            class_atoms: 3,
            shared_atoms: 3,
            per_class: 100,
            active: 2,
            shared_rate: 0.5,
            noise: 0.02,
        }
    }
}

/// Labeled single-frame sequences drawn from class-owned generator atoms,
/// occasionally mixed with shared ones. Each class's atoms are perturbations
/// of a class center, so classes form separable clusters.
pub fn attribute_mixture<R: Rng + ?Sized>(p: &MixtureParams, rng: &mut R) -> FeatureDataset {
    let centers: Vec<Vec<f64>> = (0..p.classes).map(|_| unit_vec(p.dim, rng)).collect();
    let class_atoms: Vec<Vec<Vec<f64>>> = centers
        .iter()
        .map(|c| {
            (0..p.class_atoms)
                .map(|_| {
                    let v: Vec<f64> = c
                        .iter()
                        .map(|x| x + 0.5 * gaussian(rng) / (p.dim as f64).sqrt())
                        .collect();
                    let l = norm(&v);
                    v.iter().map(|x| x / l).collect()
                })
                .collect()
        })
        .collect();
    let shared: Vec<Vec<f64>> = (0..p.shared_atoms).map(|_| unit_vec(p.dim, rng)).collect();
    let mut sequences = Vec::with_capacity(p.classes * p.per_class);
    for (c, owned) in class_atoms.iter().enumerate() {
        for i in 0..p.per_class {
            let mut y = vec![0.0; p.dim];
            for a in sample(rng, owned.len(), p.active.min(owned.len())) {
                let w = rng.random_range(0.5..1.5);
                y.iter_mut().zip(&owned[a]).for_each(|(v, d)| *v += w * d);
            }
            if !shared.is_empty() && rng.random_bool(p.shared_rate) {
                let a = rng.random_range(0..shared.len());
                let w = rng.random_range(0.3..0.8);
                y.iter_mut().zip(&shared[a]).for_each(|(v, d)| *v += w * d);
            }
            y.iter_mut().for_each(|v| *v += p.noise * gaussian(rng));
            sequences.push(Sequence::new(format!("c{}_{i:03}", c + 1), Some(c + 1), vec![y]));
        }
    }
    FeatureDataset::new(sequences).expect("generated mixture is valid")
}

/// Parameters of the action-like sequence generator.
#[derive(Clone, Copy, Debug)]
pub struct ActionParams {
    pub classes: usize,
    pub actors: usize,
    /// Sequences per (class, actor).
    pub repeats: usize,
    pub dim: usize,
    /// Pose prototypes shared by all classes.
    pub poses: usize,
    /// Poses visited by one action, in class-specific order.
    pub poses_per_action: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub noise: f64,
}

impl Default for ActionParams {
    fn default() -> Self {
        Self {
            classes: 3,
            actors: 9,
            repeats: 1,
            dim: 20,
            poses: 10,
            poses_per_action: 4,
            min_frames: 16,
            max_frames: 24,
            noise: 0.03,
        }
    }
}

/// Sequences that sweep through a class-specific ordered path of pose
/// prototypes, blending neighbouring poses frame by frame. Actors add a
/// personal offset, an amplitude scale and a random speed; grouping is by
/// actor (`a1`, `a2`, ...).
pub fn action_sequences<R: Rng + ?Sized>(p: &ActionParams, rng: &mut R) -> FeatureDataset {
    let poses: Vec<Vec<f64>> = (0..p.poses).map(|_| unit_vec(p.dim, rng)).collect();
    let paths: Vec<Vec<usize>> = (0..p.classes)
        .map(|_| sample(rng, p.poses, p.poses_per_action).into_vec())
        .collect();
    let actors: Vec<(Vec<f64>, f64)> = (0..p.actors)
        .map(|_| {
            let offset: Vec<f64> = gaussian_vec(p.dim, rng)
                .iter()
                .map(|v| 0.05 * v / (p.dim as f64).sqrt())
                .collect();
            (offset, rng.random_range(0.9..1.1))
        })
        .collect();
    let mut sequences = Vec::new();
    for (c, path) in paths.iter().enumerate() {
        for (a, (offset, scale)) in actors.iter().enumerate() {
            for r in 0..p.repeats {
                let len = rng.random_range(p.min_frames..=p.max_frames);
                let frames = (0..len)
                    .map(|t| {
                        let phase = t as f64 / (len - 1).max(1) as f64 * (path.len() - 1) as f64;
                        let i = (phase.floor() as usize).min(path.len() - 2);
                        let w = phase - i as f64;
                        (0..p.dim)
                            .map(|d| {
                                let pose = (1.0 - w) * poses[path[i]][d] + w * poses[path[i + 1]][d];
                                scale * pose + offset[d] + p.noise * gaussian(rng)
                            })
                            .collect()
                    })
                    .collect();
                let id = format!("c{}_a{}_r{}", c + 1, a + 1, r + 1);
                sequences.push(Sequence::new(id, Some(c + 1), frames).with_group(format!("a{}", a + 1)));
            }
        }
    }
    FeatureDataset::new(sequences).expect("generated actions are valid")
}

/// Frames planted around `clusters` well-separated centers.
#[derive(Clone, Debug)]
pub struct PlantedFrames {
    /// `dim x (clusters * per_cluster)`, columns in random order.
    pub frames: Matrix,
    /// Cluster of every column.
    pub cluster: Vec<usize>,
}

/// `per_cluster` frames around each of `clusters` random centers, with
/// isotropic noise whose deviation is `noise_frac` times the smallest
/// distance between centers. Frame order is shuffled.
pub fn planted_clusters<R: Rng + ?Sized>(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    noise_frac: f64,
    rng: &mut R,
) -> PlantedFrames {
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| unit_vec(dim, rng).iter().map(|v| v * 10.0).collect())
        .collect();
    let mut gap = f64::INFINITY;
    for i in 0..clusters {
        for j in i + 1..clusters {
            gap = gap.min(crate::numcore::euclidean(&centers[i], &centers[j]));
        }
    }
    if !gap.is_finite() {
        gap = 10.0;
    }
    let sigma = noise_frac * gap;
    let total = clusters * per_cluster;
    let order = sample(rng, total, total).into_vec();
    let mut columns = vec![Vec::new(); total];
    let mut cluster = vec![0; total];
    for (slot, &pos) in order.iter().enumerate() {
        let c = slot / per_cluster;
        columns[pos] = centers[c].iter().map(|v| v + sigma * gaussian(rng)).collect();
        cluster[pos] = c;
    }
    PlantedFrames {
        frames: Matrix::from_columns(&columns).expect("non-empty frames"),
        cluster,
    }
}

/// Random positive-definite `size x size` kernel: `A A^T / size` plus a
/// small ridge, with `A` Gaussian.
pub fn random_pd_kernel<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Vec<f64> {
    let a = gaussian_vec(size * size, rng);
    let mut k = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..=i {
            let v = dot(&a[i * size..(i + 1) * size], &a[j * size..(j + 1) * size]) / size as f64;
            k[i * size + j] = v;
            k[j * size + i] = v;
        }
        k[i * size + i] += 0.05;
    }
    k
}

/// Block-diagonal kernel of `size` atoms in blocks of `block` atoms (the last
/// block may be smaller); entries outside the blocks are exact zeros.
pub fn block_kernel<R: Rng + ?Sized>(size: usize, block: usize, params: KernelParams, rng: &mut R) -> KernelMatrix {
    let mut values = vec![0.0; size * size];
    let mut start = 0;
    while start < size {
        let b = block.min(size - start);
        let sub = random_pd_kernel(b, rng);
        for i in 0..b {
            for j in 0..b {
                values[(start + i) * size + start + j] = sub[i * b + j];
            }
        }
        start += b;
    }
    KernelMatrix::from_dense(values, size, params).expect("block kernel is symmetric")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng_from_seed;

    #[test]
    fn sparse_signals_match_their_codes() {
        let s = sparse_signals(8, 20, 12, 3, 0.0, &mut rng_from_seed(1));
        assert_eq!(s.signals.cols(), 20);
        for j in 0..20 {
            assert_eq!(s.codes.signal(j).len(), 3);
            let y = synthesize(&s.dictionary, s.codes.signal(j), 0.0, &mut rng_from_seed(0));
            let diff = crate::numcore::euclidean(&y, &s.signals.column(j));
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn orthonormal_support_satisfies_recovery_condition() {
        let atoms: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let dict = Dictionary::from_atoms(&atoms).unwrap();
        assert!(exact_recovery_holds(&dict, &[0, 2]));
        let s = 0.5f64.sqrt();
        let tricky = Dictionary::from_atoms(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap();
        assert!(!exact_recovery_holds(&tricky, &[0, 1]));
    }

    #[test]
    fn generators_are_seeded() {
        let p = ActionParams::default();
        assert_eq!(
            action_sequences(&p, &mut rng_from_seed(4)),
            action_sequences(&p, &mut rng_from_seed(4))
        );
        let m = attribute_mixture(&MixtureParams::default(), &mut rng_from_seed(2));
        assert_eq!(m.classes(), 4);
        assert_eq!(m.signal_count(), 400);
        let d = action_sequences(&p, &mut rng_from_seed(4));
        assert_eq!(d.sequences().len(), 27);
        assert!(d.sequences().iter().all(|s| s.group.is_some()));
    }

    #[test]
    fn planted_clusters_cover_every_cluster() {
        let p = planted_clusters(4, 5, 6, 0.05, &mut rng_from_seed(8));
        let mut counts = [0; 4];
        p.cluster.iter().for_each(|&c| counts[c] += 1);
        assert_eq!(counts, [5; 4]);
    }

    #[test]
    fn block_kernel_is_block_diagonal() {
        let k = block_kernel(10, 4, KernelParams::default(), &mut rng_from_seed(3));
        assert_eq!(k.get(0, 5), 0.0);
        assert_eq!(k.components().len(), 3);
        assert!(linalg::cholesky(k.values(), 10).is_some());
    }
}
