use std::time::Instant;

use super::{Method, SelectionTrace};
use crate::error::{Error, Result};
use crate::labeldist::ClassDistribution;
use crate::numcore::{dot, norm};
use crate::pursuit::{Dictionary, SparseCodeTable};

const PRIOR_TOLERANCE: f64 = 1e-9;

/// Source of the atom prior `p(d_i)` used when merging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PriorMode {
    /// Proportional to each atom's total absolute coefficient mass.
    #[default]
    Mass,
    Uniform,
}

/// Atom priors from the training codes. Falls back to uniform when no atom
/// carries any mass.
pub fn atom_priors(codes: &SparseCodeTable, mode: PriorMode) -> Vec<f64> {
    let k = codes.atom_count();
    let mass = match mode {
        PriorMode::Mass => codes.atom_mass(),
        PriorMode::Uniform => vec![1.0; k],
    };
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.iter().map(|m| m / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

/// Information lost by merging two atoms with priors `p1`, `p2` and class
/// distributions `l1`, `l2` into one atom carrying their prior-weighted
/// mixture.
pub fn merge_loss(p1: f64, l1: &[f64], p2: f64, l2: &[f64]) -> f64 {
    let merged = mixture(p1, l1, p2, l2);
    let side = |p: f64, l: &[f64]| -> f64 {
        if p == 0.0 {
            return 0.0;
        }
        l.iter()
            .zip(&merged)
            .filter(|(&q, _)| q > 0.0)
            .map(|(&q, &m)| q * (q.ln() - m.ln()))
            .sum::<f64>()
            * p
    };
    side(p1, l1) + side(p2, l2)
}

fn mixture(p1: f64, l1: &[f64], p2: f64, l2: &[f64]) -> Vec<f64> {
    let total = p1 + p2;
    let (w1, w2) = if total > 0.0 {
        (p1 / total, p2 / total)
    } else {
        (0.5, 0.5)
    };
    l1.iter().zip(l2).map(|(a, b)| w1 * a + w2 * b).collect()
}

/// One agglomeration step: `absorbed` was folded into `kept` (indices of the
/// input dictionary; a kept slot may already hold earlier merges).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub kept: usize,
    pub absorbed: usize,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct Mmi3Output {
    /// Merged atoms in ascending order of their surviving input slot, with
    /// class distributions and priors attached.
    pub dictionary: Dictionary,
    /// Input slot of each output atom.
    pub survivors: Vec<usize>,
    pub merges: Vec<Merge>,
    /// One entry per merge: the absorbed slot and its loss.
    pub trace: SelectionTrace,
}

impl Mmi3Output {
    pub fn total_loss(&self) -> f64 {
        self.merges.iter().map(|m| m.loss).sum()
    }
}

struct Cluster {
    vector: Vec<f64>,
    dist: Vec<f64>,
    prior: f64,
}

/// Agglomerative compression: repeatedly merges the pair of atoms whose merge
/// loses the least label information until `k` atoms remain. Ties go to the
/// lexicographically smallest pair.
pub fn select_mmi3(dict: &Dictionary, dists: &[ClassDistribution], priors: &[f64], k: usize) -> Result<Mmi3Output> {
    let size = dict.size();
    if k < 2 || k >= size {
        return Err(Error::invalid(format!("k={k} must satisfy 2 <= k < {size}")));
    }
    if dists.len() != size || priors.len() != size {
        return Err(Error::DimensionMismatch(format!(
            "{} atoms, {} class distributions, {} priors",
            size,
            dists.len(),
            priors.len()
        )));
    }
    if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("atom priors must be finite and non-negative"));
    }
    let prior_sum: f64 = priors.iter().sum();
    if (prior_sum - 1.0).abs() > PRIOR_TOLERANCE {
        return Err(Error::invalid(format!("atom priors sum to {prior_sum}")));
    }
    if dists.windows(2).any(|w| w[0].classes() != w[1].classes()) {
        return Err(Error::invalid("class distributions disagree on the class count"));
    }

    let mut clusters: Vec<Option<Cluster>> = (0..size)
        .map(|i| {
            Some(Cluster {
                vector: dict.atom(i).to_vec(),
                dist: dists[i].probabilities().to_vec(),
                prior: priors[i],
            })
        })
        .collect();
    let loss = |clusters: &[Option<Cluster>], i: usize, j: usize| -> f64 {
        let (a, b) = (clusters[i].as_ref().unwrap(), clusters[j].as_ref().unwrap());
        merge_loss(a.prior, &a.dist, b.prior, &b.dist)
    };
    // Best partner j > i of every active row, as (loss, j).
    let row_best = |clusters: &[Option<Cluster>], i: usize| -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for j in i + 1..clusters.len() {
            if clusters[j].is_none() {
                continue;
            }
            let l = loss(clusters, i, j);
            if best.is_none_or(|(b, _)| l < b) {
                best = Some((l, j));
            }
        }
        best
    };
    let mut best: Vec<Option<(f64, usize)>> = crate::par::map_range(size, |i| row_best(&clusters, i));

    let mut merges = Vec::with_capacity(size - k);
    let mut trace = SelectionTrace::new(Method::Mmi3);
    for _ in 0..size - k {
        let start = Instant::now();
        let mut pick: Option<(f64, usize, usize)> = None;
        for (i, b) in best.iter().enumerate() {
            if let (Some((l, j)), true) = (b, clusters[i].is_some()) {
                if pick.is_none_or(|(pl, _, _)| *l < pl) {
                    pick = Some((*l, i, *j));
                }
            }
        }
        let (l, a, b) = pick.expect("at least two clusters remain");
        let absorbed = clusters[b].take().unwrap();
        let kept = clusters[a].as_mut().unwrap();
        let total = kept.prior + absorbed.prior;
        let (w1, w2) = if total > 0.0 {
            (kept.prior / total, absorbed.prior / total)
        } else {
            (0.5, 0.5)
        };
        let mut vector: Vec<f64> = kept
            .vector
            .iter()
            .zip(&absorbed.vector)
            .map(|(x, y)| w1 * x + w2 * y)
            .collect();
        let n = norm(&vector);
        if n > 0.0 {
            vector.iter_mut().for_each(|v| *v /= n);
            kept.vector = vector;
        }
        kept.dist = mixture(kept.prior, &kept.dist, absorbed.prior, &absorbed.dist);
        kept.prior = total;

        best[b] = None;
        best[a] = row_best(&clusters, a);
        for i in 0..a {
            if clusters[i].is_none() {
                continue;
            }
            match best[i] {
                Some((_, j)) if j == a || j == b => best[i] = row_best(&clusters, i),
                Some((bl, bj)) => {
                    let nl = loss(&clusters, i, a);
                    if nl < bl || (nl == bl && a < bj) {
                        best[i] = Some((nl, a));
                    }
                }
                None => best[i] = row_best(&clusters, i),
            }
        }
        for i in a + 1..size {
            if let Some((_, j)) = best[i] {
                if j == b && clusters[i].is_some() {
                    best[i] = row_best(&clusters, i);
                }
            }
        }
        merges.push(Merge {
            kept: a,
            absorbed: b,
            loss: l,
        });
        trace.atoms.push(b);
        trace.objective.push(l);
        trace.seconds.push(start.elapsed().as_secs_f64());
    }

    let survivors: Vec<usize> = (0..size).filter(|&i| clusters[i].is_some()).collect();
    let kept: Vec<&Cluster> = survivors.iter().map(|&i| clusters[i].as_ref().unwrap()).collect();
    let vectors: Vec<Vec<f64>> = kept.iter().map(|c| c.vector.clone()).collect();
    let out_dists = kept
        .iter()
        .map(|c| ClassDistribution::new(renormalize(&c.dist)))
        .collect::<Result<Vec<_>>>()?;
    let out_priors: Vec<f64> = renormalize(&kept.iter().map(|c| c.prior).collect::<Vec<_>>());
    let dictionary = Dictionary::from_atoms(&vectors)?
        .with_class_dist(out_dists)?
        .with_atom_prior(out_priors)?;
    debug_assert!(vectors.iter().all(|v| (dot(v, v) - 1.0).abs() < 1e-9));
    Ok(Mmi3Output {
        dictionary,
        survivors,
        merges,
        trace,
    })
}

/// Removes accumulated rounding so a sum that should be 1 is 1.
fn renormalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter().map(|x| x / s).collect()
    } else {
        vec![1.0 / v.len() as f64; v.len()]
    }
}
