use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{euclidean, norm};
use crate::pursuit::Dictionary;

const MAX_ITERS: usize = 100;
const SHIFT_TOLERANCE: f64 = 1e-8;

/// k-means over the atom vectors with k-means++ seeding. Centroids are
/// returned re-normalized to unit length, in seeding order. A cluster that
/// empties is re-seeded from the atom farthest from its assigned centroid.
pub fn select_kmeans<R: Rng + ?Sized>(dict: &Dictionary, k: usize, rng: &mut R) -> Result<Dictionary> {
    let points = dict.atom_vectors();
    let size = points.len();
    if k == 0 || k > size {
        return Err(Error::invalid(format!("k={k} must be in 1..={size}")));
    }
    let mut centroids = seed(&points, k, rng);
    let mut assign = vec![0usize; size];
    for _ in 0..MAX_ITERS {
        for (a, p) in assign.iter_mut().zip(&points) {
            *a = nearest(&centroids, p).0;
        }
        let mut sums = vec![vec![0.0; dict.dim()]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                let far = farthest(&points, &assign, &centroids);
                assign[far] = c;
                points[far].clone()
            };
            shift = shift.max(euclidean(&next, &centroids[c]));
            centroids[c] = next;
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    for (c, centroid) in centroids.iter_mut().enumerate() {
        let n = norm(centroid);
        if n > 0.0 {
            centroid.iter_mut().for_each(|v| *v /= n);
        } else {
            // Opposing atoms cancelled out; fall back to the first member.
            let member = assign.iter().position(|&a| a == c).unwrap_or(0);
            *centroid = points[member].clone();
        }
    }
    Dictionary::from_atoms(&centroids)
}

fn seed<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq(euclidean(p, &points[chosen[0]]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            (0..points.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= atom count")
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq(euclidean(p, &points[next])));
        }
    }
    chosen.iter().map(|&i| points[i].clone()).collect()
}

fn sq(x: f64) -> f64 {
    x * x
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = euclidean(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn farthest(points: &[Vec<f64>], assign: &[usize], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = euclidean(p, &centroids[assign[i]]);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng_from_seed;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = norm(v);
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn k_equal_size_returns_the_atoms() {
        let atoms = vec![unit(&[1.0, 0.0, 0.2]), unit(&[0.0, 1.0, 0.0]), unit(&[0.3, 0.3, 1.0])];
        let dict = Dictionary::from_atoms(&atoms).unwrap();
        let out = select_kmeans(&dict, 3, &mut rng_from_seed(3)).unwrap();
        let mut found = [false; 3];
        for c in out.atom_vectors() {
            let i = atoms.iter().position(|a| euclidean(a, &c) < 1e-12).unwrap();
            found[i] = true;
        }
        assert!(found.iter().all(|&f| f));
    }

    #[test]
    fn duplicated_atom_collapses() {
        let a = unit(&[1.0, 2.0, 2.0]);
        let dict = Dictionary::from_atoms(&vec![a.clone(); 6]).unwrap();
        let out = select_kmeans(&dict, 1, &mut rng_from_seed(0)).unwrap();
        assert!(euclidean(out.atom(0), &a) < 1e-12);
    }

    #[test]
    fn finds_two_separated_clusters() {
        let left = [
            unit(&[1.0, 0.01, 0.0]),
            unit(&[1.0, -0.01, 0.0]),
            unit(&[1.0, 0.0, 0.01]),
        ];
        let right = [
            unit(&[0.0, 0.01, 1.0]),
            unit(&[0.0, -0.01, 1.0]),
            unit(&[0.01, 0.0, 1.0]),
        ];
        let atoms: Vec<Vec<f64>> = left.iter().chain(&right).cloned().collect();
        let dict = Dictionary::from_atoms(&atoms).unwrap();
        let mean = |g: &[Vec<f64>]| {
            unit(
                &(0..3)
                    .map(|d| g.iter().map(|v| v[d]).sum::<f64>() / 3.0)
                    .collect::<Vec<_>>(),
            )
        };
        let (ml, mr) = (mean(&left), mean(&right));
        for seed in 0..5 {
            let out = select_kmeans(&dict, 2, &mut rng_from_seed(seed)).unwrap();
            let c = out.atom_vectors();
            let matched = (euclidean(&c[0], &ml) < 1e-6 && euclidean(&c[1], &mr) < 1e-6)
                || (euclidean(&c[0], &mr) < 1e-6 && euclidean(&c[1], &ml) < 1e-6);
            assert!(matched, "seed {seed}: {c:?}");
        }
    }

    #[test]
    fn rejects_bad_k() {
        let dict = Dictionary::from_atoms(&[vec![1.0, 0.0]]).unwrap();
        assert!(select_kmeans(&dict, 2, &mut rng_from_seed(0)).is_err());
        assert!(select_kmeans(&dict, 0, &mut rng_from_seed(0)).is_err());
    }
}
