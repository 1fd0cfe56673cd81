//! Sequence encoding against a learned dictionary, DTW and code-histogram
//! k-NN classification, and the purity/compactness dictionary diagnostics.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::labeldist::ClassDistribution;
use crate::numcore::{dot, euclidean, FeatureDataset};
use crate::par;
use crate::pursuit::{omp_encode, Dictionary};

/// Per-frame dense codes of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeSequence {
    pub id: String,
    pub label: Option<usize>,
    pub group: Option<String>,
    frames: Vec<Vec<f64>>,
}

impl CodeSequence {
    pub fn new(id: impl Into<String>, label: Option<usize>, frames: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("code sequence without frames"));
        };
        if first.is_empty() || frames.iter().any(|f| f.len() != first.len()) {
            return Err(Error::DimensionMismatch("code vectors differ in length".into()));
        }
        Ok(Self {
            id: id.into(),
            label,
            group: None,
            frames,
        })
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Dictionary size the codes refer to.
    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }

    fn absolute(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| f.iter().map(|v| v.abs()).collect())
            .collect()
    }
}

/// Codes every frame of every sequence with OMP at sparsity `sparsity`.
pub fn encode_sequences(dict: &Dictionary, dataset: &FeatureDataset, sparsity: usize) -> Result<Vec<CodeSequence>> {
    if dict.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary dimension {} vs feature dimension {}",
            dict.dim(),
            dataset.dim()
        )));
    }
    dataset
        .sequences()
        .iter()
        .map(|s| {
            let codes = omp_encode(dict, &s.frame_matrix()?, sparsity)?;
            let frames = (0..codes.signal_count()).map(|j| codes.dense_signal(j)).collect();
            let mut cs = CodeSequence::new(s.id.clone(), s.label, frames)?;
            cs.group = s.group.clone();
            Ok(cs)
        })
        .collect()
}

/// Dynamic time warping with Euclidean local cost and no band. Returns the
/// cost of the cheapest monotone path divided by its length in cells; among
/// equally cheap paths the shortest counts.
pub fn dtw_frames(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (n, m) = (a.len(), b.len());
    assert!(n > 0 && m > 0, "DTW needs non-empty sequences");
    // (cost, length) per cell of the current and previous rows.
    let mut prev = vec![(f64::INFINITY, 0usize); m];
    let mut cur = vec![(f64::INFINITY, 0usize); m];
    for i in 0..n {
        for j in 0..m {
            let local = euclidean(&a[i], &b[j]);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut options = [(f64::INFINITY, 0usize); 3];
                if i > 0 && j > 0 {
                    options[0] = prev[j - 1];
                }
                if i > 0 {
                    options[1] = prev[j];
                }
                if j > 0 {
                    options[2] = cur[j - 1];
                }
                options
                    .into_iter()
                    .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                    .unwrap()
            };
            cur[j] = (best.0 + local, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m - 1];
    cost / len as f64
}

pub fn dtw_distance(a: &CodeSequence, b: &CodeSequence) -> f64 {
    dtw_frames(&a.frames, &b.frames)
}

/// Mean of the absolute per-frame codes.
pub fn histogram_descriptor(c: &CodeSequence) -> Vec<f64> {
    let mut out = vec![0.0; c.dim()];
    for f in &c.frames {
        out.iter_mut().zip(f).for_each(|(o, v)| *o += v.abs());
    }
    let n = c.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Outcome of one k-NN query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: usize,
    /// Distance to the nearest training item.
    pub distance: f64,
}

/// Majority vote among the `k_nn` nearest training items. Equal distances
/// rank by training index; a tied vote goes to the smallest label.
pub fn knn_classify<T, F>(train: &[(T, usize)], query: &T, k_nn: usize, distance: F) -> Result<Prediction>
where
    T: Sync,
    F: Fn(&T, &T) -> f64 + Sync + Send,
{
    if train.is_empty() {
        return Err(Error::invalid("k-NN needs at least one training item"));
    }
    if k_nn == 0 {
        return Err(Error::invalid("k_nn must be at least 1"));
    }
    let dists = par::map_slice(train, |(item, _)| distance(item, query));
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&x, &y| dists[x].total_cmp(&dists[y]).then(x.cmp(&y)));
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in order.iter().take(k_nn) {
        *votes.entry(train[i].1).or_default() += 1;
    }
    let top = *votes.values().max().unwrap();
    let label = *votes.iter().find(|(_, &v)| v == top).unwrap().0;
    Ok(Prediction {
        label,
        distance: dists[order[0]],
    })
}

/// Distance used between two encoded sequences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    /// DTW over per-frame codes.
    #[default]
    Dtw,
    /// Euclidean distance between histogram descriptors.
    Histogram,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifyOptions {
    pub scheme: Scheme,
    pub k_nn: usize,
    /// Run DTW on absolute code values instead of signed ones.
    pub dtw_absolute: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Dtw,
            k_nn: 1,
            dtw_absolute: false,
        }
    }
}

/// Classifies every test sequence against the labeled training sequences.
pub fn classify_sequences(
    train: &[CodeSequence],
    test: &[CodeSequence],
    opts: ClassifyOptions,
) -> Result<Vec<Prediction>> {
    let labels = train
        .iter()
        .map(|s| {
            s.label
                .ok_or_else(|| Error::invalid(format!("training sequence {} is unlabeled", s.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    if let (Some(a), true) = (train.first(), !test.is_empty()) {
        if let Some(b) = train.iter().chain(test).find(|s| s.dim() != a.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "sequence {} has {} codes, expected {}",
                b.id,
                b.dim(),
                a.dim()
            )));
        }
    }
    match opts.scheme {
        Scheme::Dtw => {
            let view = |s: &CodeSequence| {
                if opts.dtw_absolute {
                    s.absolute()
                } else {
                    s.frames.clone()
                }
            };
            let items: Vec<(Vec<Vec<f64>>, usize)> = train.iter().map(view).zip(labels).collect();
            test.iter()
                .map(|q| knn_classify(&items, &view(q), opts.k_nn, |a, b| dtw_frames(a, b)))
                .collect()
        }
        Scheme::Histogram => {
            let items: Vec<(Vec<f64>, usize)> = train.iter().map(histogram_descriptor).zip(labels).collect();
            test.iter()
                .map(|q| knn_classify(&items, &histogram_descriptor(q), opts.k_nn, |a, b| euclidean(a, b)))
                .collect()
        }
    }
}

/// Leave-one-group-out splits over sequence indices, in order of first
/// appearance of each group. Sequences without a group form their own fold.
pub fn group_folds(dataset: &FeatureDataset) -> Vec<(String, Vec<usize>, Vec<usize>)> {
    let keys: Vec<String> = dataset
        .sequences()
        .iter()
        .map(|s| s.group.clone().unwrap_or_else(|| s.id.clone()))
        .collect();
    let mut order: Vec<&String> = Vec::new();
    for k in &keys {
        if !order.contains(&k) {
            order.push(k);
        }
    }
    order
        .into_iter()
        .map(|g| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..keys.len()).partition(|&i| &keys[i] == g);
            (g.clone(), train, test)
        })
        .collect()
}

pub const HISTOGRAM_BINS: usize = 10;

/// Normalized frequencies of values in `[0, 1]` over ten uniform bins; the
/// last bin is closed.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    values: Vec<f64>,
    frequencies: Vec<f64>,
}

impl Histogram {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("histogram of no values"));
        }
        let mut counts = [0usize; HISTOGRAM_BINS];
        for &v in &values {
            let v = v.clamp(0.0, 1.0);
            counts[((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        }
        let n = values.len() as f64;
        Ok(Self {
            frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
            values,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `(low, high, frequency)` per bin.
    pub fn bins(&self) -> Vec<(f64, f64, f64)> {
        let w = 1.0 / HISTOGRAM_BINS as f64;
        self.frequencies
            .iter()
            .enumerate()
            .map(|(i, &f)| (i as f64 * w, (i + 1) as f64 * w, f))
            .collect()
    }

    /// Fraction of the underlying values that are `>= threshold`.
    pub fn mass_at_or_above(&self, threshold: f64) -> f64 {
        self.values.iter().filter(|&&v| v >= threshold).count() as f64 / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Histogram of `max_c P(L = c | atom)` over atoms.
pub fn purity_histogram(dists: &[ClassDistribution]) -> Result<Histogram> {
    Histogram::from_values(dists.iter().map(|d| d.max_probability()).collect())
}

/// Histogram of `|d_i^T d_j|` over all atom pairs `i < j`.
pub fn compactness_histogram(dict: &Dictionary) -> Result<Histogram> {
    let k = dict.size();
    if k < 2 {
        return Err(Error::invalid("compactness needs at least two atoms"));
    }
    let rows = par::map_range(k, |i| {
        (i + 1..k)
            .map(|j| dot(dict.atom(i), dict.atom(j)).abs())
            .collect::<Vec<_>>()
    });
    Histogram::from_values(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Sequence;
    use proptest::prelude::*;

    fn scalar(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    /// Minimum of cost/length over every monotone path, by enumeration.
    fn brute_dtw(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, cost: f64, len: usize, best: &mut f64) {
            let cost = cost + euclidean(&a[i], &b[j]);
            let len = len + 1;
            if i + 1 == a.len() && j + 1 == b.len() {
                *best = best.min(cost / len as f64);
                return;
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, cost, len, best);
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, cost, len, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, cost, len, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(a, b, 0, 0, 0.0, 0, &mut best);
        best
    }

    #[test]
    fn dtw_hand_cases() {
        assert_eq!(
            dtw_frames(&scalar(&[1.0, 2.0, 3.0]), &scalar(&[1.0, 2.0, 2.0, 3.0])),
            0.0
        );
        assert_eq!(dtw_frames(&scalar(&[1.0]), &scalar(&[3.0])), 2.0);
        // One path of length 2 costing |0-1| + |0-1|.
        assert_eq!(dtw_frames(&scalar(&[0.0]), &scalar(&[1.0, 1.0])), 1.0);
    }

    #[test]
    fn dtw_matches_enumeration_when_unique() {
        // Normalizing the cheapest path is not the same as minimizing the
        // ratio in general; on these inputs the cheapest path is also the
        // best ratio, which enumeration confirms.
        let a = scalar(&[0.0, 1.0, 2.0]);
        let b = scalar(&[0.0, 2.0]);
        assert!((dtw_frames(&a, &b) - brute_dtw(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn histogram_descriptor_is_mean_absolute_code() {
        let c = CodeSequence::new("s", None, vec![vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0]]).unwrap();
        assert_eq!(histogram_descriptor(&c), vec![0.5, 0.5, 0.0]);
        let single = CodeSequence::new("t", None, vec![vec![-0.3, 0.2]]).unwrap();
        assert_eq!(histogram_descriptor(&single), vec![0.3, 0.2]);
    }

    #[test]
    fn knn_tie_rules() {
        let d = |a: &f64, b: &f64| (a - b).abs();
        let train = vec![(0.0, 2), (2.0, 1)];
        // Equidistant: lower index wins with k = 1.
        assert_eq!(knn_classify(&train, &1.0, 1, d).unwrap().label, 2);
        // Vote tie between labels 1 and 2: smallest label.
        assert_eq!(knn_classify(&train, &1.0, 2, d).unwrap().label, 1);
        assert_eq!(knn_classify(&[(5.0, 3)], &-1.0, 1, d).unwrap().label, 3);
        assert!(knn_classify(&train, &1.0, 0, d).is_err());
        let empty: Vec<(f64, usize)> = Vec::new();
        assert!(knn_classify(&empty, &1.0, 1, d).is_err());
    }

    #[test]
    fn separable_clusters_leave_one_out() {
        let mut items = Vec::new();
        for c in 0..3 {
            for i in 0..5 {
                let base = 10.0 * c as f64;
                items.push((vec![base + 0.1 * i as f64, -base], c + 1));
            }
        }
        for q in 0..items.len() {
            let mut train = items.clone();
            let (query, label) = train.remove(q);
            let p = knn_classify(&train, &query, 1, |a: &Vec<f64>, b: &Vec<f64>| euclidean(a, b)).unwrap();
            assert_eq!(p.label, label);
        }
    }

    #[test]
    fn encode_one_hot_and_classify_identity() {
        let dict = Dictionary::from_atoms(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let data = FeatureDataset::new(vec![
            Sequence::new("a", Some(1), vec![vec![1.0, 0.0], vec![1.0, 0.0]]),
            Sequence::new("b", Some(2), vec![vec![0.0, 1.0]]),
        ])
        .unwrap();
        let codes = encode_sequences(&dict, &data, 1).unwrap();
        assert_eq!(codes[0].frames(), &[vec![1.0, 0.0], vec![1.0, 0.0]]);
        for scheme in [Scheme::Dtw, Scheme::Histogram] {
            let opts = ClassifyOptions {
                scheme,
                ..Default::default()
            };
            let p = classify_sequences(&codes, &codes, opts).unwrap();
            assert_eq!(p.iter().map(|p| p.label).collect::<Vec<_>>(), vec![1, 2]);
            assert!(p.iter().all(|p| p.distance == 0.0));
        }
    }

    #[test]
    fn folds_by_group() {
        let data = FeatureDataset::new(vec![
            Sequence::new("a", Some(1), vec![vec![1.0]]).with_group("p1"),
            Sequence::new("b", Some(1), vec![vec![1.0]]).with_group("p2"),
            Sequence::new("c", Some(1), vec![vec![1.0]]).with_group("p1"),
        ])
        .unwrap();
        let folds = group_folds(&data);
        assert_eq!(folds.len(), 2);
        assert_eq!(folds[0], ("p1".to_string(), vec![1], vec![0, 2]));
    }

    #[test]
    fn purity_and_compactness() {
        let pure = vec![ClassDistribution::new(vec![1.0, 0.0]).unwrap(); 4];
        let h = purity_histogram(&pure).unwrap();
        assert_eq!(h.frequencies()[9], 1.0);
        let flat = vec![ClassDistribution::uniform(2); 3];
        assert_eq!(purity_histogram(&flat).unwrap().frequencies()[5], 1.0);

        let ortho = Dictionary::from_atoms(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(compactness_histogram(&ortho).unwrap().frequencies()[0], 1.0);
        let dup = Dictionary::from_atoms(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let h = compactness_histogram(&dup).unwrap();
        assert!((h.frequencies()[9] - 1.0 / 3.0).abs() < 1e-15);
        assert!((h.mass_at_or_above(0.8) - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn dtw_is_symmetric_and_zero_on_self(
            a in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..7),
            b in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..7),
        ) {
            prop_assert_eq!(dtw_frames(&a, &a), 0.0);
            let ab = dtw_frames(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - dtw_frames(&b, &a)).abs() < 1e-12);
        }

        #[test]
        fn descriptor_ignores_frame_order(
            mut frames in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 1..8),
            rot in 0usize..8,
        ) {
            let a = histogram_descriptor(&CodeSequence::new("x", None, frames.clone()).unwrap());
            let r = rot % frames.len();
            frames.rotate_left(r);
            frames.reverse();
            let b = histogram_descriptor(&CodeSequence::new("x", None, frames).unwrap());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn histograms_sum_to_one(values in prop::collection::vec(0.0f64..=1.0, 1..50)) {
            let h = Histogram::from_values(values).unwrap();
            prop_assert!((h.frequencies().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
