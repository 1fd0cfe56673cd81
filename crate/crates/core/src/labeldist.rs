//! Class distributions over dictionary atoms and the label-entropy term of
//! the supervised objective.

use crate::error::{Error, Result};
use crate::pursuit::SparseCodeTable;

const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over `M` classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("class distribution over zero classes"));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("class probabilities must be finite and non-negative"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("class probabilities sum to {sum}")));
        }
        Ok(Self(probabilities))
    }

    pub fn uniform(classes: usize) -> Self {
        assert!(classes > 0, "uniform distribution needs at least one class");
        Self(vec![1.0 / classes as f64; classes])
    }

    /// Normalizes non-negative masses; all-zero mass gives the uniform distribution.
    pub fn from_mass(mass: &[f64]) -> Self {
        let total: f64 = mass.iter().sum();
        if total > 0.0 {
            Self(mass.iter().map(|m| m / total).collect())
        } else {
            Self::uniform(mass.len())
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn max_probability(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// How coefficients are pooled per class when building `P(L | atom)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Sum of absolute coefficients.
    #[default]
    Abs,
    /// Sum of signed coefficients, negative class totals clamped to zero.
    Signed,
    /// Number of signals using the atom.
    Count,
}

/// `P(L | d_i)` for every atom, pooled from the coefficients of labeled signals.
///
/// `labels` holds one class in `[1, classes]` per signal.
pub fn atom_class_dist(
    codes: &SparseCodeTable,
    labels: &[Option<usize>],
    classes: usize,
    aggregation: Aggregation,
) -> Result<Vec<ClassDistribution>> {
    if labels.len() != codes.signal_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} signals",
            labels.len(),
            codes.signal_count()
        )));
    }
    if classes == 0 {
        return Err(Error::invalid("at least one class is required"));
    }
    let mut mass = vec![vec![0.0; classes]; codes.atom_count()];
    for (j, label) in labels.iter().enumerate() {
        let c = label.ok_or(Error::Unlabeled(j))?;
        if c == 0 || c > classes {
            return Err(Error::invalid(format!("signal {j}: label {c} outside 1..={classes}")));
        }
        for &(atom, x) in codes.signal(j) {
            mass[atom][c - 1] += match aggregation {
                Aggregation::Abs => x.abs(),
                Aggregation::Signed => x,
                Aggregation::Count => f64::from(u8::from(x != 0.0)),
            };
        }
    }
    Ok(mass
        .into_iter()
        .map(|m| {
            let clamped: Vec<f64> = m.into_iter().map(|v| v.max(0.0)).collect();
            ClassDistribution::from_mass(&clamped)
        })
        .collect())
}

/// `P(L | D*)`: the mean of the member distributions, uniform for an empty set.
pub fn set_class_dist(dists: &[ClassDistribution], set: &[usize], classes: usize) -> ClassDistribution {
    if set.is_empty() {
        return ClassDistribution::uniform(classes);
    }
    let mut acc = vec![0.0; classes];
    for &i in set {
        for (a, p) in acc.iter_mut().zip(dists[i].probabilities()) {
            *a += p;
        }
    }
    let n = set.len() as f64;
    ClassDistribution(acc.into_iter().map(|a| a / n).collect())
}

/// `-sum_L P(L_t) P(L_c) ln P(L_t)`, with `0 ln 0 = 0`.
///
/// This is the label term of the supervised greedy objective; it weights the
/// target's self-information by the conditioning distribution and is not the
/// textbook conditional entropy.
pub fn label_cond_entropy(target: &ClassDistribution, cond: &ClassDistribution) -> f64 {
    label_cond_entropy_raw(target.probabilities(), cond.probabilities())
}

pub(crate) fn label_cond_entropy_raw(target: &[f64], cond: &[f64]) -> f64 {
    -target
        .iter()
        .zip(cond)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, c)| t * c * t.ln())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_atom(coefs: &[f64]) -> SparseCodeTable {
        let signals = coefs
            .iter()
            .map(|&c| if c == 0.0 { vec![] } else { vec![(0, c)] })
            .collect();
        SparseCodeTable::new(1, 1, signals).unwrap()
    }

    #[test]
    fn all_mass_in_one_class() {
        let d = atom_class_dist(
            &one_atom(&[0.5, 0.5, 0.0]),
            &[Some(1), Some(1), Some(2)],
            2,
            Aggregation::Abs,
        )
        .unwrap();
        assert_eq!(d[0].probabilities(), &[1.0, 0.0]);
    }

    #[test]
    fn absolute_masses_balance() {
        let d = atom_class_dist(
            &one_atom(&[-0.5, 0.5, 1.0]),
            &[Some(1), Some(1), Some(2)],
            2,
            Aggregation::Abs,
        )
        .unwrap();
        assert_eq!(d[0].probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn unused_atom_is_uniform() {
        let d = atom_class_dist(
            &one_atom(&[0.0, 0.0, 0.0]),
            &[Some(1), Some(2), Some(3)],
            3,
            Aggregation::Abs,
        )
        .unwrap();
        for p in d[0].probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn other_aggregations() {
        let codes = one_atom(&[-0.5, 0.25, 1.0]);
        let labels = [Some(1), Some(1), Some(2)];
        let signed = atom_class_dist(&codes, &labels, 2, Aggregation::Signed).unwrap();
        assert_eq!(signed[0].probabilities(), &[0.0, 1.0]);
        let count = atom_class_dist(&codes, &labels, 2, Aggregation::Count).unwrap();
        let p = count[0].probabilities();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unlabeled_signal_is_an_error() {
        let r = atom_class_dist(&one_atom(&[1.0, 1.0]), &[Some(1), None], 1, Aggregation::Abs);
        assert!(matches!(r, Err(Error::Unlabeled(1))));
    }

    #[test]
    fn set_distribution_is_the_mean() {
        let d = vec![
            ClassDistribution::new(vec![1.0, 0.0]).unwrap(),
            ClassDistribution::new(vec![0.0, 1.0]).unwrap(),
        ];
        assert_eq!(set_class_dist(&d, &[0], 2), d[0]);
        assert_eq!(set_class_dist(&d, &[0, 1], 2).probabilities(), &[0.5, 0.5]);
        assert_eq!(set_class_dist(&d, &[], 2), ClassDistribution::uniform(2));
    }

    #[test]
    fn label_entropy_values() {
        let det = ClassDistribution::new(vec![1.0, 0.0]).unwrap();
        let half = ClassDistribution::uniform(2);
        assert_eq!(label_cond_entropy(&det, &half), 0.0);
        let h = label_cond_entropy(&half, &half);
        assert!((h - 2f64.ln() / 2.0).abs() < 1e-15);
        assert!((h - 0.34657).abs() < 1e-5);
        // A uniform conditioning distribution scales the plain entropy by 1/M.
        let p = ClassDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let plain: f64 = -p.probabilities().iter().map(|x| x * x.ln()).sum::<f64>();
        let h = label_cond_entropy(&p, &ClassDistribution::uniform(3));
        assert!((h - plain / 3.0).abs() < 1e-15);
    }

    fn dist(m: usize) -> impl Strategy<Value = ClassDistribution> {
        proptest::collection::vec(0.0f64..1.0, m).prop_map(|v| ClassDistribution::from_mass(&v))
    }

    proptest! {
        #[test]
        fn label_entropy_non_negative((t, c) in (1usize..6).prop_flat_map(|m| (dist(m), dist(m)))) {
            prop_assert!(label_cond_entropy(&t, &c) >= 0.0);
        }

        #[test]
        fn class_permutation_invariance(
            (t, c, rot) in (2usize..6).prop_flat_map(|m| (dist(m), dist(m), 0..m))
        ) {
            let rotate = |d: &ClassDistribution| {
                let mut v = d.probabilities().to_vec();
                v.rotate_left(rot);
                ClassDistribution::new(v).unwrap()
            };
            let a = label_cond_entropy(&t, &c);
            let b = label_cond_entropy(&rotate(&t), &rotate(&c));
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn atom_distributions_are_valid(
            coefs in proptest::collection::vec(-3.0f64..3.0, 1..20),
            classes in 1usize..4,
        ) {
            let labels: Vec<Option<usize>> = (0..coefs.len()).map(|j| Some(j % classes + 1)).collect();
            for agg in [Aggregation::Abs, Aggregation::Signed, Aggregation::Count] {
                let d = atom_class_dist(&one_atom(&coefs), &labels, classes, agg).unwrap();
                let s: f64 = d[0].probabilities().iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert!(d[0].probabilities().iter().all(|p| *p >= 0.0));
            }
        }
    }
}
