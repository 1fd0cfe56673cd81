use std::collections::HashSet;

use super::Matrix;
use crate::error::{Error, Result};

/// One labeled (or unlabeled) sequence of per-frame feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub id: String,
    /// Class in `[1, M]`, if labeled.
    pub label: Option<usize>,
    /// Grouping key for leave-one-group-out splits (e.g. the performer).
    pub group: Option<String>,
    /// Frame numbers as ingested; strictly increasing.
    pub frame_numbers: Vec<u64>,
    pub frames: Vec<Vec<f64>>,
}

impl Sequence {
    /// Sequence with frames numbered `0..frames.len()` and no group.
    pub fn new(id: impl Into<String>, label: Option<usize>, frames: Vec<Vec<f64>>) -> Self {
        let frame_numbers = (0..frames.len() as u64).collect();
        Self {
            id: id.into(),
            label,
            group: None,
            frame_numbers,
            frames,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames as columns of an `n x F` matrix.
    pub fn frame_matrix(&self) -> Result<Matrix> {
        Matrix::from_columns(&self.frames)
    }
}

/// Labeled feature sequences; every frame lives in the same `n`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    sequences: Vec<Sequence>,
    dim: usize,
    classes: usize,
}

impl FeatureDataset {
    pub fn new(sequences: Vec<Sequence>) -> Result<Self> {
        let dim = sequences
            .iter()
            .flat_map(|s| s.frames.first())
            .map(Vec::len)
            .next()
            .unwrap_or(0);
        let mut ids = HashSet::new();
        let mut max_label = 0;
        for s in &sequences {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate sequence id {:?}", s.id)));
            }
            if s.frames.is_empty() {
                return Err(Error::invalid(format!("sequence {:?} has no frames", s.id)));
            }
            if s.frame_numbers.len() != s.frames.len() {
                return Err(Error::invalid(format!(
                    "sequence {:?}: {} frame numbers for {} frames",
                    s.id,
                    s.frame_numbers.len(),
                    s.frames.len()
                )));
            }
            if s.frame_numbers.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "sequence {:?}: frame numbers not strictly increasing",
                    s.id
                )));
            }
            if let Some(f) = s.frames.iter().find(|f| f.len() != dim) {
                return Err(Error::DimensionMismatch(format!(
                    "sequence {:?} has a frame of dimension {}, expected {dim}",
                    s.id,
                    f.len()
                )));
            }
            if s.frames.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("sequence {:?} has non-finite features", s.id)));
            }
            match s.label {
                Some(0) => return Err(Error::invalid(format!("sequence {:?}: labels start at 1", s.id))),
                Some(l) => max_label = max_label.max(l),
                None => {}
            }
        }
        if !sequences.is_empty() && dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        let present: HashSet<usize> = sequences.iter().filter_map(|s| s.label).collect();
        if let Some(missing) = (1..=max_label).find(|c| !present.contains(c)) {
            return Err(Error::invalid(format!(
                "class {missing} of 1..={max_label} has no sequences"
            )));
        }
        Ok(Self {
            sequences,
            dim,
            classes: max_label,
        })
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of classes `M`; 0 when unlabeled.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn signal_count(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Sub-dataset holding the sequences at `indices`, in that order.
    ///
    /// The class count is kept from the parent so labels stay comparable.
    pub fn subset(&self, indices: &[usize]) -> FeatureDataset {
        FeatureDataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            dim: self.dim,
            classes: self.classes,
        }
    }

    /// Lays every frame out as a column, sequence-major then frame-ascending.
    pub fn flatten(&self) -> Result<Flattened> {
        if self.signal_count() == 0 {
            return Err(Error::NoSignals);
        }
        let mut columns = Vec::with_capacity(self.signal_count());
        let mut labels = Vec::with_capacity(columns.capacity());
        let mut index = Vec::with_capacity(columns.capacity());
        for (si, s) in self.sequences.iter().enumerate() {
            for (pos, f) in s.frames.iter().enumerate() {
                columns.push(f.clone());
                labels.push(s.label);
                index.push(FrameRef {
                    sequence: si,
                    position: pos,
                });
            }
        }
        Ok(Flattened {
            signals: Matrix::from_columns(&columns)?,
            labels,
            index,
            sequences: self
                .sequences
                .iter()
                .map(|s| SequenceHeader {
                    id: s.id.clone(),
                    label: s.label,
                    group: s.group.clone(),
                    frame_numbers: s.frame_numbers.clone(),
                })
                .collect(),
            classes: self.classes,
        })
    }
}

/// Position of one signal column inside the dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameRef {
    pub sequence: usize,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct SequenceHeader {
    id: String,
    label: Option<usize>,
    group: Option<String>,
    frame_numbers: Vec<u64>,
}

/// The signal matrix `Y` (`n x N`) with per-column labels and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Flattened {
    pub signals: Matrix,
    pub labels: Vec<Option<usize>>,
    pub index: Vec<FrameRef>,
    sequences: Vec<SequenceHeader>,
    classes: usize,
}

impl Flattened {
    pub fn sequence_id(&self, r: FrameRef) -> &str {
        &self.sequences[r.sequence].id
    }

    pub fn frame_number(&self, r: FrameRef) -> u64 {
        self.sequences[r.sequence].frame_numbers[r.position]
    }

    /// `(sequence id, frame number)` for every column.
    pub fn keys(&self) -> Vec<(String, u64)> {
        self.index
            .iter()
            .map(|&r| (self.sequence_id(r).to_owned(), self.frame_number(r)))
            .collect()
    }

    /// Labels, failing on the first unlabeled signal.
    pub fn required_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(j, l)| l.ok_or(Error::Unlabeled(j)))
            .collect()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Inverse of [`FeatureDataset::flatten`].
    pub fn to_dataset(&self) -> Result<FeatureDataset> {
        let mut frames: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.sequences.len()];
        for (j, r) in self.index.iter().enumerate() {
            let seq = &mut frames[r.sequence];
            if seq.len() != r.position {
                return Err(Error::invalid("frame index is not in flatten order"));
            }
            seq.push(self.signals.column(j));
        }
        let sequences = self
            .sequences
            .iter()
            .zip(frames)
            .map(|(h, frames)| Sequence {
                id: h.id.clone(),
                label: h.label,
                group: h.group.clone(),
                frame_numbers: h.frame_numbers.clone(),
                frames,
            })
            .collect();
        FeatureDataset::new(sequences)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_sequence_layout() {
        let ds = FeatureDataset::new(vec![Sequence::new(
            "a",
            None,
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
        )])
        .unwrap();
        let f = ds.flatten().unwrap();
        assert_eq!((f.signals.rows(), f.signals.cols()), (2, 3));
        assert_eq!(f.index.len(), 3);
        assert_eq!(ds.classes(), 0);
    }

    #[test]
    fn column_order_is_sequence_major() {
        let ds = FeatureDataset::new(vec![
            Sequence::new("s1", Some(1), vec![vec![1.0], vec![2.0]]),
            Sequence::new("s2", Some(2), vec![vec![3.0]]),
        ])
        .unwrap();
        let f = ds.flatten().unwrap();
        assert_eq!(f.signals.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(f.keys(), vec![("s1".into(), 0), ("s1".into(), 1), ("s2".into(), 0)]);
        assert_eq!(f.labels, vec![Some(1), Some(1), Some(2)]);
    }

    #[test]
    fn fourteen_gesture_classes() {
        let seqs = (1..=14)
            .map(|c| Sequence::new(format!("g{c}"), Some(c), vec![vec![c as f64]]))
            .collect();
        assert_eq!(FeatureDataset::new(seqs).unwrap().classes(), 14);
    }

    #[test]
    fn validation_errors() {
        let empty = FeatureDataset::new(vec![]).unwrap();
        assert!(matches!(empty.flatten(), Err(Error::NoSignals)));
        let dup = FeatureDataset::new(vec![
            Sequence::new("a", None, vec![vec![1.0]]),
            Sequence::new("a", None, vec![vec![1.0]]),
        ]);
        assert!(dup.is_err());
        let ragged = FeatureDataset::new(vec![Sequence::new("a", None, vec![vec![1.0], vec![1.0, 2.0]])]);
        assert!(matches!(ragged, Err(Error::DimensionMismatch(_))));
        let gap = FeatureDataset::new(vec![Sequence::new("a", Some(2), vec![vec![1.0]])]);
        assert!(gap.is_err(), "class 1 missing");
    }

    proptest! {
        #[test]
        fn flatten_round_trips_bit_exactly(
            lens in proptest::collection::vec(1usize..5, 1..5),
            dim in 1usize..4,
            vals in proptest::collection::vec(-1e6f64..1e6, 64),
        ) {
            let mut it = vals.iter().cycle();
            let seqs: Vec<Sequence> = lens.iter().enumerate().map(|(i, &len)| {
                let frames = (0..len).map(|_| (0..dim).map(|_| *it.next().unwrap()).collect()).collect();
                let mut s = Sequence::new(format!("seq{i}"), Some(i % 2 + 1), frames)
                    .with_group(format!("g{}", i % 3));
                s.frame_numbers = (0..len as u64).map(|f| f * 3 + 1).collect();
                s
            }).collect();
            let labeled = if seqs.len() == 1 {
                vec![Sequence { label: Some(1), ..seqs[0].clone() }]
            } else { seqs };
            let ds = FeatureDataset::new(labeled).unwrap();
            let back = ds.flatten().unwrap().to_dataset().unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
