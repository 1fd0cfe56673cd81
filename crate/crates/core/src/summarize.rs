//! Sequence summarization: frames play the role of atoms, their Gram matrix
//! is the kernel, and MMI-1 picks frames that are diverse yet representative.

use crate::error::{Error, Result};
use crate::gp::{kernel_linear, KernelParams};
use crate::numcore::{euclidean, l2_normalize_columns, norm, FeatureDataset, Matrix};
use crate::par;
use crate::select::{select_mmi1, Evaluation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummarizeOptions {
    /// L2-normalize frames before building the Gram kernel.
    pub normalize: bool,
    pub evaluation: Evaluation,
    pub params: KernelParams,
}

impl Default for SummarizeOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            // Gram matrices of many frames in few dimensions are near
            // singular; zeroing small entries could break positive
            // definiteness, so the full kernel is used.
            evaluation: Evaluation::Dense,
            params: KernelParams::default(),
        }
    }
}

/// A selected frame with the two terms of its greedy step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryFrame {
    /// Column index into the sequence.
    pub frame: usize,
    /// 1-based position in the greedy order.
    pub rank: usize,
    /// `H(d* | D*)`.
    pub diversity: f64,
    /// `-H(d* | D-bar*)`.
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub sequence_id: String,
    /// Sorted by frame index.
    pub frames: Vec<SummaryFrame>,
}

impl Summary {
    pub fn frame_indices(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.frame).collect()
    }
}

/// Picks `k` of the `F` columns of `frames` with MMI-1 over the linear kernel.
pub fn summarize_sequence(id: &str, frames: &Matrix, k: usize, opts: SummarizeOptions) -> Result<Summary> {
    let count = frames.cols();
    if k == 0 || k >= count {
        return Err(Error::invalid(format!(
            "summary of {k} frames needs 1 <= k < {count} (sequence {id})"
        )));
    }
    let normalized;
    let input = if opts.normalize {
        normalized = l2_normalize_columns(frames).matrix;
        &normalized
    } else {
        frames
    };
    let kern = kernel_linear(input, opts.params)?;
    let trace = select_mmi1(&kern, k, opts.evaluation)?;
    let mut picked: Vec<SummaryFrame> = trace
        .atoms
        .iter()
        .enumerate()
        .map(|(i, &frame)| SummaryFrame {
            frame,
            rank: i + 1,
            diversity: trace.diversity[i],
            coverage: trace.coverage[i],
        })
        .collect();
    picked.sort_by_key(|f| f.frame);
    Ok(Summary {
        sequence_id: id.to_string(),
        frames: picked,
    })
}

/// Summarizes every sequence of `dataset` independently.
pub fn summarize_dataset(dataset: &FeatureDataset, k: usize, opts: SummarizeOptions) -> Result<Vec<Summary>> {
    let jobs = par::map_slice(dataset.sequences(), |s| {
        summarize_sequence(&s.id, &s.frame_matrix()?, k, opts)
    });
    jobs.into_iter().collect()
}

/// Human-facing quality numbers: the mean pairwise distance among selected
/// frames (higher is more diverse) and the mean distance from every frame to
/// its nearest selected frame (lower covers better).
pub fn coverage_diversity_report(summary: &Summary, frames: &Matrix) -> Result<(f64, f64)> {
    let cols = frames.columns();
    let picked = summary.frame_indices();
    if picked.is_empty() || picked.iter().any(|&i| i >= cols.len()) {
        return Err(Error::invalid("summary does not index these frames"));
    }
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in picked.iter().enumerate() {
        for &j in &picked[a + 1..] {
            pair_sum += euclidean(&cols[i], &cols[j]);
            pairs += 1;
        }
    }
    let diversity = if pairs > 0 { pair_sum / pairs as f64 } else { 0.0 };
    let coverage = cols
        .iter()
        .map(|c| {
            picked
                .iter()
                .map(|&i| euclidean(c, &cols[i]))
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / cols.len() as f64;
    Ok((diversity, coverage))
}

/// Concatenates per-feature blocks of one frame, normalizing each block to
/// unit length first (zero blocks stay zero).
pub fn concat_features(blocks: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(blocks.iter().map(|b| b.len()).sum());
    for b in blocks {
        let n = norm(b);
        if n > 0.0 {
            out.extend(b.iter().map(|v| v / n));
        } else {
            out.extend_from_slice(b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng_from_seed;
    use crate::synth;

    fn cols(c: &[Vec<f64>]) -> Matrix {
        Matrix::from_columns(c).unwrap()
    }

    #[test]
    fn twin_frames_contribute_one() {
        let frames = cols(&[vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.2, 1.0, 0.0]]);
        let s = summarize_sequence("s", &frames, 2, SummarizeOptions::default()).unwrap();
        let picked = s.frame_indices();
        assert_eq!(picked.len(), 2);
        assert!(picked.contains(&2));
        assert!(picked.contains(&0) ^ picked.contains(&1));
    }

    #[test]
    fn identical_frames_follow_index_order() {
        let frames = cols(&vec![vec![0.5, 0.5]; 5]);
        let s = summarize_sequence("s", &frames, 3, SummarizeOptions::default()).unwrap();
        assert_eq!(s.frame_indices(), vec![0, 1, 2]);
        assert_eq!(s.frames.iter().map(|f| f.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn rejects_k_at_frame_count() {
        let frames = cols(&[vec![1.0], vec![2.0]]);
        assert!(summarize_sequence("s", &frames, 2, SummarizeOptions::default()).is_err());
        assert!(summarize_sequence("s", &frames, 0, SummarizeOptions::default()).is_err());
    }

    #[test]
    fn scaling_frames_keeps_the_summary() {
        let p = synth::planted_clusters(4, 4, 6, 0.05, &mut rng_from_seed(2));
        let a = summarize_sequence("s", &p.frames, 4, SummarizeOptions::default()).unwrap();
        let b = summarize_sequence("s", &p.frames.scaled(7.5), 4, SummarizeOptions::default()).unwrap();
        assert_eq!(a.frame_indices(), b.frame_indices());
    }

    #[test]
    fn report_geometry() {
        let frames = cols(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![4.0, 0.0], vec![4.0, 0.0]]);
        let one = Summary {
            sequence_id: "s".into(),
            frames: vec![SummaryFrame {
                frame: 0,
                rank: 1,
                diversity: 0.0,
                coverage: 0.0,
            }],
        };
        let (div, cov) = coverage_diversity_report(&one, &frames).unwrap();
        assert_eq!(div, 0.0);
        // Half the frames sit 4 away from the only selected frame.
        assert_eq!(cov, 2.0);
        let all = Summary {
            sequence_id: "s".into(),
            frames: (0..4)
                .map(|i| SummaryFrame {
                    frame: i,
                    rank: i + 1,
                    diversity: 0.0,
                    coverage: 0.0,
                })
                .collect(),
        };
        assert_eq!(coverage_diversity_report(&all, &frames).unwrap().1, 0.0);
    }

    #[test]
    fn concatenation_normalizes_blocks() {
        let v = concat_features(&[&[3.0, 4.0], &[0.0, 0.0], &[2.0]]);
        assert_eq!(v, vec![0.6, 0.8, 0.0, 0.0, 1.0]);
    }
}
