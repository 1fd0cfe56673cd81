use std::time::Instant;

use super::{Evaluation, Method, SelectionTrace};
use crate::error::{Error, Result};
use crate::gp::{entropy_from_variance, KernelMatrix, VARIANCE_FLOOR};
use crate::labeldist::{label_cond_entropy_raw, ClassDistribution};
use crate::numcore::linalg;
use crate::par;

/// Maximum-entropy selection: each step adds the atom with the largest
/// `H(d* | D*)`.
pub fn select_me(kern: &KernelMatrix, k: usize, eval: Evaluation) -> Result<SelectionTrace> {
    if k == 0 || k > kern.size() {
        return Err(Error::invalid(format!("k={k} must be in 1..={}", kern.size())));
    }
    let mut engine = Engine::new(kern, eval, false)?;
    let mut trace = SelectionTrace::new(Method::Me);
    for _ in 0..k {
        let start = Instant::now();
        let cands = engine.candidates();
        let num = engine.numerators(&cands)?;
        let scores: Vec<f64> = num.iter().map(|&v| entropy_from_variance(v)).collect();
        let best = pick(&scores);
        engine.choose(cands[best]);
        trace.atoms.push(cands[best]);
        trace.objective.push(scores[best]);
        trace.diversity.push(scores[best]);
        trace.seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(trace)
}

/// Unsupervised mutual-information selection: each step adds the atom
/// maximizing `H(d* | D*) - H(d* | D-bar*)`, i.e. the log of the ratio of its
/// variance given the selected atoms to its variance given all other
/// remaining atoms.
pub fn select_mmi1(kern: &KernelMatrix, k: usize, eval: Evaluation) -> Result<SelectionTrace> {
    run_mmi(kern, k, eval, None)
}

/// Supervised selection: the MMI-1 gain plus `lambda` times the label gain
/// `H(L_d* | L_D*) - H(L_d* | L_D-bar*)`. When `lambda` is `None` it is
/// estimated with [`estimate_lambda`].
pub fn select_mmi2(
    kern: &KernelMatrix,
    dists: &[ClassDistribution],
    k: usize,
    lambda: Option<f64>,
    eval: Evaluation,
) -> Result<SelectionTrace> {
    check_dists(kern, dists)?;
    let lambda = match lambda {
        Some(l) if l >= 0.0 && l.is_finite() => l,
        Some(l) => return Err(Error::invalid(format!("lambda {l} must be finite and non-negative"))),
        None => {
            check_mmi_k(kern, k)?;
            estimate_lambda(kern, dists, eval)?
        }
    };
    run_mmi(kern, k, eval, Some((dists, lambda)))
}

/// Ratio of the best first-step label gain to the best first-step appearance
/// gain, both evaluated with nothing selected yet. Negative label gains give 0.
pub fn estimate_lambda(kern: &KernelMatrix, dists: &[ClassDistribution], eval: Evaluation) -> Result<f64> {
    check_dists(kern, dists)?;
    if kern.size() < 2 {
        return Err(Error::invalid("lambda estimation needs at least two atoms"));
    }
    let engine = Engine::new(kern, eval, true)?;
    let cands = engine.candidates();
    let num = engine.numerators(&cands)?;
    let labels = LabelState::new(dists);
    let mut best_app = f64::NEG_INFINITY;
    let mut best_label = f64::NEG_INFINITY;
    for (i, &y) in cands.iter().enumerate() {
        let den = engine.denominator(y);
        best_app = best_app.max(appearance_gain(num[i], den));
        best_label = best_label.max(labels.gain(dists, y, &[], cands.len()));
    }
    if !(best_app > 1e-12) {
        return Err(Error::DegenerateKernel);
    }
    Ok((best_label / best_app).max(0.0))
}

/// Scores this close to the best (relative to `max(1, |best|)`) count as
/// tied. Ill-conditioned kernels, such as repeated frames, produce gains
/// that agree analytically but differ by rounding noise of this order.
const TIE_TOLERANCE: f64 = 1e-6;

/// Lowest index among the (numerically) best scores.
fn pick(scores: &[f64]) -> usize {
    let best = scores[par::argmax(scores).expect("candidates remain")];
    let slack = TIE_TOLERANCE * best.abs().max(1.0);
    scores.iter().position(|&s| s >= best - slack).unwrap()
}

fn check_dists(kern: &KernelMatrix, dists: &[ClassDistribution]) -> Result<()> {
    if dists.len() != kern.size() {
        return Err(Error::DimensionMismatch(format!(
            "{} class distributions for {} atoms",
            dists.len(),
            kern.size()
        )));
    }
    if dists.windows(2).any(|w| w[0].classes() != w[1].classes()) {
        return Err(Error::invalid("class distributions disagree on the class count"));
    }
    Ok(())
}

fn check_mmi_k(kern: &KernelMatrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k >= kern.size() {
        return Err(Error::RemainingSetEmpty { k, size: kern.size() });
    }
    Ok(())
}

fn appearance_gain(num: f64, den: f64) -> f64 {
    0.5 * (num.ln() - den.ln())
}

fn run_mmi(
    kern: &KernelMatrix,
    k: usize,
    eval: Evaluation,
    labels: Option<(&[ClassDistribution], f64)>,
) -> Result<SelectionTrace> {
    check_mmi_k(kern, k)?;
    let mut engine = Engine::new(kern, eval, true)?;
    let mut trace = SelectionTrace::new(if labels.is_some() { Method::Mmi2 } else { Method::Mmi1 });
    trace.lambda = labels.map(|(_, l)| l);
    let mut label_state = labels.map(|(d, _)| LabelState::new(d));

    for _ in 0..k {
        let start = Instant::now();
        let cands = engine.candidates();
        let num = engine.numerators(&cands)?;
        let den: Vec<f64> = cands.iter().map(|&y| engine.denominator(y)).collect();
        let scores: Vec<f64> = par::map_range(cands.len(), |i| {
            let app = appearance_gain(num[i], den[i]);
            match (&label_state, labels) {
                (Some(ls), Some((dists, lambda))) => {
                    app + lambda * ls.gain(dists, cands[i], &engine.chosen, cands.len())
                }
                _ => app,
            }
        });
        let best = pick(&scores);
        let y = cands[best];
        engine.choose(y);
        if let (Some(ls), Some((dists, _))) = (&mut label_state, labels) {
            ls.choose(&dists[y]);
        }
        trace.atoms.push(y);
        trace.objective.push(scores[best]);
        trace.diversity.push(entropy_from_variance(num[best]));
        trace.coverage.push(-entropy_from_variance(den[best]));
        trace.seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(trace)
}

/// Running class-mass sums over the selected and the remaining atoms.
struct LabelState {
    chosen_sum: Vec<f64>,
    remaining_sum: Vec<f64>,
}

impl LabelState {
    fn new(dists: &[ClassDistribution]) -> Self {
        let m = dists[0].classes();
        let mut remaining_sum = vec![0.0; m];
        for d in dists {
            for (s, p) in remaining_sum.iter_mut().zip(d.probabilities()) {
                *s += p;
            }
        }
        Self {
            chosen_sum: vec![0.0; m],
            remaining_sum,
        }
    }

    /// `H(L_y | L_D*) - H(L_y | L_D-bar*)` where `D-bar*` is the remaining set
    /// (of size `remaining`) without `y`.
    fn gain(&self, dists: &[ClassDistribution], y: usize, chosen: &[usize], remaining: usize) -> f64 {
        let p = dists[y].probabilities();
        let m = p.len();
        let cond_chosen: Vec<f64> = if chosen.is_empty() {
            vec![1.0 / m as f64; m]
        } else {
            self.chosen_sum.iter().map(|s| s / chosen.len() as f64).collect()
        };
        let cond_rest: Vec<f64> = if remaining > 1 {
            let n = (remaining - 1) as f64;
            self.remaining_sum
                .iter()
                .zip(p)
                .map(|(s, q)| ((s - q) / n).max(0.0))
                .collect()
        } else {
            vec![1.0 / m as f64; m]
        };
        label_cond_entropy_raw(p, &cond_chosen) - label_cond_entropy_raw(p, &cond_rest)
    }

    fn choose(&mut self, d: &ClassDistribution) {
        for ((c, r), p) in self
            .chosen_sum
            .iter_mut()
            .zip(&mut self.remaining_sum)
            .zip(d.probabilities())
        {
            *c += p;
            *r -= p;
        }
    }
}

/// Precision (inverse covariance) of the remaining atoms of one group.
struct Block {
    members: Vec<usize>,
    inv: Vec<f64>,
}

/// Greedy bookkeeping over a partition of the atoms. Dense evaluation uses a
/// single group; sparse evaluation uses the kernel's support components,
/// across which all covariances are zero.
struct Engine<'a> {
    kern: &'a KernelMatrix,
    eval: Evaluation,
    group_of: Vec<usize>,
    groups: usize,
    chosen: Vec<usize>,
    remaining: Vec<bool>,
    blocks: Vec<Block>,
}

impl<'a> Engine<'a> {
    fn new(kern: &'a KernelMatrix, eval: Evaluation, with_precision: bool) -> Result<Self> {
        let size = kern.size();
        let (group_of, members): (Vec<usize>, Vec<Vec<usize>>) = match eval {
            Evaluation::Dense => (vec![0; size], vec![(0..size).collect()]),
            Evaluation::Sparse => (
                (0..size).map(|i| kern.component_id(i)).collect(),
                kern.components().to_vec(),
            ),
        };
        let mut engine = Self {
            kern,
            eval,
            group_of,
            groups: members.len(),
            chosen: Vec::new(),
            remaining: vec![true; size],
            blocks: Vec::new(),
        };
        if with_precision {
            let blocks = par::map_slice(&members, |m| engine.invert(m));
            engine.blocks = blocks
                .into_iter()
                .zip(members)
                .map(|(inv, members)| inv.map(|inv| Block { members, inv }))
                .collect::<Result<_>>()?;
        }
        Ok(engine)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        match self.eval {
            Evaluation::Dense => self.kern.get(i, j),
            Evaluation::Sparse => self.kern.sparse_get(i, j),
        }
    }

    fn block_of(&self, idx: &[usize]) -> Vec<f64> {
        let m = idx.len();
        let mut out = vec![0.0; m * m];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                out[r * m + c] = self.entry(i, j);
            }
        }
        out
    }

    fn invert(&self, idx: &[usize]) -> Result<Vec<f64>> {
        let l = linalg::cholesky(&self.block_of(idx), idx.len()).ok_or(Error::NotPositiveDefinite)?;
        Ok(linalg::cholesky_inverse(&l, idx.len()))
    }

    fn candidates(&self) -> Vec<usize> {
        (0..self.remaining.len()).filter(|&i| self.remaining[i]).collect()
    }

    /// `V(y | D*)` for every candidate, conditioning only on selected atoms
    /// in the candidate's group.
    fn numerators(&self, cands: &[usize]) -> Result<Vec<f64>> {
        let mut by_group: Vec<Vec<usize>> = vec![Vec::new(); self.groups];
        for &c in &self.chosen {
            by_group[self.group_of[c]].push(c);
        }
        let factors: Vec<Option<Vec<f64>>> = by_group
            .iter()
            .map(|idx| {
                if idx.is_empty() {
                    Ok(None)
                } else {
                    linalg::cholesky(&self.block_of(idx), idx.len())
                        .map(Some)
                        .ok_or(Error::NotPositiveDefinite)
                }
            })
            .collect::<Result<_>>()?;
        Ok(par::map_slice(cands, |&y| {
            let g = self.group_of[y];
            let prior = self.entry(y, y);
            let v = match &factors[g] {
                None => prior,
                Some(l) => {
                    let idx = &by_group[g];
                    let cross: Vec<f64> = idx.iter().map(|&c| self.entry(y, c)).collect();
                    let z = linalg::solve_lower(l, idx.len(), &cross);
                    prior - z.iter().map(|v| v * v).sum::<f64>()
                }
            };
            v.max(VARIANCE_FLOOR)
        }))
    }

    /// `V(y | remaining \ {y})` from the group's precision matrix.
    fn denominator(&self, y: usize) -> f64 {
        let block = &self.blocks[self.group_of[y]];
        let m = block.members.len();
        let pos = block.members.binary_search(&y).expect("remaining atom is in its block");
        let p = block.inv[pos * m + pos];
        if p.is_finite() && p > 0.0 {
            (1.0 / p).max(VARIANCE_FLOOR)
        } else {
            VARIANCE_FLOOR
        }
    }

    fn choose(&mut self, y: usize) {
        self.chosen.push(y);
        self.remaining[y] = false;
        if let Some(block) = self.blocks.get_mut(self.group_of[y]) {
            let m = block.members.len();
            let pos = block.members.binary_search(&y).expect("remaining atom is in its block");
            block.inv = linalg::inverse_remove(&block.inv, m, pos);
            block.members.remove(pos);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelParams;

    const EXACT: KernelParams = KernelParams {
        threshold: 1e-6,
        jitter: 0.0,
    };

    fn kern(values: &[f64], size: usize) -> KernelMatrix {
        KernelMatrix::from_dense(values.to_vec(), size, EXACT).unwrap()
    }

    fn identity(size: usize) -> KernelMatrix {
        let mut v = vec![0.0; size * size];
        for i in 0..size {
            v[i * size + i] = 1.0;
        }
        kern(&v, size)
    }

    fn dist(p: &[f64]) -> ClassDistribution {
        ClassDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn near_ties_go_to_the_lowest_index() {
        assert_eq!(pick(&[1.0, 3.0, 3.0 + 1e-9, 2.0]), 1);
        assert_eq!(pick(&[1.0, 3.0, 3.1]), 2);
        assert_eq!(pick(&[f64::NAN, -5.0]), 1);
    }

    #[test]
    fn me_on_identity_uses_tie_break() {
        let t = select_me(&identity(4), 2, Evaluation::Sparse).unwrap();
        assert_eq!(t.atoms, vec![0, 1]);
    }

    #[test]
    fn me_prefers_largest_variance() {
        let k = kern(&[4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 3);
        assert_eq!(select_me(&k, 1, Evaluation::Dense).unwrap().atoms, vec![0]);
    }

    #[test]
    fn me_skips_a_perfect_twin() {
        // Atoms 0 and 1 are perfectly correlated; 2 and 3 are independent.
        let k = KernelMatrix::from_dense(
            vec![
                2.0, 2.0, 0.0, 0.0, //
                2.0, 2.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
            4,
            KernelParams::default(),
        )
        .unwrap();
        let t = select_me(&k, 3, Evaluation::Dense).unwrap();
        assert_eq!(t.atoms[0], 0);
        assert_eq!(&t.atoms[1..], &[2, 3]);
    }

    #[test]
    fn mmi1_prefers_the_representative_atom() {
        let k = kern(&[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0], 3);
        let t = select_mmi1(&k, 1, Evaluation::Dense).unwrap();
        assert_eq!(t.atoms, vec![0]);
        assert!((t.objective[0] - 0.5 * (1.0 / 0.19f64).ln()).abs() < 1e-12);
        let v = k.conditional_variance(0, &[1, 2]).unwrap();
        assert!((v - 0.19).abs() < 1e-12);
        assert!((1.0 / v - 5.26).abs() < 0.01);
    }

    #[test]
    fn mmi1_on_identity() {
        let t = select_mmi1(&identity(5), 3, Evaluation::Sparse).unwrap();
        assert_eq!(t.atoms, vec![0, 1, 2]);
        assert!(t.objective.iter().all(|&o| o.abs() < 1e-15));
    }

    #[test]
    fn mmi1_rejects_k_equal_size() {
        assert!(matches!(
            select_mmi1(&identity(3), 3, Evaluation::Dense),
            Err(Error::RemainingSetEmpty { .. })
        ));
        assert!(select_mmi1(&identity(3), 0, Evaluation::Dense).is_err());
        assert!(select_me(&identity(3), 4, Evaluation::Dense).is_err());
    }

    #[test]
    fn lambda_zero_is_mmi1() {
        let k = kern(&[1.0, 0.9, 0.1, 0.9, 1.0, 0.0, 0.1, 0.0, 1.0], 3);
        let d = vec![dist(&[1.0, 0.0]), dist(&[0.0, 1.0]), dist(&[0.5, 0.5])];
        let a = select_mmi1(&k, 2, Evaluation::Dense).unwrap();
        let b = select_mmi2(&k, &d, 2, Some(0.0), Evaluation::Dense).unwrap();
        assert_eq!(a.atoms, b.atoms);
        assert_eq!(a.objective, b.objective);
        assert_eq!(b.lambda, Some(0.0));
    }

    #[test]
    fn label_term_favors_the_pool_representative() {
        // Atoms 0 and 1 look identical to the kernel (independent, unit
        // variance). Atom 0 is pure class 1; atom 1 matches the mean of the
        // pool it would leave behind.
        let k = identity(4);
        let d = vec![
            dist(&[1.0, 0.0]),
            dist(&[0.25, 0.75]),
            dist(&[0.0, 1.0]),
            dist(&[0.0, 1.0]),
        ];
        let t = select_mmi2(&k, &d, 1, Some(10.0), Evaluation::Dense).unwrap();
        assert_eq!(t.atoms, vec![1]);
        // Hand evaluation of both label gains with D* empty (uniform).
        let gain = |y: usize| {
            let p = d[y].probabilities();
            let rest: Vec<f64> = (0..2)
                .map(|c| (0..4).filter(|&i| i != y).map(|i| d[i].probabilities()[c]).sum::<f64>() / 3.0)
                .collect();
            label_cond_entropy_raw(p, &[0.5, 0.5]) - label_cond_entropy_raw(p, &rest)
        };
        assert!(gain(1) > gain(0));
        assert!((t.objective[0] - 10.0 * gain(1)).abs() < 1e-12);
    }

    #[test]
    fn single_class_labels_do_not_change_mmi1() {
        let k = kern(&[1.0, 0.3, 0.2, 0.3, 2.0, 0.4, 0.2, 0.4, 1.5], 3);
        let d = vec![dist(&[1.0]); 3];
        let a = select_mmi1(&k, 2, Evaluation::Dense).unwrap();
        let b = select_mmi2(&k, &d, 2, Some(3.0), Evaluation::Dense).unwrap();
        assert_eq!(a.atoms, b.atoms);
    }

    #[test]
    fn lambda_estimation() {
        let k = kern(&[1.0, 0.5, 0.5, 1.0], 2);
        let p = dist(&[0.3, 0.7]);
        let d = vec![p.clone(), p.clone()];
        let lambda = estimate_lambda(&k, &d, Evaluation::Dense).unwrap();
        let label = label_cond_entropy_raw(p.probabilities(), &[0.5, 0.5])
            - label_cond_entropy_raw(p.probabilities(), p.probabilities());
        let app = 0.5 * (1.0f64.ln() - 0.75f64.ln());
        assert!((lambda - label / app).abs() < 1e-12);

        let single = vec![dist(&[1.0]); 2];
        assert_eq!(estimate_lambda(&k, &single, Evaluation::Dense).unwrap(), 0.0);
        assert!(matches!(
            estimate_lambda(&identity(2), &single, Evaluation::Dense),
            Err(Error::DegenerateKernel)
        ));
    }

    #[test]
    fn estimated_lambda_is_used_when_absent() {
        let k = kern(&[1.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 1.0], 3);
        let d = vec![dist(&[0.9, 0.1]), dist(&[0.5, 0.5]), dist(&[0.1, 0.9])];
        let lambda = estimate_lambda(&k, &d, Evaluation::Dense).unwrap();
        let t = select_mmi2(&k, &d, 2, None, Evaluation::Dense).unwrap();
        assert_eq!(t.lambda, Some(lambda));
    }
}
