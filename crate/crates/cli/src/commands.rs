use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mmidict::gp::kernel_from_codes;
use mmidict::io;
use mmidict::labeldist::atom_class_dist;
use mmidict::numcore::{rng_from_seed, FeatureDataset};
use mmidict::pursuit::{ksvd_train, omp_encode, KsvdConfig};
use mmidict::recognize::{
    classify_sequences, compactness_histogram, encode_sequences, group_folds, purity_histogram, ClassifyOptions,
    Prediction,
};
use mmidict::select::{
    atom_priors, estimate_lambda, select_kmeans, select_me, select_mmi1, select_mmi2, select_mmi3, Method,
};
use mmidict::summarize::{coverage_diversity_report, summarize_dataset, SummarizeOptions};
use mmidict::synth;
use mmidict::{Dictionary, Evaluation, SparseCodeTable};

use crate::args::*;
use crate::config::{LambdaMode, RunConfig, Settings};

/// Bad input detected by the front end itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("input file not found: {}", path.display())));
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<()> {
    if dir.is_file() {
        return Err(usage(format!("output path is a file: {}", dir.display())));
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn agg_name(a: AggArg) -> String {
    format!("{a:?}").to_lowercase()
}

pub fn run(cmd: &Command) -> Result<()> {
    let settings = match cmd {
        Command::Train(a) => train(a)?,
        Command::Select(a) => select(a)?,
        Command::Encode(a) => encode(a)?,
        Command::Classify(a) => classify(a)?,
        Command::Summarize(a) => summarize(a)?,
        Command::Eval(a) => eval(a)?,
        Command::Gen(a) => gen(a)?,
    };
    let mut invocation = cmd.clone();
    let out = invocation.out_mut().clone();
    RunConfig::new(invocation, settings).write(&out)
}

fn all_labeled(labels: &[Option<usize>]) -> bool {
    labels.iter().all(Option::is_some)
}

fn train(a: &TrainArgs) -> Result<Settings> {
    require_file(&a.features)?;
    if a.atoms == 0 || a.sparsity == 0 || a.iters == 0 {
        return Err(usage("--atoms, --sparsity and --iters must be positive"));
    }
    if a.sparsity > a.atoms {
        return Err(usage(format!("--sparsity {} exceeds --atoms {}", a.sparsity, a.atoms)));
    }
    let data = io::read_features(&a.features)?;
    let flat = data.flatten()?;
    prepare_out(&a.out)?;

    let cfg = KsvdConfig {
        iters: a.iters,
        min_improvement: a.min_improvement,
        ..KsvdConfig::new(a.atoms, a.sparsity)
    };
    let model = ksvd_train(&flat.signals, &cfg, &mut rng_from_seed(a.seed))?;
    let mut dict = model.dictionary;
    if all_labeled(&flat.labels) {
        let dists = atom_class_dist(&model.codes, &flat.labels, flat.classes(), a.agg.into())?;
        dict = dict.with_class_dist(dists)?;
    }
    io::write_dictionary(a.out.join("dict.csv"), &dict)?;
    io::write_codes(a.out.join("codes.csv"), &model.codes, &flat.keys())?;
    io::write_error_history(a.out.join("error_history.csv"), &model.error_history)?;
    if let (Some(first), Some(last)) = (model.error_history.first(), model.error_history.last()) {
        println!(
            "trained {} atoms over {} signals in {} iterations, RMSE {first:.6} -> {last:.6}",
            a.atoms,
            flat.signals.cols(),
            model.error_history.len()
        );
    }
    Ok(Settings {
        seed: Some(a.seed),
        sparsity: Some(a.sparsity),
        initial_atoms: Some(a.atoms),
        aggregation: Some(agg_name(a.agg)),
        ..Default::default()
    })
}

/// Reads the codes of `data` against a dictionary of `atoms` atoms.
fn read_codes_for(path: &Path, data: &FeatureDataset, atoms: usize) -> Result<(mmidict::Flattened, SparseCodeTable)> {
    let flat = data.flatten()?;
    let codes = io::read_codes(path, &flat.keys(), atoms)?;
    Ok((flat, codes))
}

fn select(a: &SelectArgs) -> Result<Settings> {
    for p in [&a.dict, &a.codes, &a.features] {
        require_file(p)?;
    }
    let method: Method = a.method.into();
    let dict = io::read_dictionary(&a.dict)?;
    let size = dict.size();
    let valid = match method {
        Method::Me | Method::Kmeans => (1..=size).contains(&a.k),
        Method::Mmi1 | Method::Mmi2 => (1..size).contains(&a.k),
        Method::Mmi3 => (2..size).contains(&a.k),
    };
    if !valid {
        return Err(usage(format!(
            "--k {} is out of range for {method} on {size} atoms",
            a.k
        )));
    }
    if let Some(l) = a.lambda {
        if method != Method::Mmi2 {
            return Err(usage("--lambda only applies to --method mmi2"));
        }
        if !(l.is_finite() && l >= 0.0) {
            return Err(usage(format!("--lambda must be a finite non-negative number, got {l}")));
        }
    }
    let data = io::read_features(&a.features)?;
    let (flat, codes) = read_codes_for(&a.codes, &data, size)?;
    let needs_labels = matches!(method, Method::Mmi2 | Method::Mmi3);
    if needs_labels && !all_labeled(&flat.labels) {
        return Err(usage(format!("--method {method} needs every feature row labeled")));
    }
    prepare_out(&a.out)?;

    let eval = if a.dense { Evaluation::Dense } else { Evaluation::Sparse };
    let dists = if all_labeled(&flat.labels) {
        Some(atom_class_dist(&codes, &flat.labels, flat.classes(), a.agg.into())?)
    } else {
        None
    };
    let labeled = match &dists {
        Some(d) => dict.clone().with_class_dist(d.clone())?,
        None => dict.clone(),
    };
    let mut settings = Settings {
        initial_atoms: Some(size),
        target_atoms: Some(a.k),
        ..Default::default()
    };

    let chosen: Dictionary = match method {
        Method::Kmeans => {
            settings.seed = Some(a.seed);
            select_kmeans(&dict, a.k, &mut rng_from_seed(a.seed))?
        }
        Method::Mmi3 => {
            let dists = dists.expect("labels checked above");
            let priors = atom_priors(&codes, a.prior.into());
            let out = select_mmi3(&labeled, &dists, &priors, a.k)?;
            let mut text = String::from("step,kept,absorbed,loss\n");
            for (i, m) in out.merges.iter().enumerate() {
                writeln!(text, "{},{},{},{}", i + 1, m.kept, m.absorbed, m.loss)?;
            }
            io::write_text(a.out.join("merges.csv"), &text)?;
            settings.aggregation = Some(agg_name(a.agg));
            settings.prior = Some(format!("{:?}", a.prior).to_lowercase());
            out.dictionary
        }
        Method::Me | Method::Mmi1 | Method::Mmi2 => {
            let kern = kernel_from_codes(&codes, a.kernel.params())?;
            let mut trace = match method {
                Method::Me => select_me(&kern, a.k, eval)?,
                Method::Mmi1 => select_mmi1(&kern, a.k, eval)?,
                _ => {
                    let dists = dists.as_deref().expect("labels checked above");
                    let lambda = match a.lambda {
                        Some(l) => LambdaMode::Fixed(l),
                        None => LambdaMode::Estimated(estimate_lambda(&kern, dists, eval)?),
                    };
                    let value = match lambda {
                        LambdaMode::Fixed(v) | LambdaMode::Estimated(v) => v,
                    };
                    settings.lambda = Some(lambda);
                    settings.aggregation = Some(agg_name(a.agg));
                    select_mmi2(&kern, dists, a.k, Some(value), eval)?
                }
            };
            if !a.timing {
                trace.seconds.clear();
            }
            io::write_trace(a.out.join("trace.csv"), &trace)?;
            settings.threshold = Some(a.kernel.threshold);
            settings.jitter = Some(a.kernel.jitter);
            settings.evaluation = Some(format!("{eval:?}").to_lowercase());
            labeled.subset(&trace.atoms)?
        }
    };
    io::write_dictionary(a.out.join("dict.csv"), &chosen)?;
    println!("{method}: kept {} of {size} atoms", chosen.size());
    Ok(settings)
}

fn encode(a: &EncodeArgs) -> Result<Settings> {
    require_file(&a.dict)?;
    require_file(&a.features)?;
    let dict = io::read_dictionary(&a.dict)?;
    if a.sparsity == 0 || a.sparsity > dict.size() {
        return Err(usage(format!("--sparsity must be in 1..={}", dict.size())));
    }
    let data = io::read_features(&a.features)?;
    let flat = data.flatten()?;
    if flat.signals.rows() != dict.dim() {
        return Err(usage(format!(
            "features have dimension {}, dictionary has {}",
            flat.signals.rows(),
            dict.dim()
        )));
    }
    prepare_out(&a.out)?;
    let codes = omp_encode(&dict, &flat.signals, a.sparsity)?;
    io::write_codes(a.out.join("codes.csv"), &codes, &flat.keys())?;
    Ok(Settings {
        sparsity: Some(a.sparsity),
        ..Default::default()
    })
}

fn classify(a: &ClassifyArgs) -> Result<Settings> {
    require_file(&a.dict)?;
    require_file(&a.train)?;
    if let Some(t) = &a.test {
        require_file(t)?;
    }
    if a.knn == 0 {
        return Err(usage("--knn must be positive"));
    }
    let dict = io::read_dictionary(&a.dict)?;
    if a.sparsity == 0 || a.sparsity > dict.size() {
        return Err(usage(format!("--sparsity must be in 1..={}", dict.size())));
    }
    let train = io::read_features(&a.train)?;
    let test = a.test.as_ref().map(io::read_features).transpose()?;
    for d in std::iter::once(&train).chain(test.as_ref()) {
        if d.dim() != dict.dim() {
            return Err(usage(format!(
                "features have dimension {}, dictionary has {}",
                d.dim(),
                dict.dim()
            )));
        }
    }
    if train.sequences().iter().any(|s| s.label.is_none()) {
        return Err(usage("every training sequence needs a label"));
    }
    if a.by_group && train.sequences().iter().any(|s| s.group.is_none()) {
        return Err(usage("--by-group needs a group value on every training sequence"));
    }
    prepare_out(&a.out)?;

    let opts = ClassifyOptions {
        scheme: a.scheme.into(),
        k_nn: a.knn,
        dtw_absolute: a.dtw_abs,
    };
    let train_codes = encode_sequences(&dict, &train, a.sparsity)?;
    let mut rows: Vec<(String, Option<usize>, Prediction)> = Vec::new();
    let mut folds: Vec<(String, usize, usize)> = Vec::new();
    let mut score = |fold: String, preds: Vec<Prediction>, test: &[mmidict::recognize::CodeSequence]| {
        let right = preds.iter().zip(test).filter(|(p, s)| Some(p.label) == s.label).count();
        folds.push((fold, right, test.len()));
        rows.extend(test.iter().zip(preds).map(|(s, p)| (s.id.clone(), s.label, p)));
    };
    match &test {
        Some(test) => {
            let test_codes = encode_sequences(&dict, test, a.sparsity)?;
            score(
                "all".into(),
                classify_sequences(&train_codes, &test_codes, opts)?,
                &test_codes,
            );
        }
        None => {
            for (group, train_idx, test_idx) in group_folds(&train) {
                if train_idx.is_empty() {
                    bail!(usage("--by-group needs at least two groups"));
                }
                let pick = |idx: &[usize]| idx.iter().map(|&i| train_codes[i].clone()).collect::<Vec<_>>();
                let (fit, held) = (pick(&train_idx), pick(&test_idx));
                score(group, classify_sequences(&fit, &held, opts)?, &held);
            }
        }
    }
    io::write_predictions(a.out.join("predictions.csv"), &rows)?;

    let labeled = rows.iter().filter(|r| r.1.is_some()).count();
    let mut text = String::from("fold,correct,total,accuracy\n");
    let (mut right, mut total) = (0, 0);
    for (fold, r, t) in &folds {
        writeln!(text, "{fold},{r},{t},{}", *r as f64 / *t as f64)?;
        right += r;
        total += t;
    }
    if folds.len() > 1 {
        writeln!(text, "all,{right},{total},{}", right as f64 / total as f64)?;
    }
    io::write_text(a.out.join("accuracy.csv"), &text)?;
    if labeled > 0 {
        println!("accuracy {right}/{labeled} = {:.4}", right as f64 / labeled as f64);
    } else {
        println!("classified {} unlabeled sequences", rows.len());
    }
    Ok(Settings {
        sparsity: Some(a.sparsity),
        target_atoms: Some(dict.size()),
        scheme: Some(format!("{:?}", a.scheme).to_lowercase()),
        knn: Some(a.knn),
        dtw_metric: (a.scheme == SchemeArg::Dtw)
            .then(|| if a.dtw_abs { "euclidean-abs" } else { "euclidean" }.to_string()),
        ..Default::default()
    })
}

fn summarize(a: &SummarizeArgs) -> Result<Settings> {
    require_file(&a.features)?;
    let data = io::read_features(&a.features)?;
    if let Some(s) = data.sequences().iter().find(|s| a.k == 0 || a.k >= s.len()) {
        return Err(usage(format!(
            "--k {} must be in 1..{} for sequence {} ({} frames)",
            a.k,
            s.len(),
            s.id,
            s.len()
        )));
    }
    prepare_out(&a.out)?;
    let opts = SummarizeOptions {
        normalize: !a.no_normalize,
        evaluation: if a.sparse {
            Evaluation::Sparse
        } else {
            Evaluation::Dense
        },
        params: a.kernel.params(),
    };
    let summaries = summarize_dataset(&data, a.k, opts)?;
    io::write_summaries(a.out.join("summaries.csv"), &data, &summaries)?;
    let mut text = String::from("seq,mean_pairwise_distance,mean_nearest_distance\n");
    for (s, seq) in summaries.iter().zip(data.sequences()) {
        let (div, cov) = coverage_diversity_report(s, &seq.frame_matrix()?)?;
        writeln!(text, "{},{div},{cov}", s.sequence_id)?;
    }
    io::write_text(a.out.join("report.csv"), &text)?;
    println!("summarized {} sequences with {} frames each", summaries.len(), a.k);
    Ok(Settings {
        target_atoms: Some(a.k),
        threshold: Some(a.kernel.threshold),
        jitter: Some(a.kernel.jitter),
        evaluation: Some(format!("{:?}", opts.evaluation).to_lowercase()),
        ..Default::default()
    })
}

fn eval(a: &EvalArgs) -> Result<Settings> {
    for p in [&a.dict, &a.codes, &a.features] {
        require_file(p)?;
    }
    let dict = io::read_dictionary(&a.dict)?;
    if dict.size() < 2 {
        return Err(usage("compactness needs at least two atoms"));
    }
    let data = io::read_features(&a.features)?;
    let (flat, codes) = read_codes_for(&a.codes, &data, dict.size())?;
    if !all_labeled(&flat.labels) {
        return Err(usage("purity needs every feature row labeled"));
    }
    prepare_out(&a.out)?;
    let dists = atom_class_dist(&codes, &flat.labels, flat.classes(), a.agg.into())?;
    let purity = purity_histogram(&dists)?;
    let compact = compactness_histogram(&dict)?;
    io::write_histogram(a.out.join("purity.csv"), &purity)?;
    io::write_histogram(a.out.join("compactness.csv"), &compact)?;
    println!(
        "purity mass >= 0.6: {:.3}; compactness mass >= 0.8: {:.3}",
        purity.mass_at_or_above(0.6),
        compact.mass_at_or_above(0.8)
    );
    Ok(Settings {
        target_atoms: Some(dict.size()),
        aggregation: Some(agg_name(a.agg)),
        ..Default::default()
    })
}

fn gen(a: &GenArgs) -> Result<Settings> {
    if a.sequences == 0 {
        return Err(usage("--sequences must be positive"));
    }
    prepare_out(&a.out)?;
    let mut rng = rng_from_seed(a.seed);
    let data = match a.kind {
        GenKind::Mixture => synth::attribute_mixture(&synth::MixtureParams::default(), &mut rng),
        GenKind::Actions => synth::action_sequences(&synth::ActionParams::default(), &mut rng),
        GenKind::Clusters => {
            let mut text = String::from("seq,frame,cluster\n");
            let mut sequences = Vec::with_capacity(a.sequences);
            for s in 0..a.sequences {
                let planted = synth::planted_clusters(10, 10, 20, 0.05, &mut rng);
                let id = format!("set{:03}", s + 1);
                for (f, c) in planted.cluster.iter().enumerate() {
                    writeln!(text, "{id},{f},{c}")?;
                }
                sequences.push(mmidict::Sequence::new(id, None, planted.frames.columns()));
            }
            io::write_text(a.out.join("clusters.csv"), &text)?;
            FeatureDataset::new(sequences)?
        }
    };
    io::write_features(a.out.join("features.csv"), &data)?;
    println!(
        "wrote {} sequences, {} frames",
        data.sequences().len(),
        data.signal_count()
    );
    Ok(Settings {
        seed: Some(a.seed),
        ..Default::default()
    })
}
