//! CSV reading and writing for every file the pipeline consumes or emits.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical to the one written.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::error::{Error, Result};
use crate::labeldist::ClassDistribution;
use crate::numcore::{FeatureDataset, Sequence};
use crate::pursuit::{Dictionary, SparseCodeTable};
use crate::recognize::{Histogram, Prediction};
use crate::select::SelectionTrace;
use crate::summarize::Summary;

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Rows of a CSV file with their 1-based line numbers.
fn read_rows(path: &Path) -> Result<(StringRecord, Vec<(u64, StringRecord)>)> {
    let mut reader = ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Csv(e),
            _ => parse_error(path, 1, e.to_string()),
        })?;
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if header.iter().all(str::is_empty) {
        return Err(parse_error(path, 1, "missing header row"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push((line, rec));
    }
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &StringRecord, i: usize, what: &str) -> Result<T> {
    let raw = &rec[i];
    raw.parse()
        .map_err(|_| parse_error(path, line, format!("{what}: cannot parse {raw:?}")))
}

fn float(path: &Path, line: u64, rec: &StringRecord, i: usize, what: &str) -> Result<f64> {
    let v: f64 = field(path, line, rec, i, what)?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("{what}: non-finite value")));
    }
    Ok(v)
}

/// Checks that header columns `from..` are named `prefix0, prefix1, ...`
/// (or `prefix1, ...` when `one_based`).
fn numbered_columns(path: &Path, header: &StringRecord, from: usize, prefix: &str, one_based: bool) -> Result<usize> {
    let count = header.len().saturating_sub(from);
    if count == 0 {
        return Err(parse_error(path, 1, format!("no {prefix}* columns")));
    }
    for (k, name) in header.iter().skip(from).enumerate() {
        let want = format!("{prefix}{}", if one_based { k + 1 } else { k });
        if name != want {
            return Err(parse_error(
                path,
                1,
                format!("expected column {want:?}, found {name:?}"),
            ));
        }
    }
    Ok(count)
}

fn expect_header(path: &Path, header: &StringRecord, names: &[&str]) -> Result<()> {
    for (i, &want) in names.iter().enumerate() {
        if header.get(i) != Some(want) {
            return Err(parse_error(
                path,
                1,
                format!(
                    "expected column {want:?} at position {}, found {:?}",
                    i + 1,
                    header.get(i)
                ),
            ));
        }
    }
    Ok(())
}

/// Reads a feature table: `seq,frame,label[,group],f0,...`. Rows of one
/// sequence must carry strictly increasing frame numbers and one label.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["seq", "frame", "label"])?;
    let has_group = header.get(3) == Some("group");
    let first_feature = if has_group { 4 } else { 3 };
    let dim = numbered_columns(path, &header, first_feature, "f", false)?;
    if rows.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }

    let mut order: Vec<Sequence> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    for (line, rec) in &rows {
        let line = *line;
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty sequence id"));
        }
        let frame: u64 = field(path, line, rec, 1, "frame")?;
        let label = match &rec[2] {
            "" => None,
            raw => {
                let l: usize = field(path, line, rec, 2, "label")?;
                if l == 0 {
                    return Err(parse_error(path, line, format!("label must be >= 1, found {raw}")));
                }
                Some(l)
            }
        };
        let group = has_group.then(|| rec[3].to_string()).filter(|g| !g.is_empty());
        let features = (0..dim)
            .map(|k| float(path, line, rec, first_feature + k, &format!("f{k}")))
            .collect::<Result<Vec<_>>>()?;
        let slot = *lookup.entry(id.clone()).or_insert_with(|| {
            order.push(Sequence {
                id: id.clone(),
                label,
                group: group.clone(),
                frame_numbers: Vec::new(),
                frames: Vec::new(),
            });
            order.len() - 1
        });
        let seq = &mut order[slot];
        if seq.label != label {
            return Err(parse_error(path, line, format!("sequence {id} changes label")));
        }
        if seq.group != group {
            return Err(parse_error(path, line, format!("sequence {id} changes group")));
        }
        if seq.frame_numbers.last().is_some_and(|&f| frame <= f) {
            return Err(parse_error(
                path,
                line,
                format!("frame {frame} of sequence {id} is not after the previous frame"),
            ));
        }
        seq.frame_numbers.push(frame);
        seq.frames.push(features);
    }
    FeatureDataset::new(order)
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(WriterBuilder::new().from_path(path)?)
}

pub fn write_features(path: impl AsRef<Path>, data: &FeatureDataset) -> Result<()> {
    let path = path.as_ref();
    let has_group = data.sequences().iter().any(|s| s.group.is_some());
    let mut w = writer(path)?;
    let mut header = vec!["seq".to_string(), "frame".into(), "label".into()];
    if has_group {
        header.push("group".into());
    }
    header.extend((0..data.dim()).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for s in data.sequences() {
        for (num, f) in s.frame_numbers.iter().zip(&s.frames) {
            let mut row = vec![
                s.id.clone(),
                num.to_string(),
                s.label.map_or(String::new(), |l| l.to_string()),
            ];
            if has_group {
                row.push(s.group.clone().unwrap_or_default());
            }
            row.extend(f.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `<stem>.<tag>.csv` next to `path`.
pub fn sidecar_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.csv"))
}

/// Writes the atoms, plus `.classdist` and `.prior` sidecars when present.
pub fn write_dictionary(path: impl AsRef<Path>, dict: &Dictionary) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = vec!["atom".to_string()];
    header.extend((0..dict.dim()).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for k in 0..dict.size() {
        let mut row = vec![k.to_string()];
        row.extend(dict.atom(k).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    let classdist = sidecar_path(path, "classdist");
    if let Some(dists) = dict.class_dist() {
        write_class_dist(&classdist, dists)?;
    } else if classdist.exists() {
        std::fs::remove_file(&classdist)?;
    }
    let prior = sidecar_path(path, "prior");
    if let Some(p) = dict.atom_prior() {
        let mut w = writer(&prior)?;
        w.write_record(["atom", "prior"])?;
        for (k, v) in p.iter().enumerate() {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush()?;
    } else if prior.exists() {
        std::fs::remove_file(&prior)?;
    }
    Ok(())
}

pub fn write_class_dist(path: impl AsRef<Path>, dists: &[ClassDistribution]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    let m = dists.first().map_or(0, |d| d.classes());
    let mut header = vec!["atom".to_string()];
    header.extend((1..=m).map(|c| format!("p{c}")));
    w.write_record(&header)?;
    for (k, d) in dists.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(d.probabilities().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Checks that the first column counts `0, 1, 2, ...`.
fn check_atom_index(path: &Path, line: u64, rec: &StringRecord, expected: usize) -> Result<()> {
    let k: usize = field(path, line, rec, 0, "atom")?;
    if k != expected {
        return Err(parse_error(path, line, format!("expected atom {expected}, found {k}")));
    }
    Ok(())
}

/// Reads a dictionary and any `.classdist` / `.prior` sidecars next to it.
pub fn read_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["atom"])?;
    let dim = numbered_columns(path, &header, 1, "f", false)?;
    if rows.is_empty() {
        return Err(parse_error(path, 2, "dictionary has no atoms"));
    }
    let mut atoms = Vec::with_capacity(rows.len());
    for (k, (line, rec)) in rows.iter().enumerate() {
        check_atom_index(path, *line, rec, k)?;
        atoms.push(
            (0..dim)
                .map(|i| float(path, *line, rec, i + 1, &format!("f{i}")))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let mut dict = Dictionary::from_atoms(&atoms)?;
    let classdist = sidecar_path(path, "classdist");
    if classdist.exists() {
        dict = dict.with_class_dist(read_class_dist(&classdist)?)?;
    }
    let prior = sidecar_path(path, "prior");
    if prior.exists() {
        let (header, rows) = read_rows(&prior)?;
        expect_header(&prior, &header, &["atom", "prior"])?;
        let values = rows
            .iter()
            .enumerate()
            .map(|(k, (line, rec))| {
                check_atom_index(&prior, *line, rec, k)?;
                float(&prior, *line, rec, 1, "prior")
            })
            .collect::<Result<Vec<_>>>()?;
        dict = dict.with_atom_prior(values)?;
    }
    Ok(dict)
}

pub fn read_class_dist(path: impl AsRef<Path>) -> Result<Vec<ClassDistribution>> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["atom"])?;
    let m = numbered_columns(path, &header, 1, "p", true)?;
    rows.iter()
        .enumerate()
        .map(|(k, (line, rec))| {
            check_atom_index(path, *line, rec, k)?;
            let p = (0..m)
                .map(|c| float(path, *line, rec, c + 1, &format!("p{}", c + 1)))
                .collect::<Result<Vec<_>>>()?;
            ClassDistribution::new(p).map_err(|e| parse_error(path, *line, e.to_string()))
        })
        .collect()
}

/// Writes `seq,frame,atom,value` triplets; `keys` names every signal.
pub fn write_codes(path: impl AsRef<Path>, codes: &SparseCodeTable, keys: &[(String, u64)]) -> Result<()> {
    if keys.len() != codes.signal_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} keys for {} coded signals",
            keys.len(),
            codes.signal_count()
        )));
    }
    let mut w = writer(path.as_ref())?;
    w.write_record(["seq", "frame", "atom", "value"])?;
    for ((seq, frame), code) in keys.iter().zip(codes.signals()) {
        for &(a, v) in code {
            w.write_record([seq.clone(), frame.to_string(), a.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads triplets back into a table over `atoms` atoms, one signal per key
/// in `keys` order. Signals absent from the file get an empty code; the
/// sparsity bound is the largest support seen (at least 1).
pub fn read_codes(path: impl AsRef<Path>, keys: &[(String, u64)], atoms: usize) -> Result<SparseCodeTable> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["seq", "frame", "atom", "value"])?;
    let lookup: HashMap<(&str, u64), usize> = keys
        .iter()
        .enumerate()
        .map(|(j, (s, f))| ((s.as_str(), *f), j))
        .collect();
    let mut signals: Vec<Vec<(usize, f64)>> = vec![Vec::new(); keys.len()];
    for (line, rec) in &rows {
        let frame: u64 = field(path, *line, rec, 1, "frame")?;
        let Some(&j) = lookup.get(&(&rec[0], frame)) else {
            return Err(parse_error(
                path,
                *line,
                format!("unknown signal ({}, {frame})", &rec[0]),
            ));
        };
        let atom: usize = field(path, *line, rec, 2, "atom")?;
        if atom >= atoms {
            return Err(parse_error(
                path,
                *line,
                format!("atom {atom} outside dictionary of {atoms}"),
            ));
        }
        if signals[j].iter().any(|&(a, _)| a == atom) {
            return Err(parse_error(path, *line, format!("atom {atom} repeated for one signal")));
        }
        signals[j].push((atom, float(path, *line, rec, 3, "value")?));
    }
    let sparsity = signals.iter().map(Vec::len).max().unwrap_or(0).max(1);
    SparseCodeTable::new(atoms, sparsity, signals)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &SelectionTrace) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["step", "atom", "objective", "seconds"])?;
    for (i, &a) in trace.atoms.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            a.to_string(),
            trace.objective[i].to_string(),
            trace.seconds.get(i).map_or(String::new(), |s| s.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_error_history(path: impl AsRef<Path>, history: &[f64]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["iter", "rmse"])?;
    for (i, v) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per test sequence: id, true label (empty if unknown), prediction.
pub fn write_predictions(path: impl AsRef<Path>, rows: &[(String, Option<usize>, Prediction)]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["seq", "true_label", "predicted_label", "distance"])?;
    for (id, truth, p) in rows {
        w.write_record([
            id.clone(),
            truth.map_or(String::new(), |l| l.to_string()),
            p.label.to_string(),
            p.distance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram(path: impl AsRef<Path>, h: &Histogram) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["bin_low", "bin_high", "frequency"])?;
    for (lo, hi, f) in h.bins() {
        w.write_record([lo.to_string(), hi.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary rows sorted by frame; `frame` is the ingested frame number.
pub fn write_summaries(path: impl AsRef<Path>, data: &FeatureDataset, summaries: &[Summary]) -> Result<()> {
    let by_id: HashMap<&str, &Sequence> = data.sequences().iter().map(|s| (s.id.as_str(), s)).collect();
    let mut w = writer(path.as_ref())?;
    w.write_record(["seq", "rank", "frame", "diversity_term", "coverage_term"])?;
    for s in summaries {
        let seq = by_id
            .get(s.sequence_id.as_str())
            .ok_or_else(|| Error::invalid(format!("summary for unknown sequence {}", s.sequence_id)))?;
        for f in &s.frames {
            w.write_record([
                s.sequence_id.clone(),
                f.rank.to_string(),
                seq.frame_numbers[f.frame].to_string(),
                f.diversity.to_string(),
                f.coverage.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_kernel_dump(path: impl AsRef<Path>, entries: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["i", "j", "value"])?;
    for (i, j, v) in entries {
        w.write_record([i.to_string(), j.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes free text such as a run configuration.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let mut f = File::create(path.as_ref())?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
