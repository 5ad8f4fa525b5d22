//! Multinomial naive Bayes: parameter estimation with additive smoothing,
//! MAP classification over sparse documents, feature-restricted model views,
//! and the plain-text model file format (`N M alpha` header, N priors, then
//! N rows of M cell probabilities).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::{LabeledCorpus, SparseDocument};

#[derive(Debug, Error)]
pub enum MnbError {
    #[error("alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error("degenerate model: class {class} has zero mass on feature {feature} with alpha = 0")]
    DegenerateModel { class: usize, feature: usize },
    #[error("class {class} has zero probability mass on the selected feature set")]
    ZeroMassRestriction { class: usize },
    #[error("selected feature list is empty")]
    EmptySelection,
    #[error("feature index {index} out of range for {len} features")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate feature index {index}")]
    DuplicateIndex { index: usize },
    #[error("cell probability row {class} sums to {sum}, expected 1 within 1e-9")]
    RowNotNormalized { class: usize, sum: f64 },
    #[error("priors sum to {0}, expected 1")]
    PriorsNotNormalized(f64),
    #[error("model dimensions inconsistent: {0}")]
    Shape(String),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-class multinomial cell probabilities plus class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct MnbModel {
    cell_probs: Vec<Vec<f64>>,
    log_cell_probs: Vec<Vec<f64>>,
    priors: Vec<f64>,
    class_names: Vec<String>,
    alpha: f64,
}

impl MnbModel {
    /// Assembles a model from explicit parameters, validating row and prior
    /// normalization. Log probabilities are derived (`ln 0 = -inf` allowed).
    pub fn from_parts(
        cell_probs: Vec<Vec<f64>>,
        priors: Vec<f64>,
        class_names: Vec<String>,
        alpha: f64,
    ) -> Result<Self, MnbError> {
        let n = cell_probs.len();
        if n == 0 {
            return Err(MnbError::Shape("no classes".into()));
        }
        if priors.len() != n || class_names.len() != n {
            return Err(MnbError::Shape(format!(
                "{} rows, {} priors, {} class names",
                n,
                priors.len(),
                class_names.len()
            )));
        }
        let m = cell_probs[0].len();
        for (i, row) in cell_probs.iter().enumerate() {
            if row.len() != m {
                return Err(MnbError::Shape(format!("row {i} has {} cells, expected {m}", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(MnbError::RowNotNormalized { class: i, sum });
            }
        }
        let prior_sum: f64 = priors.iter().sum();
        if (prior_sum - 1.0).abs() > 1e-9 {
            return Err(MnbError::PriorsNotNormalized(prior_sum));
        }
        let log_cell_probs = cell_probs
            .iter()
            .map(|row| row.iter().map(|&p| p.ln()).collect())
            .collect();
        Ok(Self { cell_probs, log_cell_probs, priors, class_names, alpha })
    }

    pub fn n_classes(&self) -> usize {
        self.cell_probs.len()
    }

    pub fn n_features(&self) -> usize {
        self.cell_probs[0].len()
    }

    pub fn cell_probs(&self) -> &[Vec<f64>] {
        &self.cell_probs
    }

    pub fn log_cell_probs(&self) -> &[Vec<f64>] {
        &self.log_cell_probs
    }

    /// Cell-probability row for one class.
    pub fn theta(&self, class: usize) -> &[f64] {
        &self.cell_probs[class]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Estimates cell probabilities with additive smoothing
/// `p_im = (alpha + count_im) / (alpha * M + count_i)` and priors as
/// document-count ratios. `alpha = 0` is pure MLE and requires every
/// class-term count to be positive.
pub fn estimate_params(corpus: &LabeledCorpus, alpha: f64) -> Result<MnbModel, MnbError> {
    if alpha < 0.0 {
        return Err(MnbError::NegativeAlpha(alpha));
    }
    let n = corpus.n_classes();
    let m = corpus.n_features();

    let mut counts = vec![vec![0u64; m]; n];
    let mut class_totals = vec![0u64; n];
    for (doc, &label) in corpus.docs().iter().zip(corpus.labels()) {
        for &(idx, c) in doc.entries() {
            counts[label][idx] += u64::from(c);
        }
        class_totals[label] += doc.total_count();
    }

    let mut cell_probs = Vec::with_capacity(n);
    for i in 0..n {
        if alpha == 0.0 {
            if let Some(f) = counts[i].iter().position(|&c| c == 0) {
                return Err(MnbError::DegenerateModel { class: i, feature: f });
            }
        }
        let denom = alpha * m as f64 + class_totals[i] as f64;
        let row: Vec<f64> = counts[i].iter().map(|&c| (alpha + c as f64) / denom).collect();
        cell_probs.push(row);
    }

    let n_docs = corpus.n_docs() as f64;
    let priors: Vec<f64> = corpus
        .class_doc_counts()
        .iter()
        .map(|&c| c as f64 / n_docs)
        .collect();

    let log_cell_probs = cell_probs
        .iter()
        .map(|row| row.iter().map(|&p| p.ln()).collect())
        .collect();

    Ok(MnbModel {
        cell_probs,
        log_cell_probs,
        priors,
        class_names: corpus.class_names().to_vec(),
        alpha,
    })
}

/// MAP classification: `score_i = sum_m x_m ln p_im + ln p(c_i)` over the
/// document's sparse entries. Returns the argmax class (ties broken by lowest
/// index) and the full log-score vector. An empty document falls back to the
/// prior argmax.
pub fn classify(model: &MnbModel, doc: &SparseDocument) -> (usize, Vec<f64>) {
    let m = model.n_features();
    if let Some(&(idx, _)) = doc.entries().last() {
        assert!(idx < m, "document feature {idx} out of range for model with {m} features");
    }
    let scores: Vec<f64> = (0..model.n_classes())
        .map(|i| {
            let log_row = &model.log_cell_probs[i];
            let likelihood: f64 = doc
                .entries()
                .iter()
                .map(|&(idx, c)| f64::from(c) * log_row[idx])
                .sum();
            likelihood + model.priors[i].ln()
        })
        .collect();
    (argmax(&scores), scores)
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Restricts a model to `selected` features, renormalizing each class row
/// over the kept cells. Priors are unchanged. Retraining-free counterpart to
/// restricting the corpus and re-estimating.
pub fn restrict_model(model: &MnbModel, selected: &[usize]) -> Result<MnbModel, MnbError> {
    if selected.is_empty() {
        return Err(MnbError::EmptySelection);
    }
    let m = model.n_features();
    let mut seen = std::collections::HashSet::with_capacity(selected.len());
    for &idx in selected {
        if idx >= m {
            return Err(MnbError::IndexOutOfRange { index: idx, len: m });
        }
        if !seen.insert(idx) {
            return Err(MnbError::DuplicateIndex { index: idx });
        }
    }
    let mut cell_probs = Vec::with_capacity(model.n_classes());
    for (i, row) in model.cell_probs.iter().enumerate() {
        let mass: f64 = selected.iter().map(|&s| row[s]).sum();
        if mass <= 0.0 {
            return Err(MnbError::ZeroMassRestriction { class: i });
        }
        cell_probs.push(selected.iter().map(|&s| row[s] / mass).collect());
    }
    let log_cell_probs = cell_probs
        .iter()
        .map(|row: &Vec<f64>| row.iter().map(|&p| p.ln()).collect())
        .collect();
    Ok(MnbModel {
        cell_probs,
        log_cell_probs,
        priors: model.priors.clone(),
        class_names: model.class_names.clone(),
        alpha: model.alpha,
    })
}

/// Writes the plain-text model file. Floats use shortest round-trip decimal
/// formatting, so `load_model(save_model(m))` reproduces the parameters
/// exactly.
pub fn save_model(model: &MnbModel, path: &Path) -> Result<(), MnbError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {} {}", model.n_classes(), model.n_features(), model.alpha)?;
    let priors: Vec<String> = model.priors.iter().map(|p| p.to_string()).collect();
    writeln!(w, "{}", priors.join(" "))?;
    for row in &model.cell_probs {
        let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        writeln!(w, "{}", cells.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the plain-text model file. Class names are positional (`c0..c(N-1)`);
/// the format does not carry them.
pub fn load_model(path: &Path) -> Result<MnbModel, MnbError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| MnbError::Parse { line: 1, msg: "missing header".into() })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(MnbError::Parse { line: 1, msg: "header must be `N M alpha`".into() });
    }
    let n: usize = parts[0]
        .parse()
        .map_err(|_| MnbError::Parse { line: 1, msg: format!("bad N {:?}", parts[0]) })?;
    let m: usize = parts[1]
        .parse()
        .map_err(|_| MnbError::Parse { line: 1, msg: format!("bad M {:?}", parts[1]) })?;
    let alpha: f64 = parts[2]
        .parse()
        .map_err(|_| MnbError::Parse { line: 1, msg: format!("bad alpha {:?}", parts[2]) })?;

    let parse_row = |line_no: usize, line: &str, expected: usize| -> Result<Vec<f64>, MnbError> {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| MnbError::Parse { line: line_no, msg: e.to_string() })?;
        if row.len() != expected {
            return Err(MnbError::Parse {
                line: line_no,
                msg: format!("expected {expected} values, got {}", row.len()),
            });
        }
        Ok(row)
    };

    let (i, prior_line) = lines
        .next()
        .ok_or_else(|| MnbError::Parse { line: 2, msg: "missing priors".into() })?;
    let priors = parse_row(i + 1, prior_line, n)?;

    let mut cell_probs = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, row_line) = lines.next().ok_or_else(|| MnbError::Parse {
            line: cell_probs.len() + 3,
            msg: "missing probability row".into(),
        })?;
        cell_probs.push(parse_row(i + 1, row_line, m)?);
    }

    // Lenient normalization gate on loaded files; in-process constructors
    // enforce the tighter 1e-9 invariant.
    for (i, row) in cell_probs.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(MnbError::RowNotNormalized { class: i, sum });
        }
    }
    let prior_sum: f64 = priors.iter().sum();
    if (prior_sum - 1.0).abs() > 1e-6 {
        return Err(MnbError::PriorsNotNormalized(prior_sum));
    }

    let log_cell_probs = cell_probs
        .iter()
        .map(|row: &Vec<f64>| row.iter().map(|&p| p.ln()).collect())
        .collect();
    let class_names = (0..n).map(|i| format!("c{i}")).collect();
    Ok(MnbModel { cell_probs, log_cell_probs, priors, class_names, alpha })
}
