//! The six comparison feature-selection metrics (DF, IG, Chi, RS, CET, NGL)
//! on binary document-presence statistics, and the sum / max / weighted
//! average global aggregation of per-class scores.
//!
//! All metrics except DF score a (feature, class) pair from the four joint
//! presence probabilities p(x,c), p(x,c̄), p(x̄,c), p(x̄,c̄). Cell counts are
//! optionally smoothed by adding `epsilon` to each of the four counts before
//! normalization (denominator `D + 4*epsilon`), which keeps Chi/NGL/RS finite
//! on degenerate tables.

use thiserror::Error;

use crate::corpus::LabeledCorpus;
use crate::fsmj::FeatureRanking;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("{metric} degenerate at feature {feature}, class {class}: zero denominator with nonzero numerator (epsilon = 0)")]
    DegenerateCell { metric: &'static str, feature: usize, class: usize },
    #[error("weights must have one entry per class: got {got}, expected {expected}")]
    WeightsLength { got: usize, expected: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Document-presence statistics per (feature, class), with smoothing epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    n_docs: usize,
    class_doc_counts: Vec<usize>,
    /// feature-major: presence[f * n_classes + c] = docs of class c containing f
    presence: Vec<u32>,
    doc_freq: Vec<u32>,
    epsilon: f64,
    n_features: usize,
    n_classes: usize,
}

/// The four smoothed joint probabilities of one (feature, class) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCells {
    pub p_xc: f64,
    pub p_xnc: f64,
    pub p_nxc: f64,
    pub p_nxnc: f64,
}

impl JointCells {
    pub fn p_x(&self) -> f64 {
        self.p_xc + self.p_xnc
    }

    pub fn p_c(&self) -> f64 {
        self.p_xc + self.p_nxc
    }
}

impl ContingencyTable {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Raw document frequency of a feature (unsmoothed).
    pub fn doc_freq(&self, feature: usize) -> u32 {
        self.doc_freq[feature]
    }

    /// Class priors as document-count ratios (unsmoothed).
    pub fn priors(&self) -> Vec<f64> {
        let d = self.n_docs as f64;
        self.class_doc_counts.iter().map(|&c| c as f64 / d).collect()
    }

    pub fn cells(&self, feature: usize, class: usize) -> JointCells {
        let e = self.epsilon;
        let denom = self.n_docs as f64 + 4.0 * e;
        let n_xc = f64::from(self.presence[feature * self.n_classes + class]);
        let n_x = f64::from(self.doc_freq[feature]);
        let n_c = self.class_doc_counts[class] as f64;
        let d = self.n_docs as f64;
        JointCells {
            p_xc: (n_xc + e) / denom,
            p_xnc: (n_x - n_xc + e) / denom,
            p_nxc: (n_c - n_xc + e) / denom,
            p_nxnc: (d - n_x - n_c + n_xc + e) / denom,
        }
    }
}

/// Counts document-level presence per (feature, class). Counts are smoothed
/// by `epsilon` only when cells are read.
pub fn build_contingency(corpus: &LabeledCorpus, epsilon: f64) -> ContingencyTable {
    assert!(epsilon >= 0.0, "epsilon must be non-negative");
    let n_features = corpus.n_features();
    let n_classes = corpus.n_classes();
    let mut presence = vec![0u32; n_features * n_classes];
    let mut doc_freq = vec![0u32; n_features];
    for (doc, &label) in corpus.docs().iter().zip(corpus.labels()) {
        for &(idx, _) in doc.entries() {
            presence[idx * n_classes + label] += 1;
            doc_freq[idx] += 1;
        }
    }
    ContingencyTable {
        n_docs: corpus.n_docs(),
        class_doc_counts: corpus.class_doc_counts(),
        presence,
        doc_freq,
        epsilon,
        n_features,
        n_classes,
    }
}

/// The six baseline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Df,
    Ig,
    Chi,
    Rs,
    Cet,
    Ngl,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Df,
        Metric::Ig,
        Metric::Chi,
        Metric::Rs,
        Metric::Cet,
        Metric::Ngl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Df => "df",
            Metric::Ig => "ig",
            Metric::Chi => "chi",
            Metric::Rs => "rs",
            Metric::Cet => "cet",
            Metric::Ngl => "ngl",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "df" => Ok(Metric::Df),
            "ig" => Ok(Metric::Ig),
            "chi" => Ok(Metric::Chi),
            "rs" => Ok(Metric::Rs),
            "cet" => Ok(Metric::Cet),
            "ngl" => Ok(Metric::Ngl),
            other => Err(format!("unknown metric {other:?} (expected df|ig|chi|rs|cet|ngl)")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-(feature, class) local scores for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    scores: Vec<f64>,
    metric: Metric,
    n_features: usize,
    n_classes: usize,
}

impl MetricMatrix {
    /// `scores` is feature-major: `scores[f * n_classes + c]`.
    pub fn new(scores: Vec<f64>, metric: Metric, n_features: usize, n_classes: usize) -> Self {
        assert_eq!(scores.len(), n_features * n_classes);
        Self { scores, metric, n_features, n_classes }
    }

    pub fn get(&self, feature: usize, class: usize) -> f64 {
        self.scores[feature * self.n_classes + class]
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}

/// `p * ln(p / denom)` with the 0 * ln 0 = 0 convention.
#[inline]
fn xlog_ratio(p: f64, denom: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / denom).ln()
    }
}

/// Scores every (feature, class) pair. Chi and NGL error on a zero
/// denominator with nonzero numerator, which only happens at epsilon = 0;
/// RS follows IEEE conventions (`ln(0/b) = -inf`, 0/0 cell pair scores 0).
pub fn score(table: &ContingencyTable, metric: Metric) -> Result<MetricMatrix, BaselineError> {
    let m = table.n_features();
    let n = table.n_classes();
    let mut scores = vec![0.0; m * n];
    for f in 0..m {
        for c in 0..n {
            scores[f * n + c] = match metric {
                Metric::Df => f64::from(table.doc_freq(f)),
                _ => score_cell(table.cells(f, c), metric).map_err(|metric| {
                    BaselineError::DegenerateCell { metric, feature: f, class: c }
                })?,
            };
        }
    }
    Ok(MetricMatrix::new(scores, metric, m, n))
}

fn score_cell(cells: JointCells, metric: Metric) -> Result<f64, &'static str> {
    let JointCells { p_xc, p_xnc, p_nxc, p_nxnc } = cells;
    let p_x = cells.p_x();
    let p_nx = p_nxc + p_nxnc;
    let p_c = cells.p_c();
    let p_nc = p_xnc + p_nxnc;
    match metric {
        Metric::Df => unreachable!("df handled by caller"),
        Metric::Ig => Ok(xlog_ratio(p_xc, p_x * p_c) + xlog_ratio(p_nxc, p_nx * p_c)),
        Metric::Cet => Ok(xlog_ratio(p_xc, p_x * p_c)),
        Metric::Chi => {
            let num = p_xc * p_nxnc - p_xnc * p_nxc;
            let den = p_xc * p_xnc * p_nxc * p_nxnc;
            if den == 0.0 {
                if num == 0.0 {
                    Ok(0.0)
                } else {
                    Err("chi")
                }
            } else {
                Ok(num * num / den)
            }
        }
        Metric::Ngl => {
            let num = p_xc * p_nxnc - p_xnc * p_nxc;
            let den = (p_xc * p_xnc * p_nxc * p_nxnc).sqrt();
            if den == 0.0 {
                if num == 0.0 {
                    Ok(0.0)
                } else {
                    Err("ngl")
                }
            } else {
                Ok(num / den)
            }
        }
        Metric::Rs => {
            let a = p_xc / p_c;
            let b = p_nxnc / p_nc;
            if a == 0.0 && b == 0.0 {
                Ok(0.0)
            } else {
                Ok((a / b).ln())
            }
        }
    }
}

/// Aggregation of per-class scores into one global score per feature.
#[derive(Debug, Clone, PartialEq)]
pub enum GlobalFn {
    Sum,
    Max,
    /// Weighted average; weights default to class priors at the call sites
    /// that have a corpus in hand.
    WeightedAvg(Vec<f64>),
}

impl GlobalFn {
    pub fn as_str(&self) -> &'static str {
        match self {
            GlobalFn::Sum => "sum",
            GlobalFn::Max => "max",
            GlobalFn::WeightedAvg(_) => "avg",
        }
    }
}

/// Collapses an M x N score matrix to one score per feature. DF is already
/// global (scores replicated across classes), so the mode is ignored for it.
pub fn globalize(matrix: &MetricMatrix, global: &GlobalFn) -> Result<Vec<f64>, BaselineError> {
    let m = matrix.n_features();
    let n = matrix.n_classes();
    if let GlobalFn::WeightedAvg(w) = global {
        if w.len() != n {
            return Err(BaselineError::WeightsLength { got: w.len(), expected: n });
        }
        if w.iter().any(|&x| x < 0.0) {
            return Err(BaselineError::InvalidWeights("negative weight".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(BaselineError::InvalidWeights(format!("weights sum to {sum}")));
        }
    }
    let mut out = Vec::with_capacity(m);
    for f in 0..m {
        let row = (0..n).map(|c| matrix.get(f, c));
        let value = if matrix.metric() == Metric::Df {
            matrix.get(f, 0)
        } else {
            match global {
                GlobalFn::Sum => row.sum(),
                GlobalFn::Max => row.fold(f64::NEG_INFINITY, f64::max),
                GlobalFn::WeightedAvg(w) => row.zip(w).map(|(s, &wi)| wi * s).sum(),
            }
        };
        out.push(value);
    }
    Ok(out)
}

/// Ranks features by descending global score, ties broken by lowest index.
/// The per-step score is recorded in the ranking's value column.
pub fn ranking_from_scores(
    global_scores: &[f64],
    top_k: usize,
    method_tag: impl Into<String>,
) -> FeatureRanking {
    let mut idx: Vec<usize> = (0..global_scores.len()).collect();
    idx.sort_by(|&a, &b| {
        global_scores[b]
            .total_cmp(&global_scores[a])
            .then_with(|| a.cmp(&b))
    });
    idx.truncate(top_k);
    let js_values = idx.iter().map(|&i| global_scores[i]).collect();
    FeatureRanking { order: idx, js_values, method_tag: method_tag.into() }
}

/// One-call pipeline: contingency table, local scores, global aggregation,
/// descending ranking.
pub fn rank_by_metric(
    corpus: &LabeledCorpus,
    metric: Metric,
    global: &GlobalFn,
    epsilon: f64,
    top_k: usize,
) -> Result<FeatureRanking, BaselineError> {
    let table = build_contingency(corpus, epsilon);
    let matrix = score(&table, metric)?;
    let scores = globalize(&matrix, global)?;
    Ok(ranking_from_scores(&scores, top_k, metric.as_str()))
}
