//! End-to-end evaluation: restrict corpora to a ranking prefix, retrain the
//! classifier, measure test accuracy per feature count, and emit the curve
//! as CSV (`k,method,global_fn,accuracy,n_test`, rows sorted by method,
//! global function, then k).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{self, BaselineError, GlobalFn, Metric};
use crate::corpus::{CorpusError, LabeledCorpus, SparseDocument, Vocabulary};
use crate::fsmj::{self, FeatureRanking, FsmjError};
use crate::mnb::{self, MnbError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("selected feature list is empty")]
    EmptySelection,
    #[error("feature index {index} out of range for {len} features")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate feature index {index}")]
    DuplicateIndex { index: usize },
    #[error("ks must be strictly ascending")]
    KsNotAscending,
    #[error("k = {k} exceeds ranking length {len}")]
    KTooLarge { k: usize, len: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("train corpus has {train} features but test corpus has {test}")]
    FeatureCountMismatch { train: usize, test: usize },
    #[error("test class {0:?} does not appear in the training corpus")]
    UnknownClass(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Mnb(#[from] MnbError),
    #[error(transparent)]
    Fsmj(#[from] FsmjError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One point of an accuracy-versus-feature-count curve. Exact counts are
/// kept alongside the ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub method: String,
    pub global_fn: String,
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_test: usize,
    pub macro_f1: Option<f64>,
}

/// Keeps only `selected` features, reindexed to `0..K-1` in selection order.
/// Documents with no selected terms stay, with zero counts.
pub fn restrict_corpus(
    corpus: &LabeledCorpus,
    selected: &[usize],
) -> Result<LabeledCorpus, EvalError> {
    if selected.is_empty() {
        return Err(EvalError::EmptySelection);
    }
    let m = corpus.n_features();
    let mut old_to_new = vec![usize::MAX; m];
    for (new, &old) in selected.iter().enumerate() {
        if old >= m {
            return Err(EvalError::IndexOutOfRange { index: old, len: m });
        }
        if old_to_new[old] != usize::MAX {
            return Err(EvalError::DuplicateIndex { index: old });
        }
        old_to_new[old] = new;
    }

    let docs: Vec<SparseDocument> = corpus
        .docs()
        .iter()
        .map(|doc| {
            let mut entries: Vec<(usize, u32)> = doc
                .entries()
                .iter()
                .filter_map(|&(old, c)| {
                    let new = old_to_new[old];
                    (new != usize::MAX).then_some((new, c))
                })
                .collect();
            entries.sort_unstable_by_key(|&(i, _)| i);
            SparseDocument::new(entries).expect("reindexed entries stay sorted and positive")
        })
        .collect();

    let terms: Vec<String> = selected
        .iter()
        .map(|&old| corpus.vocabulary().term(old).to_string())
        .collect();
    let doc_freq: Vec<u32> = selected.iter().map(|&old| corpus.vocabulary().doc_freq(old)).collect();
    let vocabulary = Vocabulary::new(terms, doc_freq)?;

    Ok(LabeledCorpus::new(
        docs,
        corpus.labels().to_vec(),
        corpus.class_names().to_vec(),
        vocabulary,
    )?)
}

/// Labels and extras for [`evaluate_with`].
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// CSV method label; defaults to the ranking's method tag.
    pub method: Option<String>,
    /// CSV global-function label; defaults to "none".
    pub global_fn: Option<String>,
    /// Also compute macro-averaged F1 per point.
    pub macro_f1: bool,
}

/// For each `k`, restricts both corpora to the ranking prefix of length `k`,
/// retrains with `alpha`, classifies every test document, and records
/// accuracy. `ks` must be strictly ascending and within the ranking length.
pub fn evaluate(
    train: &LabeledCorpus,
    test: &LabeledCorpus,
    ranking: &FeatureRanking,
    ks: &[usize],
    alpha: f64,
) -> Result<Vec<CurvePoint>, EvalError> {
    evaluate_with(train, test, ranking, ks, alpha, &EvalOptions::default())
}

/// [`evaluate`] with explicit CSV labels and optional macro-F1.
pub fn evaluate_with(
    train: &LabeledCorpus,
    test: &LabeledCorpus,
    ranking: &FeatureRanking,
    ks: &[usize],
    alpha: f64,
    options: &EvalOptions,
) -> Result<Vec<CurvePoint>, EvalError> {
    if train.n_features() != test.n_features() {
        return Err(EvalError::FeatureCountMismatch {
            train: train.n_features(),
            test: test.n_features(),
        });
    }
    for w in ks.windows(2) {
        if w[0] >= w[1] {
            return Err(EvalError::KsNotAscending);
        }
    }
    for &k in ks {
        if k == 0 {
            return Err(EvalError::KZero);
        }
        if k > ranking.len() {
            return Err(EvalError::KTooLarge { k, len: ranking.len() });
        }
    }
    let label_map = map_test_labels(train, test)?;
    let method = options.method.clone().unwrap_or_else(|| ranking.method_tag.clone());
    let global_fn = options.global_fn.clone().unwrap_or_else(|| "none".to_string());

    ks.par_iter()
        .map(|&k| {
            let selected = &ranking.order[..k];
            let train_k = restrict_corpus(train, selected)?;
            let test_k = restrict_corpus(test, selected)?;
            let model = mnb::estimate_params(&train_k, alpha)?;

            let n_classes = train.n_classes();
            let mut n_correct = 0usize;
            let mut tp = vec![0usize; n_classes];
            let mut fp = vec![0usize; n_classes];
            let mut fn_ = vec![0usize; n_classes];
            for (doc, &raw_label) in test_k.docs().iter().zip(test_k.labels()) {
                let truth = label_map[raw_label];
                let (predicted, _) = mnb::classify(&model, doc);
                if predicted == truth {
                    n_correct += 1;
                    tp[truth] += 1;
                } else {
                    fp[predicted] += 1;
                    fn_[truth] += 1;
                }
            }
            let n_test = test_k.n_docs();
            let macro_f1 = options.macro_f1.then(|| {
                let mut total = 0.0;
                for c in 0..n_classes {
                    let denom = 2 * tp[c] + fp[c] + fn_[c];
                    if denom > 0 {
                        total += 2.0 * tp[c] as f64 / denom as f64;
                    }
                }
                total / n_classes as f64
            });
            Ok(CurvePoint {
                k,
                method: method.clone(),
                global_fn: global_fn.clone(),
                accuracy: n_correct as f64 / n_test as f64,
                n_correct,
                n_test,
                macro_f1,
            })
        })
        .collect()
}

/// Maps each test label index to the train class index with the same name.
fn map_test_labels(train: &LabeledCorpus, test: &LabeledCorpus) -> Result<Vec<usize>, EvalError> {
    test.class_names()
        .iter()
        .map(|name| {
            train
                .class_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| EvalError::UnknownClass(name.clone()))
        })
        .collect()
}

fn sorted_points(points: &[CurvePoint]) -> Vec<&CurvePoint> {
    let mut rows: Vec<&CurvePoint> = points.iter().collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then_with(|| a.global_fn.cmp(&b.global_fn))
            .then_with(|| a.k.cmp(&b.k))
    });
    rows
}

/// Writes curve points as CSV with the pinned header and 6-decimal accuracy,
/// rows sorted by (method, global_fn, k).
pub fn emit_csv(points: &[CurvePoint], path: &Path) -> Result<(), EvalError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "k,method,global_fn,accuracy,n_test")?;
    for p in sorted_points(points) {
        writeln!(w, "{},{},{},{:.6},{}", p.k, p.method, p.global_fn, p.accuracy, p.n_test)?;
    }
    w.flush()?;
    Ok(())
}

/// [`emit_csv`] with one extra `macro_f1` column (blank where not computed).
pub fn emit_csv_with_macro_f1(points: &[CurvePoint], path: &Path) -> Result<(), EvalError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "k,method,global_fn,accuracy,n_test,macro_f1")?;
    for p in sorted_points(points) {
        let f1 = p.macro_f1.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(w, "{},{},{},{:.6},{},{}", p.k, p.method, p.global_fn, p.accuracy, p.n_test, f1)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean accuracy over the k-grid per (method, global_fn), sorted by label.
pub fn grid_means(points: &[CurvePoint]) -> Vec<(String, String, f64)> {
    let mut keys: Vec<(String, String)> = points
        .iter()
        .map(|p| (p.method.clone(), p.global_fn.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, global_fn)| {
            let accs: Vec<f64> = points
                .iter()
                .filter(|p| p.method == method && p.global_fn == global_fn)
                .map(|p| p.accuracy)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            (method, global_fn, mean)
        })
        .collect()
}

/// Logarithmic default grid {10, 20, 50, 100, 200, 500, 1000, 2000, 5000, M},
/// clipped to the feature count.
pub fn default_k_grid(m: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000]
        .into_iter()
        .filter(|&k| k < m)
        .collect();
    if m >= 1 {
        grid.push(m);
    }
    grid
}

/// Settings for [`compare`].
#[derive(Debug, Clone)]
pub struct CompareConfig {
    /// Feature-count grid; defaults to [`default_k_grid`].
    pub ks: Option<Vec<usize>>,
    pub alpha: f64,
    pub epsilon: f64,
    pub macro_f1: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { ks: None, alpha: 1.0, epsilon: 0.5, macro_f1: false }
    }
}

/// Runs the greedy JS ranker plus all six baselines under all three global
/// functions and evaluates every ranking over the same k-grid.
pub fn compare(
    train: &LabeledCorpus,
    test: &LabeledCorpus,
    config: &CompareConfig,
) -> Result<Vec<CurvePoint>, EvalError> {
    let ks = config.ks.clone().unwrap_or_else(|| default_k_grid(train.n_features()));
    let k_max = *ks.last().expect("k grid is non-empty");

    let mut points = Vec::new();

    let model = mnb::estimate_params(train, config.alpha)?;
    let fsmj_ranking = fsmj::rank(&model, k_max)?;
    points.extend(evaluate_with(
        train,
        test,
        &fsmj_ranking,
        &ks,
        config.alpha,
        &EvalOptions { macro_f1: config.macro_f1, ..Default::default() },
    )?);

    let priors = model.priors().to_vec();
    for metric in Metric::ALL {
        for global in [GlobalFn::Sum, GlobalFn::Max, GlobalFn::WeightedAvg(priors.clone())] {
            let ranking = baselines::rank_by_metric(train, metric, &global, config.epsilon, k_max)?;
            points.extend(evaluate_with(
                train,
                test,
                &ranking,
                &ks,
                config.alpha,
                &EvalOptions {
                    method: Some(metric.as_str().to_string()),
                    global_fn: Some(global.as_str().to_string()),
                    macro_f1: config.macro_f1,
                },
            )?);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_corpus;
    use tempfile::tempdir;

    fn separable_corpus() -> LabeledCorpus {
        let docs = vec![
            ("alpha beta alpha".to_string(), "a".to_string()),
            ("beta alpha beta".to_string(), "a".to_string()),
            ("gamma delta gamma".to_string(), "b".to_string()),
            ("delta gamma delta".to_string(), "b".to_string()),
        ];
        build_corpus(&docs, 1).unwrap()
    }

    #[test]
    fn restrict_select_all_is_identity() {
        let c = separable_corpus();
        let all: Vec<usize> = (0..c.n_features()).collect();
        let r = restrict_corpus(&c, &all).unwrap();
        assert_eq!(r, c);
    }

    #[test]
    fn restrict_reindexes_in_selection_order() {
        let docs = vec![
            SparseDocument::new(vec![(0, 3), (5, 1)]).unwrap(),
            SparseDocument::new(vec![(2, 1)]).unwrap(),
        ];
        let vocab = Vocabulary::new(
            (0..6).map(|i| format!("t{i}")).collect(),
            vec![1, 0, 1, 0, 0, 1],
        )
        .unwrap();
        let c = LabeledCorpus::new(docs, vec![0, 1], vec!["x".into(), "y".into()], vocab).unwrap();
        let r = restrict_corpus(&c, &[5]).unwrap();
        assert_eq!(r.docs()[0].entries(), &[(0, 1)]);
        assert_eq!(r.docs()[1].entries(), &[] as &[(usize, u32)]);
        assert_eq!(r.docs()[1].total_count(), 0);
        assert_eq!(r.n_docs(), 2);
        assert_eq!(r.vocabulary().terms(), &["t5"]);

        // Selection order defines the new index order.
        let r2 = restrict_corpus(&c, &[5, 0]).unwrap();
        assert_eq!(r2.docs()[0].entries(), &[(0, 1), (1, 3)]);
    }

    #[test]
    fn restrict_rejects_bad_selection() {
        let c = separable_corpus();
        assert!(matches!(restrict_corpus(&c, &[]), Err(EvalError::EmptySelection)));
        assert!(matches!(
            restrict_corpus(&c, &[0, 0]),
            Err(EvalError::DuplicateIndex { index: 0 })
        ));
        assert!(matches!(
            restrict_corpus(&c, &[99]),
            Err(EvalError::IndexOutOfRange { index: 99, .. })
        ));
    }

    #[test]
    fn separable_corpus_reaches_full_accuracy() {
        let train = separable_corpus();
        let test = separable_corpus();
        let model = mnb::estimate_params(&train, 1.0).unwrap();
        let ranking = fsmj::rank(&model, train.n_features()).unwrap();
        let ks: Vec<usize> = vec![train.n_features()];
        let points = evaluate(&train, &test, &ranking, &ks, 1.0).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].accuracy, 1.0);
        assert_eq!(points[0].n_correct, points[0].n_test);
    }

    #[test]
    fn full_k_matches_unrestricted_oracle() {
        let train = separable_corpus();
        let test = separable_corpus();
        let m = train.n_features();
        let model = mnb::estimate_params(&train, 1.0).unwrap();
        let ranking = fsmj::rank(&model, m).unwrap();
        let points = evaluate(&train, &test, &ranking, &[m], 1.0).unwrap();

        // Brute-force MAP on the unrestricted corpus.
        let mut correct = 0usize;
        for (doc, &label) in test.docs().iter().zip(test.labels()) {
            let (pred, _) = mnb::classify(&model, doc);
            if pred == label {
                correct += 1;
            }
        }
        assert_eq!(points[0].n_correct, correct);
    }

    #[test]
    fn empty_test_doc_counts_in_denominator() {
        let train = separable_corpus();
        let test_docs = vec![
            SparseDocument::new(vec![(0, 2)]).unwrap(),
            SparseDocument::empty(),
        ];
        let test = LabeledCorpus::new(
            test_docs,
            vec![0, 1],
            train.class_names().to_vec(),
            train.vocabulary().clone(),
        )
        .unwrap();
        let model = mnb::estimate_params(&train, 1.0).unwrap();
        let ranking = fsmj::rank(&model, train.n_features()).unwrap();
        let points = evaluate(&train, &test, &ranking, &[train.n_features()], 1.0).unwrap();
        assert_eq!(points[0].n_test, 2);
        // Equal priors: fallback predicts class 0, so the empty doc labeled 1
        // is wrong and the non-empty "alpha" doc is right.
        assert_eq!(points[0].n_correct, 1);
    }

    #[test]
    fn test_labels_remap_by_name() {
        let train = separable_corpus();
        // Same documents, classes listed in the opposite order.
        let docs = vec![
            ("gamma delta gamma".to_string(), "b".to_string()),
            ("alpha beta alpha".to_string(), "a".to_string()),
        ];
        let test_raw = build_corpus(&docs, 1).unwrap();
        // Rebuild over the training vocabulary so indices line up.
        let test = crate::corpus::vectorize_with_vocab(&docs, train.vocabulary()).unwrap();
        assert_eq!(test_raw.class_names()[0], "b");
        let model = mnb::estimate_params(&train, 1.0).unwrap();
        let ranking = fsmj::rank(&model, train.n_features()).unwrap();
        let points = evaluate(&train, &test, &ranking, &[train.n_features()], 1.0).unwrap();
        assert_eq!(points[0].accuracy, 1.0);
    }

    #[test]
    fn unknown_test_class_rejected() {
        let train = separable_corpus();
        let docs = vec![
            ("alpha beta".to_string(), "a".to_string()),
            ("gamma delta".to_string(), "zz".to_string()),
        ];
        let test = crate::corpus::vectorize_with_vocab(&docs, train.vocabulary()).unwrap();
        let model = mnb::estimate_params(&train, 1.0).unwrap();
        let ranking = fsmj::rank(&model, 2).unwrap();
        assert!(matches!(
            evaluate(&train, &test, &ranking, &[2], 1.0),
            Err(EvalError::UnknownClass(name)) if name == "zz"
        ));
    }

    #[test]
    fn ks_validation() {
        let train = separable_corpus();
        let model = mnb::estimate_params(&train, 1.0).unwrap();
        let ranking = fsmj::rank(&model, 2).unwrap();
        assert!(matches!(
            evaluate(&train, &train, &ranking, &[2, 1], 1.0),
            Err(EvalError::KsNotAscending)
        ));
        assert!(matches!(
            evaluate(&train, &train, &ranking, &[1, 3], 1.0),
            Err(EvalError::KTooLarge { k: 3, len: 2 })
        ));
        assert!(matches!(
            evaluate(&train, &train, &ranking, &[0, 1], 1.0),
            Err(EvalError::KZero)
        ));
    }

    fn point(k: usize, method: &str, global_fn: &str, acc: f64, n: usize) -> CurvePoint {
        CurvePoint {
            k,
            method: method.to_string(),
            global_fn: global_fn.to_string(),
            accuracy: acc,
            n_correct: (acc * n as f64).round() as usize,
            n_test: n,
            macro_f1: None,
        }
    }

    #[test]
    fn csv_row_format() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&[point(100, "fsmj", "none", 0.9234, 2000)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "k,method,global_fn,accuracy,n_test\n100,fsmj,none,0.923400,2000\n");
    }

    #[test]
    fn csv_empty_is_header_only() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "k,method,global_fn,accuracy,n_test\n");
    }

    #[test]
    fn csv_rows_sorted() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let points = vec![
            point(20, "ig", "max", 0.5, 10),
            point(10, "fsmj", "none", 0.6, 10),
            point(10, "ig", "max", 0.4, 10),
            point(10, "ig", "avg", 0.3, 10),
        ];
        emit_csv(&points, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "10,fsmj,none,0.600000,10");
        assert_eq!(lines[2], "10,ig,avg,0.300000,10");
        assert_eq!(lines[3], "10,ig,max,0.400000,10");
        assert_eq!(lines[4], "20,ig,max,0.500000,10");
    }

    #[test]
    fn grid_means_by_label() {
        let points = vec![
            point(10, "ig", "max", 0.4, 10),
            point(20, "ig", "max", 0.6, 10),
            point(10, "fsmj", "none", 0.9, 10),
        ];
        let means = grid_means(&points);
        assert_eq!(means.len(), 2);
        assert_eq!(means[0].0, "fsmj");
        assert!((means[0].2 - 0.9).abs() < 1e-12);
        assert_eq!(means[1].0, "ig");
        assert!((means[1].2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn default_grid_clips_to_m() {
        assert_eq!(default_k_grid(7), vec![7]);
        assert_eq!(default_k_grid(10), vec![10]);
        assert_eq!(default_k_grid(60), vec![10, 20, 50, 60]);
        assert_eq!(
            default_k_grid(8000),
            vec![10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 8000]
        );
    }

    #[test]
    fn compare_runs_all_method_global_pairs() {
        let train = separable_corpus();
        let cfg = CompareConfig { ks: Some(vec![1, 2, 4]), ..Default::default() };
        let points = compare(&train, &train, &cfg).unwrap();
        // fsmj + 6 metrics x 3 globals, each over 3 ks.
        assert_eq!(points.len(), (1 + 18) * 3);
        let means = grid_means(&points);
        assert_eq!(means.len(), 19);
    }

    #[test]
    fn pipeline_deterministic_csv() {
        let train = separable_corpus();
        let cfg = CompareConfig { ks: Some(vec![1, 2, 4]), ..Default::default() };
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        emit_csv(&compare(&train, &train, &cfg).unwrap(), &p1).unwrap();
        emit_csv(&compare(&train, &train, &cfg).unwrap(), &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn macro_f1_column() {
        let train = separable_corpus();
        let model = mnb::estimate_params(&train, 1.0).unwrap();
        let ranking = fsmj::rank(&model, 4).unwrap();
        let opts = EvalOptions { macro_f1: true, ..Default::default() };
        let points = evaluate_with(&train, &train, &ranking, &[4], 1.0, &opts).unwrap();
        assert_eq!(points[0].macro_f1, Some(1.0));
        let dir = tempdir().unwrap();
        let path = dir.path().join("f1.csv");
        emit_csv_with_macro_f1(&points, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,method,global_fn,accuracy,n_test,macro_f1\n"));
        assert!(text.contains(",1.000000\n"));
    }
}
