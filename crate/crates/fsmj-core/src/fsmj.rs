//! Greedy forward feature ranking by maximum Jensen-Shannon divergence.
//!
//! At step k+1 every unselected feature m is scored by the JS divergence of
//! the per-class reduced distributions over cells
//! `[s_1, .., s_k, m, remainder]`; the argmax joins the selection. The JS of
//! the chosen prefix never decreases from one step to the next (each step is
//! a refinement of the previous grouping), which `js_trajectory` exposes for
//! auditing.
//!
//! Two evaluation paths compute identical scores: an incremental one that
//! caches the per-class contributions of already-selected cells (O(N) per
//! candidate) and a naive one that rebuilds every reduced distribution from
//! scratch. The naive path is the debug oracle; keep them equivalent.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::divergence::{self, DivergenceError, JsConfig, ReferenceKind};
use crate::mnb::MnbModel;

#[derive(Debug, Error)]
pub enum FsmjError {
    #[error("top_k {top_k} out of range 1..={m}")]
    TopKOutOfRange { top_k: usize, m: usize },
    #[error("feature index {index} out of range for {len} features")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate feature index {index}")]
    DuplicateIndex { index: usize },
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("ranking file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An ordered feature selection with the JS value achieved at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub order: Vec<usize>,
    pub js_values: Vec<f64>,
    pub method_tag: String,
}

impl FeatureRanking {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Candidate evaluation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Cached per-class selected-cell contributions; O(N) per candidate.
    #[default]
    Incremental,
    /// Rebuild every reduced distribution and call the divergence module.
    Naive,
}

/// Greedy maximum-JS ranking of the `top_k` best features under the default
/// JS variant (unweighted sum, mixture reference).
pub fn rank(model: &MnbModel, top_k: usize) -> Result<FeatureRanking, FsmjError> {
    rank_with(model, top_k, JsConfig::default(), Strategy::Incremental)
}

/// [`rank`] with an explicit JS variant and evaluation path.
pub fn rank_with(
    model: &MnbModel,
    top_k: usize,
    config: JsConfig,
    strategy: Strategy,
) -> Result<FeatureRanking, FsmjError> {
    let m = model.n_features();
    if top_k < 1 || top_k > m {
        return Err(FsmjError::TopKOutOfRange { top_k, m });
    }
    match strategy {
        Strategy::Incremental => rank_incremental(model, top_k, config),
        Strategy::Naive => rank_naive(model, top_k, config),
    }
}

/// Higher JS wins; exact ties go to the lower feature index. Commutative and
/// associative, so a parallel reduce is schedule-independent.
#[inline]
fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Per-class reference cell value given the prior-mixture cell `q_cell`.
#[inline]
fn reference_cell(config: JsConfig, q_cell: f64, p_cell: f64, prior: f64) -> f64 {
    match config.reference {
        ReferenceKind::Mixture => q_cell,
        ReferenceKind::Complement => ((q_cell - prior * p_cell) / (1.0 - prior)).max(0.0),
    }
}

/// One KL term `p ln(p/q)` with the zero-mass convention; `None` flags
/// p > 0 against q = 0.
#[inline]
fn kl_term(p: f64, q: f64) -> Option<f64> {
    if p == 0.0 {
        Some(0.0)
    } else if q <= 0.0 {
        None
    } else {
        Some(p * (p / q).ln())
    }
}

struct StepState {
    /// Prior-mixture cell probability per feature.
    q: Vec<f64>,
    /// Per-class mass already selected.
    sel_mass: Vec<f64>,
    /// Per-class cached sum of KL terms over selected cells.
    sel_term: Vec<f64>,
    selected: Vec<bool>,
}

fn rank_incremental(
    model: &MnbModel,
    top_k: usize,
    config: JsConfig,
) -> Result<FeatureRanking, FsmjError> {
    let n = model.n_classes();
    let m = model.n_features();
    let theta = model.cell_probs();
    let priors = model.priors();
    if config.reference == ReferenceKind::Complement && n < 2 {
        return Err(DivergenceError::DegenerateComplement { index: 0 }.into());
    }

    let q: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| priors[i] * theta[i][j]).sum())
        .collect();
    let mut state = StepState {
        q,
        sel_mass: vec![0.0; n],
        sel_term: vec![0.0; n],
        selected: vec![false; m],
    };

    let mut order = Vec::with_capacity(top_k);
    let mut js_values = Vec::with_capacity(top_k);

    for _ in 0..top_k {
        let (best_js, best_idx) = (0..m)
            .into_par_iter()
            .filter(|&c| !state.selected[c])
            .map(|c| candidate_js(model, config, &state, c).map(|v| (v, c)))
            .try_reduce(|| (f64::NEG_INFINITY, usize::MAX), |a, b| Ok(better(a, b)))?;

        // Fold the winner's cells into the per-class caches.
        for i in 0..n {
            let p = theta[i][best_idx];
            let r = reference_cell(config, state.q[best_idx], p, priors[i]);
            let term = kl_term(p, r).ok_or(DivergenceError::AbsoluteContinuity {
                index: best_idx,
                p,
            })?;
            state.sel_term[i] += term;
            state.sel_mass[i] += p;
        }
        state.selected[best_idx] = true;
        order.push(best_idx);
        js_values.push(best_js);
    }

    Ok(FeatureRanking { order, js_values, method_tag: "fsmj".to_string() })
}

/// JS of the reduced distributions `[selected.., candidate, remainder]`,
/// using the cached selected-cell contributions.
fn candidate_js(
    model: &MnbModel,
    config: JsConfig,
    state: &StepState,
    candidate: usize,
) -> Result<f64, FsmjError> {
    let n = model.n_classes();
    let theta = model.cell_probs();
    let priors = model.priors();
    let q_cand = state.q[candidate];

    // Per-class remainder cells and their prior mixture.
    let mut rem = vec![0.0; n];
    let mut rem_mix = 0.0;
    for i in 0..n {
        let r = divergence::snap_remainder((1.0 - state.sel_mass[i]) - theta[i][candidate]);
        rem[i] = r;
        rem_mix += priors[i] * r;
    }

    let mut total = 0.0;
    for i in 0..n {
        let weight = if config.weighted { priors[i] } else { 1.0 };
        let p_cand = theta[i][candidate];
        let q_c = reference_cell(config, q_cand, p_cand, priors[i]);
        let q_r = reference_cell(config, rem_mix, rem[i], priors[i]);
        let cand_term = kl_term(p_cand, q_c)
            .ok_or(DivergenceError::AbsoluteContinuity { index: candidate, p: p_cand })?;
        let rem_term = kl_term(rem[i], q_r)
            .ok_or(DivergenceError::AbsoluteContinuity { index: candidate, p: rem[i] })?;
        total += weight * (state.sel_term[i] + cand_term + rem_term);
    }
    Ok(total)
}

fn rank_naive(
    model: &MnbModel,
    top_k: usize,
    config: JsConfig,
) -> Result<FeatureRanking, FsmjError> {
    let m = model.n_features();
    let n = model.n_classes();
    let mut selected: Vec<usize> = Vec::with_capacity(top_k);
    let mut order = Vec::with_capacity(top_k);
    let mut js_values = Vec::with_capacity(top_k);

    for _ in 0..top_k {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for c in 0..m {
            if selected.contains(&c) {
                continue;
            }
            let reduced: Vec<_> = (0..n)
                .map(|i| divergence::reduce(model.theta(i), &selected, c))
                .collect::<Result<_, _>>()?;
            let value = divergence::js_with(&reduced, model.priors(), config)?;
            best = better(best, (value, c));
        }
        selected.push(best.1);
        order.push(best.1);
        js_values.push(best.0);
    }
    Ok(FeatureRanking { order, js_values, method_tag: "fsmj".to_string() })
}

/// JS of the per-class reductions over each prefix of `order`:
/// `result[k]` covers cells `order[0..=k]` plus the grouped remainder. For a
/// ranking produced by [`rank`] this reproduces its `js_values`.
pub fn js_trajectory(model: &MnbModel, order: &[usize]) -> Result<Vec<f64>, FsmjError> {
    js_trajectory_with(model, order, JsConfig::default())
}

/// [`js_trajectory`] under an explicit JS variant.
pub fn js_trajectory_with(
    model: &MnbModel,
    order: &[usize],
    config: JsConfig,
) -> Result<Vec<f64>, FsmjError> {
    let n = model.n_classes();
    let mut values = Vec::with_capacity(order.len());
    for k in 0..order.len() {
        let prefix = &order[..=k];
        let reduced: Vec<_> = (0..n)
            .map(|i| divergence::reduce_prefix(model.theta(i), prefix))
            .collect::<Result<_, _>>()?;
        values.push(divergence::js_with(&reduced, model.priors(), config)?);
    }
    Ok(values)
}

/// Writes a ranking file: one tab-separated line per step,
/// `<rank> <feature_index> <term> <value>`, rank 1-based, value in scientific
/// notation with 17 significant digits (parses back to the same f64). Without
/// a vocabulary the term column falls back to `f<idx>`.
pub fn save_ranking(
    ranking: &FeatureRanking,
    vocab: Option<&Vocabulary>,
    path: &Path,
) -> Result<(), FsmjError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (step, (&idx, &value)) in ranking.order.iter().zip(&ranking.js_values).enumerate() {
        let term = match vocab {
            Some(v) if idx < v.len() => v.term(idx).to_string(),
            _ => format!("f{idx}"),
        };
        writeln!(w, "{}\t{}\t{}\t{:.16e}", step + 1, idx, term, value)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a ranking file written by [`save_ranking`]. The file carries no
/// method name; the caller supplies the tag.
pub fn load_ranking(path: &Path, method_tag: impl Into<String>) -> Result<FeatureRanking, FsmjError> {
    let text = fs::read_to_string(path)?;
    let mut order = Vec::new();
    let mut js_values = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(FsmjError::Parse {
                line: lineno,
                msg: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let idx: usize = fields[1].parse().map_err(|_| FsmjError::Parse {
            line: lineno,
            msg: format!("bad feature index {:?}", fields[1]),
        })?;
        let value: f64 = fields[3].parse().map_err(|_| FsmjError::Parse {
            line: lineno,
            msg: format!("bad score {:?}", fields[3]),
        })?;
        if !seen.insert(idx) {
            return Err(FsmjError::Parse {
                line: lineno,
                msg: format!("duplicate feature index {idx}"),
            });
        }
        order.push(idx);
        js_values.push(value);
    }
    Ok(FeatureRanking { order, js_values, method_tag: method_tag.into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn model(rows: Vec<Vec<f64>>, priors: Vec<f64>) -> MnbModel {
        let names = (0..rows.len()).map(|i| format!("c{i}")).collect();
        MnbModel::from_parts(rows, priors, names, 0.0).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MnbModel {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let raw_p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let sp: f64 = raw_p.iter().sum();
        model(rows, raw_p.into_iter().map(|v| v / sp).collect())
    }

    #[test]
    fn identical_rows_rank_by_tie_break() {
        let row = vec![0.5, 0.2, 0.3];
        let m = model(vec![row.clone(), row], vec![0.5, 0.5]);
        let r = rank(&m, 3).unwrap();
        assert_eq!(r.order, vec![0, 1, 2]);
        for v in r.js_values {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn worked_two_class_example() {
        let m = model(
            vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.3, 0.5]],
            vec![0.5, 0.5],
        );
        // Step-1 candidate values via single-feature trajectories.
        let v0 = js_trajectory(&m, &[0]).unwrap()[0];
        let v1 = js_trajectory(&m, &[1]).unwrap()[0];
        let v2 = js_trajectory(&m, &[2]).unwrap()[0];
        assert_close(v0, 0.172609, 1e-6);
        assert_close(v1, 0.0, 1e-12);
        assert_close(v2, 0.203498, 1e-6);
        let r = rank(&m, 1).unwrap();
        assert_eq!(r.order[0], 2);
        assert_close(r.js_values[0], v2, 1e-12);
    }

    #[test]
    fn greedy_prefix_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(&mut rng, 3, 12);
        let full = rank(&m, 12).unwrap();
        for k in [1usize, 4, 9] {
            let partial = rank(&m, k).unwrap();
            assert_eq!(partial.order, full.order[..k]);
            assert_eq!(partial.js_values, full.js_values[..k]);
        }
    }

    #[test]
    fn trajectory_matches_rank_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 4, 15);
        let r = rank(&m, 15).unwrap();
        let traj = js_trajectory(&m, &r.order).unwrap();
        for (a, b) in traj.iter().zip(&r.js_values) {
            assert_close(*a, *b, 1e-9);
        }
    }

    #[test]
    fn trajectory_non_decreasing_any_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(2..=4);
            let mcount = rng.gen_range(3..=12);
            let m = random_model(&mut rng, n, mcount);
            let mut order: Vec<usize> = (0..mcount).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let traj = js_trajectory(&m, &order).unwrap();
            for w in traj.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "trajectory decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn full_prefix_minus_one_equals_full_js() {
        let m = model(
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.2, 0.7]],
            vec![0.4, 0.6],
        );
        let traj = js_trajectory(&m, &[2, 0, 1]).unwrap();
        let full = divergence::js(
            &[m.theta(0).to_vec(), m.theta(1).to_vec()],
            m.priors(),
        )
        .unwrap();
        // Prefix of M-1 features: the remainder IS the last feature.
        assert_close(traj[1], full, 1e-12);
        // All M features: remainder is empty, same value.
        assert_close(traj[2], full, 1e-12);
    }

    #[test]
    fn identical_distributions_zero_trajectory() {
        let row = vec![0.25, 0.25, 0.5];
        let m = model(vec![row.clone(), row.clone(), row], vec![0.2, 0.3, 0.5]);
        let traj = js_trajectory(&m, &[2, 1, 0]).unwrap();
        for v in traj {
            assert!(v.abs() <= 1e-12);
        }
    }

    /// Naive candidate score used to adjudicate order disagreements.
    fn naive_candidate_js(m: &MnbModel, prefix: &[usize], c: usize, config: JsConfig) -> f64 {
        let reduced: Vec<_> = (0..m.n_classes())
            .map(|i| divergence::reduce(m.theta(i), prefix, c).unwrap())
            .collect();
        divergence::js_with(&reduced, m.priors(), config).unwrap()
    }

    #[test]
    fn incremental_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let n = rng.gen_range(2..=4);
            let mcount = rng.gen_range(4..=14);
            let m = random_model(&mut rng, n, mcount);
            for config in [
                JsConfig::default(),
                JsConfig { weighted: true, ..Default::default() },
                JsConfig { reference: ReferenceKind::Complement, weighted: false },
            ] {
                let fast = rank_with(&m, mcount, config, Strategy::Incremental).unwrap();
                let naive = rank_with(&m, mcount, config, Strategy::Naive).unwrap();
                // The paths may only diverge where the candidates are exact
                // JS ties up to float noise (e.g. the final steps, where every
                // remaining candidate reproduces the full-distribution JS).
                let divergence_at = fast
                    .order
                    .iter()
                    .zip(&naive.order)
                    .position(|(a, b)| a != b)
                    .unwrap_or(mcount);
                for step in 0..divergence_at {
                    assert_close(fast.js_values[step], naive.js_values[step], 1e-10);
                }
                if divergence_at < mcount {
                    let prefix = &naive.order[..divergence_at];
                    let a = naive_candidate_js(&m, prefix, fast.order[divergence_at], config);
                    let b = naive_candidate_js(&m, prefix, naive.order[divergence_at], config);
                    assert_close(a, b, 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_mass_features_add_nothing_and_tie_by_index() {
        // Features 3 and 4 carry no mass in either class. They can never
        // beat a candidate with a strict refinement gain, they tie exactly
        // with each other (identical cell computations), and their selection
        // leaves the JS value flat.
        let m = model(
            vec![vec![0.5, 0.3, 0.2, 0.0, 0.0], vec![0.1, 0.3, 0.6, 0.0, 0.0]],
            vec![0.5, 0.5],
        );
        let r = rank(&m, 5).unwrap();
        assert_eq!(r.order[0], 0);
        assert!(!r.order[..2].contains(&3) && !r.order[..2].contains(&4));
        let pos3 = r.order.iter().position(|&i| i == 3).unwrap();
        let pos4 = r.order.iter().position(|&i| i == 4).unwrap();
        assert!(pos3 < pos4);
        for w in r.js_values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        // From step 2 on, every candidate (zero-mass or the complementary
        // positive split) yields the full-distribution JS.
        let full = divergence::js(&[m.theta(0).to_vec(), m.theta(1).to_vec()], m.priors()).unwrap();
        for &v in &r.js_values[1..] {
            assert_close(v, full, 1e-12);
        }
    }

    #[test]
    fn greedy_step_optimality() {
        // At every step the chosen candidate's JS dominates every unchosen
        // candidate's, checked by exhaustive naive re-evaluation.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let n = rng.gen_range(2..=4);
            let mcount = rng.gen_range(5..=15);
            let m = random_model(&mut rng, n, mcount);
            let r = rank(&m, mcount).unwrap();
            for step in 0..mcount {
                let prefix = &r.order[..step];
                let chosen = naive_candidate_js(&m, prefix, r.order[step], JsConfig::default());
                for c in 0..mcount {
                    if r.order[..=step].contains(&c) {
                        continue;
                    }
                    let other = naive_candidate_js(&m, prefix, c, JsConfig::default());
                    assert!(
                        chosen >= other - 1e-12,
                        "step {step}: chosen {chosen} < candidate {c} at {other}"
                    );
                }
            }
        }
    }

    #[test]
    fn argmax_scale_invariant() {
        // Scaling every candidate JS by a positive constant leaves the
        // selection unchanged (the per-trial KL form drops the paper's 1/N
        // factor on exactly this ground).
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = random_model(&mut rng, 3, 9);
        let scores: Vec<f64> = (0..9)
            .map(|f| js_trajectory(&m, &[f]).unwrap()[0])
            .collect();
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .fold(0usize, |b, (i, &s)| if s > v[b] { i } else { b })
        };
        for scale in [0.37, 1.0, 42.0] {
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            assert_eq!(argmax(&scaled), argmax(&scores));
        }
        assert_eq!(rank(&m, 1).unwrap().order[0], argmax(&scores));
    }

    #[test]
    fn top_k_out_of_range() {
        let m = model(vec![vec![0.5, 0.5], vec![0.4, 0.6]], vec![0.5, 0.5]);
        assert!(matches!(rank(&m, 0), Err(FsmjError::TopKOutOfRange { .. })));
        assert!(matches!(rank(&m, 3), Err(FsmjError::TopKOutOfRange { .. })));
    }

    #[test]
    fn ranking_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_model(&mut rng, 3, 8);
        let r = rank(&m, 8).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.tsv");
        save_ranking(&r, None, &path).unwrap();
        let back = load_ranking(&path, "fsmj").unwrap();
        assert_eq!(back.order, r.order);
        assert_eq!(back.js_values, r.js_values);
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        let fields: Vec<&str> = first.split('\t').collect();
        assert_eq!(fields[0], "1");
        assert_eq!(fields[2], format!("f{}", r.order[0]));
    }

    #[test]
    fn ranking_file_rejects_duplicates() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.tsv");
        std::fs::write(&path, "1\t3\tfoo\t0.5\n2\t3\tbar\t0.6\n").unwrap();
        assert!(matches!(
            load_ranking(&path, "x"),
            Err(FsmjError::Parse { line: 2, .. })
        ));
    }
}
