//! Closed-form divergences between categorical (multinomial cell-probability)
//! vectors: Kullback-Leibler, Jeffreys, and Jensen-Shannon over N
//! distributions against a prior-weighted mixture reference, plus the
//! grouped-remainder reduction used by the greedy feature ranker.
//!
//! Conventions: natural log everywhere; `0 * log(0/q) = 0`, including q = 0.
//! The JS sum over classes is unweighted by default; [`JsConfig`] exposes the
//! prior-weighted variant and a one-vs-rest (complement) reference in place of
//! the all-class mixture.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("distribution lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("distribution sums to {sum}, expected 1 within {tol}")]
    NotNormalized { sum: f64, tol: f64 },
    #[error("absolute continuity violated: p[{index}] = {p} > 0 but q[{index}] = 0")]
    AbsoluteContinuity { index: usize, p: f64 },
    #[error("negative cell at index {index}: {value}")]
    NegativeCell { index: usize, value: f64 },
    #[error("prior {index} is zero")]
    ZeroPrior { index: usize },
    #[error("no distributions given")]
    Empty,
    #[error("feature index {index} out of range for {len} cells")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate feature index {index}")]
    DuplicateIndex { index: usize },
    #[error("complement reference undefined: prior {index} is 1")]
    DegenerateComplement { index: usize },
}

/// Input gate: cells sum to 1 within this tolerance.
const NORM_TOL: f64 = 1e-6;

fn check_distribution(p: &[f64]) -> Result<(), DivergenceError> {
    let mut sum = 0.0;
    for (i, &v) in p.iter().enumerate() {
        if v < 0.0 {
            return Err(DivergenceError::NegativeCell { index: i, value: v });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(DivergenceError::NotNormalized { sum, tol: NORM_TOL });
    }
    Ok(())
}

/// One term of a KL sum: `p * ln(p/q)` with the zero-mass convention.
/// `None` signals an absolute-continuity violation (p > 0, q = 0).
#[inline]
fn kl_term(p: f64, q: f64) -> Option<f64> {
    if p == 0.0 {
        Some(0.0)
    } else if q == 0.0 {
        None
    } else {
        Some(p * (p / q).ln())
    }
}

/// `KL(p : q) = sum_j p_j ln(p_j / q_j)` in nats.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::LengthMismatch { left: p.len(), right: q.len() });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let mut total = 0.0;
    for (i, (&pj, &qj)) in p.iter().zip(q).enumerate() {
        match kl_term(pj, qj) {
            Some(t) => total += t,
            None => return Err(DivergenceError::AbsoluteContinuity { index: i, p: pj }),
        }
    }
    Ok(total)
}

/// As [`kl`], but an absolute-continuity violation yields `+inf` instead of
/// an error.
pub fn kl_or_infinity(p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
    match kl(p, q) {
        Err(DivergenceError::AbsoluteContinuity { .. }) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Jeffreys divergence `KL(p:q) + KL(q:p)`; symmetric in its arguments.
pub fn jeffreys(p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
    Ok(kl(p, q)? + kl(q, p)?)
}

/// The prior-weighted mixture `P0 = sum_k pi_k P_k` used as the JS reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureReference {
    pub cells: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Builds the mixture reference over distributions of equal length.
pub fn mixture<D: AsRef<[f64]>>(
    distributions: &[D],
    priors: &[f64],
) -> Result<MixtureReference, DivergenceError> {
    validate_set(distributions, priors)?;
    let len = distributions[0].as_ref().len();
    let mut cells = vec![0.0; len];
    for (dist, &w) in distributions.iter().zip(priors) {
        for (c, &v) in cells.iter_mut().zip(dist.as_ref()) {
            *c += w * v;
        }
    }
    Ok(MixtureReference { cells, weights: priors.to_vec() })
}

fn validate_set<D: AsRef<[f64]>>(
    distributions: &[D],
    priors: &[f64],
) -> Result<(), DivergenceError> {
    if distributions.is_empty() {
        return Err(DivergenceError::Empty);
    }
    if priors.len() != distributions.len() {
        return Err(DivergenceError::LengthMismatch {
            left: distributions.len(),
            right: priors.len(),
        });
    }
    let mut prior_sum = 0.0;
    for (i, &w) in priors.iter().enumerate() {
        if w <= 0.0 {
            return Err(DivergenceError::ZeroPrior { index: i });
        }
        prior_sum += w;
    }
    if (prior_sum - 1.0).abs() > NORM_TOL {
        return Err(DivergenceError::NotNormalized { sum: prior_sum, tol: NORM_TOL });
    }
    let len = distributions[0].as_ref().len();
    for d in distributions {
        let d = d.as_ref();
        if d.len() != len {
            return Err(DivergenceError::LengthMismatch { left: len, right: d.len() });
        }
        check_distribution(d)?;
    }
    Ok(())
}

/// Which reference distribution each class is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceKind {
    /// The all-class prior mixture `P0`.
    #[default]
    Mixture,
    /// Per-class complement `P_i^c = sum_{k != i} pi_k P_k / (1 - pi_i)`.
    Complement,
}

/// JS variant selection: reference distribution and outer-sum weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JsConfig {
    pub reference: ReferenceKind,
    /// Weight each class's KL by its prior (classical JS) instead of the
    /// unweighted sum.
    pub weighted: bool,
}

/// `JS(P_1..P_N) = sum_i KL(P_i : P0)` with `P0` the prior mixture.
/// Finite whenever all priors are positive.
pub fn js<D: AsRef<[f64]>>(distributions: &[D], priors: &[f64]) -> Result<f64, DivergenceError> {
    js_with(distributions, priors, JsConfig::default())
}

/// [`js`] with an explicit variant configuration.
pub fn js_with<D: AsRef<[f64]>>(
    distributions: &[D],
    priors: &[f64],
    config: JsConfig,
) -> Result<f64, DivergenceError> {
    let reference = mixture(distributions, priors)?;
    let n = distributions.len();
    let mut total = 0.0;
    for (i, dist) in distributions.iter().enumerate() {
        let dist = dist.as_ref();
        let weight = if config.weighted { priors[i] } else { 1.0 };
        let mut div = 0.0;
        for (j, &pj) in dist.iter().enumerate() {
            let qj = match config.reference {
                ReferenceKind::Mixture => reference.cells[j],
                ReferenceKind::Complement => {
                    if n < 2 || (1.0 - priors[i]).abs() < f64::EPSILON {
                        return Err(DivergenceError::DegenerateComplement { index: i });
                    }
                    // Clamp: float cancellation can leave a tiny negative cell.
                    ((reference.cells[j] - priors[i] * pj) / (1.0 - priors[i])).max(0.0)
                }
            };
            match kl_term(pj, qj) {
                Some(t) => div += t,
                None => return Err(DivergenceError::AbsoluteContinuity { index: j, p: pj }),
            }
        }
        total += weight * div;
    }
    Ok(total)
}

/// A multinomial restricted to a few named feature cells plus one grouped
/// remainder cell holding all leftover probability mass (always the last
/// cell).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDistribution {
    cells: Vec<f64>,
}

impl ReducedDistribution {
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// The grouped leftover-mass cell.
    pub fn remainder(&self) -> f64 {
        *self.cells.last().expect("reduced distribution has a remainder cell")
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

impl AsRef<[f64]> for ReducedDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.cells
    }
}

/// Restricts `theta` to `selected ++ [candidate]` plus a grouped remainder:
/// cells `[theta[s_1], .., theta[s_k], theta[candidate], rest]`.
pub fn reduce(
    theta: &[f64],
    selected: &[usize],
    candidate: usize,
) -> Result<ReducedDistribution, DivergenceError> {
    if selected.contains(&candidate) {
        return Err(DivergenceError::DuplicateIndex { index: candidate });
    }
    let mut prefix = Vec::with_capacity(selected.len() + 1);
    prefix.extend_from_slice(selected);
    prefix.push(candidate);
    reduce_prefix(theta, &prefix)
}

/// Restricts `theta` to the ordered feature set `prefix` plus a grouped
/// remainder. The remainder is clamped at 0; the vector is renormalized only
/// if the named cells exceed 1 by more than 1e-9.
pub fn reduce_prefix(
    theta: &[f64],
    prefix: &[usize],
) -> Result<ReducedDistribution, DivergenceError> {
    let m = theta.len();
    let mut seen = std::collections::HashSet::with_capacity(prefix.len());
    let mut cells = Vec::with_capacity(prefix.len() + 1);
    let mut sum = 0.0;
    for &idx in prefix {
        if idx >= m {
            return Err(DivergenceError::IndexOutOfRange { index: idx, len: m });
        }
        if !seen.insert(idx) {
            return Err(DivergenceError::DuplicateIndex { index: idx });
        }
        cells.push(theta[idx]);
        sum += theta[idx];
    }
    if sum > 1.0 + 1e-9 {
        for c in &mut cells {
            *c /= sum;
        }
        cells.push(0.0);
    } else {
        cells.push(snap_remainder(1.0 - sum));
    }
    Ok(ReducedDistribution { cells })
}

/// Remainders below float-noise scale become exactly 0, so a fully covered
/// distribution never leaves a ~1e-16 ghost cell (which would make a
/// complement-reference KL spuriously infinite).
#[inline]
pub(crate) fn snap_remainder(rem: f64) -> f64 {
    if rem > 1e-12 {
        rem
    } else {
        0.0
    }
}
