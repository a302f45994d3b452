//! Confidence values for strict quantile orderings.
//!
//! A statement `Q_1 < Q_2 < ... < Q_n` about the group quantiles is certified
//! by a witness: one order-statistic index pair `(j_i, j'_i)` per group whose
//! observed values interleave strictly across groups. Each pair contributes
//! the probability that the group's quantile falls between those two order
//! statistics, a binomial interval probability from [`BinomialCache`], and
//! the confidence of the statement is the maximum over witnesses of the
//! product of contributions.
//!
//! The maximum is found by a dynamic program over one layer per group,
//! keeping only the previous layer plus backtracking indices, so auxiliary
//! memory stays linear in the total sample count. All accumulation is done
//! in natural-log space.

use crate::binom::{BinomialCache, Kahan};
use crate::error::{Error, Result};

/// Upper bound on enumerated tuples accepted by [`brute_force_confidence`].
pub const BRUTE_FORCE_CAP: f64 = 1e7;

/// Default group-count guard for [`permutation_scan`].
pub const DEFAULT_MAX_PERMUTATION_GROUPS: usize = 8;

/// One group's sorted sample together with the quantile percentage under
/// study.
///
/// Invariants: values are finite and nondecreasing, the sample is nonempty,
/// and `q` lies strictly inside (0, 1).
#[derive(Clone, Debug)]
pub struct GroupSample {
    label: String,
    values: Vec<f64>,
    q: f64,
}

impl GroupSample {
    /// Builds a group sample from values in any order; sorts internally.
    pub fn new(label: impl Into<String>, mut values: Vec<f64>, q: f64) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::EmptyGroup { label });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { label });
        }
        if !q.is_finite() || q <= 0.0 || q >= 1.0 {
            return Err(Error::ProbabilityRange {
                name: "q",
                range: "(0, 1)",
                value: q,
            });
        }
        values.sort_unstable_by(|a, b| a.total_cmp(b));
        Ok(Self { label, values, q })
    }

    /// Builds a group sample from values that must already be nondecreasing.
    pub fn from_sorted(label: impl Into<String>, values: Vec<f64>, q: f64) -> Result<Self> {
        let label = label.into();
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Unsorted { label });
        }
        Self::new(label, values, q)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Sorted observations.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Quantile percentage in (0, 1).
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Sample size m.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 1-based index of the smallest order statistic strictly greater than
    /// `t`, or `None` when every observation is at or below `t`.
    fn first_above(&self, t: f64) -> Option<usize> {
        let pos = self.values.partition_point(|v| *v <= t);
        if pos == self.values.len() {
            None
        } else {
            Some(pos + 1)
        }
    }
}

/// Witness tuple certifying an ordering statement: one `(j_i, j'_i)` index
/// pair per group, using the sentinel conventions `j_1 = 0` and
/// `j'_n = m_n + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderWitness {
    pairs: Vec<(usize, usize)>,
}

impl OrderWitness {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Confidence of one ordering statement, in log and linear form, with the
/// maximizing witness when the confidence is nonzero.
#[derive(Clone, Debug)]
pub struct ConfidenceResult {
    /// Natural log of the confidence; zero confidence is `-inf`.
    pub log_confidence: f64,
    /// Maximizing witness; `None` when no witness has positive probability.
    pub witness: Option<OrderWitness>,
    /// Group labels in the certified order `Q_1 < ... < Q_n`.
    pub permutation: Vec<String>,
}

impl ConfidenceResult {
    /// Linear-scale confidence in `[0, 1]`.
    pub fn confidence(&self) -> f64 {
        self.log_confidence.exp()
    }
}

fn ln_prob(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        p.min(1.0).ln()
    }
}

fn labels_of(groups: &[&GroupSample]) -> Vec<String> {
    groups.iter().map(|g| g.label.clone()).collect()
}

/// Confidence that the group quantiles are strictly increasing in the given
/// order, maximized over all witnesses by the layered dynamic program.
///
/// Runs in O(sum_i m_{i-1} m_i log m_i) time and O(sum_i m_i) auxiliary
/// memory; two groups take a single linear sweep over the first sample.
pub fn quor_confidence(groups: &[GroupSample]) -> Result<ConfidenceResult> {
    let refs: Vec<&GroupSample> = groups.iter().collect();
    quor_confidence_refs(&refs)
}

fn quor_confidence_refs(groups: &[&GroupSample]) -> Result<ConfidenceResult> {
    let n = groups.len();
    if n < 2 {
        return Err(Error::TooFewGroups { needed: 2, got: n });
    }
    let caches: Vec<BinomialCache> = groups
        .iter()
        .map(|g| BinomialCache::new(g.len(), g.q))
        .collect::<Result<_>>()?;

    // Layer for the first group: contribution of the index range (0, l].
    let mut d_prev: Vec<f64> = caches[0].cdf()[..groups[0].len()]
        .iter()
        .map(|&p| ln_prob(p))
        .collect();

    // backs[g - 1][l - 1] = maximizing previous-layer index for middle group g.
    let mut backs: Vec<Vec<usize>> = Vec::new();

    for g in 1..n - 1 {
        let prev_vals = groups[g - 1].values();
        let cur = groups[g];
        let pmf = caches[g].pmf_slice();
        let m = cur.len();
        let mut d_cur = vec![f64::NEG_INFINITY; m];
        let mut back = vec![0usize; m];
        for l in 1..=m {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            let mut window = Kahan::default();
            let mut low = l; // window covers pmf indices low..l
            for lp in (1..=prev_vals.len()).rev() {
                if d_prev[lp - 1] == f64::NEG_INFINITY {
                    continue;
                }
                let j = match cur.first_above(prev_vals[lp - 1]) {
                    Some(j) => j,
                    None => continue,
                };
                if j >= l || cur.values[j - 1] >= cur.values[l - 1] {
                    continue;
                }
                while low > j {
                    low -= 1;
                    window.add(pmf[low]);
                }
                let cand = d_prev[lp - 1] + ln_prob(window.value());
                if cand > best {
                    best = cand;
                    arg = lp;
                }
            }
            d_cur[l - 1] = best;
            back[l - 1] = arg;
        }
        backs.push(back);
        d_prev = d_cur;
    }

    // Final layer: last group's contribution is the upper tail at j_n.
    let last = groups[n - 1];
    let prev_vals = groups[n - 2].values();
    let mut best = f64::NEG_INFINITY;
    let mut best_lp = 0usize;
    for lp in 1..=prev_vals.len() {
        if d_prev[lp - 1] == f64::NEG_INFINITY {
            continue;
        }
        let j = match last.first_above(prev_vals[lp - 1]) {
            Some(j) => j,
            None => continue,
        };
        let cand = d_prev[lp - 1] + ln_prob(caches[n - 1].upper_tail(j)?);
        if cand > best {
            best = cand;
            best_lp = lp;
        }
    }

    if best == f64::NEG_INFINITY {
        return Ok(ConfidenceResult {
            log_confidence: f64::NEG_INFINITY,
            witness: None,
            permutation: labels_of(groups),
        });
    }

    // Backtrack the chosen upper indices, then derive each lower index as the
    // smallest order statistic above the previous group's chosen value.
    let mut chain = vec![0usize; n - 1];
    chain[n - 2] = best_lp;
    for g in (1..n - 1).rev() {
        chain[g - 1] = backs[g - 1][chain[g] - 1];
    }
    let mut pairs = Vec::with_capacity(n);
    pairs.push((0, chain[0]));
    for g in 1..n {
        let t = groups[g - 1].values[chain[g - 1] - 1];
        let j = groups[g]
            .first_above(t)
            .expect("backtracked witness index must exist");
        let upper = if g == n - 1 {
            groups[g].len() + 1
        } else {
            chain[g]
        };
        pairs.push((j, upper));
    }

    Ok(ConfidenceResult {
        log_confidence: best.min(0.0),
        witness: Some(OrderWitness { pairs }),
        permutation: labels_of(groups),
    })
}

/// Two-group fast path: confidence that `a`'s quantile lies strictly below
/// `b`'s, computed by one merge-style sweep with a two-pointer lower-index
/// derivation.
pub fn quor_confidence_pair(a: &GroupSample, b: &GroupSample) -> Result<ConfidenceResult> {
    let ca = BinomialCache::new(a.len(), a.q)?;
    let cb = BinomialCache::new(b.len(), b.q)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_l = 0usize;
    let mut best_j = 0usize;
    let mut pos = 0usize;
    for l in 1..=a.len() {
        let t = a.values[l - 1];
        while pos < b.len() && b.values[pos] <= t {
            pos += 1;
        }
        if pos == b.len() {
            break;
        }
        let j = pos + 1;
        let cand = ln_prob(ca.cdf()[l - 1]) + ln_prob(cb.upper_tail(j)?);
        if cand > best {
            best = cand;
            best_l = l;
            best_j = j;
        }
    }
    let witness = if best == f64::NEG_INFINITY {
        None
    } else {
        Some(OrderWitness {
            pairs: vec![(0, best_l), (best_j, b.len() + 1)],
        })
    };
    Ok(ConfidenceResult {
        log_confidence: best.min(0.0),
        witness,
        permutation: vec![a.label.clone(), b.label.clone()],
    })
}

/// Evaluates every permutation of the given groups and returns the results
/// sorted by descending log-confidence; ties keep lexicographic permutation
/// order. Refuses more than `max_groups` groups (n! permutations).
pub fn permutation_scan(groups: &[GroupSample], max_groups: usize) -> Result<Vec<ConfidenceResult>> {
    use itertools::Itertools;
    let n = groups.len();
    if n < 2 {
        return Err(Error::TooFewGroups { needed: 2, got: n });
    }
    if n > max_groups {
        return Err(Error::TooManyGroups {
            max: max_groups,
            got: n,
        });
    }
    let mut results = Vec::new();
    for perm in (0..n).permutations(n) {
        let ordered: Vec<&GroupSample> = perm.iter().map(|&i| &groups[i]).collect();
        results.push(quor_confidence_refs(&ordered)?);
    }
    results.sort_by(|x, y| y.log_confidence.total_cmp(&x.log_confidence));
    Ok(results)
}

/// Exhaustive reference implementation: enumerates every witness tuple that
/// satisfies the strict value chain and returns the maximum product of
/// contributions. Exponential in the number of groups; guarded by
/// [`BRUTE_FORCE_CAP`]. Intended for validating the dynamic program.
pub fn brute_force_confidence(groups: &[GroupSample]) -> Result<ConfidenceResult> {
    let n = groups.len();
    if n < 2 {
        return Err(Error::TooFewGroups { needed: 2, got: n });
    }
    let bound: f64 = groups
        .iter()
        .map(|g| ((g.len() + 1) as f64).powi(2))
        .product();
    if bound > BRUTE_FORCE_CAP {
        return Err(Error::EnumerationTooLarge {
            bound,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let caches: Vec<BinomialCache> = groups
        .iter()
        .map(|g| BinomialCache::new(g.len(), g.q))
        .collect::<Result<_>>()?;

    let mut best = f64::NEG_INFINITY;
    let mut best_pairs: Option<Vec<(usize, usize)>> = None;
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);

    // Depth-first enumeration over groups; `prev_top` is the observed value
    // at the previous group's upper index, which the current group's lower
    // index must strictly exceed.
    fn recurse(
        groups: &[GroupSample],
        caches: &[BinomialCache],
        g: usize,
        prev_top: Option<f64>,
        acc: f64,
        stack: &mut Vec<(usize, usize)>,
        best: &mut f64,
        best_pairs: &mut Option<Vec<(usize, usize)>>,
    ) {
        let n = groups.len();
        let cur = &groups[g];
        let m = cur.len();
        let lows: Vec<usize> = if g == 0 { vec![0] } else { (1..=m).collect() };
        for j in lows {
            if g > 0 {
                let t = prev_top.expect("previous value set for g > 0");
                if cur.values[j - 1] <= t {
                    continue;
                }
            }
            let uppers: Vec<usize> = if g == n - 1 {
                vec![m + 1]
            } else {
                ((j + 1).max(1)..=m).collect()
            };
            for jp in uppers {
                if g < n - 1 && (jp <= j || cur.values[jp - 1] <= cur.values[j.max(1) - 1]) {
                    // Within-group strictness needs j < j' and strictly
                    // increasing observed values; the sentinel j = 0 for the
                    // first group always satisfies it.
                    if j != 0 {
                        continue;
                    }
                }
                let contrib = ln_prob(caches[g].interval_prob(j, jp).unwrap());
                if contrib == f64::NEG_INFINITY {
                    continue;
                }
                let acc2 = acc + contrib;
                stack.push((j, jp));
                if g == n - 1 {
                    if acc2 > *best {
                        *best = acc2;
                        *best_pairs = Some(stack.clone());
                    }
                } else {
                    recurse(
                        groups,
                        caches,
                        g + 1,
                        Some(cur.values[jp - 1]),
                        acc2,
                        stack,
                        best,
                        best_pairs,
                    );
                }
                stack.pop();
            }
        }
    }

    recurse(
        groups,
        &caches,
        0,
        None,
        0.0,
        &mut stack,
        &mut best,
        &mut best_pairs,
    );

    let refs: Vec<&GroupSample> = groups.iter().collect();
    Ok(ConfidenceResult {
        log_confidence: best.min(0.0),
        witness: best_pairs.map(|pairs| OrderWitness { pairs }),
        permutation: labels_of(&refs),
    })
}

/// Re-evaluates the product of contributions for an explicit witness.
///
/// Returns `-inf` when the witness violates a strict value-chain requirement
/// (that witness certifies nothing); malformed shapes and out-of-range
/// indices are errors.
pub fn evaluate_witness(groups: &[GroupSample], witness: &OrderWitness) -> Result<f64> {
    let n = groups.len();
    if n < 2 {
        return Err(Error::TooFewGroups { needed: 2, got: n });
    }
    if witness.pairs.len() != n {
        return Err(Error::MalformedWitness {
            reason: format!("{} pairs for {} groups", witness.pairs.len(), n),
        });
    }
    let (j0, _) = witness.pairs[0];
    if j0 != 0 {
        return Err(Error::MalformedWitness {
            reason: format!("first lower index must be the sentinel 0, got {j0}"),
        });
    }
    let m_last = groups[n - 1].len();
    if witness.pairs[n - 1].1 != m_last + 1 {
        return Err(Error::MalformedWitness {
            reason: format!(
                "last upper index must be the sentinel {} (m+1), got {}",
                m_last + 1,
                witness.pairs[n - 1].1
            ),
        });
    }
    let mut total = 0.0f64;
    let mut prev_top: Option<f64> = None;
    for (g, &(j, jp)) in witness.pairs.iter().enumerate() {
        let cur = &groups[g];
        let m = cur.len();
        if j > m + 1 || jp > m + 1 {
            return Err(Error::IndexRange {
                name: "witness index",
                value: j.max(jp),
                max: m + 1,
            });
        }
        if g > 0 && (j < 1 || j > m) {
            return Err(Error::MalformedWitness {
                reason: format!("group {} lower index {} must lie in 1..={}", g + 1, j, m),
            });
        }
        if g < n - 1 && (jp < 1 || jp > m) {
            return Err(Error::MalformedWitness {
                reason: format!("group {} upper index {} must lie in 1..={}", g + 1, jp, m),
            });
        }
        // Strict chain: previous group's upper value < this group's lower
        // value < this group's upper value (sentinels pass trivially).
        if let Some(t) = prev_top {
            if cur.values[j - 1] <= t {
                return Ok(f64::NEG_INFINITY);
            }
        }
        if j >= 1 && jp <= m && (j >= jp || cur.values[j - 1] >= cur.values[jp - 1]) {
            return Ok(f64::NEG_INFINITY);
        }
        let cache = BinomialCache::new(m, cur.q)?;
        total += ln_prob(cache.interval_prob(j, jp)?);
        if total == f64::NEG_INFINITY {
            return Ok(total);
        }
        prev_top = if jp <= m {
            Some(cur.values[jp - 1])
        } else {
            None
        };
    }
    Ok(total.min(0.0))
}

/// Distribution-free confidence interval for one group's quantile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantileCi {
    /// Lower order-statistic index; 0 is the sentinel below all observations.
    pub lo: usize,
    /// Upper order-statistic index; m + 1 is the sentinel above all
    /// observations.
    pub hi: usize,
}

/// Smallest index-width order-statistic interval whose coverage of the
/// group's quantile reaches `gamma`; among equal widths the smallest lower
/// index wins. Returns the interval and its achieved coverage.
///
/// The chosen indices depend only on the sample size and `q`, never on the
/// observed values.
pub fn quantile_ci(sample: &GroupSample, gamma: f64) -> Result<(QuantileCi, f64)> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::ProbabilityRange {
            name: "gamma",
            range: "(0, 1)",
            value: gamma,
        });
    }
    let m = sample.len();
    let cache = BinomialCache::new(m, sample.q)?;
    let mut best: Option<(usize, usize, f64)> = None;
    let mut hi = 1usize;
    for lo in 0..=m {
        if hi <= lo {
            hi = lo + 1;
        }
        let mut cov = cache.interval_prob(lo, hi)?;
        while cov < gamma && hi <= m {
            hi += 1;
            cov = cache.interval_prob(lo, hi)?;
        }
        if cov < gamma {
            break;
        }
        let improves = match best {
            None => true,
            Some((bl, bh, _)) => hi - lo < bh - bl,
        };
        if improves {
            best = Some((lo, hi, cov));
        }
    }
    let (lo, hi, cov) = best.expect("full range has coverage 1 >= gamma");
    Ok((QuantileCi { lo, hi }, cov))
}
