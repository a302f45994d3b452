//! Classical two-sample location tests and multiple-testing correction.
//!
//! These are the comparison baselines for the confidence ranking: Student's
//! t-test (pooled variance by default, Welch optional), the Mann-Whitney U
//! test (exact small-sample distribution when there are no ties, normal
//! approximation with tie and continuity corrections otherwise), the
//! two-sample Kolmogorov-Smirnov test with the asymptotic distribution at
//! the effective sample size, and Holm-Bonferroni step-down adjustment.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Combined sample size at or below which the U test uses the exact null
/// distribution (ties still force the normal approximation).
pub const U_EXACT_LIMIT: usize = 20;

/// Which baseline test produced a [`TestResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineMethod {
    TTest,
    UTest,
    KsTest,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::TTest => "t",
            BaselineMethod::UTest => "u",
            BaselineMethod::KsTest => "ks",
        }
    }
}

/// Variance assumption for [`t_test_variant`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TTestVariant {
    /// Pooled-variance two-sample t-test (the default everywhere).
    #[default]
    Pooled,
    /// Welch's unequal-variance form with Satterthwaite degrees of freedom.
    Welch,
}

/// Outcome of a two-sample baseline test.
#[derive(Clone, Copy, Debug)]
pub struct TestResult {
    pub method: BaselineMethod,
    pub statistic: f64,
    /// Two-sided p-value in `[0, 1]`.
    pub p_value: f64,
    /// +1 when the first sample tends larger, -1 when smaller, 0 when the
    /// test sees no direction.
    pub direction: i8,
    /// Set when a zero-variance or otherwise boundary input forced a
    /// convention rather than a computation.
    pub degenerate: bool,
}

fn validate(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyGroup { label: name.into() });
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { label: name.into() });
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for a single observation.
fn sample_var(xs: &[f64], mu: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    xs.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64
}

fn sign_of(diff: f64) -> i8 {
    if diff > 0.0 {
        1
    } else if diff < 0.0 {
        -1
    } else {
        0
    }
}

/// Pooled-variance two-sample Student's t-test, two-sided.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    t_test_variant(a, b, TTestVariant::Pooled)
}

/// Two-sample t-test with an explicit variance assumption.
///
/// Zero pooled variance degenerates: equal means give statistic 0 and p 1,
/// unequal means give an infinite statistic and p 0, both flagged.
pub fn t_test_variant(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TestResult> {
    validate("a", a)?;
    validate("b", b)?;
    let (ma, mb) = (a.len(), b.len());
    let need = match variant {
        TTestVariant::Pooled => ma + mb >= 3,
        TTestVariant::Welch => ma >= 2 && mb >= 2,
    };
    if !need {
        return Err(Error::UnsupportedMethod {
            reason: format!("t-test needs more observations (got {ma} and {mb})"),
        });
    }
    let (mean_a, mean_b) = (mean(a), mean(b));
    let diff = mean_a - mean_b;
    let (var_a, var_b) = (sample_var(a, mean_a), sample_var(b, mean_b));

    let (se2, df) = match variant {
        TTestVariant::Pooled => {
            let pooled = ((ma - 1) as f64 * var_a + (mb - 1) as f64 * var_b)
                / (ma + mb - 2) as f64;
            (pooled * (1.0 / ma as f64 + 1.0 / mb as f64), (ma + mb - 2) as f64)
        }
        TTestVariant::Welch => {
            let (ta, tb) = (var_a / ma as f64, var_b / mb as f64);
            let se2 = ta + tb;
            let df = if se2 == 0.0 {
                1.0
            } else {
                se2 * se2 / (ta * ta / (ma - 1) as f64 + tb * tb / (mb - 1) as f64)
            };
            (se2, df)
        }
    };

    if se2 <= 0.0 {
        return Ok(if diff == 0.0 {
            TestResult {
                method: BaselineMethod::TTest,
                statistic: 0.0,
                p_value: 1.0,
                direction: 0,
                degenerate: true,
            }
        } else {
            TestResult {
                method: BaselineMethod::TTest,
                statistic: if diff > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value: 0.0,
                direction: sign_of(diff),
                degenerate: true,
            }
        });
    }

    let t = diff / se2.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric {
        message: format!("t distribution with df {df}: {e}"),
    })?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult {
        method: BaselineMethod::TTest,
        statistic: t,
        p_value: p,
        direction: sign_of(diff),
        degenerate: false,
    })
}

/// Midranks of the combined sample, returned per input slice.
fn midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut all: Vec<(f64, usize)> = a
        .iter()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .chain(b.iter().copied().enumerate().map(|(i, v)| (v, a.len() + i)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; all.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for k in i..=j {
            ranks[all[k].1] = avg;
        }
        if j > i {
            tie_sizes.push(j - i + 1);
        }
        i = j + 1;
    }
    let ra = ranks[..a.len()].to_vec();
    let rb = ranks[a.len()..].to_vec();
    (ra, rb, tie_sizes)
}

/// Exact null distribution of the Mann-Whitney U statistic for group sizes
/// (n1, n2): counts[u] = number of rank arrangements with U = u, out of
/// C(n1 + n2, n1) equally likely arrangements.
///
/// Conditioning on whether the largest remaining value belongs to group one
/// (adding n2 to U) or group two gives
/// N(u; i, j) = N(u - j; i - 1, j) + N(u; i, j - 1).
fn u_counts(n1: usize, n2: usize) -> Vec<f64> {
    let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n1 + 1);
    for i in 0..=n1 {
        let mut row = Vec::with_capacity(n2 + 1);
        for j in 0..=n2 {
            let mut counts = vec![0.0f64; i * j + 1];
            if i == 0 || j == 0 {
                counts[0] = 1.0;
            }
            row.push(counts);
        }
        table.push(row);
    }
    for i in 1..=n1 {
        for j in 1..=n2 {
            for u in 0..=i * j {
                let from_one = if u >= j { table[i - 1][j][u - j] } else { 0.0 };
                let from_two = if u <= i * (j - 1) { table[i][j - 1][u] } else { 0.0 };
                table[i][j][u] = from_one + from_two;
            }
        }
    }
    table.swap_remove(n1).swap_remove(n2)
}

/// Mann-Whitney U test on two independent samples, two-sided.
///
/// The reported statistic is `min(U_a, U_b)`. With combined size at most
/// [`U_EXACT_LIMIT`] and no ties the exact permutation distribution is used;
/// otherwise the normal approximation with tie and continuity corrections.
pub fn u_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    validate("a", a)?;
    validate("b", b)?;
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let (ra, _rb, tie_sizes) = midranks(a, b);
    let r_a: f64 = ra.iter().sum();
    let u_a = r_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;
    let u_min = u_a.min(u_b);
    let direction = sign_of(u_a - u_b);

    if n <= U_EXACT_LIMIT && tie_sizes.is_empty() {
        let counts = u_counts(na, nb);
        let total: f64 = counts.iter().sum();
        let k = u_min.floor() as usize;
        let below: f64 = counts[..=k.min(na * nb)].iter().sum();
        let p = (2.0 * below / total).min(1.0);
        return Ok(TestResult {
            method: BaselineMethod::UTest,
            statistic: u_min,
            p_value: p,
            direction,
            degenerate: false,
        });
    }

    let prod = (na * nb) as f64;
    let mu = prod / 2.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum::<f64>()
        / (n as f64 * (n as f64 - 1.0));
    let var = prod / 12.0 * ((n as f64 + 1.0) - tie_term);
    if var <= 0.0 {
        // Every observation identical: no information.
        return Ok(TestResult {
            method: BaselineMethod::UTest,
            statistic: u_min,
            p_value: 1.0,
            direction: 0,
            degenerate: true,
        });
    }
    let z = (u_min - mu + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = (2.0 * normal.cdf(z)).min(1.0);
    Ok(TestResult {
        method: BaselineMethod::UTest,
        statistic: u_min,
        p_value: p,
        direction,
        degenerate: false,
    })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 1e-8 {
        return 1.0;
    }
    let mut s = 0.0f64;
    let mut sign = 1.0f64;
    for j in 1..=200 {
        let term = (-2.0 * (j as f64) * (j as f64) * x * x).exp();
        s += sign * term;
        sign = -sign;
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// The statistic is the supremum distance between the empirical CDFs; the
/// p-value uses the asymptotic Kolmogorov distribution evaluated at the
/// effective sample size `m_a m_b / (m_a + m_b)`.
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    validate("a", a)?;
    validate("b", b)?;
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d_plus = 0.0f64; // max of F_a - F_b
    let mut d_minus = 0.0f64; // max of F_b - F_a
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        let diff = i as f64 / na - j as f64 / nb;
        d_plus = d_plus.max(diff);
        d_minus = d_minus.max(-diff);
    }
    let d = d_plus.max(d_minus);
    let direction = if d_plus > d_minus {
        -1 // a's cdf runs ahead: a tends smaller
    } else if d_minus > d_plus {
        1
    } else {
        0
    };
    let ne = na * nb / (na + nb);
    let p = kolmogorov_sf(ne.sqrt() * d);
    Ok(TestResult {
        method: BaselineMethod::KsTest,
        statistic: d,
        p_value: p,
        direction,
        degenerate: false,
    })
}

/// Holm-Bonferroni step-down adjustment.
///
/// Returns adjusted p-values in the original input order: sort p ascending,
/// multiply the k-th smallest by (n - k + 1), cap at 1, and enforce
/// monotonicity with a running maximum.
pub fn holm_bonferroni(ps: &[f64]) -> Result<Vec<f64>> {
    for &p in ps {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::PValueRange { value: p });
        }
    }
    let n = ps.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| ps[x].total_cmp(&ps[y]));
    let mut out = vec![0.0; n];
    let mut running = 0.0f64;
    for (k, &idx) in order.iter().enumerate() {
        let adj = ((n - k) as f64 * ps[idx]).min(1.0);
        running = running.max(adj);
        out[idx] = running;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn t_statistic_matches_hand_formula() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [3.0, 4.0, 5.0, 6.0];
        let r = t_test(&a, &b).unwrap();
        assert!((r.statistic - (-2.19089)).abs() <= 1e-5, "{}", r.statistic);
        assert_eq!(r.direction, -1);
        assert!(!r.degenerate);
        let swapped = t_test(&b, &a).unwrap();
        assert_eq!(swapped.statistic, -r.statistic);
        assert_eq!(swapped.p_value, r.p_value);
        assert_eq!(swapped.direction, 1);
    }

    /// Student's t tail probability by Simpson integration of the density,
    /// df = 6, with the normalizing constant in closed form.
    fn t6_two_sided(t: f64) -> f64 {
        let c = (15.0 / 16.0) / 6.0f64.sqrt();
        let f = |x: f64| c * (1.0 + x * x / 6.0).powf(-3.5);
        let n = 40_000;
        let h = t.abs() / n as f64;
        let mut s = f(0.0) + f(t.abs());
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(k as f64 * h);
        }
        let integral = s * h / 3.0;
        2.0 * (0.5 - integral)
    }

    #[test]
    fn t_p_value_matches_integration_oracle() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [3.0, 4.0, 5.0, 6.0];
        let r = t_test(&a, &b).unwrap();
        let want = t6_two_sided(r.statistic);
        assert!(
            (r.p_value - want).abs() <= 1e-8,
            "p {} vs oracle {}",
            r.p_value,
            want
        );
    }

    #[test]
    fn t_degenerate_conventions() {
        let r = t_test(&[2.0, 2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = t_test(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.statistic, f64::NEG_INFINITY);
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.direction, -1);
        let same = t_test(&[1.0, 2.0, 5.0], &[1.0, 2.0, 5.0]).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        assert!(!same.degenerate);
    }

    #[test]
    fn welch_variant_differs_when_variances_do() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let b = [10.0, 30.0];
        let pooled = t_test_variant(&a, &b, TTestVariant::Pooled).unwrap();
        let welch = t_test_variant(&a, &b, TTestVariant::Welch).unwrap();
        assert!((pooled.statistic - welch.statistic).abs() > 0.1);
        // Hand Welch: se^2 = var_a/8 + var_b/2, df from Satterthwaite.
        let se2: f64 = 6.0 / 8.0 + 200.0 / 2.0;
        let want = (4.5 - 20.0) / se2.sqrt();
        assert!((welch.statistic - want).abs() <= 1e-12);
    }

    #[test]
    fn u_exact_example() {
        let r = u_test(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0 / 3.0).abs() <= 1e-15);
        assert_eq!(r.direction, -1);
    }

    #[test]
    fn u_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = u_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.direction, 0);
    }

    /// Full permutation enumeration of min(U_a, U_b) over group relabelings.
    fn u_enumeration_p(a: &[f64], b: &[f64]) -> f64 {
        let pool: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let n = pool.len();
        let u_min_of = |xs: &[f64], ys: &[f64]| {
            let mut ua = 0.0f64;
            for &x in xs {
                for &y in ys {
                    if x > y {
                        ua += 1.0;
                    } else if x == y {
                        ua += 0.5;
                    }
                }
            }
            ua.min((xs.len() * ys.len()) as f64 - ua)
        };
        let observed = u_min_of(a, b);
        let mut hits = 0usize;
        let mut total = 0usize;
        for comb in (0..n).combinations(a.len()) {
            let xs: Vec<f64> = comb.iter().map(|&i| pool[i]).collect();
            let ys: Vec<f64> = (0..n)
                .filter(|i| !comb.contains(i))
                .map(|i| pool[i])
                .collect();
            total += 1;
            if u_min_of(&xs, &ys) <= observed + 1e-12 {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    }

    #[test]
    fn u_exact_matches_enumeration_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..40 {
            let na = rng.gen_range(1..=6);
            let nb = rng.gen_range(1..=6);
            let mut pool: Vec<f64> = (0..na + nb).map(|i| i as f64).collect();
            pool.shuffle(&mut rng);
            let a = pool[..na].to_vec();
            let b = pool[na..].to_vec();
            let r = u_test(&a, &b).unwrap();
            let want = u_enumeration_p(&a, &b);
            assert!(
                (r.p_value - want).abs() <= 1e-12,
                "na={na} nb={nb}: impl {} vs enumeration {}",
                r.p_value,
                want
            );
        }
    }

    #[test]
    fn u_large_or_tied_uses_normal_approximation() {
        let a: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..15).map(|i| (i as f64) + 7.5).collect();
        let r = u_test(&a, &b).unwrap();
        assert!(r.p_value > 0.0 && r.p_value < 0.05);
        assert_eq!(r.direction, -1);
        // All values identical: zero variance, flagged degenerate.
        let r = u_test(&[3.0, 3.0, 3.0], &[3.0, 3.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_statistic_and_edges() {
        let a = [1.0, 2.0, 3.0];
        let r = ks_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let lo = [1.0, 2.0, 3.0, 4.0];
        let hi = [10.0, 11.0, 12.0, 13.0];
        let r = ks_test(&lo, &hi).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.direction, -1);
        assert!(r.p_value < 0.1);
        assert_eq!(ks_test(&hi, &lo).unwrap().direction, 1);
    }

    #[test]
    fn ks_matches_brute_force_supremum() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        for _ in 0..50 {
            let na = rng.gen_range(1..=12);
            let nb = rng.gen_range(1..=12);
            let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0..8) as f64).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0..8) as f64).collect();
            let r = ks_test(&a, &b).unwrap();
            let mut want = 0.0f64;
            for &x in a.iter().chain(b.iter()) {
                let fa = a.iter().filter(|&&v| v <= x).count() as f64 / na as f64;
                let fb = b.iter().filter(|&&v| v <= x).count() as f64 / nb as f64;
                want = want.max((fa - fb).abs());
            }
            assert!(
                (r.statistic - want).abs() <= 1e-12,
                "D {} vs brute {}",
                r.statistic,
                want
            );
        }
    }

    #[test]
    fn holm_example_and_properties() {
        let adj = holm_bonferroni(&[0.01, 0.04, 0.03]).unwrap();
        assert_eq!(adj, vec![0.03, 0.06, 0.06]);
        assert_eq!(holm_bonferroni(&[]).unwrap(), Vec::<f64>::new());
        let single = holm_bonferroni(&[0.2]).unwrap();
        assert_eq!(single, vec![0.2]);
        assert!(matches!(
            holm_bonferroni(&[0.5, 1.2]),
            Err(Error::PValueRange { .. })
        ));
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..50 {
            let n = rng.gen_range(1..=12);
            let ps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let adj = holm_bonferroni(&ps).unwrap();
            for (p, q) in ps.iter().zip(adj.iter()) {
                assert!(*q >= *p - 1e-15 && *q <= 1.0);
            }
            // Adjustment preserves the significance order.
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&x, &y| ps[x].total_cmp(&ps[y]));
            for w in idx.windows(2) {
                assert!(adj[w[0]] <= adj[w[1]] + 1e-15);
            }
        }
    }

    #[test]
    fn swapping_samples_preserves_p_and_negates_direction() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        for _ in 0..40 {
            let na = rng.gen_range(2..=10);
            let nb = rng.gen_range(2..=10);
            let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0..20) as f64).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0..20) as f64).collect();
            for f in [t_test, u_test, ks_test] {
                let fwd = f(&a, &b).unwrap();
                let rev = f(&b, &a).unwrap();
                assert_eq!(fwd.p_value, rev.p_value);
                assert_eq!(fwd.direction, -rev.direction);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(t_test(&[], &[1.0]), Err(Error::EmptyGroup { .. })));
        assert!(matches!(
            u_test(&[1.0, f64::NAN], &[1.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(ks_test(&[1.0], &[]), Err(Error::EmptyGroup { .. })));
    }
}
