//! Descriptive summaries and nonparametric group comparisons.
//!
//! The quantile convention is shared by every consumer in this crate: for a
//! sorted sample of n values, quantile level q sits at fractional rank
//! (n - 1) * q and is linearly interpolated between the two neighbouring
//! order statistics. Ranks in the group tests are mid-ranks, ties get the
//! average of the positions they span, and tie corrections are applied to
//! both the Kruskal-Wallis statistic and the Dunn standard error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chi2_survival, normal_survival, student_t_survival};

/// Five-number summary of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Outcome of a single hypothesis test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// One pairwise comparison from a post-hoc procedure. Group indices refer to
/// the order in which the groups were passed in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub group_a: usize,
    pub group_b: usize,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

/// Interpolated quantile of an ascending-sorted sample at level `q` in
/// [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("percentile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) || q.is_nan() {
        return Err(Error::DomainError(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    debug_assert!(
        sorted.windows(2).all(|w| w[0] <= w[1]),
        "percentile input must be sorted ascending"
    );
    let rank = (sorted.len() - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = rank - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Five-number summary. Rejects empty and non-finite input.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyInput("summary of an empty sample".into()));
    }
    ensure_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("values checked finite"));
    Ok(Summary {
        n: sorted.len(),
        min: sorted[0],
        q1: percentile(&sorted, 0.25)?,
        median: percentile(&sorted, 0.5)?,
        q3: percentile(&sorted, 0.75)?,
        max: sorted[sorted.len() - 1],
    })
}

fn ensure_finite(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::DomainError(format!(
            "non-finite observation {v} in sample"
        )));
    }
    Ok(())
}

/// Mid-ranks (1-based) of the pooled sample together with the sizes of the
/// tie groups.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut tie_sizes = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the average 1-based rank.
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        if end - start > 1 {
            tie_sizes.push(end - start);
        }
        start = end;
    }
    (ranks, tie_sizes)
}

struct RankedGroups {
    /// Rank sum per group.
    sums: Vec<f64>,
    sizes: Vec<usize>,
    n_total: usize,
    /// Sum of t^3 - t over tie groups.
    tie_term: f64,
}

fn rank_groups(groups: &[Vec<f64>]) -> Result<RankedGroups> {
    if groups.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "need at least two groups, got {}",
            groups.len()
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::EmptyInput(format!("group {i} is empty")));
        }
        ensure_finite(g)?;
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, tie_sizes) = midranks(&pooled);
    let mut sums = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        sums.push(ranks[offset..offset + g.len()].iter().sum());
        offset += g.len();
    }
    let tie_term = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    Ok(RankedGroups {
        sums,
        sizes: groups.iter().map(Vec::len).collect(),
        n_total: pooled.len(),
        tie_term,
    })
}

/// Kruskal-Wallis rank test across two or more groups, with the tie
/// correction applied to the statistic. The p-value comes from the
/// chi-square survival function with k - 1 degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    let ranked = rank_groups(groups)?;
    let n = ranked.n_total as f64;
    let correction = 1.0 - ranked.tie_term / (n * n * n - n);
    if correction <= 0.0 {
        return Err(Error::DegenerateData(
            "all pooled observations are identical".into(),
        ));
    }
    let sum_term: f64 = ranked
        .sums
        .iter()
        .zip(ranked.sizes.iter())
        .map(|(&r, &s)| r * r / s as f64)
        .sum();
    let h = (12.0 / (n * (n + 1.0)) * sum_term - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    let df = (groups.len() - 1) as f64;
    Ok(TestResult {
        statistic: h,
        df,
        p_value: chi2_survival(h, df)?,
    })
}

/// Dunn's pairwise comparisons on the pooled mid-ranks, one entry per
/// unordered pair in lexicographic order, with Holm-adjusted p-values.
pub fn dunn_posthoc(groups: &[Vec<f64>]) -> Result<Vec<PairwiseResult>> {
    let ranked = rank_groups(groups)?;
    let n = ranked.n_total as f64;
    let var_base = n * (n + 1.0) / 12.0 - ranked.tie_term / (12.0 * (n - 1.0));
    if var_base <= 0.0 {
        return Err(Error::DegenerateData(
            "all pooled observations are identical".into(),
        ));
    }
    let mean_ranks: Vec<f64> = ranked
        .sums
        .iter()
        .zip(ranked.sizes.iter())
        .map(|(&r, &s)| r / s as f64)
        .collect();
    let mut results = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let se =
                (var_base * (1.0 / ranked.sizes[i] as f64 + 1.0 / ranked.sizes[j] as f64)).sqrt();
            let z = (mean_ranks[i] - mean_ranks[j]) / se;
            results.push(PairwiseResult {
                group_a: i,
                group_b: j,
                z,
                p_raw: 2.0 * normal_survival(z.abs()),
                p_adjusted: f64::NAN,
            });
        }
    }
    let adjusted = holm_adjust(&results.iter().map(|r| r.p_raw).collect::<Vec<_>>())?;
    for (r, p) in results.iter_mut().zip(adjusted) {
        r.p_adjusted = p;
    }
    Ok(results)
}

/// Holm step-down adjustment. The k-th smallest p-value is multiplied by
/// (m - k + 1), a running maximum enforces monotonicity, and everything is
/// capped at 1. Output order matches input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::DomainError(format!("p-value {p} outside [0, 1]")));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).expect("checked"));
    let mut adjusted = vec![0.0; m];
    let mut running_max = 0.0f64;
    for (k, &idx) in order.iter().enumerate() {
        let scaled = p_values[idx] * (m - k) as f64;
        running_max = running_max.max(scaled);
        adjusted[idx] = running_max.min(1.0);
    }
    Ok(adjusted)
}

/// Two-sided paired t-test on matched samples.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::DomainError(format!(
            "paired samples differ in length, {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "paired t-test needs at least two pairs, got {}",
            a.len()
        )));
    }
    ensure_finite(a)?;
    ensure_finite(b)?;
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateData(
            "paired differences have zero variance".into(),
        ));
    }
    let t = mean / (sd / n.sqrt());
    let df = n - 1.0;
    Ok(TestResult {
        statistic: t,
        df,
        p_value: 2.0 * student_t_survival(t.abs(), df)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, expected: f64, tol: f64, what: &str) {
        assert!(
            (got - expected).abs() <= tol,
            "{what}: got {got}, expected {expected}"
        );
    }

    #[test]
    fn percentile_interpolates_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 4.0);
        assert_eq!(percentile(&v, 0.5).unwrap(), 2.5);
        assert_eq!(percentile(&v, 0.25).unwrap(), 1.75);
        assert_eq!(percentile(&v, 0.75).unwrap(), 3.25);
        assert_eq!(percentile(&[7.0], 0.3).unwrap(), 7.0);
        assert!(percentile(&v, 1.5).is_err());
        assert!(percentile(&[], 0.5).is_err());
    }

    #[test]
    fn summary_of_four_values() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(
            s,
            Summary {
                n: 4,
                min: 1.0,
                q1: 1.75,
                median: 2.5,
                q3: 3.25,
                max: 4.0
            }
        );
        assert!(summarize(&[]).is_err());
        assert!(summarize(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn midranks_average_over_ties() {
        let (ranks, ties) = midranks(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        assert_eq!(ranks, vec![3.0, 1.5, 4.0, 1.5, 5.0]);
        assert_eq!(ties, vec![2]);
    }

    #[test]
    fn kruskal_wallis_on_three_disjoint_groups() {
        let groups = vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ];
        let r = kruskal_wallis(&groups).unwrap();
        assert_close(r.statistic, 7.2, 1e-12, "H");
        assert_eq!(r.df, 2.0);
        assert_close(r.p_value, (-3.6f64).exp(), 1e-12, "p");
    }

    #[test]
    fn kruskal_wallis_with_ties_by_hand() {
        // Pooled [1, 1, 2, 3] has ranks [1.5, 1.5, 3, 4]; rank sums 3 and 7;
        // the uncorrected statistic is 12/20 * (9/2 + 49/2) - 15 = 2.4 and
        // the tie correction is 1 - 6/60 = 0.9.
        let groups = vec![vec![1.0, 1.0], vec![2.0, 3.0]];
        let r = kruskal_wallis(&groups).unwrap();
        assert_close(r.statistic, 2.4 / 0.9, 1e-12, "tie-corrected H");
    }

    #[test]
    fn kruskal_wallis_is_invariant_under_monotone_maps() {
        let groups = vec![
            vec![0.82, 0.91, 0.88, 0.79],
            vec![0.84, 0.93, 0.90],
            vec![0.70, 0.95, 0.86, 0.81, 0.77],
        ];
        let mapped: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| g.iter().map(|&v| v * v * v).collect())
            .collect();
        let a = kruskal_wallis(&groups).unwrap();
        let b = kruskal_wallis(&mapped).unwrap();
        assert_eq!(a.statistic, b.statistic);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn kruskal_wallis_rejects_degenerate_input() {
        assert!(matches!(
            kruskal_wallis(&[vec![2.0, 2.0], vec![2.0, 2.0]]),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            kruskal_wallis(&[vec![1.0]]),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            kruskal_wallis(&[vec![1.0], vec![]]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn dunn_on_three_disjoint_groups() {
        let groups = vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ];
        let results = dunn_posthoc(&groups).unwrap();
        assert_eq!(results.len(), 3);
        let pairs: Vec<(usize, usize)> = results.iter().map(|r| (r.group_a, r.group_b)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);

        // Mean ranks are 2, 5, 8 and the standard error is sqrt(7.5 * 2/3),
        // so the extreme pair has z = -6 / sqrt(5).
        let extreme = &results[1];
        assert_close(extreme.z, -6.0 / 5f64.sqrt(), 1e-12, "z for pair (0, 2)");
        assert_close(extreme.p_raw, 0.00729, 5e-6, "two-sided normal p");
        // The extreme pair is the smallest p and gets the factor 3; the
        // adjacent pairs are symmetric and share a z of -3 / sqrt(5).
        assert_close(extreme.p_adjusted, extreme.p_raw * 3.0, 1e-15, "holm");
        assert_close(results[0].z, -3.0 / 5f64.sqrt(), 1e-12, "z for pair (0, 1)");
        assert_close(results[0].z, results[2].z, 1e-12, "symmetric pairs");
    }

    #[test]
    fn dunn_z_is_antisymmetric_in_group_order() {
        let groups = vec![vec![1.0, 5.0, 3.0], vec![2.0, 8.0, 9.0, 4.0]];
        let swapped = vec![groups[1].clone(), groups[0].clone()];
        let a = dunn_posthoc(&groups).unwrap();
        let b = dunn_posthoc(&swapped).unwrap();
        assert_close(a[0].z, -b[0].z, 1e-12, "antisymmetry");
        assert_eq!(a[0].p_raw, b[0].p_raw);
    }

    #[test]
    fn holm_worked_example() {
        let adjusted = holm_adjust(&[0.01, 0.04, 0.03]).unwrap();
        assert_close(adjusted[0], 0.03, 1e-12, "smallest p scaled by 3");
        assert_close(adjusted[1], 0.06, 1e-12, "largest p lifted by running max");
        assert_close(adjusted[2], 0.06, 1e-12, "middle p scaled by 2");
    }

    #[test]
    fn holm_caps_and_orders() {
        let adjusted = holm_adjust(&[0.9, 0.8, 0.5]).unwrap();
        assert!(adjusted.iter().all(|&p| p <= 1.0));
        assert_eq!(adjusted[0], 1.0);
        let empty = holm_adjust(&[]).unwrap();
        assert!(empty.is_empty());
        assert!(holm_adjust(&[1.5]).is_err());
        assert!(holm_adjust(&[-0.1]).is_err());

        // Adjustment never lowers a p-value.
        let ps = [0.2, 0.01, 0.04, 0.04, 0.99];
        let adj = holm_adjust(&ps).unwrap();
        for (raw, adj) in ps.iter().zip(adj.iter()) {
            assert!(adj >= raw);
        }
    }

    #[test]
    fn paired_t_on_constant_shift() {
        let a = [2.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0];
        let r = paired_t(&a, &b).unwrap();
        assert_close(r.statistic, 2.0 * 3f64.sqrt(), 1e-12, "t");
        assert_eq!(r.df, 2.0);
        // Closed form of the two-sided p for df = 2.
        let t = r.statistic;
        assert_close(r.p_value, 1.0 - t / (2.0 + t * t).sqrt(), 1e-12, "p");

        let swapped = paired_t(&b, &a).unwrap();
        assert_close(swapped.statistic, -r.statistic, 1e-12, "antisymmetry");
        assert_close(swapped.p_value, r.p_value, 1e-15, "two-sided p");
    }

    #[test]
    fn paired_t_rejects_bad_input() {
        assert!(matches!(
            paired_t(&[1.0, 2.0], &[1.0]),
            Err(Error::DomainError(_))
        ));
        assert!(matches!(paired_t(&[1.0], &[1.0]), Err(Error::EmptyInput(_))));
        assert!(matches!(
            paired_t(&[3.0, 4.0, 5.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateData(_))
        ));
    }
}
