//! Rank-based tests: Kruskal-Wallis H and the Wilcoxon signed-rank test.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Result, StatsError};

/// Effective sample size up to which the signed-rank p-value is exact.
pub const EXACT_SIGNED_RANK_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    KruskalWallis,
    WilcoxonSignedRank,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    /// Pooled size for Kruskal-Wallis, nonzero differences for Wilcoxon.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    pub test: TestResult,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Whether `p_value` came from the exact null distribution.
    pub exact: bool,
}

/// Midranks (1-based) of `values`, plus the sizes of every tie group.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum()
}

/// Kruskal-Wallis H with the usual tie correction; p from the chi-square
/// upper tail with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(StatsError::DegenerateInput(format!(
            "Kruskal-Wallis needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(StatsError::DegenerateInput(format!("group {i} is empty")));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite observation".into()));
    }
    let n = pooled.len();
    if n < 3 {
        return Err(StatsError::DegenerateInput(format!(
            "Kruskal-Wallis needs at least 3 observations, got {n}"
        )));
    }

    let (ranks, ties) = midranks(&pooled);
    let nf = n as f64;
    let mut offset = 0;
    let mut weighted = 0.0;
    for g in groups {
        let rank_sum: f64 = ranks[offset..offset + g.len()].iter().sum();
        weighted += rank_sum * rank_sum / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (nf * (nf + 1.0)) * weighted - 3.0 * (nf + 1.0);
    let correction = 1.0 - tie_sum(&ties) / (nf * nf * nf - nf);

    let df = (groups.len() - 1) as f64;
    let (statistic, p_value) = if correction <= 0.0 {
        // every pooled value identical
        (0.0, 1.0)
    } else {
        let h = (h_raw / correction).max(0.0);
        let chi = ChiSquared::new(df).expect("df >= 1");
        (h, clamp_p(chi.sf(h)))
    };

    Ok(TestResult {
        method: TestMethod::KruskalWallis,
        statistic,
        p_value,
        n,
    })
}

/// Wilcoxon signed-rank test on paired observations `(x, y)`, using `x - y`.
///
/// Zero differences are dropped. With at most
/// [`EXACT_SIGNED_RANK_MAX_N`] remaining pairs the two-sided p-value is
/// exact under the midrank null distribution; above that a normal
/// approximation with tie and continuity corrections is used.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<WilcoxonResult> {
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite observation".into()));
    }
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }

    let n = diffs.len();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&magnitudes);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let exact = n <= EXACT_SIGNED_RANK_MAX_N;
    let p_value = if exact {
        exact_signed_rank_p(&ranks, w_plus)
    } else {
        let nf = n as f64;
        let mean = total / 2.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum(&ties) / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
            let normal = Normal::standard();
            clamp_p(2.0 * normal.sf(z))
        }
    };

    Ok(WilcoxonResult {
        test: TestResult {
            method: TestMethod::WilcoxonSignedRank,
            statistic: w_plus.min(w_minus),
            p_value,
            n,
        },
        w_plus,
        w_minus,
        exact,
    })
}

/// Two-sided exact p-value of the observed positive rank sum.
///
/// Midranks are multiples of 1/2, so the null distribution of the doubled
/// rank sum is counted over integers with a subset-sum recurrence. Counts stay
/// exact in f64 for n <= 52.
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max_sum + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }

    let observed = (w_plus * 2.0).round() as usize;
    let lower: f64 = counts[..=observed].iter().sum();
    let upper: f64 = counts[observed..].iter().sum();
    let patterns = 2f64.powi(ranks.len() as i32);
    (2.0 * lower.min(upper) / patterns).min(1.0)
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(f64::MIN_POSITIVE, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_diffs(d: &[f64]) -> Vec<(f64, f64)> {
        d.iter().map(|&d| (d, 0.0)).collect()
    }

    #[test]
    fn midranks_average_ties() {
        let (r, ties) = midranks(&[10.0, 20.0, 20.0, 5.0]);
        assert_eq!(r, vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(ties, vec![1, 1, 2]);
    }

    #[test]
    fn kruskal_two_by_two() {
        let r = kruskal_wallis(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert!((r.statistic - 2.4).abs() < 1e-12);
        assert_eq!(r.n, 4);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn kruskal_constant_groups() {
        let g = [3.0, 3.0, 3.0];
        let r = kruskal_wallis(&[&g, &g, &g]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn kruskal_rejects_empty_group() {
        let err = kruskal_wallis(&[&[1.0, 2.0], &[]]).unwrap_err();
        assert!(matches!(err, StatsError::DegenerateInput(_)));
        assert!(kruskal_wallis(&[&[1.0, 2.0]]).is_err());
        assert!(kruskal_wallis(&[&[1.0], &[2.0]]).is_err());
    }

    #[test]
    fn signed_rank_all_positive() {
        let r = wilcoxon_signed_rank(&from_diffs(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert!(r.exact);
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(r.test.statistic, 0.0);
        assert_eq!(r.test.p_value, 2.0 / 32.0);
    }

    #[test]
    fn signed_rank_mixed_signs() {
        let r = wilcoxon_signed_rank(&from_diffs(&[1.0, -2.0, 3.0])).unwrap();
        assert_eq!(r.w_plus, 4.0);
        assert_eq!(r.w_minus, 2.0);
        assert_eq!(r.test.p_value, 0.75);
    }

    #[test]
    fn signed_rank_drops_zeros() {
        let r = wilcoxon_signed_rank(&[(1.0, 1.0), (3.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(r.test.n, 2);
        assert_eq!(
            wilcoxon_signed_rank(&[(2.0, 2.0), (5.0, 5.0)]).unwrap_err().to_string(),
            StatsError::AllZeroDifferences.to_string()
        );
    }

    #[test]
    fn signed_rank_swap_is_antisymmetric() {
        let pairs = [(3.0, 1.0), (2.0, 4.5), (6.0, 1.0), (1.0, 1.5), (7.0, 2.0)];
        let swapped: Vec<_> = pairs.iter().map(|&(x, y)| (y, x)).collect();
        let a = wilcoxon_signed_rank(&pairs).unwrap();
        let b = wilcoxon_signed_rank(&swapped).unwrap();
        assert_eq!(a.test.p_value, b.test.p_value);
        assert_eq!(a.w_plus, b.w_minus);
        assert_eq!(a.w_minus, b.w_plus);
    }

    #[test]
    fn signed_rank_normal_branch_large_n() {
        // 40 positive differences: overwhelming evidence
        let d: Vec<f64> = (1..=40).map(f64::from).collect();
        let r = wilcoxon_signed_rank(&from_diffs(&d)).unwrap();
        assert!(!r.exact);
        assert!(r.test.p_value < 1e-6);
        // symmetric signs give a large p
        let d: Vec<f64> = (1..=40)
            .map(|i| if i % 2 == 0 { f64::from(i) } else { -f64::from(i) })
            .collect();
        let r = wilcoxon_signed_rank(&from_diffs(&d)).unwrap();
        assert!(r.test.p_value > 0.5);
    }
}
