//! Rank-based hypothesis tests: Kruskal-Wallis H and Mann-Whitney U.

pub mod special;

pub use special::{chi_square_sf, erfc, ln_gamma, normal_sf, regularized_gamma_p, regularized_gamma_q};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on states visited by the exact enumerations.
pub const MAX_EXACT_STATES: u128 = 10_000_000;

/// `Auto` only switches Kruskal-Wallis to exact enumeration below this many label arrangements.
pub const AUTO_KW_EXACT_ARRANGEMENTS: u128 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSample {
    pub ranks: Vec<f64>,
    /// Multiplicity of each group of tied values (only groups with t ≥ 2).
    pub tie_groups: Vec<usize>,
}

impl RankedSample {
    /// Σ(t³ − t) over tie groups.
    pub fn tie_sum(&self) -> f64 {
        self.tie_groups.iter().map(|&t| (t * t * t - t) as f64).sum()
    }
}

pub fn midrank(values: &[f64]) -> Result<RankedSample> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot rank an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("cannot rank NaN".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            tie_groups.push(j - i);
        }
        i = j;
    }
    Ok(RankedSample { ranks, tie_groups })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatisticName {
    H,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    NormalApprox,
    ExactEnumeration,
    ChiSquareApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic_name: StatisticName,
    pub statistic: f64,
    pub df: Option<u32>,
    pub z: Option<f64>,
    pub p_value: f64,
    pub method: TestMethod,
    pub tie_corrected: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KruskalWallisMethod {
    #[default]
    ChiSquare,
    Exact,
    /// Exact when the number of label arrangements is small, chi-square otherwise.
    Auto,
}

/// Σ Rᵢ²/nᵢ for groups laid out consecutively in `ranks`.
fn rank_sum_score(ranks: &[f64], sizes: &[usize]) -> f64 {
    let mut start = 0;
    let mut score = 0.0;
    for &n in sizes {
        let r: f64 = ranks[start..start + n].iter().sum();
        score += r * r / n as f64;
        start += n;
    }
    score
}

fn multinomial(sizes: &[usize]) -> u128 {
    // N! / Π nᵢ! built up as a product of binomials.
    let mut total: u128 = 1;
    let mut n = 0u128;
    for &s in sizes {
        for i in 1..=s as u128 {
            n += 1;
            total = match total.checked_mul(n) {
                Some(t) => t / i,
                None => return u128::MAX,
            };
        }
    }
    total
}

/// Fraction of label arrangements whose Σ Rᵢ²/nᵢ is at least `observed`.
fn kruskal_wallis_exact_p(ranks: &[f64], sizes: &[usize], observed: f64) -> f64 {
    struct Walk<'a> {
        ranks: &'a [f64],
        sizes: &'a [usize],
        remaining: Vec<usize>,
        sums: Vec<f64>,
        threshold: f64,
        hits: u64,
        total: u64,
    }

    impl Walk<'_> {
        fn visit(&mut self, idx: usize) {
            if idx == self.ranks.len() {
                let score: f64 = self
                    .sums
                    .iter()
                    .zip(self.sizes)
                    .map(|(r, &n)| r * r / n as f64)
                    .sum();
                self.total += 1;
                if score >= self.threshold {
                    self.hits += 1;
                }
                return;
            }
            for g in 0..self.sizes.len() {
                if self.remaining[g] == 0 {
                    continue;
                }
                self.remaining[g] -= 1;
                self.sums[g] += self.ranks[idx];
                self.visit(idx + 1);
                self.sums[g] -= self.ranks[idx];
                self.remaining[g] += 1;
            }
        }
    }

    let scale = observed.abs().max(1.0);
    let mut walk = Walk {
        ranks,
        sizes,
        remaining: sizes.to_vec(),
        sums: vec![0.0; sizes.len()],
        threshold: observed - 1e-9 * scale,
        hits: 0,
        total: 0,
    };
    walk.visit(0);
    walk.hits as f64 / walk.total as f64
}

/// Kruskal-Wallis H test with the chi-square approximation.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    kruskal_wallis_with(groups, KruskalWallisMethod::ChiSquare)
}

pub fn kruskal_wallis_with(groups: &[Vec<f64>], method: KruskalWallisMethod) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidInput("Kruskal-Wallis needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidInput("Kruskal-Wallis groups must be nonempty".into()));
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let n: usize = sizes.iter().sum();
    if n < 3 {
        return Err(Error::InvalidInput("Kruskal-Wallis needs at least three observations".into()));
    }
    let df = (groups.len() - 1) as u32;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranked = midrank(&pooled)?;
    let nf = n as f64;
    let correction = 1.0 - ranked.tie_sum() / (nf * nf * nf - nf);
    let tie_corrected = !ranked.tie_groups.is_empty();

    if correction <= 0.0 {
        return Ok(TestResult {
            statistic_name: StatisticName::H,
            statistic: 0.0,
            df: Some(df),
            z: None,
            p_value: 1.0,
            method: TestMethod::ChiSquareApprox,
            tie_corrected,
            note: Some("degenerate: all observations identical".into()),
        });
    }

    let score = rank_sum_score(&ranked.ranks, &sizes);
    // centered form: no cancellation when the group means coincide
    let mid = (nf + 1.0) / 2.0;
    let mut spread = 0.0;
    let mut start = 0;
    for &s in &sizes {
        let mean_rank = ranked.ranks[start..start + s].iter().sum::<f64>() / s as f64;
        spread += s as f64 * (mean_rank - mid) * (mean_rank - mid);
        start += s;
    }
    let h = 12.0 / (nf * (nf + 1.0)) * spread / correction;

    let arrangements = multinomial(&sizes);
    let use_exact = match method {
        KruskalWallisMethod::ChiSquare => false,
        KruskalWallisMethod::Exact => {
            if arrangements > MAX_EXACT_STATES {
                return Err(Error::EnumerationTooLarge(arrangements));
            }
            true
        }
        KruskalWallisMethod::Auto => arrangements <= AUTO_KW_EXACT_ARRANGEMENTS,
    };

    let (p_value, method) = if use_exact {
        (kruskal_wallis_exact_p(&ranked.ranks, &sizes, score), TestMethod::ExactEnumeration)
    } else {
        (chi_square_sf(h, df)?, TestMethod::ChiSquareApprox)
    };

    Ok(TestResult {
        statistic_name: StatisticName::H,
        statistic: h,
        df: Some(df),
        z: None,
        p_value: p_value.clamp(0.0, 1.0),
        method,
        tie_corrected,
        note: None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MannWhitneyMode {
    /// Exact for tie-free samples with min(n1, n2) ≤ 8, normal otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MannWhitneyOptions {
    pub mode: MannWhitneyMode,
    pub continuity_correction: bool,
}

impl Default for MannWhitneyOptions {
    fn default() -> Self {
        MannWhitneyOptions { mode: MannWhitneyMode::Auto, continuity_correction: true }
    }
}

fn exact_u_work(n1: usize, n2: usize) -> u128 {
    let (m, n) = (n1.min(n2) as u128, n1.max(n2) as u128);
    (m + 1) * (m * n + 1) * n
}

/// Number of orderings of `n1` x's and `n2` y's for each value of
/// U = #{(x, y) : x > y}, indexed by U ∈ [0, n1·n2].
pub fn u_distribution(n1: usize, n2: usize) -> Vec<u128> {
    // The distribution is the same for (n1, n2) and (n2, n1).
    let (m, n) = (n1.min(n2), n1.max(n2));
    let width = m * n + 1;
    // f[a][u] for the current number of y's b
    let mut prev = vec![vec![0u128; width]; m + 1];
    for row in prev.iter_mut() {
        row[0] = 1;
    }
    for b in 1..=n {
        let mut cur = vec![vec![0u128; width]; m + 1];
        cur[0][0] = 1;
        for a in 1..=m {
            let max_u = a * b;
            for u in 0..=max_u {
                let with_x_last = if u >= b { cur[a - 1][u - b] } else { 0 };
                cur[a][u] = with_x_last + prev[a][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(m)
}

/// Two-sided exact p-value 2·min(P(U ≤ u), P(U ≥ u)), capped at 1.
pub fn exact_two_sided_p(counts: &[u128], u: usize) -> f64 {
    let total: u128 = counts.iter().sum();
    let le: u128 = counts[..=u].iter().sum();
    let ge: u128 = counts[u..].iter().sum();
    let tail = 2 * le.min(ge);
    if tail >= total {
        1.0
    } else {
        tail as f64 / total as f64
    }
}

pub fn mann_whitney_u(x: &[f64], y: &[f64], mode: MannWhitneyMode) -> Result<TestResult> {
    mann_whitney_u_with(x, y, MannWhitneyOptions { mode, ..Default::default() })
}

pub fn mann_whitney_u_with(x: &[f64], y: &[f64], options: MannWhitneyOptions) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("Mann-Whitney samples must be nonempty".into()));
    }
    let (n1, n2) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranked = midrank(&pooled)?;
    let rank_x: f64 = ranked.ranks[..n1].iter().sum();
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let u1 = rank_x - n1f * (n1f + 1.0) / 2.0;
    let u2 = n1f * n2f - u1;
    let u = u1.min(u2);
    let has_ties = !ranked.tie_groups.is_empty();

    let exact = match options.mode {
        MannWhitneyMode::Normal => false,
        MannWhitneyMode::Exact => {
            if has_ties {
                return Err(Error::ExactWithTies);
            }
            let work = exact_u_work(n1, n2);
            if work > 100 * MAX_EXACT_STATES {
                return Err(Error::EnumerationTooLarge(work));
            }
            true
        }
        MannWhitneyMode::Auto => {
            !has_ties && n1.min(n2) <= 8 && exact_u_work(n1, n2) <= 10 * MAX_EXACT_STATES
        }
    };

    if exact {
        let counts = u_distribution(n1, n2);
        // Without ties U1 is an integer.
        let p = exact_two_sided_p(&counts, u1.round() as usize);
        return Ok(TestResult {
            statistic_name: StatisticName::U,
            statistic: u,
            df: None,
            z: None,
            p_value: p,
            method: TestMethod::ExactEnumeration,
            tie_corrected: false,
            note: None,
        });
    }

    let nf = n1f + n2f;
    let mean = n1f * n2f / 2.0;
    let variance = n1f * n2f / 12.0 * ((nf + 1.0) - ranked.tie_sum() / (nf * (nf - 1.0)));
    let (z, p) = if variance <= 0.0 {
        (0.0, 1.0)
    } else {
        let cc = if options.continuity_correction { 0.5 } else { 0.0 };
        let dev = ((u1 - mean).abs() - cc).max(0.0);
        let z = dev / variance.sqrt();
        (-z, (2.0 * normal_sf(z)).min(1.0))
    };
    Ok(TestResult {
        statistic_name: StatisticName::U,
        statistic: u,
        df: None,
        z: Some(z),
        p_value: p,
        method: TestMethod::NormalApprox,
        tie_corrected: has_ties,
        note: None,
    })
}
