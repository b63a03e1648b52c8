//! Independent reference computations used by the integration tests.
//! Nothing here calls into the library's statistics or clustering code.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

/// Two-sided exact Mann-Whitney p by listing every split of ranks 1..=n1+n2.
/// Returns (p for each U1 in 0..=n1*n2, histogram).
pub fn enumerate_u(n1: usize, n2: usize) -> (Vec<f64>, Vec<u128>) {
    let n = n1 + n2;
    let mut hist = vec![0u128; n1 * n2 + 1];
    // iterate all n-bit masks with exactly n1 bits set
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).sum();
        let u1 = rank_sum - n1 * (n1 + 1) / 2;
        hist[u1] += 1;
    }
    let total: u128 = hist.iter().sum();
    let p = (0..hist.len())
        .map(|u| {
            let le: u128 = hist[..=u].iter().sum();
            let ge: u128 = hist[u..].iter().sum();
            let tail = 2 * le.min(ge);
            if tail >= total {
                1.0
            } else {
                tail as f64 / total as f64
            }
        })
        .collect();
    (p, hist)
}

/// Midranks by direct counting: rank = #less + (#equal + 1) / 2.
pub fn naive_midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&w| w < v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Tie-corrected Kruskal-Wallis H computed from scratch.
pub fn naive_h(groups: &[Vec<f64>]) -> f64 {
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = naive_midranks(&pooled);
    let n = pooled.len() as f64;
    let mut start = 0;
    let mut s = 0.0;
    for g in groups {
        let r: f64 = ranks[start..start + g.len()].iter().sum();
        s += r * r / g.len() as f64;
        start += g.len();
    }
    let mut ties = 0.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / (1.0 - ties / (n * n * n - n))
}

/// Monte-Carlo permutation p-value of H: share of label shuffles with H ≥ observed.
pub fn permutation_p_h<R: Rng>(groups: &[Vec<f64>], draws: usize, rng: &mut R) -> f64 {
    let observed = naive_h(groups);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mut pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let mut hits = 0usize;
    for _ in 0..draws {
        pooled.shuffle(rng);
        let mut shuffled = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in &sizes {
            shuffled.push(pooled[start..start + s].to_vec());
            start += s;
        }
        if naive_h(&shuffled) >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Sample G1 and G2 from exact integer sums. `scaled` holds the data as
/// integers (any common scale factor cancels).
pub fn exact_g1_g2(scaled: &[i64]) -> (f64, f64) {
    let n = scaled.len() as i64;
    let sum: BigInt = scaled.iter().map(|&v| BigInt::from(v)).sum();
    let dev: Vec<BigInt> = scaled.iter().map(|&v| BigInt::from(v) * n - &sum).collect();
    let mut s2 = BigInt::zero();
    let mut s3 = BigInt::zero();
    let mut s4 = BigInt::zero();
    for d in &dev {
        let d2 = d * d;
        s3 += &d2 * d;
        s4 += &d2 * &d2;
        s2 += d2;
    }
    let nf = n as f64;
    let s2f = s2.to_f64().unwrap();
    let g1 = nf * (nf - 1.0).sqrt() / (nf - 2.0) * s3.to_f64().unwrap() / s2f.powf(1.5);
    // G2 = (n-1)/((n-2)(n-3)) * [n(n+1) S4 - 3(n-1) S2²] / S2², numerator exact
    let num = BigInt::from(n * (n + 1)) * &s4 - BigInt::from(3 * (n - 1)) * &s2 * &s2;
    let ratio = num.to_f64().unwrap() / (&s2 * &s2).to_f64().unwrap();
    let g2 = (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ratio;
    (g1, g2)
}

/// erfc from the all-positive series erf(z) = 2/√π e^{-z²} Σ 2ⁿ z^{2n+1} / (2n+1)!!,
/// accurate in absolute terms for any z ≥ 0 the tests use (z ≤ 25).
pub fn erfc_series(z: f64) -> f64 {
    let mut term = z;
    let mut sum = term;
    let mut n = 0.0;
    while term > sum * 1e-18 {
        n += 1.0;
        term *= 2.0 * z * z / (2.0 * n + 1.0);
        sum += term;
    }
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * (-z * z).exp() * sum
}

/// Chi-square survival function by closed-form finite sums (integer df).
pub fn chi_square_sf_closed_form(x: f64, df: u32) -> f64 {
    let h = x / 2.0;
    if df.is_multiple_of(2) {
        // e^{-h} Σ_{j<df/2} h^j / j!
        let mut term = (-h).exp();
        let mut sum = term;
        for j in 1..(df / 2) {
            term *= h / j as f64;
            sum += term;
        }
        // recompute in log space when e^{-h} underflows
        if (-h).exp() == 0.0 {
            let mut s = 0.0;
            let mut ln_fact = 0.0;
            for j in 0..(df / 2) {
                if j > 0 {
                    ln_fact += (j as f64).ln();
                }
                s += (j as f64 * h.ln() - h - ln_fact).exp();
            }
            return s;
        }
        sum
    } else {
        // erfc(√h) + e^{-h} Σ_{j<(df-1)/2} h^{j+1/2} / Γ(j + 3/2)
        let mut sum = erfc_series(h.sqrt());
        let mut ln_gamma = (std::f64::consts::PI.sqrt() / 2.0).ln(); // Γ(3/2)
        for j in 0..((df - 1) / 2) {
            if j > 0 {
                ln_gamma += (j as f64 + 0.5).ln();
            }
            sum += ((j as f64 + 0.5) * h.ln() - h - ln_gamma).exp();
        }
        sum
    }
}

/// Minimum WCSS over every assignment of the rows into at most `k` groups.
pub fn exhaustive_min_wcss(points: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
    let n = points.len();
    let d = points[0].len();
    let mut best = (f64::INFINITY, Vec::new());
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut labels = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            labels.push(c % k);
            c /= k;
        }
        let mut cost = 0.0;
        for g in 0..k {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for dim in 0..d {
                let mean = members.iter().map(|p| p[dim]).sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|p| (p[dim] - mean).powi(2)).sum::<f64>();
            }
        }
        if cost < best.0 {
            best = (cost, labels);
        }
    }
    best
}

/// True when two labelings describe the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Points drawn around `centers` with per-coordinate normal noise of sd `sd`.
pub fn blobs<R: Rng>(centers: &[Vec<f64>], per: usize, sd: f64, rng: &mut R) -> (Vec<Vec<f64>>, Vec<usize>) {
    use rand_distr::{Distribution, Normal};
    let noise = Normal::new(0.0, sd).unwrap();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            pts.push(center.iter().map(|&m| m + noise.sample(rng)).collect());
            labels.push(c);
        }
    }
    (pts, labels)
}
