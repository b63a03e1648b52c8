//! Seeded Lloyd's k-means, WCSS accounting and an elbow-curve helper.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::matrix::{squared_distance, Matrix};

/// Below this many distance evaluations the assignment step stays sequential.
const PARALLEL_THRESHOLD: usize = 16_384;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    #[default]
    KMeansPlusPlus,
    FirstKDistinct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub init: Init,
    /// Maximum center displacement accepted as convergence; 0 means
    /// "assignments unchanged" only.
    pub tolerance: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig { k, max_iterations: 30, seed, init: Init::KMeansPlusPlus, tolerance: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centers: Matrix,
    pub sizes: Vec<usize>,
    pub iterations_run: usize,
    pub converged: bool,
    pub wcss: f64,
    pub wcss_trace: Vec<f64>,
}

/// Sum of squared Euclidean distances from each row to its assigned center.
pub fn wcss(matrix: &Matrix, assignments: &[usize], centers: &Matrix) -> Result<f64> {
    if assignments.len() != matrix.rows() {
        return Err(Error::InvalidInput(format!(
            "{} assignments for {} rows",
            assignments.len(),
            matrix.rows()
        )));
    }
    if centers.cols() != matrix.cols() {
        return Err(Error::InvalidInput(format!(
            "centers have {} columns, data has {}",
            centers.cols(),
            matrix.cols()
        )));
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= centers.rows()) {
        return Err(Error::InvalidInput(format!("assignment {bad} out of range")));
    }
    Ok(wcss_unchecked(matrix, assignments, centers))
}

fn wcss_unchecked(matrix: &Matrix, assignments: &[usize], centers: &Matrix) -> f64 {
    matrix
        .iter_rows()
        .zip(assignments)
        .map(|(row, &a)| squared_distance(row, centers.row(a)))
        .sum()
}

fn nearest(row: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = squared_distance(row, centers.row(c));
        // strict comparison: ties go to the lowest index
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(matrix: &Matrix, centers: &Matrix) -> Vec<usize> {
    if matrix.rows() * centers.rows() >= PARALLEL_THRESHOLD {
        (0..matrix.rows()).into_par_iter().map(|r| nearest(matrix.row(r), centers).0).collect()
    } else {
        matrix.iter_rows().map(|row| nearest(row, centers).0).collect()
    }
}

fn distinct_row_count_at_least(matrix: &Matrix, k: usize) -> bool {
    let mut seen: Vec<&[f64]> = Vec::with_capacity(k);
    for row in matrix.iter_rows() {
        if !seen.contains(&row) {
            seen.push(row);
            if seen.len() >= k {
                return true;
            }
        }
    }
    seen.len() >= k
}

fn init_first_k_distinct(matrix: &Matrix, k: usize) -> Result<Matrix> {
    let mut picked: Vec<&[f64]> = Vec::with_capacity(k);
    for row in matrix.iter_rows() {
        if !picked.contains(&row) {
            picked.push(row);
            if picked.len() == k {
                return Ok(Matrix::from_rows(&picked));
            }
        }
    }
    Err(Error::NotEnoughDistinct { k })
}

fn init_kmeans_plus_plus(matrix: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let n = matrix.rows();
    let mut centers: Vec<usize> = Vec::with_capacity(k);
    centers.push(rng.random_range(0..n));
    let mut dist: Vec<f64> = matrix
        .iter_rows()
        .map(|row| squared_distance(row, matrix.row(centers[0])))
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NotEnoughDistinct { k });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &d) in dist.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            if acc > target {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave `target` just past the last positive weight.
        let chosen = chosen
            .or_else(|| dist.iter().rposition(|&d| d > 0.0))
            .ok_or(Error::NotEnoughDistinct { k })?;
        centers.push(chosen);
        for (i, row) in matrix.iter_rows().enumerate() {
            let d = squared_distance(row, matrix.row(chosen));
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    Ok(matrix.select_rows(&centers))
}

/// Recomputes centers as cluster means; empty clusters are re-seeded at the
/// row lying farthest from its assigned center.
fn update_centers(matrix: &Matrix, assignments: &[usize], old: &Matrix) -> Matrix {
    let k = old.rows();
    let d = matrix.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (row, &a) in matrix.iter_rows().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut centers = sums;
    let mut taken: Vec<usize> = Vec::new();
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for v in centers.row_mut(c) {
                *v /= n;
            }
            continue;
        }
        let far = matrix
            .iter_rows()
            .enumerate()
            .filter(|(i, _)| !taken.contains(i))
            .map(|(i, row)| (i, squared_distance(row, old.row(assignments[i]))))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match far {
            Some((i, _)) => {
                taken.push(i);
                centers.row_mut(c).copy_from_slice(matrix.row(i));
            }
            None => centers.row_mut(c).copy_from_slice(old.row(c)),
        }
    }
    centers
}

fn max_displacement(a: &Matrix, b: &Matrix) -> f64 {
    (0..a.rows())
        .map(|r| squared_distance(a.row(r), b.row(r)).sqrt())
        .fold(0.0, f64::max)
}

fn validate(rows: usize, config: &KMeansConfig) -> Result<()> {
    if rows == 0 {
        return Err(Error::InvalidInput("k-means needs at least one row".into()));
    }
    if config.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if config.k > rows {
        return Err(Error::TooManyClusters { k: config.k, rows });
    }
    if config.max_iterations == 0 {
        return Err(Error::Config("max_iterations must be at least 1".into()));
    }
    if !(config.tolerance >= 0.0) {
        return Err(Error::Config("tolerance must be non-negative".into()));
    }
    Ok(())
}

/// Lloyd's algorithm on rows in the order given.
pub fn kmeans_rows(matrix: &Matrix, config: &KMeansConfig) -> Result<ClusteringResult> {
    validate(matrix.rows(), config)?;
    let k = config.k;
    if !distinct_row_count_at_least(matrix, k) {
        return Err(Error::NotEnoughDistinct { k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers = match config.init {
        Init::KMeansPlusPlus => init_kmeans_plus_plus(matrix, k, &mut rng)?,
        Init::FirstKDistinct => init_first_k_distinct(matrix, k)?,
    };

    let mut assignments = assign(matrix, &centers);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;
    for iter in 1..=config.max_iterations {
        let updated = update_centers(matrix, &assignments, &centers);
        let shift = max_displacement(&centers, &updated);
        centers = updated;
        trace.push(wcss_unchecked(matrix, &assignments, &centers));
        iterations_run = iter;

        let next = assign(matrix, &centers);
        let unchanged = next == assignments;
        assignments = next;
        if unchanged || (config.tolerance > 0.0 && shift <= config.tolerance) {
            converged = true;
            break;
        }
    }

    let mut sizes = vec![0; k];
    for &a in &assignments {
        sizes[a] += 1;
    }
    let wcss = wcss_unchecked(matrix, &assignments, &centers);
    Ok(ClusteringResult {
        k,
        assignments,
        centers,
        sizes,
        iterations_run,
        converged,
        wcss,
        wcss_trace: trace,
    })
}

fn canonical_order(ids: &[String]) -> Option<Vec<usize>> {
    if ids.windows(2).all(|w| w[0] <= w[1]) {
        return None;
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    Some(order)
}

/// k-means over a feature matrix. Rows are processed in ascending
/// `student_id` order so the result does not depend on input order;
/// assignments are reported in the matrix's own row order.
pub fn kmeans(matrix: &FeatureMatrix, config: &KMeansConfig) -> Result<ClusteringResult> {
    match canonical_order(&matrix.student_ids) {
        None => kmeans_rows(&matrix.values, config),
        Some(order) => {
            let sorted = matrix.values.select_rows(&order);
            let mut result = kmeans_rows(&sorted, config)?;
            let mut assignments = vec![0; order.len()];
            for (pos, &orig) in order.iter().enumerate() {
                assignments[orig] = result.assignments[pos];
            }
            result.assignments = assignments;
            Ok(result)
        }
    }
}

/// Seed for restart `index` derived from a base seed (SplitMix64 finalizer).
pub fn restart_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `restarts` seeded k-means fits and keeps the lowest WCSS
/// (earliest restart on ties).
pub fn kmeans_best_of(matrix: &FeatureMatrix, config: &KMeansConfig, restarts: usize) -> Result<ClusteringResult> {
    let restarts = restarts.max(1);
    let runs: Vec<Result<ClusteringResult>> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = KMeansConfig { seed: restart_seed(config.seed, r), ..*config };
            kmeans(matrix, &cfg)
        })
        .collect();
    let mut best: Option<ClusteringResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Chance-corrected agreement between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("label vectors differ in length".into()));
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let pairs = |v: u64| (v * v.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&v| pairs(v)).sum();
    let sum_a: f64 = rows.iter().map(|&v| pairs(v)).sum();
    let sum_b: f64 = cols.iter().map(|&v| pairs(v)).sum();
    let total = pairs(n as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub wcss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowCurve {
    pub points: Vec<ElbowPoint>,
    pub suggested_k: Option<usize>,
    pub ambiguous: bool,
}

/// Top-two second differences closer than this (relative) make the elbow ambiguous.
pub const ELBOW_TIE_FRACTION: f64 = 0.10;

/// Minimum share of the preceding WCSS drop that must vanish at the elbow.
pub const ELBOW_MIN_SHARPNESS: f64 = 0.8;

/// Picks the k with the largest discrete second difference of WCSS.
pub fn detect_elbow(points: &[ElbowPoint]) -> (Option<usize>, bool) {
    if points.len() < 3 {
        return (None, true);
    }
    let mut seconds: Vec<(usize, f64, f64)> = points
        .windows(3)
        .map(|w| {
            let drop = w[0].wcss - w[1].wcss;
            (w[1].k, w[0].wcss - 2.0 * w[1].wcss + w[2].wcss, drop)
        })
        .collect();
    // stable sort keeps the smaller k first on exact ties
    seconds.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (k, top, drop) = seconds[0];
    let tied = seconds
        .get(1)
        .is_some_and(|&(_, second, _)| top - second <= ELBOW_TIE_FRACTION * top.abs());
    let sharp = drop > 0.0 && top / drop >= ELBOW_MIN_SHARPNESS;
    (Some(k), tied || !sharp || !(top > 0.0))
}

pub fn elbow_curve(
    matrix: &FeatureMatrix,
    k_range: &[usize],
    restarts: usize,
    seed: u64,
    max_iterations: usize,
) -> Result<ElbowCurve> {
    if k_range.is_empty() {
        return Err(Error::Config("empty k range".into()));
    }
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let points = ks
        .iter()
        .map(|&k| {
            let cfg = KMeansConfig { max_iterations, ..KMeansConfig::new(k, seed) };
            kmeans_best_of(matrix, &cfg, restarts).map(|r| ElbowPoint { k, wcss: r.wcss })
        })
        .collect::<Result<Vec<_>>>()?;
    let (suggested_k, ambiguous) = detect_elbow(&points);
    Ok(ElbowCurve { points, suggested_k, ambiguous })
}

impl ElbowCurve {
    /// Two-column plot data: `k<TAB>wcss`.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("# k\twcss\n");
        for p in &self.points {
            out.push_str(&format!("{}\t{:.12}\n", p.k, p.wcss));
        }
        out
    }
}
