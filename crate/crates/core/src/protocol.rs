//! Cluster-count selection: sweep k, drop degenerate candidates, check that
//! every pair of clusters differs on every variable, and keep the largest k
//! that passes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans_best_of, ClusteringResult, Init, KMeansConfig};
use crate::error::{Error, Result};
use crate::features::{
    descriptive_stats, feature_stats, standardize, DenominatorPolicy, FeatureMatrix, FeatureStats,
    StudentFeatureTable, Variable,
};
use crate::stattests::{
    kruskal_wallis_with, mann_whitney_u, KruskalWallisMethod, MannWhitneyMode, TestResult,
};

/// Variables in the order the validation tests report them.
pub const TEST_VARIABLES: [Variable; 3] = [Variable::Ice, Variable::Solo, Variable::Resp];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    #[default]
    None,
    Holm,
}

impl FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "holm" => Ok(Correction::Holm),
            other => Err(Error::Config(format!("unknown correction {other:?} (expected none|holm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub k_min: usize,
    /// Defaults to 2^d for d clustering variables.
    pub k_max: Option<usize>,
    pub max_iterations: usize,
    pub min_cluster_share: f64,
    pub alpha: f64,
    pub correction: Correction,
    pub seed: u64,
    pub restarts: usize,
    pub init: Init,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            k_min: 2,
            k_max: None,
            max_iterations: 30,
            min_cluster_share: 0.005,
            alpha: 0.05,
            correction: Correction::None,
            seed: 0,
            restarts: 10,
            init: Init::KMeansPlusPlus,
        }
    }
}

impl ProtocolConfig {
    pub fn k_max_for(&self, variables: usize) -> usize {
        self.k_max.unwrap_or(1usize << variables.min(16))
    }

    pub fn validate(&self, variables: usize) -> Result<()> {
        let k_max = self.k_max_for(variables);
        if self.k_min < 1 || self.k_min > k_max {
            return Err(Error::Config(format!("need 1 <= k_min <= k_max, got {}..{}", self.k_min, k_max)));
        }
        if !(0.0..1.0).contains(&self.min_cluster_share) {
            return Err(Error::Config("min_cluster_share must be in [0, 1)".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must be in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum DiscardReason {
    Failed { message: String },
    NotConverged { iterations: usize },
    UnderrepresentedCluster { cluster: usize, size: usize, share: f64 },
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscardReason::Failed { message } => write!(f, "clustering failed: {message}"),
            DiscardReason::NotConverged { iterations } => {
                write!(f, "not converged within {iterations} iterations")
            }
            DiscardReason::UnderrepresentedCluster { cluster, size, share } => write!(
                f,
                "cluster {} holds only {} students ({:.2}%)",
                cluster + 1,
                size,
                100.0 * share
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub k: usize,
    pub clustering: Option<ClusteringResult>,
    pub discarded_reason: Option<DiscardReason>,
    pub validation: Option<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub variable: Variable,
    pub result: Option<TestResult>,
    /// p after the configured multiplicity correction.
    pub adjusted_p: Option<f64>,
    pub significant: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub infeasible: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    /// Zero-based cluster indices, `a < b`.
    pub a: usize,
    pub b: usize,
    #[serde(flatten)]
    pub test: TestOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub omnibus: Vec<TestOutcome>,
    pub pairwise: Vec<PairOutcome>,
    pub fully_separated: bool,
}

impl ValidationReport {
    pub fn failing_pairs(&self) -> impl Iterator<Item = &PairOutcome> {
        self.pairwise.iter().filter(|p| !p.test.significant)
    }
}

/// Holm step-down adjusted p-values, in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0_f64;
    for (rank, &i) in order.iter().enumerate() {
        let v = ((m - rank) as f64 * p[i]).min(1.0);
        running = running.max(v);
        adjusted[i] = running;
    }
    adjusted
}

fn apply_correction(outcomes: &mut [&mut TestOutcome], correction: Correction, alpha: f64) {
    let feasible: Vec<usize> = (0..outcomes.len()).filter(|&i| outcomes[i].result.is_some()).collect();
    let raw: Vec<f64> = feasible
        .iter()
        .map(|&i| outcomes[i].result.as_ref().map_or(1.0, |r| r.p_value))
        .collect();
    let adjusted = match correction {
        Correction::None => raw,
        Correction::Holm => holm_adjust(&raw),
    };
    for (&i, p) in feasible.iter().zip(adjusted) {
        outcomes[i].adjusted_p = Some(p);
        outcomes[i].significant = p < alpha;
    }
}

fn groups_for(table: &StudentFeatureTable, clustering: &ClusteringResult, v: Variable) -> Vec<Vec<f64>> {
    let mut groups = vec![Vec::new(); clustering.k];
    for (row, &a) in table.rows.iter().zip(&clustering.assignments) {
        groups[a].push(row.get(v) as f64);
    }
    groups
}

fn infeasible(variable: Variable, why: String) -> TestOutcome {
    TestOutcome { variable, result: None, adjusted_p: None, significant: false, infeasible: Some(why) }
}

fn tested(variable: Variable, result: Result<TestResult>) -> TestOutcome {
    match result {
        Ok(r) => TestOutcome { variable, result: Some(r), adjusted_p: None, significant: false, infeasible: None },
        Err(e) => infeasible(variable, e.to_string()),
    }
}

/// Kruskal-Wallis per variable and Mann-Whitney per cluster pair and
/// variable, all on the raw counts in `table`.
pub fn validate_candidate(
    table: &StudentFeatureTable,
    clustering: &ClusteringResult,
    config: &ProtocolConfig,
) -> Result<ValidationReport> {
    if table.len() != clustering.assignments.len() {
        return Err(Error::InvalidInput(format!(
            "{} assignments for {} students",
            clustering.assignments.len(),
            table.len()
        )));
    }
    let k = clustering.k;
    let mut sizes = vec![0usize; k];
    for &a in &clustering.assignments {
        sizes[a] += 1;
    }
    let small: Vec<usize> = (0..k).filter(|&c| sizes[c] < 2).collect();
    let by_variable: Vec<Vec<Vec<f64>>> =
        TEST_VARIABLES.iter().map(|&v| groups_for(table, clustering, v)).collect();

    let mut omnibus: Vec<TestOutcome> = TEST_VARIABLES
        .par_iter()
        .zip(&by_variable)
        .map(|(&v, groups)| {
            if k < 2 {
                infeasible(v, "fewer than two clusters".into())
            } else if !small.is_empty() {
                infeasible(v, format!("clusters with fewer than 2 members: {small:?}"))
            } else {
                tested(v, kruskal_wallis_with(groups, KruskalWallisMethod::Auto))
            }
        })
        .collect();

    let pairs: Vec<(usize, usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).flat_map(move |b| (0..TEST_VARIABLES.len()).map(move |vi| (a, b, vi))))
        .collect();
    let mut pairwise: Vec<PairOutcome> = pairs
        .par_iter()
        .map(|&(a, b, vi)| {
            let v = TEST_VARIABLES[vi];
            let test = if sizes[a] < 2 || sizes[b] < 2 {
                infeasible(v, "cluster with fewer than 2 members".into())
            } else {
                let groups = &by_variable[vi];
                tested(v, mann_whitney_u(&groups[a], &groups[b], MannWhitneyMode::Auto))
            };
            PairOutcome { a, b, test }
        })
        .collect();

    apply_correction(&mut omnibus.iter_mut().collect::<Vec<_>>(), config.correction, config.alpha);
    apply_correction(
        &mut pairwise.iter_mut().map(|p| &mut p.test).collect::<Vec<_>>(),
        config.correction,
        config.alpha,
    );

    let fully_separated = k >= 2
        && omnibus.iter().all(|t| t.significant)
        && pairwise.iter().all(|p| p.test.significant);
    Ok(ValidationReport { omnibus, pairwise, fully_separated })
}

/// One best-of-restarts k-means run per k in the configured range.
pub fn sweep_k(matrix: &FeatureMatrix, config: &ProtocolConfig) -> Result<Vec<CandidateResult>> {
    config.validate(matrix.values.cols())?;
    let k_max = config.k_max_for(matrix.values.cols());
    let ks: Vec<usize> = (config.k_min..=k_max).collect();
    Ok(ks
        .par_iter()
        .map(|&k| {
            let cfg = KMeansConfig {
                k,
                max_iterations: config.max_iterations,
                seed: config.seed,
                init: config.init,
                tolerance: 0.0,
            };
            match kmeans_best_of(matrix, &cfg, config.restarts) {
                Ok(c) => CandidateResult { k, clustering: Some(c), discarded_reason: None, validation: None },
                Err(e) => CandidateResult {
                    k,
                    clustering: None,
                    discarded_reason: Some(DiscardReason::Failed { message: e.to_string() }),
                    validation: None,
                },
            }
        })
        .collect())
}

/// Marks non-converged candidates and candidates with a cluster below the
/// minimum share.
pub fn filter_candidates(mut candidates: Vec<CandidateResult>, config: &ProtocolConfig) -> Vec<CandidateResult> {
    for cand in &mut candidates {
        if cand.discarded_reason.is_some() {
            continue;
        }
        let Some(c) = &cand.clustering else { continue };
        if !c.converged {
            cand.discarded_reason = Some(DiscardReason::NotConverged { iterations: c.iterations_run });
            continue;
        }
        let n: usize = c.sizes.iter().sum();
        if let Some((cluster, &size)) = c
            .sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| (s as f64) / (n as f64) < config.min_cluster_share)
            .min_by_key(|(_, &s)| s)
        {
            cand.discarded_reason = Some(DiscardReason::UnderrepresentedCluster {
                cluster,
                size,
                share: size as f64 / n as f64,
            });
        }
    }
    candidates
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum TraceOutcome {
    Discarded { reason: DiscardReason },
    NotSeparated { failures: Vec<String> },
    Superseded { by: usize },
    Chosen,
    Conclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub k: Option<usize>,
    #[serde(flatten)]
    pub outcome: TraceOutcome,
    pub message: String,
}

fn describe_failure(t: &TestOutcome, pair: Option<(usize, usize)>) -> String {
    let scope = match pair {
        Some((a, b)) => format!("{} between cluster {} and cluster {}", t.variable.name(), a + 1, b + 1),
        None => format!("{} across clusters", t.variable.name()),
    };
    match (&t.infeasible, t.adjusted_p) {
        (Some(why), _) => format!("{scope}: test infeasible ({why})"),
        (None, Some(p)) => format!("{scope}: p = {p:.4}"),
        (None, None) => format!("{scope}: untested"),
    }
}

/// Largest fully separated surviving k, plus one trace entry per candidate
/// and a closing conclusion.
pub fn select_k(candidates: &[CandidateResult], config: &ProtocolConfig) -> (Option<usize>, Vec<TraceEntry>) {
    let chosen = candidates
        .iter()
        .filter(|c| c.discarded_reason.is_none())
        .filter(|c| c.validation.as_ref().is_some_and(|v| v.fully_separated))
        .map(|c| c.k)
        .max();

    let mut ordered: Vec<&CandidateResult> = candidates.iter().collect();
    ordered.sort_by_key(|c| c.k);
    let mut trace = Vec::with_capacity(ordered.len() + 1);
    for c in ordered {
        let (outcome, message) = if let Some(reason) = &c.discarded_reason {
            let msg = format!("k={}: discarded, {}", c.k, reason);
            (TraceOutcome::Discarded { reason: reason.clone() }, msg)
        } else {
            match &c.validation {
                Some(v) if v.fully_separated => {
                    if Some(c.k) == chosen {
                        (
                            TraceOutcome::Chosen,
                            format!("k={}: every cluster pair differs on every variable (alpha = {}); chosen", c.k, config.alpha),
                        )
                    } else {
                        let by = chosen.unwrap_or(c.k);
                        (
                            TraceOutcome::Superseded { by },
                            format!("k={}: fully separated, but k={} is also fully separated and reveals more structure; discarded", c.k, by),
                        )
                    }
                }
                Some(v) => {
                    let mut failures: Vec<String> = v
                        .omnibus
                        .iter()
                        .filter(|t| !t.significant)
                        .map(|t| describe_failure(t, None))
                        .collect();
                    failures.extend(v.failing_pairs().map(|p| describe_failure(&p.test, Some((p.a, p.b)))));
                    let msg = format!("k={}: discarded, not every difference is significant ({})", c.k, failures.join("; "));
                    (TraceOutcome::NotSeparated { failures }, msg)
                }
                None => {
                    let failures = vec!["not validated".to_string()];
                    (TraceOutcome::NotSeparated { failures }, format!("k={}: discarded, not validated", c.k))
                }
            }
        };
        trace.push(TraceEntry { k: Some(c.k), outcome, message });
    }
    let conclusion = match chosen {
        Some(k) => format!("optimal k = {k}"),
        None => "no candidate k is fully separated; no optimal k".to_string(),
    };
    trace.push(TraceEntry { k: None, outcome: TraceOutcome::Conclusion, message: conclusion });
    (chosen, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Persona {
    Extrovert,
    Attempter,
    Introvert,
}

impl Persona {
    pub fn name(self) -> &'static str {
        match self {
            Persona::Extrovert => "Extrovert",
            Persona::Attempter => "Attempter",
            Persona::Introvert => "Introvert",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: Variable,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub size: usize,
    pub share: f64,
    pub raw: Vec<VariableSummary>,
    /// Center on the standardized scale, in `n_ice, n_resp, n_solo` order.
    pub center: Vec<f64>,
    pub persona: Option<Persona>,
    /// `engagement-rank-i`, 1 = highest sum of standardized center coordinates.
    pub rank_label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfiles {
    pub clusters: Vec<ClusterProfile>,
    pub warnings: Vec<String>,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Persona per cluster for a 3-cluster solution, or `None` on a rule tie.
pub fn assign_personas(centers: &[Vec<f64>]) -> Option<Vec<Persona>> {
    if centers.len() != 3 {
        return None;
    }
    let (ice, resp) = (Variable::Ice.index(), Variable::Resp.index());
    let sums: Vec<f64> = centers.iter().map(|c| c.iter().sum()).collect();
    let introvert = (0..3).min_by(|&a, &b| sums[a].total_cmp(&sums[b]))?;
    if (0..3).any(|c| c != introvert && sums[c] == sums[introvert]) {
        return None;
    }
    let rest: Vec<usize> = (0..3).filter(|&c| c != introvert).collect();
    let social = |c: usize| centers[c][ice] + centers[c][resp];
    if social(rest[0]) == social(rest[1]) {
        return None;
    }
    let (extrovert, attempter) =
        if social(rest[0]) > social(rest[1]) { (rest[0], rest[1]) } else { (rest[1], rest[0]) };
    let mut out = vec![Persona::Introvert; 3];
    out[extrovert] = Persona::Extrovert;
    out[attempter] = Persona::Attempter;
    Some(out)
}

pub fn profile_clusters(table: &StudentFeatureTable, clustering: &ClusteringResult) -> Result<ClusterProfiles> {
    if table.len() != clustering.assignments.len() {
        return Err(Error::InvalidInput("assignments do not align with the feature table".into()));
    }
    let k = clustering.k;
    let n = table.len() as f64;
    let centers: Vec<Vec<f64>> = (0..k).map(|c| clustering.centers.row(c).to_vec()).collect();
    let sums: Vec<f64> = centers.iter().map(|c| c.iter().sum()).collect();

    let mut by_engagement: Vec<usize> = (0..k).collect();
    by_engagement.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    let mut rank = vec![0; k];
    for (i, &c) in by_engagement.iter().enumerate() {
        rank[c] = i + 1;
    }

    let mut warnings = Vec::new();
    let personas = if k == 3 {
        let p = assign_personas(&centers);
        if p.is_none() {
            warnings.push("persona rule tied; using engagement-rank labels only".to_string());
        }
        p
    } else {
        None
    };

    let mut clusters = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (0..table.len()).filter(|&i| clustering.assignments[i] == c).collect();
        let raw = crate::features::VARIABLES
            .iter()
            .map(|&v| {
                let mut vals: Vec<f64> = members.iter().map(|&i| table.rows[i].get(v) as f64).collect();
                let mean = if vals.is_empty() { f64::NAN } else { descriptive_stats(&vals)?.mean };
                Ok(VariableSummary { variable: v, median: median(&mut vals), mean })
            })
            .collect::<Result<Vec<_>>>()?;
        clusters.push(ClusterProfile {
            cluster: c,
            size: members.len(),
            share: members.len() as f64 / n,
            raw,
            center: centers[c].clone(),
            persona: personas.as_ref().map(|p| p[c]),
            rank_label: format!("engagement-rank-{}", rank[c]),
        });
    }
    Ok(ClusterProfiles { clusters, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub config: ProtocolConfig,
    pub students: usize,
    pub feature_stats: Option<FeatureStats>,
    pub candidates: Vec<CandidateResult>,
    pub chosen_k: Option<usize>,
    pub decision_trace: Vec<TraceEntry>,
    pub profiles: Vec<ClusterProfile>,
    pub warnings: Vec<String>,
}

impl KSelectionReport {
    pub fn candidate(&self, k: usize) -> Option<&CandidateResult> {
        self.candidates.iter().find(|c| c.k == k)
    }

    pub fn chosen_clustering(&self) -> Option<&ClusteringResult> {
        self.chosen_k.and_then(|k| self.candidate(k)).and_then(|c| c.clustering.as_ref())
    }
}

/// Full pipeline from raw counts: standardize, sweep, filter, validate,
/// select and (optionally) profile.
pub fn run_protocol(
    table: &StudentFeatureTable,
    config: &ProtocolConfig,
    denominator: DenominatorPolicy,
    profile: bool,
) -> Result<KSelectionReport> {
    let matrix = standardize(table)?;
    let swept = sweep_k(&matrix, config)?;
    let mut candidates = filter_candidates(swept, config);
    for cand in candidates.iter_mut() {
        if cand.discarded_reason.is_none() {
            if let Some(c) = &cand.clustering {
                cand.validation = Some(validate_candidate(table, c, config)?);
            }
        }
    }
    let (chosen_k, decision_trace) = select_k(&candidates, config);
    let mut report = KSelectionReport {
        config: config.clone(),
        students: table.len(),
        feature_stats: Some(feature_stats(table, denominator)),
        candidates,
        chosen_k,
        decision_trace,
        profiles: Vec::new(),
        warnings: Vec::new(),
    };
    if profile {
        if let Some(c) = report.chosen_clustering() {
            let profiles = profile_clusters(table, c)?;
            report.profiles = profiles.clusters;
            report.warnings.extend(profiles.warnings);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(Error::Config(format!("unknown format {other:?} (expected json|text)"))),
        }
    }
}

pub fn render_report(report: &KSelectionReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Text => Ok(render_text(report).into_bytes()),
    }
}

fn fmt_p(p: Option<f64>) -> String {
    match p {
        None => "n/a".into(),
        Some(p) if p < 0.001 => "<.001".into(),
        Some(p) => format!("{p:.3}"),
    }
}

fn render_text(report: &KSelectionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("students: {}\n", report.students));
    out.push_str(&format!(
        "k range: {}..={}  restarts: {}  alpha: {}  min share: {}  correction: {:?}\n\n",
        report.config.k_min,
        report.config.k_max_for(3),
        report.config.restarts,
        report.config.alpha,
        report.config.min_cluster_share,
        report.config.correction
    ));

    out.push_str("candidates:\n");
    for c in &report.candidates {
        match &c.clustering {
            Some(cl) => out.push_str(&format!(
                "  k={}  iterations={}  converged={}  wcss={:.4}  sizes={:?}\n",
                c.k, cl.iterations_run, cl.converged, cl.wcss, cl.sizes
            )),
            None => out.push_str(&format!("  k={}  (no clustering)\n", c.k)),
        }
        if let Some(v) = &c.validation {
            for t in &v.omnibus {
                let h = t.result.as_ref().map(|r| format!("{:.2}", r.statistic)).unwrap_or_else(|| "n/a".into());
                out.push_str(&format!(
                    "    kruskal-wallis {:<7} H={}  p={}\n",
                    t.variable.name(),
                    h,
                    fmt_p(t.adjusted_p)
                ));
            }
            for p in &v.pairwise {
                let u = p.test.result.as_ref().map(|r| format!("{:.1}", r.statistic)).unwrap_or_else(|| "n/a".into());
                out.push_str(&format!(
                    "    mann-whitney {} vs {} {:<7} U={}  p={}\n",
                    p.a + 1,
                    p.b + 1,
                    p.test.variable.name(),
                    u,
                    fmt_p(p.test.adjusted_p)
                ));
            }
        }
    }

    out.push_str("\ndecision trace:\n");
    for t in &report.decision_trace {
        out.push_str(&format!("  {}\n", t.message));
    }

    if !report.profiles.is_empty() {
        out.push_str("\nprofiles:\n");
        for p in &report.profiles {
            let label = p.persona.map(Persona::name).unwrap_or(p.rank_label.as_str());
            out.push_str(&format!(
                "  cluster {} [{}] size={} ({:.2}%)",
                p.cluster + 1,
                label,
                p.size,
                100.0 * p.share
            ));
            for s in &p.raw {
                out.push_str(&format!("  {} median={} mean={:.2}", s.variable.name(), s.median, s.mean));
            }
            out.push('\n');
        }
    }
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

/// `k<TAB>wcss` for every candidate with a clustering.
pub fn wcss_plot_data(report: &KSelectionReport) -> String {
    let mut out = String::from("# k\twcss\n");
    for c in &report.candidates {
        if let Some(cl) = &c.clustering {
            out.push_str(&format!("{}\t{:.12}\n", c.k, cl.wcss));
        }
    }
    out
}

/// Per-cluster raw means and medians of each variable for the chosen k.
pub fn cluster_plot_data(report: &KSelectionReport) -> String {
    let mut out = String::from("# cluster\tlabel\tvariable\tmedian\tmean\n");
    for p in &report.profiles {
        let label = p.persona.map(Persona::name).unwrap_or(p.rank_label.as_str());
        for &v in &TEST_VARIABLES {
            if let Some(s) = p.raw.iter().find(|s| s.variable == v) {
                out.push_str(&format!("{}\t{}\t{}\t{}\t{:.6}\n", p.cluster + 1, label, v.name(), s.median, s.mean));
            }
        }
    }
    out
}
