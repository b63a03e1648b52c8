//! Per-student interaction counts, descriptive statistics and z-scores.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Categorization, CommentCategory, CommentLog};
use crate::matrix::Matrix;
use crate::stattests::midrank;

/// The three clustering variables, in column order.
pub const VARIABLES: [Variable; 3] = [Variable::Ice, Variable::Resp, Variable::Solo];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "n_ice")]
    Ice,
    #[serde(rename = "n_resp")]
    Resp,
    #[serde(rename = "n_solo")]
    Solo,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::Ice => "n_ice",
            Variable::Resp => "n_resp",
            Variable::Solo => "n_solo",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Variable::Ice => 0,
            Variable::Resp => 1,
            Variable::Solo => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentCounts {
    pub student_id: String,
    pub n_ice: u64,
    pub n_resp: u64,
    pub n_solo: u64,
}

impl StudentCounts {
    pub fn get(&self, v: Variable) -> u64 {
        match v {
            Variable::Ice => self.n_ice,
            Variable::Resp => self.n_resp,
            Variable::Solo => self.n_solo,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_ice + self.n_resp + self.n_solo
    }
}

/// One row per social student, sorted by `student_id`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentFeatureTable {
    pub rows: Vec<StudentCounts>,
}

impl StudentFeatureTable {
    /// Sorts rows by id and rejects duplicates and all-zero rows.
    pub fn new(mut rows: Vec<StudentCounts>) -> Result<Self> {
        rows.sort_by(|a, b| a.student_id.cmp(&b.student_id));
        for w in rows.windows(2) {
            if w[0].student_id == w[1].student_id {
                return Err(Error::InvalidInput(format!("duplicate student {:?}", w[0].student_id)));
            }
        }
        if let Some(r) = rows.iter().find(|r| r.total() == 0) {
            return Err(Error::InvalidInput(format!("student {:?} has no comments", r.student_id)));
        }
        Ok(StudentFeatureTable { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, v: Variable) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(v) as f64).collect()
    }

    pub fn column_sum(&self, v: Variable) -> u64 {
        self.rows.iter().map(|r| r.get(v)).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["student_id", "n_ice", "n_resp", "n_solo"])?;
        for r in &self.rows {
            w.write_record([
                r.student_id.clone(),
                r.n_ice.to_string(),
                r.n_resp.to_string(),
                r.n_solo.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            rows.push(rec?);
        }
        Self::new(rows)
    }
}

pub fn aggregate_students(log: &CommentLog, cats: &Categorization) -> StudentFeatureTable {
    let mut by_student: BTreeMap<&str, StudentCounts> = BTreeMap::new();
    for c in &log.comments {
        let row = by_student.entry(c.author_id.as_str()).or_insert_with(|| StudentCounts {
            student_id: c.author_id.clone(),
            n_ice: 0,
            n_resp: 0,
            n_solo: 0,
        });
        match cats.category(&c.comment_id) {
            Some(CommentCategory::IceBreaking) => row.n_ice += 1,
            Some(CommentCategory::Responding) => row.n_resp += 1,
            Some(CommentCategory::Solo) => row.n_solo += 1,
            None => {}
        }
    }
    StudentFeatureTable { rows: by_student.into_values().collect() }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Summary {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

/// Mean (n ≥ 1) and sample standard deviation (n ≥ 2).
pub(crate) fn mean_and_sd(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: None, sd: None };
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let sd = (n >= 2).then(|| {
        let ss = compensated_sum(values.iter().map(|x| (x - mean) * (x - mean)));
        (ss / (n - 1) as f64).sqrt()
    });
    Summary { mean: Some(mean), sd }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Moment {
    Value(f64),
    Absent { absent: String },
}

impl Moment {
    pub fn value(&self) -> Option<f64> {
        match self {
            Moment::Value(v) => Some(*v),
            Moment::Absent { .. } => None,
        }
    }

    fn absent(reason: impl Into<String>) -> Self {
        Moment::Absent { absent: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when n = 1.
    pub sd: f64,
    /// Sample-adjusted skewness G1.
    pub skewness: Moment,
    /// Sample-adjusted excess kurtosis G2.
    pub excess_kurtosis: Moment,
}

pub fn descriptive_stats(values: &[f64]) -> Result<DescriptiveStats> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidInput("descriptive statistics need at least one value".into()));
    }
    let Summary { mean, sd } = mean_and_sd(values);
    let mean = mean.unwrap_or(0.0);
    let sd = sd.unwrap_or(0.0);
    let nf = n as f64;

    let (skewness, excess_kurtosis) = if sd == 0.0 {
        (Moment::absent("zero standard deviation"), Moment::absent("zero standard deviation"))
    } else {
        let z: Vec<f64> = values.iter().map(|x| (x - mean) / sd).collect();
        let skew = if n >= 3 {
            let s3 = compensated_sum(z.iter().map(|z| z * z * z));
            Moment::Value(nf / ((nf - 1.0) * (nf - 2.0)) * s3)
        } else {
            Moment::absent("skewness needs n >= 3")
        };
        let kurt = if n >= 4 {
            let s4 = compensated_sum(z.iter().map(|z| (z * z) * (z * z)));
            let a = nf * (nf + 1.0) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
            let b = 3.0 * (nf - 1.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
            Moment::Value(a * s4 - b)
        } else {
            Moment::absent("kurtosis needs n >= 4")
        };
        (skew, kurt)
    };

    Ok(DescriptiveStats { n, mean, sd, skewness, excess_kurtosis })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho as the Pearson correlation of midranks.
///
/// Returns `Ok(None)` when either sequence is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("spearman_rho needs at least two pairs".into()));
    }
    let rx = midrank(x)?.ranks;
    let ry = midrank(y)?.ranks;
    Ok(pearson(&rx, &ry))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorPolicy {
    /// Every social student counts, zeros included.
    #[default]
    AllSocialStudents,
    /// Only students with at least one comment of the type.
    PostersOfTypeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub variable: Variable,
    pub stats: Option<DescriptiveStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanPair {
    pub a: Variable,
    pub b: Variable,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub denominator: DenominatorPolicy,
    pub kurtosis_kind: String,
    pub variables: Vec<VariableStats>,
    pub spearman: Vec<SpearmanPair>,
}

/// Per-variable descriptive statistics plus pairwise Spearman correlations
/// (correlations always use every student).
pub fn feature_stats(table: &StudentFeatureTable, policy: DenominatorPolicy) -> FeatureStats {
    let variables = VARIABLES
        .iter()
        .map(|&v| {
            let col = table.column(v);
            let values: Vec<f64> = match policy {
                DenominatorPolicy::AllSocialStudents => col,
                DenominatorPolicy::PostersOfTypeOnly => col.into_iter().filter(|&x| x >= 1.0).collect(),
            };
            VariableStats { variable: v, stats: descriptive_stats(&values).ok() }
        })
        .collect();

    let mut spearman = Vec::new();
    for (i, &a) in VARIABLES.iter().enumerate() {
        for &b in &VARIABLES[i + 1..] {
            let rho = spearman_rho(&table.column(a), &table.column(b)).ok().flatten();
            spearman.push(SpearmanPair { a, b, rho });
        }
    }
    FeatureStats { denominator: policy, kurtosis_kind: "excess".into(), variables, spearman }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub student_ids: Vec<String>,
    pub variables: Vec<Variable>,
    pub values: Matrix,
    pub column_means: Vec<f64>,
    pub column_sds: Vec<f64>,
}

impl FeatureMatrix {
    /// Maps z-scores back to the raw scale.
    pub fn unstandardize(&self) -> Matrix {
        let mut out = self.values.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.column_sds[c] + self.column_means[c];
            }
        }
        out
    }
}

pub fn standardize(table: &StudentFeatureTable) -> Result<FeatureMatrix> {
    if table.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "standardization needs at least 2 students, got {}",
            table.len()
        )));
    }
    let n = table.len();
    let mut values = Matrix::zeros(n, VARIABLES.len());
    let mut column_means = Vec::with_capacity(VARIABLES.len());
    let mut column_sds = Vec::with_capacity(VARIABLES.len());
    for (c, &v) in VARIABLES.iter().enumerate() {
        let col = table.column(v);
        let Summary { mean, sd } = mean_and_sd(&col);
        let (mean, sd) = (mean.unwrap_or(0.0), sd.unwrap_or(0.0));
        if sd == 0.0 {
            return Err(Error::ConstantColumn(v.name().to_string()));
        }
        for (r, x) in col.iter().enumerate() {
            values[(r, c)] = (x - mean) / sd;
        }
        column_means.push(mean);
        column_sds.push(sd);
    }
    Ok(FeatureMatrix {
        student_ids: table.rows.iter().map(|r| r.student_id.clone()).collect(),
        variables: VARIABLES.to_vec(),
        values,
        column_means,
        column_sds,
    })
}
