//! Seeded synthetic cohorts with planted personas.
//!
//! Counts are drawn per persona from heavy-tailed count distributions; the
//! comment-log generator then builds a reply graph whose categorization
//! reproduces every student's planted counts.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{StudentCounts, StudentFeatureTable, Variable};
use crate::ingest::{Comment, CommentLog};

const MAX_ZERO_REDRAWS: usize = 10_000;
const WEEKS: u32 = 10;
const STEPS_PER_WEEK: u32 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CountDistribution {
    /// Failures before the r-th success with success probability p.
    NegativeBinomial { r: f64, p: f64 },
    LognormalRounded { mu: f64, sigma: f64 },
    Constant { value: u64 },
}

impl CountDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CountDistribution::NegativeBinomial { r, p } => {
                if !(r > 0.0 && r.is_finite()) || !(p > 0.0 && p <= 1.0) {
                    return Err(Error::Config(format!("negative-binomial needs r > 0 and 0 < p <= 1, got r={r} p={p}")));
                }
            }
            CountDistribution::LognormalRounded { mu, sigma } => {
                if !mu.is_finite() || !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::Config(format!("lognormal-rounded needs finite mu and sigma >= 0, got mu={mu} sigma={sigma}")));
                }
            }
            CountDistribution::Constant { .. } => {}
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CountDistribution::NegativeBinomial { r, p } => r * (1.0 - p) / p,
            CountDistribution::LognormalRounded { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
            CountDistribution::Constant { value } => value as f64,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match *self {
            CountDistribution::NegativeBinomial { r, p } => {
                if p >= 1.0 {
                    return 0;
                }
                // Gamma-Poisson mixture
                let lambda = Gamma::new(r, (1.0 - p) / p).expect("validated").sample(rng);
                if lambda <= 0.0 {
                    0
                } else {
                    Poisson::new(lambda).map(|d| d.sample(rng) as u64).unwrap_or(0)
                }
            }
            CountDistribution::LognormalRounded { mu, sigma } => {
                LogNormal::new(mu, sigma).expect("validated").sample(rng).round() as u64
            }
            CountDistribution::Constant { value } => value,
        }
    }
}

impl FromStr for CountDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            tokens
                .get(i)
                .ok_or_else(|| Error::Config(format!("missing parameter in {s:?}")))?
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number in {s:?}")))
        };
        let arity = |n: usize| -> Result<()> {
            if tokens.len() != n + 1 {
                return Err(Error::Config(format!("{:?} takes {} parameter(s)", tokens[0], n)));
            }
            Ok(())
        };
        let dist = match tokens.first().copied() {
            Some("negative-binomial") => {
                arity(2)?;
                CountDistribution::NegativeBinomial { r: num(1)?, p: num(2)? }
            }
            Some("lognormal-rounded") => {
                arity(2)?;
                CountDistribution::LognormalRounded { mu: num(1)?, sigma: num(2)? }
            }
            Some("constant") => {
                arity(1)?;
                let value = tokens[1]
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("constant needs a non-negative integer, got {:?}", tokens[1])))?;
                CountDistribution::Constant { value }
            }
            _ => return Err(Error::Config(format!("unknown distribution {s:?}"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl fmt::Display for CountDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountDistribution::NegativeBinomial { r, p } => write!(f, "negative-binomial {r} {p}"),
            CountDistribution::LognormalRounded { mu, sigma } => write!(f, "lognormal-rounded {mu} {sigma}"),
            CountDistribution::Constant { value } => write!(f, "constant {value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub name: String,
    pub proportion: f64,
    pub n_ice: CountDistribution,
    pub n_resp: CountDistribution,
    pub n_solo: CountDistribution,
}

impl PersonaSpec {
    fn draw<R: Rng>(&self, rng: &mut R) -> (u64, u64, u64) {
        (self.n_ice.sample(rng), self.n_resp.sample(rng), self.n_solo.sample(rng))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Emit {
    FeatureTable,
    #[default]
    CommentLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_students: usize,
    pub personas: Vec<PersonaSpec>,
    pub seed: u64,
    pub emit: Emit,
    pub course_id: String,
    /// Reject infeasible reply budgets instead of rebalancing them.
    pub strict: bool,
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.personas.is_empty() {
            return Err(Error::Config("cohort needs at least one persona".into()));
        }
        if self.n_students < self.personas.len() {
            return Err(Error::Config(format!(
                "{} students cannot cover {} personas",
                self.n_students,
                self.personas.len()
            )));
        }
        let total: f64 = self.personas.iter().map(|p| p.proportion).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("persona proportions sum to {total}, expected 1")));
        }
        for p in &self.personas {
            if !(p.proportion > 0.0 && p.proportion <= 1.0) {
                return Err(Error::Config(format!("persona {:?} proportion must be in (0, 1]", p.name)));
            }
            p.n_ice.validate()?;
            p.n_resp.validate()?;
            p.n_solo.validate()?;
        }
        Ok(())
    }

    /// Students per persona: largest-remainder rounding with at least one each.
    pub fn persona_sizes(&self) -> Vec<usize> {
        let n = self.n_students;
        let k = self.personas.len();
        let exact: Vec<f64> = self.personas.iter().map(|p| p.proportion * n as f64).collect();
        let mut sizes: Vec<usize> = exact.iter().map(|x| (x.floor() as usize).max(1)).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let mut assigned: usize = sizes.iter().sum();
        let mut i = 0;
        while assigned < n {
            sizes[order[i % k]] += 1;
            assigned += 1;
            i += 1;
        }
        while assigned > n {
            // only reachable through the max(1) floor; trim the largest
            let largest = (0..k).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap();
            sizes[largest] -= 1;
            assigned -= 1;
        }
        sizes
    }

    /// Parses the key-value spec format (see `specs/paper-mimic.spec`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut n_students = None;
        let mut seed = 0;
        let mut emit = Emit::CommentLog;
        let mut course_id = "synthetic".to_string();
        let mut strict = false;
        let mut personas: Vec<(usize, String, Vec<(String, String, usize)>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Spec { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = section
                    .trim()
                    .strip_prefix("persona")
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| err(format!("expected [persona NAME], got [{section}]")))?;
                personas.push((line_no, name.to_string(), Vec::new()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            if let Some((_, _, fields)) = personas.last_mut() {
                fields.push((key.to_string(), value.to_string(), line_no));
                continue;
            }
            match key {
                "n_students" => {
                    n_students = Some(value.parse().map_err(|_| err(format!("bad n_students {value:?}")))?)
                }
                "seed" => seed = value.parse().map_err(|_| err(format!("bad seed {value:?}")))?,
                "emit" => {
                    emit = match value {
                        "comment-log" => Emit::CommentLog,
                        "feature-table" => Emit::FeatureTable,
                        _ => return Err(err(format!("emit must be comment-log or feature-table, got {value:?}"))),
                    }
                }
                "course_id" => course_id = value.to_string(),
                "strict" => strict = value.parse().map_err(|_| err(format!("bad strict flag {value:?}")))?,
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }

        let mut parsed = Vec::with_capacity(personas.len());
        for (line, name, fields) in personas {
            let mut proportion = None;
            let mut dists: [Option<CountDistribution>; 3] = [None, None, None];
            for (key, value, l) in fields {
                let wrap = |e: Error| Error::Spec { line: l, message: e.to_string() };
                match key.as_str() {
                    "proportion" => {
                        proportion = Some(value.parse::<f64>().map_err(|_| Error::Spec {
                            line: l,
                            message: format!("bad proportion {value:?}"),
                        })?)
                    }
                    "n_ice" => dists[Variable::Ice.index()] = Some(value.parse().map_err(wrap)?),
                    "n_resp" => dists[Variable::Resp.index()] = Some(value.parse().map_err(wrap)?),
                    "n_solo" => dists[Variable::Solo.index()] = Some(value.parse().map_err(wrap)?),
                    other => return Err(Error::Spec { line: l, message: format!("unknown persona key {other:?}") }),
                }
            }
            let missing = |what: &str| Error::Spec { line, message: format!("persona {name:?} lacks {what}") };
            parsed.push(PersonaSpec {
                proportion: proportion.ok_or_else(|| missing("proportion"))?,
                n_ice: dists[0].ok_or_else(|| missing("n_ice"))?,
                n_resp: dists[1].ok_or_else(|| missing("n_resp"))?,
                n_solo: dists[2].ok_or_else(|| missing("n_solo"))?,
                name,
            });
        }

        let spec = CohortSpec {
            n_students: n_students.ok_or(Error::Spec { line: 0, message: "missing n_students".into() })?,
            personas: parsed,
            seed,
            emit,
            course_id,
            strict,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Spec shipped with the crate: three personas sized like a 43 / 177 / 2,082
/// split of 2,302 students with heavy-tailed counts.
pub const PAPER_MIMIC_SPEC: &str = include_str!("../specs/paper-mimic.spec");

pub fn paper_mimic_spec() -> CohortSpec {
    CohortSpec::parse(PAPER_MIMIC_SPEC).expect("shipped spec is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFeatures {
    pub table: StudentFeatureTable,
    /// Persona index per table row.
    pub labels: Vec<usize>,
}

fn student_id(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(4);
    format!("s{:0width$}", i + 1)
}

fn draw_features(spec: &CohortSpec, rng: &mut ChaCha8Rng) -> Result<GeneratedFeatures> {
    spec.validate()?;
    let sizes = spec.persona_sizes();
    let mut labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(p, &s)| std::iter::repeat_n(p, s)).collect();
    labels.shuffle(rng);

    let mut rows = Vec::with_capacity(spec.n_students);
    for (i, &persona) in labels.iter().enumerate() {
        let p = &spec.personas[persona];
        let mut draw = p.draw(rng);
        let mut tries = 0;
        while draw.0 + draw.1 + draw.2 == 0 {
            tries += 1;
            if tries > MAX_ZERO_REDRAWS {
                return Err(Error::Config(format!("persona {:?} keeps producing students with no comments", p.name)));
            }
            draw = p.draw(rng);
        }
        rows.push(StudentCounts {
            student_id: student_id(i, spec.n_students),
            n_ice: draw.0,
            n_resp: draw.1,
            n_solo: draw.2,
        });
    }
    // ids are zero-padded, so this order is already sorted
    Ok(GeneratedFeatures { table: StudentFeatureTable { rows }, labels })
}

pub fn generate_features(spec: &CohortSpec) -> Result<GeneratedFeatures> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    draw_features(spec, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLog {
    pub log: CommentLog,
    /// Counts the log reproduces (the planted counts after any rebalancing).
    pub table: StudentFeatureTable,
    pub labels: Vec<usize>,
    /// Human-readable record of every rebalancing step.
    pub adjustments: Vec<String>,
}

/// Makes the reply budget feasible: every ice-breaker needs a reply and
/// replies need at least one ice-breaker to hang from.
fn rebalance(table: &mut StudentFeatureTable, strict: bool) -> Result<Vec<String>> {
    let mut notes = Vec::new();
    loop {
        let ice = table.column_sum(Variable::Ice);
        let resp = table.column_sum(Variable::Resp);
        if ice > resp {
            if strict {
                return Err(Error::Infeasible(format!(
                    "{ice} ice-breaking comments need replies but the responding budget is {resp}"
                )));
            }
            let excess = ice - resp;
            for _ in 0..excess {
                let row = table
                    .rows
                    .iter_mut()
                    .max_by(|a, b| a.n_ice.cmp(&b.n_ice).then(b.student_id.cmp(&a.student_id)))
                    .expect("ice > 0 implies rows");
                row.n_ice -= 1;
                row.n_solo += 1;
            }
            notes.push(format!("converted {excess} ice-breaking comments to solo (responding budget {resp})"));
        } else if ice == 0 && resp > 0 {
            if strict {
                return Err(Error::Infeasible(format!("{resp} replies but no ice-breaking comment to reply to")));
            }
            let by_solo = table
                .rows
                .iter_mut()
                .filter(|r| r.n_solo > 0)
                .max_by(|a, b| a.n_solo.cmp(&b.n_solo).then(b.student_id.cmp(&a.student_id)));
            match by_solo {
                Some(row) => {
                    row.n_solo -= 1;
                    row.n_ice += 1;
                    notes.push(format!("converted a solo comment of {} to ice-breaking", row.student_id));
                }
                None => {
                    let row = table
                        .rows
                        .iter_mut()
                        .max_by(|a, b| a.n_resp.cmp(&b.n_resp).then(b.student_id.cmp(&a.student_id)))
                        .expect("resp > 0 implies rows");
                    row.n_resp -= 1;
                    row.n_ice += 1;
                    notes.push(format!("converted a responding comment of {} to ice-breaking", row.student_id));
                }
            }
        } else {
            return Ok(notes);
        }
    }
}

pub fn generate_comment_log(spec: &CohortSpec) -> Result<GeneratedLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let GeneratedFeatures { mut table, labels } = draw_features(spec, &mut rng)?;
    let adjustments = rebalance(&mut table, spec.strict)?;
    let log = build_log(&table, &spec.course_id, &mut rng)?;
    Ok(GeneratedLog { log, table, labels, adjustments })
}

/// Builds a comment graph realizing `table` exactly. Requires a feasible
/// budget (see `rebalance`).
pub fn build_log<R: Rng>(table: &StudentFeatureTable, course_id: &str, rng: &mut R) -> Result<CommentLog> {
    let total_ice = table.column_sum(Variable::Ice) as usize;
    let total_resp = table.column_sum(Variable::Resp) as usize;
    if total_ice > total_resp || (total_ice == 0 && total_resp > 0) {
        return Err(Error::Infeasible(format!("{total_ice} ice-breaking vs {total_resp} responding")));
    }
    let start: DateTime<Utc> = DateTime::parse_from_rfc3339("2019-01-07T09:00:00Z")
        .expect("constant timestamp")
        .with_timezone(&Utc);
    let total: usize = table.rows.iter().map(|r| r.total() as usize).sum();
    let width = total.to_string().len().max(6);
    let mut comments: Vec<Comment> = Vec::with_capacity(total);
    let next_id = |comments: &Vec<Comment>| format!("c{:0width$}", comments.len() + 1);

    let mut ice_ids: Vec<usize> = Vec::with_capacity(total_ice);
    for row in &table.rows {
        for kind in std::iter::repeat_n(true, row.n_ice as usize).chain(std::iter::repeat_n(false, row.n_solo as usize)) {
            let week = rng.random_range(1..=WEEKS);
            let step = rng.random_range(1..=STEPS_PER_WEEK);
            let id = next_id(&comments);
            if kind {
                ice_ids.push(comments.len());
            }
            comments.push(Comment {
                comment_id: id,
                author_id: row.student_id.clone(),
                parent_id: None,
                week,
                step,
                timestamp: start + Duration::minutes(comments.len() as i64),
                likes: rng.random_range(0..4),
            });
        }
    }
    // Interleave thread starters of different students.
    ice_ids.shuffle(rng);

    // Round-robin over students with responding budget left.
    let mut budget: Vec<(usize, u64)> = table
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.n_resp > 0)
        .map(|(i, r)| (i, r.n_resp))
        .collect();
    let mut cursor = 0;
    let mut next_author = || -> usize {
        while budget[cursor % budget.len()].1 == 0 {
            cursor += 1;
        }
        let slot = cursor % budget.len();
        budget[slot].1 -= 1;
        cursor += 1;
        budget[slot].0
    };

    // `slots` holds one entry per reply a thread starter has received, so
    // picking uniformly from it favours busy threads.
    let mut slots: Vec<usize> = Vec::with_capacity(total_resp);
    let mut reply_ids: Vec<usize> = Vec::with_capacity(total_resp);
    for r in 0..total_resp {
        let parent = if r < total_ice {
            slots.push(ice_ids[r]);
            ice_ids[r]
        } else if rng.random_bool(0.2) {
            reply_ids[rng.random_range(0..reply_ids.len())]
        } else {
            let root = slots[rng.random_range(0..slots.len())];
            slots.push(root);
            root
        };
        let author = next_author();
        let (week, step) = (comments[parent].week, comments[parent].step);
        let id = next_id(&comments);
        reply_ids.push(comments.len());
        comments.push(Comment {
            comment_id: id,
            author_id: table.rows[author].student_id.clone(),
            parent_id: Some(comments[parent].comment_id.clone()),
            week,
            step,
            timestamp: start + Duration::minutes(comments.len() as i64),
            likes: rng.random_range(0..4),
        });
    }

    CommentLog::new(course_id, comments)
}
