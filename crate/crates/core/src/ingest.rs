//! Comment log parsing and interaction categorization.
//!
//! A comment is *responding* when it has a parent, *ice-breaking* when it is
//! top-level and received at least one direct reply, and *solo* otherwise.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::mean_and_sd;

pub const LOG_HEADER: [&str; 7] = [
    "comment_id",
    "author_id",
    "parent_id",
    "week",
    "step",
    "timestamp",
    "likes",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub author_id: String,
    pub parent_id: Option<String>,
    pub week: u32,
    pub step: u32,
    pub timestamp: DateTime<Utc>,
    pub likes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommentCategory {
    IceBreaking,
    Responding,
    Solo,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject logs whose replies point at comments that are not in the log.
    pub strict: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommentLog {
    pub course_id: String,
    pub comments: Vec<Comment>,
}

impl CommentLog {
    /// Builds a log, enforcing unique ids and rejecting self-replies.
    pub fn new(course_id: impl Into<String>, comments: Vec<Comment>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(comments.len());
        for (i, c) in comments.iter().enumerate() {
            let line = i as u64 + 2;
            if !seen.insert(c.comment_id.as_str()) {
                return Err(Error::DuplicateId { line, id: c.comment_id.clone() });
            }
            if c.parent_id.as_deref() == Some(c.comment_id.as_str()) {
                return Err(Error::SelfReply { line, id: c.comment_id.clone() });
            }
        }
        Ok(CommentLog { course_id: course_id.into(), comments })
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    /// Fails on the first reply whose parent is missing from the log.
    pub fn check_parents(&self) -> Result<()> {
        match build_reply_index(self).dangling.into_iter().next() {
            Some(d) => Err(Error::DanglingParent { id: d.comment_id, parent: d.parent_id }),
            None => Ok(()),
        }
    }

    /// Writes the log in the same delimited format `parse_comment_log` reads.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(LOG_HEADER)?;
        for c in &self.comments {
            w.write_record([
                c.comment_id.as_str(),
                c.author_id.as_str(),
                c.parent_id.as_deref().unwrap_or(""),
                &c.week.to_string(),
                &c.step.to_string(),
                &c.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                &c.likes.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn parse_comment_log<R: Read>(
    reader: R,
    course_id: &str,
    options: ParseOptions,
) -> Result<CommentLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    match records.next() {
        None => return Err(Error::Parse { line: 1, message: "missing header row".into() }),
        Some(header) => {
            let header = header?;
            let got: Vec<&str> = header.iter().map(str::trim).collect();
            if got != LOG_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header {:?}, found {:?}", LOG_HEADER.join(","), got.join(",")),
                });
            }
        }
    }

    let mut comments = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != LOG_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", LOG_HEADER.len(), record.len()),
            });
        }
        let field = |i: usize| record[i].trim();
        let bad = |name: &str, value: &str| Error::Parse {
            line,
            message: format!("cannot parse {name} from {value:?}"),
        };
        let comment_id = field(0);
        if comment_id.is_empty() {
            return Err(Error::Parse { line, message: "empty comment_id".into() });
        }
        let author_id = field(1);
        if author_id.is_empty() {
            return Err(Error::Parse { line, message: "empty author_id".into() });
        }
        let parent_id = match field(2) {
            "" => None,
            p => Some(p.to_string()),
        };
        let week: u32 = field(3).parse().map_err(|_| bad("week", field(3)))?;
        let step: u32 = field(4).parse().map_err(|_| bad("step", field(4)))?;
        if week == 0 || step == 0 {
            return Err(Error::Parse { line, message: "week and step must be positive".into() });
        }
        let timestamp = DateTime::parse_from_rfc3339(field(5))
            .map_err(|_| bad("timestamp", field(5)))?
            .with_timezone(&Utc);
        let likes: u64 = field(6).parse().map_err(|_| bad("likes", field(6)))?;

        if parent_id.as_deref() == Some(comment_id) {
            return Err(Error::SelfReply { line, id: comment_id.to_string() });
        }
        comments.push(Comment {
            comment_id: comment_id.to_string(),
            author_id: author_id.to_string(),
            parent_id,
            week,
            step,
            timestamp,
            likes,
        });
    }

    // Re-check uniqueness with real line numbers.
    let mut seen = HashSet::with_capacity(comments.len());
    for (i, c) in comments.iter().enumerate() {
        if !seen.insert(c.comment_id.as_str()) {
            return Err(Error::DuplicateId { line: i as u64 + 2, id: c.comment_id.clone() });
        }
    }

    let log = CommentLog { course_id: course_id.to_string(), comments };
    if options.strict {
        log.check_parents()?;
    }
    Ok(log)
}

pub fn parse_comment_log_file(path: &Path, options: ParseOptions) -> Result<CommentLog> {
    let file = std::fs::File::open(path)?;
    let course_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_comment_log(std::io::BufReader::new(file), &course_id, options)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DanglingReply {
    pub comment_id: String,
    pub parent_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplyIndex {
    /// Number of direct replies per comment id; every comment has an entry.
    pub counts: HashMap<String, usize>,
    pub dangling: Vec<DanglingReply>,
}

impl ReplyIndex {
    pub fn reply_count(&self, id: &str) -> usize {
        self.counts.get(id).copied().unwrap_or(0)
    }
}

pub fn build_reply_index(log: &CommentLog) -> ReplyIndex {
    let mut counts: HashMap<String, usize> =
        log.comments.iter().map(|c| (c.comment_id.clone(), 0)).collect();
    let mut dangling = Vec::new();
    for c in &log.comments {
        if let Some(parent) = &c.parent_id {
            match counts.get_mut(parent) {
                Some(n) => *n += 1,
                None => dangling.push(DanglingReply {
                    comment_id: c.comment_id.clone(),
                    parent_id: parent.clone(),
                }),
            }
        }
    }
    ReplyIndex { counts, dangling }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Categorization {
    pub categories: HashMap<String, CommentCategory>,
    pub replies: ReplyIndex,
}

impl Categorization {
    pub fn category(&self, id: &str) -> Option<CommentCategory> {
        self.categories.get(id).copied()
    }

    pub fn count(&self, category: CommentCategory) -> usize {
        self.categories.values().filter(|&&c| c == category).count()
    }
}

pub fn categorize(log: &CommentLog) -> Categorization {
    let replies = build_reply_index(log);
    let categories = log
        .comments
        .iter()
        .map(|c| {
            let cat = if c.parent_id.is_some() {
                CommentCategory::Responding
            } else if replies.reply_count(&c.comment_id) > 0 {
                CommentCategory::IceBreaking
            } else {
                CommentCategory::Solo
            };
            (c.comment_id.clone(), cat)
        })
        .collect();
    Categorization { categories, replies }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub count: usize,
    /// Fraction of all comments; absent for an empty log.
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceBreakingShare {
    pub count: usize,
    pub share: Option<f64>,
    pub share_of_initializing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub total: usize,
    pub responding: CategoryShare,
    pub initializing: CategoryShare,
    pub ice_breaking: IceBreakingShare,
    pub solo: CategoryShare,
    pub replies_per_ice_breaker_mean: Option<f64>,
    pub replies_per_ice_breaker_sd: Option<f64>,
    pub social_student_count: usize,
    pub comments_per_student_mean: Option<f64>,
    pub comments_per_student_sd: Option<f64>,
    pub dangling_replies: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn corpus_summary(log: &CommentLog, cats: &Categorization) -> CorpusSummary {
    let total = log.len();
    let ice = cats.count(CommentCategory::IceBreaking);
    let resp = cats.count(CommentCategory::Responding);
    let solo = cats.count(CommentCategory::Solo);
    let initializing = ice + solo;

    let replies_per_ice: Vec<f64> = log
        .comments
        .iter()
        .filter(|c| cats.category(&c.comment_id) == Some(CommentCategory::IceBreaking))
        .map(|c| cats.replies.reply_count(&c.comment_id) as f64)
        .collect();
    let ice_stats = mean_and_sd(&replies_per_ice);

    let mut per_student: HashMap<&str, usize> = HashMap::new();
    for c in &log.comments {
        *per_student.entry(c.author_id.as_str()).or_default() += 1;
    }
    let mut student_counts: Vec<(&str, usize)> = per_student.into_iter().collect();
    student_counts.sort_unstable();
    let student_counts: Vec<f64> = student_counts.iter().map(|&(_, n)| n as f64).collect();
    let student_stats = mean_and_sd(&student_counts);

    CorpusSummary {
        total,
        responding: CategoryShare { count: resp, share: ratio(resp, total) },
        initializing: CategoryShare { count: initializing, share: ratio(initializing, total) },
        ice_breaking: IceBreakingShare {
            count: ice,
            share: ratio(ice, total),
            share_of_initializing: ratio(ice, initializing),
        },
        solo: CategoryShare { count: solo, share: ratio(solo, total) },
        replies_per_ice_breaker_mean: ice_stats.mean,
        replies_per_ice_breaker_sd: ice_stats.sd,
        social_student_count: student_counts.len(),
        comments_per_student_mean: student_stats.mean,
        comments_per_student_sd: student_stats.sd,
        dangling_replies: cats.replies.dangling.len(),
    }
}

impl CorpusSummary {
    pub fn render_text(&self) -> String {
        fn pct(x: Option<f64>) -> String {
            x.map(|v| format!("{:.2}%", 100.0 * v)).unwrap_or_else(|| "n/a".into())
        }
        fn num(x: Option<f64>) -> String {
            x.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into())
        }
        let mut out = String::new();
        out.push_str(&format!("comments            {}\n", self.total));
        out.push_str(&format!(
            "responding          {} ({})\n",
            self.responding.count,
            pct(self.responding.share)
        ));
        out.push_str(&format!(
            "initializing        {} ({})\n",
            self.initializing.count,
            pct(self.initializing.share)
        ));
        out.push_str(&format!(
            "ice-breaking        {} ({}; {} of initializing)\n",
            self.ice_breaking.count,
            pct(self.ice_breaking.share),
            pct(self.ice_breaking.share_of_initializing)
        ));
        out.push_str(&format!("solo                {} ({})\n", self.solo.count, pct(self.solo.share)));
        out.push_str(&format!(
            "replies/ice-breaker mean {} sd {}\n",
            num(self.replies_per_ice_breaker_mean),
            num(self.replies_per_ice_breaker_sd)
        ));
        out.push_str(&format!(
            "social students     {} (comments/student mean {} sd {})\n",
            self.social_student_count,
            num(self.comments_per_student_mean),
            num(self.comments_per_student_sd)
        ));
        if self.dangling_replies > 0 {
            out.push_str(&format!("dangling replies    {}\n", self.dangling_replies));
        }
        out
    }
}
