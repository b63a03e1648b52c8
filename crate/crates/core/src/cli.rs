//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cluster::{elbow_curve, Init};
use crate::features::{aggregate_students, feature_stats, standardize, DenominatorPolicy, StudentFeatureTable};
use crate::ingest::{categorize, corpus_summary, parse_comment_log_file, ParseOptions};
use crate::protocol::{
    cluster_plot_data, render_report, run_protocol, wcss_plot_data, Correction, ProtocolConfig, ReportFormat,
};
use crate::synth::{generate_comment_log, generate_features, CohortSpec, Emit};

#[derive(Debug, Parser)]
#[command(name = "socialclust", version, about = "Cluster students by comment interaction patterns")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus statistics of a comment log.
    Summarize(SummarizeArgs),
    /// Per-student counts and their descriptive statistics.
    Features(FeaturesArgs),
    /// Sweep k, validate, select and profile clusters.
    Cluster(ClusterArgs),
    /// Like `cluster`, without persona profiles.
    SelectK(ClusterArgs),
    /// Generate a synthetic cohort from a spec file.
    Synth(SynthArgs),
    /// WCSS-versus-k curve with an elbow heuristic.
    Elbow(ElbowArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Text,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Text => ReportFormat::Text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenominatorArg {
    All,
    Posters,
}

impl From<DenominatorArg> for DenominatorPolicy {
    fn from(d: DenominatorArg) -> Self {
        match d {
            DenominatorArg::All => DenominatorPolicy::AllSocialStudents,
            DenominatorArg::Posters => DenominatorPolicy::PostersOfTypeOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    None,
    Holm,
}

impl From<CorrectionArg> for Correction {
    fn from(c: CorrectionArg) -> Self {
        match c {
            CorrectionArg::None => Correction::None,
            CorrectionArg::Holm => Correction::Holm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Kmeanspp,
    FirstKDistinct,
}

impl From<InitArg> for Init {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Kmeanspp => Init::KMeansPlusPlus,
            InitArg::FirstKDistinct => Init::FirstKDistinct,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Comment log (`comment_id,author_id,parent_id,week,step,timestamp,likes`).
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the input as a feature table (`student_id,n_ice,n_resp,n_solo`).
    #[arg(long)]
    pub table: bool,
    /// Reject logs with replies to unknown comments.
    #[arg(long)]
    pub strict: bool,
}

impl InputArgs {
    fn load_table(&self) -> anyhow::Result<StudentFeatureTable> {
        if self.table {
            let file = fs::File::open(&self.input).with_context(|| format!("opening {}", self.input.display()))?;
            return StudentFeatureTable::read_csv(file).with_context(|| format!("reading {}", self.input.display()));
        }
        let log = parse_comment_log_file(&self.input, ParseOptions { strict: self.strict })
            .with_context(|| format!("reading {}", self.input.display()))?;
        let cats = categorize(&log);
        for d in &cats.replies.dangling {
            eprintln!("warning: comment {} replies to missing comment {}", d.comment_id, d.parent_id);
        }
        Ok(aggregate_students(&log, &cats))
    }
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Writes features.csv and feature-stats.json here instead of stdout.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub denominator: DenominatorArg,
    /// Also print the standardized matrix.
    #[arg(long)]
    pub standardized: bool,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    /// Default 2^d with d = 3 variables.
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.005)]
    pub min_share: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "none")]
    pub correction: CorrectionArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value = "kmeanspp")]
    pub init: InitArg,
}

impl ProtocolArgs {
    pub fn config(&self) -> ProtocolConfig {
        ProtocolConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            max_iterations: self.max_iter,
            min_cluster_share: self.min_share,
            alpha: self.alpha,
            correction: self.correction.into(),
            seed: self.seed,
            restarts: self.restarts,
            init: self.init.into(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Writes report.json, report.txt, wcss.tsv and clusters.tsv here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub denominator: DenominatorArg,
    /// Format of the report printed to stdout.
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Cohort spec file; the shipped paper-mimic spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output file (comment log or feature table, per the spec's `emit`).
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the planted persona of each student (`student_id<TAB>persona`).
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ElbowArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub max_iter: usize,
    /// Writes elbow.tsv and elbow.json here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn cmd_summarize(args: &SummarizeArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let log = parse_comment_log_file(&args.input, ParseOptions { strict: args.strict })
        .with_context(|| format!("reading {}", args.input.display()))?;
    let cats = categorize(&log);
    for d in &cats.replies.dangling {
        eprintln!("warning: comment {} replies to missing comment {}", d.comment_id, d.parent_id);
    }
    let summary = corpus_summary(&log, &cats);
    match args.format {
        FormatArg::Json => {
            serde_json::to_writer_pretty(&mut *out, &summary)?;
            writeln!(out)?;
        }
        FormatArg::Text => out.write_all(summary.render_text().as_bytes())?,
    }
    Ok(())
}

pub fn cmd_features(args: &FeaturesArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let table = args.input.load_table()?;
    let stats = feature_stats(&table, args.denominator.into());
    let mut stats_json = serde_json::to_vec_pretty(&stats)?;
    stats_json.push(b'\n');
    match &args.output_dir {
        Some(dir) => {
            ensure_dir(dir)?;
            let mut csv = Vec::new();
            table.write_csv(&mut csv)?;
            write_file(dir, "features.csv", &csv)?;
            write_file(dir, "feature-stats.json", &stats_json)?;
            if args.standardized {
                let m = standardize(&table)?;
                let mut json = serde_json::to_vec_pretty(&m)?;
                json.push(b'\n');
                write_file(dir, "standardized.json", &json)?;
            }
        }
        None => {
            table.write_csv(&mut *out)?;
            if args.standardized {
                serde_json::to_writer_pretty(&mut *out, &standardize(&table)?)?;
                writeln!(out)?;
            }
            out.write_all(&stats_json)?;
        }
    }
    Ok(())
}

pub fn cmd_cluster(args: &ClusterArgs, profile: bool, out: &mut dyn Write) -> anyhow::Result<()> {
    let table = args.input.load_table()?;
    let config = args.protocol.config();
    let report = run_protocol(&table, &config, args.denominator.into(), profile)?;
    if let Some(dir) = &args.output_dir {
        ensure_dir(dir)?;
        write_file(dir, "report.json", &render_report(&report, ReportFormat::Json)?)?;
        write_file(dir, "report.txt", &render_report(&report, ReportFormat::Text)?)?;
        write_file(dir, "wcss.tsv", wcss_plot_data(&report).as_bytes())?;
        if profile {
            write_file(dir, "clusters.tsv", cluster_plot_data(&report).as_bytes())?;
        }
    }
    out.write_all(&render_report(&report, args.format.into())?)?;
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            CohortSpec::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => crate::synth::paper_mimic_spec(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let mut bytes = Vec::new();
    let (ids, labels): (Vec<String>, Vec<usize>) = match spec.emit {
        Emit::CommentLog => {
            let g = generate_comment_log(&spec)?;
            for note in &g.adjustments {
                eprintln!("note: {note}");
            }
            g.log.write_csv(&mut bytes)?;
            (g.table.rows.into_iter().map(|r| r.student_id).collect(), g.labels)
        }
        Emit::FeatureTable => {
            let g = generate_features(&spec)?;
            g.table.write_csv(&mut bytes)?;
            (g.table.rows.into_iter().map(|r| r.student_id).collect(), g.labels)
        }
    };
    fs::write(&args.output, bytes).with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(path) = &args.labels {
        let mut text = String::from("# student_id\tpersona\n");
        for (id, l) in ids.iter().zip(labels) {
            text.push_str(&format!("{id}\t{}\n", spec.personas[l].name));
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn cmd_elbow(args: &ElbowArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if args.k_min == 0 || args.k_min > args.k_max {
        bail!("need 1 <= k-min <= k-max");
    }
    let table = args.input.load_table()?;
    let matrix = standardize(&table)?;
    let ks: Vec<usize> = (args.k_min..=args.k_max).collect();
    let curve = elbow_curve(&matrix, &ks, args.restarts, args.seed, args.max_iter)?;
    let mut json = serde_json::to_vec_pretty(&curve)?;
    json.push(b'\n');
    if let Some(dir) = &args.output_dir {
        ensure_dir(dir)?;
        write_file(dir, "elbow.tsv", curve.plot_data().as_bytes())?;
        write_file(dir, "elbow.json", &json)?;
    }
    match args.format {
        FormatArg::Json => out.write_all(&json)?,
        FormatArg::Text => {
            out.write_all(curve.plot_data().as_bytes())?;
            match curve.suggested_k {
                Some(k) if !curve.ambiguous => writeln!(out, "elbow at k = {k}")?,
                Some(k) => writeln!(out, "elbow ambiguous (largest bend at k = {k})")?,
                None => writeln!(out, "elbow undefined (need at least three k values)")?,
            }
        }
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            let mut buf = Vec::new();
            pool.install(|| dispatch(cli, &mut buf))?;
            out.write_all(&buf)?;
            Ok(())
        }
        None => dispatch(cli, out),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Summarize(a) => cmd_summarize(a, out),
        Command::Features(a) => cmd_features(a, out),
        Command::Cluster(a) => cmd_cluster(a, true, out),
        Command::SelectK(a) => cmd_cluster(a, false, out),
        Command::Synth(a) => cmd_synth(a),
        Command::Elbow(a) => cmd_elbow(a, out),
    }
}
