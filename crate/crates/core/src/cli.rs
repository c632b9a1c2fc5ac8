//! Command-line front end.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`. The
//! manifest stores the fully resolved job, so `rerun --manifest` repeats the
//! run without consulting the original flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PastelError, Result};
use crate::graph::{
    generate_sbm, load_graph, normalized_adjacency, sample_split_from, save_graph, Graph,
    GraphFiles, LabelSplit, SbmParams,
};
use crate::gpr::group_pagerank;
use crate::metrics::{imbalance_report, imbalance_summary};
use crate::numerics::Matrix;
use crate::trainer::{
    label_placement_study, run_baseline, structure_report, structure_study, train, BaselineKind,
    EpochRecord, StudyRecord, TrainConfig,
};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "pastel", version, about = "Position-aware graph structure learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a stochastic block model and write it as graph files.
    SbmGen {
        #[command(flatten)]
        sbm: SbmFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reaching/squashing coefficients and per-edge curvature of a graph.
    Diagnose {
        #[command(flatten)]
        input: InputFlags,
        /// CSV `node_id,class_id` of the labeled nodes; overrides sampling.
        /// Ids are indices of the loaded graph, which equal the file ids
        /// whenever a feature file is given or ids run contiguously from 0.
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the structure learner or one of the baselines.
    Train {
        #[command(flatten)]
        input: InputFlags,
        #[command(flatten)]
        config: ConfigFlags,
        /// `plain_gcn`, `add_edge:RATE` or `drop_edge:RATE`.
        #[arg(long)]
        baseline: Option<String>,
        /// Edge list of the learned structure; relative paths resolve
        /// against `--out`.
        #[arg(long)]
        dump_structure: Option<PathBuf>,
        /// CSV of the Group PageRank matrix; relative paths resolve against
        /// `--out`.
        #[arg(long)]
        dump_gpr: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy-versus-imbalance scatter data.
    Study {
        #[arg(long, value_enum)]
        mode: StudyMode,
        #[command(flatten)]
        input: InputFlags,
        #[command(flatten)]
        config: ConfigFlags,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Comma-separated between-community probabilities (structures mode).
        #[arg(long, value_delimiter = ',')]
        qs: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a run from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    Labels,
    Structures,
}

#[derive(Debug, Args)]
pub struct SbmFlags {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub c: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    /// Defaults to `c`.
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub feature_noise: f64,
}

#[derive(Debug, Args)]
pub struct InputFlags {
    /// Directory holding `graph.edges`, `features.csv` and `labels.csv`.
    #[arg(long, conflicts_with_all = ["edges", "sbm"])]
    pub graph: Option<PathBuf>,
    #[arg(long, conflicts_with = "sbm")]
    pub edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    pub features: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    pub labels: Option<PathBuf>,
    /// Inline SBM, e.g. `n=600,c=4,p=0.1,q=0.005[,dim=4,noise=1]`.
    #[arg(long)]
    pub sbm: Option<String>,
}

/// Overrides for [`TrainConfig`]; a `--config` file is applied first.
#[derive(Debug, Args)]
pub struct ConfigFlags {
    /// Flat `key = value` file of training options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub lambda1_floor: Option<f64>,
    #[arg(long)]
    pub lambda2_floor: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta3: Option<f64>,
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub track_imbalance: Option<bool>,
}

impl ConfigFlags {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => parse_config_file(&fs::read_to_string(path)?, &path.display().to_string())?,
            None => TrainConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(
            epochs, heads, alpha, lambda1, lambda2, decay, lambda1_floor, lambda2_floor, beta1,
            beta2, beta3, a0, lr, hidden, dropout, seed, per_class, patience, track_imbalance
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses flat `key = value` lines (`#` comments) over the defaults.
pub fn parse_config_file(text: &str, name: &str) -> Result<TrainConfig> {
    let serde_json::Value::Object(mut map) = serde_json::to_value(TrainConfig::default())? else {
        unreachable!("config serializes to an object");
    };
    for (k, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |m: String| PastelError::Parse {
            file: name.to_string(),
            line: k + 1,
            message: m,
        };
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let slot = map
            .get_mut(key)
            .ok_or_else(|| err(format!("unknown option `{key}`")))?;
        *slot = match slot {
            serde_json::Value::Bool(_) => value
                .parse::<bool>()
                .map(serde_json::Value::from)
                .map_err(|_| err(format!("`{key}` expects true or false"))),
            serde_json::Value::Number(n) if n.is_u64() => value
                .parse::<u64>()
                .map(serde_json::Value::from)
                .map_err(|_| err(format!("`{key}` expects a nonnegative integer"))),
            _ => value
                .parse::<f64>()
                .map(serde_json::Value::from)
                .map_err(|_| err(format!("`{key}` expects a number"))),
        }?;
    }
    Ok(serde_json::from_value(serde_json::Value::Object(map))?)
}

/// `n=600,c=4,p=0.1,q=0.005[,dim=..,noise=..]`.
pub fn parse_sbm_spec(spec: &str) -> Result<SbmParams> {
    let bad = |m: String| PastelError::InvalidParams(format!("--sbm: {m}"));
    let mut fields = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let take = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing `{k}`")));
    let int = |k: &str| -> Result<usize> {
        take(k)?.parse().map_err(|_| bad(format!("`{k}` must be an integer")))
    };
    let real = |k: &str| -> Result<f64> {
        take(k)?.parse().map_err(|_| bad(format!("`{k}` must be a number")))
    };
    if let Some(k) = fields
        .keys()
        .find(|k| !["n", "c", "p", "q", "dim", "noise"].contains(&k.as_str()))
    {
        return Err(bad(format!("unknown key `{k}`")));
    }
    let mut params = SbmParams::new(int("n")?, int("c")?, real("p")?, real("q")?);
    if fields.contains_key("dim") {
        params.feature_dim = int("dim")?;
    }
    if fields.contains_key("noise") {
        params.feature_noise = real("noise")?;
    }
    params.validate()?;
    Ok(params)
}

pub fn parse_baseline(spec: &str) -> Result<BaselineKind> {
    let (name, rate) = match spec.split_once(':') {
        Some((n, r)) => (
            n,
            Some(r.parse::<f64>().map_err(|_| {
                PastelError::InvalidParams(format!("bad baseline rate `{r}`"))
            })?),
        ),
        None => (spec, None),
    };
    match (name, rate) {
        ("plain_gcn", None) => Ok(BaselineKind::PlainGcn),
        ("add_edge", Some(r)) => Ok(BaselineKind::AddEdge(r)),
        ("drop_edge", Some(r)) => Ok(BaselineKind::DropEdge(r)),
        _ => Err(PastelError::InvalidParams(format!(
            "unknown baseline `{spec}`; expected plain_gcn, add_edge:RATE or drop_edge:RATE"
        ))),
    }
}

/// Where a command's graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphSource {
    Files {
        edges: PathBuf,
        features: Option<PathBuf>,
        labels: Option<PathBuf>,
    },
    Sbm { params: SbmParams },
}

impl GraphSource {
    fn from_flags(flags: &InputFlags) -> Result<Self> {
        let abs = |p: &Path| fs::canonicalize(p).map_err(PastelError::from);
        if let Some(spec) = &flags.sbm {
            return Ok(Self::Sbm {
                params: parse_sbm_spec(spec)?,
            });
        }
        if let Some(dir) = &flags.graph {
            let files = GraphFiles::in_dir(dir);
            let optional = |p: Option<PathBuf>| p.filter(|p| p.exists()).map(|p| abs(&p)).transpose();
            return Ok(Self::Files {
                edges: abs(&files.edges)?,
                features: optional(files.features)?,
                labels: optional(files.labels)?,
            });
        }
        match &flags.edges {
            Some(edges) => Ok(Self::Files {
                edges: abs(edges)?,
                features: flags.features.as_deref().map(abs).transpose()?,
                labels: flags.labels.as_deref().map(abs).transpose()?,
            }),
            None => Err(PastelError::InvalidParams(
                "no graph given; use --graph, --edges or --sbm".into(),
            )),
        }
    }

    fn input_files(&self) -> Vec<&Path> {
        match self {
            Self::Files {
                edges,
                features,
                labels,
            } => std::iter::once(edges.as_path())
                .chain(features.as_deref())
                .chain(labels.as_deref())
                .collect(),
            Self::Sbm { .. } => Vec::new(),
        }
    }

    /// The graph with its known labels; SBM graphs use the `seed`.
    fn load(&self, seed: u64) -> Result<(Graph, Vec<Option<usize>>)> {
        match self {
            Self::Files {
                edges,
                features,
                labels,
            } => load_graph(&GraphFiles {
                edges: edges.clone(),
                features: features.clone(),
                labels: labels.clone(),
            }),
            Self::Sbm { params } => {
                let (g, labels) = generate_sbm(params, seed)?;
                Ok((g, labels.into_iter().map(Some).collect()))
            }
        }
    }
}

/// How the labeled nodes are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SplitSource {
    Sampled { per_class: usize, seed: u64 },
    Anchors { file: PathBuf },
}

impl SplitSource {
    fn build(&self, labels: &[Option<usize>]) -> Result<LabelSplit> {
        match self {
            Self::Sampled { per_class, seed } => sample_split_from(labels, *per_class, *seed),
            Self::Anchors { file } => anchors_split(labels, file),
        }
    }
}

fn anchors_split(labels: &[Option<usize>], file: &Path) -> Result<LabelSplit> {
    let text = fs::read_to_string(file)?;
    let name = file.display().to_string();
    let mut known = labels.to_vec();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() || (k == 0 && body.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let parsed = body
            .split_once(',')
            .and_then(|(v, c)| Some((v.trim().parse::<usize>().ok()?, c.trim().parse::<usize>().ok()?)));
        let (v, c) = parsed.ok_or_else(|| PastelError::Parse {
            file: name.clone(),
            line: k + 1,
            message: format!("expected node_id,class_id, got `{body}`"),
        })?;
        if v >= known.len() {
            return Err(PastelError::InconsistentNodeCount(format!(
                "anchor {v} but the graph has {} nodes",
                known.len()
            )));
        }
        known[v] = Some(c);
        if sets.len() <= c {
            sets.resize(c + 1, Vec::new());
        }
        sets[c].push(v);
    }
    for set in &mut sets {
        set.sort_unstable();
        set.dedup();
    }
    LabelSplit::from_anchors(known, sets)
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Job {
    SbmGen {
        params: SbmParams,
        seed: u64,
    },
    Diagnose {
        graph: GraphSource,
        split: SplitSource,
        seed: u64,
    },
    Train {
        graph: GraphSource,
        split: SplitSource,
        config: TrainConfig,
        baseline: Option<BaselineKind>,
        dump_structure: Option<PathBuf>,
        dump_gpr: Option<PathBuf>,
    },
    Study {
        mode: StudyMode,
        graph: GraphSource,
        config: TrainConfig,
        trials: usize,
        qs: Vec<f64>,
    },
}

impl Job {
    fn name(&self) -> &'static str {
        match self {
            Self::SbmGen { .. } => "sbm-gen",
            Self::Diagnose { .. } => "diagnose",
            Self::Train { .. } => "train",
            Self::Study { .. } => "study",
        }
    }

    fn seed(&self) -> u64 {
        match self {
            Self::SbmGen { seed, .. } | Self::Diagnose { seed, .. } => *seed,
            Self::Train { config, .. } | Self::Study { config, .. } => config.seed,
        }
    }

    fn inputs(&self) -> Vec<&Path> {
        match self {
            Self::SbmGen { .. } => Vec::new(),
            Self::Diagnose { graph, split, .. } | Self::Train { graph, split, .. } => {
                let mut v = graph.input_files();
                if let SplitSource::Anchors { file } = split {
                    v.push(file);
                }
                v
            }
            Self::Study { graph, .. } => graph.input_files(),
        }
    }
}

/// Provenance written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub job: Job,
    /// SHA-256 of every input file, keyed by absolute path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, keyed by path relative to `--out`.
    pub outputs: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn input_digests(job: &Job) -> Result<BTreeMap<String, String>> {
    job.inputs()
        .into_iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
        .collect()
}

fn resolve_out(out: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DiagnoseOutput {
    rc: f64,
    sc: f64,
    per_edge_curvature: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    wf1: f64,
    mf1: f64,
    rc_before: Option<f64>,
    rc_after: Option<f64>,
    sc_before: Option<f64>,
    sc_after: Option<f64>,
}

/// Writes `u v w` lines for the nonzero upper triangle of `m`.
fn edge_list(m: &Matrix) -> String {
    let mut out = String::new();
    for u in 0..m.rows() {
        for v in u..m.cols() {
            let w = m[(u, v)];
            if w != 0.0 {
                writeln!(out, "{u} {v} {w:?}").expect("string write");
            }
        }
    }
    out
}

fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn study_csv(records: &[StudyRecord]) -> String {
    let mut out = String::from("rc,sc,wf1,seed\n");
    for r in records {
        writeln!(out, "{:?},{:?},{:?},{}", r.rc, r.sc, r.wf1, r.seed).expect("string write");
    }
    out
}

/// Coefficients that are undefined on a graph (edgeless, diameter 1, ...)
/// are reported as null rather than failing the run.
fn optional_summary(result: Result<crate::metrics::ImbalanceSummary>) -> Result<(Option<f64>, Option<f64>)> {
    match result {
        Ok(s) => Ok((Some(s.rc), Some(s.sc))),
        Err(
            PastelError::EmptyGraph
            | PastelError::DegenerateDiameter(_)
            | PastelError::NoReachablePairs,
        ) => Ok((None, None)),
        Err(e) => Err(e),
    }
}

/// Runs `job`, writing its outputs into `out`; returns output file names.
fn execute(job: &Job, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    match job {
        Job::SbmGen { params, seed } => {
            let (g, labels) = generate_sbm(params, *seed)?;
            let labels: Vec<Option<usize>> = labels.into_iter().map(Some).collect();
            save_graph(&g, &labels, &GraphFiles::in_dir(out))?;
            Ok(vec!["graph.edges".into(), "features.csv".into(), "labels.csv".into()])
        }
        Job::Diagnose { graph, split, seed } => {
            let (g, labels) = graph.load(*seed)?;
            let split = split.build(&labels)?;
            let report = imbalance_report(&g, &split)?;
            write_json(
                &out.join("report.json"),
                &DiagnoseOutput {
                    rc: report.rc,
                    sc: report.sc,
                    per_edge_curvature: report.per_edge_curvature,
                },
            )?;
            Ok(vec!["report.json".into()])
        }
        Job::Train {
            graph,
            split,
            config,
            baseline,
            dump_structure,
            dump_gpr,
        } => {
            let (g, labels) = graph.load(config.seed)?;
            let split = split.build(&labels)?;
            let (rc_before, sc_before) = optional_summary(imbalance_summary(&g, &split))?;
            let (summary, records, structure, gpr) = match baseline {
                Some(kind) => {
                    let run = run_baseline(*kind, &g, &split, config)?;
                    let gpr = group_pagerank(&g, &split, config.alpha)?;
                    let summary = TrainSummary {
                        wf1: run.wf1,
                        mf1: run.mf1,
                        rc_before,
                        rc_after: rc_before,
                        sc_before,
                        sc_after: sc_before,
                    };
                    (summary, run.records, normalized_adjacency(&g), gpr.values)
                }
                None => {
                    let run = train(&g, &split, config)?;
                    let (rc_after, sc_after) =
                        optional_summary(structure_report(&run.structure.a_star, &split))?;
                    let summary = TrainSummary {
                        wf1: run.wf1,
                        mf1: run.mf1,
                        rc_before,
                        rc_after,
                        sc_before,
                        sc_after,
                    };
                    (summary, run.records, run.structure.a_star, run.gpr.values)
                }
            };
            write_json(&out.join("summary.json"), &summary)?;
            fs::write(out.join("records.jsonl"), records_jsonl(&records)?)?;
            let mut files = vec![PathBuf::from("summary.json"), PathBuf::from("records.jsonl")];
            if let Some(p) = dump_structure {
                fs::write(resolve_out(out, p), edge_list(&structure))?;
                files.push(p.clone());
            }
            if let Some(p) = dump_gpr {
                fs::write(resolve_out(out, p), matrix_csv(&gpr))?;
                files.push(p.clone());
            }
            Ok(files)
        }
        Job::Study {
            mode,
            graph,
            config,
            trials,
            qs,
        } => {
            let records = match mode {
                StudyMode::Labels => {
                    let (g, labels) = graph.load(config.seed)?;
                    let labels: Vec<usize> = labels
                        .into_iter()
                        .collect::<Option<_>>()
                        .ok_or_else(|| {
                            PastelError::InvalidParams("label study needs every node labeled".into())
                        })?;
                    label_placement_study(&g, &labels, *trials, config)?
                }
                StudyMode::Structures => match graph {
                    GraphSource::Sbm { params } => structure_study(params, qs, config)?,
                    GraphSource::Files { .. } => {
                        return Err(PastelError::InvalidParams(
                            "structure study needs an --sbm base graph".into(),
                        ))
                    }
                },
            };
            fs::write(out.join("study.csv"), study_csv(&records))?;
            Ok(vec!["study.csv".into()])
        }
    }
}

fn records_jsonl(records: &[EpochRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn run_job(job: &Job, argv: Vec<String>, out: &Path) -> Result<RunManifest> {
    let inputs = input_digests(job)?;
    let files = execute(job, out)?;
    let outputs = files
        .iter()
        .map(|f| Ok((f.display().to_string(), sha256_file(&resolve_out(out, f))?)))
        .collect::<Result<_>>()?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: job.name().to_string(),
        argv,
        seed: job.seed(),
        job: job.clone(),
        inputs,
        outputs,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn split_source(anchors: &Option<PathBuf>, per_class: usize, seed: u64) -> Result<SplitSource> {
    Ok(match anchors {
        Some(file) => SplitSource::Anchors {
            file: fs::canonicalize(file)?,
        },
        None => SplitSource::Sampled { per_class, seed },
    })
}

/// Resolves parsed flags into a job and its output directory.
pub fn resolve(command: &Command) -> Result<(Option<Job>, PathBuf)> {
    let job = match command {
        Command::SbmGen { sbm, seed, out } => {
            let mut params = SbmParams::new(sbm.n, sbm.c, sbm.p, sbm.q);
            params.feature_dim = sbm.feature_dim.unwrap_or(sbm.c);
            params.feature_noise = sbm.feature_noise;
            params.validate()?;
            return Ok((Some(Job::SbmGen { params, seed: *seed }), out.clone()));
        }
        Command::Diagnose {
            input,
            anchors,
            per_class,
            seed,
            out,
        } => (
            Job::Diagnose {
                graph: GraphSource::from_flags(input)?,
                split: split_source(anchors, *per_class, *seed)?,
                seed: *seed,
            },
            out,
        ),
        Command::Train {
            input,
            config,
            baseline,
            dump_structure,
            dump_gpr,
            out,
        } => {
            let config = config.resolve()?;
            (
                Job::Train {
                    graph: GraphSource::from_flags(input)?,
                    split: SplitSource::Sampled {
                        per_class: config.per_class,
                        seed: config.seed,
                    },
                    baseline: baseline.as_deref().map(parse_baseline).transpose()?,
                    config,
                    dump_structure: dump_structure.clone(),
                    dump_gpr: dump_gpr.clone(),
                },
                out,
            )
        }
        Command::Study {
            mode,
            input,
            config,
            trials,
            qs,
            out,
        } => (
            Job::Study {
                mode: *mode,
                graph: GraphSource::from_flags(input)?,
                config: config.resolve()?,
                trials: *trials,
                qs: qs.clone(),
            },
            out,
        ),
        Command::Rerun { out, .. } => return Ok((None, out.clone())),
    };
    Ok((Some(job.0), job.1.clone()))
}

/// Entry point shared by the binary and the tests.
pub fn run(argv: Vec<String>) -> Result<RunManifest> {
    let cli = Cli::try_parse_from(&argv).map_err(|e| PastelError::InvalidParams(e.to_string()))?;
    run_parsed(&cli, argv)
}

/// Runs already-parsed arguments; `argv` is recorded in the manifest.
pub fn run_parsed(cli: &Cli, argv: Vec<String>) -> Result<RunManifest> {
    match &cli.command {
        Command::Rerun { manifest, out } => rerun(manifest, out),
        command => {
            let (job, out) = resolve(command)?;
            run_job(&job.expect("non-rerun commands resolve to a job"), argv, &out)
        }
    }
}

/// Repeats the job stored in `manifest`, refusing if an input changed.
pub fn rerun(manifest: &Path, out: &Path) -> Result<RunManifest> {
    let recorded: RunManifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
    let now = input_digests(&recorded.job)?;
    if now != recorded.inputs {
        return Err(PastelError::InvalidParams(
            "input files changed since the manifest was written".into(),
        ));
    }
    run_job(&recorded.job, recorded.argv.clone(), out)
}

/// Sizes the global worker pool from `PASTEL_THREADS`.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PASTEL_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| PastelError::InvalidParams(format!("PASTEL_THREADS=`{v}` is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PastelError::InvalidParams(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_overrides_defaults() {
        let cfg = parse_config_file("# comment\nepochs = 7\nbeta2 = -0.5\ntrack_imbalance = true\n", "c").unwrap();
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.beta2, -0.5);
        assert!(cfg.track_imbalance);
        assert_eq!(cfg.heads, TrainConfig::default().heads);
    }

    #[test]
    fn config_file_errors_carry_line() {
        let err = parse_config_file("epochs = 3\nbogus = 1\n", "f.cfg").unwrap_err();
        assert!(matches!(err, PastelError::Parse { line: 2, .. }), "{err}");
        assert!(parse_config_file("epochs = -1", "f").is_err());
        assert!(parse_config_file("epochs", "f").is_err());
    }

    #[test]
    fn sbm_spec() {
        let p = parse_sbm_spec("n=600,c=4,p=0.1,q=0.005,noise=2").unwrap();
        assert_eq!((p.n, p.c, p.feature_dim), (600, 4, 4));
        assert_eq!(p.feature_noise, 2.0);
        assert!(parse_sbm_spec("n=600,c=4,p=0.1").is_err());
        assert!(parse_sbm_spec("n=6,c=2,p=0.1,q=0.5").is_err());
        assert!(parse_sbm_spec("n=6,c=2,p=0.1,q=0,zeta=1").is_err());
    }

    #[test]
    fn baseline_spec() {
        assert_eq!(parse_baseline("plain_gcn").unwrap(), BaselineKind::PlainGcn);
        assert_eq!(parse_baseline("drop_edge:0.2").unwrap(), BaselineKind::DropEdge(0.2));
        assert!(parse_baseline("add_edge").is_err());
        assert!(parse_baseline("gat").is_err());
    }
}
