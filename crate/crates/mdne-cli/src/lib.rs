//! Experiment runner: reads a sectioned key=value config, drives training,
//! evaluation, single-node embedding, and hyperparameter sweeps, and writes
//! reproducible artifact files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use mdne_core::checkpoint::{load_checkpoint, save_checkpoint};
use mdne_core::eval;
use mdne_core::graph::{
    load_canonical, load_cora_format, load_generic, split_attributes, split_links,
    AttributedNetwork, SparseVec,
};
use mdne_core::model::{embed_all, embed_new_node, LayerSpec, LossWeights, PenaltyConfig};
use mdne_core::pretrain::RbmConfig;
use mdne_core::tensor::Matrix;
use mdne_core::trainer::{fit, grid_search, BatchPolicy, Optimizer, SweepObjective, TrainConfig};

/// Exit code for configuration / validation problems.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for runtime / training failures.
pub const EXIT_RUNTIME: i32 = 3;

pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<mdne_core::Error>() {
        Some(
            mdne_core::Error::InvalidConfig(_)
            | mdne_core::Error::InvalidInput(_)
            | mdne_core::Error::Parse { .. }
            | mdne_core::Error::EmptyInput(_),
        ) => EXIT_VALIDATION,
        Some(_) => EXIT_RUNTIME,
        None => {
            if err.downcast_ref::<ConfigError>().is_some() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Where the dataset comes from.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    Cora { content: PathBuf, cites: PathBuf },
    Generic {
        edges: PathBuf,
        attributes: PathBuf,
        labels: Option<PathBuf>,
        binarize: bool,
    },
    Canonical { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoldoutTask {
    Links,
    Attributes,
}

/// Fully parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub dataset_name: String,
    pub train: TrainConfig,
    pub holdout: Option<(HoldoutTask, f64)>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load_network(&self) -> Result<AttributedNetwork> {
        let (net, stats) = match &self.dataset {
            DatasetSource::Cora { content, cites } => load_cora_format(content, cites)?,
            DatasetSource::Generic {
                edges,
                attributes,
                labels,
                binarize,
            } => load_generic(edges, attributes, labels.as_deref(), *binarize)?,
            DatasetSource::Canonical { path } => (load_canonical(path)?, Default::default()),
        };
        if stats.any() {
            eprintln!(
                "load warnings: {} edges with unknown ids dropped, {} self-loops dropped, {} duplicate edges collapsed",
                stats.unknown_id_edges_dropped, stats.self_loops_dropped, stats.duplicate_edges_collapsed
            );
        }
        Ok(net)
    }
}

fn parse_sections(text: &str, path: &Path) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                bail!(ConfigError(format!(
                    "{}:{}: duplicate section [{name}]",
                    path.display(),
                    lineno + 1
                )));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(ConfigError(format!(
                "{}:{}: expected `key = value`, got {line:?}",
                path.display(),
                lineno + 1
            )));
        };
        let Some(section) = &current else {
            bail!(ConfigError(format!(
                "{}:{}: key outside of any [section]",
                path.display(),
                lineno + 1
            )));
        };
        let map = sections.get_mut(section).unwrap();
        if map
            .insert(key.trim().to_string(), value.trim().to_string())
            .is_some()
        {
            bail!(ConfigError(format!(
                "{}:{}: duplicate key {:?} in [{section}]",
                path.display(),
                lineno + 1,
                key.trim()
            )));
        }
    }
    Ok(sections)
}

struct SectionReader {
    name: String,
    map: BTreeMap<String, String>,
    taken: std::collections::HashSet<String>,
}

impl SectionReader {
    fn new(name: &str, map: BTreeMap<String, String>) -> Self {
        SectionReader {
            name: name.to_string(),
            map,
            taken: Default::default(),
        }
    }

    fn get(&mut self, key: &str) -> Option<String> {
        self.taken.insert(key.to_string());
        self.map.get(key).cloned()
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.get(key)
            .ok_or_else(|| anyhow!(ConfigError(format!("[{}] is missing key {key:?}", self.name))))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(|_| {
                anyhow!(ConfigError(format!(
                    "[{}] {key} = {v:?} is not a valid value",
                    self.name
                )))
            }),
        }
    }

    fn parse_switch(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).as_deref() {
            None => Ok(default),
            Some("on") | Some("true") | Some("1") => Ok(true),
            Some("off") | Some("false") | Some("0") => Ok(false),
            Some(v) => bail!(ConfigError(format!(
                "[{}] {key} = {v:?} (expected on/off)",
                self.name
            ))),
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.taken.contains(key) {
                bail!(ConfigError(format!("[{}] has unknown key {key:?}", self.name)));
            }
        }
        Ok(())
    }
}

/// Parse the experiment config file. Unknown sections and keys are errors.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut sections = parse_sections(&text, path)?;
    let known = ["dataset", "model", "train", "holdout", "output"];
    for name in sections.keys() {
        if !known.contains(&name.as_str()) {
            bail!(ConfigError(format!("unknown section [{name}]")));
        }
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: String| -> PathBuf {
        let pb = PathBuf::from(&p);
        if pb.is_absolute() {
            pb
        } else {
            base.join(pb)
        }
    };

    // [dataset]
    let mut ds = SectionReader::new(
        "dataset",
        sections
            .remove("dataset")
            .ok_or_else(|| anyhow!(ConfigError("missing [dataset] section".into())))?,
    );
    let format = ds.require("format")?;
    let (dataset, dataset_name) = match format.as_str() {
        "cora" => {
            let content = resolve(ds.require("content")?);
            let cites = resolve(ds.require("cites")?);
            let name = content
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            (DatasetSource::Cora { content, cites }, name)
        }
        "generic" => {
            let edges = resolve(ds.require("edges")?);
            let attributes = resolve(ds.require("attributes")?);
            let labels = ds.get("labels").map(resolve);
            let binarize = ds.parse_switch("binarize", true)?;
            let name = edges
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            (
                DatasetSource::Generic {
                    edges,
                    attributes,
                    labels,
                    binarize,
                },
                name,
            )
        }
        "canonical" => {
            let p = resolve(ds.require("path")?);
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            (DatasetSource::Canonical { path: p }, name)
        }
        other => bail!(ConfigError(format!(
            "[dataset] format = {other:?} (expected cora, generic, or canonical)"
        ))),
    };
    ds.finish()?;

    // [model]
    let mut md = SectionReader::new(
        "model",
        sections
            .remove("model")
            .ok_or_else(|| anyhow!(ConfigError("missing [model] section".into())))?,
    );
    let pre_struct_dim: usize = md.parse("pre_struct_dim", 300)?;
    let pre_attr_dim: usize = md.parse("pre_attr_dim", 200)?;
    let hidden_raw = md.get("hidden_dims").unwrap_or_else(|| "128".into());
    let hidden_dims: Vec<usize> = hidden_raw
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| anyhow!(ConfigError(format!("[model] hidden_dims = {hidden_raw:?}"))))?;
    let preprocess = md.parse_switch("preprocess", true)?;
    md.finish()?;
    let spec = LayerSpec {
        pre_struct_dim,
        pre_attr_dim,
        hidden_dims,
        preprocess,
    };

    // [train]
    let mut tr = SectionReader::new(
        "train",
        sections.remove("train").unwrap_or_default(),
    );
    let mut train = TrainConfig::defaults(spec);
    train.weights = LossWeights {
        lambda: tr.parse("lambda", train.weights.lambda)?,
        alpha: tr.parse("alpha", train.weights.alpha)?,
        upsilon: tr.parse("upsilon", train.weights.upsilon)?,
    };
    train.penalties = PenaltyConfig {
        gamma1: tr.parse("gamma1", train.penalties.gamma1)?,
        gamma2: tr.parse("gamma2", train.penalties.gamma2)?,
    };
    train.lr = tr.parse("lr", train.lr)?;
    train.max_iters = tr.parse("max_iters", train.max_iters)?;
    train.convergence_tol = tr.parse("convergence_tol", train.convergence_tol)?;
    train.seed = tr.parse("seed", train.seed)?;
    train.pretrain = tr.parse_switch("pretrain", true)?;
    train.rbm = RbmConfig {
        lr: tr.parse("pretrain_lr", train.rbm.lr)?,
        epochs: tr.parse("pretrain_epochs", train.rbm.epochs)?,
        batch: tr.parse("pretrain_batch", train.rbm.batch)?,
        seed: train.seed,
        momentum: tr.parse("pretrain_momentum", train.rbm.momentum)?,
    };
    train.optimizer = match tr.get("optimizer").as_deref() {
        None | Some("rmsprop") => Optimizer::RmsProp {
            decay: tr.parse("rmsprop_decay", 0.99)?,
        },
        Some("sgd") => Optimizer::Sgd,
        Some(v) => bail!(ConfigError(format!(
            "[train] optimizer = {v:?} (expected rmsprop or sgd)"
        ))),
    };
    train.batch = match tr.get("batch").as_deref() {
        None | Some("auto") => BatchPolicy::Auto,
        Some("full") => BatchPolicy::Full,
        Some(v) => BatchPolicy::Size(v.parse::<usize>().map_err(|_| {
            anyhow!(ConfigError(format!(
                "[train] batch = {v:?} (expected auto, full, or a positive integer)"
            )))
        })?),
    };
    tr.finish()?;

    // [holdout]
    let holdout = match sections.remove("holdout") {
        None => None,
        Some(map) => {
            let mut ho = SectionReader::new("holdout", map);
            let task = match ho.require("task")?.as_str() {
                "links" => HoldoutTask::Links,
                "attributes" => HoldoutTask::Attributes,
                other => bail!(ConfigError(format!(
                    "[holdout] task = {other:?} (expected links or attributes)"
                ))),
            };
            let ratio: f64 = ho.parse("ratio", 0.05)?;
            ho.finish()?;
            Some((task, ratio))
        }
    };

    // [output]
    let mut out = SectionReader::new(
        "output",
        sections.remove("output").unwrap_or_default(),
    );
    let out_dir = resolve(out.get("dir").unwrap_or_else(|| "out".into()));
    out.finish()?;

    Ok(ExperimentConfig {
        dataset,
        dataset_name,
        train,
        holdout,
        out_dir,
    })
}

/// Write the embeddings file: a header line then one id + d values per node,
/// with floats printed to 17 significant digits so they round-trip exactly.
pub fn write_embeddings(path: &Path, ids: &[String], emb: &Matrix) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "#mdne v1 n={} d={}", emb.rows(), emb.cols());
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in emb.row(i) {
            let _ = write!(out, "\t{v:.16e}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Read the embeddings file back, validating the header and column counts.
pub fn read_embeddings(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading embeddings {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| anyhow!(ConfigError(format!("{}: empty file", path.display()))))?;
    let caps: Vec<&str> = header.split_whitespace().collect();
    if caps.len() != 4 || caps[0] != "#mdne" || caps[1] != "v1" {
        bail!(ConfigError(format!(
            "{}: expected header `#mdne v1 n=<n> d=<d>`, got {header:?}",
            path.display()
        )));
    }
    let parse_kv = |s: &str, key: &str| -> Result<usize> {
        s.strip_prefix(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| anyhow!(ConfigError(format!("{}: bad header field {s:?}", path.display()))))
    };
    let n = parse_kv(caps[2], "n=")?;
    let d = parse_kv(caps[3], "d=")?;
    let mut ids = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * d);
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if values.len() != d {
            bail!(ConfigError(format!(
                "{}:{}: expected {d} embedding columns, got {}",
                path.display(),
                lineno + 2,
                values.len()
            )));
        }
        ids.push(id.to_string());
        for v in values {
            data.push(v.parse::<f64>().map_err(|_| {
                anyhow!(ConfigError(format!(
                    "{}:{}: bad float {v:?}",
                    path.display(),
                    lineno + 2
                )))
            })?);
        }
    }
    if ids.len() != n {
        bail!(ConfigError(format!(
            "{}: header says n={n} but found {} rows",
            path.display(),
            ids.len()
        )));
    }
    Ok((ids, Matrix::from_vec(n, d, data).map_err(anyhow::Error::from)?))
}

/// Resolve the network the model actually trains on (honoring a holdout).
fn training_network(
    net: &AttributedNetwork,
    holdout: &Option<(HoldoutTask, f64)>,
    seed: u64,
) -> Result<AttributedNetwork> {
    match holdout {
        None => Ok(net.clone()),
        Some((HoldoutTask::Links, ratio)) => Ok(split_links(net, *ratio, seed)?.train),
        Some((HoldoutTask::Attributes, ratio)) => Ok(split_attributes(net, *ratio, seed)?.train),
    }
}

pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub embeddings: PathBuf,
    pub report: PathBuf,
}

/// Train per the config and write checkpoint, embeddings, and the training
/// report under the output directory.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainArtifacts> {
    let net = config.load_network()?;
    let train_net = training_network(&net, &config.holdout, config.train.seed)?;
    if let Some((task, ratio)) = &config.holdout {
        eprintln!(
            "holdout: {} at ratio {ratio}; training on the residual network ({} edges)",
            match task {
                HoldoutTask::Links => "links",
                HoldoutTask::Attributes => "attribute cells",
            },
            train_net.edge_count()
        );
    }
    let outcome = fit(&train_net, &config.train)?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let checkpoint = config.out_dir.join("model.ckpt");
    save_checkpoint(&outcome.params, &checkpoint)?;
    let embeddings = config.out_dir.join("embeddings.tsv");
    write_embeddings(&embeddings, train_net.node_ids(), &outcome.embedding)?;
    let report = config.out_dir.join("train_report.csv");
    std::fs::write(&report, outcome.report.to_csv())
        .with_context(|| format!("writing {}", report.display()))?;
    eprintln!(
        "trained {} iterations in {:.1}s (stop: {:?}, lr used: {}); wrote {}",
        outcome.report.records.len(),
        outcome.report.wall_time_ms / 1e3,
        outcome.report.stop_reason,
        outcome.report.lr_used,
        config.out_dir.display()
    );
    Ok(TrainArtifacts {
        checkpoint,
        embeddings,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    Reconstruct,
    LinkPred,
    AttrPred,
    Classify,
}

impl std::str::FromStr for EvalTask {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reconstruct" => Ok(EvalTask::Reconstruct),
            "linkpred" => Ok(EvalTask::LinkPred),
            "attrpred" => Ok(EvalTask::AttrPred),
            "classify" => Ok(EvalTask::Classify),
            other => bail!(ConfigError(format!(
                "unknown task {other:?} (expected reconstruct, linkpred, attrpred, or classify)"
            ))),
        }
    }
}

pub struct EvalArgs {
    pub artifact: PathBuf,
    pub task: EvalTask,
    pub ks: Vec<usize>,
    pub ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

/// One metric row of the output CSV.
pub struct MetricRow {
    pub task: &'static str,
    pub dataset: String,
    pub param: String,
    pub metric: &'static str,
    pub value: f64,
    pub seed: u64,
}

pub fn metrics_to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("task,dataset,param,metric,value,seed\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.17e},{}",
            r.task, r.dataset, r.param, r.metric, r.value, r.seed
        );
    }
    out
}

/// Load embeddings from either a checkpoint (re-embedding the train
/// network) or an embeddings file.
fn load_artifact_embeddings(
    artifact: &Path,
    train_net: &AttributedNetwork,
) -> Result<Matrix> {
    let is_checkpoint = std::fs::File::open(artifact)
        .ok()
        .and_then(|mut f| {
            use std::io::Read;
            let mut magic = [0u8; 8];
            f.read_exact(&mut magic).ok().map(|_| &magic == b"MDNECKPT")
        })
        .unwrap_or(false);
    if is_checkpoint {
        let params = load_checkpoint(artifact)?;
        if params.n != train_net.node_count() || params.m != train_net.attr_count() {
            bail!(ConfigError(format!(
                "checkpoint was trained for n={}, m={} but the dataset has n={}, m={}",
                params.n,
                params.m,
                train_net.node_count(),
                train_net.attr_count()
            )));
        }
        Ok(embed_all(&params, train_net)?)
    } else {
        let (ids, emb) = read_embeddings(artifact)?;
        if ids != train_net.node_ids() {
            bail!(ConfigError(
                "embeddings file node ids do not match the dataset".to_string()
            ));
        }
        Ok(emb)
    }
}

/// Evaluate an artifact on one task and write the metric CSV.
pub fn cmd_eval(config: &ExperimentConfig, args: &EvalArgs) -> Result<PathBuf> {
    let net = config.load_network()?;
    let mut rows = Vec::new();
    match args.task {
        EvalTask::Reconstruct => {
            let emb = load_artifact_embeddings(&args.artifact, &net)?;
            let res = eval::network_reconstruction(&emb, &net, &args.ks)?;
            for (k, p) in &res.precisions {
                println!("reconstruct  precision@{k} = {p:.4}");
                rows.push(MetricRow {
                    task: "reconstruct",
                    dataset: config.dataset_name.clone(),
                    param: format!("k={k}"),
                    metric: "precision",
                    value: *p,
                    seed: args.seed,
                });
            }
        }
        EvalTask::LinkPred => {
            let split = split_links(&net, args.ratio, args.seed)?;
            let emb = load_artifact_embeddings(&args.artifact, &split.train)?;
            let auc = eval::link_prediction_auc(&emb, &split)?;
            println!("linkpred     ratio={} AUC = {auc:.4}", args.ratio);
            rows.push(MetricRow {
                task: "linkpred",
                dataset: config.dataset_name.clone(),
                param: format!("ratio={}", args.ratio),
                metric: "auc",
                value: auc,
                seed: args.seed,
            });
        }
        EvalTask::AttrPred => {
            let split = split_attributes(&net, args.ratio, args.seed)?;
            let emb = load_artifact_embeddings(&args.artifact, &split.train)?;
            let res = eval::attribute_prediction_auc(&emb, &split)?;
            if res.shrunk_neighborhoods > 0 {
                eprintln!(
                    "warning: {} predictions used fewer than 10 neighbors (small network)",
                    res.shrunk_neighborhoods
                );
            }
            println!("attrpred     ratio={} AUC = {:.4}", args.ratio, res.auc);
            rows.push(MetricRow {
                task: "attrpred",
                dataset: config.dataset_name.clone(),
                param: format!("ratio={}", args.ratio),
                metric: "auc",
                value: res.auc,
                seed: args.seed,
            });
        }
        EvalTask::Classify => {
            let emb = load_artifact_embeddings(&args.artifact, &net)?;
            let labels = net
                .labels()
                .ok_or_else(|| anyhow!(ConfigError("classify needs a labeled dataset".into())))?;
            let res = eval::classify(&emb, labels, args.test_ratio, args.seed, 10)?;
            if res.degenerate {
                eprintln!("warning: single-class data; scores are trivially perfect");
            }
            println!(
                "classify     test_ratio={} micro-F1 = {:.4} macro-F1 = {:.4}",
                args.test_ratio, res.micro_f1, res.macro_f1
            );
            rows.push(MetricRow {
                task: "classify",
                dataset: config.dataset_name.clone(),
                param: format!("test_ratio={}", args.test_ratio),
                metric: "micro_f1",
                value: res.micro_f1,
                seed: args.seed,
            });
            rows.push(MetricRow {
                task: "classify",
                dataset: config.dataset_name.clone(),
                param: format!("test_ratio={}", args.test_ratio),
                metric: "macro_f1",
                value: res.macro_f1,
                seed: args.seed,
            });
        }
    }
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let path = config.out_dir.join("metrics.csv");
    std::fs::write(&path, metrics_to_csv(&rows))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Read a node vector file: sparse `index:value` tokens, or dense
/// whitespace-separated floats.
pub fn read_vector_file(path: &Path, width: usize) -> Result<SparseVec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading vector {}", path.display()))?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let sparse = tokens.iter().any(|t| t.contains(':'));
    let pairs: Vec<(u32, f64)> = if sparse {
        tokens
            .iter()
            .map(|t| -> Result<(u32, f64)> {
                let (k, v) = t
                    .split_once(':')
                    .ok_or_else(|| anyhow!(ConfigError(format!("bad sparse token {t:?}"))))?;
                Ok((k.parse()?, v.parse()?))
            })
            .collect::<Result<_>>()?
    } else {
        if tokens.len() != width {
            bail!(ConfigError(format!(
                "{}: expected {width} dense values, got {}",
                path.display(),
                tokens.len()
            )));
        }
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Ok((i as u32, t.parse::<f64>()?)))
            .collect::<Result<_>>()?
    };
    SparseVec::from_pairs(pairs).map_err(anyhow::Error::from)
}

/// Embed a (possibly new) node from its modality vectors and print the
/// embedding row, tab-separated, to stdout.
pub fn cmd_embed_node(
    checkpoint: &Path,
    structure: Option<&Path>,
    attributes: Option<&Path>,
) -> Result<String> {
    let params = load_checkpoint(checkpoint)?;
    let s = structure.map(|p| read_vector_file(p, params.n)).transpose()?;
    let a = attributes.map(|p| read_vector_file(p, params.m)).transpose()?;
    let emb = embed_new_node(&params, s.as_ref(), a.as_ref())?;
    let line = emb
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join("\t");
    Ok(line)
}

/// Parse the sweep grid file: one `name = v1,v2,...` line per parameter.
pub fn parse_grid(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading grid {}", path.display()))?;
    let mut grid = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, values) = line.split_once('=').ok_or_else(|| {
            anyhow!(ConfigError(format!(
                "{}:{}: expected `name = v1,v2,...`",
                path.display(),
                lineno + 1
            )))
        })?;
        let values: Vec<f64> = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                anyhow!(ConfigError(format!(
                    "{}:{}: bad value list",
                    path.display(),
                    lineno + 1
                )))
            })?;
        grid.push((name.trim().to_string(), values));
    }
    Ok(grid)
}

/// Run the sweep and write the ranked results CSV.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    grid: &[(String, Vec<f64>)],
    objective: &SweepObjective,
) -> Result<PathBuf> {
    let net = config.load_network()?;
    let cells = grid_search(&net, &config.train, grid, objective)?;
    let mut out = String::from("rank,assignment,score,error\n");
    for (rank, cell) in cells.iter().enumerate() {
        let assignment = cell
            .assignment
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{},{assignment},{},{}",
            rank + 1,
            cell.score.map(|s| format!("{s:.6}")).unwrap_or_default(),
            cell.error.clone().unwrap_or_default()
        );
    }
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let path = config.out_dir.join("sweep_results.csv");
    std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    for (rank, cell) in cells.iter().take(5).enumerate() {
        println!(
            "#{} {:?} score {:?}",
            rank + 1,
            cell.assignment,
            cell.score
        );
    }
    Ok(path)
}
