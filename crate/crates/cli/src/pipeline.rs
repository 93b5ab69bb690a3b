use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use asc_core::asc::{
    build_asc, extract_hidden, train_asc, AscModel, Embeddings, HiddenLayer, Sentiment, Slot, SubModelConfig,
    SubModelInit, TrainConfig, Vocab,
};
use asc_core::calib::{
    apply_thresholds, grid_search_thresholds, jaccard, pearson, pratt_importance, CalibrationThresholds,
    ImportanceReport,
};
use asc_core::heads::{
    train_multilabel, train_regression, write_multilabel_tsv, write_regression_tsv, MultiLabelHead, Standardizer,
    VotingRegressionHead,
};
use asc_core::lexfeat::{prune_sparse, FeatureMatrix, Featurizer};
use asc_core::tensor::{Checkpoint, OptimizerKind};
use asc_core::textpipe::{clean, CleanedTweet, RawTweet, ReplacementDictionaries};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{stage_seed, ModelSize, RunConfig};
use crate::ingest::{ingest, Dataset, Format, Label};
use crate::task::{Metric, Task, TaskTarget};
use crate::{CliError, Result};

pub const TRAIN: &str = "train";
pub const EVAL: &str = "eval";

/// Exclusive claim on an output directory, released on drop.
pub struct OutDirLock {
    path: PathBuf,
}

impl OutDirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| asc_core::Error::io(dir, e))?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Usage(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(asc_core::Error::io(&path, e).into()),
        }
    }
}

impl Drop for OutDirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub seed: u64,
    pub task: String,
    /// Artifact file name -> producing stage and content hash.
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub stage: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub emotion: Option<String>,
    pub metric: String,
    pub value: f64,
    /// Value truncated to three decimals.
    pub reported: String,
    pub n: usize,
    pub config_digest: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct StandardizerFile {
    config_digest: String,
    seed: u64,
    names: Vec<String>,
    standardizer: Standardizer,
}

#[derive(Serialize, Deserialize)]
struct ThresholdFile {
    config_digest: String,
    seed: u64,
    train_pearson: f64,
    thresholds: CalibrationThresholds,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| asc_core::Error::io(path, e).into()
}

/// A configured run bound to an output directory.
pub struct Run {
    /// Configuration as written; the digest is taken over this form.
    pub cfg: RunConfig,
    /// Same configuration with absolute paths.
    pub resolved: RunConfig,
    pub out_dir: PathBuf,
    pub digest: String,
}

impl Run {
    pub fn new(cfg: RunConfig, base: &Path, out_dir: &Path) -> Result<Self> {
        let resolved = cfg.resolved(base);
        resolved.check_files()?;
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        Ok(Self {
            digest: cfg.digest(),
            cfg,
            resolved,
            out_dir: out_dir.to_path_buf(),
        })
    }

    pub fn from_file(config: &Path, out_dir: &Path) -> Result<Self> {
        let cfg = RunConfig::load(config)?;
        let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(cfg, &base, out_dir)
    }

    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    pub fn task_target(&self) -> &TaskTarget {
        &self.cfg.task
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn manifest_path(&self) -> PathBuf {
        self.path("manifest.json")
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let p = self.manifest_path();
        let fresh = Manifest {
            config_digest: self.digest.clone(),
            seed: self.seed(),
            task: self.task_target().to_string(),
            artifacts: BTreeMap::new(),
        };
        if !p.exists() {
            return Ok(fresh);
        }
        let m: Manifest = serde_json::from_slice(&fs::read(&p).map_err(io_err(&p))?).map_err(asc_core::Error::from)?;
        // artifacts from another configuration are not carried over
        Ok(if m.config_digest == self.digest && m.seed == self.seed() { m } else { fresh })
    }

    fn record(&self, name: &str, stage: &str) -> Result<()> {
        let p = self.path(name);
        let bytes = fs::read(&p).map_err(io_err(&p))?;
        let mut m = self.manifest()?;
        m.artifacts.insert(
            name.to_string(),
            ArtifactEntry {
                stage: stage.to_string(),
                sha256: hex(&Sha256::digest(&bytes)),
            },
        );
        let mp = self.manifest_path();
        fs::write(&mp, serde_json::to_vec_pretty(&m).map_err(asc_core::Error::from)?).map_err(io_err(&mp))
    }

    fn write_json<T: Serialize>(&self, name: &str, stage: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, serde_json::to_vec_pretty(v).map_err(asc_core::Error::from)?).map_err(io_err(&p))?;
        self.record(name, stage)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str, hint: &str) -> Result<T> {
        let p = self.path(name);
        let bytes = fs::read(&p).map_err(|_| CliError::Data(format!("{} is missing; run `{hint}` first", p.display())))?;
        Ok(serde_json::from_slice(&bytes).map_err(asc_core::Error::from)?)
    }

    fn stamp(&self, mut c: Checkpoint) -> Checkpoint {
        c.seed = self.seed();
        c.config_digest = self.digest.clone();
        c
    }

    fn split_path(&self, split: &str) -> &Path {
        match split {
            TRAIN => &self.resolved.paths.train,
            _ => self.resolved.paths.eval.as_deref().unwrap_or(&self.resolved.paths.train),
        }
    }

    pub fn dataset(&self, split: &str) -> Result<Dataset> {
        ingest(self.split_path(split), &Format::Task(self.task_target().clone()))
    }

    fn dictionaries(&self) -> Result<ReplacementDictionaries> {
        Ok(match &self.resolved.paths.dictionaries {
            Some(d) => ReplacementDictionaries::load_dir(d)?,
            None => ReplacementDictionaries::bundled(),
        })
    }

    fn asc_checkpoint_path(&self) -> PathBuf {
        self.resolved.paths.asc_checkpoint.clone().unwrap_or_else(|| self.path("asc.ckpt"))
    }

    pub fn clean(&self) -> Result<()> {
        let dicts = self.dictionaries()?;
        for split in [TRAIN, EVAL] {
            let data = self.dataset(split)?;
            log::info!("{split} split of {}:\n{}", self.task_target(), data.distribution_report());
            let name = format!("{split}.cleaned.jsonl");
            let p = self.path(&name);
            let mut w = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
            for e in &data.examples {
                let c = clean(&RawTweet::new(e.id.clone(), e.text.clone()), &dicts)?;
                serde_json::to_writer(&mut w, &c).map_err(asc_core::Error::from)?;
                writeln!(w).map_err(io_err(&p))?;
            }
            w.flush().map_err(io_err(&p))?;
            self.record(&name, "clean")?;
        }
        Ok(())
    }

    pub fn cleaned(&self, split: &str) -> Result<Vec<CleanedTweet>> {
        let p = self.path(&format!("{split}.cleaned.jsonl"));
        let f = File::open(&p).map_err(|_| CliError::Data(format!("{} is missing; run `clean` first", p.display())))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&p))?;
            if line.is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| asc_core::Error::Parse {
                path: p.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        Ok(out)
    }

    pub fn featurize(&self) -> Result<()> {
        let f = &self.cfg.features;
        let featurizer = Featurizer {
            groups: f.groups(),
            ..Featurizer::default()
        };
        let asc = if f.asc_hidden {
            let p = self.asc_checkpoint_path();
            if !p.exists() {
                return Err(CliError::Data(format!("{} is missing; run `train-asc` first", p.display())));
            }
            Some(AscModel::from_checkpoint(&Checkpoint::load(&p)?)?)
        } else {
            None
        };
        let mut mats = Vec::new();
        for split in [TRAIN, EVAL] {
            let tweets = self.cleaned(split)?;
            let mut m = featurizer.featurize_all(&tweets, f.threads)?;
            if let Some(model) = &asc {
                let h = extract_hidden(model, &tweets, HiddenLayer::CombinerHidden, "ASC")?;
                let hm = FeatureMatrix::from_vectors(tweets.iter().map(|t| t.id.clone()).collect(), &h)?;
                m = if m.n_cols() == 0 { hm } else { m.hstack(&hm)? };
            }
            mats.push(m);
        }
        // sparse columns, then columns constant on the training split
        let train = &mats[0];
        let keep: Vec<String> = prune_sparse(train, f.min_support)
            .into_iter()
            .filter(|n| {
                let j = train.names.iter().position(|x| x == n).expect("pruned names come from the matrix");
                let c = train.column(j);
                c.iter().any(|v| *v != c[0])
            })
            .collect();
        if keep.is_empty() {
            return Err(CliError::Data(format!(
                "no feature survives pruning (min_support {} over {} rows)",
                f.min_support,
                train.n_rows()
            )));
        }
        log::info!("keeping {} of {} features", keep.len(), train.n_cols());
        for (split, m) in [TRAIN, EVAL].into_iter().zip(&mats) {
            let name = format!("{split}.features.csv");
            m.select(&keep)?.save(&self.path(&name))?;
            self.record(&name, "featurize")?;
        }
        Ok(())
    }

    pub fn features(&self, split: &str) -> Result<FeatureMatrix> {
        let p = self.path(&format!("{split}.features.csv"));
        if !p.exists() {
            return Err(CliError::Data(format!("{} is missing; run `featurize` first", p.display())));
        }
        Ok(FeatureMatrix::load(&p)?)
    }

    /// Gold labels in the row order of `m`.
    fn aligned_labels(&self, split: &str, m: &FeatureMatrix) -> Result<Vec<Label>> {
        let data = self.dataset(split)?;
        let by_id: HashMap<&str, &Label> = data.examples.iter().map(|e| (e.id.as_str(), &e.label)).collect();
        let missing: Vec<&str> = m.ids.iter().map(String::as_str).filter(|id| !by_id.contains_key(id)).collect();
        if !missing.is_empty() {
            return Err(CliError::Data(format!("no gold label for ids {}", list_ids(&missing))));
        }
        Ok(m.ids.iter().map(|id| by_id[id.as_str()].clone()).collect())
    }

    /// Regression target in [0, 1]; ordinal classes are spread evenly.
    fn target(&self, l: &Label) -> Result<f64> {
        match (l, self.task_target().task.class_values()) {
            (Label::Score(s), None) => Ok(*s),
            (Label::Ordinal(v), Some(c)) => {
                let (lo, hi) = (c[0] as f64, c[c.len() - 1] as f64);
                Ok((*v as f64 - lo) / (hi - lo))
            }
            _ => Err(CliError::Data(format!("label {l:?} does not fit {}", self.task_target()))),
        }
    }

    fn standardized(&self, split: &str) -> Result<(FeatureMatrix, Vec<Vec<f64>>)> {
        let s: StandardizerFile = self.read_json("standardizer.json", "train-head")?;
        let m = self.features(split)?;
        if m.names != s.names {
            return Err(CliError::Data(format!(
                "{split} features do not match the standardizer; rerun `featurize` and `train-head`"
            )));
        }
        let x = s.standardizer.transform(&m.rows)?;
        Ok((m, x))
    }

    pub fn train_head(&self) -> Result<()> {
        let m = self.features(TRAIN)?;
        let std = Standardizer::fit(&m.rows, &m.names)?;
        self.write_json(
            "standardizer.json",
            "train-head",
            &StandardizerFile {
                config_digest: self.digest.clone(),
                seed: self.seed(),
                names: m.names.clone(),
                standardizer: std.clone(),
            },
        )?;
        let x = std.transform(&m.rows)?;
        let labels = self.aligned_labels(TRAIN, &m)?;
        let seed = stage_seed(self.seed(), "head");
        let hc = self.cfg.head_config(seed)?;
        let h = &self.cfg.head;
        let ckpt = if self.task_target().task == Task::Ec {
            let y = labels
                .iter()
                .map(|l| match l {
                    Label::Flags(f) => Ok(f.iter().map(|&v| v as f64).collect()),
                    other => Err(CliError::Data(format!("label {other:?} is not a flag row"))),
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let mut head = MultiLabelHead::with_sizes(m.n_cols(), h.hidden, h.copies, y[0].len(), seed)?;
            let hist = train_multilabel(&mut head, &x, &y, &hc)?;
            log::info!("multi-label head final loss {:?}", hist.epoch_loss.last());
            head.to_checkpoint()?
        } else {
            let y = labels.iter().map(|l| self.target(l)).collect::<Result<Vec<f64>>>()?;
            let mut head = VotingRegressionHead::with_copies(m.n_cols(), h.copies, seed)?;
            let hist = train_regression(&mut head, &x, &y, &hc)?;
            log::info!("regression head final loss {:?}", hist.epoch_loss.last());
            head.to_checkpoint()?
        };
        self.stamp(ckpt).save(self.path("head.ckpt"))?;
        self.record("head.ckpt", "train-head")
    }

    fn head(&self) -> Result<Checkpoint> {
        let p = self.path("head.ckpt");
        if !p.exists() {
            return Err(CliError::Data(format!("{} is missing; run `train-head` first", p.display())));
        }
        Ok(Checkpoint::load(&p)?)
    }

    fn scores(&self, split: &str) -> Result<(Vec<String>, Vec<f64>)> {
        let (m, x) = self.standardized(split)?;
        let head = VotingRegressionHead::from_checkpoint(&self.head()?)?;
        Ok((m.ids, head.predict(&x)?))
    }

    /// Threshold search on training-split scores; a no-op for tasks without
    /// ordinal classes.
    pub fn calibrate(&self) -> Result<()> {
        let Some(classes) = self.task_target().task.class_values() else {
            log::info!("{} has no ordinal classes; nothing to calibrate", self.task_target());
            return Ok(());
        };
        let (ids, scores) = self.scores(TRAIN)?;
        let m = self.features(TRAIN)?;
        debug_assert_eq!(m.ids, ids);
        let gold: Vec<i64> = self
            .aligned_labels(TRAIN, &m)?
            .iter()
            .map(|l| match l {
                Label::Ordinal(v) => Ok(*v),
                other => Err(CliError::Data(format!("label {other:?} is not ordinal"))),
            })
            .collect::<Result<_>>()?;
        let t = grid_search_thresholds(&scores, &gold, &classes, &self.cfg.calibration)?;
        let pred: Vec<f64> = apply_thresholds(&scores, &t).iter().map(|&v| v as f64).collect();
        let g: Vec<f64> = gold.iter().map(|&v| v as f64).collect();
        let r = pearson(&pred, &g)?;
        log::info!("calibrated cuts {:?}, train Pearson {r:.4}", t.cuts);
        self.write_json(
            "thresholds.json",
            "calibrate",
            &ThresholdFile {
                config_digest: self.digest.clone(),
                seed: self.seed(),
                train_pearson: r,
                thresholds: t,
            },
        )
    }

    pub fn predict(&self) -> Result<()> {
        let p = self.path("predictions.tsv");
        let mut buf = Vec::new();
        match self.task_target().task {
            Task::Ec => {
                let (m, x) = self.standardized(EVAL)?;
                let head = MultiLabelHead::from_checkpoint(&self.head()?)?;
                write_multilabel_tsv(&mut buf, &m.ids, &head.predict_flags(&x)?)?;
            }
            t if t.is_ordinal() => {
                let tf: ThresholdFile = self.read_json("thresholds.json", "calibrate")?;
                let (ids, scores) = self.scores(EVAL)?;
                let classes = apply_thresholds(&scores, &tf.thresholds);
                writeln!(buf, "id\tclass").map_err(io_err(&p))?;
                for (id, c) in ids.iter().zip(classes) {
                    writeln!(buf, "{id}\t{c}").map_err(io_err(&p))?;
                }
            }
            _ => {
                let (ids, scores) = self.scores(EVAL)?;
                write_regression_tsv(&mut buf, &ids, &scores)?;
            }
        }
        fs::write(&p, buf).map_err(io_err(&p))?;
        self.record("predictions.tsv", "predict")
    }

    pub fn evaluate(&self) -> Result<MetricReport> {
        let p = self.path("predictions.tsv");
        if !p.exists() {
            return Err(CliError::Data(format!("{} is missing; run `predict` first", p.display())));
        }
        let pred = read_predictions(&p, self.task_target().task)?;
        let gold = self.dataset(EVAL)?;
        let value = evaluate(&pred, &gold, self.task_target().task)?;
        let report = MetricReport {
            task: self.task_target().task.to_string(),
            emotion: self.task_target().emotion.clone(),
            metric: metric_name(self.task_target().task.metric()).into(),
            value,
            reported: asc_core::calib::format_metric(value),
            n: pred.len(),
            config_digest: self.digest.clone(),
            seed: self.seed(),
        };
        self.write_json("metrics.json", "evaluate", &report)?;
        Ok(report)
    }

    /// Pratt importance of the training features for the regression target.
    /// Columns that are linear combinations of earlier ones are dropped with
    /// a warning before the fit.
    pub fn importance(&self) -> Result<ImportanceReport> {
        if self.task_target().task == Task::Ec {
            return Err(CliError::Usage("importance needs a regression or ordinal task".into()));
        }
        let (m, x) = self.standardized(TRAIN)?;
        let y = self.aligned_labels(TRAIN, &m)?.iter().map(|l| self.target(l)).collect::<Result<Vec<f64>>>()?;
        let mut names = m.names.clone();
        let mut cols: Vec<usize> = (0..names.len()).collect();
        let report = loop {
            let xs: Vec<Vec<f64>> = x.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
            match pratt_importance(&xs, &y, &names) {
                Ok(r) => break r,
                Err(asc_core::Error::Numerical(msg)) if msg.contains("dependent columns: ") => {
                    let list = msg.rsplit("dependent columns: ").next().unwrap_or_default();
                    let drop: Vec<String> = list.split(", ").map(String::from).collect();
                    log::warn!("dropping linearly dependent features {drop:?}");
                    let keep: Vec<usize> = (0..names.len()).filter(|&i| !drop.contains(&names[i])).collect();
                    if keep.len() == names.len() {
                        return Err(asc_core::Error::Numerical(msg).into());
                    }
                    cols = keep.iter().map(|&i| cols[i]).collect();
                    names = keep.iter().map(|&i| names[i].clone()).collect();
                }
                Err(e) => return Err(e.into()),
            }
        };
        let outputs: [(&str, fn(&ImportanceReport, &mut Vec<u8>) -> asc_core::Result<()>); 3] = [
            ("importance.tsv", |r, b| r.write_tsv(b)),
            ("importance_groups.tsv", |r, b| r.write_group_table(b)),
            ("importance_bars.tsv", |r, b| r.write_bar_chart(b)),
        ];
        for (name, write) in outputs {
            let mut buf = Vec::new();
            write(&report, &mut buf)?;
            let p = self.path(name);
            fs::write(&p, buf).map_err(io_err(&p))?;
            self.record(name, "importance")?;
        }
        Ok(report)
    }

    /// Trains the four-sub-model classifier on the configured three-class
    /// corpus and saves `asc.ckpt`.
    pub fn train_asc(&self) -> Result<()> {
        let Some(a) = &self.resolved.asc else {
            return Err(CliError::Usage("train-asc needs an [asc] section".into()));
        };
        let data = ingest(&a.corpus, &Format::ThreeClass { compress5: a.compress5 })?;
        log::info!("classifier corpus:\n{}", data.distribution_report());
        let dicts = self.dictionaries()?;
        let mut labeled = Vec::with_capacity(data.len());
        for e in &data.examples {
            let Label::Polarity(p) = e.label else { unreachable!("three-class format") };
            let s = Sentiment::from_polarity(p).expect("polarity in -1..1");
            labeled.push((clean(&RawTweet::new(e.id.clone(), e.text.clone()), &dicts)?, s));
        }
        let seed = stage_seed(self.seed(), "asc");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inits = Vec::new();
        for slot in Slot::ALL {
            let vocab = Vocab::build(labeled.iter().map(|(t, _)| t.tokens(slot.variant())), 1);
            let mut config = match a.size {
                ModelSize::Toy => SubModelConfig::toy(slot),
                ModelSize::Canonical => SubModelConfig::canonical(slot),
            };
            let table = match a.embeddings.get(slot.name()) {
                Some(p) => {
                    let e = Embeddings::load(p)?;
                    config.word_embed_dim = e.dim;
                    Some(e.table(&vocab, &mut rng)?)
                }
                None => None,
            };
            inits.push(SubModelInit { config, vocab, table });
        }
        let mut model = build_asc(inits, seed)?;
        let tc = TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            optimizer: a.lr.map_or(OptimizerKind::adagrad(), |lr| OptimizerKind::adagrad().with_lr(lr)),
            seed,
            frozen_embedding_epochs: 0,
        };
        let hist = train_asc(&mut model, &labeled, &tc)?;
        log::info!("classifier final loss {:?}", hist.epoch_loss.last());
        let p = self.path("asc.ckpt");
        self.stamp(model.to_checkpoint()?).save(&p)?;
        self.record("asc.ckpt", "train-asc")
    }
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Pearson => "pearson",
        Metric::Jaccard => "jaccard",
    }
}

fn list_ids(ids: &[&str]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids.iter().take(SHOWN).copied().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(" and {} more", ids.len() - SHOWN));
    }
    s
}

/// Reads a prediction TSV written by `predict` (header line first).
pub fn read_predictions(path: &Path, task: Task) -> Result<Vec<(String, Label)>> {
    let text = asc_core::textpipe::dict::read_text(path)?;
    let origin = path.display().to_string();
    let perr = |line: usize, msg: String| CliError::Core(asc_core::Error::Parse { path: origin.clone(), line, msg });
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if i == 0 && f[0].eq_ignore_ascii_case("id") || line.trim().is_empty() {
            continue;
        }
        let label = match task {
            Task::Ec => Label::Flags(
                f[1..]
                    .iter()
                    .map(|v| v.trim().parse::<u8>().map_err(|_| perr(i + 1, format!("bad flag {v:?}"))))
                    .collect::<Result<_>>()?,
            ),
            t if t.is_ordinal() => Label::Ordinal(
                f.get(1)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| perr(i + 1, "expected an integer class".into()))?,
            ),
            _ => Label::Score(
                f.get(1)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| perr(i + 1, "expected a numeric score".into()))?,
            ),
        };
        out.push((f[0].to_string(), label));
    }
    Ok(out)
}

/// Pearson for regression and ordinal tasks, Jaccard for E-c. Every gold id
/// needs a prediction and vice versa.
pub fn evaluate(pred: &[(String, Label)], gold: &Dataset, task: Task) -> Result<f64> {
    let by_id: HashMap<&str, &Label> = pred.iter().map(|(id, l)| (id.as_str(), l)).collect();
    let gold_ids: std::collections::HashSet<&str> = gold.examples.iter().map(|e| e.id.as_str()).collect();
    let missing: Vec<&str> = gold.examples.iter().map(|e| e.id.as_str()).filter(|id| !by_id.contains_key(id)).collect();
    let extra: Vec<&str> = pred.iter().map(|(id, _)| id.as_str()).filter(|id| !gold_ids.contains(id)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::from("prediction and gold ids differ");
        if !missing.is_empty() {
            msg.push_str(&format!("; missing predictions for {}", list_ids(&missing)));
        }
        if !extra.is_empty() {
            msg.push_str(&format!("; predictions without gold for {}", list_ids(&extra)));
        }
        return Err(CliError::Data(msg));
    }
    let pairs = gold.examples.iter().map(|e| (&e.label, by_id[e.id.as_str()]));
    let mismatch = || CliError::Data(format!("prediction labels do not fit {task}"));
    match task.metric() {
        Metric::Jaccard => {
            let (mut g, mut p) = (Vec::new(), Vec::new());
            for (a, b) in pairs {
                let (Label::Flags(a), Label::Flags(b)) = (a, b) else { return Err(mismatch()) };
                g.push(a.clone());
                p.push(b.clone());
            }
            Ok(jaccard(&g, &p)?)
        }
        Metric::Pearson => {
            let (mut g, mut p) = (Vec::new(), Vec::new());
            for (a, b) in pairs {
                match (a, b) {
                    (Label::Score(a), Label::Score(b)) => {
                        g.push(*a);
                        p.push(*b);
                    }
                    (Label::Ordinal(a), Label::Ordinal(b)) => {
                        g.push(*a as f64);
                        p.push(*b as f64);
                    }
                    _ => return Err(mismatch()),
                }
            }
            Ok(pearson(&p, &g)?)
        }
    }
}

/// Full run: classifier training when configured, then clean, featurize,
/// train the head, calibrate, predict and evaluate.
pub fn run_pipeline(run: &Run) -> Result<MetricReport> {
    let _lock = OutDirLock::acquire(&run.out_dir)?;
    if run.cfg.features.asc_hidden && run.cfg.paths.asc_checkpoint.is_none() {
        run.train_asc().map_err(|e| e.in_stage("train-asc"))?;
    }
    run.clean().map_err(|e| e.in_stage("clean"))?;
    run.featurize().map_err(|e| e.in_stage("featurize"))?;
    run.train_head().map_err(|e| e.in_stage("train-head"))?;
    run.calibrate().map_err(|e| e.in_stage("calibrate"))?;
    run.predict().map_err(|e| e.in_stage("predict"))?;
    run.evaluate().map_err(|e| e.in_stage("evaluate"))
}
