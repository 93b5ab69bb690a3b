use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use asc_core::asc::Slot;
use asc_core::calib::GridSearch;
use asc_core::heads::{HeadConfig, MULTILABEL_HIDDEN, VOTING_COPIES};
use asc_core::lexfeat::{FeatureGroups, MIN_SUPPORT};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::task::{Task, TaskTarget};
use crate::{CliError, Result};

/// A run described by a TOML file. Relative paths are resolved against the
/// directory holding the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub task: TaskTarget,
    pub paths: Paths,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub head: HeadSection,
    #[serde(default)]
    pub calibration: GridSearch,
    pub asc: Option<AscSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub train: PathBuf,
    /// Evaluation split; the training split is scored when absent.
    pub eval: Option<PathBuf>,
    /// Directory with replacement dictionaries; bundled ones when absent.
    pub dictionaries: Option<PathBuf>,
    /// Pre-trained classifier whose hidden layer is appended to the features.
    pub asc_checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub syntactic: bool,
    pub category: bool,
    pub affect: bool,
    pub polarity: bool,
    /// Append the classifier's combiner hidden layer.
    pub asc_hidden: bool,
    pub min_support: usize,
    pub threads: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            syntactic: true,
            category: true,
            affect: true,
            polarity: true,
            asc_hidden: false,
            min_support: MIN_SUPPORT,
            threads: 4,
        }
    }
}

impl FeatureSection {
    pub fn groups(&self) -> FeatureGroups {
        FeatureGroups {
            syntactic: self.syntactic,
            category: self.category,
            affect: self.affect,
            polarity: self.polarity,
        }
    }
}

/// Overrides of the per-task head defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub copies: usize,
    pub hidden: usize,
}

impl Default for HeadSection {
    fn default() -> Self {
        Self {
            epochs: None,
            batch_size: None,
            lr: None,
            copies: VOTING_COPIES,
            hidden: MULTILABEL_HIDDEN,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSize {
    Toy,
    Canonical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AscSection {
    /// Three-class corpus for `train-asc`.
    pub corpus: PathBuf,
    #[serde(default)]
    pub compress5: bool,
    #[serde(default = "default_size")]
    pub size: ModelSize,
    #[serde(default = "default_asc_epochs")]
    pub epochs: usize,
    #[serde(default = "default_asc_batch")]
    pub batch_size: usize,
    pub lr: Option<f64>,
    /// Word-vector files keyed by slot name (`w2v_200`, ...).
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
}

fn default_size() -> ModelSize {
    ModelSize::Toy
}

fn default_asc_epochs() -> usize {
    10
}

fn default_asc_batch() -> usize {
    32
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
        cfg.task.validate()?;
        if let Some(a) = &cfg.asc {
            for k in a.embeddings.keys() {
                k.parse::<Slot>().map_err(|_| CliError::Usage(format!("{origin}: unknown embedding slot {k:?}")))?;
            }
        }
        Ok(cfg)
    }

    /// Reads and parses; paths stay as written until [`RunConfig::resolved`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Absolute-path copy; relative entries are taken from `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        let fix = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        let mut c = self.clone();
        c.paths.train = fix(&c.paths.train);
        c.paths.eval = c.paths.eval.as_ref().map(fix);
        c.paths.dictionaries = c.paths.dictionaries.as_ref().map(fix);
        c.paths.asc_checkpoint = c.paths.asc_checkpoint.as_ref().map(fix);
        if let Some(a) = &mut c.asc {
            a.corpus = fix(&a.corpus);
            for p in a.embeddings.values_mut() {
                *p = fix(p);
            }
        }
        c
    }

    pub fn check_files(&self) -> Result<()> {
        let mut files = vec![&self.paths.train];
        files.extend(self.paths.eval.iter());
        files.extend(self.paths.dictionaries.iter());
        files.extend(self.paths.asc_checkpoint.iter());
        if let Some(a) = &self.asc {
            files.push(&a.corpus);
            files.extend(a.embeddings.values());
        }
        match files.into_iter().find(|p| !p.exists()) {
            Some(p) => Err(CliError::Usage(format!("referenced file {} does not exist", p.display()))),
            None => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded. Paths enter as
    /// written, so the digest does not depend on where the run lives.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Head settings for the task, with overrides applied.
    pub fn head_config(&self, seed: u64) -> Result<HeadConfig> {
        let mut h = match (self.task.task, &self.task.emotion) {
            (Task::Ec, _) => HeadConfig::multilabel(),
            (Task::EiReg | Task::EiOc, Some(e)) => HeadConfig::regression_for(e)?,
            _ => HeadConfig::regression(),
        };
        if let Some(e) = self.head.epochs {
            h.epochs = e;
        }
        if let Some(b) = self.head.batch_size {
            h.batch_size = b;
        }
        if let Some(lr) = self.head.lr {
            h.optimizer = h.optimizer.with_lr(lr);
        }
        h.seed = seed;
        Ok(h)
    }
}

/// Seed of one pipeline stage, derived from the run seed and stage name.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let h = Sha256::digest(format!("{seed}:{stage}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = "seed = 3\n[task]\ntask = \"V-oc\"\n[paths]\ntrain = \"t.tsv\"\n";

    #[test]
    fn parses_minimal_and_rejects_unknown() {
        let c = RunConfig::parse(MIN, "c").unwrap();
        assert_eq!(c.task.task, Task::VOc);
        assert_eq!(c.features.min_support, 8);
        assert_eq!(c.calibration.max_candidates, 200);
        let bad = format!("{MIN}[head]\nepoch = 3\n");
        assert!(RunConfig::parse(&bad, "c").is_err());
        assert!(RunConfig::parse("seed = 1\nfoo = 2\n", "c").is_err());
        let ei = "[task]\ntask = \"EI-reg\"\n[paths]\ntrain = \"t\"\n";
        assert!(RunConfig::parse(ei, "c").is_err());
    }

    #[test]
    fn digest_and_seeds() {
        let a = RunConfig::parse(MIN, "c").unwrap();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 4;
        assert_ne!(a.digest(), b.digest());
        assert_ne!(stage_seed(1, "head"), stage_seed(1, "asc"));
        assert_eq!(stage_seed(1, "head"), stage_seed(1, "head"));
    }

    #[test]
    fn head_defaults_follow_task() {
        let ei = "[task]\ntask = \"EI-oc\"\nemotion = \"fear\"\n[paths]\ntrain = \"t\"\n[head]\nbatch_size = 7\n";
        let c = RunConfig::parse(ei, "c").unwrap();
        let h = c.head_config(0).unwrap();
        assert_eq!((h.epochs, h.batch_size, h.optimizer.lr()), (700, 7, 1e-5));
    }
}
