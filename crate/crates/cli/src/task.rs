use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const EMOTIONS: [&str; 4] = ["anger", "fear", "joy", "sadness"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "V-reg")]
    VReg,
    #[serde(rename = "V-oc")]
    VOc,
    #[serde(rename = "EI-reg")]
    EiReg,
    #[serde(rename = "EI-oc")]
    EiOc,
    #[serde(rename = "E-c")]
    Ec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Pearson,
    Jaccard,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::VReg => "V-reg",
            Task::VOc => "V-oc",
            Task::EiReg => "EI-reg",
            Task::EiOc => "EI-oc",
            Task::Ec => "E-c",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Task::Ec => Metric::Jaccard,
            _ => Metric::Pearson,
        }
    }

    pub fn is_ordinal(self) -> bool {
        matches!(self, Task::VOc | Task::EiOc)
    }

    pub fn is_emotion(self) -> bool {
        matches!(self, Task::EiReg | Task::EiOc)
    }

    /// Ordinal label set, ascending.
    pub fn class_values(self) -> Option<Vec<i64>> {
        match self {
            Task::VOc => Some((-3..=3).collect()),
            Task::EiOc => Some((0..=3).collect()),
            _ => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "v-reg" => Ok(Task::VReg),
            "v-oc" => Ok(Task::VOc),
            "ei-reg" => Ok(Task::EiReg),
            "ei-oc" => Ok(Task::EiOc),
            "e-c" => Ok(Task::Ec),
            _ => Err(CliError::Usage(format!("unknown task {s:?}; expected V-reg, V-oc, EI-reg, EI-oc or E-c"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskTarget {
    pub task: Task,
    pub emotion: Option<String>,
}

impl TaskTarget {
    pub fn new(task: Task, emotion: Option<String>) -> Result<Self, CliError> {
        let s = Self { task, emotion };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.emotion, self.task.is_emotion()) {
            (None, true) => Err(CliError::Usage(format!("{} needs an emotion", self.task))),
            (Some(e), true) if !EMOTIONS.contains(&e.as_str()) => {
                Err(CliError::Usage(format!("unknown emotion {e:?}; expected one of {EMOTIONS:?}")))
            }
            (Some(_), false) => Err(CliError::Usage(format!("{} takes no emotion", self.task))),
            _ => Ok(()),
        }
    }

    pub fn class_count(&self) -> Option<usize> {
        self.task.class_values().map(|v| v.len())
    }

    /// Value expected in the dimension column of the data file.
    pub fn dimension(&self) -> Option<&str> {
        match self.task {
            Task::VReg | Task::VOc => Some("valence"),
            Task::EiReg | Task::EiOc => self.emotion.as_deref(),
            Task::Ec => None,
        }
    }
}

impl fmt::Display for TaskTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.emotion {
            Some(e) => write!(f, "{} ({e})", self.task),
            None => write!(f, "{}", self.task),
        }
    }
}
