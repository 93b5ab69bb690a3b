use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use asc_core::heads::EC_LABELS;

use crate::task::{Task, TaskTarget, EMOTIONS};
use crate::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Score(f64),
    Ordinal(i64),
    Flags(Vec<u8>),
    /// Three-way polarity in {-1, 0, 1}.
    Polarity(i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    /// Value of the dimension column, when the format has one.
    pub dimension: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Format {
    /// `id<TAB>tweet<TAB>dimension<TAB>label`, or for E-c
    /// `id<TAB>tweet<TAB>` followed by 11 binary flags. A task target without
    /// an emotion accepts any single emotion for EI tasks.
    Task(TaskTarget),
    /// `id<TAB>tweet<TAB>{-1,0,1}`; with `compress5` the labels -2..2 are
    /// folded to three classes.
    ThreeClass { compress5: bool },
}

fn data_err(origin: &str, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Core(asc_core::Error::Parse {
        path: origin.to_string(),
        line,
        msg: msg.to_string(),
    })
}

fn parse_ordinal(s: &str) -> Option<i64> {
    // official files write e.g. "2: moderate amount of joy can be inferred"
    s.split(':').next()?.trim().parse().ok()
}

pub fn ingest(path: &Path, format: &Format) -> Result<Dataset> {
    let text = asc_core::textpipe::dict::read_text(path)?;
    parse_dataset(&text, &path.display().to_string(), format)
}

pub fn parse_dataset(text: &str, origin: &str, format: &Format) -> Result<Dataset> {
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    let mut dimension: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if examples.is_empty() && fields[0].trim().eq_ignore_ascii_case("id") {
            continue;
        }
        let (id, tweet) = (fields[0].trim(), fields.get(1).copied().unwrap_or(""));
        if id.is_empty() {
            return Err(data_err(origin, line_no, "empty id"));
        }
        let label = match format {
            Format::ThreeClass { compress5 } => {
                if fields.len() != 3 {
                    return Err(data_err(origin, line_no, format!("expected 3 fields, found {}", fields.len())));
                }
                let v: i64 = fields[2]
                    .trim()
                    .parse()
                    .map_err(|_| data_err(origin, line_no, format!("label {:?} is not an integer", fields[2])))?;
                let bound = if *compress5 { 2 } else { 1 };
                if v.abs() > bound {
                    return Err(data_err(origin, line_no, format!("label {v} outside -{bound}..{bound}")));
                }
                Label::Polarity(v.signum())
            }
            Format::Task(target) if target.task == Task::Ec => {
                if fields.len() != 2 + EC_LABELS.len() {
                    return Err(data_err(
                        origin,
                        line_no,
                        format!("expected {} fields, found {}", 2 + EC_LABELS.len(), fields.len()),
                    ));
                }
                let flags = fields[2..]
                    .iter()
                    .map(|f| match f.trim() {
                        "0" => Ok(0),
                        "1" => Ok(1),
                        other => Err(data_err(origin, line_no, format!("flag {other:?} is not 0 or 1"))),
                    })
                    .collect::<Result<Vec<u8>>>()?;
                Label::Flags(flags)
            }
            Format::Task(target) => {
                if fields.len() != 4 {
                    return Err(data_err(origin, line_no, format!("expected 4 fields, found {}", fields.len())));
                }
                let dim = fields[2].trim().to_lowercase();
                let expected = target.dimension();
                let ok = match expected {
                    Some(e) => dim == e,
                    None => EMOTIONS.contains(&dim.as_str()),
                };
                if !ok || dimension.as_ref().is_some_and(|d| *d != dim) {
                    return Err(data_err(origin, line_no, format!("unexpected dimension {dim:?} for {target}")));
                }
                dimension.get_or_insert(dim);
                let cell = fields[3].trim();
                match target.task.class_values() {
                    Some(classes) => {
                        let v = parse_ordinal(cell)
                            .ok_or_else(|| data_err(origin, line_no, format!("label {cell:?} is not an ordinal class")))?;
                        if !classes.contains(&v) {
                            return Err(data_err(origin, line_no, format!("class {v} outside {classes:?}")));
                        }
                        Label::Ordinal(v)
                    }
                    None => {
                        let v: f64 = cell
                            .parse()
                            .map_err(|_| data_err(origin, line_no, format!("score {cell:?} is not a number")))?;
                        if !(0.0..=1.0).contains(&v) {
                            return Err(data_err(origin, line_no, format!("score {v} outside [0, 1]")));
                        }
                        Label::Score(v)
                    }
                }
            }
        };
        if !seen.insert(id.to_string()) {
            return Err(data_err(origin, line_no, format!("duplicate id {id:?}")));
        }
        examples.push(Example {
            id: id.to_string(),
            text: tweet.to_string(),
            label,
        });
    }
    if examples.is_empty() {
        return Err(CliError::Data(format!("{origin}: no examples")));
    }
    Ok(Dataset { examples, dimension })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Counts per class name. Regression scores are bucketed by tenths and
    /// multi-label rows counted per active label.
    pub fn distribution(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.examples {
            let mut bump = |k: String| *out.entry(k).or_insert(0) += 1;
            match &e.label {
                Label::Polarity(1) => bump("positive".into()),
                Label::Polarity(0) => bump("neutral".into()),
                Label::Polarity(_) => bump("negative".into()),
                Label::Ordinal(v) => bump(v.to_string()),
                Label::Score(s) => bump(format!("{:.1}", (s * 10.0).floor().min(9.0) / 10.0)),
                Label::Flags(f) => {
                    for (j, _) in f.iter().enumerate().filter(|(_, v)| **v == 1) {
                        bump(EC_LABELS[j].to_string());
                    }
                }
            }
        }
        out
    }

    /// One `name: count (pct%)` line per class.
    pub fn distribution_report(&self) -> String {
        let mut s = String::new();
        let n = self.len() as f64;
        for (k, c) in self.distribution() {
            let _ = writeln!(s, "{k}: {c} ({:.0}%)", 100.0 * c as f64 / n);
        }
        let _ = writeln!(s, "total: {}", self.len());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(t: Task, e: Option<&str>) -> Format {
        Format::Task(TaskTarget::new(t, e.map(String::from)).unwrap())
    }

    #[test]
    fn three_class_and_compression() {
        let d = parse_dataset("1\tgood\t1\n2\tmeh\t0\n3\tbad\t-1\n", "x", &Format::ThreeClass { compress5: false })
            .unwrap();
        assert_eq!(d.distribution()["neutral"], 1);
        let err = parse_dataset("1\tgreat\t2\n", "x", &Format::ThreeClass { compress5: false }).unwrap_err();
        assert!(err.to_string().contains("x:1"), "{err}");
        let d = parse_dataset("1\ta\t2\n2\tb\t-2\n3\tc\t0\n4\td\t-1\n", "x", &Format::ThreeClass { compress5: true })
            .unwrap();
        let labels: Vec<Label> = d.examples.iter().map(|e| e.label.clone()).collect();
        assert_eq!(labels, [Label::Polarity(1), Label::Polarity(-1), Label::Polarity(0), Label::Polarity(-1)]);
    }

    #[test]
    fn task_format_rows() {
        let text = "ID\tTweet\tAffect Dimension\tIntensity Class\n\
                    a1\tso happy\tjoy\t3: high amount of joy can be inferred\n\
                    a2\tok\tjoy\t0: no joy can be inferred\n";
        let d = parse_dataset(text, "x", &target(Task::EiOc, Some("joy"))).unwrap();
        assert_eq!(d.examples[0].label, Label::Ordinal(3));
        assert!(parse_dataset(text, "x", &target(Task::EiOc, Some("fear"))).is_err());
        let bad = "a\tt\tvalence\t1.5\n";
        let err = parse_dataset(bad, "f.tsv", &target(Task::VReg, None)).unwrap_err().to_string();
        assert!(err.contains("f.tsv:1") && err.contains("outside"), "{err}");
        assert!(parse_dataset("a\tt\tvalence\t4\n", "x", &target(Task::VOc, None)).is_err());
        assert!(parse_dataset("a\tt\tvalence\n", "x", &target(Task::VReg, None)).is_err());
    }

    #[test]
    fn ec_rows() {
        let d = parse_dataset("ID\tTweet\t...\n1\tt\t1\t0\t0\t0\t1\t0\t0\t0\t0\t0\t0\n", "x", &target(Task::Ec, None)).unwrap();
        assert_eq!(d.distribution()["joy"], 1);
        assert!(parse_dataset("1\tt\t2\t0\t0\t0\t1\t0\t0\t0\t0\t0\t0\n", "x", &target(Task::Ec, None)).is_err());
    }

    #[test]
    fn empty_and_duplicates() {
        assert!(parse_dataset("", "x", &Format::ThreeClass { compress5: false }).is_err());
        assert!(parse_dataset("1\ta\t1\n1\tb\t0\n", "x", &Format::ThreeClass { compress5: false }).is_err());
    }
}
