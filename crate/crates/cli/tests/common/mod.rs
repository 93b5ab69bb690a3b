//! Synthetic fixtures in the task file formats.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POS: [&str; 10] = ["good", "great", "awesome", "amazing", "happy", "love", "fun", "nice", "lovely", "wonderful"];
pub const NEG: [&str; 10] = ["bad", "terrible", "awful", "horrible", "worst", "hate", "sad", "angry", "upset", "fail"];
const FILLER: [&str; 12] = [
    "the", "flight", "today", "was", "my", "team", "this", "weekend", "game", "at", "night", "really",
];

/// One tweet with latent valence `v`: its polar words are positive with
/// probability `v`.
pub fn tweet(rng: &mut ChaCha8Rng, v: f64) -> (String, usize, usize) {
    let mut words: Vec<String> = Vec::new();
    let (mut p, mut n) = (0, 0);
    for _ in 0..rng.gen_range(2..5) {
        words.push(FILLER[rng.gen_range(0..FILLER.len())].to_string());
    }
    for _ in 0..rng.gen_range(1..4) {
        if rng.gen::<f64>() < v {
            words.push(POS[rng.gen_range(0..POS.len())].to_string());
            p += 1;
        } else {
            words.push(NEG[rng.gen_range(0..NEG.len())].to_string());
            n += 1;
        }
    }
    if rng.gen::<f64>() < 0.3 {
        words.push("!!!".into());
    }
    if rng.gen::<f64>() < 0.3 {
        words.push(if v > 0.5 { "#blessed" } else { "#fail" }.into());
    }
    let k = words.len();
    words.swap(0, rng.gen_range(0..k));
    (words.join(" "), p, n)
}

/// Task file rows for `task` with `n` examples.
pub fn task_file(task: &str, n: usize, seed: u64, prefix: &str) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::new();
    match task {
        "E-c" => {
            s.push_str("ID\tTweet\tanger\tanticipation\tdisgust\tfear\tjoy\tlove\toptimism\tpessimism\tsadness\tsurprise\ttrust\n");
            for i in 0..n {
                let v: f64 = rng.gen();
                let (t, p, q) = tweet(&mut rng, v);
                let mut f = [0u8; 11];
                f[0] = u8::from(q > 0 && v < 0.4);
                f[4] = u8::from(p > 0);
                f[6] = u8::from(p > 1);
                f[8] = u8::from(q > 0);
                let cells: Vec<String> = f.iter().map(u8::to_string).collect();
                let _ = writeln!(s, "{prefix}{i}\t{t}\t{}", cells.join("\t"));
            }
        }
        _ => {
            let (dim, oc) = match task {
                "V-reg" => ("valence", None),
                "V-oc" => ("valence", Some((-3i64, 3i64))),
                "EI-reg" => ("anger", None),
                "EI-oc" => ("anger", Some((0, 3))),
                other => panic!("no fixture for {other}"),
            };
            s.push_str("ID\tTweet\tAffect Dimension\tIntensity Score\n");
            for i in 0..n {
                let v: f64 = rng.gen();
                // anger intensity rises as valence falls
                let (t, _, _) = tweet(&mut rng, v);
                let target = if dim == "anger" { 1.0 - v } else { v };
                let label = match oc {
                    None => format!("{:.3}", target),
                    Some((lo, hi)) => {
                        let c = lo + (target * (hi - lo + 1) as f64).floor().min((hi - lo) as f64) as i64;
                        format!("{c}: class")
                    }
                };
                let _ = writeln!(s, "{prefix}{i}\t{t}\t{dim}\t{label}");
            }
        }
    }
    s
}

pub fn corpus_file(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::new();
    for i in 0..n {
        let label: i64 = rng.gen_range(-1..=1);
        let v = match label {
            1 => 0.95,
            0 => 0.5,
            _ => 0.05,
        };
        let (t, _, _) = tweet(&mut rng, v);
        let _ = writeln!(s, "c{i}\t{t}\t{label}");
    }
    s
}

pub struct Fixture {
    pub dir: PathBuf,
    pub config: PathBuf,
}

/// Writes data files and a small-scale config for `task` under `dir`.
pub fn fixture(dir: &Path, task: &str, with_asc: bool) -> Fixture {
    fs::write(dir.join("train.tsv"), task_file(task, 80, 1, "tr")).unwrap();
    fs::write(dir.join("eval.tsv"), task_file(task, 40, 2, "ev")).unwrap();
    let emotion = if task.starts_with("EI") { "emotion = \"anger\"\n" } else { "" };
    let mut cfg = format!(
        "seed = 11\n\n[task]\ntask = \"{task}\"\n{emotion}\n[paths]\ntrain = \"train.tsv\"\neval = \"eval.tsv\"\n\n\
         [features]\nmin_support = 3\nthreads = 2\nasc_hidden = {with_asc}\n\n\
         [head]\nepochs = 40\nbatch_size = 16\nlr = 0.01\ncopies = 12\nhidden = 16\n"
    );
    if with_asc {
        fs::write(dir.join("corpus.tsv"), corpus_file(60, 3)).unwrap();
        cfg.push_str("\n[asc]\ncorpus = \"corpus.tsv\"\nsize = \"toy\"\nepochs = 2\nbatch_size = 16\n");
    }
    let config = dir.join("run.toml");
    fs::write(&config, cfg).unwrap();
    Fixture {
        dir: dir.to_path_buf(),
        config,
    }
}
