//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! with its tolerance and runtime, and exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use asc_cli::pipeline::{run_pipeline, Run};
use asc_core::asc::{
    build_asc, build_submodel, predict_probs, train_asc, AscModel, Classifier, DistantSchedule, Sentiment, Slot,
    SubModelConfig, SubModelInit, TrainConfig, Trainer, Vocab,
};
use asc_core::calib::{
    apply_thresholds, format_metric, grid_search_thresholds, jaccard, macro_average, pearson, pratt_importance,
    GridSearch,
};
use asc_core::heads::{
    score_map_f, train_multilabel, train_regression, HeadConfig, MultiLabelHead, VotingRegressionHead,
};
use asc_core::tensor::{
    grad_check, tanimoto_distance, Activation, BiGru, ConvAttention, Dense, GradCheckOptions, Graph, OptimizerKind,
    ParamStore, Tensor, TANIMOTO_EPS,
};
use asc_core::textpipe::{clean, CleanedTweet, RawTweet, ReplacementDictionaries, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1
fn cleaning_golden() -> Outcome {
    let c = clean(
        &RawTweet::new("t1", "@USAIRWAYS is right :-) ! Flying in September #NiceToFly"),
        &ReplacementDictionaries::bundled(),
    )
    .map_err(e2s)?;
    let simple = c.text(Variant::Simple);
    let complex = c.text(Variant::Complex);
    ensure(
        simple == "twitter-entity is right happy-smily ! flying in september nice to fly",
        format!("simple = {simple:?}"),
    )?;
    ensure(
        complex == "twitter-entity be right happy-smily ! fly in _date_ pleasant to fly",
        format!("complex = {complex:?}"),
    )?;
    Ok("simple and complex byte-exact".into())
}

// 2
fn gradient_suite() -> Outcome {
    let opts = GradCheckOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::from_rows(&[vec![0.3, -0.7, 1.1], vec![-1.2, 0.4, 0.05]]).map_err(e2s)?;
    let onehot = Tensor::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]).map_err(e2s)?;
    let reg = Tensor::from_rows(&[vec![0.2, -0.1, 0.5], vec![0.9, 0.3, -0.4]]).map_err(e2s)?;
    let mut worst: Vec<(String, f64)> = Vec::new();

    let mut check = |name: &str, store: &mut ParamStore, f: &dyn Fn(&mut Graph, &ParamStore) -> asc_core::Result<_>| {
        let r = grad_check(store, f, &opts).map_err(e2s)?;
        worst.push((name.to_string(), r.max_rel_error));
        ensure(r.checked > 0, format!("{name}: nothing checked"))?;
        ensure(r.max_rel_error < 1e-3, format!("{name}: max rel error {:.2e} at {:?}", r.max_rel_error, r.worst))
    };

    for (name, act) in [
        ("dense", Activation::Identity),
        ("tanh", Activation::Tanh),
        ("sigmoid", Activation::Sigmoid),
        ("softmax", Activation::Softmax),
    ] {
        let mut s = ParamStore::new();
        let d = Dense::new(&mut s, name, 3, 3, true, act, &mut rng).map_err(e2s)?;
        let (xx, t) = (x.clone(), reg.clone());
        check(name, &mut s, &|g, st| {
            let xn = g.constant(xx.clone());
            let y = d.forward(g, st, xn)?;
            g.mse(y, &t)
        })?;
    }

    let mut s = ParamStore::new();
    let table = s.add_glorot("emb", 6, 3, &mut rng).map_err(e2s)?;
    let t = reg.clone();
    check("embedding", &mut s, &|g, st| {
        let tb = g.param(st, table);
        let e = g.embedding(tb, &[4, 1])?;
        let y = g.tanh(e);
        g.mse(y, &t)
    })?;

    let mut s = ParamStore::new();
    let gru = BiGru::new(&mut s, "gru", 3, 2, &mut rng).map_err(e2s)?;
    let steps: Vec<Tensor> = (0..4)
        .map(|i| Tensor::from_rows(&[vec![0.1 * i as f64, -0.3, 0.7], vec![0.5, 0.2 * i as f64, -0.6]]).unwrap())
        .collect();
    let target = Tensor::from_rows(&[vec![0.1, -0.2, 0.3, 0.0], vec![-0.3, 0.2, 0.1, 0.4]]).map_err(e2s)?;
    check("bi-gru", &mut s, &|g, st| {
        let xs: Vec<_> = steps.iter().map(|t| g.constant(t.clone())).collect();
        let hs = gru.forward_seq(g, st, &xs)?;
        g.mse(hs[3], &target)
    })?;

    let mut s = ParamStore::new();
    let conv = ConvAttention::new(&mut s, "conv", 3, &[1, 2, 3], 2, &mut rng).map_err(e2s)?;
    let t6 = Tensor::from_rows(&[vec![0.1, 0.2, -0.1, 0.3, 0.0, 0.5], vec![0.4, -0.2, 0.1, 0.0, 0.3, -0.1]])
        .map_err(e2s)?;
    check("conv+maxpool attention", &mut s, &|g, st| {
        let xs: Vec<_> = steps.iter().map(|t| g.constant(t.clone())).collect();
        let a = conv.forward_seq(g, st, &xs)?;
        g.mse(a, &t6)
    })?;

    for loss in ["cross-entropy", "mse", "tanimoto"] {
        let mut s = ParamStore::new();
        let act = if loss == "cross-entropy" { Activation::Softmax } else { Activation::Sigmoid };
        let d = Dense::new(&mut s, loss, 3, 3, true, act, &mut rng).map_err(e2s)?;
        let (xx, oh, rr) = (x.clone(), onehot.clone(), reg.clone());
        check(loss, &mut s, &|g, st| {
            let xn = g.constant(xx.clone());
            let y = d.forward(g, st, xn)?;
            match loss {
                "cross-entropy" => g.cross_entropy(y, &oh),
                "mse" => g.mse(y, &rr),
                _ => g.tanimoto(y, &oh, TANIMOTO_EPS),
            }
        })?;
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    Ok(format!("{} checks, max rel error {max:.2e} < 1e-3 (delta 1e-4)", worst.len()))
}

fn tweets(texts: &[&str]) -> Vec<CleanedTweet> {
    let d = ReplacementDictionaries::bundled();
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| clean(&RawTweet::new(i.to_string(), *t), &d).unwrap())
        .collect()
}

// 3
fn architecture_shapes() -> Outcome {
    let ts = tweets(&["good flight today", "bad delay again"]);
    let inits = Slot::ALL
        .iter()
        .map(|&s| SubModelInit {
            config: SubModelConfig::canonical(s),
            vocab: Vocab::build(ts.iter().map(|t| t.tokens(s.variant())), 1),
            table: None,
        })
        .collect();
    let m: AscModel = build_asc(inits, 1).map_err(e2s)?;
    let mut g = Graph::new();
    let tr = m.subs[0].forward(&mut g, &m.store, &[&ts[0]]).map_err(e2s)?;
    let shapes = [
        (tr.inputs.len(), 40),
        (g.value(tr.inputs[0]).shape()[1], 208),
        (tr.states.len(), 40),
        (g.value(tr.states[0]).shape()[1], 400),
        (g.value(tr.attention).shape()[1], 600),
        (g.value(tr.penultimate).shape()[1], 30),
        (g.value(tr.probs).shape()[1], 3),
    ];
    for (i, (got, want)) in shapes.iter().enumerate() {
        ensure(got == want, format!("sub-model chain step {i}: {got} != {want}"))?;
    }
    let cat = m.concat_penultimates(&mut g, &[&ts[0]]).map_err(e2s)?;
    ensure(g.value(cat).shape() == [1, 120], format!("combiner input {:?}", g.value(cat).shape()))?;
    let w = |name: &str| m.store.value(m.store.lookup(name).unwrap()).shape().to_vec();
    ensure(w("combiner.hidden.weight") == [120, 25], "combiner hidden")?;
    ensure(w("combiner.output.weight") == [25, 3], "combiner output")?;
    let p = m.probs(&mut g, &[&ts[0], &ts[1]]).map_err(e2s)?;
    ensure(g.value(p).shape() == [2, 3], "classifier output")?;
    let v = VotingRegressionHead::new(212, 0).map_err(e2s)?;
    ensure(v.store.value(v.weight).shape() == [212, 900], "valence head 212 -> 300 x 3")?;
    let ml = MultiLabelHead::new(217, 0).map_err(e2s)?;
    ensure(ml.store.value(ml.hidden.weight).shape() == [217, 100], "multi-label hidden")?;
    ensure(ml.store.value(ml.weight).shape() == [100, 3300], "multi-label copies")?;
    Ok("40->(40,208)->(40,400)->600->30->3, 120->25->3, 212 and 217 inputs exact".into())
}

// 4
fn tanimoto_formula() -> Outcome {
    let oracle = |y: &[f64], t: &[f64]| {
        let dot: f64 = y.iter().zip(t).map(|(a, b)| a * b).sum();
        let l1: f64 = y.iter().zip(t).map(|(a, b)| (a + b).abs()).sum();
        1.0 - dot / (l1 - dot + 1e-7)
    };
    let got = tanimoto_distance(&[0.5, 0.5], &[1.0, 0.0], TANIMOTO_EPS);
    ensure((got - (1.0 - 0.5 / (1.5 + 1e-7))).abs() < 1e-9, format!("closed form {got}"))?;
    ensure((got - oracle(&[0.5, 0.5], &[1.0, 0.0])).abs() < 1e-9, "oracle")?;
    let mut g = Graph::new();
    let p = g.constant(Tensor::from_rows(&[vec![0.5, 0.5]]).map_err(e2s)?);
    let l = g.tanimoto(p, &Tensor::from_rows(&[vec![1.0, 0.0]]).map_err(e2s)?, TANIMOTO_EPS).map_err(e2s)?;
    ensure((g.value(l).data()[0] - got).abs() < 1e-15, "graph loss differs from direct evaluation")?;
    let y = [1.0, 0.0, 1.0, 1.0];
    let same = tanimoto_distance(&y, &y, TANIMOTO_EPS);
    ensure(same.abs() < 1e-7, format!("t(y, y) = {same}"))?;
    ensure(tanimoto_distance(&[1.0, 0.0], &[0.0, 1.0], TANIMOTO_EPS) == 1.0, "disjoint support")?;
    Ok(format!("t([.5,.5],[1,0]) = {got:.12} within 1e-9; t(y,y) = {same:.1e}; disjoint = 1 exactly"))
}

// 5
fn score_map() -> Outcome {
    ensure(score_map_f([1.0, 0.0, 0.0]) == 1.0, "f(1,0,0)")?;
    ensure(score_map_f([0.0, 1.0, 0.0]) == 0.5, "f(0,1,0)")?;
    ensure(score_map_f([0.0, 0.0, 1.0]) == 0.0, "f(0,0,1)")?;
    ensure(score_map_f([1.0 / 3.0; 3]) == 0.5, "f(uniform)")?;
    Ok("1, 0.5, 0, 0.5 exact".into())
}

fn oracle_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 1e-12 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// All (k-1)-subsets of midpoints, recursively; maximal Pearson, then the
/// lexicographically smallest cuts within 1e-12.
fn brute_force(scores: &[f64], gold: &[i64], classes: &[i64]) -> (Vec<f64>, f64) {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mids: Vec<f64> = s.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    let g: Vec<f64> = gold.iter().map(|&v| v as f64).collect();
    let mut all: Vec<(Vec<f64>, f64)> = Vec::new();
    fn rec(mids: &[f64], start: usize, left: usize, cur: &mut Vec<f64>, out: &mut dyn FnMut(&[f64])) {
        if left == 0 {
            out(cur);
            return;
        }
        for i in start..mids.len() {
            cur.push(mids[i]);
            rec(mids, i + 1, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(&mids, 0, classes.len() - 1, &mut Vec::new(), &mut |cuts| {
        let assigned: Vec<f64> = scores
            .iter()
            .map(|&x| classes[cuts.iter().filter(|&&c| c <= x).count()] as f64)
            .collect();
        if let Some(r) = oracle_pearson(&assigned, &g) {
            all.push((cuts.to_vec(), r));
        }
    });
    let max = all.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
    all.into_iter().find(|a| a.1 >= max - 1e-12).unwrap()
}

// 6
fn calibration_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for inst in 0..50 {
        let classes: Vec<i64> = match inst % 3 {
            0 => vec![0, 1],
            1 => (0..4).collect(),
            _ => (-3..=3).collect(),
        };
        let k = classes.len();
        let n = rng.gen_range(k.max(8)..=20);
        let gold: Vec<i64> = loop {
            let g: Vec<i64> = (0..n).map(|_| classes[rng.gen_range(0..k)]).collect();
            if g.iter().any(|&v| v != g[0]) {
                break g;
            }
        };
        // noisy monotone scores, rounded so that some ties occur
        let lo = classes[0] as f64;
        let span = (classes[k - 1] - classes[0]) as f64;
        let scores: Vec<f64> = gold
            .iter()
            .map(|&c| ((((c as f64 - lo) / span) * 0.6 + rng.gen::<f64>() * 0.4) * 50.0).round() / 50.0)
            .collect();
        let t = grid_search_thresholds(&scores, &gold, &classes, &GridSearch::default()).map_err(e2s)?;
        let (cuts, best) = brute_force(&scores, &gold, &classes);
        let pred: Vec<f64> = apply_thresholds(&scores, &t).iter().map(|&v| v as f64).collect();
        let g: Vec<f64> = gold.iter().map(|&v| v as f64).collect();
        let r = oracle_pearson(&pred, &g).ok_or("constant assignment")?;
        ensure((r - best).abs() < 1e-12, format!("instance {inst}: pearson {r} vs brute force {best}"))?;
        ensure(t.cuts == cuts, format!("instance {inst}: cuts {:?} vs {:?}", t.cuts, cuts))?;
        checked += 1;
    }
    Ok(format!("{checked} instances (n<=20, k in 2/4/7) match brute force: Pearson within 1e-12, identical cuts"))
}

// 7
fn pratt_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = 200;
        let p = rng.gen_range(2..=10);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()).collect();
        let beta: Vec<f64> = (0..p).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 0.5 * (rng.gen::<f64>() - 0.5))
            .collect();
        let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
        let rep = pratt_importance(&x, &y, &names).map_err(e2s)?;
        worst = worst.max((rep.total() - 1.0).abs());
    }
    ensure(worst < 1e-6, format!("|sum d - 1| = {worst:.2e}"))?;
    let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin()]).collect();
    let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).cos() + i as f64 * 0.01).collect();
    let one = pratt_importance(&x, &y, &["only".into()]).map_err(e2s)?;
    let d = one.features[0].d;
    ensure((d - 1.0).abs() <= 1e-12, format!("single feature d = {d}"))?;
    Ok(format!("20 OLS instances: max |sum d - 1| = {worst:.1e} < 1e-6; single feature |d - 1| = {:.1e} <= 1e-12", (d - 1.0).abs()))
}

// 8
fn memorization() -> Outcome {
    // (a) classifier, 20 tweets over 3 classes
    let texts = [
        "good flight", "great crew", "awesome seats", "amazing service", "happy landing", "love this airline",
        "nice trip", "the plane", "a gate", "my ticket", "this seat", "the terminal", "our bags", "bad delay",
        "terrible food", "awful wait", "horrible crew", "worst trip", "hate delays", "sad landing",
    ];
    let labels = [0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2];
    let ts = tweets(&texts);
    let data: Vec<(CleanedTweet, Sentiment)> =
        ts.iter().cloned().zip(labels.iter().map(|&i| Sentiment::from_index(i).unwrap())).collect();
    let inits = Slot::ALL
        .iter()
        .map(|&s| SubModelInit {
            config: SubModelConfig::toy(s),
            vocab: Vocab::build(ts.iter().map(|t| t.tokens(s.variant())), 1),
            table: None,
        })
        .collect();
    let mut m = build_asc(inits, 8).map_err(e2s)?;
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: 5,
        optimizer: OptimizerKind::adam().with_lr(0.02),
        seed: 8,
        frozen_embedding_epochs: 0,
    };
    train_asc(&mut m, &data, &cfg).map_err(e2s)?;
    let probs = predict_probs(&m, &ts, 32).map_err(e2s)?;
    let hits = probs
        .iter()
        .zip(&labels)
        .filter(|(p, &l)| (0..3).all(|k| k == l || p[k] < p[l]))
        .count();
    ensure(hits == 20, format!("classifier training accuracy {hits}/20"))?;

    // (b) valence head, 30 samples
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let x: Vec<Vec<f64>> = (0..30).map(|_| (0..40).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()).collect();
    let y: Vec<f64> = (0..30).map(|_| 0.1 + 0.8 * rng.gen::<f64>()).collect();
    let mut head = VotingRegressionHead::new(40, 81).map_err(e2s)?;
    let hc = HeadConfig {
        epochs: 600,
        batch_size: 30,
        optimizer: OptimizerKind::adam().with_lr(0.02),
        seed: 82,
    };
    train_regression(&mut head, &x, &y, &hc).map_err(e2s)?;
    let pred = head.predict(&x).map_err(e2s)?;
    let mse = pred.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 30.0;
    ensure(mse < 1e-3, format!("valence head MSE {mse:.2e}"))?;

    // (c) multi-label head, 20 samples
    // every row carries a label: an empty gold row has a constant loss
    let x: Vec<Vec<f64>> = (0..20).map(|_| (0..60).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()).collect();
    let yl: Vec<Vec<f64>> = (0..20)
        .map(|i| (0..11).map(|k| f64::from(u8::from(k == i % 11 || rng.gen::<f64>() < 0.3))).collect())
        .collect();
    let mut ml = MultiLabelHead::new(60, 83).map_err(e2s)?;
    let mc = HeadConfig {
        epochs: 300,
        batch_size: 10,
        optimizer: OptimizerKind::adam().with_lr(3e-3),
        seed: 84,
    };
    train_multilabel(&mut ml, &x, &yl, &mc).map_err(e2s)?;
    let flags = ml.predict_flags(&x).map_err(e2s)?;
    let gold: Vec<Vec<u8>> = yl.iter().map(|r| r.iter().map(|&v| v as u8).collect()).collect();
    let j = jaccard(&gold, &flags).map_err(e2s)?;
    ensure(j > 0.95, format!("multi-label Jaccard {j:.3}"))?;
    Ok(format!("classifier 20/20, valence MSE {mse:.1e} < 1e-3, multi-label Jaccard {j:.3} > 0.95"))
}

// 9
fn freeze_contract() -> Outcome {
    let ts = tweets(&["so happy today", "terrible night", "good morning", "sad news"]);
    let data: Vec<(CleanedTweet, Sentiment)> = ts
        .iter()
        .cloned()
        .zip([Sentiment::Positive, Sentiment::Negative, Sentiment::Positive, Sentiment::Negative])
        .collect();
    let cfg = SubModelConfig::toy(Slot::W2v200).with_penultimate(2);
    let vocab = Vocab::build(ts.iter().map(|t| t.tokens(Variant::Simple)), 1);
    let mut net = build_submodel(cfg, vocab, None, 9).map_err(e2s)?;
    let tc = TrainConfig {
        batch_size: 2,
        ..TrainConfig::default()
    }
    .with_schedule(DistantSchedule::default());
    ensure(tc.epochs == 7 && tc.frozen_embedding_epochs == 1, "schedule is 1 frozen + 6 trainable epochs")?;
    let tables = |n: &asc_core::asc::SubModelNet| -> Vec<Vec<u64>> {
        n.embedding_params().iter().map(|&id| n.store.value(id).data().iter().map(|v| v.to_bits()).collect()).collect()
    };
    let before = tables(&net);
    let head_before = net.store.value(net.sub.output.weight).clone();
    let mut tr = Trainer::new(tc).map_err(e2s)?;
    tr.run_epoch(&mut net, &data).map_err(e2s)?;
    ensure(tables(&net) == before, "embedding tables changed during the frozen epoch")?;
    ensure(net.store.value(net.sub.output.weight) != &head_before, "other weights did not train")?;
    tr.run_epoch(&mut net, &data).map_err(e2s)?;
    let after = tables(&net);
    ensure(after[0] != before[0], "word table unchanged after the first trainable epoch")?;
    ensure(after[1] != before[1], "POS table unchanged after the first trainable epoch")?;
    Ok("tables bit-identical after frozen epoch, changed after epoch 2".into())
}

// 10
fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(e2s)?;
    let mut outs = Vec::new();
    for i in 0..2 {
        let dir = root.path().join(format!("run{i}"));
        std::fs::create_dir_all(&dir).map_err(e2s)?;
        let fx = common::fixture(&dir, "V-oc", true);
        let run = Run::from_file(&fx.config, &dir.join("out")).map_err(e2s)?;
        run_pipeline(&run).map_err(e2s)?;
        outs.push(run.out_dir.clone());
    }
    let files = [
        "train.features.csv",
        "eval.features.csv",
        "asc.ckpt",
        "head.ckpt",
        "thresholds.json",
        "predictions.tsv",
        "metrics.json",
        "manifest.json",
    ];
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).map_err(|e| format!("{f}: {e}"));
    for f in files {
        ensure(read(&outs[0], f)? == read(&outs[1], f)?, format!("{f} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two seeded runs", files.len()))
}

// 11
fn metric_arithmetic() -> Outcome {
    let m = macro_average(&[0.748, 0.670, 0.748, 0.721]).map_err(e2s)?;
    ensure((m - 0.72175).abs() < 1e-12, format!("macro average {m}"))?;
    ensure(format_metric(m) == "0.721", format!("reported {}", format_metric(m)))?;
    let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).map_err(e2s)?;
    ensure((r - 0.8).abs() < 1e-12, format!("pearson {r}"))?;
    let j = jaccard(&[vec![1, 0, 1]], &[vec![1, 1, 0]]).map_err(e2s)?;
    ensure((j - 1.0 / 3.0).abs() < 1e-12, format!("jaccard {j}"))?;
    Ok("0.72175 -> 0.721 (truncation); pearson 0.8, jaccard 1/3 within 1e-12".into())
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 11] = [
        (1, "cleaning golden", cleaning_golden, Duration::from_secs(1)),
        (2, "gradient suite", gradient_suite, Duration::from_secs(60)),
        (3, "architecture shapes", architecture_shapes, Duration::from_secs(1)),
        (4, "tanimoto formula", tanimoto_formula, Duration::from_secs(1)),
        (5, "score map", score_map, Duration::from_secs(1)),
        (6, "calibration oracle", calibration_oracle, Duration::from_secs(120)),
        (7, "pratt identity", pratt_identity, Duration::from_secs(10)),
        (8, "memorization", memorization, Duration::from_secs(600)),
        (9, "freeze contract", freeze_contract, Duration::from_secs(60)),
        (10, "determinism", determinism, Duration::from_secs(300)),
        (11, "metric arithmetic", metric_arithmetic, Duration::from_secs(1)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, f, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > limit => Err(format!("{d}; runtime {took:.2?} over {limit:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("AC-{id:02} PASS {name}: {detail} [{took:.2?} / {limit:?}]"),
            Err(detail) => {
                failed += 1;
                println!("AC-{id:02} FAIL {name}: {detail} [{took:.2?} / {limit:?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
