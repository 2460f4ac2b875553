//! Acceptance criteria, one check per criterion. Each prints a PASS/FAIL
//! line; the test fails if any criterion fails.

mod common;

use std::collections::HashSet;
use std::future::Future;
use std::path::Path;
use std::pin::Pin;
use std::time::{Duration, Instant};

use factcheck_core::datasets::{
    compute_stats, curriculum_plan, expand_split, load_dataset, FormatHint, Split, StatsManifest,
};
use factcheck_core::evidence::{
    cosine_similarity, embed_and_rank, EmbeddingVector, EvidenceSnippet, QueryOrigin, RankOptions, SearchQuery,
};
use factcheck_core::datasets::Claim;
use factcheck_core::metrics::{
    bleu, classification_report, corpus_metric, paired_t_test, rouge_l, rouge_n, tokenize, weighted_kappa,
    KappaWeighting, Metric, ScoredPairInput,
};
use factcheck_core::questiongen::{parse_generation, BackendKind};
use factcheck_core::scripted::ScriptedEmbedder;
use factcheck_core::verification::{
    aggregate_verdict, verify_claim, Method, Stance, StanceLabel, TieBreak, Veracity, VoteRule,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

/// Clipped overlap by direct counting over every distinct candidate gram.
fn brute_overlap(cand: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let cg = grams(cand, n);
    let rg = grams(reference, n);
    let distinct: HashSet<&Vec<String>> = cg.iter().collect();
    let overlap = distinct
        .into_iter()
        .map(|g| {
            let in_c = cg.iter().filter(|x| *x == g).count();
            let in_r = rg.iter().filter(|x| *x == g).count();
            in_c.min(in_r)
        })
        .sum();
    (overlap, cg.len(), rg.len())
}

fn oracle_f1(overlap: usize, c: usize, r: usize) -> f64 {
    if overlap == 0 || c == 0 || r == 0 {
        return 0.0;
    }
    let (p, rc) = (overlap as f64 / c as f64, overlap as f64 / r as f64);
    2.0 * p * rc / (p + rc)
}

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|x| x == *s))
}

/// Longest common subsequence by trying every subsequence of `a`.
fn brute_lcs(a: &[String], b: &[String]) -> usize {
    (0u32..(1 << a.len()))
        .filter_map(|mask| {
            let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
            is_subsequence(&sub, b).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

/// Product of modified precisions to the 1/4 power times the brevity
/// penalty; orders >= 2 with no match use 1 / (total + 1).
fn brute_bleu(cand: &[String], reference: &[String]) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=4 {
        let (m, total, _) = brute_overlap(cand, reference, n);
        let p = match (m, n) {
            (0, 1) => return 0.0,
            (0, _) => 1.0 / (total as f64 + 1.0),
            _ => m as f64 / total as f64,
        };
        product *= p;
    }
    let bp = if cand.len() < reference.len() {
        (1.0 - reference.len() as f64 / cand.len() as f64).exp()
    } else {
        1.0
    };
    bp * product.powf(0.25)
}

/// Student t density integrated with composite Simpson; two-sided p.
fn oracle_t_p(t: f64, df: u32) -> f64 {
    // gamma((df + 1) / 2) / gamma(df / 2) by the recurrence from 1 or 1/2
    fn half_gamma_ratio(df: u32) -> f64 {
        let (mut num, mut den) = if df % 2 == 1 { (1.0, std::f64::consts::PI.sqrt()) } else { (std::f64::consts::PI.sqrt() / 2.0, 1.0) };
        let mut x = if df % 2 == 1 { 1.0 } else { 1.5 };
        while x < (df as f64 + 1.0) / 2.0 {
            num *= x;
            x += 1.0;
        }
        let mut y = if df % 2 == 1 { 0.5 } else { 1.0 };
        while y < df as f64 / 2.0 {
            den *= y;
            y += 1.0;
        }
        num / den
    }
    let v = df as f64;
    let c = half_gamma_ratio(df) / (v * std::f64::consts::PI).sqrt();
    let pdf = |x: f64| c * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0);
    let x = t.abs();
    let steps = 20_000;
    let h = x / steps as f64;
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..steps {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let area = s * h / 3.0;
    (1.0 - 2.0 * area).clamp(0.0, 1.0)
}

/// 1 - mean disagreement of actual pairs / mean disagreement of all
/// cross pairs.
fn oracle_kappa(a: &[u8], b: &[u8], quadratic: bool) -> Option<f64> {
    let w = |x: u8, y: u8| {
        let d = (x as f64 - y as f64).abs() / 4.0;
        if quadratic {
            d * d
        } else {
            d
        }
    };
    let n = a.len() as f64;
    let observed: f64 = a.iter().zip(b).map(|(x, y)| w(*x, *y)).sum::<f64>() / n;
    let expected: f64 = a.iter().flat_map(|x| b.iter().map(move |y| w(*x, *y))).sum::<f64>() / (n * n);
    (expected > 0.0).then(|| 1.0 - observed / expected)
}

// ---------------------------------------------------------------- criteria

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let vocab = ["the", "cat", "sat", "on", "mat", "a", "dog"];
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let cases = 400;
    for _ in 0..cases {
        let seq = |rng: &mut StdRng| -> Vec<String> {
            let len = rng.random_range(0..=8);
            (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect()
        };
        let (c, r) = (seq(&mut rng), seq(&mut rng));
        let (tc, tr) = (tokenize(&c.join(" ")), tokenize(&r.join(" ")));
        ensure(tc.tokens() == c.as_slice(), || format!("tokenizer changed {c:?}"))?;
        let pairs = [
            (rouge_n(&tc, &tr, 1), {
                let (o, x, y) = brute_overlap(&c, &r, 1);
                oracle_f1(o, x, y)
            }),
            (rouge_n(&tc, &tr, 2), {
                let (o, x, y) = brute_overlap(&c, &r, 2);
                oracle_f1(o, x, y)
            }),
            (rouge_l(&tc, &tr), oracle_f1(brute_lcs(&c, &r), c.len(), r.len())),
            (bleu(&tc, &tr, 4), brute_bleu(&c, &r)),
        ];
        for (got, want) in pairs {
            let d = (got - want).abs();
            worst = worst.max(d);
            ensure(d <= 1e-9, || format!("{c:?} vs {r:?}: {got} != {want}"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} random pairs, max |diff| {worst:.1e}, {} ms", elapsed.as_millis()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut ties = 0usize;
    for n in 1..=12usize {
        for mask in 0u32..(1 << n) {
            let stances: Vec<StanceLabel> = (0..n)
                .map(|i| {
                    let conf = 0.5 + ((i * 7 + mask as usize) % 10) as f64 / 20.0;
                    if mask & (1 << i) != 0 {
                        StanceLabel::supporting(conf)
                    } else {
                        StanceLabel::refuting(conf)
                    }
                })
                .collect();
            let s = mask.count_ones() as usize;
            let r = n - s;
            for tie_break in [TieBreak::MeanConfidence, TieBreak::AlwaysFalse, TieBreak::AlwaysTrue] {
                let rule = VoteRule { tie_break, ..Default::default() };
                let got = aggregate_verdict(&stances, &rule).map_err(|e| e.to_string())?;
                let mean = |st: Stance| {
                    let v: Vec<f64> = stances.iter().filter(|x| x.stance == st).map(|x| x.confidence).collect();
                    if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
                };
                let want = if s > r {
                    Veracity::True
                } else if r > s {
                    Veracity::False
                } else {
                    match tie_break {
                        TieBreak::AlwaysFalse => Veracity::False,
                        TieBreak::AlwaysTrue => Veracity::True,
                        TieBreak::MeanConfidence => {
                            if mean(Stance::Supporting) > mean(Stance::Refuting) { Veracity::True } else { Veracity::False }
                        }
                    }
                };
                ensure(got.label == want && got.supporting_votes == s && got.refuting_votes == r, || {
                    format!("n={n} mask={mask:b} {tie_break:?}: {got:?}")
                })?;
                ensure(got.tie_broken == (s == r), || format!("tie flag wrong for n={n} mask={mask:b}"))?;
                checked += 1;
            }
            ties += usize::from(s == r);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} assignments x rules ({ties} ties), {} ms", elapsed.as_millis()))
}

fn criterion_3() -> Outcome {
    let fx = common::fixtures().join("datasets");
    let mut notes = Vec::new();
    for (file, format, manifest) in [
        ("averitec_sample.json", FormatHint::Averitec, "averitec_sample.manifest.json"),
        ("verdict_claims.jsonl", FormatHint::Canonical, "verdict_claims.manifest.json"),
    ] {
        let records = load_dataset(&fx.join(file), format).map_err(|e| e.to_string())?;
        let stats = compute_stats(&records).map_err(|e| e.to_string())?;
        let m = StatsManifest::load(&fx.join(manifest)).map_err(|e| e.to_string())?;
        let bad = m.mismatches(&stats);
        ensure(bad.is_empty(), || format!("{file}: {bad:?}"))?;
        notes.push(format!("{file} {}/{} avg {}", stats.num_claims, stats.total_questions, stats.avg_questions_display()));
    }

    match std::env::var_os("FACTCHECK_CLAIMDECOMP_DIR") {
        Some(dir) => {
            let dir = Path::new(&dir);
            let train = load_dataset(&dir.join("train.jsonl"), FormatHint::ClaimDecomp).map_err(|e| e.to_string())?;
            let test = load_dataset(&dir.join("test.jsonl"), FormatHint::ClaimDecomp).map_err(|e| e.to_string())?;
            let (a, b) = (expand_split(&train, Split::Train).len(), expand_split(&test, Split::Test).len());
            ensure((a, b) == (4400, 1088), || format!("ClaimDecomp pairs {a}/{b}, expected 4400/1088"))?;
            notes.push("ClaimDecomp 4400/1088".into());
        }
        None => notes.push("real ClaimDecomp skipped (FACTCHECK_CLAIMDECOMP_DIR unset)".into()),
    }

    let sizes = [
        ("GPT-3.5-gen", 152_716),
        ("AVeriTeC", 7_985),
        ("favIQ", 140_977),
        ("ClaimDecomp", 4_400),
        ("QABriefs", 18_281),
    ];
    let plan = curriculum_plan(&sizes).map_err(|e| e.to_string())?;
    let order: Vec<&str> = plan.iter().map(|e| e.name.as_str()).collect();
    ensure(order == ["ClaimDecomp", "AVeriTeC", "QABriefs", "favIQ", "GPT-3.5-gen"], || format!("order {order:?}"))?;
    notes.push(format!("curriculum {}", order.join(" < ")));
    Ok(notes.join("; "))
}

#[derive(Deserialize)]
struct MalformedCase {
    kind: BackendKind,
    raw: String,
}

fn criterion_4() -> Outcome {
    let text = std::fs::read_to_string(common::fixtures().join("generation/malformed_outputs.json")).map_err(|e| e.to_string())?;
    let cases: Vec<MalformedCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(cases.len() == 50, || format!("{} cases", cases.len()))?;
    let mut pairs = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let parsed = parse_generation(&c.raw, c.kind);
        ensure(parsed.is_none(), || format!("case {i} {:?} parsed to {parsed:?}", c.raw))?;
        pairs.push(ScoredPairInput {
            pair_id: format!("m{i}"),
            reference: "Who announced the budget?".into(),
            generation: parsed.map(|q| q.join(" ")),
        });
    }
    for metric in Metric::ALL {
        let report = corpus_metric(&pairs, metric).map_err(|e| e.to_string())?;
        ensure(report.n_null == 50 && report.scores(metric).values().all(|v| *v == 0.0), || {
            format!("{metric:?}: null pairs not all scored 0")
        })?;
    }

    // R-1 of 0.6 (3 of 5 tokens) and 0.9 (9 of 10 tokens) plus one null
    let three = [
        ScoredPairInput {
            pair_id: "a".into(),
            reference: "who raised the tax rate".into(),
            generation: Some("who raised the wage floor".into()),
        },
        ScoredPairInput {
            pair_id: "b".into(),
            reference: "when did the city council vote on the new budget".into(),
            generation: Some("when did the city council vote on the old budget".into()),
        },
        ScoredPairInput {
            pair_id: "c".into(),
            reference: "what changed".into(),
            generation: None,
        },
    ];
    let report = corpus_metric(&three, Metric::Rouge1).map_err(|e| e.to_string())?;
    let s = report.scores(Metric::Rouge1);
    ensure((s["a"] - 0.6).abs() < 1e-12 && (s["b"] - 0.9).abs() < 1e-12, || format!("scores {s:?}"))?;
    let mean = report.mean(Metric::Rouge1).unwrap_or(f64::NAN);
    ensure((mean - 0.5).abs() < 1e-12, || format!("mean {mean}"))?;
    Ok(format!("50/50 malformed outputs null and scored 0; 3-pair mean {mean:.4}"))
}

fn criterion_5<'a>() -> Pin<Box<dyn Future<Output = Outcome> + 'a>> {
    Box::pin(async {
        use common::scripted;
        let claim = Claim::new("bridge-1", scripted::CLAIM).map_err(|e| e.to_string())?;
        let method = Method::Backend("gen".into());
        let mut outputs = Vec::new();
        for run in 0..10u64 {
            let parallelism = [1, 2, 3, 8, 16][run as usize % 5];
            let p = scripted::pipeline(parallelism, run * 7919);
            let rec = verify_claim(&claim, &method, &p).await.map_err(|e| e.to_string())?;
            outputs.push((serde_json::to_string(&rec).map_err(|e| e.to_string())?, rec));
        }
        let (first, rec) = &outputs[0];
        ensure(outputs.iter().all(|(o, _)| o == first), || "records differ between runs".into())?;
        ensure(rec.retrieved == scripted::SNIPPETS, || format!("retrieved {}", rec.retrieved))?;
        let v = &rec.verdict;
        ensure(v.per_snippet.len() == 20, || format!("{} voted snippets", v.per_snippet.len()))?;
        let expected_refuting = (0..20).filter(|i| scripted::refutes(*i)).count();
        ensure(v.refuting_votes == expected_refuting && v.supporting_votes == 20 - expected_refuting, || {
            format!("votes {}/{}", v.supporting_votes, v.refuting_votes)
        })?;
        ensure(v.label == Veracity::True && !v.tie_broken, || format!("label {:?}", v.label))?;
        Ok(format!(
            "10 runs identical ({} bytes); 20 voted, {} supporting / {} refuting -> {:?}",
            first.len(),
            v.supporting_votes,
            v.refuting_votes,
            v.label
        ))
    })
}

fn criterion_6() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst_p = 0.0f64;
    for _ in 0..50 {
        let a: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 0.9 + 0.05).collect();
        let got = paired_t_test(&a, &b).map_err(|e| e.to_string())?;
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        let t = mean / (sd / n.sqrt());
        let p = oracle_t_p(t, 19);
        ensure((got.t - t).abs() < 1e-6 && (got.p - p).abs() < 1e-6, || format!("t {} vs {t}, p {} vs {p}", got.t, got.p))?;
        worst_p = worst_p.max((got.p - p).abs());
    }

    let mut worst_k = 0.0f64;
    let mut compared = 0;
    for _ in 0..200 {
        let len = rng.random_range(2..30);
        let a: Vec<u8> = (0..len).map(|_| rng.random_range(1..=5)).collect();
        let b: Vec<u8> = (0..len).map(|_| rng.random_range(1..=5)).collect();
        for (w, quad) in [(KappaWeighting::Quadratic, true), (KappaWeighting::Linear, false)] {
            match oracle_kappa(&a, &b, quad) {
                Some(want) => {
                    let got = weighted_kappa(&a, &b, w).map_err(|e| e.to_string())?;
                    let back = weighted_kappa(&b, &a, w).map_err(|e| e.to_string())?;
                    ensure((got - want).abs() < 1e-9, || format!("kappa {got} vs {want}"))?;
                    ensure((got - back).abs() < 1e-12, || "kappa not symmetric".into())?;
                    worst_k = worst_k.max((got - want).abs());
                    compared += 1;
                }
                None => ensure(weighted_kappa(&a, &b, w).is_err(), || "undefined kappa returned a value".into())?,
            }
        }
    }
    let perfect = weighted_kappa(&[1, 2, 3, 4, 5, 3], &[1, 2, 3, 4, 5, 3], KappaWeighting::Quadratic).map_err(|e| e.to_string())?;
    ensure((perfect - 1.0).abs() < 1e-12, || format!("perfect agreement {perfect}"))?;

    use Veracity::{False as F, True as T};
    let r = classification_report(&[T, F, F, F], &[T, T, F, F]).map_err(|e| e.to_string())?;
    ensure((r.macro_f1 - 11.0 / 15.0).abs() < 1e-12 && r.micro_f1 == 0.75, || format!("macro {} micro {}", r.macro_f1, r.micro_f1))?;
    Ok(format!(
        "t-test max |dp| {worst_p:.1e} over 50 vectors; kappa max |diff| {worst_k:.1e} over {compared}; macro {:.4} micro {:.2}",
        r.macro_f1, r.micro_f1
    ))
}

fn criterion_7<'a>() -> Pin<Box<dyn Future<Output = Outcome> + 'a>> {
    Box::pin(async {
        let mut rng = StdRng::seed_from_u64(7);
        let claim = Claim::new("c", "anchor text").map_err(|e| e.to_string())?;
        let embedder = ScriptedEmbedder::from_fn("e", |t: &str| {
            if t == "anchor text" {
                return Some(vec![1.0, 0.0, 0.0]);
            }
            // texts "s<bucket>-<n>": equal buckets embed identically, making ties
            let bucket: f64 = t[1..].split('-').next()?.parse().ok()?;
            Some(vec![1.0, bucket * 0.3, 0.5])
        });
        let mut pools = 0;
        for _ in 0..60 {
            let size = rng.random_range(0..30);
            let mut pool: Vec<EvidenceSnippet> = (0..size)
                .map(|i| EvidenceSnippet {
                    text: format!("s{}-{i}", rng.random_range(0..6)),
                    url: format!("https://h{}.example/{i}", rng.random_range(0..3)),
                    title: String::new(),
                    provider: ["a", "b"][i % 2].into(),
                    query: SearchQuery { text: "q".into(), origin: QueryOrigin::Claim },
                    similarity: None,
                })
                .collect();
            let k = rng.random_range(1..25);
            let opts = RankOptions { batch_size: 5, ..Default::default() };
            let ranked = embed_and_rank(&claim, pool.clone(), &embedder, k, &opts).await.map_err(|e| e.to_string())?;
            ensure(ranked.len() == k.min(size), || format!("len {} for k={k} pool={size}", ranked.len()))?;
            ensure(
                ranked.windows(2).all(|w| w[0].similarity >= w[1].similarity),
                || "not sorted non-increasing".into(),
            )?;
            pool.shuffle(&mut rng);
            let again = embed_and_rank(&claim, pool, &embedder, k, &opts).await.map_err(|e| e.to_string())?;
            ensure(again == ranked, || "tie order depends on input order".into())?;
            pools += 1;
        }

        for _ in 0..200 {
            let dim = rng.random_range(1..12);
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            if u.iter().all(|x| *x == 0.0) || v.iter().all(|x| *x == 0.0) {
                continue;
            }
            let ev = |x: &[f64]| EmbeddingVector::new(x.to_vec()).map_err(|e| e.to_string());
            let (eu, evv) = (ev(&u)?, ev(&v)?);
            let selfsim = cosine_similarity(&eu, &eu).map_err(|e| e.to_string())?;
            ensure((selfsim - 1.0).abs() < 1e-9, || format!("identity {selfsim}"))?;
            let alpha = rng.random_range(0.01..100.0);
            let scaled = ev(&u.iter().map(|x| x * alpha).collect::<Vec<_>>())?;
            let a = cosine_similarity(&eu, &evv).map_err(|e| e.to_string())?;
            let b = cosine_similarity(&scaled, &evv).map_err(|e| e.to_string())?;
            ensure((a - b).abs() < 1e-9, || format!("scale {a} vs {b}"))?;
            // v minus its projection on u is orthogonal to u
            let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
            let uu: f64 = u.iter().map(|x| x * x).sum();
            let ortho: Vec<f64> = v.iter().zip(&u).map(|(y, x)| y - dot / uu * x).collect();
            if ortho.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
                let o = cosine_similarity(&eu, &ev(&ortho)?).map_err(|e| e.to_string())?;
                ensure(o.abs() < 1e-9, || format!("orthogonal {o}"))?;
            }
        }
        Ok(format!("{pools} ranked pools; cosine identity/orthogonality/scale on 200 vectors"))
    })
}

fn criterion_8<'a>() -> Pin<Box<dyn Future<Output = Outcome> + 'a>> {
    Box::pin(async {
        use common::{args, cli, spawn_mock, write_config};
        let mock = spawn_mock().await;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = write_config(dir.path(), &mock).to_string_lossy().into_owned();
        let claims = common::fixtures().join("datasets/verdict_claims.jsonl").to_string_lossy().into_owned();
        let dataset = format!("fixture={claims}");
        let runs = |out: &Path, offline: bool| {
            let out = out.to_string_lossy().into_owned();
            let mut qg = vec!["eval-qg", "--config", &cfg, "--dataset", &dataset, "--baseline", "t5", "--out"];
            let qg_out = format!("{out}/qg");
            qg.push(&qg_out);
            let mut verdict = vec![
                "eval-verdict", "--config", &cfg, "--claims", &claims, "--method", "claim_only", "--method", "human",
                "--method", "t5", "--method", "llm", "--out",
            ];
            let v_out = format!("{out}/verdict");
            verdict.push(&v_out);
            if offline {
                qg.insert(0, "--offline");
                verdict.insert(0, "--offline");
            }
            (args(&qg), args(&verdict))
        };

        let cold = dir.path().join("cold");
        let (qg, verdict) = runs(&cold, false);
        for a in [qg, verdict] {
            let o = cli(a).await;
            ensure(o.code == 0, || format!("cold run failed: {}", o.stderr))?;
        }
        let live_calls = mock.count();
        ensure(live_calls > 0, || "cold run made no provider calls".into())?;

        let warm = dir.path().join("warm");
        let (qg, verdict) = runs(&warm, true);
        for a in [qg, verdict] {
            let o = cli(a).await;
            ensure(o.code == 0, || format!("replay failed: {}", o.stderr))?;
        }
        ensure(mock.count() == live_calls, || format!("replay made {} calls", mock.count() - live_calls))?;

        let mut compared = 0;
        for sub in ["qg", "verdict"] {
            for f in ["report.tsv", "report.txt", "results.json", "cells.tsv"] {
                let a = cold.join(sub).join(f);
                if !a.exists() {
                    continue;
                }
                let (x, y) = (std::fs::read(&a).map_err(|e| e.to_string())?, std::fs::read(warm.join(sub).join(f)).map_err(|e| e.to_string())?);
                ensure(x == y, || format!("{sub}/{f} differs on replay"))?;
                compared += 1;
            }
        }

        // the persisted snapshot alone reproduces the run
        let snapshot = warm.join("qg/config.snapshot.toml").to_string_lossy().into_owned();
        let again = dir.path().join("snap");
        let o = cli(args(&[
            "--offline", "eval-qg", "--config", &snapshot, "--dataset", &dataset, "--baseline", "t5", "--out",
            &again.to_string_lossy(),
        ]))
        .await;
        ensure(o.code == 0, || format!("snapshot replay failed: {}", o.stderr))?;
        for f in ["report.tsv", "report.txt", "results.json", "cells.tsv"] {
            let same = std::fs::read(cold.join("qg").join(f)).ok() == std::fs::read(again.join(f)).ok();
            ensure(same, || format!("snapshot replay changed {f}"))?;
        }
        ensure(mock.count() == live_calls, || "snapshot replay called providers".into())?;
        Ok(format!("{live_calls} live calls cold, 0 on replay; {compared} report files byte-identical; snapshot replay identical"))
    })
}

#[tokio::test(flavor = "multi_thread")]
async fn acceptance_criteria() {
    let results: Vec<(&str, Outcome)> = vec![
        ("1 metric oracle equivalence", criterion_1()),
        ("2 exhaustive majority vote", criterion_2()),
        ("3 dataset fidelity", criterion_3()),
        ("4 null handling", criterion_4()),
        ("5 end-to-end determinism", criterion_5().await),
        ("6 statistics oracles", criterion_6()),
        ("7 ranking contract", criterion_7().await),
        ("8 warm-cache replay", criterion_8().await),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(e) => {
                failed += 1;
                println!("criterion {name}: FAIL ({e})");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
