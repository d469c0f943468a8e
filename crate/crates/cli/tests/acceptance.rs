//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every check compares the library against
//! an oracle written independently in this file.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use chrono::{DateTime, TimeZone, Utc};
use chronoweave_core::corpus::{normalize_article, NewsArticle, RawArticle};
use chronoweave_core::evaluation::{confusion, evaluate, mcnemar_exact, score, GoldLabel};
use chronoweave_core::llm::{
    mock_completion_text, Backend, BackendFailure, LlmClient, LlmRequest, ResponseCache,
};
use chronoweave_core::parsing::{
    parse_judgments, parse_story, validate_story_citations, Label, RelevanceJudgment,
};
use chronoweave_core::prompting::{
    chunk_candidates, estimate_tokens, pack_greedy, prompt_overhead, render_prompt,
    snippet_estimates, ContextSnippet, PromptBundle, Template,
};
use chronoweave_core::retrieval::{score_candidate, select_candidates, RetrievalParams};
use chronoweave_core::{ArticleId, PromptVariant};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)*));
        }
    };
}

const CHIP_TARGET: &str = "https://www.techwire.example.com/2023/10/chip-export-ban-widened";
const MARKER: &str = "Background Story:";

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chronoweave"));
    c.env_remove("CHRONOWEAVE_API_KEY");
    c
}

// ---------------------------------------------------------------------------
// Independent oracles.

/// Lowercased runs of alphanumeric characters, two or more long.
fn oracle_terms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else {
            if cur.chars().count() >= 2 {
                out.push(cur.to_lowercase());
            }
            cur.clear();
        }
    }
    out
}

fn oracle_relevant(target_title: &str, context_title: &str) -> bool {
    let a: HashSet<String> = oracle_terms(target_title).into_iter().collect();
    let b: HashSet<String> = oracle_terms(context_title).into_iter().collect();
    a.iter().filter(|t| b.contains(*t)).count() >= 2
}

fn oracle_score(target: &NewsArticle, cand: &NewsArticle, halflife: f64) -> f64 {
    let bag = |a: &NewsArticle| -> BTreeSet<String> {
        let mut s: BTreeSet<String> = oracle_terms(&a.title).into_iter().collect();
        s.extend(oracle_terms(&a.body).into_iter().take(50));
        s
    };
    let (ta, tb) = (bag(target), bag(cand));
    let inter = ta.intersection(&tb).count();
    let union = ta.union(&tb).count();
    let j = if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    };
    let days = (target.published_at.timestamp() - cand.published_at.timestamp()) / 86_400;
    0.7 * j + 0.3 * (-(days as f64) / halflife).exp()
}

/// Two-sided exact binomial p-value with exact integer binomial coefficients.
fn oracle_mcnemar(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let mut choose: u128 = 1;
    let mut tail: u128 = 0;
    for i in 0..=k {
        if i > 0 {
            choose = choose * (n - i + 1) as u128 / i as u128;
        }
        tail += choose;
    }
    (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
}

// ---------------------------------------------------------------------------
// Fixtures.

fn article(url: &str, title: &str, body: &str, at: DateTime<Utc>) -> NewsArticle {
    normalize_article(&RawArticle {
        url: url.into(),
        title: title.into(),
        body: body.into(),
        published_at: at.to_rfc3339(),
        ..Default::default()
    })
    .expect("fixture article is valid")
}

const VOCAB: &[&str] = &[
    "chip", "export", "ban", "ai", "act", "port", "strike", "drought", "power", "prices", "eu",
    "deal", "vote", "talks", "market", "rules", "court", "ruling", "rain", "energy", "x", "of",
    "the", "Ölpreis", "état",
];

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.gen_range(lo..=hi);
    (0..n)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> Vec<NewsArticle> {
    let base = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
    (0..n)
        .map(|i| {
            let at = base + chrono::Duration::seconds(rng.gen_range(0..730 * 86_400));
            article(
                &format!("https://site{}.example.com/{i}", rng.gen_range(0..5)),
                &format!("{} {i}", words(rng, 1, 6)),
                &words(rng, 0, 80),
                at,
            )
        })
        .collect()
}

fn snippets_for(corpus: &[NewsArticle]) -> Vec<ContextSnippet> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, a)| ContextSnippet::from_article(a, i + 1))
        .collect()
}

fn five_snippet_bundle() -> PromptBundle {
    let target = article(
        "https://example.com/target",
        "EU reaches deal on AI Act",
        "Negotiators agreed.",
        Utc.with_ymd_and_hms(2023, 12, 9, 0, 0, 0).unwrap(),
    );
    let ctx: Vec<NewsArticle> = (1..=5)
        .map(|i| {
            article(
                &format!("https://example.com/c{i}"),
                &format!("Context story {i}"),
                "Body text.",
                Utc.with_ymd_and_hms(2023, i as u32, 1, 0, 0, 0).unwrap(),
            )
        })
        .collect();
    render_prompt(
        &target,
        &snippets_for(&ctx),
        PromptVariant::ExtendedTask,
        &Template::default_extended(),
    )
    .expect("bundle renders")
}

// ---------------------------------------------------------------------------
// Criteria.

fn ac1_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = data("synthetic_corpus.jsonl");
    let mut outputs: Vec<BTreeMap<&str, Vec<u8>>> = Vec::new();
    let mut slowest = Duration::ZERO;
    for run in 0..5 {
        let out = dir.path().join(format!("run{run}"));
        let cache = dir.path().join(format!("cache{run}"));
        let start = Instant::now();
        let o = cli()
            .args(["--backend", "mock", "--cache-dir"])
            .arg(&cache)
            .arg("--out")
            .arg(&out)
            .args(["timeline", "--target", CHIP_TARGET, "--corpus"])
            .arg(&corpus)
            .output()
            .map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        ensure!(
            o.status.success(),
            "run {run} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let mut files = BTreeMap::new();
        for f in ["timeline.json", "timeline.md", "timeline.html"] {
            files.insert(
                f,
                std::fs::read(out.join(f)).map_err(|e| format!("{f}: {e}"))?,
            );
        }
        outputs.push(files);
    }
    for (i, o) in outputs.iter().enumerate().skip(1) {
        ensure!(o == &outputs[0], "run {i} differs from run 0");
    }
    let tl: serde_json::Value =
        serde_json::from_slice(&outputs[0]["timeline.json"]).map_err(|e| e.to_string())?;
    let entries = tl["entries"].as_array().map(Vec::len).unwrap_or(0);
    ensure!(entries > 1, "timeline has only {entries} entries");
    ensure!(
        slowest < Duration::from_secs(5),
        "slowest run took {slowest:?}"
    );
    Ok(format!(
        "5 runs byte-identical, {entries} entries, slowest run {} ms",
        slowest.as_millis()
    ))
}

fn ac2_oracle_closure() -> Outcome {
    // The shipped gold must itself agree with the two-shared-term rule.
    let corpus = chronoweave_core::corpus::load_corpus(&data("synthetic_corpus.jsonl"))
        .map_err(|e| e.to_string())?
        .articles;
    let gold = chronoweave_core::evaluation::load_gold(&data("synthetic_gold.jsonl"))
        .map_err(|e| e.to_string())?;
    let title = |id: &ArticleId| corpus.iter().find(|a| &a.id == id).map(|a| a.title.clone());
    for g in &gold {
        let (t, c) = (title(&g.target_id), title(&g.context_id));
        ensure!(t.is_some() && c.is_some(), "gold pair not in corpus");
        let want = if oracle_relevant(&t.unwrap(), &c.unwrap()) {
            Label::Relevant
        } else {
            Label::Irrelevant
        };
        ensure!(
            g.label == want,
            "gold label disagrees with the rule for {}",
            g.context_id
        );
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let o = cli()
        .args(["--backend", "mock", "--cache-dir"])
        .arg(dir.path().join("cache"))
        .arg("--out")
        .arg(dir.path().join("ev"))
        .args(["eval", "--corpus"])
        .arg(data("synthetic_corpus.jsonl"))
        .arg("--gold")
        .arg(data("synthetic_gold.jsonl"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        o.status.success(),
        "eval failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text =
        std::fs::read_to_string(dir.path().join("ev/eval.json")).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for v in ["baseline", "extended"] {
        let r = &report[v];
        for (k, want) in [
            ("precision", 1.0),
            ("recall", 1.0),
            ("f1", 1.0),
            ("coverage", 1.0),
            ("parser_failure_rate", 0.0),
        ] {
            ensure!(
                r[k].as_f64() == Some(want),
                "{v}.{k} = {} (want {want})",
                r[k]
            );
        }
    }
    let c = &report["comparison"];
    ensure!(
        c["delta_f1"].as_f64() == Some(0.0),
        "delta_f1 = {}",
        c["delta_f1"]
    );
    Ok(format!(
        "{} gold pairs, both variants p=r=f1=1, coverage 1, parser failures 0",
        gold.len()
    ))
}

fn random_line(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(0..80);
    let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

fn well_formed(rng: &mut ChaCha8Rng, index: usize, label: Label) -> String {
    let word = match (label, rng.gen_range(0..3)) {
        (Label::Relevant, 0) => "relevant",
        (Label::Relevant, 1) => "Relevant",
        (Label::Relevant, _) => "RELEVANT",
        (Label::Irrelevant, 0) => "irrelevant",
        (Label::Irrelevant, 1) => "Irrelevant",
        (Label::Irrelevant, _) => "IRRELEVANT",
    };
    let sep = [".", ")", ":", "-"].choose(rng).unwrap();
    let pad = if rng.gen() { "  " } else { "" };
    let tail = match rng.gen_range(0..3) {
        0 => String::new(),
        1 => " - shared terms: 2".into(),
        _ => ": because it fits".into(),
    };
    format!("{pad}{index}{sep} {word}{tail}")
}

fn ac3_parser_fuzz() -> Outcome {
    let bundle = five_snippet_bundle();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut round_tripped = 0usize;
    for case in 0..10_000 {
        // Half the cases are raw random bytes; the rest splice well-formed
        // label lines between random lines, remembering the first per index.
        let mut expected: BTreeMap<usize, Label> = BTreeMap::new();
        let text = if case % 2 == 0 {
            let len = rng.gen_range(0..600);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            let mut lines = Vec::new();
            for _ in 0..rng.gen_range(0..12) {
                if rng.gen_bool(0.6) {
                    let i = rng.gen_range(1..=7);
                    let label = if rng.gen() {
                        Label::Relevant
                    } else {
                        Label::Irrelevant
                    };
                    if (1..=5).contains(&i) {
                        expected.entry(i).or_insert(label);
                    }
                    lines.push(well_formed(&mut rng, i, label));
                } else {
                    lines.push(random_line(&mut rng).replace(['\n', '\r'], " "));
                }
            }
            lines.join("\n")
        };
        let parsed = catch_unwind(AssertUnwindSafe(|| parse_judgments(&text, &bundle)));
        let (judgments, _) = parsed.map_err(|_| format!("case {case}: parser panicked"))?;
        ensure!(
            judgments.len() == 5,
            "case {case}: {} judgments",
            judgments.len()
        );
        let idx: Vec<usize> = judgments.iter().map(|j| j.source_index).collect();
        ensure!(idx == [1, 2, 3, 4, 5], "case {case}: indices {idx:?}");
        for j in &judgments {
            ensure!(
                j.context_id == bundle.snippets[j.source_index - 1].article_id,
                "case {case}: wrong context id"
            );
            match expected.get(&j.source_index) {
                Some(&want) => {
                    ensure!(
                        !j.is_defaulted() && j.label == want,
                        "case {case}: index {} lost its label",
                        j.source_index
                    );
                    round_tripped += 1;
                }
                None if case % 2 == 1 => {
                    ensure!(
                        j.is_defaulted(),
                        "case {case}: index {} labelled from nothing",
                        j.source_index
                    );
                }
                None => {
                    if !j.is_defaulted() {
                        let word = j.label.as_upper();
                        let backed = text.lines().any(|l| {
                            let t = l.trim_start();
                            t.starts_with(&j.source_index.to_string())
                                && t.to_uppercase().contains(word)
                        });
                        ensure!(
                            backed,
                            "case {case}: label for {} has no source line",
                            j.source_index
                        );
                    }
                }
            }
        }
    }
    Ok(format!(
        "10000 responses, 5 judgments each, {round_tripped} labels round-tripped"
    ))
}

fn ac4_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let id = |n: u32| ArticleId::parse(&format!("{n:032x}")).unwrap();
    for case in 0..200 {
        let target = id(0);
        let gold: Vec<GoldLabel> = (1..=50)
            .map(|i| GoldLabel {
                target_id: target.clone(),
                context_id: id(i),
                label: if rng.gen() {
                    Label::Relevant
                } else {
                    Label::Irrelevant
                },
            })
            .collect();
        let mut judgments: Vec<RelevanceJudgment> = Vec::new();
        for i in 1..=60 {
            if rng.gen_bool(0.85) {
                judgments.push(RelevanceJudgment {
                    target_id: target.clone(),
                    context_id: id(i),
                    label: if rng.gen() {
                        Label::Relevant
                    } else {
                        Label::Irrelevant
                    },
                    rationale: None,
                    source_index: i as usize,
                    bundle_id: "b".into(),
                });
            }
        }
        judgments.shuffle(&mut rng);

        let (mut tp, mut fp, mut fn_, mut tn, mut judged) = (0u64, 0u64, 0u64, 0u64, 0u64);
        for g in &gold {
            let hit = judgments
                .iter()
                .find(|j| j.target_id == g.target_id && j.context_id == g.context_id);
            if let Some(j) = hit {
                judged += 1;
                match (j.label, g.label) {
                    (Label::Relevant, Label::Relevant) => tp += 1,
                    (Label::Relevant, Label::Irrelevant) => fp += 1,
                    (Label::Irrelevant, Label::Relevant) => fn_ += 1,
                    (Label::Irrelevant, Label::Irrelevant) => tn += 1,
                }
            }
        }
        let c = confusion(&judgments, &gold).map_err(|e| e.to_string())?;
        ensure!(
            (c.tp, c.fp, c.fn_, c.tn) == (tp, fp, fn_, tn),
            "case {case}: counts differ"
        );
        ensure!(
            c.coverage == judged as f64 / 50.0,
            "case {case}: coverage {}",
            c.coverage
        );

        let p = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        let s = score(tp, fp, fn_);
        ensure!(
            (s.precision - p).abs() <= 1e-12
                && (s.recall - r).abs() <= 1e-12
                && (s.f1 - f).abs() <= 1e-12,
            "case {case}: scores differ"
        );
        let rep =
            evaluate(PromptVariant::BaselineOnly, &judgments, &gold).map_err(|e| e.to_string())?;
        ensure!(
            (rep.f1 - f).abs() <= 1e-12,
            "case {case}: report f1 differs"
        );
    }
    Ok("200 instances match the brute-force oracle".into())
}

fn ac5_retrieval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut compared = 0usize;
    for case in 0..100 {
        let corpus = random_corpus(&mut rng, 50);
        let target = corpus.choose(&mut rng).unwrap().clone();
        let params = RetrievalParams {
            window_days: rng.gen_range(1..800),
            max_candidates: rng.gen_range(1..40),
            halflife_days: rng.gen_range(1.0..120.0),
            ..RetrievalParams::default()
        };
        let earliest = target.published_at - chrono::Duration::days(params.window_days as i64);
        let mut exhaustive: Vec<(f64, ArticleId)> = corpus
            .iter()
            .filter(|a| {
                a.id != target.id
                    && a.published_at >= earliest
                    && a.published_at <= target.published_at
            })
            .map(|a| (oracle_score(&target, a, params.halflife_days), a.id.clone()))
            .collect();
        exhaustive.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        exhaustive.truncate(params.max_candidates);

        let got = select_candidates(&target.id, &corpus, &params).map_err(|e| e.to_string())?;
        let got_ids: Vec<&ArticleId> = got.entries.iter().map(|e| &e.article_id).collect();
        let want_ids: Vec<&ArticleId> = exhaustive.iter().map(|e| &e.1).collect();
        ensure!(got_ids == want_ids, "case {case}: id sequence differs");
        for (e, (s, _)) in got.entries.iter().zip(&exhaustive) {
            ensure!(
                (e.score - s).abs() <= 1e-6,
                "case {case}: score {} vs {s}",
                e.score
            );
        }
        for a in corpus
            .iter()
            .filter(|a| a.published_at <= target.published_at)
            .take(10)
        {
            let s = score_candidate(&target, a, &params).map_err(|e| e.to_string())?;
            ensure!(
                (s - oracle_score(&target, a, params.halflife_days)).abs() <= 1e-6,
                "case {case}: score_candidate"
            );
        }
        compared += got.entries.len();
    }

    let t0 = Utc.with_ymd_and_hms(2023, 10, 31, 0, 0, 0).unwrap();
    let target = article("https://example.com/t", "alpha beta", "", t0);
    let cand = article(
        "https://example.com/c",
        "alpha gamma",
        "",
        t0 - chrono::Duration::days(30),
    );
    let s =
        score_candidate(&target, &cand, &RetrievalParams::default()).map_err(|e| e.to_string())?;
    let closed = 0.7 / 3.0 + 0.3 * (-1f64).exp();
    ensure!(
        (s - closed).abs() <= 1e-6 && (s - 0.3437).abs() < 1e-4,
        "closed-form case scored {s}"
    );
    Ok(format!(
        "100 corpora, {compared} ranked ids match; closed-form case {s:.6}"
    ))
}

fn ac6_chunking() -> Outcome {
    let fixed =
        pack_greedy(&[30, 30, 30, 30], 100, 10).map_err(|i| format!("item {i} rejected"))?;
    let sizes: Vec<usize> = fixed.iter().map(|r| r.len()).collect();
    ensure!(sizes == [3, 1], "[30,30,30,30]/10/100 gave {sizes:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let template = Template::default_extended();
    let (mut ok, mut rejected) = (0usize, 0usize);
    for case in 0..1000 {
        let n = rng.gen_range(1..30);
        let corpus = random_corpus(&mut rng, n);
        let target = article(
            "https://example.com/target",
            &words(&mut rng, 1, 8),
            "",
            Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
        );
        let snippets = snippets_for(&corpus);
        let overhead = prompt_overhead(&target, PromptVariant::ExtendedTask, &template)
            .map_err(|e| e.to_string())?;
        let estimates = snippet_estimates(&snippets);
        let budget = overhead + rng.gen_range(0..600);
        let fits_alone = estimates.iter().all(|e| overhead + e <= budget);
        match chunk_candidates(&snippets, budget, overhead) {
            Err(_) => {
                ensure!(
                    !fits_alone,
                    "case {case}: rejected although every snippet fits alone"
                );
                rejected += 1;
            }
            Ok(batches) => {
                ensure!(fits_alone, "case {case}: accepted an oversized snippet");
                let mut seen = Vec::new();
                for batch in &batches {
                    ensure!(!batch.is_empty(), "case {case}: empty batch");
                    let sum: usize = snippet_estimates(batch).iter().sum();
                    ensure!(
                        overhead + sum <= budget,
                        "case {case}: batch estimate {} > {budget}",
                        overhead + sum
                    );
                    let bundle =
                        render_prompt(&target, batch, PromptVariant::ExtendedTask, &template)
                            .map_err(|e| e.to_string())?;
                    ensure!(
                        estimate_tokens(&bundle.rendered) <= budget,
                        "case {case}: rendered prompt {} > {budget}",
                        estimate_tokens(&bundle.rendered)
                    );
                    let idx: Vec<usize> = batch.iter().map(|s| s.index).collect();
                    ensure!(
                        idx == (1..=batch.len()).collect::<Vec<_>>(),
                        "case {case}: batch not renumbered"
                    );
                    seen.extend(batch.iter().map(|s| s.article_id.clone()));
                }
                let input: Vec<ArticleId> = snippets.iter().map(|s| s.article_id.clone()).collect();
                ensure!(
                    seen == input,
                    "case {case}: batches do not cover the input in order"
                );
                ok += 1;
            }
        }
    }
    ensure!(ok > 500, "only {ok} random cases were packable");
    Ok(format!(
        "[3,1] fixed case; 1000 random lists ({ok} packed, {rejected} rejected as oversized)"
    ))
}

fn ac7_variants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut stories = 0usize;
    for variant in PromptVariant::BOTH {
        let template = match variant {
            PromptVariant::BaselineOnly => Template::default_baseline(),
            PromptVariant::ExtendedTask => Template::default_extended(),
        };
        for case in 0..100 {
            let n = rng.gen_range(1..9);
            let mut corpus = random_corpus(&mut rng, n);
            // Hostile article text must not smuggle the marker into a baseline prompt.
            if case % 5 == 0 {
                corpus[0].title = format!("{MARKER} {}", corpus[0].title);
                corpus[0].body = format!("{MARKER}\n{}", corpus[0].body);
            }
            let target = article(
                "https://example.com/target",
                &words(&mut rng, 2, 8),
                &words(&mut rng, 0, 40),
                Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
            );
            let bundle = render_prompt(&target, &snippets_for(&corpus), variant, &template)
                .map_err(|e| e.to_string())?;
            let has_marker = bundle.rendered.contains(MARKER);
            ensure!(
                has_marker == (variant == PromptVariant::ExtendedTask),
                "{} case {case}: marker present = {has_marker}",
                variant.tag()
            );

            let response = mock_completion_text(&bundle.rendered)?;
            let (judgments, diag) = parse_judgments(&response, &bundle);
            ensure!(
                diag.is_clean(),
                "{} case {case}: mock response did not parse cleanly",
                variant.tag()
            );
            for j in &judgments {
                let snip = &bundle.snippets[j.source_index - 1];
                let want = if oracle_relevant(&target.title, &snip.title) {
                    Label::Relevant
                } else {
                    Label::Irrelevant
                };
                ensure!(
                    j.label == want,
                    "{} case {case}: mock label for {} disagrees",
                    variant.tag(),
                    j.source_index
                );
            }
            let story = parse_story(&response, &bundle).map_err(|e| e.to_string())?;
            match (variant, story) {
                (PromptVariant::BaselineOnly, None) => {}
                (PromptVariant::ExtendedTask, Some(story)) => {
                    let v =
                        validate_story_citations(&story, &judgments).map_err(|e| e.to_string())?;
                    ensure!(
                        v.citation_violations.is_empty(),
                        "case {case}: violations {:?}",
                        v.citation_violations
                    );
                    stories += 1;
                }
                (v, s) => {
                    return Err(format!(
                        "{} case {case}: story present = {}",
                        v.tag(),
                        s.is_some()
                    ))
                }
            }
        }
    }
    Ok(format!(
        "200 renders, marker iff extended, {stories} mock stories with zero citation violations"
    ))
}

struct CountingBackend {
    calls: AtomicUsize,
}

#[async_trait]
impl Backend for CountingBackend {
    fn tag(&self) -> &str {
        "counting"
    }

    async fn call(&self, request: &LlmRequest) -> Result<String, BackendFailure> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        tokio::time::sleep(Duration::from_millis(50)).await;
        Ok(format!("reply #{n} to {} chars", request.prompt.len()))
    }
}

fn ac8_single_flight() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let backend = Arc::new(CountingBackend {
        calls: AtomicUsize::new(0),
    });
    let cache = ResponseCache::open(dir.path()).map_err(|e| e.to_string())?;
    let client = Arc::new(LlmClient::new(backend.clone(), cache));
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let texts = rt.block_on(async {
        let tasks: Vec<_> = (0..16)
            .map(|_| {
                let client = client.clone();
                tokio::spawn(async move {
                    client
                        .complete(&LlmRequest::new("stub", "same prompt"))
                        .await
                })
            })
            .collect();
        let mut texts = Vec::new();
        for t in tasks {
            texts.push(
                t.await
                    .map_err(|e| e.to_string())?
                    .map_err(|e| e.to_string())?
                    .text,
            );
        }
        Ok::<_, String>(texts)
    })?;
    let calls = backend.calls.load(Ordering::SeqCst);
    ensure!(calls == 1, "{calls} backend calls");
    ensure!(
        texts.len() == 16 && texts.iter().all(|t| t == &texts[0]),
        "responses differ"
    );
    Ok("16 concurrent requests, 1 backend call, 16 identical responses".into())
}

fn ac9_mcnemar() -> Outcome {
    let p = mcnemar_exact(0, 5);
    let oracle = oracle_mcnemar(0, 5);
    ensure!(
        (p - 0.0625).abs() <= 1e-9 && (p - oracle).abs() <= 1e-9,
        "p(0,5) = {p}, oracle {oracle}"
    );
    for b in 0..40 {
        for c in 0..40 {
            let (got, want) = (mcnemar_exact(b, c), oracle_mcnemar(b, c));
            ensure!(
                (got - want).abs() <= 1e-12,
                "p({b},{c}) = {got}, oracle {want}"
            );
        }
    }
    Ok(format!(
        "p(0,5) = {p}; 1600 tables match the exact-binomial oracle"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "end-to-end determinism", ac1_determinism),
        ("AC2", "oracle closure", ac2_oracle_closure),
        ("AC3", "parser totality fuzz", ac3_parser_fuzz),
        ("AC4", "metric oracle equivalence", ac4_metrics),
        ("AC5", "retrieval oracle equivalence", ac5_retrieval),
        ("AC6", "chunking safety", ac6_chunking),
        ("AC7", "variant contract", ac7_variants),
        ("AC8", "cache single-flight", ac8_single_flight),
        ("AC9", "McNemar check", ac9_mcnemar),
    ];
    let mut failed = 0;
    for (tag, name, check) in criteria {
        let outcome = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("{tag} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("{tag} FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
