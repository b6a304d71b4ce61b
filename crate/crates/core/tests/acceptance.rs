//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line prints even when a
//! criterion fails. A failure listed in `DOCUMENTED` is reported as FAIL
//! but does not fail the run; any other failure does.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemakit::inference::{
    combine_event_probability, flatten_document, ground_schema, match_schema, rescale_confidence,
    solve, InferenceConfig,
};
use schemakit::ingest::{
    build_transactions, event_multiset, load_corpus, parse_document_graph, write_transactions,
    EventMultiset, Transaction,
};
use schemakit::intrusion::{
    baselines_for_p, jaccard, library_weight, random_baselines, Baselines, ParticipantMap,
};
use schemakit::metrics::{coverage, gold_rank, mrr, ndcg, recall_at_k, sim, Stratum};
use schemakit::mining::{brute_force_frequent, mine_frequent, write_itemsets, MiningConfig};
use schemakit::ontology::{load_ontology, Ontology};
use schemakit::schema::{
    load_library, schema_from_skeleton, validate_schema, write_skeletons, Participant, Schema,
};
use schemakit::skeleton::{
    build_skeletons, default_scorer, score_sequence, BuilderConfig, TableScorer,
};
use schemakit::synth::{synthesize, SynthConfig};

/// Criteria that cannot pass as stated, with the reason printed next to
/// their FAIL line.
const DOCUMENTED: &[(u32, &str)] = &[(
    6,
    "0.8 * 3 / 4 in binary64 is a rounding tie that resolves to 0.6000000000000001, one ulp above 0.6",
)];

type Outcome = Result<Vec<String>, String>;

type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn ontology() -> Ontology {
    load_ontology(&std::fs::read(fixture("ontology.json")).unwrap()).unwrap()
}

fn schema_file(rel: &str) -> Schema {
    Schema::from_json(&std::fs::read(fixture(rel)).unwrap()).unwrap()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn sim_golden() -> Outcome {
    let doc = EventMultiset::from_types("d", ["Infect", "Infect", "Vaccinate"]);
    let schema: BTreeSet<&str> = ["Infect", "Die"].into_iter().collect();
    let start = Instant::now();
    let got = sim(&doc, &schema);
    let elapsed = start.elapsed();
    check(got == 2.0 / 3.0, format!("sim = {got}, expected 2/3"))?;
    check(
        elapsed < Duration::from_millis(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(vec![format!("sim = {got} in {elapsed:?}")])
}

fn random_transactions(rng: &mut ChaCha8Rng) -> Vec<Transaction> {
    let n_types = rng.random_range(1..=8);
    let n_tx = rng.random_range(1..=200);
    let density = rng.random_range(0.1..0.9);
    (0..n_tx)
        .map(|i| Transaction {
            doc_id: format!("d{i}"),
            chain_id: "c".into(),
            items: (0..n_types)
                .filter(|_| rng.random_bool(density))
                .map(|t| format!("E{t}"))
                .collect(),
        })
        .collect()
}

fn fp_growth_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf9);
    let start = Instant::now();
    let mut nonempty = 0;
    for case in 0..1000 {
        let tx = random_transactions(&mut rng);
        let min_items = rng.random_range(1..=3);
        let cfg = MiningConfig {
            min_support: rng.random_range(1..=tx.len().max(1)),
            min_items,
            max_items: rng.random_range(min_items..=8),
        };
        let fast = mine_frequent(&tx, &cfg);
        let slow = brute_force_frequent(&tx, &cfg).map_err(|e| e.to_string())?;
        check(
            fast == slow,
            format!("corpus {case} with {cfg:?} disagrees"),
        )?;
        nonempty += usize::from(!fast.is_empty());
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        format!("took {elapsed:?}"),
    )?;
    Ok(vec![format!(
        "1000 corpora equal ({nonempty} with itemsets) in {elapsed:?}"
    )])
}

fn score_aggregation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c);
    let ids: Vec<String> = (0..10).map(|i| format!("E{i}")).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let rows: Vec<Vec<f64>> = (0..ids.len())
            .map(|_| {
                (0..ids.len())
                    .map(|_| rng.random_range(-5.0..5.0))
                    .collect()
            })
            .collect();
        let table = TableScorer::new(ids.clone(), rows.clone()).map_err(|e| e.to_string())?;
        let n = rng.random_range(2..=8);
        let picked: Vec<usize> = (0..ids.len())
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, n)
            .copied()
            .collect();
        let seq: Vec<&str> = picked.iter().map(|&i| ids[i].as_str()).collect();
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (a, &i) in picked.iter().enumerate() {
            for &j in &picked[a + 1..] {
                total += rows[i][j];
                pairs += 1;
            }
        }
        let oracle = total / pairs as f64;
        let got = score_sequence(&seq, &table).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle).abs());
        check(
            (got - oracle).abs() <= 1e-12,
            format!("{seq:?}: {got} vs {oracle}"),
        )?;
        if n == 2 {
            check(
                got == rows[picked[0]][picked[1]],
                format!("N=2 {seq:?}: {got} is not cscore"),
            )?;
        }
    }
    Ok(vec![format!("500 sequences, max deviation {worst:e}")])
}

fn participant(id: &str, types: &[&str]) -> Participant {
    Participant {
        id: id.into(),
        name: id.into(),
        coarse_types: set(types),
        ..Participant::default()
    }
}

fn with_participants(id: &str, participants: Vec<Participant>) -> Schema {
    Schema {
        id: id.into(),
        name: id.into(),
        participants,
        ..Schema::default()
    }
}

fn map(pairs: &[(&str, &str)]) -> ParticipantMap {
    pairs
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

fn intrusion_weights() -> Outcome {
    let src = with_participants(
        "src",
        vec![
            participant("a", &["per", "org"]),
            participant("b", &["loc", "gpe", "fac"]),
        ],
    );
    let host = with_participants(
        "host",
        vec![
            participant("x", &["per"]),
            participant("y", &["gpe"]),
            participant("z", &[]),
        ],
    );
    // J({per,org},{per}) = 1/2, J({loc,gpe,fac},{gpe}) = 1/3.
    let w = library_weight(&map(&[("a", "x"), ("b", "y")]), &src, &host);
    let expected = (0.5f64 * (1.0 / 3.0)).sqrt();
    check(
        (w - (1.0f64 / 6.0).sqrt()).abs() < 1e-12,
        format!("weight {w}, expected sqrt(1/6)"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x17);
    let pool = [
        "per", "org", "loc", "gpe", "fac", "veh", "wea", "com", "abs",
    ];
    for _ in 0..1000 {
        let mut shuffled = pool;
        shuffled.shuffle(&mut rng);
        let cut = rng.random_range(1..pool.len());
        let (left, right) = shuffled.split_at(cut);
        let a = participant("a", &left[..rng.random_range(1..=left.len())]);
        let b = participant("b", &right[..rng.random_range(1..=right.len())]);
        let s = with_participants("s", vec![participant("o", &["per"]), a]);
        let h = with_participants("h", vec![participant("p", &["per"]), b]);
        let w = library_weight(&map(&[("o", "p"), ("a", "b")]), &s, &h);
        check(w == 0.0, format!("disjoint pair weighs {w}"))?;
    }
    check(
        jaccard::<String>(&BTreeSet::new(), &BTreeSet::new()) == 0.0,
        "J(empty, empty) != 0",
    )?;
    let to_empty = library_weight(&map(&[("a", "z")]), &src, &host);
    check(
        to_empty == 0.0,
        format!("mapping onto an untyped participant weighs {to_empty}"),
    )?;
    Ok(vec![format!(
        "sqrt(1/6) case = {w} (|diff from sqrt(1/2 * 1/3)| = {:e}), 1000 disjoint pairs weigh 0",
        (w - expected).abs()
    )])
}

fn monte_carlo(host_steps: &[usize], draws: usize, rng: &mut ChaCha8Rng) -> Baselines {
    let (mut correct, mut at_least) = (0usize, [0usize; 3]);
    for _ in 0..draws {
        let k = *host_steps.choose(rng).unwrap();
        // Option 0 is the intruder.
        let hits = (0..3).filter(|_| rng.random_range(0..=k) == 0).count();
        correct += hits;
        for (n, slot) in at_least.iter_mut().enumerate() {
            *slot += usize::from(hits > n);
        }
    }
    let d = draws as f64;
    Baselines {
        random: correct as f64 / (3.0 * d),
        random_1: at_least[0] as f64 / d,
        random_2: at_least[1] as f64 / d,
        random_3: at_least[2] as f64 / d,
    }
}

fn random_baseline_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xba5e);
    let host_steps: Vec<usize> = (0..300).map(|_| rng.random_range(1..=12)).collect();
    let analytic = random_baselines(&host_steps);
    let mc = monte_carlo(&host_steps, 1_000_000, &mut rng);
    let pairs = [
        ("random", analytic.random, mc.random),
        ("random_1", analytic.random_1, mc.random_1),
        ("random_2", analytic.random_2, mc.random_2),
        ("random_3", analytic.random_3, mc.random_3),
    ];
    let mut worst: f64 = 0.0;
    for (name, a, m) in pairs {
        worst = worst.max((a - m).abs());
        check(
            (a - m).abs() <= 0.005,
            format!("{name}: analytic {a} vs simulated {m}"),
        )?;
    }
    for _ in 0..2000 {
        let n = rng.random_range(1..=100);
        let steps: Vec<usize> = (0..n).map(|_| rng.random_range(1..=30)).collect();
        let b = random_baselines(&steps);
        check(
            b.random_1 >= b.random && b.random >= b.random_2 && b.random_2 >= b.random_3,
            format!("ordering broken for {steps:?}: {b:?}"),
        )?;
    }
    let anchor = baselines_for_p(0.16).random_1;
    check(
        (anchor - 0.407296).abs() < 1e-12,
        format!("constant p = 0.16 gives random_1 = {anchor}"),
    )?;
    Ok(vec![
        format!("max |analytic - Monte Carlo| = {worst:.5} over 10^6 draws"),
        format!("constant p = 0.16: random_1 = {anchor:.6}"),
    ])
}

/// Documents of the shipped synthetic corpus matched against their gold
/// schema, plus the two-step teaching fixture.
fn desk_fixtures() -> Vec<(String, Schema, schemakit::ingest::DocumentGraph)> {
    let teaching = schema_file("remote_teaching/schema.json");
    let doc =
        parse_document_graph(&std::fs::read(fixture("remote_teaching/document.json")).unwrap())
            .unwrap();
    let mut out = vec![("remote_teaching".to_string(), teaching, doc)];
    let library: BTreeMap<String, Schema> = load_library(&fixture("synthetic/library"))
        .unwrap()
        .into_iter()
        .map(|s| (s.id.clone(), s))
        .collect();
    let gold: BTreeMap<String, String> = std::fs::read_to_string(fixture("synthetic/gold.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(d, s)| (d.to_string(), s.to_string()))
        .collect();
    for doc in load_corpus(&fixture("synthetic/corpus.jsonl"))
        .unwrap()
        .into_iter()
        .take(5)
    {
        let schema = library[&gold[&doc.doc_id]].clone();
        out.push((doc.doc_id.clone(), schema, doc));
    }
    out
}

fn solver() -> Outcome {
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    let config = InferenceConfig::default();
    for (name, schema, doc) in desk_fixtures() {
        let observed = flatten_document(&doc);
        let start = Instant::now();
        let (result, _) =
            match_schema(&schema, &doc, &observed, &config).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        if elapsed >= Duration::from_secs(1) {
            failures.push(format!("{name} took {elapsed:?}"));
        }
        if name == "remote_teaching" {
            if result.theta_raw < 0.99 {
                failures.push(format!(
                    "teaching schema atom solved to {}",
                    result.theta_raw
                ));
            }
            notes.push(format!("teaching schema atom = {:.6}", result.theta_raw));
        }
        let program =
            ground_schema(&schema, &doc, &observed, &config.caps).map_err(|e| e.to_string())?;
        let solution = solve(&program, &config.solver);
        if let Some(w) = solution.history.windows(2).find(|w| w[1] > w[0]) {
            failures.push(format!("{name}: objective rose from {} to {}", w[0], w[1]));
        }
        notes.push(format!(
            "{name}: {elapsed:?}, {} objective values non-increasing",
            solution.history.len()
        ));
    }
    let combined = combine_event_probability(&[0.5, 0.5]);
    if combined != 0.75 {
        failures.push(format!("combine([0.5, 0.5]) = {combined}"));
    }
    let rescaled = rescale_confidence(0.8, 3, 4);
    notes.push(format!("rescale(0.8, 3, 4) = {rescaled:?}"));
    if rescaled != 0.8 * 3.0 / 4.0 {
        failures.push(format!(
            "rescale(0.8, 3, 4) = {rescaled:?} does not follow theta * matched / total"
        ));
    }
    if rescaled != 0.6 {
        failures.push(format!(
            "rescale(0.8, 3, 4) = {rescaled:?}, not exactly 0.6"
        ));
    }
    if failures.is_empty() {
        Ok(notes)
    } else {
        notes.extend(failures.iter().map(|f| format!("failed: {f}")));
        Err(notes.join("\n    "))
    }
}

/// Double-loop Cov@t over `docs`, independent of the library code.
fn naive_coverage(
    docs: &[EventMultiset],
    library: &[Schema],
    t: f64,
    stratum: Stratum,
) -> (usize, f64) {
    let mut members = 0;
    let mut covered = 0;
    for doc in docs {
        let n: usize = doc.counts.values().sum();
        if n < stratum.lo || stratum.hi.is_some_and(|hi| n >= hi) {
            continue;
        }
        members += 1;
        let mut best: f64 = 0.0;
        for schema in library {
            let mut hit = 0;
            for (ty, count) in &doc.counts {
                if schema.steps.iter().any(|s| &s.event_type == ty) {
                    hit += count;
                }
            }
            best = best.max(hit as f64 / n as f64);
        }
        if best >= t {
            covered += 1;
        }
    }
    let cov = if members == 0 {
        0.0
    } else {
        covered as f64 / members as f64
    };
    (members, cov)
}

fn coverage_properties() -> Outcome {
    let start = Instant::now();
    let data = synthesize(&ontology(), &SynthConfig::default());
    let docs: Vec<EventMultiset> = data.corpus.iter().map(event_multiset).collect();
    check(
        docs.len() == 1000 && data.library.len() == 232,
        "unexpected synthetic sizes",
    )?;
    let small = &data.library[..82];
    let thresholds = [0.5, 0.7, 0.9];
    let strata: Vec<Stratum> = ["1:5", "5:10", "10:"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let a = coverage(&docs, small, &thresholds, &strata).map_err(|e| e.to_string())?;
    let b = coverage(&docs, &data.library, &thresholds, &strata).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for (lib, report) in [(small, &a), (&data.library[..], &b)] {
        for row in report.strata.iter().chain([&report.overall]) {
            for (i, &t) in thresholds.iter().enumerate() {
                let (n, cov) = naive_coverage(&docs, lib, t, row.stratum);
                check(
                    n == row.n_docs && cov == row.coverage[i],
                    format!(
                        "{} schemas, stratum {}, t={t}: {} vs oracle {cov}",
                        lib.len(),
                        row.stratum,
                        row.coverage[i]
                    ),
                )?;
            }
            check(
                row.coverage[2] <= row.coverage[1] && row.coverage[1] <= row.coverage[0],
                format!(
                    "stratum {} not monotone in t: {:?}",
                    row.stratum, row.coverage
                ),
            )?;
        }
    }
    for (ra, rb) in a
        .strata
        .iter()
        .chain([&a.overall])
        .zip(b.strata.iter().chain([&b.overall]))
    {
        for ((t, small), large) in thresholds.iter().zip(&ra.coverage).zip(&rb.coverage) {
            check(
                large >= small,
                format!(
                    "stratum {} t={t}: 232 schemas {large} < 82 schemas {small}",
                    ra.stratum
                ),
            )?;
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(10),
        format!("took {elapsed:?}"),
    )?;
    notes.push(format!(
        "Cov@0.5/0.7/0.9 with 82 schemas {:?}, with 232 {:?}",
        a.overall.coverage, b.overall.coverage
    ));
    notes.push(format!("{elapsed:?}"));
    Ok(notes)
}

fn ranking_metrics() -> Outcome {
    let ranked = ["a", "b", "c", "d", "e"];
    let gold = set(&["b", "d"]);
    let got = ndcg(&ranked, &gold).ok_or("nDCG undefined")?;
    // (1/log2 3 + 1/log2 5) / (1 + 1/log2 3)
    let hand = 0.6509209298071326;
    check((got - hand).abs() < 1e-9, format!("nDCG {got} vs {hand}"))?;
    let ranks = [1, 2, 4];
    let m = mrr(&ranks);
    check((m - 7.0 / 12.0).abs() < 1e-9, format!("MRR {m}"))?;
    for (k, want) in [
        (1, 1.0 / 3.0),
        (2, 2.0 / 3.0),
        (3, 2.0 / 3.0),
        (4, 1.0),
        (10, 1.0),
    ] {
        let r = recall_at_k(&ranks, k);
        check((r - want).abs() < 1e-9, format!("R@{k} {r} vs {want}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x82);
    let ids: Vec<String> = (1..=82).map(|i| format!("syn-{i:03}")).collect();
    let trials = 20_000;
    let mut ranks = Vec::with_capacity(trials);
    for _ in 0..trials {
        let gold: BTreeSet<String> = [ids.choose(&mut rng).unwrap().clone()].into();
        let mut order: Vec<(String, f64)> = ids.iter().map(|id| (id.clone(), 0.0)).collect();
        order.shuffle(&mut rng);
        ranks.push(gold_rank(&order, &gold).ok_or("gold missing")?);
    }
    let r10 = recall_at_k(&ranks, 10);
    let p = 10.0 / 82.0;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    check(
        (r10 - p).abs() <= 4.0 * sigma,
        format!("shuffled R@10 {r10} vs {p} (sigma {sigma})"),
    )?;
    Ok(vec![format!(
        "nDCG {got}, MRR {m}, shuffled R@10 {r10:.4} vs 10/82 = {p:.4} (4 sigma {:.4})",
        4.0 * sigma
    )])
}

fn pipeline_run(ont: &Ontology) -> Result<Vec<String>, String> {
    let corpus = load_corpus(&fixture("synthetic/corpus.jsonl")).map_err(|e| e.to_string())?;
    let transactions: Vec<Transaction> = corpus.iter().flat_map(build_transactions).collect();
    let itemsets = mine_frequent(&transactions, &MiningConfig::default());
    let universe: Vec<&str> = ont.event_type_ids().collect();
    let scorer = default_scorer(&transactions).map_err(|e| e.to_string())?;
    let skeletons = build_skeletons(&itemsets, &universe, &scorer, &BuilderConfig::default())
        .map_err(|e| e.to_string())?;
    check(!skeletons.is_empty(), "no skeletons built")?;
    let mut out = vec![
        write_transactions(&transactions),
        write_itemsets(&itemsets),
        write_skeletons(&skeletons),
    ];
    for sk in &skeletons {
        let schema = schema_from_skeleton(sk, ont).map_err(|e| e.to_string())?;
        let report = validate_schema(&schema, ont);
        check(
            report.errors().count() == 0,
            format!("{} does not validate: {:?}", sk.id, report.issues),
        )?;
        out.push(String::from_utf8(schema.to_json()).unwrap());
    }
    Ok(out)
}

fn pipeline_determinism() -> Outcome {
    let ont = ontology();
    let start = Instant::now();
    let a = pipeline_run(&ont)?;
    let b = pipeline_run(&ont)?;
    let elapsed = start.elapsed();
    check(a == b, "two runs differ")?;
    check(
        elapsed < Duration::from_secs(60),
        format!("took {elapsed:?}"),
    )?;
    Ok(vec![format!(
        "{} artifacts identical across two runs in {elapsed:?}",
        a.len()
    )])
}

fn fixture_validation() -> Outcome {
    let ont = ontology();
    let good = validate_schema(&schema_file("schemas/cook_meal.json"), &ont);
    check(
        good.ok && good.errors().count() == 0,
        format!("cook_meal: {:?}", good.issues),
    )?;
    let cycle = validate_schema(&schema_file("invalid/cook_meal_cycle.json"), &ont);
    let errors: Vec<_> = cycle.errors().collect();
    check(
        errors.len() == 1
            && errors[0]
                .message
                .contains("ordering cycle among steps [buy, carry, prepare]"),
        format!("cycle fixture: {errors:?}"),
    )?;
    let conflict = validate_schema(&schema_file("invalid/cook_type_conflict.json"), &ont);
    let errors: Vec<_> = conflict.errors().collect();
    check(
        errors.len() == 1
            && errors[0].location == "prepare"
            && errors[0].message.contains("role `ManufacturerAssembler`")
            && errors[0].message.contains("`Cook`"),
        format!("type conflict fixture: {errors:?}"),
    )?;
    Ok(vec![
        "cook_meal: 0 errors".into(),
        format!("cycle: {}", cycle.errors().next().unwrap().message),
        format!("conflict: {}", conflict.errors().next().unwrap().message),
    ])
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "sim golden value", sim_golden),
        (2, "FP-growth equals brute force", fp_growth_oracle),
        (3, "sequence score aggregation", score_aggregation),
        (4, "intrusion weights", intrusion_weights),
        (5, "random baselines", random_baseline_oracle),
        (6, "soft-logic solver", solver),
        (7, "coverage properties", coverage_properties),
        (8, "ranking metrics", ranking_metrics),
        (9, "pipeline determinism", pipeline_determinism),
        (10, "fixture validation", fixture_validation),
    ];
    let mut unexpected = 0;
    for (n, name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(notes) => {
                println!("PASS [{n}] {name} ({elapsed:.2?})");
                for note in notes {
                    println!("    {note}");
                }
            }
            Err(why) => {
                let documented = DOCUMENTED.iter().find(|(m, _)| *m == n);
                println!("FAIL [{n}] {name} ({elapsed:.2?})");
                println!("    {why}");
                match documented {
                    Some((_, reason)) => println!("    known: {reason}"),
                    None => unexpected += 1,
                }
            }
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criterion(s) failed unexpectedly");
        std::process::exit(1);
    }
}
