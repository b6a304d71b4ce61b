use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::ingest::parse_document_graph;
use crate::ontology::load_ontology;
use crate::schema::{validate_schema, Participant, Step};

const FIXTURES: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../fixtures/remote_teaching"
);

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{FIXTURES}/{name}")).unwrap()
}

fn teaching() -> (Schema, DocumentGraph) {
    let schema = Schema::from_json(&fixture("schema.json")).unwrap();
    let doc = parse_document_graph(&fixture("document.json")).unwrap();
    (schema, doc)
}

fn atom(p: &str) -> Atom {
    Atom::new(p, Vec::new())
}

fn program(observed: &[(&str, f64)], rules: Vec<GroundRule>) -> SoftLogicProgram {
    let mut obs: BTreeMap<Atom, f64> = observed.iter().map(|(a, t)| (atom(a), *t)).collect();
    obs.insert(Atom::falsum(), 0.0);
    SoftLogicProgram::from_rules(obs, rules)
}

fn implication(observed_a: f64) -> SoftLogicProgram {
    program(
        &[("A", observed_a)],
        vec![
            GroundRule::new(RuleKind::Step, vec![atom("A")], atom("C")),
            GroundRule::prior(atom("C")),
        ],
    )
}

#[test]
fn strong_rule_carries_the_body_truth() {
    let s = solve(&implication(1.0), &SolverConfig::default());
    assert!((s.truth(&atom("C")).unwrap() - 1.0).abs() < 1e-3);
    assert!(s.converged);
}

#[test]
fn prior_wins_without_evidence() {
    let s = solve(&implication(0.0), &SolverConfig::default());
    assert!(s.truth(&atom("C")).unwrap().abs() < 1e-3);
}

#[test]
fn rescale_examples() {
    assert_eq!(rescale_confidence(0.8, 3, 4), 0.8 * 3.0 / 4.0);
    assert!((rescale_confidence(0.8, 3, 4) - 0.6).abs() < 1e-15);
    assert_eq!(rescale_confidence(0.7, 5, 5), 0.7);
    assert_eq!(rescale_confidence(0.7, 0, 5), 0.0);
}

#[test]
fn combine_examples() {
    assert_eq!(combine_event_probability(&[0.5, 0.5]), 0.75);
    assert_eq!(combine_event_probability(&[1.0, 0.37]), 1.0);
    assert_eq!(combine_event_probability(&[]), 0.0);
    let direct = 1.0 - (1.0 - 0.3) * (1.0 - 0.4) * (1.0 - 0.2);
    assert!((combine_event_probability(&[0.3, 0.4, 0.2]) - direct).abs() < 1e-15);
    assert!((direct - 0.664).abs() < 1e-12);
}

#[test]
fn teaching_fixture_is_a_valid_schema() {
    let ont = load_ontology(&fixture("ontology.json")).unwrap();
    let (schema, _) = teaching();
    let report = validate_schema(&schema, &ont);
    assert!(report.errors().next().is_none(), "{:?}", report.issues);
}

#[test]
fn teaching_templates_match_golden_file() {
    let (schema, _) = teaching();
    let golden = String::from_utf8(fixture("rules.txt")).unwrap();
    assert_eq!(render_rule_templates(&schema), golden);
}

#[test]
fn teaching_full_match() {
    let (schema, doc) = teaching();
    let obs = flatten_document(&doc);
    let (result, diag) = match_schema(&schema, &doc, &obs, &InferenceConfig::default()).unwrap();
    assert!(result.theta_raw >= 0.99, "{result:?}");
    assert_eq!(result.matched_steps, 2);
    assert_eq!(result.step_bindings["Lecture"], "course-42.1");
    assert_eq!(result.bindings["professor"], "prof-kim");
    assert_eq!(result.bindings["ta"], "ta-lee");
    assert!(!result.truncated);
    assert!(diag.converged);
}

#[test]
fn teaching_best_grounding_has_documented_rule_weights() {
    let (schema, doc) = teaching();
    let obs = flatten_document(&doc);
    let p = ground_schema(&schema, &doc, &obs, &GroundingCaps::default()).unwrap();
    let best = &p.groundings[0];
    assert_eq!(best.steps, vec!["course-42.1", "course-42.2"]);
    let mut weights: Vec<f64> = best
        .step_atoms
        .iter()
        .chain(std::iter::once(&best.schema_atom))
        .map(|h| {
            p.rules
                .iter()
                .find(|r| &r.head == h && r.kind != RuleKind::Prior)
                .unwrap()
                .weight
        })
        .collect();
    assert_eq!(weights, vec![100.0, 100.0, 10.0]);
    weights.clear();
    for h in best
        .step_atoms
        .iter()
        .chain(std::iter::once(&best.schema_atom))
    {
        let prior = p
            .rules_of(RuleKind::Prior)
            .find(|r| &r.body[0] == h)
            .unwrap();
        assert_eq!(prior.weight, 1.0);
        assert_eq!(prior.head, Atom::falsum());
    }
    // The step rule body holds the event atom and one atom per filler.
    let lecture = p
        .rules
        .iter()
        .find(|r| r.head == best.step_atoms[0])
        .unwrap();
    assert_eq!(lecture.body.len(), 6);
    let seminar = p
        .rules
        .iter()
        .find(|r| r.head == best.step_atoms[1])
        .unwrap();
    assert_eq!(seminar.body.len(), 6);
}

#[test]
fn observed_and_targets_are_disjoint() {
    let (schema, doc) = teaching();
    let p = ground_schema(
        &schema,
        &doc,
        &flatten_document(&doc),
        &GroundingCaps::default(),
    )
    .unwrap();
    for t in &p.targets {
        assert!(!p.observed.contains_key(t));
    }
}

#[test]
fn one_step_structure() {
    let schema = Schema {
        id: "S".into(),
        name: "S".into(),
        steps: vec![Step {
            id: "s1".into(),
            event_type: "X".into(),
            fillers: BTreeMap::from([("R".into(), vec!["p".into()])]),
            ..Default::default()
        }],
        participants: vec![Participant {
            id: "p".into(),
            name: "P".into(),
            ..Default::default()
        }],
        ..Default::default()
    };
    let doc = parse_document_graph(
        br#"{"@id": "d", "events": [{"@id": "e", "@type": "X",
            "participants": [{"role": "R", "values": [{"entity": "x"}]}]}]}"#,
    )
    .unwrap();
    let p = ground_schema(
        &schema,
        &doc,
        &flatten_document(&doc),
        &GroundingCaps::default(),
    )
    .unwrap();
    assert!(p.targets.len() >= 2);
    for kind in [RuleKind::Step, RuleKind::Schema, RuleKind::Prior] {
        assert!(p.rules_of(kind).next().is_some());
    }
    assert_eq!(p.groundings[0].steps, vec!["e"]);
    assert_eq!(p.groundings[0].participants, vec!["x"]);
}

#[test]
fn no_compatible_events_binds_everything_to_unk() {
    let (schema, _) = teaching();
    let doc = parse_document_graph(
        br#"{"@id": "d", "events": [{"@id": "e", "@type": "Other",
            "participants": [{"role": "R", "values": [{"entity": "x"}]}]}]}"#,
    )
    .unwrap();
    let obs = flatten_document(&doc);
    let p = ground_schema(&schema, &doc, &obs, &GroundingCaps::default()).unwrap();
    assert_eq!(p.groundings.len(), 1);
    assert!(p.groundings[0].steps.iter().all(|e| e == UNK_EVENT));
    assert!(p.groundings[0].participants.iter().all(|e| e == UNK_ENTITY));
    let (r, _) = match_schema(&schema, &doc, &obs, &InferenceConfig::default()).unwrap();
    assert_eq!(r.matched_steps, 0);
    assert_eq!(r.theta, 0.0);
}

#[test]
fn cap_truncation_is_flagged() {
    let (schema, doc) = teaching();
    let caps = GroundingCaps {
        max_groundings: 3,
        ..Default::default()
    };
    let p = ground_schema(&schema, &doc, &flatten_document(&doc), &caps).unwrap();
    assert!(p.truncated);
    assert_eq!(p.groundings.len(), 3);
    let caps = GroundingCaps {
        max_groundings: 100_000,
        ..Default::default()
    };
    let full = ground_schema(&schema, &doc, &flatten_document(&doc), &caps).unwrap();
    assert!(!full.truncated);
    assert_eq!(p.groundings[0], full.groundings[0]);
}

#[test]
fn partial_match_predicts_the_missing_step() {
    let (schema, mut doc) = teaching();
    doc.events.retain(|e| e.event_type == "Teaching");
    let obs = flatten_document(&doc);
    let (r, _) = match_schema(&schema, &doc, &obs, &InferenceConfig::default()).unwrap();
    assert_eq!(r.matched_steps, 1);
    assert_eq!(r.step_bindings["Seminar"], UNK_EVENT);
    assert!(r.theta > 0.0 && r.theta < 0.5, "{r:?}");
    assert!((r.theta - rescale_confidence(r.theta_raw, 1, 2)).abs() < 1e-15);

    let inference = infer_document_exhaustive(
        std::slice::from_ref(&schema),
        &doc,
        &InferenceConfig::default(),
    )
    .unwrap();
    let predicted = &inference.results[0].predicted_events;
    assert_eq!(predicted.len(), 1);
    assert_eq!(predicted[0].event_type, "Communication");
    assert!((predicted[0].probability - r.theta).abs() < 1e-15);
}

#[test]
fn raising_confidence_never_lowers_the_schema_truth() {
    let (schema, doc) = teaching();
    let mut last = -1.0;
    for c in [0.0, 0.2, 0.5, 0.8, 0.95, 1.0] {
        let mut d = doc.clone();
        d.events[1].confidence = c;
        let obs = flatten_document(&d);
        let (r, _) = match_schema(&schema, &d, &obs, &InferenceConfig::default()).unwrap();
        assert!(r.theta >= last - 1e-9, "{c}: {} < {last}", r.theta);
        last = r.theta;
    }
}

#[test]
fn prefilter_does_not_change_results() {
    let (schema, doc) = teaching();
    let mut other = schema.clone();
    other.id = "Unrelated".into();
    for s in &mut other.steps {
        s.event_type = "Nothing".into();
    }
    let mut lecture_only = schema.clone();
    lecture_only.id = "Lecture_Only".into();
    lecture_only.steps.truncate(1);
    let library = vec![schema, other, lecture_only];
    let index = SchemaIndex::build(&library);
    let cfg = InferenceConfig::default();
    let filtered = infer_document(&library, &index, &doc, &cfg).unwrap();
    let all = infer_document_exhaustive(&library, &doc, &cfg).unwrap();
    assert_eq!(filtered.results.len(), 2);
    for r in &filtered.results {
        let same = all
            .results
            .iter()
            .find(|a| a.schema_id == r.schema_id)
            .unwrap();
        assert_eq!(r, same);
    }
    let skipped = all
        .results
        .iter()
        .find(|a| a.schema_id == "Unrelated")
        .unwrap();
    assert_eq!(skipped.theta, 0.0);
}

/// The same objective as a linear program: one slack per rule,
/// `s_r >= 0`, `s_r >= linear_r(x)`, minimize `sum w_r s_r`.
fn lp_optimum(p: &SoftLogicProgram) -> f64 {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: BTreeMap<&Atom, minilp::Variable> = p
        .targets
        .iter()
        .map(|a| (a, lp.add_var(0.0, (0.0, 1.0))))
        .collect();
    for rule in &p.rules {
        let s = lp.add_var(rule.weight, (0.0, f64::INFINITY));
        let mut expr = LinearExpr::empty();
        expr.add(s, 1.0);
        let mut rhs = -(rule.body.len() as f64 - 1.0);
        let mut coef: BTreeMap<&Atom, f64> = BTreeMap::new();
        for (a, sign) in rule
            .body
            .iter()
            .map(|a| (a, 1.0))
            .chain(std::iter::once((&rule.head, -1.0)))
        {
            match vars.get(a) {
                Some(_) => *coef.entry(a).or_insert(0.0) += sign,
                None => rhs += sign * p.observed[a],
            }
        }
        for (a, c) in coef {
            expr.add(vars[a], -c);
        }
        // s - sum c x >= rhs
        lp.add_constraint(expr, ComparisonOp::Ge, rhs);
    }
    lp.solve().unwrap().objective()
}

#[test]
fn two_step_chain_matches_the_lp_optimum() {
    let (schema, doc) = teaching();
    let p = ground_schema(
        &schema,
        &doc,
        &flatten_document(&doc),
        &GroundingCaps::default(),
    )
    .unwrap();
    let s = solve(&p, &SolverConfig::default());
    let lp = lp_optimum(&p);
    assert!(
        (s.objective - lp).abs() < 1e-3 * (1.0 + lp.abs()),
        "{} vs {lp}",
        s.objective
    );
    assert!(s.truth(&p.groundings[0].schema_atom).unwrap() >= 0.99);
}

fn random_program() -> impl Strategy<Value = SoftLogicProgram> {
    let n_targets = 1usize..6;
    let n_obs = 0usize..4;
    (n_targets, n_obs)
        .prop_flat_map(|(nt, no)| {
            let obs = prop::collection::vec(0.0f64..=1.0, no);
            let rule = (
                prop::collection::vec(0..nt + no, 1..4),
                0..nt + no + 1,
                prop::sample::select(vec![1.0, 10.0, 100.0, 0.5, 3.0]),
            );
            (Just(nt), obs, prop::collection::vec(rule, 1..10))
        })
        .prop_map(|(nt, obs, rules)| {
            let name = |i: usize| {
                if i < nt {
                    format!("T{i}")
                } else if i < nt + obs.len() {
                    format!("O{}", i - nt)
                } else {
                    FALSUM.to_string()
                }
            };
            let mut observed: BTreeMap<Atom, f64> = obs
                .iter()
                .enumerate()
                .map(|(i, t)| (atom(&format!("O{i}")), *t))
                .collect();
            observed.insert(Atom::falsum(), 0.0);
            let rules = rules
                .into_iter()
                .map(|(body, head, w)| GroundRule {
                    kind: RuleKind::Step,
                    body: body.into_iter().map(|i| atom(&name(i))).collect(),
                    head: atom(&name(head)),
                    weight: w,
                })
                .collect();
            SoftLogicProgram::from_rules(observed, rules)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_reaches_the_lp_optimum(p in random_program()) {
        let s = solve(&p, &SolverConfig { tol: 1e-9, max_iter: 5000 });
        let lp = lp_optimum(&p);
        prop_assert!(s.objective <= lp + 1e-6 * (1.0 + lp.abs()), "{} vs {}", s.objective, lp);
    }

    #[test]
    fn objective_never_increases(p in random_program()) {
        let s = solve(&p, &SolverConfig::default());
        for w in s.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for t in s.truths.values() {
            prop_assert!((0.0..=1.0).contains(t));
        }
        prop_assert!((objective_at(&p, &s.truths) - s.objective).abs() < 1e-9);
    }
}
