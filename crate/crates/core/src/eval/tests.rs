use super::*;
use crate::corpus::EmbedderConfig;
use crate::extraction::{DeonticModality, ExtractionConfig};
use crate::fixture::{generate_fixture, generate_kg_fixture, FixtureSpec, GapMix};
use crate::gap::Pipeline;
use crate::retrieval::{Index, RetrievalConfig};
use crate::rkg::GraphConfig;
use rand::rngs::StdRng;
use GapClass::{Compliant as C, FullGap as F, PartialGap as P};

fn pairs(spec: &[(GapClass, GapClass)]) -> Vec<LabeledPair> {
    spec.iter()
        .enumerate()
        .map(|(i, (g, p))| LabeledPair::new(format!("i{i}"), *g, *p))
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn perfect_predictions() {
    let m = classification_metrics(&pairs(&[(C, C), (P, P), (F, F), (F, F)])).unwrap();
    for c in &m.per_class {
        assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
    }
    assert_eq!(m.macro_f1, 1.0);
    assert_eq!(m.accuracy, 1.0);
}

#[test]
fn single_wrong_class() {
    let m = classification_metrics(&pairs(&[(C, F), (P, F), (C, F)])).unwrap();
    assert_eq!(m.class(F).precision, 0.0);
    assert!(m.class(F).zero_support);
    assert_eq!(m.class(C).recall, 0.0);
    assert_eq!(m.class(P).recall, 0.0);
    assert_eq!(m.macro_f1, 0.0);
}

#[test]
fn ten_pair_confusion_oracle() {
    let m = classification_metrics(&pairs(&[
        (C, C),
        (C, C),
        (C, P),
        (C, F),
        (P, P),
        (P, P),
        (P, C),
        (F, F),
        (F, P),
        (F, F),
    ]))
    .unwrap();
    assert_eq!(m.confusion, [[2, 1, 1], [1, 2, 0], [0, 1, 2]]);
    assert!(close(m.class(C).precision, 2.0 / 3.0));
    assert!(close(m.class(C).recall, 0.5));
    assert!(close(m.class(C).f1, 4.0 / 7.0));
    assert!(close(m.class(P).precision, 0.5));
    assert!(close(m.class(P).recall, 2.0 / 3.0));
    assert!(close(m.class(P).f1, 4.0 / 7.0));
    assert!(close(m.class(F).f1, 2.0 / 3.0));
    assert!(close(m.macro_precision, 11.0 / 18.0));
    assert!(close(m.macro_recall, 11.0 / 18.0));
    assert!(close(m.macro_f1, 38.0 / 63.0));
    assert!(close(m.accuracy, 0.6));
    assert!(m.render().contains("macro avg"));
}

#[test]
fn empty_pairs_rejected() {
    assert!(matches!(classification_metrics(&[]), Err(Error::EmptyInput(_))));
}

#[test]
fn bootstrap_edge_cases() {
    let a: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
    let same = paired_bootstrap(&a, &a, 2000, 1, Execution::Sequential).unwrap();
    assert_eq!(same.p_value, 1.0);
    assert_eq!(same.delta_observed, 0.0);
    let worse: Vec<f64> = a.iter().map(|x| x - 0.5).collect();
    assert_eq!(
        paired_bootstrap(&a, &worse, 2000, 1, Execution::Sequential)
            .unwrap()
            .p_value,
        0.0
    );
    assert!(matches!(
        paired_bootstrap(&a, &a[1..], 2000, 1, Execution::Sequential),
        Err(Error::LengthMismatch { .. })
    ));
    assert!(paired_bootstrap(&a, &a, 999, 1, Execution::Sequential).is_err());
}

#[test]
fn bootstrap_matches_independent_monte_carlo() {
    let a: Vec<f64> = (0..50).map(|i| 0.5 + 0.3 * (i as f64 * 0.9).cos()).collect();
    let b: Vec<f64> = (0..50).map(|i| a[i] - 0.05 - 0.5 * (1.7 * i as f64).sin()).collect();
    let got = paired_bootstrap(&a, &b, 10_000, 42, Execution::default()).unwrap();
    // Plain resampling loop on a different generator and seed.
    let mut rng = StdRng::seed_from_u64(7);
    let trials = 100_000;
    let mut hits = 0;
    for _ in 0..trials {
        let (mut sa, mut sb) = (0.0, 0.0);
        for _ in 0..a.len() {
            let j = rng.gen_range(0..a.len());
            sa += a[j];
            sb += b[j];
        }
        if sb >= sa {
            hits += 1;
        }
    }
    let oracle = hits as f64 / trials as f64;
    assert!(oracle > 0.02 && oracle < 0.5, "{oracle}");
    assert!((got.p_value - oracle).abs() <= 0.02, "{} vs {oracle}", got.p_value);
}

#[test]
fn bootstrap_is_mode_independent() {
    let a: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
    let b: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
    let s = paired_bootstrap(&a, &b, 3000, 9, Execution::Sequential).unwrap();
    let p = paired_bootstrap(&a, &b, 3000, 9, Execution::Parallel).unwrap();
    assert_eq!(s, p);
}

fn scored(xs: &[(f64, GapClass)]) -> Vec<ScoredItem> {
    xs.iter()
        .enumerate()
        .map(|(i, (a, g))| ScoredItem {
            item_id: format!("o{i}"),
            alignment: *a,
            gold: *g,
        })
        .collect()
}

#[test]
fn sweep_boundaries_and_monotone_flags() {
    let cfg = GapConfig::default();
    let items = scored(&[(0.9, C), (0.7, C), (0.5, P), (0.4, P), (0.2, F), (0.36, F)]);
    let rows = threshold_sweep(&items, &[0.36, 0.45, 0.6, 0.7, 1.01], &cfg).unwrap();
    // Below every alignment at or above delta_full: only sub-floor items flag.
    assert_eq!(rows[0].flagged, 1);
    assert_eq!(rows.last().unwrap().flagged, items.len());
    assert_eq!(rows.last().unwrap().metrics.class(C).predicted, 0);
    assert!(rows.windows(2).all(|w| w[0].flagged <= w[1].flagged));
    assert_eq!(rows[2].metrics.accuracy, 5.0 / 6.0);
    assert!(threshold_sweep(&items, &[0.6, 0.45], &cfg).is_err());
    assert!(render_sweep(&rows).lines().count() == rows.len() + 1);
}

#[test]
fn production_recall_points() {
    let r = |m| estimate_production_recall(1127, 47, m).unwrap();
    assert_eq!(format!("{:.4}", r(1.0)), "0.9600");
    assert_eq!(format!("{:.4}", r(0.95)), "0.9579");
    assert_eq!(format!("{:.4}", r(0.90)), "0.9557");
    assert!(close(r(0.95), 1127.0 / (1127.0 + 47.0 / 0.95)));
    assert!(r(0.9) < r(0.95) && r(0.95) < r(1.0));
    assert!(estimate_production_recall(1127, 47, 0.0).is_err());
}

#[test]
fn cost_rows() {
    let (base, phases) = reference_cost_phases();
    let rows = cost_model(&phases, &base).unwrap();
    let got: Vec<(f64, i64)> = rows
        .iter()
        .map(|r| (r.total, (100.0 * r.delta_pct).round() as i64))
        .collect();
    assert_eq!(got, [(48_200.0, 7), (33_200.0, -26), (20_200.0, -55)]);
    assert_eq!(format!("{:.2}", rows[0].per_doc), "4.67");
    let bad = CostPhase::new("x", 1.0, 1.0, 0);
    assert!(cost_model(&[bad], &base).is_err());
    assert!(cost_model(&phases, &CostPhase::new("b", 0.0, 0.0, 1)).is_err());
    assert!(render_costs(&rows).contains("+7%"));
}

fn pipeline() -> Pipeline {
    Pipeline::new(
        EmbedderConfig::default(),
        RetrievalConfig::default(),
        ExtractionConfig::default(),
        GapConfig::default(),
    )
    .unwrap()
}

#[test]
fn ablation_shape_and_kg_value() {
    let f = generate_kg_fixture(12, 2).unwrap();
    let t = ablation_matrix(&f, &pipeline(), &[AblationToggles::ALL_OFF, AblationToggles::ALL_ON]).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0].delta_vs_base, 0.0);
    assert!(close(t.rows[1].delta_vs_base, t.rows[1].gap_f1 - t.rows[0].gap_f1));

    let on = AblationToggles {
        kg_rerank: true,
        ..AblationToggles::ALL_ON
    };
    let off = AblationToggles {
        kg_rerank: false,
        ..AblationToggles::ALL_ON
    };
    let t = ablation_matrix(&f, &pipeline(), &[off, on]).unwrap();
    assert!(t.rows[1].gap_f1 > t.rows[0].gap_f1, "{}", t.render());
    assert_eq!(AblationToggles::grid().len(), 8);
}

fn small_fixture() -> crate::fixture::Fixture {
    let spec = FixtureSpec {
        n_docs: 3,
        n_obligations: 24,
        gap_mix: GapMix {
            compliant: 10,
            partial_gap: 8,
            full_gap: 6,
        },
        ..Default::default()
    };
    generate_fixture(&spec, 21).unwrap()
}

#[test]
fn error_propagation_cases() {
    let emb = EmbedderConfig::default();
    let f = small_fixture();
    let p = pipeline();
    let g = f.build_graph(GraphConfig::default(), &emb).unwrap();
    let policies = f.prepared_policies(&emb);
    let index = Index::from_documents(&f.documents, &p.retrieval, &emb).unwrap();
    let run = |pred: &[crate::extraction::Obligation]| {
        error_propagation_report(&f.gold_obligations, pred, &f.gold_labels, &policies, &g, &index, &p).unwrap()
    };

    let same = run(&f.gold_obligations);
    assert_eq!(same.delta_f1, 0.0);
    assert!(same.attribution.iter().all(|a| a.errors == 0));

    let victim = f
        .gold_obligations
        .iter()
        .position(|o| f.label_of(&o.obligation_id) == Some(GapClass::FullGap))
        .unwrap();
    let mut missing = f.gold_obligations.clone();
    missing.remove(victim);
    let r = run(&missing);
    assert!(r.delta_f1 > 0.0);
    let cat = |r: &ErrorPropagation, c| r.attribution.iter().find(|a| a.category == c).unwrap().clone();
    assert_eq!(cat(&r, ErrorCategory::MissingObligation).errors, 1);
    assert_eq!(cat(&r, ErrorCategory::MissingObligation).changed_labels, 1);
    assert!(close(cat(&r, ErrorCategory::MissingObligation).f1_delta, r.delta_f1));

    let mut flipped = f.gold_obligations.clone();
    flipped[victim].modality = DeonticModality::Permission;
    let r = run(&flipped);
    assert_eq!(cat(&r, ErrorCategory::WrongModality).errors, 1);
    assert_eq!(cat(&r, ErrorCategory::MissingObligation).errors, 0);
    assert!(r.render().contains("wrong_modality"));
}
