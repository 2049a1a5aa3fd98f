use std::collections::BTreeSet;

use prevalence_core::calibration::estimate_sensitivity;
use prevalence_core::corpus::Corpus;
use prevalence_core::synthetic::generate_text_corpus;
use prevalence_core::textmodel::{
    cross_val_predict_by_group_observed, nested_cv_report, train, BinaryMetrics, TrainOptions,
};

#[test]
fn overlap_controls_separability() {
    let score = |overlap: f64| {
        let tr = generate_text_corpus(200, 200, overlap, 1).unwrap();
        let te = generate_text_corpus(200, 200, overlap, 2).unwrap();
        let m = train(&tr, 1.0).unwrap();
        BinaryMetrics::from_pairs(&te.labels().unwrap(), &m.predict_corpus(&te))
            .balanced_accuracy()
            .unwrap()
    };
    let (easy, hard) = (score(0.3), score(0.9));
    assert!(easy > 0.97, "{easy}");
    assert!(hard < easy);
}

#[test]
fn duplicating_the_corpus_doubles_the_effective_cost() {
    let c = generate_text_corpus(40, 40, 0.6, 3).unwrap();
    let doubled = Corpus::new(
        c.iter()
            .cloned()
            .chain(c.iter().cloned().map(|mut r| {
                r.id.push_str("-dup");
                r
            }))
            .collect(),
        "dup",
    )
    .unwrap();
    let opts = TrainOptions {
        tolerance: 1e-9,
        max_epochs: 50_000,
        ..TrainOptions::default()
    };
    let a = prevalence_core::textmodel::train_with(&c, 0.2, &opts).unwrap();
    let b = prevalence_core::textmodel::train_with(&doubled, 0.1, &opts).unwrap();
    assert_eq!(a.vocabulary, b.vocabulary);
    for (wa, wb) in a.weights.iter().zip(&b.weights) {
        assert!((wa - wb).abs() < 1e-3, "{wa} vs {wb}");
    }
    assert!((a.bias - b.bias).abs() < 1e-3);
}

#[test]
fn leave_one_hotel_out_never_sees_the_held_out_hotel() {
    let c = generate_text_corpus(30, 30, 0.6, 5).unwrap();
    let groups = c.group_by_hotel();
    let mut held_out_seen = BTreeSet::new();
    cross_val_predict_by_group_observed(&c, &groups, 1.0, &TrainOptions::default(), |fold| {
        let held: BTreeSet<&str> = groups[fold.held_out].ids().collect();
        assert!(fold.train_ids.iter().all(|id| !held.contains(id)));
        assert_eq!(
            fold.predict_ids.iter().copied().collect::<BTreeSet<_>>(),
            held
        );
        held_out_seen.insert(fold.held_out.to_string());
    })
    .unwrap();
    assert_eq!(held_out_seen.len(), groups.len());
    let s = estimate_sensitivity(&c, 1.0).unwrap();
    assert_eq!(s.tp + s.fn_, 30);
}

#[test]
fn nested_report_covers_every_hotel_once() {
    let c = generate_text_corpus(40, 40, 0.6, 6).unwrap();
    let r = nested_cv_report(&c, &[0.1, 1.0], 4, 9, &TrainOptions::default()).unwrap();
    let hotels: Vec<&String> = r.outer.iter().flat_map(|f| &f.hotels).collect();
    let unique: BTreeSet<&String> = hotels.iter().copied().collect();
    assert_eq!(hotels.len(), unique.len());
    assert_eq!(unique.len(), 20);
    let total = r.pooled.tp + r.pooled.fn_ + r.pooled.tn + r.pooled.fp;
    assert_eq!(total, 80);
}
