use std::collections::BTreeSet;

use proptest::prelude::*;

use prevalence_core::bayes::{self, BetaPair, GibbsConfig, Priors};
use prevalence_core::corpus::{parse_timestamp, Corpus, Label, Review};
use prevalence_core::naive::naive_estimate;
use prevalence_core::synthetic::exact_posterior;
use prevalence_core::textmodel::{tokenize, train, Vocabulary, Weighting};

const WORDS: [&str; 8] = [
    "room", "staff", "clean", "luxury", "amazing", "dirty", "view", "desk",
];

fn review_strategy() -> impl Strategy<Value = (u8, u8, u8, u32, u8, Vec<usize>, bool)> {
    (
        0u8..3,
        0u8..4,
        0u8..5,
        0u32..2_000,
        1u8..=5,
        prop::collection::vec(0usize..WORDS.len(), 0..12),
        any::<bool>(),
    )
}

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    prop::collection::vec(review_strategy(), 1..40).prop_map(|rows| {
        let t0 = parse_timestamp("2012-01-01T00:00:00Z").unwrap();
        let reviews = rows
            .into_iter()
            .enumerate()
            .map(
                |(i, (comm, hotel, author, hours, rating, words, dec))| Review {
                    id: format!("r{i}"),
                    community: format!("c{comm}"),
                    hotel_id: format!("h{hotel}"),
                    reviewer_id: format!("u{author}"),
                    timestamp: t0 + chrono::Duration::hours(hours as i64),
                    rating,
                    text: words
                        .iter()
                        .map(|&w| WORDS[w])
                        .collect::<Vec<_>>()
                        .join(" "),
                    label: Some(Label::from_bit(dec)),
                },
            )
            .collect();
        Corpus::new(reviews, "prop").unwrap()
    })
}

fn ids(c: &Corpus) -> Vec<String> {
    c.ids().map(String::from).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_idempotent(c in corpus_strategy(), min in 0usize..40, rating in prop::option::of(1u8..=5)) {
        let once = c.filter_reviews(min, rating);
        let twice = once.filter_reviews(min, rating);
        prop_assert_eq!(ids(&once), ids(&twice));
    }

    #[test]
    fn hotel_groups_partition(c in corpus_strategy()) {
        let groups = c.group_by_hotel();
        let mut seen = BTreeSet::new();
        for (h, g) in &groups {
            for r in g.iter() {
                prop_assert_eq!(&r.hotel_id, h);
                prop_assert!(seen.insert(r.id.clone()));
            }
        }
        prop_assert_eq!(seen.len(), c.len());
    }

    #[test]
    fn reviewer_threshold_is_monotone(c in corpus_strategy(), k in 1usize..5) {
        let loose: BTreeSet<String> = ids(&c.filter_by_reviewer_min_posts(k)).into_iter().collect();
        let strict: BTreeSet<String> = ids(&c.filter_by_reviewer_min_posts(k + 1)).into_iter().collect();
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn tokens_ignore_whitespace_and_case(words in prop::collection::vec(0usize..WORDS.len(), 0..10), pad in 1usize..4) {
        let plain = words.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ");
        let sep = " \t\n".repeat(pad);
        let noisy = format!("{sep}{}{sep}", words.iter().map(|&w| WORDS[w].to_uppercase()).collect::<Vec<_>>().join(&sep));
        prop_assert_eq!(tokenize(&plain), tokenize(&noisy));
        let v = Vocabulary::build([plain.as_str()]);
        prop_assert_eq!(v.featurize(&plain, Weighting::Binary), v.featurize(&noisy, Weighting::Binary));
    }

    #[test]
    fn naive_is_increasing_in_positive_rate(a in 0.0f64..1.0, b in 0.0f64..1.0, eta in 0.55f64..1.0, theta in 0.55f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo);
        let l = naive_estimate(lo, eta, theta).unwrap().pi_naive;
        let h = naive_estimate(hi, eta, theta).unwrap().pi_naive;
        prop_assert!(l < h);
    }

    #[test]
    fn exact_posterior_is_permutation_covariant(
        outputs in prop::collection::vec(any::<bool>(), 1..10),
        rot in 0usize..10,
        b1 in 1.0f64..10.0,
        g1 in 1.0f64..10.0,
    ) {
        let priors = Priors { alpha: BetaPair::UNIFORM, beta: BetaPair::new(1.0, b1), gamma: BetaPair::new(1.5, g1) };
        let n = outputs.len();
        let r = rot % n;
        let mut perm = outputs.clone();
        perm.rotate_left(r);
        let a = exact_posterior(&outputs, &priors).unwrap();
        let p = exact_posterior(&perm, &priors).unwrap();
        prop_assert!((a.pi_mean - p.pi_mean).abs() < 1e-12);
        prop_assert!((a.log_evidence - p.log_evidence).abs() < 1e-9);
        for i in 0..n {
            prop_assert!((p.per_review_p1[i] - a.per_review_p1[(i + r) % n]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gibbs_is_deterministic_per_seed(outputs in prop::collection::vec(any::<bool>(), 1..30), seed in any::<u64>()) {
        let cfg = GibbsConfig { iterations: 400, burn_in: 100, lag: 10, seed, chains: 2, alpha: BetaPair::UNIFORM };
        let priors = Priors::uniform();
        let a = bayes::estimate(&outputs, &priors, &cfg).unwrap();
        let b = bayes::estimate(&outputs, &priors, &cfg).unwrap();
        prop_assert_eq!(a.retained_samples, b.retained_samples);
        prop_assert_eq!(a.pi_mean.to_bits(), b.pi_mean.to_bits());
    }

    #[test]
    fn flipping_labels_negates_the_classifier(c in corpus_strategy()) {
        let (t, d) = c.label_counts();
        prop_assume!(t > 0 && d > 0);
        let flipped = Corpus::new(
            c.iter().cloned().map(|mut r| { r.label = r.label.map(|l| Label::from_bit(!l.is_deceptive())); r }).collect(),
            "flipped",
        ).unwrap();
        let m = train(&c, 0.5).unwrap();
        let f = train(&flipped, 0.5).unwrap();
        for r in c.iter() {
            let x = m.featurize(&r.text);
            let (dv, df) = (m.decision_value(&x), f.decision_value(&f.featurize(&r.text)));
            prop_assert!((dv + df).abs() < 1e-3 * (1.0 + dv.abs()), "{} vs {}", dv, df);
        }
    }
}
