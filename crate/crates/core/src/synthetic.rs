//! Synthetic data drawn from the prevalence model's generative story, an
//! exact enumeration posterior for small test sets, and toy review text with
//! controllable class separability.

use chrono::{DateTime, Duration, FixedOffset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::Priors;
use crate::corpus::{parse_timestamp, Corpus, Label, Review};
use crate::error::{Error, Result};

/// Largest test set `exact_posterior` will enumerate.
pub const MAX_EXACT_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerativeParams {
    pub pi_star: f64,
    pub eta_star: f64,
    pub theta_star: f64,
    pub n: usize,
    pub seed: u64,
}

impl GenerativeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pi_star", self.pi_star),
            ("eta_star", self.eta_star),
            ("theta_star", self.theta_star),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Labels `y_i ~ Bernoulli(pi*)`, outputs `f_i ~ Bernoulli(eta*)` when
/// `y_i = 1` and `Bernoulli(1 - theta*)` otherwise.
pub fn generate_labels_outputs(p: &GenerativeParams) -> Result<(Vec<bool>, Vec<bool>)> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut labels = Vec::with_capacity(p.n);
    let mut outputs = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let y = rng.random_bool(p.pi_star);
        let f = if y {
            rng.random_bool(p.eta_star)
        } else {
            rng.random_bool(1.0 - p.theta_star)
        };
        labels.push(y);
        outputs.push(f);
    }
    Ok((labels, outputs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior {
    /// Posterior mean of `(alpha_1 + N1) / (sum(alpha) + N)`.
    pub pi_mean: f64,
    /// `P(y_i = 1 | f)` for every review.
    pub per_review_p1: Vec<f64>,
    /// Posterior mean of `N1`.
    pub n1_mean: f64,
    /// `ln P(f)` under the priors.
    pub log_evidence: f64,
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Enumerates all `2^N` label vectors. Each assignment is weighted by the
/// collapsed joint, a product of three Beta-function ratios (prevalence,
/// sensitivity over the `y = 1` reviews, specificity over the `y = 0` ones).
pub fn exact_posterior(outputs: &[bool], priors: &Priors) -> Result<ExactPosterior> {
    let n = outputs.len();
    if n > MAX_EXACT_N {
        return Err(Error::invalid(format!(
            "exact enumeration supports at most {MAX_EXACT_N} reviews, got {n}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("no classifier outputs"));
    }
    priors.validate()?;
    let [a0, a1] = priors.alpha.0;
    let [b0, b1] = priors.beta.0;
    let [g0, g1] = priors.gamma.0;
    let out_mask: u32 = outputs
        .iter()
        .enumerate()
        .fold(0, |m, (i, &f)| if f { m | (1 << i) } else { m });
    let full: u32 = (1u32 << n) - 1;

    let log_weight = |mask: u32| -> f64 {
        let n1 = mask.count_ones() as f64;
        let x1 = (mask & out_mask).count_ones() as f64; // y=1, f=1
        let x0 = n1 - x1; // y=1, f=0
        let y1 = (!mask & full & out_mask).count_ones() as f64; // y=0, f=1
        let y0 = (n as f64 - n1) - y1; // y=0, f=0
        ln_beta(a1 + n1, a0 + n as f64 - n1) + ln_beta(b1 + x1, b0 + x0) + ln_beta(g1 + y0, g0 + y1)
    };

    let assignments = 1u64 << n;
    let max_lw = (0..assignments)
        .map(|m| log_weight(m as u32))
        .fold(f64::NEG_INFINITY, f64::max);

    let mut z = 0.0;
    let mut pi_acc = 0.0;
    let mut n1_acc = 0.0;
    let mut marg = vec![0.0; n];
    for m in 0..assignments {
        let mask = m as u32;
        let w = (log_weight(mask) - max_lw).exp();
        let n1 = mask.count_ones() as f64;
        z += w;
        pi_acc += w * (a1 + n1) / (a0 + a1 + n as f64);
        n1_acc += w * n1;
        for (i, slot) in marg.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *slot += w;
            }
        }
    }
    let log_prior_norm = ln_beta(a1, a0) + ln_beta(b1, b0) + ln_beta(g1, g0);
    Ok(ExactPosterior {
        pi_mean: pi_acc / z,
        per_review_p1: marg.into_iter().map(|m| m / z).collect(),
        n1_mean: n1_acc / z,
        log_evidence: max_lw + z.ln() - log_prior_norm,
    })
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "be", "da", "fi", "gu", "ho", "ja", "pe", "zu",
];

/// Distinct three-syllable pseudo-word for every index below 4096.
fn pseudo_word(idx: usize) -> String {
    let mut s = String::with_capacity(6);
    let mut k = idx;
    for _ in 0..3 {
        s.push_str(SYLLABLES[k % 16]);
        k /= 16;
    }
    s
}

/// Unigram review-text model with two class-specific word pools and a
/// controllable amount of shared mass.
///
/// A review of class `c` draws its content tokens from
/// `overlap * mix(A, B) + (1 - overlap) * pool_c`, so `overlap = 0` gives
/// disjoint vocabularies and `overlap = 1` identical distributions. Filler
/// tokens from a neutral pool are added in proportion to `overlap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGenerator {
    pub vocab_overlap: f64,
    pub pool_size: usize,
    pub neutral_size: usize,
    pub content_tokens: (usize, usize),
    pub filler_tokens: (usize, usize),
}

impl TextGenerator {
    pub fn new(vocab_overlap: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&vocab_overlap) {
            return Err(Error::invalid(format!(
                "vocab_overlap must lie in [0, 1], got {vocab_overlap}"
            )));
        }
        Ok(TextGenerator {
            vocab_overlap,
            pool_size: 150,
            neutral_size: 200,
            content_tokens: (16, 24),
            filler_tokens: (20, 30),
        })
    }

    fn pool_word(&self, class: Label, rng: &mut impl Rng) -> String {
        let offset = if class.is_deceptive() {
            self.pool_size
        } else {
            0
        };
        pseudo_word(offset + rng.random_range(0..self.pool_size))
    }

    pub fn review_text(&self, class: Label, rng: &mut impl Rng) -> String {
        let n_content = rng.random_range(self.content_tokens.0..=self.content_tokens.1);
        let n_filler = {
            let base = rng.random_range(self.filler_tokens.0..=self.filler_tokens.1);
            (base as f64 * self.vocab_overlap).round() as usize
        };
        let mut words = Vec::with_capacity(n_content + n_filler);
        for _ in 0..n_content {
            let source = if rng.random_bool(self.vocab_overlap) {
                Label::from_bit(rng.random_bool(0.5))
            } else {
                class
            };
            words.push(self.pool_word(source, rng));
        }
        for _ in 0..n_filler {
            words.push(pseudo_word(
                2 * self.pool_size + rng.random_range(0..self.neutral_size),
            ));
        }
        words.shuffle(rng);
        let mut text = words.join(" ");
        text.push('.');
        text
    }
}

fn epoch() -> DateTime<FixedOffset> {
    parse_timestamp("2010-01-01T00:00:00Z").expect("valid literal")
}

/// Balanced-ish labeled corpus over 20 hotels for classifier training.
pub fn generate_text_corpus(
    n_truthful: usize,
    n_deceptive: usize,
    vocab_overlap: f64,
    seed: u64,
) -> Result<Corpus> {
    if n_truthful == 0 || n_deceptive == 0 {
        return Err(Error::invalid("need at least one review of each class"));
    }
    let generator = TextGenerator::new(vocab_overlap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = epoch();
    let mut reviews = Vec::with_capacity(n_truthful + n_deceptive);
    let labels = std::iter::repeat_n(Label::Truthful, n_truthful)
        .chain(std::iter::repeat_n(Label::Deceptive, n_deceptive));
    for (i, label) in labels.enumerate() {
        reviews.push(Review {
            id: format!("train-{i:05}"),
            community: "synthetic".into(),
            hotel_id: format!("hotel-{:02}", i % 20),
            reviewer_id: format!("train-author-{i:05}"),
            timestamp: base + Duration::minutes(rng.random_range(0..525_600)),
            rating: 5,
            text: generator.review_text(label, &mut rng),
            label: Some(label),
        });
    }
    Corpus::new(
        reviews,
        format!(
            "synthetic: unigram mixture text, vocab_overlap={vocab_overlap}, \
             {n_truthful} truthful + {n_deceptive} deceptive, seed={seed}"
        ),
    )
}

/// A review community whose accounts come in two tiers: occasional accounts
/// posting once or twice, and regular accounts posting many times, each tier
/// with its own per-review deception rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityScenario {
    pub community: String,
    pub occasional_accounts: usize,
    pub occasional_posts: (usize, usize),
    pub occasional_pi: f64,
    pub regular_accounts: usize,
    pub regular_posts: (usize, usize),
    pub regular_pi: f64,
    pub hotels: usize,
    pub span_days: i64,
    pub vocab_overlap: f64,
    pub seed: u64,
}

impl CommunityScenario {
    /// First-time (occasional) reviewers deceive at 15%, regulars at 2%.
    pub fn two_tier(community: &str, seed: u64) -> Self {
        CommunityScenario {
            community: community.into(),
            occasional_accounts: 3_000,
            occasional_posts: (1, 2),
            occasional_pi: 0.15,
            regular_accounts: 1_000,
            regular_posts: (3, 8),
            regular_pi: 0.02,
            hotels: 20,
            span_days: 730,
            vocab_overlap: 0.5,
            seed,
        }
    }

    /// One tier at a single deception rate.
    pub fn flat(community: &str, pi: f64, reviews_per_year: usize, seed: u64) -> Self {
        CommunityScenario {
            community: community.into(),
            occasional_accounts: 0,
            occasional_posts: (1, 1),
            occasional_pi: pi,
            regular_accounts: reviews_per_year * 2 / 3,
            regular_posts: (2, 4),
            regular_pi: pi,
            hotels: 20,
            span_days: 730,
            vocab_overlap: 0.5,
            seed,
        }
    }

    pub fn generate(&self) -> Result<Corpus> {
        for p in [self.occasional_pi, self.regular_pi] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("deception rate {p} outside [0, 1]")));
            }
        }
        let generator = TextGenerator::new(self.vocab_overlap)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let base = epoch();
        let span_minutes = self.span_days * 24 * 60;
        let mut reviews = Vec::new();
        let tiers = [
            (
                "o",
                self.occasional_accounts,
                self.occasional_posts,
                self.occasional_pi,
            ),
            (
                "r",
                self.regular_accounts,
                self.regular_posts,
                self.regular_pi,
            ),
        ];
        for (tag, accounts, (lo, hi), pi) in tiers {
            for a in 0..accounts {
                let posts = rng.random_range(lo..=hi);
                let mut times: Vec<i64> = (0..posts)
                    .map(|_| rng.random_range(0..span_minutes))
                    .collect();
                times.sort_unstable();
                for (j, t) in times.into_iter().enumerate() {
                    let label = Label::from_bit(rng.random_bool(pi));
                    reviews.push(Review {
                        id: format!("{}-{tag}{a:05}-{j}", self.community),
                        community: self.community.clone(),
                        hotel_id: format!("hotel-{:02}", rng.random_range(0..self.hotels.max(1))),
                        reviewer_id: format!("{tag}{a:05}"),
                        timestamp: base + Duration::minutes(t),
                        rating: 5,
                        text: generator.review_text(label, &mut rng),
                        label: Some(label),
                    });
                }
            }
        }
        reviews.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        Corpus::new(
            reviews,
            format!(
                "synthetic community scenario: {}",
                serde_json::to_string(self)?
            ),
        )
    }
}

/// Everything the CLI `simulate` command writes.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    /// Latent labels and classifier outputs drawn from the generative story.
    pub labels: Vec<bool>,
    pub outputs: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationParams {
    pub pi_star: f64,
    pub eta_star: f64,
    pub theta_star: f64,
    pub n: usize,
    pub n_train_per_class: usize,
    pub n_dev: usize,
    /// Deception rate of the development sample, which calibration treats
    /// as all truthful.
    pub dev_pi_star: f64,
    pub vocab_overlap: f64,
    pub community: String,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            pi_star: 0.08,
            eta_star: 0.9,
            theta_star: 0.89,
            n: 5_000,
            n_train_per_class: 400,
            n_dev: 400,
            dev_pi_star: 0.0,
            vocab_overlap: 0.7,
            community: "synthetic".into(),
        }
    }
}

fn community_reviews(
    generator: &TextGenerator,
    community: &str,
    prefix: &str,
    labels: &[bool],
    rng: &mut ChaCha8Rng,
) -> Vec<Review> {
    let base = epoch();
    let authors = (labels.len() / 2).max(1);
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let label = Label::from_bit(y);
            Review {
                id: format!("{prefix}-{i:06}"),
                community: community.to_string(),
                hotel_id: format!("hotel-{:02}", rng.random_range(0..20)),
                reviewer_id: format!("{prefix}-author-{:05}", rng.random_range(0..authors)),
                timestamp: base + Duration::minutes(rng.random_range(0..1_051_200)),
                rating: 5,
                text: generator.review_text(label, rng),
                label: Some(label),
            }
        })
        .collect()
}

/// Training, development and test corpora plus a label/output draw. Test
/// review labels are the drawn latent labels; development reviews are drawn
/// at `dev_pi_star` and keep their (hidden) gold labels for auditing.
pub fn simulate(params: &SimulationParams, seed: u64) -> Result<Simulation> {
    let gen = GenerativeParams {
        pi_star: params.pi_star,
        eta_star: params.eta_star,
        theta_star: params.theta_star,
        n: params.n,
        seed,
    };
    let (labels, outputs) = generate_labels_outputs(&gen)?;
    if !(0.0..=1.0).contains(&params.dev_pi_star) {
        return Err(Error::invalid(format!(
            "dev_pi_star must lie in [0, 1], got {}",
            params.dev_pi_star
        )));
    }
    let train = generate_text_corpus(
        params.n_train_per_class,
        params.n_train_per_class,
        params.vocab_overlap,
        seed ^ 0x7472_6169_6e00,
    )?;
    let generator = TextGenerator::new(params.vocab_overlap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7465_7374_0000);
    let test = community_reviews(&generator, &params.community, "test", &labels, &mut rng);
    let dev_labels: Vec<bool> = (0..params.n_dev)
        .map(|_| rng.random_bool(params.dev_pi_star))
        .collect();
    let dev = community_reviews(&generator, &params.community, "dev", &dev_labels, &mut rng);
    let provenance = format!("synthetic: {}", serde_json::to_string(params)?);
    Ok(Simulation {
        train,
        dev: Corpus::new(dev, provenance.clone())?,
        test: Corpus::new(test, provenance)?,
        labels,
        outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::BetaPair;

    #[test]
    fn degenerate_generators() {
        let (y, f) = generate_labels_outputs(&GenerativeParams {
            pi_star: 0.0,
            eta_star: 0.5,
            theta_star: 0.8,
            n: 20_000,
            seed: 1,
        })
        .unwrap();
        assert!(y.iter().all(|&v| !v));
        let rate = f.iter().filter(|&&v| v).count() as f64 / 20_000.0;
        let sigma = (0.2f64 * 0.8 / 20_000.0).sqrt();
        assert!((rate - 0.2).abs() < 3.0 * sigma, "{rate}");

        let (y, f) = generate_labels_outputs(&GenerativeParams {
            pi_star: 1.0,
            eta_star: 1.0,
            theta_star: 0.3,
            n: 500,
            seed: 2,
        })
        .unwrap();
        assert!(y.iter().all(|&v| v) && f.iter().all(|&v| v));
    }

    #[test]
    fn invalid_rates_rejected() {
        let p = GenerativeParams {
            pi_star: 1.5,
            eta_star: 0.5,
            theta_star: 0.5,
            n: 1,
            seed: 0,
        };
        assert!(generate_labels_outputs(&p).is_err());
    }

    #[test]
    fn single_review_symmetry() {
        for f in [true, false] {
            let e = exact_posterior(&[f], &Priors::uniform()).unwrap();
            assert!((e.pi_mean - 0.5).abs() < 1e-15, "{f}: {}", e.pi_mean);
            assert!((e.per_review_p1[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn enumeration_limits() {
        assert!(exact_posterior(&[true; 21], &Priors::uniform()).is_err());
        assert!(exact_posterior(&[], &Priors::uniform()).is_err());
        assert!(exact_posterior(&[false; 20], &Priors::uniform()).is_ok());
    }

    #[test]
    fn marginals_sum_to_expected_positives() {
        let p = Priors {
            alpha: BetaPair::new(1.0, 1.0),
            beta: BetaPair::new(5.0, 37.0),
            gamma: BetaPair::new(1.0, 9.0),
        };
        let outputs = [
            true, false, true, true, false, false, false, true, false, false, true,
        ];
        let e = exact_posterior(&outputs, &p).unwrap();
        let sum: f64 = e.per_review_p1.iter().sum();
        assert!((sum - e.n1_mean).abs() < 1e-12);
        assert!(e.pi_mean > 0.0 && e.pi_mean < 1.0);
    }

    #[test]
    fn evidence_of_one_review_is_prior_predictive() {
        // P(f=1) = E[pi] E[eta] + E[1-pi] E[1-theta] for a single review
        let p = Priors {
            alpha: BetaPair::new(2.0, 3.0),
            beta: BetaPair::new(1.0, 4.0),
            gamma: BetaPair::new(2.0, 5.0),
        };
        let pi: f64 = 3.0 / 5.0;
        let eta = 4.0 / 5.0;
        let fpr = 2.0 / 7.0;
        let p1 = pi * eta + (1.0 - pi) * fpr;
        let e = exact_posterior(&[true], &p).unwrap();
        assert!((e.log_evidence - p1.ln()).abs() < 1e-12);
        let e = exact_posterior(&[false], &p).unwrap();
        assert!((e.log_evidence - (1.0 - p1).ln()).abs() < 1e-12);
    }

    #[test]
    fn pseudo_words_are_distinct() {
        let words: std::collections::HashSet<String> = (0..500).map(pseudo_word).collect();
        assert_eq!(words.len(), 500);
    }

    #[test]
    fn disjoint_vocabularies_at_zero_overlap() {
        let c = generate_text_corpus(30, 30, 0.0, 4).unwrap();
        let vocab = |label: Label| -> std::collections::HashSet<String> {
            c.iter()
                .filter(|r| r.label == Some(label))
                .flat_map(|r| crate::textmodel::tokenize(&r.text))
                .collect()
        };
        assert!(vocab(Label::Truthful).is_disjoint(&vocab(Label::Deceptive)));
    }

    #[test]
    fn text_corpus_shape() {
        let c = generate_text_corpus(10, 5, 0.7, 3).unwrap();
        assert_eq!(c.label_counts(), (10, 5));
        assert_eq!(c.group_by_hotel().len(), 15);
        assert_eq!(c, generate_text_corpus(10, 5, 0.7, 3).unwrap());
        assert!(c.provenance().starts_with("synthetic"));
    }

    #[test]
    fn scenario_tiers() {
        let mut s = CommunityScenario::two_tier("ta", 1);
        s.occasional_accounts = 50;
        s.regular_accounts = 10;
        let c = s.generate().unwrap();
        let regular_posts = c.iter().filter(|r| r.reviewer_id.starts_with('r')).count();
        assert!((30..=80).contains(&regular_posts));
        assert!(c
            .reviews()
            .windows(2)
            .all(|w| w[0].timestamp <= w[1].timestamp));
    }
}
