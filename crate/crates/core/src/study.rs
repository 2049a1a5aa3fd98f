//! Prevalence-over-time series per community and reviewer-threshold policy,
//! plus the descriptive signal-cost hypothesis report.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::bayes::{self, GibbsConfig, Priors};
use crate::calibration::CalibrationResult;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::naive;
use crate::textmodel::LinearModel;

pub const DEFAULT_MIN_REVIEWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PostingCost {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExposureBenefit {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityProfile {
    pub name: String,
    pub posting_cost: PostingCost,
    pub exposure_benefit: ExposureBenefit,
}

/// Signal-cost profiles of the six hotel-review communities.
pub fn default_profiles() -> Vec<CommunityProfile> {
    use ExposureBenefit as E;
    use PostingCost as P;
    [
        ("Orbitz", P::High, E::Low),
        ("Priceline", P::High, E::Medium),
        ("Expedia", P::High, E::Medium),
        ("Hotels.com", P::High, E::Medium),
        ("Yelp", P::Low, E::Low),
        ("TripAdvisor", P::Low, E::High),
    ]
    .into_iter()
    .map(|(name, posting_cost, exposure_benefit)| CommunityProfile {
        name: name.into(),
        posting_cost,
        exposure_benefit,
    })
    .collect()
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<CommunityProfile>> {
    let path = path.as_ref();
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Monthly,
    #[default]
    Quarterly,
    Yearly,
}

impl Granularity {
    fn bucket_start(self, date: NaiveDate) -> NaiveDate {
        let (y, m) = (date.year(), date.month());
        let m0 = match self {
            Granularity::Monthly => m,
            Granularity::Quarterly => (m - 1) / 3 * 3 + 1,
            Granularity::Yearly => 1,
        };
        NaiveDate::from_ymd_opt(y, m0, 1).expect("first of month")
    }

    fn next_start(self, start: NaiveDate) -> NaiveDate {
        let months = match self {
            Granularity::Monthly => 1,
            Granularity::Quarterly => 3,
            Granularity::Yearly => 12,
        };
        start
            .checked_add_months(chrono::Months::new(months))
            .expect("date in range")
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monthly" => Ok(Granularity::Monthly),
            "quarterly" => Ok(Granularity::Quarterly),
            "yearly" => Ok(Granularity::Yearly),
            _ => Err(Error::invalid(format!("unknown granularity {s:?}"))),
        }
    }
}

fn midnight_utc(d: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight"))
}

/// Calendar-aligned (UTC) buckets, chronological, empty buckets omitted.
/// With `cumulative`, each bucket holds every review up to the bucket's end.
pub fn bucket_by_time(
    c: &Corpus,
    granularity: Granularity,
    cumulative: bool,
) -> Vec<(DateTime<Utc>, Corpus)> {
    let mut starts: Vec<NaiveDate> = c
        .iter()
        .map(|r| granularity.bucket_start(r.timestamp.with_timezone(&Utc).date_naive()))
        .collect();
    starts.sort_unstable();
    starts.dedup();
    starts
        .into_iter()
        .map(|start| {
            let lo = midnight_utc(start);
            let hi = midnight_utc(granularity.next_start(start));
            let part = c.filter(|r| {
                let t = r.timestamp.with_timezone(&Utc);
                t < hi && (cumulative || t >= lo)
            });
            (lo, part)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub granularity: Granularity,
    pub cumulative: bool,
    pub min_reviews: usize,
    pub gibbs: GibbsConfig,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            granularity: Granularity::Quarterly,
            cumulative: true,
            min_reviews: DEFAULT_MIN_REVIEWS,
            gibbs: GibbsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBucket {
    pub start: DateTime<Utc>,
    pub n_reviews: usize,
    pub pi_f: f64,
    /// `None` when the calibration makes the naive estimator undefined.
    pub pi_naive: Option<f64>,
    pub naive_out_of_range: bool,
    pub pi_bayes: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedBucket {
    pub start: DateTime<Utc>,
    pub n_reviews: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceSeries {
    pub community: String,
    pub policy_k: usize,
    pub buckets: Vec<SeriesBucket>,
    /// Buckets below the minimum size, reported but not estimated.
    pub skipped: Vec<SkippedBucket>,
    pub assumptions: Vec<String>,
}

impl PrevalenceSeries {
    pub const CSV_HEADER: &'static str =
        "community,policy_k,bucket_start,n_reviews,pi_f,pi_naive,naive_out_of_range,pi_bayes,ci_lo,ci_hi";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for b in &self.buckets {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                csv_field(&self.community),
                self.policy_k,
                b.start.format("%Y-%m-%dT%H:%M:%SZ"),
                b.n_reviews,
                b.pi_f,
                b.pi_naive.map(|v| v.to_string()).unwrap_or_default(),
                b.naive_out_of_range,
                b.pi_bayes,
                b.ci_lo,
                b.ci_hi
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("utf8")
    }

    pub fn last(&self) -> Option<&SeriesBucket> {
        self.buckets.last()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn series_assumptions(opts: &SeriesOptions) -> Vec<String> {
    vec![
        format!(
            "{} {:?} buckets (time aggregation is an assumption)",
            if opts.cumulative {
                "cumulative"
            } else {
                "disjoint"
            },
            opts.granularity
        )
        .to_lowercase(),
        "calibration estimated once on unfiltered data and reused for every reviewer threshold"
            .into(),
        "point estimate is the posterior mean".into(),
        crate::calibration::DEV_ASSUMED_TRUTHFUL.into(),
    ]
}

/// Classifier outputs keyed by review id, computed once per corpus.
pub fn classify(c: &Corpus, model: &LinearModel) -> HashMap<String, bool> {
    c.iter()
        .map(|r| (r.id.clone(), model.predict_text(&r.text).is_deceptive()))
        .collect()
}

/// Series for one community under reviewer threshold `k`.
pub fn run_series(
    c: &Corpus,
    model: &LinearModel,
    cal: &CalibrationResult,
    opts: &SeriesOptions,
    k: usize,
) -> Result<PrevalenceSeries> {
    run_series_with_outputs(c, &classify(c, model), cal, opts, k)
}

pub fn run_series_with_outputs(
    c: &Corpus,
    outputs: &HashMap<String, bool>,
    cal: &CalibrationResult,
    opts: &SeriesOptions,
    k: usize,
) -> Result<PrevalenceSeries> {
    opts.gibbs.validate()?;
    let priors = Priors {
        alpha: opts.gibbs.alpha,
        beta: cal.beta,
        gamma: cal.gamma,
    };
    let community = {
        let mut names: Vec<&str> = c.iter().map(|r| r.community.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names.join("+")
    };
    let filtered = c.filter_by_reviewer_min_posts(k);
    let mut buckets = Vec::new();
    let mut skipped = Vec::new();
    for (idx, (start, part)) in bucket_by_time(&filtered, opts.granularity, opts.cumulative)
        .into_iter()
        .enumerate()
    {
        if part.len() < opts.min_reviews {
            skipped.push(SkippedBucket {
                start,
                n_reviews: part.len(),
            });
            continue;
        }
        let f: Vec<bool> = part
            .iter()
            .map(|r| {
                outputs.get(&r.id).copied().ok_or_else(|| {
                    Error::invalid(format!("no classifier output for review {}", r.id))
                })
            })
            .collect::<Result<_>>()?;
        let pi_f = naive::positive_rate(&f)?;
        let naive_est = naive::naive_estimate(pi_f, cal.eta, cal.theta).ok();
        let cfg = GibbsConfig {
            seed: bucket_seed(opts.gibbs.seed, k, idx),
            ..opts.gibbs
        };
        let post = bayes::estimate(&f, &priors, &cfg)?;
        buckets.push(SeriesBucket {
            start,
            n_reviews: part.len(),
            pi_f,
            pi_naive: naive_est.map(|e| e.pi_naive),
            naive_out_of_range: naive_est.is_some_and(|e| e.out_of_range()),
            pi_bayes: post.pi_mean,
            ci_lo: post.pi_ci95.0,
            ci_hi: post.pi_ci95.1,
        });
    }
    Ok(PrevalenceSeries {
        community,
        policy_k: k,
        buckets,
        skipped,
        assumptions: series_assumptions(opts),
    })
}

fn bucket_seed(seed: u64, k: usize, idx: usize) -> u64 {
    seed ^ ((k as u64) << 48) ^ ((idx as u64) << 24)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityRow {
    pub community: String,
    pub posting_cost: Option<PostingCost>,
    pub exposure_benefit: Option<ExposureBenefit>,
    pub policy_k: usize,
    pub final_pi_bayes: Option<f64>,
    pub final_pi_naive: Option<f64>,
    /// Least-squares slope of `pi_bayes` against time, per year.
    pub trend_per_year: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub rows: Vec<CommunityRow>,
    /// Mean final-bucket prevalence per posting cost, lowest threshold only.
    pub mean_final_by_posting_cost: BTreeMap<String, f64>,
    /// Low-posting-cost communities show more deception than high-cost ones.
    pub h1_low_cost_exceeds_high_cost: Option<bool>,
    /// Prevalence strictly decreases as the reviewer threshold rises.
    pub h2_decreases_with_threshold: Option<bool>,
    pub notes: Vec<String>,
}

fn trend_per_year(s: &PrevalenceSeries) -> Option<f64> {
    if s.buckets.len() < 2 {
        return None;
    }
    let t0 = s.buckets[0].start;
    let pts: Vec<(f64, f64)> = s
        .buckets
        .iter()
        .map(|b| {
            (
                (b.start - t0).num_seconds() as f64 / (365.25 * 86_400.0),
                b.pi_bayes,
            )
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Descriptive comparison of final-bucket prevalence; no significance tests.
pub fn compare_hypotheses(
    series_set: &[PrevalenceSeries],
    profiles: &[CommunityProfile],
) -> HypothesisReport {
    let profile_of = |name: &str| profiles.iter().find(|p| p.name.eq_ignore_ascii_case(name));
    let mut rows: Vec<CommunityRow> = series_set
        .iter()
        .map(|s| {
            let p = profile_of(&s.community);
            CommunityRow {
                community: s.community.clone(),
                posting_cost: p.map(|p| p.posting_cost),
                exposure_benefit: p.map(|p| p.exposure_benefit),
                policy_k: s.policy_k,
                final_pi_bayes: s.last().map(|b| b.pi_bayes),
                final_pi_naive: s.last().and_then(|b| b.pi_naive),
                trend_per_year: trend_per_year(s),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.community
            .cmp(&b.community)
            .then(a.policy_k.cmp(&b.policy_k))
    });

    let mut notes = Vec::new();
    let mut by_community: BTreeMap<&str, Vec<&CommunityRow>> = BTreeMap::new();
    for r in &rows {
        by_community
            .entry(r.community.as_str())
            .or_default()
            .push(r);
    }

    let mut sums: BTreeMap<PostingCost, (f64, usize)> = BTreeMap::new();
    for (name, rs) in &by_community {
        let base = rs[0];
        match (base.posting_cost, base.final_pi_bayes) {
            (Some(cost), Some(pi)) => {
                let e = sums.entry(cost).or_default();
                e.0 += pi;
                e.1 += 1;
            }
            (None, _) => notes.push(format!("{name}: no community profile, excluded from H1")),
            (_, None) => notes.push(format!("{name}: no estimated bucket, excluded from H1")),
        }
    }
    let means: BTreeMap<PostingCost, f64> =
        sums.iter().map(|(k, (s, n))| (*k, s / *n as f64)).collect();
    let h1 = match (means.get(&PostingCost::Low), means.get(&PostingCost::High)) {
        (Some(low), Some(high)) => Some(low > high),
        _ => {
            notes.push("H1 needs at least one Low and one High posting-cost community".into());
            None
        }
    };

    let mut h2 = None;
    for rs in by_community.values() {
        if rs.len() < 2 {
            continue;
        }
        let vals: Option<Vec<f64>> = rs.iter().map(|r| r.final_pi_bayes).collect();
        let decreasing = vals.is_some_and(|v| v.windows(2).all(|w| w[1] < w[0]));
        h2 = Some(h2.unwrap_or(true) && decreasing);
    }
    if h2.is_none() {
        notes.push("H2 needs a community with at least two reviewer thresholds".into());
    }

    HypothesisReport {
        rows,
        mean_final_by_posting_cost: means
            .into_iter()
            .map(|(k, v)| (format!("{k:?}"), v))
            .collect(),
        h1_low_cost_exceeds_high_cost: h1,
        h2_decreases_with_threshold: h2,
        notes,
    }
}
