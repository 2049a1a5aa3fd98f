//! Review records, JSONL ingestion and the corpus-level operations the rest
//! of the pipeline relies on: length/rating filters, uniform sampling,
//! per-hotel grouping and the reviewer-history filter.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Gold label of a review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Truthful,
    Deceptive,
}

impl Label {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Label::Deceptive
        } else {
            Label::Truthful
        }
    }

    pub fn is_deceptive(self) -> bool {
        self == Label::Deceptive
    }

    pub fn as_u8(self) -> u8 {
        self.is_deceptive() as u8
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(Label::Truthful),
            1 => Ok(Label::Deceptive),
            other => Err(serde::de::Error::custom(format!(
                "label must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// One review record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub community: String,
    pub hotel_id: String,
    pub reviewer_id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub rating: u8,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl Review {
    /// Length in unicode scalar values.
    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=5).contains(&self.rating) {
            return Err(format!("field rating: must be 1-5, got {}", self.rating));
        }
        if self.id.is_empty() {
            return Err("field id: must be non-empty".into());
        }
        Ok(())
    }
}

/// An ordered, immutable collection of reviews with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    reviews: Vec<Review>,
    provenance: String,
}

impl Corpus {
    /// Builds a corpus, checking field ranges and id uniqueness.
    pub fn new(reviews: Vec<Review>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(reviews.len());
        for r in &reviews {
            r.validate()
                .map_err(|m| Error::invalid(format!("review {}: {m}", r.id)))?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Corpus {
            reviews,
            provenance: provenance.into(),
        })
    }

    /// Subsets of an already validated corpus skip re-validation.
    fn derived(&self, reviews: Vec<Review>) -> Self {
        Corpus {
            reviews,
            provenance: self.provenance.clone(),
        }
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Review> {
        self.reviews.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.reviews.iter().map(|r| r.id.as_str())
    }

    pub fn into_reviews(self) -> Vec<Review> {
        self.reviews
    }

    /// Gold labels in corpus order; errors if any review is unlabeled.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.reviews
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| Error::invalid(format!("review {} is unlabeled", r.id)))
            })
            .collect()
    }

    /// Number of reviews carrying each gold label (truthful, deceptive).
    pub fn label_counts(&self) -> (usize, usize) {
        self.reviews.iter().fold((0, 0), |(t, d), r| match r.label {
            Some(Label::Truthful) => (t + 1, d),
            Some(Label::Deceptive) => (t, d + 1),
            None => (t, d),
        })
    }

    /// Parses JSONL from a reader. Line numbers in errors are 1-based.
    pub fn parse_jsonl<R: BufRead>(reader: R, provenance: impl Into<String>) -> Result<Self> {
        let mut reviews = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let review = parse_review_line(&line).map_err(|message| Error::Parse {
                line: lineno,
                message,
            })?;
            if !seen.insert(review.id.clone()) {
                return Err(Error::DuplicateId(review.id));
            }
            reviews.push(review);
        }
        Ok(Corpus {
            reviews,
            provenance: provenance.into(),
        })
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(BufReader::new(file), path.display().to_string())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.reviews {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")
                .map_err(|e| Error::io("<jsonl writer>", e))?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Keeps reviews with at least `min_chars` characters and, if given, the
    /// exact star rating. Order is preserved.
    pub fn filter_reviews(&self, min_chars: usize, rating: Option<u8>) -> Corpus {
        let kept = self
            .reviews
            .iter()
            .filter(|r| r.char_count() >= min_chars && rating.is_none_or(|s| r.rating == s))
            .cloned()
            .collect();
        self.derived(kept)
    }

    /// Draws `n` distinct reviews uniformly without replacement.
    pub fn sample_uniform(&self, n: usize, seed: u64) -> Result<Corpus> {
        if n > self.len() {
            return Err(Error::invalid(format!(
                "cannot sample {n} reviews from a corpus of {}",
                self.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = rand::seq::index::sample(&mut rng, self.len(), n);
        Ok(self.derived(picked.iter().map(|i| self.reviews[i].clone()).collect()))
    }

    /// Partition by hotel. Each group keeps corpus order.
    pub fn group_by_hotel(&self) -> BTreeMap<String, Corpus> {
        let mut groups: BTreeMap<String, Vec<Review>> = BTreeMap::new();
        for r in &self.reviews {
            groups
                .entry(r.hotel_id.clone())
                .or_default()
                .push(r.clone());
        }
        groups
            .into_iter()
            .map(|(h, rs)| (h, self.derived(rs)))
            .collect()
    }

    pub fn group_by_community(&self) -> BTreeMap<String, Corpus> {
        let mut groups: BTreeMap<String, Vec<Review>> = BTreeMap::new();
        for r in &self.reviews {
            groups
                .entry(r.community.clone())
                .or_default()
                .push(r.clone());
        }
        groups
            .into_iter()
            .map(|(h, rs)| (h, self.derived(rs)))
            .collect()
    }

    /// Reviewer histories keyed by (community, reviewer).
    pub fn reviewer_histories(&self) -> HashMap<(String, String), ReviewerHistory> {
        let mut stamps: HashMap<(String, String), Vec<DateTime<FixedOffset>>> = HashMap::new();
        for r in &self.reviews {
            stamps
                .entry((r.community.clone(), r.reviewer_id.clone()))
                .or_default()
                .push(r.timestamp);
        }
        stamps
            .into_iter()
            .map(|((c, id), ts)| {
                let h = ReviewerHistory::new(id.clone(), ts);
                ((c, id), h)
            })
            .collect()
    }

    /// Keeps a review iff its author had posted at least `k` reviews in the
    /// same community by the review's timestamp (the review itself included).
    /// `k <= 1` keeps everything.
    pub fn filter_by_reviewer_min_posts(&self, k: usize) -> Corpus {
        if k <= 1 {
            return self.clone();
        }
        let histories = self.reviewer_histories();
        let kept = self
            .reviews
            .iter()
            .filter(|r| {
                let key = (r.community.clone(), r.reviewer_id.clone());
                histories[&key].review_count_at(r.timestamp) >= k
            })
            .cloned()
            .collect();
        self.derived(kept)
    }

    /// Sub-corpus selected by a predicate, keeping order.
    pub fn filter<P: FnMut(&Review) -> bool>(&self, mut pred: P) -> Corpus {
        self.derived(self.reviews.iter().filter(|r| pred(r)).cloned().collect())
    }

    /// Concatenates corpora; ids must stay unique.
    pub fn concat<'a>(
        parts: impl IntoIterator<Item = &'a Corpus>,
        provenance: &str,
    ) -> Result<Corpus> {
        let reviews = parts
            .into_iter()
            .flat_map(|c| c.reviews.iter().cloned())
            .collect();
        Corpus::new(reviews, provenance)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Review;
    type IntoIter = std::slice::Iter<'a, Review>;
    fn into_iter(self) -> Self::IntoIter {
        self.reviews.iter()
    }
}

/// Timestamps of one reviewer's posts within one community.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewerHistory {
    reviewer_id: String,
    sorted: Vec<DateTime<FixedOffset>>,
}

impl ReviewerHistory {
    pub fn new(reviewer_id: impl Into<String>, mut timestamps: Vec<DateTime<FixedOffset>>) -> Self {
        timestamps.sort();
        ReviewerHistory {
            reviewer_id: reviewer_id.into(),
            sorted: timestamps,
        }
    }

    pub fn reviewer_id(&self) -> &str {
        &self.reviewer_id
    }

    /// Number of posts with timestamp `<= t`.
    pub fn review_count_at(&self, t: DateTime<FixedOffset>) -> usize {
        self.sorted.partition_point(|&s| s <= t)
    }
}

fn parse_review_line(line: &str) -> std::result::Result<Review, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let Value::Object(obj) = value else {
        return Err("expected a JSON object".into());
    };
    let review = Review {
        id: string_field(&obj, "id")?,
        community: string_field(&obj, "community")?,
        hotel_id: string_field(&obj, "hotel_id")?,
        reviewer_id: string_field(&obj, "reviewer_id")?,
        timestamp: parse_timestamp(&string_field(&obj, "timestamp")?)?,
        rating: rating_field(&obj)?,
        text: string_field(&obj, "text")?,
        label: label_field(&obj)?,
    };
    review.validate()?;
    Ok(review)
}

fn string_field(obj: &Map<String, Value>, name: &str) -> std::result::Result<String, String> {
    match obj.get(name) {
        None | Some(Value::Null) => Err(format!("missing field {name}")),
        Some(Value::String(s)) => Ok(s.clone()),
        // ids are sometimes numeric in exported data
        Some(Value::Number(n)) if name.ends_with("id") => Ok(n.to_string()),
        Some(_) => Err(format!("field {name}: expected a string")),
    }
}

fn rating_field(obj: &Map<String, Value>) -> std::result::Result<u8, String> {
    let v = obj.get("rating").ok_or("missing field rating")?;
    v.as_u64()
        .filter(|r| (1..=5).contains(r))
        .map(|r| r as u8)
        .ok_or_else(|| format!("field rating: expected an integer 1-5, got {v}"))
}

fn label_field(obj: &Map<String, Value>) -> std::result::Result<Option<Label>, String> {
    match obj.get("label") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => match v.as_u64() {
            Some(0) => Ok(Some(Label::Truthful)),
            Some(1) => Ok(Some(Label::Deceptive)),
            _ => Err(format!("field label: expected 0 or 1, got {v}")),
        },
    }
}

/// ISO-8601 / RFC 3339 with an explicit offset. Naive timestamps are
/// rejected rather than assumed UTC.
pub fn parse_timestamp(s: &str) -> std::result::Result<DateTime<FixedOffset>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t);
    }
    if let Ok(t) = DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Ok(t);
    }
    if NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").is_ok()
        || NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").is_ok()
    {
        return Err(format!("field timestamp: missing timezone offset in {s:?}"));
    }
    Err(format!("field timestamp: not an ISO-8601 instant: {s:?}"))
}
