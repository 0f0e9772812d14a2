//! Domain types shared by every stage of the pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::leaning::{discretize, Thresholds};

/// A calendar month. Months are the only time granularity the toolkit knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthId {
    year: i32,
    month: u32,
}

impl MonthId {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) || !(0..=9999).contains(&year) {
            return Err(Error::InvalidMonth { year, month });
        }
        Ok(MonthId { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Calendar successor; December rolls over into January of the next year.
    pub fn next(self) -> MonthId {
        if self.month == 12 {
            MonthId { year: self.year + 1, month: 1 }
        } else {
            MonthId { year: self.year, month: self.month + 1 }
        }
    }

    /// `12 * year + month`; consecutive months differ by exactly one.
    pub fn index(self) -> i64 {
        12 * i64::from(self.year) + i64::from(self.month)
    }
}

pub fn next_month(m: MonthId) -> MonthId {
    m.next()
}

impl fmt::Display for MonthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Strict `YYYY-MM` parsing.
impl FromStr for MonthId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidMonth { year: -1, month: 0 };
        let bytes = s.as_bytes();
        if bytes.len() != 7 || bytes[4] != b'-' {
            return Err(bad());
        }
        let digits = |r: std::ops::Range<usize>| bytes[r].iter().all(u8::is_ascii_digit);
        if !digits(0..4) || !digits(5..7) {
            return Err(bad());
        }
        let year: i32 = s[0..4].parse().map_err(|_| bad())?;
        let month: u32 = s[5..7].parse().map_err(|_| bad())?;
        MonthId::new(year, month)
    }
}

impl Serialize for MonthId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Returns `x` unchanged when it is a finite value in `[0, 1]`.
pub fn validate_score(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NotFinite);
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(x));
    }
    Ok(x)
}

/// Classifier output for a single post or comment.
#[derive(Debug, Clone, PartialEq)]
pub struct PostScore {
    pub user_id: String,
    pub month: MonthId,
    score: f64,
}

impl PostScore {
    pub fn new(user_id: impl Into<String>, month: MonthId, score: f64) -> Result<Self> {
        Ok(PostScore { user_id: user_id.into(), month, score: validate_score(score)? })
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LeaningLabel {
    Democrat,
    Neutral,
    Republican,
}

impl LeaningLabel {
    pub const ALL: [LeaningLabel; 3] = [LeaningLabel::Democrat, LeaningLabel::Neutral, LeaningLabel::Republican];

    /// Row/column position in 3x3 matrices.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            LeaningLabel::Democrat => "D",
            LeaningLabel::Neutral => "N",
            LeaningLabel::Republican => "R",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LeaningLabel::Democrat => "Democrat",
            LeaningLabel::Neutral => "Neutral",
            LeaningLabel::Republican => "Republican",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        LeaningLabel::ALL.into_iter().find(|l| l.name() == s || l.code() == s)
    }
}

impl fmt::Display for LeaningLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A user's opinion in one month: the leaning score and its discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opinion {
    pub score: f64,
    pub label: LeaningLabel,
}

/// Per-(user, month) opinions. Labels are always derived from the scores
/// with the table's thresholds, so the two can never disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionTable {
    thresholds: Thresholds,
    by_month: BTreeMap<MonthId, BTreeMap<String, Opinion>>,
}

impl OpinionTable {
    pub fn new(thresholds: Thresholds) -> Self {
        OpinionTable { thresholds, by_month: BTreeMap::new() }
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn insert(&mut self, user: impl Into<String>, month: MonthId, score: f64) -> Result<Opinion> {
        let score = validate_score(score)?;
        let label = discretize(score, &self.thresholds)?;
        let user = user.into();
        let month_map = self.by_month.entry(month).or_default();
        if month_map.contains_key(&user) {
            return Err(Error::DuplicateEntry { user, month });
        }
        let opinion = Opinion { score, label };
        month_map.insert(user, opinion);
        Ok(opinion)
    }

    pub fn get(&self, user: &str, month: MonthId) -> Option<Opinion> {
        self.by_month.get(&month).and_then(|m| m.get(user)).copied()
    }

    /// All opinions recorded in `month`, keyed by user.
    pub fn month(&self, month: MonthId) -> Option<&BTreeMap<String, Opinion>> {
        self.by_month.get(&month)
    }

    pub fn months(&self) -> impl Iterator<Item = MonthId> + '_ {
        self.by_month.keys().copied()
    }

    pub fn users(&self) -> BTreeSet<&str> {
        self.by_month.values().flat_map(|m| m.keys().map(String::as_str)).collect()
    }

    /// Monthly opinions of one user, chronologically.
    pub fn user_history(&self, user: &str) -> Vec<(MonthId, Opinion)> {
        self.by_month.iter().filter_map(|(m, users)| users.get(user).map(|o| (*m, *o))).collect()
    }

    /// Entries ordered by month, then user.
    pub fn iter(&self) -> impl Iterator<Item = (MonthId, &str, Opinion)> + '_ {
        self.by_month.iter().flat_map(|(m, users)| users.iter().map(move |(u, o)| (*m, u.as_str(), *o)))
    }

    pub fn len(&self) -> usize {
        self.by_month.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A reply/comment exchange between two users within one month.
/// Endpoints are stored in canonical (sorted) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InteractionRecord {
    pub month: MonthId,
    user_a: String,
    user_b: String,
    count: u64,
}

impl InteractionRecord {
    pub fn new(month: MonthId, user_a: impl Into<String>, user_b: impl Into<String>, count: u64) -> Result<Self> {
        let (a, b) = (user_a.into(), user_b.into());
        if a == b {
            return Err(Error::SelfInteraction(a));
        }
        if count == 0 {
            return Err(Error::NonPositiveCount);
        }
        let (user_a, user_b) = if a < b { (a, b) } else { (b, a) };
        Ok(InteractionRecord { month, user_a, user_b, count })
    }

    pub fn user_a(&self) -> &str {
        &self.user_a
    }

    pub fn user_b(&self) -> &str {
        &self.user_b
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}
