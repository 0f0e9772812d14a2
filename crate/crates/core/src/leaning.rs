//! Monthly leaning scores and their three-way discretization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_score, LeaningLabel, MonthId, OpinionTable, PostScore};

/// Cut points for the Democrat / Neutral / Republican split. Both ends are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub dem_max: f64,
    pub rep_min: f64,
}

impl Thresholds {
    pub fn new(dem_max: f64, rep_min: f64) -> Result<Self> {
        if !(0.0 < dem_max && dem_max < rep_min && rep_min < 1.0) {
            return Err(Error::InvalidThresholds { dem_max, rep_min });
        }
        Ok(Thresholds { dem_max, rep_min })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { dem_max: 0.4, rep_min: 0.6 }
    }
}

fn mean_within_bounds(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        sum += v;
        n += 1;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    // rounding in the sum can push the quotient one ulp past the extremes
    (sum / n as f64).clamp(lo, hi)
}

/// Unweighted mean of one user's post scores within one month.
pub fn leaning_score(posts: &[PostScore]) -> Result<f64> {
    let first = posts.first().ok_or(Error::EmptyPostSet)?;
    if posts.iter().any(|p| p.user_id != first.user_id || p.month != first.month) {
        return Err(Error::MixedKeys);
    }
    for p in posts {
        validate_score(p.score())?;
    }
    Ok(mean_within_bounds(posts.iter().map(PostScore::score)))
}

pub fn discretize(score: f64, t: &Thresholds) -> Result<LeaningLabel> {
    let score = validate_score(score)?;
    Ok(if score <= t.dem_max {
        LeaningLabel::Democrat
    } else if score >= t.rep_min {
        LeaningLabel::Republican
    } else {
        LeaningLabel::Neutral
    })
}

/// One table entry per (user, month) that has at least one post.
pub fn build_opinion_table(posts: &[PostScore], t: Thresholds) -> Result<OpinionTable> {
    let mut grouped: BTreeMap<(&str, MonthId), Vec<f64>> = BTreeMap::new();
    for p in posts {
        validate_score(p.score())?;
        grouped.entry((p.user_id.as_str(), p.month)).or_default().push(p.score());
    }
    let mut table = OpinionTable::new(t);
    for ((user, month), scores) in grouped {
        table.insert(user, month, mean_within_bounds(scores.iter().copied()))?;
    }
    Ok(table)
}

/// Unweighted mean of a user's monthly scores across the whole table.
pub fn overall_leaning(table: &OpinionTable, user: &str) -> Result<(f64, LeaningLabel)> {
    let history = table.user_history(user);
    if history.is_empty() {
        return Err(Error::UnknownUser(user.to_string()));
    }
    let score = mean_within_bounds(history.iter().map(|(_, o)| o.score));
    Ok((score, discretize(score, &table.thresholds())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use LeaningLabel::*;

    fn month(y: i32, m: u32) -> MonthId {
        MonthId::new(y, m).unwrap()
    }

    fn posts(user: &str, m: MonthId, scores: &[f64]) -> Vec<PostScore> {
        scores.iter().map(|s| PostScore::new(user, m, *s).unwrap()).collect()
    }

    #[test]
    fn leaning_score_examples() {
        let m = month(2018, 5);
        assert!((leaning_score(&posts("u", m, &[0.9, 0.7, 0.8])).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(leaning_score(&posts("u", m, &[1.0, 0.0])).unwrap(), 0.5);
        assert!(matches!(leaning_score(&[]), Err(Error::EmptyPostSet)));
        let mut mixed = posts("u", m, &[0.1]);
        mixed.extend(posts("v", m, &[0.2]));
        assert!(matches!(leaning_score(&mixed), Err(Error::MixedKeys)));
    }

    #[test]
    fn discretize_boundaries() {
        let t = Thresholds::default();
        assert_eq!(discretize(0.4, &t).unwrap(), Democrat);
        assert_eq!(discretize(0.6, &t).unwrap(), Republican);
        assert_eq!(discretize(0.5, &t).unwrap(), Neutral);
        assert!(matches!(discretize(1.5, &t), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn thresholds_validated() {
        assert!(Thresholds::new(0.6, 0.4).is_err());
        assert!(Thresholds::new(0.0, 0.4).is_err());
        assert!(Thresholds::new(0.3, 1.0).is_err());
        assert!(Thresholds::new(0.3, 0.7).is_ok());
    }

    #[test]
    fn build_table_examples() {
        let t = Thresholds::default();
        let m5 = month(2018, 5);
        let m6 = month(2018, 6);

        let table = build_opinion_table(&posts("u", m5, &[0.2, 0.4]), t).unwrap();
        let o = table.get("u", m5).unwrap();
        assert!((o.score - 0.3).abs() < 1e-12);
        assert_eq!(o.label, Democrat);
        assert_eq!(table.len(), 1);

        let mut ps = posts("u", m5, &[0.7]);
        ps.extend(posts("u", m6, &[0.1]));
        let table = build_opinion_table(&ps, t).unwrap();
        let labels: Vec<_> = table.user_history("u").iter().map(|(_, o)| o.label).collect();
        assert_eq!(labels, vec![Republican, Democrat]);

        assert!(build_opinion_table(&[], t).unwrap().is_empty());
    }

    #[test]
    fn overall_leaning_examples() {
        let t = Thresholds::default();
        let table_of = |scores: &[f64]| {
            let mut table = OpinionTable::new(t);
            let mut m = month(2018, 5);
            for s in scores {
                table.insert("u", m, *s).unwrap();
                m = m.next();
            }
            table
        };
        let (s, l) = overall_leaning(&table_of(&[0.3, 0.7]), "u").unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert_eq!(l, Neutral);
        assert_eq!(overall_leaning(&table_of(&[0.9]), "u").unwrap(), (0.9, Republican));
        let (s, l) = overall_leaning(&table_of(&[0.35, 0.45]), "u").unwrap();
        assert_eq!(s, 0.4);
        assert_eq!(l, Democrat);
        assert!(matches!(overall_leaning(&table_of(&[0.1]), "x"), Err(Error::UnknownUser(_))));
    }

    proptest! {
        #[test]
        fn score_within_input_range(scores in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let s = leaning_score(&posts("u", month(2019, 3), &scores)).unwrap();
            let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= s && s <= hi);
        }

        #[test]
        fn discretize_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let t = Thresholds::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(discretize(lo, &t).unwrap() <= discretize(hi, &t).unwrap());
        }

        #[test]
        fn table_labels_round_trip(
            rows in proptest::collection::vec((0usize..10, 1u32..=12, 0.0f64..=1.0), 0..80)
        ) {
            let t = Thresholds::default();
            let ps: Vec<_> = rows
                .iter()
                .map(|(u, m, s)| PostScore::new(format!("u{u}"), month(2019, *m), *s).unwrap())
                .collect();
            let table = build_opinion_table(&ps, t).unwrap();
            for (_, _, o) in table.iter() {
                prop_assert_eq!(discretize(o.score, &t).unwrap(), o.label);
            }
        }
    }
}
