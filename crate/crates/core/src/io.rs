//! CSV and JSON formats.
//!
//! | file           | header                                                                   |
//! |----------------|--------------------------------------------------------------------------|
//! | posts          | `user_id,month,score`                                                    |
//! | interactions   | `month,user_a,user_b,count`                                              |
//! | estimates      | `user_id,month_from,month_to,cb_hat,x_hat,prefix_j,n_neighbors,abs_error` |
//! | opinions       | `user_id,month,score,label`                                              |
//! | graph stats    | `month,n,n_rep,n_dem,n_neu,e,avg_degree,edges_per_node,assortativity`    |
//! | histogram      | `bin_lo,bin_hi,count`                                                    |
//! | dispersion     | `user_id,mean,std_dev,fano,n_obs`                                        |
//!
//! Months are `YYYY-MM`. Estimates use 12 significant digits; opinion scores
//! are written in shortest round-trip form so re-ingestion is lossless.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::error::Result;
use crate::estimator::EstimationResult;
use crate::graph::{MeanStats, NetworkStats};
use crate::model::{validate_score, InteractionRecord, LeaningLabel, MonthId, OpinionTable, PostScore};
use crate::stats::{DispersionSummary, Histogram};
use crate::transitions::TransitionMatrix;

pub const POSTS_HEADER: [&str; 3] = ["user_id", "month", "score"];
pub const INTERACTIONS_HEADER: [&str; 4] = ["month", "user_a", "user_b", "count"];
pub const ESTIMATES_HEADER: [&str; 8] =
    ["user_id", "month_from", "month_to", "cb_hat", "x_hat", "prefix_j", "n_neighbors", "abs_error"];

/// Row-level ingestion failure. Line numbers count the header as line 1.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("bad header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("line {0}: malformed row")]
    MalformedRow(u64),
    #[error("line {0}: bad month (expected YYYY-MM)")]
    BadMonth(u64),
    #[error("line {0}: score out of range [0, 1]")]
    OutOfRange(u64),
    #[error("line {0}: self-interaction")]
    SelfLoop(u64),
    #[error("line {0}: count must be a positive integer")]
    NonPositiveCount(u64),
}

/// Parsed rows plus the rows dropped in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub rows: Vec<T>,
    pub dropped: Vec<ParseError>,
}

impl<T> Parsed<T> {
    pub fn ingested(&self) -> usize {
        self.rows.len() + self.dropped.len()
    }
}

fn read_rows<R: Read, T>(
    input: R,
    header: &[&str],
    lenient: bool,
    mut parse: impl FnMut(&csv::StringRecord, u64) -> std::result::Result<T, ParseError>,
) -> Result<Parsed<T>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let found = reader.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(ParseError::BadHeader {
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        }
        .into());
    }
    let mut parsed = Parsed { rows: Vec::new(), dropped: Vec::new() };
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                let err = ParseError::MalformedRow(line);
                if lenient {
                    parsed.dropped.push(err);
                    continue;
                }
                return Err(err.into());
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let outcome =
            if record.len() != header.len() { Err(ParseError::MalformedRow(line)) } else { parse(&record, line) };
        match outcome {
            Ok(row) => parsed.rows.push(row),
            Err(e) if lenient => parsed.dropped.push(e),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(parsed)
}

fn parse_month(s: &str, line: u64) -> std::result::Result<MonthId, ParseError> {
    s.parse().map_err(|_| ParseError::BadMonth(line))
}

fn parse_unit(s: &str, line: u64) -> std::result::Result<f64, ParseError> {
    let x: f64 = s.parse().map_err(|_| ParseError::MalformedRow(line))?;
    validate_score(x).map_err(|_| ParseError::OutOfRange(line))
}

fn parse_user(s: &str, line: u64) -> std::result::Result<String, ParseError> {
    if s.is_empty() {
        return Err(ParseError::MalformedRow(line));
    }
    Ok(s.to_string())
}

pub fn parse_posts<R: Read>(input: R, lenient: bool) -> Result<Parsed<PostScore>> {
    read_rows(input, &POSTS_HEADER, lenient, |r, line| {
        let user = parse_user(&r[0], line)?;
        let month = parse_month(&r[1], line)?;
        let score = parse_unit(&r[2], line)?;
        PostScore::new(user, month, score).map_err(|_| ParseError::OutOfRange(line))
    })
}

pub fn parse_interactions<R: Read>(input: R, lenient: bool) -> Result<Parsed<InteractionRecord>> {
    read_rows(input, &INTERACTIONS_HEADER, lenient, |r, line| {
        let month = parse_month(&r[0], line)?;
        let a = parse_user(&r[1], line)?;
        let b = parse_user(&r[2], line)?;
        let count: i64 = r[3].parse().map_err(|_| ParseError::MalformedRow(line))?;
        if count <= 0 {
            return Err(ParseError::NonPositiveCount(line));
        }
        if a == b {
            return Err(ParseError::SelfLoop(line));
        }
        InteractionRecord::new(month, a, b, count as u64).map_err(|_| ParseError::MalformedRow(line))
    })
}

/// Reads an estimates CSV back. Always strict.
pub fn parse_estimates<R: Read>(input: R) -> Result<Vec<EstimationResult>> {
    let parsed = read_rows(input, &ESTIMATES_HEADER, false, |r, line| {
        let bad = || ParseError::MalformedRow(line);
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let prefix_j = int(&r[5])?;
        let n_neighbors = int(&r[6])?;
        let abs_error: f64 = r[7].parse().map_err(|_| bad())?;
        if prefix_j > n_neighbors || n_neighbors == 0 || abs_error.is_nan() || abs_error < 0.0 {
            return Err(bad());
        }
        Ok(EstimationResult {
            user_id: parse_user(&r[0], line)?,
            from_month: parse_month(&r[1], line)?,
            to_month: parse_month(&r[2], line)?,
            cb_hat: parse_unit(&r[3], line)?,
            x_hat: parse_unit(&r[4], line)?,
            prefix_j,
            n_neighbors,
            abs_error,
            degenerate: prefix_j == 0,
        })
    })?;
    Ok(parsed.rows)
}

/// Formats a real with 12 significant digits, trimming trailing zeros.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into a new leading digit (9.99..96 -> 10.00..0); trimming covers it
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_posts<W: Write>(out: W, posts: &[PostScore]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(POSTS_HEADER)?;
    for p in posts {
        w.write_record([p.user_id.as_str(), &p.month.to_string(), &p.score().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_interactions<W: Write>(out: W, records: &[InteractionRecord]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(INTERACTIONS_HEADER)?;
    for r in records {
        w.write_record([&r.month.to_string(), r.user_a(), r.user_b(), &r.count().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows ordered by user, then month.
pub fn write_opinions<W: Write>(out: W, table: &OpinionTable) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["user_id", "month", "score", "label"])?;
    for user in table.users() {
        for (m, o) in table.user_history(user) {
            w.write_record([user, &m.to_string(), &o.score.to_string(), o.label.name()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimates<W: Write>(out: W, results: &[EstimationResult]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(ESTIMATES_HEADER)?;
    for r in results {
        w.write_record([
            r.user_id.clone(),
            r.from_month.to_string(),
            r.to_month.to_string(),
            fmt_sig12(r.cb_hat),
            fmt_sig12(r.x_hat),
            r.prefix_j.to_string(),
            r.n_neighbors.to_string(),
            fmt_sig12(r.abs_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), fmt_sig12)
}

/// One row per month followed by a `mean` row. Undefined assortativity is
/// written as `undefined`.
pub fn write_graph_stats<W: Write>(out: W, per_month: &[(MonthId, NetworkStats)], mean: &MeanStats) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["month", "n", "n_rep", "n_dem", "n_neu", "e", "avg_degree", "edges_per_node", "assortativity"])?;
    for (m, s) in per_month {
        w.write_record([
            m.to_string(),
            s.n_nodes.to_string(),
            s.n_rep.to_string(),
            s.n_dem.to_string(),
            s.n_neu.to_string(),
            s.n_edges.to_string(),
            fmt_sig12(s.avg_degree),
            fmt_sig12(s.edges_per_node),
            opt(s.assortativity),
        ])?;
    }
    w.write_record([
        "mean".to_string(),
        fmt_sig12(mean.n_nodes),
        fmt_sig12(mean.n_rep),
        fmt_sig12(mean.n_dem),
        fmt_sig12(mean.n_neu),
        fmt_sig12(mean.n_edges),
        fmt_sig12(mean.avg_degree),
        fmt_sig12(mean.edges_per_node),
        opt(mean.assortativity),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(out: W, h: &Histogram) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (lo, hi, c) in h.bins() {
        w.write_record([fmt_sig12(lo), fmt_sig12(hi), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dispersion<W: Write>(out: W, rows: &[DispersionSummary]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["user_id", "mean", "std_dev", "fano", "n_obs"])?;
    for d in rows {
        w.write_record([d.user_id.clone(), fmt_sig12(d.mean), fmt_sig12(d.std_dev), opt(d.fano), d.n_obs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RowIndex {
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "R")]
    r: usize,
}

#[derive(Debug, Serialize)]
struct TransitionEntry {
    from: MonthId,
    to: MonthId,
    rows: RowIndex,
    matrix: [[f64; 3]; 3],
    row_counts: [u64; 3],
    empty_rows: [bool; 3],
    retention: Option<f64>,
}

/// Transition series as a JSON array; `rows` maps each label to its
/// row/column index in `matrix`.
pub fn transitions_json(series: &[TransitionMatrix], retention: &[Option<f64>]) -> Result<String> {
    let entries: Vec<TransitionEntry> = series
        .iter()
        .enumerate()
        .map(|(k, tm)| TransitionEntry {
            from: tm.from_month,
            to: tm.to_month,
            rows: RowIndex {
                d: LeaningLabel::Democrat.index(),
                n: LeaningLabel::Neutral.index(),
                r: LeaningLabel::Republican.index(),
            },
            matrix: tm.p,
            row_counts: tm.row_counts,
            empty_rows: tm.empty_rows(),
            retention: retention.get(k).copied().flatten(),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&entries)?;
    s.push('\n');
    Ok(s)
}
