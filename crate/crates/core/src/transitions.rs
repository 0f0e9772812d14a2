//! Leaning-state transition probabilities and user retention across
//! contiguous months.

use crate::error::{Error, Result};
use crate::model::{LeaningLabel, MonthId, OpinionTable};
use crate::par::{self, Execution};

/// Row-stochastic 3x3 matrix; rows are the label at `from_month`, columns
/// the label at `to_month`, both in Democrat, Neutral, Republican order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub from_month: MonthId,
    pub to_month: MonthId,
    pub p: [[f64; 3]; 3],
    /// Users present in both months, per source label.
    pub row_counts: [u64; 3],
}

impl TransitionMatrix {
    pub fn probability(&self, from: LeaningLabel, to: LeaningLabel) -> f64 {
        self.p[from.index()][to.index()]
    }

    /// Rows with no source users; these are all-zero.
    pub fn empty_rows(&self) -> [bool; 3] {
        self.row_counts.map(|c| c == 0)
    }
}

/// Users absent at `m + 1` are left out of both numerator and denominator.
pub fn transition_matrix(table: &OpinionTable, m: MonthId) -> TransitionMatrix {
    let to_month = m.next();
    let mut counts = [[0u64; 3]; 3];
    if let (Some(now), Some(next)) = (table.month(m), table.month(to_month)) {
        for (user, o) in now {
            if let Some(o1) = next.get(user) {
                counts[o.label.index()][o1.label.index()] += 1;
            }
        }
    }
    let row_counts = counts.map(|row| row.iter().sum::<u64>());
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        if row_counts[i] > 0 {
            for j in 0..3 {
                p[i][j] = counts[i][j] as f64 / row_counts[i] as f64;
            }
        }
    }
    TransitionMatrix { from_month: m, to_month, p, row_counts }
}

/// Share of users active at `m` who are also active at `m + 1`.
pub fn retention(table: &OpinionTable, m: MonthId) -> Result<f64> {
    let now = table.month(m).filter(|u| !u.is_empty()).ok_or(Error::EmptyMonth(m))?;
    let stayed = match table.month(m.next()) {
        Some(next) => now.keys().filter(|u| next.contains_key(*u)).count(),
        None => 0,
    };
    Ok(stayed as f64 / now.len() as f64)
}

/// Months `m` of the table for which `m + 1` is also present, chronologically.
pub fn contiguous_months(table: &OpinionTable) -> Vec<MonthId> {
    let months: Vec<MonthId> = table.months().collect();
    months.windows(2).filter(|w| w[0].next() == w[1]).map(|w| w[0]).collect()
}

pub fn transition_series(table: &OpinionTable, exec: Execution) -> Result<Vec<TransitionMatrix>> {
    let starts = contiguous_months(table);
    if starts.is_empty() {
        return Err(Error::InsufficientMonths);
    }
    Ok(par::map(exec, &starts, |m| transition_matrix(table, *m)))
}
