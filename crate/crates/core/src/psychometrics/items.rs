//! Response matrices and classical item statistics.

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::PsychError;
use crate::par::{self, Parallelism};

/// Complete binary response table, participants by items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    participants: Vec<String>,
    items: Vec<String>,
    // participant-major
    cells: Vec<bool>,
}

impl ResponseMatrix {
    pub fn new(
        participants: Vec<String>,
        items: Vec<String>,
        rows: Vec<Vec<bool>>,
    ) -> Result<Self, PsychError> {
        if participants.len() < 2 {
            return Err(PsychError::TooFewParticipants { needed: 2, got: participants.len() });
        }
        if items.is_empty() {
            return Err(PsychError::InvalidInput("response matrix needs at least one item".into()));
        }
        if rows.len() != participants.len() {
            return Err(PsychError::InvalidInput(format!(
                "{} participants but {} response rows",
                participants.len(),
                rows.len()
            )));
        }
        check_unique("participant", &participants)?;
        check_unique("item", &items)?;
        let mut cells = Vec::with_capacity(participants.len() * items.len());
        for (row, id) in rows.iter().zip(&participants) {
            if row.len() != items.len() {
                return Err(PsychError::InvalidInput(format!(
                    "participant {id} has {} responses, expected {}",
                    row.len(),
                    items.len()
                )));
            }
            cells.extend_from_slice(row);
        }
        Ok(Self { participants, items, cells })
    }

    /// Parses the `participant,<item>...` CSV layout with `0`/`1` cells.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, PsychError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| PsychError::MalformedCsv { line: 1, reason: e.to_string() })?
            .clone();
        if header.get(0) != Some("participant") {
            return Err(PsychError::MalformedCsv {
                line: 1,
                reason: "first column must be `participant`".into(),
            });
        }
        let items: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut participants = Vec::new();
        let mut rows = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| PsychError::MalformedCsv { line, reason: e.to_string() })?;
            if record.len() != items.len() + 1 {
                return Err(PsychError::MalformedCsv {
                    line,
                    reason: format!("expected {} fields, found {}", items.len() + 1, record.len()),
                });
            }
            participants.push(record[0].to_string());
            let row = record
                .iter()
                .skip(1)
                .map(|cell| match cell {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(PsychError::MalformedCsv {
                        line,
                        reason: format!("cell `{other}` is not 0 or 1"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(participants, items, rows)
    }

    pub fn participants(&self) -> &[String] {
        &self.participants
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn participant_count(&self) -> usize {
        self.participants.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn response(&self, participant: usize, item: usize) -> bool {
        self.cells[participant * self.items.len() + item]
    }

    pub fn item_index(&self, item: &str) -> Result<usize, PsychError> {
        self.items
            .iter()
            .position(|i| i == item)
            .ok_or_else(|| PsychError::UnknownItem(item.to_string()))
    }

    /// Number of items each participant answered correctly.
    pub fn totals(&self) -> Vec<usize> {
        self.cells
            .chunks(self.items.len())
            .map(|row| row.iter().filter(|&&c| c).count())
            .collect()
    }
}

fn check_unique(what: &str, ids: &[String]) -> Result<(), PsychError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(PsychError::InvalidInput(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub item: String,
    pub p_value: f64,
    pub discrimination: f64,
}

fn p_value_at(matrix: &ResponseMatrix, item: usize) -> f64 {
    let n = matrix.participant_count();
    let correct = (0..n).filter(|&p| matrix.response(p, item)).count();
    correct as f64 / n as f64
}

/// Share of participants answering `item` correctly.
pub fn item_p_value(matrix: &ResponseMatrix, item: &str) -> Result<f64, PsychError> {
    let idx = matrix.item_index(item)?;
    Ok(p_value_at(matrix, idx))
}

fn check_fraction(fraction: f64) -> Result<(), PsychError> {
    if fraction > 0.0 && fraction <= 0.5 {
        Ok(())
    } else {
        Err(PsychError::InvalidInput(format!("fraction {fraction} must be in (0, 0.5]")))
    }
}

fn segment_size(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    // guard against 0.25 * 8 landing a hair above 2
    let k = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Participant indices ordered by total score descending, id ascending.
fn score_order(matrix: &ResponseMatrix, totals: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..matrix.participant_count()).collect();
    order.sort_by(|&x, &y| {
        totals[y]
            .cmp(&totals[x])
            .then_with(|| matrix.participants[x].cmp(&matrix.participants[y]))
    });
    order
}

fn discrimination_at(matrix: &ResponseMatrix, order: &[usize], k: usize, item: usize) -> f64 {
    let top = order[..k].iter().filter(|&&p| matrix.response(p, item)).count();
    let bottom = order[order.len() - k..].iter().filter(|&&p| matrix.response(p, item)).count();
    top as f64 / k as f64 - bottom as f64 / k as f64
}

/// Upper-segment minus lower-segment correct rate, segments of
/// `ceil(fraction * n)` participants ranked by total score.
pub fn item_discrimination(matrix: &ResponseMatrix, item: &str, fraction: f64) -> Result<f64, PsychError> {
    check_fraction(fraction)?;
    let n = matrix.participant_count();
    if n < 4 {
        return Err(PsychError::TooFewParticipants { needed: 4, got: n });
    }
    let idx = matrix.item_index(item)?;
    let order = score_order(matrix, &matrix.totals());
    Ok(discrimination_at(matrix, &order, segment_size(fraction, n), idx))
}

/// P value and discrimination for every item, in matrix column order.
pub fn item_statistics(
    matrix: &ResponseMatrix,
    fraction: f64,
    mode: Parallelism,
) -> Result<Vec<ItemStats>, PsychError> {
    check_fraction(fraction)?;
    let n = matrix.participant_count();
    if n < 4 {
        return Err(PsychError::TooFewParticipants { needed: 4, got: n });
    }
    let order = score_order(matrix, &matrix.totals());
    let k = segment_size(fraction, n);
    Ok(par::map_indexed(mode, matrix.item_count(), |i| ItemStats {
        item: matrix.items[i].clone(),
        p_value: p_value_at(matrix, i),
        discrimination: discrimination_at(matrix, &order, k, i),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[u8]]) -> ResponseMatrix {
        let participants = (0..rows.len()).map(|i| format!("p{i}")).collect();
        let items = (0..rows[0].len()).map(|i| format!("q{i}")).collect();
        let rows = rows.iter().map(|r| r.iter().map(|&c| c == 1).collect()).collect();
        ResponseMatrix::new(participants, items, rows).unwrap()
    }

    #[test]
    fn p_value_simple() {
        let m = matrix(&[&[1], &[1], &[1], &[0]]);
        assert_eq!(item_p_value(&m, "q0").unwrap(), 0.75);
        let m = matrix(&[&[1], &[1]]);
        assert_eq!(item_p_value(&m, "q0").unwrap(), 1.0);
        assert!(matches!(item_p_value(&m, "zz"), Err(PsychError::UnknownItem(_))));
    }

    #[test]
    fn discrimination_extremes() {
        // q0 separates the top two from the bottom two; q1..q3 set totals
        let m = matrix(&[
            &[1, 1, 1, 1],
            &[1, 1, 1, 1],
            &[0, 1, 1, 0],
            &[0, 1, 1, 0],
            &[0, 1, 0, 0],
            &[0, 1, 0, 0],
            &[0, 0, 0, 0],
            &[0, 0, 0, 0],
        ]);
        assert_eq!(item_discrimination(&m, "q0", 0.25).unwrap(), 1.0);
        let all = matrix(&[&[1], &[1], &[1], &[1], &[1]]);
        assert_eq!(item_discrimination(&all, "q0", 0.25).unwrap(), 0.0);
        let small = matrix(&[&[1], &[0], &[1]]);
        assert!(matches!(
            item_discrimination(&small, "q0", 0.25),
            Err(PsychError::TooFewParticipants { .. })
        ));
        assert!(item_discrimination(&all, "q0", 0.6).is_err());
    }

    #[test]
    fn csv_parsing() {
        let csv = "participant,q1,q2\nalice,1,0\nbob,0,1\n";
        let m = ResponseMatrix::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(m.items(), ["q1", "q2"]);
        assert!(m.response(0, 0) && !m.response(0, 1));
        let bad = "participant,q1\nalice,2\n";
        assert!(matches!(
            ResponseMatrix::from_csv(bad.as_bytes()),
            Err(PsychError::MalformedCsv { line: 2, .. })
        ));
        let bad = "who,q1\nalice,1\nbob,1\n";
        assert!(matches!(ResponseMatrix::from_csv(bad.as_bytes()), Err(PsychError::MalformedCsv { line: 1, .. })));
        let dup = "participant,q1\nalice,1\nalice,0\n";
        assert!(ResponseMatrix::from_csv(dup.as_bytes()).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let m = matrix(&[&[1, 0, 1], &[0, 0, 1], &[1, 1, 1], &[0, 1, 0], &[1, 1, 0]]);
        for mode in [Parallelism::Sequential, Parallelism::Parallel] {
            let stats = item_statistics(&m, 0.25, mode).unwrap();
            for s in &stats {
                assert_eq!(s.p_value, item_p_value(&m, &s.item).unwrap());
                assert_eq!(s.discrimination, item_discrimination(&m, &s.item, 0.25).unwrap());
            }
        }
    }
}
