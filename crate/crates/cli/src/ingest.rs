//! Preprocessing of depression-trial style exports with one quality-of-life
//! score per stage into the standard three-category SMART dataset.
//!
//! The composite score is `y1` for responders and `(y1 + y2) / 2` for
//! non-responders. Composites below 3 map to category 1 (poor), exactly 3 to
//! category 2 (fair) and above 3 to category 3 (good), so 2.5 is poor and
//! 3.5 is good.

use std::io::Read;

use dgor_core::{SmartDataset, SmartDesign, Trajectory};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Categories produced by [`composite_category`].
pub const COMPOSITE_CATEGORIES: usize = 3;

#[derive(Debug, Deserialize)]
struct Row {
    patient_id: String,
    stage1: String,
    responder: String,
    #[serde(default)]
    stage2: String,
    y1: String,
    #[serde(default)]
    y2: String,
}

fn score(patient_id: &str, field: &'static str, raw: &str) -> Result<u8> {
    match raw.parse::<u8>() {
        Ok(v) if (1..=5).contains(&v) => Ok(v),
        _ => Err(CliError::BadCategory {
            patient_id: patient_id.to_string(),
            field,
            value: raw.to_string(),
        }),
    }
}

/// Category of the composite score. `y2` is ignored for responders.
pub fn composite_category(responder: bool, y1: u8, y2: Option<u8>) -> Option<usize> {
    // twice the composite keeps half-integers exact
    let doubled = if responder {
        2 * u16::from(y1)
    } else {
        u16::from(y1) + u16::from(y2?)
    };
    Some(match doubled.cmp(&6) {
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => 2,
        std::cmp::Ordering::Greater => 3,
    })
}

/// Reads `patient_id,stage1,responder,stage2,y1,y2` rows. `y2` and `stage2`
/// may be empty for responders. The design is inferred when not given.
pub fn ingest_stard_like<R: Read>(reader: R, design: Option<SmartDesign>) -> Result<SmartDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut trajectories = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let responder = match row.responder.as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(CliError::Usage(format!(
                    "patient {}: responder flag must be 0 or 1, got {other:?}",
                    row.patient_id
                )))
            }
        };
        let y1 = score(&row.patient_id, "y1", &row.y1)?;
        let y2 = if responder || row.y2.is_empty() {
            None
        } else {
            Some(score(&row.patient_id, "y2", &row.y2)?)
        };
        let outcome = composite_category(responder, y1, y2)
            .ok_or_else(|| CliError::MissingY2ForNonResponder(row.patient_id.clone()))?;
        let stage2 = if responder && row.stage2.is_empty() {
            row.stage1.clone()
        } else {
            row.stage2
        };
        trajectories.push(Trajectory {
            patient_id: row.patient_id,
            stage1: row.stage1,
            responder,
            stage2,
            outcome,
        });
    }
    let design = design.unwrap_or_else(|| SmartDesign::infer(&trajectories));
    Ok(SmartDataset::new(design, trajectories, COMPOSITE_CATEGORIES)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_cuts() {
        assert_eq!(composite_category(true, 4, None), Some(3));
        assert_eq!(composite_category(false, 2, Some(3)), Some(1));
        assert_eq!(composite_category(false, 3, Some(4)), Some(3));
        assert_eq!(composite_category(false, 3, Some(3)), Some(2));
        assert_eq!(composite_category(true, 3, Some(1)), Some(2));
        assert_eq!(composite_category(false, 3, None), None);
    }

    #[test]
    fn missing_y2() {
        let csv = "patient_id,stage1,responder,stage2,y1,y2\nP1,M,0,C,2,\n";
        let err = ingest_stard_like(csv.as_bytes(), None).unwrap_err();
        assert!(matches!(err, CliError::MissingY2ForNonResponder(ref p) if p == "P1"));
    }

    #[test]
    fn out_of_range_score() {
        let csv = "patient_id,stage1,responder,stage2,y1,y2\nP1,M,1,,6,\n";
        let err = ingest_stard_like(csv.as_bytes(), None).unwrap_err();
        assert_eq!(err.code(), "ingest.bad_category");
    }

    #[test]
    fn responders_keep_stage1() {
        let csv = "patient_id,stage1,responder,stage2,y1,y2\n\
                   P1,M,1,,4,\nP2,M,0,C,2,3\nP3,C,1,C,3,\nP4,C,0,M,5,4\n";
        let data = ingest_stard_like(csv.as_bytes(), None).unwrap();
        let outcomes: Vec<_> = data.trajectories().iter().map(|t| t.outcome).collect();
        assert_eq!(outcomes, [3, 1, 2, 3]);
        assert_eq!(data.trajectories()[0].stage2, "M");
    }
}
