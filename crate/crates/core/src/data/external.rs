use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::abac::{AccessLog, AttributeDef, AttributeKind, AttributeSchema, Decision, LogEntry};
use crate::error::{Error, Result};
use crate::featurizer::{FeatureMode, State};

use super::DatasetBundle;

/// Operation given to every request of an external dataset.
pub const EXTERNAL_OPERATION: &str = "access";
/// Above this many values an external dataset is featurized by hashing.
pub const HASHING_THRESHOLD: usize = 5000;

#[derive(Clone, Debug, Default)]
pub struct ExternalCsvOptions {
    /// Columns to tag as object attributes; all others are user attributes.
    pub object_columns: Vec<String>,
}

/// Loads a labeled CSV: each non-label column is a categorical attribute,
/// value ranges are the distinct values in first-seen order, and a row is a
/// permit iff its label equals `positive_label`.
pub fn load_external_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    positive_label: &str,
    options: &ExternalCsvOptions,
) -> Result<DatasetBundle> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = r.headers()?.clone();
    let label = header
        .iter()
        .position(|c| c == label_column)
        .ok_or_else(|| {
            Error::SchemaMismatch(format!("{}: no column '{label_column}'", path.display()))
        })?;
    for col in &options.object_columns {
        if !header.iter().any(|c| c == col) || col == label_column {
            return Err(Error::SchemaMismatch(format!(
                "{}: no attribute column '{col}'",
                path.display()
            )));
        }
    }
    let columns: Vec<usize> = (0..header.len()).filter(|&i| i != label).collect();
    if columns.is_empty() {
        return Err(Error::Empty("external CSV has no attribute columns"));
    }

    let mut interned: Vec<HashMap<String, u32>> = vec![HashMap::new(); columns.len()];
    let mut values: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
    let mut entries = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let state_values = columns
            .iter()
            .enumerate()
            .map(|(a, &c)| {
                let v = &record[c];
                *interned[a].entry(v.to_string()).or_insert_with(|| {
                    values[a].push(v.to_string());
                    (values[a].len() - 1) as u32
                })
            })
            .collect();
        let decision = if &record[label] == positive_label {
            Decision::Permit
        } else {
            Decision::Deny
        };
        entries.push(LogEntry {
            state: State {
                values: state_values,
                op: 0,
            },
            decision,
        });
    }
    if entries.is_empty() {
        return Err(Error::Empty("external CSV has no data rows"));
    }

    let attributes = columns
        .iter()
        .zip(values)
        .map(|(&c, vals)| {
            let name = &header[c];
            let kind = if options.object_columns.iter().any(|o| o == name) {
                AttributeKind::Object
            } else {
                AttributeKind::User
            };
            AttributeDef::new(name, kind, vals)
        })
        .collect();
    let schema = Arc::new(AttributeSchema::new(attributes, [EXTERNAL_OPERATION])?);
    let mode = if schema.total_values() > HASHING_THRESHOLD {
        FeatureMode::Hashed
    } else {
        FeatureMode::Exact
    };
    Ok(DatasetBundle {
        log: AccessLog::from_entries_unchecked(Arc::clone(&schema), entries),
        schema,
        policy: None,
        hierarchy: None,
        mode,
    })
}
