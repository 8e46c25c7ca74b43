use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abac::{
    AbacPolicy, AccessLog, AttributeDef, AttributeKind, AttributeSchema, CompiledPolicy, Decision,
    LogEntry, DECISION_COLUMN, OPERATION_COLUMN,
};
use crate::error::{Error, Result};
use crate::featurizer::{State, StateEnumerator};

pub const DEFAULT_ENUMERATION_LIMIT: u64 = 10_000_000;

/// Every request of the schema's cross product, in lexicographic order
/// (operation fastest), labeled by the policy.
pub fn gen_complete_log(policy: &AbacPolicy) -> Result<AccessLog> {
    gen_complete_log_capped(policy, DEFAULT_ENUMERATION_LIMIT)
}

pub fn gen_complete_log_capped(policy: &AbacPolicy, cap: u64) -> Result<AccessLog> {
    let size = policy.schema.enumeration_size();
    if size > cap as u128 {
        return Err(Error::CapExceeded { size, cap });
    }
    let compiled = CompiledPolicy::new(policy)?;
    let entries = StateEnumerator::all(&policy.schema)
        .iter()
        .map(|state| {
            let decision = compiled.decide_state(&state);
            LogEntry { state, decision }
        })
        .collect();
    Ok(AccessLog::from_entries_unchecked(
        Arc::clone(&policy.schema),
        entries,
    ))
}

/// `⌈fraction·|log|⌉` entries drawn uniformly without replacement, in their original order.
pub fn sample_partial_log(log: &AccessLog, fraction: f64, seed: u64) -> Result<AccessLog> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::OutOfRange {
            value: fraction,
            min: 0.0,
            max: 1.0,
        });
    }
    let n = log.len();
    let k = ((fraction * n as f64).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    let entries = picked
        .into_iter()
        .map(|i| log.entries()[i].clone())
        .collect();
    Ok(AccessLog::from_entries_unchecked(
        Arc::clone(log.schema()),
        entries,
    ))
}

pub fn shuffle_log(log: &AccessLog, seed: u64) -> AccessLog {
    let mut entries = log.entries().to_vec();
    entries.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    AccessLog::from_entries_unchecked(Arc::clone(log.schema()), entries)
}

/// Writes `decision,<attrs...>,operation` with one row per entry.
pub fn save_log(log: &AccessLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    let schema = log.schema();
    let mut header = vec![DECISION_COLUMN];
    header.extend(schema.attributes().iter().map(|a| a.name.as_str()));
    header.push(OPERATION_COLUMN);
    w.write_record(&header)?;
    let mut row: Vec<&str> = Vec::with_capacity(header.len());
    for e in log.entries() {
        row.clear();
        row.push(e.decision.as_str());
        row.extend(e.state.symbols(schema));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct RawLog {
    attrs: Vec<String>,
    rows: Vec<(u64, Decision, Vec<String>, String)>,
}

fn read_raw(path: &Path) -> Result<RawLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().from_reader(file);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[0] != DECISION_COLUMN || cols[cols.len() - 1] != OPERATION_COLUMN {
        return Err(parse_err(
            1,
            format!("header must be '{DECISION_COLUMN},<attributes...>,{OPERATION_COLUMN}'"),
        ));
    }
    let attrs: Vec<String> = cols[1..cols.len() - 1]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", cols.len(), record.len()),
            ));
        }
        let decision: Decision = record[0].parse().map_err(|e: String| parse_err(line, e))?;
        let values = (1..cols.len() - 1).map(|i| record[i].to_string()).collect();
        rows.push((line, decision, values, record[cols.len() - 1].to_string()));
    }
    Ok(RawLog { attrs, rows })
}

/// Reads a log, inferring the schema: every column a user attribute, value
/// ranges as the sorted distinct values seen.
pub fn load_log(path: impl AsRef<Path>) -> Result<AccessLog> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let mut ranges = vec![BTreeSet::new(); raw.attrs.len()];
    let mut ops = BTreeSet::new();
    for (_, _, values, op) in &raw.rows {
        for (set, v) in ranges.iter_mut().zip(values) {
            set.insert(v.as_str());
        }
        ops.insert(op.as_str());
    }
    if raw.rows.is_empty() {
        return Err(Error::Empty(
            "log has a header but no rows; its schema cannot be inferred",
        ));
    }
    let attributes = raw
        .attrs
        .iter()
        .zip(&ranges)
        .map(|(name, set)| {
            AttributeDef::new(name.as_str(), AttributeKind::User, set.iter().copied())
        })
        .collect();
    let schema = Arc::new(AttributeSchema::new(attributes, ops)?);
    encode(path, raw, &schema)
}

/// Reads a log against a known schema; columns may appear in any order.
pub fn load_log_with_schema(
    path: impl AsRef<Path>,
    schema: &Arc<AttributeSchema>,
) -> Result<AccessLog> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    encode(path, raw, schema)
}

fn encode(path: &Path, raw: RawLog, schema: &Arc<AttributeSchema>) -> Result<AccessLog> {
    if raw.attrs.len() != schema.num_attributes() {
        return Err(Error::SchemaMismatch(format!(
            "{}: {} attribute columns, schema has {}",
            path.display(),
            raw.attrs.len(),
            schema.num_attributes()
        )));
    }
    let column_of = raw
        .attrs
        .iter()
        .map(|a| {
            schema.attribute_index(a).ok_or_else(|| {
                Error::SchemaMismatch(format!("{}: unknown column '{a}'", path.display()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if column_of.iter().collect::<BTreeSet<_>>().len() != column_of.len() {
        return Err(Error::SchemaMismatch(format!(
            "{}: duplicate attribute column",
            path.display()
        )));
    }
    let mut entries = Vec::with_capacity(raw.rows.len());
    for (line, decision, values, op) in raw.rows {
        let bad = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let mut state = State {
            values: vec![0; schema.num_attributes()],
            op: schema
                .operation_index(&op)
                .ok_or_else(|| bad(format!("unknown operation '{op}'")))?,
        };
        for (col, v) in values.iter().enumerate() {
            let attr = column_of[col];
            state.values[attr] = schema
                .value_index(attr, v)
                .ok_or_else(|| bad(format!("value '{v}' not in V({})", raw.attrs[col])))?;
        }
        entries.push(LogEntry { state, decision });
    }
    Ok(AccessLog::from_entries_unchecked(
        Arc::clone(schema),
        entries,
    ))
}
