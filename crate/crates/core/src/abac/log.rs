use std::sync::Arc;

use super::request::{AccessRequest, Decision};
use super::schema::AttributeSchema;
use crate::error::Result;
use crate::featurizer::{get_request, get_state, State};

/// `l = <q, d>`: a request together with the decision taken for it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AuthorizationTuple {
    pub request: AccessRequest,
    pub decision: Decision,
}

/// A log entry in encoded form. Requests and states are in bijection under
/// the log's schema, so the log stores states and materializes requests on demand.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LogEntry {
    pub state: State,
    pub decision: Decision,
}

/// An ordered access log over one shared schema.
#[derive(Clone, Debug, PartialEq)]
pub struct AccessLog {
    schema: Arc<AttributeSchema>,
    entries: Vec<LogEntry>,
}

impl AccessLog {
    pub fn new(schema: Arc<AttributeSchema>) -> Self {
        AccessLog {
            schema,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(schema: Arc<AttributeSchema>, entries: Vec<LogEntry>) -> Result<Self> {
        for e in &entries {
            e.state.validate(&schema)?;
        }
        Ok(AccessLog { schema, entries })
    }

    pub(crate) fn from_entries_unchecked(
        schema: Arc<AttributeSchema>,
        entries: Vec<LogEntry>,
    ) -> Self {
        AccessLog { schema, entries }
    }

    pub fn schema(&self) -> &Arc<AttributeSchema> {
        &self.schema
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<LogEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push_state(&mut self, state: State, decision: Decision) -> Result<()> {
        state.validate(&self.schema)?;
        self.entries.push(LogEntry { state, decision });
        Ok(())
    }

    pub fn push(&mut self, request: &AccessRequest, decision: Decision) -> Result<()> {
        let state = get_state(&self.schema, request)?;
        self.entries.push(LogEntry { state, decision });
        Ok(())
    }

    pub fn tuple(&self, index: usize) -> Option<AuthorizationTuple> {
        self.entries.get(index).map(|e| AuthorizationTuple {
            request: get_request(&self.schema, &e.state),
            decision: e.decision,
        })
    }

    pub fn tuples(&self) -> impl Iterator<Item = AuthorizationTuple> + '_ {
        self.entries.iter().map(|e| AuthorizationTuple {
            request: get_request(&self.schema, &e.state),
            decision: e.decision,
        })
    }

    /// Number of entries with the given decision.
    pub fn count(&self, decision: Decision) -> usize {
        self.entries
            .iter()
            .filter(|e| e.decision == decision)
            .count()
    }

    /// Loss of always answering the more frequent decision.
    pub fn majority_loss(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let permits = self.count(Decision::Permit);
        let minority = permits.min(self.entries.len() - permits);
        minority as f64 / self.entries.len() as f64
    }

    /// Re-expresses the log over a wider schema (e.g. a union schema).
    pub fn reencode(&self, target: &Arc<AttributeSchema>) -> Result<AccessLog> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let request = get_request(&self.schema, &e.state);
                Ok(LogEntry {
                    state: get_state(target, &request)?,
                    decision: e.decision,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AccessLog {
            schema: Arc::clone(target),
            entries,
        })
    }
}
