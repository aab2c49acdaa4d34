//! Memory columns and the bookkeeping that decides which ones stay alive.

use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::learners::ParamSnapshot;
use crate::panel::TimeId;
use crate::similarity::ContextRepresentation;

/// A stored (context representation, parameters) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryColumn {
    pub id: u64,
    pub created_at: TimeId,
    pub repr: ContextRepresentation,
    pub params: ParamSnapshot,
}

/// Memory columns in creation order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    columns: Vec<MemoryColumn>,
    capacity: Option<usize>,
}

impl MemoryStore {
    pub fn new(capacity: Option<usize>) -> Result<Self> {
        if capacity == Some(0) {
            return Err(ClaError::Precondition("memory capacity must be positive".into()));
        }
        Ok(Self { columns: Vec::new(), capacity })
    }

    /// Builds a store from columns, checking creation order and capacity.
    pub fn from_columns(columns: Vec<MemoryColumn>, capacity: Option<usize>) -> Result<Self> {
        let mut store = Self::new(capacity)?;
        for c in columns {
            store.append(c)?;
        }
        Ok(store)
    }

    /// Appends a column. Creation times and ids must strictly increase and
    /// the store must have room.
    pub fn append(&mut self, column: MemoryColumn) -> Result<()> {
        if let Some(last) = self.columns.last() {
            if column.created_at <= last.created_at || column.id <= last.id {
                return Err(ClaError::Precondition(format!(
                    "memory {} created at `{}` does not follow memory {} at `{}`",
                    column.id, column.created_at, last.id, last.created_at
                )));
            }
        }
        if self.capacity.is_some_and(|c| self.columns.len() >= c) {
            return Err(ClaError::Precondition("memory store is full".into()));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn columns(&self) -> &[MemoryColumn] {
        &self.columns
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&MemoryColumn> {
        self.columns.iter().find(|c| c.id == id)
    }

    /// JSON array of columns.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.columns)?)
    }

    pub fn from_json(s: &str) -> Result<Vec<MemoryColumn>> {
        let cols: Vec<MemoryColumn> = serde_json::from_str(s)?;
        for c in &cols {
            c.params.validate()?;
            if let ContextRepresentation::Ae { params } = &c.repr {
                params.validate()?;
            }
        }
        Ok(cols)
    }
}

/// Live memory entry: `source` is the step whose base learner was stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Slot {
    pub id: u64,
    pub source: usize,
    pub created: usize,
    last_max: usize,
}

/// Alive memories with least-recently-max-weight eviction.
#[derive(Clone, Debug, Default)]
pub(crate) struct Slots {
    items: Vec<Slot>,
    capacity: Option<usize>,
    next_id: u64,
}

impl Slots {
    pub fn new(capacity: Option<usize>) -> Self {
        Self { items: Vec::new(), capacity, next_id: 0 }
    }

    pub fn items(&self) -> &[Slot] {
        &self.items
    }

    /// Adds a memory created at `step`; returns its id and any evicted id.
    pub fn push(&mut self, source: usize, step: usize) -> (u64, Option<u64>) {
        let mut evicted = None;
        if self.capacity.is_some_and(|c| self.items.len() >= c) {
            let victim = self
                .items
                .iter()
                .enumerate()
                .min_by_key(|(_, s)| (s.last_max, s.id))
                .map(|(i, _)| i)
                .expect("full store is nonempty");
            evicted = Some(self.items.remove(victim).id);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.items.push(Slot { id, source, created: step, last_max: step });
        (id, evicted)
    }

    pub fn mark_max(&mut self, id: u64, step: usize) {
        if let Some(s) = self.items.iter_mut().find(|s| s.id == id) {
            s.last_max = step;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eviction_prefers_stale_memories() {
        let mut s = Slots::new(Some(2));
        assert_eq!(s.push(0, 1), (0, None));
        assert_eq!(s.push(1, 2), (1, None));
        s.mark_max(0, 3);
        assert_eq!(s.push(2, 4), (2, Some(1)));
        let ids: Vec<u64> = s.items().iter().map(|x| x.id).collect();
        assert_eq!(ids, vec![0, 2]);
    }

    #[test]
    fn unlimited_never_evicts() {
        let mut s = Slots::new(None);
        for i in 0..50 {
            assert_eq!(s.push(i, i + 1).1, None);
        }
        assert_eq!(s.items().len(), 50);
    }
}
