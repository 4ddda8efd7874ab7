use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Initial,
    Accepted,
    /// A multistep method fell back to a one-step start.
    Bootstrap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry {
    pub t: f64,
    pub x: Vec<f64>,
    /// Step that produced this state; zero for the initial state.
    pub dt: f64,
    pub status: StepStatus,
}

/// Bounded buffer of recent states, oldest evicted first.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionHistory {
    capacity: usize,
    entries: VecDeque<HistoryEntry>,
}

impl SolutionHistory {
    pub fn new(capacity: usize) -> Result<SolutionHistory> {
        if capacity < 3 {
            return Err(Error::InvalidArgument(format!(
                "history capacity {capacity} is below 3"
            )));
        }
        Ok(SolutionHistory {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a state; times must strictly increase.
    pub fn push(&mut self, entry: HistoryEntry) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if !(entry.t > last.t) {
                return Err(Error::InvalidArgument(format!(
                    "history time {} does not follow {}",
                    entry.t, last.t
                )));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        Ok(())
    }

    pub fn last(&self) -> Option<&HistoryEntry> {
        self.entries.back()
    }

    /// `back(0)` is the newest entry.
    pub fn back(&self, k: usize) -> Option<&HistoryEntry> {
        self.entries.len().checked_sub(k + 1).map(|i| &self.entries[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
