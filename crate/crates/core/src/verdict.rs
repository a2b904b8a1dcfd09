//! Three-valued answers with the search effort that produced them.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Yes => "YES",
            Status::No => "NO",
            Status::Unknown => "UNKNOWN",
        })
    }
}

/// Effort spent by a bounded search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub steps: usize,
    pub nodes: usize,
    pub depth: usize,
    /// True when a limit stopped the search before it could conclude.
    pub exhausted: bool,
}

impl Budget {
    pub fn absorb(&mut self, other: &Budget) {
        self.steps += other.steps;
        self.nodes += other.nodes;
        self.depth = self.depth.max(other.depth);
        self.exhausted |= other.exhausted;
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "steps {}, nodes {}, depth {}", self.steps, self.nodes, self.depth)?;
        if self.exhausted {
            f.write_str(", budget exhausted")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict<W> {
    pub status: Status,
    pub witness: Option<W>,
    pub budget: Budget,
    pub note: String,
}

impl<W> Verdict<W> {
    pub fn yes(witness: W, budget: Budget) -> Self {
        Verdict { status: Status::Yes, witness: Some(witness), budget, note: String::new() }
    }

    pub fn no(witness: W, budget: Budget) -> Self {
        Verdict { status: Status::No, witness: Some(witness), budget, note: String::new() }
    }

    pub fn unknown(budget: Budget, note: impl Into<String>) -> Self {
        Verdict { status: Status::Unknown, witness: None, budget, note: note.into() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn is_yes(&self) -> bool {
        self.status == Status::Yes
    }

    pub fn is_no(&self) -> bool {
        self.status == Status::No
    }

    pub fn map<V>(self, f: impl FnOnce(W) -> V) -> Verdict<V> {
        Verdict { status: self.status, witness: self.witness.map(f), budget: self.budget, note: self.note }
    }
}
