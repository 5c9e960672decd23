use std::fmt;

/// Why a graph walk ended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum StopReason {
    /// An inspected edge had a label below `(eps/4) * d(q, current)`.
    LabelBelowThreshold,
    /// Every outgoing edge of the current vertex was inspected without a jump.
    #[default]
    ListExhausted,
    /// The rough search landed exactly on the query; no walk was needed.
    ExactHit,
    /// The multi-resolution lucky test certified the rough answer.
    Lucky,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::LabelBelowThreshold => "label_below_threshold",
            StopReason::ListExhausted => "list_exhausted",
            StopReason::ExactHit => "exact_hit",
            StopReason::Lucky => "lucky",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Work counters for a single query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Point-location steps inside the rough-ANN structure.
    pub rough_time_steps: u64,
    /// Steps taken in the HST ancestor-query tree.
    pub ancestor_steps: u64,
    /// Parent pointers followed in the reverse tree.
    pub reverse_steps: u64,
    /// Candidates compared when picking the graph-walk start vertex.
    pub friends_scanned: u64,
    /// Jumps taken by the graph walk.
    pub hops: u64,
    /// Outgoing edges inspected by the graph walk.
    pub edges_scanned: u64,
    /// Distance evaluations against the query, all stages included.
    pub dist_evals: u64,
    pub stop_reason: StopReason,
}

impl QueryStats {
    pub const CSV_HEADER: &'static str = "rough_time_steps,ancestor_steps,reverse_steps,friends_scanned,hops,edges_scanned,dist_evals,stop_reason";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.rough_time_steps,
            self.ancestor_steps,
            self.reverse_steps,
            self.friends_scanned,
            self.hops,
            self.edges_scanned,
            self.dist_evals,
            self.stop_reason
        )
    }
}

/// Optional record of a graph walk, used by tests and the browser demo.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchTrace {
    /// Visited vertices (greedy ranks) with their distance to the query.
    pub visited: Vec<(u32, f64)>,
    /// Inspected edges in order: destination rank and edge label.
    pub inspected: Vec<(u32, f64)>,
    /// Stage I data of the spread-free search, when applicable.
    pub stage1: Option<Stage1Trace>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage1Trace {
    pub rough_id: u32,
    pub rough_dist: f64,
    pub gamma: f64,
    pub delta: f64,
    pub hst_node: u32,
    pub tau: u32,
    pub xi: u32,
    pub psi: u32,
}
