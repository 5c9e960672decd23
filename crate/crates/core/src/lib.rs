//! Approximate nearest-neighbor search on navigable graphs whose query
//! time does not depend on the spread of the data.
#![allow(clippy::needless_range_loop)]

pub mod container;
pub mod dataset;
pub mod error;
pub mod greedy;
pub mod hst;
pub mod io;
pub mod metric;
pub mod multires;
pub mod nav_graph;
pub mod reverse_tree;
pub mod rough;
pub mod spreadfree;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use greedy::GreedyOrder;
pub use hst::{AncestorIndex, Hst};
pub use metric::PointSet;
pub use nav_graph::{baseline_search, NavGraph};
pub use stats::{QueryStats, SearchTrace, StopReason};
pub use container::Index;
pub use multires::MultiResIndex;
pub use rough::RoughKind;
pub use spreadfree::{bootstrap_query, Answer, IndexConfig, SpreadFreeIndex};
