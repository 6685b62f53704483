//! Source-level debloating for a C subset.
//!
//! A program is parsed into an arena [`ast::Ast`], analysed for def-use
//! chains ([`dataflow`]), and reduced with hierarchical delta debugging
//! ([`reducer`]) over removal units that never leave a retained use without
//! a reaching definition. A tabular Q-learning policy ([`agent`]) orders the
//! candidate units; an external test script ([`oracle`]) decides which
//! candidates keep the wanted behaviour. [`manager`] ties the loop together.

pub mod ast;
pub mod dataflow;
pub mod oracle;
pub mod reducer;
pub mod agent;
pub mod manager;

pub use agent::{PriorityAgent, QState, QTable};
pub use ast::{parse_source, unparse, Ast, NodeId, NodeKind};
pub use dataflow::{check_du_consistency, compute_du_chains, du_closure, RemovalUnit, UnitKind};
pub use manager::{debloat, ManagerError, ReductionReport, RunConfig};
pub use oracle::{OracleRunner, OracleVerdict, VerdictStatus};
pub use reducer::{ddmin, Mode, ReductionState};
