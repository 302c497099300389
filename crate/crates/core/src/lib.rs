//! Finds the basic block that separates configuration parsing from main
//! computation in a small imperative IR.
//!
//! The pipeline: parse a `.mir` program ([`parser`]), build per-procedure
//! block graphs ([`graph`]) and an interprocedural flow graph ([`icfg`]),
//! run a taint analysis from the configuration sources ([`taint`]), then
//! generate and filter boundary candidates ([`boundary`]). A brute-force
//! [`oracle`] re-derives the verdict for small programs so the optimized
//! pipeline can be cross-checked.

pub mod boundary;
pub mod graph;
pub mod icfg;
pub mod ir;
pub mod oracle;
pub mod parser;
pub mod taint;

pub use boundary::{
    identify_boundary, Analysis, BlockRef, BoundaryReport, Candidate, CandidateOrigin,
    EliminationReason, Verdict,
};
pub use icfg::{call_graph, Icfg};
pub use ir::{
    defs_of, validate, BasicBlock, BinOp, Diagnostic, Expr, Instruction, IrError, Location,
    Operand, Procedure, Program, VarId,
};
pub use taint::{analyze_taint, hosting_set, HostingSet, TaintResult, TaintSourceSpec};
pub use oracle::{oracle_boundary, OracleError, OracleReport, ORACLE_BLOCK_LIMIT};
pub use parser::{emit, parse, parse_with_entry, ParseError, PositionedDiagnostic};
