//! Core data model for the mini imperative IR.
//!
//! A [`Program`] is a list of global variable names plus procedures made of
//! labelled basic blocks. Instructions are deliberately minimal: scalar
//! assignments, calls, conditional/unconditional jumps, and returns. There are
//! no pointers and no mutable arrays; the read-only `index` operator is the
//! only aggregate access. Three intrinsics exist: `readcfg` (external
//! configuration read), `print` (pure sink), and `exit` (terminates the
//! program; acts as a block terminator).
//!
//! Variables are untyped scalars. Locals are procedure-scoped; two procedures
//! using the same local name denote distinct variables, which [`VarId`] makes
//! explicit. Parameters shadow globals of the same name.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Name of the intrinsic that reads external configuration data.
pub const INTRINSIC_READCFG: &str = "readcfg";
/// Name of the output intrinsic (pure sink).
pub const INTRINSIC_PRINT: &str = "print";
/// Name of the terminating intrinsic.
pub const INTRINSIC_EXIT: &str = "exit";

/// All intrinsic callee names.
pub const INTRINSICS: [&str; 3] = [INTRINSIC_READCFG, INTRINSIC_PRINT, INTRINSIC_EXIT];

/// Returns true if `name` is one of the fixed intrinsics.
pub fn is_intrinsic(name: &str) -> bool {
    INTRINSICS.contains(&name)
}

/// Binary operators of the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Gt,
    /// Read-only element access, e.g. `index(argv, i)`.
    Index,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Eq => "eq",
            BinOp::Ne => "ne",
            BinOp::Lt => "lt",
            BinOp::Gt => "gt",
            BinOp::Index => "index",
        }
    }

    pub fn from_name(name: &str) -> Option<BinOp> {
        Some(match name {
            "add" => BinOp::Add,
            "sub" => BinOp::Sub,
            "mul" => BinOp::Mul,
            "eq" => BinOp::Eq,
            "ne" => BinOp::Ne,
            "lt" => BinOp::Lt,
            "gt" => BinOp::Gt,
            "index" => BinOp::Index,
            _ => return None,
        })
    }
}

/// An atomic operand: literal or variable reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Int(i64),
    Str(String),
    Var(String),
}

impl Operand {
    /// The variable name read by this operand, if any.
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Int(n) => write!(f, "{n}"),
            Operand::Str(s) => write!(f, "\"{}\"", escape_str(s)),
            Operand::Var(v) => write!(f, "{v}"),
        }
    }
}

fn escape_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

/// Right-hand side of an assignment: an atom or a flat binary operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Atom(Operand),
    Binary { op: BinOp, lhs: Operand, rhs: Operand },
}

impl Expr {
    /// Variable names read by this expression.
    pub fn used_vars(&self) -> Vec<&str> {
        match self {
            Expr::Atom(a) => a.as_var().into_iter().collect(),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.as_var().into_iter().chain(rhs.as_var()).collect()
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Binary { op, lhs, rhs } => write!(f, "{}({lhs}, {rhs})", op.name()),
        }
    }
}

/// One IR instruction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Instruction {
    /// `dest = expr`
    Assign { dest: String, expr: Expr },
    /// `[dest =] call callee(args...)`
    Call {
        callee: String,
        args: Vec<Operand>,
        dest: Option<String>,
    },
    /// `br cond then_label else_label`
    Branch {
        cond: String,
        then_label: String,
        else_label: String,
    },
    /// `jmp label`
    Jump { label: String },
    /// `ret [var]`
    Return { value: Option<String> },
}

impl Instruction {
    /// True for instructions that end a block: branch, jump, return, and the
    /// `exit` intrinsic (which terminates the program and therefore the block).
    pub fn is_terminator(&self) -> bool {
        match self {
            Instruction::Branch { .. } | Instruction::Jump { .. } | Instruction::Return { .. } => {
                true
            }
            Instruction::Call { callee, .. } => callee == INTRINSIC_EXIT,
            Instruction::Assign { .. } => false,
        }
    }

    /// The variable written by this instruction, if any.
    pub fn written_var(&self) -> Option<&str> {
        match self {
            Instruction::Assign { dest, .. } => Some(dest),
            Instruction::Call { dest, .. } => dest.as_deref(),
            _ => None,
        }
    }

    /// Variable names read by this instruction.
    pub fn used_vars(&self) -> Vec<&str> {
        match self {
            Instruction::Assign { expr, .. } => expr.used_vars(),
            Instruction::Call { args, .. } => args.iter().filter_map(|a| a.as_var()).collect(),
            Instruction::Branch { cond, .. } => vec![cond],
            Instruction::Jump { .. } => vec![],
            Instruction::Return { value } => value.as_deref().into_iter().collect(),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Assign { dest, expr } => write!(f, "{dest} = {expr}"),
            Instruction::Call { callee, args, dest } => {
                if let Some(d) = dest {
                    write!(f, "{d} = ")?;
                }
                write!(f, "call {callee}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Instruction::Branch {
                cond,
                then_label,
                else_label,
            } => write!(f, "br {cond} {then_label} {else_label}"),
            Instruction::Jump { label } => write!(f, "jmp {label}"),
            Instruction::Return { value } => match value {
                Some(v) => write!(f, "ret {v}"),
                None => write!(f, "ret"),
            },
        }
    }
}

/// A labelled basic block: straight-line instructions ending in a terminator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub label: String,
    pub instructions: Vec<Instruction>,
}

/// A procedure: name, parameter list, and blocks. The first block is the
/// procedure entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Procedure {
    pub name: String,
    pub params: Vec<String>,
    pub blocks: Vec<BasicBlock>,
}

impl Procedure {
    /// Label of the entry block (the first declared block).
    pub fn entry_block(&self) -> Option<&str> {
        self.blocks.first().map(|b| b.label.as_str())
    }
}

/// A whole program: globals plus procedures. `entry_name` selects the entry
/// procedure (conventionally `main`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub globals: Vec<String>,
    pub procedures: Vec<Procedure>,
    pub entry_name: String,
}

impl Program {
    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn entry_procedure(&self) -> Option<&Procedure> {
        self.procedure(&self.entry_name)
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.globals.iter().any(|g| g == name)
    }

    /// Resolves a name referenced inside `proc` to a scoped variable identity.
    /// Parameters and locals shadow globals.
    pub fn resolve_var(&self, proc: &Procedure, name: &str) -> VarId {
        if proc.params.iter().any(|p| p == name) {
            return VarId::local(&proc.name, name);
        }
        if self.is_global(name) {
            return VarId::global(name);
        }
        VarId::local(&proc.name, name)
    }
}

/// Position of one instruction: procedure name, block label, index within the
/// block (0-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub procedure: String,
    pub block: String,
    pub index: usize,
}

impl Location {
    pub fn new(procedure: impl Into<String>, block: impl Into<String>, index: usize) -> Location {
        Location {
            procedure: procedure.into(),
            block: block.into(),
            index,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.procedure, self.block, self.index)
    }
}

/// Scoped variable identity. Two locals of the same name in different
/// procedures are distinct; globals form one namespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarId {
    Global(String),
    Local { procedure: String, name: String },
}

impl VarId {
    pub fn global(name: impl Into<String>) -> VarId {
        VarId::Global(name.into())
    }

    pub fn local(procedure: impl Into<String>, name: impl Into<String>) -> VarId {
        VarId::Local {
            procedure: procedure.into(),
            name: name.into(),
        }
    }

    /// The bare (unscoped) variable name.
    pub fn name(&self) -> &str {
        match self {
            VarId::Global(n) => n,
            VarId::Local { name, .. } => name,
        }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::Global(n) => write!(f, "{n}"),
            VarId::Local { procedure, name } => write!(f, "{procedure}::{name}"),
        }
    }
}

/// One validation violation, with the instruction position when one exists
/// (program-level violations such as a missing entry procedure carry none).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: Option<Location>,
    pub message: String,
}

impl Diagnostic {
    fn at(location: Location, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            location: Some(location),
            message: message.into(),
        }
    }

    fn program(message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            location: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{loc}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Errors from IR-level queries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("undeclared variable \"{0}\"")]
    UndeclaredVariable(String),
}

/// Structural validation. Returns one [`Diagnostic`] per violation, in a
/// deterministic order (program-level first, then procedures/blocks/
/// instructions in declaration order). An empty result means the program is
/// well-formed.
///
/// Checked invariants:
/// - procedure names are unique and exactly one matches `entry_name`;
/// - block labels are unique within a procedure, every procedure and block is
///   non-empty;
/// - every block ends in exactly one terminator (branch, jump, return, or
///   `call exit`), with no instruction after it;
/// - branch/jump targets name existing blocks;
/// - every callee is a declared procedure or an intrinsic;
/// - every variable read is a global, a parameter, or assigned somewhere in
///   the same procedure (no free names).
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut seen = BTreeSet::new();
    for proc in &program.procedures {
        if !seen.insert(proc.name.as_str()) {
            diags.push(Diagnostic::program(format!(
                "duplicate procedure \"{}\"",
                proc.name
            )));
        }
    }
    if !seen.contains(program.entry_name.as_str()) {
        diags.push(Diagnostic::program(format!(
            "no entry procedure \"{}\"",
            program.entry_name
        )));
    }

    for proc in &program.procedures {
        validate_procedure(program, proc, &mut diags);
    }
    diags
}

fn validate_procedure(program: &Program, proc: &Procedure, diags: &mut Vec<Diagnostic>) {
    if proc.blocks.is_empty() {
        diags.push(Diagnostic::program(format!(
            "procedure \"{}\" has no blocks",
            proc.name
        )));
        return;
    }

    let mut labels = BTreeSet::new();
    for block in &proc.blocks {
        if !labels.insert(block.label.as_str()) {
            diags.push(Diagnostic::at(
                Location::new(&proc.name, &block.label, 0),
                format!("duplicate block label \"{}\"", block.label),
            ));
        }
    }

    // Names a variable may be read under: globals, params, any assigned name.
    let mut readable: BTreeSet<&str> = program.globals.iter().map(|g| g.as_str()).collect();
    readable.extend(proc.params.iter().map(|p| p.as_str()));
    for block in &proc.blocks {
        for instr in &block.instructions {
            if let Some(dest) = instr.written_var() {
                readable.insert(dest);
            }
        }
    }

    for block in &proc.blocks {
        if block.instructions.is_empty() {
            diags.push(Diagnostic::at(
                Location::new(&proc.name, &block.label, 0),
                format!("empty block \"{}\"", block.label),
            ));
            continue;
        }
        for (i, instr) in block.instructions.iter().enumerate() {
            let loc = Location::new(&proc.name, &block.label, i);
            let last = i + 1 == block.instructions.len();
            if instr.is_terminator() && !last {
                diags.push(Diagnostic::at(loc.clone(), "instruction follows terminator"));
            }
            if last && !instr.is_terminator() {
                diags.push(Diagnostic::at(loc.clone(), "missing terminator"));
            }

            match instr {
                Instruction::Branch {
                    then_label,
                    else_label,
                    ..
                } => {
                    for target in [then_label, else_label] {
                        if !labels.contains(target.as_str()) {
                            diags.push(Diagnostic::at(
                                loc.clone(),
                                format!("unknown target {target}"),
                            ));
                        }
                    }
                }
                Instruction::Jump { label } => {
                    if !labels.contains(label.as_str()) {
                        diags.push(Diagnostic::at(loc.clone(), format!("unknown target {label}")));
                    }
                }
                Instruction::Call { callee, args, .. } => {
                    if is_intrinsic(callee) {
                        // Intrinsics accept any argument count.
                    } else if let Some(target) = program.procedure(callee) {
                        if args.len() != target.params.len() {
                            diags.push(Diagnostic::at(
                                loc.clone(),
                                format!(
                                    "call to \"{callee}\" takes {} argument(s), got {}",
                                    target.params.len(),
                                    args.len()
                                ),
                            ));
                        }
                    } else {
                        diags.push(Diagnostic::at(
                            loc.clone(),
                            format!("unknown callee \"{callee}\""),
                        ));
                    }
                }
                _ => {}
            }

            for used in instr.used_vars() {
                if !readable.contains(used) {
                    diags.push(Diagnostic::at(
                        loc.clone(),
                        format!("undeclared variable \"{used}\""),
                    ));
                }
            }
        }
    }
}

/// All locations that assign `var` (scalar assignments and call results).
///
/// For a global this scans every procedure; for a local only its owning
/// procedure. Errors if `var` is not declared in the program (not a listed
/// global, or — for locals — not a parameter and never assigned).
pub fn defs_of(program: &Program, var: &VarId) -> Result<BTreeSet<Location>, IrError> {
    let declared = match var {
        VarId::Global(name) => program.is_global(name),
        VarId::Local { procedure, name } => program.procedure(procedure).is_some_and(|p| {
            p.params.iter().any(|q| q == name)
                || p.blocks
                    .iter()
                    .flat_map(|b| &b.instructions)
                    .any(|i| i.written_var() == Some(name.as_str()))
        }),
    };
    if !declared {
        return Err(IrError::UndeclaredVariable(var.to_string()));
    }

    let mut defs = BTreeSet::new();
    for proc in &program.procedures {
        for block in &proc.blocks {
            for (i, instr) in block.instructions.iter().enumerate() {
                let Some(dest) = instr.written_var() else {
                    continue;
                };
                if program.resolve_var(proc, dest) == *var {
                    defs.insert(Location::new(&proc.name, &block.label, i));
                }
            }
        }
    }
    Ok(defs)
}

/// Definition sites of every variable in the program, keyed by identity.
/// The union of all value sets is exactly the set of writing instructions.
pub fn all_defs(program: &Program) -> BTreeMap<VarId, BTreeSet<Location>> {
    let mut map: BTreeMap<VarId, BTreeSet<Location>> = BTreeMap::new();
    for proc in &program.procedures {
        for block in &proc.blocks {
            for (i, instr) in block.instructions.iter().enumerate() {
                if let Some(dest) = instr.written_var() {
                    map.entry(program.resolve_var(proc, dest))
                        .or_default()
                        .insert(Location::new(&proc.name, &block.label, i));
                }
            }
        }
    }
    map
}
