//! Text format for the IR.
//!
//! The format is line-oriented. `#` starts a comment (outside string
//! literals); blank lines are ignored; whitespace within a line is free-form.
//!
//! ```text
//! global count_chars               # global declaration
//!
//! proc main(argc, argv) {          # procedure header
//! bb_parse:                        # block label
//!   more = gt(argc, 1)             # assignment (flat binary op or atom)
//!   x = call readcfg(path)         # call with result
//!   call print(more)               # call without result
//!   br more bb_arg bb_post         # conditional branch
//!   jmp bb_parse                   # unconditional jump
//!   ret                            # return (optionally `ret var`)
//! }
//! ```
//!
//! [`parse`] validates the result structurally; a syntactically well-formed
//! file that violates an IR invariant (say, a branch to a missing label) is
//! rejected with the validation diagnostics, each carrying the source line it
//! came from. [`emit`] produces the canonical form, which re-parses to a
//! structurally identical [`Program`].

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ir::{
    validate, BasicBlock, BinOp, Diagnostic, Expr, Instruction, Location, Operand, Procedure,
    Program,
};

/// Words that cannot be used as identifiers.
const KEYWORDS: [&str; 6] = ["proc", "global", "br", "jmp", "ret", "call"];

/// A validation diagnostic with the source line it maps to (1-based).
/// Program-level diagnostics (e.g. a missing entry procedure) have no line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionedDiagnostic {
    pub line: Option<usize>,
    pub diagnostic: Diagnostic,
}

impl fmt::Display for PositionedDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.diagnostic),
            None => write!(f, "{}", self.diagnostic),
        }
    }
}

/// Parse failure: either a syntax error at a position, or a structurally
/// invalid program with the validation diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        /// 1-based source line.
        line: usize,
        /// 1-based column.
        col: usize,
        message: String,
    },
    #[error("invalid program: {}", render_diagnostics(.0))]
    Invalid(Vec<PositionedDiagnostic>),
}

fn render_diagnostics(diags: &[PositionedDiagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses the text format into a validated [`Program`]. The entry procedure
/// name is `main`.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    parse_with_entry(src, "main")
}

/// Like [`parse`] with an explicit entry procedure name.
pub fn parse_with_entry(src: &str, entry_name: &str) -> Result<Program, ParseError> {
    let mut parser = Parser {
        program: Program {
            globals: Vec::new(),
            procedures: Vec::new(),
            entry_name: entry_name.to_string(),
        },
        lines: BTreeMap::new(),
        current_proc: None,
        current_block: None,
    };
    for (idx, raw_line) in src.lines().enumerate() {
        parser.line(idx + 1, raw_line)?;
    }
    if let Some(proc) = &parser.current_proc {
        return Err(ParseError::Syntax {
            line: src.lines().count().max(1),
            col: 1,
            message: format!("unterminated procedure \"{}\" (missing '}}')", proc.name),
        });
    }

    let program = parser.program;
    let diags = validate(&program);
    if diags.is_empty() {
        return Ok(program);
    }
    Err(ParseError::Invalid(
        diags
            .into_iter()
            .map(|diagnostic| PositionedDiagnostic {
                line: diagnostic
                    .location
                    .as_ref()
                    .and_then(|loc| parser.lines.get(loc).copied()),
                diagnostic,
            })
            .collect(),
    ))
}

struct Parser {
    program: Program,
    /// Source line of each parsed instruction, for diagnostics.
    lines: BTreeMap<Location, usize>,
    current_proc: Option<Procedure>,
    current_block: Option<BasicBlock>,
}

impl Parser {
    fn line(&mut self, line_no: usize, raw: &str) -> Result<(), ParseError> {
        let stripped = strip_comment(raw);
        let mut cur = Cursor::new(stripped, line_no);
        cur.skip_ws();
        if cur.at_end() {
            return Ok(());
        }

        if self.current_proc.is_none() {
            // Top level: global declarations and procedure headers.
            let word = cur.peek_ident();
            match word.as_deref() {
                Some("global") => {
                    cur.ident_raw()?; // consume keyword
                    let name = cur.ident()?;
                    cur.expect_end()?;
                    self.program.globals.push(name);
                    Ok(())
                }
                Some("proc") => {
                    cur.ident_raw()?;
                    let name = cur.ident()?;
                    cur.expect('(')?;
                    let mut params = Vec::new();
                    if !cur.try_expect(')') {
                        loop {
                            params.push(cur.ident()?);
                            if cur.try_expect(')') {
                                break;
                            }
                            cur.expect(',')?;
                        }
                    }
                    cur.expect('{')?;
                    cur.expect_end()?;
                    self.current_proc = Some(Procedure {
                        name,
                        params,
                        blocks: Vec::new(),
                    });
                    Ok(())
                }
                _ => Err(cur.error("expected 'global' or 'proc'")),
            }
        } else if cur.peek() == Some('}') {
            cur.expect('}')?;
            cur.expect_end()?;
            self.finish_block();
            let proc = self.current_proc.take().expect("inside a procedure");
            self.program.procedures.push(proc);
            Ok(())
        } else {
            // Either `label:` or an instruction.
            let save = cur.clone();
            if let Ok(ident) = cur.ident() {
                if cur.try_expect(':') {
                    cur.expect_end()?;
                    self.finish_block();
                    self.current_block = Some(BasicBlock {
                        label: ident,
                        instructions: Vec::new(),
                    });
                    return Ok(());
                }
            }
            let mut cur = save;
            let instr = parse_instruction(&mut cur)?;
            let Some(block) = &mut self.current_block else {
                return Err(cur.error("instruction before any block label"));
            };
            let proc = self.current_proc.as_ref().expect("inside a procedure");
            let loc = Location::new(&proc.name, &block.label, block.instructions.len());
            self.lines.insert(loc, line_no);
            block.instructions.push(instr);
            Ok(())
        }
    }

    fn finish_block(&mut self) {
        if let (Some(block), Some(proc)) = (self.current_block.take(), self.current_proc.as_mut())
        {
            proc.blocks.push(block);
        }
    }
}

/// Removes a trailing `#` comment, ignoring `#` inside string literals.
fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
        } else if c == '"' {
            in_string = true;
        } else if c == '#' {
            return &line[..i];
        }
    }
    line
}

fn parse_instruction(cur: &mut Cursor) -> Result<Instruction, ParseError> {
    let word = cur
        .peek_ident_raw()
        .ok_or_else(|| cur.error("expected instruction"))?;
    match word.as_str() {
        "br" => {
            cur.ident_raw()?;
            let cond = cur.ident()?;
            let then_label = cur.ident()?;
            let else_label = cur.ident()?;
            cur.expect_end()?;
            Ok(Instruction::Branch {
                cond,
                then_label,
                else_label,
            })
        }
        "jmp" => {
            cur.ident_raw()?;
            let label = cur.ident()?;
            cur.expect_end()?;
            Ok(Instruction::Jump { label })
        }
        "ret" => {
            cur.ident_raw()?;
            cur.skip_ws();
            let value = if cur.at_end() { None } else { Some(cur.ident()?) };
            cur.expect_end()?;
            Ok(Instruction::Return { value })
        }
        "call" => {
            let (callee, args) = parse_call(cur)?;
            cur.expect_end()?;
            Ok(Instruction::Call {
                callee,
                args,
                dest: None,
            })
        }
        _ => {
            let dest = cur.ident()?;
            cur.expect('=')?;
            cur.skip_ws();
            if cur.peek_ident_raw().as_deref() == Some("call") {
                let (callee, args) = parse_call(cur)?;
                cur.expect_end()?;
                return Ok(Instruction::Call {
                    callee,
                    args,
                    dest: Some(dest),
                });
            }
            let expr = parse_expr(cur)?;
            cur.expect_end()?;
            Ok(Instruction::Assign { dest, expr })
        }
    }
}

fn parse_call(cur: &mut Cursor) -> Result<(String, Vec<Operand>), ParseError> {
    cur.ident_raw()?; // the `call` keyword
    let callee = cur.ident()?;
    cur.expect('(')?;
    let mut args = Vec::new();
    if !cur.try_expect(')') {
        loop {
            args.push(cur.operand()?);
            if cur.try_expect(')') {
                break;
            }
            cur.expect(',')?;
        }
    }
    Ok((callee, args))
}

fn parse_expr(cur: &mut Cursor) -> Result<Expr, ParseError> {
    cur.skip_ws();
    if let Some(word) = cur.peek_ident_raw() {
        if let Some(op) = BinOp::from_name(&word) {
            let save = cur.clone();
            cur.ident_raw()?;
            cur.skip_ws();
            if cur.peek() == Some('(') {
                cur.expect('(')?;
                let lhs = cur.operand()?;
                cur.skip_ws();
                if cur.peek() == Some(')') {
                    return Err(cur.error(format!(
                        "operator {} takes exactly two operands",
                        op.name()
                    )));
                }
                cur.expect(',')?;
                let rhs = cur.operand()?;
                cur.expect(')')?;
                return Ok(Expr::Binary { op, lhs, rhs });
            }
            // An operator name not followed by '(' is an ordinary variable.
            *cur = save;
        }
    }
    Ok(Expr::Atom(cur.operand()?))
}

/// Character cursor over one comment-stripped source line.
#[derive(Clone)]
struct Cursor<'a> {
    line: &'a str,
    /// Byte position within `line`.
    pos: usize,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a str, line_no: usize) -> Cursor<'a> {
        Cursor {
            line,
            pos: 0,
            line_no,
        }
    }

    fn rest(&self) -> &'a str {
        &self.line[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn at_end(&self) -> bool {
        self.rest().trim().is_empty()
    }

    fn col(&self) -> usize {
        self.line[..self.pos].chars().count() + 1
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line_no,
            col: self.col(),
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn try_expect(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    /// Reads an identifier without the keyword check.
    fn ident_raw(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                self.bump();
            }
            _ => return Err(self.error("expected identifier")),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Ok(self.line[start..self.pos].to_string())
    }

    /// Reads an identifier, rejecting reserved keywords.
    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let col = self.col();
        let word = self.ident_raw()?;
        if KEYWORDS.contains(&word.as_str()) {
            return Err(ParseError::Syntax {
                line: self.line_no,
                col,
                message: format!("reserved word \"{word}\" cannot be used as a name"),
            });
        }
        Ok(word)
    }

    /// Peeks an identifier (possibly a keyword) without consuming.
    fn peek_ident_raw(&self) -> Option<String> {
        let mut probe = self.clone();
        probe.skip_ws();
        probe.ident_raw().ok()
    }

    fn peek_ident(&self) -> Option<String> {
        self.peek_ident_raw()
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('"') => {
                self.bump();
                let mut out = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error("unterminated string literal")),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('"') => out.push('"'),
                            Some('\\') => out.push('\\'),
                            Some('n') => out.push('\n'),
                            Some('t') => out.push('\t'),
                            _ => return Err(self.error("unknown escape sequence")),
                        },
                        Some(c) => out.push(c),
                    }
                }
                Ok(Operand::Str(out))
            }
            Some(c) if c.is_ascii_digit() || c == '-' => {
                let start = self.pos;
                if c == '-' {
                    self.bump();
                }
                if !matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    return Err(self.error("expected integer literal"));
                }
                while matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    self.bump();
                }
                let text = &self.line[start..self.pos];
                text.parse::<i64>()
                    .map(Operand::Int)
                    .map_err(|_| self.error("integer literal out of range"))
            }
            _ => Ok(Operand::Var(self.ident()?)),
        }
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }
}

/// Emits the canonical text form. Fails (with the validation diagnostics) on
/// structurally invalid programs.
pub fn emit(program: &Program) -> Result<String, Vec<Diagnostic>> {
    let diags = validate(program);
    if !diags.is_empty() {
        return Err(diags);
    }

    let mut out = String::new();
    for g in &program.globals {
        out.push_str("global ");
        out.push_str(g);
        out.push('\n');
    }
    for (i, proc) in program.procedures.iter().enumerate() {
        if i > 0 || !program.globals.is_empty() {
            out.push('\n');
        }
        out.push_str("proc ");
        out.push_str(&proc.name);
        out.push('(');
        for (j, p) in proc.params.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            out.push_str(p);
        }
        out.push_str(") {\n");
        for block in &proc.blocks {
            out.push_str(&block.label);
            out.push_str(":\n");
            for instr in &block.instructions {
                out.push_str("  ");
                out.push_str(&instr.to_string());
                out.push('\n');
            }
        }
        out.push_str("}\n");
    }
    Ok(out)
}
