//! The pipeline command language.
//!
//! ```text
//! program  := (command ';'?)*
//! command  := IDENT '(' [arg (',' arg)*] ')'
//! arg      := IDENT ':' value
//! value    := STRING | NUMBER | 'true' | 'false' | '[' value (',' value)* ']'
//! ```
//!
//! Strings are double quoted with backslash escapes (`\"`, `\\`, `\n`,
//! `\t`). Whitespace and line breaks are insignificant outside strings and
//! `#` starts a comment running to the end of the line.

mod exec;
mod parser;

use std::fmt::{self, Write as _};

pub use exec::{
    execute, CommandOutput, CommandReport, ExecContext, RunFailure, RunReport, COMMANDS,
};
pub use parser::parse_script;

/// Position of a command or argument in the script source, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Real(f64),
    Bool(bool),
    List(Vec<Value>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Int(_) => "integer",
            Value::Real(_) => "number",
            Value::Bool(_) => "boolean",
            Value::List(_) => "list",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => {
                f.write_char('"')?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        '\r' => f.write_str("\\r")?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_char('"')
            }
            Value::Int(i) => write!(f, "{i}"),
            // Debug keeps a decimal point or exponent, so reals stay reals
            Value::Real(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::List(items) => {
                f.write_char('[')?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_char(']')
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Arg {
    pub key: String,
    pub value: Value,
    pub span: Span,
}

impl PartialEq for Arg {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.value == other.value
    }
}

/// One command call. Equality ignores source positions.
#[derive(Debug, Clone)]
pub struct Command {
    pub name: String,
    pub args: Vec<Arg>,
    pub span: Span,
}

impl PartialEq for Command {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.args == other.args
    }
}

impl Command {
    pub fn arg(&self, key: &str) -> Option<&Arg> {
        self.args.iter().find(|a| a.key == key)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_char(',')?;
            }
            write!(f, "{}:{}", a.key, a.value)?;
        }
        f.write_char(')')
    }
}

#[derive(Debug, Clone)]
pub struct ScriptProgram {
    pub commands: Vec<Command>,
    pub source: String,
}

impl PartialEq for ScriptProgram {
    fn eq(&self, other: &Self) -> bool {
        self.commands == other.commands
    }
}

/// Canonical text: one command per line, no spaces, arguments in their
/// original order.
pub fn format_script(prog: &ScriptProgram) -> String {
    let mut out = String::new();
    for c in &prog.commands {
        let _ = writeln!(out, "{c}");
    }
    out
}

/// A lexical or grammatical error with the offending source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
    pub excerpt: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "syntax error at {}: {}", self.span, self.message)?;
        writeln!(f, "  {}", self.excerpt)?;
        write!(f, "  {}^", " ".repeat(self.span.column.saturating_sub(1)))
    }
}

impl std::error::Error for SyntaxError {}

/// Failure of a single command; the surrounding run names the command.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("missing required argument `{0}`")]
    MissingArg(String),
    #[error("unknown argument `{0}`")]
    UnknownArg(String),
    #[error("argument `{key}` must be {expected}, found {found}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("argument `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error(transparent)]
    Core(#[from] crate::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{command} at {span}: {source}")]
    Command {
        command: String,
        span: Span,
        #[source]
        source: CommandError,
    },
}

impl ScriptError {
    /// True when the failure came from reading or writing a file.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            ScriptError::Command {
                source: CommandError::Core(e),
                ..
            } if e.is_io()
        )
    }
}
