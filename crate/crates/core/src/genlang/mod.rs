//! A small interpreter for the Python subset that generator programs are
//! written in.
//!
//! Generators are single functions taking a random source and optionally an
//! output sink:
//!
//! ```text
//! def gen_json(rng, output):      # writes the test case to `output`
//! def fuzzer(random) -> str:      # returns the test case
//! ```
//!
//! The random source exposes `randint(a, b)`, `randrange(a[, b])`,
//! `choice(seq)`, `read_byte()` and `read_chars(n)`. Every draw consumes bytes
//! from a [`ChoiceSource`], which is either a seeded stream or a fixed byte
//! array replayed with wraparound. Replaying the same bytes reproduces the
//! same test case.
//!
//! Supported: functions with defaults, `if`/`elif`/`else`, `while`, `for`
//! over ranges, strings and lists, `break`/`continue`/`return`, `global`,
//! integer and string arithmetic, comparisons with chaining, `and`/`or`/`not`,
//! conditional expressions, list comprehensions, indexing and slicing, and a
//! handful of builtins and methods. Floats, dicts, classes, exceptions and
//! keyword arguments are rejected. Imports are ignored.
//!
//! Execution is bounded by fuel, recursion depth, string size and an optional
//! wall-clock deadline.

mod interp;
mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

pub use parser::Program;

/// Error categories, named after the Python exception they stand in for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Syntax,
    Name,
    Type,
    Value,
    Index,
    Attribute,
    ZeroDivision,
    Overflow,
    Recursion,
    Memory,
    Timeout,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Syntax => "SyntaxError",
            ErrorKind::Name => "NameError",
            ErrorKind::Type => "TypeError",
            ErrorKind::Value => "ValueError",
            ErrorKind::Index => "IndexError",
            ErrorKind::Attribute => "AttributeError",
            ErrorKind::ZeroDivision => "ZeroDivisionError",
            ErrorKind::Overflow => "OverflowError",
            ErrorKind::Recursion => "RecursionError",
            ErrorKind::Memory => "MemoryError",
            ErrorKind::Timeout => "Timeout",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenError {
    pub kind: ErrorKind,
    pub line: usize,
    pub message: String,
}

impl GenError {
    pub fn new(kind: ErrorKind, line: usize, message: impl Into<String>) -> Self {
        GenError { kind, line, message: message.into() }
    }
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.kind, self.message)
    }
}

impl std::error::Error for GenError {}

/// Parses generator source into a [`Program`].
pub fn parse(src: &str) -> Result<Program, GenError> {
    parser::parse(lexer::tokenize(src)?)
}

/// A fixed byte array read as a stream of choices. Reads past the end wrap
/// around to the start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ByteChoiceStream {
    bytes: Vec<u8>,
    cursor: usize,
}

impl ByteChoiceStream {
    /// Panics on an empty array.
    pub fn new(bytes: Vec<u8>) -> Self {
        assert!(!bytes.is_empty(), "choice byte array must be non-empty");
        ByteChoiceStream { bytes, cursor: 0 }
    }

    pub fn next_byte(&mut self) -> u8 {
        let b = self.bytes[self.cursor % self.bytes.len()];
        self.cursor += 1;
        b
    }

    /// Total bytes consumed so far, counting wrapped reads.
    pub fn consumed(&self) -> usize {
        self.cursor
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Where a generator's random decisions come from.
pub enum ChoiceSource {
    Seeded(ChaCha8Rng),
    Bytes(ByteChoiceStream),
}

impl ChoiceSource {
    pub fn next_byte(&mut self) -> u8 {
        match self {
            ChoiceSource::Seeded(rng) => (rng.next_u32() & 0xff) as u8,
            ChoiceSource::Bytes(s) => s.next_byte(),
        }
    }

    /// Uniform-ish draw in `0..span` built from as few bytes as cover the span.
    pub fn below(&mut self, span: u64) -> u64 {
        debug_assert!(span > 0);
        let mut width = 1;
        while width < 8 && span > 1u64 << (8 * width) {
            width += 1;
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 8) | self.next_byte() as u64;
        }
        v % span
    }
}

/// Resource limits applied to each generated test case.
#[derive(Clone, Debug)]
pub struct Limits {
    /// Interpreter steps allowed per test case.
    pub fuel: u64,
    pub max_depth: usize,
    /// Largest string or list the program may build, in bytes or elements.
    pub max_size: usize,
    pub deadline: Option<Instant>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { fuel: 2_000_000, max_depth: 100, max_size: 1 << 20, deadline: None }
    }
}

/// A loaded program: top-level statements executed once, entry point resolved.
pub struct Session<'p> {
    inner: interp::Interp<'p>,
}

impl<'p> Session<'p> {
    /// Runs the module body and locates the generator entry point. Integer
    /// `constants` are bound as globals before the body runs.
    pub fn new(program: &'p Program, constants: &BTreeMap<String, i64>, limits: Limits) -> Result<Self, GenError> {
        Ok(Session { inner: interp::Interp::new(program, constants, limits)? })
    }

    /// Name of the function that will be called per test case.
    pub fn entry_name(&self) -> &str {
        self.inner.entry_name()
    }

    /// Produces one test case, drawing choices from `source`.
    pub fn generate(&mut self, source: ChoiceSource) -> Result<Vec<u8>, GenError> {
        self.inner.generate(source)
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.inner.set_deadline(deadline);
    }
}

/// Picks the generator function: the first top-level `def` whose name starts
/// with `gen_` or `fuzzer`, otherwise the last top-level `def`.
pub fn entry_point(program: &Program) -> Option<&str> {
    let defs: Vec<_> = program.top_level_defs().collect();
    defs.iter()
        .find(|d| d.name.starts_with("gen_") || d.name.starts_with("fuzzer"))
        .or(defs.last())
        .map(|d| d.name.as_str())
}

#[cfg(test)]
mod tests;
