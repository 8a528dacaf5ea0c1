//! Built-in toy system under test: a balanced-parenthesis checker whose
//! thirteen source lines are the coverage units.
//!
//! ```text
//!  1 def balanced_parenthesis(parens: str) -> bool:
//!  2     stack = []
//!  3     for c in parens:
//!  4         if c == "(":
//!  5             stack.insert(0, c)
//!  6         elif c == ")":
//!  7             if stack and stack[0] == "(":
//!  8                 stack.pop(0)
//!  9             else:
//! 10                 return False
//! 11         else:
//! 12             raise ValueError("Invalid character")
//! 13     return not stack
//! ```
//!
//! `else:` lines count as covered when their branch is taken. The module also
//! carries the small generator programs used throughout the docs, tests and
//! examples.

use crate::lattice::CoverSet;

/// Outcome of one run of the checker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Balanced,
    Unbalanced,
    InvalidCharacter,
}

/// Runs the checker on `input`, returning the verdict and executed lines.
pub fn trace_balanced_parens(input: &[u8]) -> (Verdict, CoverSet) {
    let mut lines = vec![1, 2, 3];
    let mut depth = 0usize;
    for &c in input {
        lines.push(4);
        if c == b'(' {
            lines.push(5);
            depth += 1;
        } else {
            lines.push(6);
            if c == b')' {
                lines.push(7);
                if depth > 0 {
                    lines.push(8);
                    depth -= 1;
                } else {
                    lines.extend([9, 10]);
                    return (Verdict::Unbalanced, lines.into());
                }
            } else {
                lines.extend([11, 12]);
                return (Verdict::InvalidCharacter, lines.into());
            }
        }
        lines.push(3);
    }
    lines.push(13);
    let verdict = if depth == 0 {
        Verdict::Balanced
    } else {
        Verdict::Unbalanced
    };
    (verdict, lines.into())
}

/// Names accepted by the toy SUT registry.
pub const TOY_SUTS: &[&str] = &["balanced_parens"];

pub fn toy_trace(name: &str, input: &[u8]) -> Option<CoverSet> {
    match name {
        "balanced_parens" => Some(trace_balanced_parens(input).1),
        _ => None,
    }
}

/// Integer constants the toy generator programs rely on.
pub fn toy_constants() -> std::collections::BTreeMap<String, i64> {
    [("MAX_LEN".to_string(), 16), ("CHOICE_RANGE".to_string(), 3)]
        .into_iter()
        .collect()
}

/// Generator programs over the `(`, `)`, `*` alphabet.
pub mod programs {
    /// Random mixes of `(`, `)` and `*`; reaches every line.
    pub const MIXED: &str = r#"def fuzzer_fa(random: Random) -> str:
    random_sequence = ""
    while len(random_sequence) < MAX_LEN:
        choice = random.randint(0, CHOICE_RANGE)
        if choice == 0:
            random_sequence += "("
        elif choice == 1:
            random_sequence += ")"
        elif choice == 2:
            random_sequence += "*"
        else:
            break
    return random_sequence
"#;

    /// Same behaviour as [`MIXED`] written differently.
    pub const MIXED_FIXED_LEN: &str = r#"def fuzzer_fa_prime(random: Random) -> str:
    random_len = random.randint(0, MAX_LEN)
    random_sequence = ""
    for _ in range(random_len):
        choice = random.randint(0, CHOICE_RANGE)
        if choice == 0:
            random_sequence += "("
        elif choice == 1:
            random_sequence += ")"
        else:
            random_sequence += "*"
    return random_sequence
"#;

    pub const OPEN_ONLY: &str = r#"def fuzzer_fb(random: Random) -> str:
    random_sequence = ""
    while len(random_sequence) < MAX_LEN:
        choice = random.randint(0, CHOICE_RANGE)
        if choice == 0:
            random_sequence += "("
        else:
            break
    return random_sequence
"#;

    pub const CLOSE_OR_STAR: &str = r#"def fuzzer_fc(random: Random) -> str:
    random_sequence = ""
    while len(random_sequence) < MAX_LEN:
        choice = random.randint(0, CHOICE_RANGE)
        if choice == 0:
            random_sequence += ")"
        elif choice == 1:
            random_sequence += "*"
        else:
            break
    return random_sequence
"#;

    pub const STAR_ONLY: &str = r#"def fuzzer_fd(random: Random) -> str:
    random_sequence = ""
    while len(random_sequence) < MAX_LEN:
        choice = random.randint(0, CHOICE_RANGE)
        if choice == 0:
            random_sequence += "*"
        else:
            break
    return random_sequence
"#;

    pub const EMPTY: &str = r#"def fuzzer_fe(random: Random) -> str:
    return ''
"#;

    /// Head of [`OPEN_ONLY`] glued to the tail of [`STAR_ONLY`].
    pub const OPEN_OR_STAR: &str = r#"def fuzzer_fb(random: Random) -> str:
    random_sequence = ""
    while len(random_sequence) < MAX_LEN:
        choice = random.randint(0, CHOICE_RANGE)
        if choice == 0:
            random_sequence += "("
        elif choice == 1:
            random_sequence += "*"
        else:
            break
    return random_sequence
"#;

    /// [`STAR_ONLY`] re-completed after its loop to prefix every case with `)`.
    pub const CLOSE_PREFIXED: &str = r#"def fuzzer_fd(random: Random) -> str:
    random_sequence = ""
    while len(random_sequence) < MAX_LEN:
        choice = random.randint(0, CHOICE_RANGE)
        if choice == 0:
            random_sequence += "*"
        else:
            break
    # Code re-completed by the LLM
    return ")" + random_sequence
"#;

    /// Seed template: reads a length byte and that many raw characters.
    pub const SEED_TEMPLATE: &str = r#"def gen_<FORMAT>(rng: Random, output: TextIO):
    len = rng.read_byte()
    random_text = rng.read_chars(len)
    output.write(random_text)
"#;
}
