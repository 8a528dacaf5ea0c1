//! Mutation operators: completion, infilling and splicing.
//!
//! Each operator cuts one or two parent programs at line boundaries and turns
//! the pieces into a [`MutationRequest`]: a verbatim `prefix`, a verbatim
//! `suffix` (empty for completion) and a short comment header for the model.
//! The model writes the middle; [`MutationRequest::assemble`] glues
//! `prefix + middle + suffix` back together. Cuts never touch the signature
//! line of the generator function, so every mutant keeps its entry point.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genlang;
use crate::lattice::{FuzzerNode, NodeId, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationKind {
    Completion,
    Infilling,
    Splicing,
}

impl MutationKind {
    pub const ALL: [MutationKind; 3] = [MutationKind::Completion, MutationKind::Infilling, MutationKind::Splicing];

    pub fn name(self) -> &'static str {
        match self {
            MutationKind::Completion => "completion",
            MutationKind::Infilling => "infilling",
            MutationKind::Splicing => "splicing",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutationError {
    #[error("infilling needs a program of at least 3 lines with a body line after the signature (got {lines} lines)")]
    TooShort { lines: usize },
    #[error("cut position {pos} outside legal range {lo}..={hi}")]
    BadCut { pos: usize, lo: usize, hi: usize },
    #[error("no survivors to mutate")]
    NoParents,
}

/// Names the target format and optionally describes it for the model.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PromptContext {
    pub format: String,
    pub format_hint: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MutationRequest {
    pub kind: MutationKind,
    pub parents: Vec<NodeId>,
    /// Comment lines placed before `prefix` in the prompt only.
    pub header: String,
    pub prefix: String,
    pub suffix: String,
}

/// Splits source into lines, each keeping its terminator.
pub fn split_lines(src: &str) -> Vec<&str> {
    src.split_inclusive('\n').collect()
}

/// Zero-based index of the generator's `def` line.
pub fn signature_line(src: &str) -> usize {
    let lines = split_lines(src);
    let entry = genlang::parse(src).ok().and_then(|p| genlang::entry_point(&p).map(str::to_string));
    let is_def = |l: &str, name: Option<&str>| {
        let t = l.trim_start();
        match (t.strip_prefix("def "), name) {
            (Some(rest), Some(n)) => rest.trim_start().strip_prefix(n).is_some_and(|r| r.trim_start().starts_with('(')),
            (Some(_), None) => true,
            (None, _) => false,
        }
    };
    lines
        .iter()
        .position(|l| is_def(l, entry.as_deref()))
        .or_else(|| lines.iter().position(|l| is_def(l, None)))
        .unwrap_or(0)
}

fn header(ctx: &PromptContext, task: &str) -> String {
    let mut h = format!("# Generator of test inputs for the {} format.\n# Task: {task}\n", ctx.format);
    if let Some(hint) = ctx.format_hint.as_deref().filter(|h| !h.trim().is_empty()) {
        for line in hint.lines().filter(|l| !l.trim().is_empty()).take(3) {
            h.push_str("# ");
            h.push_str(line.trim());
            h.push('\n');
        }
    }
    h
}

fn check(pos: usize, lo: usize, hi: usize) -> Result<(), MutationError> {
    if pos < lo || pos > hi {
        Err(MutationError::BadCut { pos, lo, hi })
    } else {
        Ok(())
    }
}

/// Completion keeping lines `[0, cut)` of `parent`. Legal cuts are
/// `sig + 1 ..= n`.
pub fn completion_at(parent: &FuzzerNode, cut: usize, ctx: &PromptContext) -> Result<MutationRequest, MutationError> {
    let lines = split_lines(&parent.source);
    let sig = signature_line(&parent.source);
    check(cut, sig + 1, lines.len().max(sig + 1))?;
    Ok(MutationRequest {
        kind: MutationKind::Completion,
        parents: vec![parent.id],
        header: header(ctx, "continue this generator so that it produces diverse inputs."),
        prefix: lines[..cut.min(lines.len())].concat(),
        suffix: String::new(),
    })
}

/// Infilling that removes `len` lines starting at `start`. Legal pairs have
/// `start > sig`, `1 <= len <= max_len` and `start + len <= n`.
pub fn infilling_at(
    parent: &FuzzerNode,
    start: usize,
    len: usize,
    max_len: usize,
    ctx: &PromptContext,
) -> Result<MutationRequest, MutationError> {
    let lines = split_lines(&parent.source);
    let sig = signature_line(&parent.source);
    if lines.len() < 3 || lines.len() <= sig + 1 {
        return Err(MutationError::TooShort { lines: lines.len() });
    }
    check(len, 1, max_len.max(1))?;
    check(start, sig + 1, lines.len().saturating_sub(len))?;
    Ok(MutationRequest {
        kind: MutationKind::Infilling,
        parents: vec![parent.id],
        header: header(ctx, "fill in the missing lines of this generator."),
        prefix: lines[..start].concat(),
        suffix: lines[start + len..].concat(),
    })
}

/// Splicing of the head of `a` (lines `[0, cut_a)`) with the tail of `b`
/// (lines `[cut_b, n_b)`); the model writes the code joining them.
pub fn splicing_at(
    a: &FuzzerNode,
    b: &FuzzerNode,
    cut_a: usize,
    cut_b: usize,
    ctx: &PromptContext,
) -> Result<MutationRequest, MutationError> {
    let la = split_lines(&a.source);
    let lb = split_lines(&b.source);
    let sa = signature_line(&a.source);
    let sb = signature_line(&b.source);
    check(cut_a, sa + 1, la.len().max(sa + 1))?;
    check(cut_b, sb + 1, lb.len().max(sb + 1))?;
    Ok(MutationRequest {
        kind: MutationKind::Splicing,
        parents: vec![a.id, b.id],
        header: header(ctx, "write the lines joining the first part of this generator to its last part."),
        prefix: la[..cut_a.min(la.len())].concat(),
        suffix: lb[cut_b.min(lb.len())..].concat(),
    })
}

pub fn make_completion<R: Rng>(parent: &FuzzerNode, ctx: &PromptContext, rng: &mut R) -> MutationRequest {
    let n = split_lines(&parent.source).len();
    let sig = signature_line(&parent.source);
    let cut = rng.gen_range(sig + 1..=n.max(sig + 1));
    completion_at(parent, cut, ctx).expect("cut drawn from the legal range")
}

/// Number of legal `(start, len)` infilling pairs.
pub fn infill_pairs(n: usize, sig: usize, max_len: usize) -> usize {
    (1..=max_len).map(|len| n.saturating_sub(len).saturating_sub(sig)).sum()
}

pub fn make_infilling<R: Rng>(
    parent: &FuzzerNode,
    max_len: usize,
    ctx: &PromptContext,
    rng: &mut R,
) -> Result<MutationRequest, MutationError> {
    let n = split_lines(&parent.source).len();
    let sig = signature_line(&parent.source);
    let total = infill_pairs(n, sig, max_len);
    if n < 3 || total == 0 {
        return Err(MutationError::TooShort { lines: n });
    }
    // Uniform over all legal pairs, not over lengths first.
    let mut k = rng.gen_range(0..total);
    for len in 1..=max_len {
        let count = n.saturating_sub(len).saturating_sub(sig);
        if k < count {
            return infilling_at(parent, sig + 1 + k, len, max_len, ctx);
        }
        k -= count;
    }
    unreachable!("k < total")
}

pub fn make_splicing<R: Rng>(a: &FuzzerNode, b: &FuzzerNode, ctx: &PromptContext, rng: &mut R) -> MutationRequest {
    let na = split_lines(&a.source).len();
    let nb = split_lines(&b.source).len();
    let sa = signature_line(&a.source);
    let sb = signature_line(&b.source);
    let ca = rng.gen_range(sa + 1..=na.max(sa + 1));
    let cb = rng.gen_range(sb + 1..=nb.max(sb + 1));
    splicing_at(a, b, ca, cb, ctx).expect("cuts drawn from the legal ranges")
}

/// Builds the request for mutant number `index` of an iteration. Operators
/// rotate through `kinds`; parents are drawn uniformly from `survivors`.
/// Infilling on a program too short for it falls back to completion.
pub fn plan_mutation<R: Rng>(
    index: usize,
    survivors: &[&FuzzerNode],
    kinds: &[MutationKind],
    infill_max_lines: usize,
    ctx: &PromptContext,
    rng: &mut R,
) -> Result<MutationRequest, MutationError> {
    if survivors.is_empty() || kinds.is_empty() {
        return Err(MutationError::NoParents);
    }
    let kind = kinds[index % kinds.len()];
    let pick = |rng: &mut R| survivors[rng.gen_range(0..survivors.len())];
    Ok(match kind {
        MutationKind::Completion => make_completion(pick(rng), ctx, rng),
        MutationKind::Infilling => {
            let p = pick(rng);
            match make_infilling(p, infill_max_lines, ctx, rng) {
                Ok(r) => r,
                Err(MutationError::TooShort { .. }) => make_completion(p, ctx, rng),
                Err(e) => return Err(e),
            }
        }
        MutationKind::Splicing => {
            let (a, b) = if survivors.len() >= 2 {
                let pair = rand::seq::index::sample(rng, survivors.len(), 2);
                (survivors[pair.index(0)], survivors[pair.index(1)])
            } else {
                (survivors[0], survivors[0])
            };
            make_splicing(a, b, ctx, rng)
        }
    })
}

// Lines at column zero that end a completed generator.
const STOP_PREFIXES: &[&str] = &["if __name__", "class ", "print(", "```", "assert "];

impl MutationRequest {
    pub fn provenance(&self) -> Provenance {
        match self.kind {
            MutationKind::Completion => Provenance::Completion(self.parents[0]),
            MutationKind::Infilling => Provenance::Infilling(self.parents[0]),
            MutationKind::Splicing => Provenance::Splicing(self.parents[0], self.parents[1]),
        }
    }

    /// Whether the model is asked to fill a hole rather than continue.
    pub fn is_fill_in_middle(&self) -> bool {
        !self.suffix.is_empty()
    }

    /// Prompt text before the hole: header followed by the prefix.
    pub fn prompt_prefix(&self) -> String {
        format!("{}{}", self.header, self.prefix)
    }

    /// Builds the mutant source from the model's output.
    pub fn assemble(&self, generated: &str) -> String {
        let middle = strip_echoed_header(&self.header, generated);
        let middle = if self.suffix.is_empty() { trim_completion(middle) } else { middle };
        let mut out = String::with_capacity(self.prefix.len() + middle.len() + self.suffix.len() + 2);
        out.push_str(&self.prefix);
        if !self.prefix.is_empty() && !self.prefix.ends_with('\n') && !middle.is_empty() {
            out.push('\n');
        }
        out.push_str(middle);
        if !out.ends_with('\n') && (!self.suffix.is_empty() || !out.is_empty()) {
            out.push('\n');
        }
        out.push_str(&self.suffix);
        out
    }
}

fn strip_echoed_header<'a>(header: &str, generated: &'a str) -> &'a str {
    let mut rest = generated;
    for h in header.lines() {
        let trimmed = rest.trim_start_matches([' ', '\t', '\r', '\n']);
        match trimmed.split_inclusive('\n').next() {
            Some(first) if first.trim() == h.trim() => rest = &trimmed[first.len()..],
            _ => break,
        }
    }
    rest
}

fn trim_completion(generated: &str) -> &str {
    let mut offset = 0;
    for line in generated.split_inclusive('\n') {
        if offset > 0 && STOP_PREFIXES.iter().any(|p| line.starts_with(p)) {
            return &generated[..offset];
        }
        offset += line.len();
    }
    generated
}

/// Crude token estimate: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("prompt needs about {needed} tokens after trimming, budget is {budget}")]
pub struct PromptTooLong {
    pub needed: usize,
    pub budget: usize,
}

/// The text actually sent to the model after fitting the token budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub prefix: String,
    pub suffix: String,
    /// Code lines dropped to fit the budget.
    pub dropped_lines: usize,
}

const KEEP_EDGE_LINES: usize = 10;

/// Drops interior lines of the prefix, then of the suffix, until
/// header + prefix + suffix fits `budget` tokens. The header and the first
/// and last ten lines of each part are always kept. Assembly still uses the
/// untrimmed request.
pub fn fit_prompt(req: &MutationRequest, budget: usize) -> Result<Prompt, PromptTooLong> {
    let mut prefix: Vec<&str> = split_lines(&req.prefix);
    let mut suffix: Vec<&str> = split_lines(&req.suffix);
    let size = |p: &[&str], s: &[&str]| {
        estimate_tokens(&req.header) + estimate_tokens(&p.concat()) + estimate_tokens(&s.concat())
    };
    let mut dropped = 0;
    while size(&prefix, &suffix) > budget && prefix.len() > 2 * KEEP_EDGE_LINES {
        prefix.remove(prefix.len() / 2);
        dropped += 1;
    }
    while size(&prefix, &suffix) > budget && suffix.len() > 2 * KEEP_EDGE_LINES {
        suffix.remove(suffix.len() / 2);
        dropped += 1;
    }
    let needed = size(&prefix, &suffix);
    if needed > budget {
        return Err(PromptTooLong { needed, budget });
    }
    Ok(Prompt { prefix: format!("{}{}", req.header, prefix.concat()), suffix: suffix.concat(), dropped_lines: dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CoverSet;
    use crate::toy::programs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn node(id: u64, src: &str) -> FuzzerNode {
        FuzzerNode {
            id: NodeId(id),
            source: src.to_string(),
            provenance: Provenance::Seed,
            cover: CoverSet::new(),
            iteration_born: 0,
        }
    }

    fn ctx() -> PromptContext {
        PromptContext { format: "balanced_parens".into(), format_hint: Some("strings over ( ) *".into()) }
    }

    #[test]
    fn signature_line_skips_helpers_and_comments() {
        assert_eq!(signature_line(programs::OPEN_ONLY), 0);
        let src = "# comment\ndef helper():\n    return 1\ndef gen_x(r):\n    return ''\n";
        assert_eq!(signature_line(src), 3);
    }

    #[test]
    fn completion_keeps_prefix() {
        let p = node(0, programs::OPEN_ONLY);
        let r = completion_at(&p, 5, &ctx()).unwrap();
        assert_eq!(r.prefix, split_lines(programs::OPEN_ONLY)[..5].concat());
        assert!(r.suffix.is_empty());
        assert!(completion_at(&p, 0, &ctx()).is_err());
        assert!(completion_at(&p, 10, &ctx()).is_err());
        assert!(completion_at(&p, 9, &ctx()).is_ok());
    }

    #[test]
    fn infilling_ranges() {
        let p = node(0, programs::OPEN_ONLY);
        let r = infilling_at(&p, 5, 1, 3, &ctx()).unwrap();
        assert_eq!(r.prefix + "X\n" + &r.suffix, programs::OPEN_ONLY.replace("            random_sequence += \"(\"\n", "X\n"));
        assert!(infilling_at(&p, 0, 1, 3, &ctx()).is_err());
        assert!(infilling_at(&p, 8, 2, 3, &ctx()).is_err());
        assert!(infilling_at(&p, 1, 4, 3, &ctx()).is_err());
        let short = node(1, programs::EMPTY);
        assert_eq!(infilling_at(&short, 1, 1, 3, &ctx()), Err(MutationError::TooShort { lines: 2 }));
        // n = 9, sig = 0: lengths 1, 2, 3 give 8 + 7 + 6 pairs.
        assert_eq!(infill_pairs(9, 0, 3), 21);
    }

    #[test]
    fn splicing_joins_head_and_tail() {
        let a = node(0, programs::OPEN_ONLY);
        let b = node(1, programs::STAR_ONLY);
        // Head of the first program before its line 7, tail of the second after its line 5.
        let r = splicing_at(&a, &b, 6, 5, &ctx()).unwrap();
        assert_eq!(r.parents, vec![NodeId(0), NodeId(1)]);
        assert_eq!(r.provenance(), Provenance::Splicing(NodeId(0), NodeId(1)));
        let glued = r.assemble("        elif choice == 1:\n");
        assert_eq!(glued, programs::OPEN_OR_STAR);
    }

    #[test]
    fn assemble_strips_header_and_stops_completion() {
        let p = node(0, programs::EMPTY);
        let r = completion_at(&p, 1, &ctx()).unwrap();
        let gen = format!("{}    return '()'\n\nif __name__ == '__main__':\n    print(1)\n", r.header);
        assert_eq!(r.assemble(&gen), "def fuzzer_fe(random: Random) -> str:\n    return '()'\n\n");
        let r2 = completion_at(&p, 2, &ctx()).unwrap();
        assert_eq!(r2.assemble(""), programs::EMPTY);
    }

    #[test]
    fn header_is_short() {
        let long_hint = PromptContext { format: "x".into(), format_hint: Some("a\nb\nc\nd\ne".into()) };
        let p = node(0, programs::OPEN_ONLY);
        let r = completion_at(&p, 3, &long_hint).unwrap();
        assert!(r.header.lines().count() <= 5);
        assert!(r.header.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn plan_rotates_kinds() {
        let a = node(0, programs::OPEN_ONLY);
        let b = node(1, programs::STAR_ONLY);
        let survivors = [&a, &b];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kinds: Vec<_> = (0..6)
            .map(|i| plan_mutation(i, &survivors, &MutationKind::ALL, 3, &ctx(), &mut rng).unwrap().kind)
            .collect();
        assert_eq!(kinds[..3], MutationKind::ALL);
        assert_eq!(kinds[3..], MutationKind::ALL);
        let sp = plan_mutation(2, &survivors, &MutationKind::ALL, 3, &ctx(), &mut rng).unwrap();
        assert_ne!(sp.parents[0], sp.parents[1]);
        let e = node(2, programs::EMPTY);
        let r = plan_mutation(1, &[&e], &MutationKind::ALL, 3, &ctx(), &mut rng).unwrap();
        assert_eq!(r.kind, MutationKind::Completion);
        assert_eq!(plan_mutation(0, &[], &MutationKind::ALL, 3, &ctx(), &mut rng), Err(MutationError::NoParents));
    }

    #[test]
    fn prompt_budget_trims_interior() {
        let body: String = (0..100).map(|i| format!("    x{i} = {i}\n")).collect();
        let src = format!("def gen(r):\n{body}    return ''\n");
        let p = node(0, &src);
        let r = completion_at(&p, 102, &ctx()).unwrap();
        let full = fit_prompt(&r, 100_000).unwrap();
        assert_eq!(full.dropped_lines, 0);
        let tight = fit_prompt(&r, 150).unwrap();
        assert!(tight.dropped_lines > 0);
        assert!(tight.prefix.starts_with(&r.header));
        assert!(tight.prefix.ends_with("    return ''\n"));
        assert!(estimate_tokens(&tight.prefix) <= 150);
        assert!(fit_prompt(&r, 20).is_err());
    }
}
