//! Cover sets, the strength order between fuzzers, and the explored
//! fragment of the fuzzer space.
//!
//! A fuzzer is characterised by the set of coverage units it reaches in the
//! system under test. One fuzzer is *stronger* than another when its cover
//! set is a proper superset of the other's; fuzzers with identical cover sets
//! are equivalent, and fuzzers whose sets do not contain one another are
//! incomparable. [`FuzzerSpace`] stores the fuzzers discovered so far together
//! with arrows `f -> m` recording that `m` is strictly stronger than `f`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque coverage unit identifier (a line number for the toy SUT, an edge id
/// for external harnesses).
pub type CoverageUnit = u64;

/// A duplicate-free, ascending set of coverage units.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<CoverageUnit>", into = "Vec<CoverageUnit>")]
pub struct CoverSet(Vec<CoverageUnit>);

impl CoverSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, unit: CoverageUnit) -> bool {
        self.0.binary_search(&unit).is_ok()
    }

    /// Inserts a unit, returning `true` if it was not present.
    pub fn insert(&mut self, unit: CoverageUnit) -> bool {
        match self.0.binary_search(&unit) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, unit);
                true
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = CoverageUnit> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[CoverageUnit] {
        &self.0
    }

    pub fn is_subset(&self, other: &CoverSet) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut theirs = other.0.iter();
        'outer: for unit in &self.0 {
            for candidate in theirs.by_ref() {
                match candidate.cmp(unit) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn is_proper_subset(&self, other: &CoverSet) -> bool {
        self.len() < other.len() && self.is_subset(other)
    }

    pub fn union(&self, other: &CoverSet) -> CoverSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        CoverSet(out)
    }

    pub fn union_with(&mut self, other: &CoverSet) {
        if !other.is_subset(self) {
            *self = self.union(other);
        }
    }

    pub fn difference(&self, other: &CoverSet) -> CoverSet {
        CoverSet(self.0.iter().copied().filter(|u| !other.contains(*u)).collect())
    }

    /// True if `self` holds at least one unit missing from `other`.
    pub fn has_units_outside(&self, other: &CoverSet) -> bool {
        !self.is_subset(other)
    }
}

impl From<Vec<CoverageUnit>> for CoverSet {
    fn from(mut units: Vec<CoverageUnit>) -> Self {
        units.sort_unstable();
        units.dedup();
        CoverSet(units)
    }
}

impl From<CoverSet> for Vec<CoverageUnit> {
    fn from(set: CoverSet) -> Self {
        set.0
    }
}

impl FromIterator<CoverageUnit> for CoverSet {
    fn from_iter<I: IntoIterator<Item = CoverageUnit>>(iter: I) -> Self {
        CoverSet::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl<const N: usize> From<[CoverageUnit; N]> for CoverSet {
    fn from(units: [CoverageUnit; N]) -> Self {
        CoverSet::from(units.to_vec())
    }
}

impl fmt::Display for CoverSet {
    /// Renders runs of consecutive units compactly, e.g. `{1..5, 13}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut i = 0;
        let mut first = true;
        while i < self.0.len() {
            let start = self.0[i];
            let mut end = start;
            while i + 1 < self.0.len() && self.0[i + 1] == end + 1 {
                i += 1;
                end += 1;
            }
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            if end > start + 1 {
                write!(f, "{start}..{end}")?;
            } else if end == start + 1 {
                write!(f, "{start}, {end}")?;
            } else {
                write!(f, "{start}")?;
            }
            i += 1;
        }
        write!(f, "}}")
    }
}

/// Relative strength of fuzzer `a` with respect to fuzzer `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strength {
    Stronger,
    Weaker,
    Equivalent,
    Incomparable,
}

pub fn compare_strength(a: &CoverSet, b: &CoverSet) -> Strength {
    if a == b {
        Strength::Equivalent
    } else if b.is_proper_subset(a) {
        Strength::Stronger
    } else if a.is_proper_subset(b) {
        Strength::Weaker
    } else {
        Strength::Incomparable
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// How a node came to exist. Serialized as `{"kind": ..., "parents": [...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ProvenanceRepr", try_from = "ProvenanceRepr")]
pub enum Provenance {
    Seed,
    Splicing(NodeId, NodeId),
    Completion(NodeId),
    Infilling(NodeId),
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRepr {
    kind: String,
    parents: Vec<NodeId>,
}

impl From<Provenance> for ProvenanceRepr {
    fn from(p: Provenance) -> Self {
        ProvenanceRepr {
            kind: p.kind_name().to_string(),
            parents: p.parents(),
        }
    }
}

impl TryFrom<ProvenanceRepr> for Provenance {
    type Error = String;

    fn try_from(r: ProvenanceRepr) -> Result<Self, Self::Error> {
        match (r.kind.as_str(), r.parents.as_slice()) {
            ("seed", []) => Ok(Provenance::Seed),
            ("splicing", [a, b]) => Ok(Provenance::Splicing(*a, *b)),
            ("completion", [p]) => Ok(Provenance::Completion(*p)),
            ("infilling", [p]) => Ok(Provenance::Infilling(*p)),
            (kind, parents) => Err(format!("bad provenance {kind} with {} parents", parents.len())),
        }
    }
}

impl Provenance {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::Splicing(..) => "splicing",
            Provenance::Completion(_) => "completion",
            Provenance::Infilling(_) => "infilling",
        }
    }

    pub fn parents(&self) -> Vec<NodeId> {
        match *self {
            Provenance::Seed => Vec::new(),
            Provenance::Splicing(a, b) => vec![a, b],
            Provenance::Completion(p) | Provenance::Infilling(p) => vec![p],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzerNode {
    pub id: NodeId,
    pub source: String,
    pub provenance: Provenance,
    pub cover: CoverSet,
    pub iteration_born: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("unknown fuzzer node {0}")]
    UnknownNode(NodeId),
}

/// Why [`FuzzerSpace::explore`] rejected a mutant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// The mutant failed to run.
    Invalid { detail: String },
    /// An existing node covers everything the mutant covers.
    WeakerOrEquivalent { dominated_by: NodeId },
}

/// A mutant offered to [`FuzzerSpace::explore`]: its source, the node(s) it
/// was derived from, and either its measured cover set or a failure message.
#[derive(Clone, Debug)]
pub struct Mutant {
    pub source: String,
    pub provenance: Provenance,
    pub outcome: Result<CoverSet, String>,
}

#[derive(Clone, Debug, Default)]
pub struct ExploreReport {
    pub admitted: Vec<NodeId>,
    /// Index into the offered mutant list, with the reason it was rejected.
    pub discarded: Vec<(usize, DiscardReason)>,
}

impl ExploreReport {
    pub fn invalid_count(&self) -> usize {
        self.discarded
            .iter()
            .filter(|(_, r)| matches!(r, DiscardReason::Invalid { .. }))
            .count()
    }

    pub fn weak_count(&self) -> usize {
        self.discarded.len() - self.invalid_count()
    }
}

/// The explored part of the fuzzer space.
///
/// Invariants: no two nodes share a cover set, and an arrow `(f, m)` exists
/// only if `cover(f)` is a proper subset of `cover(m)`. Reachability along
/// arrows coincides with the proper-subset relation on stored covers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzerSpace {
    nodes: Vec<FuzzerNode>,
    arrows: BTreeSet<(NodeId, NodeId)>,
    #[serde(skip)]
    index: BTreeMap<NodeId, usize>,
}

impl FuzzerSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[FuzzerNode] {
        &self.nodes
    }

    pub fn arrows(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.arrows.iter().copied()
    }

    pub fn has_arrow(&self, from: NodeId, to: NodeId) -> bool {
        self.arrows.contains(&(from, to))
    }

    pub fn get(&self, id: NodeId) -> Option<&FuzzerNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn node(&self, id: NodeId) -> Result<&FuzzerNode, LatticeError> {
        self.get(id).ok_or(LatticeError::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    fn next_id(&self) -> NodeId {
        NodeId(self.nodes.last().map_or(0, |n| n.id.0 + 1))
    }

    /// Returns the node whose cover equals `cover`, if any.
    pub fn find_equivalent(&self, cover: &CoverSet) -> Option<NodeId> {
        self.nodes.iter().find(|n| &n.cover == cover).map(|n| n.id)
    }

    fn check_parents(&self, provenance: &Provenance) -> Result<(), LatticeError> {
        for p in provenance.parents() {
            if !self.contains(p) {
                return Err(LatticeError::UnknownNode(p));
            }
        }
        Ok(())
    }

    fn push(&mut self, source: String, provenance: Provenance, cover: CoverSet, born: u32) -> NodeId {
        let id = self.next_id();
        self.index.insert(id, self.nodes.len());
        self.nodes.push(FuzzerNode {
            id,
            source,
            provenance,
            cover,
            iteration_born: born,
        });
        id
    }

    /// Inserts a node regardless of dominance, wiring arrows in both
    /// directions. An equivalent node already present is returned instead
    /// and `inserted` is false.
    pub fn insert(
        &mut self,
        source: String,
        provenance: Provenance,
        cover: CoverSet,
        iteration_born: u32,
    ) -> Result<(NodeId, bool), LatticeError> {
        self.check_parents(&provenance)?;
        if let Some(existing) = self.find_equivalent(&cover) {
            return Ok((existing, false));
        }
        let mut below = Vec::new();
        let mut above = Vec::new();
        for n in &self.nodes {
            if n.cover.is_proper_subset(&cover) {
                below.push(n.id);
            } else if cover.is_proper_subset(&n.cover) {
                above.push(n.id);
            }
        }
        let id = self.push(source, provenance, cover, iteration_born);
        self.arrows.extend(below.into_iter().map(|f| (f, id)));
        self.arrows.extend(above.into_iter().map(|m| (id, m)));
        Ok((id, true))
    }

    /// Adds a seed fuzzer. Seeds with equal covers collapse onto one node.
    pub fn add_seed(&mut self, source: String, cover: CoverSet) -> NodeId {
        self.insert(source, Provenance::Seed, cover, 0)
            .expect("seeds have no parents")
            .0
    }

    /// Offers a batch of mutants to the space, in order.
    ///
    /// Failed mutants and mutants covered by a single existing node are
    /// discarded. Everything else is admitted, with an arrow from every
    /// existing node it strictly dominates; a mutant that only reaches new
    /// units is admitted without arrows. Mutants admitted earlier in the batch
    /// take part in the comparisons for later ones.
    pub fn explore(&mut self, mutants: Vec<Mutant>, iteration_born: u32) -> Result<ExploreReport, LatticeError> {
        let mut report = ExploreReport::default();
        for (i, mutant) in mutants.into_iter().enumerate() {
            let cover = match mutant.outcome {
                Ok(cover) => cover,
                Err(detail) => {
                    report.discarded.push((i, DiscardReason::Invalid { detail }));
                    continue;
                }
            };
            self.check_parents(&mutant.provenance)?;
            if let Some(dominator) = self.nodes.iter().find(|f| cover.is_subset(&f.cover)) {
                report.discarded.push((
                    i,
                    DiscardReason::WeakerOrEquivalent {
                        dominated_by: dominator.id,
                    },
                ));
                continue;
            }
            let below: Vec<NodeId> = self
                .nodes
                .iter()
                .filter(|f| f.cover.is_proper_subset(&cover))
                .map(|f| f.id)
                .collect();
            let id = self.push(mutant.source, mutant.provenance, cover, iteration_born);
            self.arrows.extend(below.into_iter().map(|f| (f, id)));
            report.admitted.push(id);
        }
        Ok(report)
    }

    /// Exact union of the covers of the given nodes.
    pub fn union_cover<'a, I>(&self, ids: I) -> Result<CoverSet, LatticeError>
    where
        I: IntoIterator<Item = &'a NodeId>,
    {
        let mut acc = CoverSet::new();
        for id in ids {
            acc.union_with(&self.node(*id)?.cover);
        }
        Ok(acc)
    }

    /// Nodes reachable from `from` by following arrows.
    pub fn reachable_from(&self, from: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            for &(_, to) in self.arrows.range((n, NodeId(0))..=(n, NodeId(u64::MAX))) {
                if seen.insert(to) {
                    stack.push(to);
                }
            }
        }
        seen
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let mut space: FuzzerSpace = serde_json::from_str(text)?;
        space.reindex();
        Ok(space)
    }

    /// Rebuilds the id index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(lo: u64, hi: u64) -> Vec<u64> {
        (lo..=hi).collect()
    }

    fn set(parts: &[Vec<u64>]) -> CoverSet {
        parts.iter().flatten().copied().collect()
    }

    fn open_only() -> CoverSet {
        set(&[range(1, 5), vec![13]])
    }

    fn all_lines() -> CoverSet {
        set(&[range(1, 13)])
    }

    fn close_or_star() -> CoverSet {
        set(&[range(1, 4), vec![6], range(9, 13)])
    }

    fn mutant(cover: CoverSet) -> Mutant {
        Mutant {
            source: String::new(),
            provenance: Provenance::Seed,
            outcome: Ok(cover),
        }
    }

    #[test]
    fn strength_examples() {
        assert_eq!(compare_strength(&open_only(), &all_lines()), Strength::Weaker);
        assert_eq!(compare_strength(&all_lines(), &open_only()), Strength::Stronger);
        assert_eq!(compare_strength(&all_lines(), &all_lines()), Strength::Equivalent);
        assert_eq!(compare_strength(&open_only(), &close_or_star()), Strength::Incomparable);
    }

    #[test]
    fn set_algebra() {
        let a = CoverSet::from([3, 1, 2, 2]);
        assert_eq!(a.as_slice(), &[1, 2, 3]);
        let b = CoverSet::from([2, 5]);
        assert_eq!(a.union(&b), CoverSet::from([1, 2, 3, 5]));
        assert!(CoverSet::from([1, 3]).is_proper_subset(&a));
        assert!(!a.is_proper_subset(&a));
        assert!(a.is_subset(&a));
        assert!(CoverSet::new().is_subset(&a));
        assert!(!b.is_subset(&a));
        assert_eq!(a.difference(&b), CoverSet::from([1, 3]));
    }

    #[test]
    fn display_compacts_runs() {
        assert_eq!(open_only().to_string(), "{1..5, 13}");
        assert_eq!(CoverSet::from([1, 2, 7]).to_string(), "{1, 2, 7}");
        assert_eq!(CoverSet::new().to_string(), "{}");
    }

    #[test]
    fn explore_admits_stronger_and_novel_mutants() {
        let mut space = FuzzerSpace::new();
        let b = space.add_seed("b".into(), open_only());
        let d = space.add_seed("d".into(), set(&[range(1, 3), range(11, 13)]));
        let report = space
            .explore(
                vec![
                    mutant(set(&[range(1, 6), range(11, 13)])),
                    mutant(set(&[range(1, 3), vec![13]])),
                    Mutant {
                        source: "broken".into(),
                        provenance: Provenance::Infilling(b),
                        outcome: Err("TypeError".into()),
                    },
                    mutant(set(&[range(1, 7), vec![9, 10]])),
                ],
                1,
            )
            .unwrap();
        assert_eq!(report.admitted.len(), 2);
        let g = report.admitted[0];
        let k = report.admitted[1];
        assert!(space.has_arrow(b, g));
        assert!(space.has_arrow(d, g));
        assert_eq!(space.arrows().filter(|&(f, t)| f == k || t == k).count(), 0);
        assert_eq!(report.invalid_count(), 1);
        assert_eq!(report.weak_count(), 1);
        assert_eq!(
            report.discarded[0],
            (1, DiscardReason::WeakerOrEquivalent { dominated_by: b })
        );
    }

    #[test]
    fn explore_discards_equivalent() {
        let mut space = FuzzerSpace::new();
        space.add_seed("a".into(), all_lines());
        let report = space.explore(vec![mutant(all_lines())], 1).unwrap();
        assert!(report.admitted.is_empty());
        assert_eq!(space.len(), 1);
    }

    #[test]
    fn explore_rejects_unknown_parent() {
        let mut space = FuzzerSpace::new();
        let err = space
            .explore(
                vec![Mutant {
                    source: String::new(),
                    provenance: Provenance::Completion(NodeId(7)),
                    outcome: Ok(all_lines()),
                }],
                1,
            )
            .unwrap_err();
        assert_eq!(err, LatticeError::UnknownNode(NodeId(7)));
    }

    #[test]
    fn union_cover_examples() {
        let mut space = FuzzerSpace::new();
        let b = space.add_seed("b".into(), open_only());
        let d = space.add_seed("d".into(), set(&[range(1, 3), range(11, 13)]));
        let a = space.add_seed("a".into(), all_lines());
        assert_eq!(
            space.union_cover(&[b, d]).unwrap(),
            CoverSet::from([1, 2, 3, 4, 5, 11, 12, 13])
        );
        assert_eq!(space.union_cover(&[]).unwrap(), CoverSet::new());
        assert_eq!(space.union_cover(&[a]).unwrap(), all_lines());
        assert_eq!(
            space.union_cover(&[NodeId(99)]).unwrap_err(),
            LatticeError::UnknownNode(NodeId(99))
        );
    }

    #[test]
    fn insert_wires_arrows_both_ways() {
        let mut space = FuzzerSpace::new();
        let top = space.add_seed("top".into(), all_lines());
        let (mid, fresh) = space
            .insert("mid".into(), Provenance::Seed, open_only(), 1)
            .unwrap();
        assert!(fresh);
        assert!(space.has_arrow(mid, top));
        let (again, fresh) = space
            .insert("dup".into(), Provenance::Seed, open_only(), 1)
            .unwrap();
        assert_eq!(again, mid);
        assert!(!fresh);
    }

    #[test]
    fn json_roundtrip_is_sorted_and_stable() {
        let mut space = FuzzerSpace::new();
        let b = space.add_seed("b".into(), open_only());
        space
            .explore(
                vec![Mutant {
                    source: "g".into(),
                    provenance: Provenance::Completion(b),
                    outcome: Ok(all_lines()),
                }],
                1,
            )
            .unwrap();
        let json = space.to_json();
        let back = FuzzerSpace::from_json(&json).unwrap();
        assert_eq!(back, space);
        assert_eq!(back.to_json(), json);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["arrows"], serde_json::json!([[0, 1]]));
        assert_eq!(value["nodes"][1]["provenance"], serde_json::json!({"kind": "completion", "parents": [0]}));
        assert_eq!(value["nodes"][0]["cover"], serde_json::json!([1, 2, 3, 4, 5, 13]));
    }
}
