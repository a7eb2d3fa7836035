//! Capability kinds, the implication/incompatibility lattice, structural
//! propagation through places, and annotation instantiation.

use crate::lang::ast::Receiver;
use crate::lang::ir::{Proj, TAnnotation, TExpr, TypedProgram};
use crate::lang::types::Ty;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CapKind {
    ReadRef,
    WriteRef,
    Read,
    Write,
    Immutable,
    Unique,
    Local,
    NoReadRef,
    NoWriteRef,
}

impl CapKind {
    pub const ALL: [CapKind; 9] = [
        CapKind::ReadRef,
        CapKind::WriteRef,
        CapKind::Read,
        CapKind::Write,
        CapKind::Immutable,
        CapKind::Unique,
        CapKind::Local,
        CapKind::NoReadRef,
        CapKind::NoWriteRef,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Surface name used in `capable(..)` annotations and SMT predicates.
    pub fn annotation_name(self) -> &'static str {
        match self {
            CapKind::ReadRef => "readRef",
            CapKind::WriteRef => "writeRef",
            CapKind::Read => "read",
            CapKind::Write => "write",
            CapKind::Immutable => "immutable",
            CapKind::Unique => "unique",
            CapKind::Local => "local",
            CapKind::NoReadRef => "noReadRef",
            CapKind::NoWriteRef => "noWriteRef",
        }
    }

    pub fn is_deny(self) -> bool {
        matches!(self, CapKind::NoReadRef | CapKind::NoWriteRef)
    }
}

impl fmt::Display for CapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.annotation_name())
    }
}

/// A set of kinds, stored as a 9-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct CapSet(u16);

impl CapSet {
    pub const EMPTY: CapSet = CapSet(0);

    pub fn from_bits(bits: u16) -> CapSet {
        CapSet(bits & 0x1ff)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn single(k: CapKind) -> CapSet {
        CapSet(1 << k.index())
    }

    pub fn contains(self, k: CapKind) -> bool {
        self.0 & (1 << k.index()) != 0
    }

    pub fn insert(&mut self, k: CapKind) -> bool {
        let had = self.contains(k);
        self.0 |= 1 << k.index();
        !had
    }

    pub fn union(self, o: CapSet) -> CapSet {
        CapSet(self.0 | o.0)
    }

    pub fn is_subset(self, o: CapSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = CapKind> {
        CapKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }
}

impl FromIterator<CapKind> for CapSet {
    fn from_iter<I: IntoIterator<Item = CapKind>>(it: I) -> CapSet {
        let mut s = CapSet::EMPTY;
        for k in it {
            s.insert(k);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Implication {
    pub from: CapKind,
    pub to: CapKind,
    /// Not among the edges the source figure prints explicitly.
    pub extended: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incompatibility {
    pub a: CapKind,
    pub b: CapKind,
    pub extended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTable {
    pub implications: Vec<Implication>,
    pub incompatibilities: Vec<Incompatibility>,
}

impl EdgeTable {
    pub fn implies(&self, from: CapKind, to: CapKind) -> bool {
        self.implications.iter().any(|e| e.from == from && e.to == to)
    }

    pub fn base_incompatible(&self, a: CapKind, b: CapKind) -> bool {
        self.incompatibilities.iter().any(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    /// Graphviz rendering: solid arrows for implications, dashed undirected
    /// edges for incompatibilities.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph capabilities {\n  rankdir=TB;\n");
        for k in CapKind::ALL {
            s.push_str(&format!("  {k};\n"));
        }
        for e in &self.implications {
            let style = if e.extended { " [label=\"extended\"]" } else { "" };
            s.push_str(&format!("  {} -> {}{style};\n", e.from, e.to));
        }
        for p in &self.incompatibilities {
            let label = if p.extended { ", label=\"extended\"" } else { "" };
            s.push_str(&format!("  {} -> {} [style=dashed, dir=none{label}];\n", p.a, p.b));
        }
        s.push_str("}\n");
        s
    }
}

/// The fixed lattice.
pub fn base_edges() -> EdgeTable {
    use CapKind::*;
    let imp = |from, to, extended| Implication { from, to, extended };
    let inc = |a, b, extended| Incompatibility { a, b, extended };
    EdgeTable {
        implications: vec![
            imp(WriteRef, ReadRef, false),
            imp(WriteRef, Unique, false),
            imp(ReadRef, Immutable, false),
            imp(Immutable, Read, false),
            imp(Unique, Write, true),
        ],
        incompatibilities: vec![
            inc(Immutable, Write, false),
            inc(Unique, Read, false),
            inc(Unique, Write, true),
            // a reference of a kind cannot exist where that kind is denied
            inc(WriteRef, NoWriteRef, true),
            inc(ReadRef, NoReadRef, true),
        ],
    }
}

/// Reflexive-transitive closure under the implication edges.
pub fn implication_closure(kinds: CapSet) -> CapSet {
    let table = base_edges();
    let mut out = kinds;
    loop {
        let mut changed = false;
        for e in &table.implications {
            if out.contains(e.from) {
                changed |= out.insert(e.to);
            }
        }
        if !changed {
            return out;
        }
    }
}

pub fn incompatible(k1: CapKind, k2: CapKind) -> bool {
    let table = base_edges();
    let c1 = implication_closure(CapSet::single(k1));
    let c2 = implication_closure(CapSet::single(k2));
    c1.iter().any(|a| c2.iter().any(|b| table.base_incompatible(a, b)))
}

/// Kinds that propagate from a struct or tuple to its fields.
fn crosses_fields(kind: CapKind) -> bool {
    !kind.is_deny()
}

/// Capabilities a place of type `ty` passes on to its direct children.
/// Fields of type `UnsafeCell` and raw-pointer targets receive nothing.
pub fn structural_children(kind: CapKind, ty: &Ty, prog: &TypedProgram) -> Vec<(Proj, CapKind)> {
    match ty {
        Ty::Struct(..) | Ty::Tuple(_) if crosses_fields(kind) => prog
            .field_types(ty)
            .iter()
            .enumerate()
            .filter(|(_, t)| !matches!(t, Ty::UnsafeCell(_)))
            .map(|(i, _)| (Proj::Field(i), kind))
            .collect(),
        Ty::MutRef(_) if kind == CapKind::WriteRef => vec![(Proj::Deref, CapKind::WriteRef)],
        Ty::SharedRef(_) | Ty::MutRef(_) if kind == CapKind::ReadRef => vec![(Proj::Deref, CapKind::ReadRef)],
        _ => vec![],
    }
}

/// An annotation specialised to one receiver context: when the receiver
/// capability holds and `condition` evaluates to true, `kind` holds at the
/// address `target` evaluates to.
#[derive(Debug, Clone, Copy)]
pub struct GuardedAtom<'p> {
    pub condition: Option<&'p TExpr>,
    pub kind: CapKind,
    pub target: &'p TExpr,
    pub target_ty: &'p Ty,
    pub annotation: &'p TAnnotation,
}

/// Annotations of `ty` that fire in a receiver context. A mutable receiver
/// also fires shared-receiver annotations.
pub fn instantiate_annotations<'p>(prog: &'p TypedProgram, ty: &Ty, receiver: Receiver) -> Vec<GuardedAtom<'p>> {
    let Some(adt) = prog.adt(ty) else { return vec![] };
    adt.annotations
        .iter()
        .filter(|a| a.receiver == receiver || (receiver == Receiver::Mut && a.receiver == Receiver::Shared))
        .map(|a| GuardedAtom { condition: a.condition.as_ref(), kind: a.kind, target: &a.target, target_ty: &a.target_ty, annotation: a })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;
    use CapKind::*;

    /// Reachability by explicit path enumeration over the edge list.
    fn reachable_oracle(start: CapKind) -> BTreeSet<CapKind> {
        let t = base_edges();
        let mut out = BTreeSet::from([start]);
        let mut paths = vec![vec![start]];
        while let Some(path) = paths.pop() {
            let last = *path.last().unwrap();
            for e in t.implications.iter().filter(|e| e.from == last) {
                if !path.contains(&e.to) {
                    out.insert(e.to);
                    let mut p = path.clone();
                    p.push(e.to);
                    paths.push(p);
                }
            }
        }
        out
    }

    fn closure_oracle(s: CapSet) -> CapSet {
        s.iter().flat_map(reachable_oracle).collect()
    }

    fn incompatible_oracle(a: CapKind, b: CapKind) -> bool {
        let t = base_edges();
        let ra = reachable_oracle(a);
        let rb = reachable_oracle(b);
        ra.iter().any(|x| rb.iter().any(|y| t.incompatibilities.iter().any(|p| (p.a, p.b) == (*x, *y) || (p.a, p.b) == (*y, *x))))
    }

    #[test]
    fn base_table_examples() {
        let t = base_edges();
        assert!(t.implies(ReadRef, Immutable));
        assert!(t.implies(WriteRef, Unique));
        assert!(t.base_incompatible(Unique, Read));
        assert!(t.base_incompatible(Read, Unique));
        assert_eq!(CapKind::ALL.len(), 9);
    }

    #[test]
    fn extended_entries_are_marked() {
        let t = base_edges();
        let ext: Vec<_> = t.implications.iter().filter(|e| e.extended).map(|e| (e.from, e.to)).collect();
        assert_eq!(ext, vec![(Unique, Write)]);
        let ext: Vec<_> = t.incompatibilities.iter().filter(|p| p.extended).map(|p| (p.a, p.b)).collect();
        assert_eq!(ext, vec![(Unique, Write), (WriteRef, NoWriteRef), (ReadRef, NoReadRef)]);
    }

    #[test]
    fn extended_unique_implies_write() {
        assert!(implication_closure(CapSet::single(Unique)).contains(Write));
    }

    #[test]
    fn extended_unique_excludes_write() {
        assert!(incompatible(Unique, Write));
        assert!(incompatible(Write, Unique));
    }

    #[test]
    fn extended_deny_excludes_reference_kind() {
        assert!(incompatible(WriteRef, NoWriteRef));
        assert!(incompatible(ReadRef, NoReadRef));
        assert!(incompatible(WriteRef, NoReadRef));
        assert!(!incompatible(Read, NoReadRef));
        assert!(!incompatible(Local, NoWriteRef));
    }

    #[test]
    fn closure_examples() {
        assert_eq!(implication_closure(CapSet::EMPTY), CapSet::EMPTY);
        assert_eq!(implication_closure(CapSet::single(Immutable)), [Immutable, Read].into_iter().collect());
        let expected: CapSet = [WriteRef, ReadRef, Immutable, Read, Unique, Write].into_iter().collect();
        assert_eq!(implication_closure(CapSet::single(WriteRef)), expected);
        assert_eq!(closure_oracle(CapSet::single(WriteRef)), expected);
    }

    #[test]
    fn incompatible_examples() {
        assert!(incompatible(Immutable, Write));
        assert!(!incompatible(Read, Write));
        assert!(incompatible(WriteRef, ReadRef));
    }

    #[test]
    fn incompatible_matches_oracle_on_all_pairs() {
        for a in CapKind::ALL {
            for b in CapKind::ALL {
                assert_eq!(incompatible(a, b), incompatible_oracle(a, b), "{a} {b}");
            }
        }
    }

    #[test]
    fn closure_properties_on_all_subsets() {
        for bits in 0..512u16 {
            let s = CapSet::from_bits(bits);
            let c = implication_closure(s);
            assert_eq!(c, closure_oracle(s));
            assert_eq!(implication_closure(c), c);
            assert!(s.is_subset(c));
            for k in CapKind::ALL {
                let mut bigger = s;
                bigger.insert(k);
                assert!(c.is_subset(implication_closure(bigger)));
            }
        }
    }

    #[test]
    fn implication_graph_is_acyclic() {
        for k in CapKind::ALL {
            let t = base_edges();
            for e in t.implications.iter().filter(|e| e.from == k) {
                assert!(!reachable_oracle(e.to).contains(&k));
            }
        }
    }

    #[test]
    fn nothing_implies_deny_or_local() {
        for k in CapKind::ALL {
            let c = implication_closure(CapSet::single(k));
            for d in [NoReadRef, NoWriteRef, Local] {
                assert!(!c.contains(d) || d == k, "{k} implies {d}");
            }
        }
    }

    #[test]
    fn singleton_irreflexivity() {
        for k in [Read, Write, Local, NoReadRef, NoWriteRef] {
            assert!(!incompatible(k, k), "{k}");
        }
        for t in base_edges().incompatibilities {
            assert_ne!(t.a, t.b);
        }
    }

    #[test]
    fn structural_examples() {
        let prog = TypedProgram::default();
        assert_eq!(structural_children(WriteRef, &Ty::MutRef(Box::new(Ty::Int)), &prog), vec![(Proj::Deref, WriteRef)]);
        let cell = Ty::SharedRef(Box::new(Ty::Struct("Cell".into(), vec![Ty::Int])));
        assert_eq!(structural_children(ReadRef, &cell, &prog), vec![(Proj::Deref, ReadRef)]);
        assert!(structural_children(ReadRef, &Ty::RawPtr(Box::new(Ty::Int), true), &prog).is_empty());
        assert!(structural_children(Local, &cell, &prog).is_empty());
        assert!(structural_children(NoWriteRef, &Ty::MutRef(Box::new(Ty::Int)), &prog).is_empty());
        let tup = Ty::Tuple(vec![Ty::Int, Ty::Bool]);
        assert_eq!(structural_children(Unique, &tup, &prog), vec![(Proj::Field(0), Unique), (Proj::Field(1), Unique)]);
    }

    #[test]
    fn structural_children_skip_unsafe_cell_fields() {
        let files = crate::corpus::prelude_files();
        let prog = crate::lang::typecheck(&files).unwrap();
        let cell = Ty::Struct("Cell".into(), vec![Ty::Int]);
        if prog.adt(&cell).is_some() {
            for k in CapKind::ALL {
                assert!(structural_children(k, &cell, &prog).is_empty());
            }
        }
        for ty in prog.adts.keys() {
            for k in CapKind::ALL {
                for (p, _) in structural_children(k, ty, &prog) {
                    if let Proj::Field(i) = p {
                        assert!(!matches!(prog.field_types(ty)[i], Ty::UnsafeCell(_)));
                    }
                }
            }
        }
    }

    #[test]
    fn dot_lists_every_edge() {
        let t = base_edges();
        let dot = t.to_dot();
        assert_eq!(dot.matches("->").count(), t.implications.len() + t.incompatibilities.len());
        assert!(dot.contains("writeRef -> unique"));
    }

    fn kind() -> impl Strategy<Value = CapKind> {
        (0usize..9).prop_map(|i| CapKind::ALL[i])
    }

    proptest! {
        #[test]
        fn incompatibility_is_symmetric(a in kind(), b in kind()) {
            prop_assert_eq!(incompatible(a, b), incompatible(b, a));
        }

        #[test]
        fn closure_is_monotone(x in 0u16..512, y in 0u16..512) {
            let (s1, s2) = (CapSet::from_bits(x), CapSet::from_bits(x | y));
            prop_assert!(implication_closure(s1).is_subset(implication_closure(s2)));
        }

        #[test]
        fn implied_kinds_inherit_incompatibilities(a in kind(), b in kind(), c in kind()) {
            if implication_closure(CapSet::single(a)).contains(b) && incompatible(b, c) {
                prop_assert!(incompatible(a, c));
            }
        }
    }
}
