//! Control-flow graphs, liveness, lexical borrows and root places.

use crate::capability::CapKind;
use crate::lang::ir::*;
use crate::lang::types::Ty;
use crate::lang::Span;
use std::collections::{BTreeMap, BTreeSet};

pub type PointId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone)]
pub struct Point {
    pub id: PointId,
    pub version: String,
}

#[derive(Debug, Clone, Copy)]
pub enum EdgeKind<'a> {
    Stmt(&'a TStmt),
    /// One side of an `if`.
    Branch { cond: &'a TExpr, taken: bool, span: Span },
    /// One arm of a statement-level match; `binding` receives the payload.
    Arm { scrut: &'a Place, variant: usize, binding: Option<VarId>, span: Span },
    /// Another thread may run here.
    Interference { span: Span },
    /// Control merge; no statement and no transition version.
    Join,
}

impl EdgeKind<'_> {
    pub fn span(&self) -> Option<Span> {
        match self {
            EdgeKind::Stmt(s) => Some(s.span),
            EdgeKind::Branch { span, .. } | EdgeKind::Arm { span, .. } | EdgeKind::Interference { span } => Some(*span),
            EdgeKind::Join => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge<'a> {
    pub id: EdgeId,
    pub from: PointId,
    pub to: PointId,
    pub kind: EdgeKind<'a>,
    pub transition: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ProgramGraph<'a> {
    pub points: Vec<Point>,
    pub edges: Vec<Edge<'a>>,
    /// Where postconditions are checked; `None` when every path panics.
    pub exit: Option<PointId>,
    /// Variables whose scope ends on arrival at a point.
    pub kills: Vec<BTreeSet<VarId>>,
}

impl ProgramGraph<'_> {
    pub fn entry(&self) -> PointId {
        0
    }

    pub fn incoming(&self, p: PointId) -> impl Iterator<Item = &Edge<'_>> {
        self.edges.iter().filter(move |e| e.to == p)
    }

    pub fn outgoing(&self, p: PointId) -> impl Iterator<Item = &Edge<'_>> {
        self.edges.iter().filter(move |e| e.from == p)
    }

    /// Points that can reach `p`, including `p`.
    pub fn ancestors(&self, p: PointId) -> BTreeSet<PointId> {
        let mut seen = BTreeSet::from([p]);
        let mut stack = vec![p];
        while let Some(q) = stack.pop() {
            for e in self.incoming(q) {
                if seen.insert(e.from) {
                    stack.push(e.from);
                }
            }
        }
        seen
    }

    /// Points in an order where every edge goes forward. Points are
    /// created in that order already, so this is the identity.
    pub fn topo_order(&self) -> Vec<PointId> {
        (0..self.points.len()).collect()
    }
}

struct Builder<'a> {
    points: Vec<Point>,
    edges: Vec<Edge<'a>>,
    kills: Vec<BTreeSet<VarId>>,
    interference: bool,
    ends: Vec<PointId>,
    transitions: usize,
}

impl<'a> Builder<'a> {
    fn point(&mut self) -> PointId {
        let id = self.points.len();
        self.points.push(Point { id, version: format!("w{id}") });
        self.kills.push(BTreeSet::new());
        id
    }

    fn edge(&mut self, from: PointId, to: PointId, kind: EdgeKind<'a>) {
        let transition = match kind {
            EdgeKind::Join => None,
            _ => {
                self.transitions += 1;
                Some(format!("t{}", self.transitions - 1))
            }
        };
        let id = self.edges.len();
        self.edges.push(Edge { id, from, to, kind, transition });
    }

    fn step(&mut self, from: PointId, kind: EdgeKind<'a>) -> PointId {
        let to = self.point();
        self.edge(from, to, kind);
        to
    }

    fn interfere(&mut self, at: PointId, span: Span) -> PointId {
        if self.interference {
            self.step(at, EdgeKind::Interference { span })
        } else {
            at
        }
    }

    /// Returns the fall-through point, or `None` if the block diverges.
    fn block(&mut self, b: &'a TBlock, start: PointId) -> Option<PointId> {
        let mut cur = start;
        for s in &b.stmts {
            cur = self.stmt(s, cur)?;
        }
        self.kills[cur].extend(b.scope.iter().copied());
        Some(cur)
    }

    fn stmt(&mut self, s: &'a TStmt, at: PointId) -> Option<PointId> {
        let at = self.interfere(at, s.span);
        let out = match &s.kind {
            TStmtKind::If { cond, then_blk, else_blk } => {
                let t = self.step(at, EdgeKind::Branch { cond, taken: true, span: s.span });
                let f = self.step(at, EdgeKind::Branch { cond, taken: false, span: s.span });
                let ends: Vec<PointId> = [self.block(then_blk, t), self.block(else_blk, f)].into_iter().flatten().collect();
                self.merge(ends)
            }
            TStmtKind::Match { scrut, arms } => {
                let mut ends = Vec::new();
                for a in arms {
                    let p = self.step(at, EdgeKind::Arm { scrut, variant: a.variant, binding: a.binding, span: s.span });
                    ends.extend(self.block(&a.body, p));
                }
                self.merge(ends)
            }
            TStmtKind::Return(_) => {
                let p = self.step(at, EdgeKind::Stmt(s));
                self.ends.push(p);
                None
            }
            TStmtKind::Panic => {
                self.step(at, EdgeKind::Stmt(s));
                None
            }
            _ => Some(self.step(at, EdgeKind::Stmt(s))),
        }?;
        self.kills[out].extend(s.kills.iter().copied());
        Some(out)
    }

    fn merge(&mut self, ends: Vec<PointId>) -> Option<PointId> {
        match ends.len() {
            0 => None,
            1 => Some(ends[0]),
            _ => {
                let j = self.point();
                for e in ends {
                    self.edge(e, j, EdgeKind::Join);
                }
                Some(j)
            }
        }
    }
}

/// Whether a function touches a type that other threads may share.
pub fn uses_thread_shared(prog: &TypedProgram, f: &FnInst) -> bool {
    f.locals.iter().any(|l| prog.thread_shared(&l.ty))
}

pub fn build_cfg<'a>(prog: &TypedProgram, f: &'a FnInst) -> ProgramGraph<'a> {
    let mut b = Builder { points: vec![], edges: vec![], kills: vec![], interference: uses_thread_shared(prog, f), ends: vec![], transitions: 0 };
    let entry = b.point();
    let exit = if let Some(body) = &f.body {
        let mut cur = entry;
        let mut fell = true;
        for s in &body.stmts {
            match b.stmt(s, cur) {
                Some(p) => cur = p,
                None => {
                    fell = false;
                    break;
                }
            }
        }
        let mut ends = std::mem::take(&mut b.ends);
        if fell {
            ends.push(cur);
        }
        b.merge(ends)
    } else {
        Some(entry)
    };
    ProgramGraph { points: b.points, edges: b.edges, exit, kills: b.kills }
}

// ---------------------------------------------------------------------------
// per-edge syntactic facts

/// Variables whose places an edge mentions (read, written, borrowed, passed).
pub fn mentioned(e: &Edge<'_>) -> BTreeSet<VarId> {
    let mut out = BTreeSet::new();
    match e.kind {
        EdgeKind::Stmt(s) => {
            for x in s.exprs() {
                out.extend(x.places().into_iter().map(|p| p.base));
            }
            match &s.kind {
                TStmtKind::Let { var, .. } => {
                    out.insert(*var);
                }
                TStmtKind::Assign { target, .. } | TStmtKind::Drop(target) => {
                    out.insert(target.base);
                }
                TStmtKind::Return(Some(_)) => {}
                _ => {}
            }
        }
        EdgeKind::Branch { cond, .. } => out.extend(cond.places().into_iter().map(|p| p.base)),
        EdgeKind::Arm { scrut, binding, .. } => {
            out.insert(scrut.base);
            out.extend(binding);
        }
        EdgeKind::Interference { .. } | EdgeKind::Join => {}
    }
    out
}

/// Variables an edge defines as a whole.
pub fn defs(f: &FnInst, e: &Edge<'_>) -> BTreeSet<VarId> {
    let mut out = BTreeSet::new();
    match e.kind {
        EdgeKind::Stmt(s) => match &s.kind {
            TStmtKind::Let { var, .. } => {
                out.insert(*var);
            }
            TStmtKind::Assign { target, .. } if target.is_var() => {
                out.insert(target.base);
            }
            TStmtKind::Return(Some(_)) => {
                out.insert(f.result);
            }
            _ => {}
        },
        EdgeKind::Arm { binding: Some(b), .. } => {
            out.insert(b);
        }
        _ => {}
    }
    out
}

fn moved_place(p: &Place, locals: &[Local]) -> Option<VarId> {
    let through_ref = p.projs.iter().any(|x| *x == Proj::Deref);
    (!through_ref && !p.ty(locals).is_copy()).then_some(p.base)
}

/// Reads of non-copy values in value position, outside pure calls.
fn expr_moves(e: &TExpr, locals: &[Local], out: &mut BTreeSet<VarId>) {
    match &e.kind {
        TExprKind::Read(p) => out.extend(moved_place(p, locals)),
        TExprKind::Call(..) | TExprKind::AddrOf(..) => {}
        _ => e.children().into_iter().for_each(|c| expr_moves(c, locals, out)),
    }
}

/// Variables whose ownership leaves them along an edge.
pub fn moves(f: &FnInst, e: &Edge<'_>) -> BTreeSet<VarId> {
    let mut out = BTreeSet::new();
    match e.kind {
        EdgeKind::Stmt(s) => {
            match &s.kind {
                TStmtKind::Let { rhs: Rhs::Call(c), .. }
                | TStmtKind::Assign { rhs: Rhs::Call(c), .. }
                | TStmtKind::Return(Some(Rhs::Call(c)))
                | TStmtKind::Call(c) => c.args.iter().for_each(|a| expr_moves(a, &f.locals, &mut out)),
                TStmtKind::Let { rhs: Rhs::Expr(x), .. }
                | TStmtKind::Assign { rhs: Rhs::Expr(x), .. }
                | TStmtKind::Return(Some(Rhs::Expr(x))) => expr_moves(x, &f.locals, &mut out),
                TStmtKind::Drop(p) => {
                    out.insert(p.base);
                }
                _ => {}
            }
        }
        EdgeKind::Arm { scrut, .. } => out.extend(moved_place(scrut, &f.locals)),
        _ => {}
    }
    out
}

/// Variables through which an edge writes or hands out mutable access.
fn mutated(f: &FnInst, e: &Edge<'_>) -> BTreeSet<VarId> {
    let mut out = defs(f, e);
    out.extend(moves(f, e));
    if let EdgeKind::Stmt(s) = e.kind {
        if let TStmtKind::Assign { target, .. } = &s.kind {
            out.insert(target.base);
        }
        for x in s.exprs() {
            x.walk(&mut |y| match &y.kind {
                TExprKind::AddrOf(p, true) => {
                    out.insert(p.base);
                }
                TExprKind::Read(p) if matches!(p.ty(&f.locals), Ty::MutRef(_)) => {
                    out.insert(p.base);
                }
                _ => {}
            });
        }
    }
    out
}

fn uses(f: &FnInst, e: &Edge<'_>) -> BTreeSet<VarId> {
    let mut out = mentioned(e);
    if let EdgeKind::Stmt(s) = e.kind {
        // a whole-variable definition is not a use
        if let TStmtKind::Let { var, .. } = &s.kind {
            let read_again = s.exprs().iter().any(|x| x.places().iter().any(|p| p.base == *var));
            if !read_again {
                out.remove(var);
            }
        }
        if let TStmtKind::Assign { target, .. } = &s.kind {
            let read_again = s.exprs().iter().any(|x| x.places().iter().any(|p| p.base == target.base));
            if target.is_var() && !read_again {
                out.remove(&target.base);
            }
        }
    }
    if let EdgeKind::Arm { binding: Some(b), .. } = e.kind {
        out.remove(&b);
    }
    let _ = f;
    out
}

// ---------------------------------------------------------------------------
// liveness and borrows

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Borrow {
    pub borrower: VarId,
    pub owner: VarId,
    pub mutable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootPlace {
    pub root_id: usize,
    pub var: VarId,
    pub kind: CapKind,
    pub ty: Ty,
}

#[derive(Debug, Clone)]
pub struct FlowInfo {
    /// Definitely initialized and not moved, dropped or out of scope.
    pub init: Vec<BTreeSet<VarId>>,
    /// Live variables: initialized, and either non-copy or used later.
    pub live: Vec<BTreeSet<VarId>>,
    pub borrows: Vec<Borrow>,
    pub roots: Vec<Vec<RootPlace>>,
}

impl FlowInfo {
    pub fn root(&self, p: PointId, var: VarId) -> Option<&RootPlace> {
        self.roots[p].iter().find(|r| r.var == var)
    }
}

fn borrow_sources(f: &FnInst, prog: &TypedProgram, args: &[&TExpr], known: &[Borrow]) -> Vec<(VarId, bool)> {
    let mut out = Vec::new();
    for a in args {
        a.walk(&mut |e| match &e.kind {
            TExprKind::AddrOf(p, m) => out.push((p.base, *m)),
            TExprKind::Read(p) if prog.carries_borrow(p.ty(&f.locals)) => {
                let m = matches!(p.ty(&f.locals), Ty::MutRef(_));
                if p.ty(&f.locals).is_ref() {
                    out.push((p.base, m));
                }
                out.extend(known.iter().filter(|b| b.borrower == p.base).map(|b| (b.owner, b.mutable)));
            }
            _ => {}
        });
    }
    out
}

fn new_borrows(f: &FnInst, prog: &TypedProgram, e: &Edge<'_>, known: &[Borrow]) -> Vec<Borrow> {
    let (var, sources) = match e.kind {
        EdgeKind::Stmt(s) => {
            let (var, rhs) = match &s.kind {
                TStmtKind::Let { var, rhs } => (*var, rhs),
                TStmtKind::Assign { target, rhs } if target.is_var() => (target.base, rhs),
                _ => return vec![],
            };
            if !prog.carries_borrow(&f.locals[var].ty) {
                return vec![];
            }
            let srcs = match rhs {
                Rhs::Expr(x) => borrow_sources(f, prog, &[x], known),
                Rhs::Call(c) => {
                    let callee = &prog.fns[c.callee];
                    let picked: Vec<&TExpr> = if callee.self_param.is_some() && !c.args.is_empty() {
                        vec![&c.args[0]]
                    } else {
                        let refs: Vec<&TExpr> = c.args.iter().filter(|a| prog.carries_borrow(&a.ty)).collect();
                        if refs.len() == 1 {
                            refs
                        } else {
                            c.args.iter().collect()
                        }
                    };
                    borrow_sources(f, prog, &picked, known)
                }
            };
            (var, srcs)
        }
        EdgeKind::Arm { scrut, binding: Some(b), .. } if prog.carries_borrow(&f.locals[b].ty) => {
            let srcs = known.iter().filter(|x| x.borrower == scrut.base).map(|x| (x.owner, x.mutable)).collect();
            (b, srcs)
        }
        _ => return vec![],
    };
    let mut out: Vec<Borrow> = Vec::new();
    for (owner, mutable) in sources {
        if owner == var {
            continue;
        }
        match out.iter_mut().find(|b| b.owner == owner) {
            Some(b) => b.mutable |= mutable,
            None => out.push(Borrow { borrower: var, owner, mutable }),
        }
    }
    out
}

fn explicit_kind(ty: &Ty) -> CapKind {
    match ty {
        Ty::SharedRef(_) => CapKind::ReadRef,
        _ => CapKind::WriteRef,
    }
}

pub fn analyze(prog: &TypedProgram, f: &FnInst, g: &ProgramGraph<'_>) -> FlowInfo {
    let n = g.points.len();
    let mut init: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); n];
    let mut borrows: Vec<Borrow> = Vec::new();
    init[0] = f.params.iter().copied().collect();
    for p in g.topo_order() {
        let mut ins = g.incoming(p).peekable();
        if ins.peek().is_none() {
            continue;
        }
        let mut acc: Option<BTreeSet<VarId>> = None;
        for e in g.incoming(p) {
            let mut s = init[e.from].clone();
            for m in moves(f, e) {
                s.remove(&m);
            }
            s.extend(defs(f, e));
            for b in new_borrows(f, prog, e, &borrows) {
                if !borrows.contains(&b) {
                    borrows.push(b);
                }
            }
            acc = Some(match acc {
                None => s,
                Some(a) => a.intersection(&s).copied().collect(),
            });
        }
        let mut s = acc.unwrap_or_default();
        for k in &g.kills[p] {
            s.remove(k);
        }
        init[p] = s;
    }

    let mut later: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); n];
    if let Some(x) = g.exit {
        for e in f.ensures.iter().chain(&f.requires) {
            later[x].extend(e.places().into_iter().map(|p| p.base));
        }
    }
    for p in g.topo_order().into_iter().rev() {
        let mut s = later[p].clone();
        for e in g.outgoing(p) {
            let d = defs(f, e);
            s.extend(uses(f, e));
            s.extend(later[e.to].iter().filter(|v| !d.contains(v)));
        }
        later[p] = s;
    }

    let mut live = Vec::with_capacity(n);
    let mut roots = Vec::with_capacity(n);
    for p in 0..n {
        let l: BTreeSet<VarId> = init[p]
            .iter()
            .copied()
            .filter(|&v| !f.locals[v].ty.is_unit() && (!f.locals[v].ty.is_copy() || later[p].contains(&v)))
            .collect();
        let mut rs = Vec::new();
        for &v in &l {
            let mut kind = explicit_kind(&f.locals[v].ty);
            let mut excluded = false;
            for b in borrows.iter().filter(|b| b.owner == v && l.contains(&b.borrower)) {
                if b.mutable {
                    excluded = true;
                } else {
                    kind = CapKind::ReadRef;
                }
            }
            if !excluded {
                rs.push(RootPlace { root_id: v, var: v, kind, ty: f.locals[v].ty.clone() });
            }
        }
        live.push(l);
        roots.push(rs);
    }
    FlowInfo { init, live, borrows, roots }
}

// ---------------------------------------------------------------------------
// frames

/// Roots at the edge's source point that the edge does not mention.
pub fn unused_roots(info: &FlowInfo, e: &Edge<'_>) -> Vec<RootPlace> {
    let m = mentioned(e);
    info.roots[e.from].iter().filter(|r| !m.contains(&r.var)).cloned().collect()
}

fn strength(k: CapKind) -> u8 {
    match k {
        CapKind::WriteRef => 2,
        _ => 1,
    }
}

/// Whether the root of `var` is available before and after the edge, at
/// least as strong afterwards.
pub fn held_across(info: &FlowInfo, var: VarId, e: &Edge<'_>) -> bool {
    match (info.root(e.from, var), info.root(e.to, var)) {
        (Some(a), Some(b)) => strength(b.kind) >= strength(a.kind),
        _ => false,
    }
}

/// Whether an edge runs library code that may write memory.
fn calls_impure(e: &Edge<'_>) -> bool {
    matches!(
        e.kind,
        EdgeKind::Stmt(TStmt {
            kind: TStmtKind::Call(_)
                | TStmtKind::Let { rhs: Rhs::Call(_), .. }
                | TStmtKind::Assign { rhs: Rhs::Call(_), .. }
                | TStmtKind::Return(Some(Rhs::Call(_))),
            ..
        })
    )
}

/// Explicit capabilities assumed at an edge's transition version: the full
/// kind of every unused root and, on edges without an impure call, of every
/// root that is not written, moved or mutably borrowed. Elsewhere such a
/// root gets `ReadRef` when it is held across.
pub fn transition_roots(f: &FnInst, info: &FlowInfo, e: &Edge<'_>) -> Vec<(RootPlace, CapKind)> {
    if matches!(e.kind, EdgeKind::Join) {
        return vec![];
    }
    let m = mentioned(e);
    let w = mutated(f, e);
    let impure = calls_impure(e);
    let mut out = Vec::new();
    for r in &info.roots[e.from] {
        if !m.contains(&r.var) || (!impure && !w.contains(&r.var)) {
            out.push((r.clone(), r.kind));
        } else if !w.contains(&r.var) && held_across(info, r.var, e) {
            out.push((r.clone(), CapKind::ReadRef));
        }
    }
    out
}

/// Tab-separated root table: fn, point, version, root id, place, kind, type.
pub fn dump_roots(f: &FnInst, g: &ProgramGraph<'_>, info: &FlowInfo) -> String {
    let mut s = String::new();
    for p in &g.points {
        for r in &info.roots[p.id] {
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", f.name, p.id, p.version, r.root_id, f.locals[r.var].name, r.kind, r.ty));
        }
    }
    s
}

/// Per-statement frame sets keyed by edge id, for inspection.
pub fn frame_sets(info: &FlowInfo, g: &ProgramGraph<'_>) -> BTreeMap<EdgeId, Vec<VarId>> {
    g.edges
        .iter()
        .filter(|e| !matches!(e.kind, EdgeKind::Join))
        .map(|e| (e.id, unused_roots(info, e).into_iter().map(|r| r.var).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::lang::{typecheck, SourceFile};
    use proptest::prelude::*;

    fn program(src: &str) -> TypedProgram {
        typecheck(&corpus::with_prelude(SourceFile::user("t.cap", src))).unwrap()
    }

    fn client(name: &str) -> TypedProgram {
        program(corpus::client_source(&format!("clients/{name}.cap")).unwrap())
    }

    fn var(f: &FnInst, name: &str) -> VarId {
        f.locals.iter().position(|l| l.name == name).unwrap()
    }

    fn stmt_edge<'a>(g: &'a ProgramGraph<'a>, pred: impl Fn(&TStmt) -> bool) -> &'a Edge<'a> {
        g.edges.iter().find(|e| matches!(e.kind, EdgeKind::Stmt(s) if pred(s))).unwrap()
    }

    fn calls(p: &TypedProgram, s: &TStmt, name: &str) -> bool {
        match &s.kind {
            TStmtKind::Call(c) | TStmtKind::Let { rhs: Rhs::Call(c), .. } => p.fns[c.callee].name.rsplit("::").next() == Some(name),
            _ => false,
        }
    }

    #[test]
    fn cell_client_is_a_chain_of_five_points() {
        let p = client("cell_client");
        let f = &p.fns[p.find_fn("cell_client").unwrap()];
        let g = build_cfg(&p, f);
        assert_eq!(g.points.len(), 5);
        assert_eq!(g.edges.len(), 4);
        assert!(g.edges.iter().all(|e| e.to == e.from + 1));
        assert_eq!(g.exit, Some(4));
    }

    #[test]
    fn roots_at_the_set_call() {
        let p = client("cell_client");
        let f = &p.fns[p.find_fn("cell_client").unwrap()];
        let g = build_cfg(&p, f);
        let info = analyze(&p, f, &g);
        let e = stmt_edge(&g, |s| calls(&p, s, "set"));
        let roots: Vec<(String, CapKind)> = info.roots[e.from].iter().map(|r| (f.locals[r.var].name.clone(), r.kind)).collect();
        assert_eq!(roots, vec![("c".into(), CapKind::ReadRef), ("before".into(), CapKind::WriteRef)]);
        assert!(unused_roots(&info, e).is_empty());
        for v in ["c", "before"] {
            assert!(held_across(&info, var(f, v), e));
        }
    }

    #[test]
    fn refcell_roots_and_frames_around_the_unknown_call() {
        let p = client("refcell_client");
        let f = &p.fns[p.find_fn("refcell_client").unwrap()];
        let g = build_cfg(&p, f);
        let info = analyze(&p, f, &g);
        let e = stmt_edge(&g, |s| calls(&p, s, "use_refcell"));
        let unused: Vec<VarId> = unused_roots(&info, e).iter().map(|r| r.var).collect();
        assert!(unused.contains(&var(f, "a")) && unused.contains(&var(f, "y")));
        assert!(!unused.contains(&var(f, "x")));
        assert!(held_across(&info, var(f, "x"), e));
        // a and y stay alive until the last assertion
        let last = g.edges.iter().filter(|e| matches!(e.kind, EdgeKind::Stmt(TStmt { kind: TStmtKind::Assert(_), .. }))).last().unwrap();
        let at: BTreeMap<VarId, CapKind> = info.roots[last.from].iter().map(|r| (r.var, r.kind)).collect();
        assert_eq!(at.get(&var(f, "x")), Some(&CapKind::ReadRef));
        assert_eq!(at.get(&var(f, "a")), Some(&CapKind::WriteRef));
        assert_eq!(at.get(&var(f, "y")), Some(&CapKind::WriteRef));
    }

    #[test]
    fn if_else_is_a_diamond() {
        let p = program("fn f(b: bool) { let mut x = 0; if b { x = 1; } else { x = 2; } assert!(x > 0); }");
        let f = &p.fns[p.find_fn("f").unwrap()];
        let g = build_cfg(&p, f);
        let joins: Vec<&Edge> = g.edges.iter().filter(|e| matches!(e.kind, EdgeKind::Join)).collect();
        assert_eq!(joins.len(), 2);
        assert_eq!(joins[0].to, joins[1].to);
        assert_eq!(g.edges.iter().filter(|e| matches!(e.kind, EdgeKind::Branch { .. })).count(), 2);
    }

    #[test]
    fn empty_body_is_a_single_point() {
        let p = program("fn f() { }");
        let f = &p.fns[p.find_fn("f").unwrap()];
        let g = build_cfg(&p, f);
        assert_eq!(g.points.len(), 1);
        assert!(g.edges.is_empty());
        assert!(analyze(&p, f, &g).roots[0].is_empty());
    }

    #[test]
    fn unused_copy_variable_dies_at_its_definition() {
        let p = program("fn f() { let x = 1; assert!(true); }");
        let f = &p.fns[p.find_fn("f").unwrap()];
        let g = build_cfg(&p, f);
        let info = analyze(&p, f, &g);
        assert!(info.init[1].contains(&var(f, "x")));
        assert!(!info.live[1].contains(&var(f, "x")));
    }

    #[test]
    fn moved_variable_is_not_held() {
        let p = client("arc_client");
        let f = &p.fns[p.find_fn("client").unwrap()];
        let g = build_cfg(&p, f);
        let info = analyze(&p, f, &g);
        let e = stmt_edge(&g, |s| calls(&p, s, "into_inner"));
        assert!(info.root(e.from, var(f, "x")).is_some());
        assert!(!held_across(&info, var(f, "x"), e));
        assert!(!transition_roots(f, &info, e).iter().any(|(r, _)| r.var == var(f, "x")));
    }

    #[test]
    fn shared_borrow_demotes_and_mutable_borrow_excludes() {
        let p = client("atomic_client");
        let f = &p.fns[p.find_fn("atomic_local_ref").unwrap()];
        let g = build_cfg(&p, f);
        let info = analyze(&p, f, &g);
        let e = stmt_edge(&g, |s| matches!(&s.kind, TStmtKind::Let { var: v, .. } if f.locals[*v].name == "x"));
        assert_eq!(info.root(e.from, var(f, "a")).map(|r| r.kind), Some(CapKind::ReadRef));

        let p = client("mutex_client");
        let f = &p.fns[p.find_fn("mutex_get_mut").unwrap()];
        let g = build_cfg(&p, f);
        let info = analyze(&p, f, &g);
        let e = stmt_edge(&g, |s| matches!(s.kind, TStmtKind::Assign { .. }));
        assert!(info.root(e.from, var(f, "m")).is_none());
        assert_eq!(info.root(e.from, var(f, "r")).map(|r| r.kind), Some(CapKind::WriteRef));
    }

    #[test]
    fn interference_edges_only_for_thread_shared_types() {
        let p = client("atomic_client");
        let f = &p.fns[p.find_fn("atomic_owned").unwrap()];
        let g = build_cfg(&p, f);
        let n = g.edges.iter().filter(|e| matches!(e.kind, EdgeKind::Interference { .. })).count();
        assert_eq!(n, f.body.as_ref().unwrap().stmts.len());
        let p = client("cell_client");
        let f = &p.fns[p.find_fn("cell_client").unwrap()];
        assert!(!build_cfg(&p, f).edges.iter().any(|e| matches!(e.kind, EdgeKind::Interference { .. })));
    }

    #[test]
    fn versions_are_distinct() {
        for (name, _) in corpus::CLIENTS {
            let p = client(name.trim_start_matches("clients/").trim_end_matches(".cap"));
            for id in p.targets() {
                let g = build_cfg(&p, &p.fns[id]);
                let mut seen = BTreeSet::new();
                for v in g.points.iter().map(|x| x.version.clone()).chain(g.edges.iter().filter_map(|e| e.transition.clone())) {
                    assert!(seen.insert(v));
                }
            }
        }
    }

    /// Independent occurrence oracle: every variable id appearing anywhere
    /// in a statement's own expressions, target or scrutinee.
    fn occurrences(s: &TStmt) -> BTreeSet<VarId> {
        fn ex(e: &TExpr, out: &mut BTreeSet<VarId>) {
            if let TExprKind::Read(p) | TExprKind::AddrOf(p, _) = &e.kind {
                out.insert(p.base);
            }
            for c in e.children() {
                ex(c, out);
            }
        }
        let mut out = BTreeSet::new();
        match &s.kind {
            TStmtKind::Let { var, rhs } => {
                out.insert(*var);
                rhs.exprs().into_iter().for_each(|e| ex(e, &mut out));
            }
            TStmtKind::Assign { target, rhs } => {
                out.insert(target.base);
                rhs.exprs().into_iter().for_each(|e| ex(e, &mut out));
            }
            TStmtKind::Call(c) => c.args.iter().for_each(|e| ex(e, &mut out)),
            TStmtKind::Assert(e) | TStmtKind::If { cond: e, .. } => ex(e, &mut out),
            TStmtKind::Match { scrut, .. } | TStmtKind::Drop(scrut) => {
                out.insert(scrut.base);
            }
            TStmtKind::Return(Some(r)) => r.exprs().into_iter().for_each(|e| ex(e, &mut out)),
            TStmtKind::Return(None) | TStmtKind::Panic => {}
        }
        out
    }

    proptest! {
        #[test]
        fn frame_sets_never_contain_mentioned_roots(idx in 0usize..corpus::CLIENTS.len()) {
            let name = corpus::CLIENTS[idx].0;
            let p = client(name.trim_start_matches("clients/").trim_end_matches(".cap"));
            for id in p.targets() {
                let f = &p.fns[id];
                let g = build_cfg(&p, f);
                let info = analyze(&p, f, &g);
                for e in &g.edges {
                    if let EdgeKind::Stmt(s) = e.kind {
                        let occ = occurrences(s);
                        for r in unused_roots(&info, e) {
                            prop_assert!(!occ.contains(&r.var));
                        }
                    }
                }
                // distinct roots at one point have distinct ids
                for rs in &info.roots {
                    let ids: BTreeSet<usize> = rs.iter().map(|r| r.root_id).collect();
                    prop_assert_eq!(ids.len(), rs.len());
                }
            }
        }
    }
}
