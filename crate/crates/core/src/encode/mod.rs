//! Verification-condition encoding: one SMT-LIB 2 script per obligation.
//!
//! Memory is a family of functions `mem$T$ : Int × Version → MemSnap_T`.
//! Every program point and every edge of the control-flow graph gets its
//! own version. Capabilities are predicates over (root, address, version);
//! the capabilities of roots are assumed at points and, for the roots an
//! edge holds across, at its transition version, from which the framing
//! axioms of each edge derive unchanged memory.

mod axioms;
mod expr;
pub mod smt;
pub mod sorts;

pub use axioms::cap_closure;
pub use sorts::Sorts;

use crate::capability::CapKind;
use crate::flow::{self, Edge, EdgeKind, FlowInfo, PointId, ProgramGraph};
use crate::lang::ir::*;
use crate::lang::types::{Purity, Ty};
use crate::lang::{Diagnostic, Span};
use expr::{Bind, Cx, Env, Pv};
use smt::{and, app, eq, forall, implies, not, or, sym};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

/// The framing rules applied per edge kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameRule {
    /// Immutable locations are unchanged.
    Immutable,
    /// Locations uniquely held by a root the edge does not use.
    Unique,
    /// Thread-local locations nobody can write through a reference, across
    /// plain assignments.
    LocalAssign,
    /// The same, across evaluations that call pure functions.
    LocalPure,
    /// Thread-local locations across interference.
    InterferenceLocal,
}

impl FrameRule {
    pub const ALL: [FrameRule; 5] =
        [FrameRule::Immutable, FrameRule::Unique, FrameRule::LocalAssign, FrameRule::LocalPure, FrameRule::InterferenceLocal];

    pub fn name(self) -> &'static str {
        match self {
            FrameRule::Immutable => "immutable",
            FrameRule::Unique => "unique",
            FrameRule::LocalAssign => "local-assign",
            FrameRule::LocalPure => "local-pure",
            FrameRule::InterferenceLocal => "interference-local",
        }
    }
}

impl fmt::Display for FrameRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default)]
pub struct EncoderOptions {
    /// Framing rules left out of the encoding (for mutation testing).
    pub disabled: BTreeSet<FrameRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObligationKind {
    Assert,
    Precondition,
    PanicFreedom,
    Postcondition,
}

impl fmt::Display for ObligationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObligationKind::Assert => "assert",
            ObligationKind::Precondition => "precondition",
            ObligationKind::PanicFreedom => "panic-freedom",
            ObligationKind::Postcondition => "postcondition",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Obligation {
    /// Position in source order within the function.
    pub idx: usize,
    pub fn_name: String,
    pub span: Span,
    pub kind: ObligationKind,
    pub point: PointId,
    pub script: String,
}

struct Pending {
    span: Span,
    kind: ObligationKind,
    point: PointId,
    goal: String,
}

/// Encoder state shared by the expression evaluator and axiom builders.
pub(crate) struct Enc<'p> {
    pub prog: &'p TypedProgram,
    pub s: Sorts<'p>,
    disabled: BTreeSet<FrameRule>,
    pub mem_types: BTreeSet<Ty>,
    pub off_types: BTreeSet<Ty>,
    pub ptr_types: BTreeSet<Ty>,
    pub mem_defs: BTreeMap<Ty, String>,
    pub cap_types: BTreeSet<Ty>,
    pub pure_fns: BTreeSet<FnId>,
    pub side: Vec<String>,
    pub side_seen: HashSet<String>,
    pub expanded: HashSet<String>,
    consts: Vec<(String, String)>,
}

/// A function's encoding before obligations are split into scripts.
pub struct Encoding<'a> {
    pub graph: ProgramGraph<'a>,
    pub info: FlowInfo,
    pub prelude: String,
    point_facts: Vec<Vec<String>>,
    edge_facts: Vec<Vec<String>>,
    pending: Vec<Pending>,
    pub fn_name: String,
}

fn reach(v: &str) -> String {
    format!("reach${v}")
}

fn addr_const(f: &FnInst, v: VarId) -> String {
    sym(&format!("addr${}${v}", f.locals[v].name))
}

fn has_call(e: &TExpr) -> bool {
    !e.calls().is_empty()
}

impl<'p> Enc<'p> {
    fn new(prog: &'p TypedProgram, opts: &EncoderOptions) -> Self {
        Enc {
            prog,
            s: Sorts::new(prog),
            disabled: opts.disabled.clone(),
            mem_types: BTreeSet::new(),
            off_types: BTreeSet::new(),
            ptr_types: BTreeSet::new(),
            mem_defs: BTreeMap::new(),
            cap_types: BTreeSet::new(),
            pure_fns: BTreeSet::new(),
            side: vec![],
            side_seen: HashSet::new(),
            expanded: HashSet::new(),
            consts: vec![],
        }
    }

    fn frames(&mut self, e: &Edge<'_>, rules: &[FrameRule], wu: &str, wv: &str) -> Vec<String> {
        let Some(t) = &e.transition else { return vec![] };
        let rules: Vec<FrameRule> = rules.iter().copied().filter(|r| !self.disabled.contains(r)).collect();
        if rules.is_empty() {
            return vec![];
        }
        let mut out = Vec::new();
        let types: Vec<Ty> = self.cap_types.iter().cloned().collect();
        for ty in types {
            let c = |k: CapKind| app(&self.s.cap_fn(k, &ty), &["r".into(), "a".into(), t.clone()]);
            let mut disj = Vec::new();
            for r in &rules {
                let d = match r {
                    FrameRule::Immutable => c(CapKind::Immutable),
                    FrameRule::Unique => c(CapKind::Unique),
                    FrameRule::LocalAssign | FrameRule::LocalPure => and(vec![c(CapKind::Local), c(CapKind::NoWriteRef)]),
                    FrameRule::InterferenceLocal => c(CapKind::Local),
                };
                if !disj.contains(&d) {
                    disj.push(d);
                }
            }
            let m_u = self.mem_at(&ty, "a", wu);
            let m_t = self.mem_at(&ty, "a", t);
            let m_v = self.mem_at(&ty, "a", wv);
            let same = and(vec![eq(&m_u, &m_t), eq(&m_t, &m_v)]);
            out.push(forall(&[("r", "Int"), ("a", "Int")], &implies(&or(disj), &same)));
        }
        out
    }

    fn fresh_const(&mut self, prefix: &str, sort: String) -> String {
        let name = format!("{prefix}${}", self.consts.len());
        self.consts.push((name.clone(), sort));
        name
    }

    /// Writes `val` to `dest` at `wv`; a write through a reference keeps
    /// the reference itself.
    fn write(&mut self, f: &FnInst, env: &Env, dest: &Place, val: &str, wu: &str, wv: &str, span: Span) -> Result<Vec<String>, Diagnostic> {
        let loc = self.loc(&f.locals, env, &Cx::at(wu), dest, span)?;
        let ty = dest.ty(&f.locals).clone();
        let mut out = vec![eq(&self.mem_at(&ty, &loc, wv), val)];
        if dest.projs.contains(&Proj::Deref) {
            let base_ty = f.locals[dest.base].ty.clone();
            let a = addr_const(f, dest.base);
            out.push(eq(&self.mem_at(&base_ty, &a, wv), &self.mem_at(&base_ty, &a, wu)));
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn call(
        &mut self,
        f: &FnInst,
        env: &mut Env,
        c: &CallSite,
        dest: Option<&Place>,
        e: &Edge<'_>,
        wu: &str,
        wv: &str,
        pending: &mut Vec<Pending>,
    ) -> Result<Vec<String>, Diagnostic> {
        let prog = self.prog;
        let callee = &prog.fns[c.callee];
        let pre = Cx::at(wu);
        let mut cenv = Env::new(callee.locals.len());
        for (i, &p) in callee.params.iter().enumerate() {
            let arg = &c.args[i];
            let pty = &callee.locals[p].ty;
            let located = match &arg.kind {
                TExprKind::AddrOf(pl, _) | TExprKind::Read(pl) => match self.place(&f.locals, env, &pre, pl)? {
                    Pv::Loc(a) => Some(a),
                    _ => None,
                },
                _ => None,
            };
            let b = match (&arg.kind, pty.pointee()) {
                (TExprKind::AddrOf(..), Some(_)) if pty.is_ref() && located.is_some() => Bind::Ref(located.unwrap()),
                (_, Some(target)) if pty.is_ref() => {
                    let t = self.expr(&f.locals, env, &pre, arg)?;
                    Bind::Ref(app(&self.s.ref_addr(target), &[t]))
                }
                (TExprKind::Read(_), _) => {
                    let t = self.expr(&f.locals, env, &pre, arg)?;
                    Bind::Val { val: t, addr: located }
                }
                _ => Bind::Val { val: self.expr(&f.locals, env, &pre, arg)?, addr: None },
            };
            cenv.set(p, b);
        }
        let mut out = Vec::new();
        for r in &callee.requires {
            let g = self.expr(&callee.locals, &mut cenv, &pre, r)?;
            pending.push(Pending { span: c.span, kind: ObligationKind::Precondition, point: e.from, goal: g.clone() });
            out.push(g);
        }
        let result = match dest {
            Some(d) => {
                let loc = self.loc(&f.locals, env, &pre, d, c.span)?;
                let ty = d.ty(&f.locals).clone();
                let val = self.mem_at(&ty, &loc, wv);
                if d.projs.contains(&Proj::Deref) {
                    let base_ty = f.locals[d.base].ty.clone();
                    let a = addr_const(f, d.base);
                    out.push(eq(&self.mem_at(&base_ty, &a, wv), &self.mem_at(&base_ty, &a, wu)));
                }
                Bind::Val { val, addr: Some(loc) }
            }
            None if callee.ret.is_unit() => Bind::Val { val: "unit".into(), addr: None },
            None => {
                self.mem_types.insert(callee.ret.clone());
                let sort = self.s.mem_sort(&callee.ret);
                let val = self.fresh_const("res", sort);
                let addr = self.fresh_const("res$addr", "Int".into());
                Bind::Val { val, addr: Some(addr) }
            }
        };
        cenv.set(callee.result, result);
        let post = Cx::with_old(wv, wu);
        for en in &callee.ensures {
            out.push(self.expr(&callee.locals, &mut cenv, &post, en)?);
        }
        Ok(out)
    }

    /// Guarded facts of one edge; obligations it raises go to `pending`.
    fn edge(&mut self, f: &FnInst, g: &ProgramGraph<'_>, env: &mut Env, e: &Edge<'_>, pending: &mut Vec<Pending>) -> Result<(String, Vec<String>), Diagnostic> {
        use FrameRule::*;
        let wu = g.points[e.from].version.clone();
        let wv = g.points[e.to].version.clone();
        let ru = reach(&wu);
        let assign = [Immutable, Unique, LocalAssign];
        let pure = [Immutable, Unique, LocalPure];
        let call = [Immutable, Unique];
        let mut reach_def = ru.clone();
        let mut facts = Vec::new();
        let mut rules: &[FrameRule] = &[];
        match e.kind {
            EdgeKind::Join => facts.push(eq(&wv, &wu)),
            EdgeKind::Interference { .. } => rules = &[Immutable, Unique, InterferenceLocal],
            EdgeKind::Branch { cond, taken, .. } => {
                let c = self.expr(&f.locals, env, &Cx::with_old(&wu, "w0"), cond)?;
                reach_def = and(vec![ru, if taken { c } else { not(&c) }]);
                rules = &pure;
            }
            EdgeKind::Arm { scrut, variant, binding, span } => {
                let cx = Cx::at(&wu);
                let pv = self.place(&f.locals, env, &cx, scrut)?;
                let sty = scrut.ty(&f.locals).clone();
                let ts = self.read(pv, &sty, &cx);
                reach_def = and(vec![ru, self.s.is_variant(&sty, variant, &ts)]);
                if let Some(b) = binding {
                    let payload = app(&self.s.variant_sel(&sty, variant), &[ts]);
                    facts.extend(self.write(f, env, &Place::var(b), &payload, &wu, &wv, span)?);
                }
                rules = &assign;
            }
            EdgeKind::Stmt(s) => {
                let dest_rhs = match &s.kind {
                    TStmtKind::Let { var, rhs } => Some((Place::var(*var), rhs)),
                    TStmtKind::Assign { target, rhs } => Some((target.clone(), rhs)),
                    TStmtKind::Return(Some(rhs)) => Some((Place::var(f.result), rhs)),
                    _ => None,
                };
                match (&s.kind, dest_rhs) {
                    (_, Some((dest, Rhs::Expr(x)))) => {
                        let val = self.expr(&f.locals, env, &Cx::with_old(&wu, "w0"), x)?;
                        facts.extend(self.write(f, env, &dest, &val, &wu, &wv, s.span)?);
                        rules = if has_call(x) { &pure } else { &assign };
                    }
                    (_, Some((dest, Rhs::Call(c)))) => {
                        facts.extend(self.call(f, env, c, Some(&dest), e, &wu, &wv, pending)?);
                        rules = &call;
                    }
                    (TStmtKind::Call(c), None) => {
                        facts.extend(self.call(f, env, c, None, e, &wu, &wv, pending)?);
                        rules = &call;
                    }
                    (TStmtKind::Assert(x), None) => {
                        let goal = self.expr(&f.locals, env, &Cx::with_old(&wu, "w0"), x)?;
                        pending.push(Pending { span: s.span, kind: ObligationKind::Assert, point: e.from, goal: goal.clone() });
                        facts.push(goal);
                        rules = &pure;
                    }
                    (TStmtKind::Drop(_), None) | (TStmtKind::Return(None), None) => facts.push(eq(&wv, &wu)),
                    (TStmtKind::Panic, None) => {
                        pending.push(Pending { span: s.span, kind: ObligationKind::PanicFreedom, point: e.from, goal: "false".into() });
                        reach_def = "false".into();
                    }
                    _ => return Err(Diagnostic::new(s.span, "unexpected statement on a control-flow edge")),
                }
            }
        }
        let frames = self.frames(e, rules, &wu, &wv);
        facts.extend(frames);
        Ok((reach_def, facts))
    }
}

/// Encodes one function. Fails with a diagnostic when a specification
/// mentions something the encoder cannot represent.
pub fn encode<'a>(prog: &'a TypedProgram, fid: FnId, opts: &EncoderOptions) -> Result<Encoding<'a>, Diagnostic> {
    let f = &prog.fns[fid];
    let g = flow::build_cfg(prog, f);
    let info = flow::analyze(prog, f, &g);
    let mut enc = Enc::new(prog, opts);
    enc.cap_types = cap_closure(prog, f.locals.iter().map(|l| l.ty.clone()));
    let mut env = Env::new(f.locals.len());
    for v in 0..f.locals.len() {
        env.set(v, Bind::Mem(addr_const(f, v)));
    }
    let ver = |p: PointId| g.points[p].version.clone();

    let mut global = vec![reach("w0")];
    for r in &f.requires {
        global.push(enc.expr(&f.locals, &mut env, &Cx::at("w0"), r)?);
    }

    let mut pending = Vec::new();
    let mut point_facts: Vec<Vec<String>> = vec![Vec::new(); g.points.len()];
    let mut edge_facts: Vec<Vec<String>> = vec![Vec::new(); g.edges.len()];
    for e in &g.edges {
        let (wu, wv) = (ver(e.from), ver(e.to));
        let (reach_def, facts) = enc.edge(f, &g, &mut env, e, &mut pending)?;
        let out = &mut edge_facts[e.id];
        if matches!(e.kind, EdgeKind::Join) {
            out.extend(facts.iter().map(|x| implies(&reach(&wu), x)));
            continue;
        }
        out.push(eq(&reach(&wv), &reach_def));
        out.extend(facts.iter().map(|x| implies(&reach(&wv), x)));
        let t = e.transition.clone().expect("transition version");
        out.push(eq(&app("base", &[t.clone()]), &wu));
        for (root, kind) in flow::transition_roots(f, &info, e) {
            out.push(app(&enc.s.cap_fn(kind, &root.ty), &[root.root_id.to_string(), addr_const(f, root.var), t.clone()]));
        }
    }
    for p in &g.points {
        let facts = &mut point_facts[p.id];
        facts.push(eq(&app("base", &[p.version.clone()]), &p.version));
        let joins: Vec<String> = g.incoming(p.id).filter(|e| matches!(e.kind, EdgeKind::Join)).map(|e| reach(&ver(e.from))).collect();
        if !joins.is_empty() {
            facts.push(eq(&reach(&p.version), &or(joins)));
        }
        for r in &info.roots[p.id] {
            facts.push(app(&enc.s.cap_fn(r.kind, &r.ty), &[r.root_id.to_string(), addr_const(f, r.var), p.version.clone()]));
        }
    }
    if let Some(x) = g.exit {
        for en in &f.ensures {
            let goal = enc.expr(&f.locals, &mut env, &Cx::with_old(&ver(x), "w0"), en)?;
            pending.push(Pending { span: en.span, kind: ObligationKind::Postcondition, point: x, goal });
        }
    }

    // background axioms; these may register further types and functions
    let mut axioms = Vec::new();
    let caps: Vec<Ty> = enc.cap_types.iter().cloned().collect();
    for t in &caps {
        axioms.extend(enc.lattice_axioms(t));
        axioms.extend(enc.structural_axioms(t));
    }
    for t in &caps {
        axioms.extend(enc.annotation_axioms(t)?);
    }
    enc.mem_types.extend(caps.iter().cloned());
    let mut done: BTreeSet<Ty> = BTreeSet::new();
    loop {
        let todo: Vec<Ty> = enc.mem_types.difference(&done).cloned().collect();
        if todo.is_empty() {
            break;
        }
        for t in todo {
            if let Some(d) = enc.mem_definition(&t) {
                enc.mem_defs.insert(t.clone(), d);
            }
            done.insert(t);
        }
    }
    for t in enc.off_types.clone() {
        axioms.extend(enc.offset_axioms(&t));
    }

    let prelude = prelude(&enc, f, &g, &axioms, &global);
    Ok(Encoding { graph: g, info, prelude, point_facts, edge_facts, pending, fn_name: f.name.clone() })
}

fn decl_fun(name: &str, args: &[String], ret: &str) -> String {
    format!("(declare-fun {name} ({}) {ret})", args.join(" "))
}

/// Emits the memory definition of `t` after those of its components.
fn define_mem(enc: &Enc<'_>, t: &Ty, defined: &mut BTreeSet<Ty>, out: &mut Vec<String>) {
    let Some(body) = enc.mem_defs.get(t) else { return };
    if !defined.insert(t.clone()) {
        return;
    }
    let mut deps: Vec<Ty> = enc.prog.field_types(t);
    if let Some(x) = t.pointee() {
        deps.push(x.clone());
    }
    for d in &deps {
        define_mem(enc, d, defined, out);
    }
    out.push(format!("(define-fun {} ((a Int) (w Version)) {} {body})", enc.s.mem_fn(t), enc.s.mem_sort(t)));
}

fn prelude(enc: &Enc<'_>, f: &FnInst, g: &ProgramGraph<'_>, axioms: &[String], global: &[String]) -> String {
    let s = &enc.s;
    let mut all: BTreeSet<Ty> = enc.mem_types.union(&enc.cap_types).cloned().collect();
    all.extend(enc.off_types.iter().cloned());
    for &p in &enc.pure_fns {
        let pf = &enc.prog.fns[p];
        all.extend(pf.params.iter().map(|&v| pf.locals[v].ty.clone()));
        all.insert(pf.ret.clone());
    }
    s.close(&mut all);

    let mut out: Vec<String> = vec!["(set-logic ALL)".into(), "(declare-sort Version 0)".into()];
    out.extend(s.declarations(&all));
    out.push("(declare-fun base (Version) Version)".into());
    for p in &g.points {
        out.push(format!("(declare-const {} Version)", p.version));
    }
    for e in &g.edges {
        if let Some(t) = &e.transition {
            out.push(format!("(declare-const {t} Version)"));
        }
    }
    for p in &g.points {
        out.push(format!("(declare-const {} Bool)", reach(&p.version)));
    }
    let addrs: Vec<String> = (0..f.locals.len()).map(|v| addr_const(f, v)).collect();
    for a in &addrs {
        out.push(format!("(declare-const {a} Int)"));
    }
    for (n, sort) in &enc.consts {
        out.push(format!("(declare-const {n} {sort})"));
    }
    let iv = ["Int".to_string(), "Version".to_string()];
    for t in enc.mem_types.union(&enc.cap_types) {
        if !enc.mem_defs.contains_key(t) {
            out.push(decl_fun(&s.mem_fn(t), &iv, &s.mem_sort(t)));
        }
    }
    for t in &enc.ptr_types {
        out.push(decl_fun(&s.ptr_fn(t), &iv, "Int"));
    }
    let riv = ["Int".to_string(), "Int".to_string(), "Version".to_string()];
    for t in &enc.cap_types {
        for k in CapKind::ALL {
            out.push(decl_fun(&s.cap_fn(k, t), &riv, "Bool"));
        }
    }
    for t in &enc.off_types {
        for (i, ft) in enc.prog.field_types(t).iter().enumerate() {
            if !matches!(ft, Ty::UnsafeCell(_)) {
                out.push(decl_fun(&s.off_fn(t, i), &["Int".to_string()], "Int"));
            }
        }
    }
    let mut defined = BTreeSet::new();
    for t in enc.mem_defs.keys() {
        define_mem(enc, t, &mut defined, &mut out);
    }
    for &p in &enc.pure_fns {
        let pf = &enc.prog.fns[p];
        let level = pf.purity.expect("pure");
        let mut args: Vec<String> = pf
            .params
            .iter()
            .map(|&v| {
                let t = &pf.locals[v].ty;
                if level == Purity::PureValue {
                    s.val_sort(t)
                } else {
                    s.mem_sort(t)
                }
            })
            .collect();
        if level == Purity::PureUnstable {
            args.push("Version".into());
        }
        out.push(decl_fun(&sym(&pf.smt_name), &args, &s.mem_sort(&pf.ret)));
    }
    if addrs.len() > 1 {
        out.push(format!("(assert (distinct {}))", addrs.join(" ")));
    }
    out.extend(axioms.iter().map(|a| format!("(assert {a})")));
    out.extend(global.iter().map(|a| format!("(assert {a})")));
    out.extend(enc.side.iter().map(|a| format!("(assert {a})")));
    let mut text = out.join("\n");
    text.push('\n');
    text
}

impl Encoding<'_> {
    /// Script asserting everything known on paths to `point`, and the
    /// negation of `goal` there.
    pub fn script(&self, point: PointId, goal: &str) -> String {
        let anc = self.graph.ancestors(point);
        let mut s = self.prelude.clone();
        for p in &anc {
            for x in &self.point_facts[*p] {
                s.push_str(&format!("(assert {x})\n"));
            }
        }
        for e in self.graph.edges.iter().filter(|e| anc.contains(&e.to)) {
            for x in &self.edge_facts[e.id] {
                s.push_str(&format!("(assert {x})\n"));
            }
        }
        s.push_str(&format!("(assert {})\n", reach(&self.graph.points[point].version)));
        s.push_str(&format!("(assert {})\n(check-sat)\n", not(goal)));
        s
    }

    /// Obligations in source order.
    pub fn obligations(&self) -> Vec<Obligation> {
        let mut order: Vec<&Pending> = self.pending.iter().collect();
        order.sort_by_key(|p| (p.span, p.kind));
        order
            .into_iter()
            .enumerate()
            .map(|(idx, p)| Obligation { idx, fn_name: self.fn_name.clone(), span: p.span, kind: p.kind, point: p.point, script: self.script(p.point, &p.goal) })
            .collect()
    }

    /// One script per point whose only goal is `false`: `sat` means the
    /// facts on the way there are consistent.
    pub fn reachability_scripts(&self) -> Vec<(PointId, String)> {
        self.graph.points.iter().map(|p| (p.id, self.script(p.id, "false"))).collect()
    }
}

/// Encodes a function and splits it into obligation scripts.
pub fn encode_function(prog: &TypedProgram, fid: FnId, opts: &EncoderOptions) -> Result<Vec<Obligation>, Diagnostic> {
    Ok(encode(prog, fid, opts)?.obligations())
}
