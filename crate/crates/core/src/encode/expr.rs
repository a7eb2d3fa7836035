//! Specification and pure-expression evaluation to SMT terms.

use super::smt::{and, app, eq, implies, int, ite, not, or};
use super::Enc;
use crate::lang::ast::{BinOp, UnOp};
use crate::lang::ir::*;
use crate::lang::types::{Purity, Ty};
use crate::lang::Diagnostic;

/// How a variable is represented while evaluating an expression.
#[derive(Debug, Clone)]
pub(crate) enum Bind {
    /// Stored in memory at an address.
    Mem(String),
    /// A snapshot term, optionally known to live at an address.
    Val { val: String, addr: Option<String> },
    /// A reference whose target lives at the given address; its snapshot
    /// is read at the current version.
    Ref(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Env {
    pub binds: Vec<Option<Bind>>,
}

impl Env {
    pub fn new(n: usize) -> Env {
        Env { binds: vec![None; n] }
    }

    pub fn set(&mut self, v: VarId, b: Bind) {
        self.binds[v] = Some(b);
    }
}

/// Current and `old` versions.
#[derive(Debug, Clone)]
pub(crate) struct Cx {
    pub ver: String,
    pub old: String,
}

impl Cx {
    pub fn at(ver: &str) -> Cx {
        Cx { ver: ver.into(), old: ver.into() }
    }

    pub fn with_old(ver: &str, old: &str) -> Cx {
        Cx { ver: ver.into(), old: old.into() }
    }
}

/// A place under evaluation.
#[derive(Debug, Clone)]
pub(crate) enum Pv {
    Loc(String),
    Val(String, Option<String>),
    RefTo(String),
}

/// Address used when a reference to a value without a known location is
/// needed. Only pure-memory functions can observe it.
const NO_ADDR: &str = "(- 1)";

type R<T> = Result<T, Diagnostic>;

impl<'p> Enc<'p> {
    pub(crate) fn mem_at(&mut self, ty: &Ty, addr: &str, ver: &str) -> String {
        self.mem_types.insert(ty.clone());
        app(&self.s.mem_fn(ty), &[addr.to_string(), ver.to_string()])
    }

    pub(crate) fn off(&mut self, ty: &Ty, field: usize, addr: &str) -> String {
        self.off_types.insert(ty.clone());
        app(&self.s.off_fn(ty, field), &[addr.to_string()])
    }

    pub(crate) fn place(&mut self, locals: &[Local], env: &Env, cx: &Cx, p: &Place) -> R<Pv> {
        let mut pv = match &env.binds[p.base] {
            Some(Bind::Mem(a)) => Pv::Loc(a.clone()),
            Some(Bind::Val { val, addr }) => Pv::Val(val.clone(), addr.clone()),
            Some(Bind::Ref(a)) => Pv::RefTo(a.clone()),
            None => return Err(Diagnostic::new(locals[p.base].span, format!("`{}` has no value here", locals[p.base].name))),
        };
        let mut cur = locals[p.base].ty.clone();
        for (proj, ty) in p.projs.iter().zip(&p.tys) {
            pv = match (proj, pv) {
                (Proj::Deref, Pv::RefTo(a)) => Pv::Loc(a),
                (Proj::Deref, Pv::Loc(a)) => {
                    let r = self.mem_at(&cur, &a, &cx.ver);
                    Pv::Loc(app(&self.s.ref_addr(ty), &[r]))
                }
                (Proj::Deref, Pv::Val(v, _)) => Pv::Loc(app(&self.s.ref_addr(ty), &[v])),
                (Proj::Field(i), Pv::Loc(a)) => Pv::Loc(self.off(&cur, *i, &a)),
                (Proj::Field(i), Pv::Val(v, a)) => {
                    let addr = a.map(|a| self.off(&cur, *i, &a));
                    Pv::Val(app(&self.s.sel(&cur, *i), &[v]), addr)
                }
                (Proj::Field(_), Pv::RefTo(_)) => unreachable!("field of a reference"),
            };
            cur = ty.clone();
        }
        Ok(pv)
    }

    pub(crate) fn read(&mut self, pv: Pv, ty: &Ty, cx: &Cx) -> String {
        match pv {
            Pv::Loc(a) => self.mem_at(ty, &a, &cx.ver),
            Pv::Val(v, _) => v,
            Pv::RefTo(a) => {
                let target = ty.pointee().expect("reference binding").clone();
                let snap = self.mem_at(&target, &a, &cx.ver);
                self.mem_types.insert(ty.clone());
                app(&self.s.mkref(&target), &[a, snap])
            }
        }
    }

    fn addr_of(&mut self, pv: Pv, target: &Ty, cx: &Cx, span: crate::lang::Span) -> R<String> {
        let (a, snap) = match pv {
            Pv::Loc(a) => {
                let s = self.mem_at(target, &a, &cx.ver);
                (a, s)
            }
            Pv::Val(v, Some(a)) => (a, v),
            Pv::Val(v, None) => (NO_ADDR.to_string(), v),
            Pv::RefTo(_) => return Err(Diagnostic::new(span, "cannot borrow a reference parameter again here")),
        };
        self.mem_types.insert(Ty::SharedRef(Box::new(target.clone())));
        Ok(app(&self.s.mkref(target), &[a, snap]))
    }

    /// Location of a place that must be stored in memory.
    pub(crate) fn loc(&mut self, locals: &[Local], env: &Env, cx: &Cx, p: &Place, span: crate::lang::Span) -> R<String> {
        match self.place(locals, env, cx, p)? {
            Pv::Loc(a) => Ok(a),
            _ => Err(Diagnostic::new(span, "place has no memory location")),
        }
    }

    pub(crate) fn expr(&mut self, locals: &[Local], env: &mut Env, cx: &Cx, e: &TExpr) -> R<String> {
        use TExprKind as K;
        Ok(match &e.kind {
            K::Int(n) => int(*n),
            K::Bool(b) => b.to_string(),
            K::Unit => "unit".into(),
            K::Read(p) => {
                let pv = self.place(locals, env, cx, p)?;
                self.read(pv, &e.ty, cx)
            }
            K::AddrOf(p, _) => {
                let pv = self.place(locals, env, cx, p)?;
                self.addr_of(pv, p.ty(locals), cx, e.span)?
            }
            K::Unary(UnOp::Not, x) => not(&self.expr(locals, env, cx, x)?),
            K::Unary(UnOp::Neg, x) => format!("(- {})", self.expr(locals, env, cx, x)?),
            K::Binary(op, a, b) => {
                let ta = self.expr(locals, env, cx, a)?;
                let tb = self.expr(locals, env, cx, b)?;
                self.binary(*op, a, b, &ta, &tb)
            }
            K::Call(f, args) => {
                let mut ts = Vec::new();
                for a in args {
                    ts.push(self.expr(locals, env, cx, a)?);
                }
                self.pure_call(*f, &ts, cx, e.span)?
            }
            K::BuiltinDeref(p) => {
                let tp = self.expr(locals, env, cx, p)?;
                self.mem_at(&e.ty, &tp, &cx.ver)
            }
            K::DerefValue(r) => {
                let tr = self.expr(locals, env, cx, r)?;
                let a = app(&self.s.ref_addr(&e.ty), &[tr]);
                self.mem_at(&e.ty, &a, &cx.ver)
            }
            K::Field(x, i) => {
                let tx = self.expr(locals, env, cx, x)?;
                self.mem_types.insert(x.ty.clone());
                app(&self.s.sel(&x.ty, *i), &[tx])
            }
            K::Cast(x) => {
                let tx = self.expr(locals, env, cx, x)?;
                match x.ty.pointee() {
                    Some(t) if x.ty.is_ref() => app(&self.s.ref_addr(t), &[tx]),
                    _ => tx,
                }
            }
            K::Variant(v, p) => {
                self.mem_types.insert(e.ty.clone());
                let parts = match p {
                    Some(x) => vec![self.expr(locals, env, cx, x)?],
                    None => vec![],
                };
                self.s.mem_value(&e.ty, &parts, *v)
            }
            K::Match(s, arms) => {
                let ts = self.expr(locals, env, cx, s)?;
                self.mem_types.insert(s.ty.clone());
                let mut acc: Option<String> = None;
                for arm in arms.iter().rev() {
                    if let Some(b) = arm.binding {
                        env.set(b, Bind::Val { val: app(&self.s.variant_sel(&s.ty, arm.variant), &[ts.clone()]), addr: None });
                    }
                    let body = self.expr(locals, env, cx, &arm.body)?;
                    acc = Some(match acc {
                        None => body,
                        Some(rest) => ite(&self.s.is_variant(&s.ty, arm.variant, &ts), &body, &rest),
                    });
                }
                acc.ok_or_else(|| Diagnostic::new(e.span, "empty match"))?
            }
            K::Ite(c, a, b) => {
                let tc = self.expr(locals, env, cx, c)?;
                let ta = self.expr(locals, env, cx, a)?;
                let tb = self.expr(locals, env, cx, b)?;
                ite(&tc, &ta, &tb)
            }
            K::Old(x) => self.expr(locals, env, &Cx::at(&cx.old), x)?,
            K::Tuple(xs) => {
                self.mem_types.insert(e.ty.clone());
                let mut ts = Vec::new();
                for x in xs {
                    ts.push(self.expr(locals, env, cx, x)?);
                }
                self.s.mem_value(&e.ty, &ts, 0)
            }
        })
    }

    fn binary(&mut self, op: BinOp, a: &TExpr, b: &TExpr, ta: &str, tb: &str) -> String {
        let (ta, tb) = (ta.to_string(), tb.to_string());
        match op {
            BinOp::Implies => implies(&ta, &tb),
            BinOp::Or => or(vec![ta, tb]),
            BinOp::And => and(vec![ta, tb]),
            BinOp::Eq => eq(&self.s.m2v(&a.ty, &ta), &self.s.m2v(&b.ty, &tb)),
            BinOp::Ne => not(&eq(&self.s.m2v(&a.ty, &ta), &self.s.m2v(&b.ty, &tb))),
            BinOp::MemEq => eq(&ta, &tb),
            BinOp::Lt => app("<", &[ta, tb]),
            BinOp::Le => app("<=", &[ta, tb]),
            BinOp::Gt => app(">", &[ta, tb]),
            BinOp::Ge => app(">=", &[ta, tb]),
            BinOp::Add => app("+", &[ta, tb]),
            BinOp::Sub => app("-", &[ta, tb]),
            BinOp::Mul => app("*", &[ta, tb]),
            BinOp::Div => trunc_div(&ta, &tb),
            BinOp::Rem => format!("(- {ta} (* {tb} {}))", trunc_div(&ta, &tb)),
        }
    }

    /// Application of a pure function; records its contract and definition
    /// as side facts.
    pub(crate) fn pure_call(&mut self, f: FnId, args: &[String], cx: &Cx, span: crate::lang::Span) -> R<String> {
        let prog = self.prog;
        let callee = &prog.fns[f];
        let level = callee.purity.ok_or_else(|| Diagnostic::new(span, format!("`{}` is not pure", callee.name)))?;
        let mut ts: Vec<String> = Vec::new();
        for (i, &p) in callee.params.iter().enumerate() {
            let ty = &callee.locals[p].ty;
            self.mem_types.insert(ty.clone());
            ts.push(match level {
                Purity::PureValue => self.s.m2v(ty, &args[i]),
                _ => args[i].clone(),
            });
        }
        if level == Purity::PureUnstable {
            ts.push(cx.ver.clone());
        }
        self.mem_types.insert(callee.ret.clone());
        self.pure_fns.insert(f);
        let term = app(&super::smt::sym(&callee.smt_name), &ts);
        if !self.expanded.insert(term.clone()) {
            return Ok(term);
        }
        let mut env = Env::new(callee.locals.len());
        for (i, &p) in callee.params.iter().enumerate() {
            env.set(p, Bind::Val { val: args[i].clone(), addr: None });
        }
        env.set(callee.result, Bind::Val { val: term.clone(), addr: None });
        let inner = Cx::at(&cx.ver);
        for ens in &callee.ensures {
            let t = self.expr(&callee.locals, &mut env, &inner, ens)?;
            self.side_fact(t);
        }
        if let Some(body) = &callee.body {
            let stmts: Vec<&TStmt> = body.stmts.iter().collect();
            let t = self.eval_body(&callee.locals, &stmts, env, &inner)?;
            self.side_fact(eq(&term, &t));
        }
        Ok(term)
    }

    pub(crate) fn side_fact(&mut self, t: String) {
        if t != "true" && self.side_seen.insert(t.clone()) {
            self.side.push(t);
        }
    }

    /// Symbolic execution of a loop-free pure body into a single term.
    fn eval_body(&mut self, locals: &[Local], stmts: &[&TStmt], mut env: Env, cx: &Cx) -> R<String> {
        for (i, s) in stmts.iter().enumerate() {
            let rest = &stmts[i + 1..];
            match &s.kind {
                TStmtKind::Let { var, rhs: Rhs::Expr(e) } => {
                    let t = self.expr(locals, &mut env, cx, e)?;
                    env.set(*var, Bind::Val { val: t, addr: None });
                }
                TStmtKind::Assign { target, rhs: Rhs::Expr(e) } if target.is_var() => {
                    let t = self.expr(locals, &mut env, cx, e)?;
                    env.set(target.base, Bind::Val { val: t, addr: None });
                }
                TStmtKind::Return(Some(Rhs::Expr(e))) => return self.expr(locals, &mut env, cx, e),
                TStmtKind::Return(None) => return Ok("unit".into()),
                TStmtKind::If { cond, then_blk, else_blk } => {
                    let c = self.expr(locals, &mut env, cx, cond)?;
                    let mut a: Vec<&TStmt> = then_blk.stmts.iter().collect();
                    a.extend_from_slice(rest);
                    let mut b: Vec<&TStmt> = else_blk.stmts.iter().collect();
                    b.extend_from_slice(rest);
                    let ta = self.eval_body(locals, &a, env.clone(), cx)?;
                    let tb = self.eval_body(locals, &b, env, cx)?;
                    return Ok(ite(&c, &ta, &tb));
                }
                TStmtKind::Match { scrut, arms } => {
                    let pv = self.place(locals, &env, cx, scrut)?;
                    let sty = scrut.ty(locals).clone();
                    let ts = self.read(pv, &sty, cx);
                    let mut acc: Option<String> = None;
                    for arm in arms.iter().rev() {
                        let mut env2 = env.clone();
                        if let Some(b) = arm.binding {
                            env2.set(b, Bind::Val { val: app(&self.s.variant_sel(&sty, arm.variant), &[ts.clone()]), addr: None });
                        }
                        let mut seq: Vec<&TStmt> = arm.body.stmts.iter().collect();
                        seq.extend_from_slice(rest);
                        let body = self.eval_body(locals, &seq, env2, cx)?;
                        acc = Some(match acc {
                            None => body,
                            Some(r) => ite(&self.s.is_variant(&sty, arm.variant, &ts), &body, &r),
                        });
                    }
                    return acc.ok_or_else(|| Diagnostic::new(s.span, "empty match"));
                }
                _ => return Err(Diagnostic::new(s.span, "statement not supported in a pure function body")),
            }
        }
        Ok("unit".into())
    }
}

/// Integer division rounding toward zero.
fn trunc_div(a: &str, b: &str) -> String {
    let q = format!("(div (abs {a}) (abs {b}))");
    format!("(ite (= (>= {a} 0) (>= {b} 0)) {q} (- {q}))")
}
