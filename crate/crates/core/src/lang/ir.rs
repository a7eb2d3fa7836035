//! Typed, monomorphized intermediate representation.
//!
//! Impure calls in executable code are hoisted into their own statements,
//! `let ... else` is desugared into a two-armed match, and every expression
//! carries a concrete type.

use super::ast::{BinOp, Receiver, SelfParam, UnOp};
use super::types::{Purity, Ty};
use super::Span;
use crate::capability::CapKind;
use std::collections::BTreeMap;

pub type VarId = usize;
pub type FnId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalKind {
    Param,
    Let,
    Temp,
    Result,
    Binding,
}

#[derive(Debug, Clone)]
pub struct Local {
    pub name: String,
    pub ty: Ty,
    pub kind: LocalKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Proj {
    Deref,
    Field(usize),
}

/// A base variable followed by projections; `tys[i]` is the type after
/// applying `projs[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Place {
    pub base: VarId,
    pub projs: Vec<Proj>,
    pub tys: Vec<Ty>,
}

impl Place {
    pub fn var(base: VarId) -> Place {
        Place { base, projs: vec![], tys: vec![] }
    }

    pub fn is_var(&self) -> bool {
        self.projs.is_empty()
    }

    pub fn ty<'a>(&'a self, locals: &'a [Local]) -> &'a Ty {
        self.tys.last().unwrap_or(&locals[self.base].ty)
    }

    pub fn push(&self, p: Proj, ty: Ty) -> Place {
        let mut out = self.clone();
        out.projs.push(p);
        out.tys.push(ty);
        out
    }

    pub fn render(&self, locals: &[Local], fields: &dyn Fn(&Ty, usize) -> String) -> String {
        let mut s = locals[self.base].name.clone();
        let mut cur = locals[self.base].ty.clone();
        for (p, t) in self.projs.iter().zip(&self.tys) {
            match p {
                Proj::Deref => s = format!("(*{s})"),
                Proj::Field(i) => s = format!("{s}.{}", fields(&cur, *i)),
            }
            cur = t.clone();
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TExpr {
    pub kind: TExprKind,
    pub ty: Ty,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum TExprKind {
    Int(i64),
    Bool(bool),
    Unit,
    /// Value stored at a place (copy or move).
    Read(Place),
    /// `&place` / `&mut place`.
    AddrOf(Place, bool),
    Unary(UnOp, Box<TExpr>),
    Binary(BinOp, Box<TExpr>, Box<TExpr>),
    Call(FnId, Vec<TExpr>),
    /// Built-in `deref(ptr)` of specifications.
    BuiltinDeref(Box<TExpr>),
    /// `*e` where `e` is a reference-valued expression that is not a place.
    DerefValue(Box<TExpr>),
    /// Field of a struct or tuple value that is not a place.
    Field(Box<TExpr>, usize),
    /// Pointer/integer cast; the target type is the expression type.
    Cast(Box<TExpr>),
    Variant(usize, Option<Box<TExpr>>),
    Match(Box<TExpr>, Vec<TArm>),
    Ite(Box<TExpr>, Box<TExpr>, Box<TExpr>),
    Old(Box<TExpr>),
    Tuple(Vec<TExpr>),
}

#[derive(Debug, Clone)]
pub struct TArm {
    pub variant: usize,
    pub binding: Option<VarId>,
    pub body: TExpr,
}

impl TExpr {
    pub fn new(kind: TExprKind, ty: Ty, span: Span) -> TExpr {
        TExpr { kind, ty, span }
    }

    pub fn children(&self) -> Vec<&TExpr> {
        match &self.kind {
            TExprKind::Int(_) | TExprKind::Bool(_) | TExprKind::Unit | TExprKind::Read(_) | TExprKind::AddrOf(..) => vec![],
            TExprKind::Unary(_, e)
            | TExprKind::BuiltinDeref(e)
            | TExprKind::DerefValue(e)
            | TExprKind::Field(e, _)
            | TExprKind::Cast(e)
            | TExprKind::Old(e) => vec![e],
            TExprKind::Binary(_, a, b) => vec![a, b],
            TExprKind::Call(_, args) | TExprKind::Tuple(args) => args.iter().collect(),
            TExprKind::Variant(_, p) => p.iter().map(|b| &**b).collect(),
            TExprKind::Match(s, arms) => std::iter::once(&**s).chain(arms.iter().map(|a| &a.body)).collect(),
            TExprKind::Ite(c, a, b) => vec![c, a, b],
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a TExpr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Places syntactically mentioned (read or borrowed) by this expression.
    pub fn places(&self) -> Vec<&Place> {
        let mut out = Vec::new();
        self.walk(&mut |e| match &e.kind {
            TExprKind::Read(p) | TExprKind::AddrOf(p, _) => out.push(p),
            _ => {}
        });
        out
    }

    pub fn calls(&self) -> Vec<FnId> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let TExprKind::Call(f, _) = &e.kind {
                out.push(*f)
            }
        });
        out
    }
}

#[derive(Debug, Clone)]
pub struct CallSite {
    pub callee: FnId,
    pub args: Vec<TExpr>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum Rhs {
    Expr(TExpr),
    Call(CallSite),
}

impl Rhs {
    pub fn exprs(&self) -> Vec<&TExpr> {
        match self {
            Rhs::Expr(e) => vec![e],
            Rhs::Call(c) => c.args.iter().collect(),
        }
    }

    pub fn ty<'a>(&'a self, prog: &'a TypedProgram) -> &'a Ty {
        match self {
            Rhs::Expr(e) => &e.ty,
            Rhs::Call(c) => &prog.fns[c.callee].ret,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TStmt {
    pub kind: TStmtKind,
    pub span: Span,
    /// Variables whose lexical scope ends right after this statement.
    pub kills: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub enum TStmtKind {
    Let { var: VarId, rhs: Rhs },
    Assign { target: Place, rhs: Rhs },
    Call(CallSite),
    Assert(TExpr),
    If { cond: TExpr, then_blk: TBlock, else_blk: TBlock },
    Match { scrut: Place, arms: Vec<TStmtArm> },
    Drop(Place),
    Return(Option<Rhs>),
    Panic,
}

#[derive(Debug, Clone)]
pub struct TStmtArm {
    pub variant: usize,
    pub binding: Option<VarId>,
    pub body: TBlock,
}

#[derive(Debug, Clone, Default)]
pub struct TBlock {
    pub stmts: Vec<TStmt>,
    /// Variables declared directly in this block; they go out of scope at
    /// its end.
    pub scope: Vec<VarId>,
}

impl TBlock {
    /// All statements, recursively, in source order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a TStmt)) {
        for s in &self.stmts {
            f(s);
            match &s.kind {
                TStmtKind::If { then_blk, else_blk, .. } => {
                    then_blk.walk(f);
                    else_blk.walk(f);
                }
                TStmtKind::Match { arms, .. } => arms.iter().for_each(|a| a.body.walk(f)),
                _ => {}
            }
        }
    }
}

impl TStmt {
    /// Expressions evaluated directly by this statement (not by nested blocks).
    pub fn exprs(&self) -> Vec<&TExpr> {
        match &self.kind {
            TStmtKind::Let { rhs, .. } | TStmtKind::Assign { rhs, .. } | TStmtKind::Return(Some(rhs)) => rhs.exprs(),
            TStmtKind::Call(c) => c.args.iter().collect(),
            TStmtKind::Assert(e) | TStmtKind::If { cond: e, .. } => vec![e],
            TStmtKind::Match { .. } | TStmtKind::Drop(_) | TStmtKind::Return(None) | TStmtKind::Panic => vec![],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FnInst {
    pub name: String,
    pub smt_name: String,
    pub owner: Option<Ty>,
    pub locals: Vec<Local>,
    pub params: Vec<VarId>,
    pub result: VarId,
    pub ret: Ty,
    pub requires: Vec<TExpr>,
    pub ensures: Vec<TExpr>,
    pub purity: Option<Purity>,
    pub ghost: bool,
    pub self_param: Option<SelfParam>,
    pub body: Option<TBlock>,
    pub span: Span,
    /// Declared in a user file rather than the bundled library prelude.
    pub client: bool,
}

impl FnInst {
    pub fn is_pure(&self) -> bool {
        self.purity.is_some()
    }

    /// Bodied, non-pure functions from user files: the verification targets.
    pub fn is_verification_target(&self) -> bool {
        self.client && self.body.is_some() && self.purity.is_none()
    }
}

#[derive(Debug, Clone)]
pub enum AdtDef {
    Struct(Vec<(String, Ty)>),
    Enum(Vec<(String, Option<Ty>)>),
}

#[derive(Debug, Clone)]
pub struct TAnnotation {
    pub receiver: Receiver,
    pub condition: Option<TExpr>,
    pub kind: CapKind,
    pub target: TExpr,
    /// Type of the location the target addresses.
    pub target_ty: Ty,
    /// Local table for the condition and target; index 0 is `self`.
    pub locals: Vec<Local>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct AdtInst {
    pub ty: Ty,
    pub def: AdtDef,
    pub annotations: Vec<TAnnotation>,
    pub thread_shared: bool,
    pub borrows: bool,
    pub span: Span,
}

#[derive(Debug, Clone, Default)]
pub struct TypedProgram {
    pub fns: Vec<FnInst>,
    pub adts: BTreeMap<Ty, AdtInst>,
    pub file_names: Vec<String>,
}

impl TypedProgram {
    pub fn adt(&self, ty: &Ty) -> Option<&AdtInst> {
        self.adts.get(ty)
    }

    pub fn struct_fields(&self, ty: &Ty) -> &[(String, Ty)] {
        match self.adts.get(ty).map(|a| &a.def) {
            Some(AdtDef::Struct(fs)) => fs,
            _ => &[],
        }
    }

    pub fn enum_variants(&self, ty: &Ty) -> &[(String, Option<Ty>)] {
        match self.adts.get(ty).map(|a| &a.def) {
            Some(AdtDef::Enum(vs)) => vs,
            _ => &[],
        }
    }

    /// Field types of a struct or tuple, in declaration order.
    pub fn field_types(&self, ty: &Ty) -> Vec<Ty> {
        match ty {
            Ty::Tuple(ts) => ts.clone(),
            Ty::Struct(..) => self.struct_fields(ty).iter().map(|(_, t)| t.clone()).collect(),
            _ => vec![],
        }
    }

    pub fn field_name(&self, ty: &Ty, idx: usize) -> String {
        match ty {
            Ty::Struct(..) => self.struct_fields(ty).get(idx).map(|(n, _)| n.clone()).unwrap_or_else(|| idx.to_string()),
            _ => idx.to_string(),
        }
    }

    pub fn targets(&self) -> impl Iterator<Item = FnId> + '_ {
        (0..self.fns.len()).filter(|&i| self.fns[i].is_verification_target())
    }

    pub fn find_fn(&self, name: &str) -> Option<FnId> {
        self.fns.iter().position(|f| f.name == name)
    }

    /// Whether a value of this type may keep a borrow alive: references,
    /// `#[borrows]` structs, and aggregates containing either.
    pub fn carries_borrow(&self, ty: &Ty) -> bool {
        self.carries_borrow_inner(ty, 0)
    }

    fn carries_borrow_inner(&self, ty: &Ty, depth: usize) -> bool {
        if depth > 16 {
            return false;
        }
        match ty {
            Ty::SharedRef(_) | Ty::MutRef(_) => true,
            Ty::Tuple(ts) => ts.iter().any(|t| self.carries_borrow_inner(t, depth + 1)),
            Ty::Struct(..) | Ty::Enum(..) => match self.adts.get(ty) {
                Some(a) if a.borrows => true,
                Some(AdtInst { def: AdtDef::Struct(fs), .. }) => fs.iter().any(|(_, t)| self.carries_borrow_inner(t, depth + 1)),
                Some(AdtInst { def: AdtDef::Enum(vs), .. }) => {
                    vs.iter().filter_map(|(_, p)| p.as_ref()).any(|t| self.carries_borrow_inner(t, depth + 1))
                }
                None => false,
            },
            _ => false,
        }
    }

    pub fn thread_shared(&self, ty: &Ty) -> bool {
        let mut shared = false;
        ty.walk(&mut |t| shared |= self.adts.get(t).is_some_and(|a| a.thread_shared));
        shared
    }
}
