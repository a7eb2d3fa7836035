//! Surface syntax tree, as produced by the parser.

use super::Span;
use crate::capability::CapKind;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Struct(StructDecl),
    Enum(EnumDecl),
    Impl(ImplBlock),
    Fn(FnDecl),
}

impl Item {
    pub fn span(&self) -> Span {
        match self {
            Item::Struct(s) => s.span,
            Item::Enum(e) => e.span,
            Item::Impl(i) => i.span,
            Item::Fn(f) => f.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attr {
    pub kind: AttrKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrKind {
    Capable(CapAnnotation),
    Requires(Expr),
    Ensures(Expr),
    Pure,
    PureMemory,
    PureUnstable,
    Ghost,
    ThreadShared,
    Borrows,
    ExternSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Receiver {
    Shared,
    Mut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapAnnotation {
    pub receiver: Receiver,
    pub condition: Option<Expr>,
    pub kind: CapKind,
    pub target: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructDecl {
    pub attrs: Vec<Attr>,
    pub name: String,
    pub generics: Vec<String>,
    pub fields: Vec<(String, TypeSyn)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDecl {
    pub attrs: Vec<Attr>,
    pub name: String,
    pub generics: Vec<String>,
    pub variants: Vec<(String, Option<TypeSyn>)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplBlock {
    pub attrs: Vec<Attr>,
    pub generics: Vec<String>,
    pub self_ty: TypeSyn,
    pub fns: Vec<FnDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnDecl {
    pub attrs: Vec<Attr>,
    pub name: String,
    pub generics: Vec<String>,
    pub params: Vec<Param>,
    pub ret: Option<TypeSyn>,
    pub body: Option<Block>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelfParam {
    Value,
    Shared,
    Mut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub mutable: bool,
    pub ty: ParamTy,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamTy {
    SelfParam(SelfParam),
    Typed(TypeSyn),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeSyn {
    Named { name: String, args: Vec<TypeSyn> },
    Ref { mutable: bool, inner: Box<TypeSyn> },
    Ptr { mutable: bool, inner: Box<TypeSyn> },
    Tuple(Vec<TypeSyn>),
    Infer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub tail: Option<Box<Expr>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Let { pat: Pattern, ty: Option<TypeSyn>, init: Expr, else_blk: Option<Block> },
    Assign { target: Expr, value: Expr },
    Expr(Expr),
    Assert(Expr),
    Drop(Expr),
    Return(Option<Expr>),
    Panic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Bind { name: String, mutable: bool },
    Variant { name: String, sub: Option<Box<Pattern>> },
    Wild,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Implies,
    Or,
    And,
    Eq,
    Ne,
    MemEq,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Implies => "==>",
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::MemEq => "====",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne | BinOp::MemEq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Unit,
    /// A single identifier: local variable, `self`, `result`, or a unit variant.
    Var(String),
    /// `A::b` without arguments (unit variant or path).
    Path(Vec<String>),
    /// `f(args)` or `A::f(args)`, also `old(e)` and `deref(e)`.
    Call { path: Vec<String>, args: Vec<Expr> },
    MethodCall { recv: Box<Expr>, method: String, args: Vec<Expr> },
    Field { base: Box<Expr>, name: String },
    TupleField { base: Box<Expr>, index: usize },
    Unary { op: UnOp, expr: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Cast { expr: Box<Expr>, ty: TypeSyn },
    AddrOf { mutable: bool, expr: Box<Expr> },
    Deref(Box<Expr>),
    Tuple(Vec<Expr>),
    If { cond: Box<Expr>, then_blk: Block, else_blk: Option<Block> },
    IfLet { pat: Pattern, scrut: Box<Expr>, then_blk: Block, else_blk: Block },
    Match { scrut: Box<Expr>, arms: Vec<(Pattern, Expr)> },
    Block(Block),
}

impl Program {
    pub fn functions(&self) -> impl Iterator<Item = &FnDecl> {
        self.items.iter().flat_map(|i| match i {
            Item::Fn(f) => vec![f],
            Item::Impl(b) => b.fns.iter().collect(),
            _ => vec![],
        })
    }
}

/// Visits every expression nested in a block, including statement operands.
pub fn walk_block_exprs<'a>(b: &'a Block, f: &mut dyn FnMut(&'a Expr)) {
    for s in &b.stmts {
        match &s.kind {
            StmtKind::Let { init, else_blk, .. } => {
                walk_expr(init, f);
                if let Some(e) = else_blk {
                    walk_block_exprs(e, f);
                }
            }
            StmtKind::Assign { target, value } => {
                walk_expr(target, f);
                walk_expr(value, f);
            }
            StmtKind::Expr(e) | StmtKind::Assert(e) | StmtKind::Drop(e) => walk_expr(e, f),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    walk_expr(e, f)
                }
            }
            StmtKind::Panic => {}
        }
    }
    if let Some(t) = &b.tail {
        walk_expr(t, f);
    }
}

pub fn walk_expr<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(e);
    match &e.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Unit | ExprKind::Var(_) | ExprKind::Path(_) => {}
        ExprKind::Call { args, .. } => args.iter().for_each(|a| walk_expr(a, f)),
        ExprKind::MethodCall { recv, args, .. } => {
            walk_expr(recv, f);
            args.iter().for_each(|a| walk_expr(a, f));
        }
        ExprKind::Field { base, .. } | ExprKind::TupleField { base, .. } => walk_expr(base, f),
        ExprKind::Unary { expr, .. }
        | ExprKind::Cast { expr, .. }
        | ExprKind::AddrOf { expr, .. }
        | ExprKind::Deref(expr) => walk_expr(expr, f),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::Tuple(es) => es.iter().for_each(|a| walk_expr(a, f)),
        ExprKind::If { cond, then_blk, else_blk } => {
            walk_expr(cond, f);
            walk_block_exprs(then_blk, f);
            if let Some(b) = else_blk {
                walk_block_exprs(b, f);
            }
        }
        ExprKind::IfLet { scrut, then_blk, else_blk, .. } => {
            walk_expr(scrut, f);
            walk_block_exprs(then_blk, f);
            walk_block_exprs(else_blk, f);
        }
        ExprKind::Match { scrut, arms } => {
            walk_expr(scrut, f);
            arms.iter().for_each(|(_, a)| walk_expr(a, f));
        }
        ExprKind::Block(b) => walk_block_exprs(b, f),
    }
}
