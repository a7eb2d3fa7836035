//! Pretty printer for the surface syntax. Output re-parses to the same tree
//! (modulo spans).

use super::ast::*;
use super::Span;
use std::fmt::Write;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, item) in p.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_item(&mut out, item);
    }
    out
}

fn print_attrs(out: &mut String, attrs: &[Attr], indent: &str) {
    for a in attrs {
        out.push_str(indent);
        out.push_str("#[");
        match &a.kind {
            AttrKind::Capable(c) => {
                out.push_str("capable(");
                out.push_str(match c.receiver {
                    Receiver::Shared => "&self",
                    Receiver::Mut => "&mut self",
                });
                if let Some(cond) = &c.condition {
                    out.push_str(" if ");
                    out.push_str(&print_expr(cond));
                }
                let _ = write!(out, " => {}({}))", c.kind.annotation_name(), print_expr(&c.target));
            }
            AttrKind::Requires(e) => {
                let _ = write!(out, "requires({})", print_expr(e));
            }
            AttrKind::Ensures(e) => {
                let _ = write!(out, "ensures({})", print_expr(e));
            }
            AttrKind::Pure => out.push_str("pure"),
            AttrKind::PureMemory => out.push_str("pure_memory"),
            AttrKind::PureUnstable => out.push_str("pure_unstable"),
            AttrKind::Ghost => out.push_str("ghost_fn"),
            AttrKind::ThreadShared => out.push_str("thread_shared"),
            AttrKind::Borrows => out.push_str("borrows"),
            AttrKind::ExternSpec => out.push_str("extern_spec"),
        }
        out.push_str("]\n");
    }
}

fn generics(gs: &[String]) -> String {
    if gs.is_empty() {
        String::new()
    } else {
        format!("<{}>", gs.join(", "))
    }
}

fn print_item(out: &mut String, item: &Item) {
    match item {
        Item::Struct(s) => {
            print_attrs(out, &s.attrs, "");
            let _ = write!(out, "struct {}{} {{", s.name, generics(&s.generics));
            let fields: Vec<String> = s.fields.iter().map(|(n, t)| format!("{n}: {}", print_type(t))).collect();
            if !fields.is_empty() {
                let _ = write!(out, " {} ", fields.join(", "));
            }
            out.push_str("}\n");
        }
        Item::Enum(e) => {
            print_attrs(out, &e.attrs, "");
            let _ = write!(out, "enum {}{} {{ ", e.name, generics(&e.generics));
            let vs: Vec<String> = e
                .variants
                .iter()
                .map(|(n, p)| match p {
                    Some(t) => format!("{n}({})", print_type(t)),
                    None => n.clone(),
                })
                .collect();
            out.push_str(&vs.join(", "));
            out.push_str(" }\n");
        }
        Item::Impl(b) => {
            print_attrs(out, &b.attrs, "");
            let _ = writeln!(out, "impl{} {} {{", generics(&b.generics), print_type(&b.self_ty));
            for f in &b.fns {
                print_fn(out, f, "    ");
            }
            out.push_str("}\n");
        }
        Item::Fn(f) => print_fn(out, f, ""),
    }
}

fn print_fn(out: &mut String, f: &FnDecl, indent: &str) {
    print_attrs(out, &f.attrs, indent);
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| match &p.ty {
            ParamTy::SelfParam(SelfParam::Value) => format!("{}self", if p.mutable { "mut " } else { "" }),
            ParamTy::SelfParam(SelfParam::Shared) => "&self".into(),
            ParamTy::SelfParam(SelfParam::Mut) => "&mut self".into(),
            ParamTy::Typed(t) => format!("{}{}: {}", if p.mutable { "mut " } else { "" }, p.name, print_type(t)),
        })
        .collect();
    let _ = write!(out, "{indent}fn {}{}({})", f.name, generics(&f.generics), params.join(", "));
    if let Some(r) = &f.ret {
        let _ = write!(out, " -> {}", print_type(r));
    }
    match &f.body {
        None => out.push_str(";\n"),
        Some(b) => {
            out.push(' ');
            print_block(out, b, indent);
            out.push('\n');
        }
    }
}

pub fn print_type(t: &TypeSyn) -> String {
    match t {
        TypeSyn::Named { name, args } if args.is_empty() => name.clone(),
        TypeSyn::Named { name, args } => {
            format!("{name}<{}>", args.iter().map(print_type).collect::<Vec<_>>().join(", "))
        }
        TypeSyn::Ref { mutable, inner } => format!("&{}{}", if *mutable { "mut " } else { "" }, print_type(inner)),
        TypeSyn::Ptr { mutable, inner } => format!("*{} {}", if *mutable { "mut" } else { "const" }, print_type(inner)),
        TypeSyn::Tuple(ts) if ts.len() == 1 => format!("({},)", print_type(&ts[0])),
        TypeSyn::Tuple(ts) => format!("({})", ts.iter().map(print_type).collect::<Vec<_>>().join(", ")),
        TypeSyn::Infer => "_".into(),
    }
}

fn print_block(out: &mut String, b: &Block, indent: &str) {
    let inner = format!("{indent}    ");
    out.push_str("{\n");
    for s in &b.stmts {
        out.push_str(&inner);
        print_stmt(out, s, &inner);
        out.push('\n');
    }
    if let Some(t) = &b.tail {
        out.push_str(&inner);
        out.push_str(&print_expr_ind(t, &inner));
        out.push('\n');
    }
    out.push_str(indent);
    out.push('}');
}

fn print_stmt(out: &mut String, s: &Stmt, indent: &str) {
    match &s.kind {
        StmtKind::Let { pat, ty, init, else_blk } => {
            let _ = write!(out, "let {}", print_pattern(pat));
            if let Some(t) = ty {
                let _ = write!(out, ": {}", print_type(t));
            }
            let _ = write!(out, " = {}", print_expr_ind(init, indent));
            if let Some(b) = else_blk {
                out.push_str(" else ");
                print_block(out, b, indent);
            }
            out.push(';');
        }
        StmtKind::Assign { target, value } => {
            let _ = write!(out, "{} = {};", print_expr_ind(target, indent), print_expr_ind(value, indent));
        }
        StmtKind::Expr(e) => {
            out.push_str(&print_expr_ind(e, indent));
            if !matches!(e.kind, ExprKind::If { .. } | ExprKind::IfLet { .. } | ExprKind::Match { .. } | ExprKind::Block(_)) {
                out.push(';');
            }
        }
        StmtKind::Assert(e) => {
            let _ = write!(out, "assert!({});", print_expr_ind(e, indent));
        }
        StmtKind::Drop(e) => {
            let _ = write!(out, "drop({});", print_expr_ind(e, indent));
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", print_expr_ind(e, indent));
        }
        StmtKind::Panic => out.push_str("panic!();"),
    }
}

pub fn print_pattern(p: &Pattern) -> String {
    match p {
        Pattern::Wild => "_".into(),
        Pattern::Bind { name, mutable: true } => format!("mut {name}"),
        Pattern::Bind { name, mutable: false } => name.clone(),
        Pattern::Variant { name, sub: None } => name.clone(),
        Pattern::Variant { name, sub: Some(s) } => format!("{name}({})", print_pattern(s)),
    }
}

pub fn print_expr(e: &Expr) -> String {
    print_expr_ind(e, "")
}

fn print_expr_ind(e: &Expr, indent: &str) -> String {
    expr_prec(e, 0, indent)
}

fn expr_prec(e: &Expr, min: u8, indent: &str) -> String {
    match &e.kind {
        ExprKind::Int(n) => n.to_string(),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Unit => "()".into(),
        ExprKind::Var(v) => v.clone(),
        ExprKind::Path(p) => p.join("::"),
        ExprKind::Call { path, args } => format!("{}({})", path.join("::"), args_str(args, indent)),
        ExprKind::MethodCall { recv, method, args } => {
            format!("{}.{method}({})", postfix_operand(recv, indent), args_str(args, indent))
        }
        ExprKind::Field { base, name } => format!("{}.{name}", postfix_operand(base, indent)),
        ExprKind::TupleField { base, index } => format!("{}.{index}", postfix_operand(base, indent)),
        ExprKind::Unary { op, expr } => {
            let o = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            format!("{o}{}", unary_operand(expr, indent))
        }
        ExprKind::Deref(x) => format!("*{}", unary_operand(x, indent)),
        ExprKind::AddrOf { mutable, expr } => {
            format!("&{}{}", if *mutable { "mut " } else { "" }, unary_operand(expr, indent))
        }
        ExprKind::Cast { expr, ty } => {
            let s = format!("{} as {}", cast_operand(expr, indent), print_type(ty));
            if min > 6 {
                format!("({s})")
            } else {
                s
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let (lp, rp) = match op {
                BinOp::Implies => (p + 1, p),
                _ if p == 4 => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            let s = format!("{} {} {}", expr_prec(lhs, lp, indent), op.symbol(), expr_prec(rhs, rp, indent));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
        ExprKind::Tuple(es) if es.len() == 1 => format!("({},)", expr_prec(&es[0], 0, indent)),
        ExprKind::Tuple(es) => format!("({})", args_str(es, indent)),
        ExprKind::If { cond, then_blk, else_blk } => {
            let mut s = format!("if {} ", expr_prec(cond, 0, indent));
            print_block(&mut s, then_blk, indent);
            if let Some(b) = else_blk {
                s.push_str(" else ");
                print_block(&mut s, b, indent);
            }
            wrap_if_nested(s, min)
        }
        ExprKind::IfLet { pat, scrut, then_blk, else_blk } => {
            let mut s = format!("if let {} = {} ", print_pattern(pat), expr_prec(scrut, 0, indent));
            print_block(&mut s, then_blk, indent);
            s.push_str(" else ");
            print_block(&mut s, else_blk, indent);
            wrap_if_nested(s, min)
        }
        ExprKind::Match { scrut, arms } => {
            let inner = format!("{indent}    ");
            let mut s = format!("match {} {{\n", expr_prec(scrut, 0, indent));
            for (p, body) in arms {
                let _ = writeln!(s, "{inner}{} => {},", print_pattern(p), expr_prec(body, 0, &inner));
            }
            s.push_str(indent);
            s.push('}');
            wrap_if_nested(s, min)
        }
        ExprKind::Block(b) => {
            let mut s = String::new();
            print_block(&mut s, b, indent);
            s
        }
    }
}

fn wrap_if_nested(s: String, min: u8) -> String {
    if min > 0 {
        format!("({s})")
    } else {
        s
    }
}

fn args_str(args: &[Expr], indent: &str) -> String {
    args.iter().map(|a| expr_prec(a, 0, indent)).collect::<Vec<_>>().join(", ")
}

fn is_atomic(e: &Expr) -> bool {
    if let ExprKind::Int(n) = e.kind {
        return n >= 0;
    }
    matches!(
        e.kind,
        ExprKind::Bool(_)
            | ExprKind::Unit
            | ExprKind::Var(_)
            | ExprKind::Path(_)
            | ExprKind::Call { .. }
            | ExprKind::MethodCall { .. }
            | ExprKind::Field { .. }
            | ExprKind::TupleField { .. }
            | ExprKind::Tuple(_)
    )
}

fn postfix_operand(e: &Expr, indent: &str) -> String {
    if is_atomic(e) {
        expr_prec(e, 0, indent)
    } else {
        format!("({})", expr_prec(e, 0, indent))
    }
}

fn unary_operand(e: &Expr, indent: &str) -> String {
    match e.kind {
        ExprKind::Unary { .. } | ExprKind::Deref(_) | ExprKind::AddrOf { .. } => expr_prec(e, 0, indent),
        ExprKind::Int(n) if n < 0 => format!("({n})"),
        _ => postfix_operand(e, indent),
    }
}

fn cast_operand(e: &Expr, indent: &str) -> String {
    match e.kind {
        ExprKind::Cast { .. } => expr_prec(e, 0, indent),
        _ => unary_operand(e, indent),
    }
}

/// Resets every span in the tree; used to compare trees structurally.
pub fn erase_spans(p: &mut Program) {
    for item in &mut p.items {
        match item {
            Item::Struct(s) => {
                s.span = Span::default();
                erase_attrs(&mut s.attrs);
            }
            Item::Enum(e) => {
                e.span = Span::default();
                erase_attrs(&mut e.attrs);
            }
            Item::Impl(b) => {
                b.span = Span::default();
                erase_attrs(&mut b.attrs);
                b.fns.iter_mut().for_each(erase_fn);
            }
            Item::Fn(f) => erase_fn(f),
        }
    }
}

fn erase_attrs(attrs: &mut [Attr]) {
    for a in attrs {
        a.span = Span::default();
        match &mut a.kind {
            AttrKind::Capable(c) => {
                if let Some(e) = &mut c.condition {
                    erase_expr(e);
                }
                erase_expr(&mut c.target);
            }
            AttrKind::Requires(e) | AttrKind::Ensures(e) => erase_expr(e),
            _ => {}
        }
    }
}

fn erase_fn(f: &mut FnDecl) {
    f.span = Span::default();
    erase_attrs(&mut f.attrs);
    for p in &mut f.params {
        p.span = Span::default();
    }
    if let Some(b) = &mut f.body {
        erase_block(b);
    }
}

fn erase_block(b: &mut Block) {
    b.span = Span::default();
    for s in &mut b.stmts {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::Let { init, else_blk, .. } => {
                erase_expr(init);
                if let Some(e) = else_blk {
                    erase_block(e);
                }
            }
            StmtKind::Assign { target, value } => {
                erase_expr(target);
                erase_expr(value);
            }
            StmtKind::Expr(e) | StmtKind::Assert(e) | StmtKind::Drop(e) | StmtKind::Return(Some(e)) => erase_expr(e),
            StmtKind::Return(None) | StmtKind::Panic => {}
        }
    }
    if let Some(t) = &mut b.tail {
        erase_expr(t);
    }
}

pub fn erase_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Unit | ExprKind::Var(_) | ExprKind::Path(_) => {}
        ExprKind::Call { args, .. } => args.iter_mut().for_each(erase_expr),
        ExprKind::MethodCall { recv, args, .. } => {
            erase_expr(recv);
            args.iter_mut().for_each(erase_expr);
        }
        ExprKind::Field { base, .. } | ExprKind::TupleField { base, .. } => erase_expr(base),
        ExprKind::Unary { expr, .. } | ExprKind::Cast { expr, .. } | ExprKind::AddrOf { expr, .. } | ExprKind::Deref(expr) => {
            erase_expr(expr)
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            erase_expr(lhs);
            erase_expr(rhs);
        }
        ExprKind::Tuple(es) => es.iter_mut().for_each(erase_expr),
        ExprKind::If { cond, then_blk, else_blk } => {
            erase_expr(cond);
            erase_block(then_blk);
            if let Some(b) = else_blk {
                erase_block(b);
            }
        }
        ExprKind::IfLet { scrut, then_blk, else_blk, .. } => {
            erase_expr(scrut);
            erase_block(then_blk);
            erase_block(else_blk);
        }
        ExprKind::Match { scrut, arms } => {
            erase_expr(scrut);
            arms.iter_mut().for_each(|(_, a)| erase_expr(a));
        }
        ExprKind::Block(b) => erase_block(b),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_expr, parse_program};
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(src: &str) {
        let mut a = parse_program(src).unwrap();
        let printed = print_program(&a);
        let mut b = parse_program(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(print_program(&b), printed);
        erase_spans(&mut a);
        erase_spans(&mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_files_round_trip() {
        for (name, src) in crate::corpus::all_sources() {
            let mut a = parse_program(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            let printed = print_program(&a);
            let mut b = parse_program(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
            erase_spans(&mut a);
            erase_spans(&mut b);
            assert_eq!(a, b, "{name}");
        }
    }

    #[test]
    fn precedence_survives_printing() {
        roundtrip("fn f() { assert!((a + b) * c == a + b * c); assert!(!(x && y) || -(-3) < 2 ==> true); }");
        roundtrip("fn f() { let v = *(x.borrow()); let p = &mut *y; assert!(x as *const _ != (*r).f); }");
    }

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (-5i64..6).prop_map(|n| mk(ExprKind::Int(n))),
            any::<bool>().prop_map(|b| mk(ExprKind::Bool(b))),
            prop::sample::select(vec!["x", "y", "self", "result"]).prop_map(|v| mk(ExprKind::Var(v.into()))),
        ]
    }

    fn mk(kind: ExprKind) -> Expr {
        Expr { kind, span: Span::default() }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(4, 32, 3, |inner| {
            let ops = prop::sample::select(vec![
                BinOp::Implies,
                BinOp::Or,
                BinOp::And,
                BinOp::Eq,
                BinOp::Ne,
                BinOp::MemEq,
                BinOp::Lt,
                BinOp::Add,
                BinOp::Sub,
                BinOp::Mul,
                BinOp::Rem,
            ]);
            prop_oneof![
                (ops, inner.clone(), inner.clone()).prop_map(|(op, l, r)| mk(ExprKind::Binary {
                    op,
                    lhs: Box::new(l),
                    rhs: Box::new(r)
                })),
                inner.clone().prop_map(|e| mk(ExprKind::Unary { op: UnOp::Not, expr: Box::new(e) })),
                inner.clone().prop_map(|e| mk(ExprKind::Deref(Box::new(e)))),
                inner.clone().prop_map(|e| mk(ExprKind::Call { path: vec!["old".into()], args: vec![e] })),
                (inner.clone(), inner.clone()).prop_map(|(r, a)| mk(ExprKind::MethodCall {
                    recv: Box::new(r),
                    method: "get".into(),
                    args: vec![a]
                })),
                inner.clone().prop_map(|e| mk(ExprKind::Cast {
                    expr: Box::new(e),
                    ty: TypeSyn::Ptr { mutable: false, inner: Box::new(TypeSyn::Infer) }
                })),
                inner.prop_map(|e| mk(ExprKind::Field { base: Box::new(e), name: "f".into() })),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_expressions_reparse_to_the_same_tree(e in arb_expr()) {
            let printed = print_expr(&e);
            let mut back = parse_expr(&printed).map_err(|d| TestCaseError::fail(format!("{d}: {printed}")))?;
            erase_expr(&mut back);
            let mut norm = e.clone();
            normalize_negatives(&mut norm);
            prop_assert_eq!(back, norm, "{}", printed);
        }
    }

    /// The parser reads `-3` as negation of `3`; the generator may emit a
    /// negative literal directly.
    fn normalize_negatives(e: &mut Expr) {
        if let ExprKind::Int(n) = e.kind {
            if n < 0 {
                e.kind = ExprKind::Unary { op: UnOp::Neg, expr: Box::new(mk(ExprKind::Int(-n))) };
            }
            return;
        }
        match &mut e.kind {
            ExprKind::Call { args, .. } => args.iter_mut().for_each(normalize_negatives),
            ExprKind::MethodCall { recv, args, .. } => {
                normalize_negatives(recv);
                args.iter_mut().for_each(normalize_negatives);
            }
            ExprKind::Field { base, .. } => normalize_negatives(base),
            ExprKind::Unary { expr, .. } | ExprKind::Cast { expr, .. } | ExprKind::Deref(expr) => normalize_negatives(expr),
            ExprKind::Binary { lhs, rhs, .. } => {
                normalize_negatives(lhs);
                normalize_negatives(rhs);
            }
            _ => {}
        }
    }
}
