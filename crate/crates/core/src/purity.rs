//! Syntactic checks for the three purity levels.

use crate::lang::ast::BinOp;
use crate::lang::ir::*;
use crate::lang::types::{Purity, Ty};
use crate::lang::{Diagnostic, Span};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub span: Span,
    /// Rule letter, `a` to `g`.
    pub rule: char,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "purity rule ({}): {}", self.rule, self.message)
    }
}

impl From<Violation> for Diagnostic {
    fn from(v: Violation) -> Diagnostic {
        Diagnostic::new(v.span, v.to_string())
    }
}

struct Checker<'p> {
    prog: &'p TypedProgram,
    f: &'p FnInst,
    level: Purity,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn report(&mut self, span: Span, rule: char, message: impl Into<String>) {
        self.out.push(Violation { span, rule, message: message.into() });
    }

    fn place_read(&mut self, p: &Place, span: Span) {
        let mut cur = &self.f.locals[p.base].ty;
        for t in &p.tys {
            if matches!(cur, Ty::UnsafeCell(_)) || matches!(t, Ty::UnsafeCell(_)) {
                if self.level < Purity::PureUnstable {
                    let rule = if self.level == Purity::PureValue { 'd' } else { 'e' };
                    self.report(span, rule, "reads the content of an UnsafeCell");
                }
                return;
            }
            cur = t;
        }
    }

    fn expr(&mut self, e: &TExpr) {
        match &e.kind {
            TExprKind::Read(p) | TExprKind::AddrOf(p, _) => self.place_read(p, e.span),
            TExprKind::Call(c, _) => self.callee(*c, e.span),
            TExprKind::BuiltinDeref(_) => match self.level {
                Purity::PureValue => self.report(e.span, 'd', "`deref` reads interiorly mutable memory"),
                Purity::PureMemory => self.report(e.span, 'e', "`deref` reads interiorly mutable memory"),
                Purity::PureUnstable => {}
            },
            TExprKind::Cast(inner) if self.level == Purity::PureValue && inner.ty.is_ref() => {
                self.report(e.span, 'd', "casting a reference to a raw pointer observes an address")
            }
            TExprKind::Binary(BinOp::MemEq, a, _) if self.level == Purity::PureValue && contains_ref(self.prog, &a.ty) => {
                self.report(e.span, 'd', "`====` on references observes addresses")
            }
            _ => {}
        }
        for c in e.children() {
            self.expr(c);
        }
    }

    fn callee(&mut self, c: FnId, span: Span) {
        let g = &self.prog.fns[c];
        match g.purity {
            None => self.report(span, 'g', format!("calls non-pure function `{}`", g.name)),
            Some(l) if l > self.level => self.report(span, 'c', format!("calls `{}` which is {l}, above {}", g.name, self.level)),
            Some(_) => {}
        }
    }

    fn rhs(&mut self, r: &Rhs, span: Span) {
        match r {
            Rhs::Expr(e) => self.expr(e),
            Rhs::Call(c) => {
                self.callee(c.callee, span);
                c.args.iter().for_each(|a| self.expr(a));
            }
        }
    }

    fn block(&mut self, b: &TBlock) {
        for s in &b.stmts {
            match &s.kind {
                TStmtKind::Let { rhs, .. } => self.rhs(rhs, s.span),
                TStmtKind::Assign { target, rhs } => {
                    let local = target.is_var() && !self.f.params.contains(&target.base);
                    if !local {
                        self.report(s.span, 'b', "assignment to a non-local place");
                    }
                    self.rhs(rhs, s.span);
                }
                TStmtKind::Call(c) => {
                    self.callee(c.callee, s.span);
                    c.args.iter().for_each(|a| self.expr(a));
                }
                TStmtKind::Assert(_) => self.report(s.span, 'g', "assertion in a pure function"),
                TStmtKind::Drop(_) => self.report(s.span, 'g', "drop in a pure function"),
                TStmtKind::Panic => self.report(s.span, 'g', "panic in a pure function"),
                TStmtKind::If { cond, then_blk, else_blk } => {
                    self.expr(cond);
                    self.block(then_blk);
                    self.block(else_blk);
                }
                TStmtKind::Match { scrut, arms } => {
                    self.place_read(scrut, s.span);
                    arms.iter().for_each(|a| self.block(&a.body));
                }
                TStmtKind::Return(r) => {
                    if let Some(r) = r {
                        self.rhs(r, s.span);
                    }
                }
            }
        }
    }
}

fn contains_ref(prog: &TypedProgram, ty: &Ty) -> bool {
    let mut found = false;
    ty.walk(&mut |t| found |= t.is_ref());
    found || prog.carries_borrow(ty)
}

/// Checks a bodied function against a purity level. Bodiless (trusted)
/// functions are accepted.
pub fn check_purity_at(prog: &TypedProgram, f: &FnInst, level: Purity) -> Vec<Violation> {
    let mut ck = Checker { prog, f, level, out: vec![] };
    let Some(body) = &f.body else { return vec![] };
    for &p in &f.params {
        let l = &f.locals[p];
        if !l.ty.is_copy() {
            ck.report(l.span, 'a', format!("parameter `{}` of non-copy type {}", l.name, l.ty));
        }
    }
    ck.block(body);
    ck.out.sort();
    ck.out.dedup();
    ck.out
}

/// Checks a function at its declared level; non-pure functions pass.
pub fn check_purity(prog: &TypedProgram, f: &FnInst) -> Vec<Violation> {
    match f.purity {
        Some(l) => check_purity_at(prog, f, l),
        None => vec![],
    }
}

/// Specifications may call functions of any purity level, and nothing else.
pub fn check_spec_purity(prog: &TypedProgram, spec: &TExpr) -> Vec<Violation> {
    let mut out = Vec::new();
    spec.walk(&mut |e| {
        if let TExprKind::Call(c, _) = &e.kind {
            let g = &prog.fns[*c];
            if g.purity.is_none() {
                out.push(Violation { span: e.span, rule: 'g', message: format!("specification calls non-pure function `{}`", g.name) });
            }
        }
    });
    out.sort();
    out
}

/// Every violation in the program: bodies of pure functions, contracts and
/// capability annotations.
pub fn check_program(prog: &TypedProgram) -> Vec<Violation> {
    let mut out = Vec::new();
    for f in &prog.fns {
        out.extend(check_purity(prog, f));
        for e in f.requires.iter().chain(&f.ensures) {
            out.extend(check_spec_purity(prog, e));
        }
    }
    for adt in prog.adts.values() {
        for a in &adt.annotations {
            for e in a.condition.iter().chain([&a.target]) {
                out.extend(check_spec_purity(prog, e));
            }
        }
    }
    out.sort();
    out.dedup();
    out
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

    fn fn_of<'p>(p: &'p TypedProgram, name: &str) -> &'p FnInst {
        &p.fns[p.find_fn(name).unwrap()]
    }

    fn rules(v: &[Violation]) -> Vec<char> {
        v.iter().map(|v| v.rule).collect()
    }

    #[test]
    fn deref_in_pure_value_body() {
        let p = program("#[pure] fn f(p: *mut i32) -> i32 { deref(p) }");
        assert_eq!(rules(&check_purity(&p, fn_of(&p, "f"))), vec!['d']);
    }

    #[test]
    fn deref_is_fine_when_unstable() {
        let p = program("#[pure_unstable] fn f(p: *mut i32) -> i32 { deref(p) }");
        assert!(check_purity(&p, fn_of(&p, "f")).is_empty());
        let p = program("#[pure_memory] fn f(p: *mut i32) -> i32 { deref(p) }");
        assert_eq!(rules(&check_purity(&p, fn_of(&p, "f"))), vec!['e']);
    }

    #[test]
    fn mutable_reference_parameter() {
        let p = program("#[pure] fn f(x: &mut i32) -> i32 { *x }");
        assert_eq!(rules(&check_purity(&p, fn_of(&p, "f"))), vec!['a']);
    }

    #[test]
    fn constant_function_passes_at_every_level() {
        for attr in ["pure", "pure_memory", "pure_unstable"] {
            let p = program(&format!("#[{attr}] fn f() -> i32 {{ 1 }}"));
            assert!(check_purity(&p, fn_of(&p, "f")).is_empty());
        }
    }

    #[test]
    fn callee_level_must_not_exceed_caller() {
        let p = program("#[pure] fn f(c: &Cell<i32>) -> i32 { c.get() }");
        assert_eq!(rules(&check_purity(&p, fn_of(&p, "f"))), vec!['c']);
        let p = program("#[pure_unstable] fn f(c: &Cell<i32>) -> i32 { c.get() }");
        assert!(check_purity(&p, fn_of(&p, "f")).is_empty());
    }

    #[test]
    fn reference_to_pointer_cast_observes_addresses() {
        let p = program("#[pure] fn f(x: &i32) -> *const i32 { x as *const i32 }");
        assert_eq!(rules(&check_purity(&p, fn_of(&p, "f"))), vec!['d']);
        let p = program("#[pure_memory] fn f(x: &i32) -> *const i32 { x as *const i32 }");
        assert!(check_purity(&p, fn_of(&p, "f")).is_empty());
    }

    #[test]
    fn assignment_to_parameter_is_not_local() {
        let p = program("#[pure] fn f(x: i32) -> i32 { x = 2; x }");
        assert_eq!(rules(&check_purity(&p, fn_of(&p, "f"))), vec!['b']);
        let p = program("#[pure] fn f(x: i32) -> i32 { let mut y = x; y = y + 1; y }");
        assert!(check_purity(&p, fn_of(&p, "f")).is_empty());
    }

    #[test]
    fn corpus_pure_bodies_pass() {
        let p = typecheck(&corpus::all_sources().map(|(n, t)| SourceFile::user(n, t)).collect::<Vec<_>>()).unwrap();
        assert_eq!(check_program(&p), vec![]);
    }

    #[test]
    fn specs_use_only_pure_functions() {
        let p = program("fn g() -> i32; #[ensures(g() == 1)] fn f();");
        let f = fn_of(&p, "f");
        assert_eq!(check_spec_purity(&p, &f.ensures[0]).len(), 1);
        // deref and a pure_memory call in a Cell contract
        let p = program("fn h(c: &Cell<i32>, a: &Arc<i32>) { let v = c.get(); let n = a.strong_count(); }");
        let get = p.fns.iter().find(|f| f.name == "Cell<i32>::get").unwrap();
        assert!(check_spec_purity(&p, &get.ensures[0]).is_empty());
        let (_, arc) = p.adts.iter().find(|(t, _)| t.to_string() == "Arc<i32>").unwrap();
        assert!(arc.annotations.iter().any(|a| a.condition.is_some()));
        for ann in &arc.annotations {
            assert!(ann.condition.iter().all(|c| check_spec_purity(&p, c).is_empty()));
        }
    }

    const SNIPPETS: &[&str] = &[
        "let a = 1;",
        "let b = deref(p);",
        "let m = x + 1;",
        "let n = c.get();",
        "let e = c.as_ptr();",
        "let g = r as *const i32;",
        "let h = *r;",
        "let mut k = 0; k = 3;",
    ];

    proptest! {
        #[test]
        fn accepted_bodies_stay_accepted_at_higher_levels(mask in 0u32..(1 << SNIPPETS.len())) {
            let body: String = SNIPPETS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| *s).collect();
            let src = format!("#[pure] fn f(p: *mut i32, x: i32, c: &Cell<i32>, r: &i32) -> i32 {{ {body} 0 }}");
            let p = program(&src);
            let f = fn_of(&p, "f");
            let levels = [Purity::PureValue, Purity::PureMemory, Purity::PureUnstable];
            for (i, &l) in levels.iter().enumerate() {
                if check_purity_at(&p, f, l).is_empty() {
                    for &h in &levels[i..] {
                        prop_assert!(check_purity_at(&p, f, h).is_empty());
                    }
                }
            }
            let v = check_purity_at(&p, f, Purity::PureValue);
            let mut sorted = v.clone();
            sorted.sort();
            prop_assert_eq!(v, sorted);
        }
    }
}
