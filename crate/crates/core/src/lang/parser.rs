use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{Diagnostic, Span};
use crate::capability::CapKind;

type PResult<T> = Result<T, Diagnostic>;

/// Parses a whole `.cap` source file.
pub fn parse_program(src: &str) -> PResult<Program> {
    parse_file(src, 0)
}

/// Like [`parse_program`], tagging every span with a file index.
pub fn parse_file(src: &str, file: u16) -> PResult<Program> {
    let mut toks = tokenize(src).map_err(|d| Diagnostic { span: d.span.in_file(file), ..d })?;
    for t in &mut toks {
        t.span = t.span.in_file(file);
    }
    let mut p = Parser { toks, pos: 0 };
    let mut items = Vec::new();
    while !p.at(&Tok::Eof) {
        items.push(p.item()?);
    }
    Ok(Program { items })
}

/// Parses a single expression (used by tests and tooling).
pub fn parse_expr(src: &str) -> PResult<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    p.expect(&Tok::Eof)?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const LOOP_WORDS: &[&str] = &["loop", "while", "for"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.at_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::new(self.span(), msg))
    }

    fn expect(&mut self, t: &Tok) -> PResult<Span> {
        if self.at(t) {
            Ok(self.bump().span)
        } else {
            self.err(format!("expected {}, found {}", t.describe(), self.peek().describe()))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<Span> {
        if self.at_word(w) {
            Ok(self.bump().span)
        } else {
            self.err(format!("expected `{w}`, found {}", self.peek().describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {}", other.describe())),
        }
    }

    // ---- items ----

    fn item(&mut self) -> PResult<Item> {
        let attrs = self.attrs()?;
        let span = self.span();
        self.eat_word("pub");
        if self.eat_word("struct") {
            let name = self.ident()?;
            let generics = self.generic_params()?;
            let mut fields = Vec::new();
            if !self.eat(&Tok::Semi) {
                self.expect(&Tok::LBrace)?;
                while !self.at(&Tok::RBrace) {
                    self.eat_word("pub");
                    let f = self.ident()?;
                    self.expect(&Tok::Colon)?;
                    fields.push((f, self.ty()?));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(&Tok::RBrace)?;
            }
            return Ok(Item::Struct(StructDecl { attrs, name, generics, fields, span }));
        }
        if self.eat_word("enum") {
            let name = self.ident()?;
            let generics = self.generic_params()?;
            self.expect(&Tok::LBrace)?;
            let mut variants = Vec::new();
            while !self.at(&Tok::RBrace) {
                let v = self.ident()?;
                let payload = if self.eat(&Tok::LParen) {
                    let t = self.ty()?;
                    self.expect(&Tok::RParen)?;
                    Some(t)
                } else {
                    None
                };
                variants.push((v, payload));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::RBrace)?;
            return Ok(Item::Enum(EnumDecl { attrs, name, generics, variants, span }));
        }
        if self.eat_word("impl") {
            let generics = self.generic_params()?;
            let self_ty = self.ty()?;
            self.expect(&Tok::LBrace)?;
            let mut fns = Vec::new();
            while !self.at(&Tok::RBrace) {
                let fattrs = self.attrs()?;
                let fspan = self.span();
                self.eat_word("pub");
                self.expect_word("fn")?;
                fns.push(self.fn_rest(fattrs, fspan)?);
            }
            self.expect(&Tok::RBrace)?;
            return Ok(Item::Impl(ImplBlock { attrs, generics, self_ty, fns, span }));
        }
        if self.eat_word("fn") {
            return Ok(Item::Fn(self.fn_rest(attrs, span)?));
        }
        self.err(format!("expected `struct`, `enum`, `impl` or `fn`, found {}", self.peek().describe()))
    }

    fn generic_params(&mut self) -> PResult<Vec<String>> {
        let mut gs = Vec::new();
        if self.eat(&Tok::Lt) {
            while !self.at(&Tok::Gt) {
                gs.push(self.ident()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::Gt)?;
        }
        Ok(gs)
    }

    fn attrs(&mut self) -> PResult<Vec<Attr>> {
        let mut out = Vec::new();
        while self.at(&Tok::Hash) {
            let span = self.bump().span;
            self.expect(&Tok::LBracket)?;
            let name = self.ident()?;
            let kind = match name.as_str() {
                "capable" => {
                    self.expect(&Tok::LParen)?;
                    let a = self.cap_annotation()?;
                    self.expect(&Tok::RParen)?;
                    AttrKind::Capable(a)
                }
                "requires" | "ensures" => {
                    self.expect(&Tok::LParen)?;
                    let e = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    if name == "requires" {
                        AttrKind::Requires(e)
                    } else {
                        AttrKind::Ensures(e)
                    }
                }
                "pure" => AttrKind::Pure,
                "pure_memory" => AttrKind::PureMemory,
                "pure_unstable" => AttrKind::PureUnstable,
                "ghost_fn" => AttrKind::Ghost,
                "thread_shared" => AttrKind::ThreadShared,
                "borrows" => AttrKind::Borrows,
                "extern_spec" => AttrKind::ExternSpec,
                other => return Err(Diagnostic::new(span, format!("unknown attribute `{other}`"))),
            };
            self.expect(&Tok::RBracket)?;
            out.push(Attr { kind, span });
        }
        Ok(out)
    }

    fn cap_annotation(&mut self) -> PResult<CapAnnotation> {
        self.expect(&Tok::Amp)?;
        let receiver = if self.eat_word("mut") { Receiver::Mut } else { Receiver::Shared };
        self.expect_word("self")?;
        let condition = if self.eat_word("if") { Some(self.expr()?) } else { None };
        self.expect(&Tok::FatArrow)?;
        let kspan = self.span();
        let kname = self.ident()?;
        let kind = CapKind::from_annotation_name(&kname)
            .ok_or_else(|| Diagnostic::new(kspan, format!("unknown capability kind `{kname}`")))?;
        self.expect(&Tok::LParen)?;
        let target = self.expr()?;
        self.expect(&Tok::RParen)?;
        Ok(CapAnnotation { receiver, condition, kind, target })
    }

    fn fn_rest(&mut self, attrs: Vec<Attr>, span: Span) -> PResult<FnDecl> {
        let name = self.ident()?;
        let generics = self.generic_params()?;
        self.expect(&Tok::LParen)?;
        let mut params = Vec::new();
        while !self.at(&Tok::RParen) {
            params.push(self.param()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RParen)?;
        let ret = if self.eat(&Tok::Arrow) { Some(self.ty()?) } else { None };
        let body = if self.eat(&Tok::Semi) { None } else { Some(self.block()?) };
        Ok(FnDecl { attrs, name, generics, params, ret, body, span })
    }

    fn param(&mut self) -> PResult<Param> {
        let span = self.span();
        if self.at(&Tok::Amp) && matches!(self.peek_at(1), Tok::Ident(s) if s == "self" || s == "mut") {
            let save = self.pos;
            self.bump();
            let m = self.eat_word("mut");
            if self.eat_word("self") {
                let sp = if m { SelfParam::Mut } else { SelfParam::Shared };
                return Ok(Param { name: "self".into(), mutable: false, ty: ParamTy::SelfParam(sp), span });
            }
            self.pos = save;
        }
        let mutable = self.eat_word("mut");
        let name = self.ident()?;
        if name == "self" {
            return Ok(Param { name, mutable, ty: ParamTy::SelfParam(SelfParam::Value), span });
        }
        self.expect(&Tok::Colon)?;
        let ty = self.ty()?;
        Ok(Param { name, mutable, ty: ParamTy::Typed(ty), span })
    }

    fn ty(&mut self) -> PResult<TypeSyn> {
        if self.eat(&Tok::Amp) {
            let mutable = self.eat_word("mut");
            return Ok(TypeSyn::Ref { mutable, inner: Box::new(self.ty()?) });
        }
        if self.at(&Tok::AndAnd) {
            self.bump();
            let mutable = self.eat_word("mut");
            let inner = TypeSyn::Ref { mutable, inner: Box::new(self.ty()?) };
            return Ok(TypeSyn::Ref { mutable: false, inner: Box::new(inner) });
        }
        if self.eat(&Tok::Star) {
            let mutable = if self.eat_word("mut") {
                true
            } else {
                self.expect_word("const")?;
                false
            };
            return Ok(TypeSyn::Ptr { mutable, inner: Box::new(self.ty()?) });
        }
        if self.eat(&Tok::Underscore) {
            return Ok(TypeSyn::Infer);
        }
        if self.eat(&Tok::LParen) {
            let mut elems = Vec::new();
            while !self.at(&Tok::RParen) {
                elems.push(self.ty()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::RParen)?;
            return Ok(TypeSyn::Tuple(elems));
        }
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.eat(&Tok::Lt) {
            while !self.at(&Tok::Gt) {
                args.push(self.ty()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::Gt)?;
        }
        Ok(TypeSyn::Named { name, args })
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Block> {
        let span = self.expect(&Tok::LBrace)?;
        let mut stmts = Vec::new();
        let mut tail = None;
        while !self.at(&Tok::RBrace) {
            if let Tok::Ident(w) = self.peek() {
                if LOOP_WORDS.contains(&w.as_str()) {
                    return self.err(format!("`{w}` loops are not supported: function bodies must be loop-free"));
                }
            }
            let sspan = self.span();
            if self.eat_word("let") {
                stmts.push(self.let_rest(sspan)?);
                continue;
            }
            if self.at_word("return") {
                self.bump();
                let e = if self.at(&Tok::Semi) || self.at(&Tok::RBrace) { None } else { Some(self.expr()?) };
                if !self.eat(&Tok::Semi) && !self.at(&Tok::RBrace) {
                    return self.err("expected `;` after return");
                }
                stmts.push(Stmt { kind: StmtKind::Return(e), span: sspan });
                continue;
            }
            if self.at_word("assert") && self.peek_at(1) == &Tok::Bang {
                self.bump();
                self.bump();
                self.expect(&Tok::LParen)?;
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Semi)?;
                stmts.push(Stmt { kind: StmtKind::Assert(e), span: sspan });
                continue;
            }
            if self.at_word("panic") && self.peek_at(1) == &Tok::Bang {
                self.bump();
                self.bump();
                self.expect(&Tok::LParen)?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Semi)?;
                stmts.push(Stmt { kind: StmtKind::Panic, span: sspan });
                continue;
            }
            if self.at_word("drop") && self.peek_at(1) == &Tok::LParen {
                self.bump();
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Semi)?;
                stmts.push(Stmt { kind: StmtKind::Drop(e), span: sspan });
                continue;
            }
            let e = self.expr()?;
            if self.eat(&Tok::Eq) {
                let value = self.expr()?;
                self.expect(&Tok::Semi)?;
                stmts.push(Stmt { kind: StmtKind::Assign { target: e, value }, span: sspan });
                continue;
            }
            if self.eat(&Tok::Semi) {
                stmts.push(Stmt { kind: StmtKind::Expr(e), span: sspan });
                continue;
            }
            if self.at(&Tok::RBrace) {
                tail = Some(Box::new(e));
                break;
            }
            let block_like = matches!(e.kind, ExprKind::If { .. } | ExprKind::IfLet { .. } | ExprKind::Match { .. } | ExprKind::Block(_));
            if block_like {
                stmts.push(Stmt { kind: StmtKind::Expr(e), span: sspan });
                continue;
            }
            return self.err(format!("expected `;`, found {}", self.peek().describe()));
        }
        self.expect(&Tok::RBrace)?;
        Ok(Block { stmts, tail, span })
    }

    fn let_rest(&mut self, span: Span) -> PResult<Stmt> {
        let pat = self.pattern()?;
        let ty = if self.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
        self.expect(&Tok::Eq)?;
        let init = self.expr()?;
        let else_blk = if self.eat_word("else") { Some(self.block()?) } else { None };
        self.expect(&Tok::Semi)?;
        Ok(Stmt { kind: StmtKind::Let { pat, ty, init, else_blk }, span })
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        if self.eat(&Tok::Underscore) {
            return Ok(Pattern::Wild);
        }
        let mutable = self.eat_word("mut");
        let mut name = self.ident()?;
        if mutable {
            return Ok(Pattern::Bind { name, mutable });
        }
        while self.eat(&Tok::PathSep) {
            name = self.ident()?;
        }
        if self.eat(&Tok::LParen) {
            let sub = self.pattern()?;
            self.expect(&Tok::RParen)?;
            return Ok(Pattern::Variant { name, sub: Some(Box::new(sub)) });
        }
        if name.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            return Ok(Pattern::Variant { name, sub: None });
        }
        Ok(Pattern::Bind { name, mutable: false })
    }

    // ---- expressions ----

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Implies => BinOp::Implies,
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::MemEq => BinOp::MemEq,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min {
                break;
            }
            let span = lhs.span;
            self.bump();
            // `==>` is right associative, comparisons do not chain.
            let next = if op == BinOp::Implies { prec } else { prec + 1 };
            let rhs = self.binary(next)?;
            lhs = Expr { kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span };
            if prec == 4 && self.peek_binop().is_some_and(|o| o.precedence() == 4) {
                return self.err("comparison operators cannot be chained; add parentheses");
            }
        }
        Ok(lhs)
    }

    /// Prefix operators bind tighter than `as`.
    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let mut e = self.prefix()?;
        while self.at_word("as") {
            self.bump();
            let ty = self.ty()?;
            e = Expr { kind: ExprKind::Cast { expr: Box::new(e), ty }, span };
        }
        Ok(e)
    }

    fn prefix(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat(&Tok::Bang) {
            let e = self.prefix()?;
            return Ok(Expr { kind: ExprKind::Unary { op: UnOp::Not, expr: Box::new(e) }, span });
        }
        if self.eat(&Tok::Minus) {
            let e = self.prefix()?;
            return Ok(Expr { kind: ExprKind::Unary { op: UnOp::Neg, expr: Box::new(e) }, span });
        }
        if self.eat(&Tok::Star) {
            let e = self.prefix()?;
            return Ok(Expr { kind: ExprKind::Deref(Box::new(e)), span });
        }
        if self.eat(&Tok::Amp) {
            let mutable = self.eat_word("mut");
            let e = self.prefix()?;
            return Ok(Expr { kind: ExprKind::AddrOf { mutable, expr: Box::new(e) }, span });
        }
        if self.eat(&Tok::AndAnd) {
            let mutable = self.eat_word("mut");
            let e = self.prefix()?;
            let inner = Expr { kind: ExprKind::AddrOf { mutable, expr: Box::new(e) }, span };
            return Ok(Expr { kind: ExprKind::AddrOf { mutable: false, expr: Box::new(inner) }, span });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.at(&Tok::Dot) {
                self.bump();
                let span = e.span;
                match self.peek().clone() {
                    Tok::Int(n) => {
                        self.bump();
                        e = Expr { kind: ExprKind::TupleField { base: Box::new(e), index: n as usize }, span };
                    }
                    Tok::Ident(name) => {
                        self.bump();
                        if self.at(&Tok::LParen) {
                            let args = self.call_args()?;
                            e = Expr { kind: ExprKind::MethodCall { recv: Box::new(e), method: name, args }, span };
                        } else {
                            e = Expr { kind: ExprKind::Field { base: Box::new(e), name }, span };
                        }
                    }
                    other => return self.err(format!("expected field or method name, found {}", other.describe())),
                }
                continue;
            }
            break;
        }
        Ok(e)
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        while !self.at(&Tok::RParen) {
            args.push(self.expr()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RParen)?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Int(n), span })
            }
            Tok::LParen => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    return Ok(Expr { kind: ExprKind::Unit, span });
                }
                let first = self.expr()?;
                if self.eat(&Tok::Comma) {
                    let mut elems = vec![first];
                    while !self.at(&Tok::RParen) {
                        elems.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(&Tok::RParen)?;
                    return Ok(Expr { kind: ExprKind::Tuple(elems), span });
                }
                self.expect(&Tok::RParen)?;
                Ok(first)
            }
            Tok::LBrace => {
                let b = self.block()?;
                Ok(Expr { kind: ExprKind::Block(b), span })
            }
            Tok::Ident(w) => match w.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr { kind: ExprKind::Bool(w == "true"), span })
                }
                "if" => self.if_expr(),
                "match" => self.match_expr(),
                "loop" | "while" | "for" => self.err(format!("`{w}` loops are not supported: function bodies must be loop-free")),
                _ => {
                    self.bump();
                    let mut path = vec![w];
                    while self.at(&Tok::PathSep) {
                        self.bump();
                        if self.at(&Tok::Lt) {
                            // turbofish arguments are accepted and ignored
                            self.bump();
                            while !self.at(&Tok::Gt) {
                                self.ty()?;
                                if !self.eat(&Tok::Comma) {
                                    break;
                                }
                            }
                            self.expect(&Tok::Gt)?;
                            continue;
                        }
                        path.push(self.ident()?);
                    }
                    if self.at(&Tok::LParen) {
                        let args = self.call_args()?;
                        return Ok(Expr { kind: ExprKind::Call { path, args }, span });
                    }
                    if path.len() == 1 {
                        Ok(Expr { kind: ExprKind::Var(path.pop().unwrap()), span })
                    } else {
                        Ok(Expr { kind: ExprKind::Path(path), span })
                    }
                }
            },
            other => self.err(format!("expected expression, found {}", other.describe())),
        }
    }

    fn if_expr(&mut self) -> PResult<Expr> {
        let span = self.expect_word("if")?;
        if self.eat_word("let") {
            let pat = self.pattern()?;
            self.expect(&Tok::Eq)?;
            let scrut = self.expr()?;
            let then_blk = self.block()?;
            self.expect_word("else")?;
            let else_blk = self.else_block()?;
            return Ok(Expr { kind: ExprKind::IfLet { pat, scrut: Box::new(scrut), then_blk, else_blk }, span });
        }
        let cond = self.expr()?;
        let then_blk = self.block()?;
        let else_blk = if self.eat_word("else") { Some(self.else_block()?) } else { None };
        Ok(Expr { kind: ExprKind::If { cond: Box::new(cond), then_blk, else_blk }, span })
    }

    fn else_block(&mut self) -> PResult<Block> {
        if self.at_word("if") {
            let span = self.span();
            let e = self.if_expr()?;
            return Ok(Block { stmts: vec![], tail: Some(Box::new(e)), span });
        }
        self.block()
    }

    fn match_expr(&mut self) -> PResult<Expr> {
        let span = self.expect_word("match")?;
        let scrut = self.expr()?;
        self.expect(&Tok::LBrace)?;
        let mut arms = Vec::new();
        while !self.at(&Tok::RBrace) {
            let pat = self.pattern()?;
            self.expect(&Tok::FatArrow)?;
            let body = self.expr()?;
            let was_block = matches!(body.kind, ExprKind::Block(_));
            arms.push((pat, body));
            if !self.eat(&Tok::Comma) && !was_block {
                break;
            }
        }
        self.expect(&Tok::RBrace)?;
        Ok(Expr { kind: ExprKind::Match { scrut: Box::new(scrut), arms }, span })
    }
}

impl CapKind {
    pub fn from_annotation_name(s: &str) -> Option<CapKind> {
        CapKind::ALL.into_iter().find(|k| k.annotation_name() == s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CELL_CLIENT: &str = r#"
fn cell_client(c: &Cell<i32>) {
    let before = c.get();
    c.set(before + 1);
    let after = c.get();
    assert!(before + 1 == after);
}
"#;

    #[test]
    fn cell_client_shape() {
        let p = parse_program(CELL_CLIENT).unwrap();
        assert_eq!(p.items.len(), 1);
        let Item::Fn(f) = &p.items[0] else { panic!() };
        let body = f.body.as_ref().unwrap();
        assert_eq!(body.stmts.len(), 4);
        let asserts = body.stmts.iter().filter(|s| matches!(s.kind, StmtKind::Assert(_))).count();
        assert_eq!(asserts, 1);
    }

    #[test]
    fn empty_file_has_no_items() {
        assert!(parse_program("").unwrap().items.is_empty());
        assert!(parse_program("  // only a comment\n").unwrap().items.is_empty());
    }

    #[test]
    fn conditional_capability_annotation() {
        let p = parse_program("#[capable(&self if self.n() == 1 => local(self.p()))]\nstruct S { x: i32 }").unwrap();
        let Item::Struct(s) = &p.items[0] else { panic!() };
        let AttrKind::Capable(a) = &s.attrs[0].kind else { panic!() };
        assert_eq!(a.receiver, Receiver::Shared);
        assert_eq!(a.kind, CapKind::Local);
        let cond = a.condition.as_ref().unwrap();
        let ExprKind::Binary { op: BinOp::Eq, lhs, .. } = &cond.kind else { panic!("{cond:?}") };
        assert!(matches!(&lhs.kind, ExprKind::MethodCall { method, .. } if method == "n"));
        assert!(matches!(&a.target.kind, ExprKind::MethodCall { method, .. } if method == "p"));
    }

    #[test]
    fn loops_are_rejected_with_a_position() {
        let e = parse_program("fn f() {\n    while true { }\n}").unwrap_err();
        assert_eq!(e.span.line, 2);
        assert!(e.message.contains("loop"));
    }

    #[test]
    fn let_else_and_casts() {
        let src = "fn f(x: &RefCell<i32>) { let Ok(a) = x.try_borrow() else { return; }; \
                   assert!(x.as_ptr() as *const _ != a.deref() as *const _); }";
        let p = parse_program(src).unwrap();
        let Item::Fn(f) = &p.items[0] else { panic!() };
        let b = f.body.as_ref().unwrap();
        assert!(matches!(&b.stmts[0].kind, StmtKind::Let { else_blk: Some(_), pat: Pattern::Variant { .. }, .. }));
    }

    #[test]
    fn implication_is_right_associative() {
        let e = parse_expr("a ==> b ==> c").unwrap();
        let ExprKind::Binary { op: BinOp::Implies, rhs, .. } = e.kind else { panic!() };
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinOp::Implies, .. }));
    }

    #[test]
    fn unknown_capability_kind() {
        let e = parse_program("#[capable(&self => shiny(self.p()))] struct S {}").unwrap_err();
        assert!(e.message.contains("shiny"));
    }
}
