//! Name resolution, type checking, monomorphization and desugaring into
//! [`TypedProgram`].

use super::ast::*;
use super::ir::*;
use super::types::{Purity, Ty};
use super::{parse_file, Diagnostic, Span};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

type TResult<T> = Result<T, Diagnostic>;

#[derive(Debug, Clone)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
    /// Bundled library specification (not a verification target).
    pub prelude: bool,
}

impl SourceFile {
    pub fn user(name: impl Into<String>, text: impl Into<String>) -> SourceFile {
        SourceFile { name: name.into(), text: text.into(), prelude: false }
    }
}

const INT_NAMES: &[&str] = &["i8", "i16", "i32", "i64", "isize", "u8", "u16", "u32", "u64", "usize"];

/// Parses, resolves and type checks all files as one program.
pub fn typecheck(files: &[SourceFile]) -> TResult<TypedProgram> {
    let mut programs = Vec::new();
    for (i, f) in files.iter().enumerate() {
        programs.push(parse_file(&f.text, i as u16)?);
    }
    typecheck_parsed(&programs, files)
}

pub fn typecheck_parsed(programs: &[Program], files: &[SourceFile]) -> TResult<TypedProgram> {
    let decls = Decls::collect(programs, files)?;
    let mut ck = Checker {
        d: &decls,
        prog: TypedProgram { file_names: files.iter().map(|f| f.name.clone()).collect(), ..Default::default() },
        fn_index: HashMap::new(),
        fn_queue: VecDeque::new(),
        adt_queue: VecDeque::new(),
        fn_decl_of: Vec::new(),
    };
    ck.run()?;
    Ok(ck.prog)
}

// ---------------------------------------------------------------------------
// declarations

enum AdtShape<'a> {
    Struct(&'a [(String, TypeSyn)]),
    Enum(&'a [(String, Option<TypeSyn>)]),
}

struct AdtDecl<'a> {
    generics: Vec<String>,
    shape: AdtShape<'a>,
    annotations: Vec<AnnDecl<'a>>,
    thread_shared: bool,
    borrows: bool,
    span: Span,
}

struct AnnDecl<'a> {
    ann: &'a CapAnnotation,
    span: Span,
    generics: Vec<String>,
    self_ty: TypeSyn,
}

struct FnDeclInfo<'a> {
    decl: &'a FnDecl,
    owner: Option<TypeSyn>,
    impl_generics: Vec<String>,
    client: bool,
}

struct Decls<'a> {
    adts: BTreeMap<String, AdtDecl<'a>>,
    fns: Vec<FnDeclInfo<'a>>,
    free_fns: HashMap<String, usize>,
    methods: HashMap<(String, String), usize>,
    variants: HashMap<String, (String, usize)>,
}

fn type_head(t: &TypeSyn) -> Option<&str> {
    match t {
        TypeSyn::Named { name, .. } => Some(name),
        _ => None,
    }
}

impl<'a> Decls<'a> {
    fn collect(programs: &'a [Program], files: &[SourceFile]) -> TResult<Decls<'a>> {
        let mut d = Decls {
            adts: BTreeMap::new(),
            fns: Vec::new(),
            free_fns: HashMap::new(),
            methods: HashMap::new(),
            variants: HashMap::new(),
        };
        let mut impls = Vec::new();
        for (fi, p) in programs.iter().enumerate() {
            let client = !files[fi].prelude;
            for item in &p.items {
                match item {
                    Item::Struct(s) => {
                        d.add_adt(&s.name, &s.generics, AdtShape::Struct(&s.fields), &s.attrs, s.span)?;
                    }
                    Item::Enum(e) => {
                        if e.variants.len() > 2 {
                            return Err(Diagnostic::new(e.span, "enums may have at most two variants"));
                        }
                        d.add_adt(&e.name, &e.generics, AdtShape::Enum(&e.variants), &e.attrs, e.span)?;
                        for (i, (v, _)) in e.variants.iter().enumerate() {
                            if d.variants.insert(v.clone(), (e.name.clone(), i)).is_some() {
                                return Err(Diagnostic::new(e.span, format!("variant name `{v}` is declared twice")));
                            }
                        }
                    }
                    Item::Impl(b) => impls.push((b, client)),
                    Item::Fn(f) => {
                        let idx = d.fns.len();
                        d.fns.push(FnDeclInfo { decl: f, owner: None, impl_generics: vec![], client });
                        if d.free_fns.insert(f.name.clone(), idx).is_some() {
                            return Err(Diagnostic::new(f.span, format!("function `{}` is defined twice", f.name)));
                        }
                    }
                }
            }
        }
        for (b, client) in impls {
            let Some(owner) = type_head(&b.self_ty) else {
                return Err(Diagnostic::new(b.span, "impl blocks must name a struct or enum"));
            };
            if owner != "UnsafeCell" && !d.adts.contains_key(owner) {
                return Err(Diagnostic::new(b.span, format!("unresolved type `{owner}`")));
            }
            for a in &b.attrs {
                match &a.kind {
                    AttrKind::Capable(c) => {
                        let adt = d.adts.get_mut(owner).ok_or_else(|| Diagnostic::new(a.span, "capabilities on UnsafeCell are built in"))?;
                        adt.annotations.push(AnnDecl { ann: c, span: a.span, generics: b.generics.clone(), self_ty: b.self_ty.clone() });
                    }
                    AttrKind::ThreadShared => {
                        if let Some(adt) = d.adts.get_mut(owner) {
                            adt.thread_shared = true;
                        }
                    }
                    AttrKind::Borrows => {
                        if let Some(adt) = d.adts.get_mut(owner) {
                            adt.borrows = true;
                        }
                    }
                    AttrKind::ExternSpec => {}
                    _ => return Err(Diagnostic::new(a.span, "only `capable`, `thread_shared` and `borrows` attributes apply to impl blocks")),
                }
            }
            for f in &b.fns {
                let idx = d.fns.len();
                d.fns.push(FnDeclInfo { decl: f, owner: Some(b.self_ty.clone()), impl_generics: b.generics.clone(), client });
                if d.methods.insert((owner.to_string(), f.name.clone()), idx).is_some() {
                    return Err(Diagnostic::new(f.span, format!("method `{owner}::{}` is defined twice", f.name)));
                }
            }
        }
        Ok(d)
    }

    fn add_adt(&mut self, name: &str, generics: &[String], shape: AdtShape<'a>, attrs: &'a [Attr], span: Span) -> TResult<()> {
        if name == "UnsafeCell" || INT_NAMES.contains(&name) || name == "bool" {
            return Err(Diagnostic::new(span, format!("`{name}` is a built-in type")));
        }
        let mut adt = AdtDecl { generics: generics.to_vec(), shape, annotations: vec![], thread_shared: false, borrows: false, span };
        let self_ty = TypeSyn::Named {
            name: name.to_string(),
            args: generics.iter().map(|g| TypeSyn::Named { name: g.clone(), args: vec![] }).collect(),
        };
        for a in attrs {
            match &a.kind {
                AttrKind::Capable(c) => {
                    adt.annotations.push(AnnDecl { ann: c, span: a.span, generics: generics.to_vec(), self_ty: self_ty.clone() })
                }
                AttrKind::ThreadShared => adt.thread_shared = true,
                AttrKind::Borrows => adt.borrows = true,
                AttrKind::ExternSpec => {}
                _ => return Err(Diagnostic::new(a.span, "attribute not allowed on a type declaration")),
            }
        }
        if self.adts.insert(name.to_string(), adt).is_some() {
            return Err(Diagnostic::new(span, format!("type `{name}` is defined twice")));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// checker

struct Checker<'a> {
    d: &'a Decls<'a>,
    prog: TypedProgram,
    fn_index: HashMap<(usize, Vec<Ty>), FnId>,
    fn_queue: VecDeque<(FnId, BTreeMap<String, Ty>)>,
    adt_queue: VecDeque<Ty>,
    fn_decl_of: Vec<usize>,
}

#[derive(Clone, Default)]
struct TyEnv {
    map: BTreeMap<String, Ty>,
    self_ty: Option<Ty>,
}

/// Unifies a template type (may contain parameters) with a concrete one.
/// `&mut T` unifies with a `&T` template and `*mut T` with `*const T`.
fn unify(tpl: &Ty, actual: &Ty, map: &mut BTreeMap<String, Ty>) -> bool {
    match (tpl, actual) {
        (Ty::Param(p), _) => match map.get(p) {
            Some(bound) => bound == actual,
            None => {
                map.insert(p.clone(), actual.clone());
                true
            }
        },
        (Ty::Int, Ty::Int) | (Ty::Bool, Ty::Bool) => true,
        (Ty::SharedRef(a), Ty::SharedRef(b) | Ty::MutRef(b)) | (Ty::MutRef(a), Ty::MutRef(b)) => unify(a, b, map),
        (Ty::RawPtr(a, false), Ty::RawPtr(b, _)) | (Ty::RawPtr(a, true), Ty::RawPtr(b, true)) => unify(a, b, map),
        (Ty::UnsafeCell(a), Ty::UnsafeCell(b)) => unify(a, b, map),
        (Ty::Struct(n1, a1), Ty::Struct(n2, a2)) | (Ty::Enum(n1, a1), Ty::Enum(n2, a2)) => {
            n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| unify(x, y, map))
        }
        (Ty::Tuple(a1), Ty::Tuple(a2)) => a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| unify(x, y, map)),
        _ => false,
    }
}

impl<'a> Checker<'a> {
    fn run(&mut self) -> TResult<()> {
        // every non-generic function is instantiated up front
        for (i, f) in self.d.fns.iter().enumerate() {
            let generic = !f.decl.generics.is_empty() || !f.impl_generics.is_empty();
            if !generic {
                self.instantiate_fn(i, BTreeMap::new(), f.decl.span)?;
            }
        }
        for (name, adt) in &self.d.adts {
            if adt.generics.is_empty() {
                let ty = self.adt_ty(name, vec![]);
                self.ensure_adt(&ty, adt.span)?;
            }
        }
        loop {
            if let Some(ty) = self.adt_queue.pop_front() {
                self.check_annotations(&ty)?;
                continue;
            }
            if let Some((id, subst)) = self.fn_queue.pop_front() {
                self.check_fn(id, subst)?;
                continue;
            }
            break;
        }
        self.check_recursion()?;
        Ok(())
    }

    fn adt_ty(&self, name: &str, args: Vec<Ty>) -> Ty {
        match self.d.adts.get(name).map(|a| &a.shape) {
            Some(AdtShape::Enum(_)) => Ty::Enum(name.to_string(), args),
            _ => Ty::Struct(name.to_string(), args),
        }
    }

    fn resolve(&mut self, t: &TypeSyn, env: &TyEnv, span: Span) -> TResult<Ty> {
        let ty = self.resolve_template(t, env, span)?;
        self.ensure_types_in(&ty, span)?;
        Ok(ty)
    }

    /// Resolves without registering ADT instances (the result may contain
    /// type parameters).
    fn resolve_template(&self, t: &TypeSyn, env: &TyEnv, span: Span) -> TResult<Ty> {
        Ok(match t {
            TypeSyn::Infer => return Err(Diagnostic::new(span, "`_` is only allowed as a cast target")),
            TypeSyn::Ref { mutable, inner } => {
                let i = Box::new(self.resolve_template(inner, env, span)?);
                if *mutable {
                    Ty::MutRef(i)
                } else {
                    Ty::SharedRef(i)
                }
            }
            TypeSyn::Ptr { mutable, inner } => Ty::RawPtr(Box::new(self.resolve_template(inner, env, span)?), *mutable),
            TypeSyn::Tuple(ts) => Ty::Tuple(ts.iter().map(|t| self.resolve_template(t, env, span)).collect::<TResult<_>>()?),
            TypeSyn::Named { name, args } => {
                let args: Vec<Ty> = args.iter().map(|t| self.resolve_template(t, env, span)).collect::<TResult<_>>()?;
                let arity = |n: usize| -> TResult<()> {
                    if args.len() != n {
                        Err(Diagnostic::new(span, format!("`{name}` expects {n} type argument(s), found {}", args.len())))
                    } else {
                        Ok(())
                    }
                };
                if INT_NAMES.contains(&name.as_str()) {
                    arity(0)?;
                    Ty::Int
                } else if name == "bool" {
                    arity(0)?;
                    Ty::Bool
                } else if name == "Self" {
                    arity(0)?;
                    env.self_ty.clone().ok_or_else(|| Diagnostic::new(span, "`Self` outside an impl block"))?
                } else if let Some(t) = env.map.get(name) {
                    arity(0)?;
                    t.clone()
                } else if name == "UnsafeCell" {
                    arity(1)?;
                    Ty::UnsafeCell(Box::new(args.into_iter().next().unwrap()))
                } else if let Some(adt) = self.d.adts.get(name) {
                    arity(adt.generics.len())?;
                    self.adt_ty(name, args)
                } else {
                    return Err(Diagnostic::new(span, format!("unresolved type `{name}`")));
                }
            }
        })
    }

    fn ensure_types_in(&mut self, ty: &Ty, span: Span) -> TResult<()> {
        let mut found = Vec::new();
        ty.walk(&mut |t| {
            if matches!(t, Ty::Struct(..) | Ty::Enum(..)) && t.is_concrete() {
                found.push(t.clone());
            }
        });
        for t in found {
            self.ensure_adt(&t, span)?;
        }
        Ok(())
    }

    fn ensure_adt(&mut self, ty: &Ty, span: Span) -> TResult<()> {
        if self.prog.adts.contains_key(ty) || !ty.is_concrete() {
            return Ok(());
        }
        let (name, args) = match ty {
            Ty::Struct(n, a) | Ty::Enum(n, a) => (n.clone(), a.clone()),
            _ => return Ok(()),
        };
        let decl = &self.d.adts[&name];
        let env = TyEnv { map: decl.generics.iter().cloned().zip(args.iter().cloned()).collect(), self_ty: Some(ty.clone()) };
        let def = match &decl.shape {
            AdtShape::Struct(fields) => {
                let mut out = Vec::new();
                for (n, t) in fields.iter() {
                    out.push((n.clone(), self.resolve_template(t, &env, decl.span)?));
                }
                AdtDef::Struct(out)
            }
            AdtShape::Enum(vs) => {
                let mut out = Vec::new();
                for (n, p) in vs.iter() {
                    let p = match p {
                        Some(t) => {
                            let t = self.resolve_template(t, &env, decl.span)?;
                            if matches!(t, Ty::UnsafeCell(_)) {
                                return Err(Diagnostic::new(decl.span, "UnsafeCell may only appear as a struct field"));
                            }
                            Some(t)
                        }
                        None => None,
                    };
                    out.push((n.clone(), p));
                }
                AdtDef::Enum(out)
            }
        };
        self.prog.adts.insert(
            ty.clone(),
            AdtInst { ty: ty.clone(), def: def.clone(), annotations: vec![], thread_shared: decl.thread_shared, borrows: decl.borrows, span: decl.span },
        );
        let nested: Vec<Ty> = match &def {
            AdtDef::Struct(fs) => fs.iter().map(|(_, t)| t.clone()).collect(),
            AdtDef::Enum(vs) => vs.iter().filter_map(|(_, p)| p.clone()).collect(),
        };
        for t in nested {
            self.ensure_types_in(&t, span)?;
        }
        self.adt_queue.push_back(ty.clone());
        Ok(())
    }

    fn fn_name(&self, decl_idx: usize, owner: Option<&Ty>) -> String {
        let f = &self.d.fns[decl_idx];
        match owner {
            Some(o) => format!("{o}::{}", f.decl.name),
            None => f.decl.name.clone(),
        }
    }

    /// Creates (or finds) the instance of a function declaration for a
    /// substitution of its impl and function generics.
    fn instantiate_fn(&mut self, decl_idx: usize, subst: BTreeMap<String, Ty>, span: Span) -> TResult<FnId> {
        let info = &self.d.fns[decl_idx];
        let mut key_args = Vec::new();
        for g in info.impl_generics.iter().chain(&info.decl.generics) {
            let t = subst.get(g).cloned().ok_or_else(|| Diagnostic::new(span, format!("cannot infer type parameter `{g}`")))?;
            if !t.is_concrete() {
                return Err(Diagnostic::new(span, format!("generic `{g}` instantiated at non-concrete type {t}")));
            }
            key_args.push(t);
        }
        if let Some(&id) = self.fn_index.get(&(decl_idx, key_args.clone())) {
            return Ok(id);
        }
        let env = self.fn_env(decl_idx, &subst, span)?;
        let decl = info.decl;
        let mut locals = Vec::new();
        let mut params = Vec::new();
        let mut self_param = None;
        for (i, p) in decl.params.iter().enumerate() {
            let ty = match &p.ty {
                ParamTy::SelfParam(sp) => {
                    if i != 0 {
                        return Err(Diagnostic::new(p.span, "`self` must be the first parameter"));
                    }
                    let st = env.self_ty.clone().ok_or_else(|| Diagnostic::new(p.span, "`self` parameter outside an impl block"))?;
                    self_param = Some(*sp);
                    match sp {
                        SelfParam::Value => st,
                        SelfParam::Shared => Ty::SharedRef(Box::new(st)),
                        SelfParam::Mut => Ty::MutRef(Box::new(st)),
                    }
                }
                ParamTy::Typed(t) => self.resolve(t, &env, p.span)?,
            };
            if let Ty::UnsafeCell(_) = ty {
                return Err(Diagnostic::new(p.span, "UnsafeCell may only appear as a struct field"));
            }
            params.push(locals.len());
            locals.push(Local { name: p.name.clone(), ty, kind: LocalKind::Param, span: p.span });
        }
        let ret = match &decl.ret {
            Some(t) => self.resolve(t, &env, decl.span)?,
            None => Ty::unit(),
        };
        let result = locals.len();
        locals.push(Local { name: "result".into(), ty: ret.clone(), kind: LocalKind::Result, span: decl.span });
        let mut purity = None;
        let mut ghost = false;
        for a in &decl.attrs {
            let lvl = match a.kind {
                AttrKind::Pure => Some(Purity::PureValue),
                AttrKind::PureMemory => Some(Purity::PureMemory),
                AttrKind::PureUnstable => Some(Purity::PureUnstable),
                AttrKind::Ghost => {
                    ghost = true;
                    None
                }
                _ => None,
            };
            if let Some(l) = lvl {
                if purity.is_some() {
                    return Err(Diagnostic::new(a.span, "at most one purity level per function"));
                }
                purity = Some(l);
            }
        }
        if ghost && purity.is_none() {
            return Err(Diagnostic::new(decl.span, "ghost functions must carry a purity level"));
        }
        let owner = env.self_ty.clone();
        let name = self.fn_name(decl_idx, owner.as_ref());
        let id = self.prog.fns.len();
        let smt_name = format!("fn${}", name.replace("::", ".").replace(' ', "").replace(", ", ".").replace(',', "."));
        self.prog.fns.push(FnInst {
            name,
            smt_name,
            owner,
            locals,
            params,
            result,
            ret,
            requires: vec![],
            ensures: vec![],
            purity,
            ghost,
            self_param,
            body: None,
            span: decl.span,
            client: info.client,
        });
        self.fn_decl_of.push(decl_idx);
        self.fn_index.insert((decl_idx, key_args), id);
        self.fn_queue.push_back((id, subst));
        Ok(id)
    }

    fn fn_env(&self, decl_idx: usize, subst: &BTreeMap<String, Ty>, span: Span) -> TResult<TyEnv> {
        let info = &self.d.fns[decl_idx];
        let mut env = TyEnv { map: subst.clone(), self_ty: None };
        if let Some(owner) = &info.owner {
            env.self_ty = Some(self.resolve_template(owner, &env, span)?);
        }
        Ok(env)
    }

    fn check_fn(&mut self, id: FnId, subst: BTreeMap<String, Ty>) -> TResult<()> {
        let decl_idx = self.fn_decl_of[id];
        let decl = self.d.fns[decl_idx].decl;
        let env = self.fn_env(decl_idx, &subst, decl.span)?;
        let locals = self.prog.fns[id].locals.clone();
        let params = self.prog.fns[id].params.clone();
        let result = self.prog.fns[id].result;
        let ret = self.prog.fns[id].ret.clone();
        let purity = self.prog.fns[id].purity;
        let mut requires = Vec::new();
        let mut ensures = Vec::new();
        let mut all_locals = locals.clone();
        for a in &decl.attrs {
            match &a.kind {
                AttrKind::Requires(e) | AttrKind::Ensures(e) => {
                    let is_ens = matches!(a.kind, AttrKind::Ensures(_));
                    let mut b = BodyCx::new(self, env.clone(), all_locals.clone(), Mode::Spec { ensures: is_ens }, ret.clone());
                    b.bind_params(&params, if is_ens { Some(result) } else { None });
                    let te = b.expr(e, Some(&Ty::Bool))?;
                    b.expect_ty(&te, &Ty::Bool)?;
                    all_locals = b.locals;
                    if is_ens {
                        ensures.push(te);
                    } else {
                        requires.push(te);
                    }
                }
                AttrKind::Capable(_) => return Err(Diagnostic::new(a.span, "`capable` annotations belong on types or impl blocks")),
                AttrKind::ThreadShared | AttrKind::Borrows => {
                    return Err(Diagnostic::new(a.span, "attribute only applies to types"));
                }
                _ => {}
            }
        }
        let mut body = None;
        if let Some(blk) = &decl.body {
            let mode = if purity.is_some() { Mode::Pure } else { Mode::Exec };
            let mut b = BodyCx::new(self, env.clone(), all_locals.clone(), mode, ret.clone());
            b.bind_params(&params, None);
            let tb = b.fn_body(blk)?;
            all_locals = b.locals;
            body = Some(tb);
        }
        let f = &mut self.prog.fns[id];
        f.locals = all_locals;
        f.requires = requires;
        f.ensures = ensures;
        f.body = body;
        Ok(())
    }

    fn check_annotations(&mut self, ty: &Ty) -> TResult<()> {
        let (name, args) = match ty {
            Ty::Struct(n, a) | Ty::Enum(n, a) => (n.clone(), a.clone()),
            _ => return Ok(()),
        };
        let decl = &self.d.adts[&name];
        let mut out = Vec::new();
        for ad in &decl.annotations {
            // bind the impl's generics by matching its self type against `ty`
            let tmpl_env = TyEnv { map: ad.generics.iter().map(|g| (g.clone(), Ty::Param(g.clone()))).collect(), self_ty: None };
            let tmpl = self.resolve_template(&ad.self_ty, &tmpl_env, ad.span)?;
            let mut map = BTreeMap::new();
            if !unify(&tmpl, ty, &mut map) {
                return Err(Diagnostic::new(ad.span, format!("annotation self type does not match {ty}")));
            }
            let env = TyEnv { map, self_ty: Some(ty.clone()) };
            let self_ty = match ad.ann.receiver {
                Receiver::Shared => Ty::SharedRef(Box::new(ty.clone())),
                Receiver::Mut => Ty::MutRef(Box::new(ty.clone())),
            };
            let locals = vec![Local { name: "self".into(), ty: self_ty, kind: LocalKind::Param, span: ad.span }];
            let mut b = BodyCx::new(self, env, locals, Mode::Spec { ensures: false }, Ty::unit());
            b.bind_params(&[0], None);
            let condition = match &ad.ann.condition {
                Some(c) => {
                    let te = b.expr(c, Some(&Ty::Bool))?;
                    b.expect_ty(&te, &Ty::Bool)?;
                    Some(te)
                }
                None => None,
            };
            let target = b.expr(&ad.ann.target, None)?;
            let target_ty = match target.ty.pointee() {
                Some(t) => t.clone(),
                None => {
                    return Err(Diagnostic::new(ad.span, format!("capability target must be a raw pointer or reference, found {}", target.ty)))
                }
            };
            let locals = b.locals;
            for l in &locals[1..] {
                if l.kind == LocalKind::Param {
                    return Err(Diagnostic::new(ad.span, "annotations may only mention the receiver"));
                }
            }
            self.ensure_types_in(&target_ty, ad.span)?;
            out.push(TAnnotation { receiver: ad.ann.receiver, condition, kind: ad.ann.kind, target, target_ty, locals, span: ad.span });
        }
        if let Some(a) = self.prog.adts.get_mut(ty) {
            a.annotations = out;
        }
        let _ = args;
        Ok(())
    }

    fn check_recursion(&self) -> TResult<()> {
        let n = self.prog.fns.len();
        let mut edges: Vec<BTreeSet<FnId>> = vec![BTreeSet::new(); n];
        for (i, f) in self.prog.fns.iter().enumerate() {
            let Some(body) = &f.body else { continue };
            body.walk(&mut |s| {
                if let TStmtKind::Let { rhs: Rhs::Call(c), .. }
                | TStmtKind::Assign { rhs: Rhs::Call(c), .. }
                | TStmtKind::Return(Some(Rhs::Call(c)))
                | TStmtKind::Call(c) = &s.kind
                {
                    edges[i].insert(c.callee);
                }
                for e in s.exprs() {
                    edges[i].extend(e.calls());
                }
            });
        }
        // iterative DFS with colours
        let mut colour = vec![0u8; n];
        for start in 0..n {
            if colour[start] != 0 || self.prog.fns[start].body.is_none() {
                continue;
            }
            let mut stack = vec![(start, edges[start].iter().copied().collect::<Vec<_>>())];
            colour[start] = 1;
            while let Some((node, pending)) = stack.last_mut() {
                let node = *node;
                if let Some(next) = pending.pop() {
                    if self.prog.fns[next].body.is_none() {
                        continue;
                    }
                    match colour[next] {
                        0 => {
                            colour[next] = 1;
                            stack.push((next, edges[next].iter().copied().collect()));
                        }
                        1 => {
                            return Err(Diagnostic::new(
                                self.prog.fns[next].span,
                                format!("recursion is not supported: `{}` calls itself through `{}`", self.prog.fns[next].name, self.prog.fns[node].name),
                            ))
                        }
                        _ => {}
                    }
                } else {
                    colour[node] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// bodies and expressions

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Mode {
    Exec,
    Pure,
    Spec { ensures: bool },
}

struct BodyCx<'c, 'a> {
    ck: &'c mut Checker<'a>,
    env: TyEnv,
    locals: Vec<Local>,
    scopes: Vec<Vec<(String, VarId)>>,
    mode: Mode,
    ret: Ty,
    result: Option<VarId>,
    hoisted: Vec<TStmt>,
    hoisted_temps: Vec<VarId>,
    in_old: bool,
    in_assert: bool,
    ntemps: usize,
}

impl<'c, 'a> BodyCx<'c, 'a> {
    fn new(ck: &'c mut Checker<'a>, env: TyEnv, locals: Vec<Local>, mode: Mode, ret: Ty) -> Self {
        let ntemps = locals.iter().filter(|l| l.kind == LocalKind::Temp).count();
        BodyCx {
            ck,
            env,
            locals,
            scopes: vec![vec![]],
            mode,
            ret,
            result: None,
            hoisted: vec![],
            hoisted_temps: vec![],
            in_old: false,
            in_assert: false,
            ntemps,
        }
    }

    fn bind_params(&mut self, params: &[VarId], result: Option<VarId>) {
        for &p in params {
            let name = self.locals[p].name.clone();
            self.scopes[0].push((name, p));
        }
        self.result = result;
    }

    fn lookup(&self, name: &str) -> Option<VarId> {
        for s in self.scopes.iter().rev() {
            if let Some((_, v)) = s.iter().rev().find(|(n, _)| n == name) {
                return Some(*v);
            }
        }
        None
    }

    fn declare(&mut self, name: &str, ty: Ty, kind: LocalKind, span: Span) -> VarId {
        let id = self.locals.len();
        self.locals.push(Local { name: name.to_string(), ty, kind, span });
        self.scopes.last_mut().unwrap().push((name.to_string(), id));
        id
    }

    fn temp(&mut self, ty: Ty, span: Span) -> VarId {
        let name = format!("$t{}", self.ntemps);
        self.ntemps += 1;
        let id = self.locals.len();
        self.locals.push(Local { name, ty, kind: LocalKind::Temp, span });
        id
    }

    fn err<T>(&self, span: Span, msg: impl Into<String>) -> TResult<T> {
        Err(Diagnostic::new(span, msg))
    }

    fn expect_ty(&self, e: &TExpr, ty: &Ty) -> TResult<()> {
        if &e.ty == ty {
            Ok(())
        } else {
            self.err(e.span, format!("type mismatch: expected {ty}, found {}", e.ty))
        }
    }

    /// Accepts `e` where `ty` is expected, applying `&mut T -> &T` and
    /// `*mut T -> *const T` coercions.
    fn coerce(&self, mut e: TExpr, ty: &Ty) -> TResult<TExpr> {
        if &e.ty == ty {
            return Ok(e);
        }
        match (&e.ty, ty) {
            (Ty::MutRef(a), Ty::SharedRef(b)) if a == b => {
                if let TExprKind::AddrOf(p, true) = &e.kind {
                    e.kind = TExprKind::AddrOf(p.clone(), false);
                } else if let TExprKind::Read(p) = &e.kind {
                    // shared reborrow instead of a move
                    let inner = (**a).clone();
                    e.kind = TExprKind::AddrOf(p.push(Proj::Deref, inner), false);
                }
                e.ty = ty.clone();
                Ok(e)
            }
            (Ty::RawPtr(a, true), Ty::RawPtr(b, false)) if a == b => {
                e.ty = ty.clone();
                Ok(e)
            }
            _ => self.err(e.span, format!("type mismatch: expected {ty}, found {}", e.ty)),
        }
    }

    fn resolve(&mut self, t: &TypeSyn, span: Span) -> TResult<Ty> {
        let env = self.env.clone();
        self.ck.resolve(t, &env, span)
    }

    // ---- function bodies ----

    fn fn_body(&mut self, blk: &Block) -> TResult<TBlock> {
        if self.mode == Mode::Pure {
            self.scopes.push(vec![]);
            let mut stmts = self.stmts(&blk.stmts, None, false)?;
            let tail = match &blk.tail {
                Some(t) => {
                    let e = self.expr(t, Some(&self.ret.clone()))?;
                    self.coerce(e, &self.ret.clone())?
                }
                None if self.ret.is_unit() => TExpr::new(TExprKind::Unit, Ty::unit(), blk.span),
                None => {
                    if matches!(stmts.last().map(|s| &s.kind), Some(TStmtKind::Return(_))) {
                        let scope = self.pop_scope();
                        return Ok(TBlock { stmts, scope });
                    }
                    return self.err(blk.span, "pure function body must end in an expression");
                }
            };
            let span = tail.span;
            stmts.push(TStmt { kind: TStmtKind::Return(Some(Rhs::Expr(tail))), span, kills: vec![] });
            let scope = self.pop_scope();
            return Ok(TBlock { stmts, scope });
        }
        self.block(blk, true)
    }

    fn pop_scope(&mut self) -> Vec<VarId> {
        self.scopes.pop().unwrap_or_default().into_iter().map(|(_, v)| v).collect()
    }

    fn block(&mut self, b: &Block, ret_pos: bool) -> TResult<TBlock> {
        self.scopes.push(vec![]);
        let stmts = self.stmts(&b.stmts, b.tail.as_deref(), ret_pos)?;
        let scope = self.pop_scope();
        Ok(TBlock { stmts, scope })
    }

    fn stmts(&mut self, stmts: &[Stmt], tail: Option<&Expr>, ret_pos: bool) -> TResult<Vec<TStmt>> {
        let mut out = Vec::new();
        for (i, s) in stmts.iter().enumerate() {
            if let StmtKind::Let { pat: pat @ Pattern::Variant { .. }, ty, init, else_blk: Some(eb) } = &s.kind {
                let (pre, scrut) = self.scrutinee_place(init, ty.as_ref(), s.span)?;
                out.extend(pre);
                let else_body = self.block(eb, false)?;
                if !diverges(&else_body) {
                    return self.err(eb.span, "the `else` block of `let ... else` must return or panic");
                }
                let scrut_ty = scrut.ty(&self.locals).clone();
                self.scopes.push(vec![]);
                let (variant, binding) = self.pattern_binding(pat, &scrut_ty, LocalKind::Let, s.span)?;
                let rest = self.stmts(&stmts[i + 1..], tail, ret_pos)?;
                let scope = self.pop_scope();
                let mut arms = vec![TStmtArm { variant, binding, body: TBlock { stmts: rest, scope } }];
                let nvariants = self.ck.prog.enum_variants(&scrut_ty).len();
                for v in 0..nvariants {
                    if v != variant {
                        arms.push(TStmtArm { variant: v, binding: None, body: else_body.clone() });
                    }
                }
                arms.sort_by_key(|a| a.variant);
                out.push(TStmt { kind: TStmtKind::Match { scrut, arms }, span: s.span, kills: vec![] });
                return Ok(out);
            }
            out.extend(self.stmt(s)?);
        }
        if let Some(t) = tail {
            out.extend(self.tail(t, ret_pos)?);
        }
        Ok(out)
    }

    /// Runs `f` with a fresh hoisting buffer and returns the hoisted
    /// statements followed by the produced statement.
    fn with_hoisting(&mut self, span: Span, f: impl FnOnce(&mut Self) -> TResult<TStmtKind>) -> TResult<Vec<TStmt>> {
        let saved = std::mem::take(&mut self.hoisted);
        let saved_t = std::mem::take(&mut self.hoisted_temps);
        let r = f(self);
        let mut pre = std::mem::replace(&mut self.hoisted, saved);
        let temps = std::mem::replace(&mut self.hoisted_temps, saved_t);
        let kind = r?;
        pre.push(TStmt { kind, span, kills: temps });
        Ok(pre)
    }

    fn stmt(&mut self, s: &Stmt) -> TResult<Vec<TStmt>> {
        let span = s.span;
        match &s.kind {
            StmtKind::Let { pat, ty, init, else_blk } => {
                if else_blk.is_some() {
                    return self.err(span, "`let ... else` needs a variant pattern");
                }
                match pat {
                    Pattern::Bind { name, .. } => {
                        let name = name.clone();
                        let decl_ty = match ty {
                            Some(t) => Some(self.resolve(t, span)?),
                            None => None,
                        };
                        let mut var = None;
                        let out = self.with_hoisting(span, |b| {
                            let rhs = b.rhs(init, decl_ty.as_ref())?;
                            let rhs = match (&decl_ty, rhs) {
                                (Some(t), Rhs::Expr(e)) => Rhs::Expr(b.coerce(e, t)?),
                                (Some(t), Rhs::Call(c)) => {
                                    let rt = b.ck.prog.fns[c.callee].ret.clone();
                                    if &rt != t {
                                        return b.err(span, format!("type mismatch: expected {t}, found {rt}"));
                                    }
                                    Rhs::Call(c)
                                }
                                (None, r) => r,
                            };
                            let ty = rhs.ty(&b.ck.prog).clone();
                            if matches!(ty, Ty::UnsafeCell(_)) {
                                return b.err(span, "UnsafeCell may only appear as a struct field");
                            }
                            let v = b.declare(&name, ty, LocalKind::Let, span);
                            var = Some(v);
                            Ok(TStmtKind::Let { var: v, rhs })
                        })?;
                        let _ = var;
                        Ok(out)
                    }
                    Pattern::Wild => self.with_hoisting(span, |b| match b.rhs(init, None)? {
                        Rhs::Call(c) => Ok(TStmtKind::Call(c)),
                        Rhs::Expr(e) => {
                            let v = b.temp(e.ty.clone(), span);
                            b.hoisted_temps.push(v);
                            Ok(TStmtKind::Let { var: v, rhs: Rhs::Expr(e) })
                        }
                    }),
                    Pattern::Variant { .. } => self.err(span, "refutable pattern in `let` needs an `else` block"),
                }
            }
            StmtKind::Assign { target, value } => self.with_hoisting(span, |b| {
                let place = b.assign_target(target)?;
                let ty = place.ty(&b.locals).clone();
                let rhs = match b.rhs(value, Some(&ty))? {
                    Rhs::Expr(e) => Rhs::Expr(b.coerce(e, &ty)?),
                    Rhs::Call(c) => {
                        if b.ck.prog.fns[c.callee].ret != ty {
                            return b.err(span, format!("type mismatch: expected {ty}, found {}", b.ck.prog.fns[c.callee].ret));
                        }
                        Rhs::Call(c)
                    }
                };
                Ok(TStmtKind::Assign { target: place, rhs })
            }),
            StmtKind::Expr(e) => self.expr_stmt(e, false),
            StmtKind::Assert(e) => self.with_hoisting(span, |b| {
                b.in_assert = true;
                let r = b.expr(e, Some(&Ty::Bool));
                b.in_assert = false;
                let te = r?;
                b.expect_ty(&te, &Ty::Bool)?;
                Ok(TStmtKind::Assert(te))
            }),
            StmtKind::Drop(e) => {
                let Some(place) = self.place_of(e)? else {
                    return self.err(span, "`drop` expects a variable");
                };
                if !place.is_var() {
                    return self.err(span, "`drop` expects a whole variable");
                }
                let mut out = Vec::new();
                let ty = place.ty(&self.locals).clone();
                let has_drop = match &ty {
                    Ty::Struct(n, _) => self.ck.d.methods.contains_key(&(n.clone(), "drop".to_string())),
                    _ => false,
                };
                if has_drop {
                    // a library destructor with a contract runs first
                    let recv = TExpr::new(TExprKind::Read(place.clone()), ty, span);
                    let (callee, args) = self.resolve_method(recv, "drop", &[], None, span)?;
                    out.push(TStmt { kind: TStmtKind::Call(CallSite { callee, args, span }), span, kills: vec![] });
                }
                out.push(TStmt { kind: TStmtKind::Drop(place), span, kills: vec![] });
                Ok(out)
            }
            StmtKind::Return(e) => self.with_hoisting(span, |b| {
                let ret = b.ret.clone();
                match e {
                    None => {
                        if !ret.is_unit() {
                            return b.err(span, format!("`return;` in a function returning {ret}"));
                        }
                        Ok(TStmtKind::Return(None))
                    }
                    Some(e) => {
                        let rhs = match b.rhs(e, Some(&ret))? {
                            Rhs::Expr(x) => Rhs::Expr(b.coerce(x, &ret)?),
                            Rhs::Call(c) => {
                                if b.ck.prog.fns[c.callee].ret != ret {
                                    return b.err(span, "return type mismatch");
                                }
                                Rhs::Call(c)
                            }
                        };
                        Ok(TStmtKind::Return(Some(rhs)))
                    }
                }
            }),
            StmtKind::Panic => Ok(vec![TStmt { kind: TStmtKind::Panic, span, kills: vec![] }]),
        }
    }

    fn tail(&mut self, t: &Expr, ret_pos: bool) -> TResult<Vec<TStmt>> {
        let block_like = matches!(t.kind, ExprKind::If { .. } | ExprKind::IfLet { .. } | ExprKind::Match { .. } | ExprKind::Block(_));
        if block_like {
            return self.expr_stmt(t, ret_pos);
        }
        if ret_pos && !self.ret.is_unit() {
            let ret_stmt = Stmt { kind: StmtKind::Return(Some(t.clone())), span: t.span };
            return self.stmt(&ret_stmt);
        }
        let out = self.expr_stmt(t, false)?;
        Ok(out)
    }

    /// Statement-position expression: calls, `if`, `match`, blocks.
    fn expr_stmt(&mut self, e: &Expr, ret_pos: bool) -> TResult<Vec<TStmt>> {
        let span = e.span;
        match &e.kind {
            ExprKind::If { cond, then_blk, else_blk } => {
                let mut then_b = None;
                let mut else_b = None;
                let out = self.with_hoisting(span, |b| {
                    let c = b.expr(cond, Some(&Ty::Bool))?;
                    b.expect_ty(&c, &Ty::Bool)?;
                    then_b = Some(c);
                    Ok(TStmtKind::Panic)
                })?;
                let cond = then_b.take().unwrap();
                let t = self.block(then_blk, ret_pos)?;
                let el = match else_blk {
                    Some(b) => self.block(b, ret_pos)?,
                    None => {
                        if ret_pos && !self.ret.is_unit() {
                            return self.err(span, "`if` without `else` in return position");
                        }
                        TBlock::default()
                    }
                };
                else_b.replace(el);
                let mut out = out;
                let last = out.last_mut().unwrap();
                last.kind = TStmtKind::If { cond, then_blk: t, else_blk: else_b.unwrap() };
                Ok(out)
            }
            ExprKind::IfLet { pat, scrut, then_blk, else_blk } => {
                let arms = vec![(pat.clone(), Expr { kind: ExprKind::Block(then_blk.clone()), span }), (Pattern::Wild, Expr {
                    kind: ExprKind::Block(else_blk.clone()),
                    span,
                })];
                self.match_stmt(scrut, &arms, span, ret_pos)
            }
            ExprKind::Match { scrut, arms } => self.match_stmt(scrut, arms, span, ret_pos),
            ExprKind::Block(b) => {
                // flatten nested blocks, keeping their scope
                let tb = self.block(b, ret_pos)?;
                let mut stmts = tb.stmts;
                if let Some(last) = stmts.last_mut() {
                    last.kills.extend(tb.scope);
                }
                Ok(stmts)
            }
            _ => self.with_hoisting(span, |b| match b.rhs(e, None)? {
                Rhs::Call(c) => Ok(TStmtKind::Call(c)),
                Rhs::Expr(x) => {
                    if let TExprKind::Call(f, args) = x.kind {
                        return Ok(TStmtKind::Call(CallSite { callee: f, args, span }));
                    }
                    if !x.ty.is_unit() && b.mode == Mode::Exec {
                        return b.err(span, format!("expression of type {} used as a statement", x.ty));
                    }
                    let v = b.temp(x.ty.clone(), span);
                    b.hoisted_temps.push(v);
                    Ok(TStmtKind::Let { var: v, rhs: Rhs::Expr(x) })
                }
            }),
        }
    }

    fn match_stmt(&mut self, scrut: &Expr, arms: &[(Pattern, Expr)], span: Span, ret_pos: bool) -> TResult<Vec<TStmt>> {
        let (mut out, place) = self.scrutinee_place(scrut, None, span)?;
        let ty = place.ty(&self.locals).clone();
        let cover = self.cover_arms(&ty, arms.iter().map(|(p, _)| p), span)?;
        let mut tarms = Vec::new();
        for (variant, arm_idx) in cover.into_iter().enumerate() {
            let (pat, body) = &arms[arm_idx];
            self.scopes.push(vec![]);
            let binding = self.variant_binding(pat, &ty, variant, LocalKind::Let, span)?;
            let blk = match &body.kind {
                ExprKind::Block(b) => b.clone(),
                _ => Block { stmts: vec![], tail: Some(Box::new(body.clone())), span: body.span },
            };
            let inner = self.block(&blk, ret_pos)?;
            let mut scope = self.pop_scope();
            scope.extend(inner.scope);
            tarms.push(TStmtArm { variant, binding, body: TBlock { stmts: inner.stmts, scope } });
        }
        out.push(TStmt { kind: TStmtKind::Match { scrut: place, arms: tarms }, span, kills: vec![] });
        Ok(out)
    }

    /// Evaluates a match scrutinee into a place (a variable, or a fresh
    /// temporary holding the value).
    fn scrutinee_place(&mut self, e: &Expr, ty: Option<&TypeSyn>, span: Span) -> TResult<(Vec<TStmt>, Place)> {
        if let ExprKind::Var(_) = e.kind {
            if let Some(p) = self.place_of(e)? {
                return Ok((vec![], p));
            }
        }
        let expected = match ty {
            Some(t) => Some(self.resolve(t, span)?),
            None => None,
        };
        let mut tmp = None;
        let stmts = self.with_hoisting(span, |b| {
            let rhs = b.rhs(e, expected.as_ref())?;
            let t = rhs.ty(&b.ck.prog).clone();
            if !matches!(t, Ty::Enum(..)) {
                return b.err(span, format!("cannot match on a value of type {t}"));
            }
            let v = b.temp(t, span);
            tmp = Some(v);
            Ok(TStmtKind::Let { var: v, rhs })
        })?;
        Ok((stmts, Place::var(tmp.unwrap())))
    }

    /// For each variant of the enum, the index of the first arm covering it.
    fn cover_arms<'p>(&self, ty: &Ty, pats: impl Iterator<Item = &'p Pattern>, span: Span) -> TResult<Vec<usize>> {
        let variants = self.ck.prog.enum_variants(ty);
        if variants.is_empty() {
            return self.err(span, format!("cannot match on a value of type {ty}"));
        }
        let mut cover: Vec<Option<usize>> = vec![None; variants.len()];
        for (i, p) in pats.enumerate() {
            match p {
                Pattern::Wild | Pattern::Bind { .. } => {
                    if let Pattern::Bind { name, .. } = p {
                        if variants.iter().all(|(v, _)| v != name) {
                            return self.err(span, "binding the whole scrutinee in a match arm is not supported");
                        }
                    }
                    let target = if let Pattern::Bind { name, .. } = p { variants.iter().position(|(v, _)| v == name) } else { None };
                    for (v, c) in cover.iter_mut().enumerate() {
                        if c.is_none() && target.map_or(true, |t| t == v) {
                            *c = Some(i);
                        }
                    }
                }
                Pattern::Variant { name, .. } => {
                    let Some(v) = variants.iter().position(|(n, _)| n == name) else {
                        return self.err(span, format!("`{name}` is not a variant of {ty}"));
                    };
                    if cover[v].is_none() {
                        cover[v] = Some(i);
                    }
                }
            }
        }
        cover
            .into_iter()
            .enumerate()
            .map(|(v, c)| c.ok_or_else(|| Diagnostic::new(span, format!("non-exhaustive match: `{}` not covered", variants[v].0))))
            .collect()
    }

    fn pattern_binding(&mut self, pat: &Pattern, ty: &Ty, kind: LocalKind, span: Span) -> TResult<(usize, Option<VarId>)> {
        let Pattern::Variant { name, .. } = pat else {
            return self.err(span, "expected a variant pattern");
        };
        let variants = self.ck.prog.enum_variants(ty);
        let Some(v) = variants.iter().position(|(n, _)| n == name) else {
            return self.err(span, format!("`{name}` is not a variant of {ty}"));
        };
        let b = self.variant_binding(pat, ty, v, kind, span)?;
        Ok((v, b))
    }

    fn variant_binding(&mut self, pat: &Pattern, ty: &Ty, variant: usize, kind: LocalKind, span: Span) -> TResult<Option<VarId>> {
        let payload = self.ck.prog.enum_variants(ty)[variant].1.clone();
        match pat {
            Pattern::Variant { name, sub: Some(sub) } => {
                let Some(pty) = payload else {
                    return self.err(span, format!("variant `{name}` has no payload"));
                };
                match &**sub {
                    Pattern::Bind { name, .. } => Ok(Some(self.declare(name, pty, kind, span))),
                    Pattern::Wild => Ok(None),
                    Pattern::Variant { .. } => self.err(span, "nested variant patterns are not supported"),
                }
            }
            _ => Ok(None),
        }
    }

    fn assign_target(&mut self, target: &Expr) -> TResult<Place> {
        let Some(place) = self.place_of(target)? else {
            return self.err(target.span, "assignment target must be a variable or `*variable`");
        };
        let ok = place.projs.is_empty() || (place.projs == [Proj::Deref] && matches!(self.locals[place.base].ty, Ty::MutRef(_)));
        if !ok {
            return self.err(target.span, "assignment target must be a variable or `*r` with `r: &mut T`");
        }
        if self.mode == Mode::Pure && self.locals[place.base].kind == LocalKind::Param {
            // reported by the purity checker; keep the statement
        }
        Ok(place)
    }

    // ---- expressions ----

    /// Right-hand side of a statement: a top-level impure call stays a call.
    fn rhs(&mut self, e: &Expr, expected: Option<&Ty>) -> TResult<Rhs> {
        if self.mode == Mode::Exec {
            if let Some((f, args)) = self.try_call(e, expected)? {
                if self.ck.prog.fns[f].purity.is_none() {
                    return Ok(Rhs::Call(CallSite { callee: f, args, span: e.span }));
                }
                return Ok(Rhs::Expr(self.finish_call(f, args, e.span)?));
            }
        }
        Ok(Rhs::Expr(self.expr(e, expected)?))
    }

    fn finish_call(&mut self, f: FnId, args: Vec<TExpr>, span: Span) -> TResult<TExpr> {
        let callee = &self.ck.prog.fns[f];
        let ty = callee.ret.clone();
        if callee.ghost && self.mode == Mode::Exec && !self.in_assert {
            return self.err(span, format!("ghost function `{}` called from executable code", callee.name));
        }
        if self.mode == Mode::Exec && callee.purity.is_none() {
            // hoist impure calls out of expressions
            let v = self.temp(ty.clone(), span);
            self.hoisted.push(TStmt { kind: TStmtKind::Let { var: v, rhs: Rhs::Call(CallSite { callee: f, args, span }) }, span, kills: vec![] });
            self.hoisted_temps.push(v);
            return Ok(TExpr::new(TExprKind::Read(Place::var(v)), ty, span));
        }
        Ok(TExpr::new(TExprKind::Call(f, args), ty, span))
    }

    /// Places that need no evaluation: variables and their deref/field
    /// projections.
    fn place_of(&mut self, e: &Expr) -> TResult<Option<Place>> {
        match &e.kind {
            ExprKind::Var(name) => {
                if name == "result" {
                    if let Mode::Spec { ensures: true } = self.mode {
                        return Ok(self.result.map(Place::var));
                    }
                }
                Ok(self.lookup(name).map(Place::var))
            }
            ExprKind::Deref(inner) => {
                let Some(p) = self.place_of(inner)? else { return Ok(None) };
                match p.ty(&self.locals).clone() {
                    Ty::SharedRef(t) | Ty::MutRef(t) => Ok(Some(p.push(Proj::Deref, *t))),
                    _ => Ok(None),
                }
            }
            ExprKind::Field { base, name } => {
                let Some(mut p) = self.place_of(base)? else { return Ok(None) };
                loop {
                    match p.ty(&self.locals).clone() {
                        Ty::SharedRef(t) | Ty::MutRef(t) => p = p.push(Proj::Deref, *t),
                        _ => break,
                    }
                }
                let ty = p.ty(&self.locals).clone();
                let fields = self.ck.prog.struct_fields(&ty);
                match fields.iter().position(|(n, _)| n == name) {
                    Some(i) => {
                        let fty = fields[i].1.clone();
                        Ok(Some(p.push(Proj::Field(i), fty)))
                    }
                    None => self.err(e.span, format!("no field `{name}` on {ty}")),
                }
            }
            ExprKind::TupleField { base, index } => {
                let Some(mut p) = self.place_of(base)? else { return Ok(None) };
                loop {
                    match p.ty(&self.locals).clone() {
                        Ty::SharedRef(t) | Ty::MutRef(t) => p = p.push(Proj::Deref, *t),
                        _ => break,
                    }
                }
                match p.ty(&self.locals).clone() {
                    Ty::Tuple(ts) if *index < ts.len() => Ok(Some(p.push(Proj::Field(*index), ts[*index].clone()))),
                    t => self.err(e.span, format!("no field `{index}` on {t}")),
                }
            }
            _ => Ok(None),
        }
    }

    fn read_place(&self, p: Place, span: Span) -> TResult<TExpr> {
        let ty = p.ty(&self.locals).clone();
        if self.mode == Mode::Exec && !p.is_var() && !ty.is_copy() {
            return self.err(span, format!("cannot move a value of type {ty} out of a field or reference; borrow it instead"));
        }
        Ok(TExpr::new(TExprKind::Read(p), ty, span))
    }

    fn deref_value(&self, e: TExpr, span: Span) -> TResult<TExpr> {
        match e.ty.clone() {
            Ty::SharedRef(t) | Ty::MutRef(t) => {
                if let TExprKind::Read(p) = &e.kind {
                    return self.read_place(p.push(Proj::Deref, (*t).clone()), span);
                }
                if let TExprKind::AddrOf(p, _) = &e.kind {
                    return self.read_place(p.clone(), span);
                }
                Ok(TExpr::new(TExprKind::DerefValue(Box::new(e)), *t, span))
            }
            Ty::RawPtr(..) => self.err(span, "cannot dereference a raw pointer; use `deref(..)` in specifications"),
            t => self.err(span, format!("cannot dereference a value of type {t}")),
        }
    }

    fn expr(&mut self, e: &Expr, expected: Option<&Ty>) -> TResult<TExpr> {
        let span = e.span;
        match &e.kind {
            ExprKind::Int(n) => Ok(TExpr::new(TExprKind::Int(*n), Ty::Int, span)),
            ExprKind::Bool(b) => Ok(TExpr::new(TExprKind::Bool(*b), Ty::Bool, span)),
            ExprKind::Unit => Ok(TExpr::new(TExprKind::Unit, Ty::unit(), span)),
            ExprKind::Var(name) => {
                if let Some(p) = self.place_of(e)? {
                    return self.read_place(p, span);
                }
                if name == "result" {
                    return self.err(span, "`result` is only available in postconditions");
                }
                if self.ck.d.variants.contains_key(name) {
                    return self.variant(name, None, expected, span);
                }
                self.err(span, format!("unresolved name `{name}`"))
            }
            ExprKind::Path(path) => {
                let last = path.last().unwrap();
                if self.ck.d.variants.contains_key(last) {
                    return self.variant(last, None, expected, span);
                }
                self.err(span, format!("unresolved path `{}`", path.join("::")))
            }
            ExprKind::Deref(inner) => {
                if let Some(p) = self.place_of(e)? {
                    return self.read_place(p, span);
                }
                let te = self.receiver(inner)?;
                if let Ty::Struct(name, _) = &te.ty {
                    if self.ck.d.methods.contains_key(&(name.clone(), "deref".to_string())) {
                        let r = self.method_call_typed(te, "deref", &[], None, span)?;
                        return self.deref_value(r, span);
                    }
                }
                self.deref_value(te, span)
            }
            ExprKind::Field { base, name } => {
                if let Some(p) = self.place_of(e)? {
                    return self.read_place(p, span);
                }
                let mut b = self.expr(base, None)?;
                while b.ty.is_ref() {
                    b = self.deref_value(b, span)?;
                }
                let fields = self.ck.prog.struct_fields(&b.ty);
                let Some(i) = fields.iter().position(|(n, _)| n == name) else {
                    return self.err(span, format!("no field `{name}` on {}", b.ty));
                };
                let ty = fields[i].1.clone();
                Ok(TExpr::new(TExprKind::Field(Box::new(b), i), ty, span))
            }
            ExprKind::TupleField { base, index } => {
                if let Some(p) = self.place_of(e)? {
                    return self.read_place(p, span);
                }
                let mut b = self.expr(base, None)?;
                while b.ty.is_ref() {
                    b = self.deref_value(b, span)?;
                }
                match b.ty.clone() {
                    Ty::Tuple(ts) if *index < ts.len() => Ok(TExpr::new(TExprKind::Field(Box::new(b), *index), ts[*index].clone(), span)),
                    t => self.err(span, format!("no field `{index}` on {t}")),
                }
            }
            ExprKind::AddrOf { mutable, expr } => {
                let Some(p) = self.place_of(expr)? else {
                    return self.err(span, "can only borrow a place (variable, field or dereference)");
                };
                if *mutable {
                    if p.projs.contains(&Proj::Deref) {
                        let mut cur = self.locals[p.base].ty.clone();
                        for (proj, t) in p.projs.iter().zip(&p.tys) {
                            if *proj == Proj::Deref && matches!(cur, Ty::SharedRef(_)) {
                                return self.err(span, "cannot borrow through a shared reference as mutable");
                            }
                            cur = t.clone();
                        }
                    }
                }
                let inner = p.ty(&self.locals).clone();
                if matches!(inner, Ty::UnsafeCell(_)) && self.mode == Mode::Exec {
                    return self.err(span, "UnsafeCell contents are only reachable from library code");
                }
                let ty = if *mutable { Ty::MutRef(Box::new(inner)) } else { Ty::SharedRef(Box::new(inner)) };
                Ok(TExpr::new(TExprKind::AddrOf(p, *mutable), ty, span))
            }
            ExprKind::Unary { op, expr } => {
                let want = match op {
                    UnOp::Not => Ty::Bool,
                    UnOp::Neg => Ty::Int,
                };
                let x = self.expr(expr, Some(&want))?;
                self.expect_ty(&x, &want)?;
                Ok(TExpr::new(TExprKind::Unary(*op, Box::new(x)), want, span))
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, span),
            ExprKind::Cast { expr, ty } => {
                let x = self.expr(expr, None)?;
                let target = match (ty, &x.ty) {
                    (TypeSyn::Ptr { mutable, inner }, src) => {
                        let Some(pointee) = src.pointee().cloned() else {
                            return self.err(span, format!("cannot cast {} to a raw pointer", x.ty));
                        };
                        let inner = match &**inner {
                            TypeSyn::Infer => pointee.clone(),
                            t => self.resolve(t, span)?,
                        };
                        if inner != pointee {
                            return self.err(span, format!("cannot cast {} to a pointer to {inner}", x.ty));
                        }
                        Ty::RawPtr(Box::new(inner), *mutable)
                    }
                    (TypeSyn::Named { name, args }, Ty::Int) if args.is_empty() && INT_NAMES.contains(&name.as_str()) => Ty::Int,
                    _ => return self.err(span, format!("unsupported cast from {}", x.ty)),
                };
                if x.ty == target {
                    return Ok(x);
                }
                Ok(TExpr::new(TExprKind::Cast(Box::new(x)), target, span))
            }
            ExprKind::Tuple(es) => {
                let exp: Option<Vec<Ty>> = match expected {
                    Some(Ty::Tuple(ts)) if ts.len() == es.len() => Some(ts.clone()),
                    _ => None,
                };
                let mut out = Vec::new();
                for (i, x) in es.iter().enumerate() {
                    out.push(self.expr(x, exp.as_ref().map(|t| &t[i]))?);
                }
                let ty = Ty::Tuple(out.iter().map(|x| x.ty.clone()).collect());
                Ok(TExpr::new(TExprKind::Tuple(out), ty, span))
            }
            ExprKind::Call { path, args } => {
                if path.len() == 1 {
                    match path[0].as_str() {
                        "old" => {
                            if self.mode != (Mode::Spec { ensures: true }) {
                                return self.err(span, "`old(..)` is only allowed in postconditions");
                            }
                            if self.in_old || args.len() != 1 {
                                return self.err(span, "`old` takes one argument and cannot be nested");
                            }
                            self.in_old = true;
                            let r = self.expr(&args[0], expected);
                            self.in_old = false;
                            let x = r?;
                            let ty = x.ty.clone();
                            return Ok(TExpr::new(TExprKind::Old(Box::new(x)), ty, span));
                        }
                        "deref" if self.lookup("deref").is_none() && !self.ck.d.free_fns.contains_key("deref") => {
                            if args.len() != 1 {
                                return self.err(span, "`deref` takes one argument");
                            }
                            if self.mode == Mode::Exec && !self.in_assert {
                                return self.err(span, "`deref(..)` is a specification built-in");
                            }
                            let x = self.expr(&args[0], None)?;
                            let Ty::RawPtr(t, _) = x.ty.clone() else {
                                return self.err(span, format!("`deref` expects a raw pointer, found {}", x.ty));
                            };
                            return Ok(TExpr::new(TExprKind::BuiltinDeref(Box::new(x)), *t, span));
                        }
                        name if self.ck.d.variants.contains_key(name) && !self.ck.d.free_fns.contains_key(name) => {
                            if args.len() != 1 {
                                return self.err(span, format!("variant `{name}` takes one argument"));
                            }
                            return self.variant(name, Some(&args[0]), expected, span);
                        }
                        _ => {}
                    }
                } else if self.ck.d.variants.contains_key(path.last().unwrap()) && args.len() == 1 {
                    let name = path.last().unwrap().clone();
                    if !self.ck.d.methods.contains_key(&(path[0].clone(), name.clone())) {
                        return self.variant(&name, Some(&args[0]), expected, span);
                    }
                }
                let Some((f, targs)) = self.try_call(e, expected)? else {
                    return self.err(span, format!("unresolved function `{}`", path.join("::")));
                };
                self.finish_call(f, targs, span)
            }
            ExprKind::MethodCall { recv, method, args } => {
                let r = self.receiver(recv)?;
                self.method_call_typed(r, method, args, expected, span)
            }
            ExprKind::If { cond, then_blk, else_blk } => {
                let Some(else_blk) = else_blk else {
                    return self.err(span, "`if` used as a value needs an `else` branch");
                };
                if self.mode == Mode::Exec {
                    return self.err(span, "`if` expressions as values are only supported in return position");
                }
                let c = self.expr(cond, Some(&Ty::Bool))?;
                self.expect_ty(&c, &Ty::Bool)?;
                let a = self.value_block(then_blk, expected)?;
                let b = self.value_block(else_blk, Some(&a.ty.clone()))?;
                let b = self.coerce(b, &a.ty)?;
                let ty = a.ty.clone();
                Ok(TExpr::new(TExprKind::Ite(Box::new(c), Box::new(a), Box::new(b)), ty, span))
            }
            ExprKind::IfLet { pat, scrut, then_blk, else_blk } => {
                let arms = vec![(pat.clone(), Expr { kind: ExprKind::Block(then_blk.clone()), span }), (Pattern::Wild, Expr {
                    kind: ExprKind::Block(else_blk.clone()),
                    span,
                })];
                self.match_expr(scrut, &arms, expected, span)
            }
            ExprKind::Match { scrut, arms } => self.match_expr(scrut, arms, expected, span),
            ExprKind::Block(b) => self.value_block(b, expected),
        }
    }

    fn value_block(&mut self, b: &Block, expected: Option<&Ty>) -> TResult<TExpr> {
        if !b.stmts.is_empty() {
            return self.err(b.span, "blocks used as values may only contain an expression");
        }
        match &b.tail {
            Some(t) => self.expr(t, expected),
            None => Ok(TExpr::new(TExprKind::Unit, Ty::unit(), b.span)),
        }
    }

    fn match_expr(&mut self, scrut: &Expr, arms: &[(Pattern, Expr)], expected: Option<&Ty>, span: Span) -> TResult<TExpr> {
        if self.mode == Mode::Exec {
            return self.err(span, "`match` expressions as values are only supported in return position");
        }
        let mut s = self.expr(scrut, None)?;
        while s.ty.is_ref() {
            s = self.deref_value(s, span)?;
        }
        let cover = self.cover_arms(&s.ty, arms.iter().map(|(p, _)| p), span)?;
        let mut tarms: Vec<TArm> = Vec::new();
        let mut ty: Option<Ty> = expected.cloned();
        for (variant, arm_idx) in cover.into_iter().enumerate() {
            let (pat, body) = &arms[arm_idx];
            self.scopes.push(vec![]);
            let kind = if matches!(self.mode, Mode::Spec { .. }) { LocalKind::Binding } else { LocalKind::Let };
            let binding = self.variant_binding(pat, &s.ty, variant, kind, span)?;
            let b = self.expr(body, ty.as_ref())?;
            self.pop_scope();
            let b = match &ty {
                Some(t) => self.coerce(b, t)?,
                None => b,
            };
            ty = Some(b.ty.clone());
            tarms.push(TArm { variant, binding, body: b });
        }
        let ty = ty.unwrap_or_else(Ty::unit);
        Ok(TExpr::new(TExprKind::Match(Box::new(s), tarms), ty, span))
    }

    fn binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr, span: Span) -> TResult<TExpr> {
        use BinOp::*;
        let mk = |k, t| TExpr::new(k, t, span);
        match op {
            Implies | Or | And => {
                let l = self.expr(lhs, Some(&Ty::Bool))?;
                self.expect_ty(&l, &Ty::Bool)?;
                let r = self.expr(rhs, Some(&Ty::Bool))?;
                self.expect_ty(&r, &Ty::Bool)?;
                Ok(mk(TExprKind::Binary(op, Box::new(l), Box::new(r)), Ty::Bool))
            }
            Add | Sub | Mul | Div | Rem | Lt | Le | Gt | Ge => {
                let l = self.expr(lhs, Some(&Ty::Int))?;
                self.expect_ty(&l, &Ty::Int)?;
                let r = self.expr(rhs, Some(&Ty::Int))?;
                self.expect_ty(&r, &Ty::Int)?;
                let ty = if matches!(op, Lt | Le | Gt | Ge) { Ty::Bool } else { Ty::Int };
                Ok(mk(TExprKind::Binary(op, Box::new(l), Box::new(r)), ty))
            }
            Eq | Ne | MemEq => {
                let l = self.expr(lhs, None)?;
                let r = self.expr(rhs, Some(&l.ty.clone()))?;
                let (l, r) = if op == MemEq {
                    if l.ty != r.ty {
                        return self.err(span, format!("`====` applied to operands of different types: {} and {}", l.ty, r.ty));
                    }
                    (l, r)
                } else {
                    self.unify_operands(l, r, span)?
                };
                Ok(mk(TExprKind::Binary(op, Box::new(l), Box::new(r)), Ty::Bool))
            }
        }
    }

    fn unify_operands(&self, l: TExpr, r: TExpr, span: Span) -> TResult<(TExpr, TExpr)> {
        if l.ty == r.ty {
            return Ok((l, r));
        }
        let weaken = |t: &Ty| match t {
            Ty::MutRef(x) => Ty::SharedRef(x.clone()),
            Ty::RawPtr(x, true) => Ty::RawPtr(x.clone(), false),
            t => t.clone(),
        };
        let (wl, wr) = (weaken(&l.ty), weaken(&r.ty));
        if wl == wr {
            return Ok((self.coerce(l, &wl)?, self.coerce(r, &wr)?));
        }
        self.err(span, format!("cannot compare {} with {}", l.ty, r.ty))
    }

    fn variant(&mut self, name: &str, payload: Option<&Expr>, expected: Option<&Ty>, span: Span) -> TResult<TExpr> {
        let (enum_name, idx) = self.ck.d.variants[name].clone();
        let decl = &self.ck.d.adts[&enum_name];
        let generics = decl.generics.clone();
        let AdtShape::Enum(vs) = &decl.shape else { unreachable!() };
        let payload_syn = vs[idx].1.clone();
        let tmpl_env = TyEnv { map: generics.iter().map(|g| (g.clone(), Ty::Param(g.clone()))).collect(), self_ty: None };
        let mut map = BTreeMap::new();
        if let Some(Ty::Enum(n, args)) = expected {
            if n == &enum_name {
                for (g, a) in generics.iter().zip(args) {
                    map.insert(g.clone(), a.clone());
                }
            }
        }
        let arg = match (payload, &payload_syn) {
            (Some(p), Some(ps)) => {
                let tmpl = self.ck.resolve_template(ps, &tmpl_env, span)?;
                let exp = tmpl.subst(&map);
                let x = self.expr(p, if exp.is_concrete() { Some(&exp) } else { None })?;
                let mut m2 = map.clone();
                if !unify(&tmpl, &x.ty, &mut m2) {
                    return self.err(span, format!("variant `{name}` payload mismatch: found {}", x.ty));
                }
                map = m2;
                let want = tmpl.subst(&map);
                Some(Box::new(self.coerce(x, &want)?))
            }
            (None, None) => None,
            (Some(_), None) => return self.err(span, format!("variant `{name}` takes no payload")),
            (None, Some(_)) => return self.err(span, format!("variant `{name}` needs a payload")),
        };
        let mut args = Vec::new();
        for g in &generics {
            match map.get(g) {
                Some(t) => args.push(t.clone()),
                None => return self.err(span, format!("cannot infer type parameter `{g}` of `{enum_name}`; add a type annotation")),
            }
        }
        let ty = Ty::Enum(enum_name, args);
        self.ck.ensure_adt(&ty, span)?;
        Ok(TExpr::new(TExprKind::Variant(idx, arg), ty, span))
    }

    /// Receiver expression: a place when possible (so it can be borrowed),
    /// otherwise a value.
    fn receiver(&mut self, recv: &Expr) -> TResult<TExpr> {
        if let Some(p) = self.place_of(recv)? {
            let ty = p.ty(&self.locals).clone();
            return Ok(TExpr::new(TExprKind::Read(p), ty, recv.span));
        }
        self.expr(recv, None)
    }

    fn method_call_typed(&mut self, recv: TExpr, method: &str, args: &[Expr], expected: Option<&Ty>, span: Span) -> TResult<TExpr> {
        let (f, targs) = self.resolve_method(recv, method, args, expected, span)?;
        self.finish_call(f, targs, span)
    }

    fn resolve_method(&mut self, recv: TExpr, method: &str, args: &[Expr], expected: Option<&Ty>, span: Span) -> TResult<(FnId, Vec<TExpr>)> {
        let mut base = recv.ty.clone();
        while let Some(t) = match &base {
            Ty::SharedRef(t) | Ty::MutRef(t) => Some((**t).clone()),
            _ => None,
        } {
            base = t;
        }
        let owner = match &base {
            Ty::Struct(n, _) | Ty::Enum(n, _) => n.clone(),
            Ty::UnsafeCell(_) => "UnsafeCell".to_string(),
            t => return self.err(span, format!("no method `{method}` on {t}")),
        };
        let Some(&decl_idx) = self.ck.d.methods.get(&(owner.clone(), method.to_string())) else {
            return self.err(span, format!("no method `{method}` on {base}"));
        };
        let decl = self.ck.d.fns[decl_idx].decl;
        let Some(Param { ty: ParamTy::SelfParam(sp), .. }) = decl.params.first() else {
            return self.err(span, format!("`{owner}::{method}` has no `self` parameter; call it as `{owner}::{method}(..)`"));
        };
        let self_arg = self.adjust_receiver(recv, &base, *sp, span)?;
        self.check_call_args(decl_idx, Some(self_arg), args, expected, span)
    }

    fn adjust_receiver(&mut self, recv: TExpr, base: &Ty, sp: SelfParam, span: Span) -> TResult<TExpr> {
        let place = match &recv.kind {
            TExprKind::Read(p) => Some(p.clone()),
            _ => None,
        };
        // peel references down to a place of the base type
        let (place, via_shared) = match place {
            Some(mut p) => {
                let mut shared = false;
                loop {
                    match p.ty(&self.locals).clone() {
                        Ty::SharedRef(t) => {
                            shared = true;
                            p = p.push(Proj::Deref, *t)
                        }
                        Ty::MutRef(t) => p = p.push(Proj::Deref, *t),
                        _ => break,
                    }
                }
                (Some(p), shared)
            }
            None => (None, false),
        };
        match sp {
            SelfParam::Shared => {
                if let Some(p) = place {
                    // `r.m()` with `r: &T` passes `r` itself
                    if let TExprKind::Read(orig) = &recv.kind {
                        if matches!(recv.ty, Ty::SharedRef(ref t) if **t == *base) {
                            return Ok(TExpr::new(TExprKind::Read(orig.clone()), recv.ty.clone(), span));
                        }
                    }
                    return Ok(TExpr::new(TExprKind::AddrOf(p, false), Ty::SharedRef(Box::new(base.clone())), span));
                }
                match &recv.ty {
                    Ty::SharedRef(t) if **t == *base => Ok(recv),
                    Ty::MutRef(t) if **t == *base => self.coerce(recv, &Ty::SharedRef(Box::new(base.clone()))),
                    _ => {
                        let v = self.spill(recv, span)?;
                        Ok(TExpr::new(TExprKind::AddrOf(Place::var(v), false), Ty::SharedRef(Box::new(base.clone())), span))
                    }
                }
            }
            SelfParam::Mut => {
                if via_shared {
                    return self.err(span, "cannot borrow through a shared reference as mutable");
                }
                if let Some(p) = place {
                    return Ok(TExpr::new(TExprKind::AddrOf(p, true), Ty::MutRef(Box::new(base.clone())), span));
                }
                match &recv.ty {
                    Ty::MutRef(t) if **t == *base => Ok(recv),
                    Ty::SharedRef(_) => self.err(span, "cannot borrow through a shared reference as mutable"),
                    _ => {
                        let v = self.spill(recv, span)?;
                        Ok(TExpr::new(TExprKind::AddrOf(Place::var(v), true), Ty::MutRef(Box::new(base.clone())), span))
                    }
                }
            }
            SelfParam::Value => {
                if recv.ty != *base {
                    if base.is_copy() {
                        let p = place.expect("reference receivers are places");
                        return self.read_place(p, span);
                    }
                    return self.err(span, format!("cannot move out of a reference to call a method taking `self` on {base}"));
                }
                if let TExprKind::Read(p) = &recv.kind {
                    return self.read_place(p.clone(), span);
                }
                Ok(recv)
            }
        }
    }

    /// Stores a non-place value in a temporary so it can be borrowed.
    fn spill(&mut self, value: TExpr, span: Span) -> TResult<VarId> {
        if self.mode != Mode::Exec {
            return self.err(span, "cannot borrow a temporary value in a specification; bind it first");
        }
        let v = self.temp(value.ty.clone(), span);
        self.hoisted.push(TStmt { kind: TStmtKind::Let { var: v, rhs: Rhs::Expr(value) }, span, kills: vec![] });
        self.hoisted_temps.push(v);
        Ok(v)
    }

    /// Resolves `f(..)`, `T::f(..)` or `recv.m(..)` to a function instance.
    /// Returns `None` for variants and built-ins.
    fn try_call(&mut self, e: &Expr, expected: Option<&Ty>) -> TResult<Option<(FnId, Vec<TExpr>)>> {
        match &e.kind {
            ExprKind::Call { path, args } => {
                let decl_idx = if path.len() == 1 {
                    match self.ck.d.free_fns.get(&path[0]) {
                        Some(&i) => i,
                        None => return Ok(None),
                    }
                } else if path.len() == 2 {
                    match self.ck.d.methods.get(&(path[0].clone(), path[1].clone())) {
                        Some(&i) => i,
                        None => {
                            if self.ck.d.variants.contains_key(&path[1]) {
                                return Ok(None);
                            }
                            return self.err(e.span, format!("unresolved function `{}`", path.join("::")));
                        }
                    }
                } else {
                    return Ok(None);
                };
                Ok(Some(self.check_call_args(decl_idx, None, args, expected, e.span)?))
            }
            ExprKind::MethodCall { recv, method, args } => {
                let r = self.receiver(recv)?;
                Ok(Some(self.resolve_method(r, method, args, expected, e.span)?))
            }
            _ => Ok(None),
        }
    }

    fn check_call_args(
        &mut self,
        decl_idx: usize,
        self_arg: Option<TExpr>,
        args: &[Expr],
        expected: Option<&Ty>,
        span: Span,
    ) -> TResult<(FnId, Vec<TExpr>)> {
        let info = &self.ck.d.fns[decl_idx];
        let decl = info.decl;
        let generics: Vec<String> = info.impl_generics.iter().chain(&decl.generics).cloned().collect();
        let tmpl_env = TyEnv { map: generics.iter().map(|g| (g.clone(), Ty::Param(g.clone()))).collect(), self_ty: None };
        let self_tmpl = match &info.owner {
            Some(o) => Some(self.ck.resolve_template(o, &tmpl_env, span)?),
            None => None,
        };
        let tmpl_env = TyEnv { self_ty: self_tmpl.clone(), ..tmpl_env };
        let mut param_tys = Vec::new();
        for p in &decl.params {
            param_tys.push(match &p.ty {
                ParamTy::SelfParam(sp) => {
                    let st = self_tmpl.clone().unwrap();
                    match sp {
                        SelfParam::Value => st,
                        SelfParam::Shared => Ty::SharedRef(Box::new(st)),
                        SelfParam::Mut => Ty::MutRef(Box::new(st)),
                    }
                }
                ParamTy::Typed(t) => self.ck.resolve_template(t, &tmpl_env, span)?,
            });
        }
        let ret_tmpl = match &decl.ret {
            Some(t) => self.ck.resolve_template(t, &tmpl_env, span)?,
            None => Ty::unit(),
        };
        let nargs = args.len() + usize::from(self_arg.is_some());
        if nargs != param_tys.len() {
            return self.err(span, format!("`{}` expects {} argument(s), found {nargs}", decl.name, param_tys.len()));
        }
        let mut map = BTreeMap::new();
        if let Some(exp) = expected {
            let mut m = BTreeMap::new();
            if unify(&ret_tmpl, exp, &mut m) {
                map = m;
            }
        }
        let mut typed = Vec::new();
        let mut srcs: Vec<Option<&Expr>> = Vec::new();
        if let Some(s) = self_arg {
            if !unify(&param_tys[0], &s.ty, &mut map) {
                return self.err(span, format!("receiver of type {} does not match {}", s.ty, param_tys[0]));
            }
            typed.push(s);
            srcs.push(None);
        }
        let offset = typed.len();
        for (i, a) in args.iter().enumerate() {
            let tmpl = &param_tys[offset + i];
            let exp = tmpl.subst(&map);
            let x = self.expr(a, if exp.is_concrete() { Some(&exp) } else { None })?;
            if !unify(tmpl, &x.ty, &mut map) {
                return self.err(a.span, format!("argument type mismatch: expected {}, found {}", tmpl.subst(&map), x.ty));
            }
            typed.push(x);
            srcs.push(Some(a));
        }
        let f = self.ck.instantiate_fn(decl_idx, map.clone(), span)?;
        let want: Vec<Ty> = self.ck.prog.fns[f].params.iter().map(|&p| self.ck.prog.fns[f].locals[p].ty.clone()).collect();
        let mut out = Vec::new();
        for (x, w) in typed.into_iter().zip(&want) {
            let x = self.coerce(x, w)?;
            // `&mut` arguments are reborrowed rather than moved
            let x = match (&x.kind, &x.ty) {
                (TExprKind::Read(p), Ty::MutRef(inner)) => {
                    let ty = x.ty.clone();
                    TExpr::new(TExprKind::AddrOf(p.push(Proj::Deref, (**inner).clone()), true), ty, x.span)
                }
                _ => x,
            };
            out.push(x);
        }
        Ok((f, out))
    }
}

fn diverges(b: &TBlock) -> bool {
    match b.stmts.last().map(|s| &s.kind) {
        Some(TStmtKind::Return(_)) | Some(TStmtKind::Panic) => true,
        Some(TStmtKind::If { then_blk, else_blk, .. }) => diverges(then_blk) && diverges(else_blk),
        Some(TStmtKind::Match { arms, .. }) => arms.iter().all(|a| diverges(&a.body)),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn check(src: &str) -> TResult<TypedProgram> {
        let mut files = corpus::prelude_files();
        files.push(SourceFile::user("test.cap", src));
        typecheck(&files)
    }

    fn local_ty(p: &TypedProgram, f: &str, var: &str) -> Ty {
        let f = &p.fns[p.find_fn(f).unwrap()];
        f.locals.iter().find(|l| l.name == var).unwrap().ty.clone()
    }

    #[test]
    fn get_on_shared_cell_returns_int() {
        let p = check("fn f(c: &Cell<i32>) { let before = c.get(); assert!(true); }").unwrap();
        assert_eq!(local_ty(&p, "f", "before"), Ty::Int);
    }

    #[test]
    fn as_ptr_on_refcell_is_mut_raw_pointer() {
        let p = check("fn f(x: &RefCell<i32>) { let p = x.as_ptr(); }").unwrap();
        assert_eq!(local_ty(&p, "f", "p"), Ty::RawPtr(Box::new(Ty::Int), true));
    }

    #[test]
    fn no_free_type_parameters_after_monomorphization() {
        let p = check(corpus::client_source("clients/arc_client.cap").unwrap()).unwrap();
        for f in &p.fns {
            for l in &f.locals {
                assert!(l.ty.is_concrete(), "{}: {} : {}", f.name, l.name, l.ty);
            }
            let mut exprs: Vec<&TExpr> = f.requires.iter().chain(&f.ensures).collect();
            if let Some(b) = &f.body {
                b.walk(&mut |s| exprs.extend(s.exprs()));
            }
            for e in exprs {
                e.walk(&mut |x| assert!(x.ty.is_concrete(), "{}: {:?}", f.name, x.ty));
            }
        }
        for t in p.adts.keys() {
            assert!(t.is_concrete());
        }
    }

    #[test]
    fn memeq_requires_identical_types() {
        let e = check("#[ensures(x ==== true)] fn f(x: i32);").unwrap_err();
        assert!(e.message.contains("===="), "{e}");
    }

    #[test]
    fn deref_of_non_pointer_is_rejected() {
        let e = check("#[ensures(deref(x) == 1)] fn f(x: i32);").unwrap_err();
        assert!(e.message.contains("raw pointer"), "{e}");
        let e = check("fn f(x: i32) { let y = *x; }").unwrap_err();
        assert!(e.message.contains("dereference"), "{e}");
    }

    #[test]
    fn recursion_is_rejected() {
        let e = check("fn f() { g(); } fn g() { f(); }").unwrap_err();
        assert!(e.message.contains("recursion"), "{e}");
    }

    #[test]
    fn impure_calls_are_hoisted_out_of_assertions() {
        let p = check("fn f(x: Arc<i32>) { assert!(x.into_inner().is_none()); }").unwrap();
        let f = &p.fns[p.find_fn("f").unwrap()];
        let b = f.body.as_ref().unwrap();
        assert!(matches!(&b.stmts[0].kind, TStmtKind::Let { rhs: Rhs::Call(_), .. }));
        assert!(matches!(&b.stmts[1].kind, TStmtKind::Assert(_)));
        assert_eq!(b.stmts[1].kills.len(), 1);
    }

    #[test]
    fn let_else_becomes_a_match_holding_the_rest() {
        let p = check("fn f(x: &RefCell<i32>) { let Ok(a) = x.try_borrow() else { return; }; let v = *a; }").unwrap();
        let f = &p.fns[p.find_fn("f").unwrap()];
        let b = f.body.as_ref().unwrap();
        assert_eq!(b.stmts.len(), 2);
        let TStmtKind::Match { arms, .. } = &b.stmts[1].kind else { panic!() };
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[0].body.stmts.len(), 1);
        assert!(matches!(arms[1].body.stmts[0].kind, TStmtKind::Return(None)));
    }

    #[test]
    fn ghost_functions_are_not_callable_from_code() {
        let e = check("fn f(x: &Arc<i32>) { let p = x.strong_ptr(); }").unwrap_err();
        assert!(e.message.contains("ghost"), "{e}");
    }

    #[test]
    fn unsafe_cell_only_in_struct_fields() {
        let e = check("fn f(x: UnsafeCell<i32>) { }").unwrap_err();
        assert!(e.message.contains("UnsafeCell"), "{e}");
    }

    #[test]
    fn annotation_targets_are_pointers() {
        let p = check("").unwrap();
        let cell = p.adt(&Ty::Struct("Cell".into(), vec![Ty::Int]));
        if let Some(cell) = cell {
            for a in &cell.annotations {
                assert!(matches!(a.target.ty, Ty::RawPtr(..) | Ty::SharedRef(_) | Ty::MutRef(_)));
                assert_eq!(a.target_ty, Ty::Int);
            }
        }
        let e = check("#[capable(&self => local(1))] struct S { x: i32 }").unwrap_err();
        assert!(e.message.contains("raw pointer or reference"), "{e}");
    }
}
