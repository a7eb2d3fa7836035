//! Background axioms: the capability lattice per type, structural
//! propagation, library annotations, memory coherence and field offsets.

use super::expr::{Bind, Cx, Env};
use super::smt::{and, app, eq, forall, implies};
use super::Enc;
use crate::capability::{base_edges, structural_children, CapKind};
use crate::lang::ast::Receiver;
use crate::lang::ir::Proj;
use crate::lang::types::Ty;
use crate::lang::Diagnostic;
use std::collections::BTreeSet;

const RAW: [(&str, &str); 3] = [("r", "Int"), ("a", "Int"), ("w", "Version")];

/// Types that may carry capabilities: local types, closed under fields,
/// reference targets and annotation targets.
pub fn cap_closure(prog: &crate::lang::ir::TypedProgram, seeds: impl IntoIterator<Item = Ty>) -> BTreeSet<Ty> {
    let mut out = BTreeSet::new();
    let mut work: Vec<Ty> = seeds.into_iter().collect();
    while let Some(t) = work.pop() {
        if !out.insert(t.clone()) {
            continue;
        }
        let mut next: Vec<Ty> = prog.field_types(&t).into_iter().filter(|f| !matches!(f, Ty::UnsafeCell(_))).collect();
        if let Ty::SharedRef(x) | Ty::MutRef(x) = &t {
            next.push((**x).clone());
        }
        if let Some(adt) = prog.adt(&t) {
            next.extend(adt.annotations.iter().map(|a| a.target_ty.clone()));
        }
        work.extend(next);
    }
    out
}

impl<'p> Enc<'p> {
    fn cap(&self, k: CapKind, ty: &Ty, r: &str, a: &str, w: &str) -> String {
        app(&self.s.cap_fn(k, ty), &[r.into(), a.into(), w.into()])
    }

    pub(crate) fn lattice_axioms(&mut self, ty: &Ty) -> Vec<String> {
        let mut out = Vec::new();
        let table = base_edges();
        for e in &table.implications {
            out.push(forall(&RAW, &implies(&self.cap(e.from, ty, "r", "a", "w"), &self.cap(e.to, ty, "r", "a", "w"))));
        }
        for p in &table.incompatibilities {
            let vars = [("r1", "Int"), ("r2", "Int"), ("a", "Int"), ("w", "Version")];
            let both = and(vec![self.cap(p.a, ty, "r1", "a", "w"), self.cap(p.b, ty, "r2", "a", "w")]);
            out.push(forall(&vars, &implies(&both, &eq("r1", "r2"))));
        }
        out
    }

    pub(crate) fn structural_axioms(&mut self, ty: &Ty) -> Vec<String> {
        let mut out = Vec::new();
        let fields = self.prog.field_types(ty);
        for k in CapKind::ALL {
            for (proj, k2) in structural_children(k, ty, self.prog) {
                let (child_ty, child) = match proj {
                    Proj::Field(i) => (fields[i].clone(), self.off(ty, i, "a")),
                    Proj::Deref => {
                        let t = ty.pointee().expect("reference").clone();
                        let m = self.mem_at(ty, "a", "w");
                        let addr = app(&self.s.ref_addr(&t), &[m]);
                        (t, addr)
                    }
                };
                out.push(forall(&RAW, &implies(&self.cap(k, ty, "r", "a", "w"), &self.cap(k2, &child_ty, "r", &child, "w"))));
            }
        }
        out
    }

    /// One axiom per annotation: the receiver capability yields the target
    /// capability whenever the condition holds at the base version.
    pub(crate) fn annotation_axioms(&mut self, ty: &Ty) -> Result<Vec<String>, Diagnostic> {
        let prog = self.prog;
        let Some(adt) = prog.adt(ty) else { return Ok(vec![]) };
        let mut out = Vec::new();
        for a in &adt.annotations {
            let trigger = match a.receiver {
                Receiver::Shared => CapKind::ReadRef,
                Receiver::Mut => CapKind::WriteRef,
            };
            let saved = (std::mem::take(&mut self.side), std::mem::take(&mut self.side_seen), std::mem::take(&mut self.expanded));
            let mut env = Env::new(a.locals.len());
            env.set(0, Bind::Ref("a".into()));
            let cond = match &a.condition {
                Some(c) => Some(self.expr(&a.locals, &mut env, &Cx::at("(base w)"), c)?),
                None => None,
            };
            let target = self.expr(&a.locals, &mut env, &Cx::at("w"), &a.target)?;
            let side = std::mem::replace(&mut self.side, saved.0);
            self.side_seen = saved.1;
            self.expanded = saved.2;
            let concl = self.cap(a.kind, &a.target_ty, "r", &target, "w");
            let concl = match cond {
                Some(c) => implies(&c, &concl),
                None => concl,
            };
            let mut body = side;
            body.push(concl);
            out.push(forall(&RAW, &implies(&self.cap(trigger, ty, "r", "a", "w"), &and(body))));
        }
        Ok(out)
    }

    /// Memory of structs, tuples and references as a function of memory at
    /// component addresses. Other types have no definition.
    pub(crate) fn mem_definition(&mut self, ty: &Ty) -> Option<String> {
        match ty {
            Ty::Struct(..) | Ty::Tuple(_) if !ty.is_unit() => {
                let mut parts = Vec::new();
                for (i, f) in self.prog.field_types(ty).iter().enumerate() {
                    if matches!(f, Ty::UnsafeCell(_)) {
                        parts.push("unit".to_string());
                    } else {
                        let off = self.off(ty, i, "a");
                        parts.push(self.mem_at(f, &off, "w"));
                    }
                }
                Some(app(&self.s.ctor(ty), &parts))
            }
            Ty::SharedRef(t) | Ty::MutRef(t) => {
                self.ptr_types.insert(ty.clone());
                let addr = app(&self.s.ptr_fn(ty), &["a".into(), "w".into()]);
                let snap = self.mem_at(t, &addr, "w");
                Some(app(&self.s.mkref(t), &[addr, snap]))
            }
            _ => None,
        }
    }

    /// Field addresses are pairwise distinct and distinct from the base.
    pub(crate) fn offset_axioms(&mut self, ty: &Ty) -> Vec<String> {
        let fields: Vec<usize> = self
            .prog
            .field_types(ty)
            .iter()
            .enumerate()
            .filter(|(_, f)| !matches!(f, Ty::UnsafeCell(_)))
            .map(|(i, _)| i)
            .collect();
        let mut out = Vec::new();
        if !fields.is_empty() {
            let mut all = vec!["a".to_string()];
            all.extend(fields.iter().map(|&i| app(&self.s.off_fn(ty, i), &["a".into()])));
            out.push(forall(&[("a", "Int")], &app("distinct", &all)));
        }
        out
    }
}
