//! Memory and value snapshot sorts, and the conversion between them.

use super::smt::{app, ite};
use crate::capability::CapKind;
use crate::lang::ir::TypedProgram;
use crate::lang::types::Ty;
use std::collections::BTreeSet;

/// Naming scheme and sort construction for one program.
#[derive(Clone, Copy)]
pub struct Sorts<'p> {
    pub prog: &'p TypedProgram,
}

fn m(ty: &Ty) -> String {
    ty.mangle()
}

impl<'p> Sorts<'p> {
    pub fn new(prog: &'p TypedProgram) -> Self {
        Sorts { prog }
    }

    fn is_unit_like(ty: &Ty) -> bool {
        matches!(ty, Ty::UnsafeCell(_)) || ty.is_unit()
    }

    /// Sort of memory snapshots of `ty`.
    pub fn mem_sort(&self, ty: &Ty) -> String {
        match ty {
            Ty::Int | Ty::RawPtr(..) => "Int".into(),
            Ty::Bool => "Bool".into(),
            Ty::SharedRef(t) | Ty::MutRef(t) => format!("Ref${}$", m(t)),
            t if Self::is_unit_like(t) => "Unit".into(),
            t => format!("MemSnap${}$", m(t)),
        }
    }

    /// Whether the value snapshot differs from the memory snapshot, i.e. a
    /// reference occurs before any raw pointer or cell boundary.
    pub fn has_ref(&self, ty: &Ty) -> bool {
        match ty {
            Ty::SharedRef(_) | Ty::MutRef(_) => true,
            Ty::Struct(..) | Ty::Tuple(_) => self.prog.field_types(ty).iter().any(|t| self.has_ref(t)),
            Ty::Enum(..) => self.prog.enum_variants(ty).iter().filter_map(|(_, p)| p.as_ref()).any(|t| self.has_ref(t)),
            _ => false,
        }
    }

    /// Sort of value snapshots of `ty`.
    pub fn val_sort(&self, ty: &Ty) -> String {
        match ty {
            Ty::SharedRef(t) | Ty::MutRef(t) => self.val_sort(t),
            t if self.has_ref(t) => format!("ValSnap${}$", m(t)),
            t => self.mem_sort(t),
        }
    }

    /// Converts a memory snapshot term to a value snapshot term.
    pub fn m2v(&self, ty: &Ty, term: &str) -> String {
        match ty {
            Ty::SharedRef(t) | Ty::MutRef(t) => self.m2v(t, &app(&self.ref_snap(t), &[term.to_string()])),
            t if self.has_ref(t) => app(&format!("m2v${}$", m(t)), &[term.to_string()]),
            _ => term.to_string(),
        }
    }

    pub fn mem_fn(&self, ty: &Ty) -> String {
        format!("mem${}$", m(ty))
    }

    pub fn cap_fn(&self, kind: CapKind, ty: &Ty) -> String {
        format!("{}${}$", kind.annotation_name(), m(ty))
    }

    /// Address stored in a reference-typed location.
    pub fn ptr_fn(&self, ty: &Ty) -> String {
        format!("ptr${}$", m(ty))
    }

    pub fn off_fn(&self, ty: &Ty, field: usize) -> String {
        format!("off${}${field}", m(ty))
    }

    pub fn ctor(&self, ty: &Ty) -> String {
        if Self::is_unit_like(ty) {
            return "unit".into();
        }
        format!("mk${}$", m(ty))
    }

    pub fn sel(&self, ty: &Ty, field: usize) -> String {
        format!("sel${}${field}", m(ty))
    }

    fn vctor(&self, ty: &Ty) -> String {
        format!("vmk${}$", m(ty))
    }

    fn vsel(&self, ty: &Ty, field: usize) -> String {
        format!("vsel${}${field}", m(ty))
    }

    pub fn variant_ctor(&self, ty: &Ty, v: usize) -> String {
        format!("{}${}", m(ty), self.prog.enum_variants(ty)[v].0)
    }

    pub fn variant_sel(&self, ty: &Ty, v: usize) -> String {
        format!("{}${}$0", m(ty), self.prog.enum_variants(ty)[v].0)
    }

    fn vvariant_ctor(&self, ty: &Ty, v: usize) -> String {
        format!("v${}${}", m(ty), self.prog.enum_variants(ty)[v].0)
    }

    fn vvariant_sel(&self, ty: &Ty, v: usize) -> String {
        format!("v${}${}$0", m(ty), self.prog.enum_variants(ty)[v].0)
    }

    /// `((_ is C) term)` for variant `v`.
    pub fn is_variant(&self, ty: &Ty, v: usize, term: &str) -> String {
        format!("((_ is {}) {term})", self.variant_ctor(ty, v))
    }

    /// Reference constructor and selectors, keyed by the target type.
    pub fn mkref(&self, target: &Ty) -> String {
        format!("mkref${}$", m(target))
    }

    pub fn ref_addr(&self, target: &Ty) -> String {
        format!("ref$addr${}$", m(target))
    }

    pub fn ref_snap(&self, target: &Ty) -> String {
        format!("ref$snap${}$", m(target))
    }

    /// Adds nested types, struct fields and enum payloads until closed.
    pub fn close(&self, types: &mut BTreeSet<Ty>) {
        let mut work: Vec<Ty> = types.iter().cloned().collect();
        while let Some(t) = work.pop() {
            let mut next = Vec::new();
            t.walk(&mut |x| next.push(x.clone()));
            next.extend(self.prog.field_types(&t));
            next.extend(self.prog.enum_variants(&t).iter().filter_map(|(_, p)| p.clone()));
            for n in next {
                if types.insert(n.clone()) {
                    work.push(n);
                }
            }
        }
    }

    /// Datatype declarations and `m2v` definitions for a closed type set.
    pub fn declarations(&self, types: &BTreeSet<Ty>) -> Vec<String> {
        let mut names = Vec::new();
        let mut bodies = Vec::new();
        let mut seen = BTreeSet::new();
        let mut push = |name: String, body: String| {
            if seen.insert(name.clone()) {
                names.push(format!("({name} 0)"));
                bodies.push(body);
            }
        };
        push("Unit".into(), "((unit))".into());
        for t in types {
            match t {
                Ty::SharedRef(inner) | Ty::MutRef(inner) => push(
                    self.mem_sort(t),
                    format!("(({} ({} Int) ({} {})))", self.mkref(inner), self.ref_addr(inner), self.ref_snap(inner), self.mem_sort(inner)),
                ),
                Ty::Struct(..) | Ty::Tuple(_) if !t.is_unit() => {
                    let fs: Vec<String> = self
                        .prog
                        .field_types(t)
                        .iter()
                        .enumerate()
                        .map(|(i, f)| format!("({} {})", self.sel(t, i), self.mem_sort(f)))
                        .collect();
                    push(self.mem_sort(t), format!("(({}{}{}))", self.ctor(t), if fs.is_empty() { "" } else { " " }, fs.join(" ")));
                    if self.has_ref(t) {
                        let vs: Vec<String> = self
                            .prog
                            .field_types(t)
                            .iter()
                            .enumerate()
                            .map(|(i, f)| format!("({} {})", self.vsel(t, i), self.val_sort(f)))
                            .collect();
                        push(self.val_sort(t), format!("(({} {}))", self.vctor(t), vs.join(" ")));
                    }
                }
                Ty::Enum(..) => {
                    let vs = self.prog.enum_variants(t);
                    let ctors: Vec<String> = (0..vs.len())
                        .map(|i| match &vs[i].1 {
                            Some(p) => format!("({} ({} {}))", self.variant_ctor(t, i), self.variant_sel(t, i), self.mem_sort(p)),
                            None => format!("({})", self.variant_ctor(t, i)),
                        })
                        .collect();
                    push(self.mem_sort(t), format!("({})", ctors.join(" ")));
                    if self.has_ref(t) {
                        let ctors: Vec<String> = (0..vs.len())
                            .map(|i| match &vs[i].1 {
                                Some(p) => format!("({} ({} {}))", self.vvariant_ctor(t, i), self.vvariant_sel(t, i), self.val_sort(p)),
                                None => format!("({})", self.vvariant_ctor(t, i)),
                            })
                            .collect();
                        push(self.val_sort(t), format!("({})", ctors.join(" ")));
                    }
                }
                _ => {}
            }
        }
        let mut out = vec![format!("(declare-datatypes ({}) ({}))", names.join(" "), bodies.join(" "))];
        // conversions, innermost first
        let mut convs: Vec<&Ty> = types.iter().filter(|t| matches!(t, Ty::Struct(..) | Ty::Tuple(_) | Ty::Enum(..)) && self.has_ref(t)).collect();
        convs.sort_by_key(|t| (t.depth(), (*t).clone()));
        for t in convs {
            let body = match t {
                Ty::Enum(..) => {
                    let vs = self.prog.enum_variants(t);
                    let mut acc: Option<String> = None;
                    for i in (0..vs.len()).rev() {
                        let v = match &vs[i].1 {
                            Some(p) => app(&self.vvariant_ctor(t, i), &[self.m2v(p, &app(&self.variant_sel(t, i), &["x".into()]))]),
                            None => self.vvariant_ctor(t, i),
                        };
                        acc = Some(match acc {
                            None => v,
                            Some(rest) => ite(&self.is_variant(t, i, "x"), &v, &rest),
                        });
                    }
                    acc.unwrap_or_default()
                }
                _ => {
                    let args: Vec<String> = self
                        .prog
                        .field_types(t)
                        .iter()
                        .enumerate()
                        .map(|(i, f)| self.m2v(f, &app(&self.sel(t, i), &["x".into()])))
                        .collect();
                    app(&self.vctor(t), &args)
                }
            };
            out.push(format!("(define-fun m2v${}$ ((x {})) {} {body})", m(t), self.mem_sort(t), self.val_sort(t)));
        }
        out
    }

    /// Builds the memory snapshot term with the given component terms:
    /// fields for structs and tuples, `(variant, payload)` for enums,
    /// `(address, target)` for references.
    pub fn mem_value(&self, ty: &Ty, parts: &[String], variant: usize) -> String {
        match ty {
            Ty::SharedRef(t) | Ty::MutRef(t) => app(&self.mkref(t), parts),
            Ty::Enum(..) => app(&self.variant_ctor(ty, variant), parts),
            t if Self::is_unit_like(t) => "unit".into(),
            _ => app(&self.ctor(ty), parts),
        }
    }

    /// Same as [`Sorts::mem_value`] for value snapshots. References are
    /// transparent, so `parts` is the single target value.
    pub fn val_value(&self, ty: &Ty, parts: &[String], variant: usize) -> String {
        match ty {
            Ty::SharedRef(_) | Ty::MutRef(_) => parts[0].clone(),
            t if !self.has_ref(t) => self.mem_value(t, parts, variant),
            Ty::Enum(..) => app(&self.vvariant_ctor(ty, variant), parts),
            _ => app(&self.vctor(ty), parts),
        }
    }
}
