use std::collections::BTreeMap;
use std::fmt;

/// Concrete (or, inside generic templates, parametric) Caplet types.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Int,
    Bool,
    SharedRef(Box<Ty>),
    MutRef(Box<Ty>),
    RawPtr(Box<Ty>, bool),
    Struct(String, Vec<Ty>),
    Enum(String, Vec<Ty>),
    Tuple(Vec<Ty>),
    UnsafeCell(Box<Ty>),
    Param(String),
}

impl Ty {
    pub fn unit() -> Ty {
        Ty::Tuple(vec![])
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Ty::Tuple(v) if v.is_empty())
    }

    pub fn is_ref(&self) -> bool {
        matches!(self, Ty::SharedRef(_) | Ty::MutRef(_))
    }

    /// Target of a reference or raw pointer.
    pub fn pointee(&self) -> Option<&Ty> {
        match self {
            Ty::SharedRef(t) | Ty::MutRef(t) | Ty::RawPtr(t, _) => Some(t),
            _ => None,
        }
    }

    /// Int, Bool, raw pointers, shared references and tuples of copy types.
    pub fn is_copy(&self) -> bool {
        match self {
            Ty::Int | Ty::Bool | Ty::RawPtr(..) | Ty::SharedRef(_) => true,
            Ty::Tuple(ts) => ts.iter().all(Ty::is_copy),
            _ => false,
        }
    }

    pub fn is_concrete(&self) -> bool {
        match self {
            Ty::Param(_) => false,
            Ty::Int | Ty::Bool => true,
            Ty::SharedRef(t) | Ty::MutRef(t) | Ty::RawPtr(t, _) | Ty::UnsafeCell(t) => t.is_concrete(),
            Ty::Struct(_, a) | Ty::Enum(_, a) | Ty::Tuple(a) => a.iter().all(Ty::is_concrete),
        }
    }

    pub fn subst(&self, map: &BTreeMap<String, Ty>) -> Ty {
        match self {
            Ty::Param(p) => map.get(p).cloned().unwrap_or_else(|| self.clone()),
            Ty::Int | Ty::Bool => self.clone(),
            Ty::SharedRef(t) => Ty::SharedRef(Box::new(t.subst(map))),
            Ty::MutRef(t) => Ty::MutRef(Box::new(t.subst(map))),
            Ty::RawPtr(t, m) => Ty::RawPtr(Box::new(t.subst(map)), *m),
            Ty::UnsafeCell(t) => Ty::UnsafeCell(Box::new(t.subst(map))),
            Ty::Struct(n, a) => Ty::Struct(n.clone(), a.iter().map(|t| t.subst(map)).collect()),
            Ty::Enum(n, a) => Ty::Enum(n.clone(), a.iter().map(|t| t.subst(map)).collect()),
            Ty::Tuple(a) => Ty::Tuple(a.iter().map(|t| t.subst(map)).collect()),
        }
    }

    /// Nesting depth: primitives are 0, each constructor adds one.
    pub fn depth(&self) -> usize {
        match self {
            Ty::Int | Ty::Bool | Ty::Param(_) => 0,
            Ty::SharedRef(t) | Ty::MutRef(t) | Ty::RawPtr(t, _) | Ty::UnsafeCell(t) => 1 + t.depth(),
            Ty::Struct(_, a) | Ty::Enum(_, a) | Ty::Tuple(a) => 1 + a.iter().map(Ty::depth).max().unwrap_or(0),
        }
    }

    /// Type name usable inside SMT-LIB symbols (no whitespace, commas or
    /// parentheses).
    pub fn mangle(&self) -> String {
        match self {
            Ty::Int => "i32".into(),
            Ty::Bool => "bool".into(),
            Ty::SharedRef(t) => format!("&{}", t.mangle()),
            Ty::MutRef(t) => format!("&mut.{}", t.mangle()),
            Ty::RawPtr(t, true) => format!("*mut.{}", t.mangle()),
            Ty::RawPtr(t, false) => format!("*const.{}", t.mangle()),
            Ty::UnsafeCell(t) => format!("UnsafeCell<{}>", t.mangle()),
            Ty::Struct(n, a) | Ty::Enum(n, a) if a.is_empty() => n.clone(),
            Ty::Struct(n, a) | Ty::Enum(n, a) => {
                format!("{n}<{}>", a.iter().map(Ty::mangle).collect::<Vec<_>>().join("."))
            }
            Ty::Tuple(a) => format!("Tup<{}>", a.iter().map(Ty::mangle).collect::<Vec<_>>().join(".")),
            Ty::Param(p) => format!("?{p}"),
        }
    }

    /// Visits this type and every type nested in it.
    pub fn walk(&self, f: &mut dyn FnMut(&Ty)) {
        f(self);
        match self {
            Ty::SharedRef(t) | Ty::MutRef(t) | Ty::RawPtr(t, _) | Ty::UnsafeCell(t) => t.walk(f),
            Ty::Struct(_, a) | Ty::Enum(_, a) | Ty::Tuple(a) => a.iter().for_each(|t| t.walk(f)),
            Ty::Int | Ty::Bool | Ty::Param(_) => {}
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => write!(f, "i32"),
            Ty::Bool => write!(f, "bool"),
            Ty::SharedRef(t) => write!(f, "&{t}"),
            Ty::MutRef(t) => write!(f, "&mut {t}"),
            Ty::RawPtr(t, true) => write!(f, "*mut {t}"),
            Ty::RawPtr(t, false) => write!(f, "*const {t}"),
            Ty::UnsafeCell(t) => write!(f, "UnsafeCell<{t}>"),
            Ty::Struct(n, a) | Ty::Enum(n, a) => {
                write!(f, "{n}")?;
                if !a.is_empty() {
                    write!(f, "<{}>", a.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", "))?;
                }
                Ok(())
            }
            Ty::Tuple(a) if a.len() == 1 => write!(f, "({},)", a[0]),
            Ty::Tuple(a) => write!(f, "({})", a.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")),
            Ty::Param(p) => write!(f, "{p}"),
        }
    }
}

/// Purity levels, ordered from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Purity {
    PureValue,
    PureMemory,
    PureUnstable,
}

impl fmt::Display for Purity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purity::PureValue => "pure",
            Purity::PureMemory => "pure_memory",
            Purity::PureUnstable => "pure_unstable",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(t: Ty) -> Ty {
        Ty::Struct("Cell".into(), vec![t])
    }

    #[test]
    fn copy_types() {
        assert!(Ty::Int.is_copy());
        assert!(Ty::SharedRef(Box::new(cell(Ty::Int))).is_copy());
        assert!(Ty::RawPtr(Box::new(Ty::Int), true).is_copy());
        assert!(Ty::Tuple(vec![Ty::Int, Ty::Bool]).is_copy());
        assert!(!Ty::MutRef(Box::new(Ty::Int)).is_copy());
        assert!(!cell(Ty::Int).is_copy());
        assert!(!Ty::Tuple(vec![Ty::Int, Ty::MutRef(Box::new(Ty::Int))]).is_copy());
    }

    #[test]
    fn mangled_names_are_smt_safe() {
        let t = Ty::Enum(
            "Result".into(),
            vec![Ty::Struct("Ref".into(), vec![Ty::Int]), Ty::Tuple(vec![Ty::MutRef(Box::new(Ty::Bool))])],
        );
        let m = t.mangle();
        assert_eq!(m, "Result<Ref<i32>.Tup<&mut.bool>>");
        assert!(!m.contains([' ', ',', '(', ')', '|']));
    }

    #[test]
    fn substitution_reaches_nested_params() {
        let mut map = BTreeMap::new();
        map.insert("T".to_string(), Ty::Int);
        let t = Ty::SharedRef(Box::new(cell(Ty::Param("T".into()))));
        assert!(!t.is_concrete());
        assert_eq!(t.subst(&map), Ty::SharedRef(Box::new(cell(Ty::Int))));
    }
}
