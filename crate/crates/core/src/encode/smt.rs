//! Small helpers for building SMT-LIB 2 text.

/// `(f a b ..)`, or just `f` without arguments.
pub fn app(f: &str, args: &[String]) -> String {
    if args.is_empty() {
        return f.to_string();
    }
    let mut s = String::with_capacity(f.len() + 2 + args.iter().map(|a| a.len() + 1).sum::<usize>());
    s.push('(');
    s.push_str(f);
    for a in args {
        s.push(' ');
        s.push_str(a);
    }
    s.push(')');
    s
}

pub fn and(parts: Vec<String>) -> String {
    let parts: Vec<String> = parts.into_iter().filter(|p| p != "true").collect();
    match parts.len() {
        0 => "true".into(),
        1 => parts.into_iter().next().unwrap(),
        _ => app("and", &parts),
    }
}

pub fn or(parts: Vec<String>) -> String {
    match parts.len() {
        0 => "false".into(),
        1 => parts.into_iter().next().unwrap(),
        _ => app("or", &parts),
    }
}

pub fn not(a: &str) -> String {
    format!("(not {a})")
}

pub fn eq(a: &str, b: &str) -> String {
    format!("(= {a} {b})")
}

pub fn implies(a: &str, b: &str) -> String {
    if a == "true" {
        return b.to_string();
    }
    format!("(=> {a} {b})")
}

pub fn ite(c: &str, a: &str, b: &str) -> String {
    format!("(ite {c} {a} {b})")
}

pub fn int(i: i64) -> String {
    if i < 0 {
        format!("(- {})", i.unsigned_abs())
    } else {
        i.to_string()
    }
}

/// `(forall ((x S) ..) body)`
pub fn forall(vars: &[(&str, &str)], body: &str) -> String {
    let vs: Vec<String> = vars.iter().map(|(v, s)| format!("({v} {s})")).collect();
    format!("(forall ({}) {body})", vs.join(" "))
}

/// Quotes a symbol with `|..|` if it contains characters outside the
/// simple-symbol alphabet.
pub fn sym(s: &str) -> String {
    let simple = !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        s.to_string()
    } else {
        format!("|{}|", s.replace(['|', '\\'], "_"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_literals() {
        assert_eq!(int(-3), "(- 3)");
        assert_eq!(int(4), "4");
    }

    #[test]
    fn trivial_connectives_collapse() {
        assert_eq!(and(vec![]), "true");
        assert_eq!(and(vec!["true".into(), "p".into()]), "p");
        assert_eq!(implies("true", "q"), "q");
        assert_eq!(or(vec!["a".into()]), "a");
    }

    #[test]
    fn symbols_are_quoted_when_needed() {
        assert_eq!(sym("mem$i32$"), "mem$i32$");
        assert_eq!(sym("a b"), "|a b|");
        assert_eq!(sym("Cell<i32>"), "Cell<i32>");
    }
}
