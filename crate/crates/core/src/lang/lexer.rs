use super::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Le,
    Ge,
    Comma,
    Semi,
    Colon,
    PathSep,
    Dot,
    Arrow,
    FatArrow,
    Eq,
    EqEq,
    MemEq,
    Implies,
    Ne,
    Bang,
    Amp,
    AndAnd,
    OrOr,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Hash,
    Underscore,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Eof => "end of file".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::PathSep => "::",
            Tok::Dot => ".",
            Tok::Arrow => "->",
            Tok::FatArrow => "=>",
            Tok::Eq => "=",
            Tok::EqEq => "==",
            Tok::MemEq => "====",
            Tok::Implies => "==>",
            Tok::Ne => "!=",
            Tok::Bang => "!",
            Tok::Amp => "&",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Hash => "#",
            Tok::Underscore => "_",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const SYMBOLS: &[(&str, Tok)] = &[
    ("====", Tok::MemEq),
    ("==>", Tok::Implies),
    ("==", Tok::EqEq),
    ("=>", Tok::FatArrow),
    ("!=", Tok::Ne),
    ("<=", Tok::Le),
    (">=", Tok::Ge),
    ("->", Tok::Arrow),
    ("::", Tok::PathSep),
    ("&&", Tok::AndAnd),
    ("||", Tok::OrOr),
    ("(", Tok::LParen),
    (")", Tok::RParen),
    ("{", Tok::LBrace),
    ("}", Tok::RBrace),
    ("[", Tok::LBracket),
    ("]", Tok::RBracket),
    ("<", Tok::Lt),
    (">", Tok::Gt),
    (",", Tok::Comma),
    (";", Tok::Semi),
    (":", Tok::Colon),
    (".", Tok::Dot),
    ("=", Tok::Eq),
    ("!", Tok::Bang),
    ("&", Tok::Amp),
    ("+", Tok::Plus),
    ("-", Tok::Minus),
    ("*", Tok::Star),
    ("/", Tok::Slash),
    ("%", Tok::Percent),
    ("#", Tok::Hash),
];

/// Splits source text into tokens. Line comments, block comments and
/// whitespace are skipped; the trailing token is always `Eof`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if bytes[*i] == b'\n' {
                *line += 1;
                *col = 1;
            } else if (bytes[*i] & 0xC0) != 0x80 {
                *col += 1;
            }
            *i += 1;
        }
    };

    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() || (c & 0x80) != 0 && is_unicode_space(src, i) {
            let n = src[i..].chars().next().map(|ch| ch.len_utf8()).unwrap_or(1);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        let span = Span::new(line, col);
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let mut depth = 0usize;
            while i < bytes.len() {
                if src[i..].starts_with("/*") {
                    depth += 1;
                    advance(&mut i, &mut line, &mut col, 2);
                } else if src[i..].starts_with("*/") {
                    depth -= 1;
                    advance(&mut i, &mut line, &mut col, 2);
                    if depth == 0 {
                        continue 'outer;
                    }
                } else {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            return Err(Diagnostic::new(span, "unterminated block comment"));
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let digits: String = src[start..i].chars().filter(|c| *c != '_').collect();
            let n = digits
                .parse::<i64>()
                .map_err(|_| Diagnostic::new(span, format!("integer literal `{digits}` out of range")))?;
            out.push(Token { tok: Tok::Int(n), span });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let word = &src[start..i];
            let tok = if word == "_" { Tok::Underscore } else { Tok::Ident(word.to_string()) };
            out.push(Token { tok, span });
            continue;
        }
        if c == b'\'' {
            return Err(Diagnostic::new(span, "lifetimes and character literals are not part of the language"));
        }
        for (text, tok) in SYMBOLS {
            if src[i..].starts_with(text) {
                advance(&mut i, &mut line, &mut col, text.len());
                out.push(Token { tok: tok.clone(), span });
                continue 'outer;
            }
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        return Err(Diagnostic::new(span, format!("unexpected character `{ch}`")));
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    Ok(out)
}

fn is_unicode_space(src: &str, i: usize) -> bool {
    src[i..].chars().next().map(char::is_whitespace).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn equality_family_uses_longest_match() {
        assert_eq!(toks("a ==== b == c ==> d => e"), vec![
            Tok::Ident("a".into()),
            Tok::MemEq,
            Tok::Ident("b".into()),
            Tok::EqEq,
            Tok::Ident("c".into()),
            Tok::Implies,
            Tok::Ident("d".into()),
            Tok::FatArrow,
            Tok::Ident("e".into()),
            Tok::Eof,
        ]);
    }

    #[test]
    fn comments_are_skipped_and_positions_tracked() {
        let t = tokenize("/* a /* nested */ */ x // tail\n  y").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("x".into()));
        assert_eq!((t[0].span.line, t[0].span.col), (1, 22));
        assert_eq!((t[1].span.line, t[1].span.col), (2, 3));
    }

    #[test]
    fn nested_generic_close_is_two_tokens() {
        assert_eq!(toks("A<B<C>>"), vec![
            Tok::Ident("A".into()),
            Tok::Lt,
            Tok::Ident("B".into()),
            Tok::Lt,
            Tok::Ident("C".into()),
            Tok::Gt,
            Tok::Gt,
            Tok::Eof,
        ]);
    }

    #[test]
    fn bad_character_reports_position() {
        let e = tokenize("fn f() {\n  $ }").unwrap_err();
        assert_eq!((e.span.line, e.span.col), (2, 3));
    }
}
