//! A forgiving, language-agnostic source lexer.
//!
//! Good enough to compare two lines of code token by token and to check
//! bracket and quote balance. It never fails: anything it does not
//! recognize becomes a single-character punctuation lexeme.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexKind {
    Ident,
    Number,
    Str { terminated: bool },
    Punct,
    Whitespace,
    Comment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lexeme<'a> {
    pub kind: LexKind,
    pub text: &'a str,
    pub start: usize,
}

impl Lexeme<'_> {
    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, LexKind::Whitespace | LexKind::Comment)
    }

    pub fn is_literal(&self) -> bool {
        matches!(self.kind, LexKind::Number | LexKind::Str { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommentStyle {
    /// `#` to end of line.
    Hash,
    /// `//` to end of line.
    Slash,
    #[default]
    None,
}

impl CommentStyle {
    pub fn for_language(hint: &str) -> Self {
        match hint.to_ascii_lowercase().as_str() {
            "python" | "py" | "ruby" | "rb" | "shell" | "sh" | "bash" | "yaml" | "toml" | "r"
            | "perl" => CommentStyle::Hash,
            "c" | "h" | "cpp" | "c++" | "cc" | "rust" | "rs" | "javascript" | "js"
            | "typescript" | "ts" | "java" | "go" | "kotlin" | "swift" | "csharp" | "cs"
            | "scala" | "php" => CommentStyle::Slash,
            _ => CommentStyle::None,
        }
    }
}

const STRING_PREFIXES: &[&str] = &[
    "b", "r", "f", "u", "br", "rb", "fr", "rf", "B", "R", "F", "U", "L",
];

pub fn lex(src: &str, comments: CommentStyle) -> Vec<Lexeme<'_>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let start = i;
        let c = src[i..].chars().next().unwrap();
        let kind = if c.is_whitespace() {
            i += src[i..]
                .find(|ch: char| !ch.is_whitespace())
                .unwrap_or(src.len() - i);
            LexKind::Whitespace
        } else if starts_comment(&src[i..], comments) {
            i += src[i..].find('\n').unwrap_or(src.len() - i);
            LexKind::Comment
        } else if c == '"' || c == '\'' || c == '`' {
            let (len, terminated) = scan_string(&src[i..]);
            i += len;
            LexKind::Str { terminated }
        } else if c.is_alphabetic() || c == '_' {
            i += src[i..]
                .find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                .unwrap_or(src.len() - i);
            let word = &src[start..i];
            if i < src.len()
                && matches!(bytes[i], b'"' | b'\'')
                && STRING_PREFIXES.contains(&word)
            {
                let (len, terminated) = scan_string(&src[i..]);
                i += len;
                LexKind::Str { terminated }
            } else {
                LexKind::Ident
            }
        } else if c.is_ascii_digit() {
            i += src[i..]
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_' || ch == '.'))
                .unwrap_or(src.len() - i);
            LexKind::Number
        } else {
            i += c.len_utf8();
            LexKind::Punct
        };
        out.push(Lexeme {
            kind,
            text: &src[start..i],
            start,
        });
    }
    out
}

fn starts_comment(rest: &str, style: CommentStyle) -> bool {
    match style {
        CommentStyle::Hash => rest.starts_with('#'),
        CommentStyle::Slash => rest.starts_with("//"),
        CommentStyle::None => false,
    }
}

/// Length of the string literal at the start of `rest` and whether it closes.
/// Single-quoted forms stop at a newline; triple-quoted forms may span lines.
fn scan_string(rest: &str) -> (usize, bool) {
    let quote = rest.chars().next().unwrap();
    let triple: String = std::iter::repeat_n(quote, 3).collect();
    if quote != '`' && rest.starts_with(&triple) {
        return match rest[3..].find(&triple) {
            Some(end) => (3 + end + 3, true),
            None => (rest.len(), false),
        };
    }
    let mut escaped = false;
    for (off, ch) in rest.char_indices().skip(1) {
        if escaped {
            escaped = false;
            continue;
        }
        match ch {
            '\\' => escaped = true,
            '\n' if quote != '`' => return (off, false),
            c if c == quote => return (off + c.len_utf8(), true),
            _ => {}
        }
    }
    (rest.len(), false)
}

/// Lexemes without whitespace and comments.
pub fn significant(src: &str, comments: CommentStyle) -> Vec<Lexeme<'_>> {
    lex(src, comments)
        .into_iter()
        .filter(|l| !l.is_trivia())
        .collect()
}

fn closer_for(open: &str) -> Option<&'static str> {
    match open {
        "(" => Some(")"),
        "[" => Some("]"),
        "{" => Some("}"),
        _ => None,
    }
}

fn is_closer(s: &str) -> bool {
    matches!(s, ")" | "]" | "}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Balance {
    /// Closers whose type does not match the innermost open bracket.
    pub mismatched: usize,
    /// Closers seen with no open bracket on the line.
    pub excess_closers: usize,
    pub unterminated_strings: usize,
    /// Brackets still open at the end of the text.
    pub open: usize,
}

pub fn balance(src: &str, comments: CommentStyle) -> Balance {
    let mut stack: Vec<&str> = Vec::new();
    let mut b = Balance::default();
    for l in lex(src, comments) {
        match l.kind {
            LexKind::Str { terminated: false } => b.unterminated_strings += 1,
            LexKind::Punct if closer_for(l.text).is_some() => stack.push(l.text),
            LexKind::Punct if is_closer(l.text) => match stack.pop() {
                Some(open) if closer_for(open) == Some(l.text) => {}
                Some(_) => b.mismatched += 1,
                None => b.excess_closers += 1,
            },
            _ => {}
        }
    }
    b.open = stack.len();
    b
}

/// Bracket nesting depth before each lexeme of `lexemes`.
pub fn depths(lexemes: &[Lexeme<'_>]) -> Vec<usize> {
    let mut depth = 0usize;
    lexemes
        .iter()
        .map(|l| {
            let before = depth;
            if l.kind == LexKind::Punct {
                if closer_for(l.text).is_some() {
                    depth += 1;
                } else if is_closer(l.text) {
                    depth = depth.saturating_sub(1);
                }
            }
            before
        })
        .collect()
}

/// Splits text into token-like pieces, each carrying its leading whitespace,
/// the way subword tokenizers glue a space onto the following word.
/// Concatenating the pieces reproduces the input exactly.
pub fn segment(src: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut pending_start: Option<usize> = None;
    for l in lex(src, CommentStyle::None) {
        if l.kind == LexKind::Whitespace {
            // A whitespace run containing a newline becomes its own piece so
            // that lines stay separable.
            if l.text.contains('\n') {
                if let Some(s) = pending_start.take() {
                    pieces.push(&src[s..l.start]);
                }
                pieces.push(l.text);
            } else {
                pending_start.get_or_insert(l.start);
            }
            continue;
        }
        let s = pending_start.take().unwrap_or(l.start);
        pieces.push(&src[s..l.start + l.text.len()]);
    }
    if let Some(s) = pending_start {
        pieces.push(&src[s..]);
    }
    pieces
}
