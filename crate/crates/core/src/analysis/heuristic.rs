//! Rule-based analyzer for offline runs and tests.
//!
//! Compares the original line with the line produced by the alternative and
//! applies the first matching rule:
//!
//! | rule                                              | category    | score |
//! |---------------------------------------------------|-------------|-------|
//! | alternative line breaks bracket or quote balance  | Incorrect   | 0.0   |
//! | first differing token is a control-flow keyword   | Significant | 0.9   |
//! | first differing token is a called name            | Significant | 0.8   |
//! | first differing token is a literal inside a call  | Significant | 0.8   |
//! | lines differ only by renaming one identifier      | Minor       | 0.1   |
//! | anything else                                     | Minor       | 0.2   |

use async_trait::async_trait;

use super::{AlternativeAssessment, AnalysisError, Analyzer, AssessmentRequest};
use crate::decoding::Category;
use crate::lexer::{self, CommentStyle, LexKind, Lexeme};

const KEYWORDS: &[&str] = &[
    "if", "elif", "else", "for", "while", "do", "loop", "return", "break", "continue", "try",
    "except", "catch", "finally", "raise", "throw", "throws", "match", "switch", "case", "default",
    "yield", "await", "async", "with", "goto", "and", "or", "not", "in", "is", "lambda", "assert",
    "pass", "del", "global", "nonlocal", "unless", "until", "defer", "go", "select", "unsafe",
];

const LITERAL_WORDS: &[&str] = &[
    "True", "False", "None", "true", "false", "null", "nil", "NULL", "nullptr", "undefined",
];

fn is_keyword(l: &Lexeme<'_>) -> bool {
    l.kind == LexKind::Ident && KEYWORDS.contains(&l.text)
}

fn is_literal(l: &Lexeme<'_>) -> bool {
    l.is_literal() || (l.kind == LexKind::Ident && LITERAL_WORDS.contains(&l.text))
}

fn is_plain_ident(l: &Lexeme<'_>) -> bool {
    l.kind == LexKind::Ident && !is_keyword(l) && !is_literal(l)
}

fn is_callee(tokens: &[Lexeme<'_>], i: usize) -> bool {
    is_plain_ident(&tokens[i]) && tokens.get(i + 1).is_some_and(|n| n.text == "(")
}

fn shown(l: Option<&Lexeme<'_>>) -> String {
    match l {
        Some(l) => format!("`{}`", l.text),
        None => "nothing".to_string(),
    }
}

/// Deterministic analyzer implementing the rule table above.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicAnalyzer;

impl HeuristicAnalyzer {
    pub fn analyze(&self, req: &AssessmentRequest) -> AlternativeAssessment {
        let style = CommentStyle::for_language(&req.language_hint);
        let base_line = format!("{}{}", req.line_prefix, req.base_preview);
        let alt_line = format!("{}{}", req.line_prefix, req.preview);
        let mut a = classify(&base_line, &alt_line, style, req);
        if !req.preview_available {
            a.detailed_explanation
                .push_str(" Judged from the token alone because no preview was available.");
        }
        a
    }
}

fn assessment(category: Category, score: f64, summary: String, detail: String) -> AlternativeAssessment {
    AlternativeAssessment {
        detailed_explanation: detail,
        summary,
        category,
        importance_score: score,
    }
}

fn classify(
    base_line: &str,
    alt_line: &str,
    style: CommentStyle,
    req: &AssessmentRequest,
) -> AlternativeAssessment {
    let base_bal = lexer::balance(base_line, style);
    let alt_bal = lexer::balance(alt_line, style);
    if alt_bal.mismatched > base_bal.mismatched
        || alt_bal.excess_closers > base_bal.excess_closers
        || alt_bal.unterminated_strings > base_bal.unterminated_strings
    {
        return assessment(
            Category::Incorrect,
            0.0,
            "would not parse (unbalanced brackets or quotes)".into(),
            format!(
                "Choosing `{}` over `{}` produces `{}`, whose brackets or string quotes \
                 do not balance the way the original line does, so the code would not parse.",
                req.alternative_token,
                req.top_token,
                alt_line.trim()
            ),
        );
    }

    let base = lexer::significant(base_line, style);
    let alt = lexer::significant(alt_line, style);
    let d = base
        .iter()
        .zip(&alt)
        .take_while(|(x, y)| x.text == y.text)
        .count();
    if d == base.len() && d == alt.len() {
        return assessment(
            Category::Minor,
            0.2,
            "formatting-only change".into(),
            format!(
                "`{}` instead of `{}` changes only whitespace or comments; \
                 the code itself is the same.",
                req.alternative_token, req.top_token
            ),
        );
    }
    let (a, b) = (base.get(d), alt.get(d));
    let (sa, sb) = (shown(a), shown(b));

    if a.is_some_and(is_keyword) || b.is_some_and(is_keyword) {
        return assessment(
            Category::Significant,
            0.9,
            format!("changes control flow: {sa} becomes {sb}"),
            format!(
                "The line diverges at a control-flow keyword ({sa} becomes {sb}), which \
                 changes which code runs and when. Resulting line: `{}`.",
                alt_line.trim()
            ),
        );
    }

    if (a.is_some() && is_callee(&base, d)) || (b.is_some() && is_callee(&alt, d)) {
        return assessment(
            Category::Significant,
            0.8,
            format!("calls {sb} instead of {sa}"),
            format!(
                "The alternative invokes a different function ({sb} rather than {sa}). \
                 Different functions can differ in behavior, safety and performance even \
                 when their signatures look alike. Resulting line: `{}`.",
                alt_line.trim()
            ),
        );
    }

    let depth = if d < base.len() {
        lexer::depths(&base)[d]
    } else {
        lexer::depths(&alt)[d]
    };
    if depth > 0 && (a.is_some_and(is_literal) || b.is_some_and(is_literal)) {
        return assessment(
            Category::Significant,
            0.8,
            format!("passes {sb} instead of {sa}"),
            format!(
                "A literal argument changes ({sa} becomes {sb}), so the call receives a \
                 different value. Resulting line: `{}`.",
                alt_line.trim()
            ),
        );
    }

    if let (Some(a), Some(b)) = (a, b) {
        if is_plain_ident(a) && is_plain_ident(b) && base.len() == alt.len() {
            let renamed = base.iter().zip(&alt).all(|(x, y)| {
                x.text == y.text || (x.text == a.text && y.text == b.text)
            });
            if renamed {
                return assessment(
                    Category::Minor,
                    0.1,
                    format!("renames {sa} to {sb}"),
                    format!(
                        "Only the name {sa} changes to {sb}; behavior is unaffected as long \
                         as the name is used consistently."
                    ),
                );
            }
        }
    }

    assessment(
        Category::Minor,
        0.2,
        format!("rewrites the line from {sa} onward"),
        format!(
            "The line takes a different shape starting at {sa} (now {sb}) without changing \
             a called function, a literal argument or control flow. Resulting line: `{}`.",
            alt_line.trim()
        ),
    )
}

#[async_trait]
impl Analyzer for HeuristicAnalyzer {
    async fn assess(&self, req: &AssessmentRequest) -> Result<AlternativeAssessment, AnalysisError> {
        Ok(self.analyze(req))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::check_assessment;

    fn req(line_prefix: &str, base: &str, top: &str, alt: &str, preview: &str) -> AssessmentRequest {
        AssessmentRequest {
            base_completion: format!("{line_prefix}{base}"),
            top_token: top.into(),
            alternative_token: alt.into(),
            preview: preview.into(),
            surrounding_context: String::new(),
            line_prefix: line_prefix.into(),
            base_preview: base.into(),
            language_hint: "python".into(),
            preview_available: true,
        }
    }

    fn judge(r: &AssessmentRequest) -> (Category, f64) {
        let a = HeuristicAnalyzer.analyze(r);
        check_assessment(&a).unwrap();
        (a.category, a.importance_score)
    }

    #[test]
    fn identifier_rename_is_minor() {
        let r = req("", "hashed = h(x)", "hashed", "digest", "digest = h(x)");
        assert_eq!(judge(&r), (Category::Minor, 0.1));
    }

    #[test]
    fn unbalanced_preview_is_incorrect() {
        let r = req("print(", "\"hi\")", "\"", "\"", "\"hi)");
        assert_eq!(judge(&r), (Category::Incorrect, 0.0));
        let r = req("x = f(a", ")", ")", "))", "))");
        assert_eq!(judge(&r), (Category::Incorrect, 0.0));
    }

    #[test]
    fn open_bracket_at_line_end_is_fine() {
        let r = req(
            "hashed = hashlib.",
            "sha256(password.encode()).hexdigest()",
            "sha256",
            "scrypt",
            "scrypt(password.encode(),",
        );
        let a = HeuristicAnalyzer.analyze(&r);
        assert_eq!(a.category, Category::Significant);
        assert_eq!(a.importance_score, 0.8);
        assert_eq!(a.summary, "calls `scrypt` instead of `sha256`");
    }

    #[test]
    fn keyword_change_is_most_significant() {
        let r = req("    ", "if ok:", "if", "while", "while ok:");
        assert_eq!(judge(&r), (Category::Significant, 0.9));
    }

    #[test]
    fn literal_in_call() {
        let r = req("b = password.encode(", ")", ")", "\"utf-8\"", "\"utf-8\")");
        assert_eq!(judge(&r), (Category::Significant, 0.8));
        // A literal outside any call falls through.
        let r = req("n = ", "10", "10", "20", "20");
        assert_eq!(judge(&r), (Category::Minor, 0.2));
    }

    #[test]
    fn fallback_and_formatting() {
        let r = req("x = ", "a + b", "a", "a", "a  +  b");
        assert_eq!(judge(&r), (Category::Minor, 0.2));
        let r = req("x = ", "a + b", "a", "a", "a - b");
        assert_eq!(judge(&r), (Category::Minor, 0.2));
    }

    #[test]
    fn flags_token_only_judgement() {
        let mut r = req("", "f(x)", "f", "g", "g(x)");
        r.preview_available = false;
        let a = HeuristicAnalyzer.analyze(&r);
        assert!(a.detailed_explanation.contains("no preview"));
    }

    #[test]
    fn pure_function_of_request() {
        let r = req("x = ", "foo(1)", "foo", "bar", "bar(1)");
        assert_eq!(HeuristicAnalyzer.analyze(&r), HeuristicAnalyzer.analyze(&r));
    }
}
