use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

/// What to do with a `<MATH>`/`<NOTE>`/`<TAG>` span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialTokenMode {
    /// Remove the span together with its delimiters.
    Drop,
    /// Remove only the delimiters.
    KeepContent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("unclosed special token <{0}>")]
    Unclosed(&'static str),
    #[error("closing </{0}> without a matching opener")]
    UnexpectedClose(&'static str),
}

const TOKENS: [&str; 3] = ["MATH", "NOTE", "TAG"];

fn caption_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?i:figure|fig\.?)\s*\d+[A-Za-z]?(?:\s*[:.]\s*|\s+|$)").unwrap()
    })
}

/// Removes leading figure labels such as `Figure 1:`, `Fig. 2b.` or `fig 3`.
///
/// Repeats until no label remains, so the result is a fixed point.
pub fn strip_caption_tags(caption: &str) -> String {
    let re = caption_tag();
    let mut rest = caption;
    while let Some(m) = re.find(rest) {
        if m.end() == 0 {
            break;
        }
        rest = &rest[m.end()..];
    }
    rest.to_string()
}

/// Handles the three special-token spans; nesting is allowed, crossing
/// spans are reported as a delimiter error.
pub fn strip_special_tokens(text: &str, mode: SpecialTokenMode) -> Result<String, TextError> {
    let mut out = String::with_capacity(text.len());
    let mut stack: Vec<&'static str> = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        if let Some((name, closing, len)) = delimiter_at(rest) {
            if closing {
                match stack.pop() {
                    Some(open) if open == name => {}
                    Some(open) => return Err(TextError::Unclosed(open)),
                    None => return Err(TextError::UnexpectedClose(name)),
                }
            } else {
                stack.push(name);
            }
            rest = &rest[len..];
            continue;
        }
        let ch = rest.chars().next().unwrap();
        if mode == SpecialTokenMode::KeepContent || stack.is_empty() {
            out.push(ch);
        }
        rest = &rest[ch.len_utf8()..];
    }
    match stack.pop() {
        Some(open) => Err(TextError::Unclosed(open)),
        None => Ok(out),
    }
}

fn delimiter_at(s: &str) -> Option<(&'static str, bool, usize)> {
    let body = s.strip_prefix('<')?;
    let (closing, body) = match body.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, body),
    };
    TOKENS.iter().find_map(|&name| {
        let after = body.strip_prefix(name)?.strip_prefix('>')?;
        Some((name, closing, s.len() - after.len()))
    })
}

/// Abstract text as the scorers see it: special spans dropped. Unbalanced
/// markup is kept as-is.
pub fn clean_abstract(raw: &str) -> String {
    strip_special_tokens(raw, SpecialTokenMode::Drop).unwrap_or_else(|_| raw.to_string())
}

/// Caption text as the scorers see it: special spans dropped, then leading
/// figure labels removed.
pub fn clean_caption(raw: &str) -> String {
    strip_caption_tags(&clean_abstract(raw))
}

/// Whitespace tokens after dropping special-token spans.
pub fn whitespace_tokens(raw: &str) -> usize {
    match strip_special_tokens(raw, SpecialTokenMode::Drop) {
        Ok(s) => s.split_whitespace().count(),
        Err(_) => raw.split_whitespace().count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn caption_tag_examples() {
        assert_eq!(
            strip_caption_tags("Figure 1: Overview of the model."),
            "Overview of the model."
        );
        assert_eq!(
            strip_caption_tags("Overview of the model."),
            "Overview of the model."
        );
        assert_eq!(strip_caption_tags(""), "");
        assert_eq!(strip_caption_tags("Fig. 3b. Loss curves"), "Loss curves");
        assert_eq!(strip_caption_tags("FIG 12 results"), "results");
        assert_eq!(strip_caption_tags("Figure 2"), "");
        assert_eq!(strip_caption_tags("Figures show x"), "Figures show x");
        assert_eq!(strip_caption_tags("Figure 1abc"), "Figure 1abc");
        assert_eq!(strip_caption_tags("Figure 1: Figure 2: x"), "x");
    }

    #[test]
    fn special_token_modes() {
        let s = "loss <MATH>L_C</MATH> value";
        assert_eq!(
            strip_special_tokens(s, SpecialTokenMode::Drop).unwrap(),
            "loss  value"
        );
        assert_eq!(
            strip_special_tokens(s, SpecialTokenMode::KeepContent).unwrap(),
            "loss L_C value"
        );
        assert_eq!(
            strip_special_tokens("a <MATH>b", SpecialTokenMode::Drop),
            Err(TextError::Unclosed("MATH"))
        );
        assert_eq!(
            strip_special_tokens("a </TAG> b", SpecialTokenMode::KeepContent),
            Err(TextError::UnexpectedClose("TAG"))
        );
        assert_eq!(
            strip_special_tokens("<NOTE>x <MATH>y</NOTE></MATH>", SpecialTokenMode::Drop),
            Err(TextError::Unclosed("MATH"))
        );
        assert_eq!(
            strip_special_tokens("a<NOTE>b<MATH>c</MATH></NOTE>d", SpecialTokenMode::Drop).unwrap(),
            "ad"
        );
        assert_eq!(
            strip_special_tokens("x < y <TAGS>", SpecialTokenMode::Drop).unwrap(),
            "x < y <TAGS>"
        );
    }

    #[test]
    fn token_counts_skip_math() {
        assert_eq!(whitespace_tokens("we use <MATH>a + b</MATH> here"), 3);
        assert_eq!(whitespace_tokens(""), 0);
    }

    proptest! {
        #[test]
        fn caption_stripping_is_idempotent(
            prefix in prop::sample::select(vec!["", "Figure 1: ", "Fig. 2a. ", "fig 3 ", "FIGURE 10:", " Figure 4. Fig 5 "]),
            body in "[ A-Za-z0-9:.]{0,30}",
        ) {
            let x = format!("{prefix}{body}");
            let once = strip_caption_tags(&x);
            prop_assert_eq!(strip_caption_tags(&once), once);
        }

        #[test]
        fn text_without_markers_unchanged(s in "[^<>]{0,40}") {
            prop_assert_eq!(strip_special_tokens(&s, SpecialTokenMode::Drop).unwrap(), s.clone());
            prop_assert_eq!(strip_special_tokens(&s, SpecialTokenMode::KeepContent).unwrap(), s);
        }
    }
}
