//! Command text normalization shared by the anonymizer, grammar and metrics.

const EDGE_PUNCTUATION: &[char] = &[
    '.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}',
];

/// Lowercases, splits on whitespace and strips punctuation from both ends of
/// each word. Inner apostrophes (`what's`) and class tokens (`<object>`) are
/// kept; words that are pure punctuation disappear.
pub fn tokenize_command(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(EDGE_PUNCTUATION).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Joins tokens with single spaces.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_edge_punctuation_and_lowercases() {
        assert_eq!(
            tokenize_command("Fetch an Apple from the kitchen."),
            vec!["fetch", "an", "apple", "from", "the", "kitchen"]
        );
        assert_eq!(
            tokenize_command("\u{201c}how many cokes are left?\u{201d}"),
            vec!["how", "many", "cokes", "are", "left"]
        );
        assert_eq!(tokenize_command("what's the <object> , please"), vec!["what's", "the", "<object>", "please"]);
        assert!(tokenize_command("  ... ").is_empty());
    }
}
