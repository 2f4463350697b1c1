//! Target-side tokenization.

/// Lowercases and splits on whitespace, separating punctuation into its own
/// tokens. Apostrophes and hyphens inside words are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let inner = i > 0 && i + 1 < chars.len();
            let joins = (c == '\'' || c == '-') && inner && chars[i - 1].is_alphanumeric() && chars[i + 1].is_alphanumeric();
            let decimal = (c == '.' || c == ',') && inner && chars[i - 1].is_ascii_digit() && chars[i + 1].is_ascii_digit();
            if c.is_alphanumeric() || c == '_' || joins || decimal {
                current.extend(c.to_lowercase());
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("The wolf killed \"Two\" sheep."),
            vec!["the", "wolf", "killed", "\"", "two", "\"", "sheep", "."]
        );
    }

    #[test]
    fn keeps_word_internal_marks() {
        assert_eq!(tokenize("Tom's well-known 3.5 km"), vec!["tom's", "well-known", "3.5", "km"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
    }
}
