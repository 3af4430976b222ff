//! Tokenization and whole-word phrase matching shared by several stages.

/// Lowercases `text`, pads every punctuation character with spaces and splits
/// on whitespace.
///
/// ```
/// use cemine_core::text::tokenize;
/// assert_eq!(tokenize("The car's AEB, engaged."), ["the", "car", "'", "s", "aeb", ",", "engaged", "."]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let mut padded = String::with_capacity(text.len() + 8);
    for c in text.chars() {
        if is_punctuation(c) {
            padded.push(' ');
            padded.push(c);
            padded.push(' ');
        } else {
            padded.extend(c.to_lowercase());
        }
    }
    padded.split_whitespace().map(str::to_owned).collect()
}

pub fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// True when `phrase` occurs in `haystack` with a non-alphanumeric character
/// (or the string edge) on both sides. Both arguments are expected to be
/// lowercase already.
pub fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    if phrase.is_empty() {
        return false;
    }
    haystack.match_indices(phrase).any(|(start, m)| {
        let end = start + m.len();
        let before_ok = haystack[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = haystack[end..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        before_ok && after_ok
    })
}

/// A lexicon phrase is lowercase, non-empty and uses single internal spaces.
pub fn is_normalized_phrase(phrase: &str) -> bool {
    !phrase.is_empty()
        && phrase == phrase.to_lowercase()
        && phrase.trim() == phrase
        && !phrase.contains("  ")
        && !phrase.chars().any(|c| c.is_whitespace() && c != ' ')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_pads_punctuation() {
        assert_eq!(
            tokenize("Brakes  engaged!No reason"),
            ["brakes", "engaged", "!", "no", "reason"]
        );
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn phrase_boundaries() {
        assert!(contains_phrase("the lane keep assist jerked", "lane keep assist"));
        assert!(contains_phrase("lane keep assist", "lane keep assist"));
        assert!(contains_phrase("(lane keep assist)", "lane keep assist"));
        assert!(!contains_phrase("the airplane keep assisting", "lane keep assist"));
        // a later occurrence can still match after an earlier embedded one
        assert!(contains_phrase("autopilots and autopilot", "autopilot"));
        assert!(!contains_phrase("anything", ""));
    }

    #[test]
    fn phrase_normalization() {
        assert!(is_normalized_phrase("lane keep assist"));
        assert!(!is_normalized_phrase("Lane keep assist"));
        assert!(!is_normalized_phrase("lane  keep"));
        assert!(!is_normalized_phrase(" lane"));
        assert!(!is_normalized_phrase("lane\tkeep"));
        assert!(!is_normalized_phrase(""));
    }
}
