//! Tokenization helpers shared by the tool selector, keyword generation and
//! retrieval scoring.

use std::collections::BTreeSet;

/// Fixed English stopword list used by mock keyword generation.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "also", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can", "did", "do", "does",
    "for", "from", "had", "has", "have", "he", "her", "his", "i", "in", "is", "it", "its", "me", "my", "no", "not",
    "of", "on", "or", "our", "she", "so", "some", "that", "the", "their", "them", "there", "these", "they", "this",
    "those", "to", "was", "we", "were", "what", "which", "with", "you", "your",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

/// Lowercased alphanumeric tokens; every other character separates tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().collect()
}

/// Splits text into runs of content words. Words keep inner hyphens and
/// apostrophes ("t-shirt"); stopwords and clause punctuation end a run.
pub fn content_runs(text: &str) -> Vec<Vec<String>> {
    let mut runs = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut word = String::new();

    let flush_word = |word: &mut String, current: &mut Vec<String>, runs: &mut Vec<Vec<String>>| {
        let w = word.trim_matches(|c| c == '-' || c == '\'').to_lowercase();
        word.clear();
        if w.is_empty() {
            return;
        }
        if is_stopword(&w) {
            if !current.is_empty() {
                runs.push(std::mem::take(current));
            }
        } else {
            current.push(w);
        }
    };

    for c in text.chars() {
        if c.is_alphanumeric() || ((c == '-' || c == '\'') && !word.is_empty()) {
            word.push(c);
        } else {
            flush_word(&mut word, &mut current, &mut runs);
            if !c.is_whitespace() && !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        }
    }
    flush_word(&mut word, &mut current, &mut runs);
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}
