//! Rule-based suffix stemmer.
//!
//! Deliberately light: it strips inflectional suffixes (plurals, -ed, -ing)
//! and leaves derivational ones alone, so "medication", "examination", and
//! "duration" survive intact. Irregular forms are handled by the lemma
//! override table applied before stemming (see [`crate::preprocess`]).

fn contains_vowel(s: &str) -> bool {
    s.bytes().any(|b| matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y'))
}

fn undouble(word: &mut String) {
    let bytes = word.as_bytes();
    let n = bytes.len();
    if n >= 2 && bytes[n - 1] == bytes[n - 2] {
        let c = bytes[n - 1];
        if c.is_ascii_alphabetic()
            && !matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
            && !matches!(c, b'l' | b's' | b'z')
        {
            word.pop();
        }
    }
}

/// Stems one lowercase token. Identity on anything no rule matches.
pub fn stem_token(token: &str) -> String {
    let mut word = token.to_string();

    // Plural endings.
    if word.ends_with("sses") {
        word.truncate(word.len() - 2);
    } else if word.ends_with("ies") && word.len() > 4 {
        word.truncate(word.len() - 3);
        word.push('y');
    } else if (word.ends_with("xes")
        || word.ends_with("zes")
        || word.ends_with("ches")
        || word.ends_with("shes")
        || word.ends_with("oes"))
        && word.len() > 3
    {
        word.truncate(word.len() - 2);
    } else if word.ends_with('s')
        && word.len() > 3
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
    {
        word.truncate(word.len() - 1);
    }

    // Past and progressive endings.
    if word.ends_with("eed") {
        let stem = &word[..word.len() - 3];
        if contains_vowel(stem) {
            word.truncate(word.len() - 1);
        }
    } else if word.ends_with("ed") {
        let stem = &word[..word.len() - 2];
        if stem.len() >= 3 && contains_vowel(stem) {
            word.truncate(word.len() - 2);
            if word.ends_with("at") || word.ends_with("bl") || word.ends_with("iz") {
                word.push('e');
            } else {
                undouble(&mut word);
            }
        }
    } else if word.ends_with("ing") {
        let stem = &word[..word.len() - 3];
        if stem.len() >= 3 && contains_vowel(stem) {
            word.truncate(word.len() - 3);
            if word.ends_with("at") || word.ends_with("bl") || word.ends_with("iz") {
                word.push('e');
            } else {
                undouble(&mut word);
            }
        }
    }

    word
}
