//! Backslash escaping for tab-separated fields.
//!
//! `\\`, `\t`, `\n` and `\r` are always escaped. Callers that nest a
//! second separator inside a field (candidate lists use `;` and `:`)
//! pass it in `extra` so it is written as `\;` or `\:`.

pub fn escape(s: &str, extra: &[char]) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c if extra.contains(&c) => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(c @ ('\\' | ';' | ':')) => out.push(c),
            Some(c) => return Err(format!("unknown escape \\{c}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

/// Splits on `sep` wherever it is not escaped. Pieces keep their escapes.
pub fn split_raw(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == sep {
            parts.push(&s[start..i]);
            start = i + c.len_utf8();
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Unescaped fields of one line.
pub fn fields(line: &str) -> Result<Vec<String>, String> {
    line.split('\t').map(unescape).collect()
}

pub fn join(fields: &[&str]) -> String {
    fields.iter().map(|f| escape(f, &[])).collect::<Vec<_>>().join("\t")
}

/// Lines with any trailing `\r` removed; blank lines are skipped.
pub fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}
