use crate::seq::Sequence;

/// Byte offsets just past the opening brace of each `\box{` / `\boxed{`.
fn box_openings(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find("\\box") {
        let after = from + rel + "\\box".len();
        let rest = &text[after..];
        if rest.starts_with('{') {
            out.push(after + 1);
        } else if rest.starts_with("ed{") {
            out.push(after + 3);
        }
        from = after;
    }
    out
}

/// Extracts the sequence from the last `\box{...}` in a completion.
///
/// Nested braces (`\box{{RLIV}}`) and whitespace inside the box are ignored
/// and letters are uppercased. Returns `None` when no box is present, the
/// last box is unbalanced, or its content is not `expected_len` canonical
/// residues.
pub fn parse_boxed(text: &str, expected_len: usize) -> Option<Sequence> {
    let start = *box_openings(text).last()?;
    let mut depth = 1usize;
    let mut letters = String::new();
    for ch in text[start..].chars() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    if letters.len() != expected_len {
                        return None;
                    }
                    return Sequence::new(&letters).ok();
                }
            }
            c if c.is_whitespace() => {}
            c if c.is_ascii_alphabetic() => letters.push(c.to_ascii_uppercase()),
            _ => return None,
        }
    }
    None
}
