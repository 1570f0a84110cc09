//! Small text helpers shared by the prompt renderers and output parsers.

/// Returns the body of the first markdown code fence, or the input unchanged
/// when there is no fence. A language tag on the opening fence is dropped. An
/// unterminated fence yields everything after the opening line.
pub fn strip_fences(raw: &str) -> &str {
    let Some(open) = raw.find("```") else {
        return raw.trim();
    };
    let after = &raw[open + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let (tag, body) = after.split_at(body_start);
    // ```{"a":1}``` on one line: no language tag, body starts right away.
    let body = if tag.trim_start().starts_with(['{', '[']) {
        after
    } else {
        body
    };
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

/// Locates the first JSON value that starts with one of `openers` and parses
/// it. Text before and after the value is ignored.
pub fn first_json_value(text: &str, openers: &[char]) -> Option<serde_json::Value> {
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find(openers) {
        let start = search_from + rel;
        let mut stream =
            serde_json::Deserializer::from_str(&text[start..]).into_iter::<serde_json::Value>();
        if let Some(Ok(value)) = stream.next() {
            return Some(value);
        }
        search_from = start + 1;
    }
    None
}

/// Substitutes `{name}` slots in a template in one left-to-right pass.
/// Inserted values are never rescanned, so a value containing `{name}` is
/// left alone. Braces that do not form a known slot are copied verbatim.
pub fn render_slots(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (name, value) in slots {
            let slot_len = name.len() + 2;
            if tail.len() >= slot_len
                && tail.as_bytes()[slot_len - 1] == b'}'
                && &tail[1..slot_len - 1] == *name
            {
                out.push_str(value);
                rest = &tail[slot_len..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// Truncates to at most `max_chars` Unicode scalar values.
pub fn truncate_chars(s: &str, max_chars: usize) -> &str {
    match s.char_indices().nth(max_chars) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}
