//! Structural checks for generated files: balanced blocks and brackets in
//! sources, tab-indented recipes in makefiles, no leftover placeholders.

use super::{Bundle, CodegenError, Result};

fn err(line: usize, message: impl Into<String>) -> String {
    format!("line {line}: {}", message.into())
}

/// Removes a `!` comment, keeping `!` inside quotes. Fails on an unclosed quote.
fn strip_fortran_comment(line: &str) -> Option<&str> {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '!') => return Some(&line[..i]),
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            _ => {}
        }
    }
    quote.is_none().then_some(line)
}

fn parens_balanced(stmt: &str) -> bool {
    let mut depth = 0i32;
    let mut quote = None;
    for c in stmt.chars() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '(') => depth += 1,
            (None, ')') => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

/// Checks that program units, `do`, `if ... then` and `select` blocks are
/// closed in order, `end` names match, and parentheses balance.
pub fn lint_fortran(text: &str) -> Result<(), String> {
    let mut stack: Vec<(String, String, usize)> = Vec::new();
    let mut units = 0;
    let mut pending = String::new();
    let mut start_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let code = strip_fortran_comment(raw).ok_or_else(|| err(n, "unclosed string"))?;
        let code = code.trim();
        if code.is_empty() && pending.is_empty() {
            continue;
        }
        if pending.is_empty() {
            start_line = n;
        }
        if let Some(head) = code.strip_suffix('&') {
            pending.push_str(head);
            pending.push(' ');
            continue;
        }
        pending.push_str(code.trim_start_matches('&'));
        let stmt = std::mem::take(&mut pending).to_lowercase();
        let stmt = stmt.trim();
        let line = start_line;
        if !parens_balanced(stmt) {
            return Err(err(line, "unbalanced parentheses"));
        }
        let words: Vec<&str> = stmt.split(|c: char| c.is_whitespace() || c == '(').filter(|w| !w.is_empty()).collect();
        let first = words.first().copied().unwrap_or("");
        let closing = match first {
            "end" => Some((words.get(1).copied().unwrap_or(""), words.get(2).copied())),
            "enddo" => Some(("do", None)),
            "endif" => Some(("if", None)),
            "endselect" => Some(("select", None)),
            _ => None,
        };
        if let Some((kind, name)) = closing {
            let Some((open, open_name, _)) = stack.pop() else {
                return Err(err(line, format!("`{stmt}` without an open block")));
            };
            if !kind.is_empty() && kind != open {
                return Err(err(line, format!("`{stmt}` closes a `{open}` block")));
            }
            if let Some(name) = name {
                if name != open_name {
                    return Err(err(line, format!("`{stmt}` closes `{open} {open_name}`")));
                }
            }
            continue;
        }
        match first {
            "program" | "subroutine" | "function" | "module" if words.get(1) != Some(&"procedure") => {
                if first != "module" && stack.iter().all(|(k, ..)| k == "module") {
                    units += 1;
                }
                stack.push((first.to_string(), words.get(1).copied().unwrap_or("").to_string(), line));
            }
            "do" => stack.push(("do".into(), String::new(), line)),
            "select" => stack.push(("select".into(), String::new(), line)),
            "if" if stmt.ends_with("then") => stack.push(("if".into(), String::new(), line)),
            "else" | "elseif" => {
                if stack.last().map(|(k, ..)| k.as_str()) != Some("if") {
                    return Err(err(line, "`else` outside an `if` block"));
                }
            }
            _ => {}
        }
    }
    if !pending.is_empty() {
        return Err(err(start_line, "continuation runs past the end of the file"));
    }
    if let Some((kind, _, line)) = stack.pop() {
        return Err(err(line, format!("`{kind}` block is never closed")));
    }
    if units == 0 {
        return Err(err(1, "no program unit"));
    }
    Ok(())
}

/// Checks that brackets nest, ignoring comments, strings and character
/// literals, and that at least one function body exists.
pub fn lint_c(text: &str) -> Result<(), String> {
    let chars: Vec<char> = text.chars().collect();
    let mut stack: Vec<(char, usize)> = Vec::new();
    let mut line = 1;
    let mut bodies = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => line += 1,
            '/' if next == Some('*') => {
                let open = line;
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(err(open, "unclosed comment"));
                }
                i += 1;
            }
            '/' if next == Some('/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '"' | '\'' => {
                let q = c;
                i += 1;
                while i < chars.len() && chars[i] != q {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    if chars.get(i) == Some(&'\n') {
                        return Err(err(line, "unclosed literal"));
                    }
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(err(line, "unclosed literal"));
                }
            }
            '(' | '[' | '{' => stack.push((c, line)),
            ')' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {
                        if c == '}' && stack.is_empty() {
                            bodies += 1;
                        }
                    }
                    Some((open, at)) => return Err(err(line, format!("`{c}` closes `{open}` from line {at}"))),
                    None => return Err(err(line, format!("unmatched `{c}`"))),
                }
            }
            _ => {}
        }
        i += 1;
    }
    if let Some((open, at)) = stack.pop() {
        return Err(err(at, format!("`{open}` is never closed")));
    }
    if bodies == 0 {
        return Err(err(1, "no function body"));
    }
    Ok(())
}

/// Checks that recipe lines start with a tab and rules have targets.
pub fn lint_makefile(text: &str) -> Result<(), String> {
    let mut in_rule = false;
    let mut rules = 0;
    for (i, l) in text.lines().enumerate() {
        let n = i + 1;
        if l.trim().is_empty() {
            in_rule = false;
            continue;
        }
        if l.trim_start().starts_with('#') {
            continue;
        }
        if l.starts_with('\t') {
            if !in_rule {
                return Err(err(n, "recipe line outside a rule"));
            }
            continue;
        }
        if l.starts_with(' ') && in_rule {
            return Err(err(n, "recipe line must start with a tab"));
        }
        let is_assign = l.find('=').is_some_and(|e| l.find(':').map_or(true, |c| e < c || l[c..].starts_with(":=")));
        let is_include = l.starts_with("include ") || l.starts_with("-include ");
        in_rule = !is_assign && !is_include && l.contains(':');
        if in_rule {
            rules += 1;
            if l.split(':').next().is_some_and(|t| t.trim().is_empty()) {
                return Err(err(n, "rule without a target"));
            }
        }
    }
    if rules == 0 {
        return Err(err(1, "no rules"));
    }
    Ok(())
}

/// Lints every file of a bundle by its name.
pub fn lint_bundle(bundle: &Bundle) -> Result<()> {
    for f in bundle.files() {
        let text = String::from_utf8_lossy(&f.bytes);
        let lint = |r: Result<(), String>| r.map_err(|message| CodegenError::Lint { path: f.path.clone(), message });
        if text.contains("{{") {
            lint(Err("unresolved `{{`".into()))?;
        }
        if f.path.ends_with(".f90") {
            lint(lint_fortran(&text))?;
        } else if f.path.ends_with(".c") {
            lint(lint_c(&text))?;
        } else if f.path.eq_ignore_ascii_case("makefile") {
            lint(lint_makefile(&text))?;
        }
    }
    Ok(())
}
