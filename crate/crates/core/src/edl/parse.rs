//! Line-oriented EDL parser. Each non-empty line is one "#n." step matched
//! against exactly one operator template; fixed words are case-insensitive,
//! bracketed slots are captured verbatim. Spacing after the step head is
//! tolerated ("#1.Scan Table" and "#1. Scan Table" both parse), as are the
//! operator-label prefixes some corpora emit ("Reserve Rows: Reserve rows
//! of #3 …").

use std::collections::BTreeSet;

use crate::error::EdlError;

use super::expr::{parse_condition, parse_operand, parse_step_ref, Operand};
use super::{ArithOp, DateOp, EdlOperator, EdlPlan, EdlStep, SetOpKind, SortOrder};

/// Parse EDL text into a plan. Fails on the first offending line; numbering
/// must run #1..#N in order, and every reference must point at an earlier
/// step.
pub fn parse_edl(text: &str) -> Result<EdlPlan, EdlError> {
    let mut steps: Vec<EdlStep> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let line_no = line_no + 1;
        let (index, body) = split_step_head(line, line_no)?;
        let expected = steps.len() + 1;
        if index != expected {
            return Err(EdlError::NonContiguousNumbering { expected, got: index });
        }
        let op = parse_step_body(body, line_no)?;
        let refs = step_refs(index, &op, line_no)?;
        for &r in &refs {
            if r == 0 || r >= index {
                return Err(EdlError::DanglingReference { step: index, referenced: r });
            }
        }
        steps.push(EdlStep { index, op, refs });
    }
    if steps.is_empty() {
        return Err(EdlError::EmptyPlan);
    }
    let root = steps.len();
    Ok(EdlPlan { steps, root })
}

/// "#12. rest" → (12, "rest"); accepts "#12." / "#12.rest" / "#12 rest".
fn split_step_head(line: &str, line_no: usize) -> Result<(usize, &str), EdlError> {
    let err = || EdlError::UnknownOperator { line: line_no, text: line.to_string() };
    let after_hash = line.strip_prefix('#').ok_or_else(err)?;
    let digits_end = after_hash
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(after_hash.len());
    if digits_end == 0 {
        return Err(err());
    }
    let index: usize = after_hash[..digits_end].parse().map_err(|_| err())?;
    let mut body = &after_hash[digits_end..];
    body = body.trim_start();
    if let Some(rest) = body.strip_prefix('.') {
        body = rest;
    }
    Ok((index, body.trim()))
}

/// The 16 operator labels that may prefix a step body ("Scan Table: …").
const LABELS: &[(&str, &str)] = &[
    ("scan table", "scan"),
    ("subquery", "subquery"),
    ("join", "join"),
    ("reserve rows", "reserve"),
    ("group by", "group"),
    ("apply having clause", "having"),
    ("having clause", "having"),
    ("having", "having"),
    ("sort", "sort"),
    ("limit", "limit"),
    ("select column", "select"),
    ("set operation", "setop"),
    ("arithmetic calculation", "arith"),
    ("date calculation", "date"),
    ("case statement", "case"),
    ("substring extraction", "substr"),
    ("casting", "cast"),
    ("ranking", "rank"),
];

fn parse_step_body(body: &str, line_no: usize) -> Result<EdlOperator, EdlError> {
    let lower = body.to_ascii_lowercase();
    // explicit operator label, e.g. "Subquery: …"
    for (label, tag) in LABELS {
        if let Some(rest) = lower.strip_prefix(label) {
            if let Some(after_colon) = rest.trim_start().strip_prefix(':') {
                let consumed = body.len() - after_colon.len();
                let inner = body[consumed..].trim();
                return parse_tagged(tag, inner, body, line_no);
            }
        }
    }
    // no label: dispatch on the template's leading words
    let tag = if lower.starts_with("retrieve all rows") {
        if lower.contains("in a subquery") {
            "subquery"
        } else {
            "scan"
        }
    } else if lower.starts_with("join ") {
        "join"
    } else if lower.starts_with("reserve rows of") || lower.starts_with("reserve the rows of") {
        "reserve"
    } else if lower.starts_with("group ") {
        "group"
    } else if lower.starts_with("apply having clause") || lower.starts_with("reserve the grouped rows") {
        "having"
    } else if lower.starts_with("order ") {
        "sort"
    } else if lower.starts_with("limit ") {
        "limit"
    } else if lower.starts_with("select the") {
        "select"
    } else if lower.starts_with("apply union ")
        || lower.starts_with("apply intersect ")
        || lower.starts_with("apply except ")
    {
        "setop"
    } else if lower.starts_with("compute the rank of") {
        "rank"
    } else if lower.starts_with("compute ") {
        "compute"
    } else if lower.starts_with("extract ") {
        "substr"
    } else if lower.starts_with("cast ") {
        "cast"
    } else {
        return Err(EdlError::UnknownOperator { line: line_no, text: body.to_string() });
    };
    parse_tagged(tag, body, body, line_no)
}

fn parse_tagged(tag: &str, inner: &str, full: &str, line_no: usize) -> Result<EdlOperator, EdlError> {
    let mismatch = |operator: &str, detail: String| EdlError::TemplateMismatch {
        line: line_no,
        operator: operator.to_string(),
        detail,
    };
    let inner = inner.trim().trim_end_matches('.').trim_end();
    match tag {
        "scan" => parse_scan(inner).map_err(|d| mismatch("Scan Table", d)),
        "subquery" => parse_subquery(inner).map_err(|d| mismatch("Subquery", d)),
        "join" => parse_join(inner).map_err(|d| mismatch("Join", d)),
        "reserve" => parse_reserve(inner).map_err(|d| mismatch("Reserve Rows", d)),
        "group" => parse_group(inner).map_err(|d| mismatch("Group By", d)),
        "having" => parse_having(inner).map_err(|d| mismatch("Having Clause", d)),
        "sort" => parse_sort(inner).map_err(|d| mismatch("Sort", d)),
        "limit" => parse_limit(inner).map_err(|d| mismatch("Limit", d)),
        "select" => parse_select(inner).map_err(|d| mismatch("Select Column", d)),
        "setop" => parse_setop(inner).map_err(|d| mismatch("Set Operation", d)),
        "rank" => parse_ranking(inner).map_err(|d| mismatch("Ranking", d)),
        "arith" | "date" | "compute" => {
            parse_compute(inner).map_err(|d| mismatch("Arithmetic/Date Calculation", d))
        }
        "case" => parse_compute(inner).map_err(|d| mismatch("Case Statement", d)),
        "substr" => parse_substring(inner).map_err(|d| mismatch("Substring Extraction", d)),
        "cast" => parse_cast(inner).map_err(|d| mismatch("Casting", d)),
        _ => Err(EdlError::UnknownOperator { line: line_no, text: full.to_string() }),
    }
}

// --- slot helpers -----------------------------------------------------------

/// Case-insensitive literal-prefix stripper; returns the rest of `s`.
fn expect<'a>(s: &'a str, word: &str) -> Result<&'a str, String> {
    let trimmed = s.trim_start();
    if trimmed.to_ascii_lowercase().starts_with(&word.to_ascii_lowercase()) {
        Ok(&trimmed[word.len()..])
    } else {
        Err(format!("expected \"{word}\" at: {trimmed}"))
    }
}

/// Capture a "[slot]" (or bare text up to `until`, case-insensitive).
fn take_slot<'a>(s: &'a str, until: &str) -> Result<(String, &'a str), String> {
    let s = s.trim_start();
    if let Some(body) = s.strip_prefix('[') {
        let close = body.find(']').ok_or_else(|| format!("unclosed bracket: {s}"))?;
        return Ok((body[..close].trim().to_string(), &body[close + 1..]));
    }
    let lower = s.to_ascii_lowercase();
    let pos = lower
        .find(&until.to_ascii_lowercase())
        .ok_or_else(|| format!("expected \"{until}\" after slot in: {s}"))?;
    let slot = s[..pos].trim();
    if slot.is_empty() {
        return Err(format!("empty slot before \"{until}\" in: {s}"));
    }
    Ok((slot.to_string(), &s[pos..]))
}

/// Find the last occurrence of any of `markers` outside quotes, brackets and
/// parentheses, and split there, returning (head, marker index, tail). At a
/// given position the first marker in list order wins, so callers list
/// longer markers first.
fn rsplit_marker<'a>(s: &'a str, markers: &[&str]) -> Option<(&'a str, usize, &'a str)> {
    let lower = s.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut best: Option<(usize, usize)> = None; // (position, marker idx)
    let mut depth = 0i32;
    let mut in_quote = false;
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if in_quote {
            if c == '\'' {
                in_quote = false;
            }
            i += 1;
            continue;
        }
        match c {
            '\'' => in_quote = true,
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            _ => {}
        }
        if depth == 0 && !in_quote {
            for (mi, m) in markers.iter().enumerate() {
                if lower[i..].starts_with(&m.to_ascii_lowercase()) {
                    best = Some((i, mi));
                    break;
                }
            }
        }
        i += 1;
    }
    let (pos, mi) = best?;
    Some((&s[..pos], mi, &s[pos + markers[mi].len()..]))
}

/// Split a list slot on top-level "," and " and " (quotes, brackets and
/// parentheses protect their contents).
fn top_level_list(text: &str) -> Vec<String> {
    let lower = text.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut in_quote = false;
    let mut start = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if in_quote {
            if c == '\'' {
                in_quote = false;
            }
            i += 1;
            continue;
        }
        match c {
            '\'' => in_quote = true,
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            _ => {}
        }
        if depth == 0 && !in_quote {
            if lower[i..].starts_with(" and ") {
                parts.push(text[start..i].to_string());
                i += 5;
                start = i;
                continue;
            }
            if c == ',' {
                parts.push(text[start..i].to_string());
                i += 1;
                start = i;
                continue;
            }
        }
        i += 1;
    }
    parts.push(text[start..].to_string());
    parts.into_iter().map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
}

/// Split a pluralized column slot: "[a]", "[a] and [b]", "[a], [b] and [c]".
/// Entries may also be aggregate phrases like "count(*)", kept verbatim.
fn split_columns(text: &str) -> Result<Vec<String>, String> {
    let mut cols = Vec::new();
    for piece in top_level_list(text) {
        let mut w = piece.as_str();
        if w.to_ascii_lowercase().starts_with("the ") {
            w = &w[4..];
        }
        // templates carry a trailing "column"/"columns" noun
        let lower = w.to_ascii_lowercase();
        for noun in [" columns", " column"] {
            if let Some(head) = lower.strip_suffix(noun) {
                w = &w[..head.len()];
                break;
            }
        }
        let w = w.trim();
        let w = if w.len() >= 2 && w.starts_with('[') && w.ends_with(']') {
            w[1..w.len() - 1].trim()
        } else {
            w
        };
        if w.is_empty() {
            return Err(format!("empty column name in: {text}"));
        }
        cols.push(w.to_string());
    }
    if cols.is_empty() {
        return Err(format!("no column names in: {text}"));
    }
    Ok(cols)
}

fn parse_order_word(s: &str) -> Result<SortOrder, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "ascending" | "asc" => Ok(SortOrder::Ascending),
        "descending" | "desc" => Ok(SortOrder::Descending),
        other => Err(format!("order must be ascending or descending, got \"{other}\"")),
    }
}

fn required_step_ref(s: &str) -> Result<usize, String> {
    parse_step_ref(s).ok_or_else(|| format!("expected a step reference like #3, got: {}", s.trim()))
}

// --- per-operator template parsers ------------------------------------------

/// "Retrieve all rows from the [T] table" + optional "aliased as A".
fn parse_scan_core(inner: &str) -> Result<(String, Option<String>, &str), String> {
    let rest = expect(inner, "retrieve all rows from the")?;
    let (table, rest) = take_slot(rest, " table")?;
    let rest = expect(rest, "table")?;
    let trimmed = rest.trim_start();
    if let Ok(after) = expect(trimmed, "aliased as") {
        let after = after.trim_start();
        let end = after
            .find(|c: char| c.is_whitespace())
            .unwrap_or(after.len());
        let alias = after[..end].trim_matches(['[', ']']).to_string();
        if alias.is_empty() {
            return Err("empty alias after \"aliased as\"".into());
        }
        return Ok((table, Some(alias), &after[end..]));
    }
    Ok((table, None, rest))
}

fn parse_scan(inner: &str) -> Result<EdlOperator, String> {
    let (table, alias, rest) = parse_scan_core(inner)?;
    if !rest.trim().is_empty() {
        return Err(format!("unexpected trailing text: {}", rest.trim()));
    }
    Ok(EdlOperator::ScanTable { table, alias })
}

fn parse_subquery(inner: &str) -> Result<EdlOperator, String> {
    let (table, alias, rest) = parse_scan_core(inner)?;
    let mut rest = rest.trim_start();
    // optional "in a subquery"
    if let Ok(r) = expect(rest, "in a subquery") {
        rest = r.trim_start();
    }
    let mut select_column = None;
    if let Ok(r) = expect(rest, "and select the") {
        let (col, r) = take_slot(r, " column")?;
        let r = expect(r, "column")?;
        select_column = Some(col);
        rest = r;
    }
    if !rest.trim().is_empty() {
        return Err(format!("unexpected trailing text: {}", rest.trim()));
    }
    Ok(EdlOperator::Subquery { table, alias, select_column })
}

fn parse_join(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "join the")?;
    let (table, rest) = take_slot(rest, " table")?;
    let rest = expect(rest, "table")?;
    let trimmed = rest.trim_start();
    let (alias, rest) = if let Ok(after) = expect(trimmed, "aliased as") {
        let after = after.trim_start();
        let end = after.find(|c: char| c.is_whitespace()).unwrap_or(after.len());
        let alias = after[..end].trim_matches(['[', ']']).to_string();
        (Some(alias), &after[end..])
    } else {
        (None, rest)
    };
    let rest = expect(rest, "on the condition that")?;
    let condition = parse_condition(rest)?;
    Ok(EdlOperator::Join { table, alias, condition })
}

fn parse_reserve(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "reserve")
        .and_then(|r| expect(r, "the rows of").or_else(|_| expect(r, "rows of")))?;
    let (head, _, cond_text) = rsplit_marker(rest, &[" where "])
        .ok_or_else(|| format!("expected \"where\" in: {rest}"))?;
    let input_step = required_step_ref(head)?;
    let condition = parse_condition(cond_text)?;
    Ok(EdlOperator::ReserveRows { input_step, condition })
}

fn parse_group(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "group")?;
    let (head, _, tail) = rsplit_marker(rest, &[" by the ", " by "])
        .ok_or_else(|| format!("expected \"by the\" in: {rest}"))?;
    let input_step = required_step_ref(head)?;
    let columns = split_columns(tail)?;
    Ok(EdlOperator::GroupBy { input_step, columns })
}

fn parse_having(inner: &str) -> Result<EdlOperator, String> {
    // tolerate the label fragment when dispatch landed here via keywords
    let rest = expect(inner, "apply having clause")
        .map(|r| r.trim_start().strip_prefix(':').unwrap_or(r).trim_start())
        .unwrap_or(inner);
    let rest = expect(rest, "reserve the grouped rows of")?;
    let (head, _, cond_text) = rsplit_marker(rest, &[" where "])
        .ok_or_else(|| format!("expected \"where\" in: {rest}"))?;
    let input_step = required_step_ref(head)?;
    let condition = parse_condition(cond_text)?;
    Ok(EdlOperator::Having { input_step, condition })
}

fn parse_sort(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "order")?;
    let (head, _, tail) = rsplit_marker(rest, &[" by the ", " by "])
        .ok_or_else(|| format!("expected \"by the\" in: {rest}"))?;
    let input_step = required_step_ref(head)?;
    let (column, tail) = take_slot(tail, " column")?;
    let tail = expect(tail, "column")?;
    let tail = expect(tail, "in")?;
    let (order_word, tail) = take_slot(tail, " order")?;
    let tail = expect(tail, "order")?;
    if !tail.trim().is_empty() {
        return Err(format!("unexpected trailing text: {}", tail.trim()));
    }
    Ok(EdlOperator::Sort { input_step, column, order: parse_order_word(&order_word)? })
}

fn parse_limit(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "limit")?;
    let (head, _, tail) = rsplit_marker(rest, &[" to the top ", " to "])
        .ok_or_else(|| format!("expected \"to the top\" in: {rest}"))?;
    let input_step = required_step_ref(head)?;
    let tail = tail.trim();
    let digits_end = tail.find(|c: char| !c.is_ascii_digit()).unwrap_or(tail.len());
    if digits_end == 0 {
        return Err(format!("expected a record count, got: {tail}"));
    }
    let count: u64 = tail[..digits_end].parse().map_err(|e| format!("bad count: {e}"))?;
    if count == 0 {
        return Err("record count must be at least 1".into());
    }
    let after = tail[digits_end..].trim().to_ascii_lowercase();
    if !["record(s)", "records", "record", ""].contains(&after.as_str()) {
        return Err(format!("unexpected trailing text: {after}"));
    }
    Ok(EdlOperator::Limit { input_step, count })
}

fn parse_select(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "select the")?;
    // locate the trailing step reference first; templates vary between
    // "in #4" and "from the result of #4"
    let (head, _, ref_text) = rsplit_marker(rest, &[" from the result of ", " from the results of ", " in "])
        .ok_or_else(|| format!("expected a step reference in: {rest}"))?;
    let input_step = required_step_ref(ref_text)?;
    // optional "from the [T] table" before the reference
    let (cols_part, table_alias) = match rsplit_marker(head, &[" from the "]) {
        Some((cols, _, table_part)) => {
            let lower = table_part.to_ascii_lowercase();
            let table_end = lower
                .rfind(" table")
                .ok_or_else(|| format!("expected \"table\" after \"from the\" in: {head}"))?;
            let name = table_part[..table_end].trim().trim_matches(['[', ']']).trim();
            if name.is_empty() {
                return Err(format!("empty table alias in: {head}"));
            }
            (cols, Some(name.to_string()))
        }
        None => (head, None),
    };
    let columns = split_columns(cols_part)?;
    Ok(EdlOperator::SelectColumn { input_step, columns, table_alias })
}

fn parse_setop(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "apply")?;
    let rest_trim = rest.trim_start();
    let lower = rest_trim.to_ascii_lowercase();
    let (kind, word_len) = if lower.starts_with("union") {
        (SetOpKind::Union, 5)
    } else if lower.starts_with("intersect") {
        (SetOpKind::Intersect, 9)
    } else if lower.starts_with("except") {
        (SetOpKind::Except, 6)
    } else {
        return Err(format!("expected union/intersect/except, got: {rest_trim}"));
    };
    let rest = expect(&rest_trim[word_len..], "operation")?;
    let rest = rest.trim_start().strip_prefix(':').unwrap_or(rest).trim_start();
    let lower = rest.to_ascii_lowercase();
    let rest = if lower.starts_with("exclude") {
        &rest["exclude".len()..]
    } else if lower.starts_with("include") {
        &rest["include".len()..]
    } else {
        return Err(format!("expected Exclude/Include, got: {rest}"));
    };
    let rest = expect(rest, "the results")?;
    let rest = expect(rest, "in").or_else(|_| expect(rest, "of"))?;
    let (first_ref, _, tail) = rsplit_marker(rest, &[" from the results ", " in the results ", " with the results "])
        .ok_or_else(|| format!("expected \"… the results in #n\" twice in: {rest}"))?;
    let right_query = required_step_ref(first_ref)?;
    let tail = expect(tail, "in").or_else(|_| expect(tail, "of"))?;
    let left_query = required_step_ref(tail)?;
    Ok(EdlOperator::SetOperation { kind, left_query, right_query })
}

fn parse_compute(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "compute")?;
    let (output_column, rest) = take_slot(rest, " as ")?;
    let rest = expect(rest, "as")?;
    let rest_trim = rest.trim_start();
    let lower = rest_trim.to_ascii_lowercase();
    if lower.starts_with("a case statement where") || lower.starts_with("the case statement where") {
        let rest = expect(rest_trim, "a case statement where")
            .or_else(|_| expect(rest_trim, "the case statement where"))?;
        let (cond_text, _, tail) = rsplit_marker(rest, &[", then "])
            .ok_or_else(|| format!("expected \", then\" in: {rest}"))?;
        let (then_text, _, else_text) = rsplit_marker(tail, &[", else "])
            .ok_or_else(|| format!("expected \", else\" in: {tail}"))?;
        return Ok(EdlOperator::CaseStatement {
            output_column,
            condition: parse_condition(cond_text)?,
            then_result: parse_operand(then_text)?,
            else_result: parse_operand(else_text)?,
        });
    }
    let rest = expect(rest, "the")?;
    let (op_text, _, operands_text) = rsplit_marker(rest, &[" of "])
        .ok_or_else(|| format!("expected \"of\" in: {rest}"))?;
    // "of" may legitimately occur inside the operands; split at the FIRST
    // "of" after the operation word instead
    let lower = rest.to_ascii_lowercase();
    let first_of = lower.find(" of ").ok_or_else(|| format!("expected \"of\" in: {rest}"))?;
    let (op_text, operands_text) = if first_of < op_text.len() {
        (&rest[..first_of], &rest[first_of + 4..])
    } else {
        (op_text, operands_text)
    };
    let op_word = op_text.trim().trim_matches(['[', ']']).to_ascii_lowercase();
    let operands = split_operands(operands_text)?;
    let arith = match op_word.as_str() {
        "sum" => Some(ArithOp::Sum),
        "difference" => Some(ArithOp::Difference),
        "product" => Some(ArithOp::Product),
        "quotient" => Some(ArithOp::Quotient),
        _ => None,
    };
    if let Some(operation) = arith {
        if operands.len() < 2 {
            return Err(format!("{} needs at least two operands", operation.edl_word()));
        }
        return Ok(EdlOperator::ArithmeticCalculation { output_column, operation, operands });
    }
    let date = match op_word.as_str() {
        "year" => Some(DateOp::Year),
        "month" => Some(DateOp::Month),
        "day" => Some(DateOp::Day),
        "day difference" | "date difference" | "difference in days" => Some(DateOp::DayDifference),
        _ => None,
    };
    if let Some(operation) = date {
        let need = if operation == DateOp::DayDifference { 2 } else { 1 };
        if operands.len() != need {
            return Err(format!("{} needs exactly {need} operand(s)", operation.edl_word()));
        }
        return Ok(EdlOperator::DateCalculation { output_column, operation, operands });
    }
    Err(format!("unknown calculation \"{op_word}\""))
}

/// Operand lists: "[a] and [b]", "[a], [b] and [c]", "[price] and 2".
fn split_operands(text: &str) -> Result<Vec<Operand>, String> {
    let operands = top_level_list(text)
        .iter()
        .map(|p| parse_operand(p))
        .collect::<Result<Vec<_>, _>>()?;
    if operands.is_empty() {
        return Err(format!("no operands in: {text}"));
    }
    Ok(operands)
}

fn parse_substring(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "extract")?;
    let rest = expect(rest, "a substring")
        .or_else(|_| expect(rest, "the substring"))
        .or_else(|_| expect(rest, "substring"))?;
    let rest = expect(rest, "from")?;
    let rest = expect(rest, "the").unwrap_or(rest);
    let (source_column, rest) = take_slot(rest, " starting")?;
    let rest = expect(rest, "starting at position")?;
    let rest = rest.trim_start();
    let digits_end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    if digits_end == 0 {
        return Err(format!("expected a start position, got: {rest}"));
    }
    let start: u64 = rest[..digits_end].parse().map_err(|e| format!("bad start: {e}"))?;
    let rest = expect(&rest[digits_end..], "for")?;
    let rest = rest.trim_start();
    let digits_end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    if digits_end == 0 {
        return Err(format!("expected a length, got: {rest}"));
    }
    let length: u64 = rest[..digits_end].parse().map_err(|e| format!("bad length: {e}"))?;
    let rest = expect(&rest[digits_end..], "characters as")?;
    let output_column = rest.trim().trim_matches(['[', ']']).trim().to_string();
    if output_column.is_empty() {
        return Err("missing output column".into());
    }
    Ok(EdlOperator::SubstringExtraction { source_column, start, length, output_column })
}

fn parse_cast(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "cast")?;
    let rest = expect(rest, "the").unwrap_or(rest);
    let (column, rest) = take_slot(rest, " as ")?;
    let rest = expect(rest, "as")?;
    let new_type = rest.trim().trim_matches(['[', ']']).trim().to_string();
    if new_type.is_empty() {
        return Err("missing target type".into());
    }
    Ok(EdlOperator::Casting { column, new_type })
}

fn parse_ranking(inner: &str) -> Result<EdlOperator, String> {
    let rest = expect(inner, "compute the rank of")?;
    let (column, rest) = take_slot(rest, " ordered by")?;
    let rest = expect(rest, "ordered by")?;
    let rest = expect(rest, "the").unwrap_or(rest);
    let (order_column, rest) = take_slot(rest, " in ")?;
    let rest = if rest.trim_start().to_ascii_lowercase().starts_with("column") {
        expect(rest, "column")?
    } else {
        rest
    };
    let rest = expect(rest, "in")?;
    let (order_word, rest) = take_slot(rest, " order")?;
    let rest = expect(rest, "order")?;
    // optional "using the RANK( ) window function"
    let tail = rest.trim().to_ascii_lowercase().replace(['(', ')', ' '], "");
    if !tail.is_empty() && tail != "usingtherankwindowfunction" {
        return Err(format!("unexpected trailing text: {}", rest.trim()));
    }
    Ok(EdlOperator::Ranking { column, order_column, order: parse_order_word(&order_word)? })
}

// --- reference extraction -----------------------------------------------------

fn step_refs(index: usize, op: &EdlOperator, line_no: usize) -> Result<BTreeSet<usize>, EdlError> {
    let mut refs = BTreeSet::new();
    if let Some(input) = op.explicit_input() {
        refs.insert(input);
    }
    if op.has_implicit_input() {
        if index == 1 {
            return Err(EdlError::TemplateMismatch {
                line: line_no,
                operator: op.name().to_string(),
                detail: "this operator extends a previous step, but it is step #1".into(),
            });
        }
        refs.insert(index - 1);
    }
    if let EdlOperator::SetOperation { left_query, right_query, .. } = op {
        refs.insert(*left_query);
        refs.insert(*right_query);
    }
    if let Some(cond) = op.condition() {
        for r in cond.step_refs() {
            refs.insert(r);
        }
    }
    Ok(refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edl::{ColumnRef, CompareOp, Condition, Operand};

    pub const EXAMPLE_PLAN: &str = "\
#1.Scan Table: Retrieve all rows from the [Student] table.
#2.Subquery: Retrieve all rows from the [Has_Pet] table aliased as T1.
#3.Join the [Pets] table aliased as T2 on the condition that T1.PetID equals T2.PetID.
#4. Reserve rows of #3 where the [PetType] in table T2 is 'cat'.
#5. Select the [StuID] column from the [T1] table from the result of #4.
#6. Reserve rows of #1 where [StuID] is not in the result of #5.
#7. Select the [major] and [age] columns from the [Student] table from the result of #6.";

    #[test]
    fn single_scan_step() {
        let plan = parse_edl("#1. Scan Table: Retrieve all rows from the [Student] table.").unwrap();
        assert_eq!(plan.steps.len(), 1);
        assert_eq!(plan.root, 1);
        assert_eq!(
            plan.steps[0].op,
            EdlOperator::ScanTable { table: "Student".into(), alias: None }
        );
        assert!(plan.steps[0].refs.is_empty());
    }

    #[test]
    fn worked_example_parses_with_expected_refs() {
        let plan = parse_edl(EXAMPLE_PLAN).unwrap();
        assert_eq!(plan.steps.len(), 7);
        assert_eq!(plan.root, 7);

        assert_eq!(
            plan.steps[1].op,
            EdlOperator::Subquery { table: "Has_Pet".into(), alias: Some("T1".into()), select_column: None }
        );
        match &plan.steps[2].op {
            EdlOperator::Join { table, alias, condition } => {
                assert_eq!(table, "Pets");
                assert_eq!(alias.as_deref(), Some("T2"));
                assert_eq!(
                    *condition,
                    Condition::Compare {
                        left: Operand::Column(ColumnRef::qualified("T1", "PetID")),
                        op: CompareOp::Eq,
                        right: Operand::Column(ColumnRef::qualified("T2", "PetID")),
                    }
                );
            }
            other => panic!("step 3 parsed as {other:?}"),
        }
        // the join extends the previous step
        assert_eq!(plan.steps[2].refs.iter().copied().collect::<Vec<_>>(), vec![2]);
        match &plan.steps[3].op {
            EdlOperator::ReserveRows { input_step, condition } => {
                assert_eq!(*input_step, 3);
                assert_eq!(
                    *condition,
                    Condition::Compare {
                        left: Operand::Column(ColumnRef::qualified("T2", "PetType")),
                        op: CompareOp::Eq,
                        right: Operand::Str("cat".into()),
                    }
                );
            }
            other => panic!("step 4 parsed as {other:?}"),
        }
        match &plan.steps[4].op {
            EdlOperator::SelectColumn { input_step, columns, table_alias } => {
                assert_eq!(*input_step, 4);
                assert_eq!(columns, &["StuID".to_string()]);
                assert_eq!(table_alias.as_deref(), Some("T1"));
            }
            other => panic!("step 5 parsed as {other:?}"),
        }
        match &plan.steps[5].op {
            EdlOperator::ReserveRows { input_step, condition } => {
                assert_eq!(*input_step, 1);
                assert_eq!(
                    *condition,
                    Condition::InResult {
                        left: Operand::Column(ColumnRef::bare("StuID")),
                        step: 5,
                        negated: true,
                    }
                );
            }
            other => panic!("step 6 parsed as {other:?}"),
        }
        assert_eq!(plan.steps[5].refs.iter().copied().collect::<Vec<_>>(), vec![1, 5]);
        match &plan.steps[6].op {
            EdlOperator::SelectColumn { columns, .. } => {
                assert_eq!(columns, &["major".to_string(), "age".to_string()]);
            }
            other => panic!("step 7 parsed as {other:?}"),
        }
    }

    #[test]
    fn unknown_operator_rejected() {
        let err = parse_edl("#1. Frobnicate: do things.").unwrap_err();
        assert!(matches!(err, EdlError::UnknownOperator { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn non_contiguous_numbering_rejected() {
        let text = "#1. Scan Table: Retrieve all rows from the [a] table.\n#3. Select the [x] column in #1.";
        let err = parse_edl(text).unwrap_err();
        assert_eq!(err, EdlError::NonContiguousNumbering { expected: 2, got: 3 });
    }

    #[test]
    fn forward_reference_rejected() {
        let text = "#1. Scan Table: Retrieve all rows from the [a] table.\n#2. Select the [x] column in #2.";
        let err = parse_edl(text).unwrap_err();
        assert_eq!(err, EdlError::DanglingReference { step: 2, referenced: 2 });
    }

    #[test]
    fn empty_text_rejected() {
        assert_eq!(parse_edl("\n  \n"), Err(EdlError::EmptyPlan));
    }

    #[test]
    fn join_cannot_open_a_plan() {
        let err =
            parse_edl("#1. Join the [x] table aliased as T1 on the condition that [a] equals [b].")
                .unwrap_err();
        assert!(matches!(err, EdlError::TemplateMismatch { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn group_sort_limit_having_forms() {
        let text = "\
#1. Scan Table: Retrieve all rows from the [concert] table.
#2. Group #1 by the [stadium_id] column.
#3. Apply Having Clause: Reserve the grouped rows of #2 where count(*) is greater than 1.
#4. Order #3 by the [stadium_id] column in descending order.
#5. Limit #4 to the top 3 record(s).
#6. Select the [stadium_id] column from the result of #5.";
        let plan = parse_edl(text).unwrap();
        assert!(matches!(
            plan.steps[1].op,
            EdlOperator::GroupBy { input_step: 1, .. }
        ));
        assert!(matches!(plan.steps[2].op, EdlOperator::Having { input_step: 2, .. }));
        assert!(matches!(
            plan.steps[3].op,
            EdlOperator::Sort { input_step: 3, order: SortOrder::Descending, .. }
        ));
        assert!(matches!(plan.steps[4].op, EdlOperator::Limit { input_step: 4, count: 3 }));
        assert!(matches!(
            plan.steps[5].op,
            EdlOperator::SelectColumn { input_step: 5, table_alias: None, .. }
        ));
    }

    #[test]
    fn zero_limit_rejected() {
        let text = "#1. Scan Table: Retrieve all rows from the [t] table.\n#2. Limit #1 to the top 0 records.";
        assert!(matches!(
            parse_edl(text),
            Err(EdlError::TemplateMismatch { line: 2, .. })
        ));
    }

    #[test]
    fn set_operation_forms() {
        let text = "\
#1. Scan Table: Retrieve all rows from the [a] table.
#2. Select the [x] column in #1.
#3. Scan Table: Retrieve all rows from the [b] table.
#4. Select the [x] column in #3.
#5. Apply except operation: Exclude the results in #4 from the results in #2.";
        let plan = parse_edl(text).unwrap();
        assert_eq!(
            plan.steps[4].op,
            EdlOperator::SetOperation { kind: SetOpKind::Except, left_query: 2, right_query: 4 }
        );
        let text2 = text.replace(
            "Apply except operation: Exclude the results in #4 from the results in #2",
            "Apply union operation: Include the results in #4 in the results in #2",
        );
        let plan2 = parse_edl(&text2).unwrap();
        assert_eq!(
            plan2.steps[4].op,
            EdlOperator::SetOperation { kind: SetOpKind::Union, left_query: 2, right_query: 4 }
        );
    }

    #[test]
    fn computed_column_forms() {
        let text = "\
#1. Scan Table: Retrieve all rows from the [orders] table.
#2. Compute [profit] as the difference of [revenue] and [cost].
#3. Compute [hire_year] as the year of [hire_date].
#4. Compute [tier] as a case statement where [profit] is greater than 100, then 'high', else 'low'.
#5. Extract substring from [code] starting at position 1 for 3 characters as [prefix].
#6. Cast [amount] as [integer].
#7. Compute the rank of [sales_rank] ordered by [profit] in descending order using the RANK( ) window function.
#8. Select the [profit], [tier] and [sales_rank] columns from the result of #7.";
        let plan = parse_edl(text).unwrap();
        assert_eq!(
            plan.steps[1].op,
            EdlOperator::ArithmeticCalculation {
                output_column: "profit".into(),
                operation: ArithOp::Difference,
                operands: vec![
                    Operand::Column(ColumnRef::bare("revenue")),
                    Operand::Column(ColumnRef::bare("cost")),
                ],
            }
        );
        assert_eq!(
            plan.steps[2].op,
            EdlOperator::DateCalculation {
                output_column: "hire_year".into(),
                operation: DateOp::Year,
                operands: vec![Operand::Column(ColumnRef::bare("hire_date"))],
            }
        );
        assert!(matches!(plan.steps[3].op, EdlOperator::CaseStatement { .. }));
        assert_eq!(
            plan.steps[4].op,
            EdlOperator::SubstringExtraction {
                source_column: "code".into(),
                start: 1,
                length: 3,
                output_column: "prefix".into(),
            }
        );
        assert_eq!(
            plan.steps[5].op,
            EdlOperator::Casting { column: "amount".into(), new_type: "integer".into() }
        );
        assert_eq!(
            plan.steps[6].op,
            EdlOperator::Ranking {
                column: "sales_rank".into(),
                order_column: "profit".into(),
                order: SortOrder::Descending,
            }
        );
        // computed steps chain off the previous step
        for i in 1..=6 {
            assert_eq!(
                plan.steps[i].refs.iter().copied().collect::<Vec<_>>(),
                vec![i],
                "step {}",
                i + 1
            );
        }
    }

    #[test]
    fn aggregate_select_entries_kept() {
        let text = "\
#1. Scan Table: Retrieve all rows from the [concert] table.
#2. Group #1 by the [stadium_id] column.
#3. Select the [stadium_id] column and count(*) from the result of #2.";
        let plan = parse_edl(text).unwrap();
        match &plan.steps[2].op {
            EdlOperator::SelectColumn { columns, .. } => {
                assert_eq!(columns, &["stadium_id".to_string(), "count(*)".to_string()]);
            }
            other => panic!("step 3 parsed as {other:?}"),
        }
    }

    #[test]
    fn head_spacing_variants_accepted() {
        for head in ["#1.", "#1. ", "#1 .", "#1"] {
            let text = format!("{head}Scan Table: Retrieve all rows from the [t] table.");
            let plan = parse_edl(&text).unwrap_or_else(|e| panic!("{head}: {e}"));
            assert_eq!(plan.steps.len(), 1, "{head}");
        }
    }

    #[test]
    fn subquery_with_select_column_form() {
        let plan = parse_edl(
            "#1. Subquery: Retrieve all rows from the [Pets] table in a subquery and select the [PetID] column.",
        )
        .unwrap();
        assert_eq!(
            plan.steps[0].op,
            EdlOperator::Subquery {
                table: "Pets".into(),
                alias: None,
                select_column: Some("PetID".into())
            }
        );
        // unlabeled form is recognized by "in a subquery"
        let plan2 = parse_edl(
            "#1. Retrieve all rows from the [Pets] table in a subquery and select the [PetID] column.",
        )
        .unwrap();
        assert_eq!(plan.steps[0].op, plan2.steps[0].op);
    }
}
