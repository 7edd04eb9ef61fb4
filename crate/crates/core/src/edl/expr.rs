//! Conditions and value operands inside step templates: the bracketed slots
//! of Join, Reserve Rows, Having, Case Statement, and the computed-column
//! operators. Surface forms stay close to prose ("the [PetType] in table T2
//! is 'cat'", "[StuID] is not in the result of #5") and parse into a small
//! AST the compiler can lower.

use serde::{Deserialize, Serialize};

/// A column mention, optionally qualified by a table alias or table name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub name: String,
    pub qualifier: Option<String>,
}

impl ColumnRef {
    pub fn bare(name: impl Into<String>) -> Self {
        Self { name: name.into(), qualifier: None }
    }

    pub fn qualified(qualifier: impl Into<String>, name: impl Into<String>) -> Self {
        Self { name: name.into(), qualifier: Some(qualifier.into()) }
    }

    /// Split "T1.PetID" into qualifier and name; no dot means unqualified.
    pub fn from_dotted(text: &str) -> Self {
        match text.split_once('.') {
            Some((q, n)) if !q.is_empty() && !n.is_empty() => Self::qualified(q, n),
            _ => Self::bare(text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn sql_name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }

    fn edl_name(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }
}

/// A value position: column, literal, or aggregate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operand {
    Column(ColumnRef),
    /// String literal; stored unescaped.
    Str(String),
    /// Numeric literal kept as written ("2.50" stays "2.50").
    Number(String),
    /// Aggregate call; `column: None` is `COUNT(*)`.
    Aggregate { func: AggFunc, column: Option<ColumnRef> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Gt,
    Lt,
    Ge,
    Le,
}

impl CompareOp {
    pub fn sql_symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
            CompareOp::Ge => ">=",
            CompareOp::Le => "<=",
        }
    }

    fn edl_phrase(self) -> &'static str {
        match self {
            CompareOp::Eq => "equals",
            CompareOp::Ne => "does not equal",
            CompareOp::Gt => "is greater than",
            CompareOp::Lt => "is less than",
            CompareOp::Ge => "is greater than or equal to",
            CompareOp::Le => "is less than or equal to",
        }
    }
}

/// A filter condition. `and` binds tighter than `or`; parenthesized groups
/// are accepted on input and emitted only where the precedence needs them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Compare { left: Operand, op: CompareOp, right: Operand },
    /// `<left> is [not] in the result of #<step>` — membership against the
    /// result of an earlier query block.
    InResult { left: Operand, step: usize, negated: bool },
    IsNull { left: Operand, negated: bool },
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    /// Step numbers referenced via "the result of #n".
    pub fn step_refs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut Vec<usize>) {
        match self {
            Condition::InResult { step, .. } => out.push(*step),
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            _ => {}
        }
    }

    /// Every column mentioned anywhere in the condition.
    pub fn column_refs(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a ColumnRef>) {
        let mut push = |op: &'a Operand| match op {
            Operand::Column(c) => out.push(c),
            Operand::Aggregate { column: Some(c), .. } => out.push(c),
            _ => {}
        };
        match self {
            Condition::Compare { left, right, .. } => {
                push(left);
                push(right);
            }
            Condition::InResult { left, .. } | Condition::IsNull { left, .. } => push(left),
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// rendering (canonical EDL surface)
// ---------------------------------------------------------------------------

pub fn render_operand(op: &Operand) -> String {
    match op {
        Operand::Column(ColumnRef { name, qualifier: None }) => format!("[{name}]"),
        Operand::Column(ColumnRef { name, qualifier: Some(q) }) => format!("{q}.{name}"),
        Operand::Str(s) => format!("'{}'", s.replace('\'', "''")),
        Operand::Number(n) => n.clone(),
        Operand::Aggregate { func, column: None } => format!("{}(*)", func.edl_name()),
        Operand::Aggregate { func, column: Some(c) } => {
            let inner = match &c.qualifier {
                Some(q) => format!("{q}.{}", c.name),
                None => c.name.clone(),
            };
            format!("{}([{}])", func.edl_name(), inner)
        }
    }
}

pub fn render_condition(cond: &Condition) -> String {
    match cond {
        Condition::Compare { left, op, right } => format!(
            "{} {} {}",
            render_operand(left),
            op.edl_phrase(),
            render_operand(right)
        ),
        Condition::InResult { left, step, negated } => format!(
            "{} is {}in the result of #{step}",
            render_operand(left),
            if *negated { "not " } else { "" }
        ),
        Condition::IsNull { left, negated } => format!(
            "{} is {}null",
            render_operand(left),
            if *negated { "not " } else { "" }
        ),
        Condition::And(a, b) => format!("{} and {}", paren_if_or(a), paren_if_or(b)),
        Condition::Or(a, b) => format!("{} or {}", render_condition(a), render_condition(b)),
    }
}

fn paren_if_or(c: &Condition) -> String {
    match c {
        Condition::Or(..) => format!("({})", render_condition(c)),
        _ => render_condition(c),
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

/// Positions where `sep` occurs as a spaced word at nesting depth zero
/// (outside quotes, brackets, and parentheses).
fn top_level_split(s: &str, sep: &str) -> Vec<String> {
    let lower = s.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let pat = format!(" {sep} ");
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
        if depth == 0 && !in_quote && lower[i..].starts_with(&pat) {
            // "or" inside "is less/greater than or equal to" is part of the
            // comparison phrase, not a boolean connective
            let phrase_or = sep == "or" && lower[i + pat.len()..].starts_with("equal");
            if !phrase_or {
                parts.push(s[start..i].to_string());
                i += pat.len();
                start = i;
                continue;
            }
        }
        i += 1;
    }
    parts.push(s[start..].to_string());
    parts
}

/// Parse a full condition string (no trailing period).
pub fn parse_condition(s: &str) -> Result<Condition, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty condition".into());
    }
    let or_parts = top_level_split(s, "or");
    let mut or_acc: Option<Condition> = None;
    for part in or_parts {
        let and_parts = top_level_split(&part, "and");
        let mut and_acc: Option<Condition> = None;
        for atom in and_parts {
            let parsed = parse_atom(atom.trim())?;
            and_acc = Some(match and_acc {
                None => parsed,
                Some(prev) => Condition::And(Box::new(prev), Box::new(parsed)),
            });
        }
        let clause = and_acc.ok_or("empty conjunct")?;
        or_acc = Some(match or_acc {
            None => clause,
            Some(prev) => Condition::Or(Box::new(prev), Box::new(clause)),
        });
    }
    or_acc.ok_or_else(|| "empty condition".into())
}

fn strip_outer_parens(s: &str) -> Option<&str> {
    let s = s.trim();
    if !s.starts_with('(') || !s.ends_with(')') {
        return None;
    }
    // the opening paren must match the final closing paren
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 && i != s.len() - 1 {
                    return None;
                }
            }
            _ => {}
        }
    }
    Some(&s[1..s.len() - 1])
}

/// Relation phrases, longest first so prefixes never shadow longer forms.
const RELATIONS: &[(&str, &str)] = &[
    ("is not in the result of", "in!"),
    ("is in the result of", "in"),
    ("is not null", "null!"),
    ("is null", "null"),
    ("is greater than or equal to", ">="),
    ("is less than or equal to", "<="),
    ("is not equal to", "<>"),
    ("is equal to", "="),
    ("does not equal", "<>"),
    ("is greater than", ">"),
    ("is less than", "<"),
    ("is more than", ">"),
    ("is fewer than", "<"),
    ("is at least", ">="),
    ("is at most", "<="),
    ("equals", "="),
    ("is not", "<>"),
    ("is", "="),
    (">=", ">="),
    ("<=", "<="),
    ("<>", "<>"),
    ("!=", "<>"),
    ("==", "="),
    ("=", "="),
    (">", ">"),
    ("<", "<"),
];

fn compare_op(symbol: &str) -> CompareOp {
    match symbol {
        "=" => CompareOp::Eq,
        "<>" => CompareOp::Ne,
        ">" => CompareOp::Gt,
        "<" => CompareOp::Lt,
        ">=" => CompareOp::Ge,
        "<=" => CompareOp::Le,
        other => unreachable!("not a comparison symbol: {other}"),
    }
}

fn parse_atom(s: &str) -> Result<Condition, String> {
    if let Some(inner) = strip_outer_parens(s) {
        return parse_condition(inner);
    }
    let (left, rest) = scan_operand(s)?;
    let rest = rest.trim_start();
    let lower = rest.to_ascii_lowercase();
    for (phrase, action) in RELATIONS {
        let symbolic = !phrase.chars().next().unwrap().is_ascii_alphabetic();
        if !lower.starts_with(phrase) {
            continue;
        }
        // word-form phrases need a word boundary after the match
        let after = &rest[phrase.len()..];
        if !symbolic && !after.is_empty() && !after.starts_with(char::is_whitespace) {
            continue;
        }
        let tail = after.trim();
        return match *action {
            "in!" | "in" => {
                let step = parse_step_ref(tail)
                    .ok_or_else(|| format!("expected a step reference after \"{phrase}\", got: {tail}"))?;
                Ok(Condition::InResult { left, step, negated: *action == "in!" })
            }
            "null!" | "null" => {
                if !tail.is_empty() {
                    return Err(format!("unexpected text after null test: {tail}"));
                }
                Ok(Condition::IsNull { left, negated: *action == "null!" })
            }
            sym => {
                let right = parse_operand(tail)?;
                Ok(Condition::Compare { left, op: compare_op(sym), right })
            }
        };
    }
    Err(format!("no comparison found in: {s}"))
}

/// Accept "#5" and "[#5]".
pub fn parse_step_ref(s: &str) -> Option<usize> {
    let s = s.trim();
    let s = s.strip_prefix('[').map(|x| x.strip_suffix(']').unwrap_or(x)).unwrap_or(s);
    let digits = s.trim().strip_prefix('#')?;
    let digits = digits.trim();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Parse a complete string as one operand.
pub fn parse_operand(s: &str) -> Result<Operand, String> {
    let (op, rest) = scan_operand(s)?;
    if !rest.trim().is_empty() {
        return Err(format!("unexpected trailing text after operand: {}", rest.trim()));
    }
    Ok(op)
}

/// Parse an operand at the start of `s`, returning it and the unconsumed
/// remainder.
fn scan_operand(s: &str) -> Result<(Operand, &str), String> {
    let s = s.trim_start();
    let lower = s.to_ascii_lowercase();
    let s = if lower.starts_with("the ") { &s[4..] } else { s };
    if s.is_empty() {
        return Err("expected an operand".into());
    }

    // string literal
    if let Some(body) = s.strip_prefix('\'') {
        let mut value = String::new();
        let mut chars = body.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if c == '\'' {
                if matches!(chars.peek(), Some((_, '\''))) {
                    value.push('\'');
                    chars.next();
                } else {
                    return Ok((Operand::Str(value), &body[i + 1..]));
                }
            } else {
                value.push(c);
            }
        }
        return Err(format!("unterminated string literal: {s}"));
    }

    // bracketed column, optionally "in table Q"
    if let Some(body) = s.strip_prefix('[') {
        let close = body.find(']').ok_or_else(|| format!("unclosed bracket: {s}"))?;
        let inner = body[..close].trim();
        let rest = &body[close + 1..];
        let rest_lower = rest.to_ascii_lowercase();
        if let Some(after) = rest_lower.strip_prefix(" in table ") {
            let qual_len = after
                .find(|c: char| c.is_whitespace())
                .unwrap_or(after.len());
            let qual_start = rest.len() - after.len();
            let qualifier = rest[qual_start..qual_start + qual_len].to_string();
            return Ok((
                Operand::Column(ColumnRef { name: inner.to_string(), qualifier: Some(qualifier) }),
                &rest[qual_start + qual_len..],
            ));
        }
        return Ok((Operand::Column(ColumnRef::from_dotted(inner)), rest));
    }

    // aggregate: func(...) form
    for (prefix, func) in [
        ("count", AggFunc::Count),
        ("sum", AggFunc::Sum),
        ("avg", AggFunc::Avg),
        ("min", AggFunc::Min),
        ("max", AggFunc::Max),
    ] {
        let low = s.to_ascii_lowercase();
        if let Some(after) = low.strip_prefix(prefix) {
            let after_trim = after.trim_start();
            if after_trim.starts_with('(') {
                let open = s.len() - after_trim.len();
                let close = s[open..]
                    .find(')')
                    .ok_or_else(|| format!("unclosed aggregate call: {s}"))?
                    + open;
                let inner = s[open + 1..close].trim();
                let column = if inner == "*" {
                    None
                } else {
                    let cleaned = inner.trim_start_matches('[').trim_end_matches(']').trim();
                    Some(ColumnRef::from_dotted(cleaned))
                };
                return Ok((Operand::Aggregate { func, column }, &s[close + 1..]));
            }
        }
    }

    // phrase aggregates: "count of rows", "average of [col]"
    {
        let low = s.to_ascii_lowercase();
        if let Some(rest) = low.strip_prefix("count of rows") {
            let consumed = s.len() - rest.len();
            return Ok((Operand::Aggregate { func: AggFunc::Count, column: None }, &s[consumed..]));
        }
        for (word, func) in [
            ("average of ", AggFunc::Avg),
            ("avg of ", AggFunc::Avg),
            ("sum of ", AggFunc::Sum),
            ("count of ", AggFunc::Count),
            ("minimum of ", AggFunc::Min),
            ("maximum of ", AggFunc::Max),
        ] {
            if low.starts_with(word) {
                let (inner, rest) = scan_operand(&s[word.len()..])?;
                if let Operand::Column(c) = inner {
                    return Ok((Operand::Aggregate { func, column: Some(c) }, rest));
                }
                return Err(format!("aggregate of a non-column operand: {s}"));
            }
        }
    }

    // numeric literal
    {
        let bytes = s.as_bytes();
        let mut i = 0;
        if bytes[0] == b'-' {
            i = 1;
        }
        let digits_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i > digits_start {
            if i < bytes.len() && bytes[i] == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let boundary_ok = i == bytes.len()
                || bytes[i].is_ascii_whitespace()
                || matches!(bytes[i], b')' | b']' | b',');
            if boundary_ok {
                return Ok((Operand::Number(s[..i].to_string()), &s[i..]));
            }
        }
    }

    // bare text up to the first relation marker (or end of string)
    let lower = s.to_ascii_lowercase();
    let mut cut = s.len();
    for (phrase, _) in RELATIONS {
        let probe = if phrase.chars().next().unwrap().is_ascii_alphabetic() {
            format!(" {phrase} ")
        } else {
            format!(" {phrase}")
        };
        if let Some(pos) = lower.find(&probe) {
            cut = cut.min(pos);
        }
    }
    let bare = s[..cut].trim();
    if bare.is_empty() {
        return Err(format!("expected an operand, found: {s}"));
    }
    Ok((Operand::Column(ColumnRef::from_dotted(bare)), &s[cut..]))
}
