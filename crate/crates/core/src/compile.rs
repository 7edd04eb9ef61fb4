//! Deterministic EDL → SQL lowering, SQLite dialect.
//!
//! Each resolved block becomes one SELECT statement: the opening scan plus
//! joins form the FROM chain, ReserveRows conditions become WHERE conjuncts
//! (always pre-aggregation — the language has a distinct Having operator),
//! and `result of #k` references recurse into the consumed block's SQL.
//! Computed columns (arithmetic, date, case, substring, cast, rank) are
//! registered per block: a later select entry naming one emits `expr AS
//! name`, conditions substitute the parenthesized expression inline (WHERE
//! cannot see select aliases), and a computed output nothing references is
//! appended to the select list as a final projection.
//!
//! Aliases: plan-specified aliases are kept; a block with two or more FROM
//! items gets T1, T2, … synthesized for the unaliased ones, while a block
//! over a single unaliased table drops qualifiers entirely ("SELECT major,
//! age FROM Student", not "Student.major"). Identifiers are double-quoted
//! only when they collide with a keyword or contain non-identifier
//! characters; string literals single-quote with embedded quotes doubled.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::edl::{
    has_errors, resolve_blocks, validate_plan, BlockInfo, BlockKind, ColumnRef, Condition,
    DateOp, Diagnostic, EdlOperator, EdlPlan, Operand,
};
use crate::error::CompileError;
use crate::schema::SubSchema;

/// Target dialect of a compiled query. Only SQLite is produced today; the
/// tag reserves the seam for future backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Sqlite,
}

/// A compiled, executable SELECT statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlQuery {
    pub text: String,
    pub dialect: Dialect,
    /// Step index of the plan's final step.
    pub source_plan_root: usize,
}

/// Compile a plan into SQL. The plan should already be clean per
/// [`validate_plan`]; structural problems surface as [`CompileError`].
pub fn compile(plan: &EdlPlan, schema: &SubSchema) -> Result<SqlQuery, CompileError> {
    let info = resolve_blocks(plan);
    if let Some(issue) = info.issues.first() {
        return Err(CompileError::UnsupportedShape {
            step: issue.step,
            reason: issue.message.clone(),
        });
    }
    let mut compiler = Compiler { plan, schema, info, memo: BTreeMap::new() };
    let main = compiler.info.main_block;
    let compiled = compiler.block_sql(main)?;
    Ok(SqlQuery { text: compiled.sql, dialect: Dialect::Sqlite, source_plan_root: plan.root })
}

/// Validate, then compile. Returns the full diagnostic list instead of SQL
/// when validation finds errors or the shape cannot be lowered; never panics
/// on malformed plans.
pub fn compile_or_explain(plan: &EdlPlan, schema: &SubSchema) -> Result<SqlQuery, Vec<Diagnostic>> {
    let diags = validate_plan(plan, schema);
    if has_errors(&diags) {
        return Err(diags);
    }
    match compile(plan, schema) {
        Ok(query) => Ok(query),
        Err(CompileError::UnsupportedShape { step, reason }) => {
            let mut diags = diags;
            diags.push(Diagnostic::error(step, "unsupported-shape", reason));
            Err(diags)
        }
    }
}

// ---------------------------------------------------------------------------
// identifier and literal quoting
// ---------------------------------------------------------------------------

/// SQLite keywords; identifiers colliding with these are double-quoted.
const SQLITE_KEYWORDS: &[&str] = &[
    "abort", "action", "add", "after", "all", "alter", "always", "analyze", "and", "as", "asc",
    "attach", "autoincrement", "before", "begin", "between", "by", "cascade", "case", "cast",
    "check", "collate", "column", "commit", "conflict", "constraint", "create", "cross",
    "current", "current_date", "current_time", "current_timestamp", "database", "default",
    "deferrable", "deferred", "delete", "desc", "detach", "distinct", "do", "drop", "each",
    "else", "end", "escape", "except", "exclude", "exclusive", "exists", "explain", "fail",
    "filter", "first", "following", "for", "foreign", "from", "full", "generated", "glob",
    "group", "groups", "having", "if", "ignore", "immediate", "in", "index", "indexed",
    "initially", "inner", "insert", "instead", "intersect", "into", "is", "isnull", "join",
    "key", "last", "left", "like", "limit", "match", "materialized", "natural", "no", "not",
    "nothing", "notnull", "null", "nulls", "of", "offset", "on", "or", "order", "others",
    "outer", "over", "partition", "plan", "pragma", "preceding", "primary", "query", "raise",
    "range", "recursive", "references", "regexp", "reindex", "release", "rename", "replace",
    "restrict", "returning", "right", "rollback", "row", "rows", "savepoint", "select", "set",
    "table", "temp", "temporary", "then", "ties", "to", "transaction", "trigger", "unbounded",
    "union", "unique", "update", "using", "vacuum", "values", "view", "virtual", "when",
    "where", "window", "with", "without",
];

fn needs_quoting(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    let rest_ok = name.chars().skip(1).all(|c| c.is_ascii_alphanumeric() || c == '_');
    !head_ok || !rest_ok || SQLITE_KEYWORDS.contains(&name.to_ascii_lowercase().as_str())
}

fn ident(name: &str) -> String {
    if name == "*" {
        return "*".to_string();
    }
    if needs_quoting(name) {
        format!("\"{}\"", name.replace('"', "\"\""))
    } else {
        name.to_string()
    }
}

fn string_literal(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

// ---------------------------------------------------------------------------
// per-block context
// ---------------------------------------------------------------------------

struct FromItem {
    table: String,
    alias: Option<String>,
    /// Rendered ON condition; None for the base item.
    on: Option<String>,
}

struct Computed {
    lower: String,
    name: String,
    expr: String,
    step: usize,
    /// Some later step in the block used this value.
    referenced: bool,
    /// A select entry emitted it as `expr AS name`.
    selected: bool,
}

/// Name-resolution context of one block while its SQL is assembled.
struct BlockCtx<'a> {
    items: Vec<FromItem>,
    /// One unaliased table: qualifiers are dropped rather than rendered.
    single_unaliased: bool,
    schema: &'a SubSchema,
    computed: Vec<Computed>,
}

impl BlockCtx<'_> {
    fn item_qualifier(item: &FromItem) -> String {
        ident(item.alias.as_deref().unwrap_or(&item.table))
    }

    fn resolve_qualifier(&self, q: &str) -> Option<&FromItem> {
        self.items
            .iter()
            .find(|it| it.alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(q)))
            .or_else(|| self.items.iter().find(|it| it.table.eq_ignore_ascii_case(q)))
    }

    /// Render a column reference. `inline_computed` substitutes a computed
    /// column's parenthesized expression (for WHERE/ON/expression positions);
    /// otherwise its select-list alias is used (GROUP BY / ORDER BY).
    fn column_sql(&mut self, col: &ColumnRef, fallback: Option<&str>, inline_computed: bool) -> String {
        if col.name == "*" {
            return "*".to_string();
        }
        if col.qualifier.is_none() {
            let lower = col.name.to_ascii_lowercase();
            if let Some(c) = self.computed.iter_mut().find(|c| c.lower == lower) {
                c.referenced = true;
                return if inline_computed { format!("({})", c.expr) } else { ident(&c.name) };
            }
        }
        if self.single_unaliased {
            return ident(&col.name);
        }
        match col.qualifier.as_deref().or(fallback) {
            Some(q) => match self.resolve_qualifier(q) {
                Some(item) => format!("{}.{}", Self::item_qualifier(item), ident(&col.name)),
                None => ident(&col.name),
            },
            None => {
                if self.items.len() >= 2 {
                    // qualify via the schema: first FROM item owning the column
                    for item in &self.items {
                        if self
                            .schema
                            .table(&item.table)
                            .is_some_and(|t| t.has_column(&col.name))
                        {
                            return format!("{}.{}", Self::item_qualifier(item), ident(&col.name));
                        }
                    }
                }
                ident(&col.name)
            }
        }
    }

    fn operand_sql(&mut self, operand: &Operand, fallback: Option<&str>) -> String {
        match operand {
            Operand::Column(col) => self.column_sql(col, fallback, true),
            Operand::Str(s) => string_literal(s),
            Operand::Number(n) => n.clone(),
            Operand::Aggregate { func, column } => match column {
                None => format!("{}(*)", func.sql_name()),
                Some(col) => format!("{}({})", func.sql_name(), self.column_sql(col, None, true)),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// compiler
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct CompiledBlock {
    sql: String,
    /// Carries its own ORDER BY or LIMIT (disallowed under set operations).
    ordered_or_limited: bool,
}

struct Compiler<'a> {
    plan: &'a EdlPlan,
    schema: &'a SubSchema,
    info: BlockInfo,
    memo: BTreeMap<usize, CompiledBlock>,
}

impl<'a> Compiler<'a> {
    fn op(&self, step: usize) -> EdlOperator {
        self.plan
            .step(step)
            .expect("block steps exist in the plan")
            .op
            .clone()
    }

    fn block_sql(&mut self, id: usize) -> Result<CompiledBlock, CompileError> {
        if let Some(done) = self.memo.get(&id) {
            return Ok(done.clone());
        }
        let compiled = match self.info.block(id).kind {
            BlockKind::SetOp => self.compile_setop_block(id)?,
            _ => self.compile_select_block(id)?,
        };
        self.memo.insert(id, compiled.clone());
        Ok(compiled)
    }

    /// SQL of the block whose result step `step` is.
    fn result_sql(&mut self, step: usize) -> Result<String, CompileError> {
        let id = *self
            .info
            .block_of
            .get(&step)
            .expect("references resolve to blocks");
        Ok(self.block_sql(id)?.sql)
    }

    fn condition_sql(
        &mut self,
        ctx: &mut BlockCtx<'a>,
        cond: &Condition,
    ) -> Result<String, CompileError> {
        Ok(match cond {
            Condition::Compare { left, op, right } => format!(
                "{} {} {}",
                ctx.operand_sql(left, None),
                op.sql_symbol(),
                ctx.operand_sql(right, None)
            ),
            Condition::InResult { left, step, negated } => {
                let left_sql = ctx.operand_sql(left, None);
                let sub = self.result_sql(*step)?;
                let keyword = if *negated { "NOT IN" } else { "IN" };
                format!("{left_sql} {keyword} ({sub})")
            }
            Condition::IsNull { left, negated } => format!(
                "{} IS {}NULL",
                ctx.operand_sql(left, None),
                if *negated { "NOT " } else { "" }
            ),
            Condition::And(a, b) => {
                let l = self.conjunct_sql(ctx, a)?;
                let r = self.conjunct_sql(ctx, b)?;
                format!("{l} AND {r}")
            }
            Condition::Or(a, b) => {
                format!("{} OR {}", self.condition_sql(ctx, a)?, self.condition_sql(ctx, b)?)
            }
        })
    }

    /// Render an AND operand, parenthesizing nested ORs.
    fn conjunct_sql(
        &mut self,
        ctx: &mut BlockCtx<'a>,
        cond: &Condition,
    ) -> Result<String, CompileError> {
        let sql = self.condition_sql(ctx, cond)?;
        Ok(if matches!(cond, Condition::Or(..)) { format!("({sql})") } else { sql })
    }

    /// A select or sort entry: a plain column, a dotted reference, or an
    /// aggregate phrase. `inline_computed` as in [`BlockCtx::column_sql`].
    fn entry_sql(
        &mut self,
        ctx: &mut BlockCtx<'a>,
        raw: &str,
        fallback: Option<&str>,
        inline_computed: bool,
    ) -> String {
        match crate::edl::parse_operand(raw) {
            Ok(Operand::Column(col)) => ctx.column_sql(&col, fallback, inline_computed),
            Ok(op) => ctx.operand_sql(&op, fallback),
            Err(_) => ctx.column_sql(&ColumnRef::from_dotted(raw), fallback, inline_computed),
        }
    }

    fn compute_expr(
        &mut self,
        ctx: &mut BlockCtx<'a>,
        op: &EdlOperator,
    ) -> Result<Option<(String, String)>, CompileError> {
        Ok(match op {
            EdlOperator::ArithmeticCalculation { output_column, operation, operands } => {
                let parts: Vec<String> =
                    operands.iter().map(|o| ctx.operand_sql(o, None)).collect();
                let joined = parts.join(&format!(" {} ", operation.sql_symbol()));
                Some((output_column.clone(), joined))
            }
            EdlOperator::DateCalculation { output_column, operation, operands } => {
                let expr = match operation {
                    DateOp::Year | DateOp::Month | DateOp::Day => {
                        let fmt = match operation {
                            DateOp::Year => "%Y",
                            DateOp::Month => "%m",
                            _ => "%d",
                        };
                        format!(
                            "CAST(strftime('{fmt}', {}) AS INTEGER)",
                            ctx.operand_sql(&operands[0], None)
                        )
                    }
                    DateOp::DayDifference => format!(
                        "CAST(julianday({}) - julianday({}) AS INTEGER)",
                        ctx.operand_sql(&operands[0], None),
                        ctx.operand_sql(&operands[1], None)
                    ),
                };
                Some((output_column.clone(), expr))
            }
            EdlOperator::CaseStatement { output_column, condition, then_result, else_result } => {
                let cond_sql = self.condition_sql(ctx, condition)?;
                let expr = format!(
                    "CASE WHEN {cond_sql} THEN {} ELSE {} END",
                    ctx.operand_sql(then_result, None),
                    ctx.operand_sql(else_result, None)
                );
                Some((output_column.clone(), expr))
            }
            EdlOperator::SubstringExtraction { source_column, start, length, output_column } => {
                let col = ctx.column_sql(&ColumnRef::from_dotted(source_column), None, true);
                Some((output_column.clone(), format!("SUBSTR({col}, {start}, {length})")))
            }
            EdlOperator::Casting { column, new_type } => {
                let col_ref = ColumnRef::from_dotted(column);
                let col = ctx.column_sql(&col_ref, None, true);
                Some((col_ref.name, format!("CAST({col} AS {})", new_type.to_ascii_uppercase())))
            }
            EdlOperator::Ranking { column, order_column, order } => {
                let ord = self.entry_sql(ctx, order_column, None, true);
                Some((
                    column.clone(),
                    format!("RANK() OVER (ORDER BY {ord} {})", order.sql_word()),
                ))
            }
            _ => None,
        })
    }

    fn compile_select_block(&mut self, id: usize) -> Result<CompiledBlock, CompileError> {
        let steps = self.info.block(id).steps.clone();

        // pass 1: FROM items, alias synthesis
        let mut items: Vec<FromItem> = Vec::new();
        let mut join_item: BTreeMap<usize, usize> = BTreeMap::new();
        for &s in &steps {
            match self.op(s) {
                EdlOperator::ScanTable { table, alias }
                | EdlOperator::Subquery { table, alias, .. } => {
                    items.push(FromItem { table, alias, on: None });
                }
                EdlOperator::Join { table, alias, .. } => {
                    join_item.insert(s, items.len());
                    items.push(FromItem { table, alias, on: None });
                }
                _ => {}
            }
        }
        if items.len() >= 2 {
            let mut taken: BTreeSet<String> = items
                .iter()
                .filter_map(|it| it.alias.as_ref().map(|a| a.to_ascii_lowercase()))
                .collect();
            for it in &items {
                taken.insert(it.table.to_ascii_lowercase());
            }
            let mut counter = 1usize;
            for item in &mut items {
                if item.alias.is_none() {
                    loop {
                        let candidate = format!("T{counter}");
                        counter += 1;
                        if taken.insert(candidate.to_ascii_lowercase()) {
                            item.alias = Some(candidate);
                            break;
                        }
                    }
                }
            }
        }
        let single_unaliased = items.len() == 1 && items[0].alias.is_none();
        let mut ctx =
            BlockCtx { items, single_unaliased, schema: self.schema, computed: Vec::new() };

        // pass 2: clause collection in step order
        let mut wheres: Vec<(String, bool)> = Vec::new();
        let mut group_by: Vec<String> = Vec::new();
        let mut havings: Vec<(String, bool)> = Vec::new();
        let mut order_by: Vec<String> = Vec::new();
        let mut limit: Option<u64> = None;
        let mut select: Vec<(usize, String)> = Vec::new();

        for &s in &steps {
            let op = self.op(s);
            match &op {
                EdlOperator::ScanTable { .. } => {}
                EdlOperator::Subquery { select_column, .. } => {
                    if let Some(col) = select_column {
                        let sql = ctx.column_sql(&ColumnRef::from_dotted(col), None, false);
                        select.push((s, sql));
                    }
                }
                EdlOperator::Join { condition, .. } => {
                    let on = self.condition_sql(&mut ctx, condition)?;
                    let idx = join_item[&s];
                    ctx.items[idx].on = Some(on);
                }
                EdlOperator::ReserveRows { condition, .. } => {
                    let sql = self.condition_sql(&mut ctx, condition)?;
                    wheres.push((sql, matches!(condition, Condition::Or(..))));
                }
                EdlOperator::GroupBy { columns, .. } => {
                    for col in columns {
                        let sql = self.entry_sql(&mut ctx, col, None, false);
                        group_by.push(sql);
                    }
                }
                EdlOperator::Having { condition, .. } => {
                    let sql = self.condition_sql(&mut ctx, condition)?;
                    havings.push((sql, matches!(condition, Condition::Or(..))));
                }
                EdlOperator::Sort { column, order, .. } => {
                    let sql = self.entry_sql(&mut ctx, column, None, false);
                    order_by.push(format!("{sql} {}", order.sql_word()));
                }
                EdlOperator::Limit { count, .. } => limit = Some(*count),
                EdlOperator::SelectColumn { columns, table_alias, .. } => {
                    for col in columns {
                        let col_ref = ColumnRef::from_dotted(col);
                        let lower = col_ref.name.to_ascii_lowercase();
                        let rendered = if col_ref.qualifier.is_none() {
                            if let Some(c) = ctx.computed.iter_mut().find(|c| c.lower == lower) {
                                c.selected = true;
                                format!("{} AS {}", c.expr, ident(&c.name))
                            } else {
                                self.entry_sql(&mut ctx, col, table_alias.as_deref(), false)
                            }
                        } else {
                            self.entry_sql(&mut ctx, col, table_alias.as_deref(), false)
                        };
                        if !select.iter().any(|(_, sql)| *sql == rendered) {
                            select.push((s, rendered));
                        }
                    }
                }
                EdlOperator::SetOperation { .. } => unreachable!("set ops open their own block"),
                computed_op => {
                    if let Some((name, expr)) = self.compute_expr(&mut ctx, computed_op)? {
                        ctx.computed.push(Computed {
                            lower: name.to_ascii_lowercase(),
                            name,
                            expr,
                            step: s,
                            referenced: false,
                            selected: false,
                        });
                    }
                }
            }
        }

        // computed outputs nothing used are the block's final projection
        for c in &ctx.computed {
            if !c.referenced && !c.selected {
                select.push((c.step, format!("{} AS {}", c.expr, ident(&c.name))));
            }
        }
        select.sort_by_key(|(step, _)| *step);

        let select_list = if select.is_empty() {
            "*".to_string()
        } else {
            select.into_iter().map(|(_, sql)| sql).collect::<Vec<_>>().join(", ")
        };

        let mut from = String::new();
        for (i, item) in ctx.items.iter().enumerate() {
            if i == 0 {
                from.push_str(&ident(&item.table));
            } else {
                from.push_str(" JOIN ");
                from.push_str(&ident(&item.table));
            }
            if let Some(alias) = &item.alias {
                from.push_str(" AS ");
                from.push_str(&ident(alias));
            }
            if let Some(on) = &item.on {
                from.push_str(" ON ");
                from.push_str(on);
            }
        }

        let mut sql = format!("SELECT {select_list} FROM {from}");
        if !wheres.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&join_conjuncts(wheres));
        }
        if !group_by.is_empty() {
            sql.push_str(" GROUP BY ");
            sql.push_str(&group_by.join(", "));
        }
        if !havings.is_empty() {
            sql.push_str(" HAVING ");
            sql.push_str(&join_conjuncts(havings));
        }
        if !order_by.is_empty() {
            sql.push_str(" ORDER BY ");
            sql.push_str(&order_by.join(", "));
        }
        if let Some(n) = limit {
            sql.push_str(&format!(" LIMIT {n}"));
        }

        let ordered_or_limited = !order_by.is_empty() || limit.is_some();
        Ok(CompiledBlock { sql, ordered_or_limited })
    }

    fn compile_setop_block(&mut self, id: usize) -> Result<CompiledBlock, CompileError> {
        let steps = self.info.block(id).steps.clone();
        let first = steps[0];
        let EdlOperator::SetOperation { kind, left_query, right_query } = self.op(first) else {
            unreachable!("set-op blocks open with a SetOperation step");
        };
        let left = self.result_block(left_query)?;
        let right = self.result_block(right_query)?;
        for (side, compiled) in [("left", &left), ("right", &right)] {
            if compiled.ordered_or_limited {
                return Err(CompileError::UnsupportedShape {
                    step: first,
                    reason: format!(
                        "the {side} operand of the set operation carries ORDER BY or LIMIT, which SQLite does not allow inside a compound query"
                    ),
                });
            }
        }
        let mut sql = format!("{} {} {}", left.sql, kind.sql_word(), right.sql);

        let mut order_by: Vec<String> = Vec::new();
        let mut limit: Option<u64> = None;
        for &s in steps.iter().skip(1) {
            match self.op(s) {
                EdlOperator::Sort { column, order, .. } => {
                    // operands are already projected: plain output-column names
                    let name = ColumnRef::from_dotted(&column).name;
                    order_by.push(format!("{} {}", ident(&name), order.sql_word()));
                }
                EdlOperator::Limit { count, .. } => limit = Some(count),
                other => {
                    return Err(CompileError::UnsupportedShape {
                        step: s,
                        reason: format!(
                            "only Sort or Limit may follow a set operation, not {}",
                            other.name()
                        ),
                    })
                }
            }
        }
        if !order_by.is_empty() {
            sql.push_str(" ORDER BY ");
            sql.push_str(&order_by.join(", "));
        }
        if let Some(n) = limit {
            sql.push_str(&format!(" LIMIT {n}"));
        }
        let ordered_or_limited = !order_by.is_empty() || limit.is_some();
        Ok(CompiledBlock { sql, ordered_or_limited })
    }

    fn result_block(&mut self, step: usize) -> Result<CompiledBlock, CompileError> {
        let id = *self
            .info
            .block_of
            .get(&step)
            .expect("references resolve to blocks");
        self.block_sql(id)
    }
}

fn join_conjuncts(parts: Vec<(String, bool)>) -> String {
    let many = parts.len() > 1;
    parts
        .into_iter()
        .map(|(sql, or_root)| if or_root && many { format!("({sql})") } else { sql })
        .collect::<Vec<_>>()
        .join(" AND ")
}
