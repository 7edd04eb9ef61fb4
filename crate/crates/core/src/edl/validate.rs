//! Schema-aware plan validation. Produces diagnostics, never errors: shape
//! problems from block resolution become error diagnostics, name lookups run
//! against the selected sub-schema, and dead branches are warnings. The
//! generation repair loop feeds these messages back to the model verbatim,
//! so they are written to be actionable on their own.

use std::collections::BTreeSet;

use crate::schema::SubSchema;

use super::blocks::{resolve_blocks, Block, BlockInfo};
use super::{ColumnRef, Condition, Diagnostic, EdlOperator, EdlPlan, Operand};

/// SQLite storage classes accepted as Casting targets.
const CAST_TYPES: &[&str] = &["text", "integer", "real", "numeric", "blob"];

/// Validate a plan against the tables and columns actually selected for the
/// question. Error diagnostics block compilation; warnings do not.
pub fn validate_plan(plan: &EdlPlan, schema: &SubSchema) -> Vec<Diagnostic> {
    let info = resolve_blocks(plan);
    let out: Vec<Diagnostic> = info
        .issues
        .iter()
        .map(|i| Diagnostic::error(i.step, i.code, i.message.clone()))
        .collect();

    let group_steps: BTreeSet<usize> = plan
        .steps
        .iter()
        .filter(|s| matches!(s.op, EdlOperator::GroupBy { .. }))
        .map(|s| s.index)
        .collect();
    let mut checker = Checker {
        schema,
        info: &info,
        computed: vec![BTreeSet::new(); info.blocks.len()],
        group_steps,
        out,
    };
    for step in &plan.steps {
        checker.check_step(step.index, &step.op);
    }
    let mut out = checker.out;

    for id in info.unused_blocks() {
        let block = info.block(id);
        let span = if block.steps.len() == 1 {
            format!("step #{}", block.leaf)
        } else {
            format!("steps #{}-#{}", block.steps[0], block.leaf)
        };
        out.push(Diagnostic::warning(
            block.leaf,
            "unused-step",
            format!("{span} produce a result that no later step uses"),
        ));
    }

    out.sort_by_key(|d| (d.step_index, d.severity, d.code.clone()));
    out
}

struct Checker<'a> {
    schema: &'a SubSchema,
    info: &'a BlockInfo,
    /// Per block: lower-cased names introduced by computed-column steps.
    computed: Vec<BTreeSet<String>>,
    /// Indices of GroupBy steps, for the Having check.
    group_steps: BTreeSet<usize>,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn error(&mut self, step: usize, code: &str, message: String) {
        self.out.push(Diagnostic::error(step, code, message));
    }

    fn block_of(&self, step: usize) -> &Block {
        self.info
            .block_of_step(step)
            .expect("every parsed step belongs to a block")
    }

    fn known_table(&self, name: &str) -> bool {
        self.schema.table(name).is_some()
    }

    /// Require `table` to exist in the sub-schema.
    fn check_table(&mut self, step: usize, table: &str) {
        if !self.known_table(table) {
            let known: Vec<&str> = self.schema.tables.iter().map(|t| t.name.as_str()).collect();
            self.error(
                step,
                "unknown-table",
                format!(
                    "table [{table}] is not in the selected schema (available: {})",
                    known.join(", ")
                ),
            );
        }
    }

    /// Resolve a qualifier (alias or table name) to a schema table name
    /// within `block`. `None` means the qualifier itself is unknown.
    fn qualifier_table<'b>(&self, block: &'b Block, q: &str) -> Option<String> {
        if let Some(table) = block.aliases.get(&q.to_ascii_lowercase()) {
            return Some(table.clone());
        }
        block
            .tables
            .iter()
            .find(|t| t.eq_ignore_ascii_case(q))
            .cloned()
    }

    /// Check one column reference in the context of `step`'s block.
    /// `fallback_qualifier` applies to unqualified names (SelectColumn's
    /// "from the [T] table" phrase).
    fn check_column(
        &mut self,
        step: usize,
        col: &ColumnRef,
        fallback_qualifier: Option<&str>,
    ) {
        if col.name == "*" {
            return;
        }
        let block = self.block_of(step);
        let block_id = block.id;
        if col.qualifier.is_none() && self.computed[block_id].contains(&col.name.to_ascii_lowercase())
        {
            return;
        }
        let qualifier = col.qualifier.as_deref().or(fallback_qualifier);
        match qualifier {
            Some(q) => {
                // computed names may still be written with the select phrase's
                // fallback qualifier absent — only a real qualifier pins a table
                let Some(table) = self.qualifier_table(block, q) else {
                    self.error(
                        step,
                        "unknown-table",
                        format!("[{q}] is not a table or alias in this step's block"),
                    );
                    return;
                };
                let Some(schema_table) = self.schema.table(&table) else {
                    return; // the scan/join step already reported this table
                };
                if !schema_table.has_column(&col.name) {
                    self.error(
                        step,
                        "unknown-column",
                        format!(
                            "column [{}] is not in table [{}] (columns: {})",
                            col.name,
                            schema_table.name,
                            schema_table.columns.join(", ")
                        ),
                    );
                }
            }
            None => {
                // unqualified: the column must exist in at least one of the
                // block's tables; skip when any table is itself unknown to
                // avoid cascading noise
                let tables = block.tables.clone();
                if tables.is_empty() || tables.iter().any(|t| !self.known_table(t)) {
                    return;
                }
                let found = tables
                    .iter()
                    .filter_map(|t| self.schema.table(t))
                    .any(|t| t.has_column(&col.name));
                if !found {
                    self.error(
                        step,
                        "unknown-column",
                        format!(
                            "column [{}] is not in any table of this block ({})",
                            col.name,
                            tables.join(", ")
                        ),
                    );
                }
            }
        }
    }

    fn check_raw_column(&mut self, step: usize, raw: &str, fallback_qualifier: Option<&str>) {
        self.check_column(step, &ColumnRef::from_dotted(raw), fallback_qualifier);
    }

    /// Select and sort entries may be plain columns or aggregate phrases
    /// ("count(*)", "avg of [age]").
    fn check_entry(&mut self, step: usize, raw: &str, fallback_qualifier: Option<&str>) {
        match super::expr::parse_operand(raw) {
            Ok(Operand::Column(col)) => self.check_column(step, &col, fallback_qualifier),
            Ok(Operand::Aggregate { column: Some(col), .. }) => {
                self.check_column(step, &col, None)
            }
            Ok(_) => {}
            Err(_) => self.check_raw_column(step, raw, fallback_qualifier),
        }
    }

    fn check_operand(&mut self, step: usize, operand: &Operand) {
        match operand {
            Operand::Column(col) => self.check_column(step, col, None),
            Operand::Aggregate { column: Some(col), .. } => self.check_column(step, col, None),
            _ => {}
        }
    }

    fn check_condition(&mut self, step: usize, cond: &Condition) {
        match cond {
            Condition::Compare { left, right, .. } => {
                self.check_operand(step, left);
                self.check_operand(step, right);
            }
            Condition::InResult { left, .. } => self.check_operand(step, left),
            Condition::IsNull { left, .. } => self.check_operand(step, left),
            Condition::And(a, b) | Condition::Or(a, b) => {
                self.check_condition(step, a);
                self.check_condition(step, b);
            }
        }
    }

    fn register_computed(&mut self, step: usize, name: &str) {
        let block_id = self.block_of(step).id;
        self.computed[block_id].insert(name.to_ascii_lowercase());
    }

    fn check_step(&mut self, step: usize, op: &EdlOperator) {
        match op {
            EdlOperator::ScanTable { table, .. } => self.check_table(step, table),
            EdlOperator::Subquery { table, select_column, .. } => {
                self.check_table(step, table);
                if let Some(col) = select_column {
                    if let Some(schema_table) = self.schema.table(table) {
                        if !schema_table.has_column(col) {
                            self.error(
                                step,
                                "unknown-column",
                                format!(
                                    "column [{col}] is not in table [{}]",
                                    schema_table.name
                                ),
                            );
                        }
                    }
                }
            }
            EdlOperator::Join { table, condition, .. } => {
                self.check_table(step, table);
                self.check_condition(step, condition);
            }
            EdlOperator::ReserveRows { condition, .. } => self.check_condition(step, condition),
            EdlOperator::GroupBy { columns, .. } => {
                for c in columns {
                    self.check_raw_column(step, c, None);
                }
            }
            EdlOperator::Having { condition, .. } => {
                let block = self.block_of(step);
                let plan_has_group = block
                    .steps
                    .iter()
                    .take_while(|&&s| s < step)
                    .any(|&s| self.grouped_at(s));
                if !plan_has_group {
                    self.error(
                        step,
                        "missing-group-by",
                        format!("step #{step} applies a Having clause, but its block has no Group By step"),
                    );
                }
                self.check_condition(step, condition);
            }
            EdlOperator::Sort { column, .. } => self.check_entry(step, column, None),
            EdlOperator::Limit { .. } | EdlOperator::SetOperation { .. } => {}
            EdlOperator::SelectColumn { columns, table_alias, .. } => {
                if let Some(q) = table_alias {
                    let block = self.block_of(step);
                    if self.qualifier_table(block, q).is_none() {
                        self.error(
                            step,
                            "unknown-table",
                            format!("[{q}] is not a table or alias in this step's block"),
                        );
                        for c in columns {
                            self.check_entry(step, c, None);
                        }
                        return;
                    }
                }
                for c in columns {
                    self.check_entry(step, c, table_alias.as_deref());
                }
            }
            EdlOperator::ArithmeticCalculation { output_column, operands, .. }
            | EdlOperator::DateCalculation { output_column, operands, .. } => {
                for o in operands {
                    self.check_operand(step, o);
                }
                self.register_computed(step, output_column);
            }
            EdlOperator::CaseStatement { output_column, condition, then_result, else_result } => {
                self.check_condition(step, condition);
                self.check_operand(step, then_result);
                self.check_operand(step, else_result);
                self.register_computed(step, output_column);
            }
            EdlOperator::SubstringExtraction { source_column, output_column, .. } => {
                self.check_raw_column(step, source_column, None);
                self.register_computed(step, output_column);
            }
            EdlOperator::Casting { column, new_type } => {
                self.check_raw_column(step, column, None);
                if !CAST_TYPES.iter().any(|t| t.eq_ignore_ascii_case(new_type)) {
                    self.error(
                        step,
                        "bad-cast-type",
                        format!(
                            "[{new_type}] is not a castable type (expected one of: {})",
                            CAST_TYPES.join(", ")
                        ),
                    );
                }
                // the cast shadows the column under its own name
                self.register_computed(step, &ColumnRef::from_dotted(column).name);
            }
            EdlOperator::Ranking { column, order_column, .. } => {
                self.check_raw_column(step, order_column, None);
                self.register_computed(step, column);
            }
        }
    }

    /// Whether the step at `index` groups its block.
    fn grouped_at(&self, index: usize) -> bool {
        self.group_steps.contains(&index)
    }
}
