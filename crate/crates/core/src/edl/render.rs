//! Canonical EDL rendering. `render_edl` emits one "#n. …" line per step in
//! the exact template wording the parser accepts, so
//! `parse_edl(render_edl(plan)) == plan` for any structurally valid plan.

use std::fmt::Write as _;

use super::expr::{render_condition, render_operand};
use super::{EdlOperator, EdlPlan, SortOrder};

/// Render a plan back to EDL text (no trailing newline).
pub fn render_edl(plan: &EdlPlan) -> String {
    let mut out = String::new();
    for step in &plan.steps {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "#{}. {}", step.index, render_step(&step.op));
    }
    out
}

fn render_columns(columns: &[String]) -> String {
    match columns.len() {
        0 => String::new(),
        1 => format!("[{}]", columns[0]),
        _ => {
            let head = columns[..columns.len() - 1]
                .iter()
                .map(|c| format!("[{c}]"))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{head} and [{}]", columns[columns.len() - 1])
        }
    }
}

fn render_step(op: &EdlOperator) -> String {
    match op {
        EdlOperator::ScanTable { table, alias } => match alias {
            Some(a) => format!("Scan Table: Retrieve all rows from the [{table}] table aliased as {a}."),
            None => format!("Scan Table: Retrieve all rows from the [{table}] table."),
        },
        EdlOperator::Subquery { table, alias, select_column } => {
            let mut s = format!("Subquery: Retrieve all rows from the [{table}] table");
            if let Some(a) = alias {
                let _ = write!(s, " aliased as {a}");
            }
            if let Some(col) = select_column {
                let _ = write!(s, " in a subquery and select the [{col}] column");
            }
            s.push('.');
            s
        }
        EdlOperator::Join { table, alias, condition } => match alias {
            Some(a) => format!(
                "Join the [{table}] table aliased as {a} on the condition that {}.",
                render_condition(condition)
            ),
            None => format!(
                "Join the [{table}] table on the condition that {}.",
                render_condition(condition)
            ),
        },
        EdlOperator::ReserveRows { input_step, condition } => {
            format!("Reserve rows of #{input_step} where {}.", render_condition(condition))
        }
        EdlOperator::GroupBy { input_step, columns } => {
            let noun = if columns.len() == 1 { "column" } else { "columns" };
            format!("Group #{input_step} by the {} {noun}.", render_columns(columns))
        }
        EdlOperator::Having { input_step, condition } => format!(
            "Apply Having Clause: Reserve the grouped rows of #{input_step} where {}.",
            render_condition(condition)
        ),
        EdlOperator::Sort { input_step, column, order } => format!(
            "Order #{input_step} by the [{column}] column in {} order.",
            order.edl_word()
        ),
        EdlOperator::Limit { input_step, count } => {
            format!("Limit #{input_step} to the top {count} record(s).")
        }
        EdlOperator::SelectColumn { input_step, columns, table_alias } => {
            let noun = if columns.len() == 1 { "column" } else { "columns" };
            match table_alias {
                Some(t) => format!(
                    "Select the {} {noun} from the [{t}] table from the result of #{input_step}.",
                    render_columns(columns)
                ),
                None => format!(
                    "Select the {} {noun} from the result of #{input_step}.",
                    render_columns(columns)
                ),
            }
        }
        EdlOperator::SetOperation { kind, left_query, right_query } => {
            let (verb, joiner) = match kind {
                super::SetOpKind::Except => ("Exclude", "from"),
                _ => ("Include", "in"),
            };
            format!(
                "Apply {} operation: {verb} the results in #{right_query} {joiner} the results in #{left_query}.",
                kind.edl_word()
            )
        }
        EdlOperator::ArithmeticCalculation { output_column, operation, operands } => format!(
            "Compute [{output_column}] as the {} of {}.",
            operation.edl_word(),
            render_operand_list(operands)
        ),
        EdlOperator::DateCalculation { output_column, operation, operands } => format!(
            "Compute [{output_column}] as the {} of {}.",
            operation.edl_word(),
            render_operand_list(operands)
        ),
        EdlOperator::CaseStatement { output_column, condition, then_result, else_result } => format!(
            "Compute [{output_column}] as a case statement where {}, then {}, else {}.",
            render_condition(condition),
            render_operand(then_result),
            render_operand(else_result)
        ),
        EdlOperator::SubstringExtraction { source_column, start, length, output_column } => format!(
            "Extract substring from [{source_column}] starting at position {start} for {length} characters as [{output_column}]."
        ),
        EdlOperator::Casting { column, new_type } => format!("Cast [{column}] as [{new_type}]."),
        EdlOperator::Ranking { column, order_column, order } => format!(
            "Compute the rank of [{column}] ordered by [{order_column}] in {} order using the RANK( ) window function.",
            order.edl_word()
        ),
    }
}

fn render_operand_list(operands: &[super::Operand]) -> String {
    match operands.len() {
        0 => String::new(),
        1 => render_operand(&operands[0]),
        _ => {
            let head = operands[..operands.len() - 1]
                .iter()
                .map(render_operand)
                .collect::<Vec<_>>()
                .join(", ");
            format!("{head} and {}", render_operand(&operands[operands.len() - 1]))
        }
    }
}

#[allow(dead_code)]
fn order_word(order: SortOrder) -> &'static str {
    order.edl_word()
}
