//! The execution description language (EDL): a step-numbered, prose-shaped
//! intermediate representation of a SQL execution plan. Each step is one
//! line ("#3. Join the [Pets] table aliased as T2 on the condition that …")
//! naming one of sixteen operators; steps reference earlier steps only, so a
//! plan is a DAG whose leaves are table scans and whose last step is the
//! query result.

mod blocks;
mod expr;
mod parse;
mod render;
mod validate;

pub use blocks::{resolve_blocks, Block, BlockInfo, BlockKind, ResolveIssue};
pub use expr::{
    parse_condition, parse_operand, parse_step_ref, render_condition, render_operand, AggFunc,
    ColumnRef, CompareOp, Condition, Operand,
};
pub use parse::parse_edl;
pub use render::render_edl;
pub use validate::validate_plan;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SortOrder {
    Ascending,
    Descending,
}

impl SortOrder {
    pub fn edl_word(self) -> &'static str {
        match self {
            SortOrder::Ascending => "ascending",
            SortOrder::Descending => "descending",
        }
    }

    pub fn sql_word(self) -> &'static str {
        match self {
            SortOrder::Ascending => "ASC",
            SortOrder::Descending => "DESC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetOpKind {
    Union,
    Intersect,
    Except,
}

impl SetOpKind {
    pub fn edl_word(self) -> &'static str {
        match self {
            SetOpKind::Union => "union",
            SetOpKind::Intersect => "intersect",
            SetOpKind::Except => "except",
        }
    }

    pub fn sql_word(self) -> &'static str {
        match self {
            SetOpKind::Union => "UNION",
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithOp {
    Sum,
    Difference,
    Product,
    Quotient,
}

impl ArithOp {
    pub fn edl_word(self) -> &'static str {
        match self {
            ArithOp::Sum => "sum",
            ArithOp::Difference => "difference",
            ArithOp::Product => "product",
            ArithOp::Quotient => "quotient",
        }
    }

    pub fn sql_symbol(self) -> &'static str {
        match self {
            ArithOp::Sum => "+",
            ArithOp::Difference => "-",
            ArithOp::Product => "*",
            ArithOp::Quotient => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DateOp {
    Year,
    Month,
    Day,
    DayDifference,
}

impl DateOp {
    pub fn edl_word(self) -> &'static str {
        match self {
            DateOp::Year => "year",
            DateOp::Month => "month",
            DateOp::Day => "day",
            DateOp::DayDifference => "day difference",
        }
    }
}

/// One of the sixteen plan operators. Bracketed template slots become the
/// string fields; "#n" slots become step indexes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdlOperator {
    ScanTable {
        table: String,
        alias: Option<String>,
    },
    Join {
        table: String,
        alias: Option<String>,
        condition: Condition,
    },
    ReserveRows {
        input_step: usize,
        condition: Condition,
    },
    /// Opens a nested query block; subsequent steps chained onto it belong
    /// to the subquery until an outer step consumes its result.
    Subquery {
        table: String,
        alias: Option<String>,
        select_column: Option<String>,
    },
    GroupBy {
        input_step: usize,
        columns: Vec<String>,
    },
    Having {
        input_step: usize,
        condition: Condition,
    },
    Sort {
        input_step: usize,
        column: String,
        order: SortOrder,
    },
    Limit {
        input_step: usize,
        count: u64,
    },
    SelectColumn {
        input_step: usize,
        columns: Vec<String>,
        table_alias: Option<String>,
    },
    /// Combines two completed query blocks, referenced by their root steps.
    SetOperation {
        kind: SetOpKind,
        left_query: usize,
        right_query: usize,
    },
    ArithmeticCalculation {
        output_column: String,
        operation: ArithOp,
        operands: Vec<Operand>,
    },
    DateCalculation {
        output_column: String,
        operation: DateOp,
        operands: Vec<Operand>,
    },
    CaseStatement {
        output_column: String,
        condition: Condition,
        then_result: Operand,
        else_result: Operand,
    },
    SubstringExtraction {
        source_column: String,
        start: u64,
        length: u64,
        output_column: String,
    },
    Casting {
        column: String,
        new_type: String,
    },
    /// Window-function rank; the first slot names the output column.
    Ranking {
        column: String,
        order_column: String,
        order: SortOrder,
    },
}

impl EdlOperator {
    pub fn name(&self) -> &'static str {
        match self {
            EdlOperator::ScanTable { .. } => "Scan Table",
            EdlOperator::Join { .. } => "Join",
            EdlOperator::ReserveRows { .. } => "Reserve Rows",
            EdlOperator::Subquery { .. } => "Subquery",
            EdlOperator::GroupBy { .. } => "Group By",
            EdlOperator::Having { .. } => "Having Clause",
            EdlOperator::Sort { .. } => "Sort",
            EdlOperator::Limit { .. } => "Limit",
            EdlOperator::SelectColumn { .. } => "Select Column",
            EdlOperator::SetOperation { .. } => "Set Operation",
            EdlOperator::ArithmeticCalculation { .. } => "Arithmetic Calculation",
            EdlOperator::DateCalculation { .. } => "Date Calculation",
            EdlOperator::CaseStatement { .. } => "Case Statement",
            EdlOperator::SubstringExtraction { .. } => "Substring Extraction",
            EdlOperator::Casting { .. } => "Casting",
            EdlOperator::Ranking { .. } => "Ranking",
        }
    }

    /// The step this operator explicitly takes its rows from, when the
    /// template has a "#n" input slot.
    pub fn explicit_input(&self) -> Option<usize> {
        match self {
            EdlOperator::ReserveRows { input_step, .. }
            | EdlOperator::GroupBy { input_step, .. }
            | EdlOperator::Having { input_step, .. }
            | EdlOperator::Sort { input_step, .. }
            | EdlOperator::Limit { input_step, .. }
            | EdlOperator::SelectColumn { input_step, .. } => Some(*input_step),
            _ => None,
        }
    }

    /// Join and the computed-column operators extend whatever the previous
    /// step produced, without naming it.
    pub fn has_implicit_input(&self) -> bool {
        matches!(
            self,
            EdlOperator::Join { .. }
                | EdlOperator::ArithmeticCalculation { .. }
                | EdlOperator::DateCalculation { .. }
                | EdlOperator::CaseStatement { .. }
                | EdlOperator::SubstringExtraction { .. }
                | EdlOperator::Casting { .. }
                | EdlOperator::Ranking { .. }
        )
    }

    pub fn condition(&self) -> Option<&Condition> {
        match self {
            EdlOperator::Join { condition, .. }
            | EdlOperator::ReserveRows { condition, .. }
            | EdlOperator::Having { condition, .. }
            | EdlOperator::CaseStatement { condition, .. } => Some(condition),
            _ => None,
        }
    }

    /// Name this operator binds as a computed output column, if any.
    pub fn output_column(&self) -> Option<&str> {
        match self {
            EdlOperator::ArithmeticCalculation { output_column, .. }
            | EdlOperator::DateCalculation { output_column, .. }
            | EdlOperator::CaseStatement { output_column, .. }
            | EdlOperator::SubstringExtraction { output_column, .. }
            | EdlOperator::Ranking { column: output_column, .. } => Some(output_column),
            EdlOperator::Casting { column, .. } => Some(column),
            _ => None,
        }
    }
}

/// One numbered plan step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdlStep {
    /// The "#n" number; 1-based and contiguous within a plan.
    pub index: usize,
    pub op: EdlOperator,
    /// Earlier steps this one depends on: the explicit or implicit input,
    /// step references inside conditions, and set-operation operands.
    pub refs: BTreeSet<usize>,
}

/// A parsed plan. `root` is always the last step's index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdlPlan {
    pub steps: Vec<EdlStep>,
    pub root: usize,
}

impl EdlPlan {
    pub fn step(&self, index: usize) -> Option<&EdlStep> {
        self.steps.get(index.checked_sub(1)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

/// A validation or compilation finding, tied to one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub step_index: usize,
    pub severity: Severity,
    /// Stable machine-readable identifier ("unknown-table", "missing-group-by", …).
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(step_index: usize, code: &str, message: impl Into<String>) -> Self {
        Self { step_index, severity: Severity::Error, code: code.into(), message: message.into() }
    }

    pub fn warning(step_index: usize, code: &str, message: impl Into<String>) -> Self {
        Self { step_index, severity: Severity::Warning, code: code.into(), message: message.into() }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "step #{} {} [{}]: {}", self.step_index, sev, self.code, self.message)
    }
}

/// True when any diagnostic in the list blocks compilation.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
