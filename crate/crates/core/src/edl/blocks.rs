//! Block resolution: grouping plan steps into the SELECT-level units the
//! compiler lowers independently.
//!
//! A *block* is a linear chain of steps describing one SELECT statement.
//! `Scan Table` and `Subquery` open blocks; most operators extend the block
//! of their input step; `Set Operation` consumes two finished blocks and
//! opens its own. A block is *consumed* when another step uses its result —
//! either through a `result of #k` condition or as a set-operation operand —
//! after which it may not be extended further.
//!
//! `Join` needs care because plans write it two ways: either it extends the
//! previous block directly (adding a table to its FROM chain), or the joined
//! table was first introduced by its own one-step `Scan Table` block, in
//! which case the join *absorbs* that redundant block and attaches to the
//! block providing the other side of the join condition.

use std::collections::BTreeMap;

use super::{Condition, EdlOperator, EdlPlan};

/// How a block was opened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Opened by `Scan Table`.
    Scan,
    /// Opened by `Subquery`.
    Subquery,
    /// Opened by `Set Operation` (consumes two earlier blocks).
    SetOp,
}

/// One resolved block.
#[derive(Debug, Clone)]
pub struct Block {
    pub id: usize,
    pub kind: BlockKind,
    /// Step indices in chain order; the first is the opening step.
    pub steps: Vec<usize>,
    /// The step whose result another step may consume (always the last).
    pub leaf: usize,
    /// Step that consumed this block's result, if any.
    pub consumed_by: Option<usize>,
    /// Lower-cased alias → table name, from scan/subquery/join steps.
    pub aliases: BTreeMap<String, String>,
    /// Table names in FROM order (base table first, then joined tables).
    pub tables: Vec<String>,
}

impl Block {
    fn new(id: usize, kind: BlockKind, step: usize) -> Self {
        Block {
            id,
            kind,
            steps: vec![step],
            leaf: step,
            consumed_by: None,
            aliases: BTreeMap::new(),
            tables: Vec::new(),
        }
    }

    /// Whether `qualifier` names a table or alias visible in this block.
    pub fn claims(&self, qualifier: &str) -> bool {
        self.aliases.contains_key(&qualifier.to_ascii_lowercase())
            || self.tables.iter().any(|t| t.eq_ignore_ascii_case(qualifier))
    }

    fn push(&mut self, step: usize) {
        self.steps.push(step);
        self.leaf = step;
    }

    fn add_table(&mut self, table: &str, alias: Option<&str>) -> bool {
        let mut fresh = true;
        if let Some(a) = alias {
            fresh = self
                .aliases
                .insert(a.to_ascii_lowercase(), table.to_string())
                .is_none();
        }
        self.tables.push(table.to_string());
        fresh
    }
}

/// A structural problem found while resolving blocks. All issues are fatal
/// for compilation; the validator reports them as error diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolveIssue {
    pub step: usize,
    pub code: &'static str,
    pub message: String,
}

/// The resolved block structure of a plan.
#[derive(Debug, Clone)]
pub struct BlockInfo {
    pub blocks: Vec<Block>,
    /// Step index → id of the block it belongs to.
    pub block_of: BTreeMap<usize, usize>,
    pub issues: Vec<ResolveIssue>,
    /// Block holding the final step; its SELECT is the query result.
    pub main_block: usize,
}

impl BlockInfo {
    pub fn block(&self, id: usize) -> &Block {
        &self.blocks[id]
    }

    pub fn block_of_step(&self, step: usize) -> Option<&Block> {
        self.block_of.get(&step).map(|&id| &self.blocks[id])
    }

    /// Blocks never consumed and not the main block (dead branches).
    pub fn unused_blocks(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter(|b| b.consumed_by.is_none() && b.id != self.main_block)
            .map(|b| b.id)
            .collect()
    }
}

struct Resolver {
    blocks: Vec<Block>,
    block_of: BTreeMap<usize, usize>,
    issues: Vec<ResolveIssue>,
}

impl Resolver {
    fn issue(&mut self, step: usize, code: &'static str, message: String) {
        self.issues.push(ResolveIssue { step, code, message });
    }

    fn open(&mut self, kind: BlockKind, step: usize) -> usize {
        let id = self.blocks.len();
        self.blocks.push(Block::new(id, kind, step));
        self.block_of.insert(step, id);
        id
    }

    /// Append `step` to `block`, reporting consumption and set-op misuse.
    fn extend(&mut self, block: usize, step: usize, op: &EdlOperator) {
        if let Some(by) = self.blocks[block].consumed_by {
            self.issue(
                step,
                "extends-consumed-block",
                format!(
                    "step #{step} extends step #{}, but that result was already used by step #{by}",
                    self.blocks[block].leaf
                ),
            );
        }
        if self.blocks[block].kind == BlockKind::SetOp
            && !matches!(op, EdlOperator::Sort { .. } | EdlOperator::Limit { .. })
        {
            self.issue(
                step,
                "extends-set-operation",
                format!("only Sort or Limit may follow a set operation, not {}", op.name()),
            );
        }
        self.blocks[block].push(step);
        self.block_of.insert(step, block);
    }

    /// Mark `block` as consumed by `step` (idempotent within one step).
    fn consume(&mut self, block: usize, step: usize, what: &str) {
        match self.blocks[block].consumed_by {
            Some(by) if by != step => self.issue(
                step,
                "invalid-subquery-ref",
                format!("{what} was already used by step #{by} and cannot be used again"),
            ),
            _ => self.blocks[block].consumed_by = Some(step),
        }
    }

    /// Consume the block whose leaf is `referenced`; the reference must point
    /// at a block's final step, not the middle of a chain.
    fn consume_result(&mut self, referenced: usize, step: usize, own_block: usize) {
        let Some(&target) = self.block_of.get(&referenced) else {
            // parse-level dangling references never get here
            return;
        };
        if target == own_block {
            self.issue(
                step,
                "self-subquery",
                format!("step #{step} uses the result of #{referenced} from its own block"),
            );
            return;
        }
        if self.blocks[target].leaf != referenced {
            self.issue(
                step,
                "invalid-subquery-ref",
                format!(
                    "#{referenced} is not the final step of its block; the block continues to #{}",
                    self.blocks[target].leaf
                ),
            );
            return;
        }
        self.consume(target, step, &format!("the result of #{referenced}"));
    }

    fn consume_condition_refs(&mut self, cond: &Condition, step: usize, own_block: usize) {
        for referenced in cond.step_refs() {
            self.consume_result(referenced, step, own_block);
        }
    }

    /// The most recent unconsumed one-step Scan block introducing the same
    /// table (and alias, when both sides name one) as a join.
    fn absorb_candidate(&self, table: &str, alias: Option<&str>) -> Option<usize> {
        self.blocks.iter().rev().find_map(|b| {
            if b.consumed_by.is_some() || b.kind != BlockKind::Scan || b.steps.len() != 1 {
                return None;
            }
            let scan_table = b.tables.first()?;
            if !scan_table.eq_ignore_ascii_case(table) {
                return None;
            }
            let scan_alias = b.aliases.keys().next();
            match (scan_alias, alias) {
                (Some(sa), Some(ja)) if !sa.eq_ignore_ascii_case(ja) => None,
                (Some(_), None) | (None, Some(_)) => None,
                _ => Some(b.id),
            }
        })
    }

    /// Host for an absorbing join: the block owning the first condition
    /// qualifier that is not the joined table itself, else the most recent
    /// live block other than the absorbed one.
    fn join_host(
        &self,
        condition: &Condition,
        table: &str,
        alias: Option<&str>,
        absorbed: usize,
    ) -> Option<usize> {
        let own = |q: &str| {
            q.eq_ignore_ascii_case(table) || alias.is_some_and(|a| q.eq_ignore_ascii_case(a))
        };
        for col in condition.column_refs() {
            let Some(q) = &col.qualifier else { continue };
            if own(q) {
                continue;
            }
            if let Some(host) = self
                .blocks
                .iter()
                .rev()
                .find(|b| b.id != absorbed && b.consumed_by.is_none() && b.claims(q))
            {
                return Some(host.id);
            }
        }
        self.blocks
            .iter()
            .rev()
            .find(|b| b.id != absorbed && b.consumed_by.is_none())
            .map(|b| b.id)
    }

    fn resolve_join(
        &mut self,
        step: usize,
        prev_block: usize,
        table: &str,
        alias: Option<&str>,
        condition: &Condition,
    ) -> usize {
        let target = match self.absorb_candidate(table, alias) {
            Some(absorbed) => match self.join_host(condition, table, alias, absorbed) {
                Some(host) => {
                    self.consume(absorbed, step, &format!("the scanned [{table}] table"));
                    host
                }
                // the matching scan is the only live block: a plain self-join
                None => prev_block,
            },
            None => prev_block,
        };
        // qualifiers pointing into some *other* live block mean the join
        // attached to the wrong place — the plan shape is ambiguous
        for col in condition.column_refs() {
            let Some(q) = &col.qualifier else { continue };
            if q.eq_ignore_ascii_case(table)
                || alias.is_some_and(|a| q.eq_ignore_ascii_case(a))
                || self.blocks[target].claims(q)
            {
                continue;
            }
            if let Some(other) = self
                .blocks
                .iter()
                .find(|b| b.id != target && b.consumed_by.is_none() && b.claims(q))
            {
                self.issue(
                    step,
                    "join-host",
                    format!(
                        "join condition references {q} from the block of step #{}, which this join does not extend",
                        other.leaf
                    ),
                );
            }
        }
        target
    }
}

/// Group a plan's steps into blocks. Always returns a full structure; any
/// shape problems are reported in `issues` rather than aborting.
pub fn resolve_blocks(plan: &EdlPlan) -> BlockInfo {
    let mut r = Resolver { blocks: Vec::new(), block_of: BTreeMap::new(), issues: Vec::new() };

    for step in &plan.steps {
        let i = step.index;
        match &step.op {
            EdlOperator::ScanTable { table, alias } => {
                let id = r.open(BlockKind::Scan, i);
                r.blocks[id].add_table(table, alias.as_deref());
            }
            EdlOperator::Subquery { table, alias, .. } => {
                let id = r.open(BlockKind::Subquery, i);
                r.blocks[id].add_table(table, alias.as_deref());
            }
            EdlOperator::Join { table, alias, condition } => {
                let prev = r.block_of[&(i - 1)];
                let target = r.resolve_join(i, prev, table, alias.as_deref(), condition);
                r.consume_condition_refs(condition, i, target);
                r.extend(target, i, &step.op);
                if !r.blocks[target].add_table(table, alias.as_deref()) {
                    let alias_text = alias.as_deref().unwrap_or(table);
                    r.issue(
                        i,
                        "alias-redefined",
                        format!("alias {alias_text} is already bound in this block"),
                    );
                }
            }
            EdlOperator::SetOperation { left_query, right_query, .. } => {
                for &operand in [left_query, right_query].iter() {
                    let own = r.blocks.len(); // not yet opened; no self-ref possible
                    r.consume_result(*operand, i, own);
                }
                if r.block_of.get(left_query) == r.block_of.get(right_query) {
                    r.issue(
                        i,
                        "invalid-subquery-ref",
                        format!(
                            "set operation needs two distinct blocks, but #{left_query} and #{right_query} are in the same one"
                        ),
                    );
                }
                r.open(BlockKind::SetOp, i);
            }
            op => {
                // explicit-input operators extend the block of their input;
                // computed columns extend the block of the previous step
                let target = if let Some(input) = op.explicit_input() {
                    let b = r.block_of[&input];
                    if r.blocks[b].leaf != input {
                        r.issue(
                            i,
                            "branching-step",
                            format!(
                                "step #{i} takes #{input} as input, but that block already continued to #{}",
                                r.blocks[b].leaf
                            ),
                        );
                    }
                    b
                } else {
                    r.block_of[&(i - 1)]
                };
                if let Some(cond) = op.condition() {
                    r.consume_condition_refs(cond, i, target);
                }
                r.extend(target, i, op);
            }
        }
    }

    let main_block = r.block_of[&plan.root];
    BlockInfo { blocks: r.blocks, block_of: r.block_of, issues: r.issues, main_block }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_edl;
    use super::*;

    fn resolve(text: &str) -> BlockInfo {
        resolve_blocks(&parse_edl(text).unwrap())
    }

    const EXAMPLE_PLAN: &str = "\
#1.Scan Table: Retrieve all rows from the [Student] table.
#2.Subquery: Retrieve all rows from the [Has_Pet] table aliased as T1.
#3.Join the [Pets] table aliased as T2 on the condition that T1.PetID equals T2.PetID.
#4. Reserve rows of #3 where the [PetType] in table T2 is 'cat'.
#5. Select the [StuID] column from the [T1] table from the result of #4.
#6. Reserve rows of #1 where [StuID] is not in the result of #5.
#7. Select the [major] and [age] columns from the [Student] table from the result of #6.";

    #[test]
    fn worked_example_blocks() {
        let info = resolve(EXAMPLE_PLAN);
        assert!(info.issues.is_empty(), "{:?}", info.issues);
        assert_eq!(info.blocks.len(), 2);
        let main = info.block(info.main_block);
        assert_eq!(main.steps, vec![1, 6, 7]);
        assert_eq!(main.kind, BlockKind::Scan);
        assert_eq!(main.consumed_by, None);
        let sub = info.block_of_step(2).unwrap();
        assert_eq!(sub.steps, vec![2, 3, 4, 5]);
        assert_eq!(sub.kind, BlockKind::Subquery);
        assert_eq!(sub.consumed_by, Some(6));
        assert!(sub.claims("T1") && sub.claims("t2") && sub.claims("Pets"));
        assert!(info.unused_blocks().is_empty());
    }

    #[test]
    fn join_absorbs_matching_lone_scan() {
        // the joined table was introduced by its own scan step first
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [stadium] table aliased as T1.
#2. Scan Table: Retrieve all rows from the [concert] table aliased as T2.
#3. Join the [concert] table aliased as T2 on the condition that T1.Stadium_ID equals T2.Stadium_ID.
#4. Group #3 by the [T1.Stadium_ID] column.
#5. Select the [T1.Name] column and count(*) from the result of #4.",
        );
        assert!(info.issues.is_empty(), "{:?}", info.issues);
        assert_eq!(info.blocks.len(), 2);
        let host = info.block_of_step(3).unwrap();
        assert_eq!(host.steps, vec![1, 3, 4, 5]);
        assert_eq!(host.id, info.main_block);
        let absorbed = info.block_of_step(2).unwrap();
        assert_eq!(absorbed.steps, vec![2]);
        assert_eq!(absorbed.consumed_by, Some(3));
        assert!(info.unused_blocks().is_empty());
    }

    #[test]
    fn join_without_matching_scan_extends_previous_block() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [orders] table aliased as T1.
#2. Join the [customers] table aliased as T2 on the condition that T1.cust_id equals T2.id.
#3. Select the [T2.name] column in #2.",
        );
        assert!(info.issues.is_empty(), "{:?}", info.issues);
        assert_eq!(info.blocks.len(), 1);
        assert_eq!(info.block(0).steps, vec![1, 2, 3]);
        assert_eq!(info.block(0).tables, vec!["orders".to_string(), "customers".to_string()]);
    }

    #[test]
    fn self_join_keeps_both_tables_in_one_block() {
        // same table joined under a different alias: nothing to absorb
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [employee] table aliased as T1.
#2. Join the [employee] table aliased as T2 on the condition that T1.manager_id equals T2.id.
#3. Select the [T2.name] column in #2.",
        );
        assert!(info.issues.is_empty(), "{:?}", info.issues);
        assert_eq!(info.blocks.len(), 1);
        assert_eq!(info.block(0).tables.len(), 2);
    }

    #[test]
    fn branching_reported_when_block_already_continued() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [t] table.
#2. Select the [a] column in #1.
#3. Select the [b] column in #1.",
        );
        assert_eq!(info.issues.len(), 1);
        assert_eq!(info.issues[0].code, "branching-step");
        assert_eq!(info.issues[0].step, 3);
    }

    #[test]
    fn consumed_block_cannot_be_extended() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [a] table.
#2. Subquery: Retrieve all rows from the [b] table.
#3. Select the [x] column in #2.
#4. Reserve rows of #1 where [x] is in the result of #3.
#5. Select the [y] column in #3.",
        );
        assert!(
            info.issues.iter().any(|i| i.code == "extends-consumed-block" && i.step == 5),
            "{:?}",
            info.issues
        );
    }

    #[test]
    fn self_subquery_reported() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [t] table.
#2. Select the [a] column in #1.
#3. Reserve rows of #2 where [a] is in the result of #2.",
        );
        assert!(
            info.issues.iter().any(|i| i.code == "self-subquery" && i.step == 3),
            "{:?}",
            info.issues
        );
    }

    #[test]
    fn mid_block_reference_reported() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [a] table.
#2. Subquery: Retrieve all rows from the [b] table.
#3. Reserve rows of #2 where [x] equals 1.
#4. Select the [x] column in #3.
#5. Reserve rows of #1 where [x] is in the result of #3.",
        );
        // #3 is not block 2's leaf (the chain continued to #4)
        assert!(
            info.issues.iter().any(|i| i.code == "invalid-subquery-ref" && i.step == 5),
            "{:?}",
            info.issues
        );
    }

    #[test]
    fn set_operation_consumes_both_sides() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [a] table.
#2. Select the [x] column in #1.
#3. Scan Table: Retrieve all rows from the [b] table.
#4. Select the [x] column in #3.
#5. Apply except operation: Exclude the results in #4 from the results in #2.
#6. Order #5 by the [x] column in ascending order.
#7. Limit #6 to the top 10 record(s).",
        );
        assert!(info.issues.is_empty(), "{:?}", info.issues);
        assert_eq!(info.blocks.len(), 3);
        assert_eq!(info.block_of_step(2).unwrap().consumed_by, Some(5));
        assert_eq!(info.block_of_step(4).unwrap().consumed_by, Some(5));
        let setop = info.block_of_step(5).unwrap();
        assert_eq!(setop.kind, BlockKind::SetOp);
        assert_eq!(setop.steps, vec![5, 6, 7]);
        assert_eq!(info.main_block, setop.id);
    }

    #[test]
    fn select_after_set_operation_reported() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [a] table.
#2. Select the [x] column in #1.
#3. Scan Table: Retrieve all rows from the [b] table.
#4. Select the [x] column in #3.
#5. Apply union operation: Include the results in #4 in the results in #2.
#6. Select the [x] column in #5.",
        );
        assert!(
            info.issues.iter().any(|i| i.code == "extends-set-operation" && i.step == 6),
            "{:?}",
            info.issues
        );
    }

    #[test]
    fn unused_branch_detected() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [a] table.
#2. Scan Table: Retrieve all rows from the [b] table.
#3. Select the [x] column in #2.",
        );
        assert!(info.issues.is_empty(), "{:?}", info.issues);
        assert_eq!(info.unused_blocks(), vec![0]);
    }

    #[test]
    fn double_consumption_reported() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [a] table.
#2. Subquery: Retrieve all rows from the [b] table.
#3. Select the [x] column in #2.
#4. Reserve rows of #1 where [p] is in the result of #3.
#5. Reserve rows of #4 where [q] is in the result of #3.",
        );
        assert!(
            info.issues.iter().any(|i| i.code == "invalid-subquery-ref" && i.step == 5),
            "{:?}",
            info.issues
        );
    }

    #[test]
    fn alias_collision_on_join_reported() {
        let info = resolve(
            "\
#1. Scan Table: Retrieve all rows from the [a] table aliased as T1.
#2. Join the [b] table aliased as T1 on the condition that T1.x equals T1.y.
#3. Select the [T1.x] column in #2.",
        );
        assert!(
            info.issues.iter().any(|i| i.code == "alias-redefined" && i.step == 2),
            "{:?}",
            info.issues
        );
    }
}
