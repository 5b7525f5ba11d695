//! Resolving constraints to concrete insertion sites in the SSA text.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::safety::check_expr_safety;
use super::{Category, Constraint, LineSet, Placement, Region};
use crate::ssa::SsaProgram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedCheck {
    pub constraint_id: String,
    pub category: Category,
    pub region: Region,
    pub placement: Placement,
    /// Original line the check is anchored at.
    pub site_line: usize,
    /// Original lines this check's score propagates to.
    pub attributed_lines: LineSet,
    pub expr: String,
    pub region_weight: f64,
}

impl GroundedCheck {
    /// Insertion point in the SSA text.
    pub fn site_byte_offset(&self) -> usize {
        self.placement.offset()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ungroundable {
    pub constraint_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub checks: Vec<GroundedCheck>,
    pub ungroundable: Vec<Ungroundable>,
}

/// Ground validated constraints against `ssa`. Checks come out in
/// constraint order, then site order.
pub fn ground(constraints: &[Constraint], ssa: &SsaProgram) -> Grounding {
    let mut out = Grounding::default();
    for c in constraints {
        match ground_one(c, ssa) {
            Ok(checks) => out.checks.extend(checks),
            Err(reason) => out.ungroundable.push(Ungroundable {
                constraint_id: c.id.clone(),
                reason,
            }),
        }
    }
    out
}

fn ground_one(c: &Constraint, ssa: &SsaProgram) -> Result<Vec<GroundedCheck>, String> {
    if let Err(v) = check_expr_safety(&c.expr, c.region, Some(&ssa.params)) {
        let detail: Vec<String> = v.iter().map(|v| format!("{} `{}`", v.reason, v.detail)).collect();
        return Err(format!("spec out of scope: {}", detail.join(", ")));
    }
    let check = |placement: Placement, site_line: usize, lines: LineSet| GroundedCheck {
        constraint_id: c.id.clone(),
        category: c.category,
        region: c.region,
        placement,
        site_line,
        attributed_lines: lines,
        expr: c.expr.clone(),
        region_weight: c.region.weight(),
    };
    let single = |line: usize| -> LineSet { BTreeSet::from([line]) };

    match c.region {
        Region::AfterDef => {
            let var = c.anchor.var.as_deref().unwrap_or_default();
            let def = ssa
                .def_entry(var)
                .ok_or_else(|| format!("no definition of `{var}`"))?;
            Ok(vec![check(
                Placement::Site(def.site.clone()),
                def.original_line,
                single(def.original_line),
            )])
        }
        Region::BeforeUse => {
            let var = c.anchor.var.as_deref().unwrap_or_default();
            let sites = ssa
                .uses
                .get(var)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| format!("no use of `{var}`"))?;
            Ok(sites
                .iter()
                .map(|u| check(Placement::Site(u.site.clone()), u.line, single(u.line)))
                .collect())
        }
        Region::LoopHead | Region::LoopTail => {
            let id = c.anchor.loop_id.unwrap_or_default();
            let info = ssa.loop_info(id).ok_or_else(|| format!("no loop with id {id}"))?;
            let site = if c.region == Region::LoopHead {
                info.head_site.clone()
            } else {
                info.tail_site.clone()
            };
            Ok(vec![check(Placement::Site(site), info.header_line, info.body_lines.clone())])
        }
        Region::Entry => Ok(vec![check(
            Placement::Site(ssa.entry_site.clone()),
            ssa.entry_line,
            single(ssa.entry_line),
        )]),
        Region::AnyReturn => {
            if ssa.returns.is_empty() {
                return Err("function has no return statement".into());
            }
            Ok(ssa
                .returns
                .iter()
                .map(|r| {
                    let mut lines = ssa.backward_slice(&r.reads);
                    lines.insert(r.line);
                    check(
                        Placement::Return { span: r.span.clone(), indent: r.indent.clone() },
                        r.line,
                        lines,
                    )
                })
                .collect())
        }
        Region::Line => {
            let line = c.anchor.line.unwrap_or_default();
            let site = ssa
                .line_sites
                .get(&line)
                .ok_or_else(|| format!("no statement at line {line}"))?;
            Ok(vec![check(Placement::Site(site.clone()), line, single(line))])
        }
        Region::AfterBranch => {
            let line = c.anchor.line.unwrap_or_default();
            let ending_here = ssa.merges.iter().filter(|m| m.end_line == line);
            let merge = ending_here
                .max_by_key(|m| m.start_line)
                .or_else(|| {
                    ssa.merges
                        .iter()
                        .filter(|m| m.start_line <= line && line <= m.end_line)
                        .max_by_key(|m| m.start_line)
                })
                .ok_or_else(|| format!("no conditional at line {line}"))?;
            Ok(vec![check(Placement::Site(merge.site.clone()), line, single(line))])
        }
    }
}
