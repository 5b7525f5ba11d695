//! Site and def-use analysis over the rewritten SSA text.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use tree_sitter::Node;

use super::scope::{assignment_parts, visit_reads};
use super::transform::PendingDef;
use super::{
    find_function, BranchMerge, CheckSite, DefEntry, DefKind, LoopInfo, ReturnSite, SiteMode,
    SourceUnit, SsaError, SsaProgram, UseSite,
};
use crate::python::{self, LineIndex};

const LOOP_MARKER: &str = "# loop__id: ";

struct Ctx<'s> {
    src: &'s str,
    idx: LineIndex,
    origins: Vec<Option<usize>>,
    known: HashSet<String>,
}

impl Ctx<'_> {
    /// Original line of a statement, `None` when the pass inserted it.
    fn origin(&self, node: Node<'_>) -> Option<usize> {
        self.origins.get(node.start_byte()).copied().flatten()
    }

    fn before(&self, node: Node<'_>) -> CheckSite {
        CheckSite {
            offset: self.idx.line_start(self.idx.line_of(node.start_byte())),
            indent: python::indent_at(self.src, &self.idx, node.start_byte()),
            mode: SiteMode::Before,
        }
    }

    fn after(&self, node: Node<'_>) -> CheckSite {
        CheckSite {
            offset: self.idx.line_end(self.idx.line_of(node.end_byte() - 1)),
            indent: python::indent_at(self.src, &self.idx, node.start_byte()),
            mode: SiteMode::After,
        }
    }

    fn reads_into(&self, node: Node<'_>, out: &mut BTreeSet<String>) -> Result<(), SsaError> {
        visit_reads(node, self.src, &mut Vec::new(), &mut |n| {
            let name = python::text(n, self.src);
            if self.known.contains(name) {
                out.insert(name.to_string());
            }
            Ok(())
        })
    }

    fn target_reads(&self, node: Node<'_>, out: &mut BTreeSet<String>) -> Result<(), SsaError> {
        match node.kind() {
            "identifier" => Ok(()),
            "attribute" => match node.child_by_field_name("object") {
                Some(o) => self.reads_into(o, out),
                None => Ok(()),
            },
            "subscript" => self.reads_into(node, out),
            _ => {
                for c in python::named_children(node) {
                    self.target_reads(c, out)?;
                }
                Ok(())
            }
        }
    }

    /// Names a statement reads before control enters any nested block.
    fn statement_reads(&self, stmt: Node<'_>) -> Result<BTreeSet<String>, SsaError> {
        let mut out = BTreeSet::new();
        match stmt.kind() {
            "expression_statement" => {
                for child in python::named_children(stmt) {
                    match child.kind() {
                        "assignment" => {
                            let (targets, value) = assignment_parts(child);
                            if let Some(v) = value {
                                self.reads_into(v, &mut out)?;
                            }
                            for t in targets {
                                self.target_reads(t, &mut out)?;
                            }
                        }
                        "augmented_assignment" => self.reads_into(child, &mut out)?,
                        _ => self.reads_into(child, &mut out)?,
                    }
                }
            }
            "if_statement" => {
                for clause in python::if_clauses(stmt) {
                    if let Some(c) = clause.condition {
                        self.reads_into(c, &mut out)?;
                    }
                }
            }
            "for_statement" => {
                if let Some(r) = stmt.child_by_field_name("right") {
                    self.reads_into(r, &mut out)?;
                }
            }
            "while_statement" => {
                if let Some(c) = stmt.child_by_field_name("condition") {
                    self.reads_into(c, &mut out)?;
                }
            }
            _ => {
                for c in python::named_children(stmt) {
                    self.reads_into(c, &mut out)?;
                }
            }
        }
        Ok(out)
    }
}

/// Blocks nested directly under a compound statement, in textual order.
fn child_blocks(stmt: Node<'_>) -> Vec<Node<'_>> {
    match stmt.kind() {
        "if_statement" => python::if_clauses(stmt).into_iter().map(|c| c.body).collect(),
        "for_statement" | "while_statement" => stmt.child_by_field_name("body").into_iter().collect(),
        _ => Vec::new(),
    }
}

fn collect_statements<'t>(block: Node<'t>, out: &mut Vec<Node<'t>>) {
    for stmt in python::statements(block) {
        out.push(stmt);
        for b in child_blocks(stmt) {
            collect_statements(b, out);
        }
    }
}

fn is_docstring(stmt: Node<'_>) -> bool {
    stmt.kind() == "expression_statement"
        && stmt.named_child_count() == 1
        && matches!(
            stmt.named_child(0).map(|c| c.kind()),
            Some("string" | "concatenated_string")
        )
}

/// Names bound by a definition statement as SSA identifiers.
fn defined_names(stmt: Node<'_>, src: &str) -> Vec<String> {
    fn walk(node: Node<'_>, src: &str, out: &mut Vec<String>) {
        match node.kind() {
            "identifier" => out.push(python::text(node, src).to_string()),
            "attribute" | "subscript" => {}
            _ => {
                for c in python::named_children(node) {
                    walk(c, src, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    match stmt.kind() {
        "expression_statement" => {
            for child in python::named_children(stmt) {
                if child.kind() == "assignment" {
                    let (targets, value) = assignment_parts(child);
                    if value.is_some() {
                        for t in targets {
                            walk(t, src, &mut out);
                        }
                    }
                }
            }
        }
        "for_statement" => {
            if let Some(left) = stmt.child_by_field_name("left") {
                walk(left, src, &mut out);
            }
        }
        _ => {}
    }
    out
}

pub(super) fn analyze(
    unit: &SourceUnit,
    ssa_text: String,
    origins: Vec<Option<usize>>,
    function_range: std::ops::Range<usize>,
    params: Vec<String>,
    defs: Vec<PendingDef>,
) -> Result<SsaProgram, SsaError> {
    let tree = python::parse(&ssa_text);
    let root = tree.root_node();
    if let Some(err) = python::first_error(root) {
        return Err(SsaError::Parse {
            path: format!("{} (ssa form)", unit.path.display()),
            line: err.start_position().row + 1,
        });
    }
    let range = find_function(root, &ssa_text, &unit.function_name).ok_or_else(|| {
        SsaError::FunctionNotFound {
            path: format!("{} (ssa form)", unit.path.display()),
            name: unit.function_name.clone(),
        }
    })?;
    debug_assert_eq!(range, function_range);
    let func = root
        .descendant_for_byte_range(range.start, range.end)
        .filter(|n| n.kind() == "function_definition")
        .expect("function located above");
    let body = func.child_by_field_name("body").expect("function body");

    let mut known: HashSet<String> = params.iter().cloned().collect();
    known.extend(defs.iter().map(|d| format!("{}__{}", d.base, d.version)));
    let ctx = Ctx {
        src: &ssa_text,
        idx: LineIndex::new(&ssa_text),
        origins,
        known,
    };

    let line_origins: Vec<Option<usize>> = (1..=ctx.idx.line_count())
        .map(|l| {
            let start = ctx.idx.line_start(l);
            let end = ctx.idx.line_end(l);
            ssa_text[start..end]
                .char_indices()
                .find(|(_, c)| !c.is_whitespace())
                .and_then(|(i, _)| ctx.origins[start + i])
        })
        .collect();

    let mut stmts = Vec::new();
    collect_statements(body, &mut stmts);

    // Entry.
    let top = python::statements(body);
    let first_real = top.iter().position(|s| !is_docstring(*s));
    let entry_site = match first_real {
        Some(i) => ctx.before(top[i]),
        None => ctx.after(*top.last().expect("a function body is never empty")),
    };
    let header_line = unit_line(unit, unit.function_byte_range.start);
    let entry_line = top
        .iter()
        .filter(|s| !is_docstring(**s))
        .find_map(|s| ctx.origin(*s))
        .unwrap_or(header_line);

    let mut returns = Vec::new();
    let mut uses: BTreeMap<String, Vec<UseSite>> = BTreeMap::new();
    let mut merges = Vec::new();
    let mut loops = Vec::new();
    let mut def_reads: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut def_lines: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut def_stmts: BTreeMap<String, Vec<Node<'_>>> = BTreeMap::new();
    let mut executable_lines = BTreeSet::new();
    let unit_idx = LineIndex::new(&unit.text);

    for &stmt in &stmts {
        let origin = ctx.origin(stmt);
        let reads = ctx.statement_reads(stmt)?;

        for name in defined_names(stmt, &ssa_text) {
            if !ctx.known.contains(&name) {
                continue;
            }
            def_reads.entry(name.clone()).or_default().extend(reads.iter().cloned());
            let lines = def_lines.entry(name.clone()).or_default();
            if let Some(l) = origin {
                lines.insert(l);
            }
            def_stmts.entry(name).or_default().push(stmt);
        }

        let Some(line) = origin else { continue };
        executable_lines.insert(line);
        if stmt.kind() == "if_statement" {
            let mut cursor = stmt.walk();
            for alt in stmt.children_by_field_name("alternative", &mut cursor) {
                if alt.kind() == "elif_clause" {
                    if let Some(l) = ctx.origin(alt) {
                        executable_lines.insert(l);
                    }
                }
            }
        }

        for name in &reads {
            let sites = uses.entry(name.clone()).or_default();
            let site = ctx.before(stmt);
            if !sites.iter().any(|u| u.site == site) {
                sites.push(UseSite { site, line });
            }
        }

        match stmt.kind() {
            "return_statement" => returns.push(ReturnSite {
                span: stmt.byte_range(),
                indent: python::indent_at(&ssa_text, &ctx.idx, stmt.start_byte()),
                line,
                reads: reads.clone(),
            }),
            "if_statement" => {
                let mut last = stmt;
                while let Some(next) = last.next_named_sibling() {
                    if ctx.origin(next).is_some() || next.kind() == "comment" {
                        break;
                    }
                    last = next;
                }
                let end_line = ctx.origins[stmt.byte_range()]
                    .iter()
                    .flatten()
                    .max()
                    .copied()
                    .unwrap_or(line);
                merges.push(BranchMerge {
                    start_line: line,
                    end_line,
                    site: ctx.after(last),
                });
            }
            "for_statement" | "while_statement" => {
                let block = stmt.child_by_field_name("body").expect("loop body");
                let body_stmts = python::statements(block);
                let first = *body_stmts.first().expect("blocks are non-empty");
                let last = *body_stmts.last().expect("blocks are non-empty");
                let loop_id = parse_loop_id(&ssa_text, &ctx.idx, stmt, block)
                    .unwrap_or(loops.len() as u32 + 1);
                let mut inner = Vec::new();
                collect_statements(block, &mut inner);
                let body_lines: BTreeSet<usize> =
                    inner.iter().filter_map(|s| ctx.origin(*s)).collect();
                let last_line = ctx.origins[block.byte_range()]
                    .iter()
                    .flatten()
                    .max()
                    .copied()
                    .unwrap_or(line);
                let indent = python::indent_at(&ssa_text, &ctx.idx, stmt.start_byte());
                loops.push(LoopInfo {
                    loop_id,
                    head_byte_offset: unit_idx.line_start(line) + indent.len(),
                    tail_byte_offset: unit_idx.line_end(last_line),
                    header_line: line,
                    head_site: ctx.before(first),
                    tail_site: if python::is_jump(last.kind()) {
                        ctx.before(last)
                    } else {
                        ctx.after(last)
                    },
                    body_lines,
                });
            }
            _ => {}
        }
    }
    loops.sort_by_key(|l| l.loop_id);

    let mut def_map = Vec::new();
    for d in &defs {
        let name = format!("{}__{}", d.base, d.version);
        let candidates = def_stmts.get(&name).map(Vec::as_slice).unwrap_or(&[]);
        let chosen = match d.kind {
            DefKind::Join => candidates.first().copied(),
            _ => candidates.iter().copied().find(|s| ctx.origin(*s).is_some()),
        };
        let site = match chosen {
            Some(s) if s.kind() == "for_statement" => {
                let block = s.child_by_field_name("body").expect("loop body");
                ctx.before(python::statements(block)[0])
            }
            Some(s) => ctx.after(s),
            None => entry_site.clone(),
        };
        def_map.push(DefEntry {
            ssa_name: name,
            base_name: d.base.clone(),
            version: d.version,
            original_byte_offset: d.original_offset,
            original_line: d.original_line,
            kind: d.kind,
            site,
        });
    }
    def_map.sort_by(|a, b| {
        (a.original_byte_offset, a.original_line, &a.base_name, a.version)
            .cmp(&(b.original_byte_offset, b.original_line, &b.base_name, b.version))
    });

    let line_sites = line_sites(&ctx, &stmts, &line_origins);

    Ok(SsaProgram {
        function_name: unit.function_name.clone(),
        function_range: range,
        params,
        def_map,
        loop_ids: loops,
        line_origins,
        entry_site,
        entry_line,
        returns,
        uses,
        merges,
        line_sites,
        def_reads,
        def_lines,
        executable_lines,
        ssa_text: ssa_text.clone(),
    })
}

fn unit_line(unit: &SourceUnit, offset: usize) -> usize {
    unit.text[..offset].matches('\n').count() + 1
}

fn parse_marker(text: &str) -> Option<u32> {
    let at = text.find(LOOP_MARKER)?;
    let digits: String = text[at + LOOP_MARKER.len()..]
        .chars()
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse().ok()
}

/// Loop id from the marker comment at the end of the header's colon line.
fn parse_loop_id(src: &str, idx: &LineIndex, stmt: Node<'_>, block: Node<'_>) -> Option<u32> {
    let colon = python::children(stmt)
        .into_iter()
        .filter(|c| c.kind() == ":" && c.end_byte() <= block.start_byte())
        .last()?;
    let line = idx.line_of(colon.end_byte());
    parse_marker(&src[idx.line_start(line)..idx.line_end(line)])
}

/// For every original line, where a check "at that line" executes.
fn line_sites(
    ctx: &Ctx<'_>,
    stmts: &[Node<'_>],
    line_origins: &[Option<usize>],
) -> BTreeMap<usize, CheckSite> {
    let mut out = BTreeMap::new();
    for (i, origin) in line_origins.iter().enumerate() {
        let Some(orig) = *origin else { continue };
        if out.contains_key(&orig) {
            continue;
        }
        let ssa_line = i + 1;
        let line_text = &ctx.src[ctx.idx.line_start(ssa_line)..ctx.idx.line_end(ssa_line)];
        if line_text.trim_start().starts_with('#') {
            continue;
        }
        let covering = stmts
            .iter()
            .filter(|s| {
                let a = ctx.idx.line_of(s.start_byte());
                let b = ctx.idx.line_of(s.end_byte() - 1);
                a <= ssa_line && ssa_line <= b
            })
            .max_by_key(|s| (s.start_byte(), std::cmp::Reverse(s.end_byte())));
        let Some(&stmt) = covering else { continue };
        let site = if !child_blocks(stmt).is_empty() {
            let next = child_blocks(stmt)
                .into_iter()
                .find(|b| ctx.idx.line_of(b.start_byte()) > ssa_line);
            match next {
                Some(b) => ctx.before(python::statements(b)[0]),
                None => continue,
            }
        } else if python::is_jump(stmt.kind()) {
            ctx.before(stmt)
        } else {
            ctx.after(stmt)
        };
        out.insert(orig, site);
    }
    out
}
