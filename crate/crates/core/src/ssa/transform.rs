//! Source-to-source light SSA rewriting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use tree_sitter::Node;

use super::scope::{assigned_names, assignment_parts, parameters, visit_reads};
use super::{analyze, DefKind, SourceUnit, SsaError, SsaProgram, BRANCH_FLAG_PREFIX};
use crate::python::{self, LineIndex};

/// A text splice over the original file. Each piece carries the original
/// line its bytes are attributed to, or `None` for synthesized lines.
#[derive(Debug, Clone)]
struct Splice {
    start: usize,
    end: usize,
    pieces: Vec<(String, Option<usize>)>,
    seq: usize,
}

#[derive(Debug, Clone)]
pub(super) struct PendingDef {
    pub base: String,
    pub version: u32,
    pub kind: DefKind,
    pub original_offset: usize,
    pub original_line: usize,
}

#[derive(Debug, Default)]
struct BlockPrefix {
    suffix: String,
    lines: Vec<String>,
}

struct BlockInfo {
    start: usize,
    colon_end: usize,
    header_start: usize,
}

struct Rewriter<'s> {
    src: &'s str,
    idx: LineIndex,
    params: BTreeSet<String>,
    assigned: BTreeSet<String>,
    counter: HashMap<String, u32>,
    current: HashMap<String, u32>,
    pinned: HashMap<String, u32>,
    splices: Vec<Splice>,
    prefixes: BTreeMap<usize, BlockPrefix>,
    blocks: Vec<BlockInfo>,
    defs: Vec<PendingDef>,
    recorded: HashSet<(String, u32)>,
    loops: u32,
    flags: u32,
}

/// Rewrite the unit's function into executable light SSA form.
pub fn to_ssa(unit: &SourceUnit) -> Result<SsaProgram, SsaError> {
    let tree = python::parse(&unit.text);
    let root = tree.root_node();
    if let Some(err) = python::first_error(root) {
        return Err(SsaError::Parse {
            path: unit.path.display().to_string(),
            line: err.start_position().row + 1,
        });
    }
    let func = root
        .descendant_for_byte_range(unit.function_byte_range.start, unit.function_byte_range.end)
        .filter(|n| n.kind() == "function_definition")
        .ok_or_else(|| SsaError::FunctionNotFound {
            path: unit.path.display().to_string(),
            name: unit.function_name.clone(),
        })?;
    let body = func.child_by_field_name("body").expect("function has a body");

    let src = unit.text.as_str();
    let mut rw = Rewriter {
        src,
        idx: LineIndex::new(src),
        params: parameters(func, src).into_iter().collect(),
        assigned: assigned_names(body, src),
        counter: HashMap::new(),
        current: HashMap::new(),
        pinned: HashMap::new(),
        splices: Vec::new(),
        prefixes: BTreeMap::new(),
        blocks: Vec::new(),
        defs: Vec::new(),
        recorded: HashSet::new(),
        loops: 0,
        flags: 0,
    };
    rw.register_block(body, python::colon_before(func, "body"), func);
    rw.block(body)?;
    rw.emit_block_prefixes();

    let (ssa_text, origins) = rw.apply();
    let function_start = unit.function_byte_range.start;
    let function_end = function_start
        + (unit.function_byte_range.end - function_start)
        + (ssa_text.len() - src.len());
    analyze::analyze(
        unit,
        ssa_text,
        origins,
        function_start..function_end,
        parameters(func, src),
        rw.defs,
    )
}

fn unsupported(node: Node<'_>) -> SsaError {
    SsaError::UnsupportedConstruct {
        kind: node.kind().to_string(),
        line: node.start_position().row + 1,
    }
}

fn is_atomic(kind: &str) -> bool {
    matches!(
        kind,
        "identifier"
            | "integer"
            | "float"
            | "string"
            | "concatenated_string"
            | "true"
            | "false"
            | "none"
            | "call"
            | "subscript"
            | "attribute"
            | "parenthesized_expression"
            | "list"
            | "tuple"
            | "dictionary"
            | "set"
            | "list_comprehension"
            | "set_comprehension"
            | "dictionary_comprehension"
            | "generator_expression"
    )
}

impl<'s> Rewriter<'s> {
    fn line(&self, offset: usize) -> usize {
        self.idx.line_of(offset)
    }

    fn indent(&self, offset: usize) -> String {
        python::indent_at(self.src, &self.idx, offset)
    }

    fn splice(&mut self, start: usize, end: usize, pieces: Vec<(String, Option<usize>)>) {
        let seq = self.splices.len();
        self.splices.push(Splice { start, end, pieces, seq });
    }

    fn rename(&mut self, node: Node<'_>, name: String) {
        let line = self.line(node.start_byte());
        self.splice(node.start_byte(), node.end_byte(), vec![(name, Some(line))]);
    }

    /// Insert whole synthesized lines before the line holding `offset`.
    fn insert_lines_before(&mut self, offset: usize, indent: &str, lines: &[String]) {
        if lines.is_empty() {
            return;
        }
        let at = self.idx.line_start(self.line(offset));
        let text: String = lines.iter().map(|l| format!("{indent}{l}\n")).collect();
        self.splice(at, at, vec![(text, None)]);
    }

    /// Insert whole synthesized lines after the line holding `offset`.
    fn insert_lines_after(&mut self, offset: usize, indent: &str, lines: &[String]) {
        if lines.is_empty() {
            return;
        }
        let at = self.idx.line_end(self.line(offset));
        let text: String = lines.iter().map(|l| format!("\n{indent}{l}")).collect();
        self.splice(at, at, vec![(text, None)]);
    }

    fn bump(&mut self, base: &str) -> u32 {
        let c = self.counter.entry(base.to_string()).or_insert(0);
        *c += 1;
        *c
    }

    /// Name a read of `base` resolves to right now, if it has a value.
    fn resolve(&self, base: &str) -> Option<String> {
        let v = self
            .pinned
            .get(base)
            .or_else(|| self.current.get(base))
            .copied()
            .unwrap_or(0);
        if v > 0 {
            Some(format!("{base}__{v}"))
        } else if self.params.contains(base) {
            Some(base.to_string())
        } else {
            None
        }
    }

    fn reads(&mut self, node: Node<'_>) -> Result<(), SsaError> {
        let mut hits = Vec::new();
        visit_reads(node, self.src, &mut Vec::new(), &mut |n| {
            hits.push(n);
            Ok(())
        })?;
        for n in hits {
            let base = python::text(n, self.src);
            if !self.assigned.contains(base) {
                continue;
            }
            let v = self
                .pinned
                .get(base)
                .or_else(|| self.current.get(base))
                .copied()
                .unwrap_or(0);
            if v > 0 {
                self.rename(n, format!("{base}__{v}"));
            }
        }
        Ok(())
    }

    /// Allocate the version a new definition of `base` writes.
    fn define(&mut self, base: &str, kind: DefKind, stmt_end: usize, line: usize) -> u32 {
        let v = match self.pinned.get(base) {
            Some(&v) => v,
            None => {
                let v = self.bump(base);
                self.current.insert(base.to_string(), v);
                v
            }
        };
        if self.recorded.insert((base.to_string(), v)) {
            self.defs.push(PendingDef {
                base: base.to_string(),
                version: v,
                kind,
                original_offset: self.idx.line_end(self.line(stmt_end)),
                original_line: line,
            });
        }
        v
    }

    fn target(&mut self, node: Node<'_>, kind: DefKind, site_end: usize) -> Result<(), SsaError> {
        match node.kind() {
            "identifier" => {
                let base = python::text(node, self.src).to_string();
                let line = self.line(node.start_byte());
                let v = self.define(&base, kind, site_end, line);
                self.rename(node, format!("{base}__{v}"));
            }
            "pattern_list" | "tuple_pattern" | "list_pattern" | "tuple" | "list"
            | "list_splat_pattern" | "list_splat" | "parenthesized_expression" => {
                for c in python::named_children(node) {
                    self.target(c, kind, site_end)?;
                }
            }
            "attribute" => {
                if let Some(o) = node.child_by_field_name("object") {
                    self.reads(o)?;
                }
            }
            "subscript" => {
                for c in python::named_children(node) {
                    self.reads(c)?;
                }
            }
            _ => return Err(unsupported(node)),
        }
        Ok(())
    }

    fn block(&mut self, block: Node<'_>) -> Result<(), SsaError> {
        for stmt in python::statements(block) {
            self.statement(stmt)?;
        }
        Ok(())
    }

    fn statement(&mut self, stmt: Node<'_>) -> Result<(), SsaError> {
        match stmt.kind() {
            "expression_statement" => {
                for child in python::named_children(stmt) {
                    match child.kind() {
                        "assignment" => self.assignment(child, stmt)?,
                        "augmented_assignment" => self.augmented(child, stmt)?,
                        _ => self.reads(child)?,
                    }
                }
            }
            "return_statement" | "raise_statement" | "assert_statement" | "print_statement" => {
                for c in python::named_children(stmt) {
                    self.reads(c)?;
                }
            }
            "pass_statement" | "break_statement" | "continue_statement" => {}
            "if_statement" => self.if_statement(stmt)?,
            "for_statement" => self.for_statement(stmt)?,
            "while_statement" => self.while_statement(stmt)?,
            _ => return Err(unsupported(stmt)),
        }
        Ok(())
    }

    fn assignment(&mut self, node: Node<'_>, stmt: Node<'_>) -> Result<(), SsaError> {
        let (targets, value) = assignment_parts(node);
        let Some(value) = value else {
            // Bare annotation: binds nothing.
            return Ok(());
        };
        if value.kind() == "yield" {
            return Err(unsupported(value));
        }
        self.reads(value)?;
        for t in targets {
            self.target(t, DefKind::Assignment, stmt.end_byte() - 1)?;
        }
        Ok(())
    }

    fn augmented(&mut self, node: Node<'_>, stmt: Node<'_>) -> Result<(), SsaError> {
        let left = node.child_by_field_name("left").expect("augmented target");
        let right = node.child_by_field_name("right").expect("augmented value");
        if left.kind() != "identifier" {
            self.target(left, DefKind::Assignment, stmt.end_byte() - 1)?;
            return self.reads(right);
        }
        let op = python::children(node)
            .into_iter()
            .find(|c| c.start_byte() >= left.end_byte() && c.end_byte() <= right.start_byte())
            .expect("augmented operator");
        let op_text = python::text(op, self.src);
        let binop = op_text.strip_suffix('=').unwrap_or(op_text);

        self.reads(right)?;
        let base = python::text(left, self.src).to_string();
        let prior = self.resolve(&base).unwrap_or_else(|| base.clone());
        let line = self.line(left.start_byte());
        let v = self.define(&base, DefKind::Assignment, stmt.end_byte() - 1, line);
        self.splice(
            left.start_byte(),
            op.end_byte(),
            vec![(format!("{base}__{v} = {prior} {binop}"), Some(line))],
        );
        if !is_atomic(right.kind()) {
            let (l0, l1) = (self.line(right.start_byte()), self.line(right.end_byte()));
            self.splice(right.start_byte(), right.start_byte(), vec![("(".into(), Some(l0))]);
            self.splice(right.end_byte(), right.end_byte(), vec![(")".into(), Some(l1))]);
        }
        Ok(())
    }

    fn register_block(&mut self, block: Node<'_>, colon: Option<Node<'_>>, header: Node<'_>) {
        let Some(colon) = colon else { return };
        self.blocks.push(BlockInfo {
            start: block.start_byte(),
            colon_end: colon.end_byte(),
            header_start: header.start_byte(),
        });
    }

    fn prefix(&mut self, block: Node<'_>) -> &mut BlockPrefix {
        self.prefixes.entry(block.start_byte()).or_default()
    }

    fn if_statement(&mut self, stmt: Node<'_>) -> Result<(), SsaError> {
        let clauses = python::if_clauses(stmt);
        let mut alternatives = stmt.walk();
        let headers: Vec<Node<'_>> = std::iter::once(stmt)
            .chain(stmt.children_by_field_name("alternative", &mut alternatives))
            .collect();
        for (clause, header) in clauses.iter().zip(&headers) {
            self.register_block(clause.body, clause.colon, *header);
            if let Some(cond) = clause.condition {
                self.reads(cond)?;
            }
        }

        let pre = self.current.clone();
        let mut arms: Vec<(Option<Node<'_>>, HashMap<String, u32>)> = Vec::new();
        for clause in &clauses {
            self.current = pre.clone();
            self.block(clause.body)?;
            if !python::block_terminates(clause.body) {
                arms.push((Some(clause.body), self.current.clone()));
            }
        }
        if clauses.iter().all(|c| c.condition.is_some()) {
            arms.push((None, pre.clone()));
        }

        match arms.len() {
            0 => self.current = pre,
            1 => self.current = arms.pop().expect("one arm").1,
            _ => self.join(stmt, &pre, arms),
        }
        Ok(())
    }

    fn join(
        &mut self,
        stmt: Node<'_>,
        pre: &HashMap<String, u32>,
        arms: Vec<(Option<Node<'_>>, HashMap<String, u32>)>,
    ) {
        let bases: BTreeSet<String> = arms
            .iter()
            .flat_map(|(_, s)| s.keys().cloned())
            .chain(pre.keys().cloned())
            .collect();
        let name_of = |base: &str, v: u32, params: &BTreeSet<String>| -> Option<String> {
            if v > 0 {
                Some(format!("{base}__{v}"))
            } else if params.contains(base) {
                Some(base.to_string())
            } else {
                None
            }
        };

        // (base, per-arm names) for every base the arms disagree on.
        let mut pending: Vec<(String, Vec<Option<String>>)> = Vec::new();
        let mut merged = pre.clone();
        for base in bases {
            let versions: Vec<u32> = arms
                .iter()
                .map(|(_, s)| s.get(&base).copied().unwrap_or(0))
                .collect();
            if versions.iter().all(|v| *v == versions[0]) {
                merged.insert(base.clone(), versions[0]);
                continue;
            }
            let names: Vec<Option<String>> = versions
                .iter()
                .map(|v| name_of(&base, *v, &self.params))
                .collect();
            let defined: BTreeSet<u32> = versions
                .iter()
                .zip(&names)
                .filter(|(_, n)| n.is_some())
                .map(|(v, _)| *v)
                .collect();
            if names.iter().any(Option::is_none) && defined.len() == 1 {
                // The other paths leave the name unbound; reading it there
                // fails either way.
                merged.insert(base.clone(), *defined.iter().next().expect("one version"));
                continue;
            }
            pending.push((base, names));
        }

        let last = arms.len() - 1;
        let flags: Vec<String> = if pending.is_empty() {
            Vec::new()
        } else {
            (0..last)
                .map(|_| {
                    self.flags += 1;
                    format!("{BRANCH_FLAG_PREFIX}{}", self.flags)
                })
                .collect()
        };
        let end = stmt.end_byte() - 1;
        let mut joins = Vec::new();
        for (base, names) in pending {
            let mut expr = names[last].clone().unwrap_or_else(|| base.clone());
            for i in (0..last).rev() {
                let value = names[i].clone().unwrap_or_else(|| base.clone());
                expr = format!("{value} if {} else {expr}", flags[i]);
            }
            let v = self.bump(&base);
            merged.insert(base.clone(), v);
            self.defs.push(PendingDef {
                base: base.clone(),
                version: v,
                kind: DefKind::Join,
                original_offset: self.idx.line_end(self.line(end)),
                original_line: self.line(end),
            });
            self.recorded.insert((base.clone(), v));
            joins.push(format!("{base}__{v} = {expr}"));
        }
        self.current = merged;

        let indent = self.indent(stmt.start_byte());
        let mut inits = Vec::new();
        for (i, flag) in flags.iter().enumerate() {
            inits.push(format!("{flag} = False"));
            let body = arms[i].0.expect("only the last arm can be implicit");
            self.prefix(body).lines.push(format!("{flag} = True"));
        }
        self.insert_lines_before(stmt.start_byte(), &indent, &inits);
        self.insert_lines_after(stmt.end_byte() - 1, &indent, &joins);
    }

    fn enter_loop(&mut self, stmt: Node<'_>) -> Vec<String> {
        let assigned = assigned_names(stmt, self.src);
        let fresh: Vec<String> = assigned
            .into_iter()
            .filter(|b| !self.pinned.contains_key(b))
            .collect();
        let mut seeds = Vec::new();
        for base in &fresh {
            let prior = self.resolve(base);
            let v = self.bump(base);
            self.pinned.insert(base.clone(), v);
            if let Some(prior) = prior {
                seeds.push(format!("{base}__{v} = {prior}"));
            }
        }
        let indent = self.indent(stmt.start_byte());
        self.insert_lines_before(stmt.start_byte(), &indent, &seeds);
        fresh
    }

    fn exit_loop(&mut self, fresh: Vec<String>) {
        for base in fresh {
            if let Some(v) = self.pinned.remove(&base) {
                self.current.insert(base, v);
            }
        }
    }

    fn for_statement(&mut self, stmt: Node<'_>) -> Result<(), SsaError> {
        if let Some(alt) = stmt.child_by_field_name("alternative") {
            return Err(SsaError::UnsupportedConstruct {
                kind: "for_else".into(),
                line: alt.start_position().row + 1,
            });
        }
        if python::children(stmt).first().map(|c| c.kind()) == Some("async") {
            return Err(unsupported(stmt));
        }
        let body = stmt.child_by_field_name("body").expect("for body");
        let colon = python::colon_before(stmt, "body");
        self.register_block(body, colon, stmt);
        if let Some(right) = stmt.child_by_field_name("right") {
            self.reads(right)?;
        }
        self.loops += 1;
        let id = self.loops;
        self.prefix(body).suffix = format!("  # loop__id: {id}");

        let fresh = self.enter_loop(stmt);
        let header_end = colon.map(|c| c.start_byte()).unwrap_or(stmt.start_byte());
        if let Some(left) = stmt.child_by_field_name("left") {
            self.target(left, DefKind::ForTarget, header_end)?;
        }
        self.block(body)?;
        self.exit_loop(fresh);
        Ok(())
    }

    fn while_statement(&mut self, stmt: Node<'_>) -> Result<(), SsaError> {
        if let Some(alt) = stmt.child_by_field_name("alternative") {
            return Err(SsaError::UnsupportedConstruct {
                kind: "while_else".into(),
                line: alt.start_position().row + 1,
            });
        }
        let body = stmt.child_by_field_name("body").expect("while body");
        self.register_block(body, python::colon_before(stmt, "body"), stmt);
        self.loops += 1;
        let id = self.loops;
        self.prefix(body).suffix = format!("  # loop__id: {id}");

        let fresh = self.enter_loop(stmt);
        if let Some(cond) = stmt.child_by_field_name("condition") {
            self.reads(cond)?;
        }
        self.block(body)?;
        self.exit_loop(fresh);
        Ok(())
    }

    /// Emit loop comments and branch-flag lines, moving bodies that share a
    /// line with their header onto their own lines.
    fn emit_block_prefixes(&mut self) {
        let blocks = std::mem::take(&mut self.blocks);
        for info in blocks {
            let prefix = self.prefixes.remove(&info.start).unwrap_or_default();
            let header_line = self.line(info.header_start);
            let same_line = self.line(info.colon_end) == self.line(info.start);
            if same_line {
                let indent = format!("{}    ", self.indent(info.header_start));
                let mut pieces = vec![(prefix.suffix, Some(header_line))];
                for l in &prefix.lines {
                    pieces.push((format!("\n{indent}"), Some(header_line)));
                    pieces.push((l.clone(), None));
                }
                pieces.push((format!("\n{indent}"), Some(header_line)));
                self.splice(info.colon_end, info.start, pieces);
            } else {
                if !prefix.suffix.is_empty() {
                    let at = self.idx.line_end(self.line(info.colon_end));
                    self.splice(at, at, vec![(prefix.suffix, Some(header_line))]);
                }
                let indent = self.indent(info.start);
                self.insert_lines_before(info.start, &indent, &prefix.lines);
            }
        }
    }

    /// Apply all splices; returns the new text and each output byte's origin.
    fn apply(&mut self) -> (String, Vec<Option<usize>>) {
        let mut splices = std::mem::take(&mut self.splices);
        splices.sort_by_key(|s| (s.start, s.end, s.seq));
        let mut out = String::with_capacity(self.src.len() * 2);
        let mut origins: Vec<Option<usize>> = Vec::with_capacity(self.src.len() * 2);
        let mut pos = 0;
        let copy = |out: &mut String, origins: &mut Vec<Option<usize>>, from: usize, to: usize| {
            for (i, ch) in self.src[from..to].char_indices() {
                out.push(ch);
                let line = self.idx.line_of(from + i);
                origins.extend(std::iter::repeat_n(Some(line), ch.len_utf8()));
            }
        };
        for s in splices {
            debug_assert!(s.start >= pos, "splices overlap at {}", s.start);
            copy(&mut out, &mut origins, pos, s.start);
            for (text, origin) in s.pieces {
                origins.extend(std::iter::repeat_n(origin, text.len()));
                out.push_str(&text);
            }
            pos = s.end;
        }
        copy(&mut out, &mut origins, pos, self.src.len());
        (out, origins)
    }
}
