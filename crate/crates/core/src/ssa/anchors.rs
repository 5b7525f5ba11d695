//! Structural anchor sites over the original source.

use tree_sitter::Node;

use super::scope::{assignment_parts, visit_reads};
use super::{AnchorFamily, AnchorSite, SourceUnit, SsaError};
use crate::python::{self, LineIndex};

struct Walker<'s> {
    src: &'s str,
    idx: LineIndex,
    out: Vec<AnchorSite>,
    loops: u32,
}

/// Every entry, return, loop head/tail, definition and use site of the
/// unit's function, sorted by byte offset.
pub fn extract_anchors(unit: &SourceUnit) -> Result<Vec<AnchorSite>, SsaError> {
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
    let body = func.child_by_field_name("body").expect("function body");
    let mut w = Walker {
        src: &unit.text,
        idx: LineIndex::new(&unit.text),
        out: Vec::new(),
        loops: 0,
    };
    if let Some(first) = python::statements(body).first() {
        w.push(AnchorFamily::FunctionEntry, first.start_byte(), None, None);
    }
    w.block(body);
    w.out.sort_by_key(|a| (a.byte_offset, a.family));
    Ok(w.out)
}

impl Walker<'_> {
    fn push(&mut self, family: AnchorFamily, offset: usize, variable: Option<String>, loop_id: Option<u32>) {
        self.out.push(AnchorSite {
            family,
            byte_offset: offset,
            line: self.idx.line_of(offset),
            variable,
            loop_id,
        });
    }

    fn uses(&mut self, node: Node<'_>) {
        let mut hits = Vec::new();
        // Unsupported expressions simply end the scan of that expression.
        let _ = visit_reads(node, self.src, &mut Vec::new(), &mut |n| {
            hits.push((n.start_byte(), python::text(n, self.src).to_string()));
            Ok(())
        });
        for (offset, name) in hits {
            self.push(AnchorFamily::Use, offset, Some(name), None);
        }
    }

    fn target(&mut self, node: Node<'_>, stmt_end: usize) {
        match node.kind() {
            "identifier" => {
                let end = self.idx.line_end(self.idx.line_of(stmt_end));
                let name = python::text(node, self.src).to_string();
                self.out.push(AnchorSite {
                    family: AnchorFamily::Definition,
                    byte_offset: end,
                    line: self.idx.line_of(node.start_byte()),
                    variable: Some(name),
                    loop_id: None,
                });
            }
            "attribute" => {
                if let Some(o) = node.child_by_field_name("object") {
                    self.uses(o);
                }
            }
            "subscript" => {
                for c in python::named_children(node) {
                    self.uses(c);
                }
            }
            _ => {
                for c in python::named_children(node) {
                    self.target(c, stmt_end);
                }
            }
        }
    }

    fn block(&mut self, block: Node<'_>) {
        for stmt in python::statements(block) {
            self.statement(stmt);
        }
    }

    fn statement(&mut self, stmt: Node<'_>) {
        let last = stmt.end_byte().saturating_sub(1);
        match stmt.kind() {
            "expression_statement" => {
                for child in python::named_children(stmt) {
                    match child.kind() {
                        "assignment" => {
                            let (targets, value) = assignment_parts(child);
                            if let Some(v) = value {
                                self.uses(v);
                                for t in targets {
                                    self.target(t, last);
                                }
                            }
                        }
                        "augmented_assignment" => {
                            if let Some(r) = child.child_by_field_name("right") {
                                self.uses(r);
                            }
                            if let Some(l) = child.child_by_field_name("left") {
                                self.target(l, last);
                            }
                        }
                        _ => self.uses(child),
                    }
                }
            }
            "return_statement" => {
                self.push(AnchorFamily::ReturnSite, stmt.start_byte(), None, None);
                for c in python::named_children(stmt) {
                    self.uses(c);
                }
            }
            "for_statement" | "while_statement" => {
                self.loops += 1;
                let id = self.loops;
                let body = stmt.child_by_field_name("body").expect("loop body");
                self.push(AnchorFamily::LoopHead, stmt.start_byte(), None, Some(id));
                let tail = self.idx.line_end(self.idx.line_of(body.end_byte().saturating_sub(1)));
                self.out.push(AnchorSite {
                    family: AnchorFamily::LoopTail,
                    byte_offset: tail,
                    line: self.idx.line_of(body.end_byte().saturating_sub(1)),
                    variable: None,
                    loop_id: Some(id),
                });
                if let Some(r) = stmt.child_by_field_name("right") {
                    self.uses(r);
                }
                if let Some(c) = stmt.child_by_field_name("condition") {
                    self.uses(c);
                }
                if let Some(left) = stmt.child_by_field_name("left") {
                    let colon = python::colon_before(stmt, "body")
                        .map(|c| c.start_byte())
                        .unwrap_or(stmt.start_byte());
                    self.target(left, colon);
                }
                self.block(body);
                if let Some(alt) = stmt.child_by_field_name("alternative") {
                    self.compound_rest(alt);
                }
            }
            "function_definition" | "class_definition" | "decorated_definition" => {}
            _ if has_block(stmt) => self.compound_rest(stmt),
            _ => {
                for c in python::named_children(stmt) {
                    if c.kind() == "identifier" && matches!(stmt.kind(), "global_statement" | "nonlocal_statement") {
                        continue;
                    }
                    self.uses(c);
                }
            }
        }
    }

    /// Generic compound statement or clause: header reads, then blocks.
    fn compound_rest(&mut self, node: Node<'_>) {
        for c in python::named_children(node) {
            match c.kind() {
                "block" => self.block(c),
                "comment" => {}
                k if k.ends_with("_clause") => self.compound_rest(c),
                _ => self.uses(c),
            }
        }
    }
}

fn has_block(node: Node<'_>) -> bool {
    python::named_children(node)
        .iter()
        .any(|c| c.kind() == "block" || c.kind().ends_with("_clause"))
}
