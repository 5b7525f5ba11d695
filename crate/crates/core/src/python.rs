//! Thin helpers over the tree-sitter Python grammar.

use tree_sitter::{Node, Parser, Tree};

pub fn parse(source: &str) -> Tree {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("python grammar is ABI compatible");
    parser
        .parse(source, None)
        .expect("parser has a language and no timeout")
}

/// First error or missing node inside `node`, if any.
pub fn first_error(node: Node<'_>) -> Option<Node<'_>> {
    if !node.has_error() {
        return None;
    }
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    let mut cursor = node.walk();
    let children: Vec<_> = node.children(&mut cursor).collect();
    children.into_iter().find_map(first_error).or(Some(node))
}

pub fn text<'s>(node: Node<'_>, source: &'s str) -> &'s str {
    &source[node.byte_range()]
}

pub fn named_children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

pub fn children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

/// Field name under which `child` hangs off its parent.
pub fn field_of<'t>(child: Node<'t>) -> Option<&'t str> {
    let parent = child.parent()?;
    let mut cursor = parent.walk();
    for (i, c) in parent.children(&mut cursor).enumerate() {
        if c.id() == child.id() {
            return parent.field_name_for_child(i as u32);
        }
    }
    None
}

/// Statements of a block, skipping comments.
pub fn statements(block: Node<'_>) -> Vec<Node<'_>> {
    named_children(block)
        .into_iter()
        .filter(|n| n.kind() != "comment")
        .collect()
}

pub fn is_statement_kind(kind: &str) -> bool {
    kind.ends_with("_statement") || kind == "function_definition" || kind == "class_definition"
        || kind == "decorated_definition"
}

pub fn is_jump(kind: &str) -> bool {
    matches!(
        kind,
        "return_statement" | "raise_statement" | "break_statement" | "continue_statement"
    )
}

/// Whether control can never fall off the end of `block`.
pub fn block_terminates(block: Node<'_>) -> bool {
    match statements(block).last() {
        Some(last) if is_jump(last.kind()) => true,
        Some(last) if last.kind() == "if_statement" => {
            let clauses = if_clauses(*last);
            clauses.iter().any(|c| c.condition.is_none())
                && clauses.iter().all(|c| block_terminates(c.body))
        }
        _ => false,
    }
}

/// One arm of an `if` chain. `condition` is `None` for the `else` arm.
#[derive(Clone, Copy)]
pub struct IfClause<'t> {
    pub condition: Option<Node<'t>>,
    pub body: Node<'t>,
    /// The `:` that ends the clause header.
    pub colon: Option<Node<'t>>,
}

pub fn if_clauses(if_stmt: Node<'_>) -> Vec<IfClause<'_>> {
    let mut out = vec![IfClause {
        condition: if_stmt.child_by_field_name("condition"),
        body: if_stmt
            .child_by_field_name("consequence")
            .expect("if has a consequence"),
        colon: colon_before(if_stmt, "consequence"),
    }];
    let mut cursor = if_stmt.walk();
    for alt in if_stmt.children_by_field_name("alternative", &mut cursor) {
        match alt.kind() {
            "elif_clause" => out.push(IfClause {
                condition: alt.child_by_field_name("condition"),
                body: alt.child_by_field_name("consequence").expect("elif body"),
                colon: colon_before(alt, "consequence"),
            }),
            "else_clause" => out.push(IfClause {
                condition: None,
                body: alt.child_by_field_name("body").expect("else body"),
                colon: colon_before(alt, "body"),
            }),
            _ => {}
        }
    }
    out
}

/// The `:` token immediately preceding the child stored under `field`.
pub fn colon_before<'t>(node: Node<'t>, field: &str) -> Option<Node<'t>> {
    let body = node.child_by_field_name(field)?;
    children(node)
        .into_iter()
        .filter(|c| c.kind() == ":" && c.end_byte() <= body.start_byte())
        .last()
}

/// Byte-offset to line mapping for a source text.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts, len: text.len() }
    }

    /// 1-based line containing `offset`.
    pub fn line_of(&self, offset: usize) -> usize {
        match self.starts.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    pub fn line_count(&self) -> usize {
        self.starts.len()
    }

    pub fn line_start(&self, line: usize) -> usize {
        self.starts[line - 1]
    }

    /// Offset of the line terminator (or end of text) for `line`.
    pub fn line_end(&self, line: usize) -> usize {
        if line < self.starts.len() {
            self.starts[line] - 1
        } else {
            self.len
        }
    }
}

/// Leading whitespace of the line containing `offset`.
pub fn indent_at(text: &str, index: &LineIndex, offset: usize) -> String {
    let start = index.line_start(index.line_of(offset));
    text[start..]
        .chars()
        .take_while(|c| *c == ' ' || *c == '\t')
        .collect()
}
