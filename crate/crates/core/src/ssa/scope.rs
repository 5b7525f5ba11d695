//! Name resolution shared by the anchor, SSA and analysis passes.

use std::collections::{BTreeSet, HashSet};

use tree_sitter::Node;

use super::SsaError;
use crate::python;

const COMPREHENSIONS: [&str; 4] = [
    "list_comprehension",
    "set_comprehension",
    "dictionary_comprehension",
    "generator_expression",
];

fn unsupported(node: Node<'_>, kind: &str) -> SsaError {
    SsaError::UnsupportedConstruct {
        kind: kind.to_string(),
        line: node.start_position().row + 1,
    }
}

fn is_bound(bound: &[HashSet<String>], name: &str) -> bool {
    bound.iter().any(|s| s.contains(name))
}

/// Call `f` on every identifier node read by `node`, skipping names bound by
/// enclosing comprehensions or lambdas, keyword-argument names and
/// attribute names.
pub(crate) fn visit_reads<'t, F>(
    node: Node<'t>,
    src: &str,
    bound: &mut Vec<HashSet<String>>,
    f: &mut F,
) -> Result<(), SsaError>
where
    F: FnMut(Node<'t>) -> Result<(), SsaError>,
{
    match node.kind() {
        "identifier" => {
            if !is_bound(bound, python::text(node, src)) {
                f(node)?;
            }
        }
        "keyword_argument" => {
            if let Some(v) = node.child_by_field_name("value") {
                visit_reads(v, src, bound, f)?;
            }
        }
        "attribute" => {
            if let Some(o) = node.child_by_field_name("object") {
                visit_reads(o, src, bound, f)?;
            }
        }
        "named_expression" => return Err(unsupported(node, "named_expression")),
        "lambda" => {
            let mut names = HashSet::new();
            if let Some(params) = node.child_by_field_name("parameters") {
                for p in python::named_children(params) {
                    if let Some(v) = p.child_by_field_name("value") {
                        visit_reads(v, src, bound, f)?;
                    }
                    names.extend(binding_names(p, src));
                }
            }
            bound.push(names);
            let res = match node.child_by_field_name("body") {
                Some(body) => visit_reads(body, src, bound, f),
                None => Ok(()),
            };
            bound.pop();
            res?;
        }
        k if COMPREHENSIONS.contains(&k) => {
            let children = python::named_children(node);
            let mut names = HashSet::new();
            for c in children.iter().filter(|c| c.kind() == "for_in_clause") {
                if let Some(left) = c.child_by_field_name("left") {
                    names.extend(binding_names(left, src));
                }
            }
            let mut first_clause = true;
            for c in &children {
                if c.kind() == "for_in_clause" {
                    let Some(right) = c.child_by_field_name("right") else {
                        continue;
                    };
                    if first_clause {
                        // The outermost iterable is evaluated in the enclosing scope.
                        visit_reads(right, src, bound, f)?;
                        first_clause = false;
                    } else {
                        bound.push(names.clone());
                        let res = visit_reads(right, src, bound, f);
                        bound.pop();
                        res?;
                    }
                } else {
                    bound.push(names.clone());
                    let res = visit_reads(*c, src, bound, f);
                    bound.pop();
                    res?;
                }
            }
        }
        _ => {
            for c in python::named_children(node) {
                visit_reads(c, src, bound, f)?;
            }
        }
    }
    Ok(())
}

/// Identifiers bound by a target or parameter node.
pub(crate) fn binding_names(node: Node<'_>, src: &str) -> Vec<String> {
    let mut out = Vec::new();
    collect_binding_names(node, src, &mut out);
    out
}

fn collect_binding_names(node: Node<'_>, src: &str, out: &mut Vec<String>) {
    match node.kind() {
        "identifier" => out.push(python::text(node, src).to_string()),
        "default_parameter" | "typed_default_parameter" => {
            if let Some(n) = node.child_by_field_name("name") {
                collect_binding_names(n, src, out);
            }
        }
        "typed_parameter" => {
            if let Some(n) = python::named_children(node)
                .into_iter()
                .find(|c| c.kind() != "type")
            {
                collect_binding_names(n, src, out);
            }
        }
        "attribute" | "subscript" | "type" => {}
        _ => {
            for c in python::named_children(node) {
                collect_binding_names(c, src, out);
            }
        }
    }
}

/// Parameter names of a function definition, in order.
pub(crate) fn parameters(func: Node<'_>, src: &str) -> Vec<String> {
    let Some(params) = func.child_by_field_name("parameters") else {
        return Vec::new();
    };
    python::named_children(params)
        .into_iter()
        .flat_map(|p| binding_names(p, src))
        .collect()
}

/// Targets of an assignment statement, innermost chain flattened, in
/// textual order, plus the value expression.
pub(crate) fn assignment_parts(node: Node<'_>) -> (Vec<Node<'_>>, Option<Node<'_>>) {
    let mut targets = Vec::new();
    let mut cur = node;
    loop {
        if let Some(left) = cur.child_by_field_name("left") {
            targets.push(left);
        }
        match cur.child_by_field_name("right") {
            Some(r) if r.kind() == "assignment" => cur = r,
            other => return (targets, other),
        }
    }
}

/// Base names bound by assignments, augmented assignments and `for` targets
/// anywhere under `node`. Comprehension and lambda scopes are not entered.
pub(crate) fn assigned_names(node: Node<'_>, src: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_assigned(node, src, &mut out);
    out
}

fn collect_assigned(node: Node<'_>, src: &str, out: &mut BTreeSet<String>) {
    match node.kind() {
        "assignment" => {
            let (targets, value) = assignment_parts(node);
            if value.is_some() {
                for t in targets {
                    out.extend(binding_names(t, src));
                }
            }
        }
        "augmented_assignment" => {
            if let Some(left) = node.child_by_field_name("left") {
                if left.kind() == "identifier" {
                    out.insert(python::text(left, src).to_string());
                }
            }
        }
        "for_statement" => {
            if let Some(left) = node.child_by_field_name("left") {
                out.extend(binding_names(left, src));
            }
            if let Some(body) = node.child_by_field_name("body") {
                collect_assigned(body, src, out);
            }
            return;
        }
        "lambda" | "function_definition" | "class_definition" => return,
        k if COMPREHENSIONS.contains(&k) => return,
        _ => {}
    }
    for c in python::named_children(node) {
        collect_assigned(c, src, out);
    }
}
