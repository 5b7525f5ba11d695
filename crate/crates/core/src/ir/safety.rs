//! The restricted expression language constraint specs are written in.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use super::Region;
use crate::python;
use crate::ssa::{split_ssa_name, visit_reads};

/// Functions a spec may call.
pub const ALLOWED_CALLS: [&str; 7] = ["len", "all", "any", "sum", "abs", "max", "min"];

/// Name bound to the returned value at `ANY_RETURN` sites.
pub const RESULT_NAME: &str = "result";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyViolation {
    /// Short machine-readable reason, e.g. `disallowed-call`.
    pub reason: String,
    pub detail: String,
}

impl SafetyViolation {
    fn new(reason: &str, detail: impl Into<String>) -> Self {
        Self { reason: reason.to_string(), detail: detail.into() }
    }
}

const PLAIN_KINDS: &[&str] = &[
    "comparison_operator",
    "boolean_operator",
    "not_operator",
    "binary_operator",
    "unary_operator",
    "parenthesized_expression",
    "integer",
    "float",
    "string",
    "string_start",
    "string_content",
    "string_end",
    "escape_sequence",
    "concatenated_string",
    "true",
    "false",
    "none",
    "identifier",
    "subscript",
    "slice",
    "list_comprehension",
    "set_comprehension",
    "generator_expression",
    "for_in_clause",
    "if_clause",
    "tuple",
    "list",
    "set",
    "conditional_expression",
    "argument_list",
    "call",
];

/// Check `expr` against the safe subset. With `params`, also check that
/// the names it reads are legal for `region`.
pub fn check_expr_safety(
    expr: &str,
    region: Region,
    params: Option<&[String]>,
) -> Result<(), Vec<SafetyViolation>> {
    let trimmed = expr.trim();
    if trimmed.is_empty() {
        return Err(vec![SafetyViolation::new("empty-expression", "")]);
    }
    let wrapped = format!("(\n{trimmed}\n)\n");
    let tree = python::parse(&wrapped);
    let root = tree.root_node();
    if python::first_error(root).is_some() {
        return Err(vec![SafetyViolation::new("syntax", trimmed)]);
    }
    let stmts = python::named_children(root);
    let inner = match stmts.as_slice() {
        [stmt] if stmt.kind() == "expression_statement" && stmt.named_child_count() == 1 => {
            stmt.named_child(0).expect("one child")
        }
        _ => return Err(vec![SafetyViolation::new("syntax", "not a single expression")]),
    };
    let mut violations = Vec::new();
    walk(inner, &wrapped, &mut violations);
    if violations.is_empty() {
        if let Some(params) = params {
            scope(inner, &wrapped, region, params, &mut violations);
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn walk(node: Node<'_>, src: &str, out: &mut Vec<SafetyViolation>) {
    let kind = node.kind();
    if !node.is_named() {
        if kind == "await" || kind == ":=" {
            out.push(SafetyViolation::new("disallowed-syntax", kind));
        }
        return;
    }
    match kind {
        "comment" => return,
        "attribute" => {
            out.push(SafetyViolation::new("attribute-access", python::text(node, src)));
            return;
        }
        "lambda" => {
            out.push(SafetyViolation::new("lambda", python::text(node, src)));
            return;
        }
        "named_expression" => {
            out.push(SafetyViolation::new("assignment", python::text(node, src)));
            return;
        }
        "interpolation" => {
            out.push(SafetyViolation::new("disallowed-syntax", "f-string"));
            return;
        }
        "keyword_argument" => {
            out.push(SafetyViolation::new("keyword-argument", python::text(node, src)));
            return;
        }
        "call" => {
            let func = node.child_by_field_name("function").expect("call has a function");
            let name = python::text(func, src);
            if func.kind() != "identifier" || !ALLOWED_CALLS.contains(&name) {
                out.push(SafetyViolation::new("disallowed-call", name));
                return;
            }
            if let Some(args) = node.child_by_field_name("arguments") {
                walk(args, src, out);
            }
            return;
        }
        k if !PLAIN_KINDS.contains(&k) => {
            out.push(SafetyViolation::new("disallowed-syntax", k));
            return;
        }
        _ => {}
    }
    for c in python::children(node) {
        walk(c, src, out);
    }
}

fn scope(node: Node<'_>, src: &str, region: Region, params: &[String], out: &mut Vec<SafetyViolation>) {
    let mut names = Vec::new();
    let res = visit_reads(node, src, &mut Vec::new(), &mut |n| {
        let is_callee = n.parent().is_some_and(|p| {
            p.kind() == "call" && p.child_by_field_name("function").map(|f| f.id()) == Some(n.id())
        });
        if !is_callee {
            names.push(python::text(n, src).to_string());
        }
        Ok(())
    });
    if res.is_err() {
        out.push(SafetyViolation::new("disallowed-syntax", "named_expression"));
        return;
    }
    let params: HashSet<&str> = params.iter().map(String::as_str).collect();
    for name in names {
        let ok = match region {
            Region::AfterDef | Region::BeforeUse => {
                params.contains(name.as_str()) || split_ssa_name(&name).is_some()
            }
            Region::Entry => params.contains(name.as_str()),
            _ => true,
        };
        if !ok {
            let reason = if region == Region::Entry {
                "not-a-parameter"
            } else {
                "not-ssa-versioned"
            };
            out.push(SafetyViolation::new(reason, name));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reasons(expr: &str) -> Vec<String> {
        match check_expr_safety(expr, Region::AnyReturn, None) {
            Ok(()) => Vec::new(),
            Err(v) => v.into_iter().map(|v| v.reason).collect(),
        }
    }

    #[test]
    fn accepts_the_restricted_language() {
        for expr in [
            "True",
            "all(v <= 0 for v in shifted__1)",
            "abs(sum(result) - 1.0) < 1e-6 and all(0 <= v <= 1 for v in result)",
            "len(xs) > 0",
            "m__1 == max(xs)",
            "xs[1:] == xs[:-1] or not xs",
            "(a if b else c) in [1, 2, {3}]",
            "-x ** 2 % 3 // 1 != 0",
            "'a' 'b' == 'ab'",
        ] {
            assert_eq!(reasons(expr), Vec::<String>::new(), "{expr}");
        }
    }

    #[test]
    fn rejects_everything_else() {
        assert_eq!(reasons("__import__('os')"), ["disallowed-call"]);
        assert_eq!(reasons("xs.append(1)"), ["disallowed-call"]);
        assert_eq!(reasons("xs.count"), ["attribute-access"]);
        assert_eq!(reasons("(lambda: 1)()"), ["disallowed-call"]);
        assert_eq!(reasons("any(lambda: 1)"), ["lambda"]);
        assert_eq!(reasons("(y := 3)"), ["assignment"]);
        assert_eq!(reasons("{1: 2}"), ["disallowed-syntax"]);
        assert_eq!(reasons("f'{x}'"), ["disallowed-syntax"]);
        assert_eq!(reasons("max(xs, key=abs)"), ["keyword-argument"]);
        assert_eq!(reasons("x = 1"), ["syntax"]);
        assert_eq!(reasons("1; import os"), ["syntax"]);
        assert_eq!(reasons("   "), ["empty-expression"]);
    }

    #[test]
    fn scoping_by_region() {
        let params = vec!["xs".to_string()];
        let p = Some(params.as_slice());
        assert!(check_expr_safety("all(v <= 0 for v in shifted__1)", Region::AfterDef, p).is_ok());
        assert!(check_expr_safety("m__1 == max(xs)", Region::AfterDef, p).is_ok());
        let err = check_expr_safety("shifted == xs", Region::BeforeUse, p).unwrap_err();
        assert_eq!(err[0].reason, "not-ssa-versioned");
        assert!(check_expr_safety("len(xs) > 0", Region::Entry, p).is_ok());
        let err = check_expr_safety("len(m__1) > 0", Region::Entry, p).unwrap_err();
        assert_eq!(err[0].reason, "not-a-parameter");
        assert!(check_expr_safety("len(result) == len(xs)", Region::AnyReturn, p).is_ok());
    }
}
