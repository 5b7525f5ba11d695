//! Strict schema validation of constraint documents.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::safety::check_expr_safety;
use super::{Anchor, Category, Constraint, Region, DOCUMENT_VERSION};
use crate::ssa::split_ssa_name;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("constraint document is not JSON: {0}")]
    DocumentUnparseable(String),
    #[error("constraint document has the wrong shape: {0}")]
    DocumentShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NotAnObject,
    UnknownField,
    MissingField,
    WrongType,
    UnknownCategory,
    UnknownRegion,
    AnchorMismatch,
    BadSsaName,
    EmptySpec,
    UnsafeExpr,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// Position in the document's `constraints` array.
    pub index: usize,
    pub id: Option<String>,
    /// Path of the offending field, e.g. `instrument.region`.
    pub field: String,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validated {
    pub accepted: Vec<Constraint>,
    pub rejected: Vec<Reject>,
}

const CONSTRAINT_FIELDS: [&str; 6] = ["id", "category", "instrument", "spec", "intent", "meta"];

/// Parse and validate a constraint document. Malformed constraints are
/// returned as rejects; only a non-JSON or wrongly shaped document errors.
pub fn validate_ir(document: &str) -> Result<Validated, IrError> {
    let doc: Value =
        serde_json::from_str(document).map_err(|e| IrError::DocumentUnparseable(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| IrError::DocumentShape("top level is not an object".into()))?;
    if let Some(v) = obj.get("version") {
        if v.as_str() != Some(DOCUMENT_VERSION) {
            return Err(IrError::DocumentShape(format!("unsupported version {v}")));
        }
    }
    let items = obj
        .get("constraints")
        .and_then(Value::as_array)
        .ok_or_else(|| IrError::DocumentShape("missing `constraints` array".into()))?;

    let mut out = Validated::default();
    let mut seen = HashSet::new();
    for (index, item) in items.iter().enumerate() {
        match constraint(index, item) {
            Ok(c) if !seen.insert(c.id.clone()) => out.rejected.push(Reject {
                index,
                id: Some(c.id.clone()),
                field: "id".into(),
                reason: RejectReason::DuplicateId,
                detail: c.id,
            }),
            Ok(c) => out.accepted.push(c),
            Err(r) => out.rejected.push(r),
        }
    }
    Ok(out)
}

fn constraint(index: usize, item: &Value) -> Result<Constraint, Reject> {
    let id_hint = item.get("id").and_then(Value::as_str).map(str::to_string);
    let reject = |field: &str, reason: RejectReason, detail: String| Reject {
        index,
        id: id_hint.clone(),
        field: field.to_string(),
        reason,
        detail,
    };
    let obj = item
        .as_object()
        .ok_or_else(|| reject("", RejectReason::NotAnObject, item.to_string()))?;
    if let Some(k) = obj.keys().find(|k| !CONSTRAINT_FIELDS.contains(&k.as_str())) {
        return Err(reject(k, RejectReason::UnknownField, k.clone()));
    }
    if let Some(meta) = obj.get("meta") {
        if !meta.is_object() {
            return Err(reject("meta", RejectReason::WrongType, meta.to_string()));
        }
    }

    let id = match obj.get("id") {
        None => format!("c{}", index + 1),
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(v) => return Err(reject("id", RejectReason::WrongType, v.to_string())),
    };

    let category = match obj.get("category") {
        None => return Err(reject("category", RejectReason::MissingField, String::new())),
        Some(Value::String(s)) => Category::parse(s)
            .ok_or_else(|| reject("category", RejectReason::UnknownCategory, s.clone()))?,
        Some(v) => return Err(reject("category", RejectReason::WrongType, v.to_string())),
    };

    let instrument = match obj.get("instrument") {
        None => return Err(reject("instrument", RejectReason::MissingField, String::new())),
        Some(Value::Object(m)) => m,
        Some(v) => return Err(reject("instrument", RejectReason::WrongType, v.to_string())),
    };
    if let Some(k) = instrument.keys().find(|k| *k != "region" && *k != "anchor") {
        return Err(reject(&format!("instrument.{k}"), RejectReason::UnknownField, k.clone()));
    }
    let region = match instrument.get("region") {
        None => return Err(reject("instrument.region", RejectReason::MissingField, String::new())),
        Some(Value::String(s)) => Region::parse(s)
            .ok_or_else(|| reject("instrument.region", RejectReason::UnknownRegion, s.clone()))?,
        Some(v) => return Err(reject("instrument.region", RejectReason::WrongType, v.to_string())),
    };
    let empty = Map::new();
    let anchor_obj = match instrument.get("anchor") {
        None => &empty,
        Some(Value::Object(m)) => m,
        Some(v) => return Err(reject("instrument.anchor", RejectReason::WrongType, v.to_string())),
    };
    let anchor = anchor(region, anchor_obj).map_err(|(reason, detail)| {
        reject("instrument.anchor", reason, detail)
    })?;

    let expr = match obj.get("spec") {
        None => return Err(reject("spec", RejectReason::MissingField, String::new())),
        Some(Value::Object(m)) => {
            if let Some(k) = m.keys().find(|k| *k != "expr") {
                return Err(reject(&format!("spec.{k}"), RejectReason::UnknownField, k.clone()));
            }
            match m.get("expr") {
                Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
                Some(Value::String(_)) => {
                    return Err(reject("spec.expr", RejectReason::EmptySpec, String::new()))
                }
                None => return Err(reject("spec.expr", RejectReason::MissingField, String::new())),
                Some(v) => return Err(reject("spec.expr", RejectReason::WrongType, v.to_string())),
            }
        }
        Some(v) => return Err(reject("spec", RejectReason::WrongType, v.to_string())),
    };
    if let Err(violations) = check_expr_safety(&expr, region, None) {
        let detail = violations
            .iter()
            .map(|v| format!("{}: {}", v.reason, v.detail))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(reject("spec.expr", RejectReason::UnsafeExpr, detail));
    }

    let intent = match obj.get("intent") {
        None => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(v) => return Err(reject("intent", RejectReason::WrongType, v.to_string())),
    };

    Ok(Constraint { id, category, region, anchor, expr, intent })
}

fn anchor(region: Region, obj: &Map<String, Value>) -> Result<Anchor, (RejectReason, String)> {
    let wanted = region.anchor_field();
    if let Some(k) = obj.keys().find(|k| Some(k.as_str()) != wanted) {
        return Err((RejectReason::AnchorMismatch, format!("{region} does not take `{k}`")));
    }
    let Some(field) = wanted else {
        return Ok(Anchor::default());
    };
    let value = obj
        .get(field)
        .ok_or_else(|| (RejectReason::AnchorMismatch, format!("{region} requires `{field}`")))?;
    match field {
        "var" => {
            let name = value
                .as_str()
                .ok_or_else(|| (RejectReason::WrongType, value.to_string()))?;
            if split_ssa_name(name).is_none() {
                return Err((RejectReason::BadSsaName, name.to_string()));
            }
            Ok(Anchor::var(name))
        }
        "loop_id" => {
            let id = value
                .as_u64()
                .filter(|n| (1..=u64::from(u32::MAX)).contains(n))
                .ok_or_else(|| (RejectReason::WrongType, value.to_string()))?;
            Ok(Anchor::loop_id(id as u32))
        }
        _ => {
            let line = value
                .as_u64()
                .filter(|n| *n >= 1)
                .ok_or_else(|| (RejectReason::WrongType, value.to_string()))?;
            Ok(Anchor::line(line as usize))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(constraint: &str) -> Validated {
        validate_ir(&format!(r#"{{"version": "cbfl-ir", "constraints": [{constraint}]}}"#)).unwrap()
    }

    #[test]
    fn document_level_errors() {
        assert!(matches!(validate_ir("not json"), Err(IrError::DocumentUnparseable(_))));
        assert!(matches!(validate_ir("[]"), Err(IrError::DocumentShape(_))));
        assert!(matches!(
            validate_ir(r#"{"version": "other", "constraints": []}"#),
            Err(IrError::DocumentShape(_))
        ));
        let v = validate_ir(r#"{"version": "cbfl-ir", "constraints": []}"#).unwrap();
        assert_eq!((v.accepted.len(), v.rejected.len()), (0, 0));
    }

    #[test]
    fn unknown_labels_are_rejected_not_coerced() {
        let v = one(r#"{"category": "RANGE_CHECK", "instrument": {"region": "ENTRY", "anchor": {}}, "spec": {"expr": "True"}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::UnknownCategory);
        let v = one(r#"{"category": "value_range", "instrument": {"region": "ENTRY"}, "spec": {"expr": "True"}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::UnknownCategory);
        let v = one(r#"{"category": "RELATION", "instrument": {"region": "AFTER_LOOP"}, "spec": {"expr": "True"}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::UnknownRegion);
        assert_eq!(v.rejected[0].field, "instrument.region");
    }

    #[test]
    fn anchors_match_regions() {
        let v = one(r#"{"category": "RELATION", "instrument": {"region": "AFTER_DEF", "anchor": {"loop_id": 1}}, "spec": {"expr": "True"}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::AnchorMismatch);
        let v = one(r#"{"category": "RELATION", "instrument": {"region": "AFTER_DEF", "anchor": {"var": "m"}}, "spec": {"expr": "True"}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::BadSsaName);
        let v = one(r#"{"category": "INVARIANT_LOOP", "instrument": {"region": "LOOP_HEAD", "anchor": {"loop_id": 0}}, "spec": {"expr": "True"}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::WrongType);
        let v = one(r#"{"category": "VALUE_RANGE", "instrument": {"region": "LINE", "anchor": {"line": 5}}, "spec": {"expr": "True"}}"#);
        assert_eq!(v.accepted[0].anchor, Anchor::line(5));
        assert_eq!(v.accepted[0].id, "c1");
    }

    #[test]
    fn strict_fields_with_meta_escape_hatch() {
        let v = one(r#"{"category": "RELATION", "instrument": {"region": "ENTRY"}, "spec": {"expr": "True"}, "confidence": 0.9}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::UnknownField);
        let v = one(r#"{"category": "RELATION", "instrument": {"region": "ENTRY"}, "spec": {"expr": "True"}, "meta": {"confidence": 0.9}}"#);
        assert_eq!(v.accepted.len(), 1);
        let v = one(r#"{"category": "RELATION", "instrument": {"region": "ENTRY"}, "spec": {"expr": "  "}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::EmptySpec);
        let v = one(r#"{"category": "RELATION", "instrument": {"region": "ENTRY"}, "spec": {"expr": "__import__('os')"}}"#);
        assert_eq!(v.rejected[0].reason, RejectReason::UnsafeExpr);
    }

    #[test]
    fn duplicate_ids_keep_the_first() {
        let c = r#"{"id": "k", "category": "RELATION", "instrument": {"region": "ENTRY"}, "spec": {"expr": "True"}}"#;
        let v = validate_ir(&format!(r#"{{"constraints": [{c}, {c}]}}"#)).unwrap();
        assert_eq!(v.accepted.len(), 1);
        assert_eq!(v.rejected[0].reason, RejectReason::DuplicateId);
        assert_eq!(v.rejected[0].index, 1);
    }

    #[test]
    fn round_trips_through_to_document() {
        let c = Constraint {
            id: "c3".into(),
            category: Category::ValueRange,
            region: Region::AfterDef,
            anchor: Anchor::var("shifted__1"),
            expr: "all(v <= 0 for v in shifted__1)".into(),
            intent: "stabilized values are non-positive".into(),
        };
        let v = validate_ir(&super::super::to_document(std::slice::from_ref(&c))).unwrap();
        assert_eq!(v.accepted, vec![c]);
    }
}
