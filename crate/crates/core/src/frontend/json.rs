//! JSON export and import of the AST document form.

use super::ast::SourceUnit;
use super::generic::{lower_unit, raise_unit, AstNode, SchemaError};

/// Deterministic JSON document for `unit`; attribute keys are sorted.
pub fn ast_to_json(unit: &SourceUnit) -> String {
    let mut out = serde_json::to_string_pretty(&lower_unit(unit)).expect("AST documents always serialize");
    out.push('\n');
    out
}

pub fn json_to_ast(doc: &str) -> Result<SourceUnit, SchemaError> {
    let node: AstNode = serde_json::from_str(doc).map_err(|e| SchemaError {
        path: "$".into(),
        message: format!("malformed document at line {} column {}: {e}", e.line(), e.column()),
    })?;
    raise_unit(&node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn empty_unit_document() {
        let unit = parse("", "e.msol").unwrap();
        let doc = ast_to_json(&unit);
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["children"], serde_json::json!([]));
        assert_eq!(json_to_ast(&doc).unwrap(), unit);
    }

    #[test]
    fn truncated_document_is_a_schema_error() {
        let unit = parse("contract C { uint x; }", "c.msol").unwrap();
        let doc = ast_to_json(&unit);
        let err = json_to_ast(&doc[..doc.len() / 2]).unwrap_err();
        assert_eq!(err.path, "$");
    }

    #[test]
    fn output_is_deterministic() {
        let unit = parse("contract C { uint x; function f() public { x = 1; } }", "c.msol").unwrap();
        assert_eq!(ast_to_json(&unit), ast_to_json(&unit.clone()));
    }
}
