//! Graphviz dump of a CPG.

use std::fmt::Write;

use super::Cpg;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders every node (id, labels, name) and every edge (kind as label).
pub fn to_dot(cpg: &Cpg) -> String {
    let mut out = String::from("digraph cpg {\n");
    for n in cpg.nodes() {
        let labels: Vec<String> = n.labels.iter().map(|l| l.to_string()).collect();
        let mut text = format!("{} {}", n.id, n.kind);
        if !labels.is_empty() {
            let _ = write!(text, "\\n[{}]", labels.join(","));
        }
        if let Some(name) = n.name() {
            let _ = write!(text, "\\nname={}", escape(name));
        }
        let _ = writeln!(out, "  n{} [label=\"{}\"];", n.id, text);
    }
    for e in cpg.edges() {
        let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.src, e.dst, e.kind);
    }
    out.push_str("}\n");
    out
}
