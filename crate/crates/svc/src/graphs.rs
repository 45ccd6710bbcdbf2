//! Graph references: inline seurat-graph-v1 objects or short spec strings.

use std::path::Path;

use seurat_core::gen::{
    cfi, complete_graph, default_twist, named_example, stockmeyer_pair, tournament_t, Family, NamedExample,
};
use seurat_core::graph::{Digraph, GraphFile, Labels};
use seurat_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// A graph given inline or by spec string.
///
/// Spec strings: `fig6`, `named:fig6`, `stars#1` (member of a named pair),
/// `tournament:3`, `stockmeyer:D:2:1`, `stockmeyer*:D:2:1`, `cfi:4`,
/// `cfi~:4` (twisted), and `file:<path>` where files are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphRef {
    Inline(GraphFile),
    Spec(String),
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("bad {what} {s:?}")))
}

fn stockmeyer_parts(rest: &str) -> Result<(Family, u32, u32)> {
    let p: Vec<&str> = rest.split(':').collect();
    if p.len() != 3 {
        return Err(Error::Format(format!("expected <family>:<m>:<n>, got {rest:?}")));
    }
    Ok((p[0].parse()?, parse_num(p[1], "m")?, parse_num(p[2], "n")?))
}

fn cfi_member(n: &str, twisted: bool) -> Result<(Digraph, Labels)> {
    let base = complete_graph(parse_num(n, "cfi order")?);
    let twist = if twisted { default_twist(&base) } else { None };
    let c = cfi(&base, twist)?;
    let labels = c.label_table();
    Ok((c.graph, labels))
}

/// Resolves one graph. File access is only honoured when `allow_files`.
pub fn resolve(r: &GraphRef, allow_files: bool) -> Result<(Digraph, Labels)> {
    match r {
        GraphRef::Inline(f) => f.clone().into_graph(),
        GraphRef::Spec(s) => resolve_spec(s, allow_files),
    }
}

pub fn resolve_spec(spec: &str, allow_files: bool) -> Result<(Digraph, Labels)> {
    if let Some(path) = spec.strip_prefix("file:") {
        return read_file(path, allow_files);
    }
    if let Some(rest) = spec.strip_prefix("stockmeyer*:") {
        let (f, m, n) = stockmeyer_parts(rest)?;
        return Ok((stockmeyer_pair(f, m, n)?.1, Labels::new()));
    }
    if let Some(rest) = spec.strip_prefix("stockmeyer:") {
        let (f, m, n) = stockmeyer_parts(rest)?;
        return Ok((stockmeyer_pair(f, m, n)?.0, Labels::new()));
    }
    if let Some(rest) = spec.strip_prefix("tournament:") {
        return Ok((tournament_t(parse_num(rest, "tournament exponent")?)?, Labels::new()));
    }
    if let Some(rest) = spec.strip_prefix("cfi~:") {
        return cfi_member(rest, true);
    }
    if let Some(rest) = spec.strip_prefix("cfi:") {
        return cfi_member(rest, false);
    }
    let name = spec.strip_prefix("named:").unwrap_or(spec);
    if let Some((base, idx)) = name.split_once('#') {
        return match (named_example(base)?, idx) {
            (NamedExample::Pair(g, _), "0") => Ok(g),
            (NamedExample::Pair(_, h), "1") => Ok(h),
            _ => Err(Error::Format(format!("{spec:?}: expected a named pair with #0 or #1"))),
        };
    }
    if allow_files && Path::new(spec).is_file() {
        return read_file(spec, true);
    }
    match named_example(name)? {
        NamedExample::Single(g, l) => Ok((g, l)),
        NamedExample::Pair(..) => Err(Error::Format(format!("{spec:?} names a pair; pick a member with #0 or #1"))),
    }
}

fn read_file(path: &str, allow_files: bool) -> Result<(Digraph, Labels)> {
    if !allow_files {
        return Err(Error::Config("file references are not accepted here".into()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{path}: {e}")))?;
    seurat_core::graph::parse_graph(&text)
}

/// Resolves a pair spec: a named pair (`stars`), `stockmeyer:D:2:1`
/// (Z and Z*), or `cfi:4` (untwisted and twisted).
pub fn resolve_pair(spec: &str) -> Result<(Digraph, Digraph)> {
    if let Some(rest) = spec.strip_prefix("stockmeyer:") {
        let (f, m, n) = stockmeyer_parts(rest)?;
        return stockmeyer_pair(f, m, n);
    }
    if let Some(rest) = spec.strip_prefix("cfi:") {
        return Ok((cfi_member(rest, false)?.0, cfi_member(rest, true)?.0));
    }
    named_example(spec.strip_prefix("named:").unwrap_or(spec))?.pair()
}

#[cfg(test)]
mod tests {
    use super::*;
    use seurat_core::iso::are_isomorphic;

    #[test]
    fn specs_resolve() {
        assert_eq!(resolve_spec("fig6", false).unwrap().0.n(), 6);
        assert_eq!(resolve_spec("named:stars#1", false).unwrap().0.n(), 7);
        assert_eq!(resolve_spec("tournament:2", false).unwrap().0.n(), 4);
        let (g, h) = resolve_pair("stockmeyer:D:2:1").unwrap();
        assert_eq!(resolve_spec("stockmeyer:D:2:1", false).unwrap().0, g);
        assert_eq!(resolve_spec("stockmeyer*:D:2:1", false).unwrap().0, h);
        let (a, b) = resolve_pair("cfi:3").unwrap();
        assert!(!are_isomorphic(&a, &b));
        assert!(resolve_spec("stars", false).is_err());
        assert!(resolve_spec("file:/etc/hostname", false).is_err());
        assert!(resolve_spec("nonsense", false).is_err());
    }

    #[test]
    fn inline_and_spec_deserialize() {
        let r: GraphRef = serde_json::from_str(r#""K3""#).unwrap();
        assert_eq!(r, GraphRef::Spec("K3".into()));
        let r: GraphRef =
            serde_json::from_str(r#"{"format":"seurat-graph-v1","directed":true,"n":2,"edges":[[0,1]]}"#).unwrap();
        assert_eq!(resolve(&r, false).unwrap().0.edge_count(), 1);
    }
}
