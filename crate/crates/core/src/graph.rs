//! Finite digraphs with bit-matrix adjacency.

use std::collections::BTreeMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertex sets are bitsets over `0..n`.
pub type VertexSet = FixedBitSet;

/// Generator-level vertex names, keyed by vertex index.
pub type Labels = BTreeMap<usize, String>;

/// Builds a vertex set of capacity `n` from indices.
pub fn vset(n: usize, vs: impl IntoIterator<Item = usize>) -> VertexSet {
    let mut s = FixedBitSet::with_capacity(n);
    for v in vs {
        s.insert(v);
    }
    s
}

/// The full vertex set `0..n`.
pub fn full_set(n: usize) -> VertexSet {
    let mut s = FixedBitSet::with_capacity(n);
    s.insert_range(..);
    s
}

/// (in-degree, out-degree) of a vertex, possibly relative to a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tally {
    pub in_deg: usize,
    pub out_deg: usize,
}

impl Tally {
    pub const fn new(in_deg: usize, out_deg: usize) -> Self {
        Tally { in_deg, out_deg }
    }
}

impl fmt::Display for Tally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.in_deg, self.out_deg)
    }
}

impl Serialize for Tally {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.in_deg, self.out_deg).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tally {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (i, o) = <(usize, usize)>::deserialize(d)?;
        Ok(Tally::new(i, o))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    In,
    Out,
}

/// A finite sequence of closure steps.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectionSeq(pub Vec<Direction>);

impl DirectionSeq {
    pub fn new(steps: Vec<Direction>) -> Self {
        DirectionSeq(steps)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub strongly_connected: bool,
    pub weakly_connected: bool,
}

/// Immutable digraph on vertices `0..n`. Loops are allowed; undirected graphs
/// are stored with a symmetric matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Digraph {
    n: usize,
    directed: bool,
    out: Vec<FixedBitSet>,
    inn: Vec<FixedBitSet>,
}

impl fmt::Debug for Digraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digraph(n={}, directed={}, edges=[", self.n, self.directed)?;
        for (i, (u, v)) in self.edges().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{u}->{v}")?;
        }
        write!(f, "])")
    }
}

impl Digraph {
    pub fn new(n: usize, edges: &[(usize, usize)], directed: bool) -> Result<Self> {
        let mut g = Digraph::edgeless(n, directed);
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
            }
            g.set_edge(u, v);
            if !directed {
                g.set_edge(v, u);
            }
        }
        Ok(g)
    }

    pub fn edgeless(n: usize, directed: bool) -> Self {
        Digraph {
            n,
            directed,
            out: vec![FixedBitSet::with_capacity(n); n],
            inn: vec![FixedBitSet::with_capacity(n); n],
        }
    }

    /// Parses rows of '0'/'1' characters; whitespace inside rows is ignored.
    pub fn from_rows(rows: &[&str], directed: bool) -> Result<Self> {
        let n = rows.len();
        let mut edges = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let bits: Vec<char> = row.chars().filter(|c| !c.is_whitespace()).collect();
            if bits.len() != n {
                return Err(Error::Format(format!("row {i} has {} entries, expected {n}", bits.len())));
            }
            for (j, c) in bits.into_iter().enumerate() {
                match c {
                    '1' => edges.push((i, j)),
                    '0' => {}
                    other => return Err(Error::Format(format!("bad matrix entry {other:?}"))),
                }
            }
        }
        let g = Digraph::new(n, &edges, true)?;
        if !directed && !g.is_symmetric() {
            return Err(Error::Format("undirected matrix is not symmetric".into()));
        }
        Ok(Digraph { directed, ..g })
    }

    fn set_edge(&mut self, u: usize, v: usize) {
        self.out[u].insert(v);
        self.inn[v].insert(u);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u].contains(v)
    }

    pub fn has_loop(&self, v: usize) -> bool {
        self.out[v].contains(v)
    }

    pub fn out_row(&self, u: usize) -> &FixedBitSet {
        &self.out[u]
    }

    pub fn in_row(&self, v: usize) -> &FixedBitSet {
        &self.inn[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.out[u].ones().map(move |v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(|r| r.count_ones(..)).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|u| self.out[u] == self.inn[u])
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.n {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Tally of `v` relative to `y` (all vertices when `None`).
    pub fn tally(&self, v: usize, y: Option<&VertexSet>) -> Result<Tally> {
        self.check(v)?;
        Ok(self.tally_unchecked(v, y))
    }

    pub(crate) fn tally_unchecked(&self, v: usize, y: Option<&VertexSet>) -> Tally {
        match y {
            None => Tally::new(self.inn[v].count_ones(..), self.out[v].count_ones(..)),
            Some(y) => Tally::new(
                self.inn[v].intersection_count(y),
                self.out[v].intersection_count(y),
            ),
        }
    }

    pub fn tallies(&self) -> Vec<Tally> {
        (0..self.n).map(|v| self.tally_unchecked(v, None)).collect()
    }

    /// Multiset of tallies relative to `y` over the vertices of `x`.
    pub fn sigma(&self, x: &VertexSet, y: Option<&VertexSet>) -> BTreeMap<Tally, usize> {
        let mut m = BTreeMap::new();
        for v in x.ones().filter(|&v| v < self.n) {
            *m.entry(self.tally_unchecked(v, y)).or_insert(0) += 1;
        }
        m
    }

    pub fn eta_step(&self, s: &VertexSet, d: Direction) -> VertexSet {
        let mut r = s.clone();
        r.grow(self.n);
        for u in s.ones() {
            match d {
                Direction::Out => r.union_with(&self.out[u]),
                Direction::In => r.union_with(&self.inn[u]),
            }
        }
        r
    }

    /// Folds closure steps left to right; the empty sequence returns `s`.
    pub fn eta(&self, s: &VertexSet, dirs: &DirectionSeq) -> VertexSet {
        let mut cur = s.clone();
        cur.grow(self.n);
        for &d in &dirs.0 {
            cur = self.eta_step(&cur, d);
        }
        cur
    }

    fn reach(&self, start: usize, symmetric: bool, forward: bool) -> FixedBitSet {
        let mut seen = FixedBitSet::with_capacity(self.n);
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(u) = stack.pop() {
            let mut next = if forward { self.out[u].clone() } else { self.inn[u].clone() };
            if symmetric {
                next.union_with(if forward { &self.inn[u] } else { &self.out[u] });
            }
            next.difference_with(&seen);
            for v in next.ones() {
                seen.insert(v);
                stack.push(v);
            }
        }
        seen
    }

    /// Reflexive-transitive out-closure of `v`.
    pub fn reachable_from(&self, v: usize) -> VertexSet {
        self.reach(v, false, true)
    }

    /// Reflexive-transitive closure of `v` under the symmetric closure of E.
    pub fn weak_component(&self, v: usize) -> VertexSet {
        self.reach(v, true, true)
    }

    pub fn connectivity(&self) -> Connectivity {
        if self.n == 0 {
            return Connectivity { strongly_connected: true, weakly_connected: true };
        }
        let full = self.n;
        Connectivity {
            strongly_connected: self.reach(0, false, true).count_ones(..) == full
                && self.reach(0, false, false).count_ones(..) == full,
            weakly_connected: self.reach(0, true, true).count_ones(..) == full,
        }
    }

    /// Induced subgraph on `vs`, renumbered in the given order.
    pub fn induced(&self, vs: &[usize]) -> Digraph {
        let mut g = Digraph::edgeless(vs.len(), self.directed);
        for (i, &u) in vs.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                if self.has_edge(u, v) {
                    g.set_edge(i, j);
                }
            }
        }
        g
    }

    pub fn delete_vertex(&self, v: usize) -> Digraph {
        let keep: Vec<usize> = (0..self.n).filter(|&u| u != v).collect();
        self.induced(&keep)
    }

    /// Image of the graph under `perm` (vertex `v` becomes `perm[v]`).
    pub fn relabel(&self, perm: &[usize]) -> Digraph {
        let mut g = Digraph::edgeless(self.n, self.directed);
        for (u, v) in self.edges() {
            g.set_edge(perm[u], perm[v]);
        }
        g
    }

    pub fn with_directed(&self, directed: bool) -> Digraph {
        Digraph { directed, ..self.clone() }
    }

    /// Row `u` as a 64-bit mask; only valid for `n <= 64`.
    pub fn out_mask(&self, u: usize) -> u64 {
        mask_of(&self.out[u])
    }

    pub fn in_mask(&self, v: usize) -> u64 {
        mask_of(&self.inn[v])
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.n)
            .map(|u| (0..self.n).map(|v| if self.has_edge(u, v) { '1' } else { '0' }).collect())
            .collect()
    }

    pub fn to_json(&self, labels: Option<&Labels>) -> GraphFile {
        let edges = if self.directed {
            self.edges().map(|(u, v)| [u, v]).collect()
        } else {
            self.edges().filter(|&(u, v)| u <= v).map(|(u, v)| [u, v]).collect()
        };
        GraphFile {
            format: GRAPH_FORMAT.to_string(),
            directed: self.directed,
            n: self.n,
            edges,
            labels: labels
                .filter(|l| !l.is_empty())
                .map(|l| l.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()),
        }
    }
}

/// Packs a bitset of capacity at most 64 into a word.
pub fn mask_of(s: &FixedBitSet) -> u64 {
    s.as_slice().first().map_or(0, |&w| w as u64)
}

pub fn set_of_mask(n: usize, mask: u64) -> VertexSet {
    vset(n, (0..n.min(64)).filter(|&i| mask >> i & 1 == 1))
}

pub fn mask_vertices(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

pub const GRAPH_FORMAT: &str = "seurat-graph-v1";

/// On-disk graph representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub format: String,
    pub directed: bool,
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<String, String>>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<(Digraph, Labels)> {
        if self.format != GRAPH_FORMAT {
            return Err(Error::Format(format!("unknown graph format {:?}", self.format)));
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let g = Digraph::new(self.n, &edges, self.directed)?;
        let mut labels = Labels::new();
        for (k, v) in self.labels.unwrap_or_default() {
            let idx: usize = k
                .parse()
                .map_err(|_| Error::Format(format!("label key {k:?} is not a vertex index")))?;
            if idx >= self.n {
                return Err(Error::VertexOutOfRange { vertex: idx, n: self.n });
            }
            labels.insert(idx, v);
        }
        Ok((g, labels))
    }
}

pub fn parse_graph(json: &str) -> Result<(Digraph, Labels)> {
    let f: GraphFile = serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))?;
    f.into_graph()
}

pub fn write_graph(g: &Digraph, labels: Option<&Labels>) -> String {
    serde_json::to_string(&g.to_json(labels)).expect("graph serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain3() -> Digraph {
        Digraph::new(3, &[(0, 1), (1, 2)], true).unwrap()
    }

    #[test]
    fn construction() {
        let g = Digraph::new(2, &[(0, 1)], true).unwrap();
        assert!(g.has_edge(0, 1) && !g.has_edge(1, 0));
        let l = Digraph::new(1, &[(0, 0)], true).unwrap();
        assert!(l.has_loop(0));
        let u = Digraph::new(3, &[(0, 1), (1, 2)], false).unwrap();
        assert!(u.has_edge(1, 0) && u.is_symmetric());
        let dup = Digraph::new(2, &[(0, 1), (0, 1)], true).unwrap();
        assert_eq!(dup.edge_count(), 1);
        assert!(matches!(
            Digraph::new(2, &[(0, 2)], true),
            Err(Error::VertexOutOfRange { vertex: 2, n: 2 })
        ));
    }

    #[test]
    fn loop_counts_once_each_way() {
        let g = Digraph::new(2, &[(0, 0), (0, 1)], true).unwrap();
        assert_eq!(g.tally(0, None).unwrap(), Tally::new(1, 2));
        let y = vset(2, [1]);
        assert_eq!(g.tally(0, Some(&y)).unwrap(), Tally::new(0, 1));
        assert!(g.tally(5, None).is_err());
    }

    #[test]
    fn eta_examples() {
        let g = chain3();
        let out = g.eta(&vset(3, [0]), &DirectionSeq(vec![Direction::Out]));
        assert_eq!(out.ones().collect::<Vec<_>>(), vec![0, 1]);
        let s = vset(3, [1]);
        assert_eq!(g.eta(&s, &DirectionSeq::default()), s);
        let back = g.eta(&vset(3, [2]), &DirectionSeq(vec![Direction::In, Direction::In]));
        assert_eq!(back.count_ones(..), 3);
    }

    #[test]
    fn connectivity_examples() {
        let c2 = Digraph::new(2, &[(0, 1), (1, 0)], true).unwrap();
        assert_eq!(c2.connectivity(), Connectivity { strongly_connected: true, weakly_connected: true });
        let e = Digraph::new(2, &[(0, 1)], true).unwrap();
        assert_eq!(e.connectivity(), Connectivity { strongly_connected: false, weakly_connected: true });
        let d = Digraph::edgeless(2, true);
        assert_eq!(d.connectivity(), Connectivity { strongly_connected: false, weakly_connected: false });
    }

    #[test]
    fn json_round_trip() {
        let g = Digraph::new(3, &[(0, 1), (1, 2), (2, 2)], false).unwrap();
        let mut labels = Labels::new();
        labels.insert(0, "v1".into());
        let s = write_graph(&g, Some(&labels));
        let (h, l) = parse_graph(&s).unwrap();
        assert_eq!(g, h);
        assert_eq!(l, labels);
        let bad = s.replace(GRAPH_FORMAT, "seurat-graph-v2");
        assert!(parse_graph(&bad).is_err());
        let extra = r#"{"format":"seurat-graph-v1","directed":true,"n":1,"edges":[],"colour":1}"#;
        assert!(parse_graph(extra).is_err());
    }

    #[test]
    fn rows_round_trip() {
        let g = Digraph::from_rows(&["010", "001", "100"], true).unwrap();
        assert_eq!(g.to_rows(), vec!["010", "001", "100"]);
        assert!(Digraph::from_rows(&["01", "00"], false).is_err());
    }
}
