//! Graph families: tournaments, Stockmeyer pairs, CFI graphs and the named
//! figure graphs. Vertices are 0-based; vertex `i` is `v_{i+1}` in 1-based notation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Digraph, Labels, VertexSet};

/// `z` divided by the largest power of two dividing it.
pub fn odd(z: i64) -> Result<i64> {
    if z == 0 {
        return Err(Error::Config("odd(0) is undefined".into()));
    }
    Ok(z >> z.trailing_zeros())
}

fn arc(i: i64, j: i64) -> bool {
    i != j && odd(j - i).map(|o| o.rem_euclid(4) == 1).unwrap_or(false)
}

pub const MAX_TOURNAMENT_EXPONENT: u32 = 12;

/// The tournament T_k on 2^k vertices.
pub fn tournament_t(k: u32) -> Result<Digraph> {
    if k > MAX_TOURNAMENT_EXPONENT {
        return Err(Error::SizeGuard(format!("T_{k} exceeds 2^{MAX_TOURNAMENT_EXPONENT} vertices")));
    }
    let n = 1usize << k;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if arc(i as i64, j as i64) {
                edges.push((i, j));
            }
        }
    }
    Digraph::new(n, &edges, true)
}

pub fn index_labels(n: usize, prefix: &str, base: usize) -> Labels {
    (0..n).map(|i| (i, format!("{prefix}{}", i + base))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StockmeyerParams {
    pub m: u32,
    pub n: u32,
    pub w: bool,
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

/// Entry of the symbolic matrix M_{m,n}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sym {
    Zero,
    One,
    W,
    X,
    Y,
    Z,
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sym::Zero => "0",
            Sym::One => "1",
            Sym::W => "w",
            Sym::X => "x",
            Sym::Y => "y",
            Sym::Z => "z",
        })
    }
}

fn check_exponents(m: u32, n: u32) -> Result<()> {
    if n >= m {
        return Err(Error::Config(format!("Stockmeyer exponents need n < m, got m={m}, n={n}")));
    }
    if m > MAX_TOURNAMENT_EXPONENT {
        return Err(Error::SizeGuard(format!("m={m} too large")));
    }
    Ok(())
}

/// The symbolic matrix M_{m,n}, row-major, 0-based.
pub fn symbolic_matrix(m: u32, n: u32) -> Result<Vec<Vec<Sym>>> {
    check_exponents(m, n)?;
    let big = 1i64 << m;
    let p = big + (1i64 << n);
    let mut rows = Vec::with_capacity(p as usize);
    for i in 1..=p {
        let mut row = Vec::with_capacity(p as usize);
        for j in 1..=p {
            let same_block = (i <= big) == (j <= big);
            let even = (i + j) % 2 == 0;
            row.push(if same_block {
                if arc(i, j) {
                    Sym::One
                } else {
                    Sym::Zero
                }
            } else if i <= big {
                if even {
                    Sym::W
                } else {
                    Sym::X
                }
            } else if even {
                Sym::Y
            } else {
                Sym::Z
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn stockmeyer_graph(params: StockmeyerParams) -> Result<Digraph> {
    let rows = symbolic_matrix(params.m, params.n)?;
    let p = rows.len();
    let mut edges = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            let on = match s {
                Sym::Zero => false,
                Sym::One => true,
                Sym::W => params.w,
                Sym::X => params.x,
                Sym::Y => params.y,
                Sym::Z => params.z,
            };
            if on {
                edges.push((i, j));
            }
        }
    }
    Digraph::new(p, &edges, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::A, Family::B, Family::C, Family::D, Family::E, Family::F];

    /// (w,x,y,z) for the unstarred and starred members.
    pub fn bits(self) -> ([bool; 4], [bool; 4]) {
        let b = |s: &str| -> [bool; 4] {
            let v: Vec<bool> = s.chars().map(|c| c == '1').collect();
            [v[0], v[1], v[2], v[3]]
        };
        let (z, zs) = match self {
            Family::A => ("1000", "0100"),
            Family::B => ("0010", "0001"),
            Family::C => ("1010", "0101"),
            Family::D => ("1001", "0110"),
            Family::E => ("1110", "1101"),
            Family::F => ("1011", "0111"),
        };
        (b(z), b(zs))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_end_matches('*') {
            "A" | "a" => Ok(Family::A),
            "B" | "b" => Ok(Family::B),
            "C" | "c" => Ok(Family::C),
            "D" | "d" => Ok(Family::D),
            "E" | "e" => Ok(Family::E),
            "F" | "f" => Ok(Family::F),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

pub fn family_params(family: Family, star: bool, m: u32, n: u32) -> StockmeyerParams {
    let (z, zs) = family.bits();
    let [w, x, y, z] = if star { zs } else { z };
    StockmeyerParams { m, n, w, x, y, z }
}

/// (Z_{m,n}, Z*_{m,n}).
pub fn stockmeyer_pair(family: Family, m: u32, n: u32) -> Result<(Digraph, Digraph)> {
    Ok((
        stockmeyer_graph(family_params(family, false, m, n))?,
        stockmeyer_graph(family_params(family, true, m, n))?,
    ))
}

/// Vertex of a CFI graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CfiLabel {
    /// i(v, S) with S an even set of neighbours of v.
    Internal { base: usize, subset: Vec<usize> },
    /// a(v, w) or b(v, w).
    External { base: usize, neighbour: usize, letter: char },
}

impl CfiLabel {
    pub fn is_internal(&self) -> bool {
        matches!(self, CfiLabel::Internal { .. })
    }

    pub fn base(&self) -> usize {
        match self {
            CfiLabel::Internal { base, .. } | CfiLabel::External { base, .. } => *base,
        }
    }
}

impl fmt::Display for CfiLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfiLabel::Internal { base, subset } => {
                let s: Vec<String> = subset.iter().map(|x| x.to_string()).collect();
                write!(f, "i({base},{{{}}})", s.join(","))
            }
            CfiLabel::External { base, neighbour, letter } => write!(f, "{letter}({base},{neighbour})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CfiGraph {
    pub graph: Digraph,
    pub labels: Vec<CfiLabel>,
}

impl CfiGraph {
    pub fn label_table(&self) -> Labels {
        self.labels.iter().enumerate().map(|(i, l)| (i, l.to_string())).collect()
    }

    pub fn find(&self, label: &CfiLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn internal(&self, base: usize, subset: &[usize]) -> Option<usize> {
        self.find(&CfiLabel::Internal { base, subset: subset.to_vec() })
    }

    pub fn external(&self, base: usize, neighbour: usize, letter: char) -> Option<usize> {
        self.find(&CfiLabel::External { base, neighbour, letter })
    }
}

/// Lexicographically smallest edge {u,v} with u < v.
pub fn default_twist(base: &Digraph) -> Option<(usize, usize)> {
    base.edges().find(|&(u, v)| u < v)
}

/// Γ(base), or Γ̃(base) twisted at `twist`.
pub fn cfi(base: &Digraph, twist: Option<(usize, usize)>) -> Result<CfiGraph> {
    if base.is_directed() || !base.is_symmetric() {
        return Err(Error::Config("CFI base graph must be undirected".into()));
    }
    let n = base.n();
    for v in 0..n {
        if base.has_loop(v) {
            return Err(Error::Config("CFI base graph must be irreflexive".into()));
        }
        if base.out_row(v).count_ones(..) == 0 {
            return Err(Error::Config(format!("base vertex {v} has degree 0")));
        }
    }
    let twist = match twist {
        Some((u, v)) => {
            if u >= n || v >= n || !base.has_edge(u, v) {
                return Err(Error::Config(format!("twist edge ({u},{v}) is not a base edge")));
            }
            Some((u.min(v), u.max(v)))
        }
        None => None,
    };
    let mut labels = Vec::new();
    for v in 0..n {
        let nb: Vec<usize> = base.out_row(v).ones().collect();
        for mask in 0u32..(1 << nb.len()) {
            if mask.count_ones() % 2 == 0 {
                let subset = (0..nb.len()).filter(|b| mask >> b & 1 == 1).map(|b| nb[b]).collect();
                labels.push(CfiLabel::Internal { base: v, subset });
            }
        }
        for &w in &nb {
            labels.push(CfiLabel::External { base: v, neighbour: w, letter: 'a' });
            labels.push(CfiLabel::External { base: v, neighbour: w, letter: 'b' });
        }
    }
    let index = |l: &CfiLabel| labels.iter().position(|x| x == l).expect("label exists");
    let mut edges = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if let CfiLabel::Internal { base: v, subset } = l {
            for w in base.out_row(*v).ones() {
                let letter = if subset.contains(&w) { 'a' } else { 'b' };
                edges.push((i, index(&CfiLabel::External { base: *v, neighbour: w, letter })));
            }
        }
    }
    for (u, v) in base.edges().filter(|&(u, v)| u < v) {
        let twisted = twist == Some((u, v));
        for letter in ['a', 'b'] {
            let other = if twisted { if letter == 'a' { 'b' } else { 'a' } } else { letter };
            edges.push((
                index(&CfiLabel::External { base: u, neighbour: v, letter }),
                index(&CfiLabel::External { base: v, neighbour: u, letter: other }),
            ));
        }
    }
    let graph = Digraph::new(labels.len(), &edges, false)?;
    Ok(CfiGraph { graph, labels })
}

pub fn complete_graph(n: usize) -> Digraph {
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect();
    Digraph::new(n, &edges, false).expect("valid")
}

pub fn cycle_graph(n: usize) -> Digraph {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Digraph::new(n, &edges, false).expect("valid")
}

/// True iff removing `s` leaves no component with more than |G|/2 vertices.
pub fn is_separator(g: &Digraph, s: &VertexSet) -> bool {
    let n = g.n();
    let mut seen = s.clone();
    seen.grow(n);
    for v in 0..n {
        if seen.contains(v) {
            continue;
        }
        let mut stack = vec![v];
        seen.insert(v);
        let mut size = 0;
        while let Some(u) = stack.pop() {
            size += 1;
            let mut next = g.out_row(u).clone();
            next.union_with(g.in_row(u));
            next.difference_with(&seen);
            for w in next.ones() {
                seen.insert(w);
                stack.push(w);
            }
        }
        if 2 * size > n {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug)]
pub enum NamedExample {
    Single(Digraph, Labels),
    Pair((Digraph, Labels), (Digraph, Labels)),
}

impl NamedExample {
    pub fn pair(self) -> Result<(Digraph, Digraph)> {
        match self {
            NamedExample::Pair((g, _), (h, _)) => Ok((g, h)),
            NamedExample::Single(..) => Err(Error::NotApplicable("named example is a single graph".into())),
        }
    }

    pub fn single(self) -> Result<Digraph> {
        match self {
            NamedExample::Single(g, _) => Ok(g),
            NamedExample::Pair(..) => Err(Error::NotApplicable("named example is a pair".into())),
        }
    }
}

const STAR_NAMES: [&str; 7] = ["C", "TL", "TR", "R", "BR", "BL", "L"];

fn star_labels() -> Labels {
    STAR_NAMES.iter().enumerate().map(|(i, s)| (i, s.to_string())).collect()
}

/// Wheel on six spokes: centre 0, outer cycle TL-TR-R-BR-BL-L.
pub fn fig4() -> Digraph {
    let mut e: Vec<(usize, usize)> = (1..=6).map(|i| (0, i)).collect();
    e.extend((1..=6).map(|i| (i, i % 6 + 1)));
    Digraph::new(7, &e, false).expect("valid")
}

/// Centre joined to two triangles {TL,BL,R} and {TR,BR,L}.
pub fn fig5() -> Digraph {
    let mut e: Vec<(usize, usize)> = (1..=6).map(|i| (0, i)).collect();
    e.extend([(1, 5), (5, 3), (3, 1), (2, 4), (4, 6), (6, 2)]);
    Digraph::new(7, &e, false).expect("valid")
}

pub fn fig1() -> (Digraph, Digraph) {
    let chains = [(0, 1), (1, 2), (3, 4), (4, 5)];
    let g = Digraph::new(6, &chains, true).expect("valid");
    let mut he = chains.to_vec();
    he.extend([(6, 7), (7, 6)]);
    let h = Digraph::new(8, &he, true).expect("valid");
    (g, h)
}

pub fn fig6() -> Digraph {
    Digraph::from_rows(&["011110", "001110", "000111", "000011", "000001", "110000"], true).expect("valid")
}

pub fn fig7() -> Digraph {
    Digraph::from_rows(&["011110", "001110", "000110", "000011", "000001", "111000"], true).expect("valid")
}

pub const NAMED_EXAMPLES: &[&str] = &["fig1", "fig4", "fig5", "stars", "fig6", "fig7", "ramachandran", "K<n>", "C<n>", "T<k>"];

pub fn named_example(name: &str) -> Result<NamedExample> {
    let plain = |g: Digraph| {
        let n = g.n();
        NamedExample::Single(g, index_labels(n, "v", 0))
    };
    Ok(match name {
        "fig1" => {
            let (g, h) = fig1();
            NamedExample::Pair((g, index_labels(6, "g", 0)), (h, index_labels(8, "h", 0)))
        }
        "fig4" => NamedExample::Single(fig4(), star_labels()),
        "fig5" => NamedExample::Single(fig5(), star_labels()),
        "stars" => NamedExample::Pair((fig4(), star_labels()), (fig5(), star_labels())),
        "fig6" => plain(fig6()),
        "fig7" => NamedExample::Single(fig7(), index_labels(6, "w", 0)),
        "ramachandran" => NamedExample::Pair((fig6(), index_labels(6, "v", 0)), (fig7(), index_labels(6, "w", 0))),
        _ => {
            let parse = |p: &str| -> Option<usize> { name.strip_prefix(p).and_then(|s| s.parse().ok()) };
            if let Some(k) = parse("K") {
                plain(complete_graph(k))
            } else if let Some(k) = parse("C").filter(|&k| k >= 3) {
                plain(cycle_graph(k))
            } else if let Some(k) = parse("T") {
                let g = tournament_t(k as u32)?;
                let n = g.n();
                NamedExample::Single(g, index_labels(n, "v", 1))
            } else {
                return Err(Error::UnknownName(name.to_string()));
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{vset, Tally};

    #[test]
    fn odd_examples() {
        assert_eq!(odd(12).unwrap(), 3);
        assert_eq!(odd(8).unwrap(), 1);
        assert_eq!(odd(-6).unwrap(), -3);
        assert!(odd(0).is_err());
    }

    #[test]
    fn small_tournaments() {
        let t1 = tournament_t(1).unwrap();
        assert_eq!(t1.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        let t2 = tournament_t(2).unwrap();
        let mut e: Vec<(usize, usize)> = t2.edges().map(|(u, v)| (u + 1, v + 1)).collect();
        e.sort();
        assert_eq!(e, vec![(1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (4, 1)]);
        assert_eq!(t2.tally(0, None).unwrap(), Tally::new(1, 2));
        assert_eq!(t2.tally(3, None).unwrap(), Tally::new(2, 1));
        assert_eq!(tournament_t(0).unwrap().n(), 1);
    }

    #[test]
    fn tournaments_are_tournaments() {
        for k in 0..=8 {
            let t = tournament_t(k).unwrap();
            for u in 0..t.n() {
                assert!(!t.has_loop(u));
                for v in u + 1..t.n() {
                    assert!(t.has_edge(u, v) ^ t.has_edge(v, u));
                }
            }
        }
    }

    #[test]
    fn stockmeyer_embeds_tournaments() {
        for (m, n) in [(1, 0), (2, 0), (2, 1), (3, 2), (4, 3)] {
            for fam in Family::ALL {
                let (g, _) = stockmeyer_pair(fam, m, n).unwrap();
                let big = 1usize << m;
                let top: Vec<usize> = (0..big).collect();
                let bottom: Vec<usize> = (big..g.n()).collect();
                assert_eq!(g.induced(&top), tournament_t(m).unwrap());
                assert_eq!(g.induced(&bottom), tournament_t(n).unwrap());
            }
        }
        assert!(symbolic_matrix(2, 2).is_err());
    }

    #[test]
    fn fig2_corner_entries() {
        let m = symbolic_matrix(3, 2).unwrap();
        assert_eq!(m.len(), 12);
        assert_eq!(m[0][8], Sym::W);
        assert_eq!(m[8][0], Sym::Y);
        assert_eq!(m[9][0], Sym::Z);
    }

    #[test]
    fn family_rows() {
        assert_eq!(Family::D.bits(), ([true, false, false, true], [false, true, true, false]));
        assert_eq!(Family::A.bits(), ([true, false, false, false], [false, true, false, false]));
        assert_eq!("D*".parse::<Family>().unwrap(), Family::D);
    }

    #[test]
    fn cfi_sizes() {
        let k3 = cfi(&complete_graph(3), None).unwrap();
        assert_eq!(k3.graph.n(), 18);
        let k4 = cfi(&complete_graph(4), None).unwrap();
        assert_eq!(k4.graph.n(), 40);
        for v in 0..4 {
            let internal = k4.labels.iter().filter(|l| l.is_internal() && l.base() == v).count();
            let external = k4.labels.iter().filter(|l| !l.is_internal() && l.base() == v).count();
            assert_eq!((internal, external), (4, 6));
        }
        assert!(k4.graph.tallies().iter().all(|t| *t == Tally::new(3, 3)));
        assert!(cfi(&complete_graph(3), Some((0, 0))).is_err());
        let twisted = cfi(&complete_graph(3), Some((0, 1))).unwrap();
        assert_eq!(twisted.graph.edge_count(), k3.graph.edge_count());
        assert_ne!(twisted.graph, k3.graph);
        assert_eq!(k3.internal(0, &[]).map(|i| k3.labels[i].to_string()), Some("i(0,{})".into()));
    }

    #[test]
    fn separators() {
        let k5 = complete_graph(5);
        assert!(!is_separator(&k5, &vset(5, [0, 1])));
        let p3 = Digraph::new(3, &[(0, 1), (1, 2)], false).unwrap();
        assert!(is_separator(&p3, &vset(3, [1])));
    }

    #[test]
    fn named_examples() {
        let (g, h) = named_example("fig1").unwrap().pair().unwrap();
        assert_eq!((g.n(), h.n()), (6, 8));
        let mut sig = g.sigma(&crate::graph::full_set(6), None).into_iter().collect::<Vec<_>>();
        sig.sort();
        assert_eq!(sig, vec![(Tally::new(0, 1), 2), (Tally::new(1, 0), 2), (Tally::new(1, 1), 2)]);
        let k4 = named_example("K4").unwrap().single().unwrap();
        assert_eq!(k4.edge_count(), 12);
        assert!(!k4.is_directed());
        assert!(named_example("nope").is_err());
        assert_eq!(fig6().n(), 6);
    }
}
