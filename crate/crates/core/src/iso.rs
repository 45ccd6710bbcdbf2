//! Isomorphism testing, automorphism groups and canonical forms by
//! individualization-refinement over ordered partitions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Digraph;

/// Injective partial map from the vertices of one graph to another.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexMap {
    map: Vec<Option<usize>>,
}

impl VertexMap {
    pub fn total(perm: Vec<usize>) -> Self {
        VertexMap { map: perm.into_iter().map(Some).collect() }
    }

    pub fn partial(map: Vec<Option<usize>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in map.iter().flatten() {
            if !seen.insert(*t) {
                return Err(Error::Format(format!("map is not injective at image {t}")));
            }
        }
        Ok(VertexMap { map })
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.map.get(v).copied().flatten()
    }

    pub fn is_total(&self) -> bool {
        self.map.iter().all(Option::is_some)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_perm(&self) -> Option<Vec<usize>> {
        self.map.iter().copied().collect()
    }

    pub fn inverse(&self, n: usize) -> VertexMap {
        let mut inv = vec![None; n];
        for (v, t) in self.map.iter().enumerate() {
            if let Some(t) = t {
                inv[*t] = Some(v);
            }
        }
        VertexMap { map: inv }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsoMode {
    RefinedBacktracking,
    BruteForce,
}

pub const BRUTE_FORCE_LIMIT: usize = 8;

/// True when `perm` is an edge-preserving and edge-reflecting bijection.
pub fn is_isomorphism(g: &Digraph, h: &Digraph, perm: &[usize]) -> bool {
    if g.n() != h.n() || perm.len() != g.n() {
        return false;
    }
    let mut seen = vec![false; h.n()];
    for &p in perm {
        if p >= h.n() || std::mem::replace(&mut seen[p], true) {
            return false;
        }
    }
    if g.edge_count() != h.edge_count() {
        return false;
    }
    g.edges().all(|(u, v)| h.has_edge(perm[u], perm[v]))
}

pub fn find_isomorphism(g: &Digraph, h: &Digraph, mode: IsoMode) -> Result<Option<VertexMap>> {
    if g.n() != h.n() || g.edge_count() != h.edge_count() {
        return Ok(None);
    }
    match mode {
        IsoMode::BruteForce => {
            if g.n() > BRUTE_FORCE_LIMIT {
                return Err(Error::SizeGuard(format!(
                    "brute force isomorphism limited to n <= {BRUTE_FORCE_LIMIT}"
                )));
            }
            let mut found = None;
            for_each_permutation(g.n(), |p| {
                if is_isomorphism(g, h, p) {
                    found = Some(p.to_vec());
                    false
                } else {
                    true
                }
            });
            Ok(found.map(VertexMap::total))
        }
        IsoMode::RefinedBacktracking => {
            let n = g.n();
            let all: Vec<usize> = (0..n).collect();
            let cells = if n == 0 { vec![] } else { vec![all] };
            Ok(iso_search(g, h, cells.clone(), cells).map(VertexMap::total))
        }
    }
}

pub fn are_isomorphic(g: &Digraph, h: &Digraph) -> bool {
    matches!(find_isomorphism(g, h, IsoMode::RefinedBacktracking), Ok(Some(_)))
}

/// Calls `f` on every permutation of `0..n` until it returns false.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize]) -> bool) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    if !f(&p) {
        return;
    }
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            if !f(&p) {
                return;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

type Cells = Vec<Vec<usize>>;

/// Refines an ordered partition to the coarsest equitable refinement,
/// appending an exact description of each split to `trace`.
fn refine(g: &Digraph, cells: &mut Cells, trace: &mut Vec<u32>) {
    let n = g.n();
    let mut cell_of = vec![0usize; n];
    loop {
        for (i, c) in cells.iter().enumerate() {
            for &v in c {
                cell_of[v] = i;
            }
        }
        let k = cells.len();
        let sig = |v: usize| -> Vec<u32> {
            let mut s = vec![0u32; 1 + 2 * k];
            s[0] = g.has_loop(v) as u32;
            for u in g.out_row(v).ones() {
                s[1 + cell_of[u]] += 1;
            }
            for u in g.in_row(v).ones() {
                s[1 + k + cell_of[u]] += 1;
            }
            s
        };
        let mut next: Cells = Vec::with_capacity(k);
        for c in cells.iter() {
            let mut keyed: Vec<(Vec<u32>, usize)> = c.iter().map(|&v| (sig(v), v)).collect();
            keyed.sort();
            let start = next.len();
            let mut prev: Option<&Vec<u32>> = None;
            for (s, v) in &keyed {
                if prev != Some(s) {
                    next.push(Vec::new());
                    trace.extend_from_slice(s);
                    prev = Some(s);
                }
                next.last_mut().unwrap().push(*v);
            }
            trace.push((next.len() - start) as u32);
            for cell in &next[start..] {
                trace.push(cell.len() as u32);
            }
        }
        let done = next.len() == k;
        *cells = next;
        if done {
            return;
        }
    }
}

fn target_cell(cells: &Cells) -> Option<usize> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.len() > 1)
        .min_by_key(|(i, c)| (c.len(), *i))
        .map(|(i, _)| i)
}

fn individualize(cells: &Cells, i: usize, v: usize) -> Cells {
    let mut out = Vec::with_capacity(cells.len() + 1);
    for (j, c) in cells.iter().enumerate() {
        if j == i {
            out.push(vec![v]);
            out.push(c.iter().copied().filter(|&u| u != v).collect());
        } else {
            out.push(c.clone());
        }
    }
    out
}

fn iso_search(g: &Digraph, h: &Digraph, mut cg: Cells, mut ch: Cells) -> Option<Vec<usize>> {
    let (mut tg, mut th) = (Vec::new(), Vec::new());
    refine(g, &mut cg, &mut tg);
    refine(h, &mut ch, &mut th);
    if tg != th || cg.len() != ch.len() {
        return None;
    }
    match target_cell(&cg) {
        None => {
            let mut perm = vec![0; g.n()];
            for (a, b) in cg.iter().zip(&ch) {
                perm[a[0]] = b[0];
            }
            is_isomorphism(g, h, &perm).then_some(perm)
        }
        Some(i) => {
            let v = cg[i][0];
            for &w in &ch[i] {
                if let Some(p) = iso_search(g, h, individualize(&cg, i, v), individualize(&ch, i, w)) {
                    return Some(p);
                }
            }
            None
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn absorb(&mut self, perm: &[usize]) {
        for (x, &y) in perm.iter().enumerate() {
            self.union(x, y);
        }
    }
}

/// Automorphism group: a strong generating set, its order, and the explicit
/// element list when the order is at most `ELEMENT_CAP`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AutGroup {
    pub n: usize,
    pub order: u128,
    pub generators: Vec<Vec<usize>>,
    pub elements: Option<Vec<Vec<usize>>>,
}

pub const ELEMENT_CAP: u128 = 100_000;

impl AutGroup {
    pub fn is_trivial(&self) -> bool {
        self.order == 1
    }

    /// Orbit partition of the vertices, as a representative per vertex.
    pub fn orbit_reps(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.n);
        for g in &self.generators {
            uf.absorb(g);
        }
        (0..self.n).map(|v| uf.find(v)).collect()
    }
}

pub fn automorphisms(g: &Digraph) -> AutGroup {
    let n = g.n();
    let identity: Vec<usize> = (0..n).collect();
    if n == 0 {
        return AutGroup { n, order: 1, generators: vec![], elements: Some(vec![identity]) };
    }
    let mut cur = vec![identity.clone()];
    refine(g, &mut cur, &mut Vec::new());
    let mut path: Vec<(Cells, usize, usize)> = Vec::new();
    while let Some(i) = target_cell(&cur) {
        let v = cur[i][0];
        path.push((cur.clone(), i, v));
        cur = individualize(&cur, i, v);
        refine(g, &mut cur, &mut Vec::new());
    }
    let mut gens: Vec<Vec<usize>> = Vec::new();
    let mut order: u128 = 1;
    for (cells, i, v) in path.iter().rev() {
        let mut uf = UnionFind::new(n);
        for p in &gens {
            uf.absorb(p);
        }
        for &w in &cells[*i] {
            if w == *v || uf.find(w) == uf.find(*v) {
                continue;
            }
            if let Some(p) = iso_search(g, g, individualize(cells, *i, *v), individualize(cells, *i, w)) {
                uf.absorb(&p);
                gens.push(p);
            }
        }
        let root = uf.find(*v);
        let orbit = cells[*i].iter().filter(|&&w| uf.find(w) == root).count() as u128;
        order = order.saturating_mul(orbit);
    }
    let elements = (order <= ELEMENT_CAP).then(|| group_closure(&identity, &gens));
    AutGroup { n, order, generators: gens, elements }
}

fn group_closure(identity: &[usize], gens: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = vec![identity.to_vec()];
    seen.insert(identity.to_vec());
    let mut i = 0;
    while i < out.len() {
        for s in gens {
            let p: Vec<usize> = out[i].iter().map(|&x| s[x]).collect();
            if seen.insert(p.clone()) {
                out.push(p);
            }
        }
        i += 1;
    }
    out.sort();
    out
}

fn certificate(g: &Digraph, order: &[usize]) -> Vec<u8> {
    let n = g.n();
    let mut bytes = (n as u32).to_le_bytes().to_vec();
    let mut acc = 0u8;
    let mut k = 0;
    for &u in order {
        for &v in order {
            acc = (acc << 1) | g.has_edge(u, v) as u8;
            k += 1;
            if k == 8 {
                bytes.push(acc);
                acc = 0;
                k = 0;
            }
        }
    }
    if k > 0 {
        bytes.push(acc << (8 - k));
    }
    bytes
}

/// Canonical vertex order: the returned vector lists vertices in canonical
/// position order.
pub fn canonical_order(g: &Digraph) -> Vec<usize> {
    canonical(g).1
}

/// Byte string that is equal for two digraphs iff they are isomorphic.
pub fn canonical_form(g: &Digraph) -> Vec<u8> {
    canonical(g).0
}

fn canonical(g: &Digraph) -> (Vec<u8>, Vec<usize>) {
    let n = g.n();
    if n == 0 {
        return (certificate(g, &[]), vec![]);
    }
    let gens = if n > 6 { automorphisms(g).generators } else { Vec::new() };
    let mut best: Option<(Vec<u8>, Vec<usize>)> = None;
    canon_search(g, vec![(0..n).collect()], &mut Vec::new(), &gens, &mut best);
    best.expect("search reaches a leaf")
}

fn canon_search(
    g: &Digraph,
    mut cells: Cells,
    fixed: &mut Vec<usize>,
    gens: &[Vec<usize>],
    best: &mut Option<(Vec<u8>, Vec<usize>)>,
) {
    refine(g, &mut cells, &mut Vec::new());
    match target_cell(&cells) {
        None => {
            let order: Vec<usize> = cells.iter().map(|c| c[0]).collect();
            let cert = certificate(g, &order);
            if best.as_ref().is_none_or(|(b, _)| cert < *b) {
                *best = Some((cert, order));
            }
        }
        Some(i) => {
            let mut uf = UnionFind::new(g.n());
            for p in gens.iter().filter(|p| fixed.iter().all(|&x| p[x] == x)) {
                uf.absorb(p);
            }
            let mut explored: Vec<usize> = Vec::new();
            for &w in &cells[i] {
                let r = uf.find(w);
                if explored.iter().any(|&e| uf.find(e) == r) {
                    continue;
                }
                explored.push(w);
                fixed.push(w);
                canon_search(g, individualize(&cells, i, w), fixed, gens, best);
                fixed.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_digraph(rng: &mut impl Rng, n: usize, p: f64) -> Digraph {
        let mut e = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if rng.gen_bool(p) {
                    e.push((u, v));
                }
            }
        }
        Digraph::new(n, &e, true).unwrap()
    }

    fn random_perm(rng: &mut impl Rng, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            p.swap(i, rng.gen_range(0..=i));
        }
        p
    }

    #[test]
    fn permutations_counted() {
        let mut c = 0;
        for_each_permutation(4, |_| {
            c += 1;
            true
        });
        assert_eq!(c, 24);
    }

    #[test]
    fn identity_iso() {
        let g = Digraph::new(3, &[(0, 1), (1, 2)], true).unwrap();
        let m = find_isomorphism(&g, &g, IsoMode::RefinedBacktracking).unwrap().unwrap();
        assert!(is_isomorphism(&g, &g, &m.as_perm().unwrap()));
    }

    #[test]
    fn modes_agree_exhaustively_n3() {
        let graphs: Vec<Digraph> = (0u32..512)
            .map(|m| {
                let e: Vec<(usize, usize)> =
                    (0..9).filter(|b| m >> b & 1 == 1).map(|b| (b / 3, b % 3)).collect();
                Digraph::new(3, &e, true).unwrap()
            })
            .collect();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..3000 {
            let g = &graphs[rng.gen_range(0..512)];
            let h = &graphs[rng.gen_range(0..512)];
            let a = find_isomorphism(g, h, IsoMode::RefinedBacktracking).unwrap().is_some();
            let b = find_isomorphism(g, h, IsoMode::BruteForce).unwrap().is_some();
            assert_eq!(a, b);
            assert_eq!(a, canonical_form(g) == canonical_form(h));
        }
    }

    #[test]
    fn random_pairs_agree() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(1..=7);
            let g = random_digraph(&mut rng, n, 0.3);
            let h = if rng.gen_bool(0.5) {
                g.relabel(&random_perm(&mut rng, n))
            } else {
                random_digraph(&mut rng, n, 0.3)
            };
            let a = find_isomorphism(&g, &h, IsoMode::RefinedBacktracking).unwrap();
            let b = find_isomorphism(&g, &h, IsoMode::BruteForce).unwrap();
            assert_eq!(a.is_some(), b.is_some());
            if let Some(m) = &a {
                assert!(is_isomorphism(&g, &h, &m.as_perm().unwrap()));
            }
            assert_eq!(a.is_some(), canonical_form(&g) == canonical_form(&h));
        }
    }

    #[test]
    fn brute_force_guard() {
        let g = Digraph::edgeless(9, true);
        assert!(matches!(find_isomorphism(&g, &g, IsoMode::BruteForce), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn automorphism_orders() {
        assert_eq!(automorphisms(&Digraph::edgeless(2, true)).elements.unwrap().len(), 2);
        assert_eq!(automorphisms(&Digraph::edgeless(7, true)).order, 5040);
        let c5 = Digraph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], false).unwrap();
        assert_eq!(automorphisms(&c5).order, 10);
        let dc5 = Digraph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], true).unwrap();
        assert_eq!(automorphisms(&dc5).order, 5);
        let big = Digraph::edgeless(12, false);
        let a = automorphisms(&big);
        assert_eq!(a.order, 479_001_600);
        assert!(a.elements.is_none());
    }

    #[test]
    fn automorphism_order_matches_brute_force() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let p = rng.gen_range(0.0..0.6);
            let g = random_digraph(&mut rng, n, p);
            let mut count = 0u128;
            for_each_permutation(n, |p| {
                count += is_isomorphism(&g, &g, p) as u128;
                true
            });
            let a = automorphisms(&g);
            assert_eq!(a.order, count, "{g:?}");
            for p in a.elements.unwrap() {
                assert!(is_isomorphism(&g, &g, &p));
            }
        }
    }

    #[test]
    fn canonical_form_invariant_under_relabel() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.gen_range(1..=12);
            let g = random_digraph(&mut rng, n, 0.25);
            let h = g.relabel(&random_perm(&mut rng, n));
            assert_eq!(canonical_form(&g), canonical_form(&h));
        }
        let loop1 = Digraph::new(1, &[(0, 0)], true).unwrap();
        assert_ne!(canonical_form(&loop1), canonical_form(&Digraph::edgeless(1, true)));
    }
}
