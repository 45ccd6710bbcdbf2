//! Tally-sequences, tally-spectra, colour refinement and k-WL.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{full_set, Digraph, Tally, VertexSet};

/// Significant part of a tally-sequence. The last entry repeats forever, so
/// trailing repeats are trimmed and plain equality is equality of the
/// infinite sequences.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TallySequence {
    pub significant: Vec<Tally>,
}

impl TallySequence {
    pub fn new(mut entries: Vec<Tally>) -> Self {
        while entries.len() > 1 && entries[entries.len() - 1] == entries[entries.len() - 2] {
            entries.pop();
        }
        TallySequence { significant: entries }
    }

    /// Entry `i` of the infinite unrolling.
    pub fn entry(&self, i: usize) -> Tally {
        *self.significant.get(i).unwrap_or_else(|| self.significant.last().expect("non-empty"))
    }

    /// The first `len` entries of the unrolling.
    pub fn prefix(&self, len: usize) -> Vec<Tally> {
        (0..len).map(|i| self.entry(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.significant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.significant.is_empty()
    }

    /// First index where the unrollings differ.
    pub fn first_difference(&self, other: &TallySequence) -> Option<usize> {
        let m = self.len().max(other.len());
        (0..m).find(|&i| self.entry(i) != other.entry(i))
    }
}

impl fmt::Display for TallySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.significant.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Multiset of tally-sequences.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TallySpectrum {
    pub entries: BTreeMap<TallySequence, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumEntry {
    pub sig: Vec<Tally>,
    pub mult: usize,
}

impl TallySpectrum {
    pub fn total(&self) -> usize {
        self.entries.values().sum()
    }

    pub fn count(&self, s: &TallySequence) -> usize {
        self.entries.get(s).copied().unwrap_or(0)
    }

    pub fn to_entries(&self) -> Vec<SpectrumEntry> {
        self.entries
            .iter()
            .map(|(s, &m)| SpectrumEntry { sig: s.significant.clone(), mult: m })
            .collect()
    }

    pub fn from_entries(entries: &[SpectrumEntry]) -> Self {
        let mut s = TallySpectrum::default();
        for e in entries {
            *s.entries.entry(TallySequence::new(e.sig.clone())).or_insert(0) += e.mult;
        }
        s
    }

    /// A sequence whose multiplicity differs, with the larger count first.
    pub fn mismatch(&self, other: &TallySpectrum) -> Option<(TallySequence, usize, usize)> {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .find(|s| self.count(s) != other.count(s))
            .map(|s| (s.clone(), self.count(s), other.count(s)))
    }
}

/// Tally-sequences of every vertex of `g` relative to `x` (all vertices when
/// `None`).
pub fn tally_sequences(g: &Digraph, x: Option<&VertexSet>) -> Vec<TallySequence> {
    let n = g.n();
    let xs = x.cloned().unwrap_or_else(|| full_set(n));
    let mut seqs: Vec<Vec<Tally>> = (0..n).map(|v| vec![g.tally_unchecked(v, Some(&xs))]).collect();
    let mut class = relabel_classes(&(0..n).map(|v| (0usize, seqs[v][0])).collect::<Vec<_>>());
    let mut classes = class.iter().copied().max().map_or(0, |m| m + 1);
    let mut prev: Option<(Vec<usize>, Vec<FixedBitSet>)> = None;
    loop {
        let mut sets = vec![FixedBitSet::with_capacity(n); classes];
        for u in xs.ones() {
            sets[class[u]].insert(u);
        }
        if let Some((pc, ps)) = &prev {
            for v in 0..n {
                debug_assert!(sets[class[v]].is_subset(&ps[pc[v]]), "class sets must nest");
            }
        }
        let keyed: Vec<(usize, Tally)> = (0..n)
            .map(|v| {
                let t = g.tally_unchecked(v, Some(&sets[class[v]]));
                seqs[v].push(t);
                (class[v], t)
            })
            .collect();
        let old = std::mem::replace(&mut class, relabel_classes(&keyed));
        let next = class.iter().copied().max().map_or(0, |m| m + 1);
        prev = Some((old, sets));
        if next == classes {
            break;
        }
        classes = next;
    }
    seqs.into_iter().map(TallySequence::new).collect()
}

fn relabel_classes(keys: &[(usize, Tally)]) -> Vec<usize> {
    let mut sorted: Vec<(usize, Tally)> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    let ids: HashMap<(usize, Tally), usize> = sorted.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    keys.iter().map(|k| ids[k]).collect()
}

pub fn tally_sequence(g: &Digraph, v: usize, x: Option<&VertexSet>) -> Result<TallySequence> {
    if v >= g.n() {
        return Err(Error::VertexOutOfRange { vertex: v, n: g.n() });
    }
    Ok(tally_sequences(g, x).swap_remove(v))
}

/// Multiset of the sequences (relative to the whole graph) of the vertices in
/// `x`.
pub fn spectrum_of(seqs: &[TallySequence], x: impl IntoIterator<Item = usize>) -> TallySpectrum {
    let mut s = TallySpectrum::default();
    for v in x {
        *s.entries.entry(seqs[v].clone()).or_insert(0) += 1;
    }
    s
}

/// Tally-spectrum of `x` in `g` (all vertices when `None`).
pub fn tally_spectrum(g: &Digraph, x: Option<&VertexSet>) -> TallySpectrum {
    let seqs = tally_sequences(g, None);
    match x {
        None => spectrum_of(&seqs, 0..g.n()),
        Some(x) => spectrum_of(&seqs, x.ones()),
    }
}

/// Induced subgraph on the vertices whose first `prefix.len()` sequence
/// entries equal `prefix`, together with the chosen vertices.
pub fn tally_class_subgraph(g: &Digraph, prefix: &[Tally]) -> (Digraph, Vec<usize>) {
    let seqs = tally_sequences(g, None);
    let vs: Vec<usize> = (0..g.n()).filter(|&v| seqs[v].prefix(prefix.len()) == prefix).collect();
    (g.induced(&vs), vs)
}

/// Stable colouring of k-tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WlColouring {
    pub k: usize,
    pub histogram: BTreeMap<u32, usize>,
    pub per_tuple: Vec<u32>,
    pub rounds: usize,
}

impl WlColouring {
    /// Colour of a vertex (k = 1) or of the constant tuple (v,..,v).
    pub fn vertex_colour(&self, n: usize, v: usize) -> u32 {
        let mut idx = 0;
        let mut stride = 1;
        for _ in 0..self.k {
            idx += v * stride;
            stride *= n;
        }
        self.per_tuple[idx]
    }
}

pub const WL_TUPLE_BUDGET: usize = 1 << 22;

pub fn k_wl(g: &Digraph, k: usize) -> Result<WlColouring> {
    Ok(k_wl_joint(&[g], k)?.swap_remove(0))
}

/// Refines the graphs together so that colour identifiers are comparable.
pub fn k_wl_joint(graphs: &[&Digraph], k: usize) -> Result<Vec<WlColouring>> {
    if k == 0 {
        return Err(Error::Config("k-WL dimension must be at least 1".into()));
    }
    let total: usize = graphs
        .iter()
        .map(|g| g.n().checked_pow(k as u32).unwrap_or(usize::MAX))
        .fold(0usize, |a, b| a.saturating_add(b));
    if total > WL_TUPLE_BUDGET {
        return Err(Error::Budget(format!("{total} tuples exceed the k-WL budget of {WL_TUPLE_BUDGET}")));
    }
    let mut colours: Vec<Vec<u32>> = graphs.iter().map(|g| initial_colours(g, k)).collect();
    let mut distinct = count_distinct(&colours);
    let mut rounds = 0;
    loop {
        let sigs: Vec<Vec<Vec<u32>>> = graphs
            .iter()
            .zip(&colours)
            .map(|(g, c)| if k == 1 { cr_signatures(g, c) } else { wl_signatures(g.n(), k, c) })
            .collect();
        let mut all: Vec<&Vec<u32>> = sigs.iter().flatten().collect();
        all.sort();
        all.dedup();
        let ids: HashMap<&Vec<u32>, u32> = all.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let next: Vec<Vec<u32>> = sigs.iter().map(|ss| ss.iter().map(|s| ids[s]).collect()).collect();
        let nd = count_distinct(&next);
        colours = next;
        rounds += 1;
        if nd == distinct {
            break;
        }
        distinct = nd;
    }
    Ok(colours
        .into_iter()
        .map(|per_tuple| {
            let mut histogram = BTreeMap::new();
            for &c in &per_tuple {
                *histogram.entry(c).or_insert(0) += 1;
            }
            WlColouring { k, histogram, per_tuple, rounds }
        })
        .collect())
}

pub fn wl_distinguishes(g: &Digraph, h: &Digraph, k: usize) -> Result<bool> {
    if g.n() != h.n() {
        return Ok(true);
    }
    let c = k_wl_joint(&[g, h], k)?;
    Ok(c[0].histogram != c[1].histogram)
}

fn count_distinct(colours: &[Vec<u32>]) -> usize {
    let mut all: Vec<u32> = colours.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

fn tuple_of(mut idx: usize, n: usize, k: usize) -> Vec<usize> {
    let mut t = Vec::with_capacity(k);
    for _ in 0..k {
        t.push(idx % n);
        idx /= n;
    }
    t
}

fn initial_colours(g: &Digraph, k: usize) -> Vec<u32> {
    let n = g.n();
    let count = n.pow(k as u32);
    let types: Vec<u64> = (0..count)
        .map(|idx| {
            let t = tuple_of(idx, n, k);
            let mut bits = 0u64;
            let mut push = |b: bool| bits = bits << 1 | b as u64;
            for i in 0..k {
                push(g.has_loop(t[i]));
                for j in i + 1..k {
                    push(t[i] == t[j]);
                    push(g.has_edge(t[i], t[j]));
                    push(g.has_edge(t[j], t[i]));
                }
            }
            bits
        })
        .collect();
    types.iter().map(|&b| b as u32).collect()
}

fn cr_signatures(g: &Digraph, c: &[u32]) -> Vec<Vec<u32>> {
    (0..g.n())
        .map(|v| {
            let mut outs: Vec<u32> = g.out_row(v).ones().map(|u| c[u]).collect();
            let mut ins: Vec<u32> = g.in_row(v).ones().map(|u| c[u]).collect();
            outs.sort_unstable();
            ins.sort_unstable();
            let mut s = vec![c[v], outs.len() as u32];
            s.extend(outs);
            s.extend(ins);
            s
        })
        .collect()
}

fn wl_signatures(n: usize, k: usize, c: &[u32]) -> Vec<Vec<u32>> {
    let strides: Vec<usize> = (0..k).map(|i| n.pow(i as u32)).collect();
    (0..c.len())
        .map(|idx| {
            let t = tuple_of(idx, n, k);
            let mut items: Vec<Vec<u32>> = (0..n)
                .map(|w| {
                    (0..k)
                        .map(|i| {
                            let j = idx - t[i] * strides[i] + w * strides[i];
                            c[j]
                        })
                        .collect()
                })
                .collect();
            items.sort_unstable();
            let mut s = vec![c[idx]];
            for it in items {
                s.extend(it);
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::vset;

    fn star_fig4() -> Digraph {
        let mut e: Vec<(usize, usize)> = (1..=6).map(|i| (0, i)).collect();
        e.extend((1..=6).map(|i| (i, i % 6 + 1)));
        Digraph::new(7, &e, false).unwrap()
    }

    #[test]
    fn wheel_sequences() {
        let g = star_fig4();
        let s = tally_sequences(&g, None);
        assert_eq!(s[0].significant, vec![Tally::new(6, 6), Tally::new(0, 0)]);
        for v in 1..7 {
            assert_eq!(s[v].significant, vec![Tally::new(3, 3), Tally::new(2, 2)]);
        }
    }

    #[test]
    fn class_subgraph_is_six_cycle() {
        let (c, vs) = tally_class_subgraph(&star_fig4(), &[Tally::new(3, 3), Tally::new(2, 2)]);
        assert_eq!(vs, vec![1, 2, 3, 4, 5, 6]);
        assert!(c.tallies().iter().all(|t| *t == Tally::new(2, 2)));
        assert!(c.connectivity().weakly_connected);
        let (e, vs) = tally_class_subgraph(&star_fig4(), &[Tally::new(9, 9)]);
        assert_eq!((e.n(), vs.len()), (0, 0));
    }

    #[test]
    fn sequence_padding_equality() {
        let a = TallySequence::new(vec![Tally::new(1, 1), Tally::new(0, 0), Tally::new(0, 0)]);
        let b = TallySequence::new(vec![Tally::new(1, 1), Tally::new(0, 0)]);
        assert_eq!(a, b);
        assert_eq!(a.entry(7), Tally::new(0, 0));
        assert_eq!(a.first_difference(&b), None);
    }

    #[test]
    fn empty_spectrum() {
        let g = star_fig4();
        let s = tally_spectrum(&g, Some(&vset(7, [])));
        assert_eq!(s.total(), 0);
    }

    #[test]
    fn relative_sequences_are_short() {
        let g = star_fig4();
        let x = vset(7, [0, 1, 2]);
        for s in tally_sequences(&g, Some(&x)) {
            assert!(s.len() <= x.count_ones(..) + 1);
        }
    }

    #[test]
    fn colour_refinement_regular_graph() {
        let c5 = Digraph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], false).unwrap();
        let w = k_wl(&c5, 1).unwrap();
        assert_eq!(w.histogram.len(), 1);
    }

    #[test]
    fn wl_self_not_distinguished() {
        let g = star_fig4();
        for k in 1..=2 {
            assert!(!wl_distinguishes(&g, &g, k).unwrap());
        }
        assert!(k_wl(&g, 0).is_err());
    }

    #[test]
    fn two_wl_separates_c6_from_two_triangles() {
        let c6 = Digraph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)], false).unwrap();
        let tt = Digraph::new(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)], false).unwrap();
        assert!(!wl_distinguishes(&c6, &tt, 1).unwrap());
        assert!(wl_distinguishes(&c6, &tt, 2).unwrap());
    }
}
