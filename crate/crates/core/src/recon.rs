//! Decks, degree-associated decks, small digraph enumeration and the
//! pairwise search driver.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{Game, GameConfig, Variant};
use crate::error::{Error, Result};
use crate::graph::{Digraph, Tally};
use crate::iso::canonical_form;
use crate::solve::{solve, Pruning, SolveLimits, Verdict, Winner};

pub const MAX_ENUMERATION_ORDER: usize = 4;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Multiset of canonical forms of the point-deleted subgraphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deck {
    pub cards: BTreeMap<Vec<u8>, usize>,
}

/// Multiset of (tally of the deleted vertex, canonical form of the card).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaDeck {
    pub cards: BTreeMap<(Tally, Vec<u8>), usize>,
}

#[derive(Serialize)]
struct CardEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    tally: Option<Tally>,
    card: String,
    count: usize,
}

impl Serialize for Deck {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<CardEntry> =
            self.cards.iter().map(|(c, &count)| CardEntry { tally: None, card: hex(c), count }).collect();
        v.serialize(s)
    }
}

impl Serialize for DaDeck {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<CardEntry> = self
            .cards
            .iter()
            .map(|((t, c), &count)| CardEntry { tally: Some(*t), card: hex(c), count })
            .collect();
        v.serialize(s)
    }
}

impl Deck {
    pub fn size(&self) -> usize {
        self.cards.values().sum()
    }
}

impl DaDeck {
    pub fn size(&self) -> usize {
        self.cards.values().sum()
    }

    /// Forgets the tallies.
    pub fn project(&self) -> Deck {
        let mut cards = BTreeMap::new();
        for ((_, c), &k) in &self.cards {
            *cards.entry(c.clone()).or_insert(0) += k;
        }
        Deck { cards }
    }

    /// Smallest key whose multiplicities differ, with both multiplicities.
    pub fn difference(&self, other: &DaDeck) -> Option<((Tally, Vec<u8>), usize, usize)> {
        let keys: std::collections::BTreeSet<&(Tally, Vec<u8>)> = self.cards.keys().chain(other.cards.keys()).collect();
        keys.into_iter().find_map(|k| {
            let a = self.cards.get(k).copied().unwrap_or(0);
            let b = other.cards.get(k).copied().unwrap_or(0);
            (a != b).then(|| (k.clone(), a, b))
        })
    }
}

/// Per vertex: its tally and the canonical form of the graph without it.
pub fn cards(g: &Digraph) -> Result<Vec<(Tally, Vec<u8>)>> {
    if g.n() < 2 {
        return Err(Error::NotApplicable(format!("decks need at least 2 vertices, got {}", g.n())));
    }
    let tallies = g.tallies();
    Ok((0..g.n()).map(|v| (tallies[v], canonical_form(&g.delete_vertex(v)))).collect())
}

pub fn deck(g: &Digraph) -> Result<Deck> {
    Ok(da_deck(g)?.project())
}

pub fn da_deck(g: &Digraph) -> Result<DaDeck> {
    let mut m = BTreeMap::new();
    for c in cards(g)? {
        *m.entry(c).or_insert(0) += 1;
    }
    Ok(DaDeck { cards: m })
}

/// One representative per isomorphism class of digraphs of order `n`, in
/// order of first appearance by adjacency bit pattern.
pub fn enumerate_digraphs(n: usize, loops: bool) -> Result<Vec<Digraph>> {
    enumerate(n, loops, true)
}

/// Same for undirected graphs.
pub fn enumerate_graphs(n: usize, loops: bool) -> Result<Vec<Digraph>> {
    enumerate(n, loops, false)
}

fn enumerate(n: usize, loops: bool, directed: bool) -> Result<Vec<Digraph>> {
    if n > MAX_ENUMERATION_ORDER {
        return Err(Error::SizeGuard(format!("enumeration limited to n <= {MAX_ENUMERATION_ORDER}, got {n}")));
    }
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| (loops || u != v) && (directed || u <= v))
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for bits in 0u64..1 << slots.len() {
        let edges: Vec<(usize, usize)> =
            slots.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, &e)| e).collect();
        let g = Digraph::new(n, &edges, directed)?;
        if seen.insert(canonical_form(&g)) {
            out.push(g);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchScope {
    pub max_n: usize,
    pub colours: usize,
    pub loops: bool,
    pub variant: Variant,
    #[serde(default)]
    pub undirected: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairResult {
    pub n: usize,
    pub g: Vec<String>,
    pub h: Vec<String>,
    pub verdict: Verdict,
    /// Set for ∃-wins: outcome of the unpruned exact re-solve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reverified: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub scope: SearchScope,
    pub classes_per_order: Vec<usize>,
    pub pairs_examined: usize,
    pub histogram: BTreeMap<String, usize>,
    pub exists_wins: Vec<PairResult>,
    pub unknown: Vec<PairResult>,
    /// Unequal-order spot checks (first class of order n against order n+1).
    pub spot_checks: Vec<PairResult>,
    pub elapsed_ms: u64,
}

impl SearchReport {
    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "max_n={} k={} variant={:?} loops={} undirected={}\n",
            self.scope.max_n, self.scope.colours, self.scope.variant, self.scope.loops, self.scope.undirected
        );
        s += &format!("classes per order: {:?}\npairs examined: {}\n", self.classes_per_order, self.pairs_examined);
        for (w, c) in &self.histogram {
            s += &format!("  {w:<8} {c}\n");
        }
        for p in &self.exists_wins {
            s += &format!(
                "  exists-win n={} G={:?} H={:?} reverified={:?}\n",
                p.n,
                p.g,
                p.h,
                p.reverified
            );
        }
        s
    }
}

fn pair_result(g: &Digraph, h: &Digraph, scope: &SearchScope, limits: &SolveLimits) -> Result<PairResult> {
    let game = Game::new(GameConfig::new(g.clone(), h.clone(), scope.colours, scope.variant))?;
    let verdict = solve(&game, limits)?;
    let reverified = if verdict.is_exists() {
        let exact = SolveLimits {
            pruning: Pruning::None,
            force_search: false,
            state_budget: limits.state_budget.max(crate::solve::DEFAULT_STATE_BUDGET),
            ..limits.clone()
        };
        let again = solve(&game, &exact)?;
        Some(matches!(again.winner, Winner::ExistsForever))
    } else {
        None
    };
    Ok(PairResult { n: g.n(), g: g.to_rows(), h: h.to_rows(), verdict, reverified })
}

/// Solves every unordered pair of distinct isomorphism classes of equal
/// order up to `max_n`.
pub fn search(scope: &SearchScope, limits: &SolveLimits) -> Result<SearchReport> {
    let start = Instant::now();
    let mut classes = Vec::new();
    for n in 1..=scope.max_n {
        classes.push(enumerate(n, scope.loops, !scope.undirected)?);
    }
    let mut report = SearchReport {
        scope: scope.clone(),
        classes_per_order: classes.iter().map(Vec::len).collect(),
        pairs_examined: 0,
        histogram: BTreeMap::new(),
        exists_wins: Vec::new(),
        unknown: Vec::new(),
        spot_checks: Vec::new(),
        elapsed_ms: 0,
    };
    for list in &classes {
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                let r = pair_result(&list[i], &list[j], scope, limits)?;
                report.pairs_examined += 1;
                *report.histogram.entry(r.verdict.winner_name().to_string()).or_insert(0) += 1;
                match r.verdict.winner {
                    Winner::Unknown { .. } => report.unknown.push(r),
                    _ if r.verdict.is_exists() => report.exists_wins.push(r),
                    _ => {}
                }
            }
        }
    }
    for w in classes.windows(2) {
        report.spot_checks.push(pair_result(&w[0][0], &w[1][0], scope, limits)?);
    }
    report.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}
