//! Necessary-move rules for ∃, punishment scripts, scripted ∀ strategies,
//! ∃ heuristics and the certificate verifier.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::engine::{
    permute_mask, Answer, AnswerLimits, Game, Mask, Move, PendingPosition, Position, Side, SideData, Trigger,
};
use crate::error::{Error, Result};
use crate::gen::{cfi, complete_graph, CfiLabel};
use crate::graph::{mask_vertices, Digraph, Direction, Tally};
use crate::iso::{find_isomorphism, IsoMode};
use crate::recon;
use crate::refine::{tally_sequences, TallySequence};

// ---------------------------------------------------------------------------
// Rules and filters

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    S1,
    S2,
    S3,
    S4,
    TallySpectrum,
    S5,
    S6,
    EtaSpectrum,
    Relativized3,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::S1,
        Rule::S2,
        Rule::S3,
        Rule::S4,
        Rule::TallySpectrum,
        Rule::S5,
        Rule::S6,
        Rule::EtaSpectrum,
        Rule::Relativized3,
    ];

    pub fn min_colours(self) -> usize {
        if self == Rule::Relativized3 {
            3
        } else {
            2
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::S1 => "S1",
            Rule::S2 => "S2",
            Rule::S3 => "S3",
            Rule::S4 => "S4",
            Rule::TallySpectrum => "TallySpectrum",
            Rule::S5 => "S5",
            Rule::S6 => "S6",
            Rule::EtaSpectrum => "EtaSpectrum",
            Rule::Relativized3 => "Relativized3",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Rule> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// Set of enabled rules. `eta_depth` bounds the direction sequences tried by
/// S6 and EtaSpectrum (default: the larger vertex count).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseFilter {
    pub rules: BTreeSet<Rule>,
    #[serde(default)]
    pub eta_depth: Option<usize>,
}

impl ResponseFilter {
    pub fn new(rules: &[Rule]) -> Self {
        ResponseFilter { rules: rules.iter().copied().collect(), eta_depth: None }
    }

    /// S1 and S4: what pruned search relies on.
    pub fn necessary() -> Self {
        Self::new(&[Rule::S1, Rule::S4])
    }

    /// Every rule valid for `k` colours.
    pub fn all(k: usize) -> Self {
        Self::new(&Rule::ALL.into_iter().filter(|r| r.min_colours() <= k).collect::<Vec<_>>())
    }

    pub fn parse(s: &str) -> Result<Self> {
        let rules = s.split(',').filter(|t| !t.trim().is_empty()).map(Rule::from_str).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(&rules))
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        match self.rules.iter().find(|r| r.min_colours() > k) {
            Some(r) => Err(Error::Config(format!("rule {r} needs at least {} colours", r.min_colours()))),
            None => Ok(()),
        }
    }

    pub fn contains(&self, r: Rule) -> bool {
        self.rules.contains(&r)
    }

    pub fn names(&self) -> Vec<String> {
        self.rules.iter().map(|r| r.name().to_string()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detail {
    Sizes { moved: usize, answer: usize },
    Class { key: String, moved: usize, answer: usize },
    Closure { source_colour: usize, direction: Direction },
    Path { directions: Vec<Direction> },
    Relative { other_colour: usize, forward: bool },
}

/// A broken rule: ∀ coloured `moved` on `side` with `colour` and ∃ answered
/// `answer` on the other side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub colour: usize,
    pub side: Side,
    pub moved: Mask,
    pub answer: Mask,
    pub detail: Detail,
}

/// Per-game data shared by rule checks and scripts.
#[derive(Debug)]
pub struct Info {
    pub k: usize,
    pub n: [usize; 2],
    pub sd: [SideData; 2],
    pub tally: [Vec<Tally>; 2],
    pub seqs: [Vec<TallySequence>; 2],
    pub tally_id: [Vec<u32>; 2],
    pub seq_id: [Vec<u32>; 2],
}

fn joint_ids<T: Ord + Clone>(a: &[T], b: &[T]) -> [Vec<u32>; 2] {
    let keys: BTreeSet<T> = a.iter().chain(b).cloned().collect();
    let id: BTreeMap<T, u32> = keys.into_iter().enumerate().map(|(i, k)| (k, i as u32)).collect();
    [a.iter().map(|k| id[k]).collect(), b.iter().map(|k| id[k]).collect()]
}

impl Info {
    pub fn new(game: &Game) -> Arc<Info> {
        let (g, h) = (&game.cfg.g, &game.cfg.h);
        let tally = [g.tallies(), h.tallies()];
        let seqs = [tally_sequences(g, None), tally_sequences(h, None)];
        let tally_id = joint_ids(&tally[0], &tally[1]);
        let seq_id = joint_ids(&seqs[0], &seqs[1]);
        Arc::new(Info {
            k: game.k(),
            n: [g.n(), h.n()],
            sd: game.sides.clone(),
            tally,
            seqs,
            tally_id,
            seq_id,
        })
    }

    fn sd(&self, s: Side) -> &SideData {
        &self.sd[s.index()]
    }

    fn full(&self, s: Side) -> u64 {
        self.sd(s).full
    }

    pub fn rel_tally(&self, s: Side, v: usize, rel: u64) -> Tally {
        let sd = self.sd(s);
        Tally::new((sd.inn[v] & rel).count_ones() as usize, (sd.out[v] & rel).count_ones() as usize)
    }

    pub fn eta(&self, s: Side, m: u64, d: Direction) -> u64 {
        let sd = self.sd(s);
        m | match d {
            Direction::Out => sd.out_of(m),
            Direction::In => sd.into_of(m),
        }
    }

    fn ids(&self, key: Key, s: Side) -> &[u32] {
        match key {
            Key::Tally => &self.tally_id[s.index()],
            Key::Seq => &self.seq_id[s.index()],
        }
    }

    fn count(&self, key: Key, s: Side, m: u64) -> BTreeMap<u32, usize> {
        let ids = self.ids(key, s);
        let mut c = BTreeMap::new();
        for v in mask_vertices(m) {
            *c.entry(ids[v]).or_insert(0) += 1;
        }
        c
    }

    fn key_name(&self, key: Key, s: Side, id: u32) -> String {
        let ids = self.ids(key, s);
        let v = ids.iter().position(|&x| x == id);
        let other = self.ids(key, s.other()).iter().position(|&x| x == id);
        let (side, v) = match (v, other) {
            (Some(v), _) => (s, v),
            (None, Some(v)) => (s.other(), v),
            _ => return id.to_string(),
        };
        match key {
            Key::Tally => self.tally[side.index()][v].to_string(),
            Key::Seq => self.seqs[side.index()][v].to_string(),
        }
    }

    fn rel_counts(&self, s: Side, members: u64, rel: u64) -> BTreeMap<Tally, usize> {
        let mut c = BTreeMap::new();
        for v in mask_vertices(members) {
            *c.entry(self.rel_tally(s, v, rel)).or_insert(0) += 1;
        }
        c
    }

    fn eta_depth(&self, filter: &ResponseFilter) -> usize {
        filter.eta_depth.unwrap_or(self.n[0].max(self.n[1]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Key {
    Tally,
    Seq,
}

fn popcount(m: u64) -> usize {
    m.count_ones() as usize
}

fn colour_parts(mv: &Move) -> Option<(usize, Side, u64)> {
    match *mv {
        Move::Colour { colour, side, vertices } => Some((colour, side, vertices.0)),
        Move::Pebble { .. } => None,
    }
}

pub fn answer_mask(a: Answer) -> u64 {
    match a {
        Answer::Set(m) => m.0,
        Answer::Vertex(v) => 1 << v,
    }
}

fn class_mismatch(a: &BTreeMap<u32, usize>, b: &BTreeMap<u32, usize>) -> Option<u32> {
    a.keys().chain(b.keys()).copied().collect::<BTreeSet<u32>>().into_iter().find(|k| a.get(k) != b.get(k))
}

/// Checks one rule. `pos` is the position after the answer; colours other
/// than `colour` are read from it.
fn check_rule(
    info: &Info,
    filter: &ResponseFilter,
    rule: Rule,
    pos: &Position,
    colour: usize,
    side: Side,
    s: u64,
    t: u64,
) -> Option<Detail> {
    let other = side.other();
    match rule {
        Rule::S1 => (popcount(s) != popcount(t)).then_some(Detail::Sizes { moved: popcount(s), answer: popcount(t) }),
        Rule::S2 | Rule::S3 | Rule::S4 | Rule::TallySpectrum => {
            if rule == Rule::S2 && (popcount(s) != 1 || popcount(t) != 1) {
                return None;
            }
            let key = if rule == Rule::TallySpectrum { Key::Seq } else { Key::Tally };
            let (cs, ct) = (info.count(key, side, s), info.count(key, other, t));
            let bad = if rule == Rule::S3 {
                let ks: BTreeSet<&u32> = cs.keys().collect();
                let kt: BTreeSet<&u32> = ct.keys().collect();
                ks.symmetric_difference(&kt).next().map(|&&k| k)
            } else {
                class_mismatch(&cs, &ct)
            }?;
            Some(Detail::Class {
                key: info.key_name(key, side, bad),
                moved: cs.get(&bad).copied().unwrap_or(0),
                answer: ct.get(&bad).copied().unwrap_or(0),
            })
        }
        Rule::S5 => {
            for c2 in (0..pos.sets.len()).filter(|&c2| c2 != colour) {
                let (s0, t0) = (pos.set(c2, side), pos.set(c2, other));
                if s0 | t0 == 0 {
                    continue;
                }
                for d in [Direction::Out, Direction::In] {
                    if s == info.eta(side, s0, d) && t != info.eta(other, t0, d) {
                        return Some(Detail::Closure { source_colour: c2, direction: d });
                    }
                }
            }
            None
        }
        Rule::S6 | Rule::EtaSpectrum => {
            let depth = info.eta_depth(filter);
            let mut seen = HashSet::new();
            let mut queue = VecDeque::from([((s, t), Vec::<Direction>::new())]);
            seen.insert((s, t));
            while let Some(((a, b), path)) = queue.pop_front() {
                for d in [Direction::Out, Direction::In] {
                    let (na, nb) = (info.eta(side, a, d), info.eta(other, b, d));
                    let differs = if rule == Rule::S6 {
                        popcount(na) != popcount(nb)
                    } else {
                        info.count(Key::Seq, side, na) != info.count(Key::Seq, other, nb)
                    };
                    let mut p = path.clone();
                    p.push(d);
                    if differs {
                        return Some(Detail::Path { directions: p });
                    }
                    if p.len() < depth && seen.insert((na, nb)) {
                        queue.push_back(((na, nb), p));
                    }
                }
            }
            None
        }
        Rule::Relativized3 => {
            if info.k < 3 {
                return None;
            }
            for c2 in (0..pos.sets.len()).filter(|&c2| c2 != colour) {
                let (x, y) = (pos.set(c2, side), pos.set(c2, other));
                if x | y == 0 {
                    continue;
                }
                if info.rel_counts(side, x, s) != info.rel_counts(other, y, t) {
                    return Some(Detail::Relative { other_colour: c2, forward: true });
                }
                if info.rel_counts(side, s, x) != info.rel_counts(other, t, y) {
                    return Some(Detail::Relative { other_colour: c2, forward: false });
                }
            }
            None
        }
    }
}

/// First violated rule of `filter` (in rule order) for the committed answer.
pub fn check_answer(info: &Info, filter: &ResponseFilter, mv: &Move, answer: Answer, after: &Position) -> Option<Violation> {
    let (colour, side, s) = colour_parts(mv)?;
    let t = answer_mask(answer);
    filter.rules.iter().find_map(|&rule| {
        if rule.min_colours() > info.k {
            return None;
        }
        check_rule(info, filter, rule, after, colour, side, s, t).map(|detail| Violation {
            rule,
            colour,
            side,
            moved: Mask(s),
            answer: Mask(t),
            detail,
        })
    })
}

/// Re-derives `v` from the position it was committed into.
pub fn reproduce(info: &Info, pos: &Position, v: &Violation) -> bool {
    pos.set(v.colour, v.side) == v.moved.0
        && pos.set(v.colour, v.side.other()) == v.answer.0
        && check_rule(info, &ResponseFilter::new(&[v.rule]), v.rule, pos, v.colour, v.side, v.moved.0, v.answer.0)
            .is_some()
}

/// Admissible answers and the violation of every other answer.
#[derive(Clone, Debug, Serialize)]
pub struct FilterPartition {
    pub admissible: Vec<Mask>,
    pub violations: Vec<Violation>,
}

pub const FILTER_ENUMERATION_LIMIT: usize = 20;

/// Partitions all 2^n colour answers to `pending` by `filter`.
pub fn constraint_filter(game: &Game, pending: &PendingPosition, filter: &ResponseFilter) -> Result<FilterPartition> {
    filter.validate(game.k())?;
    let info = Info::new(game);
    constraint_filter_with(game, &info, pending, filter)
}

pub fn constraint_filter_with(
    game: &Game,
    info: &Info,
    pending: &PendingPosition,
    filter: &ResponseFilter,
) -> Result<FilterPartition> {
    let Some((_, side, _)) = colour_parts(&pending.mv) else {
        return Err(Error::NotApplicable("filters apply to colour moves".into()));
    };
    let n = game.n(side.other());
    if n > FILTER_ENUMERATION_LIMIT {
        return Err(Error::SizeGuard(format!("answer enumeration limited to {FILTER_ENUMERATION_LIMIT} vertices")));
    }
    let mut out = FilterPartition { admissible: Vec::new(), violations: Vec::new() };
    for m in 0..1u64 << n {
        let a = Answer::Set(Mask(m));
        let after = game.apply_existential(pending, a)?;
        match check_answer(info, filter, &pending.mv, a, &after) {
            Some(v) => out.violations.push(v),
            None => out.admissible.push(Mask(m)),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Strategy representation

pub type Cont = Arc<dyn Fn(&Position, Answer) -> Step + Send + Sync>;

/// ∀'s next action: a move with a continuation over ∃'s answer, or giving up.
#[derive(Clone)]
pub enum Step {
    Play(Move, Cont),
    Resign(String),
}

impl fmt::Debug for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Play(mv, _) => write!(f, "Play({mv})"),
            Step::Resign(r) => write!(f, "Resign({r})"),
        }
    }
}

fn play(mv: Move, f: impl Fn(&Position, Answer) -> Step + Send + Sync + 'static) -> Step {
    Step::Play(mv, Arc::new(f))
}

fn colour_move(colour: usize, side: Side, m: u64) -> Move {
    Move::Colour { colour, side, vertices: Mask(m) }
}

fn resign(s: impl Into<String>) -> Step {
    Step::Resign(s.into())
}

fn pick(k: usize, avoid: &[usize]) -> Option<usize> {
    (0..k).find(|c| !avoid.contains(c))
}

/// A ∀ strategy. `oblivious_side` is set when every move on the main line
/// is fixed in advance and played on that side.
#[derive(Clone)]
pub struct Strategy {
    pub name: String,
    pub guard: ResponseFilter,
    pub oblivious_side: Option<Side>,
    start: Arc<dyn Fn(&Position) -> Step + Send + Sync>,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Strategy({})", self.name)
    }
}

impl Strategy {
    pub fn start(&self, pos: &Position) -> Step {
        (self.start)(pos)
    }
}

/// Plays `mv`, punishes any answer violating `filter`, otherwise continues.
fn guarded(
    info: &Arc<Info>,
    filter: &Arc<ResponseFilter>,
    mv: Move,
    then: impl Fn(&Position, Answer) -> Step + Send + Sync + 'static,
) -> Step {
    let (info, filter) = (info.clone(), filter.clone());
    play(mv, move |pos, ans| match check_answer(&info, &filter, &mv, ans, pos) {
        Some(v) => punish_step(&info, pos, &v),
        None => then(pos, ans),
    })
}

// ---------------------------------------------------------------------------
// Punishments

fn punish_step(info: &Arc<Info>, pos: &Position, v: &Violation) -> Step {
    punish(info, pos, v).unwrap_or_else(|e| Step::Resign(e.to_string()))
}

/// A script forcing a trigger after the committed violation `v`.
pub fn punish(info: &Arc<Info>, pos: &Position, v: &Violation) -> Result<Step> {
    if !reproduce(info, pos, v) {
        return Err(Error::NotApplicable(format!("violation of {} is not reproducible here", v.rule)));
    }
    let (c, side, s, t) = (v.colour, v.side, v.moved.0, v.answer.0);
    if popcount(s) != popcount(t) {
        let other = pick(info.k, &[c]).ok_or_else(|| Error::Config("punishment needs two colours".into()))?;
        return Ok(peel_pair(side, s, t, c, other));
    }
    Ok(match (v.rule, &v.detail) {
        (Rule::S1, _) => unreachable!("sizes checked above"),
        (Rule::S2 | Rule::S3 | Rule::S4, _) => class_count_punish(info, pos, c, Key::Tally),
        (Rule::TallySpectrum, _) => class_count_punish(info, pos, c, Key::Seq),
        (Rule::S5, Detail::Closure { source_colour, direction }) => {
            closure_punish(info, pos, *source_colour, side, *direction, c)
        }
        (Rule::S6, Detail::Path { directions }) => eta_chain(info, c, side, s, t, directions.clone().into(), 0, false),
        (Rule::EtaSpectrum, Detail::Path { directions }) => {
            eta_chain(info, c, side, s, t, directions.clone().into(), 0, true)
        }
        (Rule::Relativized3, Detail::Relative { other_colour, forward }) => {
            if *forward {
                relative_punish(info, pos, *other_colour, c)
            } else {
                relative_punish(info, pos, c, *other_colour)
            }
        }
        _ => return Err(Error::Format("violation detail does not match its rule".into())),
    })
}

/// `larger` is coloured `cur` on `side` and the matching set on the other
/// side is smaller: recolour it minus one vertex with the other colour until
/// the smaller chain runs out.
pub fn peel(larger: u64, side: Side, cur: usize, other: usize) -> Step {
    if larger == 0 {
        return resign("peeling reached the empty set without a trigger");
    }
    let next = larger & (larger - 1);
    play(colour_move(other, side, next), move |_, _| peel(next, side, other, cur))
}

/// Peels whichever of `s` (on `side`) and `t` (on the other side) is larger.
fn peel_pair(side: Side, s: u64, t: u64, cur: usize, other: usize) -> Step {
    if popcount(s) > popcount(t) {
        peel(s, side, cur, other)
    } else {
        peel(t, side.other(), cur, other)
    }
}

fn size_guard(side: Side, s: u64, t: u64, cur: usize, other: usize) -> Option<Step> {
    (popcount(s) != popcount(t)).then(|| peel_pair(side, s, t, cur, other))
}

/// Context of the relative degree argument: the vertex sets whose relative
/// tallies differ, and how escaping answers are handled.
#[derive(Clone, Copy, Debug)]
enum Context {
    /// Prefix classes of the tally-sequence refinement (or whole graphs).
    Classes([u64; 2]),
    /// Sets held by `colour`; escaping answers lose by C1.
    Coloured(usize, [u64; 2]),
}

impl Context {
    fn sets(&self) -> [u64; 2] {
        match *self {
            Context::Classes(s) | Context::Coloured(_, s) => s,
        }
    }
}

fn prefix_class(info: &Info, side: Side, target: &TallySequence, len: usize) -> u64 {
    let mut m = 0;
    for (v, s) in info.seqs[side.index()].iter().enumerate() {
        if (0..len).all(|i| s.entry(i) == target.entry(i)) {
            m |= 1 << v;
        }
    }
    m
}

/// `y` on `ys` is not equivalent to any vertex of `xset` (held by colour `e`
/// on the other side). Colours `{y}` and runs the relative degree argument
/// on the answer.
fn distinguish(info: &Arc<Info>, y: usize, ys: Side, xset: u64, e: usize, ctx: Option<Context>) -> Step {
    let avoid: Vec<usize> = match ctx {
        Some(Context::Coloured(c, _)) => vec![e, c],
        _ => vec![e],
    };
    let Some(a) = pick(info.k, &avoid) else {
        return resign("not enough colours to distinguish");
    };
    let info = info.clone();
    play(colour_move(a, ys, 1 << y), move |_, ans| {
        let w = answer_mask(ans);
        if let Some(p) = size_guard(ys, 1 << y, w, a, e) {
            return p;
        }
        if w & !xset != 0 {
            return resign("answer outside the marked set survived");
        }
        let w = w.trailing_zeros() as usize;
        let xs = ys.other();
        let ctx = match ctx {
            Some(c) => c,
            None => {
                let (sy, sw) = (&info.seqs[ys.index()][y], &info.seqs[xs.index()][w]);
                let Some(j) = sy.first_difference(sw) else {
                    return resign("vertices have equal tally-sequences");
                };
                let mut sets = [0u64; 2];
                sets[ys.index()] = prefix_class(&info, ys, sy, j);
                sets[xs.index()] = prefix_class(&info, xs, sy, j);
                Context::Classes(sets)
            }
        };
        rel_s2(&info, a, ys, y, w, e, ctx)
    })
}

/// Singletons `{p}` on `ps` and `{q}` on the other side share colour `a`;
/// their tallies relative to the context sets differ. Uses colour `b`.
fn rel_s2(info: &Arc<Info>, a: usize, ps: Side, p: usize, q: usize, b: usize, ctx: Context) -> Step {
    let qs = ps.other();
    let sets = ctx.sets();
    let (cp, cq) = (sets[ps.index()], sets[qs.index()]);
    if popcount(cp) != popcount(cq) {
        let (ls, larger) = if popcount(cp) > popcount(cq) { (ps, cp) } else { (qs, cq) };
        return match ctx {
            Context::Coloured(cc, _) => peel(larger, ls, cc, b),
            Context::Classes(_) => {
                let info = info.clone();
                let smaller = sets[ls.other().index()];
                play(colour_move(b, ls, larger), move |_, ans| {
                    let u = answer_mask(ans);
                    if let Some(s) = size_guard(ls, larger, u, b, a) {
                        return s;
                    }
                    match u & !smaller {
                        0 => resign("class sizes differ but the answer fits"),
                        esc => distinguish(&info, esc.trailing_zeros() as usize, ls.other(), larger, b, None),
                    }
                })
            }
        };
    }
    let tp = info.rel_tally(ps, p, cp);
    let tq = info.rel_tally(qs, q, cq);
    let (r, rs, use_in) = if tp.in_deg != tq.in_deg {
        if tp.in_deg < tq.in_deg {
            (p, ps, true)
        } else {
            (q, qs, true)
        }
    } else if tp.out_deg != tq.out_deg {
        if tp.out_deg < tq.out_deg {
            (p, ps, false)
        } else {
            (q, qs, false)
        }
    } else {
        return resign("relative tallies agree");
    };
    let sd = info.sd(rs);
    let cr = sets[rs.index()];
    let cs = sets[rs.other().index()];
    let sset = cr & !if use_in { sd.inn[r] } else { sd.out[r] };
    let info = info.clone();
    play(colour_move(b, rs, sset), move |_, ans| {
        let u = answer_mask(ans);
        if let Some(s) = size_guard(rs, sset, u, b, a) {
            return s;
        }
        let esc = u & !cs;
        if esc == 0 {
            return resign("relative degree argument found no edge");
        }
        match ctx {
            Context::Classes(_) => distinguish(&info, esc.trailing_zeros() as usize, rs.other(), sset, b, None),
            Context::Coloured(..) => resign("answer escaped the coloured context"),
        }
    })
}

/// Sets of colour `c` have equal sizes but differ in their count of some
/// tally (or tally-sequence) class.
fn class_count_punish(info: &Arc<Info>, pos: &Position, c: usize, key: Key) -> Step {
    let (a, b) = (pos.set(c, Side::G), pos.set(c, Side::H));
    let Some(d) = pick(info.k, &[c]) else {
        return resign("not enough colours");
    };
    if let Some(s) = size_guard(Side::G, a, b, c, d) {
        return s;
    }
    let (ca, cb) = (info.count(key, Side::G, a), info.count(key, Side::H, b));
    let Some(id) = class_mismatch(&ca, &cb) else {
        return resign("class counts agree");
    };
    let ps = if ca.get(&id).copied().unwrap_or(0) > cb.get(&id).copied().unwrap_or(0) { Side::G } else { Side::H };
    let qs = ps.other();
    let pset = pos.set(c, ps);
    let qset = pos.set(c, qs);
    let ids = info.ids(key, ps);
    let xp = mask_vertices(pset).into_iter().filter(|&v| ids[v] == id).fold(0u64, |m, v| m | 1 << v);
    let info = info.clone();
    play(colour_move(d, ps, xp), move |_, ans| {
        let u = answer_mask(ans);
        if let Some(s) = size_guard(ps, xp, u, d, c) {
            return s;
        }
        if u & !qset != 0 {
            return resign("answer outside the colour class survived");
        }
        let qids = info.ids(key, qs);
        match mask_vertices(u).into_iter().find(|&v| qids[v] != id) {
            Some(y) => distinguish(&info, y, qs, xp, d, None),
            None => resign("answer matches the over-represented class"),
        }
    })
}

/// ∀'s set of colour `c` was the closure of the `source` set but ∃'s was
/// not: colour the closure of ∃'s source set instead.
fn closure_punish(info: &Arc<Info>, pos: &Position, source: usize, side: Side, d: Direction, c: usize) -> Step {
    let ys = side.other();
    let target = info.eta(ys, pos.set(source, ys), d);
    let other = source;
    play(colour_move(c, ys, target), move |_, ans| {
        size_guard(ys, target, answer_mask(ans), c, other).unwrap_or_else(|| resign("closure answer survived"))
    })
}

/// Walks the closure sequence with alternating colours; the final sets
/// differ in size (S6) or in spectrum (EtaSpectrum).
#[allow(clippy::too_many_arguments)]
fn eta_chain(info: &Arc<Info>, cur: usize, side: Side, s: u64, t: u64, dirs: Arc<[Direction]>, i: usize, spectrum: bool) -> Step {
    let Some(next) = pick(info.k, &[cur]) else {
        return resign("not enough colours");
    };
    if i == dirs.len() {
        if !spectrum {
            return resign("closure sizes agree");
        }
        let pos_g = if side == Side::G { (s, t) } else { (t, s) };
        let mut p = Position { sets: vec![[Mask(0), Mask(0)]; info.k], pebbles: vec![] };
        p.sets[cur] = [Mask(pos_g.0), Mask(pos_g.1)];
        return class_count_punish(info, &p, cur, Key::Seq);
    }
    let d = dirs[i];
    let ns = info.eta(side, s, d);
    let expected = info.eta(side.other(), t, d);
    let info = info.clone();
    play(colour_move(next, side, ns), move |pos, ans| {
        let u = answer_mask(ans);
        if let Some(p) = size_guard(side, ns, u, next, cur) {
            return p;
        }
        if u != expected {
            return closure_punish(&info, pos, cur, side, d, next);
        }
        eta_chain(&info, next, side, ns, u, dirs.clone(), i + 1, spectrum)
    })
}

/// Tallies of the `members` sets relative to the `base` sets differ.
fn relative_punish(info: &Arc<Info>, pos: &Position, members: usize, base: usize) -> Step {
    let Some(g) = pick(info.k, &[members, base]) else {
        return resign("relativized punishment needs three colours");
    };
    let m = [pos.set(members, Side::G), pos.set(members, Side::H)];
    let bs = [pos.set(base, Side::G), pos.set(base, Side::H)];
    if let Some(s) = size_guard(Side::G, m[0], m[1], members, g) {
        return s;
    }
    if let Some(s) = size_guard(Side::G, bs[0], bs[1], base, g) {
        return s;
    }
    let ca = info.rel_counts(Side::G, m[0], bs[0]);
    let cb = info.rel_counts(Side::H, m[1], bs[1]);
    let Some(t) = ca.keys().chain(cb.keys()).copied().collect::<BTreeSet<Tally>>().into_iter().find(|k| ca.get(k) != cb.get(k))
    else {
        return resign("relative tallies agree");
    };
    let ps = if ca.get(&t).copied().unwrap_or(0) > cb.get(&t).copied().unwrap_or(0) { Side::G } else { Side::H };
    let qs = ps.other();
    let xp = mask_vertices(m[ps.index()])
        .into_iter()
        .filter(|&v| info.rel_tally(ps, v, bs[ps.index()]) == t)
        .fold(0u64, |acc, v| acc | 1 << v);
    let info = info.clone();
    play(colour_move(g, ps, xp), move |_, ans| {
        let u = answer_mask(ans);
        if let Some(s) = size_guard(ps, xp, u, g, members) {
            return s;
        }
        if u & !m[qs.index()] != 0 {
            return resign("answer outside the member set survived");
        }
        let Some(y) = mask_vertices(u).into_iter().find(|&v| info.rel_tally(qs, v, bs[qs.index()]) != t) else {
            return resign("answer matches the relative class");
        };
        let info = info.clone();
        play(colour_move(members, qs, 1 << y), move |_, ans| {
            let w = answer_mask(ans);
            if let Some(s) = size_guard(qs, 1 << y, w, members, g) {
                return s;
            }
            if w & !xp != 0 {
                return resign("answer outside the marked set survived");
            }
            rel_s2(&info, members, qs, y, w.trailing_zeros() as usize, g, Context::Coloured(base, bs))
        })
    })
}

/// When the orders differ: colour the whole larger graph.
fn punish_order(info: &Arc<Info>, c: usize) -> Step {
    let (ls, larger) = if info.n[0] > info.n[1] { (Side::G, info.full(Side::G)) } else { (Side::H, info.full(Side::H)) };
    let other = pick(info.k, &[c]);
    play(colour_move(c, ls, larger), move |_, ans| match other {
        Some(o) => size_guard(ls, larger, answer_mask(ans), c, o).unwrap_or_else(|| resign("order punishment survived")),
        None => resign("order punishment survived"),
    })
}

// ---------------------------------------------------------------------------
// Scripted strategies

/// Mapping of G to H by unique equal tally-sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapStatus {
    TotalBijection,
    UndefinedAt { vertex: usize },
    AmbiguousAt { sequence: TallySequence },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TallyMap {
    pub map: Vec<Option<usize>>,
    pub status: MapStatus,
}

pub fn tally_map(g: &Digraph, h: &Digraph) -> TallyMap {
    let (sg, sh) = (tally_sequences(g, None), tally_sequences(h, None));
    let mut by_seq: BTreeMap<&TallySequence, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (v, s) in sg.iter().enumerate() {
        by_seq.entry(s).or_default().0.push(v);
    }
    for (v, s) in sh.iter().enumerate() {
        by_seq.entry(s).or_default().1.push(v);
    }
    let mut map = vec![None; g.n()];
    let mut status = MapStatus::TotalBijection;
    for (s, (a, b)) in &by_seq {
        if a.len() == 1 && b.len() == 1 {
            map[a[0]] = Some(b[0]);
        } else if a.len() > 1 || b.len() > 1 {
            if status == MapStatus::TotalBijection {
                status = MapStatus::AmbiguousAt { sequence: (*s).clone() };
            }
        }
    }
    if status == MapStatus::TotalBijection {
        if let Some(v) = map.iter().position(Option::is_none) {
            status = MapStatus::UndefinedAt { vertex: v };
        } else if g.n() != h.n() {
            status = MapStatus::UndefinedAt { vertex: g.n().min(h.n()) };
        }
    }
    TallyMap { map, status }
}

/// Parameters of a named script.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptParams {
    /// Case of the one-colour proposition (1..=5); first applicable if absent.
    #[serde(default)]
    pub case: Option<u8>,
    /// Order of the complete base graph for the CFI script.
    #[serde(default)]
    pub cfi_n: Option<usize>,
    /// Rules whose violations the script punishes.
    #[serde(default)]
    pub guard: Option<ResponseFilter>,
}

pub const SCRIPT_NAMES: &[&str] =
    &["one_colour", "log_palette", "tally", "stockmeyer", "stars", "ramachandran", "cfi", "deck", "empty"];

pub fn default_guard(k: usize) -> ResponseFilter {
    if k < 2 {
        ResponseFilter::default()
    } else {
        ResponseFilter::new(&[Rule::S1, Rule::S2, Rule::S3, Rule::S4, Rule::TallySpectrum, Rule::S5, Rule::S6])
    }
}

fn build(
    name: &str,
    guard: ResponseFilter,
    oblivious_side: Option<Side>,
    start: impl Fn(&Position) -> Step + Send + Sync + 'static,
) -> Strategy {
    Strategy { name: name.to_string(), guard, oblivious_side, start: Arc::new(start) }
}

/// Plays `moves` in order under the guard, then gives up.
fn fixed_line(info: &Arc<Info>, guard: &Arc<ResponseFilter>, moves: Arc<[Move]>, i: usize) -> Step {
    if i == moves.len() {
        return resign("script exhausted without a trigger");
    }
    let (info2, guard2, moves2) = (info.clone(), guard.clone(), moves.clone());
    guarded(info, guard, moves[i], move |_, _| fixed_line(&info2, &guard2, moves2.clone(), i + 1))
}

fn fixed_strategy(game: &Game, name: &str, guard: ResponseFilter, moves: Vec<Move>) -> Strategy {
    let info = Info::new(game);
    let side = moves.first().map(Move::side);
    let oblivious = side.filter(|s| moves.iter().all(|m| m.side() == *s));
    let g = Arc::new(guard.clone());
    let moves: Arc<[Move]> = moves.into();
    build(name, guard, oblivious, move |_| fixed_line(&info, &g, moves.clone(), 0))
}

fn bits_needed(m: usize) -> usize {
    let mut b = 0;
    while (1usize << b) < m {
        b += 1;
    }
    b.max(1)
}

fn log_palette_moves(side: Side, members: &[usize], colours: &[usize]) -> Vec<Move> {
    colours
        .iter()
        .enumerate()
        .map(|(bit, &c)| {
            let m = members.iter().enumerate().filter(|(i, _)| i >> bit & 1 == 1).fold(0u64, |m, (_, &v)| m | 1 << v);
            colour_move(c, side, m)
        })
        .collect()
}

fn one_colour_moves(game: &Game, case: Option<u8>) -> Result<Vec<Move>> {
    let (g, h) = (&game.cfg.g, &game.cfg.h);
    let graphs = [(Side::G, g), (Side::H, h)];
    let try_case = |c: u8| -> Option<Vec<Move>> {
        match c {
            1 => {
                let (ng, nh) = (g.n(), h.n());
                let side = if ng == 1 && nh > 1 {
                    Side::H
                } else if nh == 1 && ng > 1 {
                    Side::G
                } else {
                    return None;
                };
                Some(vec![colour_move(0, side, 1)])
            }
            2 | 3 => {
                let conn = (g.connectivity(), h.connectivity());
                let flag = |cn: crate::graph::Connectivity| if c == 2 { cn.strongly_connected } else { cn.weakly_connected };
                if flag(conn.0) == flag(conn.1) {
                    return None;
                }
                let (side, gr) = if flag(conn.0) { graphs[1] } else { graphs[0] };
                (0..gr.n()).find_map(|v| {
                    let r = if c == 2 { gr.reachable_from(v) } else { gr.weak_component(v) };
                    let m = crate::graph::mask_of(&r);
                    (popcount(m) < gr.n()).then(|| vec![colour_move(0, side, m)])
                })
            }
            4 => {
                let irr = |gr: &Digraph| (0..gr.n()).find(|&v| !gr.has_loop(v));
                match (irr(g), irr(h)) {
                    (Some(v), None) => Some(vec![colour_move(0, Side::G, 1 << v)]),
                    (None, Some(v)) => Some(vec![colour_move(0, Side::H, 1 << v)]),
                    _ => None,
                }
            }
            5 => {
                if g.n() > 2 || h.n() > 2 || crate::iso::are_isomorphic(g, h) {
                    return None;
                }
                if g.n() == 2 && h.n() == 2 {
                    Some(vec![colour_move(0, Side::G, 1)])
                } else {
                    [1u8, 4].into_iter().find_map(|c| try_case_inner(game, c))
                }
            }
            _ => None,
        }
    };
    match case {
        Some(c) if !(1..=5).contains(&c) => Err(Error::Config(format!("one-colour case must be 1..=5, got {c}"))),
        Some(c) => try_case(c).ok_or_else(|| Error::NotApplicable(format!("one-colour case {c} does not apply"))),
        None => (1..=5)
            .find_map(try_case)
            .ok_or_else(|| Error::NotApplicable("no one-colour case applies".into())),
    }
}

fn try_case_inner(game: &Game, c: u8) -> Option<Vec<Move>> {
    one_colour_moves(game, Some(c)).ok()
}

/// Tally strategy: spectrum mismatch or a broken edge of the
/// tally map.
fn tally_strategy(game: &Game, guard: ResponseFilter) -> Result<Strategy> {
    if game.k() < 2 {
        return Err(Error::NotApplicable("the tally strategy needs two colours".into()));
    }
    let info = Info::new(game);
    let g_arc = Arc::new(guard.clone());
    if info.n[0] != info.n[1] {
        let i = info.clone();
        return Ok(build("tally", guard, None, move |_| punish_order(&i, 0)));
    }
    let (cg, ch) = (info.count(Key::Seq, Side::G, info.full(Side::G)), info.count(Key::Seq, Side::H, info.full(Side::H)));
    if let Some(id) = class_mismatch(&cg, &ch) {
        let ps = if cg.get(&id).copied().unwrap_or(0) > ch.get(&id).copied().unwrap_or(0) { Side::G } else { Side::H };
        let ids = info.ids(Key::Seq, ps);
        let m = (0..info.n[ps.index()]).filter(|&v| ids[v] == id).fold(0u64, |m, v| m | 1 << v);
        return Ok(fixed_strategy(game, "tally", guard, vec![colour_move(0, ps, m)]));
    }
    let (g, h) = (&game.cfg.g, &game.cfg.h);
    let tm = tally_map(g, h);
    if tm.status != MapStatus::TotalBijection {
        return Err(Error::NotApplicable(format!("tally map is not a bijection: {:?}", tm.status)));
    }
    let hm: Vec<usize> = tm.map.iter().map(|x| x.expect("total")).collect();
    let n = g.n();
    if let Some(u) = (0..n).find(|&u| g.has_loop(u) != h.has_loop(hm[u])) {
        drop(g_arc);
        return Ok(fixed_strategy(game, "tally", guard, vec![colour_move(0, Side::G, 1 << u)]));
    }
    let pair = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).find(|&(u, v)| {
        u != v && (g.has_edge(u, v) != h.has_edge(hm[u], hm[v]) || g.has_edge(v, u) != h.has_edge(hm[v], hm[u]))
    });
    let Some((u, v)) = pair else {
        return Err(Error::NotApplicable("the tally map is an isomorphism".into()));
    };
    Ok(fixed_strategy(game, "tally", guard, vec![colour_move(0, Side::G, 1 << u), colour_move(1, Side::G, 1 << v)]))
}

fn cfi_moves(game: &Game, n: usize) -> Result<Vec<Move>> {
    let c = cfi(&complete_graph(n), None)?;
    if c.graph.to_rows() != game.cfg.g.to_rows() {
        return Err(Error::NotApplicable(format!("G is not the untwisted CFI graph over K{n}")));
    }
    let mask = |f: &dyn Fn(&CfiLabel) -> bool| {
        c.labels.iter().enumerate().filter(|(_, l)| f(l)).fold(0u64, |m, (i, _)| m | 1 << i)
    };
    let r = mask(&|l| matches!(l, CfiLabel::Internal { subset, .. } if subset.is_empty()));
    let b = mask(&|l| matches!(l, CfiLabel::External { letter: 'a', .. }));
    let all_internal = mask(&|l| l.is_internal());
    Ok(vec![colour_move(0, Side::G, r), colour_move(1, Side::G, b), colour_move(0, Side::G, all_internal)])
}

/// One stage of the degree-associated deck strategy, as a report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeckStage {
    pub tally: Tally,
    /// Vertices of G and of H whose card and tally match the differing entry.
    pub s: Vec<usize>,
    pub t: Vec<usize>,
}

/// Stage data for the subgraphs induced by `gm` and `hm`, or `None` when
/// their degree-associated decks agree.
pub fn deck_stage(g: &Digraph, h: &Digraph, gm: u64, hm: u64) -> Result<Option<DeckStage>> {
    let gv = mask_vertices(gm);
    let hv = mask_vertices(hm);
    let (gi, hi) = (g.induced(&gv), h.induced(&hv));
    let (cg, ch) = (recon::cards(&gi)?, recon::cards(&hi)?);
    let (dg, dh) = (recon::da_deck(&gi)?, recon::da_deck(&hi)?);
    let Some(((tally, card), _, _)) = dg.difference(&dh) else {
        return Ok(None);
    };
    let pick = |cards: &[(Tally, Vec<u8>)], vs: &[usize]| {
        cards.iter().enumerate().filter(|(_, c)| c.0 == tally && c.1 == card).map(|(i, _)| vs[i]).collect()
    };
    Ok(Some(DeckStage { tally, s: pick(&cg, &gv), t: pick(&ch, &hv) }))
}

/// Three-colour strategy driven by differing degree-associated decks of
/// the nested subgraphs.
fn deck_strategy(game: &Game) -> Result<Strategy> {
    if game.k() < 3 {
        return Err(Error::NotApplicable("the deck strategy needs three colours".into()));
    }
    let info = Info::new(game);
    let graphs = Arc::new((game.cfg.g.clone(), game.cfg.h.clone()));
    if info.n[0] >= 2 && info.n[0] == info.n[1] && info.n[0] > 4 {
        let (g, h) = &*graphs;
        if deck_stage(g, h, info.full(Side::G), info.full(Side::H))?.is_none() {
            return Err(Error::NotApplicable("stage 0: degree-associated decks agree".into()));
        }
    }
    Ok(build("deck", default_guard(3), None, move |_| {
        deck_step(&info, &graphs, None, [info.full(Side::G), info.full(Side::H)], 0)
    }))
}

fn deck_step(info: &Arc<Info>, graphs: &Arc<(Digraph, Digraph)>, cur: Option<usize>, sets: [u64; 2], stage: usize) -> Step {
    let free: Vec<usize> = (0..3).filter(|&c| Some(c) != cur).collect();
    let (a, b) = (free[0], free[1]);
    let (sg, sh) = (popcount(sets[0]), popcount(sets[1]));
    if sg != sh {
        return match cur {
            None => punish_order(info, a),
            Some(c) => peel_pair(Side::G, sets[0], sets[1], c, a),
        };
    }
    if sg <= 4 {
        let members = mask_vertices(sets[0]);
        let moves = log_palette_moves(Side::G, &members, &free[..bits_needed(sg).min(2)]);
        return fixed_line(info, &Arc::new(ResponseFilter::default()), moves.into(), 0);
    }
    let (g, h) = (&graphs.0, &graphs.1);
    let st = match deck_stage(g, h, sets[0], sets[1]) {
        Ok(Some(st)) => st,
        Ok(None) => return resign(format!("stage {stage}: degree-associated decks agree")),
        Err(e) => return resign(format!("stage {stage}: {e}")),
    };
    let sm = st.s.iter().fold(0u64, |m, &v| m | 1 << v);
    let tm = st.t.iter().fold(0u64, |m, &v| m | 1 << v);
    let (ps, pset) = if st.s.len() > st.t.len() { (Side::G, sm) } else { (Side::H, tm) };
    let qs = ps.other();
    let ctx = cur.map(|c| Context::Coloured(c, sets));
    let info2 = info.clone();
    let graphs = graphs.clone();
    play(colour_move(a, ps, pset), move |_, ans| {
        let y = answer_mask(ans);
        if let Some(s) = size_guard(ps, pset, y, a, b) {
            return s;
        }
        if y & !sets[qs.index()] != 0 {
            return resign("answer escaped the current subgraph");
        }
        let rel = sets[qs.index()];
        if let Some(bad) = mask_vertices(y).into_iter().find(|&v| info2.rel_tally(qs, v, rel) != st.tally) {
            let ctx = ctx.unwrap_or(Context::Classes([info2.full(Side::G), info2.full(Side::H)]));
            return distinguish(&info2, bad, qs, pset, a, Some(ctx));
        }
        let qgraph = if qs == Side::G { &graphs.0 } else { &graphs.1 };
        let card_of = |u: usize| {
            let keep: Vec<usize> = mask_vertices(rel & !(1 << u));
            crate::iso::canonical_form(&qgraph.induced(&keep))
        };
        let pgraph = if ps == Side::G { &graphs.0 } else { &graphs.1 };
        let f_card = {
            let v0 = pset.trailing_zeros() as usize;
            crate::iso::canonical_form(&pgraph.induced(&mask_vertices(sets[ps.index()] & !(1 << v0))))
        };
        let Some(u0) = mask_vertices(y).into_iter().find(|&u| card_of(u) != f_card) else {
            return resign("every answered vertex has the stage card");
        };
        let hq = rel & !(1 << u0);
        let (info3, graphs3) = (info2.clone(), graphs.clone());
        play(colour_move(b, qs, hq), move |_, ans| {
            let x = answer_mask(ans);
            if let Some(s) = size_guard(qs, hq, x, b, a) {
                return s;
            }
            let pcur = sets[ps.index()];
            let missing = pcur & !x;
            if x & !pcur != 0 || popcount(missing) != 1 || missing & pset == 0 {
                return resign("deleted-vertex answer survived");
            }
            let mut next = [0u64; 2];
            next[ps.index()] = pcur & !missing;
            next[qs.index()] = hq;
            deck_step(&info3, &graphs3, Some(b), next, stage + 1)
        })
    })
}

/// Builds a named ∀ script for `game`.
pub fn scripted(game: &Game, name: &str, params: &ScriptParams) -> Result<Strategy> {
    let guard = params.guard.clone().unwrap_or_else(|| default_guard(game.k()));
    guard.validate(game.k())?;
    match name {
        "one_colour" => Ok(fixed_strategy(game, name, ResponseFilter::default(), one_colour_moves(game, params.case)?)),
        "log_palette" => {
            let (ng, nh) = (game.n(Side::G), game.n(Side::H));
            if ng != nh {
                return Err(Error::NotApplicable("log-palette needs equal orders".into()));
            }
            let bits = bits_needed(ng);
            if bits > game.k() {
                return Err(Error::NotApplicable(format!("log-palette needs {bits} colours")));
            }
            let members: Vec<usize> = (0..ng).collect();
            let colours: Vec<usize> = (0..bits).collect();
            Ok(fixed_strategy(game, name, ResponseFilter::default(), log_palette_moves(Side::G, &members, &colours)))
        }
        "tally" | "stockmeyer" => tally_strategy(game, guard),
        "stars" => {
            if game.k() < 2 || game.n(Side::H) != 7 {
                return Err(Error::NotApplicable("stars needs the wheel pair with two colours".into()));
            }
            let moves = vec![colour_move(0, Side::H, 0b0010_1010), colour_move(1, Side::H, 0b0101_0100)];
            Ok(fixed_strategy(game, name, guard, moves))
        }
        "ramachandran" => {
            if game.k() < 2 || game.n(Side::G) != 6 {
                return Err(Error::NotApplicable("ramachandran needs the tournament pair with two colours".into()));
            }
            let moves = vec![colour_move(0, Side::G, 1 << 5), colour_move(1, Side::G, 1 << 4)];
            Ok(fixed_strategy(game, name, guard, moves))
        }
        "cfi" => {
            let n = params.cfi_n.ok_or_else(|| Error::Config("cfi needs cfi_n".into()))?;
            if game.k() < 2 {
                return Err(Error::NotApplicable("cfi needs two colours".into()));
            }
            Ok(fixed_strategy(game, name, guard, cfi_moves(game, n)?))
        }
        "deck" => deck_strategy(game),
        "empty" => Ok(build(name, ResponseFilter::default(), Some(Side::G), |_| empty_step())),
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

fn empty_step() -> Step {
    play(colour_move(0, Side::G, 0), |_, _| empty_step())
}

/// Edge-type combinations (over {coloured, uncoloured}²) witnessed by the
/// nonempty one-colour sets of `g`, as 4-bit masks: bit 0 cc, 1 cu, 2 uc, 3 uu.
pub fn edge_type_combinations(g: &Digraph) -> Result<BTreeSet<u8>> {
    if g.n() > FILTER_ENUMERATION_LIMIT {
        return Err(Error::SizeGuard(format!("limited to {FILTER_ENUMERATION_LIMIT} vertices")));
    }
    let sd = SideData::new(g);
    let mut out = BTreeSet::new();
    for x in 1..=sd.full {
        let u = sd.full & !x;
        let mut m = 0u8;
        for v in 0..sd.n {
            let from = if x >> v & 1 == 1 { 0 } else { 2 };
            let o = sd.out[v];
            if o & x != 0 {
                m |= 1 << from;
            }
            if o & u != 0 {
                m |= 1 << (from + 1);
            }
        }
        out.insert(m);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// ∃ heuristics

pub trait Eloise: Send + Sync {
    fn name(&self) -> String;
    fn answer(&self, game: &Game, pending: &PendingPosition) -> Answer;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Heuristic {
    Mirror,
    GreedySpectrum,
    RandomConstrained { seed: u64 },
}

struct Mirror {
    g_to_h: Vec<usize>,
    h_to_g: Vec<usize>,
}

impl Eloise for Mirror {
    fn name(&self) -> String {
        "mirror".into()
    }
    fn answer(&self, _game: &Game, pending: &PendingPosition) -> Answer {
        let map = |side: Side| if side == Side::G { &self.g_to_h } else { &self.h_to_g };
        match pending.mv {
            Move::Colour { side, vertices, .. } => Answer::Set(Mask(permute_mask(vertices.0, map(side)))),
            Move::Pebble { side, vertex, .. } => Answer::Vertex(map(side)[vertex]),
        }
    }
}

const CANDIDATE_LIMIT: usize = 4096;
const BRUTE_FORCE_SIDE: usize = 14;

fn candidates(game: &Game, pending: &PendingPosition) -> Vec<Answer> {
    let n = game.n(pending.mv.side().other());
    if n <= BRUTE_FORCE_SIDE || matches!(pending.mv, Move::Pebble { .. }) {
        return game.all_answers(pending);
    }
    let limits = AnswerLimits { max_answers: Some(CANDIDATE_LIMIT), ..Default::default() };
    let mut a = game.surviving_answers(pending, &limits).answers;
    if a.is_empty() {
        a.push(Answer::Set(Mask(0)));
    }
    a
}

fn answer_key(a: &Answer) -> u64 {
    match *a {
        Answer::Set(m) => m.0,
        Answer::Vertex(v) => v as u64,
    }
}

struct Greedy {
    info: Arc<Info>,
    filter: ResponseFilter,
}

impl Eloise for Greedy {
    fn name(&self) -> String {
        "greedy_spectrum".into()
    }
    fn answer(&self, game: &Game, pending: &PendingPosition) -> Answer {
        candidates(game, pending)
            .into_iter()
            .min_by_key(|a| {
                let after = game.apply_existential(pending, *a).expect("legal");
                let violates = check_answer(&self.info, &self.filter, &pending.mv, *a, &after).is_some();
                (violates, game.losing_conditions(&after).len(), answer_key(a))
            })
            .expect("at least one candidate")
    }
}

struct RandomConstrained {
    info: Arc<Info>,
    filter: ResponseFilter,
    seed: u64,
}

impl Eloise for RandomConstrained {
    fn name(&self) -> String {
        format!("random_constrained({})", self.seed)
    }
    fn answer(&self, game: &Game, pending: &PendingPosition) -> Answer {
        let all = candidates(game, pending);
        let mut surviving = Vec::new();
        let mut compliant = Vec::new();
        for a in &all {
            let after = game.apply_existential(pending, *a).expect("legal");
            if !game.is_losing(&after) {
                surviving.push(*a);
                if check_answer(&self.info, &self.filter, &pending.mv, *a, &after).is_none() {
                    compliant.push(*a);
                }
            }
        }
        let pool = if !compliant.is_empty() {
            compliant
        } else if !surviving.is_empty() {
            surviving
        } else {
            all
        };
        let mut h = DefaultHasher::new();
        self.seed.hash(&mut h);
        pending.hash(&mut h);
        let mut rng = StdRng::seed_from_u64(h.finish());
        pool[rng.gen_range(0..pool.len())]
    }
}

pub fn eloise_heuristic(game: &Game, heuristic: &Heuristic) -> Result<Box<dyn Eloise>> {
    let filter = if game.k() >= 2 { ResponseFilter::necessary() } else { ResponseFilter::default() };
    Ok(match *heuristic {
        Heuristic::Mirror => {
            let (g, h) = (&game.cfg.g, &game.cfg.h);
            let iso = find_isomorphism(g, h, IsoMode::RefinedBacktracking)?
                .and_then(|m| m.as_perm())
                .ok_or_else(|| Error::NotApplicable("mirror needs an isomorphism".into()))?;
            let mut inv = vec![0; iso.len()];
            for (v, &w) in iso.iter().enumerate() {
                inv[w] = v;
            }
            Box::new(Mirror { g_to_h: iso, h_to_g: inv })
        }
        Heuristic::GreedySpectrum => Box::new(Greedy { info: Info::new(game), filter }),
        Heuristic::RandomConstrained { seed } => Box::new(RandomConstrained { info: Info::new(game), filter, seed }),
    })
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Adversary {
    Exhaustive { depth: u32 },
    FilteredExhaustive { filter: ResponseFilter, depth: u32 },
    HeuristicSuite { seeds: Vec<u64>, depth: u32 },
}

impl Adversary {
    pub fn depth(&self) -> u32 {
        match self {
            Adversary::Exhaustive { depth }
            | Adversary::FilteredExhaustive { depth, .. }
            | Adversary::HeuristicSuite { depth, .. } => *depth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub node_budget: u64,
    /// Merge ∃ answers that differ by an automorphism fixing the position,
    /// for scripts whose main line is fixed and played on one side.
    pub symmetry: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { node_budget: 2_000_000, symmetry: true }
    }
}

/// ∀ decision node: the move and every explored ∃ answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertNode {
    pub mv: Move,
    pub branches: Vec<Branch>,
    /// Answers losing at once; `None` when not counted.
    pub triggered: Option<u64>,
    /// Triggers of the first losing answer, as a witness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_trigger: Option<Vec<Trigger>>,
    /// Surviving answers omitted because they break a listed rule.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub punished: BTreeMap<Rule, u64>,
    /// Answers merged with an explored answer by symmetry.
    #[serde(skip_serializing_if = "is_zero")]
    pub merged: u64,
}

fn is_zero(x: &u64) -> bool {
    *x == 0
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Branch {
    pub answer: Answer,
    pub node: CertNode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlayoutStep {
    pub mv: Move,
    pub answer: Answer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyResult {
    Certified,
    Refuted,
    NotRefuted,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub strategy: String,
    pub coverage: String,
    pub depth: u32,
    pub rules: Vec<String>,
    pub node_count: u64,
    pub result: VerifyResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub playout: Option<Vec<PlayoutStep>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<CertNode>,
}

impl VerifyReport {
    pub fn is_certified(&self) -> bool {
        self.result == VerifyResult::Certified
    }

    /// The summary object {coverage, depth, rules, node_count, result}.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "strategy": self.strategy,
            "coverage": self.coverage,
            "depth": self.depth,
            "rules": self.rules,
            "node_count": self.node_count,
            "result": self.result,
            "reason": self.reason,
        })
    }
}

enum Stop {
    Refuted(Vec<PlayoutStep>, String),
    Budget,
}

struct Walker<'a> {
    game: &'a Game,
    info: Arc<Info>,
    filter: Option<ResponseFilter>,
    max_depth: u32,
    budget: u64,
    nodes: u64,
    deepest: u32,
    symmetry: Option<Side>,
}

impl Walker<'_> {
    fn answers(&self, pending: &PendingPosition, node: &mut CertNode) -> std::result::Result<Vec<Answer>, Stop> {
        let game = self.game;
        let other = pending.mv.side().other();
        let n = game.n(other);
        let mut out = Vec::new();
        match (&self.filter, pending.mv) {
            (_, Move::Pebble { .. }) | (None, _) if n <= BRUTE_FORCE_SIDE || matches!(pending.mv, Move::Pebble { .. }) => {
                let mut triggered = 0;
                for a in game.all_answers(pending) {
                    let after = game.apply_existential(pending, a).expect("legal");
                    if game.is_losing(&after) {
                        triggered += 1;
                        if node.sample_trigger.is_none() {
                            node.sample_trigger = Some(game.losing_conditions(&after));
                        }
                    } else {
                        out.push(a);
                    }
                }
                node.triggered = Some(triggered);
            }
            (filter, Move::Colour { side, vertices, .. }) => {
                let mut limits = AnswerLimits { max_nodes: Some(self.budget.saturating_mul(64)), ..Default::default() };
                if let Some(f) = filter {
                    if f.contains(Rule::S1) {
                        limits.size = Some(vertices.len());
                    }
                    let key = if f.contains(Rule::TallySpectrum) {
                        Some(Key::Seq)
                    } else if f.contains(Rule::S4) {
                        Some(Key::Tally)
                    } else {
                        None
                    };
                    if let Some(key) = key {
                        let targets = self.info.count(key, side, vertices.0);
                        limits.classes = Some((self.info.ids(key, other).to_vec(), targets));
                    }
                }
                let set = game.surviving_answers(pending, &limits);
                if !set.complete {
                    return Err(Stop::Budget);
                }
                out = set.answers;
            }
            (_, Move::Pebble { .. }) => unreachable!("handled above"),
        }
        if let Some(f) = &self.filter {
            let mut kept = Vec::new();
            for a in out {
                let after = game.apply_existential(pending, a).expect("legal");
                match check_answer(&self.info, f, &pending.mv, a, &after) {
                    Some(v) => *node.punished.entry(v.rule).or_insert(0) += 1,
                    None => kept.push(a),
                }
            }
            out = kept;
        }
        if self.symmetry == Some(pending.mv.side()) {
            if let Some(stab) = game.stabilizer(&pending.base, other).filter(|s| s.len() > 1) {
                let before = out.len();
                out.retain(|a| match *a {
                    Answer::Set(m) => stab.iter().all(|p| permute_mask(m.0, p) >= m.0),
                    Answer::Vertex(v) => stab.iter().all(|p| p[v] >= v),
                });
                node.merged = (before - out.len()) as u64;
            }
        }
        Ok(out)
    }

    fn walk(&mut self, step: Step, pos: &Position, depth: u32, path: &mut Vec<PlayoutStep>) -> std::result::Result<CertNode, Stop> {
        let (mv, cont) = match step {
            Step::Resign(reason) => return Err(Stop::Refuted(path.clone(), reason)),
            Step::Play(mv, cont) => (mv, cont),
        };
        if depth >= self.max_depth {
            return Err(Stop::Refuted(path.clone(), format!("∃ survived {depth} rounds")));
        }
        if let Err(e) = self.game.check_move(pos, &mv) {
            return Err(Stop::Refuted(path.clone(), format!("script played an illegal move: {e}")));
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Stop::Budget);
        }
        self.deepest = self.deepest.max(depth + 1);
        let pending = self.game.apply_universal(pos, mv).expect("checked");
        let mut node = CertNode {
            mv,
            branches: Vec::new(),
            triggered: None,
            sample_trigger: None,
            punished: BTreeMap::new(),
            merged: 0,
        };
        for a in self.answers(&pending, &mut node)? {
            let next = self.game.apply_existential(&pending, a).expect("legal");
            path.push(PlayoutStep { mv, answer: a });
            let child = self.walk(cont(&next, a), &next, depth + 1, path)?;
            path.pop();
            node.branches.push(Branch { answer: a, node: child });
        }
        Ok(node)
    }
}

/// Checks `strategy` against the adversary class. Exhaustive and filtered
/// adversaries yield a certificate tree; the heuristic suite only ever
/// reports "not refuted".
pub fn verify(game: &Game, strategy: &Strategy, adversary: &Adversary, opts: &VerifyOptions) -> Result<VerifyReport> {
    let info = Info::new(game);
    let root = game.initial_position();
    let mut report = VerifyReport {
        strategy: strategy.name.clone(),
        coverage: String::new(),
        depth: 0,
        rules: Vec::new(),
        node_count: 0,
        result: VerifyResult::Certified,
        reason: None,
        playout: None,
        tree: None,
    };
    let (filter, depth) = match adversary {
        Adversary::HeuristicSuite { seeds, depth } => {
            report.coverage = "heuristic_suite".into();
            let mut players: Vec<Box<dyn Eloise>> = vec![eloise_heuristic(game, &Heuristic::GreedySpectrum)?];
            if let Ok(m) = eloise_heuristic(game, &Heuristic::Mirror) {
                players.push(m);
            }
            for &seed in seeds {
                players.push(eloise_heuristic(game, &Heuristic::RandomConstrained { seed })?);
            }
            for p in &players {
                let out = playout(game, strategy, p.as_ref(), *depth)?;
                report.node_count += out.steps.len() as u64;
                report.depth = report.depth.max(out.steps.len() as u32);
                if out.triggers.is_empty() {
                    report.result = VerifyResult::Refuted;
                    report.reason = Some(format!("{} survived: {}", p.name(), out.reason));
                    report.playout = Some(out.steps);
                    return Ok(report);
                }
            }
            report.result = VerifyResult::NotRefuted;
            return Ok(report);
        }
        Adversary::Exhaustive { depth } => {
            report.coverage = "exhaustive".into();
            (None, *depth)
        }
        Adversary::FilteredExhaustive { filter, depth } => {
            filter.validate(game.k())?;
            report.coverage = "filtered_exhaustive".into();
            report.rules = filter.names();
            (Some(filter.clone()), *depth)
        }
    };
    let symmetry = if opts.symmetry && filter.is_some() { strategy.oblivious_side } else { None };
    let mut w = Walker { game, info, filter, max_depth: depth, budget: opts.node_budget, nodes: 0, deepest: 0, symmetry };
    let mut path = Vec::new();
    let out = w.walk(strategy.start(&root), &root, 0, &mut path);
    report.node_count = w.nodes;
    report.depth = w.deepest;
    match out {
        Ok(tree) => report.tree = Some(tree),
        Err(Stop::Refuted(p, reason)) => {
            report.result = VerifyResult::Refuted;
            report.reason = Some(reason);
            report.playout = Some(p);
        }
        Err(Stop::Budget) => {
            report.result = VerifyResult::BudgetExhausted;
            report.reason = Some(format!("node budget {} exhausted", opts.node_budget));
        }
    }
    Ok(report)
}

/// Outcome of a single strategy-vs-heuristic game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Playout {
    pub steps: Vec<PlayoutStep>,
    pub triggers: Vec<Trigger>,
    pub reason: String,
}

pub fn playout(game: &Game, strategy: &Strategy, eloise: &dyn Eloise, depth: u32) -> Result<Playout> {
    let mut pos = game.initial_position();
    let mut step = strategy.start(&pos);
    let mut steps = Vec::new();
    loop {
        let (mv, cont) = match step {
            Step::Resign(r) => return Ok(Playout { steps, triggers: vec![], reason: r }),
            Step::Play(mv, cont) => (mv, cont),
        };
        if steps.len() as u32 >= depth {
            return Ok(Playout { steps, triggers: vec![], reason: format!("depth {depth} reached") });
        }
        let pending = game.apply_universal(&pos, mv)?;
        let a = eloise.answer(game, &pending);
        pos = game.apply_existential(&pending, a)?;
        steps.push(PlayoutStep { mv, answer: a });
        let triggers = game.losing_conditions(&pos);
        if !triggers.is_empty() {
            return Ok(Playout { steps, triggers, reason: "trigger".into() });
        }
        step = cont(&pos, a);
    }
}

/// Runs a punishment from `pos` against exhaustive ∃.
pub fn verify_punishment(game: &Game, pos: &Position, v: &Violation, depth: u32, opts: &VerifyOptions) -> Result<VerifyReport> {
    let info = Info::new(game);
    let step = punish(&info, pos, v)?;
    let mut w = Walker { game, info, filter: None, max_depth: depth, budget: opts.node_budget, nodes: 0, deepest: 0, symmetry: None };
    let mut path = Vec::new();
    let out = w.walk(step, pos, 0, &mut path);
    let mut report = VerifyReport {
        strategy: format!("punish({})", v.rule),
        coverage: "exhaustive".into(),
        depth: w.deepest,
        rules: vec![],
        node_count: w.nodes,
        result: VerifyResult::Certified,
        reason: None,
        playout: None,
        tree: None,
    };
    match out {
        Ok(t) => report.tree = Some(t),
        Err(Stop::Refuted(p, r)) => {
            report.result = VerifyResult::Refuted;
            report.reason = Some(r);
            report.playout = Some(p);
        }
        Err(Stop::Budget) => report.result = VerifyResult::BudgetExhausted,
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{GameConfig, Variant};
    use crate::gen::{fig4, fig5, fig6, fig7};

    fn game(g: Digraph, h: Digraph, k: usize) -> Game {
        Game::new(GameConfig::new(g, h, k, Variant::Plain)).unwrap()
    }

    #[test]
    fn filters_parse_and_validate() {
        assert_eq!(ResponseFilter::parse("S1, s4").unwrap(), ResponseFilter::necessary());
        assert!(ResponseFilter::parse("S9").is_err());
        assert!(!ResponseFilter::all(2).contains(Rule::Relativized3));
        assert!(ResponseFilter::all(3).contains(Rule::Relativized3));
        assert!(ResponseFilter::new(&[Rule::Relativized3]).validate(2).is_err());
        assert_eq!(ResponseFilter::necessary().names(), vec!["S1", "S4"]);
    }

    #[test]
    fn size_mismatch_breaks_s1() {
        let path = Digraph::from_rows(&["010", "001", "000"], true).unwrap();
        let gm = game(path.clone(), path, 2);
        let info = Info::new(&gm);
        let mv = Move::colour(0, Side::G, &[0]);
        let pending = gm.apply_universal(&gm.initial_position(), mv).unwrap();
        let answer = Answer::Set(Mask(0b011));
        let after = gm.apply_existential(&pending, answer).unwrap();
        let v = check_answer(&info, &ResponseFilter::necessary(), &mv, answer, &after).unwrap();
        assert_eq!(v.rule, Rule::S1);
        assert!(reproduce(&info, &after, &v));
        assert!(verify_punishment(&gm, &after, &v, 10, &VerifyOptions::default()).unwrap().is_certified());
        let fine = Answer::Set(Mask(0b001));
        let after = gm.apply_existential(&pending, fine).unwrap();
        assert!(check_answer(&info, &ResponseFilter::all(2), &mv, fine, &after).is_none());
    }

    #[test]
    fn tally_maps() {
        let m = tally_map(&fig6(), &fig7());
        assert_eq!(m.status, MapStatus::TotalBijection);
        assert_eq!(m.map[5], Some(3));
        assert_eq!(m.map[4], Some(4));
        let stars = tally_map(&fig4(), &fig5());
        assert!(matches!(stars.status, MapStatus::AmbiguousAt { .. }));
    }

    #[test]
    fn edge_types_of_small_graphs() {
        assert_eq!(edge_type_combinations(&Digraph::edgeless(1, true)).unwrap().len(), 1);
        let (g, h) = crate::gen::fig1();
        assert_eq!(edge_type_combinations(&g).unwrap(), edge_type_combinations(&h).unwrap());
    }

    #[test]
    fn scripts_check_applicability() {
        let gm = game(fig6(), fig7(), 1);
        assert!(scripted(&gm, "ramachandran", &ScriptParams::default()).is_err());
        assert!(scripted(&gm, "nope", &ScriptParams::default()).is_err());
        let gm = game(fig4(), fig5(), 2);
        assert!(scripted(&gm, "cfi", &ScriptParams::default()).is_err());
        let bad = ScriptParams { case: Some(9), ..Default::default() };
        assert!(scripted(&game(fig4(), fig5(), 1), "one_colour", &bad).is_err());
    }

    #[test]
    fn stars_certified_and_empty_refuted() {
        let gm = game(fig4(), fig5(), 2);
        let s = scripted(&gm, "stars", &ScriptParams::default()).unwrap();
        let adv = Adversary::FilteredExhaustive { filter: ResponseFilter::necessary(), depth: 3 };
        let r = verify(&gm, &s, &adv, &VerifyOptions::default()).unwrap();
        assert!(r.is_certified());
        assert_eq!(r.rules, vec!["S1", "S4"]);
        let again = verify(&gm, &s, &adv, &VerifyOptions::default()).unwrap();
        assert_eq!(r, again);
        let empty = scripted(&gm, "empty", &ScriptParams::default()).unwrap();
        let r = verify(&gm, &empty, &Adversary::HeuristicSuite { seeds: vec![1], depth: 4 }, &VerifyOptions::default()).unwrap();
        assert!(!r.is_certified());
    }

    #[test]
    fn greedy_survives_one_colour_example() {
        let (g, h) = crate::gen::fig1();
        let gm = game(g, h, 1);
        let eloise = eloise_heuristic(&gm, &Heuristic::GreedySpectrum).unwrap();
        let s = scripted(&gm, "one_colour", &ScriptParams::default());
        assert!(s.is_err());
        let empty = scripted(&gm, "empty", &ScriptParams::default()).unwrap();
        let p = playout(&gm, &empty, eloise.as_ref(), 50).unwrap();
        assert!(p.triggers.is_empty());
        assert_eq!(p.steps.len(), 50);
    }
}
