//! Exact attractor solving, bounded alternating search, strategy extraction
//! and move hints.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::{
    permute_position, AnswerLimits, Game, Mask, Move, MovePolicy, PendingPosition, Position, Profile, Side, Answer,
    side_profile, Variant,
};
use crate::error::{Error, Result};
use crate::graph::Tally;

pub const DEFAULT_STATE_BUDGET: u64 = 1 << 25;
pub const DEFAULT_SEARCH_ROUNDS: u32 = 6;
pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;
const INF: u16 = u16::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruning {
    None,
    NecessaryConstraints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveLimits {
    pub max_rounds: Option<u32>,
    pub state_budget: u64,
    pub node_budget: u64,
    pub time_budget_ms: Option<u64>,
    pub symmetry_reduction: bool,
    pub pruning: Pruning,
    /// Skip the attractor even when the state space fits.
    pub force_search: bool,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            max_rounds: None,
            state_budget: DEFAULT_STATE_BUDGET,
            node_budget: DEFAULT_NODE_BUDGET,
            time_budget_ms: None,
            symmetry_reduction: true,
            pruning: Pruning::None,
            force_search: false,
        }
    }
}

impl SolveLimits {
    pub fn search(max_rounds: u32) -> Self {
        SolveLimits { max_rounds: Some(max_rounds), force_search: true, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_budget == 0 || self.node_budget == 0 || self.max_rounds == Some(0) || self.time_budget_ms == Some(0) {
            return Err(Error::Config("budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Winner {
    ForAll { win_by_round: u32 },
    ExistsForever,
    ExistsSurvives { rounds: u32 },
    Unknown { reason: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub mode: String,
    pub explored: u64,
    pub memo_hits: u64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub winner: Winner,
    /// Rules whose punishment lemmas the verdict relies on.
    pub rules: Vec<String>,
    pub stats: Stats,
}

impl Verdict {
    pub fn is_forall(&self) -> bool {
        matches!(self.winner, Winner::ForAll { .. })
    }

    pub fn is_exists(&self) -> bool {
        matches!(self.winner, Winner::ExistsForever | Winner::ExistsSurvives { .. })
    }

    pub fn certified(&self) -> bool {
        match self.winner {
            Winner::ForAll { .. } => self.rules.is_empty(),
            Winner::ExistsForever => true,
            _ => false,
        }
    }

    pub fn round_bound(&self) -> Option<u32> {
        match self.winner {
            Winner::ForAll { win_by_round } => Some(win_by_round),
            Winner::ExistsSurvives { rounds } => Some(rounds),
            _ => None,
        }
    }

    pub fn winner_name(&self) -> &'static str {
        match self.winner {
            Winner::ForAll { .. } => "forall",
            Winner::ExistsForever | Winner::ExistsSurvives { .. } => "exists",
            Winner::Unknown { .. } => "unknown",
        }
    }

    /// CLI/API summary object.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "winner": self.winner_name(),
            "round_bound": self.round_bound(),
            "certified": self.certified(),
            "rules": self.rules,
            "stats": self.stats,
        })
    }

    pub fn exit_code(&self) -> i32 {
        match self.winner_name() {
            "forall" => 10,
            "exists" => 11,
            _ => 12,
        }
    }
}

/// Solves the game from its initial position.
pub fn solve(game: &Game, limits: &SolveLimits) -> Result<Verdict> {
    limits.validate()?;
    let start = Instant::now();
    let space = game.estimate_state_space();
    if !limits.force_search && !space.saturated && space.value <= limits.state_budget as u128 {
        let attr = Attractor::compute(game)?;
        let mut v = attr.verdict_at(&game.initial_position());
        v.stats.elapsed_ms = start.elapsed().as_millis() as u64;
        if let (Winner::ForAll { win_by_round }, Some(max)) = (&v.winner, limits.max_rounds) {
            if *win_by_round > max {
                v.winner = Winner::ExistsSurvives { rounds: max };
            }
        }
        return Ok(v);
    }
    let mut s = Searcher::new(game, limits);
    let mut v = s.solve_from(&game.initial_position());
    v.stats.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(v)
}

/// Mixed-radix encoding of positions: one digit per colour holding S | T << |G|
/// and one per pebble pair holding 0 (unplaced) or 1 + a·|H| + b.
#[derive(Clone, Debug)]
pub struct Layout {
    pub ng: usize,
    pub nh: usize,
    pub k: usize,
    pub pebbles: usize,
    pub strides: Vec<u64>,
    pub domains: Vec<u64>,
    pub total: u64,
}

impl Layout {
    pub fn new(game: &Game) -> Result<Layout> {
        let (ng, nh) = (game.n(Side::G), game.n(Side::H));
        let k = game.k();
        let pebbles = game.cfg.pebbles();
        let mut domains = vec![1u64 << (ng + nh); k];
        domains.extend(std::iter::repeat_n((ng * nh + 1) as u64, pebbles));
        let mut strides = Vec::new();
        let mut total: u64 = 1;
        for &d in &domains {
            strides.push(total);
            total = total
                .checked_mul(d)
                .filter(|&t| t <= 1 << 34)
                .ok_or_else(|| Error::Budget("position space too large for the attractor".into()))?;
        }
        Ok(Layout { ng, nh, k, pebbles, strides, domains, total })
    }

    pub fn index(&self, pos: &Position) -> u64 {
        let mut idx = 0;
        for c in 0..self.k {
            let v = pos.sets[c][0].0 | pos.sets[c][1].0 << self.ng;
            idx += v * self.strides[c];
        }
        for (i, p) in pos.pebbles.iter().enumerate() {
            let v = match p {
                None => 0,
                Some((a, b)) => 1 + (a * self.nh + b) as u64,
            };
            idx += v * self.strides[self.k + i];
        }
        idx
    }

    pub fn position(&self, idx: u64) -> Position {
        let gm = (1u64 << self.ng) - 1;
        let digit = |i: usize| idx / self.strides[i] % self.domains[i];
        Position {
            sets: (0..self.k).map(|c| {
                let v = digit(c);
                [Mask(v & gm), Mask(v >> self.ng)]
            }).collect(),
            pebbles: (0..self.pebbles)
                .map(|i| {
                    let v = digit(self.k + i) as usize;
                    if v == 0 { None } else { Some(((v - 1) / self.nh, (v - 1) % self.nh)) }
                })
                .collect(),
        }
    }
}

/// Least fixpoint of the ∀-attractor of trigger positions, with the round
/// at which each position entered it.
#[derive(Clone, Debug)]
pub struct Attractor {
    pub game: Game,
    pub layout: Layout,
    ranks: Vec<u16>,
    pub iterations: u32,
}

impl Attractor {
    pub fn compute(game: &Game) -> Result<Attractor> {
        let layout = Layout::new(game)?;
        let total = layout.total as usize;
        let mut ranks = vec![INF; total];
        mark_bad(game, &layout, &mut ranks);
        let mut r: u16 = 1;
        loop {
            let mut changed = false;
            for slot in 0..layout.domains.len() {
                changed |= sweep(&layout, slot, r, &mut ranks);
            }
            if !changed {
                break;
            }
            if r == INF - 1 {
                return Err(Error::Budget("attractor rank overflow".into()));
            }
            r += 1;
        }
        Ok(Attractor { game: game.clone(), layout, ranks, iterations: r as u32 })
    }

    pub fn size(&self) -> u64 {
        self.layout.total
    }

    /// Rounds within which ∀ forces a trigger, `Some(0)` for trigger positions.
    pub fn rank(&self, pos: &Position) -> Option<u32> {
        match self.ranks[self.layout.index(pos) as usize] {
            INF => None,
            r => Some(r as u32),
        }
    }

    pub fn attracted_count(&self) -> u64 {
        self.ranks.iter().filter(|&&r| r != INF).count() as u64
    }

    pub fn verdict_at(&self, pos: &Position) -> Verdict {
        let winner = match self.rank(pos) {
            Some(r) => Winner::ForAll { win_by_round: r },
            None => Winner::ExistsForever,
        };
        Verdict {
            winner,
            rules: vec![],
            stats: Stats { mode: "attractor".into(), explored: self.layout.total, memo_hits: 0, elapsed_ms: 0 },
        }
    }

    /// Rank of a move: 1 + the worst answer, `None` when some answer escapes.
    pub fn move_rank(&self, pos: &Position, mv: Move) -> Option<u32> {
        let pend = PendingPosition { base: pos.clone(), mv };
        let mut worst = 0;
        for a in self.game.all_answers(&pend) {
            let next = self.game.apply_existential(&pend, a).expect("legal answer");
            worst = worst.max(self.rank(&next)?);
        }
        Some(worst + 1)
    }

    /// Best ∀ move: fewest rounds, then fewest vertices, then move key.
    pub fn best_move(&self, pos: &Position) -> Option<(Move, u32)> {
        let r = self.rank(pos)?;
        if r == 0 {
            return None;
        }
        let mut best: Option<(Move, u32)> = None;
        for mv in self.game.universal_moves(pos, MovePolicy::All) {
            if let Some(mr) = self.move_rank(pos, mv) {
                let better = match &best {
                    None => true,
                    Some((bm, br)) => (mr, move_weight(&mv), mv.sort_key()) < (*br, move_weight(bm), bm.sort_key()),
                };
                if better {
                    best = Some((mv, mr));
                }
            }
        }
        best
    }

    /// Safe answer if one exists, else the one delaying defeat longest.
    pub fn best_answer(&self, pending: &PendingPosition) -> Answer {
        let mut best: Option<(u32, Answer)> = None;
        for a in self.game.all_answers(pending) {
            let next = self.game.apply_existential(pending, a).expect("legal answer");
            let score = self.rank(&next).unwrap_or(u32::MAX);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, a));
            }
        }
        best.expect("answers exist").1
    }
}

fn move_weight(mv: &Move) -> usize {
    match mv {
        Move::Colour { vertices, .. } => vertices.len(),
        Move::Pebble { .. } => 1,
    }
}

fn mark_bad(game: &Game, layout: &Layout, ranks: &mut [u16]) {
    if game.is_mso() {
        for (i, r) in ranks.iter_mut().enumerate() {
            if game.is_losing(&layout.position(i as u64)) {
                *r = 0;
            }
        }
        return;
    }
    let strong = game.strong();
    let (ng, nh, k) = (layout.ng, layout.nh, layout.k);
    let mut intern: HashMap<Profile, u32> = HashMap::new();
    let mut ids = |sd: &crate::engine::SideData, n: usize| -> Vec<u32> {
        (0..1u64 << (n * k))
            .map(|cfg| {
                let masks: Vec<u64> = (0..k).map(|c| cfg >> (c * n) & ((1u64 << n) - 1)).collect();
                let p = side_profile(sd, &masks, strong);
                let next = intern.len() as u32;
                *intern.entry(p).or_insert(next)
            })
            .collect()
    };
    let gid = ids(game.side(Side::G), ng);
    let hid = ids(game.side(Side::H), nh);
    let n = ng + nh;
    let gm = (1u64 << ng) - 1;
    for (idx, r) in ranks.iter_mut().enumerate() {
        let idx = idx as u64;
        let (mut gc, mut hc) = (0u64, 0u64);
        for c in 0..k {
            let v = idx >> (c * n) & ((1u64 << n) - 1);
            gc |= (v & gm) << (c * ng);
            hc |= (v >> ng) << (c * nh);
        }
        if gid[gc as usize] != hid[hc as usize] {
            *r = 0;
        }
    }
}

/// One layer of the attractor for one slot: every fiber in which ∀ has a
/// choice for his side all of whose answers are already attracted joins at
/// rank `r`.
fn sweep(layout: &Layout, slot: usize, r: u16, ranks: &mut [u16]) -> bool {
    let stride = layout.strides[slot] as usize;
    let dom = layout.domains[slot] as usize;
    let block = stride * dom;
    let (rows, cols) = if slot < layout.k {
        (1usize << layout.ng, 1usize << layout.nh)
    } else {
        (layout.ng, layout.nh)
    };
    let digit = |a: usize, b: usize| -> usize {
        if slot < layout.k {
            a | b << layout.ng
        } else {
            1 + a * layout.nh + b
        }
    };
    let mut changed = false;
    let total = ranks.len();
    let mut base = 0;
    while base < total {
        for lo in 0..stride {
            let ctx = base + lo;
            let at = |d: usize| ctx + d * stride;
            let done = |ranks: &[u16], d: usize| ranks[at(d)] < r;
            let mut win = (0..rows).any(|a| (0..cols).all(|b| done(ranks, digit(a, b))));
            if !win {
                win = (0..cols).any(|b| (0..rows).all(|a| done(ranks, digit(a, b))));
            }
            if win {
                for d in 0..dom {
                    let p = at(d);
                    if ranks[p] == INF {
                        ranks[p] = r;
                        changed = true;
                    }
                }
            }
        }
        base += block;
    }
    changed
}

/// Memoized iterative-deepening AND-OR search.
pub struct Searcher<'a> {
    game: &'a Game,
    limits: SolveLimits,
    memo: HashMap<Vec<u8>, MemoEntry>,
    explored: u64,
    memo_hits: u64,
    deadline: Option<Instant>,
    colour_perms: Vec<Vec<usize>>,
    tally_ids: Option<[Vec<u32>; 2]>,
    pruned: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct MemoEntry {
    win: Option<u32>,
    safe_for: u32,
}

struct Abort(String);

impl<'a> Searcher<'a> {
    pub fn new(game: &'a Game, limits: &SolveLimits) -> Self {
        let k = game.k();
        let colour_perms = if limits.symmetry_reduction && k <= 4 { permutations(k) } else { vec![(0..k).collect()] };
        let tally_ids = (limits.pruning == Pruning::NecessaryConstraints && k >= 2 && !game.is_mso()).then(|| {
            let mut dict: BTreeMap<Tally, u32> = BTreeMap::new();
            let ts = [game.cfg.g.tallies(), game.cfg.h.tallies()];
            for t in ts.iter().flatten() {
                let next = dict.len() as u32;
                dict.entry(*t).or_insert(next);
            }
            [ts[0].iter().map(|t| dict[t]).collect(), ts[1].iter().map(|t| dict[t]).collect()]
        });
        Searcher {
            game,
            limits: limits.clone(),
            memo: HashMap::new(),
            explored: 0,
            memo_hits: 0,
            deadline: limits.time_budget_ms.map(|ms| Instant::now() + Duration::from_millis(ms)),
            colour_perms,
            tally_ids,
            pruned: false,
        }
    }

    fn key(&self, pos: &Position) -> Vec<u8> {
        if !self.limits.symmetry_reduction {
            return self.game.position_key(pos, false);
        }
        let mut best: Option<Vec<u8>> = None;
        let id: Vec<usize> = (0..self.game.n(Side::G).max(self.game.n(Side::H))).collect();
        for perm in &self.colour_perms {
            let mut p = pos.clone();
            for (c, &pc) in perm.iter().enumerate() {
                p.sets[pc] = pos.sets[c];
            }
            let p = permute_position(&p, &id, &id);
            let key = self.game.position_key(&p, true);
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        }
        best.expect("identity permutation")
    }

    pub fn solve_from(&mut self, pos: &Position) -> Verdict {
        let max = self.limits.max_rounds.unwrap_or(DEFAULT_SEARCH_ROUNDS);
        let rules = || if self.tally_ids.is_some() { vec!["S1".to_string(), "S4".to_string()] } else { vec![] };
        let rules = rules();
        let winner = if self.game.is_losing(pos) {
            Winner::ForAll { win_by_round: 0 }
        } else {
            let mut w = Winner::ExistsSurvives { rounds: max };
            for d in 1..=max {
                match self.win_within(pos, d) {
                    Ok(Some(r)) => {
                        w = Winner::ForAll { win_by_round: r };
                        break;
                    }
                    Ok(None) => {}
                    Err(Abort(reason)) => {
                        w = if d > 1 { Winner::Unknown { reason: format!("{reason}; survives {} rounds", d - 1) } } else { Winner::Unknown { reason } };
                        break;
                    }
                }
            }
            w
        };
        let rules = if self.pruned && matches!(winner, Winner::ForAll { .. }) { rules } else { vec![] };
        Verdict {
            winner,
            rules,
            stats: Stats { mode: "search".into(), explored: self.explored, memo_hits: self.memo_hits, elapsed_ms: 0 },
        }
    }

    /// Compliant surviving answers to a colour move.
    fn answers(&mut self, pos: &Position, mv: Move) -> Vec<Answer> {
        let pend = PendingPosition { base: pos.clone(), mv };
        let mut limits = AnswerLimits::default();
        if let (Some(ids), Move::Colour { side, vertices, .. }) = (&self.tally_ids, mv) {
            let mut targets = BTreeMap::new();
            for v in vertices.vertices() {
                *targets.entry(ids[side.index()][v]).or_insert(0) += 1;
            }
            limits.classes = Some((ids[side.other().index()].clone(), targets));
            limits.size = Some(vertices.len());
        }
        let set = self.game.surviving_answers(&pend, &limits);
        if limits.classes.is_some() {
            let all = self.game.surviving_answers(&pend, &AnswerLimits::default());
            if all.answers.len() != set.answers.len() {
                self.pruned = true;
            }
        }
        set.answers
    }

    fn win_within(&mut self, pos: &Position, d: u32) -> std::result::Result<Option<u32>, Abort> {
        if d == 0 {
            return Ok(None);
        }
        let key = self.key(pos);
        if let Some(e) = self.memo.get(&key) {
            if let Some(w) = e.win {
                if w <= d {
                    self.memo_hits += 1;
                    return Ok(Some(w));
                }
            }
            if e.safe_for >= d {
                self.memo_hits += 1;
                return Ok(None);
            }
        }
        self.explored += 1;
        if self.explored > self.limits.node_budget {
            return Err(Abort("node budget exhausted".into()));
        }
        if let Some(dl) = self.deadline {
            if self.explored % 256 == 0 && Instant::now() > dl {
                return Err(Abort("time budget exhausted".into()));
            }
        }
        let policy = if self.limits.symmetry_reduction { MovePolicy::Canonical } else { MovePolicy::All };
        let mut moves: Vec<(Move, Vec<Answer>)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for mv in self.game.universal_moves(pos, policy) {
            if let Move::Colour { colour, .. } = mv {
                // Colours unused on both sides are interchangeable.
                if self.limits.symmetry_reduction {
                    let unused = pos.sets[colour][0].is_empty() && pos.sets[colour][1].is_empty();
                    if unused && (0..colour).any(|c| pos.sets[c][0].is_empty() && pos.sets[c][1].is_empty()) {
                        continue;
                    }
                }
            }
            let answers = self.answers(pos, mv);
            if answers.is_empty() {
                self.store(key, Some(1), 0);
                return Ok(Some(1));
            }
            let mut uniq = Vec::new();
            let mut next_keys = Vec::new();
            for a in answers {
                let next = self.game.apply_existential(&PendingPosition { base: pos.clone(), mv }, a).expect("legal");
                let k = self.key(&next);
                if !next_keys.contains(&k) {
                    next_keys.push(k);
                    uniq.push(a);
                }
            }
            next_keys.sort();
            if seen.insert(next_keys) {
                moves.push((mv, uniq));
            }
        }
        if d == 1 {
            self.store(key, None, 1);
            return Ok(None);
        }
        moves.sort_by_key(|(m, a)| (a.len(), m.sort_key()));
        for (mv, answers) in moves {
            let mut worst = 0;
            let mut ok = true;
            for a in answers {
                let next = self.game.apply_existential(&PendingPosition { base: pos.clone(), mv }, a).expect("legal");
                match self.win_within(&next, d - 1)? {
                    Some(r) => worst = worst.max(r),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                self.store(key, Some(worst + 1), 0);
                return Ok(Some(worst + 1));
            }
        }
        self.store(key, None, d);
        Ok(None)
    }

    fn store(&mut self, key: Vec<u8>, win: Option<u32>, safe_for: u32) {
        let e = self.memo.entry(key).or_default();
        if let Some(w) = win {
            e.win = Some(e.win.map_or(w, |x| x.min(w)));
        }
        e.safe_for = e.safe_for.max(safe_for);
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    crate::iso::for_each_permutation(k, |p| {
        out.push(p.to_vec());
        true
    });
    out
}

/// Positional strategies read off a completed attractor.
#[derive(Clone, Debug)]
pub struct StrategyAutomaton {
    pub attractor: Arc<Attractor>,
}

impl StrategyAutomaton {
    pub fn forall_move(&self, pos: &Position) -> Option<Move> {
        self.attractor.best_move(pos).map(|(m, _)| m)
    }

    pub fn exists_answer(&self, pending: &PendingPosition) -> Answer {
        self.attractor.best_answer(pending)
    }
}

pub fn extract_strategy(game: &Game, verdict: &Verdict, limits: &SolveLimits) -> Result<StrategyAutomaton> {
    if matches!(verdict.winner, Winner::Unknown { .. }) {
        return Err(Error::NotApplicable("no strategy for an unknown verdict".into()));
    }
    let space = game.estimate_state_space();
    if space.saturated || space.value > limits.state_budget as u128 {
        return Err(Error::Budget("strategy extraction needs the full attractor".into()));
    }
    Ok(StrategyAutomaton { attractor: Arc::new(Attractor::compute(game)?) })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluation {
    /// ∀ forces a trigger within this many rounds after the move.
    Wins { rounds: u32 },
    /// ∃ survives forever (exact) or at least `rounds` rounds.
    Safe { rounds: Option<u32> },
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedMove {
    pub mv: Move,
    pub evaluation: Evaluation,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub answer: Answer,
    pub evaluation: Evaluation,
    pub certified: bool,
}

fn eval_order(e: &Evaluation) -> (u8, u32) {
    match e {
        Evaluation::Wins { rounds } => (0, *rounds),
        Evaluation::Unknown => (1, 0),
        Evaluation::Safe { rounds } => (2, u32::MAX - rounds.unwrap_or(u32::MAX)),
    }
}

/// Ranks ∀'s candidate moves (canonical representatives) at `pos`.
pub fn hint_moves(game: &Game, pos: &Position, limits: &SolveLimits, attractor: Option<&Attractor>) -> Vec<RankedMove> {
    let moves = game.universal_moves(pos, MovePolicy::Canonical);
    let mut out: Vec<RankedMove> = if let Some(attr) = attractor {
        moves
            .into_iter()
            .map(|mv| {
                let evaluation = match attr.move_rank(pos, mv) {
                    Some(r) => Evaluation::Wins { rounds: r },
                    None => Evaluation::Safe { rounds: None },
                };
                RankedMove { mv, evaluation, certified: true }
            })
            .collect()
    } else {
        let depth = limits.max_rounds.unwrap_or(3);
        let mut s = Searcher::new(game, limits);
        moves
            .into_iter()
            .map(|mv| {
                let answers = s.answers(pos, mv);
                let mut worst = 0;
                let mut evaluation = None;
                for a in answers {
                    let next = game.apply_existential(&PendingPosition { base: pos.clone(), mv }, a).expect("legal");
                    if depth <= 1 {
                        evaluation = Some(Evaluation::Safe { rounds: Some(1) });
                        break;
                    }
                    match s.win_within(&next, depth - 1) {
                        Ok(Some(r)) => worst = worst.max(r),
                        Ok(None) => {
                            evaluation = Some(Evaluation::Safe { rounds: Some(depth) });
                            break;
                        }
                        Err(_) => {
                            evaluation = Some(Evaluation::Unknown);
                            break;
                        }
                    }
                }
                let evaluation = evaluation.unwrap_or(Evaluation::Wins { rounds: worst + 1 });
                RankedMove { mv, evaluation, certified: s.tally_ids.is_none() }
            })
            .collect()
    };
    out.sort_by(|a, b| {
        (eval_order(&a.evaluation), move_weight(&a.mv), a.mv.sort_key()).cmp(&(
            eval_order(&b.evaluation),
            move_weight(&b.mv),
            b.mv.sort_key(),
        ))
    });
    out
}

/// Ranks ∃'s answers to a pending move: safe answers first.
pub fn hint_answers(game: &Game, pending: &PendingPosition, limits: &SolveLimits, attractor: Option<&Attractor>) -> Vec<RankedAnswer> {
    let depth = limits.max_rounds.unwrap_or(3);
    let mut s = Searcher::new(game, &SolveLimits { pruning: Pruning::None, ..limits.clone() });
    let mut out: Vec<RankedAnswer> = game
        .all_answers(pending)
        .into_iter()
        .map(|a| {
            let next = game.apply_existential(pending, a).expect("legal");
            let (evaluation, certified) = if game.is_losing(&next) {
                (Evaluation::Wins { rounds: 0 }, true)
            } else if let Some(attr) = attractor {
                match attr.rank(&next) {
                    Some(r) => (Evaluation::Wins { rounds: r }, true),
                    None => (Evaluation::Safe { rounds: None }, true),
                }
            } else {
                match s.win_within(&next, depth) {
                    Ok(Some(r)) => (Evaluation::Wins { rounds: r }, true),
                    Ok(None) => (Evaluation::Safe { rounds: Some(depth) }, true),
                    Err(_) => (Evaluation::Unknown, false),
                }
            };
            RankedAnswer { answer: a, evaluation, certified }
        })
        .collect();
    let key = |r: &RankedAnswer| {
        let (t, v) = eval_order(&r.evaluation);
        let a = match r.answer {
            Answer::Set(m) => m.0,
            Answer::Vertex(v) => v as u64,
        };
        (std::cmp::Reverse(t), if t == 0 { u32::MAX - v } else { v }, a)
    };
    out.sort_by_key(key);
    out
}

/// Convenience for tests and the service: builds a game and solves it.
pub fn solve_pair(g: &crate::graph::Digraph, h: &crate::graph::Digraph, k: usize, variant: Variant, limits: &SolveLimits) -> Result<Verdict> {
    let game = Game::new(crate::engine::GameConfig::new(g.clone(), h.clone(), k, variant))?;
    solve(&game, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{fig1, fig6, fig7};
    use crate::graph::Digraph;

    #[test]
    fn fig1_plain_and_strong() {
        let (g, h) = fig1();
        let plain = solve_pair(&g, &h, 1, Variant::Plain, &SolveLimits::default()).unwrap();
        assert_eq!(plain.winner, Winner::ExistsForever);
        assert!(plain.certified());
        let strong = solve_pair(&g, &h, 1, Variant::Strong, &SolveLimits::default()).unwrap();
        assert_eq!(strong.winner, Winner::ForAll { win_by_round: 1 });
        assert_eq!(strong.stats.explored, 1 << 14);
    }

    #[test]
    fn fig1_strong_strategy_colours_the_cycle() {
        let (g, h) = fig1();
        let game = Game::new(crate::engine::GameConfig::new(g, h, 1, Variant::Strong)).unwrap();
        let v = solve(&game, &SolveLimits::default()).unwrap();
        let s = extract_strategy(&game, &v, &SolveLimits::default()).unwrap();
        let mv = s.forall_move(&game.initial_position()).unwrap();
        assert_eq!(mv, Move::colour(0, Side::H, &[6, 7]));
    }

    #[test]
    fn mirror_pairs_are_exists() {
        let g = Digraph::new(3, &[(0, 1), (1, 2), (2, 2)], true).unwrap();
        let v = solve_pair(&g, &g, 2, Variant::Plain, &SolveLimits::default()).unwrap();
        assert_eq!(v.winner, Winner::ExistsForever);
    }

    #[test]
    fn layout_round_trip() {
        let (g, h) = fig1();
        let game = Game::new(crate::engine::GameConfig::new(g, h, 1, Variant::Mso { pebbles: 2 })).unwrap();
        let l = Layout::new(&game).unwrap();
        for idx in [0, 1, 77, l.total - 1, l.total / 3] {
            assert_eq!(l.index(&l.position(idx)), idx);
        }
    }

    #[test]
    fn attractor_and_search_agree_small() {
        let mut graphs = Vec::new();
        for n in 1..=2usize {
            for bits in 0..1u32 << (n * n) {
                let e: Vec<(usize, usize)> = (0..n * n).filter(|b| bits >> b & 1 == 1).map(|b| (b / n, b % n)).collect();
                graphs.push(Digraph::new(n, &e, true).unwrap());
            }
        }
        for g in &graphs {
            for h in &graphs {
                for k in 1..=2 {
                    for variant in [Variant::Plain, Variant::Strong] {
                        let game = Game::new(crate::engine::GameConfig::new(g.clone(), h.clone(), k, variant)).unwrap();
                        let exact = solve(&game, &SolveLimits::default()).unwrap();
                        let bound = 8;
                        let searched = solve(&game, &SolveLimits { symmetry_reduction: k == 2, ..SolveLimits::search(bound) }).unwrap();
                        match exact.winner {
                            Winner::ForAll { win_by_round } => {
                                assert_eq!(searched.winner, Winner::ForAll { win_by_round }, "{g:?} {h:?} k={k}")
                            }
                            Winner::ExistsForever => assert_eq!(searched.winner, Winner::ExistsSurvives { rounds: bound }),
                            _ => unreachable!(),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ramachandran_hint_after_red() {
        let g = fig6();
        let h = fig7();
        let game = Game::new(crate::engine::GameConfig::new(g, h, 2, Variant::Plain)).unwrap();
        let limits = SolveLimits::search(3);
        let pos = game.commit_colour(&game.initial_position(), 0, Side::G, 1 << 5, 1 << 3);
        let hints = hint_moves(&game, &pos, &limits, None);
        let blue_v4 = hints.iter().find(|h| h.mv == Move::colour(1, Side::G, &[4])).unwrap();
        assert!(matches!(blue_v4.evaluation, Evaluation::Wins { .. }));
        assert!(matches!(hints[0].evaluation, Evaluation::Wins { .. }));
    }

    #[test]
    fn exit_codes_and_summary() {
        let v = Verdict { winner: Winner::ForAll { win_by_round: 2 }, rules: vec![], stats: Stats::default() };
        assert_eq!(v.exit_code(), 10);
        assert_eq!(v.summary()["round_bound"], 2);
        assert_eq!(v.summary()["winner"], "forall");
        assert!(SolveLimits { state_budget: 0, ..Default::default() }.validate().is_err());
    }
}
