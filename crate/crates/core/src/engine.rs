//! Rules of the Seurat game, its strong variant and the MSO pebble variant.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{mask_vertices, Digraph};
use crate::iso::{automorphisms, AutGroup};

/// Palettes are bitmasks over colours, so at most 2^6 = 64 palettes fit the
/// per-palette words used by the rule evaluation.
pub const MAX_COLOURS: usize = 6;
pub const MAX_SIDE: usize = 64;
pub const MAX_PEBBLES: usize = 4;

pub type Palette = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    G,
    H,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::G => Side::H,
            Side::H => Side::G,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub const BOTH: [Side; 2] = [Side::G, Side::H];
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Vertex set of one side, serialized as a sorted list of indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mask(pub u64);

impl Mask {
    pub fn from_vertices(vs: &[usize]) -> Result<Mask> {
        let mut m = 0u64;
        for &v in vs {
            if v >= MAX_SIDE {
                return Err(Error::VertexOutOfRange { vertex: v, n: MAX_SIDE });
            }
            m |= 1 << v;
        }
        Ok(Mask(m))
    }

    pub fn vertices(self) -> Vec<usize> {
        mask_vertices(self.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.vertices().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let vs = Vec::<usize>::deserialize(d)?;
        Mask::from_vertices(&vs).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Strong,
    Mso { pebbles: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameConfig {
    pub g: Digraph,
    pub h: Digraph,
    pub colours: usize,
    pub variant: Variant,
}

impl GameConfig {
    pub fn new(g: Digraph, h: Digraph, colours: usize, variant: Variant) -> Self {
        GameConfig { g, h, colours, variant }
    }

    pub fn pebbles(&self) -> usize {
        match self.variant {
            Variant::Mso { pebbles } => pebbles,
            _ => 0,
        }
    }

    pub fn graph(&self, side: Side) -> &Digraph {
        match side {
            Side::G => &self.g,
            Side::H => &self.h,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Move {
    Colour { colour: usize, side: Side, vertices: Mask },
    Pebble { pair: usize, side: Side, vertex: usize },
}

impl Move {
    pub fn colour(colour: usize, side: Side, vertices: &[usize]) -> Move {
        Move::Colour { colour, side, vertices: Mask::from_vertices(vertices).expect("vertex in range") }
    }

    pub fn side(&self) -> Side {
        match self {
            Move::Colour { side, .. } | Move::Pebble { side, .. } => *side,
        }
    }

    /// Total order used for deterministic ranking.
    pub fn sort_key(&self) -> (u8, usize, u8, u64) {
        match *self {
            Move::Colour { colour, side, vertices } => (0, colour, side as u8, vertices.0),
            Move::Pebble { pair, side, vertex } => (1, pair, side as u8, vertex as u64),
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Colour { colour, side, vertices } => write!(f, "colour {colour} on {side} {:?}", vertices.vertices()),
            Move::Pebble { pair, side, vertex } => write!(f, "pebble {pair} on {side} {vertex}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Set(Mask),
    Vertex(usize),
}

/// Committed state: per colour the coloured set on each side, and pebble
/// placements as (G vertex, H vertex).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Position {
    pub sets: Vec<[Mask; 2]>,
    #[serde(default)]
    pub pebbles: Vec<Option<(usize, usize)>>,
}

impl Position {
    pub fn set(&self, colour: usize, side: Side) -> u64 {
        self.sets[colour][side.index()].0
    }

    pub fn palette(&self, side: Side, v: usize) -> Palette {
        let mut p = 0;
        for (c, s) in self.sets.iter().enumerate() {
            if s[side.index()].0 >> v & 1 == 1 {
                p |= 1 << c;
            }
        }
        p
    }

    pub fn masks(&self, side: Side) -> Vec<u64> {
        self.sets.iter().map(|s| s[side.index()].0).collect()
    }

    pub fn with_colour(&self, colour: usize, g: u64, h: u64) -> Position {
        let mut p = self.clone();
        p.sets[colour] = [Mask(g), Mask(h)];
        p
    }

    /// Colours currently colouring something on either side.
    pub fn colours_in_use(&self) -> Vec<usize> {
        (0..self.sets.len()).filter(|&c| self.sets[c][0].0 | self.sets[c][1].0 != 0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PendingPosition {
    pub base: Position,
    pub mv: Move,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "witness")]
pub enum Trigger {
    /// `palette` is realised on `nonempty_side` (at `vertex`) but not on the other side.
    C1 { palette: Palette, nonempty_side: Side, vertex: usize },
    /// An edge from `from` to `to` exists on `edge_side` and not on the other side.
    C2 { from: Palette, to: Palette, edge_side: Side, edge: (usize, usize) },
    /// On `covered_side` every vertex of `target` has an in-edge from `origin`;
    /// `vertex` on the other side has none.
    C3 { origin: Palette, target: Palette, covered_side: Side, vertex: usize },
    /// On `covered_side` every vertex of `origin` has an out-edge into
    /// `target`; `vertex` on the other side has none.
    C4 { origin: Palette, target: Palette, covered_side: Side, vertex: usize },
    #[serde(rename = "PEBBLE")]
    Pebble { pairs: Vec<usize>, reason: String },
}

/// Adjacency of one side as words.
#[derive(Clone, Debug)]
pub struct SideData {
    pub n: usize,
    pub full: u64,
    pub out: Vec<u64>,
    pub inn: Vec<u64>,
    pub loops: u64,
}

impl SideData {
    pub fn new(g: &Digraph) -> Self {
        let n = g.n();
        SideData {
            n,
            full: if n == 64 { u64::MAX } else { (1u64 << n) - 1 },
            out: (0..n).map(|v| g.out_mask(v)).collect(),
            inn: (0..n).map(|v| g.in_mask(v)).collect(),
            loops: (0..n).filter(|&v| g.has_loop(v)).fold(0, |m, v| m | 1 << v),
        }
    }

    pub fn out_of(&self, s: u64) -> u64 {
        let mut r = 0;
        let mut m = s;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            r |= self.out[v];
        }
        r
    }

    pub fn into_of(&self, s: u64) -> u64 {
        let mut r = 0;
        let mut m = s;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            r |= self.inn[v];
        }
        r
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u] >> v & 1 == 1
    }

    /// Ranges of all 2^k palettes for the given colour sets.
    pub fn ranges(&self, masks: &[u64]) -> Vec<u64> {
        let mut r = vec![0u64; 1 << masks.len()];
        r[0] = self.full;
        for (c, &s) in masks.iter().enumerate() {
            for p in 0..(1usize << c) {
                let cur = r[p];
                r[p | 1 << c] = cur & s;
                r[p] = cur & !s;
            }
        }
        r
    }
}

/// Everything (C1)-(C4) compare between the sides for a palette assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Profile {
    pub nonempty: u64,
    pub edges: Vec<u64>,
    pub tcover: Vec<u64>,
    pub ocover: Vec<u64>,
}

pub fn side_profile(sd: &SideData, masks: &[u64], strong: bool) -> Profile {
    let ranges = sd.ranges(masks);
    let np = ranges.len();
    let mut nonempty = 0u64;
    let mut outn = vec![0u64; np];
    let mut inn = vec![0u64; np];
    for (p, &r) in ranges.iter().enumerate() {
        if r != 0 {
            nonempty |= 1 << p;
            outn[p] = sd.out_of(r);
            if strong {
                inn[p] = sd.into_of(r);
            }
        }
    }
    let occupied: Vec<usize> = (0..np).filter(|&p| nonempty >> p & 1 == 1).collect();
    let mut edges = vec![0u64; np];
    for &p1 in &occupied {
        for &p2 in &occupied {
            if outn[p1] & ranges[p2] != 0 {
                edges[p1] |= 1 << p2;
            }
        }
    }
    let (mut tcover, mut ocover) = (Vec::new(), Vec::new());
    if strong {
        tcover = vec![0u64; np];
        ocover = vec![0u64; np];
        for p1 in 0..np {
            for p2 in 0..np {
                if ranges[p2] & !outn[p1] == 0 {
                    tcover[p1] |= 1 << p2;
                }
                if ranges[p1] & !inn[p2] == 0 {
                    ocover[p1] |= 1 << p2;
                }
            }
        }
    }
    Profile { nonempty, edges, tcover, ocover }
}

/// A configuration with precomputed adjacency words and lazily computed
/// automorphism groups.
#[derive(Clone, Debug)]
pub struct Game {
    pub cfg: GameConfig,
    pub sides: [SideData; 2],
    auts: Arc<[OnceLock<AutGroup>; 2]>,
}

impl Game {
    pub fn new(cfg: GameConfig) -> Result<Game> {
        if cfg.colours == 0 {
            return Err(Error::Config("at least one colour is required".into()));
        }
        if cfg.colours > MAX_COLOURS {
            return Err(Error::Config(format!("at most {MAX_COLOURS} colours are supported")));
        }
        if cfg.g.n() > MAX_SIDE || cfg.h.n() > MAX_SIDE {
            return Err(Error::SizeGuard(format!("game graphs are limited to {MAX_SIDE} vertices")));
        }
        if cfg.pebbles() > MAX_PEBBLES {
            return Err(Error::Config(format!("at most {MAX_PEBBLES} pebble pairs are supported")));
        }
        let sides = [SideData::new(&cfg.g), SideData::new(&cfg.h)];
        Ok(Game { cfg, sides, auts: Arc::new([OnceLock::new(), OnceLock::new()]) })
    }

    pub fn k(&self) -> usize {
        self.cfg.colours
    }

    pub fn n(&self, side: Side) -> usize {
        self.sides[side.index()].n
    }

    pub fn side(&self, side: Side) -> &SideData {
        &self.sides[side.index()]
    }

    pub fn strong(&self) -> bool {
        self.cfg.variant == Variant::Strong
    }

    pub fn is_mso(&self) -> bool {
        matches!(self.cfg.variant, Variant::Mso { .. })
    }

    pub fn automorphisms(&self, side: Side) -> &AutGroup {
        self.auts[side.index()].get_or_init(|| automorphisms(self.cfg.graph(side)))
    }

    pub fn initial_position(&self) -> Position {
        Position { sets: vec![[Mask(0), Mask(0)]; self.k()], pebbles: vec![None; self.cfg.pebbles()] }
    }

    pub fn check_move(&self, pos: &Position, mv: &Move) -> Result<()> {
        self.check_position(pos)?;
        match *mv {
            Move::Colour { colour, side, vertices } => {
                if colour >= self.k() {
                    return Err(Error::IllegalMove(format!("colour {colour} not below k={}", self.k())));
                }
                if vertices.0 & !self.side(side).full != 0 {
                    return Err(Error::IllegalMove(format!("vertex outside {side}")));
                }
            }
            Move::Pebble { pair, side, vertex } => {
                if !self.is_mso() {
                    return Err(Error::IllegalMove("pebble moves need the MSO variant".into()));
                }
                if pair >= self.cfg.pebbles() {
                    return Err(Error::IllegalMove(format!("no pebble pair {pair}")));
                }
                if vertex >= self.n(side) {
                    return Err(Error::VertexOutOfRange { vertex, n: self.n(side) });
                }
            }
        }
        Ok(())
    }

    fn check_position(&self, pos: &Position) -> Result<()> {
        if pos.sets.len() != self.k() || pos.pebbles.len() != self.cfg.pebbles() {
            return Err(Error::IllegalMove("position does not match the configuration".into()));
        }
        Ok(())
    }

    pub fn apply_universal(&self, pos: &Position, mv: Move) -> Result<PendingPosition> {
        self.check_move(pos, &mv)?;
        Ok(PendingPosition { base: pos.clone(), mv })
    }

    pub fn apply_existential(&self, pending: &PendingPosition, answer: Answer) -> Result<Position> {
        let mut p = pending.base.clone();
        match (pending.mv, answer) {
            (Move::Colour { colour, side, vertices }, Answer::Set(t)) => {
                if t.0 & !self.side(side.other()).full != 0 {
                    return Err(Error::IllegalMove(format!("answer vertex outside {}", side.other())));
                }
                p.sets[colour][side.index()] = vertices;
                p.sets[colour][side.other().index()] = t;
            }
            (Move::Pebble { pair, side, vertex }, Answer::Vertex(w)) => {
                if w >= self.n(side.other()) {
                    return Err(Error::VertexOutOfRange { vertex: w, n: self.n(side.other()) });
                }
                p.pebbles[pair] = Some(match side {
                    Side::G => (vertex, w),
                    Side::H => (w, vertex),
                });
            }
            _ => return Err(Error::IllegalMove("answer shape does not match the move".into())),
        }
        Ok(p)
    }

    /// Commits a colour answer without validation; used by search code.
    pub fn commit_colour(&self, pos: &Position, colour: usize, side: Side, mine: u64, theirs: u64) -> Position {
        let mut p = pos.clone();
        p.sets[colour][side.index()] = Mask(mine);
        p.sets[colour][side.other().index()] = Mask(theirs);
        p
    }

    pub fn profile(&self, pos: &Position, side: Side) -> Profile {
        side_profile(self.side(side), &pos.masks(side), self.strong())
    }

    /// True iff some losing condition holds.
    pub fn is_losing(&self, pos: &Position) -> bool {
        if self.is_mso() {
            return self.pebble_trigger(pos).is_some();
        }
        self.profile(pos, Side::G) != self.profile(pos, Side::H)
    }

    pub fn losing_conditions(&self, pos: &Position) -> Vec<Trigger> {
        if self.is_mso() {
            return self.pebble_trigger(pos).into_iter().collect();
        }
        let mg = pos.masks(Side::G);
        let mh = pos.masks(Side::H);
        let rg = self.side(Side::G).ranges(&mg);
        let rh = self.side(Side::H).ranges(&mh);
        let ranges = [rg, rh];
        let mut out = Vec::new();
        let np = ranges[0].len();
        for p in 0..np {
            for s in Side::BOTH {
                let (a, b) = (ranges[s.index()][p], ranges[s.other().index()][p]);
                if a != 0 && b == 0 {
                    out.push(Trigger::C1 { palette: p as Palette, nonempty_side: s, vertex: a.trailing_zeros() as usize });
                }
            }
        }
        for p1 in 0..np {
            for p2 in 0..np {
                for s in Side::BOTH {
                    let sd = self.side(s);
                    let od = self.side(s.other());
                    let (r, o) = (&ranges[s.index()], &ranges[s.other().index()]);
                    if let Some(edge) = find_edge(sd, r[p1], r[p2]) {
                        if find_edge(od, o[p1], o[p2]).is_none() {
                            out.push(Trigger::C2 { from: p1 as Palette, to: p2 as Palette, edge_side: s, edge });
                        }
                    }
                    if self.strong() {
                        let cov = r[p2] & !sd.out_of(r[p1]) == 0;
                        let miss = o[p2] & !od.out_of(o[p1]);
                        if cov && miss != 0 {
                            out.push(Trigger::C3 {
                                origin: p1 as Palette,
                                target: p2 as Palette,
                                covered_side: s,
                                vertex: miss.trailing_zeros() as usize,
                            });
                        }
                        let cov = r[p1] & !sd.into_of(r[p2]) == 0;
                        let miss = o[p1] & !od.into_of(o[p2]);
                        if cov && miss != 0 {
                            out.push(Trigger::C4 {
                                origin: p1 as Palette,
                                target: p2 as Palette,
                                covered_side: s,
                                vertex: miss.trailing_zeros() as usize,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// The pebble-induced map fails to be a partial isomorphism preserving
    /// edges, loops and palettes.
    pub fn pebble_trigger(&self, pos: &Position) -> Option<Trigger> {
        let placed: Vec<(usize, (usize, usize))> =
            pos.pebbles.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
        let (g, h) = (self.side(Side::G), self.side(Side::H));
        for &(i, (a, b)) in &placed {
            if pos.palette(Side::G, a) != pos.palette(Side::H, b) {
                return Some(Trigger::Pebble { pairs: vec![i], reason: "palette".into() });
            }
            if (g.loops >> a & 1) != (h.loops >> b & 1) {
                return Some(Trigger::Pebble { pairs: vec![i], reason: "loop".into() });
            }
            for &(j, (c, d)) in &placed {
                if j <= i {
                    continue;
                }
                if (a == c) != (b == d) {
                    return Some(Trigger::Pebble { pairs: vec![i, j], reason: "not injective".into() });
                }
                if g.has_edge(a, c) != h.has_edge(b, d) || g.has_edge(c, a) != h.has_edge(d, b) {
                    return Some(Trigger::Pebble { pairs: vec![i, j], reason: "edge".into() });
                }
            }
        }
        None
    }

    pub fn ranges(&self, pos: &Position, side: Side, palette: Palette) -> Mask {
        Mask(self.side(side).ranges(&pos.masks(side))[palette as usize])
    }

    /// Elements of Aut(side) that fix every colour set and pebble on that
    /// side, or `None` when the group is only known by generators.
    pub fn stabilizer(&self, pos: &Position, side: Side) -> Option<Vec<Vec<usize>>> {
        let aut = self.automorphisms(side);
        let els = aut.elements.as_ref()?;
        let masks = pos.masks(side);
        let pebs: Vec<usize> = pos
            .pebbles
            .iter()
            .flatten()
            .map(|&(a, b)| if side == Side::G { a } else { b })
            .collect();
        Some(
            els.iter()
                .filter(|p| masks.iter().all(|&m| permute_mask(m, p) == m) && pebs.iter().all(|&v| p[v] == v))
                .cloned()
                .collect(),
        )
    }

    /// ∀'s moves at `pos`.
    pub fn universal_moves(&self, pos: &Position, policy: MovePolicy) -> Vec<Move> {
        let mut out = Vec::new();
        for side in Side::BOTH {
            let n = self.n(side);
            let stab = if policy == MovePolicy::Canonical { self.stabilizer(pos, side) } else { None };
            let subsets: Vec<u64> = match &stab {
                Some(st) if st.len() > 1 => (0..1u64 << n).filter(|&m| st.iter().all(|p| permute_mask(m, p) >= m)).collect(),
                _ => (0..1u64 << n).collect(),
            };
            for c in 0..self.k() {
                for &m in &subsets {
                    out.push(Move::Colour { colour: c, side, vertices: Mask(m) });
                }
            }
            for pair in 0..self.cfg.pebbles() {
                let verts: Vec<usize> = match &stab {
                    Some(st) if st.len() > 1 => (0..n).filter(|&v| st.iter().all(|p| p[v] >= v)).collect(),
                    _ => (0..n).collect(),
                };
                for vertex in verts {
                    out.push(Move::Pebble { pair, side, vertex });
                }
            }
        }
        out
    }

    /// Every legal answer to `pending`.
    pub fn all_answers(&self, pending: &PendingPosition) -> Vec<Answer> {
        let other = pending.mv.side().other();
        let n = self.n(other);
        match pending.mv {
            Move::Colour { .. } => (0..1u64 << n).map(|m| Answer::Set(Mask(m))).collect(),
            Move::Pebble { .. } => (0..n).map(Answer::Vertex).collect(),
        }
    }

    /// Answers after which no losing condition holds.
    pub fn surviving_answers(&self, pending: &PendingPosition, limits: &AnswerLimits) -> AnswerSet {
        match pending.mv {
            Move::Pebble { .. } => {
                let answers = self
                    .all_answers(pending)
                    .into_iter()
                    .filter(|&a| {
                        let p = self.apply_existential(pending, a).expect("legal");
                        !self.is_losing(&p)
                    })
                    .collect();
                AnswerSet { answers, complete: true }
            }
            Move::Colour { colour, side, vertices } => {
                if self.is_mso() {
                    let answers = self
                        .all_answers(pending)
                        .into_iter()
                        .filter(|&a| !self.is_losing(&self.apply_existential(pending, a).expect("legal")))
                        .collect();
                    return AnswerSet { answers, complete: true };
                }
                let (sets, complete) = enumerate_colour_answers(self, &pending.base, colour, side, vertices.0, limits);
                AnswerSet { answers: sets.into_iter().map(|m| Answer::Set(Mask(m))).collect(), complete }
            }
        }
    }

    /// Injective-or-orbit key of a position.
    pub fn position_key(&self, pos: &Position, modulo_automorphisms: bool) -> Vec<u8> {
        let exact = encode_position(pos);
        if !modulo_automorphisms {
            return exact;
        }
        let (ag, ah) = (self.automorphisms(Side::G), self.automorphisms(Side::H));
        let (Some(eg), Some(eh)) = (&ag.elements, &ah.elements) else {
            return exact;
        };
        if (eg.len() as u128) * (eh.len() as u128) > KEY_GROUP_CAP {
            return exact;
        }
        let mut best = exact;
        for a in eg {
            for b in eh {
                let img = permute_position(pos, a, b);
                let key = encode_position(&img);
                if key < best {
                    best = key;
                }
            }
        }
        best
    }

    /// (2^k)^{|G|+|H|} times the pebble placement factor, saturating.
    pub fn estimate_state_space(&self) -> StateCount {
        estimate_state_space(&self.cfg)
    }
}

pub const KEY_GROUP_CAP: u128 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCount {
    pub value: u128,
    pub saturated: bool,
}

pub fn estimate_state_space(cfg: &GameConfig) -> StateCount {
    let mut v: u128 = 1;
    let mut sat = false;
    let mut mul = |f: u128| match v.checked_mul(f) {
        Some(x) => v = x,
        None => {
            v = u128::MAX;
            sat = true;
        }
    };
    let base = 1u128 << cfg.colours.min(100);
    for _ in 0..cfg.g.n() + cfg.h.n() {
        mul(base);
    }
    let pf = (cfg.g.n() * cfg.h.n() + 1) as u128;
    for _ in 0..cfg.pebbles() {
        mul(pf);
    }
    StateCount { value: v, saturated: sat }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovePolicy {
    All,
    Canonical,
}

pub fn permute_mask(m: u64, p: &[usize]) -> u64 {
    let mut r = 0u64;
    let mut x = m;
    while x != 0 {
        let v = x.trailing_zeros() as usize;
        x &= x - 1;
        r |= 1 << p[v];
    }
    r
}

pub fn permute_position(pos: &Position, a: &[usize], b: &[usize]) -> Position {
    Position {
        sets: pos.sets.iter().map(|s| [Mask(permute_mask(s[0].0, a)), Mask(permute_mask(s[1].0, b))]).collect(),
        pebbles: pos.pebbles.iter().map(|p| p.map(|(x, y)| (a[x], b[y]))).collect(),
    }
}

fn encode_position(pos: &Position) -> Vec<u8> {
    let mut out = Vec::with_capacity(pos.sets.len() * 16 + pos.pebbles.len() * 2);
    for s in &pos.sets {
        out.extend_from_slice(&s[0].0.to_le_bytes());
        out.extend_from_slice(&s[1].0.to_le_bytes());
    }
    for p in &pos.pebbles {
        match p {
            None => out.extend_from_slice(&[255, 255]),
            Some((a, b)) => out.extend_from_slice(&[*a as u8, *b as u8]),
        }
    }
    out
}

fn find_edge(sd: &SideData, from: u64, to: u64) -> Option<(usize, usize)> {
    let mut m = from;
    while m != 0 {
        let u = m.trailing_zeros() as usize;
        m &= m - 1;
        let t = sd.out[u] & to;
        if t != 0 {
            return Some((u, t.trailing_zeros() as usize));
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerSet {
    pub answers: Vec<Answer>,
    /// False when a limit cut the enumeration short.
    pub complete: bool,
}

/// Optional pruning for the colour-answer enumerator. `classes` assigns each
/// vertex of the answering side a class id and `class_targets` the exact
/// number of answer vertices required per class.
#[derive(Clone, Debug, Default)]
pub struct AnswerLimits {
    pub max_answers: Option<usize>,
    pub max_nodes: Option<u64>,
    pub size: Option<usize>,
    pub classes: Option<(Vec<u32>, BTreeMap<u32, usize>)>,
}

/// Enumerates answer sets T on `side.other()` such that the committed
/// position satisfies no losing condition, by backtracking over vertices with
/// palette and edge-type pruning.
pub fn enumerate_colour_answers(
    game: &Game,
    base: &Position,
    colour: usize,
    side: Side,
    mine: u64,
    limits: &AnswerLimits,
) -> (Vec<u64>, bool) {
    let strong = game.strong();
    let bside = side.other();
    let mut pos = base.clone();
    pos.sets[colour][side.index()] = Mask(mine);
    pos.sets[colour][bside.index()] = Mask(0);
    let target = side_profile(game.side(side), &pos.masks(side), strong);
    let bd = game.side(bside);
    let n = bd.n;
    let basepal: Vec<u32> = (0..n).map(|v| pos.palette(bside, v)).collect();
    let cbit = 1u32 << colour;
    let order = search_order(bd);
    let class_info = limits.classes.as_ref().map(|(ids, targets)| {
        let mut remaining: BTreeMap<u32, usize> = BTreeMap::new();
        for &id in ids.iter().take(n) {
            *remaining.entry(id).or_insert(0) += 1;
        }
        (ids.clone(), targets.clone(), remaining)
    });
    let mut st = Enum {
        game,
        bd,
        target: &target,
        basepal: &basepal,
        cbit,
        order: &order,
        pal: vec![0; n],
        assigned: 0,
        chosen: 0,
        chosen_count: 0,
        possible: vec![0u32; 64],
        covered_count: vec![0u32; 64],
        size: limits.size,
        class_info,
        class_chosen: BTreeMap::new(),
        out: Vec::new(),
        max_answers: limits.max_answers.unwrap_or(usize::MAX),
        max_nodes: limits.max_nodes.unwrap_or(u64::MAX),
        nodes: 0,
        aborted: false,
        strong,
        colour,
        bside,
        pos: &pos,
    };
    for v in 0..n {
        st.possible[basepal[v] as usize] += 1;
        st.possible[(basepal[v] | cbit) as usize] += 1;
    }
    if limits.size.is_none_or(|s| s <= n) {
        st.rec(0);
    }
    (st.out, !st.aborted)
}

fn search_order(bd: &SideData) -> Vec<usize> {
    let n = bd.n;
    let mut order = Vec::with_capacity(n);
    let mut placed = 0u64;
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| placed >> v & 1 == 0)
            .max_by_key(|&v| ((bd.out[v] | bd.inn[v]).count_ones(), std::cmp::Reverse(v)))
            .expect("unplaced vertex");
        let mut queue = std::collections::VecDeque::from([start]);
        placed |= 1 << start;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb = (bd.out[u] | bd.inn[u]) & !placed;
            while nb != 0 {
                let w = nb.trailing_zeros() as usize;
                nb &= nb - 1;
                placed |= 1 << w;
                queue.push_back(w);
            }
        }
    }
    order
}

struct Enum<'a> {
    game: &'a Game,
    bd: &'a SideData,
    target: &'a Profile,
    basepal: &'a [u32],
    cbit: u32,
    order: &'a [usize],
    pal: Vec<u32>,
    assigned: u64,
    chosen: u64,
    chosen_count: usize,
    possible: Vec<u32>,
    covered_count: Vec<u32>,
    size: Option<usize>,
    class_info: Option<(Vec<u32>, BTreeMap<u32, usize>, BTreeMap<u32, usize>)>,
    class_chosen: BTreeMap<u32, usize>,
    out: Vec<u64>,
    max_answers: usize,
    max_nodes: u64,
    nodes: u64,
    aborted: bool,
    strong: bool,
    colour: usize,
    bside: Side,
    pos: &'a Position,
}

impl Enum<'_> {
    fn consistent(&self, v: usize, p: u32) -> bool {
        if self.target.nonempty >> p & 1 == 0 {
            return false;
        }
        let bd = self.bd;
        let mut outs = bd.out[v] & (self.assigned | 1 << v);
        while outs != 0 {
            let u = outs.trailing_zeros() as usize;
            outs &= outs - 1;
            let pu = if u == v { p } else { self.pal[u] };
            if self.target.edges[p as usize] >> pu & 1 == 0 {
                return false;
            }
        }
        let mut ins = bd.inn[v] & self.assigned;
        while ins != 0 {
            let u = ins.trailing_zeros() as usize;
            ins &= ins - 1;
            if self.target.edges[self.pal[u] as usize] >> p & 1 == 0 {
                return false;
            }
        }
        true
    }

    fn feasible(&self, depth: usize) -> bool {
        let remaining = self.order.len() - depth;
        if let Some(s) = self.size {
            if self.chosen_count > s || self.chosen_count + remaining < s {
                return false;
            }
        }
        if let Some((_, targets, remaining_by_class)) = &self.class_info {
            for (id, &t) in targets {
                let have = self.class_chosen.get(id).copied().unwrap_or(0);
                let left = remaining_by_class.get(id).copied().unwrap_or(0);
                if have > t || have + left < t {
                    return false;
                }
            }
            for (id, &have) in &self.class_chosen {
                if have > 0 && !targets.contains_key(id) {
                    return false;
                }
            }
        }
        let mut need = self.target.nonempty;
        while need != 0 {
            let p = need.trailing_zeros() as usize;
            need &= need - 1;
            if self.covered_count[p] == 0 && self.possible[p] == 0 {
                return false;
            }
        }
        true
    }

    fn rec(&mut self, depth: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.aborted = true;
            return;
        }
        if !self.feasible(depth) {
            return;
        }
        if depth == self.order.len() {
            let mut pos = self.pos.clone();
            pos.sets[self.colour][self.bside.index()] = Mask(self.chosen);
            let prof = side_profile(self.bd, &pos.masks(self.bside), self.strong);
            if prof == *self.target {
                if self.out.len() >= self.max_answers {
                    self.aborted = true;
                    return;
                }
                self.out.push(self.chosen);
            }
            return;
        }
        let v = self.order[depth];
        let b = self.basepal[v];
        let _ = self.game;
        self.possible[b as usize] -= 1;
        self.possible[(b | self.cbit) as usize] -= 1;
        let class = self.class_info.as_ref().map(|(ids, _, _)| ids[v]);
        if let (Some(id), Some((_, _, rem))) = (class, self.class_info.as_mut()) {
            *rem.get_mut(&id).expect("class counted") -= 1;
        }
        for take in [false, true] {
            let p = if take { b | self.cbit } else { b };
            if !self.consistent(v, p) {
                continue;
            }
            self.pal[v] = p;
            self.assigned |= 1 << v;
            self.covered_count[p as usize] += 1;
            if take {
                self.chosen |= 1 << v;
                self.chosen_count += 1;
                if let Some(id) = class {
                    *self.class_chosen.entry(id).or_insert(0) += 1;
                }
            }
            self.rec(depth + 1);
            if take {
                self.chosen &= !(1 << v);
                self.chosen_count -= 1;
                if let Some(id) = class {
                    *self.class_chosen.get_mut(&id).expect("present") -= 1;
                }
            }
            self.covered_count[p as usize] -= 1;
            self.assigned &= !(1 << v);
            if self.aborted {
                break;
            }
        }
        if let (Some(id), Some((_, _, rem))) = (class, self.class_info.as_mut()) {
            *rem.get_mut(&id).expect("class counted") += 1;
        }
        self.possible[b as usize] += 1;
        self.possible[(b | self.cbit) as usize] += 1;
    }
}

/// Distinct keys of a set of positions, used by tests and enumeration.
pub fn distinct_keys(game: &Game, positions: &[Position], modulo: bool) -> usize {
    positions.iter().map(|p| game.position_key(p, modulo)).collect::<HashSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::fig1;

    fn game(g: Digraph, h: Digraph, k: usize, v: Variant) -> Game {
        Game::new(GameConfig::new(g, h, k, v)).unwrap()
    }

    #[test]
    fn initial_position_is_safe() {
        let (g, h) = fig1();
        let gm = game(g, h, 2, Variant::Strong);
        let p = gm.initial_position();
        assert!(gm.losing_conditions(&p).is_empty());
        assert!(p.sets.iter().all(|s| s[0].is_empty() && s[1].is_empty()));
        let mso = game(fig1().0, fig1().1, 1, Variant::Mso { pebbles: 2 });
        assert_eq!(mso.initial_position().pebbles, vec![None, None]);
        assert!(Game::new(GameConfig::new(Digraph::edgeless(1, true), Digraph::edgeless(1, true), 0, Variant::Plain)).is_err());
    }

    #[test]
    fn reuse_erases() {
        let g = Digraph::edgeless(3, true);
        let gm = game(g.clone(), g, 1, Variant::Plain);
        let p0 = gm.initial_position();
        let pend = gm.apply_universal(&p0, Move::colour(0, Side::G, &[0, 1])).unwrap();
        let p1 = gm.apply_existential(&pend, Answer::Set(Mask(0b011))).unwrap();
        let pend = gm.apply_universal(&p1, Move::colour(0, Side::G, &[2])).unwrap();
        let p2 = gm.apply_existential(&pend, Answer::Set(Mask(0b100))).unwrap();
        assert_eq!(p2.palette(Side::G, 0), 0);
        assert_eq!(p2.palette(Side::G, 2), 1);
        let pend = gm.apply_universal(&p2, Move::colour(0, Side::G, &[])).unwrap();
        let p3 = gm.apply_existential(&pend, Answer::Set(Mask(0))).unwrap();
        assert_eq!(p3, gm.initial_position());
    }

    #[test]
    fn malformed_moves_rejected() {
        let g = Digraph::edgeless(2, true);
        let gm = game(g.clone(), g, 1, Variant::Plain);
        let p = gm.initial_position();
        assert!(gm.apply_universal(&p, Move::Pebble { pair: 0, side: Side::G, vertex: 0 }).is_err());
        assert!(gm.apply_universal(&p, Move::colour(1, Side::G, &[0])).is_err());
        assert!(gm.apply_universal(&p, Move::colour(0, Side::G, &[5])).is_err());
        let pend = gm.apply_universal(&p, Move::colour(0, Side::G, &[0])).unwrap();
        assert!(gm.apply_existential(&pend, Answer::Vertex(0)).is_err());
        assert!(gm.apply_existential(&pend, Answer::Set(Mask(0b100))).is_err());
    }

    #[test]
    fn c2_definition_instance() {
        let g = Digraph::new(2, &[(0, 1)], true).unwrap();
        let h = Digraph::edgeless(2, true);
        let gm = game(g, h, 2, Variant::Plain);
        let mut p = gm.initial_position();
        p.sets[0] = [Mask(1), Mask(1)];
        p.sets[1] = [Mask(2), Mask(2)];
        let t = gm.losing_conditions(&p);
        assert_eq!(t, vec![Trigger::C2 { from: 1, to: 2, edge_side: Side::G, edge: (0, 1) }]);
    }

    #[test]
    fn fig1_strong_cycle_move() {
        let (g, h) = fig1();
        let gm = game(g, h, 1, Variant::Strong);
        let pend = gm.apply_universal(&gm.initial_position(), Move::colour(0, Side::H, &[6, 7])).unwrap();
        for t in 0..64u64 {
            let p = gm.apply_existential(&pend, Answer::Set(Mask(t))).unwrap();
            assert!(gm.is_losing(&p));
        }
        let s = gm.surviving_answers(&pend, &AnswerLimits::default());
        assert!(s.answers.is_empty() && s.complete);
    }

    #[test]
    fn ranges_partition() {
        let (g, h) = fig1();
        let gm = game(g, h, 2, Variant::Plain);
        let mut p = gm.initial_position();
        assert_eq!(gm.ranges(&p, Side::G, 0).len(), 6);
        p.sets[0] = [Mask(1), Mask(0)];
        p.sets[1] = [Mask(2), Mask(0)];
        assert_eq!(gm.ranges(&p, Side::G, 1), Mask(1));
        assert_eq!(gm.ranges(&p, Side::G, 0).len(), 4);
        assert!(gm.ranges(&p, Side::G, 3).is_empty());
        let total: usize = (0..4).map(|q| gm.ranges(&p, Side::H, q).len()).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn move_counts() {
        let g = Digraph::edgeless(2, true);
        let gm = game(g.clone(), g, 1, Variant::Plain);
        assert_eq!(gm.universal_moves(&gm.initial_position(), MovePolicy::All).len(), 8);
        let e3 = Digraph::edgeless(3, true);
        let gm = game(e3.clone(), e3, 1, Variant::Plain);
        let canon = gm.universal_moves(&gm.initial_position(), MovePolicy::Canonical);
        assert_eq!(canon.iter().filter(|m| m.side() == Side::G).count(), 4);
        assert_eq!(canon.len(), 8);
    }

    #[test]
    fn keys_modulo_automorphisms() {
        let e3 = Digraph::edgeless(3, true);
        let gm = game(e3.clone(), e3, 1, Variant::Plain);
        let mut a = gm.initial_position();
        a.sets[0] = [Mask(0b001), Mask(0)];
        let mut b = gm.initial_position();
        b.sets[0] = [Mask(0b010), Mask(0)];
        assert_eq!(gm.position_key(&a, true), gm.position_key(&b, true));
        assert_ne!(gm.position_key(&a, false), gm.position_key(&b, false));
        assert_eq!(gm.position_key(&a, false), gm.position_key(&a.clone(), false));
    }

    #[test]
    fn move_json_shapes() {
        let m = Move::colour(1, Side::H, &[0, 2]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"type":"colour","colour":1,"side":"H","vertices":[0,2]}"#);
        assert_eq!(serde_json::from_str::<Move>(&s).unwrap(), m);
        let p = Move::Pebble { pair: 0, side: Side::G, vertex: 3 };
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"type":"pebble","pair":0,"side":"G","vertex":3}"#);
        let t = Trigger::C1 { palette: 1, nonempty_side: Side::H, vertex: 2 };
        let js = serde_json::to_value(&t).unwrap();
        assert_eq!(js["kind"], "C1");
        assert_eq!(js["witness"]["vertex"], 2);
        let pt = Trigger::Pebble { pairs: vec![0], reason: "edge".into() };
        assert_eq!(serde_json::to_value(&pt).unwrap()["kind"], "PEBBLE");
        assert!(serde_json::from_str::<Move>(r#"{"type":"colour","colour":0,"side":"G","vertices":[],"x":1}"#).is_err());
    }

    #[test]
    fn state_space_estimates() {
        let e = |a, b, k| estimate_state_space(&GameConfig::new(Digraph::edgeless(a, true), Digraph::edgeless(b, true), k, Variant::Plain)).value;
        assert_eq!(e(3, 3, 2), 4096);
        assert_eq!(e(6, 6, 2), 16_777_216);
        assert_eq!(e(6, 8, 1), 16_384);
    }

    #[test]
    fn enumerator_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.gen_range(1..=5);
            let mk = |rng: &mut rand::rngs::StdRng| {
                let e: Vec<(usize, usize)> =
                    (0..n * n).filter(|_| rng.gen_bool(0.3)).map(|b| (b / n, b % n)).collect();
                Digraph::new(n, &e, true).unwrap()
            };
            let (g, h) = (mk(&mut rng), mk(&mut rng));
            let strong = rng.gen_bool(0.5);
            let gm = game(g, h, 2, if strong { Variant::Strong } else { Variant::Plain });
            let mut p = gm.initial_position();
            p.sets[1] = [Mask(rng.gen_range(0..1u64 << n)), Mask(rng.gen_range(0..1u64 << n))];
            let side = if rng.gen_bool(0.5) { Side::G } else { Side::H };
            let mv = Move::Colour { colour: 0, side, vertices: Mask(rng.gen_range(0..1u64 << n)) };
            let pend = gm.apply_universal(&p, mv).unwrap();
            let brute: Vec<Answer> = gm
                .all_answers(&pend)
                .into_iter()
                .filter(|&a| !gm.is_losing(&gm.apply_existential(&pend, a).unwrap()))
                .collect();
            let mut fast = gm.surviving_answers(&pend, &AnswerLimits::default()).answers;
            fast.sort_by_key(|a| match a {
                Answer::Set(m) => m.0,
                Answer::Vertex(v) => *v as u64,
            });
            let mut brute = brute;
            brute.sort_by_key(|a| match a {
                Answer::Set(m) => m.0,
                Answer::Vertex(v) => *v as u64,
            });
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn trigger_sets_agree_with_profiles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        for _ in 0..300 {
            let n = 4;
            let mk = |rng: &mut rand::rngs::StdRng| {
                let e: Vec<(usize, usize)> =
                    (0..n * n).filter(|_| rng.gen_bool(0.35)).map(|b| (b / n, b % n)).collect();
                Digraph::new(n, &e, true).unwrap()
            };
            let (g, h) = (mk(&mut rng), mk(&mut rng));
            let plain = game(g.clone(), h.clone(), 2, Variant::Plain);
            let strong = game(g, h, 2, Variant::Strong);
            let mut p = plain.initial_position();
            for c in 0..2 {
                p.sets[c] = [Mask(rng.gen_range(0..16)), Mask(rng.gen_range(0..16))];
            }
            let tp = plain.losing_conditions(&p);
            let ts = strong.losing_conditions(&p);
            assert_eq!(!tp.is_empty(), plain.is_losing(&p));
            assert_eq!(!ts.is_empty(), strong.is_losing(&p));
            assert!(tp.iter().all(|t| ts.contains(t)));
        }
    }
}
