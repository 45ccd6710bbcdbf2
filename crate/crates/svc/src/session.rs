//! Live play sessions: persisted history, replay, engine half-rounds and hints.

use std::sync::{Arc, OnceLock};

use seurat_core::engine::{Answer, Game, GameConfig, Move, PendingPosition, Position, Trigger, Variant};
use seurat_core::graph::GraphFile;
use seurat_core::solve::{hint_answers, hint_moves, Attractor, Evaluation, RankedAnswer, RankedMove, SolveLimits};
use seurat_core::strat::{eloise_heuristic, Eloise, Heuristic};
use serde::{Deserialize, Serialize};

use crate::graphs::{resolve, GraphRef};

pub const DEFAULT_HINT_DEPTH: u32 = 3;
pub const MAX_HINT_DEPTH: u32 = 12;
/// Attractors above this many positions are not built for interactive play.
pub const SESSION_STATE_BUDGET: u64 = 1 << 25;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("not your turn: {0}")]
    NotYourTurn(String),
    #[error("session already won by forall in round {0}")]
    Finished(u32),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error(transparent)]
    Game(#[from] seurat_core::Error),
    #[error("stored session is inconsistent: {0}")]
    Corrupt(String),
    #[error("storage error: {0}")]
    Io(#[from] std::io::Error),
}

pub type SResult<T> = std::result::Result<T, SessionError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Forall,
    Exists,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    Forall,
    Exists,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EngineSpec {
    Solver {
        #[serde(default)]
        limits: SolveLimits,
    },
    /// An ∃ heuristic: mirror, greedy_spectrum or random_constrained (seeded
    /// by the session seed). As ∀ it plays the top shallow-search hint.
    Heuristic { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub g: GraphRef,
    pub h: GraphRef,
    pub colours: usize,
    #[serde(default = "plain")]
    pub variant: Variant,
    pub human: Role,
    pub engine: EngineSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn plain() -> Variant {
    Variant::Plain
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostMove {
    #[serde(rename = "move", default)]
    pub mv: Option<Move>,
    #[serde(default)]
    pub answer: Option<Answer>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    #[serde(rename = "move")]
    pub mv: Move,
    pub answer: Answer,
    pub triggers: Vec<Trigger>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Live,
    WonByForall { round: u32, triggers: Vec<Trigger> },
}

/// Persisted form. `current`, `pending`, `round` and `status` are derived
/// from the history and checked on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub g: GraphFile,
    pub h: GraphFile,
    pub colours: usize,
    pub variant: Variant,
    pub human: Role,
    pub engine: EngineSpec,
    pub seed: u64,
    pub history: Vec<RoundRecord>,
    pub pending: Option<Move>,
    pub current: Position,
    pub round: u32,
    pub status: Status,
}

impl Session {
    pub fn to_move(&self) -> Option<Player> {
        match (&self.status, self.pending) {
            (Status::WonByForall { .. }, _) => None,
            (_, Some(_)) => Some(Player::Exists),
            (_, None) => Some(Player::Forall),
        }
    }

    fn human_plays(&self, p: Player) -> bool {
        matches!((self.human, p), (Role::Both, _) | (Role::Forall, Player::Forall) | (Role::Exists, Player::Exists))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Human,
    Engine,
}

/// One half-round committed by a request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub actor: Actor,
    #[serde(rename = "move", skip_serializing_if = "Option::is_none")]
    pub mv: Option<Move>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub triggers: Vec<Trigger>,
}

/// A hint with its dense rank: equally evaluated hints share a rank.
#[derive(Clone, Debug, Serialize)]
pub struct Ranked<T> {
    pub rank: usize,
    #[serde(flatten)]
    pub hint: T,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Hints {
    Moves(Vec<Ranked<RankedMove>>),
    Answers(Vec<Ranked<RankedAnswer>>),
}

fn dense_rank<T>(items: Vec<T>, eval: impl Fn(&T) -> &Evaluation) -> Vec<Ranked<T>> {
    let mut out: Vec<Ranked<T>> = Vec::with_capacity(items.len());
    for hint in items {
        let rank = match out.last() {
            Some(prev) if eval(&prev.hint) == eval(&hint) => prev.rank,
            Some(prev) => prev.rank + 1,
            None => 1,
        };
        out.push(Ranked { rank, hint });
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct HintReport {
    pub to_move: Player,
    pub round: u32,
    /// "attractor" (exact, certified ranks) or "search" (depth-bounded).
    pub source: &'static str,
    pub depth: Option<u32>,
    pub hints: Hints,
}

/// A session with its game and lazily built solver state.
pub struct Live {
    pub session: Session,
    game: Game,
    attractor: OnceLock<Option<Arc<Attractor>>>,
    eloise: OnceLock<Option<Arc<dyn Eloise>>>,
}

fn build_game(s: &Session) -> SResult<Game> {
    let (g, _) = s.g.clone().into_graph()?;
    let (h, _) = s.h.clone().into_graph()?;
    Ok(Game::new(GameConfig::new(g, h, s.colours, s.variant))?)
}

impl Live {
    pub fn create(id: String, req: CreateSession, default_seed: u64) -> SResult<(Live, Vec<Event>)> {
        let (g, gl) = resolve(&req.g, false)?;
        let (h, hl) = resolve(&req.h, false)?;
        if let EngineSpec::Solver { limits } = &req.engine {
            limits.validate()?;
        }
        let game = Game::new(GameConfig::new(g.clone(), h.clone(), req.colours, req.variant))?;
        if let EngineSpec::Heuristic { name } = &req.engine {
            heuristic_by_name(name, 0)?;
        }
        let session = Session {
            id,
            g: g.to_json(Some(&gl)),
            h: h.to_json(Some(&hl)),
            colours: req.colours,
            variant: req.variant,
            human: req.human,
            engine: req.engine,
            seed: req.seed.unwrap_or(default_seed),
            history: vec![],
            pending: None,
            current: game.initial_position(),
            round: 0,
            status: Status::Live,
        };
        let mut live = Live { session, game, attractor: OnceLock::new(), eloise: OnceLock::new() };
        let events = live.engine_turns()?;
        Ok((live, events))
    }

    /// Rebuilds a stored session, replaying its history to check the
    /// derived fields.
    pub fn restore(session: Session) -> SResult<Live> {
        let game = build_game(&session)?;
        let mut pos = game.initial_position();
        let mut status = Status::Live;
        for (i, r) in session.history.iter().enumerate() {
            if status != Status::Live || r.round != i as u32 + 1 {
                return Err(SessionError::Corrupt(format!("unexpected round {}", r.round)));
            }
            let pend = game.apply_universal(&pos, r.mv)?;
            pos = game.apply_existential(&pend, r.answer)?;
            let t = game.losing_conditions(&pos);
            if t != r.triggers {
                return Err(SessionError::Corrupt(format!("triggers of round {} differ on replay", r.round)));
            }
            if !t.is_empty() {
                status = Status::WonByForall { round: r.round, triggers: t };
            }
        }
        if let Some(mv) = session.pending {
            game.check_move(&pos, &mv)?;
        }
        if pos != session.current || status != session.status || session.round != session.history.len() as u32 {
            return Err(SessionError::Corrupt("replay does not reproduce the stored state".into()));
        }
        Ok(Live { session, game, attractor: OnceLock::new(), eloise: OnceLock::new() })
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    fn check_live(&self) -> SResult<()> {
        match &self.session.status {
            Status::WonByForall { round, .. } => Err(SessionError::Finished(*round)),
            Status::Live => Ok(()),
        }
    }

    /// Commits the human half-round, then any engine half-rounds.
    pub fn post(&mut self, p: PostMove) -> SResult<Vec<Event>> {
        self.check_live()?;
        let turn = self.session.to_move().expect("live");
        let sent = match (&p.mv, &p.answer) {
            (Some(_), None) => Player::Forall,
            (None, Some(_)) => Player::Exists,
            _ => return Err(SessionError::Malformed("send exactly one of \"move\" or \"answer\"".into())),
        };
        for player in [turn, sent] {
            if !self.session.human_plays(player) {
                return Err(SessionError::NotYourTurn(format!("the engine plays {player:?}")));
            }
        }
        let event = match (turn, p.mv, p.answer) {
            (Player::Forall, Some(mv), None) => self.commit_move(Actor::Human, mv)?,
            (Player::Exists, None, Some(a)) => self.commit_answer(Actor::Human, a)?,
            (Player::Forall, _, _) => {
                return Err(SessionError::Malformed("forall to move: send exactly {\"move\": ...}".into()))
            }
            (Player::Exists, _, _) => {
                return Err(SessionError::Malformed("exists to answer: send exactly {\"answer\": ...}".into()))
            }
        };
        let mut events = vec![event];
        events.extend(self.engine_turns()?);
        Ok(events)
    }

    fn commit_move(&mut self, actor: Actor, mv: Move) -> SResult<Event> {
        self.game.check_move(&self.session.current, &mv)?;
        self.session.pending = Some(mv);
        Ok(Event { actor, mv: Some(mv), answer: None, triggers: vec![] })
    }

    fn commit_answer(&mut self, actor: Actor, answer: Answer) -> SResult<Event> {
        let mv = self.session.pending.expect("pending move");
        let pend = PendingPosition { base: self.session.current.clone(), mv };
        let next = self.game.apply_existential(&pend, answer)?;
        let triggers = self.game.losing_conditions(&next);
        let s = &mut self.session;
        s.round += 1;
        s.history.push(RoundRecord { round: s.round, mv, answer, triggers: triggers.clone() });
        s.current = next;
        s.pending = None;
        if !triggers.is_empty() {
            s.status = Status::WonByForall { round: s.round, triggers: triggers.clone() };
        }
        Ok(Event { actor, mv: None, answer: Some(answer), triggers })
    }

    fn engine_turns(&mut self) -> SResult<Vec<Event>> {
        let mut out = vec![];
        while let Some(turn) = self.session.to_move() {
            if self.session.human_plays(turn) {
                break;
            }
            out.push(match turn {
                Player::Forall => {
                    let mv = self.engine_move()?;
                    self.commit_move(Actor::Engine, mv)?
                }
                Player::Exists => {
                    let a = self.engine_answer()?;
                    self.commit_answer(Actor::Engine, a)?
                }
            });
        }
        Ok(out)
    }

    fn solver_limits(&self) -> Option<&SolveLimits> {
        match &self.session.engine {
            EngineSpec::Solver { limits } => Some(limits),
            EngineSpec::Heuristic { .. } => None,
        }
    }

    /// Exact attractor when the engine is a solver and the state space fits.
    fn attractor(&self) -> SResult<Option<Arc<Attractor>>> {
        if let Some(a) = self.attractor.get() {
            return Ok(a.clone());
        }
        let fits = |budget: u64| {
            let s = self.game.estimate_state_space();
            !s.saturated && s.value <= budget.min(SESSION_STATE_BUDGET) as u128
        };
        let a = match self.solver_limits() {
            Some(l) if !l.force_search && fits(l.state_budget) => Some(Arc::new(Attractor::compute(&self.game)?)),
            _ => None,
        };
        Ok(self.attractor.get_or_init(|| a).clone())
    }

    fn eloise(&self) -> SResult<Option<Arc<dyn Eloise>>> {
        if let Some(e) = self.eloise.get() {
            return Ok(e.clone());
        }
        let e = match &self.session.engine {
            EngineSpec::Heuristic { name } => {
                Some(Arc::from(eloise_heuristic(&self.game, &heuristic_by_name(name, self.session.seed)?)?))
            }
            EngineSpec::Solver { .. } => None,
        };
        Ok(self.eloise.get_or_init(|| e).clone())
    }

    fn search_limits(&self, depth: u32) -> SolveLimits {
        let base = self.solver_limits().cloned().unwrap_or_default();
        SolveLimits { max_rounds: Some(depth), force_search: true, ..base }
    }

    fn engine_move(&self) -> SResult<Move> {
        let pos = &self.session.current;
        if let Some(attr) = self.attractor()? {
            if let Some((mv, _)) = attr.best_move(pos) {
                return Ok(mv);
            }
        }
        let depth = self.solver_limits().and_then(|l| l.max_rounds).unwrap_or(2);
        let hints = hint_moves(&self.game, pos, &self.search_limits(depth), self.attractor()?.as_deref());
        hints
            .first()
            .map(|h| h.mv)
            .ok_or_else(|| SessionError::Corrupt("no legal move".into()))
    }

    fn engine_answer(&self) -> SResult<Answer> {
        let pend = PendingPosition { base: self.session.current.clone(), mv: self.session.pending.expect("pending") };
        if let Some(e) = self.eloise()? {
            return Ok(e.answer(&self.game, &pend));
        }
        if let Some(attr) = self.attractor()? {
            return Ok(attr.best_answer(&pend));
        }
        let depth = self.solver_limits().and_then(|l| l.max_rounds).unwrap_or(2);
        let hints = hint_answers(&self.game, &pend, &self.search_limits(depth), None);
        Ok(hints.first().map(|h| h.answer).unwrap_or(Answer::Set(Default::default())))
    }

    /// Ranked moves or answers for whoever is to move.
    pub fn hint(&self, depth: Option<u32>) -> SResult<HintReport> {
        self.check_live()?;
        let depth = depth.unwrap_or(DEFAULT_HINT_DEPTH);
        if depth == 0 || depth > MAX_HINT_DEPTH {
            return Err(SessionError::Malformed(format!("hint depth must be in 1..={MAX_HINT_DEPTH}")));
        }
        let attr = self.attractor()?;
        let limits = self.search_limits(depth);
        let s = &self.session;
        let to_move = s.to_move().expect("live");
        let hints = match s.pending {
            None => Hints::Moves(dense_rank(hint_moves(&self.game, &s.current, &limits, attr.as_deref()), |h| {
                &h.evaluation
            })),
            Some(mv) => {
                let pend = PendingPosition { base: s.current.clone(), mv };
                Hints::Answers(dense_rank(hint_answers(&self.game, &pend, &limits, attr.as_deref()), |h| {
                    &h.evaluation
                }))
            }
        };
        let (source, depth) = if attr.is_some() { ("attractor", None) } else { ("search", Some(depth)) };
        Ok(HintReport { to_move, round: s.round, source, depth, hints })
    }
}

pub fn heuristic_by_name(name: &str, seed: u64) -> seurat_core::Result<Heuristic> {
    match name {
        "mirror" => Ok(Heuristic::Mirror),
        "greedy_spectrum" => Ok(Heuristic::GreedySpectrum),
        "random_constrained" => Ok(Heuristic::RandomConstrained { seed }),
        _ => Err(seurat_core::Error::UnknownName(name.to_string())),
    }
}

/// True when a ranked hint promises survival.
pub fn is_safe(e: &Evaluation) -> bool {
    matches!(e, Evaluation::Safe { .. })
}

#[cfg(test)]
mod tests {
    use super::*;
    use seurat_core::engine::Side;

    fn req(g: &str, h: &str, k: usize, variant: Variant, human: Role, engine: EngineSpec) -> CreateSession {
        CreateSession { g: GraphRef::Spec(g.into()), h: GraphRef::Spec(h.into()), colours: k, variant, human, engine, seed: None }
    }

    fn solver() -> EngineSpec {
        EngineSpec::Solver { limits: SolveLimits::default() }
    }

    #[test]
    fn fig1_strong_engine_colours_the_two_cycle() {
        let (live, events) =
            Live::create("s".into(), req("fig1#0", "fig1#1", 1, Variant::Strong, Role::Exists, solver()), 0).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].mv, Some(Move::colour(0, Side::H, &[6, 7])));
        assert_eq!(live.session.to_move(), Some(Player::Exists));
    }

    #[test]
    fn mirror_session_and_turn_errors() {
        let mirror = EngineSpec::Heuristic { name: "mirror".into() };
        let (mut live, events) = Live::create("m".into(), req("K3", "K3", 2, Variant::Plain, Role::Forall, mirror), 7).unwrap();
        assert!(events.is_empty());
        let err = live.post(PostMove { mv: None, answer: Some(Answer::Set(Default::default())) }).unwrap_err();
        assert!(matches!(err, SessionError::NotYourTurn(_)));
        let ev = live.post(PostMove { mv: Some(Move::colour(0, Side::G, &[1])), answer: None }).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(ev[1].triggers.is_empty());
        assert_eq!(live.session.round, 1);
        assert_eq!(live.session.status, Status::Live);
    }

    #[test]
    fn zero_colours_rejected() {
        assert!(Live::create("z".into(), req("K3", "K3", 0, Variant::Plain, Role::Both, solver()), 0).is_err());
    }

    #[test]
    fn finished_session_rejects_moves_and_replays() {
        let (mut live, _) = Live::create("f".into(), req("K2", "K3", 1, Variant::Plain, Role::Both, solver()), 0).unwrap();
        live.post(PostMove { mv: Some(Move::colour(0, Side::H, &[0, 1, 2])), answer: None }).unwrap();
        let ev = live.post(PostMove { mv: None, answer: Some(Answer::Set(Default::default())) }).unwrap();
        assert!(!ev[0].triggers.is_empty());
        assert!(matches!(live.session.status, Status::WonByForall { round: 1, .. }));
        let err = live.post(PostMove { mv: Some(Move::colour(0, Side::G, &[0])), answer: None }).unwrap_err();
        assert!(matches!(err, SessionError::Finished(1)));
        assert!(live.hint(None).is_err());
        let again = Live::restore(live.session.clone()).unwrap();
        assert_eq!(again.session, live.session);
        let mut bad = live.session.clone();
        bad.current.sets[0][0].0 = 1;
        assert!(Live::restore(bad).is_err());
    }

    #[test]
    fn iso_pair_mirror_answer_ranked_safe() {
        let (mut live, _) = Live::create("i".into(), req("C5", "C5", 1, Variant::Plain, Role::Both, solver()), 0).unwrap();
        live.post(PostMove { mv: Some(Move::colour(0, Side::G, &[0, 2])), answer: None }).unwrap();
        let r = live.hint(Some(2)).unwrap();
        let Hints::Answers(a) = r.hints else { panic!("expected answers") };
        let mirror = a.iter().find(|x| x.hint.answer == Answer::Set(seurat_core::engine::Mask(0b101))).unwrap();
        assert_eq!(mirror.rank, 1);
        assert!(is_safe(&mirror.hint.evaluation));
    }
}
