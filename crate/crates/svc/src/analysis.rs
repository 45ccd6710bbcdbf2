//! Analysis requests shared by the CLI and the HTTP job queue.

use seurat_core::engine::{Game, GameConfig, Variant};
use seurat_core::graph::{Digraph, Labels};
use seurat_core::iso::{canonical_form, find_isomorphism, IsoMode};
use seurat_core::recon::{da_deck, search, SearchScope};
use seurat_core::refine::{k_wl_joint, tally_sequences, tally_spectrum, WlColouring};
use seurat_core::solve::{solve, SolveLimits};
use seurat_core::strat::{scripted, verify, Adversary, ScriptParams, VerifyOptions};
use seurat_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::graphs::{resolve, GraphRef};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisRequest {
    Spectra {
        graph: GraphRef,
    },
    Wl {
        g: GraphRef,
        #[serde(default)]
        h: Option<GraphRef>,
        k: usize,
    },
    Iso {
        g: GraphRef,
        h: GraphRef,
        #[serde(default = "refined")]
        mode: IsoMode,
    },
    Deck {
        g: GraphRef,
        #[serde(default)]
        h: Option<GraphRef>,
    },
    Solve {
        g: GraphRef,
        h: GraphRef,
        colours: usize,
        #[serde(default = "plain")]
        variant: Variant,
        #[serde(default)]
        limits: SolveLimits,
    },
    Verify {
        g: GraphRef,
        h: GraphRef,
        colours: usize,
        strategy: String,
        #[serde(default)]
        params: ScriptParams,
        adversary: Adversary,
        #[serde(default)]
        options: VerifyOptions,
    },
    Search {
        scope: SearchScope,
        #[serde(default)]
        limits: SolveLimits,
    },
}

fn refined() -> IsoMode {
    IsoMode::RefinedBacktracking
}

fn plain() -> Variant {
    Variant::Plain
}

impl AnalysisRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            AnalysisRequest::Spectra { .. } => "spectra",
            AnalysisRequest::Wl { .. } => "wl",
            AnalysisRequest::Iso { .. } => "iso",
            AnalysisRequest::Deck { .. } => "deck",
            AnalysisRequest::Solve { .. } => "solve",
            AnalysisRequest::Verify { .. } => "verify",
            AnalysisRequest::Search { .. } => "search",
        }
    }

    fn refs_mut(&mut self) -> Vec<&mut GraphRef> {
        match self {
            AnalysisRequest::Spectra { graph } => vec![graph],
            AnalysisRequest::Wl { g, h, .. } | AnalysisRequest::Deck { g, h } => std::iter::once(g).chain(h).collect(),
            AnalysisRequest::Iso { g, h, .. }
            | AnalysisRequest::Solve { g, h, .. }
            | AnalysisRequest::Verify { g, h, .. } => vec![g, h],
            AnalysisRequest::Search { .. } => vec![],
        }
    }
}

/// A validated request with its graphs inlined.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub key: String,
    pub request: AnalysisRequest,
}

fn graph(r: &GraphRef) -> Result<(Digraph, Labels)> {
    resolve(r, false)
}

/// Resolves graph references, validates parameters and derives the cache
/// key from the kind, the canonical forms of the inputs and the
/// parameters.
pub fn prepare(mut request: AnalysisRequest, allow_files: bool) -> Result<Prepared> {
    let mut canon = Vec::new();
    for r in request.refs_mut() {
        let (g, l) = resolve(r, allow_files)?;
        canon.push(hex::encode(canonical_form(&g)));
        *r = GraphRef::Inline(g.to_json(Some(&l)));
    }
    validate(&request)?;
    let params = serde_json::to_vec(&request).expect("request serializes");
    let mut h = Sha256::new();
    h.update(request.kind().as_bytes());
    for c in &canon {
        h.update([0]);
        h.update(c.as_bytes());
    }
    h.update([0]);
    h.update(Sha256::digest(&params));
    Ok(Prepared { key: hex::encode(h.finalize()), request })
}

fn validate(req: &AnalysisRequest) -> Result<()> {
    match req {
        AnalysisRequest::Wl { k, .. } if *k == 0 => Err(Error::Config("k-WL dimension must be at least 1".into())),
        AnalysisRequest::Solve { colours, limits, .. } => {
            limits.validate()?;
            check_colours(*colours)
        }
        AnalysisRequest::Verify { colours, adversary, .. } => {
            check_colours(*colours)?;
            if let Adversary::FilteredExhaustive { filter, .. } = adversary {
                filter.validate(*colours)?;
            }
            Ok(())
        }
        AnalysisRequest::Search { scope, limits } => {
            limits.validate()?;
            check_colours(scope.colours)?;
            if scope.max_n > seurat_core::recon::MAX_ENUMERATION_ORDER {
                return Err(Error::SizeGuard(format!(
                    "search limited to n <= {}",
                    seurat_core::recon::MAX_ENUMERATION_ORDER
                )));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_colours(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("at least one colour is required".into()));
    }
    Ok(())
}

fn wl_json(c: &WlColouring) -> Value {
    json!({ "k": c.k, "rounds": c.rounds, "histogram": c.histogram })
}

fn spectra_json(g: &Digraph, labels: &Labels) -> Value {
    let seqs = tally_sequences(g, None);
    let vertices: Vec<Value> = seqs
        .iter()
        .enumerate()
        .map(|(v, s)| json!({ "vertex": v, "label": labels.get(&v), "sig": s.significant }))
        .collect();
    json!({ "n": g.n(), "spectrum": tally_spectrum(g, None).to_entries(), "vertices": vertices })
}

fn deck_json(g: &Digraph) -> Result<(Value, seurat_core::recon::DaDeck)> {
    let da = da_deck(g)?;
    Ok((json!({ "deck": da.project(), "da_deck": da }), da))
}

fn game_of(g: &GraphRef, h: &GraphRef, k: usize, variant: Variant) -> Result<Game> {
    Game::new(GameConfig::new(graph(g)?.0, graph(h)?.0, k, variant))
}

/// Runs a prepared request. Timing fields are removed so that results are
/// reproducible byte for byte.
pub fn execute(p: &Prepared) -> Result<Value> {
    let mut v = match &p.request {
        AnalysisRequest::Spectra { graph: r } => {
            let (g, l) = graph(r)?;
            spectra_json(&g, &l)
        }
        AnalysisRequest::Wl { g, h, k } => {
            let g = graph(g)?.0;
            match h {
                None => json!({ "g": wl_json(&k_wl_joint(&[&g], *k)?[0]) }),
                Some(h) => {
                    let h = graph(h)?.0;
                    let c = k_wl_joint(&[&g, &h], *k)?;
                    json!({
                        "g": wl_json(&c[0]),
                        "h": wl_json(&c[1]),
                        "distinguishes": c[0].histogram != c[1].histogram,
                    })
                }
            }
        }
        AnalysisRequest::Iso { g, h, mode } => {
            let (g, h) = (graph(g)?.0, graph(h)?.0);
            let m = find_isomorphism(&g, &h, *mode)?;
            json!({
                "isomorphic": m.is_some(),
                "map": m.and_then(|m| m.as_perm()),
                "canonical_g": hex::encode(canonical_form(&g)),
                "canonical_h": hex::encode(canonical_form(&h)),
            })
        }
        AnalysisRequest::Deck { g, h } => {
            let (gj, gd) = deck_json(&graph(g)?.0)?;
            match h {
                None => json!({ "g": gj }),
                Some(h) => {
                    let (hj, hd) = deck_json(&graph(h)?.0)?;
                    let diff = gd.difference(&hd).map(|((t, c), a, b)| {
                        json!({ "tally": t, "card": hex::encode(c), "count_g": a, "count_h": b })
                    });
                    json!({
                        "g": gj,
                        "h": hj,
                        "decks_equal": gd.project() == hd.project(),
                        "da_decks_equal": gd == hd,
                        "da_difference": diff,
                    })
                }
            }
        }
        AnalysisRequest::Solve { g, h, colours, variant, limits } => {
            let verdict = solve(&game_of(g, h, *colours, *variant)?, limits)?;
            json!({ "summary": verdict.summary(), "verdict": verdict })
        }
        AnalysisRequest::Verify { g, h, colours, strategy, params, adversary, options } => {
            let game = game_of(g, h, *colours, Variant::Plain)?;
            let s = scripted(&game, strategy, params)?;
            let mut report = verify(&game, &s, adversary, options)?;
            report.tree = None;
            serde_json::to_value(&report).expect("report serializes")
        }
        AnalysisRequest::Search { scope, limits } => {
            let r = search(scope, limits)?;
            serde_json::to_value(&r).expect("report serializes")
        }
    };
    strip_timing(&mut v);
    Ok(v)
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("elapsed_ms");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// Stored form of a finished analysis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredResult {
    pub id: String,
    pub kind: String,
    pub result: Value,
}
