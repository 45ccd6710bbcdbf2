use seurat_core::engine::{Game, GameConfig, Variant};
use seurat_core::gen::{cfi, complete_graph, default_twist, fig6, fig7, stockmeyer_pair, Family};
use seurat_core::graph::Digraph;
use seurat_core::strat::*;

fn game(g: Digraph, h: Digraph, k: usize) -> Game {
    Game::new(GameConfig::new(g, h, k, Variant::Plain)).unwrap()
}

fn tally_filter() -> ResponseFilter {
    ResponseFilter::new(&[Rule::S1, Rule::S2, Rule::S3, Rule::S4, Rule::TallySpectrum])
}

fn certify(gm: &Game, s: &Strategy, filter: ResponseFilter, depth: u32) -> VerifyReport {
    let adv = Adversary::FilteredExhaustive { filter, depth };
    verify(gm, s, &adv, &VerifyOptions::default()).unwrap()
}

#[test]
fn tally_script_across_sizes() {
    for (m, n) in [(2, 1), (4, 3)] {
        for fam in Family::ALL {
            let (g, h) = stockmeyer_pair(fam, m, n).unwrap();
            let gm = game(g, h, 2);
            let params = ScriptParams { guard: Some(tally_filter()), ..Default::default() };
            let s = scripted(&gm, "stockmeyer", &params).unwrap();
            let r = certify(&gm, &s, tally_filter(), 4);
            assert!(r.is_certified(), "{fam:?}({m},{n}): {:?}", r.reason);
        }
    }
}

#[test]
fn certificates_are_deterministic() {
    let (g, h) = stockmeyer_pair(Family::C, 3, 2).unwrap();
    let gm = game(g, h, 2);
    let params = ScriptParams { guard: Some(tally_filter()), ..Default::default() };
    let s = scripted(&gm, "tally", &params).unwrap();
    let a = certify(&gm, &s, tally_filter(), 4);
    let b = certify(&gm, &s, tally_filter(), 4);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.tree.is_some());
}

#[test]
fn log_palette_separates_four_vertices() {
    let g = Digraph::from_rows(&["0100", "0010", "0001", "1000"], true).unwrap();
    let h = Digraph::from_rows(&["0100", "1000", "0001", "0010"], true).unwrap();
    let gm = game(g, h, 2);
    let s = scripted(&gm, "log_palette", &ScriptParams::default()).unwrap();
    let r = verify(&gm, &s, &Adversary::Exhaustive { depth: 3 }, &VerifyOptions::default()).unwrap();
    assert!(r.is_certified(), "{:?}", r.reason);
    let one = game(Digraph::edgeless(4, true), Digraph::edgeless(4, true), 1);
    assert!(scripted(&one, "log_palette", &ScriptParams::default()).is_err());
}

#[test]
fn cfi_on_triangles() {
    let k3 = complete_graph(3);
    let g = cfi(&k3, None).unwrap().graph;
    let h = cfi(&k3, default_twist(&k3)).unwrap().graph;
    let gm = game(g, h, 2);
    let filter = ResponseFilter::new(&[Rule::S1, Rule::S4, Rule::S5, Rule::S6]);
    let params = ScriptParams { cfi_n: Some(3), guard: Some(filter.clone()), ..Default::default() };
    let s = scripted(&gm, "cfi", &params).unwrap();
    let r = certify(&gm, &s, filter, 3);
    assert!(r.is_certified(), "{:?}", r.reason);
}

#[test]
fn deck_skeleton_on_stockmeyer_pairs() {
    let (g, h) = stockmeyer_pair(Family::A, 2, 1).unwrap();
    let stage = deck_stage(&g, &h, (1 << g.n()) - 1, (1 << h.n()) - 1).unwrap().unwrap();
    assert_ne!(stage.s.len(), stage.t.len());
    let gm = game(g.clone(), h.clone(), 3);
    let s = scripted(&gm, "deck", &ScriptParams::default()).unwrap();
    let r = verify(&gm, &s, &Adversary::HeuristicSuite { seeds: vec![1, 2, 3], depth: 12 }, &VerifyOptions::default()).unwrap();
    assert_ne!(r.result, VerifyResult::Refuted, "{:?}", r.reason);
    assert!(scripted(&game(g, h, 2), "deck", &ScriptParams::default()).is_err());
    assert!(deck_stage(&fig6(), &fig7(), 63, 63).is_ok());
}

#[test]
fn heuristics_lose_to_ramachandran() {
    let gm = game(fig6(), fig7(), 2);
    let s = scripted(&gm, "ramachandran", &ScriptParams::default()).unwrap();
    for h in [Heuristic::Mirror, Heuristic::GreedySpectrum, Heuristic::RandomConstrained { seed: 5 }] {
        let Ok(eloise) = eloise_heuristic(&gm, &h) else { continue };
        let p = playout(&gm, &s, eloise.as_ref(), 12).unwrap();
        assert!(!p.triggers.is_empty(), "{h:?} survived: {}", p.reason);
    }
}
