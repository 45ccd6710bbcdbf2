//! The `seurat` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use seurat_core::engine::Variant;
use seurat_core::gen::{cfi, default_twist, stockmeyer_graph, family_params, tournament_t, Family};
use seurat_core::graph::{write_graph, Digraph, Labels};
use seurat_core::iso::IsoMode;
use seurat_core::recon::SearchScope;
use seurat_core::solve::{Pruning, SolveLimits};
use seurat_core::strat::{Adversary, ResponseFilter, ScriptParams, VerifyOptions, SCRIPT_NAMES};
use serde_json::Value;

use crate::analysis::{execute, prepare, AnalysisRequest};
use crate::graphs::{resolve_pair, resolve_spec, GraphRef};
use crate::store::Store;

#[derive(Parser, Debug)]
#[command(name = "seurat", version, about = "Colouring games on finite digraphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Graph arguments accept a seurat-graph-v1 file or a spec such as `fig6`,
/// `stars#1`, `K4`, `tournament:3`, `stockmeyer:D:2:1`,
/// `stockmeyer*:D:2:1`, `cfi:4` or `cfi~:4`.
#[derive(Subcommand, Debug)]
pub enum Command {
    /// Emit a generated graph as seurat-graph-v1 JSON.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Tally-spectrum and per-vertex tally-sequences.
    Spectra { graph: String },
    /// k-dimensional Weisfeiler-Leman colour histograms.
    Wl {
        g: String,
        h: Option<String>,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Isomorphism test with canonical forms.
    Iso {
        g: String,
        h: String,
        #[arg(long)]
        brute_force: bool,
    },
    /// Decks and degree-associated decks.
    Deck { g: String, h: Option<String> },
    /// Solve the game on a pair. Exit code 10 forall, 11 exists, 12 unknown.
    Solve(SolveArgs),
    /// Verify a scripted forall strategy.
    Verify(VerifyArgs),
    /// Solve all pairs of small digraphs.
    Search(SearchArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    Tournament {
        #[arg(long)]
        k: u32,
    },
    Stockmeyer {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        star: bool,
    },
    Cfi {
        /// Base graph: a file or a spec such as K4.
        #[arg(long)]
        base: String,
        /// Twist at this base edge.
        #[arg(long, num_args = 2, value_names = ["U", "V"])]
        twist: Option<Vec<usize>>,
        /// Twist at the default (lexicographically smallest) edge.
        #[arg(long, conflicts_with = "twist")]
        twisted: bool,
    },
    Named {
        #[arg(long)]
        name: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Plain,
    Strong,
    Mso,
}

#[derive(Args, Debug)]
pub struct GameArgs {
    #[arg(long, default_value_t = 2)]
    pub colours: usize,
    #[arg(long, value_enum, default_value = "plain")]
    pub variant: VariantArg,
    /// Pebble pairs for the MSO variant.
    #[arg(long, default_value_t = 1)]
    pub pebbles: usize,
}

impl GameArgs {
    fn variant(&self) -> Variant {
        match self.variant {
            VariantArg::Plain => Variant::Plain,
            VariantArg::Strong => Variant::Strong,
            VariantArg::Mso => Variant::Mso { pebbles: self.pebbles },
        }
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    pub g: Option<String>,
    pub h: Option<String>,
    /// A pair spec instead of two graphs: a named pair, stockmeyer:F:m:n or cfi:n.
    #[arg(long, conflicts_with_all = ["g", "h"])]
    pub pair: Option<String>,
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub max_rounds: Option<u32>,
    #[arg(long)]
    pub state_budget: Option<u64>,
    #[arg(long)]
    pub node_budget: Option<u64>,
    #[arg(long)]
    pub time_budget_ms: Option<u64>,
    /// Prune with the necessary response constraints (S1, S4).
    #[arg(long)]
    pub prune: bool,
    #[arg(long)]
    pub force_search: bool,
    #[arg(long)]
    pub no_symmetry: bool,
    /// Print the full verdict instead of the summary.
    #[arg(long)]
    pub full: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AdversaryArg {
    Exhaustive,
    Filtered,
    Heuristic,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub strategy: String,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Stockmeyer n with --family, else the CFI base order.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, conflicts_with_all = ["family", "m", "n"])]
    pub pair: Option<String>,
    #[arg(long)]
    pub colours: Option<usize>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub adversary: AdversaryArg,
    /// Filter rules for the filtered adversary, e.g. S1,S4.
    #[arg(long)]
    pub rules: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Case of the one-colour script.
    #[arg(long)]
    pub case: Option<u8>,
    #[arg(long)]
    pub node_budget: Option<u64>,
    #[arg(long)]
    pub no_symmetry: bool,
    /// Include the certificate tree.
    #[arg(long)]
    pub tree: bool,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 3)]
    pub max_n: usize,
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, overrides_with = "no_loops")]
    pub loops: bool,
    #[arg(long)]
    pub no_loops: bool,
    #[arg(long)]
    pub undirected: bool,
    /// Node budget per pair.
    #[arg(long)]
    pub budget: Option<u64>,
}

/// Writes a line to stdout; a closed pipe is not an error.
fn out(text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    out(&serde_json::to_string_pretty(v)?)
}

fn spec(s: &str) -> anyhow::Result<GraphRef> {
    let (g, l) = resolve_spec(s, true).with_context(|| format!("graph {s:?}"))?;
    Ok(GraphRef::Inline(g.to_json(Some(&l))))
}

fn analysis(req: AnalysisRequest) -> anyhow::Result<Value> {
    Ok(execute(&prepare(req, true)?)?)
}

fn emit(g: &Digraph, labels: Option<&Labels>) -> anyhow::Result<()> {
    out(&write_graph(g, labels))
}

fn gen(cmd: GenCommand) -> anyhow::Result<()> {
    match cmd {
        GenCommand::Tournament { k } => emit(&tournament_t(k)?, None),
        GenCommand::Stockmeyer { family, m, n, star } => {
            emit(&stockmeyer_graph(family_params(family, star, m, n))?, None)
        }
        GenCommand::Cfi { base, twist, twisted } => {
            let (b, _) = resolve_spec(&base, true)?;
            let t = match (twist, twisted) {
                (Some(v), _) => Some((v[0], v[1])),
                (None, true) => Some(default_twist(&b).context("base graph has no edges")?),
                (None, false) => None,
            };
            let c = cfi(&b, t)?;
            emit(&c.graph, Some(&c.label_table()))
        }
        GenCommand::Named { name } => {
            let (g, l) = resolve_spec(&name, false)?;
            emit(&g, Some(&l))
        }
    }
}

fn solve_cmd(a: SolveArgs) -> anyhow::Result<i32> {
    let (g, h) = match (&a.pair, &a.g, &a.h) {
        (Some(p), _, _) => {
            let (g, h) = resolve_pair(p)?;
            (GraphRef::Inline(g.to_json(None)), GraphRef::Inline(h.to_json(None)))
        }
        (None, Some(g), Some(h)) => (spec(g)?, spec(h)?),
        _ => bail!("give two graphs or --pair"),
    };
    let d = SolveLimits::default();
    let limits = SolveLimits {
        max_rounds: a.max_rounds,
        state_budget: a.state_budget.unwrap_or(d.state_budget),
        node_budget: a.node_budget.unwrap_or(d.node_budget),
        time_budget_ms: a.time_budget_ms,
        symmetry_reduction: !a.no_symmetry,
        pruning: if a.prune { Pruning::NecessaryConstraints } else { Pruning::None },
        force_search: a.force_search,
    };
    let v = analysis(AnalysisRequest::Solve { g, h, colours: a.game.colours, variant: a.game.variant(), limits })?;
    let code = match v["summary"]["winner"].as_str() {
        Some("forall") => 10,
        Some("exists") => 11,
        _ => 12,
    };
    print_json(if a.full { &v["verdict"] } else { &v["summary"] })?;
    Ok(code)
}

fn default_colours(strategy: &str) -> usize {
    match strategy {
        "one_colour" => 1,
        "deck" => 3,
        _ => 2,
    }
}

fn verify_cmd(a: VerifyArgs) -> anyhow::Result<i32> {
    if !SCRIPT_NAMES.contains(&a.strategy.as_str()) {
        bail!("unknown strategy {:?}; known: {}", a.strategy, SCRIPT_NAMES.join(", "));
    }
    let mut params = ScriptParams { case: a.case, ..Default::default() };
    let pair = match (&a.pair, a.family, a.m, a.n) {
        (Some(p), ..) => p.clone(),
        (None, Some(f), Some(m), Some(n)) => format!("stockmeyer:{f}:{m}:{n}"),
        (None, Some(_), ..) => bail!("--family needs --m and --n"),
        (None, None, _, Some(n)) => {
            params.cfi_n = Some(n as usize);
            format!("cfi:{n}")
        }
        (None, None, _, None) => match a.strategy.as_str() {
            "stars" => "stars".into(),
            "ramachandran" => "ramachandran".into(),
            "cfi" => {
                params.cfi_n = Some(4);
                "cfi:4".into()
            }
            "one_colour" => "fig1".into(),
            s => bail!("strategy {s} needs --family/--m/--n, --n or --pair"),
        },
    };
    if a.strategy == "cfi" && params.cfi_n.is_none() {
        params.cfi_n = pair.strip_prefix("cfi:").and_then(|n| n.parse().ok());
    }
    let (g, h) = resolve_pair(&pair)?;
    let colours = a.colours.unwrap_or_else(|| default_colours(&a.strategy));
    let adversary = match a.adversary {
        AdversaryArg::Exhaustive => Adversary::Exhaustive { depth: a.depth },
        AdversaryArg::Filtered => {
            let filter = match &a.rules {
                Some(r) => ResponseFilter::parse(r)?,
                None => ResponseFilter::necessary(),
            };
            Adversary::FilteredExhaustive { filter, depth: a.depth }
        }
        AdversaryArg::Heuristic => {
            let seeds = if a.seeds.is_empty() { vec![0, 1, 2] } else { a.seeds.clone() };
            Adversary::HeuristicSuite { seeds, depth: a.depth }
        }
    };
    let d = VerifyOptions::default();
    let options = VerifyOptions { node_budget: a.node_budget.unwrap_or(d.node_budget), symmetry: !a.no_symmetry };
    let game = seurat_core::engine::Game::new(seurat_core::engine::GameConfig::new(g, h, colours, Variant::Plain))?;
    let strategy = seurat_core::strat::scripted(&game, &a.strategy, &params)?;
    let mut report = seurat_core::strat::verify(&game, &strategy, &adversary, &options)?;
    if !a.tree {
        report.tree = None;
    }
    print_json(&report)?;
    Ok(if report.is_certified() { 0 } else { 1 })
}

fn search_cmd(a: SearchArgs) -> anyhow::Result<()> {
    let scope = SearchScope {
        max_n: a.max_n,
        colours: a.game.colours,
        loops: !a.no_loops,
        variant: a.game.variant(),
        undirected: a.undirected,
    };
    let limits = SolveLimits { node_budget: a.budget.unwrap_or(SolveLimits::default().node_budget), ..Default::default() };
    let report = seurat_core::recon::search(&scope, &limits)?;
    print_json(&report)?;
    eprint!("{}", report.summary_table());
    Ok(())
}

pub fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Gen(g) => gen(g)?,
        Command::Spectra { graph } => print_json(&analysis(AnalysisRequest::Spectra { graph: spec(&graph)? })?)?,
        Command::Wl { g, h, k } => {
            let h = h.map(|h| spec(&h)).transpose()?;
            print_json(&analysis(AnalysisRequest::Wl { g: spec(&g)?, h, k })?)?
        }
        Command::Iso { g, h, brute_force } => {
            let mode = if brute_force { IsoMode::BruteForce } else { IsoMode::RefinedBacktracking };
            print_json(&analysis(AnalysisRequest::Iso { g: spec(&g)?, h: spec(&h)?, mode })?)?
        }
        Command::Deck { g, h } => {
            let h = h.map(|h| spec(&h)).transpose()?;
            print_json(&analysis(AnalysisRequest::Deck { g: spec(&g)?, h })?)?
        }
        Command::Solve(a) => return solve_cmd(a),
        Command::Verify(a) => return verify_cmd(a),
        Command::Search(a) => search_cmd(a)?,
        Command::Serve { port, data_dir } => {
            let store = Store::open(Store::default_root(data_dir))?;
            tokio::runtime::Runtime::new()?.block_on(crate::api::serve(store, port))?;
        }
    }
    Ok(0)
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_forms() {
        for args in [
            vec!["seurat", "gen", "stockmeyer", "--family", "D", "--m", "2", "--n", "1", "--star"],
            vec!["seurat", "gen", "cfi", "--base", "K3", "--twist", "0", "1"],
            vec!["seurat", "solve", "--pair", "stockmeyer:D:2:1", "--colours", "2"],
            vec!["seurat", "verify", "--strategy", "tally", "--family", "A", "--m", "2", "--n", "1", "--adversary", "filtered", "--rules", "S1,S4", "--depth", "3"],
            vec!["seurat", "verify", "--strategy", "cfi", "--n", "4", "--adversary", "heuristic", "--seeds", "1,2", "--depth", "3"],
            vec!["seurat", "search", "--max-n", "2", "--colours", "1", "--no-loops"],
            vec!["seurat", "serve", "--port", "0", "--data-dir", "/tmp/x"],
        ] {
            Cli::try_parse_from(&args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn solve_exit_codes() {
        assert_eq!(run(["seurat", "solve", "--pair", "fig1", "--colours", "1", "--variant", "strong"]), 10);
        assert_eq!(run(["seurat", "solve", "--pair", "fig1", "--colours", "1"]), 11);
        assert_eq!(run(["seurat", "solve", "K2", "K2", "--colours", "0"]), 1);
    }
}
