use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;
use serde_json::{json, Value};

use hklab::checkers::{CheckContext, Grid};
use hklab::graph::parse_hkgraph;
use hklab::walk::scale_function_with;
use hklab::{GeneratorSpec, WeightedGraph};

use crate::cache::ExitCache;
use crate::config::{resolve, Override, RunConfig};
use crate::generate::{graph_hash, sidecar_path, Sidecar};
use crate::{read_file, write_file, CliError, CliResult};

/// Name of the resolved configuration written beside the reports.
pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// hkgraph file; when omitted the config's `generator` is built.
    pub graph: Option<PathBuf>,
    /// Run config (JSON). Its values win over the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated checker names; an empty value runs nothing.
    #[arg(long, value_delimiter = ',')]
    pub checkers: Option<Vec<String>>,
    /// Where reports go (default `reports`).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Seed for sampled centres, triples and Monte Carlo.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random boundary data draws per cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Most comparison points per cell.
    #[arg(long)]
    pub comparison_cap: Option<usize>,
    /// Most one-hot boundary data per cell.
    #[arg(long)]
    pub extreme_cap: Option<usize>,
    /// Last time step for kernel checks.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Monte Carlo walks per cell (0 disables).
    #[arg(long)]
    pub mc_walks: Option<usize>,
    /// `C'` in the Green upper bound.
    #[arg(long)]
    pub green_spread: Option<f64>,
    /// Resolvent powers, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub resolvent_powers: Option<Vec<usize>>,
    /// Parabolic Harnack profile as JSON, e.g. `{"c":[1,2,3,4],"eta":0.5}`.
    #[arg(long, value_parser = parse_json)]
    pub profile: Option<Value>,
    /// Solver policy as JSON.
    #[arg(long, value_parser = parse_json)]
    pub solver: Option<Value>,
    /// Generator spec as JSON, used when no graph file is given.
    #[arg(long, value_parser = parse_json)]
    pub generator: Option<Value>,
    /// Comma-separated centre labels (`grid.centers`).
    #[arg(long, value_delimiter = ',')]
    pub centers: Option<Vec<String>>,
    /// `grid.base_radius`.
    #[arg(long)]
    pub base_radius: Option<usize>,
    /// `grid.max_radius`.
    #[arg(long)]
    pub max_radius: Option<usize>,
    /// `thresholds.<name>`, as `name=value`; repeatable.
    #[arg(long = "threshold", value_name = "NAME=VALUE")]
    pub thresholds: Vec<String>,
}

fn parse_json(text: &str) -> Result<Value, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn overrides(args: &CheckArgs) -> CliResult<Vec<Override>> {
    let mut out = Vec::new();
    let mut push = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            out.push(Override::new(key, v));
        }
    };
    push(
        "checkers",
        args.checkers
            .as_ref()
            .map(|names| json!(names.iter().filter(|n| !n.is_empty()).collect::<Vec<_>>())),
    );
    push("output_dir", args.output_dir.as_ref().map(|p| json!(p)));
    push("seed", args.seed.map(|v| json!(v)));
    push("trials", args.trials.map(|v| json!(v)));
    push("comparison_cap", args.comparison_cap.map(|v| json!(v)));
    push("extreme_cap", args.extreme_cap.map(|v| json!(v)));
    push("horizon", args.horizon.map(|v| json!(v)));
    push("mc_walks", args.mc_walks.map(|v| json!(v)));
    push("green_spread", args.green_spread.map(|v| json!(v)));
    push("resolvent_powers", args.resolvent_powers.as_ref().map(|v| json!(v)));
    push("profile", args.profile.clone());
    push("solver", args.solver.clone());
    push("generator", args.generator.clone());
    push(
        "grid.centers",
        args.centers
            .as_ref()
            .map(|labels| json!({"strategy": "labeled", "labels": labels})),
    );
    push("grid.base_radius", args.base_radius.map(|v| json!(v)));
    push("grid.max_radius", args.max_radius.map(|v| json!(v)));
    for t in &args.thresholds {
        let (name, value) = t
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--threshold expects name=value, got {t}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| CliError::Config(format!("threshold {name} is not a number: {value}")))?;
        out.push(Override::new(&format!("thresholds.{name}"), json!(value)));
    }
    Ok(out)
}

struct LoadedGraph {
    graph: WeightedGraph,
    generator: Option<GeneratorSpec>,
    spec: Value,
    hash: String,
}

fn load_graph(path: Option<&Path>, config: &RunConfig) -> CliResult<LoadedGraph> {
    let (graph, text, generator) = match path {
        Some(path) => {
            let text = read_file(path)?;
            let graph = parse_hkgraph(&text)?;
            let side = sidecar_path(path);
            let generator = match std::fs::read_to_string(&side) {
                Ok(s) => match serde_json::from_str::<Sidecar>(&s) {
                    Ok(sidecar) => Some(sidecar.generator),
                    Err(e) => {
                        eprintln!("warning: ignoring sidecar {}: {e}", side.display());
                        None
                    }
                },
                Err(_) => None,
            };
            (graph, text, generator)
        }
        None => {
            let spec = config.generator.clone().ok_or_else(|| {
                CliError::Config("no graph file given and the config has no generator".into())
            })?;
            let graph = spec.build()?;
            let text = graph.to_hkgraph();
            (graph, text, Some(spec))
        }
    };
    let hash = graph_hash(&text);
    let spec = json!({
        "generator": generator,
        "sha256": hash,
        "vertex_count": graph.vertex_count(),
        "edge_count": graph.edge_count(),
    });
    Ok(LoadedGraph {
        graph,
        generator,
        spec,
        hash,
    })
}

/// `x,R,E(x,R)` for every grid centre and `R <= r_max` within its safe
/// radius, and `R,F(R)` over the same range.
fn exit_tables(ctx: &CheckContext<'_>, r_max: usize) -> CliResult<(String, Option<String>)> {
    let mut exits = String::from("x,R,E(x,R)\n");
    for (&x, &safe) in ctx.grid.centers.iter().zip(&ctx.grid.safe_radii) {
        for r in 1..=r_max.min(safe) {
            let _ = writeln!(exits, "{x},{r},{}", ctx.times.get(x, r)?);
        }
    }
    let reach = ctx.grid.safe_radii.iter().copied().max().unwrap_or(0).min(r_max);
    let f = if reach >= 1 {
        Some(scale_function_with(&ctx.times, &ctx.grid.centers, reach)?.to_csv())
    } else {
        None
    };
    Ok((exits, f))
}

pub fn run(args: &CheckArgs) -> CliResult<ExitCode> {
    let file = match &args.config {
        Some(path) => Some(
            serde_json::from_str::<Value>(&read_file(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let (config, warnings) = resolve(file, &overrides(args)?)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if config.checkers.is_empty() {
        println!("no checkers configured; nothing to do");
        return Ok(ExitCode::SUCCESS);
    }

    let loaded = load_graph(args.graph.as_deref(), &config)?;
    let g = &loaded.graph;
    let grid = Grid::resolve_partial(g, &config.grid)?;
    let ctx = CheckContext::with_config(g, grid, config.check_config()).with_graph_spec(loaded.spec.clone());
    let cache = ExitCache::from_env(&loaded.hash, config.solver);
    if let Some(cache) = &cache {
        ctx.times.preload(cache.load());
    }

    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
    let mut all_pass = true;
    for &kind in &config.checkers {
        let report = ctx.run_flagged(kind)?;
        write_file(&dir.join(format!("{}.json", kind.name())), &report.to_json()?)?;
        write_file(&dir.join(format!("{}.csv", kind.name())), &report.to_csv()?)?;
        let exponent = report
            .summary
            .exponent
            .map(|e| format!(" exponent {e:.4}"))
            .unwrap_or_default();
        println!("{:<18} {:?}{exponent}", kind.name(), report.verdict);
        all_pass &= report.passed();
    }

    let r_max = 2 * ctx.grid.radii.iter().copied().max().unwrap_or(0);
    let (exits, f) = exit_tables(&ctx, r_max)?;
    write_file(&dir.join("exit_times.csv"), &exits)?;
    if let Some(f) = f {
        write_file(&dir.join("scale_function.csv"), &f)?;
    }
    // the recorded config can rebuild the graph without the file
    let mut config = config;
    if config.generator.is_none() {
        config.generator = loaded.generator.clone();
    }
    let recorded = serde_json::to_string_pretty(&config).expect("config serialises") + "\n";
    write_file(&dir.join(RUN_CONFIG_FILE), &recorded)?;
    if let Some(cache) = &cache {
        cache.store(ctx.times.snapshot())?;
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
