use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hklab::generators::DEFAULT_VERTEX_CAP;
use hklab::graph::{FRONTIER_LABEL, HKGRAPH_MAGIC};
use hklab::{GeneratorSpec, WeightRule, WeightedGraph};

use crate::{write_file, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Lattice,
    Gasket,
    Vicsek,
    #[value(name = "stretched_vicsek", alias = "stretched-vicsek")]
    StretchedVicsek,
    #[value(name = "weighted_vicsek", alias = "weighted-vicsek")]
    WeightedVicsek,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Recursion level (gasket and Vicsek families).
    #[arg(long)]
    pub level: Option<usize>,
    /// Lattice dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Lattice box half-width.
    #[arg(long)]
    pub halfwidth: Option<usize>,
    /// Geometric weight ratio for the weighted Vicsek tree.
    #[arg(long, conflicts_with = "weights")]
    pub ratio: Option<f64>,
    /// Comma-separated per-annulus weights for the weighted Vicsek tree.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Output path; the sidecar goes next to it with extension `.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refuse to build graphs with more vertices than this.
    #[arg(long, default_value_t = DEFAULT_VERTEX_CAP)]
    pub cap: usize,
}

/// Metadata written next to every generated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub generator: GeneratorSpec,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub sha256: String,
    /// Named vertices such as `z0`, `z1`, ... and the gasket corners.
    pub labels: BTreeMap<String, Vec<usize>>,
    /// Vertices marking the truncation frontier.
    pub frontier: Vec<usize>,
    /// Safe radius of each labelled vertex.
    pub safe_radii: BTreeMap<String, usize>,
    pub p0: f64,
}

impl Sidecar {
    pub fn describe(spec: &GeneratorSpec, g: &WeightedGraph, text: &str) -> CliResult<Self> {
        let mut labels: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (v, name) in g.labels() {
            if name != FRONTIER_LABEL {
                labels.entry(name.clone()).or_default().push(*v);
            }
        }
        let mut safe_radii = BTreeMap::new();
        for (name, vertices) in &labels {
            let r = vertices
                .iter()
                .map(|&v| g.safe_radius(v))
                .collect::<hklab::Result<Vec<_>>>()?;
            safe_radii.insert(name.clone(), r.into_iter().min().unwrap_or(0));
        }
        Ok(Self {
            format: HKGRAPH_MAGIC.to_string(),
            generator: spec.clone(),
            vertex_count: g.vertex_count(),
            edge_count: g.edge_count(),
            sha256: graph_hash(text),
            labels,
            frontier: g.frontier(),
            safe_radii,
            p0: g.p0_constant(),
        })
    }
}

pub fn graph_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

pub fn sidecar_path(graph: &Path) -> PathBuf {
    graph.with_extension("json")
}

fn require(value: Option<usize>, flag: &str, family: Family) -> CliResult<usize> {
    value.ok_or_else(|| CliError::Config(format!("--{flag} is required for {family:?}")))
}

pub fn spec_from_args(args: &GenerateArgs) -> CliResult<GeneratorSpec> {
    let f = args.family;
    Ok(match f {
        Family::Lattice => GeneratorSpec::Lattice {
            dim: require(args.dim, "dim", f)?,
            halfwidth: require(args.halfwidth, "halfwidth", f)?,
        },
        Family::Gasket => GeneratorSpec::Gasket {
            level: require(args.level, "level", f)?,
        },
        Family::Vicsek => GeneratorSpec::Vicsek {
            level: require(args.level, "level", f)?,
        },
        Family::StretchedVicsek => GeneratorSpec::StretchedVicsek {
            level: require(args.level, "level", f)?,
        },
        Family::WeightedVicsek => GeneratorSpec::WeightedVicsek {
            level: require(args.level, "level", f)?,
            weights: match (&args.weights, args.ratio) {
                (Some(values), _) => WeightRule::Table {
                    values: values.clone(),
                },
                (None, Some(ratio)) => WeightRule::Geometric { ratio },
                (None, None) => WeightRule::default(),
            },
        },
    })
}

fn default_stem(spec: &GeneratorSpec) -> String {
    match spec {
        GeneratorSpec::Lattice { dim, halfwidth } => format!("lattice-d{dim}-h{halfwidth}"),
        GeneratorSpec::Gasket { level } => format!("gasket-{level}"),
        GeneratorSpec::Vicsek { level } => format!("vicsek-{level}"),
        GeneratorSpec::StretchedVicsek { level } => format!("stretched-vicsek-{level}"),
        GeneratorSpec::WeightedVicsek { level, .. } => format!("weighted-vicsek-{level}"),
    }
}

pub fn run(args: &GenerateArgs) -> CliResult<()> {
    let spec = spec_from_args(args)?;
    let g = spec.build_with_cap(args.cap)?;
    let text = g.to_hkgraph();
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.hkgraph", default_stem(&spec))));
    let sidecar = Sidecar::describe(&spec, &g, &text)?;
    let side = sidecar_path(&out);
    write_file(&out, &text)?;
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialises") + "\n";
    write_file(&side, &json)?;
    println!(
        "wrote {} ({} vertices, {} edges) and {}",
        out.display(),
        g.vertex_count(),
        g.edge_count(),
        side.display()
    );
    Ok(())
}
