//! Command-line front end: fixture verification, checks on inline
//! manifolds, connection synthesis and planar isometry groups.

pub mod config;
pub mod json;

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use holonomy::fixtures::{self, VerifyOptions};
use holonomy::geometry::{ChartBox, Domain};
use holonomy::norms::{isometry_group_2x2, IsometryGroup, MinkowskiNorm};
use holonomy::parallelism::grid_points;
use holonomy::verification::{
    berwald_obstruction, check_compalg_criterion, check_holonomy_invariance, check_parallelism_compat,
    check_uniqueness, generalized_berwald_verdict, sample_pairs, sample_points, BerwaldEvidence, CheckOptions,
    CurveFamily, CurveGenerator,
};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use config::{CheckKind, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "holonomy", version, about = "Holonomy invariance checks for Finsler manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-derive every expected value of a built-in fixture.
    Verify {
        /// One of: euclidean_flat, rotated_blend, scaled_euclidean_incompatible, section5.
        fixture: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run one check on a fixture or inline manifold from a config file.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Build the connection of a covering parallelism and sample its
    /// Christoffel symbols on a grid.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Isometry group of a planar norm given as an expression in `a, b`.
    IsometryGroup {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        norm: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Sampling flags; a flag overrides the config file, which overrides the
/// defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// RK4 step [default: 1e-3]
    #[arg(long)]
    pub step: Option<f64>,
    /// Check tolerance [default: 1e-6]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Random curves per check [default: 100]
    #[arg(long)]
    pub curves: Option<usize>,
    /// Test vectors per sample [default: 20]
    #[arg(long)]
    pub vectors: Option<usize>,
    /// RNG seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit statuses.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// Errors split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: unknown fixture, unreadable or invalid config.
    Config(anyhow::Error),
    /// A computation failed.
    Run(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_FAIL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Run(e) => write!(f, "{e:#}"),
        }
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

fn run_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Run(e.into())
}

/// Resolved sampling settings.
#[derive(Debug, Clone)]
struct Settings {
    opts: CheckOptions,
    curves: usize,
    samples: usize,
    grid: usize,
    out: Option<PathBuf>,
}

fn settings(flags: &RunFlags, cfg: Option<&RunConfig>) -> Result<Settings, CliError> {
    let d = CheckOptions::default();
    let pick = |flag: Option<f64>, conf: Option<f64>, default: f64| flag.or(conf).unwrap_or(default);
    let s = Settings {
        opts: CheckOptions {
            tol: pick(flags.tol, cfg.and_then(|c| c.tolerance), d.tol),
            step: pick(flags.step, cfg.and_then(|c| c.step), d.step),
            vectors: flags.vectors.or(cfg.and_then(|c| c.vectors)).unwrap_or(d.vectors),
            t_samples: d.t_samples,
            seed: flags.seed.or(cfg.and_then(|c| c.seed)).unwrap_or(d.seed),
        },
        curves: flags.curves.or(cfg.and_then(|c| c.curves)).unwrap_or(100),
        samples: cfg.and_then(|c| c.samples).unwrap_or(100),
        grid: cfg.and_then(|c| c.grid).unwrap_or(11),
        out: flags.out.clone().or(cfg.and_then(|c| c.output.clone())),
    };
    if !(s.opts.step > 0.0 && s.opts.step <= 1.0) {
        return Err(config_err(anyhow!("step must lie in (0, 1], got {}", s.opts.step)));
    }
    if !(s.opts.tol >= 0.0) {
        return Err(config_err(anyhow!("tolerance must be non-negative")));
    }
    Ok(s)
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let text = json::to_string(value).map_err(run_err)?;
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(run_err),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn status(pass: bool) -> u8 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn matrices_json(ms: &[DMatrix<f64>]) -> Value {
    json!(ms
        .iter()
        .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn group_json(group: &IsometryGroup) -> Value {
    match group {
        IsometryGroup::Finite(ms) => json!({"check": "isometry_group", "continuous": false, "count": ms.len(), "matrices": matrices_json(ms)}),
        IsometryGroup::ContinuousFamily => json!({"check": "isometry_group", "continuous": true, "count": null, "matrices": []}),
    }
}

/// Runs a parsed command line; the `Ok` value is the exit status.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Verify { fixture, flags } => cmd_verify(&fixture, &flags),
        Command::Check { config, flags } => {
            let cfg = RunConfig::load(&config).map_err(config_err)?;
            cmd_check(&cfg, &flags)
        }
        Command::Synthesize { config, flags } => {
            let cfg = RunConfig::load(&config).map_err(config_err)?;
            cmd_synthesize(&cfg, &flags)
        }
        Command::IsometryGroup { norm, config, out } => {
            let f = match (norm, config) {
                (Some(src), _) => MinkowskiNorm::parse(2, &src).map_err(config_err)?,
                (None, Some(path)) => {
                    let cfg = RunConfig::load(&path).map_err(config_err)?;
                    let m = cfg.manifold.ok_or_else(|| config_err(anyhow!("config needs a 'manifold' with a norm")))?;
                    if m.dim != 2 {
                        return Err(config_err(anyhow!("isometry groups are computed for planar norms only")));
                    }
                    let built = m.build(None).map_err(config_err)?;
                    built.norm_field.base().clone()
                }
                (None, None) => return Err(config_err(anyhow!("give --norm or --config"))),
            };
            let group = isometry_group_2x2(&f).map_err(run_err)?;
            emit(&group_json(&group), out.as_ref())?;
            Ok(EXIT_PASS)
        }
    }
}

/// `verify <fixture>`: exit 0 iff every expectation of the fixture is met.
pub fn cmd_verify(name: &str, flags: &RunFlags) -> Result<u8, CliError> {
    let s = settings(flags, None)?;
    let fixture = fixtures::by_name(name).map_err(config_err)?;
    let report = fixture
        .verify(&VerifyOptions { check: s.opts, curves: s.curves })
        .map_err(run_err)?;
    emit(&report, s.out.as_ref())?;
    Ok(status(report.pass))
}

/// Inputs of a check: from a named fixture or an inline manifold.
struct Inputs {
    norm_field: holonomy::norms::NormField,
    parallelism: holonomy::parallelism::Parallelism,
    connection: Option<holonomy::connections::Connection>,
    other_connection: Option<holonomy::connections::Connection>,
    cover: Option<holonomy::parallelism::CoveringParallelism>,
    region: ChartBox,
}

fn inputs(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let region = cfg.region.as_ref().map(|r| r.build()).transpose().map_err(config_err)?;
    match (&cfg.fixture, &cfg.manifold) {
        (Some(name), None) => {
            let f = fixtures::by_name(name).map_err(config_err)?;
            Ok(Inputs {
                norm_field: f.norm_field,
                parallelism: f.parallelism,
                connection: Some(f.connection),
                other_connection: None,
                cover: f.cover,
                region: region.unwrap_or(f.region),
            })
        }
        (None, Some(m)) => {
            let region = region.unwrap_or_else(|| ChartBox::cube(m.dim, 3.0));
            if !region.is_bounded() {
                return Err(config_err(anyhow!("region must be bounded")));
            }
            let built = m.build(Some(&region)).map_err(config_err)?;
            Ok(Inputs {
                norm_field: built.norm_field,
                parallelism: built.parallelism,
                connection: built.connection,
                other_connection: built.other_connection,
                cover: built.cover,
                region,
            })
        }
        _ => Err(config_err(anyhow!("config needs exactly one of 'fixture' and 'manifold'"))),
    }
}

/// `check --config`: runs the configured check; exit 0 iff it passes.
pub fn cmd_check(cfg: &RunConfig, flags: &RunFlags) -> Result<u8, CliError> {
    let s = settings(flags, Some(cfg))?;
    let kind = cfg.check.ok_or_else(|| config_err(anyhow!("config needs a 'check'")))?;
    let inp = inputs(cfg)?;
    let need_conn = || inp.connection.clone().ok_or_else(|| config_err(anyhow!("this check needs a 'connection'")));
    let gen = CurveGenerator::new(s.opts.seed, CurveFamily::Mixed, s.curves, inp.region.clone()).map_err(config_err)?;
    match kind {
        CheckKind::HolonomyInvariance => {
            let r = check_holonomy_invariance(&inp.norm_field, &need_conn()?, &gen, &s.opts).map_err(run_err)?;
            emit(&r, s.out.as_ref())?;
            Ok(status(r.pass))
        }
        CheckKind::ParallelismCompat => {
            let pairs = sample_pairs(&inp.region, s.samples, s.opts.seed);
            let r = check_parallelism_compat(&inp.norm_field, &inp.parallelism, &pairs, &s.opts).map_err(run_err)?;
            emit(&r, s.out.as_ref())?;
            Ok(status(r.pass))
        }
        CheckKind::CompalgCriterion => {
            let points = (s.samples / s.opts.vectors.max(1)).max(1);
            let r = check_compalg_criterion(&inp.norm_field, &inp.parallelism, &need_conn()?, &inp.region, points, &s.opts)
                .map_err(run_err)?;
            emit(&r, s.out.as_ref())?;
            Ok(status(r.pass))
        }
        CheckKind::BerwaldObstruction => {
            let points = sample_points(&inp.region, s.samples, s.opts.seed);
            let b = berwald_obstruction(&need_conn()?, &points).map_err(run_err)?;
            let v = json!({"check": "berwald_obstruction", "samples": points.len(), "torsion_max": b.max,
                "witness": {"point": b.point.coords(), "pair": [b.pair.0, b.pair.1]}, "seed": s.opts.seed});
            emit(&v, s.out.as_ref())?;
            Ok(EXIT_PASS)
        }
        CheckKind::Uniqueness => {
            let other = inp
                .other_connection
                .clone()
                .ok_or_else(|| config_err(anyhow!("uniqueness needs 'other_connection'")))?;
            match check_uniqueness(&inp.norm_field, &need_conn()?, &other, &gen, &s.opts) {
                Ok(r) => {
                    emit(&r, s.out.as_ref())?;
                    Ok(status(r.pass))
                }
                Err(holonomy::Error::Precondition(msg)) => {
                    emit(&json!({"check": "uniqueness", "applicable": false, "reason": msg}), s.out.as_ref())?;
                    Ok(EXIT_FAIL)
                }
                Err(e) => Err(run_err(e)),
            }
        }
        CheckKind::GeneralizedBerwald => {
            let evidence = match (&inp.cover, &inp.connection) {
                (Some(cover), _) => BerwaldEvidence::Cover(cover.clone()),
                (None, Some(conn)) => BerwaldEvidence::Connection {
                    conn: conn.clone(),
                    region: inp.region.clone(),
                    parts: 1,
                },
                (None, None) => return Err(config_err(anyhow!("needs a 'cover' or a 'connection'"))),
            };
            let v = generalized_berwald_verdict(&inp.norm_field, &evidence, &gen, s.samples, &s.opts).map_err(run_err)?;
            let pass = v.verdict == holonomy::verification::Verdict::Certified;
            emit(&v, s.out.as_ref())?;
            Ok(status(pass))
        }
        CheckKind::IsometryGroup => {
            if inp.norm_field.dim() != 2 {
                return Err(config_err(anyhow!("isometry groups are computed for planar norms only")));
            }
            let group = isometry_group_2x2(inp.norm_field.base()).map_err(run_err)?;
            emit(&group_json(&group), s.out.as_ref())?;
            Ok(EXIT_PASS)
        }
    }
}

/// `synthesize --config`: the blended connection of the configured cover,
/// sampled on a grid of the region.
pub fn cmd_synthesize(cfg: &RunConfig, flags: &RunFlags) -> Result<u8, CliError> {
    let s = settings(flags, Some(cfg))?;
    let inp = inputs(cfg)?;
    let cover = inp.cover.ok_or_else(|| config_err(anyhow!("synthesize needs a 'cover'")))?;
    let conn = holonomy::constructions::connection_from_covering_parallelism(&cover).map_err(run_err)?;
    let n = conn.dim();
    let domain = Domain::from(inp.region.clone());
    let samples = grid_points(&inp.region, s.grid)
        .into_iter()
        .filter(|p| domain.contains(p.coords()))
        .map(|p| {
            let g = conn.coordinate_christoffels(&p)?;
            let w = cover.partition().weights(p.coords())?;
            Ok(json!({"point": p.coords(), "weights": w, "christoffels": g.as_slice()}))
        })
        .collect::<holonomy::Result<Vec<_>>>()
        .map_err(run_err)?;
    let members: Vec<Value> = cover
        .members()
        .iter()
        .map(|(b, _)| json!({"lower": b.lower(), "upper": b.upper()}))
        .collect();
    let v = json!({
        "connection": "partition_blend",
        "dim": n,
        "index_order": "christoffels[(i * n + j) * n + k] = Γ^i_{jk} in coordinates",
        "members": members,
        "region": {"lower": inp.region.lower(), "upper": inp.region.upper()},
        "grid": s.grid,
        "samples": samples,
    });
    emit(&v, s.out.as_ref())?;
    Ok(EXIT_PASS)
}
