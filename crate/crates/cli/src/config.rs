//! The JSON run configuration: a named fixture or an inline manifold.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use holonomy::connections::{Christoffels, Connection};
use holonomy::constructions::connection_from_covering_parallelism;
use holonomy::geometry::expr::VARIABLE_NAMES;
use holonomy::geometry::{ChartBox, Expr, Frame};
use holonomy::norms::{MinkowskiNorm, NormField, RandersData};
use holonomy::parallelism::{frame_parallelism, CoveringParallelism, Parallelism};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fixture: Option<String>,
    pub manifold: Option<ManifoldSpec>,
    pub check: Option<CheckKind>,
    /// Bounded region for sampled checks.
    pub region: Option<BoxSpec>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub tolerance: Option<f64>,
    pub curves: Option<usize>,
    pub vectors: Option<usize>,
    /// Point pairs for compatibility checks; points for the Lie-algebra
    /// criterion and torsion sampling.
    pub samples: Option<usize>,
    /// Grid points per axis for `synthesize`.
    pub grid: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    HolonomyInvariance,
    ParallelismCompat,
    CompalgCriterion,
    BerwaldObstruction,
    Uniqueness,
    GeneralizedBerwald,
    IsometryGroup,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub dim: usize,
    /// Component expressions of each frame field; coordinate frame if absent.
    pub frame: Option<Vec<Vec<String>>>,
    pub norm: NormSpec,
    /// Positive scalar factor of the norm field.
    pub scale: Option<String>,
    pub connection: Option<ConnectionSpec>,
    /// Second connection for the uniqueness check.
    pub other_connection: Option<ConnectionSpec>,
    pub cover: Option<Vec<CoverMember>>,
}

/// The model norm; read in the components of the manifold frame.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NormSpec {
    Euclidean,
    Randers { q: Vec<Vec<f64>>, beta: Vec<f64> },
    /// An expression in the components `a, b, c, d`.
    Expression(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConnectionSpec {
    Flat,
    /// All frame fields parallel.
    FrameParallel,
    /// Christoffel symbols relative to the coordinate frame.
    Coordinate(Vec<SymbolSpec>),
    /// Christoffel symbols relative to the manifold frame.
    Frame(Vec<SymbolSpec>),
    /// Synthesized from the cover.
    FromCover,
}

/// `Γⁱ_{jk}` as an expression in the coordinates; unlisted symbols are zero.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub index: [usize; 3],
    pub value: String,
}

/// An open box; `null` bounds are infinite.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverMember {
    #[serde(rename = "box")]
    pub bounds: BoxSpec,
    /// Frame of the member's parallelism; coordinate frame if absent.
    pub frame: Option<Vec<Vec<String>>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

impl BoxSpec {
    pub fn build(&self) -> anyhow::Result<ChartBox> {
        let lower: Vec<f64> = self.lower.iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect();
        let upper: Vec<f64> = self.upper.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
        Ok(ChartBox::new(lower, upper)?)
    }
}

fn frame_from(dim: usize, spec: Option<&Vec<Vec<String>>>) -> anyhow::Result<Frame> {
    match spec {
        None => Ok(Frame::coordinate(dim)?),
        Some(fields) => {
            if fields.len() != dim {
                bail!("frame has {} fields, expected {dim}", fields.len());
            }
            let refs: Vec<Vec<&str>> = fields.iter().map(|f| f.iter().map(String::as_str).collect()).collect();
            Ok(Frame::parse(&refs)?)
        }
    }
}

fn symbols_from(dim: usize, specs: &[SymbolSpec]) -> anyhow::Result<Vec<([usize; 3], Arc<Expr>)>> {
    specs
        .iter()
        .map(|s| {
            if s.index.iter().any(|&i| i >= dim) {
                bail!("Christoffel index {:?} out of range for dimension {dim}", s.index);
            }
            Ok((s.index, Expr::parse(&s.value, &VARIABLE_NAMES[..dim])?))
        })
        .collect()
}

fn symbol_fn(dim: usize, entries: Vec<([usize; 3], Arc<Expr>)>) -> impl Fn(&[f64]) -> Christoffels + Send + Sync {
    move |p| {
        let mut g = Christoffels::zeros(dim);
        for ([i, j, k], e) in &entries {
            g.set(*i, *j, *k, e.eval(p));
        }
        g
    }
}

/// The objects an inline manifold specifies.
pub struct Manifold {
    pub frame: Frame,
    pub norm_field: NormField,
    pub parallelism: Parallelism,
    pub connection: Option<Connection>,
    pub other_connection: Option<Connection>,
    pub cover: Option<CoveringParallelism>,
}

impl ManifoldSpec {
    fn norm(&self) -> anyhow::Result<MinkowskiNorm> {
        let n = self.dim;
        Ok(match &self.norm {
            NormSpec::Euclidean => MinkowskiNorm::euclidean(n),
            NormSpec::Randers { q, beta } => {
                if q.len() != n || q.iter().any(|r| r.len() != n) || beta.len() != n {
                    bail!("Randers data must be {n}×{n} and {n}");
                }
                let qm = DMatrix::from_fn(n, n, |i, j| q[i][j]);
                MinkowskiNorm::Randers(RandersData::new(qm, DVector::from_column_slice(beta))?)
            }
            NormSpec::Expression(src) => MinkowskiNorm::parse(n, src)?,
        })
    }

    fn connection(&self, spec: &ConnectionSpec, frame: &Frame, cover: Option<&CoveringParallelism>) -> anyhow::Result<Connection> {
        let n = self.dim;
        Ok(match spec {
            ConnectionSpec::Flat => Connection::flat(n)?,
            ConnectionSpec::FrameParallel => Connection::frame_parallel(frame.clone()),
            ConnectionSpec::Coordinate(s) => Connection::in_coordinates(n, symbol_fn(n, symbols_from(n, s)?))?,
            ConnectionSpec::Frame(s) => Connection::in_frame(frame.clone(), symbol_fn(n, symbols_from(n, s)?)),
            ConnectionSpec::FromCover => {
                connection_from_covering_parallelism(cover.ok_or_else(|| anyhow!("'from_cover' needs a cover"))?)?
            }
        })
    }

    pub fn build(&self, region: Option<&ChartBox>) -> anyhow::Result<Manifold> {
        let frame = frame_from(self.dim, self.frame.as_ref())?;
        let mut norm_field = NormField::in_frame(self.norm()?, frame.clone())?;
        if let Some(s) = &self.scale {
            norm_field = norm_field.with_scale(Expr::parse(s, &VARIABLE_NAMES[..self.dim])?);
        }
        let parallelism = frame_parallelism(&frame)?;
        let cover = match &self.cover {
            None => None,
            Some(members) => {
                let members = members
                    .iter()
                    .map(|m| {
                        let f = frame_from(self.dim, m.frame.as_ref())?;
                        Ok((m.bounds.build()?, frame_parallelism(&f)?))
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                Some(CoveringParallelism::new(members, region)?)
            }
        };
        let connection = self
            .connection
            .as_ref()
            .map(|c| self.connection(c, &frame, cover.as_ref()))
            .transpose()?;
        let other_connection = self
            .other_connection
            .as_ref()
            .map(|c| self.connection(c, &frame, cover.as_ref()))
            .transpose()?;
        Ok(Manifold {
            frame,
            norm_field,
            parallelism,
            connection,
            other_connection,
            cover,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"fixture": "section5", "colour": 1}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        let err = serde_json::from_str::<RunConfig>(r#"{"manifold": {"dim": 2, "norm": "euclidean", "extra": 0}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn inline_manifold_builds() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "manifold": {
                    "dim": 2,
                    "frame": [["x", "1"], ["-1", "0"]],
                    "norm": {"randers": {"q": [[4, 0], [0, 12]], "beta": [-1, 0]}},
                    "connection": {"coordinate": [{"index": [0, 0, 1], "value": "-1"}]},
                    "other_connection": "frame_parallel",
                    "cover": [{"box": {"lower": [null, null], "upper": [null, null]}, "frame": [["x", "1"], ["-1", "0"]]}]
                },
                "region": {"lower": [-2, -2], "upper": [2, 2]}
            }"#,
        )
        .unwrap();
        let region = cfg.region.as_ref().unwrap().build().unwrap();
        let m = cfg.manifold.unwrap().build(Some(&region)).unwrap();
        let p = holonomy::geometry::ChartPoint::from([0.3, 0.2]);
        let a = m.connection.unwrap().coordinate_christoffels(&p).unwrap();
        let b = m.other_connection.unwrap().coordinate_christoffels(&p).unwrap();
        assert!(a.max_diff(&b) < 1e-14);
        assert!(m.cover.is_some());
    }
}
