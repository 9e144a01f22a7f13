//! Parallelisms stored through their trivialisations, covering parallelisms
//! with smooth partitions of unity, and the model norm a compatible norm
//! field pushes down to.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{invert, sphere_grid, ChartBox, ChartPoint, Domain, Frame, TangentVector};
use crate::norms::{MinkowskiNorm, NormField};

/// Absolute tolerance for basepoint independence of the pushed-down norm.
pub const PUSHDOWN_TOL: f64 = 1e-9;

/// A parallelism `P(p, q): T_pM → T_qM` on a chart domain.
///
/// It is stored through the trivialisation `φ_q = [E(q)]` given by its
/// parallel frame, so that `P(p, q) = [φ_q]·[φ_p]⁻¹`; identity and cocycle
/// laws hold by construction.
#[derive(Debug, Clone)]
pub struct Parallelism {
    frame: Frame,
}

impl Parallelism {
    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn domain(&self) -> &Domain {
        self.frame.domain()
    }

    /// The `P`-parallel frame `E_i(q) = φ_q(e_i)`.
    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// The trivialisation matrix `[φ_q]`.
    pub fn trivialization(&self, q: &ChartPoint) -> Result<DMatrix<f64>> {
        self.frame.matrix(q)
    }

    /// The matrix of `P(p, q)` in coordinate components.
    pub fn transfer(&self, p: &ChartPoint, q: &ChartPoint) -> Result<DMatrix<f64>> {
        let mp = self.frame.matrix(p)?;
        let mq = self.frame.matrix(q)?;
        Ok(mq * invert(&mp, "trivialization", p.coords())?)
    }

    /// `P(τ(v), q)(v)`.
    pub fn apply(&self, v: &TangentVector, q: &ChartPoint) -> Result<TangentVector> {
        TangentVector::new(q.clone(), self.transfer(&v.base, q)? * &v.components)
    }
}

/// Probe points used to validate objects on a domain: box centres (or the
/// origin clamped into unbounded boxes) and their axis neighbours.
pub(crate) fn probe_points(domain: &Domain) -> Vec<ChartPoint> {
    let mut out = Vec::new();
    for b in domain.boxes() {
        let centre: Vec<f64> = b
            .lower()
            .iter()
            .zip(b.upper())
            .map(|(l, u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l + 1.0,
                (false, true) => u - 1.0,
                (false, false) => 0.0,
            })
            .collect();
        out.push(ChartPoint::new(centre.clone()));
        for i in 0..centre.len() {
            for s in [-0.5, 0.5] {
                let mut q = centre.clone();
                q[i] += s;
                if b.contains(&q) {
                    out.push(ChartPoint::new(q));
                }
            }
        }
    }
    out
}

/// The parallelism whose parallel fields are exactly the fields of `frame`:
/// `P(p, q)(v) = Eⁱ(v) E_i(q)`.
pub fn frame_parallelism(frame: &Frame) -> Result<Parallelism> {
    frame.check_invertible(&probe_points(frame.domain()))?;
    Ok(Parallelism {
        frame: frame.clone(),
    })
}

/// The trivialisation `[φ_q] = [P(p, q)]·η` induced by `P` from the choice
/// `φ_p = η`, returned as its matrix field.
pub fn induced_trivialization(parallelism: &Parallelism, p: &ChartPoint, eta: &DMatrix<f64>) -> Result<Frame> {
    let det = eta.determinant();
    if det.abs() <= crate::geometry::SINGULAR_DET {
        return Err(Error::Singular {
            what: "initial trivialization",
            point: p.coords().to_vec(),
            det,
        });
    }
    let mp = parallelism.trivialization(p)?;
    let c = invert(&mp, "trivialization", p.coords())? * eta;
    parallelism.frame.times_constant(&c)
}

/// The model norm `f = F_p ∘ φ_p` of a compatible pair, with its witness
/// basepoint.
#[derive(Debug, Clone)]
pub struct PushedNorm {
    pub norm: MinkowskiNorm,
    pub witness: ChartPoint,
}

/// `F_p ∘ φ_p` as a norm on ℝⁿ.
pub fn pulled_model(field: &NormField, parallelism: &Parallelism, p: &ChartPoint) -> Result<MinkowskiNorm> {
    Ok(field.at(p)?.compose_linear(&parallelism.trivialization(p)?))
}

/// Largest `|F_p(φ_p v) − F_q(φ_q v)|` over unit `v` for the given point pair.
pub fn pushdown_deviation(
    field: &NormField,
    parallelism: &Parallelism,
    p: &ChartPoint,
    q: &ChartPoint,
    vectors: usize,
) -> Result<f64> {
    let fp = pulled_model(field, parallelism, p)?;
    let fq = pulled_model(field, parallelism, q)?;
    Ok(sphere_grid(field.dim(), vectors)
        .iter()
        .map(|v| (fp.eval(v) - fq.eval(v)).abs())
        .fold(0.0, f64::max))
}

/// Pushes a compatible norm field down to ℝⁿ through the trivialisation at
/// `p`, checking basepoint independence against the axis neighbours of `p`
/// inside the domain (200 unit vectors, tolerance [`PUSHDOWN_TOL`]).
pub fn pushdown_norm(field: &NormField, parallelism: &Parallelism, p: &ChartPoint) -> Result<PushedNorm> {
    let norm = pulled_model(field, parallelism, p)?;
    for i in 0..p.dim() {
        for s in [1.0, -1.0] {
            let mut q = p.coords().to_vec();
            q[i] += s;
            let q = ChartPoint::new(q);
            if !parallelism.domain().contains(q.coords()) || !field.domain().contains(q.coords()) {
                continue;
            }
            let deviation = pushdown_deviation(field, parallelism, p, &q, 200)?;
            if deviation > PUSHDOWN_TOL {
                return Err(Error::Incompatible {
                    p: p.coords().to_vec(),
                    q: q.coords().to_vec(),
                    deviation,
                });
            }
        }
    }
    Ok(PushedNorm {
        norm,
        witness: p.clone(),
    })
}

/// Smooth partition of unity subordinate to a family of open boxes.
///
/// Each box carries the bump `Π_axis h(x_axis)` glued from `t ↦ exp(−1/t)`:
/// `exp(1 − 1/(1 − u²))` in the normalised coordinate `u ∈ (−1, 1)` of a
/// bounded side, `exp(−1/(b − x))` or `exp(−1/(x − a))` for half-lines, `1`
/// for ℝ. Weights are normalised in log space so nothing underflows before
/// the division.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    boxes: Vec<ChartBox>,
}

fn log_bump(b: &ChartBox, p: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((x, l), u) in p.iter().zip(b.lower()).zip(b.upper()) {
        if !(l < x && x < u) {
            return f64::NEG_INFINITY;
        }
        total += match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                let s = (2.0 * x - l - u) / (u - l);
                1.0 - 1.0 / (1.0 - s * s)
            }
            (false, true) => -1.0 / (u - x),
            (true, false) => -1.0 / (x - l),
            (false, false) => 0.0,
        };
    }
    total
}

impl Partition {
    pub fn boxes(&self) -> &[ChartBox] {
        &self.boxes
    }

    /// The weights `f_α(p)`; a gap error when no box contains `p`.
    pub fn weights(&self, p: &[f64]) -> Result<Vec<f64>> {
        let logs: Vec<f64> = self.boxes.iter().map(|b| log_bump(b, p)).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::CoverageGap { point: p.to_vec() });
        }
        let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|r| r / sum).collect())
    }
}

/// Regular grid of `per_axis` points per axis strictly inside a bounded box.
pub fn grid_points(region: &ChartBox, per_axis: usize) -> Vec<ChartPoint> {
    let n = region.dim();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let coords: Vec<f64> = (0..n)
                .map(|axis| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    let (l, u) = (region.lower()[axis], region.upper()[axis]);
                    l + (u - l) * (k as f64 + 0.5) / per_axis as f64
                })
                .collect();
            ChartPoint::new(coords)
        })
        .collect()
}

/// A partition of unity subordinate to `domains`; when a bounded working
/// `region` is given, a 33-per-axis grid of it must be covered.
pub fn bump_partition(domains: &[ChartBox], region: Option<&ChartBox>) -> Result<Partition> {
    let dim = domains
        .first()
        .ok_or_else(|| Error::InvalidArgument("partition over no boxes".into()))?
        .dim();
    if let Some(b) = domains.iter().find(|b| b.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: b.dim(),
        });
    }
    let partition = Partition {
        boxes: domains.to_vec(),
    };
    if let Some(region) = region {
        for p in grid_points(region, 33) {
            partition.weights(p.coords())?;
        }
    }
    Ok(partition)
}

/// A family of parallelisms on an open cover, with a partition of unity
/// subordinate to it.
#[derive(Debug, Clone)]
pub struct CoveringParallelism {
    members: Vec<(ChartBox, Parallelism)>,
    partition: Partition,
}

impl CoveringParallelism {
    /// Each member parallelism is restricted to its box; `region` (bounded)
    /// is the working region that must be covered.
    pub fn new(members: Vec<(ChartBox, Parallelism)>, region: Option<&ChartBox>) -> Result<Self> {
        let members: Vec<(ChartBox, Parallelism)> = members
            .into_iter()
            .map(|(b, p)| {
                let domain = p
                    .domain()
                    .intersect(&Domain::from(b.clone()))
                    .ok_or_else(|| Error::InvalidArgument("member box outside its parallelism".into()))?;
                let frame = p.frame().clone().with_domain(domain)?;
                Ok((b, Parallelism { frame }))
            })
            .collect::<Result<_>>()?;
        let boxes: Vec<ChartBox> = members.iter().map(|(b, _)| b.clone()).collect();
        let partition = bump_partition(&boxes, region)?;
        Ok(Self { members, partition })
    }

    pub fn members(&self) -> &[(ChartBox, Parallelism)] {
        &self.members
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.members[0].1.dim()
    }

    pub fn domain(&self) -> Domain {
        Domain::union(self.members.iter().map(|(b, _)| b.clone()).collect()).expect("non-empty cover")
    }
}
