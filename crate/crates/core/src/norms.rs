//! Definite continuous functions on ℝⁿ and on tangent spaces: Randers norms,
//! expression norms, isometry tests, Lie-algebra membership, and a brute-force
//! search for the linear isometry group of a planar norm.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{expr, sphere_grid, ChartPoint, Domain, Expr, Frame, Jet};

/// Acceptance tolerance for `f∘A = f` on the unit sphere.
pub const ISOMETRY_TOL: f64 = 1e-9;
/// Tolerance for isometries obtained by products, inverses or searches.
pub const CLOSURE_TOL: f64 = 1e-7;
/// Tolerance of the gradient test `⟨∇f(v), Av⟩ = 0`.
pub const LIE_GRADIENT_TOL: f64 = 1e-8;
/// Tolerance of the secant test for norms without a usable gradient.
pub const LIE_SECANT_TOL: f64 = 1e-6;

/// `f(v) = √(vᵀQv) + β(v)` with `Q` symmetric positive definite and
/// `βᵀQ⁻¹β < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandersData {
    q: DMatrix<f64>,
    beta: DVector<f64>,
}

impl RandersData {
    pub fn new(q: DMatrix<f64>, beta: DVector<f64>) -> Result<Self> {
        let n = q.nrows();
        crate::geometry::check_dim(n)?;
        if q.ncols() != n || beta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if q.ncols() != n { q.ncols() } else { beta.len() },
            });
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidNorm("Q is not symmetric".into()));
        }
        let eig = q.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidNorm(format!(
                "Q is not positive definite (eigenvalues {:?})",
                eig.eigenvalues.as_slice()
            )));
        }
        let q_inv = q.clone().try_inverse().expect("positive definite");
        let b = (beta.transpose() * &q_inv * &beta)[(0, 0)];
        if b >= 1.0 {
            return Err(Error::InvalidNorm(format!(
                "indefinite Randers data: βᵀQ⁻¹β = {b} ≥ 1"
            )));
        }
        Ok(Self { q, beta })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self {
            q: DMatrix::identity(dim, dim),
            beta: DVector::zeros(dim),
        }
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    fn quad(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.q * v)[(0, 0)]
    }

    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        self.quad(v).sqrt() + self.beta.dot(v)
    }

    /// `Qv/√(vᵀQv) + β`, undefined at the origin.
    pub fn gradient(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        let s = self.quad(v).sqrt();
        (s > 0.0).then(|| &self.q * v / s + &self.beta)
    }
}

/// A definite continuous function on ℝⁿ.
#[derive(Clone)]
pub enum MinkowskiNorm {
    Randers(RandersData),
    /// A closed-form expression in the components `a, b, c, d`.
    Expression { dim: usize, expr: Arc<Expr> },
    /// An opaque function; only secant tests apply.
    Custom {
        dim: usize,
        eval: Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    },
    /// `v ↦ scale · base(matrix · v)`.
    Transformed {
        base: Arc<MinkowskiNorm>,
        matrix: DMatrix<f64>,
        scale: f64,
    },
}

impl fmt::Debug for MinkowskiNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinkowskiNorm::Randers(r) => f.debug_tuple("Randers").field(r).finish(),
            MinkowskiNorm::Expression { expr, .. } => write!(f, "Expression({expr})"),
            MinkowskiNorm::Custom { dim, .. } => write!(f, "Custom(dim = {dim})"),
            MinkowskiNorm::Transformed {
                base,
                matrix,
                scale,
            } => f
                .debug_struct("Transformed")
                .field("base", base)
                .field("matrix", matrix)
                .field("scale", scale)
                .finish(),
        }
    }
}

/// The Randers norm of the given data.
pub fn randers_norm(data: RandersData) -> MinkowskiNorm {
    MinkowskiNorm::Randers(data)
}

impl MinkowskiNorm {
    pub fn euclidean(dim: usize) -> Self {
        MinkowskiNorm::Randers(RandersData::euclidean(dim))
    }

    /// Parses a custom norm written in the components `a, b, c, d`.
    pub fn parse(dim: usize, src: &str) -> Result<Self> {
        crate::geometry::check_dim(dim)?;
        let e = Expr::parse(src, &expr::COMPONENT_NAMES[..dim])?;
        Ok(MinkowskiNorm::Expression { dim, expr: e })
    }

    pub fn custom(dim: usize, eval: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        MinkowskiNorm::Custom {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MinkowskiNorm::Randers(r) => r.q.nrows(),
            MinkowskiNorm::Expression { dim, .. } | MinkowskiNorm::Custom { dim, .. } => *dim,
            MinkowskiNorm::Transformed { matrix, .. } => matrix.ncols(),
        }
    }

    /// `"randers"` or `"custom"`.
    pub fn tag(&self) -> &'static str {
        match self {
            MinkowskiNorm::Randers(_) => "randers",
            MinkowskiNorm::Transformed { base, .. } => base.tag(),
            _ => "custom",
        }
    }

    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        match self {
            MinkowskiNorm::Randers(r) => r.eval(v),
            MinkowskiNorm::Expression { expr, .. } => expr.eval(v.as_slice()),
            MinkowskiNorm::Custom { eval, .. } => eval(v),
            MinkowskiNorm::Transformed {
                base,
                matrix,
                scale,
            } => scale * base.eval(&(matrix * v)),
        }
    }

    /// Exact gradient where one exists; `None` for opaque norms, at the
    /// origin, or where the expression is not differentiable.
    pub fn gradient(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        let g = match self {
            MinkowskiNorm::Randers(r) => r.gradient(v)?,
            MinkowskiNorm::Expression { expr, .. } => {
                let jet = expr.eval_jet(&Jet::seed(v.as_slice()));
                DVector::from_column_slice(jet.partials())
            }
            MinkowskiNorm::Custom { .. } => return None,
            MinkowskiNorm::Transformed {
                base,
                matrix,
                scale,
            } => matrix.transpose() * base.gradient(&(matrix * v))? * *scale,
        };
        g.iter().all(|x| x.is_finite()).then_some(g)
    }

    /// `v ↦ self(A v)`, flattening nested transforms.
    pub fn compose_linear(&self, a: &DMatrix<f64>) -> MinkowskiNorm {
        match self {
            MinkowskiNorm::Transformed {
                base,
                matrix,
                scale,
            } => MinkowskiNorm::Transformed {
                base: base.clone(),
                matrix: matrix * a,
                scale: *scale,
            },
            other => MinkowskiNorm::Transformed {
                base: Arc::new(other.clone()),
                matrix: a.clone(),
                scale: 1.0,
            },
        }
    }

    /// `v ↦ s · self(v)`.
    pub fn scaled(&self, s: f64) -> MinkowskiNorm {
        match self {
            MinkowskiNorm::Transformed {
                base,
                matrix,
                scale,
            } => MinkowskiNorm::Transformed {
                base: base.clone(),
                matrix: matrix.clone(),
                scale: scale * s,
            },
            other => MinkowskiNorm::Transformed {
                base: Arc::new(other.clone()),
                matrix: DMatrix::identity(other.dim(), other.dim()),
                scale: s,
            },
        }
    }

    /// Samples definiteness: `f(0) = 0` and `f > 0` on spheres of radius
    /// 10⁻³, 1 and 10³.
    pub fn check_definite(&self) -> Result<()> {
        let n = self.dim();
        let at_zero = self.eval(&DVector::zeros(n));
        if at_zero != 0.0 {
            return Err(Error::InvalidNorm(format!("f(0) = {at_zero} ≠ 0")));
        }
        for radius in [1e-3, 1.0, 1e3] {
            for u in sphere_grid(n, 360) {
                let v = u * radius;
                let value = self.eval(&v);
                if !(value > 0.0) {
                    return Err(Error::InvalidNorm(format!(
                        "f vanishes or is negative at {:?}: {value}",
                        v.as_slice()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Default unit-sphere sample used by isometry and Lie-algebra tests.
pub fn default_samples(dim: usize) -> Vec<DVector<f64>> {
    sphere_grid(dim, if dim <= 2 { 720 } else { 2000 })
}

/// Whether `f∘A = f` on the samples, with the largest `|f(Av) − f(v)|`.
pub fn is_isometry(
    f: &MinkowskiNorm,
    a: &DMatrix<f64>,
    samples: &[DVector<f64>],
    tol: f64,
) -> (bool, f64) {
    let max = samples
        .iter()
        .map(|v| (f.eval(&(a * v)) - f.eval(v)).abs())
        .fold(0.0, f64::max);
    (max <= tol, max)
}

/// Outcome of the planar isometry-group search.
#[derive(Debug, Clone, PartialEq)]
pub enum IsometryGroup {
    Finite(Vec<DMatrix<f64>>),
    /// Norm-preserving columns fill an interval of directions.
    ContinuousFamily,
}

impl IsometryGroup {
    pub fn len(&self) -> Option<usize> {
        match self {
            IsometryGroup::Finite(m) => Some(m.len()),
            IsometryGroup::ContinuousFamily => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, IsometryGroup::Finite(_))
    }
}

const ANGLE_GRID: usize = 3600;
const ROOT_TOL: f64 = 1e-9;

/// Radius `r > 0` with `f(r u) = target`, by doubling then bisection.
fn radius_along(f: &MinkowskiNorm, u: &DVector<f64>, target: f64) -> Option<f64> {
    let g = |r: f64| f.eval(&(u * r)) - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn unit(angle: f64) -> DVector<f64> {
    DVector::from_column_slice(&[angle.cos(), angle.sin()])
}

enum ColumnSolutions {
    Isolated(Vec<DVector<f64>>),
    Continuum,
}

/// All images `c` of the basis vector `e` compatible with `f(c) = f(e)` and
/// `f(−c) = f(−e)`.
fn column_candidates(f: &MinkowskiNorm, e: &DVector<f64>) -> ColumnSolutions {
    let (plus, minus) = (f.eval(e), f.eval(&-e));
    let residual = |angle: f64| -> Option<(f64, f64)> {
        let u = unit(angle);
        let r = radius_along(f, &u, plus)?;
        Some((r, f.eval(&(-&u * r)) - minus))
    };
    let step = std::f64::consts::TAU / ANGLE_GRID as f64;
    let grid: Vec<f64> = (0..ANGLE_GRID)
        .map(|k| residual(k as f64 * step).map_or(f64::INFINITY, |(_, g)| g.abs()))
        .collect();

    let scale = minus.abs().max(1.0);
    let near = |k: usize| grid[k % ANGLE_GRID] <= ROOT_TOL * scale;
    if (0..ANGLE_GRID).any(|k| near(k) && near(k + 1) && near(k + 2)) {
        return ColumnSolutions::Continuum;
    }

    let mut found: Vec<f64> = Vec::new();
    for k in 0..ANGLE_GRID {
        let prev = grid[(k + ANGLE_GRID - 1) % ANGLE_GRID];
        let next = grid[(k + 1) % ANGLE_GRID];
        if !(grid[k] <= prev && grid[k] <= next) || !grid[k].is_finite() {
            continue;
        }
        // golden-section minimisation of |g| on the bracketing cell pair
        let (mut a, mut b) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
        let cost = |t: f64| residual(t).map_or(f64::INFINITY, |(_, g)| g.abs());
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (cost(c), cost(d));
        for _ in 0..120 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = cost(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = cost(d);
            }
        }
        let angle = 0.5 * (a + b);
        if cost(angle) <= ROOT_TOL * scale {
            let angle = angle.rem_euclid(std::f64::consts::TAU);
            let dup = found.iter().any(|&t| {
                let d = (t - angle).abs();
                d.min(std::f64::consts::TAU - d) < 1e-6
            });
            if !dup {
                found.push(angle);
            }
        }
    }
    ColumnSolutions::Isolated(
        found
            .into_iter()
            .filter_map(|angle| residual(angle).map(|(r, _)| unit(angle) * r))
            .collect(),
    )
}

/// Linear isometries of a planar norm.
///
/// Each column of a candidate isometry must preserve the norms of one basis
/// vector and its negative; both columns are found by a sweep over directions
/// (radius by bisection, angle by golden-section refinement of the residual),
/// and every column pair is then certified on 720 directions of the circle.
pub fn isometry_group_2x2(f: &MinkowskiNorm) -> Result<IsometryGroup> {
    if f.dim() != 2 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    let e1 = DVector::from_column_slice(&[1.0, 0.0]);
    let e2 = DVector::from_column_slice(&[0.0, 1.0]);
    let (c1, c2) = match (column_candidates(f, &e1), column_candidates(f, &e2)) {
        (ColumnSolutions::Isolated(a), ColumnSolutions::Isolated(b)) => (a, b),
        _ => return Ok(IsometryGroup::ContinuousFamily),
    };
    let samples = sphere_grid(2, 720);
    let mut group = Vec::new();
    for a in &c1 {
        for b in &c2 {
            let m = DMatrix::from_columns(&[a.clone(), b.clone()]);
            if is_isometry(f, &m, &samples, CLOSURE_TOL).0 {
                group.push(m);
            }
        }
    }
    Ok(IsometryGroup::Finite(group))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LieTestMethod {
    Gradient,
    Secant,
}

/// Result of a Lie-algebra membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieAlgebraCheck {
    pub member: bool,
    pub max_violation: f64,
    pub method: LieTestMethod,
    pub tolerance: f64,
}

/// Whether `A` lies in the Lie algebra of `iso(f)`.
///
/// Uses `⟨∇f(v), Av⟩ = 0` on the unit samples when `f` has a gradient there,
/// and otherwise falls back to [`lie_algebra_member_secant`] with the wider
/// tolerance [`LIE_SECANT_TOL`].
pub fn lie_algebra_member(
    f: &MinkowskiNorm,
    a: &DMatrix<f64>,
    samples: &[DVector<f64>],
) -> LieAlgebraCheck {
    let gradients: Option<Vec<DVector<f64>>> = samples.iter().map(|v| f.gradient(v)).collect();
    match gradients {
        Some(grads) => {
            let max_violation = samples
                .iter()
                .zip(&grads)
                .map(|(v, g)| g.dot(&(a * v)).abs())
                .fold(0.0, f64::max);
            LieAlgebraCheck {
                member: max_violation <= LIE_GRADIENT_TOL,
                max_violation,
                method: LieTestMethod::Gradient,
                tolerance: LIE_GRADIENT_TOL,
            }
        }
        None => lie_algebra_member_secant(f, a, samples, LIE_SECANT_TOL),
    }
}

/// Secant test: `|f(exp(tA) v) − f(v)| / |t|` for `t ∈ {±10⁻⁴, ±10⁻²}`.
pub fn lie_algebra_member_secant(
    f: &MinkowskiNorm,
    a: &DMatrix<f64>,
    samples: &[DVector<f64>],
    tol: f64,
) -> LieAlgebraCheck {
    let mut max_violation: f64 = 0.0;
    for t in [1e-4, -1e-4, 1e-2, -1e-2] {
        let flow = (a * t).exp();
        for v in samples {
            let d = (f.eval(&(&flow * v)) - f.eval(v)).abs() / f64::abs(t);
            max_violation = max_violation.max(d);
        }
    }
    LieAlgebraCheck {
        member: max_violation <= tol,
        max_violation,
        method: LieTestMethod::Secant,
        tolerance: tol,
    }
}

/// A norm on every tangent space: `F_p(v) = s(p) · f([E(p)]⁻¹ v)`, i.e. the
/// model norm `f` read in the components of a frame, optionally rescaled by a
/// positive scalar field.
#[derive(Debug, Clone)]
pub struct NormField {
    base: MinkowskiNorm,
    frame: Option<Frame>,
    scale: Option<Arc<Expr>>,
    domain: Domain,
}

impl NormField {
    /// The same norm on every tangent space (coordinate components).
    pub fn constant(base: MinkowskiNorm) -> Self {
        let n = base.dim();
        Self {
            base,
            frame: None,
            scale: None,
            domain: Domain::whole(n),
        }
    }

    /// `F := f ∘ (E¹, …, Eⁿ)` for the dual coframe of `frame`.
    pub fn in_frame(base: MinkowskiNorm, frame: Frame) -> Result<Self> {
        if base.dim() != frame.dim() {
            return Err(Error::DimensionMismatch {
                expected: frame.dim(),
                found: base.dim(),
            });
        }
        let domain = frame.domain().clone();
        Ok(Self {
            base,
            frame: Some(frame),
            scale: None,
            domain,
        })
    }

    /// Multiplies by a positive scalar field written in the coordinates.
    pub fn with_scale(mut self, scale: Arc<Expr>) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &MinkowskiNorm {
        &self.base
    }

    pub fn frame(&self) -> Option<&Frame> {
        self.frame.as_ref()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    fn scale_at(&self, p: &[f64]) -> f64 {
        self.scale.as_ref().map_or(1.0, |s| s.eval(p))
    }

    /// The restriction `F_p` as a norm on coordinate components.
    pub fn at(&self, p: &ChartPoint) -> Result<MinkowskiNorm> {
        self.domain.check(p.coords())?;
        let s = self.scale_at(p.coords());
        let norm = match &self.frame {
            Some(frame) => {
                let w = crate::geometry::invert(
                    &frame.matrix_unchecked(p.coords()),
                    "frame matrix",
                    p.coords(),
                )?;
                self.base.compose_linear(&w)
            }
            None => self.base.clone(),
        };
        Ok(if s == 1.0 { norm } else { norm.scaled(s) })
    }

    /// `F_p(v)` for coordinate components `v`.
    pub fn eval(&self, p: &ChartPoint, v: &DVector<f64>) -> Result<f64> {
        self.domain.check(p.coords())?;
        let s = self.scale_at(p.coords());
        let value = match &self.frame {
            Some(frame) => {
                let m = frame.matrix_unchecked(p.coords());
                let comps = m.lu().solve(v).ok_or_else(|| Error::Singular {
                    what: "frame matrix",
                    point: p.coords().to_vec(),
                    det: 0.0,
                })?;
                self.base.eval(&comps)
            }
            None => self.base.eval(v),
        };
        Ok(s * value)
    }

    /// Definiteness of `F_p` at each sample point.
    pub fn check_definite<'a>(&self, points: impl IntoIterator<Item = &'a ChartPoint>) -> Result<()> {
        for p in points {
            self.at(p)?.check_definite()?;
        }
        Ok(())
    }
}
