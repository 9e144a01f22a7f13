//! Charts, points, tangent vectors, vector fields, frames and coframes.
//!
//! Every manifold instance lives in one global chart; a chart domain is a
//! union of open axis-aligned boxes (a single box in the common case, several
//! overlapping boxes for covering constructions). Fields carry exact first
//! derivatives through [`Jet`]s.

mod curve;
pub mod expr;
mod jet;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
pub use curve::{Curve, CurveKind};
pub use expr::Expr;
pub use jet::{Jet, MAX_DIM};

/// Step used by central finite differences wherever exact jets are not
/// available.
pub const FD_STEP: f64 = 1e-5;

/// Threshold below which a frame matrix is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        Err(Error::UnsupportedDimension(dim))
    } else {
        Ok(())
    }
}

/// Coordinates of a point in the global chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Self {
            coords: coords.into(),
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }
}

impl<const N: usize> From<[f64; N]> for ChartPoint {
    fn from(coords: [f64; N]) -> Self {
        Self::new(coords.to_vec())
    }
}

impl From<&DVector<f64>> for ChartPoint {
    fn from(v: &DVector<f64>) -> Self {
        Self::new(v.as_slice().to_vec())
    }
}

/// An open axis-aligned box; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ChartBox {
    pub fn new(lower: impl Into<Vec<f64>>, upper: impl Into<Vec<f64>>) -> Result<Self> {
        let (lower, upper) = (lower.into(), upper.into());
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        check_dim(lower.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || l.is_nan()) {
            return Err(Error::InvalidArgument(format!(
                "empty box: lower {lower:?}, upper {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The whole coordinate space ℝⁿ.
    pub fn whole(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    /// The symmetric cube (−r, r)ⁿ.
    pub fn cube(dim: usize, r: f64) -> Self {
        Self {
            lower: vec![-r; dim],
            upper: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.lower
            .iter()
            .chain(&self.upper)
            .all(|b| b.is_finite())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| l < x && x < u)
    }

    pub fn intersect(&self, other: &ChartBox) -> Option<ChartBox> {
        if self.dim() != other.dim() {
            return None;
        }
        let lower: Vec<f64> = self
            .lower
            .iter()
            .zip(&other.lower)
            .map(|(a, b)| a.max(*b))
            .collect();
        let upper: Vec<f64> = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| a.min(*b))
            .collect();
        ChartBox::new(lower, upper).ok()
    }

    /// Centre of a bounded box.
    pub fn center(&self) -> Option<ChartPoint> {
        self.is_bounded().then(|| {
            ChartPoint::new(
                self.lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(l, u)| 0.5 * (l + u))
                    .collect::<Vec<_>>(),
            )
        })
    }

    /// The concentric box scaled by `factor` (bounded boxes only).
    pub fn scaled(&self, factor: f64) -> ChartBox {
        let center = self.center().expect("scaling needs a bounded box");
        let c = center.coords();
        ChartBox {
            lower: self
                .lower
                .iter()
                .zip(c)
                .map(|(l, c)| c + factor * (l - c))
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(c)
                .map(|(u, c)| c + factor * (u - c))
                .collect(),
        }
    }

    /// Uniform sample from a bounded box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> ChartPoint {
        ChartPoint::new(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| rng.gen_range(*l..*u))
                .collect::<Vec<_>>(),
        )
    }
}

/// A chart domain: a union of open boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    boxes: Vec<ChartBox>,
}

impl Domain {
    pub fn whole(dim: usize) -> Self {
        Self {
            boxes: vec![ChartBox::whole(dim)],
        }
    }

    pub fn union(boxes: Vec<ChartBox>) -> Result<Self> {
        let dim = boxes
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty domain".into()))?
            .dim();
        if let Some(b) = boxes.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: b.dim(),
            });
        }
        Ok(Self { boxes })
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    pub fn boxes(&self) -> &[ChartBox] {
        &self.boxes
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    pub fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: p.to_vec() })
        }
    }

    /// Pairwise intersection of the member boxes; `None` when empty.
    pub fn intersect(&self, other: &Domain) -> Option<Domain> {
        let boxes: Vec<ChartBox> = self
            .boxes
            .iter()
            .flat_map(|a| other.boxes.iter().filter_map(move |b| a.intersect(b)))
            .collect();
        (!boxes.is_empty()).then_some(Domain { boxes })
    }
}

impl From<ChartBox> for Domain {
    fn from(b: ChartBox) -> Self {
        Self { boxes: vec![b] }
    }
}

/// A tangent vector: base point plus components in the coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub components: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, components: DVector<f64>) -> Result<Self> {
        if base.dim() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: components.len(),
            });
        }
        Ok(Self { base, components })
    }

    pub fn zero(base: ChartPoint) -> Self {
        let n = base.dim();
        Self {
            base,
            components: DVector::zeros(n),
        }
    }

    fn same_base(&self, other: &TangentVector) -> Result<()> {
        if self.base == other.base {
            Ok(())
        } else {
            Err(Error::BaseMismatch {
                left: self.base.coords.clone(),
                right: other.base.coords.clone(),
            })
        }
    }

    pub fn checked_add(&self, other: &TangentVector) -> Result<TangentVector> {
        self.same_base(other)?;
        Ok(TangentVector {
            base: self.base.clone(),
            components: &self.components + &other.components,
        })
    }

    pub fn checked_sub(&self, other: &TangentVector) -> Result<TangentVector> {
        self.same_base(other)?;
        Ok(TangentVector {
            base: self.base.clone(),
            components: &self.components - &other.components,
        })
    }

    pub fn scale(&self, factor: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            components: &self.components * factor,
        }
    }
}

type JetFn = Arc<dyn Fn(&[f64]) -> Vec<Jet> + Send + Sync>;

#[derive(Clone)]
enum FieldRepr {
    Symbolic(Vec<Arc<Expr>>),
    Numeric(JetFn),
}

/// A smooth vector field on a chart domain, given by component functions
/// that evaluate together with their first partial derivatives.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    domain: Domain,
    repr: FieldRepr,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            FieldRepr::Symbolic(c) => {
                let comps: Vec<String> = c.iter().map(ToString::to_string).collect();
                f.debug_struct("VectorField")
                    .field("components", &comps)
                    .finish()
            }
            FieldRepr::Numeric(_) => f
                .debug_struct("VectorField")
                .field("dim", &self.dim)
                .finish_non_exhaustive(),
        }
    }
}

impl VectorField {
    /// A field whose components are closed-form expressions in the
    /// coordinates.
    pub fn symbolic(components: Vec<Arc<Expr>>) -> Result<Self> {
        let dim = components.len();
        check_dim(dim)?;
        if let Some(c) = components.iter().find(|c| c.arity() > dim) {
            return Err(Error::InvalidArgument(format!(
                "component {c} uses a coordinate beyond dimension {dim}"
            )));
        }
        Ok(Self {
            dim,
            domain: Domain::whole(dim),
            repr: FieldRepr::Symbolic(components),
        })
    }

    /// Parses component expressions written in the coordinates `x, y, z, w`.
    pub fn parse(components: &[&str]) -> Result<Self> {
        let names = &expr::VARIABLE_NAMES[..components.len().min(MAX_DIM)];
        let comps = components
            .iter()
            .map(|c| Expr::parse(c, names))
            .collect::<Result<Vec<_>>>()?;
        Self::symbolic(comps)
    }

    pub fn constant(v: &[f64]) -> Result<Self> {
        Self::symbolic(v.iter().map(|&c| Expr::constant(c)).collect())
    }

    /// The coordinate field ∂/∂xⁱ.
    pub fn coordinate(i: usize, dim: usize) -> Result<Self> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self::constant(&v)
    }

    /// The linear field x ↦ A x.
    pub fn linear(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let comps = (0..n)
            .map(|i| {
                (0..a.ncols()).fold(Expr::constant(0.0), |acc, j| {
                    expr::add(acc, expr::mul(Expr::constant(a[(i, j)]), Expr::var(j)))
                })
            })
            .collect();
        Self::symbolic(comps)
    }

    /// A field computed by an arbitrary closure returning component jets.
    pub fn from_jet_fn(
        dim: usize,
        f: impl Fn(&[f64]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            domain: Domain::whole(dim),
            repr: FieldRepr::Numeric(Arc::new(f)),
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: domain.dim(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn components(&self) -> Option<&[Arc<Expr>]> {
        match &self.repr {
            FieldRepr::Symbolic(c) => Some(c),
            FieldRepr::Numeric(_) => None,
        }
    }

    pub(crate) fn jets_unchecked(&self, p: &[f64]) -> Vec<Jet> {
        match &self.repr {
            FieldRepr::Symbolic(comps) => {
                let seeds = Jet::seed(p);
                comps.iter().map(|c| c.eval_jet(&seeds)).collect()
            }
            FieldRepr::Numeric(f) => f(p),
        }
    }

    /// Component jets at `p`.
    pub fn jets(&self, p: &ChartPoint) -> Result<Vec<Jet>> {
        self.domain.check(p.coords())?;
        Ok(self.jets_unchecked(p.coords()))
    }

    pub fn value(&self, p: &ChartPoint) -> Result<DVector<f64>> {
        Ok(DVector::from_iterator(
            self.dim,
            self.jets(p)?.iter().map(|j| j.value),
        ))
    }

    pub fn at(&self, p: &ChartPoint) -> Result<TangentVector> {
        TangentVector::new(p.clone(), self.value(p)?)
    }

    /// Multiplies the field by a scalar function.
    pub fn scaled_by(&self, f: &Arc<Expr>) -> VectorField {
        let repr = match &self.repr {
            FieldRepr::Symbolic(c) => {
                FieldRepr::Symbolic(c.iter().map(|c| expr::mul(f.clone(), c.clone())).collect())
            }
            FieldRepr::Numeric(g) => {
                let (f, g) = (f.clone(), g.clone());
                FieldRepr::Numeric(Arc::new(move |p: &[f64]| {
                    let s = f.eval_jet(&Jet::seed(p));
                    g(p).into_iter().map(|c| s * c).collect()
                }))
            }
        };
        VectorField {
            dim: self.dim,
            domain: self.domain.clone(),
            repr,
        }
    }

    /// Linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<VectorField> {
        let domain = shared_domain(self, other)?;
        let repr = match (&self.repr, &other.repr) {
            (FieldRepr::Symbolic(x), FieldRepr::Symbolic(y)) => FieldRepr::Symbolic(
                x.iter()
                    .zip(y)
                    .map(|(x, y)| {
                        expr::add(
                            expr::mul(Expr::constant(a), x.clone()),
                            expr::mul(Expr::constant(b), y.clone()),
                        )
                    })
                    .collect(),
            ),
            _ => {
                let (x, y) = (self.clone(), other.clone());
                FieldRepr::Numeric(Arc::new(move |p: &[f64]| {
                    x.jets_unchecked(p)
                        .into_iter()
                        .zip(y.jets_unchecked(p))
                        .map(|(u, v)| u * a + v * b)
                        .collect()
                }))
            }
        };
        Ok(VectorField {
            dim: self.dim,
            domain,
            repr,
        })
    }
}

fn shared_domain(x: &VectorField, y: &VectorField) -> Result<Domain> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch {
            expected: x.dim,
            found: y.dim,
        });
    }
    x.domain
        .intersect(&y.domain)
        .ok_or_else(|| Error::InvalidArgument("fields have disjoint domains".into()))
}

/// Components and Jacobian `[∂_j Xⁱ]` of a field at a point.
pub fn jet_eval(field: &VectorField, p: &ChartPoint) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let jets = field.jets(p)?;
    let n = field.dim;
    let values = DVector::from_iterator(n, jets.iter().map(|j| j.value));
    let jacobian = DMatrix::from_fn(n, n, |i, j| jets[i].partial(j));
    Ok((values, jacobian))
}

/// The Lie bracket `[X, Y]ⁱ = Xʲ ∂_j Yⁱ − Yʲ ∂_j Xⁱ`.
///
/// Brackets of symbolic fields are symbolic (and so can be bracketed again
/// exactly); otherwise the result's own derivatives come from central
/// differences of the bracket values.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    let domain = shared_domain(x, y)?;
    let n = x.dim;
    let repr = match (&x.repr, &y.repr) {
        (FieldRepr::Symbolic(xc), FieldRepr::Symbolic(yc)) => FieldRepr::Symbolic(
            (0..n)
                .map(|i| {
                    (0..n).fold(Expr::constant(0.0), |acc, j| {
                        let forward = expr::mul(xc[j].clone(), yc[i].derivative(j));
                        let backward = expr::mul(yc[j].clone(), xc[i].derivative(j));
                        expr::add(acc, expr::sub(forward, backward))
                    })
                })
                .collect(),
        ),
        _ => {
            let (x, y) = (x.clone(), y.clone());
            let bracket_value = move |p: &[f64]| -> Vec<f64> {
                let (xj, yj) = (x.jets_unchecked(p), y.jets_unchecked(p));
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| xj[j].value * yj[i].partial(j) - yj[j].value * xj[i].partial(j))
                            .sum()
                    })
                    .collect()
            };
            FieldRepr::Numeric(Arc::new(move |p: &[f64]| {
                let centre = bracket_value(p);
                let mut partials = vec![vec![0.0; n]; n];
                let mut q = p.to_vec();
                for l in 0..n {
                    q[l] = p[l] + FD_STEP;
                    let plus = bracket_value(&q);
                    q[l] = p[l] - FD_STEP;
                    let minus = bracket_value(&q);
                    q[l] = p[l];
                    for i in 0..n {
                        partials[i][l] = (plus[i] - minus[i]) / (2.0 * FD_STEP);
                    }
                }
                centre
                    .iter()
                    .zip(&partials)
                    .map(|(v, d)| Jet::from_parts(*v, d))
                    .collect()
            }))
        }
    };
    Ok(VectorField { dim: n, domain, repr })
}

/// The frame matrix `[E_j^i(p)]` (columns are the frame fields) together with
/// its partial derivatives `∂_l [E_j^i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameJet {
    pub value: DMatrix<f64>,
    pub partials: Vec<DMatrix<f64>>,
}

impl FrameJet {
    fn from_columns(columns: &[Vec<Jet>]) -> Self {
        let n = columns.len();
        let value = DMatrix::from_fn(n, n, |i, j| columns[j][i].value);
        let partials = (0..n)
            .map(|l| DMatrix::from_fn(n, n, |i, j| columns[j][i].partial(l)))
            .collect();
        Self { value, partials }
    }

    /// Right multiplication by a constant matrix.
    fn times(&self, c: &DMatrix<f64>) -> FrameJet {
        FrameJet {
            value: &self.value * c,
            partials: self.partials.iter().map(|d| d * c).collect(),
        }
    }
}

type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type FrameJetFn = Arc<dyn Fn(&[f64]) -> FrameJet + Send + Sync>;

#[derive(Clone)]
enum FrameRepr {
    Coordinate,
    Fields(Vec<VectorField>),
    Matrix { value: MatrixFn, jet: FrameJetFn },
}

/// n vector fields `E_1 … E_n` forming a basis of every tangent space of the
/// domain.
#[derive(Clone)]
pub struct Frame {
    dim: usize,
    domain: Domain,
    repr: FrameRepr,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            FrameRepr::Coordinate => write!(f, "Frame::coordinate({})", self.dim),
            FrameRepr::Fields(fields) => f.debug_tuple("Frame").field(fields).finish(),
            FrameRepr::Matrix { .. } => f
                .debug_struct("Frame")
                .field("dim", &self.dim)
                .finish_non_exhaustive(),
        }
    }
}

impl Frame {
    /// The coordinate frame `(∂_1, …, ∂_n)` on ℝⁿ.
    pub fn coordinate(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            domain: Domain::whole(dim),
            repr: FrameRepr::Coordinate,
        })
    }

    pub fn new(fields: Vec<VectorField>) -> Result<Self> {
        let dim = fields.len();
        check_dim(dim)?;
        let mut domain = Domain::whole(dim);
        for f in &fields {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.dim(),
                });
            }
            domain = domain
                .intersect(f.domain())
                .ok_or_else(|| Error::InvalidArgument("frame fields have disjoint domains".into()))?;
        }
        Ok(Self {
            dim,
            domain,
            repr: FrameRepr::Fields(fields),
        })
    }

    /// Parses a frame from the component expressions of each field.
    pub fn parse(fields: &[Vec<&str>]) -> Result<Self> {
        Self::new(
            fields
                .iter()
                .map(|f| VectorField::parse(f))
                .collect::<Result<_>>()?,
        )
    }

    /// A frame given directly by its matrix field; `jet` must return the
    /// matrix together with its coordinate partials.
    pub fn from_matrix_fns(
        dim: usize,
        domain: Domain,
        value: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        jet: impl Fn(&[f64]) -> FrameJet + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            domain,
            repr: FrameRepr::Matrix {
                value: Arc::new(value),
                jet: Arc::new(jet),
            },
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: domain.dim(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_coordinate(&self) -> bool {
        matches!(self.repr, FrameRepr::Coordinate)
    }

    pub(crate) fn matrix_unchecked(&self, p: &[f64]) -> DMatrix<f64> {
        match &self.repr {
            FrameRepr::Coordinate => DMatrix::identity(self.dim, self.dim),
            FrameRepr::Fields(fields) => {
                let n = self.dim;
                let mut m = DMatrix::zeros(n, n);
                for (j, f) in fields.iter().enumerate() {
                    for (i, c) in f.jets_unchecked(p).iter().enumerate() {
                        m[(i, j)] = c.value;
                    }
                }
                m
            }
            FrameRepr::Matrix { value, .. } => value(p),
        }
    }

    pub(crate) fn jet_unchecked(&self, p: &[f64]) -> FrameJet {
        match &self.repr {
            FrameRepr::Coordinate => FrameJet {
                value: DMatrix::identity(self.dim, self.dim),
                partials: vec![DMatrix::zeros(self.dim, self.dim); self.dim],
            },
            FrameRepr::Fields(fields) => {
                let columns: Vec<Vec<Jet>> = fields.iter().map(|f| f.jets_unchecked(p)).collect();
                FrameJet::from_columns(&columns)
            }
            FrameRepr::Matrix { jet, .. } => jet(p),
        }
    }

    /// The component matrix `[E_j^i(p)]`; column `j` holds `E_j(p)`.
    pub fn matrix(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.domain.check(p.coords())?;
        Ok(self.matrix_unchecked(p.coords()))
    }

    pub fn jet(&self, p: &ChartPoint) -> Result<FrameJet> {
        self.domain.check(p.coords())?;
        Ok(self.jet_unchecked(p.coords()))
    }

    /// The `i`-th frame field as a standalone vector field.
    pub fn field(&self, i: usize) -> VectorField {
        let n = self.dim;
        let field = match &self.repr {
            FrameRepr::Coordinate => VectorField::coordinate(i, n).expect("valid dimension"),
            FrameRepr::Fields(fields) => fields[i].clone(),
            FrameRepr::Matrix { jet, .. } => {
                let jet = jet.clone();
                VectorField::from_jet_fn(n, move |p| {
                    let fj = jet(p);
                    (0..n)
                        .map(|r| {
                            let d: Vec<f64> = fj.partials.iter().map(|m| m[(r, i)]).collect();
                            Jet::from_parts(fj.value[(r, i)], &d)
                        })
                        .collect()
                })
                .expect("valid dimension")
            }
        };
        field
            .with_domain(self.domain.clone())
            .expect("same dimension")
    }

    /// The frame `q ↦ [E(q)]·C` for a constant invertible matrix `C`.
    pub fn times_constant(&self, c: &DMatrix<f64>) -> Result<Frame> {
        let n = self.dim;
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.nrows(),
            });
        }
        let det = c.determinant();
        if det.abs() <= SINGULAR_DET {
            return Err(Error::Singular {
                what: "constant frame change",
                point: vec![],
                det,
            });
        }
        let symbolic_columns: Option<Vec<Vec<Arc<Expr>>>> = match &self.repr {
            FrameRepr::Coordinate => Some(
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|k| Expr::constant(if i == k { 1.0 } else { 0.0 }))
                            .collect()
                    })
                    .collect(),
            ),
            FrameRepr::Fields(fields) => fields
                .iter()
                .map(|f| f.components().map(<[_]>::to_vec))
                .collect(),
            FrameRepr::Matrix { .. } => None,
        };
        if let Some(cols) = symbolic_columns {
            let fields = (0..n)
                .map(|j| {
                    let comps = (0..n)
                        .map(|i| {
                            (0..n).fold(Expr::constant(0.0), |acc, a| {
                                expr::add(
                                    acc,
                                    expr::mul(cols[a][i].clone(), Expr::constant(c[(a, j)])),
                                )
                            })
                        })
                        .collect();
                    VectorField::symbolic(comps)?.with_domain(self.domain.clone())
                })
                .collect::<Result<Vec<_>>>()?;
            return Frame::new(fields);
        }
        let (base_v, base_j, c_v, c_j) = (self.clone(), self.clone(), c.clone(), c.clone());
        Frame::from_matrix_fns(
            n,
            self.domain.clone(),
            move |p| base_v.matrix_unchecked(p) * &c_v,
            move |p| base_j.jet_unchecked(p).times(&c_j),
        )
    }

    /// Checks `|det [E(p)]| > 1e-12` at every sample.
    pub fn check_invertible<'a>(&self, points: impl IntoIterator<Item = &'a ChartPoint>) -> Result<()> {
        for p in points {
            let det = self.matrix(p)?.determinant();
            if det.abs() <= SINGULAR_DET || !det.is_finite() {
                return Err(Error::Singular {
                    what: "frame matrix",
                    point: p.coords().to_vec(),
                    det,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn invert(m: &DMatrix<f64>, what: &'static str, p: &[f64]) -> Result<DMatrix<f64>> {
    let det = m.determinant();
    if det.abs() <= SINGULAR_DET || !det.is_finite() {
        return Err(Error::Singular {
            what,
            point: p.to_vec(),
            det,
        });
    }
    m.clone().try_inverse().ok_or(Error::Singular {
        what,
        point: p.to_vec(),
        det,
    })
}

/// The dual coframe `E¹ … Eⁿ` of a frame: row `i` of the pointwise inverse
/// matrix holds the components of `Eⁱ`.
#[derive(Debug, Clone)]
pub struct Coframe {
    frame: Frame,
}

impl Coframe {
    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// The matrix `[Eⁱ(∂_k)]`.
    pub fn matrix(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        invert(&self.frame.matrix(p)?, "frame matrix", p.coords())
    }

    /// The coframe matrix `W` with its partials `∂_l W = −W (∂_l M) W`.
    pub fn jet(&self, p: &ChartPoint) -> Result<FrameJet> {
        let fj = self.frame.jet(p)?;
        let w = invert(&fj.value, "frame matrix", p.coords())?;
        let partials = fj.partials.iter().map(|d| -(&w * d * &w)).collect();
        Ok(FrameJet { value: w, partials })
    }

    /// Components of the covector `Eⁱ` at `p`.
    pub fn form(&self, i: usize, p: &ChartPoint) -> Result<DVector<f64>> {
        Ok(self.matrix(p)?.row(i).transpose())
    }

    /// Applies the coframe to a tangent vector: its frame components.
    pub fn apply(&self, v: &TangentVector) -> Result<DVector<f64>> {
        Ok(self.matrix(&v.base)? * &v.components)
    }

    /// Maximum of `|Eⁱ(E_j) − δⁱ_j|` over the samples.
    pub fn duality_defect<'a>(&self, points: impl IntoIterator<Item = &'a ChartPoint>) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in points {
            let product = self.matrix(p)? * self.frame.matrix(p)?;
            let n = product.nrows();
            worst = worst.max((product - DMatrix::<f64>::identity(n, n)).amax());
        }
        Ok(worst)
    }
}

pub fn dual_coframe(frame: &Frame) -> Coframe {
    Coframe {
        frame: frame.clone(),
    }
}

/// Deterministic unit vectors covering the sphere `S^{n−1}`.
///
/// Circles use equally spaced angles, the 2-sphere a Fibonacci lattice; other
/// dimensions fall back to seeded Gaussian directions.
pub fn sphere_grid(dim: usize, count: usize) -> Vec<DVector<f64>> {
    match dim {
        1 => (0..count)
            .map(|k| DVector::from_element(1, if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect(),
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                DVector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    DVector::from_column_slice(&[r * a.cos(), r * a.sin(), z])
                })
                .collect()
        }
        _ => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED);
            (0..count).map(|_| random_unit(&mut rng, dim)).collect()
        }
    }
}

/// A uniformly distributed unit vector.
pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| {
            // Box–Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section5_frame() -> Frame {
        Frame::parse(&[vec!["x", "1"], vec!["-1", "0"]]).unwrap()
    }

    fn pt(x: f64, y: f64) -> ChartPoint {
        ChartPoint::from([x, y])
    }

    #[test]
    fn jet_eval_constant_field() {
        let f = VectorField::constant(&[1.0, 0.0]).unwrap();
        let (v, j) = jet_eval(&f, &pt(3.0, -7.0)).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0]);
        assert_eq!(j, DMatrix::zeros(2, 2));
    }

    #[test]
    fn jet_eval_section5_e1() {
        let e1 = VectorField::parse(&["x", "1"]).unwrap();
        let (v, j) = jet_eval(&e1, &pt(2.0, 5.0)).unwrap();
        assert_eq!(v.as_slice(), &[2.0, 1.0]);
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn jet_eval_linear_field_is_its_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0, -1.0, 0.0, 2.0]);
        let f = VectorField::linear(&a).unwrap();
        for p in [[0.0, 0.0, 0.0], [1.0, -2.0, 4.0]] {
            let (v, j) = jet_eval(&f, &ChartPoint::from(p)).unwrap();
            assert_eq!(j, a);
            assert_eq!(v, &a * DVector::from_column_slice(&p));
        }
    }

    #[test]
    fn jet_eval_rejects_points_outside_domain() {
        let f = VectorField::constant(&[1.0, 0.0])
            .unwrap()
            .with_domain(ChartBox::cube(2, 1.0).into())
            .unwrap();
        assert!(matches!(
            jet_eval(&f, &pt(2.0, 0.0)),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn section5_bracket_is_d_dx() {
        let frame = section5_frame();
        let b = lie_bracket(&frame.field(0), &frame.field(1)).unwrap();
        for p in [pt(0.0, 0.0), pt(2.5, -1.0), pt(-4.0, 3.0)] {
            assert_eq!(b.value(&p).unwrap().as_slice(), &[1.0, 0.0]);
        }
    }

    #[test]
    fn coordinate_fields_commute_and_bracket_is_antisymmetric() {
        let dx = VectorField::coordinate(0, 2).unwrap();
        let dy = VectorField::coordinate(1, 2).unwrap();
        let b = lie_bracket(&dx, &dy).unwrap();
        assert_eq!(b.value(&pt(1.0, 2.0)).unwrap().as_slice(), &[0.0, 0.0]);
        let x = VectorField::parse(&["x*y", "sin(x)"]).unwrap();
        let xx = lie_bracket(&x, &x).unwrap();
        assert_eq!(xx.value(&pt(0.3, -0.2)).unwrap().amax(), 0.0);
    }

    #[test]
    fn numeric_bracket_matches_symbolic() {
        let x = VectorField::parse(&["x*y", "y^2 + x"]).unwrap();
        let y = VectorField::parse(&["cos(y)", "x^3"]).unwrap();
        let y_numeric = {
            let y = y.clone();
            VectorField::from_jet_fn(2, move |p| y.jets_unchecked(p)).unwrap()
        };
        let exact = lie_bracket(&x, &y).unwrap();
        let numeric = lie_bracket(&x, &y_numeric).unwrap();
        let p = pt(0.7, -1.1);
        let (ve, je) = jet_eval(&exact, &p).unwrap();
        let (vn, jn) = jet_eval(&numeric, &p).unwrap();
        assert!((ve - vn).amax() < 1e-14);
        assert!((je - jn).amax() < 1e-8);
    }

    #[test]
    fn section5_coframe() {
        let cof = dual_coframe(&section5_frame());
        for p in [pt(0.0, 0.0), pt(3.0, -2.0), pt(-1.5, 4.0)] {
            let x = p.coords()[0];
            assert_eq!(cof.form(0, &p).unwrap().as_slice(), &[0.0, 1.0]); // dy
            let e2 = cof.form(1, &p).unwrap(); // −dx + x dy
            assert!((e2[0] + 1.0).abs() < 1e-15 && (e2[1] - x).abs() < 1e-14);
        }
    }

    #[test]
    fn coordinate_and_scaled_coframes() {
        let p = pt(0.3, 0.4);
        let cof = dual_coframe(&Frame::coordinate(2).unwrap());
        assert_eq!(cof.matrix(&p).unwrap(), DMatrix::identity(2, 2));
        let scaled = Frame::parse(&[vec!["2", "0"], vec!["0", "2"]]).unwrap();
        assert_eq!(
            dual_coframe(&scaled).matrix(&p).unwrap(),
            DMatrix::identity(2, 2) * 0.5
        );
    }

    #[test]
    fn singular_frame_is_reported() {
        let frame = Frame::parse(&[vec!["x", "0"], vec!["0", "1"]]).unwrap();
        let cof = dual_coframe(&frame);
        assert!(matches!(cof.matrix(&pt(0.0, 1.0)), Err(Error::Singular { .. })));
        assert!(frame.check_invertible([&pt(0.0, 1.0)]).is_err());
        assert!(frame.check_invertible([&pt(1.0, 1.0)]).is_ok());
    }

    #[test]
    fn tangent_vector_ops_check_base() {
        let u = TangentVector::new(pt(0.0, 0.0), DVector::from_column_slice(&[1.0, 2.0])).unwrap();
        let v = TangentVector::new(pt(1.0, 0.0), DVector::from_column_slice(&[1.0, 2.0])).unwrap();
        assert!(matches!(u.checked_add(&v), Err(Error::BaseMismatch { .. })));
        assert_eq!(u.checked_add(&u).unwrap().components, u.scale(2.0).components);
        assert_eq!(u.checked_sub(&u).unwrap(), TangentVector::zero(pt(0.0, 0.0)));
    }

    #[test]
    fn times_constant_keeps_symbolic_fields() {
        let frame = section5_frame();
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0]);
        let g = frame.times_constant(&c).unwrap();
        assert!(g.field(0).components().is_some());
        let p = pt(1.5, 2.0);
        assert!((g.matrix(&p).unwrap() - frame.matrix(&p).unwrap() * &c).amax() < 1e-15);
    }

    #[test]
    fn sphere_grids_are_unit() {
        for dim in 1..=4 {
            for v in sphere_grid(dim, 37) {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
        }
    }
}
