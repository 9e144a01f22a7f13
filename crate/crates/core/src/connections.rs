//! Covariant derivatives given by Christoffel symbols relative to a frame,
//! frame changes, torsion and the endomorphism `(∇P)_v`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{invert, lie_bracket, ChartPoint, Domain, Frame, FrameJet, TangentVector, VectorField};
use crate::parallelism::Parallelism;

/// Christoffel symbols `Γⁱ_{jk}` at one point, defined by
/// `∇_{E_j} E_k = Γⁱ_{jk} E_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffels {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    /// Builds symbols from `f(i, j, k) = Γⁱ_{jk}`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    s.data[(i * dim + j) * dim + k] = f(i, j, k);
                }
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = value;
    }

    /// The matrix `(Γ_j)ⁱ_k = Γⁱ_{jk}`.
    pub fn slice(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, k| self.get(i, j, k))
    }

    /// `Σ_j vʲ Γ_j`, the matrix `(vʲ Γⁱ_{jk})_{ik}`.
    pub fn contract(&self, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, k| {
            (0..self.dim).map(|j| v[j] * self.get(i, j, k)).sum()
        })
    }

    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_diff(&self, other: &Christoffels) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub(crate) fn add_scaled(&mut self, other: &Christoffels, w: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += w * b;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

type SymbolFn = Arc<dyn Fn(&[f64]) -> Christoffels + Send + Sync>;
type WeightFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
enum Symbols {
    Zero,
    Function(SymbolFn),
    Blend {
        weights: WeightFn,
        members: Vec<Connection>,
    },
}

/// A covariant derivative, stored through its Christoffel symbols relative
/// to a reference frame. Blends are stored as their members and weights and
/// expose coordinate symbols.
#[derive(Clone)]
pub struct Connection {
    frame: Frame,
    domain: Domain,
    symbols: Symbols,
}

impl fmt::Debug for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.symbols {
            Symbols::Zero => "zero symbols".to_string(),
            Symbols::Function(_) => "symbol function".to_string(),
            Symbols::Blend { members, .. } => format!("blend of {}", members.len()),
        };
        f.debug_struct("Connection")
            .field("frame", &self.frame)
            .field("symbols", &kind)
            .finish()
    }
}

impl Connection {
    /// The flat connection of the coordinate chart.
    pub fn flat(dim: usize) -> Result<Self> {
        let frame = Frame::coordinate(dim)?;
        Ok(Self {
            domain: frame.domain().clone(),
            frame,
            symbols: Symbols::Zero,
        })
    }

    /// The connection making every field of `frame` parallel (`∇E_i = 0`).
    pub fn frame_parallel(frame: Frame) -> Self {
        Self {
            domain: frame.domain().clone(),
            frame,
            symbols: Symbols::Zero,
        }
    }

    /// Symbols relative to `frame` given by a function of the point.
    pub fn in_frame(
        frame: Frame,
        symbols: impl Fn(&[f64]) -> Christoffels + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain: frame.domain().clone(),
            frame,
            symbols: Symbols::Function(Arc::new(symbols)),
        }
    }

    /// Constant symbols relative to `frame`.
    pub fn constant_in_frame(frame: Frame, symbols: Christoffels) -> Result<Self> {
        if symbols.dim() != frame.dim() {
            return Err(Error::DimensionMismatch {
                expected: frame.dim(),
                found: symbols.dim(),
            });
        }
        Ok(Self::in_frame(frame, move |_| symbols.clone()))
    }

    /// Coordinate Christoffel symbols given by a function of the point.
    pub fn in_coordinates(
        dim: usize,
        symbols: impl Fn(&[f64]) -> Christoffels + Send + Sync + 'static,
    ) -> Result<Self> {
        Ok(Self::in_frame(Frame::coordinate(dim)?, symbols))
    }

    /// The pointwise affine combination `Σ_α w_α(p) ∇^α` of connections,
    /// realised on coordinate Christoffel symbols. `weights` returns one
    /// weight per member, zero outside the member's domain.
    pub fn blend(
        domain: Domain,
        weights: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
        members: Vec<Connection>,
    ) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("blend of no connections".into()))?;
        let dim = first.dim();
        if let Some(m) = members.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        Ok(Self {
            frame: Frame::coordinate(dim)?.with_domain(domain.clone())?,
            domain,
            symbols: Symbols::Blend {
                weights: Arc::new(weights),
                members,
            },
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: domain.dim(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// The reference frame of the stored symbols.
    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Symbols relative to the reference frame.
    pub fn frame_christoffels(&self, p: &ChartPoint) -> Result<Christoffels> {
        self.domain.check(p.coords())?;
        match &self.symbols {
            Symbols::Zero => Ok(Christoffels::zeros(self.dim())),
            Symbols::Function(f) => Ok(f(p.coords())),
            Symbols::Blend { .. } => self.coordinate_symbols(p.coords()),
        }
    }

    /// Symbols relative to the coordinate frame.
    pub fn coordinate_christoffels(&self, p: &ChartPoint) -> Result<Christoffels> {
        self.domain.check(p.coords())?;
        self.coordinate_symbols(p.coords())
    }

    pub(crate) fn coordinate_symbols(&self, p: &[f64]) -> Result<Christoffels> {
        let n = self.dim();
        match &self.symbols {
            Symbols::Blend { weights, members } => {
                let w = weights(p)?;
                let mut total = Christoffels::zeros(n);
                for (wa, member) in w.iter().zip(members) {
                    if *wa != 0.0 {
                        total.add_scaled(&member.coordinate_symbols(p)?, *wa);
                    }
                }
                Ok(total)
            }
            Symbols::Zero if self.frame.is_coordinate() => Ok(Christoffels::zeros(n)),
            Symbols::Function(f) if self.frame.is_coordinate() => Ok(f(p)),
            symbols => {
                let fj = self.frame.jet_unchecked(p);
                let frame_symbols = match symbols {
                    Symbols::Function(f) => Some(f(p)),
                    _ => None,
                };
                frame_to_coordinates(&fj, frame_symbols.as_ref(), p)
            }
        }
    }

    /// `∇_X Y` at `p`.
    pub fn covariant_derivative(
        &self,
        x: &VectorField,
        y: &VectorField,
        p: &ChartPoint,
    ) -> Result<TangentVector> {
        let gamma = self.coordinate_christoffels(p)?;
        let (xv, _) = crate::geometry::jet_eval(x, p)?;
        let (yv, yjac) = crate::geometry::jet_eval(y, p)?;
        let value = &yjac * &xv + gamma.contract(xv.as_slice()) * &yv;
        TangentVector::new(p.clone(), value)
    }
}

/// Coordinate symbols from frame symbols `Γ̂` (absent = zero):
/// `Γⁱ_{jk} = Mⁱ_a (∂_j Wᵃ_k + Wᵇ_j Wᶜ_k Γ̂ᵃ_{bc})` with `W = M⁻¹` and
/// `∂_j W = −W (∂_j M) W`.
fn frame_to_coordinates(fj: &FrameJet, frame_symbols: Option<&Christoffels>, p: &[f64]) -> Result<Christoffels> {
    let n = fj.value.nrows();
    let m = &fj.value;
    let w = invert(m, "connection frame", p)?;
    let mut out = Christoffels::zeros(n);
    for j in 0..n {
        // M ∂_j W = −(∂_j M) W
        let term = -(&fj.partials[j] * &w);
        for i in 0..n {
            for k in 0..n {
                out.set(i, j, k, term[(i, k)]);
            }
        }
    }
    if let Some(g) = frame_symbols {
        // T^a_{jk} = (Wᵀ Γ̂^a W)_{jk}
        let transformed: Vec<DMatrix<f64>> = (0..n)
            .map(|a| {
                let ga = DMatrix::from_fn(n, n, |b, c| g.get(a, b, c));
                w.transpose() * ga * &w
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let extra: f64 = (0..n).map(|a| m[(i, a)] * transformed[a][(j, k)]).sum();
                    out.set(i, j, k, out.get(i, j, k) + extra);
                }
            }
        }
    }
    Ok(out)
}

/// Symbols of `conn` relative to `new_frame` at `p`:
/// `Γ̃ᵃ_{bc} = Vᵃ_i (Nʲ_b ∂_j Nⁱ_c + Nʲ_b Nᵏ_c Γⁱ_{jk})`, `V = N⁻¹`.
pub fn christoffels_in_frame(conn: &Connection, new_frame: &Frame, p: &ChartPoint) -> Result<Christoffels> {
    let gamma = conn.coordinate_christoffels(p)?;
    let nj = new_frame.jet(p)?;
    let n = conn.dim();
    let nm = &nj.value;
    let v = invert(nm, "frame matrix", p.coords())?;
    // derivative of N_c along E_b: Σ_j Nʲ_b ∂_j N_c  →  D_b (columns c)
    let mut out = Christoffels::zeros(n);
    for b in 0..n {
        let mut d_b = DMatrix::zeros(n, n);
        for j in 0..n {
            d_b += &nj.partials[j] * nm[(j, b)];
        }
        // Γ(E_b, ·) in coordinates: (Σ_j Nʲ_b Γ_j) N
        let nb: Vec<f64> = (0..n).map(|j| nm[(j, b)]).collect();
        let conn_term = gamma.contract(&nb) * nm;
        let total = &v * (d_b + conn_term);
        for a in 0..n {
            for c in 0..n {
                out.set(a, b, c, total[(a, c)]);
            }
        }
    }
    Ok(out)
}

/// A linear endomorphism of one tangent space, in coordinate components.
#[derive(Debug, Clone, PartialEq)]
pub struct Endomorphism {
    pub base: ChartPoint,
    pub matrix: DMatrix<f64>,
}

/// `(∇P)_v(w) = wᵏ vʲ Γⁱ_{jk}(p) E_i(p)` with the symbols taken relative to
/// the `P`-parallel frame and `v = vʲ E_j(p)`, `w = wᵏ E_k(p)`.
pub fn nabla_p(conn: &Connection, parallelism: &Parallelism, v: &TangentVector) -> Result<Endomorphism> {
    let p = &v.base;
    let frame = parallelism.frame();
    let gamma = christoffels_in_frame(conn, frame, p)?;
    let m = frame.matrix(p)?;
    let w = invert(&m, "parallel frame", p.coords())?;
    let v_frame: DVector<f64> = &w * &v.components;
    let in_frame = gamma.contract(v_frame.as_slice());
    Ok(Endomorphism {
        base: p.clone(),
        matrix: &m * in_frame * &w,
    })
}

/// `T(X, Y) = ∇_X Y − ∇_Y X − [X, Y]` at `p`.
pub fn torsion(conn: &Connection, x: &VectorField, y: &VectorField, p: &ChartPoint) -> Result<TangentVector> {
    let xy = conn.covariant_derivative(x, y, p)?;
    let yx = conn.covariant_derivative(y, x, p)?;
    let bracket = lie_bracket(x, y)?.at(p)?;
    xy.checked_sub(&yx)?.checked_sub(&bracket)
}
