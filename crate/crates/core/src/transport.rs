//! Parallel translation along curves and the matrix ODE `Φ′ = A Φ`, both
//! integrated with fixed-step classical RK4.

use nalgebra::DMatrix;

use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::geometry::{invert, ChartPoint, Curve};
use crate::parallelism::Parallelism;

pub const DEFAULT_STEP: f64 = 1e-3;

/// Parallel translation `P_γᵗ` in coordinate components, mapping components
/// at `from` to components at `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportOperator {
    pub from: ChartPoint,
    pub to: ChartPoint,
    pub matrix: DMatrix<f64>,
    /// Largest entry difference between the runs with `step` and `step / 2`.
    pub step_error: f64,
}

/// Samples `(t, Φ(t))` of a matrix-valued curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCurve {
    samples: Vec<(f64, DMatrix<f64>)>,
}

impl MatrixCurve {
    pub fn samples(&self) -> &[(f64, DMatrix<f64>)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> &DMatrix<f64> {
        &self.samples.last().expect("matrix curves hold Φ(0)").1
    }

    /// `max_t |Φ(t)ᵀ Φ(t) − I|` entrywise.
    pub fn orthogonality_defect(&self) -> f64 {
        self.samples
            .iter()
            .map(|(_, m)| (m.transpose() * m - DMatrix::identity(m.nrows(), m.ncols())).amax())
            .fold(0.0, f64::max)
    }
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step must be positive, got {step}")))
    }
}

/// Integrates `Φ′ = A(t) Φ`, `Φ(0) = I` and returns `Φ` at each of the sorted
/// `targets`. Each gap between consecutive targets is split into equal steps
/// no longer than `step`, so targets are hit exactly.
fn integrate(
    n: usize,
    mut a: impl FnMut(f64) -> Result<DMatrix<f64>>,
    targets: &[f64],
    step: f64,
) -> Result<Vec<DMatrix<f64>>> {
    check_step(step)?;
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut t = 0.0;
    let mut a_now = a(0.0)?;
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        if target < t {
            return Err(Error::InvalidArgument("sample times must be sorted and ≥ 0".into()));
        }
        let span = target - t;
        let steps = (span / step - 1e-9).ceil().max(0.0) as usize;
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        let t_start = t;
        for s in 0..steps {
            let t0 = t_start + s as f64 * h;
            let t1 = if s + 1 == steps { target } else { t_start + (s + 1) as f64 * h };
            let a_mid = a(t0 + 0.5 * h)?;
            let a_end = a(t1)?;
            let k1 = &a_now * &phi;
            let k2 = &a_mid * (&phi + &k1 * (0.5 * h));
            let k3 = &a_mid * (&phi + &k2 * (0.5 * h));
            let k4 = &a_end * (&phi + &k3 * h);
            phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if phi.iter().any(|x| !x.is_finite()) {
                return Err(Error::BlowUp { t: t1 });
            }
            a_now = a_end;
        }
        t = target;
        out.push(phi.clone());
    }
    Ok(out)
}

/// The coefficient `A(t) = −γ̇ʲ(t) Γⁱ_{jk}(γ(t))` of the transport ODE.
fn transport_coefficient<'a>(conn: &'a Connection, curve: &'a Curve) -> impl FnMut(f64) -> Result<DMatrix<f64>> + 'a {
    move |t| {
        let (p, v) = curve.state(t);
        conn.domain().check(&p)?;
        Ok(-conn.coordinate_symbols(&p)?.contract(&v))
    }
}

fn check_curve(conn: &Connection, curve: &Curve) -> Result<()> {
    if conn.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: conn.dim(),
            found: curve.dim(),
        });
    }
    Ok(())
}

/// Transport matrices `P_γᵗ` at the sorted parameters `ts` from one pass.
pub fn transport_samples(conn: &Connection, curve: &Curve, ts: &[f64], step: f64) -> Result<MatrixCurve> {
    check_curve(conn, curve)?;
    if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument("transport parameters must lie in [0, 1]".into()));
    }
    let mats = integrate(conn.dim(), transport_coefficient(conn, curve), ts, step)?;
    Ok(MatrixCurve {
        samples: ts.iter().copied().zip(mats).collect(),
    })
}

/// `P_γᵗ` solving `(Xⁱ)′ + γ̇ʲ Xᵏ Γⁱ_{jk}(γ) = 0` for all basis initial
/// conditions at once, with a step-halving error estimate.
pub fn parallel_transport(conn: &Connection, curve: &Curve, t: f64, step: f64) -> Result<TransportOperator> {
    check_step(step)?;
    let coarse = transport_samples(conn, curve, &[t], step)?;
    let fine = transport_samples(conn, curve, &[t], 0.5 * step)?;
    let matrix = fine.last().clone();
    let step_error = (coarse.last() - &matrix).amax();
    let det = matrix.determinant();
    if det.abs() <= crate::geometry::SINGULAR_DET {
        return Err(Error::Singular {
            what: "transport operator",
            point: curve.point(t).coords().to_vec(),
            det,
        });
    }
    Ok(TransportOperator {
        from: curve.point(0.0),
        to: curve.point(t),
        matrix,
        step_error,
    })
}

/// Solves `Φ′ = A(t) Φ`, `Φ(0) = I` on `[0, t_end]`, sampled at every step.
pub fn matrix_ode_solve(
    a: impl Fn(f64) -> DMatrix<f64>,
    t_end: f64,
    step: f64,
) -> Result<MatrixCurve> {
    check_step(step)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid end time {t_end}")));
    }
    let n = a(0.0).nrows();
    let steps = (t_end / step - 1e-9).ceil().max(0.0) as usize;
    let ts: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { t_end } else { t_end * k as f64 / steps.max(1) as f64 })
        .collect();
    let mats = integrate(n, |t| Ok(a(t)), &ts, step)?;
    Ok(MatrixCurve {
        samples: ts.into_iter().zip(mats).collect(),
    })
}

/// `Φ(t) = [φ_{γ(t)}]⁻¹ · P_γᵗ · [φ_{γ(0)}]` on the step grid of `[0, 1]`.
pub fn phi_curve(parallelism: &Parallelism, conn: &Connection, curve: &Curve, step: f64) -> Result<MatrixCurve> {
    check_step(step)?;
    let steps = (1.0 / step - 1e-9).ceil().max(1.0) as usize;
    let ts: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let transport = transport_samples(conn, curve, &ts, step)?;
    let phi0 = parallelism.trivialization(&curve.point(0.0))?;
    let samples = transport
        .samples
        .into_iter()
        .map(|(t, p)| {
            let q = curve.point(t);
            let phi_t = parallelism.trivialization(&q)?;
            Ok((t, invert(&phi_t, "trivialization", q.coords())? * p * &phi0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixCurve { samples })
}
