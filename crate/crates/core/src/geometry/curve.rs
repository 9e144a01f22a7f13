use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use super::{check_dim, ChartPoint, Domain, Jet};
use crate::error::{Error, Result};

/// How a curve was built; carried into check witnesses.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CurveKind {
    Segment {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    Arc {
        center: Vec<f64>,
        radius: f64,
        start: f64,
        sweep: f64,
    },
    Sinusoidal {
        from: Vec<f64>,
        to: Vec<f64>,
        amplitude: f64,
        waves: f64,
    },
    Bezier {
        controls: Vec<Vec<f64>>,
    },
    Restricted {
        of: Box<CurveKind>,
        t0: f64,
        t1: f64,
    },
    Custom,
}

type CurveFn = Arc<dyn Fn(Jet) -> Vec<Jet> + Send + Sync>;

/// A smooth curve `γ: [0, 1] → chart`, evaluated as jets in `t` so the
/// velocity `γ̇(t)` comes out exactly.
#[derive(Clone)]
pub struct Curve {
    dim: usize,
    kind: CurveKind,
    map: CurveFn,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve").field("kind", &self.kind).finish()
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        })
    }
}

impl Curve {
    pub fn from_fn(dim: usize, map: impl Fn(Jet) -> Vec<Jet> + Send + Sync + 'static) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            kind: CurveKind::Custom,
            map: Arc::new(map),
        })
    }

    /// The straight segment `a + t (b − a)`.
    pub fn segment(a: &ChartPoint, b: &ChartPoint) -> Result<Self> {
        same_len(a.coords(), b.coords())?;
        check_dim(a.dim())?;
        let (from, to) = (a.coords().to_vec(), b.coords().to_vec());
        let (fa, fb) = (from.clone(), to.clone());
        Ok(Self {
            dim: from.len(),
            kind: CurveKind::Segment { from, to },
            map: Arc::new(move |t| {
                fa.iter()
                    .zip(&fb)
                    .map(|(a, b)| t * (b - a) + *a)
                    .collect()
            }),
        })
    }

    /// A circular arc in the plane of the first two coordinates; remaining
    /// coordinates stay at the centre's values.
    pub fn arc(center: &ChartPoint, radius: f64, start: f64, sweep: f64) -> Result<Self> {
        let dim = center.dim();
        check_dim(dim)?;
        if dim < 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let c = center.coords().to_vec();
        let cc = c.clone();
        Ok(Self {
            dim,
            kind: CurveKind::Arc {
                center: c,
                radius,
                start,
                sweep,
            },
            map: Arc::new(move |t| {
                let angle = t * sweep + start;
                let mut out: Vec<Jet> = cc.iter().map(|&x| Jet::constant(x, t.dim())).collect();
                out[0] = angle.cos() * radius + cc[0];
                out[1] = angle.sin() * radius + cc[1];
                out
            }),
        })
    }

    /// The segment from `a` to `b` with a transverse sine wobble
    /// `amplitude · sin(π · waves · t)`.
    pub fn sinusoidal(a: &ChartPoint, b: &ChartPoint, amplitude: f64, waves: f64) -> Result<Self> {
        same_len(a.coords(), b.coords())?;
        let dim = a.dim();
        check_dim(dim)?;
        let d = b.to_vector() - a.to_vector();
        if d.norm() == 0.0 || dim < 2 {
            return Err(Error::InvalidArgument(
                "sinusoidal curve needs distinct endpoints in dimension ≥ 2".into(),
            ));
        }
        let dir = d.normalize();
        // normal: first coordinate axis with the largest component orthogonal to dir
        let normal = (0..dim)
            .map(|k| {
                let mut e = DVector::zeros(dim);
                e[k] = 1.0;
                let v: DVector<f64> = &e - &dir * dir[k];
                v
            })
            .max_by(|u, v| u.norm().total_cmp(&v.norm()))
            .expect("dim ≥ 2")
            .normalize();
        let (from, to) = (a.coords().to_vec(), b.coords().to_vec());
        let (fa, fb) = (from.clone(), to.clone());
        Ok(Self {
            dim,
            kind: CurveKind::Sinusoidal {
                from,
                to,
                amplitude,
                waves,
            },
            map: Arc::new(move |t| {
                let wobble = (t * (std::f64::consts::PI * waves)).sin() * amplitude;
                (0..fa.len())
                    .map(|i| t * (fb[i] - fa[i]) + fa[i] + wobble * normal[i])
                    .collect()
            }),
        })
    }

    /// A Bézier curve through de Casteljau's recursion.
    pub fn bezier(controls: &[ChartPoint]) -> Result<Self> {
        let first = controls
            .first()
            .ok_or_else(|| Error::InvalidArgument("Bézier curve needs control points".into()))?;
        let dim = first.dim();
        check_dim(dim)?;
        for c in controls {
            same_len(first.coords(), c.coords())?;
        }
        let pts: Vec<Vec<f64>> = controls.iter().map(|c| c.coords().to_vec()).collect();
        let pts_map = pts.clone();
        Ok(Self {
            dim,
            kind: CurveKind::Bezier { controls: pts },
            map: Arc::new(move |t| {
                let one_minus = Jet::constant(1.0, t.dim()) - t;
                let mut level: Vec<Vec<Jet>> = pts_map
                    .iter()
                    .map(|p| p.iter().map(|&x| Jet::constant(x, t.dim())).collect())
                    .collect();
                while level.len() > 1 {
                    level = level
                        .windows(2)
                        .map(|w| {
                            w[0].iter()
                                .zip(&w[1])
                                .map(|(a, b)| one_minus * *a + t * *b)
                                .collect()
                        })
                        .collect();
                }
                level.pop().expect("at least one control point")
            }),
        })
    }

    /// The reparametrised piece `s ↦ γ(t0 + s (t1 − t0))`.
    pub fn restrict(&self, t0: f64, t1: f64) -> Curve {
        let map = self.map.clone();
        Curve {
            dim: self.dim,
            kind: CurveKind::Restricted {
                of: Box::new(self.kind.clone()),
                t0,
                t1,
            },
            map: Arc::new(move |s| map(s * (t1 - t0) + t0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    /// Position and velocity at `t`.
    pub fn state(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let jets = (self.map)(Jet::variable(t, 0, 1));
        (
            jets.iter().map(|j| j.value).collect(),
            jets.iter().map(|j| j.partial(0)).collect(),
        )
    }

    pub fn point(&self, t: f64) -> ChartPoint {
        ChartPoint::new(self.state(t).0)
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        DVector::from_vec(self.state(t).1)
    }

    /// Checks that the image stays in `domain` and the velocity never
    /// vanishes, at `samples + 1` equally spaced parameters.
    pub fn check_regular(&self, domain: &Domain, samples: usize) -> Result<()> {
        for k in 0..=samples {
            let t = k as f64 / samples as f64;
            let (p, v) = self.state(t);
            domain.check(&p)?;
            if v.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "curve is not regular at t = {t}"
                )));
            }
        }
        Ok(())
    }
}
