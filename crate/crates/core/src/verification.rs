//! Numerical certification of holonomy invariance, parallelism
//! compatibility, the Lie-algebra criterion, torsion, uniqueness of the
//! compatible connection and the generalized Berwald verdict.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::connections::{nabla_p, torsion, Connection};
use crate::constructions::{connection_from_covering_parallelism, covering_from_connection};
use crate::error::{Error, Result};
use crate::geometry::{random_unit, ChartBox, ChartPoint, Curve, Domain, TangentVector};
use crate::norms::{default_samples, isometry_group_2x2, lie_algebra_member, IsometryGroup, NormField};
use crate::parallelism::{CoveringParallelism, Parallelism};
use crate::transport::{transport_samples, DEFAULT_STEP};

/// Floor for the denominator of relative errors.
pub const REL_FLOOR: f64 = 1e-12;
/// Torsion below this counts as vanishing.
pub const TORSION_TOL: f64 = 1e-9;

/// Outcome of one numerical check. `pass` holds exactly when
/// `max_rel_error <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub samples: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Value,
    pub seed: u64,
    pub step: f64,
}

impl CheckReport {
    pub fn new(check: &str, samples: usize, abs: f64, rel: f64, tolerance: f64, witness: Value, opts: &CheckOptions) -> Self {
        Self {
            check: check.to_string(),
            samples,
            max_abs_error: abs,
            max_rel_error: rel,
            tolerance,
            pass: rel <= tolerance,
            witness,
            seed: opts.seed,
            step: opts.step,
        }
    }
}

/// Sampling parameters shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub tol: f64,
    pub step: f64,
    /// Test vectors per sample: the coordinate axes first, then random unit
    /// vectors.
    pub vectors: usize,
    /// Curve parameters `t = 1/k, …, 1` with `k = t_samples`.
    pub t_samples: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            step: DEFAULT_STEP,
            vectors: 20,
            t_samples: 10,
            seed: 42,
        }
    }
}

impl CheckOptions {
    fn t_values(&self) -> Vec<f64> {
        (1..=self.t_samples).map(|k| k as f64 / self.t_samples as f64).collect()
    }
}

/// Coordinate axes followed by random unit vectors, `count` in total.
pub fn test_vectors<R: Rng>(dim: usize, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..count)
        .map(|k| {
            if k < dim {
                let mut e = DVector::zeros(dim);
                e[k] = 1.0;
                e
            } else {
                random_unit(rng, dim)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    Segments,
    Circles,
    Sinusoidal,
    Bezier,
    /// Cycles through the four families above.
    Mixed,
}

/// Deterministic source of test curves inside a bounded region. Explicit
/// curves, if any, come first.
#[derive(Debug, Clone)]
pub struct CurveGenerator {
    pub seed: u64,
    pub family: CurveFamily,
    pub count: usize,
    pub region: ChartBox,
    pub explicit: Vec<Curve>,
}

const MAX_ATTEMPTS: usize = 100;

impl CurveGenerator {
    pub fn new(seed: u64, family: CurveFamily, count: usize, region: ChartBox) -> Result<Self> {
        if !region.is_bounded() {
            return Err(Error::InvalidArgument("curve region must be bounded".into()));
        }
        Ok(Self {
            seed,
            family,
            count,
            region,
            explicit: Vec::new(),
        })
    }

    pub fn with_explicit(mut self, curves: Vec<Curve>) -> Self {
        self.explicit = curves;
        self
    }

    fn random_curve(&self, family: CurveFamily, rng: &mut ChaCha8Rng) -> Result<Curve> {
        let r = &self.region;
        match family {
            CurveFamily::Segments => Curve::segment(&r.sample(rng), &r.sample(rng)),
            CurveFamily::Circles => {
                let c = r.scaled(0.5).sample(rng);
                let room = (0..2)
                    .map(|i| (c.coords()[i] - r.lower()[i]).min(r.upper()[i] - c.coords()[i]))
                    .fold(f64::INFINITY, f64::min);
                let radius = room * rng.gen_range(0.2..0.9);
                let sweep = rng.gen_range(0.5..std::f64::consts::TAU) * if rng.gen() { 1.0 } else { -1.0 };
                Curve::arc(&c, radius, rng.gen_range(0.0..std::f64::consts::TAU), sweep)
            }
            CurveFamily::Sinusoidal => {
                let inner = r.scaled(0.6);
                let (a, b) = (inner.sample(rng), inner.sample(rng));
                let length = (b.to_vector() - a.to_vector()).norm();
                Curve::sinusoidal(&a, &b, length * rng.gen_range(0.05..0.25), rng.gen_range(0.5..3.0))
            }
            CurveFamily::Bezier => {
                let inner = r.scaled(0.9);
                let controls: Vec<ChartPoint> = (0..4).map(|_| inner.sample(rng)).collect();
                Curve::bezier(&controls)
            }
            CurveFamily::Mixed => unreachable!("resolved per index"),
        }
    }

    /// The explicit curves followed by `count` random regular curves inside
    /// `domain ∩ region`.
    pub fn generate(&self, domain: &Domain) -> Result<Vec<Curve>> {
        let inside = domain
            .intersect(&Domain::from(self.region.clone()))
            .ok_or_else(|| Error::InvalidArgument("curve region misses the domain".into()))?;
        for c in &self.explicit {
            c.check_regular(domain, 64)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = self.explicit.clone();
        for k in 0..self.count {
            let family = match self.family {
                CurveFamily::Mixed => [
                    CurveFamily::Segments,
                    CurveFamily::Circles,
                    CurveFamily::Sinusoidal,
                    CurveFamily::Bezier,
                ][k % 4],
                f => f,
            };
            let mut attempt = 0;
            loop {
                let candidate = self.random_curve(family, &mut rng);
                if let Ok(curve) = candidate {
                    if curve.check_regular(&inside, 64).is_ok() {
                        out.push(curve);
                        break;
                    }
                }
                attempt += 1;
                if attempt == MAX_ATTEMPTS {
                    return Err(Error::InvalidArgument(format!(
                        "no regular {family:?} curve found inside the region"
                    )));
                }
            }
        }
        Ok(out)
    }
}

fn vector_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// Per-curve transport matrices at the option's t-values.
fn transports(conn: &Connection, curves: &[Curve], opts: &CheckOptions) -> Result<Vec<Vec<DMatrix<f64>>>> {
    let ts = opts.t_values();
    curves
        .iter()
        .map(|c| {
            Ok(transport_samples(conn, c, &ts, opts.step)?
                .samples()
                .iter()
                .map(|(_, m)| m.clone())
                .collect())
        })
        .collect()
}

fn invariance_report(
    field: &NormField,
    curves: &[Curve],
    mats: &[Vec<DMatrix<f64>>],
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x1);
    let vectors = test_vectors(field.dim(), opts.vectors, &mut rng);
    let ts = opts.t_values();
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    let mut witness = Value::Null;
    let mut samples = 0;
    for (index, (curve, per_t)) in curves.iter().zip(mats).enumerate() {
        let f0 = field.at(&curve.point(0.0))?;
        for (t, m) in ts.iter().zip(per_t) {
            let ft = field.at(&curve.point(*t))?;
            for v in &vectors {
                let before = f0.eval(v);
                let after = ft.eval(&(m * v));
                let abs = (after - before).abs();
                let rel = abs / before.max(REL_FLOOR);
                samples += 1;
                max_abs = max_abs.max(abs);
                if rel > max_rel || witness.is_null() {
                    max_rel = rel.max(max_rel);
                    witness = json!({
                        "curve_index": index,
                        "curve": curve.kind(),
                        "t": t,
                        "vector": vector_json(v),
                        "ratio": after / before,
                    });
                }
            }
        }
    }
    Ok(CheckReport::new("holonomy_invariance", samples, max_abs, max_rel, opts.tol, witness, opts))
}

/// `F_{γ(t)}(P_γᵗ v) = F_{γ(0)}(v)` over the generated curves, the option's
/// t-values and test vectors.
pub fn check_holonomy_invariance(
    field: &NormField,
    conn: &Connection,
    gen: &CurveGenerator,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let domain = field
        .domain()
        .intersect(conn.domain())
        .ok_or_else(|| Error::InvalidArgument("norm field and connection share no domain".into()))?;
    let curves = gen.generate(&domain)?;
    let mats = transports(conn, &curves, opts)?;
    invariance_report(field, &curves, &mats, opts)
}

/// `count` random point pairs in a bounded region.
pub fn sample_pairs(region: &ChartBox, count: usize, seed: u64) -> Vec<(ChartPoint, ChartPoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (region.sample(&mut rng), region.sample(&mut rng))).collect()
}

/// `F_q(P(p, q) v) = F_p(v)` over the given point pairs and test vectors.
pub fn check_parallelism_compat(
    field: &NormField,
    parallelism: &Parallelism,
    pairs: &[(ChartPoint, ChartPoint)],
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x2);
    let vectors = test_vectors(field.dim(), opts.vectors, &mut rng);
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    let mut witness = Value::Null;
    let mut samples = 0;
    for (p, q) in pairs {
        let transfer = parallelism.transfer(p, q)?;
        let (fp, fq) = (field.at(p)?, field.at(q)?);
        for v in &vectors {
            let before = fp.eval(v);
            let after = fq.eval(&(&transfer * v));
            let abs = (after - before).abs();
            let rel = abs / before.max(REL_FLOOR);
            samples += 1;
            max_abs = max_abs.max(abs);
            if rel > max_rel || witness.is_null() {
                max_rel = rel.max(max_rel);
                witness = json!({
                    "p": p.coords(),
                    "q": q.coords(),
                    "vector": vector_json(v),
                    "ratio": after / before,
                });
            }
        }
    }
    Ok(CheckReport::new("parallelism_compat", samples, max_abs, max_rel, opts.tol, witness, opts))
}

/// Whether `(∇P)_v` lies in the Lie algebra of `iso(F_{τ(v)})` for
/// `opts.vectors` random unit vectors at each of `points` random points of
/// `region`.
///
/// `max_abs_error` is the raw membership violation; `max_rel_error` is the
/// violation divided by the tolerance of the membership test that produced
/// it, so the report's tolerance is 1.
pub fn check_compalg_criterion(
    field: &NormField,
    parallelism: &Parallelism,
    conn: &Connection,
    region: &ChartBox,
    points: usize,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x3);
    let samples = default_samples(field.dim());
    let (mut max_abs, mut max_rel, mut max_endo) = (0.0f64, 0.0f64, 0.0f64);
    let mut witness = Value::Null;
    let mut count = 0;
    for _ in 0..points {
        let p = region.sample(&mut rng);
        let fp = field.at(&p)?;
        for _ in 0..opts.vectors {
            let v = TangentVector::new(p.clone(), random_unit(&mut rng, field.dim()))?;
            let endo = nabla_p(conn, parallelism, &v)?;
            let verdict = lie_algebra_member(&fp, &endo.matrix, &samples);
            let rel = verdict.max_violation / verdict.tolerance;
            count += 1;
            max_abs = max_abs.max(verdict.max_violation);
            max_endo = max_endo.max(endo.matrix.amax());
            if rel > max_rel || witness.is_null() {
                max_rel = rel.max(max_rel);
                witness = json!({
                    "point": p.coords(),
                    "vector": vector_json(&v.components),
                    "endomorphism": matrix_json(&endo.matrix),
                    "method": verdict.method,
                });
            }
        }
    }
    if let Value::Object(map) = &mut witness {
        map.insert("max_endomorphism_entry".into(), json!(max_endo));
    }
    Ok(CheckReport::new("compalg_criterion", count, max_abs, max_rel, 1.0, witness, opts))
}

/// Largest coordinate sup-norm of `T(E_i, E_j)` over the points and pairs of
/// fields of the connection's reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionBound {
    pub max: f64,
    pub point: ChartPoint,
    pub pair: (usize, usize),
}

pub fn berwald_obstruction(conn: &Connection, points: &[ChartPoint]) -> Result<TorsionBound> {
    let n = conn.dim();
    let fields: Vec<_> = (0..n).map(|i| conn.frame().field(i)).collect();
    let mut best = TorsionBound {
        max: 0.0,
        point: points
            .first()
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("no sample points".into()))?,
        pair: (0, 0),
    };
    for p in points {
        for i in 0..n {
            for j in i + 1..n {
                let t = torsion(conn, &fields[i], &fields[j], p)?.components.amax();
                if t > best.max {
                    best = TorsionBound {
                        max: t,
                        point: p.clone(),
                        pair: (i, j),
                    };
                }
            }
        }
    }
    Ok(best)
}

/// `count` random points of a bounded region.
pub fn sample_points(region: &ChartBox, count: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| region.sample(&mut rng)).collect()
}

/// Checks that `iso(F_p)` is discrete at the centre of the generator region.
fn require_discrete(field: &NormField, p: &ChartPoint) -> Result<IsometryGroup> {
    if field.dim() != 2 {
        return Err(Error::Precondition(format!(
            "discreteness of the isometry group can only be certified in dimension 2, got {}",
            field.dim()
        )));
    }
    let group = isometry_group_2x2(&field.at(p)?)?;
    if !group.is_discrete() {
        return Err(Error::Precondition(
            "the isometry group of the norm is continuous; compatible connections need not be unique".into(),
        ));
    }
    Ok(group)
}

/// Entrywise `|P_γᵗ − P̄_γᵗ|` over the generated curves, after certifying that
/// both connections preserve `F` and that `iso(F_p)` is discrete.
pub fn check_uniqueness(
    field: &NormField,
    conn1: &Connection,
    conn2: &Connection,
    gen: &CurveGenerator,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let center = gen.region.center().expect("generator regions are bounded");
    require_discrete(field, &center)?;
    let domain = field
        .domain()
        .intersect(conn1.domain())
        .and_then(|d| d.intersect(conn2.domain()))
        .ok_or_else(|| Error::InvalidArgument("inputs share no domain".into()))?;
    let curves = gen.generate(&domain)?;
    let first = transports(conn1, &curves, opts)?;
    let second = transports(conn2, &curves, opts)?;
    for (name, mats) in [("first", &first), ("second", &second)] {
        let report = invariance_report(field, &curves, mats, opts)?;
        if !report.pass {
            return Err(Error::Precondition(format!(
                "the {name} connection does not preserve the norm (relative error {:e})",
                report.max_rel_error
            )));
        }
    }
    let ts = opts.t_values();
    let mut max = 0.0f64;
    let mut witness = Value::Null;
    let mut samples = 0;
    for (index, (a, b)) in first.iter().zip(&second).enumerate() {
        for ((t, ma), mb) in ts.iter().zip(a).zip(b) {
            let d = (ma - mb).amax();
            samples += 1;
            if d > max || witness.is_null() {
                max = max.max(d);
                witness = json!({"curve_index": index, "curve": curves[index].kind(), "t": t});
            }
        }
    }
    Ok(CheckReport::new("uniqueness", samples, max, max, opts.tol, witness, opts))
}

/// Evidence offered for a generalized Berwald structure.
#[derive(Debug, Clone)]
pub enum BerwaldEvidence {
    Cover(CoveringParallelism),
    /// A connection together with the region (and cells per axis) on which
    /// parallelisms are built from it.
    Connection {
        conn: Connection,
        region: ChartBox,
        parts: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "generalized Berwald (certified)")]
    Certified,
    #[serde(rename = "not certified")]
    NotCertified,
}

/// Whether the compatible connection found is torsion-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BerwaldAnnotation {
    /// Torsion vanishes on the samples.
    Berwald,
    /// Torsion is non-zero and the compatible connection is unique.
    NotBerwald,
    /// Torsion is non-zero but other compatible connections may exist.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerwaldVerdict {
    pub verdict: Verdict,
    pub annotation: Option<BerwaldAnnotation>,
    pub torsion_max: Option<f64>,
    pub reports: Vec<CheckReport>,
}

/// Runs both directions of the characterisation of generalized Berwald
/// manifolds on the generator's region.
///
/// A cover is checked member by member for compatibility (`pairs` random
/// pairs in each member box ∩ region), then blended into a connection whose
/// holonomy invariance is checked. A connection is checked for holonomy
/// invariance, then turned into parallelisms on the cells of its region,
/// each checked for compatibility.
pub fn generalized_berwald_verdict(
    field: &NormField,
    evidence: &BerwaldEvidence,
    gen: &CurveGenerator,
    pairs: usize,
    opts: &CheckOptions,
) -> Result<BerwaldVerdict> {
    let mut reports = Vec::new();
    let compat_all = |cover: &CoveringParallelism, reports: &mut Vec<CheckReport>| -> Result<bool> {
        let mut ok = true;
        for (k, (b, par)) in cover.members().iter().enumerate() {
            let Some(cell) = b.intersect(&gen.region) else { continue };
            let mut report = check_parallelism_compat(field, par, &sample_pairs(&cell, pairs, opts.seed + k as u64), opts)?;
            report.check = format!("parallelism_compat[{k}]");
            ok &= report.pass;
            reports.push(report);
        }
        Ok(ok)
    };
    let conn = match evidence {
        BerwaldEvidence::Cover(cover) => {
            if !compat_all(cover, &mut reports)? {
                return Ok(BerwaldVerdict {
                    verdict: Verdict::NotCertified,
                    annotation: None,
                    torsion_max: None,
                    reports,
                });
            }
            let conn = connection_from_covering_parallelism(cover)?;
            let report = check_holonomy_invariance(field, &conn, gen, opts)?;
            let ok = report.pass;
            reports.push(report);
            if !ok {
                return Ok(BerwaldVerdict {
                    verdict: Verdict::NotCertified,
                    annotation: None,
                    torsion_max: None,
                    reports,
                });
            }
            conn
        }
        BerwaldEvidence::Connection { conn, region, parts } => {
            let report = check_holonomy_invariance(field, conn, gen, opts)?;
            let ok = report.pass;
            reports.push(report);
            let verdict_ok = ok && {
                let cover = covering_from_connection(conn, region, *parts, opts.step)?;
                compat_all(&cover, &mut reports)?
            };
            if !verdict_ok {
                return Ok(BerwaldVerdict {
                    verdict: Verdict::NotCertified,
                    annotation: None,
                    torsion_max: None,
                    reports,
                });
            }
            conn.clone()
        }
    };
    let points = sample_points(&gen.region, 20, opts.seed ^ 0x4);
    let bound = berwald_obstruction(&conn, &points)?;
    let annotation = if bound.max <= TORSION_TOL {
        BerwaldAnnotation::Berwald
    } else {
        let center = gen.region.center().expect("bounded region");
        match require_discrete(field, &center) {
            Ok(_) => BerwaldAnnotation::NotBerwald,
            Err(_) => BerwaldAnnotation::Undetermined,
        }
    };
    Ok(BerwaldVerdict {
        verdict: Verdict::Certified,
        annotation: Some(annotation),
        torsion_max: Some(bound.max),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::Christoffels;
    use crate::geometry::{Expr, Frame};
    use crate::norms::{MinkowskiNorm, RandersData};
    use crate::parallelism::frame_parallelism;

    fn section5_frame() -> Frame {
        Frame::parse(&[vec!["x", "1"], vec!["-1", "0"]]).unwrap()
    }

    fn section5_field() -> NormField {
        let f = MinkowskiNorm::Randers(
            RandersData::new(
                DMatrix::from_diagonal(&DVector::from_column_slice(&[4.0, 12.0])),
                DVector::from_column_slice(&[-1.0, 0.0]),
            )
            .unwrap(),
        );
        NormField::in_frame(f, section5_frame()).unwrap()
    }

    fn pt(x: f64, y: f64) -> ChartPoint {
        ChartPoint::from([x, y])
    }

    fn quick() -> CheckOptions {
        CheckOptions {
            step: 1e-2,
            ..CheckOptions::default()
        }
    }

    #[test]
    fn generator_is_deterministic_and_inside() {
        let region = ChartBox::cube(2, 3.0);
        let gen = CurveGenerator::new(5, CurveFamily::Mixed, 40, region.clone()).unwrap();
        let a = gen.generate(&Domain::whole(2)).unwrap();
        let b = gen.generate(&Domain::whole(2)).unwrap();
        assert_eq!(a.len(), 40);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.kind(), y.kind());
            x.check_regular(&Domain::from(region.clone()), 200).unwrap();
        }
        assert!(CurveGenerator::new(5, CurveFamily::Mixed, 1, ChartBox::whole(2)).is_err());
    }

    #[test]
    fn test_vectors_start_with_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = test_vectors(2, 5, &mut rng);
        assert_eq!(v[0].as_slice(), &[1.0, 0.0]);
        assert_eq!(v[1].as_slice(), &[0.0, 1.0]);
        assert!(v.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn section5_invariance_passes() {
        let gen = CurveGenerator::new(1, CurveFamily::Mixed, 12, ChartBox::cube(2, 3.0)).unwrap();
        let conn = Connection::frame_parallel(section5_frame());
        let r = check_holonomy_invariance(&section5_field(), &conn, &gen, &quick()).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.samples, 12 * 10 * 20);
    }

    #[test]
    fn euclidean_flat_invariance_is_exact() {
        let gen = CurveGenerator::new(1, CurveFamily::Mixed, 8, ChartBox::cube(2, 3.0)).unwrap();
        let field = NormField::constant(MinkowskiNorm::euclidean(2));
        let r = check_holonomy_invariance(&field, &Connection::flat(2).unwrap(), &gen, &quick()).unwrap();
        assert!(r.pass && r.max_abs_error <= 1e-12);
    }

    #[test]
    fn rescaling_connection_fails_with_factor() {
        let conn = Connection::in_coordinates(2, |_| Christoffels::from_fn(2, |i, j, k| ((i, j, k) == (0, 0, 0)) as u8 as f64)).unwrap();
        let gen = CurveGenerator::new(1, CurveFamily::Segments, 0, ChartBox::cube(2, 3.0))
            .unwrap()
            .with_explicit(vec![Curve::segment(&pt(0.0, 0.0), &pt(1.0, 0.0)).unwrap()]);
        let field = NormField::constant(MinkowskiNorm::euclidean(2));
        let r = check_holonomy_invariance(&field, &conn, &gen, &CheckOptions::default()).unwrap();
        assert!(!r.pass);
        assert!((r.witness["ratio"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-4);
        assert_eq!(r.witness["t"].as_f64().unwrap(), 1.0);
    }

    #[test]
    fn compat_checks() {
        let opts = CheckOptions::default();
        let par = frame_parallelism(&section5_frame()).unwrap();
        let pairs = sample_pairs(&ChartBox::cube(2, 5.0), 30, 3);
        let r = check_parallelism_compat(&section5_field(), &par, &pairs, &CheckOptions { tol: 1e-9, ..opts }).unwrap();
        assert!(r.pass, "{r:?}");
        let diag: Vec<_> = pairs.iter().map(|(p, _)| (p.clone(), p.clone())).collect();
        let scaled = NormField::constant(MinkowskiNorm::euclidean(2)).with_scale(Expr::parse("exp(x)", &["x", "y"]).unwrap());
        let translation = frame_parallelism(&Frame::coordinate(2).unwrap()).unwrap();
        assert!(check_parallelism_compat(&scaled, &translation, &diag, &opts).unwrap().pass);
        let r = check_parallelism_compat(&scaled, &translation, &[(pt(0.0, 0.0), pt(1.0, 0.0))], &opts).unwrap();
        assert!(!r.pass);
        assert!((r.witness["ratio"].as_f64().unwrap() - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn compalg_criterion() {
        let frame = section5_frame();
        let par = frame_parallelism(&frame).unwrap();
        let region = ChartBox::cube(2, 3.0);
        let opts = CheckOptions { vectors: 5, ..CheckOptions::default() };
        let r = check_compalg_criterion(&section5_field(), &par, &Connection::frame_parallel(frame.clone()), &region, 4, &opts).unwrap();
        assert!(r.pass);
        assert!(r.witness["max_endomorphism_entry"].as_f64().unwrap() <= 1e-10);
        let perturbed = Connection::constant_in_frame(
            frame,
            Christoffels::from_fn(2, |i, j, k| ((i, j, k) == (0, 0, 0)) as u8 as f64),
        )
        .unwrap();
        let r = check_compalg_criterion(&section5_field(), &par, &perturbed, &region, 4, &opts).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn obstruction_values() {
        let points = sample_points(&ChartBox::cube(2, 3.0), 10, 1);
        let b = berwald_obstruction(&Connection::frame_parallel(section5_frame()), &points).unwrap();
        assert!((b.max - 1.0).abs() < 1e-9);
        assert_eq!(berwald_obstruction(&Connection::flat(2).unwrap(), &points).unwrap().max, 0.0);
    }

    #[test]
    fn uniqueness_and_precondition() {
        let gen = CurveGenerator::new(2, CurveFamily::Mixed, 4, ChartBox::cube(2, 2.0)).unwrap();
        let conn = Connection::frame_parallel(section5_frame());
        let r = check_uniqueness(&section5_field(), &conn, &conn, &gen, &quick()).unwrap();
        assert!(r.pass && r.max_abs_error == 0.0);
        let eucl = NormField::constant(MinkowskiNorm::euclidean(2));
        let flat = Connection::flat(2).unwrap();
        assert!(matches!(
            check_uniqueness(&eucl, &flat, &flat, &gen, &quick()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn verdicts() {
        let gen = CurveGenerator::new(3, CurveFamily::Mixed, 4, ChartBox::cube(2, 2.0)).unwrap();
        let par = frame_parallelism(&section5_frame()).unwrap();
        let cover = CoveringParallelism::new(vec![(ChartBox::whole(2), par)], Some(&gen.region)).unwrap();
        let v = generalized_berwald_verdict(&section5_field(), &BerwaldEvidence::Cover(cover), &gen, 10, &quick()).unwrap();
        assert_eq!(v.verdict, Verdict::Certified);
        assert_eq!(v.annotation, Some(BerwaldAnnotation::NotBerwald));

        let translation = frame_parallelism(&Frame::coordinate(2).unwrap()).unwrap();
        let cover = CoveringParallelism::new(vec![(ChartBox::whole(2), translation)], Some(&gen.region)).unwrap();
        let eucl = NormField::constant(MinkowskiNorm::euclidean(2));
        let v = generalized_berwald_verdict(&eucl, &BerwaldEvidence::Cover(cover.clone()), &gen, 10, &quick()).unwrap();
        assert_eq!(v.annotation, Some(BerwaldAnnotation::Berwald));
        assert_eq!(v.torsion_max, Some(0.0));

        let scaled = eucl.clone().with_scale(Expr::parse("exp(x)", &["x", "y"]).unwrap());
        let v = generalized_berwald_verdict(&scaled, &BerwaldEvidence::Cover(cover), &gen, 10, &quick()).unwrap();
        assert_eq!(v.verdict, Verdict::NotCertified);
        assert!(!v.reports[0].pass);

        let evidence = BerwaldEvidence::Connection {
            conn: Connection::frame_parallel(section5_frame()),
            region: ChartBox::cube(2, 2.0),
            parts: 1,
        };
        let v = generalized_berwald_verdict(&section5_field(), &evidence, &gen, 10, &quick()).unwrap();
        assert_eq!(v.verdict, Verdict::Certified, "{v:?}");
    }
}
