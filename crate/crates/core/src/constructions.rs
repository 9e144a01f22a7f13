//! Parallelisms from compatible connections (radial transport in a convex
//! chart) and connections from covering parallelisms (blending the
//! connections that make each member's frame parallel).

use nalgebra::DMatrix;

use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::geometry::{ChartBox, ChartPoint, Curve, Domain, Frame, FrameJet};
use crate::parallelism::{frame_parallelism, probe_points, CoveringParallelism, Parallelism};
use crate::transport::transport_samples;

/// Central-difference step for derivatives of transported frames.
pub const FRAME_FD_STEP: f64 = 1e-5;

/// A bounded box with a distinguished centre; convex in coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexChartRegion {
    center: ChartPoint,
    bounds: ChartBox,
}

impl ConvexChartRegion {
    /// The region `bounds` centred at the midpoint of the box.
    pub fn new(bounds: ChartBox) -> Result<Self> {
        let center = bounds
            .center()
            .ok_or_else(|| Error::InvalidArgument("convex region must be a bounded box".into()))?;
        Ok(Self { center, bounds })
    }

    pub fn with_center(center: ChartPoint, bounds: ChartBox) -> Result<Self> {
        if !bounds.contains(center.coords()) {
            return Err(Error::OutsideDomain {
                point: center.coords().to_vec(),
            });
        }
        Ok(Self { center, bounds })
    }

    pub fn center(&self) -> &ChartPoint {
        &self.center
    }

    pub fn bounds(&self) -> &ChartBox {
        &self.bounds
    }
}

fn radial_transport(conn: &Connection, center: &[f64], q: &[f64], step: f64) -> Result<DMatrix<f64>> {
    if center == q {
        return Ok(DMatrix::identity(center.len(), center.len()));
    }
    let segment = Curve::segment(&ChartPoint::new(center.to_vec()), &ChartPoint::new(q.to_vec()))?;
    Ok(transport_samples(conn, &segment, &[1.0], step)?.last().clone())
}

/// The parallelism with trivialisation `[φ_q] = P_{γ_q}`, where `γ_q` is the
/// segment from the region's centre to `q`. Frame derivatives are central
/// differences of the transported matrices.
pub fn parallelism_from_connection(conn: &Connection, region: &ConvexChartRegion, step: f64) -> Result<Parallelism> {
    let n = conn.dim();
    if region.bounds.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: region.bounds.dim(),
        });
    }
    let domain = conn
        .domain()
        .intersect(&Domain::from(region.bounds.clone()))
        .ok_or_else(|| Error::InvalidArgument("region outside the connection's domain".into()))?;
    // surface transport failures now rather than as NaN matrices later
    for q in probe_points(&Domain::from(region.bounds.clone())) {
        radial_transport(conn, region.center.coords(), q.coords(), step)?;
    }
    let center = region.center.coords().to_vec();
    let value = {
        let (conn, center) = (conn.clone(), center.clone());
        move |q: &[f64]| {
            radial_transport(&conn, &center, q, step).unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN))
        }
    };
    let value_for_jet = value.clone();
    let jet = move |q: &[f64]| {
        let partials = (0..n)
            .map(|l| {
                let mut plus = q.to_vec();
                let mut minus = q.to_vec();
                plus[l] += FRAME_FD_STEP;
                minus[l] -= FRAME_FD_STEP;
                (value_for_jet(&plus) - value_for_jet(&minus)) / (2.0 * FRAME_FD_STEP)
            })
            .collect();
        FrameJet {
            value: value_for_jet(q),
            partials,
        }
    };
    frame_parallelism(&Frame::from_matrix_fns(n, domain, value, jet)?)
}

/// `∇ = Σ_α f_α ∇^α`, where `∇^α` has zero Christoffel symbols in the
/// `P_α`-parallel frame and `(f_α)` is the cover's partition of unity.
pub fn connection_from_covering_parallelism(cover: &CoveringParallelism) -> Result<Connection> {
    let members = cover
        .members()
        .iter()
        .map(|(b, p)| Connection::frame_parallel(p.frame().clone()).with_domain(Domain::from(b.clone())))
        .collect::<Result<Vec<_>>>()?;
    let partition = cover.partition().clone();
    Connection::blend(cover.domain(), move |p| partition.weights(p), members)
}

/// Splits a bounded box into `parts` cells per axis, each widened by an
/// eighth of its width on both sides so neighbours overlap by a quarter.
pub fn decompose_region(region: &ChartBox, parts: usize) -> Result<Vec<ChartBox>> {
    if !region.is_bounded() || parts == 0 {
        return Err(Error::InvalidArgument("decomposition needs a bounded box and parts ≥ 1".into()));
    }
    let n = region.dim();
    let widths: Vec<f64> = (0..n)
        .map(|i| (region.upper()[i] - region.lower()[i]) / parts as f64)
        .collect();
    (0..parts.pow(n as u32))
        .map(|mut idx| {
            let mut lower = Vec::with_capacity(n);
            let mut upper = Vec::with_capacity(n);
            for i in 0..n {
                let k = (idx % parts) as f64;
                idx /= parts;
                let l = region.lower()[i] + k * widths[i];
                lower.push(l - widths[i] / 8.0);
                upper.push(l + widths[i] * 9.0 / 8.0);
            }
            ChartBox::new(lower, upper)
        })
        .collect()
}

/// The covering parallelism obtained by running
/// [`parallelism_from_connection`] on each cell of
/// [`decompose_region`]`(region, parts)`.
pub fn covering_from_connection(conn: &Connection, region: &ChartBox, parts: usize, step: f64) -> Result<CoveringParallelism> {
    let members = decompose_region(region, parts)?
        .into_iter()
        .map(|b| {
            let par = parallelism_from_connection(conn, &ConvexChartRegion::new(b.clone())?, step)?;
            Ok((b, par))
        })
        .collect::<Result<Vec<_>>>()?;
    CoveringParallelism::new(members, Some(region))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::Christoffels;
    use crate::transport::parallel_transport;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn section5_frame() -> Frame {
        Frame::parse(&[vec!["x", "1"], vec!["-1", "0"]]).unwrap()
    }

    fn pt(x: f64, y: f64) -> ChartPoint {
        ChartPoint::from([x, y])
    }

    #[test]
    fn flat_connection_gives_translation() {
        let region = ConvexChartRegion::new(ChartBox::cube(2, 2.0)).unwrap();
        let par = parallelism_from_connection(&Connection::flat(2).unwrap(), &region, 1e-2).unwrap();
        assert_eq!(par.transfer(&pt(0.3, 1.0), &pt(-1.5, 0.2)).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn section5_parallelism_from_transport() {
        let frame = section5_frame();
        let conn = Connection::frame_parallel(frame.clone());
        let region = ConvexChartRegion::new(ChartBox::cube(2, 5.0)).unwrap();
        let built = parallelism_from_connection(&conn, &region, 1e-3).unwrap();
        let reference = frame_parallelism(&frame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (p, q) = (region.bounds().sample(&mut rng), region.bounds().sample(&mut rng));
            let diff = built.transfer(&p, &q).unwrap() - reference.transfer(&p, &q).unwrap();
            assert!(diff.amax() < 1e-7, "{p:?} {q:?}: {diff}");
        }
        // the transported frame has zero symbols for the connection it came from
        let g = crate::connections::christoffels_in_frame(&conn, built.frame(), &pt(1.0, -2.0)).unwrap();
        assert!(g.amax() < 1e-6, "{g:?}");
    }

    #[test]
    fn region_validation() {
        assert!(ConvexChartRegion::new(ChartBox::whole(2)).is_err());
        assert!(ConvexChartRegion::with_center(pt(3.0, 0.0), ChartBox::cube(2, 1.0)).is_err());
    }

    #[test]
    fn single_member_section5_cover() {
        let frame = section5_frame();
        let cover = CoveringParallelism::new(
            vec![(ChartBox::whole(2), frame_parallelism(&frame).unwrap())],
            Some(&ChartBox::cube(2, 3.0)),
        )
        .unwrap();
        let conn = connection_from_covering_parallelism(&cover).unwrap();
        let g = conn.coordinate_christoffels(&pt(0.7, -1.3)).unwrap();
        let expected = Christoffels::from_fn(2, |i, j, k| if (i, j, k) == (0, 0, 1) { -1.0 } else { 0.0 });
        assert!(g.max_diff(&expected) < 1e-14);
    }

    #[test]
    fn identical_translation_members_blend_flat() {
        let inf = f64::INFINITY;
        let translation = frame_parallelism(&Frame::coordinate(2).unwrap()).unwrap();
        let cover = CoveringParallelism::new(
            vec![
                (ChartBox::new([-inf, -inf], [1.0, inf]).unwrap(), translation.clone()),
                (ChartBox::new([-1.0, -inf], [inf, inf]).unwrap(), translation),
            ],
            Some(&ChartBox::cube(2, 4.0)),
        )
        .unwrap();
        let conn = connection_from_covering_parallelism(&cover).unwrap();
        for x in [-3.0, -0.5, 0.0, 0.9, 3.0] {
            assert_eq!(conn.coordinate_christoffels(&pt(x, 0.4)).unwrap().amax(), 0.0);
        }
        let curve = Curve::segment(&pt(-3.0, 0.0), &pt(3.0, 1.0)).unwrap();
        let op = parallel_transport(&conn, &curve, 1.0, 1e-2).unwrap();
        assert_eq!(op.matrix, DMatrix::identity(2, 2));
    }

    #[test]
    fn decomposition_overlaps_by_a_quarter() {
        let cells = decompose_region(&ChartBox::cube(2, 2.0), 2).unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].lower(), &[-2.25, -2.25]);
        assert_eq!(cells[0].upper(), &[0.25, 0.25]);
        assert_eq!(cells[1].lower(), &[-0.25, -2.25]);
        assert!(decompose_region(&ChartBox::whole(2), 2).is_err());
    }
}
