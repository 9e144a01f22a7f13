use holonomy::connections::Connection;
use holonomy::constructions::{connection_from_covering_parallelism, parallelism_from_connection, ConvexChartRegion};
use holonomy::fixtures::{rotated_blend, section5, Fixture};
use holonomy::geometry::{random_unit, sphere_grid, ChartBox, ChartPoint, Curve, Domain};
use holonomy::norms::NormField;
use holonomy::parallelism::CoveringParallelism;
use holonomy::transport::{matrix_ode_solve, parallel_transport, phi_curve, transport_samples};
use holonomy::verification::{
    check_holonomy_invariance, check_parallelism_compat, generalized_berwald_verdict, sample_pairs, BerwaldEvidence,
    CheckOptions, CurveFamily, CurveGenerator, Verdict,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pt(x: f64, y: f64) -> ChartPoint {
    ChartPoint::from([x, y])
}

fn curves(f: &Fixture, count: usize, seed: u64) -> Vec<Curve> {
    CurveGenerator::new(seed, CurveFamily::Mixed, count, f.region.clone())
        .unwrap()
        .generate(f.connection.domain())
        .unwrap()
}

fn end_transport(conn: &Connection, c: &Curve, step: f64) -> DMatrix<f64> {
    transport_samples(conn, c, &[1.0], step).unwrap().last().clone()
}

#[test]
fn rk4_is_fourth_order() {
    for fixture in [section5().unwrap(), rotated_blend().unwrap()] {
        let curve = Curve::arc(&pt(0.0, 0.0), 2.0, 0.3, 4.0).unwrap();
        let h = 0.1;
        let reference = end_transport(&fixture.connection, &curve, h / 4.0);
        let e1 = (end_transport(&fixture.connection, &curve, h) - &reference).amax();
        let e2 = (end_transport(&fixture.connection, &curve, h / 2.0) - &reference).amax();
        assert!(e1 > 1e-12, "{}: error too small to measure", fixture.name);
        assert!(e1 / e2 >= 8.0, "{}: ratio {}", fixture.name, e1 / e2);
    }
    // also for a generic time-dependent generator
    let a = |t: f64| DMatrix::from_row_slice(2, 2, &[0.3 * t, -(2.0 * t).cos(), 1.0 + t * t, -0.1]);
    let reference = matrix_ode_solve(a, 1.0, 0.025).unwrap().last().clone();
    let e1 = (matrix_ode_solve(a, 1.0, 0.1).unwrap().last() - &reference).amax();
    let e2 = (matrix_ode_solve(a, 1.0, 0.05).unwrap().last() - &reference).amax();
    assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
}

#[test]
fn phi_has_positive_determinant() {
    for fixture in [section5().unwrap(), rotated_blend().unwrap()] {
        for c in curves(&fixture, 10, 4) {
            let phi = phi_curve(&fixture.parallelism, &fixture.connection, &c, 1e-2).unwrap();
            assert!(phi.samples().iter().all(|(_, m)| m.determinant() > 0.0));
        }
    }
}

/// `f∘Φ(t) = f` and `F_{γ(t)}∘P_γᵗ = F_{γ(0)}` measure the same discrepancy.
#[test]
fn model_and_manifold_invariance_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for fixture in [section5().unwrap(), rotated_blend().unwrap()] {
        let f = fixture.model_norm().unwrap();
        for c in curves(&fixture, 5, 6) {
            let phi = phi_curve(&fixture.parallelism, &fixture.connection, &c, 1e-2).unwrap();
            let transport = transport_samples(
                &fixture.connection,
                &c,
                &phi.samples().iter().map(|(t, _)| *t).collect::<Vec<_>>(),
                1e-2,
            )
            .unwrap();
            let phi0 = fixture.parallelism.trivialization(&c.point(0.0)).unwrap();
            let f0 = fixture.norm_field.at(&c.point(0.0)).unwrap();
            for ((t, phi_t), (_, p_t)) in phi.samples().iter().zip(transport.samples()).step_by(10) {
                let ft = fixture.norm_field.at(&c.point(*t)).unwrap();
                for _ in 0..50 {
                    let u = random_unit(&mut rng, 2);
                    let model = f.eval(&(phi_t * &u)) - f.eval(&u);
                    let v = &phi0 * &u;
                    let manifold = ft.eval(&(p_t * &v)) - f0.eval(&v);
                    assert!((model - manifold).abs() <= 1e-8, "{}: {model} vs {manifold}", fixture.name);
                }
            }
        }
    }
}

/// `A(t) = Φ′(t) Φ(t)⁻¹` recovered from Φ lies in the Lie algebra: zero for
/// the discrete group, antisymmetric for O(2).
#[test]
fn recovered_generator_lies_in_lie_algebra() {
    for (fixture, antisymmetric) in [(section5().unwrap(), false), (rotated_blend().unwrap(), true)] {
        for c in curves(&fixture, 5, 12) {
            let phi = phi_curve(&fixture.parallelism, &fixture.connection, &c, 1e-3).unwrap();
            let s = phi.samples();
            for k in (2..s.len() - 2).step_by(50) {
                let h = s[k + 1].0 - s[k].0;
                // five-point stencil
                let deriv = (&s[k - 2].1 - &s[k + 2].1 + (&s[k + 1].1 - &s[k - 1].1) * 8.0) / (12.0 * h);
                let a = deriv * s[k].1.clone().try_inverse().unwrap();
                let defect = if antisymmetric { (&a + a.transpose()).amax() } else { a.amax() };
                assert!(defect < 1e-8, "{}: {a}", fixture.name);
            }
        }
    }
}

#[test]
fn round_trip_reproduces_transport() {
    let fixture = section5().unwrap();
    let region = ConvexChartRegion::new(fixture.region.clone()).unwrap();
    let par = parallelism_from_connection(&fixture.connection, &region, 1e-2).unwrap();
    let cover = CoveringParallelism::new(vec![(fixture.region.clone(), par)], Some(&fixture.region)).unwrap();
    let rebuilt = connection_from_covering_parallelism(&cover).unwrap();
    let gen = CurveGenerator::new(21, CurveFamily::Mixed, 50, fixture.region.scaled(0.95)).unwrap();
    for c in gen.generate(&Domain::from(fixture.region.clone())).unwrap() {
        let a = end_transport(&fixture.connection, &c, 1e-2);
        let b = end_transport(&rebuilt, &c, 1e-2);
        assert!((&a - &b).amax() <= 1e-6, "{:?}: {}", c.kind(), (a - b).amax());
    }
}

#[test]
fn round_trip_preserves_euclidean_invariance() {
    let fixture = rotated_blend().unwrap();
    let region = ConvexChartRegion::new(fixture.region.clone()).unwrap();
    let par = parallelism_from_connection(&fixture.connection, &region, 1e-2).unwrap();
    let cover = CoveringParallelism::new(vec![(fixture.region.clone(), par)], Some(&fixture.region)).unwrap();
    let rebuilt = connection_from_covering_parallelism(&cover).unwrap();
    let gen = CurveGenerator::new(22, CurveFamily::Mixed, 10, fixture.region.scaled(0.95)).unwrap();
    let opts = CheckOptions { step: 1e-2, ..CheckOptions::default() };
    let r = check_holonomy_invariance(&fixture.norm_field, &rebuilt, &gen, &opts).unwrap();
    assert!(r.pass, "{r:?}");
}

fn max_rel_deviation(field: &NormField, conn: &Connection, c: &Curve) -> f64 {
    let p = parallel_transport(conn, c, 1.0, 1e-3).unwrap().matrix;
    let (f0, f1) = (field.at(&c.point(0.0)).unwrap(), field.at(&c.point(1.0)).unwrap());
    sphere_grid(2, 400)
        .iter()
        .map(|v| (f1.eval(&(&p * v)) - f0.eval(v)).abs() / f0.eval(v))
        .fold(0.0, f64::max)
}

#[test]
fn invariance_glues_along_pieces() {
    for fixture in [section5().unwrap(), rotated_blend().unwrap()] {
        // crosses both chart boundaries x = ±1 of the blend
        let c = Curve::sinusoidal(&pt(-2.5, -1.0), &pt(2.5, 1.5), 0.4, 2.0).unwrap();
        let whole = max_rel_deviation(&fixture.norm_field, &fixture.connection, &c);
        let pieces: f64 = [(0.0, 0.3), (0.3, 0.7), (0.7, 1.0)]
            .iter()
            .map(|(a, b)| max_rel_deviation(&fixture.norm_field, &fixture.connection, &c.restrict(*a, *b)))
            .sum();
        assert!(whole <= pieces + 1e-9, "{}: {whole} > {pieces}", fixture.name);
    }
}

/// Both directions of the characterisation at fixture scale.
#[test]
fn theorem_directions_agree() {
    let opts = CheckOptions { step: 1e-2, ..CheckOptions::default() };
    for fixture in [section5().unwrap(), rotated_blend().unwrap()] {
        let gen = CurveGenerator::new(5, CurveFamily::Mixed, 10, fixture.region.clone()).unwrap();
        let forward = BerwaldEvidence::Connection {
            conn: fixture.connection.clone(),
            region: fixture.region.clone(),
            parts: 2,
        };
        let v = generalized_berwald_verdict(&fixture.norm_field, &forward, &gen, 20, &opts).unwrap();
        assert_eq!(v.verdict, Verdict::Certified, "{}: {v:?}", fixture.name);
        let backward = BerwaldEvidence::Cover(fixture.cover.clone().unwrap());
        let v = generalized_berwald_verdict(&fixture.norm_field, &backward, &gen, 20, &opts).unwrap();
        assert_eq!(v.verdict, Verdict::Certified, "{}: {v:?}", fixture.name);
    }
}

#[test]
fn reports_are_deterministic() {
    let fixture = section5().unwrap();
    let gen = CurveGenerator::new(9, CurveFamily::Mixed, 10, fixture.region.clone()).unwrap();
    let opts = CheckOptions { step: 1e-2, ..CheckOptions::default() };
    let a = check_holonomy_invariance(&fixture.norm_field, &fixture.connection, &gen, &opts).unwrap();
    let b = check_holonomy_invariance(&fixture.norm_field, &fixture.connection, &gen, &opts).unwrap();
    assert_eq!(a, b);
    let pairs = sample_pairs(&ChartBox::cube(2, 3.0), 20, 1);
    let a = check_parallelism_compat(&fixture.norm_field, &fixture.parallelism, &pairs, &opts).unwrap();
    let b = check_parallelism_compat(&fixture.norm_field, &fixture.parallelism, &pairs, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
