use std::sync::Arc;

use holonomy::connections::{nabla_p, Connection};
use holonomy::geometry::{lie_bracket, ChartBox, ChartPoint, Expr, Frame, TangentVector, VectorField};
use holonomy::parallelism::{bump_partition, frame_parallelism};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const VARS: [&str; 2] = ["x", "y"];

fn field(src: [&str; 2]) -> VectorField {
    VectorField::parse(&src).unwrap()
}

fn fields() -> Vec<VectorField> {
    vec![
        field(["x*y", "sin(x)"]),
        field(["1 + y^2", "exp(x/3)"]),
        field(["cos(x*y)", "x - y"]),
    ]
}

fn combo(a: &VectorField, s: f64, b: &VectorField, t: f64) -> VectorField {
    a.combine(s, b, t).unwrap()
}

fn coeff() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

fn point() -> impl Strategy<Value = ChartPoint> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| ChartPoint::from([x, y]))
}

fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol * (1.0 + a.amax().max(b.amax()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_bilinear_and_antisymmetric(s in coeff(), t in coeff(), p in point()) {
        let f = fields();
        let lhs = lie_bracket(&combo(&f[0], s, &f[1], t), &f[2]).unwrap().value(&p).unwrap();
        let rhs = lie_bracket(&f[0], &f[2]).unwrap().value(&p).unwrap() * s
            + lie_bracket(&f[1], &f[2]).unwrap().value(&p).unwrap() * t;
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let xy = lie_bracket(&f[0], &f[1]).unwrap().value(&p).unwrap();
        let yx = lie_bracket(&f[1], &f[0]).unwrap().value(&p).unwrap();
        prop_assert!(close(&xy, &(-yx), 1e-14));
    }

    #[test]
    fn bracket_satisfies_jacobi(p in point()) {
        let f = fields();
        let cyc = |a: usize, b: usize, c: usize| {
            lie_bracket(&f[a], &lie_bracket(&f[b], &f[c]).unwrap()).unwrap().value(&p).unwrap()
        };
        let total = cyc(0, 1, 2) + cyc(1, 2, 0) + cyc(2, 0, 1);
        prop_assert!(total.amax() <= 1e-10, "{}", total);
    }

    #[test]
    fn bracket_with_function_multiple(p in point()) {
        // [X, gY] = X(g) Y + g [X, Y]
        let f = fields();
        let g: Arc<Expr> = Expr::parse("x^2 + y", &VARS).unwrap();
        let lhs = lie_bracket(&f[0], &f[1].scaled_by(&g)).unwrap().value(&p).unwrap();
        let xv = f[0].value(&p).unwrap();
        let xg = xv[0] * g.derivative(0).eval(p.coords()) + xv[1] * g.derivative(1).eval(p.coords());
        let rhs = f[1].value(&p).unwrap() * xg + lie_bracket(&f[0], &f[1]).unwrap().value(&p).unwrap() * g.eval(p.coords());
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn nabla_p_is_linear_in_v(s in coeff(), t in coeff(), p in point(), a in proptest::array::uniform2(coeff()), b in proptest::array::uniform2(coeff())) {
        let frame = Frame::parse(&[vec!["cos(x*y)", "sin(x*y)"], vec!["-sin(x*y)", "cos(x*y)"]]).unwrap();
        let par = frame_parallelism(&Frame::parse(&[vec!["x", "1"], vec!["-1", "0"]]).unwrap()).unwrap();
        let conn = Connection::frame_parallel(frame);
        let tv = |c: [f64; 2]| TangentVector::new(p.clone(), DVector::from_column_slice(&c)).unwrap();
        let mix = [s * a[0] + t * b[0], s * a[1] + t * b[1]];
        let lhs = nabla_p(&conn, &par, &tv(mix)).unwrap().matrix;
        let rhs: DMatrix<f64> = nabla_p(&conn, &par, &tv(a)).unwrap().matrix * s + nabla_p(&conn, &par, &tv(b)).unwrap().matrix * t;
        prop_assert!((&lhs - &rhs).amax() <= 1e-10 * (1.0 + rhs.amax()));
    }

    #[test]
    fn parallelism_cocycle(p in point(), q in point(), r in point()) {
        let par = frame_parallelism(&Frame::parse(&[vec!["1 + x^2", "y"], vec!["-y", "1 + x^2"]]).unwrap()).unwrap();
        let lhs = par.transfer(&r, &q).unwrap() * par.transfer(&p, &r).unwrap();
        let rhs = par.transfer(&p, &q).unwrap();
        prop_assert!((&lhs - &rhs).amax() <= 1e-10 * (1.0 + rhs.amax()));
        prop_assert!((par.transfer(&p, &p).unwrap() - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-12);
    }

    #[test]
    fn partition_sums_to_one(p in point(), cut in -0.5..0.5f64) {
        let boxes = [
            ChartBox::new([-3.0, -3.0], [cut + 0.5, 3.0]).unwrap(),
            ChartBox::new([cut - 0.5, -3.0], [3.0, 1.0]).unwrap(),
            ChartBox::new([cut - 0.5, 0.0], [3.0, 3.0]).unwrap(),
        ];
        let part = bump_partition(&boxes, Some(&ChartBox::cube(2, 2.9))).unwrap();
        let w = part.weights(p.coords()).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (wi, b) in w.iter().zip(&boxes) {
            prop_assert!(*wi >= 0.0);
            if !b.contains(p.coords()) {
                prop_assert_eq!(*wi, 0.0);
            }
        }
    }
}
