/// Evaluates the Lagrange interpolating polynomial through `points` at `x`.
///
/// Abscissae must be pairwise distinct.
pub fn lagrange_eval(points: &[(f64, f64)], x: f64) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(j, &(xj, yj))| {
            let basis: f64 =
                points.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &(xi, _))| (x - xi) / (xj - xi)).product();
            yj * basis
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_a_line() {
        let pts = [(0.0, 1.0), (1.0, 0.9), (2.0, 0.8), (3.0, 0.7)];
        assert!((lagrange_eval(&pts, 5.0) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_for_cubics(
            c in prop::array::uniform4(-2.0f64..2.0),
            xs in prop::collection::btree_set(-50i32..50, 4),
            x in -80.0f64..80.0,
        ) {
            let f = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
            let pts: Vec<(f64, f64)> = xs.iter().map(|&t| (t as f64, f(t as f64))).collect();
            let got = lagrange_eval(&pts, x);
            let want = f(x);
            prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0));
        }
    }
}
