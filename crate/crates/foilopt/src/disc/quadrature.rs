//! Gauss quadrature rules on segments, triangles, and quadrilaterals.

/// 1D Gauss-Legendre rule on [-1, 1], exact to degree 2n - 1.
pub fn gauss_1d(n: usize) -> Vec<(f64, f64)> {
    match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30.0f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => panic!("unsupported 1D Gauss order {n}"),
    }
}

/// Symmetric triangle rule in barycentric coordinates `(l0, l1, l2, w)`,
/// weights summing to 1 (multiply by the element area).
pub fn triangle_rule(degree: usize) -> Vec<(f64, f64, f64, f64)> {
    match degree {
        0 | 1 => vec![(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0)],
        2 => {
            let w = 1.0 / 3.0;
            vec![
                (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, w),
                (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, w),
                (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, w),
            ]
        }
        3 | 4 => {
            // Dunavant degree-4 rule, 6 points
            let a = 0.445948490915965;
            let wa = 0.223381589678011;
            let b = 0.091576213509771;
            let wb = 0.109951743655322;
            let mut pts = Vec::with_capacity(6);
            for (c, w) in [(a, wa), (b, wb)] {
                let d = 1.0 - 2.0 * c;
                pts.push((d, c, c, w));
                pts.push((c, d, c, w));
                pts.push((c, c, d, w));
            }
            pts
        }
        5 => {
            // Dunavant degree-5 rule, 7 points
            let a = (6.0 - 15.0f64.sqrt()) / 21.0;
            let wa = (155.0 - 15.0f64.sqrt()) / 1200.0;
            let b = (6.0 + 15.0f64.sqrt()) / 21.0;
            let wb = (155.0 + 15.0f64.sqrt()) / 1200.0;
            let mut pts = vec![(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0)];
            for (c, w) in [(a, wa), (b, wb)] {
                let d = 1.0 - 2.0 * c;
                pts.push((d, c, c, w));
                pts.push((c, d, c, w));
                pts.push((c, c, d, w));
            }
            pts
        }
        _ => panic!("unsupported triangle rule degree {degree}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_1d_integrates_polynomials() {
        for n in 1..=4 {
            let rule = gauss_1d(n);
            for deg in 0..=(2 * n - 1) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn triangle_rules_integrate_monomials() {
        // exact integral of l0^a l1^b over the unit triangle:
        // a! b! / (a + b + 2)!  (area 1/2 normalization handled by weights)
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        for degree in [2usize, 4, 5] {
            let rule = triangle_rule(degree);
            let wsum: f64 = rule.iter().map(|p| p.3).sum();
            assert!((wsum - 1.0).abs() < 1e-13);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2) * 2.0;
                    let got: f64 = rule
                        .iter()
                        .map(|&(l0, l1, _, w)| w * l0.powi(a as i32) * l1.powi(b as i32))
                        .sum();
                    assert!(
                        (got - exact).abs() < 1e-13,
                        "degree={degree} a={a} b={b}: {got} vs {exact}"
                    );
                }
            }
        }
    }
}
