//! Quadrature on the reference triangle and on line segments.

/// Points are barycentric; weights sum to the reference-triangle area 1/2,
/// so a physical integral is `2 |K| * sum(w_q f(x_q))`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// 12-point symmetric rule (Dunavant), exact through degree 6.
    pub fn degree6() -> Self {
        const ORBIT3: [(f64, f64); 2] = [
            (0.063089014491502228340331602870819, 0.050844906370206816920936809106869),
            (0.24928674517091042129163855310702, 0.11678627572637936602528961138558),
        ];
        const ORBIT6: (f64, f64, f64) = (
            0.053145049844816947353249671631398,
            0.31035245103378440541660773395655,
            0.082851075618373575193553456420442,
        );
        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        for (a, w) in ORBIT3 {
            let b = 1.0 - 2.0 * a;
            for p in [[b, a, a], [a, b, a], [a, a, b]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        let (a, b, w) = ORBIT6;
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            points.push(p);
            weights.push(0.5 * w);
        }
        Self { points, weights, degree: 6 }
    }

    /// Three edge-midpoint rule, exact through degree 2.
    pub fn degree2() -> Self {
        Self {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Three-point Gauss-Legendre rule on `[0, 1]`, exact through degree 5.
pub fn gauss_legendre_3() -> ([f64; 3], [f64; 3]) {
    let r = (0.6f64).sqrt() / 2.0;
    ([0.5 - r, 0.5, 0.5 + r], [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact integral of `x^a y^b` over the reference triangle.
    fn monomial_integral(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn check_exactness(rule: &QuadratureRule) {
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 0.5).abs() < 1e-15);
        for a in 0..=rule.degree {
            for b in 0..=rule.degree - a {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                let exact = monomial_integral(a, b);
                assert!((q - exact).abs() < 1e-14, "x^{a} y^{b}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn degree6_is_exact_on_monomials() {
        let rule = QuadratureRule::degree6();
        assert_eq!(rule.len(), 12);
        check_exactness(&rule);
        for p in &rule.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(p.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn degree6_is_not_exact_beyond_its_degree() {
        let rule = QuadratureRule::degree6();
        let q: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[1].powi(7)).sum();
        assert!((q - monomial_integral(7, 0)).abs() > 1e-8);
    }

    #[test]
    fn degree2_is_exact_on_monomials() {
        check_exactness(&QuadratureRule::degree2());
    }

    #[test]
    fn gauss_legendre_integrates_quintics() {
        let (x, w) = gauss_legendre_3();
        for k in 0..=5 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15, "x^{k}");
        }
    }
}
