//! Quadrature rules on the reference triangle and on intervals.
//!
//! Triangle rules are given in barycentric coordinates with weights summing
//! to one, so a physical integral is `area * Σ w f(x(λ))`.

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Rule exact for polynomials of the given degree (1..=5).
    pub fn of_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => Self {
                points: vec![[1.0 / 3.0; 3]],
                weights: vec![1.0],
                degree: 1,
            },
            2 => {
                let a = 1.0 / 6.0;
                let b = 2.0 / 3.0;
                Self {
                    points: vec![[b, a, a], [a, b, a], [a, a, b]],
                    weights: vec![1.0 / 3.0; 3],
                    degree: 2,
                }
            }
            3 | 4 => Self::dunavant4(),
            _ => Self::dunavant5(),
        }
    }

    fn dunavant4() -> Self {
        let a = 0.445_948_490_915_965;
        let wa = 0.223_381_589_678_011;
        let b = 0.091_576_213_509_771;
        let wb = 0.109_951_743_655_322;
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (x, w) in [(a, wa), (b, wb)] {
            let y = 1.0 - 2.0 * x;
            points.extend([[y, x, x], [x, y, x], [x, x, y]]);
            weights.extend([w; 3]);
        }
        Self::normalized(points, weights, 4)
    }

    fn dunavant5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![0.225];
        for (x, w) in [(a1, w1), (a2, w2)] {
            let y = 1.0 - 2.0 * x;
            points.extend([[y, x, x], [x, y, x], [x, x, y]]);
            weights.extend([w; 3]);
        }
        Self::normalized(points, weights, 5)
    }

    fn normalized(points: Vec<[f64; 3]>, mut weights: Vec<f64>, degree: usize) -> Self {
        let s: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= s;
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton's method
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫_T x^a y^b over the unit right triangle = a! b! / (a+b+2)!
    fn exact_monomial(a: u32, b: u32) -> f64 {
        let f = |k: u32| (1..=k).map(f64::from).product::<f64>();
        f(a) * f(b) / f(a + b + 2)
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        for deg in 1..=5 {
            let rule = TriangleRule::of_degree(deg);
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * 0.5 * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum();
                    let exact = exact_monomial(a, b);
                    assert!((approx - exact).abs() < 1e-14, "deg {deg} x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n {n} k {k}");
            }
        }
    }
}
