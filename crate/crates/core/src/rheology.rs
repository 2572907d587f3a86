//! Power-law stress S(D) = (1 + |D|)^{q−2} D, its regularization
//! S^M(D) = S(D) + (1/M)(1 + |D|)^{p−2} D, and the hemolysis index.
//!
//! |·| is the Frobenius norm throughout. With that norm the structure
//! inequalities hold with
//!
//! * coercivity  S(A):A ≥ 2^{q−2}|A|^q − 2^{q−2},
//! * growth      |S(A)| ≤ 1 + |A|^{q−1},
//! * strict monotonicity (S(A) − S(B)):(A − B) > 0 for A ≠ B.
//!
//! For |A| ≥ 1 we have 1 + |A| ≤ 2|A|, so (1 + |A|)^{q−2} ≥ 2^{q−2}|A|^{q−2}
//! because q − 2 ≤ 0; for |A| < 1 the right-hand side of the coercivity
//! bound is negative. Growth follows from (1 + |A|)^{q−2} ≤ |A|^{q−2}.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Hölder conjugate s′ = s/(s − 1).
pub fn conjugate(s: f64) -> f64 {
    s / (s - 1.0)
}

/// Smallest admissible regularization exponent max(2, (5q/6)′).
pub fn min_regularization_exponent(q: f64) -> f64 {
    conjugate(5.0 * q / 6.0).max(2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RheologyParams {
    pub q: f64,
    pub p: f64,
    /// Increasing continuation values of M. Empty means no regularization.
    #[serde(default)]
    pub m_schedule: Vec<f64>,
}

impl RheologyParams {
    pub fn new(q: f64, p: f64, m_schedule: Vec<f64>) -> Result<Self> {
        let r = Self { q, p, m_schedule };
        r.validate()?;
        Ok(r)
    }

    /// Newtonian parameters without regularization.
    pub fn newtonian() -> Self {
        Self {
            q: 2.0,
            p: 2.5,
            m_schedule: Vec::new(),
        }
    }

    /// q ∈ (6/5, 2], p ≥ max(2, (5q/6)′), schedule strictly increasing and ≥ 1.
    /// q = 2 is the Newtonian reference case.
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.2 && self.q <= 2.0) {
            return Err(Error::Config(format!(
                "q must lie in (6/5, 2], got {}",
                self.q
            )));
        }
        let pmin = min_regularization_exponent(self.q);
        if !(self.p >= pmin - 1e-12) || !self.p.is_finite() {
            return Err(Error::Config(format!(
                "p = {} is below max(2, (5q/6)') = {pmin:.6} for q = {}",
                self.p, self.q
            )));
        }
        for (i, m) in self.m_schedule.iter().enumerate() {
            if !(*m >= 1.0) || !m.is_finite() {
                return Err(Error::Config(format!("m_schedule[{i}] = {m} must be finite and >= 1")));
            }
            if i > 0 && !(*m > self.m_schedule[i - 1]) {
                return Err(Error::Config("m_schedule must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    pub fn q_conjugate(&self) -> f64 {
        conjugate(self.q)
    }

    /// Effective viscosity ν with S^M(D) = ν D for |D| = `norm`.
    /// `inv_m` = 1/M, zero switches the regularization off.
    #[inline]
    pub fn viscosity(&self, norm: f64, inv_m: f64) -> f64 {
        let base = 1.0 + norm;
        let mut nu = if self.q == 2.0 { 1.0 } else { base.powf(self.q - 2.0) };
        if inv_m != 0.0 {
            nu += inv_m * if self.p == 2.0 { 1.0 } else { base.powf(self.p - 2.0) };
        }
        nu
    }
}

/// Square matrix stored row-major.
pub type Tensor<const N: usize> = [[f64; N]; N];

pub fn frobenius<const N: usize>(a: &Tensor<N>) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn contract<const N: usize>(a: &Tensor<N>, b: &Tensor<N>) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x * y).sum()
}

fn check_symmetric<const N: usize>(a: &Tensor<N>) -> Result<()> {
    let scale = frobenius(a).max(1.0);
    for i in 0..N {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "stress argument is not symmetric: a[{i}][{j}] = {}, a[{j}][{i}] = {}",
                    a[i][j], a[j][i]
                )));
            }
        }
    }
    Ok(())
}

fn scaled<const N: usize>(a: &Tensor<N>, s: f64) -> Tensor<N> {
    let mut out = *a;
    out.iter_mut().flatten().for_each(|x| *x *= s);
    out
}

/// S(a) = (1 + |a|)^{q−2} a.
pub fn stress<const N: usize>(a: &Tensor<N>, params: &RheologyParams) -> Result<Tensor<N>> {
    check_symmetric(a)?;
    Ok(scaled(a, params.viscosity(frobenius(a), 0.0)))
}

/// S^M(a) = S(a) + (1/m)(1 + |a|)^{p−2} a.
pub fn stress_regularized<const N: usize>(a: &Tensor<N>, params: &RheologyParams, m: f64) -> Result<Tensor<N>> {
    check_symmetric(a)?;
    if !(m > 0.0) {
        return Err(Error::InvalidInput(format!("regularization parameter m must be positive, got {m}")));
    }
    let inv_m = if m.is_infinite() { 0.0 } else { 1.0 / m };
    Ok(scaled(a, params.viscosity(frobenius(a), inv_m)))
}

/// Worst observed margins of the structure inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub dim: usize,
    pub q: f64,
    pub samples: usize,
    pub seed: u64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// min of S(A):A − (c1|A|^q − c2)
    pub coercivity_margin: f64,
    /// min of 1 + |A|^{q−1} − |S(A)|  (scaled by c3 = 1)
    pub growth_margin: f64,
    /// min of (S(A) − S(B)):(A − B) / |A − B|²
    pub monotonicity_margin: f64,
}

impl Certificate {
    pub const CSV_HEADER: &'static str =
        "dim,q,samples,seed,c1,c2,c3,coercivity_margin,growth_margin,monotonicity_margin";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.dim,
            self.q,
            self.samples,
            self.seed,
            self.c1,
            self.c2,
            self.c3,
            self.coercivity_margin,
            self.growth_margin,
            self.monotonicity_margin
        )
    }
}

fn random_symmetric<const N: usize>(rng: &mut ChaCha8Rng) -> Tensor<N> {
    let mut a = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let v = rng.gen_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    let n = frobenius(&a);
    if n == 0.0 {
        return a;
    }
    // magnitudes log-uniform over [1e-6, 1e3]
    let mag = 10f64.powf(rng.gen_range(-6.0..3.0));
    scaled(&a, mag / n)
}

/// Checks coercivity, growth and strict monotonicity on seeded random
/// symmetric tensor pairs with |A| ≤ 10³ in dimension `N`.
pub fn certify_inequalities<const N: usize>(q: f64, samples: usize, seed: u64) -> Result<Certificate> {
    if samples < 10_000 {
        return Err(Error::InvalidInput(format!("certificate needs at least 10^4 samples, got {samples}")));
    }
    let params = RheologyParams {
        q,
        p: min_regularization_exponent(q),
        m_schedule: Vec::new(),
    };
    params.validate()?;
    let c1 = 2f64.powf(q - 2.0);
    let c2 = c1;
    let c3 = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cert = Certificate {
        dim: N,
        q,
        samples,
        seed,
        c1,
        c2,
        c3,
        coercivity_margin: f64::INFINITY,
        growth_margin: f64::INFINITY,
        monotonicity_margin: f64::INFINITY,
    };
    for _ in 0..samples {
        let a: Tensor<N> = random_symmetric(&mut rng);
        let b: Tensor<N> = random_symmetric(&mut rng);
        let sa = stress(&a, &params)?;
        let sb = stress(&b, &params)?;
        let na = frobenius(&a);
        let coer = contract(&sa, &a) - (c1 * na.powf(q) - c2);
        let growth = c3 * (1.0 + na.powf(q - 1.0)) - frobenius(&sa);
        let mut diff = a;
        let mut sdiff = sa;
        for i in 0..N {
            for j in 0..N {
                diff[i][j] -= b[i][j];
                sdiff[i][j] -= sb[i][j];
            }
        }
        let dn2 = contract(&diff, &diff);
        if coer < 0.0 || growth < 0.0 {
            return Err(Error::Verification(format!(
                "structure inequality violated (coercivity margin {coer:e}, growth margin {growth:e}) at A = {a:?}"
            )));
        }
        cert.coercivity_margin = cert.coercivity_margin.min(coer);
        cert.growth_margin = cert.growth_margin.min(growth);
        if dn2 > 0.0 {
            let mono = contract(&sdiff, &diff);
            if !(mono > 0.0) {
                return Err(Error::Verification(format!(
                    "monotonicity violated: (S(A)-S(B)):(A-B) = {mono:e} for A = {a:?}, B = {b:?}"
                )));
            }
            cert.monotonicity_margin = cert.monotonicity_margin.min(mono / dn2);
        }
    }
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemolysisParams {
    pub c_h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
}

/// Admissible interval [1, q′/α] for the integrability exponent r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentWindow {
    pub q_conjugate: f64,
    pub r_lower: f64,
    pub r_upper: f64,
}

impl HemolysisParams {
    /// Requires c_h, α, β > 0, α ≤ q′ and 1 ≤ r ≤ q′/α.
    pub fn validate(&self, q: f64) -> Result<ExponentWindow> {
        if !(self.c_h > 0.0 && self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "hemolysis constants must be positive (c_h {}, alpha {}, beta {})",
                self.c_h, self.alpha, self.beta
            )));
        }
        let qc = conjugate(q);
        let window = ExponentWindow {
            q_conjugate: qc,
            r_lower: 1.0,
            r_upper: qc / self.alpha,
        };
        if self.alpha > qc {
            return Err(Error::Config(format!(
                "alpha = {} exceeds q' = {qc:.6} (q = {q})",
                self.alpha
            )));
        }
        if !(self.r >= 1.0 && self.r <= window.r_upper) {
            return Err(Error::Config(format!(
                "r = {} outside the window 1 <= r <= q'/alpha = [1, {:.6}] (q = {q}, alpha = {})",
                self.r, window.r_upper, self.alpha
            )));
        }
        Ok(window)
    }
}

/// h = c_h |S|^α t^β for a stress tensor with Frobenius norm `stress_norm`.
#[inline]
pub fn hemolysis_from_norm(stress_norm: f64, t: f64, hp: &HemolysisParams) -> f64 {
    if stress_norm == 0.0 || t == 0.0 {
        return 0.0;
    }
    hp.c_h * stress_norm.powf(hp.alpha) * t.powf(hp.beta)
}

pub fn hemolysis_index<const N: usize>(stress_value: &Tensor<N>, t: f64, hp: &HemolysisParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("hemolysis time must be nonnegative, got {t}")));
    }
    Ok(hemolysis_from_norm(frobenius(stress_value), t, hp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(q: f64) -> RheologyParams {
        RheologyParams::new(q, min_regularization_exponent(q).max(2.0), vec![]).unwrap()
    }

    #[test]
    fn exponent_bounds() {
        assert!((min_regularization_exponent(1.5) - 5.0).abs() < 1e-12);
        assert!((min_regularization_exponent(2.0) - 2.5).abs() < 1e-12);
        assert!(RheologyParams::new(1.2, 10.0, vec![]).is_err());
        assert!(RheologyParams::new(1.5, 4.0, vec![]).is_err());
        assert!(RheologyParams::new(1.5, 5.0, vec![10.0, 5.0]).is_err());
        assert!(RheologyParams::new(1.5, 5.0, vec![0.5]).is_err());
        assert!(RheologyParams::new(1.5, 5.0, vec![1.0, 5.0]).is_ok());
    }

    #[test]
    fn zero_and_newtonian() {
        let z = stress(&[[0.0; 2]; 2], &params(1.5)).unwrap();
        assert_eq!(z, [[0.0; 2]; 2]);
        let a = [[0.3, -1.2], [-1.2, 4.0]];
        assert_eq!(stress(&a, &params(2.0)).unwrap(), a);
    }

    #[test]
    fn shear_thinning_value() {
        let s = stress(&[[1.0, 0.0], [0.0, -1.0]], &params(1.5)).unwrap();
        let expected = (1.0 + 2f64.sqrt()).powf(-0.5);
        assert!((s[0][0] - expected).abs() < 1e-15);
        assert!((expected - 0.6436).abs() < 1e-4);
    }

    #[test]
    fn regularized_value() {
        let p = RheologyParams::new(1.5, 5.0, vec![]).unwrap();
        let p2 = RheologyParams { p: 2.0, ..p.clone() };
        let a = [[1.0, 0.0], [0.0, 1.0]];
        let s = stress_regularized(&a, &p2, 10.0).unwrap();
        let plain = (1.0 + 2f64.sqrt()).powf(-0.5);
        assert!((s[0][0] - (plain + 0.1)).abs() < 1e-15);
        assert_eq!(stress_regularized(&[[0.0; 2]; 2], &p, 3.0).unwrap(), [[0.0; 2]; 2]);
    }

    #[test]
    fn non_symmetric_is_rejected() {
        assert!(stress(&[[1.0, 2.0], [0.0, 1.0]], &params(1.5)).is_err());
    }

    #[test]
    fn newtonian_certificate() {
        let c = certify_inequalities::<2>(2.0, 10_000, 3).unwrap();
        assert_eq!(c.c1, 1.0);
        assert!(c.coercivity_margin >= 1.0 - 1e-9);
    }

    #[test]
    fn hemolysis_window() {
        let hp = HemolysisParams {
            c_h: 1.0,
            alpha: 2.42,
            beta: 0.5,
            r: 2.0,
        };
        let w = hp.validate(1.22).unwrap();
        assert!((w.q_conjugate - 1.22 / 0.22).abs() < 1e-12);
        assert!((w.r_upper - 2.2914).abs() < 1e-3);
        assert!(HemolysisParams { r: 3.0, ..hp.clone() }.validate(1.22).is_err());
        let edge = HemolysisParams {
            alpha: conjugate(1.5),
            r: 1.0,
            ..hp
        };
        assert!(edge.validate(1.5).is_ok());
    }

    #[test]
    fn hemolysis_zeros() {
        let hp = HemolysisParams {
            c_h: 2.0,
            alpha: 1.99,
            beta: 0.7,
            r: 1.0,
        };
        assert_eq!(hemolysis_index(&[[0.0; 2]; 2], 3.0, &hp).unwrap(), 0.0);
        assert_eq!(hemolysis_index(&[[1.0, 0.0], [0.0, 1.0]], 0.0, &hp).unwrap(), 0.0);
    }

    fn sym2() -> impl Strategy<Value = Tensor<2>> {
        (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0).prop_map(|(a, b, c)| [[a, b], [b, c]])
    }

    proptest! {
        #[test]
        fn frame_indifference(a in sym2(), th in 0.0f64..6.3, q in 1.25f64..2.0) {
            let r = [[th.cos(), -th.sin()], [th.sin(), th.cos()]];
            let rot = |m: &Tensor<2>| {
                let mut out = [[0.0; 2]; 2];
                for i in 0..2 { for j in 0..2 { for k in 0..2 { for l in 0..2 {
                    out[i][j] += r[i][k] * m[k][l] * r[j][l];
                }}}}
                out
            };
            let mut ra = rot(&a);
            ra[0][1] = 0.5 * (ra[0][1] + ra[1][0]);
            ra[1][0] = ra[0][1];
            let p = params(q);
            let lhs = stress(&ra, &p).unwrap();
            let rhs = rot(&stress(&a, &p).unwrap());
            for i in 0..2 { for j in 0..2 {
                prop_assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-12 * (1.0 + frobenius(&a)));
            }}
        }

        #[test]
        fn scaling_keeps_direction(a in sym2(), lam in 0.01f64..100.0) {
            prop_assume!(frobenius(&a) > 1e-6);
            let p = params(1.5);
            let s = stress(&scaled(&a, lam), &p).unwrap();
            let cos = contract(&s, &a) / (frobenius(&s) * frobenius(&a));
            prop_assert!((cos - 1.0).abs() < 1e-12);
        }

        #[test]
        fn regularization_gap(a in sym2(), m in 1.0f64..1e4) {
            prop_assume!(frobenius(&a) > 1e-6);
            let p = RheologyParams::new(1.5, 5.0, vec![]).unwrap();
            let s = stress(&a, &p).unwrap();
            let gap = |m: f64| {
                let sm = stress_regularized(&a, &p, m).unwrap();
                let mut d = sm;
                for i in 0..2 { for j in 0..2 { d[i][j] -= s[i][j]; } }
                frobenius(&d)
            };
            let na = frobenius(&a);
            let bound = (1.0 + na).powf(p.p - 1.0) / m;
            prop_assert!(gap(m) <= bound * (1.0 + 1e-12));
            prop_assert!(gap(2.0 * m) < gap(m));
        }

        #[test]
        fn hemolysis_monotone(s1 in 0.0f64..10.0, ds in 0.0f64..10.0, t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
            let hp = HemolysisParams { c_h: 1.5, alpha: 1.99, beta: 0.8, r: 1.0 };
            prop_assert!(hemolysis_from_norm(s1 + ds, t1, &hp) >= hemolysis_from_norm(s1, t1, &hp));
            prop_assert!(hemolysis_from_norm(s1, t1 + dt, &hp) >= hemolysis_from_norm(s1, t1, &hp));
        }
    }
}
