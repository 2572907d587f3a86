//! Solenoidal driving fields built from rotated gradients of compactly
//! supported stream-function bumps.
//!
//! Each bump contributes ψ_b(t, x) = σ_b(t) R² g(|x − c|² / R²), where σ_b is
//! a Bernstein polynomial in t/T and g is a piecewise polynomial radial
//! profile vanishing to third order at the support radius. The field is
//! V = (∂_y ψ, −∂_x ψ), hence exactly divergence-free.

use super::domain::HoldAll;
use crate::error::{Error, Result};
use crate::Point;
use serde::{Deserialize, Serialize};

/// Samples of the radial profile used to certify derivative bounds.
const PROFILE_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// g(s) = (1 − s)⁴.
    Bump,
    /// Rigid rotation g(s) = −s/2 for s ≤ core, blended to zero at s = 1.
    Vortex { core: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamBump {
    pub center: Point,
    pub radius: f64,
    pub profile: Profile,
    /// Bernstein coefficients of the time amplitude on [0, T].
    pub time_coeffs: Vec<f64>,
}

/// Raw, uncertified velocity field description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityParams {
    #[serde(default)]
    pub bumps: Vec<StreamBump>,
    /// Cap on the certified C^{1,1} bound.
    pub c_v: f64,
    /// Required clearance between each bump support and the hold-all boundary.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.05
}

impl VelocityParams {
    pub fn zero(c_v: f64) -> Self {
        Self {
            bumps: Vec::new(),
            c_v,
            margin: default_margin(),
        }
    }
}

/// Value and first derivatives of V at one space-time point.
/// `grad[i][j]` is ∂_j V_i.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldSample {
    pub v: [f64; 2],
    pub grad: [[f64; 2]; 2],
    pub dt: [f64; 2],
}

/// Anything that can supply Dirichlet data as the rotated gradient of a
/// stream function. The stream function makes boundary fluxes exact.
pub trait DrivingField: Sync {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2];
    fn stream(&self, t: f64, x: Point) -> f64;
}

/// Certified velocity field: every bump support lies inside the hold-all
/// with margin and the C^{1,1} bound does not exceed `c_v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityFieldSpec {
    params: VelocityParams,
    horizon: f64,
    certified_bound: f64,
    #[serde(skip)]
    tables: Vec<ProfileTable>,
}

impl VelocityFieldSpec {
    pub fn certify(params: VelocityParams, hold_all: &HoldAll) -> Result<Self> {
        let (bound, clearance_excess) = Self::measure(&params, hold_all)?;
        if clearance_excess > 0.0 {
            return Err(Error::Admissibility(format!(
                "velocity bump support leaves the hold-all margin by {clearance_excess:.3e}"
            )));
        }
        if bound > params.c_v {
            return Err(Error::Admissibility(format!(
                "certified C^{{1,1}} bound {bound:.6} exceeds c_V = {}",
                params.c_v
            )));
        }
        let tables = params.bumps.iter().map(|b| ProfileTable::new(b.profile)).collect();
        Ok(Self {
            params,
            horizon: hold_all.horizon,
            certified_bound: bound,
            tables,
        })
    }

    pub fn zero(hold_all: &HoldAll, c_v: f64) -> Self {
        Self::certify(VelocityParams::zero(c_v), hold_all).expect("zero field is admissible")
    }

    /// Sum of positive constraint excesses; zero iff `certify` succeeds.
    pub fn violation(params: &VelocityParams, hold_all: &HoldAll) -> f64 {
        match Self::measure(params, hold_all) {
            Ok((bound, clear)) => clear + (bound - params.c_v).max(0.0),
            Err(_) => f64::INFINITY,
        }
    }

    /// Upper bound on sup|V| + sup|∇V| + sup|∂ₜV| + Lip(∇V) + Lip(∂ₜV) over [0,T] × D̄.
    pub fn c11_bound(params: &VelocityParams, horizon: f64) -> Result<f64> {
        let mut total = 0.0;
        for b in &params.bumps {
            let p = ProfileTable::new(b.profile).sup_bounds();
            let r = b.radius;
            let pk = [p[0] * r, p[1], p[2] / r];
            let s = bernstein_bounds(&b.time_coeffs, horizon);
            total += s[0] * pk[0]
                + (s[0] * pk[1] + s[1] * pk[0])
                + (s[0] * pk[2] + 2.0 * s[1] * pk[1] + s[2] * pk[0]);
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("velocity certificate".into()));
        }
        Ok(total)
    }

    fn measure(params: &VelocityParams, hold_all: &HoldAll) -> Result<(f64, f64)> {
        if !(params.c_v > 0.0) || !(params.margin >= 0.0) {
            return Err(Error::Config(format!(
                "velocity needs c_v > 0 and margin >= 0 (got {}, {})",
                params.c_v, params.margin
            )));
        }
        let mut clearance_excess: f64 = 0.0;
        for (i, b) in params.bumps.iter().enumerate() {
            if !(b.radius > 0.0) || b.time_coeffs.is_empty() {
                return Err(Error::Config(format!(
                    "bump {i} needs a positive radius and at least one time coefficient"
                )));
            }
            if let Profile::Vortex { core } = b.profile {
                if !(core > 0.0 && core < 1.0) {
                    return Err(Error::Config(format!(
                        "bump {i}: vortex core must lie in (0, 1), got {core}"
                    )));
                }
            }
            if !b.time_coeffs.iter().chain(&b.center).all(|c| c.is_finite()) {
                return Err(Error::Config(format!("bump {i} has non-finite coefficients")));
            }
            let c = hold_all.clearance(b.center) - b.radius;
            clearance_excess += (params.margin - c).max(0.0);
        }
        Ok((Self::c11_bound(params, hold_all.horizon)?, clearance_excess))
    }

    pub fn params(&self) -> &VelocityParams {
        &self.params
    }

    pub fn c_v(&self) -> f64 {
        self.params.c_v
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn certified_bound(&self) -> f64 {
        self.certified_bound
    }

    pub fn is_zero(&self) -> bool {
        self.params.bumps.iter().all(|b| b.time_coeffs.iter().all(|&c| c == 0.0))
    }

    pub fn sample(&self, t: f64, x: Point) -> FieldSample {
        let mut out = FieldSample::default();
        for (b, tab) in self.params.bumps.iter().zip(&self.tables) {
            let r = b.radius;
            let y = [(x[0] - b.center[0]) / r, (x[1] - b.center[1]) / r];
            let s = y[0] * y[0] + y[1] * y[1];
            if s >= 1.0 {
                continue;
            }
            let g = tab.profile.derivatives(s);
            let (sig, dsig) = bernstein_eval(&b.time_coeffs, t / self.horizon);
            let dsig = dsig / self.horizon;
            // ∇ψ = R σ 2 y g′ ; ∇²ψ = σ (2 δ g′ + 4 y yᵀ g″)
            let d1 = [2.0 * r * y[0] * g[1], 2.0 * r * y[1] * g[1]];
            let h = |i: usize, j: usize| {
                let d = if i == j { 2.0 * g[1] } else { 0.0 };
                d + 4.0 * y[i] * y[j] * g[2]
            };
            out.v[0] += sig * d1[1];
            out.v[1] -= sig * d1[0];
            out.dt[0] += dsig * d1[1];
            out.dt[1] -= dsig * d1[0];
            for j in 0..2 {
                out.grad[0][j] += sig * h(1, j);
                out.grad[1][j] -= sig * h(0, j);
            }
        }
        out
    }

    pub fn velocity_at(&self, t: f64, x: Point) -> [f64; 2] {
        self.sample(t, x).v
    }

    pub fn stream_at(&self, t: f64, x: Point) -> f64 {
        let mut psi = 0.0;
        for (b, tab) in self.params.bumps.iter().zip(&self.tables) {
            let r = b.radius;
            let y = [(x[0] - b.center[0]) / r, (x[1] - b.center[1]) / r];
            let s = y[0] * y[0] + y[1] * y[1];
            if s >= 1.0 {
                continue;
            }
            let (sig, _) = bernstein_eval(&b.time_coeffs, t / self.horizon);
            psi += sig * r * r * tab.profile.derivatives(s)[0];
        }
        psi
    }
}

impl DrivingField for VelocityFieldSpec {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2] {
        self.velocity_at(t, x)
    }

    fn stream(&self, t: f64, x: Point) -> f64 {
        self.stream_at(t, x)
    }
}

/// Bernstein polynomial value and derivative in τ ∈ [0, 1].
pub fn bernstein_eval(c: &[f64], tau: f64) -> (f64, f64) {
    let k = c.len() - 1;
    if k == 0 {
        return (c[0], 0.0);
    }
    let value = de_casteljau(c, tau);
    let diff: Vec<f64> = c.windows(2).map(|w| k as f64 * (w[1] - w[0])).collect();
    (value, de_casteljau(&diff, tau))
}

fn de_casteljau(c: &[f64], tau: f64) -> f64 {
    let mut b = c.to_vec();
    let n = b.len();
    for r in 1..n {
        for i in 0..n - r {
            b[i] = (1.0 - tau) * b[i] + tau * b[i + 1];
        }
    }
    b[0]
}

/// Bounds on |σ|, |σ′|, |σ″| over [0, T] from the convex-hull property.
pub fn bernstein_bounds(c: &[f64], horizon: f64) -> [f64; 3] {
    let k = c.len().saturating_sub(1) as f64;
    let s0 = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let d1: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
    let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
    let s1 = k / horizon * d1.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let s2 = k * (k - 1.0).max(0.0) / (horizon * horizon) * d2.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    [s0, s1, s2]
}

/// Polynomial in s with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n)
            .map(|k| self.0.get(k).copied().unwrap_or(0.0) + o.0.get(k).copied().unwrap_or(0.0))
            .collect())
    }

    fn scale(&self, a: f64) -> Poly {
        Poly(self.0.iter().map(|c| a * c).collect())
    }

    /// p(q(s))
    fn compose(&self, q: &Poly) -> Poly {
        let mut acc = Poly(vec![0.0]);
        for c in self.0.iter().rev() {
            acc = acc.mul(q).add(&Poly(vec![*c]));
        }
        acc
    }
}

/// Piecewise polynomial radial profile g(s) on [0, 1), s = ρ².
#[derive(Debug, Clone, PartialEq)]
struct RadialProfile {
    breaks: Vec<f64>,
    pieces: Vec<[Poly; 5]>,
}

impl RadialProfile {
    fn new(profile: Profile) -> Self {
        let with_derivs = |p: Poly| {
            let d1 = p.derivative();
            let d2 = d1.derivative();
            let d3 = d2.derivative();
            let d4 = d3.derivative();
            [p, d1, d2, d3, d4]
        };
        match profile {
            Profile::Bump => {
                let one_minus = Poly(vec![1.0, -1.0]);
                let p = one_minus.mul(&one_minus).mul(&one_minus).mul(&one_minus);
                Self {
                    breaks: vec![0.0, 1.0],
                    pieces: vec![with_derivs(p)],
                }
            }
            Profile::Vortex { core } => {
                let rigid = Poly(vec![0.0, -0.5]);
                let smooth7 = Poly(vec![0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0]);
                let w = 1.0 - core;
                let u = Poly(vec![-core / w, 1.0 / w]);
                let chi = Poly(vec![1.0]).add(&smooth7.compose(&u).scale(-1.0));
                Self {
                    breaks: vec![0.0, core, 1.0],
                    pieces: vec![with_derivs(rigid.clone()), with_derivs(rigid.mul(&chi))],
                }
            }
        }
    }

    /// g, g′, g″, g‴, g⁗ at s ∈ [0, 1).
    fn derivatives(&self, s: f64) -> [f64; 5] {
        let mut k = 0;
        while k + 1 < self.pieces.len() && s >= self.breaks[k + 1] {
            k += 1;
        }
        let p = &self.pieces[k];
        [p[0].eval(s), p[1].eval(s), p[2].eval(s), p[3].eval(s), p[4].eval(s)]
    }
}

/// Frobenius norms of ∇^k ψ̂ for ψ̂(y) = g(|y|²) at y = (ρ, 0), k = 1..4.
fn radial_derivative_norms(g: &[f64; 5], rho: f64) -> [f64; 4] {
    let y = [rho, 0.0];
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    let mut n3 = 0.0;
    let mut n4 = 0.0;
    for i in 0..2 {
        n1 += (2.0 * y[i] * g[1]).powi(2);
        for j in 0..2 {
            n2 += (2.0 * d(i, j) * g[1] + 4.0 * y[i] * y[j] * g[2]).powi(2);
            for k in 0..2 {
                let t3 = 4.0 * (d(i, j) * y[k] + d(i, k) * y[j] + d(j, k) * y[i]) * g[2]
                    + 8.0 * y[i] * y[j] * y[k] * g[3];
                n3 += t3 * t3;
                for l in 0..2 {
                    let pairs = d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k);
                    let mixed = d(i, j) * y[k] * y[l]
                        + d(i, k) * y[j] * y[l]
                        + d(i, l) * y[j] * y[k]
                        + d(j, k) * y[i] * y[l]
                        + d(j, l) * y[i] * y[k]
                        + d(k, l) * y[i] * y[j];
                    let t4 = 4.0 * pairs * g[2] + 8.0 * mixed * g[3] + 16.0 * y[i] * y[j] * y[k] * y[l] * g[4];
                    n4 += t4 * t4;
                }
            }
        }
    }
    [n1.sqrt(), n2.sqrt(), n3.sqrt(), n4.sqrt()]
}

#[derive(Debug, Clone, PartialEq)]
struct ProfileTable {
    profile: RadialProfile,
}

impl ProfileTable {
    fn new(profile: Profile) -> Self {
        Self {
            profile: RadialProfile::new(profile),
        }
    }

    /// Upper bounds on sup |∇^k ψ̂| for k = 1, 2, 3 over the unit disk.
    ///
    /// Grid maxima over ρ are padded by half the grid step times the grid
    /// maximum of the next derivative order, doubled for the top order.
    fn sup_bounds(&self) -> [f64; 3] {
        let n = PROFILE_SAMPLES;
        let h = 1.0 / n as f64;
        let mut maxima = [0.0_f64; 4];
        for k in 0..=n {
            let rho = (k as f64 * h).min(1.0 - 1e-15);
            let g = self.profile.derivatives(rho * rho);
            let norms = radial_derivative_norms(&g, rho);
            for (m, v) in maxima.iter_mut().zip(norms) {
                *m = m.max(v);
            }
        }
        let pad4 = 2.0 * maxima[3];
        [
            maxima[0] + 0.5 * h * maxima[1],
            maxima[1] + 0.5 * h * maxima[2],
            maxima[2] + 0.5 * h * pad4,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hold_all() -> HoldAll {
        HoldAll::new([-3.0, -3.0], [3.0, 3.0], 1.0).unwrap()
    }

    fn bump(center: Point, radius: f64, coeffs: Vec<f64>, profile: Profile) -> StreamBump {
        StreamBump {
            center,
            radius,
            profile,
            time_coeffs: coeffs,
        }
    }

    fn spec(bumps: Vec<StreamBump>) -> VelocityFieldSpec {
        VelocityFieldSpec::certify(
            VelocityParams {
                bumps,
                c_v: 1e3,
                margin: 0.05,
            },
            &hold_all(),
        )
        .unwrap()
    }

    #[test]
    fn vortex_core_is_rigid_rotation() {
        let v = spec(vec![bump([0.0, 0.0], 2.0, vec![1.0], Profile::Vortex { core: 0.5 })]);
        let s = v.sample(0.3, [0.6, -0.4]);
        assert!((s.v[0] - 0.4).abs() < 1e-14);
        assert!((s.v[1] - 0.6).abs() < 1e-14);
        assert!((s.grad[0][1] + 1.0).abs() < 1e-14);
        assert!((s.grad[1][0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let v = spec(vec![
            bump([0.2, -0.1], 0.9, vec![0.5, -1.0, 2.0], Profile::Bump),
            bump([-0.5, 0.4], 1.1, vec![1.0, 0.3], Profile::Vortex { core: 0.4 }),
        ]);
        let h = 1e-6;
        for x in [[0.1, 0.2], [-0.3, 0.5], [0.6, -0.5], [-0.9, 0.9]] {
            let t = 0.37;
            let s = v.sample(t, x);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let vp = v.velocity_at(t, xp);
                let vm = v.velocity_at(t, xm);
                for i in 0..2 {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((fd - s.grad[i][j]).abs() < 1e-6, "grad {i}{j} at {x:?}");
                }
            }
            let vp = v.velocity_at(t + h, x);
            let vm = v.velocity_at(t - h, x);
            for i in 0..2 {
                assert!(((vp[i] - vm[i]) / (2.0 * h) - s.dt[i]).abs() < 1e-6);
            }
            // V = rot ψ
            let psx = (v.stream_at(t, [x[0] + h, x[1]]) - v.stream_at(t, [x[0] - h, x[1]])) / (2.0 * h);
            let psy = (v.stream_at(t, [x[0], x[1] + h]) - v.stream_at(t, [x[0], x[1] - h])) / (2.0 * h);
            assert!((s.v[0] - psy).abs() < 1e-7 && (s.v[1] + psx).abs() < 1e-7);
            assert!((s.grad[0][0] + s.grad[1][1]).abs() < 1e-13);
        }
    }

    #[test]
    fn certified_bound_dominates_sampled_norms() {
        let v = spec(vec![bump([0.0, 0.3], 1.2, vec![0.2, 1.0, -0.5], Profile::Bump)]);
        let mut sampled: f64 = 0.0;
        for i in 0..=60 {
            for j in 0..=60 {
                for k in 0..=10 {
                    let x = [-1.5 + 3.0 * i as f64 / 60.0, -1.2 + 3.0 * j as f64 / 60.0];
                    let s = v.sample(k as f64 / 10.0, x);
                    let n = s.v[0].hypot(s.v[1])
                        + s.grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
                        + s.dt[0].hypot(s.dt[1]);
                    sampled = sampled.max(n);
                }
            }
        }
        assert!(v.certified_bound() >= sampled);
        assert!(v.certified_bound() < 20.0 * sampled);
    }

    #[test]
    fn bump_outside_margin_is_rejected() {
        let p = VelocityParams {
            bumps: vec![bump([2.5, 0.0], 0.6, vec![1.0], Profile::Bump)],
            c_v: 1e3,
            margin: 0.05,
        };
        assert!(VelocityFieldSpec::certify(p.clone(), &hold_all()).is_err());
        assert!((VelocityFieldSpec::violation(&p, &hold_all()) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn bound_over_cap_is_rejected() {
        let p = VelocityParams {
            bumps: vec![bump([0.0, 0.0], 0.5, vec![10.0], Profile::Bump)],
            c_v: 1.0,
            margin: 0.05,
        };
        assert!(matches!(
            VelocityFieldSpec::certify(p, &hold_all()),
            Err(Error::Admissibility(_))
        ));
    }

    #[test]
    fn bernstein_matches_power_form() {
        let c = [1.0, -2.0, 0.5];
        for tau in [0.0, 0.3, 1.0] {
            let (v, d) = bernstein_eval(&c, tau);
            let pv = c[0] * (1.0 - tau).powi(2) + 2.0 * c[1] * tau * (1.0 - tau) + c[2] * tau * tau;
            let pd = -2.0 * c[0] * (1.0 - tau) + 2.0 * c[1] * (1.0 - 2.0 * tau) + 2.0 * c[2] * tau;
            assert!((v - pv).abs() < 1e-15 && (d - pd).abs() < 1e-14);
        }
    }

    #[test]
    fn vortex_profile_is_c3_at_breaks() {
        let p = RadialProfile::new(Profile::Vortex { core: 0.3 });
        for s0 in [0.3, 1.0 - 1e-12] {
            let a = p.derivatives(s0 - 1e-9);
            let b = p.derivatives((s0 + 1e-9).min(1.0 - 1e-15));
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-5, "order {k} at {s0}");
            }
        }
        let end = p.derivatives(1.0 - 1e-12);
        assert!(end[..4].iter().all(|v| v.abs() < 1e-6));
    }
}
