use super::polygon::Polygon;
use crate::error::{Error, Result};
use crate::Point;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum number of angles at which radial bounds are certified.
pub const CERTIFY_SAMPLES: usize = 1024;

/// Axis-aligned hold-all box D together with the time horizon T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldAll {
    pub bbox: [Point; 2],
    pub horizon: f64,
}

impl HoldAll {
    pub fn new(lo: Point, hi: Point, horizon: f64) -> Result<Self> {
        let h = Self {
            bbox: [lo, hi],
            horizon,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.bbox;
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::Config(format!(
                "hold-all box must have positive side lengths, got {lo:?}..{hi:?}"
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "time horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.bbox[1][0] - self.bbox[0][0]
    }

    pub fn height(&self) -> f64 {
        self.bbox[1][1] - self.bbox[0][1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Space-time volume |(0,T) × D|.
    pub fn cylinder_volume(&self) -> f64 {
        self.area() * self.horizon
    }

    /// Signed distance from `p` to the box boundary, positive inside.
    pub fn clearance(&self, p: Point) -> f64 {
        let [lo, hi] = self.bbox;
        (p[0] - lo[0])
            .min(hi[0] - p[0])
            .min(p[1] - lo[1])
            .min(hi[1] - p[1])
    }

    pub fn contains(&self, p: Point) -> bool {
        self.clearance(p) >= 0.0
    }
}

/// Radial Fourier coefficients of r(θ) = r₀ + Σⱼ (aⱼ cos jθ + bⱼ sin jθ), j ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialCoeffs {
    pub r0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl RadialCoeffs {
    pub fn disk(r0: f64) -> Self {
        Self {
            r0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        let mut r = self.r0;
        for (j, a) in self.cos.iter().enumerate() {
            r += a * ((j + 1) as f64 * theta).cos();
        }
        for (j, b) in self.sin.iter().enumerate() {
            r += b * ((j + 1) as f64 * theta).sin();
        }
        r
    }

    pub fn radius_derivative(&self, theta: f64) -> f64 {
        let mut d = 0.0;
        for (j, a) in self.cos.iter().enumerate() {
            let k = (j + 1) as f64;
            d -= a * k * (k * theta).sin();
        }
        for (j, b) in self.sin.iter().enumerate() {
            let k = (j + 1) as f64;
            d += b * k * (k * theta).cos();
        }
        d
    }

    pub fn modes(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    /// Exact enclosed area ½∫r² dθ.
    pub fn area(&self) -> f64 {
        let sq: f64 = self.cos.iter().chain(&self.sin).map(|c| c * c).sum();
        PI * (self.r0 * self.r0 + 0.5 * sq)
    }
}

/// Raw, uncertified description of a star-shaped domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub radial_coeffs: RadialCoeffs,
    pub center: Point,
    pub r_min: f64,
    pub r_max: f64,
    /// Upper bound on |r′(θ)| / r(θ).
    pub lip_bound: f64,
    /// Required clearance between the closed domain and the hold-all boundary.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.05
}

impl DomainParams {
    pub fn disk(center: Point, radius: f64) -> Self {
        Self {
            radial_coeffs: RadialCoeffs::disk(radius),
            center,
            r_min: 0.5 * radius,
            r_max: 1.5 * radius,
            lip_bound: 0.5,
            margin: default_margin(),
        }
    }
}

/// Worst-case sampled quantities backing a certified domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainCertificate {
    pub samples: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    pub max_lip_ratio: f64,
    pub clearance: f64,
}

/// Star-shaped domain whose radial bounds, Lipschitz ratio and hold-all
/// clearance were verified at construction.
///
/// The bound |r′| ≤ L r makes the boundary a Lipschitz graph in polar
/// coordinates, which is the certified stand-in for a uniform cone condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    params: DomainParams,
    certificate: DomainCertificate,
}

impl DomainSpec {
    pub fn certify(params: DomainParams, hold_all: &HoldAll) -> Result<Self> {
        Self::check_params(&params)?;
        let certificate = Self::measure(&params, hold_all);
        let v = Self::excess(&params, &certificate);
        if v > 0.0 {
            return Err(Error::Admissibility(format!(
                "domain rejected (violation {v:.3e}): min r {:.6} (r_min {}), max r {:.6} (r_max {}), \
                 max |r'|/r {:.6} (lip_bound {}), clearance {:.6} (margin {})",
                certificate.min_radius,
                params.r_min,
                certificate.max_radius,
                params.r_max,
                certificate.max_lip_ratio,
                params.lip_bound,
                certificate.clearance,
                params.margin
            )));
        }
        Ok(Self {
            params,
            certificate,
        })
    }

    /// Sum of positive constraint excesses; zero iff `certify` succeeds.
    pub fn violation(params: &DomainParams, hold_all: &HoldAll) -> f64 {
        if Self::check_params(params).is_err() {
            return f64::INFINITY;
        }
        Self::excess(params, &Self::measure(params, hold_all))
    }

    fn check_params(p: &DomainParams) -> Result<()> {
        let finite = p.radial_coeffs.r0.is_finite()
            && p.radial_coeffs.cos.iter().chain(&p.radial_coeffs.sin).all(|c| c.is_finite())
            && p.center.iter().all(|c| c.is_finite());
        if !finite {
            return Err(Error::Config("domain coefficients must be finite".into()));
        }
        if !(p.r_min > 0.0 && p.r_max >= p.r_min && p.lip_bound > 0.0 && p.margin >= 0.0) {
            return Err(Error::Config(format!(
                "domain bounds need 0 < r_min <= r_max, lip_bound > 0, margin >= 0 \
                 (got r_min {}, r_max {}, lip_bound {}, margin {})",
                p.r_min, p.r_max, p.lip_bound, p.margin
            )));
        }
        Ok(())
    }

    fn measure(p: &DomainParams, hold_all: &HoldAll) -> DomainCertificate {
        let samples = CERTIFY_SAMPLES.max(64 * (p.radial_coeffs.modes() + 1));
        let mut c = DomainCertificate {
            samples,
            min_radius: f64::INFINITY,
            max_radius: f64::NEG_INFINITY,
            max_lip_ratio: 0.0,
            clearance: f64::INFINITY,
        };
        for k in 0..samples {
            let th = 2.0 * PI * k as f64 / samples as f64;
            let r = p.radial_coeffs.radius(th);
            let dr = p.radial_coeffs.radius_derivative(th);
            c.min_radius = c.min_radius.min(r);
            c.max_radius = c.max_radius.max(r);
            let ratio = if r > 0.0 { dr.abs() / r } else { f64::INFINITY };
            c.max_lip_ratio = c.max_lip_ratio.max(ratio);
            let x = [p.center[0] + r * th.cos(), p.center[1] + r * th.sin()];
            c.clearance = c.clearance.min(hold_all.clearance(x));
        }
        c
    }

    fn excess(p: &DomainParams, c: &DomainCertificate) -> f64 {
        let lip = if c.max_lip_ratio.is_finite() {
            (c.max_lip_ratio - p.lip_bound).max(0.0)
        } else {
            1e6
        };
        (p.r_min - c.min_radius).max(0.0)
            + (c.max_radius - p.r_max).max(0.0)
            + lip
            + (p.margin - c.clearance).max(0.0)
    }

    pub fn params(&self) -> &DomainParams {
        &self.params
    }

    pub fn certificate(&self) -> &DomainCertificate {
        &self.certificate
    }

    pub fn center(&self) -> Point {
        self.params.center
    }

    pub fn r_min(&self) -> f64 {
        self.params.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.params.r_max
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.params.radial_coeffs.radius(theta)
    }

    pub fn boundary_point(&self, theta: f64) -> Point {
        let r = self.radius(theta);
        let c = self.params.center;
        [c[0] + r * theta.cos(), c[1] + r * theta.sin()]
    }

    /// Counter-clockwise boundary polygon with `n` equally spaced angles.
    pub fn polygon(&self, n: usize) -> Polygon {
        Polygon::new(
            (0..n)
                .map(|k| self.boundary_point(2.0 * PI * k as f64 / n as f64))
                .collect(),
        )
    }

    pub fn area(&self) -> f64 {
        self.params.radial_coeffs.area()
    }

    pub fn contains(&self, p: Point) -> bool {
        let dx = p[0] - self.params.center[0];
        let dy = p[1] - self.params.center[1];
        let rho = (dx * dx + dy * dy).sqrt();
        rho < self.radius(dy.atan2(dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box2() -> HoldAll {
        HoldAll::new([-2.0, -2.0], [2.0, 2.0], 1.0).unwrap()
    }

    #[test]
    fn unit_disk_certifies() {
        let d = DomainSpec::certify(DomainParams::disk([0.0, 0.0], 1.0), &box2()).unwrap();
        assert_eq!(d.certificate().max_lip_ratio, 0.0);
        assert!((d.certificate().clearance - 1.0).abs() < 1e-12);
        assert!((d.area() - PI).abs() < 1e-15);
        assert!((d.polygon(4096).area() - PI).abs() < 1e-5);
    }

    #[test]
    fn rejects_lipschitz_excess_with_proportional_violation() {
        let mut p = DomainParams::disk([0.0, 0.0], 1.0);
        p.radial_coeffs.cos = vec![0.0, 0.0, 0.3];
        p.lip_bound = 0.5;
        let h = box2();
        assert!(matches!(DomainSpec::certify(p.clone(), &h), Err(Error::Admissibility(_))));
        let v1 = DomainSpec::violation(&p, &h);
        p.lip_bound = 0.25;
        let v2 = DomainSpec::violation(&p, &h);
        assert!(v1 > 0.0);
        assert!((v2 - v1 - 0.25).abs() < 1e-9);
    }

    #[test]
    fn rejects_domain_touching_hold_all() {
        let p = DomainParams::disk([1.0, 0.0], 1.0);
        assert!(DomainSpec::certify(p, &box2()).is_err());
    }

    #[test]
    fn rejects_bad_bounds() {
        let mut p = DomainParams::disk([0.0, 0.0], 1.0);
        p.r_min = 0.0;
        assert!(matches!(DomainSpec::certify(p.clone(), &box2()), Err(Error::Config(_))));
        assert_eq!(DomainSpec::violation(&p, &box2()), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn violation_is_zero_iff_certified(r0 in 0.6f64..1.4, a in -0.3f64..0.3, b in -0.3f64..0.3) {
            let mut p = DomainParams::disk([0.0, 0.0], 1.0);
            p.radial_coeffs = RadialCoeffs { r0, cos: vec![a], sin: vec![0.0, b] };
            let h = box2();
            let ok = DomainSpec::certify(p.clone(), &h).is_ok();
            prop_assert_eq!(ok, DomainSpec::violation(&p, &h) == 0.0);
        }

        #[test]
        fn fourier_area_matches_polygon(r0 in 0.8f64..1.2, a in -0.1f64..0.1, b in -0.1f64..0.1) {
            let mut p = DomainParams::disk([0.1, -0.2], 1.0);
            p.radial_coeffs = RadialCoeffs { r0, cos: vec![a, b], sin: vec![b] };
            p.lip_bound = 2.0;
            let d = DomainSpec::certify(p, &box2()).unwrap();
            prop_assert!((d.polygon(4096).area() - d.area()).abs() < 1e-5);
        }
    }
}
