use crate::error::{Error, Result};
use crate::geometry::{DomainParams, DomainSpec, HoldAll, RadialCoeffs, VelocityFieldSpec, VelocityParams};
use serde::{Deserialize, Serialize};

/// Optimization variables, split by what they parametrize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    /// r₀, cos₁..cos_J, sin₁..sin_J.
    pub domain_params: Vec<f64>,
    /// Bernstein time coefficients of every bump, concatenated.
    pub velocity_params: Vec<f64>,
}

impl ParamVector {
    pub fn flat(&self) -> Vec<f64> {
        self.domain_params.iter().chain(&self.velocity_params).copied().collect()
    }
}

/// Layout of the search space: templates fixing everything that is not
/// optimized, plus box bounds on the free coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub hold_all: HoldAll,
    pub domain: DomainParams,
    pub velocity: VelocityParams,
    /// Number of Fourier modes J optimized.
    pub modes: usize,
    pub optimize_velocity: bool,
    pub bounds: Vec<[f64; 2]>,
}

/// Decoded parameters: both certified specs, or the total constraint excess.
#[derive(Debug, Clone)]
pub enum Decoded {
    Admissible {
        domain: DomainSpec,
        velocity: VelocityFieldSpec,
    },
    Infeasible {
        violation: f64,
    },
}

impl Decoded {
    pub fn violation(&self) -> f64 {
        match self {
            Decoded::Admissible { .. } => 0.0,
            Decoded::Infeasible { violation } => *violation,
        }
    }
}

impl ParamSpace {
    /// Space over the radial coefficients only, with bounds derived from
    /// the template: r₀ ∈ [r_min, r_max] and |a_j|, |b_j| ≤ lip_bound·r_max / j.
    pub fn shapes(hold_all: HoldAll, domain: DomainParams, modes: usize, velocity: VelocityParams) -> Self {
        let mut space = Self {
            hold_all,
            domain,
            velocity,
            modes,
            optimize_velocity: false,
            bounds: Vec::new(),
        };
        space.bounds = space.default_bounds();
        space
    }

    /// Adds the bump time coefficients as variables, bounded by ±c_V.
    pub fn with_velocity(mut self) -> Self {
        self.optimize_velocity = true;
        self.bounds = self.default_bounds();
        self
    }

    pub fn default_bounds(&self) -> Vec<[f64; 2]> {
        let d = &self.domain;
        let mut b = vec![[d.r_min, d.r_max]];
        for _ in 0..2 {
            for j in 1..=self.modes {
                let w = d.lip_bound * d.r_max / j as f64;
                b.push([-w, w]);
            }
        }
        if self.optimize_velocity {
            let n: usize = self.velocity.bumps.iter().map(|b| b.time_coeffs.len()).sum();
            b.extend(std::iter::repeat_n([-self.velocity.c_v, self.velocity.c_v], n));
        }
        b
    }

    pub fn domain_dim(&self) -> usize {
        1 + 2 * self.modes
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.hold_all.validate()?;
        let n_vel: usize = self.velocity.bumps.iter().map(|b| b.time_coeffs.len()).sum();
        let expect = self.domain_dim() + if self.optimize_velocity { n_vel } else { 0 };
        if self.bounds.len() != expect {
            return Err(Error::Config(format!(
                "optimizer bounds have {} entries, the parameter space has {expect}",
                self.bounds.len()
            )));
        }
        if let Some(i) = self.bounds.iter().position(|b| !(b[0] <= b[1]) || !b[0].is_finite() || !b[1].is_finite()) {
            return Err(Error::Config(format!("optimizer bound {i} is not a finite interval")));
        }
        Ok(())
    }

    /// Parameters of the templates themselves.
    pub fn initial(&self) -> ParamVector {
        let rc = &self.domain.radial_coeffs;
        let coef = |v: &Vec<f64>, j: usize| v.get(j).copied().unwrap_or(0.0);
        let mut domain_params = vec![rc.r0];
        domain_params.extend((0..self.modes).map(|j| coef(&rc.cos, j)));
        domain_params.extend((0..self.modes).map(|j| coef(&rc.sin, j)));
        let velocity_params = if self.optimize_velocity {
            self.velocity.bumps.iter().flat_map(|b| b.time_coeffs.iter().copied()).collect()
        } else {
            Vec::new()
        };
        ParamVector {
            domain_params,
            velocity_params,
        }
    }

    pub fn split(&self, x: &[f64]) -> ParamVector {
        let k = self.domain_dim().min(x.len());
        ParamVector {
            domain_params: x[..k].to_vec(),
            velocity_params: x[k..].to_vec(),
        }
    }

    fn box_excess(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, b)| (b[0] - v).max(0.0) + (v - b[1]).max(0.0))
            .sum()
    }

    pub fn domain_params(&self, p: &ParamVector) -> DomainParams {
        let m = self.modes;
        let d = &p.domain_params;
        let mut out = self.domain.clone();
        out.radial_coeffs = RadialCoeffs {
            r0: d[0],
            cos: d[1..1 + m].to_vec(),
            sin: d[1 + m..1 + 2 * m].to_vec(),
        };
        out
    }

    pub fn velocity_params(&self, p: &ParamVector) -> VelocityParams {
        let mut out = self.velocity.clone();
        if self.optimize_velocity {
            let mut it = p.velocity_params.iter().copied();
            for b in &mut out.bumps {
                for c in &mut b.time_coeffs {
                    *c = it.next().unwrap_or(0.0);
                }
            }
        }
        out
    }

    /// Certifies both specs; never fails, infeasibility is a value.
    pub fn decode(&self, p: &ParamVector) -> Decoded {
        let flat = p.flat();
        if flat.len() != self.dim() || p.domain_params.len() != self.domain_dim() {
            return Decoded::Infeasible {
                violation: f64::INFINITY,
            };
        }
        let dp = self.domain_params(p);
        let vp = self.velocity_params(p);
        let violation = self.box_excess(&flat)
            + DomainSpec::violation(&dp, &self.hold_all)
            + VelocityFieldSpec::violation(&vp, &self.hold_all);
        if violation > 0.0 {
            return Decoded::Infeasible { violation };
        }
        match (DomainSpec::certify(dp, &self.hold_all), VelocityFieldSpec::certify(vp, &self.hold_all)) {
            (Ok(domain), Ok(velocity)) => Decoded::Admissible { domain, velocity },
            _ => Decoded::Infeasible {
                violation: f64::INFINITY,
            },
        }
    }
}
