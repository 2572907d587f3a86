use super::domain::{DomainSpec, HoldAll};
use super::flow_map::{advance, integrate_flow_map, TimeGrid, IDENTITY};
use super::polygon::Polygon;
use super::velocity::VelocityFieldSpec;
use crate::error::Result;
use crate::Point;

/// Default number of boundary samples transported per layer.
pub const BOUNDARY_SAMPLES: usize = 512;

/// The space-time region swept by an admissible domain under its flow map,
/// stored as transported boundary polygons on a time grid.
#[derive(Debug, Clone)]
pub struct MovingDomain {
    pub initial: DomainSpec,
    pub velocity: VelocityFieldSpec,
    pub hold_all: HoldAll,
    pub grid: TimeGrid,
    pub dt_ode: f64,
    pub layers: Vec<Polygon>,
}

impl MovingDomain {
    pub fn new(
        initial: DomainSpec,
        velocity: VelocityFieldSpec,
        hold_all: HoldAll,
        grid: TimeGrid,
        dt_ode: f64,
        boundary_samples: usize,
    ) -> Result<Self> {
        let start = initial.polygon(boundary_samples);
        let fm = integrate_flow_map(&velocity, &hold_all, &start.vertices, grid, dt_ode)?;
        let layers = fm.positions.into_iter().map(Polygon::new).collect();
        Ok(Self {
            initial,
            velocity,
            hold_all,
            grid,
            dt_ode,
            layers,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Boundary polygon of Ω_t. Off-grid times are integrated from the
    /// nearest earlier layer.
    pub fn boundary_at(&self, t: f64) -> Polygon {
        if let Some(i) = self.grid.index_of(t) {
            return self.layers[i].clone();
        }
        let t = t.clamp(0.0, self.horizon());
        let i = ((t / self.grid.dt).floor() as usize).min(self.grid.n_steps);
        let t0 = self.grid.time(i);
        Polygon::new(
            self.layers[i]
                .vertices
                .iter()
                .map(|&x| advance(&self.velocity, (x, IDENTITY), t0, t, self.dt_ode).0)
                .collect(),
        )
    }

    /// True iff every (t, x) sample lies in Ω_t at distance ≥ `margin` from ∂Ω_t.
    pub fn contains_with_margin(&self, samples: &[(f64, Point)], margin: f64) -> bool {
        let mut cache: Option<(f64, Polygon)> = None;
        for &(t, x) in samples {
            let poly = match &cache {
                Some((tc, p)) if *tc == t => p,
                _ => {
                    cache = Some((t, self.boundary_at(t)));
                    &cache.as_ref().unwrap().1
                }
            };
            if !poly.contains(x) || poly.boundary_distance(x) < margin {
                return false;
            }
        }
        true
    }
}

/// Compact-inclusion predicate for a finite space-time sample set.
pub fn verify_compact_inclusion(samples: &[(f64, Point)], md: &MovingDomain, margin: f64) -> bool {
    md.contains_with_margin(samples, margin)
}
