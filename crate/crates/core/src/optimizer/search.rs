//! Multi-start Nelder–Mead over a box-bounded parameter space with a
//! penalty for inadmissible points.
//!
//! Coordinates are scaled by the box widths, so the simplex scale and the
//! diameter tolerance are relative to the bounds. The initial simplex and
//! shrink steps are evaluated in parallel; all bookkeeping happens in input
//! order afterwards, which keeps runs independent of the thread count.

use super::objective::{EvalContext, Evaluation, Objective};
use super::params::{Decoded, ParamSpace, ParamVector};
use crate::error::{Error, Result};
use crate::geometry::{field_distance_c1, polygon_hausdorff, DomainSpec, VelocityFieldSpec};
use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Value assigned when the objective itself fails.
pub const SENTINEL: f64 = 1e30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub starts: usize,
    pub simplex_scale: f64,
    pub penalty: f64,
    /// Stop a start once the scaled simplex diameter falls below this.
    pub xtol: f64,
    /// Stop a start once the spread of simplex values falls below this.
    pub ftol: f64,
    /// Keep restarting from the best point until the budget is spent.
    pub restarts: bool,
    pub seed: u64,
    /// Grid per side for the Hausdorff diagnostic.
    pub hausdorff_grid: usize,
    pub boundary_samples: usize,
    pub c1_grid: [usize; 3],
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            starts: 8,
            simplex_scale: 0.1,
            penalty: 1e3,
            xtol: 1e-6,
            ftol: 1e-14,
            restarts: true,
            seed: 0,
            hausdorff_grid: 129,
            boundary_samples: 256,
            c1_grid: [21, 21, 6],
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::Config("optimizer needs at least one start".into()));
        }
        if !(self.simplex_scale > 0.0) || !(self.penalty > 0.0) || !(self.xtol > 0.0) || !(self.ftol >= 0.0) {
            return Err(Error::Config(
                "optimizer simplex_scale, penalty and xtol must be positive, ftol nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPoint {
    pub params: ParamVector,
    pub value: f64,
    pub evaluation: Evaluation,
    /// Evaluation index at which this point was found.
    pub found_at: usize,
}

/// One objective evaluation in the minimizing sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub evaluation: usize,
    pub start: usize,
    pub value: f64,
    pub best_value: f64,
    pub violation: f64,
    pub feasible: bool,
    pub improved: bool,
    /// Complementary Hausdorff distance of the new best domain to the previous best.
    pub hausdorff_to_prev: Option<f64>,
    /// Sampled C¹ distance of the new best field to the previous best.
    pub c1_to_prev: Option<f64>,
    pub note: Option<String>,
}

impl HistoryEntry {
    pub const CSV_HEADER: &'static str =
        "evaluation,start,value,best_value,violation,feasible,improved,hausdorff_to_prev,c1_to_prev";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{},{},{},{}",
            self.evaluation,
            self.start,
            self.value,
            self.best_value,
            self.violation,
            self.feasible,
            self.improved,
            opt(self.hausdorff_to_prev),
            opt(self.c1_to_prev)
        )
    }
}

/// Persistent optimizer record; serialized to resume a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OptimizerState {
    pub best: Option<BestPoint>,
    pub history: Vec<HistoryEntry>,
    /// Objective evaluations spent so far, over all sessions.
    pub evaluations: usize,
    pub improvements: usize,
    /// Starts begun so far, over all sessions.
    pub starts: usize,
}

impl OptimizerState {
    pub fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.value)
    }

    pub fn history_csv(&self) -> String {
        let mut s = String::from(HistoryEntry::CSV_HEADER);
        s.push('\n');
        for h in &self.history {
            s.push_str(&h.csv_row());
            s.push('\n');
        }
        s
    }

    /// True when the logged best value never increases.
    pub fn is_monotone(&self) -> bool {
        self.history.windows(2).all(|w| w[1].best_value <= w[0].best_value)
    }
}

struct Outcome {
    params: ParamVector,
    value: f64,
    violation: f64,
    feasible: Option<(DomainSpec, VelocityFieldSpec, Evaluation)>,
    note: Option<String>,
}

struct Search<'a> {
    space: &'a ParamSpace,
    objective: &'a dyn Objective,
    cfg: &'a OptimizerConfig,
    state: OptimizerState,
    best_specs: Option<(DomainSpec, VelocityFieldSpec)>,
    limit: usize,
    start: usize,
}

impl<'a> Search<'a> {
    fn remaining(&self) -> usize {
        self.limit.saturating_sub(self.state.evaluations)
    }

    fn to_params(&self, y: &[f64]) -> ParamVector {
        let x: Vec<f64> = y
            .iter()
            .zip(&self.space.bounds)
            .map(|(v, b)| b[0] + v * (b[1] - b[0]))
            .collect();
        self.space.split(&x)
    }

    fn to_scaled(&self, p: &ParamVector) -> Vec<f64> {
        p.flat()
            .iter()
            .zip(&self.space.bounds)
            .map(|(v, b)| if b[1] > b[0] { (v - b[0]) / (b[1] - b[0]) } else { 0.0 })
            .collect()
    }

    fn run_one(&self, y: &[f64], baseline: f64, ctx: EvalContext) -> Outcome {
        let params = self.to_params(y);
        match self.space.decode(&params) {
            Decoded::Infeasible { violation } => {
                let value = if violation.is_finite() {
                    baseline + self.cfg.penalty * violation
                } else {
                    SENTINEL
                };
                Outcome {
                    params,
                    value,
                    violation,
                    feasible: None,
                    note: None,
                }
            }
            Decoded::Admissible { domain, velocity } => match self.objective.evaluate(&domain, &velocity, ctx) {
                Ok(ev) if ev.value.is_finite() => Outcome {
                    params,
                    value: ev.value,
                    violation: 0.0,
                    feasible: Some((domain, velocity, ev)),
                    note: None,
                },
                Ok(ev) => Outcome {
                    params,
                    value: SENTINEL,
                    violation: 0.0,
                    feasible: None,
                    note: Some(format!("non-finite objective {}", ev.value)),
                },
                Err(e) => {
                    warn!("objective failed at evaluation {}: {e}", ctx.evaluation);
                    Outcome {
                        params,
                        value: SENTINEL,
                        violation: 0.0,
                        feasible: None,
                        note: Some(e.to_string()),
                    }
                }
            },
        }
    }

    /// Evaluates a batch in parallel and records it in order. Returns the
    /// values, truncated when the budget runs out.
    fn eval_batch(&mut self, points: &[Vec<f64>]) -> Vec<f64> {
        let n = points.len().min(self.remaining());
        let baseline = if self.state.best.is_some() { self.state.best_value() } else { 0.0 };
        let base = self.state.evaluations;
        let improvements = self.state.improvements;
        let outcomes: Vec<Outcome> = points[..n]
            .par_iter()
            .enumerate()
            .map(|(i, y)| {
                let ctx = EvalContext {
                    evaluation: base + i,
                    improvements,
                };
                self.run_one(y, baseline, ctx)
            })
            .collect();
        outcomes.into_iter().map(|o| self.record(o)).collect()
    }

    fn record(&mut self, o: Outcome) -> f64 {
        let evaluation = self.state.evaluations;
        self.state.evaluations += 1;
        let mut entry = HistoryEntry {
            evaluation,
            start: self.start,
            value: o.value,
            best_value: self.state.best_value(),
            violation: o.violation,
            feasible: o.feasible.is_some(),
            improved: false,
            hausdorff_to_prev: None,
            c1_to_prev: None,
            note: o.note,
        };
        if let Some((domain, velocity, ev)) = o.feasible {
            if o.value < self.state.best_value() {
                if let Some((pd, pv)) = &self.best_specs {
                    let (h, c) = self.distances(pd, pv, &domain, &velocity);
                    entry.hausdorff_to_prev = h;
                    entry.c1_to_prev = c;
                }
                debug!("evaluation {evaluation}: best {:.6e} -> {:.6e}", self.state.best_value(), o.value);
                entry.improved = true;
                entry.best_value = o.value;
                self.state.improvements += 1;
                self.state.best = Some(BestPoint {
                    params: o.params,
                    value: o.value,
                    evaluation: ev,
                    found_at: evaluation,
                });
                self.best_specs = Some((domain, velocity));
            }
        }
        self.state.history.push(entry);
        o.value
    }

    fn distances(
        &self,
        pd: &DomainSpec,
        pv: &VelocityFieldSpec,
        d: &DomainSpec,
        v: &VelocityFieldSpec,
    ) -> (Option<f64>, Option<f64>) {
        let hold = &self.space.hold_all;
        let n = self.cfg.boundary_samples;
        let h = polygon_hausdorff(&pd.polygon(n), &d.polygon(n), hold, self.cfg.hausdorff_grid, pd.r_min().min(d.r_min()))
            .map(|r| r.complementary)
            .map_err(|e| warn!("Hausdorff diagnostic skipped: {e}"))
            .ok();
        let c = if pv.is_zero() && v.is_zero() {
            Some(0.0)
        } else {
            field_distance_c1(pv, v, hold, self.cfg.c1_grid)
                .map_err(|e| warn!("C1 diagnostic skipped: {e}"))
                .ok()
        };
        (h, c)
    }

    /// One Nelder–Mead run from a given simplex, in scaled coordinates.
    fn nelder_mead(&mut self, simplex: Vec<Vec<f64>>) {
        let n = simplex.len() - 1;
        let values = self.eval_batch(&simplex);
        if values.len() < simplex.len() {
            return;
        }
        let mut pts: Vec<(Vec<f64>, f64)> = simplex.into_iter().zip(values).collect();
        loop {
            pts.sort_by(|a, b| a.1.total_cmp(&b.1));
            let diameter = pts[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let spread = pts[n].1 - pts[0].1;
            if diameter < self.cfg.xtol || (spread <= self.cfg.ftol && pts[0].1 < SENTINEL) || self.remaining() == 0 {
                return;
            }
            let centroid: Vec<f64> = (0..n).map(|i| pts[..n].iter().map(|(p, _)| p[i]).sum::<f64>() / n as f64).collect();
            let along = |c: f64| -> Vec<f64> {
                centroid.iter().zip(&pts[n].0).map(|(m, w)| m + c * (m - w)).collect()
            };
            let xr = along(1.0);
            let Some(&fr) = self.eval_batch(std::slice::from_ref(&xr)).first() else { return };
            if fr < pts[0].1 {
                let xe = along(2.0);
                let Some(&fe) = self.eval_batch(std::slice::from_ref(&xe)).first() else { return };
                pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < pts[n - 1].1 {
                pts[n] = (xr, fr);
                continue;
            }
            let (xc, outside) = if fr < pts[n].1 { (along(0.5), true) } else { (along(-0.5), false) };
            let Some(&fc) = self.eval_batch(std::slice::from_ref(&xc)).first() else { return };
            if (outside && fc <= fr) || (!outside && fc < pts[n].1) {
                pts[n] = (xc, fc);
                continue;
            }
            let x0 = pts[0].0.clone();
            let shrunk: Vec<Vec<f64>> = pts[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&x0).map(|(a, b)| b + 0.5 * (a - b)).collect())
                .collect();
            let vals = self.eval_batch(&shrunk);
            if vals.len() < shrunk.len() {
                return;
            }
            for (k, (p, v)) in shrunk.into_iter().zip(vals).enumerate() {
                pts[k + 1] = (p, v);
            }
        }
    }

    fn simplex(&self, center: &[f64], scale: f64, rng: Option<&mut ChaCha8Rng>) -> Vec<Vec<f64>> {
        let n = center.len();
        let mut signs = vec![1.0; n];
        if let Some(rng) = rng {
            for s in &mut signs {
                *s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
        }
        let mut out = vec![center.to_vec()];
        for i in 0..n {
            let mut p = center.to_vec();
            // Step inward when the outward step would leave the unit box.
            let step = if (0.0..=1.0).contains(&(p[i] + signs[i] * scale)) {
                signs[i] * scale
            } else {
                -signs[i] * scale
            };
            p[i] += step;
            out.push(p);
        }
        out
    }
}

/// Minimizes the objective over the parameter space within `cfg.budget`
/// further evaluations. Passing a previous state continues its sequence;
/// the best value carries over, so it never increases across the resume.
pub fn minimize(
    space: &ParamSpace,
    objective: &dyn Objective,
    cfg: &OptimizerConfig,
    resume: Option<OptimizerState>,
) -> Result<OptimizerState> {
    cfg.validate()?;
    space.validate()?;
    let n = space.dim();
    if cfg.budget < n + 1 {
        return Err(Error::Optimizer(format!(
            "budget {} is smaller than the simplex size {}",
            cfg.budget,
            n + 1
        )));
    }
    let state = resume.unwrap_or_default();
    let resuming = state.best.is_some();
    let mut search = Search {
        space,
        objective,
        cfg,
        limit: state.evaluations + cfg.budget,
        start: state.starts,
        state,
        best_specs: None,
    };
    if let Some(b) = &search.state.best {
        if let Decoded::Admissible { domain, velocity } = space.decode(&b.params) {
            search.best_specs = Some((domain, velocity));
        }
    }
    let x0 = match &search.state.best {
        Some(b) => search.to_scaled(&b.params),
        None => search.to_scaled(&space.initial()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (search.state.starts as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for k in 0..cfg.starts {
        if search.remaining() < n + 1 {
            break;
        }
        let simplex = if k == 0 {
            search.simplex(&x0, cfg.simplex_scale, None)
        } else {
            let center: Vec<f64> = x0
                .iter()
                .map(|c| (c + 0.25 * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0))
                .collect();
            search.simplex(&center, cfg.simplex_scale, Some(&mut rng))
        };
        search.start = search.state.starts;
        search.state.starts += 1;
        search.nelder_mead(simplex);
    }
    let mut scale = cfg.simplex_scale;
    while cfg.restarts && search.remaining() > n && scale > cfg.xtol {
        let Some(b) = &search.state.best else { break };
        scale *= 0.5;
        let center = search.to_scaled(&b.params);
        let simplex = search.simplex(&center, scale, Some(&mut rng));
        search.start = search.state.starts;
        search.state.starts += 1;
        search.nelder_mead(simplex);
    }
    let state = search.state;
    match &state.best {
        Some(b) => {
            info!(
                "optimizer: best {:.6e} after {} evaluations ({} starts{})",
                b.value,
                state.evaluations,
                state.starts,
                if resuming { ", resumed" } else { "" }
            );
            Ok(state)
        }
        None => {
            let least = state.history.iter().map(|h| h.violation).fold(f64::INFINITY, f64::min);
            Err(Error::Optimizer(format!(
                "no admissible point with a finite objective found in {} evaluations (smallest violation {least:e})",
                state.evaluations
            )))
        }
    }
}
