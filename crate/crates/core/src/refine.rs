//! Local refinement of blind-node positions against the squared-range
//! objective
//!
//! ```text
//!   f(s) = Σ_{(i,j)} (d̂_ij² − ‖s_i − s_j‖²)² + Σ_{(i,r)} (d̂_ir² − ‖s_i − a_r‖²)²
//! ```
//!
//! by gradient descent with an Armijo backtracking line search. Trial steps
//! use the Barzilai-Borwein length; every accepted step satisfies the
//! sufficient-decrease test, so the objective never increases.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::RangeMeasurements;
use crate::network::{Edge, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineOptions {
    pub max_iter: usize,
    /// Stop once `‖∇f‖ ≤ grad_tol · max(1, f)`.
    pub grad_tol: f64,
    /// Backtracking factor.
    pub shrink: f64,
    /// Armijo constant.
    pub sufficient_decrease: f64,
    #[serde(skip)]
    pub record_trace: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-9,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            record_trace: false,
        }
    }
}

impl RefineOptions {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iter < 1 {
            return Err("refine.max_iter must be at least 1".into());
        }
        if !(self.grad_tol > 0.0) {
            return Err("refine.grad_tol must be positive".into());
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err("refine.shrink must lie in (0, 1)".into());
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err("refine.sufficient_decrease must lie in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineStatus {
    Converged,
    MaxIter,
    /// The line search could not find a decreasing step.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub positions: Vec<Point2>,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub status: RefineStatus,
    pub trace: Vec<TracePoint>,
}

impl RefineOutcome {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective_m4,grad_norm_m3\n");
        for t in &self.trace {
            let _ = writeln!(out, "{},{:.12e},{:.12e}", t.iteration, t.objective, t.grad_norm);
        }
        out
    }
}

fn terms<'a>(
    measurements: &'a RangeMeasurements,
) -> impl Iterator<Item = (Edge, f64)> + Clone + 'a {
    measurements.iter().map(|r| (r.edge, r.measured * r.measured))
}

/// Squared-range objective, m⁴.
pub fn objective(positions: &[Point2], measurements: &RangeMeasurements, anchors: &[Point2]) -> f64 {
    objective_squared(positions, anchors, terms(measurements))
}

/// Same objective from `(edge, d̂²)` pairs.
pub fn objective_squared(
    positions: &[Point2],
    anchors: &[Point2],
    rows: impl IntoIterator<Item = (Edge, f64)>,
) -> f64 {
    rows.into_iter()
        .map(|(edge, d2)| {
            let r = d2 - model_sq(positions, anchors, edge);
            r * r
        })
        .sum()
}

fn model_sq(positions: &[Point2], anchors: &[Point2], edge: Edge) -> f64 {
    match edge {
        Edge::BlindBlind(i, j) => positions[i].dist_sq(&positions[j]),
        Edge::BlindAnchor(i, r) => positions[i].dist_sq(&anchors[r]),
    }
}

/// Analytic gradient, laid out as `[∂x₀, ∂y₀, ∂x₁, ∂y₁, …]`, m³.
pub fn gradient(positions: &[Point2], measurements: &RangeMeasurements, anchors: &[Point2]) -> Vec<f64> {
    let mut g = vec![0.0; 2 * positions.len()];
    accumulate_gradient(positions, anchors, terms(measurements), &mut g);
    g
}

fn accumulate_gradient(
    positions: &[Point2],
    anchors: &[Point2],
    rows: impl IntoIterator<Item = (Edge, f64)>,
    g: &mut [f64],
) {
    g.iter_mut().for_each(|v| *v = 0.0);
    for (edge, d2) in rows {
        match edge {
            Edge::BlindBlind(i, j) => {
                let delta = positions[i] - positions[j];
                let c = -4.0 * (d2 - delta.norm_sq());
                g[2 * i] += c * delta.x;
                g[2 * i + 1] += c * delta.y;
                g[2 * j] -= c * delta.x;
                g[2 * j + 1] -= c * delta.y;
            }
            Edge::BlindAnchor(i, r) => {
                let delta = positions[i] - anchors[r];
                let c = -4.0 * (d2 - delta.norm_sq());
                g[2 * i] += c * delta.x;
                g[2 * i + 1] += c * delta.y;
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn step_to(base: &[Point2], dir: &[f64], t: f64, out: &mut [Point2]) {
    for (i, (p, o)) in base.iter().zip(out.iter_mut()).enumerate() {
        *o = Point2::new(p.x - t * dir[2 * i], p.y - t * dir[2 * i + 1]);
    }
}

pub fn refine(
    initial: &[Point2],
    measurements: &RangeMeasurements,
    anchors: &[Point2],
    opts: &RefineOptions,
) -> RefineOutcome {
    let rows: Vec<(Edge, f64)> = terms(measurements).collect();
    let f_of = |p: &[Point2]| objective_squared(p, anchors, rows.iter().copied());

    let mut x = initial.to_vec();
    let mut trial = x.clone();
    let mut f = f_of(&x);
    let initial_objective = f;
    let mut g = vec![0.0; 2 * x.len()];
    accumulate_gradient(&x, anchors, rows.iter().copied(), &mut g);
    let mut gnorm = norm(&g);
    let mut trace = Vec::new();
    let mut record = |iteration: usize, objective: f64, grad_norm: f64| {
        if opts.record_trace {
            trace.push(TracePoint {
                iteration,
                objective,
                grad_norm,
            });
        }
    };
    record(0, f, gnorm);

    let mut status = RefineStatus::MaxIter;
    let mut iterations = 0;
    let mut step = if gnorm > 0.0 { 1.0 / gnorm } else { 1.0 };
    let mut g_new = vec![0.0; g.len()];
    while iterations < opts.max_iter {
        if gnorm <= opts.grad_tol * f.max(1.0) {
            status = RefineStatus::Converged;
            break;
        }
        // Backtrack from the trial length until the Armijo condition holds.
        let mut t = step;
        let mut accepted = None;
        for _ in 0..80 {
            step_to(&x, &g, t, &mut trial);
            let f_trial = f_of(&trial);
            if f_trial <= f - opts.sufficient_decrease * t * gnorm * gnorm {
                accepted = Some(f_trial);
                break;
            }
            t *= opts.shrink;
        }
        let Some(f_trial) = accepted else {
            status = RefineStatus::Stalled;
            break;
        };
        iterations += 1;
        accumulate_gradient(&trial, anchors, rows.iter().copied(), &mut g_new);

        // Barzilai-Borwein length for the next trial step: sᵀy / yᵀy.
        let mut sy = 0.0;
        let mut yy = 0.0;
        for (i, (a, b)) in trial.iter().zip(&x).enumerate() {
            let s = [a.x - b.x, a.y - b.y];
            let y = [g_new[2 * i] - g[2 * i], g_new[2 * i + 1] - g[2 * i + 1]];
            sy += s[0] * y[0] + s[1] * y[1];
            yy += y[0] * y[0] + y[1] * y[1];
        }
        step = if sy > 0.0 && yy > 0.0 { sy / yy } else { 2.0 * t };

        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        f = f_trial;
        gnorm = norm(&g);
        record(iterations, f, gnorm);
    }
    if status == RefineStatus::MaxIter && gnorm <= opts.grad_tol * f.max(1.0) {
        status = RefineStatus::Converged;
    }
    RefineOutcome {
        positions: x,
        objective: f,
        initial_objective,
        iterations,
        grad_norm: gnorm,
        status,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Propagation, RangeRecord};

    fn one_anchor_edge(measured_sq: f64) -> RangeMeasurements {
        RangeMeasurements {
            records: vec![RangeRecord {
                edge: Edge::BlindAnchor(0, 0),
                true_distance: 3.0,
                propagation: Propagation::None,
                measured: measured_sq.sqrt(),
            }],
            clamped: 0,
        }
    }

    #[test]
    fn single_term_algebra() {
        let anchors = [Point2::new(0.0, 0.0)];
        let pos = [Point2::new(3.0, 0.0)];
        let delta = 0.25;
        let f = objective(&pos, &one_anchor_edge(9.0 + delta), &anchors);
        assert!((f - delta * delta).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_has_zero_gradient() {
        let anchors = [Point2::new(0.0, 0.0)];
        let pos = [Point2::new(2.0, 1.0), Point2::new(5.0, 5.0)];
        let g = gradient(&pos, &one_anchor_edge(9.0), &anchors);
        assert_eq!(&g[2..], &[0.0, 0.0]);
        assert!(g[0] != 0.0);
    }

    #[test]
    fn truth_is_stationary() {
        let anchors = [Point2::new(0.0, 0.0)];
        let pos = [Point2::new(3.0, 0.0)];
        let out = refine(&pos, &one_anchor_edge(9.0), &anchors, &RefineOptions::default());
        assert_eq!(out.iterations, 0);
        assert_eq!(out.positions, pos.to_vec());
        assert_eq!(out.status, RefineStatus::Converged);
    }

    #[test]
    fn descends_from_far_start() {
        let anchors = [Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)];
        let meas = RangeMeasurements {
            records: vec![
                RangeRecord {
                    edge: Edge::BlindAnchor(0, 0),
                    true_distance: 5.0,
                    propagation: Propagation::None,
                    measured: 5.0,
                },
                RangeRecord {
                    edge: Edge::BlindAnchor(0, 1),
                    true_distance: 5.0,
                    propagation: Propagation::None,
                    measured: 5.0,
                },
            ],
            clamped: 0,
        };
        let start = [Point2::new(20.0, 20.0)];
        let opts = RefineOptions {
            record_trace: true,
            ..RefineOptions::default()
        };
        let out = refine(&start, &meas, &anchors, &opts);
        assert!(out.objective < out.initial_objective);
        assert!(out.objective < 1e-10, "{}", out.objective);
        assert!(out.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        assert!(out.trace_csv().starts_with("iteration,objective_m4,grad_norm_m3\n"));
    }

    #[test]
    fn options_validation() {
        assert!(RefineOptions::default().validate().is_ok());
        let bad = RefineOptions {
            max_iter: 0,
            ..RefineOptions::default()
        };
        assert!(bad.validate().is_err());
    }
}
