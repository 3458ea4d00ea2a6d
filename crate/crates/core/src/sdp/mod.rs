//! Semidefinite relaxation of the range equations.
//!
//! The lifted variable is
//!
//! ```text
//!       ┌ I₂   X ┐
//!   Z = │        │ ⪰ 0,     X = [x̂₁ … x̂ₘ] ∈ ℝ^{2×m},  Y ≈ XᵀX
//!       └ Xᵀ   Y ┘
//! ```
//!
//! Every measured range becomes one row `(w wᵀ)•Z + u − v = d̂²`, with
//! `w = (0, 0, eᵢ − eⱼ)` for a blind-blind link and `w = (a, −eᵢ)` for a
//! blind-anchor link, and the L1 slack `Σ(u + v)` is minimized. Three more
//! rows pin the top-left block to the identity.
//!
//! Before solving, coordinates are shifted to the anchor centroid and scaled
//! so the largest anchor offset or range is 1; the solution is mapped back by
//! the congruence that undoes this, so reported matrices stay PSD.

pub mod ipm;

use std::fmt::Write as _;

use faer::{Mat, Side};

pub use ipm::{SolveOptions, SolveStatus};
use ipm::{ConicProblem, ConicRow, RowMatrix};

use crate::channel::RangeMeasurements;
use crate::error::{Error, Result};
use crate::network::{Edge, Point2};
use crate::refine;

/// Cost on `Y_ii` for blind nodes with no path to an anchor. Without it
/// their block of `Z` is unbounded and the dual has no interior.
const UNANCHORED_TRACE_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRow {
    pub edge: Edge,
    /// Squared measured distance, m².
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub m: usize,
    pub anchors: Vec<Point2>,
    pub rows: Vec<MeasurementRow>,
}

/// Number of rows pinning the top-left 2×2 block to the identity.
pub const PINNING_ROWS: usize = 3;

impl SdpProblem {
    /// Side length of the matrix variable.
    pub fn dim(&self) -> usize {
        self.m + 2
    }

    /// Measurement rows plus the identity-pinning rows.
    pub fn n_rows(&self) -> usize {
        self.rows.len() + PINNING_ROWS
    }

    /// Sparse `w` with row `k`'s coefficient matrix equal to `w wᵀ`, in
    /// world coordinates.
    pub fn row_vector(&self, k: usize) -> Vec<(usize, f64)> {
        row_vector(self.rows[k].edge, &self.anchors, Point2::default(), 1.0)
    }

    /// Blind nodes that cannot reach any anchor through measured links.
    pub fn unanchored(&self) -> Vec<bool> {
        let m = self.m;
        let mut adj = vec![Vec::new(); m];
        let mut reached = vec![false; m];
        let mut stack = Vec::new();
        for row in &self.rows {
            match row.edge {
                Edge::BlindBlind(i, j) => {
                    adj[i].push(j);
                    adj[j].push(i);
                }
                Edge::BlindAnchor(i, _) => {
                    if !reached[i] {
                        reached[i] = true;
                        stack.push(i);
                    }
                }
            }
        }
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !reached[j] {
                    reached[j] = true;
                    stack.push(j);
                }
            }
        }
        reached.into_iter().map(|r| !r).collect()
    }

    fn frame(&self) -> Frame {
        let origin = if self.anchors.is_empty() {
            Point2::default()
        } else {
            let k = self.anchors.len() as f64;
            let sum = self.anchors.iter().fold(Point2::default(), |acc, &a| acc + a);
            sum * (1.0 / k)
        };
        let reach = self
            .anchors
            .iter()
            .map(|a| a.dist(&origin))
            .chain(self.rows.iter().map(|r| r.rhs.sqrt()))
            .fold(0.0, f64::max);
        Frame {
            origin,
            scale: if reach > 0.0 { reach } else { 1.0 },
        }
    }

    fn to_conic(&self, frame: &Frame) -> ConicProblem {
        let mut rows = vec![
            ConicRow {
                matrix: RowMatrix::Entries(vec![(0, 0, 1.0)]),
                rhs: 1.0,
                slack: false,
            },
            ConicRow {
                matrix: RowMatrix::Entries(vec![(1, 1, 1.0)]),
                rhs: 1.0,
                slack: false,
            },
            ConicRow {
                matrix: RowMatrix::Entries(vec![(0, 1, 0.5), (1, 0, 0.5)]),
                rhs: 0.0,
                slack: false,
            },
        ];
        let s2 = frame.scale * frame.scale;
        rows.extend(self.rows.iter().map(|r| ConicRow {
            matrix: RowMatrix::RankOne(row_vector(
                r.edge,
                &self.anchors,
                frame.origin,
                frame.scale,
            )),
            rhs: r.rhs / s2,
            slack: true,
        }));
        let mut cost_diag = vec![0.0; self.dim()];
        for (i, unanchored) in self.unanchored().into_iter().enumerate() {
            if unanchored {
                cost_diag[2 + i] = UNANCHORED_TRACE_WEIGHT;
            }
        }
        ConicProblem {
            dim: self.dim(),
            rows,
            cost_diag,
        }
    }

    /// Human-readable listing of every constraint row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# sdp relaxation");
        let _ = writeln!(out, "dim {}", self.dim());
        let _ = writeln!(out, "blind {}", self.m);
        let _ = writeln!(out, "rows {}", self.n_rows());
        for (r, a) in self.anchors.iter().enumerate() {
            let _ = writeln!(out, "anchor {r} {:.6} {:.6}", a.x, a.y);
        }
        let _ = writeln!(out, "pin Z[0,0] = 1");
        let _ = writeln!(out, "pin Z[1,1] = 1");
        let _ = writeln!(out, "pin Z[0,1] = 0");
        for (k, row) in self.rows.iter().enumerate() {
            let (kind, i, j) = match row.edge {
                Edge::BlindBlind(i, j) => ("bb", i, j),
                Edge::BlindAnchor(i, r) => ("ba", i, r),
            };
            let w: Vec<String> = self
                .row_vector(k)
                .iter()
                .map(|(idx, val)| format!("{idx}:{val:.6}"))
                .collect();
            let _ = writeln!(
                out,
                "row {k} {kind} {i} {j} rhs {:.9} w [{}]",
                row.rhs,
                w.join(" ")
            );
        }
        out
    }
}

fn row_vector(edge: Edge, anchors: &[Point2], origin: Point2, scale: f64) -> Vec<(usize, f64)> {
    match edge {
        Edge::BlindBlind(i, j) => vec![(2 + i, 1.0), (2 + j, -1.0)],
        Edge::BlindAnchor(i, r) => {
            let a = (anchors[r] - origin) * (1.0 / scale);
            vec![(0, a.x), (1, a.y), (2 + i, -1.0)]
        }
    }
}

/// Shift and scale applied before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Frame {
    origin: Point2,
    scale: f64,
}

/// Builds the relaxation for `m` blind nodes from measured ranges.
pub fn build_relaxation(
    measurements: &RangeMeasurements,
    anchors: &[Point2],
    m: usize,
) -> Result<SdpProblem> {
    if measurements.is_empty() {
        return Err(Error::EmptyProblem);
    }
    let rows = measurements
        .iter()
        .map(|rec| {
            let valid = match rec.edge {
                Edge::BlindBlind(i, j) => i < m && j < m && i != j,
                Edge::BlindAnchor(i, r) => i < m && r < anchors.len(),
            };
            if !valid || !(rec.measured >= 0.0 && rec.measured.is_finite()) {
                return Err(Error::Config(format!(
                    "measurement {:?} does not fit {m} blind nodes and {} anchors",
                    rec.edge,
                    anchors.len()
                )));
            }
            Ok(MeasurementRow {
                edge: rec.edge,
                rhs: rec.measured * rec.measured,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SdpProblem {
        m,
        anchors: anchors.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Relative duality gap at the returned iterate.
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Smallest eigenvalue of the returned `Z`.
    pub min_eigenvalue: f64,
    /// Largest absolute eigenvalue of the returned `Z`.
    pub spectral_norm: f64,
}

impl SolverStats {
    /// `λ_min(Z) ≥ −1e−7 ‖Z‖`.
    pub fn psd_certified(&self) -> bool {
        self.min_eigenvalue >= -1e-7 * self.spectral_norm
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Columns of the X block, in meters.
    pub estimated_positions: Vec<Point2>,
    /// Full `(2+m)×(2+m)` solution matrix in world coordinates.
    pub z: Mat<f64>,
    /// Total absolute slack `Σ|u − v|`, m². Interior-point iterates keep
    /// both halves of each pair positive; only their difference is used.
    pub slack_l1: f64,
    /// Squared-range objective at the extracted positions, m⁴.
    pub objective_value: f64,
    pub stats: SolverStats,
}

impl SdpSolution {
    pub fn m(&self) -> usize {
        self.estimated_positions.len()
    }

    /// The `Y` block (m×m).
    pub fn gram_block(&self) -> Mat<f64> {
        let m = self.m();
        Mat::from_fn(m, m, |i, j| self.z[(2 + i, 2 + j)])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.stats;
        let _ = writeln!(out, "# sdp solution");
        let _ = writeln!(out, "status {}", s.status.label());
        let _ = writeln!(out, "iterations {}", s.iterations);
        let _ = writeln!(out, "gap {:e}", s.gap);
        let _ = writeln!(out, "primal_residual {:e}", s.primal_residual);
        let _ = writeln!(out, "dual_residual {:e}", s.dual_residual);
        let _ = writeln!(out, "min_eigenvalue {:e}", s.min_eigenvalue);
        let _ = writeln!(out, "slack_l1 {:.9}", self.slack_l1);
        let _ = writeln!(out, "objective {:.9}", self.objective_value);
        let extracted = extract_positions(self);
        for (i, (p, t)) in extracted
            .positions
            .iter()
            .zip(&extracted.trace_indicators)
            .enumerate()
        {
            let _ = writeln!(out, "position {i} {:.9} {:.9} trace {:.3e}", p.x, p.y, t);
        }
        let n = self.z.nrows();
        let _ = writeln!(out, "Z {n}x{n}");
        for i in 0..n {
            let line: Vec<String> = (0..n).map(|j| format!("{:.6}", self.z[(i, j)])).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Solves the relaxation. Solver failures are reported through
/// `stats.status`; the last iterate is always returned.
pub fn solve_sdp(problem: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let frame = problem.frame();
    let conic = problem.to_conic(&frame);
    let sol = ipm::solve(&conic, opts);

    let n = problem.dim();
    let m = problem.m;
    // Z_world = Tᵀ Z T with T = [[I, o·1ᵀ], [0, scale·I]].
    let mut t = Mat::<f64>::identity(n, n);
    for i in 0..m {
        t[(0, 2 + i)] = frame.origin.x;
        t[(1, 2 + i)] = frame.origin.y;
        t[(2 + i, 2 + i)] = frame.scale;
    }
    let z = ipm::symmetrize(&(&(t.transpose() * &sol.x) * &t));

    let estimated_positions: Vec<Point2> =
        (0..m).map(|i| Point2::new(z[(0, 2 + i)], z[(1, 2 + i)])).collect();
    let slack_l1 = conic
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.slack)
        .map(|(k, _)| (sol.u[k] - sol.v[k]).abs())
        .sum::<f64>()
        * frame.scale
        * frame.scale;
    let objective_value = refine::objective_squared(
        &estimated_positions,
        &problem.anchors,
        problem.rows.iter().map(|r| (r.edge, r.rhs)),
    );
    let (min_eigenvalue, spectral_norm) = match z.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) if !ev.is_empty() => {
            let lo = ev[0];
            let hi = ev[ev.len() - 1];
            (lo, lo.abs().max(hi.abs()))
        }
        _ => (f64::NAN, f64::NAN),
    };
    SdpSolution {
        estimated_positions,
        z,
        slack_l1,
        objective_value,
        stats: SolverStats {
            status: sol.status,
            iterations: sol.iterations,
            gap: sol.gap,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            min_eigenvalue,
            spectral_norm,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPositions {
    pub positions: Vec<Point2>,
    /// `Y_ii − ‖x̂_i‖²` per blind node; zero when the relaxation pins the
    /// node down exactly.
    pub trace_indicators: Vec<f64>,
}

pub fn extract_positions(solution: &SdpSolution) -> ExtractedPositions {
    let z = &solution.z;
    let positions = solution.estimated_positions.clone();
    let trace_indicators = positions
        .iter()
        .enumerate()
        .map(|(i, p)| z[(2 + i, 2 + i)] - p.norm_sq())
        .collect();
    ExtractedPositions {
        positions,
        trace_indicators,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Propagation, RangeRecord};

    fn meas(records: &[(Edge, f64)]) -> RangeMeasurements {
        RangeMeasurements {
            records: records
                .iter()
                .map(|&(edge, d)| RangeRecord {
                    edge,
                    true_distance: d,
                    propagation: Propagation::None,
                    measured: d,
                })
                .collect(),
            clamped: 0,
        }
    }

    fn three_anchors() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(0.0, 10.0),
        ]
    }

    #[test]
    fn one_blind_three_anchor_rows() {
        let anchors = three_anchors();
        let s = Point2::new(3.0, 4.0);
        let recs: Vec<(Edge, f64)> = (0..3)
            .map(|r| (Edge::BlindAnchor(0, r), s.dist(&anchors[r])))
            .collect();
        let p = build_relaxation(&meas(&recs), &anchors, 1).unwrap();
        assert_eq!(p.rows.len(), 3);
        assert_eq!(p.n_rows(), 6);
        assert_eq!(p.dim(), 3);
        assert!(p.rows.iter().all(|r| r.rhs >= 0.0));
    }

    #[test]
    fn no_measurements_is_an_error() {
        let err = build_relaxation(&RangeMeasurements::default(), &three_anchors(), 2);
        assert!(matches!(err, Err(Error::EmptyProblem)));
    }

    #[test]
    fn out_of_range_edge_is_rejected() {
        let recs = [(Edge::BlindAnchor(0, 5), 1.0)];
        assert!(build_relaxation(&meas(&recs), &three_anchors(), 1).is_err());
    }

    #[test]
    fn row_functional_reproduces_squared_distance() {
        // (w wᵀ)•Z at the rank-two lifting of the truth equals ‖s − a‖².
        let anchors = three_anchors();
        let truth = [Point2::new(3.0, 4.0), Point2::new(7.0, 1.0)];
        let recs = [
            (Edge::BlindAnchor(0, 1), truth[0].dist(&anchors[1])),
            (Edge::BlindBlind(0, 1), truth[0].dist(&truth[1])),
        ];
        let p = build_relaxation(&meas(&recs), &anchors, 2).unwrap();
        let lift = |idx: usize| -> [f64; 2] {
            match idx {
                0 => [1.0, 0.0],
                1 => [0.0, 1.0],
                k => [truth[k - 2].x, truth[k - 2].y],
            }
        };
        // Z = Vᵀ V with V = [I₂ | X].
        for k in 0..p.rows.len() {
            let w = p.row_vector(k);
            let mut acc = 0.0;
            for &(a, wa) in &w {
                for &(b, wb) in &w {
                    let (la, lb) = (lift(a), lift(b));
                    acc += wa * wb * (la[0] * lb[0] + la[1] * lb[1]);
                }
            }
            assert!((acc - p.rows[k].rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn unanchored_components_are_detected() {
        let anchors = three_anchors();
        let recs = [
            (Edge::BlindAnchor(0, 0), 1.0),
            (Edge::BlindBlind(0, 1), 1.0),
            (Edge::BlindBlind(2, 3), 1.0),
        ];
        let p = build_relaxation(&meas(&recs), &anchors, 5).unwrap();
        assert_eq!(p.unanchored(), vec![false, false, true, true, true]);
    }

    #[test]
    fn dump_lists_every_row() {
        let anchors = three_anchors();
        let recs = [(Edge::BlindAnchor(0, 0), 5.0), (Edge::BlindAnchor(0, 1), 5.0)];
        let p = build_relaxation(&meas(&recs), &anchors, 1).unwrap();
        let text = p.to_text();
        assert_eq!(text.lines().filter(|l| l.starts_with("row ")).count(), 2);
        assert_eq!(text.lines().filter(|l| l.starts_with("pin ")).count(), 3);
    }
}
