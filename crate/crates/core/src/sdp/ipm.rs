//! Dense primal-dual interior-point solver for the conic program
//!
//! ```text
//!   minimize    C•X + Σ_k∈S (u_k + v_k)
//!   subject to  A_k•X + (u_k − v_k)·[k ∈ S] = b_k      k = 1..K
//!               X ⪰ 0,  u, v ≥ 0
//! ```
//!
//! where `S` is the set of rows carrying an L1 slack pair and `C` is
//! diagonal. Search directions are HKM (X ΔS S⁻¹ symmetrized) with a
//! Mehrotra predictor-corrector step. Constraint matrices are either
//! sparse rank-one `v vᵀ` (the distance rows) or a short list of sparse
//! entries, which keeps forming the Schur complement at O(K²).

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

/// Coefficient matrix of one constraint row.
#[derive(Debug, Clone, PartialEq)]
pub enum RowMatrix {
    /// `A = v vᵀ` for a sparse `v` given as `(index, value)`.
    RankOne(Vec<(usize, f64)>),
    /// Symmetric `A` given entry by entry; both triangles are listed, so
    /// `A•X = Σ a_pq X_pq`.
    Entries(Vec<(usize, usize, f64)>),
}

impl RowMatrix {
    fn dot(&self, x: &Mat<f64>) -> f64 {
        match self {
            RowMatrix::RankOne(v) => {
                let mut acc = 0.0;
                for &(p, vp) in v {
                    for &(q, vq) in v {
                        acc += vp * vq * x[(p, q)];
                    }
                }
                acc
            }
            RowMatrix::Entries(e) => e.iter().map(|&(p, q, a)| a * x[(p, q)]).sum(),
        }
    }

    fn add_scaled_to(&self, alpha: f64, out: &mut Mat<f64>) {
        match self {
            RowMatrix::RankOne(v) => {
                for &(p, vp) in v {
                    for &(q, vq) in v {
                        out[(p, q)] += alpha * vp * vq;
                    }
                }
            }
            RowMatrix::Entries(e) => {
                for &(p, q, a) in e {
                    out[(p, q)] += alpha * a;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicRow {
    pub matrix: RowMatrix,
    pub rhs: f64,
    pub slack: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub dim: usize,
    pub rows: Vec<ConicRow>,
    /// Diagonal of the cost matrix `C`.
    pub cost_diag: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    NumericalTrouble,
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::NumericalTrouble => "numerical_trouble",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative duality gap.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility.
    pub feas_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            gap_tol: 1e-7,
            feas_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Mat<f64>,
    pub s: Mat<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_objective: f64,
}


struct Iterate {
    x: Mat<f64>,
    s: Mat<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    zu: Vec<f64>,
    zv: Vec<f64>,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Mat<f64>,
    ru: Vec<f64>,
    rv: Vec<f64>,
}

struct Direction {
    dx: Mat<f64>,
    ds: Mat<f64>,
    dy: Vec<f64>,
    du: Vec<f64>,
    dv: Vec<f64>,
    dzu: Vec<f64>,
    dzv: Vec<f64>,
}

/// Iterations without a 10% gap reduction before giving up.
const STALL_WINDOW: usize = 6;
/// Stall detection only applies once the gap is this small.
const STALL_GAP: f64 = 1e-4;

pub fn solve(problem: &ConicProblem, opts: &SolveOptions) -> ConicSolution {
    Solver::new(problem).run(opts)
}

struct Solver<'a> {
    p: &'a ConicProblem,
    n: usize,
    k: usize,
    /// Rank-one rows, as positions into `p.rows`.
    rank_one: Vec<usize>,
    /// Entry-list rows.
    entries: Vec<usize>,
    nu: f64,
    b_norm: f64,
    c_norm: f64,
}

impl<'a> Solver<'a> {
    fn new(p: &'a ConicProblem) -> Self {
        let n = p.dim;
        let k = p.rows.len();
        let mut rank_one = Vec::new();
        let mut entries = Vec::new();
        for (idx, row) in p.rows.iter().enumerate() {
            match row.matrix {
                RowMatrix::RankOne(_) => rank_one.push(idx),
                RowMatrix::Entries(_) => entries.push(idx),
            }
        }
        let n_slack = p.rows.iter().filter(|r| r.slack).count();
        let b_norm = p.rows.iter().map(|r| r.rhs * r.rhs).sum::<f64>().sqrt();
        let c_norm = (p.cost_diag.iter().map(|c| c * c).sum::<f64>() + 2.0 * n_slack as f64).sqrt();
        Self {
            p,
            n,
            k,
            rank_one,
            entries,
            nu: (n + 2 * n_slack) as f64,
            b_norm,
            c_norm,
        }
    }

    fn initial_point(&self) -> Iterate {
        let n = self.n;
        // Scale X so that every row functional is comparable to its rhs.
        let max_rhs = self.p.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        let xi = (1.0 + max_rhs).max(n as f64).sqrt().max(1.0);
        let eta = 1.0f64.max((n as f64).sqrt());
        let x = Mat::<f64>::identity(n, n) * faer::Scale(xi);
        let s = Mat::<f64>::identity(n, n) * faer::Scale(eta);
        let y = vec![0.0; self.k];
        let mut u = vec![0.0; self.k];
        let mut v = vec![0.0; self.k];
        let mut zu = vec![0.0; self.k];
        let mut zv = vec![0.0; self.k];
        for (idx, row) in self.p.rows.iter().enumerate() {
            if row.slack {
                let r = row.rhs - row.matrix.dot(&x);
                u[idx] = r.max(1.0);
                v[idx] = (-r).max(1.0);
                zu[idx] = 1.0;
                zv[idx] = 1.0;
            }
        }
        Iterate {
            x,
            s,
            y,
            u,
            v,
            zu,
            zv,
        }
    }

    fn adjoint(&self, y: &[f64]) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(self.n, self.n);
        for (row, &yk) in self.p.rows.iter().zip(y) {
            if yk != 0.0 {
                row.matrix.add_scaled_to(yk, &mut out);
            }
        }
        out
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let rp = self
            .p
            .rows
            .iter()
            .enumerate()
            .map(|(idx, row)| {
                let mut r = row.rhs - row.matrix.dot(&it.x);
                if row.slack {
                    r -= it.u[idx] - it.v[idx];
                }
                r
            })
            .collect();
        let mut rd = self.adjoint(&it.y) * faer::Scale(-1.0) - &it.s;
        for (i, c) in self.p.cost_diag.iter().enumerate() {
            rd[(i, i)] += c;
        }
        let mut ru = vec![0.0; self.k];
        let mut rv = vec![0.0; self.k];
        for (idx, row) in self.p.rows.iter().enumerate() {
            if row.slack {
                ru[idx] = 1.0 - it.y[idx] - it.zu[idx];
                rv[idx] = 1.0 + it.y[idx] - it.zv[idx];
            }
        }
        Residuals { rp, rd, ru, rv }
    }

    fn complementarity(&self, x: &Mat<f64>, s: &Mat<f64>, it_lp: [&[f64]; 4]) -> f64 {
        let [u, zu, v, zv] = it_lp;
        let mut acc = frob_dot(x, s);
        for idx in 0..self.k {
            if self.p.rows[idx].slack {
                acc += u[idx] * zu[idx] + v[idx] * zv[idx];
            }
        }
        acc
    }

    fn primal_objective(&self, it: &Iterate) -> f64 {
        let mut obj: f64 = self
            .p
            .cost_diag
            .iter()
            .enumerate()
            .map(|(i, c)| c * it.x[(i, i)])
            .sum();
        for (idx, row) in self.p.rows.iter().enumerate() {
            if row.slack {
                obj += it.u[idx] + it.v[idx];
            }
        }
        obj
    }

    /// Schur complement `M_kl = A_k • (X A_l S⁻¹)` plus the LP diagonal.
    fn schur(&self, it: &Iterate, s_inv: &Mat<f64>) -> Mat<f64> {
        let n = self.n;
        let r1 = &self.rank_one;
        let vecs: Vec<&Vec<(usize, f64)>> = r1
            .iter()
            .map(|&idx| match &self.p.rows[idx].matrix {
                RowMatrix::RankOne(v) => v,
                RowMatrix::Entries(_) => unreachable!(),
            })
            .collect();
        // XV and S⁻¹V, column per rank-one row.
        let mut xv = Mat::<f64>::zeros(n, r1.len());
        let mut sv = Mat::<f64>::zeros(n, r1.len());
        for (col, v) in vecs.iter().enumerate() {
            for &(q, vq) in v.iter() {
                for p in 0..n {
                    xv[(p, col)] += it.x[(p, q)] * vq;
                    sv[(p, col)] += s_inv[(p, q)] * vq;
                }
            }
        }
        let mut m = Mat::<f64>::zeros(self.k, self.k);
        for (a, v) in vecs.iter().enumerate() {
            let ka = r1[a];
            for b in 0..=a {
                let mut g = 0.0;
                let mut h = 0.0;
                for &(p, vp) in v.iter() {
                    g += vp * xv[(p, b)];
                    h += vp * sv[(p, b)];
                }
                let val = g * h;
                let kb = r1[b];
                m[(ka, kb)] = val;
                m[(kb, ka)] = val;
            }
        }
        for (ea, &ke) in self.entries.iter().enumerate() {
            let RowMatrix::Entries(ent) = &self.p.rows[ke].matrix else {
                unreachable!()
            };
            for (col, &kb) in r1.iter().enumerate() {
                let val: f64 = ent
                    .iter()
                    .map(|&(p, q, a)| a * sv[(p, col)] * xv[(q, col)])
                    .sum();
                m[(ke, kb)] = val;
                m[(kb, ke)] = val;
            }
            for &kf in &self.entries[..=ea] {
                let RowMatrix::Entries(other) = &self.p.rows[kf].matrix else {
                    unreachable!()
                };
                let mut val = 0.0;
                for &(p, q, a) in ent {
                    for &(r, s, b) in other {
                        val += a * b * it.x[(q, r)] * s_inv[(s, p)];
                    }
                }
                m[(ke, kf)] = val;
                m[(kf, ke)] = val;
            }
        }
        for (idx, row) in self.p.rows.iter().enumerate() {
            if row.slack {
                m[(idx, idx)] += it.u[idx] / it.zu[idx] + it.v[idx] / it.zv[idx];
            }
        }
        m
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        res: &Residuals,
        s_inv: &Mat<f64>,
        schur: &SchurFactor,
        sigma_mu: f64,
        corr: Option<&Direction>,
    ) -> Direction {
        let n = self.n;
        // Target complementarity: σμ I − ΔXa ΔSa.
        let mut target = Mat::<f64>::identity(n, n) * faer::Scale(sigma_mu);
        if let Some(c) = corr {
            target -= &c.dx * &c.ds;
        }
        let xrd = &it.x * &res.rd;
        let e = &(&target - &xrd) * s_inv - &it.x;

        let mut tu = vec![0.0; self.k];
        let mut tv = vec![0.0; self.k];
        let mut rhs = Mat::<f64>::zeros(self.k, 1);
        for (idx, row) in self.p.rows.iter().enumerate() {
            let mut r = res.rp[idx] - row.matrix.dot(&e);
            if row.slack {
                tu[idx] = sigma_mu;
                tv[idx] = sigma_mu;
                if let Some(c) = corr {
                    tu[idx] -= c.du[idx] * c.dzu[idx];
                    tv[idx] -= c.dv[idx] * c.dzv[idx];
                }
                let (u, v, zu, zv) = (it.u[idx], it.v[idx], it.zu[idx], it.zv[idx]);
                let eu = tu[idx] / zu - u - u * res.ru[idx] / zu;
                let ev = tv[idx] / zv - v - v * res.rv[idx] / zv;
                r -= eu - ev;
            }
            rhs[(idx, 0)] = r;
        }
        let sol = schur.solve(&rhs);
        let dy: Vec<f64> = (0..self.k).map(|i| sol[(i, 0)]).collect();

        let ds = &res.rd - self.adjoint(&dy);
        let raw = &(&target - &(&it.x * &ds)) * s_inv - &it.x;
        let dx = symmetrize(&raw);

        let mut du = vec![0.0; self.k];
        let mut dv = vec![0.0; self.k];
        let mut dzu = vec![0.0; self.k];
        let mut dzv = vec![0.0; self.k];
        for (idx, row) in self.p.rows.iter().enumerate() {
            if row.slack {
                dzu[idx] = res.ru[idx] - dy[idx];
                dzv[idx] = res.rv[idx] + dy[idx];
                du[idx] = (tu[idx] - it.u[idx] * it.zu[idx] - it.u[idx] * dzu[idx]) / it.zu[idx];
                dv[idx] = (tv[idx] - it.v[idx] * it.zv[idx] - it.v[idx] * dzv[idx]) / it.zv[idx];
            }
        }
        Direction {
            dx,
            ds,
            dy,
            du,
            dv,
            dzu,
            dzv,
        }
    }

    fn max_steps(&self, it: &Iterate, d: &Direction) -> Option<(f64, f64)> {
        let mut ap = max_psd_step(&it.x, &d.dx)?;
        let mut ad = max_psd_step(&it.s, &d.ds)?;
        for idx in 0..self.k {
            if self.p.rows[idx].slack {
                ap = ap.min(max_ray_step(it.u[idx], d.du[idx]));
                ap = ap.min(max_ray_step(it.v[idx], d.dv[idx]));
                ad = ad.min(max_ray_step(it.zu[idx], d.dzu[idx]));
                ad = ad.min(max_ray_step(it.zv[idx], d.dzv[idx]));
            }
        }
        Some((ap, ad))
    }

    fn run(&self, opts: &SolveOptions) -> ConicSolution {
        let mut it = self.initial_point();
        let mut status = SolveStatus::MaxIter;
        let mut iterations = 0;
        let mut last: (f64, f64, f64);
        let mut history = Vec::new();
        let mut step_fraction = 0.9;
        loop {
            let res = self.residuals(&it);
            let pobj = self.primal_objective(&it);
            let dobj: f64 = self.p.rows.iter().zip(&it.y).map(|(r, y)| r.rhs * y).sum();
            let comp = self.complementarity(&it.x, &it.s, [&it.u, &it.zu, &it.v, &it.zv]);
            let mu = comp / self.nu;
            let denom = 1.0 + pobj.abs() + dobj.abs();
            let gap = (pobj - dobj).abs().max(comp) / denom;
            let pinf = norm(&res.rp) / (1.0 + self.b_norm);
            let dinf = (frob_dot(&res.rd, &res.rd) + dot(&res.ru, &res.ru) + dot(&res.rv, &res.rv))
                .sqrt()
                / (1.0 + self.c_norm);
            last = (gap, pinf, dinf);
            if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
                status = SolveStatus::Optimal;
                break;
            }
            if iterations >= opts.max_iter {
                break;
            }
            // Past the point where roundoff dominates the search direction
            // the gap stops moving; further iterations only burn time.
            history.push(gap);
            if gap < STALL_GAP
                && history.len() > STALL_WINDOW
                && gap > 0.9 * history[history.len() - 1 - STALL_WINDOW]
            {
                status = SolveStatus::NumericalTrouble;
                break;
            }
            iterations += 1;

            let Some(s_inv) = spd_inverse(&it.s) else {
                status = SolveStatus::NumericalTrouble;
                break;
            };
            let Some(chol) = SchurFactor::new(self.schur(&it, &s_inv)) else {
                status = SolveStatus::NumericalTrouble;
                break;
            };

            let pred = self.direction(&it, &res, &s_inv, &chol, 0.0, None);
            let Some((ap, ad)) = self.max_steps(&it, &pred) else {
                status = SolveStatus::NumericalTrouble;
                break;
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let x_aff = &it.x + &pred.dx * faer::Scale(ap);
            let s_aff = &it.s + &pred.ds * faer::Scale(ad);
            let lp_aff = |base: &[f64], dir: &[f64], a: f64| -> Vec<f64> {
                base.iter().zip(dir).map(|(b, d)| b + a * d).collect()
            };
            let (ua, va) = (lp_aff(&it.u, &pred.du, ap), lp_aff(&it.v, &pred.dv, ap));
            let (zua, zva) = (lp_aff(&it.zu, &pred.dzu, ad), lp_aff(&it.zv, &pred.dzv, ad));
            let mu_aff = self.complementarity(&x_aff, &s_aff, [&ua, &zua, &va, &zva]) / self.nu;
            // Centering exponent and step fraction follow SDPT3's heuristics.
            let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powf(expon);

            let corr = self.direction(&it, &res, &s_inv, &chol, sigma * mu, Some(&pred));
            let Some((ap, ad)) = self.max_steps(&it, &corr) else {
                status = SolveStatus::NumericalTrouble;
                break;
            };
            let mut ap = (step_fraction * ap).min(1.0);
            let mut ad = (step_fraction * ad).min(1.0);

            // Roundoff can leave a step that lands just outside the cone.
            let mut accepted = None;
            for _ in 0..30 {
                let x_new = &it.x + &corr.dx * faer::Scale(ap);
                let s_new = &it.s + &corr.ds * faer::Scale(ad);
                if x_new.llt(Side::Lower).is_ok() && s_new.llt(Side::Lower).is_ok() {
                    accepted = Some((x_new, s_new));
                    break;
                }
                ap *= 0.8;
                ad *= 0.8;
            }
            let Some((x_new, s_new)) = accepted else {
                status = SolveStatus::NumericalTrouble;
                break;
            };
            if ap < 1e-10 && ad < 1e-10 {
                status = SolveStatus::NumericalTrouble;
                break;
            }
            step_fraction = 0.9 + 0.09 * ap.min(ad);
            it.x = x_new;
            it.s = s_new;
            for idx in 0..self.k {
                it.y[idx] += ad * corr.dy[idx];
                if self.p.rows[idx].slack {
                    it.u[idx] += ap * corr.du[idx];
                    it.v[idx] += ap * corr.dv[idx];
                    it.zu[idx] += ad * corr.dzu[idx];
                    it.zv[idx] += ad * corr.dzv[idx];
                }
            }
        }
        let primal_objective = self.primal_objective(&it);
        ConicSolution {
            x: it.x,
            s: it.s,
            y: it.y,
            u: it.u,
            v: it.v,
            status,
            iterations,
            gap: last.0,
            primal_residual: last.1,
            dual_residual: last.2,
            primal_objective,
        }
    }
}

/// Factored Schur complement. The system is scaled to unit diagonal first;
/// if Cholesky still fails a small diagonal shift is added.
struct SchurFactor {
    m: Mat<f64>,
    d: Vec<f64>,
    chol: faer::linalg::solvers::Llt<f64>,
}

impl SchurFactor {
    fn new(m: Mat<f64>) -> Option<Self> {
        let k = m.nrows();
        let d: Vec<f64> = (0..k)
            .map(|i| {
                let v = m[(i, i)];
                if v > 0.0 && v.is_finite() { 1.0 / v.sqrt() } else { 1.0 }
            })
            .collect();
        let scaled = Mat::from_fn(k, k, |i, j| m[(i, j)] * d[i] * d[j]);
        if !scaled.col_iter().all(|c| c.iter().all(|v| v.is_finite())) {
            return None;
        }
        let mut chol = scaled.llt(Side::Lower).ok();
        for exp in [-14, -12, -10, -8] {
            if chol.is_some() {
                break;
            }
            let mut reg = scaled.clone();
            for i in 0..k {
                reg[(i, i)] += 10f64.powi(exp);
            }
            chol = reg.llt(Side::Lower).ok();
        }
        Some(Self { m, d, chol: chol? })
    }

    fn solve_scaled(&self, rhs: &Mat<f64>) -> Mat<f64> {
        use faer::linalg::solvers::Solve;
        let k = self.d.len();
        let b = Mat::from_fn(k, 1, |i, _| rhs[(i, 0)] * self.d[i]);
        let z = self.chol.solve(&b);
        Mat::from_fn(k, 1, |i, _| z[(i, 0)] * self.d[i])
    }

    /// Solve with one round of iterative refinement.
    fn solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        let mut x = self.solve_scaled(rhs);
        let r = rhs - &self.m * &x;
        x += self.solve_scaled(&r);
        x
    }
}

fn spd_inverse(a: &Mat<f64>) -> Option<Mat<f64>> {
    let chol = a.llt(Side::Lower).ok()?;
    Some(symmetrize(&chol.inverse()))
}

/// Largest α with `a + α d ⪰ 0` for positive definite `a`.
fn max_psd_step(a: &Mat<f64>, d: &Mat<f64>) -> Option<f64> {
    let chol = a.llt(Side::Lower).ok()?;
    let l_inv = lower_triangular_inverse(chol.L());
    let b = symmetrize(&(&(&l_inv * d) * l_inv.transpose()));
    let eig = b.self_adjoint_eigenvalues(Side::Lower).ok()?;
    let min = eig.first().copied().unwrap_or(0.0);
    Some(if min < 0.0 { -1.0 / min } else { f64::INFINITY })
}

fn max_ray_step(x: f64, dx: f64) -> f64 {
    if dx < 0.0 {
        -x / dx
    } else {
        f64::INFINITY
    }
}

fn lower_triangular_inverse(l: faer::MatRef<'_, f64>) -> Mat<f64> {
    let n = l.nrows();
    let mut inv = Mat::<f64>::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = 1.0 / l[(col, col)];
        for row in col + 1..n {
            let mut acc = 0.0;
            for k in col..row {
                acc += l[(row, k)] * inv[(k, col)];
            }
            inv[(row, col)] = -acc / l[(row, row)];
        }
    }
    inv
}

pub(crate) fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

fn frob_dot(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry_row(entries: Vec<(usize, usize, f64)>, rhs: f64) -> ConicRow {
        ConicRow {
            matrix: RowMatrix::Entries(entries),
            rhs,
            slack: false,
        }
    }

    #[test]
    fn lp_like_two_by_two() {
        // min X00 + X11 s.t. X01 = 1, X ⪰ 0 → X = [[1,1],[1,1]], objective 2.
        let p = ConicProblem {
            dim: 2,
            rows: vec![entry_row(vec![(0, 1, 0.5), (1, 0, 0.5)], 1.0)],
            cost_diag: vec![1.0, 1.0],
        };
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 2.0).abs() < 1e-6);
        assert!((sol.x[(0, 0)] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn slack_absorbs_inconsistent_rows() {
        // X00 = 1 exactly, and x00 + u − v = 3 with L1 cost: slack 2.
        let p = ConicProblem {
            dim: 1,
            rows: vec![
                entry_row(vec![(0, 0, 1.0)], 1.0),
                ConicRow {
                    matrix: RowMatrix::RankOne(vec![(0, 1.0)]),
                    rhs: 3.0,
                    slack: true,
                },
            ],
            cost_diag: vec![0.0],
        };
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 2.0).abs() < 1e-6, "{}", sol.primal_objective);
        assert!((sol.u[1] - sol.v[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn psd_step_matches_scalar_case() {
        let a = Mat::<f64>::identity(2, 2);
        let d = Mat::from_fn(2, 2, |i, j| if i == j { -0.5 } else { 0.0 });
        assert!((max_psd_step(&a, &d).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn triangular_inverse() {
        let l = Mat::from_fn(3, 3, |i, j| if j <= i { (i + j + 1) as f64 } else { 0.0 });
        let inv = lower_triangular_inverse(l.as_ref());
        let prod = &l * &inv;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}
