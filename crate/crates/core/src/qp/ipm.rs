//! Mehrotra predictor-corrector interior point method.
//!
//! Each two-sided row `l ≤ aᵀx ≤ u` carries up to two slack/multiplier pairs
//! `(s_u, z_u)` and `(s_l, z_l)`. Eliminating slacks and multipliers from the
//! Newton system leaves the normal matrix `P + Aᵀ W A` with
//! `W = z_u/s_u + z_l/s_l`, which keeps the sparsity pattern of `P + AᵀA`.

use super::skyline::Skyline;
use super::{ConvexProgram, IterationRecord, Solution, SolverSettings, Status};

const STEP_FRACTION: f64 = 0.99;
const REGULARIZATION: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 2;

struct Workspace<'a> {
    prog: &'a ConvexProgram,
    /// Objective scaling applied to P and q.
    cost_scale: f64,
    has_u: Vec<bool>,
    has_l: Vec<bool>,
    m_ineq: usize,
    sky: Skyline,
    w: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    ds_u: Vec<f64>,
    ds_l: Vec<f64>,
    dz_u: Vec<f64>,
    dz_l: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(prog: &'a ConvexProgram) -> Self {
        let n = prog.num_variables();
        let has_u: Vec<bool> = prog.upper().iter().map(|u| u.is_finite()).collect();
        let has_l: Vec<bool> = prog.lower().iter().map(|l| l.is_finite()).collect();
        let m_ineq = has_u.iter().chain(&has_l).filter(|&&b| b).count();

        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in prog.p().iter() {
            if j < i {
                first[i] = first[i].min(j);
            }
        }
        for r in 0..prog.num_constraints() {
            if !(has_u[r] || has_l[r]) {
                continue;
            }
            let (cols, _) = prog.a().row(r);
            if let Some(&lo) = cols.iter().min() {
                for &c in cols {
                    first[c] = first[c].min(lo);
                }
            }
        }

        let mut scale_ref: f64 = 0.0;
        for &v in prog.q() {
            scale_ref = scale_ref.max(v.abs());
        }
        for (_, _, v) in prog.p().iter() {
            scale_ref = scale_ref.max(v.abs());
        }
        if scale_ref == 0.0 {
            scale_ref = 1.0;
        }

        Self {
            prog,
            cost_scale: 1.0 / scale_ref,
            has_u,
            has_l,
            m_ineq,
            sky: Skyline::with_envelope(first),
            w: vec![0.0; prog.num_constraints()],
        }
    }

    fn n(&self) -> usize {
        self.prog.num_variables()
    }

    fn m(&self) -> usize {
        self.prog.num_constraints()
    }

    /// Scaled `P x`.
    fn px(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.prog.p().mul_vec(x);
        out.iter_mut().for_each(|v| *v *= self.cost_scale);
        out
    }

    /// Loads `P + Aᵀ diag(w) A + δI` into the skyline and factorizes it.
    fn factorize(&mut self) {
        self.sky.clear();
        let c = self.cost_scale;
        for (i, j, v) in self.prog.p().iter() {
            if j <= i {
                self.sky.add(i, j, c * v);
            }
        }
        for r in 0..self.m() {
            let wr = self.w[r];
            if wr == 0.0 {
                continue;
            }
            let (cols, vals) = self.prog.a().row(r);
            for (a, (&ci, &vi)) in cols.iter().zip(vals).enumerate() {
                for (&cj, &vj) in cols[..=a].iter().zip(&vals[..=a]) {
                    // cols are sorted so cj <= ci
                    self.sky.add(ci, cj, wr * vi * vj);
                }
            }
        }
        for i in 0..self.n() {
            self.sky.add(i, i, REGULARIZATION);
        }
        self.sky.factorize();
    }

    fn normal_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.px(v);
        let mut av = self.prog.a().mul_vec(v);
        av.iter_mut().zip(&self.w).for_each(|(a, w)| *a *= w);
        self.prog.a().tmul_vec_add(&av, &mut out);
        out.iter_mut().zip(v).for_each(|(o, vi)| *o += REGULARIZATION * vi);
        out
    }

    fn solve_normal(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.sky.solve_in_place(&mut x);
        for _ in 0..REFINEMENT_STEPS {
            let mx = self.normal_mul(&x);
            let mut res: Vec<f64> = rhs.iter().zip(&mx).map(|(b, m)| b - m).collect();
            self.sky.solve_in_place(&mut res);
            x.iter_mut().zip(&res).for_each(|(xi, ri)| *xi += ri);
        }
        x
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        s_u: &[f64],
        s_l: &[f64],
        z_u: &[f64],
        z_l: &[f64],
        r_d: &[f64],
        r_pu: &[f64],
        r_pl: &[f64],
        r_cu: &[f64],
        r_cl: &[f64],
    ) -> Direction {
        let m = self.m();
        let mut g_u = vec![0.0; m];
        let mut g_l = vec![0.0; m];
        let mut g = vec![0.0; m];
        for i in 0..m {
            if self.has_u[i] {
                g_u[i] = (z_u[i] * r_pu[i] - r_cu[i]) / s_u[i];
            }
            if self.has_l[i] {
                g_l[i] = (z_l[i] * r_pl[i] - r_cl[i]) / s_l[i];
            }
            g[i] = g_u[i] - g_l[i];
        }
        let mut rhs: Vec<f64> = r_d.iter().map(|v| -v).collect();
        let mut atg = vec![0.0; self.n()];
        self.prog.a().tmul_vec_add(&g, &mut atg);
        rhs.iter_mut().zip(&atg).for_each(|(r, a)| *r -= a);

        let dx = self.solve_normal(&rhs);
        let adx = self.prog.a().mul_vec(&dx);
        let mut d = Direction {
            dx,
            ds_u: vec![0.0; m],
            ds_l: vec![0.0; m],
            dz_u: vec![0.0; m],
            dz_l: vec![0.0; m],
        };
        for i in 0..m {
            if self.has_u[i] {
                d.ds_u[i] = -r_pu[i] - adx[i];
                d.dz_u[i] = z_u[i] / s_u[i] * adx[i] + g_u[i];
            }
            if self.has_l[i] {
                d.ds_l[i] = adx[i] - r_pl[i];
                d.dz_l[i] = -z_l[i] / s_l[i] * adx[i] + g_l[i];
            }
        }
        d
    }
}

fn max_step(v: &[f64], dv: &[f64], mask: &[bool]) -> f64 {
    let mut alpha: f64 = 1.0;
    for ((&vi, &di), &on) in v.iter().zip(dv).zip(mask) {
        if on && di < 0.0 {
            alpha = alpha.min(-vi / di);
        }
    }
    alpha
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the program, optionally starting from `warm` (need not be feasible).
///
/// When the iteration cap is hit before the best iterate is feasible, that
/// iterate is projected onto the feasible set.
pub fn solve_with_warm_start(
    prog: &ConvexProgram,
    settings: &SolverSettings,
    warm: Option<&[f64]>,
) -> Solution {
    let mut sol = solve_inner(prog, settings, warm);
    if sol.status == Status::MaxIters && sol.primal_residual > settings.eps_abs {
        if let Some(x) = project(prog, &sol.x, settings.eps_abs) {
            sol.primal_residual = prog.max_violation(&x);
            sol.objective_value = prog.objective(&x);
            sol.x = x;
        }
    }
    sol
}

/// Nearest point to `x` satisfying the constraints of `prog`.
fn project(prog: &ConvexProgram, x: &[f64], eps: f64) -> Option<Vec<f64>> {
    let n = prog.num_variables();
    let p: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 2.0)).collect();
    let a: Vec<(usize, usize, f64)> = prog.a().iter().collect();
    let q = x.iter().map(|v| -2.0 * v).collect();
    let proj = ConvexProgram::new(n, &p, q, &a, prog.lower().to_vec(), prog.upper().to_vec()).ok()?;
    let settings = SolverSettings { eps_abs: eps, max_iters: 500, record_trace: false };
    let sol = solve_inner(&proj, &settings, Some(x));
    (sol.status == Status::Solved).then_some(sol.x)
}

fn solve_inner(prog: &ConvexProgram, settings: &SolverSettings, warm: Option<&[f64]>) -> Solution {
    let mut ws = Workspace::new(prog);
    let n = ws.n();
    let m = ws.m();
    let eps = settings.eps_abs;
    let lower = prog.lower();
    let upper = prog.upper();

    // Initial point: x from warm start or a regularized least-squares fit to
    // the nearest bound of every row.
    let mut x = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => {
            for r in 0..m {
                ws.w[r] = if ws.has_u[r] || ws.has_l[r] { 1.0 } else { 0.0 };
            }
            ws.factorize();
            let mut target = vec![0.0; m];
            for r in 0..m {
                if ws.w[r] != 0.0 {
                    target[r] = 0.0f64.clamp(lower[r], upper[r]);
                }
            }
            let mut rhs: Vec<f64> = prog.q().iter().map(|v| -v * ws.cost_scale).collect();
            prog.a().tmul_vec_add(&target, &mut rhs);
            ws.solve_normal(&rhs)
        }
    };

    let mut ax = prog.a().mul_vec(&x);
    let mut s_u = vec![0.0; m];
    let mut s_l = vec![0.0; m];
    let mut z_u = vec![0.0; m];
    let mut z_l = vec![0.0; m];
    let mut min_s = f64::INFINITY;
    for r in 0..m {
        if ws.has_u[r] {
            s_u[r] = upper[r] - ax[r];
            min_s = min_s.min(s_u[r]);
            z_u[r] = 1.0;
        }
        if ws.has_l[r] {
            s_l[r] = ax[r] - lower[r];
            min_s = min_s.min(s_l[r]);
            z_l[r] = 1.0;
        }
    }
    if ws.m_ineq > 0 {
        let shift = (-1.5 * min_s).max(0.0) + 1e-2;
        for r in 0..m {
            if ws.has_u[r] {
                s_u[r] += shift;
            }
            if ws.has_l[r] {
                s_l[r] += shift;
            }
        }
        let sz = dot(&s_u, &z_u) + dot(&s_l, &z_l);
        let sum_s: f64 = s_u.iter().sum::<f64>() + s_l.iter().sum::<f64>();
        let sum_z: f64 = z_u.iter().sum::<f64>() + z_l.iter().sum::<f64>();
        let ds = 0.5 * sz / sum_z;
        let dz = 0.5 * sz / sum_s;
        for r in 0..m {
            if ws.has_u[r] {
                s_u[r] += ds;
                z_u[r] += dz;
            }
            if ws.has_l[r] {
                s_l[r] += ds;
                z_l[r] += dz;
            }
        }
    }

    let q_scaled: Vec<f64> = prog.q().iter().map(|v| v * ws.cost_scale).collect();
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64, f64, f64)> = None;
    let mut status = Status::MaxIters;
    let mut iterations = 0;
    let mut last_step = 0.0;
    let mut current = (f64::NAN, f64::NAN, f64::NAN);

    let mut r_d = vec![0.0; n];
    let mut r_pu = vec![0.0; m];
    let mut r_pl = vec![0.0; m];

    for iter in 0..=settings.max_iters {
        iterations = iter;
        prog.a().mul_vec_into(&x, &mut ax);
        let px = ws.px(&x);
        let y: Vec<f64> = z_u.iter().zip(&z_l).map(|(u, l)| u - l).collect();
        let mut aty = vec![0.0; n];
        prog.a().tmul_vec_add(&y, &mut aty);
        for i in 0..n {
            r_d[i] = px[i] + q_scaled[i] + aty[i];
        }
        let mut violation: f64 = 0.0;
        for r in 0..m {
            if ws.has_u[r] {
                r_pu[r] = ax[r] + s_u[r] - upper[r];
                violation = violation.max(ax[r] - upper[r]);
            }
            if ws.has_l[r] {
                r_pl[r] = lower[r] - ax[r] + s_l[r];
                violation = violation.max(lower[r] - ax[r]);
            }
        }
        let complementarity = dot(&s_u, &z_u) + dot(&s_l, &z_l);
        let mu = if ws.m_ineq > 0 { complementarity / ws.m_ineq as f64 } else { 0.0 };
        let obj_scaled = 0.5 * dot(&px, &x) + dot(&q_scaled, &x);
        let dual_scale = 1.0f64.max(inf_norm(&px)).max(inf_norm(&q_scaled)).max(inf_norm(&aty));
        let dual_residual = inf_norm(&r_d) / dual_scale;
        let gap = complementarity / 1.0f64.max(obj_scaled.abs());
        current = (violation, dual_residual, gap);

        if settings.record_trace {
            trace.push(IterationRecord {
                iteration: iter,
                mu,
                primal_residual: violation,
                dual_residual,
                gap,
                step: last_step,
            });
        }

        // feasible iterates rank ahead of infeasible ones
        let merit = (violation / eps).max(dual_residual / eps).max(gap / eps)
            + if violation > eps { 1e300 } else { 0.0 };
        if best.as_ref().is_none_or(|b| merit < b.0) {
            let yb: Vec<f64> = y.iter().map(|v| v / ws.cost_scale).collect();
            best = Some((merit, x.clone(), yb, violation, dual_residual, gap));
        }
        if violation <= eps && dual_residual <= eps && gap <= eps {
            status = Status::Solved;
            break;
        }
        if iter == settings.max_iters {
            break;
        }

        // Farkas certificate: z ≥ 0 with Aᵀ(z_u − z_l) ≈ 0 and uᵀz_u − lᵀz_l < 0.
        let z_norm = inf_norm(&z_u).max(inf_norm(&z_l));
        if z_norm > 1e6 {
            let support: f64 = (0..m)
                .map(|r| {
                    let mut v = 0.0;
                    if ws.has_u[r] {
                        v += upper[r] * z_u[r];
                    }
                    if ws.has_l[r] {
                        v -= lower[r] * z_l[r];
                    }
                    v
                })
                .sum::<f64>()
                / z_norm;
            if inf_norm(&aty) / z_norm < 1e-9 && support < -1e-6 {
                status = Status::Infeasible;
                break;
            }
        }

        if ws.m_ineq == 0 {
            for r in 0..m {
                ws.w[r] = 0.0;
            }
            ws.factorize();
            let rhs: Vec<f64> = r_d.iter().map(|v| -v).collect();
            let dx = ws.solve_normal(&rhs);
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            last_step = 1.0;
            continue;
        }

        for r in 0..m {
            let mut w = 0.0;
            if ws.has_u[r] {
                w += z_u[r] / s_u[r];
            }
            if ws.has_l[r] {
                w += z_l[r] / s_l[r];
            }
            ws.w[r] = w;
        }
        ws.factorize();

        // predictor
        let r_cu: Vec<f64> = s_u.iter().zip(&z_u).map(|(s, z)| s * z).collect();
        let r_cl: Vec<f64> = s_l.iter().zip(&z_l).map(|(s, z)| s * z).collect();
        let aff = ws.direction(&s_u, &s_l, &z_u, &z_l, &r_d, &r_pu, &r_pl, &r_cu, &r_cl);
        let alpha_aff = max_step(&s_u, &aff.ds_u, &ws.has_u)
            .min(max_step(&s_l, &aff.ds_l, &ws.has_l))
            .min(max_step(&z_u, &aff.dz_u, &ws.has_u))
            .min(max_step(&z_l, &aff.dz_l, &ws.has_l));
        let mut comp_aff = 0.0;
        for r in 0..m {
            if ws.has_u[r] {
                comp_aff += (s_u[r] + alpha_aff * aff.ds_u[r]) * (z_u[r] + alpha_aff * aff.dz_u[r]);
            }
            if ws.has_l[r] {
                comp_aff += (s_l[r] + alpha_aff * aff.ds_l[r]) * (z_l[r] + alpha_aff * aff.dz_l[r]);
            }
        }
        let mu_aff = comp_aff / ws.m_ineq as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let target = sigma * mu;
        let mut r_cu = r_cu;
        let mut r_cl = r_cl;
        for r in 0..m {
            if ws.has_u[r] {
                r_cu[r] += aff.ds_u[r] * aff.dz_u[r] - target;
            }
            if ws.has_l[r] {
                r_cl[r] += aff.ds_l[r] * aff.dz_l[r] - target;
            }
        }
        let d = ws.direction(&s_u, &s_l, &z_u, &z_l, &r_d, &r_pu, &r_pl, &r_cu, &r_cl);
        let alpha = (STEP_FRACTION
            * max_step(&s_u, &d.ds_u, &ws.has_u)
                .min(max_step(&s_l, &d.ds_l, &ws.has_l))
                .min(max_step(&z_u, &d.dz_u, &ws.has_u))
                .min(max_step(&z_l, &d.dz_l, &ws.has_l)))
        .min(1.0);
        last_step = alpha;

        x.iter_mut().zip(&d.dx).for_each(|(a, b)| *a += alpha * b);
        for r in 0..m {
            if ws.has_u[r] {
                s_u[r] += alpha * d.ds_u[r];
                z_u[r] += alpha * d.dz_u[r];
            }
            if ws.has_l[r] {
                s_l[r] += alpha * d.ds_l[r];
                z_l[r] += alpha * d.dz_l[r];
            }
        }
    }

    let (x, y, primal_residual, dual_residual, gap) = match status {
        Status::Solved | Status::Infeasible => {
            let y: Vec<f64> = z_u.iter().zip(&z_l).map(|(u, l)| (u - l) / ws.cost_scale).collect();
            (x, y, current.0, current.1, current.2)
        }
        Status::MaxIters => {
            let (_, bx, by, pr, dr, g) = best.expect("at least one iterate");
            (bx, by, pr, dr, g)
        }
    };

    Solution {
        objective_value: prog.objective(&x),
        x,
        y,
        primal_residual,
        dual_residual,
        gap,
        iterations,
        status,
        trace,
    }
}
