//! Oracles shared by the integration tests. Everything here is written
//! independently of the library's algorithms.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense quadratic program `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u` with a known
/// strictly feasible point.
#[derive(Debug, Clone)]
pub struct DenseQp {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub feasible: DVector<f64>,
}

impl DenseQp {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    pub fn p_upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.p.nrows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                if self.p[(i, j)] != 0.0 {
                    out.push((i, j, self.p[(i, j)]));
                }
            }
        }
        out
    }

    pub fn a_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.a.nrows() {
            for j in 0..self.a.ncols() {
                if self.a[(i, j)] != 0.0 {
                    out.push((i, j, self.a[(i, j)]));
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Side {
    Lower,
    Upper,
}

/// Primal active-set method for strictly convex QPs, started from the known
/// feasible point. Returns the minimizer.
pub fn active_set_solve(qp: &DenseQp) -> DVector<f64> {
    let n = qp.p.nrows();
    let m = qp.a.nrows();
    let mut x = qp.feasible.clone();
    let mut working: Vec<(usize, Side)> = Vec::new();
    for _ in 0..50_000 {
        let g = &qp.p * &x + &qp.q;
        let k = working.len();
        let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.p);
        for (w, &(row, _)) in working.iter().enumerate() {
            for j in 0..n {
                kkt[(n + w, j)] = qp.a[(row, j)];
                kkt[(j, n + w)] = qp.a[(row, j)];
            }
        }
        let mut rhs = DVector::<f64>::zeros(n + k);
        for j in 0..n {
            rhs[j] = -g[j];
        }
        let sol = kkt.lu().solve(&rhs).expect("KKT system singular");
        let step = sol.rows(0, n).into_owned();
        let scale = 1.0 + x.amax();
        if step.amax() <= 1e-11 * scale {
            // multipliers: g = -Cᵀλ; lower rows need -λ ≥ 0, upper rows λ ≥ 0
            let mut worst = None;
            let mut worst_val = -1e-12;
            for (w, &(_, side)) in working.iter().enumerate() {
                let lam = sol[n + w];
                let mu = match side {
                    Side::Lower => -lam,
                    Side::Upper => lam,
                };
                if mu < worst_val {
                    worst_val = mu;
                    worst = Some(w);
                }
            }
            match worst {
                None => return x,
                Some(w) => {
                    working.remove(w);
                }
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = None;
            for row in 0..m {
                if working.iter().any(|&(r, _)| r == row) {
                    continue;
                }
                let ap: f64 = qp.a.row(row).dot(&step.transpose());
                let ax: f64 = qp.a.row(row).dot(&x.transpose());
                if ap < -1e-14 && qp.lower[row].is_finite() {
                    let t = (qp.lower[row] - ax) / ap;
                    if t < alpha {
                        alpha = t.max(0.0);
                        blocking = Some((row, Side::Lower));
                    }
                } else if ap > 1e-14 && qp.upper[row].is_finite() {
                    let t = (qp.upper[row] - ax) / ap;
                    if t < alpha {
                        alpha = t.max(0.0);
                        blocking = Some((row, Side::Upper));
                    }
                }
            }
            x += alpha * &step;
            if let Some(b) = blocking {
                working.push(b);
            }
        }
    }
    panic!("active-set oracle did not terminate");
}

/// Random strictly convex QP. `band` limits the coupling distance of both the
/// objective and the constraint rows (`None` = dense).
pub fn random_qp(seed: u64, n: usize, m: usize, band: Option<usize>) -> DenseQp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = band.unwrap_or(n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..(i + reach + 1).min(n) {
            if band.is_none() && rng.random::<f64>() < 0.7 {
                continue;
            }
            b[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let p = b.transpose() * &b + DMatrix::<f64>::identity(n, n) * 0.1;
    let p = (&p + p.transpose()) * 0.5;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
    let feasible = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    for r in 0..m {
        let start = rng.random_range(0..n);
        let end = (start + reach.min(3) + 1).min(n);
        for j in start..end {
            a[(r, j)] = rng.random_range(-2.0..2.0);
        }
        if a.row(r).amax() == 0.0 {
            a[(r, start)] = 1.0;
        }
        let ax = a.row(r).dot(&feasible.transpose());
        let kind = rng.random_range(0..3);
        let lo = ax - rng.random_range(0.05..1.0);
        let hi = ax + rng.random_range(0.05..1.0);
        let (lo, hi) = match kind {
            0 => (lo, hi),
            1 => (f64::NEG_INFINITY, hi),
            _ => (lo, f64::INFINITY),
        };
        lower.push(lo);
        upper.push(hi);
    }
    DenseQp { p, q, a, lower, upper, feasible }
}

/// Exhaustive minimum of the stage-one energy over every path through a
/// `frames × width` cost table, with frames-since-cut tracked exactly
/// (starting at `round(D)`). Returns the cost and an optimal path.
pub fn brute_force_path(cols: &[Vec<f64>], lambda: f64, jump: f64, rhythm: f64) -> (f64, Vec<usize>) {
    fn rec(
        cols: &[Vec<f64>],
        lambda: f64,
        jump: f64,
        rhythm: f64,
        path: &mut Vec<usize>,
        d: f64,
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        let t = path.len();
        if t == cols.len() {
            if acc < best.0 {
                *best = (acc, path.clone());
            }
            return;
        }
        for x in 0..cols[t].len() {
            let (step, nd) = if t == 0 {
                (0.0, d)
            } else {
                let delta = (x as f64 - path[t - 1] as f64).abs();
                if delta <= jump {
                    (1.0 - (-4.0 * delta / jump).exp(), d + 1.0)
                } else {
                    (1.0 + (-d / rhythm).exp(), 1.0)
                }
            };
            path.push(x);
            rec(cols, lambda, jump, rhythm, path, nd, acc + cols[t][x] + lambda * step, best);
            path.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    let d0 = rhythm.round().max(1.0);
    rec(cols, lambda, jump, rhythm, &mut Vec::new(), d0, 0.0, &mut best);
    best
}

pub fn count_cuts(path: &[usize], jump: f64) -> usize {
    path.windows(2).filter(|w| (w[1] as f64 - w[0] as f64).abs() > jump).count()
}

/// Minimum path energy by enumerating every reachable (position, frames
/// since cut) state frame by frame. No state is ever merged or pruned.
pub fn state_enumeration_cost(cols: &[Vec<f64>], lambda: f64, jump: f64, rhythm: f64) -> f64 {
    use std::collections::HashMap;
    let d0 = (rhythm.round() as u32).max(1);
    let mut states: HashMap<(usize, u32), f64> = (0..cols[0].len()).map(|x| ((x, d0), cols[0][x])).collect();
    for col in &cols[1..] {
        let mut next: HashMap<(usize, u32), f64> = HashMap::new();
        for (&(px, d), &cost) in &states {
            for (x, &unary) in col.iter().enumerate() {
                let delta = (x as f64 - px as f64).abs();
                let (step, nd) = if delta <= jump {
                    (1.0 - (-4.0 * delta / jump).exp(), d + 1)
                } else {
                    (1.0 + (-(d as f64) / rhythm).exp(), 1)
                };
                let c = cost + unary + lambda * step;
                let slot = next.entry((x, nd)).or_insert(f64::INFINITY);
                if c < *slot {
                    *slot = c;
                }
            }
        }
        states = next;
    }
    states.values().copied().fold(f64::INFINITY, f64::min)
}
