//! Stage one: dynamic programming over window positions.
//!
//! Minimizes `Σ E_s(r_t) + λ Σ E_t(r_{t-1}, r_t, d)` where `E_s` is the
//! saliency column and `E_t` charges `1 − exp(−4|Δ|/W)` for moves up to the
//! jump-cut width `W` and `1 + exp(−d/D)` for larger moves, which become cuts.
//! `d` counts frames since the previous cut and starts at `D`.
//!
//! The default mode keeps, per node, the `d` of the best path into it, which
//! preserves the `O(S² N)` cost. The exact mode expands the state to `(r, d)`
//! and is meant for small instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saliency::SaliencyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    /// Transition weight λ.
    pub lambda: f64,
    /// Jump-cut width W, pixels.
    pub jump_width: f64,
    /// Cut rhythm D, frames.
    pub cut_rhythm: f64,
    /// Only every `state_stride`-th x-position is a state.
    pub state_stride: usize,
    /// Track frames-since-cut exactly with an augmented state.
    pub exact_d: bool,
}

impl DpParams {
    pub fn validate(&self, width: usize) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::validation(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.jump_width > 0.0 && self.jump_width < width as f64) {
            return Err(Error::validation(format!(
                "jump-cut width must lie in (0, {width}), got {}",
                self.jump_width
            )));
        }
        if !(self.cut_rhythm > 0.0) {
            return Err(Error::validation(format!("cut rhythm D must be positive, got {}", self.cut_rhythm)));
        }
        if self.state_stride == 0 {
            return Err(Error::validation("state stride must be at least 1"));
        }
        Ok(())
    }

    /// Frames-since-cut assumed at the first frame.
    pub fn initial_d(&self) -> u32 {
        (self.cut_rhythm.round() as u32).max(1)
    }
}

/// Pairwise cost `E_t` (without λ).
pub fn transition_cost(delta: f64, d: u32, p: &DpParams) -> f64 {
    let delta = delta.abs();
    if delta <= p.jump_width {
        1.0 - (-4.0 * delta / p.jump_width).exp()
    } else {
        1.0 + (-(d as f64) / p.cut_rhythm).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEstimate {
    /// Window center per frame, pixels.
    pub r: Vec<usize>,
    /// Frames `t` (0-based) where the move from `t − 1` is a cut, sorted.
    pub cuts: Vec<usize>,
    pub total_cost: f64,
}

/// Evaluates the energy of an arbitrary path, tracking `d` along it.
pub fn path_cost(r: &[usize], sm: &SaliencyMatrix, p: &DpParams) -> Result<f64> {
    if r.len() != sm.frames() {
        return Err(Error::validation(format!("path has {} frames, matrix {}", r.len(), sm.frames())));
    }
    let mut d = p.initial_d();
    let mut cost = sm.unary_cost(r[0], 0)?;
    for t in 1..r.len() {
        let delta = r[t].abs_diff(r[t - 1]) as f64;
        cost += sm.unary_cost(r[t], t)? + p.lambda * transition_cost(delta, d, p);
        d = if delta > p.jump_width { 1 } else { d + 1 };
    }
    Ok(cost)
}

fn state_positions(width: usize, stride: usize) -> Vec<usize> {
    let count = width.div_ceil(stride);
    (0..count).map(|k| (k * stride + (stride - 1) / 2).min(width - 1)).collect()
}

fn cuts_of(r: &[usize], p: &DpParams) -> Vec<usize> {
    (1..r.len()).filter(|&t| r[t].abs_diff(r[t - 1]) as f64 > p.jump_width).collect()
}

/// Runs the forward pass and backtracking.
pub fn optimize_path(sm: &SaliencyMatrix, p: &DpParams) -> Result<PathEstimate> {
    p.validate(sm.width())?;
    if p.exact_d {
        optimize_exact(sm, p)
    } else {
        optimize_approx(sm, p)
    }
}

/// Lexicographic `(cost, index)` minimum, so the lowest index wins ties.
#[inline]
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn optimize_approx(sm: &SaliencyMatrix, p: &DpParams) -> Result<PathEstimate> {
    let pos = state_positions(sm.width(), p.state_stride);
    let s = pos.len();
    let n = sm.frames();
    let pan: Vec<f64> = (0..=sm.width())
        .map(|delta| {
            if delta as f64 <= p.jump_width {
                p.lambda * transition_cost(delta as f64, 0, p)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    // range of predecessors within the jump-cut width of each state
    let reach: Vec<(usize, usize)> = pos
        .iter()
        .map(|&x| {
            let lo = pos.partition_point(|&y| (x as f64 - y as f64) > p.jump_width);
            let hi = pos.partition_point(|&y| (y as f64 - x as f64) <= p.jump_width);
            (lo, hi)
        })
        .collect();

    let mut cost: Vec<f64> = pos.iter().map(|&x| sm.get(x, 0)).collect();
    let mut d: Vec<u32> = vec![p.initial_d(); s];
    let mut back: Vec<u32> = vec![0; n * s];
    let mut cut_cost = vec![0.0; s];
    let mut prefix = vec![(f64::INFINITY, usize::MAX); s + 1];
    let mut suffix = vec![(f64::INFINITY, usize::MAX); s + 1];
    let parallel = s >= 128;

    for t in 1..n {
        for j in 0..s {
            cut_cost[j] = cost[j] + p.lambda * (1.0 + (-(d[j] as f64) / p.cut_rhythm).exp());
        }
        // prefix[k] = best cut predecessor among 0..k, suffix[k] among k..s
        for j in 0..s {
            let cand = (cut_cost[j], j);
            prefix[j + 1] = if better(cand, prefix[j]) { cand } else { prefix[j] };
        }
        suffix[s] = (f64::INFINITY, usize::MAX);
        for j in (0..s).rev() {
            let cand = (cut_cost[j], j);
            suffix[j] = if cand.0 <= suffix[j + 1].0 { cand } else { suffix[j + 1] };
        }
        let relax = |k: usize| -> (f64, usize) {
            let (lo, hi) = reach[k];
            let mut best = prefix[lo];
            let xk = pos[k];
            for j in lo..hi {
                let v = cost[j] + pan[xk.abs_diff(pos[j])];
                if better((v, j), best) {
                    best = (v, j);
                }
            }
            let after = suffix[hi];
            if better(after, best) {
                best = after;
            }
            best
        };
        let choice: Vec<(f64, usize)> = if parallel {
            (0..s).into_par_iter().map(relax).collect()
        } else {
            (0..s).map(relax).collect()
        };
        let row = &mut back[t * s..(t + 1) * s];
        let mut new_d = vec![0u32; s];
        for k in 0..s {
            let (v, j) = choice[k];
            row[k] = j as u32;
            new_d[k] = if pos[k].abs_diff(pos[j]) as f64 > p.jump_width { 1 } else { d[j] + 1 };
            cost[k] = sm.get(pos[k], t) + v;
        }
        d = new_d;
    }

    let mut k = 0;
    for j in 1..s {
        if cost[j] < cost[k] {
            k = j;
        }
    }
    let total_cost = cost[k];
    let mut states = vec![0usize; n];
    states[n - 1] = k;
    for t in (1..n).rev() {
        states[t - 1] = back[t * s + states[t]] as usize;
    }
    let r: Vec<usize> = states.iter().map(|&k| pos[k]).collect();
    let cuts = cuts_of(&r, p);
    Ok(PathEstimate { r, cuts, total_cost })
}

/// Largest states × d-levels product accepted by the exact mode.
const EXACT_STATE_LIMIT: usize = 4_000_000;

fn optimize_exact(sm: &SaliencyMatrix, p: &DpParams) -> Result<PathEstimate> {
    let pos = state_positions(sm.width(), p.state_stride);
    let s = pos.len();
    let n = sm.frames();
    let d0 = p.initial_d() as usize;
    let d_max = ((4.0 * p.cut_rhythm).ceil() as usize).max(d0).min(d0 + n - 1);
    if s * d_max > EXACT_STATE_LIMIT {
        return Err(Error::validation(format!(
            "exact-d mode needs {s} x {d_max} states per frame; use the approximate mode"
        )));
    }
    let levels = d_max + 1; // index 0 unused
    let idx = |k: usize, dd: usize| k * levels + dd;
    let mut cost = vec![f64::INFINITY; s * levels];
    for k in 0..s {
        cost[idx(k, d0)] = sm.get(pos[k], 0);
    }
    let mut back: Vec<(u32, u32)> = vec![(0, 0); n * s * levels];
    for t in 1..n {
        let mut next = vec![f64::INFINITY; s * levels];
        let row = &mut back[t * s * levels..(t + 1) * s * levels];
        for k in 0..s {
            let unary = sm.get(pos[k], t);
            for j in 0..s {
                let delta = pos[k].abs_diff(pos[j]) as f64;
                let is_cut = delta > p.jump_width;
                for dd in 1..=d_max {
                    let prev = cost[idx(j, dd)];
                    if prev == f64::INFINITY {
                        continue;
                    }
                    let v = prev + p.lambda * transition_cost(delta, dd as u32, p);
                    let nd = if is_cut { 1 } else { (dd + 1).min(d_max) };
                    // predecessors are visited by increasing (x, d), so strict
                    // comparison keeps the lowest on ties
                    if v + unary < next[idx(k, nd)] {
                        next[idx(k, nd)] = v + unary;
                        row[idx(k, nd)] = (j as u32, dd as u32);
                    }
                }
            }
        }
        cost = next;
    }
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for k in 0..s {
        for dd in 1..=d_max {
            let v = cost[idx(k, dd)];
            if v < best.0 {
                best = (v, k, dd);
            }
        }
    }
    let (total_cost, mut k, mut dd) = best;
    let mut states = vec![0usize; n];
    states[n - 1] = k;
    for t in (1..n).rev() {
        let (pk, pd) = back[t * s * levels + idx(k, dd)];
        k = pk as usize;
        dd = pd as usize;
        states[t - 1] = k;
    }
    let r: Vec<usize> = states.iter().map(|&k| pos[k]).collect();
    let cuts = cuts_of(&r, p);
    Ok(PathEstimate { r, cuts, total_cost })
}

/// Debug export `frame,r,is_cut` with 1-based frames.
pub fn path_csv(pe: &PathEstimate) -> String {
    let mut out = String::from("frame,r,is_cut\n");
    let mut cuts = pe.cuts.iter().peekable();
    for (t, r) in pe.r.iter().enumerate() {
        let is_cut = cuts.peek() == Some(&&t);
        if is_cut {
            cuts.next();
        }
        out.push_str(&format!("{},{},{}\n", t + 1, r, is_cut as u8));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: f64, lambda: f64, d: f64) -> DpParams {
        DpParams { lambda, jump_width: w, cut_rhythm: d, state_stride: 1, exact_d: false }
    }

    #[test]
    fn transition_spot_values() {
        let p = params(100.0, 2.0, 200.0);
        assert_eq!(transition_cost(0.0, 5, &p), 0.0);
        assert!((transition_cost(100.0, 5, &p) - (1.0 - (-4.0f64).exp())).abs() < 1e-12);
        assert!((transition_cost(100.5, 200, &p) - (1.0 + (-1.0f64).exp())).abs() < 1e-12);
        assert!((transition_cost(-150.0, 200, &p) - 1.367_879_441_171_442).abs() < 1e-12);
        assert!(transition_cost(101.0, u32::MAX, &p) - 1.0 < 1e-9);
    }

    fn constant_peak_matrix(width: usize, frames: usize, peak: usize) -> SaliencyMatrix {
        let mut v = vec![0.0; width * frames];
        for t in 0..frames {
            v[t * width + peak] = -10.0;
            v[t * width + (peak + 3) % width] = -1.0;
        }
        SaliencyMatrix::from_columns(width, frames, v, 1.0).unwrap()
    }

    #[test]
    fn constant_peak_gives_constant_path() {
        let sm = constant_peak_matrix(20, 15, 7);
        for exact_d in [false, true] {
            let p = DpParams { exact_d, ..params(5.0, 1.0, 4.0) };
            let pe = optimize_path(&sm, &p).unwrap();
            assert_eq!(pe.r, vec![7; 15]);
            assert!(pe.cuts.is_empty());
            assert!((pe.total_cost + 150.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_columns_keep_the_path_still() {
        let mut v = vec![0.0; 30 * 10];
        v[12] = -1.0; // frame 0 only
        let sm = SaliencyMatrix::from_columns(30, 10, v, 1.0).unwrap();
        let pe = optimize_path(&sm, &params(6.0, 2.0, 4.0)).unwrap();
        assert_eq!(pe.r, vec![12; 10]);
    }

    #[test]
    fn ties_prefer_lowest_position() {
        let sm = SaliencyMatrix::from_columns(5, 3, vec![0.0; 15], 1.0).unwrap();
        let pe = optimize_path(&sm, &params(2.0, 1.0, 4.0)).unwrap();
        assert_eq!(pe.r, vec![0, 0, 0]);
    }

    #[test]
    fn path_cost_single_frame_and_errors() {
        let sm = constant_peak_matrix(10, 1, 4);
        let p = params(3.0, 1.0, 4.0);
        assert_eq!(path_cost(&[4], &sm, &p).unwrap(), -10.0);
        assert!(path_cost(&[4, 4], &sm, &p).is_err());
        assert!(path_cost(&[10], &sm, &p).is_err());
    }

    #[test]
    fn stride_positions() {
        assert_eq!(state_positions(10, 4), vec![1, 5, 9]);
        assert_eq!(state_positions(9, 4), vec![1, 5, 8]);
        assert_eq!(state_positions(3, 1), vec![0, 1, 2]);
    }

    #[test]
    fn validation() {
        let sm = constant_peak_matrix(10, 2, 4);
        assert!(optimize_path(&sm, &params(10.0, 1.0, 4.0)).is_err());
        assert!(optimize_path(&sm, &params(3.0, 0.0, 4.0)).is_err());
        assert!(optimize_path(&sm, &DpParams { state_stride: 0, ..params(3.0, 1.0, 4.0) }).is_err());
    }

    #[test]
    fn csv_marks_cuts() {
        let pe = PathEstimate { r: vec![1, 1, 9], cuts: vec![2], total_cost: 0.0 };
        assert_eq!(path_csv(&pe), "frame,r,is_cut\n1,1,0\n2,1,0\n3,9,1\n");
    }
}
