//! Stage two: smooth virtual-camera trajectory.
//!
//! The crop center `x*` and zoom `z` minimize a deadzone data term against the
//! (delayed) stage-one path, L1 penalties on the first three differences of
//! both signals and a quadratic pull of `z` towards the zoom targets, subject
//! to inclusion, pan-speed and zoom-range constraints. Around every cut the
//! smoothness and data terms are relaxed so the camera holds still, then
//! jumps.
//!
//! Absolute values and the deadzone are linearized with one auxiliary
//! variable each; variables are laid out frame by frame so the normal
//! equations stay banded.

use serde::{Deserialize, Serialize};

use crate::dp::PathEstimate;
use crate::error::{Error, Result};
use crate::gaze::FrameGeometry;
use crate::qp::{solve_with_warm_start, ConvexProgram, IterationRecord, ProgramBuilder, SolverSettings, Status};
use crate::zoom::{segments, ZoomTargets};

/// Constraint tolerance for accepted solutions.
pub const FEASIBILITY_TOL: f64 = 1e-6;
// Bounds narrower than this are widened so the program keeps an interior.
const DEGENERATE_BOX: f64 = 5e-7;

/// Difference operators of order 1 to 3; coefficients apply to
/// `x_t, x_{t-1}, x_{t-2}, x_{t-3}`.
pub const DIFF_COEFFS: [&[f64]; 3] = [&[1.0, -1.0], &[1.0, -2.0, 1.0], &[1.0, -3.0, 3.0, -1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptParams {
    /// L1 weights on the first, second and third difference of `x*`.
    pub lambda: [f64; 3],
    /// L1 weights on the differences of `z`.
    pub zoom_lambda: [f64; 3],
    /// Data-term deadzone, pixels.
    pub tau: f64,
    /// Pixels per frame.
    pub pan_speed_max: f64,
    /// Cut relaxation half-width, frames.
    pub p: usize,
    /// Response delay, frames.
    pub delay: usize,
    pub z_min: f64,
}

impl OptParams {
    /// Defaults for a target window `target_width` pixels wide on a source
    /// `frame_width` wide at `fps`: crossing the frame takes at least 5 s.
    pub fn defaults(target_width: f64, frame_width: f64, fps: f64) -> Self {
        Self {
            lambda: [5000.0, 500.0, 3000.0],
            zoom_lambda: [5000.0, 500.0, 3000.0],
            tau: 0.1 * target_width,
            pan_speed_max: frame_width / (5.0 * fps),
            p: 5,
            delay: 10,
            z_min: 0.7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.iter().chain(&self.zoom_lambda).any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::validation("L1 weights must be finite and non-negative"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::validation(format!("tau must be non-negative, got {}", self.tau)));
        }
        if !(self.pan_speed_max.is_finite() && self.pan_speed_max > 0.0) {
            return Err(Error::validation(format!(
                "pan speed limit must be positive, got {}",
                self.pan_speed_max
            )));
        }
        if !(self.z_min > 0.0 && self.z_min <= 1.0) {
            return Err(Error::validation(format!("z_min must lie in (0, 1], got {}", self.z_min)));
        }
        Ok(())
    }
}

/// Source frame size and the full-height target window width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropGeometry {
    pub frame_width: f64,
    pub frame_height: f64,
    pub target_width: f64,
}

impl CropGeometry {
    pub fn new(frame_width: f64, frame_height: f64, target_width: f64) -> Result<Self> {
        if !(frame_width > 0.0 && frame_height > 0.0 && target_width > 0.0) {
            return Err(Error::validation("frame and target sizes must be positive"));
        }
        if target_width > frame_width {
            return Err(Error::validation(format!(
                "target width {target_width} exceeds frame width {frame_width}"
            )));
        }
        Ok(Self { frame_width, frame_height, target_width })
    }

    /// Target width `H_o · aspect` for an output aspect ratio (width / height).
    pub fn from_aspect(frame: &FrameGeometry, aspect: f64) -> Result<Self> {
        if !(aspect.is_finite() && aspect > 0.0) {
            return Err(Error::validation(format!("aspect ratio must be positive, got {aspect}")));
        }
        Self::new(frame.width as f64, frame.height as f64, frame.height as f64 * aspect)
    }

    pub fn x_bounds(&self) -> (f64, f64) {
        (self.target_width / 2.0, self.frame_width - self.target_width / 2.0)
    }

    pub fn crop_rect(&self, x: f64, z: f64) -> CropRect {
        let height = z * self.frame_height;
        let width = z * self.target_width;
        let left = (x - width / 2.0).clamp(0.0, self.frame_width - width);
        CropRect { left, top: (self.frame_height - height) / 2.0, width, height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropRect {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

/// Which terms of the energy are active at each frame. `diff[k][t]` refers
/// to the difference of order `k + 1` ending at frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TermMask {
    pub data: Vec<bool>,
    pub zoom: Vec<bool>,
    pub diff: [Vec<bool>; 3],
    pub velocity: Vec<bool>,
}

impl TermMask {
    /// At a cut frame every term touching the cut is dropped; within `p`
    /// frames of it the data and higher-order terms are dropped while the
    /// first difference keeps the camera still.
    pub fn new(n: usize, cuts: &[usize], p: usize) -> Self {
        let mut is_cut = vec![false; n];
        let mut near = vec![false; n];
        for &k in cuts.iter().filter(|&&k| k < n) {
            is_cut[k] = true;
            for slot in &mut near[k.saturating_sub(p)..(k + p + 1).min(n)] {
                *slot = true;
            }
        }
        let spans_cut = |t: usize, order: usize| (t + 1 - order..=t).any(|u| is_cut[u]);
        let diff = std::array::from_fn(|k| {
            let order = k + 1;
            (0..n)
                .map(|t| t >= order && !spans_cut(t, order) && (order == 1 || !near[t]))
                .collect()
        });
        Self {
            data: near.iter().map(|&b| !b).collect(),
            zoom: is_cut.iter().map(|&b| !b).collect(),
            velocity: (0..n).map(|t| t >= 1 && !is_cut[t]).collect(),
            diff,
        }
    }
}

/// Merges cut lists into a sorted, duplicate-free list.
pub fn merge_cuts(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut all: Vec<usize> = a.iter().chain(b).copied().collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// Shifts `r` later by `delay` frames inside every shot; the first frames of
/// a shot repeat its initial value.
pub fn delayed_reference(r: &[f64], cuts: &[usize], delay: usize) -> Vec<f64> {
    let mut out = vec![0.0; r.len()];
    for (a, b) in segments(r.len(), cuts) {
        for t in a..b {
            out[t] = r[t.saturating_sub(delay).max(a)];
        }
    }
    out
}

/// Energy of a trajectory, evaluated term by term.
pub fn energy(x: &[f64], z: &[f64], reference: &[f64], rho: &[f64], mask: &TermMask, op: &OptParams) -> f64 {
    let n = x.len();
    let diff = |v: &[f64], k: usize, t: usize| -> f64 {
        DIFF_COEFFS[k].iter().enumerate().map(|(j, c)| c * v[t - j]).sum()
    };
    let mut e = 0.0;
    for t in 0..n {
        if mask.data[t] {
            e += ((x[t] - reference[t]).abs() - op.tau).max(0.0).powi(2);
        }
        if mask.zoom[t] {
            e += (z[t] - rho[t]).powi(2);
        }
        for k in 0..3 {
            if mask.diff[k][t] {
                e += op.lambda[k] * diff(x, k, t).abs() + op.zoom_lambda[k] * diff(z, k, t).abs();
            }
        }
    }
    e
}

/// The assembled program with the positions of `x*_t` and `z_t` in its
/// variable vector.
#[derive(Debug, Clone)]
pub struct TrajectoryProgram {
    pub program: ConvexProgram,
    pub x_index: Vec<usize>,
    pub z_index: Vec<usize>,
    /// Delayed reference path.
    pub reference: Vec<f64>,
    pub rho: Vec<f64>,
    pub cuts: Vec<usize>,
    pub mask: TermMask,
}

fn check_inputs(n: usize, cuts: &[usize], rho: &[f64], op: &OptParams) -> Result<()> {
    op.validate()?;
    if n == 0 {
        return Err(Error::validation("empty reference path"));
    }
    if rho.len() != n {
        return Err(Error::validation(format!("{} zoom targets for {n} frames", rho.len())));
    }
    if let Some(&k) = cuts.iter().find(|&&k| k == 0 || k >= n) {
        return Err(Error::validation(format!(
            "cut at frame {} outside 2..={n}",
            k + 1
        )));
    }
    Ok(())
}

fn bound_row(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < DEGENERATE_BOX {
        let mid = 0.5 * (lo + hi);
        (mid - DEGENERATE_BOX, mid + DEGENERATE_BOX)
    } else {
        (lo, hi)
    }
}

/// Builds the program for a real-valued reference path. `cuts` are 0-based
/// frames that start a new shot (original and new, in any order).
pub fn build_reference_program(
    r: &[f64],
    cuts: &[usize],
    rho: &[f64],
    op: &OptParams,
    geom: &CropGeometry,
) -> Result<TrajectoryProgram> {
    let n = r.len();
    let cuts = merge_cuts(cuts, &[]);
    check_inputs(n, &cuts, rho, op)?;
    let reference = delayed_reference(r, &cuts, op.delay);
    let mask = TermMask::new(n, &cuts, op.p);

    // Variable layout: per frame x, [s], [a1], [a2], [a3]; then per frame z, [b1], [b2], [b3].
    let mut nv = 0;
    let mut alloc = |on: bool| {
        on.then(|| {
            nv += 1;
            nv - 1
        })
    };
    let mut x_index = Vec::with_capacity(n);
    let mut s_index = Vec::with_capacity(n);
    let mut a_index: Vec<[Option<usize>; 3]> = Vec::with_capacity(n);
    for t in 0..n {
        x_index.push(alloc(true).unwrap());
        s_index.push(alloc(mask.data[t]));
        a_index.push(std::array::from_fn(|k| alloc(mask.diff[k][t] && op.lambda[k] > 0.0)));
    }
    let mut z_index = Vec::with_capacity(n);
    let mut b_index: Vec<[Option<usize>; 3]> = Vec::with_capacity(n);
    for t in 0..n {
        z_index.push(alloc(true).unwrap());
        b_index.push(std::array::from_fn(|k| alloc(mask.diff[k][t] && op.zoom_lambda[k] > 0.0)));
    }

    let mut pb = ProgramBuilder::new(nv);
    let (x_lo, x_hi) = bound_row(geom.x_bounds().0, geom.x_bounds().1);
    let (z_lo, z_hi) = bound_row(op.z_min, 1.0);
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(5);
    let mut add_l1 = |pb: &mut ProgramBuilder, idx: &[usize], t: usize, k: usize, slack: usize, w: f64| {
        pb.add_linear(slack, w);
        for sign in [1.0, -1.0] {
            terms.clear();
            terms.push((slack, 1.0));
            terms.extend(DIFF_COEFFS[k].iter().enumerate().map(|(j, c)| (idx[t - j], -sign * c)));
            pb.add_row(&terms, 0.0, f64::INFINITY);
        }
    };
    for t in 0..n {
        let x = x_index[t];
        pb.add_row(&[(x, 1.0)], x_lo, x_hi);
        if let Some(s) = s_index[t] {
            pb.add_quadratic(s, s, 2.0);
            pb.add_row(&[(s, 1.0), (x, -1.0)], -reference[t] - op.tau, f64::INFINITY);
            pb.add_row(&[(s, 1.0), (x, 1.0)], reference[t] - op.tau, f64::INFINITY);
        }
        if mask.velocity[t] {
            pb.add_row(&[(x, 1.0), (x_index[t - 1], -1.0)], -op.pan_speed_max, op.pan_speed_max);
        }
        for k in 0..3 {
            if let Some(a) = a_index[t][k] {
                add_l1(&mut pb, &x_index, t, k, a, op.lambda[k]);
            }
        }
    }
    for t in 0..n {
        let z = z_index[t];
        pb.add_row(&[(z, 1.0)], z_lo, z_hi);
        if mask.zoom[t] {
            pb.add_squared_deviation(z, rho[t]);
        }
        for k in 0..3 {
            if let Some(b) = b_index[t][k] {
                add_l1(&mut pb, &z_index, t, k, b, op.zoom_lambda[k]);
            }
        }
    }
    Ok(TrajectoryProgram {
        program: pb.build()?,
        x_index,
        z_index,
        reference,
        rho: rho.to_vec(),
        cuts,
        mask,
    })
}

/// Builds the program for a stage-one path; new cuts from the path are
/// merged with `original_cuts` (0-based).
pub fn build_program(
    pe: &PathEstimate,
    original_cuts: &[usize],
    zt: &ZoomTargets,
    op: &OptParams,
    geom: &CropGeometry,
) -> Result<TrajectoryProgram> {
    let r: Vec<f64> = pe.r.iter().map(|&v| v as f64).collect();
    build_reference_program(&r, &merge_cuts(original_cuts, &pe.cuts), &zt.rho, op, geom)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub status: Status,
    pub iterations: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub x_star: Vec<f64>,
    pub z: Vec<f64>,
    pub crop_rects: Vec<CropRect>,
    /// Sorted 0-based frames that start a shot.
    pub cuts_all: Vec<usize>,
    pub solve: SolveSummary,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_star.is_empty()
    }

    pub fn is_cut(&self, t: usize) -> bool {
        self.cuts_all.binary_search(&t).is_ok()
    }
}

/// Largest violation of the trajectory constraints, with its name and frame.
pub fn worst_violation(
    x: &[f64],
    z: &[f64],
    cuts: &[usize],
    op: &OptParams,
    geom: &CropGeometry,
) -> (f64, &'static str, usize) {
    let (lo, hi) = geom.x_bounds();
    let mut worst = (0.0, "none", 0);
    let mut note = |amount: f64, what: &'static str, t: usize| {
        if amount > worst.0 {
            worst = (amount, what, t);
        }
    };
    for t in 0..x.len() {
        note(lo - x[t], "inclusion bound", t);
        note(x[t] - hi, "inclusion bound", t);
        note(op.z_min - z[t], "zoom range", t);
        note(z[t] - 1.0, "zoom range", t);
        if t > 0 && cuts.binary_search(&t).is_err() {
            note((x[t] - x[t - 1]).abs() - op.pan_speed_max, "pan speed", t);
        }
    }
    worst
}

/// Solves a program from [`build_reference_program`] and checks the result.
pub fn solve_trajectory(tp: &TrajectoryProgram, op: &OptParams, geom: &CropGeometry, settings: &SolverSettings) -> Result<Trajectory> {
    let sol = solve_with_warm_start(&tp.program, settings, None);
    if sol.status != Status::Solved {
        return Err(Error::Solver {
            status: sol.status,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            iterations: sol.iterations,
        });
    }
    let mut x: Vec<f64> = tp.x_index.iter().map(|&i| sol.x[i]).collect();
    let mut z: Vec<f64> = tp.z_index.iter().map(|&i| sol.x[i]).collect();
    let (amount, constraint, frame) = worst_violation(&x, &z, &tp.cuts, op, geom);
    if amount > FEASIBILITY_TOL {
        return Err(Error::Infeasible { constraint, frame: frame + 1, amount });
    }
    let (lo, hi) = geom.x_bounds();
    x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    z.iter_mut().for_each(|v| *v = v.clamp(op.z_min, 1.0));
    let crop_rects = x.iter().zip(&z).map(|(&x, &z)| geom.crop_rect(x, z)).collect();
    Ok(Trajectory {
        solve: SolveSummary {
            status: sol.status,
            iterations: sol.iterations,
            objective: energy(&x, &z, &tp.reference, &tp.rho, &tp.mask, op),
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            gap: sol.gap,
        },
        x_star: x,
        z,
        crop_rects,
        cuts_all: tp.cuts.clone(),
        trace: sol.trace,
    })
}

pub fn optimize_trajectory(
    pe: &PathEstimate,
    original_cuts: &[usize],
    zt: &ZoomTargets,
    op: &OptParams,
    geom: &CropGeometry,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    let tp = build_program(pe, original_cuts, zt, op, geom)?;
    tracing::debug!(
        variables = tp.program.num_variables(),
        constraints = tp.program.num_constraints(),
        "trajectory program assembled"
    );
    solve_trajectory(&tp, op, geom, settings)
}

/// Crop path as CSV `frame,x,z,left,top,width,height,is_cut`, 1-based frames.
pub fn crop_csv(traj: &Trajectory) -> String {
    let mut out = String::from("frame,x,z,left,top,width,height,is_cut\n");
    for t in 0..traj.len() {
        let r = &traj.crop_rects[t];
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.3},{:.3},{:.3},{:.3},{}\n",
            t + 1,
            traj.x_star[t],
            traj.z[t],
            r.left,
            r.top,
            r.width,
            r.height,
            u8::from(traj.is_cut(t))
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> CropGeometry {
        CropGeometry::new(1000.0, 300.0, 300.0).unwrap()
    }

    fn params() -> OptParams {
        OptParams::defaults(300.0, 1000.0, 25.0)
    }

    fn run(r: &[f64], cuts: &[usize], op: &OptParams) -> (TrajectoryProgram, Trajectory) {
        let rho = vec![1.0; r.len()];
        let tp = build_reference_program(r, cuts, &rho, op, &geom()).unwrap();
        let traj = solve_trajectory(&tp, op, &geom(), &SolverSettings::default()).unwrap();
        (tp, traj)
    }

    fn tv(v: &[f64]) -> f64 {
        v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    #[test]
    fn delay_within_shots() {
        let r: Vec<f64> = (0..8).map(|t| t as f64).collect();
        assert_eq!(delayed_reference(&r, &[4], 2), vec![0.0, 0.0, 0.0, 1.0, 4.0, 4.0, 4.0, 5.0]);
        assert_eq!(delayed_reference(&r, &[], 0), r);
    }

    #[test]
    fn mask_around_cut() {
        let m = TermMask::new(12, &[6], 2);
        let on = |v: &Vec<bool>| (0..v.len()).filter(|&t| v[t]).collect::<Vec<_>>();
        assert_eq!(on(&m.data), vec![0, 1, 2, 3, 9, 10, 11]);
        assert_eq!(on(&m.zoom).len(), 11);
        assert_eq!(on(&m.diff[0]), vec![1, 2, 3, 4, 5, 7, 8, 9, 10, 11]);
        assert_eq!(on(&m.diff[1]), vec![2, 3, 9, 10, 11]);
        assert_eq!(on(&m.diff[2]), vec![3, 9, 10, 11]);
        assert_eq!(m.velocity, m.diff[0]);
        // without a window only terms spanning the cut go
        let m = TermMask::new(8, &[4], 0);
        assert_eq!(on(&m.diff[2]), vec![3, 7]);
        assert!(!m.data[4] && m.data[3] && m.data[5]);
    }

    #[test]
    fn constant_reference_is_a_fixed_point() {
        let r = vec![420.0; 60];
        let mut op = params();
        op.tau = 0.0;
        let (_, traj) = run(&r, &[], &op);
        for &x in &traj.x_star {
            assert!((x - 420.0).abs() < 1e-2, "{x}");
        }
        assert!(traj.cuts_all.is_empty());
        assert!(tv(&traj.x_star) < 1e-3);
        assert!(traj.solve.objective < 1e-3);
        // with a deadzone any constant inside it is optimal
        let (_, traj) = run(&r, &[], &params());
        assert!(tv(&traj.x_star) < 1e-4);
        assert!((traj.x_star[0] - 420.0).abs() <= params().tau + 1e-6);
    }

    #[test]
    fn program_objective_matches_energy() {
        let r: Vec<f64> = (0..40).map(|t| 300.0 + 7.0 * ((t as f64) * 0.7).sin() * t as f64).collect();
        let op = params();
        let rho: Vec<f64> = (0..40).map(|t| 0.7 + 0.3 * ((t % 9) as f64 / 8.0)).collect();
        let tp = build_reference_program(&r, &[17], &rho, &op, &geom()).unwrap();
        let x: Vec<f64> = (0..40).map(|t| 400.0 + 3.0 * t as f64).collect();
        let z: Vec<f64> = (0..40).map(|t| 0.8 + 0.004 * t as f64).collect();
        let sol = solve_with_warm_start(&tp.program, &SolverSettings::default(), None);
        assert_eq!(sol.status, Status::Solved);
        let xs: Vec<f64> = tp.x_index.iter().map(|&i| sol.x[i]).collect();
        let zs: Vec<f64> = tp.z_index.iter().map(|&i| sol.x[i]).collect();
        let e = energy(&xs, &zs, &tp.reference, &rho, &tp.mask, &op);
        assert!((e - sol.objective_value).abs() <= 1e-6 * e.max(1.0), "{e} vs {}", sol.objective_value);
        assert!(e <= energy(&x, &z, &tp.reference, &rho, &tp.mask, &op));
    }

    #[test]
    fn cut_allows_jump_and_holds_still() {
        let r: Vec<f64> = (0..80).map(|t| if t < 40 { 250.0 } else { 650.0 }).collect();
        let mut op = params();
        op.delay = 0;
        let (_, traj) = run(&r, &[40], &op);
        assert!((traj.x_star[40] - traj.x_star[39] - 400.0).abs() < 1.0);
        assert!(tv(&traj.x_star[35..40]) < 0.5);
        assert!(tv(&traj.x_star[40..46]) < 0.5);
        assert!(traj.is_cut(40));
    }

    #[test]
    fn velocity_bound_without_cut() {
        let r: Vec<f64> = (0..80).map(|t| if t < 40 { 250.0 } else { 650.0 }).collect();
        let (_, traj) = run(&r, &[], &params());
        let max = traj.x_star.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max <= params().pan_speed_max + 1e-6);
        assert!(max > 1.0);
    }

    #[test]
    fn translation_equivariance() {
        let base: Vec<f64> = (0..50).map(|t| 400.0 + 60.0 * ((t / 10) % 2) as f64).collect();
        let mut op = params();
        op.tau = 5.0;
        let (_, a) = run(&base, &[], &op);
        let shifted: Vec<f64> = base.iter().map(|v| v + 37.0).collect();
        let (_, b) = run(&shifted, &[], &op);
        for t in 0..50 {
            assert!((b.x_star[t] - a.x_star[t] - 37.0).abs() < 1e-3);
        }
    }

    #[test]
    fn no_regularization_tracks_reference() {
        let r: Vec<f64> = (0..30).map(|t| 100.0 + 10.0 * t as f64 + if t % 2 == 0 { 3.0 } else { 0.0 }).collect();
        let mut op = params();
        op.lambda = [0.0; 3];
        op.tau = 0.0;
        op.delay = 0;
        op.pan_speed_max = 100.0;
        let (_, traj) = run(&r, &[], &op);
        let (lo, hi) = geom().x_bounds();
        for t in 0..30 {
            assert!((traj.x_star[t] - r[t].clamp(lo, hi)).abs() < 1e-2, "{t}: {} vs {}", traj.x_star[t], r[t]);
        }
    }

    #[test]
    fn degenerate_bounds() {
        let g = CropGeometry::new(300.0, 300.0, 300.0).unwrap();
        let mut op = params();
        op.z_min = 1.0;
        let tp = build_reference_program(&[10.0; 6], &[], &[0.8; 6], &op, &g).unwrap();
        let traj = solve_trajectory(&tp, &op, &g, &SolverSettings::default()).unwrap();
        assert!(traj.x_star.iter().all(|&x| x == 150.0));
        assert!(traj.z.iter().all(|&z| z == 1.0));
    }

    #[test]
    fn crop_rect_clamps() {
        let g = geom();
        let r = g.crop_rect(150.0, 0.8);
        assert_eq!((r.width, r.height), (240.0, 240.0));
        assert!((r.top - 30.0).abs() < 1e-12);
        assert!((r.left - 30.0).abs() < 1e-12);
        assert_eq!(g.crop_rect(990.0, 1.0).left, 700.0);
    }

    #[test]
    fn rejects_bad_cuts_and_geometry() {
        let op = params();
        assert!(build_reference_program(&[500.0; 5], &[0], &[1.0; 5], &op, &geom()).is_err());
        assert!(build_reference_program(&[500.0; 5], &[5], &[1.0; 5], &op, &geom()).is_err());
        assert!(build_reference_program(&[500.0; 5], &[4], &[1.0; 5], &op, &geom()).is_ok());
        assert!(CropGeometry::new(100.0, 100.0, 101.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let (_, traj) = run(&[500.0; 3], &[2], &params());
        let csv = crop_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "frame,x,z,left,top,width,height,is_cut");
        assert!(lines[3].starts_with("3,") && lines[3].ends_with(",1"));
        assert!(lines[1].ends_with(",0"));
    }
}
