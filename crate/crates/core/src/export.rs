//! Run artifacts: crop path files, plot, encoder script, debug dumps.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{OutputFlags, ResolvedParams};
use crate::dp::path_csv;
use crate::error::{Error, Result};
use crate::fixation::fixations_csv;
use crate::gaze::{FrameGeometry, GazeSet};
use crate::pipeline::RunResult;
use crate::qp::trace_csv;
use crate::trajectory::{crop_csv, CropGeometry, CropRect, SolveSummary, Trajectory};
use crate::zoom::zoom_csv;

pub const CROP_CSV: &str = "crop_path.csv";
pub const CROP_JSON: &str = "crop_path.json";
pub const RUN_JSON: &str = "run.json";
pub const PATH_CSV: &str = "path_dp.csv";
pub const INCLUSION_JSON: &str = "inclusion.json";
pub const PLOT_SVG: &str = "plot.svg";
pub const CROP_CMD: &str = "crop.cmd";
pub const ENCODE_SH: &str = "encode.sh";

/// Run description written next to the crop path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub gaze_file: PathBuf,
    pub geometry: FrameGeometry,
    pub aspect: String,
    pub target_width: f64,
    pub users: usize,
    pub samples: usize,
    pub rejected_records: usize,
    pub invalid_samples: usize,
    /// 1-based frames.
    pub original_cuts: Vec<usize>,
    pub new_cuts: Vec<usize>,
    pub included_gaze_pct: f64,
    pub centered_window_included_pct: f64,
}

#[derive(Serialize)]
struct CropPathJson<'a> {
    run: &'a RunMetadata,
    params: &'a ResolvedParams,
    solver: &'a SolveSummary,
    frames: Vec<CropRow>,
}

/// One row of the crop path file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropRow {
    /// 1-based.
    pub frame: usize,
    pub x: f64,
    pub z: f64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub is_cut: u8,
}

impl CropRow {
    pub fn rect(&self) -> CropRect {
        CropRect { left: self.left, top: self.top, width: self.width, height: self.height }
    }
}

/// Rows exactly as they appear in the CSV (values rounded as printed).
pub fn crop_rows(traj: &Trajectory) -> Result<Vec<CropRow>> {
    read_crop_csv(crop_csv(traj).as_bytes())
}

pub fn read_crop_csv<R: Read>(source: R) -> Result<Vec<CropRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<CropRow>().enumerate() {
        let row = rec.map_err(|e| Error::Parse { line: i as u64 + 2, message: e.to_string() })?;
        if row.frame != i + 1 {
            return Err(Error::Parse { line: i as u64 + 2, message: format!("expected frame {}", i + 1) });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::validation("crop path has no rows"));
    }
    Ok(rows)
}

/// Reads the `r` column of a stage-one path dump (`frame,r,is_cut`).
pub fn read_path_csv<R: Read>(source: R) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        frame: usize,
        r: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(source);
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(i, rec)| {
            rec.map(|row| row.r)
                .map_err(|e| Error::Parse { line: i as u64 + 2, message: e.to_string() })
        })
        .collect()
}

/// Everything a run writes, in memory, keyed by file name.
pub fn run_outputs(
    gs: &GazeSet,
    run: &RunResult,
    meta: &RunMetadata,
    params: &ResolvedParams,
    crop: &CropGeometry,
    flags: &OutputFlags,
) -> Result<Vec<(String, Vec<u8>)>> {
    let traj = &run.trajectory;
    let mut files = vec![
        (CROP_CSV.to_string(), crop_csv(traj).into_bytes()),
        (CROP_JSON.to_string(), crop_path_json(traj, meta, params)?.into_bytes()),
        (RUN_JSON.to_string(), to_json(meta)?.into_bytes()),
        (INCLUSION_JSON.to_string(), to_json(&run.inclusion)?.into_bytes()),
        (PATH_CSV.to_string(), path_csv(&run.path).into_bytes()),
    ];
    if flags.plot {
        let r: Vec<f64> = run.path.r.iter().map(|&v| v as f64).collect();
        files.push((PLOT_SVG.to_string(), plot_svg(gs, &r, &traj.x_star, &traj.cuts_all).into_bytes()));
    }
    if flags.script {
        files.push((CROP_CMD.to_string(), crop_cmd(traj, gs.geometry().fps).into_bytes()));
        files.push((ENCODE_SH.to_string(), encode_script(traj, crop).into_bytes()));
    }
    if flags.debug {
        files.push(("fixations.csv".to_string(), fixations_csv(&run.fixations).into_bytes()));
        files.push(("zoom.csv".to_string(), zoom_csv(&run.dispersion, &run.zoom).into_bytes()));
        files.push(("solver_trace.csv".to_string(), trace_csv(&traj.trace).into_bytes()));
        files.push(("saliency.pgm".to_string(), run.saliency.to_pgm(4000)));
    }
    Ok(files)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn crop_path_json(traj: &Trajectory, meta: &RunMetadata, params: &ResolvedParams) -> Result<String> {
    let doc = CropPathJson { run: meta, params, solver: &traj.solve, frames: crop_rows(traj)? };
    to_json(&doc)
}

fn rect_fields(r: &CropRect) -> (String, String, String, String) {
    (format!("{:.3}", r.left), format!("{:.3}", r.top), format!("{:.3}", r.width), format!("{:.3}", r.height))
}

/// ffmpeg `sendcmd` file setting the crop rectangle at every frame.
pub fn crop_cmd(traj: &Trajectory, fps: f64) -> String {
    let mut out = String::new();
    for (t, r) in traj.crop_rects.iter().enumerate() {
        let (x, y, w, h) = rect_fields(r);
        let _ = writeln!(out, "{:.6} crop x {x}, crop y {y}, crop w {w}, crop h {h};", t as f64 / fps);
    }
    out
}

/// Shell script with one ffmpeg invocation per shot of the output.
pub fn encode_script(traj: &Trajectory, crop: &CropGeometry) -> String {
    let out_w = crop.target_width.round() as i64;
    let out_h = crop.frame_height.round() as i64;
    let mut s = String::from(
        "#!/bin/sh\n# usage: sh encode.sh INPUT_VIDEO\n# one segment per shot; crop rectangles follow crop.cmd frame by frame\nset -e\nIN=\"$1\"\n",
    );
    let mut starts = vec![0];
    starts.extend(traj.cuts_all.iter().copied());
    starts.push(traj.len());
    for (i, w) in starts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (x, y, cw, ch) = rect_fields(&traj.crop_rects[a]);
        let _ = writeln!(
            s,
            "ffmpeg -y -i \"$IN\" -vf \"sendcmd=f=crop.cmd,crop=w={cw}:h={ch}:x={x}:y={y},scale={out_w}:{out_h},select='between(n\\,{a}\\,{})',setpts=N/FRAME_RATE/TB\" -an shot_{:04}.mp4",
            b - 1,
            i + 1
        );
    }
    s
}

/// Static plot of gaze, rough path, final crop center and cuts over time.
pub fn plot_svg(gs: &GazeSet, r: &[f64], x: &[f64], cuts: &[usize]) -> String {
    const W: f64 = 1000.0;
    const H: f64 = 500.0;
    const PAD: f64 = 40.0;
    let n = gs.n_frames().max(2) as f64;
    let frame_w = gs.geometry().width as f64;
    let px = |t: f64| PAD + (W - 2.0 * PAD) * t / (n - 1.0);
    let py = |v: f64| PAD + (H - 2.0 * PAD) * v / frame_w;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"25\" font-size=\"12\" font-family=\"sans-serif\">x-position over frames: gaze (gray), rough path (blue), crop center (red), cuts (dashed)</text>");
    let valid: Vec<_> = gs.samples().iter().filter(|p| p.valid).collect();
    let step = valid.len().div_ceil(20_000).max(1);
    let _ = writeln!(s, "<g fill=\"#999\" fill-opacity=\"0.5\">");
    for p in valid.iter().step_by(step) {
        let _ = writeln!(s, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"1\"/>", px(p.frame as f64), py(p.x));
    }
    let _ = writeln!(s, "</g>");
    for &c in cuts {
        let cx = px(c as f64 - 0.5);
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.1}\" y1=\"{PAD}\" x2=\"{cx:.1}\" y2=\"{}\" stroke=\"#2a2\" stroke-dasharray=\"4 3\"/>",
            H - PAD
        );
    }
    for (series, color) in [(r, "#36c"), (x, "#d22")] {
        let pts: Vec<String> =
            series.iter().enumerate().map(|(t, &v)| format!("{:.1},{:.1}", px(t as f64), py(v))).collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes every file into `dir`, removing the ones already written if any
/// write fails.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::Status;

    fn traj() -> Trajectory {
        let crop = CropGeometry::new(400.0, 100.0, 100.0).unwrap();
        let x = vec![100.0, 100.5, 300.0, 300.0];
        let z = vec![1.0, 0.9, 0.8, 0.8];
        Trajectory {
            crop_rects: x.iter().zip(&z).map(|(&x, &z)| crop.crop_rect(x, z)).collect(),
            x_star: x,
            z,
            cuts_all: vec![2],
            solve: SolveSummary {
                status: Status::Solved,
                iterations: 3,
                objective: 1.0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                gap: 0.0,
            },
            trace: Vec::new(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = crop_rows(&traj()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2].is_cut, 1);
        assert_eq!(rows[1].left, 55.5);
        assert!(read_crop_csv("frame,x,z,left,top,width,height,is_cut\n2,1,1,1,1,1,1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn command_file_matches_rows() {
        let t = traj();
        let cmd = crop_cmd(&t, 25.0);
        let rows = crop_rows(&t).unwrap();
        for (line, row) in cmd.lines().zip(&rows) {
            assert!(line.starts_with(&format!("{:.6} ", (row.frame - 1) as f64 / 25.0)));
            assert!(line.contains(&format!("crop x {:.3}, crop y {:.3}, crop w {:.3}, crop h {:.3};", row.left, row.top, row.width, row.height)));
        }
    }

    #[test]
    fn one_encoder_line_per_shot() {
        let crop = CropGeometry::new(400.0, 100.0, 100.0).unwrap();
        let s = encode_script(&traj(), &crop);
        let lines: Vec<&str> = s.lines().filter(|l| l.starts_with("ffmpeg")).collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("between(n\\,0\\,1)") && lines[1].contains("between(n\\,2\\,3)"));
    }

    #[test]
    fn write_all_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![
            ("a.txt".to_string(), b"a".to_vec()),
            ("missing/b.txt".to_string(), b"b".to_vec()),
        ];
        assert!(write_all(dir.path(), &files).is_err());
        assert!(!dir.path().join("a.txt").exists());
    }
}
