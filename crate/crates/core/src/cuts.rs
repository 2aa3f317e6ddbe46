//! Original shot boundaries: frame-list files and a naive histogram detector.

use std::io::{BufRead, BufReader, Read};

use crate::error::{Error, Result};

pub const DEFAULT_CUT_THRESHOLD: f64 = 0.5;

/// Intersection of two histograms after normalizing each to unit mass.
pub fn histogram_intersection(a: &[f64], b: &[f64]) -> f64 {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if sa <= 0.0 || sb <= 0.0 {
        return if sa <= 0.0 && sb <= 0.0 { 1.0 } else { 0.0 };
    }
    a.iter().zip(b).map(|(x, y)| (x / sa).min(y / sb)).sum()
}

/// Frames `t` (0-based) whose histogram intersects the previous one below
/// `threshold`. A detection right after another one is dropped.
pub fn detect_cuts_naive(histograms: &[Vec<f64>], threshold: f64) -> Result<Vec<usize>> {
    let Some(first) = histograms.first() else {
        return Ok(Vec::new());
    };
    let bins = first.len();
    if let Some(t) = histograms.iter().position(|h| h.len() != bins) {
        return Err(Error::validation(format!(
            "histogram of frame {} has {} bins, expected {bins}",
            t + 1,
            histograms[t].len()
        )));
    }
    let mut cuts: Vec<usize> = Vec::new();
    for t in 1..histograms.len() {
        if histogram_intersection(&histograms[t - 1], &histograms[t]) < threshold
            && cuts.last().is_none_or(|&c| c + 1 != t)
        {
            cuts.push(t);
        }
    }
    Ok(cuts)
}

/// Reads one histogram per line, bins separated by commas or whitespace.
/// Blank lines and `#` comments are skipped.
pub fn read_histograms<R: Read>(source: R) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let row = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| Error::Parse { line: i as u64 + 1, message: format!("bad bin value {f:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// Reads 1-based cut frames (one or more per line, `#` comments allowed)
/// and returns them 0-based, sorted and deduplicated. A cut at frame `k`
/// means frame `k` starts a new shot, so `k` must lie in `2..=frames`.
pub fn read_cut_list<R: Read>(source: R, frames: usize) -> Result<Vec<usize>> {
    let mut cuts = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        for field in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()) {
            let parse_err = |message: String| Error::Parse { line: i as u64 + 1, message };
            let k: usize = field.parse().map_err(|_| parse_err(format!("bad frame number {field:?}")))?;
            if k < 2 || k > frames {
                return Err(parse_err(format!("cut frame {k} outside 2..={frames}")));
            }
            cuts.push(k - 1);
        }
    }
    cuts.sort_unstable();
    cuts.dedup();
    Ok(cuts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_histograms_have_no_cuts() {
        let h = vec![vec![1.0, 2.0, 3.0]; 10];
        assert!(detect_cuts_naive(&h, 0.5).unwrap().is_empty());
    }

    #[test]
    fn hard_switch() {
        let mut h = vec![vec![1.0, 0.0]; 6];
        for row in &mut h[4..] {
            *row = vec![0.0, 5.0];
        }
        assert_eq!(detect_cuts_naive(&h, 0.5).unwrap(), vec![4]);
    }

    #[test]
    fn adjacent_detections_merge() {
        let h = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(detect_cuts_naive(&h, 0.5).unwrap(), vec![1]);
    }

    #[test]
    fn slow_dissolve_is_not_a_cut() {
        // linear blend over 20 frames between two disjoint histograms
        let h: Vec<Vec<f64>> = (0..=20).map(|t| vec![1.0 - t as f64 / 20.0, t as f64 / 20.0]).collect();
        let worst = h.windows(2).map(|w| histogram_intersection(&w[0], &w[1])).fold(1.0, f64::min);
        assert!((worst - 0.95).abs() < 1e-12);
        assert!(detect_cuts_naive(&h, DEFAULT_CUT_THRESHOLD).unwrap().is_empty());
    }

    #[test]
    fn mismatched_bins() {
        assert!(detect_cuts_naive(&[vec![1.0], vec![1.0, 2.0]], 0.5).is_err());
    }

    #[test]
    fn cut_list_parsing() {
        let text = "# cuts\n12\n5, 7\n\n12 # again\n";
        assert_eq!(read_cut_list(text.as_bytes(), 20).unwrap(), vec![4, 6, 11]);
        assert!(read_cut_list("1\n".as_bytes(), 20).is_err());
        assert_eq!(read_cut_list("20\n".as_bytes(), 20).unwrap(), vec![19]);
        assert!(read_cut_list("21\n".as_bytes(), 20).is_err());
        match read_cut_list("3\nx\n".as_bytes(), 20) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn histogram_file() {
        let h = read_histograms("1 2 3\n# skip\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(h, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert!(read_histograms("1 -2\n".as_bytes()).is_err());
    }
}
