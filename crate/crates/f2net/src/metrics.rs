//! Region similarity J, boundary accuracy F, and the mean/recall/decay
//! statistics of the evaluation report.

use crate::error::{F2NetError, Result};
use crate::tensor::Tensor;

/// Default boundary-match tolerance: 0.8% of the image diagonal, at least 1 px.
pub fn default_boundary_tol(width: usize, height: usize) -> f64 {
    let diag = ((width * width + height * height) as f64).sqrt();
    (0.008 * diag).max(1.0)
}

fn binary_pixels(mask: &Tensor) -> Vec<bool> {
    mask.data.iter().map(|&v| v > 0.5).collect()
}

fn check_shapes(op: &'static str, pred: &Tensor, gt: &Tensor) -> Result<(usize, usize)> {
    let ps = &pred.shape;
    let gs = &gt.shape;
    let dims = |s: &Vec<usize>| match s.len() {
        2 => Some((s[0], s[1])),
        3 if s[2] == 1 => Some((s[0], s[1])),
        _ => None,
    };
    match (dims(ps), dims(gs)) {
        (Some(a), Some(b)) if a == b => Ok(a),
        _ => Err(F2NetError::ShapeMismatch {
            op,
            lhs: ps.clone(),
            rhs: gs.clone(),
        }),
    }
}

/// Jaccard overlap of two binary masks (threshold 0.5); 1 when both are empty.
pub fn region_similarity(pred: &Tensor, gt: &Tensor) -> Result<f64> {
    check_shapes("region_similarity", pred, gt)?;
    let p = binary_pixels(pred);
    let g = binary_pixels(gt);
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in p.iter().zip(&g) {
        inter += (a & b) as usize;
        union += (a | b) as usize;
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Pixels of the mask that touch background through 4-adjacency (image border
/// counts as background).
pub fn boundary_pixels(mask: &[bool], h: usize, w: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            let exposed = y == 0
                || x == 0
                || y == h - 1
                || x == w - 1
                || !mask[(y - 1) * w + x]
                || !mask[(y + 1) * w + x]
                || !mask[y * w + x - 1]
                || !mask[y * w + x + 1];
            if exposed {
                out.push((y, x));
            }
        }
    }
    out
}

fn match_fraction(from: &[(usize, usize)], to: &[(usize, usize)], tol: f64) -> f64 {
    if from.is_empty() {
        return 0.0;
    }
    let tol2 = tol * tol;
    let hit = from
        .iter()
        .filter(|&&(y, x)| {
            to.iter().any(|&(ty, tx)| {
                let dy = y as f64 - ty as f64;
                let dx = x as f64 - tx as f64;
                dy * dy + dx * dx <= tol2
            })
        })
        .count();
    hit as f64 / from.len() as f64
}

/// Boundary F-measure: precision/recall of boundary pixels within `tol`
/// (Euclidean), combined as 2PR/(P+R); 0 when P+R = 0, 1 when both masks have
/// no boundary at all.
pub fn boundary_accuracy(pred: &Tensor, gt: &Tensor, tol: f64) -> Result<f64> {
    let (h, w) = check_shapes("boundary_accuracy", pred, gt)?;
    let p = binary_pixels(pred);
    let g = binary_pixels(gt);
    let pb = boundary_pixels(&p, h, w);
    let gb = boundary_pixels(&g, h, w);
    if pb.is_empty() && gb.is_empty() {
        return Ok(1.0);
    }
    let precision = match_fraction(&pb, &gb, tol);
    let recall = match_fraction(&gb, &pb, tol);
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// Mean / recall / decay statistics of one per-frame metric series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub recall: f64,
    pub decay: f64,
}

/// Mean over frames, fraction of frames above 0.5, and first-quartile mean
/// minus last-quartile mean with quartile size `max(1, n/4)`.
pub fn metric_stats(values: &[f64]) -> Result<MetricStats> {
    if values.is_empty() {
        return Err(F2NetError::EmptyInput("metric_stats of no frames".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let recall = values.iter().filter(|&&v| v > 0.5).count() as f64 / n as f64;
    let q = (n / 4).max(1);
    let first = values[..q].iter().sum::<f64>() / q as f64;
    let last = values[n - q..].iter().sum::<f64>() / q as f64;
    Ok(MetricStats {
        mean,
        recall,
        decay: first - last,
    })
}

/// Per-sequence J and F statistics plus dataset-level averages.
#[derive(Clone, Debug, Default)]
pub struct MetricReport {
    /// `(sequence name, J stats, F stats)`, sorted by name.
    pub sequences: Vec<(String, MetricStats, MetricStats)>,
}

impl MetricReport {
    pub fn from_frames(mut per_seq: Vec<(String, Vec<f64>, Vec<f64>)>) -> Result<MetricReport> {
        if per_seq.is_empty() {
            return Err(F2NetError::EmptyInput("report of no sequences".into()));
        }
        per_seq.sort_by(|a, b| a.0.cmp(&b.0));
        let sequences = per_seq
            .into_iter()
            .map(|(name, j, f)| Ok((name, metric_stats(&j)?, metric_stats(&f)?)))
            .collect::<Result<_>>()?;
        Ok(MetricReport { sequences })
    }

    fn average(&self, pick: impl Fn(&(String, MetricStats, MetricStats)) -> MetricStats) -> MetricStats {
        let n = self.sequences.len() as f64;
        let mut acc = MetricStats {
            mean: 0.0,
            recall: 0.0,
            decay: 0.0,
        };
        for row in &self.sequences {
            let s = pick(row);
            acc.mean += s.mean;
            acc.recall += s.recall;
            acc.decay += s.decay;
        }
        acc.mean /= n;
        acc.recall /= n;
        acc.decay /= n;
        acc
    }

    pub fn j_overall(&self) -> MetricStats {
        self.average(|r| r.1)
    }

    pub fn f_overall(&self) -> MetricStats {
        self.average(|r| r.2)
    }

    /// `sequence,metric,mean,recall,decay` rows plus `overall` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sequence,metric,mean,recall,decay\n");
        let mut push = |name: &str, metric: &str, s: MetricStats| {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                name, metric, s.mean, s.recall, s.decay
            ));
        };
        for (name, j, f) in &self.sequences {
            push(name, "J", *j);
            push(name, "F", *f);
        }
        push("overall", "J", self.j_overall());
        push("overall", "F", self.f_overall());
        out
    }

    /// Human-readable table with the Mean/Recall/Decay row layout.
    pub fn to_table(&self) -> String {
        let j = self.j_overall();
        let f = self.f_overall();
        let mut out = String::new();
        out.push_str(&format!("{:<24} {:>8} {:>8}\n", "", "J", "F"));
        out.push_str(&format!(
            "{:<24} {:>8.3} {:>8.3}\n",
            "Mean (higher better)", j.mean, f.mean
        ));
        out.push_str(&format!(
            "{:<24} {:>8.3} {:>8.3}\n",
            "Recall (higher better)", j.recall, f.recall
        ));
        out.push_str(&format!(
            "{:<24} {:>8.3} {:>8.3}\n",
            "Decay (lower better)", j.decay, f.decay
        ));
        out
    }
}
