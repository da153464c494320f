//! Center prediction branch: heatmap estimation from pyramid features and the
//! previous gauss map, NMS candidate extraction, and motion-based center
//! selection.

use crate::error::{F2NetError, Result};
use crate::params::{conv_layer, BoundParams};
use crate::tensor::{Graph, Tensor, TensorId};

/// Single-channel map in `[0,1]` at quarter resolution.
#[derive(Clone, Debug)]
pub struct Heatmap {
    pub values: Tensor,
}

impl Heatmap {
    pub fn new(values: Tensor) -> Result<Self> {
        if values.shape.len() != 3 || values.shape[2] != 1 {
            return Err(F2NetError::Geometry(format!(
                "heatmap expects [h,w,1], got {:?}",
                values.shape
            )));
        }
        if values.data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(F2NetError::Geometry(
                "heatmap values must lie in [0,1]".into(),
            ));
        }
        Ok(Heatmap { values })
    }

    pub fn width(&self) -> usize {
        self.values.shape[1]
    }

    pub fn height(&self) -> usize {
        self.values.shape[0]
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values.data[y * self.width() + x]
    }
}

/// Ordered history of selected centers, in quarter-resolution pixel
/// coordinates, one entry per processed frame.
#[derive(Clone, Debug, Default)]
pub struct CenterTrack {
    pub centers: Vec<(f64, f64)>,
    pub capacity: usize,
}

impl CenterTrack {
    pub fn new(capacity: usize) -> Self {
        CenterTrack {
            centers: Vec::new(),
            capacity,
        }
    }

    pub fn push(&mut self, center: (f64, f64)) {
        self.centers.push(center);
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// How the final center is picked from the NMS candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterStrategy {
    /// Top-scored candidate.
    Maximum,
    /// Candidate closest to the motion-extrapolated point.
    Motion,
}

#[derive(Clone, Debug)]
pub struct CenterConfig {
    /// NMS candidate count.
    pub k: usize,
    /// Motion history length.
    pub n: usize,
    /// Odd NMS window size.
    pub nms_window: usize,
    /// Gauss radius for ground-truth heatmaps, in grid pixels.
    pub sigma_gt: f64,
}

impl CenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.n < 1 {
            return Err(F2NetError::Config("K and n must be at least 1".into()));
        }
        if self.nms_window % 2 == 0 {
            return Err(F2NetError::Config("nms_window must be odd".into()));
        }
        Ok(())
    }
}

impl Default for CenterConfig {
    fn default() -> Self {
        CenterConfig {
            k: 5,
            n: 10,
            nms_window: 3,
            sigma_gt: 2.0,
        }
    }
}

/// Default gauss radius for a grid: `max(2, 0.1 * min(w, h))`.
pub fn default_sigma_gt(grid_w: usize, grid_h: usize) -> f64 {
    (0.1 * grid_w.min(grid_h) as f64).max(2.0)
}

/// Unnormalized gaussian over a `w x h` grid, exactly 1 at the rounded center
/// pixel.
pub fn gaussian_grid(center: (f64, f64), grid_w: usize, grid_h: usize, sigma: f64) -> Vec<f64> {
    let cx = center.0.round();
    let cy = center.1.round();
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut out = vec![0.0; grid_w * grid_h];
    for y in 0..grid_h {
        for x in 0..grid_w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            out[y * grid_w + x] = (-(dx * dx + dy * dy) * inv).exp();
        }
    }
    out
}

/// Ground-truth target heatmap for the focal loss.
pub fn gt_heatmap(center: (f64, f64), grid: (usize, usize), sigma: f64) -> Result<Tensor> {
    let (w, h) = grid;
    let cx = center.0.round();
    let cy = center.1.round();
    if cx < 0.0 || cy < 0.0 || cx >= w as f64 || cy >= h as f64 {
        return Err(F2NetError::Geometry(format!(
            "center ({}, {}) outside {}x{} grid",
            center.0, center.1, w, h
        )));
    }
    Tensor::new(&[h, w, 1], gaussian_grid(center, w, h, sigma))
}

/// Feature upsampling: project the stride-8 feature, upsample x2, and add the
/// projected stride-4 skip feature. Output is the stride-4 semantic map `U_t`.
pub fn upsample_merge(
    graph: &mut Graph,
    bound: &BoundParams,
    level8: TensorId,
    level4: TensorId,
) -> Result<TensorId> {
    let deep = conv_layer(graph, bound, "center.proj8", level8, 1, 0)?;
    let up = graph.bilinear_upsample(deep, 2)?;
    let skip = conv_layer(graph, bound, "center.proj4", level4, 1, 0)?;
    graph.add(up, skip)
}

/// Scale-and-bias modulation of the previous gauss map by the current
/// semantics: `Sigmoid(S) * G_prev + Sigmoid(b)`, with `S` and `b` each
/// produced by an independent conv over `Concat[U_t, G_prev]`.
pub fn modulate_prior(
    graph: &mut Graph,
    bound: &BoundParams,
    u_t: TensorId,
    g_prev: TensorId,
) -> Result<TensorId> {
    let su = graph.shape(u_t).to_vec();
    let sg = graph.shape(g_prev).to_vec();
    if sg.len() != 3 || sg[0] != su[0] || sg[1] != su[1] || sg[2] != 1 {
        return Err(F2NetError::ShapeMismatch {
            op: "modulate_prior",
            lhs: su,
            rhs: sg,
        });
    }
    let cat = graph.concat(&[u_t, g_prev], 2)?;
    let scale = conv_layer(graph, bound, "center.scale", cat, 1, 1)?;
    let bias = conv_layer(graph, bound, "center.bias", cat, 1, 1)?;
    let s_sig = graph.sigmoid(scale);
    let b_sig = graph.sigmoid(bias);
    let scaled = graph.mul(s_sig, g_prev)?;
    graph.add(scaled, b_sig)
}

/// Semantic heatmap logits from `U_t`: 3x3 conv with ReLU, then a 1x1 conv to
/// one channel.
pub fn semantic_heatmap(
    graph: &mut Graph,
    bound: &BoundParams,
    u_t: TensorId,
) -> Result<TensorId> {
    let hidden = conv_layer(graph, bound, "center.sem1", u_t, 1, 1)?;
    let hidden = graph.relu(hidden);
    conv_layer(graph, bound, "center.sem2", hidden, 1, 0)
}

/// Combine the two estimation branches: `Sigmoid(G_hat + F_t)`.
pub fn combine_heatmap(graph: &mut Graph, g_hat: TensorId, f_t: TensorId) -> Result<TensorId> {
    let sum = graph.add(g_hat, f_t)?;
    Ok(graph.sigmoid(sum))
}

/// Strict windowed local maxima, top `k` by score. A pixel qualifies when it
/// beats every window neighbor, with equal values resolved in favor of the
/// lexicographically smaller `(y, x)`. Candidates are returned by descending
/// score, ties by `(y, x)`.
pub fn topk_nms(heatmap: &Heatmap, k: usize, window: usize) -> Vec<((usize, usize), f64)> {
    let (h, w) = (heatmap.height(), heatmap.width());
    let r = (window / 2) as isize;
    let mut candidates: Vec<((usize, usize), f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = heatmap.at(x, y);
            let mut is_max = true;
            'scan: for dy in -r..=r {
                for dx in -r..=r {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let ny = y as isize + dy;
                    let nx = x as isize + dx;
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let nv = heatmap.at(nx as usize, ny as usize);
                    if nv > v || (nv == v && (ny as usize, nx as usize) < (y, x)) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                candidates.push(((x, y), v));
            }
        }
    }
    candidates.sort_by(|((ax, ay), av), ((bx, by), bv)| {
        bv.partial_cmp(av)
            .unwrap()
            .then_with(|| (ay, ax).cmp(&(by, bx)))
    });
    candidates.truncate(k);
    candidates
}

/// Constant-mean-velocity extrapolation from the center history:
/// `p_t = p_{t-1} + (p_{t-1} - p_{t-1-n'}) / n'` with `n' = min(n, len - 1)`.
pub fn motion_predict(track: &CenterTrack, n: usize) -> Result<(f64, f64)> {
    if track.is_empty() {
        return Err(F2NetError::EmptyInput("motion_predict on empty track".into()));
    }
    let len = track.len();
    let last = track.centers[len - 1];
    let span = n.min(len - 1);
    if span == 0 {
        return Ok(last);
    }
    let anchor = track.centers[len - 1 - span];
    let inv = 1.0 / span as f64;
    Ok((
        last.0 + (last.0 - anchor.0) * inv,
        last.1 + (last.1 - anchor.1) * inv,
    ))
}

/// Picks the final center among the NMS candidates.
pub fn select_center(
    candidates: &[((usize, usize), f64)],
    predicted: Option<(f64, f64)>,
    strategy: CenterStrategy,
) -> Result<((usize, usize), f64)> {
    if candidates.is_empty() {
        return Err(F2NetError::EmptyInput("no center candidates".into()));
    }
    match (strategy, predicted) {
        (CenterStrategy::Maximum, _) | (CenterStrategy::Motion, None) => {
            let mut best = candidates[0];
            for &((x, y), score) in &candidates[1..] {
                if score > best.1 || (score == best.1 && (y, x) < (best.0 .1, best.0 .0)) {
                    best = ((x, y), score);
                }
            }
            Ok(best)
        }
        (CenterStrategy::Motion, Some(p)) => {
            let mut best = candidates[0];
            let mut best_d2 = f64::INFINITY;
            for &((x, y), score) in candidates {
                let dx = x as f64 - p.0;
                let dy = y as f64 - p.1;
                let d2 = dx * dx + dy * dy;
                let better = d2 < best_d2
                    || (d2 == best_d2
                        && (score > best.1
                            || (score == best.1 && (y, x) < (best.0 .1, best.0 .0))));
                if better {
                    best = ((x, y), score);
                    best_d2 = d2;
                }
            }
            Ok(best)
        }
    }
}

/// Center-point focal loss between the predicted heatmap node and a constant
/// ground-truth gauss target. Returns a nonnegative scalar loss node.
pub fn focal_loss(
    graph: &mut Graph,
    heatmap: TensorId,
    target: &Tensor,
    alpha: f64,
    beta: f64,
) -> Result<TensorId> {
    const EPS: f64 = 1e-6;
    let shape = graph.shape(heatmap).to_vec();
    if shape != target.shape {
        return Err(F2NetError::ShapeMismatch {
            op: "focal_loss",
            lhs: shape,
            rhs: target.shape.clone(),
        });
    }
    let pos: Vec<f64> = target
        .data
        .iter()
        .map(|&t| if t == 1.0 { 1.0 } else { 0.0 })
        .collect();
    // (1 - t)^beta, masked to the non-peak pixels
    let neg_w: Vec<f64> = target
        .data
        .iter()
        .map(|&t| if t == 1.0 { 0.0 } else { (1.0 - t).powf(beta) })
        .collect();
    let pos = graph.constant(&target.shape, pos)?;
    let neg_w = graph.constant(&target.shape, neg_w)?;

    let h = graph.clamp(heatmap, EPS, 1.0 - EPS);
    let neg_h = graph.neg(h);
    let one_minus_h = graph.add_scalar(neg_h, 1.0);

    let pos_pow = graph.pow_const(one_minus_h, alpha);
    let log_h = graph.ln(h);
    let pos_term = graph.mul(pos_pow, log_h)?;
    let pos_term = graph.mul(pos_term, pos)?;

    let neg_pow = graph.pow_const(h, alpha);
    let log_one_minus = graph.ln(one_minus_h);
    let neg_term = graph.mul(neg_pow, log_one_minus)?;
    let neg_term = graph.mul(neg_term, neg_w)?;

    let total = graph.add(pos_term, neg_term)?;
    let summed = graph.sum_all(total);
    Ok(graph.neg(summed))
}
