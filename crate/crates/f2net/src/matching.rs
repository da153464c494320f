//! Center-guided intra- and inter-frame appearance matching: gauss-map prior
//! encoding, guided correlation matrices, and feature diffusion.

use crate::center::gaussian_grid;
use crate::error::{F2NetError, Result};
use crate::tensor::{Graph, Tensor, TensorId};

/// Gaussian spatial prior centered on the selected object center.
#[derive(Clone, Debug)]
pub struct GaussMap {
    /// `[h, w, 1]` values in `(0, 1]`, exactly 1 at the center cell.
    pub values: Tensor,
    /// Feature stride this map lives at (4 for the center branch, 8 for
    /// matching).
    pub stride: usize,
    pub center: (f64, f64),
    pub sigma: f64,
}

/// Default matching-stride sigma: `0.15 * min(w, h)` grid cells.
pub fn default_sigma_match(grid_w: usize, grid_h: usize) -> f64 {
    0.15 * grid_w.min(grid_h) as f64
}

/// Encodes a center point into a gauss map over a `w x h` grid.
pub fn gauss_map(
    center: (f64, f64),
    grid: (usize, usize),
    sigma: f64,
    stride: usize,
) -> Result<GaussMap> {
    let (w, h) = grid;
    let cx = center.0.round();
    let cy = center.1.round();
    if cx < 0.0 || cy < 0.0 || cx >= w as f64 || cy >= h as f64 {
        return Err(F2NetError::Geometry(format!(
            "gauss center ({}, {}) outside {}x{} grid",
            center.0, center.1, w, h
        )));
    }
    let values = Tensor::new(&[h, w, 1], gaussian_grid(center, w, h, sigma))?;
    Ok(GaussMap {
        values,
        stride,
        center,
        sigma,
    })
}

/// The three information flows produced by matching, as nodes of one graph.
/// All three share the `[h/8, w/8, c]` feature shape.
#[derive(Clone, Copy, Debug)]
pub struct MatchFlows {
    /// Skip connection: the current feature itself.
    pub original: TensorId,
    /// Intra-frame diffusion output.
    pub intra: TensorId,
    /// Inter-frame diffusion output.
    pub inter: TensorId,
}

/// Gauss-guided correlation: `Softmax((1/sqrt(C)) * query (key ⊙ G)^T)` with
/// softmax over the last axis. `query` and `v_flat` are `[n, c]`; the prior is
/// broadcast over channels. Every output row is nonnegative and sums to 1.
pub fn guided_correlation(
    graph: &mut Graph,
    query: TensorId,
    v_flat: TensorId,
    prior: TensorId,
) -> Result<TensorId> {
    let sq = graph.shape(query).to_vec();
    let sv = graph.shape(v_flat).to_vec();
    if sq.len() != 2 || sv.len() != 2 || sq[1] != sv[1] || sq[0] != sv[0] {
        return Err(F2NetError::ShapeMismatch {
            op: "guided_correlation",
            lhs: sq,
            rhs: sv,
        });
    }
    let (n, c) = (sv[0], sv[1]);
    let sp = graph.shape(prior).to_vec();
    if sp != [n, 1] && sp != [n] {
        return Err(F2NetError::ShapeMismatch {
            op: "guided_correlation",
            lhs: vec![n, 1],
            rhs: sp,
        });
    }
    // expand the prior across channels so the key is a plain elementwise product
    let prior_wide = {
        let flat = graph.reshape(prior, &[n, 1])?;
        let copies = vec![flat; c];
        graph.concat(&copies, 1)?
    };
    let key = graph.mul(v_flat, prior_wide)?;
    let key_t = graph.transpose2d(key)?;
    let logits = graph.matmul(query, key_t)?;
    let scaled = graph.scale(logits, 1.0 / (c as f64).sqrt());
    graph.softmax(scaled, 1)
}

/// Diffusion: rows of the row-stochastic matrix mix the value rows,
/// `M [n,n] x V [n,c] -> [n,c]`.
pub fn diffuse(graph: &mut Graph, affinity: TensorId, v_flat: TensorId) -> Result<TensorId> {
    graph.matmul(affinity, v_flat)
}

/// Full matching pass over stride-8 features. `prior` is the gauss map for
/// center-guided matching or `None` for the unguided (uniform-prior) variant.
/// The center enters as a non-differentiable input: the prior is a graph
/// constant.
pub fn run_matching(
    graph: &mut Graph,
    v_ref: TensorId,
    v_cur: TensorId,
    prior: Option<&GaussMap>,
) -> Result<MatchFlows> {
    let s = graph.shape(v_cur).to_vec();
    if graph.shape(v_ref) != s.as_slice() {
        return Err(F2NetError::ShapeMismatch {
            op: "run_matching",
            lhs: graph.shape(v_ref).to_vec(),
            rhs: s,
        });
    }
    if s.len() != 3 {
        return Err(F2NetError::Geometry(format!(
            "run_matching expects [h,w,c] features, got {:?}",
            s
        )));
    }
    let (h, w, c) = (s[0], s[1], s[2]);
    let n = h * w;
    let prior_id = match prior {
        Some(gauss) => {
            if gauss.values.shape[0] != h || gauss.values.shape[1] != w {
                return Err(F2NetError::ShapeMismatch {
                    op: "run_matching",
                    lhs: vec![h, w, 1],
                    rhs: gauss.values.shape.clone(),
                });
            }
            graph.constant(&[n, 1], gauss.values.data.clone())?
        }
        None => graph.constant(&[n, 1], vec![1.0; n])?,
    };
    let cur_flat = graph.reshape(v_cur, &[n, c])?;
    let ref_flat = graph.reshape(v_ref, &[n, c])?;
    let m_intra = guided_correlation(graph, cur_flat, cur_flat, prior_id)?;
    let m_inter = guided_correlation(graph, ref_flat, cur_flat, prior_id)?;
    let intra = diffuse(graph, m_intra, cur_flat)?;
    let inter = diffuse(graph, m_inter, cur_flat)?;
    Ok(MatchFlows {
        original: v_cur,
        intra: graph.reshape(intra, &[h, w, c])?,
        inter: graph.reshape(inter, &[h, w, c])?,
    })
}

#[cfg(test)]
mod tests;
