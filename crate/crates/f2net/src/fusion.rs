//! Dynamic information fusion: channel-wise and spatial-wise attention over
//! the three flows, the two-conv decoder, and the segmentation losses.

use crate::error::{F2NetError, Result};
use crate::matching::MatchFlows;
use crate::params::{conv_layer, fc_layer, BoundParams};
use crate::tensor::{Graph, Tensor, TensorId};

/// Fusion variants of the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionMode {
    /// Channel-concat the three flows and mix with a 1x1 conv.
    ConcatBaseline,
    /// Spatial attention only.
    Sa,
    /// Channel attention only.
    Ca,
    /// Spatial gates first, then channel attention.
    Sca,
    /// Channel attention first, then spatial gates (default).
    Csa,
}

impl FusionMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "concat" | "concat-baseline" | "baseline" => Ok(FusionMode::ConcatBaseline),
            "sa" => Ok(FusionMode::Sa),
            "ca" => Ok(FusionMode::Ca),
            "sca" => Ok(FusionMode::Sca),
            "csa" => Ok(FusionMode::Csa),
            other => Err(F2NetError::Config(format!("unknown fusion mode `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FusionMode::ConcatBaseline => "concat",
            FusionMode::Sa => "sa",
            FusionMode::Ca => "ca",
            FusionMode::Sca => "sca",
            FusionMode::Csa => "csa",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FusionConfig {
    pub mode: FusionMode,
    /// Bottleneck width of the guidance FC.
    pub reduction: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            mode: FusionMode::Csa,
            reduction: 8,
        }
    }
}

/// Guidance FC bottleneck width for a channel count: `max(c / 4, 8)`.
pub fn guide_width(channels: usize) -> usize {
    (channels / 4).max(8)
}

/// Segmentation head output: pre-sigmoid logits and the `(0,1)` mask, both
/// `[H, W, 1]` nodes of the building graph.
#[derive(Clone, Copy, Debug)]
pub struct MaskLogits {
    pub logits: TensorId,
    pub mask: TensorId,
}

/// Element-wise sum of the three flows.
pub fn fuse_sum(graph: &mut Graph, flows: &MatchFlows) -> Result<TensorId> {
    let s = graph.add(flows.original, flows.intra)?;
    graph.add(s, flows.inter)
}

/// Channel-wise attention: squeeze the summed flows, run the shared guidance
/// FC, emit one gate vector per flow, and normalize the gates per channel so
/// they sum to 1 across the three flows. Returns the gated flows.
pub fn channel_attention(
    graph: &mut Graph,
    bound: &BoundParams,
    flows: &MatchFlows,
) -> Result<MatchFlows> {
    let c = graph.shape(flows.original)[2];
    let summed = fuse_sum(graph, flows)?;
    let squeezed = graph.global_avg_pool(summed)?;
    let guide = fc_layer(graph, bound, "fuse.ch.guide", squeezed)?;
    let guide = graph.relu(guide);
    let z1 = fc_layer(graph, bound, "fuse.ch.z1", guide)?;
    let z2 = fc_layer(graph, bound, "fuse.ch.z2", guide)?;
    let z3 = fc_layer(graph, bound, "fuse.ch.z3", guide)?;
    let rows: Vec<TensorId> = [z1, z2, z3]
        .iter()
        .map(|&z| graph.reshape(z, &[1, c]))
        .collect::<Result<_>>()?;
    let stacked = graph.concat(&rows, 0)?;
    let gates = graph.softmax(stacked, 0)?;
    let mut gated = Vec::with_capacity(3);
    for (i, &flow) in [flows.original, flows.intra, flows.inter].iter().enumerate() {
        let row = graph.slice(gates, 0, i, i + 1)?;
        let vec = graph.reshape(row, &[1, 1, c])?;
        gated.push(graph.mul_bcast_chan(flow, vec)?);
    }
    Ok(MatchFlows {
        original: gated[0],
        intra: gated[1],
        inter: gated[2],
    })
}

/// Repeats a `[h,w,1]` map across `c` channels.
fn tile_channels(graph: &mut Graph, x: TensorId, c: usize) -> Result<TensorId> {
    let copies = vec![x; c];
    graph.concat(&copies, 2)
}

/// Spatial-wise attention gates: 1x1-conv the summed flows down to 3 channels,
/// softmax across those channels per pixel, and weight each flow by its map.
/// Returns the gated flows; their sum is the spatial-attention output.
pub fn spatial_gates(
    graph: &mut Graph,
    bound: &BoundParams,
    flows: &MatchFlows,
) -> Result<MatchFlows> {
    let c = graph.shape(flows.original)[2];
    let summed = fuse_sum(graph, flows)?;
    let squeezed = conv_layer(graph, bound, "fuse.sp", summed, 1, 0)?;
    let weights = graph.softmax(squeezed, 2)?;
    let mut gated = Vec::with_capacity(3);
    for (i, &flow) in [flows.original, flows.intra, flows.inter].iter().enumerate() {
        let alpha = graph.slice(weights, 2, i, i + 1)?;
        let wide = tile_channels(graph, alpha, c)?;
        gated.push(graph.mul(flow, wide)?);
    }
    Ok(MatchFlows {
        original: gated[0],
        intra: gated[1],
        inter: gated[2],
    })
}

/// Spatial attention output: weighted sum of the flows.
pub fn spatial_attention(
    graph: &mut Graph,
    bound: &BoundParams,
    flows: &MatchFlows,
) -> Result<TensorId> {
    let gated = spatial_gates(graph, bound, flows)?;
    fuse_sum(graph, &gated)
}

/// Fuses the three flows into one feature map according to the variant.
pub fn fuse(
    graph: &mut Graph,
    bound: &BoundParams,
    flows: &MatchFlows,
    mode: FusionMode,
) -> Result<TensorId> {
    match mode {
        FusionMode::ConcatBaseline => {
            let cat = graph.concat(&[flows.original, flows.intra, flows.inter], 2)?;
            conv_layer(graph, bound, "fuse.concat", cat, 1, 0)
        }
        FusionMode::Ca => {
            let gated = channel_attention(graph, bound, flows)?;
            fuse_sum(graph, &gated)
        }
        FusionMode::Sa => spatial_attention(graph, bound, flows),
        FusionMode::Sca => {
            let spatial = spatial_gates(graph, bound, flows)?;
            let gated = channel_attention(graph, bound, &spatial)?;
            fuse_sum(graph, &gated)
        }
        FusionMode::Csa => {
            let channel = channel_attention(graph, bound, flows)?;
            spatial_attention(graph, bound, &channel)
        }
    }
}

/// Skip-connected decoder: a 3x3 conv with ReLU on the fused stride-8
/// features, bilinear upsample x4, concat with the encoder's stride-2
/// features (the boundary detail the stride-8 grid cannot carry), a second
/// 3x3 conv with ReLU, a 1x1 conv to one channel, bilinear upsample x2 to
/// full resolution, sigmoid.
pub fn decode(
    graph: &mut Graph,
    bound: &BoundParams,
    fused: TensorId,
    skip2: TensorId,
) -> Result<MaskLogits> {
    let hidden = conv_layer(graph, bound, "dec.c1", fused, 1, 1)?;
    let hidden = graph.relu(hidden);
    let up = graph.bilinear_upsample(hidden, 4)?;
    let cat = graph.concat(&[up, skip2], 2)?;
    let fine = conv_layer(graph, bound, "dec.skip", cat, 1, 1)?;
    let fine = graph.relu(fine);
    let small = conv_layer(graph, bound, "dec.c2", fine, 1, 0)?;
    let logits = graph.bilinear_upsample(small, 2)?;
    let mask = graph.sigmoid(logits);
    Ok(MaskLogits { logits, mask })
}

/// Pixel-summed binary cross entropy between the predicted mask node and a
/// constant ground-truth mask.
pub fn bce_loss(graph: &mut Graph, mask: TensorId, target: &Tensor) -> Result<TensorId> {
    const EPS: f64 = 1e-6;
    let numel: usize = graph.shape(mask).iter().product();
    if numel != target.numel() {
        return Err(F2NetError::ShapeMismatch {
            op: "bce_loss",
            lhs: graph.shape(mask).to_vec(),
            rhs: target.shape.clone(),
        });
    }
    let shape = graph.shape(mask).to_vec();
    let t = graph.constant(&shape, target.data.clone())?;
    let one_minus_t: Vec<f64> = target.data.iter().map(|v| 1.0 - v).collect();
    let omt = graph.constant(&shape, one_minus_t)?;

    let r = graph.clamp(mask, EPS, 1.0 - EPS);
    let log_r = graph.ln(r);
    let neg_r = graph.neg(r);
    let one_minus_r = graph.add_scalar(neg_r, 1.0);
    let log_omr = graph.ln(one_minus_r);

    let pos = graph.mul(t, log_r)?;
    let neg = graph.mul(omt, log_omr)?;
    let total = graph.add(pos, neg)?;
    let summed = graph.sum_all(total);
    Ok(graph.neg(summed))
}

/// Overall loss: unweighted sum of the focal and segmentation terms.
pub fn total_loss(graph: &mut Graph, loss_f: TensorId, loss_b: TensorId) -> Result<TensorId> {
    graph.add(loss_f, loss_b)
}
