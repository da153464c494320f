//! Model composition and training: the toy siamese encoder, the full forward
//! pass, the alternated static/dynamic SGD procedure with its staged center
//! schedule, and sequential inference.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::center::{
    self, CenterConfig, CenterStrategy, CenterTrack, Heatmap, gaussian_grid, gt_heatmap,
};
use crate::data::SequenceSample;
use crate::error::{F2NetError, Result};
use crate::fusion::{self, FusionMode, MaskLogits, guide_width};
use crate::matching::{self, GaussMap, MatchFlows, default_sigma_match};
use crate::params::{BoundParams, ParamSet, conv_layer, insert_conv, insert_fc};
use crate::tensor::{Graph, Precision, Tensor, TensorId};

/// Which prior drives the appearance matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchingMode {
    /// No diffusion at all: every flow is the skip feature.
    Off,
    /// Unguided non-local matching (uniform prior).
    Uniform,
    /// Gauss prior from the selected center.
    CenterGuided,
}

impl MatchingMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(MatchingMode::Off),
            "uniform" | "ad" => Ok(MatchingMode::Uniform),
            "center" | "center-guided" | "cgad" => Ok(MatchingMode::CenterGuided),
            other => Err(F2NetError::Config(format!("unknown matching mode `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MatchingMode::Off => "off",
            MatchingMode::Uniform => "uniform",
            MatchingMode::CenterGuided => "center-guided",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub width: usize,
    pub height: usize,
    /// Encoder stage widths at strides 2 and 4, and the embedding width C.
    pub c2: usize,
    pub c4: usize,
    pub c_embed: usize,
    /// Channel count D of the merged quarter-resolution semantics.
    pub d_center: usize,
    /// Hidden width of the decoder's 3x3 conv.
    pub dec_mid: usize,
    pub fusion: FusionMode,
    pub matching: MatchingMode,
    pub strategy: CenterStrategy,
    pub center: CenterConfig,
    /// Matching-stride gauss radius; `None` picks `0.15 * min(w/8, h/8)`.
    pub sigma_match: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            width: 64,
            height: 64,
            c2: 8,
            c4: 16,
            c_embed: 32,
            d_center: 64,
            dec_mid: 16,
            fusion: FusionMode::Csa,
            matching: MatchingMode::CenterGuided,
            strategy: CenterStrategy::Motion,
            center: CenterConfig::default(),
            sigma_match: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width % 8 != 0 || self.height % 8 != 0 {
            return Err(F2NetError::Config(format!(
                "input {}x{} must be divisible by 8",
                self.width, self.height
            )));
        }
        if [self.c2, self.c4, self.c_embed, self.d_center, self.dec_mid]
            .iter()
            .any(|&c| c == 0)
        {
            return Err(F2NetError::Config("channel widths must be positive".into()));
        }
        self.center.validate()
    }

    pub fn grid4(&self) -> (usize, usize) {
        (self.width / 4, self.height / 4)
    }

    pub fn grid8(&self) -> (usize, usize) {
        (self.width / 8, self.height / 8)
    }

    pub fn sigma_match(&self) -> f64 {
        let (w8, h8) = self.grid8();
        self.sigma_match.unwrap_or_else(|| default_sigma_match(w8, h8))
    }

    /// SHA-256 over the canonical description; stored in checkpoints.
    pub fn digest(&self) -> [u8; 32] {
        let text = format!(
            "w={} h={} c2={} c4={} c={} d={} mid={} fusion={} matching={} strategy={} \
             k={} n={} window={} sigma_gt={} sigma_match={}",
            self.width,
            self.height,
            self.c2,
            self.c4,
            self.c_embed,
            self.d_center,
            self.dec_mid,
            self.fusion.name(),
            self.matching.name(),
            match self.strategy {
                CenterStrategy::Maximum => "maximum",
                CenterStrategy::Motion => "motion",
            },
            self.center.k,
            self.center.n,
            self.center.nms_window,
            self.center.sigma_gt,
            self.sigma_match(),
        );
        Sha256::digest(text.as_bytes()).into()
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs that feed the ground-truth center into matching before switching
    /// to the predicted one.
    pub gt_center_epochs: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Whether static iterations also apply the segmentation loss.
    pub static_loss_full: bool,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2.5e-4,
            batch_size: 4,
            epochs: 30,
            gt_center_epochs: 20,
            seed: 1,
            precision: Precision::Double,
            static_loss_full: true,
            clip_norm: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs > 0 && self.gt_center_epochs > self.epochs {
            return Err(F2NetError::Config(
                "gt_center_epochs must not exceed epochs".into(),
            ));
        }
        if self.lr <= 0.0 || self.batch_size == 0 {
            return Err(F2NetError::Config("lr and batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Freshly initialized parameters for a configuration, in checkpoint order.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamSet::new();
    insert_conv(&mut p, &mut rng, "enc.stage1", 3, 3, 3, cfg.c2);
    insert_conv(&mut p, &mut rng, "enc.stage2", 3, 3, cfg.c2, cfg.c4);
    insert_conv(&mut p, &mut rng, "enc.stage3", 3, 3, cfg.c4, cfg.c_embed);
    insert_conv(&mut p, &mut rng, "center.proj8", 1, 1, cfg.c_embed, cfg.d_center);
    insert_conv(&mut p, &mut rng, "center.proj4", 1, 1, cfg.c4, cfg.d_center);
    insert_conv(&mut p, &mut rng, "center.scale", 3, 3, cfg.d_center + 1, 1);
    insert_conv(&mut p, &mut rng, "center.bias", 3, 3, cfg.d_center + 1, 1);
    insert_conv(&mut p, &mut rng, "center.sem1", 3, 3, cfg.d_center, cfg.d_center);
    insert_conv(&mut p, &mut rng, "center.sem2", 1, 1, cfg.d_center, 1);
    insert_conv(&mut p, &mut rng, "fuse.concat", 1, 1, 3 * cfg.c_embed, cfg.c_embed);
    let guide = guide_width(cfg.c_embed);
    insert_fc(&mut p, &mut rng, "fuse.ch.guide", cfg.c_embed, guide);
    insert_fc(&mut p, &mut rng, "fuse.ch.z1", guide, cfg.c_embed);
    insert_fc(&mut p, &mut rng, "fuse.ch.z2", guide, cfg.c_embed);
    insert_fc(&mut p, &mut rng, "fuse.ch.z3", guide, cfg.c_embed);
    insert_conv(&mut p, &mut rng, "fuse.sp", 1, 1, cfg.c_embed, 3);
    insert_conv(&mut p, &mut rng, "dec.c1", 3, 3, cfg.c_embed, cfg.dec_mid);
    insert_conv(&mut p, &mut rng, "dec.skip", 3, 3, cfg.dec_mid + cfg.c2, cfg.dec_mid);
    insert_conv(&mut p, &mut rng, "dec.c2", 1, 1, cfg.dec_mid, 1);
    // foreground pixels are rare; bias the last logit towards background so
    // early training is not dominated by a flood of false positives
    p.overwrite("dec.c2.b", Tensor::new(&[1], vec![-2.0])?);
    Ok(p)
}

/// Three-stage siamese pyramid: `(level2, level4, level8)`.
pub fn toy_encoder(
    graph: &mut Graph,
    bound: &BoundParams,
    frame: TensorId,
) -> Result<(TensorId, TensorId, TensorId)> {
    let shape = graph.shape(frame).to_vec();
    if shape.len() != 3 || shape[0] % 8 != 0 || shape[1] % 8 != 0 {
        return Err(F2NetError::Geometry(format!(
            "encoder input must be [h,w,3] with h, w divisible by 8, got {:?}",
            shape
        )));
    }
    let l2 = conv_layer(graph, bound, "enc.stage1", frame, 2, 1)?;
    let l2 = graph.relu(l2);
    let l4 = conv_layer(graph, bound, "enc.stage2", l2, 2, 1)?;
    let l4 = graph.relu(l4);
    let l8 = conv_layer(graph, bound, "enc.stage3", l4, 2, 1)?;
    let l8 = graph.relu(l8);
    Ok((l2, l4, l8))
}

/// Where the matching center came from in one forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterSource {
    GroundTruth,
    Predicted,
}

pub struct ForwardOutput {
    pub heatmap: Heatmap,
    pub heatmap_id: TensorId,
    pub candidates: Vec<((usize, usize), f64)>,
    /// Quarter-resolution center the prior was built from.
    pub center: (f64, f64),
    /// The model's own selected center (quarter resolution), regardless of any
    /// override.
    pub predicted_center: (f64, f64),
    pub center_source: CenterSource,
    pub mask: MaskLogits,
}

/// Full pipeline on one frame pair. `g_prev` is the previous gauss map at
/// quarter resolution (zeros for the first frame); `override_center` forces
/// the matching prior onto a known center (the staged GT schedule).
#[allow(clippy::too_many_arguments)]
pub fn forward(
    graph: &mut Graph,
    bound: &BoundParams,
    cfg: &ModelConfig,
    i0: &Tensor,
    it: &Tensor,
    g_prev: &Tensor,
    track: &CenterTrack,
    override_center: Option<(f64, f64)>,
) -> Result<ForwardOutput> {
    let i0_id = graph.constant(&i0.shape, i0.data.clone())?;
    let it_id = graph.constant(&it.shape, it.data.clone())?;
    let (_, _, l8_ref) = toy_encoder(graph, bound, i0_id)?;
    let (l2_cur, l4_cur, l8_cur) = toy_encoder(graph, bound, it_id)?;

    let u = center::upsample_merge(graph, bound, l8_cur, l4_cur)?;
    let g_prev_id = graph.constant(&g_prev.shape, g_prev.data.clone())?;
    let g_hat = center::modulate_prior(graph, bound, u, g_prev_id)?;
    let f_t = center::semantic_heatmap(graph, bound, u)?;
    let heatmap_id = center::combine_heatmap(graph, g_hat, f_t)?;

    let heat_shape = graph.shape(heatmap_id).to_vec();
    let heatmap = Heatmap::new(Tensor::new(&heat_shape, graph.data(heatmap_id).to_vec())?)?;
    let candidates = center::topk_nms(&heatmap, cfg.center.k, cfg.center.nms_window);
    let predicted_point = if track.is_empty() {
        None
    } else {
        Some(center::motion_predict(track, cfg.center.n)?)
    };
    let ((sx, sy), _) = center::select_center(&candidates, predicted_point, cfg.strategy)?;
    let predicted_center = (sx as f64, sy as f64);
    let (center, center_source) = match override_center {
        Some(c) => (c, CenterSource::GroundTruth),
        None => (predicted_center, CenterSource::Predicted),
    };

    let flows = build_flows(graph, cfg, l8_ref, l8_cur, center)?;
    let fused = fusion::fuse(graph, bound, &flows, cfg.fusion)?;
    let mask = fusion::decode(graph, bound, fused, l2_cur)?;
    Ok(ForwardOutput {
        heatmap,
        heatmap_id,
        candidates,
        center,
        predicted_center,
        center_source,
        mask,
    })
}

fn build_flows(
    graph: &mut Graph,
    cfg: &ModelConfig,
    l8_ref: TensorId,
    l8_cur: TensorId,
    center_quarter: (f64, f64),
) -> Result<MatchFlows> {
    match cfg.matching {
        MatchingMode::Off => Ok(MatchFlows {
            original: l8_cur,
            intra: l8_cur,
            inter: l8_cur,
        }),
        MatchingMode::Uniform => matching::run_matching(graph, l8_ref, l8_cur, None),
        MatchingMode::CenterGuided => {
            let gauss = stride8_gauss(cfg, center_quarter)?;
            matching::run_matching(graph, l8_ref, l8_cur, Some(&gauss))
        }
    }
}

/// Quarter-resolution center to a stride-8 gauss prior, clamped into the grid.
pub fn stride8_gauss(cfg: &ModelConfig, center_quarter: (f64, f64)) -> Result<GaussMap> {
    let (w8, h8) = cfg.grid8();
    let cx = (center_quarter.0 / 2.0).clamp(0.0, (w8 - 1) as f64);
    let cy = (center_quarter.1 / 2.0).clamp(0.0, (h8 - 1) as f64);
    matching::gauss_map((cx, cy), (w8, h8), cfg.sigma_match(), 8)
}

/// Quarter-resolution gauss map tensor from a center, used as `G_{t-1}`.
pub fn quarter_gauss(cfg: &ModelConfig, center_quarter: (f64, f64)) -> Tensor {
    let (w4, h4) = cfg.grid4();
    let cx = center_quarter.0.clamp(0.0, (w4 - 1) as f64);
    let cy = center_quarter.1.clamp(0.0, (h4 - 1) as f64);
    Tensor::new(
        &[h4, w4, 1],
        gaussian_grid((cx, cy), w4, h4, cfg.center.sigma_gt),
    )
    .expect("gauss grid shape")
}

/// Full-resolution GT center to quarter-resolution coordinates.
pub fn to_quarter(center: (f64, f64)) -> (f64, f64) {
    (center.0 / 4.0, center.1 / 4.0)
}

pub struct StepLosses {
    pub loss_f: f64,
    pub loss_b: f64,
    pub center_source: CenterSource,
}

const FOCAL_ALPHA: f64 = 2.0;
const FOCAL_BETA: f64 = 4.0;

fn attach_losses(
    graph: &mut Graph,
    cfg: &ModelConfig,
    out: &ForwardOutput,
    gt_center_quarter: (f64, f64),
    gt_mask: &Tensor,
) -> Result<(TensorId, TensorId)> {
    let (w4, h4) = cfg.grid4();
    let cx = gt_center_quarter.0.clamp(0.0, (w4 - 1) as f64);
    let cy = gt_center_quarter.1.clamp(0.0, (h4 - 1) as f64);
    let target = gt_heatmap((cx, cy), (w4, h4), cfg.center.sigma_gt)?;
    let lf = center::focal_loss(graph, out.heatmap_id, &target, FOCAL_ALPHA, FOCAL_BETA)?;
    let lb = fusion::bce_loss(graph, out.mask.mask, gt_mask)?;
    Ok((lf, lb))
}

/// One SGD step on a static image used as both frames; the matching prior is
/// the GT-center gauss.
pub fn train_static_step(
    params: &mut ParamSet,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    frame: &Tensor,
    gt_mask: &Tensor,
    gt_center_full: (f64, f64),
) -> Result<StepLosses> {
    let center_q = to_quarter(gt_center_full);
    let (w4, h4) = cfg.grid4();
    let g_prev = Tensor::zeros(&[h4, w4, 1]);
    let mut graph = Graph::new();
    let bound = params.bind(&mut graph);
    let out = forward(
        &mut graph,
        &bound,
        cfg,
        frame,
        frame,
        &g_prev,
        &CenterTrack::default(),
        Some(center_q),
    )?;
    let (lf, lb) = attach_losses(&mut graph, cfg, &out, center_q, gt_mask)?;
    let loss_f = graph.data(lf)[0];
    let loss_b = graph.data(lb)[0];
    let objective = if tcfg.static_loss_full {
        scaled_objective(&mut graph, cfg, lf, Some(lb))?
    } else {
        scaled_objective(&mut graph, cfg, lf, None)?
    };
    graph.backward(objective)?;
    params.harvest_grads(&graph, &bound);
    if tcfg.clip_norm > 0.0 {
        params.clip_grads(tcfg.clip_norm);
    }
    params.sgd_step(tcfg.lr, tcfg.precision)?;
    Ok(StepLosses {
        loss_f,
        loss_b,
        center_source: CenterSource::GroundTruth,
    })
}

/// One SGD step on a `(frame 0, frame t)` pair of a sequence. Before
/// `gt_center_epochs` the matching prior uses the GT center of frame `t`;
/// afterwards it uses the model's own selection.
pub fn train_dynamic_step(
    params: &mut ParamSet,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    sample: &SequenceSample,
    t: usize,
    epoch: usize,
) -> Result<StepLosses> {
    if t == 0 || t >= sample.frames.len() {
        return Err(F2NetError::Config(format!(
            "dynamic step needs 1 <= t < {}, got {t}",
            sample.frames.len()
        )));
    }
    let gt_q = to_quarter(sample.centers[t]);
    let g_prev = quarter_gauss(cfg, to_quarter(sample.centers[t - 1]));
    let mut track = CenterTrack::new(cfg.center.n);
    for &c in &sample.centers[..t] {
        track.push(to_quarter(c));
    }
    let override_center = if epoch < tcfg.gt_center_epochs {
        Some(gt_q)
    } else {
        None
    };

    let mut graph = Graph::new();
    let bound = params.bind(&mut graph);
    let out = forward(
        &mut graph,
        &bound,
        cfg,
        &sample.frames[0],
        &sample.frames[t],
        &g_prev,
        &track,
        override_center,
    )?;
    let (lf, lb) = attach_losses(&mut graph, cfg, &out, gt_q, &sample.masks[t])?;
    let loss_f = graph.data(lf)[0];
    let loss_b = graph.data(lb)[0];
    let total = scaled_objective(&mut graph, cfg, lf, Some(lb))?;
    graph.backward(total)?;
    params.harvest_grads(&graph, &bound);
    if tcfg.clip_norm > 0.0 {
        params.clip_grads(tcfg.clip_norm);
    }
    params.sgd_step(tcfg.lr, tcfg.precision)?;
    Ok(StepLosses {
        loss_f,
        loss_b,
        center_source: out.center_source,
    })
}

/// Optimization objective: the two loss sums normalized by their pixel
/// counts, so gradient scale is independent of resolution and the two terms
/// carry comparable weight. The logged losses stay raw sums.
fn scaled_objective(
    graph: &mut Graph,
    cfg: &ModelConfig,
    lf: TensorId,
    lb: Option<TensorId>,
) -> Result<TensorId> {
    let (w4, h4) = cfg.grid4();
    let lf_mean = graph.scale(lf, 1.0 / (w4 * h4) as f64);
    match lb {
        None => Ok(lf_mean),
        Some(lb) => {
            let lb_mean = graph.scale(lb, 1.0 / (cfg.width * cfg.height) as f64);
            graph.add(lf_mean, lb_mean)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean losses of the static-image iterations.
    pub static_f: f64,
    pub static_b: f64,
    /// Mean losses of the dynamic-video iterations.
    pub dynamic_f: f64,
    pub dynamic_b: f64,
    pub val_j: f64,
}

impl EpochLog {
    /// Mean focal loss across both phases.
    pub fn loss_f(&self) -> f64 {
        (self.static_f + self.dynamic_f) / 2.0
    }

    /// Mean segmentation loss across both phases.
    pub fn loss_b(&self) -> f64 {
        (self.static_b + self.dynamic_b) / 2.0
    }
}

/// Per-epoch RNG stream; a fixed function of seed and epoch so resumed runs
/// replay the identical sample order.
fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )
}

/// Alternated training over the video suite. The static dataset is derived
/// from each sequence's first frame. `on_epoch` runs after every epoch (for
/// checkpointing and logs); `start_epoch > 0` resumes mid-run.
pub fn train(
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    params: &mut ParamSet,
    videos: &[SequenceSample],
    start_epoch: usize,
    mut on_epoch: impl FnMut(&EpochLog, &ParamSet) -> Result<()>,
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    tcfg.validate()?;
    if videos.is_empty() {
        return Err(F2NetError::EmptyInput("train on no sequences".into()));
    }
    let mut logs = Vec::new();
    for epoch in start_epoch..tcfg.epochs {
        let mut rng = epoch_rng(tcfg.seed, epoch);
        let mut stat = (0.0, 0.0, 0usize);
        let mut dyna = (0.0, 0.0, 0usize);
        for sample in videos {
            let s = train_static_step(
                params,
                cfg,
                tcfg,
                &sample.frames[0],
                &sample.masks[0],
                sample.centers[0],
            )?;
            stat = (stat.0 + s.loss_f, stat.1 + s.loss_b, stat.2 + 1);
            if sample.frames.len() > 1 {
                let t = rng.gen_range(1..sample.frames.len());
                let d = train_dynamic_step(params, cfg, tcfg, sample, t, epoch)?;
                dyna = (dyna.0 + d.loss_f, dyna.1 + d.loss_b, dyna.2 + 1);
            }
        }
        let val_j = validate_j(cfg, params, videos)?;
        let mean = |(f, b, n): (f64, f64, usize)| {
            if n == 0 { (0.0, 0.0) } else { (f / n as f64, b / n as f64) }
        };
        let (static_f, static_b) = mean(stat);
        let (dynamic_f, dynamic_b) = mean(dyna);
        let log = EpochLog {
            epoch,
            static_f,
            static_b,
            dynamic_f,
            dynamic_b,
            val_j,
        };
        on_epoch(&log, params)?;
        logs.push(log);
    }
    Ok(logs)
}

/// Quick validation: mean J over the last frame of every sequence, predicted
/// end-to-end (GT gauss only as the frame t-1 prior).
pub fn validate_j(
    cfg: &ModelConfig,
    params: &ParamSet,
    videos: &[SequenceSample],
) -> Result<f64> {
    let mut total = 0.0;
    for sample in videos {
        let t = sample.frames.len() - 1;
        let g_prev = if t == 0 {
            let (w4, h4) = cfg.grid4();
            Tensor::zeros(&[h4, w4, 1])
        } else {
            quarter_gauss(cfg, to_quarter(sample.centers[t - 1]))
        };
        let mut track = CenterTrack::new(cfg.center.n);
        for &c in &sample.centers[..t] {
            track.push(to_quarter(c));
        }
        let mut graph = Graph::new();
        let bound = params.bind(&mut graph);
        let out = forward(
            &mut graph,
            &bound,
            cfg,
            &sample.frames[0],
            &sample.frames[t],
            &g_prev,
            &track,
            None,
        )?;
        let mask = mask_tensor(&graph, &out);
        total += crate::metrics::region_similarity(&mask, &sample.masks[t])?;
    }
    Ok(total / videos.len() as f64)
}

fn mask_tensor(graph: &Graph, out: &ForwardOutput) -> Tensor {
    let shape = graph.shape(out.mask.mask).to_vec();
    Tensor::new(&shape, graph.data(out.mask.mask).to_vec()).expect("mask shape")
}

pub struct FrameOutput {
    /// Soft mask probabilities `[h,w,1]`.
    pub mask: Tensor,
    pub heatmap: Heatmap,
    /// Selected center, quarter resolution.
    pub center: (f64, f64),
}

/// Sequential inference over a full sequence. Frame 0 pairs with itself; every
/// later frame pairs with frame 0, carrying the previous predicted center as
/// both the gauss-map prior and the motion-track entry.
pub fn infer_sequence(
    cfg: &ModelConfig,
    params: &ParamSet,
    frames: &[Tensor],
) -> Result<Vec<FrameOutput>> {
    if frames.is_empty() {
        return Err(F2NetError::EmptyInput("infer on no frames".into()));
    }
    let (w4, h4) = cfg.grid4();
    let mut track = CenterTrack::new(cfg.center.n);
    let mut g_prev = Tensor::zeros(&[h4, w4, 1]);
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let mut graph = Graph::new();
        let bound = params.bind(&mut graph);
        let fwd = forward(
            &mut graph,
            &bound,
            cfg,
            &frames[0],
            frame,
            &g_prev,
            &track,
            None,
        )?;
        let mask = mask_tensor(&graph, &fwd);
        track.push(fwd.predicted_center);
        g_prev = quarter_gauss(cfg, fwd.predicted_center);
        out.push(FrameOutput {
            mask,
            heatmap: fwd.heatmap,
            center: fwd.predicted_center,
        });
    }
    Ok(out)
}

/// Binarizes a soft mask at 0.5.
pub fn binarize(mask: &Tensor) -> Tensor {
    Tensor::new(
        &mask.shape,
        mask.data.iter().map(|&v| f64::from(v > 0.5)).collect(),
    )
    .expect("same shape")
}
