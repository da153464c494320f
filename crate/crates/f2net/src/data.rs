//! Synthetic video generation: a textured moving ellipse over a structured
//! background, with look-alike, occlusion, and appearance-change scenarios.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::error::{F2NetError, Result};
use crate::imageio;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Plain,
    Similarity,
    Occlusion,
    AppearanceChange,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(Scenario::Plain),
            "similarity" => Ok(Scenario::Similarity),
            "occlusion" => Ok(Scenario::Occlusion),
            "appearance-change" | "appearance" => Ok(Scenario::AppearanceChange),
            other => Err(F2NetError::Config(format!("unknown scenario `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Plain => "plain",
            Scenario::Similarity => "similarity",
            Scenario::Occlusion => "occlusion",
            Scenario::AppearanceChange => "appearance-change",
        }
    }

    pub const ALL: [Scenario; 4] = [
        Scenario::Plain,
        Scenario::Similarity,
        Scenario::Occlusion,
        Scenario::AppearanceChange,
    ];
}

#[derive(Clone, Debug)]
pub struct DataConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub count: usize,
    pub scenarios: Vec<Scenario>,
    /// 0 freezes the object in place; 1 is the normal travel range.
    pub motion_scale: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            width: 64,
            height: 64,
            frames: 12,
            count: 8,
            scenarios: Scenario::ALL.to_vec(),
            motion_scale: 1.0,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(F2NetError::Config(
                "synthetic frames must be at least 16x16".into(),
            ));
        }
        if self.frames == 0 || self.count == 0 || self.scenarios.is_empty() {
            return Err(F2NetError::Config(
                "frame, sequence, and scenario counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One synthetic video with ground truth.
#[derive(Clone, Debug)]
pub struct SequenceSample {
    pub name: String,
    pub scenario: Scenario,
    pub seed: u64,
    /// `[h,w,3]` frames with values in `[0,1]`.
    pub frames: Vec<Tensor>,
    /// `[h,w,1]` binary masks; never empty.
    pub masks: Vec<Tensor>,
    /// Centroid of each mask, full-resolution `(x, y)` pixels.
    pub centers: Vec<(f64, f64)>,
}

struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f64 - self.cx) / self.rx;
        let dy = (y as f64 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Centroid of the 1-pixels of a `[h,w,1]` mask.
pub fn mask_centroid(mask: &Tensor) -> Result<(f64, f64)> {
    let (h, w) = (mask.shape[0], mask.shape[1]);
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            if mask.data[y * w + x] > 0.5 {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(F2NetError::EmptyInput("centroid of empty mask".into()));
    }
    Ok((sx / n as f64, sy / n as f64))
}

/// Generates one sequence deterministically from its seed.
pub fn gen_sequence(
    scenario: Scenario,
    config: &DataConfig,
    seed: u64,
    name: &str,
) -> Result<SequenceSample> {
    config.validate()?;
    let (w, h, n) = (config.width, config.height, config.frames);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let rx = rng.gen_range(w as f64 / 8.0..w as f64 / 5.0);
    let ry = rng.gen_range(h as f64 / 8.0..h as f64 / 5.0);
    let margin_x = rx + 1.0;
    let margin_y = ry + 1.0;
    let start = (
        rng.gen_range(margin_x..w as f64 - margin_x),
        rng.gen_range(margin_y..h as f64 - margin_y),
    );
    let end_raw = (
        rng.gen_range(margin_x..w as f64 - margin_x),
        rng.gen_range(margin_y..h as f64 - margin_y),
    );
    let end = (
        lerp(start.0, end_raw.0, config.motion_scale),
        lerp(start.1, end_raw.1, config.motion_scale),
    );

    let color_a = [
        rng.gen_range(0.5..0.95),
        rng.gen_range(0.5..0.95),
        rng.gen_range(0.5..0.95),
    ];
    let color_b = [
        rng.gen_range(0.5..0.95),
        rng.gen_range(0.5..0.95),
        rng.gen_range(0.5..0.95),
    ];
    let stripe_freq = rng.gen_range(0.35..0.8);
    let fg_orient = if rng.gen::<bool>() { 1.0 } else { -1.0 };

    // Distractor for the similarity scenario: the exact mirror of the object
    // (same colors, shape, and stripe frequency; flipped stripe orientation).
    // Because the object's own orientation is random per sequence, no fixed
    // per-pixel appearance rule can tell the two apart on unseen sequences;
    // only the spatial prior carried by the center track resolves which blob
    // is the foreground.
    let d_orient = -fg_orient;
    let d_start = (
        rng.gen_range(margin_x..w as f64 - margin_x),
        rng.gen_range(margin_y..h as f64 - margin_y),
    );
    let d_end = (
        rng.gen_range(margin_x..w as f64 - margin_x),
        rng.gen_range(margin_y..h as f64 - margin_y),
    );

    // occluder: a vertical bar sweeping the full width
    let bar_w = (w / 20).max(2);
    let bar_dir: bool = rng.gen();

    // static background: smooth waves plus frozen per-pixel grain
    let grain: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-0.04..0.04)).collect();
    let bg_phase = rng.gen_range(0.0..std::f64::consts::TAU);

    let mut frames = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(n);
    for t in 0..n {
        let tt = if n == 1 { 0.0 } else { t as f64 / (n - 1) as f64 };
        let fg = Ellipse {
            cx: lerp(start.0, end.0, tt),
            cy: lerp(start.1, end.1, tt),
            rx,
            ry,
        };
        let distractor = Ellipse {
            cx: lerp(d_start.0, d_end.0, tt),
            cy: lerp(d_start.1, d_end.1, tt),
            rx,
            ry,
        };
        let color = if scenario == Scenario::AppearanceChange {
            [
                lerp(color_a[0], color_b[0], tt),
                lerp(color_a[1], color_b[1], tt),
                lerp(color_a[2], color_b[2], tt),
            ]
        } else {
            color_a
        };
        let bar_x0 = if scenario == Scenario::Occlusion {
            let travel = (w - bar_w) as f64;
            let pos = if bar_dir { tt } else { 1.0 - tt };
            Some((travel * pos).round() as usize)
        } else {
            None
        };

        let mut frame = vec![0.0; w * h * 3];
        let mut mask = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let base = 0.25
                    + 0.08 * ((x as f64 * 0.21 + bg_phase).sin() + (y as f64 * 0.17).cos())
                    + grain[y * w + x];
                let mut px = [base, base * 0.9, base * 1.1];

                if scenario == Scenario::Similarity && distractor.contains(x, y) {
                    px = textured(color_a, &distractor, x, y, stripe_freq, d_orient);
                }
                let in_fg = fg.contains(x, y);
                if in_fg {
                    px = textured(color, &fg, x, y, stripe_freq, fg_orient);
                }
                let in_bar = bar_x0.map(|b| x >= b && x < b + bar_w).unwrap_or(false);
                if in_bar {
                    px = [0.08, 0.08, 0.1];
                }
                if in_fg && !in_bar {
                    mask[y * w + x] = 1.0;
                }
                for c in 0..3 {
                    frame[(y * w + x) * 3 + c] = px[c].clamp(0.0, 1.0);
                }
            }
        }
        let mask = Tensor::new(&[h, w, 1], mask)?;
        let center = mask_centroid(&mask).map_err(|_| {
            F2NetError::Geometry(format!("{name}: object fully occluded at frame {t}"))
        })?;
        frames.push(Tensor::new(&[h, w, 3], frame)?);
        masks.push(mask);
        centers.push(center);
    }
    Ok(SequenceSample {
        name: name.to_string(),
        scenario,
        seed,
        frames,
        masks,
        centers,
    })
}

fn textured(color: [f64; 3], e: &Ellipse, x: usize, y: usize, freq: f64, orient: f64) -> [f64; 3] {
    // stripes anchored to the ellipse so the texture travels with the object
    let u = x as f64 - e.cx;
    let v = y as f64 - e.cy;
    let s = 0.75 + 0.25 * ((u + orient * v) * freq).sin();
    [color[0] * s, color[1] * s, color[2] * s]
}

/// The full deterministic suite: `count` sequences cycling over the configured
/// scenarios.
pub fn gen_synthetic(config: &DataConfig, seed: u64) -> Result<Vec<SequenceSample>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let scenario = config.scenarios[i % config.scenarios.len()];
        let seq_seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(i as u64);
        let name = format!("{}-{:03}", scenario.name(), i);
        out.push(gen_sequence(scenario, config, seq_seed, &name)?);
    }
    Ok(out)
}

/// Writes the samples in the DAVIS-style layout.
pub fn write_dataset(root: &Path, samples: &[SequenceSample]) -> Result<()> {
    for sample in samples {
        let fdir = root.join("frames").join(&sample.name);
        let mdir = root.join("masks").join(&sample.name);
        std::fs::create_dir_all(&fdir)?;
        std::fs::create_dir_all(&mdir)?;
        for (i, (frame, mask)) in sample.frames.iter().zip(&sample.masks).enumerate() {
            imageio::write_frame(&imageio::frame_path(root, &sample.name, i), frame)?;
            imageio::write_mask(&imageio::mask_path(root, &sample.name, i), mask)?;
        }
    }
    Ok(())
}

/// Reads a dataset back; centers are recomputed as mask centroids.
pub fn load_dataset(root: &Path) -> Result<Vec<SequenceSample>> {
    let names = imageio::list_sequences(root, "frames")?;
    if names.is_empty() {
        return Err(F2NetError::EmptyInput(format!(
            "no sequences under {}",
            root.display()
        )));
    }
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let frame_paths = imageio::list_pngs(&root.join("frames").join(&name))?;
        let mask_paths = imageio::list_pngs(&root.join("masks").join(&name))?;
        if frame_paths.is_empty() || frame_paths.len() != mask_paths.len() {
            return Err(F2NetError::Format(format!(
                "sequence `{name}`: {} frames vs {} masks",
                frame_paths.len(),
                mask_paths.len()
            )));
        }
        let frames = frame_paths
            .iter()
            .map(|p| imageio::read_frame(p))
            .collect::<Result<Vec<_>>>()?;
        let masks = mask_paths
            .iter()
            .map(|p| imageio::read_mask(p))
            .collect::<Result<Vec<_>>>()?;
        let centers = masks
            .iter()
            .map(mask_centroid)
            .collect::<Result<Vec<_>>>()?;
        out.push(SequenceSample {
            name,
            scenario: Scenario::Plain,
            seed: 0,
            frames,
            masks,
            centers,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
