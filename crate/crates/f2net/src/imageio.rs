//! PNG I/O for frames, binary masks, and heatmaps, plus the DAVIS-style
//! `frames/SEQ/%05d.png`, `masks/SEQ/%05d.png` directory layout.

use image::{GrayImage, RgbImage};
use std::path::{Path, PathBuf};

use crate::center::Heatmap;
use crate::error::{F2NetError, Result};
use crate::tensor::Tensor;

/// Binary mask `[h,w,1]` (or `[h,w]`) to an 8-bit 0/255 grayscale PNG.
pub fn write_mask(path: &Path, mask: &Tensor) -> Result<()> {
    let (h, w) = plane_dims(mask)?;
    let mut img = GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let v = if mask.data[y * w + x] > 0.5 { 255 } else { 0 };
            img.put_pixel(x as u32, y as u32, image::Luma([v]));
        }
    }
    img.save(path)?;
    Ok(())
}

/// Reads a mask PNG back to a `[h,w,1]` tensor of 0/1 values.
pub fn read_mask(path: &Path) -> Result<Tensor> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| if p.0[0] > 127 { 1.0 } else { 0.0 })
        .collect();
    Tensor::new(&[h, w, 1], data)
}

/// Heatmap values in `[0,1]` to 8-bit grayscale with linear scaling.
pub fn write_heatmap_png(path: &Path, heatmap: &Heatmap) -> Result<()> {
    let (h, w) = (heatmap.height(), heatmap.width());
    let mut img = GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let v = (heatmap.at(x, y) * 255.0).round().clamp(0.0, 255.0) as u8;
            img.put_pixel(x as u32, y as u32, image::Luma([v]));
        }
    }
    img.save(path)?;
    Ok(())
}

/// RGB frame `[h,w,3]` with values in `[0,1]` to a 24-bit PNG.
pub fn write_frame(path: &Path, frame: &Tensor) -> Result<()> {
    if frame.shape.len() != 3 || frame.shape[2] != 3 {
        return Err(F2NetError::Geometry(format!(
            "frame expects [h,w,3], got {:?}",
            frame.shape
        )));
    }
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let mut img = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = |c: usize| {
                (frame.data[(y * w + x) * 3 + c] * 255.0)
                    .round()
                    .clamp(0.0, 255.0) as u8
            };
            img.put_pixel(x as u32, y as u32, image::Rgb([px(0), px(1), px(2)]));
        }
    }
    img.save(path)?;
    Ok(())
}

/// Reads an RGB PNG into `[h,w,3]` with values in `[0,1]`.
pub fn read_frame(path: &Path) -> Result<Tensor> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = Vec::with_capacity(h * w * 3);
    for p in img.pixels() {
        for c in 0..3 {
            data.push(p.0[c] as f64 / 255.0);
        }
    }
    Tensor::new(&[h, w, 3], data)
}

/// Heatmap overlaid on a frame: heat shown in the red channel.
pub fn write_overlay(path: &Path, frame: &Tensor, heat_full: &Tensor) -> Result<()> {
    if frame.shape.len() != 3 || frame.shape[2] != 3 {
        return Err(F2NetError::Geometry(format!(
            "overlay expects an [h,w,3] frame, got {:?}",
            frame.shape
        )));
    }
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let (hh, hw) = plane_dims(heat_full)?;
    if (hh, hw) != (h, w) {
        return Err(F2NetError::ShapeMismatch {
            op: "write_overlay",
            lhs: frame.shape.clone(),
            rhs: heat_full.shape.clone(),
        });
    }
    let mut img = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let heat = heat_full.data[y * w + x].clamp(0.0, 1.0);
            let mix = |c: usize, target: f64| {
                let base = frame.data[(y * w + x) * 3 + c];
                ((base * (1.0 - heat) + target * heat) * 255.0).round() as u8
            };
            img.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([mix(0, 1.0), mix(1, 0.0), mix(2, 0.0)]),
            );
        }
    }
    img.save(path)?;
    Ok(())
}

fn plane_dims(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape.as_slice() {
        [h, w] => Ok((*h, *w)),
        [h, w, 1] => Ok((*h, *w)),
        other => Err(F2NetError::Geometry(format!(
            "expected a single-channel map, got {:?}",
            other
        ))),
    }
}

/// `root/frames/SEQ/00042.png`.
pub fn frame_path(root: &Path, seq: &str, index: usize) -> PathBuf {
    root.join("frames").join(seq).join(format!("{index:05}.png"))
}

/// `root/masks/SEQ/00042.png`.
pub fn mask_path(root: &Path, seq: &str, index: usize) -> PathBuf {
    root.join("masks").join(seq).join(format!("{index:05}.png"))
}

/// Sorted sequence names under `root/<kind>`.
pub fn list_sequences(root: &Path, kind: &str) -> Result<Vec<String>> {
    let dir = root.join(kind);
    let mut names = Vec::new();
    for entry in std::fs::read_dir(&dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Sorted PNG paths of one sequence directory.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().map(|e| e == "png").unwrap_or(false) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}
