//! Forward operators and their backward rules.
//!
//! Broadcasting is restricted to the `[1,1,c]`-over-`[h,w,c]` case used by the
//! channel gates; everything else must match shapes exactly.

use super::{Graph, TensorId};
use crate::error::{F2NetError, Result};

fn prod(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl Graph {
    fn check_same_shape(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(F2NetError::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    // ---- elementwise ----

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("add", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(
            shape,
            data,
            vec![a, b],
            Box::new(|dy| vec![dy.to_vec(), dy.to_vec()]),
        ))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("sub", a, b)?;
        let data: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(
            shape,
            data,
            vec![a, b],
            Box::new(|dy| vec![dy.to_vec(), dy.iter().map(|g| -g).collect()]),
        ))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_same_shape("mul", a, b)?;
        let ad = self.data(a).to_vec();
        let bd = self.data(b).to_vec();
        let data: Vec<f64> = ad.iter().zip(&bd).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(
            shape,
            data,
            vec![a, b],
            Box::new(move |dy| {
                vec![
                    dy.iter().zip(&bd).map(|(g, y)| g * y).collect(),
                    dy.iter().zip(&ad).map(|(g, x)| g * x).collect(),
                ]
            }),
        ))
    }

    pub fn scale(&mut self, x: TensorId, c: f64) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|v| v * c).collect();
        let shape = self.shape(x).to_vec();
        self.push(
            shape,
            data,
            vec![x],
            Box::new(move |dy| vec![dy.iter().map(|g| g * c).collect()]),
        )
    }

    pub fn add_scalar(&mut self, x: TensorId, c: f64) -> TensorId {
        let data: Vec<f64> = self.data(x).iter().map(|v| v + c).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, data, vec![x], Box::new(|dy| vec![dy.to_vec()]))
    }

    pub fn neg(&mut self, x: TensorId) -> TensorId {
        self.scale(x, -1.0)
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        let data: Vec<f64> = self
            .data(x)
            .iter()
            .map(|&v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            })
            .collect();
        let y = data.clone();
        let shape = self.shape(x).to_vec();
        self.push(
            shape,
            data,
            vec![x],
            Box::new(move |dy| vec![dy.iter().zip(&y).map(|(g, s)| g * s * (1.0 - s)).collect()]),
        )
    }

    pub fn relu(&mut self, x: TensorId) -> TensorId {
        let xd = self.data(x).to_vec();
        let data: Vec<f64> = xd.iter().map(|&v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        self.push(
            shape,
            data,
            vec![x],
            Box::new(move |dy| {
                vec![dy
                    .iter()
                    .zip(&xd)
                    .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                    .collect()]
            }),
        )
    }

    pub fn ln(&mut self, x: TensorId) -> TensorId {
        let xd = self.data(x).to_vec();
        let data: Vec<f64> = xd.iter().map(|v| v.ln()).collect();
        let shape = self.shape(x).to_vec();
        self.push(
            shape,
            data,
            vec![x],
            Box::new(move |dy| vec![dy.iter().zip(&xd).map(|(g, v)| g / v).collect()]),
        )
    }

    /// Elementwise `x^p` for a constant exponent.
    pub fn pow_const(&mut self, x: TensorId, p: f64) -> TensorId {
        let xd = self.data(x).to_vec();
        let data: Vec<f64> = xd.iter().map(|v| v.powf(p)).collect();
        let shape = self.shape(x).to_vec();
        self.push(
            shape,
            data,
            vec![x],
            Box::new(move |dy| {
                vec![dy
                    .iter()
                    .zip(&xd)
                    .map(|(g, v)| g * p * v.powf(p - 1.0))
                    .collect()]
            }),
        )
    }

    /// Clamp to `[lo, hi]`; gradient passes only where the input is strictly
    /// inside the interval.
    pub fn clamp(&mut self, x: TensorId, lo: f64, hi: f64) -> TensorId {
        let xd = self.data(x).to_vec();
        let data: Vec<f64> = xd.iter().map(|v| v.clamp(lo, hi)).collect();
        let shape = self.shape(x).to_vec();
        self.push(
            shape,
            data,
            vec![x],
            Box::new(move |dy| {
                vec![dy
                    .iter()
                    .zip(&xd)
                    .map(|(g, &v)| if v > lo && v < hi { *g } else { 0.0 })
                    .collect()]
            }),
        )
    }

    // ---- linear algebra ----

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(F2NetError::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let ad = self.data(a).to_vec();
        let bd = self.data(b).to_vec();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..k {
                    acc += ad[i * k + l] * bd[l * n + j];
                }
                data[i * n + j] = acc;
            }
        }
        Ok(self.push(
            vec![m, n],
            data,
            vec![a, b],
            Box::new(move |dy| {
                let mut da = vec![0.0; m * k];
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    for l in 0..k {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += dy[i * n + j] * bd[l * n + j];
                        }
                        da[i * k + l] = acc;
                    }
                }
                for l in 0..k {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += ad[i * k + l] * dy[i * n + j];
                        }
                        db[l * n + j] = acc;
                    }
                }
                vec![da, db]
            }),
        ))
    }

    pub fn transpose2d(&mut self, x: TensorId) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            return Err(F2NetError::Geometry(format!(
                "transpose2d expects a matrix, got shape {:?}",
                s
            )));
        }
        let (m, n) = (s[0], s[1]);
        let xd = self.data(x);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = xd[i * n + j];
            }
        }
        Ok(self.push(
            vec![n, m],
            data,
            vec![x],
            Box::new(move |dy| {
                let mut dx = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        dx[i * n + j] = dy[j * m + i];
                    }
                }
                vec![dx]
            }),
        ))
    }

    /// Affine map on a `[1,1,c]` (or flat `[c]`) vector: `x W + b -> [1,1,c']`.
    pub fn fully_connected(&mut self, x: TensorId, w: TensorId, b: TensorId) -> Result<TensorId> {
        let c = prod(self.shape(x));
        let sw = self.shape(w).to_vec();
        if sw.len() != 2 || sw[0] != c {
            return Err(F2NetError::ShapeMismatch {
                op: "fully_connected",
                lhs: self.shape(x).to_vec(),
                rhs: sw,
            });
        }
        let cp = sw[1];
        if prod(self.shape(b)) != cp {
            return Err(F2NetError::ShapeMismatch {
                op: "fully_connected",
                lhs: sw,
                rhs: self.shape(b).to_vec(),
            });
        }
        let xd = self.data(x).to_vec();
        let wd = self.data(w).to_vec();
        let bd = self.data(b);
        let mut data = vec![0.0; cp];
        for j in 0..cp {
            let mut acc = bd[j];
            for i in 0..c {
                acc += xd[i] * wd[i * cp + j];
            }
            data[j] = acc;
        }
        Ok(self.push(
            vec![1, 1, cp],
            data,
            vec![x, w, b],
            Box::new(move |dy| {
                let mut dx = vec![0.0; c];
                let mut dw = vec![0.0; c * cp];
                for i in 0..c {
                    let mut acc = 0.0;
                    for j in 0..cp {
                        acc += dy[j] * wd[i * cp + j];
                        dw[i * cp + j] = xd[i] * dy[j];
                    }
                    dx[i] = acc;
                }
                vec![dx, dw, dy.to_vec()]
            }),
        ))
    }

    // ---- reductions and normalization ----

    pub fn softmax(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(F2NetError::InvalidAxis {
                op: "softmax",
                axis,
                shape,
            });
        }
        let len = shape[axis];
        let outer = prod(&shape[..axis]);
        let inner = prod(&shape[axis + 1..]);
        let xd = self.data(x);
        let mut data = vec![0.0; xd.len()];
        for o in 0..outer {
            for inn in 0..inner {
                let at = |i: usize| (o * len + i) * inner + inn;
                let mut max = f64::NEG_INFINITY;
                for i in 0..len {
                    max = max.max(xd[at(i)]);
                }
                let mut sum = 0.0;
                for i in 0..len {
                    let e = (xd[at(i)] - max).exp();
                    data[at(i)] = e;
                    sum += e;
                }
                for i in 0..len {
                    data[at(i)] /= sum;
                }
            }
        }
        let y = data.clone();
        Ok(self.push(
            shape,
            data,
            vec![x],
            Box::new(move |dy| {
                let mut dx = vec![0.0; dy.len()];
                for o in 0..outer {
                    for inn in 0..inner {
                        let at = |i: usize| (o * len + i) * inner + inn;
                        let mut dot = 0.0;
                        for i in 0..len {
                            dot += dy[at(i)] * y[at(i)];
                        }
                        for i in 0..len {
                            dx[at(i)] = y[at(i)] * (dy[at(i)] - dot);
                        }
                    }
                }
                vec![dx]
            }),
        ))
    }

    /// Sum of all elements, as a `[1]` scalar.
    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let n = self.data(x).len();
        let total: f64 = self.data(x).iter().sum();
        self.push(
            vec![1],
            vec![total],
            vec![x],
            Box::new(move |dy| vec![vec![dy[0]; n]]),
        )
    }

    /// Spatial mean per channel: `[h,w,c] -> [1,1,c]`.
    pub fn global_avg_pool(&mut self, x: TensorId) -> Result<TensorId> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(F2NetError::Geometry(format!(
                "global_avg_pool expects [h,w,c], got {:?}",
                s
            )));
        }
        let (h, w, c) = (s[0], s[1], s[2]);
        let xd = self.data(x);
        let mut data = vec![0.0; c];
        for ch in 0..c {
            let mut acc = 0.0;
            for y in 0..h {
                for xx in 0..w {
                    acc += xd[(y * w + xx) * c + ch];
                }
            }
            data[ch] = acc / (h * w) as f64;
        }
        Ok(self.push(
            vec![1, 1, c],
            data,
            vec![x],
            Box::new(move |dy| {
                let inv = 1.0 / (h * w) as f64;
                let mut dx = vec![0.0; h * w * c];
                for i in 0..h * w {
                    for ch in 0..c {
                        dx[i * c + ch] = dy[ch] * inv;
                    }
                }
                vec![dx]
            }),
        ))
    }

    // ---- broadcasting (1x1xC over HxWxC only) ----

    fn check_chan_bcast(
        &self,
        op: &'static str,
        x: TensorId,
        v: TensorId,
    ) -> Result<(usize, usize, usize)> {
        let sx = self.shape(x).to_vec();
        let sv = self.shape(v).to_vec();
        let ok = sx.len() == 3
            && (sv.as_slice() == [1, 1, sx[2]] || sv.as_slice() == [sx[2]]);
        if !ok {
            return Err(F2NetError::ShapeMismatch {
                op,
                lhs: sx,
                rhs: sv,
            });
        }
        Ok((sx[0], sx[1], sx[2]))
    }

    /// `[h,w,c] * [1,1,c]` with the vector broadcast over space.
    pub fn mul_bcast_chan(&mut self, x: TensorId, v: TensorId) -> Result<TensorId> {
        let (h, w, c) = self.check_chan_bcast("mul_bcast_chan", x, v)?;
        let xd = self.data(x).to_vec();
        let vd = self.data(v).to_vec();
        let mut data = vec![0.0; h * w * c];
        for i in 0..h * w {
            for ch in 0..c {
                data[i * c + ch] = xd[i * c + ch] * vd[ch];
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push(
            shape,
            data,
            vec![x, v],
            Box::new(move |dy| {
                let mut dx = vec![0.0; h * w * c];
                let mut dv = vec![0.0; c];
                for i in 0..h * w {
                    for ch in 0..c {
                        dx[i * c + ch] = dy[i * c + ch] * vd[ch];
                        dv[ch] += dy[i * c + ch] * xd[i * c + ch];
                    }
                }
                vec![dx, dv]
            }),
        ))
    }

    /// `[h,w,c] + [1,1,c]` channel bias.
    pub fn add_bcast_chan(&mut self, x: TensorId, v: TensorId) -> Result<TensorId> {
        let (h, w, c) = self.check_chan_bcast("add_bcast_chan", x, v)?;
        let xd = self.data(x);
        let vd = self.data(v);
        let mut data = vec![0.0; h * w * c];
        for i in 0..h * w {
            for ch in 0..c {
                data[i * c + ch] = xd[i * c + ch] + vd[ch];
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push(
            shape,
            data,
            vec![x, v],
            Box::new(move |dy| {
                let mut dv = vec![0.0; c];
                for i in 0..h * w {
                    for ch in 0..c {
                        dv[ch] += dy[i * c + ch];
                    }
                }
                vec![dy.to_vec(), dv]
            }),
        ))
    }

    // ---- structural ----

    pub fn reshape(&mut self, x: TensorId, new_shape: &[usize]) -> Result<TensorId> {
        let numel = prod(self.shape(x));
        if prod(new_shape) != numel {
            return Err(F2NetError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: new_shape.to_vec(),
            });
        }
        let data = self.data(x).to_vec();
        Ok(self.push(
            new_shape.to_vec(),
            data,
            vec![x],
            Box::new(|dy| vec![dy.to_vec()]),
        ))
    }

    pub fn concat(&mut self, xs: &[TensorId], axis: usize) -> Result<TensorId> {
        if xs.is_empty() {
            return Err(F2NetError::EmptyInput("concat of zero tensors".into()));
        }
        let base = self.shape(xs[0]).to_vec();
        if axis >= base.len() {
            return Err(F2NetError::InvalidAxis {
                op: "concat",
                axis,
                shape: base,
            });
        }
        let mut axis_lens = Vec::with_capacity(xs.len());
        for &x in xs {
            let s = self.shape(x);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(F2NetError::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            axis_lens.push(s[axis]);
        }
        let total_axis: usize = axis_lens.iter().sum();
        let mut shape = base.clone();
        shape[axis] = total_axis;
        let outer = prod(&base[..axis]);
        let inner = prod(&base[axis + 1..]);
        let mut data = vec![0.0; outer * total_axis * inner];
        let mut offset = 0;
        for (&x, &alen) in xs.iter().zip(&axis_lens) {
            let xd = self.data(x);
            for o in 0..outer {
                for i in 0..alen {
                    let src = (o * alen + i) * inner;
                    let dst = (o * total_axis + offset + i) * inner;
                    data[dst..dst + inner].copy_from_slice(&xd[src..src + inner]);
                }
            }
            offset += alen;
        }
        let lens = axis_lens.clone();
        Ok(self.push(
            shape,
            data,
            xs.to_vec(),
            Box::new(move |dy| {
                let mut out = Vec::with_capacity(lens.len());
                let mut offset = 0;
                for &alen in &lens {
                    let mut dx = vec![0.0; outer * alen * inner];
                    for o in 0..outer {
                        for i in 0..alen {
                            let dst = (o * alen + i) * inner;
                            let src = (o * total_axis + offset + i) * inner;
                            dx[dst..dst + inner].copy_from_slice(&dy[src..src + inner]);
                        }
                    }
                    out.push(dx);
                    offset += alen;
                }
                out
            }),
        ))
    }

    /// Keep `[start, end)` along `axis`.
    pub fn slice(&mut self, x: TensorId, axis: usize, start: usize, end: usize) -> Result<TensorId> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(F2NetError::InvalidAxis {
                op: "slice",
                axis,
                shape,
            });
        }
        if start >= end || end > shape[axis] {
            return Err(F2NetError::Geometry(format!(
                "slice range {}..{} invalid for axis {} of shape {:?}",
                start, end, axis, shape
            )));
        }
        let len = shape[axis];
        let keep = end - start;
        let outer = prod(&shape[..axis]);
        let inner = prod(&shape[axis + 1..]);
        let xd = self.data(x);
        let mut data = vec![0.0; outer * keep * inner];
        for o in 0..outer {
            for i in 0..keep {
                let src = (o * len + start + i) * inner;
                let dst = (o * keep + i) * inner;
                data[dst..dst + inner].copy_from_slice(&xd[src..src + inner]);
            }
        }
        let mut new_shape = shape.clone();
        new_shape[axis] = keep;
        Ok(self.push(
            new_shape,
            data,
            vec![x],
            Box::new(move |dy| {
                let mut dx = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for i in 0..keep {
                        let dst = (o * len + start + i) * inner;
                        let src = (o * keep + i) * inner;
                        dx[dst..dst + inner].copy_from_slice(&dy[src..src + inner]);
                    }
                }
                vec![dx]
            }),
        ))
    }

    // ---- spatial ----

    /// Cross-correlation over `[h,w,cin]` with kernel `[kh,kw,cin,cout]`.
    pub fn conv2d(
        &mut self,
        x: TensorId,
        kernel: TensorId,
        stride: usize,
        pad: usize,
        dilation: usize,
    ) -> Result<TensorId> {
        let sx = self.shape(x).to_vec();
        let sk = self.shape(kernel).to_vec();
        if sx.len() != 3 || sk.len() != 4 || sx[2] != sk[2] {
            return Err(F2NetError::ShapeMismatch {
                op: "conv2d",
                lhs: sx,
                rhs: sk,
            });
        }
        if stride == 0 || dilation == 0 {
            return Err(F2NetError::Geometry(
                "conv2d stride and dilation must be positive".into(),
            ));
        }
        let (h, w, cin) = (sx[0], sx[1], sx[2]);
        let (kh, kw, cout) = (sk[0], sk[1], sk[3]);
        let span_h = dilation * (kh - 1) + 1;
        let span_w = dilation * (kw - 1) + 1;
        if h + 2 * pad < span_h || w + 2 * pad < span_w {
            return Err(F2NetError::Geometry(format!(
                "conv2d produces empty output: input {}x{}, kernel {}x{}, pad {}, dilation {}",
                h, w, kh, kw, pad, dilation
            )));
        }
        let oh = (h + 2 * pad - span_h) / stride + 1;
        let ow = (w + 2 * pad - span_w) / stride + 1;
        let xd = self.data(x).to_vec();
        let kd = self.data(kernel).to_vec();
        let mut data = vec![0.0; oh * ow * cout];
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut acc = 0.0;
                    for ky in 0..kh {
                        let iy = (oy * stride + ky * dilation) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx * dilation) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let base = (iy as usize * w + ix as usize) * cin;
                            let kbase = ((ky * kw + kx) * cin) * cout + co;
                            for ci in 0..cin {
                                acc += xd[base + ci] * kd[kbase + ci * cout];
                            }
                        }
                    }
                    data[(oy * ow + ox) * cout + co] = acc;
                }
            }
        }
        Ok(self.push(
            vec![oh, ow, cout],
            data,
            vec![x, kernel],
            Box::new(move |dy| {
                let mut dx = vec![0.0; h * w * cin];
                let mut dk = vec![0.0; kh * kw * cin * cout];
                for oy in 0..oh {
                    for ox in 0..ow {
                        for co in 0..cout {
                            let g = dy[(oy * ow + ox) * cout + co];
                            if g == 0.0 {
                                continue;
                            }
                            for ky in 0..kh {
                                let iy = (oy * stride + ky * dilation) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix =
                                        (ox * stride + kx * dilation) as isize - pad as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let base = (iy as usize * w + ix as usize) * cin;
                                    let kbase = ((ky * kw + kx) * cin) * cout + co;
                                    for ci in 0..cin {
                                        dx[base + ci] += g * kd[kbase + ci * cout];
                                        dk[kbase + ci * cout] += g * xd[base + ci];
                                    }
                                }
                            }
                        }
                    }
                }
                vec![dx, dk]
            }),
        ))
    }

    /// Bilinear interpolation (align-corners false) by an integer factor.
    pub fn bilinear_upsample(&mut self, x: TensorId, factor: usize) -> Result<TensorId> {
        if !matches!(factor, 2 | 4 | 8) {
            return Err(F2NetError::Geometry(format!(
                "bilinear_upsample factor must be 2, 4, or 8, got {}",
                factor
            )));
        }
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(F2NetError::Geometry(format!(
                "bilinear_upsample expects [h,w,c], got {:?}",
                s
            )));
        }
        let (h, w, c) = (s[0], s[1], s[2]);
        let (oh, ow) = (h * factor, w * factor);
        // (lo index, hi index, hi weight) per output coordinate
        let axis_map = |out_len: usize, in_len: usize| -> Vec<(usize, usize, f64)> {
            (0..out_len)
                .map(|o| {
                    let src = (o as f64 + 0.5) / factor as f64 - 0.5;
                    let src = src.clamp(0.0, (in_len - 1) as f64);
                    let lo = src.floor() as usize;
                    let hi = (lo + 1).min(in_len - 1);
                    (lo, hi, src - lo as f64)
                })
                .collect()
        };
        let ymap = axis_map(oh, h);
        let xmap = axis_map(ow, w);
        let xd = self.data(x);
        let mut data = vec![0.0; oh * ow * c];
        for (oy, &(y0, y1, wy)) in ymap.iter().enumerate() {
            for (ox, &(x0, x1, wx)) in xmap.iter().enumerate() {
                for ch in 0..c {
                    let v00 = xd[(y0 * w + x0) * c + ch];
                    let v01 = xd[(y0 * w + x1) * c + ch];
                    let v10 = xd[(y1 * w + x0) * c + ch];
                    let v11 = xd[(y1 * w + x1) * c + ch];
                    let top = v00 * (1.0 - wx) + v01 * wx;
                    let bot = v10 * (1.0 - wx) + v11 * wx;
                    data[(oy * ow + ox) * c + ch] = top * (1.0 - wy) + bot * wy;
                }
            }
        }
        Ok(self.push(
            vec![oh, ow, c],
            data,
            vec![x],
            Box::new(move |dy| {
                let mut dx = vec![0.0; h * w * c];
                for (oy, &(y0, y1, wy)) in ymap.iter().enumerate() {
                    for (ox, &(x0, x1, wx)) in xmap.iter().enumerate() {
                        for ch in 0..c {
                            let g = dy[(oy * ow + ox) * c + ch];
                            dx[(y0 * w + x0) * c + ch] += g * (1.0 - wy) * (1.0 - wx);
                            dx[(y0 * w + x1) * c + ch] += g * (1.0 - wy) * wx;
                            dx[(y1 * w + x0) * c + ch] += g * wy * (1.0 - wx);
                            dx[(y1 * w + x1) * c + ch] += g * wy * wx;
                        }
                    }
                }
                vec![dx]
            }),
        ))
    }
}
