use super::*;
use crate::error::F2NetError;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape, data).unwrap()
}

#[test]
fn matmul_identity_left() {
    let mut g = Graph::new();
    let id = g
        .constant(&[2, 2], vec![1.0, 0.0, 0.0, 1.0])
        .unwrap();
    let b = g.constant(&[2, 2], vec![3.0, -1.0, 2.0, 5.0]).unwrap();
    let y = g.matmul(id, b).unwrap();
    assert_eq!(g.data(y), g.data(b));
}

#[test]
fn matmul_hand_arithmetic() {
    let mut g = Graph::new();
    let a = g.constant(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = g.constant(&[2, 1], vec![1.0, 1.0]).unwrap();
    let y = g.matmul(a, b).unwrap();
    assert_eq!(g.data(y), &[3.0, 7.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(&[2, 3], vec![0.0; 6]).unwrap();
    let b = g.constant(&[2, 2], vec![0.0; 4]).unwrap();
    let err = g.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
}

#[test]
fn matmul_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = rand_tensor(&mut rng, &[3, 4]);
    let b = rand_tensor(&mut rng, &[4, 2]);
    let err = grad_check(
        |g, ids| {
            let y = g.matmul(ids[0], ids[1])?;
            Ok(g.sum_all(y))
        },
        &[a, b],
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-6, "max rel err {err}");
}

#[test]
fn softmax_all_equal_is_uniform() {
    let mut g = Graph::new();
    let x = g.constant(&[4], vec![2.0; 4]).unwrap();
    let y = g.softmax(x, 0).unwrap();
    for &v in g.data(y) {
        assert!((v - 0.25).abs() < 1e-12);
    }
}

#[test]
fn softmax_closed_form() {
    let mut g = Graph::new();
    let x = g.constant(&[2], vec![0.0, 3.0_f64.ln()]).unwrap();
    let y = g.softmax(x, 0).unwrap();
    assert!((g.data(y)[0] - 0.25).abs() < 1e-12);
    assert!((g.data(y)[1] - 0.75).abs() < 1e-12);
}

#[test]
fn softmax_rows_sum_to_one_and_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x = rand_tensor(&mut rng, &[4, 5]);
        let mut shifted = x.clone();
        for row in 0..4 {
            for col in 0..5 {
                shifted.data[row * 5 + col] += 10.0;
            }
        }
        let mut g = Graph::new();
        let a = g.leaf(&x);
        let b = g.leaf(&shifted);
        let ya = g.softmax(a, 1).unwrap();
        let yb = g.softmax(b, 1).unwrap();
        for row in 0..4 {
            let sum: f64 = g.data(ya)[row * 5..(row + 1) * 5].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        for (va, vb) in g.data(ya).iter().zip(g.data(yb)) {
            assert!((va - vb).abs() < 1e-9);
        }
    }
}

#[test]
fn softmax_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = rand_tensor(&mut rng, &[5]);
    let w = rand_tensor(&mut rng, &[5]);
    let err = grad_check1(
        |g, x| {
            let y = g.softmax(x, 0)?;
            let wid = g.leaf(&w);
            let p = g.mul(y, wid)?;
            Ok(g.sum_all(p))
        },
        &x,
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-6, "max rel err {err}");
}

/// Independent nested-loop cross-correlation reference.
fn conv2d_reference(
    x: &Tensor,
    k: &Tensor,
    stride: usize,
    pad: usize,
    dilation: usize,
) -> Tensor {
    let (h, w, cin) = (x.shape[0], x.shape[1], x.shape[2]);
    let (kh, kw, cout) = (k.shape[0], k.shape[1], k.shape[3]);
    let oh = (h + 2 * pad - dilation * (kh - 1) - 1) / stride + 1;
    let ow = (w + 2 * pad - dilation * (kw - 1) - 1) / stride + 1;
    let mut out = vec![0.0; oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            for co in 0..cout {
                let mut acc = 0.0;
                for ky in 0..kh {
                    for kx in 0..kw {
                        for ci in 0..cin {
                            let iy = (oy * stride + ky * dilation) as isize - pad as isize;
                            let ix = (ox * stride + kx * dilation) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += x.data[(iy as usize * w + ix as usize) * cin + ci]
                                * k.data[((ky * kw + kx) * cin + ci) * cout + co];
                        }
                    }
                }
                out[(oy * ow + ox) * cout + co] = acc;
            }
        }
    }
    Tensor::new(&[oh, ow, cout], out).unwrap()
}

#[test]
fn conv2d_one_by_one_is_channel_mix() {
    // 1x1 kernel acting as the identity mix leaves the input unchanged
    let mut g = Graph::new();
    let x = g
        .constant(&[2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
        .unwrap();
    let k = g.constant(&[1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let y = g.conv2d(x, k, 1, 0, 1).unwrap();
    assert_eq!(g.data(y), g.data(x));
}

#[test]
fn conv2d_ones_kernel_hand_count() {
    let mut g = Graph::new();
    let x = g.constant(&[3, 3, 1], vec![1.0; 9]).unwrap();
    let k = g.constant(&[3, 3, 1, 1], vec![1.0; 9]).unwrap();
    let y = g.conv2d(x, k, 1, 1, 1).unwrap();
    assert_eq!(g.shape(y), &[3, 3, 1]);
    assert_eq!(g.data(y)[4], 9.0); // center
    assert_eq!(g.data(y)[0], 4.0); // corner
}

#[test]
fn conv2d_matches_reference_and_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = rand_tensor(&mut rng, &[5, 5, 2]);
    let k = rand_tensor(&mut rng, &[3, 3, 2, 3]);
    for &(stride, pad, dilation) in &[(1usize, 0usize, 1usize), (1, 1, 1), (2, 1, 1), (1, 2, 2)] {
        let mut g = Graph::new();
        let xi = g.leaf(&x);
        let ki = g.leaf(&k);
        let y = g.conv2d(xi, ki, stride, pad, dilation).unwrap();
        let reference = conv2d_reference(&x, &k, stride, pad, dilation);
        assert_eq!(g.shape(y), reference.shape.as_slice());
        for (a, b) in g.data(y).iter().zip(&reference.data) {
            assert_eq!(a, b, "exact match expected for s={stride} p={pad} d={dilation}");
        }
    }
    let err = grad_check(
        |g, ids| {
            let y = g.conv2d(ids[0], ids[1], 1, 1, 1)?;
            Ok(g.sum_all(y))
        },
        &[x, k],
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-6, "max rel err {err}");
}

#[test]
fn conv2d_empty_output_is_geometry_error() {
    let mut g = Graph::new();
    let x = g.constant(&[2, 2, 1], vec![0.0; 4]).unwrap();
    let k = g.constant(&[5, 5, 1, 1], vec![0.0; 25]).unwrap();
    assert!(g.conv2d(x, k, 1, 0, 1).is_err());
}

#[test]
fn sigmoid_of_zero_is_half() {
    let mut g = Graph::new();
    let x = g.constant(&[1], vec![0.0]).unwrap();
    let y = g.sigmoid(x);
    assert_eq!(g.data(y), &[0.5]);
}

#[test]
fn mul_by_ones_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = rand_tensor(&mut rng, &[3, 3]);
    let mut g = Graph::new();
    let ai = g.leaf(&a);
    let ones = g.constant(&[3, 3], vec![1.0; 9]).unwrap();
    let y = g.mul(ai, ones).unwrap();
    assert_eq!(g.data(y), a.data.as_slice());
}

#[test]
fn concat_channel_shapes() {
    let mut g = Graph::new();
    let a = g.constant(&[2, 2, 3], vec![0.0; 12]).unwrap();
    let b = g.constant(&[2, 2, 2], vec![1.0; 8]).unwrap();
    let y = g.concat(&[a, b], 2).unwrap();
    assert_eq!(g.shape(y), &[2, 2, 5]);
    // channels interleave per pixel: first 3 from a, last 2 from b
    assert_eq!(&g.data(y)[..5], &[0.0, 0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn concat_slice_round_trip_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = rand_tensor(&mut rng, &[2, 3, 2]);
    let b = rand_tensor(&mut rng, &[2, 3, 4]);
    let err = grad_check(
        |g, ids| {
            let y = g.concat(&[ids[0], ids[1]], 2)?;
            let s = g.slice(y, 2, 1, 5)?;
            let sq = g.mul(s, s)?;
            Ok(g.sum_all(sq))
        },
        &[a, b],
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-6, "max rel err {err}");
}

#[test]
fn global_avg_pool_constant_and_hand_value() {
    let mut g = Graph::new();
    let x = g.constant(&[2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = g.global_avg_pool(x).unwrap();
    assert_eq!(g.shape(y), &[1, 1, 1]);
    assert_eq!(g.data(y), &[2.5]);

    let c = g.constant(&[3, 4, 2], vec![7.0; 24]).unwrap();
    let yc = g.global_avg_pool(c).unwrap();
    assert_eq!(g.data(yc), &[7.0, 7.0]);
}

#[test]
fn global_avg_pool_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = rand_tensor(&mut rng, &[3, 4, 2]);
    let w = rand_tensor(&mut rng, &[1, 1, 2]);
    let err = grad_check1(
        |g, x| {
            let y = g.global_avg_pool(x)?;
            let wid = g.leaf(&w);
            let p = g.mul(y, wid)?;
            Ok(g.sum_all(p))
        },
        &x,
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-6, "max rel err {err}");
}

#[test]
fn fully_connected_identity_and_zero() {
    let mut g = Graph::new();
    let x = g.constant(&[1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    let eye = g
        .constant(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        .unwrap();
    let zero_b = g.constant(&[3], vec![0.0; 3]).unwrap();
    let y = g.fully_connected(x, eye, zero_b).unwrap();
    assert_eq!(g.data(y), &[1.0, 2.0, 3.0]);

    let zero_w = g.constant(&[3, 2], vec![0.0; 6]).unwrap();
    let b = g.constant(&[2], vec![4.0, 5.0]).unwrap();
    let y2 = g.fully_connected(x, zero_w, b).unwrap();
    assert_eq!(g.data(y2), &[4.0, 5.0]);
}

#[test]
fn fully_connected_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = rand_tensor(&mut rng, &[1, 1, 4]);
    let w = rand_tensor(&mut rng, &[4, 3]);
    let b = rand_tensor(&mut rng, &[3]);
    let err = grad_check(
        |g, ids| {
            let y = g.fully_connected(ids[0], ids[1], ids[2])?;
            let sq = g.mul(y, y)?;
            Ok(g.sum_all(sq))
        },
        &[x, w, b],
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-6, "max rel err {err}");
}

/// Scalar bilinear reference for one channel.
fn bilinear_reference(input: &[f64], h: usize, w: usize, factor: usize) -> Vec<f64> {
    let (oh, ow) = (h * factor, w * factor);
    let mut out = vec![0.0; oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            let sy = ((oy as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (h - 1) as f64);
            let sx = ((ox as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (w - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (wy, wx) = (sy - y0 as f64, sx - x0 as f64);
            out[oy * ow + ox] = input[y0 * w + x0] * (1.0 - wy) * (1.0 - wx)
                + input[y0 * w + x1] * (1.0 - wy) * wx
                + input[y1 * w + x0] * wy * (1.0 - wx)
                + input[y1 * w + x1] * wy * wx;
        }
    }
    out
}

#[test]
fn bilinear_constant_stays_constant() {
    let mut g = Graph::new();
    let x = g.constant(&[3, 3, 2], vec![0.7; 18]).unwrap();
    let y = g.bilinear_upsample(x, 4).unwrap();
    assert_eq!(g.shape(y), &[12, 12, 2]);
    for &v in g.data(y) {
        assert!((v - 0.7).abs() < 1e-12);
    }
}

#[test]
fn bilinear_one_pixel_replicates() {
    let mut g = Graph::new();
    let x = g.constant(&[1, 1, 1], vec![3.0]).unwrap();
    let y = g.bilinear_upsample(x, 8).unwrap();
    assert!(g.data(y).iter().all(|&v| v == 3.0));
}

#[test]
fn bilinear_ramp_matches_scalar_reference() {
    let ramp = vec![0.0, 1.0, 2.0, 3.0];
    let mut g = Graph::new();
    let x = g.constant(&[2, 2, 1], ramp.clone()).unwrap();
    let y = g.bilinear_upsample(x, 2).unwrap();
    let reference = bilinear_reference(&ramp, 2, 2, 2);
    for (a, b) in g.data(y).iter().zip(&reference) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn bilinear_rejects_bad_factor() {
    let mut g = Graph::new();
    let x = g.constant(&[2, 2, 1], vec![0.0; 4]).unwrap();
    assert!(g.bilinear_upsample(x, 3).is_err());
}

#[test]
fn backward_sum_gives_ones() {
    let mut g = Graph::new();
    let x = g.leaf(&Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap().with_grad());
    let loss = g.sum_all(x);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(x), &[1.0, 1.0, 1.0]);
}

#[test]
fn backward_square_at_three() {
    let mut g = Graph::new();
    let x = g.leaf(&Tensor::new(&[1], vec![3.0]).unwrap().with_grad());
    let y = g.mul(x, x).unwrap();
    let loss = g.sum_all(y);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(x), &[6.0]);
}

#[test]
fn backward_twice_is_error() {
    let mut g = Graph::new();
    let x = g.leaf(&Tensor::new(&[1], vec![2.0]).unwrap().with_grad());
    let loss = g.sum_all(x);
    g.backward(loss).unwrap();
    assert!(matches!(g.backward(loss), Err(F2NetError::BackwardTwice)));
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut g = Graph::new();
    let x = g.leaf(&Tensor::new(&[2], vec![1.0, 2.0]).unwrap().with_grad());
    assert!(matches!(
        g.backward(x),
        Err(F2NetError::NonScalarLoss(_))
    ));
}

#[test]
fn fan_out_accumulates_both_contributions() {
    // y = sum(x*x + 2x): a tensor feeding two consumers sums both gradients
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = rand_tensor(&mut rng, &[4]);
    let err = grad_check1(
        |g, x| {
            let sq = g.mul(x, x)?;
            let two = g.scale(x, 2.0);
            let s = g.add(sq, two)?;
            Ok(g.sum_all(s))
        },
        &x,
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-8, "max rel err {err}");
}

#[test]
fn composed_chain_gradient() {
    // conv -> relu -> pool -> fc, checked against finite differences
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x = rand_tensor(&mut rng, &[4, 4, 2]);
    let k = rand_tensor(&mut rng, &[3, 3, 2, 3]);
    let w = rand_tensor(&mut rng, &[3, 2]);
    let b = rand_tensor(&mut rng, &[2]);
    let err = grad_check(
        |g, ids| {
            let c = g.conv2d(ids[0], ids[1], 1, 1, 1)?;
            let r = g.relu(c);
            let p = g.global_avg_pool(r)?;
            let f = g.fully_connected(p, ids[2], ids[3])?;
            let sq = g.mul(f, f)?;
            Ok(g.sum_all(sq))
        },
        &[x, k, w, b],
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-4, "max rel err {err}");
}

#[test]
fn grad_check_linear_and_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let x = rand_tensor(&mut rng, &[6]);
    let linear = grad_check1(|g, x| Ok(g.sum_all(x)), &x, 1e-3).unwrap();
    assert!(linear < 1e-10, "{linear}");
    let quadratic = grad_check1(
        |g, x| {
            let sq = g.mul(x, x)?;
            Ok(g.sum_all(sq))
        },
        &x,
        1e-3,
    )
    .unwrap();
    assert!(quadratic < 1e-8, "{quadratic}");
}

#[test]
fn sgd_step_examples() {
    let mut p = Tensor::new(&[1], vec![1.0]).unwrap().with_grad();
    p.grad = Some(vec![2.0]);
    p.sgd_update(0.5, Precision::Double).unwrap();
    assert_eq!(p.data, &[0.0]);
    assert!(p.grad.is_none());

    let mut q = Tensor::new(&[2], vec![1.0, -1.0]).unwrap();
    q.grad = Some(vec![5.0, 5.0]);
    q.sgd_update(0.0, Precision::Double).unwrap();
    assert_eq!(q.data, &[1.0, -1.0]);

    // two steps == one step with summed gradients (fixed grads)
    let mut a = Tensor::new(&[1], vec![0.0]).unwrap();
    a.grad = Some(vec![1.0]);
    a.sgd_update(0.1, Precision::Double).unwrap();
    a.grad = Some(vec![3.0]);
    a.sgd_update(0.1, Precision::Double).unwrap();
    let mut b = Tensor::new(&[1], vec![0.0]).unwrap();
    b.grad = Some(vec![4.0]);
    b.sgd_update(0.1, Precision::Double).unwrap();
    assert!((a.data[0] - b.data[0]).abs() < 1e-15);
}

#[test]
fn sgd_missing_grad_is_error() {
    let mut p = Tensor::new(&[1], vec![1.0]).unwrap();
    assert!(matches!(
        p.sgd_update(0.1, Precision::Double),
        Err(F2NetError::MissingGrad(_))
    ));
}

#[test]
fn forward_backward_deterministic_across_runs() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = rand_tensor(&mut rng, &[4, 4, 2]);
        let k = rand_tensor(&mut rng, &[3, 3, 2, 2]);
        let mut g = Graph::new();
        let xi = g.leaf(&x.with_grad());
        let ki = g.leaf(&k.with_grad());
        let c = g.conv2d(xi, ki, 1, 1, 1).unwrap();
        let s = g.sigmoid(c);
        let loss = g.sum_all(s);
        g.backward(loss).unwrap();
        (g.data(loss).to_vec(), g.grad(xi).to_vec(), g.grad(ki).to_vec())
    };
    assert_eq!(run(), run());
}

#[test]
fn differentiable_ops_pass_grad_check_over_seeds() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[3, 3, 2]);
        let w = rand_tensor(&mut rng, &[6, 6, 2]);
        let err = grad_check1(
            |g, x| {
                let s = g.sigmoid(x);
                let r = g.relu(s);
                let up = g.bilinear_upsample(r, 2)?;
                let sm = g.softmax(up, 2)?;
                let wid = g.leaf(&w);
                let weighted = g.mul(sm, wid)?;
                Ok(g.sum_all(weighted))
            },
            &x,
            1e-3,
        )
        .unwrap();
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}
